//! Command line driver. A scenario file plus a subcommand produce fixed
//! file names in the output directory, so downstream tooling never has to
//! guess. Exit codes: 0 success, 2 configuration, 3 approximation budget,
//! 4 failed verification, 5 resource limit, 1 internal.

use clap::{Parser, Subcommand};
use rand::Rng;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::approx::{
    approximate_by_periodic_measure, validate_run, ApproxError, ApproxSetting, ErgodicPresentation,
    GenericPoint,
};
use crate::chain::{
    build_transition_graph, chain_recurrent_classes, is_internally_chain_transitive, BoxGrid,
    ChainClass, ChainError, PseudoOrbit, TransitionGraph,
};
use crate::entropy::{
    entropy_gap_report, markov_metric_entropy, parry_measure, sft_entropy,
    spanning_entropy_estimate, EntropyError,
};
use crate::gluing::{
    glue_periodic_pseudo_orbit, glue_periodic_word_orbit, shadow_glued_map_orbit,
    shadow_glued_word_orbit, GluingError,
};
use crate::graph::NodeGraph;
use crate::measure::MeasureError;
use crate::physical::{
    check_support_inclusion, check_symbol_support_inclusion, estimate_physical_like_set,
    default_checkpoints, BasinEstimate, BasinParams, MeasureCluster, PhysicalError, SampleSystem,
};
use crate::rng::{stream, StreamDomain};
use crate::scenario::{RunSystem, Scenario, ScenarioError, TaskName};
use crate::svg;
use crate::systems::{MapSystem, SystemError, Word};

/// Pseudo-orbits up to this many points are inlined in the JSON report;
/// longer ones go to a little-endian f64 sidecar file, points row-major.
pub const CHAIN_INLINE_CAP: usize = 100_000;

#[derive(Parser, Debug)]
#[command(
    name = "chainrec",
    about = "Chain recurrent classes, periodic approximations, basin clusters, and entropy \
             for circle/torus maps and shifts of finite type",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// Scenario file (JSON).
    #[arg(long, value_name = "FILE", global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for report files (created if missing).
    #[arg(long, value_name = "DIR", global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 picks the library default.
    #[arg(long, value_name = "N", default_value_t = 0, global = true)]
    pub workers: usize,
    /// Overrides the scenario's sampling seed.
    #[arg(long, value_name = "SEED", global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy, Debug)]
pub enum Cmd {
    /// Chain recurrent classes: classes.json, edges.csv, classes.svg.
    Classes,
    /// Glue orbit segments into a periodic pseudo-orbit: glue_report.json.
    Glue,
    /// Approximate an invariant measure by a periodic one: approx_report.json.
    Approx,
    /// Sample empirical measures and cluster them: basins.csv, clusters.json, basins.svg.
    Basins,
    /// Topological and metric entropy: entropy.json.
    Entropy,
    /// Check cluster supports against chain classes: clusters.json, inclusion_report.json.
    Verify,
    /// Every task the scenario configures, in order.
    All,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Budget(String),
    Verification(String),
    Resource(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Resource(_) => 5,
            CliError::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Budget(m)
            | CliError::Verification(m)
            | CliError::Resource(m)
            | CliError::Internal(m) => m,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(m) => CliError::Config(m),
            ScenarioError::Resource(m) => CliError::Resource(m),
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::ResourceLimit(m) => CliError::Resource(m),
            ChainError::InvalidArgument(m) => CliError::Config(m),
            ChainError::NoPath => CliError::Verification(e.to_string()),
            ChainError::CertificateFailed { .. } => CliError::Verification(e.to_string()),
        }
    }
}

impl From<GluingError> for CliError {
    fn from(e: GluingError) -> Self {
        match e {
            GluingError::InvalidArgument(m) => CliError::Config(m),
            GluingError::Certificate { .. } => CliError::Verification(e.to_string()),
            GluingError::Chain(inner) => inner.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<ApproxError> for CliError {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::BudgetFailure { .. } => CliError::Budget(e.to_string()),
            ApproxError::Unsupported(m) | ApproxError::InvalidArgument(m) => CliError::Config(m),
            ApproxError::Chain(inner) => inner.into(),
            ApproxError::Gluing(inner) => inner.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<PhysicalError> for CliError {
    fn from(e: PhysicalError) -> Self {
        match e {
            PhysicalError::InvalidArgument(m) => CliError::Config(m),
            PhysicalError::Approx(inner) => inner.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("serialization: {e}"))
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <FILE> is required".into()))?;
    let scenario = Scenario::from_path(config)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out_dir.display())))?;
    let seed = scenario.effective_seed(cli.seed);
    let ctx = RunContext {
        scenario,
        out_dir,
        seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&ctx, cli.command))
}

fn dispatch(ctx: &RunContext, cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Classes => run_classes(ctx),
        Cmd::Glue => run_glue(ctx),
        Cmd::Approx => run_approx(ctx),
        Cmd::Basins => run_basins(ctx).map(|_| ()),
        Cmd::Entropy => run_entropy(ctx),
        Cmd::Verify => run_verify(ctx),
        Cmd::All => run_all(ctx),
    }
}

struct RunContext {
    scenario: Scenario,
    out_dir: PathBuf,
    seed: u64,
}

impl RunContext {
    /// Writes pretty JSON with a top-level "timestamp" (epoch seconds).
    /// Keys serialize sorted, so byte output is deterministic once the
    /// timestamp line is ignored.
    fn write_json(&self, name: &str, mut value: Value) -> Result<(), CliError> {
        if let Value::Object(map) = &mut value {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            map.insert("timestamp".into(), json!(now));
        }
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
    }

    fn build_graph(&self, f: &MapSystem) -> Result<(BoxGrid, TransitionGraph), CliError> {
        let spec = self.scenario.grid.as_ref().ok_or_else(|| {
            CliError::Config("this command needs a \"grid\" section in the scenario".into())
        })?;
        let grid = BoxGrid::new(f.dimension(), spec.depth)?;
        let delta = spec.delta_boxes * grid.width();
        let graph = build_transition_graph(f, grid, delta, spec.samples_per_box, self.seed)?;
        Ok((grid, graph))
    }

    fn basin_params(&self) -> Result<BasinParams, CliError> {
        let spec = self.scenario.sampling.as_ref().ok_or_else(|| {
            CliError::Config("this command needs a \"sampling\" section in the scenario".into())
        })?;
        let checkpoints = spec
            .checkpoints
            .clone()
            .unwrap_or_else(|| default_checkpoints(spec.orbit_length));
        Ok(BasinParams {
            n_samples: spec.n_samples,
            orbit_length: spec.orbit_length,
            checkpoints,
            cluster_radius: spec.cluster_radius,
            seed: self.seed,
        })
    }
}

fn class_values<G: NodeGraph>(graph: &G, classes: &[ChainClass]) -> Vec<Value> {
    classes
        .iter()
        .map(|c| {
            json!({
                "id": c.id,
                "boxes": c.boxes,
                "is_trivial": c.is_trivial,
                "internally_chain_transitive":
                    is_internally_chain_transitive(graph, &c.boxes),
            })
        })
        .collect()
}

fn edges_csv<G: NodeGraph>(graph: &G) -> String {
    let mut csv = String::from("src_box,dst_box\n");
    for node in 0..graph.node_count() {
        for &succ in graph.successors(node) {
            let _ = writeln!(csv, "{node},{succ}");
        }
    }
    csv
}

fn run_classes(ctx: &RunContext) -> Result<(), CliError> {
    match ctx.scenario.build_system()? {
        RunSystem::Map(f) => {
            let (grid, graph) = ctx.build_graph(&f)?;
            let classes = chain_recurrent_classes(&graph);
            ctx.write_text("edges.csv", &edges_csv(&graph))?;
            ctx.write_json(
                "classes.json",
                json!({
                    "system": f.name(),
                    "grid_depth": grid.depth(),
                    "delta": graph.delta(),
                    "nontrivial_count": classes.iter().filter(|c| !c.is_trivial).count(),
                    "classes": class_values(&graph, &classes),
                }),
            )?;
            if grid.dim() <= 2 {
                ctx.write_text("classes.svg", &svg::class_heatmap(grid, &classes))?;
            }
            Ok(())
        }
        RunSystem::Shift(s) => {
            let graph = s.symbol_graph();
            let classes = chain_recurrent_classes(&graph);
            ctx.write_text("edges.csv", &edges_csv(&graph))?;
            ctx.write_json(
                "classes.json",
                json!({
                    "system": s.name(),
                    "alphabet": s.alphabet(),
                    "nontrivial_count": classes.iter().filter(|c| !c.is_trivial).count(),
                    "classes": class_values(&graph, &classes),
                }),
            )?;
            ctx.write_text("classes.svg", &svg::symbol_strip(s.alphabet(), &classes))?;
            Ok(())
        }
    }
}

/// Inlines the pseudo-orbit when short, else writes a binary sidecar
/// (little-endian f64, points row-major) and records its name.
fn chain_value(ctx: &RunContext, pseudo: &PseudoOrbit) -> Result<Value, CliError> {
    if pseudo.points.len() <= CHAIN_INLINE_CAP {
        return Ok(serde_json::to_value(pseudo)?);
    }
    let mut bytes = Vec::with_capacity(pseudo.points.len() * pseudo.points.dim() * 8);
    for t in 0..pseudo.points.len() {
        for &x in pseudo.points.point(t) {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let name = "glue_chain.bin";
    let path = ctx.out_dir.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(json!({
        "sidecar": name,
        "points": pseudo.points.len(),
        "dim": pseudo.points.dim(),
        "delta": pseudo.delta,
        "periodic": pseudo.periodic,
    }))
}

fn run_glue(ctx: &RunContext) -> Result<(), CliError> {
    let spec = ctx.scenario.glue.as_ref().ok_or_else(|| {
        CliError::Config("the glue command needs a \"glue\" section in the scenario".into())
    })?;
    match ctx.scenario.build_system()? {
        RunSystem::Map(f) => {
            if spec.map_segments.is_empty() {
                return Err(CliError::Config(
                    "glue on a map system needs non-empty map_segments".into(),
                ));
            }
            let (grid, graph) = ctx.build_graph(&f)?;
            let classes = chain_recurrent_classes(&graph);
            let segments: Vec<(Vec<f64>, usize)> = spec
                .map_segments
                .iter()
                .map(|s| (s.start.clone(), s.length))
                .collect();
            let first_box = grid.index_of(&segments[0].0) as u32;
            let class = classes
                .iter()
                .find(|c| c.boxes.contains(&first_box))
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "first segment starts in box {first_box}, which lies in no chain \
                         recurrent class"
                    ))
                })?;
            let (schedule, pseudo) = glue_periodic_pseudo_orbit(&f, &graph, class, &segments)?;
            let certificate = shadow_glued_map_orbit(&f, &pseudo, &schedule)?;
            let mut report = json!({
                "system": f.name(),
                "class_id": class.id,
                "schedule": schedule,
                "certificate": certificate,
            });
            report["chain"] = chain_value(ctx, &pseudo)?;
            ctx.write_json("glue_report.json", report)
        }
        RunSystem::Shift(s) => {
            if spec.word_segments.is_empty() {
                return Err(CliError::Config(
                    "glue on a subshift needs non-empty word_segments".into(),
                ));
            }
            let depth = spec.tracking_depth.unwrap_or(8);
            let segments: Vec<(Word, usize)> = spec
                .word_segments
                .iter()
                .map(|w| {
                    let word = if w.periodic {
                        Word::periodic(w.symbols.clone())
                    } else {
                        Word::finite(w.symbols.clone())
                    };
                    (word, w.length)
                })
                .collect();
            let (schedule, chain) = glue_periodic_word_orbit(&s, &segments, depth)?;
            let certificate = shadow_glued_word_orbit(&s, &chain, &schedule)?;
            ctx.write_json(
                "glue_report.json",
                json!({
                    "system": s.name(),
                    "tracking_depth": depth,
                    "schedule": schedule,
                    "certificate": certificate,
                    "chain": chain,
                }),
            )
        }
    }
}

/// The chain class hosting the presentation: the one containing the first
/// concretely given starting point, else the largest class.
fn pick_class<'c>(
    grid: BoxGrid,
    classes: &'c [ChainClass],
    presentation: &ErgodicPresentation,
) -> Result<&'c ChainClass, CliError> {
    let start = presentation.components.iter().find_map(|c| match &c.point {
        GenericPoint::Euclid(x) => Some(x.clone()),
        GenericPoint::Periodic(orbit) => Some(orbit.point(0).to_vec()),
        _ => None,
    });
    if let Some(x) = start {
        let b = grid.index_of(&x) as u32;
        if let Some(class) = classes.iter().find(|c| c.boxes.contains(&b)) {
            return Ok(class);
        }
    }
    classes
        .iter()
        .max_by_key(|c| c.boxes.len())
        .ok_or_else(|| CliError::Config("the transition graph has no chain recurrent class".into()))
}

fn run_approx(ctx: &RunContext) -> Result<(), CliError> {
    let spec = ctx.scenario.approx.as_ref().ok_or_else(|| {
        CliError::Config("the approx command needs an \"approx\" section in the scenario".into())
    })?;
    let (run, validation, system_name) = match ctx.scenario.build_system()? {
        RunSystem::Map(f) => {
            let (grid, graph) = ctx.build_graph(&f)?;
            let classes = chain_recurrent_classes(&graph);
            let class = pick_class(grid, &classes, &spec.presentation)?;
            let setting = ApproxSetting::Map {
                system: &f,
                graph: &graph,
                class,
            };
            let run = approximate_by_periodic_measure(&spec.presentation, spec.epsilon, &setting)?;
            let validation = validate_run(&run, &setting);
            (run, validation, f.name().to_string())
        }
        RunSystem::Shift(s) => {
            let setting = ApproxSetting::Sft { system: &s };
            let run = approximate_by_periodic_measure(&spec.presentation, spec.epsilon, &setting)?;
            let validation = validate_run(&run, &setting);
            (run, validation, s.name().to_string())
        }
    };
    let passed = validation.passed;
    let failures = validation.failures.clone();
    // The run's own fields (epsilon, L, delta, M_delta, N, period, budget
    // terms, errors) stay at the top level of the report.
    let mut report = serde_json::to_value(&run)?;
    report["system"] = json!(system_name);
    report["validation"] = serde_json::to_value(&validation)?;
    ctx.write_json("approx_report.json", report)?;
    if !passed {
        return Err(CliError::Verification(format!(
            "approximation run failed validation: {}",
            failures.join("; ")
        )));
    }
    Ok(())
}

fn run_basins(ctx: &RunContext) -> Result<BasinEstimate, CliError> {
    let params = ctx.basin_params()?;
    let system = ctx.scenario.build_system()?;
    let family = ctx.scenario.build_family(system.dim());
    let (estimate, name) = match &system {
        RunSystem::Map(f) => (
            estimate_physical_like_set(&SampleSystem::Map(f), &family, &params)?,
            f.name().to_string(),
        ),
        RunSystem::Shift(s) => (
            estimate_physical_like_set(&SampleSystem::Shift(s), &family, &params)?,
            s.name().to_string(),
        ),
    };

    let dim = system.dim();
    let mut csv = String::from("sample_id");
    for axis in 0..dim {
        let _ = write!(csv, ",x{axis}");
    }
    csv.push_str(",cluster_id,diameter,class\n");
    for s in &estimate.samples {
        let _ = write!(csv, "{}", s.sample_id);
        for &x in &s.initial {
            let _ = write!(csv, ",{x}");
        }
        let _ = writeln!(
            csv,
            ",{},{},{}",
            s.cluster_id,
            s.diameter,
            serde_json::to_value(s.class)?.as_str().unwrap_or("?")
        );
    }
    ctx.write_text("basins.csv", &csv)?;

    ctx.write_json(
        "clusters.json",
        json!({
            "system": name,
            "n_samples": params.n_samples,
            "orbit_length": params.orbit_length,
            "checkpoints": params.checkpoints,
            "cluster_radius": estimate.cluster_radius,
            "diameter_threshold": estimate.diameter_threshold,
            "clusters": estimate.clusters,
        }),
    )?;
    if dim <= 2 {
        ctx.write_text("basins.svg", &svg::basin_scatter(&estimate, dim))?;
    }
    Ok(estimate)
}

fn run_entropy(ctx: &RunContext) -> Result<(), CliError> {
    match ctx.scenario.build_system()? {
        RunSystem::Shift(s) => {
            let top = sft_entropy(&s)?;
            let parry = parry_measure(&s)?;
            let parry_entropy = markov_metric_entropy(&s, &parry.stationary, &parry.transition)?;
            let mut report = json!({
                "system": s.name(),
                "value": top.value,
                "topological": top,
                "parry": {
                    "measure": parry,
                    "metric_entropy": parry_entropy,
                },
            });
            if let Some(espec) = &ctx.scenario.entropy {
                if !espec.candidates.is_empty() {
                    report["gap_report"] =
                        serde_json::to_value(entropy_gap_report(&s, &espec.candidates)?)?;
                }
            }
            ctx.write_json("entropy.json", report)
        }
        RunSystem::Map(f) => {
            let spanning = ctx
                .scenario
                .entropy
                .as_ref()
                .and_then(|e| e.spanning.as_ref())
                .ok_or_else(|| {
                    CliError::Config(
                        "entropy for a map system needs an \"entropy.spanning\" section".into(),
                    )
                })?;
            let mut rng = stream(ctx.seed, StreamDomain::Spanning, 0);
            let seeds: Vec<Vec<f64>> = (0..spanning.seed_count)
                .map(|_| (0..f.dimension()).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let estimate = spanning_entropy_estimate(&f, &seeds, spanning.n, spanning.epsilon)?;
            ctx.write_json(
                "entropy.json",
                json!({
                    "system": f.name(),
                    "value": estimate.value,
                    "spanning": estimate,
                    "n": spanning.n,
                    "epsilon": spanning.epsilon,
                    "seed_count": spanning.seed_count,
                }),
            )
        }
    }
}

fn run_verify(ctx: &RunContext) -> Result<(), CliError> {
    let vspec = ctx.scenario.verify.clone().unwrap_or_default();
    let estimate = run_basins(ctx)?;
    let mut clusters: Vec<MeasureCluster> = estimate.clusters.clone();
    for (i, rep) in vspec.extra_representatives.iter().enumerate() {
        clusters.push(MeasureCluster {
            id: estimate.clusters.len() + i,
            representative: rep.clone(),
            members: 0,
            lebesgue_fraction: 0.0,
        });
    }
    let report = match ctx.scenario.build_system()? {
        RunSystem::Map(f) => {
            let (grid, graph) = ctx.build_graph(&f)?;
            let classes = chain_recurrent_classes(&graph);
            check_support_inclusion(&clusters, &classes, grid, vspec.mass_threshold)?
        }
        RunSystem::Shift(s) => check_symbol_support_inclusion(&s, &clusters, vspec.mass_threshold)?,
    };
    let all_contained = report.all_contained;
    ctx.write_json("inclusion_report.json", serde_json::to_value(&report)?)?;
    if !all_contained {
        return Err(CliError::Verification(
            "some cluster supports are not contained in a single chain recurrent class".into(),
        ));
    }
    Ok(())
}

fn run_all(ctx: &RunContext) -> Result<(), CliError> {
    let tasks = match &ctx.scenario.tasks {
        Some(t) if !t.is_empty() => t.clone(),
        _ => default_tasks(&ctx.scenario)?,
    };
    for task in tasks {
        let cmd = match task {
            TaskName::Classes => Cmd::Classes,
            TaskName::Glue => Cmd::Glue,
            TaskName::Approx => Cmd::Approx,
            TaskName::Basins => Cmd::Basins,
            TaskName::Entropy => Cmd::Entropy,
            TaskName::Verify => Cmd::Verify,
        };
        dispatch(ctx, cmd)?;
    }
    Ok(())
}

/// Tasks the scenario has configuration for, in pipeline order.
fn default_tasks(scenario: &Scenario) -> Result<Vec<TaskName>, CliError> {
    let is_shift = matches!(scenario.build_system()?, RunSystem::Shift(_));
    let mut tasks = Vec::new();
    if scenario.grid.is_some() || is_shift {
        tasks.push(TaskName::Classes);
    }
    if scenario.glue.is_some() {
        tasks.push(TaskName::Glue);
    }
    if scenario.approx.is_some() {
        tasks.push(TaskName::Approx);
    }
    if scenario.sampling.is_some() {
        tasks.push(TaskName::Basins);
    }
    let spanning_given = scenario
        .entropy
        .as_ref()
        .map(|e| e.spanning.is_some())
        .unwrap_or(false);
    if is_shift || spanning_given {
        tasks.push(TaskName::Entropy);
    }
    if scenario.sampling.is_some() && (is_shift || scenario.grid.is_some()) {
        tasks.push(TaskName::Verify);
    }
    if tasks.is_empty() {
        return Err(CliError::Config(
            "the scenario configures no runnable task".into(),
        ));
    }
    Ok(tasks)
}
