//! Periodic-measure approximation: a rational convex combination of ergodic
//! components, each presented by a generic point, is realized to within an
//! explicit error budget by the empirical measure of one periodic orbit.
//! The budget splits into five terms (family tail, rational decomposition,
//! Birkhoff averaging, gluing gaps, shadowing modulus), each kept below
//! epsilon/5, so the achieved per-observable error stays below 4/5 epsilon.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainClass, ChainError, TransitionGraph};
use crate::gluing::{
    glue_periodic_orbit_pieces, glue_periodic_word_orbit, gluing_constant,
    measure_tracking_against_chain, shadow_glued_map_orbit, shadow_glued_word_orbit, GluingError,
    GluingSchedule, ShadowOrbit, ShadowingCertificate,
};
use crate::graph::{max_pairwise_chain_length, strongly_connected_components};
use crate::measure::{
    distance_from_signatures, tail_bound, CompensatedSum, DiscreteMeasure, MeasureError,
    ObservableFamily, WeakStarDistance,
};
use crate::rng::{stream, StreamDomain};
use crate::systems::{MapSystem, Orbit, SymbolicSystem, SystemError, Word};

/// Hard cap on the combined slot count m * N during the segment-length
/// search; past this the input point is treated as non-generic.
pub const TOTAL_ORBIT_CAP: usize = 1 << 22;

/// Truncation levels and symbolic tracking depths are searched up to here;
/// 2^-60 is far below every tolerance in play.
const EXPONENT_CAP: usize = 60;

/// Long-run reference averages use an orbit this many times the segment
/// length.
const LONG_RUN_FACTOR: usize = 10;

/// The five error terms of the approximation budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetTerm {
    Tail,
    Decomposition,
    Birkhoff,
    Gap,
    Modulus,
}

impl std::fmt::Display for BudgetTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BudgetTerm::Tail => "tail",
            BudgetTerm::Decomposition => "decomposition",
            BudgetTerm::Birkhoff => "birkhoff",
            BudgetTerm::Gap => "gap",
            BudgetTerm::Modulus => "modulus",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("budget failure in the {term} term: {detail}")]
    BudgetFailure { term: BudgetTerm, detail: String },
    #[error("unsupported system: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Gluing(#[from] GluingError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// How a component's generic point is presented. Plain float iteration of
/// an expanding map degenerates (every f64 is dyadic), so points meant to
/// be Birkhoff-generic for an absolutely continuous measure are presented
/// by a seed and sampled exactly, and exact cycles are presented as such.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum GenericPoint {
    /// A concrete point iterated directly.
    Euclid(Vec<f64>),
    /// One period of an exact cycle; the orbit repeats it verbatim.
    Periodic(Orbit),
    /// A Lebesgue-random point, drawn exactly from a seeded stream.
    TypicalEuclid { seed: u64 },
    /// A point of a subshift.
    Word(Word),
}

/// Where a component's reference averages come from: a known closed-form
/// measure, the Lebesgue integrals of the family (all zero), or a long-run
/// empirical proxy along the same presented orbit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ComponentReference {
    Measure(DiscreteMeasure),
    Lebesgue,
    LongRun,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErgodicComponent {
    pub point: GenericPoint,
    /// Numerator m_i of the exact rational weight m_i / m.
    pub weight_num: u64,
    pub reference: ComponentReference,
}

/// A convex combination sum theta_i mu_i with theta_i = m_i / m presented
/// through generic points; the weights stay exact integers throughout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErgodicPresentation {
    pub components: Vec<ErgodicComponent>,
    /// Known closed form of the combination, when available, for validation.
    pub target: Option<DiscreteMeasure>,
}

impl ErgodicPresentation {
    pub fn total_weight(&self) -> u64 {
        self.components.iter().map(|c| c.weight_num).sum()
    }

    pub fn validate(&self) -> Result<(), ApproxError> {
        if self.components.is_empty() {
            return Err(ApproxError::InvalidArgument(
                "presentation needs at least one component".into(),
            ));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.weight_num == 0 {
                return Err(ApproxError::InvalidArgument(format!(
                    "component {i} has weight numerator 0"
                )));
            }
        }
        Ok(())
    }
}

/// The two constructively shadowable settings.
pub enum ApproxSetting<'a> {
    Map {
        system: &'a MapSystem,
        graph: &'a TransitionGraph,
        class: &'a ChainClass,
    },
    Sft {
        system: &'a SymbolicSystem,
    },
}

impl ApproxSetting<'_> {
    fn dim(&self) -> usize {
        match self {
            ApproxSetting::Map { system, .. } => system.dimension(),
            ApproxSetting::Sft { .. } => 1,
        }
    }
}

/// Recorded values of the five budget terms, each required below `bound`
/// = epsilon / 5. `tail` and `gap` are the a-priori bounds 2^-L and
/// 2 M / N; `decomposition` is exactly zero for integer weights;
/// `birkhoff` and `modulus` are measured.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BudgetTerms {
    pub tail: f64,
    pub decomposition: f64,
    pub birkhoff: f64,
    pub gap: f64,
    pub modulus: f64,
    pub bound: f64,
}

impl BudgetTerms {
    pub fn failing(&self) -> Vec<BudgetTerm> {
        let mut out = Vec::new();
        if !(self.tail < self.bound) {
            out.push(BudgetTerm::Tail);
        }
        if !(self.decomposition < self.bound) {
            out.push(BudgetTerm::Decomposition);
        }
        if !(self.birkhoff < self.bound) {
            out.push(BudgetTerm::Birkhoff);
        }
        if !(self.gap < self.bound) {
            out.push(BudgetTerm::Gap);
        }
        if !(self.modulus < self.bound) {
            out.push(BudgetTerm::Modulus);
        }
        out
    }

    pub fn all_within(&self) -> bool {
        self.failing().is_empty()
    }
}

/// One completed approximation: the chosen parameters, the glued schedule,
/// the certificate of the shadowing periodic orbit, its empirical measure,
/// and every recorded error. Serialization uses the report's field names.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproximationRun {
    pub epsilon: f64,
    #[serde(rename = "L")]
    pub truncation_level: usize,
    /// Family modulus at epsilon/5: points this close keep every
    /// normalized observable within the modulus budget.
    pub delta: f64,
    #[serde(rename = "M_delta")]
    pub m_delta: usize,
    #[serde(rename = "N")]
    pub segment_length: usize,
    pub period: usize,
    /// Length of the long-run reference proxy, when one was used.
    pub proxy_length: Option<usize>,
    pub budget_terms: BudgetTerms,
    /// Per-observable |integral against the target - orbit average|.
    pub achieved_errors: Vec<f64>,
    pub weak_star_distance: WeakStarDistance,
    /// Target-side integrals of the family, from the component references.
    pub target_signature: Vec<f64>,
    pub result: DiscreteMeasure,
    pub schedule: GluingSchedule,
    pub certificate: ShadowingCertificate,
    pub presentation: ErgodicPresentation,
}

/// Outcome of replaying a run from scratch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub failures: Vec<String>,
    pub achieved_errors: Vec<f64>,
    pub weak_star_value: f64,
}

/// Per-observable |Birkhoff average over the first n points - reference|.
/// The orbit piece is materialized by the caller, so exact orbit sampling
/// and direct iteration are both admissible.
pub fn check_birkhoff_budget(
    family: &ObservableFamily,
    piece: &Orbit,
    n: usize,
    references: &[f64],
) -> Vec<f64> {
    assert!(n >= 1 && n <= piece.len());
    assert_eq!(references.len(), family.len());
    (0..family.len())
        .map(|g| {
            let mut acc = CompensatedSum::default();
            for t in 0..n {
                acc.add(family.eval(g, piece.point(t)));
            }
            (acc.value() / n as f64 - references[g]).abs()
        })
        .collect()
}

/// Materialize the first `len` orbit points of a map-side component.
/// Component index keeps seeded streams distinct within one presentation.
pub(crate) fn map_piece(
    system: &MapSystem,
    index: usize,
    point: &GenericPoint,
    len: usize,
) -> Result<Orbit, ApproxError> {
    match point {
        GenericPoint::Euclid(x) => Ok(system.orbit_segment(x, len)?),
        GenericPoint::Periodic(cycle) => {
            if cycle.is_empty() || cycle.dim() != system.dimension() {
                return Err(ApproxError::InvalidArgument(
                    "periodic presentation must be a nonempty cycle of matching dimension".into(),
                ));
            }
            let mut flat = Vec::with_capacity(len * cycle.dim());
            for t in 0..len {
                flat.extend_from_slice(cycle.point(t % cycle.len()));
            }
            Ok(Orbit::from_flat(cycle.dim(), flat))
        }
        GenericPoint::TypicalEuclid { seed } => {
            let mut rng = stream(*seed, StreamDomain::GluingJobs, index as u64);
            Ok(system.typical_orbit(&mut rng, len)?)
        }
        GenericPoint::Word(_) => Err(ApproxError::InvalidArgument(
            "word-presented component in a map setting".into(),
        )),
    }
}

fn word_of(point: &GenericPoint) -> Result<&Word, ApproxError> {
    match point {
        GenericPoint::Word(w) => Ok(w),
        _ => Err(ApproxError::InvalidArgument(
            "point-presented component in a subshift setting".into(),
        )),
    }
}

/// Embedded orbit of a word under the shift: one point per shift.
pub(crate) fn embedded_word_orbit(system: &SymbolicSystem, w: &Word, len: usize) -> Orbit {
    let flat: Vec<f64> = (0..len).map(|l| system.embed(&w.shift(l))).collect();
    Orbit::from_flat(1, flat)
}

/// Reference averages for one component at segment length n. Returns the
/// per-observable references and the proxy length when a long run was used.
fn component_references(
    family: &ObservableFamily,
    setting: &ApproxSetting,
    index: usize,
    comp: &ErgodicComponent,
    n: usize,
) -> Result<(Vec<f64>, Option<usize>), ApproxError> {
    match &comp.reference {
        ComponentReference::Measure(mu) => {
            if mu.dim() != family.dim() {
                return Err(ApproxError::InvalidArgument(format!(
                    "component {index} reference measure has dimension {}, family needs {}",
                    mu.dim(),
                    family.dim()
                )));
            }
            Ok((
                (0..family.len()).map(|g| family.integrate(g, mu)).collect(),
                None,
            ))
        }
        ComponentReference::Lebesgue => match setting {
            ApproxSetting::Map { .. } => Ok((
                (0..family.len()).map(|g| family.lebesgue_integral(g)).collect(),
                None,
            )),
            ApproxSetting::Sft { .. } => Err(ApproxError::InvalidArgument(
                "Lebesgue reference is only meaningful for map systems".into(),
            )),
        },
        ComponentReference::LongRun => {
            let proxy = LONG_RUN_FACTOR * n;
            let piece = match setting {
                ApproxSetting::Map { system, .. } => map_piece(system, index, &comp.point, proxy)?,
                ApproxSetting::Sft { system } => {
                    embedded_word_orbit(system, word_of(&comp.point)?, proxy)
                }
            };
            let refs = (0..family.len())
                .map(|g| {
                    let mut acc = CompensatedSum::default();
                    for t in 0..proxy {
                        acc.add(family.eval(g, piece.point(t)));
                    }
                    acc.value() / proxy as f64
                })
                .collect();
            Ok((refs, Some(proxy)))
        }
    }
}

/// Smallest truncation level with 2^-L strictly inside the bound.
fn truncation_for(bound: f64) -> Result<usize, ApproxError> {
    let mut l = 1;
    while !(tail_bound(l) < bound) {
        l += 1;
        if l > EXPONENT_CAP {
            return Err(ApproxError::BudgetFailure {
                term: BudgetTerm::Tail,
                detail: format!("no truncation level up to {EXPONENT_CAP} fits the bound {bound}"),
            });
        }
    }
    Ok(l)
}

struct SearchOutcome {
    n: usize,
    birkhoff: f64,
    references: Vec<Vec<f64>>,
    proxy_length: Option<usize>,
}

/// Double N until both the gap condition 2 M / N < bound and the Birkhoff
/// condition (every component's averages within bound of its references)
/// hold, capping the combined slot count.
fn search_segment_length(
    family: &ObservableFamily,
    setting: &ApproxSetting,
    presentation: &ErgodicPresentation,
    epsilon: f64,
    m_delta: usize,
) -> Result<SearchOutcome, ApproxError> {
    let bound = epsilon / 5.0;
    let m_total: usize = presentation.total_weight() as usize;
    let mut n = ((10.0 * m_delta as f64 / epsilon).ceil() as usize).max(1);
    let mut last_birkhoff: Option<f64> = None;
    loop {
        let gap_ok = 2.0 * m_delta as f64 / (n as f64) < bound;
        // Refuse the slot count before materializing any orbit of length n.
        if m_total.saturating_mul(n) > TOTAL_ORBIT_CAP {
            let (term, detail) = if !gap_ok {
                (
                    BudgetTerm::Gap,
                    format!(
                        "2 M / N = {:.3e} still at or above {bound:.3e} at the cap",
                        2.0 * m_delta as f64 / n as f64
                    ),
                )
            } else {
                (
                    BudgetTerm::Birkhoff,
                    match last_birkhoff {
                        Some(b) => format!(
                            "averages still {b:.3e} from the references at the cap; \
                             the presented point is behaving non-generically"
                        ),
                        None => format!(
                            "segment length {n} overruns the cap {TOTAL_ORBIT_CAP} before \
                             any average can be checked"
                        ),
                    },
                )
            };
            return Err(ApproxError::BudgetFailure { term, detail });
        }
        let mut birkhoff_max = 0.0f64;
        let mut references = Vec::with_capacity(presentation.components.len());
        let mut proxy_length = None;
        for (i, comp) in presentation.components.iter().enumerate() {
            let (refs, proxy) = component_references(family, setting, i, comp, n)?;
            if proxy.is_some() {
                proxy_length = proxy;
            }
            let piece = match setting {
                ApproxSetting::Map { system, .. } => map_piece(system, i, &comp.point, n)?,
                ApproxSetting::Sft { system } => {
                    embedded_word_orbit(system, word_of(&comp.point)?, n)
                }
            };
            let devs = check_birkhoff_budget(family, &piece, n, &refs);
            for d in devs {
                birkhoff_max = birkhoff_max.max(d);
            }
            references.push(refs);
        }
        if gap_ok && birkhoff_max < bound {
            return Ok(SearchOutcome {
                n,
                birkhoff: birkhoff_max,
                references,
                proxy_length,
            });
        }
        last_birkhoff = Some(birkhoff_max);
        n *= 2;
    }
}

/// Execute the construction: pick the truncation level and modulus, search
/// the segment length, repeat component i's segment m_i times, glue, shadow,
/// and record every error term.
pub fn approximate_by_periodic_measure(
    presentation: &ErgodicPresentation,
    epsilon: f64,
    setting: &ApproxSetting,
) -> Result<ApproximationRun, ApproxError> {
    presentation.validate()?;
    if !(epsilon > 0.0) {
        return Err(ApproxError::InvalidArgument("epsilon must be positive".into()));
    }
    let bound = epsilon / 5.0;
    let truncation_level = truncation_for(bound)?;
    let family = ObservableFamily::trig(setting.dim(), truncation_level);
    let delta = family.modulus(bound);

    // Shadowing feasibility and the gluing constant.
    let (m_delta, sft_depth) = match setting {
        ApproxSetting::Map { system, graph, class } => {
            let lambda = system.expansion_factor().ok_or_else(|| {
                ApproxError::Unsupported(format!(
                    "{} has no constructive shadowing; expanding interval maps only",
                    system.name()
                ))
            })?;
            let shadow_bound = 2.0 * graph.certificate_delta() / (lambda - 1.0);
            if !(shadow_bound < delta) {
                return Err(ApproxError::BudgetFailure {
                    term: BudgetTerm::Modulus,
                    detail: format!(
                        "graph tolerance gives shadowing bound {shadow_bound:.3e}, \
                         at or above the family modulus {delta:.3e}; refine the grid"
                    ),
                });
            }
            (gluing_constant(*graph, class)?, 0usize)
        }
        ApproxSetting::Sft { system } => {
            let mut m = 1usize;
            while !(0.5f64.powi(m as i32 + 1) < delta) {
                m += 1;
                if m > EXPONENT_CAP {
                    return Err(ApproxError::BudgetFailure {
                        term: BudgetTerm::Modulus,
                        detail: "no tracking depth fits the family modulus".into(),
                    });
                }
            }
            let graph = system.symbol_graph();
            let comps = strongly_connected_components(&graph);
            let lead = word_of(&presentation.components[0].point)?
                .symbol_at(0)
                .ok_or_else(|| ApproxError::InvalidArgument("empty component word".into()))?;
            let class_idx = comps
                .iter()
                .position(|c| c.contains(&(lead as u32)))
                .ok_or_else(|| ApproxError::Internal("symbol outside the symbol graph".into()))?;
            let members: Vec<u64> = comps[class_idx].iter().map(|&s| s as u64).collect();
            let m_sym = max_pairwise_chain_length(&graph, &members).ok_or_else(|| {
                ApproxError::InvalidArgument("component symbols admit no return chains".into())
            })?;
            (m + m_sym - 1, m)
        }
    };

    let search = search_segment_length(&family, setting, presentation, epsilon, m_delta)?;
    let n = search.n;
    let m_total: usize = presentation.total_weight() as usize;

    // Component i's segment, repeated m_i times, then glue and shadow.
    let (schedule, certificate, measured_deviation, result) = match setting {
        ApproxSetting::Map { system, graph, class } => {
            let mut pieces: Vec<Orbit> = Vec::with_capacity(m_total);
            for (i, comp) in presentation.components.iter().enumerate() {
                let piece = map_piece(system, i, &comp.point, n + 1)?;
                for _ in 0..comp.weight_num {
                    pieces.push(piece.clone());
                }
            }
            let (schedule, pseudo) = glue_periodic_orbit_pieces(system, graph, class, &pieces)?;
            let certificate = shadow_glued_map_orbit(system, &pseudo, &schedule)?;
            if !certificate.guaranteed {
                return Err(ApproxError::Internal(
                    "expanding-map pullback exceeded its claimed bound".into(),
                ));
            }
            let ShadowOrbit::Euclid(cycle) = &certificate.shadow else {
                return Err(ApproxError::Internal("map shadow is not a point cycle".into()));
            };
            let measured = measure_tracking_against_chain(system, cycle, &schedule, &pseudo)?
                .into_iter()
                .fold(0.0f64, f64::max);
            let result = DiscreteMeasure::empirical(cycle, cycle.len())?;
            (schedule, certificate, measured, result)
        }
        ApproxSetting::Sft { system } => {
            let mut segments: Vec<(Word, usize)> = Vec::with_capacity(m_total);
            for comp in &presentation.components {
                let w = word_of(&comp.point)?;
                for _ in 0..comp.weight_num {
                    segments.push((w.clone(), n));
                }
            }
            let (schedule, chain) = glue_periodic_word_orbit(system, &segments, sft_depth)?;
            let certificate = shadow_glued_word_orbit(system, &chain, &schedule)?;
            if !certificate.guaranteed {
                return Err(ApproxError::Internal(
                    "subshift shadow exceeded its claimed bound".into(),
                ));
            }
            let ShadowOrbit::Word(z) = &certificate.shadow else {
                return Err(ApproxError::Internal("subshift shadow is not a word".into()));
            };
            // Deviation in the embedded coordinate, where the family lives.
            let mut measured = 0.0f64;
            for (i, (_, n_i)) in schedule.segments.iter().enumerate() {
                let c = schedule.offsets[i];
                for l in 0..*n_i {
                    let t = c + l;
                    let d = (system.embed(&z.shift(t)) - system.embed(&chain.words[t])).abs();
                    measured = measured.max(d);
                }
            }
            let cycle = embedded_word_orbit(system, z, schedule.period);
            let result = DiscreteMeasure::empirical(&cycle, schedule.period)?;
            (schedule, certificate, measured, result)
        }
    };

    let period = schedule.period;
    if period < m_total * n + m_total || period > m_total * n + m_total * m_delta {
        return Err(ApproxError::Internal(format!(
            "period {period} escapes [{}, {}]",
            m_total * n + m_total,
            m_total * n + m_total * m_delta
        )));
    }

    // Exact rational weights make the decomposition term literally zero.
    let m_f = presentation.total_weight() as f64;
    let mut target_signature = vec![0.0f64; family.len()];
    for (i, comp) in presentation.components.iter().enumerate() {
        let theta = comp.weight_num as f64 / m_f;
        for g in 0..family.len() {
            target_signature[g] += theta * search.references[i][g];
        }
    }
    let result_signature = family.signature(&result);
    let achieved_errors: Vec<f64> = target_signature
        .iter()
        .zip(&result_signature)
        .map(|(a, b)| (a - b).abs())
        .collect();

    let budget_terms = BudgetTerms {
        tail: tail_bound(truncation_level),
        decomposition: 0.0,
        birkhoff: search.birkhoff,
        gap: 2.0 * m_delta as f64 / n as f64,
        modulus: measured_deviation / delta * bound,
        bound,
    };
    if !budget_terms.all_within() {
        let term = budget_terms.failing()[0];
        return Err(ApproxError::BudgetFailure {
            term,
            detail: "a recorded term escaped its budget after construction".into(),
        });
    }
    let worst = achieved_errors.iter().copied().fold(0.0f64, f64::max);
    if !(worst < 0.8 * epsilon) {
        return Err(ApproxError::Internal(format!(
            "achieved error {worst:.3e} escaped the 4/5 bound despite the budget holding"
        )));
    }

    let weak_star_distance = distance_from_signatures(&target_signature, &result_signature);

    Ok(ApproximationRun {
        epsilon,
        truncation_level,
        delta,
        m_delta,
        segment_length: n,
        period,
        proxy_length: search.proxy_length,
        budget_terms,
        achieved_errors,
        weak_star_distance,
        target_signature,
        result,
        schedule,
        certificate,
        presentation: presentation.clone(),
    })
}

/// Replay a run from scratch: regenerate the reference averages and orbit
/// pieces from the stored presentation, re-verify the shadow is a genuine
/// periodic orbit, rebuild its empirical measure, and re-test every budget
/// term and error bound against the run's epsilon. Each violation is
/// reported by name.
pub fn validate_run(run: &ApproximationRun, setting: &ApproxSetting) -> ValidationReport {
    let mut failures: Vec<String> = Vec::new();
    let fail = |msg: String, failures: &mut Vec<String>| failures.push(msg);

    if let Err(e) = run.schedule.validate() {
        fail(format!("schedule arithmetic: {e}"), &mut failures);
    }
    if let Err(e) = run.presentation.validate() {
        fail(format!("presentation: {e}"), &mut failures);
    }
    let bound = run.epsilon / 5.0;
    let family = ObservableFamily::trig(setting.dim(), run.truncation_level);

    // Budget terms, recomputed where the inputs allow it.
    if !(tail_bound(run.truncation_level) < bound) {
        fail(
            format!(
                "tail term: 2^-{} = {:.3e} is not below {bound:.3e}",
                run.truncation_level,
                tail_bound(run.truncation_level)
            ),
            &mut failures,
        );
    }
    if !(run.budget_terms.decomposition < bound) {
        fail("decomposition term escapes the budget".into(), &mut failures);
    }
    let gap = 2.0 * run.m_delta as f64 / run.segment_length as f64;
    if !(gap < bound) {
        fail(
            format!("gap term: 2 M / N = {gap:.3e} is not below {bound:.3e}"),
            &mut failures,
        );
    }

    // References and Birkhoff deviations, regenerated deterministically.
    let n = run.segment_length;
    let mut references: Vec<Vec<f64>> = Vec::new();
    for (i, comp) in run.presentation.components.iter().enumerate() {
        match component_references(&family, setting, i, comp, n) {
            Ok((refs, _)) => {
                let piece = match setting {
                    ApproxSetting::Map { system, .. } => map_piece(system, i, &comp.point, n),
                    ApproxSetting::Sft { system } => word_of(&comp.point)
                        .map(|w| embedded_word_orbit(system, w, n)),
                };
                match piece {
                    Ok(piece) => {
                        let devs = check_birkhoff_budget(&family, &piece, n, &refs);
                        let worst = devs.into_iter().fold(0.0f64, f64::max);
                        if !(worst < bound) {
                            fail(
                                format!(
                                    "birkhoff term: component {i} deviates {worst:.3e}, \
                                     not below {bound:.3e}"
                                ),
                                &mut failures,
                            );
                        }
                        references.push(refs);
                    }
                    Err(e) => fail(format!("component {i} orbit: {e}"), &mut failures),
                }
            }
            Err(e) => fail(format!("component {i} references: {e}"), &mut failures),
        }
    }

    // Shadow-side replay.
    let mut achieved_errors: Vec<f64> = Vec::new();
    let mut weak_star_value = f64::NAN;
    let expected_delta = family.modulus(bound);
    if (run.delta - expected_delta).abs() > 1e-15 {
        fail(
            format!(
                "stored modulus {:.6e} disagrees with the family's {:.6e}",
                run.delta, expected_delta
            ),
            &mut failures,
        );
    }
    let mut target_signature = vec![0.0f64; family.len()];
    if references.len() == run.presentation.components.len() {
        let m_f = run.presentation.total_weight() as f64;
        for (i, comp) in run.presentation.components.iter().enumerate() {
            let theta = comp.weight_num as f64 / m_f;
            for g in 0..family.len() {
                target_signature[g] += theta * references[i][g];
            }
        }
    } else {
        target_signature.clone_from(&run.target_signature);
    }

    match (setting, &run.certificate.shadow) {
        (ApproxSetting::Map { system, .. }, ShadowOrbit::Euclid(cycle)) => {
            if cycle.len() != run.period {
                fail("shadow cycle length disagrees with the period".into(), &mut failures);
            } else {
                let mut worst_step = 0.0f64;
                for t in 0..cycle.len() {
                    let image = system.image(cycle.point(t));
                    let d = system.metric(&image, cycle.point((t + 1) % cycle.len()));
                    worst_step = worst_step.max(d);
                }
                if !(worst_step < 1e-9) {
                    fail(
                        format!("shadow is not a genuine orbit: worst step defect {worst_step:.3e}"),
                        &mut failures,
                    );
                }
                // Tracking deviation against regenerated segment slots.
                let mut measured = 0.0f64;
                let mut piece_cache: Vec<Orbit> = Vec::new();
                for (i, comp) in run.presentation.components.iter().enumerate() {
                    match map_piece(system, i, &comp.point, n + 1) {
                        Ok(p) => piece_cache.push(p),
                        Err(e) => {
                            fail(format!("component {i} orbit: {e}"), &mut failures);
                            piece_cache.push(Orbit::from_flat(system.dimension(), vec![]));
                        }
                    }
                }
                let mut seg_idx = 0usize;
                for (i, comp) in run.presentation.components.iter().enumerate() {
                    for _ in 0..comp.weight_num {
                        if seg_idx >= run.schedule.segments.len() {
                            break;
                        }
                        let c = run.schedule.offsets[seg_idx];
                        let piece = &piece_cache[i];
                        if piece.len() >= n {
                            for l in 0..n {
                                let d = system
                                    .metric(cycle.point((c + l) % run.period), piece.point(l));
                                measured = measured.max(d);
                            }
                        }
                        seg_idx += 1;
                    }
                }
                if !(measured < expected_delta) {
                    fail(
                        format!(
                            "modulus term: tracking deviation {measured:.3e} reaches the \
                             modulus {expected_delta:.3e}"
                        ),
                        &mut failures,
                    );
                }
                match DiscreteMeasure::empirical(cycle, cycle.len()) {
                    Ok(mu) => {
                        let sig = family.signature(&mu);
                        achieved_errors = target_signature
                            .iter()
                            .zip(&sig)
                            .map(|(a, b)| (a - b).abs())
                            .collect();
                        weak_star_value = distance_from_signatures(&target_signature, &sig).value;
                    }
                    Err(e) => fail(format!("empirical measure: {e}"), &mut failures),
                }
            }
        }
        (ApproxSetting::Sft { system }, ShadowOrbit::Word(z)) => {
            if !z.is_periodic() {
                fail("shadow word is not periodic".into(), &mut failures);
            }
            if let Some(pos) = system.admissibility_defect(z) {
                fail(
                    format!("shadow word is inadmissible at position {pos}"),
                    &mut failures,
                );
            }
            let mut measured = 0.0f64;
            for (i, (start, n_i)) in run.schedule.segments.iter().enumerate() {
                let c = run.schedule.offsets[i];
                if let Some(w) = start.as_word() {
                    for l in 0..*n_i {
                        let d = (system.embed(&z.shift(c + l)) - system.embed(&w.shift(l))).abs();
                        measured = measured.max(d);
                    }
                } else {
                    fail(format!("segment {i} is not a word"), &mut failures);
                }
            }
            if !(measured < expected_delta) {
                fail(
                    format!(
                        "modulus term: tracking deviation {measured:.3e} reaches the \
                         modulus {expected_delta:.3e}"
                    ),
                    &mut failures,
                );
            }
            let cycle = embedded_word_orbit(system, z, run.period);
            match DiscreteMeasure::empirical(&cycle, run.period) {
                Ok(mu) => {
                    let sig = family.signature(&mu);
                    achieved_errors = target_signature
                        .iter()
                        .zip(&sig)
                        .map(|(a, b)| (a - b).abs())
                        .collect();
                    weak_star_value = distance_from_signatures(&target_signature, &sig).value;
                }
                Err(e) => fail(format!("empirical measure: {e}"), &mut failures),
            }
        }
        _ => fail("certificate shadow kind does not match the setting".into(), &mut failures),
    }

    if achieved_errors.is_empty() {
        fail("could not rebuild the orbit measure".into(), &mut failures);
    } else {
        let worst = achieved_errors.iter().copied().fold(0.0f64, f64::max);
        if !(worst < 0.8 * run.epsilon) {
            fail(
                format!(
                    "achieved error {worst:.3e} is not below 4/5 epsilon = {:.3e}",
                    0.8 * run.epsilon
                ),
                &mut failures,
            );
        }
        if !(weak_star_value < run.epsilon) {
            fail(
                format!(
                    "weak* distance {weak_star_value:.3e} is not below epsilon {:.3e}",
                    run.epsilon
                ),
                &mut failures,
            );
        }
        // The optional closed-form target must agree with the references.
        if let Some(target) = &run.presentation.target {
            if target.dim() == family.dim() {
                let sig = family.signature(target);
                for (g, (a, b)) in sig.iter().zip(&target_signature).enumerate() {
                    if (a - b).abs() > bound {
                        fail(
                            format!(
                                "closed-form target disagrees with the references on \
                                 observable {g} by {:.3e}",
                                (a - b).abs()
                            ),
                            &mut failures,
                        );
                        break;
                    }
                }
            }
        }
    }

    ValidationReport {
        passed: failures.is_empty(),
        failures,
        achieved_errors,
        weak_star_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_transition_graph, chain_recurrent_classes, BoxGrid};
    use crate::measure::weak_star_distance;

    fn doubling_setting() -> (MapSystem, TransitionGraph, Vec<ChainClass>) {
        let f = MapSystem::doubling();
        // Depth 12 keeps the shadowing bound 6 * 2^-12 under the family
        // modulus for epsilon down to 0.2.
        let grid = BoxGrid::new(1, 12).unwrap();
        let graph = build_transition_graph(&f, grid, grid.width(), 16, 5).unwrap();
        let classes = chain_recurrent_classes(&graph);
        assert_eq!(classes.len(), 1);
        (f, graph, classes)
    }

    #[test]
    fn fixed_point_presentation_is_reproduced_exactly() {
        let (f, graph, classes) = doubling_setting();
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class: &classes[0],
        };
        let presentation = ErgodicPresentation {
            components: vec![ErgodicComponent {
                point: GenericPoint::Euclid(vec![0.0]),
                weight_num: 1,
                reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[0.0])),
            }],
            target: Some(DiscreteMeasure::dirac(&[0.0])),
        };
        let run = approximate_by_periodic_measure(&presentation, 0.2, &setting).unwrap();
        // The orbit never leaves the fixed point, so every atom is 0 and
        // every error vanishes identically.
        assert_eq!(run.result.len(), 1);
        assert_eq!(run.result.atom(0), &[0.0]);
        for e in &run.achieved_errors {
            assert_eq!(*e, 0.0);
        }
        assert_eq!(run.weak_star_distance.value, 0.0);
        assert!(validate_run(&run, &setting).passed);
    }

    #[test]
    fn doubling_mixture_of_fixed_and_period_two_meets_the_bound() {
        let (f, graph, classes) = doubling_setting();
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class: &classes[0],
        };
        let third = 1.0 / 3.0;
        let two_thirds = f.image(&[third])[0];
        let cycle_measure =
            DiscreteMeasure::new(1, vec![third, two_thirds], vec![0.5, 0.5]).unwrap();
        let target = DiscreteMeasure::new(
            1,
            vec![0.0, third, two_thirds],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let presentation = ErgodicPresentation {
            components: vec![
                ErgodicComponent {
                    point: GenericPoint::Euclid(vec![0.0]),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[0.0])),
                },
                ErgodicComponent {
                    point: GenericPoint::Periodic(f.orbit_segment(&[third], 2).unwrap()),
                    weight_num: 1,
                    reference: ComponentReference::Measure(cycle_measure),
                },
            ],
            target: Some(target.clone()),
        };
        let epsilon = 0.2;
        let run = approximate_by_periodic_measure(&presentation, epsilon, &setting).unwrap();

        assert!(run.budget_terms.all_within());
        for e in &run.achieved_errors {
            assert!(*e < 0.8 * epsilon);
        }
        // Independent check straight against the closed-form mixture.
        let family = ObservableFamily::trig(1, run.truncation_level);
        let d = weak_star_distance(&target, &run.result, &family).unwrap();
        assert!(d.value < epsilon, "weak* distance {} too large", d.value);

        let report = validate_run(&run, &setting);
        assert!(report.passed, "failures: {:?}", report.failures);
    }

    #[test]
    fn full_shift_two_deltas_build_the_block_word() {
        let sys = SymbolicSystem::full_shift(2);
        let setting = ApproxSetting::Sft { system: &sys };
        let zero = Word::periodic(vec![0]);
        let one = Word::periodic(vec![1]);
        let e0 = sys.embed(&zero);
        let e1 = sys.embed(&one);
        let target = DiscreteMeasure::new(1, vec![e0, e1], vec![0.5, 0.5]).unwrap();
        let presentation = ErgodicPresentation {
            components: vec![
                ErgodicComponent {
                    point: GenericPoint::Word(zero),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[e0])),
                },
                ErgodicComponent {
                    point: GenericPoint::Word(one),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[e1])),
                },
            ],
            target: Some(target),
        };
        let epsilon = 0.3;
        let run = approximate_by_periodic_measure(&presentation, epsilon, &setting).unwrap();
        assert!(run.budget_terms.all_within());
        for e in &run.achieved_errors {
            assert!(*e < 0.8 * epsilon);
        }
        assert!(run.weak_star_distance.value < epsilon);
        // Period sits in the exact window around m * N.
        let m = 2;
        assert!(run.period >= m * run.segment_length + m);
        assert!(run.period <= m * run.segment_length + m * run.m_delta);

        let report = validate_run(&run, &setting);
        assert!(report.passed, "failures: {:?}", report.failures);
    }

    #[test]
    fn typical_point_reaches_lebesgue_averages() {
        let (f, graph, classes) = doubling_setting();
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class: &classes[0],
        };
        let presentation = ErgodicPresentation {
            components: vec![ErgodicComponent {
                point: GenericPoint::TypicalEuclid { seed: 7 },
                weight_num: 1,
                reference: ComponentReference::Lebesgue,
            }],
            target: None,
        };
        let epsilon = 0.5;
        let run = approximate_by_periodic_measure(&presentation, epsilon, &setting).unwrap();
        assert!(run.budget_terms.all_within());
        for e in &run.achieved_errors {
            assert!(*e < 0.8 * epsilon);
        }
        let report = validate_run(&run, &setting);
        assert!(report.passed, "failures: {:?}", report.failures);
    }

    #[test]
    fn dyadic_float_point_is_flagged_as_non_generic() {
        // A raw f64 is a dyadic rational: its exact doubling orbit ends at
        // the fixed point, so Lebesgue-referenced averages never converge
        // and the budget search must fail on the Birkhoff term.
        let (f, graph, classes) = doubling_setting();
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class: &classes[0],
        };
        let presentation = ErgodicPresentation {
            components: vec![ErgodicComponent {
                point: GenericPoint::Euclid(vec![0.137]),
                weight_num: 1,
                reference: ComponentReference::Lebesgue,
            }],
            target: None,
        };
        match approximate_by_periodic_measure(&presentation, 0.5, &setting) {
            Err(ApproxError::BudgetFailure { term, .. }) => {
                assert_eq!(term, BudgetTerm::Birkhoff);
            }
            other => panic!("expected a Birkhoff budget failure, got {other:?}"),
        }
    }

    #[test]
    fn result_measure_is_invariant_up_to_atom_rotation() {
        let (f, graph, classes) = doubling_setting();
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class: &classes[0],
        };
        let presentation = ErgodicPresentation {
            components: vec![ErgodicComponent {
                point: GenericPoint::TypicalEuclid { seed: 3 },
                weight_num: 1,
                reference: ComponentReference::Lebesgue,
            }],
            target: None,
        };
        let run = approximate_by_periodic_measure(&presentation, 0.5, &setting).unwrap();
        let pushed = run.result.pushforward(&f).unwrap();
        // Pushing the orbit measure forward permutes the orbit, so the two
        // measures agree as sets of weighted atoms to rounding error.
        let mut a: Vec<(f64, f64)> = (0..run.result.len())
            .map(|i| (run.result.atom(i)[0], run.result.weight(i)))
            .collect();
        let mut b: Vec<(f64, f64)> = (0..pushed.len())
            .map(|i| (pushed.atom(i)[0], pushed.weight(i)))
            .collect();
        a.sort_by(|p, q| p.0.total_cmp(&q.0));
        b.sort_by(|p, q| p.0.total_cmp(&q.0));
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((p.0 - q.0).abs() < 1e-12);
            assert!((p.1 - q.1).abs() < 1e-12);
        }
    }

    #[test]
    fn validator_rejects_a_perturbed_shadow() {
        let sys = SymbolicSystem::full_shift(2);
        let setting = ApproxSetting::Sft { system: &sys };
        let zero = Word::periodic(vec![0]);
        let one = Word::periodic(vec![1]);
        let presentation = ErgodicPresentation {
            components: vec![
                ErgodicComponent {
                    point: GenericPoint::Word(zero.clone()),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[sys
                        .embed(&zero)])),
                },
                ErgodicComponent {
                    point: GenericPoint::Word(one.clone()),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[sys
                        .embed(&one)])),
                },
            ],
            target: None,
        };
        let run = approximate_by_periodic_measure(&presentation, 0.3, &setting).unwrap();
        assert!(validate_run(&run, &setting).passed);

        // Swap the shadow for an unrelated periodic word: the tracking
        // deviation and the achieved errors both blow past their bounds.
        let mut corrupted = run.clone();
        corrupted.certificate.shadow = ShadowOrbit::Word(Word::periodic(vec![1, 0]));
        let report = validate_run(&corrupted, &setting);
        assert!(!report.passed);
        assert!(report
            .failures
            .iter()
            .any(|f| f.contains("modulus") || f.contains("achieved")));
    }

    #[test]
    fn validator_names_the_failing_term_when_epsilon_shrinks() {
        let sys = SymbolicSystem::full_shift(2);
        let setting = ApproxSetting::Sft { system: &sys };
        let zero = Word::periodic(vec![0]);
        let one = Word::periodic(vec![1]);
        let presentation = ErgodicPresentation {
            components: vec![
                ErgodicComponent {
                    point: GenericPoint::Word(zero.clone()),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[sys
                        .embed(&zero)])),
                },
                ErgodicComponent {
                    point: GenericPoint::Word(one.clone()),
                    weight_num: 1,
                    reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[sys
                        .embed(&one)])),
                },
            ],
            target: None,
        };
        let run = approximate_by_periodic_measure(&presentation, 0.3, &setting).unwrap();
        let mut tightened = run.clone();
        tightened.epsilon /= 2.0;
        let report = validate_run(&tightened, &setting);
        assert!(!report.passed);
        // The truncation level was chosen minimal for the original epsilon,
        // so halving epsilon must flag the tail term by name.
        assert!(
            report.failures.iter().any(|f| f.contains("tail")),
            "failures: {:?}",
            report.failures
        );
    }

    #[test]
    fn non_expanding_map_is_unsupported() {
        let f = MapSystem::north_south();
        let grid = BoxGrid::new(1, 6).unwrap();
        let graph = build_transition_graph(&f, grid, 2.0 * grid.width(), 32, 5).unwrap();
        let classes = chain_recurrent_classes(&graph);
        let class = classes
            .iter()
            .find(|c| c.contains(grid.index_of(&[0.0]) as u32))
            .unwrap();
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class,
        };
        let presentation = ErgodicPresentation {
            components: vec![ErgodicComponent {
                point: GenericPoint::Euclid(vec![0.0]),
                weight_num: 1,
                reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[0.0])),
            }],
            target: None,
        };
        assert!(matches!(
            approximate_by_periodic_measure(&presentation, 0.2, &setting),
            Err(ApproxError::Unsupported(_))
        ));
    }

    #[test]
    fn coarse_graph_fails_the_modulus_budget() {
        let f = MapSystem::doubling();
        let grid = BoxGrid::new(1, 4).unwrap();
        let graph = build_transition_graph(&f, grid, grid.width(), 16, 5).unwrap();
        let classes = chain_recurrent_classes(&graph);
        let setting = ApproxSetting::Map {
            system: &f,
            graph: &graph,
            class: &classes[0],
        };
        let presentation = ErgodicPresentation {
            components: vec![ErgodicComponent {
                point: GenericPoint::Euclid(vec![0.0]),
                weight_num: 1,
                reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[0.0])),
            }],
            target: None,
        };
        match approximate_by_periodic_measure(&presentation, 0.2, &setting) {
            Err(ApproxError::BudgetFailure { term, .. }) => {
                assert_eq!(term, BudgetTerm::Modulus)
            }
            other => panic!("expected a modulus budget failure, got {other:?}"),
        }
    }

    #[test]
    fn birkhoff_check_is_zero_for_fixed_points() {
        let family = ObservableFamily::trig(1, 8);
        let f = MapSystem::doubling();
        let piece = f.orbit_segment(&[0.0], 50).unwrap();
        let refs: Vec<f64> = (0..family.len()).map(|g| family.eval(g, &[0.0])).collect();
        for d in check_birkhoff_budget(&family, &piece, 50, &refs) {
            assert_eq!(d, 0.0);
        }
    }
}
