//! End-to-end acceptance: nine numbered criteria, each printing one
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; a FAIL also fails the test.

use std::collections::HashMap;
use std::process::Command;
use std::time::{Duration, Instant};

use chainrec::approx::{
    approximate_by_periodic_measure, validate_run, ApproxSetting, ComponentReference,
    ErgodicComponent, ErgodicPresentation, GenericPoint,
};
use chainrec::chain::{
    build_transition_graph, chain_recurrent_classes, find_delta_chain, BoxGrid, ChainClass,
};
use chainrec::entropy::{
    entropy_gap_report, markov_metric_entropy, parry_measure, sft_entropy, GapFlag,
    MeasureCandidate,
};
use chainrec::gluing::{
    glue_periodic_pseudo_orbit, glue_periodic_word_orbit, shadow_glued_map_orbit,
    shadow_glued_word_orbit,
};
use chainrec::measure::{distance_from_signatures, DiscreteMeasure, ObservableFamily};
use chainrec::physical::{
    check_support_inclusion, check_symbol_support_inclusion, default_checkpoints,
    estimate_physical_like_set, BasinParams, SampleSystem,
};
use chainrec::rng::{stream, StreamDomain};
use chainrec::systems::{MapSystem, SymbolicSystem, Word};

fn report(n: u32, what: &str, pass: bool) {
    println!("criterion {n}: {} - {what}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {what}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainrec"))
}

#[test]
fn criterion_1_chain_class_counts() {
    let t0 = Instant::now();
    let ns = MapSystem::north_south();
    let grid7 = BoxGrid::new(1, 7).unwrap();
    let graph = build_transition_graph(&ns, grid7, 2.0 * grid7.width(), 32, 7).unwrap();
    let ns_nontrivial = chain_recurrent_classes(&graph)
        .iter()
        .filter(|c| !c.is_trivial)
        .count();
    let ns_time = t0.elapsed();

    let t1 = Instant::now();
    let d = MapSystem::doubling();
    let grid6 = BoxGrid::new(1, 6).unwrap();
    let graph6 = build_transition_graph(&d, grid6, 3.0 * grid6.width(), 32, 7).unwrap();
    let d_classes = chain_recurrent_classes(&graph6).len();
    let d_time = t1.elapsed();

    report(
        1,
        &format!(
            "north-south depth 7 gives {ns_nontrivial} non-trivial classes in {ns_time:.2?}, \
             doubling depth 6 gives {d_classes} class in {d_time:.2?}"
        ),
        ns_nontrivial == 2
            && d_classes == 1
            && ns_time < Duration::from_secs(5)
            && d_time < Duration::from_secs(5),
    );
}

fn map_zoo() -> Vec<(MapSystem, u32)> {
    vec![
        (MapSystem::doubling(), 6),
        (MapSystem::north_south(), 7),
        (MapSystem::tent(), 6),
        (MapSystem::identity(1), 5),
        (MapSystem::torus_cat(), 4),
    ]
}

/// Every delta1-class must land inside exactly one delta2-class for
/// delta1 <= delta2, same grid, samples, and seed.
fn refinement_monotone(f: &MapSystem, depth: u32) -> bool {
    let grid = BoxGrid::new(f.dimension(), depth).unwrap();
    let ladder: Vec<Vec<ChainClass>> = [2.0, 3.0, 4.0]
        .iter()
        .map(|k| {
            let g = build_transition_graph(f, grid, k * grid.width(), 32, 7).unwrap();
            chain_recurrent_classes(&g)
        })
        .collect();
    ladder.windows(2).all(|w| {
        let mut owner: HashMap<u32, usize> = HashMap::new();
        for c in &w[1] {
            for &b in &c.boxes {
                owner.insert(b, c.id);
            }
        }
        w[0].iter().all(|c| {
            let host = owner.get(&c.boxes[0]);
            host.is_some() && c.boxes.iter().all(|b| owner.get(b) == host)
        })
    })
}

#[test]
fn criterion_2_pseudo_orbit_certificates_and_refinement() {
    // Emit delta-chains across the zoo and re-evaluate every step defect
    // directly against the certificate tolerance.
    let mut emitted = 0usize;
    let mut certified = 0usize;
    let mut check = |f: &MapSystem, grid: BoxGrid, pairs: &[(Vec<f64>, Vec<f64>)]| {
        let graph = build_transition_graph(f, grid, 3.0 * grid.width(), 32, 7).unwrap();
        for (from, to) in pairs {
            let chain = find_delta_chain(f, &graph, from, to).unwrap();
            emitted += 1;
            let defect = chain.max_step_defect(f).unwrap();
            if defect < graph.certificate_delta() {
                certified += 1;
            }
        }
    };
    let g1 = BoxGrid::new(1, 7).unwrap();
    check(
        &MapSystem::doubling(),
        g1,
        &[
            (vec![0.1], vec![0.9]),
            (vec![0.5], vec![0.25]),
            (vec![0.33], vec![0.34]),
        ],
    );
    check(
        &MapSystem::north_south(),
        g1,
        &[
            (vec![0.52], vec![0.01]),
            (vec![0.3], vec![0.05]),
            (vec![0.6], vec![0.93]),
        ],
    );
    check(
        &MapSystem::tent(),
        g1,
        &[(vec![0.1], vec![0.8]), (vec![0.7], vec![0.2])],
    );
    check(
        &MapSystem::identity(1),
        BoxGrid::new(1, 5).unwrap(),
        &[(vec![0.3], vec![0.3]), (vec![0.8], vec![0.8])],
    );
    check(
        &MapSystem::torus_cat(),
        BoxGrid::new(2, 4).unwrap(),
        &[
            (vec![0.1, 0.2], vec![0.8, 0.7]),
            (vec![0.5, 0.5], vec![0.05, 0.95]),
        ],
    );

    // Glued periodic pseudo-orbits carry the same per-step certificate.
    let f = MapSystem::doubling();
    let grid = BoxGrid::new(1, 10).unwrap();
    let graph = build_transition_graph(&f, grid, 3.0 * grid.width(), 32, 7).unwrap();
    let class = &chain_recurrent_classes(&graph)[0];
    for seed in 0..3u64 {
        let mut rng = stream(seed, StreamDomain::GluingJobs, 99);
        use rand::Rng;
        let segments: Vec<(Vec<f64>, usize)> = (0..2)
            .map(|_| (vec![rng.gen::<f64>()], rng.gen_range(10..30)))
            .collect();
        let (_, pseudo) = glue_periodic_pseudo_orbit(&f, &graph, class, &segments).unwrap();
        emitted += 1;
        if pseudo.verify(&f).is_ok() {
            certified += 1;
        }
    }

    let monotone = map_zoo().iter().all(|(f, depth)| refinement_monotone(f, *depth));
    report(
        2,
        &format!(
            "{certified}/{emitted} pseudo-orbits certified, refinement monotone on the delta \
             ladder (2,3,4) box units: {monotone}"
        ),
        certified == emitted && emitted >= 15 && monotone,
    );
}

#[test]
fn criterion_3_half_half_mixture_on_the_full_shift() {
    let t0 = Instant::now();
    let s = SymbolicSystem::full_shift(2);
    let setting = ApproxSetting::Sft { system: &s };
    // 0^infinity embeds at 0 and 1^infinity at 1/2 (base 3 digits).
    let target = DiscreteMeasure::new(1, vec![0.0, 0.5], vec![0.5, 0.5]).unwrap();
    let presentation = ErgodicPresentation {
        components: vec![
            ErgodicComponent {
                point: GenericPoint::Word(Word::periodic(vec![0])),
                weight_num: 1,
                reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[0.0])),
            },
            ErgodicComponent {
                point: GenericPoint::Word(Word::periodic(vec![1])),
                weight_num: 1,
                reference: ComponentReference::Measure(DiscreteMeasure::dirac(&[0.5])),
            },
        ],
        target: Some(target),
    };
    let epsilon = 0.1;
    let run = approximate_by_periodic_measure(&presentation, epsilon, &setting).unwrap();
    let bound = epsilon / 5.0;
    let terms = [
        run.budget_terms.tail,
        run.budget_terms.decomposition,
        run.budget_terms.birkhoff,
        run.budget_terms.gap,
        run.budget_terms.modulus,
    ];
    let terms_ok = terms.iter().all(|t| *t < bound);
    let worst = run.achieved_errors.iter().cloned().fold(0.0f64, f64::max);
    let validation = validate_run(&run, &setting);
    let elapsed = t0.elapsed();
    report(
        3,
        &format!(
            "budget terms {terms:?} all < {bound}, worst achieved error {worst:.4} < 0.08, \
             validate_run {}, in {elapsed:.2?}",
            validation.passed
        ),
        terms_ok && worst < 0.08 && validation.passed && elapsed < Duration::from_secs(10),
    );
}

#[test]
fn criterion_4_doubling_physical_like_estimate() {
    let t0 = Instant::now();
    let f = MapSystem::doubling();
    let family = ObservableFamily::trig(1, 20);
    let params = BasinParams {
        n_samples: 500,
        orbit_length: 100_000,
        checkpoints: default_checkpoints(100_000),
        cluster_radius: 0.05,
        seed: 41,
    };
    let estimate = estimate_physical_like_set(&SampleSystem::Map(&f), &family, &params).unwrap();
    let dominant = estimate
        .clusters
        .iter()
        .max_by(|a, b| a.lebesgue_fraction.total_cmp(&b.lebesgue_fraction))
        .unwrap();
    // Lebesgue measure integrates every family member to zero.
    let uniform_sig = vec![0.0; family.len()];
    let rep_sig = family.signature(&dominant.representative);
    let dist = distance_from_signatures(&rep_sig, &uniform_sig).value;
    let elapsed = t0.elapsed();
    report(
        4,
        &format!(
            "{} cluster(s); dominant fraction {:.3} >= 0.95, representative at weak* distance \
             {:.4} < 0.05 from the uniform integrals, in {elapsed:.2?}",
            estimate.clusters.len(),
            dominant.lebesgue_fraction,
            dist
        ),
        dominant.lebesgue_fraction >= 0.95 && dist < 0.05 && elapsed < Duration::from_secs(60),
    );
}

#[test]
fn criterion_5_zoo_inclusion_and_negative_control() {
    let family = ObservableFamily::trig(1, 20);
    let family2 = ObservableFamily::trig(2, 20);
    let mut all_ok = true;
    let mut lines: Vec<String> = Vec::new();

    let mut map_case =
        |f: &MapSystem, depth: u32, delta_boxes: f64, n: usize, len: usize, seed: u64| {
            let fam = if f.dimension() == 2 { &family2 } else { &family };
            let params = BasinParams {
                n_samples: n,
                orbit_length: len,
                checkpoints: default_checkpoints(len),
                cluster_radius: 0.05,
                seed,
            };
            let estimate =
                estimate_physical_like_set(&SampleSystem::Map(f), fam, &params).unwrap();
            let grid = BoxGrid::new(f.dimension(), depth).unwrap();
            let graph =
                build_transition_graph(f, grid, delta_boxes * grid.width(), 32, 7).unwrap();
            let classes = chain_recurrent_classes(&graph);
            let rep = check_support_inclusion(&estimate.clusters, &classes, grid, 0.01).unwrap();
            lines.push(format!("{} {}", f.name(), rep.all_contained));
            all_ok &= rep.all_contained;
        };
    map_case(&MapSystem::doubling(), 6, 3.0, 40, 20_000, 41);
    map_case(&MapSystem::north_south(), 7, 2.0, 40, 20_000, 23);
    map_case(&MapSystem::tent(), 6, 3.0, 40, 20_000, 11);
    map_case(&MapSystem::identity(1), 5, 2.0, 20, 10, 7);
    map_case(&MapSystem::torus_cat(), 4, 2.0, 30, 20_000, 13);

    for s in [SymbolicSystem::full_shift(2), SymbolicSystem::golden_mean()] {
        let params = BasinParams {
            n_samples: 25,
            orbit_length: 4_000,
            checkpoints: default_checkpoints(4_000),
            cluster_radius: 0.05,
            seed: 17,
        };
        let estimate =
            estimate_physical_like_set(&SampleSystem::Shift(&s), &family, &params).unwrap();
        let rep = check_symbol_support_inclusion(&s, &estimate.clusters, 0.01).unwrap();
        lines.push(format!("{} {}", s.name(), rep.all_contained));
        all_ok &= rep.all_contained;
    }

    // Negative control through the binary: a representative straddling the
    // sink and the source must fail verification with exit code 4.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{
            "schema": 1,
            "system": {"name": "north_south"},
            "grid": {"depth": 7, "delta_boxes": 2.0},
            "sampling": {"n_samples": 10, "orbit_length": 5000, "seed": 23},
            "verify": {"mass_threshold": 0.01,
                       "extra_representatives": [{"atoms": [[0.0],[0.5]], "weights": [0.5,0.5]}]}
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["verify", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let control_code = output.status.code();

    report(
        5,
        &format!(
            "inclusion on the zoo [{}], corrupted representative exits {:?}",
            lines.join(", "),
            control_code
        ),
        all_ok && control_code == Some(4),
    );
}

#[test]
fn criterion_6_entropy_exactness() {
    let gm = SymbolicSystem::golden_mean();
    let est = sft_entropy(&gm).unwrap();
    // Characteristic polynomial x^2 = x + 1: the Perron root is the golden
    // ratio, so the oracle is ln((1 + sqrt 5) / 2).
    let oracle = ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
    let gm_ok = (est.value - oracle).abs() < 1e-6;

    let full = sft_entropy(&SymbolicSystem::full_shift(2)).unwrap();
    let full_ok = (full.value - 2.0f64.ln()).abs() < 1e-9;

    let parry = parry_measure(&gm).unwrap();
    let h_parry = markov_metric_entropy(&gm, &parry.stationary, &parry.transition).unwrap();
    let parry_ok = (h_parry - est.value).abs() < 1e-6;

    // Any compatible Markov measure obeys the variational principle.
    let candidates: Vec<(Vec<f64>, Vec<Vec<f64>>)> = vec![
        (parry.stationary.clone(), parry.transition.clone()),
        (
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
        ),
        (
            vec![0.8, 0.2],
            vec![vec![0.75, 0.25], vec![1.0, 0.0]],
        ),
    ];
    let variational_ok = candidates.iter().all(|(pi, p)| {
        markov_metric_entropy(&gm, pi, p).unwrap() <= est.value + 1e-9
    });

    report(
        6,
        &format!(
            "golden mean {:.9} vs oracle {:.9}, full shift {:.12} vs ln 2, parry gap {:.2e}, \
             variational principle on {} Markov measures",
            est.value,
            oracle,
            full.value,
            (h_parry - est.value).abs(),
            candidates.len()
        ),
        gm_ok && full_ok && parry_ok && variational_ok,
    );
}

#[test]
fn criterion_7_entropy_gap_report() {
    let gm = SymbolicSystem::golden_mean();
    let report7 = entropy_gap_report(&gm, &[MeasureCandidate::Periodic]).unwrap();
    let oracle = ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
    report(
        7,
        &format!(
            "sup {:.6}, topological {:.6}, flag {:?}",
            report7.sup_metric_entropy, report7.topological_entropy, report7.gap
        ),
        report7.sup_metric_entropy == 0.0
            && (report7.topological_entropy - oracle).abs() < 1e-6
            && report7.gap == GapFlag::Strict,
    );
}

#[test]
fn criterion_8_fifty_seeded_gluing_jobs() {
    use rand::Rng;
    let mut jobs = 0usize;
    let mut ok = 0usize;

    // 25 jobs on the doubling map, random segments inside the single class.
    let f = MapSystem::doubling();
    let grid = BoxGrid::new(1, 10).unwrap();
    let graph = build_transition_graph(&f, grid, 3.0 * grid.width(), 32, 7).unwrap();
    let classes = chain_recurrent_classes(&graph);
    let class = &classes[0];
    for seed in 0..25u64 {
        let mut rng = stream(seed, StreamDomain::GluingJobs, 0);
        let n_seg = rng.gen_range(2..=4);
        let segments: Vec<(Vec<f64>, usize)> = (0..n_seg)
            .map(|_| (vec![rng.gen::<f64>()], rng.gen_range(10..40)))
            .collect();
        let (schedule, pseudo) =
            glue_periodic_pseudo_orbit(&f, &graph, class, &segments).unwrap();
        let cert = shadow_glued_map_orbit(&f, &pseudo, &schedule).unwrap();
        let eps = cert.epsilon.unwrap();
        jobs += 1;
        if cert.guaranteed
            && cert.per_segment_deviation.iter().all(|d| *d < eps)
            && schedule.gaps.iter().all(|m| *m <= schedule.gap_bound)
        {
            ok += 1;
        }
    }

    // 25 jobs on the golden mean shift, random admissible words, tracking
    // depth 6 so epsilon = 2^-6.
    let s = SymbolicSystem::golden_mean();
    for seed in 0..25u64 {
        let mut rng = stream(seed, StreamDomain::GluingJobs, 1);
        let n_seg = rng.gen_range(2..=4);
        let segments: Vec<(Word, usize)> = (0..n_seg)
            .map(|_| {
                let len = rng.gen_range(8..30);
                (s.random_word(len + 8, &mut rng), len)
            })
            .collect();
        let (schedule, chain) = glue_periodic_word_orbit(&s, &segments, 6).unwrap();
        let cert = shadow_glued_word_orbit(&s, &chain, &schedule).unwrap();
        let eps = cert.epsilon.unwrap();
        jobs += 1;
        if cert.guaranteed
            && cert.per_segment_deviation.iter().all(|d| *d < eps)
            && schedule.gaps.iter().all(|m| *m <= schedule.gap_bound)
        {
            ok += 1;
        }
    }

    report(
        8,
        &format!("{ok}/{jobs} gluing jobs certified (deviation < epsilon per segment, gaps <= M)"),
        jobs == 50 && ok == 50,
    );
}

#[test]
fn criterion_9_verify_determinism_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    std::fs::write(
        &config,
        r#"{
            "schema": 1,
            "system": {"name": "north_south"},
            "grid": {"depth": 7, "delta_boxes": 2.0},
            "sampling": {"n_samples": 40, "orbit_length": 20000, "seed": 23},
            "verify": {"mass_threshold": 0.01}
        }"#,
    )
    .unwrap();

    let strip = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.contains("timestamp"))
            .collect::<Vec<_>>()
            .join("\n")
    };

    let mut outputs: Vec<HashMap<String, String>> = Vec::new();
    for workers in ["1", "4", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let status = bin()
            .args(["verify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(status.success(), "verify failed at workers {workers}");
        let mut files = HashMap::new();
        for entry in std::fs::read_dir(&out).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, strip(&std::fs::read_to_string(&path).unwrap()));
        }
        outputs.push(files);
    }
    let same = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    report(
        9,
        &format!(
            "verify outputs ({} files) byte-identical at workers 1, 4, 8 after timestamp \
             stripping: {same}",
            outputs[0].len()
        ),
        same && outputs[0].len() >= 4,
    );
}
