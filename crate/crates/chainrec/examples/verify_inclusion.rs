//! Verify that every estimated physical-like measure lives inside one
//! chain recurrent class: cluster supports against box classes for maps,
//! and against symbol classes for subshifts.

use chainrec::chain::{build_transition_graph, chain_recurrent_classes, BoxGrid};
use chainrec::measure::{DiscreteMeasure, ObservableFamily};
use chainrec::physical::{
    check_support_inclusion, check_symbol_support_inclusion, default_checkpoints,
    estimate_physical_like_set, support_boxes, BasinParams, MeasureCluster, SampleSystem,
};
use chainrec::systems::{MapSystem, SymbolicSystem};

fn main() {
    let f = MapSystem::north_south();
    let family = ObservableFamily::trig(1, 20);
    let params = BasinParams {
        n_samples: 40,
        orbit_length: 20_000,
        checkpoints: default_checkpoints(20_000),
        cluster_radius: 0.05,
        seed: 23,
    };
    let estimate = estimate_physical_like_set(&SampleSystem::Map(&f), &family, &params).unwrap();

    let grid = BoxGrid::new(1, 7).unwrap();
    let graph = build_transition_graph(&f, grid, 2.0 * grid.width(), 32, 7).unwrap();
    let classes = chain_recurrent_classes(&graph);

    // At mass threshold 0.01 each representative's support boxes must all
    // sit inside a single class.
    let report = check_support_inclusion(&estimate.clusters, &classes, grid, 0.01).unwrap();
    println!("north-south: all contained = {}", report.all_contained);
    for v in &report.verdicts {
        println!(
            "  cluster {}: contained {}, hosting class {:?}, {} support boxes, {} strays",
            v.cluster_id,
            v.contained,
            v.hosting_class,
            v.support_box_count,
            v.stray_boxes.len()
        );
        let rep = &estimate.clusters[v.cluster_id].representative;
        println!("    support boxes: {:?}", support_boxes(rep, grid, 0.01).unwrap());
    }

    // Negative control: a fabricated representative straddling the sink and
    // the source cannot be contained in one class.
    let bad = MeasureCluster {
        id: estimate.clusters.len(),
        representative: DiscreteMeasure::new(1, vec![0.0, 0.5], vec![0.5, 0.5]).unwrap(),
        members: 0,
        lebesgue_fraction: 0.0,
    };
    let mut with_bad = estimate.clusters.clone();
    with_bad.push(bad);
    let control = check_support_inclusion(&with_bad, &classes, grid, 0.01).unwrap();
    println!(
        "with a straddling representative: all contained = {} (expected false)",
        control.all_contained
    );

    // Subshift version: clusters of golden-mean samples against the symbol
    // classes of the adjacency graph.
    let s = SymbolicSystem::golden_mean();
    let sparams = BasinParams {
        n_samples: 30,
        orbit_length: 4_000,
        checkpoints: default_checkpoints(4_000),
        cluster_radius: 0.05,
        seed: 17,
    };
    let sestimate =
        estimate_physical_like_set(&SampleSystem::Shift(&s), &family, &sparams).unwrap();
    let sreport = check_symbol_support_inclusion(&s, &sestimate.clusters, 0.01).unwrap();
    println!(
        "golden mean: {} cluster(s), all contained = {}",
        sestimate.clusters.len(),
        sreport.all_contained
    );
}
