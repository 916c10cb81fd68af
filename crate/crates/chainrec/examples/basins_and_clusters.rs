//! Monte Carlo estimate of the physical-like measures: sample starting
//! points, follow their empirical measures through checkpoints, and
//! cluster the limits in the weak* metric.

use chainrec::measure::ObservableFamily;
use chainrec::physical::{
    default_checkpoints, estimate_physical_like_set, BasinParams, SampleSystem,
};
use chainrec::systems::MapSystem;

fn run(f: &MapSystem, n_samples: usize, orbit_length: usize, seed: u64) {
    let family = ObservableFamily::trig(f.dimension(), 20);
    let params = BasinParams {
        n_samples,
        orbit_length,
        checkpoints: default_checkpoints(orbit_length),
        cluster_radius: 0.05,
        seed,
    };
    let estimate = estimate_physical_like_set(&SampleSystem::Map(f), &family, &params).unwrap();
    println!(
        "{}: {} samples x {} steps -> {} cluster(s)",
        f.name(),
        n_samples,
        orbit_length,
        estimate.clusters.len()
    );
    for c in &estimate.clusters {
        println!(
            "  cluster {}: {} members, estimated basin fraction {:.3}, representative has {} atom(s)",
            c.id,
            c.members,
            c.lebesgue_fraction,
            c.representative.len()
        );
    }
    let regular = estimate
        .samples
        .iter()
        .filter(|s| s.diameter <= estimate.diameter_threshold)
        .count();
    println!(
        "  checkpoint diameters: {} of {} samples converged (diameter <= {})",
        regular, n_samples, estimate.diameter_threshold
    );
}

fn main() {
    // Almost every doubling orbit equidistributes: one cluster near
    // Lebesgue measure holding all the mass.
    run(&MapSystem::doubling(), 100, 20_000, 41);

    // The north-south sink attracts Lebesgue-a.e. starting point.
    run(&MapSystem::north_south(), 60, 5_000, 23);

    // The identity map freezes each sample where it started, so every
    // sample founds its own point-mass cluster.
    run(&MapSystem::identity(1), 40, 10, 7);
}
