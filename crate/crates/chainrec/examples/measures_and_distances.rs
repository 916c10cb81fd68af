//! Empirical measures along orbits and the explicit weak* metric.

use chainrec::measure::{weak_star_distance, DiscreteMeasure, ObservableFamily};
use chainrec::rng::{stream, StreamDomain};
use chainrec::systems::MapSystem;

fn main() {
    let f = MapSystem::doubling();
    let family = ObservableFamily::trig(1, 20);
    println!(
        "family: {} trig observables, max total frequency {}",
        family.len(),
        family.max_total_frequency()
    );

    // A fixed point, a period-2 cycle, and a long typical orbit.
    let fixed = DiscreteMeasure::dirac(&[0.0]);
    let cycle = f.orbit_segment(&[1.0 / 3.0], 2).unwrap();
    let period2 = DiscreteMeasure::empirical(&cycle, 2).unwrap();
    let mut rng = stream(1, StreamDomain::BasinSamples, 0);
    let long = f.typical_orbit(&mut rng, 200_000).unwrap();
    let late = DiscreteMeasure::empirical(&long, 200_000).unwrap();

    let d = weak_star_distance(&fixed, &period2, &family).unwrap();
    println!("dist(delta_0, period-2 at 1/3): {:.6}", d.value);

    // The typical orbit equidistributes, so every observable average is
    // close to its Lebesgue integral 0.
    let sig = family.signature(&late);
    let worst = sig.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    println!("largest |observable average| over 200k steps: {:.2e}", worst);

    let d_long = weak_star_distance(&fixed, &late, &family).unwrap();
    println!("dist(delta_0, empirical(200k)): {:.6}", d_long.value);

    // Truncating the sum at level L costs less than 2^-L.
    for level in [4, 6, 10, 20] {
        let fam = ObservableFamily::trig(1, level);
        let d = weak_star_distance(&fixed, &period2, &fam).unwrap();
        println!(
            "L = {level:>2}: value {:.8}, tail bound {:.1e}",
            d.value, d.tail_bound
        );
    }
}
