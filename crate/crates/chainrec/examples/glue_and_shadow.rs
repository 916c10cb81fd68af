//! Glue finite orbit segments into one periodic pseudo-orbit and shadow it.
//!
//! Inside a chain recurrent class any two segments can be closed up into a
//! periodic delta-pseudo-orbit with connector chains of bounded length.
//! For the expanding doubling map the shadowing orbit is then constructed
//! backwards and certified step by step.

use chainrec::chain::{build_transition_graph, chain_recurrent_classes, BoxGrid};
use chainrec::gluing::{
    glue_periodic_pseudo_orbit, glue_periodic_word_orbit, shadow_glued_map_orbit,
    shadow_glued_word_orbit,
};
use chainrec::systems::{MapSystem, SymbolicSystem, Word};

fn main() {
    let f = MapSystem::doubling();
    let grid = BoxGrid::new(1, 10).unwrap();
    let graph = build_transition_graph(&f, grid, 3.0 * grid.width(), 32, 7).unwrap();
    let classes = chain_recurrent_classes(&graph);
    let class = &classes[0];
    println!(
        "doubling at depth 10: one class of {} boxes, gluing constant M = {}",
        class.boxes.len(),
        chainrec::gluing::gluing_constant(&graph, class).unwrap()
    );

    // Two orbit segments far apart on the circle.
    let segments = vec![(vec![0.123], 40usize), (vec![0.71], 40usize)];
    let (schedule, pseudo) = glue_periodic_pseudo_orbit(&f, &graph, class, &segments).unwrap();
    println!(
        "glued schedule: period {}, gaps {:?} (each <= {})",
        schedule.period, schedule.gaps, schedule.gap_bound
    );

    let cert = shadow_glued_map_orbit(&f, &pseudo, &schedule).unwrap();
    println!(
        "shadow: max deviation {:.2e} over the scheduled segments, bound {:?}, guaranteed {}",
        cert.max_deviation, cert.epsilon, cert.guaranteed
    );

    // Same construction symbolically: two admissible words in the golden
    // mean shift, glued with tracking depth 6.
    let s = SymbolicSystem::golden_mean();
    let words = vec![
        (Word::periodic(vec![0]), 10usize),
        (Word::periodic(vec![0, 1]), 10usize),
    ];
    let (wschedule, chain) = glue_periodic_word_orbit(&s, &words, 6).unwrap();
    let wcert = shadow_glued_word_orbit(&s, &chain, &wschedule).unwrap();
    println!(
        "golden mean words: period {}, max deviation {:.2e} <= 2^-6 = {:.2e}, guaranteed {}",
        wschedule.period,
        wcert.max_deviation,
        0.5f64.powi(6),
        wcert.guaranteed
    );
}
