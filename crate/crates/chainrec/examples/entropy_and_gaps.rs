//! Topological entropy of subshifts, the Parry measure attaining it, and
//! the entropy gap over measures supported on the physical-like set.

use chainrec::entropy::{
    entropy_gap_report, markov_metric_entropy, parry_measure, sft_entropy, MeasureCandidate,
};
use chainrec::systems::SymbolicSystem;

fn main() {
    // Golden mean shift: h_top = ln((1 + sqrt 5) / 2).
    let gm = SymbolicSystem::golden_mean();
    let est = sft_entropy(&gm).unwrap();
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    println!(
        "golden mean: entropy {:.12} (ln phi = {:.12}), bracket width {:.1e}",
        est.value,
        phi.ln(),
        est.bracket.map(|b| b[1] - b[0]).unwrap_or(f64::NAN)
    );

    // The Parry measure is the unique measure of maximal entropy.
    let parry = parry_measure(&gm).unwrap();
    let h_parry = markov_metric_entropy(&gm, &parry.stationary, &parry.transition).unwrap();
    println!(
        "parry measure: stationary {:?}, metric entropy {:.12}",
        parry.stationary, h_parry
    );

    // Full 2-shift: ln 2 exactly (the bracket collapses).
    let full = SymbolicSystem::full_shift(2);
    let est2 = sft_entropy(&full).unwrap();
    println!(
        "full 2-shift: entropy {:.12} (ln 2 = {:.12})",
        est2.value,
        2.0f64.ln()
    );

    // When every physical-like measure is periodic (entropy zero) but the
    // system has positive topological entropy, the gap is strict.
    let report = entropy_gap_report(&gm, &[MeasureCandidate::Periodic]).unwrap();
    println!(
        "gap report: sup over candidates {:.6}, topological {:.6}, gap {:?}",
        report.sup_metric_entropy, report.topological_entropy, report.gap
    );

    // A Markov candidate can close the gap: feed the Parry measure back in.
    let closed = entropy_gap_report(
        &gm,
        &[
            MeasureCandidate::Periodic,
            MeasureCandidate::Markov {
                stationary: parry.stationary.clone(),
                transition: parry.transition.clone(),
            },
        ],
    )
    .unwrap();
    println!(
        "with the parry candidate: sup {:.6}, gap {:?}",
        closed.sup_metric_entropy, closed.gap
    );
}
