//! Entropy: exact topological entropy of subshifts of finite type through
//! the transfer matrix with a certified Collatz-Wielandt bracket, a
//! finite-stage Bowen spanning estimate for iterated maps, metric entropy
//! of Markov measures, the Parry (maximal-entropy) measure, and the gap
//! report sup h_mu versus h_top. All values in nats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::strongly_connected_components;
use crate::systems::{MapSystem, SymbolicSystem, SystemError};

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    TransferMatrix,
    Spanning,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: EntropyMethod,
    /// Certified enclosure of the true log spectral radius
    /// (transfer-matrix method only), width below 1e-9.
    pub bracket: Option<[f64; 2]>,
    /// Time horizon: power-iteration count or Bowen horizon.
    pub n: usize,
    pub epsilon: Option<f64>,
    pub span_count: Option<usize>,
}

const BRACKET_WIDTH: f64 = 1e-9;
const POWER_ITERATION_CAP: usize = 1_000_000;

/// One Collatz-Wielandt refinement pass on the primitive matrix A + I:
/// for positive x, min_i (Mx)_i/x_i <= rho(M) <= max_i (Mx)_i/x_i, and
/// the ratios squeeze together under iteration.
fn shifted_product(adjacency: &[Vec<u8>], x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut y = vec![0.0f64; k];
    for i in 0..k {
        let mut acc = x[i];
        for j in 0..k {
            if adjacency[i][j] == 1 {
                acc += x[j];
            }
        }
        y[i] = acc;
    }
    y
}

fn irreducibility_partition(system: &SymbolicSystem) -> Option<Vec<Vec<u32>>> {
    let graph = system.symbol_graph();
    let comps = strongly_connected_components(&graph);
    if comps.len() > 1 {
        Some(comps)
    } else {
        None
    }
}

/// Log spectral radius of the adjacency matrix, with a certified bracket:
/// power iteration on A + I (primitive once A is irreducible) squeezes the
/// Collatz-Wielandt ratios until the log-bracket for rho(A) = rho(A+I) - 1
/// is narrower than 1e-9.
pub fn sft_entropy(system: &SymbolicSystem) -> Result<EntropyEstimate, EntropyError> {
    if let Some(partition) = irreducibility_partition(system) {
        return Err(EntropyError::InvalidArgument(format!(
            "adjacency is reducible; symbol partition: {partition:?}"
        )));
    }
    let a = system.adjacency();
    let k = system.alphabet();
    let mut x = vec![1.0f64; k];
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        let y = shifted_product(a, &x);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..k {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        // Bracket for rho(A) itself; rho(A) >= 1 because every symbol
        // extends, so lo - 1 stays positive once the ratios settle.
        if lo > 1.0 {
            let (log_lo, log_hi) = ((lo - 1.0).ln(), (hi - 1.0).ln());
            if log_hi - log_lo < BRACKET_WIDTH {
                return Ok(EntropyEstimate {
                    value: 0.5 * (log_lo + log_hi),
                    method: EntropyMethod::TransferMatrix,
                    bracket: Some([log_lo.max(0.0), log_hi.max(0.0)]),
                    n: iterations,
                    epsilon: None,
                    span_count: None,
                });
            }
        } else if lo == hi && lo == 2.0 {
            // rho(A) = 1 exactly: a bare cycle, entropy zero.
            return Ok(EntropyEstimate {
                value: 0.0,
                method: EntropyMethod::TransferMatrix,
                bracket: Some([0.0, 0.0]),
                n: iterations,
                epsilon: None,
                span_count: None,
            });
        }
        if iterations >= POWER_ITERATION_CAP {
            return Err(EntropyError::Internal(
                "power iteration failed to certify a bracket".into(),
            ));
        }
        let max = y.iter().cloned().fold(0.0f64, f64::max);
        x = y.into_iter().map(|v| v / max).collect();
    }
}

/// Greedy minimal (n, epsilon)-spanning subset of the seed points under
/// the Bowen metric max_{0<=j<n} d(f^j x, f^j y): each seed joins the
/// first earlier center within epsilon or becomes a center itself. The
/// value log(span_count)/n estimates the finite-stage quantity only; no
/// limit is taken.
pub fn spanning_entropy_estimate(
    system: &MapSystem,
    seed_points: &[Vec<f64>],
    n: usize,
    epsilon: f64,
) -> Result<EntropyEstimate, EntropyError> {
    if n == 0 {
        return Err(EntropyError::InvalidArgument("n must be >= 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(EntropyError::InvalidArgument("epsilon must be positive".into()));
    }
    if seed_points.is_empty() {
        return Err(EntropyError::InvalidArgument("seed set must be nonempty".into()));
    }
    let orbits: Vec<crate::systems::Orbit> = seed_points
        .iter()
        .map(|x| system.orbit_segment(x, n))
        .collect::<Result<_, _>>()?;

    let covered = |a: &crate::systems::Orbit, b: &crate::systems::Orbit| {
        (0..n).all(|j| system.metric(a.point(j), b.point(j)) <= epsilon)
    };
    let mut centers: Vec<usize> = Vec::new();
    for (i, orbit) in orbits.iter().enumerate() {
        if !centers.iter().any(|&c| covered(orbit, &orbits[c])) {
            centers.push(i);
        }
    }
    let span_count = centers.len();
    Ok(EntropyEstimate {
        value: (span_count as f64).ln() / n as f64,
        method: EntropyMethod::Spanning,
        bracket: None,
        n,
        epsilon: Some(epsilon),
        span_count: Some(span_count),
    })
}

fn validate_stochastic(
    system: &SymbolicSystem,
    stationary: &[f64],
    transition: &[Vec<f64>],
) -> Result<(), EntropyError> {
    let k = system.alphabet();
    if stationary.len() != k || transition.len() != k {
        return Err(EntropyError::InvalidArgument(
            "stationary vector and transition matrix must match the alphabet".into(),
        ));
    }
    let mut pi_sum = 0.0f64;
    for &p in stationary {
        if p < 0.0 {
            return Err(EntropyError::InvalidArgument(
                "stationary entries must be nonnegative".into(),
            ));
        }
        pi_sum += p;
    }
    if (pi_sum - 1.0).abs() > 1e-10 {
        return Err(EntropyError::InvalidArgument(format!(
            "stationary vector sums to {pi_sum}, not 1"
        )));
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != k {
            return Err(EntropyError::InvalidArgument(
                "transition matrix must be square".into(),
            ));
        }
        let mut row_sum = 0.0f64;
        for (j, &p) in row.iter().enumerate() {
            if p < 0.0 {
                return Err(EntropyError::InvalidArgument(
                    "transition entries must be nonnegative".into(),
                ));
            }
            if p > 0.0 && !system.is_allowed(i as u8, j as u8) {
                return Err(EntropyError::InvalidArgument(format!(
                    "transition {i}->{j} has positive probability but is forbidden"
                )));
            }
            row_sum += p;
        }
        if (row_sum - 1.0).abs() > 1e-10 {
            return Err(EntropyError::InvalidArgument(format!(
                "transition row {i} sums to {row_sum}, not 1"
            )));
        }
    }
    for j in 0..k {
        let mut image = 0.0f64;
        for i in 0..k {
            image += stationary[i] * transition[i][j];
        }
        if (image - stationary[j]).abs() > 1e-10 {
            return Err(EntropyError::InvalidArgument(format!(
                "stationary vector is not invariant at symbol {j}: pi P = {image} vs {}",
                stationary[j]
            )));
        }
    }
    Ok(())
}

/// Metric entropy of a stationary Markov measure:
/// -sum_i pi_i sum_j P_ij log P_ij, with 0 log 0 = 0.
pub fn markov_metric_entropy(
    system: &SymbolicSystem,
    stationary: &[f64],
    transition: &[Vec<f64>],
) -> Result<f64, EntropyError> {
    validate_stochastic(system, stationary, transition)?;
    let mut h = 0.0f64;
    for (i, row) in transition.iter().enumerate() {
        for &p in row {
            if p > 0.0 {
                h -= stationary[i] * p * p.ln();
            }
        }
    }
    Ok(h.max(0.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkovMeasure {
    pub stationary: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

/// Right and left Perron vectors of A + I by power iteration, both
/// normalized to maximum entry 1, plus the Perron root of A.
fn perron_data(system: &SymbolicSystem) -> Result<(f64, Vec<f64>, Vec<f64>), EntropyError> {
    let a = system.adjacency();
    let k = system.alphabet();
    let transpose: Vec<Vec<u8>> = (0..k)
        .map(|i| (0..k).map(|j| a[j][i]).collect())
        .collect();
    let iterate = |m: &[Vec<u8>]| -> Result<(f64, Vec<f64>), EntropyError> {
        let mut x = vec![1.0f64; k];
        for _ in 0..POWER_ITERATION_CAP {
            let y = shifted_product(m, &x);
            let max = y.iter().cloned().fold(0.0f64, f64::max);
            let next: Vec<f64> = y.iter().map(|v| v / max).collect();
            let change = x
                .iter()
                .zip(&next)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0f64, f64::max);
            let ratios: Vec<f64> = y.iter().zip(&x).map(|(p, q)| p / q).collect();
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
            x = next;
            if change < 1e-15 && hi - lo < 1e-13 {
                return Ok((0.5 * (lo + hi) - 1.0, x));
            }
        }
        Err(EntropyError::Internal(
            "Perron vector iteration failed to settle".into(),
        ))
    };
    let (lambda, right) = iterate(a)?;
    let (_, left) = iterate(&transpose)?;
    Ok((lambda, right, left))
}

/// The maximal-entropy Markov measure of an irreducible subshift:
/// P_ij = A_ij r_j / (lambda r_i) from the right Perron vector r, and
/// pi_i proportional to l_i r_i from the left one.
pub fn parry_measure(system: &SymbolicSystem) -> Result<MarkovMeasure, EntropyError> {
    if let Some(partition) = irreducibility_partition(system) {
        return Err(EntropyError::InvalidArgument(format!(
            "adjacency is reducible; symbol partition: {partition:?}"
        )));
    }
    let (lambda, right, left) = perron_data(system)?;
    let k = system.alphabet();
    let a = system.adjacency();
    let transition: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if a[i][j] == 1 {
                        right[j] / (lambda * right[i])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut stationary: Vec<f64> = (0..k).map(|i| left[i] * right[i]).collect();
    let z: f64 = stationary.iter().sum();
    for p in &mut stationary {
        *p /= z;
    }
    Ok(MarkovMeasure {
        stationary,
        transition,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapFlag {
    Strict,
    None,
}

/// A candidate element of the physical-like set for the gap report:
/// a stationary Markov measure, or any periodic measure (entropy zero).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureCandidate {
    Markov {
        stationary: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
    Periodic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyGapReport {
    pub sup_metric_entropy: f64,
    pub topological_entropy: f64,
    pub gap: GapFlag,
    /// Metric entropy of each candidate, input order.
    pub per_candidate: Vec<f64>,
}

/// Compare sup over the candidate measures of h_mu against h_top and flag
/// whether the gap is strict (beyond bracket accuracy).
pub fn entropy_gap_report(
    system: &SymbolicSystem,
    candidates: &[MeasureCandidate],
) -> Result<EntropyGapReport, EntropyError> {
    if candidates.is_empty() {
        return Err(EntropyError::InvalidArgument("no candidates".into()));
    }
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for c in candidates {
        let h = match c {
            MeasureCandidate::Markov {
                stationary,
                transition,
            } => markov_metric_entropy(system, stationary, transition)?,
            MeasureCandidate::Periodic => 0.0,
        };
        per_candidate.push(h);
    }
    let sup = per_candidate.iter().cloned().fold(0.0f64, f64::max);
    let top = sft_entropy(system)?;
    Ok(EntropyGapReport {
        sup_metric_entropy: sup,
        topological_entropy: top.value,
        gap: if sup < top.value - BRACKET_WIDTH {
            GapFlag::Strict
        } else {
            GapFlag::None
        },
        per_candidate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamDomain};
    use rand::Rng;

    /// Stationary distribution of an irreducible stochastic matrix by
    /// plain left power iteration; independent of parry_measure.
    fn stationary_of(p: &[Vec<f64>]) -> Vec<f64> {
        let k = p.len();
        let mut pi = vec![1.0 / k as f64; k];
        for _ in 0..100_000 {
            let mut next = vec![0.0f64; k];
            for i in 0..k {
                for j in 0..k {
                    next[j] += pi[i] * p[i][j];
                }
            }
            let change = pi
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            pi = next;
            if change < 1e-16 {
                break;
            }
        }
        pi
    }

    #[test]
    fn transfer_matrix_matches_characteristic_polynomial_roots() {
        // Golden mean: lambda^2 = lambda + 1, so lambda = (1+sqrt(5))/2.
        let gm = SymbolicSystem::golden_mean();
        let est = sft_entropy(&gm).unwrap();
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((est.value - phi.ln()).abs() < 1e-6);
        assert!((est.value - 0.481_211_825_059_6).abs() < 1e-6);
        let [lo, hi] = est.bracket.unwrap();
        assert!(hi - lo < 1e-9);
        assert!(lo <= phi.ln() && phi.ln() <= hi);

        // Full 2-shift: spectral radius exactly 2.
        let full = SymbolicSystem::full_shift(2);
        let est = sft_entropy(&full).unwrap();
        assert!((est.value - 2.0f64.ln()).abs() < 1e-9);

        // 3-symbol path with self-loops: A = I + path, radius 1 + sqrt(2).
        let sys = SymbolicSystem::new(
            "path3",
            vec![vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]],
            8,
        )
        .unwrap();
        let est = sft_entropy(&sys).unwrap();
        let rho = 1.0 + 2.0f64.sqrt();
        assert!((est.value - rho.ln()).abs() < 1e-6);
        let [lo, hi] = est.bracket.unwrap();
        assert!(lo <= rho.ln() && rho.ln() <= hi);
    }

    #[test]
    fn bare_cycle_has_zero_entropy() {
        let sys = SymbolicSystem::new("loop1", vec![vec![1]], 4).unwrap();
        let est = sft_entropy(&sys).unwrap();
        assert_eq!(est.value, 0.0);
        let two_cycle = SymbolicSystem::new("swap", vec![vec![0, 1], vec![1, 0]], 4).unwrap();
        let est = sft_entropy(&two_cycle).unwrap();
        assert!(est.value.abs() < 1e-9);
    }

    #[test]
    fn reducible_adjacency_reports_the_partition() {
        let sys = SymbolicSystem::new("reducible", vec![vec![1, 1], vec![0, 1]], 4).unwrap();
        match sft_entropy(&sys) {
            Err(EntropyError::InvalidArgument(msg)) => {
                assert!(msg.contains("reducible"));
                assert!(msg.contains('['));
            }
            other => panic!("expected invalid-argument, got {other:?}"),
        }
    }

    #[test]
    fn spanning_estimate_brackets_the_doubling_entropy() {
        let f = MapSystem::doubling();
        let mut rng = stream(5, StreamDomain::Spanning, 0);
        let seeds: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.gen::<f64>()]).collect();
        let est = spanning_entropy_estimate(&f, &seeds, 12, 1.0 / 16.0).unwrap();
        assert!(
            (est.value - 2.0f64.ln()).abs() < 0.1,
            "estimate {} too far from log 2",
            est.value
        );
    }

    #[test]
    fn spanning_count_is_static_under_identity_and_value_decays_in_n() {
        let f = MapSystem::identity(1);
        let seeds: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let short = spanning_entropy_estimate(&f, &seeds, 1, 0.05).unwrap();
        let long = spanning_entropy_estimate(&f, &seeds, 5, 0.05).unwrap();
        // The identity's Bowen metric never grows, so the covering count
        // is the plain epsilon-covering of the seeds at every horizon.
        assert_eq!(short.span_count.unwrap(), 10);
        assert_eq!(long.span_count.unwrap(), 10);
        assert!(long.value < short.value);
    }

    #[test]
    fn spanning_count_is_monotone_in_prefix_and_epsilon() {
        let f = MapSystem::doubling();
        let mut rng = stream(6, StreamDomain::Spanning, 0);
        let seeds: Vec<Vec<f64>> = (0..800).map(|_| vec![rng.gen::<f64>()]).collect();
        let all = spanning_entropy_estimate(&f, &seeds, 8, 1.0 / 16.0).unwrap();
        let half = spanning_entropy_estimate(&f, &seeds[..400], 8, 1.0 / 16.0).unwrap();
        assert!(half.span_count.unwrap() <= all.span_count.unwrap());
        let coarse = spanning_entropy_estimate(&f, &seeds, 8, 1.0 / 4.0).unwrap();
        assert!(coarse.span_count.unwrap() <= all.span_count.unwrap());
    }

    #[test]
    fn markov_entropy_oracles() {
        let full = SymbolicSystem::full_shift(2);
        // Deterministic permutation: no branching, zero entropy.
        let perm = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let h = markov_metric_entropy(&full, &[0.5, 0.5], &perm).unwrap();
        assert_eq!(h, 0.0);
        // Uniform coin flips: log 2 exactly.
        let fair = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let h = markov_metric_entropy(&full, &[0.5, 0.5], &fair).unwrap();
        assert!((h - 2.0f64.ln()).abs() < 1e-12);
        // A forbidden transition with positive probability is rejected.
        let gm = SymbolicSystem::golden_mean();
        let bad = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!(markov_metric_entropy(&gm, &[0.5, 0.5], &bad).is_err());
        // A non-stationary vector is rejected.
        assert!(markov_metric_entropy(&full, &[0.9, 0.1], &fair).is_err());
    }

    #[test]
    fn parry_measure_attains_the_topological_entropy() {
        for sys in [SymbolicSystem::golden_mean(), SymbolicSystem::full_shift(2)] {
            let parry = parry_measure(&sys).unwrap();
            let h_mu =
                markov_metric_entropy(&sys, &parry.stationary, &parry.transition).unwrap();
            let h_top = sft_entropy(&sys).unwrap().value;
            assert!(
                (h_mu - h_top).abs() < 1e-6,
                "{}: parry {} vs top {}",
                sys.name(),
                h_mu,
                h_top
            );
        }
        // Golden-mean Parry stationary vector has the closed form
        // (phi^2, 1) / (phi^2 + 1).
        let parry = parry_measure(&SymbolicSystem::golden_mean()).unwrap();
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let expected = phi * phi / (phi * phi + 1.0);
        assert!((parry.stationary[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn compatible_markov_measures_never_beat_the_topological_entropy() {
        let gm = SymbolicSystem::golden_mean();
        let h_top = sft_entropy(&gm).unwrap().value;
        let mut rng = stream(33, StreamDomain::Spanning, 1);
        for _ in 0..25 {
            // Random golden-mean-compatible rows: row 1 is forced to map
            // to symbol 0; row 0 branches with random probability.
            let q: f64 = rng.gen_range(0.01..0.99);
            let p = vec![vec![1.0 - q, q], vec![1.0, 0.0]];
            let pi = stationary_of(&p);
            let h = markov_metric_entropy(&gm, &pi, &p).unwrap();
            assert!(h <= h_top + 1e-9, "h_mu {h} exceeds h_top {h_top}");
        }
    }

    #[test]
    fn gap_report_flags_strict_and_attained_cases() {
        let gm = SymbolicSystem::golden_mean();
        let report = entropy_gap_report(&gm, &[MeasureCandidate::Periodic]).unwrap();
        assert_eq!(report.sup_metric_entropy, 0.0);
        assert!((report.topological_entropy - 0.481_211_825_059_6).abs() < 1e-6);
        assert_eq!(report.gap, GapFlag::Strict);

        let parry = parry_measure(&gm).unwrap();
        let report = entropy_gap_report(
            &gm,
            &[MeasureCandidate::Markov {
                stationary: parry.stationary,
                transition: parry.transition,
            }],
        )
        .unwrap();
        assert_eq!(report.gap, GapFlag::None);
        assert!((report.sup_metric_entropy - report.topological_entropy).abs() < 1e-6);

        assert!(entropy_gap_report(&gm, &[]).is_err());
    }
}
