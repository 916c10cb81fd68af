//! Discrete measures on the torus, empirical measures of orbit segments,
//! and an explicit weak* distance against a fixed observable family.
//!
//! The distance truncates the classical series
//! `sum_n |int g_n dmu - int g_n dnu| / (2^{n+1} ||g_n||)` at level L and
//! reports the exact tail bound 2^-L alongside the finite part.

use crate::systems::{MapSystem, Orbit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weight vectors must sum to 1 within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Neumaier-compensated accumulator; summation order is fixed by the
/// caller, so identical inputs give bit-identical sums on every run.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Finitely supported probability measure with atoms in [0,1)^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>, // flat, row-major
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::Invalid("dimension must be positive".into()));
        }
        if weights.is_empty() || atoms.len() != weights.len() * dim {
            return Err(MeasureError::Invalid(format!(
                "need one d-dimensional atom per weight, got {} coordinates for {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(MeasureError::Invalid("weights must be >= 0".into()));
        }
        let mut total = CompensatedSum::default();
        for &w in &weights {
            total.add(w);
        }
        if (total.value() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::Invalid(format!(
                "weights sum to {}, not 1",
                total.value()
            )));
        }
        Ok(DiscreteMeasure {
            dim,
            atoms,
            weights,
        })
    }

    pub fn dirac(point: &[f64]) -> Self {
        DiscreteMeasure {
            dim: point.len(),
            atoms: point.to_vec(),
            weights: vec![1.0],
        }
    }

    /// Empirical measure of the first `n` points of `orbit`, i.e. the
    /// average of point masses along the segment. Exact revisits are
    /// merged (first-seen order), so a period-p orbit yields p atoms.
    pub fn empirical(orbit: &Orbit, n: usize) -> Result<Self, MeasureError> {
        if n == 0 {
            return Err(MeasureError::InvalidArgument(
                "empirical measure needs n >= 1".into(),
            ));
        }
        if n > orbit.len() {
            return Err(MeasureError::InvalidArgument(format!(
                "n = {n} exceeds orbit length {}",
                orbit.len()
            )));
        }
        let dim = orbit.dim();
        let w = 1.0 / n as f64;
        let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
        let mut atoms: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for i in 0..n {
            let p = orbit.point(i);
            let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
            match index.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    weights[*e.get()] += w;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(weights.len());
                    atoms.extend_from_slice(p);
                    weights.push(w);
                }
            }
        }
        // 1/n * n can miss 1 by an ulp; renormalize exactly.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(DiscreteMeasure {
            dim,
            atoms,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of an arbitrary observable, compensated summation in atom
    /// order.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        let mut acc = CompensatedSum::default();
        for (i, &w) in self.weights.iter().enumerate() {
            acc.add(w * g(self.atom(i)));
        }
        acc.value()
    }

    /// Image measure under the map: same weights, mapped atoms.
    pub fn pushforward(&self, system: &MapSystem) -> Result<Self, MeasureError> {
        if system.dimension() != self.dim {
            return Err(MeasureError::DimensionMismatch(format!(
                "measure dim {} vs system dim {}",
                self.dim,
                system.dimension()
            )));
        }
        let mut atoms = vec![0.0; self.atoms.len()];
        for i in 0..self.len() {
            system.apply_into(self.atom(i), &mut atoms[i * self.dim..(i + 1) * self.dim]);
        }
        Ok(DiscreteMeasure {
            dim: self.dim,
            atoms,
            weights: self.weights.clone(),
        })
    }

    /// Convex combination: atom lists concatenated, weights scaled by the
    /// coefficients. Coefficients must be nonnegative and sum to 1.
    pub fn convex_combination(parts: &[(f64, &DiscreteMeasure)]) -> Result<Self, MeasureError> {
        if parts.is_empty() {
            return Err(MeasureError::InvalidArgument(
                "convex combination of nothing".into(),
            ));
        }
        let dim = parts[0].1.dim;
        let mut total = CompensatedSum::default();
        for &(theta, mu) in parts {
            if !(theta >= 0.0) {
                return Err(MeasureError::InvalidArgument(
                    "coefficients must be >= 0".into(),
                ));
            }
            if mu.dim != dim {
                return Err(MeasureError::DimensionMismatch(
                    "mixed dimensions in convex combination".into(),
                ));
            }
            total.add(theta);
        }
        if (total.value() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::InvalidArgument(format!(
                "coefficients sum to {}, not 1",
                total.value()
            )));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for &(theta, mu) in parts {
            if theta == 0.0 {
                continue;
            }
            atoms.extend_from_slice(&mu.atoms);
            weights.extend(mu.weights.iter().map(|w| theta * w));
        }
        Ok(DiscreteMeasure {
            dim,
            atoms,
            weights,
        })
    }
}

impl TryFrom<MeasureJson> for DiscreteMeasure {
    type Error = MeasureError;

    fn try_from(j: MeasureJson) -> Result<Self, MeasureError> {
        if j.atoms.is_empty() {
            return Err(MeasureError::Invalid("no atoms".into()));
        }
        let dim = j.atoms[0].len();
        if j.atoms.iter().any(|a| a.len() != dim) {
            return Err(MeasureError::Invalid("ragged atom list".into()));
        }
        let flat: Vec<f64> = j.atoms.into_iter().flatten().collect();
        DiscreteMeasure::new(dim, flat, j.weights)
    }
}

impl From<DiscreteMeasure> for MeasureJson {
    fn from(m: DiscreteMeasure) -> MeasureJson {
        MeasureJson {
            atoms: (0..m.len()).map(|i| m.atom(i).to_vec()).collect(),
            weights: m.weights,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum TrigMode {
    Cos,
    Sin,
}

/// One tensor-product trigonometric monomial
/// `prod_i trig(2 pi k_i x_i)` over the nonzero-frequency axes.
/// Sup norm is exactly 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrigObservable {
    freq: Vec<u32>,
    modes: Vec<TrigMode>,
}

impl TrigObservable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (i, (&k, &mode)) in self.freq.iter().zip(&self.modes).enumerate() {
            if k == 0 {
                continue;
            }
            let arg = 2.0 * std::f64::consts::PI * k as f64 * x[i];
            v *= match mode {
                TrigMode::Cos => arg.cos(),
                TrigMode::Sin => arg.sin(),
            };
        }
        v
    }

    pub fn total_frequency(&self) -> u32 {
        self.freq.iter().sum()
    }
}

/// The default dense observable family: tensor-product trigonometric
/// monomials ordered by total frequency, constant excluded. The first L
/// members define the truncated weak* distance at level L.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableFamily {
    dim: usize,
    generators: Vec<TrigObservable>,
}

impl ObservableFamily {
    /// First `len` members of the canonical family on [0,1)^dim.
    pub fn trig(dim: usize, len: usize) -> Self {
        assert!(dim >= 1 && len >= 1);
        let mut generators = Vec::with_capacity(len);
        let mut total = 1u32;
        'outer: loop {
            for freq in frequency_tuples(dim, total) {
                let active: Vec<usize> = (0..dim).filter(|&i| freq[i] > 0).collect();
                for mask in 0..(1u32 << active.len()) {
                    let mut modes = vec![TrigMode::Cos; dim];
                    for (bit, &axis) in active.iter().enumerate() {
                        if mask >> (active.len() - 1 - bit) & 1 == 1 {
                            modes[axis] = TrigMode::Sin;
                        }
                    }
                    generators.push(TrigObservable {
                        freq: freq.clone(),
                        modes,
                    });
                    if generators.len() == len {
                        break 'outer;
                    }
                }
            }
            total += 1;
        }
        ObservableFamily { dim, generators }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Evaluate member `n` (0-based).
    pub fn eval(&self, n: usize, x: &[f64]) -> f64 {
        self.generators[n].eval(x)
    }

    pub fn generator(&self, n: usize) -> &TrigObservable {
        &self.generators[n]
    }

    /// Exact sup norm of member `n`.
    pub fn sup_norm(&self, _n: usize) -> f64 {
        1.0
    }

    pub fn max_total_frequency(&self) -> u32 {
        self.generators
            .iter()
            .map(|g| g.total_frequency())
            .max()
            .unwrap_or(0)
    }

    /// Uniform-continuity modulus valid for every normalized member:
    /// `d(x, y) < modulus(eps)` implies `|g(x) - g(y)| < eps`, via the
    /// gradient bound 2 pi (total frequency).
    pub fn modulus(&self, eps: f64) -> f64 {
        assert!(eps > 0.0);
        eps / (2.0 * std::f64::consts::PI * self.max_total_frequency().max(1) as f64)
    }

    /// Exact Lebesgue integral of member `n`: zero for every non-constant
    /// trigonometric monomial on the torus.
    pub fn lebesgue_integral(&self, _n: usize) -> f64 {
        0.0
    }

    pub fn integrate(&self, n: usize, mu: &DiscreteMeasure) -> f64 {
        let g = &self.generators[n];
        let mut acc = CompensatedSum::default();
        for (i, &w) in mu.weights().iter().enumerate() {
            acc.add(w * g.eval(mu.atom(i)));
        }
        acc.value()
    }

    /// All member integrals against `mu`, the measure's signature for
    /// weak* comparisons.
    pub fn signature(&self, mu: &DiscreteMeasure) -> Vec<f64> {
        (0..self.len()).map(|n| self.integrate(n, mu)).collect()
    }
}

fn frequency_tuples(dim: usize, total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    fill_tuples(dim, total, 0, &mut cur, &mut out);
    out
}

fn fill_tuples(dim: usize, left: u32, axis: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if axis + 1 == dim {
        cur[axis] = left;
        out.push(cur.clone());
        return;
    }
    // Descending first coordinate keeps pure low-axis modes in front.
    for k in (0..=left).rev() {
        cur[axis] = k;
        fill_tuples(dim, left - k, axis + 1, cur, out);
    }
}

/// Truncated weak* distance with its exact tail bound 2^-L.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WeakStarDistance {
    pub value: f64,
    pub truncation_level: usize,
    pub tail_bound: f64,
}

pub fn tail_bound(level: usize) -> f64 {
    0.5f64.powi(level as i32)
}

/// Distance between two integral signatures of equal length.
pub fn distance_from_signatures(a: &[f64], b: &[f64]) -> WeakStarDistance {
    assert_eq!(a.len(), b.len());
    let mut acc = CompensatedSum::default();
    for (n, (x, y)) in a.iter().zip(b).enumerate() {
        acc.add((x - y).abs() * 0.5f64.powi(n as i32 + 2));
    }
    WeakStarDistance {
        value: acc.value(),
        truncation_level: a.len(),
        tail_bound: tail_bound(a.len()),
    }
}

pub fn weak_star_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    family: &ObservableFamily,
) -> Result<WeakStarDistance, MeasureError> {
    if mu.dim() != family.dim() || nu.dim() != family.dim() {
        return Err(MeasureError::DimensionMismatch(format!(
            "measures of dim {} and {} against a family on dim {}",
            mu.dim(),
            nu.dim(),
            family.dim()
        )));
    }
    Ok(distance_from_signatures(
        &family.signature(mu),
        &family.signature(nu),
    ))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn measure_strategy() -> impl Strategy<Value = DiscreteMeasure> {
        (1usize..5)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.0f64..1.0, n),
                    prop::collection::vec(0.01f64..1.0, n),
                )
            })
            .prop_map(|(atoms, raw)| {
                let total: f64 = raw.iter().sum();
                let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
                // Row sums after division can miss 1 by float dust only.
                DiscreteMeasure::new(1, atoms, weights).unwrap()
            })
    }

    proptest! {
        #[test]
        fn weak_star_is_a_pseudometric(
            a in measure_strategy(),
            b in measure_strategy(),
            c in measure_strategy(),
        ) {
            let fam = ObservableFamily::trig(1, 6);
            let dab = weak_star_distance(&a, &b, &fam).unwrap().value;
            let dba = weak_star_distance(&b, &a, &fam).unwrap().value;
            let dac = weak_star_distance(&a, &c, &fam).unwrap().value;
            let dcb = weak_star_distance(&c, &b, &fam).unwrap().value;
            let daa = weak_star_distance(&a, &a, &fam).unwrap().value;
            prop_assert_eq!(daa, 0.0);
            prop_assert_eq!(dab, dba);
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn empirical_weights_total_one(x0 in 0.0f64..1.0, n in 1usize..40) {
            let f = crate::systems::MapSystem::doubling();
            let orbit = f.orbit_segment(&[x0], n).unwrap();
            let mu = DiscreteMeasure::empirical(&orbit, n).unwrap();
            let total: f64 = mu.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
