//! Physical-like measure estimation: seeded Monte Carlo over initial
//! conditions, empirical measures at geometric checkpoints, greedy weak*
//! clustering of the late measures, point classification (regular,
//! strongly regular, physically typical, or matching no cluster at all),
//! and the support-inclusion check that every estimated measure lives
//! inside one chain recurrent class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::{embedded_word_orbit, map_piece, ApproxError, GenericPoint};
use crate::chain::{BoxGrid, ChainClass};
use crate::measure::{
    distance_from_signatures, CompensatedSum, DiscreteMeasure, MeasureError, ObservableFamily,
};
use crate::rng::{stream, StreamDomain};
use crate::systems::{MapSystem, Orbit, SymbolicSystem, SystemError};

#[derive(Debug, Error)]
pub enum PhysicalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// Default clustering radius in weak* units.
pub const DEFAULT_CLUSTER_RADIUS: f64 = 0.05;

/// Geometric checkpoints ceil(n / 2^c) for c = 4..0, increasing and
/// deduplicated, so non-convergence shows up as checkpoint spread without
/// storing whole measure paths.
pub fn default_checkpoints(orbit_length: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = (0..=4u32)
        .rev()
        .map(|c| orbit_length.div_ceil(1 << c))
        .collect();
    cps.dedup();
    cps
}

/// A sampled system: an iterated map on the torus or a subshift observed
/// through its embedding into the unit interval.
pub enum SampleSystem<'a> {
    Map(&'a MapSystem),
    Shift(&'a SymbolicSystem),
}

impl SampleSystem<'_> {
    pub fn dim(&self) -> usize {
        match self {
            SampleSystem::Map(f) => f.dimension(),
            SampleSystem::Shift(_) => 1,
        }
    }

    /// One seeded sample orbit. Maps sample a Lebesgue-typical orbit
    /// exactly; shifts walk a uniform admissible word and embed it.
    fn sample_orbit(&self, seed: u64, index: u64, len: usize) -> Result<Orbit, PhysicalError> {
        let mut rng = stream(seed, StreamDomain::BasinSamples, index);
        match self {
            SampleSystem::Map(f) => Ok(f.typical_orbit(&mut rng, len)?),
            SampleSystem::Shift(s) => {
                let w = s.random_word(len + s.window(), &mut rng);
                Ok(embedded_word_orbit(s, &w, len))
            }
        }
    }

    /// Orbit of an explicitly presented point.
    fn point_orbit(
        &self,
        index: usize,
        point: &GenericPoint,
        len: usize,
    ) -> Result<Orbit, PhysicalError> {
        match (self, point) {
            (SampleSystem::Map(f), p) => Ok(map_piece(f, index, p, len)?),
            (SampleSystem::Shift(s), GenericPoint::Word(w)) => Ok(embedded_word_orbit(s, w, len)),
            (SampleSystem::Shift(_), _) => Err(PhysicalError::InvalidArgument(
                "subshift points must be presented as words".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasinParams {
    pub n_samples: usize,
    pub orbit_length: usize,
    /// Increasing, nonempty, max at most orbit_length; the last checkpoint
    /// is the measure that gets clustered.
    pub checkpoints: Vec<usize>,
    pub cluster_radius: f64,
    pub seed: u64,
}

impl BasinParams {
    pub fn validate(&self) -> Result<(), PhysicalError> {
        if self.n_samples == 0 {
            return Err(PhysicalError::InvalidArgument("n_samples must be >= 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(PhysicalError::InvalidArgument("checkpoints must be nonempty".into()));
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(PhysicalError::InvalidArgument(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        let last = *self.checkpoints.last().unwrap();
        if self.checkpoints[0] == 0 || last > self.orbit_length {
            return Err(PhysicalError::InvalidArgument(
                "checkpoints must lie in [1, orbit_length]".into(),
            ));
        }
        if !(self.cluster_radius > 0.0) {
            return Err(PhysicalError::InvalidArgument(
                "cluster_radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One estimated physical-like candidate: the founding sample's late
/// empirical measure and how much of the sample mass fell within the
/// cluster radius of it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureCluster {
    pub id: usize,
    pub representative: DiscreteMeasure,
    pub members: usize,
    pub lebesgue_fraction: f64,
}

/// Per-sample record: where the sample started, which cluster its late
/// measure joined, and how far its checkpoint measures spread.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: usize,
    pub initial: Vec<f64>,
    pub cluster_id: usize,
    pub diameter: f64,
    pub class: RegularityClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularityClass {
    Regular,
    Irregular,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub clusters: Vec<MeasureCluster>,
    pub samples: Vec<SampleOutcome>,
    pub cluster_radius: f64,
    /// Regularity cut for the per-sample records: twice the radius.
    pub diameter_threshold: f64,
}

/// Empirical-measure signatures at each checkpoint, one compensated pass.
fn checkpoint_signatures(
    family: &ObservableFamily,
    orbit: &Orbit,
    checkpoints: &[usize],
) -> Vec<Vec<f64>> {
    let mut acc = vec![CompensatedSum::default(); family.len()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for t in 0..*checkpoints.last().unwrap() {
        let x = orbit.point(t);
        for (g, a) in acc.iter_mut().enumerate() {
            a.add(family.eval(g, x));
        }
        if t + 1 == checkpoints[next] {
            let n = (t + 1) as f64;
            out.push(acc.iter().map(|a| a.value() / n).collect());
            next += 1;
            if next == checkpoints.len() {
                break;
            }
        }
    }
    out
}

fn signature_diameter(sigs: &[Vec<f64>]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..sigs.len() {
        for j in i + 1..sigs.len() {
            d = d.max(distance_from_signatures(&sigs[i], &sigs[j]).value);
        }
    }
    d
}

/// Sample seeded initial conditions, compute late empirical measures, and
/// greedy-cluster them under the weak* metric: each sample joins the first
/// cluster whose founder lies within the radius, else founds a new one.
/// Sample orbits run in parallel; the clustering pass is a sequential
/// reduction in sample order, so results are independent of worker count.
pub fn estimate_physical_like_set(
    system: &SampleSystem,
    family: &ObservableFamily,
    params: &BasinParams,
) -> Result<BasinEstimate, PhysicalError> {
    params.validate()?;
    if family.dim() != system.dim() {
        return Err(PhysicalError::InvalidArgument(format!(
            "family dimension {} does not match the system's {}",
            family.dim(),
            system.dim()
        )));
    }
    let final_cp = *params.checkpoints.last().unwrap();

    struct PerSample {
        initial: Vec<f64>,
        sigs: Vec<Vec<f64>>,
    }
    let per_sample: Vec<Result<PerSample, PhysicalError>> = (0..params.n_samples)
        .into_par_iter()
        .map(|i| {
            let orbit = system.sample_orbit(params.seed, i as u64, params.orbit_length)?;
            let sigs = checkpoint_signatures(family, &orbit, &params.checkpoints);
            Ok(PerSample {
                initial: orbit.point(0).to_vec(),
                sigs,
            })
        })
        .collect();
    let mut samples_data = Vec::with_capacity(params.n_samples);
    for r in per_sample {
        samples_data.push(r?);
    }

    // Greedy first-seen clustering on the final-checkpoint signatures.
    let mut founders: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut assignment = Vec::with_capacity(params.n_samples);
    for (i, s) in samples_data.iter().enumerate() {
        let late = s.sigs.last().unwrap();
        let found = founders
            .iter()
            .position(|(_, rep)| distance_from_signatures(late, rep).value <= params.cluster_radius);
        match found {
            Some(c) => assignment.push(c),
            None => {
                assignment.push(founders.len());
                founders.push((i, late.clone()));
            }
        }
    }

    let mut members = vec![0usize; founders.len()];
    for &c in &assignment {
        members[c] += 1;
    }

    // Materialize founder measures by replaying their seeded orbits.
    let mut clusters = Vec::with_capacity(founders.len());
    for (c, (founder_idx, _)) in founders.iter().enumerate() {
        let orbit = system.sample_orbit(params.seed, *founder_idx as u64, params.orbit_length)?;
        let representative = DiscreteMeasure::empirical(&orbit, final_cp)?;
        clusters.push(MeasureCluster {
            id: c,
            representative,
            members: members[c],
            lebesgue_fraction: members[c] as f64 / params.n_samples as f64,
        });
    }

    let diameter_threshold = 2.0 * params.cluster_radius;
    let samples = samples_data
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let diameter = signature_diameter(&s.sigs);
            SampleOutcome {
                sample_id: i,
                initial: s.initial.clone(),
                cluster_id: assignment[i],
                diameter,
                class: if diameter <= diameter_threshold {
                    RegularityClass::Regular
                } else {
                    RegularityClass::Irregular
                },
            }
        })
        .collect();

    Ok(BasinEstimate {
        clusters,
        samples,
        cluster_radius: params.cluster_radius,
        diameter_threshold,
    })
}

/// Thresholds used by classification, echoed into every record.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    /// Checkpoint-diameter cut between regular and irregular.
    pub diameter: f64,
    /// Weak* radius for matching checkpoint measures to cluster
    /// representatives.
    pub cluster_radius: f64,
    /// Mass allowed outside the support-box set.
    pub support_mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointClassification {
    pub point: GenericPoint,
    /// Max pairwise weak* distance among the checkpoint measures.
    pub diameter: f64,
    pub class: RegularityClass,
    /// Regular, and the starting box keeps positive late mass: the finite
    /// surrogate for being a generic point inside one's own support.
    pub strongly_regular_flag: bool,
    /// Every checkpoint measure sits within the radius of some estimated
    /// cluster representative.
    pub physically_typical_flag: bool,
    /// No checkpoint measure comes within the radius of any representative:
    /// the orbit's statistics match nothing physical-like we found.
    pub gamma_flag: bool,
    pub thresholds: ClassifyThresholds,
}

/// Classify explicitly presented points against an estimated cluster set.
pub fn classify_points(
    system: &SampleSystem,
    family: &ObservableFamily,
    points: &[GenericPoint],
    checkpoints: &[usize],
    clusters: &[MeasureCluster],
    grid: BoxGrid,
    thresholds: ClassifyThresholds,
) -> Result<Vec<PointClassification>, PhysicalError> {
    if checkpoints.is_empty() || !checkpoints.windows(2).all(|w| w[0] < w[1]) || checkpoints[0] == 0
    {
        return Err(PhysicalError::InvalidArgument(
            "checkpoints must be nonempty, positive, strictly increasing".into(),
        ));
    }
    if grid.dim() != system.dim() {
        return Err(PhysicalError::InvalidArgument(
            "grid dimension does not match the system".into(),
        ));
    }
    let final_cp = *checkpoints.last().unwrap();
    let rep_sigs: Vec<Vec<f64>> = clusters
        .iter()
        .map(|c| family.signature(&c.representative))
        .collect();

    let mut out = Vec::with_capacity(points.len());
    for (i, point) in points.iter().enumerate() {
        let orbit = system.point_orbit(i, point, final_cp)?;
        let sigs = checkpoint_signatures(family, &orbit, checkpoints);
        let diameter = signature_diameter(&sigs);
        let regular = diameter <= thresholds.diameter;

        let near = |sig: &Vec<f64>| {
            rep_sigs
                .iter()
                .any(|rep| distance_from_signatures(sig, rep).value <= thresholds.cluster_radius)
        };
        let physically_typical_flag = !rep_sigs.is_empty() && sigs.iter().all(&near);
        let gamma_flag = !sigs.iter().any(&near);

        let strongly_regular_flag = if regular {
            let late = DiscreteMeasure::empirical(&orbit, final_cp)?;
            let support = support_boxes(&late, grid, thresholds.support_mass)?;
            let start_box = grid.index_of(orbit.point(0)) as u32;
            support.binary_search(&start_box).is_ok()
        } else {
            false
        };

        out.push(PointClassification {
            point: point.clone(),
            diameter,
            class: if regular {
                RegularityClass::Regular
            } else {
                RegularityClass::Irregular
            },
            strongly_regular_flag,
            physically_typical_flag,
            gamma_flag,
            thresholds,
        });
    }
    Ok(out)
}

/// Smallest set of grid boxes, filled in order of descending mass (ties by
/// box index), holding at least 1 - mass_threshold of the measure. Returned
/// sorted ascending.
pub fn support_boxes(
    mu: &DiscreteMeasure,
    grid: BoxGrid,
    mass_threshold: f64,
) -> Result<Vec<u32>, PhysicalError> {
    if !(0.0..1.0).contains(&mass_threshold) {
        return Err(PhysicalError::InvalidArgument(
            "mass_threshold must lie in [0, 1)".into(),
        ));
    }
    if mu.dim() != grid.dim() {
        return Err(PhysicalError::InvalidArgument(
            "measure and grid dimensions differ".into(),
        ));
    }
    let mut mass: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
    for i in 0..mu.len() {
        *mass.entry(grid.index_of(mu.atom(i)) as u32).or_insert(0.0) += mu.weight(i);
    }
    let mut by_mass: Vec<(u32, f64)> = mass.into_iter().collect();
    by_mass.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let needed = 1.0 - mass_threshold;
    let mut kept = Vec::new();
    let mut cum = 0.0f64;
    for (b, m) in by_mass {
        kept.push(b);
        cum += m;
        if cum >= needed {
            break;
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Verdict for one cluster: whether its support boxes all lie inside a
/// single chain recurrent class, and which one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionVerdict {
    pub cluster_id: usize,
    pub contained: bool,
    pub hosting_class: Option<usize>,
    pub support_box_count: usize,
    /// Support boxes outside the hosting class (or outside every class).
    pub stray_boxes: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionReport {
    pub verdicts: Vec<InclusionVerdict>,
    pub all_contained: bool,
    pub mass_threshold: f64,
}

/// Check each cluster representative's support against the chain classes:
/// containment means every support box belongs to one and the same class.
pub fn check_support_inclusion(
    clusters: &[MeasureCluster],
    classes: &[ChainClass],
    grid: BoxGrid,
    mass_threshold: f64,
) -> Result<InclusionReport, PhysicalError> {
    let mut owner: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for class in classes {
        for &b in &class.boxes {
            owner.insert(b, class.id);
        }
    }
    let mut verdicts = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let support = support_boxes(&cluster.representative, grid, mass_threshold)?;
        let hosts: Vec<Option<usize>> = support.iter().map(|b| owner.get(b).copied()).collect();
        let host = hosts.first().copied().flatten();
        let contained = host.is_some() && hosts.iter().all(|h| *h == host);
        let stray_boxes = if contained {
            Vec::new()
        } else {
            support
                .iter()
                .zip(&hosts)
                .filter(|(_, h)| **h != host || h.is_none())
                .map(|(b, _)| *b)
                .collect()
        };
        verdicts.push(InclusionVerdict {
            cluster_id: cluster.id,
            contained,
            hosting_class: if contained { host } else { None },
            support_box_count: support.len(),
            stray_boxes,
        });
    }
    Ok(InclusionReport {
        all_contained: verdicts.iter().all(|v| v.contained),
        verdicts,
        mass_threshold,
    })
}

/// Subshift version: the support of an embedded measure is read off at the
/// symbol level (leading digits), and the classes are the strongly
/// connected components of the symbol graph.
pub fn check_symbol_support_inclusion(
    system: &SymbolicSystem,
    clusters: &[MeasureCluster],
    mass_threshold: f64,
) -> Result<InclusionReport, PhysicalError> {
    if !(0.0..1.0).contains(&mass_threshold) {
        return Err(PhysicalError::InvalidArgument(
            "mass_threshold must lie in [0, 1)".into(),
        ));
    }
    let graph = system.symbol_graph();
    let comps = crate::graph::strongly_connected_components(&graph);
    let mut owner: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for (id, comp) in comps.iter().enumerate() {
        for &s in comp {
            owner.insert(s, id);
        }
    }
    let mut verdicts = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mu = &cluster.representative;
        if mu.dim() != 1 {
            return Err(PhysicalError::InvalidArgument(
                "embedded subshift measures are one-dimensional".into(),
            ));
        }
        let mut mass = vec![0.0f64; system.alphabet()];
        for i in 0..mu.len() {
            mass[system.leading_symbol_of_embedded(mu.atom(i)[0]) as usize] += mu.weight(i);
        }
        let mut by_mass: Vec<(u32, f64)> = mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(s, m)| (s as u32, *m))
            .collect();
        by_mass.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let needed = 1.0 - mass_threshold;
        let mut support = Vec::new();
        let mut cum = 0.0f64;
        for (s, m) in by_mass {
            support.push(s);
            cum += m;
            if cum >= needed {
                break;
            }
        }
        support.sort_unstable();
        let hosts: Vec<Option<usize>> = support.iter().map(|s| owner.get(s).copied()).collect();
        let host = hosts.first().copied().flatten();
        let contained = host.is_some() && hosts.iter().all(|h| *h == host);
        verdicts.push(InclusionVerdict {
            cluster_id: cluster.id,
            contained,
            hosting_class: if contained { host } else { None },
            support_box_count: support.len(),
            stray_boxes: if contained {
                Vec::new()
            } else {
                support.clone()
            },
        });
    }
    Ok(InclusionReport {
        all_contained: verdicts.iter().all(|v| v.contained),
        verdicts,
        mass_threshold,
    })
}
