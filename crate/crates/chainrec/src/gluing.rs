//! Periodic gluing: concatenate orbit segments of a chain recurrent class
//! through in-class box chains into one periodic pseudo-orbit, then shadow
//! that pseudo-orbit by a genuine periodic orbit where the system makes
//! shadowing constructive (subshifts and expanding circle maps).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainClass, ChainError, PseudoOrbit, TransitionGraph};
use crate::graph::{max_pairwise_chain_length, shortest_path, strongly_connected_components};
use crate::rng::{stream, StreamDomain};
use crate::systems::{
    delta_exponent, MapSystem, Orbit, PhasePoint, SymbolicSystem, SystemError, Word,
};

/// Sweep cap for the inverse-branch pullback; the contraction halves the
/// error per sweep, so 200 sweeps is far past f64 fixpoint.
const PULLBACK_SWEEP_CAP: usize = 200;

/// Fixed seed for the no-guarantee long-orbit search, so certificates are
/// reproducible without threading an RNG through the shadowing call.
const LONG_SEARCH_SEED: u64 = 17;

#[derive(Debug, Error)]
pub enum GluingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("gluing certificate failed at step {step}: {msg}")]
    Certificate { step: usize, msg: String },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Bookkeeping for one glued periodic pseudo-orbit: segment starts and
/// lengths n_i, connector gap lengths m_i, and the cumulative offsets
/// c_0 = 0, c_i = sum_{j<=i} (n_j + m_j), so segment i occupies timeline
/// slots [c_{i-1}, c_{i-1} + n_i) and the whole cycle has period
/// p = c_k = sum (n_i + m_i).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluingSchedule {
    pub segments: Vec<(PhasePoint, usize)>,
    pub gaps: Vec<usize>,
    /// Shadowing quality the construction can certify, when it can.
    pub epsilon: Option<f64>,
    /// Upper bound for every gap: the gluing constant of the class.
    pub gap_bound: usize,
    pub offsets: Vec<usize>,
    pub period: usize,
}

impl GluingSchedule {
    /// Exact integer consistency: offsets track (n_i + m_i) sums, the last
    /// offset is the period, and no gap exceeds the bound.
    pub fn validate(&self) -> Result<(), GluingError> {
        let k = self.segments.len();
        if k == 0 {
            return Err(GluingError::InvalidArgument("empty schedule".into()));
        }
        if self.gaps.len() != k || self.offsets.len() != k + 1 {
            return Err(GluingError::InvalidArgument(
                "schedule field lengths disagree".into(),
            ));
        }
        if self.offsets[0] != 0 {
            return Err(GluingError::InvalidArgument("offsets must start at 0".into()));
        }
        for i in 0..k {
            let (_, n_i) = self.segments[i];
            if n_i == 0 {
                return Err(GluingError::InvalidArgument(format!(
                    "segment {i} has length 0"
                )));
            }
            if self.gaps[i] > self.gap_bound {
                return Err(GluingError::InvalidArgument(format!(
                    "gap {i} = {} exceeds the bound {}",
                    self.gaps[i], self.gap_bound
                )));
            }
            let expect = self.offsets[i] + n_i + self.gaps[i];
            if self.offsets[i + 1] != expect {
                return Err(GluingError::InvalidArgument(format!(
                    "offset {} is {}, expected {expect}",
                    i + 1,
                    self.offsets[i + 1]
                )));
            }
        }
        if self.period != self.offsets[k] {
            return Err(GluingError::InvalidArgument(format!(
                "period {} does not match final offset {}",
                self.period, self.offsets[k]
            )));
        }
        Ok(())
    }
}

/// M = max over ordered box pairs (i, j) of the class of the shortest
/// in-class chain from i to j, where i == j counts the shortest genuine
/// return cycle. Every connector the gluer inserts fits inside this bound.
pub fn gluing_constant<G: crate::graph::NodeGraph>(
    graph: &G,
    class: &ChainClass,
) -> Result<usize, GluingError> {
    if class.boxes.is_empty() {
        return Err(GluingError::InvalidArgument("empty class".into()));
    }
    let members: Vec<u64> = class.boxes.iter().map(|&b| b as u64).collect();
    max_pairwise_chain_length(graph, &members).ok_or_else(|| {
        GluingError::Internal("class is not strongly connected".into())
    })
}

/// Concatenate the orbit segments {x_i, f(x_i), ..., f^{n_i - 1}(x_i)}
/// into a periodic pseudo-orbit, bridging segment i's endpoint f^{n_i}(x_i)
/// to segment i+1's start through a shortest in-class box chain. The
/// resulting cycle is re-verified at the graph's certificate tolerance.
pub fn glue_periodic_pseudo_orbit(
    system: &MapSystem,
    graph: &TransitionGraph,
    class: &ChainClass,
    segments: &[(Vec<f64>, usize)],
) -> Result<(GluingSchedule, PseudoOrbit), GluingError> {
    let dim = graph.grid().dim();
    let mut pieces: Vec<Orbit> = Vec::with_capacity(segments.len());
    for (i, (x, n)) in segments.iter().enumerate() {
        if *n == 0 {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} has length 0"
            )));
        }
        if x.len() != dim {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} start has dimension {}, expected {dim}",
                x.len()
            )));
        }
        pieces.push(system.orbit_segment(x, n + 1)?);
    }
    glue_periodic_orbit_pieces(system, graph, class, &pieces)
}

/// Same construction from already-materialized orbit pieces. Each piece
/// holds the n_i segment slots plus the one-past endpoint its connector
/// starts from, so a piece of length n_i + 1 contributes n_i slots. The
/// pieces need not come from direct float iteration; any per-step-exact
/// orbit sampling qualifies, and the certificate is re-verified either way.
pub fn glue_periodic_orbit_pieces(
    system: &MapSystem,
    graph: &TransitionGraph,
    class: &ChainClass,
    pieces: &[Orbit],
) -> Result<(GluingSchedule, PseudoOrbit), GluingError> {
    if pieces.is_empty() {
        return Err(GluingError::InvalidArgument(
            "at least one segment is required".into(),
        ));
    }
    let grid = graph.grid();
    let dim = grid.dim();
    if system.dimension() != dim {
        return Err(GluingError::InvalidArgument(
            "system dimension does not match the grid".into(),
        ));
    }
    let gap_bound = gluing_constant(graph, class)?;
    let class_set: HashSet<u32> = class.boxes.iter().copied().collect();

    for (i, piece) in pieces.iter().enumerate() {
        if piece.dim() != dim {
            return Err(GluingError::InvalidArgument(format!(
                "piece {i} has dimension {}, expected {dim}",
                piece.dim()
            )));
        }
        if piece.len() < 2 {
            return Err(GluingError::InvalidArgument(format!(
                "piece {i} needs at least two points (one slot plus the endpoint)"
            )));
        }
        let b_start = grid.index_of(piece.point(0)) as u32;
        let b_end = grid.index_of(piece.point(piece.len() - 1)) as u32;
        if !class.contains(b_start) {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} starts in box {b_start}, outside the class"
            )));
        }
        if !class.contains(b_end) {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} ends in box {b_end}, outside the class"
            )));
        }
    }

    let k = pieces.len();
    let mut flat: Vec<f64> = Vec::new();
    let mut gaps: Vec<usize> = Vec::with_capacity(k);
    let mut offsets: Vec<usize> = Vec::with_capacity(k + 1);
    offsets.push(0);
    for i in 0..k {
        let piece = &pieces[i];
        let n_i = piece.len() - 1;
        for l in 0..n_i {
            flat.extend_from_slice(piece.point(l));
        }
        let endpoint = piece.point(n_i);
        let next_start = pieces[(i + 1) % k].point(0);
        let b_from = grid.index_of(endpoint) as u32;
        let b_to = grid.index_of(next_start) as u32;
        let path = shortest_path(graph, b_from, b_to, b_from == b_to, Some(&class_set))
            .ok_or_else(|| {
                GluingError::Internal(format!(
                    "no in-class chain from box {b_from} to box {b_to}"
                ))
            })?;
        let gap = path.len() - 1;
        if gap > gap_bound {
            return Err(GluingError::Internal(format!(
                "connector length {gap} exceeds the gluing constant {gap_bound}"
            )));
        }
        flat.extend_from_slice(endpoint);
        for &b in &path[1..path.len() - 1] {
            flat.extend(grid.center(b as usize));
        }
        gaps.push(gap);
        offsets.push(offsets[i] + n_i + gap);
    }
    let period = *offsets.last().unwrap();

    let epsilon = system
        .expansion_factor()
        .map(|lambda| 2.0 * graph.certificate_delta() / (lambda - 1.0));
    let schedule = GluingSchedule {
        segments: pieces
            .iter()
            .map(|piece| (PhasePoint::Euclid(piece.point(0).to_vec()), piece.len() - 1))
            .collect(),
        gaps,
        epsilon,
        gap_bound,
        offsets,
        period,
    };
    schedule.validate()?;
    let pseudo = PseudoOrbit {
        points: Orbit::from_flat(dim, flat),
        delta: graph.certificate_delta(),
        periodic: true,
    };
    debug_assert_eq!(pseudo.points.len(), period);
    pseudo.verify(system)?;
    Ok((schedule, pseudo))
}

/// Cyclic word-valued pseudo-orbit: at tolerance delta = 2^-m consecutive
/// entries must agree to depth m-1 after one shift, which is exactly what
/// the subshift shadowing call requires.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordChain {
    pub words: Vec<Word>,
    pub delta: f64,
    pub periodic: bool,
}

impl WordChain {
    fn step_targets(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.words.len();
        let steps = if self.periodic { n } else { n.saturating_sub(1) };
        (0..steps).map(move |t| (t, (t + 1) % n))
    }

    pub fn max_step_defect(&self, system: &SymbolicSystem) -> Option<f64> {
        self.step_targets()
            .map(|(t, u)| system.metric(&self.words[t].shift(1), &self.words[u]))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.max(d))))
    }

    /// Exact symbol-level check of the chain property plus admissibility
    /// of every entry.
    pub fn verify(&self, system: &SymbolicSystem) -> Result<(), GluingError> {
        if self.words.is_empty() {
            return Err(GluingError::InvalidArgument("empty word chain".into()));
        }
        let m = delta_exponent(self.delta)?;
        for (t, w) in self.words.iter().enumerate() {
            if let Some(pos) = system.admissibility_defect(w) {
                return Err(GluingError::Certificate {
                    step: t,
                    msg: format!("entry is inadmissible at position {pos}"),
                });
            }
        }
        for (t, u) in self.step_targets() {
            for j in 0..m.saturating_sub(1) {
                let a = self.words[t].symbol_at(j + 1);
                let b = self.words[u].symbol_at(j);
                if a.is_none() || b.is_none() || a != b {
                    return Err(GluingError::Certificate {
                        step: t,
                        msg: format!("entries {t} and {u} disagree at shifted depth {j}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Subshift analog of the map gluer at tracking depth m: segment i
/// contributes its first n_i shifts as true orbit slots, then m lookahead
/// symbols and a shortest admissible symbol bridge fill the gap, giving
/// m_i = m + (bridge edges) - 1 and certified deviation 2^-(m+1) on every
/// segment slot.
pub fn glue_periodic_word_orbit(
    system: &SymbolicSystem,
    segments: &[(Word, usize)],
    m: usize,
) -> Result<(GluingSchedule, WordChain), GluingError> {
    if segments.is_empty() {
        return Err(GluingError::InvalidArgument(
            "at least one segment is required".into(),
        ));
    }
    if m == 0 {
        return Err(GluingError::InvalidArgument(
            "tracking depth m must be at least 1".into(),
        ));
    }
    for (i, (w, n)) in segments.iter().enumerate() {
        if *n == 0 {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} has length 0"
            )));
        }
        if let Some(pos) = system.admissibility_defect(w) {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} is inadmissible at position {pos}"
            )));
        }
        if w.available_len() < *n + m {
            return Err(GluingError::InvalidArgument(format!(
                "segment {i} needs {} symbols for length {n} plus lookahead {m}",
                n + m
            )));
        }
    }

    // All segment symbols must share one strongly connected symbol class.
    let graph = system.symbol_graph();
    let comps = strongly_connected_components(&graph);
    let home = |s: u8| comps.iter().position(|c| c.contains(&(s as u32)));
    let first = segments[0].0.symbol_at(0).unwrap();
    let class_idx = home(first).ok_or_else(|| {
        GluingError::Internal("symbol missing from the symbol graph".into())
    })?;
    for (i, (w, n)) in segments.iter().enumerate() {
        for j in 0..(n + m) {
            let s = w.symbol_at(j).unwrap();
            if home(s) != Some(class_idx) {
                return Err(GluingError::InvalidArgument(format!(
                    "segment {i} leaves the symbol class at position {j}"
                )));
            }
        }
    }
    let members: Vec<u64> = comps[class_idx].iter().map(|&s| s as u64).collect();
    let bridge_bound = max_pairwise_chain_length(&graph, &members).ok_or_else(|| {
        GluingError::InvalidArgument(
            "segment symbols do not admit return chains (no cycle through them)".into(),
        )
    })?;
    let class_set: HashSet<u32> = comps[class_idx].iter().copied().collect();

    let k = segments.len();
    let mut track: Vec<u8> = Vec::new();
    let mut gaps: Vec<usize> = Vec::with_capacity(k);
    let mut offsets: Vec<usize> = Vec::with_capacity(k + 1);
    offsets.push(0);
    for i in 0..k {
        let (w, n_i) = &segments[i];
        track.extend(w.window(n_i + m));
        let from = w.symbol_at(n_i + m - 1).unwrap();
        let to = segments[(i + 1) % k].0.symbol_at(0).unwrap();
        let path = shortest_path(
            &graph,
            from as u32,
            to as u32,
            from == to,
            Some(&class_set),
        )
        .ok_or_else(|| {
            GluingError::Internal(format!(
                "no admissible bridge from symbol {from} to symbol {to}"
            ))
        })?;
        let bridge_edges = path.len() - 1;
        if bridge_edges > bridge_bound {
            return Err(GluingError::Internal(format!(
                "bridge length {bridge_edges} exceeds the bound {bridge_bound}"
            )));
        }
        for &s in &path[1..path.len() - 1] {
            track.push(s as u8);
        }
        let gap = m + bridge_edges - 1;
        gaps.push(gap);
        offsets.push(offsets[i] + n_i + gap);
    }
    let period = *offsets.last().unwrap();
    debug_assert_eq!(track.len(), period);

    let shadow_track = Word::periodic(track);
    if let Some(pos) = system.admissibility_defect(&shadow_track) {
        return Err(GluingError::Internal(format!(
            "assembled track is inadmissible at position {pos}"
        )));
    }

    let delta = 0.5f64.powi(m as i32);
    let mut words: Vec<Word> = Vec::with_capacity(period);
    for i in 0..k {
        let (w, n_i) = &segments[i];
        for l in 0..*n_i {
            words.push(w.shift(l));
        }
        for t in (offsets[i] + n_i)..offsets[i + 1] {
            words.push(shadow_track.shift(t));
        }
    }
    let chain = WordChain {
        words,
        delta,
        periodic: true,
    };
    chain.verify(system)?;

    let schedule = GluingSchedule {
        segments: segments
            .iter()
            .map(|(w, n)| (PhasePoint::Word(w.clone()), *n))
            .collect(),
        gaps,
        epsilon: Some(0.5f64.powi(m as i32 - 1)),
        gap_bound: m + bridge_bound - 1,
        offsets,
        period,
    };
    schedule.validate()?;
    Ok((schedule, chain))
}

/// The realized shadow: a full periodic cycle of points, or a periodic word.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ShadowOrbit {
    Euclid(Orbit),
    Word(Word),
}

/// Outcome of shadowing a glued pseudo-orbit. `per_segment_deviation[i]`
/// is max over 0 <= l < n_i of d(f^{l + c_{i-1}}(shadow), f^l(x_i)), the
/// quantity the periodic gluing property bounds by epsilon; `guaranteed`
/// records whether a constructive bound backs the claim.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShadowingCertificate {
    pub shadow: ShadowOrbit,
    pub per_segment_deviation: Vec<f64>,
    pub max_deviation: f64,
    pub epsilon: Option<f64>,
    pub guaranteed: bool,
    pub period: usize,
}

/// Deviations of a candidate periodic cycle from the scheduled segments,
/// recomputing every f^l(x_i) by direct iteration.
pub fn measure_map_tracking(
    system: &MapSystem,
    cycle: &Orbit,
    schedule: &GluingSchedule,
) -> Result<Vec<f64>, GluingError> {
    let p = cycle.len();
    if p != schedule.period {
        return Err(GluingError::InvalidArgument(format!(
            "cycle length {p} does not match the schedule period {}",
            schedule.period
        )));
    }
    let mut out = Vec::with_capacity(schedule.segments.len());
    for (i, (start, n_i)) in schedule.segments.iter().enumerate() {
        let x = start.as_euclid().ok_or_else(|| {
            GluingError::InvalidArgument("schedule holds word segments".into())
        })?;
        let piece = system.orbit_segment(x, *n_i)?;
        let c = schedule.offsets[i];
        let mut worst = 0.0f64;
        for l in 0..*n_i {
            let d = system.metric(cycle.point((c + l) % p), piece.point(l));
            worst = worst.max(d);
        }
        out.push(worst);
    }
    Ok(out)
}

/// Deviations of a candidate cycle from the pseudo-orbit's segment slots.
/// Those slots hold f^l(x_i) by construction, so this evaluates the same
/// quantity as `measure_map_tracking` without re-iterating the map, which
/// also covers segments whose orbits were sampled exactly rather than by
/// repeated float evaluation.
pub fn measure_tracking_against_chain(
    system: &MapSystem,
    cycle: &Orbit,
    schedule: &GluingSchedule,
    pseudo: &PseudoOrbit,
) -> Result<Vec<f64>, GluingError> {
    let p = cycle.len();
    if p != schedule.period || pseudo.points.len() != schedule.period {
        return Err(GluingError::InvalidArgument(
            "cycle, pseudo-orbit, and schedule disagree on the period".into(),
        ));
    }
    let mut out = Vec::with_capacity(schedule.segments.len());
    for (i, (_, n_i)) in schedule.segments.iter().enumerate() {
        let c = schedule.offsets[i];
        let mut worst = 0.0f64;
        for l in 0..*n_i {
            let t = (c + l) % p;
            let d = system.metric(cycle.point(t), pseudo.points.point(t));
            worst = worst.max(d);
        }
        out.push(worst);
    }
    Ok(out)
}

/// Word-side analog of `measure_map_tracking`.
pub fn measure_word_tracking(
    system: &SymbolicSystem,
    shadow: &Word,
    schedule: &GluingSchedule,
) -> Result<Vec<f64>, GluingError> {
    let mut out = Vec::with_capacity(schedule.segments.len());
    for (i, (start, n_i)) in schedule.segments.iter().enumerate() {
        let w = start.as_word().ok_or_else(|| {
            GluingError::InvalidArgument("schedule holds point segments".into())
        })?;
        let c = schedule.offsets[i];
        let mut worst = 0.0f64;
        for l in 0..*n_i {
            let d = system.metric(&shadow.shift(c + l), &w.shift(l));
            worst = worst.max(d);
        }
        out.push(worst);
    }
    Ok(out)
}

fn certificate_from(
    shadow: ShadowOrbit,
    per_segment: Vec<f64>,
    epsilon: Option<f64>,
    period: usize,
) -> ShadowingCertificate {
    let max_deviation = per_segment.iter().copied().fold(0.0f64, f64::max);
    let guaranteed = epsilon.map_or(false, |e| max_deviation < e);
    ShadowingCertificate {
        shadow,
        per_segment_deviation: per_segment,
        max_deviation,
        epsilon,
        guaranteed,
        period,
    }
}

/// Shadow a glued periodic pseudo-orbit of a map system.
///
/// Expanding circle maps admit a constructive shadow: the pseudo-orbit is
/// pulled back around the cycle through the inverse branch nearest each
/// anchor, a sup-norm contraction with factor 1/lambda whose fixed point
/// is a true periodic orbit within delta * 2/(lambda - 1) of the anchors.
/// Other systems get a best-effort candidate from a long seeded orbit and
/// an explicit no-guarantee marker.
pub fn shadow_glued_map_orbit(
    system: &MapSystem,
    pseudo: &PseudoOrbit,
    schedule: &GluingSchedule,
) -> Result<ShadowingCertificate, GluingError> {
    if !pseudo.periodic {
        return Err(GluingError::InvalidArgument(
            "pseudo-orbit must be periodic".into(),
        ));
    }
    schedule.validate()?;
    let p = pseudo.points.len();
    if p != schedule.period {
        return Err(GluingError::InvalidArgument(format!(
            "pseudo-orbit length {p} does not match the schedule period {}",
            schedule.period
        )));
    }

    if let Some(lambda) = system.expansion_factor() {
        // Jacobi sweeps of the circular pullback; each sweep contracts the
        // sup distance to the fixed point by 1/lambda.
        let anchors: Vec<f64> = pseudo.points.flat().to_vec();
        let mut z = anchors.clone();
        let mut next = vec![0.0f64; p];
        for _ in 0..PULLBACK_SWEEP_CAP {
            let mut change = 0.0f64;
            for t in 0..p {
                let succ = z[(t + 1) % p];
                let pre = system
                    .branch_preimages(succ)
                    .expect("expanding built-ins expose inverse branches");
                let anchor = anchors[t];
                let pick = if system.metric(&[pre[0]], &[anchor])
                    <= system.metric(&[pre[1]], &[anchor])
                {
                    pre[0]
                } else {
                    pre[1]
                };
                change = change.max(system.metric(&[pick], &[z[t]]));
                next[t] = pick;
            }
            std::mem::swap(&mut z, &mut next);
            if change == 0.0 {
                break;
            }
        }
        let cycle = Orbit::from_flat(1, z);
        let per_segment = measure_tracking_against_chain(system, &cycle, schedule, pseudo)?;
        let epsilon = Some(2.0 * pseudo.delta / (lambda - 1.0));
        return Ok(certificate_from(
            ShadowOrbit::Euclid(cycle),
            per_segment,
            epsilon,
            p,
        ));
    }

    // No constructive shadowing: scan a long typical orbit for the window
    // closest to the pseudo-orbit, plus the forward orbit of the first
    // pseudo-orbit point as one extra candidate.
    let dim = system.dimension();
    let mut best: Option<(f64, Orbit)> = None;
    let mut consider = |orbit: &Orbit, start: usize| {
        let mut worst = 0.0f64;
        for t in 0..p {
            let d = system.metric(orbit.point(start + t), pseudo.points.point(t));
            worst = worst.max(d);
            if let Some((b, _)) = &best {
                if worst >= *b {
                    return;
                }
            }
        }
        let flat: Vec<f64> = (0..p)
            .flat_map(|t| orbit.point(start + t).iter().copied())
            .collect();
        best = Some((worst, Orbit::from_flat(dim, flat)));
    };

    let direct = system.orbit_segment(pseudo.points.point(0), p)?;
    consider(&direct, 0);
    if p <= 1 << 12 {
        let search_len = (8 * p).max(4096).min(1 << 16) + p;
        let mut rng = stream(LONG_SEARCH_SEED, StreamDomain::GluingJobs, p as u64);
        let long = system.typical_orbit(&mut rng, search_len)?;
        for s in 0..(search_len - p) {
            consider(&long, s);
        }
    }
    let (_, cycle) = best.expect("at least the direct candidate is considered");
    let per_segment = measure_tracking_against_chain(system, &cycle, schedule, pseudo)?;
    Ok(certificate_from(
        ShadowOrbit::Euclid(cycle),
        per_segment,
        None,
        p,
    ))
}

/// Shadow a glued word chain: subshift shadowing is exact, so the
/// first-symbol track is itself the periodic shadow.
pub fn shadow_glued_word_orbit(
    system: &SymbolicSystem,
    chain: &WordChain,
    schedule: &GluingSchedule,
) -> Result<ShadowingCertificate, GluingError> {
    if !chain.periodic {
        return Err(GluingError::InvalidArgument(
            "word chain must be periodic".into(),
        ));
    }
    schedule.validate()?;
    if chain.words.len() != schedule.period {
        return Err(GluingError::InvalidArgument(format!(
            "chain length {} does not match the schedule period {}",
            chain.words.len(),
            schedule.period
        )));
    }
    let shadow = system.sft_shadow(&chain.words, chain.delta, true)?;
    let per_segment = measure_word_tracking(system, &shadow, schedule)?;
    let epsilon = Some(2.0 * chain.delta);
    Ok(certificate_from(
        ShadowOrbit::Word(shadow),
        per_segment,
        epsilon,
        schedule.period,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_transition_graph, chain_recurrent_classes, BoxGrid};
    use crate::graph::AdjacencyGraph;
    use proptest::prelude::*;

    fn doubling_setup() -> (MapSystem, TransitionGraph, Vec<ChainClass>) {
        let f = MapSystem::doubling();
        let grid = BoxGrid::new(1, 6).unwrap();
        let delta = 3.0 * grid.width();
        let graph = build_transition_graph(&f, grid, delta, 32, 9).unwrap();
        let classes = chain_recurrent_classes(&graph);
        (f, graph, classes)
    }

    #[test]
    fn gluing_constant_on_reference_graphs() {
        // Lone self-looped node: the only return chain is the loop itself.
        let lone = AdjacencyGraph::new(vec![vec![0]]);
        let classes = chain_recurrent_classes(&lone);
        assert_eq!(gluing_constant(&lone, &classes[0]).unwrap(), 1);

        let full = SymbolicSystem::full_shift(2).symbol_graph();
        let classes = chain_recurrent_classes(&full);
        assert_eq!(classes.len(), 1);
        assert_eq!(gluing_constant(&full, &classes[0]).unwrap(), 1);

        // Golden mean: returning to symbol 1 forces the detour 1 -> 0 -> 1.
        let gm = SymbolicSystem::golden_mean().symbol_graph();
        let classes = chain_recurrent_classes(&gm);
        assert_eq!(classes.len(), 1);
        assert_eq!(gluing_constant(&gm, &classes[0]).unwrap(), 2);

        let empty = ChainClass {
            id: 0,
            boxes: vec![],
            is_trivial: true,
        };
        assert!(matches!(
            gluing_constant(&gm, &empty),
            Err(GluingError::InvalidArgument(_))
        ));
    }

    #[test]
    fn fixed_point_glues_to_period_two() {
        let f = MapSystem::north_south();
        let grid = BoxGrid::new(1, 6).unwrap();
        let delta = 2.0 * grid.width();
        let graph = build_transition_graph(&f, grid, delta, 32, 5).unwrap();
        let classes = chain_recurrent_classes(&graph);
        let sink_class = classes
            .iter()
            .find(|c| c.contains(grid.index_of(&[0.0]) as u32))
            .unwrap();

        let (schedule, pseudo) =
            glue_periodic_pseudo_orbit(&f, &graph, sink_class, &[(vec![0.0], 1)]).unwrap();
        assert_eq!(schedule.segments.len(), 1);
        assert_eq!(schedule.gaps, vec![1]);
        assert_eq!(schedule.offsets, vec![0, 2]);
        assert_eq!(schedule.period, 2);
        assert_eq!(pseudo.points.len(), 2);
        pseudo.verify(&f).unwrap();
    }

    #[test]
    fn doubling_glue_produces_verified_schedule_and_cycle() {
        let (f, graph, classes) = doubling_setup();
        assert_eq!(classes.len(), 1);
        let class = &classes[0];
        let segments = vec![(vec![0.137], 12), (vec![0.621], 9)];
        let (schedule, pseudo) =
            glue_periodic_pseudo_orbit(&f, &graph, class, &segments).unwrap();

        schedule.validate().unwrap();
        assert_eq!(schedule.gap_bound, gluing_constant(&graph, class).unwrap());
        for (i, gap) in schedule.gaps.iter().enumerate() {
            assert!(*gap >= 1, "gap {i} must insert at least one slot");
            assert!(*gap <= schedule.gap_bound);
        }
        let n_sum: usize = segments.iter().map(|(_, n)| n).sum();
        let m_sum: usize = schedule.gaps.iter().sum();
        assert_eq!(schedule.period, n_sum + m_sum);
        pseudo.verify(&f).unwrap();

        // Segment slots must hold the actual forward orbit of each start.
        for (i, (x, n)) in segments.iter().enumerate() {
            let piece = f.orbit_segment(x, *n).unwrap();
            let c = schedule.offsets[i];
            for l in 0..*n {
                assert_eq!(pseudo.points.point(c + l), piece.point(l));
            }
        }
    }

    #[test]
    fn doubling_shadow_is_a_true_orbit_within_the_claimed_bound() {
        let (f, graph, classes) = doubling_setup();
        let segments = vec![(vec![0.137], 12), (vec![0.621], 9)];
        let (schedule, pseudo) =
            glue_periodic_pseudo_orbit(&f, &graph, &classes[0], &segments).unwrap();
        let cert = shadow_glued_map_orbit(&f, &pseudo, &schedule).unwrap();

        assert!(cert.guaranteed);
        let eps = cert.epsilon.unwrap();
        assert!((eps - 2.0 * pseudo.delta).abs() < 1e-15);
        assert!(cert.max_deviation < eps);
        assert_eq!(cert.per_segment_deviation.len(), 2);

        let ShadowOrbit::Euclid(cycle) = &cert.shadow else {
            panic!("map shadow must be a point cycle");
        };
        assert_eq!(cycle.len(), schedule.period);
        // The pullback fixed point is a genuine periodic orbit: every step
        // evaluates exactly, including the wrap.
        for t in 0..cycle.len() {
            let image = f.image(cycle.point(t));
            let next = cycle.point((t + 1) % cycle.len());
            assert!(f.metric(&image, next) < 1e-12, "step {t} breaks the cycle");
        }

        // The tracking inequality, recomputed from scratch.
        let fresh = measure_map_tracking(&f, cycle, &schedule).unwrap();
        for (i, d) in fresh.iter().enumerate() {
            assert_eq!(*d, cert.per_segment_deviation[i]);
            assert!(*d < eps);
        }
    }

    #[test]
    fn true_periodic_orbit_shadows_itself_exactly() {
        let f = MapSystem::doubling();
        let third = 1.0 / 3.0;
        let cycle = f.orbit_segment(&[third], 2).unwrap();
        let pseudo = PseudoOrbit {
            points: cycle,
            delta: 1e-6,
            periodic: true,
        };
        pseudo.verify(&f).unwrap();
        let schedule = GluingSchedule {
            segments: vec![(PhasePoint::Euclid(vec![third]), 2)],
            gaps: vec![0],
            epsilon: Some(2e-6),
            gap_bound: 1,
            offsets: vec![0, 2],
            period: 2,
        };
        schedule.validate().unwrap();
        let cert = shadow_glued_map_orbit(&f, &pseudo, &schedule).unwrap();
        assert_eq!(cert.max_deviation, 0.0);
        assert!(cert.guaranteed);
    }

    #[test]
    fn full_shift_glue_spells_the_two_blocks_with_unit_gaps() {
        let sys = SymbolicSystem::full_shift(2);
        let zeros = Word::periodic(vec![0]);
        let ones = Word::periodic(vec![1]);
        let n = 4;
        let (schedule, chain) =
            glue_periodic_word_orbit(&sys, &[(zeros, n), (ones, n)], 1).unwrap();
        assert_eq!(schedule.gaps, vec![1, 1]);
        assert_eq!(schedule.period, 2 * n + 2);
        let cert = shadow_glued_word_orbit(&sys, &chain, &schedule).unwrap();
        let ShadowOrbit::Word(track) = &cert.shadow else {
            panic!("subshift shadow must be a word");
        };
        assert_eq!(track.window(2 * n + 2), vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!(cert.guaranteed);
    }

    #[test]
    fn golden_mean_glue_bridges_and_certifies() {
        let sys = SymbolicSystem::golden_mean();
        let m = 3;
        let segments = vec![
            (Word::periodic(vec![0]), 6usize),
            (Word::periodic(vec![0, 1]), 5usize),
        ];
        let (schedule, chain) = glue_periodic_word_orbit(&sys, &segments, m).unwrap();
        schedule.validate().unwrap();
        assert_eq!(schedule.gap_bound, m + 2 - 1);
        for gap in &schedule.gaps {
            assert!(*gap <= schedule.gap_bound);
        }
        chain.verify(&sys).unwrap();
        assert!(chain.max_step_defect(&sys).unwrap() <= 0.5f64.powi(m as i32 - 1));

        let cert = shadow_glued_word_orbit(&sys, &chain, &schedule).unwrap();
        assert!(cert.guaranteed);
        assert_eq!(cert.epsilon.unwrap(), 2.0 * chain.delta);
        assert!(cert.max_deviation <= 0.5f64.powi(m as i32 + 1));

        let ShadowOrbit::Word(track) = &cert.shadow else {
            panic!("subshift shadow must be a word");
        };
        assert!(sys.is_admissible(track));
        assert!(track.is_periodic());

        // Deviation against each input segment, recomputed verbatim.
        let fresh = measure_word_tracking(&sys, track, &schedule).unwrap();
        for (i, d) in fresh.iter().enumerate() {
            assert_eq!(*d, cert.per_segment_deviation[i]);
            assert!(*d < cert.epsilon.unwrap());
        }
    }

    #[test]
    fn word_glue_rejects_short_or_inadmissible_segments() {
        let sys = SymbolicSystem::golden_mean();
        assert!(matches!(
            glue_periodic_word_orbit(&sys, &[], 2),
            Err(GluingError::InvalidArgument(_))
        ));
        let short = Word::finite(vec![0, 1, 0]);
        assert!(matches!(
            glue_periodic_word_orbit(&sys, &[(short, 3)], 2),
            Err(GluingError::InvalidArgument(_))
        ));
        let bad = Word::finite(vec![1, 1, 0, 0, 0, 0]);
        assert!(matches!(
            glue_periodic_word_orbit(&sys, &[(bad, 2)], 2),
            Err(GluingError::InvalidArgument(_))
        ));
    }

    #[test]
    fn map_glue_rejects_empty_input_and_out_of_class_segments() {
        let f = MapSystem::north_south();
        let grid = BoxGrid::new(1, 6).unwrap();
        let graph = build_transition_graph(&f, grid, 2.0 * grid.width(), 32, 5).unwrap();
        let classes = chain_recurrent_classes(&graph);
        let sink_class = classes
            .iter()
            .find(|c| c.contains(grid.index_of(&[0.0]) as u32))
            .unwrap();
        assert!(matches!(
            glue_periodic_pseudo_orbit(&f, &graph, sink_class, &[]),
            Err(GluingError::InvalidArgument(_))
        ));
        // 0.3 drifts toward the sink but its own box is transient.
        assert!(matches!(
            glue_periodic_pseudo_orbit(&f, &graph, sink_class, &[(vec![0.3], 2)]),
            Err(GluingError::InvalidArgument(_))
        ));
    }

    #[test]
    fn non_expanding_shadow_reports_no_guarantee() {
        let f = MapSystem::north_south();
        let grid = BoxGrid::new(1, 6).unwrap();
        let graph = build_transition_graph(&f, grid, 2.0 * grid.width(), 32, 5).unwrap();
        let classes = chain_recurrent_classes(&graph);
        let sink_class = classes
            .iter()
            .find(|c| c.contains(grid.index_of(&[0.0]) as u32))
            .unwrap();
        let (schedule, pseudo) =
            glue_periodic_pseudo_orbit(&f, &graph, sink_class, &[(vec![0.0], 1)]).unwrap();
        let cert = shadow_glued_map_orbit(&f, &pseudo, &schedule).unwrap();
        assert!(!cert.guaranteed);
        assert!(cert.epsilon.is_none());
        // The sink is a genuine fixed point, so even the no-guarantee
        // search lands essentially on it.
        assert!(cert.max_deviation < 0.05);
    }

    #[test]
    fn schedule_validation_catches_tampering() {
        let good = GluingSchedule {
            segments: vec![(PhasePoint::Euclid(vec![0.1]), 3)],
            gaps: vec![2],
            epsilon: None,
            gap_bound: 2,
            offsets: vec![0, 5],
            period: 5,
        };
        good.validate().unwrap();

        let mut bad = good.clone();
        bad.gaps[0] = 3;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.offsets[1] = 4;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.period = 6;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_doubling_glue_jobs_always_certify(
            starts in prop::collection::vec(0.0f64..1.0, 1..4),
            lens in prop::collection::vec(1usize..16, 1..4),
        ) {
            let (f, graph, classes) = doubling_setup();
            let k = starts.len().min(lens.len());
            let segments: Vec<(Vec<f64>, usize)> = (0..k)
                .map(|i| (vec![starts[i]], lens[i]))
                .collect();
            let (schedule, pseudo) =
                glue_periodic_pseudo_orbit(&f, &graph, &classes[0], &segments).unwrap();
            schedule.validate().unwrap();
            prop_assert!(pseudo.verify(&f).is_ok());
            let cert = shadow_glued_map_orbit(&f, &pseudo, &schedule).unwrap();
            prop_assert!(cert.guaranteed);
            prop_assert!(cert.max_deviation < cert.epsilon.unwrap());
        }
    }
}
