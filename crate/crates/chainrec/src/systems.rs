//! The built-in systems: torus maps on [0,1)^d and one-sided subshifts of
//! finite type, together with phase points, orbits, and metrics.
//!
//! Continuous systems use the torus max-metric
//! `max_i min(|a_i - b_i|, 1 - |a_i - b_i|)`. Subshifts use
//! `d(x, y) = 2^{-j}` with `j` the first disagreeing index, evaluated on a
//! fixed window of symbols.

use crate::graph::AdjacencyGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Window length for representing one-sided sequences. 2^-64 sits far below
/// every tolerance used anywhere in the crate.
pub const DEFAULT_WINDOW: usize = 64;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("word is not admissible at position {0}")]
    InadmissibleWord(usize),
    #[error("no shadow: {0}")]
    NoShadow(String),
}

/// Wrap into [0, 1). `rem_euclid` can round up to exactly 1.0 for tiny
/// negative inputs, so clamp that case back to 0.
pub fn frac(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Torus max-metric on [0,1)^d.
pub fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        let d = d.min(1.0 - d);
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// A finite orbit segment stored flat, row-major, `len * dim` coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    dim: usize,
    data: Vec<f64>,
}

impl Orbit {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        Orbit { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug)]
enum MapKind {
    Identity,
    Doubling,
    Tent,
    NorthSouth { param: f64 },
    TorusCat,
}

/// A continuous map of the torus [0,1)^d.
#[derive(Clone, Debug)]
pub struct MapSystem {
    name: String,
    dim: usize,
    kind: MapKind,
    lipschitz: f64,
}

pub const NORTH_SOUTH_PARAM: f64 = 0.1;

impl MapSystem {
    pub fn identity(dim: usize) -> Self {
        MapSystem {
            name: format!("identity_{dim}d"),
            dim,
            kind: MapKind::Identity,
            lipschitz: 1.0,
        }
    }

    /// x -> 2x mod 1.
    pub fn doubling() -> Self {
        MapSystem {
            name: "doubling".into(),
            dim: 1,
            kind: MapKind::Doubling,
            lipschitz: 2.0,
        }
    }

    /// x -> 1 - |1 - 2x|, folded back to [0,1). Descends to the circle
    /// since tent(x) = tent(1-x).
    pub fn tent() -> Self {
        MapSystem {
            name: "tent".into(),
            dim: 1,
            kind: MapKind::Tent,
            lipschitz: 2.0,
        }
    }

    /// Circle map x -> x - r sin(2 pi x): attracting fixed point at 0,
    /// repelling fixed point at 1/2. The reference instance uses r = 0.1.
    pub fn north_south() -> Self {
        Self::north_south_with(NORTH_SOUTH_PARAM)
    }

    pub fn north_south_with(param: f64) -> Self {
        assert!(
            param > 0.0 && param <= 0.15,
            "north-south parameter must lie in (0, 0.15]"
        );
        MapSystem {
            name: "north_south".into(),
            dim: 1,
            kind: MapKind::NorthSouth { param },
            lipschitz: 1.0 + 2.0 * std::f64::consts::PI * param,
        }
    }

    /// Hyperbolic 2-torus map (x, y) -> (x + y, x + 2y) mod 1.
    pub fn torus_cat() -> Self {
        MapSystem {
            name: "torus_cat".into(),
            dim: 2,
            kind: MapKind::TorusCat,
            lipschitz: 3.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// A global Lipschitz constant with respect to the torus max-metric.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    /// Expansion constant for maps with full expanding inverse branches.
    pub fn expansion_factor(&self) -> Option<f64> {
        match self.kind {
            MapKind::Doubling | MapKind::Tent => Some(2.0),
            _ => None,
        }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            MapKind::Identity => out.copy_from_slice(x),
            MapKind::Doubling => out[0] = frac(2.0 * x[0]),
            MapKind::Tent => out[0] = frac(1.0 - (1.0 - 2.0 * x[0]).abs()),
            MapKind::NorthSouth { param } => {
                out[0] = frac(x[0] - param * (2.0 * std::f64::consts::PI * x[0]).sin())
            }
            MapKind::TorusCat => {
                let (a, b) = (x[0], x[1]);
                out[0] = frac(a + b);
                out[1] = frac(a + 2.0 * b);
            }
        }
    }

    pub fn image(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn iterate(&self, x: &[f64], t: usize) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = vec![0.0; self.dim];
        for _ in 0..t {
            self.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// The segment [x0, f(x0), ..., f^{n-1}(x0)].
    pub fn orbit_segment(&self, x0: &[f64], n: usize) -> Result<Orbit, SystemError> {
        if n == 0 {
            return Err(SystemError::InvalidArgument(
                "orbit segment length must be positive".into(),
            ));
        }
        if x0.len() != self.dim {
            return Err(SystemError::InvalidArgument(format!(
                "point dimension {} does not match system dimension {}",
                x0.len(),
                self.dim
            )));
        }
        let mut data = Vec::with_capacity(n * self.dim);
        data.extend_from_slice(x0);
        let mut cur = x0.to_vec();
        let mut next = vec![0.0; self.dim];
        for _ in 1..n {
            self.apply_into(&cur, &mut next);
            data.extend_from_slice(&next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(Orbit::from_flat(self.dim, data))
    }

    pub fn metric(&self, a: &[f64], b: &[f64]) -> f64 {
        torus_dist(a, b)
    }

    /// Orbit of a Lebesgue-random initial point, sampled exactly.
    ///
    /// Plain f64 iteration is exact arithmetic for the doubling and tent
    /// maps, and every f64 is a dyadic rational, so such orbits reach a
    /// fixed point within ~54 steps; a typical point consumes one fresh
    /// mantissa bit per step instead. Here the doubling map slides a
    /// 64-bit window along a seeded bit stream, the tent map does the
    /// same while tracking its fold parity, and the torus automorphism
    /// walks an exact 2^-64 lattice (the map permutes that lattice). The
    /// remaining maps are non-expanding, where float iteration is fine.
    pub fn typical_orbit<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Orbit, SystemError> {
        if n == 0 {
            return Err(SystemError::InvalidArgument(
                "orbit segment length must be positive".into(),
            ));
        }
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let as_unit = |w: u64| (w >> 11) as f64 * SCALE;
        match self.kind {
            MapKind::Doubling => {
                let mut w: u64 = rng.gen();
                let mut bits = BitStream::default();
                let mut data = Vec::with_capacity(n);
                for _ in 0..n {
                    data.push(as_unit(w));
                    w = (w << 1) | bits.next(rng);
                }
                Ok(Orbit::from_flat(1, data))
            }
            MapKind::Tent => {
                let mut w: u64 = rng.gen();
                let mut folded = false;
                let mut bits = BitStream::default();
                let mut data = Vec::with_capacity(n);
                for _ in 0..n {
                    let cur = if folded { !w } else { w };
                    data.push(as_unit(cur));
                    folded ^= cur >> 63 == 1;
                    w = (w << 1) | bits.next(rng);
                }
                Ok(Orbit::from_flat(1, data))
            }
            MapKind::TorusCat => {
                let mut a: u64 = rng.gen();
                let mut b: u64 = rng.gen();
                let mut data = Vec::with_capacity(2 * n);
                for _ in 0..n {
                    data.push(as_unit(a));
                    data.push(as_unit(b));
                    let na = a.wrapping_add(b);
                    b = na.wrapping_add(b);
                    a = na;
                }
                Ok(Orbit::from_flat(2, data))
            }
            MapKind::Identity | MapKind::NorthSouth { .. } => {
                let x0: Vec<f64> = (0..self.dim).map(|_| rng.gen()).collect();
                self.orbit_segment(&x0, n)
            }
        }
    }

    /// All inverse-branch preimages of `y`, for expanding 1-d maps.
    pub(crate) fn branch_preimages(&self, y: f64) -> Option<[f64; 2]> {
        match self.kind {
            MapKind::Doubling => Some([y / 2.0, frac(y / 2.0 + 0.5)]),
            MapKind::Tent => Some([y / 2.0, frac(1.0 - y / 2.0)]),
            _ => None,
        }
    }
}

/// Pulls single bits out of 64-bit RNG draws.
#[derive(Default)]
struct BitStream {
    buf: u64,
    left: u32,
}

impl BitStream {
    fn next<R: Rng>(&mut self, rng: &mut R) -> u64 {
        if self.left == 0 {
            self.buf = rng.gen();
            self.left = 64;
        }
        let bit = self.buf >> 63;
        self.buf <<= 1;
        self.left -= 1;
        bit
    }
}

/// One-sided word over a finite alphabet, either finite (a window) or
/// eventually periodic (symbols up to `cycle_from`, then the tail of
/// `symbols` repeating forever).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<u8>,
    cycle_from: Option<usize>,
}

impl Word {
    pub fn finite(symbols: Vec<u8>) -> Self {
        assert!(!symbols.is_empty(), "empty word");
        Word {
            symbols,
            cycle_from: None,
        }
    }

    pub fn periodic(cycle: Vec<u8>) -> Self {
        assert!(!cycle.is_empty(), "empty cycle");
        Word {
            symbols: cycle,
            cycle_from: Some(0),
        }
    }

    pub fn eventually_periodic(mut prefix: Vec<u8>, cycle: Vec<u8>) -> Self {
        assert!(!cycle.is_empty(), "empty cycle");
        let cycle_from = prefix.len();
        prefix.extend_from_slice(&cycle);
        Word {
            symbols: prefix,
            cycle_from: Some(cycle_from),
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.cycle_from.is_some()
    }

    /// Number of directly stored symbols (infinite continuations cycle).
    pub fn stored_len(&self) -> usize {
        self.symbols.len()
    }

    /// Symbols available for exact comparison: unbounded when periodic.
    pub fn available_len(&self) -> usize {
        if self.cycle_from.is_some() {
            usize::MAX
        } else {
            self.symbols.len()
        }
    }

    pub fn symbol_at(&self, i: usize) -> Option<u8> {
        if i < self.symbols.len() {
            return Some(self.symbols[i]);
        }
        let start = self.cycle_from?;
        let cycle_len = self.symbols.len() - start;
        Some(self.symbols[start + (i - start) % cycle_len])
    }

    /// Drop the first `t` symbols.
    pub fn shift(&self, t: usize) -> Word {
        match self.cycle_from {
            None => {
                assert!(
                    t < self.symbols.len(),
                    "shift past the end of a finite word"
                );
                Word::finite(self.symbols[t..].to_vec())
            }
            Some(start) => {
                if t <= start {
                    Word {
                        symbols: self.symbols[t..].to_vec(),
                        cycle_from: Some(start - t),
                    }
                } else {
                    let cycle = &self.symbols[start..];
                    let off = (t - start) % cycle.len();
                    let mut rotated = cycle[off..].to_vec();
                    rotated.extend_from_slice(&cycle[..off]);
                    Word::periodic(rotated)
                }
            }
        }
    }

    /// Materialize the first `len` symbols, zero-padding past the end of a
    /// finite word.
    pub fn window(&self, len: usize) -> Vec<u8> {
        (0..len).map(|i| self.symbol_at(i).unwrap_or(0)).collect()
    }
}

/// A one-sided subshift of finite type on `alphabet` symbols, with the
/// 0/1 transition matrix `adjacency` (rows index the current symbol).
#[derive(Clone, Debug)]
pub struct SymbolicSystem {
    name: String,
    alphabet: usize,
    adjacency: Vec<Vec<u8>>,
    window: usize,
}

impl SymbolicSystem {
    pub fn new(name: &str, adjacency: Vec<Vec<u8>>, window: usize) -> Result<Self, SystemError> {
        let k = adjacency.len();
        if k == 0 || k > 255 {
            return Err(SystemError::InvalidArgument(
                "alphabet size must be in 1..=255".into(),
            ));
        }
        if window < 2 {
            return Err(SystemError::InvalidArgument("window must be >= 2".into()));
        }
        for row in &adjacency {
            if row.len() != k {
                return Err(SystemError::InvalidArgument(
                    "adjacency matrix must be square".into(),
                ));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(SystemError::InvalidArgument(
                    "adjacency entries must be 0 or 1".into(),
                ));
            }
        }
        for i in 0..k {
            if adjacency[i].iter().all(|&v| v == 0) {
                return Err(SystemError::InvalidArgument(format!(
                    "symbol {i} has no successor; every symbol must be extendable"
                )));
            }
            if (0..k).all(|j| adjacency[j][i] == 0) {
                return Err(SystemError::InvalidArgument(format!(
                    "symbol {i} has no predecessor; every symbol must be reachable"
                )));
            }
        }
        Ok(SymbolicSystem {
            name: name.into(),
            alphabet: k,
            adjacency,
            window,
        })
    }

    pub fn full_shift(k: usize) -> Self {
        Self::new(
            &format!("full_{k}_shift"),
            vec![vec![1; k]; k],
            DEFAULT_WINDOW,
        )
        .expect("full shift is always valid")
    }

    /// Binary shift forbidding the factor 11.
    pub fn golden_mean() -> Self {
        Self::new(
            "golden_mean",
            vec![vec![1, 1], vec![1, 0]],
            DEFAULT_WINDOW,
        )
        .expect("golden mean shift is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn is_allowed(&self, a: u8, b: u8) -> bool {
        self.adjacency[a as usize][b as usize] == 1
    }

    /// Index of the first inadmissible transition, if any, scanning every
    /// stored consecutive pair (plus the wrap pair of a periodic word).
    pub fn admissibility_defect(&self, w: &Word) -> Option<usize> {
        let n = w.stored_len();
        for i in 0..n.saturating_sub(1) {
            let a = w.symbol_at(i).unwrap();
            let b = w.symbol_at(i + 1).unwrap();
            if a as usize >= self.alphabet || b as usize >= self.alphabet || !self.is_allowed(a, b)
            {
                return Some(i);
            }
        }
        if w.is_periodic() {
            let a = w.symbol_at(n - 1).unwrap();
            let b = w.symbol_at(n).unwrap();
            if !self.is_allowed(a, b) {
                return Some(n - 1);
            }
        } else if n == 1 && w.symbol_at(0).unwrap() as usize >= self.alphabet {
            return Some(0);
        }
        None
    }

    pub fn is_admissible(&self, w: &Word) -> bool {
        self.admissibility_defect(w).is_none()
    }

    /// d(x, y) = 2^{-j}, j the first disagreeing index, compared over the
    /// window (or the shorter available length).
    pub fn metric(&self, x: &Word, y: &Word) -> f64 {
        let limit = self
            .window
            .min(x.available_len())
            .min(y.available_len());
        for j in 0..limit {
            if x.symbol_at(j) != y.symbol_at(j) {
                return 0.5f64.powi(j as i32);
            }
        }
        0.5f64.powi(limit as i32)
    }

    /// Symbol-level transition graph: node per symbol, edge a -> b exactly
    /// when the factor ab is allowed.
    pub fn symbol_graph(&self) -> AdjacencyGraph {
        let adj = (0..self.alphabet)
            .map(|i| {
                (0..self.alphabet)
                    .filter(|&j| self.adjacency[i][j] == 1)
                    .map(|j| j as u32)
                    .collect()
            })
            .collect();
        AdjacencyGraph::new(adj)
    }

    /// Digit base of the coordinate chart below.
    pub fn embedding_base(&self) -> f64 {
        ((2 * self.alphabet).saturating_sub(1)).max(2) as f64
    }

    /// Injective chart into [0,1): symbols become digits in base 2k-1, so
    /// distinct words stay separated and m-symbol agreement implies the
    /// embedded points sit within 2^-m of each other.
    pub fn embed(&self, w: &Word) -> f64 {
        let b = self.embedding_base();
        let mut x = 0.0f64;
        for i in (0..self.window).rev() {
            let s = w.symbol_at(i).unwrap_or(0) as f64;
            x = (x + s) / b;
        }
        x
    }

    /// Leading digit of an embedded point: inverse of the chart's first
    /// coordinate, exact because digits never carry.
    pub fn leading_symbol_of_embedded(&self, x: f64) -> u8 {
        let s = (x * self.embedding_base()).floor();
        (s.max(0.0) as usize).min(self.alphabet - 1) as u8
    }

    /// Uniform admissible word: uniform start symbol, then uniform choice
    /// among allowed successors.
    pub fn random_word<R: Rng>(&self, len: usize, rng: &mut R) -> Word {
        assert!(len > 0);
        let mut symbols = Vec::with_capacity(len);
        symbols.push(rng.gen_range(0..self.alphabet) as u8);
        for _ in 1..len {
            let cur = *symbols.last().unwrap() as usize;
            let allowed: Vec<u8> = (0..self.alphabet)
                .filter(|&j| self.adjacency[cur][j] == 1)
                .map(|j| j as u8)
                .collect();
            symbols.push(allowed[rng.gen_range(0..allowed.len())]);
        }
        Word::finite(symbols)
    }

    /// Shadow a pseudo-orbit of words. For `delta = 2^-m` the entries must
    /// satisfy `shift(w_t)` agreeing with `w_{t+1}` on the first m-1
    /// symbols; the returned word's orbit then stays within 2^-(m-1) of
    /// the pseudo-orbit, and is periodic of period dividing the list
    /// length when `periodic` is set.
    pub fn sft_shadow(
        &self,
        pseudo_orbit: &[Word],
        delta: f64,
        periodic: bool,
    ) -> Result<Word, SystemError> {
        if pseudo_orbit.is_empty() {
            return Err(SystemError::InvalidArgument("empty pseudo-orbit".into()));
        }
        let m = delta_exponent(delta)?;
        for (t, w) in pseudo_orbit.iter().enumerate() {
            if let Some(pos) = self.admissibility_defect(w) {
                return Err(SystemError::InvalidArgument(format!(
                    "pseudo-orbit entry {t} is inadmissible at position {pos}"
                )));
            }
        }
        let t_len = pseudo_orbit.len();
        let overlap = m - 1;
        for t in 0..t_len {
            if !periodic && t + 1 == t_len {
                break;
            }
            let w = &pseudo_orbit[t];
            let next = &pseudo_orbit[(t + 1) % t_len];
            for i in 0..overlap {
                let a = w.symbol_at(i + 1);
                let b = next.symbol_at(i);
                if a.is_none() || b.is_none() || a != b {
                    return Err(SystemError::NoShadow(format!(
                        "entries {t} and {} do not overlap to depth {overlap}",
                        (t + 1) % t_len
                    )));
                }
            }
        }

        // First-symbol track: overlap pushes each w_t's leading symbols
        // onto later entries, so the track follows every entry to the
        // claimed depth.
        let mut track: Vec<u8> = pseudo_orbit
            .iter()
            .map(|w| w.symbol_at(0).expect("nonempty word"))
            .collect();
        let shadow = if periodic {
            Word::periodic(track)
        } else {
            let last = &pseudo_orbit[t_len - 1];
            let avail = last.available_len().min(self.window);
            for i in 1..avail {
                track.push(last.symbol_at(i).unwrap());
            }
            Word::finite(track)
        };
        if let Some(pos) = self.admissibility_defect(&shadow) {
            return Err(SystemError::NoShadow(format!(
                "first-symbol track breaks admissibility at position {pos}"
            )));
        }
        Ok(shadow)
    }
}

/// Checks delta = 2^-m for an integer m >= 1 and returns m.
pub(crate) fn delta_exponent(delta: f64) -> Result<usize, SystemError> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(SystemError::InvalidArgument(format!(
            "delta must be 2^-m with m >= 1, got {delta}"
        )));
    }
    let m = (-delta.log2()).round() as i32;
    if m < 1 || 0.5f64.powi(m) != delta {
        return Err(SystemError::InvalidArgument(format!(
            "delta must be an exact power of two, got {delta}"
        )));
    }
    Ok(m as usize)
}

/// A phase-space point of either kind of system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhasePoint {
    Euclid(Vec<f64>),
    Word(Word),
}

impl PhasePoint {
    pub fn as_euclid(&self) -> Option<&[f64]> {
        match self {
            PhasePoint::Euclid(p) => Some(p),
            PhasePoint::Word(_) => None,
        }
    }

    pub fn as_word(&self) -> Option<&Word> {
        match self {
            PhasePoint::Word(w) => Some(w),
            PhasePoint::Euclid(_) => None,
        }
    }
}

/// Owned system of either kind, the unit the scenario layer works with.
#[derive(Clone, Debug)]
pub enum System {
    Map(MapSystem),
    Sft(SymbolicSystem),
}

impl System {
    pub fn name(&self) -> &str {
        match self {
            System::Map(m) => m.name(),
            System::Sft(s) => s.name(),
        }
    }

    pub fn as_ref(&self) -> SystemRef<'_> {
        match self {
            System::Map(m) => SystemRef::Map(m),
            System::Sft(s) => SystemRef::Sft(s),
        }
    }
}

/// Borrowed view used by operations that accept both kinds.
#[derive(Clone, Copy, Debug)]
pub enum SystemRef<'a> {
    Map(&'a MapSystem),
    Sft(&'a SymbolicSystem),
}
