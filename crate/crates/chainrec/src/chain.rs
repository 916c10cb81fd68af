//! Chain recurrence via box discretization: a dyadic grid on the torus,
//! a sampled transition graph over boxes, and chain recurrent classes as
//! the cycle-containing strongly connected components.
//!
//! Edge rule: B -> B' when some sample x in B has
//! `d(f(x), center(B')) < delta + half_diameter(B')`, strictly. Any path
//! in the graph realizes a pseudo-orbit with jumps below the effective
//! certificate `delta + 2 * box_diameter`.

use crate::graph::{strongly_connected_components, AdjacencyGraph, NodeGraph};
use crate::rng::{stream, StreamDomain};
use crate::systems::{torus_dist, MapSystem, Orbit};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

pub const DEFAULT_BOX_BUDGET: usize = 1 << 20;
pub const DEFAULT_SAMPLES_PER_BOX: usize = 32;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no chain connects the requested boxes")]
    NoPath,
    #[error("step {step} jumps {achieved}, certificate requires < {bound}")]
    CertificateFailed {
        step: usize,
        achieved: f64,
        bound: f64,
    },
}

/// Dyadic grid of half-open boxes on [0,1)^dim, 2^depth cells per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxGrid {
    dim: usize,
    depth: u32,
    per_axis: usize,
}

impl BoxGrid {
    pub fn new(dim: usize, depth: u32) -> Result<Self, ChainError> {
        Self::with_budget(dim, depth, DEFAULT_BOX_BUDGET)
    }

    pub fn with_budget(dim: usize, depth: u32, budget: usize) -> Result<Self, ChainError> {
        if dim == 0 {
            return Err(ChainError::InvalidArgument("dimension must be >= 1".into()));
        }
        if depth == 0 || depth > 30 {
            return Err(ChainError::InvalidArgument(format!(
                "depth {depth} out of range 1..=30"
            )));
        }
        let per_axis = 1usize << depth;
        let total = per_axis
            .checked_pow(dim as u32)
            .ok_or_else(|| ChainError::ResourceLimit("box count overflows".into()))?;
        if total > budget {
            return Err(ChainError::ResourceLimit(format!(
                "grid needs {total} boxes, budget is {budget}"
            )));
        }
        Ok(BoxGrid {
            dim,
            depth,
            per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn box_count(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    /// Side length, which is also the max-metric diameter of a box.
    pub fn width(&self) -> f64 {
        1.0 / self.per_axis as f64
    }

    fn axis_cell(&self, coord: f64) -> usize {
        let c = (crate::systems::frac(coord) * self.per_axis as f64) as usize;
        c.min(self.per_axis - 1)
    }

    pub fn index_of(&self, point: &[f64]) -> usize {
        debug_assert_eq!(point.len(), self.dim);
        let mut idx = 0usize;
        for &coord in point {
            idx = idx * self.per_axis + self.axis_cell(coord);
        }
        idx
    }

    pub fn cell_coords(&self, mut index: usize) -> Vec<usize> {
        let mut cells = vec![0usize; self.dim];
        for axis in (0..self.dim).rev() {
            cells[axis] = index % self.per_axis;
            index /= self.per_axis;
        }
        cells
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        let w = self.width();
        self.cell_coords(index)
            .into_iter()
            .map(|c| (c as f64 + 0.5) * w)
            .collect()
    }

    pub fn low_corner(&self, index: usize) -> Vec<f64> {
        let w = self.width();
        self.cell_coords(index)
            .into_iter()
            .map(|c| c as f64 * w)
            .collect()
    }

    /// All 2^dim corners of the closed box.
    pub fn corners(&self, index: usize) -> Vec<Vec<f64>> {
        let low = self.low_corner(index);
        let w = self.width();
        (0..1usize << self.dim)
            .map(|mask| {
                low.iter()
                    .enumerate()
                    .map(|(axis, &l)| l + ((mask >> axis) & 1) as f64 * w)
                    .collect()
            })
            .collect()
    }
}

/// Sampled box-to-box transition graph for a fixed map and jump size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionGraph {
    grid: BoxGrid,
    delta: f64,
    samples_per_box: usize,
    seed: u64,
    adjacency: Vec<Vec<u32>>,
}

impl NodeGraph for TransitionGraph {
    fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    fn successors(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }
}

impl TransitionGraph {
    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn samples_per_box(&self) -> usize {
        self.samples_per_box
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Jump bound that any realized chain through this graph satisfies.
    pub fn certificate_delta(&self) -> f64 {
        self.delta + 2.0 * self.grid.width()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|l| l.len()).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(b, list)| list.iter().map(move |&t| (b as u32, t)))
    }
}

pub fn build_transition_graph(
    system: &MapSystem,
    grid: BoxGrid,
    delta: f64,
    samples_per_box: usize,
    seed: u64,
) -> Result<TransitionGraph, ChainError> {
    if system.dimension() != grid.dim() {
        return Err(ChainError::InvalidArgument(format!(
            "system dimension {} vs grid dimension {}",
            system.dimension(),
            grid.dim()
        )));
    }
    if !(delta > 0.0) {
        return Err(ChainError::InvalidArgument("delta must be > 0".into()));
    }
    let n = grid.box_count();
    let adjacency: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, StreamDomain::GraphSampling, b as u64);
            // samples_per_box is a total budget: corners and center first,
            // the remainder seeded uniform.
            let mut samples = grid.corners(b);
            samples.push(grid.center(b));
            let uniform = samples_per_box.saturating_sub(samples.len());
            let low = grid.low_corner(b);
            let w = grid.width();
            for _ in 0..uniform {
                samples.push(
                    low.iter()
                        .map(|&l| l + rng.gen::<f64>() * w)
                        .collect::<Vec<f64>>(),
                );
            }
            let mut succ: Vec<u32> = Vec::new();
            let mut image = vec![0.0; grid.dim()];
            for x in &samples {
                system.apply_into(x, &mut image);
                push_targets(&grid, &image, delta, &mut succ);
            }
            succ.sort_unstable();
            succ.dedup();
            succ
        })
        .collect();
    Ok(TransitionGraph {
        grid,
        delta,
        samples_per_box,
        seed,
        adjacency,
    })
}

/// All boxes whose center lies strictly within `delta + width/2` of `y`
/// in the torus max metric, scanned through per-axis candidate windows.
fn push_targets(grid: &BoxGrid, y: &[f64], delta: f64, out: &mut Vec<u32>) {
    let w = grid.width();
    let per_axis = grid.per_axis as i64;
    let r = delta + 0.5 * w;
    let mut axis_cells: Vec<Vec<usize>> = Vec::with_capacity(grid.dim());
    for &yi in y {
        let yi = crate::systems::frac(yi);
        let mut cells = Vec::new();
        let span = (r / w).ceil() as i64 + 1;
        if 2 * span + 1 >= per_axis {
            cells.extend(0..grid.per_axis);
        } else {
            let base = (yi / w).floor() as i64;
            for k in base - span..=base + span {
                cells.push(k.rem_euclid(per_axis) as usize);
            }
        }
        // Exact strict per-axis test; windows above are only a pre-filter.
        cells.retain(|&c| {
            let d = (yi - (c as f64 + 0.5) * w).abs();
            d.min(1.0 - d) < r
        });
        cells.sort_unstable();
        cells.dedup();
        axis_cells.push(cells);
    }
    if axis_cells.iter().any(|c| c.is_empty()) {
        return;
    }
    let mut odo = vec![0usize; grid.dim()];
    loop {
        let mut idx = 0usize;
        for (axis, &pos) in odo.iter().enumerate() {
            idx = idx * grid.per_axis + axis_cells[axis][pos];
        }
        out.push(idx as u32);
        let mut axis = grid.dim();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            odo[axis] += 1;
            if odo[axis] < axis_cells[axis].len() {
                break;
            }
            odo[axis] = 0;
        }
    }
}

/// A chain recurrent class: the boxes of one cycle-containing strongly
/// connected component of the transition graph. Single-box classes are
/// marked trivial: their only cycle is a sampling self-loop, the usual
/// discretization residue next to a slow fixed point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainClass {
    pub id: usize,
    pub boxes: Vec<u32>,
    pub is_trivial: bool,
}

impl ChainClass {
    pub fn contains(&self, b: u32) -> bool {
        self.boxes.binary_search(&b).is_ok()
    }
}

/// Cycle-containing strongly connected components, ordered by smallest
/// member box and numbered in that order.
pub fn chain_recurrent_classes<G: NodeGraph>(graph: &G) -> Vec<ChainClass> {
    let mut classes: Vec<Vec<u32>> = strongly_connected_components(graph)
        .into_iter()
        .filter(|comp| comp.len() > 1 || graph.has_edge(comp[0] as usize, comp[0]))
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
        .into_iter()
        .enumerate()
        .map(|(id, boxes)| ChainClass {
            id,
            is_trivial: boxes.len() == 1,
            boxes,
        })
        .collect()
}

/// The classes that survive at this resolution as more than one box.
pub fn nontrivial_classes(classes: &[ChainClass]) -> Vec<&ChainClass> {
    classes.iter().filter(|c| !c.is_trivial).collect()
}

/// Finite or cyclic sequence of points with every step within `delta`:
/// `d(f(p_i), p_{i+1}) < delta`, wrapping around when periodic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoOrbit {
    pub points: Orbit,
    pub delta: f64,
    pub periodic: bool,
}

impl PseudoOrbit {
    fn step_targets(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.points.len();
        let steps = if self.periodic { n } else { n.saturating_sub(1) };
        (0..steps).map(move |i| (i, (i + 1) % n))
    }

    pub fn max_step_defect(&self, system: &MapSystem) -> Option<f64> {
        let mut image = vec![0.0; self.points.dim()];
        self.step_targets()
            .map(|(i, j)| {
                system.apply_into(self.points.point(i), &mut image);
                torus_dist(&image, self.points.point(j))
            })
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.max(d))))
    }

    pub fn verify(&self, system: &MapSystem) -> Result<(), ChainError> {
        if self.points.is_empty() {
            return Err(ChainError::InvalidArgument("empty pseudo-orbit".into()));
        }
        if system.dimension() != self.points.dim() {
            return Err(ChainError::InvalidArgument(
                "pseudo-orbit dimension does not match the system".into(),
            ));
        }
        let mut image = vec![0.0; self.points.dim()];
        for (i, j) in self.step_targets() {
            system.apply_into(self.points.point(i), &mut image);
            let d = torus_dist(&image, self.points.point(j));
            if !(d < self.delta) {
                return Err(ChainError::CertificateFailed {
                    step: i,
                    achieved: d,
                    bound: self.delta,
                });
            }
        }
        Ok(())
    }
}

/// Realize a verified pseudo-orbit from `from` to `to`: the first step
/// lands in the box holding f(from), interior steps walk box centers
/// along a shortest graph path, and the final step is chosen by direct
/// evaluation against `to`. The certificate is
/// `graph.certificate_delta()`; a `from == to` query yields a genuine
/// return chain (at least one application of the map).
pub fn find_delta_chain(
    system: &MapSystem,
    graph: &TransitionGraph,
    from: &[f64],
    to: &[f64],
) -> Result<PseudoOrbit, ChainError> {
    let grid = graph.grid();
    if from.len() != grid.dim() || to.len() != grid.dim() {
        return Err(ChainError::InvalidArgument(
            "endpoint dimension does not match the grid".into(),
        ));
    }
    let tol = graph.certificate_delta();
    let mut image = vec![0.0; grid.dim()];
    system.apply_into(from, &mut image);

    let mut flat: Vec<f64> = Vec::new();
    flat.extend_from_slice(from);
    if torus_dist(&image, to) >= tol {
        let start = grid.index_of(&image) as u32;
        let path = center_path(system, graph, start, to, tol).ok_or(ChainError::NoPath)?;
        for &b in &path {
            flat.extend(grid.center(b as usize));
        }
    }
    flat.extend_from_slice(to);
    let chain = PseudoOrbit {
        points: Orbit::from_flat(grid.dim(), flat),
        delta: tol,
        periodic: false,
    };
    chain.verify(system)?;
    Ok(chain)
}

/// Shortest box path from `start` to any box whose center maps within
/// `tol` of `target`, both ends included. Breadth-first with ascending
/// successor order, so ties break toward smaller box indices. Keeping the
/// first hop anchored at the box of f(from) and checking the last hop by
/// evaluation is what keeps every realized step inside the certificate
/// even when an edge was certified by a far corner sample.
fn center_path(
    system: &MapSystem,
    graph: &TransitionGraph,
    start: u32,
    target: &[f64],
    tol: f64,
) -> Option<Vec<u32>> {
    let grid = graph.grid();
    let mut image = vec![0.0; grid.dim()];
    let lands = |b: u32, image: &mut Vec<f64>| {
        system.apply_into(&grid.center(b as usize), image);
        torus_dist(image, target) < tol
    };
    let n = graph.node_count();
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[start as usize] = true;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        if lands(v, &mut image) {
            let mut path = vec![v];
            let mut cur = v;
            while cur != start {
                cur = parent[cur as usize];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in graph.successors(v as usize) {
            if !seen[w as usize] {
                seen[w as usize] = true;
                parent[w as usize] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

/// Boxes visited by the orbit tail: iterate `transient` steps, then record
/// the box of each of the next `window` points.
pub fn omega_limit_boxes(
    system: &MapSystem,
    grid: &BoxGrid,
    x0: &[f64],
    transient: usize,
    window: usize,
) -> Result<Vec<u32>, ChainError> {
    if system.dimension() != grid.dim() || x0.len() != grid.dim() {
        return Err(ChainError::InvalidArgument("dimension mismatch".into()));
    }
    if window == 0 {
        return Err(ChainError::InvalidArgument("window must be >= 1".into()));
    }
    let mut x = system.iterate(x0, transient);
    let mut boxes: Vec<u32> = Vec::with_capacity(window);
    let mut next = vec![0.0; grid.dim()];
    for _ in 0..window {
        boxes.push(grid.index_of(&x) as u32);
        system.apply_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    boxes.sort_unstable();
    boxes.dedup();
    Ok(boxes)
}

/// Whether the restriction of the graph to `boxes` is strongly connected
/// and carries a cycle (a single box needs its self-loop).
pub fn is_internally_chain_transitive<G: NodeGraph>(graph: &G, boxes: &[u32]) -> bool {
    let mut members: Vec<u32> = boxes.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.is_empty() {
        return false;
    }
    if members.len() == 1 {
        return graph.has_edge(members[0] as usize, members[0]);
    }
    let inside: HashSet<u32> = members.iter().copied().collect();
    let local: std::collections::HashMap<u32, u32> = members
        .iter()
        .enumerate()
        .map(|(i, &b)| (b, i as u32))
        .collect();
    let adj: Vec<Vec<u32>> = members
        .iter()
        .map(|&b| {
            graph
                .successors(b as usize)
                .iter()
                .filter(|s| inside.contains(s))
                .map(|s| local[s])
                .collect()
        })
        .collect();
    let sccs = strongly_connected_components(&AdjacencyGraph::new(adj));
    sccs.len() == 1 && sccs[0].len() == members.len()
}
