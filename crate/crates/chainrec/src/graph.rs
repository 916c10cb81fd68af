//! Directed-graph primitives shared by box transition graphs and symbol
//! graphs: strongly connected components, deterministic shortest paths,
//! and worst-case pairwise chain lengths.

use std::collections::HashSet;

/// Anything that exposes nodes `0..node_count` with sorted successor lists.
pub trait NodeGraph {
    fn node_count(&self) -> usize;
    fn successors(&self, node: usize) -> &[u32];

    fn has_edge(&self, from: usize, to: u32) -> bool {
        self.successors(from).binary_search(&to).is_ok()
    }
}

/// Plain adjacency-list graph; the concrete carrier for symbol graphs.
#[derive(Clone, Debug)]
pub struct AdjacencyGraph {
    adj: Vec<Vec<u32>>,
}

impl AdjacencyGraph {
    pub fn new(mut adj: Vec<Vec<u32>>) -> Self {
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        AdjacencyGraph { adj }
    }
}

impl NodeGraph for AdjacencyGraph {
    fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn successors(&self, node: usize) -> &[u32] {
        &self.adj[node]
    }
}

/// Tarjan's strongly connected components, iterative so deep graphs cannot
/// overflow the call stack. Components come back in discovery order; each
/// component's nodes are sorted ascending.
pub fn strongly_connected_components<G: NodeGraph>(graph: &G) -> Vec<Vec<u32>> {
    let n = graph.node_count();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0usize;
    let mut components: Vec<Vec<u32>> = Vec::new();

    // Explicit DFS frames: (node, next successor position).
    let mut frames: Vec<(u32, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root as u32, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root as u32);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            let v = v as usize;
            if *pos < graph.successors(v).len() {
                let w = graph.successors(v)[*pos] as usize;
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    frames.push((w as u32, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    let p = parent as usize;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    // Root of a component.
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w as usize] = false;
                        comp.push(w);
                        if w as usize == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
    }
    components
}

/// Shortest path from `from` to `to` by BFS, returned as the full node
/// sequence including both endpoints. Successors are explored in ascending
/// node order, so among equal-length paths the result is deterministic.
///
/// With `min_len_one` the empty path is not admitted: a query with
/// `from == to` must route through at least one edge (a self-loop or a
/// longer return cycle).
pub fn shortest_path<G: NodeGraph>(
    graph: &G,
    from: u32,
    to: u32,
    min_len_one: bool,
    restrict: Option<&HashSet<u32>>,
) -> Option<Vec<u32>> {
    let inside = |node: u32| restrict.map_or(true, |set| set.contains(&node));
    if !inside(from) || !inside(to) {
        return None;
    }
    if from == to && !min_len_one {
        return Some(vec![from]);
    }

    let n = graph.node_count();
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();

    // Seed with the successors of `from` so a from==to query finds a
    // genuine return cycle instead of the empty path.
    for &s in graph.successors(from as usize) {
        if inside(s) && !seen[s as usize] {
            seen[s as usize] = true;
            parent[s as usize] = from;
            if s == to {
                return Some(reconstruct(&parent, from, to));
            }
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in graph.successors(v as usize) {
            if inside(w) && !seen[w as usize] {
                seen[w as usize] = true;
                parent[w as usize] = v;
                if w == to {
                    return Some(reconstruct(&parent, from, to));
                }
                queue.push_back(w);
            }
        }
    }
    None
}

fn reconstruct(parent: &[u32], from: u32, to: u32) -> Vec<u32> {
    let mut path = vec![to];
    let mut cur = to;
    loop {
        let p = parent[cur as usize];
        path.push(p);
        if p == from && path.len() > 1 {
            break;
        }
        cur = p;
    }
    path.reverse();
    path
}

/// Max over ordered member pairs (i, j) of the shortest chain length from
/// i to j that stays inside `members`, where a pair with i == j counts the
/// shortest return cycle (so an isolated self-looped node scores 1).
/// Returns None if some pair is not connected inside the member set.
pub fn max_pairwise_chain_length<G: NodeGraph>(graph: &G, members: &[u64]) -> Option<usize> {
    let member_ids: Vec<u32> = members.iter().map(|&b| b as u32).collect();
    let inside: HashSet<u32> = member_ids.iter().copied().collect();
    let n = graph.node_count();
    let mut worst = 0usize;
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();

    for &src in &member_ids {
        for d in dist.iter_mut() {
            *d = u32::MAX;
        }
        queue.clear();
        // Distances measured with at least one edge: start from successors.
        for &s in graph.successors(src as usize) {
            if inside.contains(&s) && dist[s as usize] == u32::MAX {
                dist[s as usize] = 1;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let dv = dist[v as usize];
            for &w in graph.successors(v as usize) {
                if inside.contains(&w) && dist[w as usize] == u32::MAX {
                    dist[w as usize] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        for &dst in &member_ids {
            let d = dist[dst as usize];
            if d == u32::MAX {
                return None;
            }
            worst = worst.max(d as usize);
        }
    }
    Some(worst)
}
