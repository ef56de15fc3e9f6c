//! Progressive edge growth for the irregular turbo factor graph.
//!
//! The graph has three node kinds: information bits, trellis transitions and
//! trellis states. Transition `t_j` sits between states `s_j` and `s_{j+1}`
//! (0-based), and every bit of degree `d` is attached to `d` transitions. With
//! one information bit per trellis step each transition hosts exactly one bit
//! copy, and the attachment defines the interleaver.

use std::collections::VecDeque;

use serde::Serialize;

use crate::density::DegreeProfile;
use crate::erasure::PuncturePattern;
use crate::error::{Error, Result};

/// `4 (floor(log((N-1) k / (k+2) + 1) / log(k+1)) + 1)`.
pub fn girth_upper_bound(n: usize, k: usize) -> Result<usize> {
    if n < 2 || k < 1 {
        return Err(Error::InvalidParameter(format!("girth bound needs N >= 2 and k >= 1, got N={n}, k={k}")));
    }
    let (n, k) = (n as f64, k as f64);
    let arg = (n - 1.0) * k / (k + 2.0) + 1.0;
    Ok(4 * (floor_log(arg, k + 1.0) + 1))
}

/// `2 (floor(log(N (k+2)(1 - 1/d_max) - N + 1) / log((d_max-1)(k+1))) + 1)`,
/// or 4 when the argument of the logarithm is not positive.
pub fn girth_lower_bound(n: usize, k: usize, max_degree: usize) -> Result<usize> {
    if n < 1 || k < 1 || max_degree < 2 {
        return Err(Error::InvalidParameter(format!(
            "girth bound needs N >= 1, k >= 1, d_max >= 2, got N={n}, k={k}, d_max={max_degree}"
        )));
    }
    let (n, k, dm) = (n as f64, k as f64, max_degree as f64);
    let arg = n * (k + 2.0) * (1.0 - 1.0 / dm) - n + 1.0;
    let base = (dm - 1.0) * (k + 1.0);
    if arg <= 0.0 || base <= 1.0 {
        return Ok(4);
    }
    Ok(2 * (floor_log(arg, base) + 1))
}

/// `floor(log(x) / log(base))`, nudged so exact powers are not lost to rounding.
fn floor_log(x: f64, base: f64) -> usize {
    let r = x.ln() / base.ln();
    (r + 1e-12).floor().max(0.0) as usize
}

/// Bits, transitions and the state chain of an irregular turbo code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorGraph {
    target_degrees: Vec<usize>,
    bit_adj: Vec<Vec<usize>>,
    hosted: Vec<Vec<usize>>,
    punctured: Vec<bool>,
    capacity: usize,
    log: Vec<(usize, usize)>,
    prepass_edges: usize,
}

impl FactorGraph {
    fn empty(target_degrees: Vec<usize>, transitions: usize, capacity: usize, punctured: Vec<bool>) -> Self {
        Self {
            bit_adj: vec![Vec::new(); target_degrees.len()],
            target_degrees,
            hosted: vec![Vec::new(); transitions],
            punctured,
            capacity,
            log: Vec::new(),
            prepass_edges: 0,
        }
    }

    /// Graph with explicit bit-transition edges, inserted in the given order.
    /// Each bit's degree is the number of its edges.
    pub fn from_edges(bits: usize, transitions: usize, capacity: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut degrees = vec![0; bits];
        for &(b, t) in edges {
            if b >= bits || t >= transitions {
                return Err(Error::InvalidParameter(format!("edge ({b}, {t}) out of range")));
            }
            degrees[b] += 1;
        }
        let mut g = Self::empty(degrees, transitions, capacity, vec![false; transitions]);
        for &(b, t) in edges {
            if g.hosted[t].len() >= capacity {
                return Err(Error::InvalidParameter(format!("transition {t} hosts more than {capacity} bits")));
            }
            g.connect(b, t);
        }
        Ok(g)
    }

    fn connect(&mut self, bit: usize, transition: usize) {
        self.bit_adj[bit].push(transition);
        self.hosted[transition].push(bit);
        self.log.push((bit, transition));
    }

    pub fn num_bits(&self) -> usize {
        self.bit_adj.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.hosted.len()
    }

    /// Information bits per transition.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn bit_degree(&self, bit: usize) -> usize {
        self.bit_adj[bit].len()
    }

    pub fn target_degree(&self, bit: usize) -> usize {
        self.target_degrees[bit]
    }

    /// Transitions of `bit` in insertion order.
    pub fn bit_neighbors(&self, bit: usize) -> &[usize] {
        &self.bit_adj[bit]
    }

    pub fn hosted_bits(&self, transition: usize) -> &[usize] {
        &self.hosted[transition]
    }

    pub fn is_punctured(&self, transition: usize) -> bool {
        self.punctured[transition]
    }

    /// Every `(bit, transition)` edge in insertion order.
    pub fn insertion_log(&self) -> &[(usize, usize)] {
        &self.log
    }

    /// Number of leading log entries placed by the unpunctured pre-pass.
    pub fn prepass_edges(&self) -> usize {
        self.prepass_edges
    }

    pub fn is_complete(&self) -> bool {
        self.bit_adj.iter().zip(&self.target_degrees).all(|(a, &d)| a.len() == d)
            && self.hosted.iter().all(|h| h.len() == self.capacity)
    }

    fn max_degree(&self) -> usize {
        self.target_degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Reusable breadth-first scratch space over bits, transitions and states.
struct Bfs {
    bits: usize,
    transitions: usize,
    dist: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl Bfs {
    fn new(bits: usize, transitions: usize) -> Self {
        let n = bits + 2 * transitions + 1;
        Self { bits, transitions, dist: vec![0; n], stamp: vec![0; n], epoch: 0 }
    }

    fn transition(&self, t: usize) -> usize {
        self.bits + t
    }

    fn state(&self, s: usize) -> usize {
        self.bits + self.transitions + s
    }

    fn neighbors(&self, g: &FactorGraph, v: usize, out: &mut Vec<usize>) {
        out.clear();
        if v < self.bits {
            out.extend(g.bit_adj[v].iter().map(|&t| self.transition(t)));
        } else if v < self.bits + self.transitions {
            let t = v - self.bits;
            out.extend(g.hosted[t].iter().copied());
            out.push(self.state(t));
            out.push(self.state(t + 1));
        } else {
            let s = v - self.bits - self.transitions;
            if s > 0 {
                out.push(self.transition(s - 1));
            }
            if s < self.transitions {
                out.push(self.transition(s));
            }
        }
    }

    fn reset(&mut self) {
        self.epoch += 1;
    }

    fn seen(&self, v: usize) -> bool {
        self.stamp[v] == self.epoch
    }

    fn mark(&mut self, v: usize, d: u32) {
        self.stamp[v] = self.epoch;
        self.dist[v] = d;
    }
}

/// Builds the factor graph for `info_len` bits by progressive edge growth.
///
/// Bits are numbered lowest degree first using the rounded per-degree counts
/// of `profile`. With a puncturing pattern tiled over the transitions, a first
/// pass gives each bit (lowest degrees first, while they last) one edge to an
/// unpunctured transition. Then degree classes are filled in increasing order,
/// edge by edge across the class: a bit's first edge goes to the least loaded
/// transition, later edges to the free transition farthest from the bit in the
/// current graph. Ties go to the least loaded, then lowest index.
pub fn peg_build(
    info_len: usize,
    profile: &DegreeProfile,
    capacity: usize,
    pattern: Option<&PuncturePattern>,
) -> Result<FactorGraph> {
    if capacity == 0 {
        return Err(Error::InvalidParameter("transitions must host at least one bit".into()));
    }
    let degrees: Vec<usize> = profile.degree_counts(info_len).iter().flat_map(|&(d, n)| std::iter::repeat_n(d, n)).collect();
    let edges: usize = degrees.iter().sum();
    if edges == 0 {
        return Err(Error::InvalidParameter("graph has no edges".into()));
    }
    if !edges.is_multiple_of(capacity) {
        return Err(Error::SizeMismatch(format!("{edges} bit copies cannot fill transitions hosting {capacity} each")));
    }
    let transitions = edges / capacity;
    if let Some(&d) = degrees.iter().find(|&&d| d > transitions) {
        return Err(Error::SizeMismatch(format!("degree {d} exceeds the {transitions} available transitions")));
    }
    let punctured: Vec<bool> = (0..transitions).map(|t| pattern.is_some_and(|x| !x.transmits(t))).collect();
    let mut g = FactorGraph::empty(degrees.clone(), transitions, capacity, punctured);

    // Least loaded, then lowest index, among transitions passing `ok`.
    let least_loaded = |g: &FactorGraph, ok: &dyn Fn(usize) -> bool| {
        (0..transitions).filter(|&t| g.hosted[t].len() < capacity && ok(t)).min_by_key(|&t| (g.hosted[t].len(), t))
    };

    if pattern.is_some() {
        for bit in 0..g.num_bits() {
            match least_loaded(&g, &|t| !g.punctured[t]) {
                Some(t) => g.connect(bit, t),
                None => break,
            }
        }
        g.prepass_edges = g.log.len();
    }

    let mut bfs = Bfs::new(g.num_bits(), transitions);
    let mut classes: Vec<usize> = degrees.clone();
    classes.dedup();
    for d in classes {
        let members: Vec<usize> = (0..g.num_bits()).filter(|&b| degrees[b] == d).collect();
        for _ in 0..d {
            for &bit in &members {
                if g.bit_adj[bit].len() >= d {
                    continue;
                }
                let t = if g.bit_adj[bit].is_empty() {
                    least_loaded(&g, &|_| true)
                } else {
                    farthest_free(&g, bit, &mut bfs)
                };
                let t = t.ok_or_else(|| Error::Internal(format!("no free transition for bit {bit}")))?;
                g.connect(bit, t);
            }
        }
    }
    debug_assert!(g.is_complete());
    Ok(g)
}

/// Free transition (not yet adjacent to `bit`) at the largest distance from
/// `bit`; unreachable ones count as infinitely far.
fn farthest_free(g: &FactorGraph, bit: usize, bfs: &mut Bfs) -> Option<usize> {
    let free = |t: usize| g.hosted[t].len() < g.capacity && !g.bit_adj[bit].contains(&t);
    let total_free = (0..g.num_transitions()).filter(|&t| free(t)).count();
    if total_free == 0 {
        return None;
    }
    bfs.reset();
    bfs.mark(bit, 0);
    let mut layer = vec![bit];
    let mut reached = 0;
    let mut last_layer_free: Vec<usize> = Vec::new();
    let mut nbrs = Vec::new();
    let mut depth = 0;
    while !layer.is_empty() && reached < total_free {
        depth += 1;
        let mut next = Vec::new();
        last_layer_free.clear();
        for &v in &layer {
            bfs.neighbors(g, v, &mut nbrs);
            for &w in &nbrs {
                if bfs.seen(w) {
                    continue;
                }
                bfs.mark(w, depth);
                next.push(w);
                if w >= g.num_bits() && w < g.num_bits() + g.num_transitions() && free(w - g.num_bits()) {
                    reached += 1;
                    last_layer_free.push(w - g.num_bits());
                }
            }
        }
        layer = next;
    }
    let pool: Vec<usize> = if reached < total_free {
        let bits = g.num_bits();
        (0..g.num_transitions()).filter(|&t| free(t) && !bfs.seen(bits + t)).collect()
    } else {
        last_layer_free
    };
    pool.into_iter().min_by_key(|&t| (g.hosted[t].len(), t))
}

/// Shortest cycle lengths of a factor graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GirthReport {
    /// Including the state chain; `None` when the graph is acyclic.
    pub girth: Option<usize>,
    /// Bits and transitions only.
    pub bit_transition_girth: Option<usize>,
}

/// Girth of the graph, by breadth-first search from every bit node (every
/// cycle passes through a bit because the state chain alone is a path).
pub fn compute_girth(g: &FactorGraph) -> GirthReport {
    GirthReport { girth: shortest_cycle(g, true), bit_transition_girth: shortest_cycle(g, false) }
}

fn shortest_cycle(g: &FactorGraph, with_states: bool) -> Option<usize> {
    let mut bfs = Bfs::new(g.num_bits(), g.num_transitions());
    let n_nodes = g.num_bits() + 2 * g.num_transitions() + 1;
    let mut parent = vec![usize::MAX; n_nodes];
    let mut best = usize::MAX;
    let mut nbrs = Vec::new();
    let mut queue = VecDeque::new();
    for root in 0..g.num_bits() {
        bfs.reset();
        bfs.mark(root, 0);
        parent[root] = usize::MAX;
        queue.clear();
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let dv = bfs.dist[v] as usize;
            // Any cycle found from here on is at least 2 dv + 1 long.
            if 2 * dv + 1 >= best {
                break;
            }
            bfs.neighbors(g, v, &mut nbrs);
            if !with_states {
                let states = g.num_bits() + g.num_transitions();
                nbrs.retain(|&w| w < states);
            }
            // A bit attached twice to the same transition is a 2-cycle.
            for (i, &w) in nbrs.iter().enumerate() {
                if nbrs[..i].contains(&w) {
                    best = best.min(2);
                }
            }
            for &w in &nbrs {
                if w == parent[v] {
                    continue;
                }
                if bfs.seen(w) {
                    best = best.min(dv + bfs.dist[w] as usize + 1);
                } else {
                    bfs.mark(w, dv as u32 + 1);
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
    }
    (best != usize::MAX).then_some(best)
}

/// Interleaver `pi`: copy `m` of the repeated information stream (bits in
/// index order, each bit's copies in insertion order) feeds trellis step
/// `pi[m]` (0-based here; [`Interleaver::one_based`] for files).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter(format!("not a permutation of 0..{}", perm.len())));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.perm.iter().map(|&p| p + 1).collect()
    }

    /// `inv[step]` is the stream index feeding `step`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (m, &p) in self.perm.iter().enumerate() {
            inv[p] = m;
        }
        inv
    }
}

/// Reads the permutation off a complete graph with one bit per transition.
pub fn graph_to_interleaver(g: &FactorGraph) -> Result<Interleaver> {
    if let Some(t) = (0..g.num_transitions()).find(|&t| g.hosted[t].len() != 1) {
        return Err(Error::SizeMismatch(format!("transition {t} hosts {} bit copies, expected 1", g.hosted[t].len())));
    }
    if let Some(b) = (0..g.num_bits()).find(|&b| g.bit_degree(b) != g.target_degree(b)) {
        return Err(Error::SizeMismatch(format!("bit {b} is incomplete")));
    }
    Interleaver::new(g.bit_adj.iter().flatten().copied().collect())
}

impl FactorGraph {
    /// Rebuilds the bit-transition incidence implied by an interleaver and
    /// bit degrees (in the same stream order as [`graph_to_interleaver`]).
    pub fn from_interleaver(degrees: &[usize], interleaver: &Interleaver) -> Result<Self> {
        let total: usize = degrees.iter().sum();
        if total != interleaver.len() {
            return Err(Error::SizeMismatch(format!("{total} bit copies for an interleaver of size {}", interleaver.len())));
        }
        let mut edges = Vec::with_capacity(total);
        let mut m = 0;
        for (b, &d) in degrees.iter().enumerate() {
            for _ in 0..d {
                edges.push((b, interleaver.as_slice()[m]));
                m += 1;
            }
        }
        Self::from_edges(degrees.len(), interleaver.len(), 1, &edges)
    }

    /// Same bits, transitions and incidence, ignoring insertion order.
    pub fn same_incidence(&self, other: &FactorGraph) -> bool {
        let sorted = |g: &FactorGraph| -> Vec<Vec<usize>> {
            g.bit_adj
                .iter()
                .map(|a| {
                    let mut a = a.clone();
                    a.sort_unstable();
                    a
                })
                .collect()
        };
        self.num_transitions() == other.num_transitions() && sorted(self) == sorted(other)
    }

    /// Number of bits per degree, lowest degree first.
    pub fn degree_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = vec![0usize; self.max_degree() + 1];
        for &d in &self.target_degrees {
            h[d] += 1;
        }
        h.into_iter().enumerate().filter(|&(_, n)| n > 0).collect()
    }
}
