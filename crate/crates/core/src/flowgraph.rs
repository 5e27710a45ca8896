//! Flow graphs and the flow-graph construction (FGC) process.
//!
//! The flow graph of color `k` holds every edge that ever carries a color-`k`
//! chunk: the whole of layer `λ_k` plus the layer-`M` edges leaving peers
//! whose coloring decision is `k`. Statistically it is a uniform random
//! Hamiltonian cycle superposed with an independently thinned second one.
//! [`fgc_construct`] samples that pair node by node in breadth-first order,
//! which exposes the expansion count `z(t)` used by the depth analysis.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::dissemination::StreamConfig;
use crate::error::{Error, Result};
use crate::overlay::{Overlay, PeerId};

/// Directed multigraph with a distinguished source. Parallel edges are kept.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    nodes: Vec<PeerId>,
    index: HashMap<PeerId, usize>,
    source: usize,
    edges: Vec<(usize, usize)>,
    // CSR adjacency, edge order preserved per tail
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl FlowGraph {
    pub fn from_edges<I>(nodes: Vec<PeerId>, source: PeerId, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PeerId, PeerId)>,
    {
        let index: HashMap<PeerId, usize> = nodes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::InvalidParameter("duplicate node in flow graph".into()));
        }
        let source = *index.get(&source).ok_or(Error::UnknownPeer(source))?;
        let edges = edges
            .into_iter()
            .map(|(a, b)| {
                let ia = *index.get(&a).ok_or(Error::UnknownPeer(a))?;
                let ib = *index.get(&b).ok_or(Error::UnknownPeer(b))?;
                Ok((ia, ib))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_indexed(nodes, index, source, edges))
    }

    fn from_indexed(nodes: Vec<PeerId>, index: HashMap<PeerId, usize>, source: usize, edges: Vec<(usize, usize)>) -> Self {
        let n = nodes.len();
        let mut offsets = vec![0usize; n + 1];
        for &(a, _) in &edges {
            offsets[a + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; edges.len()];
        for &(a, b) in &edges {
            targets[fill[a]] = b;
            fill[a] += 1;
        }
        FlowGraph { nodes, index, source, edges, offsets, targets }
    }

    /// Graph on peers `1..=n` with source 1, built from index pairs.
    fn on_range(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let nodes: Vec<PeerId> = (1..=n as u32).map(PeerId).collect();
        let index = nodes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Self::from_indexed(nodes, index, 0, edges)
    }

    pub fn nodes(&self) -> &[PeerId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn source(&self) -> PeerId {
        self.nodes[self.source]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (PeerId, PeerId)> + '_ {
        self.edges.iter().map(|&(a, b)| (self.nodes[a], self.nodes[b]))
    }

    pub fn out_degree(&self, peer: PeerId) -> Option<usize> {
        self.index.get(&peer).map(|&i| self.offsets[i + 1] - self.offsets[i])
    }

    pub fn max_out_degree(&self) -> usize {
        (0..self.nodes.len()).map(|i| self.offsets[i + 1] - self.offsets[i]).max().unwrap_or(0)
    }

    fn neighbours(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Edge list text: a `# source=<id>` header and one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# source={}\n", self.source());
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Parses [`FlowGraph::to_edge_list`]. Nodes are the peers that appear
    /// in any edge plus the source.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut source = None;
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("source=") {
                    let id = v.trim().parse::<u32>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
                    source = Some(PeerId(id));
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [a, b] = parts[..] else {
                return Err(Error::Parse { line: i + 1, message: "expected `i j`".into() });
            };
            let parse = |s: &str| s.parse::<u32>().map(PeerId).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() });
            edges.push((parse(a)?, parse(b)?));
        }
        let source = source.ok_or(Error::Parse { line: 1, message: "missing `# source=` header".into() })?;
        let mut nodes: Vec<PeerId> = edges.iter().flat_map(|&(a, b)| [a, b]).chain([source]).collect();
        nodes.sort();
        nodes.dedup();
        FlowGraph::from_edges(nodes, source, edges)
    }
}

/// Flow graph of color `k`: layer `λ_k` plus the layer-`M` edges out of
/// peers with coloring decision `k`.
pub fn extract_flow_graph(overlay: &Overlay, k: u32, cfg: &StreamConfig, mu: &BTreeMap<PeerId, u32>) -> Result<FlowGraph> {
    let max = cfg.color_count();
    if k == 0 || k > max {
        return Err(Error::ColorOutOfRange { color: k, max });
    }
    if overlay.m_count() != cfg.m_count() {
        return Err(Error::InvalidConfig(format!(
            "overlay has {} layers but the configuration expects {}",
            overlay.m_count(),
            cfg.m_count()
        )));
    }
    let peers = overlay.peers_sorted();
    let base = overlay.layer(cfg.layer_for_color(k));
    let top = overlay.layer(cfg.m_count());
    let mut edges = Vec::with_capacity(peers.len() * 2);
    for &p in &peers {
        edges.push((p, base.successor(p).ok_or(Error::UnknownPeer(p))?));
    }
    for &p in &peers {
        if mu.get(&p) == Some(&k) {
            edges.push((p, top.successor(p).ok_or(Error::UnknownPeer(p))?));
        }
    }
    FlowGraph::from_edges(peers, PeerId::SOURCE, edges)
}

/// Multiset union of two edge sets over peers `1..=n` (source 1).
pub fn superpose(e1: &[(PeerId, PeerId)], e2: &[(PeerId, PeerId)], n: usize) -> Result<FlowGraph> {
    let nodes: Vec<PeerId> = (1..=n as u32).map(PeerId).collect();
    FlowGraph::from_edges(nodes, PeerId::SOURCE, e1.iter().chain(e2).copied())
}

/// Every edge reversed; nodes and source unchanged.
pub fn reverse(g: &FlowGraph) -> FlowGraph {
    let edges = g.edges.iter().map(|&(a, b)| (b, a)).collect();
    FlowGraph::from_indexed(g.nodes.clone(), g.index.clone(), g.source, edges)
}

/// Hop distances from a root; `None` marks an unreachable node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    root: PeerId,
    nodes: Vec<PeerId>,
    dist: Vec<Option<u32>>,
}

impl DistanceTable {
    pub fn root(&self) -> PeerId {
        self.root
    }

    pub fn get(&self, peer: PeerId) -> Option<u32> {
        let i = self.nodes.binary_search(&peer).ok().or_else(|| self.nodes.iter().position(|&p| p == peer))?;
        self.dist[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PeerId, Option<u32>)> + '_ {
        self.nodes.iter().copied().zip(self.dist.iter().copied())
    }

    /// Largest finite distance.
    pub fn depth(&self) -> u32 {
        self.dist.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn all_reachable(&self) -> bool {
        self.dist.iter().all(Option::is_some)
    }
}

fn bfs_from(g: &FlowGraph, root: usize, dist: &mut [u32], queue: &mut Vec<usize>) -> (u32, usize) {
    dist.fill(u32::MAX);
    queue.clear();
    dist[root] = 0;
    queue.push(root);
    let mut head = 0;
    let mut far = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        let du = dist[u];
        far = du;
        for &v in g.neighbours(u) {
            if dist[v] == u32::MAX {
                dist[v] = du + 1;
                queue.push(v);
            }
        }
    }
    (far, queue.len())
}

pub fn bfs_distances(g: &FlowGraph, root: PeerId) -> Result<DistanceTable> {
    let r = *g.index.get(&root).ok_or(Error::UnknownPeer(root))?;
    let mut dist = vec![0u32; g.nodes.len()];
    let mut queue = Vec::with_capacity(g.nodes.len());
    bfs_from(g, r, &mut dist, &mut queue);
    Ok(DistanceTable { root, nodes: g.nodes.clone(), dist: dist.into_iter().map(|d| (d != u32::MAX).then_some(d)).collect() })
}

/// Maximum distance from the source to any reachable node.
pub fn depth(g: &FlowGraph) -> u32 {
    let mut dist = vec![0u32; g.nodes.len()];
    let mut queue = Vec::with_capacity(g.nodes.len());
    bfs_from(g, g.source, &mut dist, &mut queue).0
}

/// Maximum distance over all ordered pairs, or `None` if some node cannot
/// reach another.
pub fn diameter(g: &FlowGraph) -> Option<u32> {
    let n = g.nodes.len();
    let mut dist = vec![0u32; n];
    let mut queue = Vec::with_capacity(n);
    let mut best = 0;
    for root in 0..n {
        let (far, seen) = bfs_from(g, root, &mut dist, &mut queue);
        if seen < n {
            return None;
        }
        best = best.max(far);
    }
    Some(best)
}

// Fragment bookkeeping for one edge set of the FGC process. Every partial
// edge set is a disjoint union of directed paths; a node without an
// incoming edge is a path start, one without an outgoing edge a path end.
struct PathForest {
    n: usize,
    edges: usize,
    // index-addressable set of nodes without an incoming edge
    heads: Vec<usize>,
    head_pos: Vec<usize>,
    start_of_end: Vec<usize>,
    end_of_start: Vec<usize>,
}

impl PathForest {
    fn new(n: usize) -> Self {
        PathForest {
            n,
            edges: 0,
            heads: (0..n).collect(),
            head_pos: (0..n).collect(),
            start_of_end: (0..n).collect(),
            end_of_start: (0..n).collect(),
        }
    }

    fn closing(&self) -> bool {
        self.edges + 1 == self.n
    }

    /// Size of `C(v, E)`: heads other than the start of `v`'s own path,
    /// or the single Hamiltonian closure.
    fn candidate_count(&self) -> usize {
        if self.closing() {
            1
        } else {
            self.heads.len() - 1
        }
    }

    fn draw<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let own = self.start_of_end[v];
        if self.closing() {
            debug_assert_eq!(self.heads, [own]);
            return own;
        }
        let skip = self.head_pos[own];
        let mut r = rng.random_range(0..self.heads.len() - 1);
        if r >= skip {
            r += 1;
        }
        self.heads[r]
    }

    fn add(&mut self, v: usize, c: usize) {
        let pos = self.head_pos[c];
        let last = *self.heads.last().expect("non-empty head set");
        self.heads.swap_remove(pos);
        if last != c {
            self.head_pos[last] = pos;
        }
        self.head_pos[c] = usize::MAX;
        self.edges += 1;
        if self.edges == self.n {
            return;
        }
        let s = self.start_of_end[v];
        let e = self.end_of_start[c];
        self.end_of_start[s] = e;
        self.start_of_end[e] = s;
    }
}

/// Full record of one FGC run over peers `1..=n`.
#[derive(Debug, Clone, Serialize)]
pub struct FgcTrace {
    pub n: usize,
    /// `v_1..v_n`, the order in which peers entered `Z`.
    pub order: Vec<PeerId>,
    /// `τ_1..τ_n`.
    pub tau: Vec<bool>,
    /// Edges of the Hamiltonian cycle, in iteration order.
    pub e1: Vec<(PeerId, PeerId)>,
    /// Edges of the thinned cycle, in iteration order.
    pub e2: Vec<(PeerId, PeerId)>,
    /// `z(0..=n)` with `z(0) = 1`.
    pub z: Vec<usize>,
    /// `|C(v_t, E1)|` at iteration `t`, index `t - 1`.
    pub c1_counts: Vec<usize>,
    /// `|C(v_t, E2)|` at iterations with `τ_t = 1`.
    pub c2_counts: Vec<Option<usize>>,
}

/// Runs the FGC process with `τ_t ~ Bernoulli(q)` drawn up front.
pub fn fgc_construct<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Result<FgcTrace> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("q must lie in [0, 1], got {q}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N must be at least 2, got {n}")));
    }
    let tau: Vec<bool> = (0..n).map(|_| rng.random_bool(q)).collect();
    fgc_construct_with_tau(tau, rng)
}

/// Runs the FGC process for a fixed `τ` vector (its length is `N`).
///
/// Panics if a candidate-set size ever deviates from `N - t` (first edge
/// set) or `N - Σ_{j<t} τ_j - 1` (second edge set) for `t < N`.
pub fn fgc_construct_with_tau<R: Rng + ?Sized>(tau: Vec<bool>, rng: &mut R) -> Result<FgcTrace> {
    let n = tau.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N must be at least 2, got {n}")));
    }
    let mut first = PathForest::new(n);
    let mut second = PathForest::new(n);
    let mut in_z = vec![false; n];
    let mut order = Vec::with_capacity(n);
    order.push(0usize);
    in_z[0] = true;

    let mut z = Vec::with_capacity(n + 1);
    z.push(1);
    let mut e1 = Vec::with_capacity(n);
    let mut e2 = Vec::new();
    let mut c1_counts = Vec::with_capacity(n);
    let mut c2_counts = Vec::with_capacity(n);
    let mut tau_sum = 0usize;

    for t in 1..=n {
        let v = *order.get(t - 1).expect("Z holds at least t peers at iteration t");

        let count1 = first.candidate_count();
        if t < n {
            assert_eq!(count1, n - t, "|C(v_t, E1)| != N - t at t = {t}");
        }
        c1_counts.push(count1);
        let c = first.draw(v, rng);
        first.add(v, c);
        e1.push((v, c));
        if !in_z[c] {
            in_z[c] = true;
            order.push(c);
        }

        if tau[t - 1] {
            let count2 = second.candidate_count();
            if t < n {
                assert_eq!(count2, n - tau_sum - 1, "|C(v_t, E2)| != N - sum(tau) - 1 at t = {t}");
            }
            c2_counts.push(Some(count2));
            let c2 = second.draw(v, rng);
            second.add(v, c2);
            e2.push((v, c2));
            if !in_z[c2] {
                in_z[c2] = true;
                order.push(c2);
            }
            tau_sum += 1;
        } else {
            c2_counts.push(None);
        }
        z.push(order.len());
    }
    debug_assert_eq!(order.len(), n);

    let id = |i: usize| PeerId(i as u32 + 1);
    Ok(FgcTrace {
        n,
        order: order.into_iter().map(id).collect(),
        tau,
        e1: e1.into_iter().map(|(a, b)| (id(a), id(b))).collect(),
        e2: e2.into_iter().map(|(a, b)| (id(a), id(b))).collect(),
        z,
        c1_counts,
        c2_counts,
    })
}

impl FgcTrace {
    /// `Σ_{j ≤ t} τ_j`.
    pub fn tau_sum(&self, t: usize) -> usize {
        self.tau[..t].iter().filter(|&&b| b).count()
    }

    /// `F(t) = (N - z(t)) / (N - t)`, defined for `t < N`.
    pub fn contraction(&self, t: usize) -> Option<f64> {
        (t < self.n).then(|| (self.n - self.z[t]) as f64 / (self.n - t) as f64)
    }

    /// `z^{(h)}(t)`: the number of peers within `h` hops of `v_1..v_t`.
    pub fn z_iterated(&self, t: usize, hops: usize) -> usize {
        let mut x = t.min(self.n);
        for _ in 0..hops {
            let next = self.z[x];
            if next == x {
                break;
            }
            x = next;
        }
        x
    }

    /// `H*`: the two edge sets superposed.
    pub fn superpose(&self) -> FlowGraph {
        let to_idx = |&(a, b): &(PeerId, PeerId)| (a.0 as usize - 1, b.0 as usize - 1);
        let edges = self.e1.iter().chain(&self.e2).map(to_idx).collect();
        FlowGraph::on_range(self.n, edges)
    }

    /// Re-verifies the candidate-count identities from the recorded counts.
    pub fn candidate_counts_hold(&self) -> bool {
        let mut tau_sum = 0;
        for t in 1..self.n {
            if self.c1_counts[t - 1] != self.n - t {
                return false;
            }
            if self.tau[t - 1] {
                if self.c2_counts[t - 1] != Some(self.n - tau_sum - 1) {
                    return false;
                }
                tau_sum += 1;
            }
        }
        true
    }

    /// Checks that distances from the source are nondecreasing along
    /// `v_1..v_N` and that `d(v_{z(t)}) <= d(v_t) + 1`.
    pub fn distances_monotone(&self, dist: &DistanceTable) -> bool {
        let d: Vec<Option<u32>> = self.order.iter().map(|&p| dist.get(p)).collect();
        if d.iter().any(Option::is_none) {
            return false;
        }
        let d: Vec<u32> = d.into_iter().flatten().collect();
        let sorted = d.windows(2).all(|w| w[0] <= w[1]);
        let hop = (1..=self.n).all(|t| d[self.z[t] - 1] <= d[t - 1] + 1);
        sorted && hop
    }

    /// CSV with columns `t,z,F,tau,c1_count,c2_count` for `t = 1..=N`.
    /// `F` is blank at `t = N`, `c2_count` blank when `τ_t = 0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,z,F,tau,c1_count,c2_count\n");
        for t in 1..=self.n {
            let f = self.contraction(t).map(|f| f.to_string()).unwrap_or_default();
            let c2 = self.c2_counts[t - 1].map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{t},{},{f},{},{},{c2}", self.z[t], u8::from(self.tau[t - 1]), self.c1_counts[t - 1]);
        }
        out
    }
}

/// `z(t)` and `F(t)` series of a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionSeries {
    /// `z(0..=N)`.
    pub z: Vec<usize>,
    /// `F(0..N)`.
    pub f: Vec<f64>,
}

pub fn expansion_series(trace: &FgcTrace) -> ExpansionSeries {
    ExpansionSeries { z: trace.z.clone(), f: (0..trace.n).filter_map(|t| trace.contraction(t)).collect() }
}

/// Conditional mean of `N - z(t)` given the graph after iteration `l` and
/// the `τ` vector: `((N-t-1)/(N-l-1)) · ((N-Στ(t)-1)/(N-Στ(l)-1)) · (N - z_l)`.
pub fn expected_remaining(n: usize, l: usize, t: usize, z_l: usize, tau_sum_l: usize, tau_sum_t: usize) -> Result<f64> {
    if !(l <= t && t < n) {
        return Err(Error::InvalidParameter(format!("need 0 <= l <= t < N, got l={l}, t={t}, N={n}")));
    }
    if tau_sum_l > tau_sum_t || tau_sum_t > t || tau_sum_l > l || z_l > n {
        return Err(Error::InvalidParameter("inconsistent τ prefix sums or z".into()));
    }
    if l == t {
        return Ok((n - z_l) as f64);
    }
    let nf = n as f64;
    let a = (nf - t as f64 - 1.0) / (nf - l as f64 - 1.0);
    let b = (nf - tau_sum_t as f64 - 1.0) / (nf - tau_sum_l as f64 - 1.0);
    Ok(a * b * (nf - z_l as f64))
}

/// `E[N - z(t)] = (N-t-1)(1 - tq/(N-1))`, averaged over `τ`.
pub fn expected_remaining_marginal(n: usize, t: usize, q: f64) -> f64 {
    let (nf, tf) = (n as f64, t as f64);
    (nf - tf - 1.0) * (1.0 - tf * q / (nf - 1.0))
}

/// `E[z(t)] / t = 1 + 1/t + q(1 - t/(N-1))`.
pub fn expected_expansion_ratio(n: usize, t: usize, q: f64) -> f64 {
    let (nf, tf) = (n as f64, t as f64);
    1.0 + 1.0 / tf + q * (1.0 - tf / (nf - 1.0))
}
