//! Multi-layer pairing overlay.
//!
//! Each of the `M` layers is a directed Hamiltonian cycle over the current
//! peer set. A joining peer picks, independently in every layer, one edge
//! uniformly at random and splices itself into it; a leaving peer's parent
//! and child in each layer are reconnected. Both operations keep every layer
//! a single cycle, so the superposed multigraph stays `M`-regular.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peer identifier. Peer 1 is the stream source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeerId(pub u32);

impl PeerId {
    pub const SOURCE: PeerId = PeerId(1);

    pub fn is_source(self) -> bool {
        self == Self::SOURCE
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One layer: the successor map of a (supposedly) Hamiltonian cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layer {
    succ: HashMap<PeerId, PeerId>,
    pred: HashMap<PeerId, PeerId>,
}

impl Layer {
    /// Builds a layer from `(peer, successor)` pairs without checking that
    /// they form a cycle; see [`Overlay::validate`].
    pub fn from_pairs<I: IntoIterator<Item = (PeerId, PeerId)>>(pairs: I) -> Self {
        let mut layer = Layer::default();
        for (from, to) in pairs {
            layer.link(from, to);
        }
        layer
    }

    fn link(&mut self, from: PeerId, to: PeerId) {
        self.succ.insert(from, to);
        self.pred.insert(to, from);
    }

    pub fn successor(&self, peer: PeerId) -> Option<PeerId> {
        self.succ.get(&peer).copied()
    }

    pub fn predecessor(&self, peer: PeerId) -> Option<PeerId> {
        self.pred.get(&peer).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.len()
    }

    /// Canonical encoding of the cycle: the peers visited after the source,
    /// in successor order. `None` if the walk does not close on the source
    /// after visiting exactly the mapped peers.
    pub fn canonical_order(&self) -> Option<Vec<PeerId>> {
        let n = self.succ.len();
        let mut order = Vec::with_capacity(n.saturating_sub(1));
        let mut cur = self.successor(PeerId::SOURCE)?;
        while cur != PeerId::SOURCE {
            if order.len() + 1 >= n {
                return None;
            }
            order.push(cur);
            cur = self.successor(cur)?;
        }
        (order.len() + 1 == n).then_some(order)
    }

    fn check(&self, index: usize, peers: &[PeerId]) -> LayerReport {
        let n = peers.len();
        let domain_ok = self.succ.len() == n && peers.iter().all(|p| self.succ.contains_key(p));
        let image: BTreeSet<PeerId> = self.succ.values().copied().collect();
        let bijection = domain_ok && image.len() == n && image.iter().all(|p| self.succ.contains_key(p));

        let mut cycle_len = 0;
        let mut cur = PeerId::SOURCE;
        if self.succ.contains_key(&cur) {
            while let Some(next) = self.successor(cur) {
                cycle_len += 1;
                cur = next;
                if cur == PeerId::SOURCE || cycle_len > n {
                    break;
                }
            }
        }
        let single_cycle = bijection && cur == PeerId::SOURCE && cycle_len == n;
        LayerReport { layer: index + 1, bijection, single_cycle, cycle_len }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerReport {
    /// 1-based layer number.
    pub layer: usize,
    pub bijection: bool,
    pub single_cycle: bool,
    /// Length of the walk from the source back to itself (0 if it never returns).
    pub cycle_len: usize,
}

impl LayerReport {
    pub fn passed(&self) -> bool {
        self.bijection && self.single_cycle
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub peer_count: usize,
    pub has_source: bool,
    pub layers: Vec<LayerReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.has_source && self.peer_count >= 2 && self.layers.iter().all(LayerReport::passed)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.has_source {
            out.push("source peer 1 missing".to_string());
        }
        if self.peer_count < 2 {
            out.push(format!("only {} peers", self.peer_count));
        }
        for l in &self.layers {
            if !l.bijection {
                out.push(format!("layer {}: successor map is not a bijection", l.layer));
            } else if !l.single_cycle {
                out.push(format!("layer {}: cycle through the source covers {} of {} peers", l.layer, l.cycle_len, self.peer_count));
            }
        }
        out
    }
}

/// The `M`-layer topology.
#[derive(Debug, Clone)]
pub struct Overlay {
    layers: Vec<Layer>,
    // Join order position of each peer; swap-removed on leave so that a
    // uniform index is a uniform peer (equivalently, a uniform edge tail).
    peers: Vec<PeerId>,
    position: HashMap<PeerId, usize>,
    joined_at: HashMap<PeerId, u64>,
    clock: u64,
}

impl Overlay {
    /// Two peers, the source and peer 2, paired in every layer.
    pub fn new(m_count: usize) -> Result<Self> {
        if m_count < 2 {
            return Err(Error::InvalidParameter(format!("M must be at least 2, got {m_count}")));
        }
        let (a, b) = (PeerId::SOURCE, PeerId(2));
        let layers = (0..m_count).map(|_| Layer::from_pairs([(a, b), (b, a)])).collect();
        Ok(Overlay {
            layers,
            peers: vec![a, b],
            position: HashMap::from([(a, 0), (b, 1)]),
            joined_at: HashMap::from([(a, 0), (b, 0)]),
            clock: 0,
        })
    }

    /// `n` peers reached by pure joins of ids `3..=n`.
    pub fn grown<R: Rng + ?Sized>(n: usize, m_count: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewPeers(n));
        }
        let mut overlay = Overlay::new(m_count)?;
        for id in 3..=n as u32 {
            overlay.join(PeerId(id), rng)?;
        }
        Ok(overlay)
    }

    /// Assembles an overlay from raw layers without validation. The peer set
    /// is the key set of the first layer; join slots default to the peer id.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidParameter(format!("M must be at least 2, got {}", layers.len())));
        }
        let mut peers: Vec<PeerId> = layers[0].succ.keys().copied().collect();
        peers.sort();
        let position = peers.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let joined_at = peers.iter().map(|&p| (p, u64::from(p.0))).collect();
        Ok(Overlay { layers, peers, position, joined_at, clock: 0 })
    }

    pub fn m_count(&self) -> usize {
        self.layers.len()
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn contains(&self, peer: PeerId) -> bool {
        self.position.contains_key(&peer)
    }

    /// Layer `m`, 1-based as in the scheduling vector.
    pub fn layer(&self, m: usize) -> &Layer {
        &self.layers[m - 1]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Peers in ascending id order.
    pub fn peers_sorted(&self) -> Vec<PeerId> {
        let mut v = self.peers.clone();
        v.sort();
        v
    }

    /// Number of mutations applied when `peer` joined.
    pub fn joined_at(&self, peer: PeerId) -> Option<u64> {
        self.joined_at.get(&peer).copied()
    }

    /// Mutation counter.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn join<R: Rng + ?Sized>(&mut self, new_peer: PeerId, rng: &mut R) -> Result<()> {
        if self.contains(new_peer) {
            return Err(Error::DuplicatePeer(new_peer));
        }
        let n = self.peers.len();
        for layer in &mut self.layers {
            let parent = self.peers[rng.random_range(0..n)];
            let child = layer.succ[&parent];
            layer.link(parent, new_peer);
            layer.link(new_peer, child);
        }
        self.position.insert(new_peer, n);
        self.peers.push(new_peer);
        self.clock += 1;
        self.joined_at.insert(new_peer, self.clock);
        Ok(())
    }

    pub fn leave(&mut self, peer: PeerId) -> Result<()> {
        if peer.is_source() {
            return Err(Error::SourceLeave);
        }
        let Some(&pos) = self.position.get(&peer) else {
            return Err(Error::UnknownPeer(peer));
        };
        if self.peers.len() < 3 {
            return Err(Error::TooFewPeers(self.peers.len()));
        }
        for layer in &mut self.layers {
            let parent = layer.pred.remove(&peer).expect("layer predecessor");
            let child = layer.succ.remove(&peer).expect("layer successor");
            layer.link(parent, child);
        }
        self.peers.swap_remove(pos);
        if let Some(&moved) = self.peers.get(pos) {
            self.position.insert(moved, pos);
        }
        self.position.remove(&peer);
        self.joined_at.remove(&peer);
        self.clock += 1;
        Ok(())
    }

    pub fn validate(&self) -> ValidationReport {
        let peers = self.peers_sorted();
        ValidationReport {
            peer_count: peers.len(),
            has_source: self.contains(PeerId::SOURCE),
            layers: self.layers.iter().enumerate().map(|(i, l)| l.check(i, &peers)).collect(),
        }
    }

    /// Line format: `N M`, then one line per layer listing the successor of
    /// every peer in ascending peer-id order.
    pub fn to_text(&self) -> String {
        let peers = self.peers_sorted();
        let mut out = format!("{} {}\n", peers.len(), self.layers.len());
        for layer in &self.layers {
            let line: Vec<String> = peers.iter().map(|p| layer.successor(*p).map_or_else(|| "0".to_string(), |s| s.to_string())).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses [`Overlay::to_text`] output. The peer set is recovered from
    /// the first layer's successor entries, which must be a permutation.
    /// Cycle structure is not checked here.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty input".into() })?;
        let nums = parse_ids(header, hl + 1)?;
        let [n, m] = nums[..] else {
            return Err(Error::Parse { line: hl + 1, message: "header must be `N M`".into() });
        };
        let (n, m) = (n as usize, m as usize);
        let rows: Vec<(usize, Vec<u32>)> = lines.map(|(i, l)| parse_ids(l, i + 1).map(|v| (i + 1, v))).collect::<Result<_>>()?;
        if rows.len() != m {
            return Err(Error::Parse { line: hl + 1, message: format!("expected {m} layer lines, found {}", rows.len()) });
        }
        let peer_set: BTreeSet<u32> = rows[0].1.iter().copied().collect();
        if peer_set.len() != n || rows[0].1.len() != n {
            return Err(Error::Parse { line: rows[0].0, message: format!("first layer must list {n} distinct successors") });
        }
        let peers: Vec<PeerId> = peer_set.into_iter().map(PeerId).collect();
        let mut layers = Vec::with_capacity(m);
        for (line, row) in &rows {
            if row.len() != n {
                return Err(Error::Parse { line: *line, message: format!("expected {n} entries, found {}", row.len()) });
            }
            if let Some(bad) = row.iter().find(|s| peers.binary_search(&PeerId(**s)).is_err()) {
                return Err(Error::Parse { line: *line, message: format!("unknown peer {bad}") });
            }
            layers.push(Layer::from_pairs(peers.iter().copied().zip(row.iter().map(|&s| PeerId(s)))));
        }
        Overlay::from_layers(layers)
    }
}

fn parse_ids(line: &str, lineno: usize) -> Result<Vec<u32>> {
    line.split_whitespace()
        .map(|tok| tok.parse::<u32>().map_err(|e| Error::Parse { line: lineno, message: format!("`{tok}`: {e}") }))
        .collect()
}

/// A single topology mutation in a churn script.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChurnOp {
    /// Join with the next id from the driver's counter.
    Join,
    /// A specific peer leaves.
    Leave(PeerId),
    /// A uniformly random non-source peer leaves.
    LeaveRandom,
}

/// Applies churn operations and owns peer-id allocation.
#[derive(Debug, Clone)]
pub struct ChurnDriver {
    next_id: u32,
}

impl ChurnDriver {
    /// Driver for a fresh overlay (ids 1 and 2 taken).
    pub fn new() -> Self {
        ChurnDriver { next_id: 3 }
    }

    /// Driver that continues after the largest id present in `overlay`.
    pub fn after(overlay: &Overlay) -> Self {
        let max = overlay.peers.iter().map(|p| p.0).max().unwrap_or(2);
        ChurnDriver { next_id: max + 1 }
    }

    pub fn apply<R: Rng + ?Sized>(&mut self, overlay: &mut Overlay, op: ChurnOp, rng: &mut R) -> Result<PeerId> {
        match op {
            ChurnOp::Join => {
                let id = PeerId(self.next_id);
                overlay.join(id, rng)?;
                self.next_id += 1;
                Ok(id)
            }
            ChurnOp::Leave(peer) => overlay.leave(peer).map(|_| peer),
            ChurnOp::LeaveRandom => {
                let n = overlay.len();
                if n < 3 {
                    return Err(Error::TooFewPeers(n));
                }
                let peer = loop {
                    let p = overlay.peers[rng.random_range(0..n)];
                    if !p.is_source() {
                        break p;
                    }
                };
                overlay.leave(peer).map(|_| peer)
            }
        }
    }
}

impl Default for ChurnDriver {
    fn default() -> Self {
        Self::new()
    }
}

/// Random join/leave sequence of exactly `ops` operations that starts from a
/// fresh 2-peer overlay and ends with `target` peers.
///
/// Each step joins with probability `1/2 + gap / (2 * remaining)`, clamped,
/// where `gap` is the distance to the target, so the walk wanders but always
/// lands on the target.
pub fn random_churn_plan<R: Rng + ?Sized>(target: usize, ops: usize, rng: &mut R) -> Result<Vec<ChurnOp>> {
    if target < 2 {
        return Err(Error::InvalidParameter(format!("target size must be at least 2, got {target}")));
    }
    let needed = target - 2;
    if ops < needed || !(ops - needed).is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "{ops} operations cannot take 2 peers to {target} (need at least {needed} with matching parity)"
        )));
    }
    let mut plan = Vec::with_capacity(ops);
    let mut size = 2usize;
    for done in 0..ops {
        let remaining = (ops - done) as f64;
        let gap = target as f64 - size as f64;
        let p_join = if size < 3 { 1.0 } else { (0.5 + gap / (2.0 * remaining)).clamp(0.0, 1.0) };
        if rng.random_bool(p_join) {
            plan.push(ChurnOp::Join);
            size += 1;
        } else {
            plan.push(ChurnOp::LeaveRandom);
            size -= 1;
        }
    }
    debug_assert_eq!(size, target);
    Ok(plan)
}
