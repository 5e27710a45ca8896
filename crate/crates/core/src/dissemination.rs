//! Time-slotted chunk dissemination over an overlay.
//!
//! The source generates chunk `t` at every slot `t` not divisible by `K`,
//! colored `t mod K`. Each peer walks the scheduling vector `Λ` cyclically;
//! position `k < K` pushes its latest color-`k` chunk over layer `λ_k` and
//! position `K` pushes its latest color-`μ(v)` chunk over layer `M`. A chunk
//! received during slot `t` can be forwarded from slot `t + 1` on.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowgraph::{bfs_distances, depth, extract_flow_graph, FlowGraph};
use crate::overlay::{Overlay, PeerId};

/// How a peer's position in the scheduling vector is offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    /// `phase(v) = join slot mod K`.
    #[default]
    JoinSlot,
    Zero,
    /// Uniform over `0..K`, drawn once per peer.
    Random,
}

impl PhasePolicy {
    pub const ALL: [PhasePolicy; 3] = [PhasePolicy::JoinSlot, PhasePolicy::Zero, PhasePolicy::Random];
}

impl fmt::Display for PhasePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhasePolicy::JoinSlot => "join-slot",
            PhasePolicy::Zero => "zero",
            PhasePolicy::Random => "random",
        })
    }
}

impl FromStr for PhasePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "join-slot" => Ok(PhasePolicy::JoinSlot),
            "zero" => Ok(PhasePolicy::Zero),
            "random" => Ok(PhasePolicy::Random),
            other => Err(Error::InvalidConfig(format!("unknown phase policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamConfig {
    m_count: usize,
    k_count: u32,
    schedule: Vec<usize>,
    phase_policy: PhasePolicy,
}

impl StreamConfig {
    /// `schedule` holds `λ_1..λ_K` as 1-based layer numbers.
    pub fn new(m_count: usize, k_count: u32, schedule: Vec<usize>, phase_policy: PhasePolicy) -> Result<Self> {
        if m_count < 2 {
            return Err(Error::InvalidConfig(format!("M must be at least 2, got {m_count}")));
        }
        if k_count < 2 {
            return Err(Error::InvalidConfig(format!("K must be at least 2, got {k_count}")));
        }
        if schedule.len() != k_count as usize {
            return Err(Error::InvalidConfig(format!("scheduling vector has {} entries, expected K = {k_count}", schedule.len())));
        }
        if let Some((i, &l)) = schedule[..schedule.len() - 1].iter().enumerate().find(|&(_, &l)| l == 0 || l >= m_count) {
            return Err(Error::InvalidConfig(format!("λ_{} = {l} must lie in 1..={}", i + 1, m_count - 1)));
        }
        if schedule[schedule.len() - 1] != m_count {
            return Err(Error::InvalidConfig(format!("last scheduling entry must be M = {m_count}, got {}", schedule[schedule.len() - 1])));
        }
        Ok(StreamConfig { m_count, k_count, schedule, phase_policy })
    }

    /// `Λ` cycling through layers `1..M-1` and ending with `M`, e.g.
    /// `(1, 2, 1, 3)` for `M = 3, K = 4`.
    pub fn with_default_schedule(m_count: usize, k_count: u32, phase_policy: PhasePolicy) -> Result<Self> {
        if m_count < 2 {
            return Err(Error::InvalidConfig(format!("M must be at least 2, got {m_count}")));
        }
        let mut schedule: Vec<usize> = (0..k_count.saturating_sub(1) as usize).map(|i| i % (m_count - 1) + 1).collect();
        schedule.push(m_count);
        Self::new(m_count, k_count, schedule, phase_policy)
    }

    pub fn m_count(&self) -> usize {
        self.m_count
    }

    pub fn k_count(&self) -> u32 {
        self.k_count
    }

    /// Number of chunk colors, `K - 1`.
    pub fn color_count(&self) -> u32 {
        self.k_count - 1
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    pub fn phase_policy(&self) -> PhasePolicy {
        self.phase_policy
    }

    /// `λ_k` for a color `k` in `1..K`.
    pub fn layer_for_color(&self, k: u32) -> usize {
        self.schedule[k as usize - 1]
    }

    /// `q = 1/(K-1)`.
    pub fn q(&self) -> f64 {
        1.0 / f64::from(self.k_count - 1)
    }
}

/// A chunk, named by its generation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(pub u64);

impl ChunkId {
    pub fn color(self, k_count: u32) -> u32 {
        (self.0 % u64::from(k_count)) as u32
    }
}

/// Color of the chunk generated at slot `t`, or `None` on slots `0, K, 2K, ...`.
pub fn assign_color(t: u64, k_count: u32) -> Option<u32> {
    let c = (t % u64::from(k_count)) as u32;
    (c != 0).then_some(c)
}

/// 1-based position in `Λ` that a peer with the given phase uses at slot `t`.
pub fn schedule_position(t: u64, phase: u32, k_count: u32) -> u32 {
    let k = i128::from(k_count);
    ((i128::from(t) - i128::from(phase)).rem_euclid(k) + 1) as u32
}

/// `(layer, color)` a peer transmits on at slot `t`.
pub fn scheduled_action(t: u64, phase: u32, cfg: &StreamConfig, mu: u32) -> (usize, u32) {
    let r = schedule_position(t, phase, cfg.k_count);
    if r < cfg.k_count {
        (cfg.layer_for_color(r), r)
    } else {
        (cfg.m_count, mu)
    }
}

/// Per-peer dissemination state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerStreamState {
    mu: u32,
    phase: u32,
    latest: Vec<Option<ChunkId>>,
}

impl PeerStreamState {
    pub fn mu(&self) -> u32 {
        self.mu
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    /// Newest chunk of color `k` held, uploadable or not.
    pub fn latest(&self, k: u32) -> Option<ChunkId> {
        self.latest.get(k as usize - 1).copied().flatten()
    }
}

/// First reception slot of every (peer, chunk) pair, plus the generated chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryLog {
    peers: Vec<PeerId>,
    k_count: u32,
    horizon: u64,
    generated: Vec<ChunkId>,
    // rx[peer index][chunk t]
    rx: Vec<Vec<Option<u64>>>,
}

impl DeliveryLog {
    /// Empty log over `peers` for a run of `horizon` slots.
    pub fn new(mut peers: Vec<PeerId>, k_count: u32, horizon: u64) -> Self {
        peers.sort();
        peers.dedup();
        let rx = vec![Vec::new(); peers.len()];
        DeliveryLog { peers, k_count, horizon, generated: Vec::new(), rx }
    }

    pub fn peers(&self) -> &[PeerId] {
        &self.peers
    }

    pub fn k_count(&self) -> u32 {
        self.k_count
    }

    /// Number of executed slots; slots run from `0` to `horizon - 1`.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn generated(&self) -> &[ChunkId] {
        &self.generated
    }

    pub fn is_generated(&self, chunk: ChunkId) -> bool {
        self.generated.binary_search(&chunk).is_ok()
    }

    pub fn record_generated(&mut self, chunk: ChunkId) {
        if let Err(pos) = self.generated.binary_search(&chunk) {
            self.generated.insert(pos, chunk);
        }
    }

    /// Records a reception; returns `true` if it was the first one.
    pub fn record(&mut self, peer: PeerId, chunk: ChunkId, slot: u64) -> Result<bool> {
        let i = self.peers.binary_search(&peer).map_err(|_| Error::UnknownPeer(peer))?;
        Ok(self.record_at(i, chunk, slot))
    }

    fn record_at(&mut self, i: usize, chunk: ChunkId, slot: u64) -> bool {
        let row = &mut self.rx[i];
        let t = chunk.0 as usize;
        if row.len() <= t {
            row.resize(t + 1, None);
        }
        match row[t] {
            Some(_) => false,
            None => {
                row[t] = Some(slot);
                true
            }
        }
    }

    pub fn first_rx(&self, peer: PeerId, chunk: ChunkId) -> Option<u64> {
        let i = self.peers.binary_search(&peer).ok()?;
        self.rx[i].get(chunk.0 as usize).copied().flatten()
    }

    /// `(peer, chunk, slot)` in peer then chunk order.
    pub fn receptions(&self) -> impl Iterator<Item = (PeerId, ChunkId, u64)> + '_ {
        self.peers
            .iter()
            .zip(&self.rx)
            .flat_map(|(&p, row)| row.iter().enumerate().filter_map(move |(t, s)| s.map(|s| (p, ChunkId(t as u64), s))))
    }

    pub fn reception_count(&self) -> usize {
        self.rx.iter().map(|row| row.iter().flatten().count()).sum()
    }

    /// CSV with columns `peer,chunk_t,color,rx_slot`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("peer,chunk_t,color,rx_slot\n");
        for (p, c, s) in self.receptions() {
            let _ = writeln!(out, "{p},{},{},{s}", c.0, c.color(self.k_count));
        }
        out
    }

    /// CSV with columns `chunk_t,color`.
    pub fn generated_csv(&self) -> String {
        let mut out = String::from("chunk_t,color\n");
        for c in &self.generated {
            let _ = writeln!(out, "{},{}", c.0, c.color(self.k_count));
        }
        out
    }
}

/// Dissemination state machine over a fixed overlay.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: StreamConfig,
    peers: Vec<PeerId>,
    source: usize,
    // succ[m][i]: index of peer i's successor in layer m + 1
    succ: Vec<Vec<usize>>,
    states: Vec<PeerStreamState>,
    slot: u64,
    log: DeliveryLog,
}

impl Simulation {
    /// Draws `μ(v)` uniformly from `1..K` for each peer in id order, then
    /// the phases if the policy is random.
    pub fn new<R: Rng + ?Sized>(overlay: &Overlay, cfg: StreamConfig, rng: &mut R) -> Result<Self> {
        let colors = cfg.color_count();
        let mu = overlay.peers_sorted().into_iter().map(|p| (p, rng.random_range(1..=colors))).collect();
        Self::with_mu(overlay, cfg, mu, rng)
    }

    /// Uses the given coloring decisions; `rng` is only consulted for
    /// random phases.
    pub fn with_mu<R: Rng + ?Sized>(overlay: &Overlay, cfg: StreamConfig, mu: BTreeMap<PeerId, u32>, rng: &mut R) -> Result<Self> {
        if overlay.m_count() != cfg.m_count {
            return Err(Error::InvalidConfig(format!(
                "overlay has {} layers but the configuration expects {}",
                overlay.m_count(),
                cfg.m_count
            )));
        }
        let report = overlay.validate();
        if !report.passed() {
            return Err(Error::InvalidOverlay(report.failures().join("; ")));
        }
        let peers = overlay.peers_sorted();
        let index = |p: PeerId| peers.binary_search(&p).map_err(|_| Error::UnknownPeer(p));
        let succ = overlay
            .layers()
            .iter()
            .map(|layer| peers.iter().map(|&p| index(layer.successor(p).ok_or(Error::UnknownPeer(p))?)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;

        let k = cfg.k_count;
        let mut states = Vec::with_capacity(peers.len());
        for &p in &peers {
            let m = *mu.get(&p).ok_or_else(|| Error::InvalidConfig(format!("no coloring decision for peer {p}")))?;
            if m == 0 || m > cfg.color_count() {
                return Err(Error::ColorOutOfRange { color: m, max: cfg.color_count() });
            }
            let phase = match cfg.phase_policy {
                PhasePolicy::Zero => 0,
                PhasePolicy::JoinSlot => (overlay.joined_at(p).unwrap_or(0) % u64::from(k)) as u32,
                PhasePolicy::Random => rng.random_range(0..k),
            };
            states.push(PeerStreamState { mu: m, phase, latest: vec![None; cfg.color_count() as usize] });
        }
        let source = index(PeerId::SOURCE)?;
        let log = DeliveryLog::new(peers.clone(), k, 0);
        Ok(Simulation { cfg, peers, source, succ, states, slot: 0, log })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.cfg
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn mu(&self) -> BTreeMap<PeerId, u32> {
        self.peers.iter().zip(&self.states).map(|(&p, s)| (p, s.mu)).collect()
    }

    pub fn state(&self, peer: PeerId) -> Option<&PeerStreamState> {
        self.peers.binary_search(&peer).ok().map(|i| &self.states[i])
    }

    pub fn log(&self) -> &DeliveryLog {
        &self.log
    }

    pub fn into_log(self) -> DeliveryLog {
        self.log
    }

    /// Flow graphs `G_1..G_{K-1}` for this run's overlay and coloring.
    pub fn flow_graphs(&self, overlay: &Overlay) -> Result<Vec<FlowGraph>> {
        let mu = self.mu();
        (1..=self.cfg.color_count()).map(|k| extract_flow_graph(overlay, k, &self.cfg, &mu)).collect()
    }

    /// Executes one slot.
    pub fn step(&mut self) {
        let t = self.slot;
        // Transmissions use only chunks held before this slot.
        let mut sends = Vec::with_capacity(self.peers.len());
        for (i, st) in self.states.iter().enumerate() {
            let (layer, color) = scheduled_action(t, st.phase, &self.cfg, st.mu);
            if let Some(chunk) = st.latest[color as usize - 1] {
                sends.push((self.succ[layer - 1][i], chunk));
            }
        }
        if let Some(color) = assign_color(t, self.cfg.k_count) {
            let chunk = ChunkId(t);
            self.states[self.source].latest[color as usize - 1] = Some(chunk);
            self.log.generated.push(chunk);
            self.log.record_at(self.source, chunk, t);
        }
        for (j, chunk) in sends {
            self.log.record_at(j, chunk, t);
            let slot = &mut self.states[j].latest[chunk.color(self.cfg.k_count) as usize - 1];
            if slot.is_none_or(|held| held < chunk) {
                *slot = Some(chunk);
            }
        }
        self.slot += 1;
        self.log.horizon = self.slot;
    }

    /// Executes `slots` more slots.
    pub fn run(&mut self, slots: u64) -> &DeliveryLog {
        for _ in 0..slots {
            self.step();
        }
        &self.log
    }
}

/// Builds a simulation and runs slots `0..horizon`. A zero horizon yields
/// an empty log.
pub fn run<R: Rng + ?Sized>(overlay: &Overlay, cfg: StreamConfig, horizon: u64, rng: &mut R) -> Result<DeliveryLog> {
    let mut sim = Simulation::new(overlay, cfg, rng)?;
    sim.run(horizon);
    Ok(sim.into_log())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// `peer` got `chunk` at `rx_slot` without holding `chunk - K` by
    /// `rx_slot - K`.
    Freshness { peer: PeerId, chunk: ChunkId, rx_slot: u64, previous_rx: Option<u64> },
    /// `peer` got `chunk` later than `bound`, or never.
    Delay { peer: PeerId, chunk: ChunkId, bound: u64, rx_slot: Option<u64> },
    /// An eligible chunk never reached `peer`.
    Undelivered { peer: PeerId, chunk: ChunkId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Freshness { peer, chunk, rx_slot, previous_rx } => {
                write!(f, "freshness: peer {peer} received chunk {} at slot {rx_slot} but ", chunk.0)?;
                match previous_rx {
                    Some(s) => write!(f, "its predecessor only at slot {s}"),
                    None => write!(f, "never its predecessor"),
                }
            }
            Violation::Delay { peer, chunk, bound, rx_slot } => {
                write!(f, "delay: peer {peer} should have chunk {} by slot {bound} but ", chunk.0)?;
                match rx_slot {
                    Some(s) => write!(f, "received it at slot {s}"),
                    None => write!(f, "never received it"),
                }
            }
            Violation::Undelivered { peer, chunk } => write!(f, "throughput: chunk {} never reached peer {peer}", chunk.0),
        }
    }
}

/// Every reception of chunk `t > K` at slot `l` must be preceded by a
/// reception of chunk `t - K` no later than `l - K`.
pub fn check_freshness_invariant(log: &DeliveryLog) -> Vec<Violation> {
    let k = u64::from(log.k_count);
    let mut out = Vec::new();
    for (peer, chunk, l) in log.receptions() {
        if chunk.0 <= k {
            continue;
        }
        let prev = ChunkId(chunk.0 - k);
        if !log.is_generated(prev) {
            continue;
        }
        let previous_rx = log.first_rx(peer, prev);
        let ok = matches!(previous_rx, Some(p) if p + k <= l);
        if !ok {
            out.push(Violation::Freshness { peer, chunk, rx_slot: l, previous_rx });
        }
    }
    out
}

/// A color-`k` chunk generated at `t` must reach `v` by `t + K·d_k(v)`.
/// `flowgraphs[k - 1]` is `G_k`. Bounds past the last executed slot are
/// skipped.
pub fn check_delay_bound(log: &DeliveryLog, flowgraphs: &[FlowGraph]) -> Result<Vec<Violation>> {
    let k = log.k_count;
    if flowgraphs.len() != k as usize - 1 {
        return Err(Error::InvalidParameter(format!("expected {} flow graphs, got {}", k - 1, flowgraphs.len())));
    }
    let dists = flowgraphs.iter().map(|g| bfs_distances(g, PeerId::SOURCE)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for &chunk in &log.generated {
        let table = &dists[chunk.color(k) as usize - 1];
        for &peer in &log.peers {
            let Some(d) = table.get(peer) else { continue };
            let bound = chunk.0 + u64::from(k) * u64::from(d);
            if bound >= log.horizon {
                continue;
            }
            let rx_slot = log.first_rx(peer, chunk);
            if rx_slot.is_none_or(|s| s > bound) {
                out.push(Violation::Delay { peer, chunk, bound, rx_slot });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThroughputReport {
    /// `max_k d_k*`.
    pub d_max: u32,
    /// Chunks with `t + K·d_max` inside the horizon.
    pub eligible: usize,
    pub violations: Vec<Violation>,
}

/// Every chunk generated at `t` with `t + K·d_max <= horizon - 1` must
/// reach every peer.
pub fn check_throughput(log: &DeliveryLog, flowgraphs: &[FlowGraph]) -> ThroughputReport {
    let k = u64::from(log.k_count);
    let d_max = flowgraphs.iter().map(depth).max().unwrap_or(0);
    let mut eligible = 0;
    let mut violations = Vec::new();
    for &chunk in &log.generated {
        if chunk.0 + k * u64::from(d_max) >= log.horizon {
            continue;
        }
        eligible += 1;
        for &peer in &log.peers {
            if log.first_rx(peer, chunk).is_none() {
                violations.push(Violation::Undelivered { peer, chunk });
            }
        }
    }
    ThroughputReport { d_max, eligible, violations }
}

/// A horizon long enough for `extra_rounds` full rounds of chunks to clear
/// the deepest flow graph.
pub fn auto_horizon(flowgraphs: &[FlowGraph], k_count: u32, extra_rounds: u64) -> u64 {
    let d_max = flowgraphs.iter().map(depth).max().unwrap_or(0);
    let k = u64::from(k_count);
    k * (u64::from(d_max) + extra_rounds) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn two_peer(k: u32) -> (Overlay, StreamConfig) {
        let overlay = Overlay::new(2).unwrap();
        let cfg = StreamConfig::with_default_schedule(2, k, PhasePolicy::Zero).unwrap();
        (overlay, cfg)
    }

    #[test]
    fn colors() {
        assert_eq!(assign_color(0, 3), None);
        assert_eq!(assign_color(3, 3), None);
        assert_eq!(assign_color(4, 3), Some(1));
        assert_eq!(assign_color(7, 4), Some(3));
        assert_eq!(ChunkId(7).color(4), 3);
    }

    #[test]
    fn config_validation() {
        assert_eq!(StreamConfig::with_default_schedule(3, 4, PhasePolicy::Zero).unwrap().schedule(), &[1, 2, 1, 3]);
        assert_eq!(StreamConfig::with_default_schedule(2, 3, PhasePolicy::Zero).unwrap().schedule(), &[1, 1, 2]);
        assert_eq!(StreamConfig::with_default_schedule(2, 2, PhasePolicy::Zero).unwrap().schedule(), &[1, 2]);
        assert!(StreamConfig::new(3, 4, vec![1, 2, 1, 2], PhasePolicy::Zero).is_err());
        assert!(StreamConfig::new(3, 4, vec![1, 3, 1, 3], PhasePolicy::Zero).is_err());
        assert!(StreamConfig::new(3, 4, vec![1, 2, 3], PhasePolicy::Zero).is_err());
        assert!(StreamConfig::new(3, 1, vec![3], PhasePolicy::Zero).is_err());
        assert!(StreamConfig::new(1, 2, vec![1, 1], PhasePolicy::Zero).is_err());
        assert!((StreamConfig::with_default_schedule(2, 3, PhasePolicy::Zero).unwrap().q() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn schedule_walks_the_vector() {
        let cfg = StreamConfig::new(3, 4, vec![1, 2, 1, 3], PhasePolicy::Zero).unwrap();
        let layers: Vec<usize> = (0..4).map(|t| scheduled_action(t, 0, &cfg, 2).0).collect();
        assert_eq!(layers, vec![1, 2, 1, 3]);
        let cfg = StreamConfig::new(2, 3, vec![1, 1, 2], PhasePolicy::Zero).unwrap();
        assert_eq!(scheduled_action(5, 0, &cfg, 2), (2, 2));
        assert_eq!(scheduled_action(5, 2, &cfg, 2), (1, 1));
    }

    #[test]
    fn phase_policy_round_trips() {
        for p in PhasePolicy::ALL {
            assert_eq!(p.to_string().parse::<PhasePolicy>().unwrap(), p);
        }
        assert!("sometimes".parse::<PhasePolicy>().is_err());
    }

    #[test]
    fn fresh_chunk_is_not_forwarded_in_its_own_slot() {
        let (overlay, cfg) = two_peer(3);
        let mut sim = Simulation::new(&overlay, cfg, &mut seeded(0)).unwrap();
        sim.run(2);
        assert_eq!(sim.log().first_rx(PeerId(1), ChunkId(1)), Some(1));
        assert_eq!(sim.log().first_rx(PeerId(2), ChunkId(1)), None);
        assert_eq!(sim.state(PeerId(1)).unwrap().latest(1), Some(ChunkId(1)));
    }

    #[test]
    fn two_peers_receive_within_k_slots() {
        for k in [2, 3, 5] {
            for seed in 0..5 {
                let (overlay, _) = two_peer(k);
                for policy in PhasePolicy::ALL {
                    let cfg = StreamConfig::with_default_schedule(2, k, policy).unwrap();
                    let log = run(&overlay, cfg, 30, &mut seeded(seed)).unwrap();
                    for &c in log.generated() {
                        if c.0 + u64::from(k) < 30 {
                            let rx = log.first_rx(PeerId(2), c).expect("delivered");
                            assert!(rx > c.0 && rx <= c.0 + u64::from(k), "k={k} chunk {} at {rx}", c.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn latest_chunk_rule() {
        let (overlay, cfg) = two_peer(3);
        let mut sim = Simulation::new(&overlay, cfg, &mut seeded(0)).unwrap();
        // peer 2 already holds chunk 4 and then receives the older chunk 1
        let j = 1;
        sim.states[j].latest[0] = Some(ChunkId(4));
        sim.states[0].latest[0] = Some(ChunkId(1));
        sim.states[0].phase = 0;
        sim.slot = 3; // position 1: color 1 over layer 1
        sim.step();
        assert_eq!(sim.log().first_rx(PeerId(2), ChunkId(1)), Some(3));
        assert_eq!(sim.state(PeerId(2)).unwrap().latest(1), Some(ChunkId(4)));
    }

    #[test]
    fn newest_of_two_parents_wins() {
        // 1 -> 3 and 2 -> 3 in different layers, both scheduled at slot 0
        let layer1 = crate::overlay::Layer::from_pairs([(PeerId(1), PeerId(3)), (PeerId(3), PeerId(2)), (PeerId(2), PeerId(1))]);
        let layer2 = crate::overlay::Layer::from_pairs([(PeerId(2), PeerId(3)), (PeerId(3), PeerId(1)), (PeerId(1), PeerId(2))]);
        let overlay = Overlay::from_layers(vec![layer1, layer2]).unwrap();
        let cfg = StreamConfig::new(2, 3, vec![1, 1, 2], PhasePolicy::Zero).unwrap();
        let mu = [(PeerId(1), 1), (PeerId(2), 1), (PeerId(3), 1)].into_iter().collect();
        let mut sim = Simulation::with_mu(&overlay, cfg, mu, &mut seeded(0)).unwrap();
        sim.states[0].latest[0] = Some(ChunkId(4));
        sim.states[1].latest[0] = Some(ChunkId(7));
        sim.states[0].phase = 0; // slot 3 -> position 1, layer 1: 1 -> 3
        sim.states[1].phase = 1; // slot 3 -> position 3, layer 2, μ = 1: 2 -> 3
        sim.slot = 3;
        sim.step();
        assert_eq!(sim.log().first_rx(PeerId(3), ChunkId(4)), Some(3));
        assert_eq!(sim.log().first_rx(PeerId(3), ChunkId(7)), Some(3));
        assert_eq!(sim.state(PeerId(3)).unwrap().latest(1), Some(ChunkId(7)));
    }

    #[test]
    fn zero_horizon_gives_empty_log() {
        let (overlay, cfg) = two_peer(3);
        let log = run(&overlay, cfg, 0, &mut seeded(1)).unwrap();
        assert_eq!(log.horizon(), 0);
        assert!(log.generated().is_empty());
        assert_eq!(log.reception_count(), 0);
    }

    #[test]
    fn synthetic_freshness_violation() {
        let mut log = DeliveryLog::new(vec![PeerId(1), PeerId(2)], 3, 20);
        for t in [1, 4] {
            log.record_generated(ChunkId(t));
            log.record(PeerId(1), ChunkId(t), t).unwrap();
        }
        log.record(PeerId(2), ChunkId(4), 6).unwrap();
        log.record(PeerId(2), ChunkId(1), 5).unwrap();
        let v = check_freshness_invariant(&log);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Freshness { peer: PeerId(2), chunk: ChunkId(4), rx_slot: 6, previous_rx: Some(5) }));
        assert!(v[0].to_string().contains("chunk 4"));

        let mut early = DeliveryLog::new(vec![PeerId(1), PeerId(2)], 3, 20);
        for t in [1, 2] {
            early.record_generated(ChunkId(t));
            early.record(PeerId(2), ChunkId(t), 9).unwrap();
        }
        assert!(check_freshness_invariant(&early).is_empty());
    }

    #[test]
    fn delay_bound_arithmetic() {
        // path 1 -> 2 -> 3 -> 1, so d(3) = 2; K = 3, chunk 7 must arrive by 13
        let g = FlowGraph::from_edges(
            vec![PeerId(1), PeerId(2), PeerId(3)],
            PeerId(1),
            [(PeerId(1), PeerId(2)), (PeerId(2), PeerId(3)), (PeerId(3), PeerId(1))],
        )
        .unwrap();
        let graphs = vec![g.clone(), g];
        let mut log = DeliveryLog::new(vec![PeerId(1), PeerId(2), PeerId(3)], 3, 40);
        log.record_generated(ChunkId(7));
        log.record(PeerId(1), ChunkId(7), 7).unwrap();
        log.record(PeerId(2), ChunkId(7), 10).unwrap();
        log.record(PeerId(3), ChunkId(7), 14).unwrap();
        let v = check_delay_bound(&log, &graphs).unwrap();
        assert_eq!(v, vec![Violation::Delay { peer: PeerId(3), chunk: ChunkId(7), bound: 13, rx_slot: Some(14) }]);

        // same log cut off before the bound: nothing to flag
        log.horizon = 13;
        assert!(check_delay_bound(&log, &graphs).unwrap().iter().all(|v| !matches!(v, Violation::Delay { peer: PeerId(3), .. })));
        assert!(check_delay_bound(&log, &graphs[..1]).is_err());
    }

    #[test]
    fn csv_exports() {
        let (overlay, cfg) = two_peer(3);
        let log = run(&overlay, cfg, 6, &mut seeded(2)).unwrap();
        let csv = log.to_csv();
        assert!(csv.starts_with("peer,chunk_t,color,rx_slot\n1,1,1,1\n"));
        let gen = log.generated_csv();
        assert_eq!(gen, "chunk_t,color\n1,1\n2,2\n4,1\n5,2\n");
    }
}
