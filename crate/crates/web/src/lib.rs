//! Browser bindings. Each entry point returns a JSON string; the plain Rust
//! functions are what the tests call, the `#[wasm_bindgen]` wrappers only
//! convert errors into JS exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cyclecast::dissemination::{auto_horizon, check_delay_bound, check_freshness_invariant, PhasePolicy, Simulation, StreamConfig};
use cyclecast::flowgraph::{bfs_distances, diameter, expected_expansion_ratio, fgc_construct, reverse};
use cyclecast::overlay::{Overlay, PeerId};
use cyclecast::rng::{run_trials, seeded};
use cyclecast::ChunkId;

pub const MAX_GRAPH_PEERS: usize = 2000;
pub const MAX_CURVE_WORK: usize = 4_000_000;
pub const MAX_STREAM_PEERS: usize = 400;
const CURVE_POINTS: usize = 60;

#[derive(Serialize)]
struct GraphSample {
    n: usize,
    q: f64,
    /// Peers in the order the construction reached them.
    order: Vec<u32>,
    e1: Vec<(u32, u32)>,
    e2: Vec<(u32, u32)>,
    /// Hop distance from the source, indexed by peer id - 1.
    distance: Vec<u32>,
    depth: u32,
    reverse_depth: u32,
    diameter: Option<u32>,
    z: Vec<usize>,
}

fn edge_ids(edges: &[(PeerId, PeerId)]) -> Vec<(u32, u32)> {
    edges.iter().map(|&(a, b)| (a.0, b.0)).collect()
}

/// One flow graph from the sequential construction, with its distances.
pub fn flow_graph_json(n: usize, q: f64, seed: u64) -> Result<String, String> {
    if n > MAX_GRAPH_PEERS {
        return Err(format!("N is capped at {MAX_GRAPH_PEERS} in the browser"));
    }
    let trace = fgc_construct(n, q, &mut seeded(seed)).map_err(|e| e.to_string())?;
    let h = trace.superpose();
    let dist = bfs_distances(&h, PeerId::SOURCE).map_err(|e| e.to_string())?;
    let reverse_depth = bfs_distances(&reverse(&h), PeerId::SOURCE).map_err(|e| e.to_string())?.depth();
    let sample = GraphSample {
        n,
        q,
        order: trace.order.iter().map(|p| p.0).collect(),
        e1: edge_ids(&trace.e1),
        e2: edge_ids(&trace.e2),
        distance: (1..=n as u32).map(|i| dist.get(PeerId(i)).unwrap_or(u32::MAX)).collect(),
        depth: dist.depth(),
        reverse_depth,
        diameter: diameter(&h),
        z: trace.z.clone(),
    };
    serde_json::to_string(&sample).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ExpansionCurve {
    n: usize,
    q: f64,
    trials: usize,
    t: Vec<usize>,
    /// Mean of `z(t)/t` over the trials.
    mean: Vec<f64>,
    /// Closed-form `E[z(t)]/t`.
    formula: Vec<f64>,
    /// `1 + q/2`, the floor for `t <= N/2`.
    floor: f64,
}

/// Empirical `z(t)/t` against the closed form on a grid of `t`.
pub fn expansion_curve_json(n: usize, q: f64, trials: usize, seed: u64) -> Result<String, String> {
    if n < 3 || trials == 0 {
        return Err("need N >= 3 and at least one trial".into());
    }
    if n.saturating_mul(trials) > MAX_CURVE_WORK {
        return Err(format!("N x trials is capped at {MAX_CURVE_WORK} in the browser"));
    }
    let step = ((n - 1) / CURVE_POINTS).max(1);
    let ts: Vec<usize> = (1..n).step_by(step).collect();
    let runs = run_trials(seed, 0, trials, |rng, _| fgc_construct(n, q, rng).map(|tr| ts.iter().map(|&t| tr.z[t]).collect::<Vec<_>>()));
    let mut sums = vec![0u64; ts.len()];
    for r in runs {
        for (s, z) in sums.iter_mut().zip(r.map_err(|e| e.to_string())?) {
            *s += z as u64;
        }
    }
    let curve = ExpansionCurve {
        n,
        q,
        trials,
        mean: sums.iter().zip(&ts).map(|(&s, &t)| s as f64 / trials as f64 / t as f64).collect(),
        formula: ts.iter().map(|&t| expected_expansion_ratio(n, t, q)).collect(),
        t: ts,
        floor: 1.0 + q / 2.0,
    };
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PeerDelays {
    peer: u32,
    /// `d_k(v)` per color.
    hops: Vec<u32>,
    /// `K·d_k(v)` per color.
    bound: Vec<u64>,
    /// Worst `rx_slot - t` seen per color, over chunks whose bound fits the run.
    worst: Vec<Option<u64>>,
}

#[derive(Serialize)]
struct StreamSummary {
    n: usize,
    m: usize,
    k: u32,
    schedule: Vec<usize>,
    phase: String,
    horizon: u64,
    freshness_violations: usize,
    delay_violations: usize,
    peers: Vec<PeerDelays>,
}

/// Streams over a random overlay and compares each peer's worst delay with
/// its bound, per color.
pub fn stream_delays_json(n: usize, m: usize, k: u32, phase: &str, seed: u64) -> Result<String, String> {
    if n > MAX_STREAM_PEERS {
        return Err(format!("N is capped at {MAX_STREAM_PEERS} in the browser"));
    }
    let policy: PhasePolicy = phase.parse().map_err(|e: cyclecast::Error| e.to_string())?;
    let mut rng = seeded(seed);
    let overlay = Overlay::grown(n, m, &mut rng).map_err(|e| e.to_string())?;
    let cfg = StreamConfig::with_default_schedule(m, k, policy).map_err(|e| e.to_string())?;
    let schedule = cfg.schedule().to_vec();
    let mut sim = Simulation::new(&overlay, cfg, &mut rng).map_err(|e| e.to_string())?;
    let graphs = sim.flow_graphs(&overlay).map_err(|e| e.to_string())?;
    let horizon = auto_horizon(&graphs, k, 6);
    sim.run(horizon);
    let log = sim.log();
    let dists = graphs.iter().map(|g| bfs_distances(g, PeerId::SOURCE)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let kk = u64::from(k);

    let peers = overlay
        .peers_sorted()
        .into_iter()
        .map(|v| {
            let hops: Vec<u32> = dists.iter().map(|d| d.get(v).unwrap_or(u32::MAX)).collect();
            let bound: Vec<u64> = hops.iter().map(|&h| kk * u64::from(h)).collect();
            let mut worst = vec![None; hops.len()];
            for &ChunkId(t) in log.generated() {
                let c = (t % kk) as usize - 1;
                if t + bound[c] >= horizon {
                    continue;
                }
                if let Some(rx) = log.first_rx(v, ChunkId(t)) {
                    let w: &mut Option<u64> = &mut worst[c];
                    *w = Some(w.map_or(rx - t, |x| x.max(rx - t)));
                }
            }
            PeerDelays { peer: v.0, hops, bound, worst }
        })
        .collect();

    let summary = StreamSummary {
        n,
        m,
        k,
        schedule,
        phase: policy.to_string(),
        horizon,
        freshness_violations: check_freshness_invariant(log).len(),
        delay_violations: check_delay_bound(log, &graphs).map_err(|e| e.to_string())?.len(),
        peers,
    };
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

// Seeds cross the JS boundary as f64 so plain numbers work from the page.
fn seed_from(x: f64) -> u64 {
    x.max(0.0) as u64
}

#[wasm_bindgen(js_name = flowGraph)]
pub fn flow_graph(n: usize, q: f64, seed: f64) -> Result<String, JsValue> {
    flow_graph_json(n, q, seed_from(seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = expansionCurve)]
pub fn expansion_curve(n: usize, q: f64, trials: usize, seed: f64) -> Result<String, JsValue> {
    expansion_curve_json(n, q, trials, seed_from(seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = streamDelays)]
pub fn stream_delays(n: usize, m: usize, k: u32, phase: &str, seed: f64) -> Result<String, JsValue> {
    stream_delays_json(n, m, k, phase, seed_from(seed)).map_err(|e| JsValue::from_str(&e))
}
