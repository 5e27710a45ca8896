use std::collections::{BTreeMap, BTreeSet};

use cyclecast::dissemination::{PhasePolicy, StreamConfig};
use cyclecast::flowgraph::{
    bfs_distances, depth, diameter, expected_expansion_ratio, expected_remaining, expected_remaining_marginal, extract_flow_graph,
    fgc_construct, fgc_construct_with_tau, reverse, superpose, FgcTrace, FlowGraph,
};
use cyclecast::overlay::{Layer, Overlay, PeerId};
use cyclecast::rng::{run_trials, seeded, trial_rng};
use proptest::prelude::*;

fn p(i: u32) -> PeerId {
    PeerId(i)
}

fn cycle(order: &[u32]) -> Vec<(PeerId, PeerId)> {
    (0..order.len()).map(|i| (p(order[i]), p(order[(i + 1) % order.len()]))).collect()
}

/// All-pairs shortest paths by Floyd-Warshall, as an independent oracle.
fn floyd(g: &FlowGraph) -> Vec<Vec<Option<u32>>> {
    let nodes = g.nodes().to_vec();
    let idx: BTreeMap<PeerId, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = nodes.len();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for (a, b) in g.edges() {
        let (i, j) = (idx[&a], idx[&b]);
        if i != j {
            d[i][j] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| x + y < c) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

fn is_hamiltonian(edges: &[(PeerId, PeerId)], n: usize) -> bool {
    let succ: BTreeMap<PeerId, PeerId> = edges.iter().copied().collect();
    if edges.len() != n || succ.len() != n {
        return false;
    }
    let mut seen = BTreeSet::new();
    let mut cur = p(1);
    while seen.insert(cur) {
        cur = succ[&cur];
    }
    cur == p(1) && seen.len() == n
}

fn is_path_forest(edges: &[(PeerId, PeerId)]) -> bool {
    let mut outs = BTreeSet::new();
    let mut ins = BTreeSet::new();
    for &(a, b) in edges {
        if a == b || !outs.insert(a) || !ins.insert(b) {
            return false;
        }
    }
    // no cycle: walking forward from any edge must terminate
    let succ: BTreeMap<PeerId, PeerId> = edges.iter().copied().collect();
    succ.keys().all(|&start| {
        let mut cur = start;
        for _ in 0..=edges.len() {
            match succ.get(&cur) {
                Some(&next) => cur = next,
                None => return true,
            }
        }
        false
    })
}

#[test]
fn superposed_pair_of_six_cycles_has_depth_two() {
    let g = superpose(&cycle(&[1, 2, 3, 4, 5, 6]), &cycle(&[1, 4, 2, 6, 3, 5]), 6).unwrap();
    let d = bfs_distances(&g, p(1)).unwrap();
    let oracle = floyd(&g);
    for (i, &v) in g.nodes().iter().enumerate() {
        assert_eq!(d.get(v), oracle[0][i]);
    }
    assert_eq!(depth(&g), 2);
    let dia = oracle.iter().flatten().map(|x| x.unwrap()).max().unwrap();
    assert_eq!(diameter(&g), Some(dia));
}

#[test]
fn single_cycle_depth_is_n_minus_one() {
    for n in 2..20u32 {
        let order: Vec<u32> = (1..=n).collect();
        let g = superpose(&cycle(&order), &[], n as usize).unwrap();
        assert_eq!(depth(&g), n - 1);
        assert_eq!(diameter(&g), Some(n - 1));
    }
}

#[test]
fn diameter_is_none_when_disconnected() {
    let g = FlowGraph::from_edges(vec![p(1), p(2), p(3)], p(1), [(p(1), p(2)), (p(2), p(1))]).unwrap();
    assert_eq!(diameter(&g), None);
    assert!(!bfs_distances(&g, p(1)).unwrap().all_reachable());
    assert!(bfs_distances(&g, p(9)).is_err());
}

#[test]
fn edge_list_round_trip() {
    let g = superpose(&cycle(&[1, 3, 2, 5, 4]), &[(p(1), p(5)), (p(5), p(2))], 5).unwrap();
    let text = g.to_edge_list();
    let back = FlowGraph::from_edge_list(&text).unwrap();
    assert_eq!(back.to_edge_list(), text);
    assert_eq!(back.edge_count(), 7);
}

fn six_peer_overlay() -> Overlay {
    Overlay::from_layers(vec![Layer::from_pairs(cycle(&[1, 2, 3, 4, 5, 6])), Layer::from_pairs(cycle(&[1, 4, 2, 6, 3, 5]))]).unwrap()
}

#[test]
fn flow_graph_of_two_layer_overlay() {
    // K = 3, Λ = (1, 1, 2): color 1 follows layer 1 plus the layer-2 edges
    // of peers whose μ is 1, i.e. peers 1, 4 and 5.
    let o = six_peer_overlay();
    let cfg = StreamConfig::new(2, 3, vec![1, 1, 2], PhasePolicy::Zero).unwrap();
    let mu: BTreeMap<PeerId, u32> = [1, 2, 2, 1, 1, 2].into_iter().enumerate().map(|(i, m)| (p(i as u32 + 1), m)).collect();
    let g1 = extract_flow_graph(&o, 1, &cfg, &mu).unwrap();
    assert_eq!(g1.edge_count(), 9);
    let expected: BTreeSet<(PeerId, PeerId)> =
        cycle(&[1, 2, 3, 4, 5, 6]).into_iter().chain([(p(1), p(4)), (p(4), p(2)), (p(5), p(1))]).collect();
    assert_eq!(g1.edges().collect::<BTreeSet<_>>(), expected);
    assert!(g1.max_out_degree() <= 2);
    assert!(bfs_distances(&g1, p(1)).unwrap().all_reachable());

    let g2 = extract_flow_graph(&o, 2, &cfg, &mu).unwrap();
    let expected: BTreeSet<(PeerId, PeerId)> =
        cycle(&[1, 2, 3, 4, 5, 6]).into_iter().chain([(p(2), p(6)), (p(3), p(5)), (p(6), p(3))]).collect();
    assert_eq!(g2.edges().collect::<BTreeSet<_>>(), expected);
    assert!(extract_flow_graph(&o, 3, &cfg, &mu).is_err());
}

#[test]
fn flow_graph_without_extra_edges_is_the_layer() {
    let o = six_peer_overlay();
    let cfg = StreamConfig::new(2, 3, vec![1, 1, 2], PhasePolicy::Zero).unwrap();
    let mu: BTreeMap<PeerId, u32> = (1..=6).map(|i| (p(i), 2)).collect();
    let g1 = extract_flow_graph(&o, 1, &cfg, &mu).unwrap();
    assert_eq!(g1.edge_count(), 6);
    assert_eq!(depth(&g1), 5);
}

#[test]
fn first_expansion_step_matches_exact_mean() {
    // z(1) = 2 always, plus one more peer when τ_1 = 1 and the second
    // draw misses the peer already found: 2 + q(N-2)/(N-1).
    for (n, q) in [(5usize, 0.5f64), (10, 1.0), (50, 0.25)] {
        let trials = 40_000;
        let zs = run_trials(9, n as u64, trials, |rng, _| fgc_construct(n, q, rng).unwrap().z[1] as f64);
        let mean = zs.iter().sum::<f64>() / trials as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        let exact = 2.0 + q * (n as f64 - 2.0) / (n as f64 - 1.0);
        assert!((mean - exact).abs() <= 4.0 * se + 1e-12, "N={n} q={q}: {mean} vs {exact}");
        assert!((expected_expansion_ratio(n, 1, q) - exact).abs() < 1e-12);
    }
}

#[test]
fn conditional_remaining_matches_simulation() {
    // N = 11, two τ hits among the first five iterations, from z(0) = 1.
    let n = 11;
    assert!((expected_remaining(n, 0, 5, 1, 0, 2).unwrap() - 4.0).abs() < 1e-12);
    for pattern in [[true, true, false, false, false], [false, false, true, false, true], [false, false, false, true, true]] {
        let mut tau = vec![false; n];
        tau[..5].copy_from_slice(&pattern);
        let trials = 60_000;
        let left = run_trials(77, 5, trials, |rng, _| (n - fgc_construct_with_tau(tau.clone(), rng).unwrap().z[5]) as f64);
        let mean = left.iter().sum::<f64>() / trials as f64;
        let var = left.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 4.0).abs() <= 4.0 * se, "{pattern:?}: mean {mean}, se {se}");
    }
}

#[test]
fn marginal_remaining_matches_simulation() {
    let (n, q) = (40, 0.5);
    let trials = 20_000;
    for t in [1, 10, 20, 39] {
        let left = run_trials(3, t as u64, trials, |rng, _| (n - fgc_construct(n, q, rng).unwrap().z[t]) as f64);
        let mean = left.iter().sum::<f64>() / trials as f64;
        let var = left.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        let want = expected_remaining_marginal(n, t, q);
        assert!((mean - want).abs() <= 4.0 * se + 1e-12, "t={t}: {mean} vs {want}");
    }
}

#[test]
fn no_second_set_gives_deterministic_expansion() {
    let t = fgc_construct(30, 0.0, &mut seeded(1)).unwrap();
    let z: Vec<usize> = (0..=30).map(|i| (i + 1).min(30)).collect();
    assert_eq!(t.z, z);
    assert!(t.e2.is_empty());
    assert_eq!(depth(&t.superpose()), 29);
}

#[test]
fn fgc_rejects_bad_parameters() {
    let mut rng = seeded(0);
    assert!(fgc_construct(1, 0.5, &mut rng).is_err());
    assert!(fgc_construct(10, 1.5, &mut rng).is_err());
    assert!(fgc_construct(10, -0.1, &mut rng).is_err());
    assert!(expected_remaining(10, 6, 5, 1, 0, 0).is_err());
}

#[test]
fn trace_csv_has_one_row_per_iteration() {
    let t = fgc_construct(8, 0.5, &mut seeded(4)).unwrap();
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,z,F,tau,c1_count,c2_count");
    assert_eq!(lines.len(), 9);
    assert!(lines[8].starts_with("8,8,,"));
}

fn check_trace(t: &FgcTrace) -> Result<(), TestCaseError> {
    let n = t.n;
    prop_assert!(t.candidate_counts_hold());
    prop_assert!(is_hamiltonian(&t.e1, n));
    if t.tau.iter().all(|&b| b) {
        prop_assert!(is_hamiltonian(&t.e2, n));
    } else {
        prop_assert!(is_path_forest(&t.e2));
    }
    prop_assert_eq!(t.e2.len(), t.tau_sum(n));
    prop_assert_eq!(t.z[0], 1);
    prop_assert_eq!(t.z[n], n);
    for s in 1..=n {
        let step = t.z[s] - t.z[s - 1];
        prop_assert!(step <= 2);
        prop_assert!(t.z[s] >= (s + 1).min(n));
    }
    let order: BTreeSet<PeerId> = t.order.iter().copied().collect();
    prop_assert_eq!(order.len(), n);
    prop_assert_eq!(t.order[0], PeerId::SOURCE);

    let h = t.superpose();
    let dist = bfs_distances(&h, PeerId::SOURCE).unwrap();
    prop_assert!(dist.all_reachable());
    prop_assert!(t.distances_monotone(&dist));
    // v_1..v_{z^(h)(1)} all lie within h hops of the source
    for hops in 0..n {
        let reach = t.z_iterated(1, hops);
        let d = dist.get(t.order[reach - 1]).unwrap();
        prop_assert!(d as usize <= hops);
    }
    let d_star = dist.depth();
    let d_rev = bfs_distances(&reverse(&h), PeerId::SOURCE).unwrap().depth();
    let dia = diameter(&h).unwrap();
    prop_assert!(dia <= d_star + d_rev);
    prop_assert!(dia >= d_star.max(d_rev));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fgc_trace_invariants(seed in any::<u64>(), n in 2usize..120, q in 0.0f64..=1.0) {
        let t = fgc_construct(n, q, &mut seeded(seed)).unwrap();
        check_trace(&t)?;
    }

    #[test]
    fn fixed_tau_trace_invariants(seed in any::<u64>(), tau in proptest::collection::vec(any::<bool>(), 2..80)) {
        let t = fgc_construct_with_tau(tau.clone(), &mut seeded(seed)).unwrap();
        prop_assert_eq!(&t.tau, &tau);
        check_trace(&t)?;
    }

    #[test]
    fn bfs_agrees_with_floyd(seed in any::<u64>(), n in 2usize..40, q in 0.0f64..=1.0) {
        let g = fgc_construct(n, q, &mut seeded(seed)).unwrap().superpose();
        let oracle = floyd(&g);
        let d = bfs_distances(&g, PeerId::SOURCE).unwrap();
        for (i, &v) in g.nodes().iter().enumerate() {
            prop_assert_eq!(d.get(v), oracle[0][i]);
        }
        let dia = oracle.iter().flatten().map(|x| x.unwrap()).max().unwrap();
        prop_assert_eq!(diameter(&g), Some(dia));
    }

    #[test]
    fn reverse_is_an_involution(seed in any::<u64>(), n in 2usize..60) {
        let g = fgc_construct(n, 0.5, &mut trial_rng(seed, 1, 0)).unwrap().superpose();
        let rr = reverse(&reverse(&g));
        prop_assert_eq!(rr.to_edge_list(), g.to_edge_list());
        let fwd: BTreeSet<_> = g.edges().collect();
        let back: BTreeSet<_> = reverse(&g).edges().map(|(a, b)| (b, a)).collect();
        prop_assert_eq!(fwd, back);
    }

    #[test]
    fn flow_graphs_of_grown_overlays(seed in any::<u64>(), n in 2usize..50, m in 2usize..4, k in 3u32..6) {
        let mut rng = seeded(seed);
        let o = Overlay::grown(n, m, &mut rng).unwrap();
        let cfg = StreamConfig::with_default_schedule(m, k, PhasePolicy::Zero).unwrap();
        let mu: BTreeMap<PeerId, u32> = o.peers_sorted().into_iter().map(|v| (v, 1 + (v.0 % (k - 1)))).collect();
        for color in 1..k {
            let g = extract_flow_graph(&o, color, &cfg, &mu).unwrap();
            let extra = mu.values().filter(|&&c| c == color).count();
            prop_assert!(cfg.layer_for_color(color) < m);
            prop_assert_eq!(g.edge_count(), n + extra);
            prop_assert!(g.max_out_degree() <= 2);
            prop_assert!(bfs_distances(&g, PeerId::SOURCE).unwrap().all_reachable());
        }
    }
}
