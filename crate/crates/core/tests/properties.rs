#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::VecDeque;

use common::{params, random_graph, rng, small_ladder, MODELS};
use fmd_core::centrality::betweenness_raw;
use fmd_core::{
    betweenness_centrality, brd_run, build_comm_graph, degree_vector, equilibrium_metrics, halve_graph,
    init_random, make_state, parse_temporal_edges, poa_pos, reference, so_search, verify_against,
    verify_step_stable, AltruismModel, CommGraph, NodeMetric, Objective, Profile, SearchOptions,
    StrategyLadder,
};
use proptest::prelude::*;
use rand::Rng;

fn graph_strategy(max_n: usize, max_edges: usize) -> impl Strategy<Value = CommGraph> {
    (1..=max_n).prop_flat_map(move |n| {
        prop::collection::vec((0..n, 0..n, 1u64..4), 0..=max_edges).prop_map(move |raw| {
            let labels = (0..n).map(|i| i.to_string()).collect();
            let edges = raw.into_iter().filter(|&(a, b, _)| a != b);
            CommGraph::from_weighted_edges(labels, edges, 0).unwrap()
        })
    })
}

fn edge_list_text(g: &CommGraph) -> String {
    let mut out = String::new();
    let mut t = 0;
    for e in g.edges() {
        for _ in 0..e.msg_count {
            out.push_str(&format!("{} {} {t}\n", g.labels()[e.src], g.labels()[e.dst]));
            t += 1;
        }
    }
    out
}

/// Betweenness by listing every shortest path between every unordered pair.
fn bc_by_path_enumeration(g: &CommGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in g.contacts(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        for t in (s + 1)..n {
            if dist[t] == usize::MAX {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(path) = stack.pop() {
                let last = *path.last().unwrap();
                if last == t {
                    paths.push(path);
                    continue;
                }
                for &w in g.contacts(last) {
                    if dist[w] == dist[last] + 1 && dist[w] <= dist[t] {
                        let mut next = path.clone();
                        next.push(w);
                        stack.push(next);
                    }
                }
            }
            let total = paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    bc[v] += 1.0 / total;
                }
            }
        }
    }
    let scale = if n < 3 {
        1.0
    } else {
        (n as f64 - 1.0) * (n as f64 - 2.0) / 2.0
    };
    bc.into_iter().map(|v| v / scale).collect()
}

fn pair_distance_sum(g: &CommGraph) -> f64 {
    let n = g.node_count();
    let mut sum = 0.0;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in g.contacts(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        for t in (s + 1)..n {
            if dist[t] != usize::MAX {
                sum += (dist[t] - 1) as f64;
            }
        }
    }
    sum
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn five_cycle_betweenness() {
    let labels = (0..5).map(|i| i.to_string()).collect();
    let g = CommGraph::from_weighted_edges(labels, (0..5).map(|i| (i, (i + 1) % 5, 1)), 0).unwrap();
    let bc = betweenness_centrality(&g);
    for (a, b) in bc.values.iter().zip(bc_by_path_enumeration(&g)) {
        assert!((a - b).abs() < 1e-12);
        assert!((a - 1.0 / 6.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn graph_invariants(g in graph_strategy(12, 40)) {
        let n = g.node_count();
        for u in 0..n {
            for &v in g.contacts(u) {
                prop_assert!(g.contacts(v).contains(&u));
                prop_assert!(v != u);
            }
        }
        prop_assert_eq!(g.in_msgs().iter().sum::<u64>(), g.total_messages());
        prop_assert_eq!(g.out_msgs().iter().sum::<u64>(), g.total_messages());

        let h = halve_graph(&g);
        prop_assert_eq!(h.node_count(), n.div_ceil(2));
        prop_assert_eq!(h.in_msgs().iter().sum::<u64>(), h.total_messages());
        for e in h.edges() {
            let (a, b) = (&h.labels()[e.src], &h.labels()[e.dst]);
            prop_assert!(g.edges().iter().any(|f| &g.labels()[f.src] == a && &g.labels()[f.dst] == b));
        }
        for u in 0..h.node_count() {
            for &v in h.contacts(u) {
                prop_assert!(h.contacts(v).contains(&u));
            }
        }
    }

    #[test]
    fn parse_build_is_deterministic(g in graph_strategy(10, 30)) {
        let text = edge_list_text(&g);
        let a = build_comm_graph(&parse_temporal_edges(text.as_bytes()).unwrap());
        let b = build_comm_graph(&parse_temporal_edges(text.as_bytes()).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn betweenness_matches_path_enumeration(g in graph_strategy(8, 20)) {
        let fast = betweenness_centrality(&g);
        for (a, b) in fast.values.iter().zip(bc_by_path_enumeration(&g)) {
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
        let raw_total: f64 = betweenness_raw(&g).iter().sum();
        prop_assert!((raw_total - pair_distance_sum(&g)).abs() <= 1e-9);
        let deg = degree_vector(&g);
        for u in 0..g.node_count() {
            prop_assert_eq!(deg.values[u], g.contacts(u).len() as f64);
        }
    }

    #[test]
    fn per_node_cost_bounds(seed in any::<u64>(), model_idx in 0usize..3, a in 0.0f64..2.0) {
        let mut r = rng(seed);
        let n = r.gen_range(2..30);
        let m = r.gen_range(1..120);
        let g = random_graph(&mut r, n, m);
        let loss = r.gen_range(1.0..1000.0);
        let f = r.gen_range(0.1..5.0);
        let p = params(&g, loss, f, StrategyLadder::standard(), MODELS[model_idx], a);
        let profile = init_random(&g, &p.ladder, seed);
        let s = make_state(&g, &p, profile.clone()).unwrap();
        for u in 0..n {
            let alpha = s.alphas()[u];
            prop_assert!(alpha > 0.0 && alpha <= 1.0);
            prop_assert!(s.privacy_costs()[u] >= 0.0 && s.privacy_costs()[u] <= loss);
            prop_assert!(s.bandwidth_costs()[u] >= f * g.in_msgs()[u] as f64 * (1.0 - 1e-15));
        }
        // welfare with no altruism is minus the social cost, exactly
        let selfish = params(&g, loss, f, StrategyLadder::standard(), AltruismModel::Selfish, 0.0);
        let b = make_state(&g, &selfish, profile).unwrap().cost_breakdown();
        prop_assert_eq!(b.welfare, -b.social_cost);
    }

    #[test]
    fn own_rate_leaves_own_privacy_alone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..20);
        let g = random_graph(&mut r, n, 60);
        let p = params(&g, 50.0, 1.0, StrategyLadder::standard(), AltruismModel::Selfish, 0.0);
        let profile = init_random(&g, &p.ladder, seed);
        let u = r.gen_range(0..n);
        let to = (profile.get(u) + 1 + r.gen_range(0..10)) % 11;
        let rates = reference::rates(&p, &profile);
        let mut moved = rates.clone();
        moved[u] = p.ladder.value(to);
        prop_assert_eq!(
            reference::privacy_cost(&g, &p, &rates, u),
            reference::privacy_cost(&g, &p, &moved, u)
        );
        // selfish gain is the bandwidth change alone
        let s = make_state(&g, &p, profile.clone()).unwrap();
        let gain = s.eval_unilateral_move(u, to, Objective::OwnUtility).unwrap();
        let others = (g.total_messages() - g.in_msgs()[u]) as f64;
        let expect = -(p.ladder.value(to) - p.ladder.value(profile.get(u))) * others;
        prop_assert!((gain - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn raising_others_lowers_alpha(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..15);
        let g = random_graph(&mut r, n, 40);
        let p = params(&g, 20.0, 1.0, StrategyLadder::standard(), AltruismModel::Selfish, 0.0);
        let profile = init_random(&g, &p.ladder, seed);
        let v = r.gen_range(0..n);
        prop_assume!(profile.get(v) < p.ladder.top());
        let mut up = profile.clone();
        up.0[v] += 1;
        let (before, after) = (reference::rates(&p, &profile), reference::rates(&p, &up));
        for u in (0..n).filter(|&u| u != v) {
            prop_assert!(reference::alpha(&after, u) < reference::alpha(&before, u));
            prop_assert!(
                reference::privacy_cost(&g, &p, &after, u) <= reference::privacy_cost(&g, &p, &before, u)
            );
        }
    }

    #[test]
    fn dynamics_trace_properties(seed in any::<u64>(), model_idx in 0usize..3) {
        let mut r = rng(seed);
        let n = r.gen_range(2..12);
        let m = r.gen_range(1..40);
        let g = random_graph(&mut r, n, m);
        let p = params(&g, r.gen_range(5.0..200.0), 1.0, StrategyLadder::standard(), MODELS[model_idx], 0.5);
        let start = init_random(&g, &p.ladder, seed);
        let opts = SearchOptions::default();
        for rec in [
            brd_run(&g, &p, start.clone(), &opts).unwrap(),
            so_search(&g, &p, start.clone(), &opts).unwrap(),
        ] {
            prop_assert!(rec.converged);
            prop_assert_eq!(rec.iterations, rec.trace.len());
            prop_assert_eq!(&rec.replay(&start).unwrap(), &rec.terminal);
            let mut profile = start.clone();
            for e in &rec.trace {
                prop_assert!(e.gain > opts.epsilon);
                profile.0[e.node] = e.new_idx;
                let direct = match rec.objective {
                    fmd_core::RunObjective::Nash => reference::utilities(&g, &p, &profile)[e.node],
                    fmd_core::RunObjective::Social => reference::welfare(&g, &p, &profile),
                };
                prop_assert!(rel_close(e.objective, direct, 1e-9), "{} vs {}", e.objective, direct);
            }
        }
    }

    #[test]
    fn selfish_dynamics_reach_zero(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..40);
        let m = r.gen_range(1..150);
        let g = random_graph(&mut r, n, m);
        // a node receiving every message pays the same bandwidth at any rate
        prop_assume!(g.in_msgs().iter().all(|&k| k < g.total_messages()));
        let p = params(&g, 1000.0, 1.0, StrategyLadder::standard(), AltruismModel::Selfish, 0.0);
        let rec = brd_run(&g, &p, init_random(&g, &p.ladder, seed), &SearchOptions::default()).unwrap();
        prop_assert_eq!(rec.terminal, Profile::uniform(n, 0));
    }

    #[test]
    fn reports_are_pure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 15, 50);
        let p = params(&g, 100.0, 1.0, StrategyLadder::standard(), AltruismModel::Local, 1.0);
        let profile = init_random(&g, &p.ladder, seed);
        let bc = betweenness_centrality(&g);
        let a = equilibrium_metrics(&g, &p, &profile, &bc).unwrap();
        let b = equilibrium_metrics(&g, &p, &profile, &bc).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ratio_of_optimum_with_itself(cost in 1e-6f64..1e9) {
        let r = poa_pos(&[cost], cost).unwrap();
        prop_assert_eq!((r.poa, r.pos), (1.0, 1.0));
    }
}

#[test]
fn brd_is_independent_of_thread_count() {
    let mut r = rng(11);
    let g = random_graph(&mut r, 120, 2000);
    let p = params(
        &g,
        500.0,
        1.0,
        StrategyLadder::standard(),
        AltruismModel::Global,
        0.1,
    );
    let start = init_random(&g, &p.ladder, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| brd_run(&g, &p, start.clone(), &SearchOptions::default()).unwrap())
    };
    let (one, many) = (run(1), run(4));
    assert_eq!(one.trace, many.trace);
    assert_eq!(one.terminal, many.terminal);
    assert_eq!(one.breakdown, many.breakdown);
}

#[test]
fn cached_state_survives_many_moves() {
    let mut r = rng(5);
    let g = random_graph(&mut r, 300, 6000);
    for model in MODELS {
        let p = params(&g, 3000.0, 1.0, StrategyLadder::standard(), model, 0.3);
        let mut s = make_state(&g, &p, init_random(&g, &p.ladder, 9)).unwrap();
        for _ in 0..10_000 {
            let u = r.gen_range(0..300);
            let cur = s.profile().get(u);
            let to = (cur + r.gen_range(1..11)) % 11;
            s.apply_move(u, to).unwrap();
        }
        let fresh = make_state(&g, &p, s.profile().clone()).unwrap();
        for u in 0..300 {
            assert!(rel_close(s.alphas()[u], fresh.alphas()[u], 1e-9));
            assert!(rel_close(s.privacy_costs()[u], fresh.privacy_costs()[u], 1e-9));
            assert!(rel_close(
                s.bandwidth_costs()[u],
                fresh.bandwidth_costs()[u],
                1e-9
            ));
        }
        assert!(rel_close(
            s.cost_breakdown().welfare,
            fresh.cost_breakdown().welfare,
            1e-9
        ));
        assert!(rel_close(
            s.cost_breakdown().welfare,
            reference::welfare(&g, &p, s.profile()),
            1e-9
        ));
    }
}

#[test]
fn log_domain_alpha_matches_product() {
    let mut r = rng(21);
    let g = random_graph(&mut r, 2000, 8000);
    let p = params(
        &g,
        100.0,
        1.0,
        StrategyLadder::standard(),
        AltruismModel::Selfish,
        0.0,
    );
    let profile = init_random(&g, &p.ladder, 1);
    let s = make_state(&g, &p, profile.clone()).unwrap();
    let rates = reference::rates(&p, &profile);
    for u in (0..2000).step_by(7) {
        assert!(rel_close(s.alphas()[u], reference::alpha(&rates, u), 1e-10));
    }
}

#[test]
fn random_init_frequencies() {
    let labels = (0..11_000).map(|i| i.to_string()).collect();
    let g = CommGraph::from_weighted_edges(labels, [], 0).unwrap();
    let ladder = StrategyLadder::standard();
    let hist = init_random(&g, &ladder, 77).histogram(&ladder);
    let (mean, sigma) = (1000.0, (11_000.0f64 * (1.0 / 11.0) * (10.0 / 11.0)).sqrt());
    for c in hist {
        assert!((c as f64 - mean).abs() <= 5.0 * sigma, "{c}");
    }
}

/// Single-step maximum-gain dynamics written directly against the direct
/// evaluator, with gains computed as utility differences.
fn simulate_steps(g: &CommGraph, p: &fmd_core::GameParams, start: Profile) -> (Profile, usize) {
    let top = p.ladder.top();
    let mut profile = start;
    let mut iters = 0;
    loop {
        let base = reference::utilities(g, p, &profile);
        let mut best: Option<(f64, usize, usize)> = None;
        for u in 0..g.node_count() {
            let i = profile.get(u);
            let mut options = Vec::new();
            if i < top {
                options.push(i + 1);
            }
            if i > 0 {
                options.push(i - 1);
            }
            for to in options {
                let mut q = profile.clone();
                q.0[u] = to;
                let gain = reference::utilities(g, p, &q)[u] - base[u];
                // ties within rounding keep the earlier candidate
                if gain > 1e-5 && best.is_none_or(|(b, _, _)| gain > b + 1e-9) {
                    best = Some((gain, u, to));
                }
            }
        }
        match best {
            Some((_, u, to)) => {
                profile.0[u] = to;
                iters += 1;
            }
            None => return (profile, iters),
        }
    }
}

#[test]
fn three_cycle_matches_step_simulator() {
    let labels = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let g = CommGraph::from_weighted_edges(labels, [(0, 1, 1), (1, 2, 1), (2, 0, 1)], 0).unwrap();
    let p = params(&g, 10.0, 1.0, small_ladder(), AltruismModel::Global, 1.0);
    let (want, iters) = simulate_steps(&g, &p, Profile::uniform(3, 0));
    let rec = brd_run(&g, &p, Profile::uniform(3, 0), &SearchOptions::default()).unwrap();
    assert_eq!(rec.terminal, want);
    assert_eq!(rec.iterations, iters);
    assert!(
        verify_step_stable(&g, &p, &rec.terminal, Objective::OwnUtility, 1e-5)
            .unwrap()
            .is_equilibrium()
    );
}

#[test]
fn random_small_instances_match_step_simulator() {
    let mut r = rng(99);
    for case in 0..100 {
        let n = r.gen_range(2..=4);
        let m = r.gen_range(1..8);
        let g = random_graph(&mut r, n, m);
        let model = MODELS[case % 3];
        let p = params(
            &g,
            r.gen_range(1.0..50.0),
            r.gen_range(0.1..2.0),
            small_ladder(),
            model,
            0.7,
        );
        let start = init_random(&g, &p.ladder, case as u64);
        let (want, iters) = simulate_steps(&g, &p, start.clone());
        let rec = brd_run(&g, &p, start, &SearchOptions::default()).unwrap();
        assert_eq!(rec.terminal, want, "case {case}");
        assert_eq!(rec.iterations, iters, "case {case}");
    }
}

#[test]
fn optimum_search_is_coordinate_optimal() {
    let mut r = rng(7);
    for case in 0..30 {
        let m = r.gen_range(2..10);
        let g = random_graph(&mut r, 4, m);
        let p = params(
            &g,
            r.gen_range(1.0..50.0),
            1.0,
            small_ladder(),
            MODELS[case % 3],
            1.0,
        );
        let rec = so_search(
            &g,
            &p,
            init_random(&g, &p.ladder, case as u64),
            &SearchOptions::default(),
        )
        .unwrap();
        let check = verify_against(&g, &p, &rec.terminal, Objective::Welfare, 1e-5, false).unwrap();
        assert!(check.is_equilibrium(), "case {case}: {:?}", check.violations);
    }
}

#[test]
fn metric_lengths_are_checked() {
    let mut r = rng(1);
    let g = random_graph(&mut r, 5, 10);
    let p = params(
        &g,
        10.0,
        1.0,
        StrategyLadder::standard(),
        AltruismModel::Selfish,
        0.0,
    );
    let short = NodeMetric {
        kind: fmd_core::MetricKind::Bc,
        values: vec![0.0; 4],
    };
    assert!(equilibrium_metrics(&g, &p, &Profile::uniform(5, 0), &short).is_err());
}

#[test]
fn three_cycle_oracle_matches_golden_table() {
    let golden: serde_json::Value = serde_json::from_str(include_str!("golden/cycle3_global.json")).unwrap();
    let labels = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let g = CommGraph::from_weighted_edges(labels, [(0, 1, 1), (1, 2, 1), (2, 0, 1)], 0).unwrap();
    let p = params(&g, 10.0, 1.0, small_ladder(), AltruismModel::Global, 1.0);
    let res = fmd_core::enumerate_oracle(&g, &p, 0.0).unwrap();
    let as_profiles = |key: &str| -> Vec<Profile> { serde_json::from_value(golden[key].clone()).unwrap() };
    assert_eq!(res.ne_profiles, as_profiles("ne_profiles"));
    assert_eq!(res.so_profiles, as_profiles("so_profiles"));
    let table: Vec<f64> = serde_json::from_value(golden["welfare"].clone()).unwrap();
    for (a, b) in res.welfare.iter().zip(&table) {
        assert!(rel_close(*a, *b, 1e-12), "{a} vs {b}");
    }
    assert!(rel_close(
        res.so_welfare,
        golden["so_welfare"].as_f64().unwrap(),
        1e-12
    ));
    for ne in &res.ne_profiles {
        assert!(fmd_core::verify_epsilon_ne(&g, &p, ne, 0.0, false)
            .unwrap()
            .is_equilibrium());
    }
}
