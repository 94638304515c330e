use std::collections::{BTreeMap, BTreeSet};

use airground::gossip::NodeId;
use airground::network::{
    adjacency, budgets, gate, interference_components, pair, schedule_sessions, transfer_time, LinkModel, LinkTable,
    Pair,
};
use airground::world::Point;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_positions(rng: &mut ChaCha8Rng, n: u32, side: f64) -> BTreeMap<NodeId, Point> {
    (0..n)
        .map(|i| {
            (
                NodeId(i),
                Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)),
            )
        })
        .collect()
}

/// Sessions grouped by breadth-first search over the interference relation.
fn components_oracle(sessions: &BTreeSet<Pair>, pos: &BTreeMap<NodeId, Point>, r: f64) -> BTreeSet<BTreeSet<Pair>> {
    let near = |u: NodeId, v: NodeId| {
        let (p, q) = (pos[&u], pos[&v]);
        (p.x - q.x).hypot(p.y - q.y) <= r
    };
    let interferes = |s: Pair, t: Pair| [s.0, s.1].iter().any(|&u| [t.0, t.1].iter().any(|&v| near(u, v)));
    let mut left: Vec<Pair> = sessions.iter().copied().collect();
    let mut out = BTreeSet::new();
    while let Some(first) = left.pop() {
        let mut comp = BTreeSet::from([first]);
        let mut frontier = vec![first];
        while let Some(s) = frontier.pop() {
            let (hit, rest): (Vec<Pair>, Vec<Pair>) = left.iter().partition(|&&t| interferes(s, t));
            left = rest;
            frontier.extend(&hit);
            comp.extend(hit);
        }
        out.insert(comp);
    }
    out
}

fn model(r: f64) -> LinkModel {
    LinkModel {
        r_comm: r,
        t_assoc: 0.0,
        base_latency: 0.0,
        bandwidth: 1.0e6,
    }
}

#[test]
fn adjacency_matches_pairwise_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let pos = random_positions(&mut rng, 10, 200.0);
        let m = model(60.0);
        let mut expected = BTreeSet::new();
        for (&a, &pa) in &pos {
            for (&b, &pb) in &pos {
                if a < b && ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt() <= 60.0 {
                    expected.insert((a, b));
                }
            }
        }
        assert_eq!(adjacency(&pos, &m), expected);
    }
}

#[test]
fn single_node_has_no_pairs() {
    let pos = BTreeMap::from([(NodeId(4), Point::new(1.0, 1.0))]);
    assert!(adjacency(&pos, &model(10.0)).is_empty());
}

#[test]
fn uncontended_transfers_fit_their_ticks() {
    // A payload delivered over n uncontended ticks never beats transfer_time.
    let m = LinkModel {
        r_comm: 50.0,
        t_assoc: 0.0,
        base_latency: 0.01,
        bandwidth: 1.0e5,
    };
    let dt = 0.1;
    let pos = BTreeMap::from([(NodeId(0), Point::new(0.0, 0.0)), (NodeId(1), Point::new(1.0, 0.0))]);
    let sessions = BTreeSet::from([(NodeId(0), NodeId(1))]);
    let per_tick = budgets(&sessions, &pos, &m, dt)[&(NodeId(0), NodeId(1))];
    for bytes in [1u64, 500, 8_999, 9_000, 9_001, 50_000, 123_456] {
        let ticks = bytes.div_ceil(per_tick);
        assert!(ticks as f64 * dt + 1e-12 >= transfer_time(bytes, &m), "{bytes}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn stricter_association_never_adds_links(seed in any::<u64>(), t1 in 0.0f64..3.0, extra in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = LinkModel { t_assoc: t1, ..model(40.0) };
        let hi = LinkModel { t_assoc: t1 + extra, ..model(40.0) };
        let mut pos = random_positions(&mut rng, 6, 120.0);
        let (mut la, mut lb) = (LinkTable::default(), LinkTable::default());
        for k in 0..150 {
            let now = k as f64 * 0.1;
            for p in pos.values_mut() {
                p.x = (p.x + rng.gen_range(-4.0..4.0)).clamp(0.0, 120.0);
                p.y = (p.y + rng.gen_range(-4.0..4.0)).clamp(0.0, 120.0);
            }
            let adj = adjacency(&pos, &lo);
            let ua = gate(&mut la, &adj, now, &lo);
            let ub = gate(&mut lb, &adj, now, &hi);
            prop_assert!(ub.is_subset(&ua));
            prop_assert!(ua.is_subset(&adj));
            if t1 == 0.0 {
                prop_assert_eq!(&ua, &adj);
            }
        }
    }

    #[test]
    fn schedule_is_a_greedy_matching(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes: Vec<NodeId> = (0..8).map(NodeId).collect();
        let mut usable = BTreeSet::new();
        let mut staleness = BTreeMap::new();
        for i in 0..8 {
            for j in i + 1..8 {
                if rng.gen_bool(0.4) {
                    let p = (nodes[i], nodes[j]);
                    usable.insert(p);
                    let s = if rng.gen_bool(0.2) { f64::INFINITY } else { rng.gen_range(0..5) as f64 };
                    staleness.insert(p, s);
                }
            }
        }
        let busy: BTreeSet<NodeId> = nodes.iter().copied().filter(|_| rng.gen_bool(0.15)).collect();
        let out = schedule_sessions(&usable, &busy, &staleness);

        let mut seen = BTreeSet::new();
        for &(a, b) in &out {
            prop_assert!(usable.contains(&(a, b)));
            prop_assert!(!busy.contains(&a) && !busy.contains(&b));
            prop_assert!(seen.insert(a) && seen.insert(b), "node in two sessions");
        }
        // replay: walk candidates in key order, take each pair whose nodes are free
        let mut order: Vec<Pair> = usable.iter().copied().filter(|(a, b)| !busy.contains(a) && !busy.contains(b)).collect();
        order.sort_by(|x, y| staleness[y].total_cmp(&staleness[x]).then(x.cmp(y)));
        let mut taken = BTreeSet::new();
        let mut replay = BTreeSet::new();
        for (a, b) in order {
            if !taken.contains(&a) && !taken.contains(&b) {
                taken.extend([a, b]);
                replay.insert((a, b));
            }
        }
        prop_assert_eq!(out, replay);
    }

    #[test]
    fn budgets_conserve_airtime(seed in any::<u64>(), latency in 0.0f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = LinkModel { base_latency: latency, ..model(50.0) };
        let dt = 0.1;
        let pos = random_positions(&mut rng, 10, 300.0);
        let ids: Vec<NodeId> = pos.keys().copied().collect();
        let mut sessions = BTreeSet::new();
        let mut used = BTreeSet::new();
        for _ in 0..5 {
            let (a, b) = (ids[rng.gen_range(0..10)], ids[rng.gen_range(0..10)]);
            if a != b && !used.contains(&a) && !used.contains(&b) {
                used.extend([a, b]);
                sessions.insert(pair(a, b));
            }
        }
        let got = budgets(&sessions, &pos, &m, dt);
        prop_assert_eq!(got.len(), sessions.len());
        let airtime = (m.bandwidth * dt + 1e-6).floor() as u64;
        let latency_bytes = (m.bandwidth * m.base_latency + 1e-6).floor() as u64;
        let oracle = components_oracle(&sessions, &pos, m.r_comm);
        let mine: BTreeSet<BTreeSet<Pair>> = interference_components(&sessions, &pos, &m)
            .into_iter()
            .map(|c| c.into_iter().collect())
            .collect();
        prop_assert_eq!(&mine, &oracle);
        for comp in oracle {
            let comp: Vec<Pair> = comp.into_iter().collect();
            let total: u64 = comp.iter().map(|p| got[p]).sum();
            prop_assert!(total <= airtime);
            for p in &comp {
                prop_assert_eq!(got[p], (airtime / comp.len() as u64).saturating_sub(latency_bytes));
            }
            if comp.len() == 1 {
                prop_assert_eq!(got[&comp[0]], airtime.saturating_sub(latency_bytes));
            }
        }
    }

    #[test]
    fn relabeling_endpoints_changes_nothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = random_positions(&mut rng, 6, 100.0);
        let m = model(45.0);
        // swap the labels of two nodes
        let (i, j) = (NodeId(rng.gen_range(0..6)), NodeId(rng.gen_range(0..6)));
        let swap = |n: NodeId| if n == i { j } else if n == j { i } else { n };
        let swapped: BTreeMap<NodeId, Point> = pos.iter().map(|(&n, &p)| (swap(n), p)).collect();
        let adj = adjacency(&pos, &m);
        let adj2: BTreeSet<Pair> = adj.iter().map(|&(a, b)| pair(swap(a), swap(b))).collect();
        prop_assert_eq!(adjacency(&swapped, &m), adj2);

        let sessions = schedule_sessions(&adj, &BTreeSet::new(), &BTreeMap::new());
        let b1 = budgets(&sessions, &pos, &m, 0.1);
        let s2: BTreeSet<Pair> = sessions.iter().map(|&(a, b)| pair(swap(a), swap(b))).collect();
        let b2 = budgets(&s2, &swapped, &m, 0.1);
        for (&(a, b), &v) in &b1 {
            prop_assert_eq!(b2[&pair(swap(a), swap(b))], v);
        }
    }
}
