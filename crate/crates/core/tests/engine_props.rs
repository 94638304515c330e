mod common;

use std::collections::{BTreeMap, BTreeSet};

use airground::agents::{Claim, UavMode, UgvStatus};
use airground::engine::{
    events_csv, init, run, summarize, summary_json, tick, Comms, EngineError, Event, EventKind, MetricsLog, RobotStats,
    RunMeta, ScenarioConfig, WorldSource,
};
use airground::gossip::{MsgKey, NodeDb, NodeId, Payload, TopicId, TopicTable, EXPERIENCE, MAP_PATCH};
use airground::network::LinkModel;
use airground::world::{base_cost, Cell, Point};
use common::{small_scenario, write_world};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run_ticks(config: &ScenarioConfig) -> (Vec<Event>, airground::engine::SimState) {
    let mut state = init(config).unwrap();
    let mut events = Vec::new();
    while !state.finished() {
        events.extend(tick(&mut state));
    }
    (events, state)
}

#[test]
fn zero_dt_is_rejected_by_name() {
    let mut c = small_scenario(1);
    c.dt = 0.0;
    match init(&c) {
        Err(EngineError::Config(e)) => assert_eq!(e.field, "dt"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn init_is_deterministic() {
    let c = small_scenario(9);
    assert_eq!(init(&c).unwrap(), init(&c).unwrap());
}

#[test]
fn starts_are_distinct_and_traversable() {
    for seed in 0..20 {
        let mut c = small_scenario(seed);
        c.roster.ugv_count = 3;
        let state = init(&c).unwrap();
        let cells: BTreeSet<Cell> = state.ugvs.iter().map(|u| u.cell).collect();
        assert_eq!(cells.len(), 3);
        for &cell in &cells {
            let info = state.world.info(cell).unwrap();
            assert!(base_cost(info.label).is_finite() && !info.hazard);
        }
    }
}

#[test]
fn zero_duration_produces_nothing() {
    let c = ScenarioConfig {
        duration: 0.0,
        ..small_scenario(1)
    };
    let log = run(&c).unwrap();
    assert!(log.events.is_empty());
    let s = summarize(&log);
    assert_eq!(
        (s.goals_visited, s.goals_known, s.messages_created, s.sync_sessions),
        (0, 0, 0, 0)
    );
    assert_eq!(s.mean_time_to_goal, 0.0);
    assert_eq!(log.meta.end_time, 0.0);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let c = small_scenario(4);
    let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
    assert_eq!(a, b);
    assert_eq!(events_csv(&a.events), events_csv(&b.events));
    assert_eq!(summary_json(&summarize(&a)), summary_json(&summarize(&b)));
    assert!(!a.events.is_empty());
}

#[test]
fn replay_from_snapshot_repeats_events() {
    let c = small_scenario(2);
    let mut state = init(&c).unwrap();
    for _ in 0..400 {
        tick(&mut state);
    }
    let mut copy = state.clone();
    for _ in 0..300 {
        assert_eq!(tick(&mut state), tick(&mut copy));
    }
    assert_eq!(state, copy);
}

#[test]
fn stuck_team_only_explores_and_gossips() {
    let mut c = small_scenario(3);
    c.roster.policy.dual_role = false;
    let mut state = init(&c).unwrap();
    for u in &mut state.ugvs {
        u.status = UgvStatus::Stuck;
        u.path.clear();
        u.current_goal = None;
    }
    let positions: Vec<Point> = state.ugvs.iter().map(|u| u.position).collect();
    let mut created = 0;
    for _ in 0..600 {
        for e in tick(&mut state) {
            match e.kind {
                EventKind::MessageCreated { .. } => created += 1,
                EventKind::MessageDelivered { .. } | EventKind::SyncCompleted { .. } | EventKind::GoalKnown { .. } => {}
                other => panic!("unexpected event {other:?}"),
            }
        }
    }
    assert!(created > 0);
    assert_eq!(state.uav.mode, UavMode::Explore);
    assert!(state.uav.revealed_count() > 0);
    assert_eq!(state.ugvs.iter().map(|u| u.position).collect::<Vec<_>>(), positions);
}

#[test]
fn payload_bytes_wait_for_association() {
    let model = LinkModel {
        r_comm: 50.0,
        t_assoc: 1.0,
        base_latency: 0.0,
        bandwidth: 1.0e6,
    };
    let dt = 0.1;
    let k = 7u64;
    let mut a = NodeDb::new(NodeId(0), TopicTable::default());
    let mut b = NodeDb::new(NodeId(1), TopicTable::default());
    a.publish(
        EXPERIENCE,
        Payload::Experience {
            cell: Cell::new(1, 1),
            verdict: airground::gossip::Verdict::Lethal,
        },
        0.0,
    )
    .unwrap();
    let mut comms = Comms::default();
    let mut first_bytes = None;
    for t in 0..40u64 {
        let now = t as f64 * dt;
        let x = if t < k { 500.0 } else { 10.0 };
        let positions = BTreeMap::from([(NodeId(0), Point::new(0.0, 0.0)), (NodeId(1), Point::new(x, 0.0))]);
        let report = comms.exchange(&mut [&mut a, &mut b], &positions, &model, dt, now);
        if report.bytes_used > 0 && first_bytes.is_none() {
            first_bytes = Some(t);
        }
    }
    assert_eq!(first_bytes, Some(k + 10));
    assert_eq!(a.len(), b.len());
}

#[test]
fn adjacent_goal_is_reached_after_a_half_cell() {
    let dir = tempfile::tempdir().unwrap();
    let world = write_world(
        dir.path(),
        "w.json",
        &["RRRRR", "RRRRR", "RRRRR"],
        &[],
        &[[1, 0], [4, 0]],
    );
    let mut c = ScenarioConfig::new(10.0);
    c.world = WorldSource::File { path: world };
    c.roster.ugv_count = 1;
    c.roster.starts = Some(vec![Cell::new(0, 0)]);
    c.roster.ugv.speed_jitter = 0.0;
    c.prior_map = true;
    let speed = c.roster.ugv.speed;
    let log = run(&c).unwrap();
    let visits: BTreeMap<u32, f64> = log
        .events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::GoalVisited { goal, .. } => Some((goal, e.time)),
            _ => None,
        })
        .collect();
    // a cell is entered on crossing its boundary
    assert!((visits[&0] - 0.5 / speed).abs() <= c.dt + 1e-9, "{visits:?}");
    assert!(
        (visits[&1] - (visits[&0] + 3.0 / speed)).abs() <= c.dt + 1e-9,
        "{visits:?}"
    );
}

#[test]
fn causality_and_goal_conservation() {
    for seed in 1..4 {
        let c = small_scenario(seed);
        let log = run(&c).unwrap();
        let mut holders: BTreeMap<(NodeId, TopicId, u64), BTreeMap<NodeId, f64>> = BTreeMap::new();
        let mut syncs = 0;
        for e in &log.events {
            match e.kind {
                EventKind::MessageCreated { origin, topic, seq, .. } => {
                    holders.entry((origin, topic, seq)).or_default().insert(origin, e.time);
                }
                EventKind::MessageDelivered {
                    origin,
                    topic,
                    seq,
                    from,
                    to,
                    created_at,
                    delivered_at,
                } => {
                    assert!(created_at <= delivered_at && delivered_at == e.time);
                    let h = holders
                        .get_mut(&(origin, topic, seq))
                        .expect("delivered before created");
                    let t_from = *h.get(&from).expect("sender never held the message");
                    assert!(t_from <= e.time);
                    assert!(h.insert(to, e.time).is_none(), "delivered twice to {to}");
                }
                EventKind::SyncCompleted { .. } => syncs += 1,
                _ => {}
            }
        }
        assert!(syncs > 0);

        let visited: Vec<u32> = log
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::GoalVisited { goal, .. } => Some(goal),
                _ => None,
            })
            .collect();
        let unique: BTreeSet<u32> = visited.iter().copied().collect();
        assert_eq!(unique.len(), visited.len());
        assert!(unique.len() <= log.meta.goal_count);
        let times: Vec<f64> = log.events.iter().map(|e| e.time).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn knowledge_only_grows_and_claims_resolve() {
    let mut c = small_scenario(6);
    c.roster.ugv_count = 3;
    c.link = LinkModel {
        r_comm: 1.0e4,
        t_assoc: 0.0,
        base_latency: 0.0,
        bandwidth: 1.0e7,
    };
    let mut state = init(&c).unwrap();
    let mut known: Vec<Vec<bool>> = state
        .ugvs
        .iter()
        .map(|u| u.belief.cells().iter().map(|b| b.known).collect())
        .collect();
    while !state.finished() {
        tick(&mut state);
        for (u, prev) in state.ugvs.iter().zip(&mut known) {
            let now: Vec<bool> = u.belief.cells().iter().map(|b| b.known).collect();
            assert!(
                prev.iter().zip(&now).all(|(&p, &n)| !p || n),
                "robot {} forgot a cell",
                u.id
            );
            *prev = now;
        }
        for u in &state.ugvs {
            let Some(goal) = u.current_goal else { continue };
            if u.status != UgvStatus::Navigating {
                continue;
            }
            let seen = &u.claims_seen[&goal];
            let mine = seen
                .iter()
                .filter(|c| c.claimant == u.id)
                .map(|c| c.claim_time)
                .fold(f64::INFINITY, f64::min);
            let mine = Claim {
                claimant: u.id,
                claim_time: mine,
            };
            for other in seen {
                if other.claimant != u.id && !u.stuck_peers.contains(&other.claimant) {
                    assert!(!other.beats(&mine), "robot {} kept goal {goal} after losing it", u.id);
                }
            }
        }
    }
    assert!(!state.goals_visited.is_empty());
}

#[test]
fn stuck_robots_stay_put_but_keep_gossiping() {
    let mut found = false;
    for seed in 0..12 {
        let mut c = small_scenario(seed);
        c.roster.ugv_count = 3;
        c.world = WorldSource::Generate {
            params: {
                let mut p = airground::world::GeneratorParams::rural(80, 80, 6);
                p.hazard_density = 0.25;
                p.road_spacing = 0;
                p
            },
            seed: Some(seed),
        };
        let mut state = init(&c).unwrap();
        let mut frozen: BTreeMap<NodeId, (Point, Cell, usize)> = BTreeMap::new();
        let mut grew = false;
        while !state.finished() {
            let events = tick(&mut state);
            for e in &events {
                let robot = match e.kind {
                    EventKind::GoalVisited { robot, .. } => robot,
                    EventKind::Stuck { robot, .. } if frozen.contains_key(&robot) => robot,
                    _ => continue,
                };
                assert!(!frozen.contains_key(&robot), "stuck robot {robot} moved on");
            }
            for u in &state.ugvs {
                if let Some(&(p, cell, len)) = frozen.get(&u.id) {
                    assert_eq!((u.position, u.cell, u.status), (p, cell, UgvStatus::Stuck));
                    assert!(u.db.len() >= len);
                    grew |= u.db.len() > len;
                } else if u.status == UgvStatus::Stuck {
                    frozen.insert(u.id, (u.position, u.cell, u.db.len()));
                }
            }
        }
        if !frozen.is_empty() {
            found = true;
            assert!(grew, "stuck robots should still receive messages");
        }
    }
    assert!(found, "no robot got stuck in any seed");
}

#[test]
fn explore_only_reveals_the_same_prefix() {
    let dual = small_scenario(5);
    let mut solo = dual.clone();
    solo.roster.policy.dual_role = false;
    let patches = |c: &ScenarioConfig| -> (Vec<(f64, Payload)>, Option<f64>) {
        let (events, state) = run_ticks(c);
        let first_relay = events.iter().find_map(|e| match e.kind {
            EventKind::ModeChange { to: UavMode::Relay, .. } => Some(e.time),
            _ => None,
        });
        let topic = state.uav.db.topics().lookup(MAP_PATCH).unwrap().0;
        let list = (0..)
            .map_while(|seq| {
                state.uav.db.get(&MsgKey {
                    origin: state.uav.id,
                    topic,
                    seq,
                })
            })
            .map(|m| (m.header.created_at, m.payload.clone()))
            .collect();
        (list, first_relay)
    };
    let (a, relay) = patches(&dual);
    let (b, none) = patches(&solo);
    assert_eq!(none, None);
    let relay = relay.expect("the dual-role run relays");
    let prefix: Vec<_> = a.iter().filter(|(t, _)| *t <= relay).cloned().collect();
    assert!(!prefix.is_empty());
    assert_eq!(&b[..prefix.len()], &prefix[..]);
}

fn random_log(rng: &mut ChaCha8Rng) -> MetricsLog {
    let ugvs: Vec<NodeId> = (1..=3).map(NodeId).collect();
    let goal_count = rng.gen_range(0..6);
    let mut events = Vec::new();
    let mut t = 0.0;
    for _ in 0..rng.gen_range(0..60) {
        t += rng.gen_range(0..3) as f64 * 0.5;
        let robot = ugvs[rng.gen_range(0..3)];
        let node = NodeId(rng.gen_range(0..4));
        let kind = match rng.gen_range(0..7) {
            0 if goal_count > 0 => EventKind::GoalKnown {
                goal: rng.gen_range(0..goal_count as u32),
                robot,
            },
            1 if goal_count > 0 => EventKind::GoalVisited {
                goal: rng.gen_range(0..goal_count as u32),
                robot,
            },
            2 => EventKind::MessageCreated {
                origin: node,
                topic: TopicId(0),
                seq: 0,
                size: 8,
            },
            3 => EventKind::MessageDelivered {
                origin: node,
                topic: TopicId(0),
                seq: 0,
                from: node,
                to: NodeId(rng.gen_range(0..4)),
                created_at: t - rng.gen_range(0..10) as f64,
                delivered_at: t,
            },
            4 => EventKind::SyncCompleted {
                a: NodeId(0),
                b: robot,
                quality: 1.0,
            },
            5 => EventKind::ModeChange {
                uav: NodeId(0),
                from: UavMode::Explore,
                to: if rng.gen_bool(0.5) {
                    UavMode::Relay
                } else {
                    UavMode::Explore
                },
            },
            _ => EventKind::Stuck {
                robot,
                cell: Cell::new(0, 0),
            },
        };
        events.push(Event::new(t, kind));
    }
    let robots = ugvs
        .iter()
        .map(|&id| {
            let op = rng.gen_range(0..100) as f64;
            RobotStats {
                id,
                distance: 1.0,
                time_navigating: op * rng.gen_range(0.0..1.0),
                time_operational: op,
                stuck: rng.gen_bool(0.3),
                claim_conflicts: rng.gen_range(0..3),
                redundant_visits: 0,
            }
        })
        .collect();
    MetricsLog {
        meta: RunMeta {
            name: "r".into(),
            seed: 0,
            world_hash: "0".into(),
            dt: 0.1,
            duration: t,
            end_time: t,
            goal_count,
            ugv_ids: ugvs,
            uav_id: NodeId(0),
            dual_role: true,
        },
        events,
        samples: Vec::new(),
        robots,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn summary_matches_recount(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = random_log(&mut rng);
        let s = summarize(&log);

        let mut known: BTreeMap<u32, f64> = BTreeMap::new();
        let mut visited: BTreeMap<u32, f64> = BTreeMap::new();
        let mut lat = Vec::new();
        let (mut created, mut syncs, mut relays) = (0, 0, 0);
        for e in &log.events {
            match e.kind {
                EventKind::GoalKnown { goal, .. } => {
                    let k = known.entry(goal).or_insert(e.time);
                    *k = k.min(e.time);
                }
                EventKind::GoalVisited { goal, .. } => {
                    let v = visited.entry(goal).or_insert(e.time);
                    *v = v.min(e.time);
                }
                EventKind::MessageCreated { .. } => created += 1,
                EventKind::MessageDelivered { origin, to, created_at, delivered_at, .. } => {
                    if to != NodeId(0) && to != origin {
                        lat.push(delivered_at - created_at);
                    }
                }
                EventKind::SyncCompleted { .. } => syncs += 1,
                EventKind::ModeChange { to, .. } => relays += usize::from(to == UavMode::Relay),
                EventKind::Stuck { .. } => {}
            }
        }
        prop_assert_eq!(s.goals_known, known.len());
        prop_assert_eq!(s.goals_visited, visited.len());
        let ttg: Vec<f64> = visited.iter().map(|(g, t)| t - known.get(g).copied().unwrap_or(0.0)).collect();
        let mean = if ttg.is_empty() { 0.0 } else { ttg.iter().sum::<f64>() / ttg.len() as f64 };
        prop_assert!((s.mean_time_to_goal - mean).abs() < 1e-9);
        let complete = log.meta.goal_count > 0 && visited.len() == log.meta.goal_count;
        prop_assert_eq!(s.completion_time.is_some(), complete);
        if complete {
            prop_assert_eq!(s.completion_time.unwrap(), visited.values().copied().fold(0.0, f64::max));
        }
        prop_assert_eq!(s.delivery_latency.count, lat.len());
        if !lat.is_empty() {
            lat.sort_by(f64::total_cmp);
            let median = lat[lat.len().div_ceil(2) - 1];
            prop_assert_eq!(s.delivery_latency.p50, median);
            prop_assert_eq!(s.delivery_latency.max, *lat.last().unwrap());
        }
        prop_assert_eq!((s.messages_created, s.sync_sessions, s.relay_phases), (created, syncs, relays));
        prop_assert_eq!(s.stuck_robots, log.robots.iter().filter(|r| r.stuck).count());
        let nav: f64 = log.robots.iter()
            .map(|r| if r.time_operational > 0.0 { r.time_navigating / r.time_operational } else { 0.0 })
            .sum::<f64>() / 3.0;
        prop_assert!((s.navigating_fraction - nav).abs() < 1e-12);
    }
}
