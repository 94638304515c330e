#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use airground::engine::{ScenarioConfig, WorldSource};
use airground::gossip::{Message, MsgHeader, NodeDb, NodeId, Payload, TopicId, TopicTable, Verdict};
use airground::world::{Cell, GeneratorParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// A quick scenario on an 80x80 world: two UGVs, short phases so the UAV
/// relays a few times within two minutes.
pub fn small_scenario(seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(120.0);
    c.name = "small".into();
    c.seed = seed;
    c.world = WorldSource::Generate {
        params: GeneratorParams::rural(80, 80, 4),
        seed: Some(5),
    };
    c.roster.ugv_count = 2;
    c.roster.policy.t_explore = 30.0;
    c.roster.policy.t_relay = 20.0;
    c.roster.policy.min_explore = 10.0;
    c.roster.policy.s_max = 40.0;
    c.link.base_latency = 0.01;
    c
}

/// Writes a world file and returns its path.
pub fn write_world(dir: &Path, name: &str, rows: &[&str], hazards: &[[i32; 2]], goals: &[[i32; 2]]) -> PathBuf {
    let doc = serde_json::json!({
        "width": rows[0].len(),
        "height": rows.len(),
        "resolution": 1.0,
        "rows": rows,
        "hazards": hazards,
        "goals": goals,
    });
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

/// A message with an arbitrary header, as if originated elsewhere.
pub fn foreign(origin: u32, topic: u16, seq: u64, priority: i32, created_at: f64, size_cells: usize) -> Message {
    let payload = if size_cells == 0 {
        Payload::Experience {
            cell: Cell::new(seq as i32, topic as i32),
            verdict: Verdict::MeasuredCost(1.0 + origin as f64),
        }
    } else {
        Payload::MapPatch {
            cells: vec![(Cell::new(0, 0), airground::world::TerrainLabel::Road); size_cells],
            goals: vec![],
        }
    };
    let header = MsgHeader {
        origin: NodeId(origin),
        topic: TopicId(topic),
        seq,
        priority,
        created_at,
        payload_size: payload.wire_size(),
        payload_hash: payload.digest(),
    };
    Message { header, payload }
}

/// A pool of up to `max` distinct messages and two databases that each hold a
/// random subset of it.
pub fn random_pair(rng: &mut ChaCha8Rng, max: usize) -> (NodeDb, NodeDb) {
    let n = rng.gen_range(0..=max);
    let mut a = NodeDb::new(NodeId(1), TopicTable::default());
    let mut b = NodeDb::new(NodeId(2), TopicTable::default());
    let mut next_seq: BTreeMap<(u32, u16), u64> = BTreeMap::new();
    for _ in 0..n {
        let origin = rng.gen_range(0..6);
        let topic = rng.gen_range(0..5);
        let seq = next_seq.entry((origin, topic)).or_insert(0);
        let m = foreign(
            origin,
            topic,
            *seq,
            rng.gen_range(0..4),
            rng.gen_range(0..100) as f64 * 0.5,
            rng.gen_range(0..40),
        );
        *seq += 1;
        match rng.gen_range(0..3) {
            0 => {
                a.insert_remote(m);
            }
            1 => {
                b.insert_remote(m);
            }
            _ => {
                a.insert_remote(m.clone());
                b.insert_remote(m);
            }
        }
    }
    (a, b)
}

/// Shortest path by repeated relaxation over every directed edge of the
/// 8-connected grid until nothing changes.
pub fn bellman_ford(costs: &[f64], w: usize, h: usize, start: Cell, goal: Cell, resolution: f64) -> f64 {
    let idx = |c: Cell| c.y as usize * w + c.x as usize;
    if !costs[idx(start)].is_finite() || !costs[idx(goal)].is_finite() {
        return f64::INFINITY;
    }
    let mut edges = Vec::new();
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    let (u, v) = (idx(Cell::new(x, y)), idx(Cell::new(nx, ny)));
                    if !costs[u].is_finite() || !costs[v].is_finite() {
                        continue;
                    }
                    let len = if dx != 0 && dy != 0 { 2f64.sqrt() } else { 1.0 } * resolution;
                    edges.push((u, v, len * 0.5 * (costs[u] + costs[v])));
                }
            }
        }
    }
    let mut dist = vec![f64::INFINITY; w * h];
    dist[idx(start)] = 0.0;
    for _ in 0..w * h {
        let mut changed = false;
        for &(u, v, c) in &edges {
            if dist[u] + c < dist[v] {
                dist[v] = dist[u] + c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist[idx(goal)]
}
