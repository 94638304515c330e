use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::events::{Event, EventKind};
use crate::agents::UavMode;
use crate::gossip::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub name: String,
    pub seed: u64,
    pub world_hash: String,
    pub dt: f64,
    pub duration: f64,
    pub end_time: f64,
    pub goal_count: usize,
    pub ugv_ids: Vec<NodeId>,
    pub uav_id: NodeId,
    pub dual_role: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub node: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotStats {
    pub id: NodeId,
    pub distance: f64,
    pub time_navigating: f64,
    pub time_operational: f64,
    pub stuck: bool,
    pub claim_conflicts: u32,
    /// Arrivals at goals some other robot had already visited.
    pub redundant_visits: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub meta: RunMeta,
    pub events: Vec<Event>,
    pub samples: Vec<Sample>,
    pub robots: Vec<RobotStats>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles; all zeros for an empty sample.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Percentiles::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| {
            let r = (p / 100.0 * v.len() as f64).ceil() as usize;
            v[r.clamp(1, v.len()) - 1]
        };
        Percentiles {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: rank(50.0),
            p90: rank(90.0),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSummary {
    pub id: NodeId,
    pub goals: u32,
    pub distance: f64,
    pub navigating_fraction: f64,
    pub stuck: bool,
    pub claim_conflicts: u32,
    pub redundant_visits: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub name: String,
    pub seed: u64,
    pub world_hash: String,
    pub end_time: f64,
    pub goals_total: usize,
    pub goals_known: usize,
    pub goals_visited: usize,
    /// Time of the last first-visit when every goal was visited.
    pub completion_time: Option<f64>,
    /// Visit time minus the time the goal first became known to any UGV.
    pub time_to_goal: BTreeMap<u32, f64>,
    pub mean_time_to_goal: f64,
    pub robots: Vec<RobotSummary>,
    /// Mean over robots of navigating time over non-stuck time.
    pub navigating_fraction: f64,
    pub stuck_robots: usize,
    pub claim_conflicts: u32,
    /// Per-hop delay for messages reaching a UGV other than their origin.
    pub delivery_latency: Percentiles,
    pub messages_created: usize,
    pub sync_sessions: usize,
    pub relay_phases: usize,
}

/// Recomputes summary statistics from the raw event log.
pub fn summarize(log: &MetricsLog) -> SummaryRecord {
    let ugvs: BTreeSet<NodeId> = log.meta.ugv_ids.iter().copied().collect();
    let mut known: BTreeMap<u32, f64> = BTreeMap::new();
    let mut visits: BTreeMap<u32, (f64, NodeId)> = BTreeMap::new();
    let mut latencies = Vec::new();
    let mut created = 0;
    let mut syncs = 0;
    let mut relays = 0;
    for e in &log.events {
        match e.kind {
            EventKind::GoalKnown { goal, .. } => {
                known.entry(goal).or_insert(e.time);
            }
            EventKind::GoalVisited { goal, robot } => {
                visits.entry(goal).or_insert((e.time, robot));
            }
            EventKind::MessageCreated { .. } => created += 1,
            EventKind::MessageDelivered {
                origin,
                to,
                created_at,
                delivered_at,
                ..
            } => {
                if ugvs.contains(&to) && to != origin {
                    latencies.push(delivered_at - created_at);
                }
            }
            EventKind::SyncCompleted { .. } => syncs += 1,
            EventKind::ModeChange { to: UavMode::Relay, .. } => relays += 1,
            EventKind::ModeChange { .. } | EventKind::Stuck { .. } => {}
        }
    }
    let time_to_goal: BTreeMap<u32, f64> = visits
        .iter()
        .map(|(&g, &(t, _))| (g, t - known.get(&g).copied().unwrap_or(0.0)))
        .collect();
    let mean_time_to_goal = if time_to_goal.is_empty() {
        0.0
    } else {
        time_to_goal.values().sum::<f64>() / time_to_goal.len() as f64
    };
    let goal_total = log.meta.goal_count;
    let completion_time =
        (goal_total > 0 && visits.len() == goal_total).then(|| visits.values().map(|v| v.0).fold(0.0, f64::max));

    let robots: Vec<RobotSummary> = log
        .robots
        .iter()
        .map(|r| RobotSummary {
            id: r.id,
            goals: visits.values().filter(|v| v.1 == r.id).count() as u32,
            distance: r.distance,
            navigating_fraction: if r.time_operational > 0.0 {
                r.time_navigating / r.time_operational
            } else {
                0.0
            },
            stuck: r.stuck,
            claim_conflicts: r.claim_conflicts,
            redundant_visits: r.redundant_visits,
        })
        .collect();
    let navigating_fraction = if robots.is_empty() {
        0.0
    } else {
        robots.iter().map(|r| r.navigating_fraction).sum::<f64>() / robots.len() as f64
    };

    SummaryRecord {
        name: log.meta.name.clone(),
        seed: log.meta.seed,
        world_hash: log.meta.world_hash.clone(),
        end_time: log.meta.end_time,
        goals_total: goal_total,
        goals_known: known.len(),
        goals_visited: visits.len(),
        completion_time,
        time_to_goal,
        mean_time_to_goal,
        stuck_robots: robots.iter().filter(|r| r.stuck).count(),
        claim_conflicts: robots.iter().map(|r| r.claim_conflicts).sum(),
        robots,
        navigating_fraction,
        delivery_latency: Percentiles::of(&latencies),
        messages_created: created,
        sync_sessions: syncs,
        relay_phases: relays,
    }
}

fn fmt_time(t: f64) -> String {
    format!("{t:.3}")
}

/// Events as CSV with columns `time,kind,data`; `data` holds `key=value`
/// pairs separated by `;`.
pub fn events_csv(events: &[Event]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "kind", "data"]).expect("in-memory write");
    for e in events {
        let data = e
            .kind
            .fields()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([fmt_time(e.time).as_str(), e.kind.name(), data.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Position samples as CSV with columns `time,node,x,y`.
pub fn samples_csv(samples: &[Sample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "node", "x", "y"]).expect("in-memory write");
    for s in samples {
        w.write_record([
            fmt_time(s.time),
            s.node.to_string(),
            format!("{:.3}", s.x),
            format!("{:.3}", s.y),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn summary_json(summary: &SummaryRecord) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serialization cannot fail");
    s.push('\n');
    s
}
