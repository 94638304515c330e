use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::comms::Comms;
use super::config::{ConfigError, ScenarioConfig, WorldSource};
use super::events::{Event, EventKind};
use super::metrics::{MetricsLog, RobotStats, RunMeta, Sample};
use crate::agents::{UavState, UgvState, UgvStatus};
use crate::gossip::{Message, NodeDb, NodeId};
use crate::world::{generate_world, load_world, Cell, GridWorld, Point};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The UAV is node 0; UGVs are nodes 1..=n.
pub const UAV_ID: NodeId = NodeId(0);

/// Stable per-stream seed derived from the master seed.
pub fn stream_seed(master: u64, tag: &str, id: u32) -> u64 {
    crate::digest64(format!("{master}:{tag}:{id}").as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub config: ScenarioConfig,
    pub world: GridWorld,
    pub tick_index: u64,
    pub time: f64,
    pub uav: UavState,
    pub ugvs: Vec<UgvState>,
    pub comms: Comms,
    /// Goals known to at least one UGV.
    pub goals_known: BTreeSet<u32>,
    /// Goals visited at least once.
    pub goals_visited: BTreeSet<u32>,
    pub redundant_visits: BTreeMap<NodeId, u32>,
    pub samples: Vec<Sample>,
    next_sample: f64,
}

fn build_world(config: &ScenarioConfig) -> Result<GridWorld, EngineError> {
    match &config.world {
        WorldSource::Generate { params, seed } => generate_world(params, seed.unwrap_or(config.seed))
            .map_err(|e| ConfigError::new("world.params", e.to_string()).into()),
        WorldSource::File { path } => {
            let bytes = fs::read(path).map_err(|source| EngineError::Io {
                path: path.clone(),
                source,
            })?;
            load_world(&bytes).map_err(|e| ConfigError::new("world.path", format!("{}: {e}", path.display())).into())
        }
    }
}

/// Finite-cost, hazard-free cells reachable from the cell nearest the
/// origin, in breadth-first order.
fn staging_candidates(world: &GridWorld, limit: usize) -> Vec<Cell> {
    let free = |c: Cell| {
        world
            .info(c)
            .is_some_and(|i| !i.hazard && world.traversal_outcome(c).is_ok() && base_finite(world, c))
    };
    let Some(seed) = (0..world.width().max(world.height()) as i32)
        .flat_map(|r| (0..=r).flat_map(move |k| [Cell::new(k, r), Cell::new(r, k)]))
        .find(|&c| free(c))
    else {
        return Vec::new();
    };
    let mut seen = BTreeSet::from([seed]);
    let mut queue = VecDeque::from([seed]);
    let mut out = Vec::new();
    while let Some(c) = queue.pop_front() {
        out.push(c);
        if out.len() >= limit {
            break;
        }
        for (dx, dy) in [(1, 0), (0, 1), (-1, 0), (0, -1)] {
            let n = Cell::new(c.x + dx, c.y + dy);
            if free(n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    out
}

fn base_finite(world: &GridWorld, c: Cell) -> bool {
    world.label(c).is_some_and(|l| crate::world::base_cost(l).is_finite())
}

fn choose_starts(world: &GridWorld, count: usize, seed: u64) -> Result<Vec<Cell>, ConfigError> {
    let mut candidates = staging_candidates(world, (count * 32).max(128));
    if candidates.len() < count {
        return Err(ConfigError::new(
            "roster.ugv_count",
            format!("only {} free start cells near the origin", candidates.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "starts", 0));
    candidates.shuffle(&mut rng);
    let mut chosen: Vec<Cell> = Vec::new();
    for min_gap in [3, 1] {
        chosen.clear();
        for &c in &candidates {
            if chosen
                .iter()
                .all(|o| (o.x - c.x).abs().max((o.y - c.y).abs()) >= min_gap)
            {
                chosen.push(c);
                if chosen.len() == count {
                    return Ok(chosen);
                }
            }
        }
    }
    unreachable!("distinct candidates always satisfy a gap of one")
}

/// Builds the initial simulation state.
pub fn init(config: &ScenarioConfig) -> Result<SimState, EngineError> {
    config.validate()?;
    let world = build_world(config)?;
    let roster = &config.roster;
    let starts = match &roster.starts {
        Some(starts) => {
            let mut seen = BTreeSet::new();
            for (i, &c) in starts.iter().enumerate() {
                let field = format!("roster.starts[{i}]");
                let label = world
                    .label(c)
                    .ok_or_else(|| ConfigError::new(&field, format!("({}, {}) is outside the world", c.x, c.y)))?;
                if !config.costs.cost(label).is_finite() {
                    return Err(ConfigError::new(field, "start cell is not traversable").into());
                }
                if !seen.insert(c) {
                    return Err(ConfigError::new(field, "start cells must be distinct").into());
                }
            }
            starts.clone()
        }
        None => choose_starts(&world, roster.ugv_count, config.seed)?,
    };
    let ugv_ids: Vec<NodeId> = (1..=roster.ugv_count as u32).map(NodeId).collect();
    let mut ugvs: Vec<UgvState> = ugv_ids
        .iter()
        .zip(&starts)
        .map(|(&id, &start)| {
            UgvState::new(
                id,
                &world,
                start,
                roster.ugv,
                config.costs,
                config.topics.clone(),
                stream_seed(config.seed, "ugv", id.0),
            )
        })
        .collect();
    let mut goals_known = BTreeSet::new();
    if config.prior_map {
        for u in &mut ugvs {
            u.preload_map(&world);
        }
        goals_known.extend(world.goals().iter().map(|g| g.id));
    }
    let uav = UavState::new(
        UAV_ID,
        &world,
        ugv_ids,
        roster.policy,
        roster.uav,
        config.topics.clone(),
    );
    Ok(SimState {
        config: config.clone(),
        world,
        tick_index: 0,
        time: 0.0,
        uav,
        ugvs,
        comms: Comms::default(),
        goals_known,
        goals_visited: BTreeSet::new(),
        redundant_visits: BTreeMap::new(),
        samples: Vec::new(),
        next_sample: 0.0,
    })
}

impl SimState {
    pub fn node_ids(&self) -> Vec<NodeId> {
        std::iter::once(self.uav.id)
            .chain(self.ugvs.iter().map(|u| u.id))
            .collect()
    }

    pub fn positions(&self) -> BTreeMap<NodeId, Point> {
        std::iter::once((self.uav.id, self.uav.position))
            .chain(self.ugvs.iter().map(|u| (u.id, u.position)))
            .collect()
    }

    pub fn db(&self, id: NodeId) -> &NodeDb {
        if id == UAV_ID {
            &self.uav.db
        } else {
            &self.ugvs[id.0 as usize - 1].db
        }
    }

    pub fn all_visited(&self) -> bool {
        !self.world.goals().is_empty() && self.goals_visited.len() == self.world.goals().len()
    }

    pub fn finished(&self) -> bool {
        let ticks = (self.config.duration / self.config.dt - 1e-9).ceil().max(0.0) as u64;
        self.tick_index >= ticks || (self.config.stop_when_all_visited && self.all_visited())
    }

    fn record_ugv_events(&mut self, raw: Vec<Event>, out: &mut Vec<Event>) {
        for e in raw {
            if let EventKind::GoalVisited { goal, robot } = e.kind {
                if !self.goals_visited.insert(goal) {
                    *self.redundant_visits.entry(robot).or_default() += 1;
                    continue;
                }
            }
            out.push(e);
        }
    }

    fn robot_stats(&self) -> Vec<RobotStats> {
        self.ugvs
            .iter()
            .map(|u| RobotStats {
                id: u.id,
                distance: u.distance_traveled,
                time_navigating: u.time_navigating,
                time_operational: u.time_operational,
                stuck: u.status == UgvStatus::Stuck,
                claim_conflicts: u.claim_conflicts,
                redundant_visits: self.redundant_visits.get(&u.id).copied().unwrap_or(0),
            })
            .collect()
    }
}

/// Advances the simulation by one `dt`. Phases run in a fixed order:
/// decisions, motion, gating, scheduling, transfer, merge, sampling.
pub fn tick(state: &mut SimState) -> Vec<Event> {
    let dt = state.config.dt;
    let now = state.time;
    let next = (state.tick_index + 1) as f64 * dt;
    let mut events = Vec::new();

    // 1. decisions
    let stalenesses: BTreeMap<NodeId, f64> = state
        .ugvs
        .iter()
        .map(|u| (u.id, state.uav.db.staleness(u.id, now)))
        .collect();
    events.extend(state.uav.decide(&stalenesses, now));
    for i in 0..state.ugvs.len() {
        let raw = state.ugvs[i].decide(now);
        state.record_ugv_events(raw, &mut events);
    }

    // 2. motion
    for i in 0..state.ugvs.len() {
        let raw = state.ugvs[i].advance(&state.world, dt, next);
        state.record_ugv_events(raw, &mut events);
    }
    events.extend(state.uav.advance(&state.world, dt, next));

    // 3-5. gating, scheduling and budgets, transfer
    let positions = state.positions();
    let report = {
        let SimState {
            uav,
            ugvs,
            comms,
            config,
            ..
        } = &mut *state;
        let mut dbs: Vec<&mut NodeDb> = std::iter::once(&mut uav.db)
            .chain(ugvs.iter_mut().map(|u| &mut u.db))
            .collect();
        comms.exchange(&mut dbs, &positions, &config.link, dt, next)
    };
    let mut inbound: BTreeMap<NodeId, Vec<Message>> = BTreeMap::new();
    for d in &report.deliveries {
        let msg = state
            .db(d.to)
            .get(&d.header.key())
            .expect("delivered messages are stored")
            .clone();
        inbound.entry(d.to).or_default().push(msg);
        events.push(Event::new(
            next,
            EventKind::MessageDelivered {
                origin: d.header.origin,
                topic: d.header.topic,
                seq: d.header.seq,
                from: d.from,
                to: d.to,
                created_at: d.header.created_at,
                delivered_at: next,
            },
        ));
    }
    for &((a, b), quality) in &report.completed {
        events.push(Event::new(next, EventKind::SyncCompleted { a, b, quality }));
    }
    for &(a, b) in report.completed.iter().map(|(p, _)| p).chain(&report.in_sync) {
        if a == UAV_ID {
            state.uav.on_sync_completed(b);
        }
    }

    // 6. merge
    for (to, msgs) in inbound {
        if to == UAV_ID {
            state.uav.absorb(&msgs);
            continue;
        }
        let ugv = &mut state.ugvs[to.0 as usize - 1];
        for goal in ugv.absorb(&msgs, next) {
            if state.goals_known.insert(goal) {
                events.push(Event::new(next, EventKind::GoalKnown { goal, robot: to }));
            }
        }
    }

    // 7. sampling
    state.tick_index += 1;
    state.time = next;
    if next + 1e-9 >= state.next_sample {
        while next + 1e-9 >= state.next_sample {
            state.next_sample += state.config.sample_period;
        }
        for (node, p) in state.positions() {
            state.samples.push(Sample {
                time: next,
                node,
                x: p.x,
                y: p.y,
            });
        }
    }
    events
}

/// Runs a scenario to its deadline (or until every goal is visited when so
/// configured).
pub fn run(config: &ScenarioConfig) -> Result<MetricsLog, EngineError> {
    let mut state = init(config)?;
    let mut events = Vec::new();
    if config.prior_map {
        for &g in &state.goals_known {
            events.push(Event::new(
                0.0,
                EventKind::GoalKnown {
                    goal: g,
                    robot: state.ugvs[0].id,
                },
            ));
        }
    }
    while !state.finished() {
        events.extend(tick(&mut state));
    }
    Ok(finish(state, events))
}

/// Packages a finished state and its events into a metrics log.
pub fn finish(state: SimState, events: Vec<Event>) -> MetricsLog {
    let meta = RunMeta {
        name: state.config.name.clone(),
        seed: state.config.seed,
        world_hash: format!("{:016x}", state.world.fingerprint()),
        dt: state.config.dt,
        duration: state.config.duration,
        end_time: state.time,
        goal_count: state.world.goals().len(),
        ugv_ids: state.ugvs.iter().map(|u| u.id).collect(),
        uav_id: state.uav.id,
        dual_role: state.config.roster.policy.dual_role,
    };
    MetricsLog {
        robots: state.robot_stats(),
        meta,
        events,
        samples: state.samples,
    }
}
