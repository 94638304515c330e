//! Aerial robot: lawnmower survey that reveals terrain labels and goals, and
//! an explore/relay mode machine that turns the UAV into a data mule.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Event, EventKind};
use crate::gossip::{Message, NodeDb, NodeId, Payload, TopicTable, MAP_PATCH};
use crate::world::{Cell, GridWorld, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UavMode {
    Explore,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavPolicy {
    /// Exploration time after which the UAV switches to relaying.
    pub t_explore: f64,
    /// Maximum length of a relay phase.
    pub t_relay: f64,
    /// Staleness towards any ground robot that forces an early relay phase.
    pub s_max: f64,
    /// Minimum exploration time before the staleness trigger may fire again.
    pub min_explore: f64,
    pub dual_role: bool,
}

impl Default for UavPolicy {
    fn default() -> Self {
        UavPolicy {
            t_explore: 120.0,
            t_relay: 90.0,
            s_max: 150.0,
            min_explore: 20.0,
            dual_role: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavParams {
    pub speed: f64,
    pub sensor_radius: f64,
    /// Seconds between footprint captures.
    pub sensor_period: f64,
}

impl Default for UavParams {
    fn default() -> Self {
        UavParams {
            speed: 10.0,
            sensor_radius: 40.0,
            sensor_period: 1.0,
        }
    }
}

/// All cells whose centers lie within `radius` of `center`, with their true
/// labels, plus the goals on those cells. Cells come in row-major order.
pub fn reveal_footprint(world: &GridWorld, center: Point, radius: f64) -> Payload {
    let res = world.resolution();
    let x0 = (((center.x - radius) / res).floor() as i64).max(0);
    let y0 = (((center.y - radius) / res).floor() as i64).max(0);
    let x1 = (((center.x + radius) / res).ceil() as i64).min(world.width() as i64 - 1);
    let y1 = (((center.y + radius) / res).ceil() as i64).min(world.height() as i64 - 1);
    let mut cells = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = Cell::new(x as i32, y as i32);
            if world.center(c).dist(center) <= radius {
                cells.push((c, world.cells()[world.index(c).expect("clamped to bounds")].label));
            }
        }
    }
    let goals = world
        .goals()
        .iter()
        .filter(|g| world.center(g.cell).dist(center) <= radius)
        .copied()
        .collect();
    Payload::MapPatch { cells, goals }
}

/// Back-and-forth stripes along x, spaced `1.5 * sensor_radius` apart,
/// starting at the origin corner and covering the whole extent.
pub fn lawnmower(extent: (f64, f64), sensor_radius: f64) -> Vec<Point> {
    let (w, h) = extent;
    let spacing = 1.5 * sensor_radius;
    let mut points = Vec::new();
    let mut y = (spacing / 2.0).min(h);
    let mut forward = true;
    loop {
        let (a, b) = if forward { (0.0, w) } else { (w, 0.0) };
        points.push(Point::new(a, y));
        points.push(Point::new(b, y));
        if y + sensor_radius >= h {
            break;
        }
        y = (y + spacing).min(h);
        forward = !forward;
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: NodeId,
    pub position: Point,
    pub mode: UavMode,
    pub lawnmower: Vec<Point>,
    pub cursor: usize,
    pub explore_timer: f64,
    pub relay_timer: f64,
    /// Remaining relay stops: robot and its last known position.
    pub tour: Vec<(NodeId, Point)>,
    pub db: NodeDb,
    pub policy: UavPolicy,
    pub params: UavParams,
    /// Best position estimate for each ground robot and the time it refers
    /// to. Status reports give positions; claims and visits place the robot
    /// at a goal.
    pub last_known: BTreeMap<NodeId, (Point, f64)>,
    pub ground_ids: Vec<NodeId>,
    pub mode_changes: u32,
    revealed: Vec<bool>,
    revealed_goals: BTreeSet<u32>,
    goal_points: BTreeMap<u32, Point>,
    /// Estimate time of positions where a relay stop found nobody.
    failed: BTreeMap<NodeId, f64>,
    stop_timer: f64,
    stop_timeout: f64,
    next_sensor: f64,
}

impl UavState {
    pub fn new(
        id: NodeId,
        world: &GridWorld,
        ground_ids: Vec<NodeId>,
        policy: UavPolicy,
        params: UavParams,
        topics: TopicTable,
    ) -> Self {
        let (w, h) = world.extent();
        UavState {
            id,
            position: Point::new(w / 2.0, h / 2.0),
            mode: UavMode::Explore,
            lawnmower: lawnmower((w, h), params.sensor_radius),
            cursor: 0,
            explore_timer: 0.0,
            relay_timer: 0.0,
            tour: Vec::new(),
            db: NodeDb::new(id, topics),
            policy,
            params,
            last_known: BTreeMap::new(),
            ground_ids,
            mode_changes: 0,
            revealed: vec![false; world.len()],
            revealed_goals: BTreeSet::new(),
            goal_points: world.goals().iter().map(|g| (g.id, world.center(g.cell))).collect(),
            failed: BTreeMap::new(),
            stop_timer: 0.0,
            stop_timeout: 0.0,
            next_sensor: 0.0,
        }
    }

    pub fn revealed_count(&self) -> usize {
        self.revealed.iter().filter(|r| **r).count()
    }

    /// Nearest-neighbor order over last known ground robot positions, from
    /// the current position. Ties go to the lower id. Robots whose current
    /// estimate already led to a fruitless stop are left out.
    pub fn build_tour(&self) -> Vec<(NodeId, Point)> {
        let mut rest: Vec<(NodeId, Point)> = self
            .last_known
            .iter()
            .filter(|(id, &(_, t))| self.failed.get(id).is_none_or(|&f| t > f))
            .map(|(&id, &(p, _))| (id, p))
            .collect();
        let mut tour = Vec::with_capacity(rest.len());
        let mut here = self.position;
        while !rest.is_empty() {
            let (k, _) = rest
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| here.dist(a.1).total_cmp(&here.dist(b.1)).then_with(|| a.0.cmp(&b.0)))
                .expect("non-empty");
            let stop = rest.remove(k);
            here = stop.1;
            tour.push(stop);
        }
        tour
    }

    fn switch(&mut self, to: UavMode, now: f64, events: &mut Vec<Event>) {
        events.push(Event::new(
            now,
            EventKind::ModeChange {
                uav: self.id,
                from: self.mode,
                to,
            },
        ));
        self.mode = to;
        self.mode_changes += 1;
        match to {
            UavMode::Relay => {
                self.relay_timer = 0.0;
                self.stop_timer = 0.0;
                self.stop_timeout = self.policy.t_relay / self.tour.len().max(1) as f64;
            }
            UavMode::Explore => {
                self.explore_timer = 0.0;
                self.tour.clear();
            }
        }
    }

    /// Mode machine. `stalenesses` maps each ground robot to the seconds since
    /// its last completed sync with this UAV.
    pub fn decide(&mut self, stalenesses: &BTreeMap<NodeId, f64>, now: f64) -> Vec<Event> {
        let mut events = Vec::new();
        if !self.policy.dual_role {
            return events;
        }
        match self.mode {
            UavMode::Explore => {
                let stale = self.explore_timer >= self.policy.min_explore
                    && self
                        .ground_ids
                        .iter()
                        .any(|id| stalenesses.get(id).copied().unwrap_or(f64::INFINITY) >= self.policy.s_max);
                if self.explore_timer >= self.policy.t_explore || stale {
                    let tour = self.build_tour();
                    if !tour.is_empty() {
                        self.tour = tour;
                        self.switch(UavMode::Relay, now, &mut events);
                    }
                }
            }
            UavMode::Relay => {
                if self.stop_timer >= self.stop_timeout && !self.tour.is_empty() {
                    let (robot, _) = self.tour.remove(0);
                    self.failed.insert(robot, self.last_known[&robot].1);
                    self.stop_timer = 0.0;
                }
                if self.tour.is_empty() || self.relay_timer >= self.policy.t_relay {
                    self.switch(UavMode::Explore, now, &mut events);
                }
            }
        }
        events
    }

    /// Movement, timers, and in Explore mode the periodic footprint capture.
    pub fn advance(&mut self, world: &GridWorld, dt: f64, now: f64) -> Vec<Event> {
        let mut events = Vec::new();
        let mut budget = self.params.speed * dt;
        match self.mode {
            UavMode::Explore => {
                self.explore_timer += dt;
                while budget > 0.0 {
                    let target = self.lawnmower[self.cursor];
                    let d = self.position.dist(target);
                    if d > budget {
                        self.position = self.position.toward(target, budget);
                        break;
                    }
                    self.position = target;
                    budget -= d;
                    self.cursor = (self.cursor + 1) % self.lawnmower.len();
                }
            }
            UavMode::Relay => {
                self.relay_timer += dt;
                self.stop_timer += dt;
                if let Some(&(_, target)) = self.tour.first() {
                    let d = self.position.dist(target);
                    self.position = self.position.toward(target, d.min(budget));
                }
            }
        }
        if now + 1e-9 >= self.next_sensor {
            while now + 1e-9 >= self.next_sensor {
                self.next_sensor += self.params.sensor_period;
            }
            if self.mode == UavMode::Explore {
                self.sense(world, now, &mut events);
            }
        }
        events
    }

    fn sense(&mut self, world: &GridWorld, now: f64, events: &mut Vec<Event>) {
        let Payload::MapPatch { cells, goals } = reveal_footprint(world, self.position, self.params.sensor_radius)
        else {
            unreachable!("footprints are map patches")
        };
        let cells: Vec<_> = cells
            .into_iter()
            .filter(|(c, _)| {
                let i = world.index(*c).expect("footprint cells are in bounds");
                !std::mem::replace(&mut self.revealed[i], true)
            })
            .collect();
        let goals: Vec<_> = goals.into_iter().filter(|g| self.revealed_goals.insert(g.id)).collect();
        if cells.is_empty() && goals.is_empty() {
            return;
        }
        let header = self
            .db
            .publish(MAP_PATCH, Payload::MapPatch { cells, goals }, now)
            .expect("built-in topics are always registered");
        events.push(Event::new(
            now,
            EventKind::MessageCreated {
                origin: self.id,
                topic: header.topic,
                seq: header.seq,
                size: header.payload_size,
            },
        ));
    }

    /// A completed sync with `peer` finishes the current stop if it is that robot.
    pub fn on_sync_completed(&mut self, peer: NodeId) {
        if self.mode == UavMode::Relay && self.tour.first().is_some_and(|s| s.0 == peer) {
            self.tour.remove(0);
            self.stop_timer = 0.0;
        }
    }

    fn note_position(&mut self, robot: NodeId, position: Point, time: f64) {
        if !self.ground_ids.contains(&robot) {
            return;
        }
        if self.last_known.get(&robot).is_none_or(|&(_, t)| time > t) {
            self.last_known.insert(robot, (position, time));
            for stop in self.tour.iter_mut().filter(|s| s.0 == robot) {
                stop.1 = position;
            }
        }
    }

    /// Tracks ground robot positions from status reports, claims, and visits.
    pub fn absorb<'a>(&mut self, messages: impl IntoIterator<Item = &'a Message>) {
        for m in messages {
            match m.payload {
                Payload::RobotStatus { position, time, .. } => self.note_position(m.header.origin, position, time),
                Payload::GoalClaim {
                    goal,
                    claimant,
                    claim_time,
                } if self.revealed_goals.contains(&goal) => {
                    self.note_position(claimant, self.goal_points[&goal], claim_time)
                }
                Payload::GoalVisited {
                    goal,
                    visitor,
                    visit_time,
                } if self.revealed_goals.contains(&goal) => {
                    self.note_position(visitor, self.goal_points[&goal], visit_time)
                }
                _ => {}
            }
        }
    }
}

/// One full UAV step: mode decision, then motion and sensing.
pub fn uav_tick(
    uav: &mut UavState,
    world: &GridWorld,
    stalenesses: &BTreeMap<NodeId, f64>,
    dt: f64,
    now: f64,
) -> Vec<Event> {
    let mut events = uav.decide(stalenesses, now);
    events.extend(uav.advance(world, dt, now + dt));
    events
}
