//! Ground robot: greedy goal selection with claim deconfliction, costmap
//! planning, continuous motion along the planned cells, and experience
//! reporting.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::belief::BeliefMap;
use super::planner::{costs_to, plan_path};
use crate::engine::{Event, EventKind};
use crate::gossip::{
    Message, MsgHeader, NodeDb, NodeId, Payload, TopicTable, Verdict, EXPERIENCE, GOAL_CLAIM, GOAL_VISITED,
    ROBOT_STATUS,
};
use crate::world::{Cell, CostTable, Goal, GridWorld, Point, Traversal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UgvParams {
    /// Nominal speed in m/s.
    pub speed: f64,
    /// Per-tick speed noise as a fraction of nominal speed (uniform, symmetric).
    pub speed_jitter: f64,
    /// Seconds between `RobotStatus` broadcasts.
    pub status_period: f64,
}

impl Default for UgvParams {
    fn default() -> Self {
        UgvParams {
            speed: 1.5,
            speed_jitter: 0.1,
            status_period: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UgvStatus {
    Idle,
    Navigating,
    /// Absorbing.
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claim {
    pub claimant: NodeId,
    pub claim_time: f64,
}

impl Claim {
    /// Earlier claim wins; equal times go to the lower robot id.
    pub fn beats(&self, other: &Claim) -> bool {
        self.claim_time
            .total_cmp(&other.claim_time)
            .then_with(|| self.claimant.cmp(&other.claimant))
            .is_lt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UgvState {
    pub id: NodeId,
    pub position: Point,
    pub cell: Cell,
    pub status: UgvStatus,
    pub belief: BeliefMap,
    pub db: NodeDb,
    pub current_goal: Option<u32>,
    /// Planned cells; when non-empty the front is the robot's current cell.
    pub path: VecDeque<Cell>,
    pub known_goals: BTreeMap<u32, Goal>,
    pub claims_seen: BTreeMap<u32, Vec<Claim>>,
    pub visited_seen: BTreeSet<u32>,
    pub stuck_peers: BTreeSet<NodeId>,
    pub distance_traveled: f64,
    pub time_navigating: f64,
    /// Time spent not stuck.
    pub time_operational: f64,
    /// Times this robot dropped its goal on learning of a winning competing claim.
    pub claim_conflicts: u32,
    params: UgvParams,
    resolution: f64,
    centered: bool,
    needs_replan: bool,
    selection_dirty: bool,
    next_status: f64,
    rng: ChaCha8Rng,
}

impl UgvState {
    pub fn new(
        id: NodeId,
        world: &GridWorld,
        start: Cell,
        params: UgvParams,
        costs: CostTable,
        topics: TopicTable,
        rng_seed: u64,
    ) -> Self {
        UgvState {
            id,
            position: world.center(start),
            cell: start,
            status: UgvStatus::Idle,
            belief: BeliefMap::for_world(world, costs),
            db: NodeDb::new(id, topics),
            current_goal: None,
            path: VecDeque::new(),
            known_goals: BTreeMap::new(),
            claims_seen: BTreeMap::new(),
            visited_seen: BTreeSet::new(),
            stuck_peers: BTreeSet::new(),
            distance_traveled: 0.0,
            time_navigating: 0.0,
            time_operational: 0.0,
            claim_conflicts: 0,
            params,
            resolution: world.resolution(),
            centered: true,
            needs_replan: false,
            selection_dirty: true,
            next_status: 0.0,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn speed(&self) -> f64 {
        self.params.speed
    }

    /// Installs the full aerial map (labels and goals, never hazards) as
    /// prior knowledge.
    pub fn preload_map(&mut self, world: &GridWorld) {
        let cells = (0..world.len())
            .map(|i| {
                let c = world.cell_of(i);
                (c, world.cells()[i].label)
            })
            .collect();
        let header = MsgHeader {
            origin: self.id,
            topic: crate::gossip::TopicId(0),
            seq: 0,
            priority: 0,
            created_at: 0.0,
            payload_size: 0,
            payload_hash: 0,
        };
        let payload = Payload::MapPatch {
            cells,
            goals: world.goals().to_vec(),
        };
        let mut changed = Vec::new();
        self.belief.apply(&header, &payload, &mut changed);
        for g in world.goals() {
            self.known_goals.insert(g.id, *g);
        }
        self.selection_dirty = true;
    }

    fn publish(&mut self, topic: &str, payload: Payload, now: f64, events: &mut Vec<Event>) {
        let header = self
            .db
            .publish(topic, payload.clone(), now)
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
        self.absorb_one(&header, &payload, now);
    }

    fn my_claim(&self, goal: u32, now: f64) -> Claim {
        let own = self
            .claims_seen
            .get(&goal)
            .into_iter()
            .flatten()
            .filter(|c| c.claimant == self.id)
            .map(|c| c.claim_time)
            .fold(now, f64::min);
        Claim {
            claimant: self.id,
            claim_time: own,
        }
    }

    /// Whether another (non-stuck) robot's claim on `goal` beats ours.
    fn claim_lost(&self, goal: u32, now: f64) -> bool {
        let mine = self.my_claim(goal, now);
        self.claims_seen
            .get(&goal)
            .into_iter()
            .flatten()
            .any(|c| c.claimant != self.id && !self.stuck_peers.contains(&c.claimant) && c.beats(&mine))
    }

    /// The greedy choice: the cheapest reachable known goal that is neither
    /// visited nor claimed by a robot whose claim beats ours. Ties go to the
    /// lower goal id.
    pub fn choose_goal(&self, now: f64) -> Option<(u32, f64)> {
        let candidates: Vec<&Goal> = self
            .known_goals
            .values()
            .filter(|g| !self.visited_seen.contains(&g.id) && !self.claim_lost(g.id, now))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let cells: Vec<Cell> = candidates.iter().map(|g| g.cell).collect();
        let costs = costs_to(&self.belief, self.cell, &cells, self.resolution);
        let mut best: Option<(u32, f64)> = None;
        for (g, c) in candidates.iter().zip(costs) {
            if c.is_finite() && best.is_none_or(|(_, b)| c < b) {
                best = Some((g.id, c));
            }
        }
        best
    }

    /// Picks a goal and broadcasts a claim for it.
    pub fn select_goal(&mut self, now: f64, events: &mut Vec<Event>) -> Option<u32> {
        if self.status == UgvStatus::Stuck {
            return None;
        }
        let (goal, _) = self.choose_goal(now)?;
        let claim = Payload::GoalClaim {
            goal,
            claimant: self.id,
            claim_time: now,
        };
        self.publish(GOAL_CLAIM, claim, now, events);
        Some(goal)
    }

    fn drop_goal(&mut self) {
        self.current_goal = None;
        self.path.truncate(1);
        if self.status == UgvStatus::Navigating {
            self.status = UgvStatus::Idle;
        }
        self.selection_dirty = true;
        self.needs_replan = false;
    }

    fn visit(&mut self, goal: u32, now: f64, events: &mut Vec<Event>) {
        events.push(Event::new(now, EventKind::GoalVisited { goal, robot: self.id }));
        self.current_goal = Some(goal);
        let payload = Payload::GoalVisited {
            goal,
            visitor: self.id,
            visit_time: now,
        };
        self.publish(GOAL_VISITED, payload, now, events);
        self.drop_goal();
    }

    fn start_path(&mut self, goal: u32, now: f64, events: &mut Vec<Event>) -> bool {
        let target = self.known_goals[&goal].cell;
        match plan_path(&self.belief, self.cell, target, self.resolution) {
            Ok(plan) => {
                self.current_goal = Some(goal);
                self.path = plan.path.into();
                self.needs_replan = false;
                if self.path.len() == 1 {
                    self.visit(goal, now, events);
                } else {
                    self.status = UgvStatus::Navigating;
                }
                true
            }
            Err(_) => {
                self.drop_goal();
                false
            }
        }
    }

    /// Decision phase: periodic status, re-planning, and goal selection.
    pub fn decide(&mut self, now: f64) -> Vec<Event> {
        let mut events = Vec::new();
        if now + 1e-9 >= self.next_status {
            self.next_status += self.params.status_period;
            let status = Payload::RobotStatus {
                position: self.position,
                time: now,
                stuck: self.status == UgvStatus::Stuck,
            };
            self.publish(ROBOT_STATUS, status, now, &mut events);
        }
        match self.status {
            UgvStatus::Stuck => {}
            UgvStatus::Navigating => {
                if self.needs_replan {
                    let goal = self.current_goal.expect("navigating robots have a goal");
                    self.start_path(goal, now, &mut events);
                }
            }
            UgvStatus::Idle => {
                if self.selection_dirty {
                    self.selection_dirty = false;
                    if let Some(goal) = self.select_goal(now, &mut events) {
                        self.start_path(goal, now, &mut events);
                        // an unplannable selection must not trigger an immediate retry loop
                        if self.status == UgvStatus::Idle && self.current_goal.is_none() {
                            self.selection_dirty = false;
                        }
                    }
                }
            }
        }
        events
    }

    /// Motion phase: advance along the path by `speed * dt`. A cell is
    /// entered when the robot crosses the midpoint between cell centers.
    pub fn advance(&mut self, world: &GridWorld, dt: f64, now: f64) -> Vec<Event> {
        let mut events = Vec::new();
        if self.status == UgvStatus::Stuck {
            return events;
        }
        self.time_operational += dt;
        if self.status != UgvStatus::Navigating {
            return events;
        }
        self.time_navigating += dt;
        let jitter = if self.params.speed_jitter > 0.0 {
            self.rng.gen_range(-1.0..=1.0) * self.params.speed_jitter
        } else {
            0.0
        };
        let mut budget = (self.params.speed * (1.0 + jitter)).max(0.0) * dt;

        loop {
            let here = *self.path.front().expect("navigating robots have a path");
            if !self.centered {
                let target = world.center(here);
                let d = self.position.dist(target);
                if d > budget {
                    self.move_toward(target, budget);
                    break;
                }
                self.move_toward(target, d);
                budget -= d;
                self.centered = true;
            }
            let Some(&next) = self.path.get(1) else { break };
            let target = world.center(next);
            let step = world.center(here).dist(target);
            let to_entry = self.position.dist(target) - step / 2.0;
            if budget < to_entry {
                self.move_toward(target, budget);
                break;
            }
            self.move_toward(target, to_entry.max(0.0));
            budget -= to_entry.max(0.0);
            self.centered = false;

            let truth = world.info(next).expect("planned cells are in bounds");
            let true_cost = self.belief.cost_table().cost(truth.label);
            if !true_cost.is_finite() {
                // Local sensing spots an obstacle the aerial map missed: back off and re-plan.
                let exp = Payload::Experience {
                    cell: next,
                    verdict: Verdict::Lethal,
                };
                self.publish(EXPERIENCE, exp, now, &mut events);
                self.needs_replan = true;
                break;
            }
            self.path.pop_front();
            self.cell = next;
            if world.traversal_outcome(next) == Ok(Traversal::Stuck) {
                self.status = UgvStatus::Stuck;
                self.path.clear();
                self.current_goal = None;
                events.push(Event::new(
                    now,
                    EventKind::Stuck {
                        robot: self.id,
                        cell: next,
                    },
                ));
                let exp = Payload::Experience {
                    cell: next,
                    verdict: Verdict::Lethal,
                };
                self.publish(EXPERIENCE, exp, now, &mut events);
                let status = Payload::RobotStatus {
                    position: self.position,
                    time: now,
                    stuck: true,
                };
                self.publish(ROBOT_STATUS, status, now, &mut events);
                break;
            }
            if self.belief.cost(next) != true_cost {
                let exp = Payload::Experience {
                    cell: next,
                    verdict: Verdict::MeasuredCost(true_cost),
                };
                self.publish(EXPERIENCE, exp, now, &mut events);
            }
            if let Some(goal) = self.current_goal {
                if self.known_goals[&goal].cell == next {
                    self.visit(goal, now, &mut events);
                    break;
                }
            }
        }
        events
    }

    fn move_toward(&mut self, target: Point, d: f64) {
        let before = self.position;
        self.position = self.position.toward(target, d);
        self.distance_traveled += before.dist(self.position);
    }

    fn absorb_one(&mut self, header: &MsgHeader, payload: &Payload, now: f64) -> Option<Vec<u32>> {
        let mut learned = Vec::new();
        let mut changed = Vec::new();
        self.belief.apply(header, payload, &mut changed);
        match payload {
            Payload::MapPatch { goals, .. } => {
                for g in goals {
                    if self.known_goals.insert(g.id, *g).is_none() {
                        learned.push(g.id);
                        self.selection_dirty = true;
                    }
                }
            }
            Payload::GoalClaim {
                goal,
                claimant,
                claim_time,
            } => {
                let claim = Claim {
                    claimant: *claimant,
                    claim_time: *claim_time,
                };
                let list = self.claims_seen.entry(*goal).or_default();
                if !list.contains(&claim) {
                    list.push(claim);
                    list.sort_by(|a, b| {
                        a.claim_time
                            .total_cmp(&b.claim_time)
                            .then_with(|| a.claimant.cmp(&b.claimant))
                    });
                }
                if self.current_goal == Some(*goal) && *claimant != self.id && self.claim_lost(*goal, now) {
                    self.claim_conflicts += 1;
                    self.drop_goal();
                }
                self.selection_dirty = true;
            }
            Payload::GoalVisited { goal, .. } => {
                self.visited_seen.insert(*goal);
                if self.current_goal == Some(*goal) && self.status == UgvStatus::Navigating {
                    self.drop_goal();
                }
                self.selection_dirty = true;
            }
            Payload::RobotStatus { stuck: true, .. } if header.origin != self.id => {
                if self.stuck_peers.insert(header.origin) {
                    self.selection_dirty = true;
                }
            }
            Payload::RobotStatus { .. } | Payload::Experience { .. } => {}
        }
        if !changed.is_empty() {
            self.selection_dirty = true;
            if self.status == UgvStatus::Navigating && changed.iter().any(|c| self.path.contains(c)) {
                self.needs_replan = true;
            }
        }
        Some(learned)
    }

    /// Merge phase: folds newly delivered messages into belief and team state.
    /// Returns goals learned for the first time by this robot.
    pub fn absorb<'a>(&mut self, messages: impl IntoIterator<Item = &'a Message>, now: f64) -> Vec<u32> {
        let mut learned = Vec::new();
        for m in messages {
            if let Some(mut l) = self.absorb_one(&m.header, &m.payload, now) {
                learned.append(&mut l);
            }
        }
        learned
    }
}

/// One full robot step: decisions, then motion.
pub fn ugv_tick(ugv: &mut UgvState, world: &GridWorld, dt: f64, now: f64) -> Vec<Event> {
    let mut events = ugv.decide(now);
    events.extend(ugv.advance(world, dt, now + dt));
    events
}
