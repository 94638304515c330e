//! Anti-entropy message layer.
//!
//! Every node owns a content-addressed [`NodeDb`]. Two nodes in contact run a
//! [`SyncSession`]: they swap full header summaries, then ship the payloads
//! the other side lacks in priority order under a per-tick byte budget.
//! Because a node forwards whatever it holds, not only what it originated,
//! a mobile node naturally acts as a data mule between peers that never meet.

mod session;

pub use session::{open_session, sync_step, SessionPhase, SyncSession, TransferReport};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Cell, Goal, Point, TerrainLabel};

/// Bytes charged per header during the summary exchange.
pub const HEADER_SIZE: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the topic table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub u16);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GossipError {
    #[error("topic {0:?} is not registered")]
    UnknownTopic(String),
    #[error("a node cannot open a session with itself ({0})")]
    SelfSession(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topic {
    pub name: String,
    pub priority: i32,
}

/// Ordered topic registry; a topic's id is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicTable(Vec<Topic>);

pub const MAP_PATCH: &str = "map_patch";
pub const EXPERIENCE: &str = "experience";
pub const GOAL_CLAIM: &str = "goal_claim";
pub const GOAL_VISITED: &str = "goal_visited";
pub const ROBOT_STATUS: &str = "robot_status";

impl Default for TopicTable {
    fn default() -> Self {
        TopicTable(
            [
                (MAP_PATCH, 2),
                (EXPERIENCE, 3),
                (GOAL_CLAIM, 3),
                (GOAL_VISITED, 3),
                (ROBOT_STATUS, 1),
            ]
            .into_iter()
            .map(|(name, priority)| Topic {
                name: name.to_string(),
                priority,
            })
            .collect(),
        )
    }
}

impl TopicTable {
    pub fn new(topics: Vec<Topic>) -> Self {
        TopicTable(topics)
    }

    pub fn topics(&self) -> &[Topic] {
        &self.0
    }

    pub fn lookup(&self, name: &str) -> Option<(TopicId, i32)> {
        self.0
            .iter()
            .position(|t| t.name == name)
            .map(|i| (TopicId(i as u16), self.0[i].priority))
    }

    pub fn contains(&self, id: TopicId) -> bool {
        (id.0 as usize) < self.0.len()
    }

    pub fn name(&self, id: TopicId) -> Option<&str> {
        self.0.get(id.0 as usize).map(|t| t.name.as_str())
    }
}

/// Globally unique message identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MsgKey {
    pub origin: NodeId,
    pub topic: TopicId,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsgHeader {
    pub origin: NodeId,
    pub topic: TopicId,
    pub seq: u64,
    /// Higher is more urgent.
    pub priority: i32,
    pub created_at: f64,
    pub payload_size: u64,
    pub payload_hash: u64,
}

impl MsgHeader {
    pub fn key(&self) -> MsgKey {
        MsgKey {
            origin: self.origin,
            topic: self.topic,
            seq: self.seq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Lethal,
    MeasuredCost(f64),
}

/// Application payloads carried by the gossip layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// Aerially observed labels. Hazards are invisible from the air, so a
    /// patch has no way to carry one.
    MapPatch {
        cells: Vec<(Cell, TerrainLabel)>,
        goals: Vec<Goal>,
    },
    Experience {
        cell: Cell,
        verdict: Verdict,
    },
    GoalClaim {
        goal: u32,
        claimant: NodeId,
        claim_time: f64,
    },
    GoalVisited {
        goal: u32,
        visitor: NodeId,
        visit_time: f64,
    },
    RobotStatus {
        position: Point,
        time: f64,
        stuck: bool,
    },
}

impl Payload {
    /// Wire size in bytes used for budget accounting.
    pub fn wire_size(&self) -> u64 {
        match self {
            // 2+2 bytes of coordinates and 1 label byte per cell, 8 per goal.
            Payload::MapPatch { cells, goals } => 8 + 5 * cells.len() as u64 + 8 * goals.len() as u64,
            Payload::Experience { .. } => 16,
            Payload::GoalClaim { .. } | Payload::GoalVisited { .. } => 20,
            Payload::RobotStatus { .. } => 28,
        }
    }

    pub fn digest(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("payload serialization cannot fail");
        crate::digest64(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub header: MsgHeader,
    pub payload: Payload,
}

/// Per-node replicated message store plus per-peer sync metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDb {
    id: NodeId,
    topics: TopicTable,
    store: BTreeMap<MsgKey, Message>,
    last_sync: BTreeMap<NodeId, f64>,
    link_quality: BTreeMap<NodeId, f64>,
    synced_len: BTreeMap<NodeId, usize>,
    next_seq: BTreeMap<TopicId, u64>,
}

impl NodeDb {
    pub fn new(id: NodeId, topics: TopicTable) -> Self {
        NodeDb {
            id,
            topics,
            store: BTreeMap::new(),
            last_sync: BTreeMap::new(),
            link_quality: BTreeMap::new(),
            synced_len: BTreeMap::new(),
            next_seq: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn topics(&self) -> &TopicTable {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn contains(&self, key: &MsgKey) -> bool {
        self.store.contains_key(key)
    }

    pub fn get(&self, key: &MsgKey) -> Option<&Message> {
        self.store.get(key)
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.store.values()
    }

    pub fn headers(&self) -> impl Iterator<Item = &MsgHeader> {
        self.store.values().map(|m| &m.header)
    }

    pub fn keys(&self) -> impl Iterator<Item = &MsgKey> {
        self.store.keys()
    }

    /// Originates a message on this node.
    pub fn insert_local(
        &mut self,
        topic: TopicId,
        priority: i32,
        payload: Payload,
        now: f64,
    ) -> Result<MsgHeader, GossipError> {
        if !self.topics.contains(topic) {
            return Err(GossipError::UnknownTopic(format!("#{}", topic.0)));
        }
        let seq = self.next_seq.entry(topic).or_insert(0);
        let header = MsgHeader {
            origin: self.id,
            topic,
            seq: *seq,
            priority,
            created_at: now,
            payload_size: payload.wire_size(),
            payload_hash: payload.digest(),
        };
        *seq += 1;
        self.store.insert(header.key(), Message { header, payload });
        Ok(header)
    }

    /// Originates a message on a topic looked up by name, at the topic's priority.
    pub fn publish(&mut self, topic: &str, payload: Payload, now: f64) -> Result<MsgHeader, GossipError> {
        let (id, priority) = self
            .topics
            .lookup(topic)
            .ok_or_else(|| GossipError::UnknownTopic(topic.to_string()))?;
        self.insert_local(id, priority, payload, now)
    }

    /// Stores a message received from a peer, header unchanged. Returns false
    /// if it was already present.
    pub fn insert_remote(&mut self, message: Message) -> bool {
        let key = message.header.key();
        if self.store.contains_key(&key) {
            return false;
        }
        self.store.insert(key, message);
        true
    }

    pub fn last_sync(&self, peer: NodeId) -> Option<f64> {
        self.last_sync.get(&peer).copied()
    }

    /// Bytes achieved over bytes offered during the last completed session with `peer`.
    pub fn link_quality(&self, peer: NodeId) -> Option<f64> {
        self.link_quality.get(&peer).copied()
    }

    /// Seconds since the last completed sync with `peer`; infinite if never synced.
    pub fn staleness(&self, peer: NodeId, now: f64) -> f64 {
        staleness(self, peer, now)
    }

    /// Whether either side gained messages since their last completed sync.
    pub fn needs_sync(&self, other: &NodeDb) -> bool {
        self.synced_len.get(&other.id) != Some(&self.len()) || other.synced_len.get(&self.id) != Some(&other.len())
    }

    /// Refreshes `last_sync` for a peer known to hold the same store summary,
    /// without running a session.
    pub(crate) fn confirm_sync(&mut self, peer: NodeId, now: f64) {
        let entry = self.last_sync.entry(peer).or_insert(now);
        if now > *entry {
            *entry = now;
        }
    }

    pub(crate) fn record_sync(&mut self, peer: NodeId, now: f64, quality: f64) {
        let entry = self.last_sync.entry(peer).or_insert(now);
        if now > *entry {
            *entry = now;
        }
        self.link_quality.insert(peer, quality);
        self.synced_len.insert(peer, self.store.len());
    }
}

/// `now - last_sync[peer]`, or `f64::INFINITY` if the peers never synced.
pub fn staleness(db: &NodeDb, peer: NodeId, now: f64) -> f64 {
    match db.last_sync(peer) {
        Some(t) => now - t,
        None => f64::INFINITY,
    }
}

/// Headers in `remote_summary` whose keys are absent from `local`.
pub fn diff<'a>(remote_summary: impl IntoIterator<Item = &'a MsgHeader>, local: &NodeDb) -> Vec<MsgHeader> {
    remote_summary
        .into_iter()
        .filter(|h| !local.contains(&h.key()))
        .copied()
        .collect()
}

/// Total transfer order: priority descending, newest first, then key ascending.
pub fn transfer_cmp(a: &MsgHeader, b: &MsgHeader) -> Ordering {
    b.priority
        .cmp(&a.priority)
        .then_with(|| b.created_at.total_cmp(&a.created_at))
        .then_with(|| a.origin.cmp(&b.origin))
        .then_with(|| a.topic.cmp(&b.topic))
        .then_with(|| a.seq.cmp(&b.seq))
}

pub fn transfer_order(mut missing: Vec<MsgHeader>) -> Vec<MsgHeader> {
    missing.sort_by(transfer_cmp);
    missing
}
