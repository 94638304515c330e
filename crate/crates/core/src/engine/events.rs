use crate::agents::UavMode;
use crate::gossip::{NodeId, TopicId};
use crate::world::Cell;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Event { time, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A goal became known to a ground robot for the first time in the team.
    GoalKnown {
        goal: u32,
        robot: NodeId,
    },
    GoalVisited {
        goal: u32,
        robot: NodeId,
    },
    Stuck {
        robot: NodeId,
        cell: Cell,
    },
    MessageCreated {
        origin: NodeId,
        topic: TopicId,
        seq: u64,
        size: u64,
    },
    /// One hop of a message: `from` handed it to `to`.
    MessageDelivered {
        origin: NodeId,
        topic: TopicId,
        seq: u64,
        from: NodeId,
        to: NodeId,
        created_at: f64,
        delivered_at: f64,
    },
    ModeChange {
        uav: NodeId,
        from: UavMode,
        to: UavMode,
    },
    SyncCompleted {
        a: NodeId,
        b: NodeId,
        quality: f64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::GoalKnown { .. } => "GoalKnown",
            EventKind::GoalVisited { .. } => "GoalVisited",
            EventKind::Stuck { .. } => "Stuck",
            EventKind::MessageCreated { .. } => "MessageCreated",
            EventKind::MessageDelivered { .. } => "MessageDelivered",
            EventKind::ModeChange { .. } => "ModeChange",
            EventKind::SyncCompleted { .. } => "SyncCompleted",
        }
    }

    /// `key=value` pairs for the CSV export.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        match self {
            EventKind::GoalKnown { goal, robot } | EventKind::GoalVisited { goal, robot } => {
                vec![("goal", goal.to_string()), ("robot", robot.to_string())]
            }
            EventKind::Stuck { robot, cell } => vec![
                ("robot", robot.to_string()),
                ("x", cell.x.to_string()),
                ("y", cell.y.to_string()),
            ],
            EventKind::MessageCreated {
                origin,
                topic,
                seq,
                size,
            } => vec![
                ("origin", origin.to_string()),
                ("topic", topic.0.to_string()),
                ("seq", seq.to_string()),
                ("size", size.to_string()),
            ],
            EventKind::MessageDelivered {
                origin,
                topic,
                seq,
                from,
                to,
                created_at,
                delivered_at,
            } => vec![
                ("origin", origin.to_string()),
                ("topic", topic.0.to_string()),
                ("seq", seq.to_string()),
                ("from", from.to_string()),
                ("to", to.to_string()),
                ("created_at", format!("{created_at:.3}")),
                ("delivered_at", format!("{delivered_at:.3}")),
            ],
            EventKind::ModeChange { uav, from, to } => vec![
                ("uav", uav.to_string()),
                ("from", format!("{from:?}")),
                ("to", format!("{to:?}")),
            ],
            EventKind::SyncCompleted { a, b, quality } => vec![
                ("a", a.to_string()),
                ("b", b.to_string()),
                ("quality", format!("{quality:.4}")),
            ],
        }
    }
}
