use std::collections::VecDeque;

use super::{diff, transfer_order, GossipError, MsgHeader, NodeDb, NodeId, HEADER_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionPhase {
    HeaderExchange,
    Transfer,
    Done,
}

/// An in-flight pairwise reconciliation between nodes `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSession {
    pub a: NodeId,
    pub b: NodeId,
    pub phase: SessionPhase,
    pub queue_ab: VecDeque<MsgHeader>,
    pub queue_ba: VecDeque<MsgHeader>,
    pub header_bytes_remaining: u64,
    pub started_at: f64,
    next_is_ab: bool,
    bytes_offered: u64,
    bytes_used: u64,
}

impl SyncSession {
    pub fn is_done(&self) -> bool {
        self.phase == SessionPhase::Done
    }

    pub fn pair(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn bytes_offered(&self) -> u64 {
        self.bytes_offered
    }

    pub fn bytes_used(&self) -> u64 {
        self.bytes_used
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransferReport {
    /// Delivered headers with their receiver, in delivery order.
    pub delivered: Vec<(MsgHeader, NodeId)>,
    pub bytes_used: u64,
}

/// Opens a session: both header summaries are diffed against the other side
/// and the missing sets are queued in transfer order.
pub fn open_session(x: &NodeDb, y: &NodeDb, now: f64) -> Result<SyncSession, GossipError> {
    if x.id() == y.id() {
        return Err(GossipError::SelfSession(x.id()));
    }
    let (a, b) = if x.id() < y.id() { (x, y) } else { (y, x) };
    Ok(SyncSession {
        a: a.id(),
        b: b.id(),
        phase: SessionPhase::HeaderExchange,
        queue_ab: transfer_order(diff(a.headers(), b)).into(),
        queue_ba: transfer_order(diff(b.headers(), a)).into(),
        header_bytes_remaining: (a.len() + b.len()) as u64 * HEADER_SIZE,
        started_at: now,
        next_is_ab: true,
        bytes_offered: 0,
        bytes_used: 0,
    })
}

/// Spends up to `budget` bytes on the session. Header bytes go first; then
/// payloads move whole, alternating direction per message starting with a→b.
/// A payload that does not fit the remaining budget waits for the next step.
/// On completion both nodes record `now` as their last sync with each other.
pub fn sync_step(session: &mut SyncSession, x: &mut NodeDb, y: &mut NodeDb, budget: u64, now: f64) -> TransferReport {
    let mut report = TransferReport::default();
    if session.is_done() {
        return report;
    }
    let (a, b) = if x.id() == session.a { (x, y) } else { (y, x) };
    debug_assert_eq!((a.id(), b.id()), (session.a, session.b));

    session.bytes_offered += budget;
    let mut remaining = budget;

    let header = remaining.min(session.header_bytes_remaining);
    session.header_bytes_remaining -= header;
    remaining -= header;
    if session.header_bytes_remaining > 0 {
        report.bytes_used = header;
        session.bytes_used += header;
        return report;
    }
    session.phase = SessionPhase::Transfer;

    loop {
        let use_ab = match (session.queue_ab.is_empty(), session.queue_ba.is_empty()) {
            (true, true) => break,
            (false, true) => true,
            (true, false) => false,
            (false, false) => session.next_is_ab,
        };
        let (queue, sender, receiver) = if use_ab {
            (&mut session.queue_ab, &*a, &mut *b)
        } else {
            (&mut session.queue_ba, &*b, &mut *a)
        };
        let head = *queue.front().expect("queue checked non-empty");
        let key = head.key();
        if receiver.contains(&key) {
            queue.pop_front();
            continue;
        }
        if head.payload_size > remaining {
            break;
        }
        let message = sender
            .get(&key)
            .expect("queued headers come from the sender's append-only store")
            .clone();
        queue.pop_front();
        remaining -= head.payload_size;
        receiver.insert_remote(message);
        report.delivered.push((head, receiver.id()));
        session.next_is_ab = !use_ab;
    }

    let used = budget - remaining;
    report.bytes_used = used;
    session.bytes_used += used;

    if session.queue_ab.is_empty() && session.queue_ba.is_empty() {
        session.phase = SessionPhase::Done;
        let quality = if session.bytes_offered == 0 {
            1.0
        } else {
            session.bytes_used as f64 / session.bytes_offered as f64
        };
        a.record_sync(b.id(), now, quality);
        b.record_sync(a.id(), now, quality);
    }
    report
}
