use std::collections::{BTreeMap, BTreeSet};

use crate::gossip::{open_session, sync_step, MsgHeader, NodeDb, NodeId, SyncSession};
use crate::network::{adjacency, budgets, gate, schedule_sessions, LinkModel, LinkTable, Pair};
use crate::world::Point;

/// Link history and in-flight sessions for a set of nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Comms {
    pub links: LinkTable,
    pub sessions: BTreeMap<Pair, SyncSession>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub header: MsgHeader,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExchangeReport {
    pub deliveries: Vec<Delivery>,
    /// Sessions that reached `Done` this step, with their link quality.
    pub completed: Vec<(Pair, f64)>,
    /// Usable pairs whose stores already matched.
    pub in_sync: Vec<Pair>,
    /// Bytes spent across all sessions, headers included.
    pub bytes_used: u64,
}

fn position(dbs: &[&mut NodeDb], id: NodeId) -> usize {
    dbs.binary_search_by_key(&id, |d| d.id())
        .unwrap_or_else(|_| panic!("node {id} has no database"))
}

fn pair_mut<'a>(dbs: &'a mut [&mut NodeDb], (a, b): Pair) -> (&'a mut NodeDb, &'a mut NodeDb) {
    let (i, j) = (position(dbs, a), position(dbs, b));
    debug_assert!(i < j);
    let (lo, hi) = dbs.split_at_mut(j);
    (&mut *lo[i], &mut *hi[0])
}

impl Comms {
    /// One round of the communication phases: adjacency and gating, session
    /// scheduling with contention budgets, then `sync_step` for every active
    /// session in canonical pair order. `dbs` must be sorted by node id.
    pub fn exchange(
        &mut self,
        dbs: &mut [&mut NodeDb],
        positions: &BTreeMap<NodeId, Point>,
        model: &LinkModel,
        dt: f64,
        now: f64,
    ) -> ExchangeReport {
        debug_assert!(dbs.windows(2).all(|w| w[0].id() < w[1].id()));
        let mut report = ExchangeReport::default();
        let adj = adjacency(positions, model);
        let usable = gate(&mut self.links, &adj, now, model);

        // sessions on links that dropped are abandoned
        self.sessions.retain(|p, _| usable.contains(p));
        let mut idle_pairs = BTreeSet::new();
        for &p in &usable {
            if self.sessions.contains_key(&p) {
                continue;
            }
            let (da, db) = pair_mut(dbs, p);
            if da.needs_sync(db) {
                idle_pairs.insert(p);
            } else {
                da.confirm_sync(p.1, now);
                db.confirm_sync(p.0, now);
                report.in_sync.push(p);
            }
        }
        let busy: BTreeSet<NodeId> = self.sessions.keys().flat_map(|&(a, b)| [a, b]).collect();
        let staleness: BTreeMap<Pair, f64> = idle_pairs
            .iter()
            .map(|&p| (p, dbs[position(dbs, p.0)].staleness(p.1, now)))
            .collect();
        for p in schedule_sessions(&idle_pairs, &busy, &staleness) {
            let (da, db) = pair_mut(dbs, p);
            let session = open_session(da, db, now).expect("pairs join distinct nodes");
            self.sessions.insert(p, session);
        }

        let active: Vec<Pair> = self.sessions.keys().copied().collect();
        let budget = budgets(&active.iter().copied().collect(), positions, model, dt);
        for p in active {
            let session = self.sessions.get_mut(&p).expect("active sessions are stored");
            let (da, db) = pair_mut(dbs, p);
            let step = sync_step(session, da, db, budget[&p], now);
            report.bytes_used += step.bytes_used;
            for (header, to) in step.delivered {
                let from = if to == p.0 { p.1 } else { p.0 };
                report.deliveries.push(Delivery { header, from, to });
            }
            if session.is_done() {
                report.completed.push((p, da.link_quality(p.1).unwrap_or(1.0)));
                self.sessions.remove(&p);
            }
        }
        report
    }
}
