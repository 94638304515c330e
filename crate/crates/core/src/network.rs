//! Physical-layer model: unit-disk connectivity with a closed boundary,
//! association gating, one-session-per-node matching, and equal-share
//! contention budgets inside interference components.
//!
//! Latency is folded into the byte budget so the gossip layer only ever
//! sees bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::gossip::NodeId;
use crate::world::Point;

/// Absorbs floating-point drift when comparing accumulated times.
const TIME_EPS: f64 = 1e-9;
/// Absorbs representation error before flooring byte counts (e.g. 2e6 * 0.1).
const BYTE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    /// Communication radius in meters.
    pub r_comm: f64,
    /// Association delay in seconds before a link in range becomes usable.
    pub t_assoc: f64,
    /// Seconds of airtime lost per session per round.
    pub base_latency: f64,
    /// Bytes per second.
    pub bandwidth: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            r_comm: 50.0,
            t_assoc: 1.0,
            base_latency: 0.05,
            bandwidth: 2.0e6,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.r_comm > 0.0) {
            return Err(("r_comm", "must be positive".into()));
        }
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(("bandwidth", "must be positive".into()));
        }
        if !(self.t_assoc >= 0.0) {
            return Err(("t_assoc", "must be non-negative".into()));
        }
        if !(self.base_latency >= 0.0) {
            return Err(("base_latency", "must be non-negative".into()));
        }
        Ok(())
    }

    /// Bytes of airtime in one tick of length `dt`.
    pub fn tick_bytes(&self, dt: f64) -> u64 {
        (self.bandwidth * dt + BYTE_EPS).floor() as u64
    }

    /// Byte-equivalent of the per-round latency charge.
    pub fn latency_bytes(&self) -> u64 {
        (self.bandwidth * self.base_latency + BYTE_EPS).floor() as u64
    }
}

/// Unordered node pair stored as `(min, max)`.
pub type Pair = (NodeId, NodeId);

pub fn pair(a: NodeId, b: NodeId) -> Pair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All pairs within `r_comm` of each other (boundary inclusive).
pub fn adjacency(positions: &BTreeMap<NodeId, Point>, model: &LinkModel) -> BTreeSet<Pair> {
    let nodes: Vec<_> = positions.iter().collect();
    let mut out = BTreeSet::new();
    for (i, (&a, &pa)) in nodes.iter().enumerate() {
        for (&b, &pb) in &nodes[i + 1..] {
            if pa.dist(pb) <= model.r_comm {
                out.insert(pair(a, b));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkState {
    pub in_range_since: Option<f64>,
    pub usable: bool,
}

/// Per-pair link history owned by the engine.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkTable {
    links: BTreeMap<Pair, LinkState>,
}

impl LinkTable {
    pub fn get(&self, p: Pair) -> LinkState {
        self.links.get(&p).copied().unwrap_or_default()
    }
}

/// Updates link history from the current adjacency and returns the pairs
/// that have been continuously in range for at least `t_assoc`.
pub fn gate(links: &mut LinkTable, adjacency: &BTreeSet<Pair>, now: f64, model: &LinkModel) -> BTreeSet<Pair> {
    links.links.retain(|p, _| adjacency.contains(p));
    let mut usable = BTreeSet::new();
    for &p in adjacency {
        let state = links.links.entry(p).or_default();
        let since = *state.in_range_since.get_or_insert(now);
        state.usable = now - since + TIME_EPS >= model.t_assoc;
        if state.usable {
            usable.insert(p);
        }
    }
    usable
}

/// Greedy matching over usable pairs, most stale first, skipping busy nodes.
pub fn schedule_sessions(
    usable: &BTreeSet<Pair>,
    busy: &BTreeSet<NodeId>,
    stalenesses: &BTreeMap<Pair, f64>,
) -> BTreeSet<Pair> {
    let mut candidates: Vec<(f64, Pair)> = usable
        .iter()
        .filter(|(a, b)| !busy.contains(a) && !busy.contains(b))
        .map(|&p| (stalenesses.get(&p).copied().unwrap_or(f64::INFINITY), p))
        .collect();
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
    let mut taken = BTreeSet::new();
    let mut out = BTreeSet::new();
    for (_, (a, b)) in candidates {
        if !taken.contains(&a) && !taken.contains(&b) {
            taken.insert(a);
            taken.insert(b);
            out.insert((a, b));
        }
    }
    out
}

/// Groups sessions into interference components: two sessions interfere if
/// any endpoint of one lies within `r_comm` of any endpoint of the other.
pub fn interference_components(
    sessions: &BTreeSet<Pair>,
    positions: &BTreeMap<NodeId, Point>,
    model: &LinkModel,
) -> Vec<Vec<Pair>> {
    let list: Vec<Pair> = sessions.iter().copied().collect();
    let mut parent: Vec<usize> = (0..list.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut i = i;
        while parent[i] != r {
            let next = parent[i];
            parent[i] = r;
            i = next;
        }
        r
    }
    let pos = |n: NodeId| positions.get(&n).copied().unwrap_or_default();
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            let (a, b) = list[i];
            let (c, d) = list[j];
            let close = [a, b]
                .iter()
                .any(|&u| [c, d].iter().any(|&v| pos(u).dist(pos(v)) <= model.r_comm));
            if close {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Pair>> = BTreeMap::new();
    for (i, &p) in list.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(p);
    }
    groups.into_values().collect()
}

/// Per-session byte budget for one tick: equal share of `bandwidth * dt`
/// inside each interference component, minus the per-round latency charge.
pub fn budgets(
    sessions: &BTreeSet<Pair>,
    positions: &BTreeMap<NodeId, Point>,
    model: &LinkModel,
    dt: f64,
) -> BTreeMap<Pair, u64> {
    let airtime = model.tick_bytes(dt);
    let latency = model.latency_bytes();
    let mut out = BTreeMap::new();
    for component in interference_components(sessions, positions, model) {
        let share = airtime / component.len() as u64;
        for p in component {
            out.insert(p, share.saturating_sub(latency));
        }
    }
    out
}

/// Seconds to move `bytes` over an uncontended link.
pub fn transfer_time(bytes: u64, model: &LinkModel) -> f64 {
    model.base_latency + bytes as f64 / model.bandwidth
}
