//! A ground robot's traversability belief, fused from aerial labels and
//! shared driving experience.
//!
//! The merged state is a function of the *set* of applied messages, so
//! delivery order and re-delivery never matter:
//! * label: the aerial label if any patch covered the cell, else `Unknown`
//! * lethal: any `Lethal` experience
//! * cost: infinite if lethal, else the measured multiplier with the greatest
//!   `(created_at, origin)` stamp, else the cost of the label

use std::cmp::Ordering;

use crate::gossip::{MsgHeader, NodeId, Payload, Verdict};
use crate::world::{Cell, CostTable, GridWorld, TerrainLabel};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Measured {
    created_at: f64,
    origin: NodeId,
    value: f64,
}

impl Measured {
    fn cmp_stamp(&self, other: &Measured) -> Ordering {
        self.created_at
            .total_cmp(&other.created_at)
            .then_with(|| self.origin.cmp(&other.origin))
            .then_with(|| self.value.total_cmp(&other.value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefCell {
    pub known: bool,
    pub label: TerrainLabel,
    pub cost: f64,
    pub lethal: bool,
    measured: Option<Measured>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMap {
    width: usize,
    height: usize,
    costs: CostTable,
    cells: Vec<BeliefCell>,
}

impl BeliefMap {
    /// Everything unknown.
    pub fn new(width: usize, height: usize, costs: CostTable) -> Self {
        let unknown = BeliefCell {
            known: false,
            label: TerrainLabel::Unknown,
            cost: costs.cost(TerrainLabel::Unknown),
            lethal: false,
            measured: None,
        };
        BeliefMap {
            width,
            height,
            costs,
            cells: vec![unknown; width * height],
        }
    }

    /// Belief shaped like `world`, all unknown.
    pub fn for_world(world: &GridWorld, costs: CostTable) -> Self {
        BeliefMap::new(world.width(), world.height(), costs)
    }

    /// Builds a belief from an explicit per-cell cost grid (row-major). Cells
    /// with infinite cost are marked lethal. Mostly useful for planner tests.
    pub fn from_costs(width: usize, height: usize, costs: &[f64]) -> Self {
        assert_eq!(costs.len(), width * height);
        let mut map = BeliefMap::new(width, height, CostTable::default());
        for (cell, &c) in map.cells.iter_mut().zip(costs) {
            cell.known = true;
            cell.cost = c;
            cell.lethal = c.is_infinite();
            cell.measured = c.is_finite().then_some(Measured {
                created_at: 0.0,
                origin: NodeId(0),
                value: c,
            });
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cost_table(&self) -> &CostTable {
        &self.costs
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn index(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c).then(|| c.y as usize * self.width + c.x as usize)
    }

    pub fn get(&self, c: Cell) -> Option<&BeliefCell> {
        self.index(c).map(|i| &self.cells[i])
    }

    pub fn cost(&self, c: Cell) -> f64 {
        self.get(c).map_or(f64::INFINITY, |b| b.cost)
    }

    pub(crate) fn cost_at(&self, i: usize) -> f64 {
        self.cells[i].cost
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|c| c.known).count()
    }

    pub fn cells(&self) -> &[BeliefCell] {
        &self.cells
    }

    fn recompute(&mut self, i: usize) -> bool {
        let cell = &mut self.cells[i];
        let cost = if cell.lethal {
            f64::INFINITY
        } else if let Some(m) = cell.measured {
            m.value
        } else {
            self.costs.cost(cell.label)
        };
        cell.known = cell.label != TerrainLabel::Unknown || cell.lethal || cell.measured.is_some();
        let changed = cost.to_bits() != cell.cost.to_bits();
        cell.cost = cost;
        changed
    }

    /// Applies one message; returns the cells whose cost changed.
    pub fn apply(&mut self, header: &MsgHeader, payload: &Payload, changed: &mut Vec<Cell>) {
        match payload {
            Payload::MapPatch { cells, .. } => {
                for &(cell, label) in cells {
                    let Some(i) = self.index(cell) else { continue };
                    if label == TerrainLabel::Unknown || self.cells[i].label != TerrainLabel::Unknown {
                        continue;
                    }
                    self.cells[i].label = label;
                    if self.recompute(i) {
                        changed.push(cell);
                    }
                }
            }
            Payload::Experience { cell, verdict } => {
                let Some(i) = self.index(*cell) else { return };
                match *verdict {
                    Verdict::Lethal => self.cells[i].lethal = true,
                    Verdict::MeasuredCost(value) => {
                        let incoming = Measured {
                            created_at: header.created_at,
                            origin: header.origin,
                            value: value.max(1.0),
                        };
                        let slot = &mut self.cells[i].measured;
                        if slot.is_none_or(|m| incoming.cmp_stamp(&m) == Ordering::Greater) {
                            *slot = Some(incoming);
                        }
                    }
                }
                if self.recompute(i) {
                    changed.push(*cell);
                }
            }
            _ => {}
        }
    }
}

/// Folds a batch of messages into a belief. Returns the cells whose cost changed.
pub fn merge_inbound<'a>(
    belief: &mut BeliefMap,
    msgs: impl IntoIterator<Item = (&'a MsgHeader, &'a Payload)>,
) -> Vec<Cell> {
    let mut changed = Vec::new();
    for (h, p) in msgs {
        belief.apply(h, p, &mut changed);
    }
    changed
}
