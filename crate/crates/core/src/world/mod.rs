//! Ground-truth environment: a 2D semantic grid with goal sites and hidden
//! hazards, plus the label to traversal-cost table that seeds beliefs.

mod generate;
mod io;

pub use generate::{generate_world, GeneratorParams};
pub use io::{load_world, save_world};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building, loading, or querying a world.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },

    #[error("could not satisfy layout constraints after {attempts} attempts")]
    UnsatisfiableLayout { attempts: u32 },

    #[error("cell ({x}, {y}) is out of bounds")]
    OutOfBounds { x: i64, y: i64 },

    #[error("invalid generator parameter {field}: {message}")]
    InvalidParams { field: &'static str, message: String },
}

impl WorldError {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        WorldError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Semantic terrain class shared by the aerial map and the ground planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerrainLabel {
    Road,
    GrassSidewalk,
    DirtGravel,
    Vegetation,
    Building,
    Vehicle,
    /// Only appears in beliefs, never in ground truth.
    Unknown,
}

impl TerrainLabel {
    pub const ALL: [TerrainLabel; 7] = [
        TerrainLabel::Road,
        TerrainLabel::GrassSidewalk,
        TerrainLabel::DirtGravel,
        TerrainLabel::Vegetation,
        TerrainLabel::Building,
        TerrainLabel::Vehicle,
        TerrainLabel::Unknown,
    ];

    /// Single-character code used by the world file format.
    pub fn code(self) -> Option<char> {
        match self {
            TerrainLabel::Road => Some('R'),
            TerrainLabel::GrassSidewalk => Some('G'),
            TerrainLabel::DirtGravel => Some('D'),
            TerrainLabel::Vegetation => Some('V'),
            TerrainLabel::Building => Some('B'),
            TerrainLabel::Vehicle => Some('C'),
            TerrainLabel::Unknown => None,
        }
    }

    pub fn from_code(c: char) -> Option<TerrainLabel> {
        match c {
            'R' => Some(TerrainLabel::Road),
            'G' => Some(TerrainLabel::GrassSidewalk),
            'D' => Some(TerrainLabel::DirtGravel),
            'V' => Some(TerrainLabel::Vegetation),
            'B' => Some(TerrainLabel::Building),
            'C' => Some(TerrainLabel::Vehicle),
            _ => None,
        }
    }

    /// Ground cover that can conceal a hazard.
    pub fn can_hide_hazard(self) -> bool {
        matches!(self, TerrainLabel::GrassSidewalk | TerrainLabel::Vegetation)
    }
}

/// Default traversal multiplier for a label. Obstacles are `f64::INFINITY`.
pub fn base_cost(label: TerrainLabel) -> f64 {
    CostTable::default().cost(label)
}

/// Scenario-tunable label to cost table. Obstacle labels are always impassable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostTable {
    pub road: f64,
    pub dirt_gravel: f64,
    pub grass_sidewalk: f64,
    pub vegetation: f64,
    pub unknown: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            road: 1.0,
            dirt_gravel: 1.5,
            grass_sidewalk: 2.0,
            vegetation: 5.0,
            unknown: 3.0,
        }
    }
}

impl CostTable {
    pub fn cost(&self, label: TerrainLabel) -> f64 {
        match label {
            TerrainLabel::Road => self.road,
            TerrainLabel::DirtGravel => self.dirt_gravel,
            TerrainLabel::GrassSidewalk => self.grass_sidewalk,
            TerrainLabel::Vegetation => self.vegetation,
            TerrainLabel::Unknown => self.unknown,
            TerrainLabel::Building | TerrainLabel::Vehicle => f64::INFINITY,
        }
    }

    /// Every finite entry must be at least 1 so the planner heuristic stays admissible.
    pub fn validate(&self) -> Result<(), String> {
        let entries = [
            ("road", self.road),
            ("dirt_gravel", self.dirt_gravel),
            ("grass_sidewalk", self.grass_sidewalk),
            ("vegetation", self.vegetation),
            ("unknown", self.unknown),
        ];
        for (name, v) in entries {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(format!("{name} must be finite and >= 1, got {v}"));
            }
        }
        Ok(())
    }
}

/// Integer grid coordinates. Signed so that out-of-range queries are expressible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell { x: v[0], y: v[1] }
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

/// Continuous position in meters; the world origin is the corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves toward `target` by at most `step` meters.
    pub fn toward(self, target: Point, step: f64) -> Point {
        let d = self.dist(target);
        if d <= step || d == 0.0 {
            target
        } else {
            let f = step / d;
            Point::new(self.x + (target.x - self.x) * f, self.y + (target.y - self.y) * f)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: u32,
    pub cell: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellInfo {
    pub label: TerrainLabel,
    pub hazard: bool,
}

/// Result of a ground robot entering a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    Ok,
    Stuck,
}

/// Immutable ground truth of the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<CellInfo>,
    goals: Vec<Goal>,
}

impl GridWorld {
    /// Builds a world and checks its invariants. `cells` is row-major with
    /// row `y` starting at index `y * width`.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<CellInfo>,
        goals: Vec<Goal>,
    ) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::schema("width/height", "dimensions must be positive"));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(WorldError::schema("resolution", "must be positive"));
        }
        if cells.len() != width * height {
            return Err(WorldError::schema(
                "rows",
                format!("expected {} cells, found {}", width * height, cells.len()),
            ));
        }
        let world = GridWorld {
            width,
            height,
            resolution,
            cells,
            goals,
        };
        for (i, c) in world.cells.iter().enumerate() {
            if c.label == TerrainLabel::Unknown {
                return Err(WorldError::schema(
                    format!("rows[{}][{}]", i / width, i % width),
                    "Unknown is not a ground-truth label",
                ));
            }
            if c.hazard && !c.label.can_hide_hazard() {
                return Err(WorldError::schema(
                    format!("hazards ({}, {})", i % width, i / width),
                    format!(
                        "hazard on {:?} cell; only grass/sidewalk or vegetation can hide one",
                        c.label
                    ),
                ));
            }
        }
        for (i, g) in world.goals.iter().enumerate() {
            if g.id as usize != i {
                return Err(WorldError::schema(
                    format!("goals[{i}]"),
                    "goal ids must be dense from 0",
                ));
            }
            let Some(info) = world.info(g.cell) else {
                return Err(WorldError::schema(format!("goals[{i}]"), "goal out of bounds"));
            };
            if !base_cost(info.label).is_finite() {
                return Err(WorldError::schema(
                    format!("goals[{i}]"),
                    format!("goal on impassable {:?} cell", info.label),
                ));
            }
        }
        Ok(world)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn cells(&self) -> &[CellInfo] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    pub fn index(&self, cell: Cell) -> Option<usize> {
        self.in_bounds(cell)
            .then(|| cell.y as usize * self.width + cell.x as usize)
    }

    pub fn cell_of(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn info(&self, cell: Cell) -> Option<CellInfo> {
        self.index(cell).map(|i| self.cells[i])
    }

    pub fn label(&self, cell: Cell) -> Option<TerrainLabel> {
        self.info(cell).map(|c| c.label)
    }

    /// Center of a cell in meters.
    pub fn center(&self, cell: Cell) -> Point {
        Point::new(
            (cell.x as f64 + 0.5) * self.resolution,
            (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a point (clamped to the grid).
    pub fn cell_at(&self, p: Point) -> Cell {
        let x = (p.x / self.resolution).floor().clamp(0.0, (self.width - 1) as f64) as i32;
        let y = (p.y / self.resolution).floor().clamp(0.0, (self.height - 1) as f64) as i32;
        Cell::new(x, y)
    }

    /// Extent of the world in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    /// Whether a ground robot entering `cell` gets stuck. Hazards are fixed at
    /// generation time, so the outcome is a pure function of the cell.
    pub fn traversal_outcome(&self, cell: Cell) -> Result<Traversal, WorldError> {
        let info = self.info(cell).ok_or(WorldError::OutOfBounds {
            x: cell.x as i64,
            y: cell.y as i64,
        })?;
        Ok(if info.hazard { Traversal::Stuck } else { Traversal::Ok })
    }

    /// Stable 64-bit fingerprint of the full ground truth.
    pub fn fingerprint(&self) -> u64 {
        crate::digest64(save_world(self).as_bytes())
    }
}
