//! Procedural world generator. Rural and urban sites differ only in their
//! parameters (road spacing, building density, vegetation cover).

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{base_cost, Cell, CellInfo, Goal, GridWorld, TerrainLabel, WorldError};

/// Cells within this Chebyshev radius of the origin stay free of hazards,
/// vehicles, and goals; robots are deployed there.
const STAGING_RADIUS: i32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// Grid width in cells.
    pub width: usize,
    /// Grid height in cells.
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub goal_count: usize,
    /// Probability that a grass/sidewalk or vegetation cell hides a hazard.
    pub hazard_density: f64,
    /// Distance between parallel roads in cells; 0 disables the road grid.
    pub road_spacing: usize,
    pub road_width: usize,
    /// Probability that a city block holds a building.
    pub building_density: f64,
    /// Target fraction of the area covered by vegetation patches.
    pub vegetation_fraction: f64,
    /// Target fraction of the area covered by dirt/gravel patches.
    pub dirt_fraction: f64,
    pub vehicle_count: usize,
    /// Require every goal to be reachable from the origin over the road network
    /// (or over finite-cost cells when there are no roads).
    pub connected: bool,
    /// Extra generation attempts when the connectivity requirement fails.
    pub retry: u32,
    /// Minimum Chebyshev distance between goals, in cells.
    pub goal_spacing: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams::rural(400, 400, 17)
    }
}

impl GeneratorParams {
    pub fn rural(width: usize, height: usize, goal_count: usize) -> Self {
        GeneratorParams {
            width,
            height,
            resolution: 1.0,
            goal_count,
            hazard_density: 0.01,
            road_spacing: 100,
            road_width: 3,
            building_density: 0.25,
            vegetation_fraction: 0.2,
            dirt_fraction: 0.08,
            vehicle_count: 6,
            connected: true,
            retry: 16,
            goal_spacing: 20,
        }
    }

    pub fn urban(width: usize, height: usize, goal_count: usize) -> Self {
        GeneratorParams {
            road_spacing: 60,
            road_width: 4,
            building_density: 0.8,
            vegetation_fraction: 0.06,
            dirt_fraction: 0.02,
            vehicle_count: 20,
            ..GeneratorParams::rural(width, height, goal_count)
        }
    }

    fn validate(&self) -> Result<(), WorldError> {
        let bad = |field, message: &str| {
            Err(WorldError::InvalidParams {
                field,
                message: message.to_string(),
            })
        };
        if self.width == 0 || self.height == 0 {
            return bad("width/height", "must be positive");
        }
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return bad("resolution", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.hazard_density) {
            return bad("hazard_density", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.building_density) {
            return bad("building_density", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.vegetation_fraction) || !(0.0..=1.0).contains(&self.dirt_fraction) {
            return bad("vegetation_fraction/dirt_fraction", "must lie in [0, 1]");
        }
        if self.road_spacing > 0 && self.road_width == 0 {
            return bad("road_width", "must be positive when roads are enabled");
        }
        Ok(())
    }
}

/// Generates a world deterministically from `(gen, seed)`.
pub fn generate_world(gen: &GeneratorParams, seed: u64) -> Result<GridWorld, WorldError> {
    gen.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = gen.retry + 1;
    for _ in 0..attempts {
        if let Some(world) = attempt(gen, &mut rng)? {
            return Ok(world);
        }
    }
    Err(WorldError::UnsatisfiableLayout { attempts })
}

struct Canvas {
    w: usize,
    h: usize,
    labels: Vec<TerrainLabel>,
}

impl Canvas {
    fn idx(&self, x: i64, y: i64) -> Option<usize> {
        (x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h).then(|| y as usize * self.w + x as usize)
    }

    fn blob(&mut self, cx: i64, cy: i64, r: i64, label: TerrainLabel) -> usize {
        let mut painted = 0;
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    if let Some(i) = self.idx(x, y) {
                        if self.labels[i] != label {
                            painted += 1;
                        }
                        self.labels[i] = label;
                    }
                }
            }
        }
        painted
    }

    fn rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, label: TerrainLabel) {
        for y in y0..y1 {
            for x in x0..x1 {
                if let Some(i) = self.idx(x, y) {
                    self.labels[i] = label;
                }
            }
        }
    }
}

fn in_staging(x: i64, y: i64) -> bool {
    x.max(y) <= STAGING_RADIUS as i64
}

fn attempt(gen: &GeneratorParams, rng: &mut ChaCha8Rng) -> Result<Option<GridWorld>, WorldError> {
    let (w, h) = (gen.width, gen.height);
    let n = w * h;
    let mut canvas = Canvas {
        w,
        h,
        labels: vec![TerrainLabel::GrassSidewalk; n],
    };

    // Ground cover patches.
    for (label, fraction) in [
        (TerrainLabel::Vegetation, gen.vegetation_fraction),
        (TerrainLabel::DirtGravel, gen.dirt_fraction),
    ] {
        let target = (fraction * n as f64) as usize;
        let mut covered = 0;
        let mut tries = 0;
        while covered < target && tries < 10_000 {
            tries += 1;
            let cx = rng.gen_range(0..w) as i64;
            let cy = rng.gen_range(0..h) as i64;
            let r = rng.gen_range(2..=10);
            covered += canvas.blob(cx, cy, r, label);
        }
    }

    // Road grid through the origin.
    let on_road = |v: usize| gen.road_spacing > 0 && v % gen.road_spacing < gen.road_width;
    for y in 0..h {
        for x in 0..w {
            if on_road(x) || on_road(y) {
                canvas.labels[y * w + x] = TerrainLabel::Road;
            }
        }
    }

    // Buildings inside blocks, clear of the roads by a margin.
    if gen.road_spacing > 0 {
        let margin = 3;
        let mut by = 0;
        while by < h {
            let mut bx = 0;
            while bx < w {
                let x0 = (bx + gen.road_width + margin) as i64;
                let y0 = (by + gen.road_width + margin) as i64;
                let x1 = ((bx + gen.road_spacing).min(w) as i64) - margin as i64;
                let y1 = ((by + gen.road_spacing).min(h) as i64) - margin as i64;
                if x1 - x0 >= 6 && y1 - y0 >= 6 && rng.gen_bool(gen.building_density) {
                    let bw = ((x1 - x0) as f64 * rng.gen_range(0.3..0.7)) as i64;
                    let bh = ((y1 - y0) as f64 * rng.gen_range(0.3..0.7)) as i64;
                    let ox = x0 + rng.gen_range(0..=(x1 - x0 - bw));
                    let oy = y0 + rng.gen_range(0..=(y1 - y0 - bh));
                    if !in_staging(ox, oy) {
                        canvas.rect(ox, oy, ox + bw, oy + bh, TerrainLabel::Building);
                    }
                }
                bx += gen.road_spacing;
            }
            by += gen.road_spacing;
        }
    } else {
        let count = (gen.building_density * n as f64 / 400.0) as usize;
        for _ in 0..count {
            let bw = rng.gen_range(4..=16) as i64;
            let bh = rng.gen_range(4..=16) as i64;
            let ox = rng.gen_range(0..w) as i64;
            let oy = rng.gen_range(0..h) as i64;
            // The rectangle grows away from the origin, so it overlaps the
            // staging square iff its first corner lies inside it.
            if !in_staging(ox, oy) {
                canvas.rect(ox, oy, ox + bw, oy + bh, TerrainLabel::Building);
            }
        }
    }

    // Parked vehicles off the road.
    let mut placed = 0;
    let mut tries = 0;
    while placed < gen.vehicle_count && tries < 1_000 {
        tries += 1;
        let (vw, vh) = if rng.gen_bool(0.5) { (2, 4) } else { (4, 2) };
        let ox = rng.gen_range(0..w) as i64;
        let oy = rng.gen_range(0..h) as i64;
        let fits = (oy..oy + vh).all(|y| {
            (ox..ox + vw).all(|x| {
                canvas
                    .idx(x, y)
                    .is_some_and(|i| !in_staging(x, y) && canvas.labels[i] != TerrainLabel::Road)
            })
        });
        if fits {
            canvas.rect(ox, oy, ox + vw, oy + vh, TerrainLabel::Vehicle);
            placed += 1;
        }
    }

    // Goals: on roads when connectivity is requested and roads exist.
    let want_road = gen.connected && gen.road_spacing > 0;
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let label = canvas.labels[i];
            !in_staging(x, y)
                && if want_road {
                    label == TerrainLabel::Road
                } else {
                    base_cost(label).is_finite()
                }
        })
        .collect();
    let mut goals: Vec<Goal> = Vec::with_capacity(gen.goal_count);
    let mut tries = 0;
    while goals.len() < gen.goal_count {
        if candidates.is_empty() || tries >= 20_000 {
            return Ok(None);
        }
        tries += 1;
        let i = candidates[rng.gen_range(0..candidates.len())];
        let cell = Cell::new((i % w) as i32, (i / w) as i32);
        let spacing = if tries < 10_000 { gen.goal_spacing as i32 } else { 1 };
        let clear = goals
            .iter()
            .all(|g| (g.cell.x - cell.x).abs().max((g.cell.y - cell.y).abs()) >= spacing);
        if clear {
            goals.push(Goal {
                id: goals.len() as u32,
                cell,
            });
        }
    }

    // Hidden hazards under ground cover.
    let mut hazards = vec![false; n];
    if gen.hazard_density > 0.0 {
        for (i, hz) in hazards.iter_mut().enumerate() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            if canvas.labels[i].can_hide_hazard() && !in_staging(x, y) && rng.gen_bool(gen.hazard_density) {
                *hz = true;
            }
        }
    }

    if gen.connected {
        let passable: Box<dyn Fn(TerrainLabel) -> bool> = if want_road {
            Box::new(|l| l == TerrainLabel::Road)
        } else {
            Box::new(|l| base_cost(l).is_finite())
        };
        let reach = flood(&canvas, &passable);
        let ok = goals.iter().all(|g| reach[g.cell.y as usize * w + g.cell.x as usize]);
        if !ok {
            return Ok(None);
        }
    }

    let cells = canvas
        .labels
        .iter()
        .zip(&hazards)
        .map(|(&label, &hazard)| CellInfo { label, hazard })
        .collect();
    GridWorld::new(w, h, gen.resolution, cells, goals).map(Some)
}

/// 8-connected reachability from the origin.
fn flood(canvas: &Canvas, passable: &dyn Fn(TerrainLabel) -> bool) -> Vec<bool> {
    let mut seen = vec![false; canvas.labels.len()];
    if !passable(canvas.labels[0]) {
        return seen;
    }
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % canvas.w) as i64, (i / canvas.w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(j) = canvas.idx(x + dx, y + dy) {
                    if !seen[j] && passable(canvas.labels[j]) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    seen
}
