//! JSON world files.
//!
//! ```json
//! {"width": 3, "height": 2, "resolution": 1.0,
//!  "rows": ["RRG", "BVD"], "hazards": [[2, 0]], "goals": [[0, 0]]}
//! ```
//!
//! `rows[y]` holds row `y`, one character per cell from `R G D V B C`
//! (`C` is a vehicle). Goal ids are their positions in `goals`.

use serde::{Deserialize, Serialize};

use super::{Cell, CellInfo, Goal, GridWorld, TerrainLabel, WorldError};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    width: usize,
    height: usize,
    resolution: f64,
    rows: Vec<String>,
    #[serde(default)]
    hazards: Vec<[i64; 2]>,
    #[serde(default)]
    goals: Vec<[i64; 2]>,
}

/// Parses a world file.
pub fn load_world(source: &[u8]) -> Result<GridWorld, WorldError> {
    let file: WorldFile = serde_json::from_slice(source)
        .map_err(|e| WorldError::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;

    if file.rows.len() != file.height {
        return Err(WorldError::schema(
            "rows",
            format!("expected {} rows, found {}", file.height, file.rows.len()),
        ));
    }
    let mut cells = Vec::with_capacity(file.width * file.height);
    for (y, row) in file.rows.iter().enumerate() {
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != file.width {
            return Err(WorldError::schema(
                format!("rows[{y}]"),
                format!("expected {} cells, found {}", file.width, chars.len()),
            ));
        }
        for (x, &c) in chars.iter().enumerate() {
            let Some(label) = TerrainLabel::from_code(c) else {
                let bad: String = chars[x..]
                    .iter()
                    .take_while(|&&c| TerrainLabel::from_code(c).is_none())
                    .collect();
                return Err(WorldError::schema(
                    format!("rows[{y}][{x}]"),
                    format!("unknown terrain label {bad:?}"),
                ));
            };
            cells.push(CellInfo { label, hazard: false });
        }
    }

    let to_cell = |field: String, p: [i64; 2]| -> Result<Cell, WorldError> {
        let (x, y) = (p[0], p[1]);
        if x < 0 || y < 0 || x as usize >= file.width || y as usize >= file.height {
            return Err(WorldError::schema(field, format!("({x}, {y}) is out of bounds")));
        }
        Ok(Cell::new(x as i32, y as i32))
    };

    for (i, &h) in file.hazards.iter().enumerate() {
        let cell = to_cell(format!("hazards[{i}]"), h)?;
        let idx = cell.y as usize * file.width + cell.x as usize;
        if !cells[idx].label.can_hide_hazard() {
            return Err(WorldError::schema(
                format!("hazards[{i}]"),
                format!("hazard on {:?} cell", cells[idx].label),
            ));
        }
        cells[idx].hazard = true;
    }

    let goals = file
        .goals
        .iter()
        .enumerate()
        .map(|(i, &g)| to_cell(format!("goals[{i}]"), g).map(|cell| Goal { id: i as u32, cell }))
        .collect::<Result<Vec<_>, _>>()?;

    GridWorld::new(file.width, file.height, file.resolution, cells, goals)
}

/// Serializes a world; `load_world(save_world(w).as_bytes()) == w`.
pub fn save_world(world: &GridWorld) -> String {
    let rows = (0..world.height())
        .map(|y| {
            world.cells()[y * world.width()..(y + 1) * world.width()]
                .iter()
                .map(|c| c.label.code().expect("ground truth has no Unknown cells"))
                .collect()
        })
        .collect();
    let hazards = world
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.hazard)
        .map(|(i, _)| {
            let c = world.cell_of(i);
            [c.x as i64, c.y as i64]
        })
        .collect();
    let goals = world
        .goals()
        .iter()
        .map(|g| [g.cell.x as i64, g.cell.y as i64])
        .collect();
    let file = WorldFile {
        width: world.width(),
        height: world.height(),
        resolution: world.resolution(),
        rows,
        hazards,
        goals,
    };
    serde_json::to_string(&file).expect("world file serialization cannot fail")
}
