//! 2D worlds and the geometric queries the simulator needs.
//!
//! An [`Environment2D`] is an axis-aligned rectangle that may carry a fixed
//! list of landmarks (for distance-vector observations), an occupancy grid
//! (for lidar worlds), or both. Grids use full-square cell semantics: a cell
//! is solid through its whole square and ray hits land on cell boundaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// A point in world coordinates, `[x, y]`.
pub type Point2 = [f64; 2];

/// Euclidean distance between two points.
pub fn dist(a: Point2, b: Point2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Tolerance for the unit-norm check on ray directions.
const UNIT_NORM_TOL: f64 = 1e-9;

/// Version stamp written into environment files.
pub const ENV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid bounds: require xmin < xmax and ymin < ymax, got [{xmin}, {xmax}] x [{ymin}, {ymax}]")]
    InvalidBounds { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    #[error("landmark {index} at ({x}, {y}) lies outside the environment bounds")]
    LandmarkOutOfBounds { index: usize, x: f64, y: f64 },
    #[error("occupancy grid shape mismatch: {rows} x {cols} grid with {cells} cells")]
    GridShapeMismatch { rows: usize, cols: usize, cells: usize },
    #[error("occupancy grid footprint does not cover the environment bounds")]
    GridFootprintMismatch,
    #[error("point ({x}, {y}) is outside the grid footprint")]
    OutOfBounds { x: f64, y: f64 },
    #[error("ray origin lies in an occupied cell")]
    OriginOccupied,
    #[error("ray direction norm {norm} deviates from 1 beyond tolerance")]
    NonUnitDirection { norm: f64 },
    #[error("max_range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("environment has no landmarks")]
    NoLandmarks,
    #[error("room free space is not 4-connected")]
    DisconnectedFreeSpace,
    #[error("room spec invalid: {0}")]
    InvalidRoomSpec(String),
    #[error("landmark count must be at least 1")]
    NoLandmarksRequested,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("environment file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("environment file schema version {found} unsupported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

/// Axis-aligned rectangular extent in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self, EnvError> {
        if !(xmin < xmax && ymin < ymax) {
            return Err(EnvError::InvalidBounds { xmin, xmax, ymin, ymax });
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// Inclusive containment test.
    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Row-major boolean occupancy grid; `true` marks a solid cell.
///
/// `origin` is the world position of the grid's minimum corner. Cell
/// `(row, col)` spans `[origin + col*s, origin + (col+1)*s)` in x and the
/// analogous span in y, so a point exactly on a shared edge belongs to the
/// cell on the +x/+y side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    rows: usize,
    cols: usize,
    cell_size: f64,
    origin: Point2,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        cell_size: f64,
        origin: Point2,
        cells: Vec<bool>,
    ) -> Result<Self, EnvError> {
        if rows == 0 || cols == 0 || rows * cols != cells.len() {
            return Err(EnvError::GridShapeMismatch { rows, cols, cells: cells.len() });
        }
        if !(cell_size > 0.0) {
            return Err(EnvError::InvalidRoomSpec(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        Ok(Self { rows, cols, cell_size, origin, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn footprint(&self) -> Bounds {
        Bounds {
            xmin: self.origin[0],
            xmax: self.origin[0] + self.cols as f64 * self.cell_size,
            ymin: self.origin[1],
            ymax: self.origin[1] + self.rows as f64 * self.cell_size,
        }
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    /// Grid cell containing `p`, or `None` outside the footprint.
    ///
    /// Points on a shared edge go to the +x/+y cell via `floor`; points on
    /// the far boundary of the footprint are pulled into the last cell so the
    /// footprint is closed.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let fx = (p[0] - self.origin[0]) / self.cell_size;
        let fy = (p[1] - self.origin[1]) / self.cell_size;
        if fx < 0.0 || fy < 0.0 || fx > self.cols as f64 || fy > self.rows as f64 {
            return None;
        }
        let col = (fx.floor() as usize).min(self.cols - 1);
        let row = (fy.floor() as usize).min(self.rows - 1);
        Some((row, col))
    }

    /// Whether `p` lies in a free cell; `None` outside the footprint.
    pub fn is_free_at(&self, p: Point2) -> Option<bool> {
        self.cell_of(p).map(|(r, c)| !self.is_occupied(r, c))
    }

    pub fn free_cell_count(&self) -> usize {
        self.cells.iter().filter(|&&o| !o).count()
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        [
            self.origin[0] + (col as f64 + 0.5) * self.cell_size,
            self.origin[1] + (row as f64 + 0.5) * self.cell_size,
        ]
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }
}

/// A 2D world: rectangular bounds, an ordered landmark list whose order
/// defines observation vector indices, and an optional occupancy grid.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment2D {
    bounds: Bounds,
    landmarks: Vec<Point2>,
    occupancy: Option<OccupancyGrid>,
    seed: Option<u64>,
}

impl Environment2D {
    pub fn new(
        bounds: Bounds,
        landmarks: Vec<Point2>,
        occupancy: Option<OccupancyGrid>,
    ) -> Result<Self, EnvError> {
        for (index, lm) in landmarks.iter().enumerate() {
            if !bounds.contains(*lm) {
                return Err(EnvError::LandmarkOutOfBounds { index, x: lm[0], y: lm[1] });
            }
        }
        if let Some(grid) = &occupancy {
            let fp = grid.footprint();
            let tol = 1e-9 * (bounds.width() + bounds.height());
            if (fp.xmin - bounds.xmin).abs() > tol
                || (fp.xmax - bounds.xmax).abs() > tol
                || (fp.ymin - bounds.ymin).abs() > tol
                || (fp.ymax - bounds.ymax).abs() > tol
            {
                return Err(EnvError::GridFootprintMismatch);
            }
        }
        Ok(Self { bounds, landmarks, occupancy, seed: None })
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn landmarks(&self) -> &[Point2] {
        &self.landmarks
    }

    pub fn occupancy(&self) -> Option<&OccupancyGrid> {
        self.occupancy.as_ref()
    }

    /// Generation seed echo, when the environment came from a generator.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Whether `p` is inside bounds and, if a grid is present, in a free cell.
    pub fn is_free(&self, p: Point2) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        match &self.occupancy {
            Some(grid) => grid.is_free_at(p).unwrap_or(false),
            None => true,
        }
    }

    /// Line-of-travel test against this environment's grid (always true for
    /// gridless worlds), with an explicit bounds check on both endpoints.
    pub fn segment_clear(&self, p: Point2, q: Point2) -> Result<bool, EnvError> {
        for pt in [p, q] {
            if !self.bounds.contains(pt) {
                return Err(EnvError::OutOfBounds { x: pt[0], y: pt[1] });
            }
        }
        segment_clear(self.occupancy.as_ref(), p, q)
    }
}

/// Distance from `origin` to the first occupied-cell boundary along `direction`,
/// or `max_range` when nothing is hit within range.
///
/// Grid traversal visits every cell the ray passes through. When the ray
/// crosses a cell corner exactly, the x step is taken first.
pub fn ray_cast(
    grid: &OccupancyGrid,
    origin: Point2,
    direction: Point2,
    max_range: f64,
) -> Result<f64, EnvError> {
    let norm = direction[0].hypot(direction[1]);
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(EnvError::NonUnitDirection { norm });
    }
    if !(max_range > 0.0) {
        return Err(EnvError::NonPositiveRange(max_range));
    }
    let (mut row, mut col) = grid
        .cell_of(origin)
        .ok_or(EnvError::OutOfBounds { x: origin[0], y: origin[1] })?;
    if grid.is_occupied(row, col) {
        return Err(EnvError::OriginOccupied);
    }

    let s = grid.cell_size;
    let ox = grid.origin[0];
    let oy = grid.origin[1];
    let (dx, dy) = (direction[0], direction[1]);

    let step_col: isize = if dx > 0.0 { 1 } else { -1 };
    let step_row: isize = if dy > 0.0 { 1 } else { -1 };
    // Parameter t at which the ray crosses the next cell boundary on each axis.
    let mut t_max_x = if dx == 0.0 {
        f64::INFINITY
    } else {
        let next = if dx > 0.0 { (col as f64 + 1.0) * s + ox } else { col as f64 * s + ox };
        (next - origin[0]) / dx
    };
    let mut t_max_y = if dy == 0.0 {
        f64::INFINITY
    } else {
        let next = if dy > 0.0 { (row as f64 + 1.0) * s + oy } else { row as f64 * s + oy };
        (next - origin[1]) / dy
    };
    let t_delta_x = if dx == 0.0 { f64::INFINITY } else { s / dx.abs() };
    let t_delta_y = if dy == 0.0 { f64::INFINITY } else { s / dy.abs() };

    loop {
        let t;
        if t_max_x <= t_max_y {
            t = t_max_x;
            if t > max_range {
                return Ok(max_range);
            }
            let next = col as isize + step_col;
            if next < 0 || next >= grid.cols as isize {
                return Ok(max_range);
            }
            col = next as usize;
            t_max_x += t_delta_x;
        } else {
            t = t_max_y;
            if t > max_range {
                return Ok(max_range);
            }
            let next = row as isize + step_row;
            if next < 0 || next >= grid.rows as isize {
                return Ok(max_range);
            }
            row = next as usize;
            t_max_y += t_delta_y;
        }
        if grid.is_occupied(row, col) {
            return Ok(t);
        }
    }
}

/// True iff every cell the segment `pq` passes through is free. Gridless
/// worlds are always clear. Symmetric in `p` and `q`.
pub fn segment_clear(
    grid: Option<&OccupancyGrid>,
    p: Point2,
    q: Point2,
) -> Result<bool, EnvError> {
    let Some(grid) = grid else { return Ok(true) };
    let (pr, pc) = grid.cell_of(p).ok_or(EnvError::OutOfBounds { x: p[0], y: p[1] })?;
    let (qr, qc) = grid.cell_of(q).ok_or(EnvError::OutOfBounds { x: q[0], y: q[1] })?;
    if grid.is_occupied(pr, pc) || grid.is_occupied(qr, qc) {
        return Ok(false);
    }
    let len = dist(p, q);
    if len == 0.0 {
        return Ok(true);
    }
    let dir = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
    // Walk cells up to the segment length; any occupied cell blocks it.
    // Reuses the ray traversal: a hit strictly before the endpoint means the
    // segment enters a solid cell.
    let hit = ray_cast(grid, p, dir, len)?;
    Ok(hit >= len)
}

/// Draws `count` landmarks uniformly inside `bounds` from a seeded stream.
pub fn generate_landmark_env(
    bounds: Bounds,
    count: usize,
    seed: u64,
) -> Result<Environment2D, EnvError> {
    if count == 0 {
        return Err(EnvError::NoLandmarksRequested);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let landmarks: Vec<Point2> = (0..count)
        .map(|_| {
            let x = rng.random_range(bounds.xmin..=bounds.xmax);
            let y = rng.random_range(bounds.ymin..=bounds.ymax);
            [x, y]
        })
        .collect();
    let mut env = Environment2D::new(bounds, landmarks, None)?;
    env.seed = Some(seed);
    Ok(env)
}

/// A rectangle of grid cells, used to describe room obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Parameters for procedural room generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub origin: Point2,
    /// Explicitly placed interior obstacles.
    pub obstacles: Vec<CellRect>,
    /// Number of additional randomly placed rectangular obstacles.
    pub random_obstacles: usize,
    /// Inclusive range of side lengths (in cells) for random obstacles.
    pub obstacle_span: (usize, usize),
    /// Regeneration attempts before giving up on a connected layout.
    pub max_attempts: usize,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            cell_size: 0.15625,
            origin: [0.0, 0.0],
            obstacles: Vec::new(),
            random_obstacles: 0,
            obstacle_span: (4, 10),
            max_attempts: 100,
        }
    }
}

/// Generates a walled room with rectangular interior obstacles whose free
/// space is 4-connected. Deterministic per seed.
pub fn generate_room_env(spec: &RoomSpec, seed: u64) -> Result<Environment2D, EnvError> {
    if spec.rows < 3 || spec.cols < 3 {
        return Err(EnvError::InvalidRoomSpec(format!(
            "room must be at least 3x3 cells, got {}x{}",
            spec.rows, spec.cols
        )));
    }
    if spec.obstacle_span.0 == 0 || spec.obstacle_span.0 > spec.obstacle_span.1 {
        return Err(EnvError::InvalidRoomSpec(format!(
            "invalid obstacle span {:?}",
            spec.obstacle_span
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = spec.max_attempts.max(1);
    for _ in 0..attempts {
        let mut cells = vec![false; spec.rows * spec.cols];
        // Solid boundary wall.
        for c in 0..spec.cols {
            cells[c] = true;
            cells[(spec.rows - 1) * spec.cols + c] = true;
        }
        for r in 0..spec.rows {
            cells[r * spec.cols] = true;
            cells[r * spec.cols + spec.cols - 1] = true;
        }
        for rect in &spec.obstacles {
            stamp_rect(&mut cells, spec, rect)?;
        }
        for _ in 0..spec.random_obstacles {
            let h = rng.random_range(spec.obstacle_span.0..=spec.obstacle_span.1);
            let w = rng.random_range(spec.obstacle_span.0..=spec.obstacle_span.1);
            let h = h.min(spec.rows - 2);
            let w = w.min(spec.cols - 2);
            let row = rng.random_range(1..=spec.rows - 1 - h);
            let col = rng.random_range(1..=spec.cols - 1 - w);
            stamp_rect(&mut cells, spec, &CellRect { row, col, rows: h, cols: w })?;
        }
        let grid = OccupancyGrid::new(spec.rows, spec.cols, spec.cell_size, spec.origin, cells)?;
        if free_space_connected(&grid) {
            let mut env = Environment2D::new(grid.footprint(), Vec::new(), Some(grid))?;
            env.seed = Some(seed);
            return Ok(env);
        }
        if spec.random_obstacles == 0 {
            // Fixed layout: retrying cannot change the outcome.
            break;
        }
    }
    Err(EnvError::DisconnectedFreeSpace)
}

fn stamp_rect(cells: &mut [bool], spec: &RoomSpec, rect: &CellRect) -> Result<(), EnvError> {
    if rect.row == 0
        || rect.col == 0
        || rect.row + rect.rows >= spec.rows
        || rect.col + rect.cols >= spec.cols
    {
        return Err(EnvError::InvalidRoomSpec(format!(
            "obstacle {rect:?} does not fit the room interior"
        )));
    }
    for r in rect.row..rect.row + rect.rows {
        for c in rect.col..rect.col + rect.cols {
            cells[r * spec.cols + c] = true;
        }
    }
    Ok(())
}

fn free_space_connected(grid: &OccupancyGrid) -> bool {
    let total_free = grid.free_cell_count();
    if total_free == 0 {
        return false;
    }
    let start = match (0..grid.rows * grid.cols).find(|&i| !grid.cells[i]) {
        Some(i) => i,
        None => return false,
    };
    let mut seen = vec![false; grid.rows * grid.cols];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reached = 0usize;
    while let Some(i) = stack.pop() {
        reached += 1;
        let (r, c) = (i / grid.cols, i % grid.cols);
        let mut push = |rr: usize, cc: usize| {
            let j = grid.idx(rr, cc);
            if !grid.cells[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        };
        if r > 0 {
            push(r - 1, c);
        }
        if r + 1 < grid.rows {
            push(r + 1, c);
        }
        if c > 0 {
            push(r, c - 1);
        }
        if c + 1 < grid.cols {
            push(r, c + 1);
        }
    }
    reached == total_free
}

// --- environment file (JSON) ---

#[derive(Serialize, Deserialize)]
struct EnvDoc {
    schema_version: u32,
    bounds: Bounds,
    landmarks: Vec<Point2>,
    occupancy: Option<GridDoc>,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    rows: usize,
    cols: usize,
    cell_size: f64,
    origin: Point2,
    /// Row-major 0/1 occupancy.
    cells: Vec<u8>,
}

/// Writes the environment as a single JSON document.
pub fn write_environment<W: Write>(env: &Environment2D, writer: W) -> Result<(), EnvError> {
    let doc = EnvDoc {
        schema_version: ENV_SCHEMA_VERSION,
        bounds: env.bounds,
        landmarks: env.landmarks.clone(),
        occupancy: env.occupancy.as_ref().map(|g| GridDoc {
            rows: g.rows,
            cols: g.cols,
            cell_size: g.cell_size,
            origin: g.origin,
            cells: g.cells.iter().map(|&o| o as u8).collect(),
        }),
        seed: env.seed,
    };
    serde_json::to_writer(writer, &doc)?;
    Ok(())
}

/// Reads an environment written by [`write_environment`].
pub fn read_environment<R: Read>(reader: R) -> Result<Environment2D, EnvError> {
    let doc: EnvDoc = serde_json::from_reader(reader)?;
    if doc.schema_version != ENV_SCHEMA_VERSION {
        return Err(EnvError::SchemaVersion {
            found: doc.schema_version,
            expected: ENV_SCHEMA_VERSION,
        });
    }
    let occupancy = doc
        .occupancy
        .map(|g| {
            OccupancyGrid::new(
                g.rows,
                g.cols,
                g.cell_size,
                g.origin,
                g.cells.into_iter().map(|v| v != 0).collect(),
            )
        })
        .transpose()?;
    let mut env = Environment2D::new(doc.bounds, doc.landmarks, occupancy)?;
    env.seed = doc.seed;
    Ok(env)
}

pub fn save_environment(env: &Environment2D, path: &Path) -> Result<(), EnvError> {
    let file = std::fs::File::create(path)?;
    write_environment(env, BufWriter::new(file))
}

pub fn load_environment(path: &Path) -> Result<Environment2D, EnvError> {
    let file = std::fs::File::open(path)?;
    read_environment(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square_bounds() -> Bounds {
        Bounds::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    /// 4x4 grid of unit cells centered on the origin, all free.
    fn open_grid() -> OccupancyGrid {
        OccupancyGrid::new(4, 4, 1.0, [-2.0, -2.0], vec![false; 16]).unwrap()
    }

    #[test]
    fn ray_cast_open_grid_returns_max_range() {
        let grid = open_grid();
        let d = ray_cast(&grid, [0.0, 0.0], [1.0, 0.0], 2.0).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn ray_cast_hits_cell_near_face() {
        // Occupied cell whose near face is exactly the line x = 0.5, on the
        // ray's row: grid origin (-1.5, -1.5), row 1 spans y in [-0.5, 0.5).
        let mut cells = vec![false; 16];
        cells[4 + 2] = true; // row 1, col 2 spans x in [0.5, 1.5)
        let grid = OccupancyGrid::new(4, 4, 1.0, [-1.5, -1.5], cells).unwrap();
        let d = ray_cast(&grid, [0.0, 0.0], [1.0, 0.0], 5.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12, "hit at {d}, expected 0.5");
    }

    #[test]
    fn ray_cast_occupied_origin_is_an_error() {
        let mut cells = vec![false; 16];
        cells[2 * 4 + 2] = true;
        let grid = OccupancyGrid::new(4, 4, 1.0, [-2.0, -2.0], cells).unwrap();
        let err = ray_cast(&grid, [0.5, 0.5], [1.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, EnvError::OriginOccupied));
    }

    #[test]
    fn ray_cast_rejects_non_unit_direction() {
        let grid = open_grid();
        let err = ray_cast(&grid, [0.0, 0.0], [1.0, 1.0], 1.0).unwrap_err();
        assert!(matches!(err, EnvError::NonUnitDirection { .. }));
    }

    #[test]
    fn ray_cast_outside_footprint_is_an_error() {
        let grid = open_grid();
        let err = ray_cast(&grid, [5.0, 0.0], [1.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, EnvError::OutOfBounds { .. }));
    }

    #[test]
    fn ray_cast_matches_analytic_box_intersection() {
        // Box in cells rows 4..6, cols 5..7 of a 10x10 grid of 0.5-cells at
        // origin (0, 0): world box x in [2.5, 3.5), y in [2.0, 3.0).
        let mut cells = vec![false; 100];
        for r in 4..6 {
            for c in 5..7 {
                cells[r * 10 + c] = true;
            }
        }
        let grid = OccupancyGrid::new(10, 10, 0.5, [0.0, 0.0], cells).unwrap();
        let origin = [1.0, 1.25];
        let cases = [
            [1.0, 0.0],
            [0.0, 1.0],
            [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
            [0.6, 0.8],
        ];
        for dir in cases {
            let got = ray_cast(&grid, origin, dir, 10.0).unwrap();
            let expect = analytic_box_hit(origin, dir, 2.5, 3.5, 2.0, 3.0).unwrap_or(10.0);
            assert!(
                (got - expect).abs() < 1e-9,
                "dir {dir:?}: got {got}, analytic {expect}"
            );
        }
    }

    /// Slab-method ray/AABB intersection oracle.
    fn analytic_box_hit(
        origin: Point2,
        dir: Point2,
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
    ) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin[0], dir[0], xmin, xmax),
            (origin[1], dir[1], ymin, ymax),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (a, b) = ((lo - o) / d, (hi - o) / d);
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        (t0 <= t1 && t0 >= 0.0).then_some(t0)
    }

    #[test]
    fn segment_clear_no_grid_is_always_true() {
        assert!(segment_clear(None, [0.0, 0.0], [100.0, -3.0]).unwrap());
    }

    #[test]
    fn segment_blocked_by_midpoint_cell() {
        let mut cells = vec![false; 16];
        cells[2 * 4 + 2] = true; // spans [0,1) x [0,1) with origin (-2,-2)
        let grid = OccupancyGrid::new(4, 4, 1.0, [-2.0, -2.0], cells).unwrap();
        let p = [-1.5, 0.5];
        let q = [1.5, 0.5];
        assert!(!segment_clear(Some(&grid), p, q).unwrap());
        // Supersampling oracle agrees.
        let blocked = (0..=10_000).any(|i| {
            let t = i as f64 / 10_000.0;
            let pt = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            grid.is_free_at(pt) == Some(false)
        });
        assert!(blocked);
    }

    #[test]
    fn degenerate_segment_in_free_cell_is_clear() {
        let grid = open_grid();
        assert!(segment_clear(Some(&grid), [0.3, 0.3], [0.3, 0.3]).unwrap());
    }

    #[test]
    fn landmark_generation_is_deterministic_and_in_bounds() {
        let b = square_bounds();
        let a = generate_landmark_env(b, 128, 7).unwrap();
        let c = generate_landmark_env(b, 128, 7).unwrap();
        assert_eq!(a.landmarks(), c.landmarks());
        assert_eq!(a.landmarks().len(), 128);
        assert!(a.landmarks().iter().all(|p| b.contains(*p)));
        let single = generate_landmark_env(b, 1, 0).unwrap();
        assert_eq!(single.landmarks().len(), 1);
        assert!(b.contains(single.landmarks()[0]));
    }

    #[test]
    fn room_with_no_interior_obstacles_is_just_walls() {
        let spec = RoomSpec { rows: 8, cols: 10, ..Default::default() };
        let env = generate_room_env(&spec, 3).unwrap();
        let grid = env.occupancy().unwrap();
        let wall = 2 * 10 + 2 * (8 - 2);
        assert_eq!(grid.rows() * grid.cols() - grid.free_cell_count(), wall);
    }

    #[test]
    fn room_generation_is_deterministic() {
        let spec = RoomSpec { rows: 20, cols: 20, random_obstacles: 3, ..Default::default() };
        let a = generate_room_env(&spec, 11).unwrap();
        let b = generate_room_env(&spec, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn room_free_cells_match_direct_count() {
        let spec = RoomSpec {
            rows: 12,
            cols: 12,
            obstacles: vec![CellRect { row: 5, col: 5, rows: 2, cols: 3 }],
            ..Default::default()
        };
        let env = generate_room_env(&spec, 0).unwrap();
        let grid = env.occupancy().unwrap();
        let wall = 2 * 12 + 2 * 10;
        let obstacle = 2 * 3;
        assert_eq!(grid.free_cell_count(), 12 * 12 - wall - obstacle);
    }

    #[test]
    fn environment_roundtrip_is_bit_exact() {
        let env = generate_landmark_env(square_bounds(), 16, 99).unwrap();
        let mut buf = Vec::new();
        write_environment(&env, &mut buf).unwrap();
        let back = read_environment(buf.as_slice()).unwrap();
        assert_eq!(env, back);

        let spec = RoomSpec { rows: 16, cols: 16, random_obstacles: 2, ..Default::default() };
        let room = generate_room_env(&spec, 5).unwrap();
        let mut buf = Vec::new();
        write_environment(&room, &mut buf).unwrap();
        let back = read_environment(buf.as_slice()).unwrap();
        assert_eq!(room, back);
    }

    proptest! {
        #[test]
        fn ray_cast_monotone_in_max_range(
            ox in -1.9f64..1.9,
            oy in -1.9f64..1.9,
            angle in 0.0f64..std::f64::consts::TAU,
            r1 in 0.1f64..3.0,
            extra in 0.0f64..3.0,
        ) {
            let mut cells = vec![false; 16];
            cells[5] = true; // row 1, col 1
            let grid = OccupancyGrid::new(4, 4, 1.0, [-2.0, -2.0], cells).unwrap();
            prop_assume!(grid.is_free_at([ox, oy]) == Some(true));
            let dir = [angle.cos(), angle.sin()];
            let d1 = ray_cast(&grid, [ox, oy], dir, r1).unwrap();
            let d2 = ray_cast(&grid, [ox, oy], dir, r1 + extra).unwrap();
            prop_assert!(d1 <= r1 + 1e-12);
            prop_assert!(d2 + 1e-12 >= d1);
        }

        #[test]
        fn segment_clear_is_symmetric(
            px in -1.99f64..1.99, py in -1.99f64..1.99,
            qx in -1.99f64..1.99, qy in -1.99f64..1.99,
            seed in 0u64..32,
        ) {
            let spec = RoomSpec {
                rows: 8, cols: 8, cell_size: 0.5, origin: [-2.0, -2.0],
                random_obstacles: 2, obstacle_span: (1, 2), ..Default::default()
            };
            let env = generate_room_env(&spec, seed).unwrap();
            let grid = env.occupancy();
            let a = segment_clear(grid, [px, py], [qx, qy]).unwrap();
            let b = segment_clear(grid, [qx, qy], [px, py]).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn clear_segment_implies_ray_reaches(
            px in -1.4f64..1.4, py in -1.4f64..1.4,
            qx in -1.4f64..1.4, qy in -1.4f64..1.4,
            seed in 0u64..16,
        ) {
            let spec = RoomSpec {
                rows: 8, cols: 8, cell_size: 0.5, origin: [-2.0, -2.0],
                random_obstacles: 1, obstacle_span: (1, 2), ..Default::default()
            };
            let env = generate_room_env(&spec, seed).unwrap();
            let grid = env.occupancy().unwrap();
            let len = dist([px, py], [qx, qy]);
            prop_assume!(len > 1e-6);
            prop_assume!(segment_clear(Some(grid), [px, py], [qx, qy]).unwrap());
            let dir = [(qx - px) / len, (qy - py) / len];
            let d = ray_cast(grid, [px, py], dir, 100.0).unwrap();
            prop_assert!(d >= len - 1e-12);
        }
    }
}
