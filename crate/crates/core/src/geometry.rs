//! Disc-union coverage over a rectangular field.
//!
//! Coverage is measured on an axis-aligned grid of cells: a cell counts as
//! covered by a sensor iff the cell *center* lies inside the sensing disc.
//! The grid error vanishes as `cell_size -> 0` and is bounded by roughly
//! `cell_size * perimeter / area` for a union of discs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular deployment region `[0, width] x [0, height]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Field {
    pub width: f64,
    pub height: f64,
    pub cell_size: f64,
}

impl Default for Field {
    fn default() -> Self {
        Self { width: 500.0, height: 500.0, cell_size: 1.0 }
    }
}

impl Field {
    pub fn new(width: f64, height: f64, cell_size: f64) -> Result<Self> {
        let field = Self { width, height, cell_size };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.width) && ok(self.height) && ok(self.cell_size)) {
            return Err(Error::InvalidField(format!(
                "width, height and cell_size must be positive (got {} x {}, cell {})",
                self.width, self.height, self.cell_size
            )));
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        ((self.width / self.cell_size).ceil() as usize).max(1)
    }

    pub fn rows(&self) -> usize {
        ((self.height / self.cell_size).ceil() as usize).max(1)
    }

    pub fn n_cells(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new((col as f64 + 0.5) * self.cell_size, (row as f64 + 0.5) * self.cell_size)
    }

    fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { x: p.x, y: p.y, width: self.width, height: self.height })
        }
    }
}

/// Calls `f(cell_index)` for every cell whose center lies inside the disc.
pub fn for_each_disc_cell(field: &Field, center: Point, radius: f64, mut f: impl FnMut(usize)) {
    let cs = field.cell_size;
    let (cols, rows) = (field.cols() as i64, field.rows() as i64);
    let r2 = radius * radius;
    let row_lo = (((center.y - radius) / cs - 0.5).ceil() as i64).max(0);
    let row_hi = (((center.y + radius) / cs - 0.5).floor() as i64).min(rows - 1);
    for row in row_lo..=row_hi {
        let cy = (row as f64 + 0.5) * cs;
        let dy = cy - center.y;
        let rem = r2 - dy * dy;
        if rem < 0.0 {
            continue;
        }
        let half = rem.sqrt();
        let col_lo = (((center.x - half) / cs - 0.5).ceil() as i64).max(0);
        let col_hi = (((center.x + half) / cs - 0.5).floor() as i64).min(cols - 1);
        let base = row * cols;
        for col in col_lo..=col_hi {
            f((base + col) as usize);
        }
    }
}

/// Per-cell count of active sensing discs covering each cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    field: Field,
    counts: Vec<u32>,
    covered: usize,
    overlapped: usize,
}

impl CoverageMap {
    pub fn empty(field: Field) -> Self {
        Self { field, counts: vec![0; field.n_cells()], covered: 0, overlapped: 0 }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count_at(&self, col: usize, row: usize) -> u32 {
        self.counts[row * self.field.cols() + col]
    }

    /// Number of cells covered by at least one disc.
    pub fn covered_cells(&self) -> usize {
        self.covered
    }

    /// Number of cells covered by two or more discs.
    pub fn overlapped_cells(&self) -> usize {
        self.overlapped
    }

    pub fn add_disc(&mut self, center: Point, radius: f64) {
        let Self { field, counts, covered, overlapped } = self;
        for_each_disc_cell(field, center, radius, |i| {
            counts[i] += 1;
            match counts[i] {
                1 => *covered += 1,
                2 => *overlapped += 1,
                _ => {}
            }
        });
    }

    pub fn remove_disc(&mut self, center: Point, radius: f64) {
        let Self { field, counts, covered, overlapped } = self;
        for_each_disc_cell(field, center, radius, |i| {
            debug_assert!(counts[i] > 0, "removing a disc that was never added");
            counts[i] -= 1;
            match counts[i] {
                0 => *covered -= 1,
                1 => *overlapped -= 1,
                _ => {}
            }
        });
    }

    /// Coverage fraction the map would have if the disc at `current` were
    /// instead at `alternative`. `current` must be a disc already in the map.
    pub fn coverage_if_moved(&self, current: Point, alternative: Point, radius: f64) -> f64 {
        let mut unique_now = 0usize;
        for_each_disc_cell(&self.field, current, radius, |i| {
            if self.counts[i] == 1 {
                unique_now += 1;
            }
        });
        let mut gained = 0usize;
        for_each_disc_cell(&self.field, alternative, radius, |i| {
            let mut without = self.counts[i];
            if point_in_disc(&self.field, i, current, radius) {
                without -= 1;
            }
            if without == 0 {
                gained += 1;
            }
        });
        (self.covered - unique_now + gained) as f64 / self.counts.len() as f64
    }

    /// Coverage fraction the map would have with an extra disc at `center`.
    pub fn coverage_with_extra(&self, center: Point, radius: f64) -> f64 {
        let mut gained = 0usize;
        for_each_disc_cell(&self.field, center, radius, |i| {
            if self.counts[i] == 0 {
                gained += 1;
            }
        });
        (self.covered + gained) as f64 / self.counts.len() as f64
    }

    /// Fraction of the disc's cells that some other disc also covers.
    pub fn local_overlap(&self, center: Point, radius: f64) -> f64 {
        let (mut total, mut shared) = (0usize, 0usize);
        for_each_disc_cell(&self.field, center, radius, |i| {
            total += 1;
            if self.counts[i] >= 2 {
                shared += 1;
            }
        });
        if total == 0 {
            0.0
        } else {
            shared as f64 / total as f64
        }
    }

    /// Center of the uncovered cell closest to `p`, if any cell is uncovered.
    pub fn nearest_uncovered(&self, p: Point) -> Option<Point> {
        let cols = self.field.cols();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| self.field.cell_center(i % cols, i / cols))
            .min_by(|a, b| a.distance(&p).total_cmp(&b.distance(&p)))
    }
}

fn point_in_disc(field: &Field, cell: usize, center: Point, radius: f64) -> bool {
    let cols = field.cols();
    let c = field.cell_center(cell % cols, cell / cols);
    let (dx, dy) = (c.x - center.x, c.y - center.y);
    dx * dx + dy * dy <= radius * radius
}

/// Builds the cover-count map for the active sensors.
pub fn build_coverage_map(
    positions: &[Point],
    active: &[bool],
    sensing_radius: f64,
    field: &Field,
) -> Result<CoverageMap> {
    field.validate()?;
    if !(sensing_radius > 0.0) {
        return Err(Error::InvalidField(format!("sensing radius must be positive, got {sensing_radius}")));
    }
    let mut map = CoverageMap::empty(*field);
    for (p, _) in positions.iter().zip(active).filter(|(_, &a)| a) {
        field.check(p)?;
        map.add_disc(*p, sensing_radius);
    }
    Ok(map)
}

pub fn coverage_fraction(map: &CoverageMap) -> f64 {
    map.covered as f64 / map.counts.len() as f64
}

/// Overlapped cells over covered cells; 0 when nothing is covered.
pub fn redundancy_rate(map: &CoverageMap) -> f64 {
    map.overlapped as f64 / map.covered.max(1) as f64
}

/// Fraction of `samples` uniform points in the field that fall inside at
/// least one active disc.
pub fn monte_carlo_coverage(
    positions: &[Point],
    active: &[bool],
    sensing_radius: f64,
    field: &Field,
    samples: usize,
    seed: u64,
) -> f64 {
    let discs: Vec<Point> = positions.iter().zip(active).filter(|(_, &a)| a).map(|(p, _)| *p).collect();
    if discs.is_empty() || samples == 0 {
        return 0.0;
    }
    let r2 = sensing_radius * sensing_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = rng.gen::<f64>() * field.width;
        let y = rng.gen::<f64>() * field.height;
        if discs.iter().any(|d| {
            let (dx, dy) = (d.x - x, d.y - y);
            dx * dx + dy * dy <= r2
        }) {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Largest pitch at which `n` sites fit in the field on a hexagonal lattice
/// with `cols` sites per row, each site owning a `pitch x pitch*sqrt(3)/2` cell.
fn fit_pitch(n: usize, cols: usize, field: &Field) -> f64 {
    let rows = n.div_ceil(cols);
    let stagger = if rows > 1 { 0.5 } else { 0.0 };
    let by_width = field.width / (cols as f64 + stagger);
    let by_height = field.height / (rows as f64 * SQRT3_2);
    by_width.min(by_height)
}

/// `n` target sites on a hexagonal lattice, row-major and centered in the field.
///
/// The pitch is `min(2 * r_s, fit)` where `fit` is the largest pitch that
/// still places all `n` sites inside the field. Tangent discs (pitch `2 r_s`)
/// maximize the union when the network cannot cover the whole field; denser
/// networks are spread over the whole field instead.
pub fn hex_lattice_targets(n: usize, sensing_radius: f64, field: &Field) -> Result<Vec<Point>> {
    field.validate()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let (best_cols, fit) = (1..=n).map(|c| (c, fit_pitch(n, c, field))).fold((1, f64::NEG_INFINITY), |acc, cur| {
        if cur.1 > acc.1 {
            cur
        } else {
            acc
        }
    });
    let pitch = fit.min(2.0 * sensing_radius);
    if pitch < field.cell_size {
        return Err(Error::LatticeTooDense { n, min_pitch: field.cell_size });
    }

    // Among layouts that fit at this pitch, take the one whose footprint is
    // most balanced against the field's aspect ratio.
    let cols = if pitch < fit {
        (1..=n)
            .filter(|&c| fit_pitch(n, c, field) >= pitch)
            .min_by(|&a, &b| {
                let imbalance = |c: usize| {
                    let rows = n.div_ceil(c);
                    let stagger = if rows > 1 { 0.5 } else { 0.0 };
                    let w = (c as f64 + stagger) * pitch / field.width;
                    let h = rows as f64 * SQRT3_2 * pitch / field.height;
                    (w - h).abs()
                };
                imbalance(a).total_cmp(&imbalance(b))
            })
            .unwrap_or(best_cols)
    } else {
        best_cols
    };

    let row_pitch = pitch * SQRT3_2;
    let mut sites: Vec<Point> = (0..n)
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let shift = if row % 2 == 1 { 0.5 } else { 0.0 };
            Point::new((col as f64 + shift) * pitch, row as f64 * row_pitch)
        })
        .collect();
    let (min_x, max_x) = sites.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (min_y, max_y) = sites.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let off_x = (field.width - (min_x + max_x)) / 2.0;
    let off_y = (field.height - (min_y + max_y)) / 2.0;
    for s in &mut sites {
        *s = field.clamp(Point::new(s.x + off_x, s.y + off_y));
    }
    Ok(sites)
}

/// `n` points at the cell centers of a near-square grid over the field,
/// filled row-major from the bottom-left.
pub fn square_grid_positions(n: usize, field: &Field) -> Vec<Point> {
    if n == 0 {
        return Vec::new();
    }
    let cols = ((n as f64 * field.width / field.height).sqrt().ceil() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let (cw, ch) = (field.width / cols as f64, field.height / rows as f64);
    (0..n).map(|i| Point::new(((i % cols) as f64 + 0.5) * cw, ((i / cols) as f64 + 0.5) * ch)).collect()
}

/// Sensors at or below this count are matched exactly; above it greedily.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 200;

/// Injective sensor -> site assignment minimizing total Euclidean distance.
///
/// Returns `assignment[sensor] = site`. Requires `positions.len() <= sites.len()`.
pub fn assign_targets(positions: &[Point], sites: &[Point]) -> Vec<usize> {
    assert!(positions.len() <= sites.len(), "more sensors than target sites");
    if positions.is_empty() {
        return Vec::new();
    }
    if positions.len() <= EXACT_ASSIGNMENT_LIMIT {
        let cost: Vec<Vec<f64>> = positions.iter().map(|p| sites.iter().map(|s| p.distance(s)).collect()).collect();
        min_cost_assignment(&cost)
    } else {
        greedy_assignment(positions, sites)
    }
}

/// Shortest-augmenting-path Hungarian method for an `n x m` cost matrix,
/// `n <= m`. Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "rows must not exceed columns");
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if matched_row[j] != 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Globally-closest-pair-first matching; ties go to the lowest sensor index,
/// then the lowest site index.
fn greedy_assignment(positions: &[Point], sites: &[Point]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = positions
        .iter()
        .enumerate()
        .flat_map(|(i, p)| sites.iter().enumerate().map(move |(j, s)| (p.distance(s), i, j)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; positions.len()];
    let mut site_taken = vec![false; sites.len()];
    let mut remaining = positions.len();
    for (_, i, j) in pairs {
        if assignment[i] == usize::MAX && !site_taken[j] {
            assignment[i] = j;
            site_taken[j] = true;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    assignment
}

pub fn total_assigned_distance(positions: &[Point], sites: &[Point], assignment: &[usize]) -> f64 {
    positions.iter().zip(assignment).map(|(p, &j)| p.distance(&sites[j])).sum()
}
