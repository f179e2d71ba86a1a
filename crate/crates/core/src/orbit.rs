//! Plain floating-point orbit simulation, kept deliberately separate from
//! certification: nothing here is proof, everything here is fast and honest
//! about its branch choices.
//!
//! On the separation line the map is multi-valued; [`BranchPolicy`] makes the
//! simulation's choice explicit and recorded, so a run can be replayed — or
//! halted — whenever an orbit lands exactly on a boundary.

use crate::certify::{Certificate, LimitCycle};
use crate::geometry::{AxisBox, GeometryError, Metric, Point};
use crate::map::{MapError, PiecewiseMap};
use crate::par;
use crate::partition::PieceId;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default starts per axis for limit-set estimation.
const DEFAULT_ESTIMATE_GRID: usize = 16;

/// Default burn-in steps before an orbit is considered settled.
const DEFAULT_BURN_IN: usize = 200;

/// Default tail points recorded per start after burn-in.
const DEFAULT_KEEP: usize = 8;

/// Default reporting resolution relative to the ambient diameter.
const REPORT_RESOLUTION_REL: f64 = 1e-3;

/// Default cells per axis for basin labeling.
const DEFAULT_BASIN_GRID: usize = 64;

/// Default step ceiling per start while labeling basins.
const DEFAULT_BASIN_STEPS: usize = 10_000;

/// Cap on the snap tolerance used to decide that an orbit reached a cycle.
const BASIN_TOL_CAP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(#[from] Box<MapError>),
    #[error("{0}")]
    BadOptions(&'static str),
}

impl From<MapError> for OrbitError {
    fn from(e: MapError) -> Self {
        OrbitError::Map(Box::new(e))
    }
}

/// What to do when an orbit lands exactly on the separation line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchPolicy {
    /// Apply the branch of the lowest-numbered containing piece.
    #[default]
    LowestId,
    /// Apply the branch of the highest-numbered containing piece.
    HighestId,
    /// Stop the orbit at the boundary point.
    Halt,
}

/// A simulated orbit with its full branch record.
#[derive(Debug, Clone)]
pub struct Orbit {
    /// Visited points, starting with the initial one.
    pub points: Vec<Point>,
    /// Piece whose branch produced each step: `points[m + 1]` is the branch
    /// of `branches[m]` applied to `points[m]`.
    pub branches: Vec<PieceId>,
    /// Indices of points that lay on the separation line (several pieces
    /// contained them); at those steps the policy decided.
    pub hit_line: Vec<usize>,
    /// True when [`BranchPolicy::Halt`] stopped the orbit early.
    pub truncated: bool,
}

impl Orbit {
    pub fn last(&self) -> &Point {
        self.points.last().expect("orbit holds its start")
    }
}

/// Iterates `steps` applications of the map from `start`.
pub fn iterate_orbit(
    map: &PiecewiseMap,
    start: &Point,
    steps: usize,
    policy: BranchPolicy,
) -> Result<Orbit, OrbitError> {
    if !map.ambient().contains(start) {
        return Err(OrbitError::Map(Box::new(MapError::OutsideAmbient {
            coords: start.coords().to_vec(),
        })));
    }
    let mut orbit = Orbit {
        points: vec![start.clone()],
        branches: Vec::new(),
        hit_line: Vec::new(),
        truncated: false,
    };
    for step in 0..steps {
        let x = orbit.points.last().expect("nonempty");
        let members = map.partition().member_ids(x.coords(), 0.0);
        debug_assert!(!members.is_empty(), "partition covers the ambient box");
        if members.len() > 1 {
            orbit.hit_line.push(step);
            if policy == BranchPolicy::Halt {
                orbit.truncated = true;
                break;
            }
        }
        let id = match policy {
            BranchPolicy::HighestId => *members.last().expect("nonempty members"),
            _ => *members.first().expect("nonempty members"),
        };
        let next = map.eval_branch(id, x)?;
        orbit.branches.push(id);
        orbit.points.push(next);
    }
    Ok(orbit)
}

/// Controls [`estimate_limit_set`].
#[derive(Debug, Clone)]
pub struct LimitSetOptions {
    /// Starts per axis (the grid of initial points).
    pub grid: usize,
    /// Steps discarded before recording.
    pub burn_in: usize,
    /// Points recorded per start after burn-in.
    pub keep: usize,
    /// Reporting resolution: recorded points are snapped to a grid of this
    /// cell size. `None` uses 1e-3 of the ambient diameter.
    pub resolution: Option<f64>,
    pub policy: BranchPolicy,
}

impl Default for LimitSetOptions {
    fn default() -> Self {
        LimitSetOptions {
            grid: DEFAULT_ESTIMATE_GRID,
            burn_in: DEFAULT_BURN_IN,
            keep: DEFAULT_KEEP,
            resolution: None,
            policy: BranchPolicy::default(),
        }
    }
}

/// A sampled picture of the limit set at a stated resolution. This is an
/// estimate from finitely many orbits — a certificate's atom covers are the
/// certified counterpart.
#[derive(Debug, Clone)]
pub struct LimitSetEstimate {
    /// Cell size the samples were snapped to.
    pub resolution: f64,
    /// One representative (cell center) per occupied cell, sorted.
    pub points: Vec<Point>,
    /// Occupied cells as boxes.
    pub cover: Vec<AxisBox>,
    /// Orbits that the policy halted on the separation line.
    pub halted: usize,
}

/// Iterates a grid of starts and reports where their tails accumulate.
pub fn estimate_limit_set(
    map: &PiecewiseMap,
    opts: &LimitSetOptions,
) -> Result<LimitSetEstimate, OrbitError> {
    if opts.grid == 0 {
        return Err(OrbitError::BadOptions("grid must be at least 1"));
    }
    if opts.keep == 0 {
        return Err(OrbitError::BadOptions("keep must be at least 1"));
    }
    let resolution = match opts.resolution {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(_) => return Err(OrbitError::BadOptions("resolution must be positive")),
        None => {
            let d = map.ambient().diameter(map.metric());
            (d * REPORT_RESOLUTION_REL).max(f64::MIN_POSITIVE)
        }
    };
    let starts = grid_centers(map.ambient(), opts.grid);
    let steps = opts.burn_in + opts.keep - 1;
    let tails = par::map_vec(starts, |start| {
        iterate_orbit(map, &start, steps, opts.policy).map(|orbit| {
            let tail: Vec<Point> = orbit
                .points
                .iter()
                .skip(opts.burn_in.min(orbit.points.len().saturating_sub(1)))
                .cloned()
                .collect();
            (tail, orbit.truncated)
        })
    });
    let mut cells: BTreeMap<Vec<i64>, ()> = BTreeMap::new();
    let mut halted = 0usize;
    for tail in tails {
        let (points, truncated) = tail?;
        if truncated {
            halted += 1;
        }
        for p in points {
            cells.insert(snap_cell(p.coords(), resolution), ());
        }
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut cover = Vec::with_capacity(cells.len());
    for cell in cells.keys() {
        let (center, b) = cell_geometry(cell, resolution);
        points.push(Point::new(center)?);
        cover.push(b);
    }
    Ok(LimitSetEstimate {
        resolution,
        points,
        cover,
        halted,
    })
}

/// Controls [`basin_of_attraction`].
#[derive(Debug, Clone)]
pub struct BasinOptions {
    /// Cells per axis.
    pub grid: usize,
    /// Step ceiling per start before giving up on a cell.
    pub max_steps: usize,
    pub policy: BranchPolicy,
}

impl Default for BasinOptions {
    fn default() -> Self {
        BasinOptions {
            grid: DEFAULT_BASIN_GRID,
            max_steps: DEFAULT_BASIN_STEPS,
            policy: BranchPolicy::default(),
        }
    }
}

/// Basin labeling of a grid over the ambient box against a certificate's
/// cycle list. Labels are indices into [`BasinMap::cycles`]; `None` marks
/// cells whose orbit halted on the line or exceeded the step ceiling.
#[derive(Debug, Clone)]
pub struct BasinMap {
    pub grid: usize,
    /// Row-major over the grid, axis 0 fastest.
    pub labels: Vec<Option<usize>>,
    pub cycles: Vec<LimitCycle>,
    ambient: AxisBox,
}

impl BasinMap {
    /// The box the grid covers.
    pub fn ambient(&self) -> &AxisBox {
        &self.ambient
    }

    /// The grid cell behind `labels[index]`.
    pub fn cell_box(&self, index: usize) -> AxisBox {
        let dim = self.ambient.dim();
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        let mut rest = index;
        for axis in 0..dim {
            let i = rest % self.grid;
            rest /= self.grid;
            let side = self.ambient.side(axis) / self.grid as f64;
            lo.push(self.ambient.lo()[axis] + side * i as f64);
            hi.push(self.ambient.lo()[axis] + side * (i + 1) as f64);
        }
        AxisBox::new(lo, hi).expect("grid cell of a valid box")
    }

    /// Cells labeled per cycle, plus the undecided count (last entry).
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cycles.len() + 1];
        for label in &self.labels {
            match label {
                Some(c) => counts[*c] += 1,
                None => *counts.last_mut().expect("nonempty") += 1,
            }
        }
        counts
    }
}

/// Labels every grid cell with the cycle its center's orbit reaches.
///
/// An orbit is assigned once it comes within a snap tolerance of a cycle
/// point; the tolerance is half the smallest gap between distinct cycles
/// (so no orbit can be snapped to the wrong cycle), floored for the
/// single-cycle case.
pub fn basin_of_attraction(
    map: &PiecewiseMap,
    cert: &Certificate,
    opts: &BasinOptions,
) -> Result<BasinMap, OrbitError> {
    if opts.grid == 0 {
        return Err(OrbitError::BadOptions("grid must be at least 1"));
    }
    if cert.cycles.is_empty() {
        return Err(OrbitError::BadOptions("certificate lists no cycles"));
    }
    let metric = map.metric();
    let snap_tol = snap_tolerance(&cert.cycles, metric)?;
    let total = opts
        .grid
        .checked_pow(map.dim() as u32)
        .ok_or(OrbitError::BadOptions("grid too large for the dimension"))?;
    let indices: Vec<usize> = (0..total).collect();
    let ambient = map.ambient().clone();
    let grid = opts.grid;
    let labels = par::map_vec(indices, |index| {
        let center = grid_cell_center(&ambient, grid, index);
        label_orbit(map, &cert.cycles, metric, center, snap_tol, opts)
    });
    let labels = labels.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(BasinMap {
        grid,
        labels,
        cycles: cert.cycles.clone(),
        ambient,
    })
}

/// Half the smallest distance between points of *different* cycles.
fn snap_tolerance(cycles: &[LimitCycle], metric: &Metric) -> Result<f64, OrbitError> {
    let mut min_gap = f64::INFINITY;
    for (i, a) in cycles.iter().enumerate() {
        for b in &cycles[i + 1..] {
            for p in &a.points {
                for q in &b.points {
                    min_gap = min_gap.min(metric.distance(p, q)?);
                }
            }
        }
    }
    let tol = if min_gap.is_finite() {
        (0.45 * min_gap).min(BASIN_TOL_CAP)
    } else {
        BASIN_TOL_CAP
    };
    Ok(tol.max(f64::MIN_POSITIVE))
}

fn label_orbit(
    map: &PiecewiseMap,
    cycles: &[LimitCycle],
    metric: &Metric,
    start: Point,
    snap_tol: f64,
    opts: &BasinOptions,
) -> Result<Option<usize>, OrbitError> {
    let mut x = start;
    for _ in 0..=opts.max_steps {
        for (c, cycle) in cycles.iter().enumerate() {
            for p in &cycle.points {
                if metric.distance(&x, p)? <= snap_tol {
                    return Ok(Some(c));
                }
            }
        }
        let members = map.partition().member_ids(x.coords(), 0.0);
        if members.len() > 1 && opts.policy == BranchPolicy::Halt {
            return Ok(None);
        }
        let id = match opts.policy {
            BranchPolicy::HighestId => *members.last().expect("nonempty members"),
            _ => *members.first().expect("nonempty members"),
        };
        x = map.eval_branch(id, &x)?;
    }
    Ok(None)
}

/// Centers of a `grid`-per-axis partition of `ambient`, row-major with
/// axis 0 fastest — the start set for limit-set estimation.
fn grid_centers(ambient: &AxisBox, grid: usize) -> Vec<Point> {
    let dim = ambient.dim();
    let total = grid.pow(dim as u32);
    (0..total)
        .map(|index| grid_cell_center(ambient, grid, index))
        .collect()
}

fn grid_cell_center(ambient: &AxisBox, grid: usize, index: usize) -> Point {
    let dim = ambient.dim();
    let mut coords = Vec::with_capacity(dim);
    let mut rest = index;
    for axis in 0..dim {
        let i = rest % grid;
        rest /= grid;
        let side = ambient.side(axis) / grid as f64;
        coords.push(ambient.lo()[axis] + side * (i as f64 + 0.5));
    }
    Point::new(coords).expect("cell center of a valid box is finite")
}

fn snap_cell(coords: &[f64], resolution: f64) -> Vec<i64> {
    coords
        .iter()
        .map(|&c| (c / resolution).floor() as i64)
        .collect()
}

fn cell_geometry(cell: &[i64], resolution: f64) -> (Vec<f64>, AxisBox) {
    let lo: Vec<f64> = cell.iter().map(|&i| i as f64 * resolution).collect();
    let hi: Vec<f64> = cell.iter().map(|&i| (i + 1) as f64 * resolution).collect();
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let b = AxisBox::new(lo, hi).expect("finite resolution cell");
    (center, b)
}
