//! Boundary repair: nudging a map that cannot be certified — typically
//! because an attractor touches a piece boundary — into a certifiable
//! neighbour within a prescribed perturbation size.
//!
//! The construction never touches the branch formulas. Pieces are first
//! *inflated* by a margin `t ≤ ε` small enough that the extended branch
//! images stay separated; refining atoms over the inflated domains then
//! over-approximates the attractor of every map whose boundaries lie within
//! `ε₁ = min(ε, t)` of the original ones. Along each boundary facet the
//! extended atoms leave free slots; moving the facet into the widest free
//! slot yields a candidate map `G` that agrees with `F` away from the moved
//! boundary, is an `ε`-perturbation of it, and — after an ordinary
//! certification run — provably has the generic separation the original
//! lacked.

use crate::atoms::{self, AtomError, AtomOptions, AtomSet};
use crate::certify::{certify, Certificate, CertifyError, CertifyOptions, Inconclusive};
use crate::geometry::{AxisBox, BoxCover, GeometryError};
use crate::map::{
    is_epsilon_perturbation, MapError, PerturbationReport, PieceMap, PiecewiseMap,
};
use crate::partition::{Partition, PartitionError, Piece, PieceId};
use thiserror::Error;

/// Shrink factor applied to the inflation margin between attempts.
const SHRINK: f64 = 0.8;

/// Attempt ceiling for finding a workable inflation margin.
const MAX_EXTEND_TRIES: usize = 200;

/// The search window around a boundary value stays strictly inside the
/// `ε₁` safety margin.
const WINDOW_BACKOFF: f64 = 0.999;

/// Mesh density forwarded to the perturbation comparison of the repaired map.
const PERTURBATION_SAMPLES: usize = 8;

#[derive(Debug, Error)]
pub enum GenericityError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(Box<MapError>),
    #[error(transparent)]
    Atoms(Box<AtomError>),
    #[error(transparent)]
    Certify(Box<CertifyError>),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("branch {id} is a plugin not declared valid outside its piece")]
    PluginNotExtendable { id: PieceId },
    #[error("no inflation margin produced separated extended images after {tried} attempts")]
    NoExtension { tried: usize },
    #[error("no free slot for the boundary at axis {axis} near {value} up to generation {generation}")]
    NoGap {
        axis: usize,
        value: f64,
        generation: usize,
    },
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("repaired candidate failed verification: {what}")]
    Verification { what: String },
    #[error("repair exhausted its generation cap; last certification attempt: {last}")]
    Uncertified { last: Inconclusive },
}

impl From<MapError> for GenericityError {
    fn from(e: MapError) -> Self {
        GenericityError::Map(Box::new(e))
    }
}

impl From<AtomError> for GenericityError {
    fn from(e: AtomError) -> Self {
        GenericityError::Atoms(Box::new(e))
    }
}

impl From<CertifyError> for GenericityError {
    fn from(e: CertifyError) -> Self {
        GenericityError::Certify(Box::new(e))
    }
}

/// A successful piece inflation.
#[derive(Debug, Clone)]
pub struct Extension {
    /// Accepted inflation margin.
    pub t: f64,
    /// Effective perturbation reach: `min(ε, t)`. Atoms over the extended
    /// domains cover the attractor of every admissible `ε₁`-perturbation of
    /// the piece boundaries.
    pub epsilon_one: f64,
    /// Inflated piece domains, aligned with the partition's piece order and
    /// clipped to the ambient box.
    pub domains: Vec<BoxCover>,
    /// Inflation attempts consumed.
    pub tried: usize,
}

/// Inflates every piece by a common margin (starting at `epsilon`, shrunk
/// geometrically) until the extended branch images are pairwise separated
/// and stay inside the ambient interior.
pub fn extend_pieces(map: &PiecewiseMap, epsilon: f64) -> Result<Extension, GenericityError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(GenericityError::BadEpsilon(epsilon));
    }
    for (piece, branch) in map.partition().pieces().iter().zip(map.branches()) {
        if let PieceMap::Plugin(p) = branch {
            if !p.is_extendable() {
                return Err(GenericityError::PluginNotExtendable { id: piece.id() });
            }
        }
    }
    let ambient = map.ambient();
    let mut t = epsilon;
    for attempt in 1..=MAX_EXTEND_TRIES {
        let domains: Vec<BoxCover> = map
            .partition()
            .pieces()
            .iter()
            .map(|p| p.region().inflate(t).intersect_box(ambient))
            .collect();
        if extended_images_admissible(map, &domains)? {
            return Ok(Extension {
                t,
                epsilon_one: epsilon.min(t),
                domains,
                tried: attempt,
            });
        }
        t *= SHRINK;
    }
    Err(GenericityError::NoExtension {
        tried: MAX_EXTEND_TRIES,
    })
}

/// The extended images must be pairwise separated and strictly interior —
/// the same admissibility the true pieces enjoy, pushed out to the margin.
fn extended_images_admissible(
    map: &PiecewiseMap,
    domains: &[BoxCover],
) -> Result<bool, GenericityError> {
    let opts = AtomOptions::default();
    let images = atoms::seed_atoms(map, domains, &opts)?;
    let ambient = map.ambient();
    let dim = map.dim();
    let covers: Vec<&BoxCover> = images.atoms().iter().map(|a| a.cover()).collect();
    for cover in &covers {
        let Some(hull) = cover.bounding_box() else {
            return Ok(false);
        };
        let inside = (0..dim)
            .all(|a| ambient.lo()[a] < hull.lo()[a] && hull.hi()[a] < ambient.hi()[a]);
        if !inside {
            return Ok(false);
        }
    }
    for (i, a) in covers.iter().enumerate() {
        for b in &covers[i + 1..] {
            if a.min_distance(b, map.metric())? <= 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Atoms of generation `k` refined over the extended domains instead of the
/// pieces. Words may branch into several overlapping domains; that is the
/// point — the result covers the generation-`k` atoms of every admissible
/// boundary perturbation within `ε₁`.
pub fn extended_atoms(
    map: &PiecewiseMap,
    ext: &Extension,
    k: usize,
    opts: &AtomOptions,
) -> Result<AtomSet, GenericityError> {
    if k == 0 {
        return Err(GenericityError::Atoms(Box::new(AtomError::BadGeneration)));
    }
    let mut set = atoms::seed_atoms(map, &ext.domains, opts)?;
    while set.generation() < k {
        set = atoms::refine_with_domains(map, &set, &ext.domains, opts)?;
    }
    Ok(set)
}

/// One boundary move performed by a repair.
#[derive(Debug, Clone, PartialEq)]
pub struct CutMove {
    pub axis: usize,
    pub from: f64,
    pub to: f64,
}

/// Outcome of a successful repair.
#[derive(Debug, Clone)]
pub struct Repair {
    /// False when the original map already certified and was returned as-is.
    pub moved: bool,
    /// Requested perturbation size.
    pub epsilon: f64,
    /// Effective reach `min(ε, t)` (equals `epsilon` for the identity repair).
    pub epsilon_one: f64,
    /// Accepted inflation margin (0 for the identity repair).
    pub t: f64,
    /// Extended-atom generation the free slots were read from (0 for the
    /// identity repair).
    pub generation: usize,
    /// Boundary moves applied, in face order.
    pub cuts: Vec<CutMove>,
    /// The certified map: the original for the identity repair, otherwise
    /// the shifted-boundary neighbour.
    pub map: PiecewiseMap,
    /// Comparison of the repaired map against the original (absent for the
    /// identity repair).
    pub perturbation: Option<PerturbationReport>,
    /// Certificate of `map`.
    pub certificate: Certificate,
}

/// One boundary facet between two pieces: the plane `x[axis] = value`
/// restricted to `extent` (a box degenerate along `axis`).
#[derive(Debug, Clone)]
struct Face {
    left: PieceId,
    right: PieceId,
    axis: usize,
    value: f64,
    extent: AxisBox,
}

/// Repairs `map` into a certifiable `ε`-perturbation.
///
/// If the map already certifies it is returned unchanged. Otherwise the
/// boundary facets are moved into the widest slots left free by the
/// extended atoms, deepening the refinement until the candidate certifies
/// or the generation cap is hit.
pub fn repair(
    map: &PiecewiseMap,
    epsilon: f64,
    opts: &CertifyOptions,
) -> Result<Repair, GenericityError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(GenericityError::BadEpsilon(epsilon));
    }
    if let Some(cert) = certify_validating(map, opts)? {
        return Ok(Repair {
            moved: false,
            epsilon,
            epsilon_one: epsilon,
            t: 0.0,
            generation: 0,
            cuts: Vec::new(),
            map: map.clone(),
            perturbation: None,
            certificate: cert,
        });
    }

    let ext = extend_pieces(map, epsilon)?;
    let faces = collect_faces(map.partition())?;
    let diam = map.ambient().diameter(map.metric());
    let aopts = AtomOptions {
        resolution: opts.resolution,
        box_budget: opts.atom_budget,
    };
    let k_first = (1..=opts.k_max)
        .find(|&k| map.lambda().powi(k as i32) * diam < ext.epsilon_one / 2.0)
        .ok_or(GenericityError::Uncertified {
            last: Inconclusive {
                reason: crate::certify::InconclusiveReason::WorkDepth,
                k_reached: 0,
                separation: 0.0,
                work: 0,
            },
        })?;

    let mut last_failure: Option<GenericityError> = None;
    for k in k_first..=opts.k_max {
        let set = extended_atoms(map, &ext, k, &aopts)?;
        let cuts = match plan_cuts(&faces, &set, map.partition(), ext.epsilon_one, k) {
            Ok(cuts) => cuts,
            Err(e @ GenericityError::NoGap { .. }) => {
                last_failure = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let candidate = apply_cuts(map, &faces, &cuts)?;
        let report = is_epsilon_perturbation(map, &candidate, epsilon, PERTURBATION_SAMPLES)?;
        if !report.verdict {
            return Err(GenericityError::Verification {
                what: format!(
                    "moved boundaries exceed epsilon: gaps ({}, {}, {})",
                    report.c0_gap, report.rate_gap, report.partition_gap
                ),
            });
        }
        match certify(&candidate, opts)? {
            crate::certify::CertifyOutcome::Certified(cert) => {
                return Ok(Repair {
                    moved: true,
                    epsilon,
                    epsilon_one: ext.epsilon_one,
                    t: ext.t,
                    generation: k,
                    cuts,
                    map: candidate,
                    perturbation: Some(report),
                    certificate: *cert,
                });
            }
            crate::certify::CertifyOutcome::Inconclusive(inc) => {
                last_failure = Some(GenericityError::Uncertified { last: inc });
            }
        }
    }
    Err(last_failure.unwrap_or(GenericityError::NoExtension { tried: 0 }))
}

/// Runs certification, mapping `Certified` to `Some`, `Inconclusive` to
/// `None`, and letting errors (invalid map, bad options) propagate.
fn certify_validating(
    map: &PiecewiseMap,
    opts: &CertifyOptions,
) -> Result<Option<Certificate>, GenericityError> {
    match certify(map, opts)? {
        crate::certify::CertifyOutcome::Certified(cert) => Ok(Some(*cert)),
        crate::certify::CertifyOutcome::Inconclusive(_) => Ok(None),
    }
}

/// Boundary facets of the partition: per piece pair, each intersection box
/// degenerate in exactly one axis. Corner contacts (degenerate in several
/// axes) carry no facet and are skipped.
fn collect_faces(partition: &Partition) -> Result<Vec<Face>, GenericityError> {
    let mut faces = Vec::new();
    let pieces = partition.pieces();
    for (i, a) in pieces.iter().enumerate() {
        for b in &pieces[i + 1..] {
            let shared = a.region().intersect(b.region());
            for sb in shared.boxes() {
                let degenerate: Vec<usize> = (0..sb.dim())
                    .filter(|&ax| sb.lo()[ax] == sb.hi()[ax])
                    .collect();
                if degenerate.len() != 1 {
                    continue;
                }
                let axis = degenerate[0];
                faces.push(Face {
                    left: a.id(),
                    right: b.id(),
                    axis,
                    value: sb.lo()[axis],
                    extent: sb.clone(),
                });
            }
        }
    }
    Ok(faces)
}

/// For every face, finds the widest slot in the ε₁-window around its value
/// that no extended atom touches, and plans the move to the slot midpoint.
fn plan_cuts(
    faces: &[Face],
    set: &AtomSet,
    partition: &Partition,
    epsilon_one: f64,
    generation: usize,
) -> Result<Vec<CutMove>, GenericityError> {
    let mut cuts = Vec::with_capacity(faces.len());
    for face in faces {
        let window = face_window(face, partition, epsilon_one);
        let Some((win_lo, win_hi)) = window else {
            return Err(GenericityError::NoGap {
                axis: face.axis,
                value: face.value,
                generation,
            });
        };
        let forbidden = forbidden_intervals(face, set, win_lo, win_hi);
        let Some(target) = widest_free_slot(win_lo, win_hi, &forbidden, face.value) else {
            return Err(GenericityError::NoGap {
                axis: face.axis,
                value: face.value,
                generation,
            });
        };
        cuts.push(CutMove {
            axis: face.axis,
            from: face.value,
            to: target,
        });
    }
    Ok(cuts)
}

/// Admissible interval for the moved facet: the ε₁ window shrunk by the
/// backoff, clamped so every abutting piece box keeps positive width.
fn face_window(face: &Face, partition: &Partition, epsilon_one: f64) -> Option<(f64, f64)> {
    let w = WINDOW_BACKOFF * epsilon_one;
    let mut lo = face.value - w;
    let mut hi = face.value + w;
    for piece in partition.pieces() {
        if piece.id() != face.left && piece.id() != face.right {
            continue;
        }
        for b in piece.region().boxes() {
            if !touches_face(b, face) {
                continue;
            }
            if b.hi()[face.axis] == face.value {
                lo = lo.max(b.lo()[face.axis]);
            }
            if b.lo()[face.axis] == face.value {
                hi = hi.min(b.hi()[face.axis]);
            }
        }
    }
    (lo < hi).then_some((lo, hi))
}

/// A box abuts the face when it touches the face value along the face axis
/// and overlaps the facet's extent transversally.
fn touches_face(b: &AxisBox, face: &Face) -> bool {
    let touches =
        b.hi()[face.axis] == face.value || b.lo()[face.axis] == face.value;
    touches && transverse_overlap(b, face)
}

fn transverse_overlap(b: &AxisBox, face: &Face) -> bool {
    (0..b.dim()).all(|ax| {
        ax == face.axis
            || (b.lo()[ax] <= face.extent.hi()[ax] && face.extent.lo()[ax] <= b.hi()[ax])
    })
}

/// Axis projections of every atom box that crosses the facet's transverse
/// extent, merged into disjoint closed intervals and clipped to the window.
fn forbidden_intervals(face: &Face, set: &AtomSet, win_lo: f64, win_hi: f64) -> Vec<(f64, f64)> {
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for atom in set.atoms() {
        for b in atom.cover().boxes() {
            if !transverse_overlap(b, face) {
                continue;
            }
            let lo = b.lo()[face.axis];
            let hi = b.hi()[face.axis];
            if hi < win_lo || lo > win_hi {
                continue;
            }
            intervals.push((lo.max(win_lo), hi.min(win_hi)));
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

/// Midpoint of the widest sub-interval of `[win_lo, win_hi]` avoiding all
/// forbidden intervals. Ties go to the slot whose midpoint is closest to
/// `origin`, then to the leftmost.
fn widest_free_slot(
    win_lo: f64,
    win_hi: f64,
    forbidden: &[(f64, f64)],
    origin: f64,
) -> Option<f64> {
    let mut slots: Vec<(f64, f64)> = Vec::new();
    let mut cursor = win_lo;
    for &(lo, hi) in forbidden {
        if lo > cursor {
            slots.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < win_hi {
        slots.push((cursor, win_hi));
    }
    let mut best: Option<(f64, f64)> = None;
    for (lo, hi) in slots {
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let replace = match best {
            None => true,
            Some((blo, bhi)) => {
                let bwidth = bhi - blo;
                let mid = 0.5 * (lo + hi);
                let bmid = 0.5 * (blo + bhi);
                width > bwidth
                    || (width == bwidth && (mid - origin).abs() < (bmid - origin).abs())
            }
        };
        if replace {
            best = Some((lo, hi));
        }
    }
    best.map(|(lo, hi)| 0.5 * (lo + hi))
}

/// Rebuilds the map with the planned boundary moves applied to the piece
/// boxes; branch formulas are untouched.
fn apply_cuts(
    map: &PiecewiseMap,
    faces: &[Face],
    cuts: &[CutMove],
) -> Result<PiecewiseMap, GenericityError> {
    let mut regions: Vec<(PieceId, Vec<AxisBox>)> = map
        .partition()
        .pieces()
        .iter()
        .map(|p| (p.id(), p.region().boxes().to_vec()))
        .collect();
    for (face, cut) in faces.iter().zip(cuts) {
        if cut.to == cut.from {
            continue;
        }
        for (id, boxes) in regions.iter_mut() {
            let shrink_hi = *id == face.left;
            let shrink_lo = *id == face.right;
            if !shrink_hi && !shrink_lo {
                continue;
            }
            for b in boxes.iter_mut() {
                if !transverse_overlap(b, face) {
                    continue;
                }
                let mut lo = b.lo().to_vec();
                let mut hi = b.hi().to_vec();
                let mut changed = false;
                if shrink_hi && hi[face.axis] == face.value {
                    hi[face.axis] = cut.to;
                    changed = true;
                }
                if shrink_lo && lo[face.axis] == face.value {
                    lo[face.axis] = cut.to;
                    changed = true;
                }
                if changed {
                    *b = AxisBox::new(lo, hi)?;
                }
            }
        }
    }
    let pieces = regions
        .into_iter()
        .map(|(id, boxes)| {
            let dim = map.dim();
            Ok(Piece::new(id, BoxCover::new(dim, boxes)?))
        })
        .collect::<Result<Vec<_>, GenericityError>>()?;
    let partition = Partition::from_pieces(map.ambient().clone(), pieces)?;
    Ok(PiecewiseMap::new(
        partition,
        map.branches().to_vec(),
        map.metric().clone(),
    )?)
}
