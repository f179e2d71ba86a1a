//! Piecewise maps: one contracting branch per partition piece.
//!
//! A [`PiecewiseMap`] couples a box [`Partition`] with one branch per piece —
//! affine (`x ↦ Ax + b`, the fully certified path) or a named plugin closure
//! with a declared Lipschitz constant. Construction certifies the uniform
//! contraction bound `lambda < 1`; the separation property (branch images
//! with pairwise disjoint closures, strictly inside the ambient box) is
//! checked by [`PiecewiseMap::validate`] through image enclosures, so a
//! passing report is a certificate, not a sample-based guess.

use crate::geometry::{AxisBox, BoxCover, GeometryError, Metric, Point};
use crate::partition::{Partition, PartitionError, PieceId};
use crate::validate::{ValidationReport, Violation};
use std::sync::Arc;
use thiserror::Error;

/// Relative (to the largest ambient side) slack admitted when checking that a
/// solved preimage lies in its piece: absorbs linear-solve rounding without
/// letting a genuinely outside preimage through the forward check below.
const INVERSE_MEMBERSHIP_SLACK_REL: f64 = 1e-12;

/// Relative forward-residual bound accepted by [`PiecewiseMap::invert`].
const INVERSE_FORWARD_CHECK_REL: f64 = 1e-9;

/// Subdivision used by [`PiecewiseMap::validate`] for image enclosures,
/// relative to the ambient diameter. Affine images of boxes are exact at any
/// resolution; this matters only for plugin branches and multi-box pieces.
const VALIDATE_RESOLUTION_REL: f64 = 1.0 / 64.0;

/// Keeps the certified contraction bound inside the open interval (0, 1):
/// a branch with measured bound 0 (constant map) is reported at this floor,
/// which is still a valid upper bound.
const RATE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("{pieces} pieces but {branches} branches")]
    BranchCount { pieces: usize, branches: usize },
    #[error("branch {id} has dimension {found}, pieces have {expected}")]
    BranchDimension {
        id: PieceId,
        expected: usize,
        found: usize,
    },
    #[error("uniform contraction bound {rate} is not below 1")]
    NotContracting { rate: f64 },
    #[error("point {coords:?} lies outside the ambient box")]
    OutsideAmbient { coords: Vec<f64> },
    #[error("point {coords:?} lies outside the image of the map")]
    OutsideImage { coords: Vec<f64> },
    #[error("no piece with id {id}")]
    UnknownPiece { id: PieceId },
    #[error("branch {id} is a plugin; inversion requires affine branches")]
    PluginInverse { id: PieceId },
    #[error("maps are not comparable: {what}")]
    Mismatch { what: String },
    #[error("epsilon must be strictly positive, got {0}")]
    BadEpsilon(f64),
    #[error("sample count must be at least 1")]
    BadSamples,
}

/// Small dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, GeometryError> {
        if n == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if data.len() != n * n {
            return Err(GeometryError::DimensionMismatch {
                left: n * n,
                right: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Matrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `|A|·x` with entrywise absolute values; propagates box half-widths.
    fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).abs() * x[j]).sum())
            .collect()
    }

    /// Operator norm for `Linf` (weights `None`) or weighted `Linf`:
    /// `max_i Σ_j (w_i/w_j)·|a_ij|`. Exact.
    fn weighted_inf_norm(&self, weights: Option<&[f64]>) -> f64 {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let scale = match weights {
                            Some(w) => w[i] / w[j],
                            None => 1.0,
                        };
                        scale * self.get(i, j).abs()
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gaussian elimination with partial pivoting; `None` on a singular
    /// matrix (an exactly zero pivot column).
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .unwrap();
            if a[pivot_row * n + col] == 0.0 {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                b.swap(col, pivot_row);
            }
            let pivot = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
                b[r] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for j in row + 1..n {
                acc -= a[row * n + j] * x[j];
            }
            x[row] = acc / a[row * n + row];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Affine branch `x ↦ Ax + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: Matrix,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Matrix, offset: Vec<f64>) -> Result<Self, GeometryError> {
        if matrix.dim() != offset.len() {
            return Err(GeometryError::DimensionMismatch {
                left: matrix.dim(),
                right: offset.len(),
            });
        }
        if !offset.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(AffineMap { matrix, offset })
    }

    /// 1D convenience: `x ↦ a·x + b`.
    pub fn scalar(a: f64, b: f64) -> Result<Self, GeometryError> {
        AffineMap::new(Matrix::new(1, vec![a])?, vec![b])
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.mul_vec(x);
        for (yi, bi) in y.iter_mut().zip(&self.offset) {
            *yi += bi;
        }
        y
    }
}

/// Opaque branch supplied by the embedding application. The evaluator is
/// trusted to satisfy the declared Lipschitz constant on its piece (and, when
/// `extendable`, on the whole ambient box); `injective` declares that the
/// branch is a homeomorphism onto its image. Enclosures built from plugins
/// are certified *relative to these declarations*.
#[derive(Clone)]
pub struct PluginMap {
    name: String,
    eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    lipschitz: f64,
    injective: bool,
    extendable: bool,
}

impl PluginMap {
    pub fn new(
        name: impl Into<String>,
        lipschitz: f64,
        injective: bool,
        eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    ) -> Self {
        PluginMap {
            name: name.into(),
            eval,
            lipschitz,
            injective,
            extendable: false,
        }
    }

    /// Declares the evaluator valid on the whole ambient box, which lets the
    /// genericity machinery extend the piece domain.
    pub fn extendable(mut self) -> Self {
        self.extendable = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_injective(&self) -> bool {
        self.injective
    }

    pub fn is_extendable(&self) -> bool {
        self.extendable
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }
}

impl std::fmt::Debug for PluginMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginMap")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("injective", &self.injective)
            .field("extendable", &self.extendable)
            .finish()
    }
}

/// One branch of a piecewise map.
#[derive(Debug, Clone)]
pub enum PieceMap {
    Affine(AffineMap),
    Plugin(PluginMap),
}

impl PieceMap {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PieceMap::Affine(a) => a.eval(x),
            PieceMap::Plugin(p) => p.eval(x),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            PieceMap::Affine(a) => Some(a.matrix.dim()),
            PieceMap::Plugin(_) => None,
        }
    }

    /// Certified upper bound on the branch Lipschitz constant under `metric`.
    /// Affine: exact operator norm for `Linf`-type metrics, the
    /// `sqrt(‖A‖₁·‖A‖_∞)` bound for `L2`. Plugin: the declared constant.
    pub fn contraction_bound(&self, metric: &Metric) -> f64 {
        match self {
            PieceMap::Affine(a) => match metric {
                Metric::Linf => a.matrix.weighted_inf_norm(None),
                Metric::WeightedLinf(w) => a.matrix.weighted_inf_norm(Some(w)),
                Metric::L2 => (a.matrix.one_norm() * a.matrix.weighted_inf_norm(None)).sqrt(),
            },
            PieceMap::Plugin(p) => p.lipschitz,
        }
    }

    fn injective_certified(&self) -> bool {
        match self {
            PieceMap::Affine(a) => {
                let n = a.matrix.dim();
                a.matrix.solve(&vec![0.0; n]).is_some()
            }
            PieceMap::Plugin(p) => p.injective,
        }
    }

    /// Enclosure of the branch image of one cell: exact bounding box for
    /// affine branches, center image padded by `L·radius` for plugins.
    pub(crate) fn cell_image(&self, cell: &AxisBox, metric: &Metric) -> AxisBox {
        match self {
            PieceMap::Affine(a) => {
                let c = cell.center();
                let half: Vec<f64> = (0..cell.dim()).map(|i| 0.5 * cell.side(i)).collect();
                let ic = a.eval(c.coords());
                let ih = a.matrix.abs_mul_vec(&half);
                let lo = ic.iter().zip(&ih).map(|(c, h)| c - h).collect();
                let hi = ic.iter().zip(&ih).map(|(c, h)| c + h).collect();
                AxisBox::new(lo, hi).expect("affine image of a finite box is a finite box")
            }
            PieceMap::Plugin(p) => {
                let c = cell.center();
                let ic = p.eval(c.coords());
                let radius = p.lipschitz * cell.metric_radius(metric);
                let half = metric.ball_half_widths(radius, cell.dim());
                let lo = ic.iter().zip(&half).map(|(c, h)| c - h).collect();
                let hi = ic.iter().zip(&half).map(|(c, h)| c + h).collect();
                AxisBox::new(lo, hi).expect("plugin image enclosure is a finite box")
            }
        }
    }
}

/// A piecewise contracting map on a box partition.
#[derive(Debug, Clone)]
pub struct PiecewiseMap {
    partition: Partition,
    branches: Vec<PieceMap>,
    metric: Metric,
    lambda: f64,
}

impl PiecewiseMap {
    /// Couples a partition with one branch per piece (in piece-id order) and
    /// certifies the uniform contraction bound. Fails when the bound is not
    /// below 1; geometric separation is checked by [`PiecewiseMap::validate`].
    pub fn new(
        partition: Partition,
        branches: Vec<PieceMap>,
        metric: Metric,
    ) -> Result<Self, MapError> {
        if branches.len() != partition.len() {
            return Err(MapError::BranchCount {
                pieces: partition.len(),
                branches: branches.len(),
            });
        }
        metric.check_dim(partition.dim())?;
        for (piece, branch) in partition.pieces().iter().zip(&branches) {
            if let Some(found) = branch.dim() {
                if found != partition.dim() {
                    return Err(MapError::BranchDimension {
                        id: piece.id(),
                        expected: partition.dim(),
                        found,
                    });
                }
            }
        }
        let rate = branches
            .iter()
            .map(|b| b.contraction_bound(&metric))
            .fold(0.0, f64::max);
        if !(rate < 1.0) {
            return Err(MapError::NotContracting { rate });
        }
        Ok(PiecewiseMap {
            partition,
            branches,
            metric,
            lambda: rate.max(RATE_FLOOR),
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn ambient(&self) -> &AxisBox {
        self.partition.ambient()
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Certified uniform contraction bound, inside (0, 1).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn branches(&self) -> &[PieceMap] {
        &self.branches
    }

    pub fn branch(&self, id: PieceId) -> Result<&PieceMap, MapError> {
        let idx = self
            .partition
            .pieces()
            .iter()
            .position(|p| p.id() == id)
            .ok_or(MapError::UnknownPiece { id })?;
        Ok(&self.branches[idx])
    }

    /// Evaluates the branch of piece `id` (regardless of whether `x` lies in
    /// that piece — callers iterating symbolically rely on this).
    pub fn eval_branch(&self, id: PieceId, x: &Point) -> Result<Point, MapError> {
        let y = self.branch(id)?.eval(x.coords());
        Ok(Point::new(y)?)
    }

    /// All values of the (multi-valued on the separation line) map at `x`:
    /// one `(piece, image)` pair per piece containing `x`, ascending by id.
    pub fn apply(&self, x: &Point) -> Result<Vec<(PieceId, Point)>, MapError> {
        if !self.ambient().contains(x) {
            return Err(MapError::OutsideAmbient {
                coords: x.coords().to_vec(),
            });
        }
        let ids = self.partition.member_ids(x.coords(), 0.0);
        ids.into_iter()
            .map(|id| Ok((id, self.eval_branch(id, x)?)))
            .collect()
    }

    /// The unique preimage of `y` under the separation property. Errors when
    /// `y` lies in none of the branch images (the gap region) and on plugin
    /// branches, which carry no certified inverse.
    pub fn invert(&self, y: &Point) -> Result<Point, MapError> {
        if y.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                left: y.dim(),
                right: self.dim(),
            }
            .into());
        }
        let scale = (0..self.dim())
            .map(|a| self.ambient().side(a))
            .fold(0.0, f64::max);
        let membership_slack = INVERSE_MEMBERSHIP_SLACK_REL * scale;
        let forward_tol = INVERSE_FORWARD_CHECK_REL * scale;
        for (piece, branch) in self.partition.pieces().iter().zip(&self.branches) {
            match branch {
                PieceMap::Affine(a) => {
                    let rhs: Vec<f64> = y
                        .coords()
                        .iter()
                        .zip(a.offset())
                        .map(|(yi, bi)| yi - bi)
                        .collect();
                    let Some(x) = a.matrix.solve(&rhs) else {
                        continue;
                    };
                    if !piece.region().contains_point_slack(&x, membership_slack) {
                        continue;
                    }
                    let residual = self.metric.dist_slices(&a.eval(&x), y.coords());
                    if residual <= forward_tol {
                        return Ok(Point::new(x)?);
                    }
                }
                PieceMap::Plugin(_) => {
                    // No certified inverse; report only if the plugin image
                    // could actually contain y, otherwise keep searching.
                    let resolution = VALIDATE_RESOLUTION_REL * scale;
                    let enclosure = self.image_enclosure(piece.id(), resolution)?;
                    if enclosure.contains_point(y) {
                        return Err(MapError::PluginInverse { id: piece.id() });
                    }
                }
            }
        }
        Err(MapError::OutsideImage {
            coords: y.coords().to_vec(),
        })
    }

    /// Enclosure of the image of piece `id`: the piece region is subdivided
    /// into cells of side at most `resolution` and each cell image is boxed.
    /// Always an outer enclosure; exact (any resolution) for an affine branch
    /// on a single box.
    pub fn image_enclosure(&self, id: PieceId, resolution: f64) -> Result<BoxCover, MapError> {
        let piece = self
            .partition
            .piece(id)
            .ok_or(MapError::UnknownPiece { id })?;
        let branch = self.branch(id)?;
        let mut images = Vec::new();
        for b in piece.region().boxes() {
            for cell in b.subdivide(resolution)? {
                images.push(branch.cell_image(&cell, &self.metric));
            }
        }
        Ok(BoxCover::new(self.dim(), images)?)
    }

    /// Full validity check: partition geometry, branch injectivity, pairwise
    /// separation of branch image enclosures, and strict containment of the
    /// images in the ambient interior.
    pub fn validate(&self) -> ValidationReport {
        let scale = (0..self.dim())
            .map(|a| self.ambient().side(a))
            .fold(0.0, f64::max);
        self.validate_with(VALIDATE_RESOLUTION_REL * scale)
    }

    /// [`PiecewiseMap::validate`] with an explicit enclosure resolution.
    pub fn validate_with(&self, resolution: f64) -> ValidationReport {
        let mut report = self.partition.validate();
        if !(self.lambda < 1.0) {
            report.push(Violation::NotContracting { rate: self.lambda });
        }
        for (piece, branch) in self.partition.pieces().iter().zip(&self.branches) {
            if !branch.injective_certified() {
                report.push(Violation::NonInjectiveBranch { id: piece.id() });
            }
        }
        let enclosures: Vec<(PieceId, Option<BoxCover>)> = self
            .partition
            .pieces()
            .iter()
            .map(|p| (p.id(), self.image_enclosure(p.id(), resolution).ok()))
            .collect();
        let ambient = self.ambient();
        for (id, enc) in &enclosures {
            let Some(enc) = enc else { continue };
            if enc.is_empty() {
                continue;
            }
            let hull = enc.bounding_box().expect("nonempty cover has a hull");
            let strictly_inside = (0..self.dim())
                .all(|a| ambient.lo()[a] < hull.lo()[a] && hull.hi()[a] < ambient.hi()[a]);
            if !strictly_inside {
                report.push(Violation::ImageEscapesInterior { id: *id });
            }
        }
        for (i, (id_a, enc_a)) in enclosures.iter().enumerate() {
            for (id_b, enc_b) in &enclosures[i + 1..] {
                let (Some(a), Some(b)) = (enc_a, enc_b) else {
                    continue;
                };
                if a.is_empty() || b.is_empty() {
                    continue;
                }
                let dist = a
                    .min_distance(b, &self.metric)
                    .expect("nonempty covers of equal dimension");
                if dist <= 0.0 {
                    report.push(Violation::ImagesNotSeparated {
                        piece_a: *id_a,
                        piece_b: *id_b,
                        distance: dist,
                    });
                }
            }
        }
        report
    }
}

/// Outcome of comparing two maps against the three-part perturbation bound
/// (branch gap on shared pieces, contraction-rate gap, partition distance).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub epsilon: f64,
    /// Sup of the branch difference over each shared region `B_i ∩ A_i`.
    pub c0_gap: f64,
    /// `|lambda_F − lambda_G|`.
    pub rate_gap: f64,
    /// Partition distance (Hausdorff over matched pieces).
    pub partition_gap: f64,
    /// Pieces whose regions do not meet at all: they contribute 0 to
    /// `c0_gap` and are listed here so the caller can judge that blind spot.
    pub disjoint_pieces: Vec<PieceId>,
    /// All three gaps strictly below `epsilon`.
    pub verdict: bool,
}

/// Compares `g` against `f` at scale `epsilon`.
///
/// Affine branch pairs are compared exactly: the difference is affine and its
/// metric norm is convex, so the sup over each intersection box is attained
/// at a corner. Pairs involving a plugin are sampled on a mesh fine enough
/// that the Lipschitz slack `(λ_F + λ_G)·radius` stays below `epsilon/10`,
/// with at least `samples` cells per axis.
pub fn is_epsilon_perturbation(
    f: &PiecewiseMap,
    g: &PiecewiseMap,
    epsilon: f64,
    samples: usize,
) -> Result<PerturbationReport, MapError> {
    if !(epsilon > 0.0) {
        return Err(MapError::BadEpsilon(epsilon));
    }
    if samples == 0 {
        return Err(MapError::BadSamples);
    }
    if f.dim() != g.dim() {
        return Err(MapError::Mismatch {
            what: format!("dimensions {} vs {}", f.dim(), g.dim()),
        });
    }
    if f.metric() != g.metric() {
        return Err(MapError::Mismatch {
            what: "metrics differ".into(),
        });
    }
    if f.ambient() != g.ambient() {
        return Err(MapError::Mismatch {
            what: "ambient boxes differ".into(),
        });
    }
    if f.partition.len() != g.partition.len() {
        return Err(MapError::Mismatch {
            what: format!(
                "piece counts {} vs {}",
                f.partition.len(),
                g.partition.len()
            ),
        });
    }
    let metric = f.metric();
    let mut c0_gap = 0.0f64;
    let mut disjoint_pieces = Vec::new();
    for (pf, pg) in f.partition.pieces().iter().zip(g.partition.pieces()) {
        let shared = pf.region().intersect(pg.region());
        if shared.is_empty() {
            disjoint_pieces.push(pf.id());
            continue;
        }
        let bf = f.branch(pf.id())?;
        let bg = g.branch(pg.id())?;
        let sup = branch_gap_sup(bf, bg, &shared, metric, epsilon, samples);
        c0_gap = c0_gap.max(sup);
    }
    let rate_gap = (f.lambda - g.lambda).abs();
    let partition_gap = f
        .partition
        .distance_to(&g.partition, metric, epsilon / 10.0)?;
    Ok(PerturbationReport {
        epsilon,
        c0_gap,
        rate_gap,
        partition_gap,
        disjoint_pieces,
        verdict: c0_gap < epsilon && rate_gap < epsilon && partition_gap < epsilon,
    })
}

/// Upper bound (exact for affine pairs) on `sup_{x ∈ region} dist(f x, g x)`.
fn branch_gap_sup(
    bf: &PieceMap,
    bg: &PieceMap,
    region: &BoxCover,
    metric: &Metric,
    epsilon: f64,
    samples: usize,
) -> f64 {
    if let (PieceMap::Affine(af), PieceMap::Affine(ag)) = (bf, bg) {
        let dm = af.matrix().sub(ag.matrix());
        let db: Vec<f64> = af
            .offset()
            .iter()
            .zip(ag.offset())
            .map(|(a, b)| a - b)
            .collect();
        let diff = AffineMap::new(dm, db).expect("difference of valid affine maps");
        let mut sup = 0.0f64;
        for b in region.boxes() {
            for corner in corner_points(b) {
                let v = diff.eval(&corner);
                sup = sup.max(metric.gap_norm(v.iter().map(|x| x.abs())));
            }
        }
        return sup;
    }
    let slack_rate = bf.contraction_bound(metric) + bg.contraction_bound(metric);
    let mut sup = 0.0f64;
    for b in region.boxes() {
        let max_side = (0..b.dim()).map(|a| b.side(a)).fold(0.0, f64::max);
        let mut side = (max_side / samples as f64).max(f64::MIN_POSITIVE);
        if slack_rate > 0.0 {
            // cell radius ≤ diameter settles the Lipschitz slack below ε/10
            let target = epsilon / (10.0 * slack_rate);
            side = side.min(target.max(f64::MIN_POSITIVE));
        }
        for cell in b
            .subdivide(side)
            .expect("positive subdivision side")
        {
            let c = cell.center();
            let gap = metric.dist_slices(&bf.eval(c.coords()), &bg.eval(c.coords()));
            sup = sup.max(gap + slack_rate * cell.metric_radius(metric));
        }
    }
    sup
}

fn corner_points(b: &AxisBox) -> Vec<Vec<f64>> {
    let dim = b.dim();
    (0u32..(1u32 << dim))
        .map(|mask| {
            (0..dim)
                .map(|i| {
                    if mask & (1 << i) != 0 {
                        b.hi()[i]
                    } else {
                        b.lo()[i]
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;
    use crate::samples;

    const TOL: f64 = 1e-12;

    #[test]
    fn contraction_rate_of_half_slope_fixture() {
        let m = samples::double_sink();
        assert_eq!(m.lambda(), 0.5);
    }

    #[test]
    fn contraction_rate_is_max_row_sum_under_linf() {
        let a = AffineMap::new(
            Matrix::new(2, vec![0.3, 0.1, 0.0, 0.4]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let bound = PieceMap::Affine(a).contraction_bound(&Metric::Linf);
        assert!((bound - 0.4).abs() < TOL);
    }

    #[test]
    fn weighted_rate_rescales_rows_and_columns() {
        // one off-diagonal entry: ‖A‖ = (w_1/w_2)·|a_12| = (2/1)·0.3 = 0.6
        let a = AffineMap::new(
            Matrix::new(2, vec![0.0, 0.3, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let w = Metric::weighted_linf(vec![2.0, 1.0]).unwrap();
        let bound = PieceMap::Affine(a).contraction_bound(&w);
        assert!((bound - 0.6).abs() < TOL);
    }

    #[test]
    fn identity_slope_is_rejected() {
        let err = samples::two_branch_1d(1.0, 0.0, 0.5, 0.2, 0.5);
        assert!(matches!(err, Err(MapError::NotContracting { .. })));
    }

    #[test]
    fn validate_accepts_separated_fixture() {
        assert!(samples::double_sink().validate().is_valid());
        // images [0.1,0.35] and [0.45,0.7]: separated, still valid
        let shifted = samples::two_branch_1d(0.5, 0.1, 0.5, 0.2, 0.5).unwrap();
        assert!(shifted.validate().is_valid());
    }

    #[test]
    fn validate_flags_overlapping_images() {
        // images [0.1,0.35] and [0.3,0.55] overlap
        let bad = samples::two_branch_1d(0.5, 0.1, 0.5, 0.05, 0.5).unwrap();
        let report = bad.validate();
        assert!(report
            .violations()
            .iter()
            .any(|v| matches!(v, Violation::ImagesNotSeparated { piece_a: 1, piece_b: 2, .. })));
    }

    #[test]
    fn validate_flags_image_reaching_the_boundary() {
        // second branch image [0.75, 1.0] touches the ambient boundary
        let bad = samples::two_branch_1d(0.5, 0.1, 0.5, 0.5, 0.5).unwrap();
        let report = bad.validate();
        assert!(report
            .violations()
            .iter()
            .any(|v| matches!(v, Violation::ImageEscapesInterior { id: 2 })));
    }

    #[test]
    fn apply_is_single_valued_off_the_separation_line() {
        let m = samples::double_sink();
        let out = m.apply(&point(&[0.2])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 1);
        assert!((out[0].1[0] - 0.2).abs() < TOL);
    }

    #[test]
    fn apply_branches_on_the_separation_line() {
        let m = samples::double_sink();
        let out = m.apply(&point(&[0.5])).unwrap();
        let ids: Vec<PieceId> = out.iter().map(|(id, _)| *id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!((out[0].1[0] - 0.35).abs() < TOL);
        assert!((out[1].1[0] - 0.65).abs() < TOL);
    }

    #[test]
    fn apply_rejects_points_outside_the_ambient_box() {
        let m = samples::double_sink();
        assert!(matches!(
            m.apply(&point(&[1.2])),
            Err(MapError::OutsideAmbient { .. })
        ));
    }

    #[test]
    fn invert_recovers_interior_and_boundary_preimages() {
        let m = samples::double_sink();
        let x = m.invert(&point(&[0.2])).unwrap();
        assert!((x[0] - 0.2).abs() < TOL);
        let x = m.invert(&point(&[0.9])).unwrap();
        assert!((x[0] - 1.0).abs() < TOL);
    }

    #[test]
    fn invert_rejects_the_gap_region() {
        let m = samples::double_sink();
        assert!(matches!(
            m.invert(&point(&[0.55])),
            Err(MapError::OutsideImage { .. })
        ));
    }

    #[test]
    fn perturbation_report_sees_offset_shift_exactly() {
        let f = samples::double_sink();
        let g = samples::two_branch_1d(0.5, 0.12, 0.5, 0.4, 0.5).unwrap();
        let report = is_epsilon_perturbation(&f, &g, 0.05, 8).unwrap();
        assert!((report.c0_gap - 0.02).abs() < 1e-9);
        assert_eq!(report.rate_gap, 0.0);
        assert_eq!(report.partition_gap, 0.0);
        assert!(report.verdict);

        let tight = is_epsilon_perturbation(&f, &g, 0.01, 8).unwrap();
        assert!(!tight.verdict);
    }

    #[test]
    fn perturbation_report_sees_boundary_shift() {
        let f = samples::double_sink();
        let g = samples::two_branch_1d(0.5, 0.1, 0.5, 0.4, 0.45).unwrap();
        let report = is_epsilon_perturbation(&f, &g, 0.06, 8).unwrap();
        assert_eq!(report.c0_gap, 0.0);
        assert_eq!(report.rate_gap, 0.0);
        assert!((report.partition_gap - 0.05).abs() < TOL);
        assert!(report.verdict);
    }

    #[test]
    fn perturbation_requires_positive_epsilon() {
        let f = samples::double_sink();
        assert!(matches!(
            is_epsilon_perturbation(&f, &f, 0.0, 8),
            Err(MapError::BadEpsilon(_))
        ));
    }

    #[test]
    fn plugin_branch_gap_bound_never_undershoots() {
        // compare an affine branch against a plugin wrapping the same formula
        // plus a small bump; the sampled bound must dominate the true sup.
        let part = Partition::new(
            AxisBox::interval(0.0, 1.0).unwrap(),
            vec![BoxCover::from_box(AxisBox::interval(0.0, 1.0).unwrap())],
        )
        .unwrap();
        let f = PiecewiseMap::new(
            part.clone(),
            vec![PieceMap::Affine(AffineMap::scalar(0.25, 0.3).unwrap())],
            Metric::Linf,
        )
        .unwrap();
        let g = PiecewiseMap::new(
            part,
            vec![PieceMap::Plugin(PluginMap::new(
                "bumped-quarter-slope",
                0.3,
                true,
                Arc::new(|x: &[f64]| vec![0.25 * x[0] + 0.3 + 0.01 * (3.0 * x[0]).sin()]),
            ))],
            Metric::Linf,
        )
        .unwrap();
        let report = is_epsilon_perturbation(&f, &g, 0.5, 16).unwrap();
        // true sup of |0.01 sin(3x)| on [0,1] is 0.01 (sin(3·0.523…)≈1 not reached; max at x where 3x=π/2)
        let true_sup = 0.01;
        assert!(report.c0_gap >= true_sup - 1e-9);
        assert!(report.c0_gap < 0.05);
    }

    #[test]
    fn solve_handles_permuted_pivots_and_singularity() {
        let m = Matrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let x = m.solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
        let s = Matrix::new(2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(s.solve(&[1.0, 2.0]).is_none());
    }
}
