//! Points, metrics, axis-aligned boxes and finite box covers.
//!
//! Covers are the enclosure currency of the whole crate: every set the
//! certifier reasons about (piece regions, branch images, atoms, separation
//! lines) is represented as a finite union of closed axis-aligned boxes.
//! Distance queries come with one-sided guarantees spelled out per method:
//! minimum distances are certified lower bounds (exact for boxes), Hausdorff
//! distances and diameters are certified upper bounds.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("box corners out of order on axis {axis}: lo {lo} > hi {hi}")]
    CornerOrder { axis: usize, lo: f64, hi: f64 },
    #[error("metric weights must be finite and strictly positive")]
    BadWeights,
    #[error("operation undefined on an empty cover")]
    EmptyCover,
    #[error("subdivision resolution must be strictly positive, got {0}")]
    BadResolution(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// A point of the ambient space. Coordinates are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Convenience constructor used pervasively in tests and examples.
pub fn point(coords: &[f64]) -> Point {
    Point::new(coords.to_vec()).expect("finite coordinates")
}

/// The metric of the ambient space.
///
/// `WeightedLinf` scales axis `i` by `weights[i] > 0`; its unit ball is a box,
/// which keeps every box-to-box distance below exact. `L2` distances on boxes
/// are exact as well (per-axis gap decomposition), but Hausdorff queries fall
/// back to grid subdivision.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Linf,
    WeightedLinf(Vec<f64>),
    L2,
}

impl Metric {
    pub fn weighted_linf(weights: Vec<f64>) -> Result<Self, GeometryError> {
        if weights.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(GeometryError::BadWeights);
        }
        Ok(Metric::WeightedLinf(weights))
    }

    /// Checks the metric is usable in dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<(), GeometryError> {
        match self {
            Metric::WeightedLinf(w) if w.len() != dim => Err(GeometryError::DimensionMismatch {
                left: w.len(),
                right: dim,
            }),
            _ => Ok(()),
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, GeometryError> {
        if p.dim() != q.dim() {
            return Err(GeometryError::DimensionMismatch {
                left: p.dim(),
                right: q.dim(),
            });
        }
        self.check_dim(p.dim())?;
        Ok(self.dist_slices(p.coords(), q.coords()))
    }

    pub(crate) fn dist_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        self.gap_norm(a.iter().zip(b).map(|(x, y)| (x - y).abs()))
    }

    /// Metric length of a vector of per-axis non-negative gaps.
    pub(crate) fn gap_norm(&self, gaps: impl Iterator<Item = f64>) -> f64 {
        match self {
            Metric::Linf => gaps.fold(0.0, f64::max),
            Metric::WeightedLinf(w) => gaps.zip(w).map(|(g, wi)| g * wi).fold(0.0, f64::max),
            Metric::L2 => gaps.map(|g| g * g).sum::<f64>().sqrt(),
        }
    }

    /// Per-axis half-widths of a box that contains the metric ball of the
    /// given radius (tight for `Linf`/`WeightedLinf`, bounding for `L2`).
    pub(crate) fn ball_half_widths(&self, radius: f64, dim: usize) -> Vec<f64> {
        match self {
            Metric::Linf | Metric::L2 => vec![radius; dim],
            Metric::WeightedLinf(w) => w.iter().map(|wi| radius / wi).collect(),
        }
    }

    /// Per-axis box sides guaranteeing metric diameter at most `delta`.
    fn sides_for_diameter(&self, delta: f64, dim: usize) -> Vec<f64> {
        match self {
            Metric::Linf => vec![delta; dim],
            Metric::WeightedLinf(w) => w.iter().map(|wi| delta / wi).collect(),
            Metric::L2 => vec![delta / (dim as f64).sqrt(); dim],
        }
    }
}

/// A closed axis-aligned box `[lo_1,hi_1] × … × [lo_n,hi_n]`.
///
/// Degenerate boxes (`lo_i == hi_i` on some axes) are legal and are how lower
/// dimensional faces — separation lines in particular — are represented. The
/// empty box has no representation; operations that can produce an empty
/// intersection return `Option<AxisBox>`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                left: lo.len(),
                right: hi.len(),
            });
        }
        if !lo.iter().chain(hi.iter()).all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        for (axis, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l > h {
                return Err(GeometryError::CornerOrder {
                    axis,
                    lo: *l,
                    hi: *h,
                });
            }
        }
        Ok(AxisBox { lo, hi })
    }

    /// 1D convenience constructor.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        AxisBox::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Point {
        Point(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
        )
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l == h)
    }

    /// Closed membership, exact comparisons.
    pub fn contains(&self, p: &Point) -> bool {
        self.contains_slack(p.coords(), 0.0)
    }

    /// Membership against the box inflated by `slack` on every axis.
    pub fn contains_slack(&self, coords: &[f64], slack: f64) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .enumerate()
                .all(|(i, c)| self.lo[i] - slack <= *c && *c <= self.hi[i] + slack)
    }

    /// `other ⊆ self`, closed boxes, exact comparisons.
    pub fn contains_box(&self, other: &AxisBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// `None` when the closed boxes do not meet.
    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        debug_assert_eq!(self.dim(), other.dim());
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let l = self.lo[i].max(other.lo[i]);
            let h = self.hi[i].min(other.hi[i]);
            if l > h {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(AxisBox { lo, hi })
    }

    pub fn hull(&self, other: &AxisBox) -> AxisBox {
        debug_assert_eq!(self.dim(), other.dim());
        AxisBox {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    /// Outward inflation by `margin ≥ 0` on every axis.
    pub fn inflate(&self, margin: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|l| l - margin).collect(),
            hi: self.hi.iter().map(|h| h + margin).collect(),
        }
    }

    /// Nearest point of the box, componentwise clamp.
    pub fn clamp(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .enumerate()
            .map(|(i, c)| c.clamp(self.lo[i], self.hi[i]))
            .collect()
    }

    /// Exact distance from a point to the box.
    pub fn dist_to_point(&self, p: &Point, metric: &Metric) -> f64 {
        metric.gap_norm(
            p.coords()
                .iter()
                .enumerate()
                .map(|(i, c)| (self.lo[i] - c).max(c - self.hi[i]).max(0.0)),
        )
    }

    /// Exact minimum distance between two closed boxes (per-axis gaps, 0
    /// where the axis slabs overlap; valid decomposition for all metrics).
    pub fn min_distance(&self, other: &AxisBox, metric: &Metric) -> f64 {
        metric.gap_norm((0..self.dim()).map(|i| {
            (other.lo[i] - self.hi[i])
                .max(self.lo[i] - other.hi[i])
                .max(0.0)
        }))
    }

    /// Exact diameter of the box (metric length of the side vector).
    pub fn diameter(&self, metric: &Metric) -> f64 {
        metric.dist_slices(&self.lo, &self.hi)
    }

    /// Half of [`AxisBox::diameter`]: radius of the box around its center.
    pub fn metric_radius(&self, metric: &Metric) -> f64 {
        0.5 * self.diameter(metric)
    }

    /// Number of cells `subdivide_sides` would produce, without materializing.
    fn subdivision_count(&self, max_sides: &[f64]) -> u64 {
        (0..self.dim())
            .map(|i| {
                let s = self.side(i);
                if s <= max_sides[i] {
                    1u64
                } else {
                    (s / max_sides[i]).ceil() as u64
                }
            })
            .product()
    }

    /// Grid subdivision into cells with per-axis side at most `max_sides[i]`.
    /// Cell boundaries hit `lo` and `hi` exactly; cells are produced in
    /// row-major order, so the output is deterministic.
    fn subdivide_sides(&self, max_sides: &[f64]) -> Vec<AxisBox> {
        let dim = self.dim();
        let counts: Vec<usize> = (0..dim)
            .map(|i| {
                let s = self.side(i);
                if s <= max_sides[i] {
                    1
                } else {
                    (s / max_sides[i]).ceil() as usize
                }
            })
            .collect();
        let cuts: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let n = counts[i];
                (0..=n)
                    .map(|j| {
                        if j == n {
                            self.hi[i]
                        } else {
                            self.lo[i] + self.side(i) * (j as f64) / (n as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        let total: usize = counts.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut index = vec![0usize; dim];
        loop {
            let lo: Vec<f64> = (0..dim).map(|i| cuts[i][index[i]]).collect();
            let hi: Vec<f64> = (0..dim).map(|i| cuts[i][index[i] + 1]).collect();
            cells.push(AxisBox { lo, hi });
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return cells;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < counts[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
    }

    /// Uniform-resolution subdivision; see [`AxisBox::subdivide_sides`].
    pub fn subdivide(&self, max_side: f64) -> Result<Vec<AxisBox>, GeometryError> {
        if !(max_side > 0.0) {
            return Err(GeometryError::BadResolution(max_side));
        }
        Ok(self.subdivide_sides(&vec![max_side; self.dim()]))
    }

    pub(crate) fn subdivide_count(&self, max_side: f64) -> u64 {
        self.subdivision_count(&vec![max_side; self.dim()])
    }

    /// `sup_{p ∈ self} dist(p, other)` under an `Linf`-type metric: exact
    /// closed form (per-axis overhang of `self` beyond `other`).
    fn directed_hausdorff_linf(&self, other: &AxisBox, metric: &Metric) -> f64 {
        metric.gap_norm((0..self.dim()).map(|i| {
            (other.lo[i] - self.lo[i])
                .max(self.hi[i] - other.hi[i])
                .max(0.0)
        }))
    }

    /// Corner enumeration (2^n corners, row-major over axes).
    fn corners(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(1 << dim);
        for mask in 0u32..(1u32 << dim) {
            out.push(
                (0..dim)
                    .map(|i| {
                        if mask & (1 << i) != 0 {
                            self.hi[i]
                        } else {
                            self.lo[i]
                        }
                    })
                    .collect(),
            );
        }
        out
    }
}

/// A finite union of closed boxes of a common dimension, kept in canonical
/// form: boxes sorted lexicographically, duplicates and boxes contained in a
/// sibling dropped, and (in dimension 1) overlapping or touching intervals
/// coalesced. The empty cover is a legal value (an empty separation line);
/// most distance queries reject it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCover {
    dim: usize,
    boxes: Vec<AxisBox>,
}

/// Canonicalization gives up on the O(n²) containment sweep beyond this many
/// boxes; sort order and dedup are kept, so determinism is unaffected.
const CONTAINMENT_PRUNE_LIMIT: usize = 2048;

impl BoxCover {
    pub fn new(dim: usize, boxes: Vec<AxisBox>) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        for b in &boxes {
            if b.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    left: dim,
                    right: b.dim(),
                });
            }
        }
        let mut cover = BoxCover { dim, boxes };
        cover.canonicalize();
        Ok(cover)
    }

    pub fn empty(dim: usize) -> Self {
        BoxCover {
            dim,
            boxes: Vec::new(),
        }
    }

    pub fn from_box(b: AxisBox) -> Self {
        BoxCover {
            dim: b.dim(),
            boxes: vec![b],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    fn canonicalize(&mut self) {
        if self.dim == 1 {
            // Coalesce touching or overlapping intervals; set-equal, canonical.
            self.boxes
                .sort_by(|a, b| a.lo[0].total_cmp(&b.lo[0]).then(a.hi[0].total_cmp(&b.hi[0])));
            let mut merged: Vec<AxisBox> = Vec::with_capacity(self.boxes.len());
            for b in self.boxes.drain(..) {
                match merged.last_mut() {
                    Some(last) if b.lo[0] <= last.hi[0] => {
                        if b.hi[0] > last.hi[0] {
                            last.hi[0] = b.hi[0];
                        }
                    }
                    _ => merged.push(b),
                }
            }
            self.boxes = merged;
            return;
        }
        self.boxes.sort_by(lex_box_order);
        self.boxes.dedup();
        if self.boxes.len() <= CONTAINMENT_PRUNE_LIMIT {
            let snapshot = self.boxes.clone();
            self.boxes.retain(|b| {
                !snapshot
                    .iter()
                    .any(|other| other != b && other.contains_box(b))
            });
            // A box equal to another survived dedup already; `retain` above
            // only drops strict containments, so at least one copy remains.
        }
    }

    /// Hull of the union; `None` for the empty cover.
    pub fn bounding_box(&self) -> Option<AxisBox> {
        let mut it = self.boxes.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, b| acc.hull(b)))
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.contains_point_slack(p.coords(), 0.0)
    }

    pub fn contains_point_slack(&self, coords: &[f64], slack: f64) -> bool {
        self.boxes.iter().any(|b| b.contains_slack(coords, slack))
    }

    /// Exact test for `b ⊆ union of self`.
    ///
    /// `b` is cut by every bound plane of the cover that crosses it; each
    /// elementary cell then lies entirely inside or outside every cover box,
    /// so testing cell centers decides containment without tolerances.
    pub fn contains_box(&self, b: &AxisBox) -> bool {
        if self.boxes.iter().any(|c| c.contains_box(b)) {
            return true;
        }
        if self.is_empty() {
            return false;
        }
        let dim = self.dim;
        let mut cell_mids: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for axis in 0..dim {
            let (blo, bhi) = (b.lo[axis], b.hi[axis]);
            if blo == bhi {
                cell_mids.push(vec![blo]);
                continue;
            }
            let mut cuts = vec![blo, bhi];
            for c in &self.boxes {
                for v in [c.lo[axis], c.hi[axis]] {
                    if v > blo && v < bhi {
                        cuts.push(v);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cell_mids.push(cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect());
        }
        let mut index = vec![0usize; dim];
        let mut mid = vec![0.0; dim];
        loop {
            for i in 0..dim {
                mid[i] = cell_mids[i][index[i]];
            }
            if !self.contains_point_slack(&mid, 0.0) {
                return false;
            }
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return true;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < cell_mids[axis].len() {
                    break;
                }
                index[axis] = 0;
            }
        }
    }

    pub fn contains_cover(&self, other: &BoxCover) -> bool {
        other.boxes.iter().all(|b| self.contains_box(b))
    }

    /// Exact distance from a point to the union. Errors on the empty cover.
    pub fn dist_to_point(&self, p: &Point, metric: &Metric) -> Result<f64, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyCover);
        }
        if p.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                left: p.dim(),
                right: self.dim,
            });
        }
        metric.check_dim(self.dim)?;
        Ok(self
            .boxes
            .iter()
            .map(|b| b.dist_to_point(p, metric))
            .fold(f64::INFINITY, f64::min))
    }

    /// Certified lower bound on `dist(self, other)`; exact for box covers
    /// (per-axis gap decomposition holds for all supported metrics).
    pub fn min_distance(&self, other: &BoxCover, metric: &Metric) -> Result<f64, GeometryError> {
        if self.is_empty() || other.is_empty() {
            return Err(GeometryError::EmptyCover);
        }
        self.check_pair(other, metric)?;
        let mut best = f64::INFINITY;
        for a in &self.boxes {
            for b in &other.boxes {
                best = best.min(a.min_distance(b, metric));
                if best == 0.0 {
                    return Ok(0.0);
                }
            }
        }
        Ok(best)
    }

    /// Certified upper bound on the Hausdorff distance, within additive
    /// `delta` of the true value. Exact (and `delta` ignored) whenever each
    /// direction's target is a single box: closed form under `Linf`-type
    /// metrics, corner enumeration under `L2`. The grid fallback subdivides
    /// source boxes into cells of metric diameter ≤ `delta` and pads each
    /// center distance by the cell radius, so the result never undershoots.
    pub fn hausdorff(
        &self,
        other: &BoxCover,
        metric: &Metric,
        delta: f64,
    ) -> Result<f64, GeometryError> {
        if self.is_empty() || other.is_empty() {
            return Err(GeometryError::EmptyCover);
        }
        self.check_pair(other, metric)?;
        let forward = self.directed_hausdorff(other, metric, delta)?;
        let backward = other.directed_hausdorff(self, metric, delta)?;
        Ok(forward.max(backward))
    }

    /// Upper bound on `sup_{p ∈ self} dist(p, other)`.
    fn directed_hausdorff(
        &self,
        other: &BoxCover,
        metric: &Metric,
        delta: f64,
    ) -> Result<f64, GeometryError> {
        if other.boxes.len() == 1 {
            let target = &other.boxes[0];
            let exact = match metric {
                Metric::Linf | Metric::WeightedLinf(_) => self
                    .boxes
                    .iter()
                    .map(|a| a.directed_hausdorff_linf(target, metric))
                    .fold(0.0, f64::max),
                // dist(·, box) is convex, so the sup over a box sits at a corner.
                Metric::L2 => self
                    .boxes
                    .iter()
                    .flat_map(|a| a.corners())
                    .map(|c| target.dist_to_point(&Point(c), metric))
                    .fold(0.0, f64::max),
            };
            return Ok(exact);
        }
        if !(delta > 0.0) {
            return Err(GeometryError::BadResolution(delta));
        }
        let sides = metric.sides_for_diameter(delta, self.dim);
        let mut sup = 0.0f64;
        for a in &self.boxes {
            for cell in a.subdivide_sides(&sides) {
                let slack = cell.metric_radius(metric);
                let d = other.dist_to_point(&cell.center(), metric)?;
                sup = sup.max(d + slack);
            }
        }
        Ok(sup)
    }

    /// Certified upper bound on the diameter of the union: the diameter of
    /// the bounding box. Exact for a single box.
    pub fn diameter(&self, metric: &Metric) -> Result<f64, GeometryError> {
        metric.check_dim(self.dim)?;
        let hull = self.bounding_box().ok_or(GeometryError::EmptyCover)?;
        Ok(hull.diameter(metric))
    }

    pub fn inflate(&self, margin: f64) -> BoxCover {
        let boxes = self.boxes.iter().map(|b| b.inflate(margin)).collect();
        let mut cover = BoxCover {
            dim: self.dim,
            boxes,
        };
        cover.canonicalize();
        cover
    }

    /// Intersection with a box; possibly empty.
    pub fn intersect_box(&self, b: &AxisBox) -> BoxCover {
        let boxes = self
            .boxes
            .iter()
            .filter_map(|own| own.intersect(b))
            .collect();
        let mut cover = BoxCover {
            dim: self.dim,
            boxes,
        };
        cover.canonicalize();
        cover
    }

    /// Pairwise intersection of two covers; possibly empty.
    pub fn intersect(&self, other: &BoxCover) -> BoxCover {
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &other.boxes {
                if let Some(c) = a.intersect(b) {
                    boxes.push(c);
                }
            }
        }
        let mut cover = BoxCover {
            dim: self.dim,
            boxes,
        };
        cover.canonicalize();
        cover
    }

    fn check_pair(&self, other: &BoxCover, metric: &Metric) -> Result<(), GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        metric.check_dim(self.dim)
    }
}

fn lex_box_order(a: &AxisBox, b: &AxisBox) -> std::cmp::Ordering {
    for i in 0..a.dim() {
        let c = a.lo[i].total_cmp(&b.lo[i]);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    for i in 0..a.dim() {
        let c = a.hi[i].total_cmp(&b.hi[i]);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < TOL
    }

    #[test]
    fn linf_and_l2_distances() {
        let p = point(&[0.0, 0.0]);
        let q = point(&[3.0, 4.0]);
        assert_eq!(Metric::Linf.distance(&p, &q).unwrap(), 4.0);
        assert_eq!(Metric::L2.distance(&p, &q).unwrap(), 5.0);
        assert_eq!(Metric::Linf.distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn weighted_linf_distance() {
        let m = Metric::weighted_linf(vec![2.0, 1.0]).unwrap();
        let d = m
            .distance(&point(&[0.0, 0.0]), &point(&[0.3, 0.5]))
            .unwrap();
        assert!(close(d, 0.6));
    }

    #[test]
    fn weighted_linf_rejects_bad_weights() {
        assert_eq!(
            Metric::weighted_linf(vec![1.0, 0.0]),
            Err(GeometryError::BadWeights)
        );
        assert_eq!(
            Metric::weighted_linf(vec![-1.0]),
            Err(GeometryError::BadWeights)
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = Metric::Linf
            .distance(&point(&[0.0]), &point(&[0.0, 1.0]))
            .unwrap_err();
        assert_eq!(err, GeometryError::DimensionMismatch { left: 1, right: 2 });
    }

    #[test]
    fn point_to_cover_distances() {
        let unit = BoxCover::from_box(AxisBox::interval(0.0, 1.0).unwrap());
        let m = Metric::Linf;
        assert_eq!(unit.dist_to_point(&point(&[0.3]), &m).unwrap(), 0.0);
        assert!(close(unit.dist_to_point(&point(&[1.25]), &m).unwrap(), 0.25));

        let square = BoxCover::from_box(AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let d = square.dist_to_point(&point(&[1.2, 0.5]), &m).unwrap();
        assert!(close(d, 0.2));
    }

    #[test]
    fn empty_cover_rejected_by_distance_queries() {
        let empty = BoxCover::empty(1);
        assert_eq!(
            empty.dist_to_point(&point(&[0.0]), &Metric::Linf),
            Err(GeometryError::EmptyCover)
        );
        let unit = BoxCover::from_box(AxisBox::interval(0.0, 1.0).unwrap());
        assert_eq!(
            empty.min_distance(&unit, &Metric::Linf),
            Err(GeometryError::EmptyCover)
        );
    }

    #[test]
    fn cover_min_distance_examples() {
        let m = Metric::Linf;
        let a = BoxCover::from_box(AxisBox::interval(0.0, 0.35).unwrap());
        let s = BoxCover::from_box(AxisBox::interval(0.5, 0.5).unwrap());
        assert!(close(a.min_distance(&s, &m).unwrap(), 0.15));

        let b = BoxCover::from_box(AxisBox::interval(0.3, 0.7).unwrap());
        assert_eq!(a.min_distance(&b, &m).unwrap(), 0.0);
    }

    #[test]
    fn box_min_distance_is_exact_under_l2() {
        let a = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = AxisBox::new(vec![4.0, 5.0], vec![5.0, 6.0]).unwrap();
        assert!(close(a.min_distance(&b, &Metric::L2), 5.0));
    }

    #[test]
    fn hausdorff_translation_and_identity() {
        let m = Metric::Linf;
        let a = BoxCover::from_box(AxisBox::interval(0.0, 1.0).unwrap());
        let b = BoxCover::from_box(AxisBox::interval(0.2, 1.2).unwrap());
        assert!(close(a.hausdorff(&b, &m, 1e-3).unwrap(), 0.2));
        assert_eq!(a.hausdorff(&a, &m, 1e-3).unwrap(), 0.0);

        let sq1 = BoxCover::from_box(AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let sq2 = BoxCover::from_box(AxisBox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap());
        assert!(close(sq1.hausdorff(&sq2, &m, 1e-3).unwrap(), 1.0));
    }

    #[test]
    fn hausdorff_grid_fallback_never_undershoots() {
        // target with an interior hole: sup over [0,2] of dist to {0}∪{2} is 1,
        // attained strictly inside — the fallback must not miss it.
        let m = Metric::Linf;
        let src = BoxCover::from_box(AxisBox::interval(0.0, 2.0).unwrap());
        let tgt = BoxCover::new(
            1,
            vec![
                AxisBox::interval(0.0, 0.0).unwrap(),
                AxisBox::interval(2.0, 2.0).unwrap(),
            ],
        )
        .unwrap();
        let h = src.hausdorff(&tgt, &m, 1e-3).unwrap();
        assert!(h >= 1.0, "upper bound {h} undershoots true value 1");
        assert!(h <= 1.0 + 1e-3);
    }

    #[test]
    fn diameter_examples() {
        let m = Metric::Linf;
        let a = BoxCover::from_box(AxisBox::interval(0.1, 0.35).unwrap());
        assert!(close(a.diameter(&m).unwrap(), 0.25));
        let pt = BoxCover::from_box(AxisBox::interval(0.7, 0.7).unwrap());
        assert_eq!(pt.diameter(&m).unwrap(), 0.0);
        let two = BoxCover::new(
            1,
            vec![
                AxisBox::interval(0.0, 0.1).unwrap(),
                AxisBox::interval(0.9, 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(close(two.diameter(&m).unwrap(), 1.0));
    }

    #[test]
    fn interval_coalescing_is_canonical() {
        let c = BoxCover::new(
            1,
            vec![
                AxisBox::interval(0.5, 0.9).unwrap(),
                AxisBox::interval(0.0, 0.5).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.boxes()[0], AxisBox::interval(0.0, 0.9).unwrap());
    }

    #[test]
    fn containment_prune_drops_nested_boxes() {
        let outer = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let inner = AxisBox::new(vec![0.2, 0.2], vec![0.4, 0.4]).unwrap();
        let c = BoxCover::new(2, vec![inner, outer.clone()]).unwrap();
        assert_eq!(c.boxes(), &[outer]);
    }

    #[test]
    fn contains_box_is_exact_across_seams() {
        // Two abutting squares cover [0,1]×[0,1]; a box straddling the seam
        // is inside the union even though inside neither piece alone.
        let left = AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let right = AxisBox::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap();
        let c = BoxCover::new(2, vec![left, right]).unwrap();
        let straddle = AxisBox::new(vec![0.3, 0.2], vec![0.7, 0.8]).unwrap();
        assert!(c.contains_box(&straddle));
        let poking_out = AxisBox::new(vec![0.3, 0.2], vec![1.1, 0.8]).unwrap();
        assert!(!c.contains_box(&poking_out));
    }

    #[test]
    fn contains_box_handles_degenerate_probe() {
        let c = BoxCover::from_box(AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let face = AxisBox::new(vec![0.5, 0.0], vec![0.5, 1.0]).unwrap();
        assert!(c.contains_box(&face));
        let outside_face = AxisBox::new(vec![1.5, 0.0], vec![1.5, 1.0]).unwrap();
        assert!(!c.contains_box(&outside_face));
    }

    #[test]
    fn subdivision_hits_endpoints_exactly() {
        let b = AxisBox::interval(0.0, 0.5).unwrap();
        let cells = b.subdivide(0.15).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].lo()[0], 0.0);
        assert_eq!(cells[3].hi()[0], 0.5);
        for c in &cells {
            assert!(c.side(0) <= 0.15 + 1e-15);
        }
        assert!(matches!(
            b.subdivide(0.0),
            Err(GeometryError::BadResolution(_))
        ));
    }

    #[test]
    fn box_constructor_rejects_disorder_and_nonfinite() {
        assert!(matches!(
            AxisBox::interval(1.0, 0.0),
            Err(GeometryError::CornerOrder { .. })
        ));
        assert!(matches!(
            AxisBox::interval(f64::NAN, 1.0),
            Err(GeometryError::NonFinite)
        ));
        // degenerate is legal
        assert!(AxisBox::interval(0.5, 0.5).is_ok());
    }
}
