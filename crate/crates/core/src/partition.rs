//! Box partitions of a compact ambient box and their separation lines.
//!
//! A partition splits the ambient box into closed pieces with pairwise
//! disjoint interiors whose union is the whole box. Validation is exact for
//! box regions: the ambient box is cut by every piece bound into elementary
//! cells, and each open cell must belong to exactly one piece — no tolerance
//! is involved, so a gap or an overlap of any width is caught.

use crate::geometry::{AxisBox, BoxCover, GeometryError, Metric, Point};
use crate::validate::{ValidationReport, Violation};
use thiserror::Error;

pub type PieceId = u32;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("partition needs at least one piece")]
    NoPieces,
    #[error("ambient box must have positive volume")]
    DegenerateAmbient,
    #[error("piece {id} has dimension {found}, ambient has {expected}")]
    PieceDimension {
        id: PieceId,
        expected: usize,
        found: usize,
    },
    #[error("duplicate piece id {id}")]
    DuplicateId { id: PieceId },
    #[error("partition is invalid: {report}")]
    Invalid { report: ValidationReport },
    #[error("partitions have {left} and {right} pieces; distance needs matched ids")]
    PieceCountMismatch { left: usize, right: usize },
}

/// One closed piece of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    id: PieceId,
    region: BoxCover,
}

impl Piece {
    pub fn new(id: PieceId, region: BoxCover) -> Self {
        Piece { id, region }
    }

    pub fn id(&self) -> PieceId {
        self.id
    }

    pub fn region(&self) -> &BoxCover {
        &self.region
    }
}

/// A list of pieces with an ambient box. Construction checks structure
/// (dimensions, id uniqueness); geometry is checked by [`Partition::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    ambient: AxisBox,
    pieces: Vec<Piece>,
}

impl Partition {
    /// Builds a partition with pieces numbered `1..=m` in the given order.
    pub fn new(ambient: AxisBox, regions: Vec<BoxCover>) -> Result<Self, PartitionError> {
        let pieces = regions
            .into_iter()
            .enumerate()
            .map(|(i, region)| Piece::new(i as PieceId + 1, region))
            .collect();
        Partition::from_pieces(ambient, pieces)
    }

    /// Builds a partition from explicitly numbered pieces (sorted by id).
    pub fn from_pieces(ambient: AxisBox, mut pieces: Vec<Piece>) -> Result<Self, PartitionError> {
        if pieces.is_empty() {
            return Err(PartitionError::NoPieces);
        }
        if (0..ambient.dim()).any(|a| ambient.side(a) == 0.0) {
            return Err(PartitionError::DegenerateAmbient);
        }
        for p in &pieces {
            if p.region.dim() != ambient.dim() {
                return Err(PartitionError::PieceDimension {
                    id: p.id,
                    expected: ambient.dim(),
                    found: p.region.dim(),
                });
            }
        }
        pieces.sort_by_key(|p| p.id);
        for w in pieces.windows(2) {
            if w[0].id == w[1].id {
                return Err(PartitionError::DuplicateId { id: w[0].id });
            }
        }
        Ok(Partition { ambient, pieces })
    }

    pub fn ambient(&self) -> &AxisBox {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece(&self, id: PieceId) -> Option<&Piece> {
        self.pieces
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.pieces[i])
    }

    /// Ids of all pieces whose closed region contains the point, inflated by
    /// `slack` on every axis. Two or more ids means the point lies on (or,
    /// with positive slack, near) the separation line.
    pub fn member_ids(&self, coords: &[f64], slack: f64) -> Vec<PieceId> {
        self.pieces
            .iter()
            .filter(|p| p.region.contains_point_slack(coords, slack))
            .map(|p| p.id)
            .collect()
    }

    /// Exact geometric validation; see the module docs for the cell argument.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::valid();
        let ids: Vec<PieceId> = self.pieces.iter().map(|p| p.id).collect();
        if ids
            .iter()
            .enumerate()
            .any(|(i, id)| *id != i as PieceId + 1)
        {
            report.push(Violation::NonConsecutiveIds { found: ids });
        }
        for p in &self.pieces {
            if p.region.is_empty() {
                report.push(Violation::EmptyPiece { id: p.id });
            } else if p
                .region
                .boxes()
                .iter()
                .any(|b| !self.ambient.contains_box(b))
            {
                report.push(Violation::PieceOutsideAmbient { id: p.id });
            }
        }

        // Elementary cells: cut the ambient box by every piece bound. Each
        // open cell straddles no piece boundary, so its center decides
        // membership of the whole cell exactly.
        let dim = self.dim();
        let mut axis_cuts: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for a in 0..dim {
            let (alo, ahi) = (self.ambient.lo()[a], self.ambient.hi()[a]);
            let mut cuts = vec![alo, ahi];
            for p in &self.pieces {
                for b in p.region.boxes() {
                    for v in [b.lo()[a], b.hi()[a]] {
                        if v > alo && v < ahi {
                            cuts.push(v);
                        }
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            axis_cuts.push(cuts);
        }

        let mut index = vec![0usize; dim];
        'cells: loop {
            let lo: Vec<f64> = (0..dim).map(|a| axis_cuts[a][index[a]]).collect();
            let hi: Vec<f64> = (0..dim).map(|a| axis_cuts[a][index[a] + 1]).collect();
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
            let owners: Vec<PieceId> = self
                .pieces
                .iter()
                .filter(|p| p.region.contains_point_slack(&center, 0.0))
                .map(|p| p.id)
                .collect();
            match owners.len() {
                0 => report.push(Violation::CoverageGap {
                    witness: Point::new(center).expect("cell center is finite"),
                }),
                1 => {}
                _ => report.push(Violation::InteriorOverlap {
                    piece_a: owners[0],
                    piece_b: owners[1],
                    witness: AxisBox::new(lo, hi).expect("cell corners are ordered"),
                }),
            }
            let mut a = dim;
            loop {
                if a == 0 {
                    break 'cells;
                }
                a -= 1;
                index[a] += 1;
                if index[a] + 1 < axis_cuts[a].len() {
                    break;
                }
                index[a] = 0;
            }
        }
        report
    }

    /// The separation line: the union of pairwise piece intersections, i.e.
    /// the set where the piecewise map is multi-defined. Exact for box
    /// regions — each pairwise intersection is a (degenerate) box. Empty for
    /// a single-piece partition. Errors when the partition is invalid.
    pub fn separation_line(&self) -> Result<SeparationLine, PartitionError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(PartitionError::Invalid { report });
        }
        let mut faces = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            for q in &self.pieces[i + 1..] {
                for a in p.region.boxes() {
                    for b in q.region.boxes() {
                        if let Some(face) = a.intersect(b) {
                            faces.push(face);
                        }
                    }
                }
            }
        }
        Ok(SeparationLine {
            cover: BoxCover::new(self.dim(), faces)?,
        })
    }

    /// Partition distance: the maximum over matched piece ids of the
    /// Hausdorff distance between regions. Upper-bound semantics are
    /// inherited from [`BoxCover::hausdorff`] (exact for single-box pieces
    /// under `Linf`-type metrics).
    pub fn distance_to(
        &self,
        other: &Partition,
        metric: &Metric,
        delta: f64,
    ) -> Result<f64, PartitionError> {
        if self.len() != other.len() {
            return Err(PartitionError::PieceCountMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let mut worst = 0.0f64;
        for (p, q) in self.pieces.iter().zip(&other.pieces) {
            worst = worst.max(p.region.hausdorff(&q.region, metric, delta)?);
        }
        Ok(worst)
    }
}

/// The locus where a piecewise map is multi-defined, as a cover of
/// (typically degenerate) boxes. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationLine {
    cover: BoxCover,
}

impl SeparationLine {
    pub fn cover(&self) -> &BoxCover {
        &self.cover
    }

    pub fn is_empty(&self) -> bool {
        self.cover.is_empty()
    }
}
