//! Validation reports with concrete witnesses.
//!
//! Geometric validity is never a yes/no panic: callers get a list of
//! violations, each carrying a witness (a point in a coverage gap, the cell
//! where two interiors overlap, the offending piece ids) so a bad input can
//! be fixed instead of guessed at.

use crate::geometry::{AxisBox, Point};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The pieces miss part of the ambient box; `witness` lies in no piece.
    CoverageGap { witness: Point },
    /// Two piece interiors meet; `witness` is an open cell inside both.
    InteriorOverlap {
        piece_a: u32,
        piece_b: u32,
        witness: AxisBox,
    },
    /// A piece with an empty region.
    EmptyPiece { id: u32 },
    /// A piece region pokes outside the ambient box.
    PieceOutsideAmbient { id: u32 },
    /// Piece ids are not `1..=m`.
    NonConsecutiveIds { found: Vec<u32> },
    /// The uniform contraction bound is not below 1.
    NotContracting { rate: f64 },
    /// Two branch image enclosures touch or overlap (their closures are not
    /// certifiably disjoint).
    ImagesNotSeparated {
        piece_a: u32,
        piece_b: u32,
        distance: f64,
    },
    /// A branch image enclosure reaches the ambient boundary.
    ImageEscapesInterior { id: u32 },
    /// An affine branch with a singular matrix, or a plugin branch not
    /// declared injective: the branch is not a homeomorphism onto its image.
    NonInjectiveBranch { id: u32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::CoverageGap { witness } => {
                write!(f, "coverage gap: point {:?} lies in no piece", witness.coords())
            }
            Violation::InteriorOverlap {
                piece_a,
                piece_b,
                witness,
            } => write!(
                f,
                "pieces {piece_a} and {piece_b} overlap on interior cell [{:?}, {:?}]",
                witness.lo(),
                witness.hi()
            ),
            Violation::EmptyPiece { id } => write!(f, "piece {id} has an empty region"),
            Violation::PieceOutsideAmbient { id } => {
                write!(f, "piece {id} reaches outside the ambient box")
            }
            Violation::NonConsecutiveIds { found } => {
                write!(f, "piece ids are not consecutive from 1: {found:?}")
            }
            Violation::NotContracting { rate } => {
                write!(f, "contraction bound {rate} is not below 1")
            }
            Violation::ImagesNotSeparated {
                piece_a,
                piece_b,
                distance,
            } => write!(
                f,
                "branch images of pieces {piece_a} and {piece_b} are not separated (distance bound {distance})"
            ),
            Violation::ImageEscapesInterior { id } => write!(
                f,
                "branch image of piece {id} is not strictly inside the ambient box"
            ),
            Violation::NonInjectiveBranch { id } => {
                write!(f, "branch of piece {id} is not injective on its piece")
            }
        }
    }
}

/// Outcome of a structural check: empty means valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn valid() -> Self {
        ValidationReport::default()
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub(crate) fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
