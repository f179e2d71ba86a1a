//! Ready-made example systems shared by tests, benches and documentation.
//!
//! Each constructor builds a small piecewise contraction with known behaviour:
//! the names describe the dynamics, not the construction. All of them use the
//! sup metric unless stated otherwise.

use crate::geometry::{AxisBox, BoxCover, Metric};
use crate::map::{AffineMap, MapError, PieceMap, PiecewiseMap, PluginMap};
use crate::partition::Partition;
use std::sync::Arc;

/// Two-piece map on [0, 1] split at `cut`, with affine branches
/// `a1·x + b1` on the left and `a2·x + b2` on the right.
pub fn two_branch_1d(
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    cut: f64,
) -> Result<PiecewiseMap, MapError> {
    let ambient = AxisBox::interval(0.0, 1.0)?;
    let partition = Partition::new(
        ambient,
        vec![
            BoxCover::from_box(AxisBox::interval(0.0, cut)?),
            BoxCover::from_box(AxisBox::interval(cut, 1.0)?),
        ],
    )?;
    PiecewiseMap::new(
        partition,
        vec![
            PieceMap::Affine(AffineMap::scalar(a1, b1)?),
            PieceMap::Affine(AffineMap::scalar(a2, b2)?),
        ],
        Metric::Linf,
    )
}

/// Both branches contract toward their own fixed point: `0.5x + 0.1` on
/// [0, 0.5] and `0.5x + 0.4` on [0.5, 1]. Two attracting fixed points
/// (0.2 and 0.8), branch images [0.1, 0.35] and [0.65, 0.9].
pub fn double_sink() -> PiecewiseMap {
    two_branch_1d(0.5, 0.1, 0.5, 0.4, 0.5).expect("fixture is a valid contraction")
}

/// The two halves swap: `0.5x + 0.6` on [0, 0.5] sends left to right,
/// `0.5x` on [0.5, 1] sends right to left. One attracting period-2 cycle
/// {0.4, 0.8}; the fixed-point-free branches force every orbit onto it.
pub fn swap_cycle() -> PiecewiseMap {
    two_branch_1d(0.5, 0.6, 0.5, 0.0, 0.5).expect("fixture is a valid contraction")
}

/// Left branch `0.5x + 0.25` has its fixed point exactly at the cut 0.5:
/// iterated images keep touching the separation line, so no finite
/// generation separates from it. Useful as a certifiably hopeless input.
pub fn boundary_graze() -> PiecewiseMap {
    two_branch_1d(0.5, 0.25, 0.5, 0.3, 0.5).expect("fixture is a valid contraction")
}

/// [`double_sink`] with the right branch wrapped in an opaque plugin
/// evaluator (declared Lipschitz 0.5, injective, valid on the whole box).
pub fn plugin_double_sink() -> PiecewiseMap {
    let ambient = AxisBox::interval(0.0, 1.0).unwrap();
    let partition = Partition::new(
        ambient,
        vec![
            BoxCover::from_box(AxisBox::interval(0.0, 0.5).unwrap()),
            BoxCover::from_box(AxisBox::interval(0.5, 1.0).unwrap()),
        ],
    )
    .unwrap();
    PiecewiseMap::new(
        partition,
        vec![
            PieceMap::Affine(AffineMap::scalar(0.5, 0.1).unwrap()),
            PieceMap::Plugin(
                PluginMap::new(
                    "half-slope-up",
                    0.5,
                    true,
                    Arc::new(|x: &[f64]| vec![0.5 * x[0] + 0.4]),
                )
                .extendable(),
            ),
        ],
        Metric::Linf,
    )
    .expect("fixture is a valid contraction")
}

/// Unit square split into left and right halves at x = 0.5; both branches
/// contract by diag(0.4) toward separated blobs. Fixed points
/// (1/12, 1/2) and (11/12, 1/2), image gap 0.25 around the split line.
pub fn half_split_2d() -> PiecewiseMap {
    let ambient = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let partition = Partition::new(
        ambient,
        vec![
            BoxCover::from_box(AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap()),
            BoxCover::from_box(AxisBox::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap()),
        ],
    )
    .unwrap();
    let diag = |b: Vec<f64>| {
        PieceMap::Affine(
            AffineMap::new(
                crate::map::Matrix::new(2, vec![0.4, 0.0, 0.0, 0.4]).unwrap(),
                b,
            )
            .unwrap(),
        )
    };
    PiecewiseMap::new(
        partition,
        vec![diag(vec![0.05, 0.3]), diag(vec![0.55, 0.3])],
        Metric::Linf,
    )
    .expect("fixture is a valid contraction")
}

/// Unit square cut into four quadrants, each contracting by diag(0.2) into
/// a blob near its own corner: four attracting fixed points, one per
/// quadrant, with wide basins. The larger fixture for parallel benchmarks.
pub fn four_corners_2d() -> PiecewiseMap {
    let ambient = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let quad = |lo: [f64; 2], hi: [f64; 2]| {
        BoxCover::from_box(AxisBox::new(lo.to_vec(), hi.to_vec()).unwrap())
    };
    let partition = Partition::new(
        ambient,
        vec![
            quad([0.0, 0.0], [0.5, 0.5]),
            quad([0.5, 0.0], [1.0, 0.5]),
            quad([0.0, 0.5], [0.5, 1.0]),
            quad([0.5, 0.5], [1.0, 1.0]),
        ],
    )
    .unwrap();
    let corner = |b: Vec<f64>| {
        PieceMap::Affine(
            AffineMap::new(
                crate::map::Matrix::new(2, vec![0.2, 0.0, 0.0, 0.2]).unwrap(),
                b,
            )
            .unwrap(),
        )
    };
    PiecewiseMap::new(
        partition,
        vec![
            corner(vec![0.05, 0.05]),
            corner(vec![0.7, 0.05]),
            corner(vec![0.05, 0.7]),
            corner(vec![0.7, 0.7]),
        ],
        Metric::Linf,
    )
    .expect("fixture is a valid contraction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_construct_and_validate_as_documented() {
        assert!(double_sink().validate().is_valid());
        assert!(swap_cycle().validate().is_valid());
        assert!(boundary_graze().validate().is_valid());
        assert!(plugin_double_sink().validate().is_valid());
        assert!(half_split_2d().validate().is_valid());
        assert!(four_corners_2d().validate().is_valid());
    }
}
