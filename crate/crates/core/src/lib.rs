//! Certified limit-cycle analysis for piecewise contracting maps on boxes.
//!
//! The library works with maps `F` defined piecewise on a compact axis-aligned
//! box: the box is split into finitely many pieces, each piece carries its own
//! contracting branch, and the branch images are pairwise separated. For such
//! maps every orbit is eventually periodic, and — unlike a floating-point
//! simulation — that fact can be *certified*: [`certify::certify`] produces a
//! machine-checkable [`certify::Certificate`] listing every limit cycle
//! together with a perturbation radius under which the cycle structure
//! persists, or an explicit [`certify::Inconclusive`] report when the budget
//! ran out. Maps that cannot be certified because a branch fixed point sits
//! exactly on a piece boundary can often be nudged into a certifiable
//! neighbour with [`genericity::repair`].
//!
//! All distances, diameters and separation gaps are one-sided: lower bounds
//! where a separation must be established, upper bounds where a set must be
//! small. Inexactness therefore only ever delays a verdict; it never produces
//! a false certificate.
//!
//! With the default `parallel` feature the refinement and labeling loops run
//! on rayon; disabling the feature falls back to equivalent sequential loops.
//! Results are independent of thread count: work is merged in canonical order.

pub mod atoms;
pub mod certify;
pub mod genericity;
pub mod geometry;
pub mod io;
pub mod map;
pub mod orbit;
mod par;
pub mod partition;
pub mod samples;
pub mod validate;

pub use atoms::{Atom, AtomSet};
pub use certify::{Certificate, CertifyOptions, CertifyOutcome, Inconclusive, LimitCycle};
pub use geometry::{AxisBox, BoxCover, Metric, Point};
pub use map::{AffineMap, PieceMap, PiecewiseMap, PluginMap};
pub use partition::{Partition, Piece, SeparationLine};
pub use validate::{ValidationReport, Violation};
