//! Certification: every orbit of a valid piecewise contraction converges to
//! one of finitely many limit cycles, and this module finds them with proof.
//!
//! The argument reduces to three certified facts. First, refinement finds a
//! generation `k0` whose atoms keep a positive distance `d` from the
//! separation line, so from then on the symbolic itinerary of an orbit is
//! locked. Second, at the working generation — deep enough that atom
//! diameters fall below `d/2` — the map sends each atom wholly into a single
//! piece, which turns the atom set into a functional transition graph whose
//! cycles are the only possible asymptotics. Third, around each graph cycle
//! the composed branch map is a contraction with rate `λ^p`, so it has a
//! unique fixed point that the Banach iteration pins down to any tolerance,
//! together with a residual bound certifying the enclosure.
//!
//! Failure is always explicit: an [`Inconclusive`] outcome reports which of
//! the three facts could not be established within the budget.

use crate::atoms::{self, AtomError, AtomOptions, AtomSet, Word};
use crate::geometry::{GeometryError, Metric, Point};
use crate::map::{MapError, PiecewiseMap};
use crate::partition::PieceId;
use crate::validate::ValidationReport;
use thiserror::Error;

/// Default cap on the atom generation explored.
pub const DEFAULT_K_MAX: usize = 64;

/// Default fixed-point tolerance, as a fraction of the box diameter.
pub const DEFAULT_FP_TOL_REL: f64 = 1e-10;

/// The persistence radius backs off strictly below the `d/3` threshold so
/// that the certified inequality stays strict under the reported radius.
const PERSIST_BACKOFF: f64 = 0.999;

/// Ceiling on Banach iterations per cycle; the contraction argument reaches
/// any tolerance long before this.
const FP_ITER_CAP: usize = 10_000;

/// Slack factor (on the fixed-point tolerance) used when collapsing a graph
/// cycle whose points trace a shorter true period.
const PERIOD_COLLAPSE_SLACK: f64 = 10.0;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(#[from] Box<MapError>),
    #[error(transparent)]
    Partition(#[from] crate::partition::PartitionError),
    #[error("map failed validation:\n{0}")]
    InvalidMap(ValidationReport),
    #[error("fixed-point tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("generation cap must be at least 1")]
    BadKMax,
    #[error("perturbation size {epsilon} is not admissible at contraction rate {lambda}")]
    EpsilonTooLarge { epsilon: f64, lambda: f64 },
    #[error("fixed-point iteration failed to settle within {FP_ITER_CAP} steps")]
    FixedPointStall,
    #[error(transparent)]
    Atoms(Box<AtomError>),
}

impl From<AtomError> for CertifyError {
    fn from(e: AtomError) -> Self {
        CertifyError::Atoms(Box::new(e))
    }
}

impl From<MapError> for CertifyError {
    fn from(e: MapError) -> Self {
        CertifyError::Map(Box::new(e))
    }
}

/// Controls the certification search.
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Deepest atom generation explored before giving up.
    pub k_max: usize,
    /// Ceiling on the cumulative number of enclosure cells mapped.
    pub atom_budget: u64,
    /// Certified radius around each reported cycle point (`None`: a small
    /// fixed fraction, [`DEFAULT_FP_TOL_REL`], of the box diameter).
    pub fp_tol: Option<f64>,
    /// Cell cap forwarded to atom refinement (`None`: exact affine cells,
    /// plugin cells capped at a small fraction of the ambient box).
    pub resolution: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            k_max: DEFAULT_K_MAX,
            atom_budget: atoms::DEFAULT_BOX_BUDGET,
            fp_tol: None,
            resolution: None,
        }
    }
}

/// One certified limit cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    /// Minimal period.
    pub period: usize,
    /// Piece visited at each phase: applying the branch of `pieces[m]` to
    /// `points[m]` gives `points[(m + 1) % period]`. Canonically rotated so
    /// this sequence is lexicographically smallest.
    pub pieces: Vec<PieceId>,
    /// Numerical cycle points; each lies within `residual` of the true
    /// cycle point of its phase.
    pub points: Vec<Point>,
    /// Certified bound on the distance from each reported point to the true
    /// cycle.
    pub residual: f64,
}

/// Functional transition graph on working-generation atoms.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    words: Vec<Word>,
    successors: Vec<usize>,
}

impl TransitionGraph {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// Index of the atom the atom at `index` maps into.
    pub fn successor(&self, index: usize) -> usize {
        self.successors[index]
    }
}

/// A complete, machine-checkable certification of the limit dynamics.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// Certified uniform contraction bound of the map.
    pub lambda: f64,
    /// Metric all distances are measured in.
    pub metric: Metric,
    /// First generation whose atoms separate from the boundary line.
    pub k0: usize,
    /// Certified lower bound on the distance from the generation-`k0` atoms
    /// to the separation line (`+∞` for single-piece systems).
    pub separation: f64,
    /// Working generation: atom diameters are below `separation / 2`.
    pub k_work: usize,
    /// Number of working-generation atoms.
    pub atom_count: usize,
    /// Cells mapped while refining (the budget consumed).
    pub work: u64,
    /// Every limit cycle, sorted by (period, pieces, leading point).
    pub cycles: Vec<LimitCycle>,
    /// Perturbation radius under which the cycle structure persists.
    pub eps_persist: f64,
    /// The working-generation transition graph.
    pub graph: TransitionGraph,
}

impl Certificate {
    /// Certified bound on how far each limit cycle can drift under a
    /// perturbation of size `epsilon ≤ eps_persist`.
    pub fn drift_bound(&self, epsilon: f64) -> Result<f64, CertifyError> {
        if !(epsilon <= self.eps_persist) {
            return Err(CertifyError::EpsilonTooLarge {
                epsilon,
                lambda: self.lambda,
            });
        }
        eps_star(epsilon, self.lambda)
    }
}

/// Why certification stopped without a verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum InconclusiveReason {
    /// Atoms still touch the separation line at the generation cap.
    NoSeparation,
    /// The box budget ran out while refining.
    AtomBudget { generation: usize, needed: u64 },
    /// Separation was found, but shrinking atoms below half the gap needs
    /// generations beyond the cap.
    WorkDepth,
    /// A working-generation atom straddles pieces, so its successor is not
    /// unique.
    NotSingleValued { word: Word },
    /// The successor word of an atom was not alive (possible only with
    /// plugin enclosures too coarse to nest).
    GraphClosure { word: Word },
}

impl std::fmt::Display for InconclusiveReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InconclusiveReason::NoSeparation => {
                write!(f, "atoms never separated from the boundary line")
            }
            InconclusiveReason::AtomBudget { generation, needed } => write!(
                f,
                "box budget exhausted at generation {generation} (needed {needed})"
            ),
            InconclusiveReason::WorkDepth => {
                write!(f, "atom diameters cannot reach half the separation gap within the generation cap")
            }
            InconclusiveReason::NotSingleValued { word } => {
                write!(f, "atom {word:?} straddles pieces")
            }
            InconclusiveReason::GraphClosure { word } => {
                write!(f, "successor word {word:?} is not alive")
            }
        }
    }
}

/// Honest failure report: what was tried, how far it got.
#[derive(Debug, Clone, PartialEq)]
pub struct Inconclusive {
    pub reason: InconclusiveReason,
    /// Deepest generation actually built.
    pub k_reached: usize,
    /// Separation gap at that generation (0 while atoms touch the line).
    pub separation: f64,
    /// Cells mapped before stopping.
    pub work: u64,
}

impl std::fmt::Display for Inconclusive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "inconclusive after generation {}: {} (gap {}, {} cells mapped)",
            self.k_reached, self.reason, self.separation, self.work
        )
    }
}

/// Result of a certification run that did not error out.
#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Certified(Box<Certificate>),
    Inconclusive(Inconclusive),
}

impl CertifyOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertifyOutcome::Certified(_))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            CertifyOutcome::Certified(c) => Some(c),
            CertifyOutcome::Inconclusive(_) => None,
        }
    }

    pub fn inconclusive(&self) -> Option<&Inconclusive> {
        match self {
            CertifyOutcome::Certified(_) => None,
            CertifyOutcome::Inconclusive(i) => Some(i),
        }
    }
}

/// Admissible drift bound for a perturbation of size `epsilon` of a map
/// with contraction bound `lambda`: `2ε / (1 − (λ + ε))`. Requires
/// `λ + ε < 1`.
pub fn eps_star(epsilon: f64, lambda: f64) -> Result<f64, CertifyError> {
    if !(epsilon > 0.0) || !(lambda > 0.0) || lambda + epsilon >= 1.0 {
        return Err(CertifyError::EpsilonTooLarge { epsilon, lambda });
    }
    Ok(2.0 * epsilon / (1.0 - (lambda + epsilon)))
}

/// Runs the full certification pipeline on a validated map.
pub fn certify(map: &PiecewiseMap, opts: &CertifyOptions) -> Result<CertifyOutcome, CertifyError> {
    if let Some(tol) = opts.fp_tol {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CertifyError::BadTolerance(tol));
        }
    }
    if opts.k_max == 0 {
        return Err(CertifyError::BadKMax);
    }
    let report = map.validate();
    if !report.is_valid() {
        return Err(CertifyError::InvalidMap(report));
    }
    let metric = map.metric().clone();
    let line = map.partition().separation_line()?;
    let diam = map.ambient().diameter(&metric);
    let fp_tol = opts.fp_tol.unwrap_or(DEFAULT_FP_TOL_REL * diam);
    let aopts = AtomOptions {
        resolution: opts.resolution,
        box_budget: opts.atom_budget,
    };

    // Fact one: find the separating generation.
    let mut set = match atoms::initial_atoms(map, &aopts) {
        Ok(set) => set,
        Err(e) => return budget_or_error(e, 0, 0.0, 0),
    };
    let (k0, separation) = loop {
        let gap = set.separation_distance(&line, &metric)?;
        if gap > 0.0 {
            break (set.generation(), gap);
        }
        if set.generation() >= opts.k_max {
            return Ok(CertifyOutcome::Inconclusive(Inconclusive {
                reason: InconclusiveReason::NoSeparation,
                k_reached: set.generation(),
                separation: gap,
                work: set.work(),
            }));
        }
        set = match atoms::refine_atoms(map, &set, &aopts) {
            Ok(next) => next,
            Err(e) => return budget_or_error(e, set.generation(), gap, set.work()),
        };
    };

    // Fact two: refine until diameters certify single-valued transitions.
    let k_work = match working_generation(k0, separation, map.lambda(), diam, opts.k_max) {
        Some(k) => k,
        None => {
            return Ok(CertifyOutcome::Inconclusive(Inconclusive {
                reason: InconclusiveReason::WorkDepth,
                k_reached: set.generation(),
                separation,
                work: set.work(),
            }))
        }
    };
    while set.generation() < k_work {
        set = match atoms::refine_atoms(map, &set, &aopts) {
            Ok(next) => next,
            Err(e) => return budget_or_error(e, set.generation(), separation, set.work()),
        };
    }
    let graph = match build_graph(map, &set) {
        Ok(graph) => graph,
        Err(reason) => {
            return Ok(CertifyOutcome::Inconclusive(Inconclusive {
                reason,
                k_reached: set.generation(),
                separation,
                work: set.work(),
            }))
        }
    };

    // Fact three: each graph cycle pins a unique limit cycle.
    let mut cycles = Vec::new();
    for cycle_nodes in functional_cycles(&graph.successors) {
        cycles.push(solve_cycle(map, &set, &graph, &cycle_nodes, fp_tol)?);
    }
    cycles.sort_by(|a, b| {
        a.period
            .cmp(&b.period)
            .then_with(|| a.pieces.cmp(&b.pieces))
            .then_with(|| lex_points(&a.points, &b.points))
    });

    let eps_persist = if separation.is_finite() {
        (separation / 3.0 * PERSIST_BACKOFF).min((1.0 - map.lambda()) / 2.0)
    } else {
        (1.0 - map.lambda()) / 2.0
    };

    Ok(CertifyOutcome::Certified(Box::new(Certificate {
        lambda: map.lambda(),
        metric,
        k0,
        separation,
        k_work,
        atom_count: set.len(),
        work: set.work(),
        cycles,
        eps_persist,
        graph,
    })))
}

fn budget_or_error(
    e: AtomError,
    k_reached: usize,
    separation: f64,
    work: u64,
) -> Result<CertifyOutcome, CertifyError> {
    match e {
        AtomError::BudgetExhausted {
            generation, needed, ..
        } => Ok(CertifyOutcome::Inconclusive(Inconclusive {
            reason: InconclusiveReason::AtomBudget { generation, needed },
            k_reached,
            separation,
            work,
        })),
        other => Err(other.into()),
    }
}

/// Least `k ≥ k0` with `λ^k · diam ≤ separation / 2`, or `None` past the cap.
fn working_generation(
    k0: usize,
    separation: f64,
    lambda: f64,
    diam: f64,
    k_max: usize,
) -> Option<usize> {
    if separation.is_infinite() {
        return Some(k0);
    }
    (k0..=k_max).find(|&k| lambda.powi(k as i32) * diam <= separation / 2.0)
}

fn build_graph(map: &PiecewiseMap, set: &AtomSet) -> Result<TransitionGraph, InconclusiveReason> {
    let mut words = Vec::with_capacity(set.len());
    let mut successors = Vec::with_capacity(set.len());
    for atom in set.atoms() {
        let Some(next_piece) = atom.containing_piece(map.partition()) else {
            return Err(InconclusiveReason::NotSingleValued {
                word: atom.word().to_vec(),
            });
        };
        let mut next_word: Word = atom.word()[1..].to_vec();
        next_word.push(next_piece);
        let Some(next_index) = set.position(&next_word) else {
            return Err(InconclusiveReason::GraphClosure { word: next_word });
        };
        words.push(atom.word().to_vec());
        successors.push(next_index);
    }
    Ok(TransitionGraph { words, successors })
}

/// All simple cycles of a functional graph, each as the node list in
/// traversal order, discovered in ascending order of their entry node.
fn functional_cycles(successors: &[usize]) -> Vec<Vec<usize>> {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; successors.len()];
    let mut cycles = Vec::new();
    for start in 0..successors.len() {
        if color[start] != WHITE {
            continue;
        }
        let mut path = Vec::new();
        let mut node = start;
        while color[node] == WHITE {
            color[node] = GRAY;
            path.push(node);
            node = successors[node];
        }
        if color[node] == GRAY {
            let entry = path.iter().position(|&n| n == node).expect("gray on path");
            cycles.push(path[entry..].to_vec());
        }
        for n in path {
            color[n] = BLACK;
        }
    }
    cycles
}

/// Banach-solves the composed branch map around one graph cycle and returns
/// the certified limit cycle in canonical rotation.
fn solve_cycle(
    map: &PiecewiseMap,
    set: &AtomSet,
    graph: &TransitionGraph,
    nodes: &[usize],
    fp_tol: f64,
) -> Result<LimitCycle, CertifyError> {
    let metric = map.metric();
    let p = nodes.len();
    // Branch applied at phase m is the youngest symbol of the next node's word.
    let pieces: Vec<PieceId> = (0..p)
        .map(|m| *graph.words[nodes[(m + 1) % p]].last().expect("nonempty word"))
        .collect();
    let rate = map.lambda().powi(p as i32);
    let start_atom = &set.atoms()[nodes[0]];
    let mut x = start_atom
        .cover()
        .bounding_box()
        .expect("alive atom has a nonempty cover")
        .center();
    let mut defect;
    let mut iterations = 0;
    loop {
        let mut y = x.clone();
        for &piece in &pieces {
            y = map.eval_branch(piece, &y)?;
        }
        defect = metric.distance(&x, &y)?;
        x = y;
        if defect <= fp_tol * (1.0 - rate) {
            break;
        }
        iterations += 1;
        if iterations >= FP_ITER_CAP {
            return Err(CertifyError::FixedPointStall);
        }
    }
    // x is the post-defect iterate: its distance to the true fixed point is
    // at most defect · rate / (1 − rate).
    let residual = defect * rate / (1.0 - rate);
    let mut points = Vec::with_capacity(p);
    points.push(x.clone());
    for &piece in &pieces[..p - 1] {
        let next = map.eval_branch(piece, points.last().expect("nonempty"))?;
        points.push(next);
    }
    let (period, pieces, points) = reduce_and_rotate(metric, pieces, points, fp_tol)?;
    Ok(LimitCycle {
        period,
        pieces,
        points,
        residual,
    })
}

/// Collapses a graph cycle to its minimal period and rotates it into the
/// canonical phase (lexicographically smallest piece sequence, then
/// smallest leading point).
fn reduce_and_rotate(
    metric: &Metric,
    pieces: Vec<PieceId>,
    points: Vec<Point>,
    fp_tol: f64,
) -> Result<(usize, Vec<PieceId>, Vec<Point>), CertifyError> {
    let p = pieces.len();
    let tol = PERIOD_COLLAPSE_SLACK * fp_tol;
    let mut period = p;
    for q in 1..p {
        if p % q != 0 {
            continue;
        }
        let mut collapses = true;
        for m in 0..p {
            let shifted = (m + q) % p;
            if pieces[m] != pieces[shifted]
                || metric.distance(&points[m], &points[shifted])? > tol
            {
                collapses = false;
                break;
            }
        }
        if collapses {
            period = q;
            break;
        }
    }
    let pieces: Vec<PieceId> = pieces[..period].to_vec();
    let points: Vec<Point> = points[..period].to_vec();
    let mut best = 0;
    for r in 1..period {
        let candidate = rotation_key(&pieces, &points, r);
        let current = rotation_key(&pieces, &points, best);
        if candidate < current {
            best = r;
        }
    }
    let rotate = |v: &[PieceId]| -> Vec<PieceId> {
        (0..period).map(|m| v[(best + m) % period]).collect()
    };
    let rotate_pts = |v: &[Point]| -> Vec<Point> {
        (0..period).map(|m| v[(best + m) % period].clone()).collect()
    };
    Ok((period, rotate(&pieces), rotate_pts(&points)))
}

/// Comparison key for one rotation: the rotated piece sequence, then the
/// rotated leading point, ordered lexicographically.
fn rotation_key(pieces: &[PieceId], points: &[Point], r: usize) -> (Vec<PieceId>, Vec<u64>) {
    let p = pieces.len();
    let seq: Vec<PieceId> = (0..p).map(|m| pieces[(r + m) % p]).collect();
    // total_cmp order is preserved by the sign-flipped bit image of f64
    let key: Vec<u64> = points[r]
        .coords()
        .iter()
        .map(|&c| {
            let bits = c.to_bits();
            if bits >> 63 == 1 {
                !bits
            } else {
                bits | (1 << 63)
            }
        })
        .collect();
    (seq, key)
}

fn lex_points(a: &[Point], b: &[Point]) -> std::cmp::Ordering {
    for (pa, pb) in a.iter().zip(b) {
        for (ca, cb) in pa.coords().iter().zip(pb.coords()) {
            let ord = ca.total_cmp(cb);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
    }
    a.len().cmp(&b.len())
}

/// Certified Hausdorff distance between the point sets of two cycles.
pub fn cycle_hausdorff(
    a: &LimitCycle,
    b: &LimitCycle,
    metric: &Metric,
) -> Result<f64, GeometryError> {
    let directed = |from: &[Point], to: &[Point]| -> Result<f64, GeometryError> {
        let mut worst = 0.0f64;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                best = best.min(metric.distance(p, q)?);
            }
            worst = worst.max(best);
        }
        Ok(worst)
    };
    Ok(directed(&a.points, &b.points)?.max(directed(&b.points, &a.points)?))
}

/// One matched pair of cycles across two certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMatch {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    /// Another pairing was within rounding distance of this one, so the
    /// matching (not the distances) is a choice.
    pub ambiguous: bool,
}

/// Nearest-distance matching between two cycle lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleMatching {
    pub pairs: Vec<CycleMatch>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
    /// Largest matched distance (0 when nothing matched).
    pub max_distance: f64,
}

/// Greedy nearest-first matching of two cycle lists, deterministic under
/// ties (smaller indices win; the `ambiguous` flag records that a tie
/// existed).
pub fn match_cycles(
    left: &[LimitCycle],
    right: &[LimitCycle],
    metric: &Metric,
) -> Result<CycleMatching, GeometryError> {
    const TIE_TOL: f64 = 1e-12;
    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            all.push((cycle_hausdorff(a, b, metric)?, i, j));
        }
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_left = vec![false; left.len()];
    let mut used_right = vec![false; right.len()];
    let mut pairs = Vec::new();
    for (idx, &(d, i, j)) in all.iter().enumerate() {
        if used_left[i] || used_right[j] {
            continue;
        }
        let ambiguous = all[idx + 1..]
            .iter()
            .take_while(|&&(d2, _, _)| d2 - d <= TIE_TOL)
            .any(|&(_, i2, j2)| !used_left[i2] && !used_right[j2] && (i2 == i || j2 == j));
        used_left[i] = true;
        used_right[j] = true;
        pairs.push(CycleMatch {
            left: i,
            right: j,
            distance: d,
            ambiguous,
        });
    }
    pairs.sort_by(|a, b| a.left.cmp(&b.left));
    let max_distance = pairs.iter().map(|p| p.distance).fold(0.0, f64::max);
    Ok(CycleMatching {
        unmatched_left: (0..left.len()).filter(|&i| !used_left[i]).collect(),
        unmatched_right: (0..right.len()).filter(|&j| !used_right[j]).collect(),
        pairs,
        max_distance,
    })
}
