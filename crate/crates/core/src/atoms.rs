//! Iterated-image atoms: certified enclosures of the generation-`k` pieces
//! of the attractor.
//!
//! The atom of a word `(i₁, …, i_k)` (oldest symbol first) is the set of
//! points reachable as `f_{i_k}(… f_{i₂}(f_{i₁}(B_{i₁}) ∩ B_{i₂}) …)`. Atoms
//! are built as box covers that *enclose* the true sets, so every question
//! answered through them (distance to the separation line, piece membership,
//! transition structure) errs on the safe side. For affine branches on box
//! regions the enclosures are exact in each axis; plugin branches are boxed
//! through their declared Lipschitz constant.
//!
//! Refinement drops no history: a generation-`(k+1)` atom is contained in
//! the generation-`k` atom of its *last* `k` symbols, and its diameter is
//! bounded by `λ^{k+1}` times the ambient diameter.

use crate::geometry::{BoxCover, GeometryError, Metric};
use crate::map::{MapError, PiecewiseMap};
use crate::par;
use crate::partition::{Partition, PieceId, SeparationLine};
use thiserror::Error;

/// Itinerary of pieces, oldest application first.
pub type Word = Vec<PieceId>;

/// Default cell cap for plugin-branch enclosures, relative to the largest
/// ambient side. Affine branches need no cap: their box images are exact.
const PLUGIN_CELL_REL: f64 = 1.0 / 128.0;

/// Default ceiling on the cumulative number of cells mapped while refining.
pub const DEFAULT_BOX_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum AtomError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(#[from] Box<MapError>),
    #[error("box budget of {budget} cells exhausted at generation {generation} (needed {needed})")]
    BudgetExhausted {
        budget: u64,
        generation: usize,
        needed: u64,
    },
    #[error("generation must be at least 1")]
    BadGeneration,
}

impl From<MapError> for AtomError {
    fn from(e: MapError) -> Self {
        AtomError::Map(Box::new(e))
    }
}

/// Controls enclosure refinement.
#[derive(Debug, Clone)]
pub struct AtomOptions {
    /// Cap on the side length of cells fed to branch evaluations. `None`
    /// maps affine cells whole (exact) and caps plugin cells at 1/128 of
    /// the largest ambient side.
    pub resolution: Option<f64>,
    /// Ceiling on the cumulative number of cells mapped, across all
    /// generations of one refinement chain.
    pub box_budget: u64,
}

impl Default for AtomOptions {
    fn default() -> Self {
        AtomOptions {
            resolution: None,
            box_budget: DEFAULT_BOX_BUDGET,
        }
    }
}

/// One alive word with its certified enclosure.
#[derive(Debug, Clone)]
pub struct Atom {
    word: Word,
    cover: BoxCover,
}

impl Atom {
    pub fn word(&self) -> &[PieceId] {
        &self.word
    }

    pub fn generation(&self) -> usize {
        self.word.len()
    }

    pub fn cover(&self) -> &BoxCover {
        &self.cover
    }

    pub fn diameter(&self, metric: &Metric) -> Result<f64, GeometryError> {
        self.cover.diameter(metric)
    }

    /// The unique piece whose region contains this atom, or `None` when the
    /// enclosure straddles pieces (or sits inside none).
    pub fn containing_piece(&self, partition: &Partition) -> Option<PieceId> {
        let mut found = None;
        for piece in partition.pieces() {
            if piece.region().contains_cover(&self.cover) {
                if found.is_some() {
                    return None;
                }
                found = Some(piece.id());
            }
        }
        found
    }
}

/// All alive atoms of one generation, sorted by word.
#[derive(Debug, Clone)]
pub struct AtomSet {
    generation: usize,
    atoms: Vec<Atom>,
    work: u64,
}

impl AtomSet {
    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Cumulative number of cells mapped to build this set, counted from
    /// generation 1. This is what [`AtomOptions::box_budget`] limits.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn find(&self, word: &[PieceId]) -> Option<&Atom> {
        self.position(word).map(|i| &self.atoms[i])
    }

    /// Index of `word` in the word-sorted atom list.
    pub fn position(&self, word: &[PieceId]) -> Option<usize> {
        self.atoms
            .binary_search_by(|a| a.word.as_slice().cmp(word))
            .ok()
    }

    pub fn max_diameter(&self, metric: &Metric) -> Result<f64, GeometryError> {
        let mut max = 0.0f64;
        for a in &self.atoms {
            max = max.max(a.cover.diameter(metric)?);
        }
        Ok(max)
    }

    /// Certified lower bound on the distance from the union of atoms to the
    /// separation line; `+∞` when the line is empty (single-piece systems).
    pub fn separation_distance(
        &self,
        line: &SeparationLine,
        metric: &Metric,
    ) -> Result<f64, GeometryError> {
        if line.is_empty() {
            return Ok(f64::INFINITY);
        }
        let mut min = f64::INFINITY;
        for a in &self.atoms {
            min = min.min(a.cover.min_distance(line.cover(), metric)?);
            if min == 0.0 {
                break;
            }
        }
        Ok(min)
    }

    /// Union of all atom enclosures as one canonical cover.
    pub fn union_cover(&self) -> BoxCover {
        let Some(first) = self.atoms.first() else {
            return BoxCover::empty(1);
        };
        let dim = first.cover.dim();
        let boxes = self
            .atoms
            .iter()
            .flat_map(|a| a.cover.boxes().iter().cloned())
            .collect();
        BoxCover::new(dim, boxes).expect("atom covers share one dimension")
    }
}

/// Generation-1 atoms: the branch images of the partition pieces.
pub fn initial_atoms(map: &PiecewiseMap, opts: &AtomOptions) -> Result<AtomSet, AtomError> {
    let domains: Vec<BoxCover> = map
        .partition()
        .pieces()
        .iter()
        .map(|p| p.region().clone())
        .collect();
    seed_atoms(map, &domains, opts)
}

/// One refinement step: generation `k` to `k + 1` over the partition pieces.
pub fn refine_atoms(
    map: &PiecewiseMap,
    set: &AtomSet,
    opts: &AtomOptions,
) -> Result<AtomSet, AtomError> {
    let domains: Vec<BoxCover> = map
        .partition()
        .pieces()
        .iter()
        .map(|p| p.region().clone())
        .collect();
    refine_with_domains(map, set, &domains, opts)
}

/// Atoms of generation `k ≥ 1`, refining from generation 1.
pub fn atoms_of_generation(
    map: &PiecewiseMap,
    k: usize,
    opts: &AtomOptions,
) -> Result<AtomSet, AtomError> {
    if k == 0 {
        return Err(AtomError::BadGeneration);
    }
    let mut set = initial_atoms(map, opts)?;
    while set.generation() < k {
        set = refine_atoms(map, &set, opts)?;
    }
    Ok(set)
}

/// Generation-1 atoms over explicit per-piece domains (aligned with the
/// partition's piece order). The genericity machinery passes extended
/// domains here; everything else goes through [`initial_atoms`].
pub(crate) fn seed_atoms(
    map: &PiecewiseMap,
    domains: &[BoxCover],
    opts: &AtomOptions,
) -> Result<AtomSet, AtomError> {
    let needed = count_seed_cells(map, domains, opts)?;
    if needed > opts.box_budget {
        return Err(AtomError::BudgetExhausted {
            budget: opts.box_budget,
            generation: 1,
            needed,
        });
    }
    let pieces: Vec<(PieceId, BoxCover)> = map
        .partition()
        .pieces()
        .iter()
        .zip(domains)
        .map(|(p, d)| (p.id(), d.clone()))
        .collect();
    let atoms = par::map_vec(pieces, |(id, domain)| {
        enclose_image(map, id, &domain, opts).map(|cover| Atom {
            word: vec![id],
            cover,
        })
    });
    let atoms = atoms.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(AtomSet {
        generation: 1,
        atoms,
        work: needed,
    })
}

/// One refinement step over explicit per-piece domains: each atom is
/// intersected with every domain and pushed through the matching branch;
/// empty intersections kill the extended word.
pub(crate) fn refine_with_domains(
    map: &PiecewiseMap,
    set: &AtomSet,
    domains: &[BoxCover],
    opts: &AtomOptions,
) -> Result<AtomSet, AtomError> {
    let generation = set.generation() + 1;
    let ids: Vec<PieceId> = map.partition().pieces().iter().map(|p| p.id()).collect();
    let step_work: u64 = {
        let counts = par::map_vec(set.atoms.clone(), |atom| {
            count_refine_cells(map, &atom, &ids, domains, opts)
        });
        let mut total = 0u64;
        for c in counts {
            total = total.saturating_add(c?);
        }
        total
    };
    let needed = set.work.saturating_add(step_work);
    if needed > opts.box_budget {
        return Err(AtomError::BudgetExhausted {
            budget: opts.box_budget,
            generation,
            needed,
        });
    }
    let extended = par::map_vec(set.atoms.clone(), |atom| {
        extend_atom(map, &atom, &ids, domains, opts)
    });
    let mut atoms = Vec::new();
    for batch in extended {
        atoms.extend(batch?);
    }
    Ok(AtomSet {
        generation,
        atoms,
        work: needed,
    })
}

/// Extensions of one atom by every piece whose domain it meets. Extending
/// in ascending piece order keeps the flattened result word-sorted.
fn extend_atom(
    map: &PiecewiseMap,
    atom: &Atom,
    ids: &[PieceId],
    domains: &[BoxCover],
    opts: &AtomOptions,
) -> Result<Vec<Atom>, AtomError> {
    let mut out = Vec::new();
    for (id, domain) in ids.iter().zip(domains) {
        let overlap = atom.cover.intersect(domain);
        if overlap.is_empty() {
            continue;
        }
        let cover = enclose_image(map, *id, &overlap, opts)?;
        let mut word = atom.word.clone();
        word.push(*id);
        out.push(Atom { word, cover });
    }
    Ok(out)
}

/// Enclosure of branch `id` applied to `source`, one box per cell.
fn enclose_image(
    map: &PiecewiseMap,
    id: PieceId,
    source: &BoxCover,
    opts: &AtomOptions,
) -> Result<BoxCover, AtomError> {
    let branch = map.branch(id)?;
    let cap = cell_cap(map, branch_is_plugin(branch), opts);
    let mut images = Vec::new();
    for b in source.boxes() {
        for cell in b.subdivide(cap)? {
            images.push(branch.cell_image(&cell, map.metric()));
        }
    }
    Ok(BoxCover::new(map.dim(), images)?)
}

fn count_seed_cells(
    map: &PiecewiseMap,
    domains: &[BoxCover],
    opts: &AtomOptions,
) -> Result<u64, AtomError> {
    let mut total = 0u64;
    for (piece, domain) in map.partition().pieces().iter().zip(domains) {
        let branch = map.branch(piece.id())?;
        let cap = cell_cap(map, branch_is_plugin(branch), opts);
        for b in domain.boxes() {
            total = total.saturating_add(b.subdivide_count(cap));
        }
    }
    Ok(total)
}

fn count_refine_cells(
    map: &PiecewiseMap,
    atom: &Atom,
    ids: &[PieceId],
    domains: &[BoxCover],
    opts: &AtomOptions,
) -> Result<u64, AtomError> {
    let mut total = 0u64;
    for (id, domain) in ids.iter().zip(domains) {
        let overlap = atom.cover.intersect(domain);
        if overlap.is_empty() {
            continue;
        }
        let branch = map.branch(*id)?;
        let cap = cell_cap(map, branch_is_plugin(branch), opts);
        for b in overlap.boxes() {
            total = total.saturating_add(b.subdivide_count(cap));
        }
    }
    Ok(total)
}

fn branch_is_plugin(branch: &crate::map::PieceMap) -> bool {
    matches!(branch, crate::map::PieceMap::Plugin(_))
}

fn cell_cap(map: &PiecewiseMap, plugin: bool, opts: &AtomOptions) -> f64 {
    match opts.resolution {
        Some(r) => r,
        None if plugin => {
            let scale = (0..map.dim())
                .map(|a| map.ambient().side(a))
                .fold(0.0, f64::max);
            (scale * PLUGIN_CELL_REL).max(f64::MIN_POSITIVE)
        }
        None => f64::INFINITY,
    }
}
