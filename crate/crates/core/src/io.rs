//! TOML serialization of systems, certificates and analysis reports.
//!
//! The system format declares the ambient box, the metric, the pieces and
//! one branch per piece. Affine branches carry their full matrix and offset;
//! plugin branches are *declarations* — name, Lipschitz constant, flags —
//! resolved against a [`PluginRegistry`] at load time, since closures cannot
//! live in a file.
//!
//! Certificates embed a SHA-256 digest over their canonical serialization,
//! so a stored certificate that was edited (or truncated) fails loudly on
//! load. Floats round-trip exactly: serialization uses the shortest decimal
//! form that parses back to the same bit pattern, and `inf` is the stated
//! separation of single-piece systems.

use crate::certify::{Certificate, LimitCycle};
use crate::genericity::Repair;
use crate::geometry::{AxisBox, BoxCover, GeometryError, Metric, Point};
use crate::map::{
    AffineMap, MapError, Matrix, PerturbationReport, PieceMap, PiecewiseMap, PluginMap,
};
use crate::orbit::{BasinMap, Orbit};
use crate::partition::{Partition, PartitionError, PieceId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

/// Tolerance granted to a declared contraction rate before it is rejected
/// as inconsistent with the computed bound.
const DECLARED_RATE_SLACK: f64 = 1e-12;

/// Document format version written by this build; parsing rejects any other.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialize: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(Box<MapError>),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("piece {id} declares no branch")]
    MissingBranch { id: PieceId },
    #[error("piece {id} declares more than one branch")]
    DuplicateBranch { id: PieceId },
    #[error("branch for piece {id} must be exactly one of `affine` or `plugin`")]
    BranchForm { id: PieceId },
    #[error("branch references unknown piece {id}")]
    UnknownBranchPiece { id: PieceId },
    #[error("plugin `{name}` is not registered")]
    UnknownPlugin { name: String },
    #[error("unknown metric `{0}` (expected \"linf\", \"l2\", or weighted weights)")]
    UnknownMetric(String),
    #[error("matrix rows do not form a square")]
    BadMatrix,
    #[error("declared rate {declared} is below the computed bound {computed}")]
    DeclaredRate { declared: f64, computed: f64 },
    #[error("unsupported format version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("system is not admissible: {0}")]
    Invalid(crate::validate::ValidationReport),
    #[error("certificate carries no digest")]
    MissingDigest,
    #[error("certificate digest mismatch: stored {stored}, computed {computed}")]
    DigestMismatch { stored: String, computed: String },
}

impl From<MapError> for IoError {
    fn from(e: MapError) -> Self {
        IoError::Map(Box::new(e))
    }
}

/// Maps plugin names to evaluators when loading systems from files.
#[derive(Default, Clone)]
pub struct PluginRegistry {
    evals: BTreeMap<String, Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
}

impl PluginRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    ) {
        self.evals.insert(name.into(), eval);
    }

    fn get(&self, name: &str) -> Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>> {
        self.evals.get(name).cloned()
    }
}

impl std::fmt::Debug for PluginRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginRegistry")
            .field("names", &self.evals.keys().collect::<Vec<_>>())
            .finish()
    }
}

// ---------------------------------------------------------------- system ---

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoxDoc {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDoc {
    fn from_box(b: &AxisBox) -> Self {
        BoxDoc {
            lo: b.lo().to_vec(),
            hi: b.hi().to_vec(),
        }
    }

    fn to_box(&self) -> Result<AxisBox, IoError> {
        Ok(AxisBox::new(self.lo.clone(), self.hi.clone())?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MetricDoc {
    Name(String),
    Weighted { weights: Vec<f64> },
}

impl MetricDoc {
    fn from_metric(m: &Metric) -> Self {
        match m {
            Metric::Linf => MetricDoc::Name("linf".into()),
            Metric::L2 => MetricDoc::Name("l2".into()),
            Metric::WeightedLinf(w) => MetricDoc::Weighted { weights: w.clone() },
        }
    }

    fn to_metric(&self) -> Result<Metric, IoError> {
        match self {
            MetricDoc::Name(n) if n == "linf" => Ok(Metric::Linf),
            MetricDoc::Name(n) if n == "l2" => Ok(Metric::L2),
            MetricDoc::Name(n) => Err(IoError::UnknownMetric(n.clone())),
            MetricDoc::Weighted { weights } => Ok(Metric::weighted_linf(weights.clone())?),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PieceDoc {
    id: PieceId,
    boxes: Vec<BoxDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AffineDoc {
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PluginDoc {
    name: String,
    lipschitz: f64,
    #[serde(default = "default_true")]
    injective: bool,
    #[serde(default)]
    extendable: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BranchDoc {
    piece: PieceId,
    #[serde(skip_serializing_if = "Option::is_none")]
    affine: Option<AffineDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plugin: Option<PluginDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SystemDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<MetricDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    declared_lambda: Option<f64>,
    ambient: BoxDoc,
    #[serde(rename = "piece", default)]
    pieces: Vec<PieceDoc>,
    #[serde(rename = "branch", default)]
    branches: Vec<BranchDoc>,
}

/// Parses a system document, resolving plugin branches in `registry`.
/// The parsed map must be admissible (partition exact, branches contracting,
/// images separated and interior); inadmissible systems are rejected here so
/// that everything downstream can rely on a clean map. Use
/// [`system_from_str_unvalidated`] to load a document for inspection.
pub fn system_from_str(text: &str, registry: &PluginRegistry) -> Result<PiecewiseMap, IoError> {
    let map = system_from_str_unvalidated(text, registry)?;
    let report = map.validate();
    if !report.is_valid() {
        return Err(IoError::Invalid(report));
    }
    Ok(map)
}

/// [`system_from_str`] without the admissibility check: the document must
/// still parse and construct, but geometric violations are left for the
/// caller to report.
pub fn system_from_str_unvalidated(
    text: &str,
    registry: &PluginRegistry,
) -> Result<PiecewiseMap, IoError> {
    let doc: SystemDoc = toml::from_str(text)?;
    if let Some(v) = doc.format_version {
        if v != FORMAT_VERSION {
            return Err(IoError::UnsupportedVersion { found: v });
        }
    }
    let ambient = doc.ambient.to_box()?;
    let metric = match &doc.metric {
        Some(m) => m.to_metric()?,
        None => Metric::Linf,
    };
    let mut pieces = Vec::with_capacity(doc.pieces.len());
    for p in &doc.pieces {
        let boxes = p
            .boxes
            .iter()
            .map(|b| b.to_box())
            .collect::<Result<Vec<_>, _>>()?;
        pieces.push(crate::partition::Piece::new(
            p.id,
            BoxCover::new(ambient.dim(), boxes)?,
        ));
    }
    let partition = Partition::from_pieces(ambient, pieces)?;

    let mut by_piece: BTreeMap<PieceId, &BranchDoc> = BTreeMap::new();
    for b in &doc.branches {
        if partition.piece(b.piece).is_none() {
            return Err(IoError::UnknownBranchPiece { id: b.piece });
        }
        if by_piece.insert(b.piece, b).is_some() {
            return Err(IoError::DuplicateBranch { id: b.piece });
        }
    }
    let mut branches = Vec::with_capacity(partition.len());
    for piece in partition.pieces() {
        let Some(doc) = by_piece.get(&piece.id()) else {
            return Err(IoError::MissingBranch { id: piece.id() });
        };
        branches.push(branch_from_doc(piece.id(), doc, registry)?);
    }
    let map = PiecewiseMap::new(partition, branches, metric)?;
    if let Some(declared) = doc.declared_lambda {
        if declared + DECLARED_RATE_SLACK < map.lambda() {
            return Err(IoError::DeclaredRate {
                declared,
                computed: map.lambda(),
            });
        }
    }
    Ok(map)
}

fn branch_from_doc(
    id: PieceId,
    doc: &BranchDoc,
    registry: &PluginRegistry,
) -> Result<PieceMap, IoError> {
    match (&doc.affine, &doc.plugin) {
        (Some(a), None) => {
            let n = a.matrix.len();
            if a.matrix.iter().any(|row| row.len() != n) {
                return Err(IoError::BadMatrix);
            }
            let data: Vec<f64> = a.matrix.iter().flatten().copied().collect();
            let matrix = Matrix::new(n, data)?;
            Ok(PieceMap::Affine(AffineMap::new(matrix, a.offset.clone())?))
        }
        (None, Some(p)) => {
            let Some(eval) = registry.get(&p.name) else {
                return Err(IoError::UnknownPlugin {
                    name: p.name.clone(),
                });
            };
            let mut plugin = PluginMap::new(p.name.clone(), p.lipschitz, p.injective, eval);
            if p.extendable {
                plugin = plugin.extendable();
            }
            Ok(PieceMap::Plugin(plugin))
        }
        _ => Err(IoError::BranchForm { id }),
    }
}

/// Serializes a map to the system format. Plugin branches are written as
/// declarations; loading them back requires the same registry names.
pub fn system_to_string(map: &PiecewiseMap) -> Result<String, IoError> {
    let doc = SystemDoc {
        format_version: Some(FORMAT_VERSION),
        metric: Some(MetricDoc::from_metric(map.metric())),
        declared_lambda: Some(map.lambda()),
        ambient: BoxDoc::from_box(map.ambient()),
        pieces: map
            .partition()
            .pieces()
            .iter()
            .map(|p| PieceDoc {
                id: p.id(),
                boxes: p.region().boxes().iter().map(BoxDoc::from_box).collect(),
            })
            .collect(),
        branches: map
            .partition()
            .pieces()
            .iter()
            .zip(map.branches())
            .map(|(p, b)| branch_to_doc(p.id(), b))
            .collect(),
    };
    Ok(toml::to_string(&doc)?)
}

fn branch_to_doc(id: PieceId, branch: &PieceMap) -> BranchDoc {
    match branch {
        PieceMap::Affine(a) => {
            let n = a.matrix().dim();
            let matrix = (0..n)
                .map(|i| (0..n).map(|j| a.matrix().get(i, j)).collect())
                .collect();
            BranchDoc {
                piece: id,
                affine: Some(AffineDoc {
                    matrix,
                    offset: a.offset().to_vec(),
                }),
                plugin: None,
            }
        }
        PieceMap::Plugin(p) => BranchDoc {
            piece: id,
            affine: None,
            plugin: Some(PluginDoc {
                name: p.name().to_string(),
                lipschitz: p.lipschitz(),
                injective: p.is_injective(),
                extendable: p.is_extendable(),
            }),
        },
    }
}

pub fn load_system(path: impl AsRef<Path>, registry: &PluginRegistry) -> Result<PiecewiseMap, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    system_from_str(&text, registry)
}

/// [`load_system`] without the admissibility check; see
/// [`system_from_str_unvalidated`].
pub fn load_system_unvalidated(
    path: impl AsRef<Path>,
    registry: &PluginRegistry,
) -> Result<PiecewiseMap, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    system_from_str_unvalidated(&text, registry)
}

pub fn save_system(path: impl AsRef<Path>, map: &PiecewiseMap) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = system_to_string(map)?;
    std::fs::write(path, text).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

// ----------------------------------------------------------- certificate ---

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CertHeaderDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    lambda: f64,
    metric: MetricDoc,
    k0: usize,
    separation: f64,
    k_work: usize,
    atom_count: usize,
    work: u64,
    eps_persist: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    digest: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CycleDoc {
    period: usize,
    pieces: Vec<PieceId>,
    points: Vec<Vec<f64>>,
    residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CertificateDoc {
    certificate: CertHeaderDoc,
    #[serde(rename = "cycle", default)]
    cycles: Vec<CycleDoc>,
}

/// A certificate as stored on disk: the summary facts and the cycle list
/// (the transition graph is not persisted), plus the digest that sealed it.
#[derive(Debug, Clone)]
pub struct StoredCertificate {
    pub lambda: f64,
    pub metric: Metric,
    pub k0: usize,
    pub separation: f64,
    pub k_work: usize,
    pub atom_count: usize,
    pub work: u64,
    pub eps_persist: f64,
    pub cycles: Vec<LimitCycle>,
    pub digest: String,
}

/// Projects an in-memory certificate onto its storable summary.
pub fn store_certificate(cert: &Certificate) -> StoredCertificate {
    StoredCertificate {
        lambda: cert.lambda,
        metric: cert.metric.clone(),
        k0: cert.k0,
        separation: cert.separation,
        k_work: cert.k_work,
        atom_count: cert.atom_count,
        work: cert.work,
        eps_persist: cert.eps_persist,
        cycles: cert.cycles.clone(),
        digest: String::new(),
    }
}

fn certificate_doc(cert: &StoredCertificate) -> CertificateDoc {
    CertificateDoc {
        certificate: CertHeaderDoc {
            format_version: Some(FORMAT_VERSION),
            lambda: cert.lambda,
            metric: MetricDoc::from_metric(&cert.metric),
            k0: cert.k0,
            separation: cert.separation,
            k_work: cert.k_work,
            atom_count: cert.atom_count,
            work: cert.work,
            eps_persist: cert.eps_persist,
            digest: None,
        },
        cycles: cert
            .cycles
            .iter()
            .map(|c| CycleDoc {
                period: c.period,
                pieces: c.pieces.clone(),
                points: c.points.iter().map(|p| p.coords().to_vec()).collect(),
                residual: c.residual,
            })
            .collect(),
    }
}

fn digest_of(doc: &CertificateDoc) -> Result<String, IoError> {
    let mut undigested = doc.clone();
    undigested.certificate.digest = None;
    let body = toml::to_string(&undigested)?;
    let mut hasher = Sha256::new();
    hasher.update(body.as_bytes());
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

/// Serializes a certificate summary, sealing it with its digest.
pub fn certificate_to_string(cert: &StoredCertificate) -> Result<String, IoError> {
    let mut doc = certificate_doc(cert);
    doc.certificate.digest = Some(digest_of(&doc)?);
    Ok(toml::to_string(&doc)?)
}

/// Parses a stored certificate and verifies its digest.
pub fn certificate_from_str(text: &str) -> Result<StoredCertificate, IoError> {
    let doc: CertificateDoc = toml::from_str(text)?;
    if let Some(v) = doc.certificate.format_version {
        if v != FORMAT_VERSION {
            return Err(IoError::UnsupportedVersion { found: v });
        }
    }
    let Some(stored) = doc.certificate.digest.clone() else {
        return Err(IoError::MissingDigest);
    };
    let computed = digest_of(&doc)?;
    if stored != computed {
        return Err(IoError::DigestMismatch { stored, computed });
    }
    let cycles = doc
        .cycles
        .iter()
        .map(|c| {
            let points = c
                .points
                .iter()
                .map(|p| Point::new(p.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(LimitCycle {
                period: c.period,
                pieces: c.pieces.clone(),
                points,
                residual: c.residual,
            })
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(StoredCertificate {
        lambda: doc.certificate.lambda,
        metric: doc.certificate.metric.to_metric()?,
        k0: doc.certificate.k0,
        separation: doc.certificate.separation,
        k_work: doc.certificate.k_work,
        atom_count: doc.certificate.atom_count,
        work: doc.certificate.work,
        eps_persist: doc.certificate.eps_persist,
        cycles,
        digest: stored,
    })
}

pub fn load_certificate(path: impl AsRef<Path>) -> Result<StoredCertificate, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    certificate_from_str(&text)
}

/// Serializes and seals a certificate in one step.
pub fn certificate_report(cert: &Certificate) -> Result<String, IoError> {
    certificate_to_string(&store_certificate(cert))
}

// ---------------------------------------------------------------- reports ---

/// Renders orbits as CSV: one row per orbit point, columns
/// `orbit,step,branch,x0,..`. The branch column is the piece applied to
/// reach that point, so it is empty on each orbit's starting row. Floats use
/// the shortest decimal that round-trips.
pub fn orbit_csv(orbits: &[Orbit]) -> String {
    let dim = orbits
        .first()
        .and_then(|o| o.points.first())
        .map_or(0, |p| p.dim());
    let mut out = String::from("orbit,step,branch");
    for axis in 0..dim {
        let _ = write!(out, ",x{axis}");
    }
    out.push('\n');
    for (index, orbit) in orbits.iter().enumerate() {
        for (step, point) in orbit.points.iter().enumerate() {
            let _ = write!(out, "{index},{step},");
            if step > 0 {
                let _ = write!(out, "{}", orbit.branches[step - 1]);
            }
            for c in point.coords() {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
    }
    out
}

/// Renders a basin labeling as CSV: one row per grid cell, columns
/// `cell,x0,..,label`, where the coordinates are the cell's center and the
/// label is the cycle index the cell's orbit settled on (`-1` if undecided).
pub fn basin_csv(basin: &BasinMap) -> String {
    let dim = basin.ambient().dim();
    let mut out = String::from("cell");
    for axis in 0..dim {
        let _ = write!(out, ",x{axis}");
    }
    out.push_str(",label\n");
    for (cell, label) in basin.labels.iter().enumerate() {
        let _ = write!(out, "{cell}");
        for c in basin.cell_box(cell).center().coords() {
            let _ = write!(out, ",{c}");
        }
        let _ = writeln!(out, ",{}", label.map_or(-1, |c| c as i64));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CutMoveDoc {
    pub axis: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepairDoc {
    pub moved: bool,
    pub epsilon: f64,
    pub epsilon_one: f64,
    pub inflation: f64,
    pub generation: usize,
    pub cuts: Vec<CutMoveDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_gap: Option<f64>,
}

pub fn repair_doc(rep: &Repair) -> RepairDoc {
    RepairDoc {
        moved: rep.moved,
        epsilon: rep.epsilon,
        epsilon_one: rep.epsilon_one,
        inflation: rep.t,
        generation: rep.generation,
        cuts: rep
            .cuts
            .iter()
            .map(|c| CutMoveDoc {
                axis: c.axis,
                from: c.from,
                to: c.to,
            })
            .collect(),
        c0_gap: rep.perturbation.as_ref().map(|p| p.c0_gap),
        rate_gap: rep.perturbation.as_ref().map(|p| p.rate_gap),
        partition_gap: rep.perturbation.as_ref().map(|p| p.partition_gap),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationDoc {
    pub epsilon: f64,
    pub c0_gap: f64,
    pub rate_gap: f64,
    pub partition_gap: f64,
    pub disjoint_pieces: Vec<PieceId>,
    pub verdict: bool,
}

pub fn perturbation_doc(rep: &PerturbationReport) -> PerturbationDoc {
    PerturbationDoc {
        epsilon: rep.epsilon,
        c0_gap: rep.c0_gap,
        rate_gap: rep.rate_gap,
        partition_gap: rep.partition_gap,
        disjoint_pieces: rep.disjoint_pieces.clone(),
        verdict: rep.verdict,
    }
}

/// Generic TOML serialization for report documents.
pub fn to_toml<T: Serialize>(value: &T) -> Result<String, IoError> {
    Ok(toml::to_string(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify, CertifyOptions};
    use crate::geometry::point;
    use crate::samples;

    const TOL: f64 = 1e-12;

    const DOUBLE_SINK_DOC: &str = r#"
metric = "linf"

[ambient]
lo = [0.0]
hi = [1.0]

[[piece]]
id = 1
boxes = [{ lo = [0.0], hi = [0.5] }]

[[piece]]
id = 2
boxes = [{ lo = [0.5], hi = [1.0] }]

[[branch]]
piece = 1
affine = { matrix = [[0.5]], offset = [0.1] }

[[branch]]
piece = 2
affine = { matrix = [[0.5]], offset = [0.4] }
"#;

    #[test]
    fn parses_a_literal_system_document() {
        let m = system_from_str(DOUBLE_SINK_DOC, &PluginRegistry::new()).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.lambda(), 0.5);
        let out = m.apply(&point(&[0.2])).unwrap();
        assert!((out[0].1[0] - 0.2).abs() < TOL);
    }

    #[test]
    fn system_round_trips_through_toml() {
        let m = samples::double_sink();
        let text = system_to_string(&m).unwrap();
        let back = system_from_str(&text, &PluginRegistry::new()).unwrap();
        assert_eq!(back.lambda(), m.lambda());
        assert_eq!(back.partition().len(), 2);
        for x in [0.1, 0.3, 0.7, 0.9] {
            let a = m.apply(&point(&[x])).unwrap();
            let b = back.apply(&point(&[x])).unwrap();
            assert_eq!(a[0].1[0], b[0].1[0]);
        }
    }

    #[test]
    fn plugin_round_trip_needs_the_registry() {
        let m = samples::plugin_double_sink();
        let text = system_to_string(&m).unwrap();
        assert!(matches!(
            system_from_str(&text, &PluginRegistry::new()),
            Err(IoError::UnknownPlugin { .. })
        ));
        let mut registry = PluginRegistry::new();
        registry.register(
            "half-slope-up",
            Arc::new(|x: &[f64]| vec![0.5 * x[0] + 0.4]),
        );
        let back = system_from_str(&text, &registry).unwrap();
        assert_eq!(back.lambda(), 0.5);
        let out = back.apply(&point(&[0.8])).unwrap();
        assert!((out[0].1[0] - 0.8).abs() < TOL);
    }

    #[test]
    fn understated_declared_rate_is_rejected() {
        let text = format!("declared_lambda = 0.3\n{DOUBLE_SINK_DOC}");
        assert!(matches!(
            system_from_str(&text, &PluginRegistry::new()),
            Err(IoError::DeclaredRate { .. })
        ));
        let ok = format!("declared_lambda = 0.6\n{DOUBLE_SINK_DOC}");
        assert!(system_from_str(&ok, &PluginRegistry::new()).is_ok());
    }

    #[test]
    fn missing_and_duplicate_branches_are_rejected() {
        let missing = DOUBLE_SINK_DOC.replace(
            "[[branch]]\npiece = 2\naffine = { matrix = [[0.5]], offset = [0.4] }",
            "",
        );
        assert!(matches!(
            system_from_str(&missing, &PluginRegistry::new()),
            Err(IoError::MissingBranch { id: 2 })
        ));
        let duplicated = format!(
            "{DOUBLE_SINK_DOC}\n[[branch]]\npiece = 2\naffine = {{ matrix = [[0.5]], offset = [0.4] }}\n"
        );
        assert!(matches!(
            system_from_str(&duplicated, &PluginRegistry::new()),
            Err(IoError::DuplicateBranch { id: 2 })
        ));
    }

    #[test]
    fn certificate_survives_a_round_trip_with_digest() {
        let m = samples::swap_cycle();
        let outcome = certify(&m, &CertifyOptions::default()).unwrap();
        let cert = outcome.certificate().unwrap();
        let text = certificate_report(cert).unwrap();
        let stored = certificate_from_str(&text).unwrap();
        assert_eq!(stored.k0, cert.k0);
        assert_eq!(stored.k_work, cert.k_work);
        assert_eq!(stored.separation, cert.separation);
        assert_eq!(stored.cycles.len(), 1);
        assert_eq!(stored.cycles[0].points[0][0], cert.cycles[0].points[0][0]);
        assert!(stored.digest.starts_with("sha256:"));
    }

    #[test]
    fn tampered_certificates_fail_the_digest_check() {
        let m = samples::double_sink();
        let outcome = certify(&m, &CertifyOptions::default()).unwrap();
        let text = certificate_report(outcome.certificate().unwrap()).unwrap();
        let tampered = text.replace("k0 = 1", "k0 = 2");
        assert_ne!(text, tampered, "fixture should actually change the text");
        assert!(matches!(
            certificate_from_str(&tampered),
            Err(IoError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn infinite_separation_round_trips_as_inf() {
        let part = Partition::new(
            AxisBox::interval(0.0, 1.0).unwrap(),
            vec![BoxCover::from_box(AxisBox::interval(0.0, 1.0).unwrap())],
        )
        .unwrap();
        let m = PiecewiseMap::new(
            part,
            vec![PieceMap::Affine(AffineMap::scalar(0.5, 0.25).unwrap())],
            Metric::Linf,
        )
        .unwrap();
        let outcome = certify(&m, &CertifyOptions::default()).unwrap();
        let text = certificate_report(outcome.certificate().unwrap()).unwrap();
        assert!(text.contains("separation = inf"));
        let stored = certificate_from_str(&text).unwrap();
        assert!(stored.separation.is_infinite());
    }

    #[test]
    fn weighted_metric_round_trips() {
        let text = DOUBLE_SINK_DOC.replace(
            "metric = \"linf\"",
            "[metric]\nweights = [2.0]",
        );
        let m = system_from_str(&text, &PluginRegistry::new()).unwrap();
        assert!(matches!(m.metric(), Metric::WeightedLinf(_)));
        let back = system_to_string(&m).unwrap();
        let reparsed = system_from_str(&back, &PluginRegistry::new()).unwrap();
        assert_eq!(reparsed.metric(), m.metric());
    }

    #[test]
    fn format_version_is_written_and_gates_parsing() {
        let text = system_to_string(&samples::double_sink()).unwrap();
        assert!(text.contains("format_version = 1"));
        assert!(system_from_str(&text, &PluginRegistry::new()).is_ok());
        let future = text.replace("format_version = 1", "format_version = 2");
        assert!(matches!(
            system_from_str(&future, &PluginRegistry::new()),
            Err(IoError::UnsupportedVersion { found: 2 })
        ));
    }

    #[test]
    fn future_certificate_versions_are_rejected_before_the_digest_check() {
        let m = samples::double_sink();
        let outcome = certify(&m, &CertifyOptions::default()).unwrap();
        let text = certificate_report(outcome.certificate().unwrap()).unwrap();
        assert!(text.contains("format_version = 1"));
        let future = text.replace("format_version = 1", "format_version = 7");
        assert!(matches!(
            certificate_from_str(&future),
            Err(IoError::UnsupportedVersion { found: 7 })
        ));
    }

    #[test]
    fn coverage_gaps_are_rejected_at_parse_time() {
        // Shrink piece 1 to [0, 0.4]: the strip (0.4, 0.5) lies in no piece.
        let gapped = DOUBLE_SINK_DOC.replace("lo = [0.0], hi = [0.5]", "lo = [0.0], hi = [0.4]");
        let err = system_from_str(&gapped, &PluginRegistry::new()).unwrap_err();
        let IoError::Invalid(report) = err else {
            panic!("expected an admissibility rejection, got {err:?}");
        };
        assert!(report.to_string().contains("coverage gap"));
        // The lenient entry point hands the same document back for inspection.
        let m = system_from_str_unvalidated(&gapped, &PluginRegistry::new()).unwrap();
        assert!(!m.validate().is_valid());
    }

    #[test]
    fn expanding_branches_are_rejected_at_parse_time() {
        let expanding = DOUBLE_SINK_DOC.replace("matrix = [[0.5]], offset = [0.1]", "matrix = [[1.2]], offset = [0.1]");
        let err = system_from_str(&expanding, &PluginRegistry::new()).unwrap_err();
        assert!(
            err.to_string().contains("not below 1"),
            "diagnostic should name the contraction failure, got: {err}"
        );
    }

    #[test]
    fn orbit_csv_lists_points_with_branch_provenance() {
        let m = samples::double_sink();
        let orbit = crate::orbit::iterate_orbit(
            &m,
            &point(&[0.0]),
            3,
            crate::orbit::BranchPolicy::LowestId,
        )
        .unwrap();
        let csv = orbit_csv(&[orbit]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "orbit,step,branch,x0");
        assert_eq!(lines[1], "0,0,,0");
        assert_eq!(lines[2], "0,1,1,0.1");
        assert_eq!(lines[3], "0,2,1,0.15000000000000002");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn basin_csv_labels_cell_centers() {
        let m = samples::double_sink();
        let outcome = certify(&m, &CertifyOptions::default()).unwrap();
        let cert = outcome.certificate().unwrap();
        let basin = crate::orbit::basin_of_attraction(
            &m,
            cert,
            &crate::orbit::BasinOptions {
                grid: 4,
                max_steps: 1000,
                policy: crate::orbit::BranchPolicy::LowestId,
            },
        )
        .unwrap();
        let csv = basin_csv(&basin);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "cell,x0,label");
        assert_eq!(lines[1], "0,0.125,0");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("3,0.875,"));
    }
}
