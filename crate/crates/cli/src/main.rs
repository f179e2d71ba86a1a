//! `pwcert` — command-line driver for the certification library.
//!
//! Exit codes: 0 means the question was answered in the affirmative
//! (valid, certified, repaired, within epsilon); 2 means the tool ran
//! to completion but the answer is negative or undecided (violations,
//! inconclusive, repair failed, gaps exceed epsilon); 1 means the run
//! itself failed (unreadable files, malformed documents, internal errors).

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pwcert_core::certify::{certify, CertifyOptions, CertifyOutcome};
use pwcert_core::genericity::{repair, GenericityError};
use pwcert_core::geometry::Point;
use pwcert_core::io::{self, PluginRegistry};
use pwcert_core::map::{is_epsilon_perturbation, PiecewiseMap};
use pwcert_core::orbit::{
    basin_of_attraction, iterate_orbit, BasinOptions, BranchPolicy, Orbit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_NEGATIVE: u8 = 2;

/// Minimum mesh cells per axis when a branch gap must be sampled (plugin
/// branches); affine pairs are compared exactly, so this never matters for
/// documents this binary can load.
const DIFF_SAMPLES: usize = 8;

/// `println!` that exits quietly when stdout disappears (e.g. piped into
/// `head`), instead of panicking on the broken pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Parser)]
#[command(
    name = "pwcert",
    version,
    about = "Certify limit cycles of piecewise contractions on a box"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a system file: partition geometry, contraction, image separation.
    Validate {
        system: PathBuf,
        /// Enclosure resolution for image checks (default: 1/64 of the box).
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Certify the limit cycle structure and write the certificate.
    Certify {
        system: PathBuf,
        #[command(flatten)]
        flags: CertFlags,
        /// Write the sealed certificate here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Follow one or more forward orbits (simulation, not a proof).
    #[command(group(clap::ArgGroup::new("origin").required(true)))]
    Simulate {
        system: PathBuf,
        /// Starting point, comma-separated coordinates.
        #[arg(long, group = "origin")]
        start: Option<String>,
        /// Number of seeded random starting points instead.
        #[arg(long, group = "origin")]
        starts: Option<usize>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Seed for random starting points.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Lowest)]
        branch_policy: PolicyArg,
        /// Write the orbits as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label a grid of starting cells by the cycle their orbit reaches.
    Basin {
        system: PathBuf,
        #[command(flatten)]
        flags: CertFlags,
        /// Cells per axis.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Steps before a cell is left undecided.
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Lowest)]
        branch_policy: PolicyArg,
        /// Write the labeled grid as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nudge piece boundaries by at most epsilon until the system certifies.
    Repair {
        system: PathBuf,
        /// Largest allowed boundary displacement.
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        flags: CertFlags,
        /// Write the repaired system here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a repair report (cuts, displacement bounds) here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the repaired system's certificate here.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Measure how far apart two system documents are (branch sup-gap on
    /// shared pieces, contraction-rate gap, partition distance).
    Diff {
        left: PathBuf,
        right: PathBuf,
        /// Scale the three gaps are judged against.
        #[arg(long)]
        epsilon: f64,
        /// Write the comparison report as TOML here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CertFlags {
    /// Deepest atom generation explored.
    #[arg(long)]
    k_max: Option<usize>,
    /// Ceiling on cumulative enclosure cells.
    #[arg(long)]
    atom_budget: Option<u64>,
    /// Certified radius around reported cycle points.
    #[arg(long)]
    fp_tol: Option<f64>,
    /// Enclosure cell cap for plugin branches.
    #[arg(long)]
    resolution: Option<f64>,
}

impl CertFlags {
    fn options(&self) -> CertifyOptions {
        let mut opts = CertifyOptions::default();
        if let Some(k) = self.k_max {
            opts.k_max = k;
        }
        if let Some(b) = self.atom_budget {
            opts.atom_budget = b;
        }
        if let Some(t) = self.fp_tol {
            opts.fp_tol = Some(t);
        }
        if let Some(r) = self.resolution {
            opts.resolution = Some(r);
        }
        opts
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Take the lowest-id piece when a point lies on the boundary.
    Lowest,
    /// Take the highest-id piece instead.
    Highest,
    /// Stop the orbit when it hits a boundary.
    Halt,
}

impl From<PolicyArg> for BranchPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Lowest => BranchPolicy::LowestId,
            PolicyArg::Highest => BranchPolicy::HighestId,
            PolicyArg::Halt => BranchPolicy::Halt,
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Honors `PWCERT_THREADS` before any parallel work starts; certified output
/// is identical for every thread count, so this only affects wall time.
#[cfg(feature = "parallel")]
fn init_threads() {
    if let Ok(v) = std::env::var("PWCERT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads() {}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Validate { system, resolution } => cmd_validate(&system, resolution),
        Cmd::Certify { system, flags, out } => cmd_certify(&system, &flags, out.as_deref()),
        Cmd::Simulate {
            system,
            start,
            starts,
            steps,
            seed,
            branch_policy,
            out,
        } => cmd_simulate(
            &system,
            start.as_deref(),
            starts,
            steps,
            seed,
            branch_policy.into(),
            out.as_deref(),
        ),
        Cmd::Basin {
            system,
            flags,
            grid,
            max_steps,
            branch_policy,
            out,
        } => cmd_basin(
            &system,
            &flags,
            grid,
            max_steps,
            branch_policy.into(),
            out.as_deref(),
        ),
        Cmd::Repair {
            system,
            epsilon,
            flags,
            out,
            report,
            cert,
        } => cmd_repair(
            &system,
            epsilon,
            &flags,
            out.as_deref(),
            report.as_deref(),
            cert.as_deref(),
        ),
        Cmd::Diff {
            left,
            right,
            epsilon,
            out,
        } => cmd_diff(&left, &right, epsilon, out.as_deref()),
    }
}

fn load(path: &Path) -> Result<PiecewiseMap> {
    io::load_system(path, &PluginRegistry::new())
        .with_context(|| format!("loading system {}", path.display()))
}

/// Writes through a temporary file in the destination directory, so readers
/// never observe a half-written document.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    std::io::Write::write_all(&mut tmp, text.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| anyhow::anyhow!("replacing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn cmd_validate(system: &Path, resolution: Option<f64>) -> Result<u8> {
    // The one command that loads leniently: its whole job is to report
    // violations, so rejecting inadmissible documents up front would leave
    // nothing to say.
    let map = io::load_system_unvalidated(system, &PluginRegistry::new())
        .with_context(|| format!("loading system {}", system.display()))?;
    let report = match resolution {
        Some(r) => map.validate_with(r),
        None => map.validate(),
    };
    if report.is_valid() {
        say!(
            "valid: {} pieces, contraction rate {}",
            map.partition().len(),
            map.lambda()
        );
        Ok(0)
    } else {
        say!("invalid:");
        for v in report.violations() {
            say!("  {v}");
        }
        Ok(EXIT_NEGATIVE)
    }
}

fn cmd_certify(system: &Path, flags: &CertFlags, out: Option<&Path>) -> Result<u8> {
    let map = load(system)?;
    match certify(&map, &flags.options())? {
        CertifyOutcome::Certified(cert) => {
            say!(
                "certified: rate {} separation {} (generation {}) working generation {}",
                cert.lambda, cert.separation, cert.k0, cert.k_work
            );
            say!(
                "atoms: {} live words, {} enclosure cells mapped",
                cert.atom_count, cert.work
            );
            for c in &cert.cycles {
                say!(
                    "cycle: period {} pieces {:?} start {} residual {:e}",
                    c.period,
                    c.pieces,
                    fmt_point(&c.points[0]),
                    c.residual
                );
            }
            say!("persistence margin: {}", cert.eps_persist);
            if let Some(path) = out {
                write_atomic(path, &io::certificate_report(&cert)?)?;
                say!("certificate written to {}", path.display());
            }
            Ok(0)
        }
        CertifyOutcome::Inconclusive(inc) => {
            say!("inconclusive: {inc}");
            Ok(EXIT_NEGATIVE)
        }
    }
}

fn parse_start(text: &str, dim: usize) -> Result<Point> {
    let coords = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(anyhow::Error::from))
        .collect::<Result<Vec<f64>>>()
        .with_context(|| format!("parsing start point `{text}`"))?;
    if coords.len() != dim {
        bail!(
            "start point `{text}` has {} coordinates, system has {}",
            coords.len(),
            dim
        );
    }
    Ok(Point::new(coords)?)
}

fn random_starts(map: &PiecewiseMap, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ambient = map.ambient();
    (0..n)
        .map(|_| {
            let coords = (0..map.dim())
                .map(|a| {
                    let (lo, hi) = (ambient.lo()[a], ambient.hi()[a]);
                    lo + rng.gen::<f64>() * (hi - lo)
                })
                .collect();
            Point::new(coords).expect("coordinates sampled inside the box are finite")
        })
        .collect()
}

fn fmt_point(p: &Point) -> String {
    let coords: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
    format!("({})", coords.join(", "))
}

fn cmd_simulate(
    system: &Path,
    start: Option<&str>,
    starts: Option<usize>,
    steps: usize,
    seed: u64,
    policy: BranchPolicy,
    out: Option<&Path>,
) -> Result<u8> {
    let map = load(system)?;
    let origins = match (start, starts) {
        (Some(text), None) => vec![parse_start(text, map.dim())?],
        (None, Some(n)) => random_starts(&map, n, seed),
        _ => unreachable!("clap enforces exactly one origin flag"),
    };
    let mut orbits: Vec<Orbit> = Vec::with_capacity(origins.len());
    for p in &origins {
        orbits.push(iterate_orbit(&map, p, steps, policy)?);
    }
    for orbit in &orbits {
        let last = orbit.last();
        say!(
            "orbit from {}: {} steps, final {}{}{}",
            fmt_point(&orbit.points[0]),
            orbit.branches.len(),
            fmt_point(last),
            if orbit.truncated { " (halted on boundary)" } else { "" },
            if orbit.hit_line.is_empty() {
                String::new()
            } else {
                format!(" (boundary hits at steps {:?})", orbit.hit_line)
            }
        );
    }
    if let Some(path) = out {
        write_atomic(path, &io::orbit_csv(&orbits))?;
        say!("orbits written to {}", path.display());
    }
    Ok(0)
}

fn cmd_basin(
    system: &Path,
    flags: &CertFlags,
    grid: usize,
    max_steps: usize,
    policy: BranchPolicy,
    out: Option<&Path>,
) -> Result<u8> {
    let map = load(system)?;
    let cert = match certify(&map, &flags.options())? {
        CertifyOutcome::Certified(cert) => *cert,
        CertifyOutcome::Inconclusive(inc) => {
            say!("inconclusive: {inc}");
            return Ok(EXIT_NEGATIVE);
        }
    };
    let opts = BasinOptions {
        grid,
        max_steps,
        policy,
    };
    let basin = basin_of_attraction(&map, &cert, &opts)?;
    let counts = basin.counts();
    let (decided, undecided) = (
        counts[..counts.len() - 1].iter().sum::<usize>(),
        counts[counts.len() - 1],
    );
    say!(
        "basins over a {}^{} grid: {} cells decided, {} undecided",
        grid,
        map.dim(),
        decided,
        undecided
    );
    for (i, c) in basin.cycles.iter().enumerate() {
        say!(
            "cycle {i}: period {} pieces {:?} start {} -> {} cells",
            c.period,
            c.pieces,
            fmt_point(&c.points[0]),
            counts[i]
        );
    }
    if let Some(path) = out {
        write_atomic(path, &io::basin_csv(&basin))?;
        say!("basin map written to {}", path.display());
    }
    Ok(0)
}

fn cmd_repair(
    system: &Path,
    epsilon: f64,
    flags: &CertFlags,
    out: Option<&Path>,
    report: Option<&Path>,
    cert: Option<&Path>,
) -> Result<u8> {
    let map = load(system)?;
    let rep = match repair(&map, epsilon, &flags.options()) {
        Ok(rep) => rep,
        Err(
            e @ (GenericityError::NoExtension { .. }
            | GenericityError::NoGap { .. }
            | GenericityError::Uncertified { .. }),
        ) => {
            say!("repair failed: {e}");
            return Ok(EXIT_NEGATIVE);
        }
        Err(e) => return Err(e.into()),
    };
    if rep.moved {
        say!(
            "repaired: {} boundary move(s) within epsilon {} (atoms of generation {})",
            rep.cuts.len(),
            rep.epsilon,
            rep.generation
        );
        for c in &rep.cuts {
            say!("  axis {}: {} -> {}", c.axis, c.from, c.to);
        }
    } else {
        say!("already certified: no boundary needed to move");
    }
    say!(
        "certificate: separation {} (generation {}), {} cycle(s)",
        rep.certificate.separation,
        rep.certificate.k0,
        rep.certificate.cycles.len()
    );
    if let Some(path) = out {
        write_atomic(path, &io::system_to_string(&rep.map)?)?;
        say!("repaired system written to {}", path.display());
    }
    if let Some(path) = report {
        write_atomic(path, &io::to_toml(&io::repair_doc(&rep))?)?;
        say!("repair report written to {}", path.display());
    }
    if let Some(path) = cert {
        write_atomic(path, &io::certificate_report(&rep.certificate)?)?;
        say!("certificate written to {}", path.display());
    }
    Ok(0)
}

fn cmd_diff(left: &Path, right: &Path, epsilon: f64, out: Option<&Path>) -> Result<u8> {
    let f = load(left)?;
    let g = load(right)?;
    let rep = is_epsilon_perturbation(&f, &g, epsilon, DIFF_SAMPLES)
        .with_context(|| format!("comparing {} with {}", left.display(), right.display()))?;
    say!("branch gap:    {}", rep.c0_gap);
    say!("rate gap:      {}", rep.rate_gap);
    say!("partition gap: {}", rep.partition_gap);
    if !rep.disjoint_pieces.is_empty() {
        say!(
            "pieces with no shared region (branch gap unmeasured there): {:?}",
            rep.disjoint_pieces
        );
    }
    if let Some(path) = out {
        write_atomic(path, &io::to_toml(&io::perturbation_doc(&rep))?)?;
        say!("report written to {}", path.display());
    }
    if rep.verdict {
        say!("within epsilon {epsilon}");
        Ok(0)
    } else {
        let worst = rep.c0_gap.max(rep.rate_gap).max(rep.partition_gap);
        say!("not within epsilon {epsilon} (largest gap {worst})");
        Ok(EXIT_NEGATIVE)
    }
}
