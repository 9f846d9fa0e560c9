//! Batch front end: `galbrun <subcommand> --config file.toml [...]`.
//!
//! Every subcommand prints its report as JSON on stdout. With `--out DIR`
//! the report, any tables and a run manifest are also written to `DIR`;
//! wall-clock timings only ever appear in the manifest.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::{check_admissibility, compute_theta, validate_level, ConfigFile, ProblemConfig, SectorReport};
use crate::diagnostics::{estimate_creg, inf_sup, sonic_sweep, InfSupOptions, InfSupReport};
use crate::error::{Error, Result};
use crate::helmholtz::{decompose, verify_decomposition, DEFAULT_CUTOFF};
use crate::solver::{mms_convergence, solution_csv, solve_cowling, solve_full, Discretization, SolverPath};

/// Version of the configuration schema and report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "galbrun", version = VERSION, about = "Well-posedness diagnostics and solves for the damped Galbrun equation")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Directory for reports, tables and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of every randomized probe.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Cowling,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PathArg {
    Direct,
    Schur,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sector angle and admissibility conditions.
    Check {
        #[command(flatten)]
        common: Common,
        /// Known regularity constant, enables the convex-domain condition.
        #[arg(long)]
        creg: Option<f64>,
    },
    /// Discrete Helmholtz decomposition with algebra checks; `--out` also
    /// exports the system blocks as Matrix Market files.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: f64,
    },
    /// Inf-sup constants of `TᴴA_cow` over refinement levels.
    Tcoerc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
        /// Measure `A_cow` itself instead of `TᴴA_cow`.
        #[arg(long)]
        plain: bool,
    },
    /// Solves for the configured volume force.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Model::Cowling)]
        model: Model,
        #[arg(long, value_enum, default_value_t = PathArg::Direct)]
        path: PathArg,
        #[arg(long, default_value_t = 0)]
        level: usize,
    },
    /// Flow-amplitude sweep through the sonic point on a 1D template.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        mach: Vec<f64>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Manufactured-solution convergence study against `[source] exact`.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Regularity-constant estimates over refinement levels.
    Creg {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
}

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// SHA-256 of the canonical JSON of the resolved configuration.
    pub config_hash: String,
    pub overrides: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub versions: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
}

pub fn config_hash(file: &ConfigFile) -> String {
    hex::encode(Sha256::digest(file.canonical_json().as_bytes()))
}

#[derive(Debug, Serialize)]
struct CheckReport {
    sector: SectorReport,
    admissibility: crate::coefficients::AdmissibilityReport,
}

#[derive(Debug, Serialize)]
struct TcoercReport {
    transformed: bool,
    levels: Vec<InfSupReport>,
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    model: String,
    path: SolverPath,
    ndofs: usize,
    residual: f64,
    xi_norm: f64,
    psi_norm: Option<f64>,
}

/// What a subcommand produced: the JSON report plus extra named files.
/// Files without a body were written by the subcommand itself.
struct Output {
    report: String,
    files: Vec<(String, Option<String>)>,
    timings: BTreeMap<String, f64>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialise")
}

fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ConfigFile::from_toml(&text)
}

fn with_levels(file: &mut ConfigFile, levels: Option<usize>, overrides: &mut BTreeMap<String, String>) {
    if let Some(l) = levels {
        file.discretization.levels = l;
        overrides.insert("levels".into(), l.to_string());
    }
}

fn run_command(cmd: &Command, overrides: &mut BTreeMap<String, String>) -> Result<(ConfigFile, Output)> {
    let start = Instant::now();
    let mut timings = BTreeMap::new();
    let mut files = Vec::new();
    let (file, report) = match cmd {
        Command::Check { common, creg } => {
            let file = load(&common.config)?;
            let cfg = ProblemConfig::from_file(file.clone())?;
            let vp = validate_level(&cfg, 0)?;
            let sector = compute_theta(&cfg, &vp.quad_points, false)?;
            let admissibility = check_admissibility(&cfg, sector.theta, *creg, &vp.quad_points, None)?;
            if let Some(c) = creg {
                overrides.insert("creg".into(), c.to_string());
            }
            (file, to_json(&CheckReport { sector, admissibility }))
        }
        Command::Decompose { common, level, cutoff } => {
            let file = load(&common.config)?;
            let cfg = ProblemConfig::from_file(file.clone())?;
            let vp = validate_level(&cfg, *level)?;
            let (d, setup) = decompose(&vp, *cutoff, true)?;
            let ss = &setup.scalar_space;
            let gram_h1 = crate::assembly::assemble_gram_h1(ss);
            let rep = verify_decomposition(&d, &setup.r, &gram_h1, Some(&setup.blocks.mass), 1e-10, 5, common.seed)?;
            if let Some(dir) = &common.out {
                let blocks_dir = dir.join("blocks");
                let written = setup.blocks.export(&blocks_dir, &[("R", &setup.r)])?;
                for p in written {
                    files.push((p.strip_prefix(dir).unwrap_or(&p).display().to_string(), None));
                }
            }
            (file, to_json(&rep))
        }
        Command::Tcoerc { common, levels, plain } => {
            let mut file = load(&common.config)?;
            with_levels(&mut file, *levels, overrides);
            let cfg = ProblemConfig::from_file(file.clone())?;
            let opts = InfSupOptions {
                seed: common.seed,
                ..InfSupOptions::default()
            };
            let mut out = Vec::new();
            for level in 0..cfg.levels {
                let vp = validate_level(&cfg, level)?;
                let t = Instant::now();
                let mut rep = if *plain {
                    let disc = Discretization::new(vp, false)?;
                    inf_sup(&disc.cowling(), None, &disc.blocks.gramx, &opts)?
                } else {
                    let (d, setup) = decompose(&vp, DEFAULT_CUTOFF, false)?;
                    let a = crate::assembly::assemble_cowling(&setup.blocks);
                    inf_sup(&a, Some(&d), &setup.blocks.gramx, &opts)?
                };
                rep.level = Some(level);
                timings.insert(format!("level_{level}"), t.elapsed().as_secs_f64());
                out.push(rep);
            }
            (file, to_json(&TcoercReport { transformed: !plain, levels: out }))
        }
        Command::Solve { common, model, path, level } => {
            let file = load(&common.config)?;
            let cfg = ProblemConfig::from_file(file.clone())?;
            let force = cfg
                .force
                .clone()
                .ok_or_else(|| Error::Config("`solve` needs `[source] f`".into()))?;
            let disc = Discretization::new(validate_level(&cfg, *level)?, *model == Model::Full)?;
            let rhs = disc.rhs(&force);
            let res = match (model, path) {
                (Model::Cowling, _) => solve_cowling(&disc, &rhs)?,
                (Model::Full, PathArg::Direct) => solve_full(&disc, &rhs, SolverPath::DirectCoupled)?,
                (Model::Full, PathArg::Schur) => solve_full(&disc, &rhs, SolverPath::Schur)?,
            };
            timings.insert("solve".into(), res.wall_time);
            files.push(("solution.csv".into(), Some(solution_csv(&disc.vector_space, &res.xi))));
            let summary = SolveSummary {
                model: format!("{model:?}").to_lowercase(),
                path: res.path,
                ndofs: res.xi.len(),
                residual: res.residual,
                xi_norm: crate::linalg::norm2(&res.xi),
                psi_norm: res.psi.as_ref().map(|p| crate::linalg::norm2(p)),
            };
            (file, to_json(&summary))
        }
        Command::Sweep { common, mach, levels } => {
            let mut file = load(&common.config)?;
            with_levels(&mut file, *levels, overrides);
            overrides.insert(
                "mach".into(),
                mach.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            );
            let cfg = ProblemConfig::from_file(file.clone())?;
            validate_level(&cfg, 0)?;
            let lv: Vec<usize> = (0..cfg.levels).collect();
            let rep = sonic_sweep(&file, mach, &lv, cfg.options.kernel_threshold)?;
            files.push(("sweep.csv".into(), Some(rep.to_csv())));
            (file, to_json(&rep))
        }
        Command::Convergence { common, levels } => {
            let mut file = load(&common.config)?;
            with_levels(&mut file, *levels, overrides);
            let cfg = ProblemConfig::from_file(file.clone())?;
            let exact = cfg
                .exact
                .clone()
                .ok_or_else(|| Error::Config("`convergence` needs `[source] exact`".into()))?;
            let rep = mms_convergence(&cfg, &exact, cfg.levels)?;
            (file, to_json(&rep))
        }
        Command::Creg { common, levels } => {
            let mut file = load(&common.config)?;
            with_levels(&mut file, *levels, overrides);
            let cfg = ProblemConfig::from_file(file.clone())?;
            let lv: Vec<usize> = (0..cfg.levels).collect();
            (file, to_json(&estimate_creg(&cfg, &lv)?))
        }
    };
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    Ok((file, Output { report, files, timings }))
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Check { common, .. }
        | Command::Decompose { common, .. }
        | Command::Tcoerc { common, .. }
        | Command::Solve { common, .. }
        | Command::Sweep { common, .. }
        | Command::Convergence { common, .. }
        | Command::Creg { common, .. } => common,
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Check { .. } => "check",
        Command::Decompose { .. } => "decompose",
        Command::Tcoerc { .. } => "tcoerc",
        Command::Solve { .. } => "solve",
        Command::Sweep { .. } => "sweep",
        Command::Convergence { .. } => "convergence",
        Command::Creg { .. } => "creg",
    }
}

fn write_outputs(dir: &Path, sub: &str, file: &ConfigFile, out: &Output, overrides: BTreeMap<String, String>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let report = format!("{sub}.json");
    std::fs::write(dir.join(&report), &out.report)?;
    let mut outputs = vec![PathBuf::from(report)];
    for (name, body) in &out.files {
        if let Some(body) = body {
            std::fs::write(dir.join(name), body)?;
        }
        outputs.push(PathBuf::from(name));
    }
    let manifest_name = format!("{sub}.manifest.json");
    outputs.push(PathBuf::from(&manifest_name));
    let manifest = RunManifest {
        subcommand: sub.to_string(),
        config_hash: config_hash(file),
        overrides,
        outputs,
        versions: BTreeMap::from([
            ("galbrun".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("schema".to_string(), SCHEMA_VERSION.to_string()),
        ]),
        timings: out.timings.clone(),
    };
    std::fs::write(dir.join(manifest_name), to_json(&manifest))?;
    Ok(())
}

fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = Error::Config(e.to_string());
            eprintln!("{}", error_json(&err));
            return err.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        // fails only when a pool already exists, e.g. on repeated calls in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut overrides = BTreeMap::from([("seed".to_string(), common(&cli.command).seed.to_string())]);
    let sub = name(&cli.command);
    let result = run_command(&cli.command, &mut overrides).and_then(|(file, out)| {
        if let Some(dir) = &common(&cli.command).out {
            write_outputs(dir, sub, &file, &out, overrides)?;
        }
        Ok(out.report)
    });
    match result {
        Ok(report) => {
            // a closed pipe (e.g. `| head`) is not an error of the run
            let _ = writeln!(std::io::stdout(), "{report}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}
