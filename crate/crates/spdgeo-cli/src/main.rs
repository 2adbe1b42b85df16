//! Command-line interface to the spdgeo library.
//!
//! All commands read matrices from JSON files (either a bare row-major
//! 2-D array or an object with a "matrix" field), emit a JSON report with
//! `"schema": "1"` to stdout or `--out`, and are deterministic for a fixed
//! seed. Exit codes: 0 success, 1 verification failure, 2 malformed input,
//! 3 enumeration cap exceeded, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use spdgeo::grassmann::{half_angle_check, nearest_coordinate_plane, sign_change_reduce, Involution, Plane};
use spdgeo::matrix_core::{d_so, Rotation};
use spdgeo::mssr::{classify, connecting_geodesic, sample_curve};
use spdgeo::partitions::{eigen_decompose, enumerate_fiber_top, fiber_summary, partition_of_diag};
use spdgeo::sampling::random_involution;
use spdgeo::sr_metric::{d_sr, MetricConfig};
use spdgeo::verify::run_all;
use spdgeo::Error as GeoError;

const SCHEMA: &str = "1";

#[derive(Parser)]
#[command(name = "spdgeo", about = "Scaling-rotation geometry on SPD matrices", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Rotation weight k in d_M^2 = k d_SO^2 + d_Diag^2.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Seed for the randomized inner optimizer / suites.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance for eigenvalue clustering.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Enumeration cap on the matrix dimension p (env SPDGEO_CAP_P overrides).
    #[arg(long = "cap-p", default_value_t = 8)]
    cap_p: usize,
    /// Write the JSON report to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scaling-rotation distance between two SPD matrices.
    Dsr {
        #[arg(long = "X")]
        x: PathBuf,
        #[arg(long = "Y")]
        y: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Minimal smooth scaling-rotation curves between two SPD matrices.
    Mssr {
        #[arg(long = "X")]
        x: PathBuf,
        #[arg(long = "Y")]
        y: PathBuf,
        /// Number of samples per curve.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Uniqueness classification (Type I / Type II) of MSSR curves.
    Classify {
        #[arg(long = "X")]
        x: PathBuf,
        #[arg(long = "Y")]
        y: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fiber structure of the eigen-composition map at an SPD matrix.
    Fiber {
        #[arg(long = "X")]
        x: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sign-change reducibility of an involution.
    Reduce {
        #[arg(long = "R")]
        r: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Grassmannian utilities.
    Grass {
        #[command(subcommand)]
        sub: GrassCommand,
    },
    /// Half-angle relation between two involutions.
    Halfangle {
        #[arg(long = "X")]
        x: PathBuf,
        #[arg(long = "Y")]
        y: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the verification suite reproducing the library's numeric claims.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Run a single check by id (1..14).
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample random involutions in the open range 5 <= p <= 10 and record
    /// sign-change reducibility evidence (no claim is asserted).
    Search {
        /// Restrict to a single dimension p.
        #[arg(long)]
        p: Option<usize>,
        /// Random involutions per dimension.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GrassCommand {
    /// Nearest coordinate plane to a given m-plane.
    Nearest {
        /// JSON file with a p x m basis matrix (columns span the plane).
        #[arg(long = "W")]
        w: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Cap(String),
    Numerical(String),
    VerifyFailed,
}

impl From<GeoError> for CliError {
    fn from(e: GeoError) -> Self {
        match e {
            GeoError::CapExceeded(m) => CliError::Cap(m),
            GeoError::Numerical(m) => CliError::Numerical(m),
            GeoError::InvalidInput(m) | GeoError::DimensionMismatch(m) => CliError::Input(m),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_matrix(path: &PathBuf) -> CliResult<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("malformed JSON in {}: {e}", path.display())))?;
    let rows_value = match &value {
        serde_json::Value::Array(_) => &value,
        serde_json::Value::Object(map) => map
            .get("matrix")
            .ok_or_else(|| CliError::Input(format!("{}: missing \"matrix\" field", path.display())))?,
        _ => return Err(CliError::Input(format!("{}: expected array or object", path.display()))),
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(rows_value.clone())
        .map_err(|e| CliError::Input(format!("{}: not a 2-D numeric array: {e}", path.display())))?;
    let nr = rows.len();
    if nr == 0 {
        return Err(CliError::Input(format!("{}: empty matrix", path.display())));
    }
    let nc = rows[0].len();
    if nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(CliError::Input(format!("{}: ragged or empty rows", path.display())));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn matrix_json(m: &DMatrix<f64>) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    json!(rows)
}

fn emit<T: Serialize>(report: &T, out: &Option<PathBuf>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text.as_bytes())
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            // Ignore broken-pipe errors so `spdgeo ... | head` exits quietly.
            let _ = writeln!(stdout, "{text}");
        }
    }
    Ok(())
}

fn metric_config(common: &CommonOpts) -> CliResult<MetricConfig> {
    if !(common.k > 0.0) {
        return Err(CliError::Input("k must be positive".into()));
    }
    let mut cfg = MetricConfig::with_k(common.k);
    cfg.seed = common.seed;
    cfg.rtol = common.tol;
    cfg.cap_p = cap_p(common.cap_p)?;
    Ok(cfg)
}

fn cap_p(flag: usize) -> CliResult<usize> {
    match std::env::var("SPDGEO_CAP_P") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("SPDGEO_CAP_P is not an integer: {v}"))),
        Err(_) => Ok(flag),
    }
}

fn read_rotation(path: &PathBuf) -> CliResult<Rotation> {
    let m = read_matrix(path)?;
    Rotation::new(m).map_err(CliError::from)
}

fn minimal_pair_json(rec: &spdgeo::sr_metric::MinimalPairRecord) -> serde_json::Value {
    json!({
        "rep": {"signs": rec.rep.signs(), "perm": rec.rep.perm()},
        "cost_squared": rec.cost_squared,
        "converged": rec.converged,
        "endpoints": [
            {
                "rotation": matrix_json(rec.endpoints.0.rotation().matrix()),
                "scale": rec.endpoints.0.scale().entries(),
            },
            {
                "rotation": matrix_json(rec.endpoints.1.rotation().matrix()),
                "scale": rec.endpoints.1.scale().entries(),
            },
        ],
    })
}

fn cmd_dsr(x: &PathBuf, y: &PathBuf, common: &CommonOpts) -> CliResult<()> {
    let cfg = metric_config(common)?;
    let xm = read_matrix(x)?;
    let ym = read_matrix(y)?;
    let (dist, records) = d_sr(&xm, &ym, &cfg)?;
    let report = json!({
        "schema": SCHEMA,
        "dsr": dist,
        "k": cfg.k,
        "minimal_pairs": records.iter().map(minimal_pair_json).collect::<Vec<_>>(),
    });
    emit(&report, &common.out)
}

fn cmd_mssr(x: &PathBuf, y: &PathBuf, samples: usize, common: &CommonOpts) -> CliResult<()> {
    let cfg = metric_config(common)?;
    let xm = read_matrix(x)?;
    let ym = read_matrix(y)?;
    let report = classify(&xm, &ym, &cfg)?;
    let (dist, records) = d_sr(&xm, &ym, &cfg)?;
    let mut curves = Vec::new();
    for rec in &records {
        for geo in connecting_geodesic(&rec.endpoints.0, &rec.endpoints.1)? {
            let sample = sample_curve(&geo, samples)?;
            curves.push(json!({
                "times": sample.times,
                "values": sample.values.iter().map(matrix_json).collect::<Vec<_>>(),
                "derivative_norms": sample.derivative_norms,
            }));
        }
    }
    let out = json!({
        "schema": SCHEMA,
        "dsr": dist,
        "report": report,
        "curves": curves,
    });
    emit(&out, &common.out)
}

fn cmd_classify(x: &PathBuf, y: &PathBuf, common: &CommonOpts) -> CliResult<()> {
    let cfg = metric_config(common)?;
    let xm = read_matrix(x)?;
    let ym = read_matrix(y)?;
    let report = classify(&xm, &ym, &cfg)?;
    let out = json!({
        "schema": SCHEMA,
        "pair_count": report.pair_count,
        "curve_count": report.curve_count,
        "type1": report.type1,
        "type2": report.type2,
        "antipodal_pairs": report.antipodal_pairs,
    });
    emit(&out, &common.out)
}

fn cmd_fiber(x: &PathBuf, common: &CommonOpts) -> CliResult<()> {
    let cap = cap_p(common.cap_p)?;
    let xm = read_matrix(x)?;
    let pt = eigen_decompose(&xm, 1e-8)?;
    let summary = fiber_summary(pt.scale(), common.tol);
    let partition = partition_of_diag(pt.scale(), common.tol);
    let enumerated = if partition.num_blocks() == pt.dim() && pt.dim() <= cap {
        Some(enumerate_fiber_top(&pt, common.tol, 1 << 22)?.len())
    } else {
        None
    };
    let out = json!({
        "schema": SCHEMA,
        "partition": partition.blocks(),
        "component_count": summary.component_count.to_string(),
        "component_shape": summary.component_shape,
        "enumerated_points": enumerated,
    });
    emit(&out, &common.out)
}

fn cmd_reduce(r: &PathBuf, common: &CommonOpts) -> CliResult<()> {
    let rot = read_rotation(r)?;
    let inv = Involution::new(rot)?;
    let p = inv.p();
    let d_before = d_so(inv.rotation(), &Rotation::identity(p))?;
    let reduction = sign_change_reduce(&inv)?;
    let (reducible, sigma, d_after) = match reduction {
        Some(red) => (true, red.sigma.signs().to_vec(), red.new_distance),
        None => (false, Vec::new(), d_before),
    };
    let out = json!({
        "schema": SCHEMA,
        "reducible": reducible,
        "sigma": sigma,
        "d_before": d_before,
        "d_after": d_after,
    });
    emit(&out, &common.out)
}

fn cmd_grass_nearest(w: &PathBuf, common: &CommonOpts) -> CliResult<()> {
    let basis = read_matrix(w)?;
    let plane = Plane::new(basis)?;
    let report = nearest_coordinate_plane(&plane)?;
    let out = json!({
        "schema": SCHEMA,
        "J": report.j,
        "d": report.distance,
        "min_sin2": report.min_sin2,
    });
    emit(&out, &common.out)
}

fn cmd_halfangle(x: &PathBuf, y: &PathBuf, common: &CommonOpts) -> CliResult<()> {
    let r1 = Involution::new(read_rotation(x)?)?;
    let r2 = Involution::new(read_rotation(y)?)?;
    let report = half_angle_check(&r1, &r2)?;
    let out = json!({
        "schema": SCHEMA,
        "phis": report.phis,
        "theta_tilde": report.theta_tilde,
        "matching": report.matching,
        "max_mismatch": report.max_mismatch,
        "pass": report.max_mismatch <= 1e-8,
    });
    emit(&out, &common.out)
}

fn cmd_verify(seed: u64, only: &Option<String>, out: &Option<PathBuf>) -> CliResult<()> {
    let checks = run_all(seed, only.as_deref())?;
    let all_pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "schema": SCHEMA,
        "seed": seed,
        "checks": checks,
        "all_pass": all_pass,
    });
    emit(&report, out)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::VerifyFailed)
    }
}

fn cmd_search(p: Option<usize>, samples: usize, seed: u64, out: &Option<PathBuf>) -> CliResult<()> {
    use rand::SeedableRng;
    let dims: Vec<usize> = match p {
        Some(p) => {
            if !(2..=24).contains(&p) {
                return Err(CliError::Input(format!("p = {p} outside supported range 2..=24")));
            }
            vec![p]
        }
        None => (5..=10).collect(),
    };
    let mut per_dim = Vec::new();
    for &p in &dims {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
        let mut irreducible = 0usize;
        let mut irreducible_levels = Vec::new();
        for _ in 0..samples {
            let inv = Involution::new(random_involution(p, &mut rng))?;
            if sign_change_reduce(&inv)?.is_none() {
                irreducible += 1;
                irreducible_levels.push(inv.level());
            }
        }
        per_dim.push(json!({
            "p": p,
            "samples": samples,
            "irreducible_count": irreducible,
            "irreducible_levels": irreducible_levels,
        }));
    }
    let report = json!({
        "schema": SCHEMA,
        "seed": seed,
        "note": "evidence only; no reducibility claim is asserted for 5 <= p <= 10",
        "results": per_dim,
    });
    emit(&report, out)
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Dsr { x, y, common } => cmd_dsr(x, y, common),
        Command::Mssr { x, y, samples, common } => cmd_mssr(x, y, *samples, common),
        Command::Classify { x, y, common } => cmd_classify(x, y, common),
        Command::Fiber { x, common } => cmd_fiber(x, common),
        Command::Reduce { r, common } => cmd_reduce(r, common),
        Command::Grass { sub } => match sub {
            GrassCommand::Nearest { w, common } => cmd_grass_nearest(w, common),
        },
        Command::Halfangle { x, y, common } => cmd_halfangle(x, y, common),
        Command::Verify { seed, only, out } => cmd_verify(*seed, only, out),
        Command::Search { p, samples, seed, out } => cmd_search(*p, *samples, *seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(0),
        Err(CliError::VerifyFailed) => {
            eprintln!("error: one or more verification checks failed");
            ExitCode::from(1)
        }
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Cap(m)) => {
            eprintln!("error: cap exceeded: {m}");
            ExitCode::from(3)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("error: numerical failure: {m}");
            ExitCode::from(4)
        }
    }
}
