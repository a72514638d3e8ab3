//! Command-line front end: scenario configuration, data ingestion, solver
//! invocation, counterfactual comparison, and table emission.
//!
//! Four subcommands share one JSON scenario format:
//!
//! * `solve` — one balanced growth path, equilibrium tables + summary.
//! * `counterfactual` — baseline vs shocked trade costs, welfare tables.
//! * `calibrate` — trade costs from flow tables, optional parameter fit.
//! * `sweep` — growth rate along a grid of uniform trade-cost multipliers.
//!
//! Exit codes: 0 success, 2 configuration/data error, 3 solver failure
//! (a partial convergence trace is still written). Reruns with identical
//! inputs produce byte-identical output tables: fixed country order, fixed
//! column order, floats always printed with 12 significant digits, and no
//! timestamps in any primary output.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{
    growth_rate, static_welfare_split, welfare_decomposition, GrowthDecomposition,
};
use crate::calibration::{
    fit_free_params, head_ries_costs, tau_change_matrix, CalibrationTargets, FitConfig,
};
use crate::error::Error;
use crate::model::{validate_params, Equilibrium, FlowTable, ModelParams, ValidatedParams};
use crate::solver::{solve_bgp, solve_from, BgpState, SolveTrace, SolverConfig};

pub const EXIT_OK: i32 = 0;
/// Unreadable, malformed, or invalid configuration and data files.
pub const EXIT_CONFIG: i32 = 2;
/// The model itself failed: no convergence, no balanced growth path, or an
/// internal consistency check tripped. Partial diagnostics are written.
pub const EXIT_SOLVE: i32 = 3;

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "tradegrowth",
    version,
    about = "Balanced-growth-path solver for a multi-country trade and growth model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one balanced growth path and write equilibrium tables.
    Solve(RunArgs),
    /// Solve baseline and shocked paths; write the welfare decomposition.
    Counterfactual(RunArgs),
    /// Infer trade costs from flow tables; optionally fit T and psi.
    Calibrate(RunArgs),
    /// Solve along a grid of uniform off-diagonal trade-cost multipliers.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the scenario's `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Outer-loop convergence tolerance (overrides the scenario).
    #[arg(long)]
    tol: Option<f64>,
    /// Outer-loop iteration cap (overrides the scenario).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Randomize the solver's starting point with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict output to one format (default: write both).
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// First off-diagonal trade-cost multiplier.
    #[arg(long, default_value_t = 1.0)]
    from: f64,
    /// Last multiplier (inclusive up to rounding).
    #[arg(long, default_value_t = 3.0)]
    to: f64,
    /// Grid step.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    params: ParamsSpec,
    #[serde(default)]
    shock: Option<ShockSpec>,
    #[serde(default)]
    targets: Option<TargetsSpec>,
    #[serde(default)]
    fit: Option<FitSpec>,
    #[serde(default)]
    solver: Option<SolverSpec>,
    #[serde(default)]
    output: Option<OutputSpec>,
}

/// Model parameters with exactly one trade-cost source: an inline `tau`
/// matrix, or a bilateral flow-table CSV inverted on load.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSpec {
    theta: f64,
    sigma: f64,
    alpha: f64,
    rho: f64,
    psi: f64,
    #[serde(rename = "T")]
    t: Vec<f64>,
    #[serde(rename = "L")]
    l: Vec<f64>,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    tau: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    flows: Option<PathBuf>,
}

/// Counterfactual trade costs: exactly one of a replacement matrix,
/// entrywise multipliers on the baseline, or a second flow table.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShockSpec {
    #[serde(default)]
    tau: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    tau_multipliers: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    flows: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsSpec {
    wages: Vec<f64>,
    growth: f64,
    #[serde(default = "default_weight")]
    wage_weight: f64,
    #[serde(default = "default_weight")]
    growth_weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FitSpec {
    #[serde(default)]
    sweeps: Option<usize>,
    #[serde(default)]
    bracket_half_width: Option<f64>,
    #[serde(default)]
    line_search_tol: Option<f64>,
    #[serde(default)]
    line_search_max_iter: Option<usize>,
    #[serde(default)]
    target_objective: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSpec {
    #[serde(default)]
    tol_inner: Option<f64>,
    #[serde(default)]
    tol_mid: Option<f64>,
    #[serde(default)]
    tol_outer: Option<f64>,
    #[serde(default)]
    max_iter_inner: Option<usize>,
    #[serde(default)]
    max_iter_mid: Option<usize>,
    #[serde(default)]
    max_iter_outer: Option<usize>,
    #[serde(default)]
    damping_inner: Option<f64>,
    #[serde(default)]
    damping_mid: Option<f64>,
    #[serde(default)]
    damping_outer: Option<f64>,
    #[serde(default)]
    accel_every: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    #[serde(default)]
    dir: Option<PathBuf>,
    /// Subset of ["csv", "json"]; default both.
    #[serde(default)]
    formats: Option<Vec<String>>,
}

/// A command failure carrying its process exit code.
struct Failure {
    code: i32,
    message: String,
}

type CmdResult<T> = std::result::Result<T, Failure>;

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn solve_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_SOLVE,
        message: message.into(),
    }
}

/// Map a library error to the exit-code class it belongs to: everything that
/// describes bad inputs is a configuration error; everything that describes
/// the model failing to produce an answer is a solver error.
fn classify(err: &Error) -> i32 {
    match err {
        Error::NonPositiveParam { .. }
        | Error::DimensionMismatch { .. }
        | Error::AsymmetricTau { .. }
        | Error::DiagonalTauNotOne { .. }
        | Error::TradeCostBelowUnity { .. }
        | Error::GammaDiverges { .. }
        | Error::TauNotUniform { .. }
        | Error::CountryMismatch { .. }
        | Error::ZeroDiagonalFlow { .. }
        | Error::NegativeFlow { .. } => EXIT_CONFIG,
        Error::MaxIterExceeded { .. }
        | Error::DivergenceDetected { .. }
        | Error::NotConverged { .. }
        | Error::SearchFailed { .. }
        | Error::ResidualsTooLarge { .. } => EXIT_SOLVE,
    }
}

fn lib_error(err: Error) -> Failure {
    Failure {
        code: classify(&err),
        message: err.to_string(),
    }
}

/// Everything a command needs, resolved and validated.
struct Scenario {
    vp: ValidatedParams,
    /// The flow table the baseline costs were inverted from, when the
    /// scenario used one.
    flows: Option<FlowTable>,
    shock: Option<ShockSpec>,
    targets: Option<TargetsSpec>,
    fit: FitSpec,
    solver: SolverConfig,
    out_dir: PathBuf,
    write_csv: bool,
    write_json: bool,
    /// Directory of the scenario file; data paths resolve against it.
    base_dir: PathBuf,
}

impl Scenario {
    fn load(args: &RunArgs) -> CmdResult<Scenario> {
        let text = std::fs::read_to_string(&args.config).map_err(|e| {
            config_error(format!("cannot read {}: {e}", args.config.display()))
        })?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
            config_error(format!("invalid scenario {}: {e}", args.config.display()))
        })?;
        let base_dir = args
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));

        // Baseline trade costs: exactly one source.
        let p = file.params;
        let (tau, flows) = match (p.tau, p.flows) {
            (Some(tau), None) => (tau, None),
            (None, Some(path)) => {
                let table = read_flow_csv(&base_dir.join(&path), &p.labels)?;
                let tau = head_ries_costs(&table, p.theta).map_err(lib_error)?;
                (tau, Some(table))
            }
            (Some(_), Some(_)) => {
                return Err(config_error(
                    "params: give either `tau` or `flows`, not both",
                ))
            }
            (None, None) => {
                return Err(config_error(
                    "params: one trade-cost source required (`tau` matrix or `flows` CSV path)",
                ))
            }
        };
        let labels = if p.labels.is_empty() {
            flows.as_ref().map(|t| t.labels.clone()).unwrap_or_default()
        } else {
            p.labels
        };
        let vp = validate_params(ModelParams {
            theta: p.theta,
            sigma: p.sigma,
            alpha: p.alpha,
            rho: p.rho,
            psi: p.psi,
            t: p.t,
            l: p.l,
            tau,
            labels,
        })
        .map_err(lib_error)?;

        let mut solver = SolverConfig::default();
        if let Some(s) = file.solver {
            macro_rules! take {
                ($($f:ident),*) => { $( if let Some(v) = s.$f { solver.$f = v; } )* };
            }
            take!(
                tol_inner,
                tol_mid,
                tol_outer,
                max_iter_inner,
                max_iter_mid,
                max_iter_outer,
                damping_inner,
                damping_mid,
                damping_outer,
                accel_every
            );
            if s.seed.is_some() {
                solver.seed = s.seed;
            }
        }
        if let Some(tol) = args.tol {
            solver.tol_outer = tol;
        }
        if let Some(cap) = args.max_iter {
            solver.max_iter_outer = cap;
        }
        if args.seed.is_some() {
            solver.seed = args.seed;
        }

        let output = file.output.unwrap_or_default();
        let out_dir = args
            .out
            .clone()
            .or(output.dir)
            .unwrap_or_else(|| PathBuf::from("out"));
        let (mut write_csv, mut write_json) = match &output.formats {
            None => (true, true),
            Some(list) => {
                let mut csv = false;
                let mut json = false;
                for f in list {
                    match f.as_str() {
                        "csv" => csv = true,
                        "json" => json = true,
                        other => {
                            return Err(config_error(format!(
                                "output.formats: unknown format {other:?} (expected \"csv\" or \"json\")"
                            )))
                        }
                    }
                }
                (csv, json)
            }
        };
        match args.format {
            Some(OutputFormat::Csv) => {
                write_csv = true;
                write_json = false;
            }
            Some(OutputFormat::Json) => {
                write_csv = false;
                write_json = true;
            }
            None => {}
        }

        Ok(Scenario {
            vp,
            flows,
            shock: file.shock,
            targets: file.targets,
            fit: file.fit.unwrap_or_default(),
            solver,
            out_dir,
            write_csv,
            write_json,
            base_dir,
        })
    }

    /// Resolve the shock into a full replacement trade-cost matrix.
    fn shock_tau(&self) -> CmdResult<Vec<Vec<f64>>> {
        let shock = self
            .shock
            .as_ref()
            .expect("caller checks shock presence first");
        let n = self.vp.n;
        let given = [
            shock.tau.is_some(),
            shock.tau_multipliers.is_some(),
            shock.flows.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given != 1 {
            return Err(config_error(
                "shock: give exactly one of `tau`, `tau_multipliers`, or `flows`",
            ));
        }
        if let Some(tau) = &shock.tau {
            return Ok(tau.clone());
        }
        if let Some(mult) = &shock.tau_multipliers {
            if mult.len() != n || mult.iter().any(|row| row.len() != n) {
                return Err(config_error(format!(
                    "shock.tau_multipliers: expected a {n}x{n} matrix"
                )));
            }
            let mut tau = self.vp.tau.clone();
            for s in 0..n {
                for d in 0..n {
                    if s == d {
                        if mult[s][d] != 1.0 {
                            return Err(config_error(format!(
                                "shock.tau_multipliers: diagonal entry ({s},{s}) must be 1, got {}",
                                mult[s][d]
                            )));
                        }
                    } else {
                        tau[s][d] *= mult[s][d];
                    }
                }
            }
            return Ok(tau);
        }
        let path = shock.flows.as_ref().unwrap();
        let table = read_flow_csv(&self.base_dir.join(path), &self.vp.labels)?;
        head_ries_costs(&table, self.vp.theta).map_err(lib_error)
    }
}

// ---------------------------------------------------------------------------
// Flow-table CSV ingestion
// ---------------------------------------------------------------------------

/// Read a bilateral flow table: header `source,dest,value`, one row per
/// ordered country pair, no missing pairs, no duplicates. When
/// `expected_labels` is non-empty the file must cover exactly those
/// countries (in any row order); otherwise the country order is the order
/// of first appearance in the `source` column.
fn read_flow_csv(path: &Path, expected_labels: &[String]) -> CmdResult<FlowTable> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let expected_header = ["source", "dest", "value"];
    if headers.len() != 3 || !headers.iter().eq(expected_header) {
        return Err(config_error(format!(
            "{}: expected header `source,dest,value`, got `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut rows: Vec<(String, String, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| config_error(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if record.len() != 3 {
            return Err(config_error(format!(
                "{} row {}: expected 3 fields, got {}",
                path.display(),
                i + 2,
                record.len()
            )));
        }
        let value: f64 = record[2].trim().parse().map_err(|e| {
            config_error(format!(
                "{} row {}: bad value {:?}: {e}",
                path.display(),
                i + 2,
                &record[2]
            ))
        })?;
        rows.push((record[0].to_string(), record[1].to_string(), value));
    }

    let labels: Vec<String> = if expected_labels.is_empty() {
        let mut seen = Vec::new();
        for (source, _, _) in &rows {
            if !seen.contains(source) {
                seen.push(source.clone());
            }
        }
        seen
    } else {
        expected_labels.to_vec()
    };
    let n = labels.len();
    if n == 0 {
        return Err(config_error(format!("{}: no data rows", path.display())));
    }
    let index = |label: &str| -> CmdResult<usize> {
        labels.iter().position(|l| l == label).ok_or_else(|| {
            config_error(format!(
                "{}: unknown country {label:?} (expected one of {labels:?})",
                path.display()
            ))
        })
    };

    let mut value = vec![vec![f64::NAN; n]; n];
    for (source, dest, v) in &rows {
        let s = index(source)?;
        let d = index(dest)?;
        if !value[s][d].is_nan() {
            return Err(config_error(format!(
                "{}: duplicate pair {source} -> {dest}",
                path.display()
            )));
        }
        value[s][d] = *v;
    }
    for s in 0..n {
        for d in 0..n {
            if value[s][d].is_nan() {
                return Err(config_error(format!(
                    "{}: missing pair {} -> {} (every ordered pair must have a row)",
                    path.display(),
                    labels[s],
                    labels[d]
                )));
            }
        }
    }
    FlowTable::new(labels, value).map_err(lib_error)
}

// ---------------------------------------------------------------------------
// Output formatting
// ---------------------------------------------------------------------------

/// All floats in primary outputs go through this: 12 significant digits,
/// scientific notation, so reruns are byte-identical.
fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// JSON value for a float: rounded to 12 significant digits so the emitted
/// digits are stable; non-finite values (possible in per-variety accounting
/// for countries that own no varieties) become null.
fn json_float(x: f64) -> serde_json::Value {
    if !x.is_finite() {
        return serde_json::Value::Null;
    }
    let rounded: f64 = fmt_float(x).parse().expect("round-trip of formatted float");
    serde_json::Number::from_f64(rounded)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

fn json_float_vec(xs: &[f64]) -> serde_json::Value {
    serde_json::Value::Array(xs.iter().map(|&x| json_float(x)).collect())
}

fn json_matrix(m: &[Vec<f64>]) -> serde_json::Value {
    serde_json::Value::Array(m.iter().map(|row| json_float_vec(row)).collect())
}

fn ensure_out_dir(dir: &Path) -> CmdResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))
}

fn write_csv_table(
    dir: &Path,
    name: &str,
    header: &[String],
    rows: &[Vec<String>],
) -> CmdResult<()> {
    let path = dir.join(name);
    let mut writer = csv::Writer::from_path(&path)
        .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record(header)
        .and_then(|()| rows.iter().try_for_each(|r| writer.write_record(r)))
        .and_then(|()| writer.flush().map_err(csv::Error::from))
        .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))
}

fn write_json_file(dir: &Path, name: &str, value: &serde_json::Value) -> CmdResult<()> {
    let path = dir.join(name);
    let mut file = std::fs::File::create(&path)
        .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))?;
    let text = serde_json::to_string_pretty(value).expect("JSON serialization");
    file.write_all(text.as_bytes())
        .and_then(|()| file.write_all(b"\n"))
        .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))
}

/// Square share matrix as a CSV with labeled rows and columns, after
/// checking that every column sums to one (origin shares of each
/// destination must exhaust expenditure).
fn write_share_table(
    dir: &Path,
    name: &str,
    labels: &[String],
    shares: &[Vec<f64>],
) -> CmdResult<()> {
    let n = labels.len();
    for d in 0..n {
        let col: f64 = (0..n).map(|s| shares[s][d]).sum();
        if !((col - 1.0).abs() < 1e-9) {
            return Err(solve_error(format!(
                "{name}: column {} sums to {col:.12e}, not 1; refusing to write an invalid share table",
                labels[d]
            )));
        }
    }
    write_matrix_table(dir, name, labels, shares)
}

/// Square matrix as a CSV with a `source` label column and one column per
/// destination label.
fn write_matrix_table(
    dir: &Path,
    name: &str,
    labels: &[String],
    matrix: &[Vec<f64>],
) -> CmdResult<()> {
    let mut header = vec!["source".to_string()];
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = labels
        .iter()
        .zip(matrix)
        .map(|(l, row)| {
            std::iter::once(l.clone())
                .chain(row.iter().map(|&v| fmt_float(v)))
                .collect()
        })
        .collect();
    write_csv_table(dir, name, &header, &rows)
}

/// Convergence trace as JSON (wall time deliberately excluded so reruns
/// stay byte-identical).
fn trace_json(trace: &SolveTrace) -> serde_json::Value {
    let mut map = BTreeMap::new();
    map.insert("converged".to_string(), serde_json::json!(trace.converged));
    map.insert(
        "outer_iters".to_string(),
        serde_json::json!(trace.outer_iters),
    );
    map.insert(
        "mid_iters_total".to_string(),
        serde_json::json!(trace.mid_iters_total),
    );
    map.insert(
        "inner_iters_total".to_string(),
        serde_json::json!(trace.inner_iters_total),
    );
    map.insert(
        "oscillation".to_string(),
        serde_json::json!(trace.oscillation),
    );
    map.insert(
        "mid_rescues".to_string(),
        serde_json::json!(trace.mid_rescues),
    );
    map.insert(
        "accel_jumps".to_string(),
        serde_json::json!(trace.accel_jumps),
    );
    map.insert(
        "corner_snaps".to_string(),
        serde_json::json!(trace.corner_snaps),
    );
    map.insert(
        "drift_jumps".to_string(),
        serde_json::json!(trace.drift_jumps),
    );
    map.insert("revivals".to_string(), serde_json::json!(trace.revivals));
    map.insert(
        "last_delta".to_string(),
        trace
            .outer_deltas
            .last()
            .map(|&d| json_float(d))
            .unwrap_or(serde_json::Value::Null),
    );
    serde_json::Value::Object(map.into_iter().collect())
}

/// On solver failure: write whatever diagnostics exist, then fail with exit
/// code 3. A `NotConverged` error carries the full iteration trace; it goes
/// to `trace.json` alongside an error summary.
fn write_failure_artifacts(dir: &Path, context: &str, err: &Error) -> Failure {
    let _ = ensure_out_dir(dir);
    let mut map = BTreeMap::new();
    map.insert("error".to_string(), serde_json::json!(err.to_string()));
    map.insert("context".to_string(), serde_json::json!(context));
    if let Error::NotConverged { trace, .. } = err {
        map.insert("trace".to_string(), trace_json(trace));
        let deltas = serde_json::Value::Array(
            trace.outer_deltas.iter().map(|&d| json_float(d)).collect(),
        );
        let mut trace_file = BTreeMap::new();
        trace_file.insert("outer_deltas".to_string(), deltas);
        trace_file.insert("summary".to_string(), trace_json(trace));
        let _ = write_json_file(
            dir,
            "trace.json",
            &serde_json::Value::Object(trace_file.into_iter().collect()),
        );
    }
    let _ = write_json_file(
        dir,
        "summary.json",
        &serde_json::Value::Object(map.into_iter().collect()),
    );
    Failure {
        code: classify(err),
        message: format!("{context}: {err}"),
    }
}

// ---------------------------------------------------------------------------
// Equilibrium tables shared by solve and counterfactual
// ---------------------------------------------------------------------------

fn equilibrium_rows(vp: &ValidatedParams, eq: &Equilibrium) -> Vec<Vec<String>> {
    let shares = eq.measure_shares();
    (0..vp.n)
        .map(|s| {
            vec![
                vp.labels[s].clone(),
                fmt_float(eq.w[s]),
                fmt_float(eq.p[s]),
                fmt_float(eq.pm[s]),
                fmt_float(eq.m[s]),
                fmt_float(shares[s]),
                fmt_float(eq.expenditure[s]),
                fmt_float(eq.revenue[s]),
                fmt_float(eq.profits[s]),
            ]
        })
        .collect()
}

fn equilibrium_header() -> Vec<String> {
    [
        "country",
        "wage",
        "final_price",
        "intermediate_price",
        "measure",
        "measure_share",
        "expenditure",
        "revenue",
        "profit",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn growth_rows(vp: &ValidatedParams, decomp: &GrowthDecomposition) -> Vec<Vec<String>> {
    decomp
        .countries
        .iter()
        .enumerate()
        .map(|(s, c)| {
            vec![
                vp.labels[s].clone(),
                fmt_float(c.total),
                fmt_float(c.labor_income),
                fmt_float(c.global_profit),
                fmt_float(c.investment_income_rate),
                fmt_float(c.ek_factor),
                fmt_float(c.variety_access_factor),
                fmt_float(c.domestic_share_factor),
            ]
        })
        .collect()
}

fn growth_header() -> Vec<String> {
    [
        "country",
        "growth",
        "labor_income",
        "global_profit",
        "investment_income_rate",
        "ek_factor",
        "variety_access_factor",
        "domestic_share_factor",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn country_summaries(vp: &ValidatedParams, eq: &Equilibrium) -> serde_json::Value {
    let shares = eq.measure_shares();
    serde_json::Value::Array(
        (0..vp.n)
            .map(|s| {
                let mut map = BTreeMap::new();
                map.insert("label".to_string(), serde_json::json!(vp.labels[s]));
                map.insert("wage".to_string(), json_float(eq.w[s]));
                map.insert("final_price".to_string(), json_float(eq.p[s]));
                map.insert("intermediate_price".to_string(), json_float(eq.pm[s]));
                map.insert("measure".to_string(), json_float(eq.m[s]));
                map.insert("measure_share".to_string(), json_float(shares[s]));
                map.insert("expenditure".to_string(), json_float(eq.expenditure[s]));
                map.insert("revenue".to_string(), json_float(eq.revenue[s]));
                map.insert("profit".to_string(), json_float(eq.profits[s]));
                serde_json::Value::Object(map.into_iter().collect())
            })
            .collect(),
    )
}

fn write_equilibrium_outputs(
    scenario: &Scenario,
    eq: &Equilibrium,
    trace: &SolveTrace,
) -> CmdResult<()> {
    let vp = &scenario.vp;
    let dir = &scenario.out_dir;
    ensure_out_dir(dir)?;
    let decomp = growth_rate(vp, eq).map_err(lib_error)?;

    if scenario.write_csv {
        write_csv_table(dir, "equilibrium.csv", &equilibrium_header(), &equilibrium_rows(vp, eq))?;
        write_csv_table(dir, "growth.csv", &growth_header(), &growth_rows(vp, &decomp))?;
        write_share_table(dir, "shares_final.csv", &vp.labels, &eq.shares.lambda_f)?;
        write_share_table(
            dir,
            "shares_intermediate.csv",
            &vp.labels,
            &eq.shares.lambda_m,
        )?;
        let residual_rows: Vec<Vec<String>> = (0..vp.n)
            .map(|s| {
                vec![
                    vp.labels[s].clone(),
                    fmt_float(eq.residuals.goods_market[s]),
                    fmt_float(eq.residuals.trade_balance[s]),
                ]
            })
            .collect();
        write_csv_table(
            dir,
            "residuals.csv",
            &["country", "goods_market", "trade_balance"]
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>(),
            &residual_rows,
        )?;
    }

    if scenario.write_json {
        let mut map = BTreeMap::new();
        map.insert("command".to_string(), serde_json::json!("solve"));
        map.insert("growth".to_string(), json_float(eq.g));
        map.insert("interest_rate".to_string(), json_float(eq.r));
        map.insert("countries".to_string(), country_summaries(vp, eq));
        map.insert(
            "residual_sup".to_string(),
            json_float(
                eq.residuals
                    .goods_market
                    .iter()
                    .chain(&eq.residuals.trade_balance)
                    .fold(0.0f64, |a, &b| a.max(b.abs())),
            ),
        );
        map.insert("trace".to_string(), trace_json(trace));
        write_json_file(
            dir,
            "summary.json",
            &serde_json::Value::Object(map.into_iter().collect()),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_solve(args: &RunArgs) -> CmdResult<()> {
    let scenario = Scenario::load(args)?;
    if scenario.shock.is_some() {
        return Err(config_error(
            "scenario has a `shock` section: use the `counterfactual` command for it, \
             or remove the section to solve the baseline",
        ));
    }
    let solution = solve_bgp(&scenario.vp, &scenario.solver)
        .map_err(|e| write_failure_artifacts(&scenario.out_dir, "solve", &e))?;
    write_equilibrium_outputs(&scenario, &solution.equilibrium, &solution.trace)
}

fn cmd_counterfactual(args: &RunArgs) -> CmdResult<()> {
    let scenario = Scenario::load(args)?;
    if scenario.shock.is_none() {
        return Err(config_error(
            "counterfactual requires a `shock` section (replacement `tau`, \
             `tau_multipliers`, or a second flow table via `flows`)",
        ));
    }
    let vp_base = &scenario.vp;
    let vp_new = vp_base.with_tau(scenario.shock_tau()?).map_err(lib_error)?;

    let base = solve_bgp(vp_base, &scenario.solver)
        .map_err(|e| write_failure_artifacts(&scenario.out_dir, "baseline solve", &e))?;
    // Warm-starting the shocked solve from the baseline would also work, but
    // a cold start keeps the two legs symmetric and independently
    // reproducible.
    let new = solve_bgp(&vp_new, &scenario.solver)
        .map_err(|e| write_failure_artifacts(&scenario.out_dir, "counterfactual solve", &e))?;

    let welfare = welfare_decomposition(vp_base, &base.equilibrium, &vp_new, &new.equilibrium)
        .map_err(lib_error)?;
    let split = static_welfare_split(vp_base, &base.equilibrium, &vp_new, &new.equilibrium)
        .map_err(lib_error)?;

    let dir = &scenario.out_dir;
    ensure_out_dir(dir)?;
    let delta_g_pp = 100.0 * (new.equilibrium.g - base.equilibrium.g);

    if scenario.write_csv {
        let header: Vec<String> = [
            "country",
            "transitional",
            "static",
            "static_technology_selection",
            "static_variety",
            "dynamic",
            "total",
            "dynamic_share",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let rows: Vec<Vec<String>> = (0..vp_base.n)
            .map(|s| {
                vec![
                    vp_base.labels[s].clone(),
                    fmt_float(welfare.transitional[s]),
                    fmt_float(welfare.static_component[s]),
                    fmt_float(split[s].ek),
                    fmt_float(split[s].romer),
                    fmt_float(welfare.dynamic_component),
                    fmt_float(welfare.total[s]),
                    welfare.dynamic_share[s]
                        .map(fmt_float)
                        .unwrap_or_default(),
                ]
            })
            .collect();
        write_csv_table(dir, "welfare.csv", &header, &rows)?;
    }

    if scenario.write_json {
        let mut map = BTreeMap::new();
        map.insert("command".to_string(), serde_json::json!("counterfactual"));
        map.insert("baseline_growth".to_string(), json_float(base.equilibrium.g));
        map.insert(
            "counterfactual_growth".to_string(),
            json_float(new.equilibrium.g),
        );
        map.insert("delta_growth_pp".to_string(), json_float(delta_g_pp));
        map.insert(
            "dynamic_component".to_string(),
            json_float(welfare.dynamic_component),
        );
        let countries = serde_json::Value::Array(
            (0..vp_base.n)
                .map(|s| {
                    let mut c = BTreeMap::new();
                    c.insert("label".to_string(), serde_json::json!(vp_base.labels[s]));
                    c.insert(
                        "transitional".to_string(),
                        json_float(welfare.transitional[s]),
                    );
                    c.insert(
                        "static".to_string(),
                        json_float(welfare.static_component[s]),
                    );
                    c.insert(
                        "static_technology_selection".to_string(),
                        json_float(split[s].ek),
                    );
                    c.insert("static_variety".to_string(), json_float(split[s].romer));
                    c.insert("total".to_string(), json_float(welfare.total[s]));
                    c.insert(
                        "dynamic_share".to_string(),
                        welfare.dynamic_share[s]
                            .map(json_float)
                            .unwrap_or(serde_json::Value::Null),
                    );
                    serde_json::Value::Object(c.into_iter().collect())
                })
                .collect(),
        );
        map.insert("countries".to_string(), countries);
        map.insert("baseline_trace".to_string(), trace_json(&base.trace));
        map.insert("counterfactual_trace".to_string(), trace_json(&new.trace));
        write_json_file(
            dir,
            "summary.json",
            &serde_json::Value::Object(map.into_iter().collect()),
        )?;
    }
    Ok(())
}

fn cmd_calibrate(args: &RunArgs) -> CmdResult<()> {
    let scenario = Scenario::load(args)?;
    let Some(flows) = &scenario.flows else {
        return Err(config_error(
            "calibrate requires the baseline trade costs to come from a flow table \
             (set `params.flows` to a CSV path)",
        ));
    };
    let vp = &scenario.vp;
    let dir = &scenario.out_dir;
    ensure_out_dir(dir)?;

    // Baseline costs were already inverted during scenario load.
    let tau = &vp.tau;

    let change = match &scenario.shock {
        None => None,
        Some(ShockSpec {
            flows: Some(path),
            tau: None,
            tau_multipliers: None,
        }) => {
            let after = read_flow_csv(&scenario.base_dir.join(path), &vp.labels)?;
            Some(tau_change_matrix(flows, &after, vp.theta).map_err(lib_error)?)
        }
        Some(_) => {
            return Err(config_error(
                "calibrate: the `shock` section may only hold a second flow table \
                 (`flows`); cost matrices and multipliers have nothing to invert",
            ))
        }
    };

    let fit = match &scenario.targets {
        None => None,
        Some(t) => {
            let targets = CalibrationTargets::new(
                t.wages.clone(),
                t.growth,
                t.wage_weight,
                t.growth_weight,
            )
            .map_err(lib_error)?;
            let mut cfg = FitConfig {
                solver: scenario.solver.clone(),
                ..FitConfig::default()
            };
            let f = &scenario.fit;
            if let Some(v) = f.sweeps {
                cfg.sweeps = v;
            }
            if let Some(v) = f.bracket_half_width {
                cfg.bracket_half_width = v;
            }
            if let Some(v) = f.line_search_tol {
                cfg.line_search_tol = v;
            }
            if let Some(v) = f.line_search_max_iter {
                cfg.line_search_max_iter = v;
            }
            if f.target_objective.is_some() {
                cfg.target_objective = f.target_objective;
            }
            let fit = fit_free_params(vp.params(), &targets, &cfg)
                .map_err(|e| write_failure_artifacts(dir, "parameter fit", &e))?;
            Some((targets, fit))
        }
    };

    if scenario.write_csv {
        write_matrix_table(dir, "tau.csv", &vp.labels, tau)?;
        if let Some(change) = &change {
            write_matrix_table(dir, "tau_change.csv", &vp.labels, change)?;
        }
        if let Some((targets, fit)) = &fit {
            let header: Vec<String> = [
                "country",
                "technology",
                "wage_target",
                "wage_residual",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let rows: Vec<Vec<String>> = (0..vp.n)
                .map(|s| {
                    vec![
                        vp.labels[s].clone(),
                        fmt_float(fit.t[s]),
                        fmt_float(targets.wages[s]),
                        fmt_float(fit.wage_residuals[s]),
                    ]
                })
                .collect();
            write_csv_table(dir, "fit.csv", &header, &rows)?;
        }
    }

    if scenario.write_json {
        let mut map = BTreeMap::new();
        map.insert("command".to_string(), serde_json::json!("calibrate"));
        map.insert(
            "labels".to_string(),
            serde_json::json!(vp.labels.clone()),
        );
        map.insert("tau".to_string(), json_matrix(tau));
        if let Some(change) = &change {
            map.insert("tau_change".to_string(), json_matrix(change));
        }
        if let Some((_, fit)) = &fit {
            let mut f = BTreeMap::new();
            f.insert("technology".to_string(), json_float_vec(&fit.t));
            f.insert("psi".to_string(), json_float(fit.psi));
            f.insert("objective".to_string(), json_float(fit.objective));
            f.insert(
                "wage_residuals".to_string(),
                json_float_vec(&fit.wage_residuals),
            );
            f.insert(
                "growth_residual".to_string(),
                json_float(fit.growth_residual),
            );
            f.insert("solves".to_string(), serde_json::json!(fit.solves));
            map.insert(
                "fit".to_string(),
                serde_json::Value::Object(f.into_iter().collect()),
            );
        }
        write_json_file(
            dir,
            "summary.json",
            &serde_json::Value::Object(map.into_iter().collect()),
        )?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult<()> {
    let scenario = Scenario::load(&args.run)?;
    if scenario.shock.is_some() {
        return Err(config_error(
            "scenario has a `shock` section: sweep varies trade costs itself",
        ));
    }
    if !(args.step > 0.0) || !args.from.is_finite() || !args.to.is_finite() || args.to < args.from
    {
        return Err(config_error(format!(
            "invalid grid: from {} to {} step {}",
            args.from, args.to, args.step
        )));
    }
    let points = ((args.to - args.from) / args.step + 1.0 + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..points)
        .map(|k| args.from + k as f64 * args.step)
        .collect();

    let vp = &scenario.vp;
    let n = vp.n;
    let mut header = vec!["multiplier".to_string(), "status".to_string(), "growth".to_string()];
    for prefix in ["wage", "measure_share", "labor_income", "global_profit"] {
        for l in &vp.labels {
            header.push(format!("{prefix}_{l}"));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::with_capacity(grid.len());
    let mut failures = 0usize;
    // Each point warm-starts from its predecessor's converged state; if a
    // warm solve fails, the point is retried from the cold start before its
    // failure is recorded. Either way the run continues.
    let mut warm: Option<BgpState> = None;
    for &mult in &grid {
        let mut tau = vp.tau.clone();
        for (s, row) in tau.iter_mut().enumerate() {
            for (d, v) in row.iter_mut().enumerate() {
                if s != d {
                    *v *= mult;
                }
            }
        }
        let point = vp
            .with_tau(tau)
            .and_then(|vp_point| {
                let warm_result = warm
                    .take()
                    .map(|state| solve_from(&vp_point, state, &scenario.solver));
                match warm_result {
                    Some(Ok(sol)) => Ok((vp_point, sol)),
                    Some(Err(_)) | None => {
                        solve_bgp(&vp_point, &scenario.solver).map(|sol| (vp_point, sol))
                    }
                }
            });
        match point {
            Ok((vp_point, sol)) => {
                let eq = &sol.equilibrium;
                warm = Some(BgpState {
                    w: eq.w.clone(),
                    m: eq.m.clone(),
                    p: eq.p.clone(),
                });
                let decomp = growth_rate(&vp_point, eq).map_err(lib_error)?;
                let shares = eq.measure_shares();
                let mut row = vec![fmt_float(mult), "ok".to_string(), fmt_float(eq.g)];
                row.extend(eq.w.iter().map(|&v| fmt_float(v)));
                row.extend(shares.iter().map(|&v| fmt_float(v)));
                row.extend(decomp.countries.iter().map(|c| fmt_float(c.labor_income)));
                row.extend(decomp.countries.iter().map(|c| fmt_float(c.global_profit)));
                rows.push(row);
            }
            Err(err) => {
                failures += 1;
                log::warn!("sweep point {mult}: {err}");
                let mut row = vec![fmt_float(mult), err.to_string(), String::new()];
                row.extend(std::iter::repeat(String::new()).take(4 * n));
                rows.push(row);
            }
        }
    }

    let dir = &scenario.out_dir;
    ensure_out_dir(dir)?;
    if scenario.write_csv {
        write_csv_table(dir, "sweep.csv", &header, &rows)?;
    }
    if scenario.write_json {
        let mut map = BTreeMap::new();
        map.insert("command".to_string(), serde_json::json!("sweep"));
        map.insert("from".to_string(), json_float(args.from));
        map.insert("to".to_string(), json_float(args.to));
        map.insert("step".to_string(), json_float(args.step));
        map.insert("points".to_string(), serde_json::json!(grid.len()));
        map.insert("failures".to_string(), serde_json::json!(failures));
        write_json_file(
            dir,
            "summary.json",
            &serde_json::Value::Object(map.into_iter().collect()),
        )?;
    }
    Ok(())
}

/// Parse the process arguments, run the selected command, and return the
/// process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Counterfactual(args) => cmd_counterfactual(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_twelve_significant_digits() {
        assert_eq!(fmt_float(0.25), "2.50000000000e-1");
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_float(12345.6789), "1.23456789000e4");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn json_floats_round_and_null_out_nonfinite() {
        assert_eq!(json_float(0.25), serde_json::json!(0.25));
        assert_eq!(json_float(f64::NAN), serde_json::Value::Null);
        assert_eq!(json_float(f64::INFINITY), serde_json::Value::Null);
        // Rounded to 12 significant digits, then re-parsed.
        let v = json_float(1.0 / 3.0);
        assert_eq!(v, serde_json::json!(0.333333333333));
    }

    fn write_flows(dir: &Path, name: &str, rows: &[(&str, &str, f64)]) -> PathBuf {
        let path = dir.join(name);
        let mut text = String::from("source,dest,value\n");
        for (s, d, v) in rows {
            text.push_str(&format!("{s},{d},{v}\n"));
        }
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn flow_csv_reads_complete_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_flows(
            dir.path(),
            "flows.csv",
            &[
                ("A", "A", 1.0),
                ("A", "B", 0.25),
                ("B", "A", 0.3),
                ("B", "B", 1.2),
            ],
        );
        let table = read_flow_csv(&path, &[]).unwrap();
        assert_eq!(table.labels, vec!["A", "B"]);
        assert_eq!(table.value[0][1], 0.25);
        assert_eq!(table.value[1][0], 0.3);

        // Explicit labels reorder the table to the configured order.
        let table = read_flow_csv(&path, &["B".to_string(), "A".to_string()]).unwrap();
        assert_eq!(table.labels, vec!["B", "A"]);
        assert_eq!(table.value[0][1], 0.3);
    }

    #[test]
    fn flow_csv_rejects_missing_pairs_duplicates_and_bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let missing = write_flows(
            dir.path(),
            "missing.csv",
            &[("A", "A", 1.0), ("A", "B", 0.2), ("B", "B", 1.0)],
        );
        let err = read_flow_csv(&missing, &[]).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
        assert!(err.message.contains("missing pair B -> A"), "{}", err.message);

        let dup = write_flows(
            dir.path(),
            "dup.csv",
            &[
                ("A", "A", 1.0),
                ("A", "B", 0.2),
                ("A", "B", 0.3),
                ("B", "A", 0.2),
                ("B", "B", 1.0),
            ],
        );
        let err = read_flow_csv(&dup, &[]).unwrap_err();
        assert!(err.message.contains("duplicate pair A -> B"), "{}", err.message);

        let bad_header = dir.path().join("bad.csv");
        std::fs::write(&bad_header, "origin,dest,value\nA,A,1.0\n").unwrap();
        let err = read_flow_csv(&bad_header, &[]).unwrap_err();
        assert!(err.message.contains("expected header"), "{}", err.message);

        let unknown = write_flows(
            dir.path(),
            "unknown.csv",
            &[
                ("A", "A", 1.0),
                ("A", "C", 0.2),
                ("C", "A", 0.2),
                ("C", "C", 1.0),
            ],
        );
        let err = read_flow_csv(&unknown, &["A".to_string(), "B".to_string()]).unwrap_err();
        assert!(err.message.contains("unknown country \"C\""), "{}", err.message);
    }

    #[test]
    fn flow_csv_rejects_zero_diagonal_via_table_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_flows(
            dir.path(),
            "zero.csv",
            &[
                ("A", "A", 0.0),
                ("A", "B", 0.2),
                ("B", "A", 0.2),
                ("B", "B", 1.0),
            ],
        );
        let err = read_flow_csv(&path, &[]).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
        assert!(err.message.contains("diagonal"), "{}", err.message);
    }

    fn scenario_json(dir: &Path, body: &str) -> RunArgs {
        let path = dir.join("scenario.json");
        std::fs::write(&path, body).unwrap();
        RunArgs {
            config: path,
            out: Some(dir.join("out")),
            tol: None,
            max_iter: None,
            seed: None,
            format: None,
        }
    }

    const BASE_PARAMS: &str = r#""theta": 4.0, "sigma": 2.0, "alpha": 0.4, "rho": 0.03,
        "psi": 1.5, "T": [1.0, 1.0], "L": [1.0, 1.0]"#;

    #[test]
    fn scenario_requires_exactly_one_tau_source() {
        let dir = tempfile::tempdir().unwrap();
        let args = scenario_json(
            dir.path(),
            &format!(r#"{{ "params": {{ {BASE_PARAMS} }} }}"#),
        );
        let err = Scenario::load(&args).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
        assert!(err.message.contains("trade-cost source"), "{}", err.message);

        let args = scenario_json(
            dir.path(),
            &format!(
                r#"{{ "params": {{ {BASE_PARAMS},
                     "tau": [[1.0, 1.5], [1.5, 1.0]], "flows": "f.csv" }} }}"#
            ),
        );
        let err = Scenario::load(&args).unwrap_err();
        assert!(err.message.contains("not both"), "{}", err.message);
    }

    #[test]
    fn scenario_reports_missing_fields_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let args = scenario_json(
            dir.path(),
            r#"{ "params": { "sigma": 2.0, "alpha": 0.4, "rho": 0.03,
                 "psi": 1.5, "T": [1.0], "L": [1.0], "tau": [[1.0]] } }"#,
        );
        let err = Scenario::load(&args).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
        assert!(err.message.contains("theta"), "{}", err.message);
    }

    #[test]
    fn scenario_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let args = scenario_json(
            dir.path(),
            &format!(
                r#"{{ "params": {{ {BASE_PARAMS}, "tau": [[1.0, 1.5], [1.5, 1.0]] }},
                     "solvr": {{}} }}"#
            ),
        );
        let err = Scenario::load(&args).unwrap_err();
        assert!(err.message.contains("solvr"), "{}", err.message);
    }

    #[test]
    fn cli_flags_override_scenario_solver_settings() {
        let dir = tempfile::tempdir().unwrap();
        let mut args = scenario_json(
            dir.path(),
            &format!(
                r#"{{ "params": {{ {BASE_PARAMS}, "tau": [[1.0, 1.5], [1.5, 1.0]] }},
                     "solver": {{ "tol_outer": 1e-8, "max_iter_outer": 77 }} }}"#
            ),
        );
        args.tol = Some(1e-6);
        args.seed = Some(9);
        let scenario = Scenario::load(&args).unwrap();
        assert_eq!(scenario.solver.tol_outer, 1e-6);
        assert_eq!(scenario.solver.max_iter_outer, 77);
        assert_eq!(scenario.solver.seed, Some(9));
    }

    #[test]
    fn shock_multipliers_apply_off_diagonal_and_reject_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let args = scenario_json(
            dir.path(),
            &format!(
                r#"{{ "params": {{ {BASE_PARAMS}, "tau": [[1.0, 2.0], [2.0, 1.0]] }},
                     "shock": {{ "tau_multipliers": [[1.0, 0.9], [0.9, 1.0]] }} }}"#
            ),
        );
        let scenario = Scenario::load(&args).unwrap();
        let tau = scenario.shock_tau().unwrap();
        assert_eq!(tau[0][1], 1.8);
        assert_eq!(tau[0][0], 1.0);

        let args = scenario_json(
            dir.path(),
            &format!(
                r#"{{ "params": {{ {BASE_PARAMS}, "tau": [[1.0, 2.0], [2.0, 1.0]] }},
                     "shock": {{ "tau_multipliers": [[0.9, 0.9], [0.9, 0.9]] }} }}"#
            ),
        );
        let scenario = Scenario::load(&args).unwrap();
        let err = scenario.shock_tau().unwrap_err();
        assert!(err.message.contains("diagonal"), "{}", err.message);
    }

    #[test]
    fn share_table_validation_refuses_bad_columns() {
        let dir = tempfile::tempdir().unwrap();
        let labels = vec!["A".to_string(), "B".to_string()];
        let bad = vec![vec![0.7, 0.4], vec![0.2, 0.6]];
        let err = write_share_table(dir.path(), "s.csv", &labels, &bad).unwrap_err();
        assert_eq!(err.code, EXIT_SOLVE);
        assert!(!dir.path().join("s.csv").exists());
        let good = vec![vec![0.7, 0.4], vec![0.3, 0.6]];
        write_share_table(dir.path(), "s.csv", &labels, &good).unwrap();
        assert!(dir.path().join("s.csv").exists());
    }
}
