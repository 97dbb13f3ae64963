//! Command-line entry point: simulation trajectories, verification suites,
//! and seeded fixtures. Exit codes: 0 pass, 1 verification failure,
//! 2 usage/config error.

use crate::ancestry::{
    build_aig, compatible_set_bruteforce, interactive_count, quasi_stream,
    run_configuration_process, sample_root_set, Aig,
};
use crate::combinatorics::verify_replacement_identity;
use crate::cylinder::{Cell, Cylinder};
use crate::duality::{
    check_factorial_duality, check_moment_duality_mc, check_path_average_identity,
    generator_convergence_report, mc_factorial_duality, simulate_sde_path, simulate_z_limit_path,
    DualState, DualityPoint, SdeParams,
};
use crate::frankenstein::{
    frankenstein_match, induced_rate_check, r_counting_rates_exact, run_frankenstein_on_path,
    RJump, W,
};
use crate::model::{sample_event_stream, simulate_counts, EventRecord, EventStream, ModelParams};
use crate::to_f64;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Run configuration; a single JSON document with `--set key=value` overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_pop: u64,
    pub r: f64,
    pub kappa: f64,
    pub s: Vec<f64>,
    pub u: f64,
    pub nu0: f64,
    pub nu1: f64,
    pub horizon: f64,
    pub seed: u64,
    pub replicates: u64,
    pub dt: f64,
    pub x0: f64,
    pub i0: u64,
    pub n0: u64,
    pub sample_size: u64,
    pub t_grid: Vec<f64>,
    pub tolerance: f64,
    pub sigma: Vec<f64>,
    pub theta: f64,
    pub fixture_count: u64,
    pub n_list: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_pop: 5,
            r: 1.0,
            kappa: 0.5,
            s: vec![0.3, 0.1],
            u: 0.2,
            nu0: 0.5,
            nu1: 0.5,
            horizon: 1.0,
            seed: 42,
            replicates: 10_000,
            dt: 1e-3,
            x0: 0.3,
            i0: 2,
            n0: 2,
            sample_size: 2,
            t_grid: vec![0.1, 0.5, 1.0, 2.0],
            tolerance: 1e-10,
            sigma: vec![],
            theta: 0.0,
            fixture_count: 200,
            n_list: vec![50, 100, 200, 400],
        }
    }
}

impl RunConfig {
    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            n_pop: self.n_pop,
            r: self.r,
            kappa: self.kappa,
            s: self.s.clone(),
            u: self.u,
            nu0: self.nu0,
            nu1: self.nu1,
        }
    }

    pub fn sde_params(&self) -> SdeParams {
        SdeParams {
            sigma: self.sigma.clone(),
            theta: self.theta,
            nu0: self.nu0,
            nu1: self.nu1,
            r: self.r,
            kappa: self.kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params()
            .validate()
            .map_err(|e| anyhow!("{e}"))?;
        if !(self.horizon > 0.0 && self.dt > 0.0 && (0.0..=1.0).contains(&self.x0)) {
            bail!("invalid config: horizon/dt must be positive and x0 in [0,1]");
        }
        if self.i0 > self.n_pop || self.sample_size > self.n_pop {
            bail!("invalid config: i0 and sample_size must not exceed n_pop");
        }
        Ok(())
    }
}

/// Loads the config file (or the defaults) and applies `--set key=value`
/// overrides; unknown keys are rejected.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let mut value: Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => serde_json::to_value(RunConfig::default())?,
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| anyhow!("config must be a JSON object"))?;
    let known: BTreeSet<String> = serde_json::to_value(RunConfig::default())?
        .as_object()
        .unwrap()
        .keys()
        .cloned()
        .collect();
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got {s:?}"))?;
        if !known.contains(key) {
            bail!("unknown config key {key:?}");
        }
        let parsed: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        obj.insert(key.to_string(), parsed);
    }
    let config: RunConfig = serde_json::from_value(value).context("config validation")?;
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "momo", about = "Two-type interactive Moran model toolkit", version)]
pub struct Cli {
    /// JSON configuration file; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. --set n_pop=8 (repeatable).
    #[arg(long = "set", global = true)]
    pub sets: Vec<String>,
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory for report/trajectory files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write CSV trajectories of the four processes.
    Simulate,
    /// Run a named verification suite.
    Verify {
        #[arg(value_parser = SUITES)]
        suite: String,
    },
    /// Record or replay a seeded fixture.
    Fixture {
        #[arg(value_parser = ["record", "replay"])]
        action: String,
        /// Fixture file path.
        path: PathBuf,
    },
}

pub const SUITES: [&str; 9] = [
    "duality-exact",
    "duality-mc",
    "frankenstein-tables",
    "compat-oracle",
    "rates",
    "identity",
    "path-average",
    "sde-duality",
    "generator-convergence",
];

/// Runs the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap uses 0 for --help/--version and 2 for usage errors.
            e.exit();
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignore failure when a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut config = match load_config(cli.config.as_deref(), &cli.sets) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return 2;
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let outcome = match &cli.command {
        Command::Simulate => cmd_simulate(&config, cli.out.as_deref()),
        Command::Verify { suite } => {
            cmd_verify(&config, suite, cli.out.as_deref(), cli.format)
        }
        Command::Fixture { action, path } => cmd_fixture(&config, action, path),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?)
}

fn cmd_simulate(config: &RunConfig, out: Option<&Path>) -> Result<bool> {
    let dir = out.unwrap_or_else(|| Path::new("out"));
    std::fs::create_dir_all(dir)?;
    let params = config.model_params();
    let sde = config.sde_params();
    // Forward counting chain X.
    let mut w = csv_writer(&dir.join("x_path.csv"))?;
    w.write_record(["schema_version", "t", "state"])?;
    for (t, n) in simulate_counts(&params, config.i0, config.horizon, config.seed) {
        w.write_record([SCHEMA_VERSION.to_string(), format!("{t:.12}"), n.to_string()])?;
    }
    w.flush()?;
    // Finite dual chain Z.
    let mut w = csv_writer(&dir.join("z_path.csv"))?;
    w.write_record(["schema_version", "t", "state"])?;
    for (t, state) in simulate_z_finite(&params, config.n0, config.horizon, config.seed ^ 0x1) {
        w.write_record([SCHEMA_VERSION.to_string(), format!("{t:.12}"), state])?;
    }
    w.flush()?;
    // Limiting SDE.
    let mut w = csv_writer(&dir.join("sde_path.csv"))?;
    w.write_record(["schema_version", "t", "x"])?;
    for (t, x) in simulate_sde_path(&sde, config.x0, config.horizon, config.dt, config.seed ^ 0x2) {
        w.write_record([SCHEMA_VERSION.to_string(), format!("{t:.12}"), format!("{x:.12}")])?;
    }
    w.flush()?;
    // Dual limit chain.
    let mut w = csv_writer(&dir.join("z_limit_path.csv"))?;
    w.write_record(["schema_version", "t", "state"])?;
    for (t, state) in simulate_z_limit_path(&sde, config.n0, config.horizon, config.seed ^ 0x3) {
        let s = match state {
            DualState::Delta => "Delta".to_string(),
            DualState::Count(n) => n.to_string(),
        };
        w.write_record([SCHEMA_VERSION.to_string(), format!("{t:.12}"), s])?;
    }
    w.flush()?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "command": "simulate",
            "out_dir": dir.display().to_string(),
            "files": ["x_path.csv", "z_path.csv", "sde_path.csv", "z_limit_path.csv"],
        }))?
    );
    Ok(true)
}

/// Jump skeleton of the finite dual chain on `{0..N} ∪ {Δ}`.
fn simulate_z_finite(
    params: &ModelParams,
    n0: u64,
    horizon: f64,
    seed: u64,
) -> Vec<(f64, String)> {
    use rand::Rng;
    assert!(n0 <= params.n_pop);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut n = n0;
    let mut t = 0.0f64;
    let mut path = vec![(0.0, n0.to_string())];
    loop {
        let rates: Vec<(RJump, f64)> = r_counting_rates_exact(params, n)
            .into_iter()
            .map(|(j, r)| (j, to_f64(&r)))
            .collect();
        let total: f64 = rates.iter().map(|(_, r)| r).sum();
        if total <= 0.0 {
            break;
        }
        t += -rng.gen::<f64>().ln() / total;
        if t > horizon {
            break;
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut jump = rates[rates.len() - 1].0;
        for (j, r) in &rates {
            if pick < *r {
                jump = *j;
                break;
            }
            pick -= r;
        }
        match jump {
            RJump::Kill => {
                path.push((t, "Delta".to_string()));
                return path;
            }
            RJump::Shift(j) => {
                n = (n as i64 + j) as u64;
                path.push((t, n.to_string()));
            }
        }
    }
    path.push((horizon, n.to_string()));
    path
}

struct SuiteResult {
    pass: bool,
    summary: Value,
    points: Vec<DualityPoint>,
}

fn cmd_verify(
    config: &RunConfig,
    suite: &str,
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<bool> {
    let result = match suite {
        "duality-exact" => suite_duality_exact(config),
        "duality-mc" => suite_duality_mc(config),
        "frankenstein-tables" => suite_frankenstein_tables(),
        "compat-oracle" => suite_compat_oracle(config),
        "rates" => suite_rates(config),
        "identity" => suite_identity(),
        "path-average" => suite_path_average(config),
        "sde-duality" => suite_sde_duality(config),
        "generator-convergence" => suite_generator_convergence(config),
        other => bail!("unknown suite {other:?}"),
    }?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "suite": suite,
        "pass": result.pass,
        "summary": result.summary,
    });
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(std::io::stdout());
            if result.points.is_empty() {
                w.write_record(["schema_version", "suite", "pass"])?;
                w.write_record([
                    SCHEMA_VERSION.to_string(),
                    suite.to_string(),
                    result.pass.to_string(),
                ])?;
            } else {
                write_points_csv(&mut w, &result.points)?;
            }
            w.flush()?;
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(format!("report-{suite}.json")),
            serde_json::to_string_pretty(&report)?,
        )?;
        if !result.points.is_empty() {
            let mut w = csv_writer(&dir.join(format!("report-{suite}.csv")))?;
            write_points_csv(&mut w, &result.points)?;
            w.flush()?;
        }
    }
    Ok(result.pass)
}

fn write_points_csv<Wr: std::io::Write>(
    w: &mut csv::Writer<Wr>,
    points: &[DualityPoint],
) -> Result<()> {
    w.write_record([
        "schema_version",
        "t",
        "i",
        "n",
        "lhs",
        "rhs",
        "residual",
        "se_lhs",
        "se_rhs",
        "method",
    ])?;
    for p in points {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            format!("{:.12}", p.t),
            p.i.to_string(),
            p.n.clone(),
            format!("{:.15e}", p.lhs),
            format!("{:.15e}", p.rhs),
            format!("{:.15e}", p.residual),
            p.se_lhs.map(|x| format!("{x:.15e}")).unwrap_or_default(),
            p.se_rhs.map(|x| format!("{x:.15e}")).unwrap_or_default(),
            "".to_string(),
        ])?;
    }
    Ok(())
}

fn suite_duality_exact(config: &RunConfig) -> Result<SuiteResult> {
    let params = config.model_params();
    let report = check_factorial_duality(&params, &config.t_grid, config.tolerance);
    Ok(SuiteResult {
        pass: report.pass,
        summary: json!({
            "n_pop": report.n_pop,
            "max_residual": report.max_residual,
            "tolerance": config.tolerance,
            "grid_points": report.points.len(),
        }),
        points: report.points,
    })
}

fn suite_duality_mc(config: &RunConfig) -> Result<SuiteResult> {
    let params = config.model_params();
    let report = mc_factorial_duality(
        &params,
        config.horizon,
        config.i0,
        config.sample_size,
        config.replicates,
        config.seed,
    );
    Ok(SuiteResult {
        pass: report.pass,
        summary: json!({
            "n_pop": report.n_pop,
            "replicates": config.replicates,
            "max_residual": report.max_residual,
        }),
        points: report.points,
    })
}

/// Exhaustive Frankenstein matching over all R-cylinders with at most three
/// affected coordinates: both targets must be R-cylinders and the R-count
/// deltas must follow the two-case law (±1 split only when `C_α = R` with
/// exactly one free affected coordinate; `{0,−1}` in the self-parent `(R,*)`
/// case; 0 otherwise).
fn suite_frankenstein_tables() -> Result<SuiteResult> {
    let cells = [Cell::R, Cell::Star];
    let mut checked = 0u64;
    let mut pass = true;
    let mut failures: Vec<String> = Vec::new();
    // β < γ (three distinct coordinates).
    for &ca in &cells {
        for &cb in &cells {
            for &cg in &cells {
                let c = Cylinder::from_cells([(1, ca), (2, cb), (3, cg)]);
                let mo = frankenstein_match(&c, 1, 2, 3);
                let n0 = c.n_r() as i64;
                let d_down = delta(&mo.down, n0);
                let d_up = delta(&mo.up, n0);
                let expect: BTreeSet<i64> =
                    if ca == Cell::R && (cb == Cell::R) != (cg == Cell::R) {
                        [1, -1].into()
                    } else {
                        [0].into()
                    };
                let got: BTreeSet<i64> = [d_down, d_up].into();
                if got != expect || !mo.down.is_r_cylinder() || !mo.up.is_r_cylinder() {
                    pass = false;
                    failures.push(format!("C_D=({ca:?},{cb:?},{cg:?})"));
                }
                checked += 1;
            }
        }
    }
    // β = γ (self-interaction pair).
    for &ca in &cells {
        for &cb in &cells {
            let c = Cylinder::from_cells([(1, ca), (2, cb)]);
            let mo = frankenstein_match(&c, 1, 2, 2);
            let n0 = c.n_r() as i64;
            let got: BTreeSet<i64> = [delta(&mo.down, n0), delta(&mo.up, n0)].into();
            let expect: BTreeSet<i64> = if ca == Cell::R && cb == Cell::R {
                [0, -1].into()
            } else {
                [0].into()
            };
            if got != expect || !mo.down.is_r_cylinder() || !mo.up.is_r_cylinder() {
                pass = false;
                failures.push(format!("C_D=({ca:?},{cb:?}) β=γ"));
            }
            checked += 1;
        }
    }
    Ok(SuiteResult {
        pass,
        summary: json!({ "checked": checked, "failures": failures }),
        points: vec![],
    })
}

fn delta(c: &Cylinder, n0: i64) -> i64 {
    assert!(!c.is_empty(), "matching targets are nonempty R-cylinders");
    c.n_r() as i64 - n0
}

/// Seeded fixture generator shared by the compatibility and path-average
/// suites: small populations, short windows, bounded event counts.
pub fn seeded_aigs(
    config: &RunConfig,
    count: u64,
    max_events: usize,
    max_leaves: usize,
    max_interactive: Option<usize>,
    quasi: bool,
) -> Vec<(Aig, u64)> {
    let mut out = Vec::new();
    let mut seed = config.seed;
    while out.len() < count as usize {
        seed = seed.wrapping_add(1);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n_pop = 2 + seed % 5; // 2..=6
        let params = ModelParams {
            n_pop,
            s: config
                .s
                .iter()
                .copied()
                .take(n_pop as usize)
                .collect(),
            ..config.model_params()
        };
        let stream = sample_event_stream(&params, 0.8, seed);
        let stream = if quasi { quasi_stream(&stream) } else { stream };
        let k = 1 + seed % n_pop;
        let root = sample_root_set(n_pop, k, &mut rng);
        let aig = build_aig(&stream, 0.8, &root, 0.8);
        if aig.captured.len() > max_events || aig.leaf_set().len() > max_leaves {
            continue;
        }
        if let Some(mi) = max_interactive {
            if interactive_count(&aig) > mi {
                continue;
            }
        }
        out.push((aig, n_pop));
    }
    out
}

fn suite_compat_oracle(config: &RunConfig) -> Result<SuiteResult> {
    let fixtures = seeded_aigs(config, config.fixture_count, 8, 10, None, false);
    let mut mismatches = 0u64;
    for (aig, _) in &fixtures {
        let s = Cylinder::all_r(aig.root_set.iter().copied());
        let cylinders = run_configuration_process(&s, aig);
        let brute = compatible_set_bruteforce(aig, &s);
        let brute: BTreeSet<_> = brute.into_iter().collect();
        let leaves: Vec<u32> = aig.leaf_set().iter().copied().collect();
        for mask in 0u32..(1 << leaves.len()) {
            let cfg: std::collections::BTreeMap<u32, crate::model::IndType> = leaves
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    let t = if mask >> i & 1 == 1 {
                        crate::model::IndType::Fit
                    } else {
                        crate::model::IndType::Unfit
                    };
                    (l, t)
                })
                .collect();
            let in_union = cylinders
                .iter()
                .any(|c| !c.is_empty() && c.contains_map(&cfg));
            if in_union != brute.contains(&cfg) {
                mismatches += 1;
            }
        }
    }
    Ok(SuiteResult {
        pass: mismatches == 0,
        summary: json!({ "fixtures": fixtures.len(), "mismatches": mismatches }),
        points: vec![],
    })
}

fn suite_rates(config: &RunConfig) -> Result<SuiteResult> {
    let mut pass = true;
    let mut rows = Vec::new();
    for n_pop in 1..=5u64 {
        let params = ModelParams {
            n_pop,
            s: config.s.iter().copied().take(n_pop as usize).collect(),
            ..config.model_params()
        };
        for n in 1..=n_pop {
            let report = induced_rate_check(&params, n);
            pass &= report.pass;
            rows.push(json!({ "n_pop": n_pop, "n": n, "pass": report.pass }));
        }
    }
    Ok(SuiteResult {
        pass,
        summary: json!({ "cases": rows }),
        points: vec![],
    })
}

fn suite_identity() -> Result<SuiteResult> {
    let mut pass = true;
    let mut checked = 0u64;
    for n_pop in 1..=8u64 {
        for n in 0..n_pop {
            for m_trunc in 1..=4usize {
                let s: Vec<f64> = (1..=m_trunc).map(|m| 0.1 * m as f64).collect();
                let sel = crate::combinatorics::SelectionRates::from_f64(&s);
                for k in 1..=(n_pop - n) {
                    let (ok, _residual) = verify_replacement_identity(n_pop, n, k, &sel);
                    pass &= ok;
                    checked += 1;
                }
            }
        }
    }
    Ok(SuiteResult {
        pass,
        summary: json!({ "checked": checked }),
        points: vec![],
    })
}

/// The two-interactive-event fixture bundled with the crate: roots `{1,2}`,
/// quasi events `(1,2,4)` then `(1,2,3)` backward in time over `N = 4`.
pub fn bundled_fixture_aig() -> Aig {
    let stream = EventStream {
        horizon: 1.0,
        events: vec![
            (
                0.6,
                crate::model::GraphicalEvent::InteractiveQuasi {
                    alpha: 1,
                    beta: 2,
                    gamma: 3,
                },
            ),
            (
                0.8,
                crate::model::GraphicalEvent::InteractiveQuasi {
                    alpha: 1,
                    beta: 2,
                    gamma: 4,
                },
            ),
        ],
    };
    build_aig(&stream, 1.0, &BTreeSet::from([1, 2]), 1.0)
}

fn suite_path_average(config: &RunConfig) -> Result<SuiteResult> {
    let mut fixtures: Vec<(Aig, u64)> = vec![(bundled_fixture_aig(), 4)];
    fixtures.extend(seeded_aigs(config, 20, 8, 10, Some(3), true));
    let mut pass = true;
    let mut rows = Vec::new();
    for (idx, (aig, n_pop)) in fixtures.iter().enumerate() {
        for i in 0..=*n_pop {
            let report = check_path_average_identity(aig, i, *n_pop);
            // Messy/Frankenstein equality and assembly hold on every
            // realization; the configuration average joins exactly whenever no
            // non-trivial matching permutation precedes further events (it
            // always joins in expectation over realizations).
            let ok = report.messy_equals_frankenstein
                && report.assembly_ok
                && (report.config_equals_messy || report.permutation_used);
            pass &= ok;
            rows.push(json!({
                "fixture": idx,
                "i": i,
                "equal": report.equal,
                "config_equals_messy": report.config_equals_messy,
                "permutation_used": report.permutation_used,
                "assembly_ok": report.assembly_ok,
                "average": report.frankenstein_average,
            }));
        }
    }
    Ok(SuiteResult {
        pass,
        summary: json!({ "fixtures": fixtures.len(), "cases": rows.len(), "rows": rows }),
        points: vec![],
    })
}

fn suite_sde_duality(config: &RunConfig) -> Result<SuiteResult> {
    let sp = config.sde_params();
    let mut pass = true;
    let mut points = Vec::new();
    let grid: Vec<(f64, u64)> = vec![(config.x0, 1), (config.x0, config.n0)];
    for (k, (x0, n0)) in grid.into_iter().enumerate() {
        let report = check_moment_duality_mc(
            &sp,
            x0,
            n0,
            config.horizon,
            config.dt,
            config.replicates,
            config.seed.wrapping_add(k as u64),
        );
        pass &= report.pass;
        points.extend(report.points);
    }
    Ok(SuiteResult {
        pass,
        summary: json!({ "replicates": config.replicates, "dt": config.dt }),
        points,
    })
}

fn suite_generator_convergence(config: &RunConfig) -> Result<SuiteResult> {
    let report = generator_convergence_report(&config.sde_params(), &config.n_list);
    let pass = report.pass;
    Ok(SuiteResult {
        pass,
        summary: serde_json::to_value(&report)?,
        points: vec![],
    })
}

/// On-disk fixture: a quasi event stream plus root sample and, when recorded,
/// the derived Frankenstein endpoints and path averages for later comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub schema_version: u32,
    pub n_pop: u64,
    pub horizon: f64,
    pub root_set: Vec<u32>,
    pub events: Vec<EventRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<FixtureDerived>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FixtureDerived {
    pub leaf_set: Vec<u32>,
    /// Frankenstein endpoint per `w`-path, keyed by a string of `D`/`U`.
    pub frankenstein: Vec<(String, String)>,
    /// Exact Frankenstein path-average probability per initial unfit count `i`
    /// (equals the messy average on every realization).
    pub path_average: Vec<String>,
}

fn fixture_aig(fx: &FixtureFile) -> Result<Aig> {
    let mut events = Vec::new();
    for rec in &fx.events {
        events.push(rec.to_event().map_err(|e| anyhow!("{e}"))?);
    }
    let stream = EventStream {
        horizon: fx.horizon,
        events,
    };
    let root: BTreeSet<u32> = fx.root_set.iter().copied().collect();
    Ok(build_aig(&quasi_stream(&stream), fx.horizon, &root, fx.horizon))
}

fn derive_fixture(fx: &FixtureFile) -> Result<FixtureDerived> {
    let aig = fixture_aig(fx)?;
    let m = interactive_count(&aig);
    if m > 6 {
        bail!("fixture has too many interactive events to enumerate ({m})");
    }
    let s = Cylinder::all_r(aig.root_set.iter().copied());
    let mut frankenstein = Vec::new();
    for mask in 0u32..(1 << m) {
        let w: Vec<W> = (0..m)
            .map(|k| if mask >> k & 1 == 1 { W::Up } else { W::Down })
            .collect();
        let key: String = w
            .iter()
            .map(|x| if *x == W::Down { 'D' } else { 'U' })
            .collect();
        let phi = run_frankenstein_on_path(&s, &w, &aig);
        frankenstein.push((key, phi.to_text()));
    }
    let mut path_average = Vec::new();
    for i in 0..=fx.n_pop {
        let report = check_path_average_identity(&aig, i, fx.n_pop);
        let ok = report.messy_equals_frankenstein
            && report.assembly_ok
            && (report.config_equals_messy || report.permutation_used);
        if !ok {
            bail!("path-average identity failed during derivation");
        }
        path_average.push(report.frankenstein_average);
    }
    Ok(FixtureDerived {
        leaf_set: aig.leaf_set().iter().copied().collect(),
        frankenstein,
        path_average,
    })
}

fn cmd_fixture(config: &RunConfig, action: &str, path: &Path) -> Result<bool> {
    match action {
        "record" => {
            let mut seed = config.seed;
            let (n_pop, stream, root) = loop {
                seed = seed.wrapping_add(1);
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let np = 2 + seed % 5;
                let params = ModelParams {
                    n_pop: np,
                    s: config.s.iter().copied().take(np as usize).collect(),
                    ..config.model_params()
                };
                let stream = sample_event_stream(&params, 0.8, seed);
                let k = 1 + seed % np;
                let root = sample_root_set(np, k, &mut rng);
                let aig = build_aig(&stream, 0.8, &root, 0.8);
                if aig.captured.len() <= 8
                    && aig.leaf_set().len() <= 10
                    && interactive_count(&aig) <= 3
                {
                    break (np, quasi_stream(&stream), root);
                }
            };
            let mut fx = FixtureFile {
                schema_version: SCHEMA_VERSION,
                n_pop,
                horizon: stream.horizon,
                root_set: root.iter().copied().collect(),
                events: stream
                    .events
                    .iter()
                    .map(|(t, e)| EventRecord::from_event(*t, e))
                    .collect(),
                derived: None,
            };
            fx.derived = Some(derive_fixture(&fx)?);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, serde_json::to_string_pretty(&fx)?)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "command": "fixture",
                    "action": "record",
                    "path": path.display().to_string(),
                }))?
            );
            Ok(true)
        }
        "replay" => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading fixture {}", path.display()))?;
            let fx: FixtureFile =
                serde_json::from_str(&text).context("parsing fixture")?;
            if fx.schema_version != SCHEMA_VERSION {
                bail!("unsupported fixture schema_version {}", fx.schema_version);
            }
            let derived = derive_fixture(&fx)?;
            let matches = fx.derived.as_ref().map(|d| *d == derived);
            let pass = matches.unwrap_or(true);
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "command": "fixture",
                    "action": "replay",
                    "path": path.display().to_string(),
                    "recorded_comparison": matches,
                    "pass": pass,
                    "derived": serde_json::to_value(&derived)?,
                }))?
            );
            Ok(pass)
        }
        other => bail!("unknown fixture action {other:?}"),
    }
}
