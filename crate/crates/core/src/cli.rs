//! `fisherspec` command-line front end.
//!
//! Detunings are read and written in units of γ_s and Fisher information in
//! units of γ_s⁻²; everything inside the library stays SI.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::error::Error;
use crate::fisher::{copies_fisher, fisher_curve, DetuningGrid, FisherCurve};
use crate::interferometer::oracle::{distribution_oracle, ORACLE_N_MAX};
use crate::interferometer::{detection_distribution, ProbeState};
use crate::medium::{FrequencyModel, Medium};
use crate::pso::{best_run, optimize_seeds, PsoConfig, PsoResult};
use crate::states::{all_in_ensemble_arm, noon_state};

pub const THREADS_ENV: &str = "FISHERSPEC_THREADS";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_DENSITY: f64 = 2.5e16;
const ORACLE_DRIFT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numeric invariant violated: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 2,
            _ => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "fisherspec",
    version,
    about = "Fisher information of multi-photon probes for interferometric atomic spectroscopy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Built-in medium preset.
    #[arg(long, global = true, default_value = "sodium-d1")]
    pub preset: String,

    /// Key-value (TOML) file with mu_Cm, gamma_s_per_s, omega0_rad_per_s,
    /// density_per_m3, length_m. Overrides --preset.
    #[arg(long, global = true)]
    pub medium_file: Option<PathBuf>,

    /// Atom number density (1/m³).
    #[arg(long, global = true)]
    pub density: Option<f64>,

    /// Comma-separated densities (1/m³); one output set per density.
    #[arg(long, global = true, value_delimiter = ',')]
    pub density_list: Option<Vec<f64>>,

    /// Total photon number(s), comma-separated.
    #[arg(long = "n", global = true, value_delimiter = ',', default_value = "2")]
    pub n: Vec<usize>,

    /// Detuning grid `min:max:points` in units of γ_s.
    #[arg(
        long,
        global = true,
        default_value = "-100:100:2001",
        allow_hyphen_values = true
    )]
    pub grid: String,

    /// Probe states: single-photons, noon, noon-copies, optimal, all-in-arm,
    /// custom:<file>.
    #[arg(long, global = true, value_delimiter = ',')]
    pub states: Option<Vec<String>>,

    /// PSO seeds: `a..b` (inclusive) or a comma list.
    #[arg(long, global = true, default_value = "0..4")]
    pub seeds: String,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Optimize complex coefficients instead of real ones.
    #[arg(long, global = true)]
    pub complex_coeffs: bool,

    /// Draw the PSO random factors per coordinate.
    #[arg(long, global = true)]
    pub per_dimension_rng: bool,

    #[arg(long, global = true, default_value_t = crate::pso::DEFAULT_PARTICLES)]
    pub particles: usize,

    #[arg(long, global = true, default_value_t = crate::pso::DEFAULT_ITERATIONS)]
    pub iterations: usize,

    /// Photon frequency entering T and φ.
    #[arg(long, global = true, value_enum, default_value_t = FrequencyArg::Detuned)]
    pub frequency_model: FrequencyArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// χ′ and χ″ against detuning.
    Susceptibility,
    /// Transmissivity and phase against detuning.
    Arm,
    /// Fisher information curves for the requested states.
    Fisher,
    /// Particle-swarm search for the best N-photon state.
    Optimize,
    /// Fisher curves of the reference states and the optimized state side by side.
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrequencyArg {
    Detuned,
    Carrier,
}

impl From<FrequencyArg> for FrequencyModel {
    fn from(f: FrequencyArg) -> Self {
        match f {
            FrequencyArg::Detuned => FrequencyModel::Detuned,
            FrequencyArg::Carrier => FrequencyModel::Carrier,
        }
    }
}

/// Detuning grid in units of γ_s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Usage(format!("grid must be `min:max:points`, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(min.is_finite() && max.is_finite()) || points < 2 || max <= min {
            return Err(CliError::Usage(format!(
                "grid needs finite min < max and at least 2 points, got `{s}`"
            )));
        }
        Ok(GridSpec { min, max, points })
    }

    pub fn grid(&self, medium: &Medium) -> CliResult<DetuningGrid> {
        Ok(DetuningGrid::in_linewidths(
            medium,
            self.min,
            self.max,
            self.points,
        )?)
    }
}

pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("seeds must be `a..b` or a comma list, got `{s}`"));
    let s = s.trim();
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<CliResult<Vec<_>>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// One requested probe state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateChoice {
    /// N copies of |1,0⟩.
    SinglePhotons,
    Noon,
    /// N copies of the one-photon NOON state.
    NoonCopies,
    Optimal,
    /// |N,0⟩ as a single N-photon state.
    AllInArm,
    Custom(PathBuf),
}

impl StateChoice {
    pub fn parse(s: &str) -> CliResult<Self> {
        Ok(match s.trim() {
            "single-photons" => StateChoice::SinglePhotons,
            "noon" => StateChoice::Noon,
            "noon-copies" => StateChoice::NoonCopies,
            "optimal" => StateChoice::Optimal,
            "all-in-arm" => StateChoice::AllInArm,
            other => match other.strip_prefix("custom:") {
                Some(path) if !path.is_empty() => StateChoice::Custom(PathBuf::from(path)),
                _ => return Err(CliError::Usage(format!("unknown state `{other}`"))),
            },
        })
    }

    pub fn label(&self) -> String {
        match self {
            StateChoice::SinglePhotons => "single-photons".into(),
            StateChoice::Noon => "noon".into(),
            StateChoice::NoonCopies => "noon-copies".into(),
            StateChoice::Optimal => "optimal".into(),
            StateChoice::AllInArm => "all-in-arm".into(),
            StateChoice::Custom(p) => format!(
                "custom-{}",
                p.file_stem().and_then(|s| s.to_str()).unwrap_or("state")
            ),
        }
    }
}

/// Reads coefficients from a `k,psi_k[,psi_k_im]` CSV (with `#` comments
/// and a header) or from JSON (a list of `[re, im]` pairs, or an object
/// with a `best_state` field).
pub fn load_custom_state(path: &Path) -> CliResult<ProbeState> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |why: String| CliError::Usage(format!("{}: {why}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let coeffs = value.get("best_state").cloned().unwrap_or(value);
        return serde_json::from_value(coeffs).map_err(|e| bad(e.to_string()));
    }
    let mut rows: Vec<(usize, Complex64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('k') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(bad(format!("malformed row `{line}`")));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad index in `{line}`")))?;
        let re: f64 = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad value in `{line}`")))?;
        let im: f64 = match fields.get(2) {
            Some(v) => v
                .parse()
                .map_err(|_| bad(format!("bad value in `{line}`")))?,
            None => 0.0,
        };
        rows.push((k, Complex64::new(re, im)));
    }
    if rows.iter().enumerate().any(|(i, (k, _))| *k != i) || rows.is_empty() {
        return Err(bad("rows must list k = 0, 1, ..., N in order".into()));
    }
    Ok(ProbeState::new(rows.into_iter().map(|(_, c)| c).collect())?)
}

fn load_medium(cli: &Cli) -> CliResult<Medium> {
    let medium = match &cli.medium_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let m: Medium = toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            m.validate()?;
            match cli.density {
                Some(d) => m.with_density(d)?,
                None => m,
            }
        }
        None => Medium::preset(&cli.preset, cli.density.unwrap_or(DEFAULT_DENSITY))?,
    };
    Ok(medium.with_frequency_model(cli.frequency_model.into()))
}

fn densities(cli: &Cli, base: &Medium) -> Vec<f64> {
    match &cli.density_list {
        Some(list) if !list.is_empty() => list.clone(),
        _ => vec![base.density],
    }
}

fn density_tag(d: f64) -> String {
    format!("{d:e}")
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Column data written as CSV or JSON.
struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&format!("# fisherspec {VERSION}\n"));
                for (k, v) in &self.meta {
                    out.push_str(&format!("# {k}: {v}\n"));
                }
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let mut meta = serde_json::Map::new();
                meta.insert("version".into(), json!(VERSION));
                for (k, v) in &self.meta {
                    meta.insert(k.clone(), json!(v));
                }
                let mut obj = serde_json::Map::new();
                obj.insert("meta".into(), serde_json::Value::Object(meta));
                for (i, c) in self.columns.iter().enumerate() {
                    let col: Vec<f64> = self.rows.iter().map(|r| r[i]).collect();
                    obj.insert((*c).into(), json!(col));
                }
                let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
                    .expect("table serializes");
                s.push('\n');
                s
            }
        }
    }

    fn write(&self, dir: &Path, stem: &str, format: Format) -> CliResult<PathBuf> {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = dir.join(format!("{stem}.{ext}"));
        write_atomic(&path, self.render(format).as_bytes())?;
        Ok(path)
    }
}

fn medium_meta(cli: &Cli, m: &Medium) -> Vec<(String, String)> {
    let source = match &cli.medium_file {
        Some(p) => p.display().to_string(),
        None => cli.preset.clone(),
    };
    vec![
        ("medium".into(), source),
        ("density_per_m3".into(), density_tag(m.density)),
        ("gamma_s_per_s".into(), format!("{:e}", m.gamma_s)),
        (
            "frequency_model".into(),
            format!("{:?}", m.frequency_model).to_lowercase(),
        ),
    ]
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn coeff_pairs(state: &ProbeState) -> Vec<[f64; 2]> {
    state.coeffs().iter().map(|c| [c.re, c.im]).collect()
}

/// Spot check of the closed-form distribution against the brute-force
/// oracle at one detuning.
fn verify_against_oracle(state: &ProbeState, medium: &Medium, delta: f64) -> CliResult<()> {
    if state.n_total() > ORACLE_N_MAX {
        return Ok(());
    }
    let arm = match medium.arm_response(delta) {
        Ok(a) => a,
        Err(Error::Opaque { .. }) => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    let closed = detection_distribution(state, &arm)?;
    let oracle = distribution_oracle(state, &arm)?;
    let drift = closed
        .probs()
        .iter()
        .zip(oracle.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > ORACLE_DRIFT_TOL {
        return Err(CliError::Numeric(format!(
            "closed form and oracle differ by {drift:e} at detuning {delta:e} rad/s"
        )));
    }
    Ok(())
}

fn pso_config(cli: &Cli, n: usize, medium: &Medium, grid: &DetuningGrid) -> PsoConfig {
    let mut c = PsoConfig::new(n, medium, 0);
    c.objective_grid = grid.clone();
    c.n_particles = cli.particles;
    c.n_iterations = cli.iterations;
    c.complex_coeffs = cli.complex_coeffs;
    c.per_dimension_rng = cli.per_dimension_rng;
    c
}

fn check_pso_results(results: &[PsoResult]) -> CliResult<()> {
    for r in results {
        if r.objective_trace.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Numeric("objective trace decreased".into()));
        }
        let norm: f64 = r.best_state.coeffs().iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(CliError::Numeric(format!(
                "optimized state has squared norm {norm}"
            )));
        }
    }
    Ok(())
}

/// Fisher curve in physical units for one requested state, plus the state
/// that produced it.
struct StateCurve {
    label: String,
    curve: FisherCurve,
    state: ProbeState,
    copies: usize,
    pso: Option<(Vec<u64>, Vec<PsoResult>)>,
}

fn state_curve(
    cli: &Cli,
    choice: &StateChoice,
    n: usize,
    medium: &Medium,
    grid: &DetuningGrid,
    seeds: &[u64],
) -> CliResult<StateCurve> {
    let need_photons = || -> CliResult<()> {
        if n == 0 {
            return Err(CliError::Usage(format!(
                "state `{}` needs --n >= 1",
                choice.label()
            )));
        }
        Ok(())
    };
    let (state, copies, pso) = match choice {
        StateChoice::SinglePhotons => {
            need_photons()?;
            (all_in_ensemble_arm(1)?, n, None)
        }
        StateChoice::NoonCopies => {
            need_photons()?;
            (noon_state(1)?, n, None)
        }
        StateChoice::Noon => {
            need_photons()?;
            (noon_state(n)?, 1, None)
        }
        StateChoice::AllInArm => {
            need_photons()?;
            (all_in_ensemble_arm(n)?, 1, None)
        }
        StateChoice::Custom(path) => (load_custom_state(path)?, 1, None),
        StateChoice::Optimal => {
            let results = optimize_seeds(medium, &pso_config(cli, n, medium, grid), seeds)?;
            check_pso_results(&results)?;
            let best = best_run(&results).expect("at least one seed");
            (
                results[best].best_state.clone(),
                1,
                Some((seeds.to_vec(), results)),
            )
        }
    };
    let single = fisher_curve(&state, medium, grid)?;
    verify_against_oracle(&state, medium, single.peak_delta)?;
    let curve = copies_fisher(&single, copies)?;
    Ok(StateCurve {
        label: choice.label(),
        curve,
        state,
        copies,
        pso,
    })
}

fn curve_table(cli: &Cli, medium: &Medium, sc: &StateCurve, n: usize, seeds: &[u64]) -> Table {
    let g = medium.gamma_s;
    let mut meta = medium_meta(cli, medium);
    meta.push(("state".into(), sc.label.clone()));
    meta.push(("n_total".into(), n.to_string()));
    meta.push(("copies".into(), sc.copies.to_string()));
    if sc.pso.is_some() {
        meta.push((
            "seeds".into(),
            seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        ));
    }
    Table {
        meta,
        columns: vec!["delta_over_gamma_s", "fisher_gamma_s_sq"],
        rows: sc
            .curve
            .deltas
            .iter()
            .zip(&sc.curve.values)
            .map(|(d, f)| vec![d / g, f * g * g])
            .collect(),
    }
}

fn default_states(command: Command) -> Vec<StateChoice> {
    match command {
        Command::Compare => vec![
            StateChoice::SinglePhotons,
            StateChoice::Noon,
            StateChoice::NoonCopies,
            StateChoice::Optimal,
        ],
        _ => vec![StateChoice::SinglePhotons],
    }
}

fn run_sweep(cli: &Cli, medium: &Medium, grid_spec: &GridSpec) -> CliResult<()> {
    for density in densities(cli, medium) {
        let m = medium.with_density(density)?;
        let grid = grid_spec.grid(&m)?;
        let g = m.gamma_s;
        let (stem, columns, rows): (&str, Vec<&'static str>, Vec<Vec<f64>>) = match cli.command {
            Command::Susceptibility => (
                "susceptibility",
                vec!["delta_over_gamma_s", "chi_re", "chi_im"],
                grid.deltas()
                    .iter()
                    .map(|&d| {
                        let chi = m.susceptibility(d);
                        vec![d / g, chi.chi_re, chi.chi_im]
                    })
                    .collect(),
            ),
            Command::Arm => (
                "arm",
                vec!["delta_over_gamma_s", "transmissivity", "phase_rad"],
                grid.deltas()
                    .iter()
                    .map(|&d| {
                        let arm = m.arm_response(d)?;
                        Ok(vec![d / g, arm.transmissivity, arm.phase])
                    })
                    .collect::<CliResult<Vec<_>>>()?,
            ),
            _ => unreachable!("not a sweep command"),
        };
        let table = Table {
            meta: medium_meta(cli, &m),
            columns,
            rows,
        };
        table.write(
            &cli.out_dir,
            &format!("{stem}_{}", density_tag(density)),
            cli.format,
        )?;
    }
    Ok(())
}

fn run_curves(cli: &Cli, medium: &Medium, grid_spec: &GridSpec) -> CliResult<()> {
    let started = Instant::now();
    let seeds = parse_seeds(&cli.seeds)?;
    let states = match &cli.states {
        Some(list) => list
            .iter()
            .map(|s| StateChoice::parse(s))
            .collect::<CliResult<Vec<_>>>()?,
        None => default_states(cli.command),
    };
    if states.is_empty() {
        return Err(CliError::Usage("no states requested".into()));
    }
    let mut summary_entries = Vec::new();
    for density in densities(cli, medium) {
        let m = medium.with_density(density)?;
        let grid = grid_spec.grid(&m)?;
        let g = m.gamma_s;
        for &n in &cli.n {
            for choice in &states {
                let sc = state_curve(cli, choice, n, &m, &grid, &seeds)?;
                let stem = format!("fisher_{}_n{}_{}", sc.label, n, density_tag(density));
                let path =
                    curve_table(cli, &m, &sc, n, &seeds).write(&cli.out_dir, &stem, cli.format)?;
                let mut entry = json!({
                    "state": sc.label,
                    "n_total": n,
                    "density_per_m3": density,
                    "copies": sc.copies,
                    "peak_fisher_gamma_s_sq": sc.curve.peak_value * g * g,
                    "peak_delta_over_gamma_s": sc.curve.peak_delta / g,
                    "coefficients": coeff_pairs(&sc.state),
                    "file": path.file_name().and_then(|s| s.to_str()).unwrap_or_default(),
                });
                if let Some((seeds, results)) = &sc.pso {
                    let best = best_run(results).expect("seeded");
                    entry["seeds"] = json!(seeds);
                    entry["best_seed"] = json!(seeds[best]);
                }
                summary_entries.push(entry);
            }
        }
    }
    let name = match cli.command {
        Command::Compare => "compare_summary.json",
        _ => "fisher_summary.json",
    };
    let mut summary = json!({
        "version": VERSION,
        "command": format!("{:?}", cli.command).to_lowercase(),
        "medium": medium,
        "grid_over_gamma_s": grid_spec,
        "pso": {
            "particles": cli.particles,
            "iterations": cli.iterations,
            "complex_coeffs": cli.complex_coeffs,
            "per_dimension_rng": cli.per_dimension_rng,
        },
        "results": summary_entries,
    });
    if cli.command == Command::Compare {
        summary["wall_time_s"] = json!(started.elapsed().as_secs_f64());
    }
    write_json(&cli.out_dir.join(name), &summary)
}

fn run_optimize(cli: &Cli, medium: &Medium, grid_spec: &GridSpec) -> CliResult<()> {
    let seeds = parse_seeds(&cli.seeds)?;
    for density in densities(cli, medium) {
        let m = medium.with_density(density)?;
        let grid = grid_spec.grid(&m)?;
        let g = m.gamma_s;
        for &n in &cli.n {
            let config = pso_config(cli, n, &m, &grid);
            let results = optimize_seeds(&m, &config, &seeds)?;
            check_pso_results(&results)?;
            let best = best_run(&results).expect("at least one seed");
            let winner = &results[best];
            if n > 0 {
                verify_against_oracle(&winner.best_state, &m, winner.best_delta)?;
            }
            let tag = format!("n{}_{}", n, density_tag(density));
            let runs: Vec<_> = seeds
                .iter()
                .zip(&results)
                .map(|(seed, r)| {
                    json!({
                        "seed": seed,
                        "best_objective_gamma_s_sq": r.best_objective * g * g,
                        "best_delta_over_gamma_s": r.best_delta / g,
                        "coefficients": coeff_pairs(&r.best_state),
                        "objective_trace_gamma_s_sq": r.objective_trace.iter().map(|v| v * g * g).collect::<Vec<_>>(),
                        "evaluations": r.evaluations,
                    })
                })
                .collect();
            let mut config_echo = serde_json::to_value(&config).expect("config serializes");
            config_echo["objective_grid"] = json!(grid_spec);
            let doc = json!({
                "version": VERSION,
                "medium": m,
                "n_total": n,
                "config": config_echo,
                "best_seed": seeds[best],
                "best_objective_gamma_s_sq": winner.best_objective * g * g,
                "best_delta_over_gamma_s": winner.best_delta / g,
                "best_state": coeff_pairs(&winner.best_state),
                "runs": runs,
            });
            write_json(&cli.out_dir.join(format!("optimize_{tag}.json")), &doc)?;

            let complex = !winner.best_state.is_real();
            let mut meta = medium_meta(cli, &m);
            meta.push(("n_total".into(), n.to_string()));
            meta.push(("best_seed".into(), seeds[best].to_string()));
            let table = Table {
                meta,
                columns: if complex {
                    vec!["k", "psi_k_re", "psi_k_im"]
                } else {
                    vec!["k", "psi_k"]
                },
                rows: winner
                    .best_state
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        if complex {
                            vec![k as f64, c.re, c.im]
                        } else {
                            vec![k as f64, c.re]
                        }
                    })
                    .collect(),
            };
            write_atomic(
                &cli.out_dir.join(format!("psi_{tag}.csv")),
                table.render_coefficients().as_bytes(),
            )?;
        }
    }
    Ok(())
}

impl Table {
    /// CSV with integer `k` so the file reads back as a custom state.
    fn render_coefficients(&self) -> String {
        let mut out = format!("# fisherspec {VERSION}\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![format!("{}", row[0] as usize)];
            cells.extend(row[1..].iter().map(|v| format!("{v:e}")));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let grid_spec = GridSpec::parse(&cli.grid)?;
    let medium = load_medium(cli)?;
    if cli.n.is_empty() {
        return Err(CliError::Usage("--n needs at least one value".into()));
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Io {
        path: cli.out_dir.clone(),
        source,
    })?;
    match cli.command {
        Command::Susceptibility | Command::Arm => run_sweep(cli, &medium, &grid_spec),
        Command::Fisher | Command::Compare => run_curves(cli, &medium, &grid_spec),
        Command::Optimize => run_optimize(cli, &medium, &grid_spec),
    }
}

/// Entry point used by the binary: parses arguments, runs, and maps errors
/// to exit codes (1 usage, 2 numeric invariant).
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fisherspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
