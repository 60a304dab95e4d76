//! Command-line front end for the few-boson solver.
//!
//! Natural units throughout: `hbar = 1` and the heavy-particle mass is 1,
//! so depths and energies are plain numbers in `hbar^2 / (m b^2)` when the
//! range is 1.  Energies in the printed records are additionally reported
//! in units of the characteristic pair energy E_s = hbar^2 / (m b^2),
//! radii in units of the range b.
//!
//! Every subcommand accepts `--seed` (candidate stream), `--out` (write the
//! result to a file instead of stdout) and `--config` (JSON file overriding
//! solver, radial and threshold settings).  Command-line flags win over the
//! config file.  Exit code 0 means full success; 2 means the run finished
//! but some points failed (their reasons are in the output).

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use fewboson::observables::{self, StateReport};
use fewboson::radial::{self, RadialConfig};
use fewboson::scan::{self, ThresholdSettings};
use fewboson::schematic;
use fewboson::svm::{self, SvmConfig};
use fewboson::system::{PairPotential, SystemSpec, WidthConvention};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fewboson",
    version,
    about = "Weakly bound few-boson clusters from stochastic variational optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-body scattering length and bound spectrum of the Gaussian pair well.
    Scatlen(ScatlenArgs),
    /// Solve an N-body system at a fixed depth, scattering length or unitarity.
    Solve(SolveArgs),
    /// Sweep the pair depth over a grid and emit one CSV row per point.
    Scan(ScanArgs),
    /// Locate the depth at which a state stops being bound.
    Threshold(ThresholdArgs),
    /// Three-body geometric energy ratio at pair unitarity.
    ScalingFactor(ScalingArgs),
    /// Fit y = C x^p to tabulated radii (log-log least squares).
    FitPowerlaw(FitArgs),
    /// Scan the (N-1)+1 mass-imbalanced system over light/heavy ratios.
    MassScan(MassScanArgs),
    /// Closed-form oscillator and folded-well estimates.
    Schematic(SchematicArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// RNG seed for the solver candidate stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON settings file: {"svm": {...}, "radial": {...}, "threshold": {...}}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    /// exp(-r^2 / b^2)
    R2OverB2,
    /// exp(-r^2 / (2 b^2))
    R2Over2b2,
}

impl From<Convention> for WidthConvention {
    fn from(value: Convention) -> Self {
        match value {
            Convention::R2OverB2 => WidthConvention::R2OverB2,
            Convention::R2Over2b2 => WidthConvention::R2Over2B2,
        }
    }
}

/// Optional overrides loaded from --config; unset fields keep their
/// defaults (or the values implied by command-line flags).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    svm: SvmOverlay,
    radial: RadialOverlay,
    threshold: ThresholdOverlay,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SvmOverlay {
    k_candidates: Option<usize>,
    basis_max: Option<usize>,
    target_states: Option<usize>,
    convergence_tol: Option<f64>,
    patience: Option<usize>,
    threshold_mode: Option<bool>,
    seed: Option<u64>,
    refinement_sweeps: Option<usize>,
    n_sym: Option<usize>,
}

impl SvmOverlay {
    fn apply(&self, cfg: &mut SvmConfig) {
        if let Some(v) = self.k_candidates {
            cfg.k_candidates = v;
        }
        if let Some(v) = self.basis_max {
            cfg.basis_max = v;
        }
        if let Some(v) = self.target_states {
            cfg.target_states = v;
        }
        if let Some(v) = self.convergence_tol {
            cfg.convergence_tol = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(v) = self.threshold_mode {
            cfg.threshold_mode = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.refinement_sweeps {
            cfg.refinement_sweeps = v;
        }
        if let Some(v) = self.n_sym {
            cfg.n_sym = Some(v);
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RadialOverlay {
    r_max_over_b: Option<f64>,
    step_over_b: Option<f64>,
    richardson_levels: Option<usize>,
    node_tolerance: Option<f64>,
}

impl RadialOverlay {
    fn apply(&self, cfg: &mut RadialConfig) {
        if let Some(v) = self.r_max_over_b {
            cfg.r_max_over_b = v;
        }
        if let Some(v) = self.step_over_b {
            cfg.step_over_b = v;
        }
        if let Some(v) = self.richardson_levels {
            cfg.richardson_levels = v;
        }
        if let Some(v) = self.node_tolerance {
            cfg.node_tolerance = v;
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ThresholdOverlay {
    bound_floor: Option<f64>,
    window: Option<(f64, f64)>,
    rel_width: Option<f64>,
    march_factor: Option<f64>,
    max_probes: Option<usize>,
    probe_patience: Option<usize>,
    probe_sweeps: Option<usize>,
}

impl ThresholdOverlay {
    fn apply(&self, settings: &mut ThresholdSettings) {
        if let Some(v) = self.bound_floor {
            settings.bound_floor = v;
        }
        if let Some(v) = self.window {
            settings.window = v;
        }
        if let Some(v) = self.rel_width {
            settings.rel_width = v;
        }
        if let Some(v) = self.march_factor {
            settings.march_factor = v;
        }
        if let Some(v) = self.max_probes {
            settings.max_probes = v;
        }
        if let Some(v) = self.probe_patience {
            settings.probe_patience = v;
        }
        if let Some(v) = self.probe_sweeps {
            settings.probe_sweeps = v;
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ConfigFile> {
    match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))
        }
        None => Ok(ConfigFile::default()),
    }
}

/// Merged solver configuration: defaults, then config file, then flags.
fn build_cfg(
    common: &CommonArgs,
    file: &ConfigFile,
    states: Option<usize>,
    basis_max: Option<usize>,
    threshold_mode: bool,
    n_sym: Option<usize>,
) -> SvmConfig {
    let mut cfg = SvmConfig::default();
    file.svm.apply(&mut cfg);
    if let Some(states) = states {
        cfg.target_states = states;
    }
    if let Some(basis_max) = basis_max {
        cfg.basis_max = basis_max;
    }
    if threshold_mode {
        cfg.threshold_mode = true;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if n_sym.is_some() {
        cfg.n_sym = n_sym;
    }
    cfg
}

fn build_radial(file: &ConfigFile) -> RadialConfig {
    let mut cfg = RadialConfig::default();
    file.radial.apply(&mut cfg);
    cfg
}

fn emit(text: String, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text.as_bytes())
            .with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    emit(serde_json::to_string_pretty(value)?, out)
}

/// The pair whose scattering length parametrizes the interaction: the
/// heavy-light pair when a light particle is present, a heavy pair otherwise.
fn reference_pair(spec: &SystemSpec) -> (usize, usize) {
    if spec.has_light() {
        (0, spec.n_total - 1)
    } else {
        (0, 1)
    }
}

/// Depth from one of --v0 / --a-over-b / --unitarity.
fn resolve_depth(
    v0: Option<f64>,
    a_over_b: Option<f64>,
    unitarity: bool,
    mu: f64,
    template: &PairPotential,
    radial_cfg: &RadialConfig,
) -> Result<f64> {
    if let Some(v0) = v0 {
        return Ok(v0);
    }
    if unitarity {
        return Ok(radial::critical_strength_with_tol(1, mu, template, radial_cfg, 1e-9)?);
    }
    if let Some(a_over_b) = a_over_b {
        let a = a_over_b * template.b;
        return Ok(radial::strength_for_scattering_length(a, 0, mu, template, radial_cfg)?);
    }
    bail!("one of --v0, --a-over-b, --unitarity is required");
}

// ---------------------------------------------------------------- scatlen

#[derive(Args)]
#[command(group(ArgGroup::new("mass").required(true).args(["mu", "mass_ratio"])))]
struct ScatlenArgs {
    /// Pair depth V0 (negative attracts).
    #[arg(long, allow_hyphen_values = true)]
    v0: f64,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Reduced mass of the pair.
    #[arg(long)]
    mu: Option<f64>,
    /// Light/heavy mass ratio; the reduced mass is ratio/(1+ratio).
    #[arg(long)]
    mass_ratio: Option<f64>,
    /// Exponent convention of the well.
    #[arg(long, value_enum, default_value_t = Convention::R2OverB2)]
    convention: Convention,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_scatlen(args: ScatlenArgs) -> Result<ExitCode> {
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let mu = match (args.mu, args.mass_ratio) {
        (Some(mu), _) => mu,
        (None, Some(ratio)) => ratio / (1.0 + ratio),
        _ => bail!("one of --mu, --mass-ratio is required"),
    };
    let pot = PairPotential::new(args.v0, args.b, args.convention.into());
    let two = radial::two_body(mu, &pot, &radial_cfg)?;
    // equal-mass equivalent pair energy: hbar^2/(m b^2) with m = 2 mu
    let e_s = 1.0 / (2.0 * mu * args.b * args.b);
    let record = json!({
        "v0": args.v0,
        "b": args.b,
        "mu": mu,
        "a_over_b": two.a / args.b,
        "a_diverged": two.diverged,
        "bound_energies_over_Es": two.bound_energies.iter().map(|e| e / e_s).collect::<Vec<_>>(),
        "node_count": two.node_count,
    });
    emit_json(&record, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------------ solve

#[derive(Args)]
#[command(group(ArgGroup::new("depth").required(true).args(["v0", "a_over_b", "unitarity"])))]
struct SolveArgs {
    /// Particle count (2..=8).
    #[arg(long)]
    n: usize,
    /// Pair depth V0 (negative attracts).
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    /// Choose the depth whose reference-pair scattering length is this (units of b).
    #[arg(long, allow_hyphen_values = true)]
    a_over_b: Option<f64>,
    /// Choose the depth at which the reference pair sits at unitarity.
    #[arg(long)]
    unitarity: bool,
    /// Mass of the last particle relative to the others (1 = identical).
    #[arg(long, default_value_t = 1.0)]
    mass_ratio: f64,
    /// Number of states to target.
    #[arg(long)]
    states: Option<usize>,
    /// Basis-size cap.
    #[arg(long)]
    basis_max: Option<usize>,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Exponent convention of the well.
    #[arg(long, value_enum, default_value_t = Convention::R2OverB2)]
    convention: Convention,
    /// Widen the trial scale windows for near-threshold states.
    #[arg(long)]
    threshold_mode: bool,
    #[command(flatten)]
    common: CommonArgs,
}

/// Everything one solver run produces, in one serializable record.
#[derive(Serialize)]
struct RunRecord<'a> {
    spec: &'a SystemSpec,
    cfg: &'a SvmConfig,
    energies: &'a [f64],
    energies_over_es: Vec<f64>,
    reports: Vec<Option<StateReport>>,
    flags: &'a [svm::SolveFlag],
    basis_size: usize,
    /// Per-function pair widths (one list of pair exponents per basis state).
    basis_alphas: Vec<Vec<f64>>,
    /// Energy after every accepted growth step.
    history: &'a [svm::HistoryPoint],
}

fn run_solve(args: SolveArgs) -> Result<ExitCode> {
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let template = PairPotential::new(-1.0, args.b, args.convention.into());
    let n_sym = (args.mass_ratio < 1.0).then(|| args.n - 1);
    let cfg = build_cfg(&args.common, &file, args.states, args.basis_max, args.threshold_mode, n_sym);
    let probe_spec = if args.mass_ratio < 1.0 {
        SystemSpec::with_light(args.n, args.mass_ratio, template)?
    } else {
        SystemSpec::identical(args.n, template)?
    };
    let (i, j) = reference_pair(&probe_spec);
    let mu = probe_spec.reduced_mass(i, j);
    let v0 = resolve_depth(args.v0, args.a_over_b, args.unitarity, mu, &template, &radial_cfg)?;
    let spec = SystemSpec {
        potential: template.with_depth(v0),
        ..probe_spec
    };
    let (ens, report) = svm::solve(&spec, &cfg)?;
    let e_s = spec.characteristic_energy();
    let reports =
        (0..cfg.target_states).map(|s| observables::state_report(&ens, s).ok()).collect();
    let record = RunRecord {
        spec: &spec,
        cfg: &cfg,
        energies: &report.energies,
        energies_over_es: report.energies.iter().map(|e| e / e_s).collect(),
        reports,
        flags: &report.flags,
        basis_size: report.basis_size,
        basis_alphas: ens.functions().iter().map(|f| f.alphas().to_vec()).collect(),
        history: ens.history(),
    };
    emit_json(&record, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------------- scan

#[derive(Args)]
struct ScanArgs {
    /// Particle count (2..=8; 7 and 8 need --heavy).
    #[arg(long)]
    n: usize,
    /// Deepest grid depth.
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    /// Shallowest grid depth.
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    /// Number of grid points (inclusive of both ends).
    #[arg(long, default_value_t = 11)]
    points: usize,
    /// Number of states to target (default 2).
    #[arg(long)]
    states: Option<usize>,
    /// Mass of the last particle relative to the others.
    #[arg(long, default_value_t = 1.0)]
    mass_ratio: f64,
    /// Basis-size cap.
    #[arg(long)]
    basis_max: Option<usize>,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Exponent convention of the well.
    #[arg(long, value_enum, default_value_t = Convention::R2OverB2)]
    convention: Convention,
    /// Acknowledge the multi-hour cost of N = 7, 8 runs.
    #[arg(long)]
    heavy: bool,
    /// Emit the full JSON record instead of CSV.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    common: CommonArgs,
}

fn guard_heavy(n: usize, heavy: bool) -> Result<()> {
    if n >= 7 && !heavy {
        bail!(
            "N = {n} runs take hours at desk scale; pass --heavy to confirm \
             (N <= 5 is routine, N = 6 is slow but fine)"
        );
    }
    Ok(())
}

fn run_scan(args: ScanArgs) -> Result<ExitCode> {
    guard_heavy(args.n, args.heavy)?;
    if args.points < 2 {
        bail!("need at least 2 grid points");
    }
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let template_pot = PairPotential::new(-1.0, args.b, args.convention.into());
    let n_sym = (args.mass_ratio < 1.0).then(|| args.n - 1);
    let states = args.states.or(Some(2));
    let cfg = build_cfg(&args.common, &file, states, args.basis_max, false, n_sym);
    let template = if args.mass_ratio < 1.0 {
        SystemSpec::with_light(args.n, args.mass_ratio, template_pot)?
    } else {
        SystemSpec::identical(args.n, template_pot)?
    };
    let depths: Vec<f64> = (0..args.points)
        .map(|i| args.from + (args.to - args.from) * i as f64 / (args.points - 1) as f64)
        .collect();
    let sweep = scan::sweep_strength(&template, &depths, &cfg, &radial_cfg)?;
    let partial = !sweep.failures.is_empty();
    if args.json {
        emit_json(&sweep, &args.common.out)?;
    } else {
        let e_s = template.characteristic_energy();
        let mut text = String::from(scan::sweep_csv_header());
        text.push('\n');
        for point in &sweep.points {
            text.push_str(&scan::sweep_csv_line(point, e_s, args.b));
            text.push('\n');
        }
        emit(text, &args.common.out)?;
        for failure in &sweep.failures {
            eprintln!("point v0 = {:.6e} failed: {}", failure.v0, failure.message);
        }
    }
    Ok(if partial { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

// -------------------------------------------------------------- threshold

#[derive(Args)]
struct ThresholdArgs {
    /// Particle count (2..=8; 7 and 8 need --heavy).
    #[arg(long)]
    n: usize,
    /// State whose threshold to find (0 = ground).
    #[arg(long, default_value_t = 0)]
    state: usize,
    /// Starting depth; defaults to chaining up from the two-body threshold.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<f64>,
    /// Basis-size cap.
    #[arg(long)]
    basis_max: Option<usize>,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Exponent convention of the well.
    #[arg(long, value_enum, default_value_t = Convention::R2OverB2)]
    convention: Convention,
    /// Acknowledge the multi-hour cost of N = 7, 8 runs.
    #[arg(long)]
    heavy: bool,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_threshold(args: ThresholdArgs) -> Result<ExitCode> {
    guard_heavy(args.n, args.heavy)?;
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let mut settings = ThresholdSettings { radial: radial_cfg, ..ThresholdSettings::default() };
    file.threshold.apply(&mut settings);
    let template_pot = PairPotential::new(-1.0, args.b, args.convention.into());
    let states = Some(args.state + 1);
    let cfg = build_cfg(&args.common, &file, states, args.basis_max, true, None);

    // chain ground thresholds upward for a start when none is given:
    // each system is comfortably bound at its predecessor's threshold
    let start = match args.start {
        Some(start) => start,
        None => {
            let mut v = radial::critical_strength_with_tol(
                1,
                0.5,
                &template_pot,
                &settings.radial,
                1e-9,
            )?;
            for k in 3..args.n {
                let spec = SystemSpec::identical(k, template_pot)?;
                let mut chain_cfg = cfg.clone();
                chain_cfg.target_states = 1;
                eprintln!("chaining: ground threshold of the {k}-body system ...");
                v = scan::find_threshold(&spec, 0, v, &chain_cfg, &settings)?.v0_th;
            }
            v
        }
    };
    let spec = SystemSpec::identical(args.n, template_pot)?;
    let result = scan::find_threshold(&spec, args.state, start, &cfg, &settings)?;
    emit_json(&result, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

// --------------------------------------------------------- scaling-factor

#[derive(Args)]
struct ScalingArgs {
    /// Basis-size cap for the two-state solve.
    #[arg(long)]
    basis_max: Option<usize>,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Exponent convention of the well.
    #[arg(long, value_enum, default_value_t = Convention::R2OverB2)]
    convention: Convention,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_scaling(args: ScalingArgs) -> Result<ExitCode> {
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let template_pot = PairPotential::new(-1.0, args.b, args.convention.into());
    let template = SystemSpec::identical(3, template_pot)?;
    let basis_max = args.basis_max.or(Some(400));
    let cfg = build_cfg(&args.common, &file, Some(2), basis_max, true, None);
    let summary = scan::scaling_factor(&template, &cfg, &radial_cfg)?;
    emit_json(&summary, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

// ----------------------------------------------------------- fit-powerlaw

#[derive(Args)]
struct FitArgs {
    /// CSV whose first two numeric columns are N and a squared radius.
    #[arg(long)]
    input: PathBuf,
    /// Fit y = C (N - shift)^p; the default regresses against N - 1.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    x_shift: f64,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_fit(args: FitArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut points = Vec::new();
    for line in text.lines() {
        let mut fields = line.split(&[',', ';', '\t', ' ']).filter(|f| !f.is_empty());
        let (Some(x), Some(y)) = (fields.next(), fields.next()) else { continue };
        let (Ok(x), Ok(y)) = (x.trim().parse::<f64>(), y.trim().parse::<f64>()) else {
            continue; // header or comment line
        };
        points.push((x - args.x_shift, y));
    }
    let fit = scan::fit_power_law(&points)?;
    emit_json(&fit, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

// -------------------------------------------------------------- mass-scan

#[derive(Args)]
struct MassScanArgs {
    /// Total particle count: N-1 heavy plus one light.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Comma-separated light/heavy mass ratios.
    #[arg(long, default_value = "1.0,0.5,0.2,0.1,0.05")]
    ratios: String,
    /// Number of states to target (default 2).
    #[arg(long)]
    states: Option<usize>,
    /// Basis-size cap.
    #[arg(long)]
    basis_max: Option<usize>,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Exponent convention of the well.
    #[arg(long, value_enum, default_value_t = Convention::R2OverB2)]
    convention: Convention,
    /// Widen the trial scale windows (the scan runs at unitarity).
    #[arg(long)]
    threshold_mode: bool,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_mass_scan(args: MassScanArgs) -> Result<ExitCode> {
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let ratios: Vec<f64> = args
        .ratios
        .split(',')
        .map(|r| r.trim().parse::<f64>().with_context(|| format!("bad ratio {r:?}")))
        .collect::<Result<_>>()?;
    let template_pot = PairPotential::new(-1.0, args.b, args.convention.into());
    let states = args.states.or(Some(2));
    let cfg =
        build_cfg(&args.common, &file, states, args.basis_max, args.threshold_mode, None);
    let result = scan::mass_scan(args.n, &ratios, &template_pot, &cfg, &radial_cfg);
    let partial = !result.failures.is_empty();
    emit_json(&result, &args.common.out)?;
    Ok(if partial { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

// -------------------------------------------------------------- schematic

#[derive(Clone, Copy, ValueEnum)]
enum SchematicMode {
    /// Harmonic-cloud closed forms: energies, radii, threshold strength.
    Oscillator,
    /// Fold the pair well over a core and estimate particle attachment.
    Folding,
}

#[derive(Args)]
struct SchematicArgs {
    #[arg(long, value_enum)]
    mode: SchematicMode,
    /// Particle count (oscillator) or core size (folding).
    #[arg(long)]
    n: usize,
    /// Oscillator frequency.
    #[arg(long)]
    omega: Option<f64>,
    /// Oscillator level (0 = ground).
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Per-pair energy shift; defaults to the threshold strength.
    #[arg(long, allow_hyphen_values = true)]
    pair_shift: Option<f64>,
    /// Particle mass.
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Pair depth V0 for the folded well.
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    /// Range of the Gaussian well.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Mean squared radius of the core.
    #[arg(long)]
    core_msr: Option<f64>,
    /// Mass of the attached particle relative to a core particle.
    #[arg(long, default_value_t = 1.0)]
    mass_ratio: f64,
    /// Mean squared radius of the full (core + 1) system, for the halo split.
    #[arg(long)]
    msr_full: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_schematic(args: SchematicArgs) -> Result<ExitCode> {
    let file = load_config(&args.common)?;
    let radial_cfg = build_radial(&file);
    let record = match args.mode {
        SchematicMode::Oscillator => {
            let omega = args.omega.context("--omega is required in oscillator mode")?;
            let n = args.n;
            let v_th = schematic::oscillator_threshold_strength(n, omega);
            let shift = args.pair_shift.unwrap_or(v_th);
            let (b0, b1) = schematic::oscillator_neighbour_brackets(n);
            let (e0_next, e1_next) = schematic::oscillator_neighbour_energies(n, omega);
            json!({
                "n": n,
                "omega": omega,
                "pair_shift": shift,
                "threshold_strength": v_th,
                "energy": schematic::oscillator_energy(n, args.level, omega, shift),
                "radius_sq": schematic::oscillator_radius_sq(n, args.level, omega, args.mass),
                "first_excited_energy": schematic::oscillator_first_excited(n, omega, shift),
                "neighbour_brackets": { "ground": b0, "excited": b1 },
                "neighbour_energies_at_threshold": { "ground": e0_next, "excited": e1_next },
            })
        }
        SchematicMode::Folding => {
            let v0 = args.v0.context("--v0 is required in folding mode")?;
            let core_msr = args.core_msr.context("--core-msr is required in folding mode")?;
            let n_core = args.n;
            let estimate = schematic::attachment_estimate(
                n_core,
                v0,
                args.b,
                core_msr,
                1.0,
                args.mass_ratio,
                &radial_cfg,
            )?;
            let g_unitarity = schematic::unitarity_attachment_strength(
                n_core,
                1.0,
                args.mass_ratio,
                args.b,
                core_msr,
            );
            let halo = match args.msr_full {
                Some(msr_full) => {
                    let split = observables::halo_decompose(n_core + 1, msr_full, core_msr, 1.0)?;
                    Some(json!({
                        "r2_halo": split.r2_halo,
                        "reduced_mass": split.reduced_mass,
                        "binding": split.binding,
                    }))
                }
                None => None,
            };
            json!({
                "n_core": n_core,
                "v0": v0,
                "core_msr": core_msr,
                "well_depth": estimate.well.depth,
                "well_width": estimate.well.width,
                "strength": estimate.strength,
                "critical_strength": estimate.critical,
                "strength_at_unitarity": g_unitarity,
                "attachment_scattering_length_over_b": estimate.scattering_length / args.b,
                "scattering_length_diverged": estimate.diverged,
                "reduced_mass": estimate.reduced_mass,
                "halo": halo,
            })
        }
    };
    emit_json(&record, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scatlen(args) => run_scatlen(args),
        Command::Solve(args) => run_solve(args),
        Command::Scan(args) => run_scan(args),
        Command::Threshold(args) => run_threshold(args),
        Command::ScalingFactor(args) => run_scaling(args),
        Command::FitPowerlaw(args) => run_fit(args),
        Command::MassScan(args) => run_mass_scan(args),
        Command::Schematic(args) => run_schematic(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
