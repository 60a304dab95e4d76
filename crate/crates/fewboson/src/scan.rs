//! Orchestration layer: strength sweeps, threshold searches, spectral-ratio
//! summaries, power-law fits and mass-imbalance scans built on the
//! variational solver and the radial two-body reference.
//!
//! Everything here is deterministic for a fixed configuration: the solver
//! seed fixes the candidate stream, and bisections run to fixed tolerances.
//! Multi-point drivers reuse one warm basis across neighbouring points
//! (rescaling the stored depth, topping up growth while headroom remains,
//! then refining), which keeps dense scans far cheaper than cold starts
//! while staying variational at every point.

use crate::observables::{self, ObservableError, StateReport};
use crate::radial::{self, RadialConfig, RadialError};
use crate::svm::{solve, BasisEnsemble, SolveFlag, SolveReport, SvmConfig, SvmError};
use crate::system::{PairPotential, SystemError, SystemSpec};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from the scan drivers.
#[derive(Debug, Error)]
pub enum ScanError {
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    /// A search failed to bracket or locate its target.
    #[error("search failed: {0}")]
    SearchFailed(String),
    /// Not enough (or unusable) data for a fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

/// The template with its pair depth replaced.
fn respec(template: &SystemSpec, v0: f64) -> SystemSpec {
    SystemSpec {
        n_total: template.n_total,
        masses: template.masses.clone(),
        potential: template.potential.with_depth(v0),
    }
}

/// State reports for the first `k` states; `None` where a state is missing
/// from the spectrum or not bound.
fn collect_reports(ens: &BasisEnsemble, k: usize) -> Vec<Option<StateReport>> {
    (0..k).map(|s| observables::state_report(ens, s).ok()).collect()
}

/// A solver ensemble kept warm across depth changes.
///
/// `retune` rescales the stored basis to a new depth, grows further only
/// while the basis cap leaves headroom, then runs the configured number of
/// refinement sweeps.  Energies remain variational upper bounds at every
/// depth; a warm basis merely starts the new point from an already adapted
/// span instead of from scratch.
pub struct WarmSolver {
    ens: BasisEnsemble,
    last_flags: Vec<SolveFlag>,
    /// Configuration used by `retune`; callers may lighten it between calls
    /// (for example fewer refinement sweeps during a bisection).
    pub cfg: SvmConfig,
}

impl WarmSolver {
    /// Cold-start at `v0` with the given configuration.
    pub fn start(
        template: &SystemSpec,
        v0: f64,
        cfg: &SvmConfig,
    ) -> Result<(Self, SolveReport), ScanError> {
        let spec = respec(template, v0);
        let (ens, report) = solve(&spec, cfg)?;
        let last_flags = report.flags.clone();
        Ok((Self { ens, last_flags, cfg: cfg.clone() }, report))
    }

    /// The current ensemble.
    pub fn ensemble(&self) -> &BasisEnsemble {
        &self.ens
    }

    /// Anomaly flags from the most recent growth (cold start or top-up).
    pub fn flags(&self) -> &[SolveFlag] {
        &self.last_flags
    }

    /// Move to a new depth and re-adapt; returns the targeted energies.
    pub fn retune(&mut self, v0: f64) -> Result<Vec<f64>, ScanError> {
        self.ens.set_depth(v0)?;
        if self.ens.len() < self.cfg.basis_max {
            let summary = self.ens.grow(&self.cfg)?;
            self.last_flags = summary.flags;
        }
        let target = self.cfg.target_states - 1;
        for _ in 0..self.cfg.refinement_sweeps {
            self.ens.refine(&self.cfg, target)?;
        }
        Ok(self.target_energies())
    }

    /// Energies of the targeted states (shorter when the spectrum is).
    pub fn target_energies(&self) -> Vec<f64> {
        let k = self.cfg.target_states.min(self.ens.red().rank());
        self.ens.energies()[..k].to_vec()
    }
}

/// One solved point of a strength sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    /// Pair depth.
    pub v0: f64,
    /// Signed inverse squared scattering length `sign(a) (b/a)^2` of the
    /// heavy pair; zero exactly at unitarity.
    pub inv_a_sq: f64,
    /// Targeted energies, ascending.
    pub energies: Vec<f64>,
    /// Per-state observable reports (`None` for unbound states).
    pub reports: Vec<Option<StateReport>>,
    /// Basis size used at this point.
    pub basis_size: usize,
    /// Solver anomaly flags.
    pub flags: Vec<SolveFlag>,
}

/// A point that failed to solve, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub v0: f64,
    pub message: String,
}

/// Result of a strength sweep: solved points sorted by depth, plus any
/// recorded per-point failures.
#[derive(Debug, Clone, Serialize)]
pub struct StrengthSweep {
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
}

/// Solve the system over a grid of pair depths.
///
/// Points are processed from the deepest (most bound, easiest) upward and
/// share a warm basis; a failed point is recorded and skipped, and the next
/// point falls back to a cold start.  The returned points are sorted by
/// depth, ascending.
pub fn sweep_strength(
    template: &SystemSpec,
    depths: &[f64],
    cfg: &SvmConfig,
    radial_cfg: &RadialConfig,
) -> Result<StrengthSweep, ScanError> {
    let mut order: Vec<f64> = depths.to_vec();
    order.sort_by(|a, b| a.total_cmp(b));
    let mu_pair = template.reduced_mass(0, 1);
    let b = template.potential.b;

    let mut points = Vec::new();
    let mut failures = Vec::new();
    let mut warm: Option<WarmSolver> = None;
    for &v0 in &order {
        let mut failed: Option<String> = None;
        if warm.is_some() {
            if let Err(err) = warm.as_mut().expect("checked above").retune(v0) {
                failed = Some(err.to_string());
            }
        } else {
            match WarmSolver::start(template, v0, cfg) {
                Ok((w, _)) => warm = Some(w),
                Err(err) => failed = Some(err.to_string()),
            }
        }
        if let Some(message) = failed {
            failures.push(SweepFailure { v0, message });
            warm = None;
            continue;
        }
        let w = warm.as_ref().expect("warm solver present after a solved point");
        let ens = w.ensemble();
        let inv_a_sq = match radial::scattering_length(
            mu_pair,
            &template.potential.with_depth(v0),
            radial_cfg,
        ) {
            Ok(two) if two.diverged => 0.0,
            Ok(two) => (b / two.a).powi(2) * two.a.signum(),
            Err(err) => {
                failures.push(SweepFailure { v0, message: err.to_string() });
                f64::NAN
            }
        };
        points.push(SweepPoint {
            v0,
            inv_a_sq,
            energies: w.target_energies(),
            reports: collect_reports(ens, cfg.target_states),
            basis_size: ens.len(),
            flags: w.flags().to_vec(),
        });
    }
    Ok(StrengthSweep { points, failures })
}

/// Compact flag rendering for CSV cells (no commas).
pub fn render_flags(flags: &[SolveFlag]) -> String {
    let mut out = String::new();
    for flag in flags {
        if !out.is_empty() {
            out.push(';');
        }
        match flag {
            SolveFlag::ContinuumSuspect { state } => {
                out.push_str(&format!("continuum_suspect({state})"));
            }
            SolveFlag::NoProgress => out.push_str("no_progress"),
            SolveFlag::BasisFull => out.push_str("basis_full"),
        }
    }
    out
}

/// Header line for the sweep CSV format.
pub fn sweep_csv_header() -> &'static str {
    "v0_over_Es,inv_a_sq,E0_over_Es,E1_over_Es,msr0,msr1,rd0,rd1,flags"
}

/// One sweep point as a CSV line; energies are reported in units of the
/// characteristic pair energy, radii in units of the range `b`.  Missing
/// states leave their cells empty.
pub fn sweep_csv_line(point: &SweepPoint, e_s: f64, b: f64) -> String {
    let b2 = b * b;
    let energy = |s: usize| -> String {
        point.energies.get(s).map_or(String::new(), |e| format!("{:.12e}", e / e_s))
    };
    let msr = |s: usize| -> String {
        point
            .reports
            .get(s)
            .and_then(|r| r.as_ref())
            .map_or(String::new(), |r| format!("{:.8e}", r.mean_square_radius / b2))
    };
    let rd = |s: usize| -> String {
        point
            .reports
            .get(s)
            .and_then(|r| r.as_ref())
            .map_or(String::new(), |r| format!("{:.8e}", r.nearest_neighbour_radius / b))
    };
    format!(
        "{:.12e},{:.12e},{},{},{},{},{},{},{}",
        point.v0 / e_s,
        point.inv_a_sq,
        energy(0),
        energy(1),
        msr(0),
        msr(1),
        rd(0),
        rd(1),
        render_flags(&point.flags),
    )
}

/// Tunables for the threshold search.
#[derive(Debug, Clone)]
pub struct ThresholdSettings {
    /// A state counts as bound only when it lies below its breakup channel
    /// by more than this fraction of the characteristic energy.
    pub bound_floor: f64,
    /// Relative binding window (in characteristic-energy units) whose bound
    /// probes feed the extrapolation: probes shallower-bound than the lower
    /// edge terminate the bisection, probes inside the window are fitted.
    pub window: (f64, f64),
    /// Bisection also stops once the bracket is this narrow relative to the
    /// depth.
    pub rel_width: f64,
    /// Multiplicative step used to march the initial bracket.
    pub march_factor: f64,
    /// Cap on solver probes.
    pub max_probes: usize,
    /// Patience used while probing (the final evaluation restores the
    /// caller's value).
    pub probe_patience: usize,
    /// Refinement sweeps per probe.
    pub probe_sweeps: usize,
    /// Radial solver settings for the scattering length at the threshold.
    pub radial: RadialConfig,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self {
            bound_floor: 1e-6,
            window: (1e-4, 1e-2),
            rel_width: 5e-3,
            march_factor: 0.9,
            max_probes: 40,
            probe_patience: 20,
            probe_sweeps: 1,
            radial: RadialConfig::default(),
        }
    }
}

/// One solver evaluation during a threshold search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdProbe {
    /// Pair depth probed.
    pub v0: f64,
    /// Energy of the targeted state.
    pub energy: f64,
    /// Breakup-channel energy the state is measured against.
    pub channel: f64,
    /// Whether the state counted as bound here.
    pub bound: bool,
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    /// Particle number.
    pub n: usize,
    /// Targeted state (0 = ground).
    pub state: usize,
    /// Estimated critical depth.
    pub v0_th: f64,
    /// Heavy-pair scattering length at the critical depth, in units of b.
    pub a_over_b: f64,
    /// Whether that scattering length exceeded the divergence cutoff.
    pub a_diverged: bool,
    /// Mean squared radius of the targeted state evaluated at (or just
    /// below) the threshold; `None` when no bound evaluation succeeded.
    pub msr_threshold: Option<f64>,
    /// Nearest-neighbour distance derived from `msr_threshold`.
    pub rd_threshold: Option<f64>,
    /// Energy of the targeted state at the final evaluation.
    pub threshold_energy: f64,
    /// All solver probes, in the order they were made.
    pub probes: Vec<ThresholdProbe>,
    /// Flags from the final evaluation.
    pub flags: Vec<SolveFlag>,
}

/// Critical depth at which the targeted state of the `n`-body system stops
/// being bound against its breakup channel.
///
/// For `n = 2` the radial solver answers directly (to 1e−9 relative).  For
/// larger systems the search marches a warm variational ensemble from
/// `start_v0` until the state crosses its channel, bisects the bracket, and
/// finally extrapolates the binding-versus-depth curve to zero from probes
/// inside the configured shallow-binding window — the variational energy
/// itself is biased deep near a threshold, the extrapolation is not.
///
/// The breakup channel is the `(n−1)`-body ground state when that subsystem
/// is itself bound, and zero otherwise; for the ground state the channel is
/// identically zero because the subsystem sheds its last bound state at a
/// strictly deeper... shallower depth than `n` does (thresholds move shallow
/// with n), so the subsystem is already unbound where the `n`-body ground
/// state delivers.  For excited states the `(n−1)`-body ground energy is
/// tracked with its own warm ensemble.
///
/// `start_v0` must make the targeted state clearly bound or clearly unbound
/// — both directions are handled; a good choice is the ground threshold of
/// the `(n−1)`-body system.
pub fn find_threshold(
    template: &SystemSpec,
    state: usize,
    start_v0: f64,
    cfg: &SvmConfig,
    settings: &ThresholdSettings,
) -> Result<ThresholdResult, ScanError> {
    let n = template.n_total;
    let e_s = template.characteristic_energy();
    let mu_pair = template.reduced_mass(0, 1);
    let b = template.potential.b;

    if n == 2 {
        let v0_th = radial::critical_strength_with_tol(
            state + 1,
            mu_pair,
            &template.potential,
            &settings.radial,
            1e-9,
        )?;
        let two =
            radial::scattering_length(mu_pair, &template.potential.with_depth(v0_th), &settings.radial)?;
        return Ok(ThresholdResult {
            n,
            state,
            v0_th,
            a_over_b: two.a / b,
            a_diverged: two.diverged,
            msr_threshold: None,
            rd_threshold: None,
            threshold_energy: 0.0,
            probes: Vec::new(),
            flags: Vec::new(),
        });
    }

    if state + 1 > cfg.target_states {
        return Err(ScanError::SearchFailed(format!(
            "threshold for state {state} needs target_states > {state}"
        )));
    }

    // Warm ensembles: the n-body system under study and, for excited
    // thresholds, the (n−1)-body subsystem that defines the channel.
    let mut probe_cfg = cfg.clone();
    probe_cfg.patience = settings.probe_patience;
    probe_cfg.refinement_sweeps = settings.probe_sweeps;
    let (mut solver, _) = WarmSolver::start(template, start_v0, cfg)?;
    solver.cfg = probe_cfg.clone();

    let mut core: Option<WarmSolver> = if state > 0 {
        let core_spec = SystemSpec {
            n_total: n - 1,
            masses: template.masses[..n - 1].to_vec(),
            potential: template.potential,
        };
        let mut core_cfg = cfg.clone();
        core_cfg.target_states = 1;
        core_cfg.n_sym = None;
        let (mut w, _) = WarmSolver::start(&core_spec, start_v0, &core_cfg)?;
        w.cfg.patience = settings.probe_patience;
        w.cfg.refinement_sweeps = settings.probe_sweeps;
        Some(w)
    } else {
        None
    };

    let mut probes: Vec<ThresholdProbe> = Vec::new();
    // Measures the state against its channel; positive excess means bound.
    let probe = |solver: &mut WarmSolver,
                     core: &mut Option<WarmSolver>,
                     v0: f64,
                     probes: &mut Vec<ThresholdProbe>|
     -> Result<(f64, f64), ScanError> {
        let energies = solver.retune(v0)?;
        let energy = energies.get(state).copied().unwrap_or(f64::INFINITY);
        let channel = match core {
            Some(w) => {
                let core_energies = w.retune(v0)?;
                core_energies.first().copied().unwrap_or(0.0).min(0.0)
            }
            None => 0.0,
        };
        let excess = channel - energy;
        probes.push(ThresholdProbe {
            v0,
            energy,
            channel,
            bound: excess > settings.bound_floor * e_s,
        });
        Ok((energy, excess))
    };
    let is_bound = |excess: f64| excess > settings.bound_floor * e_s;

    // March from the start until the bound/unbound transition is bracketed.
    let (_, mut excess) = probe(&mut solver, &mut core, start_v0, &mut probes)?;
    let mut v_bound;
    let mut v_free;
    if is_bound(excess) {
        v_bound = start_v0;
        let mut v = start_v0;
        loop {
            v *= settings.march_factor;
            let (_, e) = probe(&mut solver, &mut core, v, &mut probes)?;
            if !is_bound(e) {
                v_free = v;
                break;
            }
            v_bound = v;
            excess = e;
            if probes.len() >= settings.max_probes {
                return Err(ScanError::SearchFailed(format!(
                    "state {state} of the {n}-body system still bound at depth {v:.6e}"
                )));
            }
        }
    } else {
        v_free = start_v0;
        let mut v = start_v0;
        loop {
            v /= settings.march_factor;
            let (_, e) = probe(&mut solver, &mut core, v, &mut probes)?;
            if is_bound(e) {
                v_bound = v;
                excess = e;
                break;
            }
            v_free = v;
            if probes.len() >= settings.max_probes {
                return Err(ScanError::SearchFailed(format!(
                    "state {state} of the {n}-body system still unbound at depth {v:.6e}"
                )));
            }
        }
    }

    // Bisect until the bracket is narrow or a probe lands very close to the
    // threshold from the bound side.
    while (v_bound - v_free).abs() > settings.rel_width * v_bound.abs()
        && excess.abs() > settings.window.0 * e_s
        && probes.len() < settings.max_probes
    {
        let mid = 0.5 * (v_bound + v_free);
        let (_, e) = probe(&mut solver, &mut core, mid, &mut probes)?;
        if is_bound(e) {
            v_bound = mid;
            excess = e;
        } else {
            v_free = mid;
        }
    }

    // Extrapolation set: bound probes inside the shallow-binding window.
    let window_points = |probes: &[ThresholdProbe]| -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = probes
            .iter()
            .filter(|p| p.bound)
            .map(|p| (p.v0, p.channel - p.energy))
            .filter(|&(_, ex)| ex <= settings.window.1 * e_s)
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 * b.0.abs());
        pts
    };
    let mut pts = window_points(&probes);
    let mut extra = 0;
    while pts.len() < 3 && extra < 4 && probes.len() < settings.max_probes + 4 {
        // fill the bracket with interior probes until the window is populated
        let f = [0.25, 0.5, 0.75, 0.375][extra];
        let v = v_bound + f * (v_free - v_bound);
        probe(&mut solver, &mut core, v, &mut probes)?;
        extra += 1;
        pts = window_points(&probes);
    }

    let v0_th = extrapolate_root(&pts, v_bound, v_free);

    // Final evaluation at the estimated threshold with the caller's full
    // refinement effort; if the variational state sits just above its
    // channel there, nudge half a percent deeper so the radius is read from
    // a genuinely bound state.
    solver.cfg = cfg.clone();
    let mut eval_v0 = v0_th;
    let mut energies = solver.retune(eval_v0)?;
    let mut energy = energies.get(state).copied().unwrap_or(f64::INFINITY);
    let channel = match core.as_mut() {
        Some(w) => w.retune(eval_v0)?.first().copied().unwrap_or(0.0).min(0.0),
        None => 0.0,
    };
    if !(energy < channel) {
        eval_v0 = v0_th * 1.005;
        energies = solver.retune(eval_v0)?;
        energy = energies.get(state).copied().unwrap_or(f64::INFINITY);
    }
    let report = observables::state_report(solver.ensemble(), state).ok();
    let msr_threshold = report.map(|r| r.mean_square_radius);
    let rd_threshold = report.map(|r| r.nearest_neighbour_radius);

    let two = radial::scattering_length(mu_pair, &template.potential.with_depth(v0_th), &settings.radial)?;
    Ok(ThresholdResult {
        n,
        state,
        v0_th,
        a_over_b: two.a / b,
        a_diverged: two.diverged,
        msr_threshold,
        rd_threshold,
        threshold_energy: energy,
        probes,
        flags: solver.flags().to_vec(),
    })
}

/// Root of the binding-versus-depth curve fitted through the window points,
/// falling back to the bracket midpoint when the fit cannot help.
fn extrapolate_root(pts: &[(f64, f64)], v_bound: f64, v_free: f64) -> f64 {
    let lo = v_bound.min(v_free);
    let hi = v_bound.max(v_free);
    let width = hi - lo;
    let in_range = |v: f64| v >= lo - 0.5 * width && v <= hi + 0.5 * width;
    match pts.len() {
        0 | 1 => 0.5 * (v_bound + v_free),
        2 => {
            let (x0, y0) = pts[0];
            let (x1, y1) = pts[1];
            let slope = (y1 - y0) / (x1 - x0);
            let root = x0 - y0 / slope;
            if slope.is_finite() && in_range(root) { root } else { 0.5 * (v_bound + v_free) }
        }
        _ => {
            // quadratic least squares in a centred variable for conditioning
            let m = pts.len() as f64;
            let xc: f64 = pts.iter().map(|p| p.0).sum::<f64>() / m;
            let xs: f64 = width.max(1e-300);
            let t: Vec<f64> = pts.iter().map(|p| (p.0 - xc) / xs).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let mut s = [0.0_f64; 5];
            for &ti in &t {
                let mut pw = 1.0;
                for sk in s.iter_mut() {
                    *sk += pw;
                    pw *= ti;
                }
            }
            let mut b = [0.0_f64; 3];
            for (ti, yi) in t.iter().zip(&y) {
                b[0] += yi;
                b[1] += yi * ti;
                b[2] += yi * ti * ti;
            }
            let a_mat = nalgebra::Matrix3::new(
                s[0], s[1], s[2], //
                s[1], s[2], s[3], //
                s[2], s[3], s[4],
            );
            let rhs = nalgebra::Vector3::new(b[0], b[1], b[2]);
            let Some(sol) = a_mat.lu().solve(&rhs) else {
                return 0.5 * (v_bound + v_free);
            };
            let (c0, c1, c2) = (sol[0], sol[1], sol[2]);
            // roots of c2 t² + c1 t + c0, mapped back to depth
            let mut candidates = Vec::new();
            if c2.abs() > 1e-14 * c1.abs().max(1.0) {
                let disc = c1 * c1 - 4.0 * c2 * c0;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    candidates.push((-c1 + sq) / (2.0 * c2));
                    candidates.push((-c1 - sq) / (2.0 * c2));
                }
            } else if c1.abs() > 0.0 {
                candidates.push(-c0 / c1);
            }
            candidates
                .into_iter()
                .map(|t_root| xc + xs * t_root)
                .filter(|v| v.is_finite() && in_range(*v))
                .min_by(|a, b| {
                    // prefer the root on the shallow side of the bound probes
                    let d_a = (a - v_free).abs();
                    let d_b = (b - v_free).abs();
                    d_a.total_cmp(&d_b)
                })
                .unwrap_or(0.5 * (v_bound + v_free))
        }
    }
}

/// Discrete-scaling summary of the attractive three-body spectrum at
/// two-body unitarity.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingSummary {
    /// Depth at which the pair scattering length diverges.
    pub v0_unitarity: f64,
    /// Ground-state energy there.
    pub ground_energy: f64,
    /// First excited-state energy there.
    pub excited_energy: f64,
    /// Geometric scaling factor `sqrt(E0 / E1)`.
    pub factor: f64,
    /// Zero-range reference `exp(pi / s0)`.
    pub zero_range_factor: f64,
    /// Channel constant `s0` behind the zero-range reference.
    pub channel_constant: f64,
    /// Basis size of the two-state solve.
    pub basis_size: usize,
    /// Solver flags.
    pub flags: Vec<SolveFlag>,
}

/// Solve the system at pair unitarity for two states and report the
/// geometric energy ratio alongside its zero-range reference value.
///
/// The excited state at unitarity is orders of magnitude larger than the
/// ground state, so the solve always runs with the wide threshold-mode
/// scale windows and two targeted states regardless of the caller's
/// configuration.
pub fn scaling_factor(
    template: &SystemSpec,
    cfg: &SvmConfig,
    radial_cfg: &RadialConfig,
) -> Result<ScalingSummary, ScanError> {
    let mu_pair = template.reduced_mass(0, 1);
    let v0_unitarity =
        radial::critical_strength_with_tol(1, mu_pair, &template.potential, radial_cfg, 1e-9)?;
    let mut run_cfg = cfg.clone();
    run_cfg.target_states = run_cfg.target_states.max(2);
    run_cfg.threshold_mode = true;
    let spec = respec(template, v0_unitarity);
    let (_, report) = solve(&spec, &run_cfg)?;
    let ground = report.energies.first().copied().unwrap_or(f64::INFINITY);
    let excited = report.energies.get(1).copied().unwrap_or(f64::INFINITY);
    if !(ground < 0.0 && excited < 0.0) {
        return Err(ScanError::SearchFailed(format!(
            "need two bound states at unitarity, got energies {:?}",
            report.energies
        )));
    }
    let s0 = efimov_channel_constant();
    Ok(ScalingSummary {
        v0_unitarity,
        ground_energy: ground,
        excited_energy: excited,
        factor: (ground / excited).sqrt(),
        zero_range_factor: (PI / s0).exp(),
        channel_constant: s0,
        basis_size: report.basis_size,
        flags: report.flags,
    })
}

/// Channel constant `s0` of three identical bosons with resonant pairwise
/// attraction: the positive root of
/// `s cosh(pi s / 2) = (8 / sqrt(3)) sinh(pi s / 6)`.
pub fn efimov_channel_constant() -> f64 {
    let f = |s: f64| s * (PI * s / 2.0).cosh() - 8.0 / 3.0_f64.sqrt() * (PI * s / 6.0).sinh();
    let mut lo = 0.5_f64;
    let mut hi = 1.5_f64;
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zero-range geometric scaling factor `exp(pi / s0)`.
pub fn zero_range_scaling_factor() -> f64 {
    (PI / efimov_channel_constant()).exp()
}

/// Least-squares power law `y = C x^p` with standard errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawFit {
    /// Prefactor.
    pub c: f64,
    /// Exponent.
    pub p: f64,
    /// Standard error of the prefactor (delta method from ln C).
    pub c_err: f64,
    /// Standard error of the exponent.
    pub p_err: f64,
    /// Coefficient of determination in log–log space.
    pub r_squared: f64,
    /// Number of points fitted.
    pub n_points: usize,
}

/// Fit `y = C x^p` by least squares in log–log space.
///
/// Standard errors come from the residual variance (`n − 2` degrees of
/// freedom); at least three strictly positive points are required.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, ScanError> {
    if points.len() < 3 {
        return Err(ScanError::DegenerateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(ScanError::DegenerateFit(format!(
                "power law needs positive finite data, got ({x}, {y})"
            )));
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let x_bar = logs.iter().map(|l| l.0).sum::<f64>() / n;
    let y_bar = logs.iter().map(|l| l.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(lx, ly) in &logs {
        sxx += (lx - x_bar) * (lx - x_bar);
        sxy += (lx - x_bar) * (ly - y_bar);
        syy += (ly - y_bar) * (ly - y_bar);
    }
    if sxx <= 0.0 {
        return Err(ScanError::DegenerateFit("all x values coincide".into()));
    }
    let p = sxy / sxx;
    let ln_c = y_bar - p * x_bar;
    let ssr: f64 = logs.iter().map(|&(lx, ly)| (ly - ln_c - p * lx).powi(2)).sum();
    let dof = n - 2.0;
    let sigma_sq = (ssr / dof).max(0.0);
    let p_err = (sigma_sq / sxx).sqrt();
    let ln_c_err = (sigma_sq * (1.0 / n + x_bar * x_bar / sxx)).sqrt();
    let c = ln_c.exp();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(PowerLawFit { c, p, c_err: c * ln_c_err, p_err, r_squared, n_points: points.len() })
}

/// One point of a mass-imbalance scan.
#[derive(Debug, Clone, Serialize)]
pub struct MassScanPoint {
    /// Light-to-heavy mass ratio.
    pub mass_ratio: f64,
    /// Depth at which the heavy–light pair sits exactly at unitarity.
    pub v0: f64,
    /// Targeted energies, ascending.
    pub energies: Vec<f64>,
    /// Ground-to-excited energy ratio when both states are bound.
    pub energy_ratio: Option<f64>,
    /// Per-state observable reports with the species split populated.
    pub reports: Vec<Option<StateReport>>,
    /// Schematic particle–core coupling at unitarity read from the in-situ
    /// core geometry of the ground state.
    pub attachment_strength: Option<f64>,
    /// Basis size.
    pub basis_size: usize,
    /// Solver flags.
    pub flags: Vec<SolveFlag>,
}

/// A mass ratio that failed to solve, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct MassScanFailure {
    pub mass_ratio: f64,
    pub message: String,
}

/// Result of a mass-imbalance scan.
#[derive(Debug, Clone, Serialize)]
pub struct MassScan {
    pub points: Vec<MassScanPoint>,
    pub failures: Vec<MassScanFailure>,
}

/// Scan the `(n−1)`-heavy-plus-one-light system over light/heavy mass
/// ratios, holding every heavy–light pair exactly at its two-body unitarity
/// depth (the common pair depth also applies to heavy–heavy pairs).
///
/// Failures at individual ratios are recorded per point rather than
/// aborting the scan.
pub fn mass_scan(
    n_total: usize,
    ratios: &[f64],
    potential: &PairPotential,
    cfg: &SvmConfig,
    radial_cfg: &RadialConfig,
) -> MassScan {
    let mut points = Vec::with_capacity(ratios.len());
    let mut failures = Vec::new();
    for &ratio in ratios {
        match mass_scan_point(n_total, ratio, potential, cfg, radial_cfg) {
            Ok(point) => points.push(point),
            Err(err) => {
                failures.push(MassScanFailure { mass_ratio: ratio, message: err.to_string() })
            }
        }
    }
    MassScan { points, failures }
}

fn mass_scan_point(
    n_total: usize,
    ratio: f64,
    potential: &PairPotential,
    cfg: &SvmConfig,
    radial_cfg: &RadialConfig,
) -> Result<MassScanPoint, ScanError> {
    let template = SystemSpec::with_light(n_total, ratio, *potential)?;
    let mu_hl = template.reduced_mass(0, n_total - 1);
    let v0 = radial::critical_strength_with_tol(1, mu_hl, potential, radial_cfg, 1e-9)?;
    let mut run_cfg = cfg.clone();
    run_cfg.n_sym = Some(n_total - 1);
    let spec = respec(&template, v0);
    let (ens, report) = solve(&spec, &run_cfg)?;
    let reports = collect_reports(&ens, run_cfg.target_states);
    let energy_ratio = match (report.energies.first(), report.energies.get(1)) {
        (Some(&e0), Some(&e1)) if e0 < 0.0 && e1 < 0.0 => Some(e0 / e1),
        _ => None,
    };
    let attachment_strength = reports.first().and_then(|r| r.as_ref()).and_then(|r| {
        let n_core = n_total - 1;
        let pair_core = r.pair_mean_square_core?;
        // core radius from its pair distances: <r_ij^2> = 2 n/(n−1) <r^2>
        let core_msr = pair_core * (n_core as f64 - 1.0) / (2.0 * n_core as f64);
        Some(crate::schematic::unitarity_attachment_strength(
            n_core,
            template.heavy_mass(),
            template.masses[n_total - 1],
            potential.b,
            core_msr,
        ))
    });
    Ok(MassScanPoint {
        mass_ratio: ratio,
        v0,
        energies: report.energies,
        energy_ratio,
        reports,
        attachment_strength,
        basis_size: report.basis_size,
        flags: report.flags,
    })
}
