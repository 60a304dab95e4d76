//! Exact s-wave reference solutions of the two-body radial equation.
//!
//! Everything here reduces to Numerov integration of u'' = (2μ/ħ²)(V − E)u on
//! a uniform grid.  The zero-energy solution delivers the scattering length
//! (intercept of the linear tail) and the bound-state count (interior nodes
//! plus an imminent tail crossing); negative-energy shooting with a Wronskian
//! match at the outer turning point delivers the bound-state energies.

use thiserror::Error;

use crate::system::PairPotential;
use crate::HBAR;

/// Scattering lengths beyond this many ranges are reported as diverged.
pub const DIVERGENCE_CUTOFF_OVER_B: f64 = 1e12;

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("invalid radial config: {0}")]
    InvalidConfig(String),
    #[error("NON_CONVERGED: {0}")]
    NonConverged(String),
    #[error("no bracket found: {0}")]
    NoBracket(String),
}

/// Grid and convergence controls for the radial solver.
#[derive(Debug, Clone, Copy)]
pub struct RadialConfig {
    /// Integration range in units of the potential range b (≥ 25).
    pub r_max_over_b: f64,
    /// Base grid step in units of b (≤ 1/200); Richardson halves it.
    pub step_over_b: f64,
    /// Number of grid refinements combined by Richardson extrapolation (≥ 2).
    pub richardson_levels: usize,
    /// |u| below this fraction of the local scale is treated as an exact zero
    /// when counting nodes.
    pub node_tolerance: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            r_max_over_b: 25.0,
            step_over_b: 1.0 / 400.0,
            richardson_levels: 3,
            node_tolerance: 1e-12,
        }
    }
}

impl RadialConfig {
    fn validate(&self) -> Result<(), RadialError> {
        if self.r_max_over_b < 25.0 {
            return Err(RadialError::InvalidConfig(format!(
                "r_max must be at least 25 ranges, got {}",
                self.r_max_over_b
            )));
        }
        if self.step_over_b > 1.0 / 200.0 || self.step_over_b <= 0.0 {
            return Err(RadialError::InvalidConfig(format!(
                "grid step must be positive and at most b/200, got {} b",
                self.step_over_b
            )));
        }
        if self.richardson_levels < 2 {
            return Err(RadialError::InvalidConfig(
                "need at least two Richardson levels".into(),
            ));
        }
        Ok(())
    }
}

/// Combined two-body summary.
#[derive(Debug, Clone)]
pub struct TwoBodyResult {
    /// Scattering length (same units as b); sign is physical.
    pub a: f64,
    /// Set when |a| exceeds the divergence cutoff.
    pub diverged: bool,
    /// Bound-state energies, most deeply bound first (all negative).
    pub bound_energies: Vec<f64>,
    /// Number of s-wave bound states.
    pub node_count: usize,
}

/// One zero-energy integration: interior nodes, tail intercept, bound count.
struct ZeroEnergyTail {
    a: f64,
    bound_count: usize,
}

fn numerov_zero_energy(mu: f64, pot: &PairPotential, h: f64, r_max: f64) -> ZeroEnergyTail {
    let n_steps = (r_max / h).ceil() as usize;
    let coef = 2.0 * mu / (HBAR * HBAR);
    let f = |r: f64| coef * pot.value(r);

    let mut u_prev = 0.0_f64;
    // regular s-wave start: u(r) = r + f(0) r³/6 + O(r⁵)
    let mut u = h + f(0.0) * h * h * h / 6.0;
    let mut f_prev = f(0.0);
    let mut f_cur = f(h);
    let mut nodes = 0usize;
    let mut last_sign = 1.0_f64;
    let mut max_abs: f64 = u.abs();

    // sample two tail points for the linear fit u ∝ (r − a)
    let i_tail = ((0.8 * r_max) / h).floor() as usize;
    let mut tail = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64); // (r1, u1, r2, u2)

    for i in 1..n_steps {
        let r_next = (i + 1) as f64 * h;
        let f_next = f(r_next);
        let u_next = (2.0 * (1.0 + 5.0 * h * h * f_cur / 12.0) * u
            - (1.0 - h * h * f_prev / 12.0) * u_prev)
            / (1.0 - h * h * f_next / 12.0);

        max_abs = max_abs.max(u_next.abs());
        let sign = if u_next > 0.0 {
            1.0
        } else if u_next < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 && sign != last_sign {
            nodes += 1;
            last_sign = sign;
        }

        if i + 1 == i_tail {
            tail.0 = r_next;
            tail.1 = u_next;
        }
        if i + 1 == n_steps {
            tail.2 = r_next;
            tail.3 = u_next;
        }

        u_prev = u;
        u = u_next;
        f_prev = f_cur;
        f_cur = f_next;
        if u.abs() > 1e250 {
            // rescale both running values; node structure is unaffected
            u_prev /= 1e250;
            u /= 1e250;
            max_abs /= 1e250;
            tail.1 /= 1e250;
        }
    }

    let (r1, u1, r2, u2) = tail;
    let slope = (u2 - u1) / (r2 - r1);
    let a = if slope == 0.0 {
        f64::INFINITY * u2.signum()
    } else {
        r1 - u1 / slope
    };
    // a crossing beyond the grid means one more state is just bound
    let tail_crossing = u2 * slope < 0.0;
    ZeroEnergyTail { a, bound_count: nodes + usize::from(tail_crossing) }
}

/// Scattering length with Richardson extrapolation over grid halvings.
pub fn scattering_length(
    mu: f64,
    pot: &PairPotential,
    cfg: &RadialConfig,
) -> Result<TwoBodyResult, RadialError> {
    cfg.validate()?;
    let b = pot.b;
    let r_max = cfg.r_max_over_b * b;

    let mut estimates = Vec::with_capacity(cfg.richardson_levels);
    let mut bound_count = 0;
    for level in 0..cfg.richardson_levels {
        let h = cfg.step_over_b * b / (1 << level) as f64;
        let tail = numerov_zero_energy(mu, pot, h, r_max);
        estimates.push(tail.a);
        bound_count = tail.bound_count;
    }
    // error series h⁴, h⁶, …: eliminate one power pair per column
    let mut table = estimates.clone();
    for col in 1..table.len() {
        let factor = (2.0_f64).powi(2 + 2 * col as i32);
        for row in (col..table.len()).rev() {
            table[row] = (factor * table[row] - table[row - 1]) / (factor - 1.0);
        }
    }
    let a = table[table.len() - 1];
    let prev = table[table.len() - 2];
    let diverged = a.abs() > DIVERGENCE_CUTOFF_OVER_B * b;
    if !diverged {
        // two views of the spread: relative in a (floored at b, since far
        // below the range the intercept is roundoff-limited) and absolute in
        // b/a, which stays regular arbitrarily close to unitarity
        let scale = a.abs().max(b);
        let rel_ok = (a - prev).abs() <= 1e-8 * scale;
        let inv_ok = (b / a - b / prev).abs() <= 1e-8;
        if !(rel_ok || inv_ok) {
            return Err(RadialError::NonConverged(format!(
                "scattering length extrapolation spread {:.3e} exceeds 1e-8 relative",
                (a - prev).abs() / scale
            )));
        }
    }
    Ok(TwoBodyResult { a, diverged, bound_energies: Vec::new(), node_count: bound_count })
}

/// Bound-state count at the given depth (coarse grid; counting is robust).
fn bound_count(mu: f64, pot: &PairPotential, cfg: &RadialConfig) -> usize {
    let b = pot.b;
    let h = (cfg.step_over_b * b).min(b / 200.0);
    numerov_zero_energy(mu, pot, h, cfg.r_max_over_b * b).bound_count
}

/// Depth V0 < 0 at which the k-th s-wave bound state appears, to the given
/// relative tolerance on the depth.
pub fn critical_strength_with_tol(
    k: usize,
    mu: f64,
    template: &PairPotential,
    cfg: &RadialConfig,
    rel_tol: f64,
) -> Result<f64, RadialError> {
    cfg.validate()?;
    if k == 0 {
        return Err(RadialError::InvalidConfig("state index k starts at 1".into()));
    }
    let w_sq = template.width_sq();
    // natural depth scale of the well
    let scale = HBAR * HBAR / (2.0 * mu * w_sq);
    let mut hi = -scale; // trial depth, deepened until k states bind
    let mut grow = 0;
    while bound_count(mu, &template.with_depth(hi), cfg) < k {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(RadialError::NoBracket(format!(
                "no depth with {k} bound states up to {hi:.3e}"
            )));
        }
    }
    let mut lo = 0.0_f64; // zero depth binds nothing
    while (hi - lo).abs() > rel_tol * hi.abs() {
        let mid = 0.5 * (hi + lo);
        if bound_count(mu, &template.with_depth(mid), cfg) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Depth at which the k-th bound state appears (relative tolerance 1e−6).
pub fn critical_strength(
    k: usize,
    mu: f64,
    template: &PairPotential,
    cfg: &RadialConfig,
) -> Result<f64, RadialError> {
    critical_strength_with_tol(k, mu, template, cfg, 1e-6)
}

/// Depth whose scattering length equals `a_target` on the branch with
/// `branch` bound states.  `a_target = ±∞` (or the `--unitarity` sentinel)
/// returns the branch boundary, i.e. the (branch+1)-th critical depth at
/// 1e−9 relative tolerance.
pub fn strength_for_scattering_length(
    a_target: f64,
    branch: usize,
    mu: f64,
    template: &PairPotential,
    cfg: &RadialConfig,
) -> Result<f64, RadialError> {
    cfg.validate()?;
    if a_target.is_infinite() || a_target.is_nan() {
        return critical_strength_with_tol(branch + 1, mu, template, cfg, 1e-9);
    }
    // on a fixed branch the scattering length decreases continuously from +∞
    // (branch opens) to −∞ (next branch opens)
    let v_open = if branch == 0 {
        0.0
    } else {
        critical_strength_with_tol(branch, mu, template, cfg, 1e-9)?
    };
    let v_close = critical_strength_with_tol(branch + 1, mu, template, cfg, 1e-9)?;
    let eps = 1e-9 * v_close.abs();
    let mut lo = v_open - eps.max(1e-12); // slightly inside the branch
    let mut hi = v_close + eps;
    let a_of = |v0: f64| -> Result<f64, RadialError> {
        Ok(scattering_length(mu, &template.with_depth(v0), cfg)?.a)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let a_mid = a_of(mid)?;
        if a_mid > a_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-14 * hi.abs() {
            break;
        }
        let scale = a_target.abs().max(0.01 * template.b);
        if (a_mid - a_target).abs() <= 1e-9 * scale {
            break;
        }
    }
    let v0 = 0.5 * (lo + hi);
    let a_check = a_of(v0)?;
    let scale = a_target.abs().max(0.01 * template.b);
    if (a_check - a_target).abs() > 1e-7 * scale {
        return Err(RadialError::NonConverged(format!(
            "round trip through the scattering length missed by {:.3e} relative",
            (a_check - a_target).abs() / scale
        )));
    }
    Ok(v0)
}

/// Outward-only Numerov sweep at energy E < 0 counting every interior sign
/// change; nodes(E) equals the number of eigenvalues below E.
fn count_nodes_outward(mu: f64, pot: &PairPotential, e: f64, h: f64, r_max: f64) -> usize {
    let coef = 2.0 * mu / (HBAR * HBAR);
    let f = |r: f64| coef * (pot.value(r) - e);
    let n_steps = (r_max / h).ceil() as usize;
    let mut u_prev = 0.0_f64;
    let mut u = h + f(0.0) * h * h * h / 6.0;
    let mut f_prev = f(0.0);
    let mut f_cur = f(h);
    let mut nodes = 0usize;
    let mut last_sign = 1.0_f64;
    for i in 1..n_steps {
        let r_next = (i + 1) as f64 * h;
        let f_next = f(r_next);
        let u_next = (2.0 * (1.0 + 5.0 * h * h * f_cur / 12.0) * u
            - (1.0 - h * h * f_prev / 12.0) * u_prev)
            / (1.0 - h * h * f_next / 12.0);
        let sign = if u_next > 0.0 {
            1.0
        } else if u_next < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 && sign != last_sign {
            nodes += 1;
            last_sign = sign;
        }
        u_prev = u;
        u = u_next;
        f_prev = f_cur;
        f_cur = f_next;
        if u.abs() > 1e250 {
            u_prev /= 1e250;
            u /= 1e250;
        }
    }
    nodes
}

/// Outward/inward Numerov shot at energy E < 0; returns interior nodes up to
/// the matching index and the Wronskian mismatch there.
fn shoot(
    mu: f64,
    pot: &PairPotential,
    e: f64,
    h: f64,
    r_match: f64,
    r_max: f64,
) -> (usize, f64) {
    let coef = 2.0 * mu / (HBAR * HBAR);
    let f = |r: f64| coef * (pot.value(r) - e);
    let m = (r_match / h).round() as usize;
    let n = ((r_max / h).ceil() as usize).max(m + 8);

    // outward sweep up to u(m+1)
    let mut u_prev = 0.0_f64;
    let mut u = h + f(0.0) * h * h * h / 6.0;
    let mut f_prev = f(0.0);
    let mut f_cur = f(h);
    let mut nodes = 0usize;
    let mut last_sign = 1.0_f64;
    let mut u_m = 0.0_f64;
    let mut u_m1 = 0.0_f64;
    for i in 1..=m {
        let r_next = (i + 1) as f64 * h;
        let f_next = f(r_next);
        let u_next = (2.0 * (1.0 + 5.0 * h * h * f_cur / 12.0) * u
            - (1.0 - h * h * f_prev / 12.0) * u_prev)
            / (1.0 - h * h * f_next / 12.0);
        let sign = if u_next > 0.0 {
            1.0
        } else if u_next < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 && sign != last_sign && i < m {
            nodes += 1;
            last_sign = sign;
        }
        if i == m - 1 {
            u_m = u_next;
        }
        if i == m {
            u_m1 = u_next;
        }
        u_prev = u;
        u = u_next;
        f_prev = f_cur;
        f_cur = f_next;
        if u.abs() > 1e250 {
            u_prev /= 1e250;
            u /= 1e250;
            u_m /= 1e250;
            u_m1 /= 1e250;
        }
    }

    // inward sweep from the free exponential tail down to v(m)
    let kappa = (-2.0 * mu * e).sqrt() / HBAR;
    let mut v_next = 1e-250_f64; // arbitrary tail scale
    let mut v = v_next * (kappa * h).exp();
    let r_n = n as f64 * h;
    let mut f_next_in = f(r_n);
    let mut f_cur_in = f(r_n - h);
    let mut v_m = 0.0_f64;
    let mut v_m1 = 0.0_f64;
    for i in (m..=n - 2).rev() {
        let r_prev = i as f64 * h;
        let f_prev_in = f(r_prev);
        let v_prev = (2.0 * (1.0 + 5.0 * h * h * f_cur_in / 12.0) * v
            - (1.0 - h * h * f_next_in / 12.0) * v_next)
            / (1.0 - h * h * f_prev_in / 12.0);
        if i == m + 1 {
            v_m1 = v_prev;
        }
        if i == m {
            v_m = v_prev;
        }
        v_next = v;
        v = v_prev;
        f_next_in = f_cur_in;
        f_cur_in = f_prev_in;
        if v.abs() > 1e250 {
            v_next /= 1e250;
            v /= 1e250;
            v_m /= 1e250;
            v_m1 /= 1e250;
        }
    }

    // grid-value matching over the SAME interval [m, m+1] on both sides (no
    // derivative stencil, so the mismatch keeps the full Numerov order):
    // proportional solutions have u_{m+1} v_m − u_m v_{m+1} = 0
    let norm = (u_m.abs() * v_m.abs()).max(1e-300);
    let mismatch = (u_m1 * v_m - u_m * v_m1) / norm;
    (nodes, mismatch)
}

fn matching_radius(pot: &PairPotential, e: f64) -> f64 {
    let w = pot.width_sq().sqrt();
    let depth = pot.v0.abs().max(1e-300);
    let ratio = (depth / e.abs()).max(1.0);
    let r_turn = w * ratio.ln().sqrt();
    (1.2 * r_turn).max(pot.b)
}

/// Bound-state energies at fixed depth, deepest first, grid-converged to
/// 1e−9 relative via Richardson over a grid halving.
pub fn bound_energies(
    mu: f64,
    pot: &PairPotential,
    cfg: &RadialConfig,
) -> Result<Vec<f64>, RadialError> {
    cfg.validate()?;
    let count = bound_count(mu, pot, cfg);
    let mut result = Vec::with_capacity(count);
    // deep wells oscillate fast; keep at least ~80 points per local wavelength
    let lambda_min =
        2.0 * core::f64::consts::PI * HBAR / (2.0 * mu * pot.v0.abs()).sqrt().max(1e-300);
    for state in 0..count {
        let mut h0 = (cfg.step_over_b * pot.b).min(lambda_min / 80.0);
        let mut solved = None;
        for _ in 0..4 {
            let e_h = solve_state(mu, pot, state, h0)?;
            let e_h2 = solve_state(mu, pot, state, h0 / 2.0)?;
            let extrapolated = (16.0 * e_h2 - e_h) / 15.0;
            if (extrapolated - e_h2).abs() <= 1e-9 * e_h2.abs() {
                solved = Some(extrapolated);
                break;
            }
            h0 /= 2.0; // marginal states: refine until the gate holds
        }
        match solved {
            Some(e) => result.push(e),
            None => {
                return Err(RadialError::NonConverged(format!(
                    "bound state {state}: grid refinement stalled above 1e-9 relative"
                )))
            }
        }
    }
    Ok(result)
}

/// Locate one eigenvalue at fixed grid step: bracket by node count, then
/// bisect the Wronskian sign change.
fn solve_state(
    mu: f64,
    pot: &PairPotential,
    state: usize,
    h: f64,
) -> Result<f64, RadialError> {
    let b = pot.b;
    let e_bottom = -pot.v0.abs() * (1.0 - 1e-12);
    // the node of a marginally excited shot sits out in the tail, so node
    // counting must cover the decay length too; a coarse grid keeps it cheap
    let nodes_at = |e: f64| {
        let h_c = b / 200.0;
        let r_m = matching_radius(pot, e);
        let kappa = (-2.0 * mu * e).sqrt() / HBAR;
        let r_max = (18.0 / kappa).max(r_m + 3.0 * b).min(2e6 * h_c);
        count_nodes_outward(mu, pot, e, h_c, r_max)
    };
    let shoot_at = |e: f64| {
        let r_m = matching_radius(pot, e);
        // the inward sweep starts from the exact free exponential, so it only
        // has to begin where V is negligible against |E| — a log-small radius
        // — not at the decay length; short grids keep roundoff far below the
        // matching slope
        let w = pot.width_sq().sqrt();
        let r_free = w * ((pot.v0.abs() / e.abs()).ln().max(0.0) + 33.0).sqrt();
        let r_max = r_free.max(r_m + 2.0 * b);
        shoot(mu, pot, e, h, r_m, r_max)
    };

    // node count is monotone in E: nodes(E) = number of states below E
    let mut lo = e_bottom; // nodes ≤ state here
    let mut hi = -1e-13 * pot.v0.abs(); // nodes ≥ state+1 here (state exists)
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-3 * hi.abs().max(1e-12) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if nodes_at(mid) > state {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let (_, mut w_lo) = shoot_at(lo);
    let (_, w_hi) = shoot_at(hi);
    if w_lo * w_hi > 0.0 {
        // widen downward a touch; the transversal crossing is just below
        let mut widened = lo - 0.05 * (hi - lo).abs();
        let mut tries = 0;
        loop {
            let (_, w) = shoot_at(widened);
            if w * w_hi < 0.0 {
                lo = widened;
                w_lo = w;
                break;
            }
            widened -= 0.1 * (hi - lo).abs();
            tries += 1;
            if tries > 20 || widened < e_bottom {
                return Err(RadialError::NoBracket(format!(
                    "no Wronskian sign change around state {state}"
                )));
            }
        }
    }
    let mut w_sign = w_lo.signum();
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (_, w) = shoot_at(mid);
        if w.signum() == w_sign {
            lo = mid;
            w_sign = w.signum();
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-13 * hi.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Full two-body summary: scattering length plus spectrum.
pub fn two_body(
    mu: f64,
    pot: &PairPotential,
    cfg: &RadialConfig,
) -> Result<TwoBodyResult, RadialError> {
    let mut result = scattering_length(mu, pot, cfg)?;
    result.bound_energies = bound_energies(mu, pot, cfg)?;
    result.node_count = result.bound_energies.len();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::WidthConvention;
    use approx::assert_relative_eq;

    fn gauss(v0: f64) -> PairPotential {
        PairPotential::new(v0, 1.0, WidthConvention::R2OverB2)
    }

    const MU: f64 = 0.5; // equal unit masses

    #[test]
    fn weak_potential_matches_born_approximation() {
        // a_Born = (2μ/ħ²) ∫ V r² dr = (2μ/ħ²) V0 √π w³ / 4
        let v0 = -1e-3;
        let pot = gauss(v0);
        let a = scattering_length(MU, &pot, &RadialConfig::default()).unwrap().a;
        let born = 2.0 * MU * v0 * core::f64::consts::PI.sqrt() / 4.0;
        assert_relative_eq!(a, born, max_relative = 5e-3);
    }

    #[test]
    fn critical_depth_of_the_gaussian_well() {
        let cfg = RadialConfig::default();
        let v_c = critical_strength(1, MU, &gauss(-1.0), &cfg).unwrap();
        // dimensionless critical coupling 2μ|V0|w²/ħ² for a Gaussian well
        let g = 2.0 * MU * v_c.abs();
        assert!((g - 2.684).abs() < 1e-3, "critical coupling {g}, expected 2.684(1)");
        // the same physical depth in the half-exponent convention
        let half = PairPotential::new(-1.0, 1.0, WidthConvention::R2Over2B2);
        let v_c_half = critical_strength(1, MU, &half, &cfg).unwrap();
        assert_relative_eq!(v_c_half, v_c / 2.0, max_relative = 5e-6);
    }

    #[test]
    fn scattering_length_signs_around_threshold() {
        let cfg = RadialConfig::default();
        let below = scattering_length(MU, &gauss(-2.0), &cfg).unwrap();
        assert!(below.a < 0.0 && below.node_count == 0);
        let above = scattering_length(MU, &gauss(-3.0), &cfg).unwrap();
        assert!(above.a > 0.0 && above.node_count == 1);
        assert!(above.a > 2.0, "barely bound state should have a large positive a");
    }

    #[test]
    fn bound_count_grows_with_depth() {
        let cfg = RadialConfig::default();
        let mut last = 0;
        for v0 in [-1.0, -2.7, -6.0, -12.0, -20.0, -35.0] {
            let count = bound_count(MU, &gauss(v0), &cfg);
            assert!(count >= last, "count dropped from {last} to {count} at {v0}");
            last = count;
        }
        assert!(last >= 2);
    }

    #[test]
    fn deep_well_energies_approach_the_oscillator_limit() {
        // V ≈ V0 + |V0| r²/w² − |V0| r⁴/(2w⁴) near the origin, so
        // E₀ ≈ V0 + (3/2) ħω − (|V0|/2)(15/4)σ⁴ with ω = √(2|V0|/(μ w²)),
        // σ² = ħ/(μω)
        let v0 = -500.0;
        let cfg = RadialConfig::default();
        let energies = bound_energies(MU, &gauss(v0), &cfg).unwrap();
        let omega = (2.0 * v0.abs() / MU).sqrt();
        let sigma_sq = 1.0 / (MU * omega);
        let expected = v0 + 1.5 * omega - 0.5 * v0.abs() * 3.75 * sigma_sq * sigma_sq;
        assert_relative_eq!(energies[0], expected, max_relative = 1e-3);
    }

    #[test]
    fn shallow_dimer_obeys_the_universal_binding_relation() {
        // B ≈ ħ²/(2μa²) up to effective-range corrections
        let cfg = RadialConfig::default();
        let v0 = strength_for_scattering_length(20.0, 1, MU, &gauss(-1.0), &cfg).unwrap();
        let pot = gauss(v0);
        let energies = bound_energies(MU, &pot, &cfg).unwrap();
        assert_eq!(energies.len(), 1);
        let universal = -1.0 / (2.0 * MU * 20.0 * 20.0);
        assert_relative_eq!(energies[0], universal, max_relative = 0.15);
    }

    #[test]
    fn strength_round_trips_through_the_scattering_length() {
        let cfg = RadialConfig::default();
        // positive scattering lengths live on the one-bound-state branch
        for (target, branch) in
            [(3.0, 1), (5.0, 1), (20.0, 1), (-4.395, 0), (-2.0, 0)]
        {
            let v0 = strength_for_scattering_length(target, branch, MU, &gauss(-1.0), &cfg)
                .unwrap();
            let back = scattering_length(MU, &gauss(v0), &cfg).unwrap().a;
            assert!(
                (back - target).abs() <= 1e-7 * target.abs(),
                "target {target}, got {back}"
            );
        }
    }

    #[test]
    fn unitarity_sentinel_returns_the_branch_boundary() {
        let cfg = RadialConfig::default();
        let v_inf =
            strength_for_scattering_length(f64::INFINITY, 0, MU, &gauss(-1.0), &cfg).unwrap();
        let v_c = critical_strength_with_tol(1, MU, &gauss(-1.0), &cfg, 1e-9).unwrap();
        assert_relative_eq!(v_inf, v_c, max_relative = 1e-9);
        let near = scattering_length(MU, &gauss(v_inf * (1.0 + 1e-7)), &cfg).unwrap();
        assert!(near.a.abs() > 1e4, "just past unitarity |a| should be huge");
    }

    #[test]
    fn diverged_flag_at_unitarity() {
        let cfg = RadialConfig::default();
        let v_inf = strength_for_scattering_length(f64::INFINITY, 0, MU, &gauss(-1.0), &cfg)
            .unwrap();
        let result = scattering_length(MU, &gauss(v_inf), &cfg).unwrap();
        assert!(result.diverged || result.a.abs() > 1e6);
    }

    #[test]
    fn config_guards() {
        let mut cfg = RadialConfig::default();
        cfg.r_max_over_b = 10.0;
        assert!(scattering_length(MU, &gauss(-1.0), &cfg).is_err());
        let mut cfg = RadialConfig::default();
        cfg.step_over_b = 1.0 / 100.0;
        assert!(scattering_length(MU, &gauss(-1.0), &cfg).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            /// Deeper wells never lose bound states.
            #[test]
            fn monotone_bound_count(v0 in -30.0f64..-0.1) {
                let cfg = RadialConfig::default();
                let shallow = bound_count(MU, &gauss(v0 * 0.9), &cfg);
                let deep = bound_count(MU, &gauss(v0), &cfg);
                prop_assert!(deep >= shallow);
            }

            /// Within the zero-bound-state branch, a is negative and decreases
            /// with depth.
            #[test]
            fn scattering_length_decreases_on_first_branch(
                v0 in -2.2f64..-0.3,
                delta in 0.05f64..0.3,
            ) {
                let cfg = RadialConfig::default();
                let a1 = scattering_length(MU, &gauss(v0), &cfg).unwrap().a;
                let a2 = scattering_length(MU, &gauss(v0 - delta), &cfg).unwrap().a;
                prop_assert!(a1 < 0.0);
                if a2 < 0.0 {
                    prop_assert!(a2 < a1);
                }
            }
        }
    }
}
