//! Constrained minimization of the two-component energy on the unit-mass
//! sphere, plus the rescaled trial family used to certify parameter regimes
//! where the energy is unbounded below.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::GroundState;
use crate::model::{energy, ModelParams, PotentialSpec, Potentials, State};
use crate::spectral::{pair_forward, GridSpec, PairSpectrum, RealField, Symbol};

/// Knobs for the projected, preconditioned descent.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Convergence threshold on |grad E - mu u| in L^2 (unit total mass).
    pub tol_residual: f64,
    /// Initial line-search step.
    pub step0: f64,
    /// Seed for the random component of the default initial state.
    pub seed: u64,
    /// Relative amplitude of the seeded perturbation.
    pub noise: f64,
    /// Abort when the energy falls below this floor: the parameters are
    /// then outside the regime where a minimizer exists.
    pub energy_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 8000,
            tol_residual: 1e-6,
            step0: 0.5,
            seed: 0,
            noise: 1e-3,
            energy_floor: -100.0,
        }
    }
}

/// Converged minimizer with its certification data.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub state: State,
    pub energy: f64,
    /// Kinetic forms (mass term included) per component.
    pub kinetic: [f64; 2],
    /// Trap terms per component.
    pub potential: [f64; 2],
    /// Interaction bilinears: D(rho1, rho1), D(rho2, rho2), D(rho1, rho2).
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    pub mu: f64,
    pub residual: f64,
    pub masses: [f64; 2],
    /// Concentration length: inverse of the total half-Laplacian form.
    pub eps_beta: f64,
    /// Sub-grid refined global maximum location per component.
    pub maxima: [[f64; 3]; 2],
    pub iterations: usize,
    /// (energy, residual) after each iteration.
    pub history: Vec<(f64, f64)>,
    pub boundary_mass: f64,
    pub warnings: Vec<String>,
}

/// Fused evaluation of the energy pieces, two packed transforms per call.
/// The spectra are retained so the gradient step can reuse them.
struct Eval {
    su: PairSpectrum,
    srho: PairSpectrum,
    rho: (RealField, RealField),
    energy: f64,
}

fn eval_state(state: &State, params: &ModelParams, pots: &Potentials) -> Result<Eval> {
    let grid = state.grid();
    let sq = |u: &RealField| {
        RealField::from_values(grid, u.values().iter().map(|v| v * v).collect())
    };
    let rho1 = sq(state.u1())?;
    let rho2 = sq(state.u2())?;
    let su = pair_forward(state.u1(), state.u2());
    let srho = pair_forward(&rho1, &rho2);
    let (t1, t2, _) = su.forms(&Symbol::Kinetic { m: params.m })?;
    let (d11, d22, d12) = srho.forms(&Symbol::CoulombTruncated)?;
    let dot = |v: Option<&RealField>, rho: &RealField| v.map_or(0.0, |f| f.inner(rho));
    let p1 = dot(pots.v1.as_ref(), &rho1);
    let p2 = dot(pots.v2.as_ref(), &rho2);
    let energy = ((t1 + p1) + (t2 + p2))
        - 0.5 * ((params.a1 * d11 + params.a2 * d22) + 2.0 * params.beta * d12);
    Ok(Eval {
        su,
        srho,
        rho: (rho1, rho2),
        energy,
    })
}

/// Half Frechet derivative fields g_i = K_m u_i + (V_i - a_i Phi_i - beta
/// Phi_j) u_i, matching the public `gradient` up to packed-FFT rounding.
fn fused_gradient(
    state: &State,
    params: &ModelParams,
    pots: &Potentials,
    ev: &Eval,
) -> Result<(RealField, RealField)> {
    let (ku1, ku2) = ev.su.apply(&Symbol::Kinetic { m: params.m })?;
    let (phi1, phi2) = ev.srho.apply(&Symbol::CoulombTruncated)?;
    let grid = state.grid();
    let build = |ku: &RealField,
                 u: &RealField,
                 v: Option<&RealField>,
                 own: &RealField,
                 other: &RealField,
                 a_own: f64|
     -> Result<RealField> {
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| {
                let vv = v.map_or(0.0, |f| f.values()[i]);
                ku.values()[i]
                    + (vv - a_own * own.values()[i] - params.beta * other.values()[i])
                        * u.values()[i]
            })
            .collect();
        RealField::from_values(grid, vals)
    };
    let g1 = build(&ku1, state.u1(), pots.v1.as_ref(), &phi1, &phi2, params.a1)?;
    let g2 = build(&ku2, state.u2(), pots.v2.as_ref(), &phi2, &phi1, params.a2)?;
    Ok((g1, g2))
}

/// Minimizes the energy over states of unit total mass.
///
/// Projected preconditioned gradient descent with backtracking: directions
/// are smoothed by (K_m + 1)^{-1}, projected onto the mass-sphere tangent,
/// and steps are retracted by renormalization. Supply `init` to warm-start
/// a continuation sweep; otherwise a seeded near-Gaussian split is used.
pub fn minimize(
    grid: GridSpec,
    params: &ModelParams,
    pots: &Potentials,
    config: &SolverConfig,
    init: Option<State>,
) -> Result<SolveReport> {
    params.validate()?;
    pots.check_grid(grid)?;
    if config.max_iter == 0 || !(config.tol_residual > 0.0) || !(config.step0 > 0.0) {
        return Err(Error::Param("solver config must be positive".into()));
    }

    let mut state = match init {
        Some(s) => {
            if s.grid() != grid {
                return Err(Error::Param("warm start lives on a different grid".into()));
            }
            let mut s = s;
            s.renormalize(1.0)?;
            s
        }
        None => default_init(grid, config)?,
    };

    let mut ev = eval_state(&state, params, pots)?;
    let mut tau = config.step0;
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut residual = f64::INFINITY;
    let mut mu = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    let mut stagnant = 0usize;

    while iterations < config.max_iter {
        iterations += 1;
        let (g1, g2) = fused_gradient(&state, params, pots, &ev)?;
        mu = (g1.inner(state.u1()) + g2.inner(state.u2())) / state.total_mass();
        let mut r1f = g1.clone();
        let mut r2f = g2.clone();
        r1f.add_scaled(-mu, state.u1());
        r2f.add_scaled(-mu, state.u2());
        residual = (r1f.l2_norm().powi(2) + r2f.l2_norm().powi(2)).sqrt();
        history.push((ev.energy, residual));
        if residual < config.tol_residual {
            converged = true;
            break;
        }
        if ev.energy < config.energy_floor {
            return Err(Error::NoConvergence {
                iterations,
                quantity: "energy (unbounded below at these parameters)",
                value: ev.energy,
            });
        }

        // Precondition the constrained residual r = g - mu u (not the raw
        // gradient: P does not commute with the tangent projection, and the
        // mu P u component would swamp P r near stationarity), then project
        // onto the tangent of the mass sphere.
        let sr = pair_forward(&r1f, &r2f);
        let (mut d1, mut d2) = sr.apply(&Symbol::Preconditioner { m: params.m })?;
        let along = (d1.inner(state.u1()) + d2.inner(state.u2())) / state.total_mass();
        d1.add_scaled(-along, state.u1());
        d2.add_scaled(-along, state.u2());
        // <r, d> = <r, P r> since <r, u> = 0: positive while r != 0.
        let descent = r1f.inner(&d1) + r2f.inner(&d2);
        if !(descent > 0.0) {
            return Err(Error::NoConvergence {
                iterations,
                quantity: "descent inner product",
                value: descent,
            });
        }

        let mut accepted = false;
        let before = ev.energy;
        while tau > 1e-16 {
            let mut w1 = state.u1().clone();
            let mut w2 = state.u2().clone();
            w1.add_scaled(-tau, &d1);
            w2.add_scaled(-tau, &d2);
            let mut trial = State::new(w1, w2)?;
            trial.renormalize(1.0)?;
            let trial_ev = eval_state(&trial, params, pots)?;
            if trial_ev.energy <= ev.energy - 1e-4 * tau * descent {
                state = trial;
                ev = trial_ev;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if accepted {
            tau = (tau * 1.3).min(4.0);
            // Guard against noise-level acceptances: once the energy stops
            // moving beyond evaluation rounding, further iterations cannot
            // help, whatever the line search claims.
            if before - ev.energy <= 1e-14 * (1.0 + before.abs()) {
                stagnant += 1;
            } else {
                stagnant = 0;
            }
            if stagnant >= 30 {
                if residual < 10.0 * config.tol_residual {
                    warnings.push(format!(
                        "energy stagnated at rounding level; accepting residual {residual:.2e}"
                    ));
                    converged = true;
                    break;
                }
                return Err(Error::NoConvergence {
                    iterations,
                    quantity: "energy progress (stagnated above tolerance)",
                    value: residual,
                });
            }
        } else {
            // The landscape is flat to rounding along every tried step.
            if residual < 10.0 * config.tol_residual {
                warnings.push(format!(
                    "line search stalled at residual {residual:.2e}; accepting"
                ));
                converged = true;
                break;
            }
            return Err(Error::NoConvergence {
                iterations,
                quantity: "line search step",
                value: residual,
            });
        }
        if iterations % 200 == 0 {
            debug!(
                "iter {iterations}: E = {:.10}, residual = {:.3e}, tau = {:.2e}",
                ev.energy, residual, tau
            );
        }
    }

    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            quantity: "gradient residual",
            value: residual,
        });
    }

    let halflap = {
        let (h1, h2, _) = ev.su.forms(&Symbol::HalfLap)?;
        h1 + h2
    };
    let eps_beta = 1.0 / halflap;
    let boundary_mass = boundary_density_fraction(&ev.rho.0, &ev.rho.1);
    if boundary_mass > 1e-3 {
        warnings.push(format!(
            "{:.3}% of the mass sits within 2h of the box boundary",
            100.0 * boundary_mass
        ));
    }
    if eps_beta < 2.0 * grid.spacing() {
        warnings.push(format!(
            "concentration length {eps_beta:.3e} is below 2h = {:.3e}; refine the grid",
            2.0 * grid.spacing()
        ));
    }
    // Certify with the plain per-field energy path; the fused packed path
    // must agree to rounding.
    let parts = energy(&state, params, pots)?;
    if (parts.total - ev.energy).abs() > 1e-9 * (1.0 + parts.total.abs()) {
        return Err(Error::Param(format!(
            "internal consistency: fused energy {:.15e} disagrees with reference {:.15e}",
            ev.energy, parts.total
        )));
    }
    let (m1, m2) = state.mass_split();
    let report = SolveReport {
        energy: parts.total,
        kinetic: parts.kinetic,
        potential: parts.potential,
        d11: parts.d11,
        d22: parts.d22,
        d12: parts.d12,
        mu,
        residual,
        masses: [m1, m2],
        eps_beta,
        maxima: [refined_argmax(state.u1()), refined_argmax(state.u2())],
        iterations,
        history,
        boundary_mass,
        warnings,
        state,
    };
    info!(
        "minimize: E = {:.8}, mu = {:.6}, eps = {:.4}, {} iterations, residual {:.2e}",
        report.energy, report.mu, report.eps_beta, report.iterations, report.residual
    );
    Ok(report)
}

fn default_init(grid: GridSpec, config: &SolverConfig) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut component = |width: f64| -> Result<RealField> {
        let mut vals = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let x = grid.position(idx);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let bump = (-0.5 * r2 / (width * width)).exp();
            let jitter = 1.0 + config.noise * rng.gen_range(-1.0..1.0);
            vals.push(bump * jitter);
        }
        RealField::from_values(grid, vals)
    };
    let mut state = State::new(component(1.5)?, component(1.6)?)?;
    state.renormalize(1.0)?;
    Ok(state)
}

/// Parabolic refinement of the global maximum of |f|, axis by axis.
pub fn refined_argmax(f: &RealField) -> [f64; 3] {
    let grid = f.grid();
    let (idx, _) = f.argmax();
    let (ix, iy, iz) = grid.unravel(idx);
    let n = grid.n();
    let val = |i: usize, j: usize, k: usize| f.values()[grid.index(i, j, k)].abs();
    let f0 = val(ix, iy, iz);
    let mut out = grid.position(idx);
    let axes = [ix, iy, iz];
    for (a, &center) in axes.iter().enumerate() {
        if center == 0 || center + 1 >= n {
            continue;
        }
        let mut lo = axes;
        let mut hi = axes;
        lo[a] = center - 1;
        hi[a] = center + 1;
        let fm = val(lo[0], lo[1], lo[2]);
        let fp = val(hi[0], hi[1], hi[2]);
        let denom = fm - 2.0 * f0 + fp;
        if denom < 0.0 {
            let delta = 0.5 * (fm - fp) / denom;
            out[a] += delta.clamp(-0.5, 0.5) * grid.spacing();
        }
    }
    out
}

fn boundary_density_fraction(rho1: &RealField, rho2: &RealField) -> f64 {
    let grid = rho1.grid();
    let n = grid.n();
    let near = |i: usize| i <= 1 || i + 2 >= n;
    let mut edge = 0.0;
    let mut total = 0.0;
    for idx in 0..grid.len() {
        let (ix, iy, iz) = grid.unravel(idx);
        let d = rho1.values()[idx] + rho2.values()[idx];
        total += d;
        if near(ix) || near(iy) || near(iz) {
            edge += d;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// Smooth radial cutoff: 1 inside the unit ball, 0 beyond radius 2, with a
/// quintic C^2 ramp between.
fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = 2.0 - r;
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Concentrated two-component trial built from the scalar ground state:
/// component i carries mass fraction theta_i, profile sigma^{3/2}
/// u(sigma (x - center)) with u the cut-off, renormalized ground state.
#[derive(Clone, Copy, Debug)]
pub struct TrialSpec {
    /// Mass fraction of the first component, in [0, 1].
    pub theta: f64,
    /// Concentration scale; larger is narrower.
    pub sigma: f64,
    pub center: [f64; 3],
}

/// Samples the trial pair on a solve grid, for warm starts. Total mass is
/// normalized to 1 with split (theta, 1 - theta).
pub fn make_trial(gs: &GroundState, grid: GridSpec, spec: &TrialSpec) -> Result<State> {
    if !(spec.theta >= 0.0 && spec.theta <= 1.0) {
        return Err(Error::Param(format!("theta {} outside [0, 1]", spec.theta)));
    }
    if !(spec.sigma > 0.0) {
        return Err(Error::Param(format!("sigma {} must be positive", spec.sigma)));
    }
    // Cutoff radius in physical units: clear of the wrap-around boundary.
    let rcut = 0.225 * grid.box_length();
    let mut vals = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let x = grid.position(idx);
        let mut y = [0.0; 3];
        let mut r2 = 0.0;
        for a in 0..3 {
            let d = x[a] - spec.center[a];
            y[a] = spec.sigma * d;
            r2 += d * d;
        }
        let env = cutoff(r2.sqrt() / rcut);
        vals.push(env * gs.q.sample_decay(y))
    }
    let base = RealField::from_values(grid, vals)?;
    let mass = base.mass();
    if !(mass > 0.0) {
        return Err(Error::Resolution(
            "trial profile vanished on the grid; sigma too large".into(),
        ));
    }
    let mut u1 = base.clone();
    u1.scale((spec.theta / mass).sqrt());
    let mut u2 = base;
    u2.scale(((1.0 - spec.theta) / mass).sqrt());
    State::new(u1, u2)
}

/// One point of the trial-energy curve, evaluated exactly in concentrated
/// coordinates on the ground state's own grid.
///
/// With u~ the cut-off, mass-one profile and s = sigma:
///
///   E(s) = s [ T_{m/s}(u~) - (a1 th^2 + a2 (1-th)^2 + 2 b th(1-th)) D(u~^2,u~^2)/2 ]
///        + th Int V1(c + y/s) u~^2 + (1-th) Int V2(c + y/s) u~^2,
///
/// which is the energy of the sampled pair with no discretization of the
/// concentration itself: every s is equally resolvable.
pub fn trial_energy(
    gs: &GroundState,
    params: &ModelParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    spec: &TrialSpec,
) -> Result<f64> {
    params.validate()?;
    if !(spec.theta >= 0.0 && spec.theta <= 1.0) {
        return Err(Error::Param(format!("theta {} outside [0, 1]", spec.theta)));
    }
    if !(spec.sigma > 0.0) {
        return Err(Error::Param(format!("sigma {} must be positive", spec.sigma)));
    }
    let grid = gs.q.grid();
    let mut vals = Vec::with_capacity(grid.len());
    for (idx, &qv) in gs.q.values().iter().enumerate() {
        let y = grid.position(idx);
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        vals.push(cutoff(r / spec.sigma) * qv);
    }
    let mut profile = RealField::from_values(grid, vals)?;
    let mass = profile.mass();
    if !(mass > 0.0) {
        return Err(Error::Param("cutoff annihilated the profile".into()));
    }
    profile.scale(mass.sqrt().recip());

    let spectrum = crate::spectral::pair_forward_with_square(&profile);
    let [(t, _, _), (_, d, _)] = spectrum.forms2(
        &Symbol::Kinetic { m: params.m / spec.sigma },
        &Symbol::CoulombTruncated,
    )?;
    let th = spec.theta;
    let couple = params.a1 * th * th
        + params.a2 * (1.0 - th) * (1.0 - th)
        + 2.0 * params.beta * th * (1.0 - th);

    let mut p1 = 0.0;
    let mut p2 = 0.0;
    if !(v1.is_zero() && v2.is_zero()) {
        for (idx, &pv) in profile.values().iter().enumerate() {
            let y = grid.position(idx);
            let x = [
                spec.center[0] + y[0] / spec.sigma,
                spec.center[1] + y[1] / spec.sigma,
                spec.center[2] + y[2] / spec.sigma,
            ];
            let w = pv * pv;
            p1 += v1.evaluate(x) * w;
            p2 += v2.evaluate(x) * w;
        }
        p1 *= grid.cell_volume();
        p2 *= grid.cell_volume();
    }
    Ok(spec.sigma * (t - 0.5 * couple * d) + th * p1 + (1.0 - th) * p2)
}

/// Trial-energy curve over a sigma ladder, with the verdict bits used by
/// the non-existence probes.
#[derive(Clone, Debug, Serialize)]
pub struct TrialCurve {
    pub theta: f64,
    pub center: [f64; 3],
    /// (sigma, energy), in increasing sigma.
    pub points: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    /// True when the curve drops below -10.
    pub unbounded_verdict: bool,
}

/// Evaluates the trial curve on a geometric sigma ladder.
pub fn trial_curve(
    gs: &GroundState,
    params: &ModelParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    theta: f64,
    center: [f64; 3],
    sigmas: &[f64],
) -> Result<TrialCurve> {
    if sigmas.len() < 2 {
        return Err(Error::Param("need at least two sigma values".into()));
    }
    let mut points = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let spec = TrialSpec { theta, sigma: s, center };
        points.push((s, trial_energy(gs, params, v1, v2, &spec)?));
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    let unbounded_verdict = points.iter().any(|&(_, e)| e < -10.0);
    debug!(
        "trial curve theta = {theta}: E({}) = {:.4} ... E({}) = {:.4}",
        points[0].0,
        points[0].1,
        points[points.len() - 1].0,
        points[points.len() - 1].1
    );
    Ok(TrialCurve {
        theta,
        center,
        points,
        strictly_decreasing,
        unbounded_verdict,
    })
}

/// Default sigma ladder for probes: geometric from 1 to 256.
pub fn default_sigma_ladder() -> Vec<f64> {
    (0..=8).map(|k| (1u64 << k) as f64).collect()
}
