//! Drives the inter-component attraction beta up a geometric ladder
//! toward the collapse threshold beta* and tracks how the minimizer
//! concentrates: the length scale eps(beta), the scaled interaction and
//! multiplier limits, and the measured blow-up power law against its
//! prediction.
//!
//! Run with: cargo run --release --example beta_sweep

use relhartree::asymptotics::{fit_blowup, sweep, SweepConfig};
use relhartree::ground::{solve_q, SolveOptions};
use relhartree::model::{gap_for_scale, PotentialSpec, PotentialTerm};
use relhartree::spectral::GridSpec;

fn main() -> relhartree::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let gs = solve_q(
        GridSpec::new(32, 18.0)?,
        &SolveOptions { max_iter: 600, tol: 1e-10, tail_guard: false },
    )?;
    let a_star = gs.a_star;

    // Shared harmonic trap; equal sub-critical self-couplings put the
    // balanced mass split gamma = 1/2 at the threshold.
    let grid = GridSpec::new(48, 12.0)?;
    let a1 = 0.5 * a_star;
    let a2 = 0.5 * a_star;
    let trap = PotentialSpec::new(vec![PotentialTerm {
        center: [0.0; 3],
        exponent: 2.0,
        factor: 0.06,
    }])?;

    // First rung calibrated so the concentration scale starts near 1.1;
    // each rung halves the distance to beta*.
    let lambda0 = 0.06 * gs.moment(2.0)?;
    let config = SweepConfig {
        gap0: gap_for_scale(0.5, 2.0, lambda0, 1.1)?,
        gap_ratio: 0.5,
        levels: 4,
        ..SweepConfig::default()
    };

    let t0 = std::time::Instant::now();
    let sw = sweep(&gs, grid, a1, a2, 0.0, &trap, &trap, &config)?;
    let dt = t0.elapsed().as_secs_f64();

    println!(
        "beta* = {:.6}, gamma = {:.3}, q0 = {}, lambda0 = {:.4}  ({:.0} s)",
        sw.beta_star, sw.gamma, sw.q0, sw.lambda0, dt
    );
    println!();
    println!("level  beta*-beta   energy      eps     eps_pred  eps*mu   d12*eps  resolved");
    for r in &sw.records {
        println!(
            "{:>5}  {:>9.2e}  {:>9.5}  {:>6.4}  {:>7.4}  {:>6.3}  {:>7.4}  {}",
            r.level,
            r.gap,
            r.energy,
            r.eps,
            r.eps_pred,
            r.eps * r.mu,
            r.d_scaled[2],
            if r.resolvable { "yes" } else { "no" }
        );
    }
    for w in &sw.warnings {
        println!("warning: {w}");
    }

    println!();
    match fit_blowup(&sw) {
        Ok(fit) => {
            println!("power-law fit over {} resolved rungs:", fit.records_used);
            println!(
                "  eps ~ gap^p      p = {:.4}  (predicted {:.4}, r2 = {:.5})",
                fit.slope, fit.slope_expected, fit.r2
            );
            println!("  amplitude ratio  {:.4}  (predicted 1)", fit.amplitude_ratio);
            println!(
                "  energy rate      {:.4}  (predicted {:.4})",
                fit.rate_constant, fit.rate_constant_expected
            );
        }
        Err(e) => println!("fit unavailable: {e}"),
    }
    Ok(())
}
