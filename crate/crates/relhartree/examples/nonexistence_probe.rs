//! Shows that no minimizer exists once a coupling crosses the critical
//! constant: rescaled ground-state trials concentrated at scale 1/sigma
//! drive the constrained energy to -infinity as sigma grows.
//!
//! Three regimes are probed on the same sigma ladder:
//!   a1 > a*            (component 1 alone collapses, theta = 1)
//!   a2 > a*            (component 2 alone collapses, theta = 0)
//!   beta > beta*       (joint collapse at the balanced mass split)
//!
//! Run with: cargo run --release --example nonexistence_probe

use relhartree::ground::{solve_q, SolveOptions};
use relhartree::model::{beta_star, gamma, ModelParams, PotentialSpec, PotentialTerm};
use relhartree::solver::{default_sigma_ladder, trial_curve};
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
    println!("critical constant a* = {:.6}", a_star);

    // A confining trap does not rescue existence: the potential term grows
    // slower than the kinetic-interaction deficit diverges.
    let trap = PotentialSpec::new(vec![PotentialTerm {
        center: [0.0; 3],
        exponent: 2.0,
        factor: 0.05,
    }])?;
    let sigmas = default_sigma_ladder();

    let bstar = beta_star(0.5 * a_star, 0.5 * a_star, a_star)?;
    let cases: [(&str, ModelParams, f64); 3] = [
        ("a1 = 1.1 a*", ModelParams { a1: 1.1 * a_star, a2: 0.4 * a_star, beta: 0.0, m: 0.0 }, 1.0),
        ("a2 = 1.1 a*", ModelParams { a1: 0.4 * a_star, a2: 1.1 * a_star, beta: 0.0, m: 0.0 }, 0.0),
        (
            "beta = 1.1 beta*",
            ModelParams { a1: 0.5 * a_star, a2: 0.5 * a_star, beta: 1.1 * bstar, m: 0.0 },
            gamma(0.5 * a_star, 0.5 * a_star, a_star)?,
        ),
    ];

    for (label, params, theta) in cases {
        let curve = trial_curve(&gs, &params, &trap, &trap, theta, [0.0; 3], &sigmas)?;
        println!();
        println!("case {label}  (mass split theta = {theta:.3})");
        println!("  sigma      energy");
        for (s, e) in &curve.points {
            println!("  {s:>7.1}  {e:>12.4}");
        }
        println!(
            "  strictly decreasing: {}, dives below -10: {}",
            curve.strictly_decreasing, curve.unbounded_verdict
        );
    }
    Ok(())
}
