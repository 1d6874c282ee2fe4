//! Minimizes the two-component constrained energy below the existence
//! threshold and prints the certified minimizer: energy split, Lagrange
//! multiplier, per-component masses and peaks, and the inverse kinetic
//! length scale.
//!
//! The couplings sit at half the critical constant with a moderate
//! inter-component attraction, under a shared harmonic trap, so a bound
//! pair exists and the gradient flow converges to it.
//!
//! Run with: cargo run --release --example two_component_ground

use relhartree::ground::{solve_q, SolveOptions};
use relhartree::model::{beta_star, ModelParams, PotentialSpec, PotentialTerm, Potentials};
use relhartree::solver::{minimize, SolverConfig};
use relhartree::spectral::GridSpec;

fn harmonic(weight: f64) -> relhartree::Result<PotentialSpec> {
    PotentialSpec::new(vec![PotentialTerm {
        center: [0.0; 3],
        exponent: 2.0,
        factor: weight,
    }])
}

fn main() -> relhartree::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    // The scalar ground state calibrates the critical constant; couplings
    // below are expressed as fractions of it.
    let gs = solve_q(
        GridSpec::new(32, 18.0)?,
        &SolveOptions { max_iter: 600, tol: 1e-10, tail_guard: false },
    )?;
    let a_star = gs.a_star;

    let grid = GridSpec::new(32, 12.0)?;
    let params = ModelParams {
        a1: 0.5 * a_star,
        a2: 0.5 * a_star,
        beta: 0.5 * beta_star(0.5 * a_star, 0.5 * a_star, a_star)?,
        m: 0.0,
    };
    let v1 = harmonic(0.06)?;
    let v2 = harmonic(0.06)?;
    let pots = Potentials::from_specs(&v1, &v2, grid);
    let config = SolverConfig { tol_residual: 1e-6, ..SolverConfig::default() };

    let t0 = std::time::Instant::now();
    let report = minimize(grid, &params, &pots, &config, None)?;
    let dt = t0.elapsed().as_secs_f64();

    println!(
        "couplings             a1 = a2 = {:.4} (a*/2), beta = {:.4} (beta*/2)",
        params.a1, params.beta
    );
    println!("iterations            {} ({:.1} s)", report.iterations, dt);
    println!("residual              {:.2e}", report.residual);
    println!();
    println!("energy                {:.10}", report.energy);
    println!("  kinetic             {:.6}  {:.6}", report.kinetic[0], report.kinetic[1]);
    println!("  potential           {:.6}  {:.6}", report.potential[0], report.potential[1]);
    println!(
        "  interaction         d11 = {:.6}, d22 = {:.6}, d12 = {:.6}",
        report.d11, report.d22, report.d12
    );
    println!("multiplier mu         {:.6}", report.mu);
    println!("masses                {:.6} + {:.6} = 1", report.masses[0], report.masses[1]);
    println!("kinetic scale 1/eps   {:.4}", 1.0 / report.eps_beta);
    for (i, m) in report.maxima.iter().enumerate() {
        println!("peak of u{}            ({:+.3}, {:+.3}, {:+.3})", i + 1, m[0], m[1], m[2]);
    }
    println!("boundary mass         {:.2e}", report.boundary_mass);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
