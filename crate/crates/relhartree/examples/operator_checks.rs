//! Numerical identities of the relativistic kinetic form
//! T_m(f) = <f, sqrt(-Lap + m^2) f> and the Coulomb pairing
//! D(f, g) = integral of f(x) g(y) / |x - y|:
//!
//!   1. modulus never raises the kinetic form:  T_m(|f|) <= T_m(f)
//!   2. T_m is translation invariant
//!   3. mass-preserving dilation f_lam(x) = lam^{3/2} f(lam x) maps
//!      T_m(f_lam) = lam * T_{m/lam}(f)
//!   4. D is positive semidefinite: D(r, r) >= 0 and the Cauchy-Schwarz
//!      bound D(r, s)^2 <= D(r, r) D(s, s)
//!   5. the potential field of the ground-state density obeys the Newton
//!      bound (|x|^{-1} conv Q^2)(x) <= mass / |x|.
//!
//! Run with: cargo run --release --example operator_checks

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relhartree::ground::{solve_q, SolveOptions};
use relhartree::spectral::{
    coulomb_bilinear, coulomb_potential, kinetic_form, translate, GridSpec, RealField,
};

/// Smooth sign-changing field: a handful of random Gaussian bumps.
fn random_bumps(grid: GridSpec, rng: &mut ChaCha8Rng) -> RealField {
    let half = 0.25 * grid.box_length();
    let bumps: Vec<([f64; 3], f64, f64)> = (0..6)
        .map(|_| {
            let z = [
                rng.gen_range(-half..half),
                rng.gen_range(-half..half),
                rng.gen_range(-half..half),
            ];
            (z, rng.gen_range(0.8..2.0), rng.gen_range(-1.0..1.0f64))
        })
        .collect();
    RealField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(z, w, c)| {
                let d2 = (x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + (x[2] - z[2]).powi(2);
                c * (-0.5 * d2 / (w * w)).exp()
            })
            .sum()
    })
}

fn main() -> relhartree::Result<()> {
    let grid = GridSpec::new(48, 24.0)?;
    let m = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // 1. Diamagnetic comparison on sign-changing fields.
    let mut worst = f64::INFINITY;
    for _ in 0..5 {
        let f = random_bumps(grid, &mut rng);
        let mut g = f.clone();
        g.abs_in_place();
        let (tf, tg) = (kinetic_form(&f, m), kinetic_form(&g, m));
        worst = worst.min((tf - tg) / tf.abs());
    }
    println!("1. modulus comparison   min margin (T(f)-T(|f|))/T(f) = {worst:+.3e}  (>= 0)");

    // 2. Translation invariance under whole-cell shifts.
    let f = random_bumps(grid, &mut rng);
    let shifted = translate(&f, [5, -3, 11]);
    let (a, b) = (kinetic_form(&f, m), kinetic_form(&shifted, m));
    println!(
        "2. translation          |T(f shifted) - T(f)| / T(f) = {:.3e}",
        (b - a).abs() / a
    );

    // 3. Scaling law, on analytic Gaussian samples so no interpolation
    //    error enters: both sides agree to spectral accuracy.
    let lam: f64 = 1.6;
    let gauss = RealField::from_fn(grid, |x| {
        (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    });
    let dilated = RealField::from_fn(grid, |x| {
        lam.powf(1.5) * (-0.5 * lam * lam * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    });
    let lhs = kinetic_form(&dilated, m);
    let rhs = lam * kinetic_form(&gauss, m / lam);
    println!(
        "3. dilation             T_m(f_lam) = {lhs:.8}, lam T_(m/lam)(f) = {rhs:.8}, \
         rel diff {:.3e}",
        (lhs - rhs).abs() / rhs
    );

    // 4. Positivity and Cauchy-Schwarz of the Coulomb pairing.
    let mut worst_cs = f64::NEG_INFINITY;
    let mut min_self = f64::INFINITY;
    for _ in 0..5 {
        let (f, g) = (random_bumps(grid, &mut rng), random_bumps(grid, &mut rng));
        let sq = |h: &RealField| {
            RealField::from_values(grid, h.values().iter().map(|v| v * v).collect()).unwrap()
        };
        let (r, s) = (sq(&f), sq(&g));
        let (drr, dss, drs) = (
            coulomb_bilinear(&r, &r),
            coulomb_bilinear(&s, &s),
            coulomb_bilinear(&r, &s),
        );
        min_self = min_self.min(drr.min(dss));
        worst_cs = worst_cs.max(drs / (drr * dss).sqrt());
    }
    println!(
        "4. Coulomb pairing      min D(r,r) = {min_self:.3e} (>= 0), \
         max D(r,s)/sqrt(D(r,r)D(s,s)) = {worst_cs:.4} (<= 1)"
    );

    // 5. Newton bound on the ground-state potential field, checked inside
    //    the region where the truncated kernel is free-space exact.
    let gs = solve_q(
        GridSpec::new(32, 18.0)?,
        &SolveOptions { max_iter: 600, tol: 1e-10, tail_guard: false },
    )?;
    let qgrid = gs.q.grid();
    let rho = RealField::from_values(qgrid, gs.q.values().iter().map(|v| v * v).collect())?;
    let phi = coulomb_potential(&rho);
    let mass = rho.integral();
    let mut max_ratio = f64::NEG_INFINITY;
    for (idx, &p) in phi.values().iter().enumerate() {
        let x = qgrid.position(idx);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r >= qgrid.spacing() && r <= 0.25 * qgrid.box_length() {
            max_ratio = max_ratio.max(p * r / mass);
        }
    }
    println!("5. Newton bound         max |x| phi(x) / mass = {max_ratio:.6}  (<= 1)");
    Ok(())
}
