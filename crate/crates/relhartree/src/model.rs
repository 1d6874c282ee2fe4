//! Two-component model layer: coupling parameters, polynomial trapping
//! potentials, the constrained energy with its gradient, and the closed-form
//! constants that govern existence thresholds and concentration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    apply_multiplier, coulomb_bilinear, half_lap_form, kinetic_form, GridSpec, RealField, Symbol,
};

/// Coupling strengths and the relativistic mass parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Self-attraction of component 1.
    pub a1: f64,
    /// Self-attraction of component 2.
    pub a2: f64,
    /// Inter-component attraction.
    pub beta: f64,
    /// Mass in the kinetic symbol sqrt(|2 pi s|^2 + m^2).
    pub m: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.a1) && ok(self.a2) && ok(self.beta) && ok(self.m)) {
            return Err(Error::Param(format!(
                "couplings and mass must be finite and nonnegative, got \
                 a1 = {}, a2 = {}, beta = {}, m = {}",
                self.a1, self.a2, self.beta, self.m
            )));
        }
        Ok(())
    }

    /// Same parameters with the component roles exchanged.
    pub fn swapped(&self) -> ModelParams {
        ModelParams {
            a1: self.a2,
            a2: self.a1,
            beta: self.beta,
            m: self.m,
        }
    }
}

/// One factor of a product-form trapping potential: factor * |x - center|^exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTerm {
    pub center: [f64; 3],
    pub exponent: f64,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_factor() -> f64 {
    1.0
}

/// Product of power-law wells; an empty list means no potential (V = 0).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PotentialSpec {
    pub terms: Vec<PotentialTerm>,
}

impl PotentialSpec {
    pub fn new(terms: Vec<PotentialTerm>) -> Result<Self> {
        let spec = PotentialSpec { terms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !t.center.iter().all(|c| c.is_finite()) {
                return Err(Error::Param(format!("potential center {:?} not finite", t.center)));
            }
            if !(t.exponent.is_finite() && t.exponent >= 0.0) {
                return Err(Error::Param(format!(
                    "potential exponent {} must be finite and >= 0",
                    t.exponent
                )));
            }
            if !(t.factor.is_finite() && t.factor > 0.0) {
                return Err(Error::Param(format!(
                    "potential factor {} must be finite and positive",
                    t.factor
                )));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Pointwise value: product over terms of factor * |x - center|^exponent.
    pub fn evaluate(&self, x: [f64; 3]) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let mut v = 1.0;
        for t in &self.terms {
            v *= t.factor * dist(x, t.center).powf(t.exponent);
        }
        v
    }

    /// Sampled on a grid; None when the potential is identically zero.
    pub fn field(&self, grid: GridSpec) -> Option<RealField> {
        if self.terms.is_empty() {
            return None;
        }
        Some(RealField::from_fn(grid, |x| self.evaluate(x)))
    }
}

fn dist(x: [f64; 3], c: [f64; 3]) -> f64 {
    let dx = x[0] - c[0];
    let dy = x[1] - c[1];
    let dz = x[2] - c[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Trapping potentials for both components, sampled once per grid.
#[derive(Clone, Debug, Default)]
pub struct Potentials {
    pub v1: Option<RealField>,
    pub v2: Option<RealField>,
}

impl Potentials {
    pub fn from_specs(spec1: &PotentialSpec, spec2: &PotentialSpec, grid: GridSpec) -> Potentials {
        Potentials {
            v1: spec1.field(grid),
            v2: spec2.field(grid),
        }
    }

    /// Potentials with the component roles exchanged.
    pub fn swapped(&self) -> Potentials {
        Potentials {
            v1: self.v2.clone(),
            v2: self.v1.clone(),
        }
    }

    pub(crate) fn check_grid(&self, grid: GridSpec) -> Result<()> {
        for v in [&self.v1, &self.v2].into_iter().flatten() {
            if v.grid() != grid {
                return Err(Error::Grid(
                    "potential sampled on a different grid than the state".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Two real components on a shared grid.
#[derive(Clone, Debug)]
pub struct State {
    u1: RealField,
    u2: RealField,
}

impl State {
    pub fn new(u1: RealField, u2: RealField) -> Result<State> {
        if u1.grid() != u2.grid() {
            return Err(Error::Grid("state components live on different grids".into()));
        }
        Ok(State { u1, u2 })
    }

    pub fn grid(&self) -> GridSpec {
        self.u1.grid()
    }

    pub fn u1(&self) -> &RealField {
        &self.u1
    }

    pub fn u2(&self) -> &RealField {
        &self.u2
    }

    pub fn into_components(self) -> (RealField, RealField) {
        (self.u1, self.u2)
    }

    pub fn mass_split(&self) -> (f64, f64) {
        (self.u1.mass(), self.u2.mass())
    }

    pub fn total_mass(&self) -> f64 {
        let (m1, m2) = self.mass_split();
        m1 + m2
    }

    /// Combined density u1^2 + u2^2.
    pub fn density(&self) -> RealField {
        let mut rho = component_density(&self.u1);
        let rho2 = component_density(&self.u2);
        rho.add_scaled(1.0, &rho2);
        rho
    }

    /// Scales both components by a common factor so the total mass hits the
    /// target; the mass ratio is preserved.
    pub fn renormalize(&mut self, target_total: f64) -> Result<()> {
        let total = self.total_mass();
        if !(total > 0.0) {
            return Err(Error::Param("cannot renormalize a zero state".into()));
        }
        if !(target_total > 0.0 && target_total.is_finite()) {
            return Err(Error::Param(format!("bad target mass {target_total}")));
        }
        let c = (target_total / total).sqrt();
        self.u1.scale(c);
        self.u2.scale(c);
        Ok(())
    }

    /// Projects both components to their absolute values.
    pub fn abs_in_place(&mut self) {
        self.u1.abs_in_place();
        self.u2.abs_in_place();
    }
}

fn component_density(u: &RealField) -> RealField {
    let vals: Vec<f64> = u.values().iter().map(|&v| v * v).collect();
    RealField::from_values(u.grid(), vals).expect("length matches grid")
}

/// Energy split into its quadratic and interaction pieces.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyParts {
    /// Kinetic form per component, with the model's mass parameter.
    pub kinetic: [f64; 2],
    /// Trap energy per component.
    pub potential: [f64; 2],
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    pub total: f64,
}

/// Total energy
///
///   sum_i [ kinetic(u_i, m) + int V_i u_i^2 ]
///     - (a1 D(u1^2,u1^2) + a2 D(u2^2,u2^2) + 2 beta D(u1^2,u2^2)) / 2.
///
/// The floating-point result is exactly invariant under exchanging the two
/// component roles (u1, a1, V1) <-> (u2, a2, V2).
pub fn energy(state: &State, params: &ModelParams, pots: &Potentials) -> Result<EnergyParts> {
    params.validate()?;
    pots.check_grid(state.grid())?;
    let t1 = kinetic_form(&state.u1, params.m);
    let t2 = kinetic_form(&state.u2, params.m);
    let p1 = trap_energy(&state.u1, pots.v1.as_ref());
    let p2 = trap_energy(&state.u2, pots.v2.as_ref());
    let rho1 = component_density(&state.u1);
    let rho2 = component_density(&state.u2);
    let d11 = coulomb_bilinear(&rho1, &rho1);
    let d22 = coulomb_bilinear(&rho2, &rho2);
    let d12 = coulomb_bilinear(&rho1, &rho2);
    // Summation order keeps the swap symmetry exact: each parenthesized pair
    // commutes when the roles are exchanged.
    let total =
        ((t1 + p1) + (t2 + p2)) - 0.5 * ((params.a1 * d11 + params.a2 * d22) + 2.0 * params.beta * d12);
    Ok(EnergyParts {
        kinetic: [t1, t2],
        potential: [p1, p2],
        d11,
        d22,
        d12,
        total,
    })
}

fn trap_energy(u: &RealField, v: Option<&RealField>) -> f64 {
    match v {
        None => 0.0,
        Some(v) => {
            let mut sum = 0.0;
            for (&uv, &vv) in u.values().iter().zip(v.values()) {
                sum += vv * uv * uv;
            }
            sum * u.grid().cell_volume()
        }
    }
}

/// Half the Frechet derivative of the energy:
///
///   g_i = sqrt(-Lap + m^2) u_i + V_i u_i - (a_i Phi_i + beta Phi_j) u_i,
///
/// where Phi_i is the truncated Coulomb potential of u_i^2.
pub fn gradient(state: &State, params: &ModelParams, pots: &Potentials) -> Result<(RealField, RealField)> {
    params.validate()?;
    pots.check_grid(state.grid())?;
    let kin = Symbol::Kinetic { m: params.m };
    let k1 = apply_multiplier(&state.u1, &kin)?;
    let k2 = apply_multiplier(&state.u2, &kin)?;
    let phi1 = crate::spectral::hartree_potential_raw(&component_density(&state.u1));
    let phi2 = crate::spectral::hartree_potential_raw(&component_density(&state.u2));
    let g1 = assemble_gradient(
        &state.u1,
        &k1,
        pots.v1.as_ref(),
        params.a1,
        &phi1,
        params.beta,
        &phi2,
    );
    let g2 = assemble_gradient(
        &state.u2,
        &k2,
        pots.v2.as_ref(),
        params.a2,
        &phi2,
        params.beta,
        &phi1,
    );
    Ok((g1, g2))
}

fn assemble_gradient(
    u: &RealField,
    ku: &RealField,
    v: Option<&RealField>,
    a_own: f64,
    phi_own: &RealField,
    beta: f64,
    phi_other: &RealField,
) -> RealField {
    let n = u.values().len();
    let uv = u.values();
    let kv = ku.values();
    let po = phi_own.values();
    let px = phi_other.values();
    let vv = v.map(|f| f.values());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let trap = vv.map_or(0.0, |s| s[i]);
        out.push(kv[i] + (trap - (a_own * po[i] + beta * px[i])) * uv[i]);
    }
    RealField::from_values(u.grid(), out).expect("length matches grid")
}

/// Rayleigh-type multiplier mu = (<g1, u1> + <g2, u2>) / total mass; for a
/// unit-mass state this is the Lagrange multiplier of the mass constraint.
pub fn lagrange_multiplier(state: &State, g1: &RealField, g2: &RealField) -> f64 {
    (g1.inner(&state.u1) + g2.inner(&state.u2)) / state.total_mass()
}

/// Joint L^2 norm of the projected gradient, sqrt(sum_i |g_i - mu u_i|^2).
pub fn residual_norm(state: &State, g1: &RealField, g2: &RealField, mu: f64) -> f64 {
    let mut r1 = g1.clone();
    r1.add_scaled(-mu, &state.u1);
    let mut r2 = g2.clone();
    r2.add_scaled(-mu, &state.u2);
    (r1.mass() + r2.mass()).sqrt()
}

fn check_subcritical(a1: f64, a2: f64, a_star: f64) -> Result<()> {
    if !(a_star.is_finite() && a_star > 0.0) {
        return Err(Error::Param(format!("critical constant {a_star} must be positive")));
    }
    for a in [a1, a2] {
        if !(a.is_finite() && a > 0.0 && a < a_star) {
            return Err(Error::Param(format!(
                "coupling {a} must lie strictly between 0 and the critical constant {a_star}"
            )));
        }
    }
    Ok(())
}

/// Collapse threshold for the cross coupling:
/// beta* = a* + sqrt((a* - a1)(a* - a2)), for 0 < a1, a2 < a*.
pub fn beta_star(a1: f64, a2: f64, a_star: f64) -> Result<f64> {
    check_subcritical(a1, a2, a_star)?;
    Ok(a_star + ((a_star - a1) * (a_star - a2)).sqrt())
}

/// Limiting mass fraction of component 1:
/// gamma = sqrt(a* - a2) / (sqrt(a* - a1) + sqrt(a* - a2)).
pub fn gamma(a1: f64, a2: f64, a_star: f64) -> Result<f64> {
    check_subcritical(a1, a2, a_star)?;
    let s1 = (a_star - a1).sqrt();
    let s2 = (a_star - a2).sqrt();
    Ok(s2 / (s1 + s2))
}

/// Predicted blow-up length scale at cross coupling beta* - beta_gap:
/// [2 gamma (1 - gamma) beta_gap / (q0 lambda0)]^(1/(q0+1)).
pub fn epsilon_prediction(gamma: f64, q0: f64, lambda0: f64, beta_gap: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Param(format!("mass fraction {gamma} must lie in (0, 1)")));
    }
    for (name, v) in [("q0", q0), ("lambda0", lambda0), ("beta gap", beta_gap)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Param(format!("{name} = {v} must be positive")));
        }
    }
    Ok((2.0 * gamma * (1.0 - gamma) * beta_gap / (q0 * lambda0)).powf(1.0 / (q0 + 1.0)))
}

/// Threshold gap beta* - beta at which the predicted blow-up scale equals
/// `eps`: the inverse of [`epsilon_prediction`] in its gap argument. Handy
/// for placing the first rung of a sweep at a scale the grid resolves.
pub fn gap_for_scale(gamma: f64, q0: f64, lambda0: f64, eps: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Param(format!("mass fraction {gamma} must lie in (0, 1)")));
    }
    for (name, v) in [("q0", q0), ("lambda0", lambda0), ("eps", eps)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Param(format!("{name} = {v} must be positive")));
        }
    }
    Ok(q0 * lambda0 * eps.powf(q0 + 1.0) / (2.0 * gamma * (1.0 - gamma)))
}

/// Leading coefficient of the ground-state energy law near the threshold:
/// e ~ C (beta* - beta)^(q0/(q0+1)) with
/// C = (q0+1)/(q0 a*) (q0 lambda0)^(1/(q0+1)) [2 gamma (1-gamma)]^(q0/(q0+1)).
pub fn energy_rate_constant(gamma: f64, q0: f64, lambda0: f64, a_star: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Param(format!("mass fraction {gamma} must lie in (0, 1)")));
    }
    for (name, v) in [("q0", q0), ("lambda0", lambda0), ("a*", a_star)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Param(format!("{name} = {v} must be positive")));
        }
    }
    let p = 1.0 / (q0 + 1.0);
    Ok((q0 + 1.0) / (q0 * a_star)
        * (q0 * lambda0).powf(p)
        * (2.0 * gamma * (1.0 - gamma)).powf(q0 * p))
}

/// A trap zero shared (or not) by the two potentials.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterInfo {
    pub center: [f64; 3],
    /// Vanishing order of each potential at the center (0 when positive there).
    pub q: [f64; 2],
    /// min(q1, q2): order of the combined well.
    pub flatness: f64,
    /// Concentration weight; None unless both potentials vanish here.
    pub lambda: Option<f64>,
}

/// Which trap zeros can host the concentration, and at what rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterAnalysis {
    pub centers: Vec<CenterInfo>,
    /// Largest combined vanishing order among common zeros.
    pub q0: f64,
    /// Smallest weight among the flattest common zeros.
    pub lambda0: f64,
    /// The flattest common zeros with minimal weight: the admissible
    /// concentration points.
    pub selected: Vec<[f64; 3]>,
}

/// Classifies the common zeros of the two product potentials.
///
/// `moment` must return M(q) = int |y|^q Q(y)^2 dy for the scalar ground
/// state Q. The weight at a common zero x_j follows the local expansion
/// V_i(x) ~ r_i |x - x_j|^(q_ij):
///   q1 < q2:  lambda = gamma r1 M(q1)
///   q1 = q2:  lambda = (gamma r1 + (1-gamma) r2) M(q1)
///   q1 > q2:  lambda = (1-gamma) r2 M(q2).
pub fn analyze_centers(
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    gamma: f64,
    moment: impl Fn(f64) -> f64,
) -> Result<CenterAnalysis> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Param(format!("mass fraction {gamma} must lie in (0, 1)")));
    }
    v1.validate()?;
    v2.validate()?;
    const MATCH_TOL: f64 = 1e-9;
    // Distinct centers of genuine wells (exponent > 0), merged across species.
    let mut centers: Vec<[f64; 3]> = Vec::new();
    for t in v1.terms.iter().chain(v2.terms.iter()) {
        if t.exponent > 0.0 && !centers.iter().any(|c| dist(*c, t.center) < MATCH_TOL) {
            centers.push(t.center);
        }
    }
    if centers.is_empty() {
        return Err(Error::Param("potentials have no wells to concentrate at".into()));
    }

    // Local data at center c: vanishing order q_i and prefactor
    // r_i = lim V_i(x) / |x - c|^q_i, per species.
    let local = |spec: &PotentialSpec, c: [f64; 3]| -> (f64, f64) {
        let mut q = 0.0;
        let mut r = 1.0;
        for t in &spec.terms {
            if dist(t.center, c) < MATCH_TOL {
                q += t.exponent;
                r *= t.factor;
            } else {
                r *= t.factor * dist(c, t.center).powf(t.exponent);
            }
        }
        (q, r)
    };

    let mut infos = Vec::with_capacity(centers.len());
    for &c in &centers {
        let (q1, r1) = local(v1, c);
        let (q2, r2) = local(v2, c);
        let lambda = if q1 > 0.0 && q2 > 0.0 {
            Some(if q1 < q2 {
                gamma * r1 * moment(q1)
            } else if q1 > q2 {
                (1.0 - gamma) * r2 * moment(q2)
            } else {
                (gamma * r1 + (1.0 - gamma) * r2) * moment(q1)
            })
        } else {
            None
        };
        infos.push(CenterInfo {
            center: c,
            q: [q1, q2],
            flatness: q1.min(q2),
            lambda,
        });
    }

    let common: Vec<&CenterInfo> = infos.iter().filter(|i| i.lambda.is_some()).collect();
    if common.is_empty() {
        return Err(Error::Param("potentials share no common zero".into()));
    }
    let q0 = common.iter().map(|i| i.flatness).fold(f64::NEG_INFINITY, f64::max);
    let flattest: Vec<&&CenterInfo> = common.iter().filter(|i| i.flatness > q0 - 1e-9).collect();
    let lambda0 = flattest
        .iter()
        .map(|i| i.lambda.unwrap())
        .fold(f64::INFINITY, f64::min);
    let selected = flattest
        .iter()
        .filter(|i| i.lambda.unwrap() <= lambda0 * (1.0 + 1e-9))
        .map(|i| i.center)
        .collect();
    Ok(CenterAnalysis {
        centers: infos,
        q0,
        lambda0,
        selected,
    })
}

/// Two-component interpolation quotient
///
///   (sum_i |(-Lap)^{1/4} u_i|^2) (sum_i |u_i|^2) / D(rho, rho),
///
/// rho = u1^2 + u2^2. Bounded below by half the critical constant; the bound
/// is attained exactly on split-and-scaled copies of the optimizer.
pub fn gn_quotient(state: &State) -> Result<f64> {
    let rho = state.density();
    let d = coulomb_bilinear(&rho, &rho);
    if !(d > 0.0) {
        return Err(Error::Param("quotient undefined for a zero state".into()));
    }
    let t = half_lap_form(&state.u1) + half_lap_form(&state.u2);
    Ok(t * state.total_mass() / d)
}
