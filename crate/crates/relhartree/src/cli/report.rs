//! Artifact files, the ground-state cache, and the folded pass/fail report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{BlowupFit, Sweep};
use crate::cli::config::GroundSection;
use crate::error::{Error, Result};
use crate::ground::GroundState;
use crate::spectral::{GridSpec, RealField};

pub const GROUND_JSON: &str = "ground.json";
pub const GROUND_FIELD: &str = "ground_field.bin";
pub const MINIMIZE_JSON: &str = "minimize.json";
pub const SWEEP_JSON: &str = "sweep.json";
pub const PROBE_JSON: &str = "probe.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const REPORT_MD: &str = "report.md";

/// Writes via a sibling temp file and rename, so readers never observe a
/// half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Ground-state certificate plus enough metadata to rebuild the field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundArtifact {
    /// The request this solve answered; the cache key.
    pub request: GroundSection,
    /// Delivered grid; the box differs from the request by the closing
    /// rescale factor.
    pub grid: GridSpec,
    pub a_star: f64,
    pub kinetic: f64,
    pub d_qq: f64,
    pub identity_defect: f64,
    pub pohozaev_defect: f64,
    pub el_residual: f64,
    pub decay_exponent: f64,
    pub decay_amplitude: f64,
    pub decay_r2: f64,
    pub core_radius: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

pub fn save_ground(dir: &Path, request: &GroundSection, gs: &GroundState) -> Result<()> {
    let art = GroundArtifact {
        request: *request,
        grid: gs.q.grid(),
        a_star: gs.a_star,
        kinetic: gs.kinetic,
        d_qq: gs.d_qq,
        identity_defect: gs.identity_defect,
        pohozaev_defect: gs.pohozaev_defect,
        el_residual: gs.el_residual,
        decay_exponent: gs.decay_exponent,
        decay_amplitude: gs.decay_amplitude,
        decay_r2: gs.decay_r2,
        core_radius: gs.core_radius,
        iterations: gs.iterations,
        history: gs.history.clone(),
    };
    let mut bytes = Vec::with_capacity(gs.q.values().len() * 8);
    for v in gs.q.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&dir.join(GROUND_FIELD), &bytes)?;
    write_json(&dir.join(GROUND_JSON), &art)
}

/// Loads a cached solve if one exists, regardless of what was requested.
pub fn load_ground(dir: &Path) -> Result<Option<(GroundArtifact, GroundState)>> {
    let meta_path = dir.join(GROUND_JSON);
    let field_path = dir.join(GROUND_FIELD);
    if !meta_path.exists() || !field_path.exists() {
        return Ok(None);
    }
    let art: GroundArtifact = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    let bytes = fs::read(&field_path)?;
    let n = art.grid.n();
    let expect = n * n * n * 8;
    if bytes.len() != expect {
        return Err(Error::Config(format!(
            "cached field {} holds {} bytes, expected {expect}; delete the \
             cache and re-run solve-q",
            field_path.display(),
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let q = RealField::from_values(art.grid, vals)?;
    let gs = GroundState {
        q,
        a_star: art.a_star,
        kinetic: art.kinetic,
        d_qq: art.d_qq,
        identity_defect: art.identity_defect,
        pohozaev_defect: art.pohozaev_defect,
        el_residual: art.el_residual,
        decay_exponent: art.decay_exponent,
        decay_amplitude: art.decay_amplitude,
        decay_r2: art.decay_r2,
        core_radius: art.core_radius,
        iterations: art.iterations,
        history: art.history.clone(),
    };
    Ok(Some((art, gs)))
}

/// One line of the folded report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Check {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut out = String::from(
        "level,beta,gap,energy,mu,eps,eps_pred,mass1,mass2,\
         d11_scaled,d22_scaled,d12_scaled,mu_scaled,center_split,\
         profile_dist1,profile_dist2,residual,iterations,resolvable\n",
    );
    for r in &sweep.records {
        out.push_str(&format!(
            "{},{:.9},{:.9e},{:.9e},{:.9e},{:.6e},{:.6e},{:.8},{:.8},\
             {:.6e},{:.6e},{:.6e},{:.6},{:.4e},{:.6e},{:.6e},{:.3e},{},{}\n",
            r.level,
            r.beta,
            r.gap,
            r.energy,
            r.mu,
            r.eps,
            r.eps_pred,
            r.masses[0],
            r.masses[1],
            r.d_scaled[0],
            r.d_scaled[1],
            r.d_scaled[2],
            r.mu_scaled,
            r.center_split,
            r.profile_dist[0],
            r.profile_dist[1],
            r.residual,
            r.iterations,
            r.resolvable,
        ));
    }
    out
}

fn rel_err(value: f64, expected: f64) -> f64 {
    (value - expected).abs() / expected.abs()
}

fn ground_checks(art: &GroundArtifact, checks: &mut Vec<Check>) {
    checks.push(Check::new(
        "ground/identity",
        art.identity_defect < 1e-6,
        format!("kinetic = mass = D/2 defect {:.3e} (want < 1e-6)", art.identity_defect),
    ));
    checks.push(Check::new(
        "ground/pohozaev",
        art.pohozaev_defect < 1e-6,
        format!("virial defect {:.3e} (want < 1e-6)", art.pohozaev_defect),
    ));
    checks.push(Check::new(
        "ground/el-residual",
        art.el_residual < 5e-3,
        format!("equation residual {:.3e} (want < 5e-3)", art.el_residual),
    ));
    checks.push(Check::new(
        "ground/decay",
        (-4.5..=-3.5).contains(&art.decay_exponent) && art.decay_r2 >= 0.98,
        format!(
            "tail exponent {:.3} (want in [-4.5, -3.5]), fit r2 {:.4} (want >= 0.98)",
            art.decay_exponent, art.decay_r2
        ),
    ));
}

/// Subset of the minimizer report that lands on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeArtifact {
    pub grid: GridSpec,
    pub params: crate::model::ModelParams,
    pub energy: f64,
    pub kinetic: [f64; 2],
    pub potential: [f64; 2],
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    pub mu: f64,
    pub residual: f64,
    pub tol_residual: f64,
    pub masses: [f64; 2],
    pub eps_beta: f64,
    pub maxima: [[f64; 3]; 2],
    pub iterations: usize,
    pub boundary_mass: f64,
    pub warnings: Vec<String>,
}

fn minimize_checks(art: &MinimizeArtifact, checks: &mut Vec<Check>) {
    checks.push(Check::new(
        "minimize/stationary",
        art.residual <= 10.0 * art.tol_residual,
        format!(
            "gradient residual {:.3e} against tolerance {:.1e}",
            art.residual, art.tol_residual
        ),
    ));
    checks.push(Check::new(
        "minimize/mass",
        (art.masses[0] + art.masses[1] - 1.0).abs() < 1e-9,
        format!("total mass 1 {:+.3e}", art.masses[0] + art.masses[1] - 1.0),
    ));
    checks.push(Check::new(
        "minimize/boundary",
        art.boundary_mass < 1e-2,
        format!("boundary mass fraction {:.3e} (want < 1e-2)", art.boundary_mass),
    ));
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepArtifact {
    pub sweep: Sweep,
    pub fit: Option<BlowupFit>,
    pub fit_error: Option<String>,
}

fn sweep_checks(art: &SweepArtifact, checks: &mut Vec<Check>) {
    let n_res = art.sweep.records.iter().filter(|r| r.resolvable).count();
    checks.push(Check::new(
        "sweep/resolvable",
        n_res >= 3,
        format!(
            "{n_res} of {} rungs resolve on the grid (want >= 3)",
            art.sweep.records.len()
        ),
    ));
    let decreasing = art
        .sweep
        .records
        .windows(2)
        .all(|w| w[1].energy < w[0].energy);
    checks.push(Check::new(
        "sweep/energy-decreasing",
        decreasing,
        "ground energy must drop toward the threshold".into(),
    ));
    match &art.fit {
        Some(fit) => {
            checks.push(Check::new(
                "sweep/scale-exponent",
                rel_err(fit.slope, fit.slope_expected) < 0.10,
                format!(
                    "d ln eps / d ln gap = {:.4} vs {:.4} (want within 10%)",
                    fit.slope, fit.slope_expected
                ),
            ));
            checks.push(Check::new(
                "sweep/scale-amplitude",
                (0.85..=1.15).contains(&fit.amplitude_ratio),
                format!(
                    "eps / eps_pred = {:.4} at the deepest resolvable rung \
                     (want in [0.85, 1.15])",
                    fit.amplitude_ratio
                ),
            ));
            checks.push(Check::new(
                "sweep/energy-rate",
                rel_err(fit.rate_constant, fit.rate_constant_expected) < 0.15,
                format!(
                    "energy / gap^(q0/(q0+1)) = {:.4} vs {:.4} (want within 15%)",
                    fit.rate_constant, fit.rate_constant_expected
                ),
            ));
        }
        None => checks.push(Check::new(
            "sweep/fit",
            false,
            art.fit_error
                .clone()
                .unwrap_or_else(|| "power-law fit missing".into()),
        )),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeArtifact {
    pub params: crate::model::ModelParams,
    pub theta: f64,
    pub center: [f64; 3],
    /// (sigma, energy) along the ladder.
    pub points: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    pub unbounded_verdict: bool,
}

fn probe_checks(art: &ProbeArtifact, checks: &mut Vec<Check>) {
    let last = art.points.last().map(|p| p.1).unwrap_or(f64::NAN);
    checks.push(Check::new(
        "probe/unbounded-below",
        art.strictly_decreasing && art.unbounded_verdict,
        format!(
            "trial energy strictly decreasing: {}, dives past -10: {} (last {:.3})",
            art.strictly_decreasing, art.unbounded_verdict, last
        ),
    ));
}

/// Folds every artifact in `dir` into summary.json and report.md and
/// returns the summary. Errors when the directory holds nothing to report.
pub fn generate(dir: &Path) -> Result<Summary> {
    let mut checks = Vec::new();
    let mut seen = 0;
    if let Ok(text) = fs::read_to_string(dir.join(GROUND_JSON)) {
        let art: GroundArtifact = serde_json::from_str(&text)?;
        ground_checks(&art, &mut checks);
        seen += 1;
    }
    if let Ok(text) = fs::read_to_string(dir.join(MINIMIZE_JSON)) {
        let art: MinimizeArtifact = serde_json::from_str(&text)?;
        minimize_checks(&art, &mut checks);
        seen += 1;
    }
    if let Ok(text) = fs::read_to_string(dir.join(SWEEP_JSON)) {
        let art: SweepArtifact = serde_json::from_str(&text)?;
        sweep_checks(&art, &mut checks);
        seen += 1;
    }
    if let Ok(text) = fs::read_to_string(dir.join(PROBE_JSON)) {
        let art: ProbeArtifact = serde_json::from_str(&text)?;
        probe_checks(&art, &mut checks);
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::Config(format!(
            "no artifacts found under {}; run solve-q, minimize, sweep, or \
             probe-nonexistence first",
            dir.display()
        )));
    }
    let summary = Summary {
        passed: checks.iter().all(|c| c.pass),
        checks,
    };
    write_json(&dir.join(SUMMARY_JSON), &summary)?;
    let mut md = String::from("# Run report\n\n| check | result | detail |\n|---|---|---|\n");
    for c in &summary.checks {
        md.push_str(&format!(
            "| {} | {} | {} |\n",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.detail
        ));
    }
    md.push_str(&format!(
        "\noverall: **{}**\n",
        if summary.passed { "pass" } else { "FAIL" }
    ));
    write_atomic(&dir.join(REPORT_MD), md.as_bytes())?;
    Ok(summary)
}
