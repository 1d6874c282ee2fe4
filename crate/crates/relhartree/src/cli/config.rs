//! JSON run configurations. Unknown keys are rejected everywhere so a typo
//! fails the run instead of silently falling back to a default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::SolveOptions;
use crate::model::{ModelParams, PotentialSpec};
use crate::solver::SolverConfig;
use crate::spectral::GridSpec;

/// Top-level config: one optional section per subcommand, so a single file
/// can drive a whole pipeline (solve-q, then sweep, then report).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ground: Option<GroundSection>,
    pub minimize: Option<MinimizeSection>,
    pub sweep: Option<SweepSection>,
    pub probe: Option<ProbeSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Cheap structural validation of every present section: grids build,
    /// potential terms are sane, ladders are geometric. Anything that needs
    /// a solved ground state (relative couplings, center analysis) is
    /// checked when the command runs.
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.ground {
            g.validate()?;
        }
        if let Some(m) = &self.minimize {
            m.validate()?;
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some(p) = &self.probe {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub box_length: f64,
}

impl GridSection {
    pub fn build(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.box_length)
    }
}

/// Scalar ground-state solve request. Doubles as the cache key: a cached
/// solution is reused only when every field here matches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSection {
    pub grid: GridSection,
    #[serde(default = "default_ground_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_ground_tol")]
    pub tol: f64,
    #[serde(default = "default_true")]
    pub tail_guard: bool,
    /// Reuse a matching cached solve from the output directory.
    #[serde(default = "default_true")]
    pub cache: bool,
}

fn default_ground_max_iter() -> usize {
    SolveOptions::default().max_iter
}

fn default_ground_tol() -> f64 {
    SolveOptions::default().tol
}

fn default_true() -> bool {
    true
}

impl GroundSection {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            tail_guard: self.tail_guard,
        }
    }

    fn validate(&self) -> Result<()> {
        self.grid.build()?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!(
                "ground tolerance {} must be positive",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Couplings, either absolute or in units of the measured constants:
/// with `relative = true`, a1 and a2 multiply a* and beta multiplies
/// beta*(a1, a2). Relative couplings need a ground solve to resolve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsSection {
    pub a1: f64,
    pub a2: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub m: f64,
    #[serde(default)]
    pub relative: bool,
}

impl CouplingsSection {
    /// Resolves to absolute model parameters. `a_star` may be NaN when no
    /// ground state is available; relative couplings then fail loudly.
    pub fn resolve(&self, a_star: f64) -> Result<ModelParams> {
        let params = if self.relative {
            if !a_star.is_finite() {
                return Err(Error::Config(
                    "relative couplings need a ground solve; add a \"ground\" \
                     section or cache one with solve-q"
                        .into(),
                ));
            }
            let a1 = self.a1 * a_star;
            let a2 = self.a2 * a_star;
            let beta = if self.beta == 0.0 {
                0.0
            } else {
                self.beta * crate::model::beta_star(a1, a2, a_star)?
            };
            ModelParams {
                a1,
                a2,
                beta,
                m: self.m,
            }
        } else {
            ModelParams {
                a1: self.a1,
                a2: self.a2,
                beta: self.beta,
                m: self.m,
            }
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a1", self.a1),
            ("a2", self.a2),
            ("beta", self.beta),
            ("m", self.m),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "coupling {name} = {v} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

fn validate_traps(traps: &[PotentialSpec; 2]) -> Result<()> {
    traps[0].validate()?;
    traps[1].validate()?;
    Ok(())
}

/// Solver overrides; absent fields keep the library defaults.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iter: Option<usize>,
    pub tol_residual: Option<f64>,
    pub step0: Option<f64>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub energy_floor: Option<f64>,
}

impl SolverSection {
    pub fn build(&self, base: SolverConfig) -> SolverConfig {
        SolverConfig {
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            tol_residual: self.tol_residual.unwrap_or(base.tol_residual),
            step0: self.step0.unwrap_or(base.step0),
            seed: self.seed.unwrap_or(base.seed),
            noise: self.noise.unwrap_or(base.noise),
            energy_floor: self.energy_floor.unwrap_or(base.energy_floor),
        }
    }
}

/// Warm start shaped like the rescaled scalar profile.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSection {
    pub theta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub center: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeSection {
    pub grid: GridSection,
    pub couplings: CouplingsSection,
    /// Two product-form trapping potentials; empty lists mean no trap.
    #[serde(default)]
    pub traps: [PotentialSpec; 2],
    #[serde(default)]
    pub solver: SolverSection,
    /// Optional warm start; needs a ground solve.
    #[serde(default)]
    pub trial: Option<TrialSection>,
}

impl MinimizeSection {
    fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.couplings.validate()?;
        validate_traps(&self.traps)?;
        if let Some(t) = &self.trial {
            if !(t.sigma > 0.0 && (0.0..=1.0).contains(&t.theta)) {
                return Err(Error::Config(format!(
                    "trial needs sigma > 0 and theta in [0, 1], got sigma = {}, theta = {}",
                    t.sigma, t.theta
                )));
            }
        }
        Ok(())
    }
}

/// Geometric ladder of threshold gaps. Give exactly one of `gap0` (first
/// gap beta* - beta, absolute) or `first_scale` (the blow-up scale the
/// first rung should sit at; the gap is derived from the trap analysis).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    #[serde(default)]
    pub gap0: Option<f64>,
    #[serde(default)]
    pub first_scale: Option<f64>,
    #[serde(default = "default_gap_ratio")]
    pub gap_ratio: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_min_cells")]
    pub min_cells: f64,
}

fn default_gap_ratio() -> f64 {
    0.5
}

fn default_levels() -> usize {
    8
}

fn default_min_cells() -> f64 {
    2.5
}

impl LadderSection {
    fn validate(&self) -> Result<()> {
        match (self.gap0, self.first_scale) {
            (Some(_), Some(_)) | (None, None) => Err(Error::Config(
                "ladder needs exactly one of gap0 / first_scale".into(),
            )),
            (Some(g), None) if !(g > 0.0 && g.is_finite()) => Err(Error::Config(
                format!("ladder gap0 = {g} must be positive"),
            )),
            (None, Some(s)) if !(s > 0.0 && s.is_finite()) => Err(Error::Config(
                format!("ladder first_scale = {s} must be positive"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub grid: GridSection,
    /// The ladder chooses beta, so `couplings.beta` must stay 0 here.
    pub couplings: CouplingsSection,
    pub traps: [PotentialSpec; 2],
    pub ladder: LadderSection,
    #[serde(default)]
    pub solver: SolverSection,
}

impl SweepSection {
    fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.couplings.validate()?;
        if self.couplings.beta != 0.0 {
            return Err(Error::Config(
                "sweep sets beta from the ladder; leave couplings.beta at 0".into(),
            ));
        }
        validate_traps(&self.traps)?;
        self.ladder.validate()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub couplings: CouplingsSection,
    #[serde(default)]
    pub traps: [PotentialSpec; 2],
    /// Mass split of the diving trial family. Defaults to the natural
    /// choice for the supercritical direction: 1 when a1 > a*, 0 when
    /// a2 > a*, otherwise the split that maximizes the combined coupling.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub center: [f64; 3],
    /// Concentration ladder; defaults to powers of two up to 256.
    #[serde(default)]
    pub sigmas: Option<Vec<f64>>,
}

impl ProbeSection {
    fn validate(&self) -> Result<()> {
        self.couplings.validate()?;
        validate_traps(&self.traps)?;
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("theta = {t} outside [0, 1]")));
            }
        }
        if let Some(s) = &self.sigmas {
            if s.len() < 2 || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(
                    "sigmas must hold at least two positive values".into(),
                ));
            }
        }
        Ok(())
    }
}
