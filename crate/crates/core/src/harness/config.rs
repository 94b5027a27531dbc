//! Experiment configuration files.
//!
//! A configuration is a JSON object with exactly three blocks, `model`,
//! `run` and `experiment`; unknown keys anywhere are rejected.
//!
//! ```json
//! {
//!   "model": {
//!     "n_modes": 32,
//!     "reaction": { "kind": "bounded", "amplitude": 0.5 },
//!     "diffusion": { "kind": "constant", "scales": { "power": { "amplitude": 1.0, "exponent": 1.0 } } }
//!   },
//!   "run": { "horizon": 0.5, "dt": 0.001, "members": 500, "seed": 7 },
//!   "experiment": { "kind": "contraction", "initial": { "kind": "mode", "k": 1, "amplitude": 1.0 },
//!                   "partner": { "kind": "zero" } }
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{InitialLaw, ModelSpec, TimeGrid};
use crate::noise::{DiffusionSpec, JumpProfile, JumpSpec, MarkMeasure};
use crate::spectral::{BoundedMap, ReactionSpec, SpectralField};
use crate::transport::LipschitzObservable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    pub experiment: ExperimentKind,
}

/// Per-mode coefficients `s_1, …, s_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeScales {
    Constant(f64),
    /// `s_k = amplitude · k^{−exponent}`.
    Power { amplitude: f64, exponent: f64 },
    /// Explicit list; shorter lists are padded with zeros.
    Values(Vec<f64>),
}

impl ModeScales {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        let v = match self {
            Self::Constant(c) => vec![*c; n],
            Self::Power { amplitude, exponent } => (1..=n).map(|k| amplitude * (k as f64).powf(-exponent)).collect(),
            Self::Values(vals) => {
                if vals.len() > n {
                    return Err(Error::Config(format!("{} values given for {n} modes", vals.len())));
                }
                let mut v = vals.clone();
                v.resize(n, 0.0);
                v
            }
        };
        if v.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("mode scales must be finite".into()));
        }
        Ok(v)
    }
}

fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionConfig {
    Zero {},
    /// `f(x) = slope · x`.
    Linear { slope: f64 },
    Affine { slopes: ModeScales, offsets: Option<ModeScales> },
    /// Pointwise `offset + amplitude · tanh(u / width)`.
    Bounded {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `f(u) = −u³ + c1 · u`.
    Cubic { c1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    None {},
    Constant { scales: ModeScales },
    Bounded { scales: ModeScales, modulation: BoundedMap },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkConfig {
    /// `[[mark, weight], …]`.
    Atoms { atoms: Vec<(f64, f64)> },
    PointMass { mark: f64, weight: f64 },
    Uniform { low: f64, high: f64, mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub marks: MarkConfig,
    pub scales: ModeScales,
    pub modulation: BoundedMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_modes: usize,
    pub reaction: ReactionConfig,
    pub diffusion: DiffusionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpConfig>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let n = self.n_modes;
        let reaction = match &self.reaction {
            ReactionConfig::Zero {} => ReactionSpec::zero(n),
            ReactionConfig::Linear { slope } => ReactionSpec::linear(n, *slope),
            ReactionConfig::Affine { slopes, offsets } => ReactionSpec::Affine {
                slopes: slopes.resolve(n)?,
                offsets: match offsets {
                    Some(o) => o.resolve(n)?,
                    None => vec![0.0; n],
                },
            },
            ReactionConfig::Bounded {
                offset,
                amplitude,
                width,
            } => ReactionSpec::Bounded(BoundedMap {
                offset: *offset,
                amplitude: *amplitude,
                width: *width,
            }),
            ReactionConfig::Cubic { c1 } => ReactionSpec::Cubic { c1: *c1 },
        };
        let diffusion = match &self.diffusion {
            DiffusionConfig::None {} => DiffusionSpec::none(n),
            DiffusionConfig::Constant { scales } => DiffusionSpec::ConstantDiagonal {
                scales: scales.resolve(n)?,
            },
            DiffusionConfig::Bounded { scales, modulation } => DiffusionSpec::BoundedDiagonal {
                scales: scales.resolve(n)?,
                modulation: *modulation,
            },
        };
        let jumps = match &self.jumps {
            None => None,
            Some(j) => {
                let marks = match &j.marks {
                    MarkConfig::Atoms { atoms } => MarkMeasure::Atoms(atoms.clone()),
                    MarkConfig::PointMass { mark, weight } => MarkMeasure::point_mass(*mark, *weight),
                    MarkConfig::Uniform { low, high, mass } => MarkMeasure::Uniform {
                        low: *low,
                        high: *high,
                        mass: *mass,
                    },
                };
                Some(JumpSpec::new(
                    marks,
                    JumpProfile {
                        scales: j.scales.resolve(n)?,
                        modulation: j.modulation,
                    },
                )?)
            }
        };
        ModelSpec::new(n, reaction, diffusion, jumps)
    }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_resamples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub members: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_times: Option<Vec<f64>>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Zero {},
    /// `amplitude · e_k`.
    Mode { k: usize, amplitude: f64 },
    Point { coeffs: Vec<f64> },
    /// Independent Gaussian coefficients around `mean` (zero if omitted).
    Gaussian {
        #[serde(default)]
        mean: Vec<f64>,
        variances: ModeScales,
    },
}

impl InitialConfig {
    pub fn build(&self, n: usize) -> Result<InitialLaw> {
        let point = |coeffs: Vec<f64>| -> Result<SpectralField> {
            if coeffs.len() > n {
                return Err(Error::Config(format!("initial state has {} coefficients for {n} modes", coeffs.len())));
            }
            let mut c = coeffs;
            c.resize(n, 0.0);
            SpectralField::new(c)
        };
        let law = match self {
            Self::Zero {} => InitialLaw::Point(SpectralField::zeros(n)),
            Self::Mode { k, amplitude } => {
                if *k == 0 || *k > n {
                    return Err(Error::Config(format!("mode {k} outside 1..={n}")));
                }
                InitialLaw::Point(SpectralField::mode(n, *k, *amplitude))
            }
            Self::Point { coeffs } => InitialLaw::Point(point(coeffs.clone())?),
            Self::Gaussian { mean, variances } => InitialLaw::Gaussian {
                mean: point(mean.clone())?,
                variances: variances.resolve(n)?,
            },
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `x ↦ x_k`.
    Mode { k: usize },
    /// `x ↦ ⟨φ, x⟩ / ‖φ‖`.
    Linear { direction: Vec<f64> },
    /// `x ↦ ‖x − anchor‖` (anchor zero if omitted).
    Distance {
        #[serde(default)]
        anchor: Vec<f64>,
    },
}

impl ObservableConfig {
    pub fn build(&self, n: usize) -> Result<LipschitzObservable> {
        match self {
            Self::Mode { k } => {
                if *k == 0 || *k > n {
                    return Err(Error::Config(format!("mode {k} outside 1..={n}")));
                }
                LipschitzObservable::linear(&SpectralField::mode(n, *k, 1.0))
            }
            Self::Linear { direction } => LipschitzObservable::linear(&SpectralField::new(direction.clone())?),
            Self::Distance { anchor } => {
                let a = if anchor.is_empty() {
                    SpectralField::zeros(n)
                } else {
                    SpectralField::new(anchor.clone())?
                };
                Ok(LipschitzObservable::distance(a))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Mode { k } => format!("mode{k}"),
            Self::Linear { .. } => "linear".into(),
            Self::Distance { anchor } if anchor.iter().all(|a| *a == 0.0) => "norm".into(),
            Self::Distance { .. } => "distance".into(),
        }
    }
}

fn default_fraction() -> f64 {
    0.75
}

fn default_window() -> (f64, f64) {
    (1e-3, 0.5)
}

fn default_burn_in() -> f64 {
    5.0
}

fn default_spacing() -> f64 {
    3.0
}

fn default_chains() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Empirical `W₁(L_T, μ̂)` between the time-discretized occupation measure
/// and a long-run sample standing in for the invariant measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationProxy {
    /// Atoms in both empirical measures.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    Contraction {
        initial: InitialConfig,
        partner: InitialConfig,
        /// Asserted rate is `fraction · K`.
        #[serde(default = "default_fraction")]
        rate_fraction: f64,
        /// Also estimate `W₁` between the two marginal ensembles.
        #[serde(default = "default_true")]
        marginal_w1: bool,
    },
    Concentration {
        initial: InitialConfig,
        observables: Vec<ObservableConfig>,
        r_grid: Vec<f64>,
        /// Bound values outside this window are not asserted.
        #[serde(default = "default_window")]
        window: (f64, f64),
        #[serde(default, skip_serializing_if = "Option::is_none")]
        occupation_proxy: Option<OccupationProxy>,
    },
    Certificates {
        initial: InitialConfig,
        observables: Vec<ObservableConfig>,
        lambda_grid: Vec<f64>,
        r_grid: Vec<f64>,
        block_sizes: Vec<usize>,
        /// Burn-in and spacing in units of `1/K`.
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
        /// Independent long paths the samples are split across.
        #[serde(default = "default_chains")]
        chains: usize,
    },
    Galerkin {
        initial: InitialConfig,
        modes: Vec<usize>,
    },
    Moments {
        initials: Vec<InitialConfig>,
        modes: Vec<usize>,
    },
    Rates {
        r_grid: Vec<f64>,
        lambda_grid: Vec<f64>,
        /// Horizons (in units of `1/K`) for the large-time behaviour of `α_T`.
        #[serde(default)]
        long_horizons: Vec<f64>,
    },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Contraction { .. } => "contraction",
            Self::Concentration { .. } => "concentration",
            Self::Certificates { .. } => "certificates",
            Self::Galerkin { .. } => "galerkin",
            Self::Moments { .. } => "moments",
            Self::Rates { .. } => "rates",
        }
    }
}

fn finite_nonneg(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Config(format!("{name} must be finite and non-negative")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a configuration.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        if !(run.dt > 0.0 && run.dt.is_finite()) {
            return Err(Error::Config("run.dt must be positive".into()));
        }
        if !(run.horizon > 0.0 && run.horizon.is_finite()) {
            return Err(Error::Config("run.horizon must be positive".into()));
        }
        if let Some(ts) = &run.observation_times {
            finite_nonneg("run.observation_times", ts)?;
            if ts.iter().any(|t| *t > run.horizon) {
                return Err(Error::Config("observation time beyond the horizon".into()));
            }
        }
        let n = self.model.n_modes;
        self.model.build().map_err(|e| Error::Config(format!("model: {e}")))?;
        let statistical = !matches!(self.experiment, ExperimentKind::Rates { .. });
        if statistical {
            run.grid().map_err(|e| Error::Config(format!("run: {e}")))?;
            if let Some(ts) = &run.observation_times {
                let grid = run.grid()?;
                for t in ts {
                    grid.index_of(*t).map_err(|e| Error::Config(format!("run: {e}")))?;
                }
            }
            if run.members < 2 {
                return Err(Error::Config("run.members must be at least 2".into()));
            }
        }
        match &self.experiment {
            ExperimentKind::Contraction {
                initial,
                partner,
                rate_fraction,
                ..
            } => {
                initial.build(n)?;
                partner.build(n)?;
                if !(*rate_fraction > 0.0 && *rate_fraction <= 1.0) {
                    return Err(Error::Config("rate_fraction must lie in (0, 1]".into()));
                }
            }
            ExperimentKind::Concentration {
                initial,
                observables,
                r_grid,
                window,
                occupation_proxy,
            } => {
                initial.build(n)?;
                check_observables(observables, n)?;
                finite_nonneg("r_grid", r_grid)?;
                if !(0.0 < window.0 && window.0 < window.1 && window.1 <= 1.0) {
                    return Err(Error::Config("window must satisfy 0 < low < high <= 1".into()));
                }
                if let Some(p) = occupation_proxy {
                    if p.points < 2 || p.points > crate::transport::ASSIGNMENT_CAP {
                        return Err(Error::Config("occupation_proxy.points out of range".into()));
                    }
                }
            }
            ExperimentKind::Certificates {
                initial,
                observables,
                lambda_grid,
                r_grid,
                block_sizes,
                burn_in,
                spacing,
                chains,
            } => {
                initial.build(n)?;
                check_observables(observables, n)?;
                finite_nonneg("lambda_grid", lambda_grid)?;
                finite_nonneg("r_grid", r_grid)?;
                if block_sizes.iter().any(|b| *b == 0 || *b > run.members) {
                    return Err(Error::Config("block sizes must lie in 1..=members".into()));
                }
                if !(*burn_in >= 0.0 && *spacing > 0.0 && burn_in.is_finite() && spacing.is_finite()) {
                    return Err(Error::Config("burn_in must be non-negative and spacing positive".into()));
                }
                if *chains == 0 || *chains > run.members {
                    return Err(Error::Config("chains must lie in 1..=members".into()));
                }
            }
            ExperimentKind::Galerkin { initial, modes } => {
                initial.build(n)?;
                if modes.is_empty() || modes.windows(2).any(|w| w[0] >= w[1]) || modes[0] == 0 {
                    return Err(Error::Config("modes must be non-empty and strictly increasing".into()));
                }
                if *modes.last().unwrap() > n {
                    return Err(Error::Config("mode list exceeds the reference resolution".into()));
                }
            }
            ExperimentKind::Moments { initials, modes } => {
                if !matches!(self.model.reaction, ReactionConfig::Cubic { .. }) {
                    return Err(Error::Config("moment check needs a cubic reaction".into()));
                }
                if initials.is_empty() {
                    return Err(Error::Config("at least one initial state is needed".into()));
                }
                for i in initials {
                    if matches!(i, InitialConfig::Gaussian { .. }) {
                        return Err(Error::Config("moment check needs deterministic initial states".into()));
                    }
                    i.build(n)?;
                }
                if modes.is_empty() || modes.iter().any(|m| *m == 0 || *m > n) {
                    return Err(Error::Config("modes must lie in 1..=n_modes".into()));
                }
            }
            ExperimentKind::Rates {
                r_grid,
                lambda_grid,
                long_horizons,
            } => {
                finite_nonneg("r_grid", r_grid)?;
                finite_nonneg("lambda_grid", lambda_grid)?;
                if long_horizons.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(Error::Config("long_horizons must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

fn check_observables(obs: &[ObservableConfig], n: usize) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::Config("at least one observable is needed".into()));
    }
    for o in obs {
        let built = o.build(n)?;
        if let LipschitzObservable::Distance { anchor } = &built {
            if anchor.len() > n {
                return Err(Error::Config("anchor has more coefficients than the model".into()));
            }
        }
        if let LipschitzObservable::Linear { direction } = &built {
            if direction.len() > n {
                return Err(Error::Config("direction has more coefficients than the model".into()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": { "n_modes": 4, "reaction": { "kind": "zero" }, "diffusion": { "kind": "none" } },
        "run": { "horizon": 0.1, "members": 4 },
        "experiment": { "kind": "galerkin", "initial": { "kind": "zero" }, "modes": [1, 2] }
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c.run.dt, 1e-3);
        assert_eq!(c.run.seed, 0);
        assert_eq!(c.run.bootstrap_resamples, 1000);
        assert_eq!(c.experiment.name(), "galerkin");
    }

    #[test]
    fn round_trip_is_identity() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_json_str(&c.to_json_pretty()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"members\": 4", "\"members\": 4, \"colour\": 1");
        assert!(matches!(ExperimentConfig::from_json_str(&bad), Err(Error::Config(_))));
        let bad = MINIMAL.replace("\"kind\": \"zero\" }, \"diffusion\"", "\"kind\": \"zero\", \"x\": 1 }, \"diffusion\"");
        assert!(ExperimentConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [
            ("\"members\": 4", "\"members\": 1"),
            ("\"horizon\": 0.1", "\"horizon\": 0.1, \"dt\": 0.03"),
            ("\"horizon\": 0.1", "\"horizon\": -1"),
            ("\"modes\": [1, 2]", "\"modes\": [2, 1]"),
            ("\"modes\": [1, 2]", "\"modes\": [1, 8]"),
            ("\"horizon\": 0.1", "\"horizon\": 0.1, \"observation_times\": [0.2]"),
            ("\"horizon\": 0.1", "\"horizon\": 0.1, \"observation_times\": [0.0505]"),
        ] {
            let bad = MINIMAL.replace(from, to);
            assert!(ExperimentConfig::from_json_str(&bad).is_err(), "{to}");
        }
    }

    #[test]
    fn mode_scales_resolve() {
        assert_eq!(ModeScales::Constant(2.0).resolve(3).unwrap(), vec![2.0; 3]);
        let p = ModeScales::Power {
            amplitude: 1.0,
            exponent: 1.0,
        }
        .resolve(4)
        .unwrap();
        assert_eq!(p, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
        assert_eq!(ModeScales::Values(vec![1.0]).resolve(3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(ModeScales::Values(vec![1.0; 4]).resolve(3).is_err());
    }

    #[test]
    fn model_block_builds_all_variants() {
        let json = r#"{
            "n_modes": 8,
            "reaction": { "kind": "bounded", "amplitude": 0.5 },
            "diffusion": { "kind": "bounded", "scales": { "power": { "amplitude": 1.0, "exponent": 1.0 } },
                           "modulation": { "offset": 1.0, "amplitude": 0.2 } },
            "jumps": { "marks": { "kind": "atoms", "atoms": [[-1.0, 0.5], [1.0, 0.5]] },
                       "scales": { "power": { "amplitude": 0.6, "exponent": 1.0 } },
                       "modulation": { "offset": 0.5, "amplitude": 0.25 } }
        }"#;
        let m: ModelConfig = serde_json::from_str(json).unwrap();
        let spec = m.build().unwrap();
        assert_eq!(spec.n_modes(), 8);
        assert!(spec.jumps().is_some());
        assert!((spec.constants().reaction - 0.5).abs() < 1e-15);
        assert!((spec.constants().c_sigma - 0.2).abs() < 1e-15);
    }

    #[test]
    fn moments_need_cubic_model() {
        let bad = MINIMAL.replace(
            r#""kind": "galerkin", "initial": { "kind": "zero" }, "modes": [1, 2]"#,
            r#""kind": "moments", "initials": [{ "kind": "zero" }], "modes": [1, 2]"#,
        );
        assert!(ExperimentConfig::from_json_str(&bad).is_err());
        let good = bad.replace(r#"{ "kind": "zero" }, "diffusion""#, r#"{ "kind": "cubic", "c1": 0.0 }, "diffusion""#);
        ExperimentConfig::from_json_str(&good).unwrap();
    }
}
