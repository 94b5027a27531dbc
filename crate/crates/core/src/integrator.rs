//! Semi-implicit Euler time stepping of the `n`-mode Galerkin system
//!
//! ```text
//! dX = P_n ΔX dt + P_n f(X) dt + P_n σ(X) dβ⁽ⁿ⁾ + ∫ P_n G(X₋, v) Ñ(dt, dv)
//! ```
//!
//! The stiff Laplacian is treated implicitly and every other term
//! explicitly, so one step solves, mode by mode,
//!
//! ```text
//! y_k (1 + λ_k dt) = x_k + dt f_k(x) + (σ(x) dW)_k + Σ_events G_k(x, v) − dt ∫ G_k(x, v) ϑ(dv).
//! ```
//!
//! Noise for member `i` of an ensemble comes from the streams
//! `(master seed, Brownian, i)` and `(master seed, Jumps, i)`; coupled and
//! multi-resolution runs feed the same draws to every copy.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{fill_brownian_increment, sample_poisson_events_into, DiffusionSpec, JumpEvent, JumpSpec};
use crate::rates::{compute_k, Dissipativity, ModelConstants, ReactionVariant};
use crate::rng::{stream, StreamPurpose, StreamRng};
use crate::spectral::{eigenvalue, l2_norm, ReactionEvaluator, ReactionSpec, SineTransform, SpectralField};

/// States with `‖x‖_H` above this are treated as blown up.
pub const BLOW_UP_NORM: f64 = 1e6;

/// Full problem description at a fixed mode count.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    n_modes: usize,
    reaction: ReactionSpec,
    diffusion: DiffusionSpec,
    jumps: Option<JumpSpec>,
    transform: Option<Arc<SineTransform>>,
}

impl ModelSpec {
    pub fn new(n_modes: usize, reaction: ReactionSpec, diffusion: DiffusionSpec, jumps: Option<JumpSpec>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidSpec("model needs at least one mode".into()));
        }
        reaction.validate(n_modes)?;
        diffusion.validate(n_modes)?;
        if let Some(j) = &jumps {
            if j.n_modes() != n_modes {
                return Err(Error::DimensionMismatch {
                    expected: n_modes,
                    got: j.n_modes(),
                });
            }
        }
        let transform = match reaction {
            ReactionSpec::Affine { .. } => None,
            _ => Some(Arc::new(SineTransform::dealiased(n_modes)?)),
        };
        Ok(Self {
            n_modes,
            reaction,
            diffusion,
            jumps,
            transform,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn reaction(&self) -> &ReactionSpec {
        &self.reaction
    }

    pub fn diffusion(&self) -> &DiffusionSpec {
        &self.diffusion
    }

    pub fn jumps(&self) -> Option<&JumpSpec> {
        self.jumps.as_ref()
    }

    pub fn variant(&self) -> ReactionVariant {
        if self.reaction.is_cubic() {
            ReactionVariant::Cubic
        } else {
            ReactionVariant::Lipschitz
        }
    }

    pub fn constants(&self) -> ModelConstants {
        let reaction = match &self.reaction {
            ReactionSpec::Cubic { c1 } => *c1,
            other => other.lipschitz_constant().unwrap_or(0.0),
        };
        ModelConstants {
            variant: self.variant(),
            reaction,
            c_sigma: self.diffusion.lipschitz_constant(),
            sigma_bar: self.diffusion.hs_bound(),
            c_g: self.jumps.as_ref().map_or(0.0, JumpSpec::c_g),
            c_g_prime: self.jumps.as_ref().map_or(0.0, JumpSpec::c_g_prime),
        }
    }

    pub fn dissipativity(&self) -> Dissipativity {
        compute_k(&self.constants())
    }

    /// The same model restricted to the first `n` modes (`P_n` applied to
    /// every coefficient).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_modes {
            return Err(Error::InvalidSpec(format!(
                "cannot truncate a {}-mode model to {n} modes",
                self.n_modes
            )));
        }
        Self::new(
            n,
            self.reaction.truncated(n),
            self.diffusion.truncated(n),
            self.jumps.as_ref().map(|j| j.truncated(n)),
        )
    }

    fn check_field(&self, x: &SpectralField) -> Result<()> {
        if x.len() != self.n_modes {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Reusable buffers for stepping one model.
pub struct Stepper<'a> {
    model: &'a ModelSpec,
    reaction: ReactionEvaluator,
    lambdas: Vec<f64>,
    drift: Vec<f64>,
    profile: Vec<f64>,
    mean_mark: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a ModelSpec) -> Self {
        let n = model.n_modes;
        Self {
            model,
            reaction: ReactionEvaluator::with_transform(model.reaction.clone(), model.transform.clone()),
            lambdas: (1..=n).map(eigenvalue).collect(),
            drift: vec![0.0; n],
            profile: vec![0.0; n],
            mean_mark: model.jumps.as_ref().map_or(0.0, JumpSpec::mean_mark),
        }
    }

    /// One step in place. `dw` may be longer than the mode count (only the
    /// leading entries are used).
    pub fn step_in_place(&mut self, x: &mut [f64], dt: f64, dw: &[f64], events: &[JumpEvent]) -> Result<()> {
        let n = self.model.n_modes;
        self.reaction.eval_into(x, &mut self.drift)?;
        self.drift.iter_mut().for_each(|d| *d *= dt);
        self.model.diffusion.add_into(x, &dw[..n], &mut self.drift);
        if let Some(j) = &self.model.jumps {
            let weight: f64 = events.iter().map(|e| e.mark).sum::<f64>() - dt * self.mean_mark;
            if weight != 0.0 {
                j.profile.eval_into(x, &mut self.profile);
                for (d, p) in self.drift.iter_mut().zip(&self.profile) {
                    *d += weight * p;
                }
            }
        }
        for ((xk, d), l) in x.iter_mut().zip(&self.drift).zip(&self.lambdas) {
            *xk = (*xk + d) / (1.0 + l * dt);
        }
        let norm = l2_norm(x);
        if !norm.is_finite() || norm > BLOW_UP_NORM {
            return Err(Error::BlowUp {
                member: None,
                step: 0,
                norm,
            });
        }
        Ok(())
    }
}

/// One semi-implicit step from `x`.
pub fn step(model: &ModelSpec, x: &SpectralField, dt: f64, dw: &[f64], events: &[JumpEvent]) -> Result<SpectralField> {
    model.check_field(x)?;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidSpec("step size must be positive".into()));
    }
    if dw.len() != model.n_modes {
        return Err(Error::DimensionMismatch {
            expected: model.n_modes,
            got: dw.len(),
        });
    }
    let mut y = x.coeffs().to_vec();
    Stepper::new(model).step_in_place(&mut y, dt, dw, events)?;
    Ok(SpectralField::from_vec_unchecked(y))
}

/// Uniform grid `t_i = i·dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSpec("dt must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) || steps < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "horizon {horizon} is not an integer multiple of dt {dt}"
            )));
        }
        Ok(Self {
            dt,
            steps: steps as usize,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Step index of `t`, which must lie on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let i = (t / self.dt).round();
        if !(0.0..=self.steps as f64).contains(&i) || (i * self.dt - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::InvalidSpec(format!("time {t} is not on the grid")));
        }
        Ok(i as usize)
    }
}

/// Identifies the noise streams of one member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }
}

/// Draws the per-step noise shared by all copies of one member.
pub struct NoiseDriver<'a> {
    brownian: StreamRng,
    jump_rng: StreamRng,
    jumps: Option<&'a JumpSpec>,
    dt: f64,
    pub dw: Vec<f64>,
    pub events: Vec<JumpEvent>,
}

impl<'a> NoiseDriver<'a> {
    pub fn new(n: usize, dt: f64, jumps: Option<&'a JumpSpec>, seed: PathSeed) -> Self {
        Self {
            brownian: stream(seed.master, StreamPurpose::Brownian, seed.index),
            jump_rng: stream(seed.master, StreamPurpose::Jumps, seed.index),
            jumps,
            dt,
            dw: vec![0.0; n],
            events: Vec::new(),
        }
    }

    pub fn advance(&mut self) {
        fill_brownian_increment(&mut self.dw, self.dt, &mut self.brownian);
        match self.jumps {
            Some(j) => sample_poisson_events_into(self.dt, j, &mut self.jump_rng, &mut self.events),
            None => self.events.clear(),
        }
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::BlowUp { member, norm, .. } => Error::BlowUp { member, step, norm },
        Error::NonFinite(_) => Error::BlowUp {
            member: None,
            step,
            norm: f64::NAN,
        },
        other => other,
    }
}

/// Runs one path and calls `visit(i, state)` for every grid index.
pub fn visit_path<V>(model: &ModelSpec, x0: &SpectralField, grid: TimeGrid, seed: PathSeed, mut visit: V) -> Result<()>
where
    V: FnMut(usize, &[f64]),
{
    model.check_field(x0)?;
    let mut stepper = Stepper::new(model);
    let mut noise = NoiseDriver::new(model.n_modes, grid.dt, model.jumps.as_ref(), seed);
    let mut x = x0.coeffs().to_vec();
    visit(0, &x);
    for i in 1..=grid.steps {
        noise.advance();
        stepper
            .step_in_place(&mut x, grid.dt, &noise.dw, &noise.events)
            .map_err(|e| at_step(e, i))?;
        visit(i, &x);
    }
    Ok(())
}

/// Synchronously coupled pair: both copies consume identical noise.
pub fn visit_coupled<V>(
    model: &ModelSpec,
    x0: &SpectralField,
    y0: &SpectralField,
    grid: TimeGrid,
    seed: PathSeed,
    mut visit: V,
) -> Result<()>
where
    V: FnMut(usize, &[f64], &[f64]),
{
    model.check_field(x0)?;
    model.check_field(y0)?;
    let mut sx = Stepper::new(model);
    let mut sy = Stepper::new(model);
    let mut noise = NoiseDriver::new(model.n_modes, grid.dt, model.jumps.as_ref(), seed);
    let mut x = x0.coeffs().to_vec();
    let mut y = y0.coeffs().to_vec();
    visit(0, &x, &y);
    for i in 1..=grid.steps {
        noise.advance();
        sx.step_in_place(&mut x, grid.dt, &noise.dw, &noise.events)
            .map_err(|e| at_step(e, i))?;
        sy.step_in_place(&mut y, grid.dt, &noise.dw, &noise.events)
            .map_err(|e| at_step(e, i))?;
        visit(i, &x, &y);
    }
    Ok(())
}

/// Reference model plus truncations driven by the same Brownian vectors
/// (projected) and the same jump events. `visit(i, high, lows)`.
pub fn visit_multiresolution<V>(
    model: &ModelSpec,
    low_modes: &[usize],
    x0: &SpectralField,
    grid: TimeGrid,
    seed: PathSeed,
    mut visit: V,
) -> Result<()>
where
    V: FnMut(usize, &[f64], &[Vec<f64>]),
{
    model.check_field(x0)?;
    let lows = low_modes
        .iter()
        .map(|&n| model.truncated(n))
        .collect::<Result<Vec<_>>>()?;
    let mut hi_stepper = Stepper::new(model);
    let mut lo_steppers: Vec<Stepper> = lows.iter().map(Stepper::new).collect();
    let mut noise = NoiseDriver::new(model.n_modes, grid.dt, model.jumps.as_ref(), seed);
    let mut x = x0.coeffs().to_vec();
    let mut xs: Vec<Vec<f64>> = low_modes.iter().map(|&n| x0.coeffs()[..n].to_vec()).collect();
    visit(0, &x, &xs);
    for i in 1..=grid.steps {
        noise.advance();
        hi_stepper
            .step_in_place(&mut x, grid.dt, &noise.dw, &noise.events)
            .map_err(|e| at_step(e, i))?;
        for (s, xl) in lo_steppers.iter_mut().zip(xs.iter_mut()) {
            s.step_in_place(xl, grid.dt, &noise.dw, &noise.events)
                .map_err(|e| at_step(e, i))?;
        }
        visit(i, &x, &xs);
    }
    Ok(())
}

/// Snapshots of one trajectory on its time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
}

impl Path {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.push(SpectralField::from_vec_unchecked(x.to_vec()));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `sup_t ‖γ₁(t) − γ₂(t)‖²_H` over the stored times (zero-padding the
    /// lower-resolution path).
    pub fn sup_gap_sq(&self, other: &Path) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.distance(b).powi(2))
            .fold(0.0, f64::max))
    }
}

pub fn simulate_path(model: &ModelSpec, x0: &SpectralField, horizon: f64, dt: f64, seed: u64) -> Result<Path> {
    let grid = TimeGrid::new(horizon, dt)?;
    let mut path = Path::with_capacity(grid.steps + 1);
    visit_path(model, x0, grid, PathSeed::new(seed, 0), |i, x| path.push(grid.time(i), x))?;
    Ok(path)
}

pub fn simulate_coupled_pair(
    model: &ModelSpec,
    x0: &SpectralField,
    y0: &SpectralField,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<(Path, Path)> {
    let grid = TimeGrid::new(horizon, dt)?;
    let mut px = Path::with_capacity(grid.steps + 1);
    let mut py = Path::with_capacity(grid.steps + 1);
    visit_coupled(model, x0, y0, grid, PathSeed::new(seed, 0), |i, x, y| {
        px.push(grid.time(i), x);
        py.push(grid.time(i), y);
    })?;
    Ok((px, py))
}

/// High- and low-resolution paths sharing noise; `model` is the
/// high-resolution model, `x0` lives in its space and the low run starts
/// from `P_{n_lo} x0`.
pub fn multiresolution_pair(
    model: &ModelSpec,
    n_lo: usize,
    x0: &SpectralField,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<(Path, Path)> {
    if n_lo > model.n_modes {
        return Err(Error::InvalidSpec(format!(
            "low resolution {n_lo} exceeds reference {}",
            model.n_modes
        )));
    }
    let grid = TimeGrid::new(horizon, dt)?;
    let mut hi = Path::with_capacity(grid.steps + 1);
    let mut lo = Path::with_capacity(grid.steps + 1);
    visit_multiresolution(model, &[n_lo], x0, grid, PathSeed::new(seed, 0), |i, x, xs| {
        hi.push(grid.time(i), x);
        lo.push(grid.time(i), &xs[0]);
    })?;
    Ok((hi, lo))
}

/// Law of the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Point(SpectralField),
    /// Independent Gaussians on the leading modes.
    Gaussian { mean: SpectralField, variances: Vec<f64> },
}

impl InitialLaw {
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> SpectralField {
        match self {
            Self::Point(x) => x.resized(n),
            Self::Gaussian { mean, variances } => {
                let mut x = mean.resized(n).into_coeffs();
                let mut z = vec![0.0; variances.len().min(n)];
                fill_brownian_increment(&mut z, 1.0, rng);
                for ((xk, v), zk) in x.iter_mut().zip(variances).zip(z) {
                    *xk += v.sqrt() * zk;
                }
                SpectralField::from_vec_unchecked(x)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Gaussian { variances, .. } = self {
            if variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidSpec("initial variances must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Which snapshots an ensemble keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    EveryStep,
    Times(Vec<f64>),
}

impl Observation {
    pub(crate) fn mask(&self, grid: TimeGrid) -> Result<Vec<bool>> {
        match self {
            Self::EveryStep => Ok(vec![true; grid.steps + 1]),
            Self::Times(ts) => {
                let mut mask = vec![false; grid.steps + 1];
                for &t in ts {
                    mask[grid.index_of(t)?] = true;
                }
                Ok(mask)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Independent,
    /// Each member is a pair; the partner starts from this law.
    SynchronousPairs { partner: InitialLaw },
    /// Each member is a reference path plus its `n_lo`-mode truncation.
    SharedNoiseMultiresolution { n_lo: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Independent,
    SynchronousPairs,
    SharedNoiseMultiresolution,
}

#[derive(Debug, Clone)]
pub struct EnsembleRequest {
    pub initial: InitialLaw,
    pub coupling: Coupling,
    pub members: usize,
    pub horizon: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub observe: Observation,
}

/// Which stream each piece of randomness came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
    /// Member `i` uses stream index `i` for each listed purpose.
    pub purposes: Vec<StreamPurpose>,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub coupling: CouplingMode,
    pub members: Vec<Vec<SpectralField>>,
    pub partners: Option<Vec<Vec<SpectralField>>>,
    pub provenance: SeedProvenance,
}

/// Evaluates `f(i)` for every member in parallel; results come back in
/// member order and the first failing member (by index) is reported.
pub fn par_members<T, F>(members: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..members).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| match e {
                Error::BlowUp { step, norm, .. } => Error::BlowUp {
                    member: Some(i),
                    step,
                    norm,
                },
                other => other,
            })
        })
        .collect()
}

pub fn simulate_ensemble(model: &ModelSpec, req: &EnsembleRequest) -> Result<TrajectoryEnsemble> {
    if req.members == 0 {
        return Err(Error::InvalidSpec("ensemble needs at least one member".into()));
    }
    req.initial.validate()?;
    let grid = TimeGrid::new(req.horizon, req.dt)?;
    let mask = req.observe.mask(grid)?;
    let times: Vec<f64> = (0..=grid.steps).filter(|&i| mask[i]).map(|i| grid.time(i)).collect();
    let n = model.n_modes;
    let keep = |x: &[f64], out: &mut Vec<SpectralField>| out.push(SpectralField::from_vec_unchecked(x.to_vec()));

    type Member = (Vec<SpectralField>, Option<Vec<SpectralField>>);
    let runs: Vec<Member> = par_members(req.members, |i| {
        let seed = PathSeed::new(req.master_seed, i as u64);
        let x0 = req
            .initial
            .sample(n, &mut stream(req.master_seed, StreamPurpose::InitialPrimary, i as u64));
        let mut a = Vec::with_capacity(times.len());
        match &req.coupling {
            Coupling::Independent => {
                visit_path(model, &x0, grid, seed, |k, x| {
                    if mask[k] {
                        keep(x, &mut a)
                    }
                })?;
                Ok((a, None))
            }
            Coupling::SynchronousPairs { partner } => {
                let y0 = partner.sample(n, &mut stream(req.master_seed, StreamPurpose::InitialPartner, i as u64));
                let mut b = Vec::with_capacity(times.len());
                visit_coupled(model, &x0, &y0, grid, seed, |k, x, y| {
                    if mask[k] {
                        keep(x, &mut a);
                        keep(y, &mut b);
                    }
                })?;
                Ok((a, Some(b)))
            }
            Coupling::SharedNoiseMultiresolution { n_lo } => {
                let mut b = Vec::with_capacity(times.len());
                visit_multiresolution(model, &[*n_lo], &x0, grid, seed, |k, x, xs| {
                    if mask[k] {
                        keep(x, &mut a);
                        keep(&xs[0], &mut b);
                    }
                })?;
                Ok((a, Some(b)))
            }
        }
    })?;

    let mut purposes = vec![StreamPurpose::Brownian, StreamPurpose::Jumps, StreamPurpose::InitialPrimary];
    let coupling = match req.coupling {
        Coupling::Independent => CouplingMode::Independent,
        Coupling::SynchronousPairs { .. } => {
            purposes.push(StreamPurpose::InitialPartner);
            CouplingMode::SynchronousPairs
        }
        Coupling::SharedNoiseMultiresolution { .. } => CouplingMode::SharedNoiseMultiresolution,
    };
    let has_partner = !matches!(req.coupling, Coupling::Independent);
    let (members, partners): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(TrajectoryEnsemble {
        times,
        coupling,
        members,
        partners: has_partner.then(|| partners.into_iter().map(Option::unwrap_or_default).collect()),
        provenance: SeedProvenance {
            master_seed: req.master_seed,
            purposes,
            members: req.members,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{JumpProfile, MarkMeasure};
    use crate::spectral::BoundedMap;
    use std::f64::consts::PI;

    fn zero_model(n: usize) -> ModelSpec {
        ModelSpec::new(n, ReactionSpec::zero(n), DiffusionSpec::none(n), None).unwrap()
    }

    #[test]
    fn implicit_heat_step() {
        let m = zero_model(3);
        let y = step(&m, &SpectralField::mode(3, 1, 1.0), 0.1, &[0.0; 3], &[]).unwrap();
        let expect = 1.0 / (1.0 + PI * PI * 0.1);
        assert!((y.coeffs()[0] - expect).abs() < 1e-15);
        assert!((y.coeffs()[0] - 0.50330).abs() < 5e-5);
    }

    #[test]
    fn tiny_step_is_identity() {
        let m = ModelSpec::new(
            4,
            ReactionSpec::Cubic { c1: 1.0 },
            DiffusionSpec::ConstantDiagonal { scales: vec![1.0; 4] },
            None,
        )
        .unwrap();
        let x = SpectralField::new(vec![0.5, -0.2, 0.1, 0.3]).unwrap();
        let y = step(&m, &x, 1e-12, &[0.0; 4], &[]).unwrap();
        assert!(x.distance(&y) < 1e-9);
    }

    #[test]
    fn step_rejects_bad_input() {
        let m = zero_model(2);
        let x = SpectralField::zeros(2);
        assert!(step(&m, &x, 0.0, &[0.0; 2], &[]).is_err());
        assert!(step(&m, &x, 0.1, &[0.0; 3], &[]).is_err());
        assert!(step(&m, &SpectralField::zeros(3), 0.1, &[0.0; 3], &[]).is_err());
    }

    #[test]
    fn step_blow_up_is_reported() {
        let m = ModelSpec::new(1, ReactionSpec::linear(1, 1e9), DiffusionSpec::none(1), None).unwrap();
        let r = step(&m, &SpectralField::mode(1, 1, 1.0), 0.1, &[0.0], &[]);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
        let r = simulate_path(&m, &SpectralField::mode(1, 1, 1e-6), 1.0, 0.1, 0);
        assert!(matches!(r, Err(Error::BlowUp { step: 2, .. })), "{r:?}");
    }

    #[test]
    fn affine_ode_converges_first_order() {
        // f(x) = −c x, no noise: X_1(t) = e^{−(π² + c)t}
        let c = 2.0;
        let m = ModelSpec::new(1, ReactionSpec::linear(1, -c), DiffusionSpec::none(1), None).unwrap();
        let x0 = SpectralField::mode(1, 1, 1.0);
        let exact = (-(PI * PI + c) * 0.5).exp();
        let err = |dt: f64| {
            let p = simulate_path(&m, &x0, 0.5, dt, 0).unwrap();
            (p.states.last().unwrap().coeffs()[0] - exact).abs()
        };
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3, 5e-4].iter().map(|&dt| err(dt)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 0.9, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn zero_model_has_zero_path() {
        let m = zero_model(5);
        let p = simulate_path(&m, &SpectralField::zeros(5), 0.2, 0.01, 9).unwrap();
        assert_eq!(p.len(), 21);
        assert!(p.states.iter().all(|s| s.coeffs().iter().all(|c| *c == 0.0)));
    }

    fn noisy_model() -> ModelSpec {
        let n = 6;
        let jumps = JumpSpec::new(
            MarkMeasure::Atoms(vec![(-1.0, 2.0), (1.0, 3.0)]),
            JumpProfile {
                scales: (1..=n).map(|k| 0.3 / k as f64).collect(),
                modulation: BoundedMap {
                    offset: 0.5,
                    amplitude: 0.2,
                    width: 1.0,
                },
            },
        )
        .unwrap();
        ModelSpec::new(
            n,
            ReactionSpec::Bounded(BoundedMap {
                offset: 0.0,
                amplitude: 0.5,
                width: 1.0,
            }),
            DiffusionSpec::BoundedDiagonal {
                scales: (1..=n).map(|k| 1.0 / k as f64).collect(),
                modulation: BoundedMap {
                    offset: 1.0,
                    amplitude: 0.2,
                    width: 1.0,
                },
            },
            Some(jumps),
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_path() {
        let m = noisy_model();
        let x0 = SpectralField::mode(6, 1, 1.0);
        let a = simulate_path(&m, &x0, 0.3, 1e-3, 42).unwrap();
        let b = simulate_path(&m, &x0, 0.3, 1e-3, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&m, &x0, 0.3, 1e-3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn coupled_identical_starts_stay_identical() {
        let m = noisy_model();
        let x0 = SpectralField::mode(6, 2, 0.7);
        let (a, b) = simulate_coupled_pair(&m, &x0, &x0, 0.2, 1e-3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cubic_deterministic_norm_decreases() {
        let m = ModelSpec::new(8, ReactionSpec::Cubic { c1: 0.0 }, DiffusionSpec::none(8), None).unwrap();
        let p = simulate_path(&m, &SpectralField::mode(8, 1, 1.0), 0.5, 1e-3, 0).unwrap();
        for w in p.states.windows(2) {
            assert!(w[1].norm() < w[0].norm());
        }
    }

    #[test]
    fn deterministic_gap_obeys_gronwall() {
        // no noise: ‖X_t − Y_t‖ ≤ e^{(C_f − λ₁)t} ‖X_0 − Y_0‖
        let n = 8;
        let m = ModelSpec::new(
            n,
            ReactionSpec::Bounded(BoundedMap {
                offset: 0.0,
                amplitude: 3.0,
                width: 0.5,
            }),
            DiffusionSpec::none(n),
            None,
        )
        .unwrap();
        let c_f = m.constants().reaction;
        let x0 = SpectralField::new((1..=n).map(|k| 1.0 / k as f64).collect()).unwrap();
        let y0 = SpectralField::mode(n, 1, -0.5);
        let (a, b) = simulate_coupled_pair(&m, &x0, &y0, 0.5, 1e-3, 0).unwrap();
        let g0 = x0.distance(&y0);
        for (t, (x, y)) in a.times.iter().zip(a.states.iter().zip(&b.states)) {
            let bound = ((c_f - PI * PI) * t).exp() * g0;
            assert!(x.distance(y) <= bound * (1.0 + 1e-9), "t={t}");
        }
    }

    #[test]
    fn multiresolution_identical_resolution_has_zero_error() {
        let m = noisy_model();
        let x0 = SpectralField::new(vec![0.4, 0.3, 0.2, 0.1, 0.05, 0.01]).unwrap();
        let (hi, lo) = multiresolution_pair(&m, 6, &x0, 0.1, 1e-3, 3).unwrap();
        assert_eq!(hi.sup_gap_sq(&lo).unwrap(), 0.0);
    }

    #[test]
    fn decoupled_modes_give_exact_agreement() {
        // additive noise on modes ≤ 3, diagonal f, x0 supported on modes ≤ 3
        let n = 10;
        let mut scales = vec![0.0; n];
        scales[..3].copy_from_slice(&[1.0, 0.5, 0.3]);
        let mut slopes = vec![-0.5; n];
        slopes[1] = 0.7;
        let m = ModelSpec::new(
            n,
            ReactionSpec::Affine {
                slopes,
                offsets: vec![0.0; n],
            },
            DiffusionSpec::ConstantDiagonal { scales },
            None,
        )
        .unwrap();
        let x0 = SpectralField::new([vec![0.5, -0.3, 0.2], vec![0.0; 7]].concat()).unwrap();
        let (hi, lo) = multiresolution_pair(&m, 3, &x0, 0.3, 1e-3, 17).unwrap();
        assert_eq!(hi.sup_gap_sq(&lo).unwrap(), 0.0);
    }

    #[test]
    fn ensemble_of_one_is_a_path() {
        let m = noisy_model();
        let x0 = SpectralField::mode(6, 1, 0.5);
        let path = simulate_path(&m, &x0, 0.1, 1e-3, 8).unwrap();
        let ens = simulate_ensemble(
            &m,
            &EnsembleRequest {
                initial: InitialLaw::Point(x0),
                coupling: Coupling::Independent,
                members: 1,
                horizon: 0.1,
                dt: 1e-3,
                master_seed: 8,
                observe: Observation::EveryStep,
            },
        )
        .unwrap();
        assert_eq!(ens.members[0], path.states);
        assert_eq!(ens.times, path.times);
    }

    #[test]
    fn ensemble_is_schedule_independent() {
        let m = noisy_model();
        let req = EnsembleRequest {
            initial: InitialLaw::Gaussian {
                mean: SpectralField::mode(6, 1, 0.5),
                variances: vec![0.1, 0.05],
            },
            coupling: Coupling::SynchronousPairs {
                partner: InitialLaw::Point(SpectralField::zeros(6)),
            },
            members: 16,
            horizon: 0.1,
            dt: 1e-3,
            master_seed: 99,
            observe: Observation::Times(vec![0.0, 0.05, 0.1]),
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_ensemble(&m, &req)).unwrap();
        let b = four.install(|| simulate_ensemble(&m, &req)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times, vec![0.0, 0.05, 0.1]);
        let mean = |e: &TrajectoryEnsemble| e.members.iter().map(|s| s[2].coeffs()[0]).sum::<f64>();
        assert_eq!(mean(&a).to_bits(), mean(&b).to_bits());
    }

    #[test]
    fn zero_model_ensemble_follows_implicit_semigroup() {
        let n = 4;
        let m = zero_model(n);
        let dt = 1e-3;
        let ens = simulate_ensemble(
            &m,
            &EnsembleRequest {
                initial: InitialLaw::Gaussian {
                    mean: SpectralField::zeros(n),
                    variances: vec![1.0; n],
                },
                coupling: Coupling::Independent,
                members: 5,
                horizon: 0.05,
                dt,
                master_seed: 1,
                observe: Observation::EveryStep,
            },
        )
        .unwrap();
        for member in &ens.members {
            for w in member.windows(2) {
                for k in 0..n {
                    let expect = w[0].coeffs()[k] / (1.0 + eigenvalue(k + 1) * dt);
                    assert!((w[1].coeffs()[k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
                }
            }
        }
    }

    #[test]
    fn ensemble_reports_failing_member() {
        let m = ModelSpec::new(1, ReactionSpec::linear(1, 1e4), DiffusionSpec::none(1), None).unwrap();
        let r = simulate_ensemble(
            &m,
            &EnsembleRequest {
                initial: InitialLaw::Point(SpectralField::mode(1, 1, 1.0)),
                coupling: Coupling::Independent,
                members: 3,
                horizon: 1.0,
                dt: 0.1,
                master_seed: 0,
                observe: Observation::EveryStep,
            },
        );
        assert!(matches!(r, Err(Error::BlowUp { member: Some(0), .. })), "{r:?}");
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert_eq!(TimeGrid::new(0.5, 1e-3).unwrap().steps, 500);
        let g = TimeGrid::new(0.5, 1e-3).unwrap();
        assert_eq!(g.index_of(0.25).unwrap(), 250);
        assert!(g.index_of(0.2505).is_err());
        assert!(g.index_of(0.6).is_err());
    }
}
