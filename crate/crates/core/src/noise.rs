//! Driving noises: spectral Brownian increments and finite-activity Poisson
//! random measures, together with the diffusion and jump coefficients.
//!
//! All coefficients are diagonal in the eigenbasis. For a mode-wise bounded
//! Lipschitz map `g`, the diffusion applies `s_k g(x_k)` to the `k`-th
//! Brownian coordinate, and a jump with mark `v` adds `v r_k g(x_k)` to mode
//! `k`. The structural constants (`C_σ`, `σ̄`, `C_G`, `C_G'`, `Ḡ`) follow in
//! closed form from the scales and from `g`.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::gl64_on;
use crate::spectral::{BoundedMap, SpectralField};

/// `n` independent `N(0, dt)` draws.
pub fn sample_brownian_increment<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; n];
    fill_brownian_increment(&mut out, dt, rng);
    out
}

pub fn fill_brownian_increment<R: Rng + ?Sized>(out: &mut [f64], dt: f64, rng: &mut R) {
    let sd = dt.sqrt();
    for v in out {
        let z: f64 = StandardNormal.sample(rng);
        *v = sd * z;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Offset in `[0, dt)` from the start of the step.
    pub offset: f64,
    pub mark: f64,
}

/// Events of the Poisson random measure in one window of length `dt`,
/// sorted by time.
pub fn sample_poisson_events<R: Rng + ?Sized>(dt: f64, spec: &JumpSpec, rng: &mut R) -> Vec<JumpEvent> {
    let mut out = Vec::new();
    sample_poisson_events_into(dt, spec, rng, &mut out);
    out
}

pub fn sample_poisson_events_into<R: Rng + ?Sized>(
    dt: f64,
    spec: &JumpSpec,
    rng: &mut R,
    out: &mut Vec<JumpEvent>,
) {
    out.clear();
    let rate = spec.marks.total_mass() * dt;
    if rate <= 0.0 {
        return;
    }
    let count = Poisson::new(rate)
        .expect("finite positive Poisson rate")
        .sample(rng) as usize;
    for _ in 0..count {
        let offset = rng.random::<f64>() * dt;
        let mark = spec.marks.sample(rng);
        out.push(JumpEvent { offset, mark });
    }
    out.sort_by(|a, b| a.offset.total_cmp(&b.offset));
}

/// Finite intensity measure `ϑ` on the mark space.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkMeasure {
    /// Weighted atoms `(mark, weight)`.
    Atoms(Vec<(f64, f64)>),
    /// `mass` times the uniform law on `[low, high]`.
    Uniform { low: f64, high: f64, mass: f64 },
}

impl MarkMeasure {
    pub fn point_mass(mark: f64, weight: f64) -> Self {
        Self::Atoms(vec![(mark, weight)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("mark measure has no atoms".into()));
                }
                if atoms
                    .iter()
                    .any(|(v, w)| !v.is_finite() || !w.is_finite() || *w <= 0.0)
                {
                    return Err(Error::InvalidSpec(
                        "atoms need finite marks and positive finite weights".into(),
                    ));
                }
            }
            Self::Uniform { low, high, mass } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::InvalidSpec("uniform marks need low < high".into()));
                }
                if !(mass.is_finite() && *mass > 0.0) {
                    return Err(Error::InvalidSpec("uniform mark mass must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// `c = ϑ(X)`.
    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Atoms(a) => a.iter().map(|(_, w)| w).sum(),
            Self::Uniform { mass, .. } => *mass,
        }
    }

    /// Quadrature `(node, weight)` with weights summing to `c`. Exact for
    /// atoms; for the uniform law a 64-node rule on each side of zero, so
    /// integrands with a kink at `v = 0` (like `|v|`) stay accurate.
    pub fn quadrature(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Atoms(a) => a.clone(),
            Self::Uniform { low, high, mass } => {
                let density = mass / (high - low);
                let pieces: Vec<(f64, f64)> = if *low < 0.0 && *high > 0.0 {
                    vec![(*low, 0.0), (0.0, *high)]
                } else {
                    vec![(*low, *high)]
                };
                pieces
                    .into_iter()
                    .flat_map(|(a, b)| gl64_on(a, b))
                    .map(|(v, w)| (v, w * density))
                    .collect()
            }
        }
    }

    /// A mark distributed as `ϑ / c`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Atoms(atoms) => {
                let total = self.total_mass();
                let mut u = rng.random::<f64>() * total;
                for (v, w) in atoms {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                atoms[atoms.len() - 1].0
            }
            Self::Uniform { low, high, .. } => low + (high - low) * rng.random::<f64>(),
        }
    }

    /// `∫ v^p ϑ(dv)` for integer `p ≥ 0`.
    pub fn moment(&self, p: i32) -> f64 {
        self.quadrature().iter().map(|(v, w)| w * v.powi(p)).sum()
    }
}

/// Diffusion coefficient `σ(x)`, diagonal in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionSpec {
    /// `σ(x) e_k = s_k e_k`.
    ConstantDiagonal { scales: Vec<f64> },
    /// `σ(x) e_k = s_k g(x_k) e_k`.
    BoundedDiagonal { scales: Vec<f64>, modulation: BoundedMap },
}

impl DiffusionSpec {
    pub fn none(n: usize) -> Self {
        Self::ConstantDiagonal {
            scales: vec![0.0; n],
        }
    }

    pub fn scales(&self) -> &[f64] {
        match self {
            Self::ConstantDiagonal { scales } | Self::BoundedDiagonal { scales, .. } => scales,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let s = self.scales();
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("diffusion scales must be finite".into()));
        }
        if let Self::BoundedDiagonal { modulation, .. } = self {
            modulation.validate()?;
        }
        Ok(())
    }

    pub fn truncated(&self, n: usize) -> Self {
        match self {
            Self::ConstantDiagonal { scales } => Self::ConstantDiagonal {
                scales: scales[..n.min(scales.len())].to_vec(),
            },
            Self::BoundedDiagonal { scales, modulation } => Self::BoundedDiagonal {
                scales: scales[..n.min(scales.len())].to_vec(),
                modulation: *modulation,
            },
        }
    }

    #[inline]
    fn column(&self, k: usize, xk: f64) -> f64 {
        match self {
            Self::ConstantDiagonal { scales } => scales[k],
            Self::BoundedDiagonal { scales, modulation } => scales[k] * modulation.eval(xk),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.scales().iter().all(|s| *s == 0.0)
    }

    /// Adds `σ(x) dW` to `out`.
    pub fn add_into(&self, x: &[f64], dw: &[f64], out: &mut [f64]) {
        for (k, (o, w)) in out.iter_mut().zip(dw).enumerate() {
            *o += self.column(k, x[k]) * w;
        }
    }

    /// `‖σ(x)‖_HS` from the column norms.
    pub fn hs_norm(&self, x: &SpectralField) -> f64 {
        let x = x.coeffs();
        (0..self.scales().len())
            .map(|k| self.column(k, x.get(k).copied().unwrap_or(0.0)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `C_σ` in Hilbert–Schmidt norm.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            Self::ConstantDiagonal { .. } => 0.0,
            Self::BoundedDiagonal { scales, modulation } => {
                modulation.lipschitz() * scales.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
            }
        }
    }

    /// `σ̄` with `‖σ(x)‖_HS ≤ σ̄` for every `x`.
    pub fn hs_bound(&self) -> f64 {
        let s = crate::spectral::l2_norm(self.scales());
        match self {
            Self::ConstantDiagonal { .. } => s,
            Self::BoundedDiagonal { modulation, .. } => s * modulation.sup_abs(),
        }
    }
}

/// `σ(x)·dW` in spectral coefficients.
pub fn apply_diffusion(spec: &DiffusionSpec, x: &SpectralField, dw: &[f64]) -> Result<SpectralField> {
    let n = spec.scales().len();
    for got in [x.len(), dw.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let mut out = vec![0.0; n];
    spec.add_into(x.coeffs(), dw, &mut out);
    Ok(SpectralField::from_vec_unchecked(out))
}

/// Mark-independent profile `p(x)` with `G(x, v) = v · p(x)` and
/// `p(x)_k = r_k g(x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpProfile {
    pub scales: Vec<f64>,
    pub modulation: BoundedMap,
}

impl JumpProfile {
    #[inline]
    fn component(&self, k: usize, xk: f64) -> f64 {
        self.scales[k] * self.modulation.eval(xk)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.component(k, x[k]);
        }
    }
}

/// Finite-activity jump specification: `ϑ` and `G(x, v) = v · p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSpec {
    pub marks: MarkMeasure,
    pub profile: JumpProfile,
}

impl JumpSpec {
    pub fn new(marks: MarkMeasure, profile: JumpProfile) -> Result<Self> {
        marks.validate()?;
        profile.modulation.validate()?;
        if profile.scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidSpec("jump scales must be finite".into()));
        }
        Ok(Self { marks, profile })
    }

    pub fn n_modes(&self) -> usize {
        self.profile.scales.len()
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            marks: self.marks.clone(),
            profile: JumpProfile {
                scales: self.profile.scales[..n.min(self.profile.scales.len())].to_vec(),
                modulation: self.profile.modulation,
            },
        }
    }

    pub fn jump(&self, x: &SpectralField, v: f64) -> SpectralField {
        let mut p = vec![0.0; self.n_modes()];
        self.profile.eval_into(&padded(x, self.n_modes()), &mut p);
        p.iter_mut().for_each(|c| *c *= v);
        SpectralField::from_vec_unchecked(p)
    }

    /// `Ḡ(v) = |v| · sup|g| · ‖r‖`, dominating `‖G(x, v)‖_H`.
    pub fn envelope(&self, v: f64) -> f64 {
        v.abs() * self.profile.modulation.sup_abs() * crate::spectral::l2_norm(&self.profile.scales)
    }

    /// Pairs `(Ḡ(v_i), w_i)` from the mark quadrature.
    pub fn envelope_quadrature(&self) -> Vec<(f64, f64)> {
        self.marks
            .quadrature()
            .into_iter()
            .map(|(v, w)| (self.envelope(v), w))
            .collect()
    }

    /// First mark moment `∫ v ϑ(dv)`; the compensator is this times `p(x)`.
    pub fn mean_mark(&self) -> f64 {
        self.marks.moment(1)
    }

    fn max_scale(&self) -> f64 {
        self.profile.scales.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    fn scale_sq(&self) -> f64 {
        self.profile.scales.iter().map(|s| s * s).sum()
    }

    /// `C_G`: one constant serving both as the jump Lipschitz constant
    /// `∫‖G(x,v) − G(y,v)‖² ϑ(dv) ≤ C_G‖x − y‖²` and the growth bound
    /// `∫‖G(x,v)‖² ϑ(dv) ≤ C_G`.
    pub fn c_g(&self) -> f64 {
        let m2 = self.marks.moment(2);
        let g = &self.profile.modulation;
        let lip = m2 * g.lipschitz().powi(2) * self.max_scale().powi(2);
        let growth = m2 * g.sup_abs().powi(2) * self.scale_sq();
        lip.max(growth)
    }

    /// `C_G'` with `∫‖G(x,v)‖⁶ ϑ(dv) ≤ C_G'`, used by the sixth-moment bound.
    pub fn c_g_prime(&self) -> f64 {
        self.marks.moment(6) * self.profile.modulation.sup_abs().powi(6) * self.scale_sq().powi(3)
    }
}

fn padded(x: &SpectralField, n: usize) -> Vec<f64> {
    let mut v = x.coeffs().to_vec();
    v.resize(n, 0.0);
    v
}

/// `∫ G(x, v) ϑ(dv)` by the mark quadrature.
pub fn compensator_mean(spec: &JumpSpec, x: &SpectralField) -> Result<SpectralField> {
    let n = spec.n_modes();
    let xs = padded(x, n);
    let mut out = vec![0.0; n];
    for (v, w) in spec.marks.quadrature() {
        for (k, o) in out.iter_mut().enumerate() {
            *o += w * v * spec.profile.component(k, xs[k]);
        }
    }
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("compensator quadrature".into()));
    }
    Ok(SpectralField::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamPurpose};

    fn unit_profile(n: usize) -> JumpProfile {
        let mut scales = vec![0.0; n];
        scales[0] = 1.0;
        JumpProfile {
            scales,
            modulation: BoundedMap::constant(1.0),
        }
    }

    #[test]
    fn compensator_examples() {
        let x = SpectralField::new(vec![0.3, -0.2]).unwrap();
        let zero = JumpSpec::new(
            MarkMeasure::point_mass(1.0, 1.0),
            JumpProfile {
                scales: vec![0.0, 0.0],
                modulation: BoundedMap::constant(1.0),
            },
        )
        .unwrap();
        assert!(compensator_mean(&zero, &x).unwrap().coeffs().iter().all(|c| *c == 0.0));

        let sym = JumpSpec::new(MarkMeasure::Atoms(vec![(-1.0, 1.0), (1.0, 1.0)]), unit_profile(2)).unwrap();
        assert_eq!(compensator_mean(&sym, &x).unwrap().coeffs(), &[0.0, 0.0]);

        let pm = JumpSpec::new(MarkMeasure::point_mass(0.5, 2.0), unit_profile(2)).unwrap();
        assert_eq!(compensator_mean(&pm, &x).unwrap().coeffs(), &[1.0, 0.0]);
    }

    #[test]
    fn diffusion_examples() {
        let spec = DiffusionSpec::ConstantDiagonal {
            scales: vec![1.0, 1.0],
        };
        let x = SpectralField::zeros(2);
        assert_eq!(apply_diffusion(&spec, &x, &[0.5, -0.5]).unwrap().coeffs(), &[0.5, -0.5]);
        assert_eq!(apply_diffusion(&spec, &x, &[0.0, 0.0]).unwrap().coeffs(), &[0.0, 0.0]);
        assert!(matches!(
            apply_diffusion(&spec, &x, &[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn brownian_is_deterministic_per_stream() {
        let a = sample_brownian_increment(5, 0.01, &mut stream(1, StreamPurpose::Brownian, 0));
        let b = sample_brownian_increment(5, 0.01, &mut stream(1, StreamPurpose::Brownian, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn brownian_moments() {
        let dt = 0.01;
        let m = 100_000;
        let mut rng = stream(11, StreamPurpose::Brownian, 0);
        let draws: Vec<f64> = (0..m).map(|_| sample_brownian_increment(1, dt, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() < 4.0 * (dt / m as f64).sqrt(), "mean {mean}");
        assert!((var - dt).abs() < 0.05 * dt, "var {var}");
    }

    #[test]
    fn poisson_events_sorted_and_in_window() {
        let spec = JumpSpec::new(MarkMeasure::Atoms(vec![(-1.0, 20.0), (1.0, 20.0)]), unit_profile(1)).unwrap();
        let mut rng = stream(3, StreamPurpose::Jumps, 0);
        for _ in 0..100 {
            let ev = sample_poisson_events(0.5, &spec, &mut rng);
            assert!(ev.windows(2).all(|w| w[0].offset <= w[1].offset));
            assert!(ev.iter().all(|e| (0.0..0.5).contains(&e.offset)));
            assert!(ev.iter().all(|e| e.mark == 1.0 || e.mark == -1.0));
        }
    }

    #[test]
    fn zero_window_has_no_events() {
        let spec = JumpSpec::new(MarkMeasure::point_mass(1.0, 5.0), unit_profile(1)).unwrap();
        let mut rng = stream(3, StreamPurpose::Jumps, 0);
        assert!(sample_poisson_events(0.0, &spec, &mut rng).is_empty());
    }

    #[test]
    fn uniform_quadrature_moments() {
        let m = MarkMeasure::Uniform {
            low: -1.0,
            high: 2.0,
            mass: 3.0,
        };
        assert!((m.total_mass() - m.moment(0)).abs() < 1e-13);
        // density 1 on [-1, 2]
        assert!((m.moment(1) - 1.5).abs() < 1e-13);
        assert!((m.moment(2) - 3.0).abs() < 1e-13);
        let abs: f64 = m.quadrature().iter().map(|(v, w)| w * v.abs()).sum();
        assert!((abs - 2.5).abs() < 1e-13);
    }

    #[test]
    fn invalid_marks_rejected() {
        assert!(MarkMeasure::Atoms(vec![]).validate().is_err());
        assert!(MarkMeasure::Atoms(vec![(1.0, 0.0)]).validate().is_err());
        assert!(MarkMeasure::Uniform { low: 1.0, high: 1.0, mass: 1.0 }.validate().is_err());
    }
}
