//! Fields on (0,1) in the Dirichlet sine eigenbasis `e_k(ξ) = √2 sin(kπξ)`.
//!
//! Everything here is deterministic: norms of the `H_θ` scale, Galerkin
//! projections, the heat semigroup acting mode by mode, a direct discrete
//! sine transform for pseudo-spectral products, and the reaction terms.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue `λ_k = k²π²` of `-Δ` for the 1-based mode index `k`.
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    let kf = k as f64 * PI;
    kf * kf
}

/// Coefficients of a field against the sine eigenbasis, mode 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidField("at least one mode is required".into()));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidField(format!(
                "coefficient of mode {} is not finite",
                k + 1
            )));
        }
        Ok(Self { coeffs })
    }

    /// Caller guarantees finiteness and non-emptiness.
    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "a field needs at least one mode");
        Self {
            coeffs: vec![0.0; n],
        }
    }

    /// `amplitude · e_k` in an `n`-mode space (`k` is 1-based).
    pub fn mode(n: usize, k: usize, amplitude: f64) -> Self {
        assert!(k >= 1 && k <= n, "mode {k} outside 1..={n}");
        let mut f = Self::zeros(n);
        f.coeffs[k - 1] = amplitude;
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `‖x‖_{H_θ} = (Σ_k λ_k^θ x_k²)^{1/2}`.
    pub fn hnorm(&self, theta: f64) -> f64 {
        hnorm(self, theta)
    }

    /// The `H = L²(0,1)` norm.
    pub fn norm(&self) -> f64 {
        l2_norm(&self.coeffs)
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `‖x − y‖_H`, with the shorter field zero-padded.
    pub fn distance(&self, other: &Self) -> f64 {
        distance(&self.coeffs, &other.coeffs)
    }

    pub fn project(&self, n: usize) -> Self {
        project(self, n)
    }

    /// Embeds into an `n`-mode space: truncates or pads with zeros.
    pub fn resized(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n.max(1), 0.0);
        Self { coeffs }
    }
}

impl TryFrom<Vec<f64>> for SpectralField {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpectralField> for Vec<f64> {
    fn from(f: SpectralField) -> Self {
        f.coeffs
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let mut acc = 0.0;
    for k in 0..n {
        let d = a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0);
        acc += d * d;
    }
    acc.sqrt()
}

pub fn hnorm(x: &SpectralField, theta: f64) -> f64 {
    if theta == 0.0 {
        return x.norm();
    }
    x.coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| eigenvalue(i + 1).powf(theta) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Orthogonal projection `P_n` onto the first `n` modes.
pub fn project(x: &SpectralField, n: usize) -> SpectralField {
    assert!(n >= 1, "projection needs n >= 1");
    let keep = n.min(x.len());
    SpectralField {
        coeffs: x.coeffs[..keep].to_vec(),
    }
}

/// Action of the heat semigroup `S(t) = e^{tΔ}` on mode `k`: `e^{−k²π²t}`.
pub fn semigroup_factor(k: usize, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    (-eigenvalue(k) * t).exp()
}

/// Dense discrete sine transform between `modes` coefficients and samples on
/// the interior grid `ξ_j = j/(grid+1)`, `j = 1..=grid`.
///
/// The sampled basis satisfies `Σ_j e_k(ξ_j) e_l(ξ_j) = (grid+1) δ_kl` for
/// `k, l ≤ grid`, so the inverse is the scaled transpose.
#[derive(Debug, Clone)]
pub struct SineTransform {
    modes: usize,
    grid: usize,
    // row-major [grid][modes]
    table: Vec<f64>,
}

impl SineTransform {
    pub fn new(modes: usize, grid: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidSpec("transform needs at least one mode".into()));
        }
        if grid < modes {
            return Err(Error::GridTooSmall { grid, modes });
        }
        let h = 1.0 / (grid + 1) as f64;
        let mut table = Vec::with_capacity(grid * modes);
        for j in 1..=grid {
            let xi = j as f64 * h;
            for k in 1..=modes {
                table.push(SQRT_2 * (k as f64 * PI * xi).sin());
            }
        }
        Ok(Self { modes, grid, table })
    }

    /// Grid of `3n` points: the cubic of an `n`-mode field has no content
    /// above mode `3n`, so nothing aliases.
    pub fn dealiased(modes: usize) -> Result<Self> {
        Self::new(modes, 3 * modes)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = 1.0 / (self.grid + 1) as f64;
        (1..=self.grid).map(move |j| j as f64 * h)
    }

    pub fn forward_into(&self, coeffs: &[f64], samples: &mut [f64]) {
        debug_assert_eq!(samples.len(), self.grid);
        let n = coeffs.len().min(self.modes);
        for (row, s) in self.table.chunks_exact(self.modes).zip(samples.iter_mut()) {
            *s = row[..n].iter().zip(&coeffs[..n]).map(|(a, b)| a * b).sum();
        }
    }

    pub fn inverse_into(&self, samples: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(samples.len(), self.grid);
        let n = coeffs.len().min(self.modes);
        coeffs[..n].iter_mut().for_each(|c| *c = 0.0);
        for (row, &s) in self.table.chunks_exact(self.modes).zip(samples) {
            for (c, e) in coeffs[..n].iter_mut().zip(row) {
                *c += s * e;
            }
        }
        let scale = 1.0 / (self.grid + 1) as f64;
        coeffs[..n].iter_mut().for_each(|c| *c *= scale);
    }

    pub fn forward(&self, x: &SpectralField) -> Result<Vec<f64>> {
        if x.len() > self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.grid];
        self.forward_into(x.coeffs(), &mut out);
        Ok(out)
    }

    pub fn inverse(&self, samples: &[f64]) -> Result<SpectralField> {
        if samples.len() != self.grid {
            return Err(Error::DimensionMismatch {
                expected: self.grid,
                got: samples.len(),
            });
        }
        let mut c = vec![0.0; self.modes];
        self.inverse_into(samples, &mut c);
        SpectralField::new(c)
    }
}

/// Samples `x(ξ_j)` on the interior grid of `grid_size` points.
pub fn sine_transform(x: &SpectralField, grid_size: usize) -> Result<Vec<f64>> {
    SineTransform::new(x.len(), grid_size)?.forward(x)
}

/// Recovers `n_modes` coefficients from interior-grid samples.
pub fn inverse_sine_transform(samples: &[f64], n_modes: usize) -> Result<SpectralField> {
    SineTransform::new(n_modes, samples.len())?.inverse(samples)
}

/// `u ↦ offset + amplitude · tanh(u / width)`: bounded and Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundedMap {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundedMap {
    pub fn constant(value: f64) -> Self {
        Self {
            offset: value,
            amplitude: 0.0,
            width: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.amplitude.is_finite()) {
            return Err(Error::InvalidSpec("bounded map parameters must be finite".into()));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidSpec("bounded map width must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if self.amplitude == 0.0 {
            self.offset
        } else {
            self.offset + self.amplitude * (u / self.width).tanh()
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.offset.abs() + self.amplitude.abs()
    }

    pub fn lipschitz(&self) -> f64 {
        self.amplitude.abs() / self.width
    }
}

/// The reaction term `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReactionSpec {
    /// Diagonal affine map `f(x)_k = slope_k x_k + offset_k`.
    Affine { slopes: Vec<f64>, offsets: Vec<f64> },
    /// Pointwise bounded map applied in physical space.
    Bounded(BoundedMap),
    /// `f(u) = −u³ + c1·u` applied pointwise.
    Cubic { c1: f64 },
}

impl ReactionSpec {
    pub fn zero(n: usize) -> Self {
        Self::Affine {
            slopes: vec![0.0; n],
            offsets: vec![0.0; n],
        }
    }

    pub fn linear(n: usize, slope: f64) -> Self {
        Self::Affine {
            slopes: vec![slope; n],
            offsets: vec![0.0; n],
        }
    }

    pub fn is_cubic(&self) -> bool {
        matches!(self, Self::Cubic { .. })
    }

    /// Certified `C_f`; `None` for the cubic, which is only one-sided.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            Self::Affine { slopes, .. } => Some(slopes.iter().fold(0.0, |m, s| m.max(s.abs()))),
            Self::Bounded(map) => Some(map.lipschitz()),
            Self::Cubic { .. } => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Affine { slopes, offsets } => {
                for v in [slopes, offsets] {
                    if v.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: v.len(),
                        });
                    }
                    if v.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidSpec("affine reaction must be finite".into()));
                    }
                }
                Ok(())
            }
            Self::Bounded(map) => map.validate(),
            Self::Cubic { c1 } if !c1.is_finite() => {
                Err(Error::InvalidSpec("cubic coefficient must be finite".into()))
            }
            Self::Cubic { .. } => Ok(()),
        }
    }

    /// Restriction to the first `n` modes.
    pub fn truncated(&self, n: usize) -> Self {
        match self {
            Self::Affine { slopes, offsets } => Self::Affine {
                slopes: slopes[..n.min(slopes.len())].to_vec(),
                offsets: offsets[..n.min(offsets.len())].to_vec(),
            },
            other => other.clone(),
        }
    }
}

/// Evaluates `P_n f(x)` for one reaction at a fixed mode count, reusing its
/// transform tables and scratch buffers.
#[derive(Debug, Clone)]
pub struct ReactionEvaluator {
    spec: ReactionSpec,
    transform: Option<Arc<SineTransform>>,
    samples: Vec<f64>,
}

impl ReactionEvaluator {
    pub fn new(spec: ReactionSpec, n: usize) -> Result<Self> {
        spec.validate(n)?;
        let transform = match spec {
            ReactionSpec::Affine { .. } => None,
            _ => Some(Arc::new(SineTransform::dealiased(n)?)),
        };
        Ok(Self::with_transform(spec, transform))
    }

    /// Reuses an existing dealiased transform (shared across evaluators).
    pub(crate) fn with_transform(spec: ReactionSpec, transform: Option<Arc<SineTransform>>) -> Self {
        let samples = vec![0.0; transform.as_ref().map_or(0, |t| t.grid())];
        Self {
            spec,
            transform,
            samples,
        }
    }

    pub fn spec(&self) -> &ReactionSpec {
        &self.spec
    }

    pub fn eval_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match (&self.spec, &self.transform) {
            (ReactionSpec::Affine { slopes, offsets }, _) => {
                for ((o, xi), (s, b)) in out.iter_mut().zip(x).zip(slopes.iter().zip(offsets)) {
                    *o = s * xi + b;
                }
            }
            (ReactionSpec::Bounded(map), Some(t)) => {
                let t: &SineTransform = t;
                t.forward_into(x, &mut self.samples);
                self.samples.iter_mut().for_each(|u| *u = map.eval(*u));
                t.inverse_into(&self.samples, out);
            }
            (ReactionSpec::Cubic { c1 }, Some(t)) => {
                let t: &SineTransform = t;
                t.forward_into(x, &mut self.samples);
                self.samples
                    .iter_mut()
                    .for_each(|u| *u = (c1 - *u * *u) * *u);
                t.inverse_into(&self.samples, out);
            }
            _ => unreachable!("pseudo-spectral reactions always carry a transform"),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reaction term".into()));
        }
        Ok(())
    }

    pub fn eval(&mut self, x: &SpectralField) -> Result<SpectralField> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x.coeffs(), &mut out)?;
        Ok(SpectralField::from_vec_unchecked(out))
    }
}

/// Spectral coefficients of `f(x)` truncated to the modes of `x`.
pub fn eval_reaction(spec: &ReactionSpec, x: &SpectralField) -> Result<SpectralField> {
    ReactionEvaluator::new(spec.clone(), x.len())?.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(c: &[f64]) -> SpectralField {
        SpectralField::new(c.to_vec()).unwrap()
    }

    #[test]
    fn hnorm_examples() {
        assert_eq!(field(&[3.0, 4.0]).hnorm(0.0), 5.0);
        assert!((field(&[1.0]).hnorm(1.0) - PI).abs() < 1e-15);
        for theta in [-1.0, 0.0, 0.5, 1.0] {
            assert_eq!(field(&[0.0, 0.0, 0.0]).hnorm(theta), 0.0);
        }
        // V* norm of e_2 is 1/(2π)
        let x = SpectralField::mode(3, 2, 1.0);
        assert!((x.hnorm(-1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn field_rejects_bad_input() {
        assert!(SpectralField::new(vec![]).is_err());
        assert!(SpectralField::new(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralField::new(vec![f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<SpectralField>("[]").is_err());
        let f: SpectralField = serde_json::from_str("[1.5, -2]").unwrap();
        assert_eq!(f.coeffs(), &[1.5, -2.0]);
    }

    #[test]
    fn project_examples() {
        let x = field(&[1.0, 2.0, 3.0]);
        assert_eq!(project(&x, 2).coeffs(), &[1.0, 2.0]);
        assert_eq!(project(&x, 5).coeffs(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn semigroup_examples() {
        assert_eq!(semigroup_factor(1, 0.0), 1.0);
        let v = semigroup_factor(1, 0.1);
        assert!((v - (-0.1 * PI * PI).exp()).abs() < 1e-16);
        assert!((v - 0.372708).abs() < 1e-6);
        assert!(semigroup_factor(2, 0.1) < v);
        assert!(semigroup_factor(1, 0.2) < v);
    }

    #[test]
    fn sine_transform_basis_samples() {
        let s = sine_transform(&SpectralField::mode(1, 1, 1.0), 3).unwrap();
        for (j, v) in s.iter().enumerate() {
            let expect = SQRT_2 * (PI * (j + 1) as f64 / 4.0).sin();
            assert!((v - expect).abs() < 1e-15);
        }
        let z = sine_transform(&SpectralField::zeros(4), 8).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_transform_rejects_small_grid() {
        let x = SpectralField::zeros(5);
        assert!(matches!(
            sine_transform(&x, 4),
            Err(Error::GridTooSmall { grid: 4, modes: 5 })
        ));
        assert!(inverse_sine_transform(&[0.0; 3], 4).is_err());
    }

    #[test]
    fn sine_transform_round_trip() {
        let x = field(&[0.3, -1.2, 0.7, 2.0, -0.1, 0.05, 1.1, -0.9]);
        let s = sine_transform(&x, 32).unwrap();
        let back = inverse_sine_transform(&s, 8).unwrap();
        for (a, b) in x.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).abs() <= 1e-12 * x.norm());
        }
    }

    #[test]
    fn cubic_of_first_mode() {
        let x = SpectralField::mode(5, 1, 1.0);
        let y = eval_reaction(&ReactionSpec::Cubic { c1: 0.0 }, &x).unwrap();
        let expect = [-1.5, 0.0, 0.5, 0.0, 0.0];
        for (a, b) in y.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn cubic_fixes_zero() {
        for c1 in [-3.0, 0.0, 2.5] {
            let y = eval_reaction(&ReactionSpec::Cubic { c1 }, &SpectralField::zeros(6)).unwrap();
            assert!(y.coeffs().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn cubic_blow_up_is_an_error() {
        let x = SpectralField::mode(2, 1, 1e120);
        assert!(matches!(
            eval_reaction(&ReactionSpec::Cubic { c1: 0.0 }, &x),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn affine_reaction_applies_diagonal() {
        let spec = ReactionSpec::Affine {
            slopes: vec![-1.0, 2.0],
            offsets: vec![0.5, 0.0],
        };
        let y = eval_reaction(&spec, &field(&[1.0, 1.0])).unwrap();
        assert_eq!(y.coeffs(), &[-0.5, 2.0]);
        assert_eq!(spec.lipschitz_constant(), Some(2.0));
        assert!(ReactionSpec::linear(3, 1.0).validate(2).is_err());
    }

    #[test]
    fn bounded_map_constants() {
        let m = BoundedMap {
            offset: 0.5,
            amplitude: -0.25,
            width: 0.5,
        };
        assert_eq!(m.sup_abs(), 0.75);
        assert_eq!(m.lipschitz(), 0.5);
        assert_eq!(m.eval(0.0), 0.5);
        assert!(BoundedMap { width: 0.0, ..m }.validate().is_err());
    }
}
