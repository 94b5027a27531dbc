//! Dissipativity constant and deviation functions.
//!
//! With `Λ(λ) = ∫ (e^{λḠ(v)} − λḠ(v) − 1) ϑ(dv)` and
//! `γ_a(λ) = Λ(λ) + aσ̄²λ²/2`, this module evaluates the semi-Legendre
//! conjugate `γ*_a`, the transition-kernel rate `α_T`, the path-space rate
//! `α^P_T`, and a numerical conjugate `α*` for arbitrary convex `α`.
//!
//! Every supremum over `λ ≥ 0` has an objective `rλ − D(λ)` with `D` convex,
//! `D(0) = D'(0) = 0`, so the maximiser is the unique root of `D'(λ) = r`,
//! found by geometric bracketing and bisection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::noise::JumpSpec;
use crate::quadrature::try_integrate;

/// A value in `[0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// `e^{-value}`, the tail bound attached to a rate.
    pub fn neg_exp(self) -> f64 {
        match self {
            Self::Finite(v) => (-v).exp(),
            Self::Infinite => 0.0,
        }
    }

    /// `ge` with `∞ ≥ ∞`.
    pub fn at_least(self, other: Self, slack: f64) -> bool {
        match (self, other) {
            (_, Self::Infinite) => self.is_infinite(),
            (Self::Infinite, _) => true,
            (Self::Finite(a), Self::Finite(b)) => a >= b - slack,
        }
    }
}

impl Serialize for RateValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => s.serialize_f64(*v),
            Self::Infinite => s.serialize_str("infinity"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionVariant {
    Lipschitz,
    Cubic,
}

/// Structural constants of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub variant: ReactionVariant,
    /// `C_f` for Lipschitz reactions, `C₁` for the cubic.
    pub reaction: f64,
    pub c_sigma: f64,
    pub sigma_bar: f64,
    pub c_g: f64,
    pub c_g_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipativity {
    pub k: f64,
    pub positive: bool,
}

/// `K = 2λ₁ − (2C_f + C_σ² + C_G)`, or `2λ₁ − 2C₁ − C_σ² − C_G` for the cubic.
pub fn compute_k(constants: &ModelConstants) -> Dissipativity {
    let lambda1 = PI * PI;
    // both variants share the form; only the meaning of the reaction constant differs
    let k = 2.0 * lambda1 - (2.0 * constants.reaction + constants.c_sigma.powi(2) + constants.c_g);
    Dissipativity { k, positive: k > 0.0 }
}

/// `e^x − x − 1` without cancellation near zero.
fn exp_excess(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..12 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

const EXP_LIMIT: f64 = 700.0;

/// Pushforward of `ϑ` under the envelope: pairs `(Ḡ(v_i), w_i)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnvelopeMeasure {
    atoms: Vec<(f64, f64)>,
}

impl EnvelopeMeasure {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms
            .iter()
            .any(|(g, w)| !(g.is_finite() && *g >= 0.0 && w.is_finite() && *w >= 0.0))
        {
            return Err(Error::InvalidSpec("envelope atoms must be finite and non-negative".into()));
        }
        Ok(Self {
            atoms: atoms.into_iter().filter(|(g, w)| *g > 0.0 && *w > 0.0).collect(),
        })
    }

    pub fn point_mass(weight: f64, envelope: f64) -> Self {
        Self::new(vec![(envelope, weight)]).expect("valid point mass")
    }

    pub fn from_jumps(jumps: Option<&JumpSpec>) -> Self {
        jumps
            .map(|j| Self::new(j.envelope_quadrature()).expect("envelope is non-negative"))
            .unwrap_or_default()
    }

    pub fn is_trivial(&self) -> bool {
        self.atoms.is_empty()
    }

    fn max_envelope(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, (g, _)| m.max(*g))
    }

    fn check(&self, lambda: f64) -> Result<()> {
        if lambda * self.max_envelope() > EXP_LIMIT {
            return Err(Error::Overflow { lambda });
        }
        Ok(())
    }

    /// `Λ(λ)`.
    pub fn cumulant(&self, lambda: f64) -> Result<f64> {
        self.check(lambda)?;
        Ok(self.atoms.iter().map(|(g, w)| w * exp_excess(lambda * g)).sum())
    }

    /// `Λ'(λ) = ∫ Ḡ (e^{λḠ} − 1) dϑ`.
    pub fn cumulant_derivative(&self, lambda: f64) -> Result<f64> {
        self.check(lambda)?;
        Ok(self.atoms.iter().map(|(g, w)| w * g * (lambda * g).exp_m1()).sum())
    }
}

/// `Λ(λ)` for a jump specification.
pub fn big_lambda(lambda: f64, jumps: &JumpSpec) -> Result<f64> {
    EnvelopeMeasure::from_jumps(Some(jumps)).cumulant(lambda)
}

/// `γ_a(λ) = Λ(λ) + aσ̄²λ²/2`.
pub fn gamma(lambda: f64, a: f64, sigma_bar: f64, env: &EnvelopeMeasure) -> Result<f64> {
    Ok(env.cumulant(lambda)? + 0.5 * a * sigma_bar * sigma_bar * lambda * lambda)
}

/// `sup_{λ ≥ 0} (rλ − penalty(λ))` for a convex penalty with zero value and
/// slope at the origin. `slope` is the penalty derivative.
fn concave_sup<P, D>(r: f64, degenerate: bool, penalty: P, slope: D) -> Result<RateValue>
where
    P: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    if r <= 0.0 {
        return Ok(RateValue::Finite(0.0));
    }
    if degenerate {
        return Ok(RateValue::Infinite);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while slope(hi)? < r {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(RateValue::Infinite);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = [lo, hi]
        .into_iter()
        .map(|l| Ok(r * l - penalty(l)?))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(RateValue::Finite(best))
}

/// `γ*_a(r) = sup_{λ≥0} (rλ − γ_a(λ))`; infinite for `r > 0` when both the
/// Gaussian and jump parts vanish.
pub fn gamma_star(r: f64, a: f64, sigma_bar: f64, env: &EnvelopeMeasure) -> Result<RateValue> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::InvalidSpec("gamma_star needs a > 0".into()));
    }
    let q = a * sigma_bar * sigma_bar;
    concave_sup(
        r,
        q == 0.0 && env.is_trivial(),
        |l| gamma(l, a, sigma_bar, env),
        |l| Ok(env.cumulant_derivative(l)? + q * l),
    )
}

fn require_positive_k(k: f64) -> Result<()> {
    if k > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveK(k))
    }
}

/// `η(t) = (1 − e^{−Kt})/K`.
pub fn eta(t: f64, k: f64) -> f64 {
    -(-k * t).exp_m1() / k
}

/// `∫_0^T η(t)² dt` by quadrature.
pub fn eta_sq_integral(horizon: f64, k: f64) -> f64 {
    piecewise(horizon, k, |t| Ok::<f64, Error>(eta(t, k).powi(2))).expect("infallible")
}

// 64-node rule on [0, T], split at 40/K so the transient of e^{-Kt} gets its
// own panel when the horizon is long.
fn piecewise<F: FnMut(f64) -> Result<f64>>(horizon: f64, k: f64, mut f: F) -> Result<f64> {
    let knee = 40.0 / k;
    if horizon <= knee {
        try_integrate(0.0, horizon, f)
    } else {
        Ok(try_integrate(0.0, knee, &mut f)? + try_integrate(knee, horizon, &mut f)?)
    }
}

/// Transition-kernel rate
/// `α_T(r) = sup_{λ>0} {rλ − ∫_0^T Λ(e^{−Kt}λ)dt − σ̄²λ²(1 − e^{−2KT})/(4K)}`.
///
/// The time integral is taken in `s = e^{−Kt}`:
/// `∫_0^T Λ(e^{−Kt}λ)dt = K⁻¹ ∫_{e^{−KT}}^1 Λ(sλ)/s ds`, which is smooth for
/// every horizon.
pub fn alpha_t(r: f64, horizon: f64, k: f64, sigma_bar: f64, env: &EnvelopeMeasure) -> Result<RateValue> {
    require_positive_k(k)?;
    let s0 = (-k * horizon).exp();
    let q = sigma_bar * sigma_bar * (-(-2.0 * k * horizon).exp_m1()) / (2.0 * k);
    concave_sup(
        r,
        q == 0.0 && env.is_trivial(),
        |l| {
            let jump = if env.is_trivial() {
                0.0
            } else {
                try_integrate(s0, 1.0, |s| Ok::<f64, Error>(env.cumulant(s * l)? / s))? / k
            };
            Ok(jump + 0.5 * q * l * l)
        },
        |l| {
            let jump = if env.is_trivial() {
                0.0
            } else {
                try_integrate(s0, 1.0, |s| env.cumulant_derivative(s * l))? / k
            };
            Ok(jump + q * l)
        },
    )
}

/// Path-space rate
/// `α^P_T(r) = sup_{λ>0} {λr − ∫_0^T Λ(η(t)λ)dt − (σ̄²λ²/2)∫_0^T η²(t)dt}`.
pub fn alpha_path_t(r: f64, horizon: f64, k: f64, sigma_bar: f64, env: &EnvelopeMeasure) -> Result<RateValue> {
    require_positive_k(k)?;
    let q = sigma_bar * sigma_bar * eta_sq_integral(horizon, k);
    concave_sup(
        r,
        q == 0.0 && env.is_trivial(),
        |l| {
            let jump = if env.is_trivial() {
                0.0
            } else {
                piecewise(horizon, k, |t| env.cumulant(eta(t, k) * l))?
            };
            Ok(jump + 0.5 * q * l * l)
        },
        |l| {
            let jump = if env.is_trivial() {
                0.0
            } else {
                piecewise(horizon, k, |t| {
                    let e = eta(t, k);
                    Ok(e * env.cumulant_derivative(e * l)?)
                })?
            };
            Ok(jump + q * l)
        },
    )
}

/// Lower bound `K⁻¹ γ*_{1/2}(Kr)` for `α_T`, also the invariant-measure rate.
pub fn alpha_t_lower(r: f64, k: f64, sigma_bar: f64, env: &EnvelopeMeasure) -> Result<RateValue> {
    require_positive_k(k)?;
    Ok(match gamma_star(k * r, 0.5, sigma_bar, env)? {
        RateValue::Finite(v) => RateValue::Finite(v / k),
        RateValue::Infinite => RateValue::Infinite,
    })
}

/// Lower bound `T γ*₁(rK/T)` for `α^P_T`.
pub fn alpha_path_t_lower(r: f64, horizon: f64, k: f64, sigma_bar: f64, env: &EnvelopeMeasure) -> Result<RateValue> {
    require_positive_k(k)?;
    Ok(match gamma_star(r * k / horizon, 1.0, sigma_bar, env)? {
        RateValue::Finite(v) => RateValue::Finite(horizon * v),
        RateValue::Infinite => RateValue::Infinite,
    })
}

/// Semi-Legendre conjugate `α*(λ) = sup_{r≥0} (rλ − α(r))` of a convex,
/// non-decreasing `α` with `α(0) = 0`.
///
/// Scans a 256-point grid on `[0, r_max]`, doubling `r_max` while the best
/// grid point sits on the right edge, then refines the bracketing cell by
/// golden-section search. Grid second differences must be non-negative.
pub fn alpha_conjugate<F>(alpha: F, lambda: f64) -> Result<RateValue>
where
    F: Fn(f64) -> Result<RateValue>,
{
    if lambda <= 0.0 {
        return Ok(RateValue::Finite(0.0));
    }
    const POINTS: usize = 256;
    let objective = |r: f64| -> Result<f64> {
        Ok(match alpha(r)? {
            RateValue::Finite(a) => r * lambda - a,
            RateValue::Infinite => f64::NEG_INFINITY,
        })
    };
    let mut r_max = 1.0;
    loop {
        let h = r_max / (POINTS - 1) as f64;
        let rs: Vec<f64> = (0..POINTS).map(|i| i as f64 * h).collect();
        let vals = rs
            .iter()
            .map(|&r| alpha(r))
            .collect::<Result<Vec<RateValue>>>()?;
        check_convex(&vals)?;
        let obj: Vec<f64> = rs
            .iter()
            .zip(&vals)
            .map(|(r, a)| match a {
                RateValue::Finite(a) => r * lambda - a,
                RateValue::Infinite => f64::NEG_INFINITY,
            })
            .collect();
        let best = (0..POINTS).fold(0, |b, i| if obj[i] > obj[b] { i } else { b });
        if best == POINTS - 1 {
            r_max *= 2.0;
            if r_max > 1e12 {
                return Ok(RateValue::Infinite);
            }
            continue;
        }
        let lo = if best == 0 { 0.0 } else { rs[best - 1] };
        let hi = rs[best + 1];
        let (r, v) = golden_max(lo, hi, &objective)?;
        let _ = r;
        return Ok(RateValue::Finite(v.max(obj[best]).max(0.0)));
    }
}

fn check_convex(vals: &[RateValue]) -> Result<()> {
    let finite: Vec<f64> = vals.iter().map_while(|v| v.finite()).collect();
    let scale = finite.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, w) in finite.windows(3).enumerate() {
        let second = w[2] - 2.0 * w[1] + w[0];
        if second < -1e-9 * scale {
            return Err(Error::NonConvex(format!(
                "negative second difference {second:e} at grid index {}",
                i + 1
            )));
        }
    }
    Ok(())
}

fn golden_max<F: Fn(f64) -> Result<f64>>(mut a: f64, mut b: f64, f: &F) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let r = 0.5 * (a + b);
    Ok((r, f(r)?.max(fc).max(fd)))
}

/// All deviation functions of one model at one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct RateFunctionSet {
    pub k: f64,
    pub sigma_bar: f64,
    pub horizon: f64,
    pub envelope: EnvelopeMeasure,
}

impl RateFunctionSet {
    pub fn new(k: f64, sigma_bar: f64, horizon: f64, envelope: EnvelopeMeasure) -> Result<Self> {
        require_positive_k(k)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        Ok(Self {
            k,
            sigma_bar,
            horizon,
            envelope,
        })
    }

    pub fn big_lambda(&self, lambda: f64) -> Result<f64> {
        self.envelope.cumulant(lambda)
    }

    pub fn gamma(&self, lambda: f64, a: f64) -> Result<f64> {
        gamma(lambda, a, self.sigma_bar, &self.envelope)
    }

    pub fn gamma_star(&self, r: f64, a: f64) -> Result<RateValue> {
        gamma_star(r, a, self.sigma_bar, &self.envelope)
    }

    pub fn alpha_t(&self, r: f64) -> Result<RateValue> {
        alpha_t(r, self.horizon, self.k, self.sigma_bar, &self.envelope)
    }

    pub fn alpha_t_lower(&self, r: f64) -> Result<RateValue> {
        alpha_t_lower(r, self.k, self.sigma_bar, &self.envelope)
    }

    pub fn alpha_path_t(&self, r: f64) -> Result<RateValue> {
        alpha_path_t(r, self.horizon, self.k, self.sigma_bar, &self.envelope)
    }

    pub fn alpha_path_t_lower(&self, r: f64) -> Result<RateValue> {
        alpha_path_t_lower(r, self.horizon, self.k, self.sigma_bar, &self.envelope)
    }

    /// Invariant-measure rate `r ↦ K⁻¹ γ*_{1/2}(Kr)`.
    pub fn invariant_alpha(&self, r: f64) -> Result<RateValue> {
        self.alpha_t_lower(r)
    }

    pub fn invariant_alpha_conjugate(&self, lambda: f64) -> Result<RateValue> {
        alpha_conjugate(|r| self.invariant_alpha(r), lambda)
    }

    pub fn eta(&self, t: f64) -> f64 {
        eta(t, self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn k_examples() {
        let pi2 = PI * PI;
        let c = |variant, reaction, c_sigma, c_g| ModelConstants {
            variant,
            reaction,
            c_sigma,
            sigma_bar: 0.0,
            c_g,
            c_g_prime: 0.0,
        };
        let k = compute_k(&c(ReactionVariant::Lipschitz, 1.0, 1.0, 1.0));
        assert!((k.k - (2.0 * pi2 - 4.0)).abs() < 1e-12 && k.positive);
        assert!((k.k - 15.7392088).abs() < 1e-7);
        let k = compute_k(&c(ReactionVariant::Cubic, 2.0, 0.5, 1.0));
        assert!((k.k - 14.4892088).abs() < 1e-7);
        let k = compute_k(&c(ReactionVariant::Lipschitz, 20.0, 0.0, 0.0));
        assert!(k.k < 0.0 && !k.positive);
    }

    #[test]
    fn big_lambda_examples() {
        let env = EnvelopeMeasure::point_mass(2.0, 0.5);
        assert_eq!(env.cumulant(0.0).unwrap(), 0.0);
        let v = env.cumulant(1.0).unwrap();
        assert!((v - 2.0 * (0.5f64.exp() - 1.5)).abs() < 1e-15);
        assert!((v - 0.2974425).abs() < 1e-7);
        assert_eq!(EnvelopeMeasure::none().cumulant(7.0).unwrap(), 0.0);
    }

    #[test]
    fn big_lambda_overflow_names_lambda() {
        let env = EnvelopeMeasure::point_mass(1.0, 1.0);
        match env.cumulant(1e4) {
            Err(Error::Overflow { lambda }) => assert_eq!(lambda, 1e4),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn exp_excess_is_continuous_at_switch() {
        let below = exp_excess(0.009_999_999);
        let above = exp_excess(0.010_000_001);
        assert!(rel(below, above) < 1e-6);
        assert!(rel(exp_excess(1e-8), 5e-17) < 1e-6);
    }

    #[test]
    fn gamma_star_quadratic() {
        let env = EnvelopeMeasure::none();
        assert_eq!(gamma_star(0.0, 0.5, 1.0, &env).unwrap(), RateValue::Finite(0.0));
        let v = gamma_star(1.0, 0.5, 1.0, &env).unwrap().finite().unwrap();
        assert!(rel(v, 1.0) < 1e-12);
        assert_eq!(gamma_star(1.0, 0.5, 0.0, &env).unwrap(), RateValue::Infinite);
        assert_eq!(gamma_star(0.0, 0.5, 0.0, &env).unwrap(), RateValue::Finite(0.0));
    }

    #[test]
    fn gamma_star_matches_grid_search() {
        let env = EnvelopeMeasure::point_mass(2.0, 0.5);
        for r in [0.05, 0.3, 1.0, 4.0] {
            let exact = gamma_star(r, 1.0, 0.7, &env).unwrap().finite().unwrap();
            // independent oracle: 10^6-point scan of λ ∈ [0, 100]
            let mut best = 0.0f64;
            for i in 0..=1_000_000 {
                let l = 100.0 * i as f64 / 1e6;
                let g = 2.0 * ((0.5 * l).exp() - 0.5 * l - 1.0) + 0.49 * l * l / 2.0;
                best = best.max(r * l - g);
            }
            assert!((exact - best).abs() < 1e-6, "r={r}: {exact} vs {best}");
            assert!(exact >= best - 1e-12);
        }
    }

    #[test]
    fn alpha_t_quadratic_closed_form() {
        let env = EnvelopeMeasure::none();
        for (k, s, t) in [(1.0, 1.0, 2.0), (18.0, 1.5, 0.5), (3.0, 0.3, 50.0)] {
            for r in [0.1, 1.0, 10.0] {
                let v = alpha_t(r, t, k, s, &env).unwrap().finite().unwrap();
                let exact = k * r * r / (s * s * (1.0 - (-2.0 * k * t).exp()));
                assert!(rel(v, exact) < 1e-9, "{v} vs {exact}");
            }
        }
        assert_eq!(alpha_t(0.0, 1.0, 1.0, 1.0, &env).unwrap(), RateValue::Finite(0.0));
        assert!(matches!(alpha_t(1.0, 1.0, 0.0, 1.0, &env), Err(Error::NonPositiveK(_))));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(0.0, 1.0), 0.0);
        assert!((eta(1.0, 1.0) - 0.6321206).abs() < 1e-7);
        assert!((eta(1e3, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eta_sq_integral_closed_form() {
        for (t, k) in [(0.5_f64, 19.0_f64), (3.0, 1.0), (100.0, 5.0)] {
            let closed = (t - 2.0 * (1.0 - (-k * t).exp()) / k + (1.0 - (-2.0 * k * t).exp()) / (2.0 * k)) / (k * k);
            let q = eta_sq_integral(t, k);
            assert!(rel(q, closed) < 1e-9, "t={t} k={k}: {q} vs {closed}");
        }
        // short horizon, where the closed form cancels: t³/3 − Kt⁴/4 + 7K²t⁵/60 − K³t⁶/24
        let (t, k) = (1e-3_f64, 2.0_f64);
        let series = t.powi(3) / 3.0 - k * t.powi(4) / 4.0 + 7.0 * k * k * t.powi(5) / 60.0
            - k.powi(3) * t.powi(6) / 24.0;
        assert!(rel(eta_sq_integral(t, k), series) < 1e-9);
    }

    #[test]
    fn alpha_path_quadratic_closed_form() {
        let env = EnvelopeMeasure::none();
        let (k, s, t) = (18.0, 1.2, 0.5);
        let q = eta_sq_integral(t, k);
        for r in [0.01, 0.2, 3.0] {
            let v = alpha_path_t(r, t, k, s, &env).unwrap().finite().unwrap();
            let exact = r * r / (2.0 * s * s * q);
            assert!(rel(v, exact) < 1e-9);
        }
    }

    #[test]
    fn chains_hold_with_jumps() {
        let env = EnvelopeMeasure::new(vec![(0.4, 1.0), (1.1, 0.3)]).unwrap();
        let (k, s) = (12.0, 0.8);
        for t in [0.2, 1.0, 10.0] {
            for r in [0.01, 0.1, 0.5, 1.0, 2.0] {
                let a = alpha_t(r, t, k, s, &env).unwrap();
                let lo = alpha_t_lower(r, k, s, &env).unwrap();
                assert!(a.at_least(lo, 1e-8), "alpha_T {a:?} < {lo:?}");
                let p = alpha_path_t(r, t, k, s, &env).unwrap();
                let plo = alpha_path_t_lower(r, t, k, s, &env).unwrap();
                assert!(p.at_least(plo, 1e-8), "alpha^P_T {p:?} < {plo:?}");
            }
        }
    }

    #[test]
    fn conjugate_of_square() {
        assert_eq!(alpha_conjugate(|r| Ok(RateValue::Finite(r * r)), 0.0).unwrap(), RateValue::Finite(0.0));
        for l in [0.1, 1.0, 3.0, 40.0] {
            let v = alpha_conjugate(|r| Ok(RateValue::Finite(r * r)), l).unwrap().finite().unwrap();
            assert!((v - l * l / 4.0).abs() < 1e-9 * (1.0 + l * l), "{l}: {v}");
        }
    }

    #[test]
    fn conjugate_rejects_non_convex() {
        let res = alpha_conjugate(|r| Ok(RateValue::Finite(r.sqrt())), 1.0);
        assert!(matches!(res, Err(Error::NonConvex(_))));
    }

    #[test]
    fn biconjugate_recovers_convex_function() {
        let alpha = |r: f64| Ok(RateValue::Finite(0.5 * r * r + r.powi(4) / 12.0));
        for r in [0.0, 0.3, 1.0, 1.7] {
            let bi = alpha_conjugate(|l| alpha_conjugate(alpha, l), r).unwrap().finite().unwrap();
            let direct = alpha(r).unwrap().finite().unwrap();
            assert!((bi - direct).abs() < 1e-6, "r={r}: {bi} vs {direct}");
        }
    }

    #[test]
    fn linear_growth_conjugate_is_infinite() {
        // α(r) = r: α*(2) = sup (2r - r) = ∞
        let v = alpha_conjugate(|r| Ok(RateValue::Finite(r)), 2.0).unwrap();
        assert!(v.is_infinite());
    }
}
