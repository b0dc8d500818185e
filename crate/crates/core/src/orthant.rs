//! Normal and bivariate-normal probabilities, and the closed-form keep rates of a
//! margin-based verifier on an isotropic Gaussian mixture.
//!
//! `Φ₂(c₁, c₂; ρ)` is evaluated as the one-dimensional integral
//! `∫_{-∞}^{c₂} φ(u) Φ((c₁ − ρu)/√(1−ρ²)) du` with composite Gauss–Legendre
//! panels. Panels are graded geometrically around the two places where the
//! integrand changes fastest: the upper limit (relevant deep in the lower tail)
//! and the kink `u = c₁/ρ` where the conditional CDF switches from 0 to 1 over a
//! width `√(1−ρ²)/|ρ|`. This keeps the error far below `1e-7` up to `|ρ| → 1`
//! and keeps *relative* accuracy in the tails, which matters because keep rates
//! divide by `Φ(c)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::distributions::Convention;
use crate::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn phi_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
#[inline]
pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of [`phi_cdf`] on `(0, 1)`, by bisection refined with Newton steps.
pub fn phi_inv(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if phi_cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let dens = phi_pdf(x);
        if dens <= 0.0 {
            break;
        }
        x -= (phi_cdf(x) - q) / dens;
    }
    x
}

// --- Gauss–Legendre -----------------------------------------------------------

const GL_POINTS: usize = 20;
const MAX_PANEL: f64 = 2.0;

struct GaussLegendre {
    nodes: [f64; GL_POINTS],
    weights: [f64; GL_POINTS],
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    })
}

/// Integrate `f` over `[lo, hi]`, refining around each `(point, scale)` feature.
fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, features: &[(f64, f64)]) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    for &(at, scale) in features {
        if !(at.is_finite() && scale.is_finite()) || at < lo || at > hi {
            continue;
        }
        cuts.push(at);
        let mut h = scale.clamp(1e-14, MAX_PANEL);
        loop {
            let (left, right) = (at - h, at + h);
            if left > lo {
                cuts.push(left);
            }
            if right < hi {
                cuts.push(right);
            }
            if h >= MAX_PANEL || (left <= lo && right >= hi) {
                break;
            }
            h *= 2.0;
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let rule = gauss_legendre();
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let pieces = ((b - a) / MAX_PANEL).ceil().max(1.0) as usize;
        let width = (b - a) / pieces as f64;
        for j in 0..pieces {
            let left = a + j as f64 * width;
            let half = 0.5 * width;
            let mid = left + half;
            let mut s = 0.0;
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                s += w * f(mid + half * x);
            }
            total += half * s;
        }
    }
    total
}

/// `∫_{-∞}^{upper} φ(u) Φ((c − ρu)/Δ) du`, i.e. `P(Y ≤ upper, X ≤ c)` for a
/// standard bivariate normal with correlation `ρ` and `Δ = √(1−ρ²) > 0`.
fn conditional_integral(upper: f64, c: f64, rho: f64, delta: f64) -> f64 {
    let hi = upper.min(10.0);
    let anchor = hi.min(-8.0);
    let lo = anchor - 45.0 / anchor.abs();
    let mut features = vec![(hi, (1.0 / hi.abs().max(1.0)).min(1.0))];
    if rho != 0.0 {
        features.push((c / rho, 0.5 * delta / rho.abs()));
    }
    let f = |u: f64| phi_pdf(u) * phi_cdf((c - rho * u) / delta);
    integrate(f, lo, hi, &features)
}

/// Thresholds and correlation for a bivariate orthant probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantInputs {
    pub c1: f64,
    pub c2: f64,
    pub rho: f64,
}

impl OrthantInputs {
    pub fn new(c1: f64, c2: f64, rho: f64) -> Self {
        Self { c1, c2, rho }
    }
}

/// `Φ₂(c₁, c₂; ρ) = P(X ≤ c₁, Y ≤ c₂)` for a standard bivariate normal pair with
/// correlation `ρ`. `|ρ| ≥ 1` takes the degenerate closed forms.
pub fn phi2_cdf(inputs: OrthantInputs) -> f64 {
    let OrthantInputs { c1, c2, rho } = inputs;
    if rho >= 1.0 {
        return phi_cdf(c1.min(c2));
    }
    if rho <= -1.0 {
        return (phi_cdf(c1) + phi_cdf(c2) - 1.0).max(0.0);
    }
    let delta = ((1.0 - rho) * (1.0 + rho)).sqrt();
    if delta < 1e-12 {
        return phi2_cdf(OrthantInputs::new(c1, c2, rho.signum()));
    }
    // Integrating over the smaller threshold keeps the mass near the upper limit.
    let (outer, inner) = if c2 <= c1 { (c2, c1) } else { (c1, c2) };
    conditional_integral(outer, inner, rho, delta).clamp(0.0, 1.0)
}

/// Convenience wrapper.
pub fn phi2(c1: f64, c2: f64, rho: f64) -> f64 {
    phi2_cdf(OrthantInputs::new(c1, c2, rho))
}

// --- Angles → keep rates -------------------------------------------------------

/// Principal angles between the mixture mean `μ`, the generator `w_gen` and the
/// pruner `w_prune`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleTriple {
    /// ∠(w_gen, μ)
    pub theta_gen: f64,
    /// ∠(w_prune, μ)
    pub theta_prune: f64,
    /// ∠(w_prune, w_gen)
    pub theta: f64,
}

impl AngleTriple {
    pub fn new(theta_gen: f64, theta_prune: f64, theta: f64) -> Result<Self> {
        const EPS: f64 = 1e-12;
        for (name, v) in [
            ("theta_gen", theta_gen),
            ("theta_prune", theta_prune),
            ("theta", theta),
        ] {
            if !(-EPS..=PI + EPS).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, pi]")));
            }
        }
        let lower = (theta_gen - theta_prune).abs();
        let upper = (theta_gen + theta_prune).min(2.0 * PI - theta_gen - theta_prune);
        if theta < lower - EPS || theta > upper + EPS {
            return Err(Error::config(format!(
                "angle triple ({theta_gen}, {theta_prune}, {theta}) violates the spherical triangle inequality"
            )));
        }
        Ok(Self {
            theta_gen,
            theta_prune,
            theta,
        })
    }

    /// Pruner and generator both in the (μ, e₂) plane on the same side of μ.
    pub fn coplanar(theta_gen: f64, theta_prune: f64) -> Result<Self> {
        Self::new(theta_gen, theta_prune, (theta_gen - theta_prune).abs())
    }

    /// Unit vectors `(μ̂, w_gen, w_prune)` in `ℝ^d` realizing the triple, with
    /// `μ̂ = e₁`.
    pub fn realize(&self, d: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if d < 3 {
            return Err(Error::config("realizing an angle triple needs d >= 3"));
        }
        let mut mu = vec![0.0; d];
        mu[0] = 1.0;
        let mut gen = vec![0.0; d];
        gen[0] = self.theta_gen.cos();
        gen[1] = self.theta_gen.sin();
        let mut prune = vec![0.0; d];
        prune[0] = self.theta_prune.cos();
        let sin_g = self.theta_gen.sin();
        let along = if sin_g.abs() < 1e-12 {
            0.0
        } else {
            (self.theta.cos() - self.theta_prune.cos() * self.theta_gen.cos()) / sin_g
        };
        let rest = self.theta_prune.sin().powi(2) - along * along;
        prune[1] = along;
        prune[2] = rest.max(0.0).sqrt();
        Ok((mu, gen, prune))
    }
}

/// Keep rates of a margin-based verifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeepRates {
    /// `P(q = 1 | y' = y)`
    pub phi: f64,
    /// `P(q = 1 | y' ≠ y)`
    pub psi: f64,
    /// Generator error rate `p = P(y' ≠ y)`.
    pub p: f64,
    /// Set when a conditioning probability underflowed and the limit was returned.
    pub degenerate: bool,
}

/// Closed-form `(φ, ψ)` of the verifier `q = 1[(2y'−1)·x·w_prune > 0]` applied to
/// labels `y' = 1[x·w_gen > 0]` on the isotropic mixture with mean norm
/// `mu_norm`.
///
/// With `σ` the standard deviation of `x·w` for unit `w`, `c₁ = −‖μ‖cos θ_prune/σ`,
/// `c₂ = −‖μ‖cos θ_gen/σ` and `ρ = cos θ`:
/// `φ = Φ₂(−c₁, −c₂; ρ) / Φ(−c₂)` and `ψ = Φ₂(c₁, c₂; ρ) / Φ(c₂)`.
pub fn phi_psi_from_angles(
    angles: AngleTriple,
    mu_norm: f64,
    d: usize,
    convention: Convention,
) -> Result<KeepRates> {
    let angles = AngleTriple::new(angles.theta_gen, angles.theta_prune, angles.theta)?;
    let sigma = convention.projection_sd(mu_norm, d)?;
    let c1 = -mu_norm * angles.theta_prune.cos() / sigma;
    let c2 = -mu_norm * angles.theta_gen.cos() / sigma;
    let rho = angles.theta.cos();
    Ok(keep_rates_from_thresholds(c1, c2, rho))
}

pub(crate) fn keep_rates_from_thresholds(c1: f64, c2: f64, rho: f64) -> KeepRates {
    let p = phi_cdf(c2);
    let right = phi_cdf(-c2);
    let mut degenerate = false;
    // When the conditioning mass underflows, condition on the boundary instead.
    let phi = if right > 0.0 {
        (phi2(-c1, -c2, rho) / right).clamp(0.0, 1.0)
    } else {
        degenerate = true;
        tail_limit(rho, -c1, -c2)
    };
    let psi = if p > 0.0 {
        (phi2(c1, c2, rho) / p).clamp(0.0, 1.0)
    } else {
        degenerate = true;
        tail_limit(rho, c1, c2)
    };
    KeepRates {
        phi,
        psi,
        p,
        degenerate,
    }
}

/// Leading-order `P(X ≤ c | Y ≤ t)` for `t → −∞`: given `Y ≤ t` the mass sits at
/// `Y ≈ t`, where `X ~ N(ρt, 1 − ρ²)`.
fn tail_limit(rho: f64, c: f64, t: f64) -> f64 {
    let delta = ((1.0 - rho) * (1.0 + rho)).max(0.0).sqrt();
    let gap = c - rho * t;
    if delta == 0.0 {
        return if gap >= 0.0 { 1.0 } else { 0.0 };
    }
    phi_cdf(gap / delta)
}

/// Survival-cell probabilities `(p₀₀, p₀₁)` for the mixture `x | y ~ N((2y−1)μ, I)`
/// with unit-norm generator and pruner, by quadrature of
///
/// * `2p₀₀ = ∫₀^∞ Φ((ρ(u − μ·w_gen) + μ·w_prune)/Δ) φ(u − μ·w_gen) du`
/// * `2p₀₁ = ∫₀^∞ Φ((ρ(u + μ·w_gen) − μ·w_prune)/Δ) φ(u + μ·w_gen) du`
///
/// where `ρ = w_gen·w_prune` and `Δ = √(1−ρ²)`.
pub fn pkl_integrals(w_gen: &[f64], w_prune: &[f64], mu: &[f64]) -> Result<(f64, f64)> {
    let d = mu.len();
    for w in [w_gen, w_prune] {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.len(),
            });
        }
        let norm = dot(w, w).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("expected a unit vector, norm = {norm}")));
        }
    }
    let rho = dot(w_gen, w_prune).clamp(-1.0, 1.0);
    let mg = dot(mu, w_gen);
    let mp = dot(mu, w_prune);
    let delta = ((1.0 - rho) * (1.0 + rho)).sqrt();
    if delta < 1e-12 {
        let r = rho.signum();
        return Ok((0.5 * phi2(mg, mp, r), 0.5 * phi2(-mg, -mp, r)));
    }

    let half_line = |shift: f64, offset: f64| {
        // ∫₀^∞ Φ((ρ(u + shift) + offset)/Δ) φ(u + shift) du
        let hi = (-shift).max(0.0) + 12.0;
        let mut features = vec![(-shift, 1.0), (0.0, 0.25)];
        if rho != 0.0 {
            features.push((-offset / rho - shift, 0.5 * delta / rho.abs()));
        }
        let f = |u: f64| phi_cdf((rho * (u + shift) + offset) / delta) * phi_pdf(u + shift);
        integrate(f, 0.0, hi, &features)
    };
    let p00 = 0.5 * half_line(-mg, mp);
    let p01 = 0.5 * half_line(mg, -mp);
    Ok((p00, p01))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sheppard's formula for the positive quadrant.
    fn sheppard(rho: f64) -> f64 {
        0.25 + rho.asin() / (2.0 * PI)
    }

    #[test]
    fn phi_reference_values() {
        assert_eq!(phi_cdf(0.0), 0.5);
        assert!((phi_cdf(40.0) - 1.0).abs() <= 1e-15);
        // mpmath: ncdf(1) with 30 digits
        assert!((phi_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((phi_cdf(-3.0) - 0.001_349_898_031_630_094_5).abs() < 1e-17);
        assert!((phi_cdf(-10.0) - 7.619_853_024_160_527e-24).abs() < 1e-35);
    }

    #[test]
    fn inverse_cdf_round_trips() {
        for q in [1e-10, 0.01, 0.3, 0.5, 0.9, 0.999] {
            assert!((phi_cdf(phi_inv(q)) - q).abs() < 1e-14 * q.max(1e-3));
        }
        assert!(phi_inv(0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let f = |x: f64| x.powi(6) - 3.0 * x.powi(3) + 1.0;
        let exact = |x: f64| x.powi(7) / 7.0 - 0.75 * x.powi(4) + x;
        let got = integrate(f, -1.5, 2.5, &[]);
        assert!((got - (exact(2.5) - exact(-1.5))).abs() < 1e-10);
    }

    #[test]
    fn phi2_simple_values() {
        assert!((phi2(0.0, 0.0, 0.0) - 0.25).abs() < 1e-12);
        assert!((phi2(0.0, 0.0, 0.5) - 1.0 / 3.0).abs() < 1e-12);
        for c in [-3.0, -0.5, 0.0, 1.2] {
            for rho in [-0.8, 0.0, 0.6] {
                assert!((phi2(c, 40.0, rho) - phi_cdf(c)).abs() < 1e-9);
            }
        }
        // independence factorizes
        assert!((phi2(0.3, -1.1, 0.0) - phi_cdf(0.3) * phi_cdf(-1.1)).abs() < 1e-13);
    }

    #[test]
    fn phi2_sheppard_near_one() {
        for rho in [0.99, 0.999_9, -0.999_9, 1.0 - 1e-9] {
            assert!((phi2(0.0, 0.0, rho) - sheppard(rho)).abs() < 1e-9, "rho={rho}");
        }
    }

    #[test]
    fn phi2_degenerate_branches() {
        assert!((phi2(0.4, -0.2, 1.0) - phi_cdf(-0.2)).abs() < 1e-15);
        assert!((phi2(0.4, -0.2, -1.0) - (phi_cdf(0.4) + phi_cdf(-0.2) - 1.0)).abs() < 1e-15);
        assert_eq!(phi2(-1.0, -1.0, -1.0), 0.0);
    }

    #[test]
    fn phi2_relative_accuracy_in_tail() {
        // independent case factorizes exactly, even deep in the tail
        let got = phi2(-7.0, -8.0, 0.0);
        let want = phi_cdf(-7.0) * phi_cdf(-8.0);
        assert!(((got - want) / want).abs() < 1e-9);
    }

    #[test]
    fn underflowing_conditioning_uses_boundary_limit() {
        // Φ(−60) underflows; ψ = P(X ≤ −120 | Y ≤ −60) with ρ = ½ is essentially 0,
        // and with c₁ fixed the limit is 1.
        let k = keep_rates_from_thresholds(-120.0, -60.0, 0.5);
        assert!(k.degenerate);
        assert!(k.psi < 1e-12);
        assert_eq!(keep_rates_from_thresholds(1.0, -60.0, 0.5).psi, 1.0);
        assert!(keep_rates_from_thresholds(1.0, -60.0, -0.5).psi < 1e-200);
        assert!((keep_rates_from_thresholds(0.3, -60.0, 0.0).psi - phi_cdf(0.3)).abs() < 1e-15);
        assert_eq!(keep_rates_from_thresholds(-60.0, -60.0, 1.0).psi, 1.0);
    }

    #[test]
    fn self_pruner_keeps_everything() {
        let a = AngleTriple::new(0.7, 0.7, 0.0).unwrap();
        let k = phi_psi_from_angles(a, 0.3, 50, Convention::UnitTrace).unwrap();
        assert!((k.phi - 1.0).abs() < 1e-9);
        assert!((k.psi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_pruner_limit() {
        let a = AngleTriple::new(PI / 6.0, 0.0, PI / 6.0).unwrap();
        let k = phi_psi_from_angles(a, 0.9, 400, Convention::UnitTrace).unwrap();
        assert!((k.phi - 1.0).abs() < 1e-3);
        assert!(k.psi < 1e-3);
    }

    #[test]
    fn inconsistent_triple_rejected() {
        assert!(AngleTriple::new(0.1, 0.2, 1.0).is_err());
        assert!(AngleTriple::new(0.1, 0.2, 0.05).is_err());
        assert!(AngleTriple::new(-0.5, 0.2, 0.3).is_err());
        assert!(AngleTriple::new(3.0, 3.0, 0.2).is_ok());
        // θ_gen + θ_prune > π: the largest reachable θ is 2π − θ_gen − θ_prune
        assert!(AngleTriple::new(3.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn realized_vectors_have_requested_angles() {
        let a = AngleTriple::new(0.4, 0.9, 1.1).unwrap();
        let (mu, g, p) = a.realize(5).unwrap();
        for v in [&mu, &g, &p] {
            assert!((dot(v, v) - 1.0).abs() < 1e-12);
        }
        assert!((dot(&g, &mu).acos() - 0.4).abs() < 1e-12);
        assert!((dot(&p, &mu).acos() - 0.9).abs() < 1e-12);
        assert!((dot(&p, &g).acos() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn pkl_at_zero_mean_is_half_an_orthant() {
        let a = AngleTriple::new(0.5, 1.2, 0.9).unwrap();
        let (_, g, p) = a.realize(3).unwrap();
        let rho = dot(&g, &p);
        let (p00, p01) = pkl_integrals(&g, &p, &[0.0, 0.0, 0.0]).unwrap();
        let want = 0.5 * sheppard(rho);
        assert!((p00 - want).abs() < 1e-10);
        assert!((p01 - want).abs() < 1e-10);
    }

    #[test]
    fn pkl_collapses_when_pruner_is_generator() {
        let w = [0.6, 0.8, 0.0];
        let mu = [0.5, 0.1, 0.3];
        let m = dot(&mu, &w);
        let (p00, p01) = pkl_integrals(&w, &w, &mu).unwrap();
        assert!((2.0 * p00 - phi_cdf(m)).abs() < 1e-14);
        assert!((2.0 * p01 - phi_cdf(-m)).abs() < 1e-14);
    }

    #[test]
    fn pkl_integrals_equal_orthant_form() {
        let a = AngleTriple::new(0.8, 0.3, 0.6).unwrap();
        let (mu_hat, g, p) = a.realize(4).unwrap();
        let mu: Vec<f64> = mu_hat.iter().map(|v| 0.7 * v).collect();
        let rho = dot(&g, &p);
        let (mg, mp) = (dot(&mu, &g), dot(&mu, &p));
        let (p00, p01) = pkl_integrals(&g, &p, &mu).unwrap();
        assert!((2.0 * p00 - phi2(mg, mp, rho)).abs() < 1e-10);
        assert!((2.0 * p01 - phi2(-mg, -mp, rho)).abs() < 1e-10);
    }
}
