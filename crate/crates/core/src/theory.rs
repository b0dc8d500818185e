//! Breakdown points, the reduced KKT fixed point of pruned ridge-logistic
//! regression, and the accuracy predicates built on it.
//!
//! Under high-dimensional concentration (norms → 1, same-class dot products → `a`,
//! cross-class → `b`) the minimizer is `ŵ = Σ_{i∈M} α_i x_i` with `α_i` taking one
//! of four values `A, −B, C, −D` by (true, synthesized) label cell. The scaled
//! values `Ā = γA, …` with `γ = Nλ` solve a four-equation sigmoid system; as
//! `γ → ∞` it collapses to two equations in `(B̄, D̄)` with `Ā = 1 − B̄`,
//! `C̄ = 1 − D̄`.

use crate::labelers::sigmoid;
use crate::pruning::{PruneParams, SurvivalCounts};
use crate::{Error, Result};

/// `p⋆ = 1/(1 + ψ/φ)`, the corruption level where the trained classifier flips.
pub fn breakdown_point(phi: f64, psi: f64) -> Result<f64> {
    check_rates(phi, psi)?;
    Ok(phi / (phi + psi))
}

fn check_rates(phi: f64, psi: f64) -> Result<()> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::Undefined("breakdown point needs 0 < phi <= 1"));
    }
    if !(0.0..=1.0).contains(&psi) {
        return Err(Error::config(format!("psi = {psi} must lie in [0, 1]")));
    }
    Ok(())
}

fn check_slack(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::config(format!("slack t = {t} must lie in (0, 1)")));
    }
    Ok(())
}

/// `(p⁻⋆(t), p⁺⋆(t))` with
/// `p⁻⋆(t) = (1−t)/(1−t + (1+t)ψ/φ)` and `p⁺⋆(t) = (1+t)/(1+t + (1−t)ψ/φ)`.
pub fn threshold_pair(phi: f64, psi: f64, t: f64) -> Result<(f64, f64)> {
    check_rates(phi, psi)?;
    check_slack(t)?;
    let r = psi / phi;
    let lower = (1.0 - t) / (1.0 - t + (1.0 + t) * r);
    let upper = (1.0 + t) / (1.0 + t + (1.0 - t) * r);
    Ok((lower, upper))
}

/// Breakdown point with its slack band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub p_star: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    pub t: f64,
}

impl Thresholds {
    pub fn new(phi: f64, psi: f64, t: f64) -> Result<Self> {
        let (p_minus, p_plus) = threshold_pair(phi, psi, t)?;
        Ok(Self {
            p_star: breakdown_point(phi, psi)?,
            p_minus,
            p_plus,
            t,
        })
    }
}

/// `pψ/((1−p)φ) < (1−t)/(1+t)`, evaluated without division so that it agrees
/// with `p < p⁻⋆(t)` as an algebraic identity.
pub fn concentration_condition(params: PruneParams, t: f64) -> Result<bool> {
    check_slack(t)?;
    let PruneParams { phi, psi, p } = params;
    Ok(p * psi * (1.0 + t) < (1.0 - p) * phi * (1.0 - t))
}

/// Cross-class similarity regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `b = −a`
    Symmetric,
    /// `b = 0`
    Skewed,
}

impl Regime {
    pub fn from_similarities(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::config(format!("class similarity a = {a} must lie in (0, 1)")));
        }
        if b == -a {
            Ok(Regime::Symmetric)
        } else if b == 0.0 {
            Ok(Regime::Skewed)
        } else {
            Err(Error::config(format!("cross similarity b = {b} must be -a or 0")))
        }
    }

    pub fn b(self, a: f64) -> f64 {
        match self {
            Regime::Symmetric => -a,
            Regime::Skewed => 0.0,
        }
    }
}

/// Which form of the fixed-point system to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// All four equations at finite `γ`, including the `(1 − a)` self-term.
    Full,
    /// The `γ → ∞` limit.
    #[default]
    Simplified,
}

/// Solution `(Ā, B̄, C̄, D̄)` of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar: f64,
    pub d_bar: f64,
    /// Largest absolute defect of the defining equations at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub regime: Regime,
    pub mode: SolveMode,
}

/// Residual every returned [`FixedPoint`] is guaranteed to meet.
pub const FIXED_POINT_TOL: f64 = 1e-10;

struct System {
    a: f64,
    b: f64,
    gamma: f64,
    n: [f64; 4], // n11, n10, n01, n00
}

impl System {
    fn signal(&self, x: [f64; 4]) -> (f64, f64) {
        let (a, b) = (self.a, self.b);
        let [n11, n10, n01, n00] = self.n;
        let [ab, bb, cb, db] = x;
        let s1 = a * n11 * ab - a * n10 * bb + b * n01 * cb - b * n00 * db;
        let s0 = b * n11 * ab - b * n10 * bb + a * n01 * cb - a * n00 * db;
        (s1, s0)
    }

    fn full(&self, x: [f64; 4]) -> [f64; 4] {
        let g = self.gamma;
        let r = 1.0 - self.a;
        let (s1, s0) = self.signal(x);
        [
            sigmoid(-(s1 + r * x[0]) / g),
            sigmoid((s1 - r * x[1]) / g),
            sigmoid(-(s0 + r * x[2]) / g),
            sigmoid((s0 - r * x[3]) / g),
        ]
    }

    fn simplified(&self, x: [f64; 4]) -> [f64; 4] {
        let (s1, s0) = self.signal(x);
        let b = sigmoid(s1 / self.gamma);
        let d = sigmoid(s0 / self.gamma);
        [1.0 - b, b, 1.0 - d, d]
    }

    /// `(lower, upper)` coordinates of one class given its signal `s`: the pair
    /// `(Ā, B̄)` for `s₁` or `(C̄, D̄)` for `s₀`. Each solves a scalar equation
    /// whose right side decreases in the unknown.
    fn coords(&self, mode: SolveMode, s: f64) -> ([f64; 2], usize) {
        let g = self.gamma;
        match mode {
            SolveMode::Simplified => {
                let up = sigmoid(s / g);
                ([1.0 - up, up], 0)
            }
            SolveMode::Full => {
                let r = 1.0 - self.a;
                let (lo, i1) = decreasing_root(|v| sigmoid(-(s + r * v) / g));
                let (up, i2) = decreasing_root(|v| sigmoid((s - r * v) / g));
                ([lo, up], i1 + i2)
            }
        }
    }

    fn map(&self, mode: SolveMode, x: [f64; 4]) -> [f64; 4] {
        match mode {
            SolveMode::Full => self.full(x),
            SolveMode::Simplified => self.simplified(x),
        }
    }
}

fn max_defect(x: [f64; 4], fx: [f64; 4]) -> f64 {
    x.iter().zip(fx).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Solve the reduced system.
///
/// Every coordinate depends on the others only through the class signals
/// `s₁, s₀`. Given a signal, each coordinate solves a monotone scalar equation.
/// When `b = −a` the signals satisfy `s₀ = −s₁` and the consistency equation
/// `s₁ = signal(x(s₁))` is strictly monotone in `s₁`; when `b = 0` the two
/// signals decouple into separate monotone equations. All of them are solved by
/// bisection, so there is no step size or damping to tune.
pub fn solve_fixed_point(
    counts: &SurvivalCounts,
    a: f64,
    b: f64,
    gamma: f64,
    mode: SolveMode,
) -> Result<FixedPoint> {
    let regime = Regime::from_similarities(a, b)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config(format!("gamma = {gamma} must be positive")));
    }
    let sys = System {
        a,
        b,
        gamma,
        n: [
            counts.n11 as f64,
            counts.n10 as f64,
            counts.n01 as f64,
            counts.n00 as f64,
        ],
    };
    let [n11, n10, n01, n00] = sys.n;
    let bound = a * (n11 + n10 + n01 + n00) + 1.0;

    let (x, iterations) = match regime {
        Regime::Symmetric => {
            // With `s₀ = −s₁` the class-0 equations coincide with the class-1
            // ones, so `C̄ = B̄` and `D̄ = Ā`.
            let consistency = |s: f64| {
                let ([ab, bb], _) = sys.coords(mode, s);
                s - a * ((n11 + n00) * ab - (n10 + n01) * bb)
            };
            let (s1, it) = increasing_root(consistency, bound, gamma);
            let ([ab, bb], _) = sys.coords(mode, s1);
            ([ab, bb, bb, ab], it)
        }
        Regime::Skewed => {
            let class = |pos: f64, neg: f64| {
                let (s, it) = increasing_root(
                    |s| {
                        let ([lo, up], _) = sys.coords(mode, s);
                        s - a * (pos * lo - neg * up)
                    },
                    bound,
                    gamma,
                );
                (sys.coords(mode, s).0, it)
            };
            let ([ab, bb], i1) = class(n11, n10);
            let ([cb, db], i0) = class(n01, n00);
            ([ab, bb, cb, db], i1 + i0)
        }
    };

    let residual = max_defect(x, sys.map(mode, x));
    if !(residual <= FIXED_POINT_TOL) {
        return Err(Error::NonConvergence {
            what: "fixed-point bisection",
            iterations,
            residual,
        });
    }
    Ok(FixedPoint {
        a_bar: x[0],
        b_bar: x[1],
        c_bar: x[2],
        d_bar: x[3],
        residual,
        iterations,
        regime,
        mode,
    })
}

/// Root of `v = g(v)` on `[0, 1]` for nonincreasing `g` with values in `[0, 1]`.
fn decreasing_root(g: impl Fn(f64) -> f64) -> (f64, usize) {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut steps = 0;
    // Far below the rounding of `g` itself, but stops short of subnormals.
    while hi - lo > 1e-18 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        steps += 1;
        let f = mid - g(mid);
        if f == 0.0 {
            return (mid, steps);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let defect = |v: f64| (v - g(v)).abs();
    (if defect(lo) < defect(hi) { lo } else { hi }, steps)
}

/// Root of an increasing `h` on `[−bound, bound]`. Coordinates move by at most
/// `|δs|/(4γ)` per signal error `δs`, so the bracket is narrowed until it is a
/// few ulps of `|s| + γ` wide.
fn increasing_root(h: impl Fn(f64) -> f64, bound: f64, gamma: f64) -> (f64, usize) {
    let (mut lo, mut hi) = (-bound, bound);
    let mut steps = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= f64::EPSILON * (mid.abs() + gamma) {
            break;
        }
        steps += 1;
        let f = h(mid);
        if f == 0.0 {
            return (mid, steps);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (if h(lo).abs() < h(hi).abs() { lo } else { hi }, steps)
}

/// Training-set accuracy implied by a fixed point:
/// `(N₁₁·1[Ā<½] + N₀₀·1[D̄<½] + N₁₀·1[B̄>½] + N₀₁·1[C̄>½]) / ΣN`.
pub fn acc_hat(counts: &SurvivalCounts, fp: &FixedPoint) -> Result<f64> {
    let kept = counts.kept();
    if kept == 0 {
        return Err(Error::Undefined("accuracy on an empty mask"));
    }
    let hits = counts.n11 * u64::from(fp.a_bar < 0.5)
        + counts.n00 * u64::from(fp.d_bar < 0.5)
        + counts.n10 * u64::from(fp.b_bar > 0.5)
        + counts.n01 * u64::from(fp.c_bar > 0.5);
    Ok(hits as f64 / kept as f64)
}

/// Count condition under which the fixed point gives perfect training accuracy.
pub fn perfect_accuracy_condition(counts: &SurvivalCounts, regime: Regime) -> bool {
    match regime {
        Regime::Symmetric => counts.wrong() < counts.correct(),
        Regime::Skewed => counts.n10 < counts.n11 && counts.n01 < counts.n00,
    }
}
