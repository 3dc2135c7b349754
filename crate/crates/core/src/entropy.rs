//! Entropies, Fisher information, entropy production and the constants that
//! appear in the improved decay estimates.
//!
//! The integrand of `E_p` is evaluated in Bregman form,
//! `(w^p − 1 − p(w − 1))/(p − 1)`, which differs from `(w^p − 1)/(p − 1)` by a
//! multiple of `∫(w − 1) dμ` and therefore has the same integral for unit-mass
//! data. It is nonnegative pointwise and can be computed without cancellation
//! when `w` is close to 1.

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};
use crate::field::{BoundsEstimate, FieldSample, GridField, TOL_POS};
use crate::hermite::weighted_sum;

/// Default `|p − 1|` below which logarithmic forms are used.
pub const P1_THRESHOLD: f64 = 1e-6;

/// Allowed deviation of `∫ w dμ` from 1.
pub const MASS_TOL: f64 = 1e-8;

/// Exponent `p ∈ [1, 2]` together with the switch-over to the `p = 1` forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub p: f64,
    pub p1_threshold: f64,
}

impl EntropyParams {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { p, p1_threshold: P1_THRESHOLD })
    }

    pub fn with_threshold(p: f64, p1_threshold: f64) -> Result<Self> {
        check_p(p)?;
        if !(p1_threshold >= 0.0 && p1_threshold < 1.0) {
            return usage(format!("threshold must lie in [0, 1), got {p1_threshold}"));
        }
        Ok(Self { p, p1_threshold })
    }

    fn is_log(&self) -> bool {
        (self.p - 1.0).abs() <= self.p1_threshold
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&p) {
        return usage(format!("p must lie in [1, 2], got {p}"));
    }
    Ok(())
}

/// Pointwise `(w^p − 1 − p(w − 1))/(p − 1)`, or `w log w − (w − 1)` on the
/// logarithmic branch.
pub fn bregman(w: f64, params: &EntropyParams) -> f64 {
    let p = params.p;
    let u = w - 1.0;
    if u.abs() < 1e-4 {
        return u * u * h_series(u, p);
    }
    if w == 0.0 {
        return 1.0;
    }
    let l = u.ln_1p();
    let q = p - 1.0;
    let e = if params.is_log() { l } else { (q * l).exp_m1() / q };
    w * e - u
}

/// Taylor expansion of `h_p(1 + u)` to fourth order.
fn h_series(u: f64, p: f64) -> f64 {
    let c1 = p * (p - 2.0) / 6.0;
    let c2 = c1 * (p - 3.0) / 4.0;
    let c3 = c2 * (p - 4.0) / 5.0;
    p / 2.0 + u * (c1 + u * (c2 + u * c3))
}

/// `h_p(s) = (s^p − 1 − p(s − 1)) / ((p − 1)(s − 1)²)`, with `h_1` the
/// logarithmic limit; `h_p(0) = 1`, `h_p(1) = p/2`.
pub fn h_p(s: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(s >= 0.0) || !s.is_finite() {
        return domain(format!("h_p needs s ≥ 0, got {s}"));
    }
    let params = EntropyParams::new(p)?;
    let u = s - 1.0;
    if u.abs() < 1e-4 {
        return Ok(h_series(u, p));
    }
    Ok(bregman(s, &params) / (u * u))
}

/// `‖w‖_∞^{2−p} · h_p(inf w)`.
pub fn h_functional(bounds: &BoundsEstimate, p: f64) -> Result<f64> {
    h_functional_from(bounds.inf, bounds.sup, p)
}

/// As [`h_functional`] from explicit extremes.
pub fn h_functional_from(inf: f64, sup: f64, p: f64) -> Result<f64> {
    if inf < 0.0 {
        return domain(format!("infimum {inf} is negative"));
    }
    if !(sup >= inf) {
        return domain(format!("sup {sup} below inf {inf}"));
    }
    Ok(sup.powf(2.0 - p) * h_p(inf, p)?)
}

/// Generalized Csiszár-Kullback bound
/// `A_p(s) = 2^{1/p}/√p · (1 + (p−1)s)^{1−p/2} · √s`.
pub fn ck_bound(s: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(s >= 0.0) {
        return domain(format!("A_p needs s ≥ 0, got {s}"));
    }
    Ok(2f64.powf(1.0 / p) / p.sqrt() * (1.0 + (p - 1.0) * s).powf(1.0 - p / 2.0) * s.sqrt())
}

/// Inputs of the interpolated Beckner-type constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRequest {
    pub n: usize,
    pub p: f64,
    /// Constant at `p = 1` (log-Sobolev); upper bound 2.
    pub b_n1: f64,
    /// Constant at `p = 2` (Poincaré); `1/n` under the moment condition.
    pub b_n2: f64,
}

impl ConstantsRequest {
    /// Upper-bound defaults `B_{n,1} = 2`, `B_{n,2} = 1/n`.
    pub fn new(n: usize, p: f64) -> Self {
        Self { n, p, b_n1: 2.0, b_n2: 1.0 / n.max(1) as f64 }
    }
}

/// `B_{n,p} = [1 − ((2−p)/p)^{B_{n,1}/(2B_{n,2})}] B_{n,2} / (p − 1)`, with the
/// endpoints returned as given.
pub fn beckner_constant(req: &ConstantsRequest) -> Result<f64> {
    if req.n == 0 {
        return usage("moment order n must be at least 1");
    }
    check_p(req.p)?;
    if !(req.b_n1 > 0.0 && req.b_n2 > 0.0) {
        return usage("endpoint constants must be positive");
    }
    let p = req.p;
    if p == 1.0 {
        return Ok(req.b_n1);
    }
    if p == 2.0 {
        return Ok(req.b_n2);
    }
    let expo = req.b_n1 / (2.0 * req.b_n2);
    Ok(one_minus_ratio_pow(p, expo) * req.b_n2 / (p - 1.0))
}

/// `1 − ((2−p)/p)^e`, accurate for `p` near 1.
fn one_minus_ratio_pow(p: f64, e: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    let ln_r = ((2.0 - 2.0 * p) / p).ln_1p();
    -(e * ln_r).exp_m1()
}

/// `λ(n, p) = (2/p) n (p − 1) / [1 − ((2−p)/p)^n]`, with `λ(n, 1) = 1`.
pub fn lambda_np(n: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    check_p(p)?;
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok(2.0 / p * n as f64 * (p - 1.0) / one_minus_ratio_pow(p, n as f64))
}

/// `K[n,p,w] = [1 − ((2−p)/p)^{2 H_1[w]}] / (n (p − 1))` for `1 < p < 2`.
pub fn k_npw(n: usize, p: f64, h1: f64) -> Result<f64> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    if !(p > 1.0 && p < 2.0) {
        return usage(format!("K[n,p,w] needs 1 < p < 2, got {p}"));
    }
    if !(h1 > 0.0) {
        return usage(format!("H_1 must be positive, got {h1}"));
    }
    Ok(one_minus_ratio_pow(p, 2.0 * h1) / (n as f64 * (p - 1.0)))
}

/// Decay rate `4/(p K[n,p,w])`, extended to the endpoints by continuity:
/// `n/H_1` at `p = 1` and `2n` at `p = 2`.
pub fn rate_from_k(n: usize, p: f64, h1: f64) -> Result<f64> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    check_p(p)?;
    if !(h1 > 0.0) {
        return usage(format!("H_1 must be positive, got {h1}"));
    }
    if p == 1.0 {
        return Ok(n as f64 / h1);
    }
    if p == 2.0 {
        return Ok(2.0 * n as f64);
    }
    Ok(4.0 / (p * k_npw(n, p, h1)?))
}

/// `Σ W_i g(w_i)` over a weighted point set, after checking positivity.
fn weighted_map(values: &[f64], weights: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    check_positive(values)?;
    let vals: Vec<f64> = values.iter().map(|&w| g(w)).collect();
    Ok(weighted_sum(weights, &vals))
}

fn check_positive(values: &[f64]) -> Result<()> {
    if let Some((i, &w)) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, &w)| !(w >= TOL_POS))
    {
        return domain(format!("value {w:.6e} below positivity tolerance at point {i}"));
    }
    Ok(())
}

fn check_mass(values: &[f64], weights: &[f64]) -> Result<()> {
    let mass = weighted_sum(weights, values);
    if (mass - 1.0).abs() > MASS_TOL {
        return domain(format!("mass {mass:.12} differs from 1"));
    }
    Ok(())
}

/// `E_p` for values `w_i` carrying probability weights `W_i`.
pub fn entropy_weighted(values: &[f64], weights: &[f64], params: &EntropyParams) -> Result<f64> {
    if values.len() != weights.len() {
        return usage("values and weights differ in length");
    }
    check_positive(values)?;
    check_mass(values, weights)?;
    weighted_map(values, weights, |w| bregman(w, params))
}

/// `E_p[w] = ∫ (w^p − 1)/(p − 1) dμ`, or `∫ w log w dμ` near `p = 1`.
pub fn entropy_p(grid: &GridField, p: f64) -> Result<f64> {
    entropy_with(grid, &EntropyParams::new(p)?)
}

pub fn entropy_with(grid: &GridField, params: &EntropyParams) -> Result<f64> {
    entropy_weighted(grid.values(), &grid.rule().tensor_weights(), params)
}

/// `∫ |∇w|²/w dμ`.
pub fn fisher_info(grid: &GridField) -> Result<f64> {
    production_p(grid, 1.0)
}

/// `(4/p) ∫ |∇ w^{p/2}|² dμ = p ∫ w^{p−2} |∇w|² dμ`.
pub fn production_p(grid: &GridField, p: f64) -> Result<f64> {
    check_p(p)?;
    let g2 = grid.grad_sq()?;
    production_weighted(grid.values(), &g2, &grid.rule().tensor_weights(), p)
}

/// Production from pointwise `w` and `|∇w|²`.
pub fn production_weighted(values: &[f64], grad_sq: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    check_positive(values)?;
    let vals: Vec<f64> = values
        .iter()
        .zip(grad_sq)
        .map(|(&w, &g)| p * w.powf(p - 2.0) * g)
        .collect();
    Ok(weighted_sum(weights, &vals))
}

/// Entropy of a sample whose bounds certify positivity.
pub fn sample_entropy(sample: &FieldSample, p: f64) -> Result<f64> {
    sample.require_positive("entropy")?;
    entropy_p(&sample.grid, p)
}

/// Production of a sample whose bounds certify positivity.
pub fn sample_production(sample: &FieldSample, p: f64) -> Result<f64> {
    sample.require_positive("entropy production")?;
    production_p(&sample.grid, p)
}
