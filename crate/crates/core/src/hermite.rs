//! Orthonormal Hermite polynomials for the standard Gaussian measure,
//! multi-index bookkeeping and tensorized Gauss-Hermite quadrature.
//!
//! `h_n` is the probabilists' Hermite polynomial normalized so that
//! `∫ h_m h_n dμ = δ_mn` with `dμ = (2π)^{-1/2} e^{-y²/2} dy`. The tensor basis
//! `H_k(x) = Π_j h_{k_j}(x_j)` diagonalizes the Ornstein-Uhlenbeck operator
//! with eigenvalue `|k|`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};
use crate::tridiag::SymTridiagonal;

/// Largest supported dimension for tensor grids.
pub const MAX_DIM: usize = 3;

/// A multi-index `k = (k_1, …, k_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(k: Vec<usize>) -> Result<Self> {
        if k.is_empty() {
            return usage("multi-index needs at least one entry");
        }
        Ok(Self(k))
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|k| = Σ k_j`
    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices with `|k| ≤ N` in graded lexicographic order: by total
/// degree, then lexicographically descending in the entries, so in 2-D degree
/// one reads `(1,0), (0,1)`. Index 0 is always the constant function.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    dim: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl HermiteBasis {
    pub fn new(dim: usize, max_degree: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return usage(format!("dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        let mut indices = Vec::new();
        for degree in 0..=max_degree {
            let mut buf = vec![0; dim];
            compositions(degree, 0, &mut buf, &mut indices);
        }
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, k)| (k.0.clone(), i))
            .collect();
        Ok(Self { dim, max_degree, indices, lookup })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index_of(&self, k: &[usize]) -> Option<usize> {
        self.lookup.get(k).copied()
    }

    /// `|k|` for each basis position.
    pub fn degrees(&self) -> Vec<usize> {
        self.indices.iter().map(MultiIndex::total_degree).collect()
    }
}

/// Appends every composition of `remaining` into the slots `pos..` in
/// descending lexicographic order.
fn compositions(remaining: usize, pos: usize, buf: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(MultiIndex(buf.clone()));
        return;
    }
    for first in (0..=remaining).rev() {
        buf[pos] = first;
        compositions(remaining - first, pos + 1, buf, out);
    }
    buf[pos] = 0;
}

/// `[h_0(y), …, h_N(y)]` via the normalized three-term recurrence
/// `h_{n+1} = (y h_n − √n h_{n−1}) / √(n+1)`.
pub fn hermite_eval_all(max_degree: usize, y: f64) -> Result<Vec<f64>> {
    if !y.is_finite() {
        return domain(format!("hermite evaluation at non-finite point {y}"));
    }
    let mut out = Vec::with_capacity(max_degree + 1);
    fill_hermite(y, max_degree, &mut out);
    Ok(out)
}

/// Recurrence without the finiteness check, for inner loops over grid points.
pub(crate) fn fill_hermite(y: f64, max_degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    out.push(y);
    for n in 1..max_degree {
        let nf = n as f64;
        let next = (y * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
        out.push(next);
    }
}

/// `√n`, the factor in `h_n' = √n h_{n−1}`; zero for the constant.
pub fn hermite_deriv_coeff(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// `H_k(x) = Π_j h_{k_j}(x_j)`.
pub fn tensor_eval(k: &MultiIndex, x: &[f64]) -> Result<f64> {
    if k.dim() != x.len() {
        return usage(format!(
            "point has dimension {} but multi-index has {}",
            x.len(),
            k.dim()
        ));
    }
    let mut prod = 1.0;
    for (&kj, &xj) in k.entries().iter().zip(x) {
        prod *= *hermite_eval_all(kj, xj)?.last().expect("non-empty");
    }
    Ok(prod)
}

/// Table `t[i * (N+1) + n] = h_n(points[i])`.
pub(crate) fn hermite_table(points: &[f64], max_degree: usize) -> Vec<f64> {
    let cols = max_degree + 1;
    let mut table = Vec::with_capacity(points.len() * cols);
    let mut buf = Vec::with_capacity(cols);
    for &y in points {
        fill_hermite(y, max_degree, &mut buf);
        table.extend_from_slice(&buf);
    }
    table
}

/// Table of derivatives `h_n'(points[i]) = √n h_{n−1}(points[i])`, same layout.
pub(crate) fn hermite_deriv_table(points: &[f64], max_degree: usize) -> Vec<f64> {
    let cols = max_degree + 1;
    let mut table = Vec::with_capacity(points.len() * cols);
    let mut buf = Vec::with_capacity(cols);
    for &y in points {
        fill_hermite(y, max_degree, &mut buf);
        table.push(0.0);
        for n in 1..cols {
            table.push(hermite_deriv_coeff(n) * buf[n - 1]);
        }
    }
    table
}

/// Gauss-Hermite rule for the standard Gaussian probability measure, applied
/// on each of `dim` axes. Tensor nodes are ordered row-major, axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Univariate Gauss-Hermite rule of order `m` for `dμ`.
pub fn gauss_hermite_rule(m: usize) -> Result<QuadratureRule> {
    QuadratureRule::gauss_hermite(m, 1)
}

impl QuadratureRule {
    /// Nodes are the eigenvalues of the Jacobi matrix (zero diagonal, off-diagonal
    /// √1 … √(m−1)). The normalized eigenvector for node x is
    /// `(h_0(x), …, h_{m−1}(x)) / √Σ h_j(x)²`, so the Golub-Welsch weight (its
    /// squared first component) is `1 / Σ_{j<m} h_j(x)²`; we evaluate that from
    /// the recurrence rather than from an iterated vector.
    pub fn gauss_hermite(m: usize, dim: usize) -> Result<Self> {
        if m == 0 {
            return usage("quadrature order must be at least 1");
        }
        if dim == 0 || dim > MAX_DIM {
            return usage(format!("dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        let off: Vec<f64> = (1..m).map(|j| (j as f64).sqrt()).collect();
        let jacobi = SymTridiagonal::new(vec![0.0; m], off)?;
        let mut nodes = jacobi.lowest_eigenvalues(m)?;
        // polish with Newton on h_m (h_m' = √m h_{m-1}) and symmetrize
        let mut buf = Vec::with_capacity(m + 1);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                fill_hermite(*x, m, &mut buf);
                let d = (m as f64).sqrt() * buf[m - 1];
                if d != 0.0 {
                    *x -= buf[m] / d;
                }
            }
        }
        for i in 0..m / 2 {
            let s = 0.5 * (nodes[m - 1 - i] - nodes[i]);
            nodes[i] = -s;
            nodes[m - 1 - i] = s;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                fill_hermite(x, m - 1, &mut buf);
                1.0 / buf.iter().map(|h| h * h).sum::<f64>()
            })
            .collect();
        for i in 0..m / 2 {
            let w = 0.5 * (weights[i] + weights[m - 1 - i]);
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { dim, nodes, weights })
    }

    /// The same univariate rule on `dim` axes.
    pub fn tensorized(&self, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return usage(format!("dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        Ok(Self { dim, nodes: self.nodes.clone(), weights: self.weights.clone() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total tensor node count `m^d`.
    pub fn num_points(&self) -> usize {
        self.order().pow(self.dim as u32)
    }

    /// Per-axis node positions of tensor point `i`.
    pub fn axis_indices(&self, mut i: usize) -> Vec<usize> {
        let m = self.order();
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = i % m;
            i /= m;
        }
        idx
    }

    /// Coordinates of tensor point `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.axis_indices(i).into_iter().map(|j| self.nodes[j]).collect()
    }

    /// Tensor weights, one per tensor point.
    pub fn tensor_weights(&self) -> Vec<f64> {
        tensor_product_1d(&self.weights, self.dim)
    }

    /// Largest |node|.
    pub fn max_abs_node(&self) -> f64 {
        self.nodes.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// `∫ f dμ ≈ Σ_i W_i f(x_i)` for values given at the tensor nodes.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.num_points() {
            return usage(format!(
                "expected {} node values, got {}",
                self.num_points(),
                values.len()
            ));
        }
        Ok(weighted_sum(&self.tensor_weights(), values))
    }
}

/// Free-function form of [`QuadratureRule::integrate`].
pub fn integrate_mu(values: &[f64], rule: &QuadratureRule) -> Result<f64> {
    rule.integrate(values)
}

/// Row-major tensor product of a 1-D vector with itself `dim` times.
pub(crate) fn tensor_product_1d(v: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * v.len());
        for &a in &out {
            for &b in v {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// Compensated dot product; quadrature sums mix weights spanning many decades.
pub(crate) fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (w, v) in weights.iter().zip(values) {
        let y = w * v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Oracle: `h_n` from the Rodrigues-type definition, i.e. the explicit
    /// probabilists' polynomial `He_n(y) = n! Σ_m (-1)^m y^{n-2m} / (m! (n-2m)! 2^m)`
    /// divided by `√(n!)`.
    fn rodrigues(n: usize, y: f64) -> f64 {
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let mut s = 0.0;
        for m in 0..=n / 2 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * y.powi((n - 2 * m) as i32)
                / (fact(m) * fact(n - 2 * m) * 2f64.powi(m as i32));
        }
        s * fact(n) / fact(n).sqrt()
    }

    #[test]
    fn eval_examples() {
        let v = hermite_eval_all(2, 0.0).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert_abs_diff_eq!(v[2], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(hermite_eval_all(1, 2.0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(hermite_eval_all(0, 17.3).unwrap(), vec![1.0]);
        assert!(hermite_eval_all(3, f64::NAN).is_err());
        assert!(hermite_eval_all(3, f64::INFINITY).is_err());
    }

    #[test]
    fn recurrence_matches_rodrigues_oracle() {
        for n in 0..=12 {
            for &y in &[-3.3, -1.0, 0.0, 0.4, 2.5] {
                let r = hermite_eval_all(n, y).unwrap()[n];
                let o = rodrigues(n, y);
                assert!((r - o).abs() < 1e-11 * (1.0 + o.abs()), "n={n} y={y}: {r} vs {o}");
            }
        }
    }

    #[test]
    fn derivative_coefficients() {
        assert_eq!(hermite_deriv_coeff(1), 1.0);
        assert_eq!(hermite_deriv_coeff(4), 2.0);
        assert_eq!(hermite_deriv_coeff(0), 0.0);
        // h_4' = 2 h_3, checked by central differences of the recurrence
        let y = 0.73;
        let step = 1e-5;
        let fd = (hermite_eval_all(4, y + step).unwrap()[4] - hermite_eval_all(4, y - step).unwrap()[4])
            / (2.0 * step);
        assert!((fd - 2.0 * hermite_eval_all(3, y).unwrap()[3]).abs() < 1e-8);
    }

    #[test]
    fn tensor_eval_examples() {
        let k00 = MultiIndex::new(vec![0, 0]).unwrap();
        assert_eq!(tensor_eval(&k00, &[3.0, -5.0]).unwrap(), 1.0);
        let k11 = MultiIndex::new(vec![1, 1]).unwrap();
        assert_eq!(tensor_eval(&k11, &[2.0, 3.0]).unwrap(), 6.0);
        let k20 = MultiIndex::new(vec![2, 0]).unwrap();
        assert_abs_diff_eq!(
            tensor_eval(&k20, &[0.0, 0.0]).unwrap(),
            -std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert!(tensor_eval(&k20, &[0.0]).is_err());
    }

    #[test]
    fn basis_enumeration_is_graded_lex() {
        let b = HermiteBasis::new(2, 2).unwrap();
        let got: Vec<Vec<usize>> = b.indices().iter().map(|k| k.entries().to_vec()).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(b.index_of(&[1, 1]), Some(4));
        // binomial(N + d, d) elements
        assert_eq!(HermiteBasis::new(3, 12).unwrap().len(), 455);
        assert!(HermiteBasis::new(4, 2).is_err());
        assert!(HermiteBasis::new(0, 2).is_err());
    }

    #[test]
    fn rule_examples() {
        let r1 = gauss_hermite_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_abs_diff_eq!(r1.weights()[0], 1.0, epsilon = 1e-15);

        let r2 = gauss_hermite_rule(2).unwrap();
        assert_abs_diff_eq!(r2.nodes()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.nodes()[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.weights()[0], 0.5, epsilon = 1e-14);

        let r3 = gauss_hermite_rule(3).unwrap();
        let s3 = 3f64.sqrt();
        for (x, e) in r3.nodes().iter().zip([-s3, 0.0, s3]) {
            assert_abs_diff_eq!(*x, e, epsilon = 1e-14);
        }
        for (w, e) in r3.weights().iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-14);
        }
        assert!(gauss_hermite_rule(0).is_err());
    }

    #[test]
    fn integrate_examples() {
        let r = gauss_hermite_rule(6).unwrap();
        assert_abs_diff_eq!(r.integrate(&[1.0; 6]).unwrap(), 1.0, epsilon = 1e-14);
        let sq: Vec<f64> = r.nodes().iter().map(|x| x * x).collect();
        assert_abs_diff_eq!(integrate_mu(&sq, &r).unwrap(), 1.0, epsilon = 1e-13);
        let h12: Vec<f64> = r
            .nodes()
            .iter()
            .map(|&x| {
                let h = hermite_eval_all(2, x).unwrap();
                h[1] * h[2]
            })
            .collect();
        assert!(r.integrate(&h12).unwrap().abs() < 1e-12);
        assert!(r.integrate(&[1.0; 5]).is_err());
    }

    #[test]
    fn weights_sum_to_one_and_high_order_is_stable() {
        for m in [1, 2, 5, 10, 20, 40, 80] {
            let r = gauss_hermite_rule(m).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "m={m}: {s}");
            assert!(r.weights().iter().all(|&w| w > 0.0));
        }
        let h = hermite_eval_all(50, 10.0).unwrap();
        assert!(h.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tensor_layout() {
        let r = QuadratureRule::gauss_hermite(3, 2).unwrap();
        assert_eq!(r.num_points(), 9);
        assert_eq!(r.axis_indices(5), vec![1, 2]);
        assert_eq!(r.point(5), vec![r.nodes()[1], r.nodes()[2]]);
        let tw = r.tensor_weights();
        assert_abs_diff_eq!(tw.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    proptest! {
        /// Random polynomials of degree ≤ 2m−1 against the exact moments
        /// E[y^{2q}] = (2q−1)!!, E[y^{odd}] = 0.
        #[test]
        fn quadrature_is_exact_on_polynomials(m in 1usize..16, seed in proptest::collection::vec(-1.0f64..1.0, 32)) {
            let r = gauss_hermite_rule(m).unwrap();
            let deg = 2 * m - 1;
            let coeffs = &seed[..=deg.min(31)];
            let moment = |j: usize| -> f64 {
                if j % 2 == 1 { 0.0 } else { (1..j).step_by(2).map(|i| i as f64).product() }
            };
            let exact: f64 = coeffs.iter().enumerate().map(|(j, c)| c * moment(j)).sum();
            let vals: Vec<f64> = r.nodes().iter()
                .map(|&x| coeffs.iter().enumerate().map(|(j, c)| c * x.powi(j as i32)).sum())
                .collect();
            let q = r.integrate(&vals).unwrap();
            let scale = coeffs.iter().enumerate().map(|(j, c)| c.abs() * moment(j + j % 2)).sum::<f64>().max(1.0);
            prop_assert!((q - exact).abs() < 1e-10 * scale, "m={} q={} exact={}", m, q, exact);
        }
    }
}
