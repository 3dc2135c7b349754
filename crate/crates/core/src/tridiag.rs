//! Symmetric tridiagonal eigenproblems.
//!
//! Eigenvalues are located by Sturm-sequence bisection, which yields each one
//! to full relative precision independently of the others. Eigenvectors come
//! from inverse iteration on the pivoted tridiagonal factorization, with
//! Gram-Schmidt inside clusters of close eigenvalues.

use crate::error::{usage, Error, Result};

/// A real symmetric tridiagonal matrix: `diag` has length n, `off` length n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return usage("tridiagonal matrix must be non-empty");
        }
        if off.len() + 1 != diag.len() {
            return usage(format!(
                "off-diagonal length {} does not match dimension {}",
                off.len(),
                diag.len()
            ));
        }
        if diag.iter().chain(off.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// y = A x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    /// Number of eigenvalues strictly less than `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE * self.norm_bound().max(1.0);
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.dim() {
            return usage(format!("eigenvalue index {k} out of range {}", self.dim()));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let scale = self.norm_bound();
        lo -= 2.0 * f64::EPSILON * scale + f64::MIN_POSITIVE;
        hi += 2.0 * f64::EPSILON * scale + f64::MIN_POSITIVE;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The `m` smallest eigenvalues in ascending order.
    pub fn lowest_eigenvalues(&self, m: usize) -> Result<Vec<f64>> {
        if m > self.dim() {
            return usage(format!("requested {m} eigenvalues of a {}x{} matrix", self.dim(), self.dim()));
        }
        (0..m).map(|k| self.eigenvalue(k)).collect()
    }

    /// Solves (A - shift I) x = b by Gaussian elimination with partial pivoting.
    /// Zero pivots are replaced by a tiny multiple of the matrix norm, which is
    /// exactly what inverse iteration wants.
    fn shifted_solve(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let tiny = f64::EPSILON * self.norm_bound();
        if n == 1 {
            let mut p = self.diag[0] - shift;
            if p.abs() < tiny {
                p = tiny;
            }
            return vec![b[0] / p];
        }
        // Row i of U holds (u0, u1, u2) at columns i, i+1, i+2.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();
        // current row being eliminated: (a, c, 0) at columns i, i+1, i+2
        let mut a = self.diag[0] - shift;
        let mut c = self.off[0];
        let mut cc = 0.0;
        for i in 0..n - 1 {
            let sub = self.off[i];
            let nd = self.diag[i + 1] - shift;
            let nu = if i + 2 < n { self.off[i + 1] } else { 0.0 };
            if a.abs() >= sub.abs() {
                let mut piv = a;
                if piv.abs() < tiny {
                    piv = tiny;
                }
                let l = sub / piv;
                u0[i] = piv;
                u1[i] = c;
                u2[i] = cc;
                rhs[i + 1] -= l * rhs[i];
                a = nd - l * c;
                c = nu - l * cc;
                cc = 0.0;
            } else {
                // swap current row with the next one
                let l = a / sub;
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = nu;
                rhs.swap(i, i + 1);
                rhs[i + 1] -= l * rhs[i];
                let na = c - l * nd;
                let nc = cc - l * nu;
                a = na;
                c = nc;
                cc = 0.0;
            }
        }
        if a.abs() < tiny {
            a = tiny;
        }
        u0[n - 1] = a;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }

    /// Eigenpairs for the `m` smallest eigenvalues. Vectors are unit length in
    /// the Euclidean norm with a positive first significant component.
    pub fn lowest_eigenpairs(&self, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let values = self.lowest_eigenvalues(m)?;
        let n = self.dim();
        let cluster_gap = 1e-3 * self.norm_bound();
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (k, &lambda) in values.iter().enumerate() {
            // deterministic, generic start vector
            let mut x: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.754_877_666 + k as f64 * 0.31).sin())
                .collect();
            normalize(&mut x);
            let cluster: Vec<usize> = (0..k)
                .filter(|&j| (values[j] - lambda).abs() < cluster_gap)
                .collect();
            for _ in 0..4 {
                x = self.shifted_solve(lambda, &x);
                for &j in &cluster {
                    let d = dot(&x, &vectors[j]);
                    for (xi, vi) in x.iter_mut().zip(&vectors[j]) {
                        *xi -= d * vi;
                    }
                }
                if !normalize(&mut x) {
                    return Err(Error::Numeric {
                        message: format!("inverse iteration collapsed for eigenvalue {k}"),
                        residual: f64::NAN,
                    });
                }
            }
            let lead = x.iter().copied().find(|v| v.abs() > 1e-8).unwrap_or(1.0);
            if lead < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            vectors.push(x);
        }
        Ok((values, vectors))
    }

    /// Euclidean residual norm of an eigenpair.
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(a, x)| (a - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> bool {
    let n = dot(x, x).sqrt();
    if !(n.is_finite() && n > 0.0) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}
