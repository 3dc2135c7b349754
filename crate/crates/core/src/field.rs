//! Density ratios `w = v / v_∞` as Hermite expansions and as values on
//! quadrature grids.
//!
//! A [`SpectralField`] stores `c_k` with `w = Σ_{|k|≤N} c_k H_k`. Grid values
//! come from sum-factorized synthesis; gradients are exact through the shift
//! `∂_j H_k = √k_j H_{k−e_j}`. Global extrema of a multivariate polynomial are
//! out of reach, so [`estimate_bounds`] samples a dense lattice (plus the
//! quadrature nodes, when given) and separately flags polynomial tails that
//! are unbounded below.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::exec::Exec;
use crate::hermite::{hermite_deriv_table, hermite_table, HermiteBasis, QuadratureRule};
use crate::io::Sig17;
use crate::tensor::{contract_all, transpose};

/// Positivity tolerance for fields entering entropy functionals.
pub const TOL_POS: f64 = 1e-10;

/// Quadrature order used for nonlinear functionals of a degree-`N` field.
pub fn default_quad_order(max_degree: usize) -> usize {
    2 * max_degree + 4
}

/// `w = Σ_k c_k H_k` with coefficients in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    basis: Arc<HermiteBasis>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(dim: usize, max_degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let basis = HermiteBasis::new(dim, max_degree)?;
        if coeffs.len() != basis.len() {
            return usage(format!(
                "expected {} coefficients for d={dim}, N={max_degree}, got {}",
                basis.len(),
                coeffs.len()
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(Self { basis: Arc::new(basis), coeffs })
    }

    /// `w ≡ 1`.
    pub fn constant(dim: usize, max_degree: usize) -> Result<Self> {
        let basis = HermiteBasis::new(dim, max_degree)?;
        let mut coeffs = vec![0.0; basis.len()];
        coeffs[0] = 1.0;
        Ok(Self { basis: Arc::new(basis), coeffs })
    }

    /// `1 + Σ a_j H_{k_j}` from a list of `(k, a)` pairs.
    pub fn from_modes(dim: usize, max_degree: usize, modes: &[(&[usize], f64)]) -> Result<Self> {
        let mut f = Self::constant(dim, max_degree)?;
        for (k, a) in modes {
            f.set_coeff(k, *a)?;
        }
        Ok(f)
    }

    pub(crate) fn with_basis(basis: Arc<HermiteBasis>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(basis.len(), coeffs.len());
        Self { basis, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn max_degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn basis(&self) -> &HermiteBasis {
        &self.basis
    }

    pub(crate) fn basis_arc(&self) -> Arc<HermiteBasis> {
        Arc::clone(&self.basis)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `H_k`; zero for indices beyond the stored degree.
    pub fn coeff(&self, k: &[usize]) -> f64 {
        self.basis.index_of(k).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, k: &[usize], value: f64) -> Result<()> {
        if k.len() != self.dim() {
            return usage(format!("multi-index of length {} for a {}-d field", k.len(), self.dim()));
        }
        match self.basis.index_of(k) {
            Some(i) => {
                self.coeffs[i] = value;
                Ok(())
            }
            None => usage(format!("|k| = {} exceeds max degree {}", k.iter().sum::<usize>(), self.max_degree())),
        }
    }

    /// `∫ w dμ = c_0`.
    pub fn mass(&self) -> f64 {
        self.coeffs[0]
    }

    /// Largest `|k|` carrying a nonzero coefficient.
    pub fn effective_degree(&self) -> usize {
        self.basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, _)| k.total_degree())
            .max()
            .unwrap_or(0)
    }

    /// Coefficients laid out as a dense `(N+1)^d` tensor.
    fn dense_tensor(&self) -> (Vec<f64>, Vec<usize>) {
        let n1 = self.max_degree() + 1;
        let shape = vec![n1; self.dim()];
        let mut t = vec![0.0; n1.pow(self.dim() as u32)];
        for (k, c) in self.basis.indices().iter().zip(&self.coeffs) {
            let idx = k.entries().iter().fold(0, |acc, &kj| acc * n1 + kj);
            t[idx] = *c;
        }
        (t, shape)
    }

    /// Values on the tensor lattice built from the same 1-D `points` on every
    /// axis (row-major, axis 0 slowest). With `deriv_axis = Some(j)` returns
    /// `∂w/∂x_j` instead.
    pub fn eval_lattice(&self, points: &[f64], deriv_axis: Option<usize>, exec: Exec) -> Vec<f64> {
        let n = self.max_degree();
        let table = hermite_table(points, n);
        let dtable = deriv_axis.map(|_| hermite_deriv_table(points, n));
        let (data, shape) = self.dense_tensor();
        let m = points.len();
        let mats: Vec<(&[f64], usize)> = (0..self.dim())
            .map(|a| {
                let t: &[f64] = match (&dtable, deriv_axis) {
                    (Some(d), Some(j)) if j == a => d,
                    _ => &table,
                };
                (t, m)
            })
            .collect();
        contract_all(data, &shape, &mats, exec)
    }

    /// `w(x)` at one point.
    pub fn eval_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return usage(format!("point of dimension {} for a {}-d field", x.len(), self.dim()));
        }
        let n = self.max_degree();
        let tables: Vec<Vec<f64>> = x.iter().map(|&xj| hermite_table(&[xj], n)).collect();
        Ok(self
            .basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(k, c)| c * k.entries().iter().enumerate().map(|(j, &kj)| tables[j][kj]).product::<f64>())
            .sum())
    }

    /// `∫ |∇w|² dμ = Σ_k |k| c_k²`.
    pub fn gradient_sq_norm(&self) -> f64 {
        self.basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(k, c)| k.total_degree() as f64 * c * c)
            .sum()
    }

    /// `‖w − 1‖_{L²(dμ)}` for a unit-mass field, `√Σ_{k≠0} c_k²`.
    pub fn l2_distance_to_one(&self) -> f64 {
        self.coeffs[1..].iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Copy with every coefficient passed through `f(|k|, c)`.
    pub fn map_coeffs(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let coeffs = self
            .basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(k, &c)| f(k.total_degree(), c))
            .collect();
        Self { basis: Arc::clone(&self.basis), coeffs }
    }

    pub fn to_json(&self) -> String {
        let dto = FieldOut {
            dimension: self.dim(),
            max_degree: self.max_degree(),
            coefficients: self.coeffs.iter().map(|c| Sig17(*c)).collect(),
        };
        serde_json::to_string(&dto).expect("field serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dto: FieldIn =
            serde_json::from_str(s).map_err(|e| Error::Usage(format!("invalid field JSON: {e}")))?;
        Self::new(dto.dimension, dto.max_degree, dto.coefficients)
    }
}

#[derive(Serialize)]
struct FieldOut {
    dimension: usize,
    max_degree: usize,
    coefficients: Vec<Sig17>,
}

#[derive(Deserialize)]
struct FieldIn {
    dimension: usize,
    max_degree: usize,
    coefficients: Vec<f64>,
}

/// Gradient `∂_j w` as a spectral field of the same nominal degree.
pub fn partial_derivative(field: &SpectralField, axis: usize) -> Result<SpectralField> {
    if axis >= field.dim() {
        return usage(format!("axis {axis} out of range for a {}-d field", field.dim()));
    }
    let basis = field.basis();
    let mut coeffs = vec![0.0; basis.len()];
    for (k, c) in basis.indices().iter().zip(field.coeffs()) {
        let kj = k.entries()[axis];
        if kj == 0 {
            continue;
        }
        let mut lower = k.entries().to_vec();
        lower[axis] -= 1;
        let i = basis.index_of(&lower).expect("lower index exists");
        coeffs[i] += (kj as f64).sqrt() * c;
    }
    Ok(SpectralField::with_basis(field.basis_arc(), coeffs))
}

/// Values of `w` (and optionally `∇w`) at the tensor nodes of a rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    rule: QuadratureRule,
    values: Vec<f64>,
    gradient: Option<Vec<Vec<f64>>>,
}

impl GridField {
    pub fn new(rule: QuadratureRule, values: Vec<f64>, gradient: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let n = rule.num_points();
        if values.len() != n {
            return usage(format!("expected {n} node values, got {}", values.len()));
        }
        if let Some(g) = &gradient {
            if g.len() != rule.dim() || g.iter().any(|a| a.len() != n) {
                return usage("gradient grids must have one full node array per axis");
            }
            if g.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite gradient value".into()));
            }
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {bad}")));
        }
        Ok(Self { rule, values, gradient })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self) -> Option<&[Vec<f64>]> {
        self.gradient.as_deref()
    }

    /// `Σ_i W_i f(w_i)`.
    pub fn integrate_map(&self, f: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.values.iter().map(|&w| f(w)).collect();
        crate::hermite::weighted_sum(&self.rule.tensor_weights(), &vals)
    }

    /// `∫ w dμ`.
    pub fn mass(&self) -> f64 {
        self.integrate_map(|w| w)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|∇w|²` at each node; errors when no gradient is attached.
    pub fn grad_sq(&self) -> Result<Vec<f64>> {
        let g = self
            .gradient
            .as_ref()
            .ok_or_else(|| Error::Usage("grid field carries no gradient".into()))?;
        let mut out = vec![0.0; self.values.len()];
        for axis in g {
            for (o, v) in out.iter_mut().zip(axis) {
                *o += v * v;
            }
        }
        Ok(out)
    }
}

/// Values and exact gradients of `field` at the nodes of `rule`.
pub fn synthesize(field: &SpectralField, rule: &QuadratureRule) -> Result<GridField> {
    synthesize_with(field, rule, Exec::default())
}

pub fn synthesize_with(field: &SpectralField, rule: &QuadratureRule, exec: Exec) -> Result<GridField> {
    if rule.dim() != field.dim() {
        return usage(format!("rule dimension {} vs field dimension {}", rule.dim(), field.dim()));
    }
    let values = field.eval_lattice(rule.nodes(), None, exec);
    let gradient = (0..field.dim())
        .map(|j| field.eval_lattice(rule.nodes(), Some(j), exec))
        .collect();
    GridField::new(rule.clone(), values, Some(gradient))
}

/// `c_k = ∫ w H_k dμ` by quadrature; exact for fields of degree ≤ N when the
/// rule order is at least N+1.
pub fn analyze(grid: &GridField, max_degree: usize) -> Result<SpectralField> {
    let rule = grid.rule();
    let m = rule.order();
    if m < max_degree + 1 {
        return usage(format!(
            "quadrature order {m} cannot resolve degree {max_degree} (need ≥ {})",
            max_degree + 1
        ));
    }
    let basis = HermiteBasis::new(rule.dim(), max_degree)?;
    let weighted: Vec<f64> = grid
        .values()
        .iter()
        .zip(rule.tensor_weights())
        .map(|(v, w)| v * w)
        .collect();
    let n1 = max_degree + 1;
    let table_t = transpose(&hermite_table(rule.nodes(), max_degree), m, n1);
    let mats: Vec<(&[f64], usize)> = (0..rule.dim()).map(|_| (table_t.as_slice(), n1)).collect();
    let dense = contract_all(weighted, &vec![m; rule.dim()], &mats, Exec::Sequential);
    let coeffs = basis
        .indices()
        .iter()
        .map(|k| dense[k.entries().iter().fold(0, |acc, &kj| acc * n1 + kj)])
        .collect();
    Ok(SpectralField::with_basis(Arc::new(basis), coeffs))
}

/// `∫|∇w|² dμ` for a spectral field.
pub fn gradient_sq_norm(field: &SpectralField) -> f64 {
    field.gradient_sq_norm()
}

/// `√Σ_{k≠0} c_k²`.
pub fn l2_distance_to_one(field: &SpectralField) -> f64 {
    field.l2_distance_to_one()
}

/// `(∫ |w|^p dμ)^{1/p}` by quadrature.
pub fn lp_norm_mu(grid: &GridField, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return usage(format!("L^p norm needs p ≥ 1, got {p}"));
    }
    Ok(grid.integrate_map(|w| w.abs().powf(p)).powf(1.0 / p))
}

/// `‖w − 1‖_{L^p(dμ)}` by quadrature.
pub fn lp_distance_to_one(grid: &GridField, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return usage(format!("L^p norm needs p ≥ 1, got {p}"));
    }
    Ok(grid.integrate_map(|w| (w - 1.0).abs().powf(p)).powf(1.0 / p))
}

/// Regular lattice `[−L, L]^d` used for inf/sup estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseGrid {
    pub half_width: f64,
    pub spacing: f64,
}

impl DenseGrid {
    /// Spacing above which the estimate is flagged as coarse.
    pub const COARSE_SPACING: f64 = 0.05;

    /// `L = max(6, √(2N+4))`, spacing 0.02 for d ≤ 2 and 0.05 in 3-D.
    pub fn for_degree(max_degree: usize, dim: usize) -> Self {
        let half_width = 6f64.max(((2 * max_degree + 4) as f64).sqrt());
        let spacing = if dim >= 3 { 0.05 } else { 0.02 };
        Self { half_width, spacing }
    }

    pub fn points_per_axis(&self) -> usize {
        ((2.0 * self.half_width / self.spacing).round() as usize).max(1) + 1
    }

    pub fn axis_points(&self) -> Vec<f64> {
        let n = self.points_per_axis();
        let h = 2.0 * self.half_width / (n - 1) as f64;
        (0..n).map(|i| -self.half_width + i as f64 * h).collect()
    }

    pub fn actual_spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_axis() - 1) as f64
    }
}

/// Estimated extremes of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsEstimate {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub inf: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub sup: f64,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub argmin: Vec<f64>,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub argmax: Vec<f64>,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub half_width: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub spacing: f64,
    pub points_per_axis: usize,
    /// Lattice spacing exceeds [`DenseGrid::COARSE_SPACING`].
    pub coarse: bool,
    /// Quadrature nodes were included in the sampled point set.
    pub includes_nodes: bool,
    /// Polynomial tail decreases without bound in some direction.
    pub unbounded_below: bool,
    /// Polynomial tail increases without bound in some direction.
    pub unbounded_above: bool,
}

impl BoundsEstimate {
    /// Bounds of a constant.
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            inf: value,
            sup: value,
            argmin: vec![0.0; dim],
            argmax: vec![0.0; dim],
            half_width: 0.0,
            spacing: 0.0,
            points_per_axis: 1,
            coarse: false,
            includes_nodes: false,
            unbounded_below: false,
            unbounded_above: false,
        }
    }

    /// True when `inf ≥ TOL_POS`.
    pub fn is_positive(&self) -> bool {
        self.inf >= TOL_POS
    }
}

/// Extremes over the dense lattice.
pub fn estimate_bounds(field: &SpectralField, grid: &DenseGrid) -> Result<BoundsEstimate> {
    bounds_impl(field, grid, None, Exec::default())
}

/// Extremes over the dense lattice together with the tensor nodes of `rule`,
/// so that every node used by a quadrature lies inside the reported range.
pub fn estimate_bounds_with_nodes(
    field: &SpectralField,
    grid: &DenseGrid,
    rule: &QuadratureRule,
) -> Result<BoundsEstimate> {
    bounds_impl(field, grid, Some(rule), Exec::default())
}

pub fn estimate_bounds_exec(
    field: &SpectralField,
    grid: &DenseGrid,
    rule: Option<&QuadratureRule>,
    exec: Exec,
) -> Result<BoundsEstimate> {
    bounds_impl(field, grid, rule, exec)
}

fn bounds_impl(
    field: &SpectralField,
    grid: &DenseGrid,
    rule: Option<&QuadratureRule>,
    exec: Exec,
) -> Result<BoundsEstimate> {
    let need = ((2 * field.max_degree() + 4) as f64).sqrt();
    if !(grid.half_width >= need - 1e-12) {
        return usage(format!(
            "dense grid half-width {} below oscillation radius {need:.3}",
            grid.half_width
        ));
    }
    if !(grid.spacing > 0.0 && grid.spacing.is_finite()) {
        return usage("dense grid spacing must be positive");
    }
    let d = field.dim();
    let pts = grid.axis_points();
    let vals = field.eval_lattice(&pts, None, exec);
    let (imin, imax) = argminmax(&vals);
    let coord = |mut i: usize, axis: &[f64]| -> Vec<f64> {
        let m = axis.len();
        let mut c = vec![0.0; d];
        for a in (0..d).rev() {
            c[a] = axis[i % m];
            i /= m;
        }
        c
    };
    let mut inf = vals[imin];
    let mut sup = vals[imax];
    let mut argmin = coord(imin, &pts);
    let mut argmax = coord(imax, &pts);
    if let Some(rule) = rule {
        if rule.dim() != d {
            return usage("rule dimension does not match field");
        }
        let nv = field.eval_lattice(rule.nodes(), None, exec);
        let (jmin, jmax) = argminmax(&nv);
        if nv[jmin] < inf {
            inf = nv[jmin];
            argmin = rule.point(jmin);
        }
        if nv[jmax] > sup {
            sup = nv[jmax];
            argmax = rule.point(jmax);
        }
    }
    let (unbounded_below, unbounded_above) = tail_behaviour(field);
    let spacing = grid.actual_spacing();
    Ok(BoundsEstimate {
        inf,
        sup,
        argmin,
        argmax,
        half_width: grid.half_width,
        spacing,
        points_per_axis: grid.points_per_axis(),
        coarse: spacing > DenseGrid::COARSE_SPACING + 1e-12,
        includes_nodes: rule.is_some(),
        unbounded_below,
        unbounded_above,
    })
}

fn argminmax(v: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[imin] {
            imin = i;
        }
        if x > v[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

/// Sign behaviour of the leading homogeneous part `Σ_{|k|=D} c_k Π x_j^{k_j}/√(k_j!)`
/// along directions of the unit sphere.
fn tail_behaviour(field: &SpectralField) -> (bool, bool) {
    let top = field.effective_degree();
    if top == 0 {
        return (false, false);
    }
    if top % 2 == 1 {
        return (true, true);
    }
    let inv_sqrt_fact = |k: usize| 1.0 / (1..=k).map(|i| i as f64).product::<f64>().sqrt();
    let leading: Vec<(&[usize], f64)> = field
        .basis()
        .indices()
        .iter()
        .zip(field.coeffs())
        .filter(|(k, c)| k.total_degree() == top && **c != 0.0)
        .map(|(k, c)| (k.entries(), *c * k.entries().iter().map(|&kj| inv_sqrt_fact(kj)).product::<f64>()))
        .collect();
    let form = |x: &[f64]| -> f64 {
        leading
            .iter()
            .map(|(k, c)| c * k.iter().zip(x).map(|(&kj, &xj)| xj.powi(kj as i32)).product::<f64>())
            .sum()
    };
    let dirs = sphere_directions(field.dim());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in &dirs {
        let v = form(x);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo < 0.0, hi > 0.0)
}

fn sphere_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 360.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let n = 4000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
    }
}

/// Grid values together with their bounds estimate: the unit handed to the
/// entropy functionals and inequality checks.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: GridField,
    pub bounds: BoundsEstimate,
}

impl FieldSample {
    /// Synthesizes `field` on `rule` and estimates its bounds over `dense`
    /// together with the rule's nodes.
    pub fn from_spectral(field: &SpectralField, rule: &QuadratureRule, dense: &DenseGrid) -> Result<Self> {
        Self::from_spectral_with(field, rule, dense, Exec::default())
    }

    pub fn from_spectral_with(
        field: &SpectralField,
        rule: &QuadratureRule,
        dense: &DenseGrid,
        exec: Exec,
    ) -> Result<Self> {
        let grid = synthesize_with(field, rule, exec)?;
        let bounds = bounds_impl(field, dense, Some(rule), exec)?;
        Ok(Self { grid, bounds })
    }

    /// Default rule (order 2N+4) and default dense lattice.
    pub fn default_for(field: &SpectralField) -> Result<Self> {
        let rule = QuadratureRule::gauss_hermite(default_quad_order(field.max_degree()), field.dim())?;
        let dense = DenseGrid::for_degree(field.max_degree(), field.dim());
        Self::from_spectral(field, &rule, &dense)
    }

    /// Errors unless `inf ≥ TOL_POS`.
    pub fn require_positive(&self, context: &str) -> Result<()> {
        if self.bounds.inf < TOL_POS {
            return Err(Error::NotAdmissible {
                minimum: self.bounds.inf,
                context: format!("{context} (attained at {:?})", self.bounds.argmin),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{gauss_hermite_rule, hermite_eval_all};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rule(m: usize, d: usize) -> QuadratureRule {
        QuadratureRule::gauss_hermite(m, d).unwrap()
    }

    #[test]
    fn synthesize_examples() {
        let f = SpectralField::constant(1, 3).unwrap();
        let g = synthesize(&f, &rule(5, 1)).unwrap();
        assert!(g.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let f = SpectralField::from_modes(1, 2, &[(&[1], 0.5)]).unwrap();
        assert_abs_diff_eq!(f.eval_point(&[2.0]).unwrap(), 2.0, epsilon = 1e-15);

        let f = SpectralField::from_modes(1, 2, &[(&[2], 0.1)]).unwrap();
        assert_abs_diff_eq!(f.eval_point(&[0.0]).unwrap(), 1.0 - 0.1 / 2f64.sqrt(), epsilon = 1e-15);
        // synthesized node values agree with pointwise evaluation
        let r = rule(7, 1);
        let g = synthesize(&f, &r).unwrap();
        for (i, &x) in r.nodes().iter().enumerate() {
            assert_abs_diff_eq!(g.values()[i], f.eval_point(&[x]).unwrap(), epsilon = 1e-14);
        }
        assert!(synthesize(&f, &rule(5, 2)).is_err());
    }

    #[test]
    fn lattice_eval_matches_pointwise_in_3d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let basis = HermiteBasis::new(3, 4).unwrap();
        let coeffs: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = SpectralField::new(3, 4, coeffs).unwrap();
        let pts = [-1.3, 0.2, 2.1];
        let vals = f.eval_lattice(&pts, None, Exec::Sequential);
        let dx = f.eval_lattice(&pts, Some(1), Exec::Parallel);
        let df = partial_derivative(&f, 1).unwrap();
        for i in 0..27 {
            let x = [pts[i / 9], pts[(i / 3) % 3], pts[i % 3]];
            assert_abs_diff_eq!(vals[i], f.eval_point(&x).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(dx[i], df.eval_point(&x).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn analyze_examples() {
        let r = rule(8, 1);
        let g = GridField::new(r.clone(), vec![1.0; 8], None).unwrap();
        let f = analyze(&g, 5).unwrap();
        assert_abs_diff_eq!(f.coeffs()[0], 1.0, epsilon = 1e-14);
        assert!(f.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
        assert!(analyze(&g, 8).is_err());

        // shifted Gaussian ratio exp(a y − a²/2): c_1 has the sign of a
        for a in [-0.7, 0.4] {
            let r = rule(30, 1);
            let vals: Vec<f64> = r.nodes().iter().map(|&y| (a * y - a * a / 2.0).exp()).collect();
            let f = analyze(&GridField::new(r, vals, None).unwrap(), 6).unwrap();
            assert_eq!(f.coeffs()[1].signum(), a.signum());
            // closed form: c_n = a^n / √(n!)
            assert_abs_diff_eq!(f.coeffs()[1], a, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_norm_examples() {
        assert_eq!(SpectralField::constant(2, 3).unwrap().gradient_sq_norm(), 0.0);
        let f = SpectralField::from_modes(1, 3, &[(&[1], 0.7)]).unwrap();
        assert_abs_diff_eq!(gradient_sq_norm(&f), 0.49, epsilon = 1e-15);
        let f = SpectralField::from_modes(2, 3, &[(&[2, 1], 0.3)]).unwrap();
        assert_abs_diff_eq!(f.gradient_sq_norm(), 3.0 * 0.09, epsilon = 1e-15);
    }

    #[test]
    fn norm_examples() {
        let r = rule(10, 1);
        let one = synthesize(&SpectralField::constant(1, 2).unwrap(), &r).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_abs_diff_eq!(lp_norm_mu(&one, p).unwrap(), 1.0, epsilon = 1e-14);
        }
        let f = SpectralField::from_modes(1, 2, &[(&[1], 0.3)]).unwrap();
        assert_abs_diff_eq!(l2_distance_to_one(&f), 0.3, epsilon = 1e-15);
        // w = 1 + 0.3 h_1 changes sign only beyond |y| > 3.3, outside where the
        // nodes of a 6-point rule sit, so the L¹ norm equals the mass.
        let g = synthesize(&f, &rule(6, 1)).unwrap();
        assert!(g.min_value() > 0.0);
        assert_abs_diff_eq!(lp_norm_mu(&g, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(lp_norm_mu(&g, 0.5).is_err());
    }

    #[test]
    fn bounds_examples() {
        let dense = DenseGrid::for_degree(4, 1);
        let b = estimate_bounds(&SpectralField::constant(1, 4).unwrap(), &dense).unwrap();
        assert_eq!((b.inf, b.sup), (1.0, 1.0));
        assert!(!b.unbounded_below && !b.coarse);

        let f = SpectralField::from_modes(1, 4, &[(&[2], 0.1)]).unwrap();
        let b = estimate_bounds(&f, &dense).unwrap();
        assert_abs_diff_eq!(b.inf, 1.0 - 0.1 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(b.argmin[0].abs() < 0.011);
        assert!(!b.unbounded_below && b.unbounded_above);

        let f = SpectralField::from_modes(1, 4, &[(&[1], 2.0)]).unwrap();
        let b = estimate_bounds(&f, &dense).unwrap();
        assert!(b.inf < 0.0 && b.unbounded_below);
        assert!(!b.is_positive());

        let coarse = DenseGrid { half_width: 6.0, spacing: 0.1 };
        assert!(estimate_bounds(&f, &coarse).unwrap().coarse);
        let narrow = DenseGrid { half_width: 1.0, spacing: 0.02 };
        assert!(estimate_bounds(&f, &narrow).is_err());
    }

    #[test]
    fn bounds_include_far_nodes() {
        // degree 8 needs a 20-point rule whose outer nodes lie beyond |y| = 6
        let f = SpectralField::from_modes(1, 8, &[(&[8], -1e-6)]).unwrap();
        let r = rule(default_quad_order(8), 1);
        assert!(r.max_abs_node() > 6.0);
        let dense = DenseGrid::for_degree(8, 1);
        let plain = estimate_bounds(&f, &dense).unwrap();
        let with = estimate_bounds_with_nodes(&f, &dense, &r).unwrap();
        assert!(with.inf < plain.inf);
        assert!(with.includes_nodes);
    }

    #[test]
    fn indefinite_even_form_is_flagged() {
        // leading form x² − y² is indefinite
        let f = SpectralField::from_modes(2, 2, &[(&[2, 0], 0.1), (&[0, 2], -0.1)]).unwrap();
        let b = estimate_bounds(&f, &DenseGrid::for_degree(2, 2)).unwrap();
        assert!(b.unbounded_below && b.unbounded_above);
    }

    #[test]
    fn json_roundtrip_and_format() {
        let f = SpectralField::from_modes(2, 2, &[(&[1, 1], 1.0 / 3.0)]).unwrap();
        let s = f.to_json();
        assert!(s.starts_with("{\"dimension\":2,\"max_degree\":2,\"coefficients\":["));
        assert!(s.contains("3.3333333333333331e-1"));
        assert_eq!(SpectralField::from_json(&s).unwrap(), f);
        assert!(SpectralField::from_json("{\"dimension\":1,\"max_degree\":2,\"coefficients\":[1]}").is_err());
    }

    #[test]
    fn set_coeff_errors() {
        let mut f = SpectralField::constant(2, 2).unwrap();
        assert!(f.set_coeff(&[3, 0], 1.0).is_err());
        assert!(f.set_coeff(&[1], 1.0).is_err());
        assert!(SpectralField::new(1, 2, vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn h1_times_h2_integrates_to_zero() {
        let r = gauss_hermite_rule(2).unwrap();
        let vals: Vec<f64> = r
            .nodes()
            .iter()
            .map(|&x| {
                let h = hermite_eval_all(2, x).unwrap();
                h[1] * h[2]
            })
            .collect();
        assert!(r.integrate(&vals).unwrap().abs() < 1e-12);
    }

    fn random_field(dim: usize, n: usize, seed: u64) -> SpectralField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = HermiteBasis::new(dim, n).unwrap();
        let mut c: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        c[0] = 1.0;
        SpectralField::new(dim, n, c).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn roundtrip_parseval_gradient_mass(dim in 1usize..=3, n in 0usize..=6, extra in 1usize..3, seed in 0u64..10_000) {
            let f = random_field(dim, n, seed);
            let r = rule(n + extra, dim);
            let g = synthesize(&f, &r).unwrap();
            let back = analyze(&g, n).unwrap();
            let scale = 1.0 + f.coeffs().iter().map(|c| c.abs()).sum::<f64>();
            for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((a - b).abs() < 1e-12 * scale, "{} vs {}", a, b);
            }
            let l2 = g.integrate_map(|w| w * w);
            let parseval: f64 = f.coeffs().iter().map(|c| c * c).sum();
            prop_assert!((l2 - parseval).abs() < 1e-10 * parseval.max(1.0));
            let grad = crate::hermite::weighted_sum(&r.tensor_weights(), &g.grad_sq().unwrap());
            prop_assert!((grad - f.gradient_sq_norm()).abs() < 1e-10 * f.gradient_sq_norm().max(1.0));
            prop_assert!((g.mass() - f.mass()).abs() < 1e-12 * scale);
        }
    }
}
