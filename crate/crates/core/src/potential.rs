//! Generalized Ornstein-Uhlenbeck operators `−Δ + ∇V·∇` for confining
//! polynomial potentials in one or two dimensions.
//!
//! The operator is conjugated by `g₀ = e^{−V/2}` into Schrödinger form and
//! discretized on a uniform grid as `A = −Δ_h + diag(Δ_h g₀ / g₀)`, where
//! `Δ_h` is the five-point (three-point in 1-D) Laplacian with zero values
//! outside the domain. The domain is the box minus the nodes where
//! `V − V_min > 2 ln 10¹⁴`; those are decoupled, carry zero weight and hold
//! `w = 1` in every eigen-expansion. With this choice `A g₀ = 0` exactly and
//! `gᵀA g = Σ_edges g₀ᵢ g₀ⱼ (fᵢ − fⱼ)²/h²` for `g = g₀ f`, so the discrete
//! operator is positive semidefinite with a one-dimensional kernel.

use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::entropy::{entropy_weighted, h_functional_from, EntropyParams, MASS_TOL};
use crate::error::{domain, usage, Error, Result};
use crate::field::TOL_POS;
use crate::io::{fmt17, CsvTable};
use crate::lab::{fit_log_linear, Envelope, InequalityReport, ENTROPY_FLOOR};
use crate::tridiag::SymTridiagonal;

/// Named potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `|x|²/2 + (d/2) log 2π`, the Gaussian case.
    Harmonic,
    /// `Σᵢ (xᵢ⁴/4 − xᵢ²/2)`.
    DoubleWell,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(Self::Harmonic),
            "double-well" | "double_well" => Ok(Self::DoubleWell),
            other => usage(format!("unknown potential preset '{other}' (harmonic|double-well)")),
        }
    }
}

/// `coeff · Πᵢ xᵢ^{powers[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn eval(&self, x: &[f64]) -> f64 {
        self.powers.iter().zip(x).fold(self.coeff, |acc, (&k, &xi)| acc * xi.powi(k as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Preset(Preset),
    Polynomial(Vec<Monomial>),
}

/// Parses `c*x^a*y^b + …` into monomials; variables are `x`, `y` (or `x1`, `x2`).
pub fn parse_polynomial(text: &str, dim: usize) -> Result<Vec<Monomial>> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return usage("empty polynomial");
    }
    // split into signed terms, keeping exponent signs such as 1e-3 intact
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    for i in 1..bytes.len() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E' | b'^' | b'*') {
            terms.push(&s[start..i]);
            start = i;
        }
    }
    terms.push(&s[start..]);
    let mut out = Vec::new();
    for term in terms {
        let (sign, body) = match term.as_bytes().first() {
            Some(b'-') => (-1.0, &term[1..]),
            Some(b'+') => (1.0, &term[1..]),
            _ => (1.0, term),
        };
        if body.is_empty() {
            return usage(format!("malformed term '{term}'"));
        }
        let mut coeff = sign;
        let mut powers = vec![0u32; dim];
        for factor in body.split('*') {
            let (base, exp) = match factor.split_once('^') {
                Some((b, e)) => (b, e.parse::<u32>().map_err(|_| Error::Usage(format!("bad exponent in '{factor}'")))?),
                None => (factor, 1),
            };
            let axis = match base {
                "x" | "x1" => Some(0),
                "y" | "x2" => Some(1),
                _ => None,
            };
            match axis {
                Some(a) if a < dim => powers[a] += exp,
                Some(a) => return usage(format!("variable '{base}' needs dimension > {a}")),
                None => {
                    let c: f64 = base.parse().map_err(|_| Error::Usage(format!("bad factor '{factor}'")))?;
                    coeff *= c.powi(exp as i32);
                }
            }
        }
        out.push(Monomial { coeff, powers });
    }
    Ok(out)
}

/// `e^{−V}` below this fraction of its maximum on the box boundary.
pub const TAIL_RATIO: f64 = 1e-14;
const MAX_HALF_WIDTH: f64 = 64.0;
const MASS_RATIO_TOL: f64 = 1e-6;
/// Nodes with `V − V_min` above this carry relative mass below `TAIL_RATIO²`
/// and are left out of the domain.
const EXTERIOR_GAP: f64 = 64.472_382_603_833_28;
/// Largest accepted rise of `V` between neighbouring interior nodes; beyond it
/// the conjugated diagonal grows like `e^{ΔV/2}/h²` and the eigensolve degrades.
const MAX_CELL_JUMP: f64 = 18.420_680_743_952_367;

/// A confining potential `V` on the box `[−L, L]^d` with the shift `s₀`
/// making `e^{−(V+s₀)}` a probability density on the box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSpec {
    pub dim: usize,
    pub kind: PotentialKind,
    pub half_width: f64,
    pub shift: f64,
}

impl PotentialSpec {
    /// Preset on its default box: `[−10, 10]^d` for the harmonic case, the
    /// tail rule otherwise.
    pub fn preset(preset: Preset, dim: usize) -> Result<Self> {
        let l = match preset {
            Preset::Harmonic => Some(10.0),
            Preset::DoubleWell => None,
        };
        Self::build(dim, PotentialKind::Preset(preset), l)
    }

    /// Polynomial potential; `half_width = None` applies the tail rule.
    pub fn polynomial(dim: usize, terms: Vec<Monomial>, half_width: Option<f64>) -> Result<Self> {
        if terms.iter().any(|m| m.powers.len() != dim || !m.coeff.is_finite()) {
            return usage("monomial arity must match the dimension");
        }
        Self::build(dim, PotentialKind::Polynomial(terms), half_width)
    }

    /// `harmonic`, `double-well`, or `poly:<expression>`.
    pub fn parse(text: &str, dim: usize, half_width: Option<f64>) -> Result<Self> {
        let kind = match text.strip_prefix("poly:") {
            Some(expr) => PotentialKind::Polynomial(parse_polynomial(expr, dim)?),
            None => PotentialKind::Preset(text.parse()?),
        };
        let l = match (&kind, half_width) {
            (_, Some(l)) => Some(l),
            (PotentialKind::Preset(Preset::Harmonic), None) => Some(10.0),
            _ => None,
        };
        Self::build(dim, kind, l)
    }

    /// Same potential on another box.
    pub fn with_half_width(&self, half_width: f64) -> Result<Self> {
        Self::build(self.dim, self.kind.clone(), Some(half_width))
    }

    fn build(dim: usize, kind: PotentialKind, half_width: Option<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return usage(format!("general potentials support d ∈ {{1, 2}}, got {dim}"));
        }
        let mut spec = Self { dim, kind, half_width: 0.0, shift: 0.0 };
        spec.half_width = match half_width {
            Some(l) if l > 0.0 && l.is_finite() => l,
            Some(l) => return usage(format!("box half-width must be positive, got {l}")),
            None => spec.tail_half_width()?,
        };
        let l = spec.half_width;
        let vref = spec.min_on_box(2.0 * l);
        let inner = spec.box_mass(l, vref);
        let outer = spec.box_mass(2.0 * l, vref);
        let ratio = outer / inner;
        if !(ratio.is_finite() && ratio <= 1.0 + MASS_RATIO_TOL) {
            return domain(format!(
                "e^(-V) mass grows from box {l} to {} by a factor {ratio:.3e}; V is not confining on this box",
                2.0 * l
            ));
        }
        spec.shift = inner.ln() - vref;
        Ok(spec)
    }

    /// `V(x)` without the normalization shift.
    pub fn raw(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Preset(Preset::Harmonic) => {
                0.5 * x.iter().map(|v| v * v).sum::<f64>() + 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln()
            }
            PotentialKind::Preset(Preset::DoubleWell) => x.iter().map(|v| 0.25 * v.powi(4) - 0.5 * v * v).sum(),
            PotentialKind::Polynomial(terms) => terms.iter().map(|m| m.eval(x)).sum(),
        }
    }

    /// Normalized potential `V(x) + s₀`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.raw(x) + self.shift
    }

    pub fn label(&self) -> String {
        match &self.kind {
            PotentialKind::Preset(Preset::Harmonic) => "harmonic".into(),
            PotentialKind::Preset(Preset::DoubleWell) => "double-well".into(),
            PotentialKind::Polynomial(_) => "polynomial".into(),
        }
    }

    fn sample_box(&self, l: f64, per_axis: usize, mut f: impl FnMut(&[f64])) {
        let h = 2.0 * l / (per_axis - 1) as f64;
        let mut x = vec![0.0; self.dim];
        let total = per_axis.pow(self.dim as u32);
        for idx in 0..total {
            let mut r = idx;
            for xi in x.iter_mut() {
                *xi = -l + h * (r % per_axis) as f64;
                r /= per_axis;
            }
            f(&x);
        }
    }

    fn quad_points(&self) -> usize {
        if self.dim == 1 {
            8001
        } else {
            401
        }
    }

    fn min_on_box(&self, l: f64) -> f64 {
        let mut m = f64::INFINITY;
        self.sample_box(l, self.quad_points(), |x| m = m.min(self.raw(x)));
        m
    }

    /// Trapezoidal `∫_{[−l,l]^d} e^{−(V − vref)} dx`.
    fn box_mass(&self, l: f64, vref: f64) -> f64 {
        let n = self.quad_points();
        let h = 2.0 * l / (n - 1) as f64;
        let mut sum = 0.0;
        self.sample_box(l, n, |x| {
            let w: f64 = x.iter().map(|&xi| if (xi.abs() - l).abs() < 0.5 * h { 0.5 } else { 1.0 }).product();
            sum += w * (-(self.raw(x) - vref)).exp();
        });
        sum * h.powi(self.dim as i32)
    }

    fn boundary_min(&self, l: f64) -> f64 {
        let mut m = f64::INFINITY;
        if self.dim == 1 {
            return self.raw(&[-l]).min(self.raw(&[l]));
        }
        let n = 201;
        for i in 0..n {
            let s = -l + 2.0 * l * i as f64 / (n - 1) as f64;
            for p in [[s, -l], [s, l], [-l, s], [l, s]] {
                m = m.min(self.raw(&p));
            }
        }
        m
    }

    /// Smallest quarter-step `L` with `e^{−V} < TAIL_RATIO · max e^{−V}` on the
    /// boundary of `[−L, L]^d`.
    fn tail_half_width(&self) -> Result<f64> {
        let gap = -TAIL_RATIO.ln();
        let mut l = 1.0;
        while l <= MAX_HALF_WIDTH {
            let vmin = self.min_on_box(l);
            if self.boundary_min(l) - vmin > gap {
                return Ok(l);
            }
            l += 0.25;
        }
        domain(format!("no box up to half-width {MAX_HALF_WIDTH} confines e^(-V); V is not confining"))
    }
}

#[derive(Debug, Clone)]
enum Matrix {
    Tridiagonal(SymTridiagonal),
    Dense(DMatrix<f64>),
}

/// Symmetric finite-difference matrix of the conjugated operator together
/// with the ground state and the discrete weights `μᵢ = g₀ᵢ²`.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    potential: PotentialSpec,
    points: usize,
    spacing: f64,
    matrix: Matrix,
    ground: Vec<f64>,
    weights: Vec<f64>,
    interior: Vec<bool>,
}

/// Finite-difference discretization with `points` nodes per axis, box
/// endpoints included.
pub fn discretize(potential: &PotentialSpec, points: usize) -> Result<DiscretizedOperator> {
    if points < 3 {
        return usage(format!("need at least 3 grid points per axis, got {points}"));
    }
    let d = potential.dim;
    if d == 2 && points > 101 {
        return usage(format!("dense 2-D eigensolve limited to 101 points per axis, got {points}"));
    }
    let l = potential.half_width;
    let h = 2.0 * l / (points - 1) as f64;
    let total = points.pow(d as u32);
    let coord = |i: usize| -l + h * i as f64;
    let index = |ix: &[usize]| ix.iter().rev().fold(0, |acc, &i| acc * points + i);
    let multi = |mut k: usize| -> Vec<usize> {
        (0..d)
            .map(|_| {
                let i = k % points;
                k /= points;
                i
            })
            .collect()
    };

    let v: Vec<f64> = (0..total)
        .map(|k| potential.raw(&multi(k).iter().map(|&i| coord(i)).collect::<Vec<_>>()))
        .collect();
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let interior: Vec<bool> = v.iter().map(|&vi| vi - vmin <= EXTERIOR_GAP).collect();
    let mut ground: Vec<f64> =
        v.iter().zip(&interior).map(|(&vi, &inside)| if inside { (-0.5 * (vi - vmin)).exp() } else { 0.0 }).collect();
    let norm = ground.iter().map(|g| g * g).sum::<f64>().sqrt();
    ground.iter_mut().for_each(|g| *g /= norm);
    let weights: Vec<f64> = ground.iter().map(|g| g * g).collect();

    let neighbours = |k: usize| {
        let ix = multi(k);
        let mut out = Vec::with_capacity(2 * d);
        for a in 0..d {
            for step in [-1i64, 1] {
                let j = ix[a] as i64 + step;
                if j >= 0 && (j as usize) < points {
                    let mut jx = ix.clone();
                    jx[a] = j as usize;
                    out.push(index(&jx));
                }
            }
        }
        out
    };
    let mut worst_jump: f64 = 0.0;
    for k in (0..total).filter(|&k| interior[k]) {
        for j in neighbours(k).into_iter().filter(|&j| interior[j]) {
            worst_jump = worst_jump.max(v[j] - v[k]);
        }
    }
    if worst_jump > MAX_CELL_JUMP {
        return usage(format!(
            "grid too coarse: V changes by {worst_jump:.3} between neighbouring nodes (limit {MAX_CELL_JUMP:.3}); use more points or a smaller half-width"
        ));
    }

    let h2 = h * h;
    // diagonal: Σ g₀(neighbour)/g₀(x) / h² over interior neighbours, which
    // is 2d/h² + Δ_h g₀/g₀ with zero values outside the domain
    let mut diag: Vec<f64> = (0..total)
        .map(|k| {
            if !interior[k] {
                return 0.0;
            }
            neighbours(k).into_iter().filter(|&j| interior[j]).map(|j| (-0.5 * (v[j] - v[k])).exp()).sum::<f64>() / h2
        })
        .collect();
    // exterior nodes are decoupled and parked above the interior spectrum
    let parked = diag.iter().fold(0.0f64, |m, &q| m.max(q)) + (2 * d + 1) as f64 / h2;
    diag.iter_mut().zip(&interior).filter(|(_, inside)| !**inside).for_each(|(q, _)| *q = parked);
    let coupling = |k: usize, j: usize| if interior[k] && interior[j] { -1.0 / h2 } else { 0.0 };

    let matrix = if d == 1 {
        let off = (0..points - 1).map(|k| coupling(k, k + 1)).collect();
        Matrix::Tridiagonal(SymTridiagonal::new(diag, off)?)
    } else {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        for k in 0..total {
            let ix = multi(k);
            for a in 0..d {
                if ix[a] + 1 < points {
                    let mut jx = ix.clone();
                    jx[a] += 1;
                    let j = index(&jx);
                    m[(k, j)] = coupling(k, j);
                    m[(j, k)] = coupling(k, j);
                }
            }
        }
        Matrix::Dense(m)
    };
    Ok(DiscretizedOperator { potential: potential.clone(), points, spacing: h, matrix, ground, weights, interior })
}

impl DiscretizedOperator {
    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }

    /// Unit-norm ground state, proportional to `e^{−V/2}` on the grid.
    pub fn ground(&self) -> &[f64] {
        &self.ground
    }

    /// Whether each node belongs to the domain (zero weight otherwise).
    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    /// Probability weights `μᵢ` of the discrete measure.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinates of node `k` (first axis fastest).
    pub fn node(&self, k: usize) -> Vec<f64> {
        let mut r = k;
        (0..self.potential.dim)
            .map(|_| {
                let i = r % self.points;
                r /= self.points;
                -self.potential.half_width + self.spacing * i as f64
            })
            .collect()
    }

    /// A function evaluated at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(&self.node(k))).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.matrix {
            Matrix::Tridiagonal(t) => t.apply(x),
            Matrix::Dense(m) => (m * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec(),
        }
    }

    /// Largest asymmetry `|A − Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        match &self.matrix {
            Matrix::Tridiagonal(_) => 0.0,
            Matrix::Dense(m) => (m - m.transpose()).amax(),
        }
    }

    /// `Σ μᵢ aᵢ bᵢ`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum()
    }

    pub fn mass(&self, w: &[f64]) -> f64 {
        self.weights.iter().zip(w).map(|(m, x)| m * x).sum()
    }

    /// Divides `w` by its weighted mass.
    pub fn normalize_mass(&self, w: &[f64]) -> Result<Vec<f64>> {
        let m = self.mass(w);
        if !(m > 0.0) {
            return domain(format!("weighted mass {m} is not positive"));
        }
        Ok(w.iter().map(|x| x / m).collect())
    }
}

/// Default relative gap below which neighbouring eigenvalues share an eigenspace.
pub const DEGENERACY_GAP: f64 = 1e-6;
/// Largest accepted eigenpair residual `‖A g − λ g‖`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Lowest eigenpairs in `w`-space, grouped into eigenspaces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSpectrum {
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub eigenvalues: Vec<f64>,
    /// Eigenfunctions `f_k = g_k / g₀`, orthonormal in the weighted inner product.
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// Eigenspace index of each eigenvalue.
    pub groups: Vec<usize>,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub residuals: Vec<f64>,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub gap_threshold: f64,
}

/// The `m` lowest eigenpairs with the default degeneracy gap.
pub fn spectrum(op: &DiscretizedOperator, m: usize) -> Result<OperatorSpectrum> {
    spectrum_with_gap(op, m, DEGENERACY_GAP)
}

/// The `m` lowest eigenpairs; eigenvalues closer than `gap · max(1, |λ|)` are
/// grouped.
pub fn spectrum_with_gap(op: &DiscretizedOperator, m: usize, gap: f64) -> Result<OperatorSpectrum> {
    let inside = op.interior.iter().filter(|&&b| b).count();
    if m < 2 || m > inside {
        return usage(format!("need 2 ≤ m ≤ {inside}, got {m}"));
    }
    let (values, gs) = match &op.matrix {
        Matrix::Tridiagonal(t) => t.lowest_eigenpairs(m)?,
        Matrix::Dense(a) => {
            let eig = SymmetricEigen::new(a.clone());
            let mut order: Vec<usize> = (0..a.nrows()).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let vals = order[..m].iter().map(|&i| eig.eigenvalues[i]).collect();
            let vecs = order[..m]
                .iter()
                .map(|&i| {
                    let mut v = eig.eigenvectors.column(i).iter().copied().collect::<Vec<f64>>();
                    let lead = v.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
                    if lead < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    v
                })
                .collect();
            (vals, vecs)
        }
    };
    let residuals: Vec<f64> = values
        .iter()
        .zip(&gs)
        .map(|(&l, g)| op.apply(g).iter().zip(g).map(|(a, x)| (a - l * x).powi(2)).sum::<f64>().sqrt())
        .collect();
    if let Some((k, &r)) = residuals.iter().enumerate().find(|(_, r)| !(**r < RESIDUAL_TOL)) {
        return Err(Error::Numeric { message: format!("eigenpair {k} did not converge"), residual: r });
    }
    let mut groups = Vec::with_capacity(m);
    let mut g = 0;
    for k in 0..m {
        if k > 0 && values[k] - values[k - 1] > gap * values[k].abs().max(1.0) {
            g += 1;
        }
        groups.push(g);
    }
    // the kernel is known exactly: install g₀ and keep the rest orthogonal to it
    let (mut values, mut residuals, mut gs) = (values, residuals, gs);
    gs[0] = op.ground.clone();
    values[0] = 0.0;
    residuals[0] = op.apply(&op.ground).iter().map(|x| x * x).sum::<f64>().sqrt();
    for g in gs.iter_mut().skip(1) {
        let d: f64 = g.iter().zip(&op.ground).map(|(a, b)| a * b).sum();
        g.iter_mut().zip(&op.ground).for_each(|(a, b)| *a -= d * b);
    }
    let vectors: Vec<Vec<f64>> = gs
        .iter()
        .enumerate()
        .map(|(k, gk)| {
            gk.iter()
                .zip(&op.ground)
                .zip(&op.interior)
                .map(|((x, g0), &inside)| match (inside, k) {
                    (true, _) => x / g0,
                    (false, 0) => 1.0,
                    (false, _) => 0.0,
                })
                .collect()
        })
        .collect();
    Ok(OperatorSpectrum { eigenvalues: values, vectors, groups, residuals, gap_threshold: gap })
}

impl OperatorSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.groups.last().map_or(0, |g| g + 1)
    }

    /// Multiplicity of each eigenspace (the last one may be cut off).
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut out = vec![0; self.group_count()];
        for &g in &self.groups {
            out[g] += 1;
        }
        out
    }

    /// `λ_n`, the `n`-th distinct eigenvalue (`λ_0 = 0`), as the mean over its eigenspace.
    pub fn distinct(&self, n: usize) -> Result<f64> {
        let vals: Vec<f64> = self.groups.iter().zip(&self.eigenvalues).filter(|(g, _)| **g == n).map(|(_, v)| *v).collect();
        if vals.is_empty() || n + 1 >= self.group_count() {
            return usage(format!(
                "eigenspace {n} is not fully resolved by {} eigenpairs; request more modes",
                self.len()
            ));
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Largest `|⟨f_j, f_k⟩_μ − δ_jk|`.
    pub fn orthonormality_error(&self, op: &DiscretizedOperator) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.len() {
            for k in 0..=j {
                let ip = op.inner(&self.vectors[j], &self.vectors[k]);
                worst = worst.max((ip - if j == k { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// Weighted coefficients `⟨w, f_k⟩_μ`.
    pub fn coefficients(&self, op: &DiscretizedOperator, w: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|f| op.inner(w, f)).collect()
    }

    /// `Σ c_k e^{−λ_k t} f_k`.
    pub fn synthesize(&self, coeffs: &[f64], t: f64) -> Vec<f64> {
        let n = self.vectors.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for ((c, l), f) in coeffs.iter().zip(&self.eigenvalues).zip(&self.vectors) {
            let a = c * (-l * t).exp();
            out.iter_mut().zip(f).for_each(|(o, x)| *o += a * x);
        }
        out
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["index", "eigenvalue", "group"]);
        for (k, (v, g)) in self.eigenvalues.iter().zip(&self.groups).enumerate() {
            t.push(vec![k.to_string(), fmt17(*v), g.to_string()]);
        }
        t
    }
}

/// Flag threshold for the relative truncation residual of an eigen-expansion.
pub const TRUNCATION_TOL: f64 = 1e-4;

/// Grid values of `w(t)` and how much of `w₀` the retained modes miss.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralEvolution {
    pub values: Vec<f64>,
    /// `‖w₀ − Σ_k ⟨w₀, f_k⟩ f_k‖_μ / ‖w₀‖_μ`.
    pub truncation_residual: f64,
    pub truncated: bool,
}

fn check_initial(op: &DiscretizedOperator, w0: &[f64]) -> Result<()> {
    if w0.len() != op.len() {
        return usage(format!("initial data has {} values, grid has {}", w0.len(), op.len()));
    }
    let min = w0.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= 0.0) {
        return Err(Error::NotAdmissible { minimum: min, context: "initial data must be nonnegative".into() });
    }
    let m = op.mass(w0);
    if (m - 1.0).abs() > MASS_TOL {
        return usage(format!("initial data has weighted mass {m}, expected 1"));
    }
    Ok(())
}

fn truncation(op: &DiscretizedOperator, spec: &OperatorSpectrum, w0: &[f64], coeffs: &[f64]) -> f64 {
    let rebuilt = spec.synthesize(coeffs, 0.0);
    let diff: Vec<f64> = w0.iter().zip(&rebuilt).map(|(a, b)| a - b).collect();
    (op.inner(&diff, &diff) / op.inner(w0, w0)).sqrt()
}

/// `w(t) = Σ_k ⟨w₀, f_k⟩_μ e^{−λ_k t} f_k` over the retained modes.
pub fn evolve_general(op: &DiscretizedOperator, spec: &OperatorSpectrum, w0: &[f64], t: f64) -> Result<GeneralEvolution> {
    check_initial(op, w0)?;
    if !(t >= 0.0) {
        return usage(format!("time must be nonnegative, got {t}"));
    }
    let coeffs = spec.coefficients(op, w0);
    let r = truncation(op, spec, w0, &coeffs);
    Ok(GeneralEvolution { values: spec.synthesize(&coeffs, t), truncation_residual: r, truncated: r > TRUNCATION_TOL })
}

/// Outcome of the generalized decay check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralDecay {
    pub n: usize,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub p: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub lambda_n: f64,
    /// `H_p` of the projected data from its grid extrema.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub h_p: f64,
    /// `λ_n p / H_p[w₀]`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub rate: f64,
    /// Minimum of the projected data.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub positivity_margin: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub sup_w0: f64,
    /// `μ`-norm of the component removed by the projection.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub removed_norm: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub truncation_residual: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub fitted_rate: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub residual_rms: f64,
    pub envelope: Envelope,
    pub report: InequalityReport,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub times: Vec<f64>,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub entropies: Vec<f64>,
}

/// Projects `w₀` onto the retained modes outside `E_1 … E_{n−1}`, evolves it,
/// and checks `E_p(t) ≤ E_p(0) e^{−λ_n p t / H_p[w₀]}` at `t = 0` and every
/// sample time. The rate is fitted on the positive sample times.
pub fn check_general_decay(
    op: &DiscretizedOperator,
    spec: &OperatorSpectrum,
    w0: &[f64],
    n: usize,
    p: f64,
    times: &[f64],
) -> Result<GeneralDecay> {
    check_initial(op, w0)?;
    if n == 0 {
        return usage("n must be at least 1");
    }
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) {
        return usage("need nonnegative sample times");
    }
    let params = EntropyParams::new(p)?;
    let lambda_n = spec.distinct(n)?;
    let mut coeffs = spec.coefficients(op, w0);
    let truncation_residual = truncation(op, spec, w0, &coeffs);
    let mut removed = 0.0;
    for (c, &g) in coeffs.iter_mut().zip(&spec.groups) {
        if (1..n).contains(&g) {
            removed += *c * *c;
            *c = 0.0;
        }
    }
    let start = spec.synthesize(&coeffs, 0.0);
    let on_domain = || start.iter().zip(&op.interior).filter(|(_, &b)| b).map(|(x, _)| *x);
    let inf = on_domain().fold(f64::INFINITY, f64::min);
    let sup = on_domain().fold(f64::NEG_INFINITY, f64::max);
    if !(inf > TOL_POS) {
        return Err(Error::NotAdmissible {
            minimum: inf,
            context: format!("projection onto the complement of E_1..E_{} lost positivity", n - 1),
        });
    }
    let h_p = h_functional_from(inf, sup, p)?;
    let rate = lambda_n * p / h_p;

    let mut ts = times.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts[0] > 0.0 {
        ts.insert(0, 0.0);
    }
    let es: Vec<f64> = ts
        .iter()
        .map(|&t| entropy_weighted(&spec.synthesize(&coeffs, t), op.weights(), &params))
        .collect::<Result<_>>()?;
    let e0 = es[0];
    let envelope = Envelope::check(&ts, &es, e0, rate);

    let kept: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] > 0.0 && es[i] >= ENTROPY_FLOOR).collect();
    let (fitted_rate, residual_rms) = if kept.len() >= 2 {
        let ft: Vec<f64> = kept.iter().map(|&i| ts[i]).collect();
        let fe: Vec<f64> = kept.iter().map(|&i| es[i]).collect();
        let (slope, _, rms) = fit_log_linear(&ft, &fe)?;
        (-slope, rms)
    } else {
        (f64::NAN, f64::NAN)
    };

    let worst = (0..ts.len())
        .min_by(|&i, &j| (e0 * (-rate * ts[i]).exp() - es[i]).total_cmp(&(e0 * (-rate * ts[j]).exp() - es[j])))
        .expect("non-empty");
    let (lhs, rhs) = (es[worst], e0 * (-rate * ts[worst]).exp());
    let slack = rhs - lhs;
    let report = InequalityReport::with_slack("general_decay", lhs, rhs, slack, rate, n, Some(p), 0)
        .with_provenance(None, format!("{}_{}pts", op.potential.label(), op.points));
    Ok(GeneralDecay {
        n,
        p,
        lambda_n,
        h_p,
        rate,
        positivity_margin: inf,
        sup_w0: sup,
        removed_norm: removed.sqrt(),
        truncation_residual,
        fitted_rate,
        residual_rms,
        envelope,
        report,
        times: ts,
        entropies: es,
    })
}
