//! Admissible initial data, the inequality checkers, decay-rate fits and
//! sharpness scans.
//!
//! Admissible data live in `X_ε^n`: unit mass, `1 − ε ≤ w ≤ 1 + ε`, and
//! `∫ w H_k dμ = 0` for `0 < |k| < n`. Random members are band-limited Hermite
//! expansions rescaled to the band `[1 − ε, 1 + ε]` on the bounds lattice.
//! Concentrated test functions multiply `H_k` by a smooth radial cutoff whose
//! support widens like `ε^{−1/(2n)}`; lower modes reintroduced by the cutoff
//! are removed again by a small correction so the moment condition stays exact.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::{
    beckner_constant, ck_bound, entropy_with, fisher_info, h_functional, k_npw, lambda_np, production_p,
    rate_from_k, ConstantsRequest, EntropyParams,
};
use crate::error::{usage, Error, Result};
use crate::evolution::evolve_ou;
use crate::exec::Exec;
use crate::field::{
    default_quad_order, estimate_bounds_exec, lp_distance_to_one, synthesize_with, BoundsEstimate, DenseGrid,
    FieldSample, GridField, SpectralField, TOL_POS,
};
use crate::hermite::{hermite_deriv_table, hermite_table, weighted_sum, HermiteBasis, MultiIndex, QuadratureRule};
use crate::io::{fmt17, CsvTable};

/// Coefficients below this magnitude count as zero for the moment condition.
pub const BAND_TOL: f64 = 1e-14;

/// Largest `|∫ w H_k dμ|` accepted for `0 < |k| < n` on grid data.
pub const MOMENT_TOL: f64 = 1e-9;

/// `pass ⇔ slack ≥ −VIOLATION_TOL · max(1, rhs)`.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Zeroes every `c_k` with `0 < |k| < n` and sets `c_0 = 1`.
pub fn project_band(field: &SpectralField, n: usize) -> SpectralField {
    field.map_coeffs(|deg, c| match deg {
        0 => 1.0,
        d if d < n => 0.0,
        _ => c,
    })
}

/// Result of [`project_orthogonal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub field: SpectralField,
    pub bounds: BoundsEstimate,
}

/// [`project_band`] followed by a positivity re-check over the bounds lattice
/// and the default quadrature nodes.
pub fn project_orthogonal(field: &SpectralField, n: usize) -> Result<Projection> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    let projected = project_band(field, n);
    let rule = QuadratureRule::gauss_hermite(default_quad_order(projected.max_degree()), projected.dim())?;
    let dense = DenseGrid::for_degree(projected.max_degree(), projected.dim());
    let bounds = estimate_bounds_exec(&projected, &dense, Some(&rule), Exec::default())?;
    if bounds.inf < TOL_POS {
        return Err(Error::NotAdmissible {
            minimum: bounds.inf,
            context: format!("after projection at {:?}", bounds.argmin),
        });
    }
    Ok(Projection { field: projected, bounds })
}

/// Largest `|c_k|` over the band `0 < |k| < n`.
pub fn band_residual(field: &SpectralField, n: usize) -> f64 {
    field
        .basis()
        .indices()
        .iter()
        .zip(field.coeffs())
        .filter(|(k, _)| (1..n).contains(&k.total_degree()))
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max)
}

/// Largest `|∫ w H_k dμ|` over `0 < |k| < n`, by quadrature on grid data.
pub fn moment_residual(grid: &GridField, n: usize) -> Result<f64> {
    if n <= 1 {
        return Ok(0.0);
    }
    let rule = grid.rule();
    let basis = HermiteBasis::new(rule.dim(), n - 1)?;
    let table = hermite_table(rule.nodes(), n - 1);
    let weights = rule.tensor_weights();
    let mut worst: f64 = 0.0;
    for k in basis.indices().iter().filter(|k| k.total_degree() > 0) {
        let vals: Vec<f64> = (0..rule.num_points())
            .map(|i| {
                let idx = rule.axis_indices(i);
                let hk: f64 = k.entries().iter().zip(&idx).map(|(&kj, &ij)| table[ij * n + kj]).product();
                grid.values()[i] * hk
            })
            .collect();
        worst = worst.max(weighted_sum(&weights, &vals).abs());
    }
    Ok(worst)
}

/// How an admissible field was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "recipe", rename_all = "snake_case")]
pub enum Provenance {
    Random { seed: u64, max_degree: usize, attempts: usize },
    SingleMode { k: MultiIndex, amplitude: f64 },
    Given,
}

impl Provenance {
    pub fn recipe(&self) -> String {
        match self {
            Provenance::Random { max_degree, .. } => format!("random_band_N{max_degree}"),
            Provenance::SingleMode { k, amplitude } => format!("single_mode_k{k}_a{amplitude}"),
            Provenance::Given => "given".into(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Provenance::Random { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// A member of `X_ε^n` with its certified bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleField {
    pub field: SpectralField,
    pub n: usize,
    pub eps: f64,
    pub bounds: BoundsEstimate,
    pub provenance: Provenance,
}

impl AdmissibleField {
    /// Validates the invariants of `X_ε^n` for a spectral field; bounds use
    /// the default lattice and the nodes of `rule` (order `2N+4` if `None`).
    pub fn new(field: SpectralField, n: usize, eps: f64, provenance: Provenance, rule: Option<&QuadratureRule>) -> Result<Self> {
        if n == 0 {
            return usage("moment order n must be at least 1");
        }
        let own;
        let rule = match rule {
            Some(r) => r,
            None => {
                own = QuadratureRule::gauss_hermite(default_quad_order(field.max_degree()), field.dim())?;
                &own
            }
        };
        let dense = DenseGrid::for_degree(field.max_degree(), field.dim());
        let bounds = estimate_bounds_exec(&field, &dense, Some(rule), Exec::Sequential)?;
        let a = Self { field, n, eps, bounds, provenance };
        a.check_invariants()?;
        Ok(a)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if (self.field.mass() - 1.0).abs() > BAND_TOL {
            return Err(Error::Domain(format!("c_0 = {} is not 1", self.field.mass())));
        }
        let r = band_residual(&self.field, self.n);
        if r >= BAND_TOL {
            return Err(Error::Usage(format!("moment condition of order {} violated by {r:.3e}", self.n)));
        }
        if self.bounds.inf < 1.0 - self.eps - 1e-10 || self.bounds.sup > 1.0 + self.eps + 1e-10 {
            return Err(Error::NotAdmissible {
                minimum: self.bounds.inf,
                context: format!("range [{}, {}] outside 1 ± {}", self.bounds.inf, self.bounds.sup, self.eps),
            });
        }
        if self.bounds.inf < TOL_POS {
            return Err(Error::NotAdmissible { minimum: self.bounds.inf, context: "positivity".into() });
        }
        Ok(())
    }

    /// Grid sample on `rule` with the stored bounds extended by its nodes.
    pub fn sample(&self, rule: &QuadratureRule, exec: Exec) -> Result<FieldSample> {
        let dense = DenseGrid::for_degree(self.field.max_degree(), self.field.dim());
        FieldSample::from_spectral_with(&self.field, rule, &dense, exec)
    }
}

/// Default maximal degree for random admissible data of moment order `n`.
pub fn default_random_degree(n: usize) -> usize {
    n + 2
}

/// `w = 1 + s Σ_{n ≤ |k| ≤ N} c_k H_k` with `c_k` uniform on `[−1, 1]` (seeded)
/// and `s` chosen so that `max |w − 1| = ε` over the bounds lattice and the
/// nodes of the default rule.
pub fn random_admissible(dim: usize, n: usize, eps: f64, max_degree: usize, seed: u64) -> Result<AdmissibleField> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return usage(format!("ε must lie in (0, 1), got {eps}"));
    }
    if max_degree < n {
        return usage(format!("max degree {max_degree} below moment order {n}"));
    }
    let basis = HermiteBasis::new(dim, max_degree)?;
    let rule = QuadratureRule::gauss_hermite(default_quad_order(max_degree), dim)?;
    let dense = DenseGrid::for_degree(max_degree, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=8 {
        let mut coeffs: Vec<f64> = basis
            .indices()
            .iter()
            .map(|k| if k.total_degree() >= n { rng.random_range(-1.0..=1.0) } else { 0.0 })
            .collect();
        coeffs[0] = 1.0;
        let raw = SpectralField::new(dim, max_degree, coeffs)?;
        let b = estimate_bounds_exec(&raw, &dense, Some(&rule), Exec::Sequential)?;
        let spread = (b.sup - 1.0).max(1.0 - b.inf);
        if !(spread > 0.0 && spread.is_finite()) {
            continue;
        }
        let s = eps / spread;
        let field = raw.map_coeffs(|deg, c| if deg == 0 { 1.0 } else { c * s });
        let provenance = Provenance::Random { seed, max_degree, attempts: attempt };
        match AdmissibleField::new(field, n, eps, provenance, Some(&rule)) {
            Ok(a) => return Ok(a),
            Err(Error::NotAdmissible { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numeric { message: format!("no admissible draw for seed {seed} after 8 attempts"), residual: f64::NAN })
}

/// Smooth radial cutoff: 1 for `r ≤ 1`, `exp(1 − 1/(1 − (r−1)²))` on `(1, 2)`,
/// 0 for `r ≥ 2`. Returns `(χ, dχ/dr)`.
pub fn bump(r: f64) -> (f64, f64) {
    if r <= 1.0 {
        (1.0, 0.0)
    } else if r >= 2.0 {
        (0.0, 0.0)
    } else {
        let v = r - 1.0;
        let den = 1.0 - v * v;
        let chi = (1.0 - 1.0 / den).exp();
        (chi, -chi * 2.0 * v / (den * den))
    }
}

/// Amplitude policy for concentrated test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Amplitude {
    /// Largest of `1, 1/2, 1/4, …` with `min w ≥ TOL_POS`.
    Halving,
    /// Scale so that `max |w − 1| = a`.
    SupNorm(f64),
}

/// `w = a (H_k χ_s + Σ_{0<|j|<n} β_j H_j χ_s) + C` with `χ_s(x) = χ(s|x|)`,
/// `s = ε^{1/(2n)}`, `n = |k|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunctionFamily {
    pub k: MultiIndex,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub eps: f64,
    pub amplitude: Amplitude,
}

/// A built test function.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub family: TestFunctionFamily,
    pub amplitude: f64,
    pub constant: f64,
    /// Corrections `β_j` for the band `0 < |j| < n`, in graded-lex order.
    pub correction: Vec<f64>,
    pub sample: FieldSample,
}

impl TestFunctionFamily {
    pub fn new(k: MultiIndex, eps: f64, amplitude: Amplitude) -> Result<Self> {
        if k.total_degree() == 0 {
            return usage("test function needs |k| ≥ 1");
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return usage(format!("ε must be positive, got {eps}"));
        }
        if let Amplitude::SupNorm(a) = amplitude {
            if !(a > 0.0 && a < 1.0) {
                return usage(format!("sup-norm amplitude must lie in (0, 1), got {a}"));
            }
        }
        Ok(Self { k, eps, amplitude })
    }

    pub fn n(&self) -> usize {
        self.k.total_degree()
    }

    /// Cutoff scale `s = ε^{1/(2n)}`; the support of `χ_s` is `|x| < 2/s`.
    pub fn scale(&self) -> f64 {
        self.eps.powf(1.0 / (2.0 * self.n() as f64))
    }
}

/// Values (and optionally gradients) of `H_j χ_s` on the tensor lattice of
/// `axis`, one array per `j` in `modes`.
fn bumped_modes(
    axis: &[f64],
    dim: usize,
    modes: &[&MultiIndex],
    s: f64,
    with_grad: bool,
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let top = modes.iter().flat_map(|k| k.entries().iter().copied()).max().unwrap_or(0);
    let cols = top + 1;
    let table = hermite_table(axis, top);
    let dtable = hermite_deriv_table(axis, top);
    let m = axis.len();
    let total = m.pow(dim as u32);
    let mut vals = vec![vec![0.0; total]; modes.len()];
    let mut grads = if with_grad { vec![vec![vec![0.0; total]; dim]; modes.len()] } else { Vec::new() };
    let mut idx = vec![0usize; dim];
    for i in 0..total {
        let mut rem = i;
        for a in (0..dim).rev() {
            idx[a] = rem % m;
            rem /= m;
        }
        let r2: f64 = idx.iter().map(|&j| axis[j] * axis[j]).sum();
        let r = r2.sqrt();
        let (chi, dchi) = bump(r * s);
        if chi == 0.0 && dchi == 0.0 {
            continue;
        }
        for (mi, k) in modes.iter().enumerate() {
            let h: f64 = k.entries().iter().zip(&idx).map(|(&kj, &ij)| table[ij * cols + kj]).product();
            vals[mi][i] = h * chi;
            if with_grad {
                for a in 0..dim {
                    let mut dh = 1.0;
                    for (b, (&kj, &ij)) in k.entries().iter().zip(&idx).enumerate() {
                        dh *= if a == b { dtable[ij * cols + kj] } else { table[ij * cols + kj] };
                    }
                    let radial = if r > 0.0 { dchi * s * axis[idx[a]] / r } else { 0.0 };
                    grads[mi][a][i] = dh * chi + h * radial;
                }
            }
        }
    }
    (vals, grads)
}

/// Solves a small dense symmetric positive definite system.
fn solve_spd(a: Vec<f64>, b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numeric { message: "band Gram matrix is not positive definite".into(), residual: f64::NAN })?;
    Ok(chol.solve(&nalgebra::DVector::from_vec(b)).iter().copied().collect())
}

/// Builds the test function on `rule`, with bounds over a lattice covering
/// the cutoff support (spacing `spacing`) plus the nodes.
pub fn build_test_function(fam: &TestFunctionFamily, rule: &QuadratureRule, spacing: f64) -> Result<TestFunction> {
    let dim = fam.k.dim();
    if rule.dim() != dim {
        return usage("rule dimension does not match the multi-index");
    }
    let n = fam.n();
    let s = fam.scale();
    let band = HermiteBasis::new(dim, n.saturating_sub(1))?;
    let lower: Vec<&MultiIndex> = band.indices().iter().filter(|j| j.total_degree() > 0).collect();
    let mut modes: Vec<&MultiIndex> = vec![&fam.k];
    modes.extend(lower.iter().copied());

    let weights = rule.tensor_weights();
    let (vals, grads) = bumped_modes(rule.nodes(), dim, &modes, s, true);
    // ∫ H_i (H_j χ) dμ for i in the band, j over all modes
    let node_h: Vec<Vec<f64>> = lower
        .iter()
        .map(|j| (0..rule.num_points()).map(|i| crate::hermite::tensor_eval(j, &rule.point(i)).unwrap_or(0.0)).collect())
        .collect();
    let inner = |hi: &[f64], v: &[f64]| -> f64 {
        let prod: Vec<f64> = hi.iter().zip(v).map(|(a, b)| a * b).collect();
        weighted_sum(&weights, &prod)
    };
    let nl = lower.len();
    let mut gram = vec![0.0; nl * nl];
    let mut rhs = vec![0.0; nl];
    for i in 0..nl {
        rhs[i] = -inner(&node_h[i], &vals[0]);
        for j in 0..nl {
            gram[i * nl + j] = inner(&node_h[i], &vals[j + 1]);
        }
    }
    let beta = solve_spd(gram, rhs)?;
    let combine = |parts: &[Vec<f64>]| -> Vec<f64> {
        let mut out = parts[0].clone();
        for (b, p) in beta.iter().zip(&parts[1..]) {
            for (o, v) in out.iter_mut().zip(p) {
                *o += b * v;
            }
        }
        out
    };
    let psi = combine(&vals);
    let grad_psi: Vec<Vec<f64>> = (0..dim)
        .map(|a| combine(&grads.iter().map(|g| g[a].clone()).collect::<Vec<_>>()))
        .collect();
    let mean = weighted_sum(&weights, &psi);

    // lattice covering the cutoff support
    let half = (2.0 / s).max(1.0);
    let dense = DenseGrid { half_width: half, spacing };
    let pts = dense.axis_points();
    let (lat_vals, _) = bumped_modes(&pts, dim, &modes, s, false);
    let lat_psi = combine(&lat_vals);
    let dev_min = lat_psi.iter().chain(&psi).map(|v| v - mean).fold(0.0, f64::min);
    let dev_max = lat_psi.iter().chain(&psi).map(|v| v - mean).fold(0.0, f64::max);
    let spread = dev_max.max(-dev_min);
    if !(spread > 0.0) {
        return Err(Error::Numeric { message: "test function vanishes identically".into(), residual: 0.0 });
    }
    let amplitude = match fam.amplitude {
        Amplitude::SupNorm(a) => a / spread,
        Amplitude::Halving => {
            let mut a = 1.0;
            let mut found = None;
            for _ in 0..60 {
                if 1.0 + a * dev_min >= TOL_POS {
                    found = Some(a);
                    break;
                }
                a *= 0.5;
            }
            found.ok_or_else(|| Error::NotAdmissible {
                minimum: 1.0 + a * dev_min,
                context: "no halving amplitude keeps the test function positive".into(),
            })?
        }
    };
    let constant = 1.0 - amplitude * mean;
    let w: Vec<f64> = psi.iter().map(|v| amplitude * v + constant).collect();
    let grad: Vec<Vec<f64>> = grad_psi.iter().map(|g| g.iter().map(|v| amplitude * v).collect()).collect();

    let eval = |v: f64| amplitude * v + constant;
    let (mut imin, mut imax) = (0, 0);
    for (i, v) in lat_psi.iter().enumerate() {
        if *v < lat_psi[imin] {
            imin = i;
        }
        if *v > lat_psi[imax] {
            imax = i;
        }
    }
    let lat_point = |mut i: usize| -> Vec<f64> {
        let m = pts.len();
        let mut x = vec![0.0; dim];
        for a in (0..dim).rev() {
            x[a] = pts[i % m];
            i /= m;
        }
        x
    };
    let mut bounds = BoundsEstimate {
        inf: eval(lat_psi[imin]).min(constant),
        sup: eval(lat_psi[imax]).max(constant),
        argmin: lat_point(imin),
        argmax: lat_point(imax),
        half_width: half,
        spacing: dense.actual_spacing(),
        points_per_axis: pts.len(),
        coarse: dense.actual_spacing() > DenseGrid::COARSE_SPACING + 1e-12,
        includes_nodes: true,
        unbounded_below: false,
        unbounded_above: false,
    };
    for (i, &v) in w.iter().enumerate() {
        if v < bounds.inf {
            bounds.inf = v;
            bounds.argmin = rule.point(i);
        }
        if v > bounds.sup {
            bounds.sup = v;
            bounds.argmax = rule.point(i);
        }
    }
    let grid = GridField::new(rule.clone(), w, Some(grad))?;
    Ok(TestFunction {
        family: fam.clone(),
        amplitude,
        constant,
        correction: beta,
        sample: FieldSample { grid, bounds },
    })
}

/// Outcome of one inequality instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub id: String,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub rhs: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub constant: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub slack: f64,
    pub pass: bool,
    pub n: usize,
    #[serde(serialize_with = "crate::io::ser_opt_f64")]
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub recipe: String,
    pub quad_order: usize,
}

impl InequalityReport {
    fn new(id: &str, lhs: f64, rhs: f64, constant: f64, n: usize, p: Option<f64>, quad_order: usize) -> Self {
        Self::with_slack(id, lhs, rhs, rhs - lhs, constant, n, p, quad_order)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn with_slack(id: &str, lhs: f64, rhs: f64, slack: f64, constant: f64, n: usize, p: Option<f64>, quad_order: usize) -> Self {
        Self {
            id: id.into(),
            lhs,
            rhs,
            constant,
            slack,
            pass: slack >= -VIOLATION_TOL * rhs.max(1.0),
            n,
            p,
            seed: None,
            recipe: String::new(),
            quad_order,
        }
    }

    pub fn with_provenance(mut self, seed: Option<u64>, recipe: impl Into<String>) -> Self {
        self.seed = seed;
        self.recipe = recipe.into();
        self
    }
}

/// `‖w − 1‖²₂ ≤ (1/n) ‖∇w‖²₂` from the coefficients; the slack is summed as
/// `Σ (|k| − n)/n · c_k²` so that it is exact and nonnegative.
pub fn check_poincare(field: &SpectralField, n: usize) -> Result<InequalityReport> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    let r = band_residual(field, n);
    if r >= BAND_TOL {
        return usage(format!("moment condition of order {n} violated by {r:.3e}"));
    }
    let nf = n as f64;
    let (mut lhs, mut rhs, mut slack) = (0.0, 0.0, 0.0);
    for (k, c) in field.basis().indices().iter().zip(field.coeffs()) {
        let deg = k.total_degree();
        if deg < n {
            continue;
        }
        let c2 = c * c;
        lhs += c2;
        rhs += deg as f64 * c2 / nf;
        slack += (deg - n) as f64 / nf * c2;
    }
    Ok(InequalityReport::with_slack("poincare", lhs, rhs, slack, 1.0 / nf, n, Some(2.0), 0))
}

fn require_sample(sample: &FieldSample, n: usize) -> Result<()> {
    if n == 0 {
        return usage("moment order n must be at least 1");
    }
    sample.require_positive("inequality check")?;
    let r = moment_residual(&sample.grid, n)?;
    if r > MOMENT_TOL {
        return usage(format!("moment condition of order {n} violated by {r:.3e}"));
    }
    Ok(())
}

/// `∫ w log w dμ ≤ (H_1[w]/n) ∫ |∇w|²/w dμ`.
pub fn check_improved_lsi(sample: &FieldSample, n: usize) -> Result<InequalityReport> {
    require_sample(sample, n)?;
    let e = entropy_with(&sample.grid, &EntropyParams::new(1.0)?)?;
    let c = h_functional(&sample.bounds, 1.0)? / n as f64;
    let i = fisher_info(&sample.grid)?;
    Ok(InequalityReport::new("improved_lsi", e, c * i, c, n, Some(1.0), sample.grid.rule().order()))
}

/// `E_p ≤ B_{n,p} ∫ |∇ w^{p/2}|² dμ` with the default endpoint constants.
pub fn check_beckner(sample: &FieldSample, n: usize, p: f64) -> Result<InequalityReport> {
    require_sample(sample, n)?;
    let e = entropy_with(&sample.grid, &EntropyParams::new(p)?)?;
    let b = beckner_constant(&ConstantsRequest::new(n, p))?;
    let grad = p / 4.0 * production_p(&sample.grid, p)?;
    Ok(InequalityReport::new("beckner", e, b * grad, b, n, Some(p), sample.grid.rule().order()))
}

/// `E_p ≤ (4/p²)(H_p[w]/n) ∫ |∇ w^{p/2}|² dμ`.
pub fn check_pversion(sample: &FieldSample, n: usize, p: f64) -> Result<InequalityReport> {
    require_sample(sample, n)?;
    let e = entropy_with(&sample.grid, &EntropyParams::new(p)?)?;
    let c = 4.0 / (p * p) * h_functional(&sample.bounds, p)? / n as f64;
    let grad = p / 4.0 * production_p(&sample.grid, p)?;
    Ok(InequalityReport::new("p_version", e, c * grad, c, n, Some(p), sample.grid.rule().order()))
}

/// `‖w − 1‖_{L^p(dμ)} ≤ A_p(E_p[w])`.
pub fn check_ck(sample: &FieldSample, p: f64) -> Result<InequalityReport> {
    sample.require_positive("Csiszár-Kullback check")?;
    let e = entropy_with(&sample.grid, &EntropyParams::new(p)?)?;
    let lhs = lp_distance_to_one(&sample.grid, p)?;
    Ok(InequalityReport::new("csiszar_kullback", lhs, ck_bound(e, p)?, 2f64.powf(1.0 / p) / p.sqrt(), 0, Some(p), sample.grid.rule().order()))
}

/// Parameters of a seeded inequality sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub dim: usize,
    pub n: usize,
    pub ps: Vec<f64>,
    pub eps: f64,
    pub max_degree: usize,
    pub quad_order: Option<usize>,
    pub seeds: Vec<u64>,
}

/// Runs all five checkers on one random admissible field per seed: Poincaré
/// and improved log-Sobolev once, the `p`-dependent checks once per `p`.
/// Reports are sorted by `(seed, p, n, id)`.
pub fn inequality_sweep(cfg: &SweepConfig, exec: Exec) -> Result<Vec<InequalityReport>> {
    let order = cfg.quad_order.unwrap_or(default_quad_order(cfg.max_degree));
    let rule = QuadratureRule::gauss_hermite(order, cfg.dim)?;
    let per_seed = exec.map(&cfg.seeds, |&seed| -> Result<Vec<InequalityReport>> {
        let a = random_admissible(cfg.dim, cfg.n, cfg.eps, cfg.max_degree, seed)?;
        let sample = a.sample(&rule, Exec::Sequential)?;
        let recipe = a.provenance.recipe();
        let mut out = vec![check_poincare(&a.field, cfg.n)?, check_improved_lsi(&sample, cfg.n)?];
        for &p in &cfg.ps {
            out.push(check_beckner(&sample, cfg.n, p)?);
            out.push(check_pversion(&sample, cfg.n, p)?);
            let mut ck = check_ck(&sample, p)?;
            ck.n = cfg.n;
            out.push(ck);
        }
        Ok(out.into_iter().map(|r| r.with_provenance(Some(seed), recipe.clone())).collect())
    });
    let mut all = Vec::new();
    for r in per_seed {
        all.extend(r?);
    }
    all.sort_by(report_order);
    Ok(all)
}

fn report_order(a: &InequalityReport, b: &InequalityReport) -> Ordering {
    a.seed
        .cmp(&b.seed)
        .then(a.p.unwrap_or(f64::NAN).total_cmp(&b.p.unwrap_or(f64::NAN)))
        .then(a.n.cmp(&b.n))
        .then(a.id.cmp(&b.id))
}

/// Predicted exponential rates for `E_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedRates {
    /// `2 λ(n, p)`, from the interpolated constant `B_{n,p}`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub two_lambda: f64,
    /// `4 / (p K[n,p,w₀])`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub four_over_pk: f64,
    /// `n p / H_p[w₀]`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub np_over_hp: f64,
    /// `2n`, the decay rate of `‖w − 1‖²₂`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub spectral: f64,
}

impl PredictedRates {
    pub fn new(n: usize, p: f64, bounds: &BoundsEstimate) -> Result<Self> {
        let h1 = h_functional(bounds, 1.0)?;
        let hp = h_functional(bounds, p)?;
        Ok(Self {
            two_lambda: 2.0 * lambda_np(n, p)?,
            four_over_pk: rate_from_k(n, p, h1)?,
            np_over_hp: n as f64 * p / hp,
            spectral: 2.0 * n as f64,
        })
    }

    /// `K[n,p,w₀]` for `1 < p < 2`.
    pub fn k_constant(n: usize, p: f64, bounds: &BoundsEstimate) -> Result<f64> {
        k_npw(n, p, h_functional(bounds, 1.0)?)
    }
}

/// Ordinary least squares of `log y` on `t`; returns `(slope, intercept, rms)`.
pub fn fit_log_linear(ts: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if ts.len() != ys.len() || ts.len() < 2 {
        return usage("log-linear fit needs at least two matching samples");
    }
    if ys.iter().any(|y| !(*y > 0.0)) {
        return usage("log-linear fit needs positive values");
    }
    let n = ts.len() as f64;
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let tm = ts.iter().sum::<f64>() / n;
    let lm = ls.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    if sxx == 0.0 {
        return usage("log-linear fit needs distinct times");
    }
    let sxy: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let rms = (ts.iter().zip(&ls).map(|(t, l)| (l - intercept - slope * t).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, intercept, rms))
}

/// Entropies below this value are excluded from fits.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Envelope outcome for one rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub rate: f64,
    pub violations: usize,
    /// Smallest `E_p(0) e^{−rate t} − E_p(t)`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub worst_slack: f64,
}

impl Envelope {
    pub(crate) fn check(ts: &[f64], es: &[f64], e0: f64, rate: f64) -> Self {
        let mut violations = 0;
        let mut worst = f64::INFINITY;
        for (&t, &e) in ts.iter().zip(es) {
            let bound = e0 * (-rate * t).exp();
            let slack = bound - e;
            if slack < -VIOLATION_TOL * bound.max(1.0) {
                violations += 1;
            }
            worst = worst.min(slack);
        }
        Self { rate, violations, worst_slack: worst }
    }

    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Decay of `E_p` along the flow, its fitted rate and the predicted envelopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub n: usize,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub p: f64,
    pub seed: Option<u64>,
    pub recipe: String,
    pub quad_order: usize,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub window_start: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub window_end: f64,
    /// The window was shortened because the entropy fell below the floor.
    pub window_shrunk: bool,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub fitted_rate: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub intercept: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub residual_rms: f64,
    pub predicted: PredictedRates,
    pub envelope_2lambda: Envelope,
    pub envelope_4_over_pk: Envelope,
    pub envelope_np_over_hp: Envelope,
    /// `n p / H_p[w₀] > 4/(p K[n,p,w₀])`.
    pub np_over_hp_is_larger: bool,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub times: Vec<f64>,
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub entropies: Vec<f64>,
}

impl DecayFit {
    pub fn envelope_ok(&self) -> bool {
        self.envelope_2lambda.ok() && self.envelope_4_over_pk.ok() && self.envelope_np_over_hp.ok()
    }
}

/// Numerical settings for decay experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySettings {
    pub quad_order: Option<usize>,
    pub window: (f64, f64),
    pub exec: Exec,
}

impl Default for DecaySettings {
    fn default() -> Self {
        Self { quad_order: None, window: (0.1, 1.0), exec: Exec::default() }
    }
}

/// Evenly spaced times `t0, …, t1`.
pub fn time_grid(t0: f64, t1: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t0 >= 0.0 && t1 > t0) || steps < 2 {
        return usage(format!("time grid needs 0 ≤ t0 < t1 and ≥ 2 steps, got [{t0}, {t1}] × {steps}"));
    }
    Ok((0..steps).map(|i| t0 + (t1 - t0) * i as f64 / (steps - 1) as f64).collect())
}

/// Evolves `field0`, samples `E_p` at `times` (plus `t = 0`), fits the decay
/// rate on the window and checks the three envelopes.
pub fn decay_experiment(field0: &AdmissibleField, p: f64, times: &[f64], settings: &DecaySettings) -> Result<DecayFit> {
    if times.len() < 8 {
        return usage(format!("decay experiment needs at least 8 sample times, got {}", times.len()));
    }
    let params = EntropyParams::new(p)?;
    let order = settings.quad_order.unwrap_or(default_quad_order(field0.field.max_degree()));
    let rule = QuadratureRule::gauss_hermite(order, field0.field.dim())?;
    let mut ts = times.to_vec();
    ts.sort_by(f64::total_cmp);
    let entropy_at = |t: f64| -> Result<f64> {
        let g = synthesize_with(&evolve_ou(&field0.field, t)?, &rule, Exec::Sequential)?;
        entropy_with(&g, &params)
    };
    let e0 = entropy_at(0.0)?;
    let es: Vec<f64> = settings.exec.map(&ts, |&t| entropy_at(t)).into_iter().collect::<Result<_>>()?;

    let (w0, w1) = settings.window;
    let in_window: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] >= w0 - 1e-12 && ts[i] <= w1 + 1e-12).collect();
    let kept: Vec<usize> = in_window.iter().copied().filter(|&i| es[i] >= ENTROPY_FLOOR).collect();
    let window_shrunk = kept.len() < in_window.len();
    let (fitted_rate, intercept, residual_rms, ws, we) = if kept.len() >= 2 {
        let ft: Vec<f64> = kept.iter().map(|&i| ts[i]).collect();
        let fe: Vec<f64> = kept.iter().map(|&i| es[i]).collect();
        let (slope, icpt, rms) = fit_log_linear(&ft, &fe)?;
        (-slope, icpt, rms, ft[0], *ft.last().expect("non-empty"))
    } else {
        (f64::NAN, f64::NAN, f64::NAN, w0, w0)
    };

    // bounds must cover the nodes actually used
    let dense = DenseGrid::for_degree(field0.field.max_degree(), field0.field.dim());
    let bounds = estimate_bounds_exec(&field0.field, &dense, Some(&rule), Exec::Sequential)?;
    let predicted = PredictedRates::new(field0.n, p, &bounds)?;
    let mut all_t = vec![0.0];
    all_t.extend(&ts);
    let mut all_e = vec![e0];
    all_e.extend(&es);
    Ok(DecayFit {
        n: field0.n,
        p,
        seed: field0.provenance.seed(),
        recipe: field0.provenance.recipe(),
        quad_order: order,
        window_start: ws,
        window_end: we,
        window_shrunk,
        fitted_rate,
        intercept,
        residual_rms,
        envelope_2lambda: Envelope::check(&all_t, &all_e, e0, predicted.two_lambda),
        envelope_4_over_pk: Envelope::check(&all_t, &all_e, e0, predicted.four_over_pk),
        envelope_np_over_hp: Envelope::check(&all_t, &all_e, e0, predicted.np_over_hp),
        np_over_hp_is_larger: predicted.np_over_hp > predicted.four_over_pk,
        predicted,
        times: all_t,
        entropies: all_e,
    })
}

/// CSV of decay fits, one row per fit.
pub fn decay_csv(fits: &[DecayFit]) -> CsvTable {
    let mut t = CsvTable::new([
        "n",
        "p",
        "seed",
        "fitted_rate",
        "rate_2lambda",
        "rate_4_over_pK",
        "rate_np_over_Hp",
        "rate_spectral",
        "residual_rms",
        "envelope_ok",
        "recipe",
        "quad_order",
    ]);
    for f in fits {
        t.push(vec![
            f.n.to_string(),
            fmt17(f.p),
            f.seed.map_or(String::new(), |s| s.to_string()),
            fmt17(f.fitted_rate),
            fmt17(f.predicted.two_lambda),
            fmt17(f.predicted.four_over_pk),
            fmt17(f.predicted.np_over_hp),
            fmt17(f.predicted.spectral),
            fmt17(f.residual_rms),
            f.envelope_ok().to_string(),
            f.recipe.clone(),
            f.quad_order.to_string(),
        ]);
    }
    t
}

/// Probe family used by the sharpness scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessFamily {
    /// `1 + a H_k`; bounds taken over the default lattice, where the
    /// polynomial tail dominates the supremum.
    Polynomial,
    /// `1 + a φ/‖φ‖_∞` with `φ` the cutoff test function at `ε = a`, so that
    /// the data lie in `X_a^n`.
    Bump,
}

impl std::str::FromStr for SharpnessFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polynomial" => Ok(Self::Polynomial),
            "bump" => Ok(Self::Bump),
            other => usage(format!("unknown sharpness family '{other}' (polynomial|bump)")),
        }
    }
}

/// One amplitude of a sharpness scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessRow {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub amplitude: f64,
    pub admissible: bool,
    /// `E_1 / I_1`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub quotient: f64,
    /// `H_1[w] / n`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub bound_constant: f64,
    /// `Q n / H_1[w]`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub tightness: f64,
    /// `n / H_1[w]`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub rate_proxy: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub inf_w: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub sup_w: f64,
}

/// A sharpness scan over decreasing amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessScan {
    pub k: MultiIndex,
    pub family: SharpnessFamily,
    pub quad_order: usize,
    pub rows: Vec<SharpnessRow>,
    /// Tightness increases along the admissible rows.
    pub tightness_increasing: bool,
    /// Relative distance of the last rate proxy to `2n`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub rate_gap: f64,
}

/// Quadrature order used by sharpness scans in dimension `d`.
pub fn sharpness_quad_order(dim: usize) -> usize {
    match dim {
        1 => 120,
        2 => 48,
        _ => 24,
    }
}

/// Scans `amps` (must be decreasing and positive) for the given family.
pub fn sharpness_scan(k: &MultiIndex, amps: &[f64], family: SharpnessFamily, exec: Exec) -> Result<SharpnessScan> {
    let n = k.total_degree();
    if n == 0 {
        return usage("sharpness scan needs |k| ≥ 1");
    }
    if amps.is_empty() || amps.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return usage("amplitudes must lie in (0, 1)");
    }
    if amps.windows(2).any(|w| w[1] >= w[0]) {
        return usage("amplitudes must be strictly decreasing");
    }
    let dim = k.dim();
    let order = match family {
        SharpnessFamily::Polynomial => default_quad_order(n).max(40).min(sharpness_quad_order(dim)),
        SharpnessFamily::Bump => sharpness_quad_order(dim),
    };
    let rule = QuadratureRule::gauss_hermite(order, dim)?;
    let spacing = DenseGrid::for_degree(n, dim).spacing;
    let rows = exec.map(amps, |&a| -> Result<SharpnessRow> {
        let sample = match family {
            SharpnessFamily::Polynomial => {
                let mut f = SpectralField::constant(dim, n)?;
                f.set_coeff(k.entries(), a)?;
                let dense = DenseGrid::for_degree(n, dim);
                FieldSample::from_spectral_with(&f, &rule, &dense, Exec::Sequential)?
            }
            SharpnessFamily::Bump => {
                let fam = TestFunctionFamily::new(k.clone(), a, Amplitude::SupNorm(a))?;
                build_test_function(&fam, &rule, spacing)?.sample
            }
        };
        let b = &sample.bounds;
        let admissible = b.inf >= TOL_POS && !b.unbounded_below;
        if !admissible {
            return Ok(SharpnessRow {
                amplitude: a,
                admissible,
                quotient: f64::NAN,
                bound_constant: f64::NAN,
                tightness: f64::NAN,
                rate_proxy: f64::NAN,
                inf_w: b.inf,
                sup_w: b.sup,
            });
        }
        let e = entropy_with(&sample.grid, &EntropyParams::new(1.0)?)?;
        let i = fisher_info(&sample.grid)?;
        let h1 = h_functional(b, 1.0)?;
        let q = e / i;
        Ok(SharpnessRow {
            amplitude: a,
            admissible,
            quotient: q,
            bound_constant: h1 / n as f64,
            tightness: q * n as f64 / h1,
            rate_proxy: n as f64 / h1,
            inf_w: b.inf,
            sup_w: b.sup,
        })
    });
    let rows: Vec<SharpnessRow> = rows.into_iter().collect::<Result<_>>()?;
    let ok: Vec<&SharpnessRow> = rows.iter().filter(|r| r.admissible).collect();
    let tightness_increasing = ok.windows(2).all(|w| w[1].tightness > w[0].tightness);
    let rate_gap = ok.last().map_or(f64::NAN, |r| (r.rate_proxy - 2.0 * n as f64).abs() / (2.0 * n as f64));
    Ok(SharpnessScan { k: k.clone(), family, quad_order: order, rows, tightness_increasing, rate_gap })
}

/// CSV of a sharpness scan.
pub fn sharpness_csv(scan: &SharpnessScan) -> CsvTable {
    let mut t = CsvTable::new([
        "amplitude",
        "admissible",
        "quotient",
        "bound_constant",
        "tightness",
        "rate_proxy",
        "inf_w",
        "sup_w",
        "k",
        "family",
        "quad_order",
    ]);
    let family = match scan.family {
        SharpnessFamily::Polynomial => "polynomial",
        SharpnessFamily::Bump => "bump",
    };
    for r in &scan.rows {
        t.push(vec![
            fmt17(r.amplitude),
            r.admissible.to_string(),
            fmt17(r.quotient),
            fmt17(r.bound_constant),
            fmt17(r.tightness),
            fmt17(r.rate_proxy),
            fmt17(r.inf_w),
            fmt17(r.sup_w),
            scan.k.to_string(),
            family.into(),
            scan.quad_order.to_string(),
        ]);
    }
    t
}
