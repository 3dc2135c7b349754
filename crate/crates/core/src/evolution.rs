//! Ornstein-Uhlenbeck flow in the Hermite basis, the self-similar change of
//! variables back to the heat equation, and a direct Green-function
//! convolution used as an independent check of that route.

use std::f64::consts::PI;

use serde::Serialize;

use crate::entropy::{fisher_info, h_functional, EntropyParams};
use crate::error::{usage, Error, Result};
use crate::exec::Exec;
use crate::field::{default_quad_order, synthesize_with, DenseGrid, FieldSample, SpectralField};
use crate::hermite::QuadratureRule;
use crate::io::{fmt17, CsvTable};
use crate::tensor::contract_all;

/// `c_k ↦ c_k e^{−|k| t}`.
pub fn evolve_ou(field: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) || !t.is_finite() {
        return usage(format!("evolution time must be finite and ≥ 0, got {t}"));
    }
    Ok(field.map_coeffs(|deg, c| if deg == 0 { c } else { c * (-(deg as f64) * t).exp() }))
}

/// `(2π)^{−d/2} e^{−|x|²/2}`.
pub fn stationary_gaussian(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI).powf(-(x.len() as f64) / 2.0) * (-r2 / 2.0).exp()
}

/// Heat kernel `(4πt)^{−d/2} e^{−|x−y|²/(4t)}`.
pub fn green(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return usage(format!("heat kernel needs t > 0, got {t}"));
    }
    if x.len() != y.len() {
        return usage("points differ in dimension");
    }
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((4.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

fn green_1d(t: f64, x: f64, y: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5) * (-(x - y) * (x - y) / (4.0 * t)).exp()
}

/// Uniform tensor lattice `[−L, L]^d`, row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    pub dim: usize,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub half_width: f64,
    pub points: usize,
}

impl Lattice {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim == 0 || dim > crate::hermite::MAX_DIM {
            return usage(format!("lattice dimension must be 1..=3, got {dim}"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) || points < 2 {
            return usage("lattice needs a positive half-width and at least 2 points");
        }
        Ok(Self { dim, half_width, points })
    }

    /// Default heat-space lattice at scale `R`: `[−10R, 10R]^d`.
    pub fn heat_default(dim: usize, r: f64) -> Result<Self> {
        let points = match dim {
            1 => 801,
            2 => 201,
            _ => 61,
        };
        Self::new(dim, 10.0 * r, points)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| -self.half_width + i as f64 * h).collect()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, mut i: usize) -> Vec<f64> {
        let h = self.spacing();
        let mut x = vec![0.0; self.dim];
        for a in (0..self.dim).rev() {
            x[a] = -self.half_width + (i % self.points) as f64 * h;
            i /= self.points;
        }
        x
    }

    /// Riemann sum `h^d Σ f_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Values of a function of `|x|²` at every lattice point.
    fn radial(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let axis = self.axis();
        let sq: Vec<f64> = axis.iter().map(|x| x * x).collect();
        (0..self.len())
            .map(|mut i| {
                let mut r2 = 0.0;
                for _ in 0..self.dim {
                    r2 += sq[i % self.points];
                    i /= self.points;
                }
                f(r2)
            })
            .collect()
    }
}

/// A heat-equation solution sampled on a Lebesgue lattice, next to the
/// self-similar Gaussian `u_∞(t, x) = G(t + 1/2, x, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatFrame {
    pub t: f64,
    pub r: f64,
    pub lattice: Lattice,
    pub u: Vec<f64>,
    pub u_inf: Vec<f64>,
    /// Lattice mass of `u`.
    pub mass: f64,
    /// Captured mass below `1 − 1e-6`.
    pub mass_warning: bool,
}

/// `u(t, x) = R^{−d} w(log R, x/R) v_∞(x/R)` with `R = √(1 + 2t)`.
pub fn heat_from_selfsimilar(field0: &SpectralField, t_heat: f64, lattice: Option<Lattice>) -> Result<HeatFrame> {
    heat_from_selfsimilar_with(field0, t_heat, lattice, Exec::default())
}

pub fn heat_from_selfsimilar_with(
    field0: &SpectralField,
    t_heat: f64,
    lattice: Option<Lattice>,
    exec: Exec,
) -> Result<HeatFrame> {
    if !(t_heat >= 0.0) || !t_heat.is_finite() {
        return usage(format!("heat time must be finite and ≥ 0, got {t_heat}"));
    }
    let d = field0.dim();
    let r = (1.0 + 2.0 * t_heat).sqrt();
    let lattice = match lattice {
        Some(l) if l.dim != d => return usage("lattice dimension does not match field"),
        Some(l) => l,
        None => Lattice::heat_default(d, r)?,
    };
    let w = evolve_ou(field0, r.ln())?;
    let scaled: Vec<f64> = lattice.axis().iter().map(|x| x / r).collect();
    let wv = w.eval_lattice(&scaled, None, exec);
    let rd = r.powi(d as i32);
    let u_inf = lattice.radial(|r2| stationary_gaussian_r2(r2 / (r * r), d) / rd);
    let u: Vec<f64> = wv.iter().zip(&u_inf).map(|(w, g)| w * g).collect();
    let mass = lattice.integrate(&u);
    Ok(HeatFrame { t: t_heat, r, mass_warning: mass < 1.0 - 1e-6, lattice, u, u_inf, mass })
}

fn stationary_gaussian_r2(r2: f64, d: usize) -> f64 {
    (2.0 * PI).powf(-(d as f64) / 2.0) * (-r2 / 2.0).exp()
}

/// `∫ u_0(y) G(t, x, y) dy` by lattice quadrature, evaluated on `out`.
/// The kernel factorizes over axes, so the convolution is one 1-D matrix per
/// axis.
pub fn convolve_green(u0: &[f64], input: &Lattice, t: f64, out: &Lattice) -> Result<Vec<f64>> {
    convolve_green_with(u0, input, t, out, Exec::default())
}

pub fn convolve_green_with(u0: &[f64], input: &Lattice, t: f64, out: &Lattice, exec: Exec) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return usage(format!("convolution needs t > 0, got {t}"));
    }
    if u0.len() != input.len() {
        return usage(format!("expected {} lattice values, got {}", input.len(), u0.len()));
    }
    if input.dim != out.dim {
        return usage("input and output lattices differ in dimension");
    }
    let xin = input.axis();
    let xout = out.axis();
    let h = input.spacing();
    let mut mat = vec![0.0; xout.len() * xin.len()];
    for (i, &x) in xout.iter().enumerate() {
        for (j, &y) in xin.iter().enumerate() {
            mat[i * xin.len() + j] = green_1d(t, x, y) * h;
        }
    }
    let mats: Vec<(&[f64], usize)> = (0..input.dim).map(|_| (mat.as_slice(), xout.len())).collect();
    Ok(contract_all(u0.to_vec(), &vec![input.points; input.dim], &mats, exec))
}

/// `‖u − u_∞‖_{L^p(dx)}` on the frame lattice.
pub fn lp_distance_heat(frame: &HeatFrame, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return usage(format!("L^p distance needs p ≥ 1, got {p}"));
    }
    let s: Vec<f64> = frame.u.iter().zip(&frame.u_inf).map(|(a, b)| (a - b).abs().powf(p)).collect();
    Ok(frame.lattice.integrate(&s).powf(1.0 / p))
}

/// `‖u_∞(t)‖_∞^{1−1/p} · dist`, with `‖u_∞(t)‖_∞ = (2πR²)^{−d/2}`: the heat-space
/// distance bound obtained from a self-similar `L^p(dμ)` distance.
pub fn heat_distance_bound(frame: &HeatFrame, p: f64, selfsimilar_distance: f64) -> f64 {
    let sup = (2.0 * PI * frame.r * frame.r).powf(-(frame.lattice.dim as f64) / 2.0);
    sup.powf(1.0 - 1.0 / p) * selfsimilar_distance
}

/// One sample of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub t: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub e1: f64,
    /// `E_p` for each requested `p`, in order.
    #[serde(serialize_with = "crate::io::ser_vec_f64")]
    pub ep: Vec<f64>,
    /// Entropy production of `E_1` (Fisher information).
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub production: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub l2_dist: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub inf_w: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub sup_w: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub h1: f64,
}

/// Sampled solution of the OU flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: SpectralField,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

impl Trajectory {
    /// Evolves to each time; times are sorted ascending.
    pub fn sample(initial: &SpectralField, times: &[f64]) -> Result<Self> {
        let mut times = times.to_vec();
        if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return usage("sample times must be finite and ≥ 0");
        }
        times.sort_by(f64::total_cmp);
        let fields = times.iter().map(|&t| evolve_ou(initial, t)).collect::<Result<_>>()?;
        Ok(Self { initial: initial.clone(), times, fields })
    }
}

/// Numerical settings for trajectory diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSettings {
    pub quad_order: usize,
    pub dense: DenseGrid,
    pub exec: Exec,
}

impl SampleSettings {
    pub fn for_field(field: &SpectralField) -> Self {
        Self {
            quad_order: default_quad_order(field.max_degree()),
            dense: DenseGrid::for_degree(field.max_degree(), field.dim()),
            exec: Exec::default(),
        }
    }
}

/// Diagnostics at every sample time; samples run under `settings.exec`.
pub fn trajectory_rows(traj: &Trajectory, ps: &[f64], settings: &SampleSettings) -> Result<Vec<TrajectoryRow>> {
    let rule = QuadratureRule::gauss_hermite(settings.quad_order, traj.initial.dim())?;
    let params: Vec<EntropyParams> = ps.iter().map(|&p| EntropyParams::new(p)).collect::<Result<_>>()?;
    let e1 = EntropyParams::new(1.0)?;
    let rows = settings.exec.map_range(traj.times.len(), |i| -> Result<TrajectoryRow> {
        let f = &traj.fields[i];
        // samples already run in parallel; keep the inner loops sequential
        let sample = FieldSample::from_spectral_with(f, &rule, &settings.dense, Exec::Sequential)?;
        sample.require_positive(&format!("trajectory sample t={}", traj.times[i]))?;
        let g = &sample.grid;
        Ok(TrajectoryRow {
            t: traj.times[i],
            e1: crate::entropy::entropy_with(g, &e1)?,
            ep: params.iter().map(|pp| crate::entropy::entropy_with(g, pp)).collect::<Result<_>>()?,
            production: fisher_info(g)?,
            l2_dist: f.l2_distance_to_one(),
            inf_w: sample.bounds.inf,
            sup_w: sample.bounds.sup,
            h1: h_functional(&sample.bounds, 1.0)?,
        })
    });
    rows.into_iter().collect()
}

/// CSV with columns `t, E_1, E_<p>…, production, l2_dist, inf_w, sup_w, H_1`;
/// `p = 1` is not repeated among the `E_<p>` columns.
pub fn trajectory_csv(rows: &[TrajectoryRow], ps: &[f64]) -> CsvTable {
    let extra: Vec<usize> = (0..ps.len()).filter(|&i| ps[i] != 1.0).collect();
    let mut header = vec!["t".to_string(), "E_1".to_string()];
    header.extend(extra.iter().map(|&i| format!("E_{}", ps[i])));
    header.extend(["production", "l2_dist", "inf_w", "sup_w", "H_1"].map(String::from));
    let mut t = CsvTable::new(header);
    for r in rows {
        let mut row = vec![fmt17(r.t), fmt17(r.e1)];
        row.extend(extra.iter().map(|&i| fmt17(r.ep[i])));
        row.extend([r.production, r.l2_dist, r.inf_w, r.sup_w, r.h1].map(fmt17));
        t.push(row);
    }
    t
}

/// Centered difference of `t ↦ E_p[w(t)]` next to `−production_p` at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EepCheck {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub t: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub p: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub slope: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub production: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub rel_error: f64,
}

/// Finite-difference step for [`eep_check`].
pub const EEP_STEP: f64 = 1e-4;

/// Compares `dE_p/dt` (centered, step `dt`) with `−production_p` using a rule
/// of order `quad_order`.
pub fn eep_check(field0: &SpectralField, p: f64, t: f64, dt: f64, quad_order: usize) -> Result<EepCheck> {
    if !(dt > 0.0 && t >= dt) {
        return usage("centered difference needs 0 < dt ≤ t");
    }
    let rule = QuadratureRule::gauss_hermite(quad_order, field0.dim())?;
    let params = EntropyParams::new(p)?;
    let at = |s: f64| -> Result<crate::field::GridField> {
        synthesize_with(&evolve_ou(field0, s)?, &rule, Exec::Sequential)
    };
    let gp = at(t + dt)?;
    let gm = at(t - dt)?;
    let g0 = at(t)?;
    for g in [&gp, &gm, &g0] {
        if g.min_value() < crate::field::TOL_POS {
            return Err(Error::NotAdmissible { minimum: g.min_value(), context: "E-EP check".into() });
        }
    }
    let slope = (crate::entropy::entropy_with(&gp, &params)? - crate::entropy::entropy_with(&gm, &params)?)
        / (2.0 * dt);
    let production = crate::entropy::production_p(&g0, p)?;
    let rel_error = if production == 0.0 { slope.abs() } else { (slope + production).abs() / production };
    Ok(EepCheck { t, p, slope, production, rel_error })
}
