use std::path::Path;

use entroflow::entropy::{entropy_with, h_functional, EntropyParams};
use entroflow::evolution::{trajectory_csv, trajectory_rows, SampleSettings, Trajectory};
use entroflow::field::synthesize_with;
use entroflow::io::{write_atomic, Sig17};
use entroflow::lab::{
    decay_csv, decay_experiment, inequality_sweep, random_admissible, sharpness_csv, sharpness_scan, AdmissibleField,
    DecayFit, DecaySettings, Provenance, SharpnessFamily, SweepConfig,
};
use entroflow::potential::{discretize, spectrum, PotentialSpec};
use entroflow::{Exec, MultiIndex, QuadratureRule, SpectralField};
use serde::Serialize;

use crate::config::{InitKind, RunConfig};

/// What a command found, mapped onto the exit code by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Violation,
}

pub type CmdResult = Result<Verdict, String>;

fn core(e: entroflow::Error) -> String {
    e.to_string()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes()).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    s.push('\n');
    Ok(s)
}

fn multi_index(cfg: &RunConfig, dim: usize, n: Option<usize>) -> Result<MultiIndex, String> {
    let k = match &cfg.k {
        Some(k) => k.clone(),
        None => {
            let n = n.ok_or("need --k or --n to pick a mode")?;
            let mut k = vec![0; dim];
            k[0] = n;
            k
        }
    };
    if k.len() != dim {
        return Err(format!("--k has {} entries, dimension is {dim}", k.len()));
    }
    let k = MultiIndex::new(k).map_err(core)?;
    if let Some(n) = n {
        if k.total_degree() != n {
            return Err(format!("|k| = {} differs from --n {n}", k.total_degree()));
        }
    }
    Ok(k)
}

fn initial_field(cfg: &RunConfig, dim: usize, n: usize, seed: u64) -> Result<AdmissibleField, String> {
    let eps = cfg.eps()?;
    let degree = cfg.degree(n);
    match cfg.init.unwrap_or(InitKind::Random) {
        InitKind::Random => random_admissible(dim, n, eps, degree, seed).map_err(core),
        InitKind::Constant => {
            let f = SpectralField::constant(dim, degree).map_err(core)?;
            AdmissibleField::new(f, n, eps, Provenance::Given, None).map_err(core)
        }
        InitKind::SingleMode => {
            let k = multi_index(cfg, dim, None)?;
            if k.total_degree() < n {
                return Err(format!("single mode |k| = {} violates the moment order {n}", k.total_degree()));
            }
            let a = cfg.amps.as_ref().and_then(|a| a.first().copied()).unwrap_or(0.01);
            let f = SpectralField::from_modes(dim, degree.max(k.total_degree()), &[(k.entries(), a)]).map_err(core)?;
            AdmissibleField::new(f, n, eps, Provenance::SingleMode { k, amplitude: a }, None).map_err(core)
        }
    }
}

fn decay_settings(cfg: &RunConfig) -> DecaySettings {
    DecaySettings { quad_order: cfg.quad_order, ..DecaySettings::default() }
}

#[derive(Serialize)]
struct ValueAtP {
    p: Sig17,
    value: Sig17,
}

#[derive(Serialize)]
struct FitSummary {
    p: Sig17,
    fitted_rate: Sig17,
    rate_2lambda: Sig17,
    rate_4_over_pk: Sig17,
    rate_np_over_hp: Sig17,
    envelope_2lambda: bool,
    envelope_4_over_pk: bool,
    envelope_np_over_hp: bool,
}

#[derive(Serialize)]
struct SimulateSummary {
    command: &'static str,
    d: usize,
    n: usize,
    max_degree: usize,
    quad_order: usize,
    seed: Option<u64>,
    recipe: String,
    eps: Sig17,
    e_p0: Vec<ValueAtP>,
    h_1_0: Sig17,
    h_p0: Vec<ValueAtP>,
    fits: Vec<FitSummary>,
    envelope_ok: bool,
}

pub fn simulate(cfg: &RunConfig) -> CmdResult {
    let dim = cfg.dim()?;
    let n = cfg.require_n()?;
    let ps = cfg.ps()?;
    let times = cfg.times()?;
    let seed = cfg.seed.unwrap_or(0);
    let a = initial_field(cfg, dim, n, seed)?;
    let out = cfg.out_dir();

    let mut settings = SampleSettings::for_field(&a.field);
    if let Some(q) = cfg.quad_order {
        settings.quad_order = q;
    }
    let traj = Trajectory::sample(&a.field, &times).map_err(core)?;
    let rows = trajectory_rows(&traj, &ps, &settings).map_err(core)?;
    write(&out, "trajectory.csv", &trajectory_csv(&rows, &ps).render())?;

    let rule = QuadratureRule::gauss_hermite(settings.quad_order, dim).map_err(core)?;
    let grid = synthesize_with(&a.field, &rule, Exec::default()).map_err(core)?;
    let mut e_p0 = Vec::new();
    let mut h_p0 = Vec::new();
    let mut fits = Vec::new();
    let mut ok = true;
    for &p in &ps {
        let e = entropy_with(&grid, &EntropyParams::new(p).map_err(core)?).map_err(core)?;
        e_p0.push(ValueAtP { p: Sig17(p), value: Sig17(e) });
        h_p0.push(ValueAtP { p: Sig17(p), value: Sig17(h_functional(&a.bounds, p).map_err(core)?) });
        let fit = decay_experiment(&a, p, &times, &decay_settings(cfg)).map_err(core)?;
        ok &= fit.envelope_ok();
        fits.push(FitSummary {
            p: Sig17(p),
            fitted_rate: Sig17(fit.fitted_rate),
            rate_2lambda: Sig17(fit.predicted.two_lambda),
            rate_4_over_pk: Sig17(fit.predicted.four_over_pk),
            rate_np_over_hp: Sig17(fit.predicted.np_over_hp),
            envelope_2lambda: fit.envelope_2lambda.ok(),
            envelope_4_over_pk: fit.envelope_4_over_pk.ok(),
            envelope_np_over_hp: fit.envelope_np_over_hp.ok(),
        });
    }
    let summary = SimulateSummary {
        command: "simulate",
        d: dim,
        n,
        max_degree: a.field.max_degree(),
        quad_order: settings.quad_order,
        seed: a.provenance.seed(),
        recipe: a.provenance.recipe(),
        eps: Sig17(a.eps),
        e_p0,
        h_1_0: Sig17(h_functional(&a.bounds, 1.0).map_err(core)?),
        h_p0,
        fits,
        envelope_ok: ok,
    };
    write(&out, "summary.json", &to_json(&summary)?)?;
    Ok(if ok { Verdict::Clean } else { Verdict::Violation })
}

pub fn inequality(cfg: &RunConfig) -> CmdResult {
    let n = cfg.require_n()?;
    let sweep = SweepConfig {
        dim: cfg.dim()?,
        n,
        ps: cfg.ps()?,
        eps: cfg.eps()?,
        max_degree: cfg.degree(n),
        quad_order: cfg.quad_order,
        seeds: cfg.seed_list()?,
    };
    let reports = inequality_sweep(&sweep, Exec::default()).map_err(core)?;
    write(&cfg.out_dir(), "inequality.json", &to_json(&reports)?)?;
    Ok(if reports.iter().all(|r| r.pass) { Verdict::Clean } else { Verdict::Violation })
}

pub fn decay(cfg: &RunConfig) -> CmdResult {
    let dim = cfg.dim()?;
    let n = cfg.require_n()?;
    let ps = cfg.ps()?;
    let times = cfg.times()?;
    let settings = decay_settings(cfg);
    let mut fits: Vec<DecayFit> = Vec::new();
    for seed in cfg.seed_list()? {
        let a = initial_field(cfg, dim, n, seed)?;
        for &p in &ps {
            fits.push(decay_experiment(&a, p, &times, &settings).map_err(core)?);
        }
    }
    write(&cfg.out_dir(), "decay.csv", &decay_csv(&fits).render())?;
    Ok(if fits.iter().all(DecayFit::envelope_ok) { Verdict::Clean } else { Verdict::Violation })
}

pub fn sharpness(cfg: &RunConfig) -> CmdResult {
    let dim = cfg.dim()?;
    let k = multi_index(cfg, dim, cfg.n)?;
    let amps = cfg.amps.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.02, 0.01]);
    let family: SharpnessFamily = cfg.family.as_deref().unwrap_or("bump").parse().map_err(core)?;
    let scan = sharpness_scan(&k, &amps, family, Exec::default()).map_err(core)?;
    write(&cfg.out_dir(), "sharpness.csv", &sharpness_csv(&scan).render())?;
    let violated = scan.rows.iter().any(|r| r.admissible && r.tightness > 1.0 + 1e-9);
    Ok(if violated { Verdict::Violation } else { Verdict::Clean })
}

pub fn spectrum_cmd(cfg: &RunConfig) -> CmdResult {
    let dim = cfg.d.unwrap_or(1);
    let name = cfg.potential.as_deref().unwrap_or("harmonic");
    let pot = PotentialSpec::parse(name, dim, cfg.half_width).map_err(core)?;
    let points = cfg.points.unwrap_or(if dim == 1 { 2001 } else { 41 });
    let op = discretize(&pot, points).map_err(core)?;
    let sp = spectrum(&op, cfg.modes.unwrap_or(6)).map_err(core)?;
    write(&cfg.out_dir(), "spectrum.csv", &sp.to_csv().render())?;
    // a negative eigenvalue beyond roundoff would contradict the Dirichlet form
    let violated = sp.eigenvalues.iter().any(|&l| l < -1e-8);
    Ok(if violated { Verdict::Violation } else { Verdict::Clean })
}

