//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! report is always printed; exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use entroflow::entropy::{beckner_constant, ck_bound, entropy_p, h_functional, lambda_np, ConstantsRequest};
use entroflow::evolution::{convolve_green, eep_check, evolve_ou, heat_from_selfsimilar, lp_distance_heat, Lattice};
use entroflow::field::{estimate_bounds, lp_distance_to_one, synthesize_with, DenseGrid};
use entroflow::lab::{
    check_poincare, decay_experiment, fit_log_linear, inequality_sweep, random_admissible, sharpness_scan, time_grid,
    DecaySettings, SharpnessFamily, SweepConfig,
};
use entroflow::potential::{check_general_decay, discretize, spectrum, PotentialSpec, Preset};
use entroflow::{Exec, HermiteBasis, MultiIndex, QuadratureRule, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ac1_orthonormality() -> Outcome {
    let mut worst: f64 = 0.0;
    for dim in [1, 2] {
        let basis = HermiteBasis::new(dim, 8).unwrap();
        let rule = QuadratureRule::gauss_hermite(9, dim).unwrap();
        let wts = rule.tensor_weights();
        let vals: Vec<Vec<f64>> = basis
            .indices()
            .iter()
            .map(|k| (0..rule.num_points()).map(|i| entroflow::tensor_eval(k, &rule.point(i)).unwrap()).collect())
            .collect();
        for j in 0..vals.len() {
            for k in 0..=j {
                let ip: f64 = wts.iter().zip(&vals[j]).zip(&vals[k]).map(|((w, a), b)| w * a * b).sum();
                worst = worst.max((ip - if j == k { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("max |<H_j,H_k> - delta| = {worst:.2e} (order 9, |k| <= 8, d <= 2)"))
}

fn ac2_constants() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        let p = 1.0 + 0.1 * i as f64;
        worst = worst.max((lambda_np(1, p).unwrap() - 1.0).abs());
        worst = worst.max((beckner_constant(&ConstantsRequest::new(1, p)).unwrap() - 2.0 / p).abs());
    }
    for n in 1..=10 {
        worst = worst.max((lambda_np(n, 2.0).unwrap() - n as f64).abs());
    }
    outcome(worst < 1e-12, format!("max deviation {worst:.2e}"))
}

fn ac3_oracle_equivalence() -> Outcome {
    let f = SpectralField::from_modes(1, 4, &[(&[1], 0.1), (&[2], -0.08), (&[3], 0.03), (&[4], 0.02)]).unwrap();
    let t = 0.5;
    let spectral = heat_from_selfsimilar(&f, t, None).unwrap();
    let input = Lattice::heat_default(1, 1.0).unwrap();
    let u0 = heat_from_selfsimilar(&f, 0.0, Some(input.clone())).unwrap().u;
    let conv = convolve_green(&u0, &input, t, &spectral.lattice).unwrap();
    let err = conv.iter().zip(&spectral.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(err < 1e-6, format!("sup |spectral - Green| = {err:.2e} at t = 0.5"))
}

fn ac4_poincare() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut min_slack, mut worst_single, mut min_mixed) = (f64::INFINITY, 0.0f64, f64::INFINITY);
    for i in 0..1000 {
        let dim = 1 + i % 2;
        let n = rng.random_range(1..=4);
        let degree = n + rng.random_range(0..=2);
        let single = i % 4 == 0;
        let mut f = SpectralField::constant(dim, degree).unwrap();
        let idx: Vec<MultiIndex> = f.basis().indices().to_vec();
        let mut has_higher = false;
        for k in &idx {
            let deg = k.total_degree();
            let keep = if single { deg == n } else { deg >= n };
            if keep {
                let mut c: f64 = rng.random_range(-0.2..0.2);
                if deg > n && !has_higher {
                    c = c.signum() * c.abs().max(0.01);
                    has_higher = true;
                }
                f.set_coeff(k.entries(), c).unwrap();
            }
        }
        let r = check_poincare(&f, n).unwrap();
        min_slack = min_slack.min(r.slack);
        if single {
            worst_single = worst_single.max(r.slack.abs());
        } else if has_higher {
            min_mixed = min_mixed.min(r.slack);
        }
    }
    outcome(
        min_slack >= 0.0 && worst_single < 1e-12 && min_mixed > 1e-12,
        format!("min slack {min_slack:.2e}; single-band |slack| <= {worst_single:.2e}; multi-band slack >= {min_mixed:.2e}"),
    )
}

fn ac5_spectral_rate() -> Outcome {
    let times = time_grid(0.1, 1.0, 10).unwrap();
    let rule = QuadratureRule::gauss_hermite(12, 2).unwrap();
    let mut worst: f64 = 0.0;
    let mut rates = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let modes: Vec<(Vec<usize>, f64)> =
            (0..=3).map(|a| (vec![a, 3 - a], rng.random_range(-0.05..0.05))).collect();
        let refs: Vec<(&[usize], f64)> = modes.iter().map(|(k, c)| (k.as_slice(), *c)).collect();
        let f = SpectralField::from_modes(2, 3, &refs).unwrap();
        let ys: Vec<f64> = times
            .iter()
            .map(|&t| {
                let g = synthesize_with(&evolve_ou(&f, t).unwrap(), &rule, Exec::Sequential).unwrap();
                lp_distance_to_one(&g, 2.0).unwrap().powi(2)
            })
            .collect();
        let rate = -fit_log_linear(&times, &ys).unwrap().0;
        worst = worst.max((rate / 6.0 - 1.0).abs());
        rates.push(rate);
    }
    outcome(worst < 0.01, format!("fitted rates {:.6}..{:.6} vs 6, max rel dev {worst:.2e}", min(&rates), max(&rates)))
}

fn ac6_envelopes() -> Outcome {
    let times = time_grid(0.1, 2.0, 20).unwrap();
    let settings = DecaySettings { exec: Exec::Sequential, ..DecaySettings::default() };
    let cases: Vec<(usize, u64)> = [2usize, 3].iter().flat_map(|&n| (0..100u64).map(move |s| (n, s))).collect();
    let results = Exec::default().map(&cases, |&(n, seed)| {
        let a = random_admissible(1, n, 0.3, n + 2, seed).unwrap();
        let fit = decay_experiment(&a, 1.0, &times, &settings).unwrap();
        (fit.envelope_np_over_hp.violations, fit.envelope_np_over_hp.worst_slack)
    });
    let violations: usize = results.iter().map(|r| r.0).sum();
    let worst = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    outcome(violations == 0, format!("{} fields, {violations} violations of E_1 <= E_1(0)exp(-n t/H_1), worst slack {worst:.2e}", cases.len()))
}

fn ac7_sharpness() -> Outcome {
    let k = MultiIndex::new(vec![2]).unwrap();
    let scan = sharpness_scan(&k, &[0.2, 0.1, 0.05, 0.02, 0.01], SharpnessFamily::Bump, Exec::default()).unwrap();
    let last = scan.rows.last().unwrap();
    let pass = last.admissible && last.tightness >= 0.95 && scan.tightness_increasing && scan.rate_gap < 0.05;
    outcome(
        pass,
        format!(
            "T(0.01) = {:.4}, increasing = {}, n/H_1 = {:.4} (gap {:.2}%)",
            last.tightness,
            scan.tightness_increasing,
            last.rate_proxy,
            100.0 * scan.rate_gap
        ),
    )
}

fn ac8_eep() -> Outcome {
    let f = SpectralField::from_modes(1, 4, &[(&[1], 0.05), (&[2], 0.04), (&[3], -0.01), (&[4], 0.005)]).unwrap();
    let mut worst: f64 = 0.0;
    for p in [1.0, 1.5, 2.0] {
        for t in [0.25, 0.5] {
            worst = worst.max(eep_check(&f, p, t, 1e-4, 60).unwrap().rel_error);
        }
    }
    outcome(worst < 1e-6, format!("max relative mismatch {worst:.2e}"))
}

fn ac9_csiszar_kullback() -> Outcome {
    let mut total = 0;
    let mut failed = 0;
    let mut worst_p2: f64 = 0.0;
    for (dim, n) in [(1, 2), (1, 3), (2, 2)] {
        let cfg = SweepConfig {
            dim,
            n,
            ps: vec![1.0, 1.25, 1.5, 1.75, 2.0],
            eps: 0.3,
            max_degree: n + 2,
            quad_order: None,
            seeds: (0..50).collect(),
        };
        for r in inequality_sweep(&cfg, Exec::default()).unwrap().iter().filter(|r| r.id == "csiszar_kullback") {
            total += 1;
            failed += usize::from(!r.pass);
            if r.p == Some(2.0) {
                worst_p2 = worst_p2.max((r.rhs - r.lhs).abs());
            }
        }
    }
    // direct check on a hand-built field as well
    let f = SpectralField::from_modes(1, 3, &[(&[2], 0.1), (&[3], 0.02)]).unwrap();
    let g = synthesize_with(&f, &QuadratureRule::gauss_hermite(20, 1).unwrap(), Exec::Sequential).unwrap();
    let direct = (ck_bound(entropy_p(&g, 2.0).unwrap(), 2.0).unwrap() - lp_distance_to_one(&g, 2.0).unwrap()).abs();
    worst_p2 = worst_p2.max(direct);
    outcome(
        failed == 0 && worst_p2 < 1e-10,
        format!("{total} reports, {failed} failing; max |A_2(E_2) - ||w-1||_2| = {worst_p2:.2e}"),
    )
}

fn ac10_rate_comparison() -> Outcome {
    let times = time_grid(0.1, 1.0, 10).unwrap();
    let mut all = true;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let a = random_admissible(1, 2, 0.01, 4, seed).unwrap();
        let fit = decay_experiment(&a, 1.5, &times, &DecaySettings::default()).unwrap();
        all &= fit.np_over_hp_is_larger;
        lines.push(format!("{:.4}>{:.4}", fit.predicted.np_over_hp, fit.predicted.four_over_pk));
    }
    outcome(all, format!("np/H_p vs 4/(pK) per seed: {}", lines.join(" ")))
}

fn ac11_general_potential() -> Outcome {
    let op = discretize(&PotentialSpec::preset(Preset::Harmonic, 1).unwrap(), 2001).unwrap();
    let sp = spectrum(&op, 8).unwrap();
    let eig_err = (0..=5).map(|k| (sp.eigenvalues[k] - k as f64).abs()).fold(0.0, f64::max);

    let dw = discretize(&PotentialSpec::preset(Preset::DoubleWell, 1).unwrap(), 1601).unwrap();
    let dsp = spectrum(&dw, 40).unwrap();
    let raw = dw.sample(|x| 1.0 + 0.3 * (2.0 * x[0]).cos() * (-0.25 * x[0] * x[0]).exp() + 0.2 * (x[0] / 2.0).tanh());
    let w0 = dw.normalize_mass(&raw).unwrap();
    let g = check_general_decay(&dw, &dsp, &w0, 2, 1.0, &time_grid(0.0, 2.0, 41).unwrap()).unwrap();
    outcome(
        eig_err < 1e-3 && g.envelope.violations == 0,
        format!(
            "harmonic max |lambda_k - k| = {eig_err:.2e}; double-well lambda_2 = {:.6}, {} violations, worst slack {:.2e}",
            g.lambda_n, g.envelope.violations, g.envelope.worst_slack
        ),
    )
}

fn ac12_heat_corollary() -> Outcome {
    let n = 2;
    let f = SpectralField::from_modes(1, 2, &[(&[2], 0.3)]).unwrap();
    let bounds = estimate_bounds(&f, &DenseGrid::for_degree(2, 1)).unwrap();
    let h1 = h_functional(&bounds, 1.0).unwrap();
    let ts: Vec<f64> = (0..12).map(|i| 50f64.powf(i as f64 / 11.0)).collect();
    let xs: Vec<f64> = ts.iter().map(|t| (1.0 + 2.0 * t).ln()).collect();
    let ys: Vec<f64> = ts
        .iter()
        .map(|&t| lp_distance_heat(&heat_from_selfsimilar(&f, t, None).unwrap(), 1.0).unwrap())
        .collect();
    let slope = fit_log_linear(&xs, &ys).unwrap().0;
    let bound = -(n as f64) / (4.0 * h1);
    outcome(slope <= bound, format!("fitted exponent {slope:.5} <= -n/(4 H_1) = {bound:.5}"))
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 12] = [
        ("orthonormality", ac1_orthonormality, Some(Duration::from_secs(5))),
        ("closed-form constants", ac2_constants, None),
        ("oracle equivalence", ac3_oracle_equivalence, Some(Duration::from_secs(10))),
        ("improved Poincare", ac4_poincare, None),
        ("spectral decay rate", ac5_spectral_rate, None),
        ("entropy envelopes", ac6_envelopes, Some(Duration::from_secs(60))),
        ("sharpness", ac7_sharpness, None),
        ("entropy production identity", ac8_eep, None),
        ("Csiszar-Kullback", ac9_csiszar_kullback, None),
        ("rate comparison", ac10_rate_comparison, None),
        ("general potential", ac11_general_potential, Some(Duration::from_secs(120))),
        ("heat-space corollary", ac12_heat_corollary, None),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if let Some(b) = budget {
            if elapsed > *b {
                pass = false;
                detail.push_str(&format!("; over the {}s budget", b.as_secs()));
            }
        }
        failures += usize::from(!pass);
        println!(
            "AC{:<2} {} {:<28} [{:>7.2}s] {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
