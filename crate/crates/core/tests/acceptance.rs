//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails if any criterion fails, except for sub-checks listed in
//! `KNOWN_CONSTANT_MISMATCHES`, which are still printed as FAIL.

use std::process::Command;
use std::time::Instant;

use olshanski::bochner::{
    boundedness_check, design_elements, fit_measure, fit_negative_measure, synth_negative, synth_positive,
    DiscreteParamMeasure, MeasureSpec, NNLS_TOL,
};
use olshanski::classb::{
    classb_sup_distance, compactness_bounds, pi_abs2, pi_eval, recover_alpha, recover_order, ClassBSamples,
    RecoveryOptions, SLOPE_TOL,
};
use olshanski::group::{random_sl_family, spherical_eval_profile, spherical_limit_test, GroupElement};
use olshanski::kernels::{psd_check, schoenberg_check_gram, PairProfiles, GRAM_TOL};
use olshanski::measures::{density_grid, ft_residual, single_density_grid};
use olshanski::params::{param_distance, Alpha};
use olshanski::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Published constants that disagree with direct evaluation of their own
/// defining formulas. Printed as FAIL, not counted as regressions.
const KNOWN_CONSTANT_MISMATCHES: &[&str] = &["6c"];

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

fn alpha(v: &[f64]) -> Alpha {
    Alpha::new(v.to_vec()).unwrap()
}

fn criterion_1() -> Vec<Outcome> {
    let start = Instant::now();
    let worst = [0.0, 0.5, -0.5, 2.0, -2.0]
        .iter()
        .map(|&a| ft_residual(&single_density_grid(a, 40.0, 0.01).unwrap(), &alpha(&[a]), 3.0, 0.01))
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "1",
        worst <= 1e-6 && secs < 5.0,
        format!("fourier identity: max residual {worst:.2e} (tol 1e-6), {secs:.2} s (limit 5 s)"),
    )]
}

fn criterion_2() -> Vec<Outcome> {
    let start = Instant::now();
    let worst = [[0.0, 0.0], [1.0, -1.0], [0.5, 2.0]]
        .iter()
        .map(|pair| {
            let a = alpha(pair);
            ft_residual(&density_grid(&a, 40.0, 0.01).unwrap(), &a, 3.0, 0.01)
        })
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "2",
        worst <= 1e-4 && secs < 30.0,
        format!("convolution theorem: max residual {worst:.2e} (tol 1e-4), {secs:.2} s (limit 30 s)"),
    )]
}

fn criterion_3() -> Vec<Outcome> {
    let alphas = [alpha(&[0.0]), alpha(&[1.0]), alpha(&[-1.0, 2.0]), alpha(&[0.5, 0.5, 3.0])];
    let (mut failures, mut worst_defect, mut worst_margin) = (0, 0.0f64, f64::INFINITY);
    for seed in 0..100u64 {
        let pairs = PairProfiles::new(&random_sl_family(6, 40, seed).unwrap()).unwrap();
        for a in &alphas {
            let r = psd_check(&pairs.gram(|p| spherical_eval_profile(a, p)), GRAM_TOL).unwrap();
            worst_defect = worst_defect.max(r.hermiticity_defect);
            worst_margin = worst_margin.min(r.extremal_eigenvalue - r.threshold);
            if !(r.passed && r.hermiticity_defect <= 1e-10) {
                failures += 1;
            }
        }
    }
    vec![outcome(
        "3",
        failures == 0,
        format!(
            "positive type: 400 Gram matrices, {failures} failures, max hermiticity defect {worst_defect:.1e}, \
             min eigenvalue margin {worst_margin:.2e}"
        ),
    )]
}

fn criterion_4() -> Vec<Outcome> {
    let g0 = GroupElement::from_profile(&[1.0, -1.0]).unwrap();
    let rows = spherical_limit_test(&alpha(&[0.0]), &g0, &g0, &[4, 32], 4000, 0).unwrap();
    let target = 1f64.cosh().powi(-4);
    let (r4, r32) = (&rows[0], &rows[1]);
    let passed = (r4.target.re - target).abs() < 1e-15
        && r32.abs_err < r4.abs_err
        && r32.abs_err <= 3.0 * r32.mc_stderr;
    vec![outcome(
        "4",
        passed,
        format!(
            "spherical limit: err(n=4) {:.2e}, err(n=32) {:.2e}, 3 stderr(n=32) {:.2e}",
            r4.abs_err,
            r32.abs_err,
            3.0 * r32.mc_stderr
        ),
    )]
}

fn criterion_5() -> Vec<Outcome> {
    let start = Instant::now();
    let opts = RecoveryOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut order_misses, mut errors) = (0.0f64, 0, 0);
    for _ in 0..500 {
        let p = rng.random_range(0..=4);
        let a = alpha(&(0..p).map(|_| rng.random_range(-3.0..=3.0)).collect::<Vec<_>>());
        let samples = ClassBSamples::from_fn(&olshanski::classb::default_recovery_lambdas(), |l| pi_eval(&a, l))
            .unwrap();
        if recover_order(&samples, SLOPE_TOL).ok() != Some(p) {
            order_misses += 1;
        }
        match recover_alpha(|l| pi_eval(&a, l), None, &opts) {
            Ok(r) => worst = worst.max(param_distance(&a, &r.alpha)),
            Err(_) => errors += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "5",
        worst <= 1e-4 && order_misses == 0 && errors == 0 && secs < 60.0,
        format!(
            "parameter recovery: 500 draws, max error {worst:.2e} (tol 1e-4), {order_misses} order misses, \
             {errors} errors, {secs:.2} s (limit 60 s)"
        ),
    )]
}

fn criterion_6() -> Vec<Outcome> {
    let limit = alpha(&[0.0]);
    let dists: Vec<f64> = (1..=1000)
        .map(|n| classb_sup_distance(&alpha(&[1.0 / n as f64]), &limit, 3.0, 0.01).unwrap())
        .collect();
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    let last = dists[999];
    let a = outcome(
        "6a",
        monotone && last < 1e-3,
        format!("topology: sup distance for (1/n,) strictly decreasing = {monotone}, at n = 1000 {last:.2e}"),
    );

    let (ab, pb) = compactness_bounds(0.5, 1.0).unwrap();
    let formula = (1.0 / (0.5 * 1f64.sinh()), -(0.5f64).ln() / 1f64.cosh().ln());
    let b = outcome(
        "6b",
        (ab - formula.0).abs() <= 1e-12 && (pb - formula.1).abs() <= 1e-12,
        format!("compactness bounds match 1/(C sinh λ0), −ln C/ln cosh λ0: ({ab:.7}, {pb:.7})"),
    );
    let listed = (1.7018071, 1.5979104);
    let (da, dp) = ((ab - listed.0).abs(), (pb - listed.1).abs());
    let c = outcome(
        "6c",
        da <= 1e-6 && dp <= 1e-6,
        format!(
            "compactness bounds vs listed constants ({}, {}): residuals {da:.1e}, {dp:.1e} (tol 1e-6); \
             the listed values are not the formula's",
            listed.0, listed.1
        ),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut inside, mut violations) = (0, 0);
    for _ in 0..10_000 {
        let p = rng.random_range(0..=3);
        let s = alpha(&(0..p).map(|_| rng.random_range(-2.5..=2.5)).collect::<Vec<_>>());
        if pi_abs2(&s, 1.0).sqrt() >= 0.5 {
            inside += 1;
            if s.max_abs() > ab || p as f64 > pb {
                violations += 1;
            }
        }
    }
    let d = outcome(
        "6d",
        violations == 0 && inside > 0,
        format!("compactness implication: 10^4 samples, {inside} with |Π(α,1)| >= 0.5, {violations} violations"),
    );
    vec![a, b, c, d]
}

/// 50 measures with 1–3 atoms (p in 1..=3, entries in [−3, 3]), weights
/// in [0.1, 2], an extra ∅ atom half the time, psi0 in [0, 1].
fn random_measures() -> Vec<MeasureSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..50)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let mut atoms = Vec::new();
            let mut weights = Vec::new();
            for _ in 0..k {
                let p = rng.random_range(1..=3);
                atoms.push(alpha(&(0..p).map(|_| rng.random_range(-3.0..=3.0)).collect::<Vec<_>>()));
                weights.push(rng.random_range(0.1..=2.0));
            }
            if rng.random_bool(0.5) {
                atoms.push(Alpha::empty());
                weights.push(rng.random_range(0.1..=2.0));
            }
            MeasureSpec {
                psi_at_e: rng.random_range(0.0..=1.0),
                measure: DiscreteParamMeasure::new(atoms, weights).unwrap(),
            }
        })
        .collect()
}

fn criterion_7(measures: &[MeasureSpec]) -> Vec<Outcome> {
    let ts = [0.1, 1.0, 10.0];
    let (mut false_fails, mut false_passes) = (0, 0);
    for (i, m) in measures.iter().enumerate() {
        let pairs = PairProfiles::new(&random_sl_family(6, 40, 700 + i as u64).unwrap()).unwrap();
        let psi = pairs.gram(|p| olshanski::bochner::synth_negative_profile(&m.measure, m.psi_at_e, p).unwrap());
        let at_e = Complex64::new(m.psi_at_e, 0.0);
        let r = schoenberg_check_gram(&psi, at_e, &ts, GRAM_TOL).unwrap();
        if !(r.passed && r.negtype.passed && r.exp_checks.iter().all(|c| c.report.passed)) {
            false_fails += 1;
        }
        let flipped = schoenberg_check_gram(&(-&psi), -at_e, &ts, GRAM_TOL).unwrap();
        if flipped.negtype.passed || flipped.exp_checks.iter().all(|c| c.report.passed) {
            false_passes += 1;
        }
    }
    vec![outcome(
        "7",
        false_fails == 0 && false_passes == 0,
        format!(
            "schoenberg: 50 measures, t in {{0.1, 1, 10}}, {false_fails} false fails, \
             {false_passes} sign-flipped false passes"
        ),
    )]
}

fn criterion_8(measures: &[MeasureSpec]) -> Vec<Outcome> {
    let (mut bound_fails, mut worst_ratio) = (0, 0.0f64);
    let mut worst_identity = 0.0f64;
    let (mut worst_fit, mut worst_neg_fit, mut empty_sensitive) = (0.0f64, 0.0f64, 0);
    let design = design_elements(6, 60, 0).unwrap();
    for (i, m) in measures.iter().enumerate() {
        let r = boundedness_check(&m.measure, m.psi_at_e, 6, 200, 800 + i as u64).unwrap();
        if !r.passed {
            bound_fails += 1;
        }
        worst_ratio = worst_ratio.max(r.observed_sup / r.bound);

        let nontrivial = m.measure.nontrivial();
        let n = GroupElement::identity(6);
        let phi_e = synth_positive(&nontrivial, &n).unwrap();
        for g in random_sl_family(6, 20, 900 + i as u64).unwrap() {
            let lhs = synth_negative(&m.measure, m.psi_at_e, &g).unwrap();
            let rhs = m.psi_at_e + phi_e - synth_positive(&nontrivial, &g).unwrap();
            worst_identity = worst_identity.max((lhs - rhs).norm());
        }

        let mut grid = m.measure.atoms().to_vec();
        if !grid.contains(&Alpha::empty()) {
            grid.push(Alpha::empty());
        }
        let positive: Vec<_> = design.iter().map(|g| (g.clone(), synth_positive(&m.measure, g).unwrap())).collect();
        let fit = fit_measure(&positive, &grid, NNLS_TOL).unwrap();
        for a in &grid {
            worst_fit = worst_fit.max((fit.measure.weight_of(a) - m.measure.weight_of(a)).abs());
        }

        let heavier = m.measure.with_atom(Alpha::empty(), 1.5).unwrap();
        let negative = |mu: &DiscreteParamMeasure| -> Vec<(GroupElement, Complex64)> {
            design.iter().map(|g| (g.clone(), synth_negative(mu, m.psi_at_e, g).unwrap())).collect()
        };
        let f1 = fit_negative_measure(&negative(&m.measure), &grid, m.psi_at_e, NNLS_TOL).unwrap();
        let f2 = fit_negative_measure(&negative(&heavier), &grid, m.psi_at_e, NNLS_TOL).unwrap();
        if f1.measure != f2.measure {
            empty_sensitive += 1;
        }
        for a in grid.iter().filter(|a| !a.is_empty()) {
            worst_neg_fit = worst_neg_fit.max((f1.measure.weight_of(a) - m.measure.weight_of(a)).abs());
        }
    }
    vec![
        outcome(
            "8a",
            bound_fails == 0,
            format!("boundedness: {bound_fails} of 50 exceed 2·mass(ℛ*) + 1e-10, max observed/bound {worst_ratio:.6}"),
        ),
        outcome(
            "8b",
            worst_identity <= 1e-12,
            format!("ψ = ψ(e) + φ(e) − φ: max deviation {worst_identity:.1e} (tol 1e-12)"),
        ),
        outcome(
            "8c",
            worst_fit <= 1e-6 && worst_neg_fit <= 1e-6 && empty_sensitive == 0,
            format!(
                "fit roundtrip: max weight error {worst_fit:.1e} (positive), {worst_neg_fit:.1e} (negative), \
                 {empty_sensitive} negative fits changed by added ∅ mass"
            ),
        ),
    ]
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_olshanski")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_9() -> Vec<Outcome> {
    let dir = tempfile::tempdir().unwrap();
    let measure = dir.path().join("m.json");
    std::fs::write(
        &measure,
        r#"{"psi_at_e": 0.3, "atoms": [{"alpha": [0], "weight": 1}, {"alpha": [-1, 2], "weight": 0.5}]}"#,
    )
    .unwrap();
    let samples = dir.path().join("s.csv");
    let a = alpha(&[-1.0, 0.5, 2.0]);
    ClassBSamples::from_fn(&olshanski::classb::default_recovery_lambdas(), |l| pi_eval(&a, l))
        .unwrap()
        .write_csv(std::fs::File::create(&samples).unwrap())
        .unwrap();
    let m = measure.to_str().unwrap();
    let s = samples.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["eval-pi", "--alpha", "-1,2", "--range", "-2:2:0.25"],
        vec!["density", "--alpha", "0.5", "--check-ft"],
        vec!["psd-check", "--alpha", "0", "--n", "6", "--num", "20", "--seed", "42"],
        vec!["spherical-limit", "--alpha", "0", "--n-list", "4,8", "--mc", "300", "--seed", "3"],
        vec!["recover", "--samples", s],
        vec!["negtype-check", "--measure", m, "--num", "20", "--seed", "5"],
        vec!["schoenberg", "--measure", m, "--num", "20", "--seed", "5"],
        vec!["bound-check", "--measure", m, "--samples", "50", "--seed", "5"],
        vec!["fit", "--measure", m, "--kind", "negative", "--seed", "5"],
        vec!["bochner-synth", "--measure", m, "--num", "10", "--seed", "5"],
        vec!["convergence-demo", "--terms", "50", "--tol-convergence", "0.05"],
    ];
    let mut mismatched = Vec::new();
    for c in &commands {
        let (c1, o1) = cli(c);
        let (c2, o2) = cli(c);
        if c1 != c2 || o1 != o2 || o1.is_empty() || c1 != 0 {
            mismatched.push(c[0]);
        }
    }
    vec![outcome(
        "9",
        mismatched.is_empty(),
        format!("determinism: {} commands run twice, non-identical or failing: {mismatched:?}", commands.len()),
    )]
}

fn main() {
    let measures = random_measures();
    let mut all = Vec::new();
    all.extend(criterion_1());
    all.extend(criterion_2());
    all.extend(criterion_3());
    all.extend(criterion_4());
    all.extend(criterion_5());
    all.extend(criterion_6());
    all.extend(criterion_7(&measures));
    all.extend(criterion_8(&measures));
    all.extend(criterion_9());

    let mut regressions = 0;
    for o in &all {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && KNOWN_CONSTANT_MISMATCHES.contains(&o.id) {
            " [known constant mismatch, not counted]"
        } else {
            ""
        };
        println!("criterion {:<3} {tag}  {}{note}", o.id, o.detail);
        if !o.passed && note.is_empty() {
            regressions += 1;
        }
    }
    println!("acceptance: {} checks, {regressions} counted failures", all.len());
    if regressions > 0 {
        std::process::exit(1);
    }
}
