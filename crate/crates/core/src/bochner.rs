//! Biinvariant functions synthesized from finitely atomic measures on `ℛ`:
//!
//! - positive type: `φ(g) = Σ_k w_k φ_{α_k}(g)`;
//! - negative type: `ψ(g) = ψ(e) + Σ_{α_k ≠ ∅} w_k (1 − φ_{α_k}(g))`.
//!
//! Also a boundedness certificate for `ψ` and recovery of the weights from
//! sampled values by nonnegative least squares.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::group::{cartan_profile, random_sl, spherical_eval_profile, CartanProfile, GroupElement};
use crate::params::Alpha;
use crate::seeds;

/// Default stopping tolerance for the NNLS dual (gradient) test.
pub const NNLS_TOL: f64 = 1e-10;

/// Design matrices with condition number above this are flagged.
pub const CONDITION_WARN: f64 = 1e10;

/// Finitely many atoms of `ℛ` with nonnegative weights. Duplicate atoms are
/// merged, keeping first-appearance order.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteParamMeasure {
    atoms: Vec<Alpha>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl DiscreteParamMeasure {
    pub fn new(atoms: Vec<Alpha>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return invalid(format!("{} atoms but {} weights", atoms.len(), weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return invalid(format!("weight {w} is negative or not finite"));
        }
        let mut merged_atoms: Vec<Alpha> = Vec::with_capacity(atoms.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (a, w) in atoms.into_iter().zip(weights) {
            match merged_atoms.iter().position(|b| *b == a) {
                Some(i) => merged_weights[i] += w,
                None => {
                    merged_atoms.push(a);
                    merged_weights.push(w);
                }
            }
        }
        let total_weight = merged_weights.iter().sum();
        Ok(DiscreteParamMeasure { atoms: merged_atoms, weights: merged_weights, total_weight })
    }

    pub fn empty() -> Self {
        DiscreteParamMeasure { atoms: Vec::new(), weights: Vec::new(), total_weight: 0.0 }
    }

    pub fn atoms(&self) -> &[Alpha] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Alpha, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Restriction to `ℛ* = ℛ ∖ {∅}`.
    pub fn nontrivial(&self) -> Self {
        let (atoms, weights) = self.iter().filter(|(a, _)| !a.is_empty()).map(|(a, w)| (a.clone(), w)).unzip();
        DiscreteParamMeasure::new(atoms, weights).expect("restriction of a valid measure")
    }

    pub fn nontrivial_mass(&self) -> f64 {
        self.iter().filter(|(a, _)| !a.is_empty()).map(|(_, w)| w).sum()
    }

    /// Mass of the atom `alpha`, 0 if absent.
    pub fn weight_of(&self, alpha: &Alpha) -> f64 {
        self.iter().find(|(a, _)| *a == alpha).map_or(0.0, |(_, w)| w)
    }

    /// A copy with `w` added at `alpha`.
    pub fn with_atom(&self, alpha: Alpha, w: f64) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        let mut weights = self.weights.clone();
        atoms.push(alpha);
        weights.push(w);
        DiscreteParamMeasure::new(atoms, weights)
    }
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    alpha: Alpha,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    #[serde(default)]
    psi_at_e: f64,
    atoms: Vec<AtomJson>,
}

/// A measure together with the value `ψ(e)`; the JSON document shared by the
/// command-line tools: `{"psi_at_e": x, "atoms": [{"alpha": [..], "weight": w}, ..]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSpec {
    pub psi_at_e: f64,
    pub measure: DiscreteParamMeasure,
}

impl MeasureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MeasureJson = serde_json::from_str(text)?;
        if !(raw.psi_at_e >= 0.0) {
            return invalid(format!("psi_at_e = {} must be >= 0", raw.psi_at_e));
        }
        let (atoms, weights) = raw.atoms.into_iter().map(|a| (a.alpha, a.weight)).unzip();
        Ok(MeasureSpec { psi_at_e: raw.psi_at_e, measure: DiscreteParamMeasure::new(atoms, weights)? })
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = MeasureJson {
            psi_at_e: self.psi_at_e,
            atoms: self.measure.iter().map(|(a, w)| AtomJson { alpha: a.clone(), weight: w }).collect(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

pub fn synth_positive_profile(mu: &DiscreteParamMeasure, profile: &CartanProfile) -> Complex64 {
    mu.iter().map(|(a, w)| w * spherical_eval_profile(a, profile)).sum()
}

/// `Σ_k w_k φ_{α_k}(g)`.
pub fn synth_positive(mu: &DiscreteParamMeasure, g: &GroupElement) -> Result<Complex64> {
    Ok(synth_positive_profile(mu, &cartan_profile(g)?))
}

fn check_psi0(psi0: f64) -> Result<()> {
    if !(psi0 >= 0.0) {
        return invalid(format!("psi(e) = {psi0} must be >= 0"));
    }
    Ok(())
}

/// `ψ(e) + Σ_k w_k (1 − φ_{α_k})` on a profile. Atoms at `∅` contribute
/// `1 − φ_∅ ≡ 0` and are skipped.
pub fn synth_negative_profile(
    mu: &DiscreteParamMeasure,
    psi0: f64,
    profile: &CartanProfile,
) -> Result<Complex64> {
    check_psi0(psi0)?;
    Ok(mu
        .iter()
        .filter(|(a, _)| !a.is_empty())
        .fold(Complex64::new(psi0, 0.0), |acc, (a, w)| {
            acc + w * (1.0 - spherical_eval_profile(a, profile))
        }))
}

pub fn synth_negative(mu: &DiscreteParamMeasure, psi0: f64, g: &GroupElement) -> Result<Complex64> {
    check_psi0(psi0)?;
    if mu.weight_of(&Alpha::empty()) > 0.0 {
        warn!("atom at ∅ has no effect on a negative-type function and is dropped");
    }
    synth_negative_profile(mu, psi0, &cartan_profile(g)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct StressRow {
    pub lambda: f64,
    pub sup_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// `2 · μ(ℛ*)`.
    pub bound: f64,
    pub observed_sup: f64,
    pub random_sup: f64,
    /// Sup of `|ψ − ψ(e)|` over the stress profiles at each `λ`.
    pub stress: Vec<StressRow>,
    pub passed: bool,
}

/// Zero-sum stress profiles at scale `lambda` for rank `n`:
/// `(λ, −λ, 0, …)` and the balanced `(λ, …, λ, [0], −λ, …, −λ)`.
pub fn stress_profiles(n: usize, lambda: f64) -> Vec<Vec<f64>> {
    let mut pair = vec![0.0; n];
    pair[0] = lambda;
    pair[n - 1] = -lambda;
    let half = n / 2;
    let balanced: Vec<f64> = (0..n)
        .map(|i| if i < half { lambda } else if i >= n - half { -lambda } else { 0.0 })
        .collect();
    if half == 1 { vec![pair] } else { vec![pair, balanced] }
}

/// Evaluates `ψ` on `num_samples` random elements of `SL(n)` and on stress
/// profiles with `λ = 1, …, 10`, and checks `sup |ψ − ψ(e)| ≤ 2 μ(ℛ*) + 1e−10`.
pub fn boundedness_check(
    mu: &DiscreteParamMeasure,
    psi0: f64,
    n: usize,
    num_samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    check_psi0(psi0)?;
    if num_samples == 0 {
        return invalid("num_samples must be >= 1");
    }
    if n < 2 {
        return invalid("n must be >= 2");
    }
    let deviation = |profile: &CartanProfile| -> Result<f64> {
        Ok((synth_negative_profile(mu, psi0, profile)? - psi0).norm())
    };
    let mut random_sup = 0.0f64;
    for i in 0..num_samples {
        let g = random_sl(n, seeds::derive(seed, &[i as u64]))?;
        random_sup = random_sup.max(deviation(&cartan_profile(&g)?)?);
    }
    let mut stress = Vec::new();
    for step in 1..=10 {
        let lambda = step as f64;
        let mut sup = 0.0f64;
        for p in stress_profiles(n, lambda) {
            let g = GroupElement::from_profile(&p)?;
            sup = sup.max(deviation(&cartan_profile(&g)?)?);
        }
        stress.push(StressRow { lambda, sup_deviation: sup });
    }
    let observed_sup = stress.iter().map(|r| r.sup_deviation).fold(random_sup, f64::max);
    let bound = 2.0 * mu.nontrivial_mass();
    Ok(BoundReport { bound, observed_sup, random_sup, stress, passed: observed_sup <= bound + 1e-10 })
}

/// Lawson–Hanson active-set NNLS: `min ‖Ax − b‖` over `x ≥ 0`. Stops when
/// the largest dual component `(Aᵀ(b − Ax))_j` over the inactive set is
/// `≤ tol · (1 + ‖Aᵀb‖_∞)`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let scale = 1.0 + (a.transpose() * b).amax();
    let threshold = tol * scale;
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, c| a[(i, cols[c])]);
        let sol = sub.svd(true, true).solve(b, 1e-14).expect("SVD was computed with U and V");
        let mut full = DVector::<f64>::zeros(n);
        for (c, &j) in cols.iter().enumerate() {
            full[j] = sol[c];
        }
        full
    };
    for _ in 0..3 * n.max(1) + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
            .filter(|&j| w[j] > threshold);
        let Some(enter) = candidate else { break };
        passive[enter] = true;
        loop {
            let s = solve_passive(&passive);
            let blocking: Vec<usize> = (0..n).filter(|&j| passive[j] && s[j] <= 0.0).collect();
            if blocking.is_empty() {
                x = s;
                break;
            }
            let step = blocking
                .iter()
                .map(|&j| x[j] / (x[j] - s[j]))
                .fold(f64::INFINITY, f64::min);
            x += (s - &x) * step;
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    x
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub measure: DiscreteParamMeasure,
    /// `‖A w − b‖₂` over the stacked real and imaginary parts.
    pub residual: f64,
    pub condition: f64,
    pub ill_conditioned: bool,
    /// False for negative-type fits, where mass at `∅` cannot be observed.
    pub trivial_atom_identifiable: bool,
}

fn stacked_design(
    profiles: &[CartanProfile],
    grid: &[Alpha],
    column: impl Fn(&Alpha, &CartanProfile) -> Complex64,
    targets: &[Complex64],
) -> (DMatrix<f64>, DVector<f64>) {
    let s = profiles.len();
    let mut a = DMatrix::<f64>::zeros(2 * s, grid.len());
    let mut b = DVector::<f64>::zeros(2 * s);
    for (r, p) in profiles.iter().enumerate() {
        for (c, alpha) in grid.iter().enumerate() {
            let v = column(alpha, p);
            a[(2 * r, c)] = v.re;
            a[(2 * r + 1, c)] = v.im;
        }
        b[2 * r] = targets[r].re;
        b[2 * r + 1] = targets[r].im;
    }
    (a, b)
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    if min > 0.0 { max / min } else { f64::INFINITY }
}

fn solve_fit(
    a: DMatrix<f64>,
    b: DVector<f64>,
    grid: &[Alpha],
    reg_tol: f64,
    trivial_atom_identifiable: bool,
) -> Result<FitResult> {
    let condition = condition_number(&a);
    let ill_conditioned = condition > CONDITION_WARN;
    if ill_conditioned {
        warn!("fit design is ill-conditioned (condition number {condition:e})");
    }
    let w = nnls(&a, &b, reg_tol);
    let residual = (&a * &w - &b).norm();
    let measure = DiscreteParamMeasure::new(grid.to_vec(), w.iter().copied().collect())?;
    Ok(FitResult { measure, residual, condition, ill_conditioned, trivial_atom_identifiable })
}

fn check_fit_inputs(values: &[(GroupElement, Complex64)], grid: &[Alpha]) -> Result<Vec<CartanProfile>> {
    if grid.is_empty() {
        return invalid("fit grid is empty");
    }
    if values.is_empty() {
        return invalid("no samples to fit");
    }
    values.iter().map(|(g, _)| cartan_profile(g)).collect()
}

/// Weights `w ≥ 0` on `grid` minimizing `Σ_s |Σ_k w_k φ_{α_k}(g_s) − v_s|²`.
pub fn fit_measure(
    values: &[(GroupElement, Complex64)],
    grid: &[Alpha],
    reg_tol: f64,
) -> Result<FitResult> {
    let profiles = check_fit_inputs(values, grid)?;
    let targets: Vec<Complex64> = values.iter().map(|(_, v)| *v).collect();
    let (a, b) = stacked_design(&profiles, grid, spherical_eval_profile, &targets);
    solve_fit(a, b, grid, reg_tol, true)
}

/// Fits `ψ(g) = ψ(e) + Σ_k w_k (1 − φ_{α_k}(g))` with `ψ(e)` given. Atoms at
/// `∅` have an identically zero column; they are reported with weight 0
/// and flagged as not identifiable.
pub fn fit_negative_measure(
    values: &[(GroupElement, Complex64)],
    grid: &[Alpha],
    psi_at_e: f64,
    reg_tol: f64,
) -> Result<FitResult> {
    check_psi0(psi_at_e)?;
    let profiles = check_fit_inputs(values, grid)?;
    let active: Vec<Alpha> = grid.iter().filter(|a| !a.is_empty()).cloned().collect();
    let targets: Vec<Complex64> = values.iter().map(|(_, v)| v - psi_at_e).collect();
    let (a, b) = stacked_design(&profiles, &active, |al, p| 1.0 - spherical_eval_profile(al, p), &targets);
    let fit = solve_fit(a, b, &active, reg_tol, false)?;
    // report on the caller's grid, with ∅ (if present) at weight 0
    let weights = grid.iter().map(|g| fit.measure.weight_of(g)).collect();
    Ok(FitResult { measure: DiscreteParamMeasure::new(grid.to_vec(), weights)?, ..fit })
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Diagonal-profile elements of `SL(n)` whose `λ` is the Halton point
/// `i + skip + 1` mapped to `[−2, 2]ⁿ` and shifted to zero sum.
pub fn design_elements(n: usize, count: usize, skip: u64) -> Result<Vec<GroupElement>> {
    if n < 2 || n > PRIMES.len() {
        return invalid(format!("design rank must be in 2..={}", PRIMES.len()));
    }
    (0..count as u64)
        .map(|i| {
            let raw: Vec<f64> = PRIMES[..n].iter().map(|&b| 4.0 * radical_inverse(i + skip + 1, b) - 2.0).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            let lambdas: Vec<f64> = raw.iter().map(|l| l - mean).collect();
            GroupElement::from_profile(&lambdas)
        })
        .collect()
}
