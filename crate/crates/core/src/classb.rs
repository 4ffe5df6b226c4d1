//! Class-𝔅 functions `Π(α, λ) = ∏_j (cosh λ − i α_j sinh λ)⁻¹`: evaluation,
//! the logarithmic-derivative series, recovery of `α` from samples and the
//! compactness bounds on parameters with `|Π(α, λ₀)| ≥ C`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::{elementary_from_power_sums, roots_from_elementary, Alpha, ROOT_IMAG_TOL};

/// Default tolerance on the distance of the asymptotic slope from an integer.
pub const SLOPE_TOL: f64 = 0.1;

/// Half-width in `λ` of the window used for the series-coefficient fit.
pub const SERIES_WINDOW: f64 = 0.4;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn pi_eval(alpha: &Alpha, lambda: f64) -> Complex64 {
    let (s, c) = (lambda.sinh(), lambda.cosh());
    alpha
        .values()
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, a| acc / Complex64::new(c, -a * s))
}

/// `|Π(α, λ)|² = ∏_j (cosh²λ + α_j² sinh²λ)⁻¹`.
pub fn pi_abs2(alpha: &Alpha, lambda: f64) -> f64 {
    let (s2, c2) = (lambda.sinh().powi(2), lambda.cosh().powi(2));
    alpha.values().iter().fold(1.0, |acc, a| acc / (c2 + a * a * s2))
}

/// Closed form of `d/dλ log Π(α, λ) = −Σ_j (sinh λ − iα_j cosh λ)/(cosh λ − iα_j sinh λ)`.
pub fn log_derivative(alpha: &Alpha, lambda: f64) -> Complex64 {
    let (s, c) = (lambda.sinh(), lambda.cosh());
    alpha
        .values()
        .iter()
        .map(|a| -Complex64::new(s, -a * c) / Complex64::new(c, -a * s))
        .sum()
}

/// Partial sum `i Σ_{m=0}^{M} p̃_m(α) (i tanh λ)^m` of the log-derivative series.
pub fn log_derivative_series(alpha: &Alpha, lambda: f64, terms: usize) -> Result<Complex64> {
    let t = lambda.tanh();
    let ratio = t.abs() * alpha.max_abs().max(1.0);
    if ratio >= 1.0 {
        return Err(Error::SeriesDivergent { ratio });
    }
    let u = I * t;
    // p_{m-1}, p_m, p_{m+1} advanced in one pass over the terms
    let power = |m: usize| -> f64 { alpha.values().iter().map(|a| a.powi(m as i32)).sum() };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut u_m = Complex64::new(1.0, 0.0);
    for m in 0..=terms {
        let lower = if m == 0 { 0.0 } else { power(m - 1) };
        acc += u_m * (power(m + 1) + lower);
        u_m *= u;
    }
    Ok(I * acc)
}

/// Sampled values of a class-𝔅 function.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassBSamples {
    lambdas: Vec<f64>,
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    lambda: f64,
    re: f64,
    im: f64,
}

impl ClassBSamples {
    pub fn new(lambdas: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if lambdas.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: lambdas.len(), found: values.len() });
        }
        for (l, v) in lambdas.iter().zip(&values) {
            if !l.is_finite() || !v.re.is_finite() || !v.im.is_finite() {
                return invalid("non-finite sample");
            }
            if *l == 0.0 && (v - 1.0).norm() > 1e-12 {
                return invalid(format!("sample at lambda = 0 is {v}, expected 1"));
            }
        }
        Ok(ClassBSamples { lambdas, values })
    }

    /// Samples `Π(α, ·)` (or any oracle) at the given points.
    pub fn from_fn(lambdas: &[f64], f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = lambdas.iter().map(|&l| f(l)).collect();
        ClassBSamples::new(lambdas.to_vec(), values)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Writes columns `lambda,re,im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (l, v) in self.lambdas.iter().zip(&self.values) {
            wr.serialize(SampleRow { lambda: *l, re: v.re, im: v.im })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads columns `lambda,re,im`; other columns are ignored.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut lambdas = Vec::new();
        let mut values = Vec::new();
        for row in rd.deserialize::<SampleRow>() {
            let row = row?;
            lambdas.push(row.lambda);
            values.push(Complex64::new(row.re, row.im));
        }
        ClassBSamples::new(lambdas, values)
    }
}

/// Number of factors `p`, read off the decay `|Π(α, λ)| ~ const · e^{−pλ}`
/// between the two largest sample points.
pub fn recover_order(samples: &ClassBSamples, slope_tol: f64) -> Result<usize> {
    let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples.lambdas[i] > 0.0).collect();
    if idx.len() < 2 {
        return invalid("order recovery needs at least two samples with lambda > 0");
    }
    idx.sort_by(|&a, &b| samples.lambdas[a].total_cmp(&samples.lambdas[b]));
    let (i1, i2) = (idx[idx.len() - 2], idx[idx.len() - 1]);
    let (l1, l2) = (samples.lambdas[i1], samples.lambdas[i2]);
    let (m1, m2) = (samples.values[i1].norm(), samples.values[i2].norm());
    if m1 <= 0.0 || m2 <= 0.0 {
        return invalid("order recovery needs nonzero samples");
    }
    let slope = -(m2.ln() - m1.ln()) / (l2 - l1);
    let p = slope.round();
    if (slope - p).abs() > slope_tol || p < 0.0 {
        return Err(Error::OrderAmbiguous { slope, tol: slope_tol });
    }
    Ok(p as usize)
}

#[derive(Clone, Copy, Debug)]
pub struct RecoveryOptions {
    pub slope_tol: f64,
    pub root_imag_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions { slope_tol: SLOPE_TOL, root_imag_tol: ROOT_IMAG_TOL }
    }
}

/// Outcome of parameter recovery.
#[derive(Clone, Debug, Serialize)]
pub struct Recovery {
    pub alpha: Alpha,
    pub order: usize,
    /// Fitted `p̃_0, …, p̃_{2p−1}` from the series stage (empty if that
    /// stage had too few samples in its window).
    pub series_coefficients: Vec<f64>,
    /// Elementary symmetric values obtained from the series stage.
    pub series_elementary: Vec<f64>,
    /// Elementary symmetric values after refinement against all samples.
    pub elementary: Vec<f64>,
    /// `max_k |e_k(series) − e_k(refined)| / (1 + |e_k|)`; `NaN` when the
    /// series stage was skipped.
    pub series_discrepancy: f64,
}

/// Recovers `α` from samples of `Π(α, ·)`.
///
/// The order comes from the large-`λ` decay (or `p_hint`). The series stage
/// fits `p̃_m` to `log Π` on a small window around `λ = 0`, using
/// `log Π(λ) = i Σ_m p̃_m i^m B_m(tanh λ)` with `B_m(s) = ∫₀^s σ^m/(1−σ²) dσ`,
/// then solves `p̃_0 = p_1`, `p̃_1 = p_2 + p`, `p̃_m = p_{m+1} + p_{m−1}` for the
/// power sums and converts them to elementary symmetric values. Those are
/// refined by linear least squares on the exact expansion
/// `1/(Π cosh^p λ) = Σ_k (−i)^k e_k tanh^k λ` over `|λ| ≤ 2`, and the final
/// parameters are the roots of the refined polynomial.
pub fn recover_from_samples(
    samples: &ClassBSamples,
    p_hint: Option<usize>,
    opts: &RecoveryOptions,
) -> Result<Recovery> {
    let p = match p_hint {
        Some(p) => p,
        None => recover_order(samples, opts.slope_tol)?,
    };
    if p == 0 {
        return Ok(Recovery {
            alpha: Alpha::empty(),
            order: 0,
            series_coefficients: Vec::new(),
            series_elementary: Vec::new(),
            elementary: Vec::new(),
            series_discrepancy: 0.0,
        });
    }

    let series = series_stage(samples, p);
    let elementary = refine_elementary(samples, p)?;
    let alpha = roots_from_elementary(&elementary, opts.root_imag_tol)?;

    let (series_coefficients, series_elementary, series_discrepancy) = match series {
        Some((coeffs, es)) => {
            let d = es
                .iter()
                .zip(&elementary)
                .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                .fold(0.0, f64::max);
            (coeffs, es, d)
        }
        None => (Vec::new(), Vec::new(), f64::NAN),
    };
    Ok(Recovery {
        alpha,
        order: p,
        series_coefficients,
        series_elementary,
        elementary,
        series_discrepancy,
    })
}

/// Recovers `α` from an oracle `λ ↦ Π(α, λ)`.
pub fn recover_alpha(
    oracle: impl Fn(f64) -> Complex64,
    p_hint: Option<usize>,
    opts: &RecoveryOptions,
) -> Result<Recovery> {
    let samples = ClassBSamples::from_fn(&default_recovery_lambdas(), oracle)?;
    recover_from_samples(&samples, p_hint, opts)
}

/// Sampling plan used by [`recover_alpha`]: a fine grid on the series window,
/// a coarser grid on `[−2, 2]`, and the two decay points `λ = 6, 8`.
pub fn default_recovery_lambdas() -> Vec<f64> {
    let mut ls: Vec<f64> = (-400..=400).map(|k| k as f64 * 1e-3).collect();
    ls.extend((-200..=200).filter(|k: &i32| k.abs() > 40).map(|k| k as f64 * 1e-2));
    ls.extend([6.0, 8.0]);
    ls
}

/// `B_0(s), …, B_{deg}(s)` with `B_m(s) = ∫₀^s σ^m/(1−σ²) dσ`.
fn series_basis(s: f64, deg: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(deg + 1);
    b.push(s.atanh());
    if deg >= 1 {
        b.push(-0.5 * (-s * s).ln_1p());
    }
    for m in 2..=deg {
        // B_m = B_{m-2} − s^{m-1}/(m−1)
        let v = b[m - 2] - s.powi(m as i32 - 1) / (m - 1) as f64;
        b.push(v);
    }
    b
}

/// Phase-unwrapped `log` of the samples with `|λ| ≤ half_width`, walking
/// outward from `λ = 0` where `Π = 1`.
fn unwrapped_log(samples: &ClassBSamples, half_width: f64) -> Vec<(f64, Complex64)> {
    let mut pts: Vec<(f64, Complex64)> = samples
        .lambdas
        .iter()
        .zip(&samples.values)
        .filter(|(l, _)| l.abs() <= half_width)
        .map(|(l, v)| (*l, *v))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let mut out = Vec::with_capacity(pts.len());
    for side in [1.0, -1.0] {
        let mut prev_arg = 0.0;
        let mut branch: Vec<&(f64, Complex64)> =
            pts.iter().filter(|(l, _)| l * side > 0.0).collect();
        if side < 0.0 {
            branch.reverse();
        }
        for (l, v) in branch {
            let mut arg = v.arg();
            while arg - prev_arg > std::f64::consts::PI {
                arg -= 2.0 * std::f64::consts::PI;
            }
            while arg - prev_arg < -std::f64::consts::PI {
                arg += 2.0 * std::f64::consts::PI;
            }
            prev_arg = arg;
            out.push((*l, Complex64::new(v.norm().ln(), arg)));
        }
    }
    out
}

/// Least-squares fit of the series coefficients `p̃_0..p̃_deg` on samples with
/// `|tanh λ| ≤ s_max`. Real and imaginary parts of `log Π` decouple into the
/// odd and even coefficients.
fn fit_series(logs: &[(f64, Complex64)], s_max: f64, deg: usize) -> Option<Vec<f64>> {
    let pts: Vec<(f64, Complex64)> =
        logs.iter().filter(|(l, _)| l.tanh().abs() <= s_max).copied().collect();
    if pts.len() < deg + 2 {
        return None;
    }
    // log Π = i Σ p̃_m i^m B_m: coefficient of p̃_m is i^{m+1} B_m.
    // m odd -> real part (i^{m+1} = ±1), m even -> imaginary part.
    let mut coeffs = vec![0.0; deg + 1];
    for parity in [0usize, 1] {
        let ms: Vec<usize> = (0..=deg).filter(|m| m % 2 == parity).collect();
        if ms.is_empty() {
            continue;
        }
        let mut a = DMatrix::<f64>::zeros(pts.len(), ms.len());
        let mut b = DVector::<f64>::zeros(pts.len());
        for (r, (l, v)) in pts.iter().enumerate() {
            let basis = series_basis(l.tanh(), deg);
            for (c, &m) in ms.iter().enumerate() {
                let unit = I.powu(m as u32 + 1);
                let factor = if parity == 1 { unit.re } else { unit.im };
                // column scaling keeps the design well conditioned
                a[(r, c)] = factor * basis[m] / s_max.powi(m as i32 + 1);
            }
            b[r] = if parity == 1 { v.re } else { v.im };
        }
        let sol = a.svd(true, true).solve(&b, 1e-13).ok()?;
        for (c, &m) in ms.iter().enumerate() {
            coeffs[m] = sol[c] / s_max.powi(m as i32 + 1);
        }
    }
    Some(coeffs)
}

fn series_stage(samples: &ClassBSamples, p: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let logs = unwrapped_log(samples, SERIES_WINDOW);
    // coarse pass for the scale max|α| ≤ sqrt(p_2), with p_2 = p̃_1 − p
    let coarse = fit_series(&logs, 0.05f64.tanh(), 3)?;
    let scale = (coarse[1] - p as f64).max(0.0).sqrt().max(1.0) * 1.2;
    let s_max = SERIES_WINDOW.tanh().min(0.3 / scale);
    let wanted = 2 * p - 1;
    let deg = (wanted + 10).min(24);
    let fine = fit_series(&logs, s_max, deg).or_else(|| fit_series(&logs, s_max, wanted))?;
    let coeffs: Vec<f64> = fine[..=wanted].to_vec();
    // p̃_0 = p_1, p̃_1 = p_2 + p, p̃_m = p_{m+1} + p_{m-1}
    let mut power = vec![p as f64, coeffs[0]];
    for m in 1..p {
        let v = coeffs[m] - power[m - 1];
        power.push(v);
    }
    let es = elementary_from_power_sums(&power[1..=p], p).ok()?;
    Some((coeffs, es))
}

fn refine_elementary(samples: &ClassBSamples, p: usize) -> Result<Vec<f64>> {
    let pts: Vec<(f64, Complex64)> = samples
        .lambdas
        .iter()
        .zip(&samples.values)
        .filter(|(l, _)| l.abs() <= 2.0)
        .map(|(l, v)| (*l, *v))
        .collect();
    if 2 * pts.len() < p + 1 {
        return invalid(format!("need at least {} samples with |lambda| <= 2", p.div_ceil(2) + 1));
    }
    let mut a = DMatrix::<f64>::zeros(2 * pts.len(), p);
    let mut b = DVector::<f64>::zeros(2 * pts.len());
    let minus_i = Complex64::new(0.0, -1.0);
    for (r, (l, v)) in pts.iter().enumerate() {
        let t = l.tanh();
        let lhs = Complex64::new(1.0, 0.0) / (v * l.cosh().powi(p as i32)) - 1.0;
        for k in 1..=p {
            let c = minus_i.powu(k as u32) * t.powi(k as i32);
            a[(2 * r, k - 1)] = c.re;
            a[(2 * r + 1, k - 1)] = c.im;
        }
        b[2 * r] = lhs.re;
        b[2 * r + 1] = lhs.im;
    }
    let sol = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Validation(e.into()))?;
    Ok(sol.iter().copied().collect())
}

/// Evaluation grid `−λ_max, −λ_max + step, …, λ_max`.
pub fn symmetric_grid(lambda_max: f64, step: f64) -> Vec<f64> {
    let n = (2.0 * lambda_max / step).round() as i64;
    (0..=n).map(|k| (-lambda_max + k as f64 * step).min(lambda_max)).collect()
}

/// `max_λ |Π(a, λ) − Π(b, λ)|` over a symmetric grid.
pub fn classb_sup_distance(a: &Alpha, b: &Alpha, lambda_max: f64, grid_step: f64) -> Result<f64> {
    if !(lambda_max > 0.0 && grid_step > 0.0) {
        return invalid("lambda_max and grid_step must be positive");
    }
    Ok(symmetric_grid(lambda_max, grid_step)
        .into_iter()
        .map(|l| (pi_eval(a, l) - pi_eval(b, l)).norm())
        .fold(0.0, f64::max))
}

/// Bounds satisfied by every `α` with `|Π(α, λ₀)| ≥ C`:
/// `|α_j| ≤ 1/(C sinh λ₀)` and `p ≤ −log C / log cosh λ₀`.
pub fn compactness_bounds(c: f64, lambda0: f64) -> Result<(f64, f64)> {
    if !(c > 0.0 && c < 1.0) {
        return invalid(format!("C = {c} must lie in (0, 1)"));
    }
    if !(lambda0 > 0.0) {
        return invalid(format!("lambda0 = {lambda0} must be positive"));
    }
    Ok((1.0 / (c * lambda0.sinh()), -c.ln() / lambda0.cosh().ln()))
}
