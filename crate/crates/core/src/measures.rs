//! Probability densities `g_a(t) = e^{t·arctan a} / (2√(1+a²) cosh(πt/2))`
//! whose Fourier transforms are the single factors of `Π(α, ·)`, sampled on
//! uniform grids, convolved, and transformed by trapezoidal quadrature.

use std::f64::consts::{FRAC_PI_2, LN_2};
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classb::{classb_sup_distance, pi_eval, symmetric_grid};
use crate::error::{invalid, Error, Result};
use crate::params::{param_distance, Alpha};

pub const DEFAULT_T_MAX: f64 = 40.0;
pub const DEFAULT_STEP: f64 = 0.01;
/// Largest accepted bound on the mass a single factor loses outside the window.
pub const TAIL_MASS_TOL: f64 = 1e-8;

fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - LN_2
}

/// `g_a(t)`, evaluated in log space so large `|t|` neither overflows nor
/// loses the tail.
pub fn density_eval(a: f64, t: f64) -> f64 {
    let log = t * a.atan() - ln_cosh(FRAC_PI_2 * t) - (2.0 * (1.0 + a * a).sqrt()).ln();
    log.exp()
}

/// Upper bound on `∫_{|t|>t_max} g_a(t) dt`, from `2 cosh x ≥ e^{|x|}`.
pub fn tail_mass_bound(a: f64, t_max: f64) -> f64 {
    let rate = FRAC_PI_2 - a.atan().abs();
    (-rate * t_max).exp() / (rate * (1.0 + a * a).sqrt())
}

/// A density sampled at `t_min + k·step`, `k = 0..values.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    t_min: f64,
    step: f64,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRow {
    t: f64,
    value: f64,
}

impl DensityGrid {
    pub fn new(t_min: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !t_min.is_finite() {
            return invalid("grid step must be positive and t_min finite");
        }
        if values.is_empty() {
            return invalid("empty density grid");
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return invalid(format!("density value {v} is negative or not finite"));
        }
        Ok(DensityGrid { t_min, step, values })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t_min + k as f64 * self.step
    }

    /// Trapezoidal mass.
    pub fn mass(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values.iter().sum();
        let ends = if n > 1 { 0.5 * (self.values[0] + self.values[n - 1]) } else { 0.0 };
        self.step * (inner - ends)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (k, v) in self.values.iter().enumerate() {
            wr.serialize(GridRow { t: self.t(k), value: *v })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `t,value` rows; the `t` column must be uniformly spaced.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let rows = rd.deserialize::<GridRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.len() < 2 {
            return invalid("density CSV needs at least two rows");
        }
        let t_min = rows[0].t;
        let step = (rows[rows.len() - 1].t - t_min) / (rows.len() - 1) as f64;
        for (k, row) in rows.iter().enumerate() {
            if (row.t - (t_min + k as f64 * step)).abs() > 1e-9 * (1.0 + row.t.abs()) {
                return invalid(format!("non-uniform grid at row {k}"));
            }
        }
        DensityGrid::new(t_min, step, rows.into_iter().map(|r| r.value).collect())
    }
}

/// `g_a` on `[−t_max, t_max]`; fails if the window loses more than
/// [`TAIL_MASS_TOL`] of the mass.
pub fn single_density_grid(a: f64, t_max: f64, step: f64) -> Result<DensityGrid> {
    if !(t_max > 0.0 && step > 0.0) {
        return invalid("t_max and step must be positive");
    }
    let tail = tail_mass_bound(a, t_max);
    if tail > TAIL_MASS_TOL {
        return Err(Error::InsufficientWindow { tail });
    }
    let t = symmetric_grid(t_max, step);
    DensityGrid::new(t[0], step, t.iter().map(|&t| density_eval(a, t)).collect())
}

/// Sampled density of `μ_{α_1} ⋆ … ⋆ μ_{α_p}`.
pub fn density_grid(alpha: &Alpha, t_max: f64, step: f64) -> Result<DensityGrid> {
    let (first, rest) = match alpha.values().split_first() {
        Some(x) => x,
        None => return invalid("alpha = ∅ is the point mass at 0, not a density"),
    };
    let mut acc = single_density_grid(*first, t_max, step)?;
    for a in rest {
        acc = convolve(&acc, &single_density_grid(*a, t_max, step)?)?;
    }
    Ok(acc)
}

/// Discrete convolution scaled by the step; direct summation.
pub fn convolve(d1: &DensityGrid, d2: &DensityGrid) -> Result<DensityGrid> {
    if (d1.step - d2.step).abs() > 1e-12 * d1.step.max(d2.step) {
        return Err(Error::StepMismatch(d1.step, d2.step));
    }
    let (n1, n2) = (d1.len(), d2.len());
    let mut out = vec![0.0; n1 + n2 - 1];
    for (i, &x) in d1.values.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..i + n2].iter_mut().zip(&d2.values) {
            *o += x * y;
        }
    }
    for o in out.iter_mut() {
        *o *= d1.step;
    }
    DensityGrid::new(d1.t_min + d2.t_min, d1.step, out)
}

/// Trapezoidal quadrature of `∫ e^{iλt} g(t) dt`.
pub fn char_function(d: &DensityGrid, lambda: f64) -> Complex64 {
    let n = d.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &v) in d.values.iter().enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        acc += Complex64::from_polar(w * v, lambda * d.t(k));
    }
    acc * d.step
}

/// `max_λ |char_function(d, λ) − Π(α, λ)|` over a symmetric `λ` grid.
pub fn ft_residual(d: &DensityGrid, alpha: &Alpha, lambda_max: f64, step: f64) -> f64 {
    symmetric_grid(lambda_max, step)
        .into_iter()
        .map(|l| (char_function(d, l) - pi_eval(alpha, l)).norm())
        .fold(0.0, f64::max)
}

/// Convergence of `Π(α⁽ⁿ⁾, ·)` to `Π(α, ·)` uniformly on `[−λ_max, λ_max]`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub sup_distances: Vec<f64>,
    /// Per-stratum parameter distances (`+∞` across strata, serialized as `null`).
    pub param_distances: Vec<f64>,
    pub tol: f64,
    /// First index from which every sup distance is `≤ tol`.
    pub first_index_within: Option<usize>,
    pub converged: bool,
}

pub fn weak_convergence_check(
    seq: &[Alpha],
    limit: &Alpha,
    lambda_max: f64,
    tol: f64,
) -> Result<ConvergenceReport> {
    if seq.is_empty() {
        return invalid("empty sequence");
    }
    let sup_distances = seq
        .iter()
        .map(|a| classb_sup_distance(a, limit, lambda_max, 0.01))
        .collect::<Result<Vec<_>>>()?;
    let param_distances = seq.iter().map(|a| param_distance(a, limit)).collect();
    let tail_start = sup_distances.iter().rposition(|d| *d > tol).map_or(0, |i| i + 1);
    let first_index_within = (tail_start < seq.len()).then_some(tail_start);
    Ok(ConvergenceReport {
        sup_distances,
        param_distances,
        tol,
        first_index_within,
        converged: first_index_within.is_some(),
    })
}
