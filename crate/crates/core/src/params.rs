//! The parameter space `ℛ = ⊔_{p≥0} ℛ_p` of sorted real tuples, Newton power
//! sums and the symmetric-function conversions used by parameter recovery.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default bound on the imaginary part of a companion-matrix eigenvalue that
/// is still accepted as a real root.
pub const ROOT_IMAG_TOL: f64 = 1e-6;

/// A point of `ℛ_p`: `p` reals sorted ascending. `p = 0` is the point `∅`.
///
/// Repeated entries are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Alpha(Vec<f64>);

impl Alpha {
    /// Canonicalizes `values` into `ℛ_p` (sorting ascending).
    pub fn new(values: impl Into<Vec<f64>>) -> Result<Self> {
        let mut values = values.into();
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("alpha entry {bad} is not finite"));
        }
        values.sort_by(f64::total_cmp);
        // -0.0 and 0.0 must compare equal under the derived PartialEq anyway,
        // but keep the stored form canonical for serialization.
        for v in values.iter_mut() {
            *v += 0.0;
        }
        Ok(Alpha(values))
    }

    /// The distinguished point `∅` of `ℛ₀`.
    pub fn empty() -> Self {
        Alpha(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Parses a comma-separated list, optionally in brackets; the empty
    /// string, `[]` and `∅` all denote `∅`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let text = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')).unwrap_or(text).trim();
        if text.is_empty() || text == "∅" {
            return Ok(Alpha::empty());
        }
        let values = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Validation(format!("bad alpha entry {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Alpha::new(values)
    }
}

impl TryFrom<Vec<f64>> for Alpha {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Alpha::new(values)
    }
}

impl From<Alpha> for Vec<f64> {
    fn from(a: Alpha) -> Self {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Canonicalizing constructor; see [`Alpha::new`].
pub fn make_alpha(values: &[f64]) -> Result<Alpha> {
    Alpha::new(values.to_vec())
}

/// Newton power sum `p_m(α) = Σ_k α_k^m` with the convention `p_{-1} = 0`.
pub fn power_sum(alpha: &Alpha, m: i32) -> Result<f64> {
    match m {
        m if m < -1 => invalid(format!("power sum order {m} < -1")),
        -1 => Ok(0.0),
        0 => Ok(alpha.len() as f64),
        m => Ok(alpha.values().iter().map(|a| a.powi(m)).sum()),
    }
}

/// `p̃_m(α) = p_{m+1}(α) + p_{m-1}(α)`, the coefficients of the
/// logarithmic-derivative series of `Π(α, ·)`.
pub fn shifted_power_sum(alpha: &Alpha, m: i32) -> Result<f64> {
    if m < 0 {
        return invalid(format!("shifted power sum order {m} < 0"));
    }
    Ok(power_sum(alpha, m + 1)? + power_sum(alpha, m - 1)?)
}

/// Per-stratum sup metric; points in different strata are at distance `+∞`.
pub fn param_distance(a: &Alpha, b: &Alpha) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Elementary symmetric values `e_1..e_p` from power sums `p_1..p_p` via
/// Newton's identities `k e_k = Σ_{i=1}^{k} (-1)^{i-1} e_{k-i} p_i`.
pub fn elementary_from_power_sums(ps: &[f64], p: usize) -> Result<Vec<f64>> {
    if ps.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: ps.len() });
    }
    // accumulated in double-double: the alternating sums cancel heavily
    let mut e = Vec::with_capacity(p + 1);
    e.push(Dd::from(1.0));
    for k in 1..=p {
        let mut acc = Dd::from(0.0);
        for i in 1..=k {
            let term = e[k - i].mul_f64(ps[i - 1]);
            acc = if i % 2 == 1 { acc.add(term) } else { acc.add(term.neg()) };
        }
        e.push(acc.div_f64(k as f64));
    }
    Ok(e[1..].iter().map(|v| v.hi + v.lo).collect())
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (hi, lo) = two_sum(s, e + self.lo + o.lo);
        Dd { hi, lo }
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let p = self.hi * b;
        let err = self.hi.mul_add(b, -p);
        let (hi, lo) = two_sum(p, err + self.lo * b);
        Dd { hi, lo }
    }

    fn div_f64(self, b: f64) -> Dd {
        let q = self.hi / b;
        let r = self.add(Dd::from(q).mul_f64(b).neg());
        let (hi, lo) = two_sum(q, (r.hi + r.lo) / b);
        Dd { hi, lo }
    }
}

/// Sorted real roots of `x^p − e₁x^{p−1} + e₂x^{p−2} − …` from the
/// companion-matrix eigenvalues.
pub fn roots_from_elementary(es: &[f64], root_imag_tol: f64) -> Result<Alpha> {
    let p = es.len();
    if p == 0 {
        return Ok(Alpha::empty());
    }
    if let Some(bad) = es.iter().find(|v| !v.is_finite()) {
        return invalid(format!("elementary value {bad} is not finite"));
    }
    // monic coefficients c_k of x^{p-k}: c_k = (-1)^k e_k
    let coeffs: Vec<f64> = es
        .iter()
        .enumerate()
        .map(|(i, e)| if (i + 1) % 2 == 0 { *e } else { -*e })
        .collect();
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (j, c) in coeffs.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    let eig = companion.complex_eigenvalues();
    let mut roots = Vec::with_capacity(p);
    for z in eig.iter() {
        if z.im.abs() > root_imag_tol {
            return Err(Error::NonRealSpectrum { imag: z.im.abs(), tol: root_imag_tol });
        }
        roots.push(polish_root(&coeffs, z.re));
    }
    Alpha::new(roots)
}

/// A few Newton steps on the monic polynomial; keeps the eigenvalue if a
/// step would not reduce the residual (e.g. at a multiple root).
fn polish_root(coeffs: &[f64], mut x: f64) -> f64 {
    // compensated Horner for the value, plain Horner for the derivative
    let eval = |x: f64| {
        let mut v = Dd::from(1.0);
        let mut d = 0.0;
        for c in coeffs {
            d = d * x + (v.hi + v.lo);
            v = v.mul_f64(x).add(Dd::from(*c));
        }
        (v.hi + v.lo, d)
    };
    for _ in 0..4 {
        let (v, d) = eval(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - v / d;
        if eval(next).0.abs() < v.abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}
