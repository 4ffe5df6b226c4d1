//! Finite-rank elements of `SL(∞)`, Haar sampling on `SU(n)`, Cartan
//! (log-singular-value) profiles and the spherical functions
//! `φ_α(g) = ∏_j Π(α, λ_j(g))`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classb::pi_eval;
use crate::error::{invalid, Error, Result};
use crate::params::Alpha;
use crate::seeds;

pub type CMatrix = DMatrix<Complex64>;

/// Accepted `|det g − 1|` for a [`GroupElement`] and `|Σλ_j|` for a profile.
pub const DET_TOL: f64 = 1e-8;

const MAX_REJECTIONS: usize = 100;

/// An element of `SL(n, ℂ)`, read as an element of `SL(∞)` padded with the
/// identity.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct GroupElementJson {
    n: usize,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl GroupElement {
    /// Wraps a square matrix with `|det − 1| ≤ 1e−8`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return invalid("group element must be a nonempty square matrix");
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("group element has non-finite entries");
        }
        let det = matrix.determinant();
        if (det - 1.0).norm() > DET_TOL {
            return invalid(format!("determinant {det} is not 1"));
        }
        Ok(GroupElement { matrix })
    }

    /// Products and inverses of unimodular matrices are unimodular up to
    /// rounding that grows with the condition number; skip the check.
    fn from_product(matrix: CMatrix) -> Self {
        GroupElement { matrix }
    }

    pub fn identity(n: usize) -> Self {
        GroupElement { matrix: CMatrix::identity(n, n) }
    }

    /// `diag(e^{λ_1}, …, e^{λ_n})` for a zero-sum profile.
    pub fn from_profile(lambdas: &[f64]) -> Result<Self> {
        if lambdas.is_empty() {
            return invalid("empty profile");
        }
        let sum: f64 = lambdas.iter().sum();
        if sum.abs() > DET_TOL {
            return invalid(format!("profile sums to {sum}, not 0"));
        }
        let diag = nalgebra::DVector::from_iterator(
            lambdas.len(),
            lambdas.iter().map(|l| Complex64::new(l.exp(), 0.0)),
        );
        Ok(GroupElement { matrix: CMatrix::from_diagonal(&diag) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn determinant(&self) -> Complex64 {
        self.matrix.determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        self.matrix.clone().try_inverse().map(Self::from_product).ok_or(Error::Singular)
    }

    pub fn mul(&self, other: &GroupElement) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self::from_product(&self.matrix * &other.matrix))
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.dim();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| [self.matrix[(i, j)].re, self.matrix[(i, j)].im])
            .collect();
        Ok(serde_json::to_string(&GroupElementJson { n, entries })?)
    }

    /// Accepts either `{"n": .., "entries": [[re, im], ..]}` or a bare JSON
    /// array read as a diagonal profile.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.is_array() {
            let lambdas: Vec<f64> = serde_json::from_value(value)?;
            return GroupElement::from_profile(&lambdas);
        }
        let raw: GroupElementJson = serde_json::from_value(value)?;
        if raw.entries.len() != raw.n * raw.n {
            return Err(Error::DimensionMismatch { expected: raw.n * raw.n, found: raw.entries.len() });
        }
        let m = CMatrix::from_row_iterator(
            raw.n,
            raw.n,
            raw.entries.iter().map(|[re, im]| Complex64::new(*re, *im)),
        );
        GroupElement::new(m)
    }
}

/// Log singular values sorted descending, summing to zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CartanProfile(Vec<f64>);

impl CartanProfile {
    pub fn lambdas(&self) -> &[f64] {
        &self.0
    }
}

fn complex_gaussian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Scales by the principal `det^{−1/n}`.
fn normalize_det(m: &mut CMatrix, det: Complex64) {
    let n = m.nrows() as f64;
    let c = (-det.ln() / n).exp();
    *m *= c;
}

/// Gaussian matrix rescaled to determinant one. Deterministic per seed.
pub fn random_sl(n: usize, seed: u64) -> Result<GroupElement> {
    if n < 2 {
        return invalid(format!("random_sl needs n >= 2, got {n}"));
    }
    let mut rng = seeds::rng(seed);
    for _ in 0..MAX_REJECTIONS {
        let mut m = complex_gaussian(n, &mut rng);
        let det = m.determinant();
        if det.norm() < 1e-12 {
            continue;
        }
        normalize_det(&mut m, det);
        return Ok(GroupElement { matrix: m });
    }
    Err(Error::Sampling(MAX_REJECTIONS))
}

/// Haar-distributed element of `SU(n)`: QR of a Gaussian matrix with the
/// phases of `diag R` moved into `Q`, then rescaled to determinant one.
pub fn random_su(n: usize, seed: u64) -> Result<GroupElement> {
    if n < 2 {
        return invalid(format!("random_su needs n >= 2, got {n}"));
    }
    let mut rng = seeds::rng(seed);
    for _ in 0..MAX_REJECTIONS {
        let z = complex_gaussian(n, &mut rng);
        let qr = z.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].norm() < 1e-12) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            let phase = r[(j, j)] / r[(j, j)].norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
        let det = q.determinant();
        normalize_det(&mut q, det);
        return Ok(GroupElement { matrix: q });
    }
    Err(Error::Sampling(MAX_REJECTIONS))
}

/// `count` independent [`random_sl`] draws with seeds derived from `seed`.
pub fn random_sl_family(n: usize, count: usize, seed: u64) -> Result<Vec<GroupElement>> {
    (0..count).map(|i| random_sl(n, seeds::derive(seed, &[i as u64]))).collect()
}

/// `λ_j = log σ_j`, descending, with the rounding residual of `Σλ_j`
/// removed. The residual guard widens with the condition number, since the
/// smallest singular values carry absolute error `~ ε σ_max`.
pub fn cartan_profile(g: &GroupElement) -> Result<CartanProfile> {
    let n = g.dim();
    let mut sigma: Vec<f64> = g.matrix.clone().svd(false, false).singular_values.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let (max, min) = (sigma[0], sigma[n - 1]);
    if !(min > 0.0) || !(max / min).is_finite() {
        return Err(Error::Singular);
    }
    let mut lambdas: Vec<f64> = sigma.iter().map(|s| s.ln()).collect();
    let residual: f64 = lambdas.iter().sum();
    let guard = DET_TOL + n as f64 * f64::EPSILON * (max / min);
    if residual.abs() > guard {
        return invalid(format!("log singular values sum to {residual:e}; element is not unimodular"));
    }
    let shift = residual / n as f64;
    for l in lambdas.iter_mut() {
        *l -= shift;
    }
    Ok(CartanProfile(lambdas))
}

/// `g ⊕ I_{N−n}`.
pub fn embed(g: &GroupElement, big_n: usize) -> Result<GroupElement> {
    let n = g.dim();
    if big_n < n {
        return invalid(format!("cannot embed dimension {n} into {big_n}"));
    }
    let mut m = CMatrix::identity(big_n, big_n);
    m.view_mut((0, 0), (n, n)).copy_from(&g.matrix);
    Ok(GroupElement { matrix: m })
}

/// `φ_α` on a profile: `∏_j Π(α, λ_j)`.
pub fn spherical_eval_profile(alpha: &Alpha, profile: &CartanProfile) -> Complex64 {
    profile.0.iter().map(|&l| pi_eval(alpha, l)).product()
}

pub fn spherical_eval(alpha: &Alpha, g: &GroupElement) -> Result<Complex64> {
    Ok(spherical_eval_profile(alpha, &cartan_profile(g)?))
}

/// One row of the spherical functional-equation test.
#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub n: usize,
    pub estimate: Complex64,
    pub target: Complex64,
    pub abs_err: f64,
    pub mc_stderr: f64,
}

/// Monte Carlo check of `lim_n ∫_{SU(n)} φ_α(x k y) dk = φ_α(x) φ_α(y)`.
///
/// Draw `i` at rank `n` uses the seed derived from `(seed, n, i)`, so the
/// result does not depend on the thread schedule.
pub fn spherical_limit_test(
    alpha: &Alpha,
    x: &GroupElement,
    y: &GroupElement,
    n_list: &[usize],
    mc: usize,
    seed: u64,
) -> Result<Vec<LimitRow>> {
    if mc < 2 {
        return invalid("mc must be at least 2");
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("n_list must be strictly ascending");
    }
    let target = spherical_eval(alpha, x)? * spherical_eval(alpha, y)?;
    n_list
        .iter()
        .map(|&n| {
            let (xe, ye) = (embed(x, n)?, embed(y, n)?);
            let draws = (0..mc)
                .into_par_iter()
                .map(|i| {
                    let k = random_su(n, seeds::derive(seed, &[n as u64, i as u64]))?;
                    let xky = xe.mul(&k)?.mul(&ye)?;
                    spherical_eval(alpha, &xky)
                })
                .collect::<Result<Vec<_>>>()?;
            let mean = draws.iter().sum::<Complex64>() / mc as f64;
            let var = draws.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (mc - 1) as f64;
            Ok(LimitRow {
                n,
                estimate: mean,
                target,
                abs_err: (mean - target).norm(),
                mc_stderr: (var / mc as f64).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn a(v: &[f64]) -> Alpha {
        Alpha::new(v.to_vec()).unwrap()
    }

    fn g0() -> GroupElement {
        GroupElement::from_profile(&[1.0, -1.0]).unwrap()
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn random_sl_is_deterministic_and_unimodular() {
        assert_eq!(random_sl(4, 42).unwrap(), random_sl(4, 42).unwrap());
        assert_ne!(random_sl(4, 42).unwrap(), random_sl(4, 43).unwrap());
        for s in 0..100 {
            let g = random_sl(6, s).unwrap();
            assert!((g.determinant() - 1.0).norm() <= 1e-10);
        }
        assert!(random_sl(1, 0).is_err());
    }

    #[test]
    fn random_su_is_special_unitary() {
        for s in 0..50 {
            let u = random_su(5, s).unwrap();
            let gram = u.matrix().adjoint() * u.matrix();
            assert!(max_abs(&(gram - CMatrix::identity(5, 5))) <= 1e-10);
            assert!((u.determinant() - 1.0).norm() <= 1e-10);
        }
        assert!(random_su(1, 0).is_err());
    }

    #[test]
    fn haar_second_moment_of_trace() {
        // Schur orthogonality: E|tr U|^2 = 1 for the defining representation
        let draws = 10_000;
        let m: f64 = (0..draws)
            .map(|s| random_su(4, seeds::derive(99, &[s])).unwrap().matrix().trace().norm_sqr())
            .sum::<f64>()
            / draws as f64;
        assert!((m - 1.0).abs() <= 0.1, "E|tr U|^2 = {m}");
    }

    #[test]
    fn cartan_profile_examples() {
        let p = cartan_profile(&GroupElement::identity(3)).unwrap();
        assert!(p.lambdas().iter().all(|l| l.abs() < 1e-15));
        let p = cartan_profile(&g0()).unwrap();
        assert_abs_diff_eq!(p.lambdas()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.lambdas()[1], -1.0, epsilon = 1e-14);
        for s in 0..20 {
            let g = random_sl(5, s).unwrap();
            let p = cartan_profile(&g).unwrap();
            assert!(p.lambdas().windows(2).all(|w| w[0] >= w[1]));
            assert!(p.lambdas().iter().sum::<f64>().abs() <= 1e-12);
            let q = cartan_profile(&g.inverse().unwrap()).unwrap();
            for (x, y) in p.lambdas().iter().zip(q.lambdas().iter().rev()) {
                assert_abs_diff_eq!(*x, -*y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cartan_profile_rejects_non_unimodular() {
        let m = CMatrix::from_diagonal_element(2, 2, Complex64::new(2.0, 0.0));
        assert!(cartan_profile(&GroupElement::from_product(m)).is_err());
        assert!(GroupElement::new(CMatrix::identity(2, 2) * Complex64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn embed_pads_with_identity() {
        assert_eq!(embed(&GroupElement::identity(2), 5).unwrap(), GroupElement::identity(5));
        let g = random_sl(3, 8).unwrap();
        let e = embed(&g, 7).unwrap();
        assert_eq!(cartan_profile(&e).unwrap().lambdas().len(), 7);
        for alpha in [a(&[0.0]), a(&[-1.0, 2.0])] {
            let d = spherical_eval(&alpha, &e).unwrap() - spherical_eval(&alpha, &g).unwrap();
            assert!(d.norm() <= 1e-12);
        }
        assert!(embed(&g, 2).is_err());
    }

    #[test]
    fn spherical_eval_examples() {
        for alpha in [Alpha::empty(), a(&[0.0]), a(&[1.0, 3.0])] {
            let v = spherical_eval(&alpha, &GroupElement::identity(4)).unwrap();
            assert!((v - 1.0).norm() < 1e-15);
        }
        let v = spherical_eval(&a(&[0.0]), &g0()).unwrap();
        assert_abs_diff_eq!(v.re, 1f64.cosh().powi(-2), epsilon = 1e-14);
        assert_abs_diff_eq!(v.re, 0.4199743, epsilon = 5e-8);
        let v = spherical_eval(&a(&[1.0]), &g0()).unwrap();
        assert_abs_diff_eq!(v.re, 1.0 / 2f64.cosh(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.re, 0.2658022, epsilon = 5e-8);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn biinvariance_and_hermitian_symmetry() {
        for s in 0..30 {
            let g = random_sl(6, s).unwrap();
            let u = random_su(6, 1000 + s).unwrap();
            let v = random_su(6, 2000 + s).unwrap();
            let ugv = u.mul(&g).unwrap().mul(&v).unwrap();
            let ginv = g.inverse().unwrap();
            for alpha in [a(&[0.0]), a(&[-1.0, 2.0]), a(&[0.5, 0.5, 3.0])] {
                let f = spherical_eval(&alpha, &g).unwrap();
                assert!((spherical_eval(&alpha, &ugv).unwrap() - f).norm() <= 1e-10);
                assert!((spherical_eval(&alpha, &ginv).unwrap() - f.conj()).norm() <= 1e-10);
                assert!(f.norm() <= 1.0);
            }
        }
    }

    #[test]
    fn multiplicative_on_zero_sum_blocks() {
        let (l, m) = ([0.7, -0.2, -0.5], [1.5, -1.5]);
        let joint: Vec<f64> = l.iter().chain(m.iter()).copied().collect();
        for alpha in [a(&[0.0]), a(&[-2.0, 0.3])] {
            let whole = spherical_eval(&alpha, &GroupElement::from_profile(&joint).unwrap()).unwrap();
            let parts = spherical_eval(&alpha, &GroupElement::from_profile(&l).unwrap()).unwrap()
                * spherical_eval(&alpha, &GroupElement::from_profile(&m).unwrap()).unwrap();
            assert!((whole - parts).norm() <= 1e-12);
        }
    }

    #[test]
    fn spherical_functions_decay_along_diverging_parameters() {
        let g = g0();
        let by_order: Vec<f64> = (1..=40)
            .map(|p| spherical_eval(&Alpha::new(vec![0.0; p]).unwrap(), &g).unwrap().norm())
            .collect();
        assert!(by_order.windows(2).all(|w| w[1] < w[0]));
        assert!(by_order[39] < 1e-10);
        let by_norm: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|x| spherical_eval(&a(&[*x]), &g).unwrap().norm())
            .collect();
        assert!(by_norm.windows(2).all(|w| w[1] < w[0]));
        assert!(by_norm[3] < 1e-5);
    }

    #[test]
    fn group_element_json_roundtrip() {
        let g = random_sl(3, 4).unwrap();
        let back = GroupElement::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        let d = GroupElement::from_json("[1, -1, 0]").unwrap();
        assert_eq!(d.dim(), 3);
        assert!(GroupElement::from_json(r#"{"n": 2, "entries": [[1,0]]}"#).is_err());
        assert!(GroupElement::from_json("[1, 1]").is_err());
    }

    #[test]
    fn spherical_limit_trivial_cases() {
        let id = GroupElement::identity(2);
        let rows = spherical_limit_test(&a(&[0.0]), &id, &id, &[2, 4], 100, 1).unwrap();
        for r in rows {
            assert!(r.abs_err < 1e-12 && r.mc_stderr < 1e-12);
        }
        let rows = spherical_limit_test(&Alpha::empty(), &g0(), &g0(), &[4, 8], 100, 1).unwrap();
        for r in rows {
            assert_eq!(r.estimate, Complex64::new(1.0, 0.0));
            assert_eq!(r.abs_err, 0.0);
        }
        assert!(spherical_limit_test(&Alpha::empty(), &g0(), &g0(), &[8, 4], 100, 1).is_err());
    }
}
