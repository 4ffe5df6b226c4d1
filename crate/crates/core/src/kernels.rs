//! Finite Gram-matrix certificates for positive type, negative type and the
//! Schoenberg correspondence `ψ negative type ⇔ e^{−tψ} positive type ∀t`.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::group::{cartan_profile, CMatrix, CartanProfile, GroupElement};

/// Default eigenvalue/hermiticity tolerance.
pub const GRAM_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct GramReport {
    pub size: usize,
    pub hermiticity_defect: f64,
    pub extremal_eigenvalue: f64,
    /// Smallest eigenvalue that still passes.
    pub threshold: f64,
    pub passed: bool,
    /// Violating coefficient vector as `[re, im]` pairs, when failed.
    pub witness: Option<Vec<[f64; 2]>>,
}

/// Profiles of `g_j⁻¹ g_i` for every ordered pair, computed once so that
/// Gram matrices of many biinvariant functions share the decompositions.
#[derive(Clone, Debug)]
pub struct PairProfiles {
    size: usize,
    profiles: Vec<CartanProfile>,
}

impl PairProfiles {
    pub fn new(elements: &[GroupElement]) -> Result<Self> {
        check_elements(elements)?;
        let inverses = elements.iter().map(|g| g.inverse()).collect::<Result<Vec<_>>>()?;
        let size = elements.len();
        let profiles = (0..size * size)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / size, k % size);
                cartan_profile(&inverses[j].mul(&elements[i])?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairProfiles { size, profiles })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Profile of `g_j⁻¹ g_i`.
    pub fn get(&self, i: usize, j: usize) -> &CartanProfile {
        &self.profiles[i * self.size + j]
    }

    /// `K_ij = f(profile(g_j⁻¹ g_i))`.
    pub fn gram(&self, f: impl Fn(&CartanProfile) -> Complex64) -> CMatrix {
        CMatrix::from_fn(self.size, self.size, |i, j| f(self.get(i, j)))
    }
}

fn check_elements(elements: &[GroupElement]) -> Result<()> {
    let first = match elements.first() {
        Some(g) => g.dim(),
        None => return invalid("element list is empty"),
    };
    match elements.iter().find(|g| g.dim() != first) {
        Some(g) => Err(Error::DimensionMismatch { expected: first, found: g.dim() }),
        None => Ok(()),
    }
}

/// `K_ij = f(g_j⁻¹ g_i)` for an arbitrary function on the group.
pub fn gram_matrix(
    f: impl Fn(&GroupElement) -> Result<Complex64>,
    elements: &[GroupElement],
) -> Result<CMatrix> {
    check_elements(elements)?;
    let inverses = elements.iter().map(|g| g.inverse()).collect::<Result<Vec<_>>>()?;
    let n = elements.len();
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = f(&inverses[j].mul(&elements[i])?)?;
        }
    }
    Ok(k)
}

fn hermiticity_defect(k: &CMatrix) -> f64 {
    let n = k.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in i..n {
            d = d.max((k[(i, j)] - k[(j, i)].conj()).norm());
        }
    }
    d
}

fn hermitian_part(k: &CMatrix) -> CMatrix {
    (k + k.adjoint()) * Complex64::new(0.5, 0.0)
}

fn max_entry(k: &CMatrix) -> f64 {
    k.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Rotates the phase so the first component of maximal modulus is real
/// positive; makes witnesses reproducible.
fn canonical_witness(v: DVector<Complex64>) -> Vec<[f64; 2]> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v.iter().find(|z| z.norm() >= max * (1.0 - 1e-9)).copied().unwrap_or(Complex64::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
    v.iter()
        .map(|z| {
            let w = z * phase;
            [w.re + 0.0, w.im + 0.0]
        })
        .collect()
}

/// Minimal eigenpair of a Hermitian matrix.
fn min_eigen(h: CMatrix) -> (f64, DVector<Complex64>) {
    let eig = SymmetricEigen::new(h);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("nonempty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

fn report(k: &CMatrix, form: CMatrix, tol: f64) -> GramReport {
    let size = k.nrows();
    let defect = hermiticity_defect(k);
    let (min, vec) = min_eigen(form);
    let threshold = -tol * (1.0 + max_entry(k)) * size as f64;
    let passed = defect <= tol && min >= threshold;
    GramReport {
        size,
        hermiticity_defect: defect,
        extremal_eigenvalue: min,
        threshold,
        passed,
        witness: (!passed).then(|| canonical_witness(vec)),
    }
}

/// Positive-type certificate: Hermitian within `tol`, and the minimal
/// eigenvalue of the Hermitian part is `≥ −tol (1 + max|K_ij|) N`.
pub fn psd_check(k: &CMatrix, tol: f64) -> Result<GramReport> {
    if !k.is_square() || k.nrows() == 0 {
        return invalid("Gram matrix must be nonempty and square");
    }
    Ok(report(k, hermitian_part(k), tol))
}

/// Negative-type certificate on the coefficient vectors with `Σc_i = 0`:
/// `−P H P` must be positive semidefinite, `P = I − J/N`.
pub fn negtype_check(k: &CMatrix, tol: f64) -> Result<GramReport> {
    if !k.is_square() || k.nrows() == 0 {
        return invalid("Gram matrix must be nonempty and square");
    }
    let n = k.nrows();
    let proj = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64, 0.0)
    });
    let form = -(&proj * hermitian_part(k) * &proj);
    let mut r = report(k, form, tol);
    if let Some(w) = r.witness.take() {
        // keep the witness exactly in the sum-zero subspace
        let mean = w.iter().fold([0.0, 0.0], |m, c| [m[0] + c[0], m[1] + c[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        r.witness = Some(w.iter().map(|c| [c[0] - mean[0], c[1] - mean[1]]).collect());
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaledReport {
    pub t: f64,
    pub report: GramReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SchoenbergReport {
    pub psi_at_e: Complex64,
    /// `ψ(e)` real and nonnegative within the tolerance.
    pub psi_at_e_ok: bool,
    pub negtype: GramReport,
    pub exp_checks: Vec<ScaledReport>,
    /// `ψ(e) ≥ 0`, negative type, and every `e^{−tψ}` positive type.
    pub passed: bool,
}

/// Both sides of the Schoenberg correspondence from the Gram matrix of `ψ`
/// and its value at the identity.
pub fn schoenberg_check_gram(
    psi_gram: &CMatrix,
    psi_at_e: Complex64,
    t_list: &[f64],
    tol: f64,
) -> Result<SchoenbergReport> {
    if let Some(t) = t_list.iter().find(|t| !(**t > 0.0)) {
        return invalid(format!("t = {t} must be positive"));
    }
    let negtype = negtype_check(psi_gram, tol)?;
    let exp_checks = t_list
        .par_iter()
        .map(|&t| {
            let k = psi_gram.map(|z| (-t * z).exp());
            Ok(ScaledReport { t, report: psd_check(&k, tol)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let psi_at_e_ok = psi_at_e.re >= -tol && psi_at_e.im.abs() <= tol;
    let passed = psi_at_e_ok && negtype.passed && exp_checks.iter().all(|c| c.report.passed);
    Ok(SchoenbergReport { psi_at_e, psi_at_e_ok, negtype, exp_checks, passed })
}

pub fn schoenberg_check(
    psi: impl Fn(&GroupElement) -> Result<Complex64>,
    elements: &[GroupElement],
    t_list: &[f64],
    tol: f64,
) -> Result<SchoenbergReport> {
    let gram = gram_matrix(&psi, elements)?;
    let at_e = psi(&GroupElement::identity(elements[0].dim()))?;
    schoenberg_check_gram(&gram, at_e, t_list, tol)
}
