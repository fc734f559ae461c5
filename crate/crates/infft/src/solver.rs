//! Conjugate gradient for Hermitian positive semidefinite operators and the
//! small dense oracles (minimum-norm least squares, pseudoinverse) used for
//! weight baselines and verification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{domain_err, Error, Result};

/// Stopping rule for [`cg_solve`]. `maxit = None` means four times the
/// system dimension.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CgConfig {
    pub tol: f64,
    pub maxit: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            maxit: None,
        }
    }
}

impl CgConfig {
    pub fn new(tol: f64, maxit: Option<usize>) -> Result<Self> {
        if !(tol > 0.0) {
            return domain_err(format!("CG tolerance must be positive, got {tol}"));
        }
        if maxit == Some(0) {
            return domain_err("CG iteration cap must be at least 1");
        }
        Ok(Self { tol, maxit })
    }

    pub fn resolve_maxit(&self, dim: usize) -> usize {
        self.maxit.unwrap_or(4 * dim.max(1))
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<Complex64>,
    /// `‖b − H x‖₂ / ‖b‖₂`, recomputed with one extra operator application.
    pub rel_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Recursive residual norms, one entry per iteration.
    pub residual_history: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Plain conjugate gradient. The callback must realize a Hermitian positive
/// semidefinite operator; the iteration stops once the recursive residual
/// drops below `tol·‖b‖₂` or the cap is reached.
pub fn cg_solve<F>(apply: F, rhs: &[Complex64], cfg: &CgConfig) -> Result<CgOutcome>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let dim = rhs.len();
    let b_norm = norm(rhs);
    if !b_norm.is_finite() {
        return Err(Error::Breakdown("non-finite right-hand side".into()));
    }
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![Complex64::default(); dim],
            rel_residual: 0.0,
            iterations: 0,
            converged: true,
            residual_history: Vec::new(),
        });
    }

    let maxit = cfg.resolve_maxit(dim);
    let mut x = vec![Complex64::default(); dim];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r).re;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=maxit {
        let q = apply(&p);
        let pq = dot(&p, &q).re;
        if !pq.is_finite() {
            return Err(Error::Breakdown(format!(
                "non-finite curvature at iteration {it}"
            )));
        }
        if pq <= 0.0 {
            // Search direction fell into the (numerical) null space.
            break;
        }
        let alpha = rs / pq;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rs_new = dot(&r, &r).re;
        if !rs_new.is_finite() {
            return Err(Error::Breakdown(format!(
                "non-finite residual at iteration {it}"
            )));
        }
        iterations = it;
        history.push(rs_new.sqrt());
        if rs_new.sqrt() <= cfg.tol * b_norm {
            converged = true;
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..dim {
            p[i] = r[i] + beta * p[i];
        }
    }

    let hx = apply(&x);
    let true_res: f64 = rhs
        .iter()
        .zip(&hx)
        .map(|(b, y)| (b - y).norm_sqr())
        .sum::<f64>()
        .sqrt();

    Ok(CgOutcome {
        solution: x,
        rel_residual: true_res / b_norm,
        iterations,
        converged,
        residual_history: history,
    })
}

const SVD_TRUNCATION: f64 = 1e-12;
const PINV_GUARD: usize = 2048;

fn truncated_svd_apply(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = SVD_TRUNCATION * smax;
    let mut z = u.ad_mul(b);
    for (i, zi) in z.iter_mut().enumerate() {
        let s = svd.singular_values[i];
        *zi = if s > cutoff && s > 0.0 {
            *zi / Complex64::new(s, 0.0)
        } else {
            Complex64::default()
        };
    }
    Ok(v_t.ad_mul(&DMatrix::from_column_slice(z.len(), 1, z.as_slice()))
        .column(0)
        .into_owned())
}

/// Minimum-norm least squares solution of `A x = b` via SVD; singular values
/// below `1e-12·σ_max` are truncated.
pub fn dense_lstsq(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if a.nrows() != b.len() {
        return Err(Error::size_mismatch("matrix rows vs rhs length"));
    }
    truncated_svd_apply(a, b)
}

/// Moore–Penrose pseudoinverse of a small dense matrix.
pub fn dense_pinv(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if a.nrows() + a.ncols() > PINV_GUARD {
        return Err(Error::Capacity(format!(
            "pseudoinverse guard: rows + cols = {} exceeds {PINV_GUARD}",
            a.nrows() + a.ncols()
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = SVD_TRUNCATION * smax;
    let r = svd.singular_values.len();
    let mut sigma_inv = DMatrix::<Complex64>::zeros(r, r);
    for i in 0..r {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            sigma_inv[(i, i)] = Complex64::new(1.0 / s, 0.0);
        }
    }
    Ok(v_t.adjoint() * sigma_inv * u.adjoint())
}

/// Spectral condition number `σ_max/σ_min` of a dense matrix.
pub fn condition_number_2(a: &DMatrix<Complex64>) -> f64 {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn unif(rng: &mut ChaCha12Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| Complex64::new(unif(&mut rng), unif(&mut rng)))
    }

    fn hermitian_pd(n: usize, seed: u64) -> DMatrix<Complex64> {
        let b = random_matrix(n, n, seed);
        let mut h = b.adjoint() * &b;
        for i in 0..n {
            h[(i, i)] += Complex64::new(1.0, 0.0);
        }
        h
    }

    #[test]
    fn cg_identity_one_iteration() {
        let rhs: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let out = cg_solve(|v| v.to_vec(), &rhs, &CgConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        for (a, b) in out.solution.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn cg_zero_rhs() {
        let rhs = vec![Complex64::default(); 7];
        let out = cg_solve(|v| v.to_vec(), &rhs, &CgConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged && out.rel_residual == 0.0);
        assert!(out.solution.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn cg_matches_dense_solve() {
        let h = hermitian_pd(4, 11);
        let rhs: Vec<Complex64> = (0..4).map(|i| Complex64::new(1.0 + i as f64, 0.3)).collect();
        let out = cg_solve(
            |v| {
                let x = DVector::from_column_slice(v);
                (&h * x).as_slice().to_vec()
            },
            &rhs,
            &CgConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        let dense = h
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(&rhs))
            .unwrap();
        for (a, b) in out.solution.iter().zip(dense.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn cg_residuals_nonincreasing() {
        // Monotonicity up to a 10x roundoff slack on a well-conditioned system.
        let h = hermitian_pd(24, 3);
        let rhs: Vec<Complex64> = (0..24).map(|i| Complex64::new((i as f64).sin(), 0.1)).collect();
        let out = cg_solve(
            |v| {
                let x = DVector::from_column_slice(v);
                (&h * x).as_slice().to_vec()
            },
            &rhs,
            &CgConfig::default(),
        )
        .unwrap();
        for w in out.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-15 * 10.0) + 1e-15 * 10.0);
        }
    }

    #[test]
    fn cg_breakdown_on_nan() {
        let rhs = vec![Complex64::new(1.0, 0.0); 3];
        let res = cg_solve(
            |_| vec![Complex64::new(f64::NAN, 0.0); 3],
            &rhs,
            &CgConfig::default(),
        );
        assert!(matches!(res, Err(Error::Breakdown(_))));
    }

    #[test]
    fn lstsq_square_invertible() {
        let a = hermitian_pd(5, 21);
        let x_true = DVector::from_fn(5, |i, _| Complex64::new(i as f64 - 2.0, 1.0));
        let b = &a * &x_true;
        let x = dense_lstsq(&a, &b).unwrap();
        assert!((x - x_true).norm() < 1e-12 * 10.0);
    }

    #[test]
    fn lstsq_zero_column_minimum_norm() {
        let mut a = random_matrix(6, 3, 33);
        for i in 0..6 {
            a[(i, 1)] = Complex64::default();
        }
        let b = DVector::from_fn(6, |i, _| Complex64::new(1.0 + i as f64, 0.0));
        let x = dense_lstsq(&a, &b).unwrap();
        assert!(x[1].norm() < 1e-13);
    }

    #[test]
    fn lstsq_residual_orthogonal_to_range() {
        let a = random_matrix(8, 4, 55);
        let b = DVector::from_fn(8, |i, _| Complex64::new((i as f64).cos(), i as f64));
        let x = dense_lstsq(&a, &b).unwrap();
        let r = &b - &a * &x;
        let proj = a.ad_mul(&DMatrix::from_column_slice(8, 1, r.as_slice()));
        assert!(proj.norm() < 1e-10 * b.norm());
    }

    #[test]
    fn pinv_examples() {
        let eye = DMatrix::<Complex64>::identity(4, 4);
        assert!((dense_pinv(&eye).unwrap() - &eye).norm() < 1e-13);

        let diag = DMatrix::from_diagonal(&DVector::from_column_slice(&[
            Complex64::new(2.0, 0.0),
            Complex64::default(),
        ]));
        let p = dense_pinv(&diag).unwrap();
        assert!((p[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(p[(1, 1)].norm() == 0.0);

        let a = random_matrix(6, 4, 77);
        let p = dense_pinv(&a).unwrap();
        let prod = &p * &a;
        assert!((prod - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn pinv_penrose_identities() {
        for seed in [1u64, 2, 3] {
            let a = random_matrix(5, 3, seed);
            let p = dense_pinv(&a).unwrap();
            assert!((&a * &p * &a - &a).norm() < 1e-9);
            assert!((&p * &a * &p - &p).norm() < 1e-9);
            assert!(((&a * &p).adjoint() - &a * &p).norm() < 1e-9);
            assert!(((&p * &a).adjoint() - &p * &a).norm() < 1e-9);
        }
    }

    #[test]
    fn pinv_guard() {
        let a = DMatrix::<Complex64>::zeros(2000, 100);
        assert!(matches!(dense_pinv(&a), Err(Error::Capacity(_))));
    }
}
