//! Inverse NFFT by spreading-matrix optimization: every column of the sparse
//! matrix `B` is replaced by the least-squares solution of a small system
//! with closed-form Dirichlet-kernel Gram entries, so that the modified
//! adjoint transform `D* F* B_opt* f` acts as a left inverse of `A`. The same
//! optimized matrix also yields an inverse adjoint transform `B_opt F D h`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::io::{Read, Write};

use crate::dft::CubeFft;
use crate::domain::{CoefficientVector, FrequencyBox, SampleVector, SamplingSet};
use crate::solver::dense_lstsq;
use crate::transform::{cube_bins_for, deconvolve_for, ndft_adjoint, NfftPlan};
use crate::window::{dirichlet_factor, WindowKind, WindowSpec};
use crate::{domain_err, Error, Result};

/// Entry budget guard for [`frobenius_deviation`].
const FROBENIUS_GUARD: usize = 4_000_000;

/// Column-sparse optimized spreading matrix with per-column residuals.
#[derive(Debug, Clone)]
pub struct OptimizedSpreader {
    freq_box: FrequencyBox,
    window: WindowSpec,
    n_points: usize,
    /// One entry per `ℓ ∈ I_Mσ` in linearization order; empty columns stay
    /// empty (grid regions without nearby sampling points).
    columns: Vec<SpreaderColumn>,
    /// Squared per-column least-squares residuals `ε_ℓ`.
    pub residuals: Vec<f64>,
    /// Euclidean norm of the discarded imaginary part per column; nonzero
    /// values flag point sets whose normal equations are not
    /// conjugate-symmetric.
    pub imag_norms: Vec<f64>,
    /// Columns solved by truncated least squares instead of the Hermitian
    /// factorization.
    pub fallback_columns: usize,
    deconvolve: Vec<f64>,
    bins_m: Vec<usize>,
    /// Cube bin of each column's grid index.
    bins_cols: Vec<usize>,
    fft: CubeFft,
}

#[derive(Debug, Clone, Default)]
struct SpreaderColumn {
    rows: Vec<u32>,
    values: Vec<f64>,
}

/// Row indices `j` with `Mσ⊙x_j − ℓ` within `[−m, m]^d` modulo `Mσ`,
/// ascending.
pub fn column_index_set(
    sampling: &SamplingSet,
    msigma: usize,
    m: usize,
    ell: &[i64],
) -> Vec<usize> {
    let half = msigma as i64 / 2;
    debug_assert!(ell.iter().all(|&l| l >= -half && l < half));
    let ms = msigma as f64;
    (0..sampling.len())
        .filter(|&j| {
            sampling
                .point(j)
                .iter()
                .zip(ell)
                .all(|(&x, &l)| {
                    let rem = (ms * x - l as f64).rem_euclid(ms);
                    rem.min(ms - rem) <= m as f64
                })
        })
        .collect()
}

/// Dense Hermitian Gram matrix `H_ℓ* H_ℓ` for a row subset, via the
/// closed-form Dirichlet-kernel entries.
pub fn gram_matrix(
    sampling: &SamplingSet,
    bandwidth: usize,
    rows: &[usize],
) -> DMatrix<Complex64> {
    let n = rows.len();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        g[(a, a)] = Complex64::new((bandwidth as f64).powi(sampling.dim() as i32), 0.0);
        for b in (a + 1)..n {
            let xa = sampling.point(rows[a]);
            let xb = sampling.point(rows[b]);
            let v: Complex64 = xa
                .iter()
                .zip(xb)
                .map(|(&p, &q)| dirichlet_factor(bandwidth, p - q))
                .product();
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    g
}

/// One axis factor of the right-hand side `Σ_k ŵ(k) e^{2πik u}`: closed form
/// for the Dirichlet window, direct summation for the B-spline.
fn rhs_axis(window: &WindowSpec, u: f64) -> Complex64 {
    match window.kind() {
        WindowKind::Dirichlet => dirichlet_factor(window.bandwidth(), u),
        WindowKind::BSpline => {
            let half = window.bandwidth() as i64 / 2;
            (-half..half)
                .map(|k| {
                    Complex64::from_polar(window.hat_axis(k), TAU * k as f64 * u)
                })
                .sum()
        }
    }
}

/// Right-hand side `v_ℓ` of the per-column normal equations:
/// `v_{ℓ,j} = Σ_{k∈I_M} ŵ(k) e^{2πik(x_j − ℓ/Mσ)}`.
pub fn right_hand_side(
    sampling: &SamplingSet,
    window: &WindowSpec,
    ell: &[i64],
    rows: &[usize],
) -> DVector<Complex64> {
    let ms = window.oversampled() as f64;
    DVector::from_fn(rows.len(), |i, _| {
        sampling
            .point(rows[i])
            .iter()
            .zip(ell)
            .map(|(&x, &l)| rhs_axis(window, x - l as f64 / ms))
            .product()
    })
}

struct ColumnSolution {
    values: Vec<f64>,
    residual: f64,
    imag_norm: f64,
    fallback: bool,
}

/// Target column of `(1/|I_Mσ|) D^{-1} F*`: entries `ŵ(k) e^{−2πik·ℓ/Mσ}`.
fn target_column(freq_box: FrequencyBox, window: &WindowSpec, ell: &[i64]) -> DVector<Complex64> {
    let ms = window.oversampled() as f64;
    DVector::from_fn(freq_box.len(), |idx, _| {
        let k = freq_box.delinearize(idx);
        let hat: f64 = k.iter().map(|&kt| window.hat_axis(kt)).product();
        let phase: f64 = k
            .iter()
            .zip(ell)
            .map(|(&kt, &lt)| kt as f64 * lt as f64 / ms)
            .sum();
        Complex64::from_polar(hat, -TAU * phase)
    })
}

/// The `|I_M| × rows` submatrix of `A*` for a column's row set.
fn adjoint_submatrix(
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
    rows: &[usize],
) -> DMatrix<Complex64> {
    DMatrix::from_fn(freq_box.len(), rows.len(), |idx, i| {
        let k = freq_box.delinearize(idx);
        let phase: f64 = k
            .iter()
            .zip(sampling.point(rows[i]))
            .map(|(&kt, &xt)| kt as f64 * xt)
            .sum();
        Complex64::from_polar(1.0, -TAU * phase)
    })
}

/// Minimum-norm least squares for a wide column (`rows > |I_M|`): the fit
/// can be made through the small cross matrix, `b = H*(H H*)† r`, with
/// eigenvalues below `1e-12·λ_max` truncated.
fn wide_min_norm(
    h: &DMatrix<Complex64>,
    target: &DVector<Complex64>,
) -> (DVector<Complex64>, f64) {
    let hh = h * h.adjoint();
    let eig = hh.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-12 * lmax;
    let mut z = eig.eigenvectors.ad_mul(&DMatrix::from_column_slice(
        target.len(),
        1,
        target.as_slice(),
    ));
    for (i, zi) in z.iter_mut().enumerate() {
        let l = eig.eigenvalues[i];
        *zi = if l > cut {
            *zi / Complex64::new(l, 0.0)
        } else {
            Complex64::default()
        };
    }
    let zvec = &eig.eigenvectors * z.column(0);
    let b = h.ad_mul(&DMatrix::from_column_slice(zvec.len(), 1, zvec.as_slice()));
    let b = b.column(0).into_owned();
    // Residual with the stored real part.
    let br = b.map(|c| Complex64::new(c.re, 0.0));
    let res = (h * &br - target).norm_squared();
    (b, res)
}

fn solve_column(
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
    window: &WindowSpec,
    ridge: f64,
    ell: &[i64],
    rows: &[usize],
    target_norm_sq: f64,
) -> ColumnSolution {
    let card = freq_box.len() as f64;

    // Wide subproblems (more nearby points than frequencies) have singular
    // normal equations; solve them in minimum-norm form through the small
    // cross matrix instead.
    if rows.len() > freq_box.len() {
        let h = adjoint_submatrix(sampling, freq_box, rows);
        let target = target_column(freq_box, window, ell);
        let (b, residual) = wide_min_norm(&h, &target);
        let imag: f64 = b.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
        return ColumnSolution {
            values: b.iter().map(|c| c.re).collect(),
            residual,
            imag_norm: imag,
            fallback: true,
        };
    }

    let v = right_hand_side(sampling, window, ell, rows);
    let g = gram_matrix(sampling, freq_box.bandwidth(), rows);
    let mut solution: Option<DVector<Complex64>> = None;
    let mut fallback = true;
    let mut factorized = None;
    for delta in [ridge * card, 1e-12 * card] {
        let mut ridged = g.clone();
        for i in 0..rows.len() {
            ridged[(i, i)] += Complex64::new(delta, 0.0);
        }
        if let Some(chol) = Cholesky::new(ridged) {
            factorized = Some(chol.solve(&v));
            break;
        }
        if ridge != 0.0 {
            break;
        }
    }
    if let Some(b) = factorized {
        // Reject factorizations that squeaked past singularity: a large
        // residual signals lost accuracy, a huge solution norm an
        // ill-conditioned system whose unique solve differs badly from the
        // truncated minimum-norm one.
        let res = (&g * &b - &v).norm();
        let scale = v.norm() + g.norm() * b.norm();
        let conditioning = g.norm() * b.norm() / v.norm().max(f64::MIN_POSITIVE);
        if res <= 1e-7 * scale && conditioning <= 1e6 && b.iter().all(|c| c.is_finite()) {
            solution = Some(b);
            fallback = false;
        }
    }
    // Truncated-SVD least squares on the Gram system: same minimum-norm
    // solution (null(G) = null(H)), kept small by rows ≤ |I_M|.
    let b = solution.unwrap_or_else(|| dense_lstsq(&g, &v).expect("square system"));

    let br = b.map(|c| Complex64::new(c.re, 0.0));
    let quad = (br.adjoint() * (&g * &br))[(0, 0)].re;
    let cross = 2.0 * br.dotc(&v).re;
    let residual = (quad - cross + target_norm_sq).max(0.0);
    let imag: f64 = b.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    ColumnSolution {
        values: b.iter().map(|c| c.re).collect(),
        residual,
        imag_norm: imag,
        fallback,
    }
}

/// Optimizes every column of the spreading matrix for the given window
/// (Dirichlet minimizes the resulting error constant). `ridge` scales an
/// optional Tikhonov term `ridge·M^d·I`; with `ridge = 0` a failed
/// factorization retries once at `1e-12·M^d` before falling back to least
/// squares.
pub fn optimize_spreader(
    sampling: &SamplingSet,
    window: &WindowSpec,
    ridge: f64,
) -> Result<OptimizedSpreader> {
    if !(ridge >= 0.0) {
        return domain_err(format!("ridge must be nonnegative, got {ridge}"));
    }
    let d = sampling.dim();
    let freq_box = FrequencyBox::new(d, window.bandwidth())?;
    let ms = window.oversampled();
    let m = window.truncation();
    let grid_box = FrequencyBox::new(d, ms)?;
    let n_cols = grid_box.len();

    // Row sets per column, assembled from each point's support.
    let mut rows_per_col: Vec<Vec<u32>> = vec![Vec::new(); n_cols];
    for j in 0..sampling.len() {
        let mut axes: Vec<Vec<usize>> = Vec::with_capacity(d);
        for &x in sampling.point(j) {
            let c = ms as f64 * x;
            let lo = (c - m as f64).ceil() as i64;
            let hi = (c + m as f64).floor() as i64;
            axes.push(
                (lo..=hi)
                    .map(|cand| (cand.rem_euclid(ms as i64) as usize + ms / 2) % ms)
                    .collect(),
            );
        }
        visit_product(&axes, &mut |digits| {
            let lin = digits.iter().fold(0usize, |acc, &dg| acc * ms + dg);
            rows_per_col[lin].push(j as u32);
        });
    }

    let target_norm_sq: f64 = freq_box
        .indices()
        .map(|k| {
            let hat: f64 = k.iter().map(|&kt| window.hat_axis(kt)).product();
            hat * hat
        })
        .sum();

    let solutions: Vec<(SpreaderColumn, f64, f64, bool)> = (0..n_cols)
        .into_par_iter()
        .map(|lin| {
            let rows_u32 = &rows_per_col[lin];
            if rows_u32.is_empty() {
                return (SpreaderColumn::default(), target_norm_sq, 0.0, false);
            }
            let ell = grid_box.delinearize(lin);
            let rows: Vec<usize> = rows_u32.iter().map(|&r| r as usize).collect();
            let sol = solve_column(
                sampling,
                freq_box,
                window,
                ridge,
                &ell,
                &rows,
                target_norm_sq,
            );
            (
                SpreaderColumn {
                    rows: rows_u32.clone(),
                    values: sol.values,
                },
                sol.residual,
                sol.imag_norm,
                sol.fallback,
            )
        })
        .collect();

    let mut columns = Vec::with_capacity(n_cols);
    let mut residuals = Vec::with_capacity(n_cols);
    let mut imag_norms = Vec::with_capacity(n_cols);
    let mut fallback_columns = 0;
    for (col, res, im, fb) in solutions {
        columns.push(col);
        residuals.push(res);
        imag_norms.push(im);
        fallback_columns += fb as usize;
    }

    Ok(OptimizedSpreader {
        freq_box,
        window: *window,
        n_points: sampling.len(),
        columns,
        residuals,
        imag_norms,
        fallback_columns,
        deconvolve: deconvolve_for(freq_box, window),
        bins_m: cube_bins_for(freq_box, ms),
        bins_cols: cube_bins_for(grid_box, ms),
        fft: CubeFft::new(d, ms),
    })
}

fn visit_product(axes: &[Vec<usize>], f: &mut impl FnMut(&[usize])) {
    let mut digits = vec![0usize; axes.len()];
    visit_product_rec(axes, 0, &mut digits, f);
}

fn visit_product_rec(
    axes: &[Vec<usize>],
    t: usize,
    digits: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if t == axes.len() {
        f(digits);
        return;
    }
    for &dg in &axes[t] {
        digits[t] = dg;
        visit_product_rec(axes, t + 1, digits, f);
    }
}

impl OptimizedSpreader {
    pub fn freq_box(&self) -> FrequencyBox {
        self.freq_box
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Largest residual `ε = max_ℓ ε_ℓ` (the constant in the error bound).
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// `Σ_{k∈I_M} ŵ(k)^{-2}`, the window-dependent factor of the error bound.
    pub fn inverse_hat_norm_sq(&self) -> f64 {
        self.freq_box
            .indices()
            .map(|k| {
                let hat: f64 = k.iter().map(|&kt| self.window.hat_axis(kt)).product();
                1.0 / (hat * hat)
            })
            .sum()
    }

    pub fn column_rows(&self, lin: usize) -> &[u32] {
        &self.columns[lin].rows
    }

    pub fn column_values(&self, lin: usize) -> &[f64] {
        &self.columns[lin].values
    }

    /// Modified adjoint transform `h_opt = D* F* B_opt* f`.
    pub fn infft_opt(&self, samples: &SampleVector) -> Result<CoefficientVector> {
        if samples.len() != self.n_points {
            return Err(Error::size_mismatch("samples vs spreader point count"));
        }
        let mut cube = vec![Complex64::default(); self.fft.len()];
        for (lin, col) in self.columns.iter().enumerate() {
            let mut acc = Complex64::default();
            for (&r, &v) in col.rows.iter().zip(&col.values) {
                acc += samples.values[r as usize] * v;
            }
            cube[self.bins_cols[lin]] = acc;
        }
        self.fft.forward(&mut cube);
        let values = self
            .bins_m
            .iter()
            .zip(&self.deconvolve)
            .map(|(&bin, &dk)| cube[bin] * dk)
            .collect();
        CoefficientVector::new(self.freq_box, values)
    }

    /// Inverse adjoint transform `f ≈ B_opt F D h`: recovers samples from
    /// adjoint data `h = A* f`.
    pub fn inverse_adjoint_nfft(&self, coeffs: &CoefficientVector) -> Result<SampleVector> {
        if coeffs.freq_box != self.freq_box {
            return Err(Error::size_mismatch("coefficients vs spreader box"));
        }
        let mut cube = vec![Complex64::default(); self.fft.len()];
        for (idx, &bin) in self.bins_m.iter().enumerate() {
            cube[bin] = coeffs.values[idx] * self.deconvolve[idx];
        }
        self.fft.inverse(&mut cube);
        let mut out = vec![Complex64::default(); self.n_points];
        for (lin, col) in self.columns.iter().enumerate() {
            let g = cube[self.bins_cols[lin]];
            for (&r, &v) in col.rows.iter().zip(&col.values) {
                out[r as usize] += g * v;
            }
        }
        Ok(SampleVector::new(out))
    }
}

/// Anything that applies the factorized forward map `B F D` to coefficients:
/// the plain NFFT plan or an optimized spreader.
pub trait SpreadingOperator {
    fn bfd_forward(&self, coeffs: &CoefficientVector) -> Result<SampleVector>;
    fn operator_points(&self) -> usize;
    fn operator_box(&self) -> FrequencyBox;
}

impl SpreadingOperator for NfftPlan {
    fn bfd_forward(&self, coeffs: &CoefficientVector) -> Result<SampleVector> {
        self.forward(coeffs)
    }

    fn operator_points(&self) -> usize {
        self.n_points()
    }

    fn operator_box(&self) -> FrequencyBox {
        self.freq_box()
    }
}

impl SpreadingOperator for OptimizedSpreader {
    fn bfd_forward(&self, coeffs: &CoefficientVector) -> Result<SampleVector> {
        self.inverse_adjoint_nfft(coeffs)
    }

    fn operator_points(&self) -> usize {
        self.n_points
    }

    fn operator_box(&self) -> FrequencyBox {
        self.freq_box
    }
}

/// `‖A*·(B F D) − I‖_F`, materialized column by column through exact adjoint
/// NDFT applications.
pub fn frobenius_deviation(
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
    op: &(impl SpreadingOperator + Sync),
) -> Result<f64> {
    if op.operator_box() != freq_box || op.operator_points() != sampling.len() {
        return Err(Error::size_mismatch("operator vs sampling/box"));
    }
    let entries = sampling.len() * freq_box.len();
    if entries > FROBENIUS_GUARD {
        return Err(Error::Capacity(format!(
            "frobenius guard: N·|I_M| = {entries} exceeds {FROBENIUS_GUARD}"
        )));
    }
    let total: f64 = (0..freq_box.len())
        .into_par_iter()
        .map(|idx| {
            let mut e = CoefficientVector::zeros(freq_box);
            e.values[idx] = Complex64::new(1.0, 0.0);
            let col = op.bfd_forward(&e).expect("sizes validated");
            let mut y = ndft_adjoint(&col, sampling, freq_box).expect("sizes validated");
            y.values[idx] -= Complex64::new(1.0, 0.0);
            y.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
        })
        .sum();
    Ok(total.sqrt())
}

const FORMAT_BSPLINE: u32 = 0;
const FORMAT_DIRICHLET: u32 = 1;

/// Serializes the spreader: little-endian header `(d, M, Mσ, m, N, window
/// kind)` as u32, then per column in linearization order a u32 entry count,
/// the row indices as u32 and the values as f64.
pub fn save_spreader<W: Write>(spreader: &OptimizedSpreader, out: &mut W) -> Result<()> {
    let kind = match spreader.window.kind() {
        WindowKind::BSpline => FORMAT_BSPLINE,
        WindowKind::Dirichlet => FORMAT_DIRICHLET,
    };
    let header = [
        spreader.freq_box.dim() as u32,
        spreader.freq_box.bandwidth() as u32,
        spreader.window.oversampled() as u32,
        spreader.window.truncation() as u32,
        spreader.n_points as u32,
        kind,
    ];
    for v in header {
        out.write_all(&v.to_le_bytes())?;
    }
    for col in &spreader.columns {
        out.write_all(&(col.rows.len() as u32).to_le_bytes())?;
        for &r in &col.rows {
            out.write_all(&r.to_le_bytes())?;
        }
        for &v in &col.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Loads and validates a spreader written by [`save_spreader`]. Residual
/// diagnostics are not part of the container and come back empty.
pub fn load_spreader<R: Read>(input: &mut R) -> Result<OptimizedSpreader> {
    let d = read_u32(input)? as usize;
    let bandwidth = read_u32(input)? as usize;
    let msigma = read_u32(input)? as usize;
    let m = read_u32(input)? as usize;
    let n_points = read_u32(input)? as usize;
    let kind = match read_u32(input)? {
        FORMAT_BSPLINE => WindowKind::BSpline,
        FORMAT_DIRICHLET => WindowKind::Dirichlet,
        other => return domain_err(format!("unknown window kind tag {other}")),
    };
    let freq_box = FrequencyBox::new(d, bandwidth)?;
    if msigma < bandwidth || msigma % 2 != 0 {
        return domain_err(format!("invalid oversampled size {msigma}"));
    }
    let sigma = msigma as f64 / bandwidth as f64;
    let window = WindowSpec::new(kind, m, sigma, bandwidth)?;
    if window.oversampled() != msigma {
        return domain_err("stored oversampled size is inconsistent");
    }
    let grid_box = FrequencyBox::new(d, msigma)?;

    let mut columns = Vec::with_capacity(grid_box.len());
    let cap = (2 * m + 1).pow(d as u32) * n_points.max(1);
    for _ in 0..grid_box.len() {
        let count = read_u32(input)? as usize;
        if count > n_points || count > cap {
            return domain_err(format!("column entry count {count} exceeds N = {n_points}"));
        }
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let r = read_u32(input)?;
            if r as usize >= n_points {
                return domain_err(format!("row index {r} out of range"));
            }
            if let Some(&prev) = rows.last() {
                if r <= prev {
                    return domain_err("column rows must be strictly ascending");
                }
            }
            rows.push(r);
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let v = read_f64(input)?;
            if !v.is_finite() {
                return domain_err("non-finite spreader value");
            }
            values.push(v);
        }
        columns.push(SpreaderColumn { rows, values });
    }

    Ok(OptimizedSpreader {
        freq_box,
        window,
        n_points,
        columns,
        residuals: Vec::new(),
        imag_norms: Vec::new(),
        fallback_columns: 0,
        deconvolve: deconvolve_for(freq_box, &window),
        bins_m: cube_bins_for(freq_box, msigma),
        bins_cols: cube_bins_for(grid_box, msigma),
        fft: CubeFft::new(d, msigma),
    })
}
