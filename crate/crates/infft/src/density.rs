//! Density compensation weights: the exact quadrature scheme over the
//! doubled index set `I_2M`, the literature baselines (pseudoinverse, WCF,
//! PCF, relaxed, sinc-system, Voronoi, uniform), the weighted-adjoint
//! reconstruction, and residual/condition diagnostics.
//!
//! The exact scheme enforces `Σ_j w_j e^{2πik·x_j} = δ_{0,k}` for all
//! `k ∈ I_2M`; when that system is solvable the weighted adjoint transform
//! reproduces every polynomial of degree `M` exactly and `A*WA = I`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use crate::domain::{CoefficientVector, FrequencyBox, SampleVector, SamplingSet};
use crate::solver::{cg_solve, condition_number_2, dense_lstsq, dense_pinv, CgConfig};
use crate::transform::{ndft_adjoint, ndft_forward, NfftPlan};
use crate::window::{dirichlet_factor, sinc, WindowKind, WindowSpec};
use crate::{domain_err, Error, Result};

/// Above this index-set cardinality the quadrature matvecs switch from the
/// exact NDFT to an NFFT (B-spline, m = 6, σ = 2).
const EXACT_MATVEC_LIMIT: usize = 4096;
/// Dense-path guards for the small-instance baselines.
const DENSE_WEIGHTS_GUARD: usize = 2048;
/// Largest point count for which PCF row sums are evaluated by the closed
/// form; beyond it one operator application of the squared-kernel matrix is
/// used instead.
const PCF_DIRECT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMethod {
    /// Quadrature weights solving the doubled-index system (exact for
    /// trigonometric polynomials of degree `M` when `|I_2M| ≤ N`).
    ExactQuadrature,
    /// Half-gap interval lengths on the sorted circle (`d = 1` only).
    Voronoi1d,
    /// `w_j = 1/N`.
    Uniform,
    /// Diagonal of `A A†`, scaled by `1/|I_M|`.
    Pinv,
    /// Solves `S w = |I_M| 1_N` with `S = |A A*|²` entrywise.
    Wcf,
    /// `w_j = |I_M| / Σ_h |[A A*]_{jh}|²`.
    Pcf,
    /// Solves the column-summed system `A A* w = 1_N`.
    Relaxed,
    /// Least squares on the sinc interpolation conditions at the equispaced
    /// nodes `ℓ/(2M)`, `ℓ ∈ I_2M`.
    SincSystem,
}

impl std::fmt::Display for WeightMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WeightMethod::ExactQuadrature => "exact-quadrature",
            WeightMethod::Voronoi1d => "voronoi-1d",
            WeightMethod::Uniform => "uniform",
            WeightMethod::Pinv => "pinv",
            WeightMethod::Wcf => "wcf",
            WeightMethod::Pcf => "pcf",
            WeightMethod::Relaxed => "relaxed",
            WeightMethod::SincSystem => "sinc-system",
        };
        f.write_str(s)
    }
}

/// Residual diagnostics attached to every computed weight vector.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ResidualReport {
    pub method: WeightMethod,
    pub n_points: usize,
    pub bandwidth: usize,
    /// `max_{k∈I_2M} |Σ_j w_j e^{2πik·x_j} − δ_{0,k}|`.
    pub epsilon: f64,
    /// Whether `epsilon` was evaluated by the exact NDFT or by the NFFT.
    pub epsilon_exact: bool,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub cg_converged: bool,
    /// Set when a dense solve fell back to truncated least squares on a
    /// (numerically) singular system.
    pub least_squares_fallback: bool,
}

impl ResidualReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}

/// Density compensation factors `w_j`, one per sampling point.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub values: Vec<Complex64>,
    pub report: ResidualReport,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Transform engine over a given frequency box: exact NDFT for small boxes,
/// NFFT beyond [`EXACT_MATVEC_LIMIT`].
enum Engine {
    Exact,
    Fast(Box<NfftPlan>),
}

impl Engine {
    fn for_box(sampling: &SamplingSet, freq_box: FrequencyBox) -> Result<Self> {
        if freq_box.len() <= EXACT_MATVEC_LIMIT {
            Ok(Engine::Exact)
        } else {
            let window = WindowSpec::new(WindowKind::BSpline, 6, 2.0, freq_box.bandwidth())?;
            Ok(Engine::Fast(Box::new(NfftPlan::build(
                sampling, freq_box, &window,
            )?)))
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self, Engine::Exact)
    }

    fn forward(&self, coeffs: &CoefficientVector, sampling: &SamplingSet) -> Result<SampleVector> {
        match self {
            Engine::Exact => ndft_forward(coeffs, sampling),
            Engine::Fast(plan) => plan.forward(coeffs),
        }
    }

    fn adjoint(
        &self,
        samples: &SampleVector,
        sampling: &SamplingSet,
        freq_box: FrequencyBox,
    ) -> Result<CoefficientVector> {
        match self {
            Engine::Exact => ndft_adjoint(samples, sampling, freq_box),
            Engine::Fast(plan) => plan.adjoint(samples),
        }
    }

    /// `A^T g = conj(A* conj(g))`.
    fn a_transpose(
        &self,
        samples: &[Complex64],
        sampling: &SamplingSet,
        freq_box: FrequencyBox,
    ) -> Result<Vec<Complex64>> {
        let conj = SampleVector::new(samples.iter().map(|v| v.conj()).collect());
        let h = self.adjoint(&conj, sampling, freq_box)?;
        Ok(h.values.into_iter().map(|v| v.conj()).collect())
    }

    /// `conj(A) v = conj(A conj(v))`.
    fn a_conj(
        &self,
        coeffs: &[Complex64],
        sampling: &SamplingSet,
        freq_box: FrequencyBox,
    ) -> Result<Vec<Complex64>> {
        let conj = CoefficientVector::new(freq_box, coeffs.iter().map(|v| v.conj()).collect())?;
        let f = self.forward(&conj, sampling)?;
        Ok(f.values.into_iter().map(|v| v.conj()).collect())
    }
}

/// Optimal density compensation factors: solves the doubled-index quadrature
/// system by CG on the normal equations of second kind when `|I_2M| ≤ N`
/// (minimum-norm interpolatory weights) and of first kind otherwise (least
/// squares approximation; the right side simplifies to `1_N`).
pub fn exact_weights(
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
    cfg: &CgConfig,
) -> Result<WeightVector> {
    if sampling.dim() != freq_box.dim() {
        return domain_err("sampling set and frequency box have different dimensions");
    }
    let doubled = freq_box.doubled();
    let n = sampling.len();
    let engine = Engine::for_box(sampling, doubled)?;

    let (values, outcome) = if doubled.len() <= n {
        // A_2M^T conj(A_2M) v = e_0, then w = conj(A_2M) v.
        let mut rhs = vec![Complex64::default(); doubled.len()];
        rhs[doubled.linearize(&vec![0; doubled.dim()])?] = Complex64::new(1.0, 0.0);
        let out = cg_solve(
            |v| {
                let u = engine.a_conj(v, sampling, doubled).expect("matvec");
                engine.a_transpose(&u, sampling, doubled).expect("matvec")
            },
            &rhs,
            cfg,
        )?;
        let w = engine.a_conj(&out.solution, sampling, doubled)?;
        (w, out)
    } else {
        // conj(A_2M) A_2M^T w = 1_N.
        let rhs = vec![Complex64::new(1.0, 0.0); n];
        let out = cg_solve(
            |w| {
                let u = engine.a_transpose(w, sampling, doubled).expect("matvec");
                engine.a_conj(&u, sampling, doubled).expect("matvec")
            },
            &rhs,
            cfg,
        )?;
        (out.solution.clone(), out)
    };

    let (epsilon, epsilon_exact) = residual_epsilon_inner(&values, sampling, doubled)?;
    Ok(WeightVector {
        values,
        report: ResidualReport {
            method: WeightMethod::ExactQuadrature,
            n_points: n,
            bandwidth: freq_box.bandwidth(),
            epsilon,
            epsilon_exact,
            cg_iterations: outcome.iterations,
            cg_residual: outcome.rel_residual,
            cg_converged: outcome.converged,
            least_squares_fallback: false,
        },
    })
}

/// `ε = max_{k∈I_2M} |[A_2M^T w]_k − δ_{0,k}|`, evaluated exactly for
/// `|I_2M| ≤ 4096` and through the NFFT beyond that.
pub fn residual_epsilon(
    weights: &[Complex64],
    sampling: &SamplingSet,
    doubled: FrequencyBox,
) -> Result<f64> {
    residual_epsilon_inner(weights, sampling, doubled).map(|(eps, _)| eps)
}

fn residual_epsilon_inner(
    weights: &[Complex64],
    sampling: &SamplingSet,
    doubled: FrequencyBox,
) -> Result<(f64, bool)> {
    if weights.len() != sampling.len() {
        return Err(Error::size_mismatch("weights vs sampling set"));
    }
    let engine = Engine::for_box(sampling, doubled)?;
    let mut res = engine.a_transpose(weights, sampling, doubled)?;
    res[doubled.linearize(&vec![0; doubled.dim()])?] -= Complex64::new(1.0, 0.0);
    let eps = res.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((eps, engine.is_exact()))
}

/// Density compensation reconstruction: one adjoint NFFT applied to the
/// pointwise scaled data `w ⊙ f`.
pub fn infft_density(
    plan: &NfftPlan,
    weights: &WeightVector,
    samples: &SampleVector,
) -> Result<CoefficientVector> {
    if weights.len() != plan.n_points() || samples.len() != plan.n_points() {
        return Err(Error::size_mismatch("weights/samples vs plan point count"));
    }
    let scaled = SampleVector::new(
        weights
            .values
            .iter()
            .zip(&samples.values)
            .map(|(w, f)| w * f)
            .collect(),
    );
    plan.adjoint(&scaled)
}

/// Closed-form Gram entry `[A A*]_{jh} = Π_t (D_{M/2−1} + e^{−Mπi·})` at the
/// pointwise difference of two sampling points.
pub fn aat_entry(sampling: &SamplingSet, bandwidth: usize, j: usize, h: usize) -> Complex64 {
    let xj = sampling.point(j);
    let xh = sampling.point(h);
    xj.iter()
        .zip(xh)
        .map(|(&a, &b)| dirichlet_factor(bandwidth, a - b))
        .product()
}

pub(crate) fn dense_a(sampling: &SamplingSet, freq_box: FrequencyBox) -> DMatrix<Complex64> {
    let n = sampling.len();
    DMatrix::from_fn(n, freq_box.len(), |j, col| {
        let k = freq_box.delinearize(col);
        let phase: f64 = k
            .iter()
            .zip(sampling.point(j))
            .map(|(&kt, &xt)| kt as f64 * xt)
            .sum();
        Complex64::from_polar(1.0, TAU * phase)
    })
}

/// Squared-kernel matvec `S w` with `S_{jh} = |[A A*]_{jh}|²`, realized as
/// `A_2M (c ⊙ A_2M^* w)` where `c_n = Π_t (M − |n_t|)` counts the frequency
/// pairs in `I_M × I_M` with difference `n`. The identity is exact; only the
/// transforms may be approximate on large boxes.
fn squared_kernel_apply(
    engine: &Engine,
    sampling: &SamplingSet,
    doubled: FrequencyBox,
    counts: &[f64],
    w: &[Complex64],
) -> Vec<Complex64> {
    let h = engine
        .adjoint(&SampleVector::new(w.to_vec()), sampling, doubled)
        .expect("matvec");
    let weighted = CoefficientVector::new(
        doubled,
        h.values.iter().zip(counts).map(|(v, &c)| v * c).collect(),
    )
    .expect("sizes match");
    engine.forward(&weighted, sampling).expect("matvec").values
}

fn difference_counts(doubled: FrequencyBox, bandwidth: usize) -> Vec<f64> {
    doubled
        .indices()
        .map(|n| {
            n.iter()
                .map(|&nt| (bandwidth as f64 - nt.abs() as f64).max(0.0))
                .product()
        })
        .collect()
}

/// Weights from the surveyed baseline schemes. `ExactQuadrature` routes to
/// [`exact_weights`].
pub fn baseline_weights(
    method: WeightMethod,
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
    cfg: &CgConfig,
) -> Result<WeightVector> {
    if sampling.dim() != freq_box.dim() {
        return domain_err("sampling set and frequency box have different dimensions");
    }
    let n = sampling.len();
    let card = freq_box.len() as f64;
    let mut cg_iterations = 0;
    let mut cg_residual = 0.0;
    let mut cg_converged = true;
    let mut fallback = false;

    let values: Vec<Complex64> = match method {
        WeightMethod::ExactQuadrature => return exact_weights(sampling, freq_box, cfg),
        WeightMethod::Uniform => {
            vec![Complex64::new(1.0 / n as f64, 0.0); n]
        }
        WeightMethod::Voronoi1d => {
            if sampling.dim() != 1 {
                return domain_err("Voronoi weights are implemented for d = 1 only");
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                sampling.point(a)[0]
                    .partial_cmp(&sampling.point(b)[0])
                    .expect("finite coordinates")
            });
            let mut w = vec![Complex64::default(); n];
            for (pos, &j) in order.iter().enumerate() {
                let prev = sampling.point(order[(pos + n - 1) % n])[0];
                let next = sampling.point(order[(pos + 1) % n])[0];
                let x = sampling.point(j)[0];
                let gap_prev = (x - prev).rem_euclid(1.0);
                let gap_next = (next - x).rem_euclid(1.0);
                w[j] = Complex64::new((gap_prev + gap_next) / 2.0, 0.0);
            }
            w
        }
        WeightMethod::Pinv => {
            if n + freq_box.len() > DENSE_WEIGHTS_GUARD {
                return Err(Error::Capacity(format!(
                    "pinv weights need N + |I_M| = {} <= {DENSE_WEIGHTS_GUARD}",
                    n + freq_box.len()
                )));
            }
            let a = dense_a(sampling, freq_box);
            let pinv = dense_pinv(&a)?;
            let proj = &a * pinv;
            (0..n).map(|j| proj[(j, j)] / card).collect()
        }
        WeightMethod::Wcf => {
            if n <= DENSE_WEIGHTS_GUARD / 2 {
                // Dense path with truncated least squares; the system can be
                // singular for symmetric grids.
                let m_band = freq_box.bandwidth();
                let s = DMatrix::<Complex64>::from_fn(n, n, |j, h| {
                    Complex64::new(aat_entry(sampling, m_band, j, h).norm_sqr(), 0.0)
                });
                fallback = {
                    let svd = s.clone().svd(false, false);
                    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
                    let smin = svd
                        .singular_values
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    smin <= 1e-12 * smax
                };
                let b = DVector::from_element(n, Complex64::new(card, 0.0));
                dense_lstsq(&s, &b)?.as_slice().to_vec()
            } else {
                let doubled = freq_box.doubled();
                let engine = Engine::for_box(sampling, doubled)?;
                let counts = difference_counts(doubled, freq_box.bandwidth());
                let rhs = vec![Complex64::new(card, 0.0); n];
                let out = cg_solve(
                    |w| squared_kernel_apply(&engine, sampling, doubled, &counts, w),
                    &rhs,
                    cfg,
                )?;
                cg_iterations = out.iterations;
                cg_residual = out.rel_residual;
                cg_converged = out.converged;
                out.solution
            }
        }
        WeightMethod::Pcf => {
            let row_sums: Vec<f64> = if n <= PCF_DIRECT_LIMIT {
                let m_band = freq_box.bandwidth();
                (0..n)
                    .into_par_iter()
                    .map(|j| {
                        (0..n)
                            .map(|h| aat_entry(sampling, m_band, j, h).norm_sqr())
                            .sum()
                    })
                    .collect()
            } else {
                let doubled = freq_box.doubled();
                let engine = Engine::for_box(sampling, doubled)?;
                let counts = difference_counts(doubled, freq_box.bandwidth());
                let ones = vec![Complex64::new(1.0, 0.0); n];
                squared_kernel_apply(&engine, sampling, doubled, &counts, &ones)
                    .into_iter()
                    .map(|v| v.re)
                    .collect()
            };
            row_sums
                .into_iter()
                .map(|s| Complex64::new(card / s, 0.0))
                .collect()
        }
        WeightMethod::Relaxed => {
            let engine = Engine::for_box(sampling, freq_box)?;
            let rhs = vec![Complex64::new(1.0, 0.0); n];
            let out = cg_solve(
                |w| {
                    let h = engine
                        .adjoint(&SampleVector::new(w.to_vec()), sampling, freq_box)
                        .expect("matvec");
                    engine.forward(&h, sampling).expect("matvec").values
                },
                &rhs,
                cfg,
            )?;
            cg_iterations = out.iterations;
            cg_residual = out.rel_residual;
            cg_converged = out.converged;
            out.solution
        }
        WeightMethod::SincSystem => {
            let doubled = freq_box.doubled();
            if n + doubled.len() > DENSE_WEIGHTS_GUARD {
                return Err(Error::Capacity(format!(
                    "sinc-system weights need N + |I_2M| = {} <= {DENSE_WEIGHTS_GUARD}",
                    n + doubled.len()
                )));
            }
            let two_m = doubled.bandwidth() as f64;
            let rows = doubled.len();
            let c = DMatrix::<Complex64>::from_fn(rows, n, |row, j| {
                let y = doubled.delinearize(row);
                let prod: f64 = sampling
                    .point(j)
                    .iter()
                    .zip(&y)
                    .map(|(&x, &l)| sinc(two_m * std::f64::consts::PI * (x - l as f64 / two_m)))
                    .product();
                Complex64::new(rows as f64 * prod, 0.0)
            });
            let b = DVector::from_element(rows, Complex64::new(1.0, 0.0));
            dense_lstsq(&c, &b)?.as_slice().to_vec()
        }
    };

    let (epsilon, epsilon_exact) = residual_epsilon_inner(&values, sampling, freq_box.doubled())?;
    Ok(WeightVector {
        values,
        report: ResidualReport {
            method,
            n_points: n,
            bandwidth: freq_box.bandwidth(),
            epsilon,
            epsilon_exact,
            cg_iterations,
            cg_residual,
            cg_converged,
            least_squares_fallback: fallback,
        },
    })
}

/// Verdict of the condition-number bound
/// `κ₂(A*WA) ≤ (1 + ε|I_M|)/(1 − ε|I_M|)`, checked by dense SVD.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionReport {
    pub kappa2: f64,
    pub epsilon: f64,
    /// The bound value; infinite when `ε|I_M| ≥ 1` (hypothesis void).
    pub bound: f64,
    pub holds: bool,
}

pub fn condition_bound_check(
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
    weights: &[Complex64],
) -> Result<ConditionReport> {
    if freq_box.len() > 256 || sampling.len() > 1024 {
        return Err(Error::Capacity(format!(
            "condition check guard: |I_M| = {} <= 256 and N = {} <= 1024 required",
            freq_box.len(),
            sampling.len()
        )));
    }
    if weights.len() != sampling.len() {
        return Err(Error::size_mismatch("weights vs sampling set"));
    }
    let a = dense_a(sampling, freq_box);
    let mut wa = a.clone();
    for (j, &w) in weights.iter().enumerate() {
        for c in 0..wa.ncols() {
            wa[(j, c)] *= w;
        }
    }
    let gram = a.ad_mul(&wa);
    let kappa2 = condition_number_2(&gram);
    let epsilon = residual_epsilon(weights, sampling, freq_box.doubled())?;
    let eps_card = epsilon * freq_box.len() as f64;
    let (bound, holds) = if eps_card >= 1.0 {
        (f64::INFINITY, true)
    } else {
        let bound = (1.0 + eps_card) / (1.0 - eps_card);
        (bound, kappa2 <= bound + 1e-8)
    };
    Ok(ConditionReport {
        kappa2,
        epsilon,
        bound,
        holds,
    })
}

/// Writes weights as CSV with columns `re,im`, one row per point.
pub fn write_weights_csv<W: Write>(weights: &[Complex64], out: &mut W) -> Result<()> {
    writeln!(out, "re,im")?;
    for w in weights {
        writeln!(out, "{},{}", w.re, w.im)?;
    }
    Ok(())
}

/// Reads weights written by [`write_weights_csv`].
pub fn read_weights_csv<R: BufRead>(input: R) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "re,im" {
                return domain_err(format!("unexpected weights CSV header: {line}"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let re: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Domain(format!("bad weights CSV row {i}: {line}")))?;
        let im: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Domain(format!("bad weights CSV row {i}: {line}")))?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}
