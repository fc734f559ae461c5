//! Exact reference transforms (NDFT and its adjoint) and the fast
//! approximate NFFT pair through the factorization `A ≈ B F D`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

use crate::dft::CubeFft;
use crate::domain::{CoefficientVector, FrequencyBox, SampleVector, SamplingSet};
use crate::window::{WindowKind, WindowSpec};
use crate::{domain_err, Error, Result};

/// Number of fixed-size accumulation slices used by the adjoint NDFT; kept
/// constant so results are independent of the thread count.
const ADJOINT_CHUNKS: usize = 64;

fn twiddles(x: f64, bandwidth: usize) -> Vec<Complex64> {
    let half = bandwidth as i64 / 2;
    (-half..half)
        .map(|k| Complex64::from_polar(1.0, TAU * k as f64 * x))
        .collect()
}

/// `f_j = Σ_{k∈I_M} f̂_k e^{2πi k·x_j}` by direct summation (tensorized
/// per-axis phase tables; no approximation beyond rounding).
pub fn ndft_forward(coeffs: &CoefficientVector, sampling: &SamplingSet) -> Result<SampleVector> {
    let bx = coeffs.freq_box;
    if bx.dim() != sampling.dim() {
        return domain_err("coefficient box and sampling set have different dimensions");
    }
    let m = bx.bandwidth();
    let values: Vec<Complex64> = (0..sampling.len())
        .into_par_iter()
        .map(|j| {
            let p = sampling.point(j);
            let tw: Vec<Vec<Complex64>> = p.iter().map(|&x| twiddles(x, m)).collect();
            point_forward_sum(&coeffs.values, &tw, m)
        })
        .collect();
    Ok(SampleVector::new(values))
}

fn point_forward_sum(v: &[Complex64], tw: &[Vec<Complex64>], m: usize) -> Complex64 {
    match tw.len() {
        1 => v.iter().zip(&tw[0]).map(|(a, b)| a * b).sum(),
        2 => {
            let mut acc = Complex64::default();
            for (i0, &t0) in tw[0].iter().enumerate() {
                let row = &v[i0 * m..(i0 + 1) * m];
                let inner: Complex64 = row.iter().zip(&tw[1]).map(|(a, b)| a * b).sum();
                acc += t0 * inner;
            }
            acc
        }
        3 => {
            let mut acc = Complex64::default();
            for (i0, &t0) in tw[0].iter().enumerate() {
                let mut mid = Complex64::default();
                for (i1, &t1) in tw[1].iter().enumerate() {
                    let row = &v[(i0 * m + i1) * m..(i0 * m + i1 + 1) * m];
                    let inner: Complex64 = row.iter().zip(&tw[2]).map(|(a, b)| a * b).sum();
                    mid += t1 * inner;
                }
                acc += t0 * mid;
            }
            acc
        }
        _ => unreachable!("dimension checked at construction"),
    }
}

/// `h_k = Σ_j f_j e^{−2πi k·x_j}` by direct summation.
pub fn ndft_adjoint(
    samples: &SampleVector,
    sampling: &SamplingSet,
    freq_box: FrequencyBox,
) -> Result<CoefficientVector> {
    if freq_box.dim() != sampling.dim() {
        return domain_err("frequency box and sampling set have different dimensions");
    }
    if samples.len() != sampling.len() {
        return Err(Error::size_mismatch("samples vs sampling set"));
    }
    let m = freq_box.bandwidth();
    let n = sampling.len();
    let chunk_len = n.div_ceil(ADJOINT_CHUNKS).max(1);

    let partials: Vec<Vec<Complex64>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(chunk_len)
        .map(|js| {
            let mut acc = vec![Complex64::default(); freq_box.len()];
            for &j in js {
                let p = sampling.point(j);
                let tw: Vec<Vec<Complex64>> = p.iter().map(|&x| twiddles(x, m)).collect();
                point_adjoint_update(&mut acc, samples.values[j], &tw, m);
            }
            acc
        })
        .collect();

    let mut values = vec![Complex64::default(); freq_box.len()];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    CoefficientVector::new(freq_box, values)
}

fn point_adjoint_update(acc: &mut [Complex64], f: Complex64, tw: &[Vec<Complex64>], m: usize) {
    match tw.len() {
        1 => {
            for (a, t) in acc.iter_mut().zip(&tw[0]) {
                *a += f * t.conj();
            }
        }
        2 => {
            for (i0, t0) in tw[0].iter().enumerate() {
                let c = f * t0.conj();
                let row = &mut acc[i0 * m..(i0 + 1) * m];
                for (a, t1) in row.iter_mut().zip(&tw[1]) {
                    *a += c * t1.conj();
                }
            }
        }
        3 => {
            for (i0, t0) in tw[0].iter().enumerate() {
                let c0 = f * t0.conj();
                for (i1, t1) in tw[1].iter().enumerate() {
                    let c = c0 * t1.conj();
                    let row = &mut acc[(i0 * m + i1) * m..(i0 * m + i1 + 1) * m];
                    for (a, t2) in row.iter_mut().zip(&tw[2]) {
                        *a += c * t2.conj();
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Precomputed NFFT for a fixed point set: deconvolution diagonal `D`, an
/// oversampled FFT stage `F`, and the row-sparse spreading matrix `B` whose
/// row `j` holds `w̃_m(x_j − ℓ/Mσ)` on the ≤ (2m+1)^d admissible grid
/// offsets.
#[derive(Debug, Clone)]
pub struct NfftPlan {
    freq_box: FrequencyBox,
    window: WindowSpec,
    n_points: usize,
    /// `1/(|I_Mσ|·ŵ(k))` in linearization order.
    deconvolve: Vec<f64>,
    row_offsets: Vec<usize>,
    /// Cube bin (C order over `(ℓ mod Mσ)` digits) per stored entry.
    col_bins: Vec<u32>,
    values: Vec<f64>,
    /// Cube bin of each `k ∈ I_M` in linearization order.
    bins_m: Vec<usize>,
    fft: CubeFft,
}

impl NfftPlan {
    /// Assembles the plan. The window must be a B-spline (the Dirichlet
    /// kernel has no truncated spatial form to spread with) and share the
    /// box bandwidth.
    pub fn build(
        sampling: &SamplingSet,
        freq_box: FrequencyBox,
        window: &WindowSpec,
    ) -> Result<Self> {
        if window.kind() != WindowKind::BSpline {
            return Err(Error::Unsupported(
                "plan building requires a window with a spatial form (B-spline)".into(),
            ));
        }
        if window.bandwidth() != freq_box.bandwidth() {
            return domain_err("window and frequency box disagree on bandwidth");
        }
        let d = freq_box.dim();
        if sampling.dim() != d {
            return domain_err("sampling set and frequency box have different dimensions");
        }
        let ms = window.oversampled();
        let m = window.truncation();
        let n = sampling.len();

        let deconvolve = deconvolve_for(freq_box, window);
        debug_assert!(deconvolve.iter().all(|v| v.is_finite() && *v > 0.0));
        let bins_m = cube_bins_for(freq_box, ms);

        // Per-point support rows, assembled in parallel then concatenated.
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let p = sampling.point(j);
                let mut axes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(d);
                for &x in p {
                    let c = ms as f64 * x;
                    let lo = (c - m as f64).ceil() as i64;
                    let hi = (c + m as f64).floor() as i64;
                    let axis: Vec<(usize, f64)> = (lo..=hi)
                        .map(|cand| {
                            let bin = cand.rem_euclid(ms as i64) as usize;
                            (bin, crate::window::bspline_centered(2 * m, c - cand as f64))
                        })
                        .collect();
                    axes.push(axis);
                }
                let mut entries: Vec<(u32, f64)> = Vec::with_capacity((2 * m + 1).pow(d as u32));
                tensor_entries(&axes, ms, &mut entries);
                entries.sort_unstable_by_key(|e| e.0);
                entries
            })
            .collect();

        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0usize);
        let mut col_bins = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            debug_assert!(!row.is_empty() && row.len() <= (2 * m + 1).pow(d as u32));
            for (bin, v) in row {
                col_bins.push(bin);
                values.push(v);
            }
            row_offsets.push(col_bins.len());
        }

        Ok(Self {
            freq_box,
            window: *window,
            n_points: n,
            deconvolve,
            row_offsets,
            col_bins,
            values,
            bins_m,
            fft: CubeFft::new(d, ms),
        })
    }

    pub fn freq_box(&self) -> FrequencyBox {
        self.freq_box
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Stored entries of row `j` as (linearized index over `I_Mσ`, value).
    pub fn row_entries(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let ms = self.window.oversampled();
        let d = self.freq_box.dim();
        let range = self.row_offsets[j]..self.row_offsets[j + 1];
        range.map(move |e| {
            let mut bin = self.col_bins[e] as usize;
            let mut signed = 0usize;
            let mut digits = [0usize; 3];
            for t in (0..d).rev() {
                digits[t] = bin % ms;
                bin /= ms;
            }
            for &dig in digits.iter().take(d) {
                signed = signed * ms + (dig + ms / 2) % ms;
            }
            (signed, self.values[e])
        })
    }

    /// Approximate evaluation `f ≈ B F D f̂` (deconvolve, oversampled inverse
    /// DFT, short sparse sums).
    pub fn forward(&self, coeffs: &CoefficientVector) -> Result<SampleVector> {
        if coeffs.freq_box != self.freq_box {
            return Err(Error::size_mismatch("coefficients vs plan box"));
        }
        let mut cube = vec![Complex64::default(); self.fft.len()];
        for (idx, &bin) in self.bins_m.iter().enumerate() {
            cube[bin] = coeffs.values[idx] * self.deconvolve[idx];
        }
        self.fft.inverse(&mut cube);

        let values: Vec<Complex64> = (0..self.n_points)
            .into_par_iter()
            .map(|j| {
                let mut acc = Complex64::default();
                for e in self.row_offsets[j]..self.row_offsets[j + 1] {
                    acc += cube[self.col_bins[e] as usize] * self.values[e];
                }
                acc
            })
            .collect();
        Ok(SampleVector::new(values))
    }

    /// Approximate adjoint `h ≈ D* F* B* f` (sparse column accumulation,
    /// oversampled forward DFT, deconvolve).
    pub fn adjoint(&self, samples: &SampleVector) -> Result<CoefficientVector> {
        if samples.len() != self.n_points {
            return Err(Error::size_mismatch("samples vs plan point count"));
        }
        let mut cube = vec![Complex64::default(); self.fft.len()];
        for j in 0..self.n_points {
            let f = samples.values[j];
            for e in self.row_offsets[j]..self.row_offsets[j + 1] {
                cube[self.col_bins[e] as usize] += f * self.values[e];
            }
        }
        self.fft.forward(&mut cube);

        let values: Vec<Complex64> = self
            .bins_m
            .iter()
            .zip(&self.deconvolve)
            .map(|(&bin, &dk)| cube[bin] * dk)
            .collect();
        CoefficientVector::new(self.freq_box, values)
    }
}

/// `1/(|I_Mσ|·ŵ(k))` over the box in linearization order.
pub(crate) fn deconvolve_for(freq_box: FrequencyBox, window: &WindowSpec) -> Vec<f64> {
    let ms = window.oversampled();
    let d = freq_box.dim();
    freq_box
        .indices()
        .map(|k| {
            let hat: f64 = k.iter().map(|&kt| window.hat_axis(kt)).product();
            1.0 / (ms.pow(d as u32) as f64 * hat)
        })
        .collect()
}

/// Cube bin (`k mod Mσ` per axis, C order) of each `k ∈ I_M`.
pub(crate) fn cube_bins_for(freq_box: FrequencyBox, ms: usize) -> Vec<usize> {
    freq_box
        .indices()
        .map(|k| {
            k.iter().fold(0usize, |acc, &kt| {
                acc * ms + (kt.rem_euclid(ms as i64)) as usize
            })
        })
        .collect()
}

fn tensor_entries(axes: &[Vec<(usize, f64)>], ms: usize, out: &mut Vec<(u32, f64)>) {
    match axes.len() {
        1 => {
            for &(b0, v0) in &axes[0] {
                out.push((b0 as u32, v0));
            }
        }
        2 => {
            for &(b0, v0) in &axes[0] {
                for &(b1, v1) in &axes[1] {
                    out.push(((b0 * ms + b1) as u32, v0 * v1));
                }
            }
        }
        3 => {
            for &(b0, v0) in &axes[0] {
                for &(b1, v1) in &axes[1] {
                    for &(b2, v2) in &axes[2] {
                        out.push((((b0 * ms + b1) * ms + b2) as u32, v0 * v1 * v2));
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// A plan with window parameters strong enough that the NFFT pair is
/// accurate to roughly 1e-11 relative to `‖·‖_1`; used wherever a fast
/// transform stands in for the exact one.
pub fn accurate_plan(sampling: &SamplingSet, freq_box: FrequencyBox) -> Result<NfftPlan> {
    let m_band = freq_box.bandwidth();
    let sigma = if 2 * m_band >= 32 {
        2.0
    } else {
        32.0 / m_band as f64
    };
    let ms = crate::window::oversampled_size(sigma, m_band)?;
    let m = 12usize.min((ms - 1) / 2);
    let window = WindowSpec::new(WindowKind::BSpline, m, sigma, m_band)?;
    NfftPlan::build(sampling, freq_box, &window)
}
