//! Frequency index boxes, point sets on the torus, and error metrics.

use num_complex::Complex64;

use crate::{domain_err, Error, Result};

/// The cube of integer frequencies `I_M = Z^d ∩ [−M/2, M/2)^d` together with
/// a fixed linearization of its signed multi-indices (axis 1 slowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyBox {
    dim: usize,
    bandwidth: usize,
}

impl FrequencyBox {
    /// `d` must be 1, 2 or 3 and the per-axis bandwidth `M` even and ≥ 2.
    pub fn new(dim: usize, bandwidth: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return domain_err(format!("dimension must be 1, 2 or 3, got {dim}"));
        }
        if bandwidth < 2 || bandwidth % 2 != 0 {
            return domain_err(format!("bandwidth must be even and >= 2, got {bandwidth}"));
        }
        Ok(Self { dim, bandwidth })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis bandwidth `M`.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Cardinality `M^d`.
    pub fn len(&self) -> usize {
        self.bandwidth.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The box of doubled bandwidth `I_2M`.
    pub fn doubled(&self) -> Self {
        Self {
            dim: self.dim,
            bandwidth: 2 * self.bandwidth,
        }
    }

    /// Per-axis index range `[-M/2, M/2)`.
    pub fn axis_range(&self) -> std::ops::Range<i64> {
        let half = self.bandwidth as i64 / 2;
        -half..half
    }

    /// Maps a signed multi-index to its linear position,
    /// `Σ_t (k_t + M/2)·M^(d−1−t)` with axis 0 slowest.
    pub fn linearize(&self, k: &[i64]) -> Result<usize> {
        if k.len() != self.dim {
            return domain_err(format!(
                "multi-index has {} components, box has dimension {}",
                k.len(),
                self.dim
            ));
        }
        let half = self.bandwidth as i64 / 2;
        let mut idx = 0usize;
        for &kt in k {
            if kt < -half || kt >= half {
                return domain_err(format!("index component {kt} outside [-{half}, {half})"));
            }
            idx = idx * self.bandwidth + (kt + half) as usize;
        }
        Ok(idx)
    }

    /// Inverse of [`linearize`](Self::linearize).
    pub fn delinearize(&self, mut idx: usize) -> Vec<i64> {
        debug_assert!(idx < self.len());
        let half = self.bandwidth as i64 / 2;
        let mut k = vec![0i64; self.dim];
        for t in (0..self.dim).rev() {
            k[t] = (idx % self.bandwidth) as i64 - half;
            idx /= self.bandwidth;
        }
        k
    }

    /// All multi-indices in linearization order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.delinearize(i))
    }
}

/// Wraps one coordinate into `[-1/2, 1/2)`.
pub fn wrap_scalar(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain_err(format!("non-finite coordinate {x}"));
    }
    let mut y = x - (x + 0.5).floor();
    // Guard the half-open convention against rounding at the boundary.
    if y >= 0.5 {
        y -= 1.0;
    }
    if y < -0.5 {
        y += 1.0;
    }
    Ok(y)
}

/// Wraps a point into the torus `[-1/2, 1/2)^d` componentwise.
pub fn wrap_torus(x: &[f64]) -> Result<Vec<f64>> {
    x.iter().map(|&c| wrap_scalar(c)).collect()
}

/// `N` nonequispaced points on the d-torus, stored wrapped into
/// `[-1/2, 1/2)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSet {
    dim: usize,
    coords: Vec<f64>,
}

impl SamplingSet {
    /// Builds a set from flat coordinates (point-major), wrapping each
    /// component canonically.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return domain_err(format!("dimension must be 1, 2 or 3, got {dim}"));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return domain_err(format!(
                "coordinate buffer of length {} is not a positive multiple of d = {dim}",
                coords.len()
            ));
        }
        let coords = coords
            .into_iter()
            .map(wrap_scalar)
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Fourier coefficients on a [`FrequencyBox`], in linearization order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub freq_box: FrequencyBox,
    pub values: Vec<Complex64>,
}

impl CoefficientVector {
    pub fn new(freq_box: FrequencyBox, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != freq_box.len() {
            return domain_err(format!(
                "coefficient vector of length {} does not match box cardinality {}",
                values.len(),
                freq_box.len()
            ));
        }
        Ok(Self { freq_box, values })
    }

    pub fn zeros(freq_box: FrequencyBox) -> Self {
        Self {
            freq_box,
            values: vec![Complex64::default(); freq_box.len()],
        }
    }
}

/// Complex samples aligned with a [`SamplingSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    pub values: Vec<Complex64>,
}

impl SampleVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![Complex64::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Vector norm selector for error metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    LInf,
}

pub(crate) fn norm_of(values: &[Complex64], p: Norm) -> f64 {
    match p {
        Norm::L2 => values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
        Norm::LInf => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
    }
}

/// Relative p-norm error `‖approx − exact‖_p / ‖exact‖_p` for `p ∈ {2, ∞}`.
pub fn relative_error(
    approx: &CoefficientVector,
    exact: &CoefficientVector,
    p: Norm,
) -> Result<f64> {
    if approx.freq_box != exact.freq_box {
        return domain_err("coefficient vectors live on different frequency boxes");
    }
    let denom = norm_of(&exact.values, p);
    if denom == 0.0 {
        return domain_err("relative error undefined for zero reference vector");
    }
    let diff: Vec<Complex64> = approx
        .values
        .iter()
        .zip(&exact.values)
        .map(|(a, e)| a - e)
        .collect();
    Ok(norm_of(&diff, p) / denom)
}

/// Relative error between sample vectors, same convention.
pub fn relative_sample_error(approx: &SampleVector, exact: &SampleVector, p: Norm) -> Result<f64> {
    if approx.len() != exact.len() {
        return domain_err("sample vectors have different lengths");
    }
    let denom = norm_of(&exact.values, p);
    if denom == 0.0 {
        return domain_err("relative error undefined for zero reference vector");
    }
    let diff: Vec<Complex64> = approx
        .values
        .iter()
        .zip(&exact.values)
        .map(|(a, e)| a - e)
        .collect();
    Ok(norm_of(&diff, p) / denom)
}

impl Error {
    pub(crate) fn size_mismatch(what: &str) -> Error {
        Error::Domain(format!("size mismatch: {what}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linearize_examples() {
        let b1 = FrequencyBox::new(1, 4).unwrap();
        assert_eq!(b1.linearize(&[-2]).unwrap(), 0);
        assert_eq!(b1.linearize(&[1]).unwrap(), 3);
        let b2 = FrequencyBox::new(2, 4).unwrap();
        assert_eq!(b2.linearize(&[-2, -2]).unwrap(), 0);
        assert_eq!(b2.linearize(&[1, 1]).unwrap(), 15);
    }

    #[test]
    fn linearize_rejects_out_of_box() {
        let b = FrequencyBox::new(1, 4).unwrap();
        assert!(b.linearize(&[2]).is_err());
        assert!(b.linearize(&[-3]).is_err());
    }

    #[test]
    fn linearize_roundtrip_exhaustive() {
        for d in 1..=3usize {
            for m in [2usize, 4, 6, 16] {
                if m.pow(d as u32) > 5000 {
                    continue;
                }
                let b = FrequencyBox::new(d, m).unwrap();
                for idx in 0..b.len() {
                    let k = b.delinearize(idx);
                    assert_eq!(b.linearize(&k).unwrap(), idx);
                }
            }
        }
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_scalar(0.5).unwrap(), -0.5);
        assert_eq!(wrap_scalar(0.25).unwrap(), 0.25);
        assert!((wrap_scalar(1.3).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(wrap_scalar(-0.5).unwrap(), -0.5);
        assert!(wrap_scalar(f64::NAN).is_err());
        assert!(wrap_scalar(f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_idempotent() {
        for i in 0..1000 {
            let x = -7.0 + 0.0137 * i as f64;
            let once = wrap_scalar(x).unwrap();
            assert!((-0.5..0.5).contains(&once));
            assert_eq!(wrap_scalar(once).unwrap(), once);
            // Congruent mod 1.
            assert!(((x - once) - (x - once).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_error_examples() {
        let b = FrequencyBox::new(1, 4).unwrap();
        let exact = CoefficientVector::new(
            b,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
            ],
        )
        .unwrap();
        assert_eq!(relative_error(&exact, &exact, Norm::L2).unwrap(), 0.0);
        assert_eq!(relative_error(&exact, &exact, Norm::LInf).unwrap(), 0.0);

        let eps = 3e-7;
        let mut approx = exact.clone();
        approx.values[0] += Complex64::new(eps, 0.0);
        let e = relative_error(&approx, &exact, Norm::LInf).unwrap();
        assert!((e - eps).abs() < 1e-15);

        let zero = CoefficientVector::zeros(b);
        assert!(relative_error(&approx, &zero, Norm::L2).is_err());
    }

    #[test]
    fn relative_error_matches_elementwise_oracle() {
        // Brute-force norm oracle on a fixed pseudo-random pair.
        let b = FrequencyBox::new(2, 4).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let exact =
            CoefficientVector::new(b, (0..16).map(|_| Complex64::new(next(), next())).collect())
                .unwrap();
        let approx =
            CoefficientVector::new(b, (0..16).map(|_| Complex64::new(next(), next())).collect())
                .unwrap();

        let mut num2 = 0.0;
        let mut den2 = 0.0;
        let mut numi: f64 = 0.0;
        let mut deni: f64 = 0.0;
        for i in 0..16 {
            let d = approx.values[i] - exact.values[i];
            num2 += d.re * d.re + d.im * d.im;
            den2 += exact.values[i].norm_sqr();
            numi = numi.max(d.norm());
            deni = deni.max(exact.values[i].norm());
        }
        let e2 = relative_error(&approx, &exact, Norm::L2).unwrap();
        let ei = relative_error(&approx, &exact, Norm::LInf).unwrap();
        assert!((e2 - num2.sqrt() / den2.sqrt()).abs() < 1e-15);
        assert!((ei - numi / deni).abs() < 1e-15);
    }
}
