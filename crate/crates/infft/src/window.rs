//! Window functions for the NFFT: centered B-splines with their sinc-power
//! Fourier coefficients, and the frequency-only Dirichlet window whose kernel
//! also supplies closed-form Gram-matrix entries.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{domain_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WindowKind {
    BSpline,
    Dirichlet,
}

/// A window configuration tied to a bandwidth `M`: truncation parameter `m`,
/// oversampling factor `σ` and the derived even grid size `Mσ = 2⌈⌈σM⌉/2⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    kind: WindowKind,
    m: usize,
    sigma: f64,
    bandwidth: usize,
    msigma: usize,
}

/// `Mσ = 2⌈⌈σM⌉/2⌉` for `σ ≥ 1` and even `M`.
pub fn oversampled_size(sigma: f64, bandwidth: usize) -> Result<usize> {
    if !sigma.is_finite() || sigma < 1.0 {
        return domain_err(format!("oversampling factor must be >= 1, got {sigma}"));
    }
    if bandwidth < 2 || bandwidth % 2 != 0 {
        return domain_err(format!("bandwidth must be even and >= 2, got {bandwidth}"));
    }
    let inner = (sigma * bandwidth as f64).ceil() as usize;
    Ok(2 * inner.div_ceil(2))
}

impl WindowSpec {
    pub fn new(kind: WindowKind, m: usize, sigma: f64, bandwidth: usize) -> Result<Self> {
        let msigma = oversampled_size(sigma, bandwidth)?;
        if m == 0 {
            return domain_err("truncation parameter m must be positive");
        }
        if 2 * m + 1 > msigma {
            return domain_err(format!(
                "window support 2m+1 = {} exceeds oversampled size {msigma}",
                2 * m + 1
            ));
        }
        Ok(Self {
            kind,
            m,
            sigma,
            bandwidth,
            msigma,
        })
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn oversampled(&self) -> usize {
        self.msigma
    }

    /// One axis factor of `ŵ(k)`; the full coefficient is the product over
    /// axes. Positive for every `|k| ≤ Mσ/2` by `sinc > 0` there.
    pub fn hat_axis(&self, k: i64) -> f64 {
        match self.kind {
            WindowKind::Dirichlet => 1.0,
            WindowKind::BSpline => {
                let s = sinc(PI * k as f64 / self.msigma as f64);
                s.powi(2 * self.m as i32) / self.msigma as f64
            }
        }
    }

    /// Fourier coefficient `ŵ(k)` of the (untruncated) window for `k ∈ I_M`.
    pub fn hat(&self, k: &[i64]) -> Result<f64> {
        let half = self.bandwidth as i64 / 2;
        for &kt in k {
            if kt < -half || kt >= half {
                return domain_err(format!("frequency component {kt} outside [-{half}, {half})"));
            }
        }
        Ok(k.iter().map(|&kt| self.hat_axis(kt)).product())
    }

    /// One axis factor of the 1-periodized truncated window `w̃_m(u)`.
    /// Only defined for the B-spline window.
    pub fn spatial_axis(&self, u: f64) -> Result<f64> {
        if self.kind != WindowKind::BSpline {
            return Err(Error::Unsupported(
                "the Dirichlet window has no truncated spatial form".into(),
            ));
        }
        let u = crate::domain::wrap_scalar(u)?;
        let ms = self.msigma as f64;
        // After wrapping, at most one shift r ∈ {-1, 0, 1} can land inside
        // the support [-m/Mσ, m/Mσ]; summing all three is exact.
        Ok(bspline_centered(2 * self.m, ms * u)
            + bspline_centered(2 * self.m, ms * (u - 1.0))
            + bspline_centered(2 * self.m, ms * (u + 1.0)))
    }

    /// `w̃_m(u)` for a d-vector `u` (tensor product of axis factors).
    pub fn spatial(&self, u: &[f64]) -> Result<f64> {
        let mut prod = 1.0;
        for &ut in u {
            prod *= self.spatial_axis(ut)?;
        }
        Ok(prod)
    }
}

/// `sin(x)/x`, continuously extended at the origin.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// d-variate sinc, the product of axis factors.
pub fn sinc_nd(x: &[f64]) -> f64 {
    x.iter().map(|&t| sinc(t)).product()
}

/// Centered cardinal B-spline `B_n` of order `n` (support `[-n/2, n/2]`),
/// evaluated by the Cox–de Boor recursion on integer knots.
pub fn bspline_centered(order: usize, x: f64) -> f64 {
    debug_assert!(order >= 1);
    let t = x + order as f64 / 2.0;
    if !(0.0..order as f64).contains(&t) {
        return 0.0;
    }
    let cell = t.floor() as usize;
    // b[j] holds M_p(t - j); only j = cell is nonzero at order 1.
    let mut b = vec![0.0f64; order];
    b[cell] = 1.0;
    for p in 2..=order {
        let denom = (p - 1) as f64;
        for j in 0..=(order - p) {
            let s = t - j as f64;
            b[j] = (s * b[j] + (p as f64 - s) * b[j + 1]) / denom;
        }
    }
    b[0]
}

/// The asymmetric Dirichlet kernel sum `Σ_{k=-M/2}^{M/2-1} e^{2πikt}`,
/// in closed form `sin((M−1)πt)/sin(πt) + e^{−iMπt}` with the integer-`t`
/// limit `M` taken exactly.
pub fn dirichlet_factor(bandwidth: usize, t: f64) -> Complex64 {
    let m = bandwidth as f64;
    if t == t.round() {
        return Complex64::new(m, 0.0);
    }
    let ratio = ((m - 1.0) * PI * t).sin() / (PI * t).sin();
    let phase = Complex64::from_polar(1.0, -m * PI * t);
    Complex64::new(ratio, 0.0) + phase
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_dirichlet_sum(bandwidth: usize, t: f64) -> Complex64 {
        let half = bandwidth as i64 / 2;
        (-half..half)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * t))
            .sum()
    }

    #[test]
    fn oversampled_size_examples() {
        assert_eq!(oversampled_size(1.0, 12).unwrap(), 12);
        assert_eq!(oversampled_size(2.0, 16).unwrap(), 32);
        // ⌈⌈1.5·10⌉/2⌉·2 = ⌈15/2⌉·2 = 16
        assert_eq!(oversampled_size(1.5, 10).unwrap(), 16);
        assert!(oversampled_size(0.99, 12).is_err());
    }

    #[test]
    fn dirichlet_hat_is_one() {
        let w = WindowSpec::new(WindowKind::Dirichlet, 4, 1.0, 12).unwrap();
        for k in w.bandwidth() as i64 / -2..w.bandwidth() as i64 / 2 {
            assert_eq!(w.hat_axis(k), 1.0);
        }
        assert_eq!(w.hat(&[0, 3]).unwrap(), 1.0);
        assert!(w.hat(&[6]).is_err());
    }

    #[test]
    fn bspline_hat_center() {
        let w = WindowSpec::new(WindowKind::BSpline, 4, 2.0, 16).unwrap();
        assert_eq!(w.hat(&[0]).unwrap(), 1.0 / 32.0);
        assert!((w.hat(&[0, 0]).unwrap() - 1.0 / (32.0 * 32.0)).abs() < 1e-18);
    }

    #[test]
    fn bspline_hat_matches_quadrature_oracle() {
        // ∫ B_4(16 x) e^{-2πi·4x} dx over the support, Simpson's rule.
        let m = 2usize;
        let msigma = 16usize;
        let k = 4i64;
        let a = -(m as f64) / msigma as f64;
        let b = m as f64 / msigma as f64;
        let n = 4000;
        let h = (b - a) / n as f64;
        let f = |x: f64| {
            let w = bspline_centered(2 * m, msigma as f64 * x);
            Complex64::from_polar(w, -2.0 * PI * k as f64 * x)
        };
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = acc * (h / 3.0);

        let spec = WindowSpec::new(WindowKind::BSpline, m, 1.0, msigma).unwrap();
        let expected = spec.hat_axis(k);
        assert!((integral.re - expected).abs() < 1e-10);
        assert!(integral.im.abs() < 1e-10);
        // And the stated closed form.
        let closed = sinc(PI / 4.0).powi(4) / 16.0;
        assert!((expected - closed).abs() < 1e-15);
    }

    #[test]
    fn spatial_support_and_center() {
        let m = 3usize;
        let w = WindowSpec::new(WindowKind::BSpline, m, 2.0, 16).unwrap();
        let edge = m as f64 / w.oversampled() as f64;
        assert_eq!(w.spatial_axis(edge).unwrap(), 0.0);
        assert_eq!(w.spatial_axis(edge + 0.01).unwrap(), 0.0);
        assert_eq!(w.spatial_axis(0.4).unwrap(), 0.0);
        let center = bspline_centered(2 * m, 0.0);
        assert_eq!(w.spatial(&[0.0, 0.0]).unwrap(), center * center);
        assert!(w.spatial_axis(edge * 0.5).unwrap() > 0.0);

        let dir = WindowSpec::new(WindowKind::Dirichlet, m, 2.0, 16).unwrap();
        assert!(matches!(
            dir.spatial_axis(0.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn spatial_is_periodic() {
        // Steps of 1/256 keep u ± k exactly representable, so the periodized
        // values must agree bit for bit.
        let w = WindowSpec::new(WindowKind::BSpline, 4, 2.0, 12).unwrap();
        for i in 0..256 {
            let u = -0.5 + i as f64 / 256.0;
            let v = w.spatial_axis(u).unwrap();
            assert_eq!(w.spatial_axis(u + 1.0).unwrap(), v);
            assert_eq!(w.spatial_axis(u - 3.0).unwrap(), v);
        }
    }

    #[test]
    fn bspline_partition_and_symmetry() {
        // Integer translates of B_n form a partition of unity and B_n is even.
        for order in [2usize, 4, 8, 12] {
            for i in 0..50 {
                let x = -0.5 + i as f64 * 0.02;
                let sum: f64 = (-(order as i64)..=order as i64)
                    .map(|j| bspline_centered(order, x - j as f64))
                    .sum();
                assert!((sum - 1.0).abs() < 1e-12, "order {order} x {x}: {sum}");
                assert!(
                    (bspline_centered(order, x) - bspline_centered(order, -x)).abs() < 1e-12
                );
            }
        }
    }

    #[test]
    fn dirichlet_factor_examples() {
        assert_eq!(dirichlet_factor(4, 0.0), Complex64::new(4.0, 0.0));
        assert_eq!(dirichlet_factor(8, -3.0), Complex64::new(8.0, 0.0));
        // 4-term direct sum at t = 1/4.
        let direct = direct_dirichlet_sum(4, 0.25);
        let closed = dirichlet_factor(4, 0.25);
        assert!((direct - closed).norm() < 1e-12);
    }

    #[test]
    fn dirichlet_factor_matches_direct_sum() {
        let mut state = 1u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for bandwidth in [2usize, 4, 12, 32] {
            for _ in 0..250 {
                let t = next() - 0.5;
                let direct = direct_dirichlet_sum(bandwidth, t);
                let closed = dirichlet_factor(bandwidth, t);
                assert!(
                    (direct - closed).norm() < 1e-10,
                    "M={bandwidth} t={t}: {direct} vs {closed}"
                );
                assert!(closed.norm() <= bandwidth as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn sampled_window_dft_approximates_hat() {
        // DFT of the grid-sampled periodized window vs Mσ·ŵ(k); agreement is
        // limited only by aliasing of the window tail.
        let spec = WindowSpec::new(WindowKind::BSpline, 4, 2.0, 16).unwrap();
        let ms = spec.oversampled();
        let samples: Vec<f64> = (0..ms)
            .map(|l| {
                let ls = if l >= ms / 2 { l as i64 - ms as i64 } else { l as i64 };
                spec.spatial_axis(ls as f64 / ms as f64).unwrap()
            })
            .collect();
        for k in -(spec.bandwidth() as i64) / 2..spec.bandwidth() as i64 / 2 {
            let mut acc = Complex64::default();
            for (l, &s) in samples.iter().enumerate() {
                let ls = if l >= ms / 2 { l as i64 - ms as i64 } else { l as i64 };
                acc += Complex64::from_polar(s, -2.0 * PI * k as f64 * ls as f64 / ms as f64);
            }
            let expected = ms as f64 * spec.hat_axis(k);
            assert!(
                (acc.re - expected).abs() / expected <= 1e-3 && acc.im.abs() < 1e-12,
                "k={k}: {} vs {expected}",
                acc.re
            );
        }
    }
}
