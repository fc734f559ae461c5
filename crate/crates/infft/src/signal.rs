//! Deterministic test signals: the Shepp–Logan phantom rasterized at pixel
//! centers (consumed as Fourier coefficients) and the bandlimited tensorized
//! triangular pulse with its closed-form inverse transform.

use num_complex::Complex64;
use std::io::Write;

use crate::domain::{CoefficientVector, FrequencyBox};
use crate::window::sinc;
use crate::{domain_err, Result};

/// The ten ellipses of the standard Shepp–Logan head phantom:
/// (intensity, semi-axis a, semi-axis b, center x, center y, rotation in
/// degrees), on the frame `[-1, 1]²`.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.98, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.02, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.02, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.01, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.01, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.01, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.01, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.01, 0.023, 0.023, 0.0, -0.605, 0.0),
    (0.01, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// An `M × M` real intensity grid, row-major with row index `p` and column
/// index `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomImage {
    size: usize,
    data: Vec<f64>,
}

impl PhantomImage {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, p: usize, q: usize) -> f64 {
        self.data[p * self.size + q]
    }

    /// Reinterprets the grid as complex Fourier coefficients on `I_M`
    /// (pixel `(p, q)` ↔ frequency `(p − M/2, q − M/2)`).
    pub fn as_coefficients(&self) -> Result<CoefficientVector> {
        let freq_box = FrequencyBox::new(2, self.size)?;
        CoefficientVector::new(
            freq_box,
            self.data
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
    }
}

/// Rasterizes the phantom at the pixel centers
/// `(−1/2 + (p+1/2)/M, −1/2 + (q+1/2)/M)`, summing ellipse intensities.
/// Row `p` runs top-down and column `q` left-right in the usual image frame.
pub fn shepp_logan(size: usize) -> Result<PhantomImage> {
    if size < 8 || size % 2 != 0 {
        return domain_err(format!("phantom size must be even and >= 8, got {size}"));
    }
    let m = size as f64;
    let mut data = vec![0.0f64; size * size];
    for p in 0..size {
        for q in 0..size {
            // Map to [-1, 1]²; the row axis points down, the y axis up.
            let x = 2.0 * (-0.5 + (q as f64 + 0.5) / m);
            let y = -2.0 * (-0.5 + (p as f64 + 0.5) / m);
            let mut v = 0.0;
            for &(intensity, a, b, x0, y0, phi_deg) in &ELLIPSES {
                let phi = phi_deg.to_radians();
                let (s, c) = phi.sin_cos();
                let dx = x - x0;
                let dy = y - y0;
                let u = (c * dx + s * dy) / a;
                let w = (-s * dx + c * dy) / b;
                if u * u + w * w <= 1.0 {
                    v += intensity;
                }
            }
            data[p * size + q] = v;
        }
    }
    Ok(PhantomImage { size, data })
}

/// Bandlimited test signal: `f̂(v) = Π_t max(0, 1 − |v_t|/b)` with inverse
/// transform `f(x) = b^d Π_t sinc²(bπ x_t)`.
#[derive(Debug, Clone, Copy)]
pub struct TriangularPulse {
    dim: usize,
    bandwidth: usize,
    pulse: usize,
}

impl TriangularPulse {
    /// `b` must not exceed `M/2`, so the pulse support fits the box.
    pub fn new(dim: usize, bandwidth: usize, pulse: usize) -> Result<Self> {
        let freq_box = FrequencyBox::new(dim, bandwidth)?;
        if pulse == 0 || pulse > bandwidth / 2 {
            return domain_err(format!(
                "pulse bandwidth {pulse} outside (0, {}]",
                bandwidth / 2
            ));
        }
        Ok(Self {
            dim,
            bandwidth: freq_box.bandwidth(),
            pulse,
        })
    }

    pub fn freq_box(&self) -> FrequencyBox {
        FrequencyBox::new(self.dim, self.bandwidth).expect("validated at construction")
    }

    /// `f̂` at an arbitrary frequency point.
    pub fn coeff(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        let b = self.pulse as f64;
        v.iter().map(|&vt| (1.0 - vt.abs() / b).max(0.0)).product()
    }

    /// `f` at an arbitrary spatial point.
    pub fn space(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let b = self.pulse as f64;
        x.iter()
            .map(|&xt| {
                let s = sinc(b * std::f64::consts::PI * xt);
                b * s * s
            })
            .product()
    }

    /// Samples of `f̂` at the integer frequencies of `I_M`.
    pub fn coefficients_on_box(&self) -> CoefficientVector {
        let freq_box = self.freq_box();
        let values = freq_box
            .indices()
            .map(|k| {
                let v: Vec<f64> = k.iter().map(|&kt| kt as f64).collect();
                Complex64::new(self.coeff(&v), 0.0)
            })
            .collect();
        CoefficientVector::new(freq_box, values).expect("lengths match by construction")
    }
}

/// Writes a real grid as binary 8-bit PGM (P5, maxval 255), scaling linearly
/// from `[0, max]`; negative values clamp to black.
pub fn write_pgm<W: Write>(data: &[f64], width: usize, out: &mut W) -> Result<()> {
    if width == 0 || data.len() % width != 0 {
        return domain_err("grid length is not a multiple of its width");
    }
    let height = data.len() / width;
    let max = data.iter().cloned().fold(0.0f64, f64::max);
    writeln!(out, "P5")?;
    writeln!(out, "{width} {height}")?;
    writeln!(out, "255")?;
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes: Vec<u8> = data
        .iter()
        .map(|&v| (v.max(0.0) * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Writes a grid as raw little-endian f64 values, preserving exact bits.
pub fn write_f64_grid<W: Write>(data: &[f64], out: &mut W) -> Result<()> {
    for &v in data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads back a grid written by [`write_f64_grid`].
pub fn read_f64_grid<R: std::io::Read>(input: &mut R) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return domain_err("raw grid byte length is not a multiple of 8");
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent rasterizer: precomputed quadratic forms instead of the
    /// rotate-then-test evaluation.
    fn reference_phantom(size: usize) -> Vec<f64> {
        let m = size as f64;
        let mut out = vec![0.0; size * size];
        for &(intensity, a, b, x0, y0, phi_deg) in &ELLIPSES {
            let phi = phi_deg.to_radians();
            let (s, c) = phi.sin_cos();
            // Quadratic form coefficients of the rotated ellipse.
            let qa = c * c / (a * a) + s * s / (b * b);
            let qb = 2.0 * c * s * (1.0 / (a * a) - 1.0 / (b * b));
            let qc = s * s / (a * a) + c * c / (b * b);
            for p in 0..size {
                for q in 0..size {
                    let x = 2.0 * (-0.5 + (q as f64 + 0.5) / m) - x0;
                    let y = -2.0 * (-0.5 + (p as f64 + 0.5) / m) - y0;
                    if qa * x * x + qb * x * y + qc * y * y <= 1.0 {
                        out[p * size + q] += intensity;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn phantom_examples() {
        let img = shepp_logan(64).unwrap();
        assert!(img.pixel(32, 32) > 0.0);
        assert_eq!(img.pixel(0, 0), 0.0);
        assert_eq!(img.pixel(0, 63), 0.0);
        assert_eq!(img.pixel(63, 0), 0.0);
        assert_eq!(img.pixel(63, 63), 0.0);
        assert!(img.data().iter().all(|&v| (-1e-12..=1.02).contains(&v)));
        assert!(shepp_logan(4).is_err());
        assert!(shepp_logan(7).is_err());
    }

    #[test]
    fn phantom_matches_reference_rasterization() {
        let img = shepp_logan(64).unwrap();
        let reference = reference_phantom(64);
        for (a, b) in img.data().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_examples() {
        let pulse = TriangularPulse::new(2, 64, 24).unwrap();
        assert_eq!(pulse.coeff(&[0.0, 0.0]), 1.0);
        assert_eq!(pulse.coeff(&[24.0, 0.0]), 0.0);
        assert_eq!(pulse.coeff(&[0.0, -30.0]), 0.0);
        assert_eq!(pulse.space(&[0.0, 0.0]), 24.0 * 24.0);
        assert!(TriangularPulse::new(2, 64, 33).is_err());

        let coeffs = pulse.coefficients_on_box();
        assert!(coeffs.values.iter().all(|v| v.im == 0.0 && v.re >= 0.0));
        // Even symmetry on the stored box.
        let bx = pulse.freq_box();
        for k1 in -20i64..20 {
            for k2 in -20i64..20 {
                let a = coeffs.values[bx.linearize(&[k1, k2]).unwrap()];
                let b = coeffs.values[bx.linearize(&[-k1, -k2]).unwrap()];
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn pulse_matches_quadrature_oracle() {
        // f(x) vs 2-d Simpson integration of f̂ over its support.
        let pulse = TriangularPulse::new(2, 8, 3).unwrap();
        let b = 3.0f64;
        let n = 600usize;
        let h = 2.0 * b / n as f64;
        let simpson_w = |i: usize| {
            if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        for x in [[0.13, -0.27], [0.0, 0.4], [-0.31, -0.08]] {
            let mut acc = 0.0;
            for i in 0..=n {
                let v1 = -b + i as f64 * h;
                let mut inner = 0.0;
                for j in 0..=n {
                    let v2 = -b + j as f64 * h;
                    let phase = std::f64::consts::TAU * (v1 * x[0] + v2 * x[1]);
                    inner += simpson_w(j) * pulse.coeff(&[v1, v2]) * phase.cos();
                }
                acc += simpson_w(i) * inner * (h / 3.0);
            }
            acc *= h / 3.0;
            let exact = pulse.space(&x);
            assert!((acc - exact).abs() < 1e-6, "{acc} vs {exact}");
        }
    }

    #[test]
    fn pgm_and_raw_export() {
        let img = shepp_logan(16).unwrap();
        let mut pgm = Vec::new();
        write_pgm(img.data(), 16, &mut pgm).unwrap();
        assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);

        let mut raw = Vec::new();
        write_f64_grid(img.data(), &mut raw).unwrap();
        let back = read_f64_grid(&mut std::io::Cursor::new(raw)).unwrap();
        assert_eq!(back, img.data());
    }
}
