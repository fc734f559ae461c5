//! d-variate DFTs on a cubic grid, backed by rustfft (mixed radix, so the
//! per-axis size may be any even number). Both directions are unscaled.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub(crate) struct CubeFft {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CubeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CubeFft")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl CubeFft {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        CubeFft {
            dim,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// `X[b] = Σ_n x[n] e^{-2πi n·b/N}` along every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&self.fwd.clone(), data);
    }

    /// `X[b] = Σ_n x[n] e^{+2πi n·b/N}` along every axis.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&self.inv.clone(), data);
    }

    fn apply(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        let n = self.n;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Last axis is contiguous.
        for chunk in data.chunks_exact_mut(n) {
            fft.process_with_scratch(chunk, &mut scratch);
        }
        // Remaining axes via gather/scatter.
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base_block in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let base = base_block + off;
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + t * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (t, &v) in line.iter().enumerate() {
                        data[base + t * stride] = v;
                    }
                }
            }
        }
    }
}
