//! Power-of-two complex FFT and the 2-D transforms used by the grid solver.
//!
//! With the `std` feature the 1-D transforms go through `rustfft`; without
//! it a built-in radix-2 transform is used.
//!
//! The 2-D forward transform leaves its output *transposed* (`out[kx][ky]`),
//! and the inverse expects that layout, which saves one transpose per
//! round trip. Spectra that are only ever multiplied pointwise do not care.

use alloc::vec;
use alloc::vec::Vec;

pub use num_complex::Complex64;

use crate::math;
use crate::par::{for_each_chunk_mut, Execution};

/// Smallest transform length `≥ min` the active backend handles well:
/// 5-smooth (`2^a 3^b 5^c`) with `rustfft`, a power of two otherwise.
pub fn fast_len(min: usize) -> usize {
    let min = min.max(1);
    #[cfg(feature = "std")]
    {
        let mut best = min.next_power_of_two();
        let mut p5 = 1usize;
        while p5 < best {
            let mut p35 = p5;
            while p35 < best {
                let mut len = p35;
                while len < min {
                    len *= 2;
                }
                best = best.min(len);
                p35 *= 3;
            }
            p5 *= 5;
        }
        best
    }
    #[cfg(not(feature = "std"))]
    min.next_power_of_two()
}

/// Rows handed to one task by the batched row transforms.
const ROWS_PER_TASK: usize = 16;

/// In-place complex FFT of a fixed length.
#[derive(Clone)]
pub struct Fft {
    n: usize,
    #[cfg_attr(feature = "std", allow(dead_code))]
    twiddles: Vec<Complex64>,
    #[cfg_attr(feature = "std", allow(dead_code))]
    bitrev: Vec<u32>,
    #[cfg(feature = "std")]
    plans: [std::sync::Arc<dyn rustfft::Fft<f64>>; 2],
}

impl core::fmt::Debug for Fft {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    /// # Panics
    /// Without the `std` feature, if `n` is not a power of two.
    pub fn new(n: usize) -> Self {
        #[cfg(not(feature = "std"))]
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let t = -core::f64::consts::TAU * k as f64 / n as f64;
                Complex64::new(math::cos(t), math::sin(t))
            })
            .collect();
        // the radix-2 tables are only used for power-of-two lengths
        let bits = if n.is_power_of_two() {
            n.trailing_zeros()
        } else {
            0
        };
        let bitrev = (0..n as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        #[cfg(feature = "std")]
        let plans = {
            let mut planner = rustfft::FftPlanner::new();
            [planner.plan_fft_forward(n), planner.plan_fft_inverse(n)]
        };
        Self {
            n,
            twiddles,
            bitrev,
            #[cfg(feature = "std")]
            plans,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalised forward (`e^{-2πi jk/n}`) transform of every
    /// length-`n` row in `buf`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.process(buf, false);
    }

    /// Unnormalised inverse transform (no `1/n`) of every row in `buf`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.process(buf, true);
    }

    /// [`Fft::forward`] with rows spread over the thread pool.
    pub fn forward_rows(&self, buf: &mut [Complex64], exec: Execution) {
        for_each_chunk_mut(buf, ROWS_PER_TASK * self.n, exec, |_, rows| {
            self.forward(rows)
        });
    }

    /// [`Fft::inverse`] with rows spread over the thread pool.
    pub fn inverse_rows(&self, buf: &mut [Complex64], exec: Execution) {
        for_each_chunk_mut(buf, ROWS_PER_TASK * self.n, exec, |_, rows| {
            self.inverse(rows)
        });
    }

    fn process(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len() % self.n.max(1), 0);
        #[cfg(feature = "std")]
        {
            if !buf.is_empty() {
                self.plans[inverse as usize].process(buf);
            }
        }
        #[cfg(not(feature = "std"))]
        for row in buf.chunks_mut(self.n) {
            self.radix2(row, inverse);
        }
    }

    #[cfg_attr(feature = "std", allow(dead_code))]
    fn radix2(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let t = w * buf[start + j + half];
                    let u = buf[start + j];
                    buf[start + j] = u + t;
                    buf[start + j + half] = u - t;
                }
            }
            size *= 2;
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize, src_rows: usize) {
    const B: usize = 32;
    for rb in (0..src_rows).step_by(B) {
        for cb in (0..n).step_by(B) {
            for r in rb..(rb + B).min(src_rows) {
                for c in cb..(cb + B).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

/// 2-D DFT of an `n × n` row-major grid whose rows at or beyond
/// `active_rows` are zero. Returns the spectrum transposed.
pub fn fft2_forward_transposed(
    fft: &Fft,
    grid: &mut [Complex64],
    active_rows: usize,
    exec: Execution,
) -> Vec<Complex64> {
    let n = fft.len();
    fft.forward_rows(&mut grid[..active_rows * n], exec);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(grid, &mut out, n, active_rows);
    fft.forward_rows(&mut out, exec);
    out
}

/// Inverse of [`fft2_forward_transposed`], normalised, returning only the
/// first `needed_rows` rows of the spatial grid (row-major, `needed_rows × n`).
pub fn fft2_inverse_from_transposed(
    fft: &Fft,
    spectrum: &mut [Complex64],
    needed_rows: usize,
    exec: Execution,
) -> Vec<Complex64> {
    let n = fft.len();
    fft.inverse_rows(spectrum, exec);
    // spectrum[c][r] -> out[r][c] for r < needed_rows
    let mut out = vec![Complex64::new(0.0, 0.0); needed_rows * n];
    const B: usize = 32;
    for cb in (0..n).step_by(B) {
        for rb in (0..needed_rows).step_by(B) {
            for c in cb..(cb + B).min(n) {
                for r in rb..(rb + B).min(needed_rows) {
                    out[r * n + c] = spectrum[c * n + r];
                }
            }
        }
    }
    let scale = 1.0 / (n * n) as f64;
    for_each_chunk_mut(&mut out, ROWS_PER_TASK * n, exec, |_, rows| {
        fft.inverse(rows);
        for v in rows.iter_mut() {
            *v *= scale;
        }
    });
    out
}
