//! Iterative radix-2 decimation-in-time FFT.
//!
//! Forward: `X[k] = Σ x[n]·exp(−2πi·kn/N)`. Inverse applies the conjugate
//! kernel and the `1/N` normalisation. Lengths must be powers of two.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::Real;

/// Precomputed twiddles and bit-reversal permutation for one length.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    rev: Vec<usize>,
}

impl<T: Real> FftPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Length(format!("FFT length {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // Each twiddle evaluated directly; a running product drifts at large N.
        let nf = T::from_usize(n).unwrap();
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -T::TAU() * T::from_usize(k).unwrap() / nf;
                Complex::new(theta.cos(), theta.sin())
            })
            .collect();
        Ok(Self { n, twiddles, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform of `buf`, whose length must equal the plan length.
    pub fn process(&self, buf: &mut [Complex<T>], inverse: bool) -> Result<()> {
        if buf.len() != self.n {
            return Err(Error::Length(format!(
                "buffer length {} does not match plan length {}",
                buf.len(),
                self.n
            )));
        }
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
        if inverse {
            let scale = T::one() / T::from_usize(n).unwrap();
            for v in buf.iter_mut() {
                *v = *v * scale;
            }
        }
        Ok(())
    }
}

/// Out-of-place transform; builds a one-shot plan.
pub fn fft<T: Real>(signal: &[Complex<T>], inverse: bool) -> Result<Vec<Complex<T>>> {
    let plan = FftPlan::new(signal.len())?;
    let mut out = signal.to_vec();
    plan.process(&mut out, inverse)?;
    Ok(out)
}

/// Forward transform of a real signal.
pub fn fft_real<T: Real>(signal: &[T]) -> Result<Vec<Complex<T>>> {
    let buf: Vec<Complex<T>> = signal.iter().map(|&x| Complex::new(x, T::zero())).collect();
    fft(&buf, false)
}
