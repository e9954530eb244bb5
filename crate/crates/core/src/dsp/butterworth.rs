//! Even-order Butterworth low/high-pass filters as cascaded biquads.
//!
//! Each conjugate pole pair of the analog prototype becomes one second-order
//! section with quality factor `Q_k = 1 / (2·sin((2k+1)π / 2N))`, mapped to
//! the z-plane by the bilinear transform with the cutoff pre-warped through
//! `K = tan(π·fc/fs)`. Sections run in transposed direct form II from zero
//! initial state.

use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// Normalised biquad: `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub a1: T,
    pub a2: T,
}

impl<T: Real> Biquad<T> {
    /// Magnitude response at `freq` Hz for sample rate `fs`.
    pub fn magnitude(&self, freq: T, fs: T) -> T {
        let w = T::TAU() * freq / fs;
        let (c1, s1) = (w.cos(), w.sin());
        let (c2, s2) = ((w + w).cos(), (w + w).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = -(self.b1 * s1 + self.b2 * s2);
        let den_re = T::one() + self.a1 * c1 + self.a2 * c2;
        let den_im = -(self.a1 * s1 + self.a2 * s2);
        ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosCascade<T> {
    sections: Vec<Biquad<T>>,
}

impl<T: Real> SosCascade<T> {
    /// Designs an order-`order` Butterworth filter. `order` must be even and
    /// the cutoff must sit strictly between 0 and Nyquist.
    pub fn butterworth(kind: FilterKind, order: usize, cutoff: T, fs: T) -> Result<Self> {
        if order == 0 || order % 2 != 0 {
            return Err(Error::Config(format!("filter order {order} must be a positive even integer")));
        }
        let nyquist = fs / T::lit(2.0);
        if !(fs > T::zero()) || !(cutoff > T::zero()) || !(cutoff < nyquist) {
            return Err(Error::Config(format!(
                "cutoff {cutoff:?} Hz must lie in (0, {nyquist:?}) Hz"
            )));
        }
        let k = (T::PI() * cutoff / fs).tan();
        let k2 = k * k;
        let two = T::lit(2.0);
        let n = T::from_usize(order).unwrap();
        let sections = (0..order / 2)
            .map(|i| {
                let angle = T::PI() * T::from_usize(2 * i + 1).unwrap() / (two * n);
                let q = T::one() / (two * angle.sin());
                let norm = T::one() / (T::one() + k / q + k2);
                let a1 = two * (k2 - T::one()) * norm;
                let a2 = (T::one() - k / q + k2) * norm;
                match kind {
                    FilterKind::Lowpass => {
                        let b0 = k2 * norm;
                        Biquad { b0, b1: two * b0, b2: b0, a1, a2 }
                    }
                    FilterKind::Highpass => Biquad { b0: norm, b1: -two * norm, b2: norm, a1, a2 },
                }
            })
            .collect();
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad<T>] {
        &self.sections
    }

    pub fn magnitude(&self, freq: T, fs: T) -> T {
        self.sections.iter().fold(T::one(), |acc, s| acc * s.magnitude(freq, fs))
    }

    /// Causal filtering from zero initial conditions; output length equals input length.
    pub fn filter(&self, input: &[T]) -> Vec<T> {
        let mut buf = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (T::zero(), T::zero());
            for v in buf.iter_mut() {
                let x = *v;
                let y = s.b0 * x + z1;
                z1 = s.b1 * x - s.a1 * y + z2;
                z2 = s.b2 * x - s.a2 * y;
                *v = y;
            }
        }
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_order_and_bad_cutoff() {
        assert!(SosCascade::<f64>::butterworth(FilterKind::Lowpass, 3, 10.0, 300.0).is_err());
        assert!(SosCascade::<f64>::butterworth(FilterKind::Lowpass, 4, 150.0, 300.0).is_err());
        assert!(SosCascade::<f64>::butterworth(FilterKind::Highpass, 4, 0.0, 300.0).is_err());
    }

    #[test]
    fn half_power_at_cutoff() {
        for order in [2, 4, 6, 8] {
            for kind in [FilterKind::Lowpass, FilterKind::Highpass] {
                let f = SosCascade::<f64>::butterworth(kind, order, 20.0, 300.0).unwrap();
                let m = f.magnitude(20.0, 300.0);
                assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{kind:?} {order}: {m}");
            }
        }
    }

    #[test]
    fn dc_and_nyquist_gains() {
        let lp = SosCascade::<f64>::butterworth(FilterKind::Lowpass, 4, 50.0, 300.0).unwrap();
        let hp = SosCascade::<f64>::butterworth(FilterKind::Highpass, 4, 1.0, 300.0).unwrap();
        assert!((lp.magnitude(0.0, 300.0) - 1.0).abs() < 1e-12);
        assert!(hp.magnitude(0.0, 300.0) < 1e-12);
        assert!(lp.magnitude(149.999, 300.0) < 1e-6);
        assert!((hp.magnitude(149.999, 300.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_in_zero_out() {
        let f = SosCascade::<f32>::butterworth(FilterKind::Highpass, 4, 1.0, 300.0).unwrap();
        assert!(f.filter(&[0.0; 64]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_sums_to_dc_gain() {
        let lp = SosCascade::<f64>::butterworth(FilterKind::Lowpass, 4, 30.0, 300.0).unwrap();
        let mut x = vec![0.0; 2000];
        x[0] = 1.0;
        let s: f64 = lp.filter(&x).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}
