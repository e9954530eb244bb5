use crate::Real;

/// Symmetric Hann window: `0.5·(1 − cos(2πm/(n−1)))`.
///
/// A length-1 window is the single weight `1`.
pub fn hann<T: Real>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let denom = T::from_usize(n - 1).unwrap();
    let half = T::lit(0.5);
    (0..n)
        .map(|m| {
            let phase = T::TAU() * T::from_usize(m).unwrap() / denom;
            half * (T::one() - phase.cos())
        })
        .collect()
}
