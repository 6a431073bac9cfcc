//! Reference kernels: every product and sum is rounded separately.

use super::ComplexPair;
use num_complex::Complex64;

#[inline]
pub fn cmul(a: Complex64, b: Complex64) -> Complex64 {
    Complex64::new(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)
}

#[inline]
pub fn cmul2(a: ComplexPair, b: ComplexPair) -> ComplexPair {
    ComplexPair::new(cmul(a.lane(0), b.lane(0)), cmul(a.lane(1), b.lane(1)))
}

#[inline]
pub fn cfma2(a: ComplexPair, b: ComplexPair, acc: ComplexPair) -> ComplexPair {
    ComplexPair::new(
        acc.lane(0) + cmul(a.lane(0), b.lane(0)),
        acc.lane(1) + cmul(a.lane(1), b.lane(1)),
    )
}

/// Left-to-right accumulation.
pub fn cdot(a: &[Complex64], b: &[Complex64], conjugate_a: bool) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let x = if conjugate_a { x.conj() } else { *x };
        sum += cmul(x, *y);
    }
    sum
}
