use super::ComplexPair;
use num_complex::Complex64;
use std::arch::x86_64::*;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn available() -> bool {
    is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")
}

#[inline]
#[target_feature(enable = "avx2,fma")]
unsafe fn load(p: &ComplexPair) -> __m256d {
    _mm256_load_pd(p.0.as_ptr())
}

#[inline]
#[target_feature(enable = "avx2,fma")]
unsafe fn store(v: __m256d) -> ComplexPair {
    let mut out = ComplexPair::ZERO;
    _mm256_store_pd(out.0.as_mut_ptr(), v);
    out
}

/// # Safety
/// Caller must ensure AVX2 and FMA are available.
#[target_feature(enable = "avx2,fma")]
pub unsafe fn cmul2(a: ComplexPair, b: ComplexPair) -> ComplexPair {
    let a = load(&a);
    let b = load(&b);
    let b_swap = _mm256_shuffle_pd(b, b, 5);
    let a_im = _mm256_shuffle_pd(a, a, 15);
    let a_re = _mm256_shuffle_pd(a, a, 0);
    let a_im_b_swap = _mm256_mul_pd(a_im, b_swap);
    store(_mm256_fmaddsub_pd(a_re, b, a_im_b_swap))
}

/// # Safety
/// Caller must ensure AVX2 and FMA are available.
#[target_feature(enable = "avx2,fma")]
pub unsafe fn cfma2(a: ComplexPair, b: ComplexPair, acc: ComplexPair) -> ComplexPair {
    let a = load(&a);
    let b = load(&b);
    let acc = load(&acc);
    let b_swap = _mm256_shuffle_pd(b, b, 5);
    let a_im = _mm256_shuffle_pd(a, a, 15);
    let a_re = _mm256_shuffle_pd(a, a, 0);
    let t = _mm256_fmaddsub_pd(a_im, b_swap, acc);
    store(_mm256_fmaddsub_pd(a_re, b, t))
}

/// `out[i] = a[i] * b[i]` for `i < out.len()`.
///
/// # Safety
/// Caller must ensure AVX2 and FMA are available and `a`, `b` are at least
/// as long as `out`.
#[target_feature(enable = "avx2,fma")]
pub unsafe fn cmul_slice(a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
    let n = out.len();
    let mut k = 0;
    while k + 1 < n {
        cmul2(ComplexPair::load(a, k), ComplexPair::load(b, k)).store(out, k);
        k += 2;
    }
    if k < n {
        out[k] = cmul2(ComplexPair::new(a[k], ZERO), ComplexPair::new(b[k], ZERO)).lane(0);
    }
}

/// `acc[i] += a[i] * b[i]` for `i < acc.len()`.
///
/// # Safety
/// As for [`cmul_slice`].
#[target_feature(enable = "avx2,fma")]
pub unsafe fn cfma_slice(a: &[Complex64], b: &[Complex64], acc: &mut [Complex64]) {
    let n = acc.len();
    let mut k = 0;
    while k + 1 < n {
        cfma2(ComplexPair::load(a, k), ComplexPair::load(b, k), ComplexPair::load(acc, k)).store(acc, k);
        k += 2;
    }
    if k < n {
        acc[k] = cfma2(ComplexPair::new(a[k], ZERO), ComplexPair::new(b[k], ZERO), ComplexPair::new(acc[k], ZERO)).lane(0);
    }
}

/// Same accumulation order as the portable vectorized `cdot`, with the
/// accumulator held in a register.
///
/// # Safety
/// Caller must ensure AVX2 and FMA are available and `a.len() == b.len()`.
#[target_feature(enable = "avx2,fma")]
pub unsafe fn cdot(a: &[Complex64], b: &[Complex64], conjugate_a: bool) -> Complex64 {
    let n = a.len();
    // flips the sign of the imaginary parts
    let conj_mask = if conjugate_a { _mm256_set_pd(-0.0, 0.0, -0.0, 0.0) } else { _mm256_setzero_pd() };
    let mut acc = _mm256_setzero_pd();
    let mut k = 0;
    while k + 1 < n {
        // Complex64 is repr(C) {re, im}, so two elements are four packed doubles
        let va = _mm256_xor_pd(_mm256_loadu_pd(a.as_ptr().add(k) as *const f64), conj_mask);
        let vb = _mm256_loadu_pd(b.as_ptr().add(k) as *const f64);
        let b_swap = _mm256_shuffle_pd(vb, vb, 5);
        let a_im = _mm256_shuffle_pd(va, va, 15);
        let a_re = _mm256_shuffle_pd(va, va, 0);
        acc = _mm256_fmaddsub_pd(a_re, vb, _mm256_fmaddsub_pd(a_im, b_swap, acc));
        k += 2;
    }
    let mut acc = store(acc);
    if k < n {
        let ak = if conjugate_a { a[k].conj() } else { a[k] };
        acc = cfma2(ComplexPair::new(ak, ZERO), ComplexPair::new(b[k], ZERO), acc);
    }
    acc.horizontal_sum()
}
