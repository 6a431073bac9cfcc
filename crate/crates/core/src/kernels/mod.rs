//! Width-2 complex double-precision kernels.
//!
//! A [`ComplexPair`] holds two complex values interleaved as
//! `[re0, im0, re1, im1]`, the layout of one 256-bit register. The
//! vectorized product follows the shuffle/FMA dataflow
//!
//! ```text
//! bSwap     = [b.im0, b.re0, b.im1, b.re1]
//! aIm       = [a.im0, a.im0, a.im1, a.im1]
//! aRe       = [a.re0, a.re0, a.re1, a.re1]
//! aIm_bSwap = aIm * bSwap
//! res       = fmaddsub(aRe, b, aIm_bSwap)   // even lanes subtract, odd lanes add
//! ```
//!
//! so each output component is produced with one rounded product and one
//! fused multiply-add. The scalar reference rounds every product and sum
//! separately; the two paths agree to within 2 ulp of the magnitude of the
//! terms being combined (see [`component_scale`]).
//!
//! On x86_64 with AVX2 and FMA the vectorized path runs on intrinsics;
//! everywhere else it is emulated with `f64::mul_add`, which has identical
//! rounding semantics.

pub mod scalar;

mod fused;
#[cfg(target_arch = "x86_64")]
mod avx;

use num_complex::Complex64;

/// Two complex values laid out as `[re0, im0, re1, im1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C, align(32))]
pub struct ComplexPair(pub [f64; 4]);

impl ComplexPair {
    pub const ZERO: ComplexPair = ComplexPair([0.0; 4]);

    #[inline]
    pub fn new(z0: Complex64, z1: Complex64) -> Self {
        ComplexPair([z0.re, z0.im, z1.re, z1.im])
    }

    #[inline]
    pub fn splat(z: Complex64) -> Self {
        Self::new(z, z)
    }

    #[inline]
    pub fn lane(&self, k: usize) -> Complex64 {
        Complex64::new(self.0[2 * k], self.0[2 * k + 1])
    }

    #[inline]
    pub fn lanes(&self) -> (Complex64, Complex64) {
        (self.lane(0), self.lane(1))
    }

    /// Loads two consecutive values starting at `offset`.
    #[inline]
    pub fn load(src: &[Complex64], offset: usize) -> Self {
        Self::new(src[offset], src[offset + 1])
    }

    #[inline]
    pub fn store(&self, dst: &mut [Complex64], offset: usize) {
        dst[offset] = self.lane(0);
        dst[offset + 1] = self.lane(1);
    }

    #[inline]
    pub fn swap_lanes(&self) -> Self {
        let [a, b, c, d] = self.0;
        ComplexPair([c, d, a, b])
    }

    #[inline]
    pub fn horizontal_sum(&self) -> Complex64 {
        Complex64::new(self.0[0] + self.0[2], self.0[1] + self.0[3])
    }
}

/// Which implementation the dispatching kernels run on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Separately rounded products and sums.
    Scalar,
    /// Shuffle/FMA dataflow, emulated with `f64::mul_add`.
    Fused,
    /// Shuffle/FMA dataflow on AVX2 + FMA intrinsics.
    Avx2,
}

impl Backend {
    /// Best vectorized backend available on this machine.
    pub fn detect() -> Backend {
        #[cfg(target_arch = "x86_64")]
        {
            if avx::available() {
                return Backend::Avx2;
            }
        }
        Backend::Fused
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Scalar => "scalar",
            Backend::Fused => "fused-portable",
            Backend::Avx2 => "avx2-fma",
        }
    }

    #[inline]
    pub fn cmul2(self, a: ComplexPair, b: ComplexPair) -> ComplexPair {
        match self {
            Backend::Scalar => scalar::cmul2(a, b),
            Backend::Fused => fused::cmul2(a, b),
            #[cfg(target_arch = "x86_64")]
            Backend::Avx2 => unsafe { avx::cmul2(a, b) },
            #[cfg(not(target_arch = "x86_64"))]
            Backend::Avx2 => fused::cmul2(a, b),
        }
    }

    #[inline]
    pub fn cfma2(self, a: ComplexPair, b: ComplexPair, acc: ComplexPair) -> ComplexPair {
        match self {
            Backend::Scalar => scalar::cfma2(a, b, acc),
            Backend::Fused => fused::cfma2(a, b, acc),
            #[cfg(target_arch = "x86_64")]
            Backend::Avx2 => unsafe { avx::cfma2(a, b, acc) },
            #[cfg(not(target_arch = "x86_64"))]
            Backend::Avx2 => fused::cfma2(a, b, acc),
        }
    }

    /// `Σ a_i b_i`, or `Σ conj(a_i) b_i` when `conjugate_a` is set.
    ///
    /// Scalar backend accumulates left to right. Vectorized backends keep
    /// two lane accumulators over consecutive pairs, fold an odd trailing
    /// element into lane 0, then add the lanes.
    pub fn cdot(self, a: &[Complex64], b: &[Complex64], conjugate_a: bool) -> crate::Result<Complex64> {
        if a.len() != b.len() {
            return Err(crate::Error::Dimension(format!(
                "cdot operands have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        match self {
            Backend::Scalar => return Ok(scalar::cdot(a, b, conjugate_a)),
            #[cfg(target_arch = "x86_64")]
            Backend::Avx2 => return Ok(unsafe { avx::cdot(a, b, conjugate_a) }),
            _ => {}
        }
        let n = a.len();
        let mut acc = ComplexPair::ZERO;
        let mut k = 0;
        while k + 1 < n {
            let mut pa = ComplexPair::load(a, k);
            if conjugate_a {
                pa.0[1] = -pa.0[1];
                pa.0[3] = -pa.0[3];
            }
            acc = self.cfma2(pa, ComplexPair::load(b, k), acc);
            k += 2;
        }
        if k < n {
            let ak = if conjugate_a { a[k].conj() } else { a[k] };
            let tail = self.cfma2(
                ComplexPair::new(ak, Complex64::new(0.0, 0.0)),
                ComplexPair::new(b[k], Complex64::new(0.0, 0.0)),
                acc,
            );
            acc = tail;
        }
        Ok(acc.horizontal_sum())
    }
}

impl Backend {
    /// `out[i] = a[i] * b[i]`.
    pub fn cmul_slice(self, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) -> crate::Result<()> {
        same_lengths(a.len(), b.len(), out.len())?;
        match self {
            Backend::Scalar => out.iter_mut().zip(a.iter().zip(b)).for_each(|(o, (x, y))| *o = scalar::cmul(*x, *y)),
            #[cfg(target_arch = "x86_64")]
            Backend::Avx2 => unsafe { avx::cmul_slice(a, b, out) },
            _ => walk_pairs(a, b, out, |x, y, _| self.cmul2(x, y)),
        }
        Ok(())
    }

    /// `acc[i] += a[i] * b[i]`.
    pub fn cfma_slice(self, a: &[Complex64], b: &[Complex64], acc: &mut [Complex64]) -> crate::Result<()> {
        same_lengths(a.len(), b.len(), acc.len())?;
        match self {
            Backend::Scalar => acc.iter_mut().zip(a.iter().zip(b)).for_each(|(o, (x, y))| *o += scalar::cmul(*x, *y)),
            #[cfg(target_arch = "x86_64")]
            Backend::Avx2 => unsafe { avx::cfma_slice(a, b, acc) },
            _ => walk_pairs(a, b, acc, |x, y, c| self.cfma2(x, y, c)),
        }
        Ok(())
    }

    /// Millions of complex operations per second on slices of `len`
    /// elements, best of `passes` timed passes per kernel.
    pub fn throughput(self, len: usize, passes: usize) -> Throughput {
        use std::hint::black_box;
        use std::time::Instant;
        let a: Vec<Complex64> = (0..len).map(|k| Complex64::new(1.0 + k as f64 * 1e-3, 0.5 - k as f64 * 1e-4)).collect();
        let b: Vec<Complex64> = a.iter().rev().map(|z| z.conj() * 0.999).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        let best = |f: &mut dyn FnMut()| {
            (0..passes.max(1))
                .map(|_| {
                    let t = Instant::now();
                    f();
                    t.elapsed().as_secs_f64()
                })
                .fold(f64::INFINITY, f64::min)
                .max(1e-12)
        };
        let per_sec = |secs: f64| len as f64 / secs / 1e6;
        let cmul = per_sec(best(&mut || {
            let _ = self.cmul_slice(black_box(&a), black_box(&b), &mut out);
            black_box(&out);
        }));
        let cfma = per_sec(best(&mut || {
            let _ = self.cfma_slice(black_box(&a), black_box(&b), &mut out);
            black_box(&out);
        }));
        let cdot = per_sec(best(&mut || {
            black_box(self.cdot(black_box(&a), black_box(&b), false).ok());
        }));
        Throughput { cmul, cfma, cdot }
    }
}

/// Kernel throughput in millions of complex operations per second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput {
    pub cmul: f64,
    pub cfma: f64,
    pub cdot: f64,
}

fn same_lengths(a: usize, b: usize, out: usize) -> crate::Result<()> {
    if a != out || b != out {
        return Err(crate::Error::Dimension(format!("slice kernel operands have lengths {a}, {b} and {out}")));
    }
    Ok(())
}

fn walk_pairs(
    a: &[Complex64],
    b: &[Complex64],
    out: &mut [Complex64],
    f: impl Fn(ComplexPair, ComplexPair, ComplexPair) -> ComplexPair,
) {
    let zero = Complex64::new(0.0, 0.0);
    let n = out.len();
    let mut k = 0;
    while k + 1 < n {
        f(ComplexPair::load(a, k), ComplexPair::load(b, k), ComplexPair::load(out, k)).store(out, k);
        k += 2;
    }
    if k < n {
        out[k] = f(ComplexPair::new(a[k], zero), ComplexPair::new(b[k], zero), ComplexPair::new(out[k], zero)).lane(0);
    }
}

fn active() -> Backend {
    use std::sync::OnceLock;
    static ACTIVE: OnceLock<Backend> = OnceLock::new();
    *ACTIVE.get_or_init(Backend::detect)
}

/// Backend used by the dispatching free functions.
pub fn active_backend() -> Backend {
    active()
}

/// Lanewise complex product.
#[inline]
pub fn cmul2(a: ComplexPair, b: ComplexPair) -> ComplexPair {
    active().cmul2(a, b)
}

/// Lanewise `acc + a * b`.
#[inline]
pub fn cfma2(a: ComplexPair, b: ComplexPair, acc: ComplexPair) -> ComplexPair {
    active().cfma2(a, b, acc)
}

/// Complex dot product on the active backend.
pub fn cdot(a: &[Complex64], b: &[Complex64], conjugate_a: bool) -> crate::Result<Complex64> {
    active().cdot(a, b, conjugate_a)
}

/// Magnitude scale of one output component of `acc + a*b`:
/// the sum of the absolute values of the terms combined into it.
/// Returns `(scale_re, scale_im)`.
pub fn component_scale(a: Complex64, b: Complex64, acc: Complex64) -> (f64, f64) {
    (
        (a.re * b.re).abs() + (a.im * b.im).abs() + acc.re.abs(),
        (a.re * b.im).abs() + (a.im * b.re).abs() + acc.im.abs(),
    )
}

/// Spacing between `x.abs()` and the next larger double. Subnormal inputs
/// get the subnormal spacing.
pub fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if !x.is_finite() {
        return f64::NAN;
    }
    x.next_up() - x
}
