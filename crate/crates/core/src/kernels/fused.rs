//! Portable emulation of the shuffle/FMA dataflow.

use super::ComplexPair;

#[inline]
pub fn cmul2(a: ComplexPair, b: ComplexPair) -> ComplexPair {
    let [ar0, ai0, ar1, ai1] = a.0;
    let [br0, bi0, br1, bi1] = b.0;
    // aIm * bSwap, rounded
    let t = [ai0 * bi0, ai0 * br0, ai1 * bi1, ai1 * br1];
    // fmaddsub(aRe, b, t)
    ComplexPair([
        ar0.mul_add(br0, -t[0]),
        ar0.mul_add(bi0, t[1]),
        ar1.mul_add(br1, -t[2]),
        ar1.mul_add(bi1, t[3]),
    ])
}

#[inline]
pub fn cfma2(a: ComplexPair, b: ComplexPair, acc: ComplexPair) -> ComplexPair {
    let [ar0, ai0, ar1, ai1] = a.0;
    let [br0, bi0, br1, bi1] = b.0;
    let [c0, c1, c2, c3] = acc.0;
    // fmaddsub(aIm, bSwap, acc)
    let t = [
        ai0.mul_add(bi0, -c0),
        ai0.mul_add(br0, c1),
        ai1.mul_add(bi1, -c2),
        ai1.mul_add(br1, c3),
    ];
    // fmaddsub(aRe, b, t)
    ComplexPair([
        ar0.mul_add(br0, -t[0]),
        ar0.mul_add(bi0, t[1]),
        ar1.mul_add(br1, -t[2]),
        ar1.mul_add(bi1, t[3]),
    ])
}
