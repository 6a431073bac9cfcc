//! Gain system `G = H̄ₐᵀ W Hₐ`, `β = H̄ₐᵀ W rₐ` over the conjugate-augmented
//! measurement set, the constrained KKT matrix, and its sparse solve.
//!
//! Every measurement row `h` contributes itself and its conjugate `h̄`
//! (with the same weight), so `Hₐ = [[H_x, H_x̄], [conj(H_x̄), conj(H_x)]]`.
//! Real-valued rows are included the same way; they count twice, which
//! only rescales their weight uniformly.

use crate::kernels::{cfma2, cmul2, ComplexPair};
use crate::measurement::ConstraintSystem;
use crate::sparse::{LuFactors, LuOptions, SparseMatrix, TripletBuilder};
use crate::{Error, Result};
use num_complex::Complex64;
use std::io::Write;
use std::time::{Duration, Instant};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The four `n × n` gain blocks and the two halves of `β`.
///
/// All four blocks are accumulated by the kernels. Lanes of the lower
/// blocks and of `β_x` are fed the conjugated operands of their upper
/// counterparts, and the kernels commute with conjugation exactly, so
/// `G_xx = conj(G_x̄x̄)`, `G_xx̄ = conj(G_x̄x)` and `β_x = conj(β_x̄)` hold
/// bit for bit. Only `p ≤ q` is computed; the lower triangle is mirrored.
#[derive(Clone, Debug)]
pub struct GainSystem {
    pub g_xbar_x: SparseMatrix,
    pub g_xbar_xbar: SparseMatrix,
    pub g_x_x: SparseMatrix,
    pub g_x_xbar: SparseMatrix,
    pub beta_xbar: Vec<Complex64>,
    pub beta_x: Vec<Complex64>,
}

impl GainSystem {
    pub fn n(&self) -> usize {
        self.beta_xbar.len()
    }

    /// Largest violation of the block relations, entrywise.
    pub fn property_defects(&self) -> GainDefects {
        let beta = self
            .beta_x
            .iter()
            .zip(&self.beta_xbar)
            .map(|(a, b)| (a - b.conj()).norm())
            .fold(0.0, f64::max);
        GainDefects {
            beta_conjugate: beta,
            hermitian: self.g_xbar_x.max_abs_diff(&self.g_xbar_x.adjoint()),
            symmetric: self.g_xbar_xbar.max_abs_diff(&self.g_xbar_xbar.transpose()),
            conjugate_blocks: self
                .g_x_x
                .max_abs_diff(&self.g_xbar_xbar.conj())
                .max(self.g_x_xbar.max_abs_diff(&self.g_xbar_x.conj())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainDefects {
    /// `max|β_x − conj(β_x̄)|`
    pub beta_conjugate: f64,
    /// `max|G_x̄x − G_x̄xᴴ|`
    pub hermitian: f64,
    /// `max|G_x̄x̄ − G_x̄x̄ᵀ|`
    pub symmetric: f64,
    /// `max(|G_xx − conj(G_x̄x̄)|, |G_xx̄ − conj(G_x̄x)|)`
    pub conjugate_blocks: f64,
}

impl GainDefects {
    pub fn max(&self) -> f64 {
        self.beta_conjugate.max(self.hermitian).max(self.symmetric).max(self.conjugate_blocks)
    }
}

/// Accumulates `G` and `β` row by row. Per row with weight `w`, Jacobian
/// entries `a = ∂h/∂x`, `b = ∂h/∂x̄` and residual `r`:
///
/// ```text
/// G_x̄x[p,q] += w (ā_p a_q + b_p b̄_q)     G_x̄x̄[p,q] += w (ā_p b_q + b_p ā_q)
/// G_xx[p,q]  += w (b̄_p a_q + a_p b̄_q)     G_xx̄[p,q]  += w (b̄_p b_q + a_p ā_q)
/// β_x̄[p]     += w (ā_p r + b_p r̄)          β_x[p]     += w (b̄_p r + a_p r̄)
/// ```
///
/// Each pair of blocks sharing a row is one `cmul2` plus one `cfma2`.
pub fn assemble_gain(
    weights: &[f64],
    r: &[Complex64],
    hx: &SparseMatrix,
    hxbar: &SparseMatrix,
) -> Result<GainSystem> {
    let m = weights.len();
    let n = hx.ncols();
    if r.len() != m || hx.nrows() != m || hxbar.nrows() != m || hxbar.ncols() != n {
        return Err(Error::Dimension(format!(
            "gain assembly: {} weights, {} residuals, H_x {}x{}, H_x̄ {}x{}",
            m,
            r.len(),
            hx.nrows(),
            hx.ncols(),
            hxbar.nrows(),
            hxbar.ncols()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidMeasurement(format!("weight must be non-negative and finite, got {w}")));
    }

    // row-major view: (col, a, b) per measurement row
    let mut rows: Vec<Vec<(usize, Complex64, Complex64)>> = vec![Vec::new(); m];
    for (i, j, v) in hx.iter() {
        rows[i].push((j, v, ZERO));
    }
    for (i, j, v) in hxbar.iter() {
        match rows[i].iter_mut().find(|e| e.0 == j) {
            Some(e) => e.2 = v,
            None => rows[i].push((j, ZERO, v)),
        }
    }

    let cap: usize = rows.iter().map(|e| e.len() * e.len()).sum();
    let mut top_left = TripletBuilder::with_capacity(n, n, cap);
    let mut top_right = TripletBuilder::with_capacity(n, n, cap);
    let mut bottom_left = TripletBuilder::with_capacity(n, n, cap);
    let mut bottom_right = TripletBuilder::with_capacity(n, n, cap);
    let mut beta_xbar = vec![ZERO; n];
    let mut beta_x = vec![ZERO; n];

    for ((entries, &w), &res) in rows.iter().zip(weights).zip(r) {
        if w == 0.0 {
            continue;
        }
        let r_pair = ComplexPair::new(res, res.conj());
        let r_swapped = ComplexPair::new(res.conj(), res);
        for &(p, ap, bp) in entries {
            let wa_conj = ap.conj() * w;
            let wb = bp * w;
            let wb_conj = bp.conj() * w;
            let wa = ap * w;

            // lane 1 is lane 0 with every operand conjugated
            let beta = cfma2(
                ComplexPair::new(wb, wb_conj),
                r_swapped,
                cmul2(ComplexPair::new(wa_conj, wa), r_pair),
            );
            let (b_xbar, b_x) = beta.lanes();
            beta_xbar[p] += b_xbar;
            beta_x[p] += b_x;

            for &(q, aq, bq) in entries {
                if q < p {
                    continue;
                }
                let straight = ComplexPair::new(aq, bq);
                let crossed = ComplexPair::new(bq.conj(), aq.conj());
                // top = (G_x̄x, G_x̄x̄); bottom = conj(top lanes swapped)
                let top = cfma2(ComplexPair::splat(wb), crossed, cmul2(ComplexPair::splat(wa_conj), straight));
                let bottom = cfma2(
                    ComplexPair::splat(wb_conj),
                    straight,
                    cmul2(ComplexPair::splat(wa), crossed),
                );
                let (mut tl, tr, bl, mut br) = (top.lane(0), top.lane(1), bottom.lane(0), bottom.lane(1));
                if p == q {
                    tl.im = 0.0;
                    br.im = 0.0;
                }
                top_left.push(p, q, tl);
                top_right.push(p, q, tr);
                bottom_left.push(p, q, bl);
                bottom_right.push(p, q, br);
                if p != q {
                    top_left.push(q, p, tl.conj());
                    top_right.push(q, p, tr);
                    bottom_left.push(q, p, bl);
                    bottom_right.push(q, p, br.conj());
                }
            }
        }
    }

    Ok(GainSystem {
        g_xbar_x: top_left.build(),
        g_xbar_xbar: top_right.build(),
        g_x_x: bottom_left.build(),
        g_x_xbar: bottom_right.build(),
        beta_xbar,
        beta_x,
    })
}

/// Constrained normal equations in block form
///
/// ```text
/// [ G_x̄x   G_x̄x̄   conj(J_x)ᵀ   J_x̄ᵀ     ] [Δx]   [ β_x̄ ]
/// [ G_xx   G_xx̄   conj(J_x̄)ᵀ   J_xᵀ     ] [Δy] = [ β_x  ]
/// [ J_x    J_x̄     0            0        ] [λ ]   [ −s   ]
/// [ J̄_x̄    J̄_x     0            0        ] [μ ]   [ −s̄   ]
/// ```
///
/// Constraint rows that are real-valued (the slack angle) would produce a
/// conjugate row identical to themselves, so they appear only in the `λ`
/// block. The dimension is `2n + 2c_complex + c_real`.
#[derive(Clone, Debug)]
pub struct KktSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<Complex64>,
    pub n: usize,
    pub complex_rows: usize,
    pub real_rows: usize,
}

impl KktSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Stored entries of the upper triangle (diagonal included) of the
    /// symmetrized pattern.
    pub fn upper_nnz(&self) -> usize {
        self.matrix.upper_nnz()
    }

    pub fn write_coordinate<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.matrix.write_coordinate(out)
    }

    /// `max|A − Aᴴ|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }
}

pub fn assemble_kkt(g: &GainSystem, cons: &ConstraintSystem) -> Result<KktSystem> {
    let n = g.n();
    let c = cons.len();
    if cons.real_rows > c {
        return Err(Error::Dimension(format!("{} real rows among {c} constraints", cons.real_rows)));
    }
    let cc = cons.complex_rows();
    if cons.jx.nrows() != c || cons.jxbar.nrows() != c || cons.jx.ncols() != n || cons.jxbar.ncols() != n {
        return Err(Error::Dimension(format!(
            "constraint blocks {}x{} and {}x{} do not fit {c} rows over {n} states",
            cons.jx.nrows(),
            cons.jx.ncols(),
            cons.jxbar.nrows(),
            cons.jxbar.ncols()
        )));
    }
    for blk in [&g.g_xbar_x, &g.g_xbar_xbar, &g.g_x_x, &g.g_x_xbar] {
        if blk.nrows() != n || blk.ncols() != n {
            return Err(Error::Dimension("gain blocks are not n x n".into()));
        }
    }
    if g.beta_x.len() != n {
        return Err(Error::Dimension("gain vectors differ in length".into()));
    }

    let dim = 2 * n + c + cc;
    let nnz = g.g_xbar_x.nnz() + g.g_xbar_xbar.nnz() + g.g_x_x.nnz() + g.g_x_xbar.nnz();
    let mut t = TripletBuilder::with_capacity(dim, dim, nnz + 4 * (cons.jx.nnz() + cons.jxbar.nnz()));
    t.push_block(&g.g_xbar_x, 0, 0, |v| v);
    t.push_block(&g.g_xbar_xbar, 0, n, |v| v);
    t.push_block(&g.g_x_x, n, 0, |v| v);
    t.push_block(&g.g_x_xbar, n, n, |v| v);

    let lam = 2 * n;
    let mu = 2 * n + c;
    for (r, j, v) in cons.jx.iter() {
        t.push(lam + r, j, v);
        t.push(j, lam + r, v.conj());
        if r < cc {
            t.push(mu + r, n + j, v.conj());
            t.push(n + j, mu + r, v);
        }
    }
    for (r, j, v) in cons.jxbar.iter() {
        t.push(lam + r, n + j, v);
        t.push(n + j, lam + r, v.conj());
        if r < cc {
            t.push(mu + r, j, v.conj());
            t.push(j, mu + r, v);
        }
    }

    let mut rhs = Vec::with_capacity(dim);
    rhs.extend_from_slice(&g.beta_xbar);
    rhs.extend_from_slice(&g.beta_x);
    rhs.extend(cons.s.iter().map(|v| -v));
    rhs.extend(cons.s[..cc].iter().map(|v| -v.conj()));

    Ok(KktSystem { matrix: t.build(), rhs, n, complex_rows: cc, real_rows: cons.real_rows })
}

#[derive(Clone, Debug)]
pub struct KktSolution {
    pub dx: Vec<Complex64>,
    pub dy: Vec<Complex64>,
    /// One multiplier per constraint row.
    pub lambda: Vec<Complex64>,
    /// Multipliers of the conjugate rows. For a real-valued row the single
    /// multiplier `ν` is split evenly, `λ = μ = ν/2`.
    pub mu: Vec<Complex64>,
    /// `‖A·sol − rhs‖∞` after refinement.
    pub residual: f64,
    pub rhs_norm: f64,
    pub refined: bool,
    pub pivot_growth: f64,
    pub factor_nnz: usize,
    pub factor_time: Duration,
    pub solve_time: Duration,
}

impl KktSolution {
    /// `(max|Δy − conj(Δx)|, max|μ − conj(λ)|)`.
    pub fn conjugate_pair_defect(&self) -> (f64, f64) {
        let d = self.dx.iter().zip(&self.dy).map(|(a, b)| (b - a.conj()).norm()).fold(0.0, f64::max);
        let m = self.lambda.iter().zip(&self.mu).map(|(a, b)| (b - a.conj()).norm()).fold(0.0, f64::max);
        (d, m)
    }
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn residual_vec(a: &SparseMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Power of two bringing the constraint rows to the size of the gain
/// entries, so that `diag(I, σI) A diag(I, σI)` is balanced. Exact in
/// floating point.
fn constraint_scale(k: &KktSystem) -> f64 {
    let two_n = 2 * k.n;
    let (mut g, mut c) = (0.0f64, 0.0f64);
    for (i, j, v) in k.matrix.iter() {
        if i < two_n && j < two_n {
            g = g.max(v.norm());
        } else if i >= two_n && j < two_n {
            c = c.max(v.norm());
        }
    }
    if g > 0.0 && c > 0.0 {
        2f64.powi((g / c).log2().round() as i32)
    } else {
        1.0
    }
}

/// Factors and solves the KKT system. The constraint block is
/// equilibrated against the gain block before factoring. One step of
/// iterative refinement is applied when the residual exceeds
/// `1e-10 ‖rhs‖∞`.
pub fn factor_solve(k: &KktSystem, opts: LuOptions) -> Result<KktSolution> {
    let t0 = Instant::now();
    let two_n = 2 * k.n;
    let sigma = constraint_scale(k);
    let d = |i: usize| if i < two_n { 1.0 } else { sigma };
    let scaled = if sigma == 1.0 {
        k.matrix.clone()
    } else {
        let t: Vec<_> = k.matrix.iter().map(|(i, j, v)| (i, j, v * (d(i) * d(j)))).collect();
        SparseMatrix::from_triplets(k.dim(), k.dim(), &t)
    };
    let lu = LuFactors::factor(&scaled, opts)?;
    let factor_time = t0.elapsed();
    // A x = b  ⇔  (DAD)(D⁻¹x) = D b
    let solve = |b: &[Complex64]| -> Vec<Complex64> {
        let db: Vec<_> = b.iter().enumerate().map(|(i, v)| v * d(i)).collect();
        lu.solve(&db).into_iter().enumerate().map(|(i, v)| v * d(i)).collect()
    };

    let t1 = Instant::now();
    let mut sol = solve(&k.rhs);
    let mut res = residual_vec(&k.matrix, &sol, &k.rhs);
    let rhs_norm = inf_norm(&k.rhs);
    let mut residual = inf_norm(&res);
    let mut refined = false;
    if residual > 1e-10 * rhs_norm {
        let corr = solve(&res);
        for (s, c) in sol.iter_mut().zip(&corr) {
            *s += c;
        }
        res = residual_vec(&k.matrix, &sol, &k.rhs);
        residual = inf_norm(&res);
        refined = true;
    }
    let solve_time = t1.elapsed();

    let n = k.n;
    let c = k.complex_rows + k.real_rows;
    let cc = k.complex_rows;
    let dx = sol[..n].to_vec();
    let dy = sol[n..2 * n].to_vec();
    let mut lambda = sol[2 * n..2 * n + c].to_vec();
    let mut mu: Vec<Complex64> = sol[2 * n + c..].to_vec();
    for v in &mut lambda[cc..] {
        *v *= 0.5;
        mu.push(*v);
    }

    Ok(KktSolution {
        dx,
        dy,
        lambda,
        mu,
        residual,
        rhs_norm,
        refined,
        pivot_growth: lu.pivot_growth(),
        factor_nnz: lu.factor_nnz(),
        factor_time,
        solve_time,
    })
}
