use cse_core::kernels::{component_scale, ulp, Backend, ComplexPair};
use cse_core::network::{Branch, Node};
use cse_core::*;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn component() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        (1u64..(1 << 52), any::<bool>()).prop_map(|(bits, neg)| if neg { -f64::from_bits(bits) } else { f64::from_bits(bits) }),
        (-1e100f64..1e100),
        (-1.0f64..1.0),
    ]
}

fn complex() -> impl Strategy<Value = Complex64> {
    (component(), component()).prop_map(|(re, im)| c(re, im))
}

fn moderate() -> impl Strategy<Value = Complex64> {
    (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(re, im)| c(re, im))
}

fn close(got: Complex64, want: Complex64, scale: (f64, f64), k: f64) -> bool {
    (got.re - want.re).abs() <= k * ulp(scale.0) && (got.im - want.im).abs() <= k * ulp(scale.1)
}

fn conj_pair(p: ComplexPair) -> ComplexPair {
    ComplexPair::new(p.lane(0).conj(), p.lane(1).conj())
}

fn same_bits(a: ComplexPair, b: ComplexPair) -> bool {
    a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits() || (*x == 0.0 && *y == 0.0))
}

/// Every backend this machine can run.
fn backends() -> [Backend; 3] {
    [Backend::Scalar, Backend::Fused, Backend::detect()]
}

proptest! {
    #[test]
    fn vector_cfma_matches_scalar(a0 in complex(), a1 in complex(), b0 in complex(), b1 in complex(), c0 in complex(), c1 in complex()) {
        let (a, b, acc) = (ComplexPair::new(a0, a1), ComplexPair::new(b0, b1), ComplexPair::new(c0, c1));
        let want = Backend::Scalar.cfma2(a, b, acc);
        for be in [Backend::Fused, Backend::detect()] {
            let got = be.cfma2(a, b, acc);
            for (k, (x, y, z)) in [(a0, b0, c0), (a1, b1, c1)].into_iter().enumerate() {
                let (g, w) = (got.lane(k), want.lane(k));
                if g.is_finite() && w.is_finite() {
                    prop_assert!(close(g, w, component_scale(x, y, z), 2.0), "{be:?} lane {k}: {g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn lanes_are_independent(a0 in moderate(), a1 in moderate(), b0 in moderate(), b1 in moderate(), x in moderate(), y in moderate()) {
        for be in backends() {
            let one = be.cmul2(ComplexPair::new(a0, a1), ComplexPair::new(b0, b1));
            let other = be.cmul2(ComplexPair::new(a0, x), ComplexPair::new(b0, y));
            prop_assert_eq!(one.lane(0), other.lane(0));
            let swapped = be.cmul2(ComplexPair::new(a1, a0), ComplexPair::new(b1, b0));
            prop_assert_eq!(one.lane(1), swapped.lane(0));
        }
    }

    #[test]
    fn kernels_commute_with_conjugation(a0 in moderate(), a1 in moderate(), b0 in moderate(), b1 in moderate(), c0 in moderate(), c1 in moderate()) {
        let (a, b, acc) = (ComplexPair::new(a0, a1), ComplexPair::new(b0, b1), ComplexPair::new(c0, c1));
        for be in backends() {
            prop_assert!(same_bits(conj_pair(be.cmul2(a, b)), be.cmul2(conj_pair(a), conj_pair(b))));
            prop_assert!(same_bits(conj_pair(be.cfma2(a, b, acc)), be.cfma2(conj_pair(a), conj_pair(b), conj_pair(acc))));
        }
    }

    #[test]
    fn cmul_is_bilinear(a in moderate(), b in moderate(), d in moderate(), s in -10.0f64..10.0) {
        for be in backends() {
            let lhs = be.cmul2(ComplexPair::splat(a), ComplexPair::new(b + d, b * s)).lanes();
            let p = be.cmul2(ComplexPair::splat(a), ComplexPair::new(b, d)).lanes();
            let tol = 1e-12 * (a.norm() * (b.norm() + d.norm()) * (1.0 + s.abs())).max(1.0);
            prop_assert!((lhs.0 - (p.0 + p.1)).norm() <= tol);
            prop_assert!((lhs.1 - p.0 * s).norm() <= tol);
        }
    }

    #[test]
    fn cdot_matches_scalar(v in prop::collection::vec((moderate(), moderate()), 0..64), conjugate in any::<bool>()) {
        let (a, b): (Vec<_>, Vec<_>) = v.into_iter().unzip();
        let want = Backend::Scalar.cdot(&a, &b, conjugate).unwrap();
        let scale = a.iter().zip(&b).fold((0.0, 0.0), |s, (x, y)| {
            let t = component_scale(*x, *y, c(0.0, 0.0));
            (s.0 + t.0, s.1 + t.1)
        });
        let k = 4.0 * a.len().max(1) as f64;
        for be in [Backend::Fused, Backend::detect()] {
            let got = be.cdot(&a, &b, conjugate).unwrap();
            prop_assert!(close(got, want, scale, k), "{be:?}: {got} vs {want}");
        }
    }
}

// ------------------------------------------------------------- admittance

fn network_strategy() -> impl Strategy<Value = (Vec<Node>, Vec<Branch>)> {
    (3usize..9).prop_flat_map(|n| {
        let shunts = prop::collection::vec((0.0f64..0.1, -0.01f64..0.01), n);
        let tree = prop::collection::vec((any::<prop::sample::Index>(), 0.1f64..5.0, -30.0f64..-1.0, 0.0f64..0.05, 0.0f64..0.05), n - 1);
        let extra = prop::collection::vec((0..n, 0..n, 0.1f64..5.0, -30.0f64..-1.0, 0.0f64..0.05), 0..4);
        (shunts, tree, extra).prop_map(move |(shunts, tree, extra)| {
            let nodes = shunts
                .into_iter()
                .enumerate()
                .map(|(i, (b, g))| Node {
                    id: format!("n{i}"),
                    shunt: c(g, b),
                    zero_injection: false,
                    load: c(0.0, 0.0),
                    generation: c(0.0, 0.0),
                    voltage_setpoint: None,
                })
                .collect();
            let mut branches: Vec<Branch> = tree
                .into_iter()
                .enumerate()
                .map(|(k, (parent, g, b, sf, st))| Branch {
                    from: parent.index(k + 1),
                    to: k + 1,
                    series: c(g, b),
                    shunt_from: c(0.0, sf),
                    shunt_to: c(0.0, st),
                })
                .collect();
            for (from, to, g, b, sh) in extra {
                if from != to {
                    branches.push(Branch { from, to, series: c(g, b), shunt_from: c(0.0, sh), shunt_to: c(0.0, sh) });
                }
            }
            (nodes, branches)
        })
    })
}

proptest! {
    #[test]
    fn admittance_rows_sum_to_shunts((nodes, branches) in network_strategy()) {
        let net = Network::new(nodes.clone(), branches.clone(), 0).unwrap();
        let y = build_admittance(&net);
        let ones = vec![c(1.0, 0.0); nodes.len()];
        let sums = y.matrix().mul_vec(&ones);
        for (i, node) in nodes.iter().enumerate() {
            let mut want = node.shunt;
            for br in &branches {
                if br.from == i { want += br.shunt_from; }
                if br.to == i { want += br.shunt_to; }
            }
            prop_assert!((sums[i] - want).norm() <= 1e-12 * (1.0 + y.get(i, i).norm()));
        }
    }

    #[test]
    fn admittance_is_symmetric((nodes, branches) in network_strategy()) {
        let net = Network::new(nodes, branches, 0).unwrap();
        let y = build_admittance(&net);
        prop_assert!(y.matrix().is_structurally_symmetric());
        prop_assert!(y.matrix().max_abs_diff(&y.matrix().transpose()) == 0.0);
    }

    #[test]
    fn admittance_is_permutation_equivariant((nodes, branches) in network_strategy(), seed in any::<u64>()) {
        let n = nodes.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut moved = vec![nodes[0].clone(); n];
        for (i, node) in nodes.iter().enumerate() {
            moved[perm[i]] = node.clone();
        }
        let moved_branches: Vec<Branch> = branches
            .iter()
            .map(|b| Branch { from: perm[b.from], to: perm[b.to], ..b.clone() })
            .collect();
        let y = build_admittance(&Network::new(nodes, branches, 0).unwrap());
        let yp = build_admittance(&Network::new(moved, moved_branches, perm[0]).unwrap());
        for i in 0..n {
            for k in 0..n {
                prop_assert!((y.get(i, k) - yp.get(perm[i], perm[k])).norm() <= 1e-12 * (1.0 + y.get(i, k).norm()));
            }
        }
    }

    #[test]
    fn gain_relations_hold_exactly(
        rows in prop::collection::vec((prop::collection::vec(prop::option::weighted(0.5, moderate()), 6), prop::collection::vec(prop::option::weighted(0.5, moderate()), 6), moderate(), 0.0f64..100.0), 1..20)
    ) {
        let n = 6;
        let dense = |pick: &dyn Fn(&(Vec<Option<Complex64>>, Vec<Option<Complex64>>, Complex64, f64)) -> &Vec<Option<Complex64>>| {
            let d: Vec<Vec<Complex64>> = rows.iter().map(|r| pick(r).iter().map(|v| v.unwrap_or(c(0.0, 0.0))).collect()).collect();
            SparseMatrix::from_dense(&d)
        };
        let hx = dense(&|r| &r.0);
        let hxbar = dense(&|r| &r.1);
        let res: Vec<Complex64> = rows.iter().map(|r| r.2).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.3).collect();
        let g = assemble_gain(&w, &res, &hx, &hxbar).unwrap();
        prop_assert_eq!(g.n(), n);
        prop_assert_eq!(g.property_defects().max(), 0.0);
    }
}
