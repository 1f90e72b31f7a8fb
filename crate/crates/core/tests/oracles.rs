//! Independent brute-force evaluations compared against the library.

use approx::assert_abs_diff_eq;
use cmient_core::bayes::{build_fig1, build_fig2, random_fig2, Fig2Spec};
use cmient_core::ed::{
    classical_ed, classical_post_state, quantum_post_state, quantum_post_state_with_unitaries,
    ClassicalLocc, GammaEvent, QuantumLocc,
};
use cmient_core::ef::ExtensionBudget;
use cmient_core::info::{mi_dense, Axis, JointPmf};
use cmient_core::linalg::{CMat, C64};
use cmient_core::quantum::{
    params_to_unitary, random_density_matrix, subsystems, DensityMatrix, UnitaryParams,
};

fn sources(spec: &Fig2Spec) -> (JointPmf, JointPmf) {
    let m = |f: &cmient_core::bayes::Fig1Spec| {
        build_fig1(f)
            .unwrap()
            .marginalize(&[&f.a_axis().name, &f.b_axis().name])
            .unwrap()
    };
    (m(spec.x()), m(spec.x_prime()))
}

/// `P(a, b, a', b')` summed term by term over every ancestor value.
fn fig2_oracle(spec: &Fig2Spec) -> Vec<f64> {
    let (na, nb) = (spec.x().a_axis().size, spec.x().b_axis().size);
    let (nl, nlp) = (spec.x().alpha_axis().size, spec.x_prime().alpha_axis().size);
    let (x, xp) = (spec.x(), spec.x_prime());
    let mut out = vec![0.0; na * nb * na * nb];
    for l in 0..nl {
        for lp in 0..nlp {
            for ba in 0..na {
                for bb in 0..nb {
                    for bap in 0..na {
                        for bbp in 0..nb {
                            let src = x.prior().probs()[l]
                                * x.a_given_alpha().prob(ba, l)
                                * x.b_given_alpha().prob(bb, l)
                                * xp.prior().probs()[lp]
                                * xp.a_given_alpha().prob(bap, lp)
                                * xp.b_given_alpha().prob(bbp, lp);
                            for a in 0..na {
                                for ap in 0..na {
                                    let pu = spec.u().prob(a * na + ap, ba * na + bap);
                                    for b in 0..nb {
                                        for bp in 0..nb {
                                            let v_in = if spec.comm_arrow() {
                                                ((bb * nb + bbp) * na + a) * na + ap
                                            } else {
                                                bb * nb + bbp
                                            };
                                            let pv = spec.v().prob(b * nb + bp, v_in);
                                            out[((a * nb + b) * na + ap) * nb + bp] +=
                                                src * pu * pv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn two_copy_net_matches_term_by_term_enumeration() {
    for seed in 0..10 {
        for arrow in [false, true] {
            let spec = random_fig2(seed, 2, 3, 2, 3, arrow).unwrap();
            let oracle = fig2_oracle(&spec);
            let joint = build_fig2(&spec, false).unwrap();
            let m = joint.marginalize(&["a", "b", "a'", "b'"]).unwrap();
            for (x, y) in m.probs().iter().zip(&oracle) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-14);
            }

            // Conditioning the enumeration on a' = b' = 0.
            let (na, nb) = (2, 3);
            let mut q = vec![0.0; na * nb];
            for a in 0..na {
                for b in 0..nb {
                    q[a * nb + b] = oracle[((a * nb + b) * na) * nb];
                }
            }
            let pg: f64 = q.iter().sum();
            let (px, pxp) = sources(&spec);
            let locc = ClassicalLocc::from_fig2(&spec).unwrap();
            let (post, p_gamma) =
                classical_post_state(&px, &pxp, &locc, GammaEvent::default()).unwrap();
            assert_abs_diff_eq!(p_gamma, pg, epsilon = 1e-14);
            for (x, y) in post.probs().iter().zip(&q) {
                assert_abs_diff_eq!(*x, y / pg, epsilon = 1e-13);
            }
        }
    }
}

/// The indexed form of the post-selected state, one entry at a time.
fn indexed_post_state(rx: &CMat, rxp: &CMat, u: &CMat, vs: &[CMat], n: usize) -> CMat {
    let mut out = CMat::zeros(n * n, n * n);
    for a in 0..n {
        let v = &vs[a];
        for b1 in 0..n {
            for b2 in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for a1 in 0..n {
                    for a1p in 0..n {
                        for b1s in 0..n {
                            for b1p in 0..n {
                                for a2 in 0..n {
                                    for a2p in 0..n {
                                        for b2s in 0..n {
                                            for b2p in 0..n {
                                                acc += u[(a * n, a1 * n + a1p)]
                                                    * v[(b1 * n, b1s * n + b1p)]
                                                    * rx[(a1 * n + b1s, a2 * n + b2s)]
                                                    * rxp[(a1p * n + b1p, a2p * n + b2p)]
                                                    * v[(b2 * n, b2s * n + b2p)].conj()
                                                    * u[(a * n, a2 * n + a2p)].conj();
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                out[(a * n + b1, a * n + b2)] = acc;
            }
        }
    }
    let tr: C64 = out.diagonal().iter().sum();
    out / tr
}

#[test]
fn post_selected_state_matches_indexed_sum() {
    for seed in 0..20u64 {
        let rx = random_density_matrix(
            seed,
            &subsystems(&[("A", 2), ("B", 2)]),
            1 + (seed as usize % 4),
        )
        .unwrap();
        let rxp =
            random_density_matrix(seed + 100, &subsystems(&[("A'", 2), ("B'", 2)]), 2).unwrap();
        let u = UnitaryParams::random(seed, 4, 1.0);
        let v: Vec<UnitaryParams> = (0..2)
            .map(|k| UnitaryParams::random(seed * 7 + k + 1, 4, 1.0))
            .collect();
        let locc = QuantumLocc::new(u.clone(), v.clone(), true).unwrap();
        let (post, _) = quantum_post_state(&rx, &rxp, &locc, GammaEvent::default()).unwrap();
        let um = params_to_unitary(&u).unwrap();
        let vms: Vec<CMat> = v.iter().map(|p| params_to_unitary(p).unwrap()).collect();
        let oracle = indexed_post_state(rx.matrix(), rxp.matrix(), &um, &vms, 2);
        for (x, y) in post.matrix().iter().zip(oracle.iter()) {
            assert!((x - y).norm() <= 1e-12, "seed {seed}: {x} vs {y}");
        }
    }
}

fn permutation_matrix(perm: &[usize]) -> CMat {
    let n = perm.len();
    CMat::from_fn(n, n, |out, inp| {
        if perm[inp] == out {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

#[test]
fn diagonal_inputs_with_permutations_reproduce_classical_post_state() {
    let perms: [[usize; 4]; 3] = [[0, 1, 2, 3], [2, 0, 3, 1], [1, 3, 0, 2]];
    for (k, (pu, pv)) in perms.iter().zip(perms.iter().rev()).enumerate() {
        let px = JointPmf::new(
            vec![Axis::new("A", 2), Axis::new("B", 2)],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let pxp = JointPmf::new(
            vec![Axis::new("A'", 2), Axis::new("B'", 2)],
            vec![0.35, 0.15, 0.05 + 0.1 * k as f64, 0.45 - 0.1 * k as f64],
        )
        .unwrap();
        let ax = |n: &str| Axis::new(n, 2);
        let u = cmient_core::info::StochasticMap::deterministic(
            vec![ax("A"), ax("A'")],
            vec![ax("a"), ax("a'")],
            |i| pu[i],
        )
        .unwrap();
        let v = cmient_core::info::StochasticMap::deterministic(
            vec![ax("B"), ax("B'")],
            vec![ax("b"), ax("b'")],
            |i| pv[i],
        )
        .unwrap();
        let locc = ClassicalLocc::new(u, v, false).unwrap();
        let (classical, pg) =
            classical_post_state(&px, &pxp, &locc, GammaEvent::default()).unwrap();

        let dx = DensityMatrix::diagonal(subsystems(&[("A", 2), ("B", 2)]), px.probs()).unwrap();
        let dxp =
            DensityMatrix::diagonal(subsystems(&[("A'", 2), ("B'", 2)]), pxp.probs()).unwrap();
        let vm = permutation_matrix(pv);
        let (quantum, qg) = quantum_post_state_with_unitaries(
            &dx,
            &dxp,
            &permutation_matrix(pu),
            &[vm.clone(), vm],
            GammaEvent::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(pg, qg, epsilon = 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { classical.probs()[i] } else { 0.0 };
                assert!((quantum.matrix()[(i, j)] - C64::new(expected, 0.0)).norm() <= 1e-12);
            }
        }
    }
}

/// Largest `H(a:b|Gamma)` over every deterministic `U` and `V` on bits.
fn brute_force_deterministic_ed(px: &[f64], pxp: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for fu in 0..256usize {
        let u = |i: usize| (fu >> (2 * i)) & 3;
        for fv in 0..256usize {
            let v = |i: usize| (fv >> (2 * i)) & 3;
            let mut q = [0.0; 4];
            for ba in 0..2 {
                for bb in 0..2 {
                    for bap in 0..2 {
                        for bbp in 0..2 {
                            let (ao, bo) = (u(ba * 2 + bap), v(bb * 2 + bbp));
                            if ao % 2 == 0 && bo % 2 == 0 {
                                q[(ao / 2) * 2 + bo / 2] += px[ba * 2 + bb] * pxp[bap * 2 + bbp];
                            }
                        }
                    }
                }
            }
            let pg: f64 = q.iter().sum();
            if pg < 1e-14 {
                continue;
            }
            let qn: Vec<f64> = q.iter().map(|x| x / pg).collect();
            best = best.max(mi_dense(&qn, 2, 2));
        }
    }
    best
}

#[test]
fn deterministic_enumeration_matches_full_map_brute_force() {
    for seed in 0..6 {
        let spec = random_fig2(seed, 2, 2, 2, 2, false).unwrap();
        let (px, pxp) = sources(&spec);
        let brute = brute_force_deterministic_ed(px.probs(), pxp.probs());
        let budget = ExtensionBudget::new(1).with_restarts(1).with_iterations(50);
        let r = classical_ed(&px, &pxp, 1, &budget, false).unwrap();
        assert_abs_diff_eq!(r.diagnostics["enumeration_best"], brute, epsilon = 1e-12);
        assert!(r.best_value >= brute - 1e-12);
    }
}

#[test]
fn partial_trace_matches_explicit_index_sum() {
    let rho = random_density_matrix(5, &subsystems(&[("a", 2), ("m", 3), ("c", 2)]), 5).unwrap();
    let m = rho.matrix();
    let reduced = rho.partial_trace(&["a", "c"]).unwrap();
    for a1 in 0..2 {
        for c1 in 0..2 {
            for a2 in 0..2 {
                for c2 in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..3 {
                        acc += m[((a1 * 3 + k) * 2 + c1, (a2 * 3 + k) * 2 + c2)];
                    }
                    assert!((reduced.matrix()[(a1 * 2 + c1, a2 * 2 + c2)] - acc).norm() < 1e-14);
                }
            }
        }
    }
    let swapped = rho.partial_trace(&["c", "a"]).unwrap();
    for c1 in 0..2 {
        for a1 in 0..2 {
            for c2 in 0..2 {
                for a2 in 0..2 {
                    let x = swapped.matrix()[(c1 * 2 + a1, c2 * 2 + a2)];
                    let y = reduced.matrix()[(a1 * 2 + c1, a2 * 2 + c2)];
                    assert!((x - y).norm() < 1e-15);
                }
            }
        }
    }
}
