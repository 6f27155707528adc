use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rewind_core::qstate::*;
use rewind_core::rng::trial_rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// Independent oracle: partial trace of a 3-register (2,3,2) density matrix
// keeping registers 0 and 2, written with explicit flat-index arithmetic.
fn oracle_ptrace_232_keep_02(rho: &CMat) -> CMat {
    let mut out = CMat::zeros(4, 4);
    for ia in 0..2 {
        for ic in 0..2 {
            for ja in 0..2 {
                for jc in 0..2 {
                    let mut acc = c(0.0, 0.0);
                    for ib in 0..3 {
                        let row = ia * 6 + ib * 2 + ic;
                        let col = ja * 6 + ib * 2 + jc;
                        acc += rho[(row, col)];
                    }
                    out[(ia * 2 + ic, ja * 2 + jc)] = acc;
                }
            }
        }
    }
    out
}

fn space_232() -> RegisterSpace {
    RegisterSpace::new(&[("a", 2), ("b", 3), ("c", 2)]).unwrap()
}

#[test]
fn partial_trace_matches_index_oracle() {
    let mut rng = trial_rng(11, 0);
    let sp = space_232();
    for _ in 0..20 {
        let psi = haar_state(sp.clone(), &mut rng);
        let reduced = psi.partial_trace(&["a", "c"]).unwrap();
        let oracle = oracle_ptrace_232_keep_02(&psi.density());
        assert!((reduced.density() - oracle).norm() < 1e-12);
    }
}

#[test]
fn partial_trace_of_product_state_recovers_factors() {
    let mut rng = trial_rng(12, 0);
    let sa = RegisterSpace::single("a", 3).unwrap();
    let sb = RegisterSpace::single("b", 4).unwrap();
    let pa = haar_state(sa, &mut rng);
    let pb = haar_state(sb, &mut rng);
    let joint = pa.tensor(&pb).unwrap();
    let ra = joint.partial_trace(&["a"]).unwrap();
    let rb = joint.partial_trace(&["b"]).unwrap();
    assert!((ra.density() - pa.density()).norm() < 1e-12);
    assert!((rb.density() - pb.density()).norm() < 1e-12);
}

#[test]
fn partial_trace_preserves_trace_and_positivity() {
    let mut rng = trial_rng(13, 0);
    let sp = space_232();
    for t in 0..10 {
        let psi = haar_state(sp.clone(), &mut rng);
        for keep in [vec!["a"], vec!["b"], vec!["a", "b"], vec!["b", "c"]] {
            let red = psi.partial_trace(&keep).unwrap();
            let rho = red.density();
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
            let min_eig = rho
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig > -1e-10, "trial {t}: negative eigenvalue {min_eig}");
        }
    }
}

#[test]
fn trace_distance_pure_states_closed_form() {
    // d(|x>,|y>) = sqrt(1 - |<x|y>|^2) for pure states.
    let sp = RegisterSpace::single("q", 2).unwrap();
    let zero = QState::basis(sp.clone(), &[0]).unwrap();
    let plus = QState::pure(
        sp.clone(),
        CVec::from_vec(vec![c(1.0 / 2f64.sqrt(), 0.0), c(1.0 / 2f64.sqrt(), 0.0)]),
    )
    .unwrap();
    let d = trace_distance(&zero, &plus).unwrap();
    assert_abs_diff_eq!(d, 1.0 / 2f64.sqrt(), epsilon = 1e-12);

    let mut rng = trial_rng(14, 0);
    let sp = RegisterSpace::single("q", 5).unwrap();
    for _ in 0..20 {
        let x = haar_state(sp.clone(), &mut rng);
        let y = haar_state(sp.clone(), &mut rng);
        let ov = x.vector().unwrap().dotc(y.vector().unwrap()).norm_sqr();
        let d = trace_distance(&x, &y).unwrap();
        assert_abs_diff_eq!(d, (1.0 - ov).sqrt(), epsilon = 1e-10);
    }
}

#[test]
fn trace_distance_metric_properties() {
    let mut rng = trial_rng(15, 0);
    let sp = RegisterSpace::single("q", 4).unwrap();
    for _ in 0..10 {
        let x = haar_state(sp.clone(), &mut rng);
        let y = haar_state(sp.clone(), &mut rng);
        let z = haar_state(sp.clone(), &mut rng);
        let dxy = trace_distance(&x, &y).unwrap();
        let dyx = trace_distance(&y, &x).unwrap();
        assert_abs_diff_eq!(dxy, dyx, epsilon = 1e-12);
        assert!(trace_distance(&x, &x).unwrap() < 1e-12);
        assert!(dxy >= 0.0 && dxy <= 1.0 + 1e-12);
        let dxz = trace_distance(&x, &z).unwrap();
        let dzy = trace_distance(&z, &y).unwrap();
        assert!(dxy <= dxz + dzy + 1e-10);
    }
}

#[test]
fn gentle_measurement_bound() {
    // If Tr(P rho) >= 1 - eps then d(rho, P rho P / tr) <= 2 sqrt(eps).
    let mut rng = trial_rng(16, 0);
    let sp = RegisterSpace::single("q", 6).unwrap();
    for _ in 0..50 {
        let psi = haar_state(sp.clone(), &mut rng);
        let p = random_projector(sp.clone(), 4, &mut rng);
        let branches = psi.measure_branches(&p).unwrap();
        let prob = branches.prob_one;
        if prob < 0.5 {
            continue;
        }
        let eps = 1.0 - prob;
        let post = branches.post_one.unwrap();
        let d = trace_distance(&psi, &post).unwrap();
        assert!(
            d <= 2.0 * eps.sqrt() + 1e-10,
            "gentle measurement violated: d={d}, eps={eps}"
        );
    }
}

#[test]
fn measurement_branches_recombine_to_dephased_state() {
    let mut rng = trial_rng(17, 0);
    let sp = RegisterSpace::single("q", 5).unwrap();
    for _ in 0..20 {
        let psi = haar_state(sp.clone(), &mut rng);
        let p = random_projector(sp.clone(), 2, &mut rng);
        let br = psi.measure_branches(&p).unwrap();
        let rho = psi.density();
        let pm = p.mat();
        let qm = p.complement().unwrap().mat().clone();
        let dephased = pm * &rho * pm + &qm * &rho * &qm;
        let mut recombined = CMat::zeros(5, 5);
        if let Some(s) = &br.post_one {
            recombined += s.density() * c(br.prob_one, 0.0);
        }
        if let Some(s) = &br.post_zero {
            recombined += s.density() * c(1.0 - br.prob_one, 0.0);
        }
        assert!((recombined - dephased).norm() < 1e-10);
    }
}

#[test]
fn binary_measure_sampling_statistics() {
    let mut rng = trial_rng(18, 0);
    let sp = RegisterSpace::single("q", 4).unwrap();
    let psi = haar_state(sp.clone(), &mut rng);
    let p = random_projector(sp.clone(), 2, &mut rng);
    let prob = psi.expectation(&p).unwrap();
    let n = 4000;
    let mut ones = 0;
    for _ in 0..n {
        let out = psi.binary_measure(&p, &mut rng).unwrap();
        if out.outcome {
            ones += 1;
            assert_abs_diff_eq!(out.state.expectation(&p).unwrap(), 1.0, epsilon = 1e-9);
        } else {
            assert_abs_diff_eq!(out.state.expectation(&p).unwrap(), 0.0, epsilon = 1e-9);
        }
    }
    let freq = ones as f64 / n as f64;
    let sigma = (prob * (1.0 - prob) / n as f64).sqrt();
    assert!(
        (freq - prob).abs() < 5.0 * sigma,
        "freq {freq} vs prob {prob} (sigma {sigma})"
    );
}

#[test]
fn measure_family_requires_completeness_and_samples() {
    let mut rng = trial_rng(19, 0);
    let sp = RegisterSpace::single("q", 4).unwrap();
    let psi = haar_state(sp.clone(), &mut rng);
    let u = haar_unitary(4, &mut rng);
    let projs: Vec<QOperator> = (0..4)
        .map(|j| {
            let col = u.column(j);
            QOperator::projector(sp.clone(), col * col.adjoint()).unwrap()
        })
        .collect();
    let (idx, prob, post) = psi.measure_family(&projs, &mut rng).unwrap();
    assert!(idx < 4 && prob > 0.0);
    assert_abs_diff_eq!(post.expectation(&projs[idx]).unwrap(), 1.0, epsilon = 1e-9);

    let incomplete = &projs[..2];
    assert!(psi.measure_family(incomplete, &mut rng).is_err());
}

#[test]
fn apply_to_regs_matches_embedded_operator() {
    let mut rng = trial_rng(20, 0);
    let sp = space_232();
    for labels in [vec!["b"], vec!["a", "c"], vec!["c", "a"], vec!["a", "b", "c"]] {
        let gdim: usize = labels.iter().map(|l| sp.reg_dim(l).unwrap()).product();
        let small = haar_unitary(gdim, &mut rng);
        let psi = haar_state(sp.clone(), &mut rng);
        let big = QOperator::embedded(sp.clone(), &labels_as_strs(&labels), &small, OperatorKind::Unitary)
            .unwrap();
        let via_embed = psi.apply_unitary(&big).unwrap();
        let mut v = psi.vector().unwrap().clone();
        sp.apply_to_regs(&mut v, &labels_as_strs(&labels), &small).unwrap();
        assert!((via_embed.vector().unwrap() - &v).norm() < 1e-11);
    }
}

fn labels_as_strs<'a>(v: &'a [&'a str]) -> Vec<&'a str> {
    v.to_vec()
}

#[test]
fn register_weights_match_reduced_density_diagonal() {
    let mut rng = trial_rng(21, 0);
    let sp = space_232();
    let psi = haar_state(sp.clone(), &mut rng);
    let w = sp.register_weights(psi.vector().unwrap(), "b").unwrap();
    let red = psi.partial_trace(&["b"]).unwrap().density();
    for i in 0..3 {
        assert_abs_diff_eq!(w[i], red[(i, i)].re, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

#[test]
fn structural_validation_rejects_bad_inputs() {
    let sp = RegisterSpace::single("q", 2).unwrap();
    let unnorm = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(QState::pure(sp.clone(), unnorm), Err(QError::NotNormalized(_))));

    let not_proj = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.6, 0.0)]);
    assert!(QOperator::projector(sp.clone(), not_proj).is_err());

    let not_unitary = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
    assert!(matches!(QOperator::unitary(sp.clone(), not_unitary), Err(QError::NotUnitary(_))));

    let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.2), c(0.1, 0.3), c(0.5, 0.0)]);
    assert!(matches!(QOperator::hermitian(sp, not_herm), Err(QError::NotHermitian(_))));
}

#[test]
fn dimension_cap_is_enforced_inclusively() {
    assert!(RegisterSpace::new(&[("a", 64), ("b", 64)]).is_ok());
    assert!(matches!(
        RegisterSpace::new(&[("a", 64), ("b", 64), ("c", 2)]),
        Err(QError::DimCap(_))
    ));
    assert!(RegisterSpace::new(&[("a", 4096)]).is_ok());
    assert!(RegisterSpace::new(&[("a", 4097)]).is_err());
}

#[test]
fn haar_unitary_is_unitary_and_spread() {
    let mut rng = trial_rng(22, 0);
    for dim in [2, 3, 8] {
        let u = haar_unitary(dim, &mut rng);
        let dev = (u.adjoint() * &u - CMat::identity(dim, dim)).norm();
        assert!(dev < 1e-10);
    }
    // Mean squared entry magnitude is 1/d.
    let dim = 16;
    let mut acc = 0.0;
    let reps = 30;
    for _ in 0..reps {
        let u = haar_unitary(dim, &mut rng);
        acc += u.iter().map(|x| x.norm_sqr()).sum::<f64>() / (dim * dim) as f64;
    }
    assert_abs_diff_eq!(acc / reps as f64, 1.0 / dim as f64, epsilon = 0.02);
}

#[test]
fn trial_rng_streams_are_deterministic_and_distinct() {
    use rand::Rng;
    let a: Vec<u64> = {
        let mut r = trial_rng(7, 3);
        (0..8).map(|_| r.random()).collect()
    };
    let b: Vec<u64> = {
        let mut r = trial_rng(7, 3);
        (0..8).map(|_| r.random()).collect()
    };
    let c: Vec<u64> = {
        let mut r = trial_rng(7, 4);
        (0..8).map(|_| r.random()).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn projector_onto_span_handles_dependent_vectors() {
    let sp = RegisterSpace::single("q", 3).unwrap();
    let v1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let v2 = CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let v3 = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let p = QOperator::projector_onto_span(sp, &[v1, v2, v3]).unwrap();
    assert_eq!(p.rank(), 2);
}
