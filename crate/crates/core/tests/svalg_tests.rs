use approx::assert_abs_diff_eq;
use rewind_core::jordan::*;
use rewind_core::qstate::*;
use rewind_core::rng::trial_rng;
use rewind_core::svalg::*;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

fn c(re: f64, im: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(re, im)
}

/// Rank-one pair in dimension 2 forming a single subspace of weight p.
fn angle_pair(p: f64) -> (SvPair, QState, QState, QState) {
    let sp = RegisterSpace::single("q", 2).unwrap();
    let mut pa = CMat::zeros(2, 2);
    pa[(0, 0)] = c(1.0, 0.0);
    let s = p.sqrt();
    let t = (1.0 - p).sqrt();
    let mut pb = CMat::zeros(2, 2);
    pb[(0, 0)] = c(p, 0.0);
    pb[(0, 1)] = c(s * t, 0.0);
    pb[(1, 0)] = c(s * t, 0.0);
    pb[(1, 1)] = c(1.0 - p, 0.0);
    let pa = QOperator::projector(sp.clone(), pa).unwrap();
    let pb = QOperator::projector(sp.clone(), pb).unwrap();
    let pair = SvPair::new(&pa, &pb).unwrap();
    let sub = &pair.jd().two_dim[0];
    let va1 = QState::pure(sp.clone(), sub.va1.clone()).unwrap();
    let va0 = QState::pure(sp.clone(), sub.va0.clone()).unwrap();
    let vb1 = QState::pure(sp, sub.vb1.clone()).unwrap();
    (pair, va1, va0, vb1)
}

/// Pair with weights {0.6, 0.25, 0.1, 0.05, 0.01} and one line of each
/// class, dimension 14.
fn grid_pair(seed: u64) -> SvPair {
    let mut rng = trial_rng(seed, 0);
    let sp = RegisterSpace::single("q", 14).unwrap();
    let basis = haar_unitary(14, &mut rng);
    let (pa, pb, _) =
        synth_pair(&sp, &[0.6, 0.25, 0.1, 0.05, 0.01], [1, 1, 1, 1], &basis).unwrap();
    SvPair::new(&pa, &pb).unwrap()
}

/// First stage at which the halving search accepts weight p, given the
/// iteration bound.
fn exit_stage_oracle(p: f64, kmax: u32) -> u32 {
    (1..=kmax)
        .find(|k| p > 2f64.powi(-(*k as i32) - 1))
        .unwrap_or(kmax)
}

#[test]
fn mw_fixed_mode_agreements_match_binomial_chain() {
    let (pair, va1, _, _) = angle_pair(0.3);
    let t = 21u64;
    let trials = 400usize;
    let mut counts = vec![0u64; (t as usize - 1) + 1];
    for i in 0..trials {
        let mut rng = trial_rng(700, i as u64);
        let mut ledger = CostLedger::new();
        let est = mw_estimate(&pair, &va1, EstimateMode::Fixed(t), &mut rng, &mut ledger).unwrap();
        counts[est.agreements as usize] += 1;
        assert_eq!(est.measurements, t);
        assert_eq!(ledger.a_measurements + ledger.b_measurements, t);
    }
    // Chi-squared against Binomial(t-1, 0.3), pooling the tails so every
    // bin expects at least ~5 counts.
    let oracle = Binomial::new(0.3, t - 1).unwrap();
    let edges: Vec<(usize, usize)> =
        vec![(0, 2), (3, 3), (4, 4), (5, 5), (6, 6), (7, 7), (8, 8), (9, 20)];
    let mut stat = 0.0;
    for (lo, hi) in &edges {
        let observed: u64 = counts[*lo..=*hi].iter().sum();
        let expected: f64 =
            (*lo..=*hi).map(|k| oracle.pmf(k as u64)).sum::<f64>() * trials as f64;
        stat += (observed as f64 - expected).powi(2) / expected;
    }
    let crit = ChiSquared::new(edges.len() as f64 - 1.0).unwrap().inverse_cdf(0.99);
    assert!(stat < crit, "chi-squared {stat:.2} exceeds the 1% critical value {crit:.2}");
}

#[test]
fn mw_fixed_mode_mean_converges_on_eigenvector() {
    let (pair, va1, _, _) = angle_pair(0.3);
    let trials = 500;
    let mut sum = 0.0;
    for i in 0..trials {
        let mut rng = trial_rng(701, i as u64);
        let mut ledger = CostLedger::new();
        let est =
            mw_estimate(&pair, &va1, EstimateMode::Fixed(10_000), &mut rng, &mut ledger).unwrap();
        sum += est.p_est;
    }
    let mean = sum / trials as f64;
    assert!((mean - 0.3).abs() < 0.02, "mean estimate {mean} strays from 0.3");
}

#[test]
fn mw_eigenstates_with_extreme_weight_are_fixed_points() {
    let sp = RegisterSpace::single("q", 4).unwrap();
    let basis = haar_unitary(4, &mut trial_rng(702, 0));
    // One shared line and one weight-zero line pair alongside a subspace.
    let (pa, pb, _) = synth_pair(&sp, &[0.5], [1, 1, 0, 0], &basis).unwrap();
    let pair = SvPair::new(&pa, &pb).unwrap();
    let shared = QState::pure(sp.clone(), pair.jd().one_dim[0].vec.clone()).unwrap();
    let mut rng = trial_rng(702, 1);
    let mut ledger = CostLedger::new();
    let est =
        mw_estimate(&pair, &shared, EstimateMode::Fixed(200), &mut rng, &mut ledger).unwrap();
    assert_abs_diff_eq!(est.p_est, 1.0);
    assert_abs_diff_eq!(est.post.overlap(&shared).unwrap(), 1.0, epsilon = 1e-9);

    // A weight-zero line in image(A): outcomes alternate 1,0,1,0...
    let dead = QState::pure(sp, pair.jd().one_dim[1].vec.clone()).unwrap();
    let est = mw_estimate(&pair, &dead, EstimateMode::Fixed(200), &mut rng, &mut ledger).unwrap();
    assert_abs_diff_eq!(est.p_est, 0.0);
}

#[test]
fn mw_variable_mode_stops_at_target_or_reports_cap() {
    let (pair, va1, _, _) = angle_pair(0.5);
    let mut lengths = Vec::new();
    for i in 0..200 {
        let mut rng = trial_rng(703, i);
        let mut ledger = CostLedger::new();
        let est = mw_estimate(
            &pair,
            &va1,
            EstimateMode::Variable { d_target: 20, cap: 100_000 },
            &mut rng,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(est.agreements, 20);
        assert_abs_diff_eq!(est.p_est, 20.0 / (est.measurements - 1) as f64);
        lengths.push(est.measurements as f64);
    }
    // Mean stopping time for 20 agreements at stay-probability 1/2 is
    // about 41 measurements.
    let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
    assert!((mean - 41.0).abs() < 4.0, "mean stopping time {mean}");

    let (pair, va1, _, _) = angle_pair(0.04);
    let mut rng = trial_rng(703, 999);
    let mut ledger = CostLedger::new();
    let err = mw_estimate(
        &pair,
        &va1,
        EstimateMode::Variable { d_target: 59, cap: 60 },
        &mut rng,
        &mut ledger,
    )
    .unwrap_err();
    assert!(matches!(err, QError::CapExceeded(_)));
}

#[test]
fn threshold_is_deterministic_on_eigenvectors() {
    let pair = grid_pair(10);
    let sp = pair.jd().space().clone();
    let mut rng = trial_rng(704, 0);
    let mut ledger = CostLedger::new();

    // Shared line: weight exactly 1, accepts any threshold.
    let shared = QState::pure(sp.clone(), pair.jd().one_dim[0].vec.clone()).unwrap();
    let params = SVAlgParams::new(1.0, 0.5, 1e-3, Backend::Sampled).unwrap();
    for _ in 0..20 {
        let (bit, post) = threshold(&pair, &shared, &params, &mut rng, &mut ledger).unwrap();
        assert!(bit);
        assert_abs_diff_eq!(post.overlap(&shared).unwrap(), 1.0, epsilon = 1e-9);
    }

    // Weight at the rejection edge b - eps: always 0, state untouched.
    let va1 = QState::pure(sp.clone(), pair.jd().two_dim[1].va1.clone()).unwrap();
    let params = SVAlgParams::new(0.35 + 1e-6, 0.1, 1e-3, Backend::Sampled).unwrap();
    for _ in 0..20 {
        let (bit, post) = threshold(&pair, &va1, &params, &mut rng, &mut ledger).unwrap();
        assert!(!bit);
        assert_abs_diff_eq!(post.overlap(&va1).unwrap(), 1.0, epsilon = 1e-9);
    }

    // Weight well above b: always 1.
    let top = QState::pure(sp, pair.jd().two_dim[0].va1.clone()).unwrap();
    let params = SVAlgParams::new(0.5, 0.1, 1e-3, Backend::Sampled).unwrap();
    for _ in 0..20 {
        let (bit, post) = threshold(&pair, &top, &params, &mut rng, &mut ledger).unwrap();
        assert!(bit);
        assert_abs_diff_eq!(post.overlap(&top).unwrap(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn threshold_statistics_on_straddling_superposition_match_weights() {
    let pair = grid_pair(11);
    let jd = pair.jd();
    let v = (&jd.two_dim[0].va1 + &jd.two_dim[1].va1) / c(2f64.sqrt(), 0.0);
    let s = QState::pure(jd.space().clone(), v).unwrap();
    let params = SVAlgParams::new(0.5, 0.1, 1e-3, Backend::Sampled).unwrap();
    let trials = 500;
    let mut ones = 0;
    for i in 0..trials {
        let mut rng = trial_rng(705, i);
        let mut ledger = CostLedger::new();
        let (bit, post) = threshold(&pair, &s, &params, &mut rng, &mut ledger).unwrap();
        if bit {
            ones += 1;
            // Outcome 1 keeps only the 0.6 subspace.
            let w = jd.weights(&post).unwrap();
            assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-9);
        }
    }
    let expect = 0.5 * trials as f64;
    let sigma = (trials as f64 * 0.25).sqrt();
    assert!(
        (ones as f64 - expect).abs() < 5.0 * sigma,
        "{ones} acceptances out of {trials}"
    );
}

#[test]
fn threshold_with_eps_above_b_accepts_everything() {
    let pair = grid_pair(12);
    let sp = pair.jd().space().clone();
    // A dead line (weight zero) still accepts when the cut drops below 0.
    let dead = QState::pure(sp, pair.jd().one_dim[3].vec.clone()).unwrap();
    let params = SVAlgParams::new(0.01, 0.5, 1e-3, Backend::Sampled).unwrap();
    let mut rng = trial_rng(706, 0);
    let mut ledger = CostLedger::new();
    let (bit, post) = threshold(&pair, &dead, &params, &mut rng, &mut ledger).unwrap();
    assert!(bit);
    assert_abs_diff_eq!(post.overlap(&dead).unwrap(), 1.0, epsilon = 1e-9);
}

#[test]
fn transform_rotates_a_basis_onto_b_basis() {
    // |0> against |+>: one subspace of weight 1/2.
    let (pair, va1, _, vb1) = angle_pair(0.5);
    let mut ledger = CostLedger::new();
    let out = transform(&pair, &va1, 0.5, 1e-3, &mut ledger).unwrap();
    assert_abs_diff_eq!(out.overlap(&vb1).unwrap(), 1.0, epsilon = 1e-12);

    // Aligned projectors: nothing to rotate.
    let sp = RegisterSpace::single("q", 6).unwrap();
    let p = random_projector(sp.clone(), 3, &mut trial_rng(707, 0));
    let pair = SvPair::new(&p, &p).unwrap();
    let psi = haar_state(sp, &mut trial_rng(707, 1));
    let out = transform(&pair, &psi, 0.5, 1e-3, &mut ledger).unwrap();
    assert_abs_diff_eq!(out.overlap(&psi).unwrap(), 1.0, epsilon = 1e-9);

    // Superposition of a-side vectors maps to the matching superposition
    // of b-side vectors with unit fidelity.
    let pair = grid_pair(13);
    let jd = pair.jd();
    let coeffs = [c(0.5, 0.2), c(-0.3, 0.4), c(0.2, -0.1)];
    let mut vin = CVec::zeros(14);
    let mut vout = CVec::zeros(14);
    for (sub, co) in jd.two_dim.iter().take(3).zip(coeffs.iter()) {
        vin += &sub.va1 * *co;
        vout += &sub.vb1 * *co;
    }
    let n = vin.norm();
    let sin = QState::pure(jd.space().clone(), vin / c(n, 0.0)).unwrap();
    let want = QState::pure(jd.space().clone(), vout / c(n, 0.0)).unwrap();
    let out = transform(&pair, &sin, 0.01, 1e-3, &mut ledger).unwrap();
    assert_abs_diff_eq!(out.overlap(&want).unwrap(), 1.0, epsilon = 1e-9);
}

#[test]
fn ledger_charges_documented_costs_and_tracks_phases() {
    let (pair, va1, _, _) = angle_pair(0.5);
    let mut rng = trial_rng(708, 0);
    let mut ledger = CostLedger::new();
    ledger.enter_phase("probe");
    let params = SVAlgParams::new(0.5, 0.125, 2f64.powi(-10), Backend::Sampled).unwrap();
    threshold(&pair, &va1, &params, &mut rng, &mut ledger).unwrap();
    // ceil(10 * sqrt(0.5) / 0.125) = 57.
    assert_eq!(ledger.reflections, 57);
    assert_eq!(ledger.phase_costs["probe"], 57);

    ledger.enter_phase("rotate");
    transform(&pair, &va1, 0.25, 2f64.powi(-10), &mut ledger).unwrap();
    // ceil(10 / 0.5) = 20.
    assert_eq!(ledger.reflections, 77);
    assert_eq!(ledger.phase_costs["rotate"], 20);
    assert_eq!(ledger.phase_costs["probe"], 57);
    ledger.charge_prover(3);
    assert_eq!(ledger.prover_calls, 3);
    assert_eq!(ledger.total(), 80);
}

#[test]
fn flip_moves_kernel_vector_into_image() {
    for (p, seed) in [(0.5, 709u64), (0.7, 710u64)] {
        let (pair, va1, va0, _) = angle_pair(p);
        let delta = 0.05;
        let trials = 400;
        let mut failures = 0;
        for i in 0..trials {
            let mut rng = trial_rng(seed, i);
            let mut ledger = CostLedger::new();
            let out =
                flip(&pair, &va0, p, delta, Backend::Sampled, &mut rng, &mut ledger).unwrap();
            if out.failed {
                failures += 1;
            } else {
                assert_abs_diff_eq!(out.state.overlap(&va1).unwrap(), 1.0, epsilon = 1e-9);
            }
            assert!(out.measurements <= flip_cap(delta));
        }
        let sigma = (trials as f64 * delta * (1.0 - delta)).sqrt();
        assert!(
            (failures as f64) < delta * trials as f64 + 3.0 * sigma,
            "{failures} flip failures at weight {p}"
        );
    }
}

#[test]
fn flip_keeps_image_side_inputs_and_ideal_backend_is_exact() {
    let (pair, va1, va0, _) = angle_pair(0.6);
    let mut rng = trial_rng(711, 0);
    let mut ledger = CostLedger::new();
    for _ in 0..20 {
        let out = flip(&pair, &va1, 0.5, 0.05, Backend::Sampled, &mut rng, &mut ledger).unwrap();
        assert!(!out.failed);
        assert_abs_diff_eq!(out.state.overlap(&va1).unwrap(), 1.0, epsilon = 1e-9);
    }
    let out = flip(&pair, &va0, 0.5, 0.05, Backend::Ideal, &mut rng, &mut ledger).unwrap();
    assert!(!out.failed);
    assert_abs_diff_eq!(out.state.overlap(&va1).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn var_estimate_output_matches_exit_stage_oracle_on_eigenvectors() {
    let pair = grid_pair(14);
    let jd = pair.jd();
    let sp = jd.space().clone();
    for delta in [0.05, 2f64.powi(-10)] {
        let kmax = (1.0 / delta).log2().ceil() as u32;
        for (j, sub) in jd.two_dim.iter().enumerate() {
            let va1 = QState::pure(sp.clone(), sub.va1.clone()).unwrap();
            let vb1 = QState::pure(sp.clone(), sub.vb1.clone()).unwrap();
            let want_k = exit_stage_oracle(sub.p, kmax);
            let want_a = 2f64.powi(-(want_k as i32) - 1);
            let cap = sub.p.max(delta);
            assert!(want_a >= cap / 4.0 - 1e-12 && want_a <= cap + 1e-12);
            let mut failures = 0;
            for (backend, trials) in [(Backend::Sampled, 40u64), (Backend::Ideal, 5u64)] {
                for i in 0..trials {
                    let mut rng = trial_rng(712 + j as u64, i + trials);
                    let mut ledger = CostLedger::new();
                    let out =
                        var_estimate(&pair, &va1, delta, backend, &mut rng, &mut ledger).unwrap();
                    assert_eq!(out.k_exit, want_k, "weight {} delta {delta}", sub.p);
                    assert_abs_diff_eq!(out.a, want_a);
                    if out.flip_failed {
                        failures += 1;
                    } else {
                        assert_abs_diff_eq!(
                            out.state.overlap(&vb1).unwrap(),
                            1.0,
                            epsilon = 1e-9
                        );
                    }
                }
            }
            assert!(failures <= 5, "{failures} fix-up failures at weight {}", sub.p);
        }
        // Shared line: weight 1, first stage accepts, state already fixed.
        let shared = QState::pure(sp.clone(), jd.one_dim[0].vec.clone()).unwrap();
        let mut rng = trial_rng(713, 0);
        let mut ledger = CostLedger::new();
        let out =
            var_estimate(&pair, &shared, delta, Backend::Sampled, &mut rng, &mut ledger).unwrap();
        assert_eq!(out.k_exit, 1);
        assert_abs_diff_eq!(out.a, 0.25);
        assert_abs_diff_eq!(out.state.overlap(&shared).unwrap(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn var_estimate_cost_grows_with_shrinking_weight() {
    let pair = grid_pair(15);
    let jd = pair.jd();
    let sp = jd.space().clone();
    let delta = 2f64.powi(-10);
    let mut costs = Vec::new();
    for sub in [&jd.two_dim[0], &jd.two_dim[4]] {
        let va1 = QState::pure(sp.clone(), sub.va1.clone()).unwrap();
        let mut rng = trial_rng(714, 0);
        let mut ledger = CostLedger::new();
        var_estimate(&pair, &va1, delta, Backend::Ideal, &mut rng, &mut ledger).unwrap();
        costs.push(ledger.total() as f64);
    }
    // Weights 0.6 vs 0.01: the advertised cost scales like 1/sqrt(a), so
    // the ratio should be near sqrt(0.25/0.0078) ~ 5.7, well above 2.
    assert!(costs[1] / costs[0] > 2.0, "costs {costs:?}");
}

#[test]
fn var_estimate_post_state_lands_in_image_b_on_generic_states() {
    let pair = grid_pair(16);
    let jd = pair.jd();
    let pb = jd.pb().clone();
    for backend in [Backend::Sampled, Backend::Ideal] {
        for i in 0..25 {
            let mut rng = trial_rng(715, i);
            let mut ledger = CostLedger::new();
            let psi = haar_state(jd.space().clone(), &mut rng);
            let out = var_estimate(&pair, &psi, 0.02, backend, &mut rng, &mut ledger).unwrap();
            let bw = out.state.expectation(&pb).unwrap();
            if !out.flip_failed {
                assert!(bw > 1.0 - 1e-9, "image(B) weight {bw}");
            }
            assert!(out.a > 0.0 && out.a <= 0.25);
        }
    }
}

#[test]
fn threshold_accepts_fresh_estimate() {
    // Thresholding at the value the estimator just output accepts, with an
    // accuracy floor handled by the vacuous regime when the estimate is
    // tiny.
    let pair = grid_pair(17);
    let jd = pair.jd();
    let delta = 0.02;
    for backend in [Backend::Sampled, Backend::Ideal] {
        let mut flagged = 0;
        for i in 0..50 {
            let mut rng = trial_rng(716, i);
            let mut ledger = CostLedger::new();
            let psi = haar_state(jd.space().clone(), &mut rng);
            let est = var_estimate(&pair, &psi, delta, backend, &mut rng, &mut ledger).unwrap();
            if est.flip_failed {
                // The failure budget covers runs whose fix-up could not
                // leave the dead lines; only those may reject.
                flagged += 1;
                continue;
            }
            let eps = delta.max(est.a / 2.0);
            let params = SVAlgParams::new(est.a, eps, delta, backend).unwrap();
            let (bit, _) = threshold(&pair, &est.state, &params, &mut rng, &mut ledger).unwrap();
            assert!(bit, "threshold rejected its own estimate {} (trial {i})", est.a);
        }
        assert!(flagged <= 17, "{flagged} flagged fix-up failures out of 50");
    }
}

#[test]
fn consecutive_thresholds_never_flip_and_accepted_weights_stay_above_cut() {
    let pair = grid_pair(18);
    let jd = pair.jd();
    let (p, eps, delta) = (0.5, 0.1, 0.05);
    for i in 0..200 {
        let mut rng = trial_rng(717, i);
        let mut ledger = CostLedger::new();
        let psi = haar_state(jd.space().clone(), &mut rng);
        let params = SVAlgParams::new(p, eps, delta, Backend::Sampled).unwrap();
        let (b1, s1) = threshold(&pair, &psi, &params, &mut rng, &mut ledger).unwrap();
        if !b1 {
            continue;
        }
        let params2 = SVAlgParams::new(p - eps, eps, delta, Backend::Sampled).unwrap();
        let (b2, _) = threshold(&pair, &s1, &params2, &mut rng, &mut ledger).unwrap();
        assert!(b2, "second threshold disagreed after acceptance");
        let (j, _, _) = jd.measure(&s1, &mut rng).unwrap();
        assert!(
            jd.weight_of(j) >= p - eps,
            "accepted state measured into weight {}",
            jd.weight_of(j)
        );
    }
}

#[test]
fn vrsvt_carries_a_side_vectors_to_b_side() {
    let (pair, va1, _, vb1) = angle_pair(0.5);
    let delta = 0.05;
    for backend in [Backend::Sampled, Backend::Ideal] {
        let mut ok = 0;
        for i in 0..100 {
            let mut rng = trial_rng(718, i);
            let mut ledger = CostLedger::new();
            let out = vrsvt(&pair, &va1, delta, backend, &mut rng, &mut ledger).unwrap();
            assert!(out.q >= 0.125 - 1e-12 && out.q <= 0.5 + 1e-12, "q = {}", out.q);
            if !out.flip_failed && out.state.overlap(&vb1).unwrap() > 1.0 - 1e-9 {
                ok += 1;
            }
        }
        assert!(ok >= 90, "only {ok} clean transforms");
    }

    // Aligned projectors pass in-image states through.
    let sp = RegisterSpace::single("q", 6).unwrap();
    let p = random_projector(sp.clone(), 2, &mut trial_rng(719, 0));
    let pair = SvPair::new(&p, &p).unwrap();
    let raw = haar_state(sp.clone(), &mut trial_rng(719, 1));
    let v = p.mat() * raw.vector().unwrap();
    let n = v.norm();
    let psi = QState::pure(sp, v / c(n, 0.0)).unwrap();
    let mut rng = trial_rng(719, 2);
    let mut ledger = CostLedger::new();
    let out = vrsvt(&pair, &psi, 0.05, Backend::Sampled, &mut rng, &mut ledger).unwrap();
    assert_abs_diff_eq!(out.state.overlap(&psi).unwrap(), 1.0, epsilon = 1e-9);
}

#[test]
fn vrsvt_cost_concentrates_near_inverse_root_weight() {
    let delta = 2f64.powi(-8);
    let mut totals = Vec::new();
    for p in [0.64, 0.04] {
        let (pair, va1, _, _) = angle_pair(p);
        let mut acc = 0u64;
        for i in 0..50 {
            let mut rng = trial_rng(720, i);
            let mut ledger = CostLedger::new();
            vrsvt(&pair, &va1, delta, Backend::Sampled, &mut rng, &mut ledger).unwrap();
            acc += ledger.total();
        }
        totals.push(acc as f64 / 50.0);
    }
    let ratio = totals[1] / totals[0];
    assert!(
        (2.0..12.0).contains(&ratio),
        "cost ratio {ratio} out of the 1/sqrt(p) ballpark (totals {totals:?})"
    );
}

#[test]
fn all_algorithms_preserve_the_hosting_subspace() {
    let pair = grid_pair(19);
    let jd = pair.jd();
    let sp = jd.space().clone();
    let sub = &jd.two_dim[1];
    let v = &sub.va1 * c(0.8, 0.0) + &sub.va0 * c(0.0, 0.6);
    let inputs = [
        QState::pure(sp.clone(), sub.va1.clone()).unwrap(),
        QState::pure(sp.clone(), sub.va0.clone()).unwrap(),
        QState::pure(sp.clone(), v).unwrap(),
    ];
    for backend in [Backend::Sampled, Backend::Ideal] {
        for (i, input) in inputs.iter().enumerate() {
            let mut rng = trial_rng(721, i as u64);
            let mut ledger = CostLedger::new();
            let outs: Vec<QState> = vec![
                mw_estimate(&pair, input, EstimateMode::Fixed(30), &mut rng, &mut ledger)
                    .unwrap()
                    .post,
                threshold(
                    &pair,
                    input,
                    &SVAlgParams::new(0.3, 0.1, 0.05, backend).unwrap(),
                    &mut rng,
                    &mut ledger,
                )
                .unwrap()
                .1,
                transform(&pair, input, 0.2, 0.05, &mut ledger).unwrap(),
                flip(&pair, input, 0.2, 0.05, backend, &mut rng, &mut ledger).unwrap().state,
                var_estimate(&pair, input, 0.05, backend, &mut rng, &mut ledger).unwrap().state,
                vrsvt(&pair, input, 0.05, backend, &mut rng, &mut ledger).unwrap().state,
            ];
            for out in outs {
                let w = jd.weights(&out).unwrap();
                assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn runs_are_reproducible_for_equal_seeds() {
    let pair = grid_pair(20);
    let psi = haar_state(pair.jd().space().clone(), &mut trial_rng(722, 0));
    let run = || {
        let mut rng = trial_rng(722, 1);
        let mut ledger = CostLedger::new();
        let out =
            var_estimate(&pair, &psi, 0.05, Backend::Sampled, &mut rng, &mut ledger).unwrap();
        (out.a, out.k_exit, out.state.density(), ledger.total())
    };
    let (a1, k1, d1, t1) = run();
    let (a2, k2, d2, t2) = run();
    assert_eq!(a1, a2);
    assert_eq!(k1, k2);
    assert_eq!(t1, t2);
    assert_eq!(d1, d2);
}
