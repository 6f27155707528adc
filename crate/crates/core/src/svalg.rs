//! Alternating-measurement and singular-vector algorithms on a projector
//! pair: estimation, thresholding, transformation, flipping, variable-cost
//! estimation and the two-stage variable-cost transform.
//!
//! Every algorithm runs in one of two backends. The sampled backend plays
//! measurement sequences out one projection at a time. The ideal backend
//! applies the exact per-subspace effect each contract promises, treating
//! the failure budget as zero for state evolution, while the ledger still
//! charges the advertised asymptotic cost with unit constants.

use crate::jordan::{jordan_decompose_default, JordanDecomposition, ThresholdRange};
use crate::qstate::{cplx, CMat, QError, QOperator, QState};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Backend {
    Sampled,
    Ideal,
}

/// Threshold value, accuracy and failure budget shared by the
/// singular-vector algorithms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SVAlgParams {
    pub b: f64,
    pub eps: f64,
    pub delta: f64,
    pub backend: Backend,
}

impl SVAlgParams {
    /// Discrimination is meaningful for eps <= b; eps > b is allowed and
    /// makes the threshold vacuous (the cut b - eps drops below zero, so
    /// every subspace accepts). Thresholding at a freshly estimated weight
    /// with a floor on eps relies on that case when the estimate is tiny.
    pub fn new(b: f64, eps: f64, delta: f64, backend: Backend) -> Result<Self, QError> {
        if !(eps > 0.0 && b > 0.0 && b <= 1.0) {
            return Err(QError::Invalid(format!(
                "need 0 < b <= 1 and eps > 0, got b = {b}, eps = {eps}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(QError::Invalid(format!("need 0 < delta < 1, got {delta}")));
        }
        Ok(SVAlgParams { b, eps, delta, backend })
    }
}

#[derive(Debug, Clone, Copy)]
enum CostLabel {
    MeasA,
    MeasB,
    Reflection,
    Prover,
}

/// Oracle-call counters, optionally accumulated under named phases.
/// Counters only ever grow.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CostLedger {
    pub a_measurements: u64,
    pub b_measurements: u64,
    pub reflections: u64,
    pub prover_calls: u64,
    pub phase_costs: BTreeMap<String, u64>,
    #[serde(skip)]
    phase: Option<String>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges from here on also accumulate under this phase name.
    pub fn enter_phase(&mut self, name: &str) {
        self.phase_costs.entry(name.to_string()).or_insert(0);
        self.phase = Some(name.to_string());
    }

    pub fn total(&self) -> u64 {
        self.a_measurements + self.b_measurements + self.reflections + self.prover_calls
    }

    fn charge(&mut self, label: CostLabel, n: u64) {
        match label {
            CostLabel::MeasA => self.a_measurements += n,
            CostLabel::MeasB => self.b_measurements += n,
            CostLabel::Reflection => self.reflections += n,
            CostLabel::Prover => self.prover_calls += n,
        }
        if let Some(p) = &self.phase {
            *self.phase_costs.get_mut(p).unwrap() += n;
        }
    }

    /// Oracle calls to an external party (charged by higher-level drivers).
    pub fn charge_prover(&mut self, n: u64) {
        self.charge(CostLabel::Prover, n);
    }

    /// Measurement and reflection charges applied by higher-level drivers
    /// for coherent operations they realize outside the svalg entry points.
    pub fn charge_measure_a(&mut self, n: u64) {
        self.charge(CostLabel::MeasA, n);
    }

    pub fn charge_measure_b(&mut self, n: u64) {
        self.charge(CostLabel::MeasB, n);
    }

    pub fn charge_reflection(&mut self, n: u64) {
        self.charge(CostLabel::Reflection, n);
    }
}

/// Cost of one threshold call at unit constants.
pub fn threshold_cost(b: f64, eps: f64, delta: f64) -> u64 {
    ((1.0 / delta).log2() * b.sqrt() / eps).ceil().max(1.0) as u64
}

/// Circuit size of one fixed transform call at unit constants.
pub fn transform_cost(a: f64, delta: f64) -> u64 {
    ((1.0 / delta).log2() / a.sqrt()).ceil().max(1.0) as u64
}

/// Measurement budget of one flip call.
pub fn flip_cap(delta: f64) -> u64 {
    (3.0 * (1.0 / delta).log2()).ceil().max(1.0) as u64
}

/// A projector pair with its Jordan decomposition plus the derived
/// decompositions the algorithms need: the complemented pair (for
/// conditioning measurements that returned 0) and the role-swapped pair
/// (for steering back into image(B)).
pub struct SvPair {
    jd: JordanDecomposition,
    swap: JordanDecomposition,
    comp: JordanDecomposition,
    comp_swap: JordanDecomposition,
}

impl SvPair {
    pub fn new(a: &QOperator, b: &QOperator) -> Result<Self, QError> {
        Self::from_decomposition(jordan_decompose_default(a, b)?)
    }

    pub fn from_decomposition(jd: JordanDecomposition) -> Result<Self, QError> {
        let swap = jd.swapped()?;
        let comp = jd.complemented()?;
        let comp_swap = comp.swapped()?;
        Ok(SvPair { jd, swap, comp, comp_swap })
    }

    pub fn jd(&self) -> &JordanDecomposition {
        &self.jd
    }
}

/// Binary singular-value threshold. Outcome 1 keeps the part of the state
/// on subspaces with weight above b - eps, outcome 0 the rest, so
/// eigenvector inputs pass through unchanged; this is the zero-failure
/// limit of the discrimination contract in both backends.
pub fn threshold<R: Rng + ?Sized>(
    pair: &SvPair,
    s: &QState,
    params: &SVAlgParams,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<(bool, QState), QError> {
    threshold_with(&pair.jd, s, params, rng, ledger)
}

fn threshold_with<R: Rng + ?Sized>(
    jd: &JordanDecomposition,
    s: &QState,
    params: &SVAlgParams,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<(bool, QState), QError> {
    ledger.charge(
        CostLabel::Reflection,
        threshold_cost(params.b, params.eps, params.delta),
    );
    let proj = jd.threshold_projector(ThresholdRange::PAbove(params.b - params.eps));
    let out = s.binary_measure(&proj, rng)?;
    Ok((out.outcome, out.state))
}

/// Fixed-cost singular-vector transform: rotates the a-side basis onto the
/// b-side basis in every subspace. The contract promises this only for
/// weights at least a; the ideal effect applies the rotation everywhere.
pub fn transform(
    pair: &SvPair,
    s: &QState,
    a: f64,
    delta: f64,
    ledger: &mut CostLedger,
) -> Result<QState, QError> {
    ledger.charge(CostLabel::Reflection, transform_cost(a, delta));
    s.apply_unitary(&pair.jd.ab_transform_unitary())
}

#[derive(Debug, Clone, Copy)]
pub enum EstimateMode {
    /// Exactly this many alternating measurements.
    Fixed(u64),
    /// Measure until d_target consecutive-equal outcome pairs, with a hard
    /// cap on total measurements.
    Variable { d_target: u64, cap: u64 },
}

#[derive(Debug, Clone)]
pub struct MwEstimate {
    pub p_est: f64,
    pub measurements: u64,
    pub agreements: u64,
    pub post: QState,
}

/// Alternating-measurement weight estimate: measure A, B, A, B, ... and
/// count consecutive equal outcomes. On an eigenvector each consecutive
/// pair agrees independently with probability p_j, so the agreement
/// fraction d/(t-1) estimates the weight. Always played out measurement by
/// measurement; the backend flag does not change it.
pub fn mw_estimate<R: Rng + ?Sized>(
    pair: &SvPair,
    s: &QState,
    mode: EstimateMode,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<MwEstimate, QError> {
    let (cap, target) = match mode {
        EstimateMode::Fixed(t) => {
            if t < 2 {
                return Err(QError::Invalid("fixed estimate needs t >= 2".into()));
            }
            (t, None)
        }
        EstimateMode::Variable { d_target, cap } => {
            if d_target == 0 || cap < 2 {
                return Err(QError::Invalid("variable estimate needs d_target >= 1, cap >= 2".into()));
            }
            (cap, Some(d_target))
        }
    };
    let mut state = s.clone();
    let mut prev: Option<bool> = None;
    let mut agreements = 0u64;
    let mut taken = 0u64;
    while taken < cap {
        let use_a = taken % 2 == 0;
        let proj = if use_a { pair.jd.pa() } else { pair.jd.pb() };
        ledger.charge(if use_a { CostLabel::MeasA } else { CostLabel::MeasB }, 1);
        let out = state.binary_measure(proj, rng)?;
        state = out.state;
        taken += 1;
        if prev == Some(out.outcome) {
            agreements += 1;
        }
        prev = Some(out.outcome);
        if target.is_some_and(|d| agreements >= d) {
            break;
        }
    }
    if let Some(d) = target {
        if agreements < d {
            return Err(QError::CapExceeded(format!(
                "variable estimate reached the {cap}-measurement cap with {agreements} of {d} agreements"
            )));
        }
    }
    Ok(MwEstimate {
        p_est: agreements as f64 / (taken - 1).max(1) as f64,
        measurements: taken,
        agreements,
        post: state,
    })
}

#[derive(Debug, Clone)]
pub struct FlipOutcome {
    pub state: QState,
    pub failed: bool,
    pub measurements: u64,
}

/// Moves the kernel(A)-side singular vector of each subspace into
/// image(A): alternate B and A measurements (B first, so every measurement
/// on the intended vA0 input absorbs with probability 1 - p_j). A b-side
/// hit gets rotated back with the fixed transform and the loop keeps
/// going; the only exit is an A measurement returning 1, which lands the
/// state in image(A) exactly. Exhausting the measurement budget raises the
/// failure flag. The ideal backend applies the image(A)-conditioned
/// in-subspace swap channel outright and charges the budgets.
pub fn flip<R: Rng + ?Sized>(
    pair: &SvPair,
    s: &QState,
    eps: f64,
    delta: f64,
    backend: Backend,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<FlipOutcome, QError> {
    flip_with(&pair.jd, s, eps, delta, backend, rng, ledger)
}

fn flip_with<R: Rng + ?Sized>(
    jd: &JordanDecomposition,
    s: &QState,
    eps: f64,
    delta: f64,
    backend: Backend,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<FlipOutcome, QError> {
    let cap = flip_cap(delta);
    match backend {
        Backend::Ideal => {
            ledger.charge(CostLabel::MeasB, cap.div_ceil(2));
            ledger.charge(CostLabel::MeasA, cap / 2);
            ledger.charge(CostLabel::Reflection, transform_cost(eps, delta));
            Ok(FlipOutcome {
                state: a_conditioned_swap(jd, s)?,
                failed: false,
                measurements: cap,
            })
        }
        Backend::Sampled => {
            let mut state = s.clone();
            let back = {
                let u = jd.ab_transform_unitary();
                QOperator::unitary(jd.space().clone(), u.mat().adjoint())?
            };
            let mut taken = 0u64;
            while taken < cap {
                let use_b = taken % 2 == 0;
                let proj = if use_b { jd.pb() } else { jd.pa() };
                ledger.charge(if use_b { CostLabel::MeasB } else { CostLabel::MeasA }, 1);
                let out = state.binary_measure(proj, rng)?;
                state = out.state;
                taken += 1;
                if out.outcome {
                    if use_b {
                        ledger.charge(CostLabel::Reflection, transform_cost(eps, delta));
                        state = state.apply_unitary(&back)?;
                    } else {
                        return Ok(FlipOutcome { state, failed: false, measurements: taken });
                    }
                }
            }
            Ok(FlipOutcome { state, failed: true, measurements: taken })
        }
    }
}

/// The channel keeping the image(A) part of the state and swapping the
/// rest into image(A) subspace by subspace (identity on lines).
fn a_conditioned_swap(jd: &JordanDecomposition, s: &QState) -> Result<QState, QError> {
    let br = s.measure_branches(jd.pa())?;
    let u = jd.rotate_swap_unitary();
    match (br.post_one, br.post_zero) {
        (Some(one), None) => Ok(one),
        (None, Some(zero)) => zero.apply_unitary(&u),
        (Some(one), Some(zero)) => {
            let m = one.density() * cplx(br.prob_one, 0.0)
                + u.mat() * zero.density() * u.mat().adjoint() * cplx(1.0 - br.prob_one, 0.0);
            QState::mixed(jd.space().clone(), m)
        }
        (None, None) => Err(QError::ZeroBranch),
    }
}

#[derive(Debug, Clone)]
pub struct VarEstimateOutcome {
    /// The weight estimate 2^-(k_exit + 1).
    pub a: f64,
    pub k_exit: u32,
    /// Whether the loop exited on an accepting threshold rather than the
    /// iteration bound.
    pub exited_on_one: bool,
    pub flip_failed: bool,
    pub state: QState,
}

/// Variable-cost weight estimation: probe the weight downward with halving
/// thresholds (on the complemented pair when the conditioning measurement
/// returns 0), stopping at the first accepting stage or after
/// ceil(log2(1/delta)) stages, then steer the state into image(B). On an
/// eigenvector the output lands in [max(delta, p_j)/4, max(delta, p_j)]
/// and the post-state is the b-side singular vector.
pub fn var_estimate<R: Rng + ?Sized>(
    pair: &SvPair,
    s: &QState,
    delta: f64,
    backend: Backend,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<VarEstimateOutcome, QError> {
    var_estimate_core(&pair.jd, &pair.comp, &pair.swap, s, delta, backend, rng, ledger)
}

#[allow(clippy::too_many_arguments)]
fn var_estimate_core<R: Rng + ?Sized>(
    jd: &JordanDecomposition,
    comp: &JordanDecomposition,
    swap: &JordanDecomposition,
    s: &QState,
    delta: f64,
    backend: Backend,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<VarEstimateOutcome, QError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QError::Invalid(format!("need 0 < delta < 1, got {delta}")));
    }
    let kmax = (1.0 / delta).log2().ceil().max(1.0) as u32;
    let dsub = delta / kmax as f64;
    match backend {
        Backend::Sampled => {
            let mut state = s.clone();
            let mut exited_on_one = false;
            let mut k = 0u32;
            while !exited_on_one && k < kmax {
                k += 1;
                let bk = 2f64.powi(-(k as i32));
                ledger.charge(CostLabel::MeasB, 1);
                let c = state.binary_measure(jd.pb(), rng)?;
                state = c.state;
                let params = SVAlgParams::new(bk, bk / 2.0, dsub, backend)?;
                let stage_jd = if c.outcome { jd } else { comp };
                let (bit, post) = threshold_with(stage_jd, &state, &params, rng, ledger)?;
                exited_on_one = bit;
                state = post;
            }
            ledger.charge(CostLabel::MeasB, 1);
            let c = state.binary_measure(jd.pb(), rng)?;
            state = c.state;
            let mut flip_failed = false;
            if !c.outcome {
                let a_out = 2f64.powi(-(k as i32) - 1);
                let fo = flip_with(swap, &state, a_out, delta, backend, rng, ledger)?;
                state = fo.state;
                flip_failed = fo.failed;
            }
            Ok(VarEstimateOutcome {
                a: 2f64.powi(-(k as i32) - 1),
                k_exit: k,
                exited_on_one,
                flip_failed,
                state,
            })
        }
        Backend::Ideal => {
            // Exit-stage windows: the nested threshold projections collapse
            // the state onto the subspaces sharing one exit stage; sample
            // the stage, keep coherence inside the window, then apply the
            // zero-failure fix-up channel into image(B).
            let exit_stage = |p: f64| -> u32 {
                (1..=kmax)
                    .find(|k| p > 2f64.powi(-(*k as i32) - 1))
                    .unwrap_or(kmax + 1)
            };
            let d = jd.space().dim();
            let mut windows: Vec<CMat> = vec![CMat::zeros(d, d); kmax as usize + 1];
            for j in 0..jd.num_subspaces() {
                let stage = exit_stage(jd.weight_of(j));
                windows[stage as usize - 1] += jd.subspace_projector_mat(j);
            }
            let family: Vec<QOperator> = windows
                .into_iter()
                .map(|m| QOperator::projector(jd.space().clone(), m))
                .collect::<Result<_, _>>()?;
            let (idx, _, projected) = s.measure_family(&family, rng)?;
            let exited_on_one = idx < kmax as usize;
            let k = (idx as u32 + 1).min(kmax);
            let a_out = 2f64.powi(-(k as i32) - 1);

            for stage in 1..=k {
                let bk = 2f64.powi(-(stage as i32));
                ledger.charge(CostLabel::MeasB, 1);
                ledger.charge(CostLabel::Reflection, threshold_cost(bk, bk / 2.0, dsub));
            }
            ledger.charge(CostLabel::MeasB, 1);

            // Fix-up: keep the image(B) part, swap the rest in (b-side
            // roles), which is the flip's zero-failure limit.
            let state = a_conditioned_swap(swap, &projected)?;
            let fo_cost_eps = a_out;
            ledger.charge(CostLabel::MeasB, flip_cap(delta).div_ceil(2));
            ledger.charge(CostLabel::MeasA, flip_cap(delta) / 2);
            ledger.charge(CostLabel::Reflection, transform_cost(fo_cost_eps, delta));
            let b_weight = state.expectation(jd.pb())?;
            Ok(VarEstimateOutcome {
                a: a_out,
                k_exit: k,
                exited_on_one,
                flip_failed: b_weight < 1.0 - 1e-9,
                state,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct VrsvtOutcome {
    /// Stage-one weight estimate, used as the transform threshold.
    pub q: f64,
    pub flip_failed: bool,
    pub state: QState,
}

/// Two-stage variable-cost transform from the a side to the b side: run
/// the weight estimation on the role-swapped pair (which parks the state
/// on the a side), then the fixed transform with the estimate as its
/// threshold.
pub fn vrsvt<R: Rng + ?Sized>(
    pair: &SvPair,
    s: &QState,
    delta: f64,
    backend: Backend,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<VrsvtOutcome, QError> {
    let est = var_estimate_core(
        &pair.swap,
        &pair.comp_swap,
        &pair.jd,
        s,
        delta,
        backend,
        rng,
        ledger,
    )?;
    let out = transform(pair, &est.state, est.a, delta, ledger)?;
    Ok(VrsvtOutcome { q: est.a, flip_failed: est.flip_failed, state: out })
}
