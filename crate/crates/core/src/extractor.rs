//! The guaranteed-extraction loop on toy protocol instances: initial
//! execution, variable-length success-probability estimation, then k rounds
//! of threshold / challenge-measure / record / repair, with every coherent
//! operation charged to a cost ledger.
//!
//! The (U, C) pair on H ⊗ R is never materialized as dense joint operators.
//! Both projectors are block products over the principal frame spanned by
//! {psi_j ⊗ |+>} and their C-side partners, where psi_j are eigenvectors of
//! the mean acceptance operator on H; every state the run can reach lives in
//! that frame, so thresholds, estimates and transforms run through svalg on
//! a register space of dimension at most 2 dim(H) regardless of |R|.

use crate::protocol::{
    make_measurements, PartialTranscript, ProtocolMeasurements, ToyProtocol, Witness,
};
use crate::qstate::{
    cplx, symmetric_eigen_checked, CMat, CVec, QError, QOperator, QState, RegisterSpace,
};
use crate::svalg::{
    threshold, threshold_cost, transform, var_estimate, Backend, CostLedger, SVAlgParams, SvPair,
};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Eigenvalues at or below this count as structurally zero (no C-side
/// partner vector exists); at or above 1 minus this the two frame vectors
/// coincide and the subspace is a shared line.
const TOL_EIG: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ExtractParams {
    /// Transcripts to collect. May exceed the protocol's special-soundness
    /// threshold; the classical extractor uses any sufficient subset.
    pub k: usize,
    /// Per-subroutine failure budget.
    pub delta: f64,
    /// Security-parameter stand-in for the small-p abort cut lambda*k*sqrt(delta).
    pub lambda: f64,
    /// Hard stop: run aborts once the ledger total exceeds this budget.
    /// Defaults to 64*k*lambda^2/sqrt(delta).
    pub cap: Option<u64>,
    /// Collect per-checkpoint diagnostics records into the trace.
    pub collect_diagnostics: bool,
}

impl ExtractParams {
    pub fn new(k: usize, delta: f64, lambda: f64) -> Result<Self, QError> {
        if k < 1 {
            return Err(QError::Invalid("need k >= 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(QError::Invalid(format!("need 0 < delta < 1, got {delta}")));
        }
        if lambda <= 0.0 {
            return Err(QError::Invalid("need lambda > 0".into()));
        }
        Ok(ExtractParams { k, delta, lambda, cap: None, collect_diagnostics: false })
    }

    pub fn cost_cap(&self) -> u64 {
        self.cap.unwrap_or_else(|| {
            (64.0 * self.k as f64 * self.lambda * self.lambda / self.delta.sqrt()).ceil() as u64
        })
    }

    /// Small-p abort cut checked after the step-2 estimate.
    pub fn small_p_cut(&self) -> f64 {
        self.lambda * self.k as f64 * self.delta.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AbortSite {
    #[serde(rename = "step2-small-p")]
    Step2SmallP,
    #[serde(rename = "step3a-threshold")]
    Step3aThreshold,
    #[serde(rename = "step3g-transform")]
    Step3gTransform,
    #[serde(rename = "cap")]
    CostCap,
}

/// Per-checkpoint analysis record, computed out-of-band on a cloned state.
#[derive(Debug, Clone, Serialize)]
pub struct ExtractionDiagnostics {
    pub site: String,
    /// Weight the checkpoint state carries per frame subspace, as
    /// (eigenvalue, weight) with negligible entries dropped.
    pub jordan_spectrum: Vec<(f64, f64)>,
    /// Per-challenge success probability of the pseudoinverse state.
    pub zeta_r: Vec<f64>,
    pub zeta_total: f64,
    /// zeta_total / |R|; equals the acceptance probability of the
    /// pseudoinverse state and is never below the supported eigenvalue floor.
    pub p_u: f64,
    /// Challenge marginal of the checkpoint state itself.
    pub r_marginal: Vec<f64>,
    /// Largest deviation between r_marginal and zeta_r / zeta_total.
    pub stratify_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionTrace {
    pub initial_accept: bool,
    /// Estimate p-hat followed by every epsilon decrement.
    pub p_history: Vec<f64>,
    pub epsilon: f64,
    pub transcripts: Vec<(usize, Vec<u8>)>,
    pub witness: Option<Witness>,
    /// Why the classical extractor returned nothing, when it did.
    pub extract_error: Option<String>,
    pub aborted: Option<AbortSite>,
    pub ledger: CostLedger,
    pub diagnostics: Vec<ExtractionDiagnostics>,
}

impl ExtractionTrace {
    fn new() -> Self {
        ExtractionTrace {
            initial_accept: false,
            p_history: Vec::new(),
            epsilon: 0.0,
            transcripts: Vec::new(),
            witness: None,
            extract_error: None,
            aborted: None,
            ledger: CostLedger::new(),
            diagnostics: Vec::new(),
        }
    }
}

/// Frame data for the (U, C) pair: eigenvectors psi_j of the mean
/// acceptance operator with eigenvalues p_j, the joint-space basis vectors
/// c1_j (C-side) and their in-subspace complements, and the pair projectors
/// expressed on the frame register space.
struct UcFrame {
    h_space: RegisterSpace,
    fspace: RegisterSpace,
    nr: usize,
    p: Vec<f64>,
    psi: Vec<CVec>,
    /// <c1_j | psi_j x plus> = sqrt(p_j), stored as computed.
    s: Vec<f64>,
    slot_c1: Vec<Option<usize>>,
    slot_c0: Vec<Option<usize>>,
    basis: Vec<CVec>,
    pair_uc: SvPair,
    c_frame: QOperator,
}

impl UcFrame {
    fn new(proto: &ToyProtocol, meas: &ProtocolMeasurements) -> Result<Self, QError> {
        let dh = proto.h_space.dim();
        let nr = proto.r_count;
        let (vals, vecs) = symmetric_eigen_checked(&meas.mean_accept)?;
        let mut order: Vec<usize> = (0..dh).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

        let mut p = Vec::with_capacity(dh);
        let mut psi = Vec::with_capacity(dh);
        let mut s = vec![0.0; dh];
        let mut slot_c1 = vec![None; dh];
        let mut slot_c0 = vec![None; dh];
        let mut basis: Vec<CVec> = Vec::new();
        let inv_sqrt_nr = (1.0 / nr as f64).sqrt();

        for (j, &col) in order.iter().enumerate() {
            let pj = vals[col].clamp(0.0, 1.0);
            let v = CVec::from_column_slice(vecs.column(col).as_slice());
            p.push(pj);
            psi.push(v);
            let vu1 = {
                let mut u = CVec::zeros(dh * nr);
                for h in 0..dh {
                    for r in 0..nr {
                        u[h * nr + r] = psi[j][h] * cplx(inv_sqrt_nr, 0.0);
                    }
                }
                u
            };
            if pj <= TOL_EIG {
                slot_c0[j] = Some(basis.len());
                basis.push(vu1);
                continue;
            }
            let mut c1 = CVec::zeros(dh * nr);
            for r in 0..nr {
                let w = meas.pi_vr[r].mat() * &psi[j];
                for h in 0..dh {
                    c1[h * nr + r] = w[h] * cplx(inv_sqrt_nr, 0.0);
                }
            }
            let norm = c1.norm();
            debug_assert!((norm * norm - pj).abs() < 1e-8);
            c1 /= cplx(norm, 0.0);
            s[j] = norm;
            slot_c1[j] = Some(basis.len());
            basis.push(c1);
            if pj < 1.0 - TOL_EIG {
                let mut c0 = vu1 - &basis[slot_c1[j].unwrap()] * cplx(norm, 0.0);
                c0 /= cplx(c0.norm(), 0.0);
                slot_c0[j] = Some(basis.len());
                basis.push(c0);
            }
        }

        let fdim = basis.len();
        let fspace = RegisterSpace::single("frame", fdim)?;
        let mut u_mat = CMat::zeros(fdim, fdim);
        let mut c_mat = CMat::zeros(fdim, fdim);
        for j in 0..dh {
            match (slot_c1[j], slot_c0[j]) {
                (Some(i1), Some(i0)) => {
                    let sj = s[j];
                    let cj = (1.0 - sj * sj).max(0.0).sqrt();
                    u_mat[(i1, i1)] = cplx(sj * sj, 0.0);
                    u_mat[(i1, i0)] = cplx(sj * cj, 0.0);
                    u_mat[(i0, i1)] = cplx(sj * cj, 0.0);
                    u_mat[(i0, i0)] = cplx(cj * cj, 0.0);
                    c_mat[(i1, i1)] = cplx(1.0, 0.0);
                }
                (Some(i1), None) => {
                    u_mat[(i1, i1)] = cplx(1.0, 0.0);
                    c_mat[(i1, i1)] = cplx(1.0, 0.0);
                }
                (None, Some(i0)) => {
                    u_mat[(i0, i0)] = cplx(1.0, 0.0);
                }
                (None, None) => unreachable!(),
            }
        }
        let u_frame = QOperator::projector(fspace.clone(), u_mat)?;
        let c_frame = QOperator::projector(fspace.clone(), c_mat)?;
        let pair_uc = SvPair::new(&u_frame, &c_frame)?;

        Ok(UcFrame {
            h_space: proto.h_space.clone(),
            fspace,
            nr,
            p,
            psi,
            s,
            slot_c1,
            slot_c0,
            basis,
            pair_uc,
            c_frame,
        })
    }

    /// Frame coordinates of phi (x) |+_R>.
    fn embed_h(&self, phi: &CVec) -> CVec {
        let mut coords = CVec::zeros(self.basis.len());
        for j in 0..self.psi.len() {
            let cj = self.psi[j].dotc(phi);
            match (self.slot_c1[j], self.slot_c0[j]) {
                (Some(i1), Some(i0)) => {
                    let sj = self.s[j];
                    let c = (1.0 - sj * sj).max(0.0).sqrt();
                    coords[i1] += cj * cplx(sj, 0.0);
                    coords[i0] += cj * cplx(c, 0.0);
                }
                (Some(i1), None) => coords[i1] += cj,
                (None, Some(i0)) => coords[i0] += cj,
                (None, None) => unreachable!(),
            }
        }
        coords
    }

    /// Frame coordinates of a joint-space vector plus the squared residual
    /// outside the frame.
    fn to_frame(&self, v: &CVec) -> (CVec, f64) {
        let mut coords = CVec::zeros(self.basis.len());
        for (i, b) in self.basis.iter().enumerate() {
            coords[i] = b.dotc(v);
        }
        let residual = (v.norm_squared() - coords.norm_squared()).max(0.0);
        (coords, residual)
    }

    fn to_joint(&self, coords: &CVec) -> CVec {
        let mut v = CVec::zeros(self.h_space.dim() * self.nr);
        for (i, b) in self.basis.iter().enumerate() {
            if coords[i].norm() > 0.0 {
                v += b * coords[i];
            }
        }
        v
    }

    /// Projector on H onto the eigenvectors with eigenvalue above the cut.
    fn g_projector(&self, cut: f64) -> Result<QOperator, QError> {
        let dh = self.h_space.dim();
        let mut m = CMat::zeros(dh, dh);
        for j in 0..self.psi.len() {
            if self.p[j] > cut {
                m += &self.psi[j] * self.psi[j].adjoint();
            }
        }
        QOperator::projector(self.h_space.clone(), m)
    }

    fn spectrum_weights(&self, coords: &CVec) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for j in 0..self.psi.len() {
            let mut w = 0.0;
            if let Some(i1) = self.slot_c1[j] {
                w += coords[i1].norm_sqr();
            }
            if let Some(i0) = self.slot_c0[j] {
                w += coords[i0].norm_sqr();
            }
            if w > 1e-12 {
                out.push((self.p[j], w));
            }
        }
        out
    }
}

/// Measurement data shared by every run on one protocol instance.
pub struct ExtractorContext {
    pub meas: ProtocolMeasurements,
    frame: UcFrame,
}

impl ExtractorContext {
    /// Dimension of the principal frame the run evolves in.
    pub fn frame_dim(&self) -> usize {
        self.frame.basis.len()
    }

    /// Eigenvalues of the mean acceptance operator, descending.
    pub fn spectrum(&self) -> &[f64] {
        &self.frame.p
    }
}

pub fn prepare_extractor(proto: &ToyProtocol) -> Result<ExtractorContext, QError> {
    let meas = make_measurements(proto)?;
    let frame = UcFrame::new(proto, &meas)?;
    Ok(ExtractorContext { meas, frame })
}

pub fn guaranteed_extract(
    proto: &ToyProtocol,
    prover_state: &QState,
    params: &ExtractParams,
    rng: &mut impl Rng,
) -> Result<ExtractionTrace, QError> {
    let ctx = prepare_extractor(proto)?;
    guaranteed_extract_with(proto, &ctx, prover_state, params, rng)
}

/// One full run of the extraction procedure. Aborts and step-1 termination
/// are recorded in the trace; hard errors mean the inputs were unusable.
pub fn guaranteed_extract_with(
    proto: &ToyProtocol,
    ctx: &ExtractorContext,
    prover_state: &QState,
    params: &ExtractParams,
    rng: &mut impl Rng,
) -> Result<ExtractionTrace, QError> {
    let frame = &ctx.frame;
    let phi0 = prover_state
        .vector()
        .ok_or_else(|| QError::Invalid("extraction needs a pure prover state".into()))?;
    if prover_state.space() != &proto.h_space {
        return Err(QError::SpaceMismatch("prover state is not on H".into()));
    }
    let k = params.k;
    let delta = params.delta;
    let cap = params.cost_cap();
    let mut trace = ExtractionTrace::new();
    let ledger = &mut trace.ledger;

    // Step 1: initial execution, C-measurement of psi (x) |+_R>.
    ledger.enter_phase("step1");
    ledger.charge_prover(1);
    ledger.charge_measure_b(1);
    let mut state = QState::pure(frame.fspace.clone(), frame.embed_h(phi0))?;
    let first = state.binary_measure(&frame.c_frame, rng)?;
    trace.initial_accept = first.outcome;
    if !first.outcome {
        return Ok(trace);
    }
    state = first.state;
    if params.collect_diagnostics {
        trace.diagnostics.push(diagnose(frame, &ctx.meas, state.vector().unwrap(), "step1")?);
    }

    // Step 2: variable-length estimate of the success probability; the
    // output is already the halved lower bound.
    ledger.enter_phase("step2");
    let est = var_estimate(&frame.pair_uc, &state, delta, Backend::Ideal, rng, ledger)?;
    let mut p = est.a;
    state = est.state;
    trace.p_history.push(p);
    if p < params.small_p_cut() {
        trace.aborted = Some(AbortSite::Step2SmallP);
        return Ok(trace);
    }
    let eps = p / (4.0 * k as f64);
    trace.epsilon = eps;
    if trace.ledger.total() > cap {
        trace.aborted = Some(AbortSite::CostCap);
        return Ok(trace);
    }

    // Step 3: collect k transcripts, repairing the state between rounds.
    for i in 0..k {
        let ledger = &mut trace.ledger;
        ledger.enter_phase(&format!("round{}", i + 1));

        // 3a: lower-bound the success probability, abort on failure.
        let thr = SVAlgParams::new(p, eps, delta, Backend::Ideal)?;
        let (bit, post) = threshold(&frame.pair_uc, &state, &thr, rng, ledger)?;
        if !bit {
            trace.aborted = Some(AbortSite::Step3aThreshold);
            return Ok(trace);
        }
        state = post;
        p -= eps;
        trace.p_history.push(p);
        if params.collect_diagnostics {
            trace.diagnostics.push(diagnose(
                frame,
                &ctx.meas,
                state.vector().unwrap(),
                &format!("round{}-post-3a", i + 1),
            )?);
        }

        // 3b: measure the challenge register and discard it.
        trace.ledger.charge_measure_b(1);
        let joint = frame.to_joint(state.vector().unwrap());
        let (r_i, phi) = measure_challenge(frame, &joint, rng);
        let mut state_h = QState::pure(frame.h_space.clone(), phi)?;

        // 3c: estimate the repair cost for this challenge.
        let g_op = frame.g_projector(p - eps)?;
        let d_op = &ctx.meas.pi_vr[r_i];
        if std::env::var("EXTRACT_DEBUG").is_ok() {
            let gnan = g_op.mat().iter().any(|c| !c.re.is_finite() || !c.im.is_finite());
            let grank: f64 = g_op.mat().diagonal().iter().map(|c| c.re).sum();
            let snan = state_h.vector().map(|v| v.iter().any(|c| !c.re.is_finite())).unwrap_or(true);
            eprintln!("round {i}: p={p} eps={eps} cut={} g_nan={gnan} g_rank={grank:.3} r={r_i} state_nan={snan}", p - eps);
        }
        let pair_gd = SvPair::new(&g_op, d_op)?;
        let est =
            var_estimate(&pair_gd, &state_h, delta, Backend::Ideal, rng, &mut trace.ledger)?;
        let q = est.a;
        state_h = est.state;

        // 3d: record part of the response: conjugate by U_r, measure the
        // f_i-fibers, un-conjugate.
        trace.ledger.charge_prover(2);
        trace.ledger.charge_measure_b(1);
        state_h = state_h.apply_unitary(&proto.unitaries[r_i])?;
        let (labels, family) = fiber_family(proto, i, r_i)?;
        let (pick, _, post) = state_h.measure_family(&family, rng)?;
        let u_dag =
            QOperator::unitary(proto.h_space.clone(), proto.unitaries[r_i].mat().adjoint())?;
        state_h = post.apply_unitary(&u_dag)?;
        trace.transcripts.push((r_i, labels[pick].clone()));
        if trace.ledger.total() > cap {
            trace.aborted = Some(AbortSite::CostCap);
            return Ok(trace);
        }
        if i + 1 == k {
            break;
        }

        // 3e: transform back onto the good subspaces at the estimated cost.
        let pair_dg = SvPair::new(d_op, &g_op)?;
        state_h = transform(&pair_dg, &state_h, q, delta, &mut trace.ledger)?;

        // 3f: threshold measurement at the current cut, outcome recorded
        // and discarded either way.
        trace.ledger.charge_reflection(threshold_cost(p, eps, delta));
        trace.ledger.charge_measure_b(1);
        let out = state_h.binary_measure(&g_op, rng)?;
        state_h = out.state;
        p -= eps;
        trace.p_history.push(p);

        // 3g: re-initialize the challenge register and transform onto
        // accepting executions, abort if the verification fails.
        state = QState::pure(frame.fspace.clone(), frame.embed_h(state_h.vector().unwrap()))?;
        state = transform(&frame.pair_uc, &state, p, delta, &mut trace.ledger)?;
        trace.ledger.charge_measure_b(1);
        let chk = state.binary_measure(&frame.c_frame, rng)?;
        if !chk.outcome {
            trace.aborted = Some(AbortSite::Step3gTransform);
            return Ok(trace);
        }
        state = chk.state;
        if trace.ledger.total() > cap {
            trace.aborted = Some(AbortSite::CostCap);
            return Ok(trace);
        }
    }

    // Step 4: hand the recorded pairs to the classical extractor.
    trace.ledger.enter_phase("finish");
    let pt = PartialTranscript { tau: proto.tau.clone(), pairs: trace.transcripts.clone() };
    match proto.ss_extract(&pt) {
        Ok(w) => trace.witness = Some(w),
        Err(e) => trace.extract_error = Some(e.to_string()),
    }
    Ok(trace)
}

fn measure_challenge(frame: &UcFrame, joint: &CVec, rng: &mut impl Rng) -> (usize, CVec) {
    let dh = frame.h_space.dim();
    let nr = frame.nr;
    let mut weights = vec![0.0; nr];
    for h in 0..dh {
        for r in 0..nr {
            weights[r] += joint[h * nr + r].norm_sqr();
        }
    }
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut pick = nr - 1;
    for (r, w) in weights.iter().enumerate() {
        if u < *w {
            pick = r;
            break;
        }
        u -= w;
    }
    let mut phi = CVec::zeros(dh);
    let norm = weights[pick].sqrt();
    for h in 0..dh {
        phi[h] = joint[h * nr + pick] / cplx(norm, 0.0);
    }
    (pick, phi)
}

fn fiber_family(
    proto: &ToyProtocol,
    i: usize,
    r: usize,
) -> Result<(Vec<Vec<u8>>, Vec<QOperator>), QError> {
    let dh = proto.h_space.dim();
    let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for z in 0..dh {
        groups.entry(proto.partial_fn(i, r, z)).or_default().push(z);
    }
    let mut labels = Vec::with_capacity(groups.len());
    let mut family = Vec::with_capacity(groups.len());
    for (y, zs) in groups {
        let mut m = CMat::zeros(dh, dh);
        for z in zs {
            m[(z, z)] = cplx(1.0, 0.0);
        }
        labels.push(y);
        family.push(QOperator::projector(proto.h_space.clone(), m)?);
    }
    Ok((labels, family))
}

fn diagnose(
    frame: &UcFrame,
    meas: &ProtocolMeasurements,
    coords: &CVec,
    site: &str,
) -> Result<ExtractionDiagnostics, QError> {
    let dh = frame.h_space.dim();
    let nr = frame.nr;

    let mut c_weight = 0.0;
    let mut denom = 0.0;
    let mut xi = CVec::zeros(dh);
    for j in 0..frame.psi.len() {
        if let Some(i1) = frame.slot_c1[j] {
            let x = coords[i1];
            if x.norm_sqr() > 0.0 {
                c_weight += x.norm_sqr();
                denom += x.norm_sqr() / frame.p[j];
                xi += &frame.psi[j] * (x / cplx(frame.p[j].sqrt(), 0.0));
            }
        }
    }
    if (c_weight - 1.0).abs() > 1e-8 {
        return Err(QError::Invalid(format!(
            "diagnostics need a state fully inside image(C), got weight {c_weight}"
        )));
    }
    if denom <= 0.0 {
        return Err(QError::Invalid("degenerate pseudoinverse: no weight above p = 0".into()));
    }
    xi /= cplx(denom.sqrt(), 0.0);

    let mut zeta_r = Vec::with_capacity(nr);
    for r in 0..nr {
        zeta_r.push((xi.dotc(&(meas.pi_vr[r].mat() * &xi))).re);
    }
    let zeta_total: f64 = zeta_r.iter().sum();
    let p_u = zeta_total / nr as f64;
    debug_assert!((p_u - 1.0 / denom).abs() < 1e-8);

    // The supported-eigenvalue floor: p_u can never fall below it.
    let spectrum = frame.spectrum_weights(coords);
    let floor =
        spectrum.iter().map(|&(pj, _)| pj).fold(f64::INFINITY, f64::min).min(1.0);
    if p_u < floor - 1e-8 {
        return Err(QError::Invalid(format!(
            "pseudoinverse win probability {p_u} fell below the supported floor {floor}"
        )));
    }

    let v = frame.to_joint(coords);
    let mut r_marginal = vec![0.0; nr];
    for h in 0..dh {
        for r in 0..nr {
            r_marginal[r] += v[h * nr + r].norm_sqr();
        }
    }
    let mut stratify_dev: f64 = 0.0;
    for r in 0..nr {
        stratify_dev = stratify_dev.max((r_marginal[r] - zeta_r[r] / zeta_total).abs());
    }
    if stratify_dev > 1e-8 {
        return Err(QError::Invalid(format!(
            "challenge marginal deviates from the stratified form by {stratify_dev}"
        )));
    }

    Ok(ExtractionDiagnostics {
        site: site.to_string(),
        jordan_spectrum: spectrum,
        zeta_r,
        zeta_total,
        p_u,
        r_marginal,
        stratify_dev,
    })
}

/// Out-of-band diagnostics for a checkpoint state on H (x) R with
/// Tr(Pi_C rho) = 1: the pseudoinverse state's per-challenge success table,
/// its acceptance probability, and the stratified challenge marginal.
pub fn extraction_diagnostics(
    ctx: &ExtractorContext,
    state: &QState,
    site: &str,
) -> Result<ExtractionDiagnostics, QError> {
    let v = state
        .vector()
        .ok_or_else(|| QError::Invalid("diagnostics need a pure checkpoint state".into()))?;
    if state.space() != &ctx.meas.joint {
        return Err(QError::SpaceMismatch("checkpoint state is not on H (x) R".into()));
    }
    let (coords, residual) = ctx.frame.to_frame(v);
    if residual > 1e-9 {
        return Err(QError::Invalid(format!(
            "degenerate pseudoinverse: weight {residual:.3e} outside the principal frame"
        )));
    }
    diagnose(&ctx.frame, &ctx.meas, &coords, site)
}

/// The repair measurements at estimate p, spelled with the one-qubit
/// workspace register adjoined: the per-challenge acceptance projector on
/// W = |0>, and the threshold projector at cut p - eps lifted to H (x) W.
#[derive(Debug, Clone)]
pub struct RepairMeasurements {
    pub space: RegisterSpace,
    pub pi_r: QOperator,
    pub pi_peps: QOperator,
    pub cut: f64,
}

pub fn repair_measurements(
    proto: &ToyProtocol,
    p: f64,
    params: &ExtractParams,
    r: usize,
) -> Result<RepairMeasurements, QError> {
    if r >= proto.r_count {
        return Err(QError::Invalid(format!("challenge {r} out of range")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(QError::Invalid(format!("need 0 < p <= 1, got {p}")));
    }
    let ctx = prepare_extractor(proto)?;
    let eps = p / (4.0 * params.k as f64);
    let cut = p - eps;
    let w_space = RegisterSpace::single("w", 2)?;
    let space = proto.h_space.tensor(&w_space)?;

    let mut w00 = CMat::zeros(2, 2);
    w00[(0, 0)] = cplx(1.0, 0.0);
    let pi_r = QOperator::projector(space.clone(), ctx.meas.pi_vr[r].mat().kronecker(&w00))?;
    let g = ctx.frame.g_projector(cut)?;
    let pi_peps = QOperator::projector(space.clone(), g.mat().kronecker(&CMat::identity(2, 2)))?;
    Ok(RepairMeasurements { space, pi_r, pi_peps, cut })
}

/// Record-and-restart baseline: fresh prover copy per attempt, independent
/// uniform challenge each time, no repair. Each success additionally charges
/// the estimate-and-reamplify cost a restart-free strategy would need to
/// undo the damage, lambda*16*k^2/p^3.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineRun {
    pub attempts: u64,
    pub transcripts: Vec<(usize, Vec<u8>)>,
    pub witness: Option<Witness>,
    pub extract_error: Option<String>,
    pub ledger: CostLedger,
}

pub fn iid_baseline(
    proto: &ToyProtocol,
    prover_state: &QState,
    params: &ExtractParams,
    rng: &mut impl Rng,
) -> Result<BaselineRun, QError> {
    let phi = prover_state
        .vector()
        .ok_or_else(|| QError::Invalid("baseline needs a pure prover state".into()))?;
    let nr = proto.r_count;
    let mut per_r = Vec::with_capacity(nr);
    let mut responses: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nr);
    for r in 0..nr {
        let amps = proto.unitaries[r].mat() * phi;
        let acc: Vec<(usize, f64)> =
            proto.accepting_set(r).into_iter().map(|z| (z, amps[z].norm_sqr())).collect();
        per_r.push(acc.iter().map(|(_, w)| w).sum::<f64>());
        responses.push(acc);
    }
    let p_acc: f64 = per_r.iter().sum::<f64>() / nr as f64;

    let mut run = BaselineRun {
        attempts: 0,
        transcripts: Vec::new(),
        witness: None,
        extract_error: None,
        ledger: CostLedger::new(),
    };
    if p_acc < 1e-12 {
        return Ok(run);
    }
    let max_attempts = (4.0 * params.k as f64 / p_acc).ceil() as u64;
    let repair = (params.lambda * 16.0 * (params.k * params.k) as f64 / p_acc.powi(3)).ceil() as u64;

    while run.attempts < max_attempts && run.transcripts.len() < params.k {
        run.attempts += 1;
        run.ledger.charge_prover(1);
        run.ledger.charge_measure_b(1);
        let r = rng.random_range(0..nr);
        if rng.random::<f64>() >= per_r[r] {
            continue;
        }
        let mut u = rng.random::<f64>() * per_r[r];
        let mut z = responses[r].last().map(|&(z, _)| z).unwrap_or(0);
        for &(cand, w) in &responses[r] {
            if u < w {
                z = cand;
                break;
            }
            u -= w;
        }
        let y = proto.partial_fn(run.transcripts.len(), r, z);
        run.transcripts.push((r, y));
        run.ledger.charge_reflection(repair);
    }
    let pt = PartialTranscript { tau: proto.tau.clone(), pairs: run.transcripts.clone() };
    match proto.ss_extract(&pt) {
        Ok(w) => run.witness = Some(w),
        Err(e) => run.extract_error = Some(e.to_string()),
    }
    Ok(run)
}
