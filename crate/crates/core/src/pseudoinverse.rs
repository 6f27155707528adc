//! Pseudoinverse state repair and the kernel-rotation channel.
//!
//! For a projector pair (A, B) with product C = A B, the pseudoinverse of C
//! maps a state supported on image(A) to one supported on image(B) while
//! inverting the per-subspace damping: subspace weights get divided by p_j.
//! Reprojecting onto image(A) recovers the input up to its weight on
//! zero-overlap subspaces. The rotation channel instead moves the kernel(A)
//! part of a state into image(A) subspace by subspace, which is possible
//! everywhere except on the stuck lines.

use crate::jordan::{JordanDecomposition, ThresholdRange};
use crate::qstate::{cplx, trace_distance, CMat, QError, QState};

/// Everything the pseudoinverse map produces, alongside the quantities the
/// exact identities predict for it.
#[derive(Debug, Clone)]
pub struct PseudoinverseReport {
    /// Normalization Tr(C+ rho C+^dag); equals Tr(E rho) for the inverse
    /// weight operator E.
    pub norm: f64,
    /// Weight of the input on zero-overlap subspaces, Tr(Pi_0 rho).
    pub zero_weight: f64,
    /// Weight of the output on image(A).
    pub a_weight_out: f64,
    /// Exact prediction (1 - zero_weight) / norm for `a_weight_out`.
    pub predicted_a_weight: f64,
    /// Per-subspace weights of the input and the output.
    pub subspace_in: Vec<f64>,
    pub subspace_out: Vec<f64>,
    /// Trace distance between the input and the image(A)-reprojection of
    /// the output, and its bound 2 sqrt(zero_weight).
    pub reproject_distance: f64,
    pub reproject_bound: f64,
    /// The pseudoinverse state rho'.
    pub state: QState,
}

/// The pseudoinverse matrix C+ = sum (1/s_j)|vb1><va1| plus the shared
/// lines of both images.
pub fn pseudoinverse_mat(jd: &JordanDecomposition) -> CMat {
    let d = jd.space().dim();
    let mut m = CMat::zeros(d, d);
    for sub in &jd.two_dim {
        m += &sub.vb1 * sub.va1.adjoint() / cplx(sub.s, 0.0);
    }
    for line in &jd.one_dim {
        if line.class.weight() == 1.0 {
            m += &line.vec * line.vec.adjoint();
        }
    }
    m
}

/// Applies the pseudoinverse repair map to a state supported on image(A).
pub fn pseudoinverse_state(
    jd: &JordanDecomposition,
    rho: &QState,
) -> Result<PseudoinverseReport, QError> {
    let a_in = rho.expectation(jd.pa())?;
    if (a_in - 1.0).abs() > 1e-9 {
        return Err(QError::Invalid(format!(
            "pseudoinverse input must be supported on image(A); Tr(A rho) = {a_in}"
        )));
    }
    let cplus = pseudoinverse_mat(jd);
    let subspace_in = jd.weights(rho)?;
    let zero_weight = rho.expectation(&jd.threshold_projector(ThresholdRange::PZero))?;

    let (norm, state) = match rho.vector() {
        Some(v) => {
            let w = &cplus * v;
            let n = w.norm().powi(2);
            if n < 1e-12 {
                return Err(QError::Invalid(
                    "degenerate input: no overlap with any positive-weight subspace".into(),
                ));
            }
            (n, QState::pure(jd.space().clone(), w / cplx(n.sqrt(), 0.0))?)
        }
        None => {
            let m = &cplus * rho.density() * cplus.adjoint();
            let n = m.trace().re;
            if n < 1e-12 {
                return Err(QError::Invalid(
                    "degenerate input: no overlap with any positive-weight subspace".into(),
                ));
            }
            (n, QState::mixed(jd.space().clone(), m / cplx(n, 0.0))?)
        }
    };

    let subspace_out = jd.weights(&state)?;
    let a_weight_out = state.expectation(jd.pa())?;
    let predicted_a_weight = (1.0 - zero_weight) / norm;

    // Reproject the output onto image(A) and compare with the input.
    let branches = state.measure_branches(jd.pa())?;
    let reproject_distance = match branches.post_one {
        Some(back) => trace_distance(rho, &back)?,
        None => 1.0,
    };

    Ok(PseudoinverseReport {
        norm,
        zero_weight,
        a_weight_out,
        predicted_a_weight,
        subspace_in,
        subspace_out,
        reproject_distance,
        reproject_bound: 2.0 * zero_weight.sqrt(),
        state,
    })
}

#[derive(Debug, Clone)]
pub struct RotateReport {
    /// Weight of the input on image(A) and on the stuck lines.
    pub a_weight_in: f64,
    pub stuck_weight: f64,
    /// Weight of the rotated state on image(A); exactly 1 - stuck_weight.
    pub a_weight_out: f64,
    /// Per-subspace weights before and after (equal by construction).
    pub subspace_in: Vec<f64>,
    pub subspace_out: Vec<f64>,
    /// Trace distance to the input and its bound sqrt(1 - a_weight_in).
    pub distance: f64,
    pub bound: f64,
    pub state: QState,
}

/// The rotation channel sigma = A rho A + U (I-A) rho (I-A) U^dag with U
/// the in-subspace swap. It moves everything outside image(A) into it,
/// except the stuck lines, while preserving every subspace weight.
///
/// The reported distance bound sqrt(1 - a_weight_in) is guaranteed when the
/// input carries no coherence between distinct Jordan subspaces; it is exact
/// for a pure state inside a single subspace. Cross-subspace coherence can
/// push the distance above the bound, e.g. (|vA1 of S1> + |vA0 of S2>)/sqrt(2)
/// reaches (1+sqrt(5))/4 against a bound of sqrt(1/2).
pub fn rotate_into_image(
    jd: &JordanDecomposition,
    rho: &QState,
) -> Result<RotateReport, QError> {
    let pa = jd.pa();
    let a_weight_in = rho.expectation(pa)?;
    let stuck = jd.threshold_projector(ThresholdRange::Stuck);
    let stuck_weight = rho.expectation(&stuck)?;
    let subspace_in = jd.weights(rho)?;

    let u = jd.rotate_swap_unitary();
    let dens = rho.density();
    let pam = pa.mat();
    let d = jd.space().dim();
    let comp = CMat::identity(d, d) - pam;
    let inside = pam * &dens * pam;
    let outside = u.mat() * (&comp * &dens * &comp) * u.mat().adjoint();
    let sigma = QState::mixed(jd.space().clone(), inside + outside)?;

    let subspace_out = jd.weights(&sigma)?;
    let a_weight_out = sigma.expectation(pa)?;
    let distance = trace_distance(rho, &sigma)?;

    Ok(RotateReport {
        a_weight_in,
        stuck_weight,
        a_weight_out,
        subspace_in,
        subspace_out,
        distance,
        bound: (1.0 - a_weight_in).max(0.0).sqrt(),
        state: sigma,
    })
}

/// Operator identity C C+ = A (I - Pi_0), exposed for direct verification.
/// The product projects onto the part of image(A) the pseudoinverse can
/// reach back to: the vA1 directions of positive-overlap subspaces plus the
/// lines shared by both images.
pub fn cc_plus_identity_deviation(jd: &JordanDecomposition) -> f64 {
    let c = jd.pa().mat() * jd.pb().mat();
    let cplus = pseudoinverse_mat(jd);
    let pi0 = jd.threshold_projector(ThresholdRange::PZero);
    let d = jd.space().dim();
    (c * cplus - jd.pa().mat() * (CMat::identity(d, d) - pi0.mat())).norm()
}
