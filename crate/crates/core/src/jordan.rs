//! Two-projector subspace decomposition.
//!
//! For projectors A and B the space splits into invariant subspaces that are
//! either two-dimensional (one basis vector from each image, overlap s_j,
//! weight p_j = s_j^2 strictly between 0 and 1) or one-dimensional lines
//! classified by membership in the images and kernels. The decomposition is
//! computed from the singular triplets of A*B plus eigenbases of the
//! residual projectors, with deterministic ordering and phase conventions so
//! that equal inputs produce identical output.

use crate::qstate::{
    cplx, symmetric_eigen_checked, CMat, CVec, OperatorKind, QError, QOperator, QState,
    RegisterSpace,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Classification tolerance for singular values: below `tol` counts as 0,
/// above `1 - tol` counts as 1.
pub const TOL_CLASSIFY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneDimClass {
    /// In image(A) and image(B): weight 1.
    ImAImB,
    /// In image(A) and kernel(B): weight 0.
    ImAKerB,
    /// In kernel(A) and image(B): weight 0.
    KerAImB,
    /// In kernel(A) and kernel(B): weight 0.
    KerAKerB,
}

impl OneDimClass {
    pub fn weight(self) -> f64 {
        match self {
            OneDimClass::ImAImB => 1.0,
            _ => 0.0,
        }
    }

    /// Class of the same line with respect to the complemented pair
    /// (I-A, I-B).
    pub fn complemented(self) -> OneDimClass {
        match self {
            OneDimClass::ImAImB => OneDimClass::KerAKerB,
            OneDimClass::ImAKerB => OneDimClass::KerAImB,
            OneDimClass::KerAImB => OneDimClass::ImAKerB,
            OneDimClass::KerAKerB => OneDimClass::ImAImB,
        }
    }

    /// Class of the same line with respect to the swapped pair (B, A).
    pub fn swapped(self) -> OneDimClass {
        match self {
            OneDimClass::ImAKerB => OneDimClass::KerAImB,
            OneDimClass::KerAImB => OneDimClass::ImAKerB,
            other => other,
        }
    }
}

/// A two-dimensional invariant subspace spanned by {va1, va0} (equivalently
/// {vb1, vb0}), with <va1|vb1> = s real positive.
#[derive(Debug, Clone)]
pub struct TwoDimSubspace {
    pub s: f64,
    pub p: f64,
    pub va1: CVec,
    pub va0: CVec,
    pub vb1: CVec,
    pub vb0: CVec,
}

impl TwoDimSubspace {
    pub fn projector_mat(&self) -> CMat {
        &self.va1 * self.va1.adjoint() + &self.va0 * self.va0.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct OneDimLine {
    pub class: OneDimClass,
    pub vec: CVec,
}

/// Full decomposition of a space under a projector pair. Two-dimensional
/// subspaces come first (sorted by descending s, ties broken
/// lexicographically), then one-dimensional lines grouped by class.
#[derive(Debug, Clone)]
pub struct JordanDecomposition {
    space: RegisterSpace,
    pa: QOperator,
    pb: QOperator,
    pub two_dim: Vec<TwoDimSubspace>,
    pub one_dim: Vec<OneDimLine>,
}

/// Ranges of subspace weight used to assemble threshold projectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRange {
    /// Subspaces with weight exactly zero (all three zero-weight line
    /// classes; no two-dimensional subspace qualifies).
    PZero,
    PBelow(f64),
    PAtMost(f64),
    PAbove(f64),
    PAtLeast(f64),
    /// One-dimensional lines inside kernel(A): the part of the space from
    /// which alternating (A, B) measurements can never reach image(A).
    Stuck,
}

fn canonical_phase(v: &mut CVec) {
    for i in 0..v.len() {
        let a = v[i];
        if a.norm() > 1e-8 {
            let ph = a / cplx(a.norm(), 0.0);
            let corr = ph.conj();
            for x in v.iter_mut() {
                *x *= corr;
            }
            return;
        }
    }
}

fn lex_key(v: &CVec) -> Vec<(i64, i64)> {
    v.iter()
        .map(|x| ((x.re * 1e8).round() as i64, (x.im * 1e8).round() as i64))
        .collect()
}

/// Orthonormal eigenbasis of the (approximate) eigenvalue-1 eigenspace of a
/// residual projector matrix. Validates that every eigenvalue is near 0 or
/// 1.
fn projector_range_basis(mat: &CMat, label: &str) -> Result<Vec<CVec>, QError> {
    let (vals, vecs) = symmetric_eigen_checked(mat)?;
    let mut out = Vec::new();
    for (k, lam) in vals.iter().enumerate() {
        if (*lam - 1.0).abs() < 1e-7 {
            out.push(CVec::from_column_slice(vecs.column(k).as_slice()));
        } else if lam.abs() > 1e-7 {
            return Err(QError::Invalid(format!(
                "residual {label} is not a projector: eigenvalue {lam}"
            )));
        }
    }
    Ok(out)
}

/// Computes the decomposition of a projector pair.
pub fn jordan_decompose(
    pa: &QOperator,
    pb: &QOperator,
    tol: f64,
) -> Result<JordanDecomposition, QError> {
    if pa.kind() != OperatorKind::Projector || pb.kind() != OperatorKind::Projector {
        return Err(QError::Invalid("jordan_decompose needs projectors".into()));
    }
    if pa.space() != pb.space() {
        return Err(QError::SpaceMismatch("jordan_decompose".into()));
    }
    let space = pa.space().clone();
    let d = space.dim();
    // Eigenvectors of the Hermitian compression A B A with eigenvalue
    // p > 0 are exactly the image(A)-side subspace vectors; the partner is
    // obtained by projecting with B. This is much better conditioned than
    // the singular value decomposition of A B at clustered extremal values.
    let aba = pa.mat() * pb.mat() * pa.mat();
    let (vals, vecs) = symmetric_eigen_checked(&aba)?;

    let mut two_dim: Vec<TwoDimSubspace> = Vec::new();
    let mut im_im: Vec<CVec> = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= tol {
            continue;
        }
        let mut va1 = CVec::from_column_slice(vecs.column(k).as_slice());
        canonical_phase(&mut va1);
        if lam >= 1.0 - tol {
            im_im.push(va1);
            continue;
        }
        let bvec = pb.mat() * &va1;
        let s = bvec.norm();
        let vb1 = bvec / cplx(s, 0.0);
        // <va1|vb1> = s real positive by construction.
        let t = (1.0 - s * s).sqrt();
        let va0 = (&vb1 - &va1 * cplx(s, 0.0)) / cplx(t, 0.0);
        let vb0 = (&va1 - &vb1 * cplx(s, 0.0)) / cplx(t, 0.0);
        two_dim.push(TwoDimSubspace { s, p: s * s, va1, va0, vb1, vb0 });
    }
    two_dim.sort_by(|x, y| {
        y.s.partial_cmp(&x.s)
            .unwrap()
            .then_with(|| lex_key(&x.va1).cmp(&lex_key(&y.va1)))
    });

    // Residual bases: image(A) minus the 2D a-vectors and im-im lines gives
    // imA/kerB; likewise for B; what remains is kerA/kerB.
    let mut pa_res = pa.mat().clone();
    let mut pb_res = pb.mat().clone();
    for sub in &two_dim {
        pa_res -= &sub.va1 * sub.va1.adjoint();
        pb_res -= &sub.vb1 * sub.vb1.adjoint();
    }
    for v in &im_im {
        pa_res -= v * v.adjoint();
        pb_res -= v * v.adjoint();
    }
    let a_kb = projector_range_basis(&pa_res, "imA/kerB")?;
    let ka_b = projector_range_basis(&pb_res, "kerA/imB")?;

    let mut rest = CMat::identity(d, d);
    for sub in &two_dim {
        rest -= sub.projector_mat();
    }
    for v in im_im.iter().chain(a_kb.iter()).chain(ka_b.iter()) {
        rest -= v * v.adjoint();
    }
    let ka_kb = projector_range_basis(&rest, "kerA/kerB")?;

    let mut one_dim = Vec::new();
    let mut push_class = |vs: Vec<CVec>, class: OneDimClass| {
        let mut vs = vs;
        for v in vs.iter_mut() {
            canonical_phase(v);
        }
        vs.sort_by(|x, y| lex_key(x).cmp(&lex_key(y)));
        for vec in vs {
            one_dim.push(OneDimLine { class, vec });
        }
    };
    push_class(im_im, OneDimClass::ImAImB);
    push_class(a_kb, OneDimClass::ImAKerB);
    push_class(ka_b, OneDimClass::KerAImB);
    push_class(ka_kb, OneDimClass::KerAKerB);

    let decomp = JordanDecomposition { space, pa: pa.clone(), pb: pb.clone(), two_dim, one_dim };
    decomp.validate(1e-8)?;
    Ok(decomp)
}

impl JordanDecomposition {
    /// Assembles a decomposition from precomputed parts, validating it.
    /// Used by structured constructions that avoid the dense SVD.
    pub fn from_parts(
        space: RegisterSpace,
        pa: QOperator,
        pb: QOperator,
        two_dim: Vec<TwoDimSubspace>,
        one_dim: Vec<OneDimLine>,
        tol: f64,
    ) -> Result<Self, QError> {
        let decomp = JordanDecomposition { space, pa, pb, two_dim, one_dim };
        decomp.validate(tol)?;
        Ok(decomp)
    }

    pub fn space(&self) -> &RegisterSpace {
        &self.space
    }

    pub fn pa(&self) -> &QOperator {
        &self.pa
    }

    pub fn pb(&self) -> &QOperator {
        &self.pb
    }

    pub fn num_subspaces(&self) -> usize {
        self.two_dim.len() + self.one_dim.len()
    }

    /// Weight p_j of subspace `j`; two-dimensional subspaces come first.
    pub fn weight_of(&self, j: usize) -> f64 {
        if j < self.two_dim.len() {
            self.two_dim[j].p
        } else {
            self.one_dim[j - self.two_dim.len()].class.weight()
        }
    }

    pub fn subspace_dim(&self, j: usize) -> usize {
        if j < self.two_dim.len() {
            2
        } else {
            1
        }
    }

    pub fn subspace_projector_mat(&self, j: usize) -> CMat {
        if j < self.two_dim.len() {
            self.two_dim[j].projector_mat()
        } else {
            let v = &self.one_dim[j - self.two_dim.len()].vec;
            v * v.adjoint()
        }
    }

    pub fn subspace_projector(&self, j: usize) -> QOperator {
        QOperator::projector(self.space.clone(), self.subspace_projector_mat(j)).unwrap()
    }

    /// Checks completeness, invariance under both projectors, and the
    /// absence of two-dimensional subspaces with extremal weight.
    pub fn validate(&self, tol: f64) -> Result<(), QError> {
        let d = self.space.dim();
        let mut sum = CMat::zeros(d, d);
        for j in 0..self.num_subspaces() {
            sum += self.subspace_projector_mat(j);
        }
        let comp = (&sum - CMat::identity(d, d)).norm();
        if comp > tol * (d as f64) {
            return Err(QError::Invalid(format!(
                "subspace projectors do not sum to identity (deviation {comp:.3e})"
            )));
        }
        for sub in &self.two_dim {
            if !(sub.p > 0.0 && sub.p < 1.0) {
                return Err(QError::Invalid(format!(
                    "two-dimensional subspace with extremal weight {}",
                    sub.p
                )));
            }
            // Within the subspace, A projects onto va1 and B onto vb1.
            let pa_va0 = self.pa.mat() * &sub.va0;
            let pb_vb0 = self.pb.mat() * &sub.vb0;
            if pa_va0.norm() > tol * (d as f64) || pb_vb0.norm() > tol * (d as f64) {
                return Err(QError::Invalid("subspace basis not aligned with projectors".into()));
            }
            let ip = sub.va1.dotc(&sub.vb1);
            if (ip.re - sub.s).abs() > tol || ip.im.abs() > tol {
                return Err(QError::Invalid("overlap does not match singular value".into()));
            }
        }
        for line in &self.one_dim {
            let av = self.pa.mat() * &line.vec;
            let bv = self.pb.mat() * &line.vec;
            let (in_a, in_b) = match line.class {
                OneDimClass::ImAImB => (true, true),
                OneDimClass::ImAKerB => (true, false),
                OneDimClass::KerAImB => (false, true),
                OneDimClass::KerAKerB => (false, false),
            };
            let da = if in_a { (av - &line.vec).norm() } else { av.norm() };
            let db = if in_b { (bv - &line.vec).norm() } else { bv.norm() };
            if da > tol * (d as f64) || db > tol * (d as f64) {
                return Err(QError::Invalid(format!(
                    "one-dimensional line misclassified as {:?} (da={da:.2e}, db={db:.2e})",
                    line.class
                )));
            }
        }
        Ok(())
    }

    /// Weight of the state in each subspace (the Born distribution of the
    /// subspace measurement).
    pub fn weights(&self, state: &QState) -> Result<Vec<f64>, QError> {
        let n = self.num_subspaces();
        let mut w = Vec::with_capacity(n);
        match state.vector() {
            Some(v) => {
                for j in 0..n {
                    w.push(self.project_vec_weight(j, v));
                }
            }
            None => {
                let rho = state.density();
                for j in 0..n {
                    let pj = self.subspace_projector_mat(j);
                    w.push((pj * &rho).trace().re.max(0.0));
                }
            }
        }
        Ok(w)
    }

    fn project_vec_weight(&self, j: usize, v: &CVec) -> f64 {
        if j < self.two_dim.len() {
            let sub = &self.two_dim[j];
            sub.va1.dotc(v).norm_sqr() + sub.va0.dotc(v).norm_sqr()
        } else {
            self.one_dim[j - self.two_dim.len()].vec.dotc(v).norm_sqr()
        }
    }

    /// Projects a pure state onto subspace `j` without normalizing.
    pub fn project_vec(&self, j: usize, v: &CVec) -> CVec {
        if j < self.two_dim.len() {
            let sub = &self.two_dim[j];
            &sub.va1 * sub.va1.dotc(v) + &sub.va0 * sub.va0.dotc(v)
        } else {
            let line = &self.one_dim[j - self.two_dim.len()].vec;
            line * line.dotc(v)
        }
    }

    /// Samples the complete subspace measurement {Pi_j}.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        state: &QState,
        rng: &mut R,
    ) -> Result<(usize, f64, QState), QError> {
        let w = self.weights(state)?;
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(QError::IncompleteFamily((total - 1.0).abs()));
        }
        let mut pick = w.len() - 1;
        let mut x: f64 = rng.random::<f64>() * total;
        for (j, wj) in w.iter().enumerate() {
            if x < *wj {
                pick = j;
                break;
            }
            x -= wj;
        }
        if w[pick] < 1e-15 {
            return Err(QError::ZeroBranch);
        }
        let post = match state.vector() {
            Some(v) => {
                let proj = self.project_vec(pick, v) / cplx(w[pick].sqrt(), 0.0);
                QState::pure(self.space.clone(), proj)?
            }
            None => {
                let pj = self.subspace_projector(pick);
                state
                    .measure_branches(&pj)?
                    .post_one
                    .ok_or(QError::ZeroBranch)?
            }
        };
        Ok((pick, w[pick], post))
    }

    /// Projector onto the union of subspaces whose weight falls in the
    /// range.
    pub fn threshold_projector(&self, range: ThresholdRange) -> QOperator {
        let d = self.space.dim();
        let mut mat = CMat::zeros(d, d);
        for j in 0..self.num_subspaces() {
            let p = self.weight_of(j);
            let include = match range {
                ThresholdRange::PZero => p == 0.0,
                ThresholdRange::PBelow(c) => p < c,
                ThresholdRange::PAtMost(c) => p <= c,
                ThresholdRange::PAbove(c) => p > c,
                ThresholdRange::PAtLeast(c) => p >= c,
                ThresholdRange::Stuck => {
                    j >= self.two_dim.len()
                        && matches!(
                            self.one_dim[j - self.two_dim.len()].class,
                            OneDimClass::KerAImB | OneDimClass::KerAKerB
                        )
                }
            };
            if include {
                mat += self.subspace_projector_mat(j);
            }
        }
        QOperator::projector(self.space.clone(), mat).unwrap()
    }

    /// The swap unitary that exchanges va1 and va0 in every two-dimensional
    /// subspace and acts as identity on the lines. Conjugating the
    /// kernel(A) part of a state by it moves that part into image(A) except
    /// on the stuck lines.
    pub fn rotate_swap_unitary(&self) -> QOperator {
        let d = self.space.dim();
        let mut mat = CMat::zeros(d, d);
        for sub in &self.two_dim {
            mat += &sub.va1 * sub.va0.adjoint() + &sub.va0 * sub.va1.adjoint();
        }
        for line in &self.one_dim {
            mat += &line.vec * line.vec.adjoint();
        }
        QOperator::unitary(self.space.clone(), mat).unwrap()
    }

    /// The per-subspace rotation taking the a-side basis to the b-side
    /// basis (va1 -> vb1, va0 -> vb0), identity on the lines. This is the
    /// exact limit of the singular-vector transformation algorithm.
    pub fn ab_transform_unitary(&self) -> QOperator {
        let d = self.space.dim();
        let mut mat = CMat::zeros(d, d);
        for sub in &self.two_dim {
            mat += &sub.vb1 * sub.va1.adjoint() + &sub.vb0 * sub.va0.adjoint();
        }
        for line in &self.one_dim {
            mat += &line.vec * line.vec.adjoint();
        }
        QOperator::unitary(self.space.clone(), mat).unwrap()
    }

    /// The decomposition of the complemented pair (I-A, I-B) on the same
    /// subspaces: two-dimensional subspaces keep their weight with the
    /// basis roles exchanged, lines change class accordingly. No new
    /// singular value decomposition is needed.
    pub fn complemented(&self) -> Result<JordanDecomposition, QError> {
        let pa_c = self.pa.complement()?;
        let pb_c = self.pb.complement()?;
        let mut two_dim: Vec<TwoDimSubspace> = self
            .two_dim
            .iter()
            .map(|sub| {
                let mut va1 = sub.va0.clone();
                let mut va0 = -sub.va1.clone();
                let mut vb1 = -sub.vb0.clone();
                let mut vb0 = sub.vb1.clone();
                canonical_phase(&mut va1);
                canonical_phase(&mut va0);
                // Keep <va1|vb1> = s real positive after rephasing va1.
                let inner = va1.dotc(&vb1);
                if inner.norm() > 1e-12 {
                    let corr = (inner / cplx(inner.norm(), 0.0)).conj();
                    for x in vb1.iter_mut() {
                        *x *= corr;
                    }
                }
                let inner0 = va0.dotc(&vb0);
                if inner0.norm() > 1e-12 {
                    let corr = (inner0 / cplx(inner0.norm(), 0.0)).conj();
                    for x in vb0.iter_mut() {
                        *x *= corr;
                    }
                }
                TwoDimSubspace { s: sub.s, p: sub.p, va1, va0, vb1, vb0 }
            })
            .collect();
        two_dim.sort_by(|x, y| {
            y.s.partial_cmp(&x.s)
                .unwrap()
                .then_with(|| lex_key(&x.va1).cmp(&lex_key(&y.va1)))
        });
        let mut one_dim: Vec<OneDimLine> = self
            .one_dim
            .iter()
            .map(|l| OneDimLine { class: l.class.complemented(), vec: l.vec.clone() })
            .collect();
        one_dim.sort_by_key(|l| match l.class {
            OneDimClass::ImAImB => 0,
            OneDimClass::ImAKerB => 1,
            OneDimClass::KerAImB => 2,
            OneDimClass::KerAKerB => 3,
        });
        JordanDecomposition::from_parts(
            self.space.clone(),
            pa_c,
            pb_c,
            two_dim,
            one_dim,
            1e-8,
        )
    }

    /// The decomposition of the swapped pair (B, A): identical subspaces
    /// and weights with the a-side and b-side bases exchanged. The stored
    /// basis conventions are symmetric in the two sides, so no rephasing is
    /// needed.
    pub fn swapped(&self) -> Result<JordanDecomposition, QError> {
        let mut two_dim: Vec<TwoDimSubspace> = self
            .two_dim
            .iter()
            .map(|sub| TwoDimSubspace {
                s: sub.s,
                p: sub.p,
                va1: sub.vb1.clone(),
                va0: sub.vb0.clone(),
                vb1: sub.va1.clone(),
                vb0: sub.va0.clone(),
            })
            .collect();
        two_dim.sort_by(|x, y| {
            y.s.partial_cmp(&x.s)
                .unwrap()
                .then_with(|| lex_key(&x.va1).cmp(&lex_key(&y.va1)))
        });
        let mut one_dim: Vec<OneDimLine> = self
            .one_dim
            .iter()
            .map(|l| OneDimLine { class: l.class.swapped(), vec: l.vec.clone() })
            .collect();
        one_dim.sort_by_key(|l| match l.class {
            OneDimClass::ImAImB => 0,
            OneDimClass::ImAKerB => 1,
            OneDimClass::KerAImB => 2,
            OneDimClass::KerAKerB => 3,
        });
        JordanDecomposition::from_parts(
            self.space.clone(),
            self.pb.clone(),
            self.pa.clone(),
            two_dim,
            one_dim,
            1e-8,
        )
    }

    /// Restriction of a full-space pure state to the coefficient pair
    /// (alpha on va1, beta on va0) of one two-dimensional subspace.
    pub fn coeffs_in(&self, j: usize, v: &CVec) -> (num_complex::Complex64, num_complex::Complex64) {
        let sub = &self.two_dim[j];
        (sub.va1.dotc(v), sub.va0.dotc(v))
    }

    /// Random mixture of states each confined to a single Jordan subspace:
    /// a random superposition of vA1 and vA0 per two-dimensional subspace,
    /// the line vector itself per line, mixed with random weights. Such
    /// states carry no cross-subspace coherence.
    pub fn sample_subspace_mixture<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QState, QError> {
        let d = self.space.dim();
        let mut dens = CMat::zeros(d, d);
        let mut weights: Vec<f64> = (0..self.num_subspaces())
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        for (j, sub) in self.two_dim.iter().enumerate() {
            let theta = rng.random::<f64>() * std::f64::consts::PI / 2.0;
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let v = &sub.va1 * cplx(theta.cos(), 0.0)
                + &sub.va0 * (num_complex::Complex64::from_polar(1.0, phase) * theta.sin());
            dens += &v * v.adjoint() * cplx(weights[j], 0.0);
        }
        let n2 = self.two_dim.len();
        for (i, line) in self.one_dim.iter().enumerate() {
            dens += &line.vec * line.vec.adjoint() * cplx(weights[n2 + i], 0.0);
        }
        QState::mixed(self.space.clone(), dens)
    }

    /// Sum of projectors weighted by 1/p over all subspaces with p > 0.
    /// This is the expectation operator whose trace against a state gives
    /// the normalization of the pseudoinverse state.
    pub fn inverse_weight_operator(&self) -> QOperator {
        let d = self.space.dim();
        let mut mat = CMat::zeros(d, d);
        for j in 0..self.num_subspaces() {
            let p = self.weight_of(j);
            if p > 0.0 {
                mat += self.subspace_projector_mat(j) * cplx(1.0 / p, 0.0);
            }
        }
        QOperator::hermitian(self.space.clone(), mat).unwrap()
    }
}

/// Convenience: decomposition with the default classification tolerance.
pub fn jordan_decompose_default(
    pa: &QOperator,
    pb: &QOperator,
) -> Result<JordanDecomposition, QError> {
    jordan_decompose(pa, pb, TOL_CLASSIFY)
}

/// Builds a projector pair with prescribed two-dimensional weights and line
/// class counts, conjugated by the given unitary. Returns the pair together
/// with the exact subspace projectors in construction order (weights first,
/// then im-im, imA-kerB, kerA-imB, kerA-kerB lines). Used as a test oracle
/// and by experiment drivers that need pairs with known spectra.
pub fn synth_pair(
    space: &RegisterSpace,
    weights: &[f64],
    lines: [usize; 4],
    basis: &CMat,
) -> Result<(QOperator, QOperator, Vec<CMat>), QError> {
    let d = space.dim();
    let need = 2 * weights.len() + lines.iter().sum::<usize>();
    if need != d {
        return Err(QError::DimMismatch { expected: d, got: need });
    }
    let mut pa = CMat::zeros(d, d);
    let mut pb = CMat::zeros(d, d);
    let mut projs = Vec::new();
    let col = |k: usize| CVec::from_column_slice(basis.column(k).as_slice());
    let mut k = 0;
    for &p in weights {
        if !(0.0 < p && p < 1.0) {
            return Err(QError::Invalid("two-dimensional weight must be in (0,1)".into()));
        }
        let e0 = col(k);
        let e1 = col(k + 1);
        let s = p.sqrt();
        let t = (1.0 - p).sqrt();
        let va1 = e0.clone();
        let vb1 = &e0 * cplx(s, 0.0) + &e1 * cplx(t, 0.0);
        pa += &va1 * va1.adjoint();
        pb += &vb1 * vb1.adjoint();
        projs.push(&e0 * e0.adjoint() + &e1 * e1.adjoint());
        k += 2;
    }
    let (mut in_a, mut in_b);
    for (class_idx, &count) in lines.iter().enumerate() {
        for _ in 0..count {
            let v = col(k);
            (in_a, in_b) = match class_idx {
                0 => (true, true),
                1 => (true, false),
                2 => (false, true),
                _ => (false, false),
            };
            if in_a {
                pa += &v * v.adjoint();
            }
            if in_b {
                pb += &v * v.adjoint();
            }
            projs.push(&v * v.adjoint());
            k += 1;
        }
    }
    Ok((
        QOperator::projector(space.clone(), pa)?,
        QOperator::projector(space.clone(), pb)?,
        projs,
    ))
}
