//! Registers, states, operators and measurements.
//!
//! All spaces are explicit tensor products of named registers with the first
//! register varying slowest (row-major), matching `kron` order. States are
//! pure vectors or density matrices; operators carry a structural tag that is
//! validated at construction time against [`TOL_STRUCT`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Hard cap on total Hilbert-space dimension (inclusive).
pub const DIM_CAP: usize = 4096;
/// Tolerance for structural validation: normalization, projector and
/// unitary identities, hermiticity.
pub const TOL_STRUCT: f64 = 1e-9;

pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Error)]
pub enum QError {
    #[error("total dimension {0} exceeds cap {DIM_CAP}")]
    DimCap(usize),
    #[error("register space must have at least one register of dimension >= 1")]
    EmptySpace,
    #[error("duplicate register label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown register label {0:?}")]
    UnknownRegister(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("state is not normalized: {0}")]
    NotNormalized(f64),
    #[error("matrix is not hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not a projector (deviation {0:.3e})")]
    NotProjector(f64),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("density matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("register spaces differ: {0}")]
    SpaceMismatch(String),
    #[error("measurement family is not complete (deviation {0:.3e})")]
    IncompleteFamily(f64),
    #[error("branch has vanishing probability")]
    ZeroBranch,
    #[error("budget exhausted: {0}")]
    CapExceeded(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub label: String,
    pub dim: usize,
}

/// An ordered list of named registers; the full space is their tensor
/// product with the first register varying slowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpace {
    regs: Vec<Register>,
    dim: usize,
}

impl RegisterSpace {
    pub fn new(regs: &[(&str, usize)]) -> Result<Self, QError> {
        if regs.is_empty() {
            return Err(QError::EmptySpace);
        }
        let mut seen = std::collections::HashSet::new();
        let mut dim = 1usize;
        let mut out = Vec::with_capacity(regs.len());
        for (label, d) in regs {
            if *d == 0 {
                return Err(QError::EmptySpace);
            }
            if !seen.insert(label.to_string()) {
                return Err(QError::DuplicateLabel(label.to_string()));
            }
            dim = dim
                .checked_mul(*d)
                .filter(|&x| x <= DIM_CAP)
                .ok_or(QError::DimCap(dim.saturating_mul(*d)))?;
            out.push(Register { label: label.to_string(), dim: *d });
        }
        Ok(RegisterSpace { regs: out, dim })
    }

    pub fn single(label: &str, dim: usize) -> Result<Self, QError> {
        Self::new(&[(label, dim)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn registers(&self) -> &[Register] {
        &self.regs
    }

    pub fn position(&self, label: &str) -> Result<usize, QError> {
        self.regs
            .iter()
            .position(|r| r.label == label)
            .ok_or_else(|| QError::UnknownRegister(label.to_string()))
    }

    pub fn reg_dim(&self, label: &str) -> Result<usize, QError> {
        Ok(self.regs[self.position(label)?].dim)
    }

    /// Stride of register `k`: how far the flat index moves when that
    /// register's value increments by one.
    pub fn stride(&self, k: usize) -> usize {
        self.regs[k + 1..].iter().map(|r| r.dim).product()
    }

    pub fn tensor(&self, other: &RegisterSpace) -> Result<RegisterSpace, QError> {
        let mut regs: Vec<(&str, usize)> =
            self.regs.iter().map(|r| (r.label.as_str(), r.dim)).collect();
        regs.extend(other.regs.iter().map(|r| (r.label.as_str(), r.dim)));
        RegisterSpace::new(&regs)
    }

    /// Flat index of a full assignment of register values.
    pub fn index_of(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.regs.len());
        let mut idx = 0;
        for (k, v) in values.iter().enumerate() {
            debug_assert!(*v < self.regs[k].dim);
            idx = idx * self.regs[k].dim + v;
        }
        idx
    }

    /// Register values of a flat index, slowest first.
    pub fn values_of(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.regs.len()];
        for k in (0..self.regs.len()).rev() {
            out[k] = idx % self.regs[k].dim;
            idx /= self.regs[k].dim;
        }
        out
    }

    /// Value of one register within a flat index.
    pub fn value_at(&self, idx: usize, pos: usize) -> usize {
        (idx / self.stride(pos)) % self.regs[pos].dim
    }

    /// Enumerates the flat offsets of the subcube where the registers listed
    /// in `group` (positions, in the given order) run over all their values
    /// and every other register is fixed to zero. Entry `a` (mixed-radix over
    /// the group dims, first listed slowest) is the offset of group value `a`.
    fn group_offsets(&self, group: &[usize]) -> Vec<usize> {
        let gdim: usize = group.iter().map(|&k| self.regs[k].dim).product();
        let mut offs = vec![0usize; gdim];
        for (a, off) in offs.iter_mut().enumerate() {
            let mut rem = a;
            let mut o = 0;
            for &k in group.iter().rev() {
                let d = self.regs[k].dim;
                o += (rem % d) * self.stride(k);
                rem /= d;
            }
            *off = o;
        }
        offs
    }

    /// Flat offsets of all assignments of the registers NOT in `group`.
    fn rest_offsets(&self, group: &[usize]) -> Vec<usize> {
        let rest: Vec<usize> =
            (0..self.regs.len()).filter(|k| !group.contains(k)).collect();
        self.group_offsets(&rest)
    }

    /// Applies a matrix acting on the listed registers (in the listed order)
    /// to a full-space vector, in place. `mat` must be square of the group
    /// dimension. Cost O(dim * group_dim).
    pub fn apply_to_regs(
        &self,
        vec: &mut CVec,
        labels: &[&str],
        mat: &CMat,
    ) -> Result<(), QError> {
        let group: Vec<usize> =
            labels.iter().map(|l| self.position(l)).collect::<Result<_, _>>()?;
        let gdim: usize = group.iter().map(|&k| self.regs[k].dim).product();
        if mat.nrows() != gdim || mat.ncols() != gdim {
            return Err(QError::DimMismatch { expected: gdim, got: mat.nrows() });
        }
        if vec.len() != self.dim {
            return Err(QError::DimMismatch { expected: self.dim, got: vec.len() });
        }
        let goffs = self.group_offsets(&group);
        let roffs = self.rest_offsets(&group);
        let mut sub = CVec::zeros(gdim);
        for &base in &roffs {
            for (a, &go) in goffs.iter().enumerate() {
                sub[a] = vec[base + go];
            }
            let out = mat * &sub;
            for (a, &go) in goffs.iter().enumerate() {
                vec[base + go] = out[a];
            }
        }
        Ok(())
    }

    /// Norm-squared weight of each value of one register in a full-space
    /// vector (the Born distribution of a computational-basis measurement of
    /// that register).
    pub fn register_weights(&self, vec: &CVec, label: &str) -> Result<Vec<f64>, QError> {
        let pos = self.position(label)?;
        if vec.len() != self.dim {
            return Err(QError::DimMismatch { expected: self.dim, got: vec.len() });
        }
        let mut w = vec![0.0; self.regs[pos].dim];
        for (i, amp) in vec.iter().enumerate() {
            w[self.value_at(i, pos)] += amp.norm_sqr();
        }
        Ok(w)
    }

    /// Projects a full-space vector onto one value of one register, in
    /// place, without renormalizing. Returns the removed weight's
    /// complement, i.e. the squared norm kept.
    pub fn project_register_value(
        &self,
        vec: &mut CVec,
        label: &str,
        value: usize,
    ) -> Result<f64, QError> {
        let pos = self.position(label)?;
        let mut kept = 0.0;
        for i in 0..vec.len() {
            if self.value_at(i, pos) == value {
                kept += vec[i].norm_sqr();
            } else {
                vec[i] = C_ZERO;
            }
        }
        Ok(kept)
    }

    fn same_as(&self, other: &RegisterSpace) -> Result<(), QError> {
        if self == other {
            Ok(())
        } else {
            Err(QError::SpaceMismatch(format!(
                "{:?} vs {:?}",
                self.regs.iter().map(|r| (&r.label, r.dim)).collect::<Vec<_>>(),
                other.regs.iter().map(|r| (&r.label, r.dim)).collect::<Vec<_>>()
            )))
        }
    }
}

fn hermiticity_deviation(m: &CMat) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Projector,
    Unitary,
    Hermitian,
}

/// A dense operator on a register space with a validated structural tag.
#[derive(Debug, Clone)]
pub struct QOperator {
    space: RegisterSpace,
    kind: OperatorKind,
    mat: CMat,
}

impl QOperator {
    pub fn projector(space: RegisterSpace, mat: CMat) -> Result<Self, QError> {
        Self::check_shape(&space, &mat)?;
        let herm = hermiticity_deviation(&mat);
        if herm > TOL_STRUCT {
            return Err(QError::NotHermitian(herm));
        }
        let idem = (&mat * &mat - &mat).norm();
        if idem > TOL_STRUCT * (mat.nrows() as f64).sqrt() {
            return Err(QError::NotProjector(idem));
        }
        Ok(QOperator { space, kind: OperatorKind::Projector, mat })
    }

    pub fn unitary(space: RegisterSpace, mat: CMat) -> Result<Self, QError> {
        Self::check_shape(&space, &mat)?;
        let dev = (mat.adjoint() * &mat - CMat::identity(mat.nrows(), mat.ncols())).norm();
        if dev > TOL_STRUCT * (mat.nrows() as f64).sqrt() {
            return Err(QError::NotUnitary(dev));
        }
        Ok(QOperator { space, kind: OperatorKind::Unitary, mat })
    }

    pub fn hermitian(space: RegisterSpace, mat: CMat) -> Result<Self, QError> {
        Self::check_shape(&space, &mat)?;
        let herm = hermiticity_deviation(&mat);
        if herm > TOL_STRUCT {
            return Err(QError::NotHermitian(herm));
        }
        Ok(QOperator { space, kind: OperatorKind::Hermitian, mat })
    }

    /// Projector onto the span of the given (not necessarily normalized,
    /// must be linearly independent after orthonormalization) vectors.
    pub fn projector_onto_span(space: RegisterSpace, vecs: &[CVec]) -> Result<Self, QError> {
        let d = space.dim();
        let mut basis: Vec<CVec> = Vec::new();
        for v in vecs {
            if v.len() != d {
                return Err(QError::DimMismatch { expected: d, got: v.len() });
            }
            let mut w = v.clone();
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
            let n = w.norm();
            if n > 1e-12 {
                basis.push(w / cplx(n, 0.0));
            }
        }
        let mut mat = CMat::zeros(d, d);
        for b in &basis {
            mat += b * b.adjoint();
        }
        Self::projector(space, mat)
    }

    pub fn identity(space: RegisterSpace) -> Self {
        let d = space.dim();
        QOperator { space, kind: OperatorKind::Projector, mat: CMat::identity(d, d) }
    }

    /// Embeds an operator acting on a subset of registers (listed order)
    /// into the full space.
    pub fn embedded(
        space: RegisterSpace,
        labels: &[&str],
        small: &CMat,
        kind: OperatorKind,
    ) -> Result<Self, QError> {
        let group: Vec<usize> =
            labels.iter().map(|l| space.position(l)).collect::<Result<_, _>>()?;
        let gdim: usize = group.iter().map(|&k| space.registers()[k].dim).product();
        if small.nrows() != gdim || small.ncols() != gdim {
            return Err(QError::DimMismatch { expected: gdim, got: small.nrows() });
        }
        let goffs = space.group_offsets(&group);
        let roffs = space.rest_offsets(&group);
        let d = space.dim();
        let mut mat = CMat::zeros(d, d);
        for &base in &roffs {
            for (a, &ga) in goffs.iter().enumerate() {
                for (b, &gb) in goffs.iter().enumerate() {
                    if small[(a, b)] != C_ZERO {
                        mat[(base + ga, base + gb)] = small[(a, b)];
                    }
                }
            }
        }
        match kind {
            OperatorKind::Projector => Self::projector(space, mat),
            OperatorKind::Unitary => Self::unitary(space, mat),
            OperatorKind::Hermitian => Self::hermitian(space, mat),
        }
    }

    fn check_shape(space: &RegisterSpace, mat: &CMat) -> Result<(), QError> {
        if mat.nrows() != space.dim() || mat.ncols() != space.dim() {
            return Err(QError::DimMismatch { expected: space.dim(), got: mat.nrows() });
        }
        Ok(())
    }

    pub fn space(&self) -> &RegisterSpace {
        &self.space
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    /// The complement `I - P` of a projector.
    pub fn complement(&self) -> Result<QOperator, QError> {
        if self.kind != OperatorKind::Projector {
            return Err(QError::Invalid("complement needs a projector".into()));
        }
        let d = self.mat.nrows();
        Ok(QOperator {
            space: self.space.clone(),
            kind: OperatorKind::Projector,
            mat: CMat::identity(d, d) - &self.mat,
        })
    }

    pub fn rank(&self) -> usize {
        if self.kind == OperatorKind::Projector {
            self.mat.trace().re.round() as usize
        } else {
            self.mat.rank(1e-10)
        }
    }

    /// Tensor with an identity-labelled extension on the right.
    pub fn tensor_identity(&self, extra: &RegisterSpace) -> Result<QOperator, QError> {
        let space = self.space.tensor(extra)?;
        let mat = self.mat.kronecker(&CMat::identity(extra.dim(), extra.dim()));
        Ok(QOperator { space, kind: self.kind, mat })
    }
}

#[derive(Debug, Clone)]
enum StateRepr {
    Pure(CVec),
    Mixed(CMat),
}

/// A normalized quantum state over a register space.
#[derive(Debug, Clone)]
pub struct QState {
    space: RegisterSpace,
    repr: StateRepr,
}

impl QState {
    pub fn pure(space: RegisterSpace, vec: CVec) -> Result<Self, QError> {
        if vec.len() != space.dim() {
            return Err(QError::DimMismatch { expected: space.dim(), got: vec.len() });
        }
        let n = vec.norm();
        if (n - 1.0).abs() > TOL_STRUCT {
            return Err(QError::NotNormalized((n - 1.0).abs()));
        }
        Ok(QState { space, repr: StateRepr::Pure(vec) })
    }

    /// Basis state with the given register values.
    pub fn basis(space: RegisterSpace, values: &[usize]) -> Result<Self, QError> {
        let idx = space.index_of(values);
        let mut v = CVec::zeros(space.dim());
        v[idx] = C_ONE;
        QState::pure(space, v)
    }

    pub fn mixed(space: RegisterSpace, mat: CMat) -> Result<Self, QError> {
        if mat.nrows() != space.dim() || mat.ncols() != space.dim() {
            return Err(QError::DimMismatch { expected: space.dim(), got: mat.nrows() });
        }
        let herm = hermiticity_deviation(&mat);
        if herm > TOL_STRUCT {
            return Err(QError::NotHermitian(herm));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TOL_STRUCT || tr.im.abs() > TOL_STRUCT {
            return Err(QError::NotNormalized((tr.re - 1.0).abs().max(tr.im.abs())));
        }
        let eigs = mat.clone().symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-7 {
            return Err(QError::NotPositive(min));
        }
        Ok(QState { space, repr: StateRepr::Mixed(mat) })
    }

    fn mixed_unchecked(space: RegisterSpace, mat: CMat) -> Self {
        QState { space, repr: StateRepr::Mixed(mat) }
    }

    pub fn space(&self) -> &RegisterSpace {
        &self.space
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn vector(&self) -> Option<&CVec> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> CMat {
        match &self.repr {
            StateRepr::Pure(v) => v * v.adjoint(),
            StateRepr::Mixed(m) => m.clone(),
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(_) => 1.0,
            StateRepr::Mixed(m) => (m * m).trace().re,
        }
    }

    pub fn tensor(&self, other: &QState) -> Result<QState, QError> {
        let space = self.space.tensor(&other.space)?;
        match (&self.repr, &other.repr) {
            (StateRepr::Pure(a), StateRepr::Pure(b)) => {
                QState::pure(space, a.kronecker(b))
            }
            _ => {
                let m = self.density().kronecker(&other.density());
                Ok(QState::mixed_unchecked(space, m))
            }
        }
    }

    /// Traces out every register not listed; the kept registers stay in
    /// their original order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<QState, QError> {
        let keep_pos: Vec<usize> = {
            let mut p: Vec<usize> =
                keep.iter().map(|l| self.space.position(l)).collect::<Result<_, _>>()?;
            p.sort_unstable();
            p.dedup();
            if p.len() != keep.len() {
                return Err(QError::Invalid("duplicate labels in partial_trace".into()));
            }
            p
        };
        if keep_pos.len() == self.space.regs.len() {
            return Ok(self.clone());
        }
        let kept_regs: Vec<(&str, usize)> = keep_pos
            .iter()
            .map(|&k| (self.space.regs[k].label.as_str(), self.space.regs[k].dim))
            .collect();
        let out_space = RegisterSpace::new(&kept_regs)?;
        let koffs = self.space.group_offsets(&keep_pos);
        let roffs = self.space.rest_offsets(&keep_pos);
        let kd = out_space.dim();
        let mut out = CMat::zeros(kd, kd);
        match &self.repr {
            StateRepr::Pure(v) => {
                for &r in &roffs {
                    for (a, &ka) in koffs.iter().enumerate() {
                        let va = v[r + ka];
                        if va == C_ZERO {
                            continue;
                        }
                        for (b, &kb) in koffs.iter().enumerate() {
                            out[(a, b)] += va * v[r + kb].conj();
                        }
                    }
                }
            }
            StateRepr::Mixed(m) => {
                for &r in &roffs {
                    for (a, &ka) in koffs.iter().enumerate() {
                        for (b, &kb) in koffs.iter().enumerate() {
                            out[(a, b)] += m[(r + ka, r + kb)];
                        }
                    }
                }
            }
        }
        Ok(QState::mixed_unchecked(out_space, out))
    }

    pub fn apply_unitary(&self, u: &QOperator) -> Result<QState, QError> {
        if u.kind != OperatorKind::Unitary {
            return Err(QError::Invalid("apply_unitary needs a unitary".into()));
        }
        self.space.same_as(&u.space)?;
        Ok(match &self.repr {
            StateRepr::Pure(v) => {
                QState { space: self.space.clone(), repr: StateRepr::Pure(&u.mat * v) }
            }
            StateRepr::Mixed(m) => QState {
                space: self.space.clone(),
                repr: StateRepr::Mixed(&u.mat * m * u.mat.adjoint()),
            },
        })
    }

    pub fn expectation(&self, op: &QOperator) -> Result<f64, QError> {
        self.space.same_as(&op.space)?;
        let val = match &self.repr {
            StateRepr::Pure(v) => v.dotc(&(&op.mat * v)).re,
            StateRepr::Mixed(m) => (&op.mat * m).trace().re,
        };
        Ok(val)
    }

    /// Overlap fidelity with a pure state: <phi| rho |phi>.
    pub fn overlap(&self, phi: &QState) -> Result<f64, QError> {
        self.space.same_as(&phi.space)?;
        match (&self.repr, &phi.repr) {
            (StateRepr::Pure(v), StateRepr::Pure(w)) => Ok(w.dotc(v).norm_sqr()),
            (StateRepr::Mixed(m), StateRepr::Pure(w)) => Ok(w.dotc(&(m * w)).re),
            _ => Err(QError::Invalid("overlap target must be pure".into())),
        }
    }

    /// Samples the binary measurement {P, I-P}; returns the outcome, its
    /// probability and the renormalized post-state.
    pub fn binary_measure<R: Rng + ?Sized>(
        &self,
        proj: &QOperator,
        rng: &mut R,
    ) -> Result<BinaryOutcome, QError> {
        let branches = self.measure_branches(proj)?;
        let hit = rng.random::<f64>() < branches.prob_one;
        let (prob, state) = if hit {
            (branches.prob_one, branches.post_one)
        } else {
            (1.0 - branches.prob_one, branches.post_zero)
        };
        Ok(BinaryOutcome {
            outcome: hit,
            prob,
            state: state.ok_or(QError::ZeroBranch)?,
        })
    }

    /// Both branches of the binary measurement {P, I-P} without sampling.
    /// A branch with probability below 1e-15 has no post-state.
    pub fn measure_branches(&self, proj: &QOperator) -> Result<MeasBranches, QError> {
        if proj.kind != OperatorKind::Projector {
            return Err(QError::Invalid("measure needs a projector".into()));
        }
        self.space.same_as(&proj.space)?;
        let p1 = self.expectation(proj)?.clamp(0.0, 1.0);
        let post = |m: &CMat, prob: f64| -> Option<QState> {
            if prob < 1e-15 {
                return None;
            }
            Some(match &self.repr {
                StateRepr::Pure(v) => {
                    let w = m * v;
                    QState {
                        space: self.space.clone(),
                        repr: StateRepr::Pure(w / cplx(prob.sqrt(), 0.0)),
                    }
                }
                StateRepr::Mixed(rho) => QState::mixed_unchecked(
                    self.space.clone(),
                    m * rho * m.adjoint() / cplx(prob, 0.0),
                ),
            })
        };
        let comp = proj.complement()?;
        Ok(MeasBranches {
            prob_one: p1,
            post_one: post(&proj.mat, p1),
            post_zero: post(&comp.mat, 1.0 - p1),
        })
    }

    /// Samples a complete projective family.
    pub fn measure_family<R: Rng + ?Sized>(
        &self,
        projs: &[QOperator],
        rng: &mut R,
    ) -> Result<(usize, f64, QState), QError> {
        let d = self.space.dim();
        let mut sum = CMat::zeros(d, d);
        for p in projs {
            if p.kind != OperatorKind::Projector {
                return Err(QError::Invalid("family members must be projectors".into()));
            }
            self.space.same_as(&p.space)?;
            sum += &p.mat;
        }
        let dev = (&sum - CMat::identity(d, d)).norm();
        if dev > TOL_STRUCT * (d as f64) {
            return Err(QError::IncompleteFamily(dev));
        }
        let probs: Vec<f64> =
            projs.iter().map(|p| self.expectation(p).unwrap().max(0.0)).collect();
        let mut u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
        let mut pick = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if u < *p {
                pick = i;
                break;
            }
            u -= p;
        }
        let branches = self.measure_branches(&projs[pick])?;
        Ok((pick, branches.prob_one, branches.post_one.ok_or(QError::ZeroBranch)?))
    }
}

#[derive(Debug, Clone)]
pub struct BinaryOutcome {
    pub outcome: bool,
    pub prob: f64,
    pub state: QState,
}

#[derive(Debug, Clone)]
pub struct MeasBranches {
    pub prob_one: f64,
    pub post_one: Option<QState>,
    pub post_zero: Option<QState>,
}

/// Trace distance (1/2)||rho - sigma||_1 via the Hermitian eigenvalues of
/// the difference.
pub fn trace_distance(a: &QState, b: &QState) -> Result<f64, QError> {
    if a.space() != b.space() {
        return Err(QError::SpaceMismatch("trace_distance".into()));
    }
    Ok(trace_distance_mats(&a.density(), &b.density()))
}

pub fn trace_distance_mats(a: &CMat, b: &CMat) -> f64 {
    let diff = a - b;
    let eigs = diff.symmetric_eigen().eigenvalues;
    0.5 * eigs.iter().map(|x| x.abs()).sum::<f64>()
}

/// Standard normal sample via Box-Muller.
pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with
/// the phase convention fixed on the diagonal of R.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| {
        cplx(sample_normal(rng), sample_normal(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / cplx(d.norm(), 0.0) } else { C_ONE };
        for i in 0..dim {
            q[(i, j)] *= phase.conj();
        }
    }
    q
}

/// Hermitian eigendecomposition that survives inputs whose exact zero
/// structure derails the plain tridiagonalization (nalgebra can emit NaN on
/// such matrices, e.g. low-rank compressions of sparse projectors). A
/// non-finite result is retried on a fixed-rotation conjugate, which has the
/// same eigenvalues and a dense zero-free layout, and the basis is rotated
/// back.
pub fn symmetric_eigen_checked(mat: &CMat) -> Result<(DVector<f64>, CMat), QError> {
    fn finite(vals: &DVector<f64>, vecs: &CMat) -> bool {
        vals.iter().all(|l| l.is_finite())
            && vecs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
    let eig = mat.clone().symmetric_eigen();
    if finite(&eig.eigenvalues, &eig.eigenvectors) {
        return Ok((eig.eigenvalues, eig.eigenvectors));
    }
    for attempt in 0..3u64 {
        let mut rng = crate::rng::trial_rng(0x6569_6765_6e66_6978, attempt);
        let q = haar_unitary(mat.nrows(), &mut rng);
        let eig = (q.adjoint() * mat * &q).symmetric_eigen();
        let vecs = &q * eig.eigenvectors;
        if finite(&eig.eigenvalues, &vecs) {
            return Ok((eig.eigenvalues, vecs));
        }
    }
    Err(QError::Invalid("eigendecomposition produced non-finite values".into()))
}

/// Haar-random pure state.
pub fn haar_state<R: Rng + ?Sized>(space: RegisterSpace, rng: &mut R) -> QState {
    let mut v = CVec::from_fn(space.dim(), |_, _| {
        cplx(sample_normal(rng), sample_normal(rng))
    });
    let n = v.norm();
    v /= cplx(n, 0.0);
    QState::pure(space, v).unwrap()
}

/// Random rank-`rank` projector: span of the first columns of a Haar
/// unitary.
pub fn random_projector<R: Rng + ?Sized>(
    space: RegisterSpace,
    rank: usize,
    rng: &mut R,
) -> QOperator {
    let d = space.dim();
    assert!(rank <= d);
    let u = haar_unitary(d, rng);
    let mut mat = CMat::zeros(d, d);
    for j in 0..rank {
        let col = u.column(j);
        mat += col * col.adjoint();
    }
    QOperator::projector(space, mat).unwrap()
}

/// Unitary whose first column is the given unit vector, built from a single
/// Householder reflection plus a phase fix on the first column.
pub fn unitary_from_column(space: RegisterSpace, col: &CVec) -> Result<QOperator, QError> {
    let d = space.dim();
    if col.len() != d {
        return Err(QError::DimMismatch { expected: d, got: col.len() });
    }
    if (col.norm() - 1.0).abs() > TOL_STRUCT {
        return Err(QError::NotNormalized((col.norm() - 1.0).abs()));
    }
    let ip = col[0];
    let phase = if ip.norm() > 1e-12 { ip / cplx(ip.norm(), 0.0) } else { C_ONE };
    // t' = conj(phase) * col has real nonnegative first entry, so the
    // reflection through (e0 - t') maps e0 exactly onto t'.
    let tprime = col * phase.conj();
    let mut u = -tprime;
    u[0] += C_ONE;
    let n = u.norm();
    let mut mat = CMat::identity(d, d);
    if n > 1e-12 {
        u /= cplx(n, 0.0);
        mat -= (&u * u.adjoint()) * cplx(2.0, 0.0);
    }
    for i in 0..d {
        mat[(i, 0)] *= phase;
    }
    QOperator::unitary(space, mat)
}
