//! Toy public-coin protocol instances and their classical extraction layer:
//! commit-and-open over line shares in small binary fields, a one-out-of-two
//! graph-isomorphism subroutine on tiny graphs, consistency predicates,
//! special-soundness extractors, admissibility statistics, and the binding
//! and collapsing experiment harnesses.
//!
//! Provers are explicit unitaries on a response space H: U_r carries |0> to
//! sqrt(gamma_r) |accepting superposition> + sqrt(1 - gamma_r) |reject>, so
//! per-challenge success probabilities are tunable exactly.

pub mod commit;
pub mod gf;
pub mod graphs;

pub use commit::{uniq_binding_experiment, ToyCommitment, UniqAdversary};
pub use gf::Gf;
pub use graphs::{permutations, Graph};

use crate::qstate::{
    cplx, unitary_from_column, CMat, CVec, OperatorKind, QError, QOperator, QState, RegisterSpace,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

/// Public first message plus instance data the verifier sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauPre {
    CommitOpen {
        field_bits: u32,
        /// Commitments to the line shares, one per challenge position.
        shares: Vec<u8>,
    },
    Gni {
        g0: Graph,
        g1: Graph,
        /// Instance graph isomorphic to exactly one of g0, g1.
        h: Graph,
        /// Prover's first message: a permuted copy of (g_c, g_{1-c}).
        h0: Graph,
        h1: Graph,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyKind {
    CommitOpen,
    Gni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// Full committed line.
    Line { w: u8, u: u8 },
    /// Shared intercept recovered from a parallel repetition.
    Intercept { w: u8 },
    /// Which instance graph the hidden graph came from.
    Bit(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTranscript {
    pub tau: TauPre,
    /// (challenge, recorded partial response bytes); empty bytes mean the
    /// recording step kept nothing for that challenge.
    pub pairs: Vec<(usize, Vec<u8>)>,
}

#[derive(Debug, Clone)]
enum Detail {
    CommitOpen { field: Gf, line: (u8, u8), opening_bit: bool },
    Gni { bit: u8, perms: usize },
}

/// Per-challenge success probability of the constructed prover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GammaSpec {
    Uniform(f64),
    PerChallenge(Vec<f64>),
}

impl GammaSpec {
    fn validate(&self, r_count: usize) -> Result<(), QError> {
        let ok = |g: f64| (0.0..=1.0).contains(&g);
        match self {
            GammaSpec::Uniform(g) if ok(*g) => Ok(()),
            GammaSpec::PerChallenge(v) if v.len() == r_count && v.iter().all(|g| ok(*g)) => Ok(()),
            _ => Err(QError::Invalid("gamma spec needs values in [0,1], one per challenge".into())),
        }
    }

    pub fn value(&self, r: usize) -> f64 {
        match self {
            GammaSpec::Uniform(g) => *g,
            GammaSpec::PerChallenge(v) => v[r],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyProtocol {
    pub name: String,
    pub tau: TauPre,
    pub r_count: usize,
    pub h_space: RegisterSpace,
    /// U_r, indexed by challenge.
    pub unitaries: Vec<QOperator>,
    /// Prover state before any U_r is applied.
    pub initial: QState,
    detail: Detail,
}

fn collinear(field: &Gf, shares: &[u8]) -> bool {
    if shares.len() < 2 || shares.iter().any(|&s| s as usize >= field.order()) {
        return false;
    }
    match field.interpolate_line((0, shares[0]), (1, shares[1])) {
        Ok((w, u)) => {
            shares.iter().enumerate().all(|(r, &s)| field.eval_line(w, u, r as u8) == s)
        }
        Err(_) => false,
    }
}

/// Commit-and-open toy: the prover commits to the shares of a degree-1 line
/// over GF(2^m) (one share per challenge position, commitments are the shares
/// themselves), and opening position r reveals share r plus an opening bit
/// the receiver ignores. Two distinct opened positions determine the line.
pub fn commit_open_toy(
    r_count: usize,
    opening_bit: bool,
    gamma: &GammaSpec,
    rng: &mut impl Rng,
) -> Result<ToyProtocol, QError> {
    if !(2..=64).contains(&r_count) {
        return Err(QError::Invalid(format!("challenge count {r_count} outside 2..=64")));
    }
    gamma.validate(r_count)?;
    let bits = (usize::BITS - (r_count - 1).leading_zeros()).max(1);
    let field = Gf::new(bits)?;
    let q = field.order();
    let w = rng.random_range(0..q) as u8;
    let u = rng.random_range(0..q) as u8;
    let shares: Vec<u8> = (0..r_count).map(|r| field.eval_line(w, u, r as u8)).collect();

    let h_space = if opening_bit {
        RegisterSpace::new(&[("v", q), ("o", 2)])?
    } else {
        RegisterSpace::new(&[("v", q)])?
    };
    let omega_dim = if opening_bit { 2 } else { 1 };
    let dh = h_space.dim();
    let mut unitaries = Vec::with_capacity(r_count);
    for r in 0..r_count {
        let g = gamma.value(r);
        let acc: Vec<usize> =
            (0..omega_dim).map(|o| shares[r] as usize * omega_dim + o).collect();
        let rej = (shares[r] ^ 1) as usize * omega_dim;
        let mut col = CVec::zeros(dh);
        let amp = (g / acc.len() as f64).sqrt();
        for &z in &acc {
            col[z] = cplx(amp, 0.0);
        }
        col[rej] += cplx((1.0 - g).sqrt(), 0.0);
        unitaries.push(unitary_from_column(h_space.clone(), &col)?);
    }
    let initial = QState::basis(h_space.clone(), &vec![0; h_space.registers().len()])?;
    Ok(ToyProtocol {
        name: format!("commit-open-{r_count}"),
        tau: TauPre::CommitOpen { field_bits: bits, shares },
        r_count,
        h_space,
        unitaries,
        initial,
        detail: Detail::CommitOpen { field, line: (w, u), opening_bit },
    })
}

/// One-out-of-two graph isomorphism on tiny graphs. The statement holds a
/// hidden permuted copy h of g_bit; the prover sends a freshly permuted pair
/// (h0, h1) covering (g_c, g_{1-c}), and either opens both maps (challenge 0)
/// or exhibits an isomorphism from h onto one of them (challenge 1).
pub fn gni_toy(
    g0: Graph,
    g1: Graph,
    gamma: &GammaSpec,
    rng: &mut impl Rng,
) -> Result<ToyProtocol, QError> {
    if g0.n != g1.n {
        return Err(QError::Invalid("instance graphs must share a vertex count".into()));
    }
    if g0.isomorphic(&g1) {
        return Err(QError::Invalid("instance graphs must be non-isomorphic".into()));
    }
    gamma.validate(2)?;
    let perms = permutations(g0.n);
    let np = perms.len();
    let bit = rng.random_range(0..2) as u8;
    let h = [g0, g1][bit as usize].permuted(&perms[rng.random_range(0..np)]);
    let c = rng.random_range(0..2) as u8;
    let h0 = [g0, g1][c as usize].permuted(&perms[rng.random_range(0..np)]);
    let h1 = [g0, g1][1 - c as usize].permuted(&perms[rng.random_range(0..np)]);
    let tau = TauPre::Gni { g0, g1, h, h0, h1 };

    let z_dim = 2 * np * np + 2 * np;
    let h_space = RegisterSpace::single("z", z_dim)?;
    let mut unitaries = Vec::with_capacity(2);
    for r in 0..2 {
        let g = gamma.value(r);
        let acc: Vec<usize> =
            (0..z_dim).filter(|&z| verify_gni(&tau, &perms, r, z)).collect();
        if acc.is_empty() {
            return Err(QError::Invalid("honest instance has an accepting response".into()));
        }
        let rej = (0..z_dim)
            .find(|&z| !verify_gni(&tau, &perms, r, z))
            .ok_or_else(|| QError::Invalid("no rejecting response exists".into()))?;
        let mut col = CVec::zeros(z_dim);
        let amp = (g / acc.len() as f64).sqrt();
        for &z in &acc {
            col[z] = cplx(amp, 0.0);
        }
        col[rej] += cplx((1.0 - g).sqrt(), 0.0);
        unitaries.push(unitary_from_column(h_space.clone(), &col)?);
    }
    let initial = QState::basis(h_space.clone(), &[0])?;
    Ok(ToyProtocol {
        name: format!("gni-{}", g0.n),
        tau,
        r_count: 2,
        h_space,
        unitaries,
        initial,
        detail: Detail::Gni { bit, perms: np },
    })
}

fn verify_gni(tau: &TauPre, perms: &[Vec<usize>], r: usize, z: usize) -> bool {
    let TauPre::Gni { g0, g1, h, h0, h1 } = tau else {
        return false;
    };
    let np = perms.len();
    if r == 0 {
        if z >= 2 * np * np {
            return false;
        }
        let c = z / (np * np);
        let s0 = z / np % np;
        let s1 = z % np;
        let gc = [g0, g1][c];
        let gn = [g0, g1][1 - c];
        gc.permuted(&perms[s0]) == *h0 && gn.permuted(&perms[s1]) == *h1
    } else {
        if z < 2 * np * np {
            return false;
        }
        let t = z - 2 * np * np;
        let d = t / np;
        let s = t % np;
        h.permuted(&perms[s]) == *[h0, h1][d]
    }
}

impl ToyProtocol {
    pub fn kind(&self) -> ToyKind {
        match self.detail {
            Detail::CommitOpen { .. } => ToyKind::CommitOpen,
            Detail::Gni { .. } => ToyKind::Gni,
        }
    }

    pub fn prover_unitary(&self, r: usize) -> &QOperator {
        &self.unitaries[r]
    }

    /// Verifier predicate on (tau, r, z), deterministic.
    pub fn verify(&self, r: usize, z: usize) -> bool {
        if r >= self.r_count || z >= self.h_space.dim() {
            return false;
        }
        match (&self.detail, &self.tau) {
            (Detail::CommitOpen { field, opening_bit, .. }, TauPre::CommitOpen { shares, .. }) => {
                let omega_dim = if *opening_bit { 2 } else { 1 };
                let v = z / omega_dim;
                collinear(field, shares) && v == shares[r] as usize
            }
            (Detail::Gni { perms, .. }, tau) => {
                verify_gni(tau, &permutations_cached(*perms), r, z)
            }
            _ => false,
        }
    }

    pub fn accepting_set(&self, r: usize) -> Vec<usize> {
        (0..self.h_space.dim()).filter(|&z| self.verify(r, z)).collect()
    }

    /// Partial response recorded for transcript index i: the share for
    /// commit-and-open; for the graph toy the challenge-0 bit c, with nothing
    /// recorded on challenge 1 in the first transcript.
    pub fn partial_fn(&self, i: usize, r: usize, z: usize) -> Vec<u8> {
        match &self.detail {
            Detail::CommitOpen { opening_bit, .. } => {
                let omega_dim = if *opening_bit { 2 } else { 1 };
                vec![(z / omega_dim) as u8]
            }
            Detail::Gni { perms, .. } => {
                let np = *perms;
                if r == 0 {
                    vec![(z / (np * np)) as u8]
                } else if i == 0 {
                    vec![]
                } else {
                    vec![((z - 2 * np * np) / np) as u8]
                }
            }
        }
    }

    /// Accepting responses for challenge r grouped by the value of f_i.
    pub fn response_family(&self, i: usize, r: usize) -> Vec<(Vec<u8>, Vec<usize>)> {
        let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for z in self.accepting_set(r) {
            groups.entry(self.partial_fn(i, r, z)).or_default().push(z);
        }
        groups.into_iter().collect()
    }

    /// Consistency predicate g on recorded (r, y) pairs.
    pub fn consistent(&self, pairs: &[(usize, Vec<u8>)]) -> bool {
        consistent_for_tau(&self.tau, pairs)
    }

    /// Special-soundness extractor on a consistent partial transcript. Needs
    /// two recorded pairs with distinct challenges (for the graph toy: one
    /// challenge-0 bit and one challenge-1 bit), otherwise reports why not.
    pub fn ss_extract(&self, pt: &PartialTranscript) -> Result<Witness, QError> {
        if pt.tau != self.tau {
            return Err(QError::Invalid("transcript is for a different instance".into()));
        }
        if !self.consistent(&pt.pairs) {
            return Err(QError::Invalid("transcript fails the consistency predicate".into()));
        }
        let recorded: Vec<(usize, u8)> = pt
            .pairs
            .iter()
            .filter(|(_, y)| !y.is_empty())
            .map(|(r, y)| (*r, y[0]))
            .collect();
        match &self.detail {
            Detail::CommitOpen { field, .. } => {
                for (i, &(r1, v1)) in recorded.iter().enumerate() {
                    for &(r2, v2) in &recorded[i + 1..] {
                        if r1 != r2 {
                            let (w, u) =
                                field.interpolate_line((r1 as u8, v1), (r2 as u8, v2))?;
                            return Ok(Witness::Line { w, u });
                        }
                    }
                }
                Err(QError::Invalid(
                    "duplicate challenges: need two distinct opened positions".into(),
                ))
            }
            Detail::Gni { .. } => {
                let c = recorded.iter().find(|(r, _)| *r == 0);
                let d = recorded.iter().find(|(r, _)| *r == 1);
                match (c, d) {
                    (Some(&(_, c)), Some(&(_, d))) => Ok(Witness::Bit(c ^ d)),
                    _ => Err(QError::Invalid(
                        "need recorded bits for both challenges to extract".into(),
                    )),
                }
            }
        }
    }

    /// Witness relation check against the instance, not the hidden secrets.
    pub fn witness_valid(&self, wit: &Witness) -> bool {
        match (&self.detail, &self.tau, wit) {
            (
                Detail::CommitOpen { field, .. },
                TauPre::CommitOpen { shares, .. },
                Witness::Line { w, u },
            ) => shares
                .iter()
                .enumerate()
                .all(|(r, &s)| field.eval_line(*w, *u, r as u8) == s),
            (
                Detail::CommitOpen { field, .. },
                TauPre::CommitOpen { shares, .. },
                Witness::Intercept { w },
            ) => (0..field.order() as u8).any(|u| {
                shares
                    .iter()
                    .enumerate()
                    .all(|(r, &s)| field.eval_line(*w, u, r as u8) == s)
            }),
            (Detail::Gni { .. }, TauPre::Gni { g0, g1, h, .. }, Witness::Bit(b)) => {
                *b < 2 && h.isomorphic([g0, g1][*b as usize])
            }
            _ => false,
        }
    }

    /// Hidden data, for experiment cross-checks only.
    pub fn secret_witness(&self) -> Witness {
        match &self.detail {
            Detail::CommitOpen { line, .. } => Witness::Line { w: line.0, u: line.1 },
            Detail::Gni { bit, .. } => Witness::Bit(*bit),
        }
    }

    pub fn instance_json(&self, include_unitaries: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "name": self.name,
            "kind": match self.kind() { ToyKind::CommitOpen => "commit-open", ToyKind::Gni => "gni" },
            "challenges": self.r_count,
            "response_dim": self.h_space.dim(),
            "tau": self.tau,
        });
        if include_unitaries {
            let us: Vec<Vec<Vec<[f64; 2]>>> = self
                .unitaries
                .iter()
                .map(|u| {
                    let m = u.mat();
                    (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                        .collect()
                })
                .collect();
            v["unitaries"] = serde_json::json!(us);
        }
        v
    }
}

/// Consistency predicate g evaluated directly on a (possibly adversarial)
/// first message; monotone under subsets because it is a conjunction over
/// pairs plus a condition on tau alone. Empty recorded bytes impose nothing.
pub fn consistent_for_tau(tau: &TauPre, pairs: &[(usize, Vec<u8>)]) -> bool {
    match tau {
        TauPre::CommitOpen { field_bits, shares } => {
            let Ok(field) = Gf::new(*field_bits) else {
                return false;
            };
            if !collinear(&field, shares) {
                return false;
            }
            pairs.iter().all(|(r, y)| {
                *r < shares.len() && (y.is_empty() || (y.len() == 1 && y[0] == shares[*r]))
            })
        }
        TauPre::Gni { g0, g1, h, h0, h1 } => pairs.iter().all(|(r, y)| {
            if *r >= 2 || y.len() > 1 {
                return false;
            }
            let Some(&b) = y.first() else {
                return true;
            };
            if b > 1 {
                return false;
            }
            if *r == 0 {
                let gc = [g0, g1][b as usize];
                let gn = [g0, g1][1 - b as usize];
                h0.isomorphic(gc) && h1.isomorphic(gn)
            } else {
                [h0, h1][b as usize].isomorphic(h)
            }
        }),
    }
}

fn permutations_cached(np: usize) -> Vec<Vec<usize>> {
    let n = match np {
        2 => 2,
        6 => 3,
        24 => 4,
        _ => unreachable!("permutation counts come from graph sizes 2..=4"),
    };
    permutations(n)
}

/// H tensor R measurement kit. Dense joint operators are materialized only
/// while the joint dimension stays small; the per-challenge projectors and
/// their mean are always available.
#[derive(Debug, Clone)]
pub struct ProtocolMeasurements {
    pub joint: RegisterSpace,
    /// Pulled-back acceptance projector per challenge, on H.
    pub pi_vr: Vec<QOperator>,
    /// Mean of the pi_vr matrices; Tr(Pi_C rho x uniform) = Tr(mean rho).
    pub mean_accept: CMat,
    pub pi_c: Option<QOperator>,
    pub pi_u: Option<QOperator>,
}

pub const DENSE_JOINT_LIMIT: usize = 1024;

pub fn make_measurements(p: &ToyProtocol) -> Result<ProtocolMeasurements, QError> {
    let r_space = RegisterSpace::single("r", p.r_count)?;
    let joint = p.h_space.tensor(&r_space)?;
    let dh = p.h_space.dim();
    let mut pi_vr = Vec::with_capacity(p.r_count);
    let mut mean = CMat::zeros(dh, dh);
    for r in 0..p.r_count {
        let u = p.unitaries[r].mat();
        let mut diag = CMat::zeros(dh, dh);
        for z in p.accepting_set(r) {
            diag[(z, z)] = cplx(1.0, 0.0);
        }
        let mat = u.adjoint() * diag * u;
        mean += &mat;
        pi_vr.push(QOperator::projector(p.h_space.clone(), mat)?);
    }
    mean *= cplx(1.0 / p.r_count as f64, 0.0);

    let (pi_c, pi_u) = if joint.dim() <= DENSE_JOINT_LIMIT {
        let d = joint.dim();
        let mut c = CMat::zeros(d, d);
        for (r, pv) in pi_vr.iter().enumerate() {
            let m = pv.mat();
            for i in 0..dh {
                for j in 0..dh {
                    let x = m[(i, j)];
                    if x.norm() > 0.0 {
                        c[(i * p.r_count + r, j * p.r_count + r)] = x;
                    }
                }
            }
        }
        let plus = CMat::from_element(p.r_count, p.r_count, cplx(1.0 / p.r_count as f64, 0.0));
        (
            Some(QOperator::projector(joint.clone(), c)?),
            Some(QOperator::embedded(joint.clone(), &["r"], &plus, OperatorKind::Projector)?),
        )
    } else {
        (None, None)
    };
    Ok(ProtocolMeasurements { joint, pi_vr, mean_accept: mean, pi_c, pi_u })
}

/// Prover state joined with the uniform challenge register.
pub fn joint_initial(p: &ToyProtocol, meas: &ProtocolMeasurements) -> Result<QState, QError> {
    let r_space = RegisterSpace::single("r", p.r_count)?;
    let amp = cplx((1.0 / p.r_count as f64).sqrt(), 0.0);
    let plus = QState::pure(r_space, CVec::from_element(p.r_count, amp))?;
    debug_assert_eq!(meas.joint.dim(), p.h_space.dim() * p.r_count);
    p.initial.tensor(&plus)
}

/// t-fold parallel repetition of the commit-and-open toy with a shared
/// intercept and fresh slopes per slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParallelCommitOpen {
    pub t: usize,
    pub field_bits: u32,
    pub r_count: usize,
    pub intercept: u8,
    pub slopes: Vec<u8>,
    pub shares: Vec<Vec<u8>>,
}

/// Challenge tuple (one challenge per slot) with recorded per-slot bytes.
pub type ParallelTuple = (Vec<usize>, Vec<Vec<u8>>);

impl ParallelCommitOpen {
    pub fn sample(t: usize, r_count: usize, rng: &mut impl Rng) -> Result<Self, QError> {
        if t == 0 {
            return Err(QError::Invalid("need at least one slot".into()));
        }
        if !(2..=64).contains(&r_count) {
            return Err(QError::Invalid(format!("challenge count {r_count} outside 2..=64")));
        }
        let bits = (usize::BITS - (r_count - 1).leading_zeros()).max(1);
        let field = Gf::new(bits)?;
        let q = field.order();
        let intercept = rng.random_range(0..q) as u8;
        let slopes: Vec<u8> = (0..t).map(|_| rng.random_range(0..q) as u8).collect();
        let shares = slopes
            .iter()
            .map(|&u| (0..r_count).map(|r| field.eval_line(intercept, u, r as u8)).collect())
            .collect();
        Ok(ParallelCommitOpen { t, field_bits: bits, r_count, intercept, slopes, shares })
    }

    pub fn field(&self) -> Gf {
        Gf::new(self.field_bits).expect("stored exponent is valid")
    }

    pub fn honest_tuple(&self, rs: &[usize]) -> ParallelTuple {
        let ys = rs.iter().enumerate().map(|(j, &r)| vec![self.shares[j][r]]).collect();
        (rs.to_vec(), ys)
    }

    /// Slot-wise consistency over the whole tuple list: every tuple spans all
    /// t slots, and within each slot the recorded bytes match that slot's
    /// committed line. Monotone under dropping tuples.
    pub fn consistent(&self, tuples: &[ParallelTuple]) -> bool {
        let field = self.field();
        tuples.iter().all(|(rs, ys)| {
            rs.len() == self.t
                && ys.len() == self.t
                && (0..self.t).all(|j| {
                    rs[j] < self.r_count
                        && collinear(&field, &self.shares[j])
                        && (ys[j].is_empty()
                            || (ys[j].len() == 1 && ys[j][0] == self.shares[j][rs[j]]))
                })
        })
    }
}

/// Parallel-repetition extractor: find any slot whose challenges take at
/// least k distinct values across the tuples and interpolate that slot's
/// line; its intercept is the shared witness. No qualifying slot is the
/// abort branch.
pub fn pss_extract_parallel(
    inst: &ParallelCommitOpen,
    tuples: &[ParallelTuple],
    k: usize,
) -> Result<Witness, QError> {
    if !inst.consistent(tuples) {
        return Err(QError::Invalid("tuple list fails slot-wise consistency".into()));
    }
    let field = inst.field();
    for j in 0..inst.t {
        let mut seen: Vec<(usize, u8)> = Vec::new();
        for (rs, ys) in tuples {
            if ys[j].is_empty() {
                continue;
            }
            let r = rs[j];
            if !seen.iter().any(|&(r0, _)| r0 == r) {
                seen.push((r, ys[j][0]));
            }
        }
        if seen.len() >= k {
            let (r1, v1) = seen[0];
            let (r2, v2) = seen[1];
            let (w, _) = field.interpolate_line((r1 as u8, v1), (r2 as u8, v2))?;
            return Ok(Witness::Intercept { w });
        }
    }
    Err(QError::Invalid(format!("no slot has {k} distinct challenges: abort")))
}

/// Exact abort probability for uniformly random tuples: each slot's column
/// of challenges is i.i.d. uniform, so the abort event is the product over
/// slots of Pr[column has fewer than k distinct values], computed by
/// enumeration.
pub fn parallel_abort_probability(
    t: usize,
    tuples: usize,
    r_count: usize,
    k: usize,
) -> Result<f64, QError> {
    let total = (r_count as f64).powi(tuples as i32);
    if total > 1e7 {
        return Err(QError::Invalid("enumeration too large".into()));
    }
    let mut bad = 0usize;
    let mut col = vec![0usize; tuples];
    loop {
        let mut distinct: Vec<usize> = col.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < k {
            bad += 1;
        }
        let mut i = 0;
        loop {
            if i == tuples {
                let per_slot = bad as f64 / total;
                return Ok(per_slot.powi(t as i32));
            }
            col[i] += 1;
            if col[i] < r_count {
                break;
            }
            col[i] = 0;
            i += 1;
        }
    }
}

/// The lemma's abort bound t * k * ((k-1)/k)^tuples.
pub fn parallel_abort_bound(t: usize, tuples: usize, k: usize) -> f64 {
    t as f64 * k as f64 * ((k as f64 - 1.0) / k as f64).powi(tuples as i32)
}

/// Classical transcript layer for the graph toy repeated lambda times in
/// parallel with one shared hidden bit. Responses are kept as bits only;
/// None marks positions the partial recording dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GniClassical {
    pub lambda: usize,
    pub g0: Graph,
    pub g1: Graph,
    pub h: Graph,
    pub h0: Vec<Graph>,
    pub h1: Vec<Graph>,
    bit: u8,
    cs: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GniTranscript {
    pub rs: Vec<u8>,
    pub bits: Vec<Option<u8>>,
}

impl GniClassical {
    pub fn sample(
        lambda: usize,
        g0: Graph,
        g1: Graph,
        rng: &mut impl Rng,
    ) -> Result<Self, QError> {
        if !(1..=6).contains(&lambda) {
            return Err(QError::Invalid(format!("parallelism {lambda} outside 1..=6")));
        }
        if g0.n != g1.n || g0.isomorphic(&g1) {
            return Err(QError::Invalid("instance graphs must be non-isomorphic".into()));
        }
        let perms = permutations(g0.n);
        let np = perms.len();
        let bit = rng.random_range(0..2) as u8;
        let h = [g0, g1][bit as usize].permuted(&perms[rng.random_range(0..np)]);
        let mut h0 = Vec::with_capacity(lambda);
        let mut h1 = Vec::with_capacity(lambda);
        let mut cs = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let c = rng.random_range(0..2) as u8;
            h0.push([g0, g1][c as usize].permuted(&perms[rng.random_range(0..np)]));
            h1.push([g0, g1][1 - c as usize].permuted(&perms[rng.random_range(0..np)]));
            cs.push(c);
        }
        Ok(GniClassical { lambda, g0, g1, h, h0, h1, bit, cs })
    }

    pub fn secret_bit(&self) -> u8 {
        self.bit
    }

    /// Honest response bits for a challenge vector; `first` applies the
    /// first-transcript recording rule that keeps nothing at challenge-1
    /// positions.
    pub fn honest_transcript(&self, rs: &[u8], first: bool) -> GniTranscript {
        let bits = rs
            .iter()
            .enumerate()
            .map(|(l, &r)| {
                if r == 0 {
                    Some(self.cs[l])
                } else if first {
                    None
                } else {
                    Some(self.bit ^ self.cs[l])
                }
            })
            .collect();
        GniTranscript { rs: rs.to_vec(), bits }
    }

    fn position_ok(&self, l: usize, r: u8, b: u8) -> bool {
        if r == 0 {
            let gc = [self.g0, self.g1][b as usize];
            let gn = [self.g0, self.g1][1 - b as usize];
            self.h0[l].isomorphic(&gc) && self.h1[l].isomorphic(&gn)
        } else {
            [self.h0[l], self.h1[l]][b as usize].isomorphic(&self.h)
        }
    }

    fn shaped(&self, t: &GniTranscript) -> bool {
        t.rs.len() == self.lambda
            && t.bits.len() == self.lambda
            && t.rs.iter().all(|&r| r < 2)
            && t.bits.iter().flatten().all(|&b| b < 2)
    }

    /// Full consistency: every position carries a bit and every bit checks
    /// out against the instance graphs.
    pub fn g(&self, ts: &[&GniTranscript]) -> bool {
        ts.iter().all(|t| {
            self.shaped(t)
                && (0..self.lambda).all(|l| match t.bits[l] {
                    Some(b) => self.position_ok(l, t.rs[l], b),
                    None => false,
                })
        })
    }

    /// Relaxed consistency: the first transcript may omit bits at its
    /// challenge-1 positions; everything present must still check out.
    pub fn g_prime(&self, ts: &[&GniTranscript]) -> bool {
        ts.iter().enumerate().all(|(i, t)| {
            self.shaped(t)
                && (0..self.lambda).all(|l| match t.bits[l] {
                    Some(b) => self.position_ok(l, t.rs[l], b),
                    None => i == 0 && t.rs[l] == 1,
                })
        })
    }

    /// Plain special soundness: any index with differing challenges yields
    /// the hidden bit as the xor of the two recorded bits.
    pub fn ss_extract(&self, t1: &GniTranscript, t2: &GniTranscript) -> Result<u8, QError> {
        if !self.g(&[t1, t2]) {
            return Err(QError::Invalid("transcripts fail the consistency predicate".into()));
        }
        for l in 0..self.lambda {
            if t1.rs[l] != t2.rs[l] {
                return Ok(t1.bits[l].unwrap() ^ t2.bits[l].unwrap());
            }
        }
        Err(QError::Invalid("challenge vectors agree everywhere".into()))
    }

    /// Probabilistic variant fed by the partial recording: needs an index
    /// that is challenge 0 in the first transcript and challenge 1 in the
    /// second, since the first transcript's challenge-1 bits were dropped.
    pub fn pss_extract(&self, t1: &GniTranscript, t2: &GniTranscript) -> Result<u8, QError> {
        if !self.g_prime(&[t1, t2]) {
            return Err(QError::Invalid("transcripts fail the relaxed predicate".into()));
        }
        for l in 0..self.lambda {
            if t1.rs[l] == 0 && t2.rs[l] == 1 {
                return Ok(t1.bits[l].unwrap() ^ t2.bits[l].unwrap());
            }
        }
        Err(QError::Invalid("no (0,1) index available: abort".into()))
    }
}

/// Statistical falsification report for challenge-tuple admissibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub samples: usize,
    pub tuple_len: usize,
    pub per_position_chi2: Vec<f64>,
    pub chi2_critical: f64,
    pub marginals_pass: bool,
    pub collision_rate: f64,
    pub collision_budget: f64,
    pub collisions_pass: bool,
}

/// Marginal uniformity per tuple position (chi-square against uniform over
/// the challenge set, Bonferroni-corrected 1% level) plus the within-tuple
/// collision rate against the q_budget^2 / |R| allowance.
pub fn admissibility_check(
    samples: &[Vec<usize>],
    r_count: usize,
    q_budget: f64,
) -> Result<AdmissibilityReport, QError> {
    if samples.is_empty() || r_count < 2 {
        return Err(QError::Invalid("need samples and at least two challenges".into()));
    }
    let len = samples[0].len();
    if len == 0 || samples.iter().any(|s| s.len() != len) {
        return Err(QError::Invalid("tuples must share a nonzero length".into()));
    }
    if samples.iter().flatten().any(|&r| r >= r_count) {
        return Err(QError::Invalid("challenge outside the declared set".into()));
    }
    let n = samples.len();
    let expected = n as f64 / r_count as f64;
    let mut per_position_chi2 = Vec::with_capacity(len);
    for pos in 0..len {
        let mut counts = vec![0usize; r_count];
        for s in samples {
            counts[s[pos]] += 1;
        }
        let chi2 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum::<f64>();
        per_position_chi2.push(chi2);
    }
    let dist = ChiSquared::new((r_count - 1) as f64)
        .map_err(|e| QError::Invalid(format!("chi-square setup: {e}")))?;
    let chi2_critical = dist.inverse_cdf(1.0 - 0.01 / len as f64);
    let marginals_pass = per_position_chi2.iter().all(|&x| x <= chi2_critical);

    let per_tuple: Vec<f64> = samples
        .iter()
        .map(|s| {
            let mut pairs = 0usize;
            for i in 0..len {
                for j in (i + 1)..len {
                    if s[i] == s[j] {
                        pairs += 1;
                    }
                }
            }
            pairs as f64
        })
        .collect();
    let collision_rate = per_tuple.iter().sum::<f64>() / n as f64;
    let collision_budget = q_budget * q_budget / r_count as f64;
    let var = per_tuple.iter().map(|&x| (x - collision_rate).powi(2)).sum::<f64>()
        / n.max(2) as f64;
    let slack = 4.0 * (var / n as f64).sqrt() + 1e-9;
    let collisions_pass = collision_rate <= collision_budget + slack;

    Ok(AdmissibilityReport {
        samples: n,
        tuple_len: len,
        per_position_chi2,
        chi2_critical,
        marginals_pass,
        collision_rate,
        collision_budget,
        collisions_pass,
    })
}

/// Which function of the response gets recorded in the collapsing
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapseFn {
    Constant,
    /// The protocol's own first-transcript partial function.
    Partial,
    FullResponse,
}

/// Collapsing adversary: per-challenge response states on H (in the frame
/// the verifier reads, i.e. after the prover unitary) and per-challenge
/// guess projectors.
#[derive(Debug, Clone)]
pub struct CollapseAdversary {
    pub responses: Vec<QState>,
    pub guesses: Vec<QOperator>,
}

impl CollapseAdversary {
    /// The constructed prover itself, guessing via the projector onto its
    /// own accept-conditioned response.
    pub fn from_prover(p: &ToyProtocol) -> Result<Self, QError> {
        let mut responses = Vec::with_capacity(p.r_count);
        let mut guesses = Vec::with_capacity(p.r_count);
        for r in 0..p.r_count {
            let resp = p.initial.apply_unitary(&p.unitaries[r])?;
            let vec = resp.vector().ok_or(QError::ZeroBranch)?;
            let mut acc = CVec::zeros(p.h_space.dim());
            for z in p.accepting_set(r) {
                acc[z] = vec[z];
            }
            let guess = if acc.norm() > 1e-12 {
                QOperator::projector_onto_span(p.h_space.clone(), &[acc])?
            } else {
                QOperator::projector(p.h_space.clone(), CMat::zeros(p.h_space.dim(), p.h_space.dim()))?
            };
            responses.push(resp);
            guesses.push(guess);
        }
        Ok(CollapseAdversary { responses, guesses })
    }
}

fn collapse_value(p: &ToyProtocol, f: CollapseFn, r: usize, z: usize) -> Vec<u8> {
    match f {
        CollapseFn::Constant => vec![],
        CollapseFn::Partial => p.partial_fn(0, r, z),
        CollapseFn::FullResponse => vec![(z & 0xff) as u8, (z >> 8) as u8],
    }
}

/// Distinguishing advantage between the accept-conditioned response and the
/// same state dephased in the recorded value of f, computed exactly from the
/// density matrices (challenge uniform; abort branches cancel).
pub fn collapsing_experiment(
    p: &ToyProtocol,
    f: CollapseFn,
    adv: &CollapseAdversary,
) -> Result<f64, QError> {
    if adv.responses.len() != p.r_count || adv.guesses.len() != p.r_count {
        return Err(QError::Invalid("adversary must cover every challenge".into()));
    }
    let dh = p.h_space.dim();
    let mut advantage = 0.0;
    for r in 0..p.r_count {
        let rho = adv.responses[r].density();
        let mut acc = CMat::zeros(dh, dh);
        for z in p.accepting_set(r) {
            acc[(z, z)] = cplx(1.0, 0.0);
        }
        let projected = &acc * &rho * &acc;
        let p_acc = projected.trace().re;
        if p_acc < 1e-12 {
            continue;
        }
        let rho0 = projected * cplx(1.0 / p_acc, 0.0);
        let mut rho1 = CMat::zeros(dh, dh);
        let mut sectors: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for z in p.accepting_set(r) {
            sectors.entry(collapse_value(p, f, r, z)).or_default().push(z);
        }
        for zs in sectors.values() {
            let mut sector = CMat::zeros(dh, dh);
            for &z in zs {
                sector[(z, z)] = cplx(1.0, 0.0);
            }
            rho1 += &sector * &rho0 * &sector;
        }
        let g = adv.guesses[r].mat();
        let diff = (g * (&rho0 - &rho1)).trace().re;
        advantage += diff * p_acc / p.r_count as f64;
    }
    Ok(advantage.abs())
}
