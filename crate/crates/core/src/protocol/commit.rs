//! Toy bit/message commitments with exhaustively checkable binding, plus the
//! five-step unique-message binding experiment.
//!
//! Commitments here are stand-ins: the commit map is the identity on the
//! message and the opening is a single bit the receiver may or may not
//! consult. That is enough to exercise binding experiments exactly.

use crate::qstate::{cplx, CMat, CVec, OperatorKind, QError, QOperator, QState, RegisterSpace};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyCommitment {
    /// com = m; every opening bit verifies. Injective, hence perfectly binding.
    PerfectlyBinding { messages: usize },
    /// com = m verifies with opening 0, and com also opens to m + 1 (mod
    /// messages) with opening 1. Deliberately non-binding control.
    TwoMessage { messages: usize },
}

impl ToyCommitment {
    pub fn messages(&self) -> usize {
        match *self {
            ToyCommitment::PerfectlyBinding { messages } => messages,
            ToyCommitment::TwoMessage { messages } => messages,
        }
    }

    pub fn commit(&self, m: usize) -> usize {
        debug_assert!(m < self.messages());
        m
    }

    /// Opening bits live in {0, 1} regardless of scheme.
    pub fn opening_dim(&self) -> usize {
        2
    }

    pub fn verify(&self, com: usize, m: usize, omega: usize) -> bool {
        let q = self.messages();
        if com >= q || m >= q || omega >= 2 {
            return false;
        }
        match *self {
            ToyCommitment::PerfectlyBinding { .. } => m == com,
            ToyCommitment::TwoMessage { .. } => {
                (m == com && omega == 0) || (m == (com + 1) % q && omega == 1)
            }
        }
    }

    /// Exhaustive check: no commitment string opens to two distinct messages.
    pub fn is_perfectly_binding(&self) -> bool {
        let q = self.messages();
        (0..q).all(|com| {
            let openable = (0..q)
                .filter(|&m| (0..2).any(|omega| self.verify(com, m, omega)))
                .count();
            openable <= 1
        })
    }

    /// Projector on the opening register selecting openings valid for (com, m).
    pub fn opening_projector(
        &self,
        space: &RegisterSpace,
        label: &str,
        com: usize,
        m: usize,
    ) -> Result<QOperator, QError> {
        let mut small = CMat::zeros(2, 2);
        for omega in 0..2 {
            if self.verify(com, m, omega) {
                small[(omega, omega)] = cplx(1.0, 0.0);
            }
        }
        QOperator::embedded(space.clone(), &[label], &small, OperatorKind::Projector)
    }
}

/// Two-phase adversary for the unique-message binding experiment. The opening
/// register is whichever register of `state` is named `w`; any other
/// registers ride along as side information.
#[derive(Debug, Clone)]
pub struct UniqAdversary {
    pub com: usize,
    pub m1: usize,
    pub m2: usize,
    pub state: QState,
    /// Optional unitary applied between the two opening checks.
    pub u2: Option<QOperator>,
}

impl UniqAdversary {
    /// Opens m1 = m2 = com honestly; always aborts at the distinctness check.
    pub fn honest_repeat(scheme: &ToyCommitment) -> Result<Self, QError> {
        let space = RegisterSpace::single("w", scheme.opening_dim())?;
        Ok(UniqAdversary {
            com: scheme.commit(0),
            m1: 0,
            m2: 0,
            state: QState::basis(space, &[0])?,
            u2: None,
        })
    }

    /// Tries m2 = m1 + 1 with no way to re-key the opening register.
    pub fn naive_switch(scheme: &ToyCommitment) -> Result<Self, QError> {
        let space = RegisterSpace::single("w", scheme.opening_dim())?;
        Ok(UniqAdversary {
            com: scheme.commit(0),
            m1: 0,
            m2: 1 % scheme.messages(),
            state: QState::basis(space, &[0])?,
            u2: None,
        })
    }

    /// Against TwoMessage: hold sqrt(weight0) |omega=0> + sqrt(1-weight0) |1>,
    /// then swap the opening bit before the second check. Wins with
    /// probability weight0 exactly.
    pub fn two_message_attack(scheme: &ToyCommitment, weight0: f64) -> Result<Self, QError> {
        let space = RegisterSpace::single("w", scheme.opening_dim())?;
        let v = CVec::from_vec(vec![cplx(weight0.sqrt(), 0.0), cplx((1.0 - weight0).sqrt(), 0.0)]);
        let mut swap = CMat::zeros(2, 2);
        swap[(0, 1)] = cplx(1.0, 0.0);
        swap[(1, 0)] = cplx(1.0, 0.0);
        Ok(UniqAdversary {
            com: scheme.commit(0),
            m1: 0,
            m2: 1 % scheme.messages(),
            state: QState::pure(space.clone(), v)?,
            u2: Some(QOperator::unitary(space, swap)?),
        })
    }
}

/// Five-step unique-message binding experiment. Steps: (1) adversary hands
/// over com, m1, and an opening-register state; (2) the challenger checks the
/// opening verifies for m1, aborting on failure; (3) the adversary applies
/// its second-phase unitary and names m2; (4) abort unless m2 differs from
/// m1; (5) the challenger checks the residual opening verifies for m2. The
/// experiment outputs 1 iff step 5 accepts.
pub fn uniq_binding_experiment(
    scheme: &ToyCommitment,
    adversary: &UniqAdversary,
    rng: &mut impl Rng,
    trials: usize,
) -> Result<f64, QError> {
    let space = adversary.state.space();
    let check1 = scheme.opening_projector(space, "w", adversary.com, adversary.m1)?;
    let check2 = scheme.opening_projector(space, "w", adversary.com, adversary.m2)?;
    let mut wins = 0usize;
    for _ in 0..trials {
        let first = adversary.state.binary_measure(&check1, rng)?;
        if !first.outcome {
            continue;
        }
        let mut state = first.state;
        if let Some(u) = &adversary.u2 {
            state = state.apply_unitary(u)?;
        }
        if adversary.m2 == adversary.m1 {
            continue;
        }
        if state.binary_measure(&check2, rng)?.outcome {
            wins += 1;
        }
    }
    Ok(wins as f64 / trials as f64)
}
