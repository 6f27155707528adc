//! Binary fields GF(2^m) for m up to 6, big enough to index 64 challenge
//! positions while keeping response registers small.

use crate::qstate::QError;

/// Irreducible polynomials (bit k = coefficient of x^k), indexed by m - 1.
const REDUCERS: [u32; 6] = [0b11, 0b111, 0b1011, 0b10011, 0b100101, 0b1000011];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gf {
    m: u32,
    poly: u32,
}

impl Gf {
    pub fn new(m: u32) -> Result<Self, QError> {
        if !(1..=6).contains(&m) {
            return Err(QError::Invalid(format!("field exponent {m} outside 1..=6")));
        }
        Ok(Gf { m, poly: REDUCERS[m as usize - 1] })
    }

    pub fn order(&self) -> usize {
        1 << self.m
    }

    pub fn exponent(&self) -> u32 {
        self.m
    }

    fn check(&self, a: u8) -> u32 {
        debug_assert!((a as usize) < self.order());
        a as u32
    }

    pub fn add(&self, a: u8, b: u8) -> u8 {
        (self.check(a) ^ self.check(b)) as u8
    }

    pub fn mul(&self, a: u8, b: u8) -> u8 {
        let mut a = self.check(a);
        let mut b = self.check(b);
        let mut acc = 0u32;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a >> self.m != 0 {
                a ^= self.poly;
            }
        }
        acc as u8
    }

    pub fn inv(&self, a: u8) -> Result<u8, QError> {
        if a == 0 {
            return Err(QError::Invalid("zero has no inverse".into()));
        }
        // a^(2^m - 2) by square and multiply.
        let mut acc = 1u8;
        let mut base = a;
        let mut e = (self.order() - 2) as u32;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        Ok(acc)
    }

    /// Value of the line w + u*x at x.
    pub fn eval_line(&self, w: u8, u: u8, x: u8) -> u8 {
        self.add(w, self.mul(u, x))
    }

    /// The unique line through two points with distinct x coordinates.
    pub fn interpolate_line(&self, p1: (u8, u8), p2: (u8, u8)) -> Result<(u8, u8), QError> {
        let (x1, y1) = p1;
        let (x2, y2) = p2;
        if x1 == x2 {
            return Err(QError::Invalid("line interpolation needs distinct points".into()));
        }
        let u = self.mul(self.add(y1, y2), self.inv(self.add(x1, x2))?);
        let w = self.add(y1, self.mul(u, x1));
        Ok((w, u))
    }
}
