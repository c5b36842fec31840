//! Arithmetic in GF(2^8).
//!
//! Elements are bytes interpreted as polynomials over GF(2) reduced modulo
//! `x^8 + x^4 + x^3 + x^2 + 1` (0x11D). Multiplication goes through exp/log
//! tables generated from the primitive element `x` (0x02).
//!
//! The slice kernels at the bottom operate lane-wise on cells: every byte
//! position of a block is an independent field symbol.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub, SubAssign};

use crate::error::Error;

/// Field polynomial, including the x^8 term.
pub const FIELD_POLY: u16 = 0x11D;

/// Number of elements in the field.
pub const FIELD_SIZE: usize = 256;

const ORDER: usize = FIELD_SIZE - 1;

struct Tables {
    // exp is doubled so `exp[log a + log b]` never needs a modulo
    exp: [u8; 2 * ORDER],
    log: [u8; FIELD_SIZE],
}

const fn build_tables() -> Tables {
    let mut exp = [0u8; 2 * ORDER];
    let mut log = [0u8; FIELD_SIZE];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < ORDER {
        exp[i] = x as u8;
        exp[i + ORDER] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= FIELD_POLY;
        }
        i += 1;
    }
    Tables { exp, log }
}

static TABLES: Tables = build_tables();

/// A GF(2^8) element.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    /// `x^power` for the generator `x = 0x02`.
    pub fn exp(power: usize) -> Gf256 {
        Gf256(TABLES.exp[power % ORDER])
    }

    /// Discrete log base 0x02. `None` for zero.
    pub fn log(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(TABLES.log[self.0 as usize] as usize)
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn inv(self) -> Result<Gf256, Error> {
        inv(self)
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256(0x{:02x})", self.0)
    }
}

impl fmt::Display for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:02x}", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl From<Gf256> for u8 {
    fn from(v: Gf256) -> Self {
        v.0
    }
}

pub fn add(a: Gf256, b: Gf256) -> Gf256 {
    Gf256(a.0 ^ b.0)
}

pub fn mul(a: Gf256, b: Gf256) -> Gf256 {
    if a.0 == 0 || b.0 == 0 {
        return Gf256::ZERO;
    }
    let la = TABLES.log[a.0 as usize] as usize;
    let lb = TABLES.log[b.0 as usize] as usize;
    Gf256(TABLES.exp[la + lb])
}

/// Multiplicative inverse; zero has none.
pub fn inv(a: Gf256) -> Result<Gf256, Error> {
    if a.0 == 0 {
        return Err(Error::NoInverse);
    }
    let la = TABLES.log[a.0 as usize] as usize;
    Ok(Gf256(TABLES.exp[(ORDER - la) % ORDER]))
}

impl Add for Gf256 {
    type Output = Gf256;
    fn add(self, rhs: Gf256) -> Gf256 {
        add(self, rhs)
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        *self = add(*self, rhs);
    }
}

impl Sub for Gf256 {
    type Output = Gf256;
    fn sub(self, rhs: Gf256) -> Gf256 {
        add(self, rhs)
    }
}

impl SubAssign for Gf256 {
    fn sub_assign(&mut self, rhs: Gf256) {
        *self = add(*self, rhs);
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = mul(*self, rhs);
    }
}

impl Div for Gf256 {
    type Output = Gf256;

    /// Panics on division by zero.
    fn div(self, rhs: Gf256) -> Gf256 {
        mul(self, inv(rhs).expect("division by zero in GF(256)"))
    }
}

/// `dst[n] ^= src[n]` for every lane.
pub fn xor_into(dst: &mut [u8], src: &[u8]) {
    assert_eq!(dst.len(), src.len(), "block length mismatch");
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

/// `dst[n] ^= coef * src[n]` for every lane.
pub fn mul_acc(dst: &mut [u8], src: &[u8], coef: Gf256) {
    assert_eq!(dst.len(), src.len(), "block length mismatch");
    match coef.0 {
        0 => {}
        1 => xor_into(dst, src),
        c => {
            let lc = TABLES.log[c as usize] as usize;
            for (d, &s) in dst.iter_mut().zip(src) {
                if s != 0 {
                    *d ^= TABLES.exp[lc + TABLES.log[s as usize] as usize];
                }
            }
        }
    }
}

/// `block[n] = coef * block[n]` for every lane.
pub fn scale(block: &mut [u8], coef: Gf256) {
    match coef.0 {
        0 => block.fill(0),
        1 => {}
        c => {
            let lc = TABLES.log[c as usize] as usize;
            for b in block.iter_mut() {
                if *b != 0 {
                    *b = TABLES.exp[lc + TABLES.log[*b as usize] as usize];
                }
            }
        }
    }
}
