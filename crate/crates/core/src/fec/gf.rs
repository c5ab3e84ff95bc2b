//! Table-driven arithmetic in GF(2^m).
//!
//! Elements are stored as `u32` bit patterns in the polynomial basis, with
//! bit `i` holding the coefficient of `α^i`. Multiplication and inversion go
//! through log/antilog tables built once per field.

use super::FecError;

/// x^11 + x^2 + 1
pub const DEFAULT_POLY_M11: u32 = 0x805;
/// x^12 + x^6 + x^4 + x + 1
pub const DEFAULT_POLY_M12: u32 = 0x1053;
/// x^4 + x + 1
pub const DEFAULT_POLY_M4: u32 = 0x13;

/// Returns a standard primitive polynomial for small and code-relevant degrees.
pub fn default_primitive_poly(m: u32) -> Option<u32> {
    Some(match m {
        2 => 0x7,
        3 => 0xB,
        4 => DEFAULT_POLY_M4,
        5 => 0x25,
        6 => 0x43,
        7 => 0x89,
        8 => 0x11D,
        9 => 0x211,
        10 => 0x409,
        11 => DEFAULT_POLY_M11,
        12 => DEFAULT_POLY_M12,
        13 => 0x201B,
        14 => 0x4443,
        15 => 0x8003,
        16 => 0x1100B,
        _ => return None,
    })
}

/// GF(2^m) with precomputed exponent and logarithm tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaloisField {
    m: u32,
    primitive_poly: u32,
    order: usize,
    // exp has 2 * order entries so products of two logs index directly.
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl GaloisField {
    /// Builds the field, rejecting polynomials whose powers of α do not cycle
    /// through every nonzero element.
    pub fn new(m: u32, primitive_poly: u32) -> Result<Self, FecError> {
        if !(2..=16).contains(&m) {
            return Err(FecError::FieldDegree(m));
        }
        if primitive_poly >> m != 1 {
            return Err(FecError::NotPrimitive { m, poly: primitive_poly });
        }
        let order = (1usize << m) - 1;
        let mut exp = vec![0u32; 2 * order];
        let mut log = vec![0u32; order + 1];
        let mut seen = vec![false; order + 1];
        let mut x: u32 = 1;
        for i in 0..order {
            if seen[x as usize] {
                // α^i repeats before 2^m - 1 steps: the cycle is too short.
                return Err(FecError::NotPrimitive { m, poly: primitive_poly });
            }
            seen[x as usize] = true;
            exp[i] = x;
            log[x as usize] = i as u32;
            x <<= 1;
            if x >> m != 0 {
                x ^= primitive_poly;
            }
        }
        if x != 1 {
            return Err(FecError::NotPrimitive { m, poly: primitive_poly });
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { m, primitive_poly, order, exp, log })
    }

    pub fn with_default_poly(m: u32) -> Result<Self, FecError> {
        let poly = default_primitive_poly(m).ok_or(FecError::FieldDegree(m))?;
        Self::new(m, poly)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn primitive_poly(&self) -> u32 {
        self.primitive_poly
    }

    /// Multiplicative group order, 2^m - 1.
    pub fn order(&self) -> usize {
        self.order
    }

    /// α^e for any (possibly negative) exponent.
    pub fn alpha_pow(&self, e: i64) -> u32 {
        let r = e.rem_euclid(self.order as i64) as usize;
        self.exp[r]
    }

    /// Discrete log of a nonzero element.
    pub fn log(&self, a: u32) -> Option<u32> {
        if a == 0 {
            None
        } else {
            Some(self.log[a as usize])
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let l = self.log[a as usize] as usize;
        Some(self.exp[(self.order - l) % self.order])
    }

    pub fn div(&self, a: u32, b: u32) -> Option<u32> {
        Some(self.mul(a, self.inv(b)?))
    }

    /// a^e with the convention 0^0 = 1.
    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let l = self.log[a as usize] as u64;
        self.exp[((l * e) % self.order as u64) as usize]
    }

    /// Length of the cycle generated by α, walked element by element.
    pub fn cycle_length(&self) -> usize {
        let mut x = self.exp[1];
        let mut n = 1;
        while x != 1 {
            x = self.mul(x, self.exp[1]);
            n += 1;
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf16_alpha5_is_alpha2_plus_alpha() {
        let gf = GaloisField::new(4, DEFAULT_POLY_M4).unwrap();
        // α^4 = α + 1, so α^5 = α^2 + α.
        assert_eq!(gf.alpha_pow(5), 0b0110);
        assert_eq!(gf.alpha_pow(4), 0b0011);
        assert_eq!(gf.alpha_pow(15), 1);
    }

    #[test]
    fn reducible_polynomial_rejected() {
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2
        assert!(matches!(GaloisField::new(4, 0x15), Err(FecError::NotPrimitive { .. })));
        // irreducible but not primitive: x^4 + x^3 + x^2 + x + 1 has order 5
        assert!(GaloisField::new(4, 0x1F).is_err());
    }

    #[test]
    fn m11_and_m12_cycles_are_full() {
        let gf11 = GaloisField::new(11, DEFAULT_POLY_M11).unwrap();
        assert_eq!(gf11.cycle_length(), 2047);
        let gf12 = GaloisField::new(12, DEFAULT_POLY_M12).unwrap();
        assert_eq!(gf12.cycle_length(), 4095);
    }

    #[test]
    fn degree_out_of_range() {
        assert!(matches!(GaloisField::new(1, 0x3), Err(FecError::FieldDegree(1))));
        assert!(matches!(GaloisField::new(17, 0x20009), Err(FecError::FieldDegree(17))));
    }

    #[test]
    fn inverse_and_division() {
        let gf = GaloisField::new(8, 0x11D).unwrap();
        for a in 1..=255u32 {
            let ia = gf.inv(a).unwrap();
            assert_eq!(gf.mul(a, ia), 1);
            assert_eq!(gf.div(a, a), Some(1));
        }
        assert_eq!(gf.inv(0), None);
    }

    #[test]
    fn every_default_poly_is_primitive() {
        for m in 2..=16 {
            let gf = GaloisField::with_default_poly(m).unwrap();
            assert_eq!(gf.cycle_length(), (1 << m) - 1, "m = {m}");
        }
    }
}
