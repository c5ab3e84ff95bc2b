//! Shortened binary BCH codes: generator construction, systematic encoding,
//! and hard-decision decoding (syndromes, Berlekamp–Massey, Chien search).
//!
//! Bit vectors are `&[u8]` holding 0/1 values, most-significant bit first:
//! index `b` of an `n`-bit codeword is the coefficient of `x^(n-1-b)`.
//! Positions `n..parent_n` of the parent cyclic code are the shortened ones
//! and are implicitly zero.

use std::collections::BTreeSet;

use super::gf::{GaloisField, DEFAULT_POLY_M11, DEFAULT_POLY_M12};
use super::FecError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Ok,
    DecodeFailure,
}

/// Result of a hard-decision decode. On failure `message` holds the
/// systematic bits exactly as received.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub message: Vec<u8>,
    pub corrected_count: usize,
    pub status: DecodeStatus,
}

impl DecodeOutcome {
    pub fn is_ok(&self) -> bool {
        self.status == DecodeStatus::Ok
    }
}

/// A binary BCH code, possibly shortened from length `2^m - 1`.
#[derive(Clone, Debug)]
pub struct BchCode {
    field: GaloisField,
    n: usize,
    k: usize,
    t: usize,
    /// Generator coefficients, index = power of x.
    generator: Vec<u8>,
    /// g(x) minus its leading term, packed for the encoder's shift register.
    feedback: Vec<u64>,
}

/// LCM of the minimal polynomials of α, α^3, …, α^(2t-1), coefficients
/// indexed by power.
pub fn bch_generator_poly(field: &GaloisField, t: usize) -> Vec<u8> {
    let order = field.order();
    let mut roots = BTreeSet::new();
    for j in (1..2 * t).step_by(2) {
        // Cyclotomic coset of j: {j, 2j, 4j, ...} mod 2^m - 1.
        let mut e = j % order;
        loop {
            if !roots.insert(e) {
                break;
            }
            e = (e * 2) % order;
        }
    }
    // Multiply out ∏ (x + α^e) over GF(2^m).
    let mut poly: Vec<u32> = vec![1];
    for &e in &roots {
        let root = field.alpha_pow(e as i64);
        let mut next = vec![0u32; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i + 1] ^= c;
            next[i] ^= field.mul(c, root);
        }
        poly = next;
    }
    poly.into_iter()
        .map(|c| {
            debug_assert!(c <= 1, "minimal polynomial product left GF(2)");
            c as u8
        })
        .collect()
}

impl BchCode {
    /// Builds an (n, k) code correcting `t` errors over `field`. The
    /// generator degree must equal `n - k`.
    pub fn new(field: GaloisField, n: usize, k: usize, t: usize) -> Result<Self, FecError> {
        let parent_n = field.order();
        if t == 0 || n > parent_n || k == 0 || k >= n {
            return Err(FecError::CodeParameters { n, k, t, parent_n });
        }
        let generator = bch_generator_poly(&field, t);
        let degree = generator.len() - 1;
        if degree != n - k {
            return Err(FecError::GeneratorDegree { n, k, degree });
        }
        let words = degree.div_ceil(64);
        let mut feedback = vec![0u64; words];
        for (i, &c) in generator[..degree].iter().enumerate() {
            if c == 1 {
                feedback[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(Self { field, n, k, t, generator, feedback })
    }

    /// BCH(2040, 1930), t = 10, shortened from the length-2047 code over GF(2^11).
    pub fn inner_default() -> Self {
        let field = GaloisField::new(11, DEFAULT_POLY_M11).expect("default m=11 poly is primitive");
        Self::new(field, 2040, 1930, 10).expect("BCH(2040,1930) parameters are consistent")
    }

    /// BCH(3860, 3824), t = 3, shortened from the length-4095 code over GF(2^12).
    pub fn outer_default() -> Self {
        let field = GaloisField::new(12, DEFAULT_POLY_M12).expect("default m=12 poly is primitive");
        Self::new(field, 3860, 3824, 3).expect("BCH(3860,3824) parameters are consistent")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn t(&self) -> usize {
        self.t
    }
    pub fn parity_bits(&self) -> usize {
        self.n - self.k
    }
    pub fn parent_n(&self) -> usize {
        self.field.order()
    }
    pub fn shortening(&self) -> usize {
        self.parent_n() - self.n
    }
    pub fn field(&self) -> &GaloisField {
        &self.field
    }
    pub fn generator(&self) -> &[u8] {
        &self.generator
    }
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Systematic encoding: message followed by the remainder of
    /// m(x)·x^(n-k) mod g(x).
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, FecError> {
        if message.len() != self.k {
            return Err(FecError::Length { expected: self.k, got: message.len() });
        }
        let r = self.parity_bits();
        let words = self.feedback.len();
        let top_word = (r - 1) / 64;
        let top_bit = (r - 1) % 64;
        let top_mask = if r % 64 == 0 { u64::MAX } else { (1u64 << (r % 64)) - 1 };
        let mut reg = vec![0u64; words];
        for &bit in message {
            let fb = (bit & 1) as u64 ^ ((reg[top_word] >> top_bit) & 1);
            for w in (1..words).rev() {
                reg[w] = (reg[w] << 1) | (reg[w - 1] >> 63);
            }
            reg[0] <<= 1;
            reg[words - 1] &= top_mask;
            if fb == 1 {
                for (rw, fw) in reg.iter_mut().zip(&self.feedback) {
                    *rw ^= fw;
                }
            }
        }
        let mut out = Vec::with_capacity(self.n);
        out.extend(message.iter().map(|b| b & 1));
        for j in (0..r).rev() {
            out.push(((reg[j / 64] >> (j % 64)) & 1) as u8);
        }
        Ok(out)
    }

    /// Syndromes S_1..S_2t of a received word.
    pub fn syndromes(&self, received: &[u8]) -> Vec<u32> {
        let two_t = 2 * self.t;
        let order = self.field.order();
        let mut s = vec![0u32; two_t + 1];
        for (b, &bit) in received.iter().enumerate() {
            if bit & 1 == 0 {
                continue;
            }
            let p = self.n - 1 - b;
            for j in (1..=two_t).step_by(2) {
                s[j] ^= self.field.alpha_pow(((j * p) % order) as i64);
            }
        }
        // Binary code: S_2j = S_j^2.
        for j in (2..=two_t).step_by(2) {
            s[j] = self.field.mul(s[j / 2], s[j / 2]);
        }
        s.remove(0);
        s
    }

    /// Berlekamp–Massey: shortest LFSR (error locator Λ, Λ_0 = 1) generating
    /// the syndrome sequence.
    fn error_locator(&self, syn: &[u32]) -> (Vec<u32>, usize) {
        let gf = &self.field;
        let mut lambda = vec![1u32];
        let mut prev = vec![1u32];
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut prev_disc = 1u32;
        for r in 0..syn.len() {
            let mut d = syn[r];
            for i in 1..=l.min(lambda.len() - 1) {
                d ^= gf.mul(lambda[i], syn[r - i]);
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = gf.div(d, prev_disc).expect("previous discrepancy is nonzero");
            let mut next = lambda.clone();
            if next.len() < prev.len() + shift {
                next.resize(prev.len() + shift, 0);
            }
            for (i, &p) in prev.iter().enumerate() {
                next[i + shift] ^= gf.mul(coef, p);
            }
            if 2 * l <= r {
                prev = lambda;
                l = r + 1 - l;
                prev_disc = d;
                shift = 1;
            } else {
                shift += 1;
            }
            lambda = next;
        }
        while lambda.len() > 1 && *lambda.last().unwrap() == 0 {
            lambda.pop();
        }
        (lambda, l)
    }

    /// Hard-decision decode of an `n`-bit word.
    pub fn decode(&self, received: &[u8]) -> Result<DecodeOutcome, FecError> {
        if received.len() != self.n {
            return Err(FecError::Length { expected: self.n, got: received.len() });
        }
        let syn = self.syndromes(received);
        let passthrough = |status| DecodeOutcome {
            message: received[..self.k].iter().map(|b| b & 1).collect(),
            corrected_count: 0,
            status,
        };
        if syn.iter().all(|&s| s == 0) {
            return Ok(passthrough(DecodeStatus::Ok));
        }
        let (lambda, lfsr_len) = self.error_locator(&syn);
        let degree = lambda.len() - 1;
        if degree == 0 || degree > self.t || degree != lfsr_len {
            return Ok(passthrough(DecodeStatus::DecodeFailure));
        }
        // Chien search over transmitted positions only; a root that lands in
        // the shortened region leaves fewer than `degree` roots here.
        let gf = &self.field;
        let order = gf.order() as i64;
        let logs: Vec<Option<u32>> = lambda.iter().map(|&c| gf.log(c)).collect();
        let mut positions = Vec::with_capacity(degree);
        for p in 0..self.n as i64 {
            let mut acc = 0u32;
            for (i, lg) in logs.iter().enumerate() {
                if let Some(lg) = lg {
                    acc ^= gf.alpha_pow((*lg as i64 - i as i64 * p).rem_euclid(order));
                }
            }
            if acc == 0 {
                positions.push(p as usize);
                if positions.len() > degree {
                    break;
                }
            }
        }
        if positions.len() != degree {
            return Ok(passthrough(DecodeStatus::DecodeFailure));
        }
        let mut word: Vec<u8> = received.iter().map(|b| b & 1).collect();
        for p in positions {
            word[self.n - 1 - p] ^= 1;
        }
        word.truncate(self.k);
        Ok(DecodeOutcome { message: word, corrected_count: degree, status: DecodeStatus::Ok })
    }
}
