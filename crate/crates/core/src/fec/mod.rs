//! Binary BCH codes over GF(2^m) and the concatenated frame codec.

pub mod bch;
pub mod concat;
pub mod gf;
pub mod interleave;

pub use bch::{bch_generator_poly, BchCode, DecodeOutcome, DecodeStatus};
pub use concat::{ConcatCodec, FecScheme, FrameOutcome};
pub use gf::GaloisField;
pub use interleave::BlockInterleaver;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum FecError {
    #[error("field degree {0} outside 2..=16")]
    FieldDegree(u32),
    #[error("polynomial {poly:#x} is not primitive of degree {m}")]
    NotPrimitive { m: u32, poly: u32 },
    #[error("invalid code parameters n={n} k={k} t={t} (parent length {parent_n})")]
    CodeParameters { n: usize, k: usize, t: usize, parent_n: usize },
    #[error("generator degree {degree} does not match n-k for ({n}, {k})")]
    GeneratorDegree { n: usize, k: usize, degree: usize },
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
    #[error("framing: {0}")]
    Framing(String),
}
