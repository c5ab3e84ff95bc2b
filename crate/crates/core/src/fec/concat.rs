//! Concatenated outer/inner BCH framing.
//!
//! Encoding path for one frame:
//!
//! 1. split the payload into outer messages and encode each with the outer code;
//! 2. block-interleave the serialized outer codewords (`interleaver_depth` rows);
//! 3. chop into inner messages, zero-padding the tail, and inner-encode each;
//! 4. optionally interleave the inner codewords bit by bit onto the line, so a
//!    burst on the channel lands on every inner codeword in turn.
//!
//! Decoding runs the same steps backwards. Stage 2 spreads the output of a
//! miscorrecting inner word over several outer words; stage 4 is what lets
//! short channel bursts be corrected by the inner code.

use super::bch::{BchCode, DecodeStatus};
use super::interleave::BlockInterleaver;
use super::FecError;

#[derive(Clone, Debug)]
pub struct ConcatCodec {
    outer: BchCode,
    inner: BchCode,
    interleaver: BlockInterleaver,
    outer_words: usize,
    line_interleave: bool,
}

/// Outcome of decoding one concatenated frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameOutcome {
    pub payload: Vec<u8>,
    /// Bit corrections applied by both stages together.
    pub corrected_count: usize,
    pub status: DecodeStatus,
    pub inner_failures: usize,
    pub outer_failures: usize,
}

impl ConcatCodec {
    pub fn new(
        outer: BchCode,
        inner: BchCode,
        interleaver_depth: usize,
        outer_words: usize,
        line_interleave: bool,
    ) -> Result<Self, FecError> {
        if outer_words == 0 {
            return Err(FecError::Framing("at least one outer word per frame".into()));
        }
        if interleaver_depth == 0 {
            return Err(FecError::Framing("interleaver depth must be at least 1".into()));
        }
        Ok(Self {
            outer,
            inner,
            interleaver: BlockInterleaver::new(interleaver_depth),
            outer_words,
            line_interleave,
        })
    }

    /// Outer BCH(3860, 3824), inner BCH(2040, 1930), depth 8, four outer words
    /// per frame (15296 payload bits, exactly eight inner words).
    pub fn standard() -> Self {
        Self::new(BchCode::outer_default(), BchCode::inner_default(), 8, 4, true)
            .expect("standard framing is valid")
    }

    pub fn outer(&self) -> &BchCode {
        &self.outer
    }
    pub fn inner(&self) -> &BchCode {
        &self.inner
    }
    pub fn interleaver_depth(&self) -> usize {
        self.interleaver.rows()
    }
    pub fn outer_words(&self) -> usize {
        self.outer_words
    }
    pub fn line_interleave(&self) -> bool {
        self.line_interleave
    }

    pub fn frame_payload_bits(&self) -> usize {
        self.outer_words * self.outer.k()
    }

    fn outer_stream_bits(&self) -> usize {
        self.outer_words * self.outer.n()
    }

    pub fn inner_words(&self) -> usize {
        self.outer_stream_bits().div_ceil(self.inner.k())
    }

    pub fn padding_bits(&self) -> usize {
        self.inner_words() * self.inner.k() - self.outer_stream_bits()
    }

    pub fn frame_bits(&self) -> usize {
        self.inner_words() * self.inner.n()
    }

    /// Product of the component code rates.
    pub fn code_rate(&self) -> f64 {
        self.outer.rate() * self.inner.rate()
    }

    /// Payload bits over line bits, including tail padding.
    pub fn frame_rate(&self) -> f64 {
        self.frame_payload_bits() as f64 / self.frame_bits() as f64
    }

    fn line_interleaver(&self) -> BlockInterleaver {
        BlockInterleaver::new(if self.line_interleave { self.inner_words() } else { 1 })
    }

    pub fn encode(&self, payload: &[u8]) -> Result<Vec<u8>, FecError> {
        if payload.len() != self.frame_payload_bits() {
            return Err(FecError::Length { expected: self.frame_payload_bits(), got: payload.len() });
        }
        let mut stream = Vec::with_capacity(self.inner_words() * self.inner.k());
        for chunk in payload.chunks(self.outer.k()) {
            stream.extend(self.outer.encode(chunk)?);
        }
        let mut stream = self.interleaver.interleave(&stream);
        stream.resize(self.inner_words() * self.inner.k(), 0);
        let mut words = Vec::with_capacity(self.frame_bits());
        for chunk in stream.chunks(self.inner.k()) {
            words.extend(self.inner.encode(chunk)?);
        }
        Ok(self.line_interleaver().interleave(&words))
    }

    pub fn decode(&self, frame: &[u8]) -> Result<FrameOutcome, FecError> {
        if frame.len() != self.frame_bits() {
            return Err(FecError::Length { expected: self.frame_bits(), got: frame.len() });
        }
        let words = self.line_interleaver().deinterleave(frame);
        let mut corrected = 0;
        let mut inner_failures = 0;
        let mut stream = Vec::with_capacity(self.inner_words() * self.inner.k());
        for word in words.chunks(self.inner.n()) {
            let out = self.inner.decode(word)?;
            corrected += out.corrected_count;
            if !out.is_ok() {
                inner_failures += 1;
            }
            stream.extend(out.message);
        }
        stream.truncate(self.outer_stream_bits());
        let stream = self.interleaver.deinterleave(&stream);
        let mut outer_failures = 0;
        let mut payload = Vec::with_capacity(self.frame_payload_bits());
        for word in stream.chunks(self.outer.n()) {
            let out = self.outer.decode(word)?;
            corrected += out.corrected_count;
            if !out.is_ok() {
                outer_failures += 1;
            }
            payload.extend(out.message);
        }
        // An inner failure repaired downstream still leaves a clean payload;
        // only an outer failure means the frame could not be recovered.
        let status = if outer_failures == 0 { DecodeStatus::Ok } else { DecodeStatus::DecodeFailure };
        Ok(FrameOutcome { payload, corrected_count: corrected, status, inner_failures, outer_failures })
    }
}

/// Forward error correction applied to each line frame.
#[derive(Clone, Debug)]
pub enum FecScheme {
    /// No coding: frames of `block_bits` payload bits go straight to the line.
    Uncoded { block_bits: usize },
    Concatenated(ConcatCodec),
}

impl FecScheme {
    pub fn code_rate(&self) -> f64 {
        match self {
            FecScheme::Uncoded { .. } => 1.0,
            FecScheme::Concatenated(c) => c.code_rate(),
        }
    }

    pub fn frame_rate(&self) -> f64 {
        match self {
            FecScheme::Uncoded { .. } => 1.0,
            FecScheme::Concatenated(c) => c.frame_rate(),
        }
    }

    pub fn frame_payload_bits(&self) -> usize {
        match self {
            FecScheme::Uncoded { block_bits } => *block_bits,
            FecScheme::Concatenated(c) => c.frame_payload_bits(),
        }
    }

    pub fn frame_bits(&self) -> usize {
        match self {
            FecScheme::Uncoded { block_bits } => *block_bits,
            FecScheme::Concatenated(c) => c.frame_bits(),
        }
    }

    pub fn encode(&self, payload: &[u8]) -> Result<Vec<u8>, FecError> {
        match self {
            FecScheme::Uncoded { block_bits } => {
                if payload.len() != *block_bits {
                    return Err(FecError::Length { expected: *block_bits, got: payload.len() });
                }
                Ok(payload.to_vec())
            }
            FecScheme::Concatenated(c) => c.encode(payload),
        }
    }

    pub fn decode(&self, frame: &[u8]) -> Result<FrameOutcome, FecError> {
        match self {
            FecScheme::Uncoded { block_bits } => {
                if frame.len() != *block_bits {
                    return Err(FecError::Length { expected: *block_bits, got: frame.len() });
                }
                Ok(FrameOutcome {
                    payload: frame.to_vec(),
                    corrected_count: 0,
                    status: DecodeStatus::Ok,
                    inner_failures: 0,
                    outer_failures: 0,
                })
            }
            FecScheme::Concatenated(c) => c.decode(frame),
        }
    }
}
