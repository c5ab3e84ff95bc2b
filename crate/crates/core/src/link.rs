//! End-to-end link simulation, goodput arithmetic and long-term monitoring.
//!
//! A run has two phases, each with its own ChaCha stream so that changing
//! how errors are drawn never perturbs the channel history:
//!
//! 1. Channel timeline (stream 0): one fading draw per simulated second, the
//!    received power, the AGC loop stepping at its own cadence, and optional
//!    short bursts. The result is a list of line-bit segments with a constant
//!    slot SNR.
//! 2. Errors (stream 1, or one stream per frame in waveform mode): bit errors
//!    over those segments, FEC decoding, and packet accounting.
//!
//! The slot SNR of a segment is `10^((margin_db - penalty_db + snr_offset_db) / 20)`
//! where the penalty is how far the AGC output sits outside its window.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agc::{acquire, agc_step, AgcError, AgcSettings, AgcState, CalibrationMap, ReceiverChain};
use crate::channel::{sample_fading, total_loss_db, ChannelError, FadingSpec, LinkGeometry, LossBreakdown, NlosPath, WaterOptics};
use crate::fec::{BchCode, ConcatCodec, DecodeStatus, FecError, FecScheme, GaloisField};
use crate::modem::{slot_rate_for, theoretical_ber, DetectionParams, ModemError, ModulationKind, ModulationScheme};

/// Ethernet header 14 + FCS 4 + preamble 8 + interframe gap 12.
pub const ETHERNET_OVERHEAD_BYTES: u32 = 38;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Fec(#[from] FecError),
    #[error(transparent)]
    Agc(#[from] AgcError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

impl LinkError {
    fn invalid(field: &str, msg: impl Into<String>) -> Self {
        LinkError::Invalid { field: field.into(), msg: msg.into() }
    }
}

/// How bit errors are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    /// Error positions drawn from the theoretical BER of each segment; only
    /// corrupted frames are decoded.
    Statistical,
    /// Every frame carries a random payload through encode, modulation, slot
    /// noise, detection and decode.
    Waveform,
}

impl Fidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::Statistical => "statistical",
            Fidelity::Waveform => "waveform",
        }
    }
}

impl std::str::FromStr for Fidelity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "statistical" => Ok(Fidelity::Statistical),
            "waveform" => Ok(Fidelity::Waveform),
            other => Err(format!("unknown fidelity '{other}' (expected statistical or waveform)")),
        }
    }
}

/// One shortened BCH component code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BchParams {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub m: u32,
    pub poly: u32,
}

impl BchParams {
    pub fn build(&self) -> Result<BchCode, FecError> {
        BchCode::new(GaloisField::new(self.m, self.poly)?, self.n, self.k, self.t)
    }
}

/// Serializable description of the frame codec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub enabled: bool,
    pub outer: BchParams,
    pub inner: BchParams,
    pub interleaver_depth: usize,
    pub outer_words: usize,
    pub line_interleave: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            outer: BchParams { n: 3860, k: 3824, t: 3, m: 12, poly: 0x1053 },
            inner: BchParams { n: 2040, k: 1930, t: 10, m: 11, poly: 0x805 },
            interleaver_depth: 8,
            outer_words: 4,
            line_interleave: true,
        }
    }
}

impl CodecConfig {
    /// Disabled coding still frames the line in blocks of
    /// `outer_words · outer.k` bits.
    pub fn build(&self) -> Result<FecScheme, FecError> {
        if !self.enabled {
            if self.outer_words == 0 || self.outer.k == 0 {
                return Err(FecError::Framing("uncoded block size must be positive".into()));
            }
            return Ok(FecScheme::Uncoded { block_bits: self.outer_words * self.outer.k });
        }
        Ok(FecScheme::Concatenated(ConcatCodec::new(
            self.outer.build()?,
            self.inner.build()?,
            self.interleaver_depth,
            self.outer_words,
            self.line_interleave,
        )?))
    }
}

/// One directed optical link and everything needed to simulate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub tx_power_w: f64,
    pub water: WaterOptics,
    pub geometry: LinkGeometry,
    pub nlos: Option<NlosPath>,
    pub modulation: ModulationScheme,
    pub codec: CodecConfig,
    pub budget_db: f64,
    pub sync_overhead_fraction: f64,
    pub iface_cap_bps: f64,
    pub frame_payload_bytes: u32,
    pub receiver: ReceiverChain,
    pub agc: AgcSettings,
    pub fading: FadingSpec,
    /// Maps link margin to slot SNR; see the module docs.
    pub snr_offset_db: f64,
    pub fidelity: Fidelity,
}

impl LinkSpec {
    pub fn validate(&self) -> Result<(), LinkError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LinkError::invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("tx_power_w", self.tx_power_w)?;
        positive("budget_db", self.budget_db)?;
        positive("iface_cap_bps", self.iface_cap_bps)?;
        if !(0.0..1.0).contains(&self.sync_overhead_fraction) {
            return Err(LinkError::invalid("sync_overhead_fraction", format!("{} not in [0, 1)", self.sync_overhead_fraction)));
        }
        if !(46..=1500).contains(&self.frame_payload_bytes) {
            return Err(LinkError::invalid("frame_payload_bytes", format!("{} not in [46, 1500]", self.frame_payload_bytes)));
        }
        if !self.snr_offset_db.is_finite() {
            return Err(LinkError::invalid("snr_offset_db", "must be finite"));
        }
        WaterOptics::new(self.water.c_per_m(), self.water.c_db_per_m())?;
        self.geometry.validate()?;
        slot_rate_for(self.modulation.kind, self.modulation.bit_rate_bps)?;
        if self.line_bits_per_second() == 0 {
            return Err(LinkError::invalid("bit_rate_bps", "no line bits left after sync overhead"));
        }
        self.codec.build()?;
        self.receiver.validate()?;
        self.agc.validate()?;
        self.fading.validate()?;
        if let Some(n) = &self.nlos {
            if !(n.reflectance > 0.0 && n.reflectance <= 1.0) {
                return Err(LinkError::invalid("reflectance", format!("{} not in (0, 1]", n.reflectance)));
            }
        }
        self.loss_at_distance(self.geometry.distance_m, 0.0)?;
        Ok(())
    }

    /// Loss breakdown with the link stretched to `distance_m`. An NLOS path
    /// keeps its detour length.
    pub fn loss_at_distance(&self, distance_m: f64, fading_db: f64) -> Result<LossBreakdown, ChannelError> {
        let g = self.geometry.at_distance(distance_m);
        let nlos = self.nlos.map(|n| NlosPath {
            unfolded_distance_m: n.unfolded_distance_m - self.geometry.distance_m + distance_m,
            ..n
        });
        total_loss_db(&g, &self.water, nlos.as_ref(), fading_db)
    }

    pub fn margin_db(&self) -> Result<f64, ChannelError> {
        Ok(self.budget_db - self.loss_at_distance(self.geometry.distance_m, 0.0)?.total_db)
    }

    /// Line bits per second left for coded frames after sync overhead.
    pub fn line_bits_per_second(&self) -> u64 {
        (self.modulation.bit_rate_bps * (1.0 - self.sync_overhead_fraction)).round() as u64
    }

    pub fn code_rate(&self) -> Result<f64, FecError> {
        Ok(self.codec.build()?.code_rate())
    }

    /// Goodput of a loss-free link.
    pub fn nominal_goodput_bps(&self) -> Result<f64, FecError> {
        Ok(goodput_bps(
            self.modulation.bit_rate_bps,
            self.code_rate()?,
            self.sync_overhead_fraction,
            self.iface_cap_bps,
            self.frame_payload_bytes,
        ))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn config_hash(&self) -> String {
        crate::report::content_hash(&serde_json::to_vec(self).expect("LinkSpec serializes"))
    }
}

/// Ethernet goodput: `min(line · fec · (1 − sync), cap) · payload / (payload + 38)`.
pub fn goodput_bps(
    line_rate_bps: f64,
    fec_rate: f64,
    sync_overhead: f64,
    iface_cap_bps: f64,
    frame_payload_bytes: u32,
) -> f64 {
    if !(line_rate_bps > 0.0) {
        return 0.0;
    }
    let carried = (line_rate_bps * fec_rate * (1.0 - sync_overhead)).min(iface_cap_bps);
    let p = frame_payload_bytes as f64;
    carried * p / (p + ETHERNET_OVERHEAD_BYTES as f64)
}

/// Per-run statistics. Field order is the serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub fidelity: Fidelity,
    pub duration_s: u64,
    pub frames_sent: u64,
    pub line_bits: u64,
    pub payload_bits: u64,
    pub pre_fec_bit_errors: u64,
    pub pre_fec_ber: f64,
    pub post_fec_bit_errors: u64,
    pub post_fec_ber: f64,
    pub decode_failures: u64,
    pub packets_sent: u64,
    pub packet_loss_count: u64,
    pub goodput_bps: f64,
    pub beps_series: Vec<u64>,
    pub margin_trace_db: Vec<f64>,
    pub packet_loss_series: Vec<u64>,
}

/// Stretch of line bits sharing one slot SNR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start_bit: u64,
    pub len: u64,
    pub snr_db: f64,
}

/// Phase-one output: what the channel and AGC did, second by second.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTimeline {
    pub bits_per_second: u64,
    pub segments: Vec<Segment>,
    pub margin_trace_db: Vec<f64>,
}

pub fn snr_amplitude(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 20.0)
}

const PPM_TABLE_LO_DB: f64 = -30.0;
const PPM_TABLE_HI_DB: f64 = 30.0;
const PPM_TABLE_STEP_DB: f64 = 0.01;

fn ppm_ln_ber_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ((PPM_TABLE_HI_DB - PPM_TABLE_LO_DB) / PPM_TABLE_STEP_DB).round() as usize + 1;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let db = PPM_TABLE_LO_DB + i as f64 * PPM_TABLE_STEP_DB;
                theoretical_ber(ModulationKind::Ppm4, snr_amplitude(db)).ln()
            })
            .collect()
    })
}

/// Bit error probability at a slot SNR in dB. 4-PPM uses a log-linear
/// interpolation table inside ±30 dB.
pub fn ber_at_snr_db(kind: ModulationKind, snr_db: f64) -> f64 {
    if snr_db == f64::NEG_INFINITY {
        return 0.5;
    }
    match kind {
        ModulationKind::Ook => theoretical_ber(kind, snr_amplitude(snr_db)),
        ModulationKind::Ppm4 if (PPM_TABLE_LO_DB..PPM_TABLE_HI_DB).contains(&snr_db) => {
            let table = ppm_ln_ber_table();
            let x = (snr_db - PPM_TABLE_LO_DB) / PPM_TABLE_STEP_DB;
            let i = (x.floor() as usize).min(table.len() - 2);
            let f = x - i as f64;
            (table[i] + f * (table[i + 1] - table[i])).exp()
        }
        ModulationKind::Ppm4 => theoretical_ber(kind, snr_amplitude(snr_db)),
    }
}

/// Runs the channel, fading and AGC for `duration_s` seconds.
pub fn channel_timeline<R: Rng + ?Sized>(
    spec: &LinkSpec,
    duration_s: u64,
    rng: &mut R,
) -> Result<ChannelTimeline, LinkError> {
    let map = CalibrationMap::from_chain(&spec.receiver)?;
    let settings = &spec.agc;
    let chain = &spec.receiver;
    let base = spec.loss_at_distance(spec.geometry.distance_m, 0.0)?;
    let bps = spec.line_bits_per_second();
    let to_bit = |t: f64| ((t * bps as f64).round() as u64).min(bps);

    let mut segments = Vec::new();
    let mut margins = Vec::with_capacity(duration_s as usize);
    let mut state: Option<AgcState> = None;
    for s in 0..duration_s {
        let fade = sample_fading(&spec.fading, rng);
        let burst_pos: f64 = rng.random();
        let whole_second = fade.burst && spec.fading.burst_duration_s.is_none();
        let slow_db = if whole_second { fade.total_db(&spec.fading) } else { fade.gaussian_db };
        let loss_db = base.total_db + slow_db;
        let margin = spec.budget_db - loss_db;
        margins.push(margin);
        let p_rx = spec.tx_power_w * 10f64.powf(-loss_db / 10.0);

        // AGC: out-of-window intervals carry the excursion as an SNR penalty.
        let mut st = state.unwrap_or_else(|| acquire(&map, settings, p_rx));
        let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
        let mut t = 0.0;
        while t < 1.0 {
            let v = chain.amplitude(p_rx, st.lc_voltage, st.pmt_gain);
            if settings.contains(v) {
                pieces.push((t, 1.0, 0.0));
                break;
            }
            let t1 = (t + settings.step_interval_s).min(1.0);
            pieces.push((t, t1, settings.excursion_db(v)));
            st = agc_step(&st, v, &map, settings);
            t = t1;
        }
        state = Some(st);

        let burst = match spec.fading.burst_duration_s {
            Some(d) if fade.burst => {
                let start = burst_pos * (1.0 - d);
                Some((start, start + d))
            }
            _ => None,
        };
        let origin = s * bps;
        let mut push = |a: f64, b: f64, penalty: f64| {
            let (ba, bb) = (to_bit(a), to_bit(b));
            if bb > ba {
                segments.push(Segment {
                    start_bit: origin + ba,
                    len: bb - ba,
                    snr_db: margin - penalty + spec.snr_offset_db,
                });
            }
        };
        for (a, b, penalty) in pieces {
            match burst {
                Some((u0, u1)) if u0 < b && u1 > a => {
                    push(a, u0.max(a), penalty);
                    push(u0.max(a), u1.min(b), penalty + spec.fading.burst_depth_db);
                    push(u1.min(b), b, penalty);
                }
                _ => push(a, b, penalty),
            }
        }
    }
    Ok(ChannelTimeline { bits_per_second: bps, segments, margin_trace_db: margins })
}

/// Frame-by-frame statistics, fed in frame order.
struct Accounting {
    frame_bits: u64,
    frame_payload_bits: u64,
    packet_bits: u64,
    packets_sent: u64,
    bits_per_second: Option<u64>,
    pre_errors: u64,
    residual: u64,
    failures: u64,
    lost: u64,
    last_lost: Option<u64>,
    beps: Vec<u64>,
    loss_series: Vec<u64>,
}

impl Accounting {
    fn new(spec: &LinkSpec, scheme: &FecScheme, frames: u64, bits_per_second: Option<u64>, duration_s: u64) -> Self {
        let frame_payload_bits = scheme.frame_payload_bits() as u64;
        let packet_bits = (spec.frame_payload_bytes + ETHERNET_OVERHEAD_BYTES) as u64 * 8;
        Self {
            frame_bits: scheme.frame_bits() as u64,
            frame_payload_bits,
            packet_bits,
            packets_sent: frames * frame_payload_bits / packet_bits,
            bits_per_second,
            pre_errors: 0,
            residual: 0,
            failures: 0,
            lost: 0,
            last_lost: None,
            beps: vec![0; duration_s as usize],
            loss_series: vec![0; duration_s as usize],
        }
    }

    fn second_of(&self, line_bit: u64) -> Option<usize> {
        self.bits_per_second.map(|bps| ((line_bit / bps) as usize).min(self.beps.len().saturating_sub(1)))
    }

    fn line_error(&mut self, line_bit: u64) {
        self.pre_errors += 1;
        if let Some(s) = self.second_of(line_bit) {
            self.beps[s] += 1;
        }
    }

    /// `residual` holds ascending payload offsets that came out wrong.
    fn frame_done(&mut self, frame: u64, residual: &[usize], failed: bool) {
        self.residual += residual.len() as u64;
        let first_payload = frame * self.frame_payload_bits;
        let lost_packets: Vec<u64> = if failed {
            self.failures += 1;
            let lo = first_payload / self.packet_bits;
            let hi = (first_payload + self.frame_payload_bits - 1) / self.packet_bits;
            (lo..=hi).collect()
        } else {
            residual.iter().map(|&p| (first_payload + p as u64) / self.packet_bits).collect()
        };
        let second = self.second_of((frame + 1) * self.frame_bits - 1);
        for pkt in lost_packets {
            if pkt >= self.packets_sent || self.last_lost.is_some_and(|l| pkt <= l) {
                continue;
            }
            self.last_lost = Some(pkt);
            self.lost += 1;
            if let Some(s) = second {
                self.loss_series[s] += 1;
            }
        }
    }
}

fn residual_positions(decoded: &[u8], sent: Option<&[u8]>) -> Vec<usize> {
    match sent {
        Some(p) => decoded.iter().zip(p).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i).collect(),
        None => decoded.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect(),
    }
}

/// Decodes an error pattern on its own. Both codes are linear and their
/// corrections depend only on syndromes, so this gives the same residual
/// pattern and status as decoding codeword ⊕ pattern.
fn decode_pattern(scheme: &FecScheme, offsets: &[u32]) -> Result<(Vec<usize>, bool), FecError> {
    let mut frame = vec![0u8; scheme.frame_bits()];
    for &o in offsets {
        frame[o as usize] ^= 1;
    }
    let out = scheme.decode(&frame)?;
    Ok((residual_positions(&out.payload, None), out.status != DecodeStatus::Ok))
}

/// Draws i.i.d. error offsets in `[0, len)` at rate `p`, ascending.
fn draw_errors<R: Rng + ?Sized>(len: u64, p: f64, rng: &mut R, out: &mut Vec<u64>) {
    if p <= 0.0 || len == 0 {
        return;
    }
    // Keep each draw's index set small by splitting dense stretches.
    let chunk = if p * len as f64 > 1e5 { ((1e4 / p).ceil() as u64).max(1) } else { len };
    let mut at = 0;
    while at < len {
        let n = chunk.min(len - at);
        let k = Binomial::new(n, p.min(1.0)).expect("valid binomial").sample(rng);
        if k > 0 {
            let mut idx = rand::seq::index::sample(rng, n as usize, k as usize).into_vec();
            idx.sort_unstable();
            out.extend(idx.into_iter().map(|i| at + i as u64));
        }
        at += n;
    }
}

fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let w: u64 = rng.random();
        for b in 0..64.min(n - bits.len()) {
            bits.push(((w >> b) & 1) as u8);
        }
    }
    bits
}

fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 + frame);
    rng
}

struct FrameResult {
    line_errors: Vec<u32>,
    residual: Vec<usize>,
    failed: bool,
}

/// Waveform path for one frame: payload, encode, slots, noise, detect, decode.
fn waveform_frame(
    spec: &LinkSpec,
    scheme: &FecScheme,
    segments: &[Segment],
    frame: u64,
    seed: u64,
) -> Result<FrameResult, LinkError> {
    let mut rng = frame_rng(seed, frame);
    let frame_bits = scheme.frame_bits();
    let payload = random_bits(scheme.frame_payload_bits(), &mut rng);
    let line = scheme.encode(&payload)?;
    let mut stream = spec.modulation.modulate(&line);
    let base = frame * frame_bits as u64;
    let kind = spec.modulation.kind;
    let mut seg = segments.partition_point(|s| s.start_bit + s.len <= base);
    for (i, a) in stream.amplitudes.iter_mut().enumerate() {
        let bit = base
            + match kind {
                ModulationKind::Ook => i as u64,
                ModulationKind::Ppm4 => (i / 4 * 2) as u64,
            };
        while seg + 1 < segments.len() && segments[seg].start_bit + segments[seg].len <= bit {
            seg += 1;
        }
        let snr = segments.get(seg).map_or(0.0, |s| snr_amplitude(s.snr_db)).max(1e-9);
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        *a += z / snr;
    }
    let mut rx = spec.modulation.demodulate(&stream, &DetectionParams::for_snr(1.0));
    rx.truncate(frame_bits);
    let line_errors = rx.iter().zip(&line).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i as u32).collect();
    let out = scheme.decode(&rx)?;
    Ok(FrameResult {
        line_errors,
        residual: residual_positions(&out.payload, Some(&payload)),
        failed: out.status != DecodeStatus::Ok,
    })
}

fn finish_report(
    spec: &LinkSpec,
    seed: u64,
    duration_s: u64,
    frames: u64,
    acc: Accounting,
    margin_trace_db: Vec<f64>,
) -> Result<SimReport, LinkError> {
    let line_bits = frames * acc.frame_bits;
    let payload_bits = frames * acc.frame_payload_bits;
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let nominal = spec.nominal_goodput_bps()?;
    Ok(SimReport {
        name: spec.name.clone(),
        seed,
        config_hash: spec.config_hash(),
        fidelity: spec.fidelity,
        duration_s,
        frames_sent: frames,
        line_bits,
        payload_bits,
        pre_fec_bit_errors: acc.pre_errors,
        pre_fec_ber: ratio(acc.pre_errors, line_bits),
        post_fec_bit_errors: acc.residual,
        post_fec_ber: ratio(acc.residual, payload_bits),
        decode_failures: acc.failures,
        packets_sent: acc.packets_sent,
        packet_loss_count: acc.lost,
        goodput_bps: nominal * (1.0 - ratio(acc.lost, acc.packets_sent)),
        beps_series: acc.beps,
        margin_trace_db,
        packet_loss_series: acc.loss_series,
    })
}

/// Simulates `duration_s` seconds of the link. The report is a pure function
/// of `(spec, duration_s, seed)`.
///
/// Frames run back to back over the line bits left after sync overhead; line
/// bits after the last whole frame are idle and not counted.
pub fn run_scenario(spec: &LinkSpec, duration_s: u64, seed: u64) -> Result<SimReport, LinkError> {
    spec.validate()?;
    if duration_s == 0 {
        return Err(LinkError::invalid("duration_s", "must be at least 1"));
    }
    let scheme = spec.codec.build()?;
    let mut channel_rng = ChaCha8Rng::seed_from_u64(seed);
    channel_rng.set_stream(0);
    let timeline = channel_timeline(spec, duration_s, &mut channel_rng)?;
    let bps = timeline.bits_per_second;
    let frame_bits = scheme.frame_bits() as u64;
    let frames = duration_s * bps / frame_bits;
    let line_bits = frames * frame_bits;
    let mut acc = Accounting::new(spec, &scheme, frames, Some(bps), duration_s);

    match spec.fidelity {
        Fidelity::Statistical => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let mut current: Option<u64> = None;
            let mut offsets: Vec<u32> = Vec::new();
            let mut positions = Vec::new();
            for seg in &timeline.segments {
                if seg.start_bit >= line_bits {
                    break;
                }
                let len = seg.len.min(line_bits - seg.start_bit);
                positions.clear();
                draw_errors(len, ber_at_snr_db(spec.modulation.kind, seg.snr_db), &mut rng, &mut positions);
                for &p in &positions {
                    let bit = seg.start_bit + p;
                    acc.line_error(bit);
                    let frame = bit / frame_bits;
                    if current != Some(frame) {
                        if let Some(f) = current {
                            let (res, failed) = decode_pattern(&scheme, &offsets)?;
                            acc.frame_done(f, &res, failed);
                        }
                        current = Some(frame);
                        offsets.clear();
                    }
                    offsets.push((bit % frame_bits) as u32);
                }
            }
            if let Some(f) = current {
                let (res, failed) = decode_pattern(&scheme, &offsets)?;
                acc.frame_done(f, &res, failed);
            }
        }
        Fidelity::Waveform => {
            let results: Vec<FrameResult> = (0..frames)
                .into_par_iter()
                .map(|f| waveform_frame(spec, &scheme, &timeline.segments, f, seed))
                .collect::<Result<_, _>>()?;
            for (f, r) in results.iter().enumerate() {
                let base = f as u64 * frame_bits;
                for &o in &r.line_errors {
                    acc.line_error(base + o as u64);
                }
                acc.frame_done(f as u64, &r.residual, r.failed);
            }
        }
    }
    finish_report(spec, seed, duration_s, frames, acc, timeline.margin_trace_db)
}

/// Bypasses the analog chain: random payloads, i.i.d. line-bit flips at
/// `pre_fec_ber`, full decode. Covers at least `n_bits` line bits.
pub fn inject_errors_run(spec: &LinkSpec, pre_fec_ber: f64, n_bits: u64, seed: u64) -> Result<SimReport, LinkError> {
    spec.validate()?;
    if !(0.0..0.5).contains(&pre_fec_ber) {
        return Err(LinkError::invalid("pre_fec_ber", format!("{pre_fec_ber} not in [0, 0.5)")));
    }
    let scheme = spec.codec.build()?;
    let frame_bits = scheme.frame_bits() as u64;
    let frames = n_bits.div_ceil(frame_bits);
    let results: Vec<FrameResult> = (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = frame_rng(seed, f);
            let payload = random_bits(scheme.frame_payload_bits(), &mut rng);
            let mut line = scheme.encode(&payload)?;
            let mut flips = Vec::new();
            draw_errors(frame_bits, pre_fec_ber, &mut rng, &mut flips);
            for &i in &flips {
                line[i as usize] ^= 1;
            }
            let out = scheme.decode(&line)?;
            Ok(FrameResult {
                line_errors: flips.into_iter().map(|i| i as u32).collect(),
                residual: residual_positions(&out.payload, Some(&payload)),
                failed: out.status != DecodeStatus::Ok,
            })
        })
        .collect::<Result<_, LinkError>>()?;
    let mut acc = Accounting::new(spec, &scheme, frames, None, 0);
    for (f, r) in results.iter().enumerate() {
        for _ in &r.line_errors {
            acc.line_error(0);
        }
        acc.frame_done(f as u64, &r.residual, r.failed);
    }
    finish_report(spec, seed, 0, frames, acc, Vec::new())
}

/// Long-term monitoring: independent epochs plus worst-case summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub epochs: u32,
    pub epoch_duration_s: u64,
    pub max_pre_fec_ber: f64,
    pub max_post_fec_ber: f64,
    pub total_packet_losses: u64,
    pub reports: Vec<SimReport>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of epoch `index`, a function of the master seed and the index only.
pub fn epoch_seed(master: u64, index: u32) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

pub fn long_term_monitor(
    spec: &LinkSpec,
    epochs: u32,
    epoch_duration_s: u64,
    seed: u64,
) -> Result<MonitorReport, LinkError> {
    if epochs == 0 {
        return Err(LinkError::invalid("epochs", "must be at least 1"));
    }
    spec.validate()?;
    let reports: Vec<SimReport> = (0..epochs)
        .into_par_iter()
        .map(|i| run_scenario(spec, epoch_duration_s, epoch_seed(seed, i)))
        .collect::<Result<_, _>>()?;
    Ok(MonitorReport {
        name: spec.name.clone(),
        seed,
        config_hash: spec.config_hash(),
        epochs,
        epoch_duration_s,
        max_pre_fec_ber: reports.iter().map(|r| r.pre_fec_ber).fold(0.0, f64::max),
        max_post_fec_ber: reports.iter().map(|r| r.post_fec_ber).fold(0.0, f64::max),
        total_packet_losses: reports.iter().map(|r| r.packet_loss_count).sum(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn goodput_examples() {
        let g = goodput_bps(125e6, 0.93725, 0.0, 100e6, 1500);
        assert!((g - 100e6 * 1500.0 / 1538.0).abs() < 1.0);
        assert!((g / 1e6 - 97.53).abs() < 0.01);
        let b = goodput_bps(6.25e6, 0.93725, 0.037, 100e6, 1500);
        assert!((b / 1e6 - 5.50).abs() < 0.01, "{b}");
        assert_eq!(goodput_bps(0.0, 0.93725, 0.0, 100e6, 1500), 0.0);
    }

    #[test]
    fn ber_table_tracks_direct_integral() {
        for db in [-20.0, 0.0, 10.0, 17.0, 18.5, 19.0, 21.33, 29.9] {
            let direct = theoretical_ber(ModulationKind::Ppm4, snr_amplitude(db));
            let table = ber_at_snr_db(ModulationKind::Ppm4, db);
            assert!((table / direct - 1.0).abs() < 1e-3, "{db}: {table} vs {direct}");
        }
        assert_eq!(ber_at_snr_db(ModulationKind::Ook, f64::NEG_INFINITY), 0.5);
    }

    #[test]
    fn draw_errors_rate_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut out = Vec::new();
        draw_errors(10_000_000, 0.05, &mut rng, &mut out);
        assert!(out.windows(2).all(|w| w[0] < w[1]));
        let sigma = (1e7f64 * 0.05 * 0.95).sqrt();
        assert!((out.len() as f64 - 5e5).abs() < 4.0 * sigma);
        out.clear();
        draw_errors(1000, 0.0, &mut rng, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn zero_pattern_trick_matches_full_decode() {
        let scheme = CodecConfig::default().build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for weight in [1usize, 12, 40, 90, 300] {
            let payload = random_bits(scheme.frame_payload_bits(), &mut rng);
            let mut line = scheme.encode(&payload).unwrap();
            let offsets: Vec<u32> = rand::seq::index::sample(&mut rng, line.len(), weight)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            for &o in &offsets {
                line[o as usize] ^= 1;
            }
            let out = scheme.decode(&line).unwrap();
            let full = residual_positions(&out.payload, Some(&payload));
            let (trick, failed) = decode_pattern(&scheme, &offsets).unwrap();
            assert_eq!(full, trick, "weight {weight}");
            assert_eq!(failed, out.status != DecodeStatus::Ok);
        }
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let ok = presets::green_125m();
        let bad = [
            LinkSpec { budget_db: 0.0, ..ok.clone() },
            LinkSpec { sync_overhead_fraction: 1.0, ..ok.clone() },
            LinkSpec { frame_payload_bytes: 20, ..ok.clone() },
            LinkSpec { nlos: Some(NlosPath { reflectance: 0.0, unfolded_distance_m: 34.0 }), ..ok.clone() },
            LinkSpec { geometry: LinkGeometry { pointing_offset_m: 5.0, ..ok.geometry }, ..ok.clone() },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
        assert!(run_scenario(&ok, 0, 1).is_err());
    }

    #[test]
    fn green_short_run_is_clean_and_deterministic() {
        let spec = presets::green_125m();
        let a = run_scenario(&spec, 5, 42).unwrap();
        let b = run_scenario(&spec, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.beps_series.len(), 5);
        assert_eq!(a.beps_series.iter().sum::<u64>(), a.pre_fec_bit_errors);
        assert!(a.pre_fec_ber < 1e-5);
        assert_eq!(a.post_fec_bit_errors, 0);
        assert_eq!(a.packet_loss_count, 0);
        assert_eq!(a.frames_sent, 5 * 125_000_000 / 16320);
    }

    #[test]
    fn whole_second_burst_hits_that_second_only() {
        let mut spec = presets::blue_6m25();
        spec.fading = FadingSpec { sigma_db: 0.0, burst_probability: 1.0, burst_depth_db: 30.0, burst_duration_s: None };
        let r = run_scenario(&spec, 2, 5).unwrap();
        assert!(r.beps_series.iter().all(|&e| e > 100_000));
        assert!(r.decode_failures > 0);
        assert!(r.margin_trace_db.iter().all(|m| *m < -5.0));
    }

    #[test]
    fn waveform_mode_agrees_with_statistics() {
        // Low SNR so both modes see plenty of errors in one second.
        let mut spec = presets::blue_6m25();
        spec.fading = FadingSpec::NONE;
        spec.snr_offset_db = -14.0;
        let stat = run_scenario(&spec, 1, 9).unwrap();
        let wave = run_scenario(&LinkSpec { fidelity: Fidelity::Waveform, ..spec.clone() }, 1, 9).unwrap();
        let p = ber_at_snr_db(ModulationKind::Ppm4, spec.margin_db().unwrap() + spec.snr_offset_db);
        let n = stat.line_bits as f64;
        // PPM symbol errors flip bit pairs together, so allow for correlated pairs.
        let tol = 5.0 * (2.0 * n * p).sqrt();
        for r in [&stat, &wave] {
            assert!((r.pre_fec_bit_errors as f64 - n * p).abs() < tol, "{} vs {}", r.pre_fec_bit_errors, n * p);
        }
    }

    #[test]
    fn inject_zero_and_heavy() {
        let spec = presets::green_125m();
        let clean = inject_errors_run(&spec, 0.0, 200_000, 1).unwrap();
        assert_eq!((clean.pre_fec_bit_errors, clean.post_fec_bit_errors, clean.decode_failures), (0, 0, 0));
        let heavy = inject_errors_run(&spec, 1e-2, 200_000, 1).unwrap();
        assert!(heavy.post_fec_bit_errors > 0 && heavy.decode_failures > 0);
        assert!(heavy.packet_loss_count > 0);
        assert!(inject_errors_run(&spec, 0.5, 10, 1).is_err());
    }

    #[test]
    fn monitor_epochs_are_order_free() {
        let spec = presets::blue_6m25();
        let m = long_term_monitor(&spec, 3, 2, 77).unwrap();
        for (i, r) in m.reports.iter().enumerate().rev() {
            assert_eq!(*r, run_scenario(&spec, 2, epoch_seed(77, i as u32)).unwrap());
        }
        let one = long_term_monitor(&spec, 1, 2, 77).unwrap();
        assert_eq!(one.reports[0], m.reports[0]);
        assert!(long_term_monitor(&spec, 0, 2, 77).is_err());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = presets::green_125m();
        let b = LinkSpec { tx_power_w: 2.0, ..a.clone() };
        assert_eq!(a.config_hash(), presets::green_125m().config_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
