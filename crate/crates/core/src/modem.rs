//! OOK and 4-PPM slot mapping, Gaussian slot noise, and reference error
//! rates.
//!
//! Slots are ideally synchronized. Amplitudes are normalized so a lit slot
//! has amplitude 1; the slot SNR is `1 / noise_sigma`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("bit rate must be positive and finite, got {0}")]
    BitRate(f64),
    #[error("OOK threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("noise sigma must be non-negative, got {0}")]
    Sigma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationKind {
    Ook,
    Ppm4,
}

impl ModulationKind {
    pub fn slots_per_bit(self) -> f64 {
        match self {
            ModulationKind::Ook => 1.0,
            ModulationKind::Ppm4 => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModulationKind::Ook => "ook",
            ModulationKind::Ppm4 => "ppm4",
        }
    }
}

impl std::str::FromStr for ModulationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ook" => Ok(ModulationKind::Ook),
            "ppm4" | "4-ppm" | "4ppm" => Ok(ModulationKind::Ppm4),
            other => Err(format!("unknown modulation '{other}' (expected ook or ppm4)")),
        }
    }
}

pub fn slot_rate_for(kind: ModulationKind, bit_rate_bps: f64) -> Result<f64, ModemError> {
    if !(bit_rate_bps > 0.0) || !bit_rate_bps.is_finite() {
        return Err(ModemError::BitRate(bit_rate_bps));
    }
    Ok(bit_rate_bps * kind.slots_per_bit())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationScheme {
    pub kind: ModulationKind,
    pub bit_rate_bps: f64,
}

impl ModulationScheme {
    pub fn new(kind: ModulationKind, bit_rate_bps: f64) -> Result<Self, ModemError> {
        slot_rate_for(kind, bit_rate_bps)?;
        Ok(Self { kind, bit_rate_bps })
    }

    pub fn slot_rate_hz(&self) -> f64 {
        self.bit_rate_bps * self.kind.slots_per_bit()
    }

    pub fn modulate(&self, bits: &[u8]) -> SlotStream {
        match self.kind {
            ModulationKind::Ook => ook_modulate(bits, self.slot_rate_hz()),
            ModulationKind::Ppm4 => ppm4_modulate(bits, self.slot_rate_hz()).0,
        }
    }

    pub fn demodulate(&self, stream: &SlotStream, params: &DetectionParams) -> Vec<u8> {
        match self.kind {
            ModulationKind::Ook => ook_demodulate(stream, params),
            ModulationKind::Ppm4 => ppm4_demodulate(stream),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotStream {
    pub amplitudes: Vec<f64>,
    pub slot_rate_hz: f64,
}

impl SlotStream {
    pub fn mean_power(&self) -> f64 {
        if self.amplitudes.is_empty() {
            return 0.0;
        }
        self.amplitudes.iter().sum::<f64>() / self.amplitudes.len() as f64
    }

    /// Adds i.i.d. zero-mean Gaussian noise to every slot.
    pub fn add_noise<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) {
        if sigma == 0.0 {
            return;
        }
        for a in &mut self.amplitudes {
            let z: f64 = rng.sample(StandardNormal);
            *a += sigma * z;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub noise_sigma: f64,
    pub ook_threshold: f64,
}

impl DetectionParams {
    pub fn new(noise_sigma: f64, ook_threshold: f64) -> Result<Self, ModemError> {
        if !(noise_sigma >= 0.0) {
            return Err(ModemError::Sigma(noise_sigma));
        }
        if !(ook_threshold > 0.0 && ook_threshold < 1.0) {
            return Err(ModemError::Threshold(ook_threshold));
        }
        Ok(Self { noise_sigma, ook_threshold })
    }

    /// Mid-level threshold for a given slot SNR.
    pub fn for_snr(snr: f64) -> Self {
        Self { noise_sigma: if snr > 0.0 { 1.0 / snr } else { f64::INFINITY }, ook_threshold: 0.5 }
    }
}

pub fn ook_modulate(bits: &[u8], slot_rate_hz: f64) -> SlotStream {
    SlotStream { amplitudes: bits.iter().map(|&b| (b & 1) as f64).collect(), slot_rate_hz }
}

pub fn ook_demodulate(stream: &SlotStream, params: &DetectionParams) -> Vec<u8> {
    stream.amplitudes.iter().map(|&a| (a > params.ook_threshold) as u8).collect()
}

/// Natural-binary 4-PPM: bit pair `b0 b1` lights slot `2·b0 + b1`. An odd
/// bit count is padded with one trailing zero; the flag reports whether that
/// happened.
pub fn ppm4_modulate(bits: &[u8], slot_rate_hz: f64) -> (SlotStream, bool) {
    let padded = bits.len() % 2 == 1;
    let mut amplitudes = Vec::with_capacity(bits.len().div_ceil(2) * 4);
    for pair in bits.chunks(2) {
        let hi = pair[0] & 1;
        let lo = pair.get(1).map_or(0, |b| b & 1);
        let slot = (2 * hi + lo) as usize;
        let mut symbol = [0.0; 4];
        symbol[slot] = 1.0;
        amplitudes.extend_from_slice(&symbol);
    }
    (SlotStream { amplitudes, slot_rate_hz }, padded)
}

/// Arg-max slot per symbol; ties go to the lowest slot index.
pub fn ppm4_demodulate(stream: &SlotStream) -> Vec<u8> {
    let mut bits = Vec::with_capacity(stream.amplitudes.len() / 2);
    for symbol in stream.amplitudes.chunks_exact(4) {
        let mut best = 0;
        for i in 1..4 {
            if symbol[i] > symbol[best] {
                best = i;
            }
        }
        bits.push((best >> 1) as u8);
        bits.push((best & 1) as u8);
    }
    bits
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// 4-PPM symbol error probability with arg-max detection: one slot at
/// amplitude `snr`, three noise-only slots, unit-variance noise.
pub fn ppm4_symbol_error(snr: f64) -> f64 {
    // P(err) = ∫ φ(u - snr) (1 - (1 - Q(u))^3) du, expanded to keep
    // precision when Q(u) is tiny.
    let lo = snr.min(0.0) - 12.0;
    let hi = snr + 12.0;
    let n = 6000;
    let h = (hi - lo) / n as f64;
    let f = |u: f64| {
        let q = q_function(u);
        std_normal_pdf(u - snr) * (3.0 * q - 3.0 * q * q + q * q * q)
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    (acc * h / 3.0).clamp(0.0, 0.75)
}

/// Bit error probability at slot-amplitude SNR `snr` (lit-slot amplitude over
/// noise standard deviation).
pub fn theoretical_ber(kind: ModulationKind, snr: f64) -> f64 {
    let snr = snr.max(0.0);
    match kind {
        // Levels 0 and 1, threshold 1/2: each level errs with Q(snr / 2).
        ModulationKind::Ook => q_function(snr / 2.0),
        // A wrong 4-ary symbol is equally likely to be any of the other three,
        // which differ from the sent pair in 4 bits out of 6.
        ModulationKind::Ppm4 => 2.0 / 3.0 * ppm4_symbol_error(snr),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn slot_rates() {
        assert_eq!(slot_rate_for(ModulationKind::Ook, 125e6).unwrap(), 125e6);
        assert_eq!(slot_rate_for(ModulationKind::Ppm4, 6.25e6).unwrap(), 12.5e6);
        assert!(slot_rate_for(ModulationKind::Ook, 0.0).is_err());
    }

    #[test]
    fn ook_mapping_and_power() {
        let s = ook_modulate(&[0, 0, 0, 0], 1.0);
        assert!(s.amplitudes.iter().all(|&a| a == 0.0));
        let s = ook_modulate(&[1, 0, 1, 0, 0, 1], 1.0);
        assert_eq!(s.mean_power(), 0.5);
    }

    #[test]
    fn ppm4_mapping() {
        assert_eq!(ppm4_modulate(&[0, 0], 1.0).0.amplitudes, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(ppm4_modulate(&[0, 1], 1.0).0.amplitudes, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(ppm4_modulate(&[1, 0], 1.0).0.amplitudes, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(ppm4_modulate(&[1, 1], 1.0).0.amplitudes, vec![0.0, 0.0, 0.0, 1.0]);
        let (s, padded) = ppm4_modulate(&[1], 1.0);
        assert!(padded);
        assert_eq!(ppm4_demodulate(&s), vec![1, 0]);
        let (s, _) = ppm4_modulate(&[1, 0, 0, 1, 1, 1, 0, 0], 1.0);
        assert_eq!(s.mean_power(), 0.25);
    }

    #[test]
    fn ppm4_ties_go_low() {
        let s = SlotStream { amplitudes: vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.7, 0.0, 0.7], slot_rate_hz: 1.0 };
        assert_eq!(ppm4_demodulate(&s), vec![0, 0, 0, 1]);
    }

    #[test]
    fn detection_params_validated() {
        assert!(DetectionParams::new(0.1, 0.0).is_err());
        assert!(DetectionParams::new(-0.1, 0.5).is_err());
        assert!(DetectionParams::new(0.0, 0.5).is_ok());
    }

    #[test]
    fn theoretical_reference_values() {
        assert!((theoretical_ber(ModulationKind::Ook, 0.0) - 0.5).abs() < 1e-12);
        // Q(3) = 1.3499e-3
        assert!((theoretical_ber(ModulationKind::Ook, 6.0) - 1.3499e-3).abs() < 1e-6);
        // Q(2) = 0.02275
        assert!((q_function(2.0) - 0.022750).abs() < 1e-6);
        // Pure guessing among four slots: 3/4 symbol error, 1/2 bit error.
        assert!((theoretical_ber(ModulationKind::Ppm4, 0.0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn ber_strictly_decreasing() {
        for kind in [ModulationKind::Ook, ModulationKind::Ppm4] {
            let mut prev = theoretical_ber(kind, 0.0);
            for i in 1..=40 {
                let b = theoretical_ber(kind, i as f64 * 0.25);
                assert!(b < prev, "{kind:?} at {}", i as f64 * 0.25);
                prev = b;
            }
        }
    }

    /// Probability of correct 4-PPM detection by midpoint quadrature of
    /// ∫ φ(u - s) Φ(u)^3 du.
    fn ppm4_correct_oracle(s: f64) -> f64 {
        let n01 = Normal::new(0.0, 1.0).unwrap();
        let (lo, hi, n) = (s - 15.0, s + 15.0, 200_000);
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let u = lo + (i as f64 + 0.5) * h;
                std_normal_pdf(u - s) * n01.cdf(u).powi(3)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn ppm4_symbol_error_matches_quadrature_oracle() {
        for s in [0.5, 1.0, 2.0, 3.3333, 5.0] {
            let oracle = 1.0 - ppm4_correct_oracle(s);
            assert!((ppm4_symbol_error(s) - oracle).abs() < 1e-7, "s = {s}");
        }
    }

    #[test]
    fn ook_monte_carlo_sigma_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000_000;
        let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let mut s = ook_modulate(&bits, 1.0);
        s.add_noise(0.25, &mut rng);
        let out = ook_demodulate(&s, &DetectionParams::new(0.25, 0.5).unwrap());
        let errors = bits.iter().zip(&out).filter(|(a, b)| a != b).count();
        let p = q_function(2.0);
        let ber = errors as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ber - p).abs() < 3.0 * sigma, "{ber} vs {p}");
    }

    #[test]
    fn ppm4_monte_carlo_sigma_0_3() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let symbols = 1_000_000;
        let bits: Vec<u8> = (0..2 * symbols).map(|_| rng.random_range(0..2)).collect();
        let (mut s, _) = ppm4_modulate(&bits, 1.0);
        s.add_noise(0.3, &mut rng);
        let out = ppm4_demodulate(&s);
        let sym_err = bits.chunks(2).zip(out.chunks(2)).filter(|(a, b)| a != b).count();
        let p = 1.0 - ppm4_correct_oracle(1.0 / 0.3);
        let ser = sym_err as f64 / symbols as f64;
        let sigma = (p * (1.0 - p) / symbols as f64).sqrt();
        assert!((ser - p).abs() < 3.0 * sigma, "{ser} vs {p}");
    }

    #[test]
    fn monte_carlo_converges_to_theory() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [ModulationKind::Ook, ModulationKind::Ppm4] {
            for snr in [2.0, 3.0, 4.0] {
                let scheme = ModulationScheme::new(kind, 1e6).unwrap();
                let n = 2_000_000;
                let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
                let mut s = scheme.modulate(&bits);
                let params = DetectionParams::for_snr(snr);
                s.add_noise(params.noise_sigma, &mut rng);
                let out = scheme.demodulate(&s, &params);
                let errors = bits.iter().zip(&out).filter(|(a, b)| a != b).count();
                let p = theoretical_ber(kind, snr);
                let ber = errors as f64 / n as f64;
                // PPM bit errors come in correlated pairs; allow for that in the spread.
                let sigma = (2.0 * p * (1.0 - p) / n as f64).sqrt();
                assert!((ber - p).abs() < 4.0 * sigma, "{kind:?} snr {snr}: {ber} vs {p}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn noiseless_roundtrip(bits in proptest::collection::vec(0u8..2, 0..400)) {
            let clean = DetectionParams::new(0.0, 0.5).unwrap();
            let ook = ModulationScheme::new(ModulationKind::Ook, 1.0).unwrap();
            prop_assert_eq!(ook.demodulate(&ook.modulate(&bits), &clean), bits.clone());
            let ppm = ModulationScheme::new(ModulationKind::Ppm4, 1.0).unwrap();
            let mut out = ppm.demodulate(&ppm.modulate(&bits), &clean);
            out.truncate(bits.len());
            prop_assert_eq!(out, bits);
        }

        #[test]
        fn ppm_one_pulse_per_symbol(bits in proptest::collection::vec(0u8..2, 0..400)) {
            let (s, _) = ppm4_modulate(&bits, 1.0);
            for sym in s.amplitudes.chunks(4) {
                prop_assert_eq!(sym.iter().filter(|&&a| a != 0.0).count(), 1);
            }
        }
    }
}
