//! Compiled-in link presets for the two deployed deep-sea links.

use crate::agc::{AgcSettings, ReceiverChain};
use crate::channel::{FadingSpec, LinkGeometry, NlosPath, WaterOptics};
use crate::link::{CodecConfig, Fidelity, LinkSpec};
use crate::modem::{ModulationKind, ModulationScheme};

pub const GREEN_125M: &str = "green-125M";
pub const BLUE_6M25: &str = "blue-6M25";

pub const NAMES: [&str; 2] = [GREEN_125M, BLUE_6M25];

/// Transmitter exit aperture. Small but nonzero so the geometry stays valid.
const TX_EXIT_M: f64 = 1e-4;

/// Green 520 nm link: 2.36 W, 0.53° half-angle, 46 mm PMT aperture, OOK at
/// 125 Mb/s, 82.77 dB budget, 30 m line of sight.
pub fn green_125m() -> LinkSpec {
    LinkSpec {
        name: GREEN_125M.into(),
        tx_power_w: 2.36,
        water: WaterOptics::deep_sea_green(),
        geometry: LinkGeometry {
            distance_m: 30.0,
            half_angle_deg: 0.53,
            tx_exit_diameter_m: TX_EXIT_M,
            rx_aperture_m: 0.046,
            pointing_offset_m: 0.0,
            k_override: None,
        },
        nlos: None,
        modulation: ModulationScheme { kind: ModulationKind::Ook, bit_rate_bps: 125e6 },
        codec: CodecConfig::default(),
        budget_db: 82.77,
        sync_overhead_fraction: 0.0,
        iface_cap_bps: 100e6,
        frame_payload_bytes: 1500,
        receiver: ReceiverChain::default(),
        agc: AgcSettings::default(),
        fading: FadingSpec { sigma_db: 0.25, burst_probability: 0.0, burst_depth_db: 0.0, burst_duration_s: None },
        snr_offset_db: -28.8,
        fidelity: Fidelity::Statistical,
    }
}

/// Blue 450 nm link: 2.1 W, 3.83° half-angle, 8 mm aperture, 4-PPM at
/// 6.25 Mb/s, 100.54 dB budget, received only via the seabed bounce.
pub fn blue_6m25() -> LinkSpec {
    LinkSpec {
        name: BLUE_6M25.into(),
        tx_power_w: 2.1,
        water: WaterOptics::deep_sea_blue(),
        geometry: LinkGeometry {
            distance_m: 30.0,
            half_angle_deg: 3.83,
            tx_exit_diameter_m: TX_EXIT_M,
            rx_aperture_m: 0.008,
            pointing_offset_m: 0.0,
            k_override: None,
        },
        nlos: Some(NlosPath { reflectance: 0.05, unfolded_distance_m: 34.0 }),
        modulation: ModulationScheme { kind: ModulationKind::Ppm4, bit_rate_bps: 6.25e6 },
        codec: CodecConfig::default(),
        budget_db: 100.54,
        sync_overhead_fraction: 0.037,
        iface_cap_bps: 100e6,
        frame_payload_bytes: 1500,
        receiver: ReceiverChain::default(),
        agc: AgcSettings::default(),
        fading: FadingSpec {
            sigma_db: 0.5,
            burst_probability: 0.002,
            burst_depth_db: 25.0,
            burst_duration_s: Some(30e-6),
        },
        snr_offset_db: -3.3,
        fidelity: Fidelity::Statistical,
    }
}

pub fn by_name(name: &str) -> Option<LinkSpec> {
    match name {
        GREEN_125M => Some(green_125m()),
        BLUE_6M25 => Some(blue_6m25()),
        _ => None,
    }
}
