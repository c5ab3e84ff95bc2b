//! Sectioned key-value scenario files.
//!
//! ```text
//! # comment
//! preset = blue-6M25
//!
//! [link]
//! tx_power_w = 2.1
//! [geometry]
//! distance_m = 40
//! ```
//!
//! `preset` is only allowed before the first section. Preset values load
//! first and file keys override them. Without a preset every required key
//! must be present. Optional keys accept `none`. Comments are whole lines
//! starting with `#` or `;`.

use std::collections::BTreeMap;

use crate::agc::{AgcSettings, LcCurve, ReceiverChain};
use crate::channel::{FadingSpec, LinkGeometry, NlosPath, WaterOptics};
use crate::link::{BchParams, CodecConfig, Fidelity, LinkSpec};
use crate::modem::{ModulationKind, ModulationScheme};
use crate::presets;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}' in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: duplicate key '{key}' in [{section}]")]
    Duplicate { line: usize, section: String, key: String },
    #[error("line {line}: unknown preset '{name}' (known: {known})")]
    UnknownPreset { line: usize, name: String, known: String },
    #[error("missing keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("line {line}: {section}.{key}: {msg}")]
    Value { line: usize, section: String, key: String, msg: String },
    #[error("{}invalid scenario: {msg}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, msg: String },
}

const SECTIONS: [&str; 6] = ["link", "water", "geometry", "codec", "fading", "agc"];

/// (section, key, required)
const KEYS: &[(&str, &str, bool)] = &[
    ("link", "name", true),
    ("link", "tx_power_w", true),
    ("link", "budget_db", true),
    ("link", "modulation", true),
    ("link", "bit_rate_bps", true),
    ("link", "sync_overhead_fraction", true),
    ("link", "iface_cap_bps", true),
    ("link", "frame_payload_bytes", true),
    ("link", "snr_offset_db", true),
    ("link", "fidelity", false),
    ("water", "c_per_m", false),
    ("water", "c_db_per_m", false),
    ("geometry", "distance_m", true),
    ("geometry", "half_angle_deg", true),
    ("geometry", "tx_exit_diameter_m", true),
    ("geometry", "rx_aperture_m", true),
    ("geometry", "pointing_offset_m", false),
    ("geometry", "k_m2", false),
    ("geometry", "nlos_reflectance", false),
    ("geometry", "nlos_unfolded_distance_m", false),
    ("codec", "enabled", false),
    ("codec", "outer_n", true),
    ("codec", "outer_k", true),
    ("codec", "outer_t", true),
    ("codec", "outer_m", true),
    ("codec", "outer_poly", true),
    ("codec", "inner_n", true),
    ("codec", "inner_k", true),
    ("codec", "inner_t", true),
    ("codec", "inner_m", true),
    ("codec", "inner_poly", true),
    ("codec", "interleaver_depth", true),
    ("codec", "outer_words", true),
    ("codec", "line_interleave", false),
    ("fading", "sigma_db", false),
    ("fading", "burst_probability", false),
    ("fading", "burst_depth_db", false),
    ("fading", "burst_duration_s", false),
    ("agc", "window_low_v", true),
    ("agc", "window_high_v", true),
    ("agc", "kp", true),
    ("agc", "step_interval_s", true),
    ("agc", "pmt_gain_min", true),
    ("agc", "pmt_gain_max", true),
    ("agc", "lc_v_min", true),
    ("agc", "lc_v_max", true),
    ("agc", "responsivity_v_per_w", true),
    ("agc", "lc_curve", true),
    ("agc", "lc_range_db", false),
    ("agc", "lc_mid_v", false),
    ("agc", "lc_width_v", false),
    ("agc", "lc_table", false),
];

type Key = (String, String);

struct Entry {
    value: String,
    /// Line in the parsed file; `None` for values that came from a preset.
    line: Option<usize>,
}

struct Values {
    map: BTreeMap<Key, Entry>,
}

impl Values {
    fn raw(&self, section: &str, key: &str) -> Option<&Entry> {
        self.map.get(&(section.to_string(), key.to_string()))
    }

    fn err(&self, section: &str, key: &str, msg: impl Into<String>) -> ScenarioError {
        let line = self.raw(section, key).and_then(|e| e.line).unwrap_or(0);
        ScenarioError::Value { line, section: section.into(), key: key.into(), msg: msg.into() }
    }

    fn opt_str(&self, section: &str, key: &str) -> Option<&str> {
        self.raw(section, key).map(|e| e.value.as_str()).filter(|v| !v.eq_ignore_ascii_case("none"))
    }

    fn str(&self, section: &str, key: &str) -> Result<&str, ScenarioError> {
        self.opt_str(section, key).ok_or_else(|| self.err(section, key, "required"))
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str, v: &str) -> Result<T, ScenarioError>
    where
        T::Err: std::fmt::Display,
    {
        v.parse::<T>().map_err(|e| self.err(section, key, format!("'{v}': {e}")))
    }

    fn f64(&self, section: &str, key: &str) -> Result<f64, ScenarioError> {
        let v = self.str(section, key)?;
        let x: f64 = self.parse(section, key, v)?;
        if !x.is_finite() {
            return Err(self.err(section, key, "must be finite"));
        }
        Ok(x)
    }

    fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ScenarioError> {
        match self.opt_str(section, key) {
            None => Ok(None),
            Some(_) => self.f64(section, key).map(Some),
        }
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ScenarioError> {
        Ok(self.opt_f64(section, key)?.unwrap_or(default))
    }

    fn usize(&self, section: &str, key: &str) -> Result<usize, ScenarioError> {
        let v = self.str(section, key)?;
        self.parse(section, key, v)
    }

    fn u32_any_radix(&self, section: &str, key: &str) -> Result<u32, ScenarioError> {
        let v = self.str(section, key)?;
        let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
            Some(hex) => u32::from_str_radix(hex, 16).map_err(|e| e.to_string()),
            None => v.parse::<u32>().map_err(|e| e.to_string()),
        };
        parsed.map_err(|e| self.err(section, key, format!("'{v}': {e}")))
    }

    fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, ScenarioError> {
        match self.opt_str(section, key) {
            None => Ok(default),
            Some(v) => match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(self.err(section, key, format!("'{v}' is not a boolean"))),
            },
        }
    }

    fn bch(&self, prefix: &str) -> Result<BchParams, ScenarioError> {
        let k = |s: &str| format!("{prefix}_{s}");
        Ok(BchParams {
            n: self.usize("codec", &k("n"))?,
            k: self.usize("codec", &k("k"))?,
            t: self.usize("codec", &k("t"))?,
            m: self.u32_any_radix("codec", &k("m"))?,
            poly: self.u32_any_radix("codec", &k("poly"))?,
        })
    }
}

fn parse_lc_table(v: &str) -> Result<Vec<(f64, f64)>, String> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair.split_once(':').ok_or_else(|| format!("'{pair}' is not voltage:transmittance"))?;
            let a: f64 = a.parse().map_err(|e| format!("'{a}': {e}"))?;
            let b: f64 = b.parse().map_err(|e| format!("'{b}': {e}"))?;
            Ok((a, b))
        })
        .collect()
}

/// Key/value pairs of a spec, in rendering order.
fn spec_entries(spec: &LinkSpec) -> Vec<(&'static str, &'static str, String)> {
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
    let g = &spec.geometry;
    let c = &spec.codec;
    let r = &spec.receiver;
    let mut out = vec![
        ("link", "name", spec.name.clone()),
        ("link", "tx_power_w", spec.tx_power_w.to_string()),
        ("link", "budget_db", spec.budget_db.to_string()),
        ("link", "modulation", spec.modulation.kind.as_str().to_string()),
        ("link", "bit_rate_bps", spec.modulation.bit_rate_bps.to_string()),
        ("link", "sync_overhead_fraction", spec.sync_overhead_fraction.to_string()),
        ("link", "iface_cap_bps", spec.iface_cap_bps.to_string()),
        ("link", "frame_payload_bytes", spec.frame_payload_bytes.to_string()),
        ("link", "snr_offset_db", spec.snr_offset_db.to_string()),
        ("link", "fidelity", spec.fidelity.as_str().to_string()),
        ("water", "c_per_m", spec.water.c_per_m().to_string()),
        ("water", "c_db_per_m", spec.water.c_db_per_m().to_string()),
        ("geometry", "distance_m", g.distance_m.to_string()),
        ("geometry", "half_angle_deg", g.half_angle_deg.to_string()),
        ("geometry", "tx_exit_diameter_m", g.tx_exit_diameter_m.to_string()),
        ("geometry", "rx_aperture_m", g.rx_aperture_m.to_string()),
        ("geometry", "pointing_offset_m", g.pointing_offset_m.to_string()),
        ("geometry", "k_m2", opt(g.k_override)),
        ("geometry", "nlos_reflectance", opt(spec.nlos.map(|n| n.reflectance))),
        ("geometry", "nlos_unfolded_distance_m", opt(spec.nlos.map(|n| n.unfolded_distance_m))),
        ("codec", "enabled", c.enabled.to_string()),
    ];
    for (names, p) in [
        (["outer_n", "outer_k", "outer_t", "outer_m", "outer_poly"], &c.outer),
        (["inner_n", "inner_k", "inner_t", "inner_m", "inner_poly"], &c.inner),
    ] {
        let values = [p.n.to_string(), p.k.to_string(), p.t.to_string(), p.m.to_string(), format!("{:#x}", p.poly)];
        out.extend(names.into_iter().zip(values).map(|(k, v)| ("codec", k, v)));
    }
    out.extend([
        ("codec", "interleaver_depth", c.interleaver_depth.to_string()),
        ("codec", "outer_words", c.outer_words.to_string()),
        ("codec", "line_interleave", c.line_interleave.to_string()),
        ("fading", "sigma_db", spec.fading.sigma_db.to_string()),
        ("fading", "burst_probability", spec.fading.burst_probability.to_string()),
        ("fading", "burst_depth_db", spec.fading.burst_depth_db.to_string()),
        ("fading", "burst_duration_s", opt(spec.fading.burst_duration_s)),
        ("agc", "window_low_v", spec.agc.window_low_v.to_string()),
        ("agc", "window_high_v", spec.agc.window_high_v.to_string()),
        ("agc", "kp", spec.agc.kp.to_string()),
        ("agc", "step_interval_s", spec.agc.step_interval_s.to_string()),
        ("agc", "pmt_gain_min", r.pmt_gain_min.to_string()),
        ("agc", "pmt_gain_max", r.pmt_gain_max.to_string()),
        ("agc", "lc_v_min", r.lc_v_min.to_string()),
        ("agc", "lc_v_max", r.lc_v_max.to_string()),
        ("agc", "responsivity_v_per_w", r.responsivity_v_per_w.to_string()),
    ]);
    match &r.lc_curve {
        LcCurve::Logistic { range_db, mid_v, width_v } => out.extend([
            ("agc", "lc_curve", "logistic".to_string()),
            ("agc", "lc_range_db", range_db.to_string()),
            ("agc", "lc_mid_v", mid_v.to_string()),
            ("agc", "lc_width_v", width_v.to_string()),
        ]),
        LcCurve::Table(points) => {
            let table: Vec<String> = points.iter().map(|(v, t)| format!("{v}:{t}")).collect();
            out.extend([("agc", "lc_curve", "table".to_string()), ("agc", "lc_table", table.join(", "))]);
        }
    }
    out
}

/// Canonical text form of a spec; `parse_scenario(render(s)) == s`.
pub fn render(spec: &LinkSpec) -> String {
    let mut out = String::new();
    let mut section = "";
    for (s, k, v) in spec_entries(spec) {
        if s != section {
            if !section.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{s}]\n"));
            section = s;
        }
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

pub fn parse_scenario(text: &str) -> Result<LinkSpec, ScenarioError> {
    parse_scenario_with_base(text, None)
}

/// Parses a scenario on top of `base` (used when the preset comes from the
/// command line). A `preset` key in the file takes precedence.
pub fn parse_scenario_with_base(text: &str, base: Option<&LinkSpec>) -> Result<LinkSpec, ScenarioError> {
    let mut file: BTreeMap<Key, Entry> = BTreeMap::new();
    let mut preset: Option<(String, usize)> = None;
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::Syntax { line: line_no, msg: format!("malformed section header '{line}'") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ScenarioError::UnknownSection { line: line_no, section: name.into() });
            }
            section = Some(name.into());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ScenarioError::Syntax { line: line_no, msg: format!("expected 'key = value', found '{line}'") })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = &section else {
            if key == "preset" {
                preset = Some((value.to_string(), line_no));
                continue;
            }
            return Err(ScenarioError::UnknownKey { line: line_no, section: "top level".into(), key: key.into() });
        };
        if !KEYS.iter().any(|(s, k, _)| s == sec && *k == key) {
            return Err(ScenarioError::UnknownKey { line: line_no, section: sec.clone(), key: key.into() });
        }
        let slot = (sec.clone(), key.to_string());
        if file.contains_key(&slot) {
            return Err(ScenarioError::Duplicate { line: line_no, section: sec.clone(), key: key.into() });
        }
        file.insert(slot, Entry { value: value.into(), line: Some(line_no) });
    }

    let base_spec = match preset {
        Some((name, line)) => Some(presets::by_name(&name).ok_or_else(|| ScenarioError::UnknownPreset {
            line,
            name,
            known: presets::NAMES.join(", "),
        })?),
        None => base.cloned(),
    };
    let mut map: BTreeMap<Key, Entry> = BTreeMap::new();
    if let Some(b) = &base_spec {
        for (s, k, v) in spec_entries(b) {
            map.insert((s.into(), k.into()), Entry { value: v, line: None });
        }
    }
    // One attenuation form given in the file implies the other.
    let has = |k: &str| file.contains_key(&("water".to_string(), k.to_string()));
    if has("c_per_m") != has("c_db_per_m") {
        map.remove(&("water".into(), "c_per_m".into()));
        map.remove(&("water".into(), "c_db_per_m".into()));
    }
    map.extend(file);
    let values = Values { map };

    let missing: Vec<String> = KEYS
        .iter()
        .filter(|(s, k, required)| *required && values.opt_str(s, k).is_none())
        .map(|(s, k, _)| format!("{s}.{k}"))
        .chain(
            (values.opt_str("water", "c_per_m").is_none() && values.opt_str("water", "c_db_per_m").is_none())
                .then(|| "water.c_db_per_m".to_string()),
        )
        .collect();
    if !missing.is_empty() {
        return Err(ScenarioError::Missing(missing));
    }

    let spec = build_spec(&values)?;
    spec.validate().map_err(|e| {
        let msg = e.to_string();
        let line = KEYS
            .iter()
            .filter(|(_, k, _)| msg.contains(k))
            .find_map(|(s, k, _)| values.raw(s, k).and_then(|e| e.line));
        ScenarioError::Invalid { line, msg }
    })?;
    Ok(spec)
}

fn build_spec(v: &Values) -> Result<LinkSpec, ScenarioError> {
    let water = match (v.opt_f64("water", "c_per_m")?, v.opt_f64("water", "c_db_per_m")?) {
        (Some(a), Some(b)) => WaterOptics::new(a, b),
        (Some(a), None) => WaterOptics::from_per_m(a),
        (None, Some(b)) => WaterOptics::from_db_per_m(b),
        (None, None) => unreachable!("checked as missing"),
    }
    .map_err(|e| v.err("water", "c_db_per_m", e.to_string()))?;

    let nlos = match (v.opt_f64("geometry", "nlos_reflectance")?, v.opt_f64("geometry", "nlos_unfolded_distance_m")?) {
        (Some(reflectance), Some(unfolded_distance_m)) => Some(NlosPath { reflectance, unfolded_distance_m }),
        (None, None) => None,
        (Some(_), None) => return Err(v.err("geometry", "nlos_reflectance", "needs nlos_unfolded_distance_m")),
        (None, Some(_)) => return Err(v.err("geometry", "nlos_unfolded_distance_m", "needs nlos_reflectance")),
    };

    let modulation_kind: ModulationKind = v.parse("link", "modulation", v.str("link", "modulation")?)?;
    let fidelity: Fidelity = match v.opt_str("link", "fidelity") {
        Some(f) => v.parse("link", "fidelity", f)?,
        None => Fidelity::Statistical,
    };

    let lc_curve = match v.str("agc", "lc_curve")? {
        "logistic" => LcCurve::Logistic {
            range_db: v.f64("agc", "lc_range_db")?,
            mid_v: v.f64("agc", "lc_mid_v")?,
            width_v: v.f64("agc", "lc_width_v")?,
        },
        "table" => LcCurve::Table(parse_lc_table(v.str("agc", "lc_table")?).map_err(|m| v.err("agc", "lc_table", m))?),
        other => return Err(v.err("agc", "lc_curve", format!("'{other}' (expected logistic or table)"))),
    };

    let frame_payload_bytes: u32 = v.parse("link", "frame_payload_bytes", v.str("link", "frame_payload_bytes")?)?;
    let burst_duration_s = v.opt_f64("fading", "burst_duration_s")?;

    Ok(LinkSpec {
        name: v.str("link", "name")?.to_string(),
        tx_power_w: v.f64("link", "tx_power_w")?,
        water,
        geometry: LinkGeometry {
            distance_m: v.f64("geometry", "distance_m")?,
            half_angle_deg: v.f64("geometry", "half_angle_deg")?,
            tx_exit_diameter_m: v.f64("geometry", "tx_exit_diameter_m")?,
            rx_aperture_m: v.f64("geometry", "rx_aperture_m")?,
            pointing_offset_m: v.f64_or("geometry", "pointing_offset_m", 0.0)?,
            k_override: v.opt_f64("geometry", "k_m2")?,
        },
        nlos,
        modulation: ModulationScheme { kind: modulation_kind, bit_rate_bps: v.f64("link", "bit_rate_bps")? },
        codec: CodecConfig {
            enabled: v.bool_or("codec", "enabled", true)?,
            outer: v.bch("outer")?,
            inner: v.bch("inner")?,
            interleaver_depth: v.usize("codec", "interleaver_depth")?,
            outer_words: v.usize("codec", "outer_words")?,
            line_interleave: v.bool_or("codec", "line_interleave", true)?,
        },
        budget_db: v.f64("link", "budget_db")?,
        sync_overhead_fraction: v.f64("link", "sync_overhead_fraction")?,
        iface_cap_bps: v.f64("link", "iface_cap_bps")?,
        frame_payload_bytes,
        receiver: ReceiverChain {
            pmt_gain_min: v.f64("agc", "pmt_gain_min")?,
            pmt_gain_max: v.f64("agc", "pmt_gain_max")?,
            lc_v_min: v.f64("agc", "lc_v_min")?,
            lc_v_max: v.f64("agc", "lc_v_max")?,
            lc_curve,
            responsivity_v_per_w: v.f64("agc", "responsivity_v_per_w")?,
        },
        agc: AgcSettings {
            window_low_v: v.f64("agc", "window_low_v")?,
            window_high_v: v.f64("agc", "window_high_v")?,
            kp: v.f64("agc", "kp")?,
            step_interval_s: v.f64("agc", "step_interval_s")?,
        },
        fading: FadingSpec {
            sigma_db: v.f64_or("fading", "sigma_db", 0.0)?,
            burst_probability: v.f64_or("fading", "burst_probability", 0.0)?,
            burst_depth_db: v.f64_or("fading", "burst_depth_db", 0.0)?,
            burst_duration_s,
        },
        snr_offset_db: v.f64("link", "snr_offset_db")?,
        fidelity,
    })
}
