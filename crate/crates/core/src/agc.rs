//! PMT + liquid-crystal receive chain, its calibration fit, and the
//! amplitude-regulation loop.
//!
//! The chain output is `V = R · P · T(v) · G`: responsivity `R` (V/W at unit
//! gain), optical power `P`, LC transmittance `T` at control voltage `v`, and
//! PMT gain `G`. The loop keeps `V` inside a target window by moving the LC
//! first when the signal is too strong and the PMT gain first when it is too
//! weak.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AgcError {
    #[error("invalid receiver chain: {0}")]
    Chain(String),
    #[error("calibration fit: {0}")]
    Fit(String),
    #[error("calibration file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid AGC settings: {0}")]
    Settings(String),
}

/// Voltage → transmittance law of the LC attenuator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LcCurve {
    /// Logistic attenuation in dB, rescaled so the attenuation is exactly 0 at
    /// `v_min` and `range_db` at `v_max`.
    Logistic { range_db: f64, mid_v: f64, width_v: f64 },
    /// Measured (voltage, transmittance) points, linearly interpolated in dB.
    Table(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverChain {
    pub pmt_gain_min: f64,
    pub pmt_gain_max: f64,
    pub lc_v_min: f64,
    pub lc_v_max: f64,
    pub lc_curve: LcCurve,
    pub responsivity_v_per_w: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Linear interpolation over sorted `(x, y)` knots, clamped at the ends.
fn interp(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|&(kx, _)| kx <= x);
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl Default for ReceiverChain {
    /// PMT gain 1..1e7, LC 0–5 V with 20 dB of logistic attenuation, 10 V/W.
    fn default() -> Self {
        Self {
            pmt_gain_min: 1.0,
            pmt_gain_max: 1e7,
            lc_v_min: 0.0,
            lc_v_max: 5.0,
            lc_curve: LcCurve::Logistic { range_db: 20.0, mid_v: 2.5, width_v: 0.5 },
            responsivity_v_per_w: 10.0,
        }
    }
}

impl ReceiverChain {
    pub fn validate(&self) -> Result<(), AgcError> {
        let bad = |m: String| Err(AgcError::Chain(m));
        if !(self.pmt_gain_min > 0.0 && self.pmt_gain_min < self.pmt_gain_max) {
            return bad(format!("gain range [{}, {}]", self.pmt_gain_min, self.pmt_gain_max));
        }
        if !(self.lc_v_min < self.lc_v_max) {
            return bad(format!("LC voltage range [{}, {}]", self.lc_v_min, self.lc_v_max));
        }
        if !(self.responsivity_v_per_w > 0.0) {
            return bad(format!("responsivity {}", self.responsivity_v_per_w));
        }
        match &self.lc_curve {
            LcCurve::Logistic { range_db, width_v, .. } => {
                if !(*range_db >= 0.0 && *width_v > 0.0) {
                    return bad("logistic LC curve needs range_db >= 0 and width_v > 0".into());
                }
            }
            LcCurve::Table(points) => {
                if points.len() < 2 {
                    return bad("LC table needs at least two points".into());
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0) || w[1].1 > w[0].1) {
                    return bad("LC table must have increasing voltages and non-increasing transmittance".into());
                }
                if points.iter().any(|&(_, t)| !(t > 0.0 && t <= 1.0)) {
                    return bad("LC table transmittance must lie in (0, 1]".into());
                }
                if (points[0].0 - self.lc_v_min).abs() > 1e-12 || (points[0].1 - 1.0).abs() > 1e-12 {
                    return bad("LC table must start at (lc_v_min, 1.0)".into());
                }
            }
        }
        Ok(())
    }

    pub fn transmittance(&self, v: f64) -> f64 {
        let v = v.clamp(self.lc_v_min, self.lc_v_max);
        match &self.lc_curve {
            LcCurve::Logistic { range_db, mid_v, width_v } => {
                let s = |x: f64| logistic((x - mid_v) / width_v);
                let (s0, s1) = (s(self.lc_v_min), s(self.lc_v_max));
                let atten_db = range_db * (s(v) - s0) / (s1 - s0);
                10f64.powf(-atten_db / 10.0)
            }
            LcCurve::Table(points) => {
                let db: Vec<(f64, f64)> = points.iter().map(|&(x, t)| (x, 10.0 * t.log10())).collect();
                10f64.powf(interp(&db, v) / 10.0)
            }
        }
    }

    pub fn amplitude(&self, p_opt_w: f64, lc_v: f64, gain: f64) -> f64 {
        self.responsivity_v_per_w * p_opt_w * self.transmittance(lc_v) * gain
    }

    /// Weakest and strongest optical power the chain can bring into `window`.
    pub fn dynamic_range_w(&self, window: (f64, f64)) -> (f64, f64) {
        let t_min = self.transmittance(self.lc_v_max);
        let lo = window.0 / (self.responsivity_v_per_w * self.pmt_gain_max);
        let hi = window.1 / (self.responsivity_v_per_w * t_min * self.pmt_gain_min);
        (lo, hi)
    }
}

/// One calibration measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub p_w: f64,
    pub lc_v: f64,
    pub gain: f64,
    pub measured_v: f64,
}

/// Parses `P_watts, lc_volts, gain, measured_volts` lines. Commas, semicolons,
/// tabs or spaces separate fields; blank lines and `#` comments are skipped.
pub fn parse_calibration_samples(text: &str) -> Result<Vec<CalibrationSample>, AgcError> {
    let mut out = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> =
            line.split(|c: char| c == ',' || c == ';' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            // The first non-comment line may be a column header.
            Err(_) if !seen_data => {
                seen_data = true;
                continue;
            }
            Err(e) => return Err(AgcError::Parse { line: i + 1, msg: e.to_string() }),
        };
        seen_data = true;
        if values.len() != 4 {
            return Err(AgcError::Parse { line: i + 1, msg: format!("expected 4 fields, found {}", values.len()) });
        }
        out.push(CalibrationSample { p_w: values[0], lc_v: values[1], gain: values[2], measured_v: values[3] });
    }
    Ok(out)
}

/// Fitted model `V = R · P · T̂(v) · G^γ`, with `T̂` tabulated at the
/// calibration voltages (log-linear in between) and anchored to 1 at the
/// lowest one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub responsivity_v_per_w: f64,
    pub gain_exponent: f64,
    /// (voltage, ln T) knots, voltages increasing, ln T non-increasing.
    pub lc_log_table: Vec<(f64, f64)>,
    pub gain_min: f64,
    pub gain_max: f64,
    pub samples: usize,
    /// RMS and worst absolute residual of ln V.
    pub residual_rms: f64,
    pub residual_max: f64,
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    v
}

/// Least-squares fit of the multiplicative chain model in the log domain.
pub fn fit_calibration(samples: &[CalibrationSample]) -> Result<CalibrationMap, AgcError> {
    if samples.len() < 8 {
        return Err(AgcError::Fit(format!("need at least 8 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !(s.p_w > 0.0 && s.gain > 0.0 && s.measured_v > 0.0) || !s.lc_v.is_finite()) {
        return Err(AgcError::Fit("power, gain and measured amplitude must be positive".into()));
    }
    let voltages = distinct_sorted(samples.iter().map(|s| s.lc_v));
    let gains = distinct_sorted(samples.iter().map(|s| s.gain));
    if voltages.len() < 2 {
        return Err(AgcError::Fit("all samples share one LC voltage; transmittance is not identifiable".into()));
    }
    if gains.len() < 2 {
        return Err(AgcError::Fit("all samples share one PMT gain; gain law is not identifiable".into()));
    }
    // Unknowns: ln R, γ, ln T at voltages[1..].
    let cols = 2 + voltages.len() - 1;
    let mut a = DMatrix::<f64>::zeros(samples.len(), cols);
    let mut b = DVector::<f64>::zeros(samples.len());
    let v_index = |v: f64| voltages.iter().position(|&x| (x - v).abs() <= 1e-12 * x.abs().max(1.0)).unwrap();
    for (row, s) in samples.iter().enumerate() {
        a[(row, 0)] = 1.0;
        a[(row, 1)] = s.gain.ln();
        let vi = v_index(s.lc_v);
        if vi > 0 {
            a[(row, 1 + vi)] = 1.0;
        }
        b[row] = s.measured_v.ln() - s.p_w.ln();
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.rank(smax * 1e-10);
    if rank < cols {
        return Err(AgcError::Fit(format!("rank-deficient design ({rank} of {cols})")));
    }
    let theta = svd.solve(&b, smax * 1e-12).map_err(|e| AgcError::Fit(e.to_string()))?;
    let resid = &a * &theta - &b;
    let residual_rms = (resid.norm_squared() / samples.len() as f64).sqrt();
    let residual_max = resid.amax();

    let mut table = Vec::with_capacity(voltages.len());
    let mut running = 0.0f64;
    for (i, &v) in voltages.iter().enumerate() {
        let ln_t = if i == 0 { 0.0 } else { theta[1 + i].min(0.0) };
        // Keep the table monotone even when noise makes a knot rise.
        running = if i == 0 { ln_t } else { running.min(ln_t) };
        table.push((v, running));
    }
    Ok(CalibrationMap {
        responsivity_v_per_w: theta[0].exp(),
        gain_exponent: theta[1],
        lc_log_table: table,
        gain_min: gains[0],
        gain_max: gains[gains.len() - 1],
        samples: samples.len(),
        residual_rms,
        residual_max,
    })
}

/// Synthetic noiseless calibration sweep of a chain: `voltage_points` LC
/// settings across its range at three gains and two powers.
pub fn calibration_sweep(chain: &ReceiverChain, voltage_points: usize) -> Vec<CalibrationSample> {
    let n = voltage_points.max(2);
    let gains = [chain.pmt_gain_min, (chain.pmt_gain_min * chain.pmt_gain_max).sqrt(), chain.pmt_gain_max];
    let mut out = Vec::new();
    for i in 0..n {
        let v = chain.lc_v_min + (chain.lc_v_max - chain.lc_v_min) * i as f64 / (n - 1) as f64;
        for &g in &gains {
            for p in [1e-6, 1e-4] {
                out.push(CalibrationSample { p_w: p, lc_v: v, gain: g, measured_v: chain.amplitude(p, v, g) });
            }
        }
    }
    out
}

impl CalibrationMap {
    /// Fits the map to a dense noiseless sweep of `chain`.
    pub fn from_chain(chain: &ReceiverChain) -> Result<Self, AgcError> {
        chain.validate()?;
        let mut map = fit_calibration(&calibration_sweep(chain, 81))?;
        map.gain_min = chain.pmt_gain_min;
        map.gain_max = chain.pmt_gain_max;
        Ok(map)
    }

    pub fn lc_v_min(&self) -> f64 {
        self.lc_log_table[0].0
    }

    pub fn lc_v_max(&self) -> f64 {
        self.lc_log_table[self.lc_log_table.len() - 1].0
    }

    pub fn transmittance(&self, v: f64) -> f64 {
        interp(&self.lc_log_table, v).exp()
    }

    /// Strongest attenuation the LC reaches, as transmittance in dB (≤ 0).
    pub fn min_transmittance_db(&self) -> f64 {
        10.0 * self.transmittance(self.lc_v_max()).log10()
    }

    pub fn predict_amplitude(&self, p_opt_w: f64, lc_v: f64, gain: f64) -> f64 {
        self.responsivity_v_per_w * p_opt_w * self.transmittance(lc_v) * gain.powf(self.gain_exponent)
    }

    /// Lowest voltage whose fitted transmittance is at or below `t_db`.
    pub fn voltage_for_transmittance_db(&self, t_db: f64) -> f64 {
        let target = t_db / (10.0 * std::f64::consts::LOG10_E);
        let t = &self.lc_log_table;
        if target >= t[0].1 {
            return t[0].0;
        }
        for w in t.windows(2) {
            let ((v0, l0), (v1, l1)) = (w[0], w[1]);
            if target >= l1 {
                if l1 == l0 {
                    return v0;
                }
                return v0 + (v1 - v0) * (target - l0) / (l1 - l0);
            }
        }
        t[t.len() - 1].0
    }

    fn gain_db(&self, gain: f64) -> f64 {
        10.0 * self.gain_exponent * gain.log10()
    }

    fn gain_from_db(&self, db: f64) -> f64 {
        10f64.powf(db / (10.0 * self.gain_exponent))
    }
}

/// Loop settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgcSettings {
    pub window_low_v: f64,
    pub window_high_v: f64,
    /// Fraction of the dB error corrected per step.
    pub kp: f64,
    /// Time between loop steps.
    pub step_interval_s: f64,
}

impl Default for AgcSettings {
    fn default() -> Self {
        Self { window_low_v: 0.3, window_high_v: 0.6, kp: 0.8, step_interval_s: 0.01 }
    }
}

impl AgcSettings {
    pub fn validate(&self) -> Result<(), AgcError> {
        if !(self.window_low_v > 0.0 && self.window_low_v < self.window_high_v) {
            return Err(AgcError::Settings(format!(
                "window [{}, {}] must satisfy 0 < low < high",
                self.window_low_v, self.window_high_v
            )));
        }
        if !(self.kp > 0.0 && self.kp <= 1.0) {
            return Err(AgcError::Settings(format!("kp = {} not in (0, 1]", self.kp)));
        }
        if !(self.step_interval_s > 0.0 && self.step_interval_s <= 1.0) {
            return Err(AgcError::Settings(format!("step_interval_s = {} not in (0, 1]", self.step_interval_s)));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.window_low_v, self.window_high_v)
    }

    /// Geometric center of the window.
    pub fn center_v(&self) -> f64 {
        (self.window_low_v * self.window_high_v).sqrt()
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.window_low_v && v <= self.window_high_v
    }

    /// How far `v` sits outside the window, in dB of amplitude ratio; 0 inside.
    pub fn excursion_db(&self, v: f64) -> f64 {
        if v <= 0.0 {
            f64::INFINITY
        } else if v < self.window_low_v {
            10.0 * (self.window_low_v / v).log10()
        } else if v > self.window_high_v {
            10.0 * (v / self.window_high_v).log10()
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgcState {
    pub lc_voltage: f64,
    pub pmt_gain: f64,
    pub target_window: (f64, f64),
    pub last_measured_v: Option<f64>,
    /// Set when the last step wanted to go past an actuator limit.
    pub saturated: bool,
}

impl AgcState {
    pub fn new(lc_voltage: f64, pmt_gain: f64, settings: &AgcSettings) -> Self {
        Self { lc_voltage, pmt_gain, target_window: settings.window(), last_measured_v: None, saturated: false }
    }
}

/// One control step from a measured amplitude.
///
/// Inside the window nothing moves. Outside, the chain gain is changed by
/// `-kp` times the dB error from the window center: attenuation is added at
/// the LC before the PMT gain is lowered, and gain is raised before LC
/// attenuation is removed. Actuators are clamped to their ranges; a request
/// that cannot be met raises `saturated`.
pub fn agc_step(state: &AgcState, measured_v: f64, map: &CalibrationMap, settings: &AgcSettings) -> AgcState {
    let mut next = AgcState { last_measured_v: Some(measured_v), target_window: settings.window(), ..*state };
    if settings.contains(measured_v) {
        next.saturated = false;
        return next;
    }
    let g_lo = map.gain_db(map.gain_min);
    let g_hi = map.gain_db(map.gain_max);
    let t_lo = map.min_transmittance_db();
    let mut gain_db = map.gain_db(state.pmt_gain).clamp(g_lo, g_hi);
    let mut t_db = (10.0 * map.transmittance(state.lc_voltage).log10()).clamp(t_lo, 0.0);

    let mut delta = if measured_v > 0.0 {
        -settings.kp * 10.0 * (measured_v / settings.center_v()).log10()
    } else {
        f64::INFINITY
    };
    if delta < 0.0 {
        let lc_move = delta.max(t_lo - t_db);
        t_db += lc_move;
        delta -= lc_move;
        let g_move = delta.max(g_lo - gain_db);
        gain_db += g_move;
        delta -= g_move;
    } else {
        let g_move = delta.min(g_hi - gain_db);
        gain_db += g_move;
        delta -= g_move;
        let lc_move = delta.min(-t_db);
        t_db += lc_move;
        delta -= lc_move;
    }
    next.saturated = delta.abs() > 1e-9;
    next.pmt_gain = if gain_db >= g_hi - 1e-9 {
        map.gain_max
    } else if gain_db <= g_lo + 1e-9 {
        map.gain_min
    } else {
        map.gain_from_db(gain_db)
    };
    next.lc_voltage = map.voltage_for_transmittance_db(t_db).clamp(map.lc_v_min(), map.lc_v_max());
    next
}

/// Brings a fresh state onto the operating point for a known received power
/// using the calibration model alone.
pub fn acquire(map: &CalibrationMap, settings: &AgcSettings, p_opt_w: f64) -> AgcState {
    let mut state = AgcState::new(map.lc_v_min(), map.gain_min, settings);
    for _ in 0..50 {
        let predicted = map.predict_amplitude(p_opt_w, state.lc_voltage, state.pmt_gain);
        let next = agc_step(&state, predicted, map, settings);
        if next == state || settings.contains(predicted) {
            return next;
        }
        state = next;
    }
    state
}
