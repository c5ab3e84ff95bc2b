//! Deterministic text renderings of reports.
//!
//! JSON keys follow struct field order. CSV outputs start with one `#` line
//! carrying the link name, seed and config hash, then a header row.

use sha2::{Digest, Sha256};

use crate::link::{MonitorReport, SimReport};
use crate::planner::{CurvePoint, PlanReport, RangeSolution};

/// SHA-256 of `bytes`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn meta_line(name: &str, seed: u64, config_hash: &str) -> String {
    format!("# name={name} seed={seed} config_hash={config_hash}\n")
}

pub fn sim_json(r: &SimReport) -> String {
    json(r)
}

pub fn monitor_json(r: &MonitorReport) -> String {
    json(r)
}

pub fn plan_json(r: &PlanReport) -> String {
    json(r)
}

/// Columns: second, errors, margin_db, packet_losses.
pub fn beps_csv(r: &SimReport) -> String {
    let mut out = meta_line(&r.name, r.seed, &r.config_hash);
    out.push_str("second,errors,margin_db,packet_losses\n");
    for (i, errors) in r.beps_series.iter().enumerate() {
        out.push_str(&format!("{i},{errors},{},{}\n", r.margin_trace_db[i], r.packet_loss_series[i]));
    }
    out
}

/// One row per epoch.
pub fn monitor_csv(r: &MonitorReport) -> String {
    let mut out = meta_line(&r.name, r.seed, &r.config_hash);
    out.push_str("epoch,seed,pre_fec_bit_errors,pre_fec_ber,post_fec_bit_errors,post_fec_ber,decode_failures,packet_losses\n");
    for (i, e) in r.reports.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            e.seed,
            e.pre_fec_bit_errors,
            e.pre_fec_ber,
            e.post_fec_bit_errors,
            e.post_fec_ber,
            e.decode_failures,
            e.packet_loss_count
        ));
    }
    out
}

/// Columns: z_m, loss_db_with_geometry, loss_db_without, budget_db.
pub fn curve_csv(plan: &PlanReport, curve: &[CurvePoint]) -> String {
    let mut out = meta_line(&plan.name, plan.seed, &plan.config_hash);
    out.push_str("z_m,loss_db_with_geometry,loss_db_without,budget_db\n");
    for p in curve {
        out.push_str(&format!("{},{},{},{}\n", p.z_m, p.loss_db_with_geometry, p.loss_db_without, p.budget_db));
    }
    out
}

fn range_row(label: &str, s: &RangeSolution) -> String {
    let k = s.k_used.map_or("-".to_string(), |k| format!("{k:.6}"));
    format!("{label:<22}{:>12.3}{:>14.2e}{:>14}\n", s.max_distance_m, s.residual_db, k)
}

/// Human-readable summary for the terminal.
pub fn plan_table(r: &PlanReport) -> String {
    let mut out = format!(
        "link {}  seed {}  config {}\nbudget {:.2} dB  c {:.3} dB/m  spot at {} m {:.4} m  margin {:.2} dB\n\n",
        r.name, r.seed, r.config_hash, r.budget_db, r.c_db_per_m, r.distance_m, r.spot_diameter_m, r.margin_db
    );
    out.push_str(&format!("{:<22}{:>12}{:>14}{:>14}\n", "model", "max_dist_m", "residual_db", "k_m2"));
    out.push_str(&range_row("without_geometry", &r.without_geometry));
    out.push_str(&range_row("physical_geometry", &r.physical_geometry));
    if let Some(c) = &r.calibrated_geometry {
        out.push_str(&range_row("calibrated_k", c));
    }
    out
}
