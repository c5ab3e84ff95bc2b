mod hexbits;

use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uwoc_core::agc::{fit_calibration, parse_calibration_samples, CalibrationMap};
use uwoc_core::fec::{BchCode, DecodeStatus};
use uwoc_core::link::{long_term_monitor, run_scenario, Fidelity, LinkSpec};
use uwoc_core::planner::{distance_curve, plan_link};
use uwoc_core::scenario::{parse_scenario_with_base, render};
use uwoc_core::{presets, report};

#[derive(Parser)]
#[command(name = "uwoc", version, about = "Deep-sea optical link planner, simulator and codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct LinkArgs {
    /// Scenario file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in link (green-125M or blue-6M25); a config file overrides it.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Args, Clone)]
struct OutArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FecAction {
    Encode,
    Decode,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FecCode {
    Concat,
    Inner,
    Outer,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum range in every geometry model; CSV emits the loss curve.
    Plan {
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Back-solve k so the calibrated range lands here (m).
        #[arg(long, value_name = "M")]
        target_m: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        z_min: f64,
        /// Defaults to 10% past the attenuation-only range.
        #[arg(long)]
        z_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Simulate one run of the link.
    Simulate {
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 60)]
        duration_s: u64,
        #[arg(long, value_parser = parse_fidelity)]
        fidelity: Option<Fidelity>,
    },
    /// Independent epochs with a worst-case summary.
    Monitor {
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 30)]
        epochs: u32,
        /// Length of each epoch.
        #[arg(long, default_value_t = 3600)]
        duration_s: u64,
    },
    /// Encode or decode hex blocks, one per line, from standard input.
    Fec {
        action: FecAction,
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, value_enum, default_value_t = FecCode::Concat)]
        code: FecCode,
        /// Read blocks from this file instead of standard input.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Fit the receiver calibration map to `P, v, G, V` samples.
    Calibrate {
        /// Sample file; standard input when absent.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print the fully resolved scenario in config-file form.
    Config {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn parse_fidelity(s: &str) -> Result<Fidelity, String> {
    s.parse()
}

fn load_spec(args: &LinkArgs) -> Result<LinkSpec, String> {
    let base = match &args.preset {
        Some(name) => Some(presets::by_name(name).ok_or_else(|| {
            format!("unknown preset '{name}' (known: {})", presets::NAMES.join(", "))
        })?),
        None => None,
    };
    match &args.config {
        Some(path) => {
            let text = read_file(path)?;
            parse_scenario_with_base(&text, base.as_ref()).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => base.ok_or_else(|| "either --config or --preset is required".to_string()),
    }
}

fn read_file(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_input(path: Option<&Path>) -> Result<String, String> {
    match path {
        Some(p) => read_file(p),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| format!("stdin: {e}"))?;
            Ok(s)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| format!("stdout: {e}")),
    }
}

#[derive(Serialize)]
struct CalibrationReport {
    seed: u64,
    config_hash: String,
    map: CalibrationMap,
}

/// Encoder/decoder pair for the `fec` subcommand.
enum Block {
    Concat(uwoc_core::fec::FecScheme),
    Single(BchCode),
}

impl Block {
    fn message_bits(&self) -> usize {
        match self {
            Block::Concat(s) => s.frame_payload_bits(),
            Block::Single(c) => c.k(),
        }
    }
    fn code_bits(&self) -> usize {
        match self {
            Block::Concat(s) => s.frame_bits(),
            Block::Single(c) => c.n(),
        }
    }
    fn encode(&self, bits: &[u8]) -> Result<Vec<u8>, String> {
        match self {
            Block::Concat(s) => s.encode(bits),
            Block::Single(c) => c.encode(bits),
        }
        .map_err(|e| e.to_string())
    }
    /// Message bits, corrections, success.
    fn decode(&self, bits: &[u8]) -> Result<(Vec<u8>, usize, bool), String> {
        match self {
            Block::Concat(s) => s.decode(bits).map(|o| (o.payload, o.corrected_count, o.status == DecodeStatus::Ok)),
            Block::Single(c) => c.decode(bits).map(|o| (o.message, o.corrected_count, o.status == DecodeStatus::Ok)),
        }
        .map_err(|e| e.to_string())
    }
}

fn run_fec(action: FecAction, spec: &LinkSpec, code: FecCode, input: &str) -> Result<(String, String), String> {
    let cfg = &spec.codec;
    let block = match code {
        FecCode::Concat => Block::Concat(cfg.build().map_err(|e| e.to_string())?),
        FecCode::Inner => Block::Single(cfg.inner.build().map_err(|e| e.to_string())?),
        FecCode::Outer => Block::Single(cfg.outer.build().map_err(|e| e.to_string())?),
    };
    let (in_bits, out_bits) = match action {
        FecAction::Encode => (block.message_bits(), block.code_bits()),
        FecAction::Decode => (block.code_bits(), block.message_bits()),
    };
    let mut out = String::new();
    let (mut blocks, mut failures, mut corrected) = (0usize, 0usize, 0usize);
    for (i, line) in input.as_bytes().lines().enumerate() {
        let line = line.map_err(|e| format!("input: {e}"))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bits = hexbits::hex_to_bits(line, in_bits).map_err(|e| format!("input line {}: {e}", i + 1))?;
        let result = match action {
            FecAction::Encode => block.encode(&bits)?,
            FecAction::Decode => {
                let (msg, fixed, ok) = block.decode(&bits)?;
                corrected += fixed;
                failures += usize::from(!ok);
                msg
            }
        };
        debug_assert_eq!(result.len(), out_bits);
        out.push_str(&hexbits::bits_to_hex(&result));
        out.push('\n');
        blocks += 1;
    }
    let summary = match action {
        FecAction::Encode => format!("encoded {blocks} blocks ({in_bits} -> {out_bits} bits)"),
        FecAction::Decode => {
            format!("decoded {blocks} blocks ({in_bits} -> {out_bits} bits), {corrected} bits corrected, {failures} failures")
        }
    };
    Ok((out, format!("{summary}; config_hash={}", spec.config_hash())))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Plan { link, out, target_m, z_min, z_max, points } => {
            let spec = load_spec(&link)?;
            let plan = plan_link(&spec, out.seed, target_m).map_err(|e| e.to_string())?;
            let text = match out.format {
                None => report::plan_table(&plan),
                Some(Format::Json) => report::plan_json(&plan),
                Some(Format::Csv) => {
                    let z_max = z_max.unwrap_or(1.1 * plan.without_geometry.max_distance_m);
                    let mut geometry = spec.geometry;
                    geometry.k_override = plan.back_solved_k.or(geometry.k_override);
                    let curve = distance_curve(spec.budget_db, &spec.water, &geometry, z_min, z_max, points)
                        .map_err(|e| e.to_string())?;
                    report::curve_csv(&plan, &curve)
                }
            };
            emit(out.out.as_deref(), &text)
        }
        Command::Simulate { link, out, duration_s, fidelity } => {
            let mut spec = load_spec(&link)?;
            if let Some(f) = fidelity {
                spec.fidelity = f;
            }
            let r = run_scenario(&spec, duration_s, out.seed).map_err(|e| e.to_string())?;
            let text = match out.format {
                Some(Format::Csv) => report::beps_csv(&r),
                _ => report::sim_json(&r),
            };
            emit(out.out.as_deref(), &text)
        }
        Command::Monitor { link, out, epochs, duration_s } => {
            let spec = load_spec(&link)?;
            let r = long_term_monitor(&spec, epochs, duration_s, out.seed).map_err(|e| e.to_string())?;
            let text = match out.format {
                Some(Format::Csv) => report::monitor_csv(&r),
                _ => report::monitor_json(&r),
            };
            emit(out.out.as_deref(), &text)
        }
        Command::Fec { action, link, code, input, out } => {
            let spec = if link.config.is_none() && link.preset.is_none() {
                presets::green_125m()
            } else {
                load_spec(&link)?
            };
            let text = read_input(input.as_deref())?;
            let (blocks, summary) = run_fec(action, &spec, code, &text)?;
            emit(out.as_deref(), &blocks)?;
            eprintln!("{summary}");
            Ok(())
        }
        Command::Calibrate { input, out } => {
            let text = read_input(input.as_deref())?;
            let samples = parse_calibration_samples(&text).map_err(|e| e.to_string())?;
            let map = fit_calibration(&samples).map_err(|e| e.to_string())?;
            let rep = CalibrationReport { seed: out.seed, config_hash: report::content_hash(text.as_bytes()), map };
            if out.format == Some(Format::Csv) {
                return Err("calibrate only emits json".into());
            }
            let mut json = serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?;
            json.push('\n');
            emit(out.out.as_deref(), &json)
        }
        Command::Config { link, out } => {
            let spec = load_spec(&link)?;
            emit(out.as_deref(), &format!("# config_hash={}\n{}", spec.config_hash(), render(&spec)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
