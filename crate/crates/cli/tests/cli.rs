use std::io::Write;
use std::process::{Command, Output, Stdio};

fn uwoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwoc")).args(args).output().unwrap()
}

fn uwoc_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_uwoc"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn assert_error(o: &Output, needle: &str) {
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains(needle), "{err}");
}

#[test]
fn bad_inputs_fail_with_one_line() {
    assert_error(&uwoc(&["plan", "--preset", "red-1G"]), "unknown preset");
    assert_error(&uwoc(&["simulate"]), "--config or --preset");
    assert_error(&uwoc(&["plan", "--config", "/nonexistent/x.conf"]), "/nonexistent/x.conf");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "preset = green-125M\n[link]\nbit_rate = 5\n").unwrap();
    assert_error(&uwoc(&["simulate", "--config", path.to_str().unwrap()]), "line 3");

    std::fs::write(&path, "preset = green-125M\n[geometry]\ndistance_m = -3\n").unwrap();
    assert_error(&uwoc(&["plan", "--config", path.to_str().unwrap()]), "distance_m");
}

#[test]
fn rendered_config_reloads_to_same_hash() {
    let first = stdout(&uwoc(&["config", "--preset", "blue-6M25"]));
    let hash = first.lines().next().unwrap().strip_prefix("# config_hash=").unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blue.conf");
    std::fs::write(&path, &first).unwrap();
    let second = stdout(&uwoc(&["config", "--config", path.to_str().unwrap()]));
    assert_eq!(first, second);

    let plan: serde_json::Value =
        serde_json::from_str(&stdout(&uwoc(&["plan", "--config", path.to_str().unwrap(), "--format", "json"]))).unwrap();
    assert_eq!(plan["config_hash"], hash.as_str());
}

#[test]
fn fec_roundtrip_through_hex() {
    let msg: String = (0..1930usize.div_ceil(4)).map(|i| char::from_digit((i * 5 % 16) as u32, 16).unwrap()).collect();
    // 1930 bits leaves two padding bits in the last digit.
    let msg = format!("{}0", &msg[..msg.len() - 1]);
    let enc = uwoc_stdin(&["fec", "encode", "--code", "inner"], &format!("{msg}\n"));
    let word = stdout(&enc);
    assert!(String::from_utf8_lossy(&enc.stderr).contains("config_hash="));

    // Ten flipped bits, one per touched digit, within t.
    let mut digits: Vec<u32> = word.trim().chars().map(|c| c.to_digit(16).unwrap()).collect();
    for i in 0..10 {
        digits[i * 40] ^= 0x8;
    }
    let corrupted: String = digits.iter().map(|&d| char::from_digit(d, 16).unwrap()).collect();
    let dec = uwoc_stdin(&["fec", "decode", "--code", "inner"], &format!("{corrupted}\n"));
    assert_eq!(stdout(&dec).trim(), msg);
    assert!(String::from_utf8_lossy(&dec.stderr).contains("10 bits corrected, 0 failures"));

    assert_error(&uwoc_stdin(&["fec", "decode"], "abc\n"), "input line 1");
}

#[test]
fn simulate_csv_carries_metadata() {
    let csv = stdout(&uwoc(&["simulate", "--preset", "green-125M", "--duration-s", "5", "--seed", "9", "--format", "csv"]));
    let mut lines = csv.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# name=green-125M seed=9 config_hash="));
    assert_eq!(lines.next().unwrap(), "second,errors,margin_db,packet_losses");
    assert_eq!(lines.count(), 5);
}

#[test]
fn monitor_json_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let o = uwoc(&[
        "monitor", "--preset", "blue-6M25", "--epochs", "3", "--duration-s", "20", "--seed", "4", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(stdout(&o).is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["epochs"], 3);
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
}

#[test]
fn plan_csv_curve() {
    let csv = stdout(&uwoc(&["plan", "--preset", "green-125M", "--format", "csv", "--points", "20"]));
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 20);
    let first: Vec<f64> = rows[0].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 1.0);
    assert!(first[1] >= first[2]);
}

#[test]
fn calibrate_from_stdin() {
    let chain = uwoc_core::presets::green_125m().receiver;
    let mut samples = String::from("# P v G V\n");
    for s in uwoc_core::agc::calibration_sweep(&chain, 12) {
        samples.push_str(&format!("{} {} {} {}\n", s.p_w, s.lc_v, s.gain, s.measured_v));
    }
    let o = uwoc_stdin(&["calibrate", "--seed", "5"], &samples);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert!(v["map"].is_object());
}
