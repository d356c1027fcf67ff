//! Command-line behavior: dispatch, determinism, exit codes and report
//! formats.

use std::path::{Path, PathBuf};
use std::process::Command;

fn wfpad() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wfpad"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wfpad-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const INPUT: &str = "0\t514\n0.1\t600\n0.25\t-1500\n0.5\t-514\n1.0\t300\n";

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tmp_dir("determinism");
    let input = dir.join("in.trace");
    write(&input, INPUT);

    for defense in ["tamaraw", "front", "randomwt"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.join(format!("{defense}-{run}.trace"));
            let mut cmd = wfpad();
            cmd.args(["simulate", defense, "--seed", "7"])
                .args(["-i"])
                .arg(&input)
                .args(["-o"])
                .arg(&out);
            if defense == "tamaraw" {
                cmd.args(["--strategy", "optimistic"]);
            }
            let status = cmd.status().unwrap();
            assert!(status.success(), "{defense} run {run}");
            outputs.push(std::fs::read(&out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{defense} not byte-identical");
        assert!(!outputs[0].is_empty());
    }

    // A different seed changes randomized outputs.
    let out = dir.join("front-other-seed.trace");
    wfpad()
        .args(["simulate", "front", "--seed", "8"])
        .args(["-i"])
        .arg(&input)
        .args(["-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert_ne!(
        std::fs::read(&out).unwrap(),
        std::fs::read(dir.join("front-0.trace")).unwrap()
    );
}

#[test]
fn usage_errors_exit_2() {
    let status = wfpad().arg("simulate").status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = wfpad().arg("frobnicate").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    // Missing seed for a randomized defense.
    let dir = tmp_dir("runtime-errors");
    let input = dir.join("in.trace");
    write(&input, INPUT);
    let out = wfpad()
        .args(["simulate", "front"])
        .args(["-i"])
        .arg(&input)
        .args(["-o"])
        .arg(dir.join("out.trace"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    // Strategy on a non-tamaraw defense.
    let status = wfpad()
        .args(["simulate", "front", "--seed", "1", "--strategy", "optimistic"])
        .args(["-i"])
        .arg(&input)
        .args(["-o"])
        .arg(dir.join("out.trace"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Unreadable input.
    let status = wfpad()
        .args(["simulate", "tamaraw", "-i", "/nonexistent.trace"])
        .args(["-o"])
        .arg(dir.join("out.trace"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn overhead_report_has_per_pair_rows_and_means() {
    let dir = tmp_dir("overhead");
    let undefended = dir.join("w.trace");
    write(&undefended, "0\t500\n10\t-500\n");
    let defended = dir.join("d.trace");
    write(
        &defended,
        "0\t500\tR\n10\t-500\tR\n13\t-500\tR\n13\t920\tD\n",
    );
    let manifest = dir.join("pairs.tsv");
    write(
        &manifest,
        &format!("{}\t{}\n", undefended.display(), defended.display()),
    );
    let report = dir.join("report.tsv");
    let status = wfpad()
        .args(["overhead", "--pairs"])
        .arg(&manifest)
        .args(["-o"])
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());

    let text = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "undefended\tdefended\tdata_ratio\ttime_ratio");
    assert!(lines[1].ends_with("\t1.42\t0.3"));
    assert_eq!(lines[2], "mean\t*\t1.42\t0.3");
}

#[test]
fn genconf_output_is_accepted_by_the_proxies() {
    let dir = tmp_dir("genconf");
    let config = dir.join("bridge.conf");
    let status = wfpad()
        .args(["genconf", "tamaraw", "-o"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&config).unwrap();
    assert!(text.contains("defense = tamaraw"));
    assert!(text.contains("tamaraw.rho_out_ms = 12"));
    assert!(text.contains("tamaraw.rho_in_ms = 4"));
    assert!(text.contains("tamaraw.L = 200"));
    wfpad_tunnel::config::ProxyConfig::parse(&text).unwrap();
}

#[test]
fn replay_runs_a_loopback_pair_and_writes_captures() {
    let dir = tmp_dir("replay");
    let script = dir.join("script.trace");
    write(&script, "0\t300\n0.05\t-600\n0.2\t300\n0.3\t-900\n");
    let captures = dir.join("captures");
    let out = wfpad()
        .args(["replay", "--defense", "front", "--seed", "3", "--script"])
        .arg(&script)
        .args(["--capture-dir"])
        .arg(&captures)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("time_overhead"), "stdout: {stdout}");

    let client = std::fs::read_to_string(captures.join("client.trace")).unwrap();
    let bridge = std::fs::read_to_string(captures.join("bridge.trace")).unwrap();
    let parsed: wfpad::Trace64 = wfpad::trace::parse_trace(&client).unwrap();
    assert!(parsed.len() >= 4);
    assert!(!bridge.is_empty());
}

#[test]
fn help_documents_the_table_defaults() {
    let out = wfpad().args(["simulate", "--help"]).output().unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "rho_out=12ms",
        "rho_in=4ms",
        "L=200",
        "N_out=N_in=3000",
        "W_min=1s",
        "W_max=13s",
        "N_real=4/45",
        "N_fake=8/90",
        "p_fake=0.4",
        "t_talkie=500ms",
    ] {
        assert!(help.contains(needle), "help missing {needle}: {help}");
    }
}
