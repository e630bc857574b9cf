use std::fs;
use std::process::{Command, Output};

use onebit_mimo::cli::{read_csv, CSV_HEADER};
use onebit_mimo::ReceiverKind;

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("spawn simulate")
}

const SMALL: [&str; 12] = [
    "--k",
    "2",
    "--n",
    "8",
    "--mod",
    "qpsk",
    "--snr-start",
    "0",
    "--snr-stop",
    "10",
    "--max-trials",
    "2000",
];

#[test]
fn manual_run_writes_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let mut args = SMALL.to_vec();
    args.extend(["--receivers", "mrc,bmmse", "--out", out.to_str().unwrap()]);
    let res = simulate(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let records = read_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 2 * 3);
    assert_eq!(records[0].kind, ReceiverKind::Mrc);
    assert_eq!(records[0].snr_db, 0.0);
    assert!(records.iter().all(|r| r.k == 2 && r.n == 8 && r.trials <= 2000));
}

#[test]
fn stdout_when_no_out_path() {
    let mut args = SMALL.to_vec();
    args.extend(["--receivers", "zf"]);
    let res = simulate(&args);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(read_csv(text.as_bytes()).unwrap().len(), 3);
}

#[test]
fn json_output_carries_meta() {
    let mut args = SMALL.to_vec();
    args.extend(["--receivers", "bzf", "--seed", "9", "--format", "json"]);
    let res = simulate(&args);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["meta"]["seed"], 9);
    assert!(v["meta"]["git_describe"].is_string());
    assert_eq!(v["records"].as_array().unwrap().len(), 3);
    assert_eq!(v["records"][0]["receiver"], "bzf");
}

#[test]
fn same_seed_same_bytes() {
    let mut args = SMALL.to_vec();
    args.extend(["--seed", "3"]);
    assert_eq!(simulate(&args).stdout, simulate(&args).stdout);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "# small run\nk = 2\nn = 8\nmod = qpsk\nsnr-start = 5\nreceivers = mrc\nmax-trials = 1000\n",
    )
    .unwrap();
    let res = simulate(&["--config", conf.to_str().unwrap(), "--receivers", "bmrc"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let records = read_csv(res.stdout.as_slice()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].kind, ReceiverKind::Bmrc);
    assert_eq!(records[0].snr_db, 5.0);
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let res = simulate(&["--k", "4", "--n", "2", "--mod", "qpsk", "--snr-start", "0"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--n"));

    let mut args = SMALL.to_vec();
    args.extend(["--receivers", "mrc,nope"]);
    let res = simulate(&args);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--receivers"));

    assert_eq!(simulate(&["--preset", "fig2", "--k", "4"]).status.code(), Some(2));
    assert_eq!(simulate(&["--bogus"]).status.code(), Some(2));
}

#[test]
fn io_failure_exits_1_without_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("r.csv");
    let mut args = SMALL.to_vec();
    args.extend(["--receivers", "mrc", "--out", out.to_str().unwrap()]);
    let res = simulate(&args);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}
