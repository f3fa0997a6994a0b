use std::fs;
use std::path::Path;

use forrelation_lab::cli::run;
use forrelation_lab::formats::{decode_world, encode_world};
use forrelation_lab::report::CSV_HEADER;
use forrelation_core::oracle::{sample_prf_world, sample_trapdoor_world, OracleWorld, ScaleProfile};
use proptest::prelude::*;

fn forrel(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("forrel").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sampled_prf_world_decodes_to_its_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.bin");
    let (code, out) = forrel(&["sample-world", "--kind", "prf", "--n", "2", "--ell", "7", "--seed", "5", "--out", path(&w)]);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(summary["blocks"], 16);
    assert_eq!(summary["encoded_bits"], "4096");
    let (_, loaded) = forrel(&["load", "--world", path(&w)]);
    let loaded: serde_json::Value = serde_json::from_str(loaded.trim()).unwrap();
    assert_eq!(loaded["sha256"], summary["sha256"]);
    for k in ["00", "01", "10", "11"] {
        for x in ["00", "11"] {
            let (code, out) = forrel(&["decode", "--world", path(&w), "--k", k, "--x", x]);
            assert_eq!(code, 0);
            assert!(out.contains("match=true"), "{k} {x}: {out}");
        }
    }
}

#[test]
fn trapdoor_blocks_decode_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("t.bin");
    assert_eq!(forrel(&["sample-world", "--kind", "trapdoor", "--n", "1", "--ell", "6", "--out", path(&w)]).0, 0);
    for block in ["g/1/2", "f/101/0/5", "i/0/110011/1"] {
        let (code, out) = forrel(&["decode", "--world", path(&w), "--block", block]);
        assert_eq!(code, 0, "{block}");
        assert!(out.contains("match=true"), "{block}: {out}");
    }
    assert_eq!(forrel(&["decode", "--world", path(&w), "--k", "0", "--x", "0"]).0, 2);
    assert_eq!(forrel(&["decode", "--world", path(&w), "--block", "g/1/9"]).0, 2);
}

#[test]
fn precondition_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.bin");
    forrel(&["sample-world", "--kind", "prf", "--n", "2", "--ell", "4", "--out", path(&w)]);
    assert_eq!(forrel(&["no-such-command"]).0, 2);
    assert_eq!(forrel(&["decode", "--world", path(&w), "--k", "000", "--x", "00"]).0, 2);
    assert_eq!(forrel(&["load", "--world", path(&dir.path().join("missing.bin"))]).0, 2);
    assert_eq!(forrel(&["prf-game", "--adversary", "nonsense"]).0, 2);
    assert_eq!(forrel(&["gw-check", "--K", "5", "--M", "3"]).0, 2);
    assert_eq!(forrel(&["sample-world", "--kind", "prf", "--n", "9", "--ell", "20", "--out", path(&w)]).0, 2);
    fs::write(&w, b"not a world").unwrap();
    assert_eq!(forrel(&["load", "--world", path(&w)]).0, 2);
    assert_eq!(forrel(&["--help"]).0, 0);
}

#[test]
fn gw_check_reports_identity() {
    let (code, out) = forrel(&["gw-check", "--K", "3", "--M", "2"]);
    assert_eq!(code, 0);
    assert!(out.lines().last().unwrap() == "averaging identity: PASS");
    assert!(!out.contains("MISMATCH"));
}

#[test]
fn np_demo_finds_a_one_of_a() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.bin");
    forrel(&["sample-world", "--kind", "prf", "--n", "2", "--ell", "3", "--out", path(&w)]);
    let sat = dir.path().join("sat.net");
    fs::write(&sat, "witnesses 8\na ORACLE_A w0 w1 w2 w3 w4 w5 w6 w7\noutput a\n").unwrap();
    let (code, out) = forrel(&["np-demo", "--world", path(&w), "--target", path(&sat)]);
    assert_eq!(code, 0);
    assert!(out.contains("verified true"), "{out}");
    let unsat = dir.path().join("unsat.net");
    fs::write(&unsat, "witnesses 2\na WIT 0\nb NOT a\nc AND a b\noutput c\n").unwrap();
    let (code, out) = forrel(&["np-demo", "--world", path(&w), "--target", path(&unsat)]);
    assert_eq!(code, 0);
    assert!(out.contains("witness none"), "{out}");
    let bad = dir.path().join("bad.net");
    fs::write(&bad, "witnesses 1\na WIT 3\noutput a\n").unwrap();
    assert_eq!(forrel(&["np-demo", "--world", path(&w), "--target", path(&bad)]).0, 2);
}

#[test]
fn csv_is_reproducible_and_time_goes_to_events() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, ev) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("ev.jsonl"));
    let args = |csv: &Path| {
        vec!["prf-game", "--adversary", "biased-match", "--n", "2", "--ell", "5", "--trials", "200", "--seed", "9", "--query-cap", "none", "--csv", path(csv)]
            .into_iter()
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    let mut first = args(&a);
    first.extend(["--events".to_string(), path(&ev).to_string()]);
    let (c1, out1) = forrel(&first.iter().map(String::as_str).collect::<Vec<_>>());
    let (c2, out2) = forrel(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(out1, out2);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(text.contains(",advantage,") && text.contains("world_sha256="));
    assert!(!text.contains("wall"));
    let events = fs::read_to_string(&ev).unwrap();
    assert!(events.lines().count() >= 3);
    for line in events.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["wall_ms"].is_number());
    }
}

#[test]
fn netlist_adversary_reads_its_window() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("adv.net");
    // accept iff the challenge function is 1 at 00
    fs::write(&net, "input H 00 0\ng NOT x0\nh NOT g\noutput h\n").unwrap();
    let spec = format!("netlist:{}", path(&net));
    let (code, out) = forrel(&["prf-game", "--adversary", &spec, "--n", "2", "--ell", "4", "--trials", "100"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("queries_per_run"));
    fs::write(&net, "inputs 1\noutput x0\n").unwrap();
    assert_eq!(forrel(&["prf-game", "--adversary", &spec]).0, 2);
}

#[test]
fn sensitivity_of_parity_is_full() {
    let (code, out) = forrel(&["sensitivity", "--builtin", "parity:4", "--trials", "200"]);
    assert_eq!(code, 0);
    let row = out.lines().find(|l| l.contains(",tail_ge_4_exact,")).unwrap();
    assert_eq!(row.split(',').nth(3), Some("1"));
}

#[test]
fn malformed_specs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    fs::write(&spec, "game = \"prf-distinguish\"\nseed = 1\ntrials = 10\ncolour = 3\n[profile]\nn = 2\n").unwrap();
    assert_eq!(forrel(&["report", "--spec", path(&spec)]).0, 2);
    fs::write(&spec, "game = \"sensitivity-tail\"\nseed = 1\ntrials = 50\ncircuit = \"and:3\"\n[profile]\nn = 1\n").unwrap();
    let (code, out) = forrel(&["report", "--spec", path(&spec)]);
    assert_eq!(code, 0);
    assert!(out.contains("sensitivity"));
}

#[cfg(unix)]
mod external {
    use super::*;
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &Path, name: &str, body: &str) -> String {
        let p = dir.join(name);
        fs::write(&p, format!("#!/bin/sh\n{body}")).unwrap();
        fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
        p.to_str().unwrap().to_string()
    }

    #[test]
    fn subprocess_adversary_speaks_the_line_protocol() {
        let dir = tempfile::tempdir().unwrap();
        // query the challenge at 01 and answer with it
        let s = script(dir.path(), "adv.sh", "read init\necho 'QH 01'\nread bit\necho \"OUT $bit\"\n");
        let spec = format!("exec:{s}");
        let (code, out) = forrel(&["prf-game", "--adversary", &spec, "--n", "2", "--ell", "4", "--trials", "30"]);
        assert_eq!(code, 0, "{out}");
        let q = out.lines().find(|l| l.contains(",queries_per_run,")).unwrap();
        assert_eq!(q.split(',').nth(3), Some("1"));
    }

    #[test]
    fn protocol_violations_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let s = script(dir.path(), "bad.sh", "read init\necho 'HELLO'\nread reply\n");
        let (code, _) = forrel(&["prf-game", "--adversary", &format!("exec:{s}"), "--trials", "3"]);
        assert_eq!(code, 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn snapshots_reload_to_the_same_world(seed in any::<u64>(), trapdoor in any::<bool>(), force in any::<bool>()) {
        let p = ScaleProfile::desk(if trapdoor { 1 } else { 2 }, 3).unwrap();
        let w = if trapdoor {
            OracleWorld::Trapdoor(sample_trapdoor_world(&p, seed).unwrap())
        } else {
            OracleWorld::Prf(sample_prf_world(&p, seed).unwrap())
        };
        let bytes = encode_world(&w, force);
        let back = decode_world(&bytes).unwrap();
        prop_assert_eq!(&back, &w);
        prop_assert_eq!(encode_world(&back, force), bytes);
    }
}

#[test]
fn binary_exit_status_follows_run() {
    let bin = env!("CARGO_BIN_EXE_forrel");
    let ok = std::process::Command::new(bin).args(["gw-check", "--K", "2", "--M", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("averaging identity: PASS"));
    let bad = std::process::Command::new(bin).args(["decode", "--world", "/nonexistent"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
