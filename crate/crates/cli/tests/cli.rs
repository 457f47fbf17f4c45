use std::fs;
use std::process::Command;

use relay_alloc::channel::{generate_channels, ChannelConfig};
use relay_alloc::ProblemInstance;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-alloc"))
}

#[test]
fn solve_prints_outcome_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let ch = generate_channels(&ChannelConfig::new(16, 0.5, 3).unwrap()).unwrap();
    ProblemInstance::new(ch, [1.0, 1.0], [1.0, 1.0], [100.0; 3])
        .unwrap()
        .write(&path)
        .unwrap();
    let out = bin().arg("solve").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outage"], false);
    assert!(v["objective"].as_f64().unwrap() > 2.0);
}

#[test]
fn sweep_is_deterministic_and_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.json");
    fs::write(
        &scen,
        r#"{"snr_grid": [10, 20], "n_trials": 5, "qos": [[1, 1]], "n_subcarriers": 16}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = bin()
            .args(["sweep", scen.to_str().unwrap(), "--trials", "2", "--seed", "9", "--threads", "1", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[0].starts_with("scheme,snr_db,relay_pos,r_a,r_b,trials,"));
    assert!(lines[1].starts_with("proposed,10,0.5,1,1,2,0,"));
}

#[test]
fn outage_region_and_oracle_tables() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.json");
    fs::write(&scen, r#"{"snr_grid": [20], "n_trials": 1, "qos": [[0, 0]], "n_subcarriers": 4}"#).unwrap();
    for (cmd, header) in [
        ("outage", "scheme,snr_db,relay_pos,r_a,r_b,trials,failed,outage_frac"),
        ("region", "snr_db,relay_pos,trials,mean_set_basis,mean_pairing,gain,min_margin,containment_violations"),
        ("oracle-check", "snr_db,relay_pos,trial,exhaustive,solver,dual,ratio"),
    ] {
        let out = bin().args([cmd, scen.to_str().unwrap()]).output().unwrap();
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
        assert!(text.lines().count() >= 2);
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = bin().args(["sweep", missing.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let scen = dir.path().join("bad.json");
    fs::write(&scen, r#"{"relay_positions": [1.5]}"#).unwrap();
    let out = bin().args(["sweep", scen.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("relay position"));
}
