use frontlab::cli::{run, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use std::fs;

fn go(args: &[&str]) -> i32 {
    run(std::iter::once("frontlab").chain(args.iter().copied()))
}

#[test]
fn identical_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a").to_str().unwrap().to_string();
    let b = dir.path().join("b").to_str().unwrap().to_string();
    for p in [&a, &b] {
        assert_eq!(go(&["speeds", "--d1", "0.40:0.44:0.02", "--out", p]), EXIT_OK);
        assert_eq!(go(&["verify", "--out", p]), EXIT_OK);
    }
    for cmd in ["speeds", "verify"] {
        let fa = fs::read(format!("{a}_{cmd}.csv")).unwrap();
        let fb = fs::read(format!("{b}_{cmd}.csv")).unwrap();
        assert_eq!(fa, fb, "{cmd}");
    }
}

#[test]
fn speeds_csv_matches_expansion_near_transition() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s").to_str().unwrap().to_string();
    assert_eq!(go(&["speeds", "--d1", "0.44:0.46:0.01", "--delta2", "0.1", "--out", &p]), EXIT_OK);
    let text = fs::read_to_string(format!("{p}_speeds.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# "));
    assert_eq!(lines.next().unwrap(), "d1,delta2,c_numeric,c_pm,c_expansion,dev,status");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let num = |i: usize| r[i].parse::<f64>().unwrap();
        let pred = num(4) - num(3);
        assert!((num(5) - pred).abs() < 0.1 * pred.abs(), "{r:?}");
        assert_eq!(r[6], "ok");
        // 17 significant digits
        assert_eq!(r[2].split('e').next().unwrap().len(), 18);
    }
}

#[test]
fn transition_plot_overlays_linear_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t").to_str().unwrap().to_string();
    assert_eq!(go(&["transition", "--delta2", "0:0.04:0.02", "--plots", "--out", &p]), EXIT_OK);
    let svg = fs::read_to_string(format!("{p}_transition.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("linear prediction") && svg.contains(r#"stroke="black""#));
    let csv = fs::read_to_string(format!("{p}_transition.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap() == "delta2,d1_star,a_slope,linear_pred,resid,status");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn spectrum_and_front_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x").to_str().unwrap().to_string();
    assert_eq!(go(&["spectrum", "--d1", "0.3", "--delta2", "0.05", "--out", &p]), EXIT_OK);
    let csv = fs::read_to_string(format!("{p}_spectrum.csv")).unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",point")));
    assert_eq!(go(&["front", "--d1", "0.7", "--delta2", "0.2", "--L", "15", "--out", &p, "--plots"]), EXIT_OK);
    let csv = fs::read_to_string(format!("{p}_front.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 301);
    assert!(fs::metadata(format!("{p}_front.svg")).is_ok());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e").to_str().unwrap().to_string();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "d1 = 0.3\nthis line has no equals sign\n").unwrap();
    assert_eq!(go(&["front", "--config", cfg.to_str().unwrap(), "--out", &p]), EXIT_USAGE);
    assert_eq!(go(&["sweep", "--d1", "0.3:0.4:0.05", "--delta2", "0:0.1:0.05", "--out", &p]), EXIT_USAGE);
    assert_eq!(go(&["front", "--L", "-1"]), EXIT_USAGE);
    // resonant pushed front
    assert_eq!(go(&["spectrum", "--d1", "0.22", "--delta2", "0.1", "--out", &p]), EXIT_NUMERICAL);
}
