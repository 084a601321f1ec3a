use std::process::{Command, Output};

fn cdsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdsense"))
        .args(args)
        .env_remove("CDSENSE_DEBUG_CHI_OFFSET")
        .output()
        .expect("run cdsense")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header row and parsed data rows.
fn parse(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

#[test]
fn bounds_symmetric_enhancement() {
    let o = cdsense(&["bounds", "--tl", "0.5", "--tr", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "# eta_l = 0.8"));
    let (header, rows) = parse(&text);
    assert_eq!(header, ["bound", "var_gamma", "h_ll", "h_lr", "h_rr", "optimal_ratio", "enhancement"]);
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["CB", "UQL", "TMSV-direct", "TMSV-largeN"]);
    assert_eq!(rows[1][6], "1.66666666667");
    assert!(num(&rows[0][1]) >= num(&rows[1][1]));
    assert_eq!(rows[3][2], "inf");
}

#[test]
fn bounds_lossless_transparent() {
    let o = cdsense(&["bounds", "--tl", "1", "--tr", "1", "--eta", "1"]);
    let (_, rows) = parse(&stdout(&o));
    assert_eq!(num(&rows[1][1]), 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(cdsense(&["bounds", "--tl", "1.5"]).status.code(), Some(2));
    assert_eq!(cdsense(&["bounds", "--ratio", "-0.1"]).status.code(), Some(2));
    assert_eq!(cdsense(&["bounds", "--n-tot", "0"]).status.code(), Some(2));
    assert_eq!(cdsense(&["sweep", "--grid", "1"]).status.code(), Some(2));
    assert_eq!(cdsense(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cdsense(&["bounds", "--tl", "abc"]).status.code(), Some(2));
    assert_eq!(cdsense(&["bounds", "--config", "/nonexistent/cdsense.cfg"]).status.code(), Some(1));
}

#[test]
fn config_precedence() {
    let dir = std::env::temp_dir().join(format!("cdsense-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# test\ntl = 0.3\neta-l = 0.9\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let text = stdout(&cdsense(&["bounds", "--config", cfg, "--tl", "0.6"]));
    assert!(text.contains("# tl = 0.6\n"));
    assert!(text.contains("# eta_l = 0.9\n"));
    assert!(text.contains("# eta_r = 0.8\n"));
    std::fs::write(dir.join("bad.cfg"), "colour = red\n").unwrap();
    let bad = cdsense(&["bounds", "--config", dir.join("bad.cfg").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ratio_axis() {
    let text = stdout(&cdsense(&["ratio", "--mode", "uql"]));
    assert!(text.contains("log10"));
    let (header, rows) = parse(&text);
    assert_eq!(header, ["log10_x", "r_opt"]);
    let mid = rows.iter().find(|r| r[0] == "0").unwrap();
    assert_eq!(mid[1], "0.5");
    let r: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_is_byte_stable_and_ordered() {
    let args = ["sweep", "--grid", "11"];
    let a = cdsense(&args);
    let b = cdsense(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains('\r'));
    assert!(text.contains("(A - B) / B"));
    let (header, rows) = parse(&text);
    assert_eq!(rows.len(), 121);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (cb, uql, tmsv, cr) = (col("cb"), col("uql"), col("var_tmsv"), col("cr_pnrd"));
    for row in &rows {
        let u = num(&row[uql]);
        for other in [cb, tmsv, cr] {
            let v = num(&row[other]);
            assert!(v >= u * (1.0 - 1e-9), "{row:?}");
        }
        let (tl, tr) = (num(&row[0]), num(&row[1]));
        if tl == 0.0 || tr == 0.0 {
            assert_eq!(row[cr], "inf");
        }
        if tl == tr && tl > 0.0 && tl < 1.0 {
            assert!(num(&row[col("nd_tmsv_uql")]).abs() < 1e-8);
            assert!(num(&row[col("nd_cr_uql")]).abs() < 1e-6);
            assert!(num(&row[col("enh_cb_over_tmsv")]) > 1.0);
        }
    }
}

#[test]
fn sweep_writes_file() {
    let path = std::env::temp_dir().join(format!("cdsense-sweep-{}.csv", std::process::id()));
    let p = path.to_str().unwrap();
    let o = cdsense(&["sweep", "--grid", "3", "--probe", "fock", "--out", p]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let (_, rows) = parse(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(rows.len(), 9);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn simulate_echoes_provenance_and_is_deterministic() {
    let args = ["simulate", "--nu", "500", "--seed", "7", "--seeds", "20"];
    let a = cdsense(&args);
    let b = cdsense(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# nu = 500, seed = 7, seeds = 20\n"));
    assert!(text.contains("# rng = chacha20"));
    let (header, rows) = parse(&text);
    assert_eq!(header, ["seed", "t_l_hat", "t_r_hat", "gamma_hat"]);
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0][0], "7");
}

#[test]
fn simulate_rejects_fractional_fock_budget() {
    assert_eq!(cdsense(&["simulate", "--n-tot", "3"]).status.code(), Some(2));
}
