use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechcirc")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Header names and numeric rows of a CSV with `#` comments.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn pumps_off_reflection_is_flat() {
    let out = stdout(&run(&[
        "spectrum",
        path(&fixture("device.toml")),
        "--points",
        "11",
        "--omega-min",
        "-500",
        "--omega-max",
        "500",
    ]));
    let (h, rows) = parse_csv(&out);
    let etas = [1.8 / 2.42, 1.7 / 1.98, 1.58 / 3.0];
    for (i, eta) in etas.iter().enumerate() {
        let expect = 10.0 * ((2.0f64 * eta - 1.0).powi(2)).log10();
        let k = column(&h, &format!("s{0}{0}_db", i + 1));
        assert!((rows[5][k] - expect).abs() < 1e-9, "{} vs {expect}", rows[5][k]);
        for r in &rows {
            assert!((r[k] - expect).abs() < 1e-3, "{} vs {expect}", r[k]);
        }
    }
    assert!(rows.iter().all(|r| r[column(&h, "s21_db")] == -300.0));
}

#[test]
fn isolator_dip_at_center() {
    let out = stdout(&run(&["spectrum", path(&fixture("isolator.toml")), "--points", "101"]));
    let (h, rows) = parse_csv(&out);
    let center = rows.iter().find(|r| r[0] == 0.0).unwrap();
    assert!(center[column(&h, "s12_db")] <= -40.0);
    assert!((center[column(&h, "s21_db")] + 2.4).abs() < 0.01);
    assert!(out.lines().nth(1).unwrap().starts_with("# manifest_sha256 = "));
}

#[test]
fn identical_manifest_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("circulator.toml");
    let args = ["spectrum", path(&cfg), "--points", "31", "--out-dir", path(dir.path())];
    stdout(&run(&args));
    let first = std::fs::read(dir.path().join("spectrum.csv")).unwrap();
    stdout(&run(&args));
    assert_eq!(first, std::fs::read(dir.path().join("spectrum.csv")).unwrap());

    let changed = stdout(&run(&["spectrum", path(&fixture("circulator.toml")), "--points", "31", "--set", "pumps.photons[0][0]=1.0"]));
    let hash = |t: &str| t.lines().find(|l| l.starts_with("# manifest_sha256")).unwrap().to_string();
    assert_ne!(hash(&changed), hash(&String::from_utf8(first).unwrap()));
}

#[test]
fn phase_sweep_mirrors_around_zero() {
    let out = stdout(&run(&[
        "phase-sweep",
        path(&fixture("isolator.toml")),
        "--phi-points",
        "9",
        "--omega-points",
        "5",
        "--phi-min-deg",
        "-120",
        "--phi-max-deg",
        "120",
    ]));
    let (h, rows) = parse_csv(&out);
    let (s12, s21) = (column(&h, "s12_db"), column(&h, "s21_db"));
    for r in rows.iter().filter(|r| r[0] == 0.0) {
        assert!((r[s12] - r[s21]).abs() < 1e-9);
    }
    // Swept pump (2,2) is the only non-zero phase, so it is the loop phase.
    for r in &rows {
        let m = rows.iter().find(|q| q[0] == -r[0] && q[1] == r[1]).unwrap();
        assert!((r[s12] - m[s21]).abs() < 1e-9);
    }
    assert_eq!(rows.len(), 45);
}

#[test]
fn conversion_bandwidth_in_hz() {
    let o = run(&["convert", path(&fixture("device.toml")), "--cooperativity", "10", "--points", "5"]);
    let out = stdout(&o);
    let fwhm: f64 = out.lines().find_map(|l| l.strip_prefix("# fwhm_hz = ")).unwrap().parse().unwrap();
    // gamma (1 + C1 + C2) with gamma / 2pi = 4 Hz.
    assert!((fwhm / 84.0 - 1.0).abs() < 1e-3, "{fwhm}");
    let peak: f64 = out.lines().find_map(|l| l.strip_prefix("# peak_transmission = ")).unwrap().parse().unwrap();
    let oracle: f64 = out.lines().find_map(|l| l.strip_prefix("# single_mode_oracle = ")).unwrap().parse().unwrap();
    assert!((peak / oracle - 1.0).abs() < 1e-9);
}

fn write_env(dir: &Path, gain: f64, referral: &str) -> PathBuf {
    let p = dir.join(format!("env_{gain}_{referral}.toml"));
    std::fs::write(
        &p,
        format!(
            "referral = \"{referral}\"\n[amplifier]\ngain_db = [{gain}, 64.0, 60.5]\nn_amp = [23.0, 23.0, 33.0]\n\
             [occupancy]\ncavity = [0.5, 0.1, 0.2]\nmechanics = [900.0, 2000.0]\n"
        ),
    )
    .unwrap();
    p
}

#[test]
fn noise_pumps_off_and_gain_independence() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_env(dir.path(), 67.5, "input");
    let out = stdout(&run(&["noise", path(&fixture("device.toml")), path(&input), "--points", "3"]));
    let (h, _) = parse_csv(&out);
    assert!(h.iter().all(|c| !c.starts_with("n_add")));
    let output = write_env(dir.path(), 67.5, "output");
    let (h, rows) = parse_csv(&stdout(&run(&["noise", path(&fixture("device.toml")), path(&output), "--points", "3"])));
    // Output-referred added noise with no conversion is the receiving cavity's occupancy.
    let cavity = [0.5, 0.1, 0.2];
    for (k, name) in h.iter().enumerate().filter(|(_, c)| c.starts_with("n_add")) {
        let to: usize = name[name.len() - 1..].parse().unwrap();
        assert!(rows.iter().all(|r| (r[k] - cavity[to - 1]).abs() < 1e-9), "{name}");
    }

    let cfg = fixture("circulator.toml");
    let a = parse_csv(&stdout(&run(&["noise", path(&cfg), path(&input), "--points", "5"])));
    let louder = write_env(dir.path(), 80.0, "input");
    let b = parse_csv(&stdout(&run(&["noise", path(&cfg), path(&louder), "--points", "5"])));
    assert_eq!(a.0, b.0);
    for k in (0..a.0.len()).filter(|&k| a.0[k].starts_with("n_add")) {
        for (x, y) in a.1.iter().zip(&b.1) {
            assert_eq!(x[k], y[k]);
        }
    }
    assert!(a.1[0][column(&a.0, "psd_1_w_per_hz")] < b.1[0][column(&b.0, "psd_1_w_per_hz")]);
}

#[test]
fn calibrated_noise_matches_targets() {
    let out = stdout(&run(&[
        "noise",
        path(&fixture("circulator.toml")),
        path(&fixture("circulator_noise.toml")),
        "--points",
        "3",
    ]));
    let (h, rows) = parse_csv(&out);
    let center = &rows[1];
    for (name, target) in [("1to2", 4.0), ("2to3", 6.5), ("3to1", 3.6), ("2to1", 4.0), ("3to2", 4.0), ("1to3", 5.5)] {
        let v = center[column(&h, &format!("n_add_{name}"))];
        assert!((v / target - 1.0).abs() < 0.10, "{name}: {v}");
    }
}

#[test]
fn optimize_isolator_and_circulator() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "optimize",
        path(&fixture("isolator.toml")),
        path(&fixture("targets/isolate.toml")),
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result: toml::Table = toml::from_str(&std::fs::read_to_string(dir.path().join("result.toml")).unwrap()).unwrap();
    assert!(result["achieved"]["isolation_db"].as_float().unwrap() >= 40.0);
    assert!(std::fs::read_to_string(dir.path().join("history.csv")).unwrap().contains("start,run,evaluations,objective"));

    let out = stdout(&run(&["optimize", path(&fixture("device.toml")), path(&fixture("targets/circulate.toml"))]));
    let result: toml::Table = toml::from_str(&out).unwrap();
    assert!(result["meets"].as_bool().unwrap());
    assert!(result["achieved"]["isolation_db"].as_float().unwrap() >= 18.0);
    assert_eq!(result["pumps"]["photons"].as_array().unwrap().len(), 3);
}

#[test]
fn infeasible_target_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "optimize",
        path(&fixture("low_eta.toml")),
        path(&fixture("targets/infeasible.toml")),
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target not met"));
    let result: toml::Table = toml::from_str(&std::fs::read_to_string(dir.path().join("result.toml")).unwrap()).unwrap();
    assert!(!result["meets"].as_bool().unwrap());
}

#[test]
fn verify_fresh_fixtures() {
    for mode in ["oracle", "invariants"] {
        for cfg in ["isolator.toml", "circulator.toml", "device.toml"] {
            let o = run(&["verify", path(&fixture(cfg)), "--mode", mode]);
            assert!(o.status.success(), "{cfg} {mode}: {}", String::from_utf8_lossy(&o.stdout));
        }
    }
}

const STRONG: &str = "pumps.photons=[[533492.8, 1076562.9], [2812675.0, 1059555.4]]";

#[test]
fn verify_timedomain_and_reduced_spacing() {
    let iso = fixture("isolator.toml");
    let ok = run(&["verify", path(&iso), "--mode", "timedomain", "--set", STRONG, "--set", "model.off_resonant=\"include\""]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let close = run(&["verify", path(&iso), "--mode", "timedomain", "--set", STRONG, "--set", "mechanics[1].f_hz=5.0e6"]);
    assert_eq!(close.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&close.stdout).contains("FAIL timedomain/rwa"));
}

#[test]
fn exit_codes() {
    let bad_g0 = run(&["verify", path(&fixture("isolator.toml")), "--mode", "oracle", "--set", "couplings.g0_hz[0][0]=-33.0"]);
    assert_eq!(bad_g0.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "[[cavity]]\nf_hz = 9.55e9\nkappa_int_hz = \"wide\"\n").unwrap();
    let o = run(&["spectrum", path(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cavity.kappa_int_hz"));

    assert_eq!(run(&["spectrum", "/nonexistent/device.toml"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", path(&fixture("isolator.toml")), "--points", "1"]).status.code(), Some(2));

    // Coinciding mechanical frames make the off-resonant model degenerate.
    let o = run(&[
        "spectrum",
        path(&fixture("isolator.toml")),
        "--set",
        "mechanics[1].f_hz=4.34e6",
        "--set",
        "pumps.sideband_detuning_hz=[0.0, 0.0]",
        "--set",
        "model.off_resonant=\"include\"",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
