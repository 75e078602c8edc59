use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lamwave_core::config::RunConfig;
use lamwave_core::wavefield::Noise;

fn lamwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lamwave(args);
    assert!(
        out.status.success(),
        "lamwave {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

/// 2.04 mm steel, a 0.2 m scan at 1 mm and a two-run comb up to 300 kHz.
fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::steel();
    cfg.sweep.f_min = 5e3;
    cfg.sweep.f_max = 300e3;
    cfg.sweep.df = 5e3;
    cfg.sweep.extra.clear();
    let e = &mut cfg.excitation;
    e.f_min = 20e3;
    e.f_max = 300e3;
    e.df_within_run = 10e3;
    e.run_shift = 5e3;
    e.n_runs = 2;
    e.duration = 0.2e-3;
    cfg.path.length_m = 0.2;
    cfg.path.spacing_m = 1e-3;
    cfg.synthesis.noise = Noise::SnrDb(30.0);
    cfg.seed = 3;
    let path = dir.join("small.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(files_under(&p));
        } else {
            v.push(p);
        }
    }
    v.sort();
    v
}

#[test]
fn shipped_configs_parse() {
    for name in ["fml.json", "steel.json"] {
        let cfg = RunConfig::load(&repo_config(name)).unwrap();
        cfg.laminate().unwrap();
        cfg.excitation().validate().unwrap();
        assert!((cfg.laminate().unwrap().total_thickness_mm() - 2.04).abs() < 1e-12);
    }
}

#[test]
fn malformed_json_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"materials\": ").unwrap();
    let out = lamwave(&[
        "dispersion",
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("EOF"), "{err}");
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lamwave(&[
        "synth",
        "--branches",
        s(&dir.path().join("nope.csv")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn steel_fundamentals_match_the_frozen_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("steel.json");
    fs::copy(repo_config("steel.json"), &cfg).unwrap();
    let out = dir.path().join("disp");
    // f * d = 0.5 and 1.0 MHz mm
    let f1 = (0.5e6 / 2.04).to_string();
    let f2 = (1.0e6 / 2.04).to_string();
    ok(&[
        "dispersion",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--fmin",
        &f1,
        "--fmax",
        &f2,
        "--df",
        &f1,
    ]);
    let csv = fs::read_to_string(out.join("branches.csv")).unwrap();
    let oracle = [
        ("A0", 0.5, 1832.545121),
        ("S0", 0.5, 5139.232603),
        ("A0", 1.0, 2267.928363),
        ("S0", 1.0, 5085.559570),
    ];
    for (mode, fd, c) in oracle {
        let row = csv
            .lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|r| r[0] == mode && (r[2].parse::<f64>().unwrap() - fd).abs() < 1e-9)
            .unwrap_or_else(|| panic!("{mode} at {fd}"));
        let cp: f64 = row[5].parse().unwrap();
        assert!((cp / c - 1.0).abs() < 1e-3, "{mode} {fd}: {cp} vs {c}");
    }
    assert!(fs::read_to_string(out.join("dispersion.svg"))
        .unwrap()
        .contains("<polyline"));
}

#[test]
fn pipeline_is_deterministic_and_stays_in_out() {
    let inputs = tempfile::tempdir().unwrap();
    let cfg = small_config(inputs.path());
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let disp = w.join("disp");
    ok(&["dispersion", "--config", s(&cfg), "--out", s(&disp)]);
    let branches = disp.join("branches.csv");

    let mut peak_bytes = Vec::new();
    for (i, format) in ["csv", "bin"].iter().enumerate() {
        let syn = w.join(format!("synth{i}"));
        ok(&[
            "synth",
            "--config",
            s(&cfg),
            "--branches",
            s(&branches),
            "--out",
            s(&syn),
            "--format",
            format,
        ]);
        let field = fs::read_dir(&syn).unwrap().next().unwrap().unwrap().path();
        let ext = w.join(format!("extract{i}"));
        ok(&[
            "extract",
            "--config",
            s(&cfg),
            "--wavefield",
            s(&field),
            "--branches",
            s(&branches),
            "--out",
            s(&ext),
            "--workers",
            "2",
        ]);
        peak_bytes.push(fs::read(ext.join("peaks.csv")).unwrap());
    }
    assert_eq!(
        peak_bytes[0], peak_bytes[1],
        "same seed must give identical peaks"
    );
    assert!(String::from_utf8_lossy(&peak_bytes[0]).starts_with("f_hz,nu_1pm,mag,prom\n"));

    let summary = ok(&[
        "compare",
        "--config",
        s(&cfg),
        "--reference",
        s(&branches),
        "--test",
        s(&w.join("extract0/filter_report.csv")),
        "--out",
        s(&w.join("cmp")),
    ]);
    let a0 = summary
        .lines()
        .find(|l| l.starts_with("A0"))
        .expect("A0 compared");
    let mean: f64 = a0
        .split("mean |rel| ")
        .nth(1)
        .unwrap()
        .split('\t')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(mean < 0.015, "{summary}");

    let files: Vec<String> = files_under(w)
        .iter()
        .map(|p| p.strip_prefix(w).unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        files,
        [
            "cmp/comparison.csv",
            "cmp/comparison.svg",
            "disp/branches.csv",
            "disp/dispersion.svg",
            "extract0/filter_report.csv",
            "extract0/peaks.csv",
            "extract0/summary.json",
            "extract1/filter_report.csv",
            "extract1/peaks.csv",
            "extract1/summary.json",
            "synth0/wavefield.csv",
            "synth1/wavefield.lwf",
        ]
    );
    assert_eq!(files_under(inputs.path()).len(), 1);
}

#[test]
fn synth_records_the_comb_and_single_tone_extracts() {
    let inputs = tempfile::tempdir().unwrap();
    let cfg_path = small_config(inputs.path());
    let w = tempfile::tempdir().unwrap();
    let disp = w.path().join("d");
    ok(&[
        "dispersion",
        "--config",
        s(&cfg_path),
        "--out",
        s(&disp),
        "--fmax",
        "100000",
    ]);

    // single noiseless tone at 60 kHz
    let mut cfg = RunConfig::load(&cfg_path).unwrap();
    cfg.synthesis.noise = Noise::None;
    cfg.excitation.f_min = 60e3;
    cfg.excitation.f_max = 60e3;
    cfg.excitation.n_runs = 1;
    let tone = inputs.path().join("tone.json");
    fs::write(&tone, cfg.to_json()).unwrap();
    let syn = w.path().join("s");
    ok(&[
        "synth",
        "--config",
        s(&tone),
        "--branches",
        s(&disp.join("branches.csv")),
        "--out",
        s(&syn),
    ]);
    let text = fs::read_to_string(syn.join("wavefield.csv")).unwrap();
    assert!(text.contains("# runs=1"));
    let ext = w.path().join("e");
    ok(&[
        "extract",
        "--config",
        s(&tone),
        "--wavefield",
        s(&syn.join("wavefield.csv")),
        "--branches",
        s(&disp.join("branches.csv")),
        "--out",
        s(&ext),
        "--save-map",
    ]);
    let peaks = fs::read_to_string(ext.join("peaks.csv")).unwrap();
    let rows: Vec<Vec<f64>> = peaks
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let best = rows.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert_eq!(best[0], 60e3);
    let branches = fs::read_to_string(disp.join("branches.csv")).unwrap();
    let nu_a0: f64 = branches
        .lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|r| r[0] == "A0" && r[1].parse::<f64>().ok() == Some(60e3))
        .map(|r| r[4].parse().unwrap())
        .unwrap();
    assert!(
        (best[1] - nu_a0).abs() < 1.0 / (4.0 * 0.2),
        "{} vs {nu_a0}",
        best[1]
    );
    assert!(ext.join("fk_map.csv").exists());

    // default comb: both runs recorded in the metadata
    let comb = w.path().join("c");
    ok(&[
        "synth",
        "--config",
        s(&cfg_path),
        "--branches",
        s(&disp.join("branches.csv")),
        "--out",
        s(&comb),
        "--fmax",
        "100000",
    ]);
    let head: String = fs::read_to_string(comb.join("wavefield.csv"))
        .unwrap()
        .lines()
        .take(20)
        .collect::<Vec<_>>()
        .join("\n");
    assert!(
        head.contains("# runs=2") && head.contains("# run_shift_hz=5000"),
        "{head}"
    );
}
