use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cstrd_core::annotation::{self, RingShape};
use cstrd_core::synth::{self, SynthParams};
use image::{Rgb, RgbImage};
use tempfile::TempDir;

fn cstrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cstrd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn circle(c: [f64; 2], r: f64) -> RingShape {
    RingShape {
        label: None,
        points: (0..360)
            .map(|i| {
                let t = i as f64 * PI / 180.0;
                [c[0] + r * t.cos(), c[1] + r * t.sin()]
            })
            .collect(),
    }
}

fn write_rings(path: &Path, rings: &[RingShape]) {
    annotation::write_annotation(path, rings, None).unwrap();
}

fn gray_image(dir: &Path, size: u32) -> PathBuf {
    let p = dir.join("gray.png");
    RgbImage::from_pixel(size, size, Rgb([128, 128, 128])).save(&p).unwrap();
    p
}

/// Synthetic 10-ring section written to `dir`; returns the image path and pith.
fn synthetic(dir: &Path) -> (PathBuf, [f64; 2], usize) {
    let sec = synth::generate(&SynthParams {
        size: 800,
        nb_rings: 10,
        seed: 7,
        ..Default::default()
    });
    let p = dir.join("synth.png");
    sec.image.save(&p).unwrap();
    write_rings(&dir.join("synth_gt.json"), &sec.gt);
    (p, sec.pith, sec.gt.len())
}

fn float_line(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("{key} missing in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn detect_synthetic_target_writes_every_ring() {
    let dir = TempDir::new().unwrap();
    let (img, pith, n) = synthetic(dir.path());
    let out = dir.path().join("out");
    let o = cstrd(&[
        "detect",
        "--image",
        s(&img),
        "--cx",
        &pith[0].to_string(),
        "--cy",
        &pith[1].to_string(),
        "--output-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = annotation::load_annotation(&out.join("detection.json")).unwrap();
    assert_eq!(file.shapes.len(), n);
    assert!(out.join("overlay.png").exists());
    assert_eq!(float_line(&stdout(&o), "rings:"), n as f64);
    assert!(float_line(&stdout(&o), "elapsed_s:") >= 0.0);
}

#[test]
fn detect_blank_image_gives_no_rings() {
    let dir = TempDir::new().unwrap();
    let img = gray_image(dir.path(), 300);
    let out = dir.path().join("out");
    let o = cstrd(&["detect", "--image", s(&img), "--cx", "150", "--cy", "150", "--output-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let file = annotation::load_annotation(&out.join("detection.json")).unwrap();
    assert!(file.shapes.is_empty());
}

#[test]
fn missing_image_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.png");
    let o = cstrd(&["detect", "--image", s(&missing), "--cx", "1", "--cy", "1", "--output-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.png"), "{}", stderr(&o));
}

#[test]
fn missing_pith_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let img = gray_image(dir.path(), 50);
    let o = cstrd(&["detect", "--image", s(&img)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pith_from_csv_by_image_stem() {
    let dir = TempDir::new().unwrap();
    let img = gray_image(dir.path(), 200);
    let csv = dir.path().join("pith.csv");
    fs::write(&csv, "name,cx,cy\ngray,100,100\n").unwrap();
    let out = dir.path().join("out");
    let o = cstrd(&["detect", "--image", s(&img), "--pith-csv", s(&csv), "--output-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cstrd(&[
        "detect",
        "--image",
        s(&img),
        "--pith-csv",
        s(&csv),
        "--section",
        "other",
        "--output-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

fn evaluate(dir: &Path, dt: &Path, gt: &Path, th: &str) -> Output {
    let img = gray_image(dir, 400);
    cstrd(&[
        "evaluate",
        "--dt",
        s(dt),
        "--gt",
        s(gt),
        "--image",
        s(&img),
        "--cx",
        "200",
        "--cy",
        "200",
        "--output-dir",
        s(&dir.join("report")),
        "--th",
        th,
    ])
}

#[test]
fn evaluate_self_comparison_is_perfect() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.json");
    write_rings(&gt, &[20.0, 50.0, 90.0, 140.0].map(|r| circle([200.0, 200.0], r)));
    let o = evaluate(dir.path(), &gt, &gt, "0.6");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(float_line(&text, "F1-score:"), 1.0);
    assert_eq!(float_line(&text, "Precision:"), 1.0);
    assert_eq!(float_line(&text, "Recall:"), 1.0);
    assert_eq!(float_line(&text, "RMSE:"), 0.0);
    for name in cstrd_core::evaluate::REPORT_FILES {
        assert!(dir.path().join("report").join(name).exists(), "{name}");
    }
}

#[test]
fn evaluate_extra_far_ring_is_a_false_positive() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.json");
    let dt = dir.path().join("dt.json");
    // the outer ring shares the last GT band but loses to the exact match
    let rings = [20.0, 50.0, 90.0].map(|r| circle([200.0, 200.0], r));
    write_rings(&gt, &rings);
    let mut det = rings.to_vec();
    det.push(circle([200.0, 200.0], 190.0));
    write_rings(&dt, &det);
    let o = evaluate(dir.path(), &dt, &gt, "0.6");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("TP: 3  FP: 1  FN: 0"), "{text}");
    assert!(float_line(&text, "Precision:") < 1.0);
    assert_eq!(float_line(&text, "Recall:"), 1.0);
}

#[test]
fn evaluate_rejects_bad_json_and_th() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.json");
    write_rings(&gt, &[circle([200.0, 200.0], 30.0)]);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(evaluate(dir.path(), &bad, &gt, "0.6").status.code(), Some(1));
    assert_eq!(evaluate(dir.path(), &gt, &gt, "0").status.code(), Some(1));
    assert_eq!(evaluate(dir.path(), &gt, &gt, "1.5").status.code(), Some(1));
}

fn measure(dir: &Path, rings: &Path, extra: &[&str]) -> Output {
    let out = dir.join("measure");
    let mut args = vec!["measure", "--rings", s(rings), "--cx", "200", "--cy", "200", "--output-dir", s(&out)];
    args.extend_from_slice(extra);
    cstrd(&args)
}

#[test]
fn measure_concentric_circles_gives_constant_width() {
    let dir = TempDir::new().unwrap();
    let rings = dir.path().join("rings.json");
    write_rings(&rings, &(1..=6).map(|k| circle([200.0, 200.0], 25.0 * k as f64)).collect::<Vec<_>>());
    let o = measure(dir.path(), &rings, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("measure/growth_series.csv")).unwrap();
    let deltas: Vec<f64> = rdr.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(deltas.len(), 6);
    for d in &deltas {
        assert!((d - deltas[0]).abs() < 1e-6 * deltas[0], "{deltas:?}");
    }
    let widths = fs::read_to_string(dir.path().join("measure/cardinal_widths.csv")).unwrap();
    assert_eq!(widths.lines().count(), 1 + 4 * 6);
}

#[test]
fn measure_with_calibration_adds_mm_columns() {
    let dir = TempDir::new().unwrap();
    let rings = dir.path().join("rings.json");
    write_rings(&rings, &[circle([200.0, 200.0], 40.0), circle([200.0, 200.0], 80.0)]);
    let cal = dir.path().join("cal.csv");
    fs::write(&cal, "direction,px,mm\nN,100,5\nE,200,10\n").unwrap();
    let o = measure(dir.path(), &rings, &["--calibration", s(&cal)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("measure/growth_series.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with("area_mm2,r_eq_mm,delta_r_eq_mm"), "{csv}");
    assert!((float_line(&stdout(&o), "m_mm_per_px:") - 0.05).abs() < 1e-12);
}

#[test]
fn measure_crossing_rings_fails() {
    let dir = TempDir::new().unwrap();
    let rings = dir.path().join("rings.json");
    write_rings(&rings, &[circle([200.0, 200.0], 50.0), circle([230.0, 200.0], 50.0)]);
    let o = measure(dir.path(), &rings, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("nest"), "{}", stderr(&o));
}

#[test]
fn calibrate_fits_through_origin() {
    let dir = TempDir::new().unwrap();
    let cal = dir.path().join("cal.csv");
    fs::write(&cal, "direction,px,mm\nN,10,1\nS,20,2\nE,30,3.3\n").unwrap();
    let o = cstrd(&["calibrate", "--data", s(&cal), "--direction", "N"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((float_line(&stdout(&o), "m_mm_per_px:") - 0.1).abs() < 1e-9);
    let o = cstrd(&["calibrate", "--data", s(&cal), "--direction", "Q"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_every_parameter_with_default() {
    for cmd in ["detect", "batch"] {
        let o = cstrd(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for flag in [
            "--sigma",
            "--nb-rays",
            "--angle-tol",
            "--th-rt",
            "--th-ds",
            "--th-rd",
            "--n-nodes",
            "--relax-iters",
            "--relax-factor",
            "--min-chain-nodes",
            "--min-coverage",
            "--target-size",
            "--edge-low",
            "--edge-high",
        ] {
            let line = text
                .lines()
                .skip_while(|l| !l.contains(flag))
                .take(3)
                .collect::<Vec<_>>()
                .join(" ");
            assert!(line.contains("[default:"), "{cmd} {flag}: {line}");
        }
    }
}

#[test]
fn outputs_are_idempotent() {
    let dir = TempDir::new().unwrap();
    let (img, pith, _) = synthetic(dir.path());
    let run = |out: &Path| {
        let o = cstrd(&[
            "detect",
            "--image",
            s(&img),
            "--cx",
            &pith[0].to_string(),
            "--cy",
            &pith[1].to_string(),
            "--output-dir",
            s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    assert_eq!(fs::read(a.join("detection.json")).unwrap(), fs::read(b.join("detection.json")).unwrap());

    let rings = dir.path().join("rings.json");
    write_rings(&rings, &[circle([200.0, 200.0], 40.0), circle([200.0, 200.0], 80.0)]);
    let first = dir.path().join("m1");
    let second = dir.path().join("m2");
    for out in [&first, &second] {
        fs::create_dir_all(out).unwrap();
        assert!(measure(out, &rings, &[]).status.success());
    }
    for f in ["growth_series.csv", "cardinal_widths.csv"] {
        assert_eq!(
            fs::read(first.join("measure").join(f)).unwrap(),
            fs::read(second.join("measure").join(f)).unwrap()
        );
    }
}

#[test]
fn batch_writes_summary_in_manifest_order() {
    let dir = TempDir::new().unwrap();
    let (img, pith, _) = synthetic(dir.path());
    gray_image(dir.path(), 300);
    let blank_gt = dir.path().join("blank_gt.json");
    write_rings(&blank_gt, &[circle([150.0, 150.0], 60.0)]);
    let manifest = dir.path().join("manifest.csv");
    fs::write(
        &manifest,
        format!(
            "image,cx,cy,gt\n{},{},{},synth_gt.json\ngray.png,150,150,blank_gt.json\n",
            img.file_name().unwrap().to_str().unwrap(),
            pith[0],
            pith[1]
        ),
    )
    .unwrap();
    let out = dir.path().join("batch");
    let o = cstrd(&["batch", "--manifest", s(&manifest), "--output-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let names: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["synth", "gray", "Average"]);
    let synth_row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(synth_row[1..4], ["10", "0", "0"]);
    assert!(out.join("synth/detection.json").exists());
    assert!(out.join("gray/detection.json").exists());
}
