use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use cstrd_core::annotation::{self, ImageMeta, RingShape};
use cstrd_core::detect::{self, DetectParams, Ring};
use cstrd_core::evaluate::{self, table_round, Assignment, EvalReport};
use cstrd_core::measure::{self, Cardinal, CalibrationFit};
use cstrd_core::raster;
use cstrd_core::spider::SpiderWeb;
use image::RgbImage;
use rayon::prelude::*;

use crate::{BatchArgs, CalibrateArgs, DetectArgs, EvaluateArgs, MeasureArgs, PithArgs};

pub enum Failure {
    /// Bad arguments or unusable input files (exit code 1).
    Input(anyhow::Error),
    /// Anything else (exit code 2).
    Internal(anyhow::Error),
}

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

type CmdResult<T = ()> = Result<T, Failure>;

fn resolve_pith(p: &PithArgs, image: &Path) -> CmdResult<[f64; 2]> {
    if let (Some(cx), Some(cy)) = (p.cx, p.cy) {
        return Ok([cx, cy]);
    }
    let Some(csv) = &p.pith_csv else {
        return Err(input(anyhow!("the pith is required: give --cx and --cy, or --pith-csv")));
    };
    let table = annotation::load_pith_csv(csv).map_err(input)?;
    let name = match &p.section {
        Some(s) => s.clone(),
        None => image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let rec = table
        .get(&name)
        .ok_or_else(|| input(anyhow!("section {name:?} not found in {}", csv.display())))?;
    Ok([rec.cx, rec.cy])
}

fn load_image(path: &Path) -> CmdResult<RgbImage> {
    raster::load_image(path).map_err(input)
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(internal)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(internal)
}

/// Rings of an annotation file sampled on `web`, innermost first.
fn load_rings(path: &Path, web: &SpiderWeb) -> CmdResult<Vec<Ring>> {
    let file = annotation::load_annotation(path).map_err(input)?;
    let mut rings = file
        .shapes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            evaluate::sample_polygon_on_rays(s, web)
                .with_context(|| format!("{}: shape {k}", path.display()))
                .map_err(input)
        })
        .collect::<CmdResult<Vec<Ring>>>()?;
    evaluate::sort_rings(&mut rings);
    Ok(rings)
}

fn validated(params: DetectParams) -> CmdResult<DetectParams> {
    params.validate().map_err(input)?;
    Ok(params)
}

fn run_detection(
    image_path: &Path,
    mask: Option<&Path>,
    pith: [f64; 2],
    params: &DetectParams,
    out_dir: &Path,
) -> CmdResult<(Vec<Ring>, f64)> {
    let image = load_image(image_path)?;
    let mask = mask.map(|m| raster::load_mask(m).map_err(input)).transpose()?;
    let start = Instant::now();
    let rings = detect::detect_masked(&image, mask.as_ref(), pith, params).map_err(|e| match e {
        detect::DetectError::Raster(_) | detect::DetectError::Edge(_) | detect::DetectError::InvalidParams(_) => input(e),
        other => internal(other),
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    create_dir(out_dir)?;
    let shapes: Vec<RingShape> = rings
        .iter()
        .enumerate()
        .map(|(k, r)| r.to_shape(Some((k + 1).to_string())))
        .collect();
    let meta = ImageMeta {
        image_path: image_path.file_name().map(|s| s.to_string_lossy().into_owned()),
        image_width: Some(image.width()),
        image_height: Some(image.height()),
    };
    annotation::write_annotation(&out_dir.join("detection.json"), &shapes, Some(&meta)).map_err(internal)?;
    let overlay_path = out_dir.join("overlay.png");
    detect::overlay_rings(&image, &rings)
        .save(&overlay_path)
        .with_context(|| format!("cannot write {}", overlay_path.display()))
        .map_err(internal)?;
    Ok((rings, elapsed))
}

pub fn detect(a: DetectArgs) -> CmdResult {
    let params = validated(a.params.params())?;
    let pith = resolve_pith(&a.pith, &a.image)?;
    let (rings, elapsed) = run_detection(&a.image, a.mask.as_deref(), pith, &params, &a.output_dir)?;
    println!("rings: {}", rings.len());
    println!("elapsed_s: {elapsed:.2}");
    Ok(())
}

fn check_th(th: f64) -> CmdResult {
    if th > 0.0 && th <= 1.0 {
        Ok(())
    } else {
        Err(input(anyhow!("--th must be in (0, 1], got {th}")))
    }
}

struct Scored {
    assignment: Assignment,
    report: Option<EvalReport>,
    detections: Vec<Ring>,
    gt: Vec<Ring>,
    web: SpiderWeb,
}

fn score_files(dt: &Path, gt: &Path, pith: [f64; 2], size: (u32, u32), nb_rays: usize, th: f64) -> CmdResult<Scored> {
    let web = SpiderWeb::new(pith, nb_rays).map_err(input)?;
    let mut detections = load_rings(dt, &web)?;
    let mut gt_rings = load_rings(gt, &web)?;
    let bound = evaluate::image_section_bound(&web, size.0, size.1);
    let (assignment, report) = evaluate::evaluate(&mut detections, &mut gt_rings, &web, &bound, th)
        .with_context(|| format!("cannot evaluate against {}", gt.display()))
        .map_err(input)?;
    Ok(Scored {
        assignment,
        report: report.ok(),
        detections,
        gt: gt_rings,
        web,
    })
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    check_th(a.th)?;
    let pith = resolve_pith(&a.pith, &a.image)?;
    let image = load_image(&a.image)?;
    let s = score_files(&a.dt, &a.gt, pith, image.dimensions(), a.nb_rays, a.th)?;
    let (tp, fp, fn_count) = (s.assignment.tp(), s.assignment.fp(), s.assignment.fn_count());
    println!("TP: {tp}  FP: {fp}  FN: {fn_count}");
    match &s.report {
        Some(r) => {
            println!("F1-score: {}", table_round(r.fscore));
            println!("Precision: {}", table_round(r.precision));
            println!("Recall: {}", table_round(r.recall));
        }
        None => {
            println!("F1-score: undefined");
            println!("Precision: undefined");
            println!("Recall: undefined");
        }
    }
    match s.report.as_ref().and_then(|r| r.rmse_overall) {
        Some(v) => println!("RMSE: {v:.2}"),
        None => println!("RMSE: undefined"),
    }
    evaluate::render_reports(&image, &s.web, &s.gt, &s.detections, &s.assignment, &a.output_dir).map_err(internal)
}

/// Calibration rows whose direction matches `which` ("all" keeps every row).
fn read_calibration(path: &Path, which: &str) -> CmdResult<(Vec<f64>, Vec<f64>)> {
    let filter: Option<Cardinal> = if which.eq_ignore_ascii_case("all") {
        None
    } else {
        Some(which.parse().map_err(|e: String| input(anyhow!(e)))?)
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)?;
    let (mut px, mut mm) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec
            .with_context(|| format!("{}: row {row}", path.display()))
            .map_err(input)?;
        if rec.len() != 3 {
            return Err(input(anyhow!("{}: row {row}: expected direction,px,mm", path.display())));
        }
        let dir: Cardinal = rec[0]
            .parse()
            .map_err(|e: String| input(anyhow!("{}: row {row}: {e}", path.display())))?;
        let num = |k: usize| -> CmdResult<f64> {
            rec[k]
                .parse()
                .map_err(|_| input(anyhow!("{}: row {row}: {:?} is not a number", path.display(), &rec[k])))
        };
        if filter.is_none_or(|f| f == dir) {
            px.push(num(1)?);
            mm.push(num(2)?);
        }
    }
    Ok((px, mm))
}

fn fit(path: &Path, which: &str) -> CmdResult<CalibrationFit> {
    let (px, mm) = read_calibration(path, which)?;
    measure::calibrate(&px, &mm)
        .with_context(|| format!("calibration from {}", path.display()))
        .map_err(input)
}

pub fn calibrate(a: CalibrateArgs) -> CmdResult {
    let f = fit(&a.data, &a.direction)?;
    println!("m_mm_per_px: {:.9}", f.m);
    println!("residual_rms_mm: {:.6}", f.residual_rms);
    println!("n_points: {}", f.n_points);
    Ok(())
}

pub fn measure(a: MeasureArgs) -> CmdResult {
    let pith = resolve_pith(&a.pith, &a.rings)?;
    let web = SpiderWeb::new(pith, a.nb_rays).map_err(input)?;
    let rings = load_rings(&a.rings, &web)?;
    let calibration = a.calibration.as_deref().map(|p| fit(p, &a.direction)).transpose()?;
    let series = measure::equivalent_series(&rings).map_err(input)?;
    let cardinal = measure::cardinal_widths(&rings, pith, &Cardinal::ALL).map_err(input)?;
    create_dir(&a.output_dir)?;
    write_text(&a.output_dir.join("growth_series.csv"), &series.to_csv(calibration.as_ref()))?;
    write_text(&a.output_dir.join("cardinal_widths.csv"), &measure::cardinal_csv(&cardinal))?;
    println!("rings: {}", rings.len());
    if let Some(f) = calibration {
        println!("m_mm_per_px: {:.9}", f.m);
    }
    Ok(())
}

struct ManifestRow {
    image: PathBuf,
    pith: [f64; 2],
    gt: PathBuf,
    mask: Option<PathBuf>,
}

fn read_manifest(path: &Path) -> CmdResult<Vec<ManifestRow>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))
        .map_err(input)?;
    let headers = rdr.headers().map_err(input)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(ci), Some(cx), Some(cy), Some(cg)) = (col("image"), col("cx"), col("cy"), col("gt")) else {
        return Err(input(anyhow!("{}: header must contain image,cx,cy,gt", path.display())));
    };
    let cm = col("mask");
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(input)?;
        let field = |k: usize| rec.get(k).unwrap_or("").to_string();
        let num = |k: usize| -> CmdResult<f64> {
            field(k)
                .parse()
                .map_err(|_| input(anyhow!("{}: row {row}: {:?} is not a number", path.display(), field(k))))
        };
        let resolve = |s: String| base.join(s);
        rows.push(ManifestRow {
            image: resolve(field(ci)),
            pith: [num(cx)?, num(cy)?],
            gt: resolve(field(cg)),
            mask: cm.map(field).filter(|s| !s.is_empty()).map(resolve),
        });
    }
    Ok(rows)
}

struct Summary {
    name: String,
    tp: usize,
    fp: usize,
    fn_count: usize,
    report: Option<EvalReport>,
    time: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

pub fn batch(a: BatchArgs) -> CmdResult {
    check_th(a.th)?;
    let params = validated(a.params.params())?;
    let rows = read_manifest(&a.manifest)?;
    create_dir(&a.output_dir)?;

    let results: Vec<CmdResult<Summary>> = rows
        .par_iter()
        .map(|row| {
            let name = row
                .image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let out = a.output_dir.join(&name);
            let (_, time) = run_detection(&row.image, row.mask.as_deref(), row.pith, &params, &out)?;
            let image = load_image(&row.image)?;
            let s = score_files(&out.join("detection.json"), &row.gt, row.pith, image.dimensions(), params.nb_rays, a.th)?;
            if a.reports {
                evaluate::render_reports(&image, &s.web, &s.gt, &s.detections, &s.assignment, &out).map_err(internal)?;
            }
            Ok(Summary {
                name,
                tp: s.assignment.tp(),
                fp: s.assignment.fp(),
                fn_count: s.assignment.fn_count(),
                report: s.report,
                time,
            })
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image", "TP", "FP", "FN", "P", "R", "F", "RMSE", "time_s"])
        .map_err(internal)?;
    let mut first_error = None;
    let mut ok = Vec::new();
    for (row, r) in rows.iter().zip(results) {
        match r {
            Ok(s) => {
                let rep = s.report.as_ref();
                w.write_record([
                    s.name.clone(),
                    s.tp.to_string(),
                    s.fp.to_string(),
                    s.fn_count.to_string(),
                    fmt_opt(rep.map(|r| r.precision)),
                    fmt_opt(rep.map(|r| r.recall)),
                    fmt_opt(rep.map(|r| r.fscore)),
                    fmt_opt(rep.and_then(|r| r.rmse_overall)),
                    format!("{:.2}", s.time),
                ])
                .map_err(internal)?;
                ok.push(s);
            }
            Err(e) => {
                let msg = match &e {
                    Failure::Input(e) | Failure::Internal(e) => format!("{e:#}"),
                };
                eprintln!("{}: {msg}", row.image.display());
                first_error.get_or_insert(e);
            }
        }
    }
    let mean = |f: &dyn Fn(&Summary) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = ok.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    w.write_record([
        "Average".to_string(),
        String::new(),
        String::new(),
        String::new(),
        fmt_opt(mean(&|s| s.report.as_ref().map(|r| r.precision))),
        fmt_opt(mean(&|s| s.report.as_ref().map(|r| r.recall))),
        fmt_opt(mean(&|s| s.report.as_ref().map(|r| r.fscore))),
        fmt_opt(mean(&|s| s.report.as_ref().and_then(|r| r.rmse_overall))),
        fmt_opt(mean(&|s| Some(s.time))),
    ])
    .map_err(internal)?;
    let text = String::from_utf8(w.into_inner().map_err(|e| internal(anyhow!("{e}")))?).map_err(internal)?;
    write_text(&a.output_dir.join("summary.csv"), &text)?;
    print!("{text}");
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
