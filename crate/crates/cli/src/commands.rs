use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use vcd_core::encoder::build_encoder;
use vcd_core::media::{load_frame, load_video, resolve_manifest, textured_frame, Frame, Video};
use vcd_core::metrics::{MetricConfig, Scorer, Variant, VcdReport};
use vcd_core::plot::{line_chart, reports_chart};
use vcd_core::reward::{optimize, FrameParams, ParamVideo};
use vcd_core::spectra::{amplitude_points, dft2, phase_points, PointCloud};
use vcd_core::{report, Result, VcdError};

use crate::OutputArgs;

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| VcdError::Config(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| VcdError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn load_inputs(video: &Path, cond: Option<&Path>) -> Result<(Video, Option<Frame>)> {
    let paths = resolve_manifest(video)?;
    let video = load_video(&paths, 1)?;
    let cond = cond.map(|p| load_frame(p, None)).transpose()?;
    Ok((video, cond))
}

fn write_report(out: &OutputArgs, stem: &str, r: &VcdReport) -> Result<()> {
    if out.format.json() {
        write(&out.out.join(format!("{stem}.json")), &report::to_json(r))?;
    }
    if out.format.csv() {
        write(&out.out.join(format!("{stem}.csv")), &report::to_csv(r))?;
    }
    Ok(())
}

pub fn score(video: &Path, cond: Option<&Path>, variant: Variant, cfg: &MetricConfig, out: &OutputArgs) -> Result<()> {
    let (video, cond) = load_inputs(video, cond)?;
    let r = Scorer::new(cfg)?.score_video(&video, cond.as_ref(), variant)?;
    create_dir(&out.out)?;
    write_report(out, "report", &r)?;
    if out.plot {
        write(&out.out.join("report.svg"), &reports_chart(variant.name(), &[(variant.name(), &r)]))?;
    }
    println!("{}: mean {} over {} frames", variant.name(), r.mean, r.frames.len());
    Ok(())
}

#[derive(Serialize)]
struct Comparison<'a> {
    variant: &'a str,
    a: String,
    b: String,
    mean_a: f64,
    mean_b: f64,
    difference: f64,
    more_consistent: &'a str,
}

pub fn compare(
    a: &Path,
    b: &Path,
    cond: Option<&Path>,
    variant: Variant,
    cfg: &MetricConfig,
    out: &OutputArgs,
) -> Result<()> {
    let scorer = Scorer::new(cfg)?;
    let cond = cond.map(|p| load_frame(p, None)).transpose()?;
    let (va, _) = load_inputs(a, None)?;
    let (vb, _) = load_inputs(b, None)?;
    let ra = scorer.score_video(&va, cond.as_ref(), variant)?;
    let rb = scorer.score_video(&vb, cond.as_ref(), variant)?;
    create_dir(&out.out)?;
    write_report(out, "report_a", &ra)?;
    write_report(out, "report_b", &rb)?;
    let more_consistent = match ra.mean.total_cmp(&rb.mean) {
        std::cmp::Ordering::Less => "a",
        std::cmp::Ordering::Greater => "b",
        std::cmp::Ordering::Equal => "tie",
    };
    let summary = Comparison {
        variant: variant.name(),
        a: a.display().to_string(),
        b: b.display().to_string(),
        mean_a: ra.mean,
        mean_b: rb.mean,
        difference: ra.mean - rb.mean,
        more_consistent,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write(&out.out.join("comparison.json"), &text)?;
    if out.plot {
        write(&out.out.join("comparison.svg"), &reports_chart(variant.name(), &[("a", &ra), ("b", &rb)]))?;
    }
    println!("{}: a {} b {} ({more_consistent} more consistent)", variant.name(), ra.mean, rb.mean);
    Ok(())
}

pub fn ablate(video: &Path, cond: Option<&Path>, cfg: &MetricConfig, out: &OutputArgs) -> Result<()> {
    let (video, cond) = load_inputs(video, cond)?;
    let scorer = Scorer::new(cfg)?;
    let reports = Variant::ALL
        .iter()
        .map(|&v| scorer.score_video(&video, cond.as_ref(), v))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&out.out)?;
    let mut summary = String::from("variant,sum,mean\n");
    for r in &reports {
        write_report(out, r.variant.name(), r)?;
        let _ = writeln!(summary, "{},{},{}", r.variant.name(), r.sum, r.mean);
    }
    write(&out.out.join("summary.csv"), &summary)?;
    if out.plot {
        let labelled: Vec<(&str, &VcdReport)> = reports.iter().map(|r| (r.variant.name(), r)).collect();
        write(&out.out.join("ablation.svg"), &reports_chart("ablation", &labelled))?;
    }
    print!("{summary}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn optimize_demo(
    cond: Option<&Path>,
    frames: usize,
    (dx, dy): (i64, i64),
    budget: usize,
    seed: u64,
    cfg: &MetricConfig,
    plot: bool,
    out: &Path,
) -> Result<()> {
    let cond = match cond {
        Some(p) => load_frame(p, None)?,
        None => textured_frame(16, 16, 3, seed)?,
    };
    let init = ParamVideo::uniform(frames, FrameParams::shift(dx, dy))?;
    let trace = optimize(&cond, &init, budget, seed, cfg)?;
    create_dir(out)?;
    write(&out.join("trace.json"), &trace.to_json())?;
    if plot {
        let series = vec![(
            "objective".to_string(),
            trace.objectives.iter().enumerate().map(|(k, o)| (k as f64, *o)).collect(),
        )];
        write(&out.join("trace.svg"), &line_chart("optimization", "evaluation", "objective", &series))?;
    }
    println!(
        "objective {} -> {} after {} evaluations",
        trace.initial_objective(),
        trace.best.objective,
        trace.iterations()
    );
    Ok(())
}

fn cloud_csv(cloud: &PointCloud) -> String {
    let mut s = String::from("point");
    for d in 0..cloud.dim() {
        let _ = write!(s, ",x{d}");
    }
    s.push('\n');
    for (k, p) in cloud.iter().enumerate() {
        let _ = write!(s, "{k}");
        for v in p {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn inspect_spectrum(image: &Path, cfg: &MetricConfig, out: &Path) -> Result<()> {
    let frame = load_frame(image, None)?;
    let encoder = build_encoder(&cfg.encoder, None)?;
    create_dir(out)?;
    for map in encoder.encode(&frame)? {
        let spectrum = dft2(&map);
        let amp = amplitude_points(&spectrum, cfg.mode);
        let phase = phase_points(&spectrum, cfg.mode, cfg.eps_rel)?;
        let tap = map.tap().name();
        write(&out.join(format!("{tap}_amplitude.csv")), &cloud_csv(&amp))?;
        write(&out.join(format!("{tap}_phase.csv")), &cloud_csv(&phase))?;
        println!(
            "{tap}: {}x{}x{}, {} points of dimension {}",
            map.channels(),
            map.height(),
            map.width(),
            amp.len(),
            amp.dim()
        );
    }
    Ok(())
}
