use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use interlerp::metrics::{crossings, monotonicity, moving_average3, MonotonicityReport};
use interlerp::sweep::RunManifest;
use interlerp::Error;
use plotters::prelude::*;
use serde::Serialize;

use crate::error::CliError;

pub const SUMMARY_FILE: &str = "summary.csv";

const CONFIDENCE_HEADER: [&str; 7] = ["source", "target", "step", "e", "class_index", "mean_confidence", "std_confidence"];
const VA_HEADER: [&str; 7] = ["emotion", "step", "e", "mean_valence", "std_valence", "mean_arousal", "std_arousal"];
const SIZE: (u32, u32) = (640, 420);

/// One per-trajectory line of `summary.csv`. Confidence trajectories put
/// the target-class curve first and the source-class curve second; VA
/// trajectories put valence first and arousal second.
#[derive(Debug, Serialize)]
struct SummaryRow {
    kind: &'static str,
    source: String,
    target: String,
    n_steps: usize,
    primary: &'static str,
    primary_rho: f64,
    primary_direction: String,
    primary_start: f64,
    primary_end: f64,
    secondary: &'static str,
    secondary_rho: f64,
    secondary_direction: String,
    /// Source/target crossings after 3-point smoothing (confidence only).
    crossings: Option<usize>,
}

pub struct ReportOutcome {
    pub plots: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Confidence curves keyed by (source, target): per step `(e, means)`.
type ConfidenceCurves = BTreeMap<(usize, usize), BTreeMap<usize, (f64, BTreeMap<usize, f64>)>>;
/// VA curves keyed by emotion: per step `(e, valence, arousal)`.
type VaCurves = BTreeMap<String, BTreeMap<usize, (f64, f64, f64)>>;

enum Parsed {
    Confidence(ConfidenceCurves),
    Va(VaCurves),
}

fn bad(path: &Path, msg: impl Into<String>) -> CliError {
    Error::format(path, msg).into()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path, line: usize) -> Result<T, CliError> {
    rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad(path, format!("line {line}: column {} is not a valid value", i + 1)))
}

fn parse(path: &Path) -> Result<Parsed, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut rows = 0;
    let parsed = if header == CONFIDENCE_HEADER {
        let mut curves = ConfidenceCurves::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let key = (field(&rec, 0, path, line)?, field(&rec, 1, path, line)?);
            let step: usize = field(&rec, 2, path, line)?;
            let e: f64 = field(&rec, 3, path, line)?;
            let class: usize = field(&rec, 4, path, line)?;
            let mean: f64 = field(&rec, 5, path, line)?;
            curves.entry(key).or_default().entry(step).or_insert_with(|| (e, BTreeMap::new())).1.insert(class, mean);
            rows += 1;
        }
        Parsed::Confidence(curves)
    } else if header == VA_HEADER {
        let mut curves = VaCurves::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let emotion = rec.get(0).unwrap_or_default().to_owned();
            let step: usize = field(&rec, 1, path, line)?;
            let point = (field(&rec, 2, path, line)?, field(&rec, 3, path, line)?, field(&rec, 5, path, line)?);
            curves.entry(emotion).or_default().insert(step, point);
            rows += 1;
        }
        Parsed::Va(curves)
    } else {
        return Err(bad(path, format!("unrecognised sweep header {header:?}")));
    };
    if rows == 0 {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())).into());
    }
    Ok(parsed)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn plot_err<E: std::error::Error>(e: E) -> CliError {
    Error::Data(format!("plotting failed: {e}")).into()
}

fn trend(series: &[f64]) -> Result<MonotonicityReport, CliError> {
    Ok(monotonicity(series)?)
}

/// Plots every trajectory in `inputs` and writes `summary.csv` into `out`.
pub fn render(inputs: &[PathBuf], out: &Path, all_classes: bool) -> Result<ReportOutcome, CliError> {
    std::fs::create_dir_all(out).map_err(Error::io(format!("creating {}", out.display())))?;
    let parsed: Vec<(PathBuf, Parsed)> = inputs.iter().map(|p| parse(p).map(|x| (p.clone(), x))).collect::<Result<_, _>>()?;
    let mut plots = Vec::new();
    let mut summary = Vec::new();
    for (path, p) in parsed {
        // class names come from the sweep's sidecar manifest when present
        let sidecar = path.with_file_name(interlerp::sweep::MANIFEST_FILE);
        let names = RunManifest::read(&sidecar).ok().map(|m| m.label_map);
        let name = |i: usize| names.as_ref().and_then(|n| n.name(i).map(str::to_owned)).unwrap_or_else(|| i.to_string());
        match p {
            Parsed::Confidence(curves) => {
                for ((s, t), steps) in curves {
                    let es: Vec<f64> = steps.values().map(|(e, _)| *e).collect();
                    let class_series =
                        |c: usize| -> Vec<f64> { steps.values().map(|(_, m)| m.get(&c).copied().unwrap_or(f64::NAN)).collect() };
                    let (src, tgt) = (class_series(s), class_series(t));
                    let file = out.join(format!("confidence_{}_{}.svg", sanitize(&name(s)), sanitize(&name(t))));
                    let mut lines =
                        vec![(format!("{} (source)", name(s)), src.clone(), BLUE), (format!("{} (target)", name(t)), tgt.clone(), RED)];
                    if all_classes {
                        let classes: Vec<usize> = steps.values().next().map(|(_, m)| m.keys().copied().collect()).unwrap_or_default();
                        for c in classes.into_iter().filter(|&c| c != s && c != t) {
                            lines.push((name(c), class_series(c), RGBColor(170, 170, 170)));
                        }
                    }
                    plot(&file, &format!("{} -> {}", name(s), name(t)), "mean confidence", (0.0, 1.0), &es, &lines)?;
                    plots.push(file);
                    let (rt, rs) = (trend(&tgt)?, trend(&src)?);
                    summary.push(SummaryRow {
                        kind: "confidence",
                        source: name(s),
                        target: name(t),
                        n_steps: es.len(),
                        primary: "target_confidence",
                        primary_rho: rt.spearman_rho,
                        primary_direction: format!("{:?}", rt.direction).to_lowercase(),
                        primary_start: tgt[0],
                        primary_end: tgt[tgt.len() - 1],
                        secondary: "source_confidence",
                        secondary_rho: rs.spearman_rho,
                        secondary_direction: format!("{:?}", rs.direction).to_lowercase(),
                        crossings: Some(crossings(&moving_average3(&src), &moving_average3(&tgt))),
                    });
                }
            }
            Parsed::Va(curves) => {
                let neutral = RunManifest::read(&sidecar).ok().and_then(|m| m.neutral).unwrap_or_else(|| "neutral".into());
                for (emotion, steps) in curves {
                    let es: Vec<f64> = steps.values().map(|p| p.0).collect();
                    let v: Vec<f64> = steps.values().map(|p| p.1).collect();
                    let a: Vec<f64> = steps.values().map(|p| p.2).collect();
                    let file = out.join(format!("va_{}.svg", sanitize(&emotion)));
                    let lines = vec![("valence".to_owned(), v.clone(), RED), ("arousal".to_owned(), a.clone(), GREEN)];
                    plot(&file, &format!("{neutral} -> {emotion}"), "mean prediction", (-1.0, 1.0), &es, &lines)?;
                    plots.push(file);
                    let (rv, ra) = (trend(&v)?, trend(&a)?);
                    summary.push(SummaryRow {
                        kind: "va",
                        source: neutral.clone(),
                        target: emotion,
                        n_steps: es.len(),
                        primary: "valence",
                        primary_rho: rv.spearman_rho,
                        primary_direction: format!("{:?}", rv.direction).to_lowercase(),
                        primary_start: v[0],
                        primary_end: v[v.len() - 1],
                        secondary: "arousal",
                        secondary_rho: ra.spearman_rho,
                        secondary_direction: format!("{:?}", ra.direction).to_lowercase(),
                        crossings: None,
                    });
                }
            }
        }
    }
    let summary_path = out.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&summary_path)?;
    for row in &summary {
        w.serialize(row)?;
    }
    w.flush().map_err(Error::io(format!("writing {}", summary_path.display())))?;
    Ok(ReportOutcome { plots, summary: summary_path })
}

fn plot(
    file: &Path,
    title: &str,
    y_desc: &str,
    (y0, y1): (f64, f64),
    xs: &[f64],
    lines: &[(String, Vec<f64>, RGBColor)],
) -> Result<(), CliError> {
    let root = SVGBackend::new(file, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(0f64..1f64, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("mass on target (e)").y_desc(y_desc).draw().map_err(plot_err)?;
    // background curves first so the highlighted pair stays on top
    for (label, ys, color) in lines.iter().rev() {
        let color = *color;
        chart
            .draw_series(LineSeries::new(xs.iter().copied().zip(ys.iter().copied()), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperMiddle)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn va_csv_round() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("va_sweep.csv");
        let mut text = VA_HEADER.join(",") + "\n";
        for s in 0..11 {
            let e = s as f64 / 10.0;
            text += &format!("happiness,{s},{e},{},0.1,{},0.1\n", 0.8 * e, 0.5 * e);
        }
        std::fs::write(&csv_path, text).unwrap();
        let out = dir.path().join("report");
        let r = render(&[csv_path], &out, false).unwrap();
        assert_eq!(r.plots.len(), 1);
        let svg = std::fs::read_to_string(&r.plots[0]).unwrap();
        assert!(svg.contains("<svg"));
        let summary = std::fs::read_to_string(r.summary).unwrap();
        assert_eq!(summary.lines().count(), 2);
        assert!(summary.lines().nth(1).unwrap().starts_with("va,neutral,happiness,11,valence,1.0,"), "{summary}");
    }

    #[test]
    fn rejects_empty_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, CONFIDENCE_HEADER.join(",") + "\n").unwrap();
        assert!(matches!(render(&[empty], dir.path(), false), Err(CliError::Core(Error::EmptyInput(_)))));
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,b\n1,2\n").unwrap();
        assert!(matches!(render(&[bad], dir.path(), false), Err(CliError::Core(Error::Format { .. }))));
    }
}
