//! Aggregation over persisted run files and dependency-free SVG charts.
//!
//! Reporting never reuses in-memory results: every table cell and chart point
//! is recomputed from the curve and record files a grid left on disk, so any
//! published number can be traced back to (and regenerated from) raw files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::files::{load_curves, read_json, write_json, CurveRow, RunRecord};
use super::ReportFormat;

// ---------------------------------------------------------------------------
// Reading runs back
// ---------------------------------------------------------------------------

/// One run as reconstructed from disk.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub curves: Vec<CurveRow>,
}

/// Loads every run directory under `runs_dir`, sorted by directory name so
/// downstream output is independent of filesystem iteration order.
pub fn load_runs(runs_dir: &Path) -> Result<Vec<LoadedRun>> {
    let mut dirs: Vec<PathBuf> = match fs::read_dir(runs_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.join("run.json").is_file())
            .collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::NoRuns(runs_dir.display().to_string()));
    }
    dirs.into_iter()
        .map(|dir| {
            Ok(LoadedRun {
                record: read_json(&dir.join("run.json"))?,
                curves: load_curves(&dir.join("curves.csv"))?,
                dir,
            })
        })
        .collect()
}

fn last_value(curves: &[CurveRow], direction: &str, loss_name: &str) -> Option<f64> {
    curves
        .iter()
        .filter(|r| r.direction == direction && r.loss_name == loss_name)
        .max_by_key(|r| r.step)
        .map(|r| r.value)
}

// ---------------------------------------------------------------------------
// Aggregate comparison table
// ---------------------------------------------------------------------------

/// Mean and spread of one metric across a strategy's seeds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Stat {
        let n = values.len().max(1) as f64;
        Stat {
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Per-strategy summary over seeds. Metrics come from each run's final
/// checkpoint (dual reconstruction loss, exact model MI) and its test-set
/// evaluation (token accuracy, marginal KL) when one was recorded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: String,
    pub n_runs: usize,
    pub recon_loss: Stat,
    pub token_accuracy: Stat,
    /// NaN when runs carried no test evaluation.
    pub marginal_kl: Stat,
    pub mi: Stat,
    /// Names of the columns this strategy wins (lowest loss/KL, highest
    /// accuracy/MI).
    pub best_in: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregateTable {
    pub task_hash: u64,
    pub rows: Vec<AggregateRow>,
}

/// Groups loaded runs by strategy and summarizes the comparison metrics,
/// marking the best mean per column. Refuses to mix different tasks.
pub fn aggregate(runs: &[LoadedRun]) -> Result<AggregateTable> {
    if runs.is_empty() {
        return Err(Error::NoRuns("aggregation input".into()));
    }
    let task_hash = runs[0].record.task_hash;
    if let Some(bad) = runs.iter().find(|r| r.record.task_hash != task_hash) {
        return Err(Error::InvalidConfig(format!(
            "cannot aggregate runs from different tasks: {} does not match {}",
            bad.dir.display(),
            runs[0].dir.display()
        )));
    }

    let mut groups: BTreeMap<&str, Vec<&LoadedRun>> = BTreeMap::new();
    for run in runs {
        groups.entry(&run.record.strategy).or_default().push(run);
    }

    let mut rows = Vec::new();
    for (strategy, members) in groups {
        let collect = |f: &dyn Fn(&LoadedRun) -> Option<f64>| -> Vec<f64> {
            members.iter().filter_map(|r| f(r)).collect()
        };
        let recon = collect(&|r| last_value(&r.curves, "both", "recon_loss"));
        let accuracy = collect(&|r| {
            r.record
                .final_eval
                .map(|e| e.token_accuracy)
                .or_else(|| last_value(&r.curves, "x2y", "token_accuracy"))
        });
        let kl = collect(&|r| r.record.final_eval.map(|e| e.marginal_kl));
        let mi = collect(&|r| last_value(&r.curves, "x2y", "mi"));
        rows.push(AggregateRow {
            strategy: strategy.to_string(),
            n_runs: members.len(),
            recon_loss: Stat::of(&recon),
            token_accuracy: Stat::of(&accuracy),
            marginal_kl: if kl.is_empty() {
                Stat { mean: f64::NAN, min: f64::NAN, max: f64::NAN }
            } else {
                Stat::of(&kl)
            },
            mi: Stat::of(&mi),
            best_in: Vec::new(),
        });
    }

    let mark = |rows: &mut Vec<AggregateRow>, name: &str, key: &dyn Fn(&AggregateRow) -> f64, lower: bool| {
        let winner = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| key(r).is_finite())
            .min_by(|a, b| {
                let (ka, kb) = (key(a.1), key(b.1));
                if lower { ka.total_cmp(&kb) } else { kb.total_cmp(&ka) }
            })
            .map(|(i, _)| i);
        if let Some(i) = winner {
            rows[i].best_in.push(name.to_string());
        }
    };
    mark(&mut rows, "recon_loss", &|r| r.recon_loss.mean, true);
    mark(&mut rows, "token_accuracy", &|r| r.token_accuracy.mean, false);
    mark(&mut rows, "marginal_kl", &|r| r.marginal_kl.mean, true);
    mark(&mut rows, "mi", &|r| r.mi.mean, false);

    Ok(AggregateTable { task_hash, rows })
}

pub fn aggregate_csv(table: &AggregateTable) -> String {
    let mut out = String::from(
        "strategy,n_runs,recon_loss_mean,recon_loss_min,recon_loss_max,\
         token_accuracy_mean,token_accuracy_min,token_accuracy_max,\
         marginal_kl_mean,marginal_kl_min,marginal_kl_max,\
         mi_mean,mi_min,mi_max,best_in\n",
    );
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.strategy,
            r.n_runs,
            r.recon_loss.mean,
            r.recon_loss.min,
            r.recon_loss.max,
            r.token_accuracy.mean,
            r.token_accuracy.min,
            r.token_accuracy.max,
            r.marginal_kl.mean,
            r.marginal_kl.min,
            r.marginal_kl.max,
            r.mi.mean,
            r.mi.min,
            r.mi.max,
            r.best_in.join(";"),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// SVG learning-curve charts
// ---------------------------------------------------------------------------

/// One line on a chart panel.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// One panel: a titled plot of several series over training steps.
#[derive(Clone, Debug)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 10] = [
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7", "#a463f2", "#97bbf5",
    "#9c6b4e", "#9498a0",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.06 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

/// Draws the panels side by side with a shared legend underneath. Pure
/// string assembly — no plotting dependency — and deterministic for fixed
/// input, including coordinate rounding.
pub fn render_chart(title: &str, panels: &[Panel]) -> String {
    const PW: f64 = 340.0; // panel width
    const PH: f64 = 240.0; // panel height
    const ML: f64 = 58.0; // left margin inside a panel
    const MB: f64 = 34.0; // bottom margin inside a panel
    const MT: f64 = 26.0;
    const MR: f64 = 12.0;
    const GAP: f64 = 26.0;

    let labels: Vec<&str> = panels
        .first()
        .map(|p| p.series.iter().map(|s| s.label.as_str()).collect())
        .unwrap_or_default();
    let legend_rows = labels.len().div_ceil(4);
    let width = panels.len() as f64 * (PW + GAP) - GAP.min(1.0 * panels.len() as f64) + 20.0;
    let height = PH + 70.0 + legend_rows as f64 * 18.0;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.0} {height:.0}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n\
         <text x=\"{:.0}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" font-weight=\"bold\">{}</text>\n",
        width / 2.0,
        escape(title)
    );

    for (pi, panel) in panels.iter().enumerate() {
        let ox = 10.0 + pi as f64 * (PW + GAP);
        let oy = 30.0;
        let x0 = ox + ML;
        let y0 = oy + MT;
        let iw = PW - ML - MR;
        let ih = PH - MT - MB;

        let (xlo, xhi) =
            nice_bounds(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (ylo, yhi) =
            nice_bounds(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let sx = |v: f64| x0 + (v - xlo) / (xhi - xlo) * iw;
        let sy = |v: f64| y0 + ih - (v - ylo) / (yhi - ylo) * ih;

        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n\
             <rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{iw:.1}\" height=\"{ih:.1}\" \
             fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n",
            x0 + iw / 2.0,
            oy + 14.0,
            escape(&panel.title)
        );
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let yv = ylo + f * (yhi - ylo);
            let xv = xlo + f * (xhi - xlo);
            let _ = write!(
                svg,
                "<line x1=\"{x0:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
                sy(yv),
                x0 + iw,
                sy(yv),
                x0 - 5.0,
                sy(yv) + 3.5,
                fmt_tick(yv),
                sx(xv),
                y0 + ih + 14.0,
                fmt_tick(xv),
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">step</text>\n",
            x0 + iw / 2.0,
            y0 + ih + 28.0
        );
        for (si, series) in panel.series.iter().enumerate() {
            if series.points.is_empty() {
                continue;
            }
            let color = PALETTE[si % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                pts.join(" ")
            );
        }
    }

    for (i, label) in labels.iter().enumerate() {
        let lx = 20.0 + (i % 4) as f64 * 170.0;
        let ly = PH + 52.0 + (i / 4) as f64 * 18.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = write!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"14\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>\n",
            ly - 3.0,
            lx + 19.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Builds the three standard panels — dual reconstruction loss, token
/// accuracy, and forward-model mutual information — with one line per
/// strategy, averaging across seeds at each recorded step.
pub fn curve_panels(runs: &[LoadedRun]) -> Vec<Panel> {
    let spec: [(&str, &str, &str); 3] = [
        ("dual reconstruction loss", "both", "recon_loss"),
        ("token accuracy", "x2y", "token_accuracy"),
        ("model mutual information", "x2y", "mi"),
    ];
    let mut strategies: Vec<&str> = runs.iter().map(|r| r.record.strategy.as_str()).collect();
    strategies.sort_unstable();
    strategies.dedup();

    spec.iter()
        .map(|&(title, direction, loss_name)| Panel {
            title: title.to_string(),
            series: strategies
                .iter()
                .map(|&strategy| {
                    // step → (sum, count) across this strategy's seeds.
                    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
                    for run in runs.iter().filter(|r| r.record.strategy == strategy) {
                        for row in run
                            .curves
                            .iter()
                            .filter(|r| r.direction == direction && r.loss_name == loss_name)
                        {
                            let slot = acc.entry(row.step).or_insert((0.0, 0));
                            slot.0 += row.value;
                            slot.1 += 1;
                        }
                    }
                    Series {
                        label: strategy.to_string(),
                        points: acc
                            .into_iter()
                            .map(|(step, (sum, n))| (step as f64, sum / n as f64))
                            .collect(),
                    }
                })
                .collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------

/// Index of everything a `report` invocation produced, with paths relative
/// to the experiment directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportBundle {
    pub aggregate_json: String,
    pub aggregate_csv: Option<String>,
    pub chart_svg: Option<String>,
    pub curve_files: Vec<String>,
    pub run_records: Vec<String>,
    pub mi_files: Vec<String>,
    pub manifest: String,
}

fn rel(base: &Path, path: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}

/// Aggregates the persisted runs under `exp_dir` into `exp_dir/report/`:
/// always a JSON table, plus CSV and SVG per the requested formats.
pub fn write_report(exp_dir: &Path, formats: &[ReportFormat]) -> Result<ReportBundle> {
    let runs_dir = exp_dir.join("runs");
    let runs = load_runs(&runs_dir)?;
    let table = aggregate(&runs)?;

    let report_dir = exp_dir.join("report");
    fs::create_dir_all(&report_dir)?;

    let agg_json = report_dir.join("aggregate.json");
    write_json(&agg_json, &table)?;

    let mut bundle = ReportBundle {
        aggregate_json: rel(exp_dir, &agg_json),
        aggregate_csv: None,
        chart_svg: None,
        curve_files: runs.iter().map(|r| rel(exp_dir, &r.dir.join("curves.csv"))).collect(),
        run_records: runs.iter().map(|r| rel(exp_dir, &r.dir.join("run.json"))).collect(),
        mi_files: runs
            .iter()
            .map(|r| r.dir.join("mi.json"))
            .filter(|p| p.is_file())
            .map(|p| rel(exp_dir, &p))
            .collect(),
        manifest: "manifest.json".into(),
    };

    if formats.contains(&ReportFormat::Csv) {
        let path = report_dir.join("aggregate.csv");
        fs::write(&path, aggregate_csv(&table))?;
        bundle.aggregate_csv = Some(rel(exp_dir, &path));
    }
    if formats.contains(&ReportFormat::Svg) {
        let path = report_dir.join("charts.svg");
        fs::write(&path, render_chart("training curves", &curve_panels(&runs)))?;
        bundle.chart_svg = Some(rel(exp_dir, &path));
    }

    write_json(&report_dir.join("bundle.json"), &bundle)?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::files::{save_curves, write_json};
    use crate::train::{CurveRecord, Strategy, TrainConfig};
    use approx::assert_relative_eq;

    fn fake_record(strategy: &str, seed: u64, task_hash: u64, final_metrics: CurveRecord) -> RunRecord {
        let mut train = TrainConfig::default();
        train.strategy = strategy.parse::<Strategy>().unwrap();
        train.seed = seed;
        RunRecord {
            strategy: strategy.into(),
            seed,
            task_hash,
            train,
            pretrain_steps: 0,
            final_metrics,
            final_eval: None,
        }
    }

    fn metrics(step: usize, recon: f64, acc: f64, mi: f64) -> CurveRecord {
        CurveRecord {
            step,
            recon_loss_tst: recon + 0.1,
            recon_loss_sts: recon - 0.1,
            recon_loss_avg: recon,
            supervised_loss: recon + 0.5,
            j_dual: -2.0 * recon,
            mi_theta: mi,
            mi_phi: mi * 0.9,
            token_accuracy: acc,
        }
    }

    fn write_run(
        runs_dir: &Path,
        strategy: &str,
        seed: u64,
        task_hash: u64,
        curves: &[CurveRecord],
    ) {
        let dir = runs_dir.join(format!("{strategy}-seed{seed}"));
        fs::create_dir_all(&dir).unwrap();
        save_curves(&dir.join("curves.csv"), strategy, seed, curves).unwrap();
        let record = fake_record(strategy, seed, task_hash, curves.last().unwrap().clone());
        write_json(&dir.join("run.json"), &record).unwrap();
    }

    #[test]
    fn missing_runs_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        match load_runs(&dir.path().join("runs")) {
            Err(Error::NoRuns(_)) => {}
            other => panic!("expected NoRuns, got {other:?}"),
        }
    }

    #[test]
    fn single_run_aggregates_to_its_own_record() {
        let dir = tempfile::tempdir().unwrap();
        let m = metrics(100, 1.5, 0.75, 0.9);
        write_run(dir.path(), "supervised", 0, 7, &[metrics(0, 3.0, 0.2, 0.1), m.clone()]);
        let runs = load_runs(dir.path()).unwrap();
        let table = aggregate(&runs).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.n_runs, 1);
        assert_eq!(row.recon_loss.mean, m.recon_loss_avg);
        assert_eq!(row.token_accuracy.mean, m.token_accuracy);
        assert_eq!(row.mi.mean, m.mi_theta);
        assert!(row.marginal_kl.mean.is_nan());
        // A single row wins every column it has finite values for.
        assert_eq!(row.best_in, vec!["recon_loss", "token_accuracy", "mi"]);
    }

    #[test]
    fn two_seeds_average_arithmetically_and_best_is_marked() {
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), "supervised", 0, 7, &[metrics(100, 2.0, 0.5, 0.4)]);
        write_run(dir.path(), "supervised", 1, 7, &[metrics(100, 1.0, 0.7, 0.6)]);
        write_run(dir.path(), "ibt-batch", 0, 7, &[metrics(100, 0.8, 0.9, 1.0)]);
        let table = aggregate(&load_runs(dir.path()).unwrap()).unwrap();
        assert_eq!(table.rows.len(), 2);
        let sup = table.rows.iter().find(|r| r.strategy == "supervised").unwrap();
        assert_relative_eq!(sup.recon_loss.mean, 1.5);
        assert_relative_eq!(sup.token_accuracy.mean, 0.6);
        assert_eq!(sup.recon_loss.min, 1.0);
        assert_eq!(sup.recon_loss.max, 2.0);
        assert!(sup.best_in.is_empty());
        let ibt = table.rows.iter().find(|r| r.strategy == "ibt-batch").unwrap();
        assert_eq!(ibt.best_in, vec!["recon_loss", "token_accuracy", "mi"]);
    }

    #[test]
    fn aggregation_refuses_mixed_tasks() {
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), "supervised", 0, 7, &[metrics(100, 2.0, 0.5, 0.4)]);
        write_run(dir.path(), "bt", 0, 8, &[metrics(100, 1.0, 0.7, 0.6)]);
        match aggregate(&load_runs(dir.path()).unwrap()) {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("different tasks")),
            other => panic!("expected mixed-task error, got {other:?}"),
        }
    }

    #[test]
    fn table_means_match_independent_recomputation_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        for seed in 0..5u64 {
            let f = seed as f64;
            write_run(
                dir.path(),
                "bt",
                seed,
                3,
                &[metrics(0, 3.0, 0.1, 0.0), metrics(50, 2.0 - 0.1 * f, 0.5 + 0.05 * f, 0.2 * f)],
            );
        }
        let runs = load_runs(dir.path()).unwrap();
        let table = aggregate(&runs).unwrap();
        // Recompute straight from the CSV files, bypassing aggregate().
        let mut recon = Vec::new();
        for seed in 0..5u64 {
            let rows = load_curves(&dir.path().join(format!("bt-seed{seed}/curves.csv"))).unwrap();
            let last = rows
                .iter()
                .filter(|r| r.direction == "both" && r.loss_name == "recon_loss")
                .max_by_key(|r| r.step)
                .unwrap();
            assert_eq!(last.strategy, "bt");
            assert_eq!(last.seed, seed);
            recon.push(last.value);
        }
        let mean = recon.iter().sum::<f64>() / recon.len() as f64;
        assert_eq!(table.rows[0].recon_loss.mean, mean);
    }

    #[test]
    fn chart_contains_a_polyline_per_strategy_and_escapes_text() {
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), "supervised", 0, 7, &[metrics(0, 3.0, 0.2, 0.1), metrics(100, 2.0, 0.5, 0.4)]);
        write_run(dir.path(), "dl-0.5", 0, 7, &[metrics(0, 3.0, 0.2, 0.1), metrics(100, 1.0, 0.7, 0.6)]);
        let runs = load_runs(dir.path()).unwrap();
        let svg = render_chart("a<b & c", &curve_panels(&runs));
        assert_eq!(svg.matches("<polyline").count(), 6, "2 strategies x 3 panels");
        assert!(svg.contains("a&lt;b &amp; c"));
        assert!(svg.contains("dl-0.5"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn seed_average_feeds_chart_points() {
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), "bt", 0, 7, &[metrics(0, 2.0, 0.2, 0.1)]);
        write_run(dir.path(), "bt", 1, 7, &[metrics(0, 4.0, 0.4, 0.3)]);
        let runs = load_runs(dir.path()).unwrap();
        let panels = curve_panels(&runs);
        assert_eq!(panels.len(), 3);
        let series = &panels[0].series;
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].points, vec![(0.0, 3.0)]);
    }

    #[test]
    fn write_report_produces_the_bundle_files() {
        let dir = tempfile::tempdir().unwrap();
        let runs_dir = dir.path().join("runs");
        write_run(&runs_dir, "supervised", 0, 7, &[metrics(0, 3.0, 0.2, 0.1)]);
        let bundle = write_report(
            dir.path(),
            &[ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg],
        )
        .unwrap();
        assert!(dir.path().join(&bundle.aggregate_json).is_file());
        assert!(dir.path().join(bundle.aggregate_csv.as_ref().unwrap()).is_file());
        assert!(dir.path().join(bundle.chart_svg.as_ref().unwrap()).is_file());
        assert!(dir.path().join("report/bundle.json").is_file());
        assert_eq!(bundle.curve_files.len(), 1);
        let csv = fs::read_to_string(dir.path().join("report/aggregate.csv")).unwrap();
        assert!(csv.starts_with("strategy,"));
        assert!(csv.contains("supervised"));
    }
}
