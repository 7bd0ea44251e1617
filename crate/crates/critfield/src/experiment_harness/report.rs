use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Thresholds};
use super::stats::Digest;
use crate::chaos_analyzer::ChaosComponent;
use crate::critical_finder::CriticalPointRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Mean,
    Variance,
    Clt,
    AsConvergence,
}

/// A predicted value; `exact` marks deterministic routes whose `se` is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub se: f64,
    pub exact: bool,
    pub route: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FinderTotals {
    pub enumerations: usize,
    pub seeds: usize,
    pub stalled: usize,
    pub failures: usize,
    pub duplicates_merged: usize,
    pub degenerate: usize,
    pub uncertified_cells: usize,
    /// Enumerations that needed a denser rescan.
    pub retried: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityCheck {
    pub ks_critical: f64,
    pub ks_pass: bool,
    pub skew_pass: bool,
    pub exkurt_pass: bool,
}

impl NormalityCheck {
    pub fn passed(&self) -> bool {
        self.ks_pass && self.skew_pass && self.exkurt_pass
    }
}

/// Results for one `(hbar, r)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell_id: usize,
    pub hbar: f64,
    pub r: f64,
    pub m: usize,
    /// Half-width `floor(r / (2 hbar))` of the dyadic window and the stretch `r / (2 hbar N)`.
    pub n_hbar: u64,
    pub s_hbar: f64,
    /// Side `r / hbar` of the rescaled window on which `Z(X^hbar, B_r) = Z(Y^hbar, B_{r/hbar})`.
    pub window: f64,
    pub digest: Digest,
    pub ks: f64,
    pub normality: NormalityCheck,
    /// `(level, standardized quantile, normal quantile)`.
    pub quantiles: Vec<(f64, f64, f64)>,
    pub pred_mean: Option<Prediction>,
    pub pred_var: Option<Prediction>,
    pub mean_ratio: Option<f64>,
    pub mean_z: Option<f64>,
    pub var_z: Option<f64>,
    /// `var (hbar / r)^m` with its standard error.
    pub s0: f64,
    pub s0_se: f64,
    pub s0_pred: Option<Prediction>,
    /// Seed of the per-sample streams; sample `i` uses stream `i`.
    pub seed: u64,
    pub window_checks: usize,
    pub window_mismatches: Vec<usize>,
    /// Samples whose full-torus enumeration failed the Euler or Morse check.
    pub topology_violations: Vec<usize>,
    /// Largest torus count over the cell and the smallest Bernshtein-Kouchnirenko bound seen.
    pub max_total: usize,
    pub bk_bound_min: u64,
    pub bk_violations: Vec<usize>,
    pub finder: FinderTotals,
    #[serde(skip)]
    pub counts: Vec<(usize, usize)>,
}

/// Fit of `log var` against `log(1/hbar)` over the cells sharing one `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub r: f64,
    pub cells: Vec<usize>,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub bootstrap_lo: f64,
    pub bootstrap_hi: f64,
    /// Largest pairwise joint-SE distance between the per-cell `S0` estimates.
    pub s0_max_pairwise_z: f64,
    /// Smallest `S0 / se(S0)` over the cells.
    pub s0_min_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsConvergenceStep {
    pub n: usize,
    pub hbar: f64,
    /// Replicate mean and SE of `hbar^m Z`.
    pub scaled_mean: f64,
    pub scaled_se: f64,
    pub mean_deviation: f64,
    pub mean_tail_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsConvergenceRow {
    pub replicate: usize,
    pub n: usize,
    pub hbar: f64,
    pub count: usize,
    pub scaled: f64,
    pub deviation: f64,
    /// `max_{k >= n} deviation(k)` within the replicate.
    pub tail_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsConvergenceReport {
    pub p: f64,
    pub r: f64,
    /// `zbar_0 vol(B_r)`.
    pub target: f64,
    /// `sum_n hbar_n^p` over the configured schedule; the full series is `pi^2 / 6`.
    pub schedule_series: f64,
    pub steps: Vec<AsConvergenceStep>,
    /// Share of replicates whose deviation at the last `n` is below that at the first.
    pub improved_fraction: f64,
    pub rows: Vec<AsConvergenceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub settings_hash: String,
    pub config: ExperimentConfig,
    pub thresholds: Thresholds,
    pub cells: Vec<CellReport>,
    pub scaling: Vec<ScalingFit>,
    pub as_convergence: Option<AsConvergenceReport>,
    /// Seconds; written to a separate file so the other outputs stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn topology_violations(&self) -> usize {
        self.cells.iter().map(|c| c.topology_violations.len()).sum()
    }

    pub fn window_mismatches(&self) -> usize {
        self.cells.iter().map(|c| c.window_mismatches.len()).sum()
    }

    pub fn bk_violations(&self) -> usize {
        self.cells.iter().map(|c| c.bk_violations.len()).sum()
    }

    /// Fails with [`Error::Invariant`] when any hard invariant was violated.
    pub fn require_invariants(&self) -> Result<()> {
        let (t, w, b) = (self.topology_violations(), self.window_mismatches(), self.bk_violations());
        if t + w + b > 0 {
            return Err(Error::Invariant(format!(
                "{t} topology violations, {w} window mismatches, {b} Bernshtein-Kouchnirenko violations"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    cell_id: usize,
    hbar: f64,
    r: f64,
    sample_idx: usize,
    count: usize,
}

/// One row of the summary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell_id: usize,
    pub hbar: f64,
    pub r: f64,
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub skew: f64,
    pub exkurt: f64,
    pub ks: f64,
    pub pred_mean: Option<f64>,
    pub pred_mean_se: Option<f64>,
    pub pred_var: Option<f64>,
    pub pred_var_se: Option<f64>,
}

impl From<&CellReport> for SummaryRow {
    fn from(c: &CellReport) -> Self {
        let d = &c.digest;
        Self {
            cell_id: c.cell_id,
            hbar: c.hbar,
            r: c.r,
            n: d.n,
            mean: d.mean,
            mean_se: d.mean_se,
            var: d.var,
            var_se: d.var_se,
            skew: d.skew,
            exkurt: d.exkurt,
            ks: c.ks,
            pred_mean: c.pred_mean.as_ref().map(|p| p.value),
            pred_mean_se: c.pred_mean.as_ref().map(|p| p.se),
            pred_var: c.pred_var.as_ref().map(|p| p.value),
            pred_var_se: c.pred_var.as_ref().map(|p| p.se),
        }
    }
}

/// Serializes rows to CSV text with a header.
pub fn to_csv<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Invariant(format!("csv serialization: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invariant(format!("csv flush: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn summary_rows(report: &ExperimentReport) -> Vec<SummaryRow> {
    report.cells.iter().map(SummaryRow::from).collect()
}

pub fn counts_csv(report: &ExperimentReport) -> Result<String> {
    to_csv(report.cells.iter().flat_map(|c| {
        c.counts.iter().map(move |&(sample_idx, count)| CountRow {
            cell_id: c.cell_id,
            hbar: c.hbar,
            r: c.r,
            sample_idx,
            count,
        })
    }))
}

/// Writes the CSV, JSON Lines and JSON outputs, plus SVG plots when `plot` is set.
pub fn emit_report(report: &ExperimentReport, out: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut files = vec![
        write(&out.join("counts.csv"), &counts_csv(report)?)?,
        write(&out.join("summary.csv"), &to_csv(summary_rows(report))?)?,
    ];
    let mut jsonl = String::new();
    for row in summary_rows(report) {
        jsonl.push_str(&serde_json::to_string(&row).expect("row serializes"));
        jsonl.push('\n');
    }
    files.push(write(&out.join("summary.jsonl"), &jsonl)?);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    files.push(write(&out.join("report.json"), &json)?);
    if let Some(a) = &report.as_convergence {
        files.push(write(&out.join("as_convergence.csv"), &to_csv(&a.rows)?)?);
    }
    files.push(write(
        &out.join("timing.json"),
        &serde_json::json!({ "wall_time_s": report.wall_time }).to_string(),
    )?);
    if plot {
        for c in &report.cells {
            let path = out.join(format!("hist_cell{}.svg", c.cell_id));
            files.push(write(&path, &histogram_svg(c))?);
        }
        for fit in &report.scaling {
            let path = out.join(format!("variance_loglog_r{}.svg", fit.r));
            files.push(write(&path, &loglog_svg(report, fit))?);
        }
    }
    Ok(files)
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn svg_open(title: &str, meta: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <metadata>{meta}</metadata>\n<title>{title}</title>\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    )
}

/// Histogram of the standardized counts with `ceil(sqrt(n))` bins and the standard normal density.
pub fn histogram_svg(c: &CellReport) -> String {
    let d = &c.digest;
    let sd = d.sd();
    let z: Vec<f64> = c.counts.iter().map(|&(_, k)| (k as f64 - d.mean) / sd).collect();
    let bins = (z.len() as f64).sqrt().ceil().max(1.0) as usize;
    let (lo, hi) = (-4.0f64, 4.0f64);
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0usize; bins];
    for &v in &z {
        if v >= lo && v < hi {
            hist[((v - lo) / width) as usize] += 1;
        }
    }
    let dens: Vec<f64> = hist.iter().map(|&h| h as f64 / (z.len() as f64 * width)).collect();
    let ymax = dens.iter().cloned().fold(0.45f64, f64::max);
    let sx = |x: f64| PAD + (x - lo) / (hi - lo) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / ymax * (H - 2.0 * PAD);
    let mut s = svg_open(
        &format!("cell {} hbar={} r={} standardized counts", c.cell_id, c.hbar, c.r),
        &format!("bins=ceil(sqrt(n))={bins}; n={}; range=[-4,4)", z.len()),
    );
    for (i, &h) in dens.iter().enumerate() {
        let x0 = sx(lo + i as f64 * width);
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#9ab\" stroke=\"#567\" stroke-width=\"0.5\"/>",
            sy(h),
            sx(lo + width) - sx(lo),
            sy(0.0) - sy(h)
        );
    }
    let pts: Vec<String> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let y = (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            format!("{:.2},{:.2}", sx(x), sy(y))
        })
        .collect();
    let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"#c33\" stroke-width=\"1.5\"/>", pts.join(" "));
    axes(&mut s);
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String) {
    let _ = writeln!(
        s,
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{0}\" stroke=\"black\"/>",
        H - PAD,
        W - PAD
    );
}

/// `log var` against `log(1/hbar)` with SE bars and the fitted line.
pub fn loglog_svg(report: &ExperimentReport, fit: &ScalingFit) -> String {
    let pts: Vec<(f64, f64, f64)> = fit
        .cells
        .iter()
        .map(|&id| {
            let c = &report.cells[id];
            (-(c.hbar.ln()), c.digest.var.ln(), c.digest.var_se / c.digest.var)
        })
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let (x0, x1) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min) - 0.2,
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.2,
    );
    let ys: Vec<f64> = pts.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2]).collect();
    let (y0, y1) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min) - 0.2,
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.2,
    );
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = svg_open(
        &format!("log var vs log(1/hbar), r={}, slope {:.3}", fit.r, fit.slope),
        &format!(
            "slope={}; slope_se={}; bootstrap95=[{}, {}]",
            fit.slope, fit.slope_se, fit.bootstrap_lo, fit.bootstrap_hi
        ),
    );
    for &(x, y, e) in &pts {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#236\"/>\n<line x1=\"{0:.2}\" y1=\"{2:.2}\" x2=\"{0:.2}\" y2=\"{3:.2}\" stroke=\"#236\"/>",
            sx(x),
            sy(y),
            sy(y - e),
            sy(y + e)
        );
    }
    let line = |x: f64| fit.intercept + fit.slope * x;
    let _ = writeln!(
        s,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c33\"/>",
        sx(x0),
        sy(line(x0)),
        sx(x1),
        sy(line(x1))
    );
    axes(&mut s);
    s.push_str("</svg>\n");
    s
}

/// Writes `text` to `path`, surfacing the path on failure.
pub fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    write(path, text)
}

#[derive(Serialize)]
struct PointRow {
    idx: usize,
    x0: f64,
    x1: Option<f64>,
    value: f64,
    morse_index: usize,
    degeneracy_margin: f64,
    grad_residual: f64,
}

pub fn critical_points_csv(records: &[CriticalPointRecord]) -> Result<String> {
    to_csv(records.iter().enumerate().map(|(idx, r)| PointRow {
        idx,
        x0: r.position[0],
        x1: r.position.get(1).copied(),
        value: r.value,
        morse_index: r.morse_index,
        degeneracy_margin: r.degeneracy_margin,
        grad_residual: r.grad_residual,
    }))
}

#[derive(Serialize)]
struct ChaosRow {
    q: usize,
    s_q: f64,
    se: f64,
    partial: f64,
    partial_se: f64,
}

pub fn chaos_csv(rows: &[ChaosComponent]) -> Result<String> {
    to_csv(rows.iter().map(|c| ChaosRow {
        q: c.q,
        s_q: c.s_q,
        se: c.se,
        partial: c.partial,
        partial_se: c.partial_se,
    }))
}

#[derive(Serialize)]
struct ProfileRow {
    hbar: f64,
    r: f64,
    radius: f64,
    intensity: f64,
    se: f64,
}

/// Radial profile of the two-point intensity behind each variance prediction.
pub fn profile_csv(rows: &[(f64, f64, &[(f64, f64, f64)])]) -> Result<String> {
    to_csv(rows.iter().flat_map(|&(hbar, r, prof)| {
        prof.iter().map(move |&(radius, intensity, se)| ProfileRow {
            hbar,
            r,
            radius,
            intensity,
            se,
        })
    }))
}
