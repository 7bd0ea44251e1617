use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::*;
use super::stats::{self, Digest};
use super::substream_seed;
use crate::chaos_analyzer::{hessian_hermite_coeffs, variance_chaos_partial, ChaosComponent, ChaosSettings};
use crate::critical_finder::{
    bk_upper_bound, count_in_box, enumerate_torus, find_critical_points, FinderOutput, RescaledChart, Region,
};
use crate::error::{Error, Result};
use crate::field_sampler::{build_sample_seeded, FieldSample};
use crate::kac_rice_engine::{
    density_asymptotic, density_exact_1d, density_route_cmw, density_route_main1_at, density_route_sdh,
    second_factorial_moment, DensityEstimate, SecondMoment, TwoPointSettings,
};
use crate::spectral_weights::WeightSpec;

/// Every this many samples the window identity is checked against a direct enumeration.
pub const WINDOW_CHECK_STRIDE: usize = 100;

struct Context {
    spec: WeightSpec<f64>,
    pool: rayon::ThreadPool,
}

fn context(cfg: &ExperimentConfig) -> Result<Context> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(Context {
        spec: cfg.weight.build()?,
        pool,
    })
}

/// Seed of the field samples at scale `hbar`; sample `i` uses stream `i`.
pub fn field_seed(master: u64, hbar: f64) -> u64 {
    substream_seed(master, "field", hbar.to_bits())
}

pub fn sample_field(cfg: &ExperimentConfig, spec: &WeightSpec<f64>, hbar: f64, idx: usize) -> Result<FieldSample> {
    build_sample_seeded(spec, cfg.m, hbar, field_seed(cfg.seed, hbar), idx as u64)
}

struct SampleOutcome {
    idx: usize,
    counts: Vec<usize>,
    total: usize,
    bk_bound: u64,
    /// Per `r`: whether the rescaled-chart count disagreed, when checked.
    window: Option<Vec<bool>>,
    violation: bool,
    output: Option<FinderOutput>,
}

fn run_sample(cfg: &ExperimentConfig, spec: &WeightSpec<f64>, hbar: f64, idx: usize) -> Result<SampleOutcome> {
    let sample = sample_field(cfg, spec, hbar, idx)?;
    let nu = sample.max_frequency().iter().map(|&k| k.unsigned_abs() as u64).max().unwrap_or(0);
    let bk_bound = bk_upper_bound(nu, cfg.m as u32);
    let out = match enumerate_torus(&sample, &cfg.finder) {
        Ok(o) => o,
        Err(Error::EnumerationIncomplete(_)) => {
            return Ok(SampleOutcome {
                idx,
                counts: vec![],
                total: 0,
                bk_bound,
                window: None,
                violation: true,
                output: None,
            })
        }
        Err(e) => return Err(e),
    };
    let counts: Vec<usize> = cfg.r.iter().map(|&r| count_in_box(&out.records, r)).collect();
    let window = if idx % WINDOW_CHECK_STRIDE == 0 {
        let mut flags = Vec::with_capacity(cfg.r.len());
        for (&r, &c) in cfg.r.iter().zip(&counts) {
            let region = Region::centered(cfg.m, r / hbar);
            let direct = find_critical_points(&RescaledChart(&sample), &region, &cfg.finder)?;
            flags.push(direct.records.len() != c);
        }
        Some(flags)
    } else {
        None
    };
    Ok(SampleOutcome {
        idx,
        total: out.records.len(),
        counts,
        bk_bound,
        window,
        violation: false,
        output: Some(out),
    })
}

/// Limiting mean count per unit rescaled volume; the periodized value differs by `O(hbar^inf)`.
fn limit_density(cfg: &ExperimentConfig, spec: &WeightSpec<f64>) -> Result<DensityEstimate> {
    if cfg.m == 1 {
        density_exact_1d(spec, 0.0)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "density", cfg.m as u64));
        density_route_main1_at(spec, cfg.m, 0.0, cfg.predictions.density_samples, &mut rng)
    }
}

/// Two-point variance prediction for the window `r / hbar`, if the engine covers it.
fn variance_prediction(
    cfg: &ExperimentConfig,
    spec: &WeightSpec<f64>,
    hbar: f64,
    r: f64,
) -> Result<Option<SecondMoment>> {
    if !cfg.predictions.variance || r > 0.5 {
        return Ok(None);
    }
    let settings = TwoPointSettings {
        mc_per_node: cfg.predictions.mc_per_node,
        density_samples: cfg.predictions.density_samples,
        ..TwoPointSettings::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "two-point", hbar.to_bits() ^ r.to_bits()));
    match second_factorial_moment(spec, cfg.m, hbar, r / hbar, &settings, &mut rng) {
        Ok(s) => Ok(Some(s)),
        // dimensions and windows outside the engine's far-field regime carry no prediction
        Err(Error::InvalidArgument(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn finder_totals(outcomes: &[SampleOutcome]) -> FinderTotals {
    let mut t = FinderTotals::default();
    for o in outcomes {
        if let Some(out) = &o.output {
            let d = &out.diagnostics;
            t.enumerations += 1;
            t.seeds += d.seeds;
            t.stalled += d.stalled;
            t.failures += d.failures;
            t.duplicates_merged += d.duplicates_merged;
            t.degenerate += d.degenerate;
            t.uncertified_cells += d.uncertified_cells;
            t.retried += usize::from(d.retries > 0);
        }
    }
    t
}

fn cells_for_scale(
    cfg: &ExperimentConfig,
    ctx: &Context,
    ih: usize,
    hbar: f64,
    density: &DensityEstimate,
) -> Result<Vec<CellReport>> {
    let spec = &ctx.spec;
    let outcomes: Vec<SampleOutcome> = ctx.pool.install(|| {
        (0..cfg.samples)
            .into_par_iter()
            .map(|i| run_sample(cfg, spec, hbar, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let th = &cfg.thresholds;
    let m = cfg.m as i32;
    let totals = finder_totals(&outcomes);
    let violations: Vec<usize> = outcomes.iter().filter(|o| o.violation).map(|o| o.idx).collect();
    let good: Vec<&SampleOutcome> = outcomes.iter().filter(|o| !o.violation).collect();
    let bk_violations: Vec<usize> = good.iter().filter(|o| o.total as u64 > o.bk_bound).map(|o| o.idx).collect();
    let mut cells = Vec::with_capacity(cfg.r.len());
    for (ir, &r) in cfg.r.iter().enumerate() {
        let counts: Vec<(usize, usize)> = good.iter().map(|o| (o.idx, o.counts[ir])).collect();
        let xs: Vec<f64> = counts.iter().map(|&(_, c)| c as f64).collect();
        let raw: Vec<usize> = counts.iter().map(|&(_, c)| c).collect();
        let digest = Digest::new(&xs);
        let ks = stats::ks_lattice(&raw, digest.mean, digest.sd());
        let z: Vec<f64> = xs.iter().map(|x| (x - digest.mean) / digest.sd()).collect();
        let n = digest.n as f64;
        let normality = NormalityCheck {
            ks_critical: th.ks_coefficient / n.sqrt() + th.ks_slack,
            ks_pass: ks < th.ks_coefficient / n.sqrt() + th.ks_slack,
            skew_pass: digest.skew.abs() < th.max_abs_skew,
            exkurt_pass: digest.exkurt.abs() < th.max_abs_excess_kurtosis,
        };
        let window = r / hbar;
        let vol = window.powi(m);
        let pred_mean = Prediction {
            value: density.value * vol,
            se: density.se * vol,
            exact: density.se == 0.0,
            route: density.route.name().into(),
        };
        let to_s0 = (hbar / r).powi(m);
        let pred_var = variance_prediction(cfg, spec, hbar, r)?.map(|s| Prediction {
            value: s.variance,
            se: s.variance_se,
            exact: false,
            route: "two-point".into(),
        });
        let window_checks = good.iter().filter(|o| o.window.is_some()).count();
        let window_mismatches = good
            .iter()
            .filter(|o| o.window.as_ref().is_some_and(|w| w[ir]))
            .map(|o| o.idx)
            .collect();
        let n_hbar = (r / (2.0 * hbar)).floor() as u64;
        cells.push(CellReport {
            cell_id: ih * cfg.r.len() + ir,
            hbar,
            r,
            m: cfg.m,
            n_hbar,
            s_hbar: r / (2.0 * hbar * n_hbar as f64),
            window,
            digest,
            ks,
            normality,
            quantiles: stats::quantile_table(&z),
            mean_ratio: Some(digest.mean / pred_mean.value),
            mean_z: Some(stats::joint_z(digest.mean, digest.mean_se, pred_mean.value, pred_mean.se)),
            var_z: pred_var.as_ref().map(|p| stats::joint_z(digest.var, digest.var_se, p.value, p.se)),
            s0: digest.var * to_s0,
            s0_se: digest.var_se * to_s0,
            s0_pred: pred_var.as_ref().map(|p| Prediction {
                value: p.value * to_s0,
                se: p.se * to_s0,
                exact: false,
                route: p.route.clone(),
            }),
            pred_mean: Some(pred_mean),
            pred_var,
            seed: field_seed(cfg.seed, hbar),
            window_checks,
            window_mismatches,
            topology_violations: violations.clone(),
            max_total: good.iter().map(|o| o.total).max().unwrap_or(0),
            bk_bound_min: good.iter().map(|o| o.bk_bound).min().unwrap_or(0),
            bk_violations: bk_violations.clone(),
            finder: totals,
            counts,
        });
    }
    Ok(cells)
}

fn run_cells(cfg: &ExperimentConfig, ctx: &Context) -> Result<Vec<CellReport>> {
    let density = limit_density(cfg, &ctx.spec)?;
    let mut cells = Vec::new();
    for (ih, &hbar) in cfg.hbar.iter().enumerate() {
        cells.extend(cells_for_scale(cfg, ctx, ih, hbar, &density)?);
    }
    Ok(cells)
}

fn report(cfg: &ExperimentConfig, kind: ExperimentKind, cells: Vec<CellReport>, start: Instant) -> ExperimentReport {
    ExperimentReport {
        kind,
        settings_hash: cfg.settings_hash(),
        config: cfg.clone(),
        thresholds: cfg.thresholds,
        cells,
        scaling: vec![],
        as_convergence: None,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Counts in every `(hbar, r)` cell with the Kac-Rice mean prediction.
pub fn run_mean_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let ctx = context(cfg)?;
    let cells = run_cells(cfg, &ctx)?;
    Ok(report(cfg, ExperimentKind::Mean, cells, start))
}

pub const BOOTSTRAP_REPLICATES: usize = 400;

/// Variance per cell and its log-log slope in `1/hbar`, one fit per `r`.
pub fn run_variance_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut distinct = cfg.hbar.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Config("variance scaling needs at least 3 distinct hbar values".into()));
    }
    if cfg.samples < 2000 {
        return Err(Error::Config("variance scaling needs at least 2000 samples per cell".into()));
    }
    let start = Instant::now();
    let ctx = context(cfg)?;
    let cells = run_cells(cfg, &ctx)?;
    let mut scaling = Vec::new();
    for &r in &cfg.r {
        let ids: Vec<usize> = cells.iter().filter(|c| c.r == r).map(|c| c.cell_id).collect();
        let x: Vec<f64> = ids.iter().map(|&i| -cells[i].hbar.ln()).collect();
        let y: Vec<f64> = ids.iter().map(|&i| cells[i].digest.var.ln()).collect();
        let se: Vec<f64> = ids.iter().map(|&i| cells[i].digest.var_se / cells[i].digest.var).collect();
        let (slope, intercept) = stats::linear_fit(&x, &y);
        let samples: Vec<Vec<f64>> = ids
            .iter()
            .map(|&i| cells[i].counts.iter().map(|&(_, c)| c as f64).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "bootstrap", r.to_bits()));
        let (lo, hi) = stats::bootstrap_slope_ci(&x, &samples, BOOTSTRAP_REPLICATES, 0.95, &mut rng);
        let mut max_z: f64 = 0.0;
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                max_z = max_z.max(stats::joint_z(cells[i].s0, cells[i].s0_se, cells[j].s0, cells[j].s0_se));
            }
        }
        let margin = ids
            .iter()
            .map(|&i| cells[i].s0 / cells[i].s0_se)
            .fold(f64::INFINITY, f64::min);
        scaling.push(ScalingFit {
            r,
            cells: ids,
            slope,
            slope_se: stats::slope_se(&x, &se),
            intercept,
            bootstrap_lo: lo,
            bootstrap_hi: hi,
            s0_max_pairwise_z: max_z,
            s0_min_margin: margin,
        });
    }
    let mut rep = report(cfg, ExperimentKind::Variance, cells, start);
    rep.scaling = scaling;
    Ok(rep)
}

/// Normality diagnostics of the self-standardized counts.
pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.samples < 4000 {
        return Err(Error::Config("the CLT experiment needs at least 4000 samples per cell".into()));
    }
    let start = Instant::now();
    let ctx = context(cfg)?;
    let cells = run_cells(cfg, &ctx)?;
    Ok(report(cfg, ExperimentKind::Clt, cells, start))
}

/// `p` of the schedule and the resulting `(n, hbar_n)` pairs.
pub fn as_schedule(cfg: &ExperimentConfig) -> Result<(f64, Vec<(usize, f64)>)> {
    let a = &cfg.as_convergence;
    let m = cfg.m as f64;
    let p = a.p.unwrap_or(0.8 * m);
    if !(p > 0.0 && p < m) {
        return Err(Error::Config(format!("as_convergence.p must lie in (0, {m}), got {p}")));
    }
    if a.n.is_empty() || a.n.windows(2).any(|w| w[1] <= w[0]) || a.n[0] == 0 {
        return Err(Error::Config("as_convergence.n must be positive and increasing".into()));
    }
    let mut out = Vec::with_capacity(a.n.len());
    for &n in &a.n {
        let hbar = (n as f64).powf(-2.0 / p);
        if hbar > 0.25 || hbar < a.hbar_floor * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "hbar_{n} = {hbar} lies outside [{}, 1/4]",
                a.hbar_floor
            )));
        }
        out.push((n, hbar));
    }
    Ok((p, out))
}

/// `hbar_n^m Z_n` over independent replicates along the schedule `hbar_n = n^(-2/p)`.
pub fn run_as_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let ctx = context(cfg)?;
    if cfg.as_convergence.replicates == 0 {
        return Err(Error::Config("as_convergence.replicates must be positive".into()));
    }
    let (p, schedule) = as_schedule(cfg)?;
    let r = cfg.r[0];
    let m = cfg.m as i32;
    let target = limit_density(cfg, &ctx.spec)?.value * r.powi(m);
    let reps = cfg.as_convergence.replicates;
    let jobs: Vec<(usize, usize)> = (0..reps).flat_map(|j| (0..schedule.len()).map(move |k| (j, k))).collect();
    let counts: Vec<Option<usize>> = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|&(j, k)| {
                let (n, hbar) = schedule[k];
                let seed = substream_seed(cfg.seed, "as-convergence", n as u64);
                let sample = build_sample_seeded(&ctx.spec, cfg.m, hbar, seed, j as u64)?;
                match enumerate_torus(&sample, &cfg.finder) {
                    Ok(out) => Ok(Some(count_in_box(&out.records, r))),
                    Err(Error::EnumerationIncomplete(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::with_capacity(jobs.len());
    let mut violations = Vec::new();
    let mut improved = 0usize;
    for j in 0..reps {
        let slice = &counts[j * schedule.len()..(j + 1) * schedule.len()];
        if slice.iter().any(Option::is_none) {
            violations.push(j);
            continue;
        }
        let dev: Vec<f64> = slice
            .iter()
            .zip(&schedule)
            .map(|(c, &(_, h))| (h.powi(m) * c.unwrap() as f64 - target).abs())
            .collect();
        let mut tail = dev.clone();
        for k in (0..tail.len().saturating_sub(1)).rev() {
            tail[k] = tail[k].max(tail[k + 1]);
        }
        improved += usize::from(dev[dev.len() - 1] < dev[0]);
        for (k, &(n, hbar)) in schedule.iter().enumerate() {
            let c = slice[k].unwrap();
            rows.push(AsConvergenceRow {
                replicate: j,
                n,
                hbar,
                count: c,
                scaled: hbar.powi(m) * c as f64,
                deviation: dev[k],
                tail_sup: tail[k],
            });
        }
    }
    let steps = schedule
        .iter()
        .map(|&(n, hbar)| {
            let mine: Vec<&AsConvergenceRow> = rows.iter().filter(|row| row.n == n).collect();
            let d = Digest::new(&mine.iter().map(|row| row.scaled).collect::<Vec<_>>());
            let k = mine.len().max(1) as f64;
            AsConvergenceStep {
                n,
                hbar,
                scaled_mean: d.mean,
                scaled_se: d.mean_se,
                mean_deviation: mine.iter().map(|row| row.deviation).sum::<f64>() / k,
                mean_tail_sup: mine.iter().map(|row| row.tail_sup).sum::<f64>() / k,
            }
        })
        .collect();
    let completed = reps - violations.len();
    let asc = AsConvergenceReport {
        p,
        r,
        target,
        schedule_series: schedule.iter().map(|&(_, h)| h.powf(p)).sum(),
        steps,
        improved_fraction: improved as f64 / completed.max(1) as f64,
        rows,
    };
    let mut rep = report(cfg, ExperimentKind::AsConvergence, vec![], start);
    rep.as_convergence = Some(asc);
    if !violations.is_empty() {
        return Err(Error::Invariant(format!(
            "full-torus enumeration failed its topological check in replicates {violations:?}"
        )));
    }
    Ok(rep)
}

/// One row of the constants file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub route: String,
    pub m: usize,
    pub value: f64,
    pub se: f64,
}

/// The limiting density by every available route.
pub fn compute_constants(cfg: &ExperimentConfig) -> Result<Vec<ConstantRow>> {
    let spec = cfg.weight.build()?;
    let m = cfg.m;
    let n = cfg.predictions.density_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "constants", m as u64));
    let mut est = vec![density_route_main1_at(&spec, m, 0.0, n, &mut rng)?];
    if m == 1 {
        est.push(density_exact_1d(&spec, 0.0)?);
    }
    est.push(density_route_cmw(&spec, m, n, &mut rng)?);
    est.push(density_route_sdh(&spec, m, n, &mut rng)?);
    let mut rows: Vec<ConstantRow> = est
        .iter()
        .map(|e| ConstantRow {
            route: e.route.name().into(),
            m,
            value: e.value,
            se: e.se,
        })
        .collect();
    rows.push(ConstantRow {
        route: "asymptotic".into(),
        m,
        value: density_asymptotic(&spec, m)?,
        se: 0.0,
    });
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacRiceRow {
    pub hbar: f64,
    pub r: f64,
    pub window: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub factorial_moment: f64,
    pub factorial_moment_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub s0: f64,
    pub s0_se: f64,
    pub envelope_bound: f64,
}

/// Two-point variance for every `(hbar, r)` cell with `r <= 1/2`.
pub fn kac_rice_variance(cfg: &ExperimentConfig) -> Result<Vec<(KacRiceRow, SecondMoment)>> {
    let ctx = context(cfg)?;
    let mut rows = Vec::new();
    for &hbar in &cfg.hbar {
        for &r in cfg.r.iter().filter(|&&r| r <= 0.5) {
            let settings = TwoPointSettings {
                mc_per_node: cfg.predictions.mc_per_node,
                density_samples: cfg.predictions.density_samples,
                ..TwoPointSettings::default()
            };
            let mut rng =
                ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "two-point", hbar.to_bits() ^ r.to_bits()));
            let s = ctx
                .pool
                .install(|| second_factorial_moment(&ctx.spec, cfg.m, hbar, r / hbar, &settings, &mut rng))?;
            let to_s0 = (hbar / r).powi(cfg.m as i32);
            rows.push((
                KacRiceRow {
                    hbar,
                    r,
                    window: s.window,
                    mean: s.mean,
                    mean_se: s.mean_se,
                    factorial_moment: s.factorial_moment,
                    factorial_moment_se: s.factorial_moment_se,
                    var: s.variance,
                    var_se: s.variance_se,
                    s0: s.variance * to_s0,
                    s0_se: s.variance_se * to_s0,
                    envelope_bound: s.envelope_bound,
                },
                s,
            ));
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("kacrice-var needs some r <= 1/2".into()));
    }
    Ok(rows)
}

/// Chaos components of the limiting variance at `hbar = 0`.
pub fn chaos_decomposition(cfg: &ExperimentConfig) -> Result<Vec<ChaosComponent>> {
    let ctx = context(cfg)?;
    let c = &cfg.chaos;
    let q_max = c.q_max.unwrap_or(if cfg.m == 1 { 6 } else { 4 });
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "chaos-coefficients", cfg.m as u64));
    ctx.pool.install(|| {
        let coeffs = hessian_hermite_coeffs(&ctx.spec, cfg.m, 0.0, q_max, c.coefficient_samples, &mut rng)?;
        let settings = ChaosSettings {
            mc_per_node: c.mc_per_node,
            ..ChaosSettings::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "chaos-rho", cfg.m as u64));
        variance_chaos_partial(&ctx.spec, &coeffs, q_max, &settings, &mut rng)
    })
}

/// Enumerates sample `idx` at scale `hbar` with the configuration's seed.
pub fn find_one(cfg: &ExperimentConfig, hbar: f64, idx: usize) -> Result<FinderOutput> {
    let spec = cfg.weight.build()?;
    let sample = sample_field(cfg, &spec, hbar, idx)?;
    enumerate_torus(&sample, &cfg.finder)
}
