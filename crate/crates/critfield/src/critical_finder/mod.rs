//! Enumeration of critical points of sampled fields.
//!
//! A uniform scan grid with `scan_per_wavelength` cells per natural length proposes seeds, which are
//! refined by Newton's method on the gradient. In one dimension every scan cell is split until `X''`
//! provably keeps its sign, so each zero of `X'` is bracketed on its own; in two dimensions seeds come
//! from nodal Newton predictions, cells where both gradient components change sign and local minima
//! of `|grad|^2`.

mod bounds;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_sampler::{FieldSample, GridValues, Jet};
use crate::gaussian_toolkit::SymmetricMatrix;

pub use bounds::{bk_upper_bound, boundary_hits, count_in_box, count_in_centered_box, morse_lower_bound_check, MorseCheck};

/// Coordinates in which the finder works.
pub trait Chart: Sync {
    fn dim(&self) -> usize;
    fn jet(&self, p: &[f64], max_order: usize) -> Jet;
    fn grid(&self, lo: &[f64], step: &[f64], shape: &[usize], alphas: &[Vec<usize>]) -> Result<GridValues>;
    /// Natural length: one wavelength unit of the field.
    fn scale(&self) -> f64;
    /// Period of every coordinate, if the chart is periodic.
    fn period(&self) -> Option<f64>;
    /// Global bound on directional derivatives of the given order.
    fn derivative_bound(&self, order: u32) -> f64;
}

/// `theta` coordinates on the torus `[0, 1)^m`.
pub struct TorusChart<'a>(pub &'a FieldSample);

/// `x = theta / hbar` coordinates of the rescaled field `Y^hbar`.
pub struct RescaledChart<'a>(pub &'a FieldSample);

impl Chart for TorusChart<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn jet(&self, p: &[f64], max_order: usize) -> Jet {
        self.0.eval_jet(p, max_order)
    }
    fn grid(&self, lo: &[f64], step: &[f64], shape: &[usize], alphas: &[Vec<usize>]) -> Result<GridValues> {
        self.0.grid_values(lo, step, shape, alphas)
    }
    fn scale(&self) -> f64 {
        self.0.hbar()
    }
    fn period(&self) -> Option<f64> {
        Some(1.0)
    }
    fn derivative_bound(&self, order: u32) -> f64 {
        self.0.derivative_bound(order)
    }
}

impl Chart for RescaledChart<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn jet(&self, p: &[f64], max_order: usize) -> Jet {
        self.0.rescaled_jet(p, max_order)
    }
    fn grid(&self, lo: &[f64], step: &[f64], shape: &[usize], alphas: &[Vec<usize>]) -> Result<GridValues> {
        let h = self.0.hbar();
        let lo: Vec<f64> = lo.iter().map(|v| v * h).collect();
        let step: Vec<f64> = step.iter().map(|v| v * h).collect();
        let mut g = self.0.grid_values(&lo, &step, shape, alphas)?;
        for (d, a) in g.data.iter_mut().zip(alphas) {
            let f = h.powi(a.iter().sum::<usize>() as i32);
            d.iter_mut().for_each(|v| *v *= f);
        }
        Ok(g)
    }
    fn scale(&self) -> f64 {
        1.0
    }
    fn period(&self) -> Option<f64> {
        None
    }
    fn derivative_bound(&self, order: u32) -> f64 {
        self.0.derivative_bound(order) * self.0.hbar().powi(order as i32)
    }
}

/// Half-open box `[lo, hi)` in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    /// The whole fundamental domain `[0, 1)^m`.
    pub fn torus(m: usize) -> Self {
        Self {
            lo: vec![0.0; m],
            hi: vec![1.0; m],
        }
    }

    /// `[-side/2, side/2)^m`.
    pub fn centered(m: usize, side: f64) -> Self {
        Self {
            lo: vec![-side / 2.0; m],
            hi: vec![side / 2.0; m],
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&x, (&l, &h))| x >= l && x < h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinderOptions {
    /// Scan cells per natural length; at least 4.
    pub scan_per_wavelength: usize,
    pub max_newton_iter: usize,
    /// Largest tolerated fraction of seeds whose refinement fails.
    pub max_failure_rate: f64,
    /// Density doublings tried by [`enumerate_torus`] when a topological check fails.
    pub retries: usize,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self {
            scan_per_wavelength: 6,
            max_newton_iter: 60,
            max_failure_rate: 0.01,
            retries: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPointRecord {
    /// Position; in the torus chart reduced to `[0, 1)^m`.
    pub position: Vec<f64>,
    pub value: f64,
    pub grad_residual: f64,
    pub hessian: SymmetricMatrix<f64>,
    pub morse_index: usize,
    /// Smallest `|eigenvalue|` of the Hessian.
    pub degeneracy_margin: f64,
    pub cell: Vec<i64>,
    /// Margin below `1e-10 |Hessian|`.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FinderDiagnostics {
    pub seeds: usize,
    pub converged: usize,
    /// Refinements that settled at a nonzero local minimum of `|grad|` or left the scan region.
    pub stalled: usize,
    pub failures: usize,
    pub duplicates_merged: usize,
    pub degenerate: usize,
    /// One-dimensional cells whose sign of `X''` could not be certified.
    pub uncertified_cells: usize,
    /// RMS of `|grad|` over the scan grid.
    pub gradient_scale: f64,
    pub cell_size: f64,
    pub scan_per_wavelength: usize,
    pub retries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinderOutput {
    pub records: Vec<CriticalPointRecord>,
    pub diagnostics: FinderDiagnostics,
}

/// Records converged within this multiple of the gradient scale.
const RESIDUAL_REL: f64 = 1e-8;
const DEDUP_REL: f64 = 1e-6;
const PAD_CELLS: usize = 2;

struct Scan {
    lo: Vec<f64>,
    step: f64,
    shape: Vec<usize>,
    periodic: bool,
}

impl Scan {
    fn new(chart: &dyn Chart, region: &Region, spw: usize) -> Result<Self> {
        let m = chart.dim();
        if region.lo.len() != m || region.hi.len() != m {
            return Err(Error::InvalidArgument("region has the wrong dimension".into()));
        }
        if region.lo.iter().zip(&region.hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidArgument("region is empty".into()));
        }
        let cell = chart.scale() / spw as f64;
        if let Some(period) = chart.period() {
            if *region == Region::torus(m) || region.hi.iter().zip(&region.lo).all(|(h, l)| h - l >= period) {
                let n = (period / cell).ceil() as usize;
                return Ok(Self {
                    lo: vec![0.0; m],
                    step: period / n as f64,
                    shape: vec![n; m],
                    periodic: true,
                });
            }
        }
        let pad = PAD_CELLS as f64 * cell;
        let lo: Vec<f64> = region.lo.iter().map(|l| l - pad).collect();
        let shape = region
            .lo
            .iter()
            .zip(&region.hi)
            .map(|(l, h)| ((h - l + 2.0 * pad) / cell).ceil() as usize + 1)
            .collect();
        Ok(Self {
            lo,
            step: cell,
            shape,
            periodic: false,
        })
    }

    fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.lo).map(|(&i, &l)| l + self.step * i as f64).collect()
    }

    fn hi(&self, axis: usize) -> f64 {
        self.lo[axis] + self.step * (self.shape[axis] as f64 - if self.periodic { 0.0 } else { 1.0 })
    }
}

fn wrap(p: &mut [f64], period: Option<f64>) {
    if let Some(t) = period {
        for v in p.iter_mut() {
            *v = v.rem_euclid(t);
            if *v >= t {
                *v = 0.0;
            }
        }
    }
}

fn make_record(jet: Jet, cell: Vec<i64>) -> CriticalPointRecord {
    let eig = jet.hessian.eigenvalues();
    let margin = eig.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
    let norm = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    CriticalPointRecord {
        grad_residual: jet.gradient_norm(),
        morse_index: eig.iter().filter(|&&e| e < 0.0).count(),
        degeneracy_margin: margin,
        degenerate: !(margin > 1e-10 * norm),
        value: jet.value,
        hessian: jet.hessian,
        position: jet.point,
        cell,
    }
}

enum Refined {
    Converged(Jet),
    Stalled,
    Failed,
}

/// Enumerates critical points of `chart` in `region`.
pub fn find_critical_points(chart: &dyn Chart, region: &Region, opts: &FinderOptions) -> Result<FinderOutput> {
    if opts.scan_per_wavelength < 4 {
        return Err(Error::InvalidArgument(format!(
            "scan_per_wavelength must be at least 4, got {}",
            opts.scan_per_wavelength
        )));
    }
    let scan = Scan::new(chart, region, opts.scan_per_wavelength)?;
    let (candidates, mut diag) = match chart.dim() {
        1 => scan_1d(chart, &scan, opts)?,
        2 => scan_2d(chart, &scan, opts)?,
        m => return Err(Error::InvalidArgument(format!("critical point enumeration supports m <= 2, got {m}"))),
    };
    diag.cell_size = scan.step;
    diag.scan_per_wavelength = opts.scan_per_wavelength;
    let total = diag.seeds.max(1);
    if diag.failures as f64 > opts.max_failure_rate * total as f64 {
        return Err(Error::EnumerationUnreliable {
            failures: diag.failures,
            seeds: diag.seeds,
        });
    }
    let period = if scan.periodic { chart.period() } else { None };
    let mut records = dedup(candidates, period, DEDUP_REL * chart.scale(), &mut diag);
    if !scan.periodic {
        records.retain(|r| region.contains(&r.position));
        for r in &mut records {
            wrap(&mut r.position, chart.period());
        }
    }
    records.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap_or(std::cmp::Ordering::Equal));
    diag.degenerate = records.iter().filter(|r| r.degenerate).count();
    Ok(FinderOutput { records, diagnostics: diag })
}

fn dedup(
    cands: Vec<CriticalPointRecord>,
    period: Option<f64>,
    tol: f64,
    diag: &mut FinderDiagnostics,
) -> Vec<CriticalPointRecord> {
    let Some(m) = cands.first().map(|c| c.position.len()) else {
        return cands;
    };
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / tol).floor() as i64).collect() };
    let wrap_key = |k: i64| -> i64 {
        match period {
            Some(t) => k.rem_euclid((t / tol).round() as i64),
            None => k,
        }
    };
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let mut d = (x - y).abs();
                if let Some(t) = period {
                    d = d.min(t - d);
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut kept: Vec<CriticalPointRecord> = Vec::new();
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for c in cands {
        let k = key(&c.position);
        let mut hit = None;
        let offsets: Vec<Vec<i64>> = (0..3usize.pow(m as u32))
            .map(|mut code| {
                (0..m)
                    .map(|_| {
                        let o = (code % 3) as i64 - 1;
                        code /= 3;
                        o
                    })
                    .collect()
            })
            .collect();
        'outer: for off in &offsets {
            let nk: Vec<i64> = k.iter().zip(off).map(|(a, b)| wrap_key(a + b)).collect();
            if let Some(list) = grid.get(&nk) {
                for &i in list {
                    if dist(&kept[i].position, &c.position) < tol {
                        hit = Some(i);
                        break 'outer;
                    }
                }
            }
        }
        match hit {
            Some(i) => {
                diag.duplicates_merged += 1;
                if c.grad_residual < kept[i].grad_residual {
                    kept[i] = c;
                }
            }
            None => {
                let nk: Vec<i64> = k.iter().map(|&a| wrap_key(a)).collect();
                grid.entry(nk).or_default().push(kept.len());
                kept.push(c);
            }
        }
    }
    kept
}

fn rms_gradient(components: &[&[f64]]) -> f64 {
    let n = components[0].len();
    let s: f64 = (0..n).map(|i| components.iter().map(|c| c[i] * c[i]).sum::<f64>()).sum();
    (s / n as f64).sqrt()
}

fn scan_1d(chart: &dyn Chart, scan: &Scan, opts: &FinderOptions) -> Result<(Vec<CriticalPointRecord>, FinderDiagnostics)> {
    let alphas = vec![vec![1], vec![2], vec![3]];
    let g = chart.grid(&scan.lo, &[scan.step], &scan.shape, &alphas)?;
    let (d1, d2, d3) = (&g.data[0], &g.data[1], &g.data[2]);
    let n = scan.shape[0];
    let mut diag = FinderDiagnostics {
        gradient_scale: rms_gradient(&[d1]),
        ..Default::default()
    };
    let gs = diag.gradient_scale;
    let m4 = chart.derivative_bound(4);
    let cells = if scan.periodic { n } else { n - 1 };
    let mut out = Vec::new();
    // (a, b, [X', X'', X'''] at a, same at b, depth)
    let mut stack: Vec<(f64, f64, [f64; 3], [f64; 3], u32)> = Vec::new();
    for i in 0..cells {
        let j = (i + 1) % n;
        let a = scan.lo[0] + scan.step * i as f64;
        stack.push((a, a + scan.step, [d1[i], d2[i], d3[i]], [d1[j], d2[j], d3[j]], 0));
        while let Some((a, b, fa, fb, depth)) = stack.pop() {
            let h = b - a;
            let slack = 0.5 * m4 * h * h;
            let no_inflection = |f: [f64; 3], dir: f64| {
                let far = f[1] + dir * f[2] * h;
                f[1].signum() == far.signum() && f[1].abs().min(far.abs()) > slack
            };
            let slack3 = m4 * h * h * h / 6.0;
            let no_zero = |f: [f64; 3], dir: f64| min_abs_quadratic(f[0], dir * f[1], 0.5 * f[2], h) > slack3;
            if no_zero(fa, 1.0) || no_zero(fb, -1.0) {
                continue;
            }
            let certified = no_inflection(fa, 1.0) || no_inflection(fb, -1.0);
            if !certified && depth < 40 {
                let mid = 0.5 * (a + b);
                let jm = chart.jet(&[mid], 3);
                let fm = [jm.gradient[0], jm.hessian.get(0, 0), jm.third(0, 0, 0).unwrap_or(0.0)];
                stack.push((mid, b, fm, fb, depth + 1));
                stack.push((a, mid, fa, fm, depth + 1));
                continue;
            }
            if !certified {
                diag.uncertified_cells += 1;
            }
            if fa[0] == 0.0 || fa[0].signum() != fb[0].signum() && fb[0] != 0.0 {
                diag.seeds += 1;
                match bracket_root(chart, a, b, fa[0], fb[0], gs, opts.max_newton_iter.max(100)) {
                    Refined::Converged(mut jet) => {
                        diag.converged += 1;
                        wrap(&mut jet.point, if scan.periodic { chart.period() } else { None });
                        out.push(make_record(jet, vec![i as i64]));
                    }
                    Refined::Stalled => diag.stalled += 1,
                    Refined::Failed => diag.failures += 1,
                }
            }
        }
    }
    Ok((out, diag))
}

/// `min |c0 + c1 s + c2 s^2|` over `s in [0, h]`.
fn min_abs_quadratic(c0: f64, c1: f64, c2: f64, h: f64) -> f64 {
    let q = |s: f64| c0 + c1 * s + c2 * s * s;
    let (qa, qb) = (q(0.0), q(h));
    if qa.signum() != qb.signum() {
        return 0.0;
    }
    let mut best = qa.abs().min(qb.abs());
    if c2 != 0.0 {
        let v = -c1 / (2.0 * c2);
        if v > 0.0 && v < h {
            let qv = q(v);
            if qv.signum() != qa.signum() {
                return 0.0;
            }
            best = best.min(qv.abs());
        }
    }
    best
}

/// Safeguarded Newton for the zero of `X'` bracketed by `[a, b]`.
fn bracket_root(chart: &dyn Chart, a: f64, b: f64, fa: f64, fb: f64, gs: f64, max_iter: usize) -> Refined {
    if fa == 0.0 {
        return Refined::Converged(chart.jet(&[a], 2));
    }
    let (mut lo, mut hi) = if fa < 0.0 { (a, b) } else { (b, a) };
    let _ = fb;
    let mut x = 0.5 * (a + b);
    for _ in 0..max_iter {
        let jet = chart.jet(&[x], 2);
        let f = jet.gradient[0];
        let df = jet.hessian.get(0, 0);
        let width = (hi - lo).abs();
        if f.abs() <= 1e-13 * gs || width <= 4.0 * f64::EPSILON * x.abs().max(chart.scale()) {
            return if f.abs() <= RESIDUAL_REL * gs {
                Refined::Converged(jet)
            } else {
                Refined::Failed
            };
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / df;
        let (l, h) = if lo < hi { (lo, hi) } else { (hi, lo) };
        x = if df != 0.0 && newton > l && newton < h {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Refined::Failed
}

fn scan_2d(chart: &dyn Chart, scan: &Scan, opts: &FinderOptions) -> Result<(Vec<CriticalPointRecord>, FinderDiagnostics)> {
    let alphas = vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
    let g = chart.grid(&scan.lo, &[scan.step, scan.step], &scan.shape, &alphas)?;
    let (g1, g2, h11, h12, h22) = (&g.data[0], &g.data[1], &g.data[2], &g.data[3], &g.data[4]);
    let (n1, n2) = (scan.shape[0], scan.shape[1]);
    let mut diag = FinderDiagnostics {
        gradient_scale: rms_gradient(&[g1, g2]),
        ..Default::default()
    };
    let gs = diag.gradient_scale;
    let at = |i: usize, j: usize| i * n2 + j;
    let neighbor = |i: usize, di: isize, n: usize| -> Option<usize> {
        let v = i as isize + di;
        if scan.periodic {
            Some(v.rem_euclid(n as isize) as usize)
        } else if v < 0 || v >= n as isize {
            None
        } else {
            Some(v as usize)
        }
    };
    let half = 0.5 * scan.step;
    let mut seeds: Vec<(Vec<f64>, Vec<i64>)> = Vec::new();
    let mut seen: std::collections::HashSet<Vec<i64>> = std::collections::HashSet::new();
    let period = if scan.periodic { chart.period() } else { None };
    let mut push_seed = |mut p: Vec<f64>, cell: Vec<i64>| {
        wrap(&mut p, period);
        let mut key: Vec<i64> = p.iter().map(|v| (v / half).floor() as i64).collect();
        if let Some(t) = period {
            let nk = (t / half).round() as i64;
            key.iter_mut().for_each(|k| *k = k.rem_euclid(nk));
        }
        if seen.insert(key) {
            seeds.push((p, cell));
        }
    };
    for i in 0..n1 {
        for j in 0..n2 {
            let k = at(i, j);
            let node = scan.node(&[i, j]);
            let cell = vec![i as i64, j as i64];
            // nodal Newton prediction
            let det = h11[k] * h22[k] - h12[k] * h12[k];
            let hn = h11[k].abs().max(h22[k].abs()).max(h12[k].abs());
            if det.abs() > 1e-12 * hn * hn {
                let dx = -(h22[k] * g1[k] - h12[k] * g2[k]) / det;
                let dy = -(-h12[k] * g1[k] + h11[k] * g2[k]) / det;
                if dx.abs() <= scan.step && dy.abs() <= scan.step {
                    push_seed(vec![node[0] + dx, node[1] + dy], cell.clone());
                }
            }
            // local minimum of |grad|^2 over the 8 neighbours
            let q = g1[k] * g1[k] + g2[k] * g2[k];
            let mut is_min = true;
            'nb: for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (neighbor(i, di, n1), neighbor(j, dj, n2)) {
                        let kk = at(a, b);
                        if g1[kk] * g1[kk] + g2[kk] * g2[kk] < q {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
            }
            if is_min {
                push_seed(node.clone(), cell.clone());
            }
            // both gradient components change sign over the cell
            if let (Some(a), Some(b)) = (neighbor(i, 1, n1), neighbor(j, 1, n2)) {
                let corners = [k, at(a, j), at(i, b), at(a, b)];
                let changes = |c: &[f64]| {
                    let pos = corners.iter().any(|&t| c[t] >= 0.0);
                    let neg = corners.iter().any(|&t| c[t] <= 0.0);
                    pos && neg
                };
                if changes(g1) && changes(g2) {
                    push_seed(vec![node[0] + half, node[1] + half], cell);
                }
            }
        }
    }
    let bounds: Option<(Vec<f64>, Vec<f64>)> =
        (!scan.periodic).then(|| (scan.lo.clone(), (0..2).map(|a| scan.hi(a)).collect()));
    let mut out = Vec::new();
    diag.seeds = seeds.len();
    for (p, cell) in seeds {
        match newton_2d(chart, p, scan.step, gs, opts.max_newton_iter, bounds.as_ref()) {
            Refined::Converged(mut jet) => {
                diag.converged += 1;
                wrap(&mut jet.point, period);
                out.push(make_record(jet, cell));
            }
            Refined::Stalled => diag.stalled += 1,
            Refined::Failed => diag.failures += 1,
        }
    }
    Ok((out, diag))
}

/// Damped Newton (Levenberg-Marquardt) on `grad = 0`, steps capped at one cell diagonal.
///
/// The damped step `-(H^2 + mu I)^-1 H g` is plain Newton once `mu` has decayed; away from a critical
/// point it descends `|grad|^2`, so a seed near a nonzero local minimum of `|grad|` settles there and
/// is reported as stalled.
fn newton_2d(
    chart: &dyn Chart,
    mut p: Vec<f64>,
    cell: f64,
    gs: f64,
    max_iter: usize,
    bounds: Option<&(Vec<f64>, Vec<f64>)>,
) -> Refined {
    let cap = cell * std::f64::consts::SQRT_2;
    let mut jet = chart.jet(&p, 2);
    let mut gn = jet.gradient_norm();
    let mut mu = 0.0;
    let mut history = Vec::with_capacity(max_iter);
    let settle = |jet: Jet, gn: f64| {
        if gn <= RESIDUAL_REL * gs {
            Refined::Converged(jet)
        } else {
            Refined::Stalled
        }
    };
    for _ in 0..max_iter {
        if gn <= 1e-12 * gs {
            return Refined::Converged(jet);
        }
        let (g1, g2) = (jet.gradient[0], jet.gradient[1]);
        let (a, b, c) = (jet.hessian.get(0, 0), jet.hessian.get(0, 1), jet.hessian.get(1, 1));
        let hn2 = a * a + 2.0 * b * b + c * c;
        // H g, the gradient of |grad|^2 / 2
        let (r1, r2) = (a * g1 + b * g2, b * g1 + c * g2);
        if (r1 * r1 + r2 * r2).sqrt() <= 1e-9 * hn2.sqrt() * gn {
            return settle(jet, gn);
        }
        // H^2 entries
        let (s11, s12, s22) = (a * a + b * b, a * b + b * c, b * b + c * c);
        let mut accepted = None;
        for _ in 0..40 {
            let (t11, t22) = (s11 + mu, s22 + mu);
            let det = t11 * t22 - s12 * s12;
            if det > 0.0 {
                let mut d = [-(t22 * r1 - s12 * r2) / det, -(-s12 * r1 + t11 * r2) / det];
                let len = d[0].hypot(d[1]);
                if len > cap {
                    d = [d[0] * cap / len, d[1] * cap / len];
                }
                let q = vec![p[0] + d[0], p[1] + d[1]];
                let jq = chart.jet(&q, 2);
                let gq = jq.gradient_norm();
                if gq < gn {
                    accepted = Some((q, jq, gq, len.min(cap)));
                    break;
                }
                if len <= 1e-15 * cell.max(p[0].abs().max(p[1].abs())) {
                    break;
                }
            }
            mu = if mu == 0.0 { 1e-6 * hn2 } else { mu * 8.0 };
        }
        let Some((q, jq, gq, moved)) = accepted else {
            return settle(jet, gn);
        };
        p = q;
        jet = jq;
        gn = gq;
        history.push(gn);
        // no real progress for three steps far from any zero: a nonzero minimum of |grad|
        let n = history.len();
        if n >= 8 && gn > 1e-4 * gs && history[n - 4] < 1.05 * gn {
            return Refined::Stalled;
        }
        mu /= 8.0;
        if mu < 1e-12 * hn2 {
            mu = 0.0;
        }
        if let Some((lo, hi)) = bounds {
            if p.iter().zip(lo.iter().zip(hi)).any(|(&x, (&l, &h))| x < l || x > h) {
                return Refined::Stalled;
            }
        }
        if moved <= 1e-15 * cell.max(p[0].abs().max(p[1].abs())) {
            return settle(jet, gn);
        }
    }
    if gn <= RESIDUAL_REL * gs {
        return Refined::Converged(jet);
    }
    // slow approach to a nonzero minimum of |grad|: H g nearly vanishes while g does not
    let hg = jet.hessian.mul_vec(&jet.gradient);
    if gn > 1e-6 * gs && hg[0].hypot(hg[1]) <= 1e-3 * jet.hessian.operator_norm() * gn {
        return Refined::Stalled;
    }
    Refined::Failed
}

/// Full-torus enumeration with the Euler and Morse self-checks; the scan density is doubled on a
/// failed check, up to `opts.retries` times.
pub fn enumerate_torus(sample: &FieldSample, opts: &FinderOptions) -> Result<FinderOutput> {
    let m = sample.dim();
    let mut o = *opts;
    let mut last = String::new();
    for attempt in 0..=opts.retries {
        let mut out = find_critical_points(&TorusChart(sample), &Region::torus(m), &o)?;
        let check = morse_lower_bound_check(&out.records, m);
        if check.passed {
            out.diagnostics.retries = attempt;
            return Ok(out);
        }
        last = check.detail;
        o.scan_per_wavelength *= 2;
    }
    Err(Error::EnumerationIncomplete(last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_sampler::build_sample_seeded;
    use crate::spectral_weights::WeightSpec;

    fn cos_field(m: usize) -> FieldSample {
        let terms: Vec<(Vec<i32>, f64, f64, f64)> = (0..m)
            .map(|j| {
                let mut k = vec![0; m];
                k[j] = 1;
                (k, 1.0, 1.0, 0.0)
            })
            .collect();
        FieldSample::from_terms(m, 0.25, &terms).unwrap()
    }

    #[test]
    fn cosine_on_circle() {
        let out = enumerate_torus(&cos_field(1), &FinderOptions::default()).unwrap();
        let idx: Vec<usize> = out.records.iter().map(|r| r.morse_index).collect();
        assert_eq!(out.records.len(), 2);
        assert!(idx.contains(&0) && idx.contains(&1));
        assert!(out.records.iter().any(|r| r.position[0].abs() < 1e-12));
        assert!(out.records.iter().any(|r| (r.position[0] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn cosine_sum_on_torus() {
        let out = enumerate_torus(&cos_field(2), &FinderOptions::default()).unwrap();
        let mut idx: Vec<usize> = out.records.iter().map(|r| r.morse_index).collect();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 1, 2]);
        let check = morse_lower_bound_check(&out.records, 2);
        assert!(check.passed);
        assert_eq!(check.per_index, vec![1, 2, 1]);
    }

    #[test]
    fn rejects_coarse_scan() {
        let o = FinderOptions {
            scan_per_wavelength: 3,
            ..Default::default()
        };
        assert!(find_critical_points(&TorusChart(&cos_field(1)), &Region::torus(1), &o).is_err());
    }

    #[test]
    fn random_samples_satisfy_topology() {
        let spec = WeightSpec::gaussian();
        for (m, hbar, n) in [(1usize, 1.0 / 64.0, 20u64), (2, 1.0 / 12.0, 6)] {
            for s in 0..n {
                let sample = build_sample_seeded(&spec, m, hbar, 100, s).unwrap();
                let out = enumerate_torus(&sample, &FinderOptions::default()).unwrap();
                let euler: i64 = out.records.iter().map(|r| if r.morse_index % 2 == 0 { 1 } else { -1 }).sum();
                assert_eq!(euler, 0);
                let gs = out.diagnostics.gradient_scale;
                assert!(out.records.iter().all(|r| r.grad_residual < RESIDUAL_REL * gs));
                assert_eq!(out.diagnostics.degenerate, 0);
            }
        }
    }

    #[test]
    fn deterministic_and_refinement_stable() {
        let spec = WeightSpec::gaussian();
        for (m, hbar) in [(1usize, 1.0 / 64.0), (2, 1.0 / 12.0)] {
            for s in 0..5u64 {
                let sample = build_sample_seeded(&spec, m, hbar, 200, s).unwrap();
                let a = enumerate_torus(&sample, &FinderOptions::default()).unwrap();
                let b = enumerate_torus(&sample, &FinderOptions::default()).unwrap();
                assert_eq!(a, b);
                let fine = FinderOptions {
                    scan_per_wavelength: 12,
                    ..Default::default()
                };
                let c = enumerate_torus(&sample, &fine).unwrap();
                assert_eq!(a.records.len(), c.records.len());
            }
        }
    }

    #[test]
    fn chart_equivalence() {
        let spec = WeightSpec::gaussian();
        for (m, hbar) in [(1usize, 1.0 / 64.0), (2, 1.0 / 12.0)] {
            for s in 0..4u64 {
                let sample = build_sample_seeded(&spec, m, hbar, 300, s).unwrap();
                let torus = enumerate_torus(&sample, &FinderOptions::default()).unwrap();
                for r in [0.5, 0.3] {
                    let theta_count = count_in_box(&torus.records, r);
                    let region = Region::centered(m, r / hbar);
                    let x = find_critical_points(&RescaledChart(&sample), &region, &FinderOptions::default()).unwrap();
                    assert_eq!(theta_count, x.records.len(), "m={m} s={s} r={r}");
                    assert_eq!(count_in_centered_box(&x.records, r / hbar), theta_count);
                }
            }
        }
    }

    #[test]
    fn index_stable_under_perturbation() {
        let sample = build_sample_seeded(&WeightSpec::gaussian(), 2, 1.0 / 12.0, 400, 0).unwrap();
        let out = enumerate_torus(&sample, &FinderOptions::default()).unwrap();
        for r in &out.records {
            let p: Vec<f64> = r.position.iter().map(|v| v + 1e-9).collect();
            let jet = sample.eval_jet(&p, 2);
            let idx = jet.hessian.eigenvalues().iter().filter(|&&e| e < 0.0).count();
            assert_eq!(idx, r.morse_index);
        }
    }
}
