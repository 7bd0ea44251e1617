use std::sync::Arc;

use super::{sphere_area, WeightSpec};
use crate::error::{Error, Result};
use crate::multi_index::{self, MultiIndexTable};
use crate::scalar::{cst, to_f64, Real};

/// Partial derivatives `d^alpha V(z)` (or of the periodized `V^hbar`) for all `|alpha| <= max_order`.
#[derive(Clone, Debug)]
pub struct CovarianceJet<T: Real> {
    pub z: Vec<T>,
    /// 0 for the plain covariance.
    pub hbar: T,
    pub periodized: bool,
    /// Largest relative change observed when halving the quadrature step.
    pub quad_error: T,
    pub truncation_radius: T,
    /// Size of the outermost lattice shell that was kept (0 when not periodized).
    pub tail_bound: T,
    pub lattice_radius: usize,
    table: Arc<MultiIndexTable>,
    values: Vec<T>,
}

impl<T: Real> CovarianceJet<T> {
    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn max_order(&self) -> usize {
        self.table.max_order()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        self.table.indices()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn try_get(&self, alpha: &[usize]) -> Option<T> {
        self.table.position(alpha).map(|i| self.values[i])
    }

    /// `d^alpha V(z)`; panics if `alpha` is outside the computed range.
    pub fn get(&self, alpha: &[usize]) -> T {
        self.try_get(alpha)
            .unwrap_or_else(|| panic!("multi-index {alpha:?} not in jet of order {}", self.max_order()))
    }

    /// Derivative along a list of axes, e.g. `&[0, 1]` for d1 d2.
    pub fn d(&self, axes: &[usize]) -> T {
        self.get(&multi_index::from_axes(self.dim(), axes))
    }

    /// Matrix of second derivatives `[d_i d_j V(z)]`.
    pub fn hessian(&self) -> Vec<Vec<T>> {
        let m = self.dim();
        (0..m).map(|i| (0..m).map(|j| self.d(&[i, j])).collect()).collect()
    }

    /// Jet at `-z`, obtained from evenness of `V`.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.z = self.z.iter().map(|&x| -x).collect();
        for (v, a) in out.values.iter_mut().zip(self.table.indices()) {
            if multi_index::order(a) % 2 == 1 {
                *v = -*v;
            }
        }
        out
    }

    /// Largest absolute entry over `|alpha| <= order`.
    pub fn max_abs_up_to(&self, order: usize) -> T {
        self.table
            .indices()
            .iter()
            .zip(&self.values)
            .filter(|(a, _)| multi_index::order(a) <= order)
            .fold(T::zero(), |acc, (_, v)| acc.max(v.abs()))
    }
}

fn check_dims<T: Real>(m: usize, z: &[T], max_order: usize) -> Result<()> {
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidArgument(format!("dimension {m} not in 1..=3")));
    }
    if z.len() != m {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, expected {m}", z.len())));
    }
    if max_order > 6 {
        return Err(Error::InvalidArgument(format!("derivative order {max_order} exceeds 6")));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite evaluation point".into()));
    }
    Ok(())
}

/// Tensor trapezoid sum of the Fourier integral with step `h`; returns values and absolute sums.
fn trapezoid<T: Real>(spec: &WeightSpec<T>, table: &MultiIndexTable, z: &[T], h: T) -> (Vec<T>, Vec<T>) {
    let m = z.len();
    let t = spec.truncation_radius();
    let n = (t / h).ceil().to_usize().unwrap();
    let len = 2 * n + 1;
    let max_order = table.max_order();
    let xi: Vec<T> = (0..len).map(|i| cst::<T>(i as f64 - n as f64) * h).collect();
    // powers[p][i] = xi_i^p
    let powers: Vec<Vec<T>> = (0..=max_order).map(|p| xi.iter().map(|&x| x.powi(p as i32)).collect()).collect();
    // per-axis phase factors
    let phase: Vec<Vec<(T, T)>> = z
        .iter()
        .map(|&zj| xi.iter().map(|&x| (x * zj).sin_cos()).map(|(s, c)| (c, s)).collect())
        .collect();
    let two_pi: T = T::PI() + T::PI();
    let norm = (h / two_pi).powi(m as i32);
    let t2 = t * t;
    let k = table.len();
    let mut acc = vec![T::zero(); k];
    let mut abs_acc = vec![T::zero(); k];
    // sign and parity per multi-index
    let kind: Vec<(usize, T)> = table
        .indices()
        .iter()
        .map(|a| {
            let q = multi_index::order(a);
            let sign = if q % 2 == 0 {
                if (q / 2) % 2 == 0 { T::one() } else { -T::one() }
            } else if q.div_ceil(2) % 2 == 0 {
                T::one()
            } else {
                -T::one()
            };
            (q % 2, sign)
        })
        .collect();
    let mut idx = vec![0usize; m];
    loop {
        let r2: T = idx.iter().map(|&i| xi[i] * xi[i]).sum();
        if r2 <= t2 {
            let wv = spec.w(r2.sqrt()) * norm;
            if wv > T::zero() {
                let (mut c, mut s) = (T::one(), T::zero());
                for (j, &i) in idx.iter().enumerate() {
                    let (cj, sj) = phase[j][i];
                    let nc = c * cj - s * sj;
                    s = s * cj + c * sj;
                    c = nc;
                }
                for (slot, alpha) in table.indices().iter().enumerate() {
                    let mut mono = wv;
                    for (j, &aj) in alpha.iter().enumerate() {
                        if aj > 0 {
                            mono *= powers[aj][idx[j]];
                        }
                    }
                    let (parity, sign) = kind[slot];
                    let term = sign * mono * if parity == 0 { c } else { s };
                    acc[slot] += term;
                    abs_acc[slot] += term.abs();
                }
            }
        }
        let mut j = 0;
        loop {
            if j == m {
                return (acc, abs_acc);
            }
            idx[j] += 1;
            if idx[j] < len {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn bucket<T: Real>(x: T) -> T {
    let mut b = T::one();
    while b < x {
        b = b + b;
    }
    b
}

/// `d^alpha V(z) = (2 pi)^-m int (-i xi)^alpha e^{-i<xi,z>} w(|xi|) dxi` for all `|alpha| <= max_order`.
pub fn covariance_jet<T: Real>(spec: &WeightSpec<T>, m: usize, z: &[T], max_order: usize) -> Result<CovarianceJet<T>> {
    Ok(shared_grid_jets(spec, m, &[z], max_order)?.pop().unwrap())
}

/// Jets at `0` and at `z` from one quadrature grid, so that the joint covariance they define stays
/// positive semidefinite when `z` is close to `0`.
pub fn covariance_jet_pair<T: Real>(
    spec: &WeightSpec<T>,
    m: usize,
    z: &[T],
    max_order: usize,
) -> Result<(CovarianceJet<T>, CovarianceJet<T>)> {
    let zero = vec![T::zero(); m];
    let mut v = shared_grid_jets(spec, m, &[&zero, z], max_order)?;
    let jz = v.pop().unwrap();
    Ok((v.pop().unwrap(), jz))
}

fn shared_grid_jets<T: Real>(spec: &WeightSpec<T>, m: usize, zs: &[&[T]], max_order: usize) -> Result<Vec<CovarianceJet<T>>> {
    for z in zs {
        check_dims(m, z, max_order)?;
    }
    let table = MultiIndexTable::shared(m, max_order);
    let zinf = zs.iter().flat_map(|z| z.iter()).fold(T::zero(), |a, &b| a.max(b.abs()));
    let two_pi: T = T::PI() + T::PI();
    let reach = spec.alias_margin() + bucket(zinf);
    let mut h = two_pi / reach;
    let t = spec.truncation_radius();
    let min_nodes: T = cst(8.0);
    if t / h < min_nodes {
        h = t / min_nodes;
    }
    // scale_k bounds |d^alpha V| for |alpha| = k
    let area = sphere_area(m);
    let mut scale = Vec::with_capacity(max_order + 1);
    for q in 0..=max_order {
        let ik = spec.radial_moment((m - 1 + q) as u32)?;
        scale.push(ik * cst(area / (2.0 * std::f64::consts::PI).powi(m as i32)));
    }
    let orders: Vec<usize> = table.indices().iter().map(|a| multi_index::order(a)).collect();
    let tol = T::tol_floor(1e-8);
    let mut prev: Vec<Vec<T>> = zs.iter().map(|z| trapezoid(spec, &table, z, h).0).collect();
    let mut err = T::infinity();
    for _ in 0..=spec.max_doublings() {
        h = h / cst(2.0);
        let cur: Vec<(Vec<T>, Vec<T>)> = zs.iter().map(|z| trapezoid(spec, &table, z, h)).collect();
        err = T::zero();
        for (c, p) in cur.iter().zip(&prev) {
            for i in 0..c.0.len() {
                err = err.max((c.0[i] - p[i]).abs() / scale[orders[i]]);
            }
        }
        if err <= tol {
            let floor = cst::<T>(64.0) * T::epsilon();
            return Ok(cur
                .into_iter()
                .zip(zs)
                .map(|((vals, abs_sum), z)| CovarianceJet {
                    z: z.to_vec(),
                    hbar: T::zero(),
                    periodized: false,
                    quad_error: err,
                    truncation_radius: t,
                    tail_bound: T::zero(),
                    lattice_radius: 0,
                    table: table.clone(),
                    values: vals
                        .iter()
                        .zip(&abs_sum)
                        .map(|(&v, &a)| if v.abs() <= floor * a { T::zero() } else { v })
                        .collect(),
                })
                .collect());
        }
        prev = cur.into_iter().map(|c| c.0).collect();
    }
    Err(Error::QuadratureNotConverged {
        what: "covariance jet".into(),
        achieved: to_f64(err),
        requested: to_f64(tol),
    })
}

fn lattice_shell(m: usize, radius: usize) -> Vec<Vec<i64>> {
    let r = radius as i64;
    let mut out = Vec::new();
    let mut idx = vec![-r; m];
    loop {
        if idx.iter().map(|v| v.abs()).max().unwrap_or(0) == r {
            out.push(idx.clone());
        }
        let mut j = 0;
        loop {
            if j == m {
                return out;
            }
            idx[j] += 1;
            if idx[j] <= r {
                break;
            }
            idx[j] = -r;
            j += 1;
        }
    }
}

fn shell_sum<T: Real>(
    spec: &WeightSpec<T>,
    m: usize,
    hbar: T,
    z: &[T],
    max_order: usize,
    radius: usize,
) -> Result<(Vec<T>, T)> {
    let table = MultiIndexTable::shared(m, max_order);
    let mut sum = vec![T::zero(); table.len()];
    let mut qerr = T::zero();
    for nu in lattice_shell(m, radius) {
        let p: Vec<T> = z.iter().zip(&nu).map(|(&zj, &n)| zj + cst::<T>(n as f64) / hbar).collect();
        let jet = covariance_jet(spec, m, &p, max_order)?;
        qerr = qerr.max(jet.quad_error);
        for (s, v) in sum.iter_mut().zip(jet.values()) {
            *s += *v;
        }
    }
    Ok((sum, qerr))
}

fn periodized_impl<T: Real>(
    spec: &WeightSpec<T>,
    m: usize,
    hbar: T,
    z: &[T],
    max_order: usize,
    lattice_radius: usize,
    grow: bool,
) -> Result<CovarianceJet<T>> {
    check_dims(m, z, max_order)?;
    if !(hbar > T::zero() && hbar <= cst(0.25)) {
        return Err(Error::InvalidArgument(format!("hbar must lie in (0, 1/4], got {hbar}")));
    }
    if lattice_radius == 0 {
        return Err(Error::InvalidArgument("lattice radius must be at least 1".into()));
    }
    let tol = T::tol_floor(1e-14);
    let table = MultiIndexTable::shared(m, max_order);
    let mut total = vec![T::zero(); table.len()];
    let mut qerr = T::zero();
    let mut radius = 0;
    let mut tail = T::zero();
    loop {
        let (shell, e) = shell_sum(spec, m, hbar, z, max_order, radius)?;
        qerr = qerr.max(e);
        if radius > 0 {
            tail = shell.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        }
        for (t, s) in total.iter_mut().zip(&shell) {
            *t += *s;
        }
        if radius >= lattice_radius {
            if tail < tol {
                break;
            }
            if !grow || radius >= 16 {
                return Err(Error::LatticeRadiusTooSmall {
                    radius,
                    tail: to_f64(tail),
                });
            }
        }
        radius += 1;
    }
    Ok(CovarianceJet {
        z: z.to_vec(),
        hbar,
        periodized: true,
        quad_error: qerr,
        truncation_radius: spec.truncation_radius(),
        tail_bound: tail,
        lattice_radius: radius,
        table,
        values: total,
    })
}

/// Jet of `V^hbar(z) = sum_{|nu|_inf <= R} V(z + nu/hbar)` for a fixed lattice radius `R`.
pub fn periodized_covariance_jet<T: Real>(
    spec: &WeightSpec<T>,
    m: usize,
    hbar: T,
    z: &[T],
    max_order: usize,
    lattice_radius: usize,
) -> Result<CovarianceJet<T>> {
    periodized_impl(spec, m, hbar, z, max_order, lattice_radius, false)
}

/// Periodized jet starting at lattice radius 2 and adding shells until the outermost is negligible.
pub fn periodized_covariance_jet_auto<T: Real>(
    spec: &WeightSpec<T>,
    m: usize,
    hbar: T,
    z: &[T],
    max_order: usize,
) -> Result<CovarianceJet<T>> {
    periodized_impl(spec, m, hbar, z, max_order, 2, true)
}

/// Plain jet for `hbar = 0`, periodized otherwise.
pub fn jet_at<T: Real>(spec: &WeightSpec<T>, m: usize, hbar: T, z: &[T], max_order: usize) -> Result<CovarianceJet<T>> {
    if hbar == T::zero() {
        covariance_jet(spec, m, z, max_order)
    } else {
        periodized_covariance_jet_auto(spec, m, hbar, z, max_order)
    }
}

/// Jets at `0` and at `z` whose `nu = 0` lattice terms share one quadrature grid.
pub fn jet_pair_at<T: Real>(
    spec: &WeightSpec<T>,
    m: usize,
    hbar: T,
    z: &[T],
    max_order: usize,
) -> Result<(CovarianceJet<T>, CovarianceJet<T>)> {
    let (c0, cz) = covariance_jet_pair(spec, m, z, max_order)?;
    if hbar == T::zero() {
        return Ok((c0, cz));
    }
    let zero = vec![T::zero(); m];
    let mut out = Vec::with_capacity(2);
    for (point, center) in [(&zero[..], c0), (z, cz)] {
        let mut jet = periodized_covariance_jet_auto(spec, m, hbar, point, max_order)?;
        let alone = covariance_jet(spec, m, point, max_order)?;
        for ((v, a), c) in jet.values.iter_mut().zip(&alone.values).zip(&center.values) {
            *v = *v - *a + *c;
        }
        out.push(jet);
    }
    let jz = out.pop().unwrap();
    Ok((out.pop().unwrap(), jz))
}

/// `psi^hbar(x) = max_{|alpha| <= 4} |d^alpha V^hbar(x)|` on `|x|_inf <= 1/(2 hbar)`, zero outside.
pub fn envelope_psi<T: Real>(spec: &WeightSpec<T>, m: usize, hbar: T, x: &[T]) -> Result<T> {
    if hbar < T::zero() || hbar > cst(0.25) {
        return Err(Error::InvalidArgument(format!("hbar must lie in [0, 1/4], got {hbar}")));
    }
    if hbar > T::zero() {
        let xinf = x.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        if xinf > T::one() / (hbar + hbar) {
            return Ok(T::zero());
        }
    }
    Ok(jet_at(spec, m, hbar, x, 4)?.max_abs_up_to(4))
}

/// Operational length scales of `V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationScales<T> {
    /// Smallest `s` with `max_{|alpha|<=4} |d^alpha V(y)| < 1e-3 psi(0)` for all `|y| >= s`.
    pub correlation_length: T,
    /// Same with threshold `1e-12 psi(0)`; beyond it two points are treated as independent.
    pub decay_radius: T,
    pub psi0: T,
}

/// Correlation length and decay radius of `V` in dimension `m`, cached on the spec.
pub fn correlation_scales<T: Real>(spec: &WeightSpec<T>, m: usize) -> Result<CorrelationScales<T>> {
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidArgument(format!("dimension {m} not in 1..=3")));
    }
    if let Some(s) = spec.scales[m - 1].get() {
        return Ok(*s);
    }
    let s = compute_scales(spec, m)?;
    let _ = spec.scales[m - 1].set(s);
    Ok(s)
}

fn compute_scales<T: Real>(spec: &WeightSpec<T>, m: usize) -> Result<CorrelationScales<T>> {
    let zero = vec![T::zero(); m];
    let psi0 = covariance_jet(spec, m, &zero, 4)?.max_abs_up_to(4);
    let step: T = cst(match m {
        1 => 1.0 / 16.0,
        2 => 1.0 / 8.0,
        _ => 1.0 / 4.0,
    });
    let mut dirs = vec![vec![T::zero(); m]];
    dirs[0][0] = T::one();
    if m > 1 {
        let c = T::one() / cst::<T>(m as f64).sqrt();
        dirs.push(vec![c; m]);
    }
    let corr_thr = psi0 * cst(1e-3);
    let decay_thr = psi0 * cst(1e-12);
    let mut last_corr = T::zero();
    let mut last_decay = T::zero();
    let mut s = step;
    let quiet_span: T = cst(4.0);
    while s < cst(4096.0) {
        let mut env = T::zero();
        for d in &dirs {
            let y: Vec<T> = d.iter().map(|&c| c * s).collect();
            env = env.max(covariance_jet(spec, m, &y, 4)?.max_abs_up_to(4));
        }
        if env >= corr_thr {
            last_corr = s;
        }
        if env >= decay_thr {
            last_decay = s;
        }
        if s - last_decay > quiet_span && s > last_decay * cst(1.5) {
            return Ok(CorrelationScales {
                correlation_length: last_corr + step,
                decay_radius: last_decay + step,
                psi0,
            });
        }
        s += step;
    }
    Err(Error::Tolerance("covariance did not decay within 4096 units".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    fn he(n: usize, x: f64) -> f64 {
        let (mut a, mut b) = (1.0, x);
        if n == 0 {
            return 1.0;
        }
        for k in 1..n {
            let c = x * b - k as f64 * a;
            a = b;
            b = c;
        }
        b
    }

    #[test]
    fn gaussian_1d_matches_closed_form() {
        let g = WeightSpec::<f64>::gaussian();
        for &y in &[0.0, 0.3, 1.7, 4.0, 9.0] {
            let jet = covariance_jet(&g, 1, &[y], 6).unwrap();
            let v = INV_SQRT_2PI * (-y * y / 2.0).exp();
            for n in 0..=6 {
                let want = if n % 2 == 0 { 1.0 } else { -1.0 } * he(n, y) * v;
                assert!((jet.get(&[n]) - want).abs() < 1e-12, "n={n} y={y}: {} vs {want}", jet.get(&[n]));
            }
        }
        let j0 = covariance_jet(&g, 1, &[0.0], 2).unwrap();
        assert!((j0.get(&[0]) - INV_SQRT_2PI).abs() < 1e-14);
        assert!((j0.get(&[2]) + INV_SQRT_2PI).abs() < 1e-14);
    }

    #[test]
    fn moments_consistency_1d() {
        for spec in [WeightSpec::<f64>::gaussian(), WeightSpec::<f64>::rational(7.0).unwrap()] {
            let j = covariance_jet(&spec, 1, &[0.0], 4).unwrap();
            let pi = std::f64::consts::PI;
            let i2 = spec.radial_moment(2).unwrap();
            let i4 = spec.radial_moment(4).unwrap();
            assert!(((-j.get(&[2])) - i2 / pi).abs() < 1e-6 * i2 / pi);
            assert!((j.get(&[4]) - i4 / pi).abs() < 1e-6 * i4 / pi);
        }
    }

    #[test]
    fn isotropy_at_origin_2d() {
        let g = WeightSpec::<f64>::gaussian();
        let j = covariance_jet(&g, 2, &[0.0, 0.0], 4).unwrap();
        let lam2 = -j.d(&[0, 0]);
        assert!((j.d(&[0, 0]) - j.d(&[1, 1])).abs() < 1e-8 * lam2);
        assert!(j.d(&[0, 1]).abs() < 1e-8 * lam2);
        assert!((lam2 - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-10);
        for a in j.indices() {
            if crate::multi_index::order(a) % 2 == 1 {
                assert_eq!(j.get(a), 0.0);
            }
        }
    }

    #[test]
    fn gaussian_3d_value() {
        let g = WeightSpec::<f64>::gaussian();
        let j = covariance_jet(&g, 3, &[0.5, -0.25, 1.0], 2).unwrap();
        let r2 = 0.25 + 0.0625 + 1.0;
        let want = (2.0 * std::f64::consts::PI).powf(-1.5) * (-r2 / 2.0f64).exp();
        assert!((j.get(&[0, 0, 0]) - want).abs() < 1e-12);
        // d1 V = -z1 V
        assert!((j.get(&[1, 0, 0]) + 0.5 * want).abs() < 1e-12);
    }

    #[test]
    fn periodization_is_periodic_and_small_at_fine_scale() {
        let g = WeightSpec::<f64>::gaussian();
        let hbar = 0.25;
        let a = periodized_covariance_jet_auto(&g, 1, hbar, &[0.7], 4).unwrap();
        let b = periodized_covariance_jet_auto(&g, 1, hbar, &[0.7 + 4.0], 4).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-13);
        }
        let p = periodized_covariance_jet(&g, 1, 1.0 / 16.0, &[0.0], 0, 2).unwrap();
        let v = covariance_jet(&g, 1, &[0.0], 0).unwrap();
        assert!((p.get(&[0]) - v.get(&[0])).abs() < 1e-20);
    }

    #[test]
    fn periodization_against_poisson_sum() {
        // V^hbar(z) = hbar sum_k w(2 pi hbar k) cos(2 pi hbar k z) in one dimension
        let g = WeightSpec::<f64>::gaussian();
        let hbar = 0.25;
        for &z in &[0.0, 0.9, 1.7] {
            let p = periodized_covariance_jet_auto(&g, 1, hbar, &[z], 0).unwrap();
            let mut s = 0.0;
            for k in -200i32..=200 {
                let f = 2.0 * std::f64::consts::PI * hbar * k as f64;
                s += hbar * g.w(f) * (f * z).cos();
            }
            assert!((p.get(&[0]) - s).abs() < 1e-12, "z={z}: {} vs {s}", p.get(&[0]));
        }
    }

    #[test]
    fn periodization_rejects_too_small_radius() {
        let g = WeightSpec::<f64>::rational(6.0).unwrap();
        let r = periodized_covariance_jet(&g, 1, 0.25, &[0.0], 2, 1);
        assert!(matches!(r, Err(Error::LatticeRadiusTooSmall { .. })));
        assert!(periodized_covariance_jet_auto(&g, 1, 0.25, &[0.0], 2).is_ok());
    }

    #[test]
    fn periodization_converges_faster_than_cubic() {
        let grid = [0.0, 0.5, 1.0, 1.5];
        let sup = |g: &WeightSpec<f64>, hbar: f64| {
            grid.iter()
                .map(|&z| {
                    let p = periodized_covariance_jet_auto(g, 1, hbar, &[z], 0).unwrap();
                    let v = covariance_jet(g, 1, &[z], 0).unwrap();
                    (p.get(&[0]) - v.get(&[0])).abs()
                })
                .fold(0.0, f64::max)
        };
        let g = WeightSpec::<f64>::gaussian();
        let (d1, d2) = (sup(&g, 0.25), sup(&g, 0.125));
        assert!(d1 > 0.0 && d2 * 8.0 < d1, "{d1} {d2}");
        let r = WeightSpec::<f64>::rational(6.0).unwrap();
        let (d1, d2) = (sup(&r, 0.125), sup(&r, 0.0625));
        assert!(d1 > 0.0 && d2 * 8.0 < d1, "{d1} {d2}");
    }

    #[test]
    fn envelope_support_and_origin() {
        let g = WeightSpec::<f64>::gaussian();
        assert_eq!(envelope_psi(&g, 1, 0.125, &[10.0]).unwrap(), 0.0);
        let p0 = envelope_psi(&g, 1, 0.0, &[0.0]).unwrap();
        assert!(p0 >= INV_SQRT_2PI);
        assert!((p0 - 3.0 * INV_SQRT_2PI).abs() < 1e-12);
    }

    #[test]
    fn correlation_length_gaussian_1d() {
        let g = WeightSpec::<f64>::gaussian();
        let s = correlation_scales(&g, 1).unwrap();
        assert!(s.correlation_length > 4.0 && s.correlation_length < 6.0, "{s:?}");
        assert!(s.decay_radius > s.correlation_length);
        let again = correlation_scales(&g, 1).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = WeightSpec::<f64>::gaussian();
        assert!(covariance_jet(&g, 4, &[0.0; 4], 2).is_err());
        assert!(covariance_jet(&g, 1, &[0.0], 7).is_err());
        assert!(periodized_covariance_jet(&g, 1, 0.5, &[0.0], 2, 2).is_err());
    }
}
