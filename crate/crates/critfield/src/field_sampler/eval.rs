use super::FieldSample;
use crate::error::{Error, Result};
use crate::gaussian_toolkit::SymmetricMatrix;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Phase recurrences are re-anchored with an exact `sin_cos` this often.
const ANCHOR: usize = 32;

/// Value and derivatives of a field at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymmetricMatrix<f64>,
    /// Full `m x m x m` tensor, row-major, present when order 3 was requested.
    pub third: Option<Vec<f64>>,
}

impl Jet {
    pub fn third(&self, i: usize, j: usize, l: usize) -> Option<f64> {
        let m = self.point.len();
        self.third.as_ref().map(|t| t[(i * m + j) * m + l])
    }

    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn scale(&mut self, t: f64) {
        for g in &mut self.gradient {
            *g *= t;
        }
        self.hessian = self.hessian.scaled(t * t);
        if let Some(th) = &mut self.third {
            for v in th.iter_mut() {
                *v *= t * t * t;
            }
        }
    }
}

/// `e^{2 pi i n t}` for `n = 0..=nmax`.
fn phase_table(t: f64, nmax: usize, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let (s1, c1) = (TWO_PI * t.rem_euclid(1.0)).sin_cos();
    let (mut re, mut im) = (1.0, 0.0);
    for n in 0..=nmax {
        if n % ANCHOR == 0 && n > 0 {
            let (s, c) = (TWO_PI * (n as f64 * t).rem_euclid(1.0)).sin_cos();
            re = c;
            im = s;
        }
        out.push((re, im));
        let nr = re * c1 - im * s1;
        im = re * s1 + im * c1;
        re = nr;
    }
}

/// `e^{2 pi i k (lo + step i)}` for `i < n`.
fn phase_row(k: i32, lo: f64, step: f64, n: usize, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let kf = k as f64;
    let (s1, c1) = (TWO_PI * (kf * step).rem_euclid(1.0)).sin_cos();
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..n {
        if i % ANCHOR == 0 {
            let (s, c) = (TWO_PI * (kf * (lo + step * i as f64)).rem_euclid(1.0)).sin_cos();
            re = c;
            im = s;
        }
        out.push((re, im));
        let nr = re * c1 - im * s1;
        im = re * s1 + im * c1;
        re = nr;
    }
}

#[inline]
fn lookup(tab: &[(f64, f64)], k: i32) -> (f64, f64) {
    let (re, im) = tab[k.unsigned_abs() as usize];
    if k < 0 {
        (re, -im)
    } else {
        (re, im)
    }
}

/// Values of selected derivatives on a rectangular grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValues {
    pub shape: Vec<usize>,
    pub alphas: Vec<Vec<usize>>,
    pub data: Vec<Vec<f64>>,
}

impl GridValues {
    pub fn component(&self, alpha: &[usize]) -> Option<&[f64]> {
        self.alphas.iter().position(|a| a == alpha).map(|p| self.data[p].as_slice())
    }
}

/// `(2 pi i)^q` as a complex number.
fn i_power(q: usize) -> (f64, f64) {
    let mag = TWO_PI.powi(q as i32);
    match q % 4 {
        0 => (mag, 0.0),
        1 => (0.0, mag),
        2 => (-mag, 0.0),
        _ => (0.0, -mag),
    }
}

impl FieldSample {
    /// Termwise evaluation of the jet at `theta`, derivatives up to `max_order <= 3`.
    pub fn eval_jet(&self, theta: &[f64], max_order: usize) -> Jet {
        let m = self.m;
        assert_eq!(theta.len(), m, "point has the wrong dimension");
        let order = max_order.min(3);
        if m == 2 && order <= 2 {
            return self.eval_jet_2d(theta, order);
        }
        let mut tabs: Vec<Vec<(f64, f64)>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut t = Vec::new();
            phase_table(theta[j], self.kmax[j] as usize, &mut t);
            tabs.push(t);
        }
        let mut value = 0.0;
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        let mut third = vec![0.0; if order >= 3 { m * m * m } else { 0 }];
        let mut kf = [0.0f64; 3];
        for t in 0..self.len() {
            let k = self.freq(t);
            let (mut er, mut ei) = (1.0, 0.0);
            for j in 0..m {
                let (pr, pi) = lookup(&tabs[j], k[j]);
                let nr = er * pr - ei * pi;
                ei = er * pi + ei * pr;
                er = nr;
                kf[j] = k[j] as f64;
            }
            let zr = self.cre[t] * er - self.cim[t] * ei;
            let zi = self.cre[t] * ei + self.cim[t] * er;
            value += zr;
            if order >= 1 {
                for j in 0..m {
                    grad[j] -= kf[j] * zi;
                }
            }
            if order >= 2 {
                for j in 0..m {
                    for l in j..m {
                        hess[j * m + l] -= kf[j] * kf[l] * zr;
                    }
                }
            }
            if order >= 3 {
                for j in 0..m {
                    for l in j..m {
                        for p in l..m {
                            third[(j * m + l) * m + p] += kf[j] * kf[l] * kf[p] * zi;
                        }
                    }
                }
            }
        }
        for g in &mut grad {
            *g *= TWO_PI;
        }
        let hessian = SymmetricMatrix::from_fn(m, |i, j| TWO_PI * TWO_PI * hess[i * m + j]);
        let third = (order >= 3).then(|| {
            let s = TWO_PI.powi(3);
            let mut full = vec![0.0; m * m * m];
            for i in 0..m {
                for j in 0..m {
                    for l in 0..m {
                        let mut idx = [i, j, l];
                        idx.sort_unstable();
                        full[(i * m + j) * m + l] = s * third[(idx[0] * m + idx[1]) * m + idx[2]];
                    }
                }
            }
            full
        });
        Jet {
            point: theta.to_vec(),
            value,
            gradient: grad,
            hessian,
            third,
        }
    }

    fn eval_jet_2d(&self, theta: &[f64], order: usize) -> Jet {
        let (mut t1, mut t2) = (Vec::new(), Vec::new());
        phase_table(theta[0], self.kmax[0] as usize, &mut t1);
        phase_table(theta[1], self.kmax[1] as usize, &mut t2);
        let (mut v, mut g1, mut g2, mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, k) in self.k.chunks_exact(2).enumerate() {
            let (ar, ai) = lookup(&t1, k[0]);
            let (br, bi) = lookup(&t2, k[1]);
            let er = ar * br - ai * bi;
            let ei = ar * bi + ai * br;
            let zr = self.cre[t] * er - self.cim[t] * ei;
            let zi = self.cre[t] * ei + self.cim[t] * er;
            let (k1, k2) = (k[0] as f64, k[1] as f64);
            v += zr;
            g1 -= k1 * zi;
            g2 -= k2 * zi;
            h11 -= k1 * k1 * zr;
            h12 -= k1 * k2 * zr;
            h22 -= k2 * k2 * zr;
        }
        let c2 = TWO_PI * TWO_PI;
        let (gradient, hessian) = if order == 0 {
            (vec![0.0; 2], SymmetricMatrix::zeros(2))
        } else if order == 1 {
            (vec![TWO_PI * g1, TWO_PI * g2], SymmetricMatrix::zeros(2))
        } else {
            (
                vec![TWO_PI * g1, TWO_PI * g2],
                SymmetricMatrix::from_fn(2, |i, j| c2 * [h11, h12, h22][i + j]),
            )
        };
        Jet {
            point: theta.to_vec(),
            value: v,
            gradient,
            hessian,
            third: None,
        }
    }

    /// Jet of `Y^hbar(x) = X^hbar(hbar x)`: derivatives of order `q` pick up `hbar^q`.
    pub fn rescaled_jet(&self, x: &[f64], max_order: usize) -> Jet {
        let theta: Vec<f64> = x.iter().map(|&v| (self.hbar * v).rem_euclid(1.0)).collect();
        let mut j = self.eval_jet(&theta, max_order);
        j.scale(self.hbar);
        j.point = x.to_vec();
        j
    }

    /// Derivatives `alphas` on the grid `lo_j + step_j i_j`, `i_j < shape_j`, by separable direct summation.
    pub fn grid_values(&self, lo: &[f64], step: &[f64], shape: &[usize], alphas: &[Vec<usize>]) -> Result<GridValues> {
        let m = self.m;
        if lo.len() != m || step.len() != m || shape.len() != m || alphas.iter().any(|a| a.len() != m) {
            return Err(Error::InvalidArgument("grid description has the wrong dimension".into()));
        }
        let data = match m {
            1 => self.grid_1d(lo[0], step[0], shape[0], alphas),
            2 => self.grid_2d(lo, step, shape, alphas),
            _ => return Err(Error::InvalidArgument("grid evaluation supports m <= 2".into())),
        };
        Ok(GridValues {
            shape: shape.to_vec(),
            alphas: alphas.to_vec(),
            data,
        })
    }

    fn grid_1d(&self, lo: f64, step: f64, n: usize, alphas: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<(f64, f64)>> = alphas.iter().map(|_| vec![(0.0, 0.0); n]).collect();
        let mut row = Vec::with_capacity(n);
        for t in 0..self.len() {
            let k = self.k[t];
            phase_row(k, lo, step, n, &mut row);
            let (cr, ci) = (self.cre[t], self.cim[t]);
            for (o, a) in out.iter_mut().zip(alphas) {
                let f = (k as f64).powi(a[0] as i32);
                let (fr, fi) = (cr * f, ci * f);
                for (acc, &(er, ei)) in o.iter_mut().zip(&row) {
                    acc.0 += fr * er - fi * ei;
                    acc.1 += fr * ei + fi * er;
                }
            }
        }
        out.into_iter()
            .zip(alphas)
            .map(|(v, a)| {
                let (pr, pi) = i_power(a[0]);
                v.into_iter().map(|(r, i)| pr * r - pi * i).collect()
            })
            .collect()
    }

    fn grid_2d(&self, lo: &[f64], step: &[f64], shape: &[usize], alphas: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let (n1, n2) = (shape[0], shape[1]);
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&t| self.k[2 * t]);
        let mut a2s: Vec<usize> = alphas.iter().map(|a| a[1]).collect();
        a2s.sort_unstable();
        a2s.dedup();
        let mut out = vec![vec![0.0; n1 * n2]; alphas.len()];
        let mut row1 = Vec::with_capacity(n1);
        let mut row2 = Vec::with_capacity(n2);
        let mut partial: Vec<Vec<(f64, f64)>> = a2s.iter().map(|_| vec![(0.0, 0.0); n2]).collect();
        let mut s = 0;
        while s < order.len() {
            let k1 = self.k[2 * order[s]];
            let mut e = s;
            while e < order.len() && self.k[2 * order[e]] == k1 {
                e += 1;
            }
            for p in partial.iter_mut() {
                p.iter_mut().for_each(|v| *v = (0.0, 0.0));
            }
            for &t in &order[s..e] {
                let k2 = self.k[2 * t + 1];
                phase_row(k2, lo[1], step[1], n2, &mut row2);
                for (p, &a2) in partial.iter_mut().zip(&a2s) {
                    let f = (k2 as f64).powi(a2 as i32);
                    let (fr, fi) = (self.cre[t] * f, self.cim[t] * f);
                    for (acc, &(er, ei)) in p.iter_mut().zip(&row2) {
                        acc.0 += fr * er - fi * ei;
                        acc.1 += fr * ei + fi * er;
                    }
                }
            }
            phase_row(k1, lo[0], step[0], n1, &mut row1);
            for (o, a) in out.iter_mut().zip(alphas) {
                let p = &partial[a2s.binary_search(&a[1]).unwrap()];
                let (ir, ii) = i_power(a[0] + a[1]);
                let f = (k1 as f64).powi(a[0] as i32);
                for (i, &(er, ei)) in row1.iter().enumerate() {
                    // Re[(2 pi i)^q k1^a1 e1 p_j]
                    let (gr, gi) = (f * (ir * er - ii * ei), f * (ir * ei + ii * er));
                    let dst = &mut o[i * n2..(i + 1) * n2];
                    for (d, &(pr, pi)) in dst.iter_mut().zip(p) {
                        *d += gr * pr - gi * pi;
                    }
                }
            }
            s = e;
        }
        out
    }
}
