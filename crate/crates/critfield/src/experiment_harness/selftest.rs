//! Fast formula-level checks run by the `selftest` subcommand.

use std::f64::consts::PI;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::chaos_analyzer::{d_alpha, d_alpha_rational, hessian_hermite_coeffs};
use crate::error::Result;
use crate::gaussian_toolkit::{gaussian_expectation, hermite, SymmetricMatrix};
use crate::gaussian_toolkit::HomogeneousFn;
use crate::kac_rice_engine::{gradient_covariance, hessian_covariance};
use crate::spectral_weights::{covariance_jet, envelope_psi, jet_at, quadrature, WeightSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn hermite_values() -> Check {
    let x = 0.7f64;
    let cases = [
        (hermite(0, x), 1.0),
        (hermite(1, x), x),
        (hermite(3, x), x.powi(3) - 3.0 * x),
        (hermite(4, 1.3f64), 1.3f64.powi(4) - 6.0 * 1.69 + 3.0),
        (hermite(6, -0.4f64), {
            let y = -0.4f64;
            y.powi(6) - 15.0 * y.powi(4) + 45.0 * y * y - 15.0
        }),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check("hermite values", worst < 1e-12, format!("max error {worst:e}"))
}

fn hermite_orthogonality() -> Result<Check> {
    let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
    let mut worst: f64 = 0.0;
    for j in 0..=6usize {
        for k in 0..=6usize {
            let (v, _) = quadrature::integrate(|x| hermite(j, x) * hermite(k, x) * phi(x), -14.0, 14.0, 1e-12, 1e-14)?;
            let expect = if j == k { gamma(k as f64 + 1.0) } else { 0.0 };
            worst = worst.max((v - expect).abs() / expect.max(1.0));
        }
    }
    Ok(check(
        "hermite orthogonality E[H_j H_k] = k! delta_jk",
        worst < 1e-9,
        format!("max relative error {worst:e}"),
    ))
}

fn d_table() -> Result<Check> {
    let c = (2.0 * PI).powf(-0.5);
    let table: [(&[usize], Ratio<i128>); 6] = [
        (&[0], Ratio::new(1, 1)),
        (&[2], Ratio::new(-1, 2)),
        (&[4], Ratio::new(1, 8)),
        (&[6], Ratio::new(-1, 48)),
        (&[2, 2], Ratio::new(1, 4)),
        (&[4, 2], Ratio::new(-1, 16)),
    ];
    let mut ok = true;
    for (a, want) in table {
        ok &= d_alpha_rational(a)? == want;
    }
    ok &= d_alpha(&[3])? == 0.0;
    ok &= (d_alpha(&[2])? + 0.5 * c).abs() < 1e-15;
    Ok(check("d_alpha table", ok, "orders 0..6 and (2,2), (4,2)".into()))
}

fn f0_cross_check(spec: &WeightSpec<f64>) -> Result<Check> {
    let mut detail = Vec::new();
    let mut ok = true;
    for (m, q) in [(1usize, 2usize), (2, 2)] {
        let coeffs = hessian_hermite_coeffs(spec, m, 0.0, q, 200_000, &mut ChaCha8Rng::seed_from_u64(11 + m as u64))?;
        let (f0, se0) = coeffs
            .f
            .iter()
            .find(|(b, _, _)| b.iter().all(|&x| x == 0))
            .map(|(_, v, s)| (*v, *s))
            .expect("zero index present");
        let jet = covariance_jet(spec, m, &vec![0.0; m], 4)?;
        let (e, se) = gaussian_expectation(
            HomogeneousFn::AbsDet { m },
            &hessian_covariance(&jet),
            200_000,
            &mut ChaCha8Rng::seed_from_u64(21 + m as u64),
        )?;
        let z = (f0 - e).abs() / (se0 * se0 + se * se).sqrt();
        ok &= z < 4.0;
        detail.push(format!("m={m}: f0 {f0:.5} vs E|det| {e:.5} ({z:.2} SE)"));
    }
    Ok(check("f_0 against E|det Hess|", ok, detail.join("; ")))
}

fn omega_identity(spec: &WeightSpec<f64>) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for m in 1..=2usize {
        let coeffs = hessian_hermite_coeffs(spec, m, 0.0, 0, 1000, &mut ChaCha8Rng::seed_from_u64(3))?;
        let jet = covariance_jet(spec, m, &vec![0.0; m], 4)?;
        let det = gradient_covariance(&jet).scaled(2.0 * PI).determinant();
        let lhs = (2.0 * PI).powf(-(m as f64) / 2.0) * coeffs.omega;
        worst = worst.max((lhs * det.sqrt() - 1.0).abs());
    }
    Ok(check(
        "(2 pi)^(-m/2) omega_0 = det(-2 pi Hess V(0))^(-1/2)",
        worst < 1e-10,
        format!("max relative error {worst:e}"),
    ))
}

fn gaussian_moments(spec: &WeightSpec<f64>) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..=8u32 {
        let exact = 2f64.powf((k as f64 - 1.0) / 2.0) * gamma((k as f64 + 1.0) / 2.0);
        worst = worst.max((spec.radial_moment(k)? / exact - 1.0).abs());
    }
    Ok(check(
        "Gaussian radial moments I_k = 2^((k-1)/2) Gamma((k+1)/2)",
        worst < 1e-8,
        format!("max relative error {worst:e}"),
    ))
}

fn periodization_decay(spec: &WeightSpec<f64>) -> Result<Check> {
    let plain = covariance_jet(spec, 1, &[0.0], 4)?;
    let hs = [1.0 / 4.0, 1.0 / 5.0, 1.0 / 6.0];
    let mut diffs = Vec::new();
    for &h in &hs {
        let j = jet_at(spec, 1, h, &[0.0], 4)?;
        let d = j
            .values()
            .iter()
            .zip(plain.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        diffs.push(d);
    }
    let scaled: Vec<f64> = diffs.iter().zip(&hs).map(|(d, h)| d / h.powi(3)).collect();
    let ok = scaled.windows(2).all(|w| w[1] < 0.5 * w[0]) && diffs[0] > 0.0;
    Ok(check(
        "|V^hbar - V| / hbar^3 decreasing",
        ok,
        format!(
            "differences {}",
            diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn envelope_properties(spec: &WeightSpec<f64>) -> Result<Check> {
    let outside = envelope_psi(spec, 1, 1.0 / 8.0, &[4.5])?;
    let inside = envelope_psi(spec, 1, 1.0 / 8.0, &[3.5])?;
    let near = envelope_psi(spec, 1, 1.0 / 16.0, &[0.5])?;
    let limit = envelope_psi(spec, 1, 0.0, &[0.5])?;
    let at0 = envelope_psi(spec, 1, 0.0, &[0.0])?;
    let ok = outside == 0.0 && inside > 0.0 && (near / limit - 1.0).abs() < 1e-10 && at0 >= limit;
    Ok(check(
        "psi^hbar vanishes outside |x| <= 1/(2 hbar) and tends to psi",
        ok,
        format!("psi(4.5) {outside:e}, psi(3.5) {inside:e}, |psi^(1/16) / psi - 1| {:e}", (near / limit - 1.0).abs()),
    ))
}

fn comparison_scaling() -> Result<Check> {
    let a = SymmetricMatrix::from_dense(&[vec![2.0, 0.3, 0.1], vec![0.3, 1.0, -0.2], vec![0.1, -0.2, 1.5]])?;
    let f = HomogeneousFn::AbsDet { m: 2 };
    let mut worst: f64 = 0.0;
    for t in [0.25f64, 2.0, 9.0] {
        let (ea, _) = gaussian_expectation(f, &a, 20_000, &mut ChaCha8Rng::seed_from_u64(5))?;
        let (et, _) = gaussian_expectation(f, &a.scaled(t), 20_000, &mut ChaCha8Rng::seed_from_u64(5))?;
        let want = t.powf(f.degree() as f64 / 2.0) * ea;
        worst = worst.max((et / want - 1.0).abs());
    }
    Ok(check(
        "E_(tA) f = t^(alpha/2) E_A f",
        worst < 1e-12,
        format!("max relative error {worst:e}"),
    ))
}

/// Runs the suite; numerical errors inside a check fail that check.
pub fn run_formula_suite() -> Vec<Check> {
    let spec = WeightSpec::gaussian();
    let fallible: Vec<(&str, Box<dyn Fn() -> Result<Check>>)> = vec![
        ("hermite orthogonality", Box::new(hermite_orthogonality)),
        ("d_alpha table", Box::new(d_table)),
        ("f_0 against E|det Hess|", Box::new({
            let s = spec.clone();
            move || f0_cross_check(&s)
        })),
        ("omega identity", Box::new({
            let s = spec.clone();
            move || omega_identity(&s)
        })),
        ("Gaussian radial moments", Box::new({
            let s = spec.clone();
            move || gaussian_moments(&s)
        })),
        ("periodization decay", Box::new({
            let s = spec.clone();
            move || periodization_decay(&s)
        })),
        ("envelope psi", Box::new({
            let s = spec.clone();
            move || envelope_properties(&s)
        })),
        ("comparison scaling", Box::new(comparison_scaling)),
    ];
    let mut out = vec![hermite_values()];
    for (name, f) in fallible {
        out.push(f().unwrap_or_else(|e| check(name, false, e.to_string())));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = run_formula_suite();
        assert_eq!(checks.len(), 9);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
