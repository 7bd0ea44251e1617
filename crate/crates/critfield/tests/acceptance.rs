//! End-to-end acceptance suite; prints one PASS/FAIL line per criterion and fails if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use critfield::experiment_harness::{
    chaos_decomposition, counts_csv, emit_report, run_clt_experiment, run_mean_experiment, run_variance_scaling,
    selftest, stats::joint_z, ChaosConfig, ExperimentConfig, ExperimentReport, WeightConfig,
};

const SIGMA: f64 = 3.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn line(idx: usize, name: &str, o: &Outcome, secs: f64) {
    println!(
        "[{idx}] {} {name}: {} ({secs:.1}s)",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn base(m: usize, hbar: Vec<f64>, r: Vec<f64>, samples: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        m,
        hbar,
        r,
        samples,
        seed,
        threads: threads(),
        ..ExperimentConfig::default()
    }
}

/// Distinct enumerations and topological violations behind a report.
fn enumerations(rep: &ExperimentReport) -> (usize, usize) {
    let per_scale = rep.config.r.len();
    rep.cells
        .iter()
        .filter(|c| c.cell_id % per_scale == 0)
        .fold((0, 0), |(e, v), c| {
            (e + c.finder.enumerations + c.topology_violations.len(), v + c.topology_violations.len())
        })
}

fn mean_law(m1: &ExperimentReport, m2: &ExperimentReport) -> Outcome {
    let c1 = &m1.cells[0];
    let h1 = c1.hbar;
    let oracle1 = 3f64.sqrt() / PI;
    let z1 = joint_z(c1.digest.mean * h1, c1.digest.mean_se * h1, oracle1, 0.0);
    let c2 = &m2.cells[0];
    let h2 = c2.hbar * c2.hbar;
    let oracle2 = 2.0 / (3f64.sqrt() * PI);
    let main1 = c2.pred_mean.as_ref().expect("m = 2 mean prediction");
    let vol = c2.window * c2.window;
    let z2 = joint_z(c2.digest.mean * h2, c2.digest.mean_se * h2, oracle2, 0.0);
    let z2_mc = joint_z(c2.digest.mean, c2.digest.mean_se, main1.value, main1.se);
    Outcome {
        passed: z1 < SIGMA && z2 < SIGMA && z2_mc < SIGMA,
        detail: format!(
            "m=1 mean*hbar {:.5} vs sqrt(3)/pi {oracle1:.5} ({z1:.2} SE); m=2 mean*hbar^2 {:.5} vs 2/(sqrt(3) pi) {oracle2:.5} ({z2:.2} SE), quadrature+GOE route {:.5} ({z2_mc:.2} SE)",
            c1.digest.mean * h1,
            c2.digest.mean * h2,
            main1.value / vol,
        ),
    }
}

fn variance_scaling(rep: &ExperimentReport) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for f in &rep.scaling {
        let ok = (0.9..=1.1).contains(&f.slope) && f.s0_max_pairwise_z < SIGMA && f.s0_min_margin > SIGMA;
        if f.r == 0.5 {
            passed &= ok;
        }
        parts.push(format!(
            "r={}: slope {:.4} (bootstrap 95% [{:.3}, {:.3}]), S0 pairwise max {:.2} SE, min S0/SE {:.1}{}",
            f.r,
            f.slope,
            f.bootstrap_lo,
            f.bootstrap_hi,
            f.s0_max_pairwise_z,
            f.s0_min_margin,
            if f.r == 0.5 { "" } else { " (reported)" }
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn clt(rep: &ExperimentReport) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for c in &rep.cells {
        passed &= c.normality.passed();
        parts.push(format!(
            "r={}: ks {:.4} < {:.4}, skew {:.3}, exkurt {:.3}",
            c.r, c.ks, c.normality.ks_critical, c.digest.skew, c.digest.exkurt
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn two_point(rep: &ExperimentReport) -> Outcome {
    let c = rep
        .cells
        .iter()
        .find(|c| c.hbar == 1.0 / 64.0 && c.r == 0.5)
        .expect("hbar = 1/64, r = 1/2 cell");
    match (&c.pred_var, c.var_z) {
        (Some(p), Some(z)) => Outcome {
            passed: z < SIGMA,
            detail: format!(
                "window {}: two-point variance {:.4} ± {:.4} vs empirical {:.4} ± {:.4} ({z:.2} SE)",
                c.window, p.value, p.se, c.digest.var, c.digest.var_se
            ),
        },
        _ => Outcome {
            passed: false,
            detail: "no two-point prediction".into(),
        },
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |idx: usize, name: &str, o: Outcome, t: Instant| {
        line(idx, name, &o, t.elapsed().as_secs_f64());
        all &= o.passed;
    };

    let t = Instant::now();
    let cfg1 = base(1, vec![1.0 / 64.0], vec![1.0], 2000, 101);
    let mean1 = run_mean_experiment(&cfg1).expect("m = 1 mean run");
    let mean2 = run_mean_experiment(&base(2, vec![1.0 / 24.0], vec![1.0], 500, 102)).expect("m = 2 mean run");
    report(1, "mean law", mean_law(&mean1, &mean2), t);

    let t = Instant::now();
    let var = run_variance_scaling(&base(1, vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0], vec![0.5, 1.0], 2000, 103))
        .expect("variance run");
    report(2, "variance scaling", variance_scaling(&var), t);

    let t = Instant::now();
    let clt_rep = run_clt_experiment(&base(1, vec![1.0 / 128.0], vec![0.5, 1.0], 4000, 104)).expect("clt run");
    report(3, "central limit", clt(&clt_rep), t);

    let t = Instant::now();
    report(4, "two-point Kac-Rice variance", two_point(&var), t);

    let t = Instant::now();
    let (mut total, mut bad) = (0, 0);
    for rep in [&mean1, &mean2, &var, &clt_rep] {
        let (e, v) = enumerations(rep);
        total += e;
        bad += v;
    }
    report(
        5,
        "topological invariants",
        Outcome {
            passed: total >= 8000 && bad == 0,
            detail: format!("{bad} violations over {total} full-torus enumerations"),
        },
        t,
    );

    let t = Instant::now();
    let bump_cfg = ExperimentConfig {
        weight: WeightConfig::Bump {
            radius: 1.0,
            amplitude: 1.0,
            eps_cut: 1e-12,
        },
        ..base(2, vec![1.0 / 20.0], vec![1.0], 200, 106)
    };
    let bump = run_mean_experiment(&bump_cfg).expect("bump run");
    let c = &bump.cells[0];
    report(
        6,
        "Bernshtein-Kouchnirenko bound",
        Outcome {
            passed: c.bk_violations.is_empty() && c.max_total as u64 <= c.bk_bound_min && c.topology_violations.is_empty(),
            detail: format!(
                "largest count {} of bound {}, {} violations over {} samples",
                c.max_total,
                c.bk_bound_min,
                c.bk_violations.len(),
                c.digest.n
            ),
        },
        t,
    );

    let t = Instant::now();
    let checks = selftest::run_formula_suite();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    report(
        7,
        "formula suite",
        Outcome {
            passed: failed.is_empty(),
            detail: format!("{} of {} checks pass {failed:?}", checks.len() - failed.len(), checks.len()),
        },
        t,
    );

    let t = Instant::now();
    let chaos_cfg = ExperimentConfig {
        chaos: ChaosConfig {
            q_max: Some(6),
            coefficient_samples: 4_000_000,
            mc_per_node: 200_000,
        },
        ..base(1, vec![1.0 / 64.0], vec![1.0], 100, 108)
    };
    let chaos = chaos_decomposition(&chaos_cfg).expect("chaos run");
    let emp = var
        .cells
        .iter()
        .find(|c| c.hbar == 1.0 / 128.0 && c.r == 0.5)
        .expect("hbar = 1/128, r = 1/2 cell");
    let nonneg = chaos.iter().all(|c| c.s_q >= -SIGMA * c.se);
    let monotone = chaos.windows(2).all(|w| w[1].partial >= w[0].partial);
    let last = chaos.last().expect("components");
    let bounded = last.partial <= emp.s0 + SIGMA * (emp.s0_se.powi(2) + last.partial_se.powi(2)).sqrt();
    let comps: Vec<String> = chaos.iter().filter(|c| c.q % 2 == 0).map(|c| format!("S_{} {:.4} ± {:.4}", c.q, c.s_q, c.se)).collect();
    report(
        8,
        "chaos partial sums",
        Outcome {
            passed: nonneg && monotone && bounded,
            detail: format!(
                "{}; partial {:.4} ± {:.4} vs empirical S0 {:.4} ± {:.4}",
                comps.join(", "),
                last.partial,
                last.partial_se,
                emp.s0,
                emp.s0_se
            ),
        },
        t,
    );

    let t = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let mut files = Vec::new();
    for th in [1usize, 3] {
        let rep = run_mean_experiment(&ExperimentConfig { threads: th, ..cfg1.clone() }).expect("rerun");
        let out = dir.path().join(format!("t{th}"));
        emit_report(&rep, &out, false).expect("emit");
        let read = |f: &str| std::fs::read(out.join(f)).expect("read back");
        files.push((read("counts.csv"), read("summary.csv"), counts_csv(&rep).expect("csv")));
    }
    let same = files[0] == files[1] && files[0].0 == files[0].2.as_bytes();
    let first = run_mean_experiment(&cfg1).expect("rerun");
    report(
        9,
        "determinism across thread counts",
        Outcome {
            passed: same && counts_csv(&first).unwrap() == counts_csv(&mean1).unwrap(),
            detail: format!(
                "counts.csv and summary.csv byte-identical for 1 and 3 threads ({} bytes)",
                files[0].0.len()
            ),
        },
        t,
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
