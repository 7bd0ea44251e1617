use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use critfield::critical_finder::morse_lower_bound_check;
use critfield::experiment_harness::{
    self as harness, selftest, ExperimentConfig, ExperimentReport,
};
use critfield::{Error, Result};

#[derive(Parser)]
#[command(name = "critfield", version, about = "Critical points of random periodic Gaussian fields")]
struct Cli {
    /// TOML configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting critical-point density by every available route.
    Constants,
    /// Mean counts against the Kac-Rice prediction.
    Mean,
    /// Variance per cell and its log-log slope in 1/hbar.
    Variance,
    /// Normality diagnostics of the standardized counts.
    Clt,
    /// Two-point Kac-Rice variance of the configured windows.
    KacriceVar,
    /// Wiener chaos components of the limiting variance.
    Chaos,
    /// Enumerate the critical points of one sample.
    Find {
        /// Scale; defaults to the first configured value.
        #[arg(long)]
        hbar: Option<f64>,
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
    /// Deviation of hbar_n^m Z_n from its limit along hbar_n = n^(-2/p).
    AsConvergence,
    /// Formula-level self checks.
    Selftest,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.display().to_string();
    }
    cfg.plot |= cli.plot;
    cfg.validate()?;
    Ok(cfg)
}

fn print_cells(rep: &ExperimentReport) {
    println!(
        "{:>4} {:>10} {:>6} {:>6} {:>11} {:>9} {:>11} {:>9} {:>11} {:>7} {:>7} {:>7}",
        "cell", "hbar", "r", "n", "mean", "mean_se", "pred_mean", "var", "pred_var", "skew", "exkurt", "ks"
    );
    for c in &rep.cells {
        let d = &c.digest;
        let pm = c.pred_mean.as_ref().map_or("-".into(), |p| format!("{:.4}", p.value));
        let pv = c.pred_var.as_ref().map_or("-".into(), |p| format!("{:.4}", p.value));
        println!(
            "{:>4} {:>10.6} {:>6} {:>6} {:>11.4} {:>9.4} {:>11} {:>9.4} {:>11} {:>7.3} {:>7.3} {:>7.4}",
            c.cell_id, c.hbar, c.r, d.n, d.mean, d.mean_se, pm, d.var, pv, d.skew, d.exkurt, c.ks
        );
    }
    println!(
        "topology violations {}, window mismatches {}, Bernshtein-Kouchnirenko violations {}",
        rep.topology_violations(),
        rep.window_mismatches(),
        rep.bk_violations()
    );
}

fn finish(rep: &ExperimentReport, cfg: &ExperimentConfig) -> Result<()> {
    let files = harness::emit_report(rep, Path::new(&cfg.out), cfg.plot)?;
    print_cells(rep);
    println!("settings {} wrote {} files to {}", rep.settings_hash, files.len(), cfg.out);
    rep.require_invariants()
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        let checks = selftest::run_formula_suite();
        for c in &checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        if failed > 0 {
            return Err(Error::Tolerance(format!("{failed} self checks failed")));
        }
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let out = Path::new(&cfg.out);
    match &cli.command {
        Command::Constants => {
            let rows = harness::compute_constants(&cfg)?;
            for r in &rows {
                println!("{:<12} m={} {:.6} ± {:.6}", r.route, r.m, r.value, r.se);
            }
            harness::ensure_dir(out)?;
            harness::write_text(&out.join("constants.csv"), &harness::to_csv(&rows)?)?;
        }
        Command::Mean => finish(&harness::run_mean_experiment(&cfg)?, &cfg)?,
        Command::Variance => {
            let rep = harness::run_variance_scaling(&cfg)?;
            for f in &rep.scaling {
                println!(
                    "r={} slope {:.4} ± {:.4} (bootstrap 95% [{:.4}, {:.4}]), S0 spread {:.2} SE, min S0/SE {:.1}",
                    f.r, f.slope, f.slope_se, f.bootstrap_lo, f.bootstrap_hi, f.s0_max_pairwise_z, f.s0_min_margin
                );
            }
            finish(&rep, &cfg)?;
        }
        Command::Clt => {
            let rep = harness::run_clt_experiment(&cfg)?;
            for c in &rep.cells {
                let q: Vec<String> = c.quantiles.iter().map(|(p, e, n)| format!("{p}:{e:.2}/{n:.2}")).collect();
                println!(
                    "cell {} ks {:.4} < {:.4} {} | quantiles {}",
                    c.cell_id,
                    c.ks,
                    c.normality.ks_critical,
                    if c.normality.passed() { "PASS" } else { "FAIL" },
                    q.join(" ")
                );
            }
            finish(&rep, &cfg)?;
        }
        Command::KacriceVar => {
            let rows = harness::kac_rice_variance(&cfg)?;
            for (r, _) in &rows {
                println!(
                    "hbar {} r {} window {:.3}: mean {:.4} var {:.4} ± {:.4} S0 {:.5} ± {:.5}",
                    r.hbar, r.r, r.window, r.mean, r.var, r.var_se, r.s0, r.s0_se
                );
            }
            harness::ensure_dir(out)?;
            harness::write_text(&out.join("kacrice_var.csv"), &harness::to_csv(rows.iter().map(|(r, _)| r))?)?;
            let prof: Vec<(f64, f64, &[(f64, f64, f64)])> =
                rows.iter().map(|(r, s)| (r.hbar, r.r, s.profile.as_slice())).collect();
            harness::write_text(&out.join("kacrice_profile.csv"), &harness::profile_csv(&prof)?)?;
        }
        Command::Chaos => {
            let rows = harness::chaos_decomposition(&cfg)?;
            for c in &rows {
                println!(
                    "q {} S_q {:.5} ± {:.5} partial {:.5} ± {:.5}",
                    c.q, c.s_q, c.se, c.partial, c.partial_se
                );
            }
            harness::ensure_dir(out)?;
            harness::write_text(&out.join("chaos.csv"), &harness::chaos_csv(&rows)?)?;
        }
        Command::Find { hbar, sample } => {
            let h = hbar.unwrap_or(cfg.hbar[0]);
            if !(h > 0.0 && h <= 0.25) {
                return Err(Error::Config(format!("hbar must lie in (0, 1/4], got {h}")));
            }
            let found = harness::find_one(&cfg, h, *sample)?;
            let check = morse_lower_bound_check(&found.records, cfg.m);
            println!(
                "{} critical points, per index {:?}, alternating sum {}, {} seeds, {} retries",
                check.total, check.per_index, check.euler, found.diagnostics.seeds, found.diagnostics.retries
            );
            harness::ensure_dir(out)?;
            harness::write_text(&out.join("critical_points.csv"), &harness::critical_points_csv(&found.records)?)?;
        }
        Command::AsConvergence => {
            let rep = harness::run_as_convergence(&cfg)?;
            let a = rep.as_convergence.as_ref().expect("as-convergence section");
            println!("p {} target {:.5}", a.p, a.target);
            for s in &a.steps {
                println!(
                    "n {:>3} hbar {:.6}: hbar^m Z {:.5} ± {:.5}, mean |dev| {:.5}, mean tail sup {:.5}",
                    s.n, s.hbar, s.scaled_mean, s.scaled_se, s.mean_deviation, s.mean_tail_sup
                );
            }
            println!("deviation shrank in {:.0}% of replicates", 100.0 * a.improved_fraction);
            harness::emit_report(&rep, out, cfg.plot)?;
        }
        Command::Selftest => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
