use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use conslaw_entropy::bounds::{bounds_report, BoundsInputs};
use conslaw_entropy::entropy::{estimate, DistanceMatrix};
use conslaw_entropy::exact::{build_precursor, sample_exact, ExactSolution};
use conslaw_entropy::lab::acceptance::{self, CHECKS};
use conslaw_entropy::lab::pipelines::{class_grid, sample_ladder};
use conslaw_entropy::lab::{
    run_experiment, sample_data_class, ExperimentConfig, FluxChoice, RunManifest,
};
use conslaw_entropy::profiles::io::{load_pwl_csv, save_pwl_csv};
use conslaw_entropy::profiles::{
    cell_average, interpolate, ContinuousDatum, DataClass, PiecewiseAffine, PiecewiseLinearFn,
};
use conslaw_entropy::schemes::{evolve, FluxScheme, Retain};
use conslaw_entropy::targets::{make_separated_targets, FamilyOptions, NRule, TargetClassSpec};

#[derive(Parser)]
#[command(
    version,
    about = "Scalar conservation law solvers and metric entropy experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    flux: Option<FluxChoice>,
    #[arg(long, global = true)]
    scheme: Option<FluxScheme>,
    #[arg(long, global = true)]
    l: Option<f64>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    big_m: Option<f64>,
    #[arg(long, global = true)]
    t_final: Option<f64>,
    #[arg(long, global = true)]
    cfl: Option<f64>,
    #[arg(long, global = true)]
    dx: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    dx_ladder: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    lower_eps: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $t:ident),*) => {$(if let Some(v) = self.$f.clone() { c.$t = v; })*};
        }
        set!(output_dir => output_dir, flux => flux, scheme => scheme, l => l, m => m, big_m => big_m,
             t_final => t_final, cfl => cfl, dx => dx, dx_ladder => dx_ladder, eps_ladder => eps_ladder,
             alpha => alpha, samples => sample_count, seed => seed);
        if let Some(e) = self.lower_eps {
            c.lower.eps = e;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve one datum and write the numerical (and exact) profile at T.
    Solve {
        /// Piecewise-linear datum as x,y CSV; defaults to sample 0 of the class.
        #[arg(long)]
        datum: Option<PathBuf>,
        /// Also write the exact profile and report the L1 error.
        #[arg(long)]
        exact: bool,
        /// Write every step into trajectory.csv.
        #[arg(long)]
        trajectory: bool,
    },
    /// Sample the data class and write each datum as CSV.
    Ensemble,
    /// Build a separated target family at scale eps.
    Targets {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        max_slope: bool,
    },
    /// Build precursors of the family at scale (1+2 alpha) eps.
    Precursors {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        fine_dx: f64,
    },
    /// Packing and covering estimates of a directory of x,y CSV profiles.
    Entropy {
        #[arg(long)]
        input: PathBuf,
    },
    /// Bound constants for given grid and measured quantities.
    Bounds {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Run the acceptance suite, or re-check the digests of a run directory.
    Verify {
        /// Criterion numbers to run; all when empty.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Full pipeline with manifest.
    Run,
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(
        fs::File::create(path).with_context(|| path.display().to_string())?,
        v,
    )?;
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let cfg = cli.common.config()?;
    let out = &cfg.output_dir;
    let flux = cfg.flux.model();
    match cli.cmd {
        Cmd::Solve {
            datum,
            exact,
            trajectory,
        } => {
            fs::create_dir_all(out)?;
            let class = DataClass::new(cfg.l, cfg.m, cfg.big_m);
            let d = match datum {
                Some(p) => {
                    ContinuousDatum::new(PiecewiseAffine::from_pwl(&load_pwl_csv(&p)?), class)
                }
                None => sample_data_class(cfg.l, cfg.m, cfg.big_m, 1, cfg.seed).remove(0),
            };
            d.check_class()
                .context("datum outside the configured class")?;
            let grid = class_grid(&cfg, cfg.dx)?;
            let u0 = cell_average(&d, grid)?;
            let retain = if trajectory {
                Retain::All
            } else {
                Retain::Final
            };
            let tr = evolve(&u0, &cfg.numerical_flux(), retain)?;
            let numerical = interpolate(tr.final_state());
            save_pwl_csv(&numerical, &out.join("numerical.csv"))?;
            if trajectory {
                let mut w = csv::Writer::from_path(out.join("trajectory.csv"))?;
                w.write_record(["step", "t", "x", "u"])?;
                for (n, s) in tr.steps.iter().zip(&tr.states) {
                    for (x, u) in grid.xs().iter().zip(&s.values) {
                        w.write_record([
                            n.to_string(),
                            format!("{:.16e}", tr.time(*n)),
                            format!("{x:.16e}"),
                            format!("{u:.16e}"),
                        ])?;
                    }
                }
                w.flush()?;
            }
            write_json(&out.join("diagnostics.json"), &tr.diagnostics)?;
            println!(
                "steps {} dt {:.6e} beta_hat {:?}",
                grid.n_steps, grid.dt, tr.diagnostics.beta_hat
            );
            if exact {
                let sol = ExactSolution::new(&d.profile, grid.final_time(), &flux)?;
                let e = sample_exact(&sol, grid.dx / conslaw_entropy::exact::REFERENCE_REFINEMENT);
                save_pwl_csv(&e, &out.join("exact.csv"))?;
                println!(
                    "l1 error {:.6e}",
                    conslaw_entropy::profiles::l1_distance(&numerical, &e)
                );
            }
        }
        Cmd::Ensemble => {
            let dir = out.join("data");
            fs::create_dir_all(&dir)?;
            let data = sample_data_class(cfg.l, cfg.m, cfg.big_m, cfg.sample_count, cfg.seed);
            write_json(&out.join("ensemble.json"), &data)?;
            for (i, d) in data.iter().enumerate() {
                let mut w = csv::Writer::from_path(dir.join(format!("datum_{i:04}.csv")))?;
                w.write_record(["x0", "x1", "y0", "y1"])?;
                for p in d.profile.pieces() {
                    w.serialize((p.x0, p.x1, p.y0, p.y1))?;
                }
                w.flush()?;
            }
            println!("wrote {} data to {}", data.len(), dir.display());
        }
        Cmd::Targets { eps, max_slope } => {
            fs::create_dir_all(out)?;
            let spec = TargetClassSpec::at_h_max(
                cfg.l,
                cfg.m,
                cfg.big_m,
                cfg.t_final,
                flux.second_deriv_at_zero(),
            )?;
            let opts = FamilyOptions {
                rule: if max_slope {
                    NRule::MaxSlope
                } else {
                    cfg.target_rule
                },
                sample_cap: cfg.target_sample_cap,
                seed: cfg.seed,
            };
            let fam = make_separated_targets(&spec, eps, &opts)?;
            write_json(&out.join("family.json"), &fam)?;
            println!(
                "n {} members {} log2 {:.3} min distance {:.6} certified {}",
                fam.layout.n,
                fam.len(),
                fam.log2_cardinality(),
                fam.min_pairwise_distance,
                fam.certificate.passed
            );
        }
        Cmd::Precursors { eps, fine_dx } => {
            let dir = out.join("precursors");
            fs::create_dir_all(&dir)?;
            let spec = TargetClassSpec::at_h_max(
                cfg.l,
                cfg.m,
                cfg.big_m,
                cfg.t_final,
                flux.second_deriv_at_zero(),
            )?;
            let opts = FamilyOptions {
                rule: cfg.lower.rule,
                sample_cap: cfg.target_sample_cap,
                seed: cfg.seed,
            };
            let fam = make_separated_targets(&spec, (1.0 + 2.0 * cfg.alpha) * eps, &opts)?;
            let class = DataClass::new(cfg.l, cfg.m, cfg.big_m);
            let mut worst: f64 = 0.0;
            for (i, mb) in fam.members.iter().enumerate() {
                let r = build_precursor(
                    &mb.profile,
                    cfg.t_final,
                    &flux,
                    fine_dx,
                    &spec.admissible_class(),
                    class,
                )?;
                worst = worst.max(r.verification_error);
                save_pwl_csv(&mb.profile, &dir.join(format!("target_{i:03}.csv")))?;
                let mut nodes: Vec<(f64, f64)> = r
                    .precursor
                    .profile
                    .pieces()
                    .iter()
                    .flat_map(|p| [(p.x0, p.y0), (p.x1, p.y1)])
                    .collect();
                nodes.dedup_by(|a, b| a.0 == b.0);
                save_pwl_csv(
                    &PiecewiseLinearFn::from_nodes(&nodes)?,
                    &dir.join(format!("precursor_{i:03}.csv")),
                )?;
            }
            println!("{} precursors, worst forward check {worst:.3e}", fam.len());
        }
        Cmd::Entropy { input } => {
            let mut paths: Vec<PathBuf> = fs::read_dir(&input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
            paths.sort();
            if paths.is_empty() {
                bail!("no CSV profiles in {}", input.display());
            }
            let profiles = paths
                .iter()
                .map(|p| load_pwl_csv(p))
                .collect::<Result<Vec<_>, _>>()?;
            let dm = DistanceMatrix::l1(&profiles);
            let ladder = if cfg.eps_ladder.is_empty() {
                sample_ladder(&dm, 8)
            } else {
                cfg.eps_ladder.clone()
            };
            fs::create_dir_all(out)?;
            let mut w = csv::Writer::from_path(out.join("estimates.csv"))?;
            for e in ladder {
                let est = estimate(&dm, e);
                println!(
                    "eps {:.6} packing {} covering {}",
                    est.eps, est.packing_count, est.covering_count
                );
                w.serialize(est)?;
            }
            w.flush()?;
        }
        Cmd::Bounds { beta, delta } => {
            let grid = class_grid(&cfg, cfg.dx)?;
            let r = bounds_report(BoundsInputs {
                l: cfg.l,
                m: cfg.m,
                big_m: cfg.big_m,
                n_steps: grid.n_steps,
                dx: grid.dx,
                dt: grid.dt,
                beta,
                f2_at_zero: flux.second_deriv_at_zero(),
                delta,
                alpha: cfg.alpha,
            })?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Cmd::Verify { only, manifest } => {
            if let Some(dir) = manifest {
                RunManifest::load(&dir)?.verify(&dir)?;
                println!("digests verified in {}", dir.display());
                return Ok(ExitCode::SUCCESS);
            }
            let mut ok = true;
            for (i, check) in CHECKS.iter().enumerate() {
                if !only.is_empty() && !only.contains(&(i as u8 + 1)) {
                    continue;
                }
                let o: acceptance::Outcome = check(&cfg);
                println!("{o}");
                ok &= o.passed;
            }
            return Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
        Cmd::Run => {
            let m = run_experiment(&cfg)?;
            for s in &m.stages {
                println!(
                    "{:<12} {:>8.2}s {}",
                    s.name,
                    s.seconds,
                    if s.ok { "ok" } else { "FAILED" }
                );
            }
            println!("manifest: {}", out.join("manifest.json").display());
            return Ok(if m.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}
