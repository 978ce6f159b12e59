//! Seeded ensembles, the experiment pipelines and their run records.

pub mod acceptance;
pub mod config;
pub mod manifest;
pub mod pipelines;
pub mod sampling;

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use config::{ConfigError, ExperimentConfig, FluxChoice, LowerConfig};
pub use manifest::{ManifestError, RunManifest};
pub use pipelines::LabError;
pub use sampling::{sample_data_class, sample_monotone_class};

use crate::bounds::{bounds_report, BoundsInputs};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
    m: &mut RunManifest,
) -> Result<(), RunError> {
    serde_json::to_writer_pretty(fs::File::create(dir.join(name))?, value)?;
    m.add_artifact(dir, name)?;
    Ok(())
}

fn stage<T>(
    m: &mut RunManifest,
    name: &str,
    f: impl FnOnce() -> Result<T, LabError>,
    ok: impl Fn(&T) -> bool,
) -> Option<T> {
    let clock = Instant::now();
    let r = f();
    let secs = clock.elapsed().as_secs_f64();
    match r {
        Ok(v) => {
            m.stage(name, secs, ok(&v), None);
            Some(v)
        }
        Err(e) => {
            m.stage(name, secs, false, Some(e.to_string()));
            None
        }
    }
}

/// Runs the upper, lower, covering-transfer, rate and resolution pipelines,
/// writing reports, CSV tables and the manifest into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let mut m = RunManifest::new(cfg.clone());
    write_json(dir, "config.json", cfg, &mut m)?;
    let nf = cfg.numerical_flux();

    let run = stage(
        &mut m,
        "ensemble",
        || pipelines::default_ensemble(cfg),
        |_| true,
    );
    if let Some(run) = &run {
        let mut w = csv::Writer::from_path(dir.join("ensemble.csv"))?;
        w.write_record([
            "index",
            "delta",
            "beta_hat",
            "linf_final",
            "mass_drift",
            "cfl",
        ])?;
        for (i, p) in run.pairs.iter().enumerate() {
            w.write_record([
                i.to_string(),
                format!("{:.16e}", p.error),
                p.beta_hat.map_or(String::new(), |b| format!("{b:.16e}")),
                format!("{:.16e}", p.linf_final),
                format!("{:.16e}", p.mass_drift),
                format!("{:.16e}", p.cfl_number),
            ])?;
        }
        w.flush()?;
        m.add_artifact(dir, "ensemble.csv")?;

        let upper = stage(
            &mut m,
            "upper",
            || {
                let ladder = (!cfg.eps_ladder.is_empty()).then_some(cfg.eps_ladder.as_slice());
                pipelines::run_upper(cfg, run, ladder)
            },
            |r| r.within_bound && r.linf.passed(),
        );
        if let Some(up) = upper {
            write_json(dir, "upper.json", &up, &mut m)?;
            m.measure("delta_hat", run.delta());
            if let (Some(beta), Some(b)) = (up.beta_hat, up.bound) {
                m.measure("beta_hat", beta);
                m.measure("gamma_plus", b.gamma_plus);
                m.measure("eps_max_upper", b.eps_max_upper);
            }
            let mut w = csv::Writer::from_path(dir.join("estimates.csv"))?;
            w.write_record([
                "eps",
                "packing",
                "covering",
                "h_lower_bits",
                "h_upper_bits",
                "bound_bits",
            ])?;
            for (e, b) in up.estimates.iter().zip(&up.bound_bits) {
                w.write_record([
                    format!("{:.16e}", e.eps),
                    e.packing_count.to_string(),
                    e.covering_count.to_string(),
                    format!("{:.16e}", e.h_lower_bits),
                    format!("{:.16e}", e.h_upper_bits),
                    format!("{b:.16e}"),
                ])?;
            }
            w.flush()?;
            m.add_artifact(dir, "estimates.csv")?;
            let f2 = cfg.flux.model().second_deriv_at_zero();
            if let Some(Ok(b)) = up.beta_hat.map(|beta| {
                bounds_report(BoundsInputs {
                    l: cfg.l,
                    m: cfg.m,
                    big_m: cfg.big_m,
                    n_steps: up.n_steps,
                    dx: up.dx,
                    dt: up.dt,
                    beta,
                    f2_at_zero: f2,
                    delta: run.delta(),
                    alpha: cfg.alpha,
                })
            }) {
                write_json(dir, "bounds.json", &b, &mut m)?;
                m.measure("gamma_minus", b.gamma_minus);
                m.measure("eps_min_lower", b.eps_min_lower);
                m.measure("eps_max_lower", b.eps_max_lower);
            }
        }
        if let Some(lax) = stage(
            &mut m,
            "lax-check",
            || pipelines::run_lax_check(run),
            |r| r.passed,
        ) {
            write_json(dir, "lax.json", &lax, &mut m)?;
        }
        if let Some(res) = stage(
            &mut m,
            "resolution",
            || pipelines::run_resolution(run, None, cfg.resolution_tol),
            |r| r.resolution == crate::bounds::Resolution::High,
        ) {
            write_json(dir, "resolution.json", &res, &mut m)?;
        }
    }
    if let Some(low) = stage(
        &mut m,
        "lower",
        || pipelines::run_lower(cfg, &nf),
        |r| r.passed,
    ) {
        write_json(dir, "lower.json", &low, &mut m)?;
        m.measure("lower_eps", low.eps);
        m.measure("lower_delta_hat", low.delta);
        m.measure(
            "lower_dx",
            low.refinements.last().map_or(f64::NAN, |r| r.dx),
        );
        m.measure("lower_gamma_minus", low.bound.gamma_minus);
        m.measure("lower_family_log2", low.family_log2);
    }
    let rate = stage(
        &mut m,
        "rate",
        || {
            let data = sample_data_class(
                cfg.l,
                cfg.m,
                cfg.big_m,
                cfg.rate_sample_count,
                cfg.seed.wrapping_add(1),
            );
            pipelines::run_rate(cfg, &nf, &data, &cfg.dx_ladder)
        },
        |r| r.slope >= 0.4,
    );
    if let Some(rate) = rate {
        write_json(dir, "rate.json", &rate, &mut m)?;
        m.measure("rate_slope", rate.slope);
    }
    m.write(dir)?;
    Ok(m)
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.ok)
    }
}
