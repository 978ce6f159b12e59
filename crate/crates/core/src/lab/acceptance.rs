//! Desk-scale checks of the solver, the bounds and the entropy estimators.
//! Each check returns an [`Outcome`] rather than panicking so the whole suite
//! can be reported at once.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipelines::*;
use super::sampling::{sample_data_class, sample_monotone_class};
use crate::bounds::{error_lower_bound, gamma_plus_formula, gamma_tilde_minus, Resolution};
use crate::entropy::{covering_count, CoverTransferError, DistanceMatrix};
use crate::profiles::{cell_average, l1_distance_pieces, DiscreteProfile, GridSpec};
use crate::schemes::{
    check_monotone, consistency_error, evolve, godunov, lax_friedrichs, NumericalFlux, Retain,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.1}s / {:.0}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

fn timed(
    id: u8,
    title: &str,
    budget_seconds: f64,
    body: impl FnOnce() -> Result<(bool, String), LabError>,
) -> Outcome {
    let clock = Instant::now();
    let (passed, detail) = match body() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = clock.elapsed().as_secs_f64();
    Outcome {
        id,
        title: title.to_string(),
        passed: passed && seconds <= budget_seconds,
        seconds,
        budget_seconds,
        detail,
    }
}

pub const ORDER_PAIRS: usize = 100;
pub const STRUCTURE_STEPS: usize = 200;

pub fn scheme_structure(cfg: &ExperimentConfig) -> Outcome {
    timed(1, "scheme structure", 10.0, || {
        let flux = cfg.flux.model();
        let bound = cfg.big_m;
        let lambda = cfg.cfl / flux.max_speed(bound);
        let dx = cfg.dx;
        let grid = GridSpec::covering(dx, lambda * dx, cfg.l, STRUCTURE_STEPS)?;
        let data = sample_data_class(cfg.l, cfg.m, bound, ORDER_PAIRS, cfg.seed);
        let mut notes = Vec::new();
        let mut ok = true;
        for nf in [lax_friedrichs(flux.clone()), godunov(flux.clone())] {
            let cons = consistency_error(&nf, bound, lambda, 101);
            let mono = check_monotone(&nf, bound, lambda, 41);
            let (drift, order_gap) = conservation_and_order(&nf, &data, grid, cfg.seed)?;
            let this = cons <= 1e-12 && mono.passed && drift <= 1e-12 && order_gap <= 0.0;
            ok &= this;
            notes.push(format!(
                "{}: |g(u,u)-f(u)| {:.1e}, monotone {}, drift {:.1e}, order gap {:.1e}",
                nf.name(),
                cons,
                mono.passed,
                drift,
                order_gap
            ));
        }
        Ok((ok, notes.join("; ")))
    })
}

/// Largest relative mass drift over the batch, and the largest `u - v` over
/// all steps for pairs with `u ≤ v` initially.
fn conservation_and_order(
    nf: &NumericalFlux,
    data: &[crate::profiles::ContinuousDatum],
    grid: GridSpec,
    seed: u64,
) -> Result<(f64, f64), LabError> {
    let bound = data.first().map_or(1.0, |d| d.class.linf_budget);
    let out = data
        .par_iter()
        .enumerate()
        .map(|(i, d)| -> Result<(f64, f64), LabError> {
            let u0 = cell_average(d, grid)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            rng.set_stream(i as u64);
            let lifted: Vec<f64> = u0
                .values
                .iter()
                .enumerate()
                .map(|(j, &u)| {
                    let x = grid.x(grid.j_min + j as i64);
                    if x.abs() <= d.class.support_radius {
                        (u + rng.gen_range(0.0..0.5)).min(bound).max(u)
                    } else {
                        u
                    }
                })
                .collect();
            let v0 = DiscreteProfile::from_values(grid, lifted)?;
            let tu = evolve(&u0, nf, Retain::All)?;
            let tv = evolve(&v0, nf, Retain::All)?;
            let drift = tu
                .diagnostics
                .mass_drift(u0.l1())
                .max(tv.diagnostics.mass_drift(v0.l1()));
            let gap = tu
                .states
                .iter()
                .zip(&tv.states)
                .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| x - y))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((drift, gap))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(out.iter().fold((0.0, f64::NEG_INFINITY), |acc, &(d, g)| {
        (acc.0.max(d), acc.1.max(g))
    }))
}

pub const OSLC_DATA: usize = 50;
pub const OSLC_DXS: [f64; 3] = [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0];

pub fn oslc_study(cfg: &ExperimentConfig) -> Result<OslcStudy, LabError> {
    let data = sample_data_class(1.0, 1.0, 1.0, OSLC_DATA, cfg.seed);
    run_oslc_study(cfg, &godunov(cfg.flux.model()), &data, &OSLC_DXS)
}

pub fn discrete_oslc(cfg: &ExperimentConfig) -> Outcome {
    timed(2, "discrete one-sided Lipschitz bound", 60.0, || {
        let s = oslc_study(cfg)?;
        let first = s.levels[0].beta_hat;
        let spread = s.spread;
        let ok = first.is_some_and(|b| b > 0.5) && spread.is_some_and(|v| v < 0.2);
        let betas: Vec<String> = s
            .levels
            .iter()
            .map(|l| format!("dx=1/{:.0}: {}", 1.0 / l.dx, fmt_opt(l.beta_hat)))
            .collect();
        Ok((
            ok,
            format!(
                "beta_hat {} (need > 0.5 at the first), spread {} (need < 0.2)",
                betas.join(", "),
                fmt_opt(spread)
            ),
        ))
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |v| format!("{v:.4}"))
}

pub fn linf_chain(cfg: &ExperimentConfig) -> Outcome {
    timed(3, "sup-norm from one-sided slope", 120.0, || {
        let mut checks = Vec::new();
        for l in oslc_study(cfg)?.levels {
            checks.push((format!("oslc dx=1/{:.0}", 1.0 / l.dx), l.linf));
        }
        let run = default_ensemble(cfg)?;
        checks.push(("ensemble".into(), run.linf_check()));
        let rate = rate_batch(cfg);
        for &dx in &cfg.dx_ladder {
            let r = run_ensemble(cfg, &cfg.numerical_flux(), rate.clone(), dx)?;
            checks.push((format!("rate dx=1/{:.0}", 1.0 / dx), r.linf_check()));
        }
        let ok = checks.iter().all(|(_, c)| c.passed());
        let runs: usize = checks.iter().map(|(_, c)| c.checked).sum();
        let worst = checks
            .iter()
            .map(|(_, c)| c.worst_ratio)
            .fold(0.0, f64::max);
        let bad: Vec<String> = checks
            .iter()
            .filter(|(_, c)| !c.passed())
            .map(|(n, c)| format!("{n}: runs {:?}", c.violations))
            .collect();
        Ok((
            ok,
            format!(
                "{runs} runs, worst ratio {worst:.3}{}",
                if bad.is_empty() {
                    String::new()
                } else {
                    format!(", violations {}", bad.join("; "))
                }
            ),
        ))
    })
}

fn rate_batch(cfg: &ExperimentConfig) -> Vec<crate::profiles::ContinuousDatum> {
    sample_data_class(
        cfg.l,
        cfg.m,
        cfg.big_m,
        cfg.rate_sample_count,
        cfg.seed.wrapping_add(1),
    )
}

pub fn convergence_rate(cfg: &ExperimentConfig) -> Outcome {
    timed(4, "L1 convergence rate", 180.0, || {
        let r = run_rate(cfg, &cfg.numerical_flux(), &rate_batch(cfg), &cfg.dx_ladder)?;
        let pts: Vec<String> = r
            .points
            .iter()
            .map(|(dx, d)| format!("1/{:.0}:{d:.4}", 1.0 / dx))
            .collect();
        Ok((
            r.slope >= 0.4,
            format!(
                "slope {:.3} (need >= 0.4), delta {}",
                r.slope,
                pts.join(" ")
            ),
        ))
    })
}

pub fn upper_bound(cfg: &ExperimentConfig) -> Outcome {
    timed(5, "upper entropy bound", 180.0, || {
        let run = default_ensemble(cfg)?;
        let ladder = (!cfg.eps_ladder.is_empty()).then_some(cfg.eps_ladder.as_slice());
        let r = run_upper(cfg, &run, ladder)?;
        let worst = r
            .estimates
            .iter()
            .zip(&r.bound_bits)
            .map(|(e, b)| e.h_upper_bits / b)
            .fold(0.0, f64::max);
        Ok((
            r.within_bound && r.estimates.len() == 6,
            format!(
                "beta_hat {}, Gamma+ {}, window (0, {}], {} scales, worst bits/bound {:.4}",
                fmt_opt(r.beta_hat),
                fmt_opt(r.bound.map(|b| b.gamma_plus)),
                fmt_opt(r.bound.map(|b| b.eps_max_upper)),
                r.estimates.len(),
                worst
            ),
        ))
    })
}

pub fn separated_targets(cfg: &ExperimentConfig) -> Outcome {
    timed(6, "separated target families", 120.0, || {
        let s = run_targets_study(cfg, 6)?;
        let certified = s
            .families
            .iter()
            .all(|f| f.certified && f.min_distance > 2.0 * f.eps);
        let ratios: Vec<String> = s
            .families
            .iter()
            .map(|f| format!("{:.3}", f.benchmark_ratio))
            .collect();
        let sizes: Vec<String> = s
            .families
            .iter()
            .map(|f| format!("{:.2}", f.log2_size))
            .collect();
        let e = s.fit.exponent;
        Ok((
            certified && (0.8..=1.2).contains(&e),
            format!(
                "certified {certified}, exponent {e:.3} (need [0.8, 1.2]), log2|F| {}, ratio {}",
                sizes.join(" "),
                ratios.join(" ")
            ),
        ))
    })
}

pub fn lower_bound(cfg: &ExperimentConfig) -> Outcome {
    timed(7, "lower bound inheritance", 300.0, || {
        let r = run_lower(cfg, &cfg.numerical_flux())?;
        Ok((
            r.passed && r.family_size <= 64 && r.packing_bits >= r.family_log2,
            format!(
                "|F| {} at eps~ {:.4}, dx 1/{:.0}, delta {:.2e} (<= {:.2e}), min image distance {:.4} (> {:.4}, pair {:?}), packing bits {:.2} vs Gamma-/eps {:.2}, transfer window {}",
                r.family_size,
                r.eps_tilde,
                1.0 / r.refinements.last().map_or(f64::NAN, |x| x.dx),
                r.delta,
                r.alpha * r.eps,
                r.min_image_distance,
                2.0 * r.eps,
                r.closest_pair,
                r.packing_bits,
                r.bound_bits,
                r.transfer.window_ok
            ),
        ))
    })
}

pub fn lax_inequality(cfg: &ExperimentConfig) -> Outcome {
    timed(8, "covering transfer", 60.0, || {
        let run = default_ensemble(cfg)?;
        let r = run_lax_check(&run)?;
        let victim = run.pairs.len() / 2;
        let control = negative_control(&run, victim);
        let named = matches!(control, Err(LabError::Transfer(CoverTransferError::PairingGap { sample, .. })) if sample == victim);
        Ok((
            r.passed && named,
            format!(
                "delta {:.4}, bits exact@2delta {:.3} <= numerical@delta {:.3}, min slack {:.2e}, corruption of sample {victim} {}",
                r.delta,
                r.exact_bits,
                r.numerical_bits,
                r.min_slack,
                match &control {
                    Err(e) => format!("rejected: {e}"),
                    Ok(_) => "accepted".into(),
                }
            ),
        ))
    })
}

/// Cover transfer after adding an L¹ bump of mass `3δ̂` to one numerical sample.
pub fn negative_control(run: &EnsembleRun, victim: usize) -> Result<LaxReport, LabError> {
    let delta = run.delta();
    let mut numerical = run.numerical();
    numerical[victim] = numerical[victim].combine(1.0, &tent_bump(0.0, 0.25, 3.0 * delta), 1.0);
    lax_check_with(&run.exact(), &numerical, delta)
}

pub const MONOTONE_SAMPLES: usize = 500;

pub fn monotone_entropy(cfg: &ExperimentConfig) -> Outcome {
    timed(9, "monotone class entropy", 60.0, || {
        let (l, v) = (1.0, 1.0);
        let w = sample_monotone_class(l, v, MONOTONE_SAMPLES, cfg.seed);
        let dm = DistanceMatrix::from_fn(w.len(), |i, j| l1_distance_pieces(&w[i], &w[j]));
        let mut ok = true;
        let mut notes = Vec::new();
        for eps in [1.0 / 12.0, 1.0 / 24.0, 1.0 / 48.0] {
            let bits = (covering_count(&dm, eps) as f64).log2();
            let bound = 4.0 * l * v / eps;
            ok &= eps <= l * v / 6.0 && bits <= bound;
            notes.push(format!("eps 1/{:.0}: {bits:.2} <= {bound:.0}", 1.0 / eps));
        }
        Ok((ok, notes.join(", ")))
    })
}

pub fn resolution(cfg: &ExperimentConfig) -> Outcome {
    timed(10, "resolution classification", 300.0, || {
        let run = default_ensemble(cfg)?;
        let r = run_resolution(&run, None, cfg.resolution_tol)?;
        Ok((
            r.resolution == Resolution::High,
            format!(
                "{:?}: exponents exact {:.3} (r2 {:.3}), numerical {:.3} (r2 {:.3}) over eps {:.4}..{:.4}",
                r.resolution,
                r.exact_fit.exponent,
                r.exact_fit.r_squared,
                r.numerical_fit.exponent,
                r.numerical_fit.r_squared,
                r.ladder.first().copied().unwrap_or(f64::NAN),
                r.ladder.last().copied().unwrap_or(f64::NAN),
            ),
        ))
    })
}

pub fn closed_forms(_cfg: &ExperimentConfig) -> Outcome {
    timed(11, "closed-form constants", 1.0, || {
        let gp = gamma_plus_formula(2.0, 1.0, 2.0);
        let gt = gamma_tilde_minus(1.0, 1.0, 1.0);
        let want = 1.0 / (48.0 * std::f64::consts::LN_2);
        let el = error_lower_bound(4.0, 2.0, 1.0, 1.0)?;
        let ok =
            (gp - 32.0).abs() <= 1e-12 && (gt - want).abs() <= 1e-12 && (el - 1.0).abs() <= 1e-12;
        Ok((
            ok,
            format!(
                "gamma_plus {gp}, gamma_tilde_minus {gt:.15} vs {want:.15}, error_lower_bound {el}"
            ),
        ))
    })
}

pub type Check = fn(&ExperimentConfig) -> Outcome;

pub const CHECKS: [Check; 11] = [
    scheme_structure,
    discrete_oslc,
    linf_chain,
    convergence_rate,
    upper_bound,
    separated_targets,
    lower_bound,
    lax_inequality,
    monotone_entropy,
    resolution,
    closed_forms,
];

pub fn run_all(cfg: &ExperimentConfig) -> Vec<Outcome> {
    CHECKS.iter().map(|c| c(cfg)).collect()
}
