use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sampling::sample_data_class;
use crate::bounds::{
    classify_resolution, gamma_minus, gamma_plus, transfer_certificate, BoundsError, GammaMinus,
    GammaPlus, Resolution, TransferCertificate, TransferSpec,
};
use crate::entropy::{
    cover_transfer, estimate, fit_scaling, greedy_cover, packing_count, CoverCertificate,
    CoverTransferError, DistanceMatrix, EntropyEstimate, FitError, ScalingFit,
};
use crate::exact::{build_precursor, solve_pair, ExactError, PairedSolution};
use crate::profiles::{
    cell_average, ContinuousDatum, DataClass, GridSpec, PiecewiseLinearFn, ProfileError,
};
use crate::schemes::{evolve, plan_grid, FluxScheme, NumericalFlux, Retain, SchemeError};
use crate::targets::{
    make_separated_targets, FamilyOptions, TargetClassSpec, TargetError, TentLayout,
};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Transfer(#[from] CoverTransferError),
    #[error("{0}")]
    Other(String),
}

/// Grid for the class `D[L, m, M]` at spacing `dx`.
pub fn class_grid(cfg: &ExperimentConfig, dx: f64) -> Result<GridSpec, LabError> {
    Ok(plan_grid(
        &cfg.flux.model(),
        dx,
        cfg.cfl,
        cfg.t_final,
        cfg.big_m,
        cfg.l,
    )?)
}

/// Numerical and exact solutions of a batch on one grid.
pub struct EnsembleRun {
    pub grid: GridSpec,
    pub scheme: FluxScheme,
    pub data: Vec<ContinuousDatum>,
    pub pairs: Vec<PairedSolution>,
}

impl EnsembleRun {
    pub fn numerical(&self) -> Vec<PiecewiseLinearFn> {
        self.pairs.iter().map(|p| p.numerical.clone()).collect()
    }

    pub fn exact(&self) -> Vec<PiecewiseLinearFn> {
        self.pairs.iter().map(|p| p.exact.clone()).collect()
    }

    /// Largest pairing gap `‖S^T d − I(S^N P d)‖₁`.
    pub fn delta(&self) -> f64 {
        self.pairs.iter().map(|p| p.error).fold(0.0, f64::max)
    }

    /// Batch value: the smallest per-run estimate.
    pub fn beta_hat(&self) -> Option<f64> {
        min_beta(self.pairs.iter().map(|p| p.beta_hat))
    }

    pub fn linf_check(&self) -> LinfCheck {
        let t_n = self.grid.final_time();
        linf_check(
            self.data
                .iter()
                .zip(&self.pairs)
                .map(|(d, p)| (d.profile.l1(), p.beta_hat, p.linf_final, t_n)),
        )
    }
}

fn min_beta(it: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    it.flatten().fold(None, |acc: Option<f64>, b| {
        Some(acc.map_or(b, |a| a.min(b)))
    })
}

pub fn run_ensemble(
    cfg: &ExperimentConfig,
    nf: &NumericalFlux,
    data: Vec<ContinuousDatum>,
    dx: f64,
) -> Result<EnsembleRun, LabError> {
    let grid = class_grid(cfg, dx)?;
    let pairs = data
        .par_iter()
        .map(|d| solve_pair(d, nf, grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleRun {
        grid,
        scheme: nf.scheme,
        data,
        pairs,
    })
}

/// `‖u^N‖∞ ≤ sqrt(2‖d‖₁/(β̂ t^N))` on every run with a finite estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfCheck {
    pub runs: usize,
    /// Runs with `β̂` defined; the others have no positive slope anywhere.
    pub checked: usize,
    /// Largest `‖u^N‖∞ / bound`.
    pub worst_ratio: f64,
    pub violations: Vec<usize>,
}

impl LinfCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const LINF_SLACK: f64 = 1e-10;

fn linf_check(runs: impl Iterator<Item = (f64, Option<f64>, f64, f64)>) -> LinfCheck {
    let mut out = LinfCheck {
        runs: 0,
        checked: 0,
        worst_ratio: 0.0,
        violations: Vec::new(),
    };
    for (i, (mass, beta, linf, t_n)) in runs.enumerate() {
        out.runs += 1;
        let Some(beta) = beta else { continue };
        out.checked += 1;
        let bound = (2.0 * mass / (beta * t_n)).sqrt();
        out.worst_ratio = out.worst_ratio.max(linf / bound);
        if linf > bound + LINF_SLACK {
            out.violations.push(i);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OslcLevel {
    pub dx: f64,
    pub n_steps: usize,
    pub beta_hat: Option<f64>,
    pub median_beta_hat: Option<f64>,
    pub linf: LinfCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OslcStudy {
    pub scheme: FluxScheme,
    pub levels: Vec<OslcLevel>,
    /// `(max − min)/min` of the batch estimates over the levels.
    pub spread: Option<f64>,
}

/// Batch `β̂` of `data` at each spacing, from the scheme alone.
pub fn run_oslc_study(
    cfg: &ExperimentConfig,
    nf: &NumericalFlux,
    data: &[ContinuousDatum],
    dxs: &[f64],
) -> Result<OslcStudy, LabError> {
    let mut levels = Vec::new();
    for &dx in dxs {
        let grid = class_grid(cfg, dx)?;
        let runs = data
            .par_iter()
            .map(|d| -> Result<_, LabError> {
                let u0 = cell_average(d, grid)?;
                let tr = evolve(&u0, nf, Retain::Final)?;
                let linf = *tr.diagnostics.linf.last().unwrap_or(&0.0);
                Ok((
                    d.profile.l1(),
                    tr.diagnostics.beta_hat,
                    linf,
                    grid.final_time(),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut betas: Vec<f64> = runs.iter().filter_map(|r| r.1).collect();
        betas.sort_by(f64::total_cmp);
        levels.push(OslcLevel {
            dx,
            n_steps: grid.n_steps,
            beta_hat: betas.first().copied(),
            median_beta_hat: betas.get(betas.len() / 2).copied(),
            linf: linf_check(runs.into_iter()),
        });
    }
    let bs: Option<Vec<f64>> = levels.iter().map(|l| l.beta_hat).collect();
    let spread = bs.filter(|b| !b.is_empty()).map(|b| {
        let max = b.iter().copied().fold(f64::MIN, f64::max);
        let min = b.iter().copied().fold(f64::MAX, f64::min);
        (max - min) / min
    });
    Ok(OslcStudy {
        scheme: nf.scheme,
        levels,
        spread,
    })
}

/// `count` geometric points from `lo` to `hi`.
pub fn geometric_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}

/// Scales between the smallest nonzero distance and half the diameter.
pub fn sample_ladder(dm: &DistanceMatrix, count: usize) -> Vec<f64> {
    match dm.spread() {
        Some((max, min)) if max / 2.0 > min => geometric_ladder(min, max / 2.0, count),
        Some((max, _)) => vec![max; 1],
        None => vec![1.0],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperReport {
    pub dx: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// Undefined when no run ever has a positive slope; any `β` then works
    /// and the bound degenerates to zero bits.
    pub beta_hat: Option<f64>,
    pub bound: Option<GammaPlus>,
    pub estimates: Vec<EntropyEstimate>,
    /// `Γ⁺/eps` at each ladder point.
    pub bound_bits: Vec<f64>,
    pub within_bound: bool,
    pub linf: LinfCheck,
}

/// Covering estimates of the numerical sample against `Γ⁺/eps`, with `Γ⁺`
/// evaluated at the measured batch `β̂`.
pub fn run_upper(
    cfg: &ExperimentConfig,
    run: &EnsembleRun,
    ladder: Option<&[f64]>,
) -> Result<UpperReport, LabError> {
    let g = run.grid;
    let beta = run.beta_hat();
    let bound = beta
        .map(|b| gamma_plus(cfg.l, g.n_steps, g.dx, g.dt, cfg.m, b))
        .transpose()?;
    let (gp, eps_max) = bound.map_or((0.0, f64::INFINITY), |b| (b.gamma_plus, b.eps_max_upper));
    let dm = DistanceMatrix::l1(&run.numerical());
    let ladder: Vec<f64> = match ladder {
        Some(l) => l.to_vec(),
        None => sample_ladder(&dm, 6)
            .into_iter()
            .filter(|&e| e <= eps_max)
            .collect(),
    };
    let estimates: Vec<EntropyEstimate> = ladder.iter().map(|&e| estimate(&dm, e)).collect();
    let bound_bits: Vec<f64> = ladder.iter().map(|&e| gp / e).collect();
    let within_bound = estimates
        .iter()
        .zip(&bound_bits)
        .all(|(e, &b)| e.eps <= eps_max && e.h_upper_bits <= b);
    Ok(UpperReport {
        dx: g.dx,
        dt: g.dt,
        n_steps: g.n_steps,
        beta_hat: beta,
        bound,
        estimates,
        bound_bits,
        within_bound,
        linf: run.linf_check(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub dx: f64,
    pub n_steps: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerReport {
    pub eps: f64,
    pub eps_tilde: f64,
    pub alpha: f64,
    pub spec: TargetClassSpec,
    pub layout: TentLayout,
    pub family_size: usize,
    pub family_log2: f64,
    pub family_certified: bool,
    pub max_precursor_tv: f64,
    pub max_verification_error: f64,
    pub refinements: Vec<Refinement>,
    pub delta: f64,
    pub delta_ok: bool,
    /// Smallest exact L¹ distance between numerical images, with the pair.
    pub min_image_distance: f64,
    pub closest_pair: (usize, usize),
    pub packing_count: usize,
    pub packing_bits: f64,
    pub bound: GammaMinus,
    pub bound_bits: f64,
    pub transfer: TransferCertificate,
    pub passed: bool,
}

/// Precursors of a separated family pushed through the scheme: refines `dx`
/// until `δ̂ ≤ α·eps`, then checks that the numerical images stay separated.
pub fn run_lower(cfg: &ExperimentConfig, nf: &NumericalFlux) -> Result<LowerReport, LabError> {
    let flux = cfg.flux.model();
    let lc = &cfg.lower;
    let f2 = flux.second_deriv_at_zero();
    let spec = TargetClassSpec::at_h_max(cfg.l, cfg.m, cfg.big_m, cfg.t_final, f2)?;
    let eps = lc.eps;
    let eps_tilde = (1.0 + 2.0 * cfg.alpha) * eps;
    let opts = FamilyOptions {
        rule: lc.rule,
        sample_cap: cfg.target_sample_cap,
        seed: cfg.seed,
    };
    let family = make_separated_targets(&spec, eps_tilde, &opts)?;
    let adm = spec.admissible_class();
    let base = DataClass::new(cfg.l, cfg.m, cfg.big_m);
    let records = family
        .members
        .par_iter()
        .map(|mb| build_precursor(&mb.profile, cfg.t_final, &flux, lc.fine_dx, &adm, base))
        .collect::<Result<Vec<_>, _>>()?;
    let max_tv = records.iter().map(|r| r.tv).fold(0.0, f64::max);
    let class = base.with_tv_bound(1.5 * max_tv);
    let data: Vec<ContinuousDatum> = records
        .iter()
        .map(|r| ContinuousDatum::new(r.precursor.profile.clone(), class))
        .collect();
    for d in &data {
        d.check_class()
            .map_err(|v| LabError::Other(format!("precursor outside class: {v}")))?;
    }
    let max_verification_error = records
        .iter()
        .map(|r| r.verification_error)
        .fold(0.0, f64::max);

    let mut refinements = Vec::new();
    let mut dx = lc.dx_start;
    let run = loop {
        let run = run_ensemble(cfg, nf, data.clone(), dx)?;
        let delta = run.delta();
        refinements.push(Refinement {
            dx,
            n_steps: run.grid.n_steps,
            delta,
        });
        if delta <= cfg.alpha * eps || dx / 2.0 < lc.dx_min {
            break run;
        }
        dx /= 2.0;
    };
    let delta = run.delta();
    let delta_ok = delta <= cfg.alpha * eps;
    let images = run.numerical();
    let dm = DistanceMatrix::l1(&images);
    let (min_image_distance, closest_pair) = closest(&dm);
    let packing = packing_count(&dm, eps);
    let packing_bits = (packing as f64).log2();
    let bound = gamma_minus(
        cfg.l,
        run.grid.final_time(),
        f2,
        cfg.alpha,
        delta,
        cfg.m,
        cfg.big_m,
    )?;
    let bound_bits = bound.gamma_minus / eps;
    let transfer = transfer_certificate(
        &TransferSpec {
            family_size_log2: family.log2_cardinality(),
            delta_star: delta,
            alpha: cfg.alpha,
            eps0: spec.eps_max(),
        },
        eps,
    );
    let passed = family.certificate.passed
        && delta_ok
        && min_image_distance > 2.0 * eps
        && packing_bits >= bound_bits
        && transfer.window_ok;
    Ok(LowerReport {
        eps,
        eps_tilde,
        alpha: cfg.alpha,
        spec,
        layout: family.layout,
        family_size: family.len(),
        family_log2: family.log2_cardinality(),
        family_certified: family.certificate.passed,
        max_precursor_tv: max_tv,
        max_verification_error,
        refinements,
        delta,
        delta_ok,
        min_image_distance,
        closest_pair,
        packing_count: packing,
        packing_bits,
        bound,
        bound_bits,
        transfer,
        passed,
    })
}

fn closest(dm: &DistanceMatrix) -> (f64, (usize, usize)) {
    let mut best = (f64::INFINITY, (0, 0));
    for i in 0..dm.len() {
        for j in i + 1..dm.len() {
            if dm.get(i, j) < best.0 {
                best = (dm.get(i, j), (i, j));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaxReport {
    pub delta: f64,
    pub numerical_cover: usize,
    pub numerical_bits: f64,
    /// Greedy cover of the exact sample at `2δ̂`, for comparison.
    pub exact_cover: usize,
    pub exact_bits: f64,
    pub certificate: CoverCertificate,
    pub min_slack: f64,
    pub passed: bool,
}

/// Covers the numerical sample at `δ̂` and certifies that the same centers
/// cover the exact sample at `2δ̂`.
pub fn run_lax_check(run: &EnsembleRun) -> Result<LaxReport, LabError> {
    let delta = run.delta();
    lax_check_with(&run.exact(), &run.numerical(), delta)
}

/// Same as [`run_lax_check`] on explicit samples paired by index.
pub fn lax_check_with(
    exact: &[PiecewiseLinearFn],
    numerical: &[PiecewiseLinearFn],
    delta: f64,
) -> Result<LaxReport, LabError> {
    let dm_num = DistanceMatrix::l1(numerical);
    let cover = greedy_cover(&dm_num, delta);
    let pairing: Vec<usize> = (0..exact.len()).collect();
    let certificate = cover_transfer(exact, numerical, &pairing, &cover.centers, delta)?;
    let dm_ex = DistanceMatrix::l1(exact);
    let exact_cover = greedy_cover(&dm_ex, 2.0 * delta).centers.len();
    let numerical_cover = cover.centers.len();
    let min_slack = certificate
        .slack
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(LaxReport {
        delta,
        numerical_cover,
        numerical_bits: (numerical_cover as f64).log2(),
        exact_cover,
        exact_bits: (exact_cover as f64).log2(),
        certificate,
        min_slack,
        passed: exact_cover <= numerical_cover,
    })
}

/// Tent of L¹ mass `mass` centred at `x` with half-width `w`.
pub fn tent_bump(x: f64, w: f64, mass: f64) -> PiecewiseLinearFn {
    PiecewiseLinearFn::from_nodes(&[(x - w, 0.0), (x, mass / w), (x + w, 0.0)])
        .expect("ordered nodes")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: FluxScheme,
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `log δ` against `log dx`.
    pub slope: f64,
    pub r_squared: f64,
}

pub fn run_rate(
    cfg: &ExperimentConfig,
    nf: &NumericalFlux,
    data: &[ContinuousDatum],
    dxs: &[f64],
) -> Result<RateReport, LabError> {
    let mut points = Vec::new();
    for &dx in dxs {
        let run = run_ensemble(cfg, nf, data.to_vec(), dx)?;
        points.push((dx, run.delta()));
    }
    let fit = fit_scaling(&points)?;
    Ok(RateReport {
        scheme: nf.scheme,
        slope: -fit.exponent,
        r_squared: fit.r_squared,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub delta: f64,
    pub ladder: Vec<f64>,
    pub exact_fit: ScalingFit,
    pub numerical_fit: ScalingFit,
    pub resolution: Resolution,
}

/// Scales where both samples are resolved but not saturated: from `4δ̂`, or
/// the first scale at which each cover uses at most half the sample, up to
/// the last scale at which each cover keeps at least four centers.
pub fn resolution_ladder(
    exact: &DistanceMatrix,
    numerical: &DistanceMatrix,
    delta: f64,
    count: usize,
) -> Vec<f64> {
    let centers = |e: f64| {
        let a = greedy_cover(exact, e).centers.len();
        let b = greedy_cover(numerical, e).centers.len();
        (a.min(b), a.max(b))
    };
    let n = exact.len().min(numerical.len());
    let (max, min) = exact.spread().unwrap_or((4.0 * delta, 4.0 * delta));
    let mut lo = (4.0 * delta).max(min);
    while lo < max && 2 * centers(lo).1 > n {
        lo *= 1.05;
    }
    let mut hi = max / 2.0;
    while hi > lo && centers(hi).0 < 4 {
        hi /= 1.05;
    }
    if hi <= lo {
        return vec![lo];
    }
    geometric_ladder(lo, hi, count)
}

/// Compares the covering-entropy scaling of the exact and numerical samples.
pub fn run_resolution(
    run: &EnsembleRun,
    ladder: Option<&[f64]>,
    tol: f64,
) -> Result<ResolutionReport, LabError> {
    let delta = run.delta();
    let dm_ex = DistanceMatrix::l1(&run.exact());
    let dm_num = DistanceMatrix::l1(&run.numerical());
    let ladder = match ladder {
        Some(l) => l.to_vec(),
        None => resolution_ladder(&dm_ex, &dm_num, delta, 6),
    };
    let bits = |dm: &DistanceMatrix| -> Vec<(f64, f64)> {
        ladder
            .iter()
            .map(|&e| (e, estimate(dm, e).h_upper_bits))
            .collect()
    };
    let exact_fit = fit_scaling(&bits(&dm_ex))?;
    let numerical_fit = fit_scaling(&bits(&dm_num))?;
    let resolution = classify_resolution(&exact_fit, &numerical_fit, tol);
    Ok(ResolutionReport {
        delta,
        ladder,
        exact_fit,
        numerical_fit,
        resolution,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub eps: f64,
    pub n: usize,
    pub peak: f64,
    pub size: usize,
    pub log2_size: f64,
    pub min_distance: f64,
    pub benchmark_ratio: f64,
    pub certified: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetsStudy {
    pub spec: TargetClassSpec,
    pub families: Vec<FamilySummary>,
    /// `log₂|F|` against `1/eps`.
    pub fit: ScalingFit,
}

/// Separated families over `count` scales log-spaced in `[Lh/80, Lh/8]`.
pub fn run_targets_study(cfg: &ExperimentConfig, count: usize) -> Result<TargetsStudy, LabError> {
    let flux = cfg.flux.model();
    let spec = TargetClassSpec::at_h_max(
        cfg.l,
        cfg.m,
        cfg.big_m,
        cfg.t_final,
        flux.second_deriv_at_zero(),
    )?;
    let top = spec.eps_max();
    let opts = FamilyOptions {
        rule: cfg.target_rule,
        sample_cap: cfg.target_sample_cap,
        seed: cfg.seed,
    };
    let mut families = Vec::new();
    for eps in geometric_ladder(top / 10.0, top, count) {
        let eps = eps.min(top);
        let clock = Instant::now();
        let fam = make_separated_targets(&spec, eps, &opts)?;
        families.push(FamilySummary {
            eps,
            n: fam.layout.n,
            peak: fam.layout.peak,
            size: fam.len(),
            log2_size: fam.log2_cardinality(),
            min_distance: fam.min_pairwise_distance,
            benchmark_ratio: fam.benchmark_ratio(),
            certified: fam.certificate.passed,
            seconds: clock.elapsed().as_secs_f64(),
        });
    }
    let pts: Vec<(f64, f64)> = families.iter().map(|f| (f.eps, f.log2_size)).collect();
    let fit = fit_scaling(&pts)?;
    Ok(TargetsStudy {
        spec,
        families,
        fit,
    })
}

/// Default ensemble of the configuration at its working spacing.
pub fn default_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleRun, LabError> {
    let data = sample_data_class(cfg.l, cfg.m, cfg.big_m, cfg.sample_count, cfg.seed);
    run_ensemble(cfg, &cfg.numerical_flux(), data, cfg.dx)
}
