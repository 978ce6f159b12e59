//! Conservative three-point schemes
//! `u_j^{n+1} = u_j^n - λ [g(u_{j+1}, u_j) - g(u_j, u_{j-1})]`.
//!
//! Values beyond the grid window are taken equal to the nearest edge value.
//! With zero edge cells, which [`GridSpec::covering`] guarantees for the
//! evolution horizon, this is the zero extension.

use serde::{Deserialize, Serialize};

use crate::flux::FluxModel;
use crate::profiles::{DiscreteProfile, GridSpec, ProfileError};

/// Slack allowed on the CFL number before a step is refused.
const CFL_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxScheme {
    LaxFriedrichs,
    Godunov,
}

impl FluxScheme {
    pub fn name(self) -> &'static str {
        match self {
            FluxScheme::LaxFriedrichs => "lax-friedrichs",
            FluxScheme::Godunov => "godunov",
        }
    }
}

impl std::str::FromStr for FluxScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lax-friedrichs" | "lf" => Ok(FluxScheme::LaxFriedrichs),
            "godunov" => Ok(FluxScheme::Godunov),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

/// Two-point numerical flux `g(a, b, λ)` with `a` the right state and `b` the
/// left state of an interface.
#[derive(Clone, Debug)]
pub struct NumericalFlux {
    pub scheme: FluxScheme,
    pub flux: FluxModel,
}

pub fn lax_friedrichs(flux: FluxModel) -> NumericalFlux {
    NumericalFlux {
        scheme: FluxScheme::LaxFriedrichs,
        flux,
    }
}

/// Godunov flux for a convex `f` with `f'(0) = 0`, so the sonic point is 0.
pub fn godunov(flux: FluxModel) -> NumericalFlux {
    NumericalFlux {
        scheme: FluxScheme::Godunov,
        flux,
    }
}

impl NumericalFlux {
    pub fn new(scheme: FluxScheme, flux: FluxModel) -> Self {
        NumericalFlux { scheme, flux }
    }

    pub fn name(&self) -> &'static str {
        self.scheme.name()
    }

    #[inline]
    pub fn g(&self, a: f64, b: f64, lambda: f64) -> f64 {
        let f = &self.flux;
        match self.scheme {
            FluxScheme::LaxFriedrichs => 0.5 * (f.eval(a) + f.eval(b)) - (a - b) / (2.0 * lambda),
            FluxScheme::Godunov => {
                if b == a {
                    f.eval(a)
                } else if b > a {
                    f.eval(a).max(f.eval(b))
                } else if b <= 0.0 && 0.0 <= a {
                    f.eval(0.0)
                } else {
                    f.eval(a).min(f.eval(b))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemeError {
    #[error("CFL condition violated: λ·max|f'| = {cfl} > 1")]
    Cfl { cfl: f64 },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SchemeError>,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// `λ · max|f'|` over `[-‖u‖∞, ‖u‖∞]`.
pub fn cfl_number(u: &DiscreteProfile, flux: &FluxModel) -> f64 {
    u.grid.lambda * flux.max_speed(u.linf())
}

/// Grid for evolving data supported in `[-radius, radius]` with `|u| ≤ bound`
/// up to time `t_final`. The step is `dt = T/N` with `N = ceil(T/dt₀)` and
/// `dt₀ = cfl·dx/max|f'|`, so the realised CFL number never exceeds `cfl`.
pub fn plan_grid(
    flux: &FluxModel,
    dx: f64,
    cfl: f64,
    t_final: f64,
    bound: f64,
    radius: f64,
) -> Result<GridSpec, ProfileError> {
    let speed = flux.max_speed(bound).max(f64::MIN_POSITIVE);
    let dt0 = cfl * dx / speed;
    let n = ((t_final / dt0) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = t_final / n as f64;
    GridSpec::covering(dx, dt, radius, n)
}

fn active_range(values: &[f64]) -> Option<(usize, usize)> {
    let lo = values.iter().position(|&v| v != 0.0)?;
    let hi = values.iter().rposition(|&v| v != 0.0)?;
    Some((lo, hi))
}

/// One update of `src` into `dst` (same length). Indices whose stencil is all
/// zero are left at zero without evaluating fluxes.
fn step_into(src: &[f64], dst: &mut [f64], nf: &NumericalFlux, lambda: f64) {
    let n = src.len();
    let first = src[0];
    let last = src[n - 1];
    let (lo, hi) = if first == 0.0 && last == 0.0 {
        match active_range(src) {
            Some((lo, hi)) => (lo.saturating_sub(1), (hi + 1).min(n - 1)),
            None => {
                dst.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
        }
    } else {
        (0, n - 1)
    };
    dst[..lo].iter_mut().for_each(|v| *v = 0.0);
    dst[hi + 1..].iter_mut().for_each(|v| *v = 0.0);
    let at = |k: isize| -> f64 {
        if k < 0 {
            first
        } else if k as usize >= n {
            last
        } else {
            src[k as usize]
        }
    };
    // flux through the left interface of cell lo
    let mut g_left = nf.g(at(lo as isize), at(lo as isize - 1), lambda);
    for k in lo..=hi {
        let g_right = nf.g(at(k as isize + 1), src[k], lambda);
        dst[k] = src[k] - lambda * (g_right - g_left);
        g_left = g_right;
    }
}

/// Applies the scheme once. Refuses to step when the CFL number exceeds 1.
pub fn step(u: &DiscreteProfile, nf: &NumericalFlux) -> Result<DiscreteProfile, SchemeError> {
    let cfl = cfl_number(u, &nf.flux);
    if cfl > 1.0 + CFL_SLACK {
        return Err(SchemeError::Cfl { cfl });
    }
    let mut out = vec![0.0; u.values.len()];
    step_into(&u.values, &mut out, nf, u.grid.lambda);
    Ok(DiscreteProfile {
        grid: u.grid,
        values: out,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Retain {
    All,
    Final,
}

/// Per-step diagnostics of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OslcDiagnostics {
    /// `ℓ⁺(u^n)` for `n = 0..=N`.
    pub oslc: Vec<f64>,
    /// Tightest `β` with `ℓ⁺(u^n) ≤ 1/(β t^n)` for all `n ≥ 1`; `None` when every
    /// `ℓ⁺` vanishes.
    pub beta_hat: Option<f64>,
    /// `Σ_j u_j^n dx` for `n = 0..=N`.
    pub mass: Vec<f64>,
    /// `‖u^n‖∞` for `n = 0..=N`.
    pub linf: Vec<f64>,
    /// Largest CFL number met during the run.
    pub cfl_number: f64,
    pub cfl_margin: f64,
    /// Whether a nonzero value ever reached an edge cell of the window.
    pub boundary_touched: bool,
}

impl OslcDiagnostics {
    /// `max_n |mass_n - mass_0|` relative to `max(|mass_0|, ‖u⁰‖₁)`.
    pub fn mass_drift(&self, l1_initial: f64) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        let scale = m0.abs().max(l1_initial);
        if scale == 0.0 {
            return 0.0;
        }
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / scale
    }
}

/// `min_{n ≥ 1, ℓ⁺_n > 0} 1/(t^n ℓ⁺_n)`.
pub fn beta_hat(oslc: &[f64], dt: f64) -> Option<f64> {
    oslc.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &l)| l > 0.0)
        .map(|(n, &l)| 1.0 / (n as f64 * dt * l))
        .reduce(f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub scheme: FluxScheme,
    /// Step indices of the retained states.
    pub steps: Vec<usize>,
    pub states: Vec<DiscreteProfile>,
    pub diagnostics: OslcDiagnostics,
}

impl Trajectory {
    pub fn final_state(&self) -> &DiscreteProfile {
        self.states
            .last()
            .expect("trajectory retains the final state")
    }

    pub fn final_time(&self) -> f64 {
        self.grid.final_time()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.grid.dt
    }
}

/// Runs `grid.n_steps` steps from `u0`.
pub fn evolve(
    u0: &DiscreteProfile,
    nf: &NumericalFlux,
    retain: Retain,
) -> Result<Trajectory, SchemeError> {
    let grid = u0.grid;
    if !grid.lambda_consistent() {
        return Err(SchemeError::GridMismatch(format!(
            "lambda {} differs from dt/dx {}",
            grid.lambda,
            grid.dt / grid.dx
        )));
    }
    let n_steps = grid.n_steps;
    let lambda = grid.lambda;
    let mut cur = u0.values.clone();
    let mut next = vec![0.0; cur.len()];

    let mut oslc = Vec::with_capacity(n_steps + 1);
    let mut mass = Vec::with_capacity(n_steps + 1);
    let mut linf = Vec::with_capacity(n_steps + 1);
    let mut cfl_max = 0.0_f64;
    let mut boundary_touched = false;
    let mut steps = Vec::new();
    let mut states = Vec::new();

    let record = |vals: &[f64], oslc: &mut Vec<f64>, mass: &mut Vec<f64>, linf: &mut Vec<f64>| {
        let p = DiscreteProfile {
            grid,
            values: vals.to_vec(),
        };
        oslc.push(p.oslc_plus());
        mass.push(p.mass());
        linf.push(p.linf());
        p
    };

    let p0 = record(&cur, &mut oslc, &mut mass, &mut linf);
    if retain == Retain::All {
        steps.push(0);
        states.push(p0);
    }
    for n in 0..n_steps {
        let sup = linf[n];
        let cfl = lambda * nf.flux.max_speed(sup);
        cfl_max = cfl_max.max(cfl);
        if cfl > 1.0 + CFL_SLACK {
            return Err(SchemeError::AtStep {
                step: n,
                source: Box::new(SchemeError::Cfl { cfl }),
            });
        }
        step_into(&cur, &mut next, nf, lambda);
        std::mem::swap(&mut cur, &mut next);
        boundary_touched |= cur[0] != 0.0 || cur[cur.len() - 1] != 0.0;
        let p = record(&cur, &mut oslc, &mut mass, &mut linf);
        if retain == Retain::All {
            steps.push(n + 1);
            states.push(p);
        }
    }
    if retain == Retain::Final {
        steps.push(n_steps);
        states.push(DiscreteProfile { grid, values: cur });
    }
    let beta = beta_hat(&oslc, grid.dt);
    Ok(Trajectory {
        grid,
        scheme: nf.scheme,
        steps,
        states,
        diagnostics: OslcDiagnostics {
            oslc,
            beta_hat: beta,
            mass,
            linf,
            cfl_number: cfl_max,
            cfl_margin: 1.0 - cfl_max,
            boundary_touched,
        },
    })
}

/// Sampled monotonicity of `g` on `[-M, M]²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub scheme: FluxScheme,
    pub bound: f64,
    pub lambda: f64,
    pub samples: usize,
    /// Largest sampled `∂g/∂a`; must be `≤ 0`.
    pub max_partial_right: f64,
    /// Smallest sampled `∂g/∂b`; must be `≥ 0`.
    pub min_partial_left: f64,
    /// Smallest sampled `1 - λ(∂_b g(a, u) - ∂_a g(u, b))`, the weight of
    /// `u_j` in the update; must be `≥ 0`.
    pub min_center_weight: f64,
    pub cfl_number: f64,
    pub passed: bool,
}

const MONO_STEP: f64 = 1e-7;
const MONO_TOL: f64 = 1e-6;

/// One-sided finite-difference partials of `g` on a `samples × samples` grid.
pub fn check_monotone(
    nf: &NumericalFlux,
    bound: f64,
    lambda: f64,
    samples: usize,
) -> MonotoneReport {
    let samples = samples.max(2);
    let h = MONO_STEP;
    let pts: Vec<f64> = (0..samples)
        .map(|k| -bound + 2.0 * bound * k as f64 / (samples - 1) as f64)
        .collect();
    // forward differences pointing into the square so the sample stays in range
    let d_right = |a: f64, b: f64| {
        let s = if a + h <= bound { h } else { -h };
        (nf.g(a + s, b, lambda) - nf.g(a, b, lambda)) / s
    };
    let d_left = |a: f64, b: f64| {
        let s = if b + h <= bound { h } else { -h };
        (nf.g(a, b + s, lambda) - nf.g(a, b, lambda)) / s
    };
    let mut max_pr = f64::NEG_INFINITY;
    let mut min_pl = f64::INFINITY;
    for &a in &pts {
        for &b in &pts {
            max_pr = max_pr.max(d_right(a, b));
            min_pl = min_pl.min(d_left(a, b));
        }
    }
    let mut min_center = f64::INFINITY;
    for &u in &pts {
        let worst_left = pts
            .iter()
            .map(|&a| d_left(a, u))
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_right = pts
            .iter()
            .map(|&b| d_right(u, b))
            .fold(f64::INFINITY, f64::min);
        min_center = min_center.min(1.0 - lambda * (worst_left - worst_right));
    }
    let cfl = lambda * nf.flux.max_speed(bound);
    let passed = max_pr <= MONO_TOL
        && min_pl >= -MONO_TOL
        && min_center >= -MONO_TOL
        && cfl <= 1.0 + CFL_SLACK;
    MonotoneReport {
        scheme: nf.scheme,
        bound,
        lambda,
        samples,
        max_partial_right: max_pr,
        min_partial_left: min_pl,
        min_center_weight: min_center,
        cfl_number: cfl,
        passed,
    }
}

/// Largest `|g(u,u) - f(u)|` over `samples` points of `[-bound, bound]`.
pub fn consistency_error(nf: &NumericalFlux, bound: f64, lambda: f64, samples: usize) -> f64 {
    let samples = samples.max(2);
    (0..samples)
        .map(|k| -bound + 2.0 * bound * k as f64 / (samples - 1) as f64)
        .map(|u| (nf.g(u, u, lambda) - nf.flux.eval(u)).abs())
        .fold(0.0, f64::max)
}
