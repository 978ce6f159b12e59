//! Flux functions for `u_t + f(u)_x = 0`.
//!
//! A [`FluxModel`] carries `f`, `f'`, `f''` as plain closures together with the
//! uniform convexity constant `c` (a lower bound on `f''`) and `|f''(0)|`.
//! Nothing is differentiated symbolically: every consumer evaluates pointwise.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tolerance used by [`validate_flux`] for the convexity and normalization checks.
pub const VALIDATION_TOL: f64 = 1e-8;

/// Step used for the central-difference consistency checks of `f'` and `f''`.
const FD_STEP: f64 = 1e-5;

/// Tolerance for the central-difference consistency checks.
const FD_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxKind {
    Burgers,
    Custom,
}

/// A twice differentiable flux with its structural constants.
#[derive(Clone)]
pub struct FluxModel {
    name: String,
    kind: FluxKind,
    eval: ScalarFn,
    d1: ScalarFn,
    d2: ScalarFn,
    convexity_c: f64,
    second_deriv_at_zero: f64,
    even: bool,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("convexity_c", &self.convexity_c)
            .field("second_deriv_at_zero", &self.second_deriv_at_zero)
            .field("even", &self.even)
            .finish()
    }
}

/// Burgers flux `f(u) = u^2 / 2`.
pub fn burgers() -> FluxModel {
    FluxModel {
        name: "burgers".to_string(),
        kind: FluxKind::Burgers,
        eval: Arc::new(|u| 0.5 * u * u),
        d1: Arc::new(|u| u),
        d2: Arc::new(|_| 1.0),
        convexity_c: 1.0,
        second_deriv_at_zero: 1.0,
        even: true,
    }
}

impl FluxModel {
    /// Plugin hook for user supplied fluxes. `even` declares `f(-u) = f(u)`;
    /// it is not trusted blindly, see [`validate_flux`].
    #[allow(clippy::too_many_arguments)]
    pub fn custom<F, D1, D2>(
        name: impl Into<String>,
        eval: F,
        d1: D1,
        d2: D2,
        convexity_c: f64,
        second_deriv_at_zero: f64,
        even: bool,
    ) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FluxModel {
            name: name.into(),
            kind: FluxKind::Custom,
            eval: Arc::new(eval),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            convexity_c,
            second_deriv_at_zero,
            even,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FluxKind {
        self.kind
    }

    pub fn is_burgers(&self) -> bool {
        self.kind == FluxKind::Burgers
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    #[inline]
    pub fn d1(&self, u: f64) -> f64 {
        (self.d1)(u)
    }

    #[inline]
    pub fn d2(&self, u: f64) -> f64 {
        (self.d2)(u)
    }

    pub fn convexity_c(&self) -> f64 {
        self.convexity_c
    }

    pub fn second_deriv_at_zero(&self) -> f64 {
        self.second_deriv_at_zero
    }

    /// `max |f'|` over `[-bound, bound]`. For a convex flux `f'` is monotone, so
    /// the maximum sits at an endpoint.
    pub fn max_speed(&self, bound: f64) -> f64 {
        let b = bound.abs();
        self.d1(-b).abs().max(self.d1(b).abs())
    }
}

/// Outcome of [`validate_flux`]. Violations are reported, never raised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxValidation {
    pub range: (f64, f64),
    pub samples: usize,
    pub min_d2: f64,
    pub max_abs_d1: f64,
    pub d1_at_zero: f64,
    pub normalization_ok: bool,
    pub convexity_ok: bool,
    pub d1_monotone: bool,
    pub max_fd_error_d1: f64,
    pub max_fd_error_d2: f64,
    pub finite_differences_ok: bool,
    pub evenness_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluxError {
    #[error("validation needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("empty validation range [{0}, {1}]")]
    EmptyRange(f64, f64),
}

/// Samples `f` on `range` and checks `f'' >= c > 0`, `f'(0) = 0`, finite-difference
/// consistency of the supplied derivatives and, when declared, evenness.
pub fn validate_flux(
    f: &FluxModel,
    range: (f64, f64),
    samples: usize,
) -> Result<FluxValidation, FluxError> {
    let (lo, hi) = range;
    if samples < 3 {
        return Err(FluxError::TooFewSamples(samples));
    }
    if !(lo < hi) {
        return Err(FluxError::EmptyRange(lo, hi));
    }
    let us: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();

    let mut min_d2 = f64::INFINITY;
    let mut max_abs_d1 = 0.0_f64;
    let mut max_fd_error_d1 = 0.0_f64;
    let mut max_fd_error_d2 = 0.0_f64;
    let mut evenness_ok = true;
    for &u in &us {
        min_d2 = min_d2.min(f.d2(u));
        max_abs_d1 = max_abs_d1.max(f.d1(u).abs());
        let fd1 = (f.eval(u + FD_STEP) - f.eval(u - FD_STEP)) / (2.0 * FD_STEP);
        let fd2 = (f.d1(u + FD_STEP) - f.d1(u - FD_STEP)) / (2.0 * FD_STEP);
        let scale1 = 1.0 + f.d1(u).abs();
        let scale2 = 1.0 + f.d2(u).abs();
        max_fd_error_d1 = max_fd_error_d1.max((fd1 - f.d1(u)).abs() / scale1);
        max_fd_error_d2 = max_fd_error_d2.max((fd2 - f.d2(u)).abs() / scale2);
        if f.is_even() {
            let scale = 1.0 + f.eval(u).abs();
            if (f.eval(-u) - f.eval(u)).abs() > VALIDATION_TOL * scale {
                evenness_ok = false;
            }
        }
    }
    let d1_values: Vec<f64> = us.iter().map(|&u| f.d1(u)).collect();
    let d1_monotone = d1_values.windows(2).all(|w| w[1] > w[0]);

    let d1_at_zero = f.d1(0.0);
    let normalization_ok = d1_at_zero.abs() <= VALIDATION_TOL;
    let convexity_ok = f.convexity_c() > 0.0 && min_d2 >= f.convexity_c() - VALIDATION_TOL;
    let finite_differences_ok = max_fd_error_d1 <= FD_TOL && max_fd_error_d2 <= FD_TOL;
    let f2_zero_ok = (f.d2(0.0).abs() - f.second_deriv_at_zero()).abs()
        <= VALIDATION_TOL * (1.0 + f.second_deriv_at_zero());

    let passed = normalization_ok
        && convexity_ok
        && d1_monotone
        && finite_differences_ok
        && evenness_ok
        && f2_zero_ok;

    Ok(FluxValidation {
        range,
        samples,
        min_d2,
        max_abs_d1,
        d1_at_zero,
        normalization_ok,
        convexity_ok,
        d1_monotone,
        max_fd_error_d1,
        max_fd_error_d2,
        finite_differences_ok,
        evenness_ok,
        passed,
    })
}
