//! Closed-form entropy constants, their validity windows, the error lower
//! bound and the resolution label.

use serde::{Deserialize, Serialize};

use crate::entropy::ScalingFit;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("delta must be nonnegative, got {0}")]
    NegativeDelta(f64),
    #[error("need alpha_exp > beta_exp > 0, got alpha_exp = {alpha_exp}, beta_exp = {beta_exp}")]
    ExponentOrder { alpha_exp: f64, beta_exp: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::NonPositive { name, value })
    }
}

fn check_alpha(alpha: f64) -> Result<(), BoundsError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(BoundsError::AlphaOutOfRange(alpha))
    }
}

/// `Γ⁺ = 4w²/b + 4w√(2m/b)` with `w = 2L^N + dx` and `b = β t^N`.
pub fn gamma_plus_formula(width: f64, beta_t: f64, m: f64) -> f64 {
    4.0 * width * width / beta_t + 4.0 * width * (2.0 * m / beta_t).sqrt()
}

/// Upper edge `(w/6)(w/b + √(2m/b))` of the upper-bound window.
pub fn eps_max_upper_formula(width: f64, beta_t: f64, m: f64) -> f64 {
    width / 6.0 * (width / beta_t + (2.0 * m / beta_t).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPlus {
    pub gamma_plus: f64,
    pub eps_max_upper: f64,
    pub l_n: f64,
    pub t_n: f64,
}

/// Upper-bound constant for support radius `L`, `N` steps of size `dt` on a
/// grid of spacing `dx`, mass budget `m` and OSLC constant `beta`.
pub fn gamma_plus(
    l: f64,
    n: usize,
    dx: f64,
    dt: f64,
    m: f64,
    beta: f64,
) -> Result<GammaPlus, BoundsError> {
    positive("L", l)?;
    positive("dx", dx)?;
    positive("dt", dt)?;
    positive("m", m)?;
    positive("beta", beta)?;
    positive("N", n as f64)?;
    let l_n = l + n as f64 * dx;
    let t_n = n as f64 * dt;
    let width = 2.0 * l_n + dx;
    Ok(GammaPlus {
        gamma_plus: gamma_plus_formula(width, beta * t_n, m),
        eps_max_upper: eps_max_upper_formula(width, beta * t_n, m),
        l_n,
        t_n,
    })
}

/// `L²/(48 ln 2 · t · f2)`.
pub fn gamma_tilde_minus(l: f64, t: f64, f2: f64) -> f64 {
    l * l / (48.0 * std::f64::consts::LN_2 * t * f2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaMinus {
    pub gamma_tilde_minus: f64,
    pub gamma_minus: f64,
    pub eps_min_lower: f64,
    pub eps_max_lower: f64,
    /// The smaller edge `L_T h/(6(1+2α))` at `h = h_max`, reported alongside.
    pub eps_max_lower_proof: f64,
    pub window_empty: bool,
}

pub fn gamma_minus(
    l: f64,
    t_n: f64,
    f2: f64,
    alpha: f64,
    delta: f64,
    m: f64,
    big_m: f64,
) -> Result<GammaMinus, BoundsError> {
    check_alpha(alpha)?;
    positive("L", l)?;
    positive("t_N", t_n)?;
    positive("f2", f2)?;
    positive("m", m)?;
    positive("M", big_m)?;
    if !(delta >= 0.0) {
        return Err(BoundsError::NegativeDelta(delta));
    }
    let gt = gamma_tilde_minus(l, t_n, f2);
    let scale = 1.0 + 2.0 * alpha;
    let h_max = big_m.min(m / (2.0 * l)).min(l / (8.0 * t_n * f2));
    let l_t = l - 2.0 * t_n * f2 * h_max;
    let eps_min = delta / alpha;
    let eps_max = l / (8.0 * scale) * h_max;
    Ok(GammaMinus {
        gamma_tilde_minus: gt,
        gamma_minus: gt / scale,
        eps_min_lower: eps_min,
        eps_max_lower: eps_max,
        eps_max_lower_proof: l_t * h_max / (6.0 * scale),
        window_empty: eps_min > eps_max,
    })
}

/// `(C₁/(2^α C₂))^{1/(α-β)}`.
pub fn error_lower_bound(
    c1: f64,
    alpha_exp: f64,
    c2: f64,
    beta_exp: f64,
) -> Result<f64, BoundsError> {
    positive("C1", c1)?;
    positive("C2", c2)?;
    if !(beta_exp > 0.0 && alpha_exp > beta_exp) {
        return Err(BoundsError::ExponentOrder {
            alpha_exp,
            beta_exp,
        });
    }
    Ok((c1 / (2f64.powf(alpha_exp) * c2)).powf(1.0 / (alpha_exp - beta_exp)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSpec {
    /// `log₂` of the separated family size at scale `(1+2α)ε`.
    pub family_size_log2: f64,
    pub delta_star: f64,
    pub alpha: f64,
    pub eps0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCertificate {
    pub eps: f64,
    pub window: (f64, f64),
    pub window_ok: bool,
    pub asserted_bits: Option<f64>,
    pub reason: Option<String>,
}

/// Relative slack on the closed window edges.
const EDGE_RTOL: f64 = 1e-12;

/// Lower bound on the numerical entropy at `eps` inherited from a separated
/// family, valid for `δ*/α ≤ eps ≤ ε₀/(1+2α)`.
pub fn transfer_certificate(spec: &TransferSpec, eps: f64) -> TransferCertificate {
    let lo = spec.delta_star / spec.alpha;
    let hi = spec.eps0 / (1.0 + 2.0 * spec.alpha);
    let mut reason = None;
    if !(spec.alpha > 0.0 && spec.alpha <= 1.0) {
        reason = Some(format!("alpha {} outside (0, 1]", spec.alpha));
    } else if eps < lo * (1.0 - EDGE_RTOL) {
        reason = Some(format!("eps {eps} below delta*/alpha = {lo}"));
    } else if eps > hi * (1.0 + EDGE_RTOL) {
        reason = Some(format!("eps {eps} above eps0/(1+2 alpha) = {hi}"));
    }
    let window_ok = reason.is_none();
    TransferCertificate {
        eps,
        window: (lo, hi),
        window_ok,
        asserted_bits: window_ok.then_some(spec.family_size_log2),
        reason,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    High,
    Low,
    Inconclusive,
}

pub const DEFAULT_RESOLUTION_TOL: f64 = 0.15;
const MIN_R_SQUARED: f64 = 0.9;

/// `High` when the exponents agree within `tol`, `Low` when the numerical
/// exponent falls short by more than `tol`; both require `r² ≥ 0.9`.
pub fn classify_resolution(exact: &ScalingFit, numerical: &ScalingFit, tol: f64) -> Resolution {
    if exact.r_squared < MIN_R_SQUARED || numerical.r_squared < MIN_R_SQUARED {
        return Resolution::Inconclusive;
    }
    if (exact.exponent - numerical.exponent).abs() <= tol {
        Resolution::High
    } else if numerical.exponent < exact.exponent - tol {
        Resolution::Low
    } else {
        Resolution::Inconclusive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsInputs {
    pub l: f64,
    pub m: f64,
    pub big_m: f64,
    pub n_steps: usize,
    pub dx: f64,
    pub dt: f64,
    pub beta: f64,
    pub f2_at_zero: f64,
    pub delta: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub inputs: BoundsInputs,
    pub t_n: f64,
    pub l_n: f64,
    pub gamma_plus: f64,
    pub eps_max_upper: f64,
    pub gamma_tilde_minus: f64,
    pub gamma_minus: f64,
    pub eps_min_lower: f64,
    pub eps_max_lower: f64,
    pub eps_max_lower_proof: f64,
    pub lower_window_empty: bool,
}

pub fn bounds_report(inputs: BoundsInputs) -> Result<BoundsReport, BoundsError> {
    let up = gamma_plus(
        inputs.l,
        inputs.n_steps,
        inputs.dx,
        inputs.dt,
        inputs.m,
        inputs.beta,
    )?;
    let lo = gamma_minus(
        inputs.l,
        up.t_n,
        inputs.f2_at_zero,
        inputs.alpha,
        inputs.delta,
        inputs.m,
        inputs.big_m,
    )?;
    Ok(BoundsReport {
        inputs,
        t_n: up.t_n,
        l_n: up.l_n,
        gamma_plus: up.gamma_plus,
        eps_max_upper: up.eps_max_upper,
        gamma_tilde_minus: lo.gamma_tilde_minus,
        gamma_minus: lo.gamma_minus,
        eps_min_lower: lo.eps_min_lower,
        eps_max_lower: lo.eps_max_lower,
        eps_max_lower_proof: lo.eps_max_lower_proof,
        lower_window_empty: lo.window_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fit(exponent: f64, r_squared: f64) -> ScalingFit {
        ScalingFit {
            points: vec![],
            exponent,
            constant: 1.0,
            r_squared,
        }
    }

    #[test]
    fn gamma_plus_examples() {
        assert_eq!(gamma_plus_formula(2.0, 1.0, 2.0), 32.0);
        assert_eq!(gamma_plus_formula(2.0, 1.0, 0.5), 24.0);
        assert_abs_diff_eq!(
            eps_max_upper_formula(2.0, 1.0, 2.0),
            4.0 / 3.0,
            epsilon = 1e-15
        );
        // L = 0.5, N = 1, dx = 0.5 gives 2L^N + dx = 2.5; check plumbing of L^N, t^N
        let g = gamma_plus(0.5, 2, 0.25, 0.5, 2.0, 1.0).unwrap();
        assert_eq!(g.l_n, 1.0);
        assert_eq!(g.t_n, 1.0);
        assert_eq!(g.gamma_plus, gamma_plus_formula(2.25, 1.0, 2.0));
        assert!(gamma_plus(1.0, 0, 0.1, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_minus_examples() {
        let g = gamma_minus(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            g.gamma_tilde_minus,
            1.0 / (48.0 * 2f64.ln()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(48.0 * 2f64.ln(), 33.271, epsilon = 1e-3);
        assert_abs_diff_eq!(g.gamma_minus, g.gamma_tilde_minus / 3.0, epsilon = 1e-18);
        assert_abs_diff_eq!(g.eps_max_lower, 0.125 / 24.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eps_max_lower_proof, 0.75 * 0.125 / 18.0, epsilon = 1e-15);
        let g = gamma_minus(1.0, 1.0, 1.0, 0.5, 1e-4, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.eps_min_lower, 2e-4, epsilon = 1e-18);
        assert!(!g.window_empty);
        assert!(
            gamma_minus(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
                .unwrap()
                .window_empty
        );
        assert_eq!(
            gamma_minus(1.0, 1.0, 1.0, 1.5, 0.0, 1.0, 1.0).unwrap_err(),
            BoundsError::AlphaOutOfRange(1.5)
        );
    }

    #[test]
    fn error_lower_bound_examples() {
        assert_eq!(error_lower_bound(4.0, 2.0, 1.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            error_lower_bound(1.0, 1.0, 1.0, 0.5).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert!(matches!(
            error_lower_bound(1.0, 1.0, 1.0, 1.0),
            Err(BoundsError::ExponentOrder { .. })
        ));
    }

    #[test]
    fn transfer_examples() {
        let spec = TransferSpec {
            family_size_log2: 10.0,
            delta_star: 0.01,
            alpha: 1.0,
            eps0: 0.3,
        };
        let c = transfer_certificate(&spec, 0.05);
        assert!(c.window_ok);
        assert_eq!(c.asserted_bits, Some(10.0));
        let c = transfer_certificate(&spec, 0.005);
        assert!(!c.window_ok);
        assert_eq!(c.asserted_bits, None);
        // closed upper edge
        let eps = 0.1;
        let c = transfer_certificate(
            &TransferSpec {
                eps0: 3.0 * eps,
                ..spec
            },
            eps,
        );
        assert!(c.window_ok, "{c:?}");
    }

    #[test]
    fn resolution_labels() {
        assert_eq!(
            classify_resolution(&fit(1.0, 1.0), &fit(0.98, 1.0), 0.1),
            Resolution::High
        );
        assert_eq!(
            classify_resolution(&fit(1.0, 1.0), &fit(0.5, 1.0), 0.1),
            Resolution::Low
        );
        assert_eq!(
            classify_resolution(&fit(1.0, 0.5), &fit(1.0, 1.0), 0.1),
            Resolution::Inconclusive
        );
        assert_eq!(
            classify_resolution(&fit(1.0, 1.0), &fit(1.5, 1.0), 0.1),
            Resolution::Inconclusive
        );
    }

    proptest! {
        #[test]
        fn gamma_plus_monotone(l in 0.1f64..2.0, n in 1usize..500, dx in 1e-3f64..0.05, dt in 1e-3f64..0.05, m in 0.1f64..2.0, beta in 0.1f64..2.0, k in 1.01f64..2.0) {
            let g = |l, n, dx, m, beta| gamma_plus(l, n, dx, dt, m, beta).unwrap().gamma_plus;
            let base = g(l, n, dx, m, beta);
            prop_assert!(g(l, n, dx, m, beta * k) < base);
            prop_assert!(g(l, n, dx, m * k, beta) > base);
            prop_assert!(g(l * k, n, dx, m, beta) > base);
            prop_assert!(gamma_plus(l, n, dx * k, dt / k, m, beta).unwrap().gamma_plus > base);
        }

        #[test]
        fn gamma_minus_scaling(alpha in 0.01f64..=1.0, l in 0.1f64..3.0, t in 0.1f64..3.0) {
            let g = gamma_minus(l, t, 1.0, alpha, 0.0, 1.0, 1.0).unwrap();
            prop_assert!((g.gamma_minus * (1.0 + 2.0 * alpha) - g.gamma_tilde_minus).abs() <= 1e-15 * g.gamma_tilde_minus);
        }

        #[test]
        fn window_consistency(alpha in 0.05f64..=1.0, frac in 0.0f64..=1.0, eps_frac in 0.01f64..=1.0) {
            let g = gamma_minus(1.0, 1.0, 1.0, alpha, 0.0, 1.0, 1.0).unwrap();
            let eps = g.eps_max_lower * eps_frac;
            let delta = alpha * eps * frac;
            let spec = TransferSpec { family_size_log2: 3.0, delta_star: delta, alpha, eps0: (1.0 + 2.0 * alpha) * g.eps_max_lower };
            prop_assert!(transfer_certificate(&spec, eps).window_ok);
        }
    }
}
