use serde::{Deserialize, Serialize};

use super::datum::ContinuousDatum;
use super::pwl::PiecewiseLinearFn;
use super::ProfileError;

/// Uniform space-time mesh with cell centres `x_j = j·dx`, `j_min ≤ j ≤ j_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: f64,
    pub dt: f64,
    pub lambda: f64,
    pub j_min: i64,
    pub j_max: i64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(
        dx: f64,
        dt: f64,
        j_min: i64,
        j_max: i64,
        n_steps: usize,
    ) -> Result<Self, ProfileError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(ProfileError::InvalidGrid(format!(
                "dx must be positive, got {dx}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ProfileError::InvalidGrid(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if j_min > j_max {
            return Err(ProfileError::InvalidGrid(format!(
                "empty index window [{j_min}, {j_max}]"
            )));
        }
        Ok(GridSpec {
            dx,
            dt,
            lambda: dt / dx,
            j_min,
            j_max,
            n_steps,
        })
    }

    /// Symmetric window large enough for data supported in `[-radius, radius]`
    /// evolved for `n_steps`: the support cell, one padding cell, one cell of
    /// growth per step and one ghost cell on each side.
    pub fn covering(dx: f64, dt: f64, radius: f64, n_steps: usize) -> Result<Self, ProfileError> {
        let half = (radius / dx).ceil() as i64 + 1 + n_steps as i64 + 1;
        Self::new(dx, dt, -half, half, n_steps)
    }

    /// Same mesh, different step count.
    pub fn with_steps(self, n_steps: usize) -> Self {
        GridSpec { n_steps, ..self }
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn x(&self, j: i64) -> f64 {
        j as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (self.j_min..=self.j_max).map(|j| self.x(j)).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// `lambda == dt / dx` to 1e-15 relative.
    pub fn lambda_consistent(&self) -> bool {
        ((self.lambda - self.dt / self.dx) / self.lambda).abs() <= 1e-15
    }
}

/// Grid values `u_j` for `j` in the grid window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteProfile {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl DiscreteProfile {
    pub fn zeros(grid: GridSpec) -> Self {
        DiscreteProfile {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, ProfileError> {
        if values.len() != grid.len() {
            return Err(ProfileError::LengthMismatch {
                xs: grid.len(),
                ys: values.len(),
            });
        }
        Ok(DiscreteProfile { grid, values })
    }

    /// Value at grid index `j`; zero outside the window.
    pub fn at(&self, j: i64) -> f64 {
        if j < self.grid.j_min || j > self.grid.j_max {
            0.0
        } else {
            self.values[(j - self.grid.j_min) as usize]
        }
    }

    /// `Σ u_j dx`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx
    }

    /// Discrete L¹ norm with weight `dx`.
    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.dx
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `ℓ⁺(u) = max_j (u_{j+1} - u_j)_+ / dx` over the window.
    pub fn oslc_plus(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max)
            / self.grid.dx
    }

    /// Smallest and largest index with a nonzero value.
    pub fn support(&self) -> Option<(i64, i64)> {
        let lo = self.values.iter().position(|&v| v != 0.0)?;
        let hi = self.values.iter().rposition(|&v| v != 0.0)?;
        Some((lo as i64 + self.grid.j_min, hi as i64 + self.grid.j_min))
    }

    /// `max |x_j|` over nonzero cells.
    pub fn support_radius(&self) -> f64 {
        self.support().map_or(0.0, |(lo, hi)| {
            self.grid.x(lo).abs().max(self.grid.x(hi).abs())
        })
    }
}

/// Cell averages `(1/dx) ∫_{(j-1/2)dx}^{(j+1/2)dx} d` computed in closed form.
pub fn cell_average(d: &ContinuousDatum, grid: GridSpec) -> Result<DiscreteProfile, ProfileError> {
    let radius = d.class.support_radius;
    let needed = (radius / grid.dx - 1e-9).ceil() as i64 + 1;
    if grid.j_min > -needed || grid.j_max < needed {
        return Err(ProfileError::WindowTooSmall {
            needed_min: -needed,
            needed_max: needed,
            j_min: grid.j_min,
            j_max: grid.j_max,
        });
    }
    let pieces = d.profile.pieces();
    let mut values = vec![0.0; grid.len()];
    let mut k = 0;
    for (idx, j) in (grid.j_min..=grid.j_max).enumerate() {
        let lo = (j as f64 - 0.5) * grid.dx;
        let hi = (j as f64 + 0.5) * grid.dx;
        while k < pieces.len() && pieces[k].x1 <= lo {
            k += 1;
        }
        let mut acc = 0.0;
        let mut q = k;
        while q < pieces.len() && pieces[q].x0 < hi {
            let p = &pieces[q];
            let a = p.x0.max(lo);
            let b = p.x1.min(hi);
            if b > a {
                acc += 0.5 * (p.at(a) + p.at(b)) * (b - a);
            }
            q += 1;
        }
        values[idx] = acc / grid.dx;
    }
    Ok(DiscreteProfile { grid, values })
}

/// Piecewise-linear interpolant through `(x_j, u_j)`. Zero runs at the window
/// ends are trimmed to a single zero node, which leaves the function unchanged.
pub fn interpolate(u: &DiscreteProfile) -> PiecewiseLinearFn {
    let xs = u.grid.xs();
    PiecewiseLinearFn::from_samples(&xs, &u.values)
        .expect("grid abscissae are strictly increasing and values finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::datum::{DataClass, PiecewiseAffine};
    use crate::profiles::pwl::{l1_distance, measures};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(dx: f64, half: i64) -> GridSpec {
        GridSpec::new(dx, 0.5 * dx, -half, half, 0).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = GridSpec::new(0.1, 0.05, -3, 3, 10).unwrap();
        assert!(g.lambda_consistent());
        assert_eq!(g.len(), 7);
        assert!(GridSpec::new(0.1, 0.05, 3, -3, 10).is_err());
        assert!(GridSpec::new(0.0, 0.05, -3, 3, 10).is_err());
    }

    #[test]
    fn zero_datum_averages_to_zero() {
        let d = ContinuousDatum::zero(DataClass::new(1.0, 1.0, 1.0));
        let u = cell_average(&d, grid(0.5, 6)).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
        assert!(interpolate(&u).is_empty());
    }

    #[test]
    fn indicator_cell_averages() {
        let d = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[-1.0, 1.0], &[1.0]).unwrap(),
            DataClass::new(1.0, 2.0, 1.0),
        );
        let u = cell_average(&d, grid(0.5, 4)).unwrap();
        assert_eq!(u.at(-1), 1.0);
        assert_eq!(u.at(0), 1.0);
        assert_eq!(u.at(1), 1.0);
        assert_eq!(u.at(2), 0.5);
        assert_eq!(u.at(-2), 0.5);
        assert_eq!(u.at(3), 0.0);
    }

    #[test]
    fn tent_cell_average() {
        let tent = PiecewiseLinearFn::from_nodes(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        let d = ContinuousDatum::new(
            PiecewiseAffine::from_pwl(&tent),
            DataClass::new(2.0, 1.0, 1.0),
        );
        let u = cell_average(&d, grid(1.0, 4)).unwrap();
        // two trapezoids over [0.5, 1] and [1, 1.5], each of area 0.375
        let oracle = 2.0 * 0.5 * (0.5 + 1.0) / 2.0;
        assert_abs_diff_eq!(u.at(1), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(u.at(0), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(u.at(2), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn window_too_small_reports_range() {
        let d = ContinuousDatum::zero(DataClass::new(1.0, 1.0, 1.0));
        let err = cell_average(&d, grid(0.5, 2)).unwrap_err();
        assert_eq!(
            err,
            ProfileError::WindowTooSmall {
                needed_min: -3,
                needed_max: 3,
                j_min: -2,
                j_max: 2
            }
        );
    }

    #[test]
    fn interpolate_tent() {
        let g = grid(0.5, 1);
        let u = DiscreteProfile::from_values(g, vec![0.0, 1.0, 0.0]).unwrap();
        let f = interpolate(&u);
        assert_eq!(f.xs(), &[-0.5, 0.0, 0.5]);
        let m = measures(&f);
        assert_eq!(m.linf, 1.0);
        assert_abs_diff_eq!(m.l1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn discrete_measures() {
        let g = grid(0.5, 2);
        let u = DiscreteProfile::from_values(g, vec![0.0, 1.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(u.mass(), 0.0);
        assert_eq!(u.l1(), 1.0);
        assert_eq!(u.oslc_plus(), 2.0);
        assert_eq!(u.support(), Some((-1, 0)));
        assert_eq!(u.support_radius(), 0.5);
    }

    fn arb_datum() -> impl Strategy<Value = ContinuousDatum> {
        (2usize..10).prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n + 1),
                prop::collection::vec(-1.0f64..1.0, n + 1),
            )
                .prop_map(move |(mut xs, ys)| {
                    xs.sort_by(f64::total_cmp);
                    xs.dedup();
                    let ys = ys[..xs.len()].to_vec();
                    let mut ys = ys;
                    ys[0] = 0.0;
                    *ys.last_mut().unwrap() = 0.0;
                    let f = PiecewiseLinearFn::new(xs, ys).unwrap();
                    ContinuousDatum::new(
                        PiecewiseAffine::from_pwl(&f),
                        DataClass::new(1.0, 2.0, 1.0),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn averaging_then_interpolating_preserves_mass(d in arb_datum(), k in 3u32..7) {
            let dx = 1.0 / (1 << k) as f64;
            let g = GridSpec::covering(dx, dx, 1.0, 0).unwrap();
            let u = cell_average(&d, g).unwrap();
            let f = interpolate(&u);
            let mass = d.profile.integral();
            prop_assert!((u.mass() - mass).abs() <= 1e-12);
            prop_assert!((f.integral() - mass).abs() <= 1e-12);
            prop_assert!(u.l1() <= d.profile.l1() + 1e-12);
        }

        #[test]
        fn interpolation_is_linear(a in prop::collection::vec(-1.0f64..1.0, 9), b in prop::collection::vec(-1.0f64..1.0, 9), s in -2.0f64..2.0, t in -2.0f64..2.0) {
            let g = grid(0.25, 4);
            let mut va = a.clone(); va[0] = 0.0; va[8] = 0.0;
            let mut vb = b.clone(); vb[0] = 0.0; vb[8] = 0.0;
            let vc: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| s * x + t * y).collect();
            let fa = interpolate(&DiscreteProfile::from_values(g, va).unwrap());
            let fb = interpolate(&DiscreteProfile::from_values(g, vb).unwrap());
            let fc = interpolate(&DiscreteProfile::from_values(g, vc).unwrap());
            for j in -4..4 {
                let x = (j as f64 + 0.5) * 0.25;
                prop_assert!((fc.eval(x) - (s * fa.eval(x) + t * fb.eval(x))).abs() <= 1e-14);
            }
            prop_assert!(l1_distance(&fc, &fa.combine(s, &fb, t)) <= 1e-13);
        }
    }
}
