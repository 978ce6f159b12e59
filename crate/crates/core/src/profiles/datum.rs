use serde::{Deserialize, Serialize};

use super::pwl::{l1_distance_pieces, AffinePieces, Piece, PiecewiseLinearFn};
use super::ProfileError;

/// Piecewise-affine function, possibly discontinuous at piece boundaries, zero
/// outside its pieces. Used for initial data (piecewise constant or linear).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Piece>", into = "Vec<Piece>")]
pub struct PiecewiseAffine {
    pieces: Vec<Piece>,
}

impl TryFrom<Vec<Piece>> for PiecewiseAffine {
    type Error = ProfileError;

    fn try_from(pieces: Vec<Piece>) -> Result<Self, Self::Error> {
        PiecewiseAffine::new(pieces)
    }
}

impl From<PiecewiseAffine> for Vec<Piece> {
    fn from(f: PiecewiseAffine) -> Self {
        f.pieces
    }
}

impl PiecewiseAffine {
    pub fn new(pieces: Vec<Piece>) -> Result<Self, ProfileError> {
        for (k, p) in pieces.iter().enumerate() {
            if ![p.x0, p.x1, p.y0, p.y1].iter().all(|v| v.is_finite()) {
                return Err(ProfileError::NonFinite(k));
            }
            if !(p.x1 > p.x0) {
                return Err(ProfileError::NodesNotIncreasing(k));
            }
            if k > 0 && p.x0 < pieces[k - 1].x1 {
                return Err(ProfileError::NodesNotIncreasing(k));
            }
        }
        Ok(PiecewiseAffine { pieces })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Constant `values[k]` on `[breaks[k], breaks[k + 1])`.
    pub fn piecewise_constant(breaks: &[f64], values: &[f64]) -> Result<Self, ProfileError> {
        if breaks.len() != values.len() + 1 {
            return Err(ProfileError::LengthMismatch {
                xs: breaks.len(),
                ys: values.len(),
            });
        }
        Self::new(
            breaks
                .windows(2)
                .zip(values)
                .map(|(w, &v)| Piece {
                    x0: w[0],
                    x1: w[1],
                    y0: v,
                    y1: v,
                })
                .collect(),
        )
    }

    pub fn from_pwl(f: &PiecewiseLinearFn) -> Self {
        PiecewiseAffine {
            pieces: (0..f.piece_count()).map(|k| f.piece(k)).collect(),
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// `[first x0, last x1]`, `None` for the zero function.
    pub fn extent(&self) -> Option<(f64, f64)> {
        Some((self.pieces.first()?.x0, self.pieces.last()?.x1))
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.x1 <= x);
        match self.pieces.get(k) {
            Some(p) if p.x0 <= x => p.at(x),
            _ => 0.0,
        }
    }

    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| 0.5 * (p.y0 + p.y1) * (p.x1 - p.x0))
            .sum()
    }

    /// `∫_{lo}^{hi}` of the function, exact.
    pub fn integral_over(&self, lo: f64, hi: f64) -> f64 {
        let start = self.pieces.partition_point(|p| p.x1 <= lo);
        let mut total = 0.0;
        for p in &self.pieces[start..] {
            if p.x0 >= hi {
                break;
            }
            total += piece_integral(p, lo, hi);
        }
        total
    }

    pub fn l1(&self) -> f64 {
        l1_distance_pieces(self, &PiecewiseAffine::zero())
    }

    pub fn linf(&self) -> f64 {
        self.pieces
            .iter()
            .fold(0.0_f64, |m, p| m.max(p.y0.abs()).max(p.y1.abs()))
    }

    /// Total variation on the line, counting every jump including the jumps to
    /// the zero extension.
    pub fn tv(&self) -> f64 {
        let mut tv = 0.0;
        let mut prev_x = f64::NEG_INFINITY;
        let mut prev_y = 0.0_f64;
        for p in &self.pieces {
            if p.x0 > prev_x {
                // gap of zeros
                tv += prev_y.abs();
                prev_y = 0.0;
            }
            tv += (p.y0 - prev_y).abs() + (p.y1 - p.y0).abs();
            prev_x = p.x1;
            prev_y = p.y1;
        }
        tv + prev_y.abs()
    }

    pub fn reflected(&self) -> Self {
        PiecewiseAffine {
            pieces: self
                .pieces
                .iter()
                .rev()
                .map(|p| Piece {
                    x0: -p.x1,
                    x1: -p.x0,
                    y0: p.y1,
                    y1: p.y0,
                })
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        PiecewiseAffine {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    y0: a * p.y0,
                    y1: a * p.y1,
                    ..*p
                })
                .collect(),
        }
    }

    /// Same function with zero-filled gaps, so consecutive pieces touch.
    pub fn contiguous(&self) -> Self {
        let mut out: Vec<Piece> = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            if let Some(last) = out.last() {
                if p.x0 > last.x1 {
                    out.push(Piece {
                        x0: last.x1,
                        x1: p.x0,
                        y0: 0.0,
                        y1: 0.0,
                    });
                }
            }
            out.push(*p);
        }
        PiecewiseAffine { pieces: out }
    }
}

fn piece_integral(p: &Piece, lo: f64, hi: f64) -> f64 {
    let a = p.x0.max(lo);
    let b = p.x1.min(hi);
    if b <= a {
        return 0.0;
    }
    0.5 * (p.at(a) + p.at(b)) * (b - a)
}

impl AffinePieces for PiecewiseAffine {
    fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    #[inline]
    fn piece(&self, k: usize) -> Piece {
        self.pieces[k]
    }
}

/// Budgets of the data class `D_[L, m, M]`, optionally with a TV bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataClass {
    pub support_radius: f64,
    pub l1_budget: f64,
    pub linf_budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_bound: Option<f64>,
}

impl DataClass {
    pub fn new(support_radius: f64, l1_budget: f64, linf_budget: f64) -> Self {
        DataClass {
            support_radius,
            l1_budget,
            linf_budget,
            tv_bound: None,
        }
    }

    pub fn with_tv_bound(mut self, tv: f64) -> Self {
        self.tv_bound = Some(tv);
        self
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ClassViolation {
    #[error("support [{lo}, {hi}] leaves [-{radius}, {radius}]")]
    Support { lo: f64, hi: f64, radius: f64 },
    #[error("L1 norm {value} exceeds budget {budget}")]
    L1 { value: f64, budget: f64 },
    #[error("Linf norm {value} exceeds budget {budget}")]
    Linf { value: f64, budget: f64 },
    #[error("total variation {value} exceeds bound {bound}")]
    TotalVariation { value: f64, bound: f64 },
}

/// An initial datum together with the class it claims to belong to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDatum {
    pub profile: PiecewiseAffine,
    pub class: DataClass,
}

impl ContinuousDatum {
    pub fn new(profile: PiecewiseAffine, class: DataClass) -> Self {
        ContinuousDatum { profile, class }
    }

    pub fn zero(class: DataClass) -> Self {
        Self::new(PiecewiseAffine::zero(), class)
    }

    /// Checks all declared constraints without tolerance.
    pub fn check_class(&self) -> Result<(), ClassViolation> {
        let c = &self.class;
        if let Some((lo, hi)) = self.profile.extent() {
            if lo < -c.support_radius || hi > c.support_radius {
                return Err(ClassViolation::Support {
                    lo,
                    hi,
                    radius: c.support_radius,
                });
            }
        }
        let l1 = self.profile.l1();
        if l1 > c.l1_budget {
            return Err(ClassViolation::L1 {
                value: l1,
                budget: c.l1_budget,
            });
        }
        let linf = self.profile.linf();
        if linf > c.linf_budget {
            return Err(ClassViolation::Linf {
                value: linf,
                budget: c.linf_budget,
            });
        }
        if let Some(bound) = c.tv_bound {
            let tv = self.profile.tv();
            if tv > bound {
                return Err(ClassViolation::TotalVariation { value: tv, bound });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn piecewise_constant_basics() {
        let d = PiecewiseAffine::piecewise_constant(&[-1.0, 0.0, 1.0], &[1.0, -2.0]).unwrap();
        assert_eq!(d.eval(-0.5), 1.0);
        assert_eq!(d.eval(0.0), -2.0);
        assert_eq!(d.eval(1.0), 0.0);
        assert_eq!(d.integral(), -1.0);
        assert_eq!(d.l1(), 3.0);
        assert_eq!(d.linf(), 2.0);
        // 0 -> 1 -> -2 -> 0
        assert_eq!(d.tv(), 1.0 + 3.0 + 2.0);
        assert_abs_diff_eq!(d.integral_over(-0.5, 0.5), 0.5 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tv_counts_gaps() {
        let d = PiecewiseAffine::new(vec![
            Piece {
                x0: 0.0,
                x1: 1.0,
                y0: 1.0,
                y1: 1.0,
            },
            Piece {
                x0: 2.0,
                x1: 3.0,
                y0: 1.0,
                y1: 1.0,
            },
        ])
        .unwrap();
        assert_eq!(d.tv(), 4.0);
        let c = d.contiguous();
        assert_eq!(c.pieces().len(), 3);
        assert_eq!(c.tv(), 4.0);
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let r = PiecewiseAffine::new(vec![
            Piece {
                x0: 0.0,
                x1: 1.0,
                y0: 1.0,
                y1: 1.0,
            },
            Piece {
                x0: 0.5,
                x1: 2.0,
                y0: 1.0,
                y1: 1.0,
            },
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn reflection() {
        let d = PiecewiseAffine::new(vec![Piece {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 2.0,
        }])
        .unwrap();
        let r = d.reflected();
        assert_eq!(r.eval(-0.5), 1.0);
        assert_eq!(r.eval(-1.0), 2.0);
        assert_eq!(r.integral(), d.integral());
    }

    #[test]
    fn class_checks() {
        let class = DataClass::new(1.0, 1.0, 1.0);
        let ok = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[-1.0, 0.0], &[1.0]).unwrap(),
            class,
        );
        assert!(ok.check_class().is_ok());
        let wide = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[-1.5, 0.0], &[0.1]).unwrap(),
            class,
        );
        assert!(matches!(
            wide.check_class(),
            Err(ClassViolation::Support { .. })
        ));
        let heavy = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[-1.0, 1.0], &[0.9]).unwrap(),
            class,
        );
        assert!(matches!(
            heavy.check_class(),
            Err(ClassViolation::L1 { .. })
        ));
        let tall = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[0.0, 0.1], &[2.0]).unwrap(),
            class,
        );
        assert!(matches!(
            tall.check_class(),
            Err(ClassViolation::Linf { .. })
        ));
        let rough = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[0.0, 0.1, 0.2, 0.3], &[1.0, -1.0, 1.0]).unwrap(),
            class.with_tv_bound(2.0),
        );
        assert!(matches!(
            rough.check_class(),
            Err(ClassViolation::TotalVariation { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let d = ContinuousDatum::new(
            PiecewiseAffine::piecewise_constant(&[-0.7, 0.1, 0.3], &[0.25, -1.0 / 3.0]).unwrap(),
            DataClass::new(1.0, 1.0, 1.0).with_tv_bound(3.0),
        );
        let s = serde_json::to_string(&d).unwrap();
        let back: ContinuousDatum = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
    }
}
