use serde::{Deserialize, Serialize};

use super::ProfileError;

/// One affine piece `y(x) = y0 + (y1 - y0) (x - x0) / (x1 - x0)` on `[x0, x1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Piece {
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        if x == self.x0 {
            self.y0
        } else if x == self.x1 {
            self.y1
        } else {
            self.y0 + (self.y1 - self.y0) * (x - self.x0) / (self.x1 - self.x0)
        }
    }

    #[inline]
    pub fn slope(&self) -> f64 {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }
}

/// Functions on the line that are affine on finitely many ordered pieces and
/// vanish outside them. Pieces must be sorted, non-overlapping and of positive
/// length; gaps between pieces are zero.
pub trait AffinePieces {
    fn piece_count(&self) -> usize;
    fn piece(&self, k: usize) -> Piece;
}

/// Exact `∫ |e|` for `e` affine on an interval of width `w` with end values `e0`, `e1`.
#[inline]
pub fn abs_integral_affine(e0: f64, e1: f64, w: f64) -> f64 {
    if (e0 >= 0.0 && e1 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0) {
        0.5 * (e0.abs() + e1.abs()) * w
    } else {
        // sign change: two triangles meeting at the root
        let (a, b) = (e0.abs(), e1.abs());
        0.5 * (a * a + b * b) / (a + b) * w
    }
}

struct Cursor<'a, F: AffinePieces + ?Sized> {
    f: &'a F,
    k: usize,
}

impl<'a, F: AffinePieces + ?Sized> Cursor<'a, F> {
    /// Skips pieces ending at or before `x`.
    fn advance(&mut self, x: f64) {
        while self.k < self.f.piece_count() && self.f.piece(self.k).x1 <= x {
            self.k += 1;
        }
    }

    /// The piece covering `[x, ·)`, if any, and the next breakpoint after `x`.
    fn local(&self, x: f64) -> (Option<Piece>, f64) {
        if self.k >= self.f.piece_count() {
            return (None, f64::INFINITY);
        }
        let p = self.f.piece(self.k);
        if p.x0 <= x {
            (Some(p), p.x1)
        } else {
            (None, p.x0)
        }
    }
}

/// Exact `∫ |a - b| dx` over the real line.
///
/// Breakpoints of both functions are merged, each resulting interval carries an
/// affine difference, and sign changes are split in closed form.
pub fn l1_distance_pieces<A, B>(a: &A, b: &B) -> f64
where
    A: AffinePieces + ?Sized,
    B: AffinePieces + ?Sized,
{
    let (na, nb) = (a.piece_count(), b.piece_count());
    let start = match (na, nb) {
        (0, 0) => return 0.0,
        (0, _) => b.piece(0).x0,
        (_, 0) => a.piece(0).x0,
        _ => a.piece(0).x0.min(b.piece(0).x0),
    };
    let end = match (na, nb) {
        (0, _) => b.piece(nb - 1).x1,
        (_, 0) => a.piece(na - 1).x1,
        _ => a.piece(na - 1).x1.max(b.piece(nb - 1).x1),
    };
    let mut ca = Cursor { f: a, k: 0 };
    let mut cb = Cursor { f: b, k: 0 };
    let mut x = start;
    let mut total = 0.0;
    while x < end {
        ca.advance(x);
        cb.advance(x);
        let (pa, na_next) = ca.local(x);
        let (pb, nb_next) = cb.local(x);
        let next = na_next.min(nb_next).min(end);
        if next <= x {
            break;
        }
        let (a0, a1) = pa.map_or((0.0, 0.0), |p| (p.at(x), p.at(next)));
        let (b0, b1) = pb.map_or((0.0, 0.0), |p| (p.at(x), p.at(next)));
        if pa.is_some() || pb.is_some() {
            total += abs_integral_affine(a0 - b0, a1 - b1, next - x);
        }
        x = next;
    }
    total
}

/// Continuous piecewise-linear function through strictly increasing nodes,
/// extended by zero outside `[first x, last x]`.
///
/// Reconstructions of compactly supported grid data start and end with a zero
/// node, so they are continuous on the whole line. Other node sets produce
/// jumps at the two ends, which [`measures`] counts in the total variation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinearFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinearFn {
    type Error = ProfileError;

    fn try_from(nodes: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        let (xs, ys) = nodes.into_iter().unzip();
        PiecewiseLinearFn::new(xs, ys)
    }
}

impl From<PiecewiseLinearFn> for Vec<(f64, f64)> {
    fn from(f: PiecewiseLinearFn) -> Self {
        f.xs.into_iter().zip(f.ys).collect()
    }
}

impl PiecewiseLinearFn {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, ProfileError> {
        if xs.len() != ys.len() {
            return Err(ProfileError::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
            });
        }
        if let Some(k) = xs.iter().chain(ys.iter()).position(|v| !v.is_finite()) {
            return Err(ProfileError::NonFinite(k % xs.len().max(1)));
        }
        if let Some(k) = xs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(ProfileError::NodesNotIncreasing(k + 1));
        }
        Ok(PiecewiseLinearFn { xs, ys })
    }

    pub fn zero() -> Self {
        PiecewiseLinearFn::default()
    }

    pub fn from_nodes(nodes: &[(f64, f64)]) -> Result<Self, ProfileError> {
        Self::try_from(nodes.to_vec())
    }

    /// Builds the interpolant of samples on an increasing grid, dropping zero
    /// runs at both ends except the node next to the support.
    pub fn from_samples(xs: &[f64], ys: &[f64]) -> Result<Self, ProfileError> {
        let first = ys.iter().position(|&y| y != 0.0);
        let last = ys.iter().rposition(|&y| y != 0.0);
        match (first, last) {
            (Some(lo), Some(hi)) => {
                let lo = lo.saturating_sub(1);
                let hi = (hi + 1).min(ys.len() - 1);
                Self::new(xs[lo..=hi].to_vec(), ys[lo..=hi].to_vec())
            }
            _ => Ok(Self::zero()),
        }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 0 || x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&xi| xi <= x);
        if k == 0 {
            return self.ys[0];
        }
        if k >= n {
            return self.ys[n - 1];
        }
        self.piece(k - 1).at(x)
    }

    /// Both end nodes are zero, so the zero extension has no jumps.
    pub fn is_continuous(&self) -> bool {
        self.ys.first().is_none_or(|&y| y == 0.0) && self.ys.last().is_none_or(|&y| y == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        PiecewiseLinearFn {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| a * y).collect(),
        }
    }

    pub fn reflected(&self) -> Self {
        PiecewiseLinearFn {
            xs: self.xs.iter().rev().map(|x| -x).collect(),
            ys: self.ys.iter().rev().copied().collect(),
        }
    }

    /// `a·self + b·other` on the merged node set. Exact for continuous inputs;
    /// for inputs with end jumps the jump locations become nodes of the result
    /// and the jump itself is replaced by the ramp to the neighbouring node.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mut xs: Vec<f64> = self.xs.iter().chain(other.xs.iter()).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let ys = xs
            .iter()
            .map(|&x| a * self.eval(x) + b * other.eval(x))
            .collect();
        PiecewiseLinearFn { xs, ys }
    }

    pub fn integral(&self) -> f64 {
        (0..self.piece_count())
            .map(|k| {
                let p = self.piece(k);
                0.5 * (p.y0 + p.y1) * (p.x1 - p.x0)
            })
            .sum()
    }
}

impl AffinePieces for PiecewiseLinearFn {
    fn piece_count(&self) -> usize {
        self.xs.len().saturating_sub(1)
    }

    #[inline]
    fn piece(&self, k: usize) -> Piece {
        Piece {
            x0: self.xs[k],
            x1: self.xs[k + 1],
            y0: self.ys[k],
            y1: self.ys[k + 1],
        }
    }
}

/// Exact L¹ distance between two reconstructions.
pub fn l1_distance(a: &PiecewiseLinearFn, b: &PiecewiseLinearFn) -> f64 {
    l1_distance_pieces(a, b)
}

/// Norms and one-sided slope of a reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub l1: f64,
    pub linf: f64,
    /// Includes the jumps to the zero extension at both ends.
    pub tv: f64,
    /// Largest positive segment slope; zero for nonincreasing functions.
    pub oslc_plus: f64,
}

pub fn measures(a: &PiecewiseLinearFn) -> Measures {
    let l1 = l1_distance_pieces(a, &PiecewiseLinearFn::zero());
    let linf = a.ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let tv = match (a.ys.first(), a.ys.last()) {
        (Some(first), Some(last)) => {
            first.abs() + last.abs() + a.ys.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
        }
        _ => 0.0,
    };
    let oslc_plus = (0..a.piece_count())
        .map(|k| a.piece(k).slope())
        .fold(0.0_f64, f64::max);
    Measures {
        l1,
        linf,
        tv,
        oslc_plus,
    }
}

/// `‖v‖_∞ ≤ sqrt(2 B ‖v‖_1)` for a continuous compactly supported `v` with
/// `Dv ≤ B`. Returns `None` when the hypotheses do not apply (end jumps), else
/// the slack `sqrt(2 B l1) - linf` with `B = oslc_plus`.
pub fn linf_from_slope_slack(a: &PiecewiseLinearFn, bound: f64) -> Option<f64> {
    if !a.is_continuous() {
        return None;
    }
    let m = measures(a);
    if m.oslc_plus > bound {
        return None;
    }
    Some((2.0 * bound * m.l1).sqrt() - m.linf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pwl(nodes: &[(f64, f64)]) -> PiecewiseLinearFn {
        PiecewiseLinearFn::from_nodes(nodes).unwrap()
    }

    fn tent() -> PiecewiseLinearFn {
        pwl(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)])
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(matches!(
            PiecewiseLinearFn::from_nodes(&[(0.0, 1.0), (0.0, 2.0)]),
            Err(ProfileError::NodesNotIncreasing(1))
        ));
        assert!(PiecewiseLinearFn::new(vec![0.0], vec![]).is_err());
        assert!(PiecewiseLinearFn::from_nodes(&[(0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn distance_examples() {
        let z = PiecewiseLinearFn::zero();
        assert_eq!(l1_distance(&tent(), &tent()), 0.0);
        assert_abs_diff_eq!(l1_distance(&tent(), &z), 1.0, epsilon = 1e-15);
        let seg = pwl(&[(0.0, -1.0), (1.0, 1.0)]);
        assert_abs_diff_eq!(l1_distance(&seg, &z), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn distance_with_disjoint_supports() {
        let a = tent();
        let b = pwl(&[(5.0, 0.0), (6.0, 2.0), (7.0, 0.0)]);
        assert_abs_diff_eq!(l1_distance(&a, &b), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn distance_counts_end_jumps() {
        // constant 1 on [0, 2] vs the tent
        let box_ = pwl(&[(0.0, 1.0), (2.0, 1.0)]);
        assert_abs_diff_eq!(l1_distance(&box_, &tent()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn measures_examples() {
        let z = measures(&PiecewiseLinearFn::zero());
        assert_eq!(
            z,
            Measures {
                l1: 0.0,
                linf: 0.0,
                tv: 0.0,
                oslc_plus: 0.0
            }
        );
        let t = measures(&tent());
        assert_abs_diff_eq!(t.l1, 1.0, epsilon = 1e-15);
        assert_eq!(t.linf, 1.0);
        assert_eq!(t.tv, 2.0);
        assert_eq!(t.oslc_plus, 1.0);
        let step = measures(&pwl(&[(0.0, 1.0), (1.0, 0.0)]));
        assert_eq!(step.oslc_plus, 0.0);
        assert_eq!(step.tv, 2.0);
    }

    #[test]
    fn eval_and_integral() {
        let t = tent();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(0.5), 0.5);
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(1.5), 0.5);
        assert_eq!(t.eval(2.5), 0.0);
        assert_eq!(t.integral(), 1.0);
    }

    #[test]
    fn from_samples_trims_zero_runs() {
        let xs: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let ys = [0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0];
        let f = PiecewiseLinearFn::from_samples(&xs, &ys).unwrap();
        assert_eq!(f.xs(), &[2.0, 3.0, 4.0, 5.0]);
        assert!(f.is_continuous());
        let zero = PiecewiseLinearFn::from_samples(&xs, &[0.0; 8]).unwrap();
        assert!(zero.is_empty());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let f = pwl(&[(-0.1, 0.0), (0.3, 1.0 / 3.0), (0.7, -2.0e-17), (1.0, 0.0)]);
        let s = serde_json::to_string(&f).unwrap();
        let back: PiecewiseLinearFn = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        assert!(serde_json::from_str::<PiecewiseLinearFn>("[[1.0, 0.0], [0.0, 0.0]]").is_err());
    }

    #[test]
    fn slope_bound_on_tent() {
        // tent: l1 = 1, slope 1, linf 1 <= sqrt(2)
        let slack = linf_from_slope_slack(&tent(), 1.0).unwrap();
        assert!(slack >= 0.0);
        assert!(linf_from_slope_slack(&pwl(&[(0.0, 1.0), (1.0, 0.0)]), 1.0).is_none());
    }

    fn arb_pwl() -> impl Strategy<Value = PiecewiseLinearFn> {
        (1usize..12, -3.0f64..3.0).prop_flat_map(|(n, x0)| {
            (
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(-2.0f64..2.0, n + 1),
            )
                .prop_map(move |(gaps, mut ys)| {
                    let mut xs = vec![x0];
                    for g in gaps {
                        let last = *xs.last().unwrap();
                        xs.push(last + g);
                    }
                    ys[0] = 0.0;
                    *ys.last_mut().unwrap() = 0.0;
                    PiecewiseLinearFn::new(xs, ys).unwrap()
                })
        })
    }

    /// Fine midpoint quadrature of `|a - b|` split at every node; independent of
    /// the closed form above.
    fn quadrature_distance(a: &PiecewiseLinearFn, b: &PiecewiseLinearFn) -> f64 {
        let mut xs: Vec<f64> = a.xs().iter().chain(b.xs()).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut total = 0.0;
        for w in xs.windows(2) {
            let m = 2000;
            let h = (w[1] - w[0]) / m as f64;
            for k in 0..m {
                let x = w[0] + (k as f64 + 0.5) * h;
                total += (a.eval(x) - b.eval(x)).abs() * h;
            }
        }
        total
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in arb_pwl(), b in arb_pwl(), c in arb_pwl()) {
            let ab = l1_distance(&a, &b);
            let bc = l1_distance(&b, &c);
            let ac = l1_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ab - l1_distance(&b, &a)).abs() <= 1e-12);
        }

        #[test]
        fn distance_matches_quadrature(a in arb_pwl(), b in arb_pwl()) {
            let exact = l1_distance(&a, &b);
            let quad = quadrature_distance(&a, &b);
            prop_assert!((exact - quad).abs() <= 1e-5 * (1.0 + quad), "{exact} vs {quad}");
        }

        #[test]
        fn combine_is_pointwise_linear(a in arb_pwl(), b in arb_pwl(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
            let c = a.combine(s, &b, t);
            for w in c.xs().windows(2) {
                let x = 0.5 * (w[0] + w[1]);
                prop_assert!((c.eval(x) - (s * a.eval(x) + t * b.eval(x))).abs() <= 1e-12);
            }
        }

        #[test]
        fn slope_bound_gives_linf_bound(a in arb_pwl()) {
            let m = measures(&a);
            if m.oslc_plus > 0.0 {
                let slack = linf_from_slope_slack(&a, m.oslc_plus).unwrap();
                prop_assert!(slack >= -1e-12, "slack {slack}");
            }
        }
    }
}
