//! ε-entropy of finite families in L¹: packing and covering counts from a
//! shared distance matrix, cover transfer between paired samples, and
//! power-law fits of entropy against `1/ε`.
//!
//! Covering balls are centred at family members only, so `h_upper_bits`
//! over-counts the member-centred minimum and remains an upper bound for the
//! finite family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::profiles::{l1_distance, PiecewiseLinearFn};

/// Symmetric matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Fills the upper triangle in parallel and mirrors it.
    pub fn from_fn<F>(n: usize, dist: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| dist(i, j)).collect())
            .collect();
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (k, d) in row.into_iter().enumerate() {
                let j = i + 1 + k;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceMatrix { n, data }
    }

    /// Exact L¹ distances.
    pub fn l1(family: &[PiecewiseLinearFn]) -> Self {
        Self::from_fn(family.len(), |i, j| l1_distance(&family[i], &family[j]))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest and smallest nonzero off-diagonal entries.
    pub fn spread(&self) -> Option<(f64, f64)> {
        let mut max = 0.0_f64;
        let mut min = f64::INFINITY;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = self.get(i, j);
                max = max.max(d);
                if d > 0.0 {
                    min = min.min(d);
                }
            }
        }
        (min.is_finite()).then_some((max, min))
    }
}

/// Greedy index-order packing: members pairwise more than `2·eps` apart.
pub fn packing_set(dm: &DistanceMatrix, eps: f64) -> Vec<usize> {
    let two_eps = 2.0 * eps;
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..dm.len() {
        let row = dm.row(i);
        if kept.iter().all(|&k| row[k] > two_eps) {
            kept.push(i);
        }
    }
    kept
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub radius: f64,
    pub centers: Vec<usize>,
    /// Center assigned to each member.
    pub assignment: Vec<usize>,
}

/// Greedy set cover with member-centred balls of radius `eps`: pick the
/// member covering the most uncovered members, lowest index on ties.
pub fn greedy_cover(dm: &DistanceMatrix, eps: f64) -> Cover {
    let n = dm.len();
    let mut covered = vec![false; n];
    let mut assignment = vec![usize::MAX; n];
    let mut centers = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let (best, _) = (0..n)
            .map(|c| {
                let gain = dm
                    .row(c)
                    .iter()
                    .zip(&covered)
                    .filter(|(&d, &cov)| !cov && d <= eps)
                    .count();
                (c, gain)
            })
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        centers.push(best);
        for (j, &d) in dm.row(best).iter().enumerate() {
            if !covered[j] && d <= eps {
                covered[j] = true;
                assignment[j] = best;
                remaining -= 1;
            }
        }
    }
    Cover {
        radius: eps,
        centers,
        assignment,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub eps: f64,
    pub sample_count: usize,
    pub packing_count: usize,
    pub covering_count: usize,
    pub h_lower_bits: f64,
    pub h_upper_bits: f64,
}

pub fn packing_count(dm: &DistanceMatrix, eps: f64) -> usize {
    packing_set(dm, eps).len()
}

pub fn covering_count(dm: &DistanceMatrix, eps: f64) -> usize {
    greedy_cover(dm, eps).centers.len()
}

pub fn estimate(dm: &DistanceMatrix, eps: f64) -> EntropyEstimate {
    let p = packing_count(dm, eps).max(1);
    let c = covering_count(dm, eps).max(1);
    EntropyEstimate {
        eps,
        sample_count: dm.len(),
        packing_count: p,
        covering_count: c,
        h_lower_bits: (p as f64).log2(),
        h_upper_bits: (c as f64).log2(),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverTransferError {
    #[error("exact sample {sample}: pairing gap {gap} exceeds delta {delta}")]
    PairingGap { sample: usize, gap: f64, delta: f64 },
    #[error("numerical sample {sample} is not covered at radius {delta}")]
    Uncovered { sample: usize, delta: f64 },
    #[error("exact sample {sample}: distance {distance} to center exceeds {radius}")]
    ChainBroken {
        sample: usize,
        distance: f64,
        radius: f64,
    },
    #[error("pairing has {pairing} entries for {exact} exact samples")]
    PairingLength { pairing: usize, exact: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub delta: f64,
    pub radius: f64,
    pub centers: usize,
    /// Center used for each exact sample.
    pub assignment: Vec<usize>,
    /// `2δ - ‖s_i - center‖₁` per exact sample.
    pub slack: Vec<f64>,
}

/// Certifies that member-centred balls of radius `delta` covering the
/// numerical sample also cover the exact sample at radius `2·delta`, by
/// checking `‖s - c‖ ≤ ‖s - v‖ + ‖v - c‖ ≤ 2δ` on every exact sample `s`
/// with paired numerical `v = numerical[pairing[i]]`.
pub fn cover_transfer(
    exact: &[PiecewiseLinearFn],
    numerical: &[PiecewiseLinearFn],
    pairing: &[usize],
    centers: &[usize],
    delta: f64,
) -> Result<CoverCertificate, CoverTransferError> {
    if pairing.len() != exact.len() {
        return Err(CoverTransferError::PairingLength {
            pairing: pairing.len(),
            exact: exact.len(),
        });
    }
    let radius = 2.0 * delta;
    let per_sample: Vec<Result<(usize, f64), CoverTransferError>> = exact
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let v = &numerical[pairing[i]];
            let gap = l1_distance(s, v);
            if gap > delta {
                return Err(CoverTransferError::PairingGap {
                    sample: i,
                    gap,
                    delta,
                });
            }
            let center = centers
                .iter()
                .copied()
                .find(|&c| l1_distance(v, &numerical[c]) <= delta)
                .ok_or(CoverTransferError::Uncovered {
                    sample: pairing[i],
                    delta,
                })?;
            let distance = l1_distance(s, &numerical[center]);
            if distance > radius {
                return Err(CoverTransferError::ChainBroken {
                    sample: i,
                    distance,
                    radius,
                });
            }
            Ok((center, radius - distance))
        })
        .collect();
    let mut assignment = Vec::with_capacity(exact.len());
    let mut slack = Vec::with_capacity(exact.len());
    for r in per_sample {
        let (c, s) = r?;
        assignment.push(c);
        slack.push(s);
    }
    Ok(CoverCertificate {
        delta,
        radius,
        centers: centers.len(),
        assignment,
        slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("bits must be positive and eps positive at point {0}")]
    NonPositive(usize),
    #[error("eps values are not distinct")]
    DegenerateEps,
}

/// Least squares of `log(bits) = log(constant) + exponent·log(1/eps)`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if let Some(k) = points.iter().position(|&(e, b)| !(e > 0.0 && b > 0.0)) {
        return Err(FitError::NonPositive(k));
    }
    let xs: Vec<f64> = points.iter().map(|&(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, b)| b.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 1e-300 {
        return Err(FitError::DegenerateEps);
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - exponent * x;
            r * r
        })
        .sum();
    let r_squared = if syy <= 1e-300 {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    Ok(ScalingFit {
        points: points.to_vec(),
        exponent,
        constant: intercept.exp(),
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn line(pos: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(pos.len(), |i, j| (pos[i] - pos[j]).abs())
    }

    fn bump(center: f64, height: f64) -> PiecewiseLinearFn {
        PiecewiseLinearFn::from_nodes(&[(center - 0.5, 0.0), (center, height), (center + 0.5, 0.0)])
            .unwrap()
    }

    #[test]
    fn singleton() {
        let dm = line(&[0.0]);
        for eps in [0.01, 1.0] {
            let e = estimate(&dm, eps);
            assert_eq!((e.packing_count, e.covering_count), (1, 1));
        }
    }

    #[test]
    fn packing_examples() {
        let dm = DistanceMatrix::from_fn(3, |_, _| 2.5);
        assert_eq!(packing_count(&dm, 1.0), 3);
        assert_eq!(packing_count(&dm, 1.5), 1);
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_count(&line(&[0.0, 0.9, 1.8]), 1.0), 1);
        assert_eq!(greedy_cover(&line(&[0.0, 0.9, 1.8]), 1.0).centers, vec![1]);
        assert_eq!(covering_count(&line(&[0.0, 3.0]), 1.0), 2);
    }

    #[test]
    fn counts_shrink_with_eps_on_a_lattice() {
        let pos: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let dm = line(&pos);
        let eps: Vec<f64> = (1..12).map(|k| 0.037 * k as f64).collect();
        for w in eps.windows(2) {
            assert!(packing_count(&dm, w[1]) <= packing_count(&dm, w[0]));
            assert!(covering_count(&dm, w[1]) <= covering_count(&dm, w[0]));
        }
    }

    #[test]
    fn l1_matrix_matches_pairwise() {
        let fam: Vec<_> = (0..5).map(|k| bump(k as f64 * 0.3, 1.0)).collect();
        let dm = DistanceMatrix::l1(&fam);
        for i in 0..5 {
            assert_eq!(dm.get(i, i), 0.0);
            for j in 0..5 {
                assert_eq!(dm.get(i, j), l1_distance(&fam[i], &fam[j]));
            }
        }
    }

    #[test]
    fn transfer_identity_pairing() {
        let fam: Vec<_> = (0..6).map(|k| bump(k as f64 * 0.2, 1.0)).collect();
        let delta = 0.1;
        let cover = greedy_cover(&DistanceMatrix::l1(&fam), delta);
        let pairing: Vec<usize> = (0..6).collect();
        let cert = cover_transfer(&fam, &fam, &pairing, &cover.centers, delta).unwrap();
        assert_eq!(cert.centers, cover.centers.len());
        for (i, s) in cert.slack.iter().enumerate() {
            assert_abs_diff_eq!(
                *s,
                2.0 * delta - l1_distance(&fam[i], &fam[cert.assignment[i]]),
                epsilon = 1e-15
            );
        }
        let cert = cover_transfer(&fam, &fam, &pairing, &(0..6).collect::<Vec<_>>(), 0.0).unwrap();
        assert!(cert.slack.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn transfer_doubles_radius() {
        let numerical: Vec<_> = (0..8).map(|k| bump(k as f64 * 0.1, 0.5)).collect();
        let exact: Vec<_> = (0..8).map(|k| bump(k as f64 * 0.1 + 0.02, 0.5)).collect();
        let pairing: Vec<usize> = (0..8).collect();
        let delta = 0.1;
        assert!((0..8).all(|i| l1_distance(&exact[i], &numerical[i]) <= delta));
        let cover = greedy_cover(&DistanceMatrix::l1(&numerical), delta);
        let cert = cover_transfer(&exact, &numerical, &pairing, &cover.centers, delta).unwrap();
        assert!(cert.slack.iter().all(|&s| s >= 0.0));

        let mut far = exact.clone();
        far[5] = bump(5.0 * 0.1 + 0.6, 0.5);
        match cover_transfer(&far, &numerical, &pairing, &cover.centers, delta) {
            Err(CoverTransferError::PairingGap { sample, .. }) => assert_eq!(sample, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4].iter().map(|&e| (e, 10.0 / e)).collect();
        let f = fit_scaling(&pts).unwrap();
        assert_abs_diff_eq!(f.exponent, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.constant, 10.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let f = fit_scaling(&[(0.1, 3.0), (0.2, 3.0), (0.4, 3.0)]).unwrap();
        assert_abs_diff_eq!(f.exponent, 0.0, epsilon = 1e-12);
        assert_eq!(
            fit_scaling(&[(0.1, 1.0)]).unwrap_err(),
            FitError::TooFewPoints(1)
        );
        assert_eq!(
            fit_scaling(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]).unwrap_err(),
            FitError::DegenerateEps
        );
        assert_eq!(
            fit_scaling(&[(0.1, 1.0), (0.2, 0.0), (0.3, 3.0)]).unwrap_err(),
            FitError::NonPositive(1)
        );
    }

    #[test]
    fn fit_with_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let e = 0.1 * 2f64.powf(-(k as f64) / 3.0);
                (e, 10.0 / e * (1.0 + rng.gen_range(-0.05..0.05)))
            })
            .collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((0.9..=1.1).contains(&f.exponent), "{}", f.exponent);
    }

    proptest! {
        #[test]
        fn packing_below_covering_and_monotone(pos in prop::collection::vec(0.0f64..10.0, 1..40), eps in 0.05f64..3.0) {
            let dm = line(&pos);
            let p = packing_count(&dm, eps);
            let c = covering_count(&dm, eps);
            prop_assert!(p <= c);
            let kept = packing_set(&dm, eps);
            for (a, &i) in kept.iter().enumerate() {
                for &j in &kept[a + 1..] {
                    prop_assert!(dm.get(i, j) > 2.0 * eps);
                }
            }
            let cover = greedy_cover(&dm, eps);
            for (j, &c) in cover.assignment.iter().enumerate() {
                prop_assert!(dm.get(j, c) <= eps);
            }
        }
    }
}
