use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::profiles::{ContinuousDatum, DataClass, PiecewiseAffine};

const MIN_PIECES: usize = 5;
const MAX_PIECES: usize = 40;

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Random breakpoints `lo = b_0 < … < b_k = hi`.
fn partition(rng: &mut ChaCha8Rng, lo: f64, hi: f64, pieces: usize) -> Vec<f64> {
    loop {
        let mut b: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(lo..hi)).collect();
        b.push(lo);
        b.push(hi);
        b.sort_by(f64::total_cmp);
        if b.windows(2).all(|w| w[1] > w[0]) {
            return b;
        }
    }
}

/// Piecewise-constant data on a random partition of `[-L, L]` into 5 to 40
/// pieces with values uniform in `[-a, a]`, where the amplitude `a` is itself
/// uniform in `(0, M]`, scaled down when the L¹ norm exceeds `m`.
/// Sample `i` depends only on `(seed, i)`.
pub fn sample_data_class(
    l: f64,
    m: f64,
    big_m: f64,
    count: usize,
    seed: u64,
) -> Vec<ContinuousDatum> {
    let class = DataClass::new(l, m, big_m);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let pieces = rng.gen_range(MIN_PIECES..=MAX_PIECES);
            let breaks = partition(&mut rng, -l, l, pieces);
            let amp = big_m * (1.0 - rng.gen::<f64>());
            let mut values: Vec<f64> = (0..pieces).map(|_| rng.gen_range(-amp..=amp)).collect();
            let l1: f64 = values
                .iter()
                .zip(breaks.windows(2))
                .map(|(v, w)| v.abs() * (w[1] - w[0]))
                .sum();
            if l1 > m {
                let mut scale = m / l1;
                loop {
                    let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
                    let d = PiecewiseAffine::piecewise_constant(&breaks, &scaled)
                        .expect("valid partition");
                    if d.l1() <= m {
                        values = scaled;
                        break;
                    }
                    scale = f64::from_bits(scale.to_bits() - 1);
                }
            }
            let d = ContinuousDatum::new(
                PiecewiseAffine::piecewise_constant(&breaks, &values).expect("valid partition"),
                class,
            );
            d.check_class().expect("sample certified against its class");
            d
        })
        .collect()
}

/// Nondecreasing step functions `[0, L] → [0, V]` with 1 to 20 steps.
pub fn sample_monotone_class(l: f64, v: f64, count: usize, seed: u64) -> Vec<PiecewiseAffine> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let pieces = rng.gen_range(1..=20usize);
            let breaks = partition(&mut rng, 0.0, l, pieces);
            let mut values: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.0..=v)).collect();
            values.sort_by(f64::total_cmp);
            PiecewiseAffine::piecewise_constant(&breaks, &values).expect("valid partition")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::DistanceMatrix;
    use crate::profiles::l1_distance_pieces;

    #[test]
    fn samples_are_certified_and_deterministic() {
        let a = sample_data_class(1.0, 1.0, 1.0, 64, 3);
        let b = sample_data_class(1.0, 1.0, 1.0, 64, 3);
        assert_eq!(a, b);
        for d in &a {
            d.check_class().unwrap();
            let n = d.profile.pieces().len();
            assert!((MIN_PIECES..=MAX_PIECES).contains(&n));
        }
        assert_ne!(a, sample_data_class(1.0, 1.0, 1.0, 64, 4));
        let json_a = serde_json::to_string(&a).unwrap();
        let json_b = serde_json::to_string(&b).unwrap();
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn tight_budget_rescales() {
        for d in sample_data_class(1.0, 0.05, 1.0, 32, 9) {
            assert!(d.profile.l1() <= 0.05);
        }
    }

    #[test]
    fn ensemble_has_several_distance_scales() {
        let data = sample_data_class(1.0, 1.0, 1.0, 200, 7);
        let dm = DistanceMatrix::from_fn(data.len(), |i, j| {
            l1_distance_pieces(&data[i].profile, &data[j].profile)
        });
        let (max, min) = dm.spread().unwrap();
        assert!(max / min >= 10.0, "{max} / {min}");
    }

    #[test]
    fn monotone_samples_are_monotone() {
        for w in sample_monotone_class(1.0, 1.0, 50, 1) {
            let p = w.pieces();
            assert!(p.windows(2).all(|q| q[1].y0 >= q[0].y1));
            assert!(p.iter().all(|q| q.y0 >= 0.0 && q.y0 <= 1.0));
        }
    }
}
