//! Admissible target profiles and strictly separated tent families.
//!
//! A member of the family is indexed by `ι ∈ {-1, +1}^n`: the interval
//! `[-L_T, L_T]` is cut into `n` cells of length `ℓ = 2L_T/n` and cell `k`
//! carries the tent `ι_k·τ` of height `peak`. Two members differ by
//! `Hamming(ι, ι')·ℓ·peak` in L¹.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exact::AdmissibleClass;
use crate::profiles::{l1_distance, PiecewiseLinearFn};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TargetError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("amplitude h = {h} exceeds the admissible maximum {h_max}")]
    AmplitudeTooLarge { h: f64, h_max: f64 },
    #[error("n = {n} violates the slope bound; at most {max_n} intervals are admissible")]
    TooManyIntervals { n: usize, max_n: usize },
    #[error("enumerating 2^{n} members is not supported; use sampling")]
    FamilyTooLarge { n: usize },
    #[error("eps = {eps} outside the separation window (0, {eps_max}]")]
    EpsOutOfRange { eps: f64, eps_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleH {
    pub h_max: f64,
    pub l_t: f64,
}

fn positive(name: &'static str, value: f64) -> Result<(), TargetError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(TargetError::NonPositive { name, value })
    }
}

/// `h_max = min{M, m/(2L), L/(8T f2)}` and `L_T = L - 2T f2 h_max`.
pub fn admissible_h(
    l: f64,
    m: f64,
    big_m: f64,
    t: f64,
    f2: f64,
) -> Result<AdmissibleH, TargetError> {
    positive("L", l)?;
    positive("m", m)?;
    positive("M", big_m)?;
    positive("T", t)?;
    positive("f2", f2)?;
    let h_max = big_m.min(m / (2.0 * l)).min(l / (8.0 * t * f2));
    Ok(AdmissibleH {
        h_max,
        l_t: l - 2.0 * t * f2 * h_max,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetClassSpec {
    pub l: f64,
    pub m: f64,
    pub big_m: f64,
    pub t: f64,
    pub f2_at_zero: f64,
    pub h: f64,
    pub l_t: f64,
}

impl TargetClassSpec {
    pub fn new(l: f64, m: f64, big_m: f64, t: f64, f2: f64, h: f64) -> Result<Self, TargetError> {
        let adm = admissible_h(l, m, big_m, t, f2)?;
        positive("h", h)?;
        if h > adm.h_max {
            return Err(TargetError::AmplitudeTooLarge {
                h,
                h_max: adm.h_max,
            });
        }
        Ok(TargetClassSpec {
            l,
            m,
            big_m,
            t,
            f2_at_zero: f2,
            h,
            l_t: l - 2.0 * t * f2 * h,
        })
    }

    pub fn at_h_max(l: f64, m: f64, big_m: f64, t: f64, f2: f64) -> Result<Self, TargetError> {
        let adm = admissible_h(l, m, big_m, t, f2)?;
        Self::new(l, m, big_m, t, f2, adm.h_max)
    }

    /// One-sided slope bound `(2T|f''(0)|)^{-1}`.
    pub fn slope_bound(&self) -> f64 {
        1.0 / (2.0 * self.t * self.f2_at_zero)
    }

    pub fn admissible_class(&self) -> AdmissibleClass {
        AdmissibleClass {
            half_width: self.l_t,
            l1_budget: self.l * self.h,
            amplitude: self.h,
            slope_bound: self.slope_bound(),
        }
    }

    /// Largest `n` whose full-height tents respect the slope bound.
    pub fn max_n(&self) -> usize {
        let q = self.l_t / (self.h * self.t * self.f2_at_zero);
        ((q * (1.0 + 1e-12)).floor() as usize).max(1)
    }

    /// Upper end `Lh/8` of the separation window.
    pub fn eps_max(&self) -> f64 {
        self.l * self.h / 8.0
    }

    /// `L²/(48 ln 2 · T · |f''(0)|)`.
    pub fn gamma_tilde_minus(&self) -> f64 {
        crate::bounds::gamma_tilde_minus(self.l, self.t, self.f2_at_zero)
    }
}

/// How the number of tents is chosen for a given `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum NRule {
    /// Full-height tents, `n` maximal under the slope bound, independent of eps.
    MaxSlope,
    /// `n ≈ κ L_T²/(2 eps T f2)` with tents lowered to keep the slope bound, so
    /// that the Hamming threshold stays near `κ n`.
    Balanced { kappa: f64 },
}

impl Default for NRule {
    fn default() -> Self {
        NRule::Balanced { kappa: 0.15 }
    }
}

/// Tent family geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentLayout {
    pub n: usize,
    pub peak: f64,
    pub half_width: f64,
}

impl TentLayout {
    pub fn cell(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// L¹ distance contributed by one differing sign.
    pub fn unit_distance(&self) -> f64 {
        self.cell() * self.peak
    }

    /// Nodes of the member with signs `iota`.
    pub fn profile(&self, iota: &[i8]) -> PiecewiseLinearFn {
        debug_assert_eq!(iota.len(), self.n);
        let ell = self.cell();
        let mut nodes = Vec::with_capacity(2 * self.n + 1);
        nodes.push((-self.half_width, 0.0));
        for (k, &s) in iota.iter().enumerate() {
            let x0 = -self.half_width + k as f64 * ell;
            nodes.push((x0 + 0.5 * ell, f64::from(s) * self.peak));
            let x1 = if k + 1 == self.n {
                self.half_width
            } else {
                x0 + ell
            };
            nodes.push((x1, 0.0));
        }
        PiecewiseLinearFn::from_nodes(&nodes).expect("tent nodes are increasing")
    }
}

/// Layout for `n` full-height tents (`peak = h/2`), checked against the
/// slope bound.
pub fn full_height_layout(spec: &TargetClassSpec, n: usize) -> Result<TentLayout, TargetError> {
    let max_n = spec.max_n();
    if n == 0 || n > max_n {
        return Err(TargetError::TooManyIntervals { n, max_n });
    }
    Ok(TentLayout {
        n,
        peak: spec.h / 2.0,
        half_width: spec.l_t,
    })
}

/// Layout chosen by `rule` at scale `eps`.
pub fn layout_for(spec: &TargetClassSpec, eps: f64, rule: NRule) -> TentLayout {
    match rule {
        NRule::MaxSlope => TentLayout {
            n: spec.max_n(),
            peak: spec.h / 2.0,
            half_width: spec.l_t,
        },
        NRule::Balanced { kappa } => {
            let raw = kappa * spec.l_t * spec.l_t / (2.0 * eps * spec.t * spec.f2_at_zero);
            let n = (raw.floor() as usize).max(1);
            let peak = (spec.h / 2.0).min(spec.l_t / (2.0 * spec.t * spec.f2_at_zero * n as f64));
            TentLayout {
                n,
                peak,
                half_width: spec.l_t,
            }
        }
    }
}

/// Sign sequence packed into words, `ι_0` in the most significant bit of
/// word 0, bit set for `+1`. Word order is lexicographic order of `ι`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignMask(Vec<u64>);

impl SignMask {
    fn words(n: usize) -> usize {
        n.div_ceil(64)
    }

    pub fn from_iota(iota: &[i8]) -> Self {
        let mut w = vec![0u64; Self::words(iota.len())];
        for (k, &s) in iota.iter().enumerate() {
            if s > 0 {
                w[k / 64] |= 1u64 << (63 - k % 64);
            }
        }
        SignMask(w)
    }

    pub fn to_iota(&self, n: usize) -> Vec<i8> {
        (0..n)
            .map(|k| {
                if self.0[k / 64] >> (63 - k % 64) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    /// Member number `i` of the full family in lexicographic order.
    fn nth(i: u64, n: usize) -> Self {
        debug_assert!(n <= 64);
        let w = if n == 0 { 0 } else { i << (64 - n) };
        SignMask(vec![w])
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w: Vec<u64> = (0..Self::words(n)).map(|_| rng.gen()).collect();
        let tail = n % 64;
        if tail != 0 {
            let last = w.len() - 1;
            w[last] &= !0u64 << (64 - tail);
        }
        SignMask(w)
    }

    #[inline]
    pub fn hamming(&self, other: &Self) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub iota: Vec<i8>,
    pub profile: PiecewiseLinearFn,
}

/// All `2^n` full-height members in lexicographic order of `ι`.
pub fn build_family(spec: &TargetClassSpec, n: usize) -> Result<Vec<Member>, TargetError> {
    let layout = full_height_layout(spec, n)?;
    if n > 20 {
        return Err(TargetError::FamilyTooLarge { n });
    }
    Ok((0..1u64 << n)
        .map(|i| {
            let iota = SignMask::nth(i, n).to_iota(n);
            Member {
                profile: layout.profile(&iota),
                iota,
            }
        })
        .collect())
}

/// Greedy scan in index order: keep `i` iff `dist(i, k) > two_eps` for every
/// kept `k`. Returns kept indices.
pub fn greedy_separate_by<F>(count: usize, two_eps: f64, dist: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..count {
        if kept.iter().all(|&k| dist(i, k) > two_eps) {
            kept.push(i);
        }
    }
    kept
}

/// [`greedy_separate_by`] with the exact L¹ distance.
pub fn greedy_separate(profiles: &[PiecewiseLinearFn], two_eps: f64) -> Vec<usize> {
    greedy_separate_by(profiles.len(), two_eps, |i, j| {
        l1_distance(&profiles[i], &profiles[j])
    })
}

/// Smallest pairwise distance and the pair attaining it; `None` below two
/// members.
pub fn min_pairwise<F>(count: usize, dist: F) -> Option<(f64, usize, usize)>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    (0..count)
        .into_par_iter()
        .filter_map(|i| {
            (i + 1..count)
                .map(|j| (dist(i, j), i, j))
                .min_by(|a, b| a.0.total_cmp(&b.0))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub rule: NRule,
    pub sample_cap: usize,
    pub seed: u64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            rule: NRule::default(),
            sample_cap: 1 << 16,
            seed: 7,
        }
    }
}

/// Evidence that a family is strictly `2ε`-separated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyCertificate {
    /// Minimum over all kept pairs of `Hamming·ℓ·peak`.
    pub closed_form_min_distance: f64,
    pub closed_form_pairs: u64,
    /// Pairs re-measured with the exact piecewise-linear L¹ distance.
    pub exact_pairs: u64,
    pub exact_min_distance: f64,
    /// Largest `|closed form - exact|` over the re-measured pairs.
    pub max_discrepancy: f64,
    pub members_in_class: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedFamily {
    pub spec: TargetClassSpec,
    pub layout: TentLayout,
    pub rule: NRule,
    pub eps: f64,
    /// Candidates scanned by the greedy extraction.
    pub candidates: usize,
    pub members: Vec<Member>,
    pub min_pairwise_distance: f64,
    pub gamma_tilde_minus: f64,
    /// `Γ̃⁻/eps`, the lower-bound benchmark in bits.
    pub benchmark_log2_cardinality: f64,
    pub certificate: FamilyCertificate,
}

impl SeparatedFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn log2_cardinality(&self) -> f64 {
        (self.members.len() as f64).log2()
    }

    /// `log₂|F|·eps/Γ̃⁻`.
    pub fn benchmark_ratio(&self) -> f64 {
        self.log2_cardinality() / self.benchmark_log2_cardinality
    }
}

/// Exact re-measurement budget: all pairs up to this many members.
const EXACT_ALL_PAIRS: usize = 512;
/// Evenly spaced members re-measured pairwise for larger families.
const EXACT_SUBSET: usize = 256;
const DISCREPANCY_TOL: f64 = 1e-12;

fn candidates(n: usize, opts: &FamilyOptions) -> Vec<SignMask> {
    if n <= 16 {
        (0..1u64 << n).map(|i| SignMask::nth(i, n)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut v: Vec<SignMask> = (0..opts.sample_cap)
            .map(|_| SignMask::random(n, &mut rng))
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Strictly `2·eps`-separated tent family at scale `eps ∈ (0, Lh/8]`.
pub fn make_separated_targets(
    spec: &TargetClassSpec,
    eps: f64,
    opts: &FamilyOptions,
) -> Result<SeparatedFamily, TargetError> {
    let eps_max = spec.eps_max();
    if !(eps > 0.0 && eps <= eps_max) {
        return Err(TargetError::EpsOutOfRange { eps, eps_max });
    }
    let layout = layout_for(spec, eps, opts.rule);
    let n = layout.n;
    let unit = layout.unit_distance();
    let two_eps = 2.0 * eps;
    let pool = candidates(n, opts);

    let mut kept: Vec<usize> = Vec::new();
    for (i, m) in pool.iter().enumerate() {
        if kept
            .iter()
            .all(|&k| f64::from(m.hamming(&pool[k])) * unit > two_eps)
        {
            kept.push(i);
        }
    }
    let masks: Vec<&SignMask> = kept.iter().map(|&i| &pool[i]).collect();
    let members: Vec<Member> = masks
        .par_iter()
        .map(|m| {
            let iota = m.to_iota(n);
            Member {
                profile: layout.profile(&iota),
                iota,
            }
        })
        .collect();

    let certificate = certify(&layout, &masks, &members, spec, two_eps);
    Ok(SeparatedFamily {
        spec: *spec,
        layout,
        rule: opts.rule,
        eps,
        candidates: pool.len(),
        min_pairwise_distance: certificate.closed_form_min_distance,
        gamma_tilde_minus: spec.gamma_tilde_minus(),
        benchmark_log2_cardinality: spec.gamma_tilde_minus() / eps,
        members,
        certificate,
    })
}

fn certify(
    layout: &TentLayout,
    masks: &[&SignMask],
    members: &[Member],
    spec: &TargetClassSpec,
    two_eps: f64,
) -> FamilyCertificate {
    let unit = layout.unit_distance();
    let k = masks.len();
    let closed = |i: usize, j: usize| f64::from(masks[i].hamming(masks[j])) * unit;

    // nearest kept neighbour of every member under the closed form
    let nearest: Vec<Option<(f64, usize)>> = (0..k)
        .into_par_iter()
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (closed(i, j), j))
                .min_by(|a, b| a.0.total_cmp(&b.0))
        })
        .collect();
    let closed_min = nearest
        .iter()
        .flatten()
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if k <= EXACT_ALL_PAIRS {
        for i in 0..k {
            for j in i + 1..k {
                pairs.push((i, j));
            }
        }
    } else {
        let subset: Vec<usize> = (0..EXACT_SUBSET)
            .map(|s| s * (k - 1) / (EXACT_SUBSET - 1))
            .collect();
        for (a, &i) in subset.iter().enumerate() {
            for &j in &subset[a + 1..] {
                pairs.push((i, j));
            }
        }
        for (i, nb) in nearest.iter().enumerate() {
            if let Some((_, j)) = nb {
                pairs.push((i.min(*j), i.max(*j)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
    }
    let (exact_min, discrepancy) = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = l1_distance(&members[i].profile, &members[j].profile);
            (d, (d - closed(i, j)).abs())
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let class = spec.admissible_class();
    let members_in_class = members.par_iter().all(|m| class.check(&m.profile).is_ok());
    let passed = closed_min > two_eps
        && exact_min > two_eps
        && discrepancy <= DISCREPANCY_TOL
        && members_in_class;
    FamilyCertificate {
        closed_form_min_distance: closed_min,
        closed_form_pairs: (k as u64) * (k.saturating_sub(1) as u64) / 2,
        exact_pairs: pairs.len() as u64,
        exact_min_distance: exact_min,
        max_discrepancy: discrepancy,
        members_in_class,
        passed,
    }
}
