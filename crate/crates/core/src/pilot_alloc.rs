//! Pilot patterns and everything involved in choosing them.
//!
//! The coherence of a partial DFT matrix only depends on the cyclic
//! differences of its row indices, so most of this module works on the
//! repetition profile `a_d` (how often each nonzero difference `d` appears
//! among ordered pairs of pilots). A pattern whose profile is flat is a
//! cyclic difference set and attains the lower bound
//! `mu_tilde^2 >= N_p (N - N_p) / (N - 1)`.

use crate::error::{Error, Result};
use crate::measurement::twiddles;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sorted set of distinct pilot subcarrier indices out of `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPattern")]
pub struct PilotPattern {
    n: usize,
    indices: Vec<usize>,
}

#[derive(Deserialize)]
struct RawPattern {
    n: usize,
    indices: Vec<usize>,
}

impl TryFrom<RawPattern> for PilotPattern {
    type Error = Error;
    fn try_from(raw: RawPattern) -> Result<Self> {
        PilotPattern::new(raw.n, raw.indices)
    }
}

impl PilotPattern {
    /// Indices may come in any order; they are stored sorted.
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyPattern);
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIndex(w[0]));
        }
        if let Some(&index) = indices.last().filter(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        Ok(Self { n, indices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Indices not in the pattern, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.contains(i)).collect()
    }

    /// Representative of the pattern's rotation class: the lexicographically
    /// smallest of the translates that put some pilot at zero.
    fn canonical_rotation(&self) -> Vec<usize> {
        let n = self.n;
        self.indices
            .iter()
            .map(|&origin| {
                let mut v: Vec<usize> = self.indices.iter().map(|&p| (p + n - origin) % n).collect();
                v.sort_unstable();
                v
            })
            .min()
            .expect("pattern is nonempty")
    }
}

/// Repetition counts `a_d` of the nonzero cyclic differences, `d = 1..N-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceProfile {
    n: usize,
    counts: Vec<usize>,
}

impl DifferenceProfile {
    fn empty(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n.saturating_sub(1)],
        }
    }

    fn add(&mut self, d: usize) {
        debug_assert!(d > 0 && d < self.n);
        self.counts[d - 1] += 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `counts()[d - 1]` is `a_d`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, d: usize) -> usize {
        self.counts[d - 1]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn sum_of_squares(&self) -> u64 {
        self.counts.iter().map(|&a| (a * a) as u64).sum()
    }

    /// Population variance over all `N - 1` bins, empty bins included.
    pub fn variance(&self) -> f64 {
        let bins = self.counts.len();
        if bins == 0 {
            return 0.0;
        }
        let mean = self.total() as f64 / bins as f64;
        self.counts
            .iter()
            .map(|&a| (a as f64 - mean).powi(2))
            .sum::<f64>()
            / bins as f64
    }

    /// The common value of a flat profile.
    pub fn flat_value(&self) -> Option<usize> {
        let first = *self.counts.first()?;
        self.counts.iter().all(|&a| a == first).then_some(first)
    }
}

pub fn difference_profile(pattern: &PilotPattern) -> DifferenceProfile {
    let n = pattern.n();
    let mut profile = DifferenceProfile::empty(n);
    for &a in pattern.indices() {
        for &b in pattern.indices() {
            if a != b {
                profile.add((a + n - b) % n);
            }
        }
    }
    profile
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport {
    /// Normalised coherence `mu_tilde / N_p`.
    pub mu: f64,
    /// `max_r |sum_i exp(-j 2π P_i r / N)|`.
    pub mu_tilde: f64,
    /// Lower bound on `mu_tilde^2`: `N_p (N - N_p) / (N - 1)`.
    pub bound_mu_tilde_sq: f64,
    pub achieves_bound: bool,
    /// Lag `r` attaining the maximum (smallest such lag).
    pub argmax_r: usize,
}

impl CoherenceReport {
    /// `mu_tilde^2 - bound`, nonnegative up to rounding.
    pub fn bound_gap(&self) -> f64 {
        self.mu_tilde * self.mu_tilde - self.bound_mu_tilde_sq
    }
}

/// Lower bound on `mu_tilde^2` over all `n_p`-row submatrices of the `n`-point DFT.
pub fn coherence_bound_sq(n: usize, n_p: usize) -> f64 {
    if n_p >= n {
        return 0.0;
    }
    (n_p * (n - n_p)) as f64 / (n - 1) as f64
}

const BOUND_RTOL: f64 = 1e-9;

/// Mutual coherence of the partial DFT matrix on `pattern`, by direct
/// summation over every lag `r = 1..N-1`.
///
/// The sum is evaluated on the pattern's canonical rotation so that cyclic
/// shifts of a pattern produce bit-identical reports. When every subcarrier is
/// a pilot the columns are orthogonal; the report then carries `mu = 0` and a
/// zero bound.
pub fn coherence(pattern: &PilotPattern) -> CoherenceReport {
    let n = pattern.n();
    let n_p = pattern.len();
    if n_p == n {
        return CoherenceReport {
            mu: 0.0,
            mu_tilde: 0.0,
            bound_mu_tilde_sq: 0.0,
            achieves_bound: true,
            argmax_r: 1.min(n.saturating_sub(1)),
        };
    }
    let w = twiddles(n);
    let canonical = pattern.canonical_rotation();
    let (argmax_r, mu_tilde) = (1..n)
        .map(|r| {
            let s: num_complex::Complex64 = canonical.iter().map(|&p| w[(p * r) % n]).sum();
            (r, s.norm())
        })
        .fold((1, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let bound = coherence_bound_sq(n, n_p);
    CoherenceReport {
        mu: mu_tilde / n_p as f64,
        mu_tilde,
        bound_mu_tilde_sq: bound,
        achieves_bound: (mu_tilde * mu_tilde - bound).abs() <= BOUND_RTOL * bound,
        argmax_r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceSetCheck {
    pub is_difference_set: bool,
    pub lambda: Option<usize>,
}

pub fn verify_difference_set(pattern: &PilotPattern) -> DifferenceSetCheck {
    let lambda = difference_profile(pattern).flat_value();
    DifferenceSetCheck {
        is_difference_set: lambda.is_some(),
        lambda,
    }
}

fn check_count(n: usize, n_p: usize) -> Result<()> {
    if n_p == 0 || n_p > n {
        return Err(Error::InvalidCount(format!(
            "pilot count {n_p} must lie in 1..={n}"
        )));
    }
    Ok(())
}

/// Greedy pilot search minimising the variance of the repetition profile.
///
/// Starts from `{0}` and at each stage adds the unused index whose extended
/// set has the flattest profile. The mean of the profile is fixed by the stage
/// (`i (i - 1) / (N - 1)`), so minimising the variance is the same as
/// minimising the integer `sum_d a_d^2`; the comparison is exact and ties go
/// to the smallest index.
pub fn greedy_allocate(n: usize, n_p: usize) -> Result<PilotPattern> {
    check_count(n, n_p)?;
    let mut chosen = vec![0usize];
    let mut counts = vec![0u64; n];
    let mut used = vec![false; n];
    used[0] = true;
    let mut scratch = vec![0u64; n];
    while chosen.len() < n_p {
        let mut best: Option<(u64, usize)> = None;
        for s in (0..n).filter(|&s| !used[s]) {
            scratch.copy_from_slice(&counts);
            let mut sq: u64 = counts.iter().map(|a| a * a).sum();
            for &p in &chosen {
                for d in [(s + n - p) % n, (p + n - s) % n] {
                    sq += 2 * scratch[d] + 1;
                    scratch[d] += 1;
                }
            }
            if best.is_none_or(|(b, _)| sq < b) {
                best = Some((sq, s));
            }
        }
        let (_, s) = best.expect("an unused index exists while chosen.len() < n");
        for &p in &chosen {
            counts[(s + n - p) % n] += 1;
            counts[(p + n - s) % n] += 1;
        }
        used[s] = true;
        chosen.push(s);
    }
    PilotPattern::new(n, chosen)
}

/// Uniform random pattern, reproducible for a given seed.
pub fn random_allocate(n: usize, n_p: usize, seed: u64) -> Result<PilotPattern> {
    random_allocate_with(n, n_p, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_allocate_with<R: Rng + ?Sized>(n: usize, n_p: usize, rng: &mut R) -> Result<PilotPattern> {
    check_count(n, n_p)?;
    PilotPattern::new(n, index::sample(rng, n, n_p).into_vec())
}

pub fn equidistant_allocate(n: usize, n_p: usize) -> Result<PilotPattern> {
    check_count(n, n_p)?;
    if n % n_p != 0 {
        return Err(Error::NotDivisible { n, n_p });
    }
    let step = n / n_p;
    PilotPattern::new(n, (0..n_p).map(|i| i * step).collect())
}

pub fn cyclic_shift(pattern: &PilotPattern, shift: i64) -> PilotPattern {
    let n = pattern.n();
    let s = shift.rem_euclid(n as i64) as usize;
    let indices = pattern.indices().iter().map(|&p| (p + s) % n).collect();
    PilotPattern::new(n, indices).expect("a rotation of a valid pattern is valid")
}

/// Known cyclic difference sets `(N, N_p, lambda)`. Complements are derived.
const DIFFERENCE_SETS: &[(usize, &[usize])] = &[
    (7, &[1, 2, 4]),
    (13, &[0, 1, 3, 9]),
    (21, &[3, 6, 7, 12, 14]),
    (31, &[1, 5, 11, 24, 25, 27]),
    (57, &[0, 1, 3, 13, 32, 36, 43, 52]),
    (73, &[1, 2, 4, 8, 16, 32, 37, 55, 64]),
    (91, &[0, 1, 3, 9, 27, 49, 56, 61, 77, 81]),
    (15, &[0, 1, 2, 4, 5, 8, 10]),
    (37, &[1, 7, 9, 10, 12, 16, 26, 33, 34]),
    (40, &[1, 2, 3, 5, 6, 9, 14, 15, 18, 20, 25, 27, 35]),
];

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn quadratic_residues(n: usize) -> Vec<usize> {
    let mut qr: Vec<usize> = (1..n).map(|x| x * x % n).collect();
    qr.sort_unstable();
    qr.dedup();
    qr
}

fn catalog_direct(n: usize, n_p: usize) -> Option<Vec<usize>> {
    if let Some((_, set)) = DIFFERENCE_SETS
        .iter()
        .find(|(m, set)| *m == n && set.len() == n_p)
    {
        return Some(set.to_vec());
    }
    if n % 4 == 3 && is_prime(n) && n_p == (n - 1) / 2 {
        return Some(quadratic_residues(n));
    }
    None
}

/// A verified nontrivial cyclic difference set of size `n_p` modulo `n`, if
/// the built-in catalog covers the pair.
pub fn catalog_difference_set(n: usize, n_p: usize) -> Option<PilotPattern> {
    if n_p < 2 || n_p + 2 > n {
        return None;
    }
    let indices = catalog_direct(n, n_p).or_else(|| {
        let complement = PilotPattern::new(n, catalog_direct(n, n - n_p)?).ok()?;
        Some(complement.complement())
    })?;
    let pattern = PilotPattern::new(n, indices).ok()?;
    verify_difference_set(&pattern)
        .is_difference_set
        .then_some(pattern)
}

/// Every `(N, N_p)` pair the catalog can serve with `N <= max_n`.
pub fn catalog_pairs(max_n: usize) -> Vec<(usize, usize)> {
    (4..=max_n)
        .flat_map(|n| (2..=n - 2).map(move |k| (n, k)))
        .filter(|&(n, k)| catalog_direct(n, k).is_some() || catalog_direct(n, n - k).is_some())
        .collect()
}
