//! Ground-truth sparse channels and additive noise.

use crate::error::{Error, Result};
use crate::measurement::twiddles;
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub gain: Complex64,
}

/// Channel impulse response of length `n` with a few nonzero taps.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChannel {
    n: usize,
    taps: Vec<Tap>,
}

impl SparseChannel {
    /// Taps are stored in ascending delay order.
    pub fn new(n: usize, mut taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidCount("a channel needs at least one tap".into()));
        }
        taps.sort_by_key(|t| t.delay);
        if let Some(w) = taps.windows(2).find(|w| w[0].delay == w[1].delay) {
            return Err(Error::DelayCollision { index: w[0].delay });
        }
        if let Some(t) = taps.last().filter(|t| t.delay >= n) {
            return Err(Error::IndexOutOfRange { index: t.delay, n });
        }
        Ok(Self { n, taps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn support(&self) -> Vec<usize> {
        self.taps.iter().map(|t| t.delay).collect()
    }

    /// Dense impulse response `h`.
    pub fn cir(&self) -> Vec<Complex64> {
        let mut h = vec![Complex64::new(0.0, 0.0); self.n];
        for t in &self.taps {
            h[t.delay] = t.gain;
        }
        h
    }

    /// `H[k] = sum_d h[d] exp(-j 2π k d / N)` on every subcarrier.
    pub fn cfr(&self) -> Vec<Complex64> {
        let w = twiddles(self.n);
        (0..self.n)
            .map(|k| self.taps.iter().map(|t| w[(k * t.delay) % self.n] * t.gain).sum())
            .collect()
    }

    /// `max |h_d|`.
    pub fn peak_gain(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm()).fold(0.0, f64::max)
    }
}

/// Discrete-delay power profile with a normalised Doppler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingProfile {
    pub delays_us: Vec<f64>,
    pub powers_db: Vec<f64>,
    pub doppler_normalized: f64,
    pub sample_period_us: f64,
}

impl FadingProfile {
    /// Four-tap DVB-H-like profile on a 256-point, 224 us symbol.
    pub fn dvbh() -> Self {
        Self {
            delays_us: vec![1.7, 3.5, 5.2, 11.3],
            powers_db: vec![-2.0, 0.0, -5.0, -7.0],
            doppler_normalized: 0.01,
            sample_period_us: 224.0 / 256.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays_us.len() != self.powers_db.len() {
            return Err(Error::InvalidParameter(format!(
                "{} delays but {} powers",
                self.delays_us.len(),
                self.powers_db.len()
            )));
        }
        if self.delays_us.is_empty() {
            return Err(Error::InvalidParameter("profile has no taps".into()));
        }
        if !(self.sample_period_us > 0.0) {
            return Err(Error::InvalidParameter("sample period must be positive".into()));
        }
        if !(self.doppler_normalized >= 0.0) {
            return Err(Error::InvalidParameter("normalised Doppler must be nonnegative".into()));
        }
        if self.delays_us.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::InvalidParameter("delays must be nonnegative".into()));
        }
        Ok(())
    }

    /// Frame-to-frame tap correlation `J_0(2π f_d T)`.
    pub fn correlation(&self) -> f64 {
        bessel_j0(2.0 * PI * self.doppler_normalized)
    }
}

/// Sample index (nearest) and linear power for each profile tap.
pub fn profile_to_taps(profile: &FadingProfile, n: usize) -> Result<Vec<(usize, f64)>> {
    profile.validate()?;
    let mut taps: Vec<(usize, f64)> = Vec::with_capacity(profile.delays_us.len());
    for (&delay, &power) in profile.delays_us.iter().zip(&profile.powers_db) {
        let index = (delay / profile.sample_period_us).round() as usize;
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
        if taps.iter().any(|&(i, _)| i == index) {
            return Err(Error::DelayCollision { index });
        }
        taps.push((index, 10f64.powf(power / 10.0)));
    }
    Ok(taps)
}

/// Bessel function of the first kind, order zero, by its power series.
///
/// Accurate to rounding for `|x|` up to about 20, far beyond the Doppler
/// range of interest.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() <= f64::EPSILON * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sum
}

/// Circular complex Gaussian with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (FRAC_1_SQRT_2 * variance.sqrt())
}

/// Next frame of a Rayleigh-fading profile channel.
///
/// The first frame draws every tap from `CN(0, p)`; later frames follow
/// `g' = rho g + sqrt(1 - rho^2) w` with `rho = J_0(2π f_d T)` and
/// `w ~ CN(0, p)`, which keeps the per-tap variance at `p`.
pub fn evolve_gains<R: Rng + ?Sized>(
    previous: Option<&SparseChannel>,
    profile: &FadingProfile,
    n: usize,
    rng: &mut R,
) -> Result<SparseChannel> {
    let layout = profile_to_taps(profile, n)?;
    let taps = match previous {
        None => layout
            .iter()
            .map(|&(delay, power)| Tap { delay, gain: complex_gaussian(rng, power) })
            .collect(),
        Some(prev) => {
            if prev.n() != n || prev.support() != sorted_delays(&layout) {
                return Err(Error::InvalidParameter(
                    "previous channel does not match the profile layout".into(),
                ));
            }
            let rho = profile.correlation().clamp(-1.0, 1.0);
            let innovation = (1.0 - rho * rho).sqrt();
            let mut sorted = layout.clone();
            sorted.sort_by_key(|&(d, _)| d);
            prev.taps()
                .iter()
                .zip(sorted)
                .map(|(t, (delay, power))| {
                    let w = complex_gaussian(rng, power);
                    Tap { delay, gain: t.gain * rho + w * innovation }
                })
                .collect()
        }
    };
    SparseChannel::new(n, taps)
}

fn sorted_delays(layout: &[(usize, f64)]) -> Vec<usize> {
    let mut d: Vec<usize> = layout.iter().map(|&(d, _)| d).collect();
    d.sort_unstable();
    d
}

/// `s` distinct delays uniform over `0..n` with unit-variance Gaussian gains.
pub fn random_sparse_channel<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<SparseChannel> {
    if s == 0 || s > n {
        return Err(Error::InvalidCount(format!("tap count {s} must lie in 1..={n}")));
    }
    let delays = index::sample(rng, n, s).into_vec();
    let taps = delays
        .into_iter()
        .map(|delay| Tap { delay, gain: complex_gaussian(rng, 1.0) })
        .collect();
    SparseChannel::new(n, taps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservation {
    pub noisy: Vec<Complex64>,
    pub sigma_sq: f64,
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Noise variance giving `snr_db` against a signal of the given mean power.
/// An infinite SNR means no noise.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_power / 10f64.powf(snr_db / 10.0)
    }
}

/// Adds `CN(0, sigma_sq)` noise to every entry.
///
/// The underlying unit-variance draws do not depend on `sigma_sq`, so the same
/// generator state yields the same noise shape at every SNR.
pub fn add_noise_with_variance<R: Rng + ?Sized>(
    clean: &[Complex64],
    sigma_sq: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let scale = sigma_sq.sqrt();
    clean
        .iter()
        .map(|&x| {
            let w = complex_gaussian(rng, 1.0);
            if sigma_sq == 0.0 {
                x
            } else {
                x + w * scale
            }
        })
        .collect()
}

/// AWGN at `snr_db` relative to the mean power of `clean`.
pub fn add_noise<R: Rng + ?Sized>(clean: &[Complex64], snr_db: f64, rng: &mut R) -> Result<NoisyObservation> {
    if clean.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let sigma_sq = noise_variance(mean_power(clean), snr_db);
    Ok(NoisyObservation {
        noisy: add_noise_with_variance(clean, sigma_sq, rng),
        sigma_sq,
    })
}
