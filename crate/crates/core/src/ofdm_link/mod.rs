//! Frequency-domain OFDM link: `Y = X H + W` per subcarrier, comb pilots,
//! channel estimation, one-tap equalisation and hard decisions.

mod constellation;
mod experiments;

pub use constellation::Constellation;
pub use experiments::{
    experiment_ber_ser, experiment_mse_crb, experiment_recovery, write_ber_ser_csv, write_mse_csv,
    write_recovery_csv, BerSerRow, MseExperiment, MseRow, RecoveryExperiment, RecoveryRow,
    BER_SER_HEADER, MSE_HEADER, RECOVERY_HEADER,
};

use crate::channel_model::{add_noise_with_variance, mean_power, noise_variance, profile_to_taps, FadingProfile, SparseChannel};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_pilot_cfr, imat_estimate, interpolate_linear, omp_estimate, oracle_estimate, EstimateReport,
    Estimator, ImatConfig, OmpConfig,
};
use crate::measurement::MeasurementModel;
use crate::metrics::{cir_mse, error_counters, is_exact_recovery, TrialOutcome, EXACT_RECOVERY_TOL};
use crate::pilot_alloc::{
    catalog_difference_set, cyclic_shift, equidistant_allocate, greedy_allocate, random_allocate_with, PilotPattern,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Where the pilot pattern comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternSource {
    #[serde(alias = "catalog")]
    DifferenceSet,
    Greedy,
    Random,
    Equidistant,
    File,
}

impl PatternSource {
    pub fn name(self) -> &'static str {
        match self {
            PatternSource::DifferenceSet => "difference-set",
            PatternSource::Greedy => "greedy",
            PatternSource::Random => "random",
            PatternSource::Equidistant => "equidistant",
            PatternSource::File => "file",
        }
    }
}

impl fmt::Display for PatternSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference-set" | "catalog" => Ok(PatternSource::DifferenceSet),
            "greedy" => Ok(PatternSource::Greedy),
            "random" => Ok(PatternSource::Random),
            "equidistant" => Ok(PatternSource::Equidistant),
            "file" => Ok(PatternSource::File),
            _ => Err(Error::InvalidParameter(format!("unknown pattern source `{s}`"))),
        }
    }
}

/// Either one pattern reused every frame or a fresh uniform draw per frame.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternPlan {
    Fixed(PilotPattern),
    RandomPerFrame { n: usize, n_p: usize },
}

impl PatternPlan {
    pub fn resolve(source: PatternSource, n: usize, n_p: usize, explicit: Option<&PilotPattern>) -> Result<Self> {
        let fixed = match source {
            PatternSource::Random => {
                if n_p == 0 || n_p > n {
                    return Err(Error::InvalidCount(format!("pilot count {n_p} must lie in 1..={n}")));
                }
                return Ok(PatternPlan::RandomPerFrame { n, n_p });
            }
            PatternSource::DifferenceSet => {
                catalog_difference_set(n, n_p).ok_or(Error::NoDifferenceSet { n, n_p })?
            }
            PatternSource::Greedy => greedy_allocate(n, n_p)?,
            PatternSource::Equidistant => equidistant_allocate(n, n_p)?,
            PatternSource::File => {
                let p = explicit
                    .ok_or_else(|| Error::InvalidParameter("pattern source `file` needs a pattern".into()))?
                    .clone();
                if p.n() != n || p.len() != n_p {
                    return Err(Error::InvalidParameter(format!(
                        "pattern has N={}, N_p={} but the run expects N={n}, N_p={n_p}",
                        p.n(),
                        p.len()
                    )));
                }
                p
            }
        };
        Ok(PatternPlan::Fixed(fixed))
    }

    /// Pattern for block `index`; fixed patterns are rotated by `index` when
    /// `shift` is set.
    pub fn pattern_for<R: Rng + ?Sized>(&self, index: u64, shift: bool, rng: &mut R) -> PilotPattern {
        match self {
            PatternPlan::Fixed(p) if shift => cyclic_shift(p, (index % p.n() as u64) as i64),
            PatternPlan::Fixed(p) => p.clone(),
            PatternPlan::RandomPerFrame { n, n_p } => {
                random_allocate_with(*n, *n_p, rng).expect("pilot count validated in resolve")
            }
        }
    }
}

/// Independent generator for `(purpose, index)` under a run seed.
pub(crate) fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

pub(crate) mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const FRAME: u64 = 2;
    pub const PATTERN: u64 = 3;
    pub const NOISE: u64 = 4;
}

fn default_snr_grid() -> Vec<f64> {
    vec![10.0, 20.0, 30.0]
}

/// Link-level experiment configuration. Defaults reproduce the 256-carrier,
/// 16-pilot, 224 us DVB-H-like setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub n: usize,
    pub n_p: usize,
    pub cp_len: usize,
    pub symbol_duration_us: f64,
    pub constellation: Constellation,
    pub pattern_source: PatternSource,
    pub shift_per_frame: bool,
    pub snr_grid_db: Vec<f64>,
    pub frames: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub profile: FadingProfile,
    pub imat: ImatConfig,
    /// OMP sparsity cap; defaults to twice the number of profile taps.
    pub omp_max_taps: Option<usize>,
    /// Pattern used when `pattern_source` is `file`.
    pub pattern: Option<PilotPattern>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            n: 256,
            n_p: 16,
            cp_len: 32,
            symbol_duration_us: 224.0,
            constellation: Constellation::Qam16,
            pattern_source: PatternSource::Greedy,
            shift_per_frame: false,
            snr_grid_db: default_snr_grid(),
            frames: 2000,
            seed: 1,
            estimators: Estimator::ALL.to_vec(),
            profile: FadingProfile::dvbh(),
            imat: ImatConfig::default(),
            omp_max_taps: None,
            pattern: None,
        }
    }
}

impl LinkConfig {
    /// Collects every violated constraint rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_p == 0 || self.n_p >= self.n {
            problems.push(format!("n_p = {} must satisfy 1 <= n_p < n = {}", self.n_p, self.n));
        }
        if self.cp_len >= self.n {
            problems.push(format!("cp_len = {} must be below n = {}", self.cp_len, self.n));
        }
        if self.frames == 0 {
            problems.push("frames must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() {
            problems.push("snr_grid_db is empty".into());
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            problems.push("snr_grid_db contains NaN".into());
        }
        if self.estimators.is_empty() {
            problems.push("no estimators selected".into());
        }
        if !(self.symbol_duration_us > 0.0) {
            problems.push("symbol_duration_us must be positive".into());
        } else if self.n > 0 {
            let expected = self.symbol_duration_us / self.n as f64;
            if (self.profile.sample_period_us - expected).abs() > 1e-9 * expected {
                problems.push(format!(
                    "profile sample_period_us = {} disagrees with symbol_duration_us / n = {}",
                    self.profile.sample_period_us, expected
                ));
            }
        }
        match profile_to_taps(&self.profile, self.n.max(1)) {
            Ok(taps) => {
                if let Some((d, _)) = taps.iter().find(|(d, _)| *d > self.cp_len) {
                    problems.push(format!("profile delay index {d} exceeds cp_len = {}", self.cp_len));
                }
            }
            Err(e) => problems.push(format!("profile: {e}")),
        }
        if let Err(Error::ConfigInvalid(v)) = self.imat.validate() {
            problems.extend(v.into_iter().map(|p| format!("imat: {p}")));
        }
        if let Some(k) = self.omp_max_taps {
            if k == 0 || k > self.n_p {
                problems.push(format!("omp_max_taps = {k} must lie in 1..=n_p"));
            }
        }
        if self.pattern_source == PatternSource::File && self.pattern.is_none() {
            problems.push("pattern_source `file` requires a pattern".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems))
        }
    }

    pub fn omp_config(&self) -> OmpConfig {
        let default = 2 * self.profile.delays_us.len();
        OmpConfig::new(self.omp_max_taps.unwrap_or(default).clamp(1, self.n_p))
    }
}

/// One transmitted and received OFDM block.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSignals {
    pub sent: Vec<Complex64>,
    pub cfr: Vec<Complex64>,
    pub received: Vec<Complex64>,
    pub frame_index: u64,
    /// Gray labels on the data subcarriers, ascending subcarrier order.
    pub labels: Vec<u16>,
    pub sigma_sq: f64,
}

/// Per-frame receiver settings shared by all estimators.
#[derive(Debug, Clone, Copy)]
pub struct Receiver<'a> {
    pub constellation: Constellation,
    pub imat: &'a ImatConfig,
    pub omp: &'a OmpConfig,
}

const PILOT_SYMBOL: Complex64 = Complex64::new(1.0, 0.0);

/// Random data on non-pilot subcarriers, unit pilots, channel and AWGN.
///
/// The noise variance is set from the mean received data power. All random
/// draws come from `rng` in a fixed order that does not depend on the SNR.
pub fn transmit<R: Rng + ?Sized>(
    pattern: &PilotPattern,
    channel: &SparseChannel,
    constellation: Constellation,
    snr_db: f64,
    frame_index: u64,
    rng: &mut R,
) -> Result<FrameSignals> {
    let n = pattern.n();
    if channel.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: channel.n() });
    }
    let data = pattern.complement();
    if data.is_empty() {
        return Err(Error::InvalidParameter("every subcarrier is a pilot".into()));
    }
    let labels: Vec<u16> = data.iter().map(|_| rng.random_range(0..constellation.size())).collect();
    let mut sent = vec![PILOT_SYMBOL; n];
    for (&k, &l) in data.iter().zip(&labels) {
        sent[k] = constellation.point(l);
    }
    let cfr = channel.cfr();
    let clean: Vec<Complex64> = sent.iter().zip(&cfr).map(|(x, h)| x * h).collect();
    let data_clean: Vec<Complex64> = data.iter().map(|&k| clean[k]).collect();
    let sigma_sq = noise_variance(mean_power(&data_clean), snr_db);
    let received = add_noise_with_variance(&clean, sigma_sq, rng);
    Ok(FrameSignals { sent, cfr, received, frame_index, labels, sigma_sq })
}

/// Estimates the channel with `estimator`, equalises and decides the data.
pub fn receive(
    signals: &FrameSignals,
    model: &MeasurementModel,
    channel: &SparseChannel,
    estimator: Estimator,
    rx: &Receiver<'_>,
) -> Result<TrialOutcome> {
    let pattern = model.pattern();
    let n = model.n();
    let pick = |v: &[Complex64]| -> Vec<Complex64> { pattern.indices().iter().map(|&k| v[k]).collect() };
    let observed = estimate_pilot_cfr(&pick(&signals.received), &pick(&signals.sent))?;
    let truth = channel.cir();
    let sparse = |report: Result<EstimateReport>| -> Result<EstimateReport> {
        match report {
            Err(Error::RankDeficient { .. }) => Ok(EstimateReport::from_cir(vec![Complex64::new(0.0, 0.0); n], 0)),
            other => other,
        }
    };
    let (cfr_hat, mse, exact) = match estimator {
        Estimator::Interp => {
            let cfr_hat = interpolate_linear(&observed, pattern)?;
            // Parseval: (1/N) sum |h_hat - h|^2 = (1/N^2) sum |H_hat - H|^2.
            let err: f64 = cfr_hat.iter().zip(&signals.cfr).map(|(a, b)| (a - b).norm_sqr()).sum();
            (cfr_hat, err / (n * n) as f64, false)
        }
        sparse_kind => {
            let report = sparse(match sparse_kind {
                Estimator::Omp => omp_estimate(model, &observed, rx.omp),
                Estimator::Imat => imat_estimate(model, &observed, rx.imat),
                _ => oracle_estimate(model, &observed, &channel.support()),
            })?;
            let mse = cir_mse(&report.cir, &truth)?;
            let exact = is_exact_recovery(&report, channel, EXACT_RECOVERY_TOL);
            (report.cfr(), mse, exact)
        }
    };
    let data = pattern.complement();
    let decided: Vec<u16> = data
        .iter()
        .map(|&k| {
            let h = cfr_hat[k];
            if h.norm_sqr() == 0.0 {
                0
            } else {
                rx.constellation.decide(signals.received[k] / h)
            }
        })
        .collect();
    let counts = error_counters(&decided, &signals.labels, rx.constellation.bits_per_symbol())?;
    Ok(TrialOutcome::with_counts(mse, exact, counts))
}

/// One frame end to end.
pub fn run_frame<R: Rng + ?Sized>(
    model: &MeasurementModel,
    channel: &SparseChannel,
    estimator: Estimator,
    rx: &Receiver<'_>,
    snr_db: f64,
    frame_index: u64,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let signals = transmit(model.pattern(), channel, rx.constellation, snr_db, frame_index, rng)?;
    receive(&signals, model, channel, estimator, rx)
}
