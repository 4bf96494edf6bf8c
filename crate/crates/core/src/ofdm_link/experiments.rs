//! Monte-Carlo experiment drivers and their CSV tables.
//!
//! Every trial draws from generators keyed by `(seed, purpose, index)`, so
//! trials can run on any number of threads. Per-trial outcomes are collected
//! in index order and summed sequentially, which keeps the tables
//! bit-identical between runs.

use super::{purpose, stream_rng, transmit, receive, LinkConfig, PatternPlan, PatternSource, Receiver};
use crate::channel_model::{add_noise_with_variance, evolve_gains, mean_power, noise_variance, random_sparse_channel, SparseChannel};
use crate::error::{Error, Result};
use crate::estimators::{imat_estimate, omp_estimate, oracle_estimate, EstimateReport, Estimator, ImatConfig, OmpConfig};
use crate::measurement::MeasurementModel;
use crate::metrics::{cir_mse, crb, is_exact_recovery, to_db, Aggregate, CrbInput, TrialOutcome, EXACT_RECOVERY_TOL};
use crate::pilot_alloc::{greedy_allocate, random_allocate_with, PilotPattern};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::{self, Write};

pub const BER_SER_HEADER: &str = "snr_db,estimator,ber,ser,mse";
pub const MSE_HEADER: &str = "snr_db,allocation,estimator,mse_db,crb_db";
pub const RECOVERY_HEADER: &str = "taps,allocation,recovery_rate,trials";

#[derive(Debug, Clone, PartialEq)]
pub struct BerSerRow {
    pub snr_db: f64,
    pub estimator: Estimator,
    pub ber: f64,
    pub ser: f64,
    pub mse: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub symbol_errors: u64,
    pub symbols_total: u64,
}

/// BER, SER and CIR MSE of every configured estimator over the SNR grid.
///
/// One channel trajectory (Rayleigh taps evolving frame to frame) is shared
/// by all SNR points and estimators, and each frame's data and noise shape are
/// reused across SNR points, so comparisons are paired.
pub fn experiment_ber_ser(config: &LinkConfig) -> Result<Vec<BerSerRow>> {
    config.validate()?;
    let plan = PatternPlan::resolve(config.pattern_source, config.n, config.n_p, config.pattern.as_ref())?;
    let mut channel_rng = stream_rng(config.seed, purpose::CHANNEL, 0);
    let mut channels: Vec<SparseChannel> = Vec::with_capacity(config.frames);
    for _ in 0..config.frames {
        let next = evolve_gains(channels.last(), &config.profile, config.n, &mut channel_rng)?;
        channels.push(next);
    }
    let omp = config.omp_config();
    let rx = Receiver { constellation: config.constellation, imat: &config.imat, omp: &omp };

    let mut rows = Vec::new();
    for &snr_db in &config.snr_grid_db {
        let per_frame: Vec<Vec<TrialOutcome>> = (0..config.frames)
            .into_par_iter()
            .map(|f| {
                let frame = f as u64;
                let mut pattern_rng = stream_rng(config.seed, purpose::PATTERN, frame);
                let pattern = plan.pattern_for(frame, config.shift_per_frame, &mut pattern_rng);
                let model = MeasurementModel::new(&pattern);
                let mut rng = stream_rng(config.seed, purpose::FRAME, frame);
                let signals = transmit(&pattern, &channels[f], config.constellation, snr_db, frame, &mut rng)?;
                config
                    .estimators
                    .iter()
                    .map(|&e| receive(&signals, &model, &channels[f], e, &rx))
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (j, &estimator) in config.estimators.iter().enumerate() {
            let agg: Aggregate = per_frame.iter().map(|o| &o[j]).sum();
            rows.push(BerSerRow {
                snr_db,
                estimator,
                ber: agg.ber(),
                ser: agg.ser(),
                mse: agg.mean_mse(),
                bit_errors: agg.bit_errors,
                bits_total: agg.bits_total,
                symbol_errors: agg.symbol_errors,
                symbols_total: agg.symbols_total,
            });
        }
    }
    Ok(rows)
}

/// MSE against the Cramér-Rao bound for random `taps`-sparse channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MseExperiment {
    pub n: usize,
    pub n_p: usize,
    pub source: PatternSource,
    pub estimators: Vec<Estimator>,
    pub taps: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub imat: ImatConfig,
    /// Needed when `source` is `file`.
    pub pattern: Option<PilotPattern>,
}

impl MseExperiment {
    pub fn new(n: usize, n_p: usize, source: PatternSource) -> Self {
        Self {
            n,
            n_p,
            source,
            estimators: vec![Estimator::Omp, Estimator::Imat, Estimator::Oracle],
            taps: 3,
            snr_grid_db: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 1000,
            seed: 1,
            imat: ImatConfig::default(),
            pattern: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_p == 0 || self.n_p >= self.n {
            problems.push(format!("n_p = {} must satisfy 1 <= n_p < n = {}", self.n_p, self.n));
        }
        if self.taps == 0 || self.taps > self.n_p {
            problems.push(format!("taps = {} must lie in 1..=n_p", self.taps));
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() {
            problems.push("snr grid is empty".into());
        }
        if self.estimators.contains(&Estimator::Interp) {
            problems.push("the MSE experiment compares sparse estimators only".into());
        }
        if self.estimators.is_empty() {
            problems.push("no estimators selected".into());
        }
        if let Err(Error::ConfigInvalid(v)) = self.imat.validate() {
            problems.extend(v.into_iter().map(|p| format!("imat: {p}")));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub snr_db: f64,
    pub allocation: PatternSource,
    pub estimator: Estimator,
    /// `10 log10` of the mean per-trial CIR MSE.
    pub mse_db: f64,
    /// `10 log10` of the mean of `CRB / N` over the drawn supports.
    pub crb_db: f64,
    pub mse: f64,
    pub crb: f64,
}

/// Rank-deficient refits inside a sparse estimator are scored as an all-zero estimate.
fn sparse_or_zero(report: Result<EstimateReport>, n: usize) -> Result<EstimateReport> {
    match report {
        Err(Error::RankDeficient { .. }) => Ok(EstimateReport::from_cir(vec![Complex64::new(0.0, 0.0); n], 0)),
        other => other,
    }
}

fn run_sparse(
    estimator: Estimator,
    model: &MeasurementModel,
    observed: &[Complex64],
    truth: &SparseChannel,
    omp: &OmpConfig,
    imat: &ImatConfig,
) -> Result<EstimateReport> {
    let n = model.n();
    match estimator {
        Estimator::Omp => sparse_or_zero(omp_estimate(model, observed, omp), n),
        Estimator::Imat => sparse_or_zero(imat_estimate(model, observed, imat), n),
        Estimator::Oracle => oracle_estimate(model, observed, &truth.support()),
        Estimator::Interp => Err(Error::InvalidParameter("interp has no CIR estimate".into())),
    }
}

/// Per trial: a fresh channel on `0..N`, the block's pilot pattern (fixed
/// patterns rotate by the trial index, random ones are redrawn), and noise at
/// `snr_db` relative to the mean pilot observation power. OMP is capped at
/// the true tap count. Channels and noise shapes depend only on
/// `(seed, trial)`, so runs with different allocations are paired.
pub fn experiment_mse_crb(exp: &MseExperiment) -> Result<Vec<MseRow>> {
    exp.validate()?;
    let plan = PatternPlan::resolve(exp.source, exp.n, exp.n_p, exp.pattern.as_ref())?;
    let omp = OmpConfig::new(exp.taps);
    let mut rows = Vec::new();
    for &snr_db in &exp.snr_grid_db {
        // (mse per estimator, crb / N)
        let per_trial: Vec<(Vec<f64>, f64)> = (0..exp.trials)
            .into_par_iter()
            .map(|t| {
                let trial = t as u64;
                let channel = random_sparse_channel(exp.n, exp.taps, &mut stream_rng(exp.seed, purpose::CHANNEL, trial))?;
                let pattern = plan.pattern_for(trial, true, &mut stream_rng(exp.seed, purpose::PATTERN, trial));
                let model = MeasurementModel::new(&pattern);
                let truth = channel.cir();
                let clean = model.apply(&truth)?;
                let sigma_sq = noise_variance(mean_power(&clean), snr_db);
                let observed = add_noise_with_variance(&clean, sigma_sq, &mut stream_rng(exp.seed, purpose::NOISE, trial));
                let bound = crb(&CrbInput { sigma_sq, model: &model, support: &channel.support() })?;
                let mses = exp
                    .estimators
                    .iter()
                    .map(|&e| {
                        let report = run_sparse(e, &model, &observed, &channel, &omp, &exp.imat)?;
                        cir_mse(&report.cir, &truth)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((mses, bound / exp.n as f64))
            })
            .collect::<Result<_>>()?;
        let crb_mean = per_trial.iter().map(|(_, c)| c).sum::<f64>() / exp.trials as f64;
        for (j, &estimator) in exp.estimators.iter().enumerate() {
            let mse = per_trial.iter().map(|(m, _)| m[j]).sum::<f64>() / exp.trials as f64;
            rows.push(MseRow {
                snr_db,
                allocation: exp.source,
                estimator,
                mse_db: to_db(mse),
                crb_db: to_db(crb_mean),
                mse,
                crb: crb_mean,
            });
        }
    }
    Ok(rows)
}

/// Noiseless exact-recovery rate of OMP for greedy and random pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryExperiment {
    pub n: usize,
    pub n_p: usize,
    pub tap_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub taps: usize,
    pub allocation: PatternSource,
    pub recovery_rate: f64,
    pub recovered: u64,
    pub trials: u64,
}

/// For each tap count, the same random channels are recovered from the
/// greedy pattern and from a fresh uniform pattern per trial. OMP is capped at
/// the true tap count.
pub fn experiment_recovery(exp: &RecoveryExperiment) -> Result<Vec<RecoveryRow>> {
    let mut problems = Vec::new();
    if exp.n_p == 0 || exp.n_p >= exp.n {
        problems.push(format!("n_p = {} must satisfy 1 <= n_p < n = {}", exp.n_p, exp.n));
    }
    if exp.trials == 0 {
        problems.push("trials must be at least 1".into());
    }
    if exp.tap_grid.is_empty() {
        problems.push("tap grid is empty".into());
    }
    if let Some(s) = exp.tap_grid.iter().find(|&&s| s == 0 || s > exp.n_p) {
        problems.push(format!("tap count {s} must lie in 1..=n_p"));
    }
    if !problems.is_empty() {
        return Err(Error::ConfigInvalid(problems));
    }
    let greedy = MeasurementModel::new(&greedy_allocate(exp.n, exp.n_p)?);
    let mut rows = Vec::new();
    for &s in &exp.tap_grid {
        let omp = OmpConfig::new(s);
        let outcomes: Vec<(bool, bool)> = (0..exp.trials)
            .into_par_iter()
            .map(|t| {
                let index = ((s as u64) << 32) | t as u64;
                let channel = random_sparse_channel(exp.n, s, &mut stream_rng(exp.seed, purpose::CHANNEL, index))?;
                let truth = channel.cir();
                let random = MeasurementModel::new(&random_allocate_with(
                    exp.n,
                    exp.n_p,
                    &mut stream_rng(exp.seed, purpose::PATTERN, index),
                )?);
                let recovered = |model: &MeasurementModel| -> Result<bool> {
                    let observed = model.apply(&truth)?;
                    let report = sparse_or_zero(omp_estimate(model, &observed, &omp), exp.n)?;
                    Ok(is_exact_recovery(&report, &channel, EXACT_RECOVERY_TOL))
                };
                Ok((recovered(&greedy)?, recovered(&random)?))
            })
            .collect::<Result<_>>()?;
        let greedy_hits = outcomes.iter().filter(|o| o.0).count() as u64;
        let random_hits = outcomes.iter().filter(|o| o.1).count() as u64;
        for (allocation, hits) in [(PatternSource::Greedy, greedy_hits), (PatternSource::Random, random_hits)] {
            rows.push(RecoveryRow {
                taps: s,
                allocation,
                recovery_rate: hits as f64 / exp.trials as f64,
                recovered: hits,
                trials: exp.trials as u64,
            });
        }
    }
    Ok(rows)
}

pub fn write_ber_ser_csv<W: Write>(rows: &[BerSerRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{BER_SER_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{:.6e},{:.6e},{:.6e}", r.snr_db, r.estimator, r.ber, r.ser, r.mse)?;
    }
    Ok(())
}

pub fn write_mse_csv<W: Write>(rows: &[MseRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{MSE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{:.4},{:.4}", r.snr_db, r.allocation, r.estimator, r.mse_db, r.crb_db)?;
    }
    Ok(())
}

pub fn write_recovery_csv<W: Write>(rows: &[RecoveryRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{RECOVERY_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{:.4},{}", r.taps, r.allocation, r.recovery_rate, r.trials)?;
    }
    Ok(())
}
