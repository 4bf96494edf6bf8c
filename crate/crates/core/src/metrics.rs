//! Error metrics and the Cramér-Rao bound.

use crate::channel_model::SparseChannel;
use crate::error::{Error, Result};
use crate::estimators::EstimateReport;
use crate::measurement::{Cholesky, MeasurementModel};
use num_complex::Complex64;
use std::iter::Sum;
use std::ops::Add;

/// Default exact-recovery tolerance, relative to `‖h‖∞`.
pub const EXACT_RECOVERY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct CrbInput<'a> {
    pub sigma_sq: f64,
    pub model: &'a MeasurementModel,
    pub support: &'a [usize],
}

/// `sigma^2 trace((F_{p,S}^H F_{p,S})^{-1})`.
pub fn crb(input: &CrbInput<'_>) -> Result<f64> {
    if !(input.sigma_sq >= 0.0) {
        return Err(Error::InvalidParameter("noise variance must be nonnegative".into()));
    }
    if input.support.is_empty() {
        return Ok(0.0);
    }
    if input.support.len() > input.model.n_pilots() {
        return Err(Error::Singular);
    }
    let gram = input.model.support_gram(input.support)?;
    let chol = Cholesky::factor(&gram).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::Singular,
        other => other,
    })?;
    Ok(input.sigma_sq * chol.inverse_trace())
}

/// `(1/N) sum_i |est_i - truth_i|^2`.
pub fn cir_mse(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / truth.len() as f64)
}

/// Supports agree and every gain is within `tol * ‖h‖∞`.
pub fn is_exact_recovery(estimate: &EstimateReport, truth: &SparseChannel, tol: f64) -> bool {
    if estimate.cir.len() != truth.n() || estimate.support != truth.support() {
        return false;
    }
    let allowed = tol * truth.peak_gain();
    truth
        .taps()
        .iter()
        .all(|t| (estimate.cir[t.delay] - t.gain).norm() <= allowed)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub bits_total: u64,
    pub symbols_total: u64,
}

/// Symbol and bit errors between two label sequences. Labels are the Gray
/// bit labels of the constellation points, so the bit error count of a symbol
/// is the Hamming distance of its labels.
pub fn error_counters(decided: &[u16], sent: &[u16], bits_per_symbol: u32) -> Result<ErrorCounts> {
    if decided.len() != sent.len() {
        return Err(Error::DimensionMismatch {
            expected: sent.len(),
            found: decided.len(),
        });
    }
    let mut counts = ErrorCounts {
        bits_total: sent.len() as u64 * bits_per_symbol as u64,
        symbols_total: sent.len() as u64,
        ..ErrorCounts::default()
    };
    for (&a, &b) in decided.iter().zip(sent) {
        if a != b {
            counts.symbol_errors += 1;
            counts.bit_errors += (a ^ b).count_ones() as u64;
        }
    }
    Ok(counts)
}

/// What one Monte-Carlo frame or trial contributes to an aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialOutcome {
    pub mse: f64,
    pub exact: bool,
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub bits_total: u64,
    pub symbols_total: u64,
}

impl TrialOutcome {
    pub fn with_counts(mse: f64, exact: bool, counts: ErrorCounts) -> Self {
        Self {
            mse,
            exact,
            bit_errors: counts.bit_errors,
            symbol_errors: counts.symbol_errors,
            bits_total: counts.bits_total,
            symbols_total: counts.symbols_total,
        }
    }
}

/// Running totals over trials. Sums are taken in iteration order, so feed
/// outcomes in a fixed order for reproducible floating-point results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Aggregate {
    pub trials: u64,
    pub mse_sum: f64,
    pub exact: u64,
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub bits_total: u64,
    pub symbols_total: u64,
}

impl Aggregate {
    pub fn push(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        self.mse_sum += o.mse;
        self.exact += o.exact as u64;
        self.bit_errors += o.bit_errors;
        self.symbol_errors += o.symbol_errors;
        self.bits_total += o.bits_total;
        self.symbols_total += o.symbols_total;
    }

    pub fn mean_mse(&self) -> f64 {
        ratio(self.mse_sum, self.trials as f64)
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors as f64, self.bits_total as f64)
    }

    pub fn ser(&self) -> f64 {
        ratio(self.symbol_errors as f64, self.symbols_total as f64)
    }

    pub fn recovery_rate(&self) -> f64 {
        ratio(self.exact as f64, self.trials as f64)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

impl Add for Aggregate {
    type Output = Aggregate;
    fn add(self, o: Aggregate) -> Aggregate {
        Aggregate {
            trials: self.trials + o.trials,
            mse_sum: self.mse_sum + o.mse_sum,
            exact: self.exact + o.exact,
            bit_errors: self.bit_errors + o.bit_errors,
            symbol_errors: self.symbol_errors + o.symbol_errors,
            bits_total: self.bits_total + o.bits_total,
            symbols_total: self.symbols_total + o.symbols_total,
        }
    }
}

impl<'a> Sum<&'a TrialOutcome> for Aggregate {
    fn sum<I: Iterator<Item = &'a TrialOutcome>>(iter: I) -> Self {
        let mut agg = Aggregate::default();
        iter.for_each(|o| agg.push(o));
        agg
    }
}

/// `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
