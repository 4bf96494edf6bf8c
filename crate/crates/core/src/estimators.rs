//! Channel estimators: LS with linear interpolation, OMP, IMAT and the
//! support-aware oracle.

use crate::error::{Error, Result};
use crate::measurement::{norm, MeasurementModel};
use crate::pilot_alloc::PilotPattern;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Interp,
    Omp,
    Imat,
    Oracle,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Interp, Estimator::Omp, Estimator::Imat, Estimator::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Interp => "interp",
            Estimator::Omp => "omp",
            Estimator::Imat => "imat",
            Estimator::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator `{s}`")))
    }
}

/// Estimated impulse response with its support (the nonzero entries).
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub cir: Vec<Complex64>,
    pub support: Vec<usize>,
    pub iterations_used: usize,
}

impl EstimateReport {
    pub fn from_cir(cir: Vec<Complex64>, iterations_used: usize) -> Self {
        let support = cir
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(i, _)| i)
            .collect();
        Self { cir, support, iterations_used }
    }

    /// Frequency response of the estimate on all `N` subcarriers.
    pub fn cfr(&self) -> Vec<Complex64> {
        let n = self.cir.len();
        let w = crate::measurement::twiddles(n);
        (0..n)
            .map(|k| self.support.iter().map(|&d| w[(k * d) % n] * self.cir[d]).sum())
            .collect()
    }
}

/// Per-pilot LS estimate `Y / X`.
pub fn estimate_pilot_cfr(received: &[Complex64], sent_pilots: &[Complex64]) -> Result<Vec<Complex64>> {
    if received.len() != sent_pilots.len() {
        return Err(Error::DimensionMismatch {
            expected: sent_pilots.len(),
            found: received.len(),
        });
    }
    if let Some(position) = sent_pilots.iter().position(|x| x.norm_sqr() == 0.0) {
        return Err(Error::ZeroPilotSymbol { position });
    }
    Ok(received.iter().zip(sent_pilots).map(|(y, x)| y / x).collect())
}

/// Linear interpolation of pilot CFR values onto every subcarrier, wrapping
/// cyclically between the last and first pilots.
pub fn interpolate_linear(pilot_cfr: &[Complex64], pattern: &PilotPattern) -> Result<Vec<Complex64>> {
    if pilot_cfr.len() != pattern.len() {
        return Err(Error::DimensionMismatch {
            expected: pattern.len(),
            found: pilot_cfr.len(),
        });
    }
    let n = pattern.n();
    let idx = pattern.indices();
    let m = idx.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    if m == 1 {
        out.fill(pilot_cfr[0]);
        return Ok(out);
    }
    for j in 0..m {
        let (start, end) = (idx[j], idx[(j + 1) % m]);
        let (a, b) = (pilot_cfr[j], pilot_cfr[(j + 1) % m]);
        let span = (end + n - start) % n;
        for step in 0..span {
            let t = step as f64 / span as f64;
            out[(start + step) % n] = a + (b - a) * t;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmpConfig {
    pub max_taps: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_residual_tol() -> f64 {
    1e-6
}

impl OmpConfig {
    pub fn new(max_taps: usize) -> Self {
        Self { max_taps, residual_tol: default_residual_tol() }
    }
}

/// Orthogonal matching pursuit over the columns of `F_p`.
///
/// Stops once `max_taps` columns are selected or `‖r‖ <= residual_tol ‖y‖`.
pub fn omp_estimate(model: &MeasurementModel, observed: &[Complex64], config: &OmpConfig) -> Result<EstimateReport> {
    if config.max_taps == 0 || config.max_taps > model.n_pilots() {
        return Err(Error::InvalidParameter(format!(
            "OMP sparsity cap {} must lie in 1..={}",
            config.max_taps,
            model.n_pilots()
        )));
    }
    if !(config.residual_tol >= 0.0) {
        return Err(Error::InvalidParameter("OMP residual tolerance must be nonnegative".into()));
    }
    if observed.len() != model.n_pilots() {
        return Err(Error::DimensionMismatch {
            expected: model.n_pilots(),
            found: observed.len(),
        });
    }
    let target = config.residual_tol * norm(observed);
    let mut support: Vec<usize> = Vec::with_capacity(config.max_taps);
    let mut selected = vec![false; model.n()];
    let mut estimate = vec![Complex64::new(0.0, 0.0); model.n()];
    let mut residual = observed.to_vec();
    while support.len() < config.max_taps && norm(&residual) > target {
        let correlation = model.apply_adjoint(&residual)?;
        let (best, _) = correlation
            .iter()
            .enumerate()
            .filter(|(j, _)| !selected[*j])
            .map(|(j, c)| (j, c.norm_sqr()))
            .fold((usize::MAX, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        selected[best] = true;
        support.push(best);
        support.sort_unstable();
        estimate = model.least_squares_on_support(observed, &support)?;
        let fitted = model.apply(&estimate)?;
        residual = observed.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    }
    let iterations = support.len();
    Ok(EstimateReport::from_cir(estimate, iterations))
}

/// Threshold scale of the IMAT iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    /// `beta` used as given.
    Absolute(f64),
    /// `beta = factor * max |h_0|` with `h_0` the minimum-norm estimate.
    Relative(f64),
}

/// Defaults suit sparse pilot grids: with `N_p / N` small the estimate on the
/// support moves by about `lambda N_p / N` of its error per iteration, so the
/// threshold has to decay slowly and the loop has to run long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImatConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Threshold,
    pub max_iters: usize,
    /// Re-fit the terminal support by least squares.
    pub debias: bool,
}

impl Default for ImatConfig {
    fn default() -> Self {
        Self {
            lambda: 1.9,
            alpha: 0.05,
            beta: Threshold::Relative(2.0),
            max_iters: 200,
            debias: true,
        }
    }
}

impl ImatConfig {
    pub fn validate(&self) -> Result<()> {
        let beta = match self.beta {
            Threshold::Absolute(b) | Threshold::Relative(b) => b,
        };
        let mut problems = Vec::new();
        if !(self.lambda > 0.0 && self.lambda < 2.0) {
            problems.push(format!("lambda {} must lie in (0, 2)", self.lambda));
        }
        if !(self.alpha > 0.0) {
            problems.push(format!("alpha {} must be positive", self.alpha));
        }
        if !(beta > 0.0) {
            problems.push(format!("beta {beta} must be positive"));
        }
        if self.max_iters == 0 {
            problems.push("max_iters must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems))
        }
    }
}

/// Iterative method with adaptive thresholding.
///
/// Starting from the minimum-norm estimate `h_0`, each iteration applies the
/// relaxed correction `h <- lambda (h_0 - G h) + h` and then zeroes every
/// entry whose modulus does not exceed `beta exp(-alpha k)`.
pub fn imat_estimate(model: &MeasurementModel, observed: &[Complex64], config: &ImatConfig) -> Result<EstimateReport> {
    config.validate()?;
    let initial = model.min_norm_estimate(observed)?;
    let beta = match config.beta {
        Threshold::Absolute(b) => b,
        Threshold::Relative(f) => f * initial.iter().map(|v| v.norm()).fold(0.0, f64::max),
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut current = initial.clone();
    for k in 1..=config.max_iters {
        let distorted = model.apply_distorting(&current)?;
        let threshold = beta * (-config.alpha * k as f64).exp();
        for ((c, h0), g) in current.iter_mut().zip(&initial).zip(&distorted) {
            let next = (h0 - g) * config.lambda + *c;
            *c = if next.norm() > threshold { next } else { zero };
        }
    }
    let mut report = EstimateReport::from_cir(current, config.max_iters);
    if config.debias && !report.support.is_empty() && report.support.len() <= model.n_pilots() {
        if let Ok(refit) = model.least_squares_on_support(observed, &report.support) {
            report = EstimateReport::from_cir(refit, config.max_iters);
        }
    }
    Ok(report)
}

/// Least squares on the true support.
pub fn oracle_estimate(model: &MeasurementModel, observed: &[Complex64], true_support: &[usize]) -> Result<EstimateReport> {
    let cir = model.least_squares_on_support(observed, true_support)?;
    Ok(EstimateReport::from_cir(cir, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilot_alloc::PilotPattern;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(n: usize, idx: &[usize]) -> MeasurementModel {
        MeasurementModel::new(&PilotPattern::new(n, idx.to_vec()).unwrap())
    }

    fn unit_tap(n: usize, d: usize) -> Vec<Complex64> {
        let mut h = vec![c(0.0, 0.0); n];
        h[d] = c(1.0, 0.0);
        h
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.name().parse::<Estimator>().unwrap(), e);
        }
        assert!("mmse".parse::<Estimator>().is_err());
    }

    #[test]
    fn pilot_cfr() {
        let y = [c(1.0, 2.0), c(-3.0, 0.5)];
        assert_eq!(estimate_pilot_cfr(&y, &[c(1.0, 0.0); 2]).unwrap(), y.to_vec());
        let x = [c(0.6, 0.8), c(-1.0, 0.0)];
        let h = [c(0.3, -0.1), c(2.0, 1.0)];
        let y: Vec<_> = x.iter().zip(&h).map(|(a, b)| a * b).collect();
        let est = estimate_pilot_cfr(&y, &x).unwrap();
        for (a, b) in est.iter().zip(&h) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(
            estimate_pilot_cfr(&y, &[c(1.0, 0.0), c(0.0, 0.0)]),
            Err(Error::ZeroPilotSymbol { position: 1 })
        );
    }

    #[test]
    fn interpolation_constant_and_wrap() {
        let p = PilotPattern::new(10, vec![1, 4, 8]).unwrap();
        let out = interpolate_linear(&[c(2.0, -1.0); 3], &p).unwrap();
        assert!(out.iter().all(|v| (v - c(2.0, -1.0)).norm() < 1e-15));

        let p = PilotPattern::new(4, vec![0, 2]).unwrap();
        let out = interpolate_linear(&[c(0.0, 0.0), c(2.0, 0.0)], &p).unwrap();
        assert_eq!(out, vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn interpolation_error_of_single_tap() {
        // H[k] = exp(-j 2π k d / N); chord error between pilots spaced by 2
        // is bounded by |1 - cos(θ)| with θ the per-subcarrier phase step.
        let (n, d) = (64usize, 3usize);
        let h: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * (k * d) as f64 / n as f64))
            .collect();
        let p = PilotPattern::new(n, (0..n / 2).map(|i| 2 * i).collect()).unwrap();
        let pilots: Vec<_> = p.indices().iter().map(|&k| h[k]).collect();
        let out = interpolate_linear(&pilots, &p).unwrap();
        let theta = 2.0 * PI * d as f64 / n as f64;
        let bound = 1.0 - theta.cos() + 1e-12;
        let worst = out.iter().zip(&h).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst <= bound, "{worst} > {bound}");
        assert!(worst > 0.5 * bound);
    }

    #[test]
    fn omp_single_tap_exact() {
        let m = model(7, &[1, 2, 4]);
        for d in 0..7 {
            let mut h = vec![c(0.0, 0.0); 7];
            h[d] = c(0.8, -0.6);
            let y = m.apply(&h).unwrap();
            let r = omp_estimate(&m, &y, &OmpConfig::new(3)).unwrap();
            assert_eq!(r.support, vec![d]);
            assert!((r.cir[d] - h[d]).norm() < 1e-10);
        }
    }

    #[test]
    fn omp_zero_observation() {
        let m = model(7, &[1, 2, 4]);
        let r = omp_estimate(&m, &[c(0.0, 0.0); 3], &OmpConfig::new(3)).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.iterations_used, 0);
        assert!(r.cir.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn omp_rejects_bad_cap() {
        let m = model(7, &[1, 2, 4]);
        assert!(omp_estimate(&m, &[c(1.0, 0.0); 3], &OmpConfig::new(0)).is_err());
        assert!(omp_estimate(&m, &[c(1.0, 0.0); 3], &OmpConfig::new(4)).is_err());
    }

    #[test]
    fn imat_full_dft_is_exact_after_one_iteration() {
        let m = model(8, &(0..8).collect::<Vec<_>>());
        let mut h = vec![c(0.0, 0.0); 8];
        h[1] = c(0.5, 0.5);
        h[6] = c(-1.0, 0.2);
        let y = m.apply(&h).unwrap();
        let cfg = ImatConfig {
            beta: Threshold::Absolute(0.1),
            max_iters: 1,
            debias: false,
            ..ImatConfig::default()
        };
        let r = imat_estimate(&m, &y, &cfg).unwrap();
        assert_eq!(r.support, vec![1, 6]);
        for (a, b) in r.cir.iter().zip(&h) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn imat_hand_trace_on_fano_plane() {
        let m = model(7, &[1, 2, 4]);
        let y = m.apply(&unit_tap(7, 0)).unwrap();
        let cfg = ImatConfig {
            lambda: 1.0,
            alpha: 0.3,
            beta: Threshold::Absolute(0.5),
            max_iters: 20,
            debias: true,
        };
        let r = imat_estimate(&m, &y, &cfg).unwrap();
        assert_eq!(r.support, vec![0]);
        assert!((r.cir[0] - c(1.0, 0.0)).norm() < 1e-6);
        assert_eq!(r.iterations_used, 20);

        // Without the refit the tap converges geometrically with ratio 4/7.
        let raw = imat_estimate(&m, &y, &ImatConfig { debias: false, ..cfg }).unwrap();
        assert_eq!(raw.support, vec![0]);
        let expected = 1.0 - (4.0f64 / 7.0).powi(20);
        assert!((raw.cir[0].re - expected).abs() < 1e-12, "{}", raw.cir[0].re);
    }

    #[test]
    fn imat_without_threshold_returns_min_norm() {
        let m = model(13, &[0, 1, 3, 9]);
        let y = [c(0.3, 1.0), c(-0.7, 0.2), c(1.5, -0.4), c(0.1, 0.1)];
        let h0 = m.min_norm_estimate(&y).unwrap();
        let cfg = ImatConfig {
            beta: Threshold::Absolute(1e-300),
            max_iters: 50,
            debias: false,
            ..ImatConfig::default()
        };
        for lambda in [0.3, 1.0, 1.7] {
            let r = imat_estimate(&m, &y, &ImatConfig { lambda, ..cfg }).unwrap();
            let dist = r.cir.iter().zip(&h0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dist < 1e-12, "lambda {lambda}: {dist}");
        }
    }

    #[test]
    fn imat_config_validation() {
        let bad = ImatConfig { lambda: 2.0, alpha: 0.0, max_iters: 0, ..ImatConfig::default() };
        match bad.validate() {
            Err(Error::ConfigInvalid(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
        assert!(ImatConfig::default().validate().is_ok());
    }

    #[test]
    fn oracle_examples() {
        let m = model(7, &[1, 2, 4]);
        let r = oracle_estimate(&m, &[c(1.0, 0.0); 3], &[0]).unwrap();
        assert_eq!(r.support, vec![0]);
        assert!((r.cir[0] - c(1.0, 0.0)).norm() < 1e-14);
        let r = oracle_estimate(&m, &[c(1.0, 0.0); 3], &[]).unwrap();
        assert!(r.support.is_empty());
    }

    #[test]
    fn report_cfr_matches_dense_dft() {
        let mut h = vec![c(0.0, 0.0); 16];
        h[2] = c(1.0, -1.0);
        h[11] = c(0.25, 0.5);
        let r = EstimateReport::from_cir(h.clone(), 0);
        let full = model(16, &(0..16).collect::<Vec<_>>());
        let dense = full.apply(&h).unwrap();
        for (a, b) in r.cfr().iter().zip(&dense) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
