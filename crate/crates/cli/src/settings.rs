//! Experiment files and flag overrides.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::Value;
use sparse_pilot::estimators::{Estimator, ImatConfig};
use sparse_pilot::ofdm_link::{LinkConfig, MseExperiment, PatternSource, RecoveryExperiment};
use sparse_pilot::pilot_alloc::PilotPattern;
use std::fs;
use std::path::{Path, PathBuf};

pub fn read_pattern(path: &Path) -> Result<PilotPattern> {
    let text = fs::read_to_string(path).with_context(|| format!("reading pattern file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed pattern file {}", path.display()))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
}

/// Relative paths inside a config file are taken from the file's directory.
fn beside(config: &Path, file: PathBuf) -> PathBuf {
    if file.is_relative() {
        config.parent().map(|d| d.join(&file)).unwrap_or(file)
    } else {
        file
    }
}

/// Removes `pattern_file` from a config object so the rest can be parsed strictly.
fn take_pattern_file(value: &mut Value, config: &Path) -> Result<Option<PathBuf>> {
    let Some(obj) = value.as_object_mut() else {
        bail!("config {} must be a JSON object", config.display());
    };
    match obj.remove("pattern_file") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(beside(config, PathBuf::from(s)))),
        Some(other) => bail!("pattern_file must be a string, found {other}"),
    }
}

/// Tap counts given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapGrid(pub Vec<usize>);

/// Parses `"3"`, `"1:8"` (inclusive) or `"1,2,5"`.
pub fn parse_taps(s: &str) -> std::result::Result<TapGrid, String> {
    let bad = |_| format!("invalid tap list `{s}`");
    if let Some((a, b)) = s.split_once(':') {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if a > b {
            return Err(format!("empty tap range `{s}`"));
        }
        return Ok(TapGrid((a..=b).collect()));
    }
    s.split(',').map(|t| t.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>().map(TapGrid)
}

#[derive(Debug, Default, Clone)]
pub struct LinkOverrides {
    pub n: Option<usize>,
    pub n_p: Option<usize>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub estimators: Option<Vec<Estimator>>,
    pub source: Option<PatternSource>,
    pub pattern_file: Option<PathBuf>,
    pub shift_per_frame: Option<bool>,
    pub constellation: Option<sparse_pilot::ofdm_link::Constellation>,
}

pub fn link_config(config: Option<&Path>, o: &LinkOverrides) -> Result<LinkConfig> {
    let (mut cfg, mut pattern_file) = match config {
        Some(path) => {
            let mut value = read_json(path)?;
            let pattern_file = take_pattern_file(&mut value, path)?;
            let cfg: LinkConfig =
                serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?;
            (cfg, pattern_file)
        }
        None => (LinkConfig::default(), None),
    };
    if let Some(v) = o.n {
        cfg.n = v;
        cfg.profile.sample_period_us = cfg.symbol_duration_us / v as f64;
    }
    if let Some(v) = o.n_p {
        cfg.n_p = v;
    }
    if let Some(v) = o.frames {
        cfg.frames = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = &o.snr_grid_db {
        cfg.snr_grid_db = v.clone();
    }
    if let Some(v) = &o.estimators {
        cfg.estimators = v.clone();
    }
    if let Some(v) = o.shift_per_frame {
        cfg.shift_per_frame = v;
    }
    if let Some(v) = o.constellation {
        cfg.constellation = v;
    }
    if let Some(p) = &o.pattern_file {
        pattern_file = Some(p.clone());
        cfg.pattern_source = PatternSource::File;
    }
    if let Some(s) = o.source {
        cfg.pattern_source = s;
    }
    if let Some(path) = pattern_file {
        cfg.pattern = Some(read_pattern(&path)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MseFile {
    pub n: usize,
    pub n_p: usize,
    pub sources: Vec<PatternSource>,
    pub estimators: Vec<Estimator>,
    pub taps: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub imat: ImatConfig,
    #[serde(skip)]
    pub pattern_file: Option<PathBuf>,
}

impl Default for MseFile {
    fn default() -> Self {
        let base = MseExperiment::new(73, 9, PatternSource::DifferenceSet);
        Self {
            n: base.n,
            n_p: base.n_p,
            sources: vec![PatternSource::DifferenceSet, PatternSource::Random],
            estimators: base.estimators,
            taps: base.taps,
            snr_grid_db: base.snr_grid_db,
            trials: base.trials,
            seed: base.seed,
            imat: base.imat,
            pattern_file: None,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct MseOverrides {
    pub n: Option<usize>,
    pub n_p: Option<usize>,
    pub sources: Option<Vec<PatternSource>>,
    pub estimators: Option<Vec<Estimator>>,
    pub taps: Option<usize>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub pattern_file: Option<PathBuf>,
}

/// One experiment per pattern source, in the order given.
pub fn mse_experiments(config: Option<&Path>, o: &MseOverrides) -> Result<Vec<MseExperiment>> {
    let mut file = match config {
        Some(path) => {
            let mut value = read_json(path)?;
            let pattern_file = take_pattern_file(&mut value, path)?;
            let mut f: MseFile =
                serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?;
            f.pattern_file = pattern_file;
            f
        }
        None => MseFile::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = &o.$field { file.$field = v.clone(); } )* };
    }
    set!(n, n_p, sources, estimators, taps, snr_grid_db, trials, seed);
    if o.pattern_file.is_some() {
        file.pattern_file = o.pattern_file.clone();
    }
    let pattern = file.pattern_file.as_deref().map(read_pattern).transpose()?;
    if file.sources.is_empty() {
        bail!("no pattern sources selected");
    }
    Ok(file
        .sources
        .iter()
        .map(|&source| MseExperiment {
            n: file.n,
            n_p: file.n_p,
            source,
            estimators: file.estimators.clone(),
            taps: file.taps,
            snr_grid_db: file.snr_grid_db.clone(),
            trials: file.trials,
            seed: file.seed,
            imat: file.imat,
            pattern: pattern.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryFile {
    pub n: usize,
    pub n_p: usize,
    pub tap_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RecoveryFile {
    fn default() -> Self {
        Self { n: 256, n_p: 16, tap_grid: (1..=8).collect(), trials: 500, seed: 1 }
    }
}

#[derive(Debug, Default, Clone)]
pub struct RecoveryOverrides {
    pub n: Option<usize>,
    pub n_p: Option<usize>,
    pub tap_grid: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

pub fn recovery_experiment(config: Option<&Path>, o: &RecoveryOverrides) -> Result<RecoveryExperiment> {
    let mut file = match config {
        Some(path) => serde_json::from_value(read_json(path)?)
            .with_context(|| format!("invalid config {}", path.display()))?,
        None => RecoveryFile::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = &o.$field { file.$field = v.clone(); } )* };
    }
    set!(n, n_p, tap_grid, trials, seed);
    Ok(RecoveryExperiment { n: file.n, n_p: file.n_p, tap_grid: file.tap_grid, trials: file.trials, seed: file.seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tap_lists() {
        assert_eq!(parse_taps("3").unwrap().0, vec![3]);
        assert_eq!(parse_taps("1:4").unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!(parse_taps("2, 5,7").unwrap().0, vec![2, 5, 7]);
        assert!(parse_taps("4:1").is_err());
        assert!(parse_taps("a:3").is_err());
    }

    #[test]
    fn relative_pattern_paths_follow_the_config() {
        assert_eq!(beside(Path::new("runs/a.json"), "p.json".into()), PathBuf::from("runs/p.json"));
        assert_eq!(beside(Path::new("runs/a.json"), "/tmp/p.json".into()), PathBuf::from("/tmp/p.json"));
    }
}
