//! Ground-truth frequency-detection benchmark.
//!
//! Each sample superposes unit-free sinusoids at a subset of the candidate
//! frequencies `k_star` (in cycles per signal) with random phases, plus white
//! Gaussian noise. The label is the subset, encoded as a bit mask in
//! `k_star` order.

use std::f64::consts::PI;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::WindowSpec;

/// Reference length at which candidate frequencies are restricted to
/// `0 < k < 60`; other lengths scale that bound proportionally.
pub const REFERENCE_LENGTH: usize = 2560;
pub const REFERENCE_MAX_FREQUENCY: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeRule {
    Fixed(f64),
    /// Drawn per sample and component from `U[low, high)`.
    Uniform { low: f64, high: f64 },
}

impl Default for AmplitudeRule {
    fn default() -> Self {
        AmplitudeRule::Fixed(1.0)
    }
}

impl fmt::Display for AmplitudeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmplitudeRule::Fixed(a) => write!(f, "fixed:{a}"),
            AmplitudeRule::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
        }
    }
}

impl std::str::FromStr for AmplitudeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Config(format!("amplitude '{s}': {e}")));
        match parts.as_slice() {
            ["fixed", a] => Ok(AmplitudeRule::Fixed(num(a)?)),
            ["uniform", lo, hi] => Ok(AmplitudeRule::Uniform {
                low: num(lo)?,
                high: num(hi)?,
            }),
            _ => Err(Error::Config(format!("unknown amplitude rule '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// N = 2560, σ = 0.01, 10⁶ samples.
    Baseline,
    /// N = 2560, σ = 0.8, 10⁶ samples.
    Noisy,
    /// N = 512, σ = 0.01, 10⁵ samples.
    Desk,
    /// N = 512, σ = 0.8, 10⁵ samples.
    DeskNoisy,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Preset::Baseline),
            "noisy" => Ok(Preset::Noisy),
            "desk" => Ok(Preset::Desk),
            "desk-noisy" | "desk_noisy" => Ok(Preset::DeskNoisy),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

pub const REFERENCE_K_STAR: [usize; 4] = [5, 16, 32, 53];
pub const DESK_K_STAR: [usize; 4] = [1, 3, 6, 11];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub signal_length: usize,
    pub k_star: Vec<usize>,
    pub noise_sigma: f64,
    pub amplitude: AmplitudeRule,
    pub num_samples: usize,
    pub seed: u64,
    /// Restricts generation to these labels; `None` draws from all subsets.
    pub allowed_labels: Option<Vec<usize>>,
}

impl SynthConfig {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        let (n, k, sigma, samples) = match preset {
            Preset::Baseline => (REFERENCE_LENGTH, &REFERENCE_K_STAR, 0.01, 1_000_000),
            Preset::Noisy => (REFERENCE_LENGTH, &REFERENCE_K_STAR, 0.8, 1_000_000),
            Preset::Desk => (512, &DESK_K_STAR, 0.01, 100_000),
            Preset::DeskNoisy => (512, &DESK_K_STAR, 0.8, 100_000),
        };
        Self {
            signal_length: n,
            k_star: k.to_vec(),
            noise_sigma: sigma,
            amplitude: AmplitudeRule::default(),
            num_samples: samples,
            seed,
            allowed_labels: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        1 << self.k_star.len()
    }

    /// Exclusive upper bound on candidate frequencies for this length.
    pub fn max_frequency(&self) -> usize {
        (REFERENCE_MAX_FREQUENCY * self.signal_length).div_ceil(REFERENCE_LENGTH)
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal_length < 2 {
            return Err(Error::Config("signal length must be at least 2".into()));
        }
        if self.k_star.is_empty() || self.k_star.len() > 16 {
            return Err(Error::Config("k_star must hold between 1 and 16 frequencies".into()));
        }
        let max = self.max_frequency();
        for (i, &k) in self.k_star.iter().enumerate() {
            if k == 0 || k >= max {
                return Err(Error::Config(format!(
                    "frequency {k} outside 0 < k < {max} for N = {}",
                    self.signal_length
                )));
            }
            if self.k_star[..i].contains(&k) {
                return Err(Error::Config(format!("duplicate frequency {k} in k_star")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if let AmplitudeRule::Uniform { low, high } = self.amplitude {
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(Error::Config(format!("invalid amplitude range [{low}, {high})")));
            }
        }
        if let Some(labels) = &self.allowed_labels {
            if labels.is_empty() {
                return Err(Error::Config("allowed label set is empty".into()));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= self.num_classes()) {
                return Err(Error::InvalidClass {
                    class: bad,
                    num_classes: self.num_classes(),
                });
            }
        }
        Ok(())
    }

    /// Labels whose subset has exactly `size` frequencies.
    pub fn labels_of_size(&self, size: usize) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|l| l.count_ones() as usize == size)
            .collect()
    }
}

/// Bit mask over `k_star` positions for the given subset of frequencies.
pub fn encode_subset(subset: &[usize], k_star: &[usize]) -> Result<usize> {
    subset.iter().try_fold(0usize, |mask, k| {
        let pos = k_star
            .iter()
            .position(|c| c == k)
            .ok_or_else(|| Error::InvalidInput(format!("frequency {k} is not in k_star")))?;
        Ok(mask | (1 << pos))
    })
}

/// Frequencies selected by `label`, in `k_star` order.
pub fn decode_label(label: usize, k_star: &[usize]) -> Result<Vec<usize>> {
    if label >= 1 << k_star.len() {
        return Err(Error::InvalidClass {
            class: label,
            num_classes: 1 << k_star.len(),
        });
    }
    Ok(k_star
        .iter()
        .enumerate()
        .filter(|(j, _)| label >> j & 1 == 1)
        .map(|(_, &k)| k)
        .collect())
}

/// Noise-free part of a sample: Σ_j a_j sin(2π k_j n / N + φ_j).
pub fn sinusoid_sum(n: usize, components: &[(usize, f64, f64)]) -> Vec<f64> {
    (0..n)
        .map(|t| {
            components
                .iter()
                .map(|&(k, a, phi)| a * (2.0 * PI * ((k * t) % n) as f64 / n as f64 + phi).sin())
                .sum()
        })
        .collect()
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Generates one sample for `label` from its own random stream.
fn generate_sample(cfg: &SynthConfig, label: usize, index: usize) -> Vec<f64> {
    let mut rng = sample_rng(cfg.seed, index);
    let n = cfg.signal_length;
    let components: Vec<(usize, f64, f64)> = decode_label(label, &cfg.k_star)
        .expect("label validated by caller")
        .into_iter()
        .map(|k| {
            let a = match cfg.amplitude {
                AmplitudeRule::Fixed(a) => a,
                AmplitudeRule::Uniform { low, high } => rng.gen_range(low..high),
            };
            (k, a, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let mut x = sinusoid_sum(n, &components);
    if cfg.noise_sigma > 0.0 {
        for v in &mut x {
            let y: f64 = rng.sample(StandardNormal);
            *v += cfg.noise_sigma * y;
        }
    }
    x
}

/// Generates a balanced, shuffled dataset. Each sample draws from a stream
/// derived from `(seed, index)`, so the output is identical for every
/// execution mode.
pub fn generate(cfg: &SynthConfig, exec: Execution) -> Result<Dataset> {
    cfg.validate()?;
    let allowed: Vec<usize> = cfg
        .allowed_labels
        .clone()
        .unwrap_or_else(|| (0..cfg.num_classes()).collect());
    let mut labels: Vec<usize> = (0..cfg.num_samples).map(|i| allowed[i % allowed.len()]).collect();
    labels.shuffle(&mut sample_rng(cfg.seed, usize::MAX - 1));
    let samples = par::map_indices(cfg.num_samples, exec, |i| generate_sample(cfg, labels[i], i));
    let data = samples.concat();
    Ok(Dataset::new(cfg.signal_length, cfg.num_classes(), labels, data)?.with_synth(cfg.clone()))
}

/// Where the informative features of a sample live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthDomain {
    Time,
    Frequency,
    TimeFrequency(WindowSpec),
}

/// Flat indices of the informative coefficients for `label`.
///
/// Frequency maps use bins `k_j` and `N − k_j`. Time-frequency maps use the
/// rescaled bin `round(k_j · H / N)` and its mirror in every frame, since the
/// signal is stationary. The time domain has no localized ground truth.
pub fn ground_truth_bins(label: usize, k_star: &[usize], n: usize, domain: TruthDomain) -> Result<Vec<usize>> {
    let subset = decode_label(label, k_star)?;
    let mut bins = match domain {
        TruthDomain::Time => {
            return Err(Error::UnsupportedDomain(
                "time-domain relevance has no frequency ground truth".into(),
            ))
        }
        TruthDomain::Frequency => subset.iter().flat_map(|&k| [k % n, (n - k % n) % n]).collect::<Vec<_>>(),
        TruthDomain::TimeFrequency(window) => {
            let h = window.width;
            let frames = window.frame_count(n);
            let local: Vec<usize> = subset
                .iter()
                .flat_map(|&k| {
                    let r = ((k * h) as f64 / n as f64).round() as usize % h;
                    [r, (h - r) % h]
                })
                .collect();
            (0..frames).flat_map(|m| local.iter().map(move |&b| m * h + b)).collect()
        }
    };
    bins.sort_unstable();
    bins.dedup();
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dft, stdft, Signal, WindowShape};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            signal_length: 128,
            k_star: vec![1, 2],
            noise_sigma: 0.1,
            amplitude: AmplitudeRule::Fixed(1.0),
            num_samples: 37,
            seed,
            allowed_labels: None,
        }
    }

    #[test]
    fn label_codec() {
        let k = REFERENCE_K_STAR;
        assert_eq!(encode_subset(&[], &k).unwrap(), 0);
        assert_eq!(decode_label(0, &k).unwrap(), Vec::<usize>::new());
        assert_eq!(encode_subset(&[5, 16, 32, 53], &k).unwrap(), 15);
        assert_eq!(decode_label(15, &k).unwrap(), vec![5, 16, 32, 53]);
        assert_eq!(encode_subset(&[16, 53], &k).unwrap(), 0b1010);
        for l in 0..16 {
            assert_eq!(encode_subset(&decode_label(l, &k).unwrap(), &k).unwrap(), l);
        }
        assert!(encode_subset(&[7], &k).is_err());
        assert!(decode_label(16, &k).is_err());
    }

    #[test]
    fn empty_subset_is_pure_noise() {
        assert!(sinusoid_sum(64, &[]).iter().all(|&v| v == 0.0));
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            allowed_labels: Some(vec![0]),
            ..small(1)
        };
        let ds = generate(&cfg, Execution::Sequential).unwrap();
        assert!((0..ds.len()).all(|i| ds.signal(i).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_tone_has_two_bins() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            allowed_labels: Some(vec![0b10]),
            num_samples: 3,
            ..small(2)
        };
        let ds = generate(&cfg, Execution::Sequential).unwrap();
        for i in 0..ds.len() {
            let y = dft(&Signal::new(ds.signal(i).to_vec()).unwrap());
            for k in 0..128 {
                let mag = y.re[k].hypot(y.im[k]);
                if k == 2 || k == 126 {
                    assert!(mag > 1.0);
                } else {
                    assert!(mag < 1e-9, "bin {k}: {mag}");
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic_across_modes() {
        let a = generate(&small(5), Execution::Parallel).unwrap();
        let b = generate(&small(5), Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&small(6), Execution::Sequential).unwrap());
    }

    #[test]
    fn classes_are_balanced() {
        let ds = generate(&small(3), Execution::Sequential).unwrap();
        let counts = ds.class_counts();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = SynthConfig::preset(Preset::Desk, 0);
        assert!(cfg.validate().is_ok());
        cfg.k_star = vec![1, 12];
        assert!(cfg.validate().is_err());
        let mut cfg = SynthConfig::preset(Preset::Baseline, 0);
        assert!(cfg.validate().is_ok());
        cfg.noise_sigma = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ground_truth_bins_per_domain() {
        let k = REFERENCE_K_STAR;
        let five = encode_subset(&[5], &k).unwrap();
        assert_eq!(ground_truth_bins(five, &k, 2560, TruthDomain::Frequency).unwrap(), vec![5, 2555]);
        assert!(ground_truth_bins(0, &k, 2560, TruthDomain::Frequency).unwrap().is_empty());
        assert!(matches!(
            ground_truth_bins(five, &k, 2560, TruthDomain::Time),
            Err(Error::UnsupportedDomain(_))
        ));
    }

    #[test]
    fn time_frequency_truth_matches_pure_tone_peak() {
        let n = 2560;
        let h = n / 10;
        let window = WindowSpec::new(WindowShape::Rectangular, h, h).unwrap();
        for &k in &REFERENCE_K_STAR {
            let x = sinusoid_sum(n, &[(k, 1.0, 0.3)]);
            let spec = stdft(&Signal::new(x).unwrap(), &window).unwrap();
            let label = encode_subset(&[k], &REFERENCE_K_STAR).unwrap();
            let truth = ground_truth_bins(label, &REFERENCE_K_STAR, n, TruthDomain::TimeFrequency(window)).unwrap();
            // The strongest one-sided bin of frame 0 is one of the truth bins.
            let peak = (0..=h / 2)
                .max_by(|&a, &b| {
                    let ma = spec.re[a].hypot(spec.im[a]);
                    let mb = spec.re[b].hypot(spec.im[b]);
                    ma.partial_cmp(&mb).unwrap()
                })
                .unwrap();
            let expected = (k as f64 * h as f64 / n as f64).round() as usize;
            assert!(truth.contains(&expected));
            assert!((peak as isize - expected as isize).abs() <= 1, "k={k} peak={peak}");
            assert_eq!(truth.len(), 2 * spec.frames - usize::from(expected == 0) * spec.frames);
        }
    }
}
