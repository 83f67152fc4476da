//! Labeled signal collections and their CSV file format.
//!
//! ```text
//! # spectral-relevance-dataset format_version=1 N=512 num_samples=3 num_classes=16 k_star=5;16;32;53 sigma=0.01 seed=7 amplitude=fixed:1
//! 3,0.12,0.57,...
//! ```
//!
//! The header carries `key=value` pairs; `format_version`, `N` and
//! `num_samples` are required, the synthetic-generation keys are optional.
//! Each following row is `label,x_0,…,x_{N−1}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{join_floats, write_atomic};
use crate::synth::{AmplitudeRule, SynthConfig};

pub const DATASET_MAGIC: &str = "# spectral-relevance-dataset";
pub const DATASET_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    signal_length: usize,
    num_classes: usize,
    labels: Vec<usize>,
    data: Vec<f64>,
    synth: Option<SynthConfig>,
}

impl Dataset {
    pub fn new(signal_length: usize, num_classes: usize, labels: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if signal_length < 2 {
            return Err(Error::InvalidInput("signals need at least 2 samples".into()));
        }
        if data.len() != labels.len() * signal_length {
            return Err(Error::dim("dataset values", labels.len() * signal_length, data.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidClass { class: bad, num_classes });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in sample {} at index {}",
                i / signal_length,
                i % signal_length
            )));
        }
        Ok(Self {
            signal_length,
            num_classes,
            labels,
            data,
            synth: None,
        })
    }

    pub(crate) fn with_synth(mut self, cfg: SynthConfig) -> Self {
        self.synth = Some(cfg);
        self
    }

    pub fn synth_config(&self) -> Option<&SynthConfig> {
        self.synth.as_ref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn signal(&self, i: usize) -> &[f64] {
        &self.data[i * self.signal_length..(i + 1) * self.signal_length]
    }

    /// Deterministic split: the last `round(len · test_fraction)` samples
    /// form the test set.
    pub fn split(&self, test_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.min(self.len());
        let cut = self.len() - n_test;
        ((0..cut).collect(), (cut..self.len()).collect())
    }

    /// Copy of the selected samples, keeping metadata.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut data = Vec::with_capacity(indices.len() * self.signal_length);
        for &i in indices {
            data.extend_from_slice(self.signal(i));
        }
        Dataset {
            signal_length: self.signal_length,
            num_classes: self.num_classes,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            data,
            synth: self.synth.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    fn header(&self) -> String {
        let mut h = format!(
            "{DATASET_MAGIC} format_version={DATASET_FORMAT_VERSION} N={} num_samples={} num_classes={}",
            self.signal_length,
            self.len(),
            self.num_classes
        );
        if let Some(cfg) = &self.synth {
            let ks: Vec<String> = cfg.k_star.iter().map(|k| k.to_string()).collect();
            write!(h, " k_star={} sigma={} seed={} amplitude={}", ks.join(";"), cfg.noise_sigma, cfg.seed, cfg.amplitude)
                .unwrap();
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{}", self.labels[i]).unwrap();
            out.push(',');
            join_floats(&mut out, self.signal(i));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("line 1", "missing header"))??;
        let fields = parse_header(&header)?;
        let get = |key: &str| -> Result<&str> {
            fields
                .get(key)
                .map(String::as_str)
                .ok_or_else(|| Error::parse("line 1", format!("missing header key '{key}'")))
        };
        let num = |key: &str| -> Result<u64> {
            get(key)?
                .parse::<u64>()
                .map_err(|e| Error::parse(format!("line 1, key {key}"), e))
        };
        let version = num("format_version")?;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: DATASET_FORMAT_VERSION,
            });
        }
        let n = num("N")? as usize;
        let num_samples = num("num_samples")? as usize;
        let synth = if fields.contains_key("k_star") {
            Some(synth_from_header(&fields, n, num_samples)?)
        } else {
            None
        };
        let num_classes = match fields.get("num_classes") {
            Some(_) => num("num_classes")? as usize,
            None => synth.as_ref().map_or(0, |s| 1usize << s.k_star.len()),
        };

        let mut labels = Vec::with_capacity(num_samples);
        let mut data = Vec::with_capacity(num_samples * n);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let label: usize = parts
                .next()
                .unwrap()
                .trim()
                .parse()
                .map_err(|e| Error::parse(format!("line {lineno}, field 1 (label)"), e))?;
            let before = data.len();
            for (f, v) in parts.enumerate() {
                data.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(format!("line {lineno}, field {}", f + 2), e))?,
                );
            }
            if data.len() - before != n {
                return Err(Error::parse(
                    format!("line {lineno}"),
                    format!("expected {n} samples, found {}", data.len() - before),
                ));
            }
            labels.push(label);
        }
        if labels.len() != num_samples {
            return Err(Error::parse(
                "end of file",
                format!("header declares {num_samples} samples, found {}", labels.len()),
            ));
        }
        let num_classes = if num_classes == 0 {
            labels.iter().max().map_or(1, |m| m + 1)
        } else {
            num_classes
        };
        let ds = Dataset::new(n, num_classes, labels, data).map_err(|e| Error::parse("dataset", e))?;
        Ok(match synth {
            Some(cfg) => ds.with_synth(cfg),
            None => ds,
        })
    }
}

fn parse_header(line: &str) -> Result<BTreeMap<String, String>> {
    let rest = line
        .strip_prefix(DATASET_MAGIC)
        .ok_or_else(|| Error::parse("line 1", format!("header must start with '{DATASET_MAGIC}'")))?;
    rest.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse("line 1", format!("malformed header field '{tok}'")))
        })
        .collect()
}

fn synth_from_header(fields: &BTreeMap<String, String>, n: usize, num_samples: usize) -> Result<SynthConfig> {
    let field = |k: &str| fields.get(k).map(String::as_str).unwrap_or("");
    let k_star = field("k_star")
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| Error::parse("line 1, key k_star", e)))
        .collect::<Result<Vec<_>>>()?;
    let noise_sigma = field("sigma")
        .parse::<f64>()
        .map_err(|e| Error::parse("line 1, key sigma", e))?;
    let seed = field("seed")
        .parse::<u64>()
        .map_err(|e| Error::parse("line 1, key seed", e))?;
    let amplitude = match fields.get("amplitude") {
        Some(a) => a.parse::<AmplitudeRule>().map_err(|e| Error::parse("line 1, key amplitude", e))?,
        None => AmplitudeRule::default(),
    };
    Ok(SynthConfig {
        signal_length: n,
        k_star,
        noise_sigma,
        amplitude,
        num_samples,
        seed,
        allowed_labels: None,
    })
}
