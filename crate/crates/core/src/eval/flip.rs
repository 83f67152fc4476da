//! Feature flipping: remove (SDF) or add (SCF) input features in order of
//! relevance and track the true-class probability.
//!
//! Frequency features are the one-sided bins `k ∈ [0, N/2]`; flipping bin
//! `k` zeroes `y_k` and `y_{N−k}` together so the reconstructed signal stays
//! real. Time-frequency features are the one-sided bins of every frame.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{auc_points, AxisScaling};
use super::DomainSpec;
use crate::attribution::{Domain, RelevanceMap};
use crate::error::{Error, Result};
use crate::inspection::fold_sum;
use crate::net::{softmax, Network};
use crate::spectral::{self, window_weights, FastDft, Signal, Spectrogram, Spectrum};

pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    /// Delete the most relevant features first.
    Sdf,
    /// Start from the zero baseline and add the most relevant features first.
    Scf,
}

impl std::fmt::Display for FlipMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlipMode::Sdf => "sdf",
            FlipMode::Scf => "scf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipCurve {
    pub mode: FlipMode,
    pub domain: DomainSpec,
    pub features: usize,
    /// `(fraction flipped, true-class probability)`, fractions from 0 to 1.
    pub points: Vec<(f64, f64)>,
    /// Area under the curve on the default (square-root) axis.
    pub auc: f64,
}

impl FlipCurve {
    pub fn auc_with(&self, scaling: AxisScaling) -> f64 {
        auc_points(&self.points, scaling)
    }

    /// Smallest fraction at which the probability is at or below `level`.
    pub fn first_fraction_at_or_below(&self, level: f64) -> Option<f64> {
        self.points.iter().find(|p| p.1 <= level).map(|p| p.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,probability\n");
        for (f, p) in &self.points {
            out.push_str(&format!("{f:?},{p:?}\n"));
        }
        out
    }
}

/// Feature counts at which the model is evaluated: 0, then up to
/// `points − 1` log-spaced counts ending at `features`.
pub fn flip_grid(features: usize, points: usize) -> Vec<usize> {
    let mut grid = vec![0];
    if features == 0 {
        return grid;
    }
    let steps = points.max(2) - 1;
    for i in 0..steps {
        let t = if steps == 1 { 1.0 } else { i as f64 / (steps - 1) as f64 };
        let c = ((features as f64).powf(t).round() as usize).clamp(1, features);
        if c > *grid.last().unwrap() {
            grid.push(c);
        }
    }
    if *grid.last().unwrap() != features {
        grid.push(features);
    }
    grid
}

/// Feature indices by descending value; ties keep ascending index order.
pub fn feature_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

pub fn random_order(features: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..features).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// One value per flippable feature of `domain`: the map itself in time, the
/// one-sided folded map for spectral domains (folded maps pass through).
pub fn flip_features(map: &RelevanceMap, domain: &DomainSpec, n: usize) -> Result<Vec<f64>> {
    let mismatch = || {
        Error::InvalidInput(format!(
            "map with domain {} and shape {:?} does not fit flipping in {}",
            map.domain,
            map.shape,
            domain.label()
        ))
    };
    if map.domain != domain.domain() {
        return Err(mismatch());
    }
    match (domain, map.shape.as_slice()) {
        (DomainSpec::Time, [len]) if *len == n => Ok(map.values.clone()),
        (DomainSpec::Frequency, [len]) if *len == n => Ok(fold_sum(map)?.values),
        (DomainSpec::Frequency, [len]) if *len == n / 2 + 1 => Ok(map.values.clone()),
        (DomainSpec::TimeFrequency { window }, [frames, bins]) if *frames == window.frame_count(n) => {
            if *bins == window.width {
                Ok(fold_sum(map)?.values)
            } else if *bins == window.half_bins() {
                Ok(map.values.clone())
            } else {
                Err(mismatch())
            }
        }
        _ => Err(mismatch()),
    }
}

enum Representation {
    Time(Vec<f64>),
    Frequency {
        fft: FastDft,
        spectrum: Spectrum,
    },
    TimeFrequency {
        fft: FastDft,
        spec: Spectrogram,
        inv_sums: Vec<f64>,
    },
}

/// A signal prepared for repeated masking and reconstruction in one domain.
pub struct Flipper<'a> {
    net: &'a Network,
    domain: DomainSpec,
    n: usize,
    repr: Representation,
}

impl<'a> Flipper<'a> {
    pub fn new(net: &'a Network, signal: &[f64], domain: DomainSpec) -> Result<Self> {
        net.check_input(signal.len())?;
        let n = signal.len();
        let repr = match domain {
            DomainSpec::Time => Representation::Time(signal.to_vec()),
            DomainSpec::Frequency => {
                let fft = FastDft::new(n);
                let spectrum = fft.forward(signal)?;
                Representation::Frequency { fft, spectrum }
            }
            DomainSpec::TimeFrequency { window } => {
                let weights = window_weights(&window, n)?;
                let spec = spectral::stdft(&Signal::new(signal.to_vec())?, &window)?;
                Representation::TimeFrequency {
                    fft: FastDft::new(window.width),
                    spec,
                    inv_sums: weights.sums.iter().map(|w| 1.0 / w).collect(),
                }
            }
        };
        Ok(Self { net, domain, n, repr })
    }

    pub fn features(&self) -> usize {
        match &self.repr {
            Representation::Time(_) => self.n,
            Representation::Frequency { .. } => self.n / 2 + 1,
            Representation::TimeFrequency { spec, .. } => spec.frames * spec.window.half_bins(),
        }
    }

    /// Time signal with only the features where `keep` is true.
    pub fn reconstruct(&self, keep: &[bool]) -> Vec<f64> {
        match &self.repr {
            Representation::Time(x) => x.iter().zip(keep).map(|(&v, &k)| if k { v } else { 0.0 }).collect(),
            Representation::Frequency { fft, spectrum } => {
                let masked = mask_spectrum(&spectrum.re, &spectrum.im, keep);
                fft.inverse_real(&masked).expect("length fixed at construction")
            }
            Representation::TimeFrequency { fft, spec, inv_sums } => {
                let half = spec.window.half_bins();
                let mut x = vec![0.0; self.n];
                for m in 0..spec.frames {
                    let frame_keep = &keep[m * half..(m + 1) * half];
                    if !frame_keep.iter().any(|&k| k) {
                        continue;
                    }
                    let masked = mask_spectrum(spec.frame_re(m), spec.frame_im(m), frame_keep);
                    let seg = fft.inverse_real(&masked).expect("length fixed at construction");
                    let start = spec.window.frame_start(m);
                    for (i, v) in seg.into_iter().enumerate() {
                        let t = start + i as isize;
                        if t >= 0 && (t as usize) < self.n {
                            x[t as usize] += v;
                        }
                    }
                }
                for (v, s) in x.iter_mut().zip(inv_sums) {
                    *v *= s;
                }
                x
            }
        }
    }

    /// Flip curve for logit `target` following `order` (a permutation of
    /// the features).
    pub fn curve(
        &self,
        order: &[usize],
        mode: FlipMode,
        target: usize,
        grid_points: usize,
        scaling: AxisScaling,
    ) -> Result<FlipCurve> {
        let f = self.features();
        if order.len() != f {
            return Err(Error::dim("flip order", f, order.len()));
        }
        self.net.check_class(target)?;
        let grid = flip_grid(f, grid_points);
        let mut batch = Vec::with_capacity(grid.len() * self.n);
        let mut keep = vec![mode == FlipMode::Sdf; f];
        let mut done = 0;
        for &count in &grid {
            for &idx in &order[done..count] {
                keep[idx] = mode == FlipMode::Scf;
            }
            done = count;
            batch.extend(self.reconstruct(&keep));
        }
        let logits = self.net.forward_batch(&batch, grid.len())?;
        let c = self.net.num_classes();
        let points: Vec<(f64, f64)> = grid
            .iter()
            .zip(logits.chunks(c))
            .map(|(&count, row)| (count as f64 / f as f64, softmax(row)[target]))
            .collect();
        Ok(FlipCurve {
            mode,
            domain: self.domain,
            features: f,
            auc: auc_points(&points, scaling),
            points,
        })
    }
}

/// Copy of a spectrum with every one-sided bin `k` where `keep[k]` is false
/// zeroed together with its mirror `(L − k) mod L`.
fn mask_spectrum(re: &[f64], im: &[f64], keep: &[bool]) -> Spectrum {
    let len = re.len();
    let mut out_re = re.to_vec();
    let mut out_im = im.to_vec();
    for (k, &kept) in keep.iter().enumerate() {
        if !kept {
            let mirror = (len - k) % len;
            for i in [k, mirror] {
                out_re[i] = 0.0;
                out_im[i] = 0.0;
            }
        }
    }
    Spectrum { re: out_re, im: out_im }
}

/// Flip curve of `signal` ordered by `map`, which must belong to `domain`.
pub fn feature_flip(
    net: &Network,
    signal: &[f64],
    target: usize,
    map: &RelevanceMap,
    domain: DomainSpec,
    mode: FlipMode,
    grid_points: usize,
) -> Result<FlipCurve> {
    let values = flip_features(map, &domain, signal.len())?;
    Flipper::new(net, signal, domain)?.curve(&feature_order(&values), mode, target, grid_points, AxisScaling::default())
}

/// Domain of a map, inferred from its metadata.
pub fn domain_of(map: &RelevanceMap) -> Result<DomainSpec> {
    Ok(match map.domain {
        Domain::Time => DomainSpec::Time,
        Domain::Frequency => DomainSpec::Frequency,
        Domain::TimeFrequency => DomainSpec::TimeFrequency {
            window: map
                .window
                .ok_or_else(|| Error::InvalidInput("time-frequency map without window".into()))?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{istdft_wola, WindowShape, WindowSpec};
    use rand::Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn domains(n: usize) -> Vec<DomainSpec> {
        vec![
            DomainSpec::Time,
            DomainSpec::Frequency,
            DomainSpec::TimeFrequency {
                window: WindowSpec::rectangular(n / 4).unwrap(),
            },
            DomainSpec::TimeFrequency {
                window: WindowSpec::new(WindowShape::HalfSine, 8, 4).unwrap(),
            },
        ]
    }

    #[test]
    fn grid_is_strictly_increasing_and_bounded() {
        for f in [1, 2, 7, 257, 5000] {
            let g = flip_grid(f, DEFAULT_GRID_POINTS);
            assert_eq!(g[0], 0);
            assert_eq!(*g.last().unwrap(), f);
            assert!(g.windows(2).all(|w| w[0] < w[1]));
            assert!(g.len() <= DEFAULT_GRID_POINTS.max(2));
        }
    }

    #[test]
    fn ordering_breaks_ties_by_index() {
        assert_eq!(feature_order(&[1.0, 3.0, 1.0, 3.0, -2.0]), vec![1, 3, 0, 2, 4]);
        let r = random_order(10, 1);
        let mut s = r.clone();
        s.sort();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
        assert_eq!(r, random_order(10, 1));
    }

    #[test]
    fn keeping_everything_reconstructs_the_signal() {
        let n = 32;
        let net = Network::mlp(n, &[4], 2, 0).unwrap();
        let x = random(n, 2);
        for d in domains(n) {
            let fl = Flipper::new(&net, &x, d).unwrap();
            let back = fl.reconstruct(&vec![true; fl.features()]);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-10, "{d:?}");
            }
            assert!(fl.reconstruct(&vec![false; fl.features()]).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn partial_time_frequency_masks_match_wola() {
        let n = 40;
        let window = WindowSpec::new(WindowShape::HalfSine, 8, 4).unwrap();
        let net = Network::mlp(n, &[4], 2, 0).unwrap();
        let x = random(n, 3);
        let fl = Flipper::new(&net, &x, DomainSpec::TimeFrequency { window }).unwrap();
        let keep: Vec<bool> = (0..fl.features()).map(|i| i % 3 != 0).collect();
        let got = fl.reconstruct(&keep);
        let mut spec = spectral::stdft(&Signal::new(x.clone()).unwrap(), &window).unwrap();
        let half = window.half_bins();
        for m in 0..spec.frames {
            for k in 0..half {
                if !keep[m * half + k] {
                    for b in [k, (8 - k) % 8] {
                        spec.re[m * 8 + b] = 0.0;
                        spec.im[m * 8 + b] = 0.0;
                    }
                }
            }
        }
        let want = istdft_wola(&spec).unwrap();
        for (a, b) in got.iter().zip(want.samples()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_mirror_removal_keeps_spectrum_hermitian() {
        let n = 33;
        let x = random(n, 4);
        let y = FastDft::new(n).forward(&x).unwrap();
        let keep: Vec<bool> = (0..n / 2 + 1).map(|k| k % 2 == 0).collect();
        let masked = mask_spectrum(&y.re, &y.im, &keep);
        assert!(masked.symmetry_deviation() <= 1e-10);
    }

    #[test]
    fn endpoints_match_baseline_and_original() {
        let n = 24;
        let net = Network::mlp(n, &[6], 3, 5).unwrap();
        let x = random(n, 5);
        let p_orig = net.probabilities(&x).unwrap()[1];
        let p_zero = net.probabilities(&vec![0.0; n]).unwrap()[1];
        for d in domains(n) {
            let fl = Flipper::new(&net, &x, d).unwrap();
            let order = random_order(fl.features(), 9);
            let sdf = fl.curve(&order, FlipMode::Sdf, 1, 20, AxisScaling::Sqrt).unwrap();
            let scf = fl.curve(&order, FlipMode::Scf, 1, 20, AxisScaling::Sqrt).unwrap();
            let (s0, s1) = (sdf.points[0], *sdf.points.last().unwrap());
            let (c0, c1) = (scf.points[0], *scf.points.last().unwrap());
            assert_eq!((s0.0, s1.0, c0.0, c1.0), (0.0, 1.0, 0.0, 1.0));
            assert!((s0.1 - p_orig).abs() < 1e-9 && (c1.1 - p_orig).abs() < 1e-9);
            assert!((s1.1 - p_zero).abs() < 1e-9 && (c0.1 - p_zero).abs() < 1e-9);
            assert!(sdf.points.iter().all(|p| (0.0..=1.0).contains(&p.1)));
        }
    }
}
