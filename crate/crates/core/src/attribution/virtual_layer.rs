//! The virtual inspection layer: a fixed inverse (short-time) Fourier map
//! prepended to a time-domain network. The augmented network takes the
//! concatenated real and imaginary coefficients `[Re; Im]` as input and
//! computes exactly the same function of the signal.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{Error, Result};
use crate::net::{Layer, Network};
use crate::spectral::{self, window_weights, Signal, Twiddles, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierKind {
    Dft,
    Stdft(WindowSpec),
}

impl FourierKind {
    pub fn domain(&self) -> Domain {
        match self {
            FourierKind::Dft => Domain::Frequency,
            FourierKind::Stdft(_) => Domain::TimeFrequency,
        }
    }
}

/// Matrix-free inverse Fourier operator.
#[derive(Debug, Clone)]
pub struct InverseFourier {
    kind: FourierKind,
    length: usize,
    frames: usize,
    bins: usize,
    twiddles: Twiddles,
    /// `1 / W_n` for the short-time inverse; empty for the plain DFT.
    inv_window_sums: Vec<f64>,
    /// Row-major `N × 2C` matrix; when present it replaces the matrix-free path.
    matrix: Option<Arc<Vec<f64>>>,
}

impl PartialEq for InverseFourier {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.length == other.length && self.is_explicit() == other.is_explicit()
    }
}

impl InverseFourier {
    pub fn new(kind: FourierKind, length: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidInput("inverse fourier layer needs length >= 2".into()));
        }
        match kind {
            FourierKind::Dft => Ok(Self {
                kind,
                length,
                frames: 1,
                bins: length,
                twiddles: Twiddles::new(length),
                inv_window_sums: Vec::new(),
                matrix: None,
            }),
            FourierKind::Stdft(window) => {
                let weights = window_weights(&window, length)?;
                Ok(Self {
                    kind,
                    length,
                    frames: weights.frames,
                    bins: window.width,
                    twiddles: Twiddles::new(window.width),
                    inv_window_sums: weights.sums.iter().map(|w| 1.0 / w).collect(),
                    matrix: None,
                })
            }
        }
    }

    /// Switches to the explicit dense-matrix form (see [`InverseFourier::dense_matrix`]).
    /// Model files store only the kind, so a reloaded layer is matrix-free again.
    pub fn into_explicit(mut self) -> Self {
        self.matrix = Some(Arc::new(self.dense_matrix()));
        self
    }

    pub fn is_explicit(&self) -> bool {
        self.matrix.is_some()
    }

    pub fn kind(&self) -> FourierKind {
        self.kind
    }

    pub fn domain(&self) -> Domain {
        self.kind.domain()
    }

    pub fn window(&self) -> Option<WindowSpec> {
        match self.kind {
            FourierKind::Dft => None,
            FourierKind::Stdft(w) => Some(w),
        }
    }

    /// Length of the reconstructed time signal.
    pub fn output_len(&self) -> usize {
        self.length
    }

    /// Number of complex coefficients.
    pub fn coefficient_count(&self) -> usize {
        self.frames * self.bins
    }

    pub fn input_len(&self) -> usize {
        2 * self.coefficient_count()
    }

    /// Shape of an aggregated coefficient map: `[N]` or `[frames, bins]`.
    pub fn shape(&self) -> Vec<usize> {
        match self.kind {
            FourierKind::Dft => vec![self.length],
            FourierKind::Stdft(_) => vec![self.frames, self.bins],
        }
    }

    fn frame_start(&self, m: usize) -> isize {
        match self.kind {
            FourierKind::Dft => 0,
            FourierKind::Stdft(w) => w.frame_start(m),
        }
    }

    /// The forward transform `T(x)` laid out as `[Re; Im]`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.length {
            return Err(Error::dim("signal for fourier encoding", self.length, x.len()));
        }
        let signal = Signal::new(x.to_vec())?;
        let (re, im) = match self.kind {
            FourierKind::Dft => {
                let y = spectral::dft(&signal);
                (y.re, y.im)
            }
            FourierKind::Stdft(w) => {
                let s = spectral::stdft(&signal, &w)?;
                (s.re, s.im)
            }
        };
        Ok([re, im].concat())
    }

    /// Maps `[Re; Im]` coefficients to the time signal.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let c = self.coefficient_count();
        debug_assert_eq!(z.len(), 2 * c);
        if let Some(mat) = &self.matrix {
            return mat.chunks(2 * c).map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum()).collect();
        }
        let (re, im) = z.split_at(c);
        match self.kind {
            FourierKind::Dft => self.twiddles.inverse_real(re, im),
            FourierKind::Stdft(_) => {
                let mut x = vec![0.0; self.length];
                for m in 0..self.frames {
                    let r = m * self.bins..(m + 1) * self.bins;
                    let seg = self.twiddles.inverse_real(&re[r.clone()], &im[r]);
                    let start = self.frame_start(m);
                    for (i, v) in seg.into_iter().enumerate() {
                        let t = start + i as isize;
                        if t >= 0 && (t as usize) < self.length {
                            x[t as usize] += v;
                        }
                    }
                }
                for (v, s) in x.iter_mut().zip(&self.inv_window_sums) {
                    *v *= s;
                }
                x
            }
        }
    }

    /// Transpose of [`InverseFourier::apply`].
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.length);
        if let Some(mat) = &self.matrix {
            let mut out = vec![0.0; self.input_len()];
            for (row, &gn) in mat.chunks(out.len()).zip(g) {
                out.iter_mut().zip(row).for_each(|(o, a)| *o += a * gn);
            }
            return out;
        }
        match self.kind {
            FourierKind::Dft => {
                let (gr, gi) = self.twiddles.inverse_real_transpose(g);
                [gr, gi].concat()
            }
            FourierKind::Stdft(_) => {
                let c = self.coefficient_count();
                let mut out = vec![0.0; 2 * c];
                let scaled: Vec<f64> = g.iter().zip(&self.inv_window_sums).map(|(a, b)| a * b).collect();
                let mut seg = vec![0.0; self.bins];
                for m in 0..self.frames {
                    let start = self.frame_start(m);
                    for (i, s) in seg.iter_mut().enumerate() {
                        let t = start + i as isize;
                        *s = if t >= 0 && (t as usize) < self.length { scaled[t as usize] } else { 0.0 };
                    }
                    let (gr, gi) = self.twiddles.inverse_real_transpose(&seg);
                    out[m * self.bins..(m + 1) * self.bins].copy_from_slice(&gr);
                    out[c + m * self.bins..c + (m + 1) * self.bins].copy_from_slice(&gi);
                }
                out
            }
        }
    }

    /// Explicit `N × 2C` matrix of the operator, evaluated entry by entry from
    /// the inverse-transform formula. Intended for small sizes and as an
    /// independent reference for the matrix-free path.
    pub fn dense_matrix(&self) -> Vec<f64> {
        use std::f64::consts::PI;
        let c = self.coefficient_count();
        let cols = 2 * c;
        let mut mat = vec![0.0; self.length * cols];
        let h = self.bins as f64;
        for n in 0..self.length {
            let inv_w = match self.kind {
                FourierKind::Dft => 1.0,
                FourierKind::Stdft(_) => self.inv_window_sums[n],
            };
            for m in 0..self.frames {
                let local = n as isize - self.frame_start(m);
                if local < 0 || local as usize >= self.bins {
                    continue;
                }
                for k in 0..self.bins {
                    let theta = 2.0 * PI * k as f64 * local as f64 / h;
                    mat[n * cols + m * self.bins + k] = theta.cos() / h.sqrt() * inv_w;
                    mat[n * cols + c + m * self.bins + k] = -theta.sin() / h.sqrt() * inv_w;
                }
            }
        }
        mat
    }

    /// Sums the real and imaginary halves of an input-space attribution into
    /// one value per complex coefficient.
    pub fn aggregate(&self, values: &[f64]) -> Vec<f64> {
        let c = self.coefficient_count();
        values[..c].iter().zip(&values[c..]).map(|(a, b)| a + b).collect()
    }
}

/// Prepends the inverse transform of `kind` to a time-domain network.
pub fn augment_with_inverse_fourier(net: &Network, kind: FourierKind) -> Result<Network> {
    if net.virtual_input().is_some() {
        return Err(Error::Config("network already has a virtual inspection layer".into()));
    }
    let layer = InverseFourier::new(kind, net.input_length())?;
    let input_len = layer.input_len();
    let mut layers = vec![Layer::InverseFourier(layer)];
    layers.extend(net.clone().into_layers());
    Network::new(layers, input_len)
}

/// Same as [`augment_with_inverse_fourier`] but with the inverse transform
/// evaluated through its explicit dense matrix. Meant for small `N`.
pub fn augment_explicit(net: &Network, kind: FourierKind) -> Result<Network> {
    if net.virtual_input().is_some() {
        return Err(Error::Config("network already has a virtual inspection layer".into()));
    }
    let op = InverseFourier::new(kind, net.input_length())?.into_explicit();
    let input_len = op.input_len();
    let mut layers = vec![Layer::InverseFourier(op)];
    layers.extend(net.clone().into_layers());
    Network::new(layers, input_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{istdft_wola, stdft, Spectrogram, WindowShape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn kinds(n: usize) -> Vec<FourierKind> {
        vec![
            FourierKind::Dft,
            FourierKind::Stdft(WindowSpec::rectangular(n / 4).unwrap()),
            FourierKind::Stdft(WindowSpec::new(WindowShape::HalfSine, n / 4, n / 8).unwrap()),
            FourierKind::Stdft(WindowSpec::new(WindowShape::Hann, 6, 4).unwrap()),
        ]
    }

    #[test]
    fn encode_then_apply_is_identity() {
        let n = 32;
        let x = random(n, 1);
        for kind in kinds(n) {
            let op = InverseFourier::new(kind, n).unwrap();
            let back = op.apply(&op.encode(&x).unwrap());
            let err = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{kind:?}: {err}");
        }
    }

    #[test]
    fn explicit_mode_matches_matrix_free() {
        let n = 20;
        for kind in kinds(n) {
            let op = InverseFourier::new(kind, n).unwrap();
            let ex = op.clone().into_explicit();
            assert!(ex.is_explicit() && ex != op);
            let z = random(op.input_len(), 4);
            let g = random(n, 5);
            let d1 = op.apply(&z).iter().zip(ex.apply(&z)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let d2 = op
                .apply_transpose(&g)
                .iter()
                .zip(ex.apply_transpose(&g))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d1 < 1e-12 && d2 < 1e-12, "{kind:?}: {d1} {d2}");
        }
    }

    #[test]
    fn matrix_free_matches_dense_matrix() {
        let n = 24;
        for kind in kinds(n) {
            let op = InverseFourier::new(kind, n).unwrap();
            let mat = op.dense_matrix();
            let cols = op.input_len();
            let z = random(cols, 2);
            let g = random(n, 3);
            let fwd = op.apply(&z);
            let tr = op.apply_transpose(&g);
            for r in 0..n {
                let v: f64 = (0..cols).map(|c| mat[r * cols + c] * z[c]).sum();
                assert!((v - fwd[r]).abs() < 1e-12);
            }
            for c in 0..cols {
                let v: f64 = (0..n).map(|r| mat[r * cols + c] * g[r]).sum();
                assert!((v - tr[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stdft_layer_agrees_with_wola() {
        let n = 40;
        let window = WindowSpec::new(WindowShape::HalfSine, 8, 4).unwrap();
        let x = random(n, 4);
        let spec = stdft(&Signal::new(x).unwrap(), &window).unwrap();
        // Perturb the coefficients so the check is not just round-tripping.
        let re: Vec<f64> = spec.re.iter().enumerate().map(|(i, v)| v + 0.01 * (i as f64).sin()).collect();
        let im: Vec<f64> = spec.im.iter().enumerate().map(|(i, v)| v - 0.02 * (i as f64).cos()).collect();
        let op = InverseFourier::new(FourierKind::Stdft(window), n).unwrap();
        let layer = op.apply(&[re.clone(), im.clone()].concat());
        let wola = istdft_wola(&Spectrogram { re, im, ..spec }).unwrap();
        for (a, b) in layer.iter().zip(wola.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn augmentation_preserves_logits() {
        let n = 32;
        let net = Network::mlp(n, &[12, 8], 4, 11).unwrap();
        for kind in kinds(n) {
            let aug = augment_with_inverse_fourier(&net, kind).unwrap();
            for s in 0..20 {
                let x = random(n, 100 + s);
                let a = net.forward(&x).unwrap();
                let b = aug.forward(&aug.virtual_input().unwrap().encode(&x).unwrap()).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() <= 1e-9);
                }
            }
        }
        assert!(augment_with_inverse_fourier(&augment_with_inverse_fourier(&net, FourierKind::Dft).unwrap(), FourierKind::Dft).is_err());
    }
}
