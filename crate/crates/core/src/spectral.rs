//! Unitary DFT / inverse DFT, windowed short-time DFT and its inverses.
//!
//! All transforms use the symmetric `1/√N` normalization so that the forward
//! and inverse maps are orthogonal and Parseval holds without extra factors.
//! Complex data is stored as parallel real/imaginary arrays.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the squared-window sum for the unscaled overlap-add inverse.
pub const COLA_TOLERANCE: f64 = 1e-9;

/// A real-valued, finite time series of at least two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: Option<f64>,
}

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate: None,
        })
    }

    pub fn with_sample_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidInput(format!("sample rate must be positive, got {rate}")));
        }
        self.sample_rate = Some(rate);
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }
}

/// Complex Fourier coefficients as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::dim("spectrum imaginary part", re.len(), im.len()));
        }
        if re.is_empty() {
            return Err(Error::Empty("spectrum".into()));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite spectral coefficient".into()));
        }
        Ok(Self { re, im })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| i.atan2(*r)).collect()
    }

    pub fn energy(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum()
    }

    /// Largest deviation from the conjugate symmetry of a real signal's
    /// spectrum.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|k| {
                let j = (n - k) % n;
                (self.re[k] - self.re[j])
                    .abs()
                    .max((self.im[k] + self.im[j]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Precomputed `cos/sin(2π j / n)` for `j in 0..n`.
///
/// The kernel of every transform only needs the angle index `(k·n) mod N`,
/// which keeps the argument small and the table lookup exact.
#[derive(Debug, Clone)]
pub(crate) struct Twiddles {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    pub(crate) fn new(n: usize) -> Self {
        let (cos, sin) = (0..n)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Self { n, cos, sin }
    }

    #[inline]
    pub(crate) fn cos(&self, k: usize, t: usize) -> f64 {
        self.cos[(k * t) % self.n]
    }

    #[inline]
    pub(crate) fn sin(&self, k: usize, t: usize) -> f64 {
        self.sin[(k * t) % self.n]
    }

    /// Direct O(N²) forward transform of a slice of length `n`.
    pub(crate) fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.n);
        let scale = 1.0 / (self.n as f64).sqrt();
        let mut re = vec![0.0; self.n];
        let mut im = vec![0.0; self.n];
        for k in 0..self.n {
            let (mut sr, mut si) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                sr += v * self.cos(k, t);
                si -= v * self.sin(k, t);
            }
            re[k] = sr * scale;
            im[k] = si * scale;
        }
        (re, im)
    }

    /// Direct O(N²) inverse in real-signal form: the real part of the
    /// complex inverse transform.
    pub(crate) fn inverse_real(&self, re: &[f64], im: &[f64]) -> Vec<f64> {
        debug_assert_eq!(re.len(), self.n);
        debug_assert_eq!(im.len(), self.n);
        let scale = 1.0 / (self.n as f64).sqrt();
        (0..self.n)
            .map(|t| {
                let mut s = 0.0;
                for k in 0..self.n {
                    s += re[k] * self.cos(k, t) - im[k] * self.sin(k, t);
                }
                s * scale
            })
            .collect()
    }

    /// Transpose of [`Twiddles::inverse_real`]: maps a cotangent on the time
    /// samples back to (real, imaginary) coefficient cotangents.
    pub(crate) fn inverse_real_transpose(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(g.len(), self.n);
        let scale = 1.0 / (self.n as f64).sqrt();
        let mut gr = vec![0.0; self.n];
        let mut gi = vec![0.0; self.n];
        for k in 0..self.n {
            let (mut sr, mut si) = (0.0, 0.0);
            for (t, &v) in g.iter().enumerate() {
                sr += v * self.cos(k, t);
                si -= v * self.sin(k, t);
            }
            gr[k] = sr * scale;
            gi[k] = si * scale;
        }
        (gr, gi)
    }
}

/// Unitary forward DFT by direct summation.
pub fn dft(signal: &Signal) -> Spectrum {
    let (re, im) = Twiddles::new(signal.len()).forward(signal.samples());
    Spectrum { re, im }
}

/// Unitary inverse DFT in real-signal form.
pub fn idft(spectrum: &Spectrum) -> Result<Signal> {
    if spectrum.re.iter().chain(&spectrum.im).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite spectral coefficient".into()));
    }
    if spectrum.re.len() != spectrum.im.len() {
        return Err(Error::dim("spectrum imaginary part", spectrum.re.len(), spectrum.im.len()));
    }
    let tw = Twiddles::new(spectrum.len());
    Signal::new(tw.inverse_real(&spectrum.re, &spectrum.im))
}

/// FFT-backed transforms with the same normalization as [`dft`] / [`idft`].
///
/// Plans are created once and reused, which makes this the right choice for
/// repeated transforms of one length (e.g. feature flipping).
#[derive(Clone)]
pub struct FastDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FastDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastDft").field("n", &self.n).finish()
    }
}

impl FastDft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, x: &[f64]) -> Result<Spectrum> {
        if x.len() != self.n {
            return Err(Error::dim("fast dft input", self.n, x.len()));
        }
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let s = 1.0 / (self.n as f64).sqrt();
        Ok(Spectrum {
            re: buf.iter().map(|c| c.re * s).collect(),
            im: buf.iter().map(|c| c.im * s).collect(),
        })
    }

    /// Real part of the unitary inverse transform.
    pub fn inverse_real(&self, spectrum: &Spectrum) -> Result<Vec<f64>> {
        if spectrum.len() != self.n || spectrum.im.len() != self.n {
            return Err(Error::dim("fast idft input", self.n, spectrum.len()));
        }
        let mut buf: Vec<Complex64> = spectrum
            .re
            .iter()
            .zip(&spectrum.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        self.inverse.process(&mut buf);
        let s = 1.0 / (self.n as f64).sqrt();
        Ok(buf.iter().map(|c| c.re * s).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowShape {
    Rectangular,
    HalfSine,
    Hann,
}

impl std::str::FromStr for WindowShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangular" => Ok(Self::Rectangular),
            "halfsine" | "half_sine" | "half-sine" => Ok(Self::HalfSine),
            "hann" => Ok(Self::Hann),
            other => Err(Error::InvalidWindow(format!("unknown window shape '{other}'"))),
        }
    }
}

/// Window shape, width `H` and hop `D` of a short-time transform.
///
/// Frames are laid out so that every sample of the signal is covered by the
/// same number of frames when `D` divides `H`: frame `m` spans
/// `[m·D − (H − D), m·D + D)`, and positions outside the signal read as zero.
/// With `D = H` this is plain non-overlapping segmentation starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub shape: WindowShape,
    pub width: usize,
    pub hop: usize,
}

impl WindowSpec {
    pub fn new(shape: WindowShape, width: usize, hop: usize) -> Result<Self> {
        if width == 0 || hop == 0 || hop > width {
            return Err(Error::InvalidWindow(format!(
                "need 0 < hop <= width, got width={width} hop={hop}"
            )));
        }
        Ok(Self { shape, width, hop })
    }

    pub fn rectangular(width: usize) -> Result<Self> {
        Self::new(WindowShape::Rectangular, width, width)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.shape, self.width, self.hop).map(|_| ())
    }

    /// Window coefficients over one frame.
    ///
    /// Sine-type windows are sampled at half-integer positions so that no
    /// coefficient is zero. The rectangular window has height `√(D/H)`, which
    /// is 1 without overlap and makes the squared sum 1 whenever `D | H`.
    pub fn coefficients(&self) -> Vec<f64> {
        let h = self.width as f64;
        (0..self.width)
            .map(|i| {
                let phase = PI * (i as f64 + 0.5) / h;
                match self.shape {
                    WindowShape::Rectangular => (self.hop as f64 / h).sqrt(),
                    WindowShape::HalfSine => phase.sin(),
                    WindowShape::Hann => phase.sin().powi(2),
                }
            })
            .collect()
    }

    /// Number of frames needed to cover `n` samples.
    pub fn frame_count(&self, n: usize) -> usize {
        (n + self.width - self.hop - 1) / self.hop + 1
    }

    /// First time index (possibly negative) of frame `m`.
    pub fn frame_start(&self, m: usize) -> isize {
        (m * self.hop) as isize - (self.width - self.hop) as isize
    }

    /// Number of one-sided frequency bins per frame, `H/2 + 1`.
    pub fn half_bins(&self) -> usize {
        self.width / 2 + 1
    }
}

/// Short-time spectrum: `frames × bins` real and imaginary parts, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub window: WindowSpec,
    pub original_length: usize,
}

impl Spectrogram {
    pub fn frame_re(&self, m: usize) -> &[f64] {
        &self.re[m * self.bins..(m + 1) * self.bins]
    }

    pub fn frame_im(&self, m: usize) -> &[f64] {
        &self.im[m * self.bins..(m + 1) * self.bins]
    }

    fn check(&self) -> Result<()> {
        self.window.validate()?;
        let expected = self.window.frame_count(self.original_length);
        if self.frames != expected {
            return Err(Error::dim("spectrogram frames", expected, self.frames));
        }
        if self.bins != self.window.width {
            return Err(Error::dim("spectrogram bins", self.window.width, self.bins));
        }
        let len = self.frames * self.bins;
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::dim("spectrogram coefficients", len, self.re.len().min(self.im.len())));
        }
        if self.re.iter().chain(&self.im).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite spectrogram coefficient".into()));
        }
        Ok(())
    }
}

/// Window functions laid out on the full time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowWeights {
    pub frames: usize,
    pub length: usize,
    /// `frames × length`, row-major: `w_m(n)`.
    pub weights: Vec<f64>,
    /// Column sums `W_n = Σ_m w_m(n)`.
    pub sums: Vec<f64>,
}

impl WindowWeights {
    pub fn weight(&self, m: usize, n: usize) -> f64 {
        self.weights[m * self.length + n]
    }
}

/// Lays out every frame's window on `[0, n)` and sums over frames.
pub fn window_weights(window: &WindowSpec, n: usize) -> Result<WindowWeights> {
    window.validate()?;
    let frames = window.frame_count(n);
    let coeffs = window.coefficients();
    let mut weights = vec![0.0; frames * n];
    let mut sums = vec![0.0; n];
    for m in 0..frames {
        let start = window.frame_start(m);
        for (i, &w) in coeffs.iter().enumerate() {
            let t = start + i as isize;
            if t >= 0 && (t as usize) < n {
                weights[m * n + t as usize] = w;
                sums[t as usize] += w;
            }
        }
    }
    let scale = sums.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if let Some(index) = sums.iter().position(|w| w.abs() <= 1e-12 * scale.max(1.0)) {
        return Err(Error::WindowAdmissibility { index });
    }
    Ok(WindowWeights {
        frames,
        length: n,
        weights,
        sums,
    })
}

/// Windowed short-time DFT; each frame is transformed with a unitary
/// length-`H` DFT.
pub fn stdft(signal: &Signal, window: &WindowSpec) -> Result<Spectrogram> {
    let n = signal.len();
    window_weights(window, n)?;
    let coeffs = window.coefficients();
    let tw = Twiddles::new(window.width);
    let frames = window.frame_count(n);
    let x = signal.samples();
    let mut re = Vec::with_capacity(frames * window.width);
    let mut im = Vec::with_capacity(frames * window.width);
    let mut segment = vec![0.0; window.width];
    for m in 0..frames {
        let start = window.frame_start(m);
        for (i, s) in segment.iter_mut().enumerate() {
            let t = start + i as isize;
            *s = if t >= 0 && (t as usize) < n {
                x[t as usize] * coeffs[i]
            } else {
                0.0
            };
        }
        let (fr, fi) = tw.forward(&segment);
        re.extend(fr);
        im.extend(fi);
    }
    Ok(Spectrogram {
        re,
        im,
        frames,
        bins: window.width,
        window: *window,
        original_length: n,
    })
}

/// Overlap-adds per-frame inverse transforms, optionally multiplying each by
/// the synthesis window first.
fn overlap_add(spec: &Spectrogram, synthesis: Option<&[f64]>) -> Vec<f64> {
    let n = spec.original_length;
    let tw = Twiddles::new(spec.bins);
    let mut acc = vec![0.0; n];
    for m in 0..spec.frames {
        let seg = tw.inverse_real(spec.frame_re(m), spec.frame_im(m));
        let start = spec.window.frame_start(m);
        for (i, v) in seg.into_iter().enumerate() {
            let t = start + i as isize;
            if t >= 0 && (t as usize) < n {
                acc[t as usize] += synthesis.map_or(v, |w| v * w[i]);
            }
        }
    }
    acc
}

/// Weighted overlap-add inverse: `x̃_n = Σ_m iDFT(v_m)(n) / W_n`.
pub fn istdft_wola(spec: &Spectrogram) -> Result<Signal> {
    spec.check()?;
    let weights = window_weights(&spec.window, spec.original_length)?;
    let acc = overlap_add(spec, None);
    Signal::new(acc.iter().zip(&weights.sums).map(|(a, w)| a / w).collect())
}

/// Unscaled overlap-add inverse with synthesis windowing:
/// `x̃_n = Σ_m w_m(n) · iDFT(v_m)(n)`. Exact only when `Σ_m w_m(n)² = 1`.
pub fn istdft_cola(spec: &Spectrogram) -> Result<Signal> {
    spec.check()?;
    let weights = window_weights(&spec.window, spec.original_length)?;
    for n in 0..weights.length {
        let sum_sq: f64 = (0..weights.frames).map(|m| weights.weight(m, n).powi(2)).sum();
        if (sum_sq - 1.0).abs() > COLA_TOLERANCE {
            return Err(Error::ColaCondition { index: n, sum_sq });
        }
    }
    let coeffs = spec.window.coefficients();
    Signal::new(overlap_add(spec, Some(&coeffs)))
}
