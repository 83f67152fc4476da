//! Closed-form transport of time-domain relevance `R_n = x_n c_n` onto
//! Fourier and short-time Fourier coefficients.
//!
//! With `c_n = R_n / x_n`, a coefficient's relevance is its own value times
//! the transposed inverse transform applied to `c`. Real and imaginary parts
//! are computed separately and summed per coefficient. Totals are conserved
//! exactly, up to the division stabilizer.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::attribution::{guarded_ratio, ConservationReport, Domain, RelevanceMap};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::{self, window_weights, FastDft, Signal, Spectrogram, Spectrum};

/// Maximum coefficient deviation accepted between a supplied transform and
/// one recomputed from the signal.
pub const STALE_SPECTRUM_TOLERANCE: f64 = 1e-9;
/// Relative tolerance of the `R_k = R_{N−k}` check in [`fold_symmetric`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_DIVISION_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InspectionOptions {
    /// Floor on `|x_n|` in the quotient `R_n / x_n`, relative to `mean |x_n|`.
    pub epsilon: f64,
    /// Skip recomputing the transform from the signal.
    pub verified: bool,
    /// Evaluate only `k ≤ N/2` and mirror the rest.
    pub half_spectrum: bool,
    pub execution: Execution,
}

impl Default for InspectionOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_DIVISION_EPSILON,
            verified: false,
            half_spectrum: false,
            execution: Execution::default(),
        }
    }
}

/// Real and imaginary contributions per coefficient, before aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralComponents {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SpectralComponents {
    pub fn aggregate(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(a, b)| a + b).collect()
    }
}

fn quotients(relevance: &[f64], x: &[f64], epsilon: f64) -> Vec<f64> {
    let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64;
    let eps = epsilon * mean_abs;
    relevance.iter().zip(x).map(|(&r, &x)| guarded_ratio(r, x, eps)).collect()
}

fn check_lengths(relevance: &[f64], x: &[f64]) -> Result<()> {
    if relevance.len() != x.len() {
        return Err(Error::dim("time relevance", x.len(), relevance.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("signals need at least 2 samples".into()));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!("division epsilon must be non-negative, got {epsilon}")));
    }
    Ok(())
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Per-bin components `(Re(y_k)·Σ cos·c, −Im(y_k)·Σ sin·c) / √n` over a
/// block of `n` samples starting at offset `start` of `c` (out-of-range
/// samples contribute nothing).
fn block_components(re: f64, im: f64, k: usize, c: &[f64], start: isize, n: usize) -> (f64, f64) {
    let (mut sc, mut ss) = (0.0, 0.0);
    for local in 0..n {
        let t = start + local as isize;
        if t < 0 || t as usize >= c.len() {
            continue;
        }
        let cv = c[t as usize];
        if cv == 0.0 {
            continue;
        }
        let theta = 2.0 * PI * ((k * local) % n) as f64 / n as f64;
        sc += theta.cos() * cv;
        ss += theta.sin() * cv;
    }
    let scale = 1.0 / (n as f64).sqrt();
    (scale * re * sc, -scale * im * ss)
}

/// Real and imaginary relevance components on the full DFT.
pub fn dft_lrp_components(
    relevance: &[f64],
    x: &[f64],
    spectrum: &Spectrum,
    opts: &InspectionOptions,
) -> Result<SpectralComponents> {
    check_lengths(relevance, x)?;
    check_epsilon(opts.epsilon)?;
    let n = x.len();
    if spectrum.len() != n {
        return Err(Error::dim("spectrum", n, spectrum.len()));
    }
    if !opts.verified {
        let fresh = FastDft::new(n).forward(x)?;
        let dev = max_deviation(&fresh.re, &spectrum.re).max(max_deviation(&fresh.im, &spectrum.im));
        if dev > STALE_SPECTRUM_TOLERANCE {
            return Err(Error::StaleSpectrum { max_deviation: dev });
        }
    }
    let c = quotients(relevance, x, opts.epsilon);
    let bins = if opts.half_spectrum { n / 2 + 1 } else { n };
    let parts = par::map_indices(bins, opts.execution, |k| {
        block_components(spectrum.re[k], spectrum.im[k], k, &c, 0, n)
    });
    let (mut re, mut im): (Vec<f64>, Vec<f64>) = parts.into_iter().unzip();
    if opts.half_spectrum {
        for k in bins..n {
            re.push(re[n - k]);
            im.push(im[n - k]);
        }
    }
    Ok(SpectralComponents { re, im })
}

fn inspection_map(
    domain: Domain,
    shape: Vec<usize>,
    values: Vec<f64>,
    method: &str,
    opts: &InspectionOptions,
    time_total: f64,
) -> RelevanceMap {
    let total = values.iter().sum();
    RelevanceMap {
        domain,
        shape,
        values,
        method: method.to_string(),
        target: None,
        params: serde_json::json!({
            "epsilon": opts.epsilon,
            "half_spectrum": opts.half_spectrum,
        }),
        conservation_report: ConservationReport::new("time_relevance_total", Some(time_total), total),
        window: None,
    }
}

/// Frequency-domain relevance `R_k` from time-domain relevance `R_n`.
pub fn dft_lrp(relevance: &[f64], x: &[f64], spectrum: &Spectrum, opts: &InspectionOptions) -> Result<RelevanceMap> {
    let parts = dft_lrp_components(relevance, x, spectrum, opts)?;
    Ok(inspection_map(
        Domain::Frequency,
        vec![x.len()],
        parts.aggregate(),
        "dft_lrp",
        opts,
        relevance.iter().sum(),
    ))
}

/// Real and imaginary relevance components per frame and bin, frame-major.
pub fn stdft_lrp_components(
    relevance: &[f64],
    x: &[f64],
    spec: &Spectrogram,
    opts: &InspectionOptions,
) -> Result<SpectralComponents> {
    check_lengths(relevance, x)?;
    check_epsilon(opts.epsilon)?;
    let n = x.len();
    let window = spec.window;
    if spec.original_length != n {
        return Err(Error::dim("spectrogram signal length", n, spec.original_length));
    }
    let weights = window_weights(&window, n)?;
    if spec.frames != weights.frames || spec.bins != window.width {
        return Err(Error::dim("spectrogram frames × bins", weights.frames * window.width, spec.frames * spec.bins));
    }
    if !opts.verified {
        let fresh = spectral::stdft(&Signal::new(x.to_vec())?, &window)?;
        let dev = max_deviation(&fresh.re, &spec.re).max(max_deviation(&fresh.im, &spec.im));
        if dev > STALE_SPECTRUM_TOLERANCE {
            return Err(Error::StaleSpectrum { max_deviation: dev });
        }
    }
    let h = window.width;
    let c: Vec<f64> = quotients(relevance, x, opts.epsilon)
        .iter()
        .zip(&weights.sums)
        .map(|(c, w)| c / w)
        .collect();
    let bins = if opts.half_spectrum { h / 2 + 1 } else { h };
    let parts = par::map_indices(spec.frames * bins, opts.execution, |i| {
        let (m, k) = (i / bins, i % bins);
        block_components(spec.re[m * h + k], spec.im[m * h + k], k, &c, window.frame_start(m), h)
    });
    let mut re = vec![0.0; spec.frames * h];
    let mut im = vec![0.0; spec.frames * h];
    for (i, (r, j)) in parts.into_iter().enumerate() {
        let (m, k) = (i / bins, i % bins);
        re[m * h + k] = r;
        im[m * h + k] = j;
    }
    if opts.half_spectrum {
        for m in 0..spec.frames {
            for k in bins..h {
                re[m * h + k] = re[m * h + h - k];
                im[m * h + k] = im[m * h + h - k];
            }
        }
    }
    Ok(SpectralComponents { re, im })
}

/// Time-frequency relevance `R_{m,k}` from time-domain relevance `R_n`.
pub fn stdft_lrp(relevance: &[f64], x: &[f64], spec: &Spectrogram, opts: &InspectionOptions) -> Result<RelevanceMap> {
    let parts = stdft_lrp_components(relevance, x, spec, opts)?;
    let mut map = inspection_map(
        Domain::TimeFrequency,
        vec![spec.frames, spec.bins],
        parts.aggregate(),
        "stdft_lrp",
        opts,
        relevance.iter().sum(),
    );
    map.window = Some(spec.window);
    Ok(map)
}

fn spectral_rows(map: &RelevanceMap) -> Result<(usize, usize)> {
    match (map.domain, map.shape.as_slice()) {
        (Domain::Frequency, [n]) => Ok((1, *n)),
        (Domain::TimeFrequency, [m, h]) => Ok((*m, *h)),
        _ => Err(Error::UnsupportedDomain(format!(
            "folding needs a frequency or time-frequency map, got {} with shape {:?}",
            map.domain, map.shape
        ))),
    }
}

fn fold_rows(values: &[f64], rows: usize, n: usize) -> Vec<f64> {
    let half = n / 2 + 1;
    let mut out = Vec::with_capacity(rows * half);
    for row in values.chunks(n) {
        for k in 0..half {
            let mirror = (n - k) % n;
            out.push(if mirror == k { row[k] } else { row[k] + row[mirror] });
        }
    }
    debug_assert_eq!(out.len(), rows * half);
    out
}

fn folded(map: &RelevanceMap, rows: usize, n: usize) -> RelevanceMap {
    let mut out = map.clone();
    out.values = fold_rows(&map.values, rows, n);
    out.shape = match map.domain {
        Domain::TimeFrequency => vec![rows, n / 2 + 1],
        _ => vec![n / 2 + 1],
    };
    if let serde_json::Value::Object(obj) = &mut out.params {
        obj.insert("folded".into(), serde_json::Value::Bool(true));
    }
    out
}

/// Merges `R_k` and `R_{N−k}` into bins `0..=N/2` (per frame for
/// time-frequency maps) after checking that the map is even-symmetric.
pub fn fold_symmetric(map: &RelevanceMap) -> Result<RelevanceMap> {
    let (rows, n) = spectral_rows(map)?;
    let scale = map.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (r, row) in map.values.chunks(n).enumerate() {
        for k in 1..n {
            let dev = (row[k] - row[n - k]).abs();
            if dev > SYMMETRY_TOLERANCE * scale {
                return Err(Error::Symmetry {
                    index: r * n + k,
                    deviation: dev,
                });
            }
        }
    }
    Ok(folded(map, rows, n))
}

/// Same merge as [`fold_symmetric`] without the symmetry check, for maps
/// that are not symmetric by construction (e.g. gradients).
pub fn fold_sum(map: &RelevanceMap) -> Result<RelevanceMap> {
    let (rows, n) = spectral_rows(map)?;
    Ok(folded(map, rows, n))
}

fn diverging_color(v: f64, scale: f64) -> String {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    let (r, g, b) = if t >= 0.0 {
        (255, fade(t), fade(t))
    } else {
        (fade(-t), fade(-t), 255)
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// SVG heatmap of a 2-D map: frames left to right, bins bottom to top,
/// red for positive and blue for negative relevance, white at zero.
pub fn svg_heatmap(map: &RelevanceMap) -> Result<String> {
    let (rows, cols) = match map.shape.as_slice() {
        [m, h] => (*m, *h),
        [n] => (1, *n),
        _ => return Err(Error::InvalidInput(format!("cannot draw map with shape {:?}", map.shape))),
    };
    const CELL: usize = 6;
    let (width, height) = (rows * CELL, cols * CELL);
    let scale = map.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" shape-rendering=\"crispEdges\">\n"
    );
    writeln!(svg, "<title>{} relevance ({}), max |R| = {scale:e}</title>", map.method, map.domain).unwrap();
    for m in 0..rows {
        for k in 0..cols {
            let v = map.values[m * cols + k];
            writeln!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\"/>",
                m * CELL,
                (cols - 1 - k) * CELL,
                diverging_color(v, scale)
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
