//! Gradient-based attributions.

use super::{ConservationReport, RelevanceMap};
use crate::error::{Error, Result};
use crate::net::Network;

pub const DEFAULT_IG_STEPS: usize = 256;
pub const MIN_IG_STEPS: usize = 8;

/// Path points are pushed through the network in chunks of this many rows.
const IG_CHUNK: usize = 64;

/// Raw input gradient of logit `target`.
pub fn sensitivity(net: &Network, input: &[f64], target: usize) -> Result<RelevanceMap> {
    let g = net.input_gradient(input, target)?;
    let total = g.iter().sum();
    Ok(RelevanceMap::from_input_attribution(
        net,
        g,
        "sensitivity",
        target,
        serde_json::json!({}),
        ConservationReport::unchecked(total),
    ))
}

/// Elementwise gradient × input.
pub fn gradient_x_input(net: &Network, input: &[f64], target: usize) -> Result<RelevanceMap> {
    let g = net.input_gradient(input, target)?;
    let raw: Vec<f64> = g.iter().zip(input).map(|(g, x)| g * x).collect();
    let total = raw.iter().sum();
    let logit = net.forward(input)?[target];
    Ok(RelevanceMap::from_input_attribution(
        net,
        raw,
        "gradient_x_input",
        target,
        serde_json::json!({}),
        ConservationReport::new("logit", Some(logit), total),
    ))
}

/// Mean gradient of logit `target` along `α·x`, `α` at the midpoints of
/// `steps` equal subintervals of `[0, 1]`, through `net.layers()[start..]`.
fn path_mean_gradient(net: &Network, start: usize, x: &[f64], target: usize, steps: usize) -> Vec<f64> {
    let n = x.len();
    let c = net.num_classes();
    let mut mean = vec![0.0; n];
    let alphas: Vec<f64> = (0..steps).map(|s| (s as f64 + 0.5) / steps as f64).collect();
    for chunk in alphas.chunks(IG_CHUNK) {
        let b = chunk.len();
        let mut rows = Vec::with_capacity(b * n);
        for &a in chunk {
            rows.extend(x.iter().map(|v| a * v));
        }
        let acts = net.forward_tail(start, rows, b);
        let mut seed = vec![0.0; b * c];
        for r in 0..b {
            seed[r * c + target] = 1.0;
        }
        let g = net.backward_tail(start, &acts, b, seed, None);
        for row in g.chunks(n) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
    }
    for m in &mut mean {
        *m /= steps as f64;
    }
    mean
}

/// Mean input gradient of logit `target` along the straight path from zero
/// to `input` (midpoint rule). Multiplying by `input` gives integrated
/// gradients.
pub fn mean_path_gradient(net: &Network, input: &[f64], target: usize, steps: usize) -> Result<Vec<f64>> {
    if steps < MIN_IG_STEPS {
        return Err(Error::Config(format!(
            "integrated gradients needs at least {MIN_IG_STEPS} steps, got {steps}"
        )));
    }
    net.check_class(target)?;
    net.check_input(input.len())?;
    Ok(match net.virtual_input() {
        Some(op) => op.apply_transpose(&path_mean_gradient(net, 1, &op.apply(input), target, steps)),
        None => path_mean_gradient(net, 0, input, target, steps),
    })
}

/// Integrated gradients from the all-zero baseline with a midpoint Riemann
/// sum. On an augmented network the path is integrated in signal space and
/// pulled back once through the transposed inverse transform, which is exact
/// because that layer is linear.
pub fn integrated_gradients(net: &Network, input: &[f64], target: usize, steps: usize) -> Result<RelevanceMap> {
    let g = mean_path_gradient(net, input, target, steps)?;
    let logits = net.forward(input)?;
    let baseline = net.forward(&vec![0.0; input.len()])?;
    let raw: Vec<f64> = g.iter().zip(input).map(|(g, z)| g * z).collect();
    let total = raw.iter().sum();
    Ok(RelevanceMap::from_input_attribution(
        net,
        raw,
        "integrated_gradients",
        target,
        serde_json::json!({ "steps": steps, "baseline": "zero" }),
        ConservationReport::new("logit_minus_baseline", Some(logits[target] - baseline[target]), total),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{augment_with_inverse_fourier, FourierKind};
    use crate::net::{Dense, Layer};

    #[test]
    fn linear_model_ig_equals_gradient_times_input() {
        let w = vec![0.5, -1.0, 2.0];
        let net = Network::new(vec![Layer::Dense(Dense::new(3, 1, w.clone(), vec![0.3]).unwrap())], 3).unwrap();
        let x = [1.0, 2.0, -0.5];
        let ig = integrated_gradients(&net, &x, 0, 8).unwrap();
        let gxi = gradient_x_input(&net, &x, 0).unwrap();
        for (a, b) in ig.values.iter().zip(&gxi.values) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(ig.conservation_report.deficit.unwrap().abs() < 1e-14);
    }

    #[test]
    fn too_few_steps_is_a_config_error() {
        let net = Network::mlp(4, &[3], 2, 0).unwrap();
        assert!(matches!(integrated_gradients(&net, &[0.0; 4], 0, 7), Err(Error::Config(_))));
    }

    #[test]
    fn augmented_ig_matches_direct_integration() {
        // Direct integration in coefficient space against the shortcut.
        let n = 16;
        let net = Network::mlp(n, &[10], 3, 5).unwrap();
        let aug = augment_with_inverse_fourier(&net, FourierKind::Dft).unwrap();
        let x: Vec<f64> = (0..n).map(|t| (0.9 * t as f64).sin()).collect();
        let z = aug.virtual_input().unwrap().encode(&x).unwrap();
        let steps = 32;
        let fast = integrated_gradients(&aug, &z, 1, steps).unwrap();
        let mut mean = vec![0.0; z.len()];
        for s in 0..steps {
            let a = (s as f64 + 0.5) / steps as f64;
            let zs: Vec<f64> = z.iter().map(|v| a * v).collect();
            for (m, g) in mean.iter_mut().zip(aug.input_gradient(&zs, 1).unwrap()) {
                *m += g / steps as f64;
            }
        }
        let raw: Vec<f64> = mean.iter().zip(&z).map(|(g, z)| g * z).collect();
        let slow = aug.virtual_input().unwrap().aggregate(&raw);
        for (a, b) in fast.values.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
