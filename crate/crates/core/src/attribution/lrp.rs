//! Layer-wise relevance propagation.
//!
//! Every linear layer redistributes the relevance of its outputs onto its
//! inputs in proportion to the contributions `a_i w'_ji`, where `w'` is the
//! rule-modified weight. By default denominators leave out the bias, so
//! with the zero rule the input relevance sums exactly to the explained
//! logit; [`LrpRules::with_bias_in_denominator`] lets the bias absorb its
//! share instead.

use std::borrow::Cow;

use super::{rules_json, ConservationReport, LrpRule, LrpRules, RelevanceMap};
use crate::error::{Error, Result};
use crate::net::{Layer, Network};

/// `r / (z + eps·sign(z))` with `sign(0) = +1`; `0` when `r` is zero or the
/// stabilized denominator vanishes.
#[inline]
pub(crate) fn stabilized_ratio(r: f64, z: f64, eps: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let den = z + if z >= 0.0 { eps } else { -eps };
    if den == 0.0 {
        0.0
    } else {
        r / den
    }
}

/// `r / z` with `|z|` raised to at least `floor` (sign kept, `sign(0) = +1`);
/// `0` when `r` is zero or the guarded denominator vanishes. Unlike
/// [`stabilized_ratio`] this leaves every well-conditioned quotient exact.
#[inline]
pub(crate) fn guarded_ratio(r: f64, z: f64, floor: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let den = if z.abs() >= floor {
        z
    } else if z >= 0.0 {
        floor
    } else {
        -floor
    };
    if den == 0.0 {
        0.0
    } else {
        r / den
    }
}

fn mean_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64
}

/// Also used for biases when they enter the denominator.
fn modified_weights(w: &[f64], rule: LrpRule) -> Cow<'_, [f64]> {
    match rule {
        LrpRule::Zero | LrpRule::Epsilon(_) => Cow::Borrowed(w),
        LrpRule::ZPlus => Cow::Owned(w.iter().map(|&v| v.max(0.0)).collect()),
        LrpRule::Gamma(g) => Cow::Owned(w.iter().map(|&v| v + g * v.max(0.0)).collect()),
    }
}

/// Per-output scale `s_j = R_j / den_j` for the given rule. With `guard`
/// the ε-rule floors `|z_j|` instead of shifting it.
fn scales(rule: LrpRule, z: &[f64], r: &[f64], layer: usize, guard: bool) -> Result<Vec<f64>> {
    match rule {
        LrpRule::Zero => z
            .iter()
            .zip(r)
            .enumerate()
            .map(|(j, (&z, &r))| {
                if z != 0.0 {
                    Ok(r / z)
                } else if r == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Propagation(format!(
                        "zero denominator at layer {layer}, unit {j}, carrying relevance {r}"
                    )))
                }
            })
            .collect(),
        LrpRule::Epsilon(e) => {
            let eps = e * mean_abs(z);
            let ratio = if guard { guarded_ratio } else { stabilized_ratio };
            Ok(z.iter().zip(r).map(|(&z, &r)| ratio(r, z, eps)).collect())
        }
        LrpRule::ZPlus | LrpRule::Gamma(_) => Ok(z
            .iter()
            .zip(r)
            .map(|(&z, &r)| if z == 0.0 { 0.0 } else { r / z })
            .collect()),
    }
}

/// One propagation step through a linear layer for a single sample.
fn propagate_linear(
    layer: &Layer,
    rule: LrpRule,
    bias: bool,
    a: &[f64],
    r_out: &[f64],
    index: usize,
) -> Result<Vec<f64>> {
    let c = match layer {
        Layer::Dense(d) => {
            let w = modified_weights(&d.weights, rule);
            let b = bias.then(|| modified_weights(&d.bias, rule));
            let (i_n, o_n) = (d.in_features, d.out_features);
            let z: Vec<f64> = (0..o_n)
                .map(|o| {
                    let dot: f64 = w[o * i_n..(o + 1) * i_n].iter().zip(a).map(|(w, a)| w * a).sum();
                    dot + b.as_ref().map_or(0.0, |b| b[o])
                })
                .collect();
            let s = scales(rule, &z, r_out, index, false)?;
            let mut c = vec![0.0; i_n];
            for (o, &sj) in s.iter().enumerate() {
                if sj == 0.0 {
                    continue;
                }
                for (ci, w) in c.iter_mut().zip(&w[o * i_n..(o + 1) * i_n]) {
                    *ci += w * sj;
                }
            }
            c
        }
        Layer::Conv1d(conv) => {
            let w = modified_weights(&conv.weights, rule);
            let b = bias.then(|| modified_weights(&conv.bias, rule));
            let z = conv.convolve(&w, a, b.as_deref());
            let s = scales(rule, &z, r_out, index, false)?;
            conv.convolve_transpose(&w, &s, a.len())
        }
        Layer::InverseFourier(op) => {
            let z = op.apply(a);
            let s = scales(rule, &z, r_out, index, true)?;
            op.apply_transpose(&s)
        }
        Layer::Relu | Layer::Flatten => unreachable!("not a linear layer"),
    };
    Ok(a.iter().zip(&c).map(|(a, c)| a * c).collect())
}

/// Relevance of every network input for logit `target`, plus that logit.
pub fn lrp_input_relevance(net: &Network, input: &[f64], rules: &LrpRules, target: usize) -> Result<(Vec<f64>, f64)> {
    rules.validate(net)?;
    net.check_class(target)?;
    let trace = net.forward_trace(input)?;
    let logit = trace.logits()[target];
    let mut r = vec![0.0; net.num_classes()];
    r[target] = logit;
    for (i, layer) in net.layers().iter().enumerate().rev() {
        if let Some(rule) = rules.rule(i) {
            r = propagate_linear(layer, rule, rules.bias_in_denominator(), &trace.activations[i], &r, i)?;
        }
    }
    Ok((r, logit))
}

/// LRP relevance map for logit `target`. The conservation report compares
/// the total against the logit.
pub fn lrp(net: &Network, input: &[f64], rules: &LrpRules, target: usize) -> Result<RelevanceMap> {
    let (raw, logit) = lrp_input_relevance(net, input, rules, target)?;
    let total = raw.iter().sum();
    Ok(RelevanceMap::from_input_attribution(
        net,
        raw,
        "lrp",
        target,
        rules_json(rules),
        ConservationReport::new("logit", Some(logit), total),
    ))
}
