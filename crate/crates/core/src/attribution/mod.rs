//! Attribution of a network's output logit to its input features: LRP,
//! sensitivity, gradient × input and integrated gradients. On a network
//! augmented with an inverse-Fourier input layer the input features are
//! Fourier coefficients, and maps are reported per complex coefficient.

mod gradient;
mod lrp;
mod virtual_layer;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gradient::{gradient_x_input, integrated_gradients, mean_path_gradient, sensitivity, DEFAULT_IG_STEPS, MIN_IG_STEPS};
pub use lrp::{lrp, lrp_input_relevance};
pub(crate) use lrp::guarded_ratio;
pub use virtual_layer::{augment_explicit, augment_with_inverse_fourier, FourierKind, InverseFourier};

use crate::error::{Error, Result};
use crate::net::{Layer, Network};
use crate::spectral::WindowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "param", rename_all = "snake_case")]
pub enum LrpRule {
    Zero,
    /// Stabilizer relative to the mean absolute pre-activation of the layer.
    /// On the inverse-Fourier layer it is a floor on `|z_j|` rather than a
    /// shift, matching the closed-form spectral redistribution.
    Epsilon(f64),
    Gamma(f64),
    ZPlus,
}

impl LrpRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LrpRule::Epsilon(e) if !(e.is_finite() && e > 0.0) => {
                Err(Error::Config(format!("epsilon must be positive, got {e}")))
            }
            LrpRule::Gamma(g) if !(g.is_finite() && g >= 0.0) => {
                Err(Error::Config(format!("gamma must be non-negative, got {g}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LrpRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LrpRule::Zero => write!(f, "zero"),
            LrpRule::Epsilon(e) => write!(f, "epsilon:{e}"),
            LrpRule::Gamma(g) => write!(f, "gamma:{g}"),
            LrpRule::ZPlus => write!(f, "zplus"),
        }
    }
}

impl FromStr for LrpRule {
    type Err = Error;

    /// `zero`, `zplus`, `epsilon[:value]`, `gamma[:value]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let value = |default: f64| -> Result<f64> {
            param.map_or(Ok(default), |p| {
                p.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad parameter in LRP rule '{s}': {e}")))
            })
        };
        let rule = match name {
            "zero" | "z" => LrpRule::Zero,
            "epsilon" | "eps" => LrpRule::Epsilon(value(DEFAULT_DENSE_EPSILON)?),
            "gamma" => LrpRule::Gamma(value(0.25)?),
            "zplus" | "z+" => LrpRule::ZPlus,
            other => return Err(Error::Config(format!("unknown LRP rule '{other}'"))),
        };
        if param.is_some() && matches!(rule, LrpRule::Zero | LrpRule::ZPlus) {
            return Err(Error::Config(format!("LRP rule '{name}' takes no parameter")));
        }
        rule.validate()?;
        Ok(rule)
    }
}

pub const DEFAULT_DENSE_EPSILON: f64 = 1e-6;
/// Matches the default division stabilizer of the closed-form spectral LRP.
pub const DEFAULT_VIRTUAL_EPSILON: f64 = 1e-9;

/// One rule per layer; `None` for layers without a linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrpRules {
    rules: Vec<Option<LrpRule>>,
    /// Adds the (rule-modified) bias to every denominator. The bias then
    /// absorbs its share of relevance instead of passing it to the inputs,
    /// so the input total no longer equals the logit.
    #[serde(default)]
    bias_in_denominator: bool,
}

impl LrpRules {
    /// z⁺ for convolutions, ε for dense layers and the virtual layer.
    pub fn default_for(net: &Network) -> Self {
        Self::from_fn(net, |layer| match layer {
            Layer::Conv1d(_) => LrpRule::ZPlus,
            Layer::InverseFourier(_) => LrpRule::Epsilon(DEFAULT_VIRTUAL_EPSILON),
            _ => LrpRule::Epsilon(DEFAULT_DENSE_EPSILON),
        })
    }

    /// `rule` on every parametrized layer; the virtual layer keeps its default.
    pub fn uniform(net: &Network, rule: LrpRule) -> Self {
        Self::from_fn(net, |layer| match layer {
            Layer::InverseFourier(_) => LrpRule::Epsilon(DEFAULT_VIRTUAL_EPSILON),
            _ => rule,
        })
    }

    fn from_fn(net: &Network, f: impl Fn(&Layer) -> LrpRule) -> Self {
        Self {
            rules: net
                .layers()
                .iter()
                .map(|l| if l.is_linear() { Some(f(l)) } else { None })
                .collect(),
            bias_in_denominator: false,
        }
    }

    pub fn with_bias_in_denominator(mut self, on: bool) -> Self {
        self.bias_in_denominator = on;
        self
    }

    pub fn bias_in_denominator(&self) -> bool {
        self.bias_in_denominator
    }

    /// Overrides the rule of layer `index`.
    pub fn with_rule(mut self, index: usize, rule: LrpRule) -> Result<Self> {
        match self.rules.get_mut(index) {
            Some(slot @ Some(_)) => {
                *slot = Some(rule);
                Ok(self)
            }
            _ => Err(Error::Config(format!("layer {index} does not take an LRP rule"))),
        }
    }

    pub fn rule(&self, index: usize) -> Option<LrpRule> {
        self.rules.get(index).copied().flatten()
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.rules.len() != net.layers().len() {
            return Err(Error::dim("LRP rules (one per layer)", net.layers().len(), self.rules.len()));
        }
        for (i, (layer, rule)) in net.layers().iter().zip(&self.rules).enumerate() {
            match (layer.is_linear(), rule) {
                (true, None) => return Err(Error::Config(format!("layer {i} ({}) needs an LRP rule", layer.name()))),
                (false, Some(_)) => {
                    return Err(Error::Config(format!("layer {i} ({}) takes no LRP rule", layer.name())))
                }
                _ => {}
            }
            if let Some(rule) = rule {
                rule.validate()?;
                if matches!(layer, Layer::InverseFourier(_)) && !matches!(rule, LrpRule::Zero | LrpRule::Epsilon(_)) {
                    return Err(Error::Config(format!(
                        "the inverse-Fourier layer supports only the zero and epsilon rules, got {rule}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn describe(&self) -> Vec<String> {
        self.rules
            .iter()
            .map(|r| r.map_or_else(|| "-".to_string(), |r| r.to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Time,
    Frequency,
    TimeFrequency,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Time => "time",
            Domain::Frequency => "frequency",
            Domain::TimeFrequency => "time_frequency",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Domain::Time),
            "frequency" | "freq" => Ok(Domain::Frequency),
            "time_frequency" | "time-frequency" | "tf" => Ok(Domain::TimeFrequency),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Lrp(LrpRules),
    Sensitivity,
    GradientXInput,
    IntegratedGradients { steps: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Lrp(_) => "lrp",
            Method::Sensitivity => "sensitivity",
            Method::GradientXInput => "gradient_x_input",
            Method::IntegratedGradients { .. } => "integrated_gradients",
        }
    }
}

/// How far the attribution total is from the quantity it should sum to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// What the total is compared against, e.g. `logit` or `logit_minus_baseline`.
    pub reference_kind: String,
    pub reference: Option<f64>,
    pub total: f64,
    /// `total − reference`.
    pub deficit: Option<f64>,
    /// `|deficit| / |reference|`.
    pub relative_deficit: Option<f64>,
}

impl ConservationReport {
    pub fn new(reference_kind: &str, reference: Option<f64>, total: f64) -> Self {
        let deficit = reference.map(|r| total - r);
        Self {
            reference_kind: reference_kind.to_string(),
            reference,
            total,
            deficit,
            relative_deficit: reference.zip(deficit).map(|(r, d)| d.abs() / r.abs().max(f64::MIN_POSITIVE)),
        }
    }

    pub fn unchecked(total: f64) -> Self {
        Self::new("none", None, total)
    }
}

/// Attribution scores over the input features of one sample.
///
/// Frequency maps have shape `[N]` and time-frequency maps `[frames, bins]`
/// (row-major, frame-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMap {
    pub domain: Domain,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    pub params: serde_json::Value,
    pub conservation_report: ConservationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
}

impl RelevanceMap {
    /// Builds a map from an attribution over the raw network input,
    /// aggregating `[Re; Im]` pairs when the network is augmented.
    pub(crate) fn from_input_attribution(
        net: &Network,
        raw: Vec<f64>,
        method: &str,
        target: usize,
        params: serde_json::Value,
        report: ConservationReport,
    ) -> Self {
        Self::from_operator_attribution(net.virtual_input(), raw, method, target, params, report)
    }

    /// Like `from_input_attribution` for attributions `raw` over the
    /// coefficient vector of `op` (or the time signal when `op` is `None`).
    pub(crate) fn from_operator_attribution(
        op: Option<&InverseFourier>,
        raw: Vec<f64>,
        method: &str,
        target: usize,
        params: serde_json::Value,
        report: ConservationReport,
    ) -> Self {
        match op {
            Some(op) => Self {
                domain: op.domain(),
                shape: op.shape(),
                values: op.aggregate(&raw),
                method: method.to_string(),
                target: Some(target),
                params,
                conservation_report: report,
                window: op.window(),
            },
            None => Self {
                domain: Domain::Time,
                shape: vec![raw.len()],
                values: raw,
                method: method.to_string(),
                target: Some(target),
                params,
                conservation_report: report,
                window: None,
            },
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Per-frame totals of a time-frequency map; a single entry otherwise.
    pub fn frame_sums(&self) -> Vec<f64> {
        match self.shape.as_slice() {
            [_, bins] => self.values.chunks(*bins).map(|c| c.iter().sum()).collect(),
            _ => vec![self.total()],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("relevance map serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: RelevanceMap = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e))?;
        let expected: usize = map.shape.iter().product();
        if expected != map.values.len() {
            return Err(Error::dim("relevance map values", expected, map.values.len()));
        }
        Ok(map)
    }

    /// Flat CSV: `index,value` for 1-D maps, `frame,bin,value` for 2-D.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.shape.as_slice() {
            [_, bins] => {
                out.push_str("frame,bin,value\n");
                for (i, v) in self.values.iter().enumerate() {
                    out.push_str(&format!("{},{},{v:?}\n", i / bins, i % bins));
                }
            }
            _ => {
                out.push_str("index,value\n");
                for (i, v) in self.values.iter().enumerate() {
                    out.push_str(&format!("{i},{v:?}\n"));
                }
            }
        }
        out
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Runs `method` for logit `target` on network input `input`.
pub fn attribute(net: &Network, input: &[f64], method: &Method, target: usize) -> Result<RelevanceMap> {
    match method {
        Method::Lrp(rules) => lrp(net, input, rules, target),
        Method::Sensitivity => sensitivity(net, input, target),
        Method::GradientXInput => gradient_x_input(net, input, target),
        Method::IntegratedGradients { steps } => integrated_gradients(net, input, target, *steps),
    }
}

/// Maps a time signal to the input representation `net` expects.
pub fn encode_input(net: &Network, signal: &[f64]) -> Result<Vec<f64>> {
    match net.virtual_input() {
        Some(op) => op.encode(signal),
        None => {
            net.check_input(signal.len())?;
            Ok(signal.to_vec())
        }
    }
}

fn rules_json(rules: &LrpRules) -> serde_json::Value {
    serde_json::json!({ "rules": rules.describe(), "bias_in_denominator": rules.bias_in_denominator })
}
