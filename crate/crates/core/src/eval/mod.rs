//! Quantitative evaluation of relevance maps: localization on ground-truth
//! bins, feature flipping, and complexity.

mod flip;
mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use flip::{
    domain_of, feature_flip, feature_order, flip_features, flip_grid, random_order, FlipCurve, FlipMode, Flipper,
    DEFAULT_GRID_POINTS,
};
pub use metrics::{auc_points, complexity, entropy, localization, localization_values, AxisScaling, Stat};

use crate::attribution::{
    lrp_input_relevance, mean_path_gradient, ConservationReport, Domain, FourierKind, InverseFourier, LrpRules,
    RelevanceMap, DEFAULT_IG_STEPS,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inspection::{dft_lrp, stdft_lrp, InspectionOptions};
use crate::net::{argmax, Network};
use crate::par::{self, Execution};
use crate::spectral::{Spectrogram, Spectrum, WindowSpec};
use crate::synth::{ground_truth_bins, TruthDomain};

/// Input domain in which maps are produced and features flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Time,
    Frequency,
    TimeFrequency { window: WindowSpec },
}

impl DomainSpec {
    pub fn domain(&self) -> Domain {
        match self {
            DomainSpec::Time => Domain::Time,
            DomainSpec::Frequency => Domain::Frequency,
            DomainSpec::TimeFrequency { .. } => Domain::TimeFrequency,
        }
    }

    pub fn fourier_kind(&self) -> Option<FourierKind> {
        match *self {
            DomainSpec::Time => None,
            DomainSpec::Frequency => Some(FourierKind::Dft),
            DomainSpec::TimeFrequency { window } => Some(FourierKind::Stdft(window)),
        }
    }

    /// Short stable name, e.g. `time_frequency[rect,H=51,D=51]`.
    pub fn label(&self) -> String {
        match self {
            DomainSpec::Time => "time".into(),
            DomainSpec::Frequency => "frequency".into(),
            DomainSpec::TimeFrequency { window } => {
                let shape = match window.shape {
                    crate::spectral::WindowShape::Rectangular => "rect",
                    crate::spectral::WindowShape::HalfSine => "halfsine",
                    crate::spectral::WindowShape::Hann => "hann",
                };
                format!("time_frequency[{shape},H={},D={}]", window.width, window.hop)
            }
        }
    }

    /// Coefficients per frame (the whole signal for the plain DFT).
    fn row_width(&self, n: usize) -> usize {
        match self {
            DomainSpec::TimeFrequency { window } => window.width,
            _ => n,
        }
    }

    fn truth_domain(&self) -> Option<TruthDomain> {
        match *self {
            DomainSpec::Time => None,
            DomainSpec::Frequency => Some(TruthDomain::Frequency),
            DomainSpec::TimeFrequency { window } => Some(TruthDomain::TimeFrequency(window)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Lrp,
    IntegratedGradients,
    GradientXInput,
    Sensitivity,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [
        MethodKind::Lrp,
        MethodKind::IntegratedGradients,
        MethodKind::GradientXInput,
        MethodKind::Sensitivity,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            MethodKind::Lrp => "lrp",
            MethodKind::IntegratedGradients => "ig",
            MethodKind::GradientXInput => "gxi",
            MethodKind::Sensitivity => "sensitivity",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lrp" => Ok(Self::Lrp),
            "ig" | "integrated_gradients" => Ok(Self::IntegratedGradients),
            "gxi" | "gradient_x_input" => Ok(Self::GradientXInput),
            "sensitivity" | "sens" => Ok(Self::Sensitivity),
            other => Err(Error::Config(format!("unknown attribution method '{other}'"))),
        }
    }
}

/// A domain with its inverse operator prepared for a fixed signal length.
pub struct DomainContext {
    pub spec: DomainSpec,
    op: Option<InverseFourier>,
}

impl DomainContext {
    pub fn new(spec: DomainSpec, n: usize) -> Result<Self> {
        let op = match spec.fourier_kind() {
            Some(kind) => Some(InverseFourier::new(kind, n)?),
            None => None,
        };
        Ok(Self { spec, op })
    }
}

/// Time-domain ingredients shared by all domains of one sample.
struct TimeQuantities {
    logit: f64,
    baseline_logit: f64,
    lrp: Option<Vec<f64>>,
    gradient: Option<Vec<f64>>,
    path_gradient: Option<Vec<f64>>,
}

fn time_quantities(
    net: &Network,
    x: &[f64],
    target: usize,
    methods: &[MethodKind],
    rules: &LrpRules,
    ig_steps: usize,
) -> Result<TimeQuantities> {
    let wants = |m: MethodKind| methods.contains(&m);
    let lrp = if wants(MethodKind::Lrp) {
        Some(lrp_input_relevance(net, x, rules, target)?.0)
    } else {
        None
    };
    let gradient = if wants(MethodKind::Sensitivity) || wants(MethodKind::GradientXInput) {
        Some(net.input_gradient(x, target)?)
    } else {
        None
    };
    let path_gradient = if wants(MethodKind::IntegratedGradients) {
        Some(mean_path_gradient(net, x, target, ig_steps)?)
    } else {
        None
    };
    Ok(TimeQuantities {
        logit: net.forward(x)?[target],
        baseline_logit: net.forward(&vec![0.0; x.len()])?[target],
        lrp,
        gradient,
        path_gradient,
    })
}

/// Relevance maps of one sample for every (method, domain) pair, indexed
/// `[method][domain]`.
///
/// Gradient methods in a spectral domain are the attribution of the network
/// augmented with that domain's inverse transform: the chain rule through
/// the fixed linear layer turns the time gradient `g` into `Tᵀg`. LRP uses
/// the closed-form spectral redistribution of the time-domain relevance.
pub fn sample_maps(
    net: &Network,
    x: &[f64],
    target: usize,
    methods: &[MethodKind],
    domains: &[DomainContext],
    rules: &LrpRules,
    ig_steps: usize,
) -> Result<Vec<Vec<RelevanceMap>>> {
    if net.virtual_input().is_some() {
        return Err(Error::Config("evaluation expects a time-domain network".into()));
    }
    net.check_input(x.len())?;
    net.check_class(target)?;
    let tq = time_quantities(net, x, target, methods, rules, ig_steps)?;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut row = Vec::with_capacity(domains.len());
        for ctx in domains {
            row.push(domain_map(&tq, x, target, method, ctx, rules, ig_steps)?);
        }
        out.push(row);
    }
    Ok(out)
}

fn domain_map(
    tq: &TimeQuantities,
    x: &[f64],
    target: usize,
    method: MethodKind,
    ctx: &DomainContext,
    rules: &LrpRules,
    ig_steps: usize,
) -> Result<RelevanceMap> {
    let name = match method {
        MethodKind::Lrp => "lrp",
        MethodKind::IntegratedGradients => "integrated_gradients",
        MethodKind::GradientXInput => "gradient_x_input",
        MethodKind::Sensitivity => "sensitivity",
    };
    if method == MethodKind::Lrp {
        let r = tq.lrp.as_ref().expect("requested");
        let mut map = match &ctx.op {
            None => {
                let total = r.iter().sum();
                return Ok(RelevanceMap {
                    domain: Domain::Time,
                    shape: vec![x.len()],
                    values: r.clone(),
                    method: name.into(),
                    target: Some(target),
                    params: serde_json::to_value(rules).unwrap_or_default(),
                    conservation_report: ConservationReport::new("logit", Some(tq.logit), total),
                    window: None,
                });
            }
            Some(op) => {
                let z = op.encode(x)?;
                let c = op.coefficient_count();
                let (re, im) = (z[..c].to_vec(), z[c..].to_vec());
                let opts = InspectionOptions {
                    verified: true,
                    execution: Execution::Sequential,
                    ..InspectionOptions::default()
                };
                match ctx.spec {
                    DomainSpec::TimeFrequency { window } => {
                        let spec = Spectrogram {
                            re,
                            im,
                            frames: op.shape()[0],
                            bins: window.width,
                            window,
                            original_length: x.len(),
                        };
                        stdft_lrp(r, x, &spec, &opts)?
                    }
                    _ => dft_lrp(r, x, &Spectrum { re, im }, &opts)?,
                }
            }
        };
        map.method = name.into();
        map.target = Some(target);
        let total = map.total();
        map.conservation_report = ConservationReport::new("logit", Some(tq.logit), total);
        return Ok(map);
    }

    let (grad, multiply, params) = match method {
        MethodKind::Sensitivity => (tq.gradient.as_ref(), false, serde_json::json!({})),
        MethodKind::GradientXInput => (tq.gradient.as_ref(), true, serde_json::json!({})),
        MethodKind::IntegratedGradients => (
            tq.path_gradient.as_ref(),
            true,
            serde_json::json!({ "steps": ig_steps, "baseline": "zero" }),
        ),
        MethodKind::Lrp => unreachable!(),
    };
    let grad = grad.expect("requested");
    let raw: Vec<f64> = match &ctx.op {
        None => {
            if multiply {
                grad.iter().zip(x).map(|(g, x)| g * x).collect()
            } else {
                grad.clone()
            }
        }
        Some(op) => {
            let pulled = op.apply_transpose(grad);
            if multiply {
                let z = op.encode(x)?;
                pulled.iter().zip(&z).map(|(g, z)| g * z).collect()
            } else {
                pulled
            }
        }
    };
    let total = raw.iter().sum();
    let report = match method {
        MethodKind::Sensitivity => ConservationReport::unchecked(total),
        MethodKind::GradientXInput => ConservationReport::new("logit", Some(tq.logit), total),
        _ => ConservationReport::new("logit_minus_baseline", Some(tq.logit - tq.baseline_logit), total),
    };
    Ok(RelevanceMap::from_operator_attribution(ctx.op.as_ref(), raw, name, target, params, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub methods: Vec<MethodKind>,
    pub domains: Vec<DomainSpec>,
    pub ig_steps: usize,
    /// LRP denominators include the bias (see [`LrpRules`]).
    pub lrp_bias_in_denominator: bool,
    /// Run SDF/SCF flipping (the expensive part).
    pub flip: bool,
    pub flip_grid_points: usize,
    /// Samples with these labels are left out of flipping. Label 0 (no
    /// frequency present) cannot be destroyed by removing features.
    pub flip_exclude_labels: Vec<usize>,
    pub random_baseline: bool,
    pub axis: AxisScaling,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            methods: MethodKind::ALL.to_vec(),
            domains: vec![DomainSpec::Time, DomainSpec::Frequency],
            ig_steps: DEFAULT_IG_STEPS,
            lrp_bias_in_denominator: false,
            flip: true,
            flip_grid_points: DEFAULT_GRID_POINTS,
            flip_exclude_labels: Vec::new(),
            random_baseline: true,
            axis: AxisScaling::default(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no attribution methods selected".into()));
        }
        if self.domains.is_empty() {
            return Err(Error::Config("no domains selected".into()));
        }
        if self.ig_steps < crate::attribution::MIN_IG_STEPS && self.methods.contains(&MethodKind::IntegratedGradients) {
            return Err(Error::Config(format!(
                "integrated gradients needs at least {} steps",
                crate::attribution::MIN_IG_STEPS
            )));
        }
        for d in &self.domains {
            if let DomainSpec::TimeFrequency { window } = d {
                window.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub method: MethodKind,
    pub domain: DomainSpec,
    pub domain_label: String,
    /// Missing in the time domain or without ground truth.
    pub lambda: Option<Stat>,
    pub complexity: Stat,
    pub sdf_auc: Option<Stat>,
    pub scf_auc: Option<Stat>,
    pub sdf_curve: Option<Vec<(f64, f64)>>,
    pub scf_curve: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub domain: DomainSpec,
    pub domain_label: String,
    pub sdf_auc: Stat,
    pub scf_auc: Stat,
    pub sdf_curve: Vec<(f64, f64)>,
    pub scf_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub signal_length: usize,
    pub num_classes: usize,
    pub samples: usize,
    pub flip_samples: usize,
    pub accuracy: f64,
    pub k_star: Option<Vec<usize>>,
    pub config: EvalConfig,
    pub entries: Vec<EvalEntry>,
    pub random_baseline: Vec<BaselineEntry>,
}

struct CellOutcome {
    lambda: Option<f64>,
    complexity: f64,
    sdf: Option<FlipCurve>,
    scf: Option<FlipCurve>,
}

struct SampleOutcome {
    correct: bool,
    flipped: bool,
    cells: Vec<CellOutcome>,
    random: Vec<Option<(FlipCurve, FlipCurve)>>,
}

fn mean_curve(curves: &[&FlipCurve]) -> Option<Vec<(f64, f64)>> {
    let first = curves.first()?;
    let mut acc: Vec<(f64, f64)> = first.points.iter().map(|&(f, _)| (f, 0.0)).collect();
    for c in curves {
        for (a, p) in acc.iter_mut().zip(&c.points) {
            a.1 += p.1;
        }
    }
    for a in &mut acc {
        a.1 /= curves.len() as f64;
    }
    Some(acc)
}

/// Maps unfolded coefficient indices with rows of `width` onto the folded
/// layout (bins `0..=width/2` per row); mirrored bins coincide.
fn folded_truth(truth: &[usize], width: usize) -> Vec<usize> {
    let half = width / 2 + 1;
    let mut out: Vec<usize> = truth
        .iter()
        .map(|&b| {
            let k = b % width;
            (b / width) * half + k.min(width - k)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Evaluates `net` on the samples `indices` of `data`, explaining each
/// sample's true class.
pub fn run_benchmark(net: &Network, data: &Dataset, indices: &[usize], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::Empty("evaluation sample set".into()));
    }
    net.check_input(data.signal_length())?;
    let n = data.signal_length();
    let k_star = data.synth_config().map(|s| s.k_star.clone());
    let contexts = cfg
        .domains
        .iter()
        .map(|&d| DomainContext::new(d, n))
        .collect::<Result<Vec<_>>>()?;
    let nm = cfg.methods.len();
    let rules = LrpRules::default_for(net).with_bias_in_denominator(cfg.lrp_bias_in_denominator);

    let outcomes = par::try_map_indices(indices.len(), cfg.execution, |s| -> Result<SampleOutcome> {
        let i = indices[s];
        let x = data.signal(i);
        let label = data.label(i);
        net.check_class(label)?;
        let correct = argmax(&net.forward(x)?) == label;
        let maps = sample_maps(net, x, label, &cfg.methods, &contexts, &rules, cfg.ig_steps)?;
        let flipped = cfg.flip && !cfg.flip_exclude_labels.contains(&label);
        let mut cells = Vec::with_capacity(nm * contexts.len());
        let mut flippers = Vec::with_capacity(contexts.len());
        for ctx in &contexts {
            flippers.push(if flipped { Some(Flipper::new(net, x, ctx.spec)?) } else { None });
        }
        for row in &maps {
            for ((map, ctx), flipper) in row.iter().zip(&contexts).zip(&flippers) {
                let features = flip_features(map, &ctx.spec, n)?;
                let lambda = match (&k_star, ctx.spec.truth_domain()) {
                    (Some(ks), Some(td)) => {
                        let truth = folded_truth(&ground_truth_bins(label, ks, n, td)?, ctx.spec.row_width(n));
                        Some(localization_values(&features, &truth)?)
                    }
                    _ => None,
                };
                let (sdf, scf) = match flipper {
                    Some(fl) => {
                        let order = feature_order(&features);
                        (
                            Some(fl.curve(&order, FlipMode::Sdf, label, cfg.flip_grid_points, cfg.axis)?),
                            Some(fl.curve(&order, FlipMode::Scf, label, cfg.flip_grid_points, cfg.axis)?),
                        )
                    }
                    None => (None, None),
                };
                cells.push(CellOutcome {
                    lambda,
                    complexity: entropy(&features),
                    sdf,
                    scf,
                });
            }
        }
        let mut random = Vec::with_capacity(contexts.len());
        for (d, flipper) in flippers.iter().enumerate() {
            random.push(match flipper {
                Some(fl) if cfg.random_baseline => {
                    let seed = cfg
                        .seed
                        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        .wrapping_add((i as u64) << 8 | d as u64);
                    let order = random_order(fl.features(), seed);
                    Some((
                        fl.curve(&order, FlipMode::Sdf, label, cfg.flip_grid_points, cfg.axis)?,
                        fl.curve(&order, FlipMode::Scf, label, cfg.flip_grid_points, cfg.axis)?,
                    ))
                }
                _ => None,
            });
        }
        Ok(SampleOutcome {
            correct,
            flipped,
            cells,
            random,
        })
    })?;

    let mut entries = Vec::with_capacity(nm * contexts.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (di, ctx) in contexts.iter().enumerate() {
            let cell = mi * contexts.len() + di;
            let lambdas: Vec<f64> = outcomes.iter().filter_map(|o| o.cells[cell].lambda).collect();
            let complexities: Vec<f64> = outcomes.iter().map(|o| o.cells[cell].complexity).collect();
            let sdf: Vec<&FlipCurve> = outcomes.iter().filter_map(|o| o.cells[cell].sdf.as_ref()).collect();
            let scf: Vec<&FlipCurve> = outcomes.iter().filter_map(|o| o.cells[cell].scf.as_ref()).collect();
            entries.push(EvalEntry {
                method,
                domain: ctx.spec,
                domain_label: ctx.spec.label(),
                lambda: Stat::from_values(&lambdas),
                complexity: Stat::from_values(&complexities).expect("at least one sample"),
                sdf_auc: Stat::from_values(&sdf.iter().map(|c| c.auc).collect::<Vec<_>>()),
                scf_auc: Stat::from_values(&scf.iter().map(|c| c.auc).collect::<Vec<_>>()),
                sdf_curve: mean_curve(&sdf),
                scf_curve: mean_curve(&scf),
            });
        }
    }
    let mut random_baseline = Vec::new();
    for (di, ctx) in contexts.iter().enumerate() {
        let pairs: Vec<&(FlipCurve, FlipCurve)> = outcomes.iter().filter_map(|o| o.random[di].as_ref()).collect();
        if pairs.is_empty() {
            continue;
        }
        let sdf: Vec<&FlipCurve> = pairs.iter().map(|p| &p.0).collect();
        let scf: Vec<&FlipCurve> = pairs.iter().map(|p| &p.1).collect();
        random_baseline.push(BaselineEntry {
            domain: ctx.spec,
            domain_label: ctx.spec.label(),
            sdf_auc: Stat::from_values(&sdf.iter().map(|c| c.auc).collect::<Vec<_>>()).unwrap(),
            scf_auc: Stat::from_values(&scf.iter().map(|c| c.auc).collect::<Vec<_>>()).unwrap(),
            sdf_curve: mean_curve(&sdf).unwrap(),
            scf_curve: mean_curve(&scf).unwrap(),
        });
    }
    Ok(EvalReport {
        signal_length: n,
        num_classes: net.num_classes(),
        samples: indices.len(),
        flip_samples: outcomes.iter().filter(|o| o.flipped).count(),
        accuracy: outcomes.iter().filter(|o| o.correct).count() as f64 / indices.len() as f64,
        k_star,
        config: cfg.clone(),
        entries,
        random_baseline,
    })
}

fn fmt_stat(s: &Option<Stat>) -> String {
    s.map_or_else(String::new, |s| format!("{:.6},{:.6}", s.mean, s.stderr))
}

impl EvalReport {
    pub fn entry(&self, method: MethodKind, domain: &DomainSpec) -> Option<&EvalEntry> {
        self.entries.iter().find(|e| e.method == method && &e.domain == domain)
    }

    pub fn baseline(&self, domain: &DomainSpec) -> Option<&BaselineEntry> {
        self.random_baseline.iter().find(|e| &e.domain == domain)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Localization table: one row per domain, mean and stderr per method.
    pub fn lambda_table_csv(&self) -> String {
        let mut out = String::from("domain");
        for m in &self.config.methods {
            out.push_str(&format!(",{m}_lambda,{m}_stderr"));
        }
        out.push('\n');
        for d in &self.config.domains {
            if d.truth_domain().is_none() {
                continue;
            }
            out.push_str(&d.label());
            for &m in &self.config.methods {
                out.push(',');
                let cell = self.entry(m, d).map(|e| fmt_stat(&e.lambda)).unwrap_or_default();
                out.push_str(if cell.is_empty() { "," } else { &cell });
            }
            out.push('\n');
        }
        out
    }

    /// Faithfulness and complexity table: one row per method and domain,
    /// plus the random-order baseline.
    pub fn flip_table_csv(&self) -> String {
        let mut out = String::from(
            "method,domain,sdf_auc,sdf_stderr,scf_auc,scf_stderr,complexity,complexity_stderr\n",
        );
        let blank = |s: String| if s.is_empty() { ",".to_string() } else { s };
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.method,
                e.domain_label,
                blank(fmt_stat(&e.sdf_auc)),
                blank(fmt_stat(&e.scf_auc)),
                fmt_stat(&Some(e.complexity))
            ));
        }
        for b in &self.random_baseline {
            out.push_str(&format!(
                "random,{},{},{},,\n",
                b.domain_label,
                fmt_stat(&Some(b.sdf_auc)),
                fmt_stat(&Some(b.scf_auc))
            ));
        }
        out
    }

    /// Mean flip curves in long format.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("method,domain,mode,fraction,probability\n");
        let mut emit = |method: &str, domain: &str, mode: FlipMode, pts: &[(f64, f64)]| {
            for (f, p) in pts {
                out.push_str(&format!("{method},{domain},{mode},{f:?},{p:?}\n"));
            }
        };
        for e in &self.entries {
            if let Some(c) = &e.sdf_curve {
                emit(e.method.short_name(), &e.domain_label, FlipMode::Sdf, c);
            }
            if let Some(c) = &e.scf_curve {
                emit(e.method.short_name(), &e.domain_label, FlipMode::Scf, c);
            }
        }
        for b in &self.random_baseline {
            emit("random", &b.domain_label, FlipMode::Sdf, &b.sdf_curve);
            emit("random", &b.domain_label, FlipMode::Scf, &b.scf_curve);
        }
        out
    }
}
