use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde_json::json;

use spectral_relevance::attribution::{LrpRule, LrpRules};
use spectral_relevance::dataset::Dataset;
use spectral_relevance::eval::{run_benchmark, sample_maps, DomainContext, DomainSpec, EvalConfig, EvalReport, MethodKind};
use spectral_relevance::inspection::svg_heatmap;
use spectral_relevance::io::{read_signals_csv, write_atomic};
use spectral_relevance::net::{self, Layer, Network, Optimizer, TrainConfig};
use spectral_relevance::par::Execution;
use spectral_relevance::spectral::{WindowShape, WindowSpec};
use spectral_relevance::synth::{generate, AmplitudeRule, Preset, SynthConfig};

use crate::manifest::{beside, ManifestBuilder};
use crate::{AttributeArgs, EvaluateArgs, SynthArgs, TrainArgs, Usage};

/// Sub-seed `i` of the run seed.
fn sub_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i)
}

pub fn configure_jobs(jobs: Option<usize>) -> Result<Execution> {
    match jobs {
        None => Ok(Execution::Parallel),
        Some(0) => Err(Usage("--jobs must be at least 1".into()).into()),
        Some(j) => {
            rayon::ThreadPoolBuilder::new().num_threads(j).build_global().ok();
            Ok(if j == 1 { Execution::Sequential } else { Execution::Parallel })
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| usage(format!("invalid {what} '{t}': {e}"))))
        .collect()
}

/// Width token: a number or `N/d`.
fn parse_width(token: &str, n: usize) -> Result<usize> {
    let w = match token.strip_prefix("N/").or_else(|| token.strip_prefix("n/")) {
        Some(d) => {
            let d: usize = d.parse().map_err(|_| usage(format!("invalid width '{token}'")))?;
            if d == 0 {
                return Err(usage("width divisor must be positive"));
            }
            n / d
        }
        None => token.parse().map_err(|_| usage(format!("invalid width '{token}'")))?,
    };
    if w == 0 {
        return Err(usage(format!("width '{token}' is zero for N = {n}")));
    }
    Ok(w)
}

fn window(shape: &str, width: usize, hop: Option<usize>) -> Result<WindowSpec> {
    let shape = WindowShape::from_str(shape).map_err(|e| usage(e.to_string()))?;
    WindowSpec::new(shape, width, hop.unwrap_or(width)).map_err(|e| usage(e.to_string()))
}

/// `time`, `frequency`, or `tf:SHAPE:WIDTH[:HOP]`.
fn parse_domain(token: &str, n: usize) -> Result<DomainSpec> {
    match token {
        "time" => Ok(DomainSpec::Time),
        "frequency" | "freq" => Ok(DomainSpec::Frequency),
        _ => {
            let parts: Vec<&str> = token.split(':').collect();
            match parts.as_slice() {
                ["tf", shape, width] => Ok(DomainSpec::TimeFrequency {
                    window: window(shape, parse_width(width, n)?, None)?,
                }),
                ["tf", shape, width, hop] => Ok(DomainSpec::TimeFrequency {
                    window: window(shape, parse_width(width, n)?, Some(parse_width(hop, n)?))?,
                }),
                _ => Err(usage(format!("unknown domain '{token}'"))),
            }
        }
    }
}

fn parse_methods(s: &str) -> Result<Vec<MethodKind>> {
    let methods: Vec<MethodKind> = parse_list(s, "method")?;
    if methods.is_empty() {
        return Err(usage("no methods given"));
    }
    Ok(methods)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn synth(a: &SynthArgs, exec: Execution, jobs: Option<usize>) -> Result<()> {
    let run = ManifestBuilder::start("synth", jobs);
    let preset = Preset::from_str(&a.preset).map_err(|e| usage(e.to_string()))?;
    let mut cfg = SynthConfig::preset(preset, a.seed);
    if let Some(n) = a.samples {
        cfg.num_samples = n;
    }
    if let Some(n) = a.length {
        cfg.signal_length = n;
    }
    if let Some(k) = &a.k_star {
        cfg.k_star = parse_list(k, "frequency")?;
    }
    if let Some(s) = a.sigma {
        cfg.noise_sigma = s;
    }
    if let Some(r) = &a.amplitude {
        cfg.amplitude = AmplitudeRule::from_str(r).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(size) = a.subset_only {
        if size > cfg.k_star.len() {
            return Err(usage(format!("--subset-only {size} exceeds |k*| = {}", cfg.k_star.len())));
        }
        cfg.allowed_labels = Some(cfg.labels_of_size(size));
    }
    let data = generate(&cfg, exec)?;
    data.save(&a.out)?;
    println!(
        "wrote {} signals of length {} ({} classes, k* = {:?}) to {}",
        data.len(),
        data.signal_length(),
        data.num_classes(),
        cfg.k_star,
        a.out.display()
    );
    run.finish(
        &beside(&a.out),
        json!({ "args": a, "resolved": cfg }),
        json!({ "seed": a.seed }),
        vec![],
        vec![a.out.clone()],
    )
}

pub fn train(a: &TrainArgs, jobs: Option<usize>) -> Result<()> {
    let run = ManifestBuilder::start("train", jobs);
    let hidden: Vec<usize> = parse_list(&a.hidden, "hidden width")?;
    let optimizer = Optimizer::from_str(&a.optimizer).map_err(|e| usage(e.to_string()))?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        optimizer,
        seed: sub_seed(a.seed, 1),
        test_fraction: a.test_fraction,
        weight_decay: a.weight_decay,
    };
    cfg.validate()?;
    let data = Dataset::load(&a.data).with_context(|| format!("reading dataset {}", a.data.display()))?;
    let init_seed = sub_seed(a.seed, 0);
    let mut model = Network::mlp(data.signal_length(), &hidden, data.num_classes(), init_seed)?;
    let report = net::train(&mut model, &data, &cfg)?;
    net::save(&model, &a.model_out)?;
    let metrics_path = a.metrics_out.clone().unwrap_or_else(|| {
        let mut name = a.model_out.file_name().unwrap_or_default().to_os_string();
        name.push(".metrics.json");
        a.model_out.with_file_name(name)
    });
    let metrics = json!({
        "train_accuracy": report.train_accuracy,
        "test_accuracy": report.test_accuracy,
        "train_samples": report.train_samples,
        "test_samples": report.test_samples,
        "epochs": report.epochs,
    });
    write_atomic(&metrics_path, serde_json::to_string_pretty(&metrics)?.as_bytes())?;
    println!(
        "trained {} parameters: train accuracy {:.4}, test accuracy {}",
        model.parameter_count(),
        report.train_accuracy,
        report.test_accuracy.map_or("n/a".into(), |v| format!("{v:.4}"))
    );
    run.finish(
        &beside(&a.model_out),
        json!({ "args": a, "resolved": cfg, "hidden": hidden }),
        json!({ "seed": a.seed, "init": init_seed, "train": cfg.seed }),
        vec![a.data.clone()],
        vec![a.model_out.clone(), metrics_path],
    )
}

pub fn attribute(a: &AttributeArgs, jobs: Option<usize>) -> Result<()> {
    let run = ManifestBuilder::start("attribute", jobs);
    let methods = parse_methods(&a.method)?;
    let model = net::load(&a.model).with_context(|| format!("reading model {}", a.model.display()))?;
    let n = model.input_length();
    let domain = match a.domain.as_str() {
        "time-frequency" | "time_frequency" => DomainSpec::TimeFrequency {
            window: window(&a.window, a.width.unwrap_or((n / 10).max(1)), a.hop)?,
        },
        other => parse_domain(other, n)?,
    };
    let (signals, inputs): (Vec<(String, Vec<f64>)>, Vec<PathBuf>) = match (&a.input, &a.data) {
        (Some(path), None) => (
            read_signals_csv(path).with_context(|| format!("reading signals {}", path.display()))?
                .into_iter()
                .enumerate()
                .map(|(i, s)| (format!("signal{i}"), s.into_samples()))
                .collect(),
            vec![path.clone()],
        ),
        (None, Some(path)) => {
            let data = Dataset::load(path).with_context(|| format!("reading dataset {}", path.display()))?;
            let idx: Vec<usize> = parse_list(a.index.as_deref().unwrap_or(""), "index")?;
            if let Some(&bad) = idx.iter().find(|&&i| i >= data.len()) {
                return Err(usage(format!("index {bad} out of range for {} samples", data.len())));
            }
            (
                idx.iter().map(|&i| (format!("sample{i}"), data.signal(i).to_vec())).collect(),
                vec![path.clone()],
            )
        }
        _ => return Err(usage("give either --input or --data with --index")),
    };
    if signals.is_empty() {
        return Err(usage("no signals to attribute"));
    }
    ensure_dir(&a.out_dir)?;
    let mut rules = LrpRules::default_for(&model).with_bias_in_denominator(a.lrp_bias);
    for (i, layer) in model.layers().iter().enumerate() {
        if matches!(layer, Layer::Dense(_)) {
            rules = rules.with_rule(i, LrpRule::Epsilon(a.lrp_epsilon)).map_err(|e| usage(e.to_string()))?;
        }
    }
    let ctx = [DomainContext::new(domain, n)?];
    let mut outputs = Vec::new();
    for (name, x) in &signals {
        let target = match a.target {
            Some(t) => t,
            None => model.predict(x)?,
        };
        let maps = sample_maps(&model, x, target, &methods, &ctx, &rules, a.ig_steps)?;
        for (method, row) in methods.iter().zip(maps) {
            let map = &row[0];
            let stem = format!("{name}_{}_{}", method.short_name(), domain_slug(&domain));
            let json_path = a.out_dir.join(format!("{stem}.json"));
            let csv_path = a.out_dir.join(format!("{stem}.csv"));
            map.save_json(&json_path)?;
            map.save_csv(&csv_path)?;
            outputs.push(json_path);
            outputs.push(csv_path);
            if a.svg && matches!(domain, DomainSpec::TimeFrequency { .. }) {
                let svg_path = a.out_dir.join(format!("{stem}.svg"));
                write_atomic(&svg_path, svg_heatmap(map)?.as_bytes())?;
                outputs.push(svg_path);
            }
            let rep = &map.conservation_report;
            let check = match (rep.reference, rep.relative_deficit) {
                (Some(r), Some(d)) => format!(
                    "sum {:.6e} vs {} {r:.6e} (relative deficit {d:.2e})",
                    rep.total, rep.reference_kind
                ),
                _ => format!("sum {:.6e}", rep.total),
            };
            println!("{stem}: target {target}, {check}");
        }
    }
    run.finish(
        &a.out_dir.join("manifest.json"),
        json!({ "args": a, "domain": domain, "rules": rules }),
        json!({}),
        [vec![a.model.clone()], inputs].concat(),
        outputs,
    )
}

fn domain_slug(d: &DomainSpec) -> String {
    match d {
        DomainSpec::Time => "time".into(),
        DomainSpec::Frequency => "frequency".into(),
        DomainSpec::TimeFrequency { window } => {
            let shape = match window.shape {
                WindowShape::Rectangular => "rect",
                WindowShape::HalfSine => "halfsine",
                WindowShape::Hann => "hann",
            };
            format!("tf-{shape}-{}-{}", window.width, window.hop)
        }
    }
}

pub fn evaluate(a: &EvaluateArgs, exec: Execution, jobs: Option<usize>) -> Result<()> {
    let run = ManifestBuilder::start("evaluate", jobs);
    let methods = parse_methods(&a.methods)?;
    let model = net::load(&a.model).with_context(|| format!("reading model {}", a.model.display()))?;
    let data = Dataset::load(&a.data).with_context(|| format!("reading dataset {}", a.data.display()))?;
    let n = model.input_length();
    if data.signal_length() != n {
        return Err(spectral_relevance::Error::Dimension {
            context: "dataset signal length".into(),
            expected: n,
            found: data.signal_length(),
        }
        .into());
    }
    let domains: Vec<DomainSpec> = a
        .domains
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_domain(t, n))
        .collect::<Result<_>>()?;
    let cfg = EvalConfig {
        methods,
        domains,
        ig_steps: a.ig_steps,
        lrp_bias_in_denominator: a.lrp_bias,
        flip: !a.no_flip,
        flip_grid_points: a.flip_points,
        flip_exclude_labels: parse_list(&a.exclude_labels, "label")?,
        random_baseline: !a.no_random_baseline,
        seed: a.seed,
        execution: exec,
        ..EvalConfig::default()
    };
    cfg.validate()?;
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(usage("--test-fraction must be in [0, 1)"));
    }
    let (_, test) = data.split(a.test_fraction);
    let indices: Vec<usize> = test.into_iter().take(a.samples).collect();
    if indices.is_empty() {
        return Err(usage("no held-out samples to evaluate"));
    }
    let report = run_benchmark(&model, &data, &indices, &cfg)?;
    ensure_dir(&a.out_dir)?;
    let files = [
        ("report.json", report.to_json()),
        ("lambda.csv", report.lambda_table_csv()),
        ("flip.csv", report.flip_table_csv()),
        ("curves.csv", report.curves_csv()),
    ];
    let mut outputs = Vec::new();
    for (name, text) in files {
        let p = a.out_dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        outputs.push(p);
    }
    print_summary(&report);
    run.finish(
        &a.out_dir.join("manifest.json"),
        json!({ "args": a, "resolved": cfg, "samples": indices }),
        json!({ "seed": a.seed }),
        vec![a.model.clone(), a.data.clone()],
        outputs,
    )
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// λ table plus the qualitative ordering checks.
fn print_summary(r: &EvalReport) {
    println!("evaluated {} signals (accuracy {:.4}), {} flipped", r.samples, r.accuracy, r.flip_samples);
    let lambda = |m: MethodKind, d: &DomainSpec| r.entry(m, d).and_then(|e| e.lambda).map(|s| s.mean);
    let truth_domains: Vec<&DomainSpec> = r.config.domains.iter().filter(|d| **d != DomainSpec::Time).collect();
    if !truth_domains.is_empty() {
        print!("{:<34}", "lambda");
        for m in &r.config.methods {
            print!("{:>14}", m.short_name());
        }
        println!();
        for d in &truth_domains {
            print!("{:<34}", d.label());
            for &m in &r.config.methods {
                print!("{:>14}", lambda(m, d).map_or("-".into(), |v| format!("{v:.3}")));
            }
            println!();
        }
    }
    let f = DomainSpec::Frequency;
    if let (Some(l), Some(s)) = (lambda(MethodKind::Lrp, &f), lambda(MethodKind::Sensitivity, &f)) {
        println!("check lrp lambda_DFT above sensitivity: {} ({l:.3} vs {s:.3})", verdict(l > s));
    }
    let mut rect: Vec<(usize, f64)> = r
        .config
        .domains
        .iter()
        .filter_map(|d| match d {
            DomainSpec::TimeFrequency { window } if window.shape == WindowShape::Rectangular => {
                lambda(MethodKind::Lrp, d).map(|v| (window.width, v))
            }
            _ => None,
        })
        .collect();
    rect.sort_by_key(|p| p.0);
    if let (true, Some(dft)) = (rect.len() >= 2, lambda(MethodKind::Lrp, &f)) {
        let mut row: Vec<f64> = rect.iter().map(|p| p.1).collect();
        row.push(dft);
        let ok = row.windows(2).all(|w| w[0] < w[1]);
        println!("check lrp lambda increases with window width up to DFT: {} ({row:.3?})", verdict(ok));
    }
    for &m in &r.config.methods {
        if let (Some(t), Some(fr)) = (r.entry(m, &DomainSpec::Time), r.entry(m, &f)) {
            let (t, fr) = (t.complexity.mean, fr.complexity.mean);
            println!("check {m} complexity frequency below time: {} ({fr:.3} vs {t:.3})", verdict(fr < t));
        }
    }
    for e in &r.entries {
        if let (Some(sdf), Some(scf), Some(b)) = (e.sdf_auc, e.scf_auc, r.baseline(&e.domain)) {
            let ok = sdf.mean < b.sdf_auc.mean && scf.mean > b.scf_auc.mean;
            println!(
                "check {} beats random order in {}: {} (sdf {:.3} vs {:.3}, scf {:.3} vs {:.3})",
                e.method,
                e.domain_label,
                verdict(ok),
                sdf.mean,
                b.sdf_auc.mean,
                scf.mean,
                b.scf_auc.mean
            );
        }
    }
}
