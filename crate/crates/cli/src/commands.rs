use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ternroll::cse::{self, CseResult};
use ternroll::model::{
    CseMethod, FixedPointFormat, FloatMatrix, LayerKind, NetworkSpec, ScaleRule, ScaleShiftParams, TernaryMatrix,
};
use ternroll::netlist::{self, Block, Netlist};
use ternroll::pipeline::{self, compile, CompiledNetwork, ImageStream, NetworkWeights, DEFAULT_ARITY, DEFAULT_EPSILON};
use ternroll::ternarize::{sparsity_sweep, ternarize_with, Ternarized};
use ternroll::treegen::{build_tree, cost, schedule_serial, AdderGraph, CostReport};

use crate::config::{self, method_name, Explain};
use crate::{deliver, read_text, write_atomic, Command, Compile, Failure, Outcome};

pub fn dispatch(command: Command, seed: u64, explain: &mut Explain) -> Outcome {
    match command {
        Command::Ternarize { paths, eps, scale_rule, network, random } => {
            let rule = scale_rule.map(ScaleRule::from);
            match network {
                None => ternarize_file(&paths, eps, rule, explain),
                Some(net) => ternarize_network(&paths, &net, eps, rule, random, seed, explain),
            }
        }
        Command::Cse { input, output, method } => {
            let method = config::method(explain, method.map(Into::into), None);
            let m = read_matrix(&input)?;
            let r = cse::run(&m, method);
            write_atomic(&output, r.to_text().as_bytes())?;
            let s = r.stats;
            deliver(None, &format!("extractions={} terms={} adders={}\n", s.extractions, s.final_terms, s.adders))
        }
        Command::Tree { input, output, method, arity, interval, name } => {
            let method = config::method(explain, method.map(Into::into), None);
            let arity = config::plain(explain, "arity", arity, DEFAULT_ARITY);
            let interval = config::plain(explain, "interval", interval, 1);
            let name = match name {
                Some(n) => n,
                None => input.file_stem().map_or_else(|| "graph".to_string(), |s| s.to_string_lossy().into_owned()),
            };
            let format = FixedPointFormat::ACTIVATION;
            if arity == 3 && interval > 1 {
                return Err(Failure::Usage("3-input adders need --interval 1".into()));
            }
            let r = read_system(&input, method)?;
            let g = schedule_serial(&build_tree(&r, arity)?, interval, format.total_bits)?;
            write_atomic(&output, netlist::emit_graph_text(&name, format, &g)?.as_bytes())?;
            deliver(None, &format!("{}\n{}\n", CostReport::HEADER, cost(&g)))
        }
        Command::Stats { inputs, methods, arity, output } => {
            let arity = config::plain(explain, "arity", arity, DEFAULT_ARITY);
            let methods: Vec<CseMethod> = if methods.is_empty() {
                vec![CseMethod::None, CseMethod::Td, CseMethod::Bu]
            } else {
                methods.into_iter().map(Into::into).collect()
            };
            explain.record(
                "methods",
                methods.iter().map(|&m| method_name(m)).collect::<Vec<_>>().join(","),
                "flag or default",
            );
            deliver(output.as_deref(), &stats(&inputs, &methods, arity)?)
        }
        Command::Emit { network, weights, output, compile: c } => {
            let (net, method) = load_network(&network, &c, explain)?;
            let w = load_weights(&weights, &net)?;
            let compiled = compile(&net, &w, method)?;
            let text = netlist::emit(&network_netlist(&compiled)?)?;
            write_atomic(&output, text.as_bytes())
        }
        Command::Simulate { network, weights, images, random, compile: c, output } => {
            let (net, method) = load_network(&network, &c, explain)?;
            let count = config::plain(explain, "random_images", random, 0);
            if images.is_empty() && count == 0 {
                return Err(Failure::Usage("simulate needs image files or --random N".into()));
            }
            let w = load_weights(&weights, &net)?;
            let compiled = compile(&net, &w, method)?;
            deliver(output.as_deref(), &simulate(&compiled, &images, count, seed)?)
        }
        Command::ReportOps { network, weights, compile: c, output } => {
            let (net, method) = load_network(&network, &c, explain)?;
            let (w, compiled) = match weights {
                Some(dir) => {
                    let w = load_weights(&dir, &net)?;
                    let compiled = compile(&net, &w, method)?;
                    (Some(w), Some(compiled))
                }
                None => (None, None),
            };
            let costs = compiled.iter().flat_map(|c| c.convs.iter().map(|(&i, e)| (i, e.cost))).collect();
            deliver(output.as_deref(), &pipeline::op_count(&net, w.as_ref(), &costs).to_text())
        }
        Command::ReportThroughput { network, weights, clock, compile: c, output } => {
            let (mut net, method) = load_network(&network, &c, explain)?;
            config::clock(explain, clock, &mut net, &network)?;
            let depths = match weights {
                Some(dir) => {
                    let w = load_weights(&dir, &net)?;
                    depths(&compile(&net, &w, method)?)
                }
                None => BTreeMap::new(),
            };
            deliver(output.as_deref(), &pipeline::throughput_model(&net, &depths).to_text())
        }
        Command::SweepEps { input, random, eps, output } => {
            let w = match input {
                Some(path) => read_floats(&path)?,
                None => {
                    let shape = config::plain(explain, "random_shape", random, "576x64".to_string());
                    let (rows, cols) = parse_shape(&shape)?;
                    FloatMatrix::random_gaussian(rows, cols, seed)?
                }
            };
            let eps = if eps.is_empty() { (0..=20).map(|i| i as f64 / 10.0).collect() } else { eps };
            let mut text = String::from("epsilon  sparsity\n");
            for (e, s) in sparsity_sweep(&w, &eps)? {
                writeln!(text, "{e:<7}  {s:.6}").unwrap();
            }
            deliver(output.as_deref(), &text)
        }
    }
}

fn read_matrix(path: &Path) -> Outcome<TernaryMatrix> {
    read_text(path)?.parse().map_err(|e| Failure::at(path, e))
}

fn read_floats(path: &Path) -> Outcome<FloatMatrix> {
    read_text(path)?.parse().map_err(|e| Failure::at(path, e))
}

/// A `.tmx` matrix run through CSE, or a `.cse` listing as written.
fn read_system(path: &Path, method: CseMethod) -> Outcome<CseResult> {
    let text = read_text(path)?;
    if text.starts_with("cse") {
        let r: CseResult = text.parse().map_err(|e| Failure::at(path, e))?;
        r.validate().map_err(|e| Failure::at(path, e))?;
        Ok(r)
    } else {
        let m: TernaryMatrix = text.parse().map_err(|e| Failure::at(path, e))?;
        Ok(cse::run(&m, method))
    }
}

fn parse_shape(s: &str) -> Outcome<(usize, usize)> {
    s.split_once('x')
        .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
        .filter(|&(r, c)| r > 0 && c > 0)
        .ok_or_else(|| Failure::Usage(format!("shape must look like 576x64, got {s:?}")))
}

fn load_network(path: &Path, c: &Compile, explain: &mut Explain) -> Outcome<(NetworkSpec, CseMethod)> {
    let mut net = NetworkSpec::load(path).map_err(|e| Failure::at(path, e))?;
    config::arity(explain, c.arity, &mut net);
    let method = config::method(explain, c.method.map(Into::into), Some(&net));
    net.validate().map_err(|e| Failure::at(path, e))?;
    Ok((net, method))
}

fn load_weights(dir: &Path, net: &NetworkSpec) -> Outcome<NetworkWeights> {
    NetworkWeights::load(dir, net).map_err(|e| Failure::at(dir, e))
}

fn depths(c: &CompiledNetwork) -> BTreeMap<usize, u32> {
    c.convs.iter().map(|(&i, e)| (i, e.cost.depth)).collect()
}

fn ternarize_file(paths: &[PathBuf], eps: Option<f64>, rule: Option<ScaleRule>, explain: &mut Explain) -> Outcome {
    let [input, output] = paths else {
        return Err(Failure::Usage("ternarize needs an input .fmx and an output .tmx".into()));
    };
    let eps = config::plain(explain, "epsilon", eps, DEFAULT_EPSILON);
    let rule = rule.unwrap_or_default();
    explain.record("scale_rule", rule_name(rule), "flag or default");
    let t = ternarize_with(&read_floats(input)?, eps, rule)?;
    write_atomic(output, t.matrix.to_tmx().as_bytes())?;
    deliver(None, &format!("{}\n", summary(&t)))
}

fn rule_name(rule: ScaleRule) -> &'static str {
    match rule {
        ScaleRule::MeanSurviving => "mean-surviving",
        ScaleRule::MeanAll => "mean-all",
    }
}

fn summary(t: &Ternarized) -> String {
    format!("delta={} s={} sparsity={}", t.delta, t.scale, t.matrix.sparsity())
}

/// Ternarizes every weighted layer of a network into `<label>.tmx` files and
/// folds the ternary scale into the following `<label>.ssp`. Real weights are
/// read as `<label>.fmx`; an input `<label>.ssp` supplies the unscaled
/// multipliers and shifts, which default to one and zero.
fn ternarize_network(
    paths: &[PathBuf],
    net_path: &Path,
    eps: Option<f64>,
    rule: Option<ScaleRule>,
    random: bool,
    seed: u64,
    explain: &mut Explain,
) -> Outcome {
    let mut net = NetworkSpec::load(net_path).map_err(|e| Failure::at(net_path, e))?;
    config::epsilon(explain, eps, &mut net);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        if layer.has_weights() {
            if rule.is_some() {
                layer.scale_rule = rule;
            }
            let source = if rule.is_some() {
                "flag"
            } else if layer.scale_rule.is_some() {
                "network file"
            } else {
                "default"
            };
            explain.record(
                &format!("{}.scale_rule", layer.label(i)),
                rule_name(layer.scale_rule.unwrap_or_default()),
                source,
            );
        }
    }
    let (out_dir, report, weights) = match (random, paths) {
        (true, [out]) => {
            let w = NetworkWeights::random(&net, seed)?;
            let mut report = String::new();
            for (&i, m) in &w.matrices {
                writeln!(report, "{} sparsity={}", net.layers[i].label(i), m.sparsity()).unwrap();
            }
            (out, report, w)
        }
        (false, [input, out]) => {
            let (report, w) = ternarize_dir(&net, input)?;
            (out, report, w)
        }
        (true, _) => return Err(Failure::Usage("ternarize --random takes only an output directory".into())),
        (false, _) => return Err(Failure::Usage("ternarize --network needs an input and an output directory".into())),
    };
    let files = weights.files(&net);
    std::fs::create_dir_all(out_dir).map_err(|e| Failure::at(out_dir, e))?;
    for (name, text) in files {
        write_atomic(&out_dir.join(name), text.as_bytes())?;
    }
    deliver(None, &report)
}

fn ternarize_dir(net: &NetworkSpec, dir: &Path) -> Outcome<(String, NetworkWeights)> {
    let mut report = String::new();
    let mut w = NetworkWeights::default();
    let mut scale = 1.0;
    for (i, layer) in net.layers.iter().enumerate() {
        let label = layer.label(i);
        if layer.has_weights() {
            let real = read_floats(&dir.join(format!("{label}.fmx")))?;
            let t =
                ternarize_with(&real, layer.epsilon.unwrap_or(DEFAULT_EPSILON), layer.scale_rule.unwrap_or_default())?;
            writeln!(report, "{label} {}", summary(&t)).unwrap();
            scale = t.scale;
            w.matrices.insert(i, t.matrix);
        }
        if layer.kind == LayerKind::ScaleShift {
            let path = dir.join(format!("{label}.ssp"));
            let d = layer.in_channels;
            let (a, b) = if path.exists() {
                let p: ScaleShiftParams = read_text(&path)?.parse().map_err(|e| Failure::at(&path, e))?;
                (p.c, p.b)
            } else {
                (vec![1.0; d], vec![0.0; d])
            };
            w.scale_shift.insert(i, ScaleShiftParams::fuse(scale, &a, &b)?);
        }
    }
    w.check(net)?;
    Ok((report, w))
}

fn stats(inputs: &[PathBuf], methods: &[CseMethod], arity: usize) -> Outcome<String> {
    let rows: Vec<Vec<(String, CostReport)>> = inputs
        .par_iter()
        .map(|path| -> Outcome<_> {
            let text = read_text(path)?;
            let systems: Vec<(String, CseResult)> = if text.starts_with("cse") {
                vec![("listing".to_string(), read_system(path, CseMethod::None)?)]
            } else {
                let m: TernaryMatrix = text.parse().map_err(|e| Failure::at(path, e))?;
                methods.iter().map(|&k| (method_name(k).to_string(), cse::run(&m, k))).collect()
            };
            systems.into_iter().map(|(name, r)| Ok((name, cost(&build_tree(&r, arity)?)))).collect()
        })
        .collect::<Outcome<_>>()?;

    let names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    let width = names.iter().map(String::len).max().unwrap_or(0).max("File".len());
    let mut out = format!("{:<width$}  {:<7}  {}\n", "File", "Method", CostReport::HEADER);
    for (name, reports) in names.iter().zip(&rows) {
        for (method, c) in reports {
            writeln!(out, "{name:<width$}  {method:<7}  {c}").unwrap();
        }
    }
    if inputs.len() > 1 {
        let mut by_method: BTreeMap<&str, Vec<CostReport>> = BTreeMap::new();
        let mut order = Vec::new();
        for (method, c) in rows.iter().flatten() {
            if !by_method.contains_key(method.as_str()) {
                order.push(method.as_str());
            }
            by_method.entry(method.as_str()).or_default().push(*c);
        }
        for method in order {
            let rs = &by_method[method];
            let n = rs.len() as f64;
            let mean = |f: fn(&CostReport) -> usize| rs.iter().map(f).sum::<usize>() as f64 / n;
            writeln!(
                out,
                "{:<width$}  {method:<7}  {:>6.1}  {:>3.1}  {:>7.1}  {:>5}",
                "average",
                mean(|c| c.adders),
                mean(|c| c.registers),
                mean(|c| c.adds_plus_regs),
                rs.iter().map(|c| c.depth).max().unwrap_or(0),
            )
            .unwrap();
        }
    }
    Ok(out)
}

fn list<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// One block per network layer; convolutions carry their adder graphs.
fn network_netlist(c: &CompiledNetwork) -> Outcome<Netlist> {
    let net = &c.net;
    let timing = pipeline::throughput_model(net, &depths(c));
    let mut blocks = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        let mut params = vec![
            ("in_width".to_string(), layer.in_width.to_string()),
            ("in_channels".to_string(), layer.in_channels.to_string()),
        ];
        let mut push = |k: &str, v: String| params.push((k.to_string(), v));
        let mut graph: Option<AdderGraph> = None;
        match layer.kind {
            LayerKind::Buffer => push("kernel", layer.kernel.to_string()),
            LayerKind::Conv => {
                let e = &c.convs[&i];
                push("kernel", layer.kernel.to_string());
                push("filters", layer.out_channels().to_string());
                push("arity", layer.arity.unwrap_or(DEFAULT_ARITY).to_string());
                push("interval", layer.pixel_interval.unwrap_or(1).to_string());
                push("cse", method_name(c.method).to_string());
                push("adders", e.cost.adders.to_string());
                push("registers", e.cost.registers.to_string());
                graph = Some(e.graph.clone());
            }
            LayerKind::MaxPool => {
                push("kernel", layer.kernel.to_string());
                push("stride", layer.stride.to_string());
            }
            LayerKind::ScaleShift => {
                let q = &c.scale_shift[&i];
                push("activation", format!("{:?}", layer.activation).to_lowercase());
                push("scale_format", q.scale.to_string());
                push("c", list(&q.c));
                push("b", list(&q.b));
            }
            LayerKind::Mux => {}
            LayerKind::Dense => {
                let m = &c.dense[&i];
                let lanes = timing.layers.iter().find(|l| l.layer == i).and_then(|l| l.lanes).unwrap_or(1);
                push("filters", m.rows().to_string());
                push("nonzeros", m.nonzeros().to_string());
                push("lanes", lanes.to_string());
            }
            LayerKind::Fifo => {
                push("depth", timing.fifo_high_water.get(&i).copied().unwrap_or(0).to_string());
            }
        }
        blocks.push(Block { label: layer.label(i), kind: layer.kind, params, graph });
    }
    let name = net.name.clone().unwrap_or_else(|| "network".to_string());
    Ok(Netlist { name, format: net.act_format, blocks })
}

fn simulate(c: &CompiledNetwork, paths: &[PathBuf], random: usize, seed: u64) -> Outcome<String> {
    let net = &c.net;
    let mut images: Vec<(String, ImageStream)> = Vec::with_capacity(paths.len() + random);
    for path in paths {
        let bytes = std::fs::read(path).map_err(|e| Failure::at(path, e))?;
        let img = ImageStream::from_bytes(&bytes).map_err(|e| Failure::at(path, e))?;
        images.push((path.display().to_string(), img));
    }
    let (w, d, fmt) = (net.input_width(), net.input_channels(), net.act_format);
    let limit = 4i64 << fmt.frac_bits;
    for k in 0..random {
        images.push((format!("random{k}"), ImageStream::random(w, w, d, fmt, limit, seed.wrapping_add(k as u64))));
    }
    let results: Vec<_> = images
        .par_iter()
        .map(|(name, img)| c.simulate(img).map_err(|e| Failure::at(Path::new(name), e)))
        .collect::<Outcome<_>>()?;
    let mut out = String::new();
    for ((name, _), r) in images.iter().zip(results) {
        let scores: Vec<String> = r.scores.iter().map(i64::to_string).collect();
        let argmax = r.argmax.map_or_else(|| "-".to_string(), |k| k.to_string());
        writeln!(out, "{name}\t{}\targmax={argmax}\tsaturations={}", scores.join("\t"), r.saturations).unwrap();
    }
    Ok(out)
}
