use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ternroll::cse;
use ternroll::model::{CseMethod, NetworkSpec, TernaryMatrix};
use ternroll::netlist;
use ternroll::pipeline::{self, ImageStream, NetworkWeights};

const EQ10: &str = "tmx 7 6\n00++00\n+0+++0\n0+00++\n0+000+\n+0++00\n+00+00\n0+00++\n";

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn tiny() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/tiny.json")
}

fn vgg() -> PathBuf {
    root().join("networks/vgg7_half.json")
}

fn ternroll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ternroll")).args(args).env_remove("TERNROLL_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_weights(dir: &Path, seed: &str) -> PathBuf {
    let w = dir.join("w");
    let o = ternroll(&["ternarize", "--network", s(&tiny()), "--random", s(&w), "--seed", seed]);
    assert!(o.status.success(), "{}", stderr(&o));
    w
}

#[test]
fn td_listing_starts_with_the_shared_pair() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("eq10.tmx");
    std::fs::write(&input, EQ10).unwrap();
    let out = dir.path().join("out.cse");
    let o = ternroll(&["cse", "--method", "td", s(&input), s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().nth(1), Some("def x6 = +x2 +x3"));
    let m: TernaryMatrix = EQ10.parse().unwrap();
    assert_eq!(text, cse::run(&m, CseMethod::Td).to_text());
}

#[test]
fn throughput_report_for_the_reference_network() {
    let o = ternroll(&["report-throughput", s(&vgg()), "--clock", "125e6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("122070 frames/sec"), "{text}");
    assert!(text.contains("256 values every 64 cycles"));
}

#[test]
fn op_report_dense_column() {
    let o = ternroll(&["report-ops", s(&vgg())]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    let dense: Vec<&str> = lines[1..lines.len() - 1].iter().map(|l| l.split_whitespace().nth(2).unwrap()).collect();
    assert_eq!(dense, ["1769472", "37748736", "18874368", "37748736", "18874368", "37748736", "524288", "1280"]);
    assert_eq!(lines.last().unwrap().split_whitespace().nth(1), Some("153289984"));
}

#[test]
fn ternarize_prints_threshold_scale_and_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.fmx");
    std::fs::write(&input, "fmx 1 4\n0.1 -0.5 0.9 -0.2\n").unwrap();
    let out = dir.path().join("w.tmx");
    let o = ternroll(&["ternarize", "--eps", "1.0", s(&input), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "delta=0.425 s=0.7 sparsity=0.5\n");
    assert_eq!(std::fs::read_to_string(out).unwrap(), "tmx 1 4\n0-+0\n");
}

#[test]
fn exit_codes() {
    assert_eq!(ternroll(&["--help"]).status.code(), Some(0));
    assert_eq!(ternroll(&["bogus"]).status.code(), Some(1));
    assert_eq!(ternroll(&["cse", "--method", "xy", "a", "b"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tmx");
    std::fs::write(&bad, "tmx 1 2\n+x\n").unwrap();
    let out = dir.path().join("out.cse");
    let o = ternroll(&["cse", s(&bad), s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("line 2"), "{err}");
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    assert_eq!(ternroll(&["cse", "missing.tmx", s(&out)]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_ternroll"))
        .args(["report-ops", s(&vgg())])
        .env("TERNROLL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn arity_three_needs_full_rate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("eq10.tmx");
    std::fs::write(&input, EQ10).unwrap();
    let out = dir.path().join("g.ngl");
    let o = ternroll(&["tree", "--arity", "3", "--interval", "4", s(&input), s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let o = ternroll(&["tree", "--arity", "3", s(&input), s(&out)]);
    assert!(o.status.success());
    netlist::parse_single_graph(&std::fs::read_to_string(out).unwrap()).unwrap();
}

#[test]
fn explain_config_names_sources() {
    let o = ternroll(&["report-throughput", s(&tiny()), "--explain-config", "--arity", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("conv.arity = 3 (flag)"), "{err}");
    assert!(err.contains("cse_method = td (network file)"), "{err}");
    assert!(err.contains("clock_hz = 125000000 (default)"), "{err}");
    let o = ternroll(&["report-throughput", s(&vgg()), "--explain-config"]);
    let err = stderr(&o);
    assert!(err.contains("conv1.arity = 3 (network file)"), "{err}");
    assert!(err.contains("conv3.arity = 2 (default)"), "{err}");
    assert!(err.contains("clock_hz = 125000000 (network file)"), "{err}");
    assert!(err.contains("cse_method = bu (default)"), "{err}");
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let w = random_weights(dir.path(), "11");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_ternroll"))
            .args(["simulate", s(&tiny()), s(&w), "--random", "6", "--seed", "2"])
            .env("TERNROLL_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, run("1").stdout);
    assert_eq!(a.stdout, run("3").stdout);
    let again = dir.path().join("again");
    ternroll(&["ternarize", "--network", s(&tiny()), "--random", s(&again), "--seed", "11"]);
    for entry in std::fs::read_dir(&w).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(std::fs::read(w.join(&name)).unwrap(), std::fs::read(again.join(&name)).unwrap());
    }
}

#[test]
fn command_chain_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let net = NetworkSpec::load(&tiny()).unwrap();
    let w_dir = random_weights(dir.path(), "5");
    let weights = NetworkWeights::load(&w_dir, &net).unwrap();
    assert_eq!(weights, NetworkWeights::random(&net, 5).unwrap());

    let ngl = dir.path().join("tiny.ngl");
    let o = ternroll(&["emit", s(&tiny()), s(&w_dir), s(&ngl)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let parsed = netlist::parse(&std::fs::read_to_string(&ngl).unwrap()).unwrap();
    let compiled = pipeline::compile(&net, &weights, CseMethod::Td).unwrap();
    let conv = parsed.blocks.iter().find(|b| b.label == "conv").unwrap();
    assert_eq!(conv.graph.as_ref(), Some(&compiled.convs[&1].graph));
    assert_eq!(parsed.blocks.len(), net.layers.len());

    let img = ImageStream::random(8, 8, 2, net.act_format, 64, 9);
    let img_path = dir.path().join("img.bin");
    std::fs::write(&img_path, img.to_bytes().unwrap()).unwrap();
    let o = ternroll(&["simulate", s(&tiny()), s(&w_dir), s(&img_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = pipeline::simulate(&net, &weights, &img).unwrap();
    let fields: Vec<String> = stdout(&o).trim_end().split('\t').map(String::from).collect();
    let scores: Vec<i64> = fields[1..11].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(scores, r.scores);
    assert_eq!(fields[11], format!("argmax={}", r.argmax.unwrap()));

    let tmx = w_dir.join("conv.tmx");
    let listing = dir.path().join("conv.cse");
    assert!(ternroll(&["cse", "--method", "bu", s(&tmx), s(&listing)]).status.success());
    let via_listing = dir.path().join("a.ngl");
    let direct = dir.path().join("b.ngl");
    assert!(ternroll(&["tree", s(&listing), s(&via_listing), "--name", "g"]).status.success());
    assert!(ternroll(&["tree", "--method", "bu", s(&tmx), s(&direct), "--name", "g"]).status.success());
    assert_eq!(std::fs::read(via_listing).unwrap(), std::fs::read(direct).unwrap());
}

#[test]
fn stats_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("eq10.tmx");
    std::fs::write(&input, EQ10).unwrap();
    let o = ternroll(&["stats", s(&input), "--methods", "none,td"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().ends_with("Adders  Reg  Add/Reg  Depth"));
    assert_eq!(text.lines().count(), 3);

    let o = ternroll(&["sweep-eps", "--random", "64x32", "--eps", "0,0.5,1,2", "--seed", "1"]);
    assert!(o.status.success());
    let sparsity: Vec<f64> =
        stdout(&o).lines().skip(1).map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(sparsity.len(), 4);
    assert!(sparsity.windows(2).all(|p| p[0] <= p[1]));
    assert_eq!(ternroll(&["sweep-eps", "--eps", "1,0.5"]).status.code(), Some(2));
}
