use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::Command;

use diffnet::harness::io::{read_csv_rows, read_edge_list, read_json, FdrRow, GraphDocument, PrRow};
use diffnet::harness::server::{serve_on, CellResponse, CurveResponse, MetaResponse};
use diffnet::harness::{load_grid, run_experiment, ExperimentConfig, GridService, InputFile, Mode, ScenarioConfig};
use diffnet::synthetic::{generate, SyntheticScenario};
use diffnet::SampleMatrix;

fn tiny_scenario() -> ScenarioConfig {
    ScenarioConfig {
        p: 12,
        m: 12,
        p_move: 0.3,
        n_conditions: 2,
        n_per_condition: 60,
        null: false,
    }
}

fn tiny_config(mode: Mode, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        mode,
        scenario: Some(tiny_scenario()),
        lambda1_grid: vec![0.15, 0.3],
        lambda2_grid: vec![0.0, 0.5, 1.0],
        seeds: vec![1, 2],
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    c.bootstrap.n_bootstraps = 4;
    c.bootstrap.cutoff_grid = vec![0.0, 0.5, 1.0];
    c.fdr.n_splits = 2;
    c.grid.fdr_splits = 2;
    c
}

fn write_samples(path: &Path, m: &SampleMatrix) {
    let mut text = m.variable_names().join(",");
    text.push('\n');
    for r in 0..m.n_samples() {
        let row: Vec<String> = (0..m.n_variables()).map(|c| m.values()[(r, c)].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn two_csvs(dir: &Path) -> Vec<InputFile> {
    let data = generate(&SyntheticScenario {
        p: 12,
        m: 12,
        p_move: 0.3,
        n_conditions: 2,
        n_per_condition: 80,
        seed: 5,
    })
    .unwrap();
    ["healthy", "tumor"]
        .iter()
        .zip(&data.samples)
        .map(|(label, m)| {
            let path = dir.join(format!("{label}.csv"));
            write_samples(&path, m);
            InputFile {
                label: label.to_string(),
                path,
            }
        })
        .collect()
}

fn edge_keys(path: &Path) -> BTreeSet<(String, String)> {
    read_edge_list(path)
        .unwrap()
        .into_iter()
        .map(|e| (e.node_a, e.node_b))
        .collect()
}

#[test]
fn fit_on_two_files_writes_two_networks_and_one_difference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = ExperimentConfig {
        mode: Mode::Fit,
        scenario: None,
        inputs: two_csvs(dir.path()),
        lambda1_grid: vec![0.2],
        lambda2_grid: vec![0.3],
        output_dir: out.clone(),
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    let tsv: Vec<&String> = report.artifacts.iter().filter(|f| f.ends_with(".tsv")).collect();
    assert_eq!(tsv, ["network_healthy.tsv", "network_tumor.tsv", "diff_healthy_tumor.tsv"]);

    let a = edge_keys(&out.join("network_healthy.tsv"));
    let b = edge_keys(&out.join("network_tumor.tsv"));
    let d = edge_keys(&out.join("diff_healthy_tumor.tsv"));
    assert_eq!(d, a.symmetric_difference(&b).cloned().collect());
    for e in read_edge_list(&out.join("diff_healthy_tumor.tsv")).unwrap() {
        let holder = if e.condition == "healthy" { &a } else { &b };
        assert!(holder.contains(&(e.node_a, e.node_b)));
    }
    let doc: GraphDocument = read_json(&out.join("network_healthy.json")).unwrap();
    assert_eq!(doc.edges.len(), a.len());
    assert_eq!(doc.nodes.iter().map(|n| n.degree).sum::<usize>(), 2 * a.len());
    let manifest: serde_json::Value = read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest["config_hash"], config.hash());
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), report.artifacts.len());
}

#[test]
fn synth_sweep_writes_per_seed_and_mean_curves() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(Mode::SynthSweep, dir.path());
    run_experiment(&config).unwrap();
    let per_seed: Vec<Vec<PrRow>> = [1, 2]
        .iter()
        .map(|s| read_csv_rows(&dir.path().join(format!("seed{s}_pr.csv"))).unwrap())
        .collect();
    let mean: Vec<PrRow> = read_csv_rows(&dir.path().join("pr_mean.csv")).unwrap();
    assert_eq!(mean.len(), 6);
    for (i, row) in mean.iter().enumerate() {
        let recall = (per_seed[0][i].recall + per_seed[1][i].recall) / 2.0;
        assert!((row.recall - recall).abs() < 1e-12);
        assert_eq!((row.lambda1, row.value), (per_seed[0][i].lambda1, per_seed[0][i].value));
    }
    for rows in &per_seed {
        assert!(rows.iter().filter(|r| r.value == 1.0).all(|r| r.n_discoveries == 0));
    }
    assert!(!read_edge_list(&dir.path().join("seed1_truth.tsv")).unwrap().is_empty());
}

#[test]
fn fdr_and_bootstrap_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&tiny_config(Mode::Fdr, dir.path())).unwrap();
    let rows: Vec<FdrRow> = read_csv_rows(&dir.path().join("seed1_fdr.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.fdr_hat) && r.n_splits == 2));

    run_experiment(&tiny_config(Mode::Bootstrap, dir.path())).unwrap();
    let pr: Vec<PrRow> = read_csv_rows(&dir.path().join("seed2_bootstrap_pr.csv")).unwrap();
    assert_eq!(pr.iter().map(|r| r.value).collect::<Vec<_>>(), [0.0, 0.5, 1.0]);
    assert!(pr.iter().all(|r| r.swept_param == "cutoff_c"));
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn every_mode_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = two_csvs(dir.path());
    for mode in [Mode::SynthSweep, Mode::Fit, Mode::Bootstrap, Mode::Fdr, Mode::Grid] {
        for use_files in [false, true] {
            if use_files && mode == Mode::SynthSweep {
                continue;
            }
            let run = |name: &str| -> PathBuf {
                let out = dir.path().join(format!("{}_{use_files}_{name}", mode.as_str()));
                let mut c = tiny_config(mode, &out);
                if use_files {
                    c.inputs = inputs.clone();
                }
                run_experiment(&c).unwrap();
                out
            };
            let (a, b) = (run("a"), run("b"));
            let (fa, fb) = (artifact_bytes(&a), artifact_bytes(&b));
            assert!(!fa.is_empty());
            assert_eq!(fa, fb, "{mode:?}");
        }
    }
}

#[test]
fn grid_artifact_matches_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(Mode::Grid, dir.path());
    run_experiment(&config).unwrap();
    let g = load_grid(&dir.path().join("seed1_grid.json")).unwrap();
    assert_eq!(g.cells.len(), 6);
    assert_eq!(g.config_hash, config.hash());
}

/// Sends one GET request and returns `(status, body)`.
fn get(addr: std::net::SocketAddr, target: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {target} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw.split_once("\r\n\r\n").unwrap().1.to_string();
    (status, body)
}

#[test]
fn http_service_answers_over_a_socket() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(Mode::Grid, dir.path());
    run_experiment(&config).unwrap();
    let artifact = load_grid(&dir.path().join("seed1_grid.json")).unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<html>explorer</html>").unwrap();

    let std_listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    std_listener.set_nonblocking(true).unwrap();
    let addr = std_listener.local_addr().unwrap();
    let service = GridService::new(artifact.clone()).unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).unwrap();
            serve_on(listener, service, Some(ui), std::future::pending()).await.unwrap();
        });
    });

    let (status, body) = get(addr, "/meta");
    assert_eq!(status, 200);
    let meta: MetaResponse = serde_json::from_str(&body).unwrap();
    assert_eq!((meta.lambda1_grid.len(), meta.lambda2_grid.len()), (2, 3));
    assert_eq!(meta.n_cells, 6);
    assert_eq!(meta.config_hash, config.hash());

    let (status, body) = get(addr, "/cell?l1=0.15&l2=1");
    assert_eq!(status, 200);
    let cell: CellResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(cell.n_discoveries, 0);
    assert!(cell.differences.iter().all(|d| d.edges.is_empty()));
    assert_eq!(cell.networks[0].edges, cell.networks[1].edges);

    let (_, body) = get(addr, "/cell?l1=0.29&l2=0.1");
    let cell: CellResponse = serde_json::from_str(&body).unwrap();
    assert_eq!((cell.lambda1, cell.lambda2), (0.3, 0.0));
    let stored = artifact.cell(1, 0);
    assert_eq!(cell.n_discoveries, stored.n_discoveries);
    assert_eq!(cell.differences[0].n_edges, stored.differences[0].edges.len());

    let (status, body) = get(addr, "/curve?l1=0.3");
    assert_eq!(status, 200);
    let curve: CurveResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(curve.rows.len(), 3);

    for bad in ["/cell?l1=2&l2=0", "/cell?l1=0.15&l2=x", "/cell?l2=0", "/curve?l1=-1"] {
        assert_eq!(get(addr, bad).0, 400, "{bad}");
    }
    assert_eq!(get(addr, "/nowhere").0, 404);
    assert_eq!(get(addr, "/../Cargo.toml").0, 404);
    let (status, body) = get(addr, "/");
    assert_eq!((status, body.as_str()), (200, "<html>explorer</html>"));
}

#[test]
fn cli_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_diffnet");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lambda2_grid = [0.0, 2.0]\n[scenario]\np = 5\nm = 3\np_move = 0.2\nk = 2\nn_per_condition = 20\n").unwrap();
    let output = Command::new(bin)
        .args(["fit", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(output.stderr.trim_ascii_end().rsplit(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(report["error"], "config");

    let inputs = two_csvs(dir.path());
    let mut cmd = Command::new(bin);
    cmd.args(["fit", "--lambda1", "0.2", "--lambda2", "0.5", "--out"]).arg(dir.path().join("cli"));
    for i in &inputs {
        cmd.arg("--input").arg(format!("{}={}", i.label, i.path.display()));
    }
    let output = cmd.env("DIFFNET_LOG", "error").output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(dir.path().join("cli/diff_healthy_tumor.tsv").exists());
}
