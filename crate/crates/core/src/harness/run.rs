//! Mode dispatch: turns an [`ExperimentConfig`] into files on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::baselines::{bootstrap_differences, bootstrap_pr_curve};
use crate::correlation::SampleMatrix;
use crate::diffnet::{average_curves, estimate_all, fit_networks, pairwise_differences, sweep_lambda2};
use crate::error::{Error, Result};
use crate::fdr::fdr_curve;
use crate::harness::config::{ExperimentConfig, Mode};
use crate::harness::grid::{build_grid, GridArtifact};
use crate::harness::io::{
    bootstrap_rows, edge_records, ingest_conditions, pr_rows, read_json, trace_rows, write_csv_rows, write_edge_list,
    write_json, EdgeRecord, FdrRow, GraphDocument, PrRow,
};
use crate::harness::server::serve_grid;
use crate::synthetic::{generate, generate_null, GroundTruth};

/// One set of conditions to analyse: the input files, or one synthetic
/// draw per seed.
pub struct Dataset {
    /// Prepended to every file name written for this dataset.
    pub prefix: String,
    pub seed: u64,
    pub samples: Vec<SampleMatrix>,
    pub truth: Option<GroundTruth>,
}

pub fn datasets(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    if !config.inputs.is_empty() {
        return Ok(vec![Dataset {
            prefix: String::new(),
            seed: config.seeds[0],
            samples: ingest_conditions(&config.inputs)?,
            truth: None,
        }]);
    }
    let scenario = config
        .scenario
        .ok_or_else(|| Error::Config("give a scenario or input files".into()))?;
    config
        .seeds
        .iter()
        .map(|&seed| {
            let s = scenario.with_seed(seed);
            let data = if scenario.null { generate_null(&s)? } else { generate(&s)? };
            Ok(Dataset {
                prefix: format!("seed{seed}_"),
                seed,
                samples: data.samples,
                truth: Some(data.truth),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub output_dir: PathBuf,
    /// File names written, relative to `output_dir`, in write order.
    pub artifacts: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn labels(samples: &[SampleMatrix]) -> Vec<String> {
    samples.iter().map(|s| s.condition_label().to_string()).collect()
}

fn first_only(config: &ExperimentConfig, what: &str) -> (f64, f64) {
    if config.lambda1_grid.len() > 1 || (what == "fit" && config.lambda2_grid.len() > 1) {
        log::warn!("{what} uses the first grid value(s) only");
    }
    (config.lambda1_grid[0], config.lambda2_grid[0])
}

fn synth_sweep(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let mut per_lambda1 = vec![Vec::new(); config.lambda1_grid.len()];
    for ds in datasets(config)? {
        let truth = ds.truth.as_ref().ok_or_else(|| Error::Config("synth_sweep needs a scenario".into()))?;
        let names = labels(&ds.samples);
        let truth_edges: Vec<EdgeRecord> = truth
            .edge_sets
            .iter()
            .zip(&truth.precisions)
            .zip(&names)
            .flat_map(|((e, theta), label)| edge_records(e, theta, label))
            .collect();
        write_edge_list(&out.path(&format!("{}truth.tsv", ds.prefix)), &truth_edges)?;

        let corrs = estimate_all(&ds.samples, config.estimator)?;
        let mut rows = Vec::new();
        for (i, &l1) in config.lambda1_grid.iter().enumerate() {
            log::info!("seed {}: sweeping lambda2 at lambda1 = {l1}", ds.seed);
            let curve = sweep_lambda2(&corrs, &config.penalty(l1, 0.0), &config.lambda2_grid, &truth.edge_sets)?;
            rows.extend(pr_rows(&curve));
            per_lambda1[i].push(curve);
        }
        write_csv_rows(&out.path(&format!("{}pr.csv", ds.prefix)), &rows)?;
    }
    let mut mean_rows: Vec<PrRow> = Vec::new();
    for curves in &per_lambda1 {
        mean_rows.extend(pr_rows(&average_curves(curves)?));
    }
    write_csv_rows(&out.path("pr_mean.csv"), &mean_rows)
}

fn fit(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (l1, l2) = first_only(config, "fit");
    for ds in datasets(config)? {
        let (solution, networks) = fit_networks(&ds.samples, config.estimator, &config.penalty(l1, l2))?;
        if !solution.converged {
            log::warn!("solver stopped after {} iterations without converging", solution.iterations);
        }
        let names = labels(&ds.samples);
        let variables = ds.samples[0].variable_names();
        let attrs = |kind: &str, condition: String| {
            BTreeMap::from([
                ("kind".to_string(), kind.into()),
                ("condition".to_string(), condition.into()),
                ("lambda1".to_string(), l1.into()),
                ("lambda2".to_string(), l2.into()),
                ("converged".to_string(), solution.converged.into()),
            ])
        };
        for (k, net) in networks.iter().enumerate() {
            let recs = edge_records(net, &solution.thetas[k], &names[k]);
            let base = format!("{}network_{}", ds.prefix, file_safe(&names[k]));
            write_edge_list(&out.path(&format!("{base}.tsv")), &recs)?;
            let doc = GraphDocument::new(variables, &recs, attrs("network", names[k].clone()));
            write_json(&out.path(&format!("{base}.json")), &doc)?;
        }
        for ((a, b), diff) in pairwise_differences(&networks)? {
            let recs: Vec<EdgeRecord> = diff
                .iter()
                .map(|(i, j)| {
                    let holder = if networks[a].contains(i, j) { a } else { b };
                    EdgeRecord {
                        node_a: variables[i].clone(),
                        node_b: variables[j].clone(),
                        weight: solution.thetas[holder][(i, j)],
                        condition: names[holder].clone(),
                    }
                })
                .collect();
            let base = format!("{}diff_{}_{}", ds.prefix, file_safe(&names[a]), file_safe(&names[b]));
            write_edge_list(&out.path(&format!("{base}.tsv")), &recs)?;
            let doc = GraphDocument::new(variables, &recs, attrs("difference", format!("{}|{}", names[a], names[b])));
            write_json(&out.path(&format!("{base}.json")), &doc)?;
        }
        write_csv_rows(&out.path(&format!("{}trace.csv", ds.prefix)), &trace_rows(&solution.trace))?;
    }
    Ok(())
}

fn bootstrap(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (l1, _) = first_only(config, "bootstrap");
    for ds in datasets(config)? {
        let result = bootstrap_differences(
            &ds.samples,
            &config.penalty(l1, 0.0),
            config.estimator,
            config.bootstrap.n_bootstraps,
            ds.seed,
        )?;
        write_csv_rows(&out.path(&format!("{}bootstrap.csv", ds.prefix)), &bootstrap_rows(&result))?;
        if let Some(truth) = &ds.truth {
            let curve = bootstrap_pr_curve(&result, &truth.true_differences, &config.bootstrap.cutoff_grid)?;
            write_csv_rows(&out.path(&format!("{}bootstrap_pr.csv", ds.prefix)), &pr_rows(&curve))?;
        }
    }
    Ok(())
}

fn fdr(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    for ds in datasets(config)? {
        let mut rows = Vec::new();
        for &l1 in &config.lambda1_grid {
            let curve = fdr_curve(
                &ds.samples,
                &config.penalty(l1, 0.0),
                &config.lambda2_grid,
                config.estimator,
                config.fdr.n_splits,
                ds.seed,
            )?;
            rows.extend(curve.iter().map(FdrRow::from));
        }
        write_csv_rows(&out.path(&format!("{}fdr.csv", ds.prefix)), &rows)?;
    }
    Ok(())
}

fn grid(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let hash = config.hash();
    for ds in datasets(config)? {
        let artifact = build_grid(
            &ds.samples,
            &config.lambda1_grid,
            &config.lambda2_grid,
            &config.penalty(0.0, 0.0),
            config.estimator,
            config.grid.fdr_splits,
            ds.seed,
            &hash,
        )?;
        write_json(&out.path(&format!("{}grid.json", ds.prefix)), &artifact)?;
    }
    Ok(())
}

/// Grid file used by `serve` when none is configured: `grid.json`, or the
/// first seed's grid in the output directory.
pub fn default_artifact_path(config: &ExperimentConfig) -> PathBuf {
    let plain = config.output_dir.join("grid.json");
    if plain.exists() || config.inputs.len() > 1 {
        return plain;
    }
    config
        .seeds
        .first()
        .map(|s| config.output_dir.join(format!("seed{s}_grid.json")))
        .filter(|p| p.exists())
        .unwrap_or(plain)
}

pub fn load_grid(path: &Path) -> Result<GridArtifact> {
    let artifact: GridArtifact = read_json(path)?;
    artifact.validate()?;
    Ok(artifact)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    config_hash: String,
    seeds: &'a [u64],
    artifacts: &'a [String],
    runtime_seconds: f64,
    timestamp_unix: u64,
    config: &'a ExperimentConfig,
}

/// Runs the configured mode, then writes `manifest.json` next to the
/// artifacts. `serve` blocks until interrupted and writes nothing.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if config.mode == Mode::Serve {
        let path = config.serve.artifact.clone().unwrap_or_else(|| default_artifact_path(config));
        serve_grid(load_grid(&path)?, &config.serve.bind, config.serve.static_dir.clone())?;
        return Ok(RunReport {
            output_dir: config.output_dir.clone(),
            artifacts: Vec::new(),
        });
    }
    let started = Instant::now();
    let mut out = Outputs {
        dir: config.output_dir.clone(),
        files: Vec::new(),
    };
    std::fs::create_dir_all(&out.dir).map_err(|e| Error::io(&out.dir, e))?;
    match config.mode {
        Mode::SynthSweep => synth_sweep(config, &mut out)?,
        Mode::Fit => fit(config, &mut out)?,
        Mode::Bootstrap => bootstrap(config, &mut out)?,
        Mode::Fdr => fdr(config, &mut out)?,
        Mode::Grid => grid(config, &mut out)?,
        Mode::Serve => unreachable!(),
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: config.mode.as_str(),
        config_hash: config.hash(),
        seeds: &config.seeds,
        artifacts: &out.files,
        runtime_seconds: started.elapsed().as_secs_f64(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config,
    };
    write_json(&out.dir.join("manifest.json"), &manifest)?;
    log::info!("wrote {} artifacts to {}", out.files.len(), out.dir.display());
    Ok(RunReport {
        output_dir: out.dir,
        artifacts: out.files,
    })
}
