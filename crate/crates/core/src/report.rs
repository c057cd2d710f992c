//! CSV and manifest emission for experiment reports.

use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;

use crate::error::Error;
use crate::sim::ExperimentReport;

pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const UTILIZATION_CSV: &str = "utilization.csv";
pub const LATENCY_CSV: &str = "latency.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

pub const THROUGHPUT_HEADER: [&str; 3] = ["system", "step", "throughput"];
pub const UTILIZATION_HEADER: [&str; 4] = ["system", "step", "link_id", "utilization"];
pub const LATENCY_HEADER: [&str; 7] = ["system", "step", "src", "dst", "path_idx", "latency", "delivered"];

fn writer(header: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    w
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn throughput_csv(report: &ExperimentReport) -> String {
    let mut w = writer(&THROUGHPUT_HEADER);
    for s in &report.series {
        for (step, m) in s.steps.iter().enumerate() {
            w.write_record([s.system.name.clone(), step.to_string(), m.throughput.to_string()])
                .expect("in-memory write");
        }
    }
    finish(w)
}

pub fn utilization_csv(report: &ExperimentReport) -> String {
    let mut w = writer(&UTILIZATION_HEADER);
    for s in &report.series {
        for (step, m) in s.steps.iter().enumerate() {
            for (link, u) in m.utilization.iter().enumerate() {
                w.write_record([s.system.name.clone(), step.to_string(), link.to_string(), u.to_string()])
                    .expect("in-memory write");
            }
        }
    }
    finish(w)
}

pub fn latency_csv(report: &ExperimentReport) -> String {
    let mut w = writer(&LATENCY_HEADER);
    for s in &report.series {
        for (step, m) in s.steps.iter().enumerate() {
            for x in &m.samples {
                w.write_record([
                    s.system.name.clone(),
                    step.to_string(),
                    x.src.to_string(),
                    x.dst.to_string(),
                    x.path_idx.to_string(),
                    x.latency.to_string(),
                    x.delivered.to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemEntry {
    pub name: String,
    pub raecke_seed: Option<u64>,
    pub steps_completed: usize,
    pub failure: Option<String>,
}

/// Run metadata. Contains nothing time- or host-dependent, so identical
/// inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub topology_hash: Option<String>,
    pub demand_hash: Option<String>,
    pub demand_seed: Option<u64>,
    pub raecke_seeds: Vec<u64>,
    pub nodes: usize,
    pub links: usize,
    pub steps: usize,
    pub peak_step: usize,
    pub systems: Vec<SystemEntry>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(report: &ExperimentReport, config_hash: String, nodes: usize, steps: usize) -> Self {
        let mut raecke_seeds: Vec<u64> = report.series.iter().filter_map(|s| s.system.seed).collect();
        raecke_seeds.sort_unstable();
        raecke_seeds.dedup();
        Manifest {
            tool: "tesim".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            topology_hash: None,
            demand_hash: None,
            demand_seed: None,
            raecke_seeds,
            nodes,
            links: report.link_count,
            steps,
            peak_step: report.peak_step,
            systems: report
                .series
                .iter()
                .map(|s| SystemEntry {
                    name: s.system.name.clone(),
                    raecke_seed: s.system.seed,
                    steps_completed: s.steps.len(),
                    failure: s.failure.as_ref().map(|f| f.to_string()),
                })
                .collect(),
            files: [THROUGHPUT_CSV, UTILIZATION_CSV, LATENCY_CSV].map(String::from).to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Writes the three CSVs and the manifest into `dir` (created if needed).
pub fn emit_outputs(report: &ExperimentReport, manifest: &Manifest, dir: &FsPath) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (THROUGHPUT_CSV, throughput_csv(report)),
        (UTILIZATION_CSV, utilization_csv(report)),
        (LATENCY_CSV, latency_csv(report)),
        (MANIFEST_JSON, manifest.to_json()),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
