//! Declarative TOML experiment configuration.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, Error};
use crate::lp::{build_arc_lp, solve_lp, Objective, DEFAULT_TOLERANCE};
use crate::paths::CostMetric;
use crate::raecke::{Decomposition, RaeckeParams};
use crate::report::Manifest;
use crate::sim::{run_experiment, ExperimentReport, RunOptions, TeSystem};
use crate::topology::{parse_topology, random_topology, GraphmlOptions, Topology, TopologyFormat};
use crate::traffic::{gravity_matrix, make_tm_sequence, read_tm_csv, Profile, SequenceSpec, TmSequence, DEFAULT_JITTER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    #[serde(default)]
    pub demand: DemandConfig,
    pub systems: Vec<String>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub ksp_metric: CostMetric,
    #[serde(default)]
    pub raecke: RaeckeConfig,
    #[serde(default = "default_tolerance")]
    pub lp_tolerance: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_budget() -> usize {
    4
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub path: Option<PathBuf>,
    pub format: Option<TopologyFormat>,
    /// GraphML reader knobs; unset keys keep the reader defaults.
    pub capacity_attr: Option<String>,
    /// Empty string disables unit handling.
    pub units_attr: Option<String>,
    pub unit_multiplier: Option<f64>,
    pub default_capacity: Option<f64>,
    pub random: Option<RandomTopology>,
}

impl TopologyConfig {
    pub fn graphml_options(&self) -> GraphmlOptions {
        let mut o = GraphmlOptions::default();
        if let Some(a) = &self.capacity_attr {
            o.capacity_attr = a.clone();
        }
        if let Some(u) = &self.units_attr {
            o.units_attr = if u.is_empty() { None } else { Some(u.clone()) };
        }
        if let Some(m) = self.unit_multiplier {
            o.unit_multiplier = m;
        }
        o.default_capacity = self.default_capacity;
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTopology {
    pub nodes: usize,
    pub links: usize,
    pub cap_min: f64,
    pub cap_max: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Either `tm_file` or the generator keys.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub tm_file: Option<PathBuf>,
    /// Base gravity total volume.
    pub total_volume: Option<f64>,
    /// Alternative to `total_volume`: scale the base gravity matrix so its
    /// min-MLU over all paths equals this value.
    pub base_mlu: Option<f64>,
    pub profile: Option<Profile>,
    pub steps: Option<usize>,
    pub peak_scale: Option<f64>,
    pub seed: Option<u64>,
    pub jitter: Option<Jitter>,
}

/// `true`/`false`, or explicit `[lo, hi]` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Jitter {
    Enabled(bool),
    Bounds([f64; 2]),
}

impl DemandConfig {
    fn has_generator_keys(&self) -> bool {
        self.total_volume.is_some()
            || self.base_mlu.is_some()
            || self.profile.is_some()
            || self.steps.is_some()
            || self.peak_scale.is_some()
            || self.seed.is_some()
            || self.jitter.is_some()
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(1)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn jitter_bounds(&self) -> Option<(f64, f64)> {
        match self.jitter.unwrap_or(Jitter::Enabled(true)) {
            Jitter::Enabled(true) => Some(DEFAULT_JITTER),
            Jitter::Enabled(false) => None,
            Jitter::Bounds([lo, hi]) => Some((lo, hi)),
        }
    }

    pub fn sequence_spec(&self) -> SequenceSpec {
        SequenceSpec {
            profile: self.profile.unwrap_or(Profile::Constant),
            steps: self.steps(),
            peak_scale: self.peak_scale.unwrap_or(1.0),
            seed: self.seed(),
            jitter: self.jitter_bounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaeckeConfig {
    pub iterations: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub decomposition: Decomposition,
    /// Number of independently seeded runs of each RACKE system.
    pub repeats: usize,
}

impl Default for RaeckeConfig {
    fn default() -> Self {
        let p = RaeckeParams::default();
        RaeckeConfig {
            iterations: p.iterations,
            epsilon: p.epsilon,
            seed: p.seed,
            decomposition: p.decomposition,
            repeats: 1,
        }
    }
}

impl RaeckeConfig {
    pub fn params(&self) -> RaeckeParams {
        RaeckeParams {
            iterations: self.iterations,
            epsilon: self.epsilon,
            seed: self.seed,
            decomposition: self.decomposition,
        }
    }

    /// Seeds of the repeated runs: `seed, seed + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

/// Parses and validates a config document. File existence is checked by
/// [`ExperimentConfig::check_files`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        if msg.contains("missing field `topology`") {
            return ConfigError::MissingTopology;
        }
        match e.span().map(|s| text[..s.start].lines().count().max(1)) {
            Some(line) => ConfigError::Syntax(format!("line {line}: {msg}")),
            None => ConfigError::Syntax(msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.topology.path, &self.topology.random) {
            (None, None) => return Err(ConfigError::MissingTopology),
            (Some(_), Some(_)) => return Err(invalid("topology", "set either `path` or `random`, not both")),
            _ => {}
        }
        if let Some(r) = &self.topology.random {
            if r.nodes < 2 {
                return Err(invalid("topology.random.nodes", "need at least 2 nodes"));
            }
            if !(r.cap_min > 0.0 && r.cap_max >= r.cap_min) {
                return Err(invalid("topology.random", "need 0 < cap_min <= cap_max"));
            }
        }
        if self.systems.is_empty() {
            return Err(invalid("systems", "at least one system is required"));
        }
        for s in &self.systems {
            if TeSystem::from_name(s).is_none() {
                return Err(ConfigError::UnknownSystem(s.clone()));
            }
        }
        if self.budget < 1 {
            return Err(invalid("budget", "must be at least 1"));
        }
        if !(self.lp_tolerance > 0.0) {
            return Err(invalid("lp_tolerance", "must be positive"));
        }
        let d = &self.demand;
        if d.tm_file.is_some() && d.has_generator_keys() {
            return Err(ConfigError::ConflictingDemand);
        }
        if d.total_volume.is_some() && d.base_mlu.is_some() {
            return Err(invalid("demand.base_mlu", "set either `total_volume` or `base_mlu`"));
        }
        if d.total_volume.is_some_and(|v| !(v >= 0.0)) {
            return Err(invalid("demand.total_volume", "must be non-negative"));
        }
        if d.base_mlu.is_some_and(|v| !(v > 0.0)) {
            return Err(invalid("demand.base_mlu", "must be positive"));
        }
        if d.steps == Some(0) {
            return Err(invalid("demand.steps", "must be at least 1"));
        }
        if d.peak_scale.is_some_and(|v| !(v > 0.0)) {
            return Err(invalid("demand.peak_scale", "must be positive"));
        }
        if let Some((lo, hi)) = d.jitter_bounds() {
            if !(lo > 0.0 && hi >= lo) {
                return Err(invalid("demand.jitter", "need 0 < lo <= hi"));
            }
        }
        let r = &self.raecke;
        if r.iterations < 1 {
            return Err(invalid("raecke.iterations", "must be at least 1"));
        }
        if !(r.epsilon > 0.0) {
            return Err(invalid("raecke.epsilon", "must be positive"));
        }
        if r.repeats < 1 {
            return Err(invalid("raecke.repeats", "must be at least 1"));
        }
        Ok(())
    }

    /// Checks that referenced files exist, relative to `base`.
    pub fn check_files(&self, base: &FsPath) -> Result<(), ConfigError> {
        let files = [("topology.path", &self.topology.path), ("demand.tm_file", &self.demand.tm_file)];
        for (key, p) in files {
            if let Some(p) = p {
                let full = base.join(p);
                if !full.is_file() {
                    return Err(ConfigError::MissingFile { key: key.to_string(), path: full });
                }
            }
        }
        Ok(())
    }

    /// Replaces every seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        if self.demand.tm_file.is_none() {
            self.demand.seed = Some(seed);
        }
        self.raecke.seed = seed;
        if let Some(r) = &mut self.topology.random {
            r.seed = seed;
        }
    }

    /// Keeps only the listed systems, in config order.
    pub fn filter_systems(&mut self, keep: &[String]) -> Result<(), ConfigError> {
        for k in keep {
            if TeSystem::from_name(k).is_none() {
                return Err(ConfigError::UnknownSystem(k.clone()));
            }
            if !self.systems.contains(k) {
                return Err(invalid("--systems", format!("`{k}` is not in the config's systems")));
            }
        }
        self.systems.retain(|s| keep.contains(s));
        Ok(())
    }

    /// SHA-256 of the resolved config in canonical JSON, excluding the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// The resolved config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            budget: self.budget,
            ksp_metric: self.ksp_metric,
            raecke: self.raecke.params(),
            lp_tolerance: self.lp_tolerance,
        }
    }

    /// Systems in config order; RACKE systems are expanded per repeat seed
    /// and suffixed `#seed` when repeated.
    pub fn te_systems(&self) -> Vec<TeSystem> {
        let seeds = self.raecke.seeds();
        let mut out = Vec::new();
        for name in &self.systems {
            let base = TeSystem::from_name(name).expect("validated");
            if base.paths != crate::sim::PathAlgorithm::Raecke {
                out.push(base);
            } else if seeds.len() == 1 {
                out.push(base.with_seed(seeds[0]));
            } else {
                for &s in &seeds {
                    let mut sys = base.clone().with_seed(s);
                    sys.name = format!("{name}#{s}");
                    out.push(sys);
                }
            }
        }
        out
    }

    pub fn load_topology(&self, base: &FsPath) -> Result<Topology, Error> {
        if let Some(r) = &self.topology.random {
            return Ok(random_topology(r.nodes, r.links, (r.cap_min, r.cap_max), r.seed));
        }
        let path = base.join(self.topology.path.as_ref().ok_or(ConfigError::MissingTopology)?);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let format = self.topology.format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some("json") => TopologyFormat::Json,
            _ => TopologyFormat::Graphml,
        });
        parse_topology(&text, format, &self.topology.graphml_options())
            .map_err(|e| Error::Other(format!("{}: {e}", path.display())))
    }

    pub fn load_demand(&self, base: &FsPath, t: &Topology) -> Result<TmSequence, Error> {
        if let Some(p) = &self.demand.tm_file {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let seq = read_tm_csv(&text).map_err(|e| Error::Other(format!("{}: {e}", path.display())))?;
            if seq.steps.first().is_some_and(|tm| tm.size() != t.node_count()) {
                return Err(Error::Other(format!(
                    "{}: matrix has {} nodes, topology has {}",
                    path.display(),
                    seq.steps[0].size(),
                    t.node_count()
                )));
            }
            return Ok(seq);
        }
        let base_tm = match (self.demand.total_volume, self.demand.base_mlu) {
            (Some(v), _) => gravity_matrix(t, v)?,
            (None, mlu) => calibrated_gravity(t, mlu.unwrap_or(1.0), self.lp_tolerance)?,
        };
        Ok(make_tm_sequence(&base_tm, &self.demand.sequence_spec())?)
    }
}

/// Everything produced by one configured run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub topology: Topology,
    pub demand: TmSequence,
    pub report: ExperimentReport,
    pub manifest: Manifest,
}

fn file_hash(base: &FsPath, p: &Option<PathBuf>) -> Result<Option<String>, Error> {
    let Some(p) = p else { return Ok(None) };
    let path = base.join(p);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Some(hex::encode(Sha256::digest(&bytes))))
}

/// Loads inputs relative to `base`, runs every system and assembles the
/// manifest. Outputs are not written.
pub fn run_config(cfg: &ExperimentConfig, base: &FsPath) -> Result<RunOutput, Error> {
    cfg.validate()?;
    cfg.check_files(base)?;
    let topology = cfg.load_topology(base)?;
    let demand = cfg.load_demand(base, &topology)?;
    let report = run_experiment(&topology, &demand, &cfg.te_systems(), &cfg.run_options());
    let mut manifest = Manifest::new(&report, cfg.hash(), topology.node_count(), demand.steps.len());
    manifest.topology_hash = file_hash(base, &cfg.topology.path)?;
    manifest.demand_hash = file_hash(base, &cfg.demand.tm_file)?;
    manifest.demand_seed = cfg.demand.tm_file.is_none().then(|| cfg.demand.seed());
    Ok(RunOutput { topology, demand, report, manifest })
}

/// Gravity matrix scaled so that its optimal min-MLU routing over all paths
/// has utilization `target`.
pub fn calibrated_gravity(t: &Topology, target: f64, tolerance: f64) -> Result<crate::traffic::TrafficMatrix, Error> {
    let unit = gravity_matrix(t, 1.0)?;
    let sol = solve_lp(&build_arc_lp(t, &unit, Objective::LoadBalance), tolerance);
    if !sol.is_optimal() || !(sol.objective > 0.0) {
        return Err(Error::Other(format!("cannot calibrate demand: min-MLU solve returned {:?}", sol.status)));
    }
    Ok(unit.scaled(target / sol.objective))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "systems = [\"KSP+LB\"]\n[topology]\npath = \"t.json\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.budget, 4);
        assert_eq!(c.demand.steps(), 1);
        assert_eq!(c.lp_tolerance, 1e-6);
        assert_eq!(c.raecke.params(), RaeckeParams::default());
        assert_eq!(c.te_systems().len(), 1);
    }

    #[test]
    fn error_cases() {
        let e = parse_config("systems = [\"KSP+MLU\"]\n[topology]\npath = \"t.json\"\n").unwrap_err();
        assert!(e.to_string().contains("unknown system"), "{e}");
        let e = parse_config(&format!("{MINIMAL}[demand]\ntm_file = \"a.csv\"\ntotal_volume = 3.0\n")).unwrap_err();
        assert!(e.to_string().contains("conflicting demand sources"), "{e}");
        assert!(matches!(parse_config("systems = [\"KSP+LB\"]\n"), Err(ConfigError::MissingTopology)));
        assert!(matches!(parse_config("systems = [\"KSP+LB\"]\n[topology]\n"), Err(ConfigError::MissingTopology)));
        let e = parse_config(&format!("{MINIMAL}budgte = 3\n")).unwrap_err();
        assert!(e.to_string().contains("budgte"), "{e}");
        let e = parse_config(&MINIMAL.replace("systems = [\"KSP+LB\"]", "systems = []\nbudget = 1")).unwrap_err();
        assert!(e.to_string().contains("`systems`"), "{e}");
        let e = parse_config(&format!("{MINIMAL}[demand]\nsteps = 0\n")).unwrap_err();
        assert!(e.to_string().contains("demand.steps"), "{e}");
    }

    #[test]
    fn raecke_repeats_expand() {
        let text = "systems = [\"RACKE+AD\", \"KSP+LB\"]\n[topology]\npath = \"t.json\"\n[raecke]\nseed = 7\nrepeats = 3\n";
        let c = parse_config(text).unwrap();
        let names: Vec<_> = c.te_systems().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["RACKE+AD#7", "RACKE+AD#8", "RACKE+AD#9", "KSP+LB"]);
    }

    #[test]
    fn jitter_forms() {
        let c = parse_config(&format!("{MINIMAL}[demand]\njitter = false\n")).unwrap();
        assert_eq!(c.demand.jitter_bounds(), None);
        let c = parse_config(&format!("{MINIMAL}[demand]\njitter = [0.9, 1.1]\n")).unwrap();
        assert_eq!(c.demand.jitter_bounds(), Some((0.9, 1.1)));
    }

    #[test]
    fn hash_tracks_content_and_overrides() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.override_seed(42);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(b.raecke.seed, 42);
        assert_eq!(b.demand.seed, Some(42));
    }

    #[test]
    fn missing_file_names_key() {
        let c = parse_config(MINIMAL).unwrap();
        let e = c.check_files(FsPath::new("/nonexistent")).unwrap_err();
        assert!(e.to_string().contains("topology.path"), "{e}");
    }
}
