//! Resumable on-disk pipeline runs.
//!
//! Each stage reads its upstream artifacts from the run directory, writes
//! its own, and records a status entry under `stages/`. Rerunning a stage
//! with the same configuration and seed rewrites byte-identical artifacts
//! (status files carry wall-clock timings and are exempt). A `.lock` file
//! makes sure a single process owns the run directory at a time.
//!
//! Configuration is a flat `key = value` text file; every key can be
//! overridden from the command line.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coherence::{self, CoherenceConfig};
use crate::corpus::Corpus;
use crate::dsi::{self, DsiConfig, DsrGrid, VenueSupplyProfile};
use crate::error::{Error, Result};
use crate::geo::Reference;
use crate::ingest::{self, IngestConfig};
use crate::poptics::{self, PopticsConfig, ReachabilityResult, UserActivityProfile};
use crate::synthgen::{self, SynthSpec};
use crate::temporal::HourGranularity;
use crate::tlda::{self, TldaHyperparams, TldaModel};
use crate::validate::{self, CorrelationLevel, CorrelationResult};

pub const STAGES: [&str; 8] = [
    "synth", "ingest", "select-k", "fit", "profiles", "dsi", "validate", "report",
];

/// Every knob of a run, resolved from defaults, an optional config file,
/// and command-line overrides (in that order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub input: Option<PathBuf>,
    pub seed: u64,

    // Ingestion.
    pub min_checkins: usize,
    pub categories: Option<BTreeSet<String>>,
    pub tz_offset_secs: i32,
    pub hour_granularity: HourGranularity,
    pub ref_lat: f64,
    pub ref_lon: f64,

    // Model.
    /// Pattern count for `fit`; 0 reads the best K chosen by `select-k`.
    pub k: usize,
    /// `None` resolves to 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
    /// `None` resolves to 50/K.
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub temporal_enabled: bool,

    // Model selection.
    pub k_candidates: Vec<usize>,
    pub chains: usize,
    pub coherence: CoherenceConfig,

    // Localization and mapping.
    pub poptics: PopticsConfig,
    pub dsi: DsiConfig,
    pub correlation_level: CorrelationLevel,
    pub export_reachability: bool,

    // Synthetic corpus generation (`seed` above overrides the spec's).
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("run"),
            input: None,
            seed: 0,
            min_checkins: 20,
            categories: None,
            tz_offset_secs: 0,
            hour_granularity: HourGranularity::hourly(),
            ref_lat: 39.9,
            ref_lon: 116.4,
            k: 6,
            alpha: None,
            beta: 0.01,
            gamma: None,
            iterations: 100,
            burn_in: 0,
            temporal_enabled: true,
            k_candidates: (3..=9).collect(),
            chains: 1,
            coherence: CoherenceConfig::default(),
            poptics: PopticsConfig::default(),
            dsi: DsiConfig::default(),
            correlation_level: CorrelationLevel::Cell,
            export_reachability: false,
            synth: SynthSpec::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("cannot parse {key} = {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(format!(
            "cannot parse {key} = {other:?} as bool"
        ))),
    }
}

fn parse_candidates(value: &str) -> Result<Vec<usize>> {
    let value = value.trim();
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: usize = parse("k_candidates", lo)?;
        let hi: usize = parse("k_candidates", hi.trim_start_matches('='))?;
        if lo > hi {
            return Err(Error::config("k_candidates range is empty"));
        }
        return Ok((lo..=hi).collect());
    }
    value.split(',').map(|s| parse("k_candidates", s)).collect()
}

fn parse_granularity(value: &str) -> Result<HourGranularity> {
    match value.trim() {
        "hourly" | "24" => Ok(HourGranularity::hourly()),
        "five_slot" | "5" => Ok(HourGranularity::five_slot()),
        custom => {
            let starts: Result<Vec<u8>> = custom
                .split(',')
                .map(|s| parse("hour_granularity", s))
                .collect();
            HourGranularity::from_starts(starts?)
        }
    }
}

impl RunConfig {
    /// Parse a flat key-value file, then apply overrides on top.
    pub fn from_sources(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            for (key, value) in read_kv_file(path)? {
                config.set(&key, &value)?;
            }
        }
        for (key, value) in overrides {
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "input" => self.input = Some(PathBuf::from(value.trim())),
            "seed" => self.seed = parse(key, value)?,
            "min_checkins" => self.min_checkins = parse(key, value)?,
            "categories" => {
                let set: BTreeSet<String> = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
                self.categories = if set.is_empty() { None } else { Some(set) };
            }
            "tz_offset" => self.tz_offset_secs = parse(key, value)?,
            "hour_granularity" => self.hour_granularity = parse_granularity(value)?,
            "ref_lat" => self.ref_lat = parse(key, value)?,
            "ref_lon" => self.ref_lon = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "alpha" => self.alpha = Some(parse(key, value)?),
            "beta" => self.beta = parse(key, value)?,
            "gamma" => self.gamma = Some(parse(key, value)?),
            "iterations" => self.iterations = parse(key, value)?,
            "burn_in" => self.burn_in = parse(key, value)?,
            "temporal_enabled" => self.temporal_enabled = parse_bool(key, value)?,
            "k_candidates" => self.k_candidates = parse_candidates(value)?,
            "chains" => self.chains = parse(key, value)?,
            "window_size" => self.coherence.window_size = parse(key, value)?,
            "epsilon" => self.coherence.epsilon = parse(key, value)?,
            "tau" => self.coherence.tau = parse(key, value)?,
            "top_n_venues" => self.coherence.top_n_venues = parse(key, value)?,
            "top_n_times" => self.coherence.top_n_times = parse(key, value)?,
            "venue_threshold" => {
                self.coherence.venue_threshold = match value.trim() {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "eta" => self.poptics.eta = parse(key, value)?,
            "max_dist" => {
                self.poptics.max_dist = match value.trim() {
                    "inf" => f64::INFINITY,
                    v => parse(key, v)?,
                }
            }
            "radius_floor" => self.poptics.radius_floor = parse(key, value)?,
            "cell_size" => self.dsi.cell_size = parse(key, value)?,
            "sigma_floor" => self.dsi.sigma_floor = parse(key, value)?,
            "supply_epsilon" => self.dsi.supply_epsilon = parse(key, value)?,
            "pad_cells" => self.dsi.pad_cells = parse(key, value)?,
            "correlation_level" => {
                self.correlation_level = match value.trim() {
                    "cell" => CorrelationLevel::Cell,
                    "user" => CorrelationLevel::User,
                    other => {
                        return Err(Error::config(format!(
                            "correlation_level must be cell or user, got {other:?}"
                        )))
                    }
                }
            }
            "export_reachability" => self.export_reachability = parse_bool(key, value)?,
            "synth_k_true" => self.synth.k_true = parse(key, value)?,
            "synth_users" => self.synth.users = parse(key, value)?,
            "synth_categories_per_pattern" => {
                self.synth.categories_per_pattern = parse(key, value)?
            }
            "synth_venues_per_category" => self.synth.venues_per_category = parse(key, value)?,
            "synth_checkins_per_user" => self.synth.checkins_per_user = parse(key, value)?,
            "synth_mixture_noise" => self.synth.mixture_noise = parse(key, value)?,
            "synth_category_leak" => self.synth.category_leak = parse(key, value)?,
            "synth_time_concentration" => self.synth.time_concentration = parse(key, value)?,
            "synth_extent_m" => self.synth.extent_m = parse(key, value)?,
            "synth_venue_center_bias" => self.synth.venue_center_bias = parse(key, value)?,
            "synth_venue_distance_bias" => self.synth.venue_distance_bias = parse(key, value)?,
            "synth_noncultural_per_user" => self.synth.noncultural_per_user = parse(key, value)?,
            "synth_home_sigma_m" => self.synth.home_sigma_m = parse(key, value)?,
            "synth_work_probability" => self.synth.work_probability = parse(key, value)?,
            "synth_work_fraction" => self.synth.work_fraction = parse(key, value)?,
            "synth_year" => self.synth.year = parse(key, value)?,
            other => {
                return Err(Error::config(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> Result<Reference> {
        Reference::new(self.ref_lat, self.ref_lon)
            .map_err(|e| Error::config(format!("invalid reference point: {e}")))
    }

    pub fn ingest_config(&self) -> Result<IngestConfig> {
        Ok(IngestConfig {
            min_checkins: self.min_checkins,
            category_whitelist: self.categories.clone(),
            tz_offset_secs: self.tz_offset_secs,
            granularity: self.hour_granularity.clone(),
            reference: self.reference()?,
        })
    }

    /// Hyperparameters for a given K, resolving the 50/K defaults.
    pub fn hyperparams(&self, k: usize) -> TldaHyperparams {
        TldaHyperparams {
            k,
            alpha: self.alpha.unwrap_or(50.0 / k as f64),
            beta: self.beta,
            gamma: self.gamma.unwrap_or(50.0 / k as f64),
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed,
            temporal_enabled: self.temporal_enabled,
        }
    }

    /// Validate everything validatable up front, before any work starts.
    pub fn validate_all(&self) -> Result<()> {
        self.reference()?;
        self.ingest_config()?.validate()?;
        self.coherence.validate()?;
        self.poptics.validate()?;
        self.dsi.validate()?;
        self.synth.validate()?;
        if self.k != 0 {
            self.hyperparams(self.k).validate()?;
        }
        if self.k_candidates.is_empty() {
            return Err(Error::config("k_candidates must not be empty"));
        }
        if self.chains == 0 {
            return Err(Error::config("chains must be positive"));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON form, stable across runs.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv64(canonical.as_bytes()))
    }
}

fn read_kv_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config file {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                lineno + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Holds the run directory for the duration of one stage.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::config(format!(
                "run directory is locked by another process (remove {} if stale)",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Status record of one finished stage. Durations are wall clock and the
/// one part of a run that is not byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub duration_ms: u128,
    pub artifacts: Vec<String>,
}

fn write_status(cfg: &RunConfig, stage: &str, started: Instant, artifacts: &[&str]) -> Result<()> {
    let dir = cfg.out_dir.join("stages");
    fs::create_dir_all(&dir)?;
    let status = StageStatus {
        stage: stage.to_string(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        duration_ms: started.elapsed().as_millis(),
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    };
    serde_json::to_writer_pretty(File::create(dir.join(format!("{stage}.json")))?, &status)?;
    Ok(())
}

fn create(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>> {
    let path = cfg.out_dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open_artifact(cfg: &RunConfig, name: &str, stage: &'static str) -> Result<BufReader<File>> {
    let path = cfg.out_dir.join(name);
    match File::open(&path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingArtifact { stage, path })
        }
        Err(e) => Err(e.into()),
    }
}

// Versioned JSON wrappers for the structured artifacts.

#[derive(Serialize, Deserialize)]
struct ProfilesArtifact {
    version: u32,
    profiles: Vec<UserActivityProfile>,
}

#[derive(Serialize, Deserialize)]
struct DsiArtifact {
    version: u32,
    grid: DsrGrid,
    venues: Vec<VenueSupplyProfile>,
    /// Patterns whose DSR layer has no defined cell; nonzero values warrant
    /// a look at the supply inputs.
    fully_undefined_patterns: usize,
}

#[derive(Serialize, Deserialize)]
struct ValidateArtifact {
    version: u32,
    results: Vec<CorrelationResult>,
    omitted_users: usize,
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let corpus: Corpus = serde_json::from_reader(open_artifact(cfg, "corpus.json", "ingest")?)?;
    corpus.check_invariants(1)?;
    Ok(corpus)
}

pub fn load_model(cfg: &RunConfig) -> Result<TldaModel> {
    TldaModel::load(open_artifact(cfg, "model.json", "fit")?)
}

pub fn load_profiles(cfg: &RunConfig) -> Result<Vec<UserActivityProfile>> {
    let artifact: ProfilesArtifact =
        serde_json::from_reader(open_artifact(cfg, "profiles.json", "profiles")?)?;
    Ok(artifact.profiles)
}

pub fn load_dsi(cfg: &RunConfig) -> Result<(DsrGrid, Vec<VenueSupplyProfile>)> {
    let artifact: DsiArtifact = serde_json::from_reader(open_artifact(cfg, "dsi.json", "dsi")?)?;
    Ok((artifact.grid, artifact.venues))
}

/// Generate the synthetic corpus into `<out_dir>/synth/`.
pub fn run_synth(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let mut spec = cfg.synth.clone();
    spec.seed = cfg.seed;
    let output = synthgen::generate(&spec)?;
    synthgen::write_files(&output, &cfg.out_dir.join("synth"))?;
    write_status(
        cfg,
        "synth",
        started,
        &[
            "synth/checkins.csv",
            "synth/truth_users.csv",
            "synth/truth_venues.csv",
            "synth/params.json",
        ],
    )
}

/// Stream the input CSV into `corpus.json`, plus the rejection report and
/// the calendar heatmap.
pub fn run_ingest(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::config("ingest requires an input file (set `input`)"))?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let (corpus, report) = ingest::build_corpus_streaming(&input, &cfg.ingest_config()?)?;
    serde_json::to_writer(create(cfg, "corpus.json")?, &corpus)?;
    report.write_text(create(cfg, "rejections.txt")?)?;
    ingest::calendar_heatmap(&corpus)?.write_csv(create(cfg, "heatmap.csv")?)?;
    write_status(
        cfg,
        "ingest",
        started,
        &["corpus.json", "rejections.txt", "heatmap.csv"],
    )
}

/// Score every candidate K and record the table plus the winner.
pub fn run_select_k(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let corpus = load_corpus(cfg)?;
    let template = cfg.hyperparams(cfg.k_candidates[0]);
    let result = coherence::select_k(
        &corpus,
        &cfg.k_candidates,
        &template,
        cfg.chains,
        &cfg.coherence,
    )?;
    serde_json::to_writer_pretty(create(cfg, "select_k.json")?, &result)?;
    coherence::write_tcv_table_csv(create(cfg, "tcv_table.csv")?, &result)?;
    write_status(
        cfg,
        "select-k",
        started,
        &["select_k.json", "tcv_table.csv"],
    )
}

fn resolve_k(cfg: &RunConfig) -> Result<usize> {
    if cfg.k != 0 {
        return Ok(cfg.k);
    }
    let result: coherence::SelectKResult =
        serde_json::from_reader(open_artifact(cfg, "select_k.json", "select-k")?)?;
    Ok(result.best_k)
}

/// Fit the model at the configured (or selected) K and export the smoothed
/// distributions and the venue-similarity matrix.
///
/// With `chains > 1`, independent chains run on derived seeds and the one
/// with the highest temporal coherence wins.
pub fn run_fit(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let corpus = load_corpus(cfg)?;
    let k = resolve_k(cfg)?;
    let model = if cfg.chains == 1 {
        let mut hp = cfg.hyperparams(k);
        hp.seed = coherence::chain_seed(cfg.seed, k, 0);
        tlda::fit(&corpus, hp)?
    } else {
        let counts = coherence::build_windows(&corpus, cfg.coherence.window_size)?;
        let mut best: Option<(f64, TldaModel)> = None;
        for chain in 0..cfg.chains {
            let mut hp = cfg.hyperparams(k);
            hp.seed = coherence::chain_seed(cfg.seed, k, chain);
            let candidate = tlda::fit(&corpus, hp)?;
            let dists = tlda::distributions(&candidate);
            let tops = coherence::model_top_tokens(&dists, &cfg.coherence);
            let score = coherence::tcv(&tops, &counts, &cfg.coherence)?.score;
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, candidate));
            }
        }
        best.expect("chains >= 1").1
    };
    model.save(create(cfg, "model.json")?)?;

    let dists = tlda::distributions(&model);
    let pattern_labels: Vec<String> = (0..k).map(|z| format!("pattern{z}")).collect();
    tlda::write_matrix_csv(
        create(cfg, "theta.csv")?,
        "user",
        &corpus.users,
        &pattern_labels,
        &dists.theta,
    )?;
    let token_labels: Vec<String> = corpus
        .time_tokens
        .iter()
        .map(|t| t.label(&corpus.granularity))
        .collect();
    tlda::write_matrix_csv(
        create(cfg, "psi.csv")?,
        "time",
        &token_labels,
        &pattern_labels,
        &dists.psi,
    )?;
    tlda::write_matrix_csv(
        create(cfg, "phi.csv")?,
        "pattern",
        &pattern_labels,
        &corpus.categories,
        &dists.phi,
    )?;
    let sim = coherence::venue_similarity(&dists);
    coherence::write_similarity_csv(
        create(cfg, "venue_similarity.csv")?,
        &corpus.categories,
        &sim,
    )?;
    write_status(
        cfg,
        "fit",
        started,
        &[
            "model.json",
            "theta.csv",
            "psi.csv",
            "phi.csv",
            "venue_similarity.csv",
        ],
    )
}

/// Localize every user's activity and export the profiles.
pub fn run_profiles(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let corpus = load_corpus(cfg)?;
    let model = load_model(cfg)?;
    model.check_consistency(&corpus)?;
    let dists = tlda::distributions(&model);
    let profiles = poptics::compute_profiles(&corpus, &model, &dists, &cfg.poptics)?;
    serde_json::to_writer(
        create(cfg, "profiles.json")?,
        &ProfilesArtifact {
            version: 1,
            profiles: profiles.clone(),
        },
    )?;
    poptics::write_profiles_csv(create(cfg, "profiles.csv")?, &corpus, &profiles)?;
    let mut artifacts = vec!["profiles.json", "profiles.csv"];
    if cfg.export_reachability {
        let mut rows: Vec<(String, ReachabilityResult)> = Vec::new();
        for user in 0..corpus.n_users() {
            let locations = corpus.user_locations(user);
            rows.push((
                corpus.users[user].clone(),
                poptics::analyze(&locations, &cfg.poptics)?,
            ));
        }
        poptics::write_reachability_csv(create(cfg, "reachability.csv")?, &rows)?;
        artifacts.push("reachability.csv");
    }
    write_status(cfg, "profiles", started, &artifacts)
}

/// Build the demand/supply/DSR grid and its exports.
pub fn run_dsi(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let corpus = load_corpus(cfg)?;
    let model = load_model(cfg)?;
    let profiles = load_profiles(cfg)?;
    let dists = tlda::distributions(&model);
    let venues = dsi::build_venue_profiles(&corpus, &dists, &profiles, &cfg.dsi);
    let grid = dsi::build_dsr_grid(model.hyperparams.k, &profiles, &venues, &cfg.dsi)?;
    serde_json::to_writer(
        create(cfg, "dsi.json")?,
        &DsiArtifact {
            version: 1,
            grid: grid.clone(),
            venues: venues.clone(),
            fully_undefined_patterns: grid.fully_undefined_patterns(),
        },
    )?;
    dsi::write_venue_profiles_csv(create(cfg, "dsi/venues.csv")?, &corpus, &venues)?;
    let mut artifacts: Vec<String> = vec!["dsi.json".into(), "dsi/venues.csv".into()];
    for z in 0..grid.patterns {
        let demand_name = format!("dsi/demand_{z}.csv");
        let supply_name = format!("dsi/supply_{z}.csv");
        let dsr_name = format!("dsi/dsr_{z}.csv");
        let priority_name = format!("dsi/priority_{z}.csv");
        let geojson_name = format!("dsi/cells_{z}.geojson");
        dsi::write_layer_csv(create(cfg, &demand_name)?, &grid.spec, &grid.demand[z])?;
        dsi::write_layer_csv(create(cfg, &supply_name)?, &grid.spec, &grid.supply[z])?;
        dsi::write_dsr_csv(create(cfg, &dsr_name)?, &grid.spec, &grid.dsr[z])?;
        dsi::write_priority_csv(create(cfg, &priority_name)?, &grid.spec, &grid.dsr[z])?;
        dsi::write_grid_geojson(
            create(cfg, &geojson_name)?,
            &grid.spec,
            &corpus.reference,
            z,
            &grid.demand[z],
            &grid.supply[z],
            &grid.dsr[z],
        )?;
        artifacts.extend([
            demand_name,
            supply_name,
            dsr_name,
            priority_name,
            geojson_name,
        ]);
    }
    let refs: Vec<&str> = artifacts.iter().map(String::as_str).collect();
    write_status(cfg, "dsi", started, &refs)
}

/// Correlate cell DSR with travel distances.
pub fn run_validate(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let corpus = load_corpus(cfg)?;
    let profiles = load_profiles(cfg)?;
    let (grid, venues) = load_dsi(cfg)?;
    let (records, omitted) = validate::travel_distances(&corpus, &profiles, &venues);
    let mut results = Vec::new();
    for z in 0..grid.patterns {
        results.push(validate::dsr_travel_correlation(
            &records,
            &grid,
            &profiles,
            z,
            cfg.correlation_level,
        )?);
    }
    serde_json::to_writer_pretty(
        create(cfg, "validate.json")?,
        &ValidateArtifact {
            version: 1,
            results: results.clone(),
            omitted_users: omitted,
        },
    )?;
    validate::write_correlation_csv(create(cfg, "correlation.csv")?, &results)?;
    validate::write_travel_csv(create(cfg, "travel.csv")?, &corpus, &records)?;
    write_status(
        cfg,
        "validate",
        started,
        &["validate.json", "correlation.csv", "travel.csv"],
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub fnv64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageStatus>,
    pub artifacts: Vec<ManifestEntry>,
}

fn walk_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            walk_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// Inventory every artifact (path, size, hash) and bundle the stage
/// statuses into `run_manifest.json`.
pub fn run_report(cfg: &RunConfig) -> Result<()> {
    cfg.validate_all()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let started = Instant::now();
    let mut files = Vec::new();
    walk_files(&cfg.out_dir, &cfg.out_dir, &mut files)?;
    files.sort();
    let mut artifacts = Vec::new();
    let mut stages = Vec::new();
    for rel in files {
        let name = rel.to_string_lossy().replace('\\', "/");
        if name == "run_manifest.json" || name == ".lock" {
            continue;
        }
        let bytes = fs::read(cfg.out_dir.join(&rel))?;
        if name.starts_with("stages/") {
            stages.push(serde_json::from_slice::<StageStatus>(&bytes)?);
            continue;
        }
        artifacts.push(ManifestEntry {
            path: name,
            bytes: bytes.len() as u64,
            fnv64: format!("{:016x}", fnv64(&bytes)),
        });
    }
    let manifest = RunManifest {
        version: 1,
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        stages,
        artifacts,
    };
    serde_json::to_writer_pretty(create(cfg, "run_manifest.json")?, &manifest)?;
    write_status(cfg, "report", started, &["run_manifest.json"])
}

/// Run one stage by name.
pub fn run_stage(cfg: &RunConfig, stage: &str) -> Result<()> {
    match stage {
        "synth" => run_synth(cfg),
        "ingest" => run_ingest(cfg),
        "select-k" => run_select_k(cfg),
        "fit" => run_fit(cfg),
        "profiles" => run_profiles(cfg),
        "dsi" => run_dsi(cfg),
        "validate" => run_validate(cfg),
        "report" => run_report(cfg),
        other => Err(Error::config(format!("unknown stage {other:?}"))),
    }
}
