use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use missbeam_core::dataset::{
    load_missions, split_train_test, write_missions, write_records, ColumnMapping, Format, Mission, SplitManifest,
};
use missbeam_core::eval::{run_matrix, EvalConfig, EvaluationReport, Method, ModelSet, SpeedErrorKind};
use missbeam_core::experiments::{hyperparameter_search, train_on_missions, window_sweep, WindowSweep};
use missbeam_core::models::{model_file_name, Architecture, ModelSpec};
use missbeam_core::sim::{
    run_scenario, synthetic_mission_id, DepthProfile, DopplerModel, MotionProfile, Scenario, TrajectorySpec,
};
use missbeam_core::{enumerate_combinations, BeamGeometry, BeamSet};
use serde::{Deserialize, Serialize};

use crate::config::{resolve, resolve_seed, write_resolved};
use crate::{EvaluateArgs, IngestArgs, ProfileKind, ReportArgs, SimulateArgs, SweepArgs, SweepKind, TrainArgs};

pub const DATASET_FILE: &str = "dataset.csv";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const SPLIT_FILE: &str = "split.json";
pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const WINDOW_SWEEP_CSV: &str = "window_sweep.csv";
pub const WINDOW_SWEEP_JSON: &str = "window_sweep.json";
pub const WINDOW_SWEEP_SVG: &str = "window_sweep.svg";
pub const HYPER_SEARCH_CSV: &str = "hyper_search.csv";
pub const HYPER_SEARCH_JSON: &str = "hyper_search.json";

pub fn loss_file_name(missing: BeamSet) -> String {
    format!("loss_{}.csv", missing.tag())
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    value.as_ref().ok_or_else(|| anyhow!("`--{flag}` is required"))
}

/// `all`, `one`, `two`, `three`, or beam sets separated by `;`.
pub fn parse_combinations(text: &str) -> Result<Vec<BeamSet>> {
    let all = enumerate_combinations();
    let by_len = |k: usize| all.iter().copied().filter(|s| s.len() == k).collect::<Vec<_>>();
    let sets = match text.trim() {
        "all" => all.clone(),
        "one" => by_len(1),
        "two" => by_len(2),
        "three" => by_len(3),
        list => {
            let mut out: Vec<BeamSet> = Vec::new();
            for part in list.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let set: BeamSet = part.parse().map_err(|e| anyhow!("`{part}`: {e}"))?;
                if !out.contains(&set) {
                    out.push(set);
                }
            }
            out
        }
    };
    if sets.is_empty() {
        bail!("no missing-beam combination given");
    }
    for s in &sets {
        if s.is_full() {
            bail!("all four beams missing: at least one beam must remain available");
        }
        if s.is_empty() {
            bail!("a missing-beam set must name at least one beam");
        }
    }
    Ok(sets)
}

fn load_canonical(path: &Path) -> Result<Vec<Mission>> {
    let missions = load_missions(path, &Format::Canonical).with_context(|| format!("loading {}", path.display()))?;
    if missions.is_empty() {
        bail!("{} holds no complete epochs", path.display());
    }
    Ok(missions)
}

/// Train and test missions: from the manifest when given, otherwise by
/// `fraction` of the missions in file order.
fn split_missions(missions: &[Mission], split: Option<&Path>, fraction: f64) -> Result<(Vec<Mission>, Vec<Mission>)> {
    let manifest = match split {
        Some(p) => SplitManifest::load(p).with_context(|| format!("loading split {}", p.display()))?,
        None => SplitManifest::by_fraction(missions, fraction)?,
    };
    Ok(split_train_test(missions, &manifest)?)
}

fn side(missions: Vec<Mission>, split: Option<&Path>, train: bool) -> Result<Vec<Mission>> {
    match split {
        None => Ok(missions),
        Some(p) => {
            let manifest = SplitManifest::load(p).with_context(|| format!("loading split {}", p.display()))?;
            let (tr, te) = split_train_test(&missions, &manifest)?;
            Ok(if train { tr } else { te })
        }
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub profile: ProfileKind,
    pub duration: usize,
    pub missions: usize,
    pub noise: f64,
    pub pitch_deg: f64,
    pub scenario: Option<PathBuf>,
    pub train_fraction: f64,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            profile: ProfileKind::Sinusoidal,
            duration: 2000,
            missions: 1,
            noise: missbeam_core::sim::DEFAULT_BEAM_NOISE_MPS,
            pitch_deg: missbeam_core::geometry::DEFAULT_PITCH_DEG,
            scenario: None,
            train_fraction: 0.7,
            seed: None,
            out: default_out(),
        }
    }
}

pub fn profile_motion(kind: ProfileKind) -> MotionProfile {
    match kind {
        ProfileKind::Constant => MotionProfile::Constant {
            velocity: [1.5, 0.0, 0.0],
        },
        ProfileKind::Sinusoidal => MotionProfile::Sinusoidal {
            mean: [1.5, 0.0, 0.0],
            amplitude: [0.5, 0.3, 0.1],
            period_s: [60.0, 45.0, 30.0],
        },
        ProfileKind::Lawnmower => MotionProfile::Lawnmower {
            speed: 1.5,
            leg_s: 120.0,
            turn_s: 20.0,
            turn_speed: 0.8,
            sway: 0.3,
            heave: 0.05,
        },
    }
}

fn build_scenario(cfg: &SimulateConfig, seed: u64) -> Result<Scenario> {
    if let Some(path) = &cfg.scenario {
        let text = fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let mut s: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
        s.trajectory.seed = seed;
        return Ok(s);
    }
    if !(cfg.noise >= 0.0) {
        bail!("noise must be non-negative");
    }
    let mut doppler = DopplerModel::ideal();
    doppler.noise_std = doppler.shift_for_velocity(cfg.noise);
    Ok(Scenario {
        trajectory: TrajectorySpec {
            duration_s: cfg.duration,
            motion: profile_motion(cfg.profile),
            depth: DepthProfile::FollowVelocity { initial_m: 30.0 },
            disturbance: None,
            dropouts: Vec::new(),
            max_speed: missbeam_core::sim::DEFAULT_MAX_SPEED,
            seed,
        },
        doppler,
        pitch_deg: cfg.pitch_deg,
        water_density: missbeam_core::pressure::SEAWATER_DENSITY,
        pressure_noise_kpa: 0.0,
        missions: cfg.missions,
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg: SimulateConfig = resolve(&SimulateConfig::default(), args.config.as_deref(), args)?;
    let seed = resolve_seed(cfg.seed)?;
    cfg.seed = Some(seed);
    let scenario = build_scenario(&cfg, seed)?;
    let records = run_scenario(&scenario)?;
    prepare_out(&cfg.out)?;
    let mut w = create(&cfg.out.join(DATASET_FILE))?;
    write_records(&mut w, &records)?;
    w.flush()?;
    write_json(&cfg.out.join(SCENARIO_FILE), &scenario)?;
    if scenario.missions >= 2 {
        let k = ((cfg.train_fraction * scenario.missions as f64).round() as usize).clamp(1, scenario.missions - 1);
        let manifest = SplitManifest {
            train: (0..k).map(synthetic_mission_id).collect(),
            test: (k..scenario.missions).map(synthetic_mission_id).collect(),
        };
        manifest.save(&cfg.out.join(SPLIT_FILE))?;
    }
    write_resolved(&cfg.out, &cfg)?;
    println!(
        "simulated {} epochs in {} mission(s) into {}",
        records.len(),
        scenario.missions,
        cfg.out.display()
    );
    Ok(())
}

// ------------------------------------------------------------------ ingest

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub input: Option<PathBuf>,
    pub format: String,
    pub mapping: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub train_fraction: f64,
    pub out: PathBuf,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: "canonical".into(),
            mapping: None,
            split: None,
            train_fraction: 0.7,
            out: default_out(),
        }
    }
}

#[derive(Debug, Serialize)]
struct MissionSummary {
    id: String,
    epochs: usize,
    segments: usize,
    duration_s: f64,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let cfg: IngestConfig = resolve(&IngestConfig::default(), args.config.as_deref(), args)?;
    let input = required(&cfg.input, "input")?;
    let mapping = cfg
        .mapping
        .as_deref()
        .map(ColumnMapping::from_json_file)
        .transpose()
        .context("loading column mapping")?;
    let format = Format::from_name(&cfg.format, mapping)?;
    let missions = load_missions(input, &format).with_context(|| format!("loading {}", input.display()))?;
    if missions.is_empty() {
        bail!("{} holds no complete epochs", input.display());
    }
    prepare_out(&cfg.out)?;
    write_missions(&cfg.out.join(DATASET_FILE), &missions)?;
    let manifest = match &cfg.split {
        Some(p) => {
            let m = SplitManifest::load(p).with_context(|| format!("loading split {}", p.display()))?;
            split_train_test(&missions, &m)?;
            Some(m)
        }
        None if missions.len() >= 2 => Some(SplitManifest::by_fraction(&missions, cfg.train_fraction)?),
        None => {
            eprintln!("note: a single mission was found, so no split manifest was written");
            None
        }
    };
    if let Some(m) = &manifest {
        m.save(&cfg.out.join(SPLIT_FILE))?;
    }
    let summary: Vec<MissionSummary> = missions
        .iter()
        .map(|m| MissionSummary {
            id: m.id.clone(),
            epochs: m.len(),
            segments: m.segments().len(),
            duration_s: m.duration_s(),
        })
        .collect();
    write_json(&cfg.out.join(INGEST_SUMMARY_FILE), &summary)?;
    write_resolved(&cfg.out, &cfg)?;
    let epochs: usize = missions.iter().map(Mission::len).sum();
    println!("ingested {epochs} complete epochs in {} mission(s)", missions.len());
    Ok(())
}

// ------------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub window: usize,
    pub hidden: usize,
    pub lstm_output: usize,
    pub fc: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub depth: bool,
    pub velocity: bool,
    pub normalize: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = ModelSpec::new(Architecture::LstmMultihead, BeamSet::ALL);
        Self {
            architecture: s.architecture,
            window: s.window_size,
            hidden: s.hidden_size,
            lstm_output: s.lstm_output_size,
            fc: s.fc_layer_sizes,
            learning_rate: s.learning_rate,
            epochs: s.epochs,
            batch: s.batch_size,
            depth: false,
            velocity: false,
            normalize: true,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self, missing: BeamSet) -> Result<ModelSpec> {
        let mut s = ModelSpec::new(self.architecture, missing);
        s.window_size = self.window;
        s.hidden_size = self.hidden;
        s.lstm_output_size = self.lstm_output;
        s.fc_layer_sizes = self.fc.clone();
        s.learning_rate = self.learning_rate;
        s.epochs = self.epochs;
        s.batch_size = self.batch;
        s.extras.depth = self.depth;
        s.extras.velocity = self.velocity;
        s.normalize = self.normalize;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub data: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub missing: String,
    #[serde(flatten)]
    pub model: ModelConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            data: None,
            split: None,
            missing: "1".into(),
            model: ModelConfig::default(),
            seed: None,
            out: default_out(),
        }
    }
}

fn epoch_logger(tag: String, total: usize) -> impl FnMut(usize, f64) {
    move |epoch, loss| eprintln!("[{tag}] epoch {}/{total} loss {loss:.6}", epoch + 1)
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = resolve(&TrainConfig::default(), args.config.as_deref(), args)?;
    let seed = resolve_seed(cfg.seed)?;
    cfg.seed = Some(seed);
    let combinations = parse_combinations(&cfg.missing)?;
    let specs: Vec<ModelSpec> = combinations.iter().map(|&c| cfg.model.spec(c)).collect::<Result<_>>()?;
    let data = required(&cfg.data, "data")?;
    let missions = side(load_canonical(data)?, cfg.split.as_deref(), true)?;
    let geom = BeamGeometry::default();
    prepare_out(&cfg.out)?;
    for spec in &specs {
        let tag = spec.missing.tag();
        let model = train_on_missions(spec, &missions, seed, &geom, &mut epoch_logger(tag.clone(), spec.epochs))
            .with_context(|| format!("training the model for beams {}", spec.missing))?;
        model.save(&cfg.out.join(model_file_name(spec.missing)))?;
        let mut loss = String::from("epoch,loss\n");
        for (e, l) in model.loss_history.iter().enumerate() {
            loss.push_str(&format!("{},{l}\n", e + 1));
        }
        write_text(&cfg.out.join(loss_file_name(spec.missing)), &loss)?;
        println!("trained {} for missing beams {}", spec.architecture.label(), spec.missing);
    }
    write_resolved(&cfg.out, &cfg)?;
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub data: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub methods: String,
    pub combinations: String,
    pub average_window: usize,
    pub speed_error: SpeedErrorKind,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            data: None,
            split: None,
            models: None,
            methods: "average,virtual,three_beam,missbeamnet".into(),
            combinations: "all".into(),
            average_window: missbeam_core::fillers::DEFAULT_AVERAGE_WINDOW,
            speed_error: SpeedErrorKind::VectorNorm,
            seed: None,
            out: default_out(),
        }
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut cfg: EvaluateConfig = resolve(&EvaluateConfig::default(), args.config.as_deref(), args)?;
    let seed = resolve_seed(cfg.seed)?;
    cfg.seed = Some(seed);
    let methods = Method::parse_list(&cfg.methods)?;
    let combinations = parse_combinations(&cfg.combinations)?;
    let (models, info) = if methods.iter().any(|m| m.needs_model()) {
        let dir = cfg
            .models
            .as_ref()
            .ok_or_else(|| anyhow!("`--models` is required when evaluating missbeamnet"))?;
        ModelSet::load_dir(dir, &combinations).with_context(|| format!("loading models from {}", dir.display()))?
    } else {
        (ModelSet::new(), Vec::new())
    };
    let data = required(&cfg.data, "data")?;
    let test = side(load_canonical(data)?, cfg.split.as_deref(), false)?;
    let eval_cfg = EvalConfig {
        average_window: cfg.average_window,
        speed_error: cfg.speed_error,
        min_window: 1,
    };
    let mut report = run_matrix(&test, &methods, &combinations, &models, &BeamGeometry::default(), &eval_cfg)?;
    report.metadata.dataset = data.display().to_string();
    report.metadata.seed = Some(seed);
    report.metadata.models = info;

    prepare_out(&cfg.out)?;
    let csv = report.to_csv_string()?;
    write_text(&cfg.out.join(REPORT_CSV), &csv)?;
    write_text(&cfg.out.join(REPORT_JSON), &report.to_json()?)?;
    let table = report.render_table();
    write_text(&cfg.out.join(REPORT_TXT), &table)?;
    write_resolved(&cfg.out, &cfg)?;
    if args.pretty {
        print!("{table}");
    } else {
        print!("{csv}");
    }
    Ok(())
}

// ------------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub data: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub train_fraction: f64,
    pub missing: String,
    pub min_window: usize,
    pub max_window: usize,
    pub draws: usize,
    #[serde(flatten)]
    pub model: ModelConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kind: SweepKind::Window,
            data: None,
            split: None,
            train_fraction: 0.7,
            missing: "1".into(),
            min_window: 3,
            max_window: 10,
            draws: missbeam_core::experiments::DEFAULT_SEARCH_DRAWS,
            model: ModelConfig::default(),
            seed: None,
            out: default_out(),
        }
    }
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg: SweepConfig = resolve(&SweepConfig::default(), args.config.as_deref(), args)?;
    let seed = resolve_seed(cfg.seed)?;
    cfg.seed = Some(seed);
    let combinations = parse_combinations(&cfg.missing)?;
    let [missing] = combinations[..] else {
        bail!("a sweep takes exactly one missing-beam set");
    };
    let base = cfg.model.spec(missing)?;
    if cfg.kind == SweepKind::Hyper {
        missbeam_core::experiments::draw_hyperparams(cfg.draws, seed)?;
    } else if cfg.min_window == 0 || cfg.min_window > cfg.max_window {
        bail!("window range {}..={} is empty or starts at zero", cfg.min_window, cfg.max_window);
    }
    let data = required(&cfg.data, "data")?;
    let (train, test) = split_missions(&load_canonical(data)?, cfg.split.as_deref(), cfg.train_fraction)?;
    let geom = BeamGeometry::default();
    prepare_out(&cfg.out)?;
    let epochs = base.epochs;
    match cfg.kind {
        SweepKind::Window => {
            let windows: Vec<usize> = (cfg.min_window..=cfg.max_window).collect();
            let result = window_sweep(&base, &windows, &train, &test, seed, &geom, &mut |n, e, l| {
                eprintln!("[window {n}] epoch {}/{epochs} loss {l:.6}", e + 1)
            })?;
            let mut w = create(&cfg.out.join(WINDOW_SWEEP_CSV))?;
            result.write_csv(&mut w)?;
            w.flush()?;
            write_json(&cfg.out.join(WINDOW_SWEEP_JSON), &result)?;
            write_text(&cfg.out.join(WINDOW_SWEEP_SVG), &result.to_svg())?;
            for p in &result.points {
                println!("window {:>2}  rmse {:.5}  speed {:.5}", p.window_size, p.beam_rmse, p.speed_error);
            }
            println!("best window: {}", result.best_window);
        }
        SweepKind::Hyper => {
            let result = hyperparameter_search(&base, cfg.draws, &train, &test, seed, &geom, &mut |k, e, l| {
                eprintln!("[draw {}] epoch {}/{epochs} loss {l:.6}", k + 1, e + 1)
            })?;
            let mut w = create(&cfg.out.join(HYPER_SEARCH_CSV))?;
            result.write_csv(&mut w)?;
            w.flush()?;
            write_json(&cfg.out.join(HYPER_SEARCH_JSON), &result)?;
            let best = &result.results[result.best];
            println!(
                "best of {} draws: lr {} hidden {} lstm_output {} (rmse {:.5})",
                result.results.len(),
                best.params.learning_rate,
                best.params.hidden_size,
                best.params.lstm_output_size,
                best.beam_rmse
            );
        }
    }
    write_resolved(&cfg.out, &cfg)?;
    Ok(())
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub report: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            report: None,
            sweep: None,
            out: default_out(),
        }
    }
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let cfg: ReportConfig = resolve(&ReportConfig::default(), args.config.as_deref(), args)?;
    if cfg.report.is_none() && cfg.sweep.is_none() {
        bail!("give `--report` and/or `--sweep`");
    }
    prepare_out(&cfg.out)?;
    if let Some(path) = &cfg.report {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let report = EvaluationReport::from_json(&text)?;
        let table = report.render_table();
        write_text(&cfg.out.join(REPORT_TXT), &table)?;
        print!("{table}");
    }
    if let Some(path) = &cfg.sweep {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let sweep: WindowSweep = serde_json::from_str(&text)?;
        write_text(&cfg.out.join(WINDOW_SWEEP_SVG), &sweep.to_svg())?;
        println!("wrote {}", cfg.out.join(WINDOW_SWEEP_SVG).display());
    }
    write_resolved(&cfg.out, &cfg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_syntax() {
        assert_eq!(parse_combinations("all").unwrap().len(), 14);
        assert_eq!(parse_combinations("one").unwrap().len(), 4);
        assert_eq!(parse_combinations("two").unwrap().len(), 6);
        assert_eq!(parse_combinations("three").unwrap().len(), 4);
        assert_eq!(
            parse_combinations("1,2").unwrap(),
            vec![BeamSet::from_beams(&[1, 2]).unwrap()]
        );
        assert_eq!(parse_combinations("1; 2;1").unwrap().len(), 2);
        assert!(parse_combinations("1,2,3,4").is_err());
        assert!(parse_combinations("5").is_err());
        assert!(parse_combinations("").is_err());
    }

    #[test]
    fn default_model_config_matches_default_spec() {
        let spec = ModelConfig::default().spec(BeamSet::single(1).unwrap()).unwrap();
        assert_eq!(spec, ModelSpec::new(Architecture::LstmMultihead, BeamSet::single(1).unwrap()));
    }
}
