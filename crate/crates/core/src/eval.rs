//! Metrics and the method-by-combination evaluation matrix.
//!
//! Every method is scored on the same epochs: for each test epoch with
//! enough complete history, the beams of the combination are masked, filled
//! by the method, and the completed vector is solved for velocity. The
//! reference velocity is the least-squares solution over all four measured
//! beams of that epoch.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beams::{BeamSet, BeamVector, Velocity3};
use crate::dataset::{make_windows, Mission, SampleWindow, WindowSpec};
use crate::error::{Error, Result};
use crate::fillers::{average_fill, virtual_beam_fill, FillerContext, DEFAULT_AVERAGE_WINDOW};
use crate::geometry::BeamGeometry;
use crate::models::{complete_and_estimate_with, model_file_name, BeamRegressor, ModelSpec, TrainedModel};

/// `√(Σ (actual − predicted)² / n)`.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Evaluation(format!(
            "rmse needs equal non-empty inputs, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok((sum / actual.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedErrorKind {
    /// RMSE of `‖v̂ − v‖`.
    #[default]
    VectorNorm,
    /// RMSE of `‖v̂‖ − ‖v‖`.
    Magnitude,
}

impl FromStr for SpeedErrorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector_norm" | "vector" => Ok(Self::VectorNorm),
            "magnitude" => Ok(Self::Magnitude),
            other => Err(Error::InvalidSpec(format!("unknown speed error kind `{other}`"))),
        }
    }
}

pub fn speed_error(truth: &[Velocity3], estimate: &[Velocity3]) -> Result<f64> {
    speed_error_with(truth, estimate, SpeedErrorKind::VectorNorm)
}

pub fn speed_error_with(truth: &[Velocity3], estimate: &[Velocity3], kind: SpeedErrorKind) -> Result<f64> {
    if truth.is_empty() || truth.len() != estimate.len() {
        return Err(Error::Evaluation(format!(
            "speed error needs equal non-empty inputs, got {} and {}",
            truth.len(),
            estimate.len()
        )));
    }
    let sum: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| match kind {
            SpeedErrorKind::VectorNorm => e.sub(*t).norm().powi(2),
            SpeedErrorKind::Magnitude => (e.norm() - t.norm()).powi(2),
        })
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// `100 · (baseline − ours) / baseline`.
pub fn improvement_pct(baseline: f64, ours: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Evaluation(format!("baseline {baseline} must be positive")));
    }
    Ok(100.0 * (baseline - ours) / baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Average,
    VirtualBeam,
    /// Least squares over the three available beams; single missing beams only.
    ThreeBeam,
    /// The trained regressor for the combination.
    MissBeamNet,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Average, Method::VirtualBeam, Method::ThreeBeam, Method::MissBeamNet];

    pub fn key(self) -> &'static str {
        match self {
            Method::Average => "average",
            Method::VirtualBeam => "virtual",
            Method::ThreeBeam => "three_beam",
            Method::MissBeamNet => "missbeamnet",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Average => "Average (baseline)",
            Method::VirtualBeam => "Virtual beam",
            Method::ThreeBeam => "Three beams",
            Method::MissBeamNet => "MissBeamNet",
        }
    }

    pub fn needs_model(self) -> bool {
        self == Method::MissBeamNet
    }

    /// Whether the method produces beam values (and hence a beam RMSE).
    pub fn fills_beams(self) -> bool {
        self != Method::ThreeBeam
    }

    pub fn applies_to(self, missing: BeamSet) -> bool {
        self != Method::ThreeBeam || missing.len() == 1
    }

    /// Comma-separated keys, e.g. `average,virtual`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidSpec("no methods given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Method::Average),
            "virtual" | "virtual_beam" => Ok(Method::VirtualBeam),
            "three_beam" | "three" => Ok(Method::ThreeBeam),
            "missbeamnet" | "model" => Ok(Method::MissBeamNet),
            other => Err(Error::InvalidSpec(format!("unknown method `{other}`"))),
        }
    }
}

/// Trained regressors keyed by missing-beam set.
#[derive(Default)]
pub struct ModelSet {
    models: Vec<(BeamSet, Box<dyn BeamRegressor>)>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: Box<dyn BeamRegressor>) {
        let key = model.missing();
        self.models.retain(|(k, _)| *k != key);
        self.models.push((key, model));
    }

    pub fn get(&self, missing: BeamSet) -> Option<&dyn BeamRegressor> {
        self.models.iter().find(|(k, _)| *k == missing).map(|(_, m)| m.as_ref())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Loads `model_<tag>.json` for each combination from `dir`.
    pub fn load_dir(dir: &Path, combinations: &[BeamSet]) -> Result<(Self, Vec<ModelInfo>)> {
        let mut set = Self::new();
        let mut info = Vec::new();
        for &c in combinations {
            let path = dir.join(model_file_name(c));
            if !path.exists() {
                return Err(Error::MissingModel(c));
            }
            let model = TrainedModel::load(&path)?;
            if model.spec.missing != c {
                return Err(Error::WindowMismatch(format!(
                    "{} holds a model for {}",
                    path.display(),
                    model.spec.missing
                )));
            }
            info.push(ModelInfo {
                missing: c,
                seed: model.seed,
                spec: model.spec.clone(),
            });
            set.insert(Box::new(model));
        }
        Ok((set, info))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub missing: BeamSet,
    pub seed: u64,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub average_window: usize,
    pub speed_error: SpeedErrorKind,
    /// Lower bound on the number of past epochs each scored epoch needs.
    pub min_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            average_window: DEFAULT_AVERAGE_WINDOW,
            speed_error: SpeedErrorKind::VectorNorm,
            min_window: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    /// Pooled RMSE over all missing-beam values, m/s.
    pub beam_rmse: Option<f64>,
    pub speed_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub missing: BeamSet,
    pub samples: usize,
    pub cells: Vec<Cell>,
}

impl CombinationResult {
    pub fn cell(&self, method: Method) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method)
    }

    /// Speed-error improvement of MissBeamNet over `baseline`, when both ran
    /// and the baseline error is positive.
    pub fn improvement_over(&self, baseline: Method) -> Option<f64> {
        let ours = self.cell(Method::MissBeamNet)?.speed_error;
        let base = self.cell(baseline)?.speed_error;
        improvement_pct(base, ours).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: String,
    pub seed: Option<u64>,
    pub methods: Vec<Method>,
    /// Past epochs required of every scored epoch.
    pub eval_window: usize,
    pub config: EvalConfig,
    pub models: Vec<ModelInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<CombinationResult>,
}

/// Fixed column order of the report CSV.
pub const REPORT_COLUMNS: [&str; 13] = [
    "missing",
    "samples",
    "average_rmse",
    "virtual_rmse",
    "missbeamnet_rmse",
    "average_speed",
    "virtual_speed",
    "three_beam_speed",
    "missbeamnet_speed",
    "improvement_vs_average_pct",
    "improvement_vs_virtual_pct",
    "improvement_vs_three_beam_pct",
    "model_window",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvaluationReport {
    pub fn row(&self, missing: BeamSet) -> Option<&CombinationResult> {
        self.rows.iter().find(|r| r.missing == missing)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            let rmse = |m| r.cell(m).and_then(|c| c.beam_rmse);
            let speed = |m| r.cell(m).map(|c| c.speed_error);
            let window = self
                .metadata
                .models
                .iter()
                .find(|i| i.missing == r.missing)
                .map(|i| i.spec.window_size.to_string())
                .unwrap_or_default();
            w.write_record([
                r.missing.tag(),
                r.samples.to_string(),
                opt(rmse(Method::Average)),
                opt(rmse(Method::VirtualBeam)),
                opt(rmse(Method::MissBeamNet)),
                opt(speed(Method::Average)),
                opt(speed(Method::VirtualBeam)),
                opt(speed(Method::ThreeBeam)),
                opt(speed(Method::MissBeamNet)),
                opt(r.improvement_over(Method::Average)),
                opt(r.improvement_over(Method::VirtualBeam)),
                opt(r.improvement_over(Method::ThreeBeam)),
                window,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One table per number of missing beams, laid out with a row per
    /// case/approach and a column per combination plus the average.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        for k in 1..=3 {
            let rows: Vec<&CombinationResult> = self.rows.iter().filter(|r| r.missing.len() == k).collect();
            if rows.is_empty() {
                continue;
            }
            let title = match k {
                1 => "One missing beam",
                2 => "Two missing beams",
                _ => "Three missing beams",
            };
            let _ = writeln!(out, "{title} ({} scored epochs per combination)", rows[0].samples);
            let mut header = vec!["Case".to_string(), "Approach".to_string()];
            header.extend(rows.iter().map(|r| format!("Beams {}", r.missing.tag())));
            header.push("Avg.".into());
            let mut lines: Vec<Vec<String>> = Vec::new();

            let mut section = |case: &str, entries: Vec<(String, Vec<Option<f64>>)>, digits: usize| {
                let mut first = true;
                for (label, values) in entries {
                    if values.iter().all(Option::is_none) {
                        continue;
                    }
                    let present: Vec<f64> = values.iter().flatten().copied().collect();
                    let avg = (present.len() == values.len()).then(|| present.iter().sum::<f64>() / present.len() as f64);
                    let mut line = vec![if first { case.to_string() } else { String::new() }, label];
                    line.extend(values.iter().chain([&avg]).map(|v| match v {
                        Some(x) => format!("{x:.digits$}"),
                        None => "-".into(),
                    }));
                    lines.push(line);
                    first = false;
                }
            };
            let methods = &self.metadata.methods;
            section(
                "Missing beam [m/s]",
                methods
                    .iter()
                    .filter(|m| m.fills_beams())
                    .map(|&m| (m.label().to_string(), rows.iter().map(|r| r.cell(m).and_then(|c| c.beam_rmse)).collect()))
                    .collect(),
                3,
            );
            section(
                "Speed error [m/s]",
                methods
                    .iter()
                    .map(|&m| (m.label().to_string(), rows.iter().map(|r| r.cell(m).map(|c| c.speed_error)).collect()))
                    .collect(),
                3,
            );
            if methods.contains(&Method::MissBeamNet) {
                section(
                    "MissBeamNet improvement %",
                    methods
                        .iter()
                        .filter(|m| !m.needs_model())
                        .map(|&m| (m.label().to_string(), rows.iter().map(|r| r.improvement_over(m)).collect()))
                        .collect(),
                    1,
                );
            }
            let widths: Vec<usize> = (0..header.len())
                .map(|c| lines.iter().map(|l| l[c].len()).chain([header[c].len()]).max().unwrap_or(0))
                .collect();
            let fmt_line = |cells: &[String]| -> String {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join(" | ")
                    .trim_end()
                    .to_string()
            };
            let _ = writeln!(out, "{}", fmt_line(&header));
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
            for l in &lines {
                let _ = writeln!(out, "{}", fmt_line(l));
            }
            out.push('\n');
        }
        out
    }
}

/// Windows of `size` past epochs for one combination across the test
/// missions; missions that are too short are skipped.
pub fn evaluation_windows(
    missions: &[Mission],
    missing: BeamSet,
    size: usize,
    geom: &BeamGeometry,
) -> Result<Vec<SampleWindow>> {
    let spec = WindowSpec {
        window_size: size,
        missing,
    };
    let mut out = Vec::new();
    for m in missions.iter().filter(|m| m.len() > size) {
        out.extend(make_windows(m, &spec, geom)?);
    }
    Ok(out)
}

/// Fills the missing beams of `window` with `method` and returns the beam
/// estimate (when the method makes one) and the velocity estimate.
pub fn apply_method(
    method: Method,
    window: &SampleWindow,
    geom: &BeamGeometry,
    average_window: usize,
    model: Option<&dyn BeamRegressor>,
) -> Result<(Option<BeamVector>, Velocity3)> {
    let missing = window.missing;
    let filled = match method {
        Method::Average => average_fill(
            &FillerContext {
                history: &window.past,
                window: average_window,
                last_velocity: Some(window.last_velocity()),
            },
            missing,
        )?,
        Method::VirtualBeam => virtual_beam_fill(geom, window.last_velocity(), missing),
        Method::ThreeBeam => return Ok((None, geom.ls_velocity(&window.current_available)?)),
        Method::MissBeamNet => model.ok_or(Error::MissingModel(missing))?.regress(window)?,
    };
    let v = complete_and_estimate_with(geom, window, &filled)?;
    Ok((Some(filled), v))
}

/// Scores every requested method on every combination.
pub fn run_matrix(
    test: &[Mission],
    methods: &[Method],
    combinations: &[BeamSet],
    models: &ModelSet,
    geom: &BeamGeometry,
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    if methods.is_empty() || combinations.is_empty() {
        return Err(Error::Evaluation("nothing to evaluate".into()));
    }
    let mut eval_window = config.min_window.max(1);
    if methods.contains(&Method::Average) {
        eval_window = eval_window.max(config.average_window);
    }
    if methods.contains(&Method::MissBeamNet) {
        for &c in combinations {
            let m = models.get(c).ok_or(Error::MissingModel(c))?;
            eval_window = eval_window.max(m.window_size());
        }
    }
    let mut rows = Vec::with_capacity(combinations.len());
    for &missing in combinations {
        if missing.is_empty() || missing.is_full() {
            return Err(Error::InvalidSpec(format!("cannot evaluate missing set {missing}")));
        }
        let windows = evaluation_windows(test, missing, eval_window, geom)?;
        if windows.is_empty() {
            return Err(Error::Evaluation(format!(
                "no test epoch has {eval_window} epochs of history"
            )));
        }
        let reference: Vec<Velocity3> = windows
            .iter()
            .map(|w| geom.ls_velocity(&w.current_full()))
            .collect::<Result<_>>()?;
        let truth_beams: Vec<f64> = windows.iter().flat_map(|w| w.target.iter().copied()).collect();
        let mut cells = Vec::new();
        for &method in methods.iter().filter(|m| m.applies_to(missing)) {
            let model = if method.needs_model() { models.get(missing) } else { None };
            let mut beams = Vec::with_capacity(truth_beams.len());
            let mut velocities = Vec::with_capacity(windows.len());
            for w in &windows {
                let (filled, v) = apply_method(method, w, geom, config.average_window, model)?;
                if let Some(f) = filled {
                    beams.extend(f.ordered());
                }
                velocities.push(v);
            }
            cells.push(Cell {
                method,
                beam_rmse: if method.fills_beams() { Some(rmse(&truth_beams, &beams)?) } else { None },
                speed_error: speed_error_with(&reference, &velocities, config.speed_error)?,
            });
        }
        rows.push(CombinationResult {
            missing,
            samples: windows.len(),
            cells,
        });
    }
    Ok(EvaluationReport {
        metadata: ReportMetadata {
            dataset: String::new(),
            seed: None,
            methods: methods.to_vec(),
            eval_window,
            config: config.clone(),
            models: Vec::new(),
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert!((rmse(&[0.0; 3], &[1.0, 2.0, 2.0]).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&[0.0; 3], &[1.0, 2.0, 2.0]).unwrap() - 1.7321).abs() < 5e-5);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn speed_error_examples() {
        let v: Vec<Velocity3> = (0..4).map(|k| Velocity3::new(k as f64, 1.0, 0.0)).collect();
        assert_eq!(speed_error(&v, &v).unwrap(), 0.0);
        let shifted: Vec<Velocity3> = v.iter().map(|x| Velocity3::new(x.vx + 0.1, x.vy, x.vz)).collect();
        assert!((speed_error(&v, &shifted).unwrap() - 0.1).abs() < 1e-12);
        let zero = vec![Velocity3::ZERO; 2];
        let alt = vec![Velocity3::new(0.3, 0.0, 0.0), Velocity3::new(0.0, 0.4, 0.0)];
        assert!((speed_error(&zero, &alt).unwrap() - 0.125f64.sqrt()).abs() < 1e-12);
        assert!((speed_error(&zero, &alt).unwrap() - 0.3536).abs() < 5e-5);
        assert!(speed_error(&zero, &alt[..1]).is_err());
        // A pure rotation of the estimate leaves the magnitude unchanged.
        let turned = vec![Velocity3::new(0.0, 1.0, 0.0)];
        let truth = vec![Velocity3::new(1.0, 0.0, 0.0)];
        assert_eq!(speed_error_with(&truth, &turned, SpeedErrorKind::Magnitude).unwrap(), 0.0);
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_pct(0.106, 0.053).unwrap() - 50.0).abs() < 1e-9);
        assert_eq!(improvement_pct(0.2, 0.2).unwrap(), 0.0);
        assert_eq!(improvement_pct(0.2, 0.0).unwrap(), 100.0);
        assert!(improvement_pct(0.0, 0.1).is_err());
        assert!(improvement_pct(-1.0, 0.1).is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(
            Method::parse_list("average,virtual").unwrap(),
            vec![Method::Average, Method::VirtualBeam]
        );
        assert!(Method::parse_list("average,kalman").is_err());
        assert!(Method::parse_list("").is_err());
        for m in Method::ALL {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
        }
    }
}
