//! Mission loading, invalid-epoch filtering, mission-level train/test splits
//! and sliding-window extraction.
//!
//! The canonical CSV has the header
//! `time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id`. `valid` is `1`
//! (all beams valid), `0` (none) or a four-character mask such as `1011`
//! listing beams 1..4. `depth_m` and the velocity columns may be empty.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beams::{BeamSet, BeamVector, Velocity3, NUM_BEAMS};
use crate::error::{Error, Result};
use crate::geometry::BeamGeometry;
use crate::pressure::{depth_from_pressure, SEAWATER_DENSITY};
use crate::sample::BeamSample;

pub const CANONICAL_HEADER: [&str; 11] = [
    "time_s", "b1", "b2", "b3", "b4", "valid", "depth_m", "vx", "vy", "vz", "mission_id",
];

/// Time steps longer than this many seconds break a mission into segments.
pub const DEFAULT_MAX_STEP_S: f64 = 1.5;

/// Beam magnitudes above this are treated as instrument sentinels.
pub const DEFAULT_INVALID_ABS_BEAM: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub id: String,
    pub source: String,
    pub samples: Vec<BeamSample>,
    /// Indices `i` where a discontinuity lies between sample `i - 1` and `i`.
    pub gaps: Vec<usize>,
}

impl Mission {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Maximal runs of samples without a discontinuity.
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for &g in &self.gaps {
            if g > start && g <= self.samples.len() {
                out.push(start..g);
                start = g;
            }
        }
        if start < self.samples.len() {
            out.push(start..self.samples.len());
        }
        out
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time_s - a.time_s,
            _ => 0.0,
        }
    }
}

/// A sample together with its mission id, the unit of canonical CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub mission_id: String,
    pub sample: BeamSample,
    /// Source line, 0 when not read from a file.
    pub line: u64,
}

/// How to read input recordings.
#[derive(Debug, Clone, PartialEq)]
pub enum Format {
    Canonical,
    Columns(ColumnMapping),
}

impl Format {
    /// `canonical`, or `columns` together with a mapping document.
    pub fn from_name(name: &str, mapping: Option<ColumnMapping>) -> Result<Self> {
        match (name, mapping) {
            ("canonical", _) => Ok(Format::Canonical),
            ("columns", Some(m)) => Ok(Format::Columns(m)),
            ("columns", None) => Err(Error::InvalidSpec(
                "format `columns` needs a column mapping".into(),
            )),
            (other, _) => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Adapter for delimited recordings with arbitrary column names, such as a
/// published DVL dataset. A row is invalid when its validity column reads
/// `0`/`false`, when any beam is empty or non-finite, or when any beam
/// magnitude exceeds `invalid_abs_beam` after scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub time: String,
    pub beams: [String; NUM_BEAMS],
    #[serde(default)]
    pub valid: Option<String>,
    #[serde(default)]
    pub depth: Option<String>,
    /// Used for depth when `depth` is absent.
    #[serde(default)]
    pub pressure_kpa: Option<String>,
    #[serde(default = "default_density")]
    pub water_density: f64,
    #[serde(default)]
    pub velocity: Option<[String; 3]>,
    /// Mission id column; without it every file is one mission named after
    /// the file stem.
    #[serde(default)]
    pub mission: Option<String>,
    /// Multiplier taking beam (and velocity) values to m/s.
    #[serde(default = "default_scale")]
    pub beam_scale: f64,
    #[serde(default = "default_invalid_abs")]
    pub invalid_abs_beam: f64,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_density() -> f64 {
    SEAWATER_DENSITY
}
fn default_scale() -> f64 {
    1.0
}
fn default_invalid_abs() -> f64 {
    DEFAULT_INVALID_ABS_BEAM
}
fn default_delimiter() -> char {
    ','
}

impl ColumnMapping {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Loads missions from a file or from every `.csv`/`.txt` file in a
/// directory (sorted by name).
pub fn load_missions(path: &Path, format: &Format) -> Result<Vec<Mission>> {
    let files = input_files(path)?;
    let mut records = Vec::new();
    let mut source = String::new();
    for f in &files {
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let reader = File::open(f)?;
        match format {
            Format::Canonical => {
                source = "canonical".into();
                records.extend(read_canonical(reader)?);
            }
            Format::Columns(m) => {
                source = "columns".into();
                records.extend(read_columns(reader, m, &stem)?);
            }
        }
    }
    assemble_missions(records, &source, DEFAULT_MAX_STEP_S)
}

fn input_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("csv") | Some("txt")
                    )
            })
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Malformed {
        line,
        message: format!("column `{column}`: cannot parse `{field}` as a number"),
    })
}

fn parse_opt_f64(field: &str, line: u64, column: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line, column).map(Some)
    }
}

fn parse_validity(field: &str, line: u64) -> Result<BeamSet> {
    match field.trim() {
        "1" | "true" | "True" => Ok(BeamSet::ALL),
        "0" | "false" | "False" => Ok(BeamSet::EMPTY),
        mask if mask.len() == NUM_BEAMS && mask.chars().all(|c| c == '0' || c == '1') => {
            let bits: Vec<bool> = mask.chars().map(|c| c == '1').collect();
            Ok(BeamSet::from_mask([bits[0], bits[1], bits[2], bits[3]]))
        }
        other => Err(Error::Malformed {
            line,
            message: format!("column `valid`: unrecognised validity `{other}`"),
        }),
    }
}

fn format_validity(valid: BeamSet) -> String {
    if valid.is_full() {
        "1".into()
    } else if valid.is_empty() {
        "0".into()
    } else {
        (1..=NUM_BEAMS)
            .map(|b| if valid.contains(b) { '1' } else { '0' })
            .collect()
    }
}

/// Parses canonical CSV rows.
pub fn read_canonical<R: Read>(reader: R) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or(Error::Malformed {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let idx: Vec<usize> = CANONICAL_HEADER
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let time_s = parse_f64(field(0), line, "time_s")?;
        let mut beams = [0.0; NUM_BEAMS];
        for b in 0..NUM_BEAMS {
            beams[b] = parse_opt_f64(field(1 + b), line, CANONICAL_HEADER[1 + b])?.unwrap_or(f64::NAN);
        }
        let valid = parse_validity(field(5), line)?;
        let depth_m = parse_opt_f64(field(6), line, "depth_m")?;
        let v: Vec<Option<f64>> = (7..10)
            .map(|k| parse_opt_f64(field(k), line, CANONICAL_HEADER[k]))
            .collect::<Result<_>>()?;
        let velocity = match (v[0], v[1], v[2]) {
            (Some(x), Some(y), Some(z)) => Some(Velocity3::new(x, y, z)),
            (None, None, None) => None,
            _ => {
                return Err(Error::Malformed {
                    line,
                    message: "velocity columns must be all present or all empty".into(),
                })
            }
        };
        let mission_id = field(10).to_string();
        if mission_id.is_empty() {
            return Err(Error::Malformed {
                line,
                message: "empty mission_id".into(),
            });
        }
        if !time_s.is_finite() {
            return Err(Error::Malformed {
                line,
                message: "non-finite time".into(),
            });
        }
        out.push(Record {
            mission_id,
            sample: BeamSample {
                time_s,
                beams,
                valid,
                depth_m,
                velocity,
            },
            line,
        });
    }
    Ok(out)
}

fn read_columns<R: Read>(reader: R, m: &ColumnMapping, file_stem: &str) -> Result<Vec<Record>> {
    let delimiter = u8::try_from(m.delimiter)
        .map_err(|_| Error::InvalidSpec(format!("delimiter `{}` is not ASCII", m.delimiter)))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or(Error::Malformed {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let t_idx = col(&m.time)?;
    let b_idx: Vec<usize> = m.beams.iter().map(|b| col(b)).collect::<Result<_>>()?;
    let valid_idx = m.valid.as_deref().map(col).transpose()?;
    let depth_idx = m.depth.as_deref().map(col).transpose()?;
    let pressure_idx = m.pressure_kpa.as_deref().map(col).transpose()?;
    let vel_idx = m
        .velocity
        .as_ref()
        .map(|v| v.iter().map(|c| col(c)).collect::<Result<Vec<_>>>())
        .transpose()?;
    let mission_idx = m.mission.as_deref().map(col).transpose()?;

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |k: usize| rec.get(k).unwrap_or("");
        let time_s = parse_f64(get(t_idx), line, &m.time)?;
        let mut beams = [f64::NAN; NUM_BEAMS];
        let mut valid = BeamSet::ALL;
        for (b, &k) in b_idx.iter().enumerate() {
            let raw = get(k).trim();
            let value = if raw.is_empty() {
                None
            } else {
                raw.parse::<f64>().ok()
            };
            match value.map(|v| v * m.beam_scale) {
                Some(v) if v.is_finite() && v.abs() <= m.invalid_abs_beam => beams[b] = v,
                _ => valid = BeamSet::EMPTY,
            }
        }
        if let Some(k) = valid_idx {
            let flag = get(k).trim();
            let on = !matches!(flag, "0" | "false" | "False" | "FALSE" | "");
            if !on {
                valid = BeamSet::EMPTY;
            }
        }
        let depth_m = match (depth_idx, pressure_idx) {
            (Some(k), _) => parse_opt_f64(get(k), line, "depth")?,
            (None, Some(k)) => parse_opt_f64(get(k), line, "pressure")?
                .map(|p| depth_from_pressure(p, m.water_density)),
            (None, None) => None,
        };
        let velocity = match &vel_idx {
            Some(v) => {
                let comps: Vec<Option<f64>> = v
                    .iter()
                    .map(|&k| parse_opt_f64(get(k), line, "velocity"))
                    .collect::<Result<_>>()?;
                match (comps[0], comps[1], comps[2]) {
                    (Some(x), Some(y), Some(z)) => Some(Velocity3::new(
                        x * m.beam_scale,
                        y * m.beam_scale,
                        z * m.beam_scale,
                    )),
                    _ => None,
                }
            }
            None => None,
        };
        let mission_id = match mission_idx {
            Some(k) => get(k).trim().to_string(),
            None => file_stem.to_string(),
        };
        out.push(Record {
            mission_id,
            sample: BeamSample {
                time_s,
                beams,
                valid,
                depth_m,
                velocity,
            },
            line,
        });
    }
    Ok(out)
}

/// Groups records into missions (in order of first appearance), drops
/// incomplete epochs and records the resulting gaps.
pub fn assemble_missions(records: Vec<Record>, source: &str, max_step_s: f64) -> Result<Vec<Mission>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<(u64, BeamSample)>> = HashMap::new();
    for r in records {
        if !by_id.contains_key(&r.mission_id) {
            order.push(r.mission_id.clone());
        }
        by_id.entry(r.mission_id).or_default().push((r.line, r.sample));
    }
    let mut missions = Vec::with_capacity(order.len());
    for id in order {
        let raw = by_id.remove(&id).unwrap_or_default();
        let mut samples: Vec<BeamSample> = Vec::with_capacity(raw.len());
        let mut gaps = Vec::new();
        let mut pending_gap = false;
        let mut last_time: Option<f64> = None;
        for (line, s) in raw {
            if let Some(t) = last_time {
                if s.time_s <= t {
                    return Err(Error::Malformed {
                        line,
                        message: format!(
                            "mission `{id}`: timestamps not strictly increasing ({} after {t})",
                            s.time_s
                        ),
                    });
                }
            }
            last_time = Some(s.time_s);
            if !s.is_complete() {
                pending_gap = true;
                continue;
            }
            if let Some(prev) = samples.last() {
                if pending_gap || s.time_s - prev.time_s > max_step_s {
                    gaps.push(samples.len());
                }
            }
            pending_gap = false;
            samples.push(s);
        }
        if !samples.is_empty() {
            missions.push(Mission {
                id,
                source: source.to_string(),
                samples,
                gaps,
            });
        }
    }
    Ok(missions)
}

/// Writes canonical CSV rows.
pub fn write_records<W: Write>(writer: W, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CANONICAL_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let s = &r.sample;
        let v = s.velocity;
        w.write_record([
            s.time_s.to_string(),
            s.beams[0].to_string(),
            s.beams[1].to_string(),
            s.beams[2].to_string(),
            s.beams[3].to_string(),
            format_validity(s.valid),
            opt(s.depth_m),
            opt(v.map(|v| v.vx)),
            opt(v.map(|v| v.vy)),
            opt(v.map(|v| v.vz)),
            r.mission_id.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn missions_to_records(missions: &[Mission]) -> Vec<Record> {
    missions
        .iter()
        .flat_map(|m| {
            m.samples.iter().map(|s| Record {
                mission_id: m.id.clone(),
                sample: s.clone(),
                line: 0,
            })
        })
        .collect()
}

pub fn write_missions(path: &Path, missions: &[Mission]) -> Result<()> {
    write_records(File::create(path)?, &missions_to_records(missions))
}

/// Mission ids assigned to each side of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    /// The first `round(fraction · count)` missions (at least one, leaving at
    /// least one) go to training, the rest to test.
    pub fn by_fraction(missions: &[Mission], fraction: f64) -> Result<Self> {
        if missions.len() < 2 {
            return Err(Error::Split(format!(
                "{} mission(s) cannot fill both sides of a split",
                missions.len()
            )));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Split(format!("train fraction {fraction} outside [0, 1]")));
        }
        let k = ((fraction * missions.len() as f64).round() as usize).clamp(1, missions.len() - 1);
        Ok(Self {
            train: missions[..k].iter().map(|m| m.id.clone()).collect(),
            test: missions[k..].iter().map(|m| m.id.clone()).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Splits missions at mission granularity according to `manifest`.
pub fn split_train_test(
    missions: &[Mission],
    manifest: &SplitManifest,
) -> Result<(Vec<Mission>, Vec<Mission>)> {
    for id in &manifest.train {
        if manifest.test.contains(id) {
            return Err(Error::Split(format!("mission `{id}` assigned to both sides")));
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for m in missions {
        if manifest.train.contains(&m.id) {
            train.push(m.clone());
        } else if manifest.test.contains(&m.id) {
            test.push(m.clone());
        } else {
            return Err(Error::Split(format!("mission `{}` is not assigned", m.id)));
        }
    }
    for id in manifest.train.iter().chain(&manifest.test) {
        if !missions.iter().any(|m| &m.id == id) {
            return Err(Error::Split(format!("manifest names unknown mission `{id}`")));
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split("both sides of the split must be non-empty".into()));
    }
    Ok((train, test))
}

/// Optional per-step input channels beyond the four beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtraInputs {
    pub depth: bool,
    pub velocity: bool,
}

impl ExtraInputs {
    pub fn channels(self) -> usize {
        NUM_BEAMS + usize::from(self.depth) + if self.velocity { 3 } else { 0 }
    }
}

/// Parameters that determine how windows are cut from a mission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub window_size: usize,
    pub missing: BeamSet,
}

/// `n` complete past epochs plus the current epoch with the missing beams
/// masked out.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub mission_id: String,
    /// Index of the current epoch within its mission.
    pub index: usize,
    pub past: Vec<BeamSample>,
    /// Least-squares velocity of each past epoch from all four beams.
    pub past_velocity: Vec<Velocity3>,
    pub current_available: BeamVector,
    /// True values of the missing beams, ascending beam order.
    pub target: Vec<f64>,
    pub missing: BeamSet,
}

impl SampleWindow {
    pub fn window_size(&self) -> usize {
        self.past.len()
    }

    /// The complete current beam vector (available plus target).
    pub fn current_full(&self) -> BeamVector {
        let target = BeamVector::from_ordered(self.missing, &self.target).expect("target matches mask");
        self.current_available.merge(&target).expect("disjoint sets")
    }

    pub fn target_vector(&self) -> BeamVector {
        BeamVector::from_ordered(self.missing, &self.target).expect("target matches mask")
    }

    /// The same window restricted to its last `k` past epochs.
    pub fn tail(&self, k: usize) -> Result<SampleWindow> {
        if k == 0 || k > self.past.len() {
            return Err(Error::WindowMismatch(format!(
                "cannot take {k} past epochs from a window of {}",
                self.past.len()
            )));
        }
        let skip = self.past.len() - k;
        Ok(SampleWindow {
            past: self.past[skip..].to_vec(),
            past_velocity: self.past_velocity[skip..].to_vec(),
            ..self.clone()
        })
    }

    /// Previous epoch's full-beam velocity.
    pub fn last_velocity(&self) -> Velocity3 {
        *self.past_velocity.last().expect("windows are non-empty")
    }
}

fn check_window_spec(spec: &WindowSpec) -> Result<()> {
    if spec.window_size == 0 {
        return Err(Error::InvalidSpec("window size must be at least 1".into()));
    }
    if spec.missing.is_empty() || spec.missing.is_full() {
        return Err(Error::InvalidSpec(format!(
            "missing set {} must hold 1 to 3 beams",
            spec.missing
        )));
    }
    Ok(())
}

/// One window per epoch `t >= n` inside each contiguous segment.
pub fn make_windows(mission: &Mission, spec: &WindowSpec, geom: &BeamGeometry) -> Result<Vec<SampleWindow>> {
    check_window_spec(spec)?;
    let n = spec.window_size;
    if mission.len() < n + 1 {
        return Err(Error::MissionTooShort {
            id: mission.id.clone(),
            len: mission.len(),
            window: n,
        });
    }
    let velocities: Vec<Velocity3> = mission
        .samples
        .iter()
        .map(|s| geom.ls_velocity(&s.beam_vector()))
        .collect::<Result<_>>()?;
    let available = spec.missing.complement();
    let mut out = Vec::new();
    for seg in mission.segments() {
        for t in seg.start + n..seg.end {
            let current = &mission.samples[t];
            out.push(SampleWindow {
                mission_id: mission.id.clone(),
                index: t,
                past: mission.samples[t - n..t].to_vec(),
                past_velocity: velocities[t - n..t].to_vec(),
                current_available: BeamVector::new(available, current.beams),
                target: spec.missing.iter().map(|b| current.beams[b - 1]).collect(),
                missing: spec.missing,
            });
        }
    }
    Ok(out)
}

/// Windows from every mission long enough for the window spec; shorter missions
/// are skipped. Fails if nothing remains.
pub fn windows_for_missions(
    missions: &[Mission],
    spec: &WindowSpec,
    geom: &BeamGeometry,
) -> Result<Vec<SampleWindow>> {
    check_window_spec(spec)?;
    let mut out = Vec::new();
    for m in missions.iter().filter(|m| m.len() > spec.window_size) {
        out.extend(make_windows(m, spec, geom)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "no windows of size {} could be formed",
            spec.window_size
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "\
time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id
0,0.1,0.2,0.3,0.2,1,10,,,,a
1,0.1,0.2,0.3,0.2,1,10.5,,,,a
2,0.1,0.2,0.3,0.2,1011,11,,,,a
3,0.1,0.2,0.3,0.2,1,11.5,,,,a
4,0.1,0.2,0.3,0.2,1,12,,,,a
7,0.1,0.2,0.3,0.2,1,12,,,,a
0,1,1,1,1,1,,1,2,3,b
";

    fn missions() -> Vec<Mission> {
        assemble_missions(read_canonical(CSV.as_bytes()).unwrap(), "canonical", DEFAULT_MAX_STEP_S).unwrap()
    }

    #[test]
    fn groups_filters_and_marks_gaps() {
        let m = missions();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].id, "a");
        assert_eq!(m[0].len(), 5);
        assert!(m[0].samples.iter().all(|s| s.is_complete()));
        // Dropped epoch at t = 2 and the 3 s step before t = 7.
        assert_eq!(m[0].gaps, vec![2, 4]);
        assert_eq!(m[0].segments(), vec![0..2, 2..4, 4..5]);
        assert_eq!(m[1].samples[0].velocity, Some(Velocity3::new(1.0, 2.0, 3.0)));
        assert_eq!(m[1].samples[0].depth_m, None);
    }

    #[test]
    fn validity_masks() {
        assert_eq!(parse_validity("1011", 2).unwrap(), BeamSet::from_beams(&[1, 3, 4]).unwrap());
        assert_eq!(parse_validity("0", 2).unwrap(), BeamSet::EMPTY);
        assert!(matches!(parse_validity("12", 7), Err(Error::Malformed { line: 7, .. })));
        for set in crate::beams::enumerate_combinations() {
            assert_eq!(parse_validity(&format_validity(set), 1).unwrap(), set);
        }
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let bad = "time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id\n0,1,1,1,1,1,,,,,a\n1,x,1,1,1,1,,,,,a\n";
        assert!(matches!(read_canonical(bad.as_bytes()), Err(Error::Malformed { line: 3, .. })));
        let back = "time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id\n1,1,1,1,1,1,,,,,a\n1,1,1,1,1,1,,,,,a\n";
        let recs = read_canonical(back.as_bytes()).unwrap();
        assert!(matches!(assemble_missions(recs, "", 1.5), Err(Error::Malformed { line: 3, .. })));
        let missing = "time_s,b1\n0,1\n";
        assert!(matches!(read_canonical(missing.as_bytes()), Err(Error::Malformed { line: 1, .. })));
    }

    #[test]
    fn canonical_round_trip_is_exact() {
        let mut m = missions();
        m[0].samples[0].beams[0] = 0.1 + 0.2;
        let mut buf = Vec::new();
        write_records(&mut buf, &missions_to_records(&m)).unwrap();
        let back = assemble_missions(read_canonical(buf.as_slice()).unwrap(), "canonical", DEFAULT_MAX_STEP_S).unwrap();
        assert_eq!(back.len(), m.len());
        for (a, b) in back.iter().zip(&m) {
            assert_eq!(a.samples, b.samples);
        }
    }

    #[test]
    fn column_mapping_with_pressure_and_sentinels() {
        let text = "t;v1;v2;v3;v4;ok;p\n0;100;200;300;200;1;1106.825\n1;100;32768;300;200;1;101.3\n2;100;200;300;200;0;101.3\n3;100;200;300;200;1;101.3\n";
        let mapping: ColumnMapping = serde_json::from_str(
            r#"{"time":"t","beams":["v1","v2","v3","v4"],"valid":"ok","pressure_kpa":"p","beam_scale":0.001,"delimiter":";"}"#,
        )
        .unwrap();
        let recs = read_columns(text.as_bytes(), &mapping, "dive").unwrap();
        let m = assemble_missions(recs, "columns", DEFAULT_MAX_STEP_S).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].id, "dive");
        assert_eq!(m[0].len(), 2);
        assert_eq!(m[0].gaps, vec![1]);
        assert!((m[0].samples[0].depth_m.unwrap() - 100.0).abs() < 1e-9);
        assert!((m[0].samples[0].beams[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn format_names() {
        assert_eq!(Format::from_name("canonical", None).unwrap(), Format::Canonical);
        assert!(matches!(Format::from_name("xyz", None), Err(Error::UnknownFormat(_))));
        assert!(Format::from_name("columns", None).is_err());
    }

    fn mission(id: &str, len: usize) -> Mission {
        Mission {
            id: id.into(),
            source: "test".into(),
            samples: (0..len)
                .map(|t| BeamSample::complete(t as f64, [t as f64, 1.0, 2.0, 3.0]))
                .collect(),
            gaps: vec![],
        }
    }

    #[test]
    fn splits_are_disjoint_and_complete() {
        let all: Vec<Mission> = (0..5).map(|i| mission(&format!("m{i}"), 3)).collect();
        let manifest = SplitManifest::by_fraction(&all, 0.7).unwrap();
        let (train, test) = split_train_test(&all, &manifest).unwrap();
        assert_eq!(train.len() + test.len(), 5);
        assert!(train.iter().all(|a| test.iter().all(|b| a.id != b.id)));
        let overlap = SplitManifest {
            train: vec!["m0".into()],
            test: vec!["m0".into(), "m1".into(), "m2".into(), "m3".into(), "m4".into()],
        };
        assert!(split_train_test(&all, &overlap).is_err());
        let partial = SplitManifest {
            train: vec!["m0".into()],
            test: vec!["m1".into()],
        };
        assert!(split_train_test(&all, &partial).is_err());
        assert!(SplitManifest::by_fraction(&all[..1], 0.5).is_err());
    }

    #[test]
    fn windows_count_and_alignment() {
        let g = BeamGeometry::default();
        let spec = WindowSpec {
            window_size: 6,
            missing: BeamSet::single(1).unwrap(),
        };
        let m = mission("m", 10);
        let w = make_windows(&m, &spec, &g).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w[0].index, 6);
        assert_eq!(w[0].target, vec![6.0]);
        assert_eq!(w[0].past.len(), 6);
        assert_eq!(w[0].past[5].time_s, 5.0);
        assert_eq!(w[0].current_available.present(), BeamSet::from_beams(&[2, 3, 4]).unwrap());
        assert_eq!(w[0].current_full().raw(), [6.0, 1.0, 2.0, 3.0]);
        let tail = w[0].tail(3).unwrap();
        assert_eq!(tail.past[0].time_s, 3.0);
        assert!(w[0].tail(7).is_err());

        assert!(matches!(
            make_windows(&mission("short", 6), &spec, &g),
            Err(Error::MissionTooShort { len: 6, window: 6, .. })
        ));
        let both = windows_for_missions(&[mission("short", 6), m.clone()], &spec, &g).unwrap();
        assert_eq!(both.len(), 4);

        let mut gapped = mission("g", 20);
        gapped.gaps = vec![8];
        // Segments of 8 and 12 epochs give 2 + 6 windows.
        assert_eq!(make_windows(&gapped, &spec, &g).unwrap().len(), 8);
    }
}
