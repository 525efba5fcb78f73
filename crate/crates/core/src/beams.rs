//! Beam subsets, partial beam vectors and platform-frame velocities.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const NUM_BEAMS: usize = 4;

/// Subset of the four DVL beams, numbered 1..=4.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BeamSet(u8);

impl BeamSet {
    pub const ALL: BeamSet = BeamSet(0b1111);
    pub const EMPTY: BeamSet = BeamSet(0);

    pub fn from_beams(beams: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &b in beams {
            if !(1..=NUM_BEAMS).contains(&b) {
                return Err(Error::BeamIndex(b));
            }
            bits |= 1 << (b - 1);
        }
        Ok(Self(bits))
    }

    pub fn single(beam: usize) -> Result<Self> {
        Self::from_beams(&[beam])
    }

    pub fn from_mask(mask: [bool; NUM_BEAMS]) -> Self {
        Self(
            mask.iter()
                .enumerate()
                .fold(0, |acc, (i, &on)| if on { acc | (1 << i) } else { acc }),
        )
    }

    pub fn contains(self, beam: usize) -> bool {
        (1..=NUM_BEAMS).contains(&beam) && self.0 & (1 << (beam - 1)) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_full(self) -> bool {
        self.0 == Self::ALL.0
    }

    pub fn complement(self) -> Self {
        Self(!self.0 & Self::ALL.0)
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    /// Beam numbers in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (1..=NUM_BEAMS).filter(move |&b| self.contains(b))
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Short tag used in file names, e.g. `1-2`.
    pub fn tag(self) -> String {
        self.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("-")
    }
}

impl fmt::Display for BeamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.iter().map(|b| b.to_string()).collect();
        write!(f, "{{{}}}", s.join(","))
    }
}

impl fmt::Debug for BeamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for BeamSet {
    type Err = Error;

    /// Accepts `1,2`, `1-2`, `{1,2}` or `12`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('{').trim_end_matches('}');
        let mut beams = Vec::new();
        for part in trimmed.split([',', '-', ' ']).filter(|p| !p.is_empty()) {
            if part.len() > 1 && part.chars().all(|c| c.is_ascii_digit()) {
                for c in part.chars() {
                    beams.push(c.to_digit(10).unwrap_or(0) as usize);
                }
            } else {
                let b: usize = part
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad beam list `{s}`")))?;
                beams.push(b);
            }
        }
        Self::from_beams(&beams)
    }
}

impl Serialize for BeamSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BeamSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let beams = Vec::<usize>::deserialize(deserializer)?;
        BeamSet::from_beams(&beams).map_err(serde::de::Error::custom)
    }
}

/// Velocity in the platform frame, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity3 {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl Velocity3 {
    pub const ZERO: Velocity3 = Velocity3 {
        vx: 0.0,
        vy: 0.0,
        vz: 0.0,
    };

    pub fn new(vx: f64, vy: f64, vz: f64) -> Self {
        Self { vx, vy, vz }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.vz)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.vx, self.vy, self.vz]
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.vz.is_finite()
    }

    pub fn sub(self, other: Velocity3) -> Velocity3 {
        Velocity3::new(self.vx - other.vx, self.vy - other.vy, self.vz - other.vz)
    }
}

/// Beam-axis velocities for a subset of the beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamVector {
    values: [f64; NUM_BEAMS],
    present: BeamSet,
}

impl BeamVector {
    /// Absent entries of `values` are ignored and stored as zero.
    pub fn new(present: BeamSet, values: [f64; NUM_BEAMS]) -> Self {
        let mut v = [0.0; NUM_BEAMS];
        for b in present.iter() {
            v[b - 1] = values[b - 1];
        }
        Self { values: v, present }
    }

    pub fn full(values: [f64; NUM_BEAMS]) -> Self {
        Self::new(BeamSet::ALL, values)
    }

    pub fn empty() -> Self {
        Self::new(BeamSet::EMPTY, [0.0; NUM_BEAMS])
    }

    /// Builds a vector from values given in ascending beam order of `present`.
    pub fn from_ordered(present: BeamSet, ordered: &[f64]) -> Result<Self> {
        if ordered.len() != present.len() {
            return Err(Error::InvalidSpec(format!(
                "{} values given for beams {present}",
                ordered.len()
            )));
        }
        let mut v = [0.0; NUM_BEAMS];
        for (b, &x) in present.iter().zip(ordered) {
            v[b - 1] = x;
        }
        Ok(Self { values: v, present })
    }

    pub fn present(&self) -> BeamSet {
        self.present
    }

    pub fn get(&self, beam: usize) -> Option<f64> {
        self.present.contains(beam).then(|| self.values[beam - 1])
    }

    /// Present values in ascending beam order.
    pub fn ordered(&self) -> Vec<f64> {
        self.present.iter().map(|b| self.values[b - 1]).collect()
    }

    /// Raw four-slot array; absent beams read as zero.
    pub fn raw(&self) -> [f64; NUM_BEAMS] {
        self.values
    }

    pub fn restrict(&self, beams: BeamSet) -> BeamVector {
        BeamVector::new(self.present.intersection(beams), self.values)
    }

    /// Union of two vectors over disjoint beam sets.
    pub fn merge(&self, other: &BeamVector) -> Result<BeamVector> {
        if !self.present.intersection(other.present).is_empty() {
            return Err(Error::InvalidSpec(format!(
                "cannot merge overlapping beam sets {} and {}",
                self.present, other.present
            )));
        }
        let mut v = self.values;
        for b in other.present.iter() {
            v[b - 1] = other.values[b - 1];
        }
        Ok(BeamVector::new(self.present.union(other.present), v))
    }
}

/// Every missing-beam combination with at least one beam available: four
/// singletons, six pairs and four triples, in that order and lexicographic
/// within each size.
pub fn enumerate_combinations() -> Vec<BeamSet> {
    let mut out = Vec::with_capacity(14);
    for size in 1..NUM_BEAMS {
        let mut sets: Vec<Vec<usize>> = (1u8..16)
            .map(BeamSet)
            .filter(|s| s.len() == size)
            .map(BeamSet::to_vec)
            .collect();
        sets.sort();
        out.extend(sets.iter().map(|b| BeamSet::from_beams(b).expect("valid beams")));
    }
    out
}
