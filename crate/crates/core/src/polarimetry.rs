//! Polarization analyzers, Born-rule probabilities and Poissonian
//! coincidence-count simulation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::qlinalg::{kron, CMatrix};
use crate::states::{DensityMatrix, QubitState, SourceConfig};
use crate::{Error, Result};

/// Polarization selected by one analyzer arm.
///
/// Circular convention: R = (|H⟩ − i|V⟩)/√2, L = (|H⟩ + i|V⟩)/√2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolSpec {
    H,
    V,
    D,
    A,
    R,
    L,
    /// Linear polarizer at this angle from horizontal, degrees.
    Angle(f64),
}

impl PolSpec {
    pub fn label(&self) -> Option<&'static str> {
        Some(match self {
            PolSpec::H => "H",
            PolSpec::V => "V",
            PolSpec::D => "D",
            PolSpec::A => "A",
            PolSpec::R => "R",
            PolSpec::L => "L",
            PolSpec::Angle(_) => return None,
        })
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "H" => Ok(PolSpec::H),
            "V" => Ok(PolSpec::V),
            "D" => Ok(PolSpec::D),
            "A" => Ok(PolSpec::A),
            "R" => Ok(PolSpec::R),
            "L" => Ok(PolSpec::L),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }

    pub fn angle(deg: f64) -> Result<Self> {
        if !deg.is_finite() {
            return Err(Error::InvalidInput(format!("analyzer angle must be finite, got {deg}")));
        }
        Ok(PolSpec::Angle(deg))
    }

    /// Jones vector of the transmitted polarization.
    pub fn jones(&self) -> [Complex64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            PolSpec::H => [c(1.0, 0.0), c(0.0, 0.0)],
            PolSpec::V => [c(0.0, 0.0), c(1.0, 0.0)],
            PolSpec::D => [c(h, 0.0), c(h, 0.0)],
            PolSpec::A => [c(h, 0.0), c(-h, 0.0)],
            PolSpec::R => [c(h, 0.0), c(0.0, -h)],
            PolSpec::L => [c(h, 0.0), c(0.0, h)],
            PolSpec::Angle(deg) => {
                let t = deg.to_radians();
                [c(t.cos(), 0.0), c(t.sin(), 0.0)]
            }
        }
    }

    /// Rank-1 projector |v⟩⟨v|.
    pub fn projector(&self) -> CMatrix {
        let v = self.jones();
        CMatrix::outer(&v, &v)
    }

    /// The orthogonal polarization (the other output port of the analyzer).
    pub fn orthogonal(&self) -> Self {
        match *self {
            PolSpec::H => PolSpec::V,
            PolSpec::V => PolSpec::H,
            PolSpec::D => PolSpec::A,
            PolSpec::A => PolSpec::D,
            PolSpec::R => PolSpec::L,
            PolSpec::L => PolSpec::R,
            PolSpec::Angle(deg) => PolSpec::Angle(deg + 90.0),
        }
    }
}

impl fmt::Display for PolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolSpec::Angle(deg) => write!(f, "{deg}°"),
            other => f.write_str(other.label().expect("labelled variant")),
        }
    }
}

impl FromStr for PolSpec {
    type Err = Error;

    /// A label, or an angle in degrees.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.trim_end_matches("deg").trim_end_matches('°').parse::<f64>() {
            Ok(deg) => PolSpec::angle(deg),
            Err(_) => PolSpec::from_label(s),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolSpecJson {
    Label(String),
    Angle { deg: f64 },
}

impl Serialize for PolSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PolSpec::Angle(deg) => PolSpecJson::Angle { deg: *deg },
            other => PolSpecJson::Label(other.label().expect("labelled variant").to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match PolSpecJson::deserialize(d)? {
            PolSpecJson::Label(l) => PolSpec::from_label(&l).map_err(D::Error::custom),
            PolSpecJson::Angle { deg } => PolSpec::angle(deg).map_err(D::Error::custom),
        }
    }
}

/// Analyzer pair for one coincidence measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    pub arm1: PolSpec,
    pub arm2: PolSpec,
}

impl AnalyzerSetting {
    pub fn new(arm1: PolSpec, arm2: PolSpec) -> Self {
        Self { arm1, arm2 }
    }

    /// Parses two-letter label pairs such as `"HV"`.
    pub fn from_labels(pair: &str) -> Result<Self> {
        let mut chars = pair.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => {
                Ok(Self::new(PolSpec::from_label(&a.to_string())?, PolSpec::from_label(&b.to_string())?))
            }
            _ => Err(Error::UnknownLabel(pair.to_string())),
        }
    }

    pub fn angles(deg1: f64, deg2: f64) -> Self {
        Self::new(PolSpec::Angle(deg1), PolSpec::Angle(deg2))
    }

    /// P₁ ⊗ P₂.
    pub fn projector(&self) -> CMatrix {
        kron(&self.arm1.projector(), &self.arm2.projector())
    }
}

impl fmt::Display for AnalyzerSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.arm1, self.arm2) {
            (PolSpec::Angle(_), _) | (_, PolSpec::Angle(_)) => write!(f, "({}, {})", self.arm1, self.arm2),
            _ => write!(f, "{}{}", self.arm1, self.arm2),
        }
    }
}

/// The 16-setting two-qubit tomography schedule. The first four settings
/// (HH, HV, VV, VH) span a complete basis and fix the total flux.
pub fn tomographic_settings() -> Vec<AnalyzerSetting> {
    const SCHEDULE: [&str; 16] =
        ["HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH", "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"];
    SCHEDULE.iter().map(|p| AnalyzerSetting::from_labels(p).expect("static schedule")).collect()
}

/// Tr[ρ (P₁ ⊗ P₂)], clamped to [0, 1].
pub fn born_probability(rho: &DensityMatrix, setting: &AnalyzerSetting) -> f64 {
    probability_of(rho.matrix(), &setting.projector())
}

pub(crate) fn probability_of(rho: &CMatrix, projector: &CMatrix) -> f64 {
    let p = rho.trace_product(projector).re;
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&p), "probability {p}");
    p.clamp(0.0, 1.0)
}

/// One measured coincidence count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub setting: AnalyzerSetting,
    pub duration_s: f64,
    pub count: u64,
}

/// Single-photon count for one analyzer basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitRecord {
    pub basis: PolSpec,
    pub duration_s: f64,
    pub count: u64,
}

/// Settings paired with (possibly fractional) counts; the common input of
/// the reconstruction and CHSH routines.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub settings: Vec<AnalyzerSetting>,
    pub counts: Vec<f64>,
}

impl Measurements {
    pub fn new(settings: Vec<AnalyzerSetting>, counts: Vec<f64>) -> Result<Self> {
        if settings.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} counts", settings.len()),
                got: format!("{} counts", counts.len()),
            });
        }
        if counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput("counts must be finite and non-negative".into()));
        }
        Ok(Self { settings, counts })
    }

    pub fn from_records(records: &[CoincidenceRecord]) -> Result<Self> {
        Self::new(records.iter().map(|r| r.setting).collect(), records.iter().map(|r| r.count as f64).collect())
    }

    /// Expected counts without shot noise.
    pub fn expected(rho: &DensityMatrix, settings: &[AnalyzerSetting], config: &SourceConfig) -> Result<Self> {
        config.validate()?;
        let counts = settings.iter().map(|s| mean_count(born_probability(rho, s), config)).collect();
        Self::new(settings.to_vec(), counts)
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Multiplies every count by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { settings: self.settings.clone(), counts: self.counts.iter().map(|c| c * k).collect() }
    }
}

fn mean_count(p: f64, config: &SourceConfig) -> f64 {
    config.pair_rate * config.duration * p + config.accidental_rate * config.duration
}

/// Draws Poisson(mean); zero mean yields zero.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Simulates one Poisson count per setting, drawn in list order from a
/// generator seeded by `config.seed`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[AnalyzerSetting],
    config: &SourceConfig,
) -> Result<Vec<CoincidenceRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(settings
        .iter()
        .map(|s| CoincidenceRecord {
            setting: *s,
            duration_s: config.duration,
            count: sample_poisson(mean_count(born_probability(rho, s), config), &mut rng),
        })
        .collect())
}

/// Expected single-arm counts for each basis.
pub fn expected_qubit_counts(
    state: &QubitState,
    bases: &[PolSpec],
    config: &SourceConfig,
) -> Result<Vec<(PolSpec, f64)>> {
    config.validate()?;
    Ok(bases.iter().map(|b| (*b, mean_count(probability_of(state.matrix(), &b.projector()), config))).collect())
}

/// Correlation E from counts ordered (θ₁,θ₂), (θ₁⊥,θ₂⊥), (θ₁⊥,θ₂), (θ₁,θ₂⊥).
pub fn correlation_e(counts: [f64; 4]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyData("correlation quadruple has zero total count"));
    }
    Ok(((counts[0] + counts[1] - counts[2] - counts[3]) / total).clamp(-1.0, 1.0))
}

/// [`correlation_e`] over records, requiring a common integration time.
pub fn correlation_e_records(quad: &[CoincidenceRecord; 4]) -> Result<f64> {
    let d = quad[0].duration_s;
    if quad.iter().any(|r| r.duration_s != d) {
        return Err(Error::InvalidInput("correlation quadruple mixes integration times".into()));
    }
    correlation_e(quad.map(|r| r.count as f64))
}

/// Count-record file: one integration time shared by every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub duration_s: f64,
    pub records: Vec<CountEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountEntry {
    pub arm1: PolSpec,
    pub arm2: PolSpec,
    pub count: u64,
}

impl CountsFile {
    pub fn from_records(records: &[CoincidenceRecord]) -> Result<Self> {
        let duration_s = records.first().map(|r| r.duration_s).ok_or(Error::EmptyData("no records"))?;
        if records.iter().any(|r| r.duration_s != duration_s) {
            return Err(Error::InvalidInput("records have different integration times".into()));
        }
        Ok(Self {
            duration_s,
            records: records
                .iter()
                .map(|r| CountEntry { arm1: r.setting.arm1, arm2: r.setting.arm2, count: r.count })
                .collect(),
        })
    }

    pub fn to_records(&self) -> Result<Vec<CoincidenceRecord>> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidInput(format!("duration_s must be > 0, got {}", self.duration_s)));
        }
        Ok(self
            .records
            .iter()
            .map(|e| CoincidenceRecord {
                setting: AnalyzerSetting::new(e.arm1, e.arm2),
                duration_s: self.duration_s,
                count: e.count,
            })
            .collect())
    }
}
