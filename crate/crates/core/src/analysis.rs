//! State metrics: Uhlmann fidelity, best-fit Werner parameter, linear
//! entropy, concurrence/tangle and the CHSH combination, from density
//! matrices or from coincidence counts.

use serde::{Deserialize, Serialize};

use crate::optimize::golden_section_max;
use crate::polarimetry::{correlation_e, AnalyzerSetting, CoincidenceRecord, Measurements, PolSpec};
use crate::qlinalg::{herm_eig, kron, pauli, psd_sqrt, CMatrix};
use crate::states::{werner_unchecked, BellKind, DensityMatrix};
use crate::tolerances::TOL;
use crate::{Error, Result};

/// F(a, b) = (Tr √(√b · a · √b))².
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    fidelity_matrices(a.matrix(), b.matrix())
}

fn fidelity_matrices(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let sb = psd_sqrt(b, TOL.psd_clamp)?;
    let inner = (&(&sb * a) * &sb).hermitian_part();
    let root_trace: f64 = herm_eig(&inner)?.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Best member of the one-parameter family x|target⟩⟨target| + (1−x)I/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerFit {
    pub x: f64,
    pub fidelity: f64,
    pub target: BellKind,
}

const FIT_GRID_POINTS: usize = 100;
const FIT_X_TOL: f64 = 1e-5;

/// Maximises fidelity over x ∈ [−1/3, 1]: grid scan, then golden-section
/// refinement around the best grid point.
pub fn fit_werner(rho: &DensityMatrix, target: BellKind) -> Result<WernerFit> {
    let (lo, hi) = (-1.0 / 3.0, 1.0);
    let grid_x = |i: usize| lo + (hi - lo) * i as f64 / (FIT_GRID_POINTS - 1) as f64;
    let score = |x: f64| fidelity(rho, &werner_unchecked(target, x.clamp(lo, hi)));

    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..FIT_GRID_POINTS {
        let f = score(grid_x(i))?;
        if f > best.1 {
            best = (i, f);
        }
    }
    let a = grid_x(best.0.saturating_sub(1));
    let b = grid_x((best.0 + 1).min(FIT_GRID_POINTS - 1));

    // Fidelity evaluation cannot fail for members of the family once the
    // grid pass succeeded.
    let (x, f) = golden_section_max(|x| score(x).unwrap_or(f64::NEG_INFINITY), a, b, FIT_X_TOL);
    let (x, f) = if f >= best.1 { (x, f) } else { (grid_x(best.0), best.1) };
    Ok(WernerFit { x, fidelity: f, target })
}

/// P = (4/3)(1 − Tr ρ²).
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    (4.0 / 3.0 * (1.0 - rho.purity())).clamp(0.0, 1.0)
}

/// Wootters concurrence C = max(0, √λ₁ − √λ₂ − √λ₃ − √λ₄), λ the descending
/// eigenvalues of ρ·ρ̃ with ρ̃ = (σy⊗σy) ρ* (σy⊗σy).
///
/// The λ are taken from the Hermitian similar matrix √ρ ρ̃ √ρ.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let yy = kron(&pauli(2), &pauli(2));
    let flipped = &(&yy * &rho.matrix().conj()) * &yy;
    let sr = psd_sqrt(rho.matrix(), TOL.psd_clamp)?;
    let m = (&(&sr * &flipped) * &sr).hermitian_part();
    let roots: Vec<f64> = herm_eig(&m)?.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    Ok((roots[0] - roots[1] - roots[2] - roots[3]).clamp(0.0, 1.0))
}

/// T = C².
pub fn tangle(rho: &DensityMatrix) -> Result<f64> {
    concurrence(rho).map(|c| c * c)
}

/// Analyzer angles (degrees) of the CHSH combination. Each orthogonal partner
/// sits at θ + 90°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshAngles {
    pub theta1: f64,
    pub theta1_prime: f64,
    pub theta2: f64,
    pub theta2_prime: f64,
}

impl Default for ChshAngles {
    /// (−22.5°, 22.5°; 0°, 45°): maximal violation for |Φ⁻⟩.
    fn default() -> Self {
        Self { theta1: -22.5, theta1_prime: 22.5, theta2: 0.0, theta2_prime: 45.0 }
    }
}

impl ChshAngles {
    pub fn new(theta1: f64, theta1_prime: f64, theta2: f64, theta2_prime: f64) -> Result<Self> {
        let a = Self { theta1, theta1_prime, theta2, theta2_prime };
        if a.as_array().iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("CHSH angles must be finite".into()));
        }
        Ok(a)
    }

    /// Default angles with the first arm mirrored (θ → 90° − θ), the image of
    /// the default set under σx on arm 1: maximal violation for |Ψ⁻⟩.
    pub fn for_singlet() -> Self {
        let d = Self::default();
        Self { theta1: 90.0 - d.theta1, theta1_prime: 90.0 - d.theta1_prime, ..d }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta1, self.theta1_prime, self.theta2, self.theta2_prime]
    }

    /// The four (θ₁-type, θ₂-type) pairs in the order of the CHSH sum:
    /// E(θ₁,θ₂) + E(θ₁′,θ₂) + E(θ₁,θ₂′) − E(θ₁′,θ₂′).
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.theta1, self.theta2),
            (self.theta1_prime, self.theta2),
            (self.theta1, self.theta2_prime),
            (self.theta1_prime, self.theta2_prime),
        ]
    }
}

const CHSH_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// A(θ) = P(θ) − P(θ + 90°).
fn analyzer_observable(deg: f64) -> CMatrix {
    let p = PolSpec::Angle(deg);
    &p.projector() - &p.orthogonal().projector()
}

/// E(θ₁, θ₂) = Tr[ρ · A(θ₁) ⊗ A(θ₂)].
pub fn correlation_from_state(rho: &DensityMatrix, theta1: f64, theta2: f64) -> f64 {
    let obs = kron(&analyzer_observable(theta1), &analyzer_observable(theta2));
    rho.matrix().trace_product(&obs).re
}

/// Signed S; compare |S| with 2.
pub fn chsh_value(rho: &DensityMatrix, angles: &ChshAngles) -> f64 {
    angles.pairs().iter().zip(CHSH_SIGNS).map(|(&(a, b), s)| s * correlation_from_state(rho, a, b)).sum()
}

/// 16 settings: for each pair of [`ChshAngles::pairs`], the quadruple
/// (θᵢ,θⱼ), (θᵢ⊥,θⱼ⊥), (θᵢ⊥,θⱼ), (θᵢ,θⱼ⊥).
pub fn chsh_schedule(angles: &ChshAngles) -> Vec<AnalyzerSetting> {
    angles
        .pairs()
        .iter()
        .flat_map(|&(a, b)| {
            [
                AnalyzerSetting::angles(a, b),
                AnalyzerSetting::angles(a + 90.0, b + 90.0),
                AnalyzerSetting::angles(a + 90.0, b),
                AnalyzerSetting::angles(a, b + 90.0),
            ]
        })
        .collect()
}

/// S with its first-order Poisson uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub s: f64,
    pub sigma: f64,
    pub angles: ChshAngles,
}

impl ChshEstimate {
    pub fn violates(&self) -> bool {
        self.s.abs() > 2.0
    }
}

fn angle_of(p: PolSpec) -> Option<f64> {
    match p {
        PolSpec::Angle(d) => Some(d),
        PolSpec::H => Some(0.0),
        PolSpec::V => Some(90.0),
        PolSpec::D => Some(45.0),
        PolSpec::A => Some(135.0),
        PolSpec::R | PolSpec::L => None,
    }
}

fn same_angle(a: f64, b: f64) -> bool {
    ((a - b) / 180.0 - ((a - b) / 180.0).round()).abs() < 1e-9
}

/// S from 16 records laid out as by [`chsh_schedule`].
pub fn chsh_from_counts(records: &[CoincidenceRecord]) -> Result<ChshEstimate> {
    if records.len() != 16 {
        return Err(Error::InvalidInput(format!("CHSH needs 16 records, got {}", records.len())));
    }
    for quad in records.chunks(4) {
        let d = quad[0].duration_s;
        if quad.iter().any(|r| r.duration_s != d) {
            return Err(Error::InvalidInput("CHSH quadruple mixes integration times".into()));
        }
    }
    chsh_from_measurements(&Measurements::from_records(records)?)
}

/// [`chsh_from_counts`] on (possibly fractional) counts.
pub fn chsh_from_measurements(data: &Measurements) -> Result<ChshEstimate> {
    if data.len() != 16 {
        return Err(Error::InvalidInput(format!("CHSH needs 16 measurements, got {}", data.len())));
    }
    let mut thetas = [(0.0, 0.0); 4];
    let mut s = 0.0;
    let mut var = 0.0;
    for (k, sign) in CHSH_SIGNS.iter().enumerate() {
        let settings = &data.settings[4 * k..4 * k + 4];
        let angles: Vec<(f64, f64)> = settings
            .iter()
            .map(|st| match (angle_of(st.arm1), angle_of(st.arm2)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(Error::InvalidInput(format!("CHSH setting {st} is not linear"))),
            })
            .collect::<Result<_>>()?;
        let (a, b) = angles[0];
        let expected = [(a, b), (a + 90.0, b + 90.0), (a + 90.0, b), (a, b + 90.0)];
        if angles.iter().zip(expected).any(|(&(x, y), (ex, ey))| !same_angle(x, ex) || !same_angle(y, ey)) {
            return Err(Error::InvalidInput(format!(
                "CHSH records {}..{} are not a correlation quadruple",
                4 * k,
                4 * k + 3
            )));
        }
        let c = &data.counts[4 * k..4 * k + 4];
        let e = correlation_e([c[0], c[1], c[2], c[3]])?;
        let total: f64 = c.iter().sum();
        s += sign * e;
        // Var(E) = (1 − E²)/total to first order in Poisson fluctuations.
        var += (1.0 - e * e) / total;
        thetas[k] = (a, b);
    }
    let angles = ChshAngles::new(thetas[0].0, thetas[1].0, thetas[0].1, thetas[2].1)?;
    Ok(ChshEstimate { s, sigma: var.sqrt(), angles })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    #[serde(rename = "S")]
    pub s: f64,
    pub sigma: Option<f64>,
    pub angles_deg: [f64; 4],
}

/// Metrics report emitted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub x: f64,
    pub x_err: Option<f64>,
    pub fidelity: f64,
    pub linear_entropy: f64,
    pub tangle: f64,
    pub chsh: ChshReport,
}

impl MetricsReport {
    /// Every metric of `rho`; CHSH from the state at `angles`.
    pub fn from_state(rho: &DensityMatrix, target: BellKind, angles: &ChshAngles) -> Result<Self> {
        let fit = fit_werner(rho, target)?;
        Ok(Self {
            x: fit.x,
            x_err: None,
            fidelity: fit.fidelity,
            linear_entropy: linear_entropy(rho),
            tangle: tangle(rho)?,
            chsh: ChshReport { s: chsh_value(rho, angles), sigma: None, angles_deg: angles.as_array() },
        })
    }
}
