//! Polarization dephasing from frequency-polarization coupling in a
//! birefringent element.
//!
//! All physics is carried by the optical path difference `L = x·(n_H − n_V)`
//! between the two polarizations; the dispersion of `n_H − n_V` is neglected.
//! For a photon whose spectrum is `|A(ω)|²`, tracing out frequency leaves the
//! polarization coherences multiplied by
//!
//! ```text
//! Γ(L) = ∫ dω |A(ω)|² exp(−i ω L / c)
//! ```
//!
//! which for a rectangular spectrum of width Δω around ω₀ is
//! `exp(−i ω₀ L / c) · sinc(L Δω / 2c)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::polarimetry::{expected_qubit_counts, sample_poisson, PolSpec, QubitRecord};
use crate::qlinalg::{kron, CMatrix};
use crate::states::{DensityMatrix, QubitState, SourceConfig};
use crate::tomography::{single_qubit_reconstruct, std_dev, QubitCounts};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumShape {
    Rectangular,
}

impl FromStr for SpectrumShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(SpectrumShape::Rectangular),
            other => Err(Error::UnsupportedShape(other.to_string())),
        }
    }
}

impl fmt::Display for SpectrumShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumShape::Rectangular => f.write_str("rectangular"),
        }
    }
}

/// Photon spectrum as selected by the interference filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub shape: SpectrumShape,
    pub center_wavelength_nm: f64,
    pub fwhm_nm: f64,
}

impl Spectrum {
    pub fn rectangular(center_wavelength_nm: f64, fwhm_nm: f64) -> Result<Self> {
        let s = Self { shape: SpectrumShape::Rectangular, center_wavelength_nm, fwhm_nm };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (l0, d) = (self.center_wavelength_nm, self.fwhm_nm);
        if !(l0 > 0.0 && l0.is_finite() && d > 0.0 && d < l0) {
            return Err(Error::InvalidInput(format!(
                "spectrum needs 0 < fwhm < center wavelength, got center {l0} nm, fwhm {d} nm"
            )));
        }
        Ok(())
    }

    /// Path difference of the first coherence zero, λ₀²/δ.
    pub fn first_zero_opd_nm(&self) -> f64 {
        self.center_wavelength_nm * self.center_wavelength_nm / self.fwhm_nm
    }
}

/// Birefringent element characterised only by its optical path difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirefringentElement {
    pub opd_nm: f64,
}

impl BirefringentElement {
    pub fn new(opd_nm: f64) -> Result<Self> {
        if !(opd_nm >= 0.0 && opd_nm.is_finite()) {
            return Err(Error::InvalidInput(format!("optical path difference must be >= 0, got {opd_nm}")));
        }
        Ok(Self { opd_nm })
    }

    /// Element whose path difference is `waves` central wavelengths.
    pub fn in_waves(waves: f64, spectrum: &Spectrum) -> Result<Self> {
        Self::new(waves * spectrum.center_wavelength_nm)
    }
}

/// sin(u)/u with a series branch near the removable singularity.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// Complex dephasing factor Γ for the given spectrum and element.
pub fn gamma(spectrum: &Spectrum, element: &BirefringentElement) -> Result<Complex64> {
    spectrum.validate()?;
    match spectrum.shape {
        SpectrumShape::Rectangular => {
            let l0 = spectrum.center_wavelength_nm;
            let opd = element.opd_nm;
            // ω₀L/c = 2πL/λ₀ ;  LΔω/2c = πLδ/λ₀²  with Δω = 2πcδ/λ₀².
            let carrier = 2.0 * PI * opd / l0;
            let envelope = sinc(PI * opd * spectrum.fwhm_nm / (l0 * l0));
            Ok(Complex64::from_polar(1.0, -carrier) * envelope)
        }
    }
}

pub fn gamma_abs(spectrum: &Spectrum, element: &BirefringentElement) -> Result<f64> {
    gamma(spectrum, element).map(|g| g.norm())
}

/// Frame in which a dephasing channel acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DephasingBasis {
    /// H/V.
    Rectilinear,
    /// D/A.
    Diagonal,
}

fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_real(2, 2, &[h, h, h, -h]).expect("static matrix")
}

fn frame(basis: DephasingBasis) -> Option<CMatrix> {
    match basis {
        DephasingBasis::Rectilinear => None,
        DephasingBasis::Diagonal => Some(hadamard()),
    }
}

fn coherence_mask(gamma: Complex64) -> CMatrix {
    let one = Complex64::new(1.0, 0.0);
    CMatrix::from_rows(&[[one, gamma], [gamma.conj(), one]]).expect("finite gamma")
}

fn check_gamma(gamma: Complex64) -> Result<()> {
    let g = gamma.norm();
    if g.is_nan() || g > 1.0 + 1e-12 {
        return Err(Error::OutOfRange { name: "|gamma|", value: g, min: 0.0, max: 1.0 });
    }
    Ok(())
}

/// Scales the coherences of a single-qubit state by Γ (upper) and Γ* (lower)
/// in the chosen basis.
pub fn dephase_single(rho: &QubitState, gamma: Complex64, basis: DephasingBasis) -> Result<QubitState> {
    check_gamma(gamma)?;
    let mask = coherence_mask(gamma);
    let out = match frame(basis) {
        None => rho.matrix().hadamard(&mask),
        Some(r) => rho.matrix().conjugate_by(&r)?.hadamard(&mask).conjugate_by(&r.adjoint())?,
    };
    Ok(QubitState::from_matrix_unchecked(out.hermitian_part()))
}

/// Applies independent dephasing to each photon of a pair.
pub fn dephase_two_photon(
    rho: &DensityMatrix,
    gamma1: Complex64,
    gamma2: Complex64,
    basis: DephasingBasis,
) -> Result<DensityMatrix> {
    check_gamma(gamma1)?;
    check_gamma(gamma2)?;
    let mask = kron(&coherence_mask(gamma1), &coherence_mask(gamma2));
    let out = match frame(basis) {
        None => rho.matrix().hadamard(&mask),
        Some(r) => {
            let rr = kron(&r, &r);
            rho.matrix().conjugate_by(&rr)?.hadamard(&mask).conjugate_by(&rr.adjoint())?
        }
    };
    Ok(DensityMatrix::from_matrix_unchecked(out.hermitian_part()))
}

/// Coherence magnitude read back from a measured single-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEstimate {
    /// |ρ₀₁| / √(ρ₀₀ ρ₁₁), clamped to [0, 1.05].
    pub gamma_abs: f64,
    /// Set when the raw ratio exceeded 1.
    pub exceeds_unity: bool,
}

pub fn gamma_from_density(rho: &QubitState) -> Result<CoherenceEstimate> {
    let m = rho.matrix();
    let (a1, a3) = (m[(0, 0)].re, m[(1, 1)].re);
    for d in [a1, a3] {
        if d <= 1e-9 {
            return Err(Error::DegenerateDiagonal(d));
        }
    }
    let raw = m[(0, 1)].norm() / (a1 * a3).sqrt();
    Ok(CoherenceEstimate { gamma_abs: raw.clamp(0.0, 1.05), exceeds_unity: raw > 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub opd_over_lambda0: f64,
    pub gamma_abs: f64,
}

/// |Γ| over a grid of path differences given in units of λ₀.
pub fn decoherence_curve(spectrum: &Spectrum, opd_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    spectrum.validate()?;
    opd_grid
        .iter()
        .map(|&w| {
            let element = BirefringentElement::in_waves(w, spectrum)?;
            Ok(CurvePoint { opd_over_lambda0: w, gamma_abs: gamma_abs(spectrum, &element)? })
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str = "opd_over_lambda0,gamma_abs";

/// Writes the curve as CSV with 9 significant digits per value.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{},{}", fmt_sig(p.opd_over_lambda0, 9), fmt_sig(p.gamma_abs, 9))?;
    }
    Ok(())
}

/// Fixed-point rendering with `digits` significant digits.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// One simulated run of the single-photon coherence measurement.
#[derive(Debug, Clone)]
pub struct SinglePhotonRun {
    /// H, V, D, R analyzer counts.
    pub records: Vec<QubitRecord>,
    pub state: QubitState,
    pub estimate: CoherenceEstimate,
    /// Model value |Γ| for comparison.
    pub gamma_abs_model: f64,
}

/// Prepares (|H⟩+|V⟩)/√2, dephases it in the H/V basis, measures the four
/// analyzer settings with Poisson counts and reads |Γ| back.
pub fn simulate_single_photon_experiment(
    spectrum: &Spectrum,
    element: &BirefringentElement,
    config: &SourceConfig,
) -> Result<SinglePhotonRun> {
    let (state, g) = prepare_dephased_diagonal(spectrum, element)?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let records: Vec<QubitRecord> = expected_qubit_counts(&state, &QUBIT_TOMOGRAPHY, config)?
        .into_iter()
        .map(|(basis, mean)| QubitRecord { basis, duration_s: config.duration, count: sample_poisson(mean, &mut rng) })
        .collect();
    let counts = QubitCounts::from_records(&records)?;
    finish_single_photon(records, counts, g.norm())
}

/// Same pipeline with expected (fractional) counts. The accidental floor of
/// `config` still applies; set it to zero for an exact read-back.
pub fn noise_free_single_photon_experiment(
    spectrum: &Spectrum,
    element: &BirefringentElement,
    config: &SourceConfig,
) -> Result<SinglePhotonRun> {
    let (state, g) = prepare_dephased_diagonal(spectrum, element)?;
    config.validate()?;
    let expected = expected_qubit_counts(&state, &QUBIT_TOMOGRAPHY, config)?;
    let counts = QubitCounts::from_pairs(&expected)?;
    finish_single_photon(Vec::new(), counts, g.norm())
}

/// Standard deviation of the extracted |Γ| over `n_replicas` Poisson
/// resamplings of `records`. Replica `i` uses ChaCha stream `(seed, i)`.
pub fn bootstrap_gamma_abs(records: &[QubitRecord], n_replicas: usize, seed: u64) -> Result<f64> {
    if n_replicas < 2 {
        return Err(Error::InvalidInput(format!("bootstrap needs at least 2 replicas, got {n_replicas}")));
    }
    let values = (0..n_replicas)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let replica: Vec<QubitRecord> =
                records.iter().map(|r| QubitRecord { count: sample_poisson(r.count as f64, &mut rng), ..*r }).collect();
            let state = single_qubit_reconstruct(&QubitCounts::from_records(&replica)?)?;
            Ok(gamma_from_density(&state)?.gamma_abs)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(std_dev(&values))
}

/// Analyzer bases of the single-photon measurement.
pub const QUBIT_TOMOGRAPHY: [PolSpec; 4] = [PolSpec::H, PolSpec::V, PolSpec::D, PolSpec::R];

fn prepare_dephased_diagonal(spectrum: &Spectrum, element: &BirefringentElement) -> Result<(QubitState, Complex64)> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let g = gamma(spectrum, element)?;
    let d = QubitState::pure([h, h])?;
    Ok((dephase_single(&d, g, DephasingBasis::Rectilinear)?, g))
}

fn finish_single_photon(records: Vec<QubitRecord>, counts: QubitCounts, model: f64) -> Result<SinglePhotonRun> {
    let state = single_qubit_reconstruct(&counts)?;
    let estimate = gamma_from_density(&state)?;
    Ok(SinglePhotonRun { records, state, estimate, gamma_abs_model: model })
}
