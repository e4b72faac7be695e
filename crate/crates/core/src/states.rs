//! Bell and Werner states, the two-crystal mixed source, and local unitaries.
//!
//! Basis order is fixed throughout the crate as (|HH⟩, |HV⟩, |VH⟩, |VV⟩),
//! i.e. |00⟩…|11⟩ with H ≡ 0 and the first arm as the most significant qubit.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decoherence::{dephase_two_photon, DephasingBasis};
use crate::qlinalg::{herm_eig, kron, pauli, CMatrix, HermEigen};
use crate::tolerances::TOL;
use crate::{Error, Result};

pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus];

    pub fn as_str(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi-plus",
            BellKind::PhiMinus => "phi-minus",
            BellKind::PsiPlus => "psi-plus",
            BellKind::PsiMinus => "psi-minus",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "phi-plus" | "phi+" => Ok(BellKind::PhiPlus),
            "phi-minus" | "phi-" => Ok(BellKind::PhiMinus),
            "psi-plus" | "psi+" => Ok(BellKind::PsiPlus),
            "psi-minus" | "psi-" | "singlet" => Ok(BellKind::PsiMinus),
            _ => Err(Error::InvalidInput(format!("unknown Bell state {s:?}"))),
        }
    }
}

/// Normalised two-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState2Q {
    amplitudes: [Complex64; 4],
}

impl PureState2Q {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TOL.reconstruction {
            return Err(Error::InvalidInput(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState2Q) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(self.projector())
    }
}

pub fn bell_state(kind: BellKind) -> PureState2Q {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let amplitudes = match kind {
        BellKind::PhiPlus => [h, z, z, h],
        BellKind::PhiMinus => [h, z, z, -h],
        BellKind::PsiPlus => [z, h, h, z],
        BellKind::PsiMinus => [z, h, -h, z],
    };
    PureState2Q { amplitudes }
}

/// Validated two-qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Checks every invariant and stores the exact Hermitian part.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_state(&matrix, 4)?;
        Ok(Self { matrix: matrix.hermitian_part() })
    }

    /// Builds from the upper triangle (diagonal taken as real), filling the
    /// lower triangle by conjugation and renormalising the trace to 1.
    pub fn from_upper_triangle(upper: &CMatrix) -> Result<Self> {
        if upper.dims() != (4, 4) {
            return Err(Error::DimensionMismatch { expected: "4x4".into(), got: format!("{:?}", upper.dims()) });
        }
        let m = CMatrix::from_fn(4, 4, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => upper[(i, j)],
            std::cmp::Ordering::Equal => Complex64::new(upper[(i, i)].re, 0.0),
            std::cmp::Ordering::Greater => upper[(j, i)].conj(),
        });
        let tr = m.trace().re;
        if tr <= 0.0 {
            return Err(Error::BadTrace(tr));
        }
        Self::new(m.scale_real(1.0 / tr))
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        debug_assert!(check_state(&matrix, 4).is_ok(), "{matrix:?}");
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn maximally_mixed() -> Self {
        Self { matrix: CMatrix::identity(4).scale_real(0.25) }
    }

    pub fn eigen(&self) -> HermEigen {
        herm_eig(&self.matrix).expect("density matrix is Hermitian")
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().eigenvalues
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }
}

fn check_state(m: &CMatrix, dim: usize) -> Result<()> {
    if m.dims() != (dim, dim) {
        return Err(Error::DimensionMismatch { expected: format!("{dim}x{dim}"), got: format!("{:?}", m.dims()) });
    }
    let herm = m.hermiticity_error();
    if herm > TOL.hermitian {
        return Err(Error::NonHermitian(herm));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TOL.trace || tr.im.abs() > TOL.trace {
        return Err(Error::BadTrace(tr.re));
    }
    let min = herm_eig(m)?.min_eigenvalue();
    if min < -TOL.psd_clamp {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Single-qubit density matrix (2×2), same invariants as [`DensityMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    matrix: CMatrix,
}

impl QubitState {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_state(&matrix, 2)?;
        Ok(Self { matrix: matrix.hermitian_part() })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        debug_assert!(check_state(&matrix, 2).is_ok(), "{matrix:?}");
        Self { matrix }
    }

    /// |ψ⟩⟨ψ| for a normalised 2-vector.
    pub fn pure(amplitudes: [Complex64; 2]) -> Result<Self> {
        Self::new(CMatrix::outer(&amplitudes, &amplitudes))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// (1−F)/3 · I₄ + (4F−1)/3 · |Ψ⁻⟩⟨Ψ⁻|.
pub fn werner_singlet(fidelity: f64) -> Result<DensityMatrix> {
    check_range("F", fidelity, 0.0, 1.0)?;
    let singlet = bell_state(BellKind::PsiMinus).projector();
    let m =
        &CMatrix::identity(4).scale_real((1.0 - fidelity) / 3.0) + &singlet.scale_real((4.0 * fidelity - 1.0) / 3.0);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// x · |Φ⁻⟩⟨Φ⁻| + (1−x) · I₄/4.
pub fn werner_phi_minus(x: f64) -> Result<DensityMatrix> {
    werner(BellKind::PhiMinus, x)
}

/// x · |target⟩⟨target| + (1−x) · I₄/4 for x in the physical range [−1/3, 1].
pub fn werner(target: BellKind, x: f64) -> Result<DensityMatrix> {
    check_range("x", x, -1.0 / 3.0, 1.0)?;
    Ok(werner_unchecked(target, x))
}

pub(crate) fn werner_unchecked(target: BellKind, x: f64) -> DensityMatrix {
    let p = bell_state(target).projector();
    let m = &p.scale_real(x) + &CMatrix::identity(4).scale_real((1.0 - x) / 4.0);
    DensityMatrix { matrix: m }
}

/// (u_a ⊗ u_b) ρ (u_a ⊗ u_b)†.
pub fn local_unitary(rho: &DensityMatrix, u_a: &CMatrix, u_b: &CMatrix) -> Result<DensityMatrix> {
    for u in [u_a, u_b] {
        if u.dims() != (2, 2) {
            return Err(Error::DimensionMismatch { expected: "2x2".into(), got: format!("{:?}", u.dims()) });
        }
        let err = u.unitarity_error();
        if err > TOL.unitary {
            return Err(Error::NotUnitary(err));
        }
    }
    let u = kron(u_a, u_b);
    Ok(DensityMatrix::from_matrix_unchecked(rho.matrix.conjugate_by(&u)?.hermitian_part()))
}

/// p · ρ_a + (1−p) · ρ_b.
pub fn mix(rho_a: &DensityMatrix, rho_b: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_range("p", p, 0.0, 1.0)?;
    Ok(DensityMatrix { matrix: &rho_a.matrix.scale_real(p) + &rho_b.matrix.scale_real(1.0 - p) })
}

/// σx, the bit flip mapping |Φ⁻⟩ to −|Ψ⁻⟩ when applied to the first arm.
pub fn sigma_x() -> CMatrix {
    pauli(1)
}

fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if !(min..=max).contains(&value) {
        return Err(Error::OutOfRange { name, value, min, max });
    }
    Ok(())
}

/// Parameters of the simulated two-crystal experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Weight of the entangled (second-crystal) component.
    pub mix_x: f64,
    /// True coincidences per second summed over a complete basis.
    pub pair_rate: f64,
    /// Accidental coincidences per second per setting.
    pub accidental_rate: f64,
    /// Integration time per setting, seconds.
    pub duration: f64,
    pub seed: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { mix_x: 0.801, pair_rate: 300.0, accidental_rate: 1.0, duration: 100.0, seed: 1 }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("mix_x", self.mix_x, 0.0, 1.0)?;
        if !(self.pair_rate >= 0.0 && self.pair_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("pair_rate must be >= 0, got {}", self.pair_rate)));
        }
        if !(self.accidental_rate >= 0.0 && self.accidental_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("accidental_rate must be >= 0, got {}", self.accidental_rate)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidInput(format!("duration must be > 0, got {}", self.duration)));
        }
        Ok(())
    }
}

/// Output of the two-crystal source: the first crystal's |VV⟩ pairs, fully
/// dephased per photon in the diagonal basis, mixed with |Φ⁻⟩ from the second
/// crystal at weight `mix_x`.
pub fn source_state(config: &SourceConfig) -> Result<DensityMatrix> {
    config.validate()?;
    let vv = DensityMatrix::from_matrix_unchecked(CMatrix::diag_real(&[0.0, 0.0, 0.0, 1.0]));
    let zero = Complex64::new(0.0, 0.0);
    let dephased = dephase_two_photon(&vv, zero, zero, DephasingBasis::Diagonal)?;
    mix(&bell_state(BellKind::PhiMinus).density(), &dephased, config.mix_x)
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    basis: Vec<String>,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let matrix =
            (0..4).map(|i| (0..4).map(|j| [self.matrix[(i, j)].re, self.matrix[(i, j)].im]).collect()).collect();
        DensityMatrixJson { basis: BASIS_LABELS.iter().map(|s| s.to_string()).collect(), matrix }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DensityMatrixJson::deserialize(d)?;
        if raw.basis != BASIS_LABELS {
            return Err(D::Error::custom(format!("basis must be {BASIS_LABELS:?}, got {:?}", raw.basis)));
        }
        if raw.matrix.len() != 4 || raw.matrix.iter().any(|r| r.len() != 4) {
            return Err(D::Error::custom("matrix must be 4x4"));
        }
        let data = raw.matrix.iter().flatten().map(|&[re, im]| Complex64::new(re, im)).collect();
        let m = CMatrix::new(4, 4, data).map_err(D::Error::custom)?;
        DensityMatrix::new(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).max_abs() < tol
    }

    #[test]
    fn bell_amplitudes() {
        let h = FRAC_1_SQRT_2;
        let phi = bell_state(BellKind::PhiMinus);
        assert_eq!(phi.amplitudes().map(|a| a.re), [h, 0.0, 0.0, -h]);
        let psi = bell_state(BellKind::PsiMinus);
        assert_eq!(psi.amplitudes().map(|a| a.re), [0.0, h, -h, 0.0]);
        assert_eq!(bell_state(BellKind::PhiPlus).inner(&phi).norm(), 0.0);
    }

    #[test]
    fn werner_singlet_endpoints() {
        assert!(close(werner_singlet(1.0).unwrap().matrix(), &bell_state(BellKind::PsiMinus).projector(), 1e-15));
        assert!(close(werner_singlet(0.25).unwrap().matrix(), DensityMatrix::maximally_mixed().matrix(), 1e-15));
        assert!(matches!(werner_singlet(1.2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn werner_phi_minus_range() {
        assert!(close(werner_phi_minus(0.0).unwrap().matrix(), DensityMatrix::maximally_mixed().matrix(), 1e-15));
        assert!(werner_phi_minus(-1.0 / 3.0).is_ok());
        assert!(werner_phi_minus(-0.34).is_err());
        assert!(werner_phi_minus(1.0 + 1e-9).is_err());
    }

    #[test]
    fn sigma_x_maps_phi_minus_werner_to_singlet_werner() {
        let i2 = CMatrix::identity(2);
        let rho = werner_phi_minus(0.801).unwrap();
        let out = local_unitary(&rho, &sigma_x(), &i2).unwrap();
        assert!(close(out.matrix(), werner_singlet(0.85075).unwrap().matrix(), 1e-12));
        let pure = local_unitary(&werner_phi_minus(1.0).unwrap(), &sigma_x(), &i2).unwrap();
        assert!(close(pure.matrix(), werner_singlet(1.0).unwrap().matrix(), 1e-12));
        assert!(close(local_unitary(&rho, &i2, &i2).unwrap().matrix(), rho.matrix(), 1e-15));
    }

    #[test]
    fn local_unitary_rejects_non_unitary() {
        let m = CMatrix::diag_real(&[1.0, 2.0]);
        let err = local_unitary(&werner_phi_minus(0.5).unwrap(), &m, &CMatrix::identity(2));
        assert!(matches!(err, Err(Error::NotUnitary(_))));
    }

    #[test]
    fn mix_cases() {
        let a = werner_phi_minus(0.3).unwrap();
        let b = werner_singlet(0.9).unwrap();
        assert!(close(mix(&a, &a, 0.5).unwrap().matrix(), a.matrix(), 1e-15));
        assert!(close(mix(&a, &b, 1.0).unwrap().matrix(), a.matrix(), 1e-15));
        let m = mix(&bell_state(BellKind::PhiMinus).density(), &DensityMatrix::maximally_mixed(), 0.801).unwrap();
        assert!(close(m.matrix(), werner_phi_minus(0.801).unwrap().matrix(), 1e-15));
        assert!(mix(&a, &b, -0.1).is_err());
    }

    #[test]
    fn source_state_matches_werner_family() {
        for x in [0.0, 0.405, 0.801, 1.0] {
            let cfg = SourceConfig { mix_x: x, ..Default::default() };
            let s = source_state(&cfg).unwrap();
            assert!(close(s.matrix(), werner_phi_minus(x).unwrap().matrix(), 1e-14), "x = {x}");
        }
        let bad = SourceConfig { duration: 0.0, ..Default::default() };
        assert!(source_state(&bad).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let rho = werner_phi_minus(0.405).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        assert!(text.starts_with(r#"{"basis":["HH","HV","VH","VV"],"matrix":[[["#));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);

        let not_unit = r#"{"basis":["HH","HV","VH","VV"],"matrix":[[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(not_unit).is_err());
        let bad_basis = text.replace("\"VV\"", "\"XX\"");
        assert!(serde_json::from_str::<DensityMatrix>(&bad_basis).is_err());
    }
}
