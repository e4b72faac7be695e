//! Bundled measured density matrices used as regression data.
//!
//! Entries carry four-decimal rounding, so loading takes the upper triangle,
//! conjugates it into the lower one and renormalizes the trace.

use serde::Deserialize;

use crate::qlinalg::CMatrix;
use crate::states::{DensityMatrix, BASIS_LABELS};
use crate::{Complex64, Error, Result};

const RHO1_JSON: &str = include_str!("../fixtures/rho1.json");
const RHO2_JSON: &str = include_str!("../fixtures/rho2.json");

#[derive(Deserialize)]
struct Printed {
    basis: Vec<String>,
    matrix: Vec<Vec<[f64; 2]>>,
}

/// Parses a printed (possibly rounded) density matrix in the density-matrix
/// JSON layout, trusting only its upper triangle.
pub fn from_printed_json(json: &str) -> Result<DensityMatrix> {
    let p: Printed = serde_json::from_str(json).map_err(|e| Error::InvalidInput(e.to_string()))?;
    if p.basis != BASIS_LABELS {
        return Err(Error::InvalidInput(format!("basis must be {BASIS_LABELS:?}")));
    }
    if p.matrix.len() != 4 || p.matrix.iter().any(|r| r.len() != 4) {
        return Err(Error::DimensionMismatch { expected: "4x4".into(), got: format!("{} rows", p.matrix.len()) });
    }
    let data = p.matrix.iter().flatten().map(|&[re, im]| Complex64::new(re, im)).collect();
    DensityMatrix::from_upper_triangle(&CMatrix::new(4, 4, data)?)
}

/// First output state (fit x ≈ 0.801).
pub fn rho1() -> DensityMatrix {
    from_printed_json(RHO1_JSON).expect("bundled fixture rho1 is valid")
}

/// Second output state (fit x ≈ 0.405).
pub fn rho2() -> DensityMatrix {
    from_printed_json(RHO2_JSON).expect("bundled fixture rho2 is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load_as_states() {
        for rho in [rho1(), rho2()] {
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
            assert!(rho.eigen().min_eigenvalue() > -1e-9);
        }
        assert!((rho1().matrix()[(0, 3)].re + 0.3476).abs() < 1e-12);
    }
}
