//! Numerical tolerances shared by every module and by the test suites.

/// Fixed tolerance record. Use [`TOL`] rather than building your own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max entrywise |h - h†| accepted as Hermitian.
    pub hermitian: f64,
    /// Eigenvalues in `[-psd_clamp, 0)` are treated as zero.
    pub psd_clamp: f64,
    /// Eigendecomposition reconstruction / orthonormality target (Frobenius).
    pub reconstruction: f64,
    /// Max entrywise |u u† - I| accepted as unitary.
    pub unitary: f64,
    /// Unit-trace tolerance for density matrices.
    pub trace: f64,
    /// Floor applied to model probabilities inside likelihood objectives.
    pub probability_floor: f64,
}

pub const TOL: Tolerances = Tolerances {
    hermitian: 1e-8,
    psd_clamp: 1e-9,
    reconstruction: 1e-10,
    unitary: 1e-8,
    trace: 1e-8,
    probability_floor: 1e-12,
};
