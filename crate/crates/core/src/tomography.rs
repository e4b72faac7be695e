//! Density-matrix reconstruction from coincidence counts.
//!
//! Linear inversion solves the 16 Born-rule equations directly and may return
//! a matrix with negative eigenvalues. The maximum-likelihood route searches
//! over ρ = T†T / Tr(T†T) with T lower-triangular, so its output is physical
//! by construction.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{chsh_value, concurrence, fit_werner, linear_entropy, ChshAngles};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::polarimetry::{sample_poisson, AnalyzerSetting, Measurements, PolSpec, QubitRecord};
use crate::qlinalg::{cholesky, herm_eig, kron, pauli, solve_real, CMatrix};
use crate::states::{BellKind, DensityMatrix, QubitState};
use crate::tolerances::TOL;
use crate::{Error, Result};

/// Output of linear inversion: Hermitian and unit-trace, not necessarily PSD.
#[derive(Debug, Clone)]
pub struct LinearReconstruction {
    pub matrix: CMatrix,
    pub min_eigenvalue: f64,
}

impl LinearReconstruction {
    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue >= -TOL.psd_clamp
    }
}

/// Index of each {HH, HV, VV, VH} setting; these four fix the total flux N.
fn normalization_block(settings: &[AnalyzerSetting]) -> Result<[usize; 4]> {
    let mut out = [usize::MAX; 4];
    for (slot, (a, b)) in
        [(PolSpec::H, PolSpec::H), (PolSpec::H, PolSpec::V), (PolSpec::V, PolSpec::V), (PolSpec::V, PolSpec::H)]
            .into_iter()
            .enumerate()
    {
        out[slot] = settings
            .iter()
            .position(|s| s.arm1 == a && s.arm2 == b)
            .ok_or_else(|| Error::InvalidInput(format!("normalization setting {a}{b} missing from schedule")))?;
    }
    Ok(out)
}

/// Total flux N and relative frequencies n_ν / N.
fn frequencies(data: &Measurements) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyData("no measurements"));
    }
    let block = normalization_block(&data.settings)?;
    let n: f64 = block.iter().map(|&i| data.counts[i]).sum();
    if n.is_nan() || n <= 0.0 {
        return Err(Error::EmptyData("normalization block {HH, HV, VV, VH} has zero total count"));
    }
    Ok((n, data.counts.iter().map(|c| c / n).collect()))
}

/// σ_i ⊗ σ_j / 4 for k = 4i + j.
fn pauli_basis() -> Vec<CMatrix> {
    (0..16).map(|k| kron(&pauli(k / 4), &pauli(k % 4)).scale_real(0.25)).collect()
}

pub fn linear_reconstruct(data: &Measurements) -> Result<LinearReconstruction> {
    let (_, freq) = frequencies(data)?;
    let basis = pauli_basis();
    let projectors: Vec<CMatrix> = data.settings.iter().map(|s| s.projector()).collect();
    let rows = projectors.len();
    if rows < 16 {
        return Err(Error::SingularSystem(0.0));
    }
    let design: Vec<f64> = projectors.iter().flat_map(|p| basis.iter().map(move |g| p.trace_product(g).re)).collect();

    let coeffs = if rows == 16 {
        solve_real(&design, &freq)?
    } else {
        // Overdetermined schedules: normal equations.
        let mut ata = vec![0.0; 256];
        let mut atb = vec![0.0; 16];
        for r in 0..rows {
            for i in 0..16 {
                atb[i] += design[r * 16 + i] * freq[r];
                for j in 0..16 {
                    ata[i * 16 + j] += design[r * 16 + i] * design[r * 16 + j];
                }
            }
        }
        solve_real(&ata, &atb)?
    };

    let mut m = CMatrix::zeros(4, 4);
    for (c, g) in coeffs.iter().zip(&basis) {
        m = &m + &g.scale_real(*c);
    }
    let m = m.hermitian_part();
    let tr = m.trace().re;
    if tr.is_nan() || tr.abs() <= 1e-12 {
        return Err(Error::EmptyData("reconstructed trace vanishes"));
    }
    let m = m.scale_real(1.0 / tr);
    let min_eigenvalue = herm_eig(&m)?.min_eigenvalue();
    Ok(LinearReconstruction { matrix: m, min_eigenvalue })
}

/// Likelihood used by [`mle_reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MleObjective {
    /// Σ (N p − n)² / (2 N p).
    #[default]
    Gaussian,
    /// Poisson negative log-likelihood, offset so a perfect fit scores 0.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub objective: MleObjective,
    pub optimizer: NelderMeadOptions,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { objective: MleObjective::Gaussian, optimizer: NelderMeadOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    /// Objective at `rho` in count units.
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each optimizer iteration (count units); empty
    /// unless `optimizer.record_trace` is set.
    pub cost_trace: Vec<f64>,
}

/// Lower-triangular T from 16 reals: four real diagonal entries, then the
/// (re, im) pairs of the sub-diagonals in order.
fn t_matrix(t: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for i in 0..4 {
        m[(i, i)] = Complex64::new(t[i], 0.0);
    }
    let mut k = 4;
    for d in 1..4 {
        for j in 0..(4 - d) {
            m[(j + d, j)] = Complex64::new(t[k], t[k + 1]);
            k += 2;
        }
    }
    m
}

fn t_params(m: &CMatrix) -> Vec<f64> {
    let mut t: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
    for d in 1..4 {
        for j in 0..(4 - d) {
            let z = m[(j + d, j)];
            t.push(z.re);
            t.push(z.im);
        }
    }
    t
}

fn rho_from_t(t: &[f64]) -> CMatrix {
    let tm = t_matrix(t);
    let g = &tm.adjoint() * &tm;
    let tr = g.trace().re;
    if tr > 0.0 {
        g.scale_real(1.0 / tr)
    } else {
        CMatrix::identity(4).scale_real(0.25)
    }
}

/// T with T†T = ρ, after lifting eigenvalues below `floor` to `floor`.
fn t_from_state(rho: &CMatrix, floor: f64) -> Result<Vec<f64>> {
    let eig = herm_eig(&rho.hermitian_part())?;
    let lifted = eig.map_eigenvalues(|l| l.max(floor));
    let lifted = lifted.scale_real(1.0 / lifted.trace().re);
    // Reverse-order Cholesky: with J the exchange matrix, JρJ = CC† gives
    // ρ = (JC†J)†(JC†J) and JC†J is lower-triangular.
    let rev = |m: &CMatrix| CMatrix::from_fn(4, 4, |i, j| m[(3 - i, 3 - j)]);
    let c = cholesky(&rev(&lifted))?;
    Ok(t_params(&rev(&c.adjoint())))
}

struct Likelihood {
    projectors: Vec<CMatrix>,
    freq: Vec<f64>,
    objective: MleObjective,
}

impl Likelihood {
    /// Objective per unit flux (count-scale free).
    fn eval(&self, rho: &CMatrix) -> f64 {
        let floor = TOL.probability_floor;
        self.projectors
            .iter()
            .zip(&self.freq)
            .map(|(p, &f)| {
                let q = rho.trace_product(p).re.max(floor);
                match self.objective {
                    MleObjective::Gaussian => (q - f) * (q - f) / (2.0 * q),
                    MleObjective::Poisson if f > 0.0 => q - f - f * (q / f).ln(),
                    MleObjective::Poisson => q,
                }
            })
            .sum()
    }
}

/// Maximum-likelihood density matrix. Starts from the linear inversion (or
/// `seed`) with eigenvalues lifted to at least 1e-6.
pub fn mle_reconstruct(data: &Measurements, seed: Option<&DensityMatrix>, opts: &MleOptions) -> Result<MleResult> {
    let (n_total, freq) = frequencies(data)?;
    let start = match seed {
        Some(s) => s.matrix().clone(),
        None => linear_reconstruct(data)?.matrix,
    };
    let t0 = t_from_state(&start, 1e-6)?;
    let lik = Likelihood {
        projectors: data.settings.iter().map(|s| s.projector()).collect(),
        freq,
        objective: opts.objective,
    };

    let result = nelder_mead(|t| lik.eval(&rho_from_t(t)), &t0, &opts.optimizer);
    let rho = rho_from_t(&result.x).hermitian_part();
    Ok(MleResult {
        rho: DensityMatrix::from_matrix_unchecked(rho),
        cost: result.value * n_total,
        iterations: result.iterations,
        evaluations: result.evaluations,
        converged: result.converged,
        cost_trace: result.trace.iter().map(|v| v * n_total).collect(),
    })
}

/// Objective of [`mle_reconstruct`] evaluated at an arbitrary Hermitian matrix.
pub fn likelihood_cost(data: &Measurements, rho: &CMatrix, objective: MleObjective) -> Result<f64> {
    let (n_total, freq) = frequencies(data)?;
    let lik = Likelihood { projectors: data.settings.iter().map(|s| s.projector()).collect(), freq, objective };
    Ok(lik.eval(rho) * n_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
}

/// Summary emitted next to every reconstructed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub method: Method,
    pub min_eigenvalue: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Single-photon counts for the H, V, D and R analyzers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitCounts {
    pub h: f64,
    pub v: f64,
    pub d: f64,
    pub r: f64,
}

impl QubitCounts {
    pub fn from_pairs(pairs: &[(PolSpec, f64)]) -> Result<Self> {
        let get = |b: PolSpec| {
            pairs
                .iter()
                .find(|(s, _)| *s == b)
                .map(|(_, c)| *c)
                .ok_or_else(|| Error::InvalidInput(format!("single-qubit data missing basis {b}")))
        };
        Ok(Self { h: get(PolSpec::H)?, v: get(PolSpec::V)?, d: get(PolSpec::D)?, r: get(PolSpec::R)? })
    }

    pub fn from_records(records: &[QubitRecord]) -> Result<Self> {
        let pairs: Vec<(PolSpec, f64)> = records.iter().map(|r| (r.basis, r.count as f64)).collect();
        Self::from_pairs(&pairs)
    }
}

/// Largest eigenvalue excursion outside [0, 1] that is silently repaired.
pub const QUBIT_CLAMP_THRESHOLD: f64 = 0.05;

/// Stokes inversion ρ = ½(I + s₁σx + s₂σy + s₃σz).
pub fn single_qubit_reconstruct(counts: &QubitCounts) -> Result<QubitState> {
    let total = counts.h + counts.v;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyData("H + V counts are zero"));
    }
    let sz = (counts.h - counts.v) / total;
    let sx = 2.0 * counts.d / total - 1.0;
    // With R = (|H⟩ − i|V⟩)/√2, P(R) = (1 − s_y)/2.
    let sy = 1.0 - 2.0 * counts.r / total;
    let m =
        &(&(&CMatrix::identity(2) + &pauli(1).scale_real(sx)) + &pauli(2).scale_real(sy)) + &pauli(3).scale_real(sz);
    let m = m.scale_real(0.5);

    let eig = herm_eig(&m)?;
    let excess = eig.eigenvalues.iter().map(|&l| (l - 1.0).max(-l).max(0.0)).fold(0.0, f64::max);
    if excess > QUBIT_CLAMP_THRESHOLD {
        return Err(Error::Unphysical(excess));
    }
    if excess > 0.0 {
        let fixed = eig.map_eigenvalues(|l| l.clamp(0.0, 1.0));
        let tr = fixed.trace().re;
        return Ok(QubitState::from_matrix_unchecked(fixed.scale_real(1.0 / tr).hermitian_part()));
    }
    Ok(QubitState::from_matrix_unchecked(m))
}

/// How bootstrap replicas perturb the observed counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    /// Each count redrawn as Poisson(observed).
    Poisson,
    /// Counts reused unchanged; every replica is identical.
    Identity,
}

/// Standard deviations of the derived quantities across replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapErrors {
    pub n_replicas: usize,
    pub x: f64,
    pub fidelity: f64,
    pub linear_entropy: f64,
    pub tangle: f64,
    pub chsh: f64,
}

#[derive(Debug, Clone, Copy)]
struct ReplicaMetrics {
    x: f64,
    fidelity: f64,
    linear_entropy: f64,
    tangle: f64,
    chsh: f64,
}

/// Monte-Carlo error bars: resample, reconstruct by MLE, recompute metrics.
/// Replica `i` draws from a ChaCha stream `(seed, i)` so results do not depend
/// on scheduling.
pub fn bootstrap_errors(
    data: &Measurements,
    n_replicas: usize,
    seed: u64,
    resample: Resample,
    target: BellKind,
    angles: &ChshAngles,
    opts: &MleOptions,
) -> Result<BootstrapErrors> {
    if n_replicas < 2 {
        return Err(Error::InvalidInput(format!("bootstrap needs at least 2 replicas, got {n_replicas}")));
    }
    let replicas: Vec<ReplicaMetrics> = (0..n_replicas)
        .into_par_iter()
        .map(|i| {
            let counts = match resample {
                Resample::Identity => data.counts.clone(),
                Resample::Poisson => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    data.counts.iter().map(|&c| sample_poisson(c, &mut rng) as f64).collect()
                }
            };
            let replica = Measurements::new(data.settings.clone(), counts)?;
            let rho = mle_reconstruct(&replica, None, opts)?.rho;
            let fit = fit_werner(&rho, target)?;
            let c = concurrence(&rho)?;
            Ok(ReplicaMetrics {
                x: fit.x,
                fidelity: fit.fidelity,
                linear_entropy: linear_entropy(&rho),
                tangle: c * c,
                chsh: chsh_value(&rho, angles),
            })
        })
        .collect::<Result<_>>()?;

    let sd = |f: fn(&ReplicaMetrics) -> f64| std_dev(&replicas.iter().map(f).collect::<Vec<_>>());
    Ok(BootstrapErrors {
        n_replicas,
        x: sd(|r| r.x),
        fidelity: sd(|r| r.fidelity),
        linear_entropy: sd(|r| r.linear_entropy),
        tangle: sd(|r| r.tangle),
        chsh: sd(|r| r.chsh),
    })
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
