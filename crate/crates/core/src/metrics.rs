//! Entanglement and nonlocality figures of merit: concurrence,
//! entanglement of formation, fidelity, and the maximal CHSH value with
//! the analyzer settings that achieve it.

use crate::qmath::{
    binary_entropy, hermitian_eig, kron, matvec, outer, sigma_x, sigma_y, sigma_z, BlochVector,
    ComplexMatrix, C64,
};
use thiserror::Error;

/// Hermiticity and trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a density matrix.
pub const DENSITY_EIG_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("density matrix must be 2x2 or 4x4, got {rows}x{cols}")]
    UnsupportedDimension { rows: usize, cols: usize },
    #[error("density matrix is not Hermitian: max|A - A^H| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("density matrix trace is {trace:.12}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("density matrix has eigenvalue {min_eigenvalue:.3e} below tolerance")]
    NotPositive { min_eigenvalue: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operation requires a {expected}-dimensional state, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("concurrence {value} outside [0, 1]")]
    ConcurrenceOutOfRange { value: f64 },
    #[error("state vector is not normalized: |v| = {norm:.12}")]
    UnnormalizedState { norm: f64 },
}

/// Validated Hermitian, unit-trace, positive-semidefinite operator on one
/// or two polarization qubits. The stored matrix is symmetrized so that
/// downstream eigensolves never see round-off asymmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self, MetricsError> {
        let (rows, cols) = (matrix.rows(), matrix.cols());
        if rows != cols || (rows != 2 && rows != 4) {
            return Err(MetricsError::UnsupportedDimension { rows, cols });
        }
        let deviation = matrix.hermiticity_error();
        if deviation > DENSITY_TOL {
            return Err(MetricsError::NotHermitian { deviation });
        }
        let matrix = matrix.hermitized();
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > DENSITY_TOL {
            return Err(MetricsError::TraceNotOne { trace });
        }
        let eig = hermitian_eig(&matrix).expect("hermitized matrix");
        let min_eigenvalue = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -DENSITY_EIG_TOL {
            return Err(MetricsError::NotPositive { min_eigenvalue });
        }
        Ok(Self { dim: rows, matrix })
    }

    /// Projector onto a normalized pure state of 2 or 4 components.
    pub fn from_pure(state: &[C64]) -> Result<Self, MetricsError> {
        let norm = crate::qmath::vec_norm(state);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(MetricsError::UnnormalizedState { norm });
        }
        Self::new(outer(state))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, MetricsError> {
        Self::new(ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Expectation value of a Hermitian observable, `Tr[rho O]`.
    pub fn expectation(&self, observable: &ComplexMatrix) -> f64 {
        self.matrix.matmul(observable).trace().re
    }
}

/// Concurrence together with the entanglement of formation it implies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntanglementReport {
    pub concurrence: f64,
    pub e_formation: f64,
}

/// Eigenvalues below this fraction of the largest one are round-off dust
/// from rank-deficient inputs; treating them as exact zeros keeps their
/// square roots from amplifying 1e-16 noise into 1e-8 errors.
const SPECTRAL_FLOOR: f64 = 1e-13;

fn floored(lambda: f64, lambda_max: f64) -> f64 {
    if lambda <= lambda_max * SPECTRAL_FLOOR {
        0.0
    } else {
        lambda
    }
}

/// Square root of a Hermitian PSD-up-to-noise matrix with negative and
/// dust eigenvalues clipped to zero. Density matrices tolerate slightly
/// more negativity than [`crate::qmath::psd_sqrt`] accepts, so the clip
/// is done locally.
fn clipped_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    let eig = hermitian_eig(&m.hermitized()).expect("hermitized matrix");
    let lambda_max = eig.values[0].max(0.0);
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let root = floored(lambda, lambda_max).sqrt();
        if root == 0.0 {
            continue;
        }
        let v: Vec<C64> = (0..n).map(|i| eig.vectors.get(i, k)).collect();
        out = out.add(&outer(&v).scale_re(root));
    }
    out
}

/// Wootters concurrence of a two-qubit state, computed through the
/// Hermitian product sqrt(rho) * rho_tilde * sqrt(rho) so that the
/// eigensolver only ever sees Hermitian input.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64, MetricsError> {
    if rho.dim() != 4 {
        return Err(MetricsError::WrongDimension {
            expected: 4,
            got: rho.dim(),
        });
    }
    let yy = kron(&sigma_y(), &sigma_y());
    let rho_tilde = yy.matmul(&rho.matrix().conjugate()).matmul(&yy);
    let s = clipped_sqrt(rho.matrix());
    let m = s.matmul(&rho_tilde).matmul(&s);
    let eig = hermitian_eig(&m.hermitized()).expect("hermitized matrix");
    let lambda_max = eig.values[0].max(0.0);
    let lambdas: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| floored(l, lambda_max).sqrt())
        .collect();
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.clamp(0.0, 1.0))
}

/// Entanglement of formation from concurrence:
/// `h((1 + sqrt(1 - c^2)) / 2)` with `h` the binary entropy.
pub fn entanglement_of_formation(c: f64) -> Result<f64, MetricsError> {
    if !(-1e-12..=1.0 + 1e-12).contains(&c) {
        return Err(MetricsError::ConcurrenceOutOfRange { value: c });
    }
    let c = c.clamp(0.0, 1.0);
    Ok(binary_entropy((1.0 + (1.0 - c * c).sqrt()) / 2.0))
}

/// Concurrence and entanglement of formation in one report.
pub fn entanglement_report(rho: &DensityMatrix) -> Result<EntanglementReport, MetricsError> {
    let concurrence = concurrence(rho)?;
    let e_formation = entanglement_of_formation(concurrence)?;
    Ok(EntanglementReport {
        concurrence,
        e_formation,
    })
}

/// Fidelity against a pure target: `<phi| rho |phi>`.
pub fn fidelity_to_pure(rho: &DensityMatrix, phi: &[C64]) -> Result<f64, MetricsError> {
    if phi.len() != rho.dim() {
        return Err(MetricsError::DimensionMismatch {
            left: rho.dim(),
            right: phi.len(),
        });
    }
    let rho_phi = matvec(rho.matrix(), phi);
    Ok(crate::qmath::inner(phi, &rho_phi).re.clamp(0.0, 1.0))
}

/// Uhlmann fidelity between two mixed states,
/// `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, MetricsError> {
    if rho.dim() != sigma.dim() {
        return Err(MetricsError::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let s = clipped_sqrt(rho.matrix());
    let m = s.matmul(sigma.matrix()).matmul(&s);
    let eig = hermitian_eig(&m.hermitized()).expect("hermitized matrix");
    let lambda_max = eig.values[0].max(0.0);
    let tr: f64 = eig
        .values
        .iter()
        .map(|&l| floored(l, lambda_max).sqrt())
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// The four analyzer axes of a CHSH evaluation: first-side pair (a, a')
/// and second-side pair (b, b').
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshSettings {
    pub a: BlochVector,
    pub a_prime: BlochVector,
    pub b: BlochVector,
    pub b_prime: BlochVector,
}

/// Maximal CHSH value and the settings achieving it.
#[derive(Clone, Debug, PartialEq)]
pub struct ChshResult {
    pub s_value: f64,
    pub settings: ChshSettings,
}

impl ChshResult {
    /// Evaluates `E(a,b) + E(a,b') + E(a',b) - E(a',b')` on a state,
    /// the explicit correlator combination behind `s_value`.
    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<f64, MetricsError> {
        let s = &self.settings;
        Ok(correlation(rho, &s.a, &s.b)?
            + correlation(rho, &s.a, &s.b_prime)?
            + correlation(rho, &s.a_prime, &s.b)?
            - correlation(rho, &s.a_prime, &s.b_prime)?)
    }
}

/// Two-qubit correlator `Tr[rho (a.sigma) x (b.sigma)]`.
pub fn correlation(
    rho: &DensityMatrix,
    a: &BlochVector,
    b: &BlochVector,
) -> Result<f64, MetricsError> {
    if rho.dim() != 4 {
        return Err(MetricsError::WrongDimension {
            expected: 4,
            got: rho.dim(),
        });
    }
    Ok(rho.expectation(&kron(&a.operator(), &b.operator())))
}

/// Correlation matrix `T_ij = Tr[rho sigma_i x sigma_j]`, i, j in {x,y,z}.
fn correlation_matrix(rho: &DensityMatrix) -> [[f64; 3]; 3] {
    let sigmas = [sigma_x(), sigma_y(), sigma_z()];
    let mut t = [[0.0; 3]; 3];
    for (i, si) in sigmas.iter().enumerate() {
        for (j, sj) in sigmas.iter().enumerate() {
            t[i][j] = rho.expectation(&kron(si, sj));
        }
    }
    t
}

fn mat3_vec(t: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += t[i][j] * v[j];
        }
    }
    out
}

fn any_orthogonal(a: &BlochVector) -> BlochVector {
    let candidate = if a.x().abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let cross = [
        a.y() * candidate[2] - a.z() * candidate[1],
        a.z() * candidate[0] - a.x() * candidate[2],
        a.x() * candidate[1] - a.y() * candidate[0],
    ];
    BlochVector::normalized(cross[0], cross[1], cross[2])
        .expect("cross product of non-parallel unit vectors")
}

/// Maximal CHSH value `2 sqrt(u1 + u2)` from the two largest eigenvalues
/// of `T^T T` together with settings that attain it: the second-side axes
/// mix the two principal directions, the first-side axes follow their
/// images under `T`.
pub fn chsh_max(rho: &DensityMatrix) -> Result<ChshResult, MetricsError> {
    if rho.dim() != 4 {
        return Err(MetricsError::WrongDimension {
            expected: 4,
            got: rho.dim(),
        });
    }
    let t = correlation_matrix(rho);
    let mut m = ComplexMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            let v: f64 = (0..3).map(|k| t[k][i] * t[k][j]).sum();
            m.set(i, j, C64::new(v, 0.0));
        }
    }
    let eig = hermitian_eig(&m).expect("real symmetric 3x3");
    let u1 = eig.values[0].max(0.0);
    let u2 = eig.values[1].max(0.0);
    let col = |k: usize| {
        [
            eig.vectors.get(0, k).re,
            eig.vectors.get(1, k).re,
            eig.vectors.get(2, k).re,
        ]
    };
    let c1 = col(0);
    let c2 = col(1);

    let tc1 = mat3_vec(&t, c1);
    let a = BlochVector::normalized(tc1[0], tc1[1], tc1[2]).unwrap_or_else(BlochVector::z_axis);
    let tc2 = mat3_vec(&t, c2);
    let a_prime =
        BlochVector::normalized(tc2[0], tc2[1], tc2[2]).unwrap_or_else(|| any_orthogonal(&a));

    let theta = u2.sqrt().atan2(u1.sqrt().max(1e-300));
    let (s, c) = theta.sin_cos();
    let mix = |sign: f64| {
        BlochVector::normalized(
            c * c1[0] + sign * s * c2[0],
            c * c1[1] + sign * s * c2[1],
            c * c1[2] + sign * s * c2[2],
        )
        .unwrap_or_else(BlochVector::z_axis)
    };
    let b = mix(1.0);
    let b_prime = mix(-1.0);

    Ok(ChshResult {
        s_value: 2.0 * (u1 + u2).sqrt(),
        settings: ChshSettings {
            a,
            a_prime,
            b,
            b_prime,
        },
    })
}
