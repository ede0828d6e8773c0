//! State and process reconstruction from measured counts: linear
//! inversion from Pauli expectation values with projection onto the
//! physical (PSD, unit-trace) cone, an optional iterative
//! maximum-likelihood refinement, chi-matrix process tomography, and
//! Poisson-resampled error bars.

use crate::measurement::{CountRecord, MeasurementError, MeasurementSetting};
use crate::metrics::{DensityMatrix, MetricsError};
use crate::qmath::{hermitian_eig, kron, outer, ComplexMatrix, MatrixJson, PauliBasis, C64};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("unsupported reconstruction dimension {0}; expected 2 or 4")]
    BadDim(usize),
    #[error("no records supplied")]
    NoRecords,
    #[error("setting '{label}' is {kind}-sided but the reconstruction dimension is {dim}")]
    SettingKind {
        label: String,
        kind: &'static str,
        dim: usize,
    },
    #[error("record for setting '{label}' has {got} outcomes, expected {expected}")]
    MalformedRecord {
        label: String,
        got: usize,
        expected: usize,
    },
    #[error("record for setting '{label}' has zero total counts")]
    EmptyRecord { label: String },
    #[error("settings do not span the operator basis; missing directions: {missing:?}")]
    RankDeficient { missing: Vec<String> },
    #[error("need at least 100 bootstrap resamples, got {0}")]
    TooFewResamples(usize),
    #[error("all {0} bootstrap resamples failed")]
    AllResamplesFailed(usize),
    #[error("process tomography needs single-qubit pairs, got {in_dim}x{out_dim}")]
    ProcessNeedsQubits { in_dim: usize, out_dim: usize },
    #[error("input states are informationally incomplete")]
    InformationallyIncomplete,
    #[error("chi matrix is not Hermitian: max|A - A^H| = {deviation:.3e}")]
    ChiNotHermitian { deviation: f64 },
    #[error(transparent)]
    Qmath(#[from] crate::qmath::QmathError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reconstructed state plus bookkeeping.
#[derive(Clone, Debug)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    pub fidelity_vs_target: Option<f64>,
    pub error_bar: Option<f64>,
    pub n_settings: usize,
}

impl TomographyResult {
    pub fn with_target_state(mut self, target: &[C64]) -> Result<Self, TomographyError> {
        self.fidelity_vs_target = Some(crate::metrics::fidelity_to_pure(&self.rho, target)?);
        Ok(self)
    }

    pub fn with_error_bar(mut self, error_bar: f64) -> Self {
        self.error_bar = Some(error_bar);
        self
    }
}

/// Reconstruction estimator. Linear inversion is the default; the
/// iterative fixed point (R rho R) is available for robustness studies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    LinearInversion,
    MaxLikelihood { max_iters: usize, tol: f64 },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::LinearInversion
    }
}

impl Estimator {
    pub fn max_likelihood() -> Self {
        Estimator::MaxLikelihood {
            max_iters: 500,
            tol: 1e-10,
        }
    }
}

const PAULI_AXIS_LABELS: [&str; 3] = ["X", "Y", "Z"];

fn axis_components(v: &crate::qmath::BlochVector) -> [f64; 3] {
    [v.x(), v.y(), v.z()]
}

fn single_labels() -> Vec<String> {
    PAULI_AXIS_LABELS.iter().map(|s| s.to_string()).collect()
}

fn joint_labels() -> Vec<String> {
    let mut labels = Vec::with_capacity(15);
    for a in PAULI_AXIS_LABELS {
        labels.push(format!("{a}I"));
    }
    for b in PAULI_AXIS_LABELS {
        labels.push(format!("I{b}"));
    }
    for a in PAULI_AXIS_LABELS {
        for b in PAULI_AXIS_LABELS {
            labels.push(format!("{a}{b}"));
        }
    }
    labels
}

fn validate_record(rec: &CountRecord, dim: usize) -> Result<(), TomographyError> {
    let label = rec.setting.label().to_string();
    let expected = rec.setting.n_outcomes();
    if rec.counts.len() != expected {
        return Err(TomographyError::MalformedRecord {
            label,
            got: rec.counts.len(),
            expected,
        });
    }
    match (&rec.setting, dim) {
        (MeasurementSetting::Single { .. }, 2) | (MeasurementSetting::Joint { .. }, 4) => {}
        (MeasurementSetting::Single { .. }, _) => {
            return Err(TomographyError::SettingKind {
                label,
                kind: "one",
                dim,
            })
        }
        (MeasurementSetting::Joint { .. }, _) => {
            return Err(TomographyError::SettingKind {
                label,
                kind: "two",
                dim,
            })
        }
    }
    if rec.total() == 0 {
        return Err(TomographyError::EmptyRecord { label });
    }
    Ok(())
}

/// Solves the normal equations of an unweighted least-squares problem by
/// eigendecomposition, reporting null directions by name when the design
/// does not span the unknowns.
fn solve_normal_equations(
    rows: &[(Vec<f64>, f64)],
    labels: &[String],
) -> Result<Vec<f64>, TomographyError> {
    let n = labels.len();
    let mut m = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for (coeffs, value) in rows {
        for i in 0..n {
            if coeffs[i] == 0.0 {
                continue;
            }
            rhs[i] += coeffs[i] * value;
            for j in 0..n {
                m[i][j] += coeffs[i] * coeffs[j];
            }
        }
    }
    let cm = ComplexMatrix::from_fn(n, n, |i, j| C64::new(m[i][j], 0.0));
    let eig = hermitian_eig(&cm).expect("normal matrix is symmetric");
    let lambda_max = eig.values[0].max(0.0);
    let threshold = lambda_max * 1e-10;

    let mut missing: Vec<String> = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda > threshold && lambda_max > 0.0 {
            continue;
        }
        let comps: Vec<f64> = (0..n).map(|i| eig.vectors.get(i, k).re.abs()).collect();
        let peak = comps.iter().cloned().fold(0.0, f64::max);
        for (i, &c) in comps.iter().enumerate() {
            if c > 0.5 * peak {
                missing.push(labels[i].clone());
            }
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(TomographyError::RankDeficient { missing });
    }

    let mut x = vec![0.0; n];
    for (k, &lambda) in eig.values.iter().enumerate() {
        let vk: Vec<f64> = (0..n).map(|i| eig.vectors.get(i, k).re).collect();
        let proj: f64 = (0..n).map(|i| vk[i] * rhs[i]).sum();
        let w = proj / lambda;
        for i in 0..n {
            x[i] += w * vk[i];
        }
    }
    Ok(x)
}

/// Linear inversion from normalized frequencies to Pauli expectation
/// values, assembled into a unit-trace Hermitian matrix. The result is
/// generally not yet positive; see [`psd_project`].
pub fn linear_inversion(
    records: &[CountRecord],
    dim: usize,
) -> Result<ComplexMatrix, TomographyError> {
    if dim != 2 && dim != 4 {
        return Err(TomographyError::BadDim(dim));
    }
    if records.is_empty() {
        return Err(TomographyError::NoRecords);
    }
    for rec in records {
        validate_record(rec, dim)?;
    }

    let basis = PauliBasis::new();
    if dim == 2 {
        let labels = single_labels();
        let mut rows = Vec::with_capacity(records.len());
        for rec in records {
            let MeasurementSetting::Single { axis, .. } = &rec.setting else {
                unreachable!()
            };
            let n = rec.total() as f64;
            let e = (rec.counts[0] as f64 - rec.counts[1] as f64) / n;
            rows.push((axis_components(axis).to_vec(), e));
        }
        let r = solve_normal_equations(&rows, &labels)?;
        let mut rho = ComplexMatrix::identity(2);
        for (i, &ri) in r.iter().enumerate() {
            rho = rho.add(&basis.get(i + 1).scale_re(ri));
        }
        return Ok(rho.scale_re(0.5));
    }

    let labels = joint_labels();
    let mut rows = Vec::with_capacity(3 * records.len());
    for rec in records {
        let MeasurementSetting::Joint { left, right, .. } = &rec.setting else {
            unreachable!()
        };
        let n = rec.total() as f64;
        let f: Vec<f64> = rec.counts.iter().map(|&c| c as f64 / n).collect();
        let e_corr = f[0] - f[1] - f[2] + f[3];
        let e_left = f[0] + f[1] - f[2] - f[3];
        let e_right = f[0] - f[1] + f[2] - f[3];
        let a = axis_components(left);
        let b = axis_components(right);

        let mut corr_row = vec![0.0; 15];
        for i in 0..3 {
            for j in 0..3 {
                corr_row[6 + 3 * i + j] = a[i] * b[j];
            }
        }
        rows.push((corr_row, e_corr));

        let mut left_row = vec![0.0; 15];
        left_row[..3].copy_from_slice(&a);
        rows.push((left_row, e_left));

        let mut right_row = vec![0.0; 15];
        right_row[3..6].copy_from_slice(&b);
        rows.push((right_row, e_right));
    }
    let t = solve_normal_equations(&rows, &labels)?;

    let mut rho = ComplexMatrix::identity(4);
    for i in 0..3 {
        rho = rho.add(&kron(basis.get(i + 1), basis.get(0)).scale_re(t[i]));
        rho = rho.add(&kron(basis.get(0), basis.get(i + 1)).scale_re(t[3 + i]));
        for j in 0..3 {
            rho = rho.add(&kron(basis.get(i + 1), basis.get(j + 1)).scale_re(t[6 + 3 * i + j]));
        }
    }
    Ok(rho.scale_re(0.25))
}

/// Projects a Hermitian unit-trace estimate onto the PSD cone by
/// clipping negative eigenvalues at zero and renormalizing the trace.
/// Also reports the total clipped eigenvalue mass.
pub fn psd_project(raw: &ComplexMatrix) -> Result<(DensityMatrix, f64), TomographyError> {
    let eig = hermitian_eig(&raw.hermitized()).expect("hermitized matrix");
    let n = raw.rows();
    let clipped_mass: f64 = eig.values.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let mut acc = ComplexMatrix::zeros(n, n);
    let mut trace = 0.0;
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v: Vec<C64> = (0..n).map(|i| eig.vectors.get(i, k)).collect();
        acc = acc.add(&outer(&v).scale_re(lambda));
        trace += lambda;
    }
    let rho = DensityMatrix::new(acc.scale_re(1.0 / trace))?;
    Ok((rho, clipped_mass))
}

/// Full state tomography with the default linear-inversion estimator.
pub fn state_tomography(
    records: &[CountRecord],
    dim: usize,
) -> Result<TomographyResult, TomographyError> {
    state_tomography_with(records, dim, Estimator::default())
}

/// State tomography with an explicit estimator choice.
pub fn state_tomography_with(
    records: &[CountRecord],
    dim: usize,
    estimator: Estimator,
) -> Result<TomographyResult, TomographyError> {
    let raw = linear_inversion(records, dim)?;
    let (rho, _) = psd_project(&raw)?;
    let rho = match estimator {
        Estimator::LinearInversion => rho,
        Estimator::MaxLikelihood { max_iters, tol } => {
            ml_refine(records, dim, rho, max_iters, tol)?
        }
    };
    Ok(TomographyResult {
        rho,
        fidelity_vs_target: None,
        error_bar: None,
        n_settings: records.len(),
    })
}

fn record_projectors(rec: &CountRecord) -> Vec<ComplexMatrix> {
    match &rec.setting {
        MeasurementSetting::Single { axis, .. } => {
            let (p, m) = axis.projectors();
            vec![p, m]
        }
        MeasurementSetting::Joint { left, right, .. } => {
            let (lp, lm) = left.projectors();
            let (rp, rm) = right.projectors();
            vec![
                kron(&lp, &rp),
                kron(&lp, &rm),
                kron(&lm, &rp),
                kron(&lm, &rm),
            ]
        }
    }
}

/// Iterative R rho R fixed point seeded by the linear-inversion estimate.
fn ml_refine(
    records: &[CountRecord],
    dim: usize,
    start: DensityMatrix,
    max_iters: usize,
    tol: f64,
) -> Result<DensityMatrix, TomographyError> {
    let mut projectors = Vec::new();
    let mut freqs = Vec::new();
    let grand_total: u64 = records.iter().map(|r| r.total()).sum();
    for rec in records {
        for (k, proj) in record_projectors(rec).into_iter().enumerate() {
            projectors.push(proj);
            freqs.push(rec.counts[k] as f64 / grand_total as f64);
        }
    }

    let mut rho = start.matrix().clone();
    for _ in 0..max_iters {
        let mut r = ComplexMatrix::zeros(dim, dim);
        for (proj, &f) in projectors.iter().zip(&freqs) {
            if f == 0.0 {
                continue;
            }
            let p = rho.matmul(proj).trace().re.max(1e-12);
            r = r.add(&proj.scale_re(f / p));
        }
        let next = r.matmul(&rho).matmul(&r);
        let next = next.scale_re(1.0 / next.trace().re).hermitized();
        let delta = next.max_abs_diff(&rho);
        rho = next;
        if delta < tol {
            break;
        }
    }
    Ok(psd_project(&rho)?.0)
}

/// One-standard-deviation bootstrap summary of a scalar estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBarReport {
    pub std_dev: f64,
    pub n_used: usize,
    pub n_failed: usize,
}

/// Parametric bootstrap: every count is resampled as Poisson(observed),
/// the estimator is re-run, and the sample standard deviation of the
/// surviving resamples is reported. Failed resamples are dropped and
/// counted.
pub fn error_bars<F>(
    records: &[CountRecord],
    estimator: F,
    n_resamples: usize,
    seed: u64,
) -> Result<ErrorBarReport, TomographyError>
where
    F: Fn(&[CountRecord]) -> Result<f64, TomographyError>,
{
    if n_resamples < 100 {
        return Err(TomographyError::TooFewResamples(n_resamples));
    }
    let mut values = Vec::with_capacity(n_resamples);
    let mut n_failed = 0usize;
    for k in 0..n_resamples {
        let mut rng =
            crate::measurement::rng_from_seed(crate::measurement::derive_seed(seed, k as u64));
        let resampled: Vec<CountRecord> = records
            .iter()
            .map(|rec| {
                let counts = rec
                    .counts
                    .iter()
                    .map(|&c| {
                        if c == 0 {
                            0
                        } else {
                            use rand_distr::Distribution;
                            rand_distr::Poisson::new(c as f64)
                                .expect("positive rate")
                                .sample(&mut rng) as u64
                        }
                    })
                    .collect();
                CountRecord {
                    setting: rec.setting.clone(),
                    counts,
                    total_expected: rec.total_expected,
                }
            })
            .collect();
        match estimator(&resampled) {
            Ok(v) => values.push(v),
            Err(_) => n_failed += 1,
        }
    }
    if values.is_empty() {
        return Err(TomographyError::AllResamplesFailed(n_resamples));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(ErrorBarReport {
        std_dev: var.sqrt(),
        n_used: values.len(),
        n_failed,
    })
}

/// 4x4 chi matrix in the Pauli basis characterizing a single-qubit
/// channel via `rho_out = sum_ij chi_ij sigma_i rho_in sigma_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    chi: ComplexMatrix,
}

impl ProcessMatrix {
    pub fn new(chi: ComplexMatrix) -> Result<Self, TomographyError> {
        let deviation = chi.hermiticity_error();
        if chi.rows() != 4 || chi.cols() != 4 {
            return Err(TomographyError::BadDim(chi.rows()));
        }
        if deviation > 1e-10 {
            return Err(TomographyError::ChiNotHermitian { deviation });
        }
        Ok(Self {
            chi: chi.hermitized(),
        })
    }

    pub fn chi(&self) -> &ComplexMatrix {
        &self.chi
    }

    /// Overlap with the identity process; 1 for a perfect channel.
    pub fn process_fidelity(&self) -> f64 {
        self.chi.get(0, 0).re
    }

    /// max|sum_ij chi_ij sigma_j sigma_i - I|; zero for a
    /// trace-preserving channel.
    pub fn tp_error(&self) -> f64 {
        let basis = PauliBasis::new();
        let mut acc = ComplexMatrix::zeros(2, 2);
        for i in 0..4 {
            for j in 0..4 {
                let prod = basis.get(j).matmul(basis.get(i)).scale(self.chi.get(i, j));
                acc = acc.add(&prod);
            }
        }
        acc.max_abs_diff(&ComplexMatrix::identity(2))
    }

    /// Applies the channel to a state.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix, TomographyError> {
        let basis = PauliBasis::new();
        let mut acc = ComplexMatrix::zeros(2, 2);
        for i in 0..4 {
            for j in 0..4 {
                let c = self.chi.get(i, j);
                if c == C64::ZERO {
                    continue;
                }
                acc = acc.add(
                    &basis
                        .get(i)
                        .matmul(rho.matrix())
                        .matmul(basis.get(j))
                        .scale(c),
                );
            }
        }
        Ok(psd_project(&acc.scale_re(1.0 / acc.trace().re))?.0)
    }
}

/// Hermitian parameter basis for chi: the four diagonal units followed by
/// the symmetric and antisymmetric combinations of each off-diagonal pair.
fn chi_parameter_basis() -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(16);
    for i in 0..4 {
        let mut m = ComplexMatrix::zeros(4, 4);
        m.set(i, i, C64::ONE);
        basis.push(m);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut sym = ComplexMatrix::zeros(4, 4);
            sym.set(i, j, C64::ONE);
            sym.set(j, i, C64::ONE);
            basis.push(sym);
            let mut anti = ComplexMatrix::zeros(4, 4);
            anti.set(i, j, C64::I);
            anti.set(j, i, -C64::I);
            basis.push(anti);
        }
    }
    basis
}

/// Least-squares chi-matrix reconstruction from (input, output) state
/// pairs, with Hermiticity built into the parameterization. The input
/// set must be informationally complete.
pub fn process_tomography(
    pairs: &[(DensityMatrix, DensityMatrix)],
) -> Result<ProcessMatrix, TomographyError> {
    if pairs.is_empty() {
        return Err(TomographyError::NoRecords);
    }
    for (rho_in, rho_out) in pairs {
        if rho_in.dim() != 2 || rho_out.dim() != 2 {
            return Err(TomographyError::ProcessNeedsQubits {
                in_dim: rho_in.dim(),
                out_dim: rho_out.dim(),
            });
        }
    }

    let basis = PauliBasis::new();
    let params = chi_parameter_basis();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(pairs.len() * 8);

    for (rho_in, rho_out) in pairs {
        // sigma_i rho sigma_j for all i, j
        let mut prods = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                prods.push(basis.get(i).matmul(rho_in.matrix()).matmul(basis.get(j)));
            }
        }
        // image of each parameter direction under the channel map
        let images: Vec<ComplexMatrix> = params
            .iter()
            .map(|h| {
                let mut acc = ComplexMatrix::zeros(2, 2);
                for i in 0..4 {
                    for j in 0..4 {
                        let c = h.get(i, j);
                        if c != C64::ZERO {
                            acc = acc.add(&prods[4 * i + j].scale(c));
                        }
                    }
                }
                acc
            })
            .collect();
        for m in 0..2 {
            for n in 0..2 {
                let re_coeffs: Vec<f64> = images.iter().map(|im| im.get(m, n).re).collect();
                let im_coeffs: Vec<f64> = images.iter().map(|im| im.get(m, n).im).collect();
                rows.push((re_coeffs, rho_out.matrix().get(m, n).re));
                rows.push((im_coeffs, rho_out.matrix().get(m, n).im));
            }
        }
    }

    let labels: Vec<String> = (0..16).map(|k| format!("chi[{k}]")).collect();
    let coeffs = match solve_normal_equations(&rows, &labels) {
        Ok(c) => c,
        Err(TomographyError::RankDeficient { .. }) => {
            return Err(TomographyError::InformationallyIncomplete)
        }
        Err(e) => return Err(e),
    };

    let mut chi = ComplexMatrix::zeros(4, 4);
    for (c, h) in coeffs.iter().zip(&params) {
        chi = chi.add(&h.scale_re(*c));
    }
    ProcessMatrix::new(chi)
}

/// Writes a density matrix as JSON (row-major {re, im} pairs).
pub fn write_density_json<W: Write>(w: W, rho: &DensityMatrix) -> Result<(), TomographyError> {
    serde_json::to_writer_pretty(w, &MatrixJson::from(rho.matrix()))?;
    Ok(())
}

pub fn read_density_json<R: Read>(r: R) -> Result<DensityMatrix, TomographyError> {
    let j: MatrixJson = serde_json::from_reader(r)?;
    let m = ComplexMatrix::try_from(&j)?;
    Ok(DensityMatrix::new(m)?)
}

/// Writes a chi matrix as JSON (row-major {re, im} pairs).
pub fn write_process_json<W: Write>(w: W, chi: &ProcessMatrix) -> Result<(), TomographyError> {
    serde_json::to_writer_pretty(w, &MatrixJson::from(chi.chi()))?;
    Ok(())
}

pub fn read_process_json<R: Read>(r: R) -> Result<ProcessMatrix, TomographyError> {
    let j: MatrixJson = serde_json::from_reader(r)?;
    let m = ComplexMatrix::try_from(&j)?;
    ProcessMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{exact_records, sampled_records, two_qubit_pauli_settings};
    use crate::metrics::fidelity_to_pure;
    use crate::teleport::{six_standard_inputs, BellOutcome};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn psi_plus_rho() -> DensityMatrix {
        DensityMatrix::from_pure(&BellOutcome::PsiPlus.vector()).unwrap()
    }

    fn random_density(seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = ComplexMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let p = b.matmul(&b.adjoint());
        DensityMatrix::new(p.scale_re(1.0 / p.trace().re)).unwrap()
    }

    #[test]
    fn exact_bell_reconstruction_is_perfect() {
        let records = exact_records(&psi_plus_rho(), &two_qubit_pauli_settings()).unwrap();
        let result = state_tomography(&records, 4).unwrap();
        let f = fidelity_to_pure(&result.rho, &BellOutcome::PsiPlus.vector()).unwrap();
        assert!((f - 1.0).abs() < 1e-10, "F = {f}");
        assert_eq!(result.n_settings, 9);
    }

    #[test]
    fn exact_round_trip_reproduces_arbitrary_states() {
        for seed in 0..8 {
            let rho = random_density(seed);
            let records = exact_records(&rho, &two_qubit_pauli_settings()).unwrap();
            let result = state_tomography(&records, 4).unwrap();
            let diff = result.rho.matrix().max_abs_diff(rho.matrix());
            assert!(diff < 1e-9, "seed {seed}: diff {diff}");
        }
    }

    #[test]
    fn single_qubit_round_trip() {
        let plus = [C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
        let rho = DensityMatrix::from_pure(&plus).unwrap();
        let settings = crate::measurement::single_qubit_pauli_settings();
        let records = exact_records(&rho, &settings).unwrap();
        let result = state_tomography(&records, 2).unwrap();
        assert!(result.rho.matrix().max_abs_diff(rho.matrix()) < 1e-9);
    }

    #[test]
    fn poisson_reconstruction_is_close_at_realistic_counts() {
        let records =
            sampled_records(&psi_plus_rho(), &two_qubit_pauli_settings(), 5000.0, 21).unwrap();
        let result = state_tomography(&records, 4).unwrap();
        let f = fidelity_to_pure(&result.rho, &BellOutcome::PsiPlus.vector()).unwrap();
        assert!(f > 0.98, "linear inversion F = {f}");
        // the likelihood fixed point hugs the pure target much closer
        let refined = state_tomography_with(&records, 4, Estimator::max_likelihood()).unwrap();
        let f = fidelity_to_pure(&refined.rho, &BellOutcome::PsiPlus.vector()).unwrap();
        assert!(f > 0.999, "max likelihood F = {f}");
    }

    #[test]
    fn missing_basis_directions_are_named() {
        let settings: Vec<_> = two_qubit_pauli_settings()
            .into_iter()
            .filter(|s| !s.label().starts_with('X'))
            .collect();
        let records = exact_records(&psi_plus_rho(), &settings).unwrap();
        let err = state_tomography(&records, 4).unwrap_err();
        match err {
            TomographyError::RankDeficient { missing } => {
                assert!(
                    missing.iter().any(|m| m.starts_with('X')),
                    "missing = {missing:?}"
                );
            }
            other => panic!("expected rank deficiency, got {other}"),
        }
    }

    #[test]
    fn psd_projection_cost_is_bounded_by_clipped_mass() {
        let target = BellOutcome::PsiPlus.vector();
        for seed in 0..10 {
            let records =
                sampled_records(&psi_plus_rho(), &two_qubit_pauli_settings(), 800.0, seed).unwrap();
            let raw = linear_inversion(&records, 4).unwrap();
            let f_raw = {
                let v = crate::qmath::matvec(&raw, &target);
                crate::qmath::inner(&target, &v).re
            };
            let (rho, mass) = psd_project(&raw).unwrap();
            let f_proj = fidelity_to_pure(&rho, &target).unwrap();
            assert!(
                (f_proj - f_raw).abs() <= mass + 1e-9,
                "seed {seed}: |{f_proj} - {f_raw}| > clipped mass {mass}"
            );
        }
    }

    #[test]
    fn ml_refinement_is_consistent_on_exact_data() {
        let records = exact_records(&psi_plus_rho(), &two_qubit_pauli_settings()).unwrap();
        let result = state_tomography_with(&records, 4, Estimator::max_likelihood()).unwrap();
        let f = fidelity_to_pure(&result.rho, &BellOutcome::PsiPlus.vector()).unwrap();
        assert!(f > 1.0 - 1e-6, "F = {f}");
    }

    #[test]
    fn error_bars_shrink_to_zero_with_exact_counts() {
        let records = exact_records(&psi_plus_rho(), &two_qubit_pauli_settings()).unwrap();
        let est = |recs: &[CountRecord]| {
            let r = state_tomography(recs, 4)?;
            fidelity_to_pure(&r.rho, &BellOutcome::PsiPlus.vector()).map_err(Into::into)
        };
        let report = error_bars(&records, est, 100, 17).unwrap();
        assert!(report.std_dev < 1e-4, "sigma = {}", report.std_dev);
        assert_eq!(report.n_failed, 0);
    }

    #[test]
    fn error_bars_follow_poisson_scaling() {
        let est = |recs: &[CountRecord]| {
            let r = state_tomography(recs, 4)?;
            crate::metrics::concurrence(&r.rho).map_err(Into::into)
        };
        let records_n =
            sampled_records(&psi_plus_rho(), &two_qubit_pauli_settings(), 2000.0, 3).unwrap();
        let records_2n =
            sampled_records(&psi_plus_rho(), &two_qubit_pauli_settings(), 4000.0, 4).unwrap();
        let sigma_n = error_bars(&records_n, est, 200, 5).unwrap().std_dev;
        let sigma_2n = error_bars(&records_2n, est, 200, 6).unwrap().std_dev;
        let ratio = sigma_n / sigma_2n;
        assert!((1.1..1.9).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn too_few_resamples_is_rejected() {
        let records = exact_records(&psi_plus_rho(), &two_qubit_pauli_settings()).unwrap();
        let est = |_: &[CountRecord]| Ok(0.0);
        assert!(matches!(
            error_bars(&records, est, 50, 0),
            Err(TomographyError::TooFewResamples(50))
        ));
    }

    #[test]
    fn identity_process_has_unit_chi11() {
        let pairs: Vec<_> = six_standard_inputs()
            .into_iter()
            .map(|(_, q)| {
                let rho = DensityMatrix::from_pure(&q.vector()).unwrap();
                (rho.clone(), rho)
            })
            .collect();
        let chi = process_tomography(&pairs).unwrap();
        assert!((chi.process_fidelity() - 1.0).abs() < 1e-9);
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 0) {
                    assert!(chi.chi().get(i, j).norm() < 1e-9, "chi[{i}][{j}]");
                }
            }
        }
        assert!(chi.tp_error() < 1e-8);
    }

    #[test]
    fn sigma_x_conjugation_shows_up_at_chi22() {
        let x = crate::qmath::sigma_x();
        let pairs: Vec<_> = six_standard_inputs()
            .into_iter()
            .map(|(_, q)| {
                let rho = DensityMatrix::from_pure(&q.vector()).unwrap();
                let out = x.matmul(rho.matrix()).matmul(&x);
                (rho, DensityMatrix::new(out).unwrap())
            })
            .collect();
        let chi = process_tomography(&pairs).unwrap();
        assert!((chi.chi().get(1, 1).re - 1.0).abs() < 1e-9);
        assert!(chi.chi().get(0, 0).norm() < 1e-9);
    }

    #[test]
    fn incomplete_inputs_are_rejected() {
        let h = DensityMatrix::from_pure(&[C64::ONE, C64::ZERO]).unwrap();
        let v = DensityMatrix::from_pure(&[C64::ZERO, C64::ONE]).unwrap();
        let pairs = vec![(h.clone(), h), (v.clone(), v)];
        assert!(matches!(
            process_tomography(&pairs),
            Err(TomographyError::InformationallyIncomplete)
        ));
    }

    #[test]
    fn csv_records_feed_the_reconstruction() {
        let records =
            sampled_records(&psi_plus_rho(), &two_qubit_pauli_settings(), 5000.0, 9).unwrap();
        let mut buf = Vec::new();
        crate::measurement::write_count_records(&mut buf, &records).unwrap();
        let back = crate::measurement::read_count_records(std::io::BufReader::new(buf.as_slice()))
            .unwrap();
        let est = |recs: &[CountRecord]| {
            let r = state_tomography(recs, 4)?;
            fidelity_to_pure(&r.rho, &BellOutcome::PsiPlus.vector()).map_err(Into::into)
        };
        let sigma = error_bars(&back, est, 100, 31).unwrap().std_dev;
        let result = state_tomography(&back, 4)
            .unwrap()
            .with_target_state(&BellOutcome::PsiPlus.vector())
            .unwrap()
            .with_error_bar(sigma);
        assert!(result.fidelity_vs_target.unwrap() > 0.97);
        assert!(result.error_bar.unwrap() < 0.02);
    }

    #[test]
    fn density_json_round_trip() {
        let rho = random_density(33);
        let mut buf = Vec::new();
        write_density_json(&mut buf, &rho).unwrap();
        let back = read_density_json(buf.as_slice()).unwrap();
        assert!(rho.matrix().max_abs_diff(back.matrix()) < 1e-12);
    }

    #[test]
    fn process_json_round_trip() {
        let pairs: Vec<_> = six_standard_inputs()
            .into_iter()
            .map(|(_, q)| {
                let rho = DensityMatrix::from_pure(&q.vector()).unwrap();
                (rho.clone(), rho)
            })
            .collect();
        let chi = process_tomography(&pairs).unwrap();
        let mut buf = Vec::new();
        write_process_json(&mut buf, &chi).unwrap();
        let back = read_process_json(buf.as_slice()).unwrap();
        assert!(chi.chi().max_abs_diff(back.chi()) < 1e-12);
    }
}
