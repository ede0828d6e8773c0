//! Conditional teleportation through the distributed two-qubit resource:
//! Bell-state measurement between the input photon and the resource's L
//! qubit, the Pauli correction on R, and fidelity accounting against the
//! classical bound.
//!
//! Qubit order of the three-photon space is (input, L, R); the Bell
//! projection acts on the first two. Only the Phi+ branch is accepted in
//! the headline numbers, matching the polarizing-splitter realization; the
//! other branches are simulated for completeness.

use crate::metrics::{fidelity_to_pure, DensityMatrix, MetricsError};
use crate::qmath::{
    identity2, kron, outer, sigma_x, sigma_y, sigma_z, ComplexMatrix, MatrixJson, C64,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TeleportError {
    #[error("input qubit is not normalized: |a|^2 + |b|^2 = {norm_sqr:.15}")]
    UnnormalizedInput { norm_sqr: f64 },
    #[error("resource state must be a two-qubit (4x4) density matrix, got dim {0}")]
    BadResourceDim(usize),
    #[error("Bell outcome {outcome:?} has zero probability; no conditional state")]
    ZeroProbabilityOutcome { outcome: BellOutcome },
    #[error("fidelity list is empty")]
    EmptyFidelities,
    #[error("{fidelities} fidelities vs {error_bars} error bars")]
    MismatchedErrorBars {
        fidelities: usize,
        error_bars: usize,
    },
    #[error("calibration target {0} is outside the reachable fidelity range [0.5, 1]")]
    UnreachableTarget(f64),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Classical teleportation bound: the best fidelity without shared
/// entanglement.
pub const CLASSICAL_FIDELITY_BOUND: f64 = 2.0 / 3.0;

/// Single-qubit state `a|H> + b|V>` to be teleported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputQubit {
    a: C64,
    b: C64,
}

impl InputQubit {
    pub fn new(a: C64, b: C64) -> Result<Self, TeleportError> {
        let norm_sqr = a.norm_sqr() + b.norm_sqr();
        if (norm_sqr - 1.0).abs() > 1e-12 {
            return Err(TeleportError::UnnormalizedInput { norm_sqr });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    pub fn vector(&self) -> [C64; 2] {
        [self.a, self.b]
    }

    pub fn h() -> Self {
        Self {
            a: C64::ONE,
            b: C64::ZERO,
        }
    }

    pub fn v() -> Self {
        Self {
            a: C64::ZERO,
            b: C64::ONE,
        }
    }

    pub fn plus() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { a: s, b: s }
    }

    pub fn minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            a: C64::new(s, 0.0),
            b: C64::new(-s, 0.0),
        }
    }

    pub fn phi_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            a: C64::new(s, 0.0),
            b: C64::new(0.0, s),
        }
    }

    pub fn phi_minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            a: C64::new(s, 0.0),
            b: C64::new(0.0, -s),
        }
    }
}

/// The six eigenstates of the Pauli operators used as teleportation
/// inputs, in the order they are tabulated.
pub fn six_standard_inputs() -> [(&'static str, InputQubit); 6] {
    [
        ("H", InputQubit::h()),
        ("V", InputQubit::v()),
        ("+", InputQubit::plus()),
        ("-", InputQubit::minus()),
        ("phi-", InputQubit::phi_minus()),
        ("phi+", InputQubit::phi_plus()),
    ]
}

/// The four Bell states with the usual sign convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
        }
    }

    /// State vector over the computational basis (HH, HV, VH, VV).
    pub fn vector(&self) -> [C64; 4] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            BellOutcome::PhiPlus => [s, C64::ZERO, C64::ZERO, s],
            BellOutcome::PhiMinus => [s, C64::ZERO, C64::ZERO, -s],
            BellOutcome::PsiPlus => [C64::ZERO, s, s, C64::ZERO],
            BellOutcome::PsiMinus => [C64::ZERO, s, -s, C64::ZERO],
        }
    }

    /// Pauli correction that completes teleportation through a PsiPlus
    /// resource for this measurement branch. Verified against the direct
    /// Bell expansion in the tests.
    pub fn correction(&self) -> ComplexMatrix {
        match self {
            BellOutcome::PhiPlus => sigma_x(),
            BellOutcome::PhiMinus => sigma_y(),
            BellOutcome::PsiPlus => identity2(),
            BellOutcome::PsiMinus => sigma_z(),
        }
    }
}

/// One accepted teleportation event.
#[derive(Clone, Debug)]
pub struct TeleportRun {
    pub input: InputQubit,
    pub resource: DensityMatrix,
    pub bell_outcome: BellOutcome,
    /// Probability of the accepted Bell branch (1/4 for an ideal
    /// maximally entangled resource). The projection probability of the
    /// resource itself is tracked separately by the caller.
    pub outcome_prob: f64,
    /// Corrected state delivered at R.
    pub output: DensityMatrix,
    /// `<phi| rho_out |phi>` against the ideal input.
    pub fidelity: f64,
}

/// Projects the (input, L) pair of `input (x) resource` onto the chosen
/// Bell state, returning the branch probability and the renormalized
/// conditional state at R (no correction applied).
pub fn bsm_project(
    input: &InputQubit,
    resource: &DensityMatrix,
    outcome: BellOutcome,
) -> Result<(f64, Option<DensityMatrix>), TeleportError> {
    if resource.dim() != 4 {
        return Err(TeleportError::BadResourceDim(resource.dim()));
    }
    let rho_full = kron(&outer(&input.vector()), resource.matrix());
    let bell = outcome.vector();

    // K = (<bell| (x) I_R): maps the 8-dim space onto the R qubit
    let mut k = ComplexMatrix::zeros(2, 8);
    for pair in 0..4 {
        let amp = bell[pair].conj();
        if amp == C64::ZERO {
            continue;
        }
        for r in 0..2 {
            k.set(r, 2 * pair + r, amp);
        }
    }
    let conditional = k.matmul(&rho_full).matmul(&k.adjoint());
    let prob = conditional.trace().re.max(0.0);
    if prob <= 1e-15 {
        return Ok((0.0, None));
    }
    let rho_r = DensityMatrix::new(conditional.scale_re(1.0 / prob))?;
    Ok((prob, Some(rho_r)))
}

/// Full protocol on the experimentally accepted branch: Bell projection
/// onto PhiPlus, sigma_x correction at R, fidelity against the input.
pub fn teleport(
    input: &InputQubit,
    resource: &DensityMatrix,
) -> Result<TeleportRun, TeleportError> {
    let outcome = BellOutcome::PhiPlus;
    let (outcome_prob, conditional) = bsm_project(input, resource, outcome)?;
    let conditional = conditional.ok_or(TeleportError::ZeroProbabilityOutcome { outcome })?;
    let correction = outcome.correction();
    let corrected = correction
        .matmul(conditional.matrix())
        .matmul(&correction.adjoint());
    let output = DensityMatrix::new(corrected)?;
    let fidelity = fidelity_to_pure(&output, &input.vector())?;
    Ok(TeleportRun {
        input: *input,
        resource: resource.clone(),
        bell_outcome: outcome,
        outcome_prob,
        output,
        fidelity,
    })
}

/// Isotropically depolarized Bell resource
/// `v |Psi+><Psi+| + (1 - v) I/4`; the single noise knob used for
/// calibration.
pub fn depolarized_bell_resource(v: f64) -> Result<DensityMatrix, TeleportError> {
    let pure = outer(&BellOutcome::PsiPlus.vector());
    let mixed = ComplexMatrix::identity(4).scale_re(0.25);
    Ok(DensityMatrix::new(
        pure.scale_re(v).add(&mixed.scale_re(1.0 - v)),
    )?)
}

/// Average fidelity over the six standard inputs teleported through the
/// depolarized resource.
pub fn average_fidelity_at(v: f64) -> Result<f64, TeleportError> {
    let resource = depolarized_bell_resource(v)?;
    let mut total = 0.0;
    for (_, input) in six_standard_inputs() {
        total += teleport(&input, &resource)?.fidelity;
    }
    Ok(total / 6.0)
}

#[derive(Clone, Copy, Debug)]
pub struct DepolarizationCalibration {
    /// Depolarization weight reaching the target average fidelity.
    pub v: f64,
    pub achieved_average: f64,
    /// Monotonicity of the scanned fidelity curve, checked on a coarse
    /// grid before bisecting.
    pub monotonic: bool,
}

/// Finds the depolarization weight whose average six-input fidelity
/// matches `target` by bisection on the simulated pipeline.
pub fn calibrate_depolarization(target: f64) -> Result<DepolarizationCalibration, TeleportError> {
    let f_lo = average_fidelity_at(0.0)?;
    let f_hi = average_fidelity_at(1.0)?;
    if !(f_lo..=f_hi).contains(&target) {
        return Err(TeleportError::UnreachableTarget(target));
    }
    let mut monotonic = true;
    let mut prev = f_lo;
    for k in 1..=20 {
        let f = average_fidelity_at(k as f64 / 20.0)?;
        if f < prev - 1e-12 {
            monotonic = false;
        }
        prev = f;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if average_fidelity_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = 0.5 * (lo + hi);
    Ok(DepolarizationCalibration {
        v,
        achieved_average: average_fidelity_at(v)?,
        monotonic,
    })
}

/// Verdict for one fidelity against the classical bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub fidelity: f64,
    /// Strictly above 2/3; the boundary itself does not count.
    pub above: bool,
    /// Margin in standard deviations when an error bar was supplied.
    pub margin_sigmas: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalBoundReport {
    pub checks: Vec<BoundCheck>,
    pub all_above: bool,
}

/// Flags each fidelity as above/below the classical bound of 2/3,
/// reporting the margin in standard deviations when error bars are
/// supplied.
pub fn classical_bound_check(
    fidelities: &[f64],
    error_bars: Option<&[f64]>,
) -> Result<ClassicalBoundReport, TeleportError> {
    if fidelities.is_empty() {
        return Err(TeleportError::EmptyFidelities);
    }
    if let Some(bars) = error_bars {
        if bars.len() != fidelities.len() {
            return Err(TeleportError::MismatchedErrorBars {
                fidelities: fidelities.len(),
                error_bars: bars.len(),
            });
        }
    }
    let checks: Vec<BoundCheck> = fidelities
        .iter()
        .enumerate()
        .map(|(i, &f)| BoundCheck {
            fidelity: f,
            above: f > CLASSICAL_FIDELITY_BOUND,
            margin_sigmas: error_bars.map(|bars| (f - CLASSICAL_FIDELITY_BOUND) / bars[i]),
        })
        .collect();
    let all_above = checks.iter().all(|c| c.above);
    Ok(ClassicalBoundReport { checks, all_above })
}

/// Serialized form of one teleportation event.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TeleportRunJson {
    pub input: [crate::qmath::ComplexJson; 2],
    pub branch: String,
    pub probability: f64,
    pub output: MatrixJson,
    pub fidelity: f64,
}

impl TeleportRun {
    pub fn to_json(&self) -> TeleportRunJson {
        let v = self.input.vector();
        TeleportRunJson {
            input: [
                crate::qmath::ComplexJson {
                    re: v[0].re,
                    im: v[0].im,
                },
                crate::qmath::ComplexJson {
                    re: v[1].re,
                    im: v[1].im,
                },
            ],
            branch: self.bell_outcome.label().to_string(),
            probability: self.outcome_prob,
            output: MatrixJson::from(self.output.matrix()),
            fidelity: self.fidelity,
        }
    }
}
