//! No-label two-particle states, the entropic measure of remote spatial
//! indistinguishability, and the projection onto the "one particle in L,
//! one particle in R" sector that produces the conditional distributed
//! state.
//!
//! Two identical particles occupy four single-particle modes: region L or
//! R tensored with polarization H or V. A particle pair is written over
//! the unordered occupation basis of those modes; exchange symmetry is
//! implicit in the unordered representation and the sign `eta` (+1 for
//! bosons, -1 for fermions) enters through mode reordering. An independent
//! brute-force projection route, [`oracle_project`], evaluates the
//! symmetrized two-particle overlap rule directly and exists solely to
//! cross-check [`slocc_project`].

use crate::qmath::{binary_entropy, C64};
use thiserror::Error;

/// Absolute normalization tolerance for amplitude pairs and state vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Components below this magnitude are treated as zero when fixing the
/// global phase of a projected state.
const PHASE_ANCHOR_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ParticlesError {
    #[error("spatial amplitudes not normalized: |l|^2+|r|^2 = {first:.15}, |l'|^2+|r'|^2 = {second:.15}")]
    NotNormalized { first: f64, second: f64 },
    #[error("prepared state has zero norm (fermions with equal polarizations and identical spatial distributions)")]
    NullState,
    #[error("indistinguishability undefined: both joint LR probabilities vanish")]
    UndefinedMeasure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    H,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    L,
    R,
}

/// Exchange sign of the pair: +1 symmetrizes (bosons), -1 antisymmetrizes
/// (fermions). Bosonic is the default matching the photon experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExchangeSign {
    #[default]
    Bosonic,
    Fermionic,
}

impl ExchangeSign {
    pub fn sign(self) -> f64 {
        match self {
            ExchangeSign::Bosonic => 1.0,
            ExchangeSign::Fermionic => -1.0,
        }
    }
}

/// Fixed order of the four single-particle modes: LH, LV, RH, RV.
pub const MODES: [(Region, Polarization); 4] = [
    (Region::L, Polarization::H),
    (Region::L, Polarization::V),
    (Region::R, Polarization::H),
    (Region::R, Polarization::V),
];

pub fn mode_index(region: Region, pol: Polarization) -> usize {
    match (region, pol) {
        (Region::L, Polarization::H) => 0,
        (Region::L, Polarization::V) => 1,
        (Region::R, Polarization::H) => 2,
        (Region::R, Polarization::V) => 3,
    }
}

/// Unordered mode pairs (i <= j) indexing the ten-dimensional two-particle
/// occupation basis.
pub const PAIR_BASIS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < 4);
    PAIR_BASIS
        .iter()
        .position(|&p| p == (i, j))
        .expect("valid mode pair")
}

/// Operational basis B_LR: exactly one particle in each region, in the
/// fixed order (LH,RH), (LH,RV), (LV,RH), (LV,RV).
pub const BLR_BASIS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];

/// The four wave-packet amplitudes steering each particle over the two
/// operational regions, plus the exchange sign. `l`, `r` belong to the
/// first particle, `l_p`, `r_p` to the second; each pair must be
/// normalized. Complex values are accepted even though the apparatus
/// produces real ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialAmplitudes {
    pub l: C64,
    pub r: C64,
    pub l_p: C64,
    pub r_p: C64,
    pub eta: ExchangeSign,
}

impl SpatialAmplitudes {
    pub fn new(
        l: C64,
        r: C64,
        l_p: C64,
        r_p: C64,
        eta: ExchangeSign,
    ) -> Result<Self, ParticlesError> {
        let first = l.norm_sqr() + r.norm_sqr();
        let second = l_p.norm_sqr() + r_p.norm_sqr();
        if (first - 1.0).abs() > NORM_TOL || (second - 1.0).abs() > NORM_TOL {
            return Err(ParticlesError::NotNormalized { first, second });
        }
        Ok(Self {
            l,
            r,
            l_p,
            r_p,
            eta,
        })
    }

    pub fn bosonic(l: C64, r: C64, l_p: C64, r_p: C64) -> Result<Self, ParticlesError> {
        Self::new(l, r, l_p, r_p, ExchangeSign::Bosonic)
    }

    /// Real amplitudes from distribution angles: l = cos(alpha),
    /// r = sin(alpha), l' = sin(beta), r' = cos(beta).
    pub fn from_angles(alpha: f64, beta: f64, eta: ExchangeSign) -> Self {
        Self {
            l: C64::new(alpha.cos(), 0.0),
            r: C64::new(alpha.sin(), 0.0),
            l_p: C64::new(beta.sin(), 0.0),
            r_p: C64::new(beta.cos(), 0.0),
            eta,
        }
    }
}

/// Pure state of the particle pair over the unordered occupation basis,
/// normalized at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhotonPureState {
    amps: [C64; 10],
    eta: ExchangeSign,
}

impl TwoPhotonPureState {
    /// Amplitude on the unordered basis ket for modes (i, j) with i <= j.
    pub fn amplitude(&self, i: usize, j: usize) -> C64 {
        self.amps[pair_index(i, j)]
    }

    pub fn amplitudes(&self) -> &[C64; 10] {
        &self.amps
    }

    pub fn eta(&self) -> ExchangeSign {
        self.eta
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Joint detection probabilities for the two which-way alternatives and
/// the entropic indistinguishability they generate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndistinguishabilityReport {
    /// First particle found in L, second in R.
    pub p1: f64,
    /// The reverse assignment; p1 + p2 = 1.
    pub p2: f64,
    /// Entropy of (p1, p2) in bits.
    pub i_value: f64,
}

/// Result of projecting onto the one-particle-per-region sector.
#[derive(Clone, Debug, PartialEq)]
pub struct SloccOutcome {
    /// Success probability of the projection.
    pub prob: f64,
    /// Renormalized state over [`BLR_BASIS`]; `None` when `prob` is zero.
    pub state: Option<[C64; 4]>,
}

impl SloccOutcome {
    pub fn state_vector(&self) -> Option<&[C64; 4]> {
        self.state.as_ref()
    }
}

/// Expands `|psi_D pol1, psi_D' pol2>` over the unordered occupation
/// basis of the four LR x HV modes, symmetrized according to `eta`, and
/// normalizes. Fermions with equal polarizations and identical spatial
/// distributions produce a null state, which is rejected.
pub fn prepared_state(
    amps: &SpatialAmplitudes,
    pol1: Polarization,
    pol2: Polarization,
) -> Result<TwoPhotonPureState, ParticlesError> {
    let eta = amps.eta;
    let sign = eta.sign();
    let first = [(Region::L, amps.l), (Region::R, amps.r)];
    let second = [(Region::L, amps.l_p), (Region::R, amps.r_p)];

    let mut acc = [C64::ZERO; 10];
    for (x, ax) in first {
        for (y, by) in second {
            let c = ax * by;
            let m1 = mode_index(x, pol1);
            let m2 = mode_index(y, pol2);
            if m1 == m2 {
                // Doubly occupied mode: vanishes for fermions, picks up the
                // bosonic occupation factor sqrt(2) otherwise.
                if eta == ExchangeSign::Fermionic {
                    continue;
                }
                acc[pair_index(m1, m1)] += c * std::f64::consts::SQRT_2;
            } else if m1 < m2 {
                acc[pair_index(m1, m2)] += c;
            } else {
                acc[pair_index(m2, m1)] += c * sign;
            }
        }
    }

    let norm = acc.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < NORM_TOL {
        return Err(ParticlesError::NullState);
    }
    for a in &mut acc {
        *a /= norm;
    }
    Ok(TwoPhotonPureState { amps: acc, eta })
}

/// Entropic measure of how much localized counting can tell which
/// particle came from which wave packet. Undefined when both joint
/// probabilities vanish (both particles confined to a single region).
pub fn indistinguishability(
    amps: &SpatialAmplitudes,
) -> Result<IndistinguishabilityReport, ParticlesError> {
    let w1 = (amps.l * amps.r_p).norm_sqr();
    let w2 = (amps.l_p * amps.r).norm_sqr();
    let z = w1 + w2;
    if z <= 0.0 {
        return Err(ParticlesError::UndefinedMeasure);
    }
    let p1 = w1 / z;
    let p2 = w2 / z;
    Ok(IndistinguishabilityReport {
        p1,
        p2,
        i_value: binary_entropy(p1),
    })
}

/// Keeps exactly the one-particle-in-L, one-particle-in-R sector of the
/// state, reporting the sector weight as the success probability and the
/// renormalized four-component state over [`BLR_BASIS`]. The overall
/// phase is fixed by making the first non-negligible component real and
/// positive.
pub fn slocc_project(state: &TwoPhotonPureState) -> SloccOutcome {
    let mut v = [C64::ZERO; 4];
    for (k, &(i, j)) in BLR_BASIS.iter().enumerate() {
        v[k] = state.amplitude(i, j);
    }
    finish_projection(v)
}

fn finish_projection(mut v: [C64; 4]) -> SloccOutcome {
    let prob: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    if prob <= 0.0 {
        return SloccOutcome {
            prob: 0.0,
            state: None,
        };
    }
    let norm = prob.sqrt();
    for a in &mut v {
        *a /= norm;
    }
    canonicalize_phase(&mut v);
    SloccOutcome {
        prob,
        state: Some(v),
    }
}

fn canonicalize_phase(v: &mut [C64; 4]) {
    if let Some(anchor) = v.iter().find(|c| c.norm() > PHASE_ANCHOR_TOL).copied() {
        let rot = anchor.conj() / anchor.norm();
        for a in v.iter_mut() {
            *a *= rot;
        }
    }
}

/// Single-particle state: a wave packet spread over the two regions with
/// a definite polarization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleParticleState {
    pub l: C64,
    pub r: C64,
    pub pol: Polarization,
}

impl SingleParticleState {
    pub fn localized(region: Region, pol: Polarization) -> Self {
        match region {
            Region::L => Self {
                l: C64::ONE,
                r: C64::ZERO,
                pol,
            },
            Region::R => Self {
                l: C64::ZERO,
                r: C64::ONE,
                pol,
            },
        }
    }

    /// `<self|other>`; polarizations are orthonormal, regions are
    /// orthonormal at the detection level.
    pub fn overlap(&self, other: &Self) -> C64 {
        if self.pol != other.pol {
            return C64::ZERO;
        }
        self.l.conj() * other.l + self.r.conj() * other.r
    }
}

/// Symmetrized overlap of two unordered particle pairs:
/// `<b1,b2|k1,k2> = <b1|k1><b2|k2> + eta <b1|k2><b2|k1>`.
pub fn nolabel_overlap(
    bra: &(SingleParticleState, SingleParticleState),
    ket: &(SingleParticleState, SingleParticleState),
    eta: ExchangeSign,
) -> C64 {
    bra.0.overlap(&ket.0) * bra.1.overlap(&ket.1)
        + eta.sign() * (bra.0.overlap(&ket.1) * bra.1.overlap(&ket.0))
}

/// Brute-force projection: evaluates `<L sigma, R tau | Psi>` for all four
/// operational basis kets through the overlap rule and normalizes. Same
/// contract as [`prepared_state`] followed by [`slocc_project`]; kept as
/// an independent implementation path.
pub fn oracle_project(
    amps: &SpatialAmplitudes,
    pol1: Polarization,
    pol2: Polarization,
) -> Result<SloccOutcome, ParticlesError> {
    let eta = amps.eta;
    let k1 = SingleParticleState {
        l: amps.l,
        r: amps.r,
        pol: pol1,
    };
    let k2 = SingleParticleState {
        l: amps.l_p,
        r: amps.r_p,
        pol: pol2,
    };
    let ket = (k1, k2);

    let norm_sqr = nolabel_overlap(&ket, &ket, eta).re;
    if norm_sqr.sqrt() < NORM_TOL {
        return Err(ParticlesError::NullState);
    }
    let norm = norm_sqr.sqrt();

    let mut v = [C64::ZERO; 4];
    for (k, &(i, j)) in BLR_BASIS.iter().enumerate() {
        let (ri, pi) = MODES[i];
        let (rj, pj) = MODES[j];
        let bra = (
            SingleParticleState::localized(ri, pi),
            SingleParticleState::localized(rj, pj),
        );
        v[k] = nolabel_overlap(&bra, &ket, eta) / norm;
    }
    Ok(finish_projection(v))
}
