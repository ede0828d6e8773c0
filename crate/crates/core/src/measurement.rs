//! Converts quantum states into simulated laboratory data: Born-rule
//! outcome probabilities for polarization-analysis settings, Poisson
//! fluctuating coincidence counts, the two-photon interference
//! coincidence law, and the decohered state seen when the photon paths
//! stay separate at the detection level.

use crate::metrics::{DensityMatrix, MetricsError};
use crate::particles::{ExchangeSign, SloccOutcome};
use crate::qmath::{kron, BlochVector, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasurementError {
    #[error("state dimension {state_dim} does not match a {setting} setting")]
    DimensionMismatch { state_dim: usize, setting: String },
    #[error("cannot decohere a null projection outcome")]
    NullOutcome,
    #[error("visibility {0} outside [0, 1]")]
    BadVisibility(f64),
    #[error("mean total {0} must be positive")]
    BadMeanTotal(f64),
    #[error("count CSV: {0}")]
    BadCountFile(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Analyzer configuration: one Bloch axis per measured side. The label
/// names the setting in serialized records; the standard Pauli settings
/// use "X"/"Y"/"Z" per side ("XZ" means first side X, second side Z).
#[derive(Clone, Debug, PartialEq)]
pub enum MeasurementSetting {
    Single {
        axis: BlochVector,
        label: String,
    },
    Joint {
        left: BlochVector,
        right: BlochVector,
        label: String,
    },
}

impl MeasurementSetting {
    pub fn label(&self) -> &str {
        match self {
            MeasurementSetting::Single { label, .. } => label,
            MeasurementSetting::Joint { label, .. } => label,
        }
    }

    pub fn n_outcomes(&self) -> usize {
        match self {
            MeasurementSetting::Single { .. } => 2,
            MeasurementSetting::Joint { .. } => 4,
        }
    }

    /// Outcome labels in the fixed order the probabilities are emitted.
    pub fn outcome_labels(&self) -> &'static [&'static str] {
        match self {
            MeasurementSetting::Single { .. } => &["+", "-"],
            MeasurementSetting::Joint { .. } => &["++", "+-", "-+", "--"],
        }
    }
}

fn pauli_axis(name: char) -> Option<BlochVector> {
    match name {
        'X' => Some(BlochVector::x_axis()),
        'Y' => Some(BlochVector::y_axis()),
        'Z' => Some(BlochVector::z_axis()),
        _ => None,
    }
}

/// Single-qubit Pauli settings X, Y, Z.
pub fn single_qubit_pauli_settings() -> Vec<MeasurementSetting> {
    ['X', 'Y', 'Z']
        .into_iter()
        .map(|c| MeasurementSetting::Single {
            axis: pauli_axis(c).unwrap(),
            label: c.to_string(),
        })
        .collect()
}

/// The nine two-sided Pauli settings XX, XY, ..., ZZ.
pub fn two_qubit_pauli_settings() -> Vec<MeasurementSetting> {
    let mut settings = Vec::with_capacity(9);
    for a in ['X', 'Y', 'Z'] {
        for b in ['X', 'Y', 'Z'] {
            settings.push(MeasurementSetting::Joint {
                left: pauli_axis(a).unwrap(),
                right: pauli_axis(b).unwrap(),
                label: format!("{a}{b}"),
            });
        }
    }
    settings
}

/// Reconstructs a setting from its serialized label; only the Pauli
/// naming scheme is recognized.
pub fn setting_from_label(label: &str) -> Option<MeasurementSetting> {
    let chars: Vec<char> = label.chars().collect();
    match chars.as_slice() {
        [a] => Some(MeasurementSetting::Single {
            axis: pauli_axis(*a)?,
            label: label.to_string(),
        }),
        [a, b] => Some(MeasurementSetting::Joint {
            left: pauli_axis(*a)?,
            right: pauli_axis(*b)?,
            label: label.to_string(),
        }),
        _ => None,
    }
}

/// Born-rule outcome probabilities. Joint settings emit the four
/// coincidence outcomes in the order (++, +-, -+, --); with both sides on
/// Z that is (HH, HV, VH, VV). Tiny negative values from the density
/// matrix's eigenvalue tolerance are clamped to zero.
pub fn outcome_probs(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
) -> Result<Vec<f64>, MeasurementError> {
    let mismatch = |setting: &str| MeasurementError::DimensionMismatch {
        state_dim: rho.dim(),
        setting: setting.to_string(),
    };
    let probs: Vec<f64> = match setting {
        MeasurementSetting::Single { axis, .. } => {
            if rho.dim() != 2 {
                return Err(mismatch("single-sided"));
            }
            let (plus, minus) = axis.projectors();
            vec![rho.expectation(&plus), rho.expectation(&minus)]
        }
        MeasurementSetting::Joint { left, right, .. } => {
            if rho.dim() != 4 {
                return Err(mismatch("two-sided"));
            }
            let (lp, lm) = left.projectors();
            let (rp, rm) = right.projectors();
            vec![
                rho.expectation(&kron(&lp, &rp)),
                rho.expectation(&kron(&lp, &rm)),
                rho.expectation(&kron(&lm, &rp)),
                rho.expectation(&kron(&lm, &rm)),
            ]
        }
    };
    Ok(probs.into_iter().map(|p| p.max(0.0)).collect())
}

/// One measurement setting worth of simulated (or real) counts, one
/// entry per outcome in the setting's fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub counts: Vec<u64>,
    pub total_expected: f64,
}

impl CountRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Derives an independent stream seed for point `index` of a sweep; a
/// splitmix step keeps neighbouring indices uncorrelated.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// One Poisson draw; zero rates yield exactly zero.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).expect("positive rate").sample(rng) as u64
    }
}

/// Draws each outcome count independently as Poisson(mean_total * p_k).
/// Zero-rate outcomes yield exactly zero counts.
pub fn sample_counts<R: Rng + ?Sized>(
    setting: &MeasurementSetting,
    probs: &[f64],
    mean_total: f64,
    rng: &mut R,
) -> Result<CountRecord, MeasurementError> {
    if !(mean_total > 0.0) {
        return Err(MeasurementError::BadMeanTotal(mean_total));
    }
    let counts = probs
        .iter()
        .map(|&p| sample_poisson(mean_total * p, rng))
        .collect();
    Ok(CountRecord {
        setting: setting.clone(),
        counts,
        total_expected: mean_total,
    })
}

/// Scaling used by exact-probability ("infinite count") records.
pub const EXACT_TOTAL: f64 = 1e12;

/// Noise-free records: counts are the outcome probabilities scaled by
/// [`EXACT_TOTAL`] and rounded.
pub fn exact_records(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
) -> Result<Vec<CountRecord>, MeasurementError> {
    settings
        .iter()
        .map(|s| {
            let probs = outcome_probs(rho, s)?;
            Ok(CountRecord {
                setting: s.clone(),
                counts: probs
                    .iter()
                    .map(|p| (p * EXACT_TOTAL).round() as u64)
                    .collect(),
                total_expected: EXACT_TOTAL,
            })
        })
        .collect()
}

/// Poisson records for every setting, with one derived rng stream per
/// setting so that sweeps can be parallelized deterministically.
pub fn sampled_records(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    mean_total: f64,
    seed: u64,
) -> Result<Vec<CountRecord>, MeasurementError> {
    settings
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let probs = outcome_probs(rho, s)?;
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            sample_counts(s, &probs, mean_total, &mut rng)
        })
        .collect()
}

/// Operational state after the projection when the photon paths stay
/// separate at the detection level: the coherence between |LH,RV> and
/// |LV,RH> is scaled by `visibility` (0 erases it, 1 keeps the pure
/// state), weights preserved.
pub fn partially_distinguishable_mix(
    outcome: &SloccOutcome,
    visibility: f64,
) -> Result<DensityMatrix, MeasurementError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(MeasurementError::BadVisibility(visibility));
    }
    let state = outcome
        .state_vector()
        .ok_or(MeasurementError::NullOutcome)?;
    let mut rho = crate::qmath::outer(state);
    let scale = C64::new(visibility, 0.0);
    rho.set(1, 2, rho.get(1, 2) * scale);
    rho.set(2, 1, rho.get(2, 1) * scale);
    // exact renormalization keeps the diagonal weights summing to one
    let tr = rho.trace().re;
    Ok(DensityMatrix::new(rho.scale_re(1.0 / tr))?)
}

/// Fully decohered case: quantum interference between the two which-way
/// alternatives disappears and only the classical weights remain.
pub fn distinguishable_mix(outcome: &SloccOutcome) -> Result<DensityMatrix, MeasurementError> {
    partially_distinguishable_mix(outcome, 0.0)
}

/// Coincidence probability when two photons with single-particle mode
/// overlap `o` meet on a balanced combiner: `(1 - eta |o|^2) / 2`.
/// Bosons with perfect overlap never coincide, which is the dip.
pub fn hom_coincidence_prob(mode_overlap: C64, eta: ExchangeSign) -> f64 {
    0.5 * (1.0 - eta.sign() * mode_overlap.norm_sqr())
}

/// Empirical correlator `<s t>` of a joint record:
/// `(n++ - n+- - n-+ + n--) / N`.
pub fn correlator(record: &CountRecord) -> Result<f64, MeasurementError> {
    match record.setting {
        MeasurementSetting::Joint { .. } => {
            let total = record.total();
            if total == 0 {
                return Err(MeasurementError::BadCountFile(format!(
                    "setting '{}' has zero total counts",
                    record.setting.label()
                )));
            }
            let n = &record.counts;
            Ok((n[0] as f64 - n[1] as f64 - n[2] as f64 + n[3] as f64) / total as f64)
        }
        MeasurementSetting::Single { .. } => Err(MeasurementError::DimensionMismatch {
            state_dim: 2,
            setting: "correlator needs a two-sided".to_string(),
        }),
    }
}

pub const COUNT_CSV_HEADER: &str = "setting_label,outcome,counts,expected_total";

pub fn write_count_records<W: Write>(
    w: &mut W,
    records: &[CountRecord],
) -> Result<(), MeasurementError> {
    writeln!(w, "{COUNT_CSV_HEADER}")?;
    for rec in records {
        for (label, count) in rec.setting.outcome_labels().iter().zip(&rec.counts) {
            writeln!(
                w,
                "{},{},{},{}",
                rec.setting.label(),
                label,
                count,
                rec.total_expected
            )?;
        }
    }
    Ok(())
}

pub fn read_count_records<R: BufRead>(r: R) -> Result<Vec<CountRecord>, MeasurementError> {
    let mut records: Vec<CountRecord> = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != COUNT_CSV_HEADER {
                return Err(MeasurementError::BadCountFile(format!(
                    "expected header '{COUNT_CSV_HEADER}', got '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(MeasurementError::BadCountFile(format!(
                "line {}: expected 4 fields",
                lineno + 1
            )));
        }
        let bad =
            |what: &str| MeasurementError::BadCountFile(format!("line {}: bad {what}", lineno + 1));
        let setting_label = fields[0];
        let outcome = fields[1];
        let count: u64 = fields[2].parse().map_err(|_| bad("counts"))?;
        let expected: f64 = fields[3].parse().map_err(|_| bad("expected_total"))?;

        let fresh = match records.last() {
            Some(last) if last.setting.label() == setting_label => false,
            _ => true,
        };
        if fresh {
            let setting = setting_from_label(setting_label).ok_or_else(|| {
                MeasurementError::BadCountFile(format!(
                    "line {}: unknown setting label '{setting_label}'",
                    lineno + 1
                ))
            })?;
            records.push(CountRecord {
                setting,
                counts: Vec::new(),
                total_expected: expected,
            });
        }
        let rec = records.last_mut().expect("just pushed");
        let expected_outcome = rec.setting.outcome_labels().get(rec.counts.len()).copied();
        if expected_outcome != Some(outcome) {
            return Err(MeasurementError::BadCountFile(format!(
                "line {}: outcome '{outcome}' out of order for setting '{setting_label}'",
                lineno + 1
            )));
        }
        rec.counts.push(count);
    }
    if !saw_header {
        return Err(MeasurementError::BadCountFile("missing header".into()));
    }
    for rec in &records {
        if rec.counts.len() != rec.setting.n_outcomes() {
            return Err(MeasurementError::BadCountFile(format!(
                "setting '{}' has {} outcomes, expected {}",
                rec.setting.label(),
                rec.counts.len(),
                rec.setting.n_outcomes()
            )));
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{prepared_state, slocc_project, Polarization, SpatialAmplitudes};
    use crate::teleport::BellOutcome;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};

    fn psi_plus() -> DensityMatrix {
        DensityMatrix::from_pure(&BellOutcome::PsiPlus.vector()).unwrap()
    }

    fn joint(a: char, b: char) -> MeasurementSetting {
        setting_from_label(&format!("{a}{b}")).unwrap()
    }

    #[test]
    fn bell_state_anticorrelates_in_z() {
        let probs = outcome_probs(&psi_plus(), &joint('Z', 'Z')).unwrap();
        let expected = [0.0, 0.5, 0.5, 0.0];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn bell_state_correlates_in_x() {
        let probs = outcome_probs(&psi_plus(), &joint('X', 'X')).unwrap();
        let expected = [0.5, 0.0, 0.0, 0.5];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn single_qubit_z_on_h() {
        let h = DensityMatrix::from_pure(&[C64::ONE, C64::ZERO]).unwrap();
        let setting = setting_from_label("Z").unwrap();
        let probs = outcome_probs(&h, &setting).unwrap();
        assert_eq!(probs, vec![1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = DensityMatrix::from_pure(&[C64::ONE, C64::ZERO]).unwrap();
        assert!(matches!(
            outcome_probs(&h, &joint('Z', 'Z')),
            Err(MeasurementError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_rate_outcomes_stay_zero() {
        let setting = setting_from_label("Z").unwrap();
        let mut rng = rng_from_seed(5);
        let rec = sample_counts(&setting, &[1.0, 0.0], 1000.0, &mut rng).unwrap();
        assert_eq!(rec.counts[1], 0);
        assert!(rec.counts[0] > 0);
    }

    #[test]
    fn sampling_concentrates_at_high_counts() {
        let setting = setting_from_label("Z").unwrap();
        let mut rng = rng_from_seed(42);
        let rec = sample_counts(&setting, &[0.5, 0.5], 1e6, &mut rng).unwrap();
        let sigma = (5e5f64).sqrt();
        for &n in &rec.counts {
            assert!((n as f64 - 5e5).abs() < 5.0 * sigma, "count {n}");
        }
    }

    #[test]
    fn sampling_mean_matches_rates() {
        let setting = setting_from_label("Z").unwrap();
        let probs = [0.3, 0.7];
        let mean_total = 200.0;
        let n_runs = 10_000;
        let mut sums = [0u64; 2];
        for seed in 0..n_runs {
            let mut rng = rng_from_seed(derive_seed(9000, seed));
            let rec = sample_counts(&setting, &probs, mean_total, &mut rng).unwrap();
            sums[0] += rec.counts[0];
            sums[1] += rec.counts[1];
        }
        for (k, &s) in sums.iter().enumerate() {
            let mean = s as f64 / n_runs as f64;
            let expected = mean_total * probs[k];
            assert!(
                (mean - expected).abs() / expected < 0.01,
                "empirical mean {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn sampling_is_reproducible_for_a_seed() {
        let setting = joint('Z', 'Z');
        let probs = outcome_probs(&psi_plus(), &setting).unwrap();
        let a = sample_counts(&setting, &probs, 5000.0, &mut rng_from_seed(7)).unwrap();
        let b = sample_counts(&setting, &probs, 5000.0, &mut rng_from_seed(7)).unwrap();
        assert_eq!(a, b);
    }

    fn outcome_at(alpha: f64, beta: f64) -> SloccOutcome {
        let amps = SpatialAmplitudes::from_angles(alpha, beta, ExchangeSign::Bosonic);
        slocc_project(&prepared_state(&amps, Polarization::H, Polarization::V).unwrap())
    }

    #[test]
    fn distinguishable_mix_is_maximally_mixed_at_balanced_angles() {
        let rho = distinguishable_mix(&outcome_at(FRAC_PI_4, FRAC_PI_4)).unwrap();
        let m = rho.matrix();
        assert!((m.get(1, 1).re - 0.5).abs() < 1e-12);
        assert!((m.get(2, 2).re - 0.5).abs() < 1e-12);
        assert_eq!(m.get(1, 2), C64::ZERO);
        assert_eq!(m.get(2, 1), C64::ZERO);
        let c = crate::metrics::concurrence(&rho).unwrap();
        assert!(c <= 1e-12, "concurrence {c}");
    }

    #[test]
    fn distinguishable_mix_leaves_product_states_alone() {
        let out = outcome_at(0.0, 0.0);
        let rho = distinguishable_mix(&out).unwrap();
        let pure = DensityMatrix::from_pure(out.state_vector().unwrap()).unwrap();
        assert!(rho.matrix().max_abs_diff(pure.matrix()) < 1e-15);
    }

    #[test]
    fn distinguishable_mix_weights_follow_the_amplitudes() {
        let rho = distinguishable_mix(&outcome_at(FRAC_PI_4, FRAC_PI_6)).unwrap();
        assert!((rho.matrix().get(1, 1).re - 0.75).abs() < 1e-12);
        assert!((rho.matrix().get(2, 2).re - 0.25).abs() < 1e-12);
    }

    #[test]
    fn distinguishable_mix_rejects_null_outcomes() {
        let out = SloccOutcome {
            prob: 0.0,
            state: None,
        };
        assert!(matches!(
            distinguishable_mix(&out),
            Err(MeasurementError::NullOutcome)
        ));
    }

    #[test]
    fn partial_visibility_interpolates() {
        let out = outcome_at(FRAC_PI_4, FRAC_PI_4);
        let rho = partially_distinguishable_mix(&out, 0.5).unwrap();
        assert!((rho.matrix().get(1, 2).re - 0.25).abs() < 1e-12);
        assert!(partially_distinguishable_mix(&out, 1.5).is_err());
    }

    #[test]
    fn hom_coincidences_vanish_for_identical_bosons() {
        assert_eq!(hom_coincidence_prob(C64::ONE, ExchangeSign::Bosonic), 0.0);
        assert_eq!(hom_coincidence_prob(C64::ZERO, ExchangeSign::Bosonic), 0.5);
        // visibility of the resulting dip is (max - min)/max = 1
        assert_eq!(hom_coincidence_prob(C64::ONE, ExchangeSign::Fermionic), 1.0);
    }

    #[test]
    fn count_csv_round_trip() {
        let rho = psi_plus();
        let records = sampled_records(&rho, &two_qubit_pauli_settings(), 5000.0, 3).unwrap();
        let mut buf = Vec::new();
        write_count_records(&mut buf, &records).unwrap();
        let back = read_count_records(std::io::BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn count_csv_rejects_junk() {
        let text = "setting_label,outcome,counts,expected_total\nQQ,++,1,5\n";
        assert!(read_count_records(std::io::BufReader::new(text.as_bytes())).is_err());
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(beta in 0.0..PI, la in 0..3usize, rb in 0..3usize) {
            let out = outcome_at(FRAC_PI_4, beta);
            let rho = DensityMatrix::from_pure(out.state_vector().unwrap()).unwrap();
            let labels = ['X', 'Y', 'Z'];
            let setting = joint(labels[la], labels[rb]);
            let probs = outcome_probs(&rho, &setting).unwrap();
            let total: f64 = probs.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(probs.iter().all(|&p| p >= 0.0));
        }
    }
}
