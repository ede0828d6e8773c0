//! Cross-module behaviour of the full simulation chain: apparatus angles
//! to spatial amplitudes to the projected state, its entanglement and
//! nonlocality figures, simulated counts, reconstruction, and
//! teleportation.

use slocc_core::measurement::{
    correlator, exact_records, hom_coincidence_prob, outcome_probs, sample_counts,
    two_qubit_pauli_settings, MeasurementSetting,
};
use slocc_core::metrics::{chsh_max, concurrence, entanglement_report, DensityMatrix};
use slocc_core::optics::{
    fit_gaussian, hom_expected, occupancy_l, setup_distribute, GaussianFit, HomDataset, ScanSign,
    SetupConfig,
};
use slocc_core::particles::{
    indistinguishability, prepared_state, slocc_project, ExchangeSign, Polarization,
    SpatialAmplitudes,
};
use slocc_core::qmath::C64;
use slocc_core::teleport::{teleport, InputQubit};
use slocc_core::tomography::state_tomography;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

fn projected_density(alpha: f64, beta: f64) -> (f64, DensityMatrix) {
    let cfg = SetupConfig::new(alpha, beta).unwrap();
    let amps = setup_distribute(&cfg);
    let out = slocc_project(&prepared_state(&amps, Polarization::H, Polarization::V).unwrap());
    let rho = DensityMatrix::from_pure(out.state_vector().unwrap()).unwrap();
    (out.prob, rho)
}

#[test]
fn indistinguishability_equals_entanglement_of_formation_on_the_balanced_family() {
    // with the first packet balanced, the entropic measure and the
    // entanglement of formation of the projected state are one curve
    for k in 0..=50 {
        let beta = 0.01 + (PI - 0.02) * k as f64 / 50.0;
        let amps = SpatialAmplitudes::from_angles(FRAC_PI_4, beta, ExchangeSign::Bosonic);
        let i_value = indistinguishability(&amps).unwrap().i_value;
        let (_, rho) = projected_density(FRAC_PI_4, beta);
        let report = entanglement_report(&rho).unwrap();
        assert!(
            (i_value - report.e_formation).abs() < 1e-9,
            "beta = {beta}: I = {i_value}, E_f = {}",
            report.e_formation
        );
    }
}

#[test]
fn concurrence_follows_sin_two_beta() {
    for k in 0..=50 {
        let beta = FRAC_PI_2 * k as f64 / 50.0;
        let (prob, rho) = projected_density(FRAC_PI_4, beta);
        assert!((prob - 0.5).abs() < 1e-12);
        let c = concurrence(&rho).unwrap();
        assert!(
            (c - (2.0 * beta).sin()).abs() < 1e-12,
            "beta = {beta}: C = {c} vs {}",
            (2.0 * beta).sin()
        );
    }
}

#[test]
fn exchange_statistics_flip_the_relative_sign_but_not_the_entanglement() {
    for beta in [0.3, 0.8, 1.2] {
        let bos = SpatialAmplitudes::from_angles(FRAC_PI_4, beta, ExchangeSign::Bosonic);
        let fer = SpatialAmplitudes::from_angles(FRAC_PI_4, beta, ExchangeSign::Fermionic);
        let vb = slocc_project(&prepared_state(&bos, Polarization::H, Polarization::V).unwrap());
        let vf = slocc_project(&prepared_state(&fer, Polarization::H, Polarization::V).unwrap());
        let cb =
            concurrence(&DensityMatrix::from_pure(vb.state_vector().unwrap()).unwrap()).unwrap();
        let cf =
            concurrence(&DensityMatrix::from_pure(vf.state_vector().unwrap()).unwrap()).unwrap();
        assert!((cb - cf).abs() < 1e-12, "beta = {beta}");
    }
}

#[test]
fn chsh_settings_survive_the_born_rule_round_trip() {
    // evaluate S through outcome probabilities rather than the closed
    // form: four joint settings, exact counts, empirical correlators
    for beta in [0.3, FRAC_PI_4, 1.1] {
        let (_, rho) = projected_density(FRAC_PI_4, beta);
        let result = chsh_max(&rho).unwrap();
        let s = &result.settings;
        let combos = [
            (s.a, s.b, 1.0),
            (s.a, s.b_prime, 1.0),
            (s.a_prime, s.b, 1.0),
            (s.a_prime, s.b_prime, -1.0),
        ];
        let mut s_sim = 0.0;
        for (k, (left, right, weight)) in combos.into_iter().enumerate() {
            let setting = MeasurementSetting::Joint {
                left,
                right,
                label: format!("chsh{k}"),
            };
            let records = exact_records(&rho, std::slice::from_ref(&setting)).unwrap();
            s_sim += weight * correlator(&records[0]).unwrap();
        }
        assert!(
            (s_sim - result.s_value).abs() < 1e-7,
            "beta = {beta}: S_sim = {s_sim} vs {}",
            result.s_value
        );
    }
}

#[test]
fn sampled_chsh_lands_near_the_quantum_bound() {
    let (_, rho) = projected_density(FRAC_PI_4, FRAC_PI_4);
    let result = chsh_max(&rho).unwrap();
    let s = &result.settings;
    let combos = [
        (s.a, s.b, 1.0),
        (s.a, s.b_prime, 1.0),
        (s.a_prime, s.b, 1.0),
        (s.a_prime, s.b_prime, -1.0),
    ];
    let mut s_sim = 0.0;
    for (k, (left, right, weight)) in combos.into_iter().enumerate() {
        let setting = MeasurementSetting::Joint {
            left,
            right,
            label: format!("chsh{k}"),
        };
        let probs = outcome_probs(&rho, &setting).unwrap();
        let mut rng = slocc_core::measurement::rng_from_seed(100 + k as u64);
        let rec = sample_counts(&setting, &probs, 20_000.0, &mut rng).unwrap();
        s_sim += weight * correlator(&rec).unwrap();
    }
    assert!(
        (s_sim - 2.0 * 2.0f64.sqrt()).abs() < 0.05,
        "S_sim = {s_sim}"
    );
    assert!(s_sim > 2.0, "no violation observed");
}

#[test]
fn chsh_error_bars_at_realistic_counts_are_at_the_few_percent_scale() {
    // around 2200 counts per analyzer pair the bootstrap spread of S
    // sits near 0.03
    let amps = SpatialAmplitudes::from_angles(FRAC_PI_4, 0.776, ExchangeSign::Bosonic);
    let out = slocc_project(&prepared_state(&amps, Polarization::H, Polarization::V).unwrap());
    let rho = slocc_core::measurement::partially_distinguishable_mix(&out, 0.986).unwrap();
    let result = chsh_max(&rho).unwrap();
    let s = &result.settings;
    let combos = [
        (s.a, s.b, 1.0),
        (s.a, s.b_prime, 1.0),
        (s.a_prime, s.b, 1.0),
        (s.a_prime, s.b_prime, -1.0),
    ];
    let weights: Vec<f64> = combos.iter().map(|c| c.2).collect();
    let mut records = Vec::new();
    for (k, (left, right, _)) in combos.into_iter().enumerate() {
        let setting = MeasurementSetting::Joint {
            left,
            right,
            label: format!("chsh{k}"),
        };
        let probs = outcome_probs(&rho, &setting).unwrap();
        let mut rng = slocc_core::measurement::rng_from_seed(300 + k as u64);
        records.push(sample_counts(&setting, &probs, 2200.0, &mut rng).unwrap());
    }
    let report = slocc_core::tomography::error_bars(
        &records,
        |recs| {
            let mut total = 0.0;
            for (rec, w) in recs.iter().zip(&weights) {
                total += w * correlator(rec)?;
            }
            Ok(total)
        },
        200,
        17,
    )
    .unwrap();
    assert!(
        (0.01..0.06).contains(&report.std_dev),
        "sigma_S = {} is off the expected scale",
        report.std_dev
    );
    // doubling the counts tightens the bar by roughly sqrt(2)
    let mut records_2n = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        let MeasurementSetting::Joint { left, right, .. } = rec.setting.clone() else {
            unreachable!()
        };
        let setting = MeasurementSetting::Joint {
            left,
            right,
            label: format!("chsh{k}"),
        };
        let probs = outcome_probs(&rho, &setting).unwrap();
        let mut rng = slocc_core::measurement::rng_from_seed(400 + k as u64);
        records_2n.push(sample_counts(&setting, &probs, 4400.0, &mut rng).unwrap());
    }
    let report_2n = slocc_core::tomography::error_bars(
        &records_2n,
        |recs| {
            let mut total = 0.0;
            for (rec, w) in recs.iter().zip(&weights) {
                total += w * correlator(rec)?;
            }
            Ok(total)
        },
        200,
        18,
    )
    .unwrap();
    let ratio = report.std_dev / report_2n.std_dev;
    assert!((1.1..1.9).contains(&ratio), "scaling ratio {ratio}");
}

#[test]
fn tomography_of_the_generated_bell_state_is_faithful() {
    let (_, rho) = projected_density(FRAC_PI_4, FRAC_PI_4);
    let records = exact_records(&rho, &two_qubit_pauli_settings()).unwrap();
    let result = state_tomography(&records, 4).unwrap();
    assert!(result.rho.matrix().max_abs_diff(rho.matrix()) < 1e-9);
}

#[test]
fn detection_level_distinguishability_kills_the_reconstructed_entanglement() {
    let cfg = SetupConfig::new(FRAC_PI_4, FRAC_PI_4).unwrap();
    let amps = setup_distribute(&cfg);
    let out = slocc_project(&prepared_state(&amps, Polarization::H, Polarization::V).unwrap());
    let mixed = slocc_core::measurement::distinguishable_mix(&out).unwrap();
    let records =
        slocc_core::measurement::sampled_records(&mixed, &two_qubit_pauli_settings(), 5000.0, 7)
            .unwrap();
    let result = state_tomography(&records, 4).unwrap();
    let c = concurrence(&result.rho).unwrap();
    assert!(c < 0.05, "C = {c} should vanish within statistical error");
}

#[test]
fn occupancy_matches_the_projected_marginal() {
    // |l'|^2 from the apparatus equals the probability of finding the
    // second packet in L computed from the prepared state
    for k in 0..=10 {
        let beta = FRAC_PI_2 * k as f64 / 10.0;
        let cfg = SetupConfig::new(FRAC_PI_4, beta).unwrap();
        assert!((occupancy_l(&cfg) - beta.sin().powi(2)).abs() < 1e-12);
    }
}

#[test]
fn teleportation_through_the_generated_resource_is_exact() {
    let (p_lr, rho) = projected_density(FRAC_PI_4, FRAC_PI_4);
    assert!((p_lr - 0.5).abs() < 1e-12);
    let run = teleport(&InputQubit::phi_plus(), &rho).unwrap();
    assert!((run.outcome_prob - 0.25).abs() < 1e-12);
    assert!((run.fidelity - 1.0).abs() < 1e-10);
    // end-to-end conditionality: projection and branch acceptance compound
    let end_to_end = p_lr * run.outcome_prob;
    assert!((end_to_end - 0.125).abs() < 1e-12);
}

#[test]
fn interference_scan_built_from_the_coincidence_law_fits_to_unit_visibility() {
    // Gaussian wave packets at delay x overlap as exp(-x^2/4), so the
    // coincidence law produces a dip a(1 - exp(-x^2/2)) of visibility 1
    let baseline = 4000.0;
    let delays: Vec<f64> = (0..41).map(|i| -5.0 + 0.25 * i as f64).collect();
    let counts: Vec<f64> = delays
        .iter()
        .map(|&x| {
            let overlap = C64::new((-x * x / 4.0).exp(), 0.0);
            2.0 * baseline * hom_coincidence_prob(overlap, ExchangeSign::Bosonic)
        })
        .collect();
    let data = HomDataset::new(delays, counts, 5.0).unwrap();
    let fit = fit_gaussian(&data, ScanSign::Dip).unwrap();
    assert!((fit.d - 1.0).abs() < 1e-9, "visibility = {}", fit.d);
    assert!((fit.b - 0.5).abs() < 1e-9, "b = {}", fit.b);
    assert!((fit.a - baseline).abs() < 1e-6);
    // the fitted minimum really is the coincidence minimum at zero delay
    assert!(hom_expected(fit.c, &fit) < hom_expected(1.0, &fit));
}

#[test]
fn poisson_sampled_dip_recovers_the_target_visibility() {
    let truth = GaussianFit {
        a: 3000.0,
        b: 0.5,
        c: 0.0,
        d: 0.977,
        sign: ScanSign::Dip,
        residual: 0.0,
    };
    let delays: Vec<f64> = (0..41).map(|i| -5.0 + 0.25 * i as f64).collect();
    let mut errors: Vec<f64> = (0..40u64)
        .map(|seed| {
            let mut rng = slocc_core::measurement::rng_from_seed(seed);
            let counts: Vec<f64> = delays
                .iter()
                .map(|&x| {
                    let lambda = hom_expected(x, &truth);
                    use rand_distr::Distribution;
                    rand_distr::Poisson::new(lambda)
                        .unwrap()
                        .sample(&mut rng)
                        .round()
                })
                .collect();
            let data = HomDataset::new(delays.clone(), counts, 5.0).unwrap();
            let fit = fit_gaussian(&data, ScanSign::Dip).unwrap();
            (fit.d - 0.977).abs()
        })
        .collect();
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errors[errors.len() / 2];
    assert!(median <= 0.005, "median |d - 0.977| = {median}");
}
