//! The eight reproducible experiments. Every experiment emits
//! deterministic CSV/JSON files into the configured output directory:
//! identical config and seed give byte-identical outputs. Sweep points
//! run on a worker pool with derived per-point seeds; row order follows
//! the grid regardless of scheduling.

use crate::config::{Experiment, ExperimentConfig};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use slocc_core::measurement::{
    correlator, derive_seed, exact_records, outcome_probs, partially_distinguishable_mix,
    rng_from_seed, sample_counts, two_qubit_pauli_settings, CountRecord, MeasurementSetting,
};
use slocc_core::metrics::{chsh_max, concurrence, DensityMatrix};
use slocc_core::optics::{
    fit_gaussian_with, hom_expected, write_hom_csv, FitWeighting, GaussianFit, HomDataset,
    ScanSign, SetupConfig,
};
use slocc_core::particles::{indistinguishability, prepared_state, slocc_project, Polarization};
use slocc_core::qmath::MatrixJson;
use slocc_core::teleport::{
    calibrate_depolarization, classical_bound_check, depolarized_bell_resource,
    six_standard_inputs, teleport, BellOutcome, TeleportRunJson,
};
use slocc_core::tomography::state_tomography;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

/// Runs one experiment, returning the paths of the files it wrote.
pub fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).with_context(|| {
        format!(
            "cannot create output directory {}",
            config.out_dir.display()
        )
    })?;
    match experiment {
        Experiment::EntangleSweep => entangle_sweep(config),
        Experiment::ChshSweep => chsh_sweep(config),
        Experiment::BellStates => bell_states(config),
        Experiment::Occupancy => occupancy(config),
        Experiment::Distinguishable => distinguishable(config),
        Experiment::Hom => hom(config),
        Experiment::Teleport => teleport_table(config),
        Experiment::ProcessTomo => process_tomo(config),
    }
}

fn open_out(config: &ExperimentConfig, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = config.out_dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

/// Projected state at (alpha, beta) with the configured coherence
/// visibility, plus its projection probability.
fn projected_state(config: &ExperimentConfig, beta: f64) -> Result<(f64, DensityMatrix)> {
    let cfg = SetupConfig::new(config.alpha, beta).context("bad distribution angles")?;
    let amps = slocc_core::optics::setup_distribute(&cfg);
    let state = prepared_state(&amps, Polarization::H, Polarization::V)
        .context("state preparation failed")?;
    let outcome = slocc_project(&state);
    let rho = partially_distinguishable_mix(&outcome, config.visibility)
        .context("projection produced no state")?;
    Ok((outcome.prob, rho))
}

fn tomography_records(
    config: &ExperimentConfig,
    rho: &DensityMatrix,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    let settings = two_qubit_pauli_settings();
    let records = if config.exact {
        exact_records(rho, &settings)
    } else {
        slocc_core::measurement::sampled_records(rho, &settings, config.counts, seed)
    };
    Ok(records?)
}

// ---------------------------------------------------------------------------
// entangle-sweep
// ---------------------------------------------------------------------------

struct EntangleRow {
    beta: f64,
    i_value: f64,
    c_theory: f64,
    c_tomo: f64,
    c_err: f64,
}

fn entangle_sweep(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::EntangleSweep);
    let rows: Vec<Result<EntangleRow>> = config
        .beta_grid()
        .into_par_iter()
        .enumerate()
        .map(|(idx, beta)| -> Result<EntangleRow> {
            let cfg = SetupConfig::new(config.alpha, beta).context("bad angles")?;
            let amps = slocc_core::optics::setup_distribute(&cfg);
            let i_value = indistinguishability(&amps)
                .context("measure undefined here")?
                .i_value;
            let (_, pure) = projected_state(
                &ExperimentConfig {
                    visibility: 1.0,
                    ..config.clone()
                },
                beta,
            )?;
            let c_theory = concurrence(&pure)?;
            let (_, rho) = projected_state(config, beta)?;
            let records = tomography_records(config, &rho, derive_seed(config.seed, idx as u64))?;
            let result = state_tomography(&records, 4)?;
            let c_tomo = concurrence(&result.rho)?;
            let c_err = if config.exact {
                0.0
            } else {
                slocc_core::tomography::error_bars(
                    &records,
                    |recs| {
                        let r = state_tomography(recs, 4)?;
                        concurrence(&r.rho).map_err(Into::into)
                    },
                    config.bootstrap_resamples,
                    derive_seed(config.seed, 10_000 + idx as u64),
                )?
                .std_dev
            };
            Ok(EntangleRow {
                beta,
                i_value,
                c_theory,
                c_tomo,
                c_err,
            })
        })
        .collect();

    let (path, mut w) = open_out(config, "entangle_sweep.csv")?;
    writeln!(w, "# config {hash}")?;
    writeln!(w, "beta,i_value,c_theory,c_tomo,c_err")?;
    for row in rows {
        let r = row?;
        writeln!(
            w,
            "{},{},{},{},{}",
            r.beta, r.i_value, r.c_theory, r.c_tomo, r.c_err
        )?;
    }
    w.flush()?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// chsh-sweep
// ---------------------------------------------------------------------------

/// CHSH records for the four optimal analyzer pairs, exact or sampled.
fn chsh_records(
    config: &ExperimentConfig,
    rho: &DensityMatrix,
    seed: u64,
) -> Result<(Vec<CountRecord>, [f64; 4])> {
    let result = chsh_max(rho)?;
    let s = result.settings;
    let combos = [
        (s.a, s.b),
        (s.a, s.b_prime),
        (s.a_prime, s.b),
        (s.a_prime, s.b_prime),
    ];
    let weights = [1.0, 1.0, 1.0, -1.0];
    let mut records = Vec::with_capacity(4);
    for (k, (left, right)) in combos.into_iter().enumerate() {
        let setting = MeasurementSetting::Joint {
            left,
            right,
            label: format!("chsh{k}"),
        };
        let rec = if config.exact {
            exact_records(rho, std::slice::from_ref(&setting))?.remove(0)
        } else {
            let probs = outcome_probs(rho, &setting)?;
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            sample_counts(&setting, &probs, config.counts, &mut rng)?
        };
        records.push(rec);
    }
    Ok((records, weights))
}

fn chsh_value(records: &[CountRecord], weights: &[f64; 4]) -> Result<f64> {
    let mut s = 0.0;
    for (rec, w) in records.iter().zip(weights) {
        s += w * correlator(rec)?;
    }
    Ok(s)
}

struct ChshRow {
    beta: f64,
    i_value: f64,
    s_theory: f64,
    s_sim: f64,
    s_err: f64,
}

fn chsh_sweep(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::ChshSweep);
    let rows: Vec<Result<ChshRow>> = config
        .beta_grid()
        .into_par_iter()
        .enumerate()
        .map(|(idx, beta)| -> Result<ChshRow> {
            let cfg = SetupConfig::new(config.alpha, beta).context("bad angles")?;
            let amps = slocc_core::optics::setup_distribute(&cfg);
            let i_value = indistinguishability(&amps)
                .context("measure undefined here")?
                .i_value;
            let (_, pure) = projected_state(
                &ExperimentConfig {
                    visibility: 1.0,
                    ..config.clone()
                },
                beta,
            )?;
            let s_theory = chsh_max(&pure)?.s_value;
            let (_, rho) = projected_state(config, beta)?;
            let (records, weights) =
                chsh_records(config, &rho, derive_seed(config.seed, idx as u64))?;
            let s_sim = chsh_value(&records, &weights)?;
            let s_err = if config.exact {
                0.0
            } else {
                slocc_core::tomography::error_bars(
                    &records,
                    |recs| {
                        let mut s = 0.0;
                        for (rec, w) in recs.iter().zip(weights) {
                            s += w * correlator(rec)?;
                        }
                        Ok(s)
                    },
                    config.bootstrap_resamples,
                    derive_seed(config.seed, 20_000 + idx as u64),
                )?
                .std_dev
            };
            Ok(ChshRow {
                beta,
                i_value,
                s_theory,
                s_sim,
                s_err,
            })
        })
        .collect();

    let (path, mut w) = open_out(config, "chsh_sweep.csv")?;
    writeln!(w, "# config {hash}")?;
    writeln!(w, "beta,i_value,s_theory,s_sim,s_err")?;
    for row in rows {
        let r = row?;
        writeln!(
            w,
            "{},{},{},{},{}",
            r.beta, r.i_value, r.s_theory, r.s_sim, r.s_err
        )?;
    }
    w.flush()?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// bell-states
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BellStateJson {
    config_hash: String,
    beta: f64,
    target: String,
    fidelity: f64,
    rho: MatrixJson,
}

fn bell_states(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::BellStates);
    let mut paths = Vec::new();
    for (k, &beta) in config.bell_betas.iter().enumerate() {
        let target = if beta < std::f64::consts::FRAC_PI_2 {
            BellOutcome::PsiPlus
        } else {
            BellOutcome::PsiMinus
        };
        let (_, rho) = projected_state(config, beta)?;
        let records = tomography_records(config, &rho, derive_seed(config.seed, k as u64))?;
        let result = state_tomography(&records, 4)?.with_target_state(&target.vector())?;
        let name = match target {
            BellOutcome::PsiPlus => "bell_psi_plus.json",
            _ => "bell_psi_minus.json",
        };
        let (path, mut w) = open_out(config, name)?;
        serde_json::to_writer_pretty(
            &mut w,
            &BellStateJson {
                config_hash: hash.clone(),
                beta,
                target: target.label().to_string(),
                fidelity: result.fidelity_vs_target.expect("target set"),
                rho: MatrixJson::from(result.rho.matrix()),
            },
        )?;
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// occupancy
// ---------------------------------------------------------------------------

fn occupancy(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::Occupancy);
    let n = config.occupancy_points;
    let rows: Vec<Result<(f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let beta = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
            let cfg = SetupConfig::new(config.alpha, beta).context("bad angles")?;
            let theory = slocc_core::optics::occupancy_l(&cfg);
            let frequency = if config.exact {
                theory
            } else {
                let mut rng = rng_from_seed(derive_seed(config.seed, i as u64));
                let setting = MeasurementSetting::Single {
                    axis: slocc_core::qmath::BlochVector::z_axis(),
                    label: "Z".to_string(),
                };
                let rec =
                    sample_counts(&setting, &[theory, 1.0 - theory], config.counts, &mut rng)?;
                let total = rec.total();
                if total == 0 {
                    0.0
                } else {
                    rec.counts[0] as f64 / total as f64
                }
            };
            Ok((beta, theory, frequency))
        })
        .collect();

    let (path, mut w) = open_out(config, "occupancy.csv")?;
    writeln!(w, "# config {hash}")?;
    writeln!(w, "beta,theory,frequency")?;
    for row in rows {
        let (beta, theory, frequency) = row?;
        writeln!(w, "{beta},{theory},{frequency}")?;
    }
    w.flush()?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// distinguishable
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DistinguishableJson {
    config_hash: String,
    concurrence_exact: f64,
    concurrence_tomo: f64,
    rho: MatrixJson,
}

fn distinguishable(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::Distinguishable);
    let cfg = SetupConfig::new(std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4)
        .expect("fixed angles are valid");
    let amps = slocc_core::optics::setup_distribute(&cfg);
    let state = prepared_state(&amps, Polarization::H, Polarization::V)?;
    let outcome = slocc_project(&state);
    let rho = slocc_core::measurement::distinguishable_mix(&outcome)?;
    let concurrence_exact = concurrence(&rho)?;
    let records = tomography_records(config, &rho, config.seed)?;
    let result = state_tomography(&records, 4)?;
    let concurrence_tomo = concurrence(&result.rho)?;

    let (path, mut w) = open_out(config, "distinguishable.json")?;
    serde_json::to_writer_pretty(
        &mut w,
        &DistinguishableJson {
            config_hash: hash,
            concurrence_exact,
            concurrence_tomo,
            rho: MatrixJson::from(rho.matrix()),
        },
    )?;
    w.flush()?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// hom
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HomFitJson {
    config_hash: String,
    scan: String,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    visibility: f64,
    residual: f64,
}

fn hom_scan(
    config: &ExperimentConfig,
    sign: ScanSign,
    truth: &GaussianFit,
    duration_s: f64,
    seed: u64,
) -> Result<(HomDataset, GaussianFit)> {
    let h = &config.hom;
    let delays: Vec<f64> = (0..h.points)
        .map(|i| -h.span + 2.0 * h.span * i as f64 / (h.points - 1) as f64)
        .collect();
    let mut rng = rng_from_seed(seed);
    let counts: Vec<f64> = delays
        .iter()
        .map(|&x| {
            let lambda = hom_expected(x, truth);
            if config.exact {
                lambda
            } else {
                slocc_core::measurement::sample_poisson(lambda, &mut rng) as f64
            }
        })
        .collect();
    let data = HomDataset::new(delays, counts, duration_s)?;
    let fit = fit_gaussian_with(&data, sign, FitWeighting::Uniform).context("scan fit failed")?;
    Ok((data, fit))
}

fn hom(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::Hom);
    let h = &config.hom;
    let mut paths = Vec::new();

    let scans = [
        (
            "dip",
            ScanSign::Dip,
            h.dip_baseline,
            h.dip_visibility,
            h.dip_duration_s,
            0u64,
        ),
        (
            "peak",
            ScanSign::Peak,
            h.peak_baseline,
            h.peak_visibility,
            h.peak_duration_s,
            1u64,
        ),
    ];
    for (name, sign, baseline, visibility, duration, salt) in scans {
        let truth = GaussianFit {
            a: baseline,
            b: h.width_b,
            c: 0.0,
            d: visibility,
            sign,
            residual: 0.0,
        };
        let (data, fit) = hom_scan(
            config,
            sign,
            &truth,
            duration,
            derive_seed(config.seed, salt),
        )?;

        let (scan_path, mut w) = open_out(config, &format!("hom_{name}.csv"))?;
        writeln!(w, "# config {hash}")?;
        write_hom_csv(&mut w, &data)?;
        w.flush()?;
        paths.push(scan_path);

        let (fit_path, mut w) = open_out(config, &format!("hom_{name}_fit.json"))?;
        serde_json::to_writer_pretty(
            &mut w,
            &HomFitJson {
                config_hash: hash.clone(),
                scan: name.to_string(),
                a: fit.a,
                b: fit.b,
                c: fit.c,
                d: fit.d,
                visibility: fit.visibility(),
                residual: fit.residual,
            },
        )?;
        w.flush()?;
        paths.push(fit_path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// teleport
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TeleportSummaryJson {
    config_hash: String,
    /// Depolarization weight of the resource (1 in exact mode).
    v: f64,
    /// Projection probability of the resource state itself.
    p_lr: f64,
    average_fidelity: f64,
    all_above_classical: bool,
    runs: Vec<TeleportRunJson>,
}

fn teleport_resource(config: &ExperimentConfig) -> Result<(f64, DensityMatrix)> {
    if config.exact {
        Ok((1.0, depolarized_bell_resource(1.0)?))
    } else {
        let cal = calibrate_depolarization(config.teleport_target_average)
            .context("calibration failed")?;
        Ok((cal.v, depolarized_bell_resource(cal.v)?))
    }
}

fn teleport_table(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::Teleport);
    let (v, resource) = teleport_resource(config)?;
    // the resource is generated at alpha = beta = pi/4, where the
    // projection succeeds half the time
    let (p_lr, _) = projected_state(
        &ExperimentConfig {
            visibility: 1.0,
            ..config.clone()
        },
        std::f64::consts::FRAC_PI_4,
    )?;

    let mut runs = Vec::new();
    let mut fidelities = Vec::new();
    for (_, input) in six_standard_inputs() {
        let run = teleport(&input, &resource)?;
        fidelities.push(run.fidelity);
        runs.push(run);
    }
    let report = classical_bound_check(&fidelities, None)?;
    let average_fidelity = fidelities.iter().sum::<f64>() / fidelities.len() as f64;

    let (csv_path, mut w) = open_out(config, "teleport_table.csv")?;
    writeln!(w, "# config {hash}")?;
    writeln!(w, "state,fidelity,above_classical")?;
    for ((name, _), check) in six_standard_inputs().iter().zip(&report.checks) {
        writeln!(w, "{name},{},{}", check.fidelity, check.above)?;
    }
    w.flush()?;

    let (json_path, mut w) = open_out(config, "teleport_summary.json")?;
    serde_json::to_writer_pretty(
        &mut w,
        &TeleportSummaryJson {
            config_hash: hash,
            v,
            p_lr,
            average_fidelity,
            all_above_classical: report.all_above,
            runs: runs.iter().map(|r| r.to_json()).collect(),
        },
    )?;
    w.flush()?;
    Ok(vec![csv_path, json_path])
}

// ---------------------------------------------------------------------------
// process-tomo
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProcessJson {
    config_hash: String,
    v: f64,
    process_fidelity: f64,
    tp_error: f64,
    chi: MatrixJson,
}

fn process_tomo(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config.hash(Experiment::ProcessTomo);
    let (v, resource) = teleport_resource(config)?;
    let pairs: Vec<(DensityMatrix, DensityMatrix)> = six_standard_inputs()
        .into_iter()
        .map(|(_, input)| -> Result<_> {
            let rho_prep = DensityMatrix::from_pure(&input.vector())?;
            let run = teleport(&input, &resource)?;
            Ok((rho_prep, run.output))
        })
        .collect::<Result<_>>()?;
    let chi = slocc_core::tomography::process_tomography(&pairs)?;

    let (path, mut w) = open_out(config, "chi.json")?;
    serde_json::to_writer_pretty(
        &mut w,
        &ProcessJson {
            config_hash: hash,
            v,
            process_fidelity: chi.process_fidelity(),
            tp_error: chi.tp_error(),
            chi: MatrixJson::from(chi.chi()),
        },
    )?;
    w.flush()?;
    Ok(vec![path])
}
