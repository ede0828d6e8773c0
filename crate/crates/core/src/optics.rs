//! Jones-calculus model of the optical apparatus: wave plates mapped to
//! 2x2 polarization unitaries, the wave-plate/PBS chain that distributes
//! each photon over the two operational regions, and Gaussian dip/peak
//! fitting for two-photon interference scans.

use crate::particles::{ExchangeSign, SpatialAmplitudes};
use crate::qmath::{matvec, ComplexMatrix, C64};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("{kind:?} requires a wave-plate angle")]
    MissingAngle { kind: ElementKind },
    #[error("{kind:?} does not take an angle")]
    SpuriousAngle { kind: ElementKind },
    #[error("distribution angles must lie in [0, pi], got alpha = {alpha}, beta = {beta}")]
    AngleOutOfRange { alpha: f64, beta: f64 },
    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit needs varying counts, all {count} points are equal")]
    ConstantCounts { count: usize },
    #[error("fit did not converge after {iterations} iterations (residual {residual:.6e}); best-so-far parameters attached")]
    FitDidNotConverge {
        iterations: usize,
        residual: f64,
        best: Box<GaussianFit>,
    },
    #[error("scan CSV: {0}")]
    BadScanFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Hwp,
    Qwp,
    Pbs,
    Bd,
    FlipHwp45,
}

/// One element of the apparatus. Wave plates carry a fast-axis angle in
/// radians; path-level devices (PBS, BD) carry none.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalElement {
    pub kind: ElementKind,
    pub angle: Option<f64>,
}

impl OpticalElement {
    pub fn hwp(angle: f64) -> Self {
        Self {
            kind: ElementKind::Hwp,
            angle: Some(angle),
        }
    }

    pub fn qwp(angle: f64) -> Self {
        Self {
            kind: ElementKind::Qwp,
            angle: Some(angle),
        }
    }

    pub fn pbs() -> Self {
        Self {
            kind: ElementKind::Pbs,
            angle: None,
        }
    }

    pub fn bd() -> Self {
        Self {
            kind: ElementKind::Bd,
            angle: None,
        }
    }

    pub fn flip_hwp_45() -> Self {
        Self {
            kind: ElementKind::FlipHwp45,
            angle: None,
        }
    }
}

/// Action of an element on the polarization vector. Polarizing splitters
/// act at the path level: the transmitted port projects onto H, the
/// reflected (or displaced) port onto V.
#[derive(Clone, Debug, PartialEq)]
pub enum JonesAction {
    Unitary(ComplexMatrix),
    PathSplit {
        transmitted: ComplexMatrix,
        reflected: ComplexMatrix,
    },
}

fn hwp_matrix(theta: f64) -> ComplexMatrix {
    let (s, c) = (2.0 * theta).sin_cos();
    ComplexMatrix::from_rows(&[
        vec![C64::new(c, 0.0), C64::new(s, 0.0)],
        vec![C64::new(s, 0.0), C64::new(-c, 0.0)],
    ])
}

fn qwp_matrix(theta: f64) -> ComplexMatrix {
    // Unitary with eigenvalues {1, i} on the fast/slow axes.
    let (s, c) = theta.sin_cos();
    let (c2, s2, sc) = (c * c, s * s, s * c);
    ComplexMatrix::from_rows(&[
        vec![C64::new(c2, s2), C64::new(sc, -sc)],
        vec![C64::new(sc, -sc), C64::new(s2, c2)],
    ])
}

fn pol_projectors() -> (ComplexMatrix, ComplexMatrix) {
    let h = ComplexMatrix::from_rows(&[vec![C64::ONE, C64::ZERO], vec![C64::ZERO, C64::ZERO]]);
    let v = ComplexMatrix::from_rows(&[vec![C64::ZERO, C64::ZERO], vec![C64::ZERO, C64::ONE]]);
    (h, v)
}

/// Jones action of a single element. Wave plates must carry an angle;
/// PBS/BD/fixed flips must not.
pub fn element_jones(e: &OpticalElement) -> Result<JonesAction, OpticsError> {
    match (e.kind, e.angle) {
        (ElementKind::Hwp, Some(theta)) => Ok(JonesAction::Unitary(hwp_matrix(theta))),
        (ElementKind::Qwp, Some(theta)) => Ok(JonesAction::Unitary(qwp_matrix(theta))),
        (ElementKind::Hwp | ElementKind::Qwp, None) => {
            Err(OpticsError::MissingAngle { kind: e.kind })
        }
        (ElementKind::FlipHwp45, None) => Ok(JonesAction::Unitary(hwp_matrix(
            std::f64::consts::FRAC_PI_4,
        ))),
        (ElementKind::Pbs | ElementKind::Bd, None) => {
            let (transmitted, reflected) = pol_projectors();
            Ok(JonesAction::PathSplit {
                transmitted,
                reflected,
            })
        }
        (ElementKind::Pbs | ElementKind::Bd | ElementKind::FlipHwp45, Some(_)) => {
            Err(OpticsError::SpuriousAngle { kind: e.kind })
        }
    }
}

/// Distribution angles of the two steering half-wave plates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetupConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl SetupConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, OpticsError> {
        if !(0.0..=std::f64::consts::PI).contains(&alpha)
            || !(0.0..=std::f64::consts::PI).contains(&beta)
        {
            return Err(OpticsError::AngleOutOfRange { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }
}

fn unitary(e: &OpticalElement) -> ComplexMatrix {
    match element_jones(e).expect("valid wave plate") {
        JonesAction::Unitary(m) => m,
        JonesAction::PathSplit { .. } => unreachable!("wave plates are unitary"),
    }
}

fn split() -> (ComplexMatrix, ComplexMatrix) {
    match element_jones(&OpticalElement::pbs()).expect("PBS takes no angle") {
        JonesAction::PathSplit {
            transmitted,
            reflected,
        } => (transmitted, reflected),
        JonesAction::Unitary(_) => unreachable!("PBS splits paths"),
    }
}

/// Rotates `v` by the global phase that best aligns it with `reference`;
/// single-photon amplitudes only matter up to that phase.
fn align_global_phase(v: &mut [C64; 2], reference: [C64; 2]) {
    let z = v[0].conj() * reference[0] + v[1].conj() * reference[1];
    if z.norm() > 1e-12 {
        let rot = z / z.norm();
        v[0] *= rot;
        v[1] *= rot;
    }
}

/// Traces one photon through its steering plate, the PBS and the fixed
/// flip plate before L, returning its (L, R) region amplitudes. Asserts
/// that the polarization in both regions is back at the input one.
fn distribute_one(hwp_angle: f64, input_pol: usize, transmitted_goes_left: bool) -> [C64; 2] {
    let input = if input_pol == 0 {
        [C64::ONE, C64::ZERO]
    } else {
        [C64::ZERO, C64::ONE]
    };
    let plate = unitary(&OpticalElement::hwp(hwp_angle));
    let rotated = matvec(&plate, &input);
    let (p_h, p_v) = split();
    let transmitted = matvec(&p_h, &rotated);
    let reflected = matvec(&p_v, &rotated);
    let (to_left, to_right) = if transmitted_goes_left {
        (transmitted, reflected)
    } else {
        (reflected, transmitted)
    };
    // the flip plate before L restores the polarization the PBS routed away
    let flip = unitary(&OpticalElement::flip_hwp_45());
    let left = matvec(&flip, &to_left);
    let other = 1 - input_pol;
    assert!(
        left[other].norm() < 1e-14 && to_right[other].norm() < 1e-14,
        "polarization did not return to its input value"
    );
    [left[input_pol], to_right[input_pol]]
}

/// Element-by-element route through the apparatus: HWP, PBS, 45-degree
/// flip before L. Exists as an independent check of the closed form in
/// [`setup_distribute`]; both photons leave with their input polarization
/// in both regions, up to a global phase.
pub fn setup_distribute_via_elements(cfg: &SetupConfig) -> SpatialAmplitudes {
    let closed = SpatialAmplitudes::from_angles(cfg.alpha, cfg.beta, ExchangeSign::Bosonic);

    // first photon enters |H>, HWP1 at (pi/2 - alpha)/2, reflected port feeds L
    let mut first = distribute_one((std::f64::consts::FRAC_PI_2 - cfg.alpha) / 2.0, 0, false);
    align_global_phase(&mut first, [closed.l, closed.r]);

    // second photon enters |V>, HWP2 at -beta/2, transmitted port feeds L
    let mut second = distribute_one(-cfg.beta / 2.0, 1, true);
    align_global_phase(&mut second, [closed.l_p, closed.r_p]);

    SpatialAmplitudes {
        l: first[0],
        r: first[1],
        l_p: second[0],
        r_p: second[1],
        eta: ExchangeSign::Bosonic,
    }
}

/// Closed-form wave-packet distribution of the apparatus:
/// l = cos(alpha), r = sin(alpha), l' = sin(beta), r' = cos(beta), bosons.
pub fn setup_distribute(cfg: &SetupConfig) -> SpatialAmplitudes {
    let amps = SpatialAmplitudes::from_angles(cfg.alpha, cfg.beta, ExchangeSign::Bosonic);
    debug_assert!({
        let via = setup_distribute_via_elements(cfg);
        (via.l - amps.l).norm() < 1e-12
            && (via.r - amps.r).norm() < 1e-12
            && (via.l_p - amps.l_p).norm() < 1e-12
            && (via.r_p - amps.r_p).norm() < 1e-12
    });
    amps
}

/// Probability that the second photon's wave packet is found in L:
/// `|l'|^2 = sin^2(beta)`.
pub fn occupancy_l(cfg: &SetupConfig) -> f64 {
    setup_distribute(cfg).l_p.norm_sqr()
}

/// Whether a scan is a coincidence dip or a coincidence peak.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanSign {
    Dip,
    Peak,
}

/// Gaussian interference-scan model. Dip: `a (1 - d e^{-b (x-c)^2})`;
/// peak: `a (1 + d e^{-b (x-c)^2})`. The visibility is `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    /// Baseline counts, `a > 0`.
    pub a: f64,
    /// Inverse squared width, `b > 0`.
    pub b: f64,
    /// Scan center.
    pub c: f64,
    /// Depth (visibility), `0 <= d <= 1`.
    pub d: f64,
    pub sign: ScanSign,
    /// Sum of squared residuals at the returned parameters.
    pub residual: f64,
}

impl GaussianFit {
    pub fn visibility(&self) -> f64 {
        self.d
    }
}

/// Expected counts of the dip/peak model at delay `x`.
pub fn hom_expected(x: f64, params: &GaussianFit) -> f64 {
    let g = (-params.b * (x - params.c).powi(2)).exp();
    match params.sign {
        ScanSign::Dip => params.a * (1.0 - params.d * g),
        ScanSign::Peak => params.a * (1.0 + params.d * g),
    }
}

/// Interference scan: delay positions (caller-declared unit), counts per
/// point, and the common integration time per point in seconds. Counts
/// are nonnegative; sampled scans carry integers, expected-value scans
/// may carry fractional counts.
#[derive(Clone, Debug, PartialEq)]
pub struct HomDataset {
    pub delays: Vec<f64>,
    pub counts: Vec<f64>,
    pub duration_s: f64,
}

impl HomDataset {
    pub fn new(delays: Vec<f64>, counts: Vec<f64>, duration_s: f64) -> Result<Self, OpticsError> {
        if delays.len() != counts.len() {
            return Err(OpticsError::BadScanFile(format!(
                "{} delays vs {} counts",
                delays.len(),
                counts.len()
            )));
        }
        if counts.iter().any(|&c| !c.is_finite() || c < 0.0) {
            return Err(OpticsError::BadScanFile(
                "counts must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            delays,
            counts,
            duration_s,
        })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

pub const HOM_CSV_HEADER: &str = "delay,counts,duration_s";

pub fn write_hom_csv<W: Write>(w: &mut W, data: &HomDataset) -> Result<(), OpticsError> {
    writeln!(w, "{HOM_CSV_HEADER}")?;
    for (x, n) in data.delays.iter().zip(&data.counts) {
        writeln!(w, "{x},{n},{}", data.duration_s)?;
    }
    Ok(())
}

pub fn read_hom_csv<R: BufRead>(r: R) -> Result<HomDataset, OpticsError> {
    let mut delays = Vec::new();
    let mut counts = Vec::new();
    let mut duration: Option<f64> = None;
    let mut saw_header = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != HOM_CSV_HEADER {
                return Err(OpticsError::BadScanFile(format!(
                    "expected header '{HOM_CSV_HEADER}', got '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(OpticsError::BadScanFile(format!(
                "line {}: expected 3 fields",
                lineno + 1
            )));
        }
        let parse_err =
            |what: &str| OpticsError::BadScanFile(format!("line {}: bad {what}", lineno + 1));
        delays.push(fields[0].parse::<f64>().map_err(|_| parse_err("delay"))?);
        counts.push(fields[1].parse::<f64>().map_err(|_| parse_err("counts"))?);
        let dur = fields[2]
            .parse::<f64>()
            .map_err(|_| parse_err("duration"))?;
        match duration {
            None => duration = Some(dur),
            Some(d) if d == dur => {}
            Some(d) => {
                return Err(OpticsError::BadScanFile(format!(
                    "line {}: duration {dur} differs from {d}",
                    lineno + 1
                )))
            }
        }
    }
    if !saw_header {
        return Err(OpticsError::BadScanFile("missing header".into()));
    }
    HomDataset::new(delays, counts, duration.unwrap_or(0.0))
}

const FIT_MAX_ITERS: usize = 200;
const FIT_STEP_TOL: f64 = 1e-8;

/// Residual weighting of the scan fit. Uniform matches the unspecified
/// fit convention; Poisson weights each point by the inverse model
/// variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FitWeighting {
    #[default]
    Uniform,
    Poisson,
}

fn model_and_jacobian(x: f64, p: &[f64; 4], sign: ScanSign) -> (f64, [f64; 4]) {
    let [a, b, c, d] = *p;
    let dx = x - c;
    let g = (-b * dx * dx).exp();
    let s = match sign {
        ScanSign::Dip => -1.0,
        ScanSign::Peak => 1.0,
    };
    let m = a * (1.0 + s * d * g);
    let j = [
        1.0 + s * d * g,                // d/da
        s * a * d * g * (-dx * dx),     // d/db
        s * a * d * g * (2.0 * b * dx), // d/dc
        s * a * g,                      // d/dd
    ];
    (m, j)
}

fn point_weight(model: f64, weighting: FitWeighting) -> f64 {
    match weighting {
        FitWeighting::Uniform => 1.0,
        FitWeighting::Poisson => 1.0 / model.max(1.0),
    }
}

fn residual_sum(data: &HomDataset, p: &[f64; 4], sign: ScanSign, weighting: FitWeighting) -> f64 {
    data.delays
        .iter()
        .zip(&data.counts)
        .map(|(&x, &n)| {
            let (m, _) = model_and_jacobian(x, p, sign);
            let r = n - m;
            point_weight(m, weighting) * r * r
        })
        .sum()
}

fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let (pivot_row, pivot) = (col..4)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot < 1e-300 {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in (col + 1)..4 {
            let f = m[r][col] / m[col][col];
            for k in col..4 {
                m[r][k] -= f * m[col][k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..4 {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

fn initial_guess(data: &HomDataset, sign: ScanSign) -> [f64; 4] {
    let fmax = data
        .counts
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let fmin = data.counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let argextreme = |want_min: bool| {
        data.counts
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let (x, y) = if want_min { (*a.1, *b.1) } else { (*b.1, *a.1) };
                x.partial_cmp(&y).unwrap()
            })
            .unwrap()
            .0
    };
    let (a0, d0, c0) = match sign {
        ScanSign::Dip => (
            fmax,
            ((fmax - fmin) / fmax.max(1.0)).clamp(0.05, 1.0),
            data.delays[argextreme(true)],
        ),
        ScanSign::Peak => (
            fmin.max(1.0),
            ((fmax - fmin) / fmin.max(1.0)).clamp(0.05, 1.0),
            data.delays[argextreme(false)],
        ),
    };
    // the half-depth region around the extremum sets the initial curvature
    let half_level = (fmax + fmin) / 2.0;
    let beyond: Vec<f64> = data
        .delays
        .iter()
        .zip(&data.counts)
        .filter(|&(_, &n)| match sign {
            ScanSign::Dip => n < half_level,
            ScanSign::Peak => n > half_level,
        })
        .map(|(&x, _)| x)
        .collect();
    let span = data
        .delays
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        - data.delays.iter().cloned().fold(f64::INFINITY, f64::min);
    let width = match (
        beyond.iter().cloned().fold(f64::INFINITY, f64::min),
        beyond.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    ) {
        (lo, hi) if hi > lo => (hi - lo) / 2.0,
        _ => (span / 8.0).max(1e-6),
    };
    let b0 = std::f64::consts::LN_2 / (width * width).max(1e-12);
    [a0, b0, c0, d0]
}

fn clamp_params(p: &mut [f64; 4]) {
    p[0] = p[0].max(1e-9);
    p[1] = p[1].max(1e-12);
    p[3] = p[3].clamp(0.0, 1.0);
}

/// Least-squares Gaussian dip/peak fit with uniform residual weights;
/// see [`fit_gaussian_with`].
pub fn fit_gaussian(data: &HomDataset, sign: ScanSign) -> Result<GaussianFit, OpticsError> {
    fit_gaussian_with(data, sign, FitWeighting::Uniform)
}

/// Gaussian dip/peak fit: damped Gauss-Newton with the analytic
/// Jacobian. Convergence is declared when the relative parameter step
/// drops below 1e-8; running out of the 200 iteration budget reports the
/// best parameters found inside the error.
pub fn fit_gaussian_with(
    data: &HomDataset,
    sign: ScanSign,
    weighting: FitWeighting,
) -> Result<GaussianFit, OpticsError> {
    if data.len() < 8 {
        return Err(OpticsError::TooFewPoints {
            needed: 8,
            got: data.len(),
        });
    }
    if data.counts.iter().all(|&n| n == data.counts[0]) {
        return Err(OpticsError::ConstantCounts {
            count: data.counts[0].round() as usize,
        });
    }

    let mut p = initial_guess(data, sign);
    clamp_params(&mut p);
    let mut lambda = 1e-3;
    let mut chi2 = residual_sum(data, &p, sign, weighting);

    for iter in 0..FIT_MAX_ITERS {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&x, &n) in data.delays.iter().zip(&data.counts) {
            let (m, j) = model_and_jacobian(x, &p, sign);
            let w = point_weight(m, weighting);
            let r = n - m;
            for u in 0..4 {
                jtr[u] += w * j[u] * r;
                for v in 0..4 {
                    jtj[u][v] += w * j[u] * j[v];
                }
            }
        }
        let mut damped = jtj;
        for u in 0..4 {
            damped[u][u] *= 1.0 + lambda;
        }
        let Some(step) = solve4(damped, jtr) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };

        let mut next = p;
        for u in 0..4 {
            next[u] += step[u];
        }
        clamp_params(&mut next);
        let next_chi2 = residual_sum(data, &next, sign, weighting);

        if next_chi2 <= chi2 {
            let rel_step = (0..4)
                .map(|u| (next[u] - p[u]).abs() / p[u].abs().max(1e-12))
                .fold(0.0, f64::max);
            p = next;
            chi2 = next_chi2;
            lambda = (lambda * 0.3).max(1e-12);
            if rel_step < FIT_STEP_TOL {
                return Ok(GaussianFit {
                    a: p[0],
                    b: p[1],
                    c: p[2],
                    d: p[3],
                    sign,
                    residual: chi2,
                });
            }
            if iter > 0 && chi2 < 1e-20 {
                return Ok(GaussianFit {
                    a: p[0],
                    b: p[1],
                    c: p[2],
                    d: p[3],
                    sign,
                    residual: chi2,
                });
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }

    Err(OpticsError::FitDidNotConverge {
        iterations: FIT_MAX_ITERS,
        residual: chi2,
        best: Box::new(GaussianFit {
            a: p[0],
            b: p[1],
            c: p[2],
            d: p[3],
            sign,
            residual: chi2,
        }),
    })
}
