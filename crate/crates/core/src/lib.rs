//! Desk-scale simulator for polarization entanglement generated by the
//! remote spatial indistinguishability of two identical photons.
//!
//! Two photons with opposite polarizations are distributed over two
//! separated operational regions L and R with tunable amplitudes. Counting
//! one particle per region (and keeping only those events) projects the
//! pair onto a conditional two-qubit state whose entanglement is set
//! entirely by how well the localized detectors can tell the photons
//! apart. The crate models the whole chain:
//!
//! - [`qmath`] — small dense complex matrices, Hermitian eigensolver,
//!   Pauli basis, Bloch vectors.
//! - [`particles`] — no-label two-particle states, the entropic
//!   indistinguishability measure, and the region projection with an
//!   independent brute-force oracle.
//! - [`optics`] — Jones calculus for the wave-plate apparatus, two-photon
//!   interference scans and Gaussian dip/peak fitting.
//! - [`metrics`] — concurrence, entanglement of formation, fidelity and
//!   the maximal CHSH value with its optimal analyzer settings.
//! - [`measurement`] — Born-rule outcome probabilities, Poisson count
//!   sampling, and the detection-level distinguishable mixture.
//! - [`tomography`] — state and process reconstruction from counts with
//!   bootstrap error bars.
//! - [`teleport`] — conditional teleportation through the distributed
//!   resource state, Bell-state measurement and fidelity accounting.

pub mod measurement;
pub mod metrics;
pub mod optics;
pub mod particles;
pub mod qmath;
pub mod teleport;
pub mod tomography;
