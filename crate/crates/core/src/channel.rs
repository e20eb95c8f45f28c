//! Steering vectors, the surface phase profile, the effective precoded
//! vector, per-subcarrier channel matrices, and the noise-free received
//! mean with optional complex Gaussian sampling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::{ChannelParams, Scenario};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("subcarrier index {0} outside -{1}..={1}")]
    SubcarrierOutOfRange(i32, i32),
    #[error("precoded vector has {got} entries, scenario has {want} BS antennas")]
    DimensionMismatch { got: usize, want: usize },
}

/// Uniform-linear-array steering vector: entry `i` (zero-based) is
/// `exp(j 2 pi i (d / lambda) sin(angle))`; the first entry is exactly 1.
pub fn steering_vector(angle: f64, count: usize, d: f64, lambda: f64) -> DVector<Complex64> {
    let step = 2.0 * std::f64::consts::PI * (d / lambda) * angle.sin();
    DVector::from_iterator(
        count,
        (0..count).map(|i| Complex64::from_polar(1.0, step * i as f64)),
    )
}

/// Angle derivative of [`steering_vector`]: `D(angle) a(angle)` with
/// `D = j 2 pi (d / lambda) cos(angle) diag(0, 1, ..., count-1)`.
pub fn steering_derivative(angle: f64, count: usize, d: f64, lambda: f64) -> DVector<Complex64> {
    let a = steering_vector(angle, count, d, lambda);
    let scale = 2.0 * std::f64::consts::PI * (d / lambda) * angle.cos();
    DVector::from_iterator(
        count,
        (0..count).map(|i| Complex64::new(0.0, scale * i as f64) * a[i]),
    )
}

/// Phase shifts of the surface elements, stored unwrapped in radians. The
/// induced control matrix is `diag(exp(j omega_1), ..., exp(j omega_NL))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub omegas: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(omegas: Vec<f64>) -> Self {
        assert!(
            omegas.iter().all(|w| w.is_finite()),
            "phase profile entries must be finite"
        );
        PhaseProfile { omegas }
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Unit-modulus diagonal entries `exp(j omega_i)`.
    pub fn unit_entries(&self) -> Vec<Complex64> {
        self.omegas
            .iter()
            .map(|&w| Complex64::from_polar(1.0, w))
            .collect()
    }

    /// Plain list-of-radians text form, one value per line.
    pub fn to_radians_text(&self) -> String {
        let mut out = String::new();
        for w in &self.omegas {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    /// Parse the list-of-radians text form. Blank lines and `#` comments
    /// are ignored.
    pub fn from_radians_text(text: &str) -> Result<Self, std::num::ParseFloatError> {
        let mut omegas = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            omegas.push(line.parse::<f64>()?);
        }
        Ok(PhaseProfile::new(omegas))
    }
}

/// Effective transmitted vector `f = F x[n]`, shared across subcarriers
/// with an optional per-subcarrier override.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    base: DVector<Complex64>,
    overrides: std::collections::BTreeMap<i32, DVector<Complex64>>,
}

impl Precoder {
    /// A single effective vector used on every subcarrier.
    pub fn shared(f: DVector<Complex64>) -> Self {
        Precoder {
            base: f,
            overrides: std::collections::BTreeMap::new(),
        }
    }

    /// Unit-modulus entries `exp(j nu)` with `nu ~ U(0, 2 pi]`, the random
    /// reference-signal construction used in the experiments.
    pub fn random_unit_phases<R: Rng + ?Sized>(n_b: usize, rng: &mut R) -> Self {
        let f = DVector::from_iterator(
            n_b,
            (0..n_b).map(|_| {
                let nu: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                Complex64::from_polar(1.0, nu)
            }),
        );
        Precoder::shared(f)
    }

    /// Build from a list of phases in radians (one unit-modulus entry each).
    pub fn from_phases(phases: &[f64]) -> Self {
        Precoder::shared(DVector::from_iterator(
            phases.len(),
            phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
        ))
    }

    /// Load phases from the plain list-of-radians fixture format.
    pub fn from_phase_file(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let profile = PhaseProfile::from_radians_text(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Precoder::from_phases(&profile.omegas))
    }

    /// Override the vector used on one subcarrier.
    pub fn set_override(&mut self, n: i32, f: DVector<Complex64>) {
        self.overrides.insert(n, f);
    }

    /// Effective vector for subcarrier `n`.
    pub fn effective(&self, n: i32) -> &DVector<Complex64> {
        self.overrides.get(&n).unwrap_or(&self.base)
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.len() == 0
    }
}

fn check_subcarrier(s: &Scenario, n: i32) -> Result<(), ChannelError> {
    let half = (s.n_sub as i32 - 1) / 2;
    if n < -half || n > half {
        return Err(ChannelError::SubcarrierOutOfRange(n, half));
    }
    Ok(())
}

/// Scalar through the surface aperture: `a_t(theta_lm)^H Omega a_r(phi_bl)`.
pub(crate) fn cascade_scalar(s: &Scenario, p: &ChannelParams, omega: &PhaseProfile) -> Complex64 {
    let lam = s.wavelength();
    let l_t = steering_vector(p.theta_lm, s.n_l, s.d_spacing_m, lam);
    let l_r = steering_vector(p.phi_bl, s.n_l, s.d_spacing_m, lam);
    let units = omega.unit_entries();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..s.n_l {
        acc += l_t[i].conj() * units[i] * l_r[i];
    }
    acc
}

/// Full channel matrix for subcarrier `n`: the direct rank-one term plus the
/// reflected cascade through the surface; at most rank 2.
pub fn channel_matrix(
    s: &Scenario,
    p: &ChannelParams,
    omega: &PhaseProfile,
    n: i32,
) -> Result<DMatrix<Complex64>, ChannelError> {
    check_subcarrier(s, n)?;
    let lam = s.wavelength();
    let k = s.subcarrier_omega(n);
    let a_t = steering_vector(p.theta_bm, s.n_b, s.d_spacing_m, lam);
    let a_r = steering_vector(p.phi_bm, s.n_m, s.d_spacing_m, lam);
    let b_t = steering_vector(p.theta_bl, s.n_b, s.d_spacing_m, lam);
    let c_r = steering_vector(p.phi_lm, s.n_m, s.d_spacing_m, lam);
    let g = cascade_scalar(s, p, omega);

    let los_gain = Complex64::from_polar(p.rho_bm, -k * p.tau_bm);
    let nlos_gain = Complex64::from_polar(p.rho_bl * p.rho_lm, -k * (p.tau_bl + p.tau_lm)) * g;

    let mut h = DMatrix::zeros(s.n_m, s.n_b);
    for col in 0..s.n_b {
        for row in 0..s.n_m {
            h[(row, col)] =
                los_gain * a_r[row] * a_t[col].conj() + nlos_gain * c_r[row] * b_t[col].conj();
        }
    }
    Ok(h)
}

/// Noise-free received mean `mu[n] = sqrt(P) H[n] f`, assembled from the
/// rank-two factorization rather than the dense matrix.
pub fn received_mean(
    s: &Scenario,
    p: &ChannelParams,
    omega: &PhaseProfile,
    f_eff: &DVector<Complex64>,
    n: i32,
) -> Result<DVector<Complex64>, ChannelError> {
    check_subcarrier(s, n)?;
    if f_eff.len() != s.n_b {
        return Err(ChannelError::DimensionMismatch {
            got: f_eff.len(),
            want: s.n_b,
        });
    }
    let lam = s.wavelength();
    let k = s.subcarrier_omega(n);
    let a_t = steering_vector(p.theta_bm, s.n_b, s.d_spacing_m, lam);
    let a_r = steering_vector(p.phi_bm, s.n_m, s.d_spacing_m, lam);
    let b_t = steering_vector(p.theta_bl, s.n_b, s.d_spacing_m, lam);
    let c_r = steering_vector(p.phi_lm, s.n_m, s.d_spacing_m, lam);
    let big_a = a_t.dotc(f_eff); // a_t^H f
    let a_b = b_t.dotc(f_eff); // a_t(theta_bl)^H f
    let beta = cascade_scalar(s, p, omega) * a_b;

    let sqrt_p = s.power.sqrt();
    let los = Complex64::from_polar(p.rho_bm, -k * p.tau_bm) * big_a * sqrt_p;
    let nlos =
        Complex64::from_polar(p.rho_bl * p.rho_lm, -k * (p.tau_bl + p.tau_lm)) * beta * sqrt_p;
    Ok(DVector::from_iterator(
        s.n_m,
        (0..s.n_m).map(|i| los * a_r[i] + nlos * c_r[i]),
    ))
}

/// One noisy observation `mu[n] + w` with circularly symmetric complex
/// Gaussian noise of per-entry complex variance `2 sigma^2`.
pub fn sample_received<R: Rng + ?Sized>(
    s: &Scenario,
    p: &ChannelParams,
    omega: &PhaseProfile,
    f_eff: &DVector<Complex64>,
    n: i32,
    rng: &mut R,
) -> Result<DVector<Complex64>, ChannelError> {
    let mut y = received_mean(s, p, omega, f_eff, n)?;
    let std = s.noise_var.sqrt();
    for i in 0..y.len() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        y[i] += Complex64::new(re * std, im * std);
    }
    Ok(y)
}
