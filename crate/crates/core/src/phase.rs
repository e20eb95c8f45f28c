//! Surface phase-profile generators and the coherent-gain diagnostic.
//!
//! The incremental profile aligns every surface element so the cascade
//! scalar reaches its triangle-inequality maximum; random profiles are the
//! comparison baseline.

use rand::Rng;

use crate::channel::{PhaseProfile, Precoder};
use crate::fim::nlos_scalars;
use crate::scenario::{ChannelParams, Scenario};

/// Optimal profile `omega_i = 2 pi (i-1) (d / lambda) (sin(theta_lm) - sin(phi_bl))`.
///
/// Each element's phase cancels the combined incidence/departure ramp across
/// the aperture, so all `N_L` contributions add coherently.
pub fn incremental_phase(s: &Scenario, p: &ChannelParams) -> PhaseProfile {
    let slope = 2.0
        * std::f64::consts::PI
        * (s.d_spacing_m / s.wavelength())
        * (p.theta_lm.sin() - p.phi_bl.sin());
    PhaseProfile::new((0..s.n_l).map(|i| slope * i as f64).collect())
}

/// Independent uniform phases over `(0, 2 pi]`.
pub fn random_phase<R: Rng + ?Sized>(n_l: usize, rng: &mut R) -> PhaseProfile {
    PhaseProfile::new(
        (0..n_l)
            .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
            .collect(),
    )
}

/// Achieved cascade gain `|beta[0]|` together with its upper bound
/// `N_L |a_t(theta_bl)^H f|`.
pub fn beta_gain(
    s: &Scenario,
    p: &ChannelParams,
    omega: &PhaseProfile,
    f: &Precoder,
) -> (f64, f64) {
    let scalars =
        nlos_scalars(s, p, omega, f.effective(0), 0).expect("subcarrier 0 is always in range");
    let lam = s.wavelength();
    let b_t = crate::channel::steering_vector(p.theta_bl, s.n_b, s.d_spacing_m, lam);
    let a_b = b_t.dotc(f.effective(0));
    (scalars.beta.norm(), s.n_l as f64 * a_b.norm())
}
