//! Physical scenario and deterministic geometry: node placements, the
//! geometry-to-channel-parameter map, its position Jacobian, angular sector
//! checks, and the far-field bound on the surface size.
//!
//! The coordinate system is 2D. The base station (`b`) and the intelligent
//! surface (`l`) are unrotated uniform linear arrays; the mobile station
//! (`m`) is rotated by `alpha` radians. All distances are in meters, delays
//! in seconds, angles in radians, and path gains dimensionless.

use serde::Deserialize;
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ordered labels for the unknown channel-parameter vector. Every FIM
/// consumer indexes rows and columns in this order.
pub const ETA_LABELS: [&str; 7] = [
    "tau_bm", "theta_bm", "phi_bm", "rho_bm", "tau_lm", "phi_lm", "rho_lm",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("n_sub must be odd and positive, got {0}")]
    EvenSubcarriers(usize),
    #[error("bandwidth must be well below the carrier: B/fc = {0:.4} >= 0.05")]
    BandwidthTooWide(f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("nodes {0} and {1} coincide")]
    CoincidentNodes(&'static str, &'static str),
    #[error("failed to parse scenario file: {0}")]
    Parse(String),
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: nodes {0} and {1} coincide")]
    Degenerate(&'static str, &'static str),
    #[error("internal error: arccos argument {0} outside [-1, 1]")]
    ArccosDomain(f64),
}

/// Full physical scenario: node placements, array sizes, signal parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// BS center, meters.
    pub b: [f64; 2],
    /// LIS center, meters.
    pub l: [f64; 2],
    /// MS center, meters.
    pub m: [f64; 2],
    /// MS rotation, radians.
    pub alpha: f64,
    /// Path-loss exponent.
    pub mu: f64,
    /// BS antenna count.
    pub n_b: usize,
    /// MS antenna count.
    pub n_m: usize,
    /// LIS element count.
    pub n_l: usize,
    /// Subcarrier count (odd).
    pub n_sub: usize,
    /// Total bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Carrier frequency, Hz.
    pub fc_hz: f64,
    /// Element spacing shared by the arrays and the surface, meters.
    pub d_spacing_m: f64,
    /// Transmit power, linear watts.
    pub power: f64,
    /// Noise parameter sigma^2; each received entry has complex variance
    /// 2 sigma^2 (sigma^2 per real dimension). SNR is power / noise_var.
    pub noise_var: f64,
    /// Speed of light, m/s.
    pub c: f64,
}

impl Scenario {
    /// Reference scenario used throughout the experiments: BS at the origin,
    /// surface at (160/3, 80), MS at (80, 40), pi/10 rotation, 128/32-antenna
    /// arrays, 31 subcarriers over 100 MHz at 60 GHz.
    pub fn reference() -> Self {
        let fc_hz = 60e9;
        let s = Scenario {
            b: [0.0, 0.0],
            l: [160.0 / 3.0, 80.0],
            m: [80.0, 40.0],
            alpha: std::f64::consts::PI / 10.0,
            mu: 2.08,
            n_b: 128,
            n_m: 32,
            n_l: 100,
            n_sub: 31,
            bandwidth_hz: 100e6,
            fc_hz,
            d_spacing_m: SPEED_OF_LIGHT / fc_hz / 2.0,
            power: 1.0,
            noise_var: 1.0,
            c: SPEED_OF_LIGHT,
        };
        s.validate().expect("reference scenario is valid");
        s
    }

    /// Load from a TOML file; missing keys fall back to [`Scenario::reference`]
    /// defaults (element spacing defaults to half a wavelength of `fc_hz`).
    pub fn from_path(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parse from TOML text. See [`Scenario::from_path`].
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: ScenarioFile =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let defaults = Self::reference();
        let fc_hz = raw.fc_hz.unwrap_or(defaults.fc_hz);
        let c = raw.c.unwrap_or(SPEED_OF_LIGHT);
        let s = Scenario {
            b: raw.b.unwrap_or(defaults.b),
            l: raw.l.unwrap_or(defaults.l),
            m: raw.m.unwrap_or(defaults.m),
            alpha: raw.alpha.unwrap_or(defaults.alpha),
            mu: raw.mu.unwrap_or(defaults.mu),
            n_b: raw.n_b.unwrap_or(defaults.n_b),
            n_m: raw.n_m.unwrap_or(defaults.n_m),
            n_l: raw.n_l.unwrap_or(defaults.n_l),
            n_sub: raw.n_sub.unwrap_or(defaults.n_sub),
            bandwidth_hz: raw.bandwidth_hz.unwrap_or(defaults.bandwidth_hz),
            fc_hz,
            d_spacing_m: raw.d_spacing_m.unwrap_or(c / fc_hz / 2.0),
            power: raw.power.unwrap_or(defaults.power),
            noise_var: raw.noise_var.unwrap_or(defaults.noise_var),
            c,
        };
        s.validate()?;
        Ok(s)
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_sub == 0 || self.n_sub.is_multiple_of(2) {
            return Err(ScenarioError::EvenSubcarriers(self.n_sub));
        }
        let ratio = self.bandwidth_hz / self.fc_hz;
        if ratio.is_nan() || ratio >= 0.05 {
            return Err(ScenarioError::BandwidthTooWide(ratio));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("power", self.power),
            ("noise_var", self.noise_var),
            ("bandwidth_hz", self.bandwidth_hz),
            ("fc_hz", self.fc_hz),
            ("d_spacing_m", self.d_spacing_m),
            ("c", self.c),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(ScenarioError::NonPositive(name));
            }
        }
        if self.n_b == 0 || self.n_m == 0 || self.n_l == 0 {
            return Err(ScenarioError::NonPositive("array sizes"));
        }
        for (a, b, na, nb) in [
            (self.b, self.l, "b", "l"),
            (self.b, self.m, "b", "m"),
            (self.l, self.m, "l", "m"),
        ] {
            if dist(a, b) <= 0.0 {
                return Err(ScenarioError::CoincidentNodes(na, nb));
            }
        }
        Ok(())
    }

    /// Carrier wavelength in meters, shared by every subcarrier.
    pub fn wavelength(&self) -> f64 {
        self.c / self.fc_hz
    }

    /// Linear SNR, defined as power over noise_var.
    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }

    /// Subcarrier indices -(N-1)/2 ..= (N-1)/2.
    pub fn subcarrier_indices(&self) -> impl Iterator<Item = i32> {
        let half = (self.n_sub as i32 - 1) / 2;
        -half..=half
    }

    /// Angular frequency offset 2 pi n B / N of subcarrier `n`.
    pub fn subcarrier_omega(&self, n: i32) -> f64 {
        2.0 * std::f64::consts::PI * n as f64 * self.bandwidth_hz / self.n_sub as f64
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    b: Option<[f64; 2]>,
    l: Option<[f64; 2]>,
    m: Option<[f64; 2]>,
    alpha: Option<f64>,
    mu: Option<f64>,
    n_b: Option<usize>,
    n_m: Option<usize>,
    n_l: Option<usize>,
    n_sub: Option<usize>,
    bandwidth_hz: Option<f64>,
    fc_hz: Option<f64>,
    d_spacing_m: Option<f64>,
    power: Option<f64>,
    noise_var: Option<f64>,
    c: Option<f64>,
}

/// Channel parameters of the direct link, the reflected link, and the known
/// BS-to-surface segment. The unknown sub-vector is ordered per
/// [`ETA_LABELS`] and exposed by [`ChannelParams::eta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub tau_bm: f64,
    pub theta_bm: f64,
    pub phi_bm: f64,
    pub rho_bm: f64,
    pub tau_lm: f64,
    pub phi_lm: f64,
    pub rho_lm: f64,
    // Known-side parameters of the BS->LIS hop and LIS departure angle.
    pub tau_bl: f64,
    pub theta_bl: f64,
    pub phi_bl: f64,
    pub rho_bl: f64,
    pub theta_lm: f64,
}

impl ChannelParams {
    /// Unknown parameter vector in the fixed ordering of [`ETA_LABELS`].
    pub fn eta(&self) -> [f64; 7] {
        [
            self.tau_bm,
            self.theta_bm,
            self.phi_bm,
            self.rho_bm,
            self.tau_lm,
            self.phi_lm,
            self.rho_lm,
        ]
    }
}

/// The unknown position vector (MS coordinates and rotation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionState {
    pub m: [f64; 2],
    pub alpha: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn checked_arccos(u: f64) -> Result<f64, GeometryError> {
    if u.abs() > 1.0 + 1e-12 {
        return Err(GeometryError::ArccosDomain(u));
    }
    Ok(u.clamp(-1.0, 1.0).acos())
}

/// The geometry the position estimator is allowed to know: anchor
/// placements, the path-loss exponent, and the wave speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownGeometry {
    pub b: [f64; 2],
    pub l: [f64; 2],
    pub mu: f64,
    pub c: f64,
}

impl KnownGeometry {
    pub fn from_scenario(s: &Scenario) -> Self {
        KnownGeometry {
            b: s.b,
            l: s.l,
            mu: s.mu,
            c: s.c,
        }
    }

    /// Unknown channel parameters (ordering of [`ETA_LABELS`]) at a
    /// candidate MS position and rotation.
    pub fn eta_at(&self, m: [f64; 2], alpha: f64) -> Result<[f64; 7], GeometryError> {
        let r_bm = dist(self.b, m);
        let r_lm = dist(self.l, m);
        if r_bm <= 0.0 {
            return Err(GeometryError::Degenerate("b", "m"));
        }
        if r_lm <= 0.0 {
            return Err(GeometryError::Degenerate("l", "m"));
        }
        let theta_bm = checked_arccos((m[0] - self.b[0]) / r_bm)?;
        let theta_lm = -checked_arccos((m[0] - self.l[0]) / r_lm)?;
        let pi = std::f64::consts::PI;
        Ok([
            r_bm / self.c,
            theta_bm,
            pi + theta_bm - alpha,
            r_bm.powf(-self.mu / 2.0),
            r_lm / self.c,
            pi + theta_lm - alpha,
            r_lm.powf(-self.mu / 2.0),
        ])
    }

    /// Jacobian of [`KnownGeometry::eta_at`] with respect to
    /// `[m_x, m_y, alpha]` (7x3), exact derivatives of the map.
    pub fn jacobian_at(&self, m: [f64; 2]) -> Result<nalgebra::DMatrix<f64>, GeometryError> {
        let r_bm = dist(self.b, m);
        let r_lm = dist(self.l, m);
        if r_bm <= 0.0 {
            return Err(GeometryError::Degenerate("b", "m"));
        }
        if r_lm <= 0.0 {
            return Err(GeometryError::Degenerate("l", "m"));
        }
        let (dbx, dby) = (m[0] - self.b[0], m[1] - self.b[1]);
        let (dlx, dly) = (m[0] - self.l[0], m[1] - self.l[1]);

        let mut t = nalgebra::DMatrix::zeros(7, 3);
        // tau_bm = |b-m| / c
        t[(0, 0)] = dbx / (self.c * r_bm);
        t[(0, 1)] = dby / (self.c * r_bm);
        // theta_bm = arccos((m_x - b_x) / |b-m|)
        t[(1, 0)] = -dby.abs() / (r_bm * r_bm);
        t[(1, 1)] = dbx * sign(dby) / (r_bm * r_bm);
        // phi_bm = pi + theta_bm - alpha
        t[(2, 0)] = t[(1, 0)];
        t[(2, 1)] = t[(1, 1)];
        t[(2, 2)] = -1.0;
        // rho_bm = |b-m|^(-mu/2)
        let g_bm = -(self.mu / 2.0) * r_bm.powf(-self.mu / 2.0 - 1.0);
        t[(3, 0)] = g_bm * dbx / r_bm;
        t[(3, 1)] = g_bm * dby / r_bm;
        // tau_lm = |l-m| / c
        t[(4, 0)] = dlx / (self.c * r_lm);
        t[(4, 1)] = dly / (self.c * r_lm);
        // phi_lm = pi + theta_lm - alpha, theta_lm = -arccos((m_x - l_x) / |l-m|)
        t[(5, 0)] = dly.abs() / (r_lm * r_lm);
        t[(5, 1)] = -dlx * sign(dly) / (r_lm * r_lm);
        t[(5, 2)] = -1.0;
        // rho_lm = |l-m|^(-mu/2)
        let g_lm = -(self.mu / 2.0) * r_lm.powf(-self.mu / 2.0 - 1.0);
        t[(6, 0)] = g_lm * dlx / r_lm;
        t[(6, 1)] = g_lm * dly / r_lm;
        Ok(t)
    }
}

/// Map node geometry to channel parameters: delays from Euclidean distances,
/// departure angles from direction cosines, arrival angles folded through
/// the MS rotation, and gains `distance^(-mu/2)` per segment. The reflected
/// delay is split per hop (`tau_bl` for BS->LIS, `tau_lm` for LIS->MS).
pub fn channel_params_from_geometry(s: &Scenario) -> Result<ChannelParams, GeometryError> {
    channel_params_at(s, s.m, s.alpha)
}

/// Same map with the MS position and rotation supplied explicitly; used by
/// the estimator which searches over candidate positions.
pub fn channel_params_at(
    s: &Scenario,
    m: [f64; 2],
    alpha: f64,
) -> Result<ChannelParams, GeometryError> {
    let kg = KnownGeometry::from_scenario(s);
    let eta = kg.eta_at(m, alpha)?;
    let r_bl = dist(s.b, s.l);
    if r_bl <= 0.0 {
        return Err(GeometryError::Degenerate("b", "l"));
    }
    let theta_bl = checked_arccos((s.l[0] - s.b[0]) / r_bl)?;
    let pi = std::f64::consts::PI;
    Ok(ChannelParams {
        tau_bm: eta[0],
        theta_bm: eta[1],
        phi_bm: eta[2],
        rho_bm: eta[3],
        tau_lm: eta[4],
        phi_lm: eta[5],
        rho_lm: eta[6],
        tau_bl: r_bl / s.c,
        theta_bl,
        phi_bl: -pi + theta_bl,
        rho_bl: r_bl.powf(-s.mu / 2.0),
        // phi_lm = pi + theta_lm - alpha
        theta_lm: eta[5] - pi + alpha,
    })
}

/// A violated angular sector constraint. These are advisory: the reference
/// constants themselves place `phi_bm` outside its stated sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorWarning {
    pub name: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl std::fmt::Display for SectorWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} = {:.6} rad outside ({:.6}, {:.6})",
            self.name, self.value, self.lo, self.hi
        )
    }
}

/// Check each angle against its nominal sector and return one warning per
/// violation. The MS rotation is recovered from `phi_bm = pi + theta_bm - alpha`.
pub fn validate_angular_sector(p: &ChannelParams) -> Vec<SectorWarning> {
    let pi = std::f64::consts::PI;
    let alpha = pi + p.theta_bm - p.phi_bm;
    let checks = [
        ("theta_bm", p.theta_bm, 0.0, pi / 2.0),
        ("theta_bl", p.theta_bl, 0.0, pi / 2.0),
        ("theta_lm", p.theta_lm, -pi / 2.0, 0.0),
        ("phi_bl", p.phi_bl, -pi, -pi / 2.0),
        ("phi_bm", p.phi_bm, pi / 2.0, pi),
        ("phi_lm", p.phi_lm, pi / 2.0, pi),
        ("alpha", alpha, 0.0, pi / 2.0),
    ];
    checks
        .into_iter()
        .filter(|&(_, v, lo, hi)| !(v > lo && v < hi))
        .map(|(name, value, lo, hi)| SectorWarning {
            name,
            value,
            lo,
            hi,
        })
        .collect()
}

/// Largest admissible surface element count under the far-field constraint
/// `N_L < sqrt(lambda) / (sqrt(2) d) * min(sqrt(|b-l|), sqrt(|l-m|))`.
pub fn max_far_field_elements(s: &Scenario) -> usize {
    let lam = s.wavelength();
    let r_bl = dist(s.b, s.l);
    let r_lm = dist(s.l, s.m);
    let bound = lam.sqrt() / (2.0_f64.sqrt() * s.d_spacing_m) * r_bl.sqrt().min(r_lm.sqrt());
    // The constraint is strict, so an exactly integral bound excludes itself.
    let fl = bound.floor();
    if fl == bound {
        (fl as usize).saturating_sub(1)
    } else {
        fl.max(0.0) as usize
    }
}

/// Jacobian of the channel parameters with respect to `[m_x, m_y, alpha]`,
/// rows ordered per [`ETA_LABELS`].
///
/// Entries are the exact derivatives of the geometry map: the departure
/// angles do not depend on the MS rotation, and both arrival angles carry
/// `d phi / d alpha = -1`.
pub fn jacobian_t1(s: &Scenario) -> Result<nalgebra::DMatrix<f64>, GeometryError> {
    jacobian_t1_at(s, s.m)
}

/// [`jacobian_t1`] evaluated at an explicit MS position.
pub fn jacobian_t1_at(s: &Scenario, m: [f64; 2]) -> Result<nalgebra::DMatrix<f64>, GeometryError> {
    KnownGeometry::from_scenario(s).jacobian_at(m)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
