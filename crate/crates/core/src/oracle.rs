//! Definition-based Fisher information via central differences of the
//! received mean with respect to an arbitrary real parameter vector. This is
//! the ground-truth validator for the closed forms and the only information
//! engine for the scatterer benchmark.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{received_mean, PhaseProfile};
use crate::fim::FimMatrix;
use crate::linalg::pairwise_sum;
use crate::scenario::{ChannelParams, GeometryError, Scenario};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("mean became non-finite while perturbing parameter '{0}'")]
    NonFiniteMean(String),
    #[error("mean builder failed for parameter set: {0}")]
    Builder(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ordered labels of the scatterer-benchmark channel parameters.
pub const BENCH_LABELS: [&str; 8] = [
    "tau_bm",
    "theta_bm",
    "phi_bm",
    "rho_bm",
    "tau_bsm",
    "theta_bsm",
    "phi_bsm",
    "rho_bsm",
];

/// A named real parameter vector together with the deterministic map from
/// parameter values and subcarrier index to the complex mean vector.
pub struct ParamVector<F>
where
    F: Fn(&[f64], i32) -> Result<DVector<Complex64>, OracleError>,
{
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub steps: Vec<f64>,
    mu_builder: F,
}

impl<F> ParamVector<F>
where
    F: Fn(&[f64], i32) -> Result<DVector<Complex64>, OracleError>,
{
    /// Default step rule: `1e-6 (1 + |value|)` per parameter. Delay
    /// parameters need [`ParamVector::with_steps`] since they enter only
    /// through phase (see [`eta_param_vector`]).
    pub fn new(names: Vec<String>, values: Vec<f64>, mu_builder: F) -> Self {
        assert_eq!(names.len(), values.len());
        let steps = values.iter().map(|v| 1e-6 * (1.0 + v.abs())).collect();
        let unique: std::collections::BTreeSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len(), "parameter names must be unique");
        ParamVector {
            names,
            values,
            steps,
            mu_builder,
        }
    }

    pub fn with_steps(mut self, steps: Vec<f64>) -> Self {
        assert_eq!(steps.len(), self.values.len());
        self.steps = steps;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn mu(&self, values: &[f64], n: i32) -> Result<DVector<Complex64>, OracleError> {
        (self.mu_builder)(values, n)
    }

    /// Central-difference Jacobian of the mean, one column per parameter,
    /// with per-parameter steps scaled by `step_scale`.
    fn jacobian(&self, n: i32, step_scale: f64) -> Result<DMatrix<Complex64>, OracleError> {
        let dim = self.mu(&self.values, n)?.len();
        let mut jac = DMatrix::zeros(dim, self.len());
        let mut work = self.values.clone();
        for (i, (&v, &h0)) in self.values.iter().zip(&self.steps).enumerate() {
            let h = h0 * step_scale;
            work[i] = v + h;
            let plus = self.mu(&work, n)?;
            work[i] = v - h;
            let minus = self.mu(&work, n)?;
            work[i] = v;
            for r in 0..dim {
                let d = (plus[r] - minus[r]) / Complex64::new(2.0 * h, 0.0);
                if !d.re.is_finite() || !d.im.is_finite() {
                    return Err(OracleError::NonFiniteMean(self.names[i].clone()));
                }
                jac[(r, i)] = d;
            }
        }
        Ok(jac)
    }
}

fn gram(prefactor: f64, jac: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = jac.ncols();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = prefactor * jac.column(i).dotc(&jac.column(j)).re;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Numeric information matrix for one subcarrier:
/// `prefactor * Re(J^H J)` with `J` the Richardson-extrapolated
/// central-difference Jacobian of the mean (steps `h` and `h/2` combined to
/// cancel the leading quadratic truncation term).
pub fn fim_numeric<F>(pv: &ParamVector<F>, prefactor: f64, n: i32) -> Result<FimMatrix, OracleError>
where
    F: Fn(&[f64], i32) -> Result<DVector<Complex64>, OracleError>,
{
    let coarse = pv.jacobian(n, 1.0)?;
    let fine = pv.jacobian(n, 0.5)?;
    let jac = fine.map(|x| x * Complex64::new(4.0 / 3.0, 0.0))
        - coarse.map(|x| x * Complex64::new(1.0 / 3.0, 0.0));
    Ok(FimMatrix {
        entries: gram(prefactor, &jac),
        subcarrier: Some(n),
    })
}

/// Plain central differences at `step_scale` times the stored steps, without
/// extrapolation; exposed for the step-halving stability check.
pub fn fim_numeric_raw<F>(
    pv: &ParamVector<F>,
    prefactor: f64,
    n: i32,
    step_scale: f64,
) -> Result<FimMatrix, OracleError>
where
    F: Fn(&[f64], i32) -> Result<DVector<Complex64>, OracleError>,
{
    let jac = pv.jacobian(n, step_scale)?;
    Ok(FimMatrix {
        entries: gram(prefactor, &jac),
        subcarrier: Some(n),
    })
}

/// Numeric information summed over a set of subcarriers.
pub fn fim_numeric_total<F>(
    pv: &ParamVector<F>,
    prefactor: f64,
    subcarriers: impl Iterator<Item = i32>,
) -> Result<FimMatrix, OracleError>
where
    F: Fn(&[f64], i32) -> Result<DVector<Complex64>, OracleError>,
{
    let mut terms = Vec::new();
    for n in subcarriers {
        terms.push(fim_numeric(pv, prefactor, n)?.entries);
    }
    Ok(FimMatrix {
        entries: pairwise_sum(terms),
        subcarrier: None,
    })
}

/// Shorthand for what a mean builder returns.
pub type MeanResult = Result<DVector<Complex64>, OracleError>;

/// Parameter vector over the seven unknowns of the surface-aided channel,
/// with the mean rebuilt from scratch on every evaluation. Delay steps are
/// `1e-3 / B` so each step moves the subcarrier phase measurably; all other
/// parameters use the relative default.
pub fn eta_param_vector<'a>(
    s: &'a Scenario,
    p: &ChannelParams,
    omega: &'a PhaseProfile,
    f_eff: &'a DVector<Complex64>,
) -> ParamVector<impl Fn(&[f64], i32) -> MeanResult + 'a> {
    let known = *p;
    let builder = move |values: &[f64], n: i32| -> Result<DVector<Complex64>, OracleError> {
        let mut q = known;
        q.tau_bm = values[0];
        q.theta_bm = values[1];
        q.phi_bm = values[2];
        q.rho_bm = values[3];
        q.tau_lm = values[4];
        q.phi_lm = values[5];
        q.rho_lm = values[6];
        received_mean(s, &q, omega, f_eff, n).map_err(|e| OracleError::Builder(e.to_string()))
    };
    let values = p.eta().to_vec();
    let names = crate::scenario::ETA_LABELS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let delay_step = 1e-3 / s.bandwidth_hz;
    let steps = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == 0 || i == 4 {
                delay_step
            } else {
                1e-6 * (1.0 + v.abs())
            }
        })
        .collect();
    ParamVector::new(names, values, builder).with_steps(steps)
}

/// Channel FIM over the unknown vector via the numeric oracle, summed over
/// all subcarriers. The prefactor `1 / sigma^2` together with the
/// `sqrt(P)`-scaled mean reproduces `P / sigma^2` times the unit-power form.
pub fn fim_channel_total_numeric(
    s: &Scenario,
    p: &ChannelParams,
    omega: &PhaseProfile,
    f_eff: &DVector<Complex64>,
) -> Result<FimMatrix, OracleError> {
    let pv = eta_param_vector(s, p, omega, f_eff);
    fim_numeric_total(&pv, 1.0 / s.noise_var, s.subcarrier_indices())
}

/// Geometry of the scatterer benchmark: one direct path plus one reflection
/// off a point scatterer at `scatter`, no surface. The reflected gain is the
/// product form `(|b-s| |s-m|)^(-mu/2)` so the comparison against the
/// surface cascade isolates the coherent aperture gain.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkParams {
    pub tau_bm: f64,
    pub theta_bm: f64,
    pub phi_bm: f64,
    pub rho_bm: f64,
    pub tau_bsm: f64,
    pub theta_bsm: f64,
    pub phi_bsm: f64,
    pub rho_bsm: f64,
}

impl BenchmarkParams {
    pub fn vector(&self) -> [f64; 8] {
        [
            self.tau_bm,
            self.theta_bm,
            self.phi_bm,
            self.rho_bm,
            self.tau_bsm,
            self.theta_bsm,
            self.phi_bsm,
            self.rho_bsm,
        ]
    }
}

/// Benchmark channel parameters for MS position `m`, rotation `alpha`, and
/// scatterer position `scatter`.
pub fn benchmark_params_at(
    s: &Scenario,
    scatter: [f64; 2],
    m: [f64; 2],
    alpha: f64,
) -> Result<BenchmarkParams, OracleError> {
    let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let r_bm = d(s.b, m);
    let r_bs = d(s.b, scatter);
    let r_sm = d(scatter, m);
    if r_bm <= 0.0 {
        return Err(GeometryError::Degenerate("b", "m").into());
    }
    if r_bs <= 0.0 {
        return Err(GeometryError::Degenerate("b", "scatter").into());
    }
    if r_sm <= 0.0 {
        return Err(GeometryError::Degenerate("scatter", "m").into());
    }
    let pi = std::f64::consts::PI;
    let theta_bm = ((m[0] - s.b[0]) / r_bm).clamp(-1.0, 1.0).acos();
    let theta_bsm = ((scatter[0] - s.b[0]) / r_bs).clamp(-1.0, 1.0).acos();
    let theta_sm = -((m[0] - scatter[0]) / r_sm).clamp(-1.0, 1.0).acos();
    Ok(BenchmarkParams {
        tau_bm: r_bm / s.c,
        theta_bm,
        phi_bm: pi + theta_bm - alpha,
        rho_bm: r_bm.powf(-s.mu / 2.0),
        tau_bsm: (r_bs + r_sm) / s.c,
        theta_bsm,
        phi_bsm: pi + theta_sm - alpha,
        rho_bsm: (r_bs * r_sm).powf(-s.mu / 2.0),
    })
}

/// Mean of the benchmark channel for an arbitrary 8-parameter vector
/// `[tau_bm, theta_bm, phi_bm, rho_bm, tau_bsm, theta_bsm, phi_bsm, rho_bsm]`.
fn benchmark_mean(
    s: &Scenario,
    values: &[f64],
    f_eff: &DVector<Complex64>,
    n: i32,
) -> DVector<Complex64> {
    use crate::channel::steering_vector;
    let lam = s.wavelength();
    let k = s.subcarrier_omega(n);
    let a_t = steering_vector(values[1], s.n_b, s.d_spacing_m, lam);
    let a_r = steering_vector(values[2], s.n_m, s.d_spacing_m, lam);
    let s_t = steering_vector(values[5], s.n_b, s.d_spacing_m, lam);
    let s_r = steering_vector(values[6], s.n_m, s.d_spacing_m, lam);
    let sqrt_p = s.power.sqrt();
    let los = Complex64::from_polar(values[3], -k * values[0]) * a_t.dotc(f_eff) * sqrt_p;
    let nlos = Complex64::from_polar(values[7], -k * values[4]) * s_t.dotc(f_eff) * sqrt_p;
    DVector::from_iterator(s.n_m, (0..s.n_m).map(|i| los * a_r[i] + nlos * s_r[i]))
}

/// 8x8 numeric information matrix of the scatterer benchmark, summed over
/// all subcarriers.
pub fn benchmark_fim(
    s: &Scenario,
    scatter: [f64; 2],
    f_eff: &DVector<Complex64>,
) -> Result<FimMatrix, OracleError> {
    let bp = benchmark_params_at(s, scatter, s.m, s.alpha)?;
    benchmark_fim_with_params(s, &bp, f_eff)
}

/// [`benchmark_fim`] with an explicit parameter point (used to force the
/// scatterer gain in cross-checks).
pub fn benchmark_fim_with_params(
    s: &Scenario,
    bp: &BenchmarkParams,
    f_eff: &DVector<Complex64>,
) -> Result<FimMatrix, OracleError> {
    let values = bp.vector().to_vec();
    let names = BENCH_LABELS.iter().map(|s| s.to_string()).collect();
    let builder = |values: &[f64], n: i32| -> Result<DVector<Complex64>, OracleError> {
        Ok(benchmark_mean(s, values, f_eff, n))
    };
    let delay_step = 1e-3 / s.bandwidth_hz;
    let steps = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == 0 || i == 4 {
                delay_step
            } else {
                1e-6 * (1.0 + v.abs())
            }
        })
        .collect();
    let pv = ParamVector::new(names, values, builder).with_steps(steps);
    fim_numeric_total(&pv, 1.0 / s.noise_var, s.subcarrier_indices())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Precoder;
    use crate::phase::{incremental_phase, random_phase};
    use crate::scenario::channel_params_from_geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_scenario() -> Scenario {
        let mut s = Scenario::reference();
        s.n_b = 16;
        s.n_m = 8;
        s.n_l = 12;
        s.n_sub = 7;
        s
    }

    #[test]
    fn test_unused_parameter_gives_zero_row() {
        let s = small_scenario();
        let names = vec!["live".to_string(), "dead".to_string()];
        let pv = ParamVector::new(names, vec![1.0, 5.0], |v: &[f64], _n| {
            Ok(DVector::from_vec(vec![
                Complex64::new(v[0] * v[0], 0.0),
                Complex64::new(0.0, v[0]),
            ]))
        });
        let m = fim_numeric(&pv, 1.0, 0).unwrap();
        let _ = s;
        assert_eq!(m.entries[(1, 1)], 0.0);
        assert_eq!(m.entries[(0, 1)], 0.0);
        assert!(m.entries[(0, 0)] > 0.0);
    }

    #[test]
    fn test_linear_parameter_step_independent() {
        // For a mean linear in the parameter the central difference is exact
        // regardless of step size.
        let build = |step: f64| {
            ParamVector::new(vec!["gain".to_string()], vec![0.01], |v: &[f64], _n| {
                Ok(DVector::from_vec(vec![Complex64::new(
                    3.0 * v[0],
                    -2.0 * v[0],
                )]))
            })
            .with_steps(vec![step])
        };
        let a = fim_numeric_raw(&build(1e-4), 1.0, 0, 1.0).unwrap();
        let b = fim_numeric_raw(&build(1e-6), 1.0, 0, 1.0).unwrap();
        let rel = (a.entries[(0, 0)] - b.entries[(0, 0)]).abs() / a.entries[(0, 0)];
        assert!(rel < 1e-10, "rel {rel}");
    }

    #[test]
    fn test_step_halving_stability() {
        let s = small_scenario();
        let p = channel_params_from_geometry(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let omega = random_phase(s.n_l, &mut rng);
        let f = Precoder::random_unit_phases(s.n_b, &mut rng);
        let pv = eta_param_vector(&s, &p, &omega, f.effective(0));
        for n in [0, 2, 3] {
            let coarse = fim_numeric_raw(&pv, 1.0 / s.noise_var, n, 1.0).unwrap();
            let fine = fim_numeric_raw(&pv, 1.0 / s.noise_var, n, 0.5).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    let denom = 1.0
                        + coarse.entries[(i, j)].abs()
                        + (coarse.entries[(i, i)] * coarse.entries[(j, j)])
                            .max(0.0)
                            .sqrt();
                    let rel = (coarse.entries[(i, j)] - fine.entries[(i, j)]).abs() / denom;
                    assert!(rel < 1e-5, "n={n} entry ({i},{j}) unstable: {rel}");
                }
            }
        }
    }

    #[test]
    fn test_oracle_symmetric_and_psd() {
        let s = small_scenario();
        let p = channel_params_from_geometry(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let omega = random_phase(s.n_l, &mut rng);
        let f = Precoder::random_unit_phases(s.n_b, &mut rng);
        let m = fim_channel_total_numeric(&s, &p, &omega, f.effective(0)).unwrap();
        assert!(
            m.symmetry_defect() < 1e-12,
            "Gram form is symmetric by construction"
        );
        let (lo, hi) = m.eigen_range();
        assert!(lo >= -1e-8 * hi, "oracle FIM not PSD: {lo} vs {hi}");
    }

    #[test]
    fn test_oracle_matches_closed_form_on_reference_scenario() {
        // Per-subcarrier entry-level agreement apart from the single known
        // print discrepancy at (tau_bm, theta_bm); totals are not compared
        // directly because the entries odd in the subcarrier index sum to a
        // cancellation-dominated zero. Full sweep comparison in validate.rs.
        let s = small_scenario();
        let p = channel_params_from_geometry(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let omega = incremental_phase(&s, &p);
        let f = Precoder::random_unit_phases(s.n_b, &mut rng);
        let pv = eta_param_vector(&s, &p, &omega, f.effective(0));
        for n in s.subcarrier_indices() {
            let closed =
                crate::fim::fim_channel_subcarrier(&s, &p, &omega, f.effective(n), n).unwrap();
            let numeric = fim_numeric(&pv, 1.0 / s.noise_var, n).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    if (i, j) == (0, 1) || (i, j) == (1, 0) {
                        continue;
                    }
                    let denom = 1.0
                        + numeric.entries[(i, j)].abs()
                        + (numeric.entries[(i, i)] * numeric.entries[(j, j)])
                            .max(0.0)
                            .sqrt();
                    let rel = (closed.entries[(i, j)] - numeric.entries[(i, j)]).abs() / denom;
                    assert!(rel < 1e-6, "n={n} entry ({i},{j}): rel {rel}");
                }
            }
        }
    }

    #[test]
    fn test_benchmark_los_block_matches_surface_scheme() {
        // With the scatterer gain forced to zero, the direct-path block of
        // the benchmark FIM equals the surface scheme's direct block
        // (numeric engine on both sides).
        let s = small_scenario();
        let p = channel_params_from_geometry(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let f = Precoder::random_unit_phases(s.n_b, &mut rng);
        let omega = incremental_phase(&s, &p);
        let lis = fim_channel_total_numeric(&s, &p, &omega, f.effective(0)).unwrap();

        let mut bp = benchmark_params_at(&s, [s.l[0], s.l[1]], s.m, s.alpha).unwrap();
        bp.rho_bsm = 0.0;
        let bench = benchmark_fim_with_params(&s, &bp, f.effective(0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let denom = 1.0
                    + lis.entries[(i, j)].abs()
                    + (lis.entries[(i, i)] * lis.entries[(j, j)]).max(0.0).sqrt();
                let rel = (bench.entries[(i, j)] - lis.entries[(i, j)]).abs() / denom;
                assert!(rel < 1e-6, "entry ({i},{j}): rel {rel}");
            }
        }
    }

    #[test]
    fn test_benchmark_invariant_to_surface_size() {
        let mut s = small_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let f = Precoder::random_unit_phases(s.n_b, &mut rng);
        let a = benchmark_fim(&s, [s.l[0], s.l[1]], f.effective(0)).unwrap();
        s.n_l = 130;
        let b = benchmark_fim(&s, [s.l[0], s.l[1]], f.effective(0)).unwrap();
        for i in 0..8 {
            assert_eq!(
                a.entries[(i, i)].to_bits(),
                b.entries[(i, i)].to_bits(),
                "scatterer entries must ignore the surface"
            );
        }
    }

    #[test]
    fn test_non_finite_mean_names_offending_parameter() {
        let pv = ParamVector::new(
            vec!["good".to_string(), "fragile".to_string()],
            vec![1.0, 2.0],
            |v: &[f64], _n| {
                let second = if v[1] > 2.0 { f64::NAN } else { v[1] };
                Ok(DVector::from_vec(vec![
                    Complex64::new(v[0], 0.0),
                    Complex64::new(second, 0.0),
                ]))
            },
        );
        match fim_numeric(&pv, 1.0, 0) {
            Err(OracleError::NonFiniteMean(name)) => assert_eq!(name, "fragile"),
            other => panic!("expected NonFiniteMean, got {other:?}"),
        }
    }

    #[test]
    fn test_benchmark_rejects_degenerate_scatter() {
        let s = small_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let f = Precoder::random_unit_phases(s.n_b, &mut rng);
        assert!(benchmark_fim(&s, s.b, f.effective(0)).is_err());
        assert!(benchmark_fim(&s, s.m, f.effective(0)).is_err());
    }
}
