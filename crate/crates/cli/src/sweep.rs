//! Sweep driver: evaluates bound reports over an SNR, element-count, or
//! phase-comparison grid and writes one deterministic CSV row per
//! (grid point, variant).
//!
//! The expensive channel-domain information matrix is assembled once per
//! (variant, profile) at unit SNR and rescaled across the grid: the
//! information is exactly linear in SNR, so this changes nothing but the
//! run time. Grid points and profiles are dispatched to a worker pool and
//! the rows are written in grid order.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use lisbound_core::bounds::{
    benchmark_bounds_from_fim, bounds_report_from_channel_fim, channel_fim, BoundsError,
    BoundsReport, FimSource,
};
use lisbound_core::channel::Precoder;
use lisbound_core::fim::FimMatrix;
use lisbound_core::phase::{incremental_phase, random_phase};
use lisbound_core::scenario::{
    channel_params_from_geometry, max_far_field_elements, GeometryError, Scenario,
};
use lisbound_core::validate::{validate_closed_form, ValidateError, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Snr,
    ElementCount,
    PhaseComparison,
    Validate,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Snr => "snr",
            SweepKind::ElementCount => "nl",
            SweepKind::PhaseComparison => "phase",
            SweepKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Incremental,
    Random,
}

impl PhaseMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseMode::Incremental => "incremental",
            PhaseMode::Random => "random",
        }
    }
}

/// One sweep request.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub phase: PhaseMode,
    /// Surface element count for SNR and phase sweeps.
    pub n_l: usize,
    /// Fixed SNR in dB for element-count sweeps.
    pub snr_db: f64,
    /// Random profiles per grid point (their per-column median is reported).
    pub trials: usize,
    pub seed: u64,
    pub fim_source: FimSource,
    /// Emit the scatterer-benchmark comparison rows.
    pub benchmark: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            kind: SweepKind::Snr,
            grid: default_snr_grid(),
            phase: PhaseMode::Incremental,
            n_l: 100,
            snr_db: 5.0,
            trials: 100,
            seed: 1,
            fim_source: FimSource::Numeric,
            benchmark: false,
        }
    }
}

/// The default SNR axis: -20..20 dB in 2.5 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=16).map(|i| -20.0 + 2.5 * i as f64).collect()
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("grid must be nonempty and sorted ascending")]
    BadGrid,
    #[error("trials must be >= 1")]
    BadTrials,
    #[error(
        "far-field violation: grid requests {requested} surface elements, the scenario admits at most {cap}"
    )]
    FarFieldViolation { requested: usize, cap: usize },
    #[error("element-count grid values must be positive integers, got {0}")]
    BadElementCount(f64),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Oracle(#[from] lisbound_core::OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error("failed to write output: {0}")]
    Io(#[from] std::io::Error),
}

/// Fixed CSV schema, one row per (grid point, variant).
pub const CSV_HEADER: &str = "sweep_kind,grid_value,variant,n_l,snr_db,phase_mode,peb_m,oeb_rad,\
crb_std_tau_bm,crb_std_theta_bm,crb_std_phi_bm,crb_std_rho_bm,\
crb_std_tau_lm,crb_std_phi_lm,crb_std_rho_lm,\
norm_crb_tau_lm,norm_crb_phi_lm,norm_crb_rho_lm,\
condition_number,fim_source,seed,bench";

/// One CSV row in schema order.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep_kind: &'static str,
    pub grid_value: f64,
    pub variant: String,
    pub n_l: usize,
    pub snr_db: f64,
    pub phase_mode: String,
    pub peb_m: f64,
    pub oeb_rad: f64,
    pub crb: [f64; 7],
    pub norm_crb_nlos: [f64; 3],
    pub condition_number: f64,
    pub fim_source: FimSource,
    pub seed: u64,
    pub bench: u8,
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let c = &self.crb;
        let n = &self.norm_crb_nlos;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sweep_kind,
            self.grid_value,
            self.variant,
            self.n_l,
            self.snr_db,
            self.phase_mode,
            self.peb_m,
            self.oeb_rad,
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            c[5],
            c[6],
            n[0],
            n[1],
            n[2],
            self.condition_number,
            self.fim_source,
            self.seed,
            self.bench
        )
    }
}

/// What a sweep produced: CSV rows, or a validation report for
/// [`SweepKind::Validate`].
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub validation: Option<ValidationReport>,
}

fn check_spec(s: &Scenario, spec: &SweepSpec) -> Result<(), SweepError> {
    if spec.kind == SweepKind::Validate {
        return Ok(());
    }
    if spec.grid.is_empty() || spec.grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(SweepError::BadGrid);
    }
    if spec.trials < 1 {
        return Err(SweepError::BadTrials);
    }
    let cap = max_far_field_elements(s);
    if spec.kind == SweepKind::ElementCount {
        for &g in &spec.grid {
            if g < 1.0 || g.fract() != 0.0 {
                return Err(SweepError::BadElementCount(g));
            }
            if g as usize > cap {
                return Err(SweepError::FarFieldViolation {
                    requested: g as usize,
                    cap,
                });
            }
        }
    } else if spec.n_l > cap {
        return Err(SweepError::FarFieldViolation {
            requested: spec.n_l,
            cap,
        });
    }
    Ok(())
}

fn unit_snr(s: &Scenario) -> Scenario {
    let mut u = s.clone();
    u.power = 1.0;
    u.noise_var = 1.0;
    u
}

fn scaled(fim: &FimMatrix, snr: f64) -> FimMatrix {
    FimMatrix {
        entries: &fim.entries * snr,
        subcarrier: fim.subcarrier,
    }
}

struct RowMeta<'a> {
    kind: &'static str,
    grid_value: f64,
    variant: &'a str,
    n_l: usize,
    snr_db: f64,
    phase_mode: &'a str,
    bench: bool,
}

fn report_to_row(spec: &SweepSpec, meta: &RowMeta<'_>, report: &BoundsReport) -> SweepRow {
    // Benchmark rows map the scatterer parameters into the *_lm columns.
    let labels: [&str; 7] = if meta.bench {
        [
            "tau_bm", "theta_bm", "phi_bm", "rho_bm", "tau_bsm", "phi_bsm", "rho_bsm",
        ]
    } else {
        lisbound_core::ETA_LABELS
    };
    let crb = std::array::from_fn(|i| report.crb_std[labels[i]]);
    let norm_crb_nlos = std::array::from_fn(|i| report.normalized_crb_std[labels[4 + i]]);
    SweepRow {
        sweep_kind: meta.kind,
        grid_value: meta.grid_value,
        variant: meta.variant.to_string(),
        n_l: meta.n_l,
        snr_db: meta.snr_db,
        phase_mode: meta.phase_mode.to_string(),
        peb_m: report.peb_m,
        oeb_rad: report.oeb_rad,
        crb,
        norm_crb_nlos,
        condition_number: report.condition_number,
        fim_source: report.fim_source,
        seed: spec.seed,
        bench: u8::from(meta.bench),
    }
}

/// Column-wise median across bound reports (deterministic: mean of the two
/// middle order statistics for even counts).
fn median_report(reports: &[BoundsReport]) -> BoundsReport {
    assert!(!reports.is_empty());
    let med = |xs: &mut Vec<f64>| -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len();
        if n % 2 == 1 {
            xs[n / 2]
        } else {
            0.5 * (xs[n / 2 - 1] + xs[n / 2])
        }
    };
    let mut out = reports[0].clone();
    out.peb_m = med(&mut reports.iter().map(|r| r.peb_m).collect());
    out.oeb_rad = med(&mut reports.iter().map(|r| r.oeb_rad).collect());
    out.condition_number = med(&mut reports.iter().map(|r| r.condition_number).collect());
    for key in out.crb_std.keys().cloned().collect::<Vec<_>>() {
        let v = med(&mut reports.iter().map(|r| r.crb_std[&key]).collect());
        out.crb_std.insert(key.clone(), v);
        let nv = med(&mut reports.iter().map(|r| r.normalized_crb_std[&key]).collect());
        out.normalized_crb_std.insert(key, nv);
    }
    out
}

/// Random profiles for the run, one RNG stream per profile index so the set
/// is independent of evaluation order.
fn draw_profiles(seed: u64, n_l: usize, count: usize) -> Vec<lisbound_core::PhaseProfile> {
    (0..count)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1_000 + t as u64);
            random_phase(n_l, &mut rng)
        })
        .collect()
}

struct VariantBase {
    variant: String,
    phase_mode: String,
    n_l: usize,
    /// Channel FIMs at unit SNR, one per profile (singleton for the
    /// deterministic variants).
    fims: Vec<FimMatrix>,
}

fn build_variant_bases(
    s: &Scenario,
    spec: &SweepSpec,
    f_eff: &DVector<Complex64>,
    n_l: usize,
) -> Result<Vec<VariantBase>, SweepError> {
    let mut s_nl = unit_snr(s);
    s_nl.n_l = n_l;
    let p = channel_params_from_geometry(&s_nl)?;
    let mut variants = Vec::new();

    let wants_incremental =
        spec.phase == PhaseMode::Incremental || spec.kind == SweepKind::PhaseComparison;
    let wants_random = spec.phase == PhaseMode::Random || spec.kind == SweepKind::PhaseComparison;

    if wants_incremental {
        let omega = incremental_phase(&s_nl, &p);
        let fim = channel_fim(&s_nl, &p, &omega, f_eff, spec.fim_source)?;
        variants.push(VariantBase {
            variant: "incremental".to_string(),
            phase_mode: "incremental".to_string(),
            n_l,
            fims: vec![fim],
        });
    }
    if wants_random {
        let profiles = draw_profiles(spec.seed, n_l, spec.trials);
        let fims: Result<Vec<FimMatrix>, BoundsError> = profiles
            .par_iter()
            .map(|omega| channel_fim(&s_nl, &p, omega, f_eff, spec.fim_source))
            .collect();
        variants.push(VariantBase {
            variant: "random".to_string(),
            phase_mode: "random".to_string(),
            n_l,
            fims: fims?,
        });
    }
    Ok(variants)
}

/// Evaluate a sweep to rows without touching the filesystem.
pub fn evaluate_sweep(s: &Scenario, spec: &SweepSpec) -> Result<SweepOutcome, SweepError> {
    check_spec(s, spec)?;
    if spec.kind == SweepKind::Validate {
        let report = validate_closed_form(50, spec.seed, 1e-6)?;
        return Ok(SweepOutcome {
            rows: Vec::new(),
            validation: Some(report),
        });
    }

    // The effective transmitted vector is drawn once per run and shared by
    // every grid point and variant.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let precoder = Precoder::random_unit_phases(s.n_b, &mut rng);
    let f_eff = precoder.effective(0).clone();
    let kind = spec.kind.as_str();

    let bench_base = if spec.benchmark {
        let unit = unit_snr(s);
        Some(lisbound_core::benchmark_fim(&unit, s.l, &f_eff)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    match spec.kind {
        SweepKind::Snr | SweepKind::PhaseComparison => {
            let bases = build_variant_bases(s, spec, &f_eff, spec.n_l)?;
            let unit = unit_snr(s);
            let p = channel_params_from_geometry(&unit)?;
            for &snr_db in &spec.grid {
                let snr = 10f64.powf(snr_db / 10.0);
                for base in &bases {
                    let mut s_nl = unit.clone();
                    s_nl.n_l = base.n_l;
                    let reports: Result<Vec<BoundsReport>, BoundsError> = base
                        .fims
                        .iter()
                        .map(|fim| {
                            bounds_report_from_channel_fim(
                                &s_nl,
                                &p,
                                &scaled(fim, snr),
                                spec.fim_source,
                            )
                        })
                        .collect();
                    let reports = reports?;
                    let report = median_report(&reports);
                    let meta = RowMeta {
                        kind,
                        grid_value: snr_db,
                        variant: &base.variant,
                        n_l: base.n_l,
                        snr_db,
                        phase_mode: &base.phase_mode,
                        bench: false,
                    };
                    rows.push(report_to_row(spec, &meta, &report));
                }
                if let Some(bench) = &bench_base {
                    let report = benchmark_bounds_from_fim(&unit_snr(s), s.l, &scaled(bench, snr))?;
                    let meta = RowMeta {
                        kind,
                        grid_value: snr_db,
                        variant: "los_scatter",
                        n_l: 0,
                        snr_db,
                        phase_mode: "none",
                        bench: true,
                    };
                    rows.push(report_to_row(spec, &meta, &report));
                }
            }
        }
        SweepKind::ElementCount => {
            let snr = 10f64.powf(spec.snr_db / 10.0);
            let unit = unit_snr(s);
            let p = channel_params_from_geometry(&unit)?;
            let per_point: Result<Vec<Vec<SweepRow>>, SweepError> = spec
                .grid
                .par_iter()
                .map(|&g| {
                    let n_l = g as usize;
                    let bases = build_variant_bases(s, spec, &f_eff, n_l)?;
                    let mut point_rows = Vec::new();
                    for base in &bases {
                        let mut s_nl = unit.clone();
                        s_nl.n_l = n_l;
                        let reports: Result<Vec<BoundsReport>, BoundsError> = base
                            .fims
                            .iter()
                            .map(|fim| {
                                bounds_report_from_channel_fim(
                                    &s_nl,
                                    &p,
                                    &scaled(fim, snr),
                                    spec.fim_source,
                                )
                            })
                            .collect();
                        let report = median_report(&reports?);
                        let meta = RowMeta {
                            kind,
                            grid_value: g,
                            variant: &base.variant,
                            n_l,
                            snr_db: spec.snr_db,
                            phase_mode: &base.phase_mode,
                            bench: false,
                        };
                        point_rows.push(report_to_row(spec, &meta, &report));
                    }
                    if let Some(bench) = &bench_base {
                        let report =
                            benchmark_bounds_from_fim(&unit_snr(s), s.l, &scaled(bench, snr))?;
                        let meta = RowMeta {
                            kind,
                            grid_value: g,
                            variant: "los_scatter",
                            n_l: 0,
                            snr_db: spec.snr_db,
                            phase_mode: "none",
                            bench: true,
                        };
                        point_rows.push(report_to_row(spec, &meta, &report));
                    }
                    Ok(point_rows)
                })
                .collect();
            for point in per_point? {
                rows.extend(point);
            }
        }
        SweepKind::Validate => unreachable!(),
    }
    Ok(SweepOutcome {
        rows,
        validation: None,
    })
}

/// Run a sweep and write its product to `out_path`: the CSV table, or the
/// discrepancy report for [`SweepKind::Validate`].
pub fn run_sweep(
    s: &Scenario,
    spec: &SweepSpec,
    out_path: &Path,
) -> Result<SweepOutcome, SweepError> {
    let outcome = evaluate_sweep(s, spec)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out_path)?);
    if let Some(report) = &outcome.validation {
        file.write_all(report.to_text().as_bytes())?;
    } else {
        writeln!(file, "{CSV_HEADER}")?;
        for row in &outcome.rows {
            writeln!(file, "{}", row.to_csv_line())?;
        }
    }
    file.flush()?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_reference_scenario() -> Scenario {
        let mut s = Scenario::reference();
        s.n_b = 16;
        s.n_m = 8;
        s.n_sub = 7;
        s
    }

    #[test]
    fn test_far_field_violation_names_cap() {
        let s = Scenario::reference();
        let spec = SweepSpec {
            kind: SweepKind::ElementCount,
            grid: vec![10.0, 139.0],
            ..Default::default()
        };
        match evaluate_sweep(&s, &spec) {
            Err(SweepError::FarFieldViolation { requested, cap }) => {
                assert_eq!(requested, 139);
                assert_eq!(cap, 138);
            }
            other => panic!("expected far-field violation, got {other:?}"),
        }
    }

    #[test]
    fn test_grid_must_be_sorted() {
        let s = small_reference_scenario();
        let spec = SweepSpec {
            grid: vec![5.0, -5.0],
            ..Default::default()
        };
        assert!(matches!(
            evaluate_sweep(&s, &spec),
            Err(SweepError::BadGrid)
        ));
    }

    #[test]
    fn test_snr_sweep_layout_and_scaling() {
        let s = small_reference_scenario();
        let spec = SweepSpec {
            kind: SweepKind::Snr,
            grid: vec![-5.0, 0.0, 5.0],
            n_l: 16,
            fim_source: FimSource::ClosedForm,
            benchmark: true,
            ..Default::default()
        };
        let outcome = evaluate_sweep(&s, &spec).unwrap();
        assert_eq!(outcome.rows.len(), 6); // (incremental + benchmark) x 3
        let inc: Vec<&SweepRow> = outcome
            .rows
            .iter()
            .filter(|r| r.variant == "incremental")
            .collect();
        // Exact inverse-sqrt SNR interpolation between adjacent points.
        for w in inc.windows(2) {
            let expect = 10f64.powf((w[1].snr_db - w[0].snr_db) / 20.0);
            let got = w[0].peb_m / w[1].peb_m;
            assert!((got / expect - 1.0).abs() < 0.01, "{got} vs {expect}");
        }
        let bench: Vec<&SweepRow> = outcome.rows.iter().filter(|r| r.bench == 1).collect();
        assert_eq!(bench.len(), 3);
        assert!(bench
            .iter()
            .all(|r| r.variant == "los_scatter" && r.n_l == 0));
    }

    #[test]
    fn test_element_sweep_monotone_and_benchmark_constant() {
        let s = small_reference_scenario();
        let spec = SweepSpec {
            kind: SweepKind::ElementCount,
            grid: vec![10.0, 20.0, 40.0, 80.0, 130.0],
            phase: PhaseMode::Incremental,
            fim_source: FimSource::ClosedForm,
            benchmark: true,
            snr_db: 5.0,
            ..Default::default()
        };
        let outcome = evaluate_sweep(&s, &spec).unwrap();
        let lis: Vec<&SweepRow> = outcome.rows.iter().filter(|r| r.bench == 0).collect();
        for idx in 4..7 {
            for w in lis.windows(2) {
                assert!(
                    w[1].crb[idx] < w[0].crb[idx],
                    "reflected-path column {idx} not strictly decreasing"
                );
            }
        }
        let bench: Vec<&SweepRow> = outcome.rows.iter().filter(|r| r.bench == 1).collect();
        assert_eq!(bench.len(), 5);
        for w in bench.windows(2) {
            assert_eq!(w[0].peb_m.to_bits(), w[1].peb_m.to_bits());
            assert_eq!(w[0].crb[4].to_bits(), w[1].crb[4].to_bits());
        }
    }

    #[test]
    fn test_validate_kind_produces_report() {
        let s = Scenario::reference();
        let spec = SweepSpec {
            kind: SweepKind::Validate,
            seed: 9,
            ..Default::default()
        };
        let outcome = evaluate_sweep(&s, &spec).unwrap();
        assert!(outcome.rows.is_empty());
        let report = outcome.validation.unwrap();
        assert!(report.all_stable());
        let summaries = report.summaries();
        assert_eq!(summaries.len(), 1);
        assert_eq!((summaries[0].row, summaries[0].col), (0, 1));
    }

    #[test]
    fn test_csv_determinism() {
        let s = small_reference_scenario();
        let spec = SweepSpec {
            kind: SweepKind::PhaseComparison,
            grid: vec![0.0, 5.0],
            n_l: 12,
            trials: 3,
            seed: 33,
            fim_source: FimSource::ClosedForm,
            benchmark: true,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        run_sweep(&s, &spec, &p1).unwrap();
        run_sweep(&s, &spec, &p2).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "same spec and seed must give identical bytes");
    }
}
