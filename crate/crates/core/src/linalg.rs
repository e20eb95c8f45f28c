//! Small dense linear-algebra helpers shared by the FIM and bounds pipeline:
//! pairwise matrix summation, eigendecomposition-backed PSD inversion with a
//! relative eigenvalue floor, and angle wrapping.

use nalgebra::{DMatrix, DVector};

/// Sum a list of equally sized matrices with pairwise reduction to limit
/// cancellation when entries span many orders of magnitude.
pub fn pairwise_sum(mut terms: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    assert!(!terms.is_empty(), "pairwise_sum needs at least one term");
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        terms = next;
    }
    terms.pop().unwrap()
}

/// Minimum and maximum eigenvalue of a real symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Result of [`invert_psd`].
#[derive(Debug, Clone)]
pub struct PsdInverse {
    /// Pseudo-inverse with floored eigenvalues treated as exact zeros.
    pub inv: DMatrix<f64>,
    /// `L` such that `L zᵀ` with `z ~ N(0, I)` has covariance `inv`.
    pub inv_sqrt: DMatrix<f64>,
    /// Ratio of largest to smallest retained eigenvalue of the raw matrix.
    pub condition_number: f64,
    /// Unit-norm directions whose information fell below the floor.
    pub floored_directions: Vec<DVector<f64>>,
}

impl PsdInverse {
    /// True when a floored (effectively null) direction has a component on
    /// coordinate `i` larger than `tol`.
    pub fn null_space_touches(&self, i: usize, tol: f64) -> bool {
        self.floored_directions.iter().any(|v| v[i].abs() > tol)
    }
}

/// Invert a symmetric PSD matrix by eigendecomposition, flooring eigenvalues
/// below `floor_rel` times the largest one.
///
/// The matrix is equilibrated with its diagonal (Jacobi scaling) before the
/// decomposition so that unit disparity between coordinates (delays in
/// seconds next to dimensionless gains) cannot push genuine information
/// below the floor. Floored directions are reported in the original
/// coordinates.
pub fn invert_psd(m: &DMatrix<f64>, floor_rel: f64) -> PsdInverse {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "invert_psd needs a square matrix");

    // Diagonal equilibration; zero/negative diagonals keep unit scale.
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = m[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = m.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }

    let eig = scaled.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let floor = floor_rel * max_eig;

    let mut inv = DMatrix::zeros(n, n);
    let mut inv_sqrt = DMatrix::zeros(n, n);
    let mut floored = Vec::new();
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        if lambda <= floor || max_eig == 0.0 {
            // Map the null direction back to original coordinates.
            let mut dir = DVector::zeros(n);
            for i in 0..n {
                dir[i] = v[i] * scale[i];
            }
            let norm = dir.norm();
            if norm > 0.0 {
                dir /= norm;
            }
            floored.push(dir);
            continue;
        }
        let w = 1.0 / lambda;
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] += v[i] * v[j] * w * scale[i] * scale[j];
            }
            inv_sqrt[(i, k)] = v[i] * scale[i] * w.sqrt();
        }
    }

    // Condition number reported on the raw spectrum.
    let raw = m.clone().symmetric_eigen();
    let raw_max = raw.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let raw_min = raw
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let condition_number = if raw_min.is_finite() && raw_min > 0.0 {
        raw_max / raw_min
    } else {
        f64::INFINITY
    };

    PsdInverse {
        inv,
        inv_sqrt,
        condition_number,
        floored_directions: floored,
    }
}

/// Wrap an angle to the interval `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y <= -std::f64::consts::PI {
        y += two_pi;
    } else if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}
