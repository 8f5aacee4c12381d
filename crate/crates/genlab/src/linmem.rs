//! Over-parameterized linear models: exact memorization of arbitrary labels
//! and norm-inflated parameters whose train/test predictions stay within any
//! requested tolerance of the ground truth.
//!
//! The inflation construction splits a ground-truth parameter into its
//! components along the row space and null space of the stacked train/test
//! feature matrix, adds a scaled row-space perturbation (bounded effect on
//! predictions) and an arbitrarily large null-space component (no effect on
//! predictions), so the parameter norm and the distance from the ground
//! truth grow without bound while every prediction stays put.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, l2_norm, min_norm_solution, null_space_basis, pinv_solve, sym_eig, LinalgError, Matrix,
};

#[derive(Debug, Error)]
pub enum LinmemError {
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("instance dimensions inconsistent: {0}")]
    BadDimensions(String),
    #[error("no realizable ground truth: least-squares residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotRealizable { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A linear train/test problem: features, targets and (optionally) the
/// ground-truth parameter that generated them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearInstance {
    pub phi: Matrix,
    pub phi_test: Matrix,
    pub y: Matrix,
    pub y_test: Matrix,
    pub w_star: Option<Matrix>,
}

impl LinearInstance {
    pub fn new(
        phi: Matrix,
        phi_test: Matrix,
        y: Matrix,
        y_test: Matrix,
    ) -> Result<Self, LinmemError> {
        if phi.cols() != phi_test.cols() {
            return Err(LinmemError::BadDimensions(format!(
                "feature dims {} vs {}",
                phi.cols(),
                phi_test.cols()
            )));
        }
        if y.rows() != phi.rows() || y_test.rows() != phi_test.rows() || y.cols() != y_test.cols()
        {
            return Err(LinmemError::BadDimensions(format!(
                "targets {}x{} / {}x{} vs features {} / {} rows",
                y.rows(),
                y.cols(),
                y_test.rows(),
                y_test.cols(),
                phi.rows(),
                phi_test.rows()
            )));
        }
        Ok(Self {
            phi,
            phi_test,
            y,
            y_test,
            w_star: None,
        })
    }

    /// Build an instance whose targets come from an explicit ground truth.
    pub fn from_ground_truth(
        phi: Matrix,
        phi_test: Matrix,
        w_star: Matrix,
    ) -> Result<Self, LinmemError> {
        if phi.cols() != w_star.rows() || phi_test.cols() != w_star.rows() {
            return Err(LinmemError::BadDimensions(format!(
                "parameter has {} rows, features have {} / {} columns",
                w_star.rows(),
                phi.cols(),
                phi_test.cols()
            )));
        }
        let y = phi.matmul(&w_star)?;
        let y_test = phi_test.matmul(&w_star)?;
        Ok(Self {
            phi,
            phi_test,
            y,
            y_test,
            w_star: Some(w_star),
        })
    }

    /// Stacked train/test feature matrix.
    pub fn stacked(&self) -> Matrix {
        let n = self.phi.cols();
        let rows = self.phi.rows() + self.phi_test.rows();
        let mut m = Matrix::zeros(rows, n);
        for i in 0..self.phi.rows() {
            for j in 0..n {
                m.set(i, j, self.phi.get(i, j));
            }
        }
        for i in 0..self.phi_test.rows() {
            for j in 0..n {
                m.set(self.phi.rows() + i, j, self.phi_test.get(i, j));
            }
        }
        m
    }

    fn stacked_targets(&self) -> Matrix {
        let rows = self.y.rows() + self.y_test.rows();
        let cols = self.y.cols();
        let mut t = Matrix::zeros(rows, cols);
        for i in 0..self.y.rows() {
            for j in 0..cols {
                t.set(i, j, self.y.get(i, j));
            }
        }
        for i in 0..self.y_test.rows() {
            for j in 0..cols {
                t.set(self.y.rows() + i, j, self.y_test.get(i, j));
            }
        }
        t
    }

    /// The stored ground truth, or a minimum-norm least-squares fit over the
    /// stacked system; rejected when no parameter reproduces both target
    /// blocks (the construction presumes realizability).
    pub fn ground_truth(&self) -> Result<Matrix, LinmemError> {
        if let Some(w) = &self.w_star {
            return Ok(w.clone());
        }
        let m = self.stacked();
        let t = self.stacked_targets();
        let w = pinv_solve(&m, &t)?;
        let residual = m.matmul(&w)?.sub(&t)?.frobenius_norm();
        let tolerance = 1e-8 * (1.0 + t.frobenius_norm());
        if residual > tolerance {
            return Err(LinmemError::NotRealizable {
                residual,
                tolerance,
            });
        }
        Ok(w)
    }
}

/// Exact memorization: the minimum-norm parameter fitting arbitrary labels.
/// Requires more parameters than training rows and full-row-rank features.
pub fn memorize(instance: &LinearInstance) -> Result<Matrix, LinmemError> {
    let (m, n) = (instance.phi.rows(), instance.phi.cols());
    if n <= m {
        return Err(LinmemError::HypothesisFailed(format!(
            "needs n > m, got n = {n}, m = {m}"
        )));
    }
    let found = linalg::rank(&instance.phi)?;
    if found < m {
        return Err(LinmemError::HypothesisFailed(format!(
            "needs rank(phi) = {m}, numerical rank is {found}"
        )));
    }
    Ok(min_norm_solution(&instance.phi, &instance.y)?)
}

/// One row of the inflation certificate's norm-versus-scale table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormTableRow {
    pub alpha: f64,
    pub w_norm: f64,
    pub w_distance: f64,
    /// Max absolute change of any train/test prediction entry relative to
    /// the base inflation level.
    pub prediction_deviation: f64,
}

/// Numeric verification of the inflated parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InflationCertificate {
    pub epsilon: f64,
    pub delta_norm: f64,
    /// Null-space scale actually used.
    pub alpha: f64,
    /// `||phi w - y||_F`; at most epsilon (plus float slack).
    pub train_residual: f64,
    pub test_residual: f64,
    /// `||A||_F` and `||B||_F` of the unit-budget perturbations.
    pub perturbation_train_norm: f64,
    pub perturbation_test_norm: f64,
    pub w_norm: f64,
    pub w_distance: f64,
    /// `| ||w||^2 - (||row part||^2 + alpha^2) |`, relative.
    pub pythagoras_residual: f64,
    pub train_ok: bool,
    pub test_ok: bool,
    pub norm_ok: bool,
    pub distance_ok: bool,
    pub norm_table: Vec<NormTableRow>,
    pub w: Matrix,
}

impl InflationCertificate {
    pub fn all_ok(&self) -> bool {
        self.train_ok && self.test_ok && self.norm_ok && self.distance_ok
    }
}

/// Construct `w = w*_row + epsilon C1 + alpha C2` with `C1` the scaled top
/// feature direction in the row space and `C2` a unit null-space direction
/// of the stacked matrix, choosing `alpha` so both `||w||_F` and
/// `||w - w*||_F` clear `delta_norm` with a factor-two margin.
pub fn inflate(
    instance: &LinearInstance,
    epsilon: f64,
    delta_norm: f64,
) -> Result<InflationCertificate, LinmemError> {
    if epsilon < 0.0 || delta_norm < 0.0 {
        return Err(LinmemError::BadDimensions(
            "epsilon and delta_norm must be nonnegative".into(),
        ));
    }
    let n = instance.phi.cols();
    let stacked = instance.stacked();
    let null_basis = null_space_basis(&stacked)?;
    if null_basis.cols() == 0 {
        return Err(LinmemError::HypothesisFailed(format!(
            "needs rank(stacked) < n = {n}; the stacked matrix has full column rank"
        )));
    }
    let w_star = instance.ground_truth()?;
    let d_y = w_star.cols();

    // Row/null split of the ground truth.
    let null_coords = null_basis.transpose().matmul(&w_star)?;
    let w_star_null = null_basis.matmul(&null_coords)?;
    let w_star_row = w_star.sub(&w_star_null)?;

    // Row-space perturbation direction: the top feature direction, scaled so
    // both prediction perturbations stay strictly inside the unit Frobenius
    // budget (the margin absorbs null-space leaks at large inflation scales).
    let gram = instance.phi.transpose().matmul(&instance.phi)?;
    let eig = sym_eig(&gram)?;
    let v1 = if eig.lambda_max() > 0.0 {
        eig.eigenvector(0)
    } else {
        vec![0.0; n]
    };
    let scale = l2_norm(&instance.phi.matvec(&v1)?)
        .max(l2_norm(&instance.phi_test.matvec(&v1)?))
        * (1.0 + 1e-4);
    let mut c1 = Matrix::zeros(n, d_y);
    if scale > 0.0 {
        for (i, &v) in v1.iter().enumerate() {
            c1.set(i, 0, v / scale);
        }
    }

    // Unit null direction in the first output column.
    let mut c2 = Matrix::zeros(n, d_y);
    for i in 0..n {
        c2.set(i, 0, null_basis.get(i, 0));
    }

    let w_star_null_norm = w_star_null.frobenius_norm();
    let alpha = if delta_norm > 0.0 {
        2.0 * (delta_norm + w_star_null_norm)
    } else {
        0.0
    };

    let base = w_star_row.add(&c1.scale(epsilon))?;
    let w = base.add(&c2.scale(alpha))?;

    let certificate = certify(instance, &w_star, &base, &c2, alpha, epsilon, delta_norm, w)?;
    Ok(certificate)
}

#[allow(clippy::too_many_arguments)]
fn certify(
    instance: &LinearInstance,
    w_star: &Matrix,
    base: &Matrix,
    c2: &Matrix,
    alpha: f64,
    epsilon: f64,
    delta_norm: f64,
    w: Matrix,
) -> Result<InflationCertificate, LinmemError> {
    let train_pred = instance.phi.matmul(&w)?;
    let test_pred = instance.phi_test.matmul(&w)?;
    let train_residual = train_pred.sub(&instance.y)?.frobenius_norm();
    let test_residual = test_pred.sub(&instance.y_test)?.frobenius_norm();

    let float_slack = 1e-8
        * (1.0
            + instance.y.frobenius_norm().max(instance.y_test.frobenius_norm())
            + alpha * 1e-4);
    let train_ok = train_residual <= epsilon + float_slack;
    let test_ok = test_residual <= epsilon + float_slack;

    let w_norm = w.frobenius_norm();
    let w_distance = w.sub(w_star)?.frobenius_norm();
    let norm_ok = w_norm >= delta_norm - float_slack;
    let distance_ok = w_distance >= delta_norm - float_slack;

    let base_sq = base.frobenius_norm().powi(2);
    let pythagoras = (w_norm * w_norm - (base_sq + alpha * alpha)).abs()
        / (w_norm * w_norm).max(1.0);

    // Norm-versus-scale table; predictions must not move across rows.
    let mut norm_table = Vec::new();
    let base_pred = (train_pred, test_pred);
    for factor in [0.0, 0.5, 1.0, 2.0] {
        let a = alpha * factor;
        let w_a = base.add(&c2.scale(a))?;
        let tp = instance.phi.matmul(&w_a)?;
        let sp = instance.phi_test.matmul(&w_a)?;
        let deviation = tp
            .sub(&base_pred.0)?
            .max_abs()
            .max(sp.sub(&base_pred.1)?.max_abs());
        norm_table.push(NormTableRow {
            alpha: a,
            w_norm: w_a.frobenius_norm(),
            w_distance: w_a.sub(w_star)?.frobenius_norm(),
            prediction_deviation: deviation,
        });
    }

    Ok(InflationCertificate {
        epsilon,
        delta_norm,
        alpha,
        train_residual,
        test_residual,
        perturbation_train_norm: if epsilon > 0.0 {
            train_residual / epsilon
        } else {
            0.0
        },
        perturbation_test_norm: if epsilon > 0.0 {
            test_residual / epsilon
        } else {
            0.0
        },
        w_norm,
        w_distance,
        pythagoras_residual: pythagoras,
        train_ok,
        test_ok,
        norm_ok,
        distance_ok,
        norm_table,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::from_seed(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.range(-1.0, 1.0))
    }

    #[test]
    fn memorize_padded_identity() {
        // phi = [I_m | 0]: the solution stacks the labels over zeros.
        let m = 3;
        let n = 5;
        let phi = Matrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
        let y = random_matrix(m, 2, 1);
        let instance =
            LinearInstance::new(phi, Matrix::zeros(1, n), y.clone(), Matrix::zeros(1, 2))
                .unwrap();
        let w = memorize(&instance).unwrap();
        for i in 0..m {
            for j in 0..2 {
                assert!((w.get(i, j) - y.get(i, j)).abs() < 1e-10);
            }
        }
        for i in m..n {
            for j in 0..2 {
                assert!(w.get(i, j).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn memorize_random_and_random_one_hot_labels() {
        let phi = random_matrix(3, 7, 5);
        // Random one-hot labels: the memorization regime.
        let mut rng = Rng::from_seed(9);
        let y = Matrix::from_fn(3, 4, |i, j| {
            let hot = rng.index(4);
            let _ = i;
            if j == hot {
                1.0
            } else {
                0.0
            }
        });
        let instance =
            LinearInstance::new(phi.clone(), random_matrix(2, 7, 6), y.clone(), Matrix::zeros(2, 4))
                .unwrap();
        let w = memorize(&instance).unwrap();
        let residual = phi.matmul(&w).unwrap().sub(&y).unwrap().frobenius_norm();
        assert!(
            residual <= 1e-8 * (1.0 + y.frobenius_norm()),
            "memorization residual {residual}"
        );
    }

    #[test]
    fn memorize_rejects_failed_hypotheses() {
        // n <= m.
        let instance = LinearInstance::new(
            random_matrix(4, 3, 2),
            random_matrix(1, 3, 3),
            random_matrix(4, 1, 4),
            random_matrix(1, 1, 5),
        )
        .unwrap();
        assert!(matches!(
            memorize(&instance),
            Err(LinmemError::HypothesisFailed(_))
        ));

        // Rank-deficient features.
        let mut phi = random_matrix(3, 6, 7);
        for j in 0..6 {
            let v = phi.get(0, j);
            phi.set(2, j, 2.0 * v);
        }
        let instance = LinearInstance::new(
            phi,
            random_matrix(1, 6, 8),
            random_matrix(3, 1, 9),
            random_matrix(1, 1, 10),
        )
        .unwrap();
        assert!(matches!(
            memorize(&instance),
            Err(LinmemError::HypothesisFailed(_))
        ));
    }

    fn realizable_instance(m: usize, m_test: usize, n: usize, d_y: usize, seed: u64) -> LinearInstance {
        let phi = random_matrix(m, n, seed);
        let phi_test = random_matrix(m_test, n, seed + 1);
        let w_star = random_matrix(n, d_y, seed + 2);
        LinearInstance::from_ground_truth(phi, phi_test, w_star).unwrap()
    }

    #[test]
    fn inflate_zero_levels_projects_to_row_space() {
        let instance = realizable_instance(3, 2, 8, 2, 11);
        let cert = inflate(&instance, 0.0, 0.0).unwrap();
        assert_eq!(cert.alpha, 0.0);
        assert!(cert.train_residual < 1e-9, "train {}", cert.train_residual);
        assert!(cert.test_residual < 1e-9, "test {}", cert.test_residual);
        // The zero-level parameter is the row-space projection: no null part.
        let stacked = instance.stacked();
        let nb = null_space_basis(&stacked).unwrap();
        let coords = nb.transpose().matmul(&cert.w).unwrap();
        assert!(coords.max_abs() < 1e-9, "null component {}", coords.max_abs());
    }

    #[test]
    fn inflate_large_delta_norm_passes_all_checks() {
        let instance = realizable_instance(3, 2, 8, 2, 21);
        let epsilon = 1e-3;
        let cert = inflate(&instance, epsilon, 1e6).unwrap();
        assert!(cert.all_ok(), "certificate failed: {cert:?}");
        assert!(cert.w_norm >= 1e6);
        assert!(cert.w_distance >= 1e6);
        assert!(cert.perturbation_train_norm <= 1.0 + 1e-9);
        assert!(cert.perturbation_test_norm <= 1.0 + 1e-9);
        assert!(
            cert.pythagoras_residual <= 1e-8,
            "orthogonal split residual {}",
            cert.pythagoras_residual
        );
        // Norm grows monotonically with the null-space scale; predictions
        // stay fixed.
        for pair in cert.norm_table.windows(2) {
            assert!(pair[1].w_norm > pair[0].w_norm);
        }
        for row in &cert.norm_table {
            assert!(
                row.prediction_deviation <= 1e-8 * (1.0 + instance.y.frobenius_norm()),
                "prediction moved by {}",
                row.prediction_deviation
            );
        }
    }

    #[test]
    fn inflate_covers_underparameterized_regime() {
        // n = 5 <= m = 8 with rank(stacked) = 4 < n: build features from a
        // rank-4 factor so the stacked matrix has a null direction.
        let factor = random_matrix(4, 5, 31);
        let mix_train = random_matrix(8, 4, 32);
        let mix_test = random_matrix(3, 4, 33);
        let phi = mix_train.matmul(&factor).unwrap();
        let phi_test = mix_test.matmul(&factor).unwrap();
        let w_star = random_matrix(5, 2, 34);
        let instance = LinearInstance::from_ground_truth(phi, phi_test, w_star).unwrap();
        let cert = inflate(&instance, 1e-3, 1e6).unwrap();
        assert!(cert.all_ok(), "underparameterized certificate: {cert:?}");
    }

    #[test]
    fn inflate_rejects_full_column_rank() {
        let instance = realizable_instance(6, 4, 5, 1, 41);
        // 10 stacked rows, 5 columns, generic entries: full column rank.
        assert!(matches!(
            inflate(&instance, 0.1, 1.0),
            Err(LinmemError::HypothesisFailed(_))
        ));
    }

    #[test]
    fn ground_truth_fit_rejects_unrealizable_targets() {
        let phi = random_matrix(4, 6, 51);
        let phi_test = random_matrix(8, 6, 52);
        // Random targets on 12 stacked rows with rank <= 6: generically
        // unrealizable.
        let instance = LinearInstance::new(
            phi,
            phi_test,
            random_matrix(4, 2, 53),
            random_matrix(8, 2, 54),
        )
        .unwrap();
        assert!(matches!(
            instance.ground_truth(),
            Err(LinmemError::NotRealizable { .. })
        ));
    }

    #[test]
    fn prediction_invariance_is_exact_across_inflation_levels() {
        let instance = realizable_instance(4, 3, 10, 2, 61);
        let cert_small = inflate(&instance, 0.01, 10.0).unwrap();
        let cert_large = inflate(&instance, 0.01, 1e5).unwrap();
        let diff = instance
            .phi
            .matmul(&cert_small.w)
            .unwrap()
            .sub(&instance.phi.matmul(&cert_large.w).unwrap())
            .unwrap()
            .max_abs();
        assert!(diff <= 1e-8, "train predictions moved by {diff}");
    }
}
