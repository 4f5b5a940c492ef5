//! Sparse partial-association estimation: a positive-semidefinite projection
//! for effect-size matrices, graphical lasso by coordinate descent, and
//! EBIC-based penalty selection.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// A verified symmetric positive-semidefinite matrix.
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    m: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl PsdMatrix {
    /// Wraps a matrix that is already symmetric PSD (up to a small negative
    /// eigenvalue tolerance).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let min_eigenvalue = min_eig(&m);
        if min_eigenvalue < -1e-8 {
            return Err(Error::InvalidInput(format!(
                "matrix is not PSD (min eigenvalue {min_eigenvalue:.3e})"
            )));
        }
        Ok(PsdMatrix { m, min_eigenvalue })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn p(&self) -> usize {
        self.m.nrows()
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Projects a symmetric matrix to a correlation-like PSD matrix: eigenvalues
/// are clipped from below and the diagonal is rescaled back to 1. The clip
/// level is raised geometrically until the rescaled matrix keeps its minimum
/// eigenvalue at or above `eps`.
pub fn nearest_psd(m: &DMatrix<f64>, eps: f64) -> Result<PsdMatrix> {
    check_symmetric(m)?;
    if eps < 0.0 {
        return Err(Error::InvalidInput("eps must be nonnegative".into()));
    }
    let p = m.nrows();
    let mut clip = eps;
    for _ in 0..64 {
        let eig = m.clone().symmetric_eigen();
        let vals = DVector::from_fn(p, |i, _| eig.eigenvalues[i].max(clip));
        let mut rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        // rescale to unit diagonal
        let scale = DVector::from_fn(p, |i, _| 1.0 / rebuilt[(i, i)].sqrt());
        for i in 0..p {
            for j in 0..p {
                rebuilt[(i, j)] *= scale[i] * scale[j];
            }
        }
        // exact symmetry and exact unit diagonal
        for i in 0..p {
            rebuilt[(i, i)] = 1.0;
            for j in (i + 1)..p {
                let v = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
                rebuilt[(i, j)] = v;
                rebuilt[(j, i)] = v;
            }
        }
        let lo = min_eig(&rebuilt);
        if lo >= eps || eps == 0.0 {
            return Ok(PsdMatrix {
                m: rebuilt,
                min_eigenvalue: lo.max(0.0),
            });
        }
        clip = (clip * 2.0).max(f64::MIN_POSITIVE);
    }
    Err(Error::Convergence { max_iter: 64 })
}

/// Graphical lasso solution at one penalty value.
#[derive(Debug, Clone, Serialize)]
pub struct PrecisionResult {
    #[serde(skip)]
    pub theta: DMatrix<f64>,
    #[serde(skip)]
    pub w: DMatrix<f64>,
    pub lambda: f64,
    /// Filled by `ebic_select`; absent for direct fits.
    pub ebic: Option<f64>,
    /// Strictly nonzero off-diagonal entries in the upper triangle.
    pub edge_count: usize,
}

/// Maximizes log det(Theta) - tr(S Theta) - lambda * ||Theta||_1,off over
/// positive-definite Theta, by block coordinate descent over columns with a
/// soft-thresholded inner solve. The diagonal is unpenalized, so the fitted
/// covariance keeps W_jj = S_jj and lambda = 0 reproduces the plain inverse.
pub fn graphical_lasso(
    s: &PsdMatrix,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PrecisionResult> {
    if lambda < 0.0 {
        return Err(Error::InvalidInput("lambda must be nonnegative".into()));
    }
    let sm = s.matrix();
    let p = s.p();
    if (0..p).any(|i| sm[(i, i)] <= 0.0) {
        return Err(Error::InvalidInput(
            "glasso input needs a positive diagonal".into(),
        ));
    }
    if lambda == 0.0 && Cholesky::new(sm.clone()).is_none() {
        return Err(Error::Singular);
    }
    if p == 1 {
        return Ok(PrecisionResult {
            theta: DMatrix::from_element(1, 1, 1.0 / sm[(0, 0)]),
            w: sm.clone(),
            lambda,
            ebic: None,
            edge_count: 0,
        });
    }

    let mut w = sm.clone();
    // betas[j] holds the lasso coefficients of column j against the rest,
    // indexed by the full 0..p range with entry j unused.
    let mut betas = vec![vec![0.0f64; p]; p];
    let inner_tol = (tol * 1e-2).max(1e-15);
    let inner_max = 1000;

    let mut converged = false;
    for _ in 0..max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let beta = &mut betas[j];
            for _ in 0..inner_max {
                let mut inner_delta = 0.0f64;
                for k in 0..p {
                    if k == j {
                        continue;
                    }
                    // residual gradient for coordinate k
                    let mut acc = 0.0;
                    for l in 0..p {
                        if l != j && l != k {
                            acc += w[(k, l)] * beta[l];
                        }
                    }
                    let target = sm[(k, j)] - acc;
                    let next = soft_threshold(target, lambda) / w[(k, k)];
                    inner_delta = inner_delta.max((next - beta[k]).abs());
                    beta[k] = next;
                }
                if inner_delta < inner_tol {
                    break;
                }
            }
            // w12 update: W[.,j] = W11 * beta
            for i in 0..p {
                if i == j {
                    continue;
                }
                let mut acc = 0.0;
                for l in 0..p {
                    if l != j {
                        acc += w[(i, l)] * beta[l];
                    }
                }
                max_delta = max_delta.max((acc - w[(i, j)]).abs());
                w[(i, j)] = acc;
                w[(j, i)] = acc;
            }
        }
        if max_delta < tol {
            // accept only once the stationarity identity
            // tr(S Theta) + lambda ||Theta||_1,off = p holds to 10 * tol
            let candidate = recover_precision(sm, &w, &betas, lambda);
            if kkt_residual(sm, &candidate.theta, lambda) <= 10.0 * tol {
                converged = true;
                break;
            }
        }
    }

    let result = recover_precision(sm, &w, &betas, lambda);
    if converged {
        Ok(result)
    } else {
        Err(Error::GlassoConvergence {
            max_iter,
            lambda,
            last: Box::new(result),
        })
    }
}

/// |tr(S Theta) + lambda ||Theta||_1,off - p|, zero at the exact optimum.
pub fn kkt_residual(s: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64) -> f64 {
    let p = s.nrows();
    let mut l1_off = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                l1_off += theta[(i, j)].abs();
            }
        }
    }
    ((s * theta).trace() + lambda * l1_off - p as f64).abs()
}

fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

fn recover_precision(
    s: &DMatrix<f64>,
    w: &DMatrix<f64>,
    betas: &[Vec<f64>],
    lambda: f64,
) -> PrecisionResult {
    let p = s.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let beta = &betas[j];
        let mut quad = 0.0;
        for i in 0..p {
            if i != j {
                quad += w[(i, j)] * beta[i];
            }
        }
        let tjj = 1.0 / (w[(j, j)] - quad);
        theta[(j, j)] = tjj;
        for i in 0..p {
            if i != j {
                theta[(i, j)] = -beta[i] * tjj;
            }
        }
    }
    // Enforce a symmetric value and zero pattern: an entry is zero iff both
    // column solves agree it is, otherwise the two estimates are averaged.
    let mut edge_count = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            let v = if theta[(i, j)] == 0.0 && theta[(j, i)] == 0.0 {
                0.0
            } else {
                0.5 * (theta[(i, j)] + theta[(j, i)])
            };
            theta[(i, j)] = v;
            theta[(j, i)] = v;
            if v != 0.0 {
                edge_count += 1;
            }
        }
    }
    PrecisionResult {
        theta,
        w: w.clone(),
        lambda,
        ebic: None,
        edge_count,
    }
}

/// Gaussian log-likelihood term (n/2)(log det Theta - tr(S Theta)), up to
/// constants.
pub fn log_likelihood(s: &DMatrix<f64>, theta: &DMatrix<f64>, n: usize) -> Result<f64> {
    let chol = Cholesky::new(theta.clone()).ok_or(Error::Singular)?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = (s * theta).trace();
    Ok(0.5 * n as f64 * (logdet - trace))
}

/// EBIC = -2 l(Theta) + |E| log n + 4 |E| gamma log p.
pub fn ebic(s: &DMatrix<f64>, fit: &PrecisionResult, n: usize, gamma: f64) -> Result<f64> {
    let ll = log_likelihood(s, &fit.theta, n)?;
    let e = fit.edge_count as f64;
    let p = s.nrows() as f64;
    Ok(-2.0 * ll + e * (n as f64).ln() + 4.0 * e * gamma * p.ln())
}

/// One row of the penalty-selection log.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaFit {
    pub lambda: f64,
    pub ebic: Option<f64>,
    pub edge_count: Option<usize>,
    pub converged: bool,
}

/// Log-spaced grid on [ratio * lambda_max, lambda_max] where lambda_max is
/// the largest absolute off-diagonal entry. Ascending.
pub fn default_lambda_grid(s: &PsdMatrix, points: usize, ratio: f64) -> Vec<f64> {
    let m = s.matrix();
    let p = s.p();
    let mut lambda_max = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            lambda_max = lambda_max.max(m[(i, j)].abs());
        }
    }
    if lambda_max <= 0.0 || points == 0 {
        return vec![0.0];
    }
    let lo = (lambda_max * ratio).ln();
    let hi = lambda_max.ln();
    if points == 1 {
        return vec![lambda_max];
    }
    (0..points)
        .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Fits the whole grid and returns the EBIC minimizer (ties resolved toward
/// the larger penalty) together with the per-lambda fit log.
pub fn ebic_select(
    s: &PsdMatrix,
    n: usize,
    lambda_grid: &[f64],
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(PrecisionResult, Vec<LambdaFit>)> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(
            "EBIC needs at least 2 observations".into(),
        ));
    }
    let mut grid: Vec<f64> = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);

    let fits: Vec<Option<PrecisionResult>> = grid
        .par_iter()
        .map(|&lambda| {
            graphical_lasso(s, lambda, tol, max_iter)
                .ok()
                .and_then(|mut fit| {
                    let score = ebic(s.matrix(), &fit, n, gamma).ok()?;
                    fit.ebic = Some(score);
                    Some(fit)
                })
        })
        .collect();

    let log: Vec<LambdaFit> = grid
        .iter()
        .zip(&fits)
        .map(|(&lambda, fit)| LambdaFit {
            lambda,
            ebic: fit.as_ref().and_then(|f| f.ebic),
            edge_count: fit.as_ref().map(|f| f.edge_count),
            converged: fit.is_some(),
        })
        .collect();

    let mut best: Option<PrecisionResult> = None;
    for fit in fits.into_iter().flatten() {
        // ascending grid + non-strict comparison: ties go to the larger lambda
        let better = match &best {
            None => true,
            Some(b) => fit.ebic.expect("scored") <= b.ebic.expect("scored"),
        };
        if better {
            best = Some(fit);
        }
    }
    match best {
        Some(fit) => Ok((fit, log)),
        None => Err(Error::Convergence { max_iter }),
    }
}

/// rho_ij = -theta_ij / sqrt(theta_ii * theta_jj) off the diagonal, 1 on it.
pub fn partial_correlations(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(theta)?;
    let p = theta.nrows();
    if (0..p).any(|i| theta[(i, i)] <= 0.0) {
        return Err(Error::InvalidInput(
            "precision matrix needs a positive diagonal".into(),
        ));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            -theta[(i, j)] / (theta[(i, i)] * theta[(j, j)]).sqrt()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_correlation(p: usize, rng: &mut ChaCha8Rng) -> PsdMatrix {
        // A A^T + p I is comfortably PD; then rescale to unit diagonal.
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let mut m = &a * a.transpose();
        for i in 0..p {
            m[(i, i)] += p as f64;
        }
        let d: Vec<f64> = (0..p).map(|i| m[(i, i)].sqrt()).collect();
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] /= d[i] * d[j];
            }
        }
        for i in 0..p {
            m[(i, i)] = 1.0;
        }
        PsdMatrix::new(m).unwrap()
    }

    #[test]
    fn nearest_psd_keeps_identity() {
        let m = DMatrix::identity(4, 4);
        let out = nearest_psd(&m, 1e-8).unwrap();
        assert_relative_eq!(out.matrix(), &m, epsilon = 1e-12);
    }

    #[test]
    fn nearest_psd_is_noop_on_psd_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_correlation(5, &mut rng);
        let out = nearest_psd(s.matrix(), 1e-10).unwrap();
        assert_relative_eq!(out.matrix(), s.matrix(), epsilon = 1e-9);
    }

    #[test]
    fn nearest_psd_fixes_indefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        let eps = 1e-8;
        let out = nearest_psd(&m, eps).unwrap();
        assert!(out.min_eigenvalue() >= eps * 0.999);
        assert_relative_eq!(out.matrix()[(0, 0)], 1.0);
        assert_relative_eq!(out.matrix()[(1, 1)], 1.0);
        assert!(out.matrix()[(0, 1)].abs() < 1.0);
    }

    #[test]
    fn nearest_psd_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(nearest_psd(&m, 1e-8).is_err());
    }

    #[test]
    fn identity_input_gives_identity_precision() {
        let s = PsdMatrix::new(DMatrix::identity(4, 4)).unwrap();
        for lambda in [0.0, 0.1, 1.0, 10.0] {
            let fit = graphical_lasso(&s, lambda, 1e-8, 200).unwrap();
            assert_relative_eq!(&fit.theta, &DMatrix::identity(4, 4), epsilon = 1e-10);
            assert_eq!(fit.edge_count, 0);
        }
    }

    #[test]
    fn large_lambda_prunes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_correlation(5, &mut rng);
        let lambda_max = default_lambda_grid(&s, 1, 0.01)[0];
        let fit = graphical_lasso(&s, lambda_max, 1e-8, 500).unwrap();
        assert_eq!(fit.edge_count, 0);
        for i in 0..5 {
            assert_relative_eq!(fit.theta[(i, i)], 1.0 / s.matrix()[(i, i)], epsilon = 1e-9);
        }
    }

    #[test]
    fn lambda_zero_recovers_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_correlation(3, &mut rng);
        let fit = graphical_lasso(&s, 0.0, 1e-10, 2000).unwrap();
        let inv = s.matrix().clone().try_inverse().unwrap();
        let err = (&fit.theta - &inv).abs().max();
        assert!(err < 1e-6, "max deviation {err}");
        // theta * w ~ I
        let prod = &fit.theta * &fit.w;
        assert_relative_eq!(&prod, &DMatrix::identity(3, 3), epsilon = 1e-6);
    }

    #[test]
    fn singular_input_with_zero_lambda_errors() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = 1.0;
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        let s = PsdMatrix::new(m).unwrap();
        assert!(matches!(
            graphical_lasso(&s, 0.0, 1e-6, 100),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn kkt_residual_is_bounded_at_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = random_correlation(6, &mut rng);
        let tol = 1e-7;
        let fit = graphical_lasso(&s, 0.08, tol, 2000).unwrap();
        let residual = kkt_residual(s.matrix(), &fit.theta, 0.08);
        assert!(residual <= 10.0 * tol, "residual {residual}");
        assert!(Cholesky::new(fit.theta.clone()).is_some());
    }

    #[test]
    fn zero_pattern_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = random_correlation(6, &mut rng);
        let fit = graphical_lasso(&s, 0.05, 1e-7, 1000).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(fit.theta[(i, j)] == 0.0, fit.theta[(j, i)] == 0.0);
            }
        }
    }

    #[test]
    fn ebic_identity_ties_resolve_to_largest_lambda() {
        let s = PsdMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let grid = [0.0, 0.1, 0.5, 0.9];
        let (best, log) = ebic_select(&s, 100, &grid, 0.5, 1e-8, 200).unwrap();
        assert_eq!(best.lambda, 0.9);
        assert_eq!(best.edge_count, 0);
        assert_eq!(log.len(), 4);
        assert!(log.iter().all(|l| l.converged));
    }

    #[test]
    fn edge_count_monotone_along_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = random_correlation(6, &mut rng);
        let grid = default_lambda_grid(&s, 25, 0.01);
        let mut last = usize::MAX;
        for &lambda in &grid {
            let fit = graphical_lasso(&s, lambda, 1e-7, 1000).unwrap();
            assert!(fit.edge_count <= last);
            last = fit.edge_count;
        }
    }

    #[test]
    fn ebic_gamma_zero_is_bic() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let s = random_correlation(4, &mut rng);
        let fit = graphical_lasso(&s, 0.1, 1e-7, 500).unwrap();
        let n = 250;
        let ll = log_likelihood(s.matrix(), &fit.theta, n).unwrap();
        let bic = -2.0 * ll + fit.edge_count as f64 * (n as f64).ln();
        assert_relative_eq!(ebic(s.matrix(), &fit, n, 0.0).unwrap(), bic, epsilon = 1e-10);
    }

    #[test]
    fn chain_structure_is_recovered() {
        // AR(1)-style chain: precision is tridiagonal, so the selected model
        // should keep exactly the chain edges.
        let n = 2000usize;
        let rho: f64 = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut normal = || -> f64 {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let p = 4;
        let mut data = vec![vec![0.0f64; p]; n];
        for row in data.iter_mut() {
            row[0] = normal();
            for j in 1..p {
                row[j] = rho * row[j - 1] + (1.0 - rho * rho).sqrt() * normal();
            }
        }
        // sample correlation matrix
        let means: Vec<f64> = (0..p)
            .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] = data
                    .iter()
                    .map(|r| (r[i] - means[i]) * (r[j] - means[j]))
                    .sum::<f64>()
                    / n as f64;
            }
        }
        let d: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] /= d[i] * d[j];
            }
        }
        let s = nearest_psd(&cov, 1e-10).unwrap();
        let grid = default_lambda_grid(&s, 50, 0.01);
        let (best, _) = ebic_select(&s, n, &grid, 0.5, 1e-7, 1000).unwrap();
        for i in 0..p {
            for j in (i + 1)..p {
                let present = best.theta[(i, j)] != 0.0;
                assert_eq!(present, j == i + 1, "edge ({i},{j})");
            }
        }
    }

    #[test]
    fn partial_correlation_examples() {
        let theta = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let rho = partial_correlations(&theta).unwrap();
        assert_relative_eq!(rho[(0, 1)], 0.5);
        assert_relative_eq!(rho[(0, 0)], 1.0);

        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 5.0, 7.0]));
        let rho = partial_correlations(&diag).unwrap();
        assert_relative_eq!(&rho, &DMatrix::identity(3, 3));
    }

    #[test]
    fn partial_correlations_bounded_on_random_pd_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let s = random_correlation(5, &mut rng);
            let theta = s.matrix().clone().try_inverse().unwrap();
            let theta = (&theta + theta.transpose()) * 0.5;
            let rho = partial_correlations(&theta).unwrap();
            for i in 0..5 {
                assert_relative_eq!(rho[(i, i)], 1.0);
                for j in 0..5 {
                    assert!(rho[(i, j)].abs() <= 1.0 + 1e-12);
                    assert_relative_eq!(rho[(i, j)], rho[(j, i)], epsilon = 1e-12);
                }
            }
        }
    }
}
