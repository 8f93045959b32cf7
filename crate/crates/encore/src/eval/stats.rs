use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge added to every fitted covariance diagonal.
pub const COV_REG: f64 = 1e-8;

/// Sufficient statistics of a feature set for the Fréchet distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Sample mean and unbiased covariance, symmetrized and regularized by
/// +`COV_REG`·I so downstream square roots stay defined.
pub fn fit_stats(features: &[Vec<f64>]) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let d = features[0].len();
    for f in features {
        if f.len() != d {
            return Err(Error::DimMismatch { a: d, b: f.len() });
        }
    }
    let mut mean = DVector::zeros(d);
    for f in features {
        for i in 0..d {
            mean[i] += f[i];
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for f in features {
        let x = DVector::from_row_slice(f) - &mean;
        cov += &x * x.transpose();
    }
    cov /= (n - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5 + DMatrix::identity(d, d) * COV_REG;
    Ok(GaussianStats { mean, cov })
}

/// Square root of a symmetric PSD matrix by eigendecomposition, clipping
/// negative eigenvalues introduced by round-off.
fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians:
/// ‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2·(Σ_a Σ_b)^{1/2}).
///
/// The cross term uses the symmetric sandwich A = Σ_a^{1/2}: the eigenvalues
/// of A Σ_b A match those of Σ_a Σ_b, so Tr((Σ_a Σ_b)^{1/2}) = Tr((A Σ_b A)^{1/2})
/// with only symmetric eigenproblems involved. Round-off can leave a tiny
/// negative total; anything in [−1e-6, 0) is clamped to 0.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::DimMismatch {
            a: a.mean.len(),
            b: b.mean.len(),
        });
    }
    let dmu = &a.mean - &b.mean;
    let root_a = sqrtm_psd(&a.cov);
    let sandwich = &root_a * &b.cov * &root_a;
    let cross = sqrtm_psd(&sandwich).trace();
    let v = dmu.norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    if v < 0.0 && v >= -1e-6 {
        Ok(0.0)
    } else {
        Ok(v)
    }
}

/// Brute-force cross-check: eigenvalues of the (non-symmetric) product
/// Σ_a Σ_b taken directly, square-rooted and summed. Slower and less robust
/// than [`fid`]; used by the test-suite as an independent oracle.
pub fn fid_reference(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::DimMismatch {
            a: a.mean.len(),
            b: b.mean.len(),
        });
    }
    let dmu = &a.mean - &b.mean;
    let product = &a.cov * &b.cov;
    let eigs = product.complex_eigenvalues();
    let cross: f64 = eigs.iter().map(|l| l.re.max(0.0).sqrt()).sum();
    Ok(dmu.norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * cross)
}

/// Mean Euclidean distance over all unordered pairs.
pub fn diversity(features: &[Vec<f64>]) -> Result<f64> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let d = features[0].len();
    let mut total = 0.0;
    for i in 0..n {
        if features[i].len() != d {
            return Err(Error::DimMismatch {
                a: d,
                b: features[i].len(),
            });
        }
        for j in i + 1..n {
            let s: f64 = features[i]
                .iter()
                .zip(&features[j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            total += s.sqrt();
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn stats(mean: &[f64], cov: DMatrix<f64>) -> GaussianStats {
        GaussianStats {
            mean: DVector::from_row_slice(mean),
            cov,
        }
    }

    #[test]
    fn identical_points_have_zero_covariance_before_ridge() {
        let s = fit_stats(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(s.mean, DVector::from_row_slice(&[1.0, 2.0]));
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { COV_REG } else { 0.0 };
                assert_eq!(s.cov[(i, j)], expect);
            }
        }
    }

    #[test]
    fn standard_normal_fit_recovers_moments() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let d = 5;
        let feats: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let s = fit_stats(&feats).unwrap();
        for i in 0..d {
            assert!(s.mean[i].abs() < 0.05, "mean[{i}] = {}", s.mean[i]);
            assert!(
                s.cov[(i, i)] > 0.9 && s.cov[(i, i)] < 1.1,
                "cov[{i},{i}] = {}",
                s.cov[(i, i)]
            );
        }
    }

    #[test]
    fn covariance_is_symmetric_to_machine_precision() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let feats: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..7).map(|_| rng.random::<f64>() * 3.0).collect())
            .collect();
        let s = fit_stats(&feats).unwrap();
        assert_eq!(s.cov, s.cov.transpose());
    }

    #[test]
    fn fid_of_identical_stats_is_zero() {
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 0.5]));
        let a = stats(&[0.3, -0.2, 1.0], c.clone());
        assert_eq!(fid(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn unit_mean_shift_with_identity_covariance_is_one() {
        let d = 6;
        let a = stats(&vec![0.0; d], DMatrix::identity(d, d));
        let mut mu = vec![0.0; d];
        mu[2] = 1.0;
        let b = stats(&mu, DMatrix::identity(d, d));
        assert!((fid(&a, &b).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scaled_identity_covariances_give_dimension() {
        let d = 9;
        let a = stats(&vec![0.0; d], DMatrix::identity(d, d));
        let b = stats(&vec![0.0; d], DMatrix::identity(d, d) * 4.0);
        // d·(1 + 4 − 2·2) = d
        assert!((fid(&a, &b).unwrap() - d as f64).abs() < 1e-9);
    }

    fn random_psd(d: usize, rng: &mut rand_chacha::ChaCha12Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        &m * m.transpose() + DMatrix::identity(d, d) * 0.05
    }

    #[test]
    fn fid_is_symmetric_and_matches_reference() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for d in [3, 17, 72] {
            let a = GaussianStats {
                mean: DVector::from_fn(d, |_, _| rng.random::<f64>()),
                cov: random_psd(d, &mut rng),
            };
            let b = GaussianStats {
                mean: DVector::from_fn(d, |_, _| rng.random::<f64>()),
                cov: random_psd(d, &mut rng),
            };
            let ab = fid(&a, &b).unwrap();
            let ba = fid(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-9, "d={d}: {ab} vs {ba}");
            let naive = fid_reference(&a, &b).unwrap();
            assert!((ab - naive).abs() < 1e-6, "d={d}: {ab} vs naive {naive}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = stats(&[0.0; 3], DMatrix::identity(3, 3));
        let b = stats(&[0.0; 4], DMatrix::identity(4, 4));
        assert!(matches!(fid(&a, &b), Err(Error::DimMismatch { a: 3, b: 4 })));
    }

    #[test]
    fn diversity_basics() {
        assert_eq!(
            diversity(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            0.0
        );
        let two = diversity(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(two, 5.0);
        let set = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        let mut perm = set.clone();
        perm.rotate_left(1);
        // Permutation changes only the f64 accumulation order.
        let d1 = diversity(&set).unwrap();
        let d2 = diversity(&perm).unwrap();
        assert!((d1 - d2).abs() < 1e-12 * d1.abs());
        assert!(matches!(
            diversity(&set[..1]),
            Err(Error::TooFewSamples { need: 2, got: 1 })
        ));
    }
}
