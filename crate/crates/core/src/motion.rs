//! Constant-velocity prediction, detection likelihood and posterior update.
//!
//! Likelihoods are kept in log space; the assignment costs consume them
//! directly.

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen, Vector2};

use crate::error::{Error, Result};
use crate::types::{Detection, MotionModel, TargetState};

/// Jitter added to the diagonal when a factorisation fails the first time.
pub const FACTOR_JITTER: f64 = 1e-9;
/// Tolerance for symmetry and eigenvalue checks.
pub const PSD_TOLERANCE: f64 = 1e-9;

const LOG_TWO_PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub predicted_mean: nalgebra::Vector4<f64>,
    /// `A Σ Aᵀ + Ω`.
    pub predicted_covariance: Matrix4<f64>,
    /// `C P Cᵀ + Υ`.
    pub innovation_covariance: Matrix2<f64>,
    pub predicted_position: Vector2<f64>,
}

pub(crate) fn symmetrize<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

fn min_eigenvalue<const D: usize>(m: &SMatrix<f64, D, D>) -> f64
where
    nalgebra::Const<D>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::Const<D>>
        + nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<D>, nalgebra::U1>>,
{
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn condition_number<const D: usize>(m: &SMatrix<f64, D, D>) -> f64
where
    nalgebra::Const<D>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::Const<D>>
        + nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<D>, nalgebra::U1>>,
{
    let eig = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Checks symmetry and non-negative spectrum within [`PSD_TOLERANCE`].
pub fn check_psd(what: &'static str, m: &Matrix4<f64>) -> Result<()> {
    let asym = (m - m.transpose()).abs().max();
    if asym > PSD_TOLERANCE || !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NotPositiveSemidefinite {
            what,
            min_eigenvalue: f64::NAN,
        });
    }
    let min = min_eigenvalue(m);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite {
            what,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Cholesky factor of a symmetric matrix, retried once with diagonal jitter.
fn cholesky<const D: usize>(
    what: &'static str,
    m: &SMatrix<f64, D, D>,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Const<D>>>
where
    nalgebra::Const<D>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::Const<D>>
        + nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<D>, nalgebra::U1>>,
{
    let sym = symmetrize(m);
    if let Some(c) = nalgebra::Cholesky::new(sym) {
        return Ok(c);
    }
    let jittered = sym + SMatrix::<f64, D, D>::identity() * FACTOR_JITTER;
    nalgebra::Cholesky::new(jittered).ok_or_else(|| Error::Singular {
        what,
        condition: condition_number(m),
    })
}

pub(crate) fn spd_inverse<const D: usize>(what: &'static str, m: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>>
where
    nalgebra::Const<D>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::Const<D>>
        + nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<D>, nalgebra::U1>>,
{
    Ok(symmetrize(&cholesky(what, m)?.inverse()))
}

/// Log density of `N(x; mean, cov)` in two dimensions.
pub fn gaussian_log_density(x: &Vector2<f64>, mean: &Vector2<f64>, cov: &Matrix2<f64>) -> Result<f64> {
    let chol = cholesky("innovation covariance", cov)?;
    let r = x - mean;
    let l = chol.l();
    let log_det = 2.0 * (l[(0, 0)].ln() + l[(1, 1)].ln());
    let z = chol.solve(&r);
    Ok(-LOG_TWO_PI - 0.5 * log_det - 0.5 * r.dot(&z))
}

pub fn predict(state: &TargetState, model: &MotionModel) -> Result<Prediction> {
    check_psd("state covariance", &state.covariance)?;
    let a = &model.transition;
    let predicted_mean = a * state.mean;
    let predicted_covariance = symmetrize(&(a * state.covariance * a.transpose() + model.process_noise));
    let c = &model.observation;
    let innovation_covariance = symmetrize(&(c * predicted_covariance * c.transpose() + model.observation_noise));
    Ok(Prediction {
        predicted_position: c * predicted_mean,
        predicted_mean,
        predicted_covariance,
        innovation_covariance,
    })
}

/// `log N(center; C x̂, S)` for the predicted state.
pub fn detection_log_likelihood(pred: &Prediction, detection: &Detection) -> Result<f64> {
    gaussian_log_density(&detection.center, &pred.predicted_position, &pred.innovation_covariance)
}

pub fn detection_likelihood(pred: &Prediction, detection: &Detection) -> Result<f64> {
    detection_log_likelihood(pred, detection).map(f64::exp)
}

/// Information-form posterior:
/// `Σ' = (P⁻¹ + Cᵀ Υ⁻¹ C)⁻¹`, `x' = Σ' (Cᵀ Υ⁻¹ d + P⁻¹ A x)`.
pub fn update(state: &TargetState, detection: &Detection, model: &MotionModel) -> Result<TargetState> {
    let pred = predict(state, model)?;
    update_from_prediction(state, &pred, &detection.center, model)
}

pub(crate) fn update_from_prediction(
    state: &TargetState,
    pred: &Prediction,
    measurement: &Vector2<f64>,
    model: &MotionModel,
) -> Result<TargetState> {
    let p_inv = spd_inverse("predicted covariance", &pred.predicted_covariance)?;
    let r_inv = spd_inverse("observation noise", &model.observation_noise)?;
    let c = &model.observation;
    let info = p_inv + c.transpose() * r_inv * c;
    let covariance = spd_inverse("posterior information", &info)?;
    let mean = covariance * (c.transpose() * r_inv * measurement + p_inv * pred.predicted_mean);
    Ok(TargetState {
        target_id: state.target_id,
        part_type: state.part_type,
        mean,
        covariance,
    })
}

/// Prediction-only propagation for a target assigned the fake candidate.
pub fn coast(state: &TargetState, model: &MotionModel) -> TargetState {
    let a = &model.transition;
    TargetState {
        target_id: state.target_id,
        part_type: state.part_type,
        mean: a * state.mean,
        covariance: symmetrize(&(a * state.covariance * a.transpose() + model.process_noise)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PartType;
    use nalgebra::{Matrix2x4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(mean: [f64; 4], cov: Matrix4<f64>) -> TargetState {
        TargetState {
            target_id: 7,
            part_type: PartType::Head,
            mean: Vector4::from(mean),
            covariance: cov,
        }
    }

    fn det_at(x: f64, y: f64) -> Detection {
        Detection::new(0, 1, PartType::Head, Vector2::new(x, y), (8.0, 8.0), 0.9)
    }

    /// Textbook gain-form update, written without sharing any code with
    /// the information-form path.
    fn gain_form(state: &TargetState, d: &Vector2<f64>, m: &MotionModel) -> (Vector4<f64>, Matrix4<f64>) {
        let a = m.transition;
        let c: Matrix2x4<f64> = m.observation;
        let x = a * state.mean;
        let p = a * state.covariance * a.transpose() + m.process_noise;
        let s = c * p * c.transpose() + m.observation_noise;
        let k = p * c.transpose() * s.try_inverse().unwrap();
        let mean = x + k * (d - c * x);
        let cov = (Matrix4::identity() - k * c) * p;
        (mean, cov)
    }

    /// Direct evaluation of the bivariate normal pdf from its formula.
    fn pdf2(x: &Vector2<f64>, mu: &Vector2<f64>, s: &Matrix2<f64>) -> f64 {
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
        let inv = Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]) / det;
        let r = x - mu;
        (-(0.5) * (r.transpose() * inv * r)[(0, 0)]).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    }

    fn random_psd(rng: &mut ChaCha8Rng, scale: f64) -> Matrix4<f64> {
        let b = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0) * scale);
        b * b.transpose()
    }

    #[test]
    fn predict_constant_position() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        let p = predict(&state([10.0, 0.0, 5.0, 0.0], Matrix4::identity()), &m).unwrap();
        assert_eq!(p.predicted_position, Vector2::new(10.0, 5.0));
    }

    #[test]
    fn predict_moving() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        let p = predict(&state([10.0, 2.0, 5.0, -1.0], Matrix4::identity()), &m).unwrap();
        assert_eq!(p.predicted_position, Vector2::new(12.0, 4.0));
    }

    #[test]
    fn predict_zero_covariance_gives_process_noise() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        let p = predict(&state([0.0; 4], Matrix4::zeros()), &m).unwrap();
        assert!((p.predicted_covariance[(0, 0)] - 1.0 / 6.0).abs() < 1e-15);
        assert!((p.predicted_covariance[(0, 1)] - 0.25).abs() < 1e-15);
        assert!((p.predicted_covariance[(1, 1)] - 0.5).abs() < 1e-15);
        // S = C P Cᵀ + Υ picks the position entries.
        assert!((p.innovation_covariance[(0, 0)] - (1.0 / 6.0 + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn predict_rejects_indefinite_covariance() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        let mut cov = Matrix4::identity();
        cov[(0, 0)] = -1.0;
        assert!(matches!(
            predict(&state([0.0; 4], cov), &m),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn likelihood_peak_of_standard_normal() {
        let pred = Prediction {
            predicted_mean: Vector4::new(3.0, 0.0, 4.0, 0.0),
            predicted_covariance: Matrix4::identity(),
            innovation_covariance: Matrix2::identity(),
            predicted_position: Vector2::new(3.0, 4.0),
        };
        let v = detection_likelihood(&pred, &det_at(3.0, 4.0)).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn likelihood_matches_direct_pdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        for _ in 0..200 {
            let s = state(
                [rng.random_range(0.0..100.0), 1.0, rng.random_range(0.0..100.0), -2.0],
                random_psd(&mut rng, 3.0),
            );
            let pred = predict(&s, &m).unwrap();
            let d = det_at(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
            let got = detection_likelihood(&pred, &d).unwrap();
            let want = pdf2(&d.center, &pred.predicted_position, &pred.innovation_covariance);
            assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "{got} vs {want}");
        }
    }

    #[test]
    fn likelihood_vanishes_far_away() {
        let pred = Prediction {
            predicted_mean: Vector4::zeros(),
            predicted_covariance: Matrix4::identity(),
            innovation_covariance: Matrix2::identity(),
            predicted_position: Vector2::zeros(),
        };
        let v = detection_likelihood(&pred, &det_at(40.0, 0.0)).unwrap();
        assert!(v < 1e-300);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let pred = Prediction {
            predicted_mean: Vector4::zeros(),
            predicted_covariance: Matrix4::identity(),
            innovation_covariance: Matrix2::new(1.0, 1.0, 1.0, 1.0) * -1.0,
            predicted_position: Vector2::zeros(),
        };
        assert!(matches!(
            detection_log_likelihood(&pred, &det_at(0.0, 0.0)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn likelihood_integrates_to_one() {
        let s = Matrix2::new(4.0, 1.0, 1.0, 2.0);
        let pred = Prediction {
            predicted_mean: Vector4::zeros(),
            predicted_covariance: Matrix4::identity(),
            innovation_covariance: s,
            predicted_position: Vector2::new(1.0, -1.0),
        };
        // Midpoint rule on a box of ±40σ per axis.
        let half = 40.0 * 2.0;
        let n = 800;
        let h = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = 1.0 - half + (i as f64 + 0.5) * h;
                let y = -1.0 - half + (j as f64 + 0.5) * h;
                total += detection_likelihood(&pred, &det_at(x, y)).unwrap() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn huge_observation_noise_keeps_prediction() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 1e12).unwrap();
        let s = state([10.0, 1.0, 20.0, 0.0], Matrix4::identity() * 4.0);
        let post = update(&s, &det_at(100.0, 100.0), &m).unwrap();
        assert!((post.position() - Vector2::new(11.0, 20.0)).norm() < 1e-3);
    }

    #[test]
    fn huge_prior_snaps_to_detection() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        let s = state([10.0, 1.0, 20.0, 0.0], Matrix4::identity() * 1e12);
        let post = update(&s, &det_at(100.0, 50.0), &m).unwrap();
        assert!((post.position() - Vector2::new(100.0, 50.0)).norm() < 1e-3);
        assert_eq!(post.target_id, 7);
        assert_eq!(post.part_type, PartType::Head);
    }

    #[test]
    fn information_form_matches_gain_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let m = MotionModel::constant_velocity(
                rng.random_range(0.2..2.0),
                rng.random_range(0.05..2.0),
                rng.random_range(0.5..10.0),
            )
            .unwrap();
            let s = state(
                [
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-3.0..3.0),
                ],
                random_psd(&mut rng, 3.0),
            );
            let d = Vector2::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
            let post = update(&s, &det_at(d.x, d.y), &m).unwrap();
            let (mean, cov) = gain_form(&s, &d, &m);
            assert!((post.mean - mean).abs().max() <= 1e-8);
            assert!((post.covariance - cov).abs().max() <= 1e-8);
            let pred = predict(&s, &m).unwrap();
            assert!(min_eigenvalue(&(pred.predicted_covariance - post.covariance)) >= -1e-9);
        }
    }

    #[test]
    fn coast_properties() {
        let m = MotionModel::constant_velocity(1.0, 0.5, 4.0).unwrap();
        let s = state([10.0, 0.0, 5.0, 0.0], Matrix4::identity());
        let c = coast(&s, &m);
        assert_eq!(c.position(), s.position());
        let a = m.transition;
        assert!(
            (c.covariance - (a * s.covariance * a.transpose() + m.process_noise))
                .abs()
                .max()
                < 1e-12
        );

        let twice = coast(&c, &m);
        let a2 = a * a;
        let want = a2 * s.covariance * a2.transpose() + a * m.process_noise * a.transpose() + m.process_noise;
        assert!((twice.covariance - want).abs().max() < 1e-12);
        assert!((twice.mean - a2 * s.mean).abs().max() < 1e-12);

        let moving = state([0.0, 3.0, 0.0, 0.0], Matrix4::identity());
        let c = coast(&moving, &m);
        assert_eq!(c.position().x, 3.0);
        assert_eq!(coast(&c, &m).position().x, 6.0);
    }
}
