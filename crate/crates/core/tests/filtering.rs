use nalgebra::{Matrix2, Vector2};

use pomfg::dynamics::ControlSet;
use pomfg::filtering::{
    benes_density, benes_filter_step, benes_moments, kalman_bucy_oracle, riccati_step, BenesMode, BenesModel,
    DensityGrid, GridSpec, LinearModel, ParticleCloud, QuadraticL2, SufficientStats, ZakaiSolver,
};
use pomfg::rng::{normal, stream, NoiseKind};

fn benes(big_delta0: f64, varsigma0: f64, eta0: f64) -> BenesModel {
    BenesModel::quadratic_family(
        big_delta0,
        varsigma0,
        eta0,
        0.0,
        1.0,
        0.5,
        Matrix2::identity(),
        Matrix2::new(0.25, 0.0, 0.0, 0.25),
        Matrix2::new(0.5, 0.0, 0.0, 0.5),
        Vector2::new(0.5, 1.0),
        QuadraticL2::zero(),
        ControlSet::new(-2.0, 2.0).unwrap(),
        1.0,
        0.01,
    )
}

#[test]
fn scalar_riccati_matches_the_hyperbolic_cotangent() {
    // dP/dt = 1 − P², P(0) = 2 has P(t) = coth(t + arcoth 2).
    let e1 = Matrix2::new(1.0, 0.0, 0.0, 0.0);
    let mut p = 2.0 * e1;
    let dt = 1e-3;
    let c = 0.5 * (3.0f64).ln();
    for k in 1..=1000 {
        p = riccati_step(&p, &e1, &e1, dt).unwrap();
        let t = k as f64 * dt;
        let want = 1.0 / (t + c).tanh();
        assert!((p[(0, 0)] - want).abs() < 1e-10, "t = {t}");
        assert_eq!(p[(1, 1)], 0.0);
    }
}

#[test]
fn riccati_without_noise_stays_at_zero() {
    let w = Matrix2::new(2.0, 0.3, 0.3, 1.0);
    let mut p = Matrix2::zeros();
    for _ in 0..1000 {
        p = riccati_step(&p, &w, &Matrix2::zeros(), 1e-3).unwrap();
    }
    assert_eq!(p, Matrix2::zeros());
}

#[test]
fn flat_potential_reduces_to_two_kalman_filters() {
    // Γ ≡ 1 removes the nonlinear drift; both coordinates are then
    // independent linear-Gaussian problems.
    let model = benes(0.0, 0.0, 1.0);
    let dt = model.dt;
    let mut rng = stream(4, 0, NoiseKind::Misc);
    let mut x = Vector2::new(0.2, 1.3);
    let mut s = SufficientStats::initial(&model);
    let (mut dy1, mut dy2, mut r) = (Vec::new(), Vec::new(), vec![s.r]);
    for _ in 0..model.steps() {
        let dy = x * dt + Vector2::new(normal(&mut rng), normal(&mut rng)) * (0.25 * dt).sqrt();
        x += Vector2::new(model.g11 * normal(&mut rng), model.g22 * normal(&mut rng)) * dt.sqrt();
        s = benes_filter_step(&s, 0.0, &dy, dt, &model, BenesMode::Innovation).unwrap();
        dy1.push(dy[0]);
        dy2.push(dy[1]);
        r.push(s.r);
    }
    let kb1 = kalman_bucy_oracle(&LinearModel::new(0.0, 1.0, model.g11, 0.25), &dy1, dt, 0.5, 0.5).unwrap();
    let kb2 = kalman_bucy_oracle(&LinearModel::new(0.0, 1.0, model.g22, 0.25), &dy2, dt, 1.0, 0.5).unwrap();
    let rel = |a: &[f64], b: &[f64]| {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    };
    let r1: Vec<f64> = r.iter().map(|v| v[0]).collect();
    let r2: Vec<f64> = r.iter().map(|v| v[1]).collect();
    assert!(rel(&r1, &kb1.means) < 0.02);
    assert!(rel(&r2, &kb2.means) < 0.02);
    assert!((s.p[(0, 0)] - kb1.variances.last().unwrap()).abs() < 1e-3);
    assert!((s.p[(1, 1)] - kb2.variances.last().unwrap()).abs() < 1e-3);
}

#[test]
fn closed_form_moments_match_quadrature_of_the_density() {
    let model = benes(1.0, 0.5, 2.0);
    let mut s = SufficientStats::initial(&model);
    s.r = Vector2::new(-0.4, 0.7);
    s.p = Matrix2::new(0.6, 0.1, 0.1, 0.3);
    let n = 801;
    let (lo, hi) = (-8.0, 8.0);
    let h = (hi - lo) / (n - 1) as f64;
    let (mut m0, mut m1, mut m2, mut s1, mut s2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let a = lo + i as f64 * h;
        for j in 0..n {
            let b = lo + j as f64 * h;
            let p = benes_density(&s, &model, [a, b]).unwrap();
            m0 += p;
            m1 += p * a;
            m2 += p * b;
            s1 += p * a * a;
            s2 += p * b * b;
        }
    }
    let (mean1, mean2) = (m1 / m0, m2 / m0);
    let mo = benes_moments(&s, &model).unwrap();
    assert!((mo.mean[0] - mean1).abs() < 1e-6);
    assert!((mo.mean[1] - mean2).abs() < 1e-6);
    assert!((mo.var[0] - (s1 / m0 - mean1 * mean1)).abs() < 1e-6);
    assert!((mo.var[1] - (s2 / m0 - mean2 * mean2)).abs() < 1e-6);
}

#[test]
fn normalised_zakai_and_kushner_agree() {
    let spec = GridSpec::new(-6.0, 6.0, 241);
    let solver = ZakaiSolver::new(spec, 1.0, 1e-3, |x| x).unwrap();
    let drift: Vec<f64> = solver.interfaces().into_iter().map(|x| -0.5 * x).collect();
    let mut z = DensityGrid::gaussian(spec, 0.5, 0.4).unwrap();
    let mut k = z.clone();
    let mut rng = stream(2, 0, NoiseKind::Misc);
    for _ in 0..500 {
        let dy = 0.05 * normal(&mut rng);
        z = solver.zakai_step(&z, &drift, 0.1, dy).unwrap();
        k = solver.kushner_step(&k, &drift, 0.1, dy).unwrap();
    }
    let zn = pomfg::filtering::normalize(&z).unwrap();
    assert!(zn.l1_distance(&k).unwrap() < 1e-9);
    assert!((zn.mean() - k.mean()).abs() < 1e-9);
}

#[test]
fn particle_filter_tracks_a_nearly_deterministic_signal() {
    // Tiny signal noise and a sharp sensor: the posterior concentrates on the
    // true path within a few √dt.
    let (dt, steps, c) = (1e-3, 1000, 30.0);
    let mut rng = stream(12, 0, NoiseKind::Misc);
    let mut x = 1.0 + 0.5 * normal(&mut rng);
    let mut cloud = ParticleCloud::gaussian(2000, 1.0, 0.25, &mut stream(12, 1, NoiseKind::Filter)).unwrap();
    let mut frng = stream(12, 2, NoiseKind::Filter);
    for _ in 0..steps {
        let dy = c * x * dt + dt.sqrt() * normal(&mut rng);
        x += -0.5 * x * dt + 1e-3 * dt.sqrt() * normal(&mut rng);
        cloud.step(&mut frng, 0.0, dy, dt, 1e-3, |y| -0.5 * y, |y| c * y).unwrap();
    }
    assert!((cloud.mean() - x).abs() < 3.0 * dt.sqrt(), "{} vs {x}", cloud.mean());
}
