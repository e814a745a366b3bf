//! Monte Carlo checks of the generators against known moments.

use serconv::oracle::truncated_exp_mean;
use serconv::rng::{IndexRng, StreamTag};
use serconv::series::{truncated_normal_draw, SummandSource};
use serconv::{Family, ParamSchedule, SeriesSpec, SeriesStream};

fn draw(family: Family, seed: u64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    SeriesStream::new(SeriesSpec::new(family, seed))
        .fill_block(&mut v)
        .unwrap();
    v
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() as f64 - 1.0);
    cov / (sa * sb)
}

#[test]
fn hierarchical_exponential_mean_is_psi() {
    // psi_i = 1 for every i, so E X_i = 1 and Var X_i = 3.
    let v = draw(
        Family::HierExponential {
            psi: ParamSchedule::PowerLaw(0.0),
        },
        3,
        1_000_000,
    );
    let (m, sd) = mean_sd(&v);
    let se = sd / (v.len() as f64).sqrt();
    assert!((m - 1.0).abs() < 4.0 * se, "mean {m}, se {se}");
    assert!((sd * sd - 3.0).abs() < 0.1, "var {}", sd * sd);
}

#[test]
fn random_dirichlet_signs_are_fair() {
    let v = draw(Family::RandomDirichlet { p: 1.0 }, 11, 1_000_000);
    let plus = v.iter().filter(|&&x| x > 0.0).count() as f64 / v.len() as f64;
    assert!((plus - 0.5).abs() < 4.0 * 0.0005, "{plus}");
    assert!(v
        .iter()
        .enumerate()
        .all(|(k, x)| (x.abs() - 1.0 / (k as f64 + 1.0)).abs() < 1e-15));
}

#[test]
fn shared_xi_correlates_squared_summands() {
    let normal = |dep: bool| {
        let phi2 = ParamSchedule::Geometric(1e6);
        let vartheta = ParamSchedule::PowerLaw(0.0);
        if dep {
            Family::DepNormal { phi2, vartheta }
        } else {
            Family::HierNormal { phi2, vartheta }
        }
    };
    let pairs = |dep: bool| -> (Vec<f64>, Vec<f64>) {
        (0..100_000u64)
            .map(|seed| {
                let v = draw(normal(dep), seed, 2);
                ((v[0] * v[0]).ln(), (v[1] * v[1]).ln())
            })
            .unzip()
    };
    let (a, b) = pairs(true);
    let r_dep = correlation(&a, &b);
    let (a, b) = pairs(false);
    let r_ind = correlation(&a, &b);
    // Cov(ln X1^2, ln X2^2) = Var(ln xi) = 1 against a total variance near 7.6.
    assert!(r_dep > 0.1, "dependent {r_dep}");
    assert!(r_ind.abs() < 0.02, "independent {r_ind}");
}

fn truncated_sample(lo: f64, hi: f64, n: u64) -> Vec<f64> {
    (0..n)
        .map(|i| truncated_normal_draw(lo, hi, &mut IndexRng::new(99, StreamTag::Data, i)).unwrap())
        .collect()
}

#[test]
fn half_normal_mean() {
    let v = truncated_sample(0.0, f64::INFINITY, 1_000_000);
    let (m, sd) = mean_sd(&v);
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    assert!((m - expected).abs() < 4.0 * sd / 1000.0, "{m}");
}

#[test]
fn narrow_truncation_stays_in_range() {
    let v = truncated_sample(0.001, 1.001, 200_000);
    assert!(v.iter().all(|x| (0.001..=1.001).contains(x)));
    // Density decreasing on the interval: mean below the midpoint.
    let (m, _) = mean_sd(&v);
    assert!(m < 0.501 && m > 0.4, "{m}");
}

#[test]
fn wide_truncation_is_nearly_standard() {
    let v = truncated_sample(-50.0, 50.0, 1_000_000);
    let (m, sd) = mean_sd(&v);
    assert!(m.abs() < 0.004, "{m}");
    assert!((sd - 1.0).abs() < 0.005, "{sd}");
}

#[test]
fn truncated_exp_mean_matches_simulation() {
    let (psi, r) = (2.0, 1.0);
    let v: Vec<f64> = (0..1_000_000u64)
        .map(|i| {
            let t = IndexRng::new(7, StreamTag::Data, i).exponential(psi);
            if t < r {
                t
            } else {
                0.0
            }
        })
        .collect();
    let (m, sd) = mean_sd(&v);
    let exact = truncated_exp_mean(psi, r).unwrap();
    assert!(
        (m - exact).abs() < 3.0 * sd / 1000.0,
        "simulated {m}, exact {exact}"
    );
}

#[test]
fn million_summands_reproducible() {
    let family = Family::StateSpaceExp {
        psi: ParamSchedule::PowerLaw(1.5),
        eps_prime: 0.001,
    };
    let a = draw(family, 42, 1_000_000);
    let b = draw(family, 42, 1_000_000);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, draw(family, 43, 1_000_000));
    assert!(a.iter().all(|&x| x > 0.0 && x.is_finite()));
}
