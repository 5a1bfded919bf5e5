use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use nelson_fk::action::u_pm;
use nelson_fk::fock::{fiber_w_element, path_functionals, time_norm, CoherentLabel};
use nelson_fk::grid::{FieldVector, GridConfig, GridSpec};
use nelson_fk::levy::{sample_path_seeded, small_jump_bias_bound, PathSeed};
use nelson_fk::mc::{analytic_fiber, fiber_semigroup, map_paths, McConfig};
use nelson_fk::oracle::{build_fiber, mc_vs_oracle, OracleConfig, TruncatedFock};
use nelson_fk::stats::RealStats;
use nelson_fk::{Cutoff, ModelParams};

fn grid(radial: usize, angular: usize, r_max: f64, cutoffs: &[f64]) -> Arc<GridSpec> {
    let cfg = GridConfig {
        radial,
        angular,
        r_max: Some(r_max),
        ..GridConfig::default()
    };
    Arc::new(GridSpec::new(&cfg, r_max, cutoffs).unwrap())
}

#[test]
fn free_vacuum_element_is_characteristic_function() {
    let p = ModelParams::free_field(1.0, 1.0, Cutoff::Finite(1.0)).unwrap();
    let g = grid(8, 8, 1.0, &[1.0]);
    let om = CoherentLabel::vacuum(&g);
    let xi = [1.0, 0.0];
    let est = fiber_semigroup(xi, 1.0, &p, &g, &om, &om, &McConfig::new(20_000, 3, 1e-3)).unwrap();
    let exact = (-p.psi(xi)).exp();
    assert!((exact - 0.6609).abs() < 1e-4);
    let tol = 3.0 * est.std_err + small_jump_bias_bound(&p, xi, 1.0, 1e-3);
    assert!((est.mean() - exact).norm() <= tol, "{} vs {exact}", est.mean());
}

#[test]
fn analytic_continuation_of_free_element() {
    let p = ModelParams::free_field(1.0, 1.0, Cutoff::Finite(1.0)).unwrap();
    let g = grid(8, 8, 1.0, &[1.0]);
    let om = CoherentLabel::vacuum(&g);
    let zeta = [Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0)];
    let r = analytic_fiber(zeta, 1.0, &p, &g, &om, &om, &McConfig::new(20_000, 4, 1e-3)).unwrap();
    let exact = (-p.psi_complex(zeta)).exp();
    assert!((exact.re - 1.1434).abs() < 1e-4 && exact.im.abs() < 1e-14);
    assert!((r.estimate.mean() - exact).norm() <= 3.0 * r.estimate.std_err + 1e-3);
    assert!(r.weight_moment.mean.is_finite());
    let outside = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)];
    assert!(analytic_fiber(outside, 1.0, &p, &g, &om, &om, &McConfig::new(10, 4, 1e-3)).is_err());
}

#[test]
fn hermitian_in_expectation() {
    let p = ModelParams::new(1.0, 1.0, 0.4, Cutoff::Finite(2.0)).unwrap();
    let g = grid(16, 16, 2.0, &[2.0]);
    let f = CoherentLabel::new(FieldVector::from_fn(&g, |k| Complex64::new(0.3 * (-k[0] * k[0]).exp(), 0.1 * k[1])));
    let h = CoherentLabel::new(FieldVector::from_fn(&g, |k| Complex64::new(0.2, -0.1 * k[0]) * (-(k[1] - 0.5).powi(2)).exp()));
    let cfg = McConfig::new(20_000, 8, 1e-2);
    let xi = [0.5, -0.3];
    let a = fiber_semigroup(xi, 1.0, &p, &g, &f, &h, &cfg).unwrap();
    let b = fiber_semigroup(xi, 1.0, &p, &g, &h, &f, &cfg).unwrap();
    assert!((a.mean() - b.mean().conj()).norm() <= 3.0 * (a.std_err + b.std_err));
}

#[test]
fn vacuum_diagonal_bounds() {
    let p = ModelParams::new(1.0, 1.0, 0.5, Cutoff::Finite(2.0)).unwrap();
    let g = grid(16, 16, 2.0, &[2.0]);
    let om = CoherentLabel::vacuum(&g);
    let cfg = McConfig::new(5000, 12, 1e-2);
    let eu = map_paths(&cfg, 1.0, &p, |path| Ok(path_functionals(path, 1.0, &p, &g)?.action.value.exp())).unwrap();
    let eu = RealStats::from_samples(&eu);
    for xi in [[0.0, 0.0], [0.5, 0.0], [1.0, 1.0], [3.0, -2.0]] {
        let est = fiber_semigroup(xi, 1.0, &p, &g, &om, &om, &cfg).unwrap();
        assert!(est.mean().norm() <= eu.mean + 1e-12);
        if xi == [0.0, 0.0] {
            assert!(est.mean_re > 0.0);
            assert!(est.mean_im.abs() <= 3.0 * est.std_err);
        }
    }
}

#[test]
fn high_momentum_tail_bound() {
    // ‖χ_{|k|>σ} U⁺_t‖²_{t/2} ≤ 6πg²(σ² + m_b²)^{-1/2}
    let p = ModelParams::new(1.0, 1.0, 0.8, Cutoff::Infinite).unwrap();
    let g = grid(48, 32, 64.0, &[1.0, 2.0, 4.0]);
    let t = 1.0;
    for i in 0..50 {
        let path = sample_path_seeded(t, 1e-2, &p, PathSeed { seed: 21, index: i }).unwrap();
        let (up, _) = u_pm(&path, t, &p, &g).unwrap();
        for sigma in [1.0, 2.0, 4.0] {
            let tail = up.sub(&up.cutoff_mask(Cutoff::Finite(sigma))).unwrap();
            let lhs = time_norm(&tail, t / 2.0, &p).powi(2);
            let bound = 6.0 * PI * p.g * p.g / (sigma * sigma + p.m_b * p.m_b).sqrt();
            assert!(lhs <= bound * (1.0 + g.tol()), "σ={sigma}: {lhs} > {bound}");
        }
    }
}

#[test]
fn long_time_decay_matches_oracle_ground_energy() {
    let p = ModelParams::new(1.0, 1.0, 0.3, Cutoff::Finite(1.0)).unwrap();
    let ocfg = OracleConfig::default();
    let tr = TruncatedFock::on_ball(1.0, 1.0, &ocfg).unwrap();
    let g = grid(16, 16, 1.0, &[1.0]);
    let cfg = McConfig::new(10_000, 31, 1e-2);

    let c = mc_vs_oracle([0.0, 0.0], 5.0, &p, &ocfg, &g, &|_| Complex64::new(0.0, 0.0), &|_| Complex64::new(0.0, 0.0), &cfg).unwrap();
    assert!(c.pass, "t=5: |diff| {} vs 3SE {} + {}", c.abs_diff, 3.0 * c.mc.std_err, c.budget.total());

    let xi = [1.0, 0.0];
    let spec = build_fiber(xi, &p, &tr, ocfg.eren_mode).unwrap().spectral().unwrap();
    let e0 = spec.ground_energy();
    let v = tr.vacuum();
    let (a, b) = (spec.expectation(15.0, &v, &v).unwrap().re, spec.expectation(20.0, &v, &v).unwrap().re);
    assert!(((a / b).ln() / 5.0 / e0 - 1.0).abs() < 1e-4);

    let om = CoherentLabel::vacuum(&g);
    let m4 = fiber_semigroup(xi, 4.0, &p, &g, &om, &om, &cfg).unwrap();
    let m5 = fiber_semigroup(xi, 5.0, &p, &g, &om, &om, &cfg).unwrap();
    let slope = (m4.mean_re / m5.mean_re).ln();
    let se = (m4.std_err / m4.mean_re).hypot(m5.std_err / m5.mean_re);
    assert!((slope - e0).abs() <= 0.02 * e0 + 3.0 * se, "slope {slope} ± {se} vs E0 {e0}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vacuum_modulus_is_momentum_independent(index in 0u64..1000, a in -4.0..4.0f64, b in -4.0..4.0f64) {
        let p = ModelParams::new(1.0, 1.0, 0.7, Cutoff::Finite(2.0)).unwrap();
        let g = grid(8, 8, 2.0, &[2.0]);
        let om = CoherentLabel::vacuum(&g);
        let path = sample_path_seeded(1.0, 0.05, &p, PathSeed { seed: 2, index }).unwrap();
        let u = path_functionals(&path, 1.0, &p, &g).unwrap().action.value;
        let w = fiber_w_element(&path, 1.0, &p, &g, [a, b], &om, &om).unwrap();
        prop_assert!((w.norm() / u.exp() - 1.0).abs() < 1e-13);
        let w0 = fiber_w_element(&path, 1.0, &p, &g, [0.0, 0.0], &om, &om).unwrap();
        prop_assert!(w0.re > 0.0 && w0.im.abs() <= 1e-14 * w0.re);
    }
}
