use nelson_fk::levy::{sample_path_seeded, small_jump_bias_bound, PathSeed};
use nelson_fk::mc::{map_paths, McConfig};
use nelson_fk::stats::RealStats;
use nelson_fk::{Cutoff, ModelParams};

fn params(m_p: f64) -> ModelParams {
    ModelParams::free_field(m_p, 1.0, Cutoff::Finite(1.0)).unwrap()
}

#[test]
fn endpoint_characteristic_function() {
    let p = params(1.0);
    let (t, eps, n) = (1.0, 1e-3, 20_000);
    let ends = map_paths(&McConfig::new(n, 5, eps), t, &p, |path| Ok(path.endpoint())).unwrap();
    for r in [0.5, 1.0, 2.0, 4.0] {
        for th in [0.0, 1.0] {
            let xi = [r * f64::cos(th), r * f64::sin(th)];
            let re: Vec<f64> = ends.iter().map(|x| (xi[0] * x[0] + xi[1] * x[1]).cos()).collect();
            let im: Vec<f64> = ends.iter().map(|x| (xi[0] * x[0] + xi[1] * x[1]).sin()).collect();
            let (sr, si) = (RealStats::from_samples(&re), RealStats::from_samples(&im));
            let exact = (-t * p.psi(xi)).exp();
            let tol = small_jump_bias_bound(&p, xi, t, eps);
            assert!((sr.mean - exact).abs() <= 3.0 * sr.std_err + tol, "ξ={xi:?}: {} vs {exact}", sr.mean);
            assert!(si.mean.abs() <= 3.0 * si.std_err + tol);
        }
    }
}

#[test]
fn jump_counts_are_poisson() {
    for (m_p, eps) in [(1.0, 1e-2), (0.0, 1e-2), (2.0, 0.05)] {
        let p = params(m_p);
        let t = 0.7;
        let counts = map_paths(&McConfig::new(4000, 9, eps), t, &p, |path| Ok(path.events().len() as f64)).unwrap();
        let s = RealStats::from_samples(&counts);
        let mean = p.large_jump_rate(eps) * t;
        assert!((s.mean - mean).abs() <= 4.0 * s.std_err, "{} vs {mean}", s.mean);
        // Poisson: variance equals the mean
        let var = s.std_err * s.std_err * s.n as f64;
        assert!((var / mean - 1.0).abs() < 0.1);
    }
}

#[test]
fn jump_sizes_respect_truncation() {
    let p = params(1.0);
    let path = sample_path_seeded(2.0, 0.05, &p, PathSeed { seed: 1, index: 3 }).unwrap();
    assert!(!path.events().is_empty());
    for e in path.events() {
        assert!(e.jump[0].hypot(e.jump[1]) >= 0.05 * (1.0 - 1e-12));
        assert!(e.time > 0.0 && e.time <= 2.0);
    }
}

#[test]
fn paths_do_not_depend_on_worker_count() {
    let p = params(1.0);
    let cfg = McConfig::new(300, 17, 1e-2);
    let seq = map_paths(&cfg.sequential(), 1.0, &p, |path| Ok(path.clone())).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let par = pool.install(|| map_paths(&cfg, 1.0, &p, |path| Ok(path.clone())).unwrap());
    assert_eq!(seq, par);
    let mut a = Vec::new();
    let mut b = Vec::new();
    seq[5].write_csv(&mut a).unwrap();
    par[5].write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}
