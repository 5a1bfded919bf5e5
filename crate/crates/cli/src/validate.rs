//! The invariant suite behind `validate`. Each check reports its measured
//! residual next to the tolerance it is held to.

use std::f64::consts::PI;

use anyhow::Result;
use num_complex::Complex64;
use serde::Serialize;

use nelson_fk::action::{ActionForm, ActionKernel};
use nelson_fk::fock::{fiber_w_element, flow_check, path_functionals, CoherentLabel};
use nelson_fk::grid::{FieldVector, GridConfig, GridSpec};
use nelson_fk::levy::{sample_path_seeded, small_jump_bias_bound, PathSeed};
use nelson_fk::mc::{fiber_semigroup, map_paths, McConfig};
use nelson_fk::model::SymbolQuad;
use nelson_fk::oracle::{build_fiber, generator_check, renormalization_scan, semigroup_residual, ErenMode, OracleConfig, TruncatedFock};
use nelson_fk::stats::{fit_slope, quantile, RealStats};
use nelson_fk::{Cutoff, ModelParams};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, residual: f64, tolerance: f64) -> Check {
    Check {
        name,
        residual,
        tolerance,
        pass: residual <= tolerance,
    }
}

fn grid(radial: usize, angular: usize, r_max: f64, cutoffs: &[f64]) -> Result<std::sync::Arc<GridSpec>> {
    let cfg = GridConfig {
        radial,
        angular,
        r_max: Some(r_max),
        ..GridConfig::default()
    };
    Ok(std::sync::Arc::new(GridSpec::new(&cfg, r_max, cutoffs)?))
}

pub fn run(cfg: &RunConfig) -> Result<Vec<Check>> {
    let m = cfg.model;
    let g = if m.g == 0.0 { 0.3 } else { m.g };
    let at = |l: f64| ModelParams::new(m.m_p, m.m_b, g, Cutoff::Finite(l));
    let seed = cfg.mc.seed;
    let mut out = Vec::new();

    // symbol reconstruction
    let q = SymbolQuad::default();
    let mut worst: f64 = 0.0;
    for m_p in [0.0, 0.5, 1.0] {
        let p = ModelParams::free_field(m_p, 1.0, Cutoff::Finite(1.0))?;
        for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let xi = [r, 0.0];
            worst = worst.max((p.symbol_from_levy(xi, &q)? - p.psi(xi)).abs() / (1.0 + p.psi(xi)));
        }
    }
    out.push(check("symbol_reconstruction", worst, 1e-5));

    // renormalization energy closed form
    let mut worst: f64 = 0.0;
    for mm in [0.5, 1.0, 2.0] {
        for l in [0.5, 1.0, 2.0, 4.0] {
            let p = ModelParams::new(mm, mm, g, Cutoff::Finite(l))?;
            let exact = PI * g * g * ((2.0 * (l * l + mm * mm).sqrt() - mm) / mm).ln();
            worst = worst.max((p.e_ren(p.lambda)? - exact).abs() / exact);
        }
    }
    out.push(check("e_ren_closed_form", worst, 1e-8));

    // β(ω+ψ) = v
    let p2 = at(2.0)?;
    let worst = (0..200)
        .map(|i| {
            let k = [0.05 * i as f64, 0.013 * i as f64];
            (p2.beta(k) * (p2.omega(k) + p2.psi(k)) - p2.coupling_v(k)).abs() / p2.coupling_v(k)
        })
        .fold(0.0, f64::max);
    out.push(check("beta_identity", worst, 1e-14));

    // ‖v_Λ‖² on the grid
    let gr = grid(32, 32, 4.0, &[1.0, 2.0, 4.0])?;
    let mut worst: f64 = 0.0;
    for l in [1.0, 2.0, 4.0] {
        let p = at(l)?;
        let v = FieldVector::coupling(&gr, &p);
        let exact = 2.0 * PI * g * g * ((l * l + m.m_b * m.m_b).sqrt() - m.m_b);
        worst = worst.max((v.norm_sqr() - exact).abs() / exact);
    }
    out.push(check("coupling_norm_quadrature", worst, gr.tol()));

    // path marginal
    let p1 = at(1.0)?;
    let eps = 1e-3;
    let ends = map_paths(&McConfig::new(4000, seed, eps), 1.0, &p1, |path| Ok(path.endpoint()))?;
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        let xs: Vec<f64> = ends.iter().map(|x| (r * x[0]).cos()).collect();
        let s = RealStats::from_samples(&xs);
        let allowed = 3.0 * s.std_err + small_jump_bias_bound(&p1, [r, 0.0], 1.0, eps);
        worst = worst.max((s.mean - (-p1.psi([r, 0.0])).exp()).abs() / allowed);
    }
    out.push(check("endpoint_characteristic_function (|err| / allowed)", worst, 1.0));

    // action identity
    let p4 = at(4.0)?;
    let kernel = ActionKernel::new(&gr, &p4, Cutoff::Finite(4.0));
    let diffs = map_paths(&McConfig::new(200, seed, 1e-2), 1.0, &p4, |path| {
        let scan = kernel.scan(path, 1.0, &[], &[])?;
        let mut d = Vec::new();
        for l in [1.0, 2.0, 4.0] {
            let a = kernel.defining_from(&scan, Cutoff::Finite(l))?;
            let b = kernel.ito_from(&scan, Cutoff::Finite(l), ActionForm::Ito);
            d.push((a.value - b.value).abs().max(b.imag_residual()));
        }
        Ok(d)
    })?;
    let diffs: Vec<f64> = diffs.into_iter().flatten().collect();
    out.push(check("action_identity_median", quantile(&diffs, 0.5), 1e-4));
    out.push(check("action_identity_p99", quantile(&diffs, 0.99), 1e-3));

    // flow law and phase independence of the vacuum modulus
    let g2 = grid(16, 16, 2.0, &[2.0])?;
    let f = CoherentLabel::new(FieldVector::from_fn(&g2, |k| Complex64::new(0.3, 0.1 * k[0])));
    let probes = [CoherentLabel::vacuum(&g2), CoherentLabel::new(FieldVector::from_fn(&g2, |k| Complex64::new(0.0, 0.2 * k[1])))];
    let om = CoherentLabel::vacuum(&g2);
    let (mut flow, mut modulus): (f64, f64) = (0.0, 0.0);
    for i in 0..100u64 {
        let t = 0.5 + 0.01 * i as f64;
        let path = sample_path_seeded(t, 1e-2, &p2, PathSeed { seed, index: i })?;
        flow = flow.max(flow_check(&path, 0.37 * t, t, &p2, &g2, [0.4, -1.1], &f, &probes)?);
        let u = path_functionals(&path, t, &p2, &g2)?.action.value;
        let w = fiber_w_element(&path, t, &p2, &g2, [1.5, 0.5], &om, &om)?;
        modulus = modulus.max((w.norm() / u.exp() - 1.0).abs());
    }
    out.push(check("flow_law", flow, 1e-8));
    out.push(check("vacuum_modulus_momentum_independent", modulus, 1e-12));

    // hermiticity in expectation
    let cfg_h = McConfig::new(2000, seed, 1e-2);
    let a = fiber_semigroup([0.3, 0.0], 1.0, &p2, &g2, &f, &probes[1], &cfg_h)?;
    let b = fiber_semigroup([0.3, 0.0], 1.0, &p2, &g2, &probes[1], &f, &cfg_h)?;
    out.push(check(
        "hermiticity (|a - conj b| / 3(SE_a+SE_b))",
        (a.mean() - b.mean().conj()).norm() / (3.0 * (a.std_err + b.std_err)),
        1.0,
    ));

    // oracle
    let ocfg = OracleConfig {
        radial: 2,
        angular: 6,
        n_max: 3,
        ..OracleConfig::default()
    };
    let tr = TruncatedFock::on_ball(1.0, m.m_b, &ocfg)?;
    let fiber = build_fiber([0.0, 0.0], &p1, &tr, ocfg.eren_mode)?;
    let sym = (&fiber.matrix - fiber.matrix.transpose()).amax();
    out.push(check("oracle_symmetric", sym, 0.0));
    let spec = fiber.spectral()?;
    out.push(check("oracle_semigroup", semigroup_residual(&spec, 1.0, 0.4), 1e-8));
    let probes_o = vec![tr.vacuum(), tr.coherent(|_| Complex64::new(0.2, 0.0))];
    let order = generator_check(&fiber, &spec, &[1e-2, 1e-3, 1e-4], &probes_o)?.order;
    out.push(check("oracle_generator_order (|order - 1|)", (order - 1.0).abs(), 0.1));

    let pt = OracleConfig {
        radial: 2,
        angular: 6,
        n_max: 4,
        eren_mode: ErenMode::Modesum,
        ..OracleConfig::default()
    };
    let gs = [0.1, 0.2, 0.4];
    let mut ly = Vec::new();
    for &gg in &gs {
        let p = ModelParams::new(m.m_p, m.m_b, gg, Cutoff::Finite(1.0))?;
        ly.push(renormalization_scan([0.0, 0.0], &p, &[1.0], &pt)?[0].e0.abs().ln());
    }
    let lx: Vec<f64> = gs.iter().map(|x: &f64| x.ln()).collect();
    out.push(check("fourth_order_exponent (|slope - 4|)", (fit_slope(&lx, &ly) - 4.0).abs(), 0.4));

    // determinism
    let small = McConfig::new(64, seed, 1e-2);
    let x = fiber_semigroup([0.5, 0.5], 1.0, &p2, &g2, &f, &f, &small.sequential())?;
    let y = fiber_semigroup([0.5, 0.5], 1.0, &p2, &g2, &f, &f, &small)?;
    let same = serde_json::to_string(&x)? == serde_json::to_string(&y)?;
    out.push(check("sequential_equals_parallel", if same { 0.0 } else { 1.0 }, 0.0));

    Ok(out)
}
