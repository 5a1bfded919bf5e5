//! Coherent-state algebra for the Feynman–Kac integrands.
//!
//! Per path, `W_{Λ,t}(0)` maps exponential vectors to multiples of
//! exponential vectors:
//!
//! ```text
//! W_{Λ,t}(0) ε(f) = exp(u_{Λ,t} − ⟨U⁻_{Λ,t}|f⟩) ε(e^{-tω} f − U⁺_{Λ,t})
//! ```
//!
//! so every operator here is a pair (log-amplitude, label) and nothing is
//! expanded in a boson-number basis.

use std::sync::Arc;

use num_complex::Complex64;

use crate::action::{ActionForm, ActionKernel, PathFunctionals};
use crate::error::{invalid, Result};
use crate::grid::{FieldVector, GridSpec};
use crate::levy::LevyPath;
use crate::model::{dot, ModelParams, Vec2};

/// `𝒮(z) = Σ_n (n!)^{-1/2} (2z)^n`, summed until the tail bound drops
/// below `1e-13` (relative once the sum exceeds one).
pub fn script_s(z: f64) -> f64 {
    assert!(z >= 0.0, "script_s needs z >= 0");
    let x = 2.0 * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0u64;
    loop {
        n += 1;
        term *= x / (n as f64).sqrt();
        sum += term;
        // later ratios are at most q = x/√(n+1)
        let q = x / ((n + 1) as f64).sqrt();
        if q < 1.0 {
            let tail = term * q / (1.0 - q);
            if tail < 1e-13 * sum.max(1.0) {
                return sum;
            }
        }
        if !sum.is_finite() {
            return sum;
        }
    }
}

/// Label of the exponential vector `ε(f)`; the zero label is the vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentLabel(pub FieldVector);

impl CoherentLabel {
    pub fn vacuum(grid: &Arc<GridSpec>) -> Self {
        Self(FieldVector::zeros(grid))
    }

    pub fn new(f: FieldVector) -> Self {
        Self(f)
    }

    pub fn field(&self) -> &FieldVector {
        &self.0
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_zero()
    }

    /// `log ⟨ε(self)|ε(other)⟩ = ⟨self|other⟩`.
    pub fn log_pairing(&self, other: &Self) -> Result<Complex64> {
        self.0.inner(&other.0)
    }

    /// Multiplication by `e_x`, i.e. `Γ(e_x) ε(f) = ε(e_x f)`.
    pub fn translate(&self, x: Vec2) -> Self {
        Self(self.0.apply_phase(x))
    }
}

/// `W ε(f) = e^{scalar} ε(out_label)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneWRep {
    pub scalar: Complex64,
    pub out_label: CoherentLabel,
}

impl RankOneWRep {
    pub fn identity(f: &CoherentLabel) -> Self {
        Self {
            scalar: Complex64::new(0.0, 0.0),
            out_label: f.clone(),
        }
    }

    /// `log ⟨ε(g)| W ε(f)⟩`.
    pub fn log_element(&self, g: &CoherentLabel) -> Result<Complex64> {
        Ok(self.scalar + g.log_pairing(&self.out_label)?)
    }

    pub fn element(&self, g: &CoherentLabel) -> Result<Complex64> {
        Ok(self.log_element(g)?.exp())
    }
}

/// Per-path functionals with the action in the form valid for every cutoff.
pub fn path_functionals(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
) -> Result<PathFunctionals> {
    ActionKernel::for_params(grid, params).functionals(path, t, ActionForm::Renormalized)
}

/// `W_{Λ,t}(x) ε(f)` from precomputed functionals.
pub fn w_from_functionals(
    fun: &PathFunctionals,
    params: &ModelParams,
    x: Vec2,
    f: &CoherentLabel,
) -> Result<RankOneWRep> {
    if fun.t == 0.0 {
        return Ok(RankOneWRep::identity(f));
    }
    let shifted = f.0.apply_phase([-x[0], -x[1]]);
    let scalar = Complex64::new(fun.action.value, 0.0) - fun.u_minus.inner(&shifted)?;
    let label = shifted.apply_heat(fun.t, params)?.sub(&fun.u_plus)?.apply_phase(x);
    Ok(RankOneWRep {
        scalar,
        out_label: CoherentLabel(label),
    })
}

/// `W_{Λ,t}(x) ε(f)` for one path.
pub fn w_on_coherent(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    x: Vec2,
    f: &CoherentLabel,
) -> Result<RankOneWRep> {
    if t < 0.0 {
        return Err(invalid("t", "negative time"));
    }
    if t == 0.0 {
        return Ok(RankOneWRep::identity(f));
    }
    let fun = path_functionals(path, t, params, grid)?;
    w_from_functionals(&fun, params, x, f)
}

/// `Ŵ_{Λ,t}(ξ) ε(f) = e^{-iξ·X_t} Γ(e_{-X_t}) W_{Λ,t}(0) ε(f)`.
pub fn fiber_w_from_functionals(
    fun: &PathFunctionals,
    params: &ModelParams,
    x_t: Vec2,
    xi: Vec2,
    f: &CoherentLabel,
) -> Result<RankOneWRep> {
    let w = w_from_functionals(fun, params, [0.0, 0.0], f)?;
    if fun.t == 0.0 {
        return Ok(w);
    }
    Ok(RankOneWRep {
        scalar: w.scalar - Complex64::new(0.0, dot(xi, x_t)),
        out_label: w.out_label.translate([-x_t[0], -x_t[1]]),
    })
}

/// `⟨ε(g)|Ŵ_{Λ,t}(ξ) ε(f)⟩` for one path.
pub fn fiber_w_element(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    xi: Vec2,
    f: &CoherentLabel,
    g: &CoherentLabel,
) -> Result<Complex64> {
    if t < 0.0 {
        return Err(invalid("t", "negative time"));
    }
    if t == 0.0 {
        return RankOneWRep::identity(f).element(g);
    }
    let fun = path_functionals(path, t, params, grid)?;
    fiber_w_from_functionals(&fun, params, path.position(t), xi, f)?.element(g)
}

fn fiber_rep(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    xi: Vec2,
    f: &CoherentLabel,
) -> Result<RankOneWRep> {
    if t == 0.0 {
        return Ok(RankOneWRep::identity(f));
    }
    let fun = path_functionals(path, t, params, grid)?;
    fiber_w_from_functionals(&fun, params, path.position(t), xi, f)
}

/// Compares `Ŵ_t(ξ)ε(f)` with `Ŵ_{s,t}(ξ)Ŵ_s(ξ)ε(f)`, the left factor built on
/// the restarted path `r ↦ X_{s+r} − X_s`. Returns the largest relative
/// discrepancy `|1 − e^{Δ}|` of the pairings against `probes`.
#[allow(clippy::too_many_arguments)]
pub fn flow_check(
    path: &LevyPath,
    s: f64,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    xi: Vec2,
    f: &CoherentLabel,
    probes: &[CoherentLabel],
) -> Result<f64> {
    if !(0.0 <= s && s <= t && t <= path.horizon()) {
        return Err(invalid("s, t", format!("need 0 <= s <= t <= horizon, got s={s}, t={t}")));
    }
    let direct = fiber_rep(path, t, params, grid, xi, f)?;
    let first = fiber_rep(path, s, params, grid, xi, f)?;
    let composed = if s == t {
        first
    } else {
        let rest = path.restart(s)?;
        let second = fiber_rep(&rest, t - s, params, grid, xi, &first.out_label)?;
        RankOneWRep {
            scalar: first.scalar + second.scalar,
            out_label: second.out_label,
        }
    };
    let mut worst = 0.0f64;
    for g in probes {
        let d = composed.log_element(g)? - direct.log_element(g)?;
        worst = worst.max((Complex64::new(1.0, 0.0) - d.exp()).norm());
    }
    Ok(worst)
}

/// `‖h‖_t² = ‖h‖² + ‖(tω)^{-1/2} h‖²`, the norm entering the bounds on `F_t`.
pub fn time_norm(h: &FieldVector, t: f64, params: &ModelParams) -> f64 {
    h.time_norm(t, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::levy::{sample_path_seeded, PathSeed};
    use crate::model::Cutoff;
    use approx::assert_relative_eq;

    fn setup(g: f64) -> (ModelParams, Arc<GridSpec>) {
        let p = ModelParams::free_field(1.0, 1.0, Cutoff::Finite(2.0))
            .unwrap()
            .with_coupling(g);
        let cfg = GridConfig {
            radial: 32,
            angular: 16,
            ..GridConfig::default()
        };
        let grid = GridSpec::for_cutoffs(&cfg, &p, &[p.lambda], 0.0).unwrap();
        (p, grid)
    }

    fn path(i: u64) -> LevyPath {
        let (p, _) = setup(1.0);
        sample_path_seeded(1.0, 0.05, &p, PathSeed { seed: 9, index: i }).unwrap()
    }

    fn label(grid: &Arc<GridSpec>, a: f64, shift: f64) -> CoherentLabel {
        CoherentLabel::new(FieldVector::from_fn(grid, |k| {
            Complex64::new(a * (-(k[0] - shift).powi(2) - k[1] * k[1]).exp(), 0.3 * a * k[1])
        }))
    }

    #[test]
    fn script_s_values() {
        assert_eq!(script_s(0.0), 1.0);
        // Σ (n!)^{-1/2}, 30-digit partial-sum oracle
        assert_relative_eq!(script_s(0.5), 3.469_506_314_521_047_6, max_relative = 1e-12);
        assert_relative_eq!(script_s(1.0), 22.858_619_788_663_695, max_relative = 1e-12);
        let mut prev = 0.0;
        for i in 0..50 {
            let v = script_s(i as f64 * 0.1);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn free_field_acts_by_heat_semigroup() {
        let (p, grid) = setup(0.0);
        let f = label(&grid, 0.5, 0.2);
        let w = w_on_coherent(&path(1), 0.7, &p, &grid, [0.4, -1.1], &f).unwrap();
        assert_eq!(w.scalar, Complex64::new(0.0, 0.0));
        let expect = f.0.apply_heat(0.7, &p).unwrap();
        let diff = w.out_label.0.sub(&expect).unwrap().norm();
        assert!(diff < 1e-14 * (1.0 + expect.norm()));
    }

    #[test]
    fn time_zero_is_identity() {
        let (p, grid) = setup(1.0);
        let f = label(&grid, 0.5, 0.0);
        let w = w_on_coherent(&path(0), 0.0, &p, &grid, [1.0, 1.0], &f).unwrap();
        assert_eq!(w, RankOneWRep::identity(&f));
    }

    #[test]
    fn vacuum_diagonal_is_action_exponential() {
        let (p, grid) = setup(1.0);
        let vac = CoherentLabel::vacuum(&grid);
        let pa = path(2);
        let u = path_functionals(&pa, 1.0, &p, &grid).unwrap().action.value;
        for x in [[0.0, 0.0], [1.5, -0.3], [-4.0, 2.0]] {
            let w = w_on_coherent(&pa, 1.0, &p, &grid, x, &vac).unwrap();
            assert!((w.element(&vac).unwrap() - Complex64::new(u.exp(), 0.0)).norm() < 1e-14);
        }
        let e = fiber_w_element(&pa, 1.0, &p, &grid, [0.0, 0.0], &vac, &vac).unwrap();
        assert!(e.re > 0.0 && e.im.abs() < 1e-15);
        assert_relative_eq!(e.re, u.exp(), max_relative = 1e-14);
        // modulus is ξ-independent
        for xi in [[1.0, 0.0], [0.3, 2.2]] {
            let ex = fiber_w_element(&pa, 1.0, &p, &grid, xi, &vac, &vac).unwrap();
            assert_relative_eq!(ex.norm(), e.re, max_relative = 1e-14);
        }
    }

    #[test]
    fn free_vacuum_element_is_plane_wave() {
        let (p, grid) = setup(0.0);
        let vac = CoherentLabel::vacuum(&grid);
        let pa = path(3);
        let xi = [0.7, -0.2];
        let e = fiber_w_element(&pa, 1.0, &p, &grid, xi, &vac, &vac).unwrap();
        let x = pa.position(1.0);
        let expect = Complex64::new(0.0, -dot(xi, x)).exp();
        assert!((e - expect).norm() < 1e-15);
    }

    #[test]
    fn element_norm_bound() {
        let (p, grid) = setup(1.0);
        let f = label(&grid, 0.8, 0.3);
        let g = label(&grid, 0.6, -0.5);
        for i in 0..10 {
            let pa = path(i);
            let fun = path_functionals(&pa, 1.0, &p, &grid).unwrap();
            let e = fiber_w_element(&pa, 1.0, &p, &grid, [0.5, 0.5], &f, &g).unwrap();
            let heat = f.0.apply_heat(1.0, &p).unwrap().norm();
            let bound = (fun.action.value
                + g.0.norm() * (heat + fun.u_plus.norm())
                + fun.u_minus.norm() * f.0.norm())
            .exp();
            assert!(e.norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn phase_covariance() {
        let (p, grid) = setup(1.0);
        let f = label(&grid, 0.5, 0.1);
        let g = label(&grid, 0.4, -0.2);
        let pa = path(4);
        let y = [0.9, -0.4];
        let fun = path_functionals(&pa, 1.0, &p, &grid).unwrap();
        // W_t(y) = Γ(e_y) W_t(0) Γ(e_{-y}): pairings of e_y f against e_y g coincide
        let shifted = w_from_functionals(&fun, &p, y, &f.translate(y)).unwrap();
        let plain = w_from_functionals(&fun, &p, [0.0, 0.0], &f).unwrap();
        let a = shifted.log_element(&g.translate(y)).unwrap();
        let b = plain.log_element(&g).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn flow_law_on_random_paths() {
        let (p, grid) = setup(1.0);
        let f = label(&grid, 0.5, 0.2);
        let probes = vec![
            CoherentLabel::vacuum(&grid),
            label(&grid, 0.3, -0.4),
            label(&grid, 0.7, 0.0),
        ];
        for i in 0..10 {
            let pa = path(i);
            for s in [0.0, 0.3, 0.5, 1.0] {
                let r = flow_check(&pa, s, 1.0, &p, &grid, [0.2, 0.6], &f, &probes).unwrap();
                assert!(r < 1e-10, "path {i}, s={s}: {r}");
            }
        }
        assert!(flow_check(&path(0), 0.6, 0.5, &p, &grid, [0.0; 2], &f, &probes).is_err());
    }

    #[test]
    fn free_flow_is_exact() {
        let (p, grid) = setup(0.0);
        let f = label(&grid, 0.5, 0.2);
        let probes = vec![label(&grid, 0.3, -0.4)];
        let r = flow_check(&path(5), 0.4, 1.0, &p, &grid, [1.0, 0.0], &f, &probes).unwrap();
        assert!(r < 1e-14);
    }
}
