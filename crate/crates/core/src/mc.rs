//! Monte Carlo estimators for the fiber semigroups and the full-space
//! Feynman–Kac pairing.
//!
//! Paths are drawn from counter-based streams keyed by `(seed, index)` and the
//! per-path values are collected in index order before a fixed pairwise
//! reduction, so results do not depend on the execution mode or thread count.
//! All Λ in a sweep, and both orderings of a probe pair, share the same paths.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{ActionForm, ActionKernel, PathFunctionals, Scan};
use crate::error::{invalid, Error, Result};
use crate::fock::{fiber_w_from_functionals, CoherentLabel};
use crate::grid::GridSpec;
use crate::levy::{sample_path_seeded, small_jump_bias_bound, LevyPath, PathSeed};
use crate::model::{dot, Cutoff, ModelParams, Vec2};
use crate::stats::{quantile, ComplexStats, RealStats};

/// How the per-path map is scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Small-jump truncation radius of the sampled paths.
    pub eps: f64,
    #[serde(default)]
    pub exec: Execution,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64, eps: f64) -> Self {
        Self {
            n_paths,
            seed,
            eps,
            exec: Execution::default(),
        }
    }

    pub fn sequential(mut self) -> Self {
        self.exec = Execution::Sequential;
        self
    }
}

/// Applies `f` to paths `0..n_paths` on `[0, horizon]`; output in index order.
pub fn map_paths<T, F>(cfg: &McConfig, horizon: f64, params: &ModelParams, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&LevyPath) -> Result<T> + Sync + Send,
{
    let one = |i: usize| -> Result<T> {
        let seed = PathSeed {
            seed: cfg.seed,
            index: i as u64,
        };
        f(&sample_path_seeded(horizon, cfg.eps, params, seed)?)
    };
    match cfg.exec {
        Execution::Sequential => (0..cfg.n_paths).map(one).collect(),
        Execution::Parallel => par_map(cfg.n_paths, one),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub radial: usize,
    pub angular: usize,
    pub r_max: f64,
}

impl GridSummary {
    pub fn of(grid: &GridSpec) -> Self {
        Self {
            radial: grid.n_radial(),
            angular: grid.n_angular(),
            r_max: grid.r_max(),
        }
    }
}

/// One Monte Carlo estimate, in the shape written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub quantity: String,
    pub params: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi: Option<Vec2>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zeta: Option<[Complex64; 2]>,
    pub t: f64,
    pub lambda: Cutoff,
    pub mean_re: f64,
    pub mean_im: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub grid: GridSummary,
    pub eps: f64,
    pub notes: Vec<String>,
}

impl MCEstimate {
    fn from_values(
        quantity: &str,
        values: &[Complex64],
        params: &ModelParams,
        t: f64,
        grid: &GridSpec,
        cfg: &McConfig,
    ) -> Self {
        let s = ComplexStats::from_samples(values);
        Self {
            quantity: quantity.to_string(),
            params: *params,
            xi: None,
            zeta: None,
            t,
            lambda: params.lambda,
            mean_re: s.mean.re,
            mean_im: s.mean.im,
            std_err: s.std_err,
            n_paths: values.len(),
            seed: cfg.seed,
            grid: GridSummary::of(grid),
            eps: cfg.eps,
            notes: Vec::new(),
        }
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.mean_re, self.mean_im)
    }

    fn note(mut self, s: String) -> Self {
        self.notes.push(s);
        self
    }
}

fn bias_notes(params: &ModelParams, grid: &GridSpec, xi: Vec2, t: f64, eps: f64) -> Vec<String> {
    vec![
        format!(
            "small-jump truncation: |E e^(i xi.X) - E e^(i xi.X_eps)| <= {:.3e}",
            small_jump_bias_bound(params, xi, t, eps)
        ),
        format!("grid tolerance {:.1e}", grid.tol()),
    ]
}

/// `conj⟨ε(f)|Ŵ_{Λ,t}(0) ε(g)⟩`, the ξ-independent factor of a per-path
/// sample of `⟨ε(g)|T̂_{Λ,t}(ξ)ε(f)⟩`; the full sample is this times
/// `e^{iξ·X_t}`.
fn base_sample(
    fun: &PathFunctionals,
    params: &ModelParams,
    x_t: Vec2,
    f: &CoherentLabel,
    g: &CoherentLabel,
) -> Result<Complex64> {
    let w = fiber_w_from_functionals(fun, params, x_t, [0.0, 0.0], g)?;
    Ok(w.element(f)?.conj())
}

/// `e^{iζ·X}` for complex `ζ`.
fn analytic_weight(zeta: [Complex64; 2], x: Vec2) -> Complex64 {
    (Complex64::i() * (zeta[0] * x[0] + zeta[1] * x[1])).exp()
}

fn real_zeta(xi: Vec2) -> [Complex64; 2] {
    [Complex64::new(xi[0], 0.0), Complex64::new(xi[1], 0.0)]
}

/// Per-path samples of `⟨ε(g)|T̂_{Λ,t}(ζ)ε(f)⟩`.
#[allow(clippy::too_many_arguments)]
fn weighted_samples(
    zeta: [Complex64; 2],
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    f: &CoherentLabel,
    g: &CoherentLabel,
    cfg: &McConfig,
) -> Result<Vec<(Complex64, Vec2)>> {
    let kernel = ActionKernel::for_params(grid, params);
    map_paths(cfg, t, params, |path| {
        let fun = kernel.functionals(path, t, ActionForm::Renormalized)?;
        let x = path.position(t);
        Ok((base_sample(&fun, params, x, f, g)? * analytic_weight(zeta, x), x))
    })
}

/// Estimates `⟨ε(g)|T̂_{Λ,t}(ξ)ε(f)⟩ = E[conj⟨ε(f)|Ŵ_{Λ,t}(ξ)ε(g)⟩]` at the
/// model cutoff (finite or infinite).
pub fn fiber_semigroup(
    xi: Vec2,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    f: &CoherentLabel,
    g: &CoherentLabel,
    cfg: &McConfig,
) -> Result<MCEstimate> {
    if t < 0.0 {
        return Err(invalid("t", "negative time"));
    }
    let values: Vec<Complex64> = if t == 0.0 {
        vec![g.log_pairing(f)?.exp(); cfg.n_paths]
    } else {
        weighted_samples(real_zeta(xi), t, params, grid, f, g, cfg)?
            .into_iter()
            .map(|(v, _)| v)
            .collect()
    };
    let mut est = MCEstimate::from_values("fiber_semigroup", &values, params, t, grid, cfg);
    est.xi = Some(xi);
    est.notes = bias_notes(params, grid, xi, t, cfg.eps);
    Ok(est)
}

/// Result of [`analytic_fiber`] together with the heavy-tail diagnostic
/// `E e^{|Im ζ| |X_t|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub estimate: MCEstimate,
    pub weight_moment: RealStats,
}

/// Estimates `E[e^{iζ·X_t} Ŵ_{Λ,t}(0)^*]` for `ζ` in the strip `|Im ζ| < m_p`.
pub fn analytic_fiber(
    zeta: [Complex64; 2],
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    f: &CoherentLabel,
    g: &CoherentLabel,
    cfg: &McConfig,
) -> Result<AnalyticReport> {
    let im = zeta[0].im.hypot(zeta[1].im);
    if params.m_p <= 0.0 || im >= params.m_p {
        return Err(Error::OutsideStrip { im, m_p: params.m_p });
    }
    if t <= 0.0 {
        return Err(invalid("t", "analytic continuation needs t > 0"));
    }
    let samples = weighted_samples(zeta, t, params, grid, f, g, cfg)?;
    let values: Vec<Complex64> = samples.iter().map(|s| s.0).collect();
    let weights: Vec<f64> = samples
        .iter()
        .map(|s| (im * s.1[0].hypot(s.1[1])).exp())
        .collect();
    let mut est = MCEstimate::from_values("analytic_fiber", &values, params, t, grid, cfg);
    est.zeta = Some(zeta);
    let weight_moment = RealStats::from_samples(&weights);
    est = est.note(format!(
        "E exp(|Im zeta||X_t|) = {:.4} +- {:.1e}; max sample {:.3e}",
        weight_moment.mean,
        weight_moment.std_err,
        weights.iter().copied().fold(0.0, f64::max)
    ));
    Ok(AnalyticReport {
        estimate: est,
        weight_moment,
    })
}

/// `|mean_a − mean_b|` with the standard error of the per-path difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffStat {
    pub lambda_a: Cutoff,
    pub lambda_b: Cutoff,
    pub abs_diff: f64,
    pub std_err: f64,
}

impl DiffStat {
    fn of(lambda_a: Cutoff, lambda_b: Cutoff, a: &[Complex64], b: &[Complex64]) -> Self {
        let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let s = ComplexStats::from_samples(&d);
        Self {
            lambda_a,
            lambda_b,
            abs_diff: s.mean.norm(),
            std_err: s.std_err,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub estimates: Vec<MCEstimate>,
    /// Each Λ against the last entry of the list.
    pub to_last: Vec<DiffStat>,
    /// Consecutive pairs.
    pub successive: Vec<DiffStat>,
    /// Median over paths of `sup_s |e^{u_{Λ,s}} − e^{u_{last,s}}|`.
    pub pathwise_sup_median: Vec<f64>,
    /// Median over paths of `|Im u_{Λ,t}|` before the real part is taken.
    pub imag_residual_median: Vec<f64>,
}

/// Probe times for suprema over `[0, t]`: the jump times plus a uniform
/// 64-point refinement.
pub fn sup_probe_times(path: &LevyPath, t: f64) -> Vec<f64> {
    let mut s: Vec<f64> = path
        .events()
        .iter()
        .map(|e| e.time)
        .filter(|&x| x <= t)
        .chain((1..=64).map(|j| t * j as f64 / 64.0))
        .collect();
    s.sort_by(|a, b| a.total_cmp(b));
    s.dedup();
    s
}

fn sweep_kernel(grid: &Arc<GridSpec>, params: &ModelParams, lambdas: &[Cutoff]) -> Result<ActionKernel> {
    if lambdas.is_empty() {
        return Err(invalid("lambdas", "empty cutoff list"));
    }
    let max = lambdas
        .iter()
        .copied()
        .fold(Cutoff::Finite(0.0), |a, b| if b.as_f64() > a.as_f64() { b } else { a });
    Ok(ActionKernel::new(grid, params, max))
}

fn functionals_at(kernel: &ActionKernel, scan: &Scan, lambda: Cutoff) -> PathFunctionals {
    let (u_plus, u_minus) = kernel.u_pm_from(scan, lambda);
    PathFunctionals {
        t: scan.t,
        u_plus,
        u_minus,
        action: kernel.ito_from(scan, lambda, ActionForm::Renormalized),
    }
}

/// Matrix element `⟨ε(g)|T̂_{Λ,t}(ξ)ε(f)⟩` for every Λ in `lambdas` on one
/// common set of paths.
#[allow(clippy::too_many_arguments)]
pub fn lambda_sweep(
    xi: Vec2,
    t: f64,
    params_base: &ModelParams,
    grid: &Arc<GridSpec>,
    lambdas: &[Cutoff],
    f: &CoherentLabel,
    g: &CoherentLabel,
    cfg: &McConfig,
) -> Result<SweepReport> {
    if t <= 0.0 {
        return Err(invalid("t", "sweep needs t > 0"));
    }
    let kernel = sweep_kernel(grid, params_base, lambdas)?;
    let nl = lambdas.len();
    struct PerPath {
        values: Vec<Complex64>,
        sup_diff: Vec<f64>,
        imag: Vec<f64>,
    }
    let per_path = map_paths(cfg, t, params_base, |path| {
        let probes = sup_probe_times(path, t);
        let scan = kernel.scan(path, t, &probes, lambdas)?;
        let x = path.position(t);
        let phase = analytic_weight(real_zeta(xi), x);
        let mut values = Vec::with_capacity(nl);
        let mut imag = Vec::with_capacity(nl);
        for &lam in lambdas {
            let fun = functionals_at(&kernel, &scan, lam);
            imag.push(fun.action.imag_residual());
            let p = params_base.with_cutoff(lam);
            values.push(base_sample(&fun, &p, x, f, g)? * phase);
        }
        let sup_diff = (0..nl)
            .map(|li| {
                scan.probes
                    .iter()
                    .map(|r| (r.ito[li].re.exp() - r.ito[nl - 1].re.exp()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(PerPath {
            values,
            sup_diff,
            imag,
        })
    })?;

    let column = |li: usize| -> Vec<Complex64> { per_path.iter().map(|p| p.values[li]).collect() };
    let cols: Vec<Vec<Complex64>> = (0..nl).map(column).collect();
    let estimates = lambdas
        .iter()
        .zip(&cols)
        .map(|(&lam, vals)| {
            let p = params_base.with_cutoff(lam);
            let mut e = MCEstimate::from_values("lambda_sweep", vals, &p, t, grid, cfg);
            e.xi = Some(xi);
            e.notes = bias_notes(&p, grid, xi, t, cfg.eps);
            e
        })
        .collect();
    let to_last = (0..nl)
        .map(|li| DiffStat::of(lambdas[li], lambdas[nl - 1], &cols[li], &cols[nl - 1]))
        .collect();
    let successive = (1..nl)
        .map(|li| DiffStat::of(lambdas[li - 1], lambdas[li], &cols[li - 1], &cols[li]))
        .collect();
    let med = |get: &dyn Fn(&PerPath) -> f64| -> f64 {
        quantile(&per_path.iter().map(get).collect::<Vec<_>>(), 0.5)
    };
    let pathwise_sup_median = (0..nl).map(|li| med(&|p: &PerPath| p.sup_diff[li])).collect();
    let imag_residual_median = (0..nl).map(|li| med(&|p: &PerPath| p.imag[li])).collect();
    Ok(SweepReport {
        estimates,
        to_last,
        successive,
        pathwise_sup_median,
        imag_residual_median,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub lambda: Cutoff,
    pub p: f64,
    pub stats: RealStats,
}

/// Empirical `E[sup_{s≤t} e^{p u_{Λ,s}}]` for every `(Λ, p)`, sup over
/// `s = 0`, the jump times and a uniform 64-point refinement.
pub fn moment_diagnostics(
    t: f64,
    params_base: &ModelParams,
    grid: &Arc<GridSpec>,
    lambdas: &[Cutoff],
    powers: &[f64],
    cfg: &McConfig,
) -> Result<Vec<MomentRow>> {
    let kernel = sweep_kernel(grid, params_base, lambdas)?;
    let sups = map_paths(cfg, t, params_base, |path| {
        let probes = sup_probe_times(path, t);
        let scan = kernel.scan(path, t, &probes, lambdas)?;
        // sup of u itself; e^{pu} is monotone in u for p > 0
        Ok((0..lambdas.len())
            .map(|li| scan.probes.iter().map(|r| r.ito[li].re).fold(0.0, f64::max))
            .collect::<Vec<f64>>())
    })?;
    let mut rows = Vec::new();
    for (li, &lam) in lambdas.iter().enumerate() {
        for &p in powers {
            let xs: Vec<f64> = sups.iter().map(|s| (p * s[li]).exp()).collect();
            rows.push(MomentRow {
                lambda: lam,
                p,
                stats: RealStats::from_samples(&xs),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub max_residual: f64,
    pub median_residual: f64,
    pub n_paths: usize,
}

/// Per-path rank-one check of `Ŵ_t = Ŵ_{s,t} Ŵ_s` over `n_paths` paths.
#[allow(clippy::too_many_arguments)]
pub fn semigroup_check(
    xi: Vec2,
    t: f64,
    s: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    f: &CoherentLabel,
    probes: &[CoherentLabel],
    cfg: &McConfig,
) -> Result<FlowReport> {
    if !(0.0 <= s && s <= t) {
        return Err(invalid("s", "need 0 <= s <= t"));
    }
    let res = map_paths(cfg, t, params, |path| {
        crate::fock::flow_check(path, s, t, params, grid, xi, f, probes)
    })?;
    Ok(FlowReport {
        max_residual: res.iter().copied().fold(0.0, f64::max),
        median_residual: quantile(&res, 0.5),
        n_paths: res.len(),
    })
}

/// A position-space profile with its Fourier transform
/// `ρ̂(ξ) = (2π)^{-1} ∫ e^{-iξ·x} ρ(x) dx`.
pub trait Profile: Sync {
    fn value(&self, x: Vec2) -> Complex64;
    fn fourier(&self, xi: Vec2) -> Complex64;
}

/// `ρ(x) = A e^{ip·x} e^{-|x−c|²/(2σ²)}` with `A` normalizing `‖ρ‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianProfile {
    pub center: Vec2,
    pub width: f64,
    pub momentum: Vec2,
}

impl GaussianProfile {
    pub fn new(center: Vec2, width: f64, momentum: Vec2) -> Self {
        Self {
            center,
            width,
            momentum,
        }
    }

    fn amplitude(&self) -> f64 {
        1.0 / (std::f64::consts::PI.sqrt() * self.width)
    }
}

impl Profile for GaussianProfile {
    fn value(&self, x: Vec2) -> Complex64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        Complex64::from_polar(
            self.amplitude() * (-r2 / (2.0 * self.width * self.width)).exp(),
            dot(self.momentum, x),
        )
    }

    fn fourier(&self, xi: Vec2) -> Complex64 {
        let q = [xi[0] - self.momentum[0], xi[1] - self.momentum[1]];
        let s2 = self.width * self.width;
        let mag = self.amplitude() * s2 * (-(q[0] * q[0] + q[1] * q[1]) * s2 / 2.0).exp();
        Complex64::from_polar(mag, -dot(xi, self.center) + dot(self.momentum, self.center))
    }
}

/// Tensor trapezoid rule on the square `[c − L, c + L]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneQuad {
    pub nodes: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl PlaneQuad {
    pub fn square(center: Vec2, half_width: f64, n: usize) -> Result<Self> {
        if n < 2 || half_width <= 0.0 {
            return Err(invalid("x_quad", "need n >= 2 and half_width > 0"));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let mut nodes = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        let w1 = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
        for i in 0..n {
            for j in 0..n {
                nodes.push([
                    center[0] - half_width + i as f64 * h,
                    center[1] - half_width + j as f64 * h,
                ]);
                weights.push(w1(i) * w1(j));
            }
        }
        Ok(Self { nodes, weights })
    }

    fn overlap(&self, f: impl Fn(Vec2) -> Complex64) -> Complex64 {
        let terms: Vec<Complex64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .collect();
        crate::stats::pairwise_sum_complex(&terms)
    }
}

/// Estimates `⟨Φ_out, e^{-tH_Λ} Φ_in⟩` for `Φ = ρ ⊗ ε(label)`.
#[allow(clippy::too_many_arguments)]
pub fn full_pairing(
    rho_out: &dyn Profile,
    rho_in: &dyn Profile,
    f_out: &CoherentLabel,
    f_in: &CoherentLabel,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    x_quad: &PlaneQuad,
    cfg: &McConfig,
) -> Result<MCEstimate> {
    if t < 0.0 {
        return Err(invalid("t", "negative time"));
    }
    let values: Vec<Complex64> = if t == 0.0 {
        let v = x_quad.overlap(|x| rho_out.value(x).conj() * rho_in.value(x)) * f_out.log_pairing(f_in)?.exp();
        vec![v; cfg.n_paths]
    } else {
        let kernel = ActionKernel::for_params(grid, params);
        let vacuum = f_out.is_vacuum() && f_in.is_vacuum();
        let heat = f_out.log_pairing(&CoherentLabel(f_in.0.apply_heat(t, params)?))?;
        map_paths(cfg, t, params, |path| {
            let fun = kernel.functionals(path, t, ActionForm::Renormalized)?;
            let xt = path.position(t);
            let u = fun.action.value;
            if vacuum {
                let ov = x_quad.overlap(|x| rho_out.value(x).conj() * rho_in.value([x[0] + xt[0], x[1] + xt[1]]));
                return Ok(ov * u.exp());
            }
            // ⟨ε(f_out)|W_t(x)^* ε(f_in)⟩ = conj exp(u − ⟨U⁻|e_{-x}f_in⟩ + ⟨f_out|e^{-tω}f_in⟩ − ⟨e_{-x}f_out|U⁺⟩)
            let terms: Result<Vec<Complex64>> = x_quad
                .nodes
                .iter()
                .zip(&x_quad.weights)
                .map(|(&x, &w)| {
                    let mx = [-x[0], -x[1]];
                    let a = fun.u_minus.inner(&f_in.0.apply_phase(mx))?;
                    let b = f_out.0.apply_phase(mx).inner(&fun.u_plus)?;
                    let el = (Complex64::new(u, 0.0) - a + heat - b).exp().conj();
                    Ok(rho_out.value(x).conj() * rho_in.value([x[0] + xt[0], x[1] + xt[1]]) * el * w)
                })
                .collect();
            Ok(crate::stats::pairwise_sum_complex(&terms?))
        })?
    };
    Ok(MCEstimate::from_values("full_pairing", &values, params, t, grid, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberVsFull {
    pub full: MCEstimate,
    pub fiber: MCEstimate,
    /// `|full − fiber| / |fiber|` of the means.
    pub relative_residual: f64,
    /// Largest per-path `|full − fiber|` relative to `|fiber mean|`.
    pub max_path_residual: f64,
}

/// Vacuum-sector comparison of the position-space pairing with
/// `∫ conj(ρ̂_out) ρ̂_in ⟨Ω|T̂_{Λ,t}(ξ)Ω⟩ dξ`, both on the same paths.
#[allow(clippy::too_many_arguments)]
pub fn fiber_vs_full(
    rho_out: &dyn Profile,
    rho_in: &dyn Profile,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
    x_quad: &PlaneQuad,
    xi_quad: &PlaneQuad,
    cfg: &McConfig,
) -> Result<FiberVsFull> {
    if t < 0.0 {
        return Err(invalid("t", "negative time"));
    }
    let kernel = ActionKernel::for_params(grid, params);
    let spectral: Vec<Complex64> = xi_quad
        .nodes
        .iter()
        .map(|&xi| rho_out.fourier(xi).conj() * rho_in.fourier(xi))
        .collect();
    let pairs = map_paths(cfg, t.max(f64::MIN_POSITIVE), params, |path| {
        let (u, xt) = if t == 0.0 {
            (0.0, [0.0, 0.0])
        } else {
            (kernel.functionals(path, t, ActionForm::Renormalized)?.action.value, path.position(t))
        };
        let full = x_quad.overlap(|x| rho_out.value(x).conj() * rho_in.value([x[0] + xt[0], x[1] + xt[1]]));
        let terms: Vec<Complex64> = xi_quad
            .nodes
            .iter()
            .zip(&xi_quad.weights)
            .zip(&spectral)
            .map(|((&xi, &w), &s)| s * Complex64::from_polar(w, dot(xi, xt)))
            .collect();
        let fiber = crate::stats::pairwise_sum_complex(&terms);
        let e = u.exp();
        Ok((full * e, fiber * e))
    })?;
    let full_v: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let fiber_v: Vec<Complex64> = pairs.iter().map(|p| p.1).collect();
    let full = MCEstimate::from_values("full_pairing", &full_v, params, t, grid, cfg);
    let fiber = MCEstimate::from_values("fiber_integral", &fiber_v, params, t, grid, cfg);
    let scale = fiber.mean().norm();
    let relative_residual = (full.mean() - fiber.mean()).norm() / scale;
    let max_path_residual = pairs.iter().map(|p| (p.0 - p.1).norm()).fold(0.0, f64::max) / scale;
    Ok(FiberVsFull {
        full,
        fiber,
        relative_residual,
        max_path_residual,
    })
}
