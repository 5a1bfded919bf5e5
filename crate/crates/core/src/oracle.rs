//! Exact diagonalization of the fiber Hamiltonian on a truncated Fock space
//! over a few momentum modes inside `B_Λ`:
//!
//! ```text
//! Ĥ_Λ(ξ) = ψ(ξ − dΓ(K)) + dΓ(ω) + φ(v_Λ) + E^ren_Λ
//! ```
//!
//! Mode `j` carries momentum `k_j` and cell weight `w_j`; the field operator
//! couples `n_j ↔ n_j + 1` with amplitude `v(k_j) √w_j √(n_j + 1)`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::CoherentLabel;
use crate::grid::{FieldVector, GridConfig, GridSpec};
use crate::mc::{fiber_semigroup, McConfig, MCEstimate};
use crate::model::{Cutoff, ModelParams, Vec2};
use crate::stats::fit_slope;

/// Largest basis handled by the dense eigensolver.
pub const BASIS_CAP: usize = 5000;

/// Which renormalization energy enters the diagonal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErenMode {
    /// `∫_{B_Λ} v²/(ω+ψ)` in closed-form quadrature.
    #[default]
    Continuum,
    /// `Σ_j w_j v_j²/(ω_j + ψ(k_j))` over the oracle modes.
    Modesum,
}

/// Radial placement of the oracle modes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLayout {
    /// One Gauss–Legendre panel on `[0, Λ]`.
    #[default]
    Ball,
    /// Panels `[0, Λ/2^{p-1}], …, [Λ/2, Λ]` with `p = 1 + ⌈log₂(Λ/m_b)⌉`,
    /// so the mode count grows with `log Λ` at fixed resolution per octave.
    Octaves,
}

/// Oracle discretization (config keys `oracle.*`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Gauss–Legendre radial nodes per panel.
    pub radial: usize,
    pub angular: usize,
    pub n_max: usize,
    pub eren_mode: ErenMode,
    pub layout: ModeLayout,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            radial: 3,
            angular: 6,
            n_max: 3,
            eren_mode: ErenMode::Continuum,
            layout: ModeLayout::Ball,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec2,
    pub weight: f64,
}

/// Occupation-number basis `{n : Σ n_j ≤ n_max}` over a list of modes.
#[derive(Debug, Clone)]
pub struct TruncatedFock {
    modes: Vec<Mode>,
    n_max: usize,
    basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

impl TruncatedFock {
    pub fn from_modes(modes: Vec<Mode>, n_max: usize) -> Result<Self> {
        let m = modes.len();
        let dim = binomial(m + n_max, n_max);
        if dim > BASIS_CAP {
            return Err(Error::BasisTooLarge { dim, cap: BASIS_CAP });
        }
        if n_max > u8::MAX as usize {
            return Err(invalid("oracle.n_max", "too large"));
        }
        let mut basis = Vec::with_capacity(dim);
        // by total number, then lexicographically
        for total in 0..=n_max {
            let mut occ = vec![0u8; m];
            fill(&mut basis, &mut occ, 0, total);
        }
        let index = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        Ok(Self {
            modes,
            n_max,
            basis,
            index,
        })
    }

    /// Modes at the nodes of a single-panel Gauss–Legendre × equispaced grid
    /// on `B_Λ`.
    pub fn on_ball(lambda: f64, m_b: f64, cfg: &OracleConfig) -> Result<Self> {
        let grid = oracle_grid(lambda, m_b, cfg)?;
        let modes = (0..grid.len())
            .map(|n| Mode {
                k: grid.node(n),
                weight: grid.node_weight(n),
            })
            .collect();
        Self::from_modes(modes, cfg.n_max)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.basis[i]
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Truncated exponential vector `Σ_n Π_j (f_j √w_j)^{n_j} / √(n_j!)`
    /// for a label given by its values at the modes.
    pub fn coherent(&self, f: impl Fn(Vec2) -> Complex64) -> DVector<Complex64> {
        let amp: Vec<Complex64> = self.modes.iter().map(|m| f(m.k) * m.weight.sqrt()).collect();
        DVector::from_iterator(
            self.dim(),
            self.basis.iter().map(|occ| {
                occ.iter().zip(&amp).fold(Complex64::new(1.0, 0.0), |acc, (&n, &a)| {
                    let fact: f64 = (1..=n as u32).map(f64::from).product();
                    acc * a.powu(n as u32) / fact.sqrt()
                })
            }),
        )
    }

    pub fn vacuum(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = Complex64::new(1.0, 0.0);
        v
    }
}

fn fill(out: &mut Vec<Vec<u8>>, occ: &mut [u8], j: usize, left: usize) {
    if j + 1 == occ.len() {
        occ[j] = left as u8;
        out.push(occ.to_vec());
        occ[j] = 0;
        return;
    }
    if occ.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for n in (0..=left).rev() {
        occ[j] = n as u8;
        fill(out, occ, j + 1, left - n);
    }
    occ[j] = 0;
}

pub fn oracle_grid(lambda: f64, m_b: f64, cfg: &OracleConfig) -> Result<GridSpec> {
    let panels = match cfg.layout {
        ModeLayout::Ball => 1,
        ModeLayout::Octaves if m_b > 0.0 && lambda > m_b => 1 + (lambda / m_b).log2().ceil() as usize,
        ModeLayout::Octaves => 1,
    };
    GridSpec::new(
        &GridConfig {
            radial: cfg.radial * panels,
            angular: cfg.angular,
            r_max: Some(lambda),
            tol: 1e-4,
            order: cfg.radial,
        },
        lambda,
        &[lambda],
    )
}

/// Dense matrix of `Ĥ_Λ(ξ)` in the occupation basis.
#[derive(Debug, Clone)]
pub struct FiberMatrix {
    pub matrix: DMatrix<f64>,
    pub xi: Vec2,
    pub lambda: f64,
    pub e_ren: f64,
    pub n_modes: usize,
    pub n_max: usize,
}

/// Eigendecomposition `Ĥ = V diag(λ) Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Renormalization energy used by the oracle.
pub fn oracle_eren(params: &ModelParams, trunc: &TruncatedFock, mode: ErenMode) -> Result<f64> {
    let lambda = params.lambda;
    lambda.finite()?;
    match mode {
        ErenMode::Continuum => params.e_ren(lambda),
        ErenMode::Modesum => Ok(trunc
            .modes
            .iter()
            .map(|m| {
                let v = params.coupling_v(m.k);
                m.weight * v * v / (params.omega(m.k) + params.psi(m.k))
            })
            .sum()),
    }
}

pub fn build_fiber(
    xi: Vec2,
    params: &ModelParams,
    trunc: &TruncatedFock,
    eren_mode: ErenMode,
) -> Result<FiberMatrix> {
    let lambda = params.lambda.finite()?;
    let e_ren = oracle_eren(params, trunc, eren_mode)?;
    let dim = trunc.dim();
    let amp: Vec<f64> = trunc
        .modes
        .iter()
        .map(|m| params.coupling_v(m.k) * m.weight.sqrt())
        .collect();
    let omega: Vec<f64> = trunc.modes.iter().map(|m| params.omega(m.k)).collect();
    let mut h = DMatrix::zeros(dim, dim);
    let mut raised = Vec::new();
    for (i, occ) in trunc.basis.iter().enumerate() {
        let mut p = [0.0, 0.0];
        let mut field = 0.0;
        for (j, &n) in occ.iter().enumerate() {
            let n = n as f64;
            p[0] += n * trunc.modes[j].k[0];
            p[1] += n * trunc.modes[j].k[1];
            field += n * omega[j];
        }
        h[(i, i)] = params.psi([xi[0] - p[0], xi[1] - p[1]]) + field + e_ren;
        let total: usize = occ.iter().map(|&n| n as usize).sum();
        if total < trunc.n_max {
            for j in 0..occ.len() {
                raised.clear();
                raised.extend_from_slice(occ);
                raised[j] += 1;
                let k = trunc.index[&raised];
                let x = amp[j] * (raised[j] as f64).sqrt();
                h[(i, k)] = x;
                h[(k, i)] = x;
            }
        }
    }
    Ok(FiberMatrix {
        matrix: h,
        xi,
        lambda,
        e_ren,
        n_modes: trunc.modes.len(),
        n_max: trunc.n_max,
    })
}

impl FiberMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Lowest eigenvalue, without eigenvectors.
    pub fn ground_energy(&self) -> Result<f64> {
        if self.dim() > BASIS_CAP {
            return Err(Error::BasisTooLarge {
                dim: self.dim(),
                cap: BASIS_CAP,
            });
        }
        Ok(self.matrix.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn spectral(&self) -> Result<Spectral> {
        if self.dim() > BASIS_CAP {
            return Err(Error::BasisTooLarge {
                dim: self.dim(),
                cap: BASIS_CAP,
            });
        }
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(self.dim(), order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Spectral { values, vectors })
    }
}

impl Spectral {
    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    pub fn ground_state(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }

    /// `e^{-tĤ} v`.
    pub fn evolve(&self, t: f64, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if t < 0.0 {
            return Err(invalid("t", "negative time"));
        }
        let vt = self.vectors.map(|x| Complex64::new(x, 0.0));
        let coeff = vt.tr_mul(v);
        let scaled = DVector::from_iterator(
            coeff.len(),
            coeff.iter().zip(self.values.iter()).map(|(c, &l)| c * (-t * l).exp()),
        );
        Ok(vt * scaled)
    }

    /// `⟨w| e^{-tĤ} |v⟩`.
    pub fn expectation(&self, t: f64, w: &DVector<Complex64>, v: &DVector<Complex64>) -> Result<Complex64> {
        Ok(w.dotc(&self.evolve(t, v)?))
    }

    /// `e^{-tĤ}` as a dense matrix.
    pub fn semigroup(&self, t: f64) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.values.map(|l| (-t * l).exp()));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// `‖e^{-tĤ} − e^{-sĤ}e^{-(t−s)Ĥ}‖_F`, an upper bound for the operator norm.
pub fn semigroup_residual(spec: &Spectral, t: f64, s: f64) -> f64 {
    (spec.semigroup(t) - spec.semigroup(s) * spec.semigroup(t - s)).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck {
    pub hs: Vec<f64>,
    /// `max_probe ‖(v − e^{-hĤ}v)/h − Ĥv‖` per `h`.
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log h`.
    pub order: f64,
}

pub fn generator_check(fiber: &FiberMatrix, spec: &Spectral, hs: &[f64], probes: &[DVector<Complex64>]) -> Result<GeneratorCheck> {
    let hc = fiber.matrix.map(|x| Complex64::new(x, 0.0));
    let mut residuals = Vec::with_capacity(hs.len());
    for &h in hs {
        let mut worst = 0.0f64;
        for v in probes {
            let r = (v - spec.evolve(h, v)?) / Complex64::new(h, 0.0) - &hc * v;
            worst = worst.max(r.norm());
        }
        residuals.push(worst);
    }
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    Ok(GeneratorCheck {
        hs: hs.to_vec(),
        residuals,
        order: fit_slope(&lx, &ly),
    })
}

/// Second-order vacuum energy `ψ(ξ) + E^ren − Σ_j w_j v_j²/(ω_j + ψ(ξ−k_j) − ψ(ξ))`.
pub fn second_order_energy(xi: Vec2, params: &ModelParams, trunc: &TruncatedFock, e_ren: f64) -> f64 {
    let p0 = params.psi(xi);
    let shift: f64 = trunc
        .modes
        .iter()
        .map(|m| {
            let v = params.coupling_v(m.k);
            let e = params.omega(m.k) + params.psi([xi[0] - m.k[0], xi[1] - m.k[1]]) - p0;
            m.weight * v * v / e
        })
        .sum();
    p0 + e_ren - shift
}

pub fn ground_energy(xi: Vec2, params: &ModelParams, trunc: &TruncatedFock, eren_mode: ErenMode) -> Result<f64> {
    build_fiber(xi, params, trunc, eren_mode)?.ground_energy()
}

/// One row of a renormalization scan (CSV columns in declaration order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub n_max: usize,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E0_unren")]
    pub e0_unren: f64,
    pub pt_residual: f64,
}

/// Ground energies across cutoffs; each Λ gets the mode rule of `cfg`
/// rescaled to `B_Λ`.
pub fn renormalization_scan(
    xi: Vec2,
    params: &ModelParams,
    lambdas: &[f64],
    cfg: &OracleConfig,
) -> Result<Vec<ScanRow>> {
    lambdas
        .iter()
        .map(|&lam| {
            let p = params.with_cutoff(Cutoff::Finite(lam));
            let trunc = TruncatedFock::on_ball(lam, params.m_b, cfg)?;
            let fiber = build_fiber(xi, &p, &trunc, cfg.eren_mode)?;
            let e0 = fiber.ground_energy()?;
            Ok(ScanRow {
                lambda: lam,
                xi_x: xi[0],
                xi_y: xi[1],
                m: trunc.modes.len(),
                n_max: trunc.n_max,
                e0,
                e0_unren: e0 - fiber.e_ren,
                pt_residual: e0 - second_order_energy(xi, &p, &trunc, fiber.e_ren),
            })
        })
        .collect()
}

/// Bias budget of an oracle-vs-Monte-Carlo comparison, each entry an
/// absolute bound on the matrix element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasBudget {
    /// Second-order (one-boson) log-amplitude on the oracle modes versus a
    /// fine quadrature of the same ball, times `|oracle|`.
    pub mode_discretization: f64,
    /// `|oracle(n_max) − oracle(n_max − 1)|`.
    pub boson_truncation: f64,
    /// Small-jump truncation at second order: `|ψ − ψ_ε|(k) ≤ |k|² M₂(ε)/4`
    /// in every two-point function, giving `|oracle| · (M₂/4) ∫ v²|k|² t/E² dk`.
    pub small_jump: f64,
}

impl BiasBudget {
    pub fn total(&self) -> f64 {
        self.mode_discretization + self.boson_truncation + self.small_jump
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub oracle_re: f64,
    pub oracle_im: f64,
    pub mc: MCEstimate,
    pub abs_diff: f64,
    pub budget: BiasBudget,
    pub pass: bool,
}

fn fine_ball(lambda: f64) -> Result<GridSpec> {
    GridSpec::new(
        &GridConfig {
            radial: 64,
            angular: 128,
            r_max: Some(lambda),
            tol: 1e-10,
            order: 16,
        },
        lambda,
        &[lambda],
    )
}

/// `|∫_{B_Λ} F − Σ_j w_j F(k_j)|` for the second-order vacuum log-amplitude
/// `F` at time `t`, and the second-order small-jump bound.
fn second_order_errors(
    xi: Vec2,
    t: f64,
    params: &ModelParams,
    trunc: &TruncatedFock,
    mode: ErenMode,
    eps: f64,
) -> Result<(f64, f64)> {
    let lambda = params.lambda.finite()?;
    let p0 = params.psi(xi);
    let energy = |k: Vec2| params.omega(k) + params.psi([xi[0] - k[0], xi[1] - k[1]]) - p0;
    let term = |k: Vec2| {
        let v = params.coupling_v(k);
        let e = energy(k);
        let dyson = v * v * (t / e + (-t * e).exp_m1() / (e * e));
        match mode {
            // the counterterm is the exact continuum E^ren on both sides
            ErenMode::Continuum => dyson,
            ErenMode::Modesum => dyson - t * v * v / (params.omega(k) + params.psi(k)),
        }
    };
    let fine = fine_ball(lambda)?;
    let continuum: f64 = (0..fine.len()).map(|n| fine.node_weight(n) * term(fine.node(n))).sum();
    let discrete: f64 = trunc.modes.iter().map(|m| m.weight * term(m.k)).sum();
    let m2 = params.small_jump_second_moment(eps);
    let jumps: f64 = (0..fine.len())
        .map(|n| {
            let k = fine.node(n);
            let v = params.coupling_v(k);
            let e = energy(k);
            fine.node_weight(n) * v * v * (k[0] * k[0] + k[1] * k[1]) * t / (e * e)
        })
        .sum::<f64>()
        * m2
        / 4.0;
    Ok(((continuum - discrete).abs(), jumps))
}

/// Compares `⟨ε(g)|e^{-tĤ_Λ(ξ)}ε(f)⟩` on the oracle with the Monte Carlo
/// estimate of `⟨ε(g)|T̂_{Λ,t}(ξ)ε(f)⟩`. Passes iff the discrepancy is within
/// `3·SE` plus the bias budget.
#[allow(clippy::too_many_arguments)]
pub fn mc_vs_oracle(
    xi: Vec2,
    t: f64,
    params: &ModelParams,
    ocfg: &OracleConfig,
    mc_grid: &Arc<GridSpec>,
    f: &(dyn Fn(Vec2) -> Complex64 + Sync),
    g: &(dyn Fn(Vec2) -> Complex64 + Sync),
    cfg: &McConfig,
) -> Result<Comparison> {
    let lambda = params.lambda.finite()?;
    let trunc = TruncatedFock::on_ball(lambda, params.m_b, ocfg)?;
    let value = |tr: &TruncatedFock| -> Result<Complex64> {
        let spec = build_fiber(xi, params, tr, ocfg.eren_mode)?.spectral()?;
        spec.expectation(t, &tr.coherent(g), &tr.coherent(f))
    };
    let oracle = value(&trunc)?;
    let lower = if ocfg.n_max > 0 {
        value(&TruncatedFock::from_modes(trunc.modes.clone(), ocfg.n_max - 1)?)?
    } else {
        oracle
    };
    let fl = CoherentLabel::new(FieldVector::from_fn(mc_grid, f).cutoff_mask(params.lambda));
    let gl = CoherentLabel::new(FieldVector::from_fn(mc_grid, g).cutoff_mask(params.lambda));
    let mc = fiber_semigroup(xi, t, params, mc_grid, &fl, &gl, cfg)?;
    let (modes, jumps) = second_order_errors(xi, t, params, &trunc, ocfg.eren_mode, cfg.eps)?;
    let budget = BiasBudget {
        mode_discretization: oracle.norm() * modes,
        boson_truncation: (oracle - lower).norm(),
        small_jump: oracle.norm() * jumps,
    };
    let abs_diff = (mc.mean() - oracle).norm();
    let pass = abs_diff <= 3.0 * mc.std_err + budget.total();
    Ok(Comparison {
        oracle_re: oracle.re,
        oracle_im: oracle.im,
        mc,
        abs_diff,
        budget,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(g: f64, lambda: f64) -> ModelParams {
        ModelParams::free_field(1.0, 1.0, Cutoff::Finite(lambda)).unwrap().with_coupling(g)
    }

    #[test]
    fn basis_enumeration() {
        let tr = TruncatedFock::on_ball(1.0, 1.0, &OracleConfig::default()).unwrap();
        assert_eq!(tr.modes().len(), 18);
        assert_eq!(tr.dim(), binomial(21, 3));
        assert_eq!(tr.dim(), 1330);
        assert!(tr.state(0).iter().all(|&n| n == 0));
        for i in 0..tr.dim() {
            assert_eq!(tr.index_of(tr.state(i)), Some(i));
        }
        let area: f64 = tr.modes().iter().map(|m| m.weight).sum();
        assert_relative_eq!(area, std::f64::consts::PI, max_relative = 1e-12);
        assert!(tr.modes().iter().all(|m| m.k[0].hypot(m.k[1]) < 1.0));
        let big = OracleConfig {
            radial: 4,
            angular: 8,
            n_max: 4,
            ..OracleConfig::default()
        };
        assert!(matches!(TruncatedFock::on_ball(1.0, 1.0, &big), Err(Error::BasisTooLarge { .. })));
    }

    #[test]
    fn one_mode_two_by_two() {
        let p = params(0.7, 1.0);
        let w = std::f64::consts::PI * 0.01;
        let tr = TruncatedFock::from_modes(vec![Mode { k: [0.0, 0.0], weight: w }], 1).unwrap();
        let xi = [0.4, -0.3];
        let f = build_fiber(xi, &p, &tr, ErenMode::Continuum).unwrap();
        let e = p.e_ren(p.lambda).unwrap();
        let v1 = p.coupling_v([0.0, 0.0]) * w.sqrt();
        let (a, d) = (p.psi(xi) + e, p.psi(xi) + p.omega([0.0, 0.0]) + e);
        assert_eq!(f.matrix[(0, 0)], a);
        assert_eq!(f.matrix[(1, 1)], d);
        assert_eq!(f.matrix[(0, 1)], v1);
        let lo = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + v1 * v1).sqrt();
        assert_relative_eq!(f.spectral().unwrap().ground_energy(), lo, max_relative = 1e-13);
    }

    #[test]
    fn free_case_is_diagonal() {
        let p = params(0.0, 1.0);
        let tr = TruncatedFock::on_ball(1.0, 1.0, &OracleConfig::default()).unwrap();
        let xi = [0.3, 0.0];
        let f = build_fiber(xi, &p, &tr, ErenMode::Continuum).unwrap();
        assert_eq!(f.matrix[(0, 0)], p.psi(xi));
        let s = f.spectral().unwrap();
        assert_relative_eq!(s.ground_energy(), p.psi(xi), max_relative = 1e-12);
        let vac = tr.vacuum();
        let e = s.expectation(1.5, &vac, &vac).unwrap();
        assert_relative_eq!(e.re, (-1.5 * p.psi(xi)).exp(), max_relative = 1e-12);
    }

    #[test]
    fn matrix_is_symmetric_and_evolution_is_a_semigroup() {
        let p = params(0.5, 1.0);
        let tr = TruncatedFock::on_ball(1.0, 1.0, &OracleConfig::default()).unwrap();
        let f = build_fiber([0.2, 0.1], &p, &tr, ErenMode::Continuum).unwrap();
        assert_eq!(f.matrix, f.matrix.transpose());
        let s = f.spectral().unwrap();
        let v = tr.coherent(|k| Complex64::new(0.3 * (-k[0] * k[0]).exp(), 0.1 * k[1]));
        let direct = s.evolve(1.3, &v).unwrap();
        let two = s.evolve(0.5, &s.evolve(0.8, &v).unwrap()).unwrap();
        assert!((&direct - &two).norm() < 1e-10 * two.norm());
        assert!(semigroup_residual(&s, 1.0, 0.4) < 1e-10);
        assert!((s.evolve(0.0, &v).unwrap() - &v).norm() < 1e-12 * v.norm());
        let bound = (-1.3 * s.ground_energy()).exp();
        assert!(direct.norm() <= bound * v.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn generator_order_is_one() {
        let p = params(1.0, 1.0);
        let tr = TruncatedFock::on_ball(1.0, 1.0, &OracleConfig { n_max: 2, ..OracleConfig::default() }).unwrap();
        let f = build_fiber([0.0, 0.0], &p, &tr, ErenMode::Continuum).unwrap();
        let s = f.spectral().unwrap();
        let probes = vec![tr.vacuum(), tr.coherent(|_| Complex64::new(0.2, 0.0))];
        let g = generator_check(&f, &s, &[1e-2, 1e-3, 1e-4], &probes).unwrap();
        assert!(g.order > 0.9 && g.order < 1.1, "{g:?}");
        // ground state: scalar Taylor remainder
        let gs = s.ground_state().map(|x| Complex64::new(x, 0.0));
        let e0 = s.ground_energy();
        let h = 1e-3;
        let one = generator_check(&f, &s, &[h], &[gs]).unwrap().residuals[0];
        assert_relative_eq!(one, ((1.0 - (-h * e0).exp()) / h - e0).abs(), max_relative = 1e-4);
    }

    #[test]
    fn variational_monotonicity() {
        let p = params(0.8, 1.0);
        let cfg = OracleConfig::default();
        let tr = TruncatedFock::on_ball(1.0, 1.0, &cfg).unwrap();
        let e3 = ground_energy([0.0, 0.0], &p, &tr, ErenMode::Continuum).unwrap();
        let tr2 = TruncatedFock::from_modes(tr.modes().to_vec(), 2).unwrap();
        let e2 = ground_energy([0.0, 0.0], &p, &tr2, ErenMode::Continuum).unwrap();
        let fewer = TruncatedFock::from_modes(tr.modes()[..8].to_vec(), 3).unwrap();
        let ef = ground_energy([0.0, 0.0], &p, &fewer, ErenMode::Continuum).unwrap();
        assert!(e3 <= e2 && e3 <= ef);
    }

    #[test]
    fn modesum_cancels_second_order() {
        let cfg = OracleConfig {
            eren_mode: ErenMode::Modesum,
            ..OracleConfig::default()
        };
        for g in [0.05, 0.1] {
            let rows = renormalization_scan([0.0, 0.0], &params(g, 2.0), &[2.0], &cfg).unwrap();
            assert!(rows[0].e0.abs() < 10.0 * g.powi(4), "{rows:?}");
            assert!(rows[0].pt_residual.abs() < 10.0 * g.powi(4));
        }
    }
}
