//! Polar discretization of momentum space.
//!
//! Radii are Gauss–Legendre nodes on log-spaced panels (panel edges are also
//! inserted at every cutoff in use so that `χ_{B_Λ}` never cuts through a
//! panel); angles are equispaced with weight `2π/A`. A [`FieldVector`] holds
//! one complex amplitude per node and is only ever combined with vectors on
//! the same grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Cutoff, ModelParams, Vec2};
use crate::quad::gauss_legendre;

/// User-facing grid parameters (config keys `grid.*`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Total number of radial nodes (rounded up to whole panels).
    pub radial: usize,
    /// Number of equispaced angles.
    pub angular: usize,
    /// Outer radius; `None` selects it from the cutoffs in use.
    pub r_max: Option<f64>,
    /// Declared relative quadrature tolerance.
    pub tol: f64,
    /// Gauss–Legendre order per radial panel.
    pub order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            radial: 128,
            angular: 64,
            r_max: None,
            tol: 1e-4,
            order: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    radii: Vec<f64>,
    /// `r dr` quadrature weight of each radius (angular factor excluded).
    radial_weights: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    r_max: f64,
    tol: f64,
    panel_edges: Vec<f64>,
}

impl GridSpec {
    /// Builds a grid whose panels break at every finite cutoff in `cutoffs`.
    /// `r_max` must be at least as large as any of them.
    pub fn new(config: &GridConfig, r_max: f64, cutoffs: &[f64]) -> Result<Self> {
        if config.angular == 0 || config.radial == 0 || config.order == 0 {
            return Err(invalid("grid", "node counts must be positive"));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(invalid("grid.r_max", format!("{r_max} must be finite and > 0")));
        }
        if let Some(&l) = cutoffs.iter().find(|&&l| l > r_max * (1.0 + 1e-12)) {
            return Err(invalid("grid.r_max", format!("{r_max} is below cutoff {l}")));
        }
        let panels = config.radial.div_ceil(config.order).max(1);
        // First edge at r_max / 2^(panels-1), clamped so the innermost panel
        // is not absurdly thin.
        let inner = (r_max / 2f64.powi(panels as i32 - 1)).max(r_max * 1e-3).min(r_max);
        let mut edges = vec![0.0];
        if panels == 1 {
            edges.push(r_max);
        } else {
            let q = (r_max / inner).powf(1.0 / (panels - 1) as f64);
            for i in 0..panels {
                edges.push(inner * q.powi(i as i32));
            }
            *edges.last_mut().unwrap() = r_max;
        }
        for &l in cutoffs {
            if l > 0.0 && l < r_max && !edges.iter().any(|&e| (e - l).abs() <= 1e-12 * l) {
                edges.push(l);
            }
        }
        edges.sort_by(|a, b| a.total_cmp(b));
        edges.dedup();

        let (x, w) = gauss_legendre(config.order);
        let mut radii = vec![];
        let mut radial_weights = vec![];
        for p in edges.windows(2) {
            let (a, b) = (p[0], p[1]);
            let h = 0.5 * (b - a);
            let c = 0.5 * (a + b);
            for (xi, wi) in x.iter().zip(&w) {
                let r = c + h * xi;
                radii.push(r);
                radial_weights.push(wi * h * r);
            }
        }
        let a = config.angular;
        let (sin, cos) = (0..a)
            .map(|i| (2.0 * PI * i as f64 / a as f64).sin_cos())
            .unzip();
        Ok(Self {
            radii,
            radial_weights,
            cos,
            sin,
            r_max,
            tol: config.tol,
            panel_edges: edges,
        })
    }

    /// Grid for a model: `r_max` from the config, else `max(4Λ, 8 m_b)` over
    /// the finite cutoffs, else `infinite_radius` when only `Λ = ∞` occurs.
    pub fn for_cutoffs(
        config: &GridConfig,
        params: &ModelParams,
        cutoffs: &[Cutoff],
        infinite_radius: f64,
    ) -> Result<Arc<Self>> {
        let finite: Vec<f64> = cutoffs.iter().filter_map(|c| c.finite().ok()).collect();
        let r_max = match config.r_max {
            Some(r) => r,
            None => {
                let largest = finite.iter().copied().fold(0.0, f64::max);
                if cutoffs.iter().any(|c| c.is_infinite()) {
                    infinite_radius.max(largest)
                } else {
                    (4.0 * largest).max(8.0 * params.m_b)
                }
            }
        };
        Ok(Arc::new(Self::new(config, r_max, &finite)?))
    }

    pub fn n_radial(&self) -> usize {
        self.radii.len()
    }

    pub fn n_angular(&self) -> usize {
        self.cos.len()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn panel_edges(&self) -> &[f64] {
        &self.panel_edges
    }

    pub fn angle_cos_sin(&self) -> (&[f64], &[f64]) {
        (&self.cos, &self.sin)
    }

    /// Full node weight `r dr dθ` of radius `j` (same for every angle).
    #[inline]
    pub fn shell_weight(&self, j: usize) -> f64 {
        self.radial_weights[j] * 2.0 * PI / self.cos.len() as f64
    }

    /// Momentum of node `n` (radial-major ordering).
    #[inline]
    pub fn node(&self, n: usize) -> Vec2 {
        let a = self.cos.len();
        let r = self.radii[n / a];
        [r * self.cos[n % a], r * self.sin[n % a]]
    }

    #[inline]
    pub fn node_radius(&self, n: usize) -> f64 {
        self.radii[n / self.cos.len()]
    }

    #[inline]
    pub fn node_weight(&self, n: usize) -> f64 {
        self.shell_weight(n / self.cos.len())
    }

    /// Number of radial shells strictly inside `B_Λ`.
    pub fn shells_inside(&self, lambda: Cutoff) -> usize {
        self.radii.partition_point(|&r| lambda.contains(r))
    }

    /// Quadrature of a radial function `∫ f(|k|) dk` on this grid.
    pub fn integrate_radial(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.n_radial())
            .map(|j| self.shell_weight(j) * self.n_angular() as f64 * f(self.radii[j]))
            .sum()
    }
}

/// An element of `L²(ℝ²)` sampled on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct FieldVector {
    grid: Arc<GridSpec>,
    data: Vec<Complex64>,
}

impl PartialEq for FieldVector {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.data == other.data
    }
}

fn same_grid(a: &Arc<GridSpec>, b: &Arc<GridSpec>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl FieldVector {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_data(grid: &Arc<GridSpec>, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    /// Samples `f(k)` at every node.
    pub fn from_fn(grid: &Arc<GridSpec>, f: impl Fn(Vec2) -> Complex64) -> Self {
        Self {
            grid: grid.clone(),
            data: (0..grid.len()).map(|n| f(grid.node(n))).collect(),
        }
    }

    /// Samples a radial real function.
    pub fn from_radial(grid: &Arc<GridSpec>, f: impl Fn(f64) -> f64) -> Self {
        let a = grid.n_angular();
        let mut data = Vec::with_capacity(grid.len());
        for &r in grid.radii() {
            let v = Complex64::new(f(r), 0.0);
            data.extend(std::iter::repeat_n(v, a));
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    /// `v_Λ = χ_{B_Λ} g ω^{-1/2}` with the model's own cutoff.
    pub fn coupling(grid: &Arc<GridSpec>, params: &ModelParams) -> Self {
        let l = params.lambda;
        Self::from_radial(grid, |r| {
            if l.contains(r) {
                params.coupling_v_radial(r)
            } else {
                0.0
            }
        })
    }

    /// `χ_{B_Λ} β` with the model's own cutoff.
    pub fn beta(grid: &Arc<GridSpec>, params: &ModelParams) -> Self {
        let l = params.lambda;
        Self::from_radial(grid, |r| {
            if l.contains(r) {
                params.beta_radial(r)
            } else {
                0.0
            }
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    fn check(&self, other: &Self) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `⟨f|g⟩ = Σ w conj(f) g`, antilinear in the first slot.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check(other)?;
        let a = self.grid.n_angular();
        let mut total = Complex64::new(0.0, 0.0);
        for (j, (fs, gs)) in self.data.chunks(a).zip(other.data.chunks(a)).enumerate() {
            let s: Complex64 = fs.iter().zip(gs).map(|(f, g)| f.conj() * g).sum();
            total += s * self.grid.shell_weight(j);
        }
        Ok(total)
    }

    pub fn norm_sqr(&self) -> f64 {
        let a = self.grid.n_angular();
        self.data
            .chunks(a)
            .enumerate()
            .map(|(j, fs)| self.grid.shell_weight(j) * fs.iter().map(|f| f.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `‖h‖_t² = ‖h‖² + ‖(tω)^{-1/2} h‖²`.
    pub fn time_norm(&self, t: f64, params: &ModelParams) -> f64 {
        let a = self.grid.n_angular();
        self.data
            .chunks(a)
            .enumerate()
            .map(|(j, fs)| {
                let w = params.omega_radial(self.grid.radii[j]);
                self.grid.shell_weight(j)
                    * (1.0 + 1.0 / (t * w))
                    * fs.iter().map(|f| f.norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Multiplication by `e_x(k) = e^{-i k·x}`.
    pub fn apply_phase(&self, x: Vec2) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().enumerate().for_each(|(n, f)| {
            let k = self.grid.node(n);
            let (s, c) = (k[0] * x[0] + k[1] * x[1]).sin_cos();
            *f *= Complex64::new(c, -s);
        });
        out
    }

    /// Multiplication by `e^{-s ω(k)}`, `s ≥ 0`.
    pub fn apply_heat(&self, s: f64, params: &ModelParams) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(invalid("s", format!("heat time {s} must be >= 0")));
        }
        let a = self.grid.n_angular();
        let mut out = self.clone();
        for (j, fs) in out.data.chunks_mut(a).enumerate() {
            let d = (-s * params.omega_radial(self.grid.radii[j])).exp();
            fs.iter_mut().for_each(|f| *f *= d);
        }
        Ok(out)
    }

    /// `χ_{B_Λ} f`.
    pub fn cutoff_mask(&self, lambda: Cutoff) -> Self {
        let a = self.grid.n_angular();
        let inside = self.grid.shells_inside(lambda);
        let mut out = self.clone();
        out.data[inside * a..]
            .iter_mut()
            .for_each(|f| *f = Complex64::new(0.0, 0.0));
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|f| *f *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(f, g)| *f += g);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(f, g)| *f -= g);
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|f| f.re == 0.0 && f.im == 0.0)
    }
}
