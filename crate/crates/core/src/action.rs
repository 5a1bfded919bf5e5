//! Per-path functionals: the processes `U^±_{Λ,t}` and the complex action
//! `u_{Λ,t}` in its defining form and in its Itô (jump sum plus compensator)
//! form, which also defines the renormalized action at `Λ = ∞`.
//!
//! Everything is computed in one left-to-right sweep over the constant
//! segments of a jump-resolved path. On a segment `[a, b]` where `X ≡ x`
//!
//! ```text
//! U⁺_b = e^{-Lω} U⁺_a + e_x v (1 − e^{-Lω})/ω,          L = b − a
//! ∫_a^b ⟨U⁺_s|e_x h⟩ ds = ⟨U⁺_a|e_x h⟩ (1 − e^{-Lω})/ω + ⟨e_x v|e_x h⟩ (L − (1 − e^{-Lω})/ω)/ω
//! ```
//!
//! nodewise, so time integrals are exact and only the momentum quadrature
//! approximates. All node contributions are independent of the cutoff except
//! for the indicator `χ_{B_Λ}`; accumulating per radial shell lets a single
//! sweep serve every cutoff at once.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldVector, GridSpec};
use crate::levy::LevyPath;
use crate::model::{Cutoff, ModelParams};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which formula produced an action value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionForm {
    Defining,
    Ito,
    Renormalized,
}

/// A real action together with the imaginary part discarded from the raw
/// complex evaluation (zero up to quadrature in exact arithmetic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub raw: Complex64,
    pub form: ActionForm,
}

impl ActionValue {
    pub fn imag_residual(&self) -> f64 {
        self.raw.im.abs()
    }
}

/// `U^±_{Λ,t}` and `u_{Λ,t}` for one path at one time.
#[derive(Debug, Clone)]
pub struct PathFunctionals {
    pub t: f64,
    pub u_plus: FieldVector,
    pub u_minus: FieldVector,
    pub action: ActionValue,
}

/// Per-shell accumulators, quadrature weights already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSums {
    /// `∫_0^t ⟨U⁺_s|e_{X_s} v⟩ ds` restricted to the shell.
    pub defining: Vec<Complex64>,
    /// `Σ_jumps ⟨U⁺_s|(e_{X_s} − e_{X_{s−}}) β⟩`.
    pub jumps: Vec<Complex64>,
    /// `∫_0^t ⟨U⁺_s|e_{X_s} ψ β⟩ ds`.
    pub compensator: Vec<Complex64>,
    /// `⟨U⁺_t|e_{X_t} β⟩`.
    pub boundary: Vec<Complex64>,
}

impl ShellSums {
    fn zeros(n: usize) -> Self {
        Self {
            defining: vec![ZERO; n],
            jumps: vec![ZERO; n],
            compensator: vec![ZERO; n],
            boundary: vec![ZERO; n],
        }
    }

    /// `∫_0^t ⟨U⁺_s|e_{X_s} v_Λ⟩ ds` over the first `shells` shells.
    pub fn defining_raw(&self, shells: usize) -> Complex64 {
        self.defining[..shells].iter().sum()
    }

    /// Itô form of the action over the first `shells` shells:
    /// jump sum plus `∫⟨U⁺|e_X ψβ⟩` (the `ds ν(dz)` compensator, by
    /// `∫(e_z − 1) dν = −ψ`) minus the boundary term.
    pub fn ito(&self, shells: usize) -> Complex64 {
        (0..shells)
            .map(|j| self.jumps[j] + self.compensator[j] - self.boundary[j])
            .sum()
    }
}

/// Action values recorded at an intermediate time, one per probe cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub time: f64,
    /// Renormalized (Itô-form) action per probe cutoff, raw complex value.
    pub ito: Vec<Complex64>,
    /// Defining form per probe cutoff; `None` for `Λ = ∞`.
    pub defining: Vec<Option<Complex64>>,
}

/// Result of one sweep over a path.
#[derive(Debug, Clone)]
pub struct Scan {
    pub t: f64,
    pub shells: usize,
    pub u_plus: Vec<Complex64>,
    pub u_minus: Vec<Complex64>,
    pub sums: ShellSums,
    pub probes: Vec<ProbeRecord>,
}

#[derive(Debug, Clone)]
struct Shell {
    omega: f64,
    v: f64,
    beta: f64,
    psi_beta: f64,
    weight: f64,
    r: f64,
}

/// Precomputed shell data for one grid, model and largest cutoff.
#[derive(Debug, Clone)]
pub struct ActionKernel {
    grid: Arc<GridSpec>,
    params: ModelParams,
    shells: Vec<Shell>,
}

impl ActionKernel {
    /// Kernel covering every shell inside `max_cutoff`.
    pub fn new(grid: &Arc<GridSpec>, params: &ModelParams, max_cutoff: Cutoff) -> Self {
        let n = grid.shells_inside(max_cutoff);
        let shells = grid.radii()[..n]
            .iter()
            .enumerate()
            .map(|(j, &r)| {
                let beta = params.beta_radial(r);
                Shell {
                    omega: params.omega_radial(r),
                    v: params.coupling_v_radial(r),
                    beta,
                    psi_beta: params.psi_radial(r) * beta,
                    weight: grid.shell_weight(j),
                    r,
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            params: *params,
            shells,
        }
    }

    /// Kernel for the model's own cutoff.
    pub fn for_params(grid: &Arc<GridSpec>, params: &ModelParams) -> Self {
        Self::new(grid, params, params.lambda)
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_shells(&self) -> usize {
        self.shells.len()
    }

    /// Number of kernel shells inside `lambda`.
    pub fn shells_for(&self, lambda: Cutoff) -> usize {
        self.shells.partition_point(|s| lambda.contains(s.r))
    }

    /// Sweeps `path` over `[0, t]`, recording the action at each `probe`
    /// time (ascending, within `(0, t]`) for each of `probe_cutoffs`.
    pub fn scan(
        &self,
        path: &LevyPath,
        t: f64,
        probes: &[f64],
        probe_cutoffs: &[Cutoff],
    ) -> Result<Scan> {
        if t > path.horizon() * (1.0 + 1e-12) || t < 0.0 {
            return Err(Error::BeyondHorizon {
                t,
                horizon: path.horizon(),
            });
        }
        let probe_shells: Vec<usize> = probe_cutoffs.iter().map(|&c| self.shells_for(c)).collect();
        let probe_eren: Vec<Option<f64>> = probe_cutoffs
            .iter()
            .map(|&c| match c {
                Cutoff::Finite(_) => self.params.e_ren(c).ok(),
                Cutoff::Infinite => None,
            })
            .collect();

        let a_n = self.grid.n_angular();
        let half = a_n / 2;
        let even = a_n.is_multiple_of(2);
        let (cos, sin) = self.grid.angle_cos_sin();
        let ns = self.shells.len();
        let nodes = ns * a_n;

        let mut up = vec![ZERO; nodes];
        let mut um = vec![ZERO; nodes];
        let mut phase = vec![Complex64::new(1.0, 0.0); nodes];
        let mut new_phase = vec![ZERO; nodes];
        let mut proj = vec![0.0; a_n];
        let mut sums = ShellSums::zeros(ns);
        let mut records = Vec::with_capacity(probes.len());

        let events = path.events();
        let mut ei = 0;
        let mut pi = 0;
        let mut a = 0.0;
        let mut x = [0.0, 0.0];

        loop {
            let next_event = events.get(ei).map(|e| e.time).filter(|&s| s <= t);
            let next_probe = probes.get(pi).copied().filter(|&s| s <= t);
            let tau = match (next_event, next_probe) {
                (Some(e), Some(p)) => e.min(p),
                (Some(e), None) => e,
                (None, Some(p)) => p,
                (None, None) => t,
            };
            if tau > a {
                self.integrate_segment(a, tau, &phase, &mut up, &mut um, &mut sums);
                a = tau;
            }
            if next_event == Some(tau) {
                let jump = events[ei].jump;
                x = [x[0] + jump[0], x[1] + jump[1]];
                fill_phase(&self.shells, cos, sin, even, half, x, &mut proj, &mut new_phase);
                for (j, sh) in self.shells.iter().enumerate() {
                    let mut acc = ZERO;
                    for n in j * a_n..(j + 1) * a_n {
                        acc += up[n].conj() * (new_phase[n] - phase[n]);
                    }
                    sums.jumps[j] += acc * (sh.beta * sh.weight);
                }
                std::mem::swap(&mut phase, &mut new_phase);
                ei += 1;
                continue;
            }
            if next_probe == Some(tau) {
                self.boundary(&up, &phase, &mut sums.boundary);
                records.push(ProbeRecord {
                    time: tau,
                    ito: probe_shells.iter().map(|&n| sums.ito(n)).collect(),
                    defining: probe_shells
                        .iter()
                        .zip(&probe_eren)
                        .map(|(&n, e)| e.map(|e| sums.defining_raw(n) - tau * e))
                        .collect(),
                });
                pi += 1;
                continue;
            }
            break;
        }
        self.boundary(&up, &phase, &mut sums.boundary);
        Ok(Scan {
            t,
            shells: ns,
            u_plus: up,
            u_minus: um,
            sums,
            probes: records,
        })
    }

    fn integrate_segment(
        &self,
        a: f64,
        b: f64,
        phase: &[Complex64],
        up: &mut [Complex64],
        um: &mut [Complex64],
        sums: &mut ShellSums,
    ) {
        let len = b - a;
        let a_n = self.grid.n_angular();
        let an = a_n as f64;
        for (j, sh) in self.shells.iter().enumerate() {
            let x = len * sh.omega;
            let decay = (-x).exp();
            let g1 = -(-x).exp_m1() / sh.omega;
            let g2 = if x < 1e-4 {
                len * len * (0.5 - x / 6.0 + x * x / 24.0)
            } else {
                (len - g1) / sh.omega
            };
            let start = (-a * sh.omega).exp();
            let vg1 = sh.v * g1;
            let mut c_sum = ZERO;
            for n in j * a_n..(j + 1) * a_n {
                let ph = phase[n];
                c_sum += up[n].conj() * ph;
                let src = ph * vg1;
                um[n] += src * start;
                up[n] = up[n] * decay + src;
            }
            let c = c_sum * g1;
            sums.defining[j] += (c * sh.v + an * sh.v * sh.v * g2) * sh.weight;
            sums.compensator[j] += (c * sh.psi_beta + an * sh.psi_beta * sh.v * g2) * sh.weight;
        }
    }

    fn boundary(&self, up: &[Complex64], phase: &[Complex64], out: &mut [Complex64]) {
        let a_n = self.grid.n_angular();
        for (j, sh) in self.shells.iter().enumerate() {
            let mut acc = ZERO;
            for n in j * a_n..(j + 1) * a_n {
                acc += up[n].conj() * phase[n];
            }
            out[j] = acc * (sh.beta * sh.weight);
        }
    }

    fn embed(&self, nodes: &[Complex64], lambda: Cutoff) -> FieldVector {
        let a_n = self.grid.n_angular();
        let keep = self.shells_for(lambda) * a_n;
        let mut f = FieldVector::zeros(&self.grid);
        f.data_mut()[..keep].copy_from_slice(&nodes[..keep]);
        f
    }

    /// `(U⁺_{Λ,t}, U⁻_{Λ,t})` from a scan.
    pub fn u_pm_from(&self, scan: &Scan, lambda: Cutoff) -> (FieldVector, FieldVector) {
        (self.embed(&scan.u_plus, lambda), self.embed(&scan.u_minus, lambda))
    }

    /// Defining form `∫_0^t⟨U⁺_s|e_{X_s}v_Λ⟩ds − t E^ren_Λ` from a scan.
    pub fn defining_from(&self, scan: &Scan, lambda: Cutoff) -> Result<ActionValue> {
        let e = self.params.e_ren(lambda)?;
        let raw = scan.sums.defining_raw(self.shells_for(lambda)) - scan.t * e;
        Ok(ActionValue {
            value: raw.re,
            raw,
            form: ActionForm::Defining,
        })
    }

    /// Itô form from a scan (any cutoff, including `Λ = ∞`).
    pub fn ito_from(&self, scan: &Scan, lambda: Cutoff, form: ActionForm) -> ActionValue {
        let raw = scan.sums.ito(self.shells_for(lambda));
        ActionValue {
            value: raw.re,
            raw,
            form,
        }
    }

    /// All functionals at the model cutoff, with the action in `form`.
    pub fn functionals(&self, path: &LevyPath, t: f64, form: ActionForm) -> Result<PathFunctionals> {
        let lambda = self.params.lambda;
        let scan = self.scan(path, t, &[], &[])?;
        let (u_plus, u_minus) = self.u_pm_from(&scan, lambda);
        let action = match form {
            ActionForm::Defining => self.defining_from(&scan, lambda)?,
            ActionForm::Ito => {
                lambda.finite()?;
                self.ito_from(&scan, lambda, form)
            }
            ActionForm::Renormalized => self.ito_from(&scan, lambda, form),
        };
        Ok(PathFunctionals {
            t,
            u_plus,
            u_minus,
            action,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn fill_phase(
    shells: &[Shell],
    cos: &[f64],
    sin: &[f64],
    even: bool,
    half: usize,
    x: [f64; 2],
    proj: &mut [f64],
    out: &mut [Complex64],
) {
    let a_n = cos.len();
    for (p, (c, s)) in proj.iter_mut().zip(cos.iter().zip(sin)) {
        *p = x[0] * c + x[1] * s;
    }
    for (j, sh) in shells.iter().enumerate() {
        let row = &mut out[j * a_n..(j + 1) * a_n];
        if even {
            // k ↦ −k at angle θ + π: the phase is conjugated.
            for a in 0..half {
                let (s, c) = (sh.r * proj[a]).sin_cos();
                row[a] = Complex64::new(c, -s);
                row[a + half] = Complex64::new(c, s);
            }
        } else {
            for a in 0..a_n {
                let (s, c) = (sh.r * proj[a]).sin_cos();
                row[a] = Complex64::new(c, -s);
            }
        }
    }
}

/// `(U⁺_{Λ,t}, U⁻_{Λ,t})` at the model cutoff.
pub fn u_pm(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
) -> Result<(FieldVector, FieldVector)> {
    let k = ActionKernel::for_params(grid, params);
    let scan = k.scan(path, t, &[], &[])?;
    Ok(k.u_pm_from(&scan, params.lambda))
}

/// Defining form of the action; finite cutoff only.
pub fn action_defining(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
) -> Result<ActionValue> {
    params.lambda.finite()?;
    let k = ActionKernel::for_params(grid, params);
    let scan = k.scan(path, t, &[], &[])?;
    k.defining_from(&scan, params.lambda)
}

/// Itô form of the action at a finite cutoff (raw complex value).
pub fn action_ito(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
) -> Result<Complex64> {
    params.lambda.finite()?;
    let k = ActionKernel::for_params(grid, params);
    let scan = k.scan(path, t, &[], &[])?;
    Ok(k.ito_from(&scan, params.lambda, ActionForm::Ito).raw)
}

/// Renormalized action; with a finite cutoff `β` is replaced by `χ_{B_Λ}β`.
pub fn action_renormalized(
    path: &LevyPath,
    t: f64,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
) -> Result<ActionValue> {
    let k = ActionKernel::for_params(grid, params);
    let scan = k.scan(path, t, &[], &[])?;
    Ok(k.ito_from(&scan, params.lambda, ActionForm::Renormalized))
}
