//! Sampling of the isotropic Lévy process with symbol `-ψ`.
//!
//! Two samplers are provided. [`sample_increment`] draws `X_t` with its exact
//! law by subordinating a planar Brownian motion to the subordinator with
//! Laplace exponent `√(λ + m_p²) − m_p`. [`sample_path`] produces
//! jump-resolved piecewise-constant paths that retain every jump of size at
//! least `eps`; the action functionals integrate exactly over their constant
//! segments.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ModelParams, Vec2};
use crate::stats::RealStats;

/// Provenance of a sampled path: master seed and the path's stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSeed {
    pub seed: u64,
    pub index: u64,
}

/// Independent RNG stream for path `index` under master `seed`.
pub fn path_rng(seed: PathSeed) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.seed);
    rng.set_stream(seed.index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub jump: Vec2,
}

/// One càdlàg trajectory on `[0, horizon]` with finitely many jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyPath {
    horizon: f64,
    eps: f64,
    events: Vec<JumpEvent>,
    /// `positions[i]` is the value of the path right after event `i`.
    positions: Vec<Vec2>,
    seed: Option<PathSeed>,
    /// Per-coordinate variance per unit time of the discarded small jumps.
    discarded_variance: f64,
}

impl LevyPath {
    /// Builds a path from explicit events. Times must be strictly increasing
    /// within `(0, horizon]`.
    pub fn from_events(horizon: f64, eps: f64, events: Vec<JumpEvent>) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(invalid("horizon", "must be > 0"));
        }
        let mut last = 0.0;
        for e in &events {
            if !(e.time > last) || e.time > horizon {
                return Err(invalid(
                    "events",
                    format!("event time {} out of order or beyond horizon", e.time),
                ));
            }
            last = e.time;
        }
        let mut x = [0.0, 0.0];
        let positions = events
            .iter()
            .map(|e| {
                x = [x[0] + e.jump[0], x[1] + e.jump[1]];
                x
            })
            .collect();
        Ok(Self {
            horizon,
            eps,
            events,
            positions,
            seed: None,
            discarded_variance: 0.0,
        })
    }

    /// The jump-free path `X ≡ 0`.
    pub fn constant(horizon: f64) -> Self {
        Self::from_events(horizon, f64::INFINITY, vec![]).expect("horizon must be positive")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn seed(&self) -> Option<PathSeed> {
        self.seed
    }

    pub fn discarded_variance(&self) -> f64 {
        self.discarded_variance
    }

    /// Number of events at times `<= t`.
    fn count_upto(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// `X_t` (right-continuous).
    pub fn position(&self, t: f64) -> Vec2 {
        match self.count_upto(t) {
            0 => [0.0, 0.0],
            n => self.positions[n - 1],
        }
    }

    /// `X_{t-}`.
    pub fn position_before(&self, t: f64) -> Vec2 {
        match self.events.partition_point(|e| e.time < t) {
            0 => [0.0, 0.0],
            n => self.positions[n - 1],
        }
    }

    pub fn endpoint(&self) -> Vec2 {
        self.position(self.horizon)
    }

    /// Constant pieces `(a, b, x)` covering `[0, t]`.
    pub fn segments(&self, t: f64) -> Vec<(f64, f64, Vec2)> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut a = 0.0;
        let mut x = [0.0, 0.0];
        for (e, &pos) in self.events.iter().zip(&self.positions) {
            if e.time > t {
                break;
            }
            if e.time > a {
                out.push((a, e.time, x));
            }
            a = e.time;
            x = pos;
        }
        if t > a || out.is_empty() {
            out.push((a, t, x));
        }
        out
    }

    /// The shifted path `r ↦ X_{s+r} − X_s` on `[0, horizon − s]`.
    pub fn restart(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0 && s < self.horizon) {
            return Err(invalid("s", format!("restart time {s} outside [0, horizon)")));
        }
        let events = self
            .events
            .iter()
            .filter(|e| e.time > s)
            .map(|e| JumpEvent {
                time: e.time - s,
                jump: e.jump,
            })
            .collect();
        let mut p = Self::from_events(self.horizon - s, self.eps, events)?;
        p.seed = self.seed;
        p.discarded_variance = self.discarded_variance;
        Ok(p)
    }

    /// CSV dump: a `#` header line with `T`, `eps` and the seed, a column
    /// header, then one `(s, dx, dy)` row per event.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (seed, index) = self
            .seed
            .map(|s| (s.seed.to_string(), s.index.to_string()))
            .unwrap_or_else(|| ("none".into(), "none".into()));
        writeln!(
            w,
            "# T={} eps={} seed={} index={}",
            self.horizon, self.eps, seed, index
        )?;
        writeln!(w, "s,dx,dy")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.time, e.jump[0], e.jump[1])?;
        }
        Ok(())
    }
}

/// One draw of the subordinator at time `t`: inverse Gaussian with mean
/// `t/(2 m_p)` and shape `t²/2`, or the one-sided ½-stable law when `m_p = 0`.
pub fn sample_subordinator<R: Rng + ?Sized>(t: f64, m_p: f64, rng: &mut R) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if m_p > 0.0 {
        inverse_gaussian(t / (2.0 * m_p), t * t / 2.0, rng)
    } else {
        let z: f64 = rng.sample(StandardNormal);
        t * t / (2.0 * z * z)
    }
}

/// Michael–Schucany–Haas draw from the inverse Gaussian law with the given
/// mean and shape. The smaller root is written as `μ / (1 + a + √(a² + 2a))`,
/// which stays accurate when `a = μ z² / (2 shape)` is huge (short times).
fn inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let a = mean * z * z / (2.0 * shape);
    let x = mean / (1.0 + a + (a * a + 2.0 * a).sqrt());
    let u: f64 = rng.random();
    if u * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// `X_t` with its exact law: a centered Gaussian of per-coordinate
/// variance `2 S_t`.
pub fn sample_increment<R: Rng + ?Sized>(t: f64, params: &ModelParams, rng: &mut R) -> Vec2 {
    let s = sample_subordinator(t, params.m_p, rng);
    let sd = (2.0 * s).sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    [sd * a, sd * b]
}

/// Inverse of the radial tail `P(|Δ| > r) = (eps/r) e^{-m (r − eps)}` for
/// jumps of size at least `eps`.
pub fn jump_radius(eps: f64, m_p: f64, u: f64) -> f64 {
    let r0 = eps / u;
    if m_p == 0.0 {
        return r0;
    }
    // Solve y + m e^y = c with y = ln r; the left side is convex and
    // increasing, so Newton from y = c (right of the root) converges
    // monotonically.
    let c = r0.ln() + m_p * eps;
    let mut y = c;
    for _ in 0..100 {
        let ey = y.exp();
        let h = y + m_p * ey - c;
        let step = h / (1.0 + m_p * ey);
        y -= step;
        if step.abs() <= 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    y.exp()
}

/// Jump-resolved path on `[0, horizon]` keeping every jump of size `>= eps`.
/// The small jumps are dropped (no Gaussian surrogate); their
/// per-coordinate variance rate is recorded on the path.
pub fn sample_path<R: Rng + ?Sized>(
    horizon: f64,
    eps: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Result<LevyPath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be finite and > 0"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("eps", "must be finite and > 0"));
    }
    let rate = params.large_jump_rate(eps);
    let inter = Exp::new(rate).map_err(|e| invalid("eps", format!("jump rate {rate}: {e}")))?;
    let mut events = Vec::with_capacity((1.2 * rate * horizon) as usize + 4);
    let mut t = 0.0;
    loop {
        t += inter.sample(rng);
        if t > horizon {
            break;
        }
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let r = jump_radius(eps, params.m_p, u);
        let theta = 2.0 * PI * rng.random::<f64>();
        let (s, c) = theta.sin_cos();
        events.push(JumpEvent {
            time: t,
            jump: [r * c, r * s],
        });
    }
    let mut path = LevyPath::from_events(horizon, eps, events)?;
    path.discarded_variance = 0.5 * params.small_jump_second_moment(eps);
    Ok(path)
}

/// [`sample_path`] on the counter-based stream of `seed`.
pub fn sample_path_seeded(
    horizon: f64,
    eps: f64,
    params: &ModelParams,
    seed: PathSeed,
) -> Result<LevyPath> {
    let mut rng = path_rng(seed);
    let mut path = sample_path(horizon, eps, params, &mut rng)?;
    path.seed = Some(seed);
    Ok(path)
}

/// Bound on `|E e^{iξ·X_t} − E e^{iξ·X^eps_t}|` caused by dropping the jumps
/// below `eps`: `t |ξ|²/4 ∫_{|z|<eps} |z|² ν(dz)`.
pub fn small_jump_bias_bound(params: &ModelParams, xi: Vec2, t: f64, eps: f64) -> f64 {
    let q2 = xi[0] * xi[0] + xi[1] * xi[1];
    t * q2 / 4.0 * params.small_jump_second_moment(eps)
}

/// Monte Carlo estimate of `E[e^{-λ S_t}]` over `n` draws; the exact value is
/// `e^{-t(√(λ + m_p²) − m_p)}`.
pub fn subordinator_check<R: Rng + ?Sized>(
    t: f64,
    params: &ModelParams,
    rng: &mut R,
    lambda_probe: f64,
    n: usize,
) -> RealStats {
    let xs: Vec<f64> = (0..n)
        .map(|_| (-lambda_probe * sample_subordinator(t, params.m_p, rng)).exp())
        .collect();
    RealStats::from_samples(&xs)
}
