//! Closed-form model data: dispersion relations, coupling function,
//! renormalization energy and the Lévy measure of the particle process.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::quad::{self, QuadSpec};

/// A point of ℝ², used for momenta, positions and jumps alike.
pub type Vec2 = [f64; 2];

#[inline]
pub fn norm2(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Ultraviolet cutoff. Infinity is its own state so that quantities which
/// diverge there (the renormalization energy, `v_Λ` in L²) cannot be formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Finite(f64),
    Infinite,
}

impl Cutoff {
    pub fn finite(self) -> Result<f64> {
        match self {
            Cutoff::Finite(l) => Ok(l),
            Cutoff::Infinite => Err(Error::InfiniteCutoff),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Cutoff::Infinite)
    }

    /// Whether momentum modulus `r` lies in the open ball `B_Λ`.
    #[inline]
    pub fn contains(self, r: f64) -> bool {
        match self {
            Cutoff::Finite(l) => r < l,
            Cutoff::Infinite => true,
        }
    }

    /// Finite cutoffs order by value; infinity is above all of them.
    pub fn as_f64(self) -> f64 {
        match self {
            Cutoff::Finite(l) => l,
            Cutoff::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Finite(l) => write!(f, "{l}"),
            Cutoff::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Cutoff {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cutoff::Finite(l) => s.serialize_f64(*l),
            Cutoff::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cutoff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(l) => finite_cutoff(l).map_err(serde::de::Error::custom),
            Raw::Int(l) => finite_cutoff(l as f64).map_err(serde::de::Error::custom),
            Raw::Str(s) if s.trim().eq_ignore_ascii_case("inf") => Ok(Cutoff::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "cutoff must be a non-negative number or \"inf\", got {s:?}"
            ))),
        }
    }
}

fn finite_cutoff(l: f64) -> Result<Cutoff> {
    if l.is_finite() && l >= 0.0 {
        Ok(Cutoff::Finite(l))
    } else {
        Err(invalid("lambda", format!("{l} is not a finite value >= 0; use \"inf\"")))
    }
}

/// Physical constants of the model together with the ultraviolet cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m_p: f64,
    pub m_b: f64,
    pub g: f64,
    pub lambda: Cutoff,
}

impl ModelParams {
    pub fn new(m_p: f64, m_b: f64, g: f64, lambda: Cutoff) -> Result<Self> {
        if g == 0.0 || !g.is_finite() {
            return Err(invalid(
                "g",
                "coupling must be finite and nonzero (use ModelParams::free_field for g = 0)",
            ));
        }
        Self::checked(m_p, m_b, g, lambda)
    }

    /// Decoupled model (g = 0), used for diagnostics against the free evolution.
    pub fn free_field(m_p: f64, m_b: f64, lambda: Cutoff) -> Result<Self> {
        Self::checked(m_p, m_b, 0.0, lambda)
    }

    fn checked(m_p: f64, m_b: f64, g: f64, lambda: Cutoff) -> Result<Self> {
        if !(m_p >= 0.0 && m_p.is_finite()) {
            return Err(invalid("m_p", format!("{m_p} must be finite and >= 0")));
        }
        if !(m_b > 0.0 && m_b.is_finite()) {
            return Err(invalid("m_b", format!("{m_b} must be finite and > 0")));
        }
        if let Cutoff::Finite(l) = lambda {
            finite_cutoff(l)?;
        }
        Ok(Self { m_p, m_b, g, lambda })
    }

    pub fn validate(&self) -> Result<()> {
        Self::checked(self.m_p, self.m_b, self.g, self.lambda).map(|_| ())
    }

    pub fn with_coupling(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn with_cutoff(self, lambda: Cutoff) -> Self {
        Self { lambda, ..self }
    }

    /// Particle dispersion `ψ(ξ) = (|ξ|² + m_p²)^{1/2} − m_p`.
    pub fn psi(&self, xi: Vec2) -> f64 {
        self.psi_radial(norm2(xi))
    }

    /// `ψ` as a function of `|ξ|`; written to avoid cancellation near zero.
    #[inline]
    pub fn psi_radial(&self, r: f64) -> f64 {
        let r2 = r * r;
        r2 / ((r2 + self.m_p * self.m_p).sqrt() + self.m_p)
    }

    /// Analytic continuation of `ψ` to complex momenta in the strip
    /// `|Im ζ| < m_p` (principal branch of the square root).
    pub fn psi_complex(&self, zeta: [Complex64; 2]) -> Complex64 {
        let s = zeta[0] * zeta[0] + zeta[1] * zeta[1];
        (s + self.m_p * self.m_p).sqrt() - self.m_p
    }

    /// Boson dispersion `ω(k) = (|k|² + m_b²)^{1/2}`.
    pub fn omega(&self, k: Vec2) -> f64 {
        self.omega_radial(norm2(k))
    }

    #[inline]
    pub fn omega_radial(&self, r: f64) -> f64 {
        r.hypot(self.m_b)
    }

    /// Coupling function `v = g ω^{-1/2}` (no cutoff applied).
    pub fn coupling_v(&self, k: Vec2) -> f64 {
        self.coupling_v_radial(norm2(k))
    }

    #[inline]
    pub fn coupling_v_radial(&self, r: f64) -> f64 {
        self.g / self.omega_radial(r).sqrt()
    }

    /// `β = v / (ω + ψ)`.
    pub fn beta(&self, k: Vec2) -> f64 {
        self.beta_radial(norm2(k))
    }

    #[inline]
    pub fn beta_radial(&self, r: f64) -> f64 {
        self.coupling_v_radial(r) / (self.omega_radial(r) + self.psi_radial(r))
    }

    /// Renormalization energy `∫_{B_Λ} v²/(ω+ψ) dk` by adaptive radial
    /// quadrature. Rejects the infinite cutoff, where it diverges.
    pub fn e_ren(&self, lambda: Cutoff) -> Result<f64> {
        let l = lambda.finite()?;
        if l == 0.0 || self.g == 0.0 {
            return Ok(0.0);
        }
        // The coupling enters as g²; integrate with g = 1.
        let unit = self.with_coupling(1.0);
        let r = quad::integrate(
            |r| {
                let w = unit.omega_radial(r);
                r / (w * (w + unit.psi_radial(r)))
            },
            0.0,
            l,
            &[],
            QuadSpec {
                abs_tol: 0.0,
                rel_tol: 1e-12,
                max_evals: 200_000,
            },
        )?;
        Ok(2.0 * PI * self.g * self.g * r.value)
    }

    /// Density of the Lévy measure of the particle process at jump `z ≠ 0`,
    /// `ν(z) = (1 + m_p|z|) e^{-m_p|z|} / (2π|z|³)`.
    pub fn levy_density(&self, z: Vec2) -> Result<f64> {
        let r = norm2(z);
        if r == 0.0 {
            return Err(invalid("z", "the Lévy density is singular at the origin"));
        }
        Ok(self.levy_density_radial(r))
    }

    #[inline]
    pub fn levy_density_radial(&self, r: f64) -> f64 {
        let mr = self.m_p * r;
        (1.0 + mr) * (-mr).exp() / (2.0 * PI * r * r * r)
    }

    /// Total mass of jumps of size at least `eps`, `∫_{|z|≥eps} ν(z) dz`.
    /// The radial integrand `(1 + m r) e^{-m r} / r²` is the derivative of
    /// `-e^{-m r}/r`, so the mass is `e^{-m eps} / eps`.
    pub fn large_jump_rate(&self, eps: f64) -> f64 {
        (-self.m_p * eps).exp() / eps
    }

    /// Probability that a jump of size at least `eps` exceeds `r ≥ eps`.
    pub fn large_jump_tail(&self, eps: f64, r: f64) -> f64 {
        (eps / r) * (-self.m_p * (r - eps)).exp()
    }

    /// `∫_{|z|<eps} |z|² ν(z) dz`, the second moment of the discarded jumps.
    pub fn small_jump_second_moment(&self, eps: f64) -> f64 {
        let m = self.m_p;
        if m * eps < 1e-6 {
            // series of 2(1 - e^{-x})/m - eps e^{-x}, x = m eps
            let x = m * eps;
            eps * (1.0 - x * x / 6.0)
        } else {
            2.0 * (-(-m * eps).exp_m1()) / m - eps * (-m * eps).exp()
        }
    }

    /// Lévy–Khintchine reconstruction `∫_{|z| ≥ lower} (1 − cos ξ·z) ν(z) dz`.
    /// With `lower = 0` this reproduces `ψ(ξ)`; with `lower = eps` it is the
    /// symbol of the process with jumps below `eps` removed.
    pub fn symbol_from_levy_restricted(
        &self,
        xi: Vec2,
        lower: f64,
        spec: &SymbolQuad,
    ) -> Result<f64> {
        let q = norm2(xi);
        if q == 0.0 {
            return Ok(0.0);
        }
        let upper = spec.truncation_radius.max(lower);
        let integrand = |r: f64| {
            let x = q * r;
            let one_minus_j0 = if x < 1e-3 {
                let x2 = x * x;
                x2 / 4.0 - x2 * x2 / 64.0
            } else {
                1.0 - libm::j0(x)
            };
            2.0 * PI * r * self.levy_density_radial(r) * one_minus_j0
        };
        // Breaks at multiples of the oscillation period, densest near 1/|ξ|.
        let period = 2.0 * PI / q;
        let mut breaks = vec![];
        let mut b = (lower.max(1e-300)).max(period / 64.0);
        while b < upper {
            breaks.push(b);
            b = if b < period { 2.0 * b } else { b + period };
        }
        let body = quad::integrate(integrand, lower, upper, &breaks, spec.quad)?;
        // The non-oscillating part of the tail is exact; the Bessel part is
        // below (2/3)(2/(π|ξ|))^{1/2} R^{-3/2} sup(1+m r)e^{-m r}.
        let tail = self.large_jump_rate(upper);
        Ok(body.value + tail)
    }

    pub fn symbol_from_levy(&self, xi: Vec2, spec: &SymbolQuad) -> Result<f64> {
        self.symbol_from_levy_restricted(xi, 0.0, spec)
    }
}

/// Quadrature declaration for the Lévy–Khintchine reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct SymbolQuad {
    /// Radius beyond which the oscillatory Bessel part is dropped.
    pub truncation_radius: f64,
    pub quad: QuadSpec,
}

impl Default for SymbolQuad {
    fn default() -> Self {
        Self {
            truncation_radius: 1e5,
            quad: QuadSpec {
                abs_tol: 1e-11,
                rel_tol: 1e-10,
                max_evals: 4_000_000,
            },
        }
    }
}

impl SymbolQuad {
    /// Bound on the neglected Bessel tail for momentum modulus `q`.
    pub fn tail_bound(&self, q: f64) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        let r = self.truncation_radius;
        (2.0 / 3.0) * (2.0 / (PI * q)).sqrt() * r.powf(-1.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(m_p: f64, m_b: f64, g: f64) -> ModelParams {
        ModelParams::new(m_p, m_b, g, Cutoff::Finite(1.0)).unwrap()
    }

    #[test]
    fn dispersion_examples() {
        let p = params(1.0, 1.0, 1.0);
        assert_eq!(p.psi([0.0, 0.0]), 0.0);
        assert_relative_eq!(p.psi([3.0, 4.0]), 26f64.sqrt() - 1.0, max_relative = 1e-15);
        assert_relative_eq!(params(0.0, 1.0, 1.0).psi([3.0, 0.0]), 3.0);
        assert_eq!(p.omega([0.0, 0.0]), 1.0);
        assert_relative_eq!(p.omega([3.0, 4.0]), 26f64.sqrt(), max_relative = 1e-15);
        let (c, s) = 0.7f64.sin_cos();
        let k = [1.3, -0.4];
        let rk = [c * k[0] - s * k[1], s * k[0] + c * k[1]];
        assert_relative_eq!(p.omega(k), p.omega(rk), max_relative = 1e-15);
    }

    #[test]
    fn coupling_examples() {
        let p = params(1.0, 1.0, 1.0);
        assert_eq!(p.coupling_v([0.0, 0.0]), 1.0);
        assert_eq!(p.beta([0.0, 0.0]), 1.0);
        let k = [1.0, 0.0];
        assert_relative_eq!(p.coupling_v(k), 2f64.powf(-0.25), max_relative = 1e-14);
        assert_relative_eq!(p.coupling_v(k), 0.840_896_415_253_714_5, max_relative = 1e-12);
        assert_relative_eq!(p.beta(k), 0.459_901_520_751_308, max_relative = 1e-10);
        let p2 = p.with_coupling(2.0);
        assert_relative_eq!(p2.coupling_v([0.3, 0.1]), 2.0 * p.coupling_v([0.3, 0.1]));
    }

    #[test]
    fn beta_times_energy_is_v() {
        let p = params(0.5, 1.3, 0.7);
        for i in 0..200 {
            let r = 0.05 * i as f64;
            let lhs = p.beta_radial(r) * (p.omega_radial(r) + p.psi_radial(r));
            assert_relative_eq!(lhs, p.coupling_v_radial(r), max_relative = 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn e_ren_examples() {
        let p = params(1.0, 1.0, 1.0);
        assert_eq!(p.e_ren(Cutoff::Finite(0.0)).unwrap(), 0.0);
        let closed = PI * (2.0 * 2f64.sqrt() - 1.0).ln();
        assert_relative_eq!(p.e_ren(Cutoff::Finite(1.0)).unwrap(), closed, max_relative = 1e-10);
        assert_relative_eq!(closed, 1.895_813_258_697_7, max_relative = 1e-12);
        let l = Cutoff::Finite(2.5);
        assert_relative_eq!(
            p.with_coupling(2.0).e_ren(l).unwrap(),
            4.0 * p.e_ren(l).unwrap(),
            max_relative = 1e-12
        );
        assert_eq!(p.e_ren(Cutoff::Infinite), Err(Error::InfiniteCutoff));
    }

    #[test]
    fn e_ren_is_monotone() {
        let p = params(0.3, 0.8, 1.1);
        let mut prev = 0.0;
        for i in 1..30 {
            let e = p.e_ren(Cutoff::Finite(0.5 * i as f64)).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn levy_density_examples() {
        let p0 = params(0.0, 1.0, 1.0);
        assert_relative_eq!(p0.levy_density([1.0, 0.0]).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-15);
        let p1 = params(1.0, 1.0, 1.0);
        assert_relative_eq!(
            p1.levy_density([0.0, 1.0]).unwrap(),
            0.117_099_663_048_638_2,
            max_relative = 1e-12
        );
        assert_eq!(
            p1.levy_density([0.4, -0.2]).unwrap(),
            p1.levy_density([-0.4, 0.2]).unwrap()
        );
        assert!(p1.levy_density([0.0, 0.0]).is_err());
    }

    #[test]
    fn symbol_examples() {
        let spec = SymbolQuad::default();
        assert_eq!(params(1.0, 1.0, 1.0).symbol_from_levy([0.0, 0.0], &spec).unwrap(), 0.0);
        let s0 = params(0.0, 1.0, 1.0).symbol_from_levy([1.0, 0.0], &spec).unwrap();
        assert!((s0 - 1.0).abs() < 1e-6, "{s0}");
        let s1 = params(1.0, 1.0, 1.0).symbol_from_levy([0.0, 1.0], &spec).unwrap();
        assert!((s1 - (2f64.sqrt() - 1.0)).abs() < 1e-6, "{s1}");
    }

    #[test]
    fn cutoff_parsing() {
        #[derive(Deserialize)]
        struct W {
            lambda: Cutoff,
        }
        let w: W = serde_json::from_str(r#"{"lambda": "inf"}"#).unwrap();
        assert_eq!(w.lambda, Cutoff::Infinite);
        let w: W = serde_json::from_str(r#"{"lambda": 4}"#).unwrap();
        assert_eq!(w.lambda, Cutoff::Finite(4.0));
        assert!(serde_json::from_str::<W>(r#"{"lambda": -1.0}"#).is_err());
        assert!(serde_json::from_str::<W>(r#"{"lambda": "big"}"#).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelParams::new(1.0, 0.0, 1.0, Cutoff::Infinite).is_err());
        assert!(ModelParams::new(-1.0, 1.0, 1.0, Cutoff::Infinite).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, Cutoff::Infinite).is_err());
        assert!(ModelParams::free_field(1.0, 1.0, Cutoff::Infinite).is_ok());
        assert!(ModelParams::new(1.0, 1.0, 1.0, Cutoff::Finite(-2.0)).is_err());
    }
}
