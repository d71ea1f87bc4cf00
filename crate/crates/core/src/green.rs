//! Fundamental solutions of the wave and heat operators, their Fourier
//! transforms, and the unit-time displacement laws Θ₀.
//!
//! For the wave equation t·Θ₀ has law G_w(t,·)/t; for the heat equation
//! √t·Θ₀ has law G_h(t,·).

use crate::equation::EquationKind;
use crate::error::{domain, Error, Result};
use crate::quad::{self, QuadSettings};
use crate::rng::McRng;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreenFunction {
    kind: EquationKind,
    dim: usize,
}

impl GreenFunction {
    pub fn new(kind: EquationKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be positive");
        }
        if kind == EquationKind::Wave && dim > 3 {
            return Err(Error::Unsupported(format!(
                "wave fundamental solution in d = {dim} (only d <= 3)"
            )));
        }
        Ok(Self { kind, dim })
    }

    pub fn kind(&self) -> EquationKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 𝔉G(t,·)(ξ) as a function of |ξ|.
    pub fn fourier(&self, t: f64, xi_norm: f64) -> f64 {
        match self.kind {
            EquationKind::Wave => gw_fourier_radial(t, xi_norm),
            EquationKind::Heat => gh_fourier_radial(t, xi_norm),
        }
    }

    /// Total mass of G(t,·).
    pub fn mass(&self, t: f64, s: &QuadSettings) -> Result<f64> {
        match self.kind {
            EquationKind::Wave => gw_mass(t, self.dim, s),
            EquationKind::Heat => Ok(1.0),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// sin(t r)/r with the limit t at r = 0.
pub fn gw_fourier_radial(t: f64, r: f64) -> f64 {
    let tr = t * r;
    if tr.abs() < 1e-6 {
        // sin(x)/x = 1 - x²/6 + O(x⁴)
        t * (1.0 - tr * tr / 6.0)
    } else {
        tr.sin() / r
    }
}

pub fn gh_fourier_radial(t: f64, r: f64) -> f64 {
    (-t * r * r / 2.0).exp()
}

pub fn gw_fourier(t: f64, xi: &[f64]) -> f64 {
    gw_fourier_radial(t, norm(xi))
}

pub fn gh_fourier(t: f64, xi: &[f64]) -> f64 {
    gh_fourier_radial(t, norm(xi))
}

/// Pointwise density of G_w(t,·) for d ∈ {1, 2}.
pub fn gw_density(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("time {t} must be positive"));
    }
    let r = norm(x);
    match x.len() {
        1 => Ok(if r <= t { 0.5 } else { 0.0 }),
        2 => Ok(if r < t {
            1.0 / (2.0 * PI * (t * t - r * r).sqrt())
        } else {
            0.0
        }),
        3 => Err(Error::Unsupported(
            "G_w in d = 3 is a surface measure; use gw_integrate".into(),
        )),
        d => Err(Error::Unsupported(format!("wave fundamental solution in d = {d}"))),
    }
}

/// Density of G_h(t,·).
pub fn gh_density(t: f64, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI * t).powf(-d / 2.0) * (-r2 / (2.0 * t)).exp()
}

/// ∫ G_w(t, dx), computed by quadrature for d ≤ 2 and by the surface-measure
/// weight for d = 3.
pub fn gw_mass(t: f64, d: usize, s: &QuadSettings) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("time {t} must be positive"));
    }
    match d {
        1 => Ok(quad::integrate(|x| gw_density(t, &[x]).unwrap_or(0.0), -t, t, s)?.value),
        // (2π)^{-1}(t²-r²)^{-1/2}·2πr = r (t+r)^{-1/2} (t-r)^{-1/2}
        2 => Ok(quad::integrate_power_right(|r| r / (t + r).sqrt(), 0.0, t, -0.5, s)?.value),
        // (4πt)^{-1} σ_t and σ_t has mass 4πt²
        3 => Ok((4.0 * PI * t * t) / (4.0 * PI * t)),
        _ => Err(Error::Unsupported(format!("wave fundamental solution in d = {d}"))),
    }
}

/// ∫ φ(x) G_w(t, dx) for d ≤ 3.
pub fn gw_integrate<F: Fn(&[f64]) -> f64>(t: f64, d: usize, phi: F, s: &QuadSettings) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("time {t} must be positive"));
    }
    match d {
        1 => Ok(0.5 * quad::integrate(|x| phi(&[x]), -t, t, s)?.value),
        2 => {
            let inner = |r: f64| {
                quad::integrate(|th| phi(&[r * th.cos(), r * th.sin()]), 0.0, 2.0 * PI, s)
                    .map(|q| q.value)
                    .unwrap_or(f64::NAN)
                    * r
                    / (2.0 * PI * (t + r).sqrt())
            };
            Ok(quad::integrate_power_right(inner, 0.0, t, -0.5, s)?.value)
        }
        3 => {
            let inner = |th: f64| {
                quad::integrate(
                    |ph| {
                        let w = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                        phi(&[t * w[0], t * w[1], t * w[2]])
                    },
                    0.0,
                    2.0 * PI,
                    s,
                )
                .map(|q| q.value)
                .unwrap_or(f64::NAN)
                    * th.sin()
            };
            Ok(t / (4.0 * PI) * quad::integrate(inner, 0.0, PI, s)?.value)
        }
        _ => Err(Error::Unsupported(format!("wave fundamental solution in d = {d}"))),
    }
}

/// ∫_ℝ sin²(tξ)/ξ² dξ by quadrature plus an asymptotic tail (equals πt).
pub fn plancherel_wave(t: f64, s: &QuadSettings) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("time {t} must be nonnegative"));
    }
    Ok(2.0 * quad::sine_product_integral(t, t, s)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaLaw {
    /// Uniform on [-1, 1].
    WaveD1,
    /// Density (2π)^{-1}(1-|x|²)^{-1/2} on the unit disc.
    WaveD2,
    /// Uniform on the unit sphere.
    WaveD3,
    /// Standard normal in the given dimension.
    Heat(usize),
}

impl ThetaLaw {
    pub fn for_equation(kind: EquationKind, d: usize) -> Result<Self> {
        match (kind, d) {
            (_, 0) => domain("dimension must be positive"),
            (EquationKind::Wave, 1) => Ok(ThetaLaw::WaveD1),
            (EquationKind::Wave, 2) => Ok(ThetaLaw::WaveD2),
            (EquationKind::Wave, 3) => Ok(ThetaLaw::WaveD3),
            (EquationKind::Wave, d) => Err(Error::Unsupported(format!(
                "wave displacement law in d = {d} (only d <= 3)"
            ))),
            (EquationKind::Heat, d) => Ok(ThetaLaw::Heat(d)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ThetaLaw::WaveD1 => 1,
            ThetaLaw::WaveD2 => 2,
            ThetaLaw::WaveD3 => 3,
            ThetaLaw::Heat(d) => *d,
        }
    }

    /// Fill `out` (length `dim()`) with one draw.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            ThetaLaw::WaveD1 => out[0] = 2.0 * rng.random::<f64>() - 1.0,
            ThetaLaw::WaveD2 => {
                let u: f64 = rng.random();
                let r = (1.0 - u * u).sqrt();
                let th = 2.0 * PI * rng.random::<f64>();
                out[0] = r * th.cos();
                out[1] = r * th.sin();
            }
            ThetaLaw::WaveD3 => {
                let z = 2.0 * rng.random::<f64>() - 1.0;
                let ph = 2.0 * PI * rng.random::<f64>();
                let rho = (1.0 - z * z).max(0.0).sqrt();
                out[0] = rho * ph.cos();
                out[1] = rho * ph.sin();
                out[2] = z;
            }
            ThetaLaw::Heat(_) => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
        }
    }

    /// CDF of |Θ₀| (radial law) where closed form is available.
    pub fn radial_cdf(&self, r: f64) -> Option<f64> {
        let r = r.max(0.0);
        match self {
            ThetaLaw::WaveD1 => Some(r.min(1.0)),
            ThetaLaw::WaveD2 => Some(if r >= 1.0 { 1.0 } else { 1.0 - (1.0 - r * r).sqrt() }),
            ThetaLaw::WaveD3 => Some(if r >= 1.0 { 1.0 } else { 0.0 }),
            ThetaLaw::Heat(1) => Some(libm::erf(r / std::f64::consts::SQRT_2)),
            ThetaLaw::Heat(2) => Some(1.0 - (-r * r / 2.0).exp()),
            ThetaLaw::Heat(_) => None,
        }
    }
}

/// A displacement law bound to a private RNG stream.
#[derive(Debug, Clone)]
pub struct ThetaSampler {
    law: ThetaLaw,
    rng: McRng,
}

impl ThetaSampler {
    pub fn new(law: ThetaLaw, rng: McRng) -> Self {
        Self { law, rng }
    }

    pub fn law(&self) -> ThetaLaw {
        self.law
    }

    pub fn sample(&mut self) -> Vec<f64> {
        let mut v = vec![0.0; self.law.dim()];
        self.law.draw(&mut self.rng, &mut v);
        v
    }
}
