//! Noise specification: fractional-in-time kernel, spatial covariance and
//! spectral measure, plus the scalar constants derived from them.
//!
//! Fourier convention: f = 𝔉μ with 𝔉μ(x) = ∫ e^{-i ξ·x} μ(dξ), so that
//! ∫∫ g(x) h(y) f(x-y) dx dy = ∫ 𝔉g(ξ) conj(𝔉h(ξ)) μ(dξ).
//!
//! Every kernel carries an `amplitude` multiplying both f and μ. With
//! amplitude 1 the white case has μ = Lebesgue measure.

use crate::equation::EquationKind;
use crate::error::{domain, Error, Result};
use crate::quad::{self, QuadSettings};
use crate::special::{gamma, sphere_area};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum SpatialKernel {
    /// Smooth case with finite spectral measure: f(x) = exp(-|x|²/(2ℓ²)),
    /// μ = N(0, ℓ^{-2} I) (total mass 1 before amplitude).
    Gaussian { length_scale: f64 },
    /// f(x) = |x|^{-α}, 0 < α < d.
    Riesz { alpha: f64 },
    /// f(x) = ∏ |x_j|^{-α_j}, 0 < α_j < 1.
    ProductFractional { alphas: Vec<f64> },
    /// f = δ₀ in d = 1.
    WhiteSpace,
}

impl SpatialKernel {
    pub fn name(&self) -> &'static str {
        match self {
            SpatialKernel::Gaussian { .. } => "gaussian",
            SpatialKernel::Riesz { .. } => "riesz",
            SpatialKernel::ProductFractional { .. } => "product",
            SpatialKernel::WhiteSpace => "white",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalKernel {
    pub hurst: f64,
    pub alpha_h: f64,
}

impl TemporalKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        Ok(Self {
            hurst,
            alpha_h: alpha_h(hurst)?,
        })
    }

    /// α_H |t-s|^{2H-2}; infinite on the diagonal for H < 1.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.alpha_h * (t - s).abs().powf(2.0 * self.hurst - 2.0)
    }

    /// ∫∫_{[0,t]²} |t₁-s₁|^{2H-2} dt₁ ds₁ = t^{2H}/α_H.
    pub fn square_mass(&self, t: f64) -> f64 {
        t.powf(2.0 * self.hurst) / self.alpha_h
    }

    /// Draw (t₁, s₁) ∈ [0,t]² with density ∝ |t₁-s₁|^{2H-2}.
    ///
    /// The gap D = |t₁-s₁| satisfies D/t ~ Beta(2H-1, 2), drawn as a product
    /// U₁^{1/(2H-1)} U₂^{1/(2H)}; the lower point is uniform on [0, t-D].
    pub fn sample_pair<R: rand::Rng + ?Sized>(&self, t: f64, rng: &mut R) -> (f64, f64) {
        let a = 2.0 * self.hurst - 1.0;
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let d = t * u1.powf(1.0 / a) * u2.powf(1.0 / (a + 1.0));
        let lo = (t - d) * rng.random::<f64>();
        if rng.random::<bool>() {
            (lo, lo + d)
        } else {
            (lo + d, lo)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    hurst: f64,
    kernel: SpatialKernel,
    dim: usize,
    amplitude: f64,
    // normalising constant of the spectral density (c_{α,d}, ∏ c_{α_j,1}, or 1)
    spectral_constant: f64,
}

pub fn alpha_h(h: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&h) {
        return domain(format!("Hurst index {h} outside [1/2, 1]"));
    }
    Ok(h * (2.0 * h - 1.0))
}

/// Intermittency time exponent ρ_w = (2H+2-a)/(3-a) or ρ_h = (4H-a)/(2-a).
pub fn rho(kind: EquationKind, h: f64, a: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&h) {
        return domain(format!("Hurst index {h} outside [1/2, 1]"));
    }
    if !(a >= 0.0) {
        return domain(format!("exponent a = {a} must be nonnegative"));
    }
    if a >= 2.0 {
        return Err(Error::Dalang(dalang_message(a)));
    }
    Ok(match kind {
        EquationKind::Wave => (2.0 * h + 2.0 - a) / (3.0 - a),
        EquationKind::Heat => (4.0 * h - a) / (2.0 - a),
    })
}

pub fn dalang_message(a: f64) -> String {
    format!("requires a < 2 (a = {a})")
}

/// Classical closed form of c_{α,d}; used only as a test oracle.
pub fn riesz_constant_classical(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    gamma((df - alpha) / 2.0) / (PI.powf(df / 2.0) * 2f64.powf(alpha) * gamma(alpha / 2.0))
}

/// Pins c in |x|^{-α} = 𝔉(c |ξ|^{α-d}) by pairing both sides against a
/// standard Gaussian: E|Z|^{-α} for Z ~ N(0, 2I) versus ∫ e^{-|ξ|²} |ξ|^{α-d} dξ.
pub fn riesz_constant(alpha: f64, d: usize) -> Result<f64> {
    check_riesz(alpha, d)?;
    let s = QuadSettings::with_abs_tol(1e-13).with_rel_tol(1e-13);
    let df = d as f64;
    let norm = (4.0 * PI).powf(-df / 2.0);
    let lhs = quad::integrate_power_origin_to_inf(
        |r| norm * (-r * r / 4.0).exp(),
        df - 1.0 - alpha,
        2.0,
        &s,
    )?;
    let rhs = quad::integrate_power_origin_to_inf(|r| (-r * r).exp(), alpha - 1.0, 1.0, &s)?;
    Ok(lhs.value / rhs.value)
}

fn check_riesz(alpha: f64, d: usize) -> Result<()> {
    if d == 0 {
        return domain("dimension must be positive");
    }
    if !(alpha > 0.0 && alpha < d as f64) {
        return domain(format!("Riesz exponent {alpha} outside (0, {d})"));
    }
    Ok(())
}

/// Gaussian test functions for the Riesz pairing check: g = N(0, var_g I),
/// h = N(shift·e₁, var_h I). Nonzero shift is supported for d ∈ {1, 3}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    pub var_g: f64,
    pub var_h: f64,
    pub shift: f64,
}

impl Default for GaussianPair {
    fn default() -> Self {
        Self {
            var_g: 1.0,
            var_h: 1.0,
            shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingCheck {
    pub spatial: f64,
    pub spectral: f64,
    pub residual: f64,
    pub constant: f64,
}

/// |∫∫ g(x)h(y)|x-y|^{-α} dx dy - ∫ 𝔉g conj(𝔉h) dμ_α| using the pinned constant.
pub fn riesz_constant_check(alpha: f64, d: usize, pair: GaussianPair) -> Result<PairingCheck> {
    check_riesz(alpha, d)?;
    if !(pair.var_g > 0.0 && pair.var_h > 0.0) {
        return domain("test-function variances must be positive");
    }
    if pair.shift != 0.0 && !(d == 1 || d == 3) {
        return Err(Error::Unsupported(format!(
            "shifted Gaussian pair in d = {d} (supported for d = 1, 3)"
        )));
    }
    let c = riesz_constant(alpha, d)?;
    let s = QuadSettings::with_abs_tol(1e-12).with_rel_tol(1e-11);
    let v = pair.var_g + pair.var_h;
    let m = pair.shift;
    let df = d as f64;
    // X - Y ~ N(-m e₁, v I); by symmetry the sign of m is irrelevant
    let spatial = if m == 0.0 {
        let norm = sphere_area(d) * (2.0 * PI * v).powf(-df / 2.0);
        quad::integrate_power_origin_to_inf(
            |r| norm * (-r * r / (2.0 * v)).exp(),
            df - 1.0 - alpha,
            2.0 * v.sqrt(),
            &s,
        )?
        .value
    } else if d == 1 {
        let phi = |z: f64| (2.0 * PI * v).powf(-0.5) * (-(z - m).powi(2) / (2.0 * v)).exp();
        let split = m.abs() + 2.0 * v.sqrt();
        quad::integrate_power_origin_to_inf(|r| phi(r) + phi(-r), -alpha, split, &s)?.value
    } else {
        // d = 3: angular average of the shifted Gaussian gives sinh(rm/v)/(rm/v)
        let norm = 4.0 * PI * (2.0 * PI * v).powf(-1.5);
        let split = m.abs() + 2.0 * v.sqrt();
        quad::integrate_power_origin_to_inf(
            |r| {
                let z = r * m / v;
                let shell = if z.abs() < 1e-8 { 1.0 } else { z.sinh() / z };
                norm * (-(r * r + m * m) / (2.0 * v)).exp() * shell
            },
            2.0 - alpha,
            split,
            &s,
        )?
        .value
    };
    let spectral_unit = if m == 0.0 {
        quad::integrate_power_origin_to_inf(
            |r| sphere_area(d) * (-v * r * r / 2.0).exp(),
            alpha - 1.0,
            1.0,
            &s,
        )?
        .value
    } else {
        let ang = |r: f64| -> f64 {
            if d == 1 {
                2.0 * (m * r).cos()
            } else {
                let z = m * r;
                4.0 * PI * if z.abs() < 1e-8 { 1.0 } else { z.sin() / z }
            }
        };
        // oscillatory only through cos/sinc of m r, damped by the Gaussian
        let cut = (40.0 / v).sqrt();
        let head = quad::integrate_power_left(
            |r| ang(r) * (-v * r * r / 2.0).exp(),
            0.0,
            cut,
            alpha - 1.0,
            &s,
        )?;
        head.value
    };
    let spectral = c * spectral_unit;
    Ok(PairingCheck {
        spatial,
        spectral,
        residual: (spatial - spectral).abs(),
        constant: c,
    })
}

impl NoiseSpec {
    pub fn new(hurst: f64, kernel: SpatialKernel, dim: usize) -> Result<Self> {
        Self::with_amplitude(hurst, kernel, dim, 1.0)
    }

    pub fn with_amplitude(
        hurst: f64,
        kernel: SpatialKernel,
        dim: usize,
        amplitude: f64,
    ) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return domain(format!("Hurst index {hurst} must lie strictly inside (1/2, 1)"));
        }
        if dim == 0 {
            return domain("dimension must be positive");
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return domain(format!("amplitude {amplitude} must be positive"));
        }
        let spectral_constant = match &kernel {
            SpatialKernel::Gaussian { length_scale } => {
                if !(*length_scale > 0.0 && length_scale.is_finite()) {
                    return domain(format!("length scale {length_scale} must be positive"));
                }
                1.0
            }
            SpatialKernel::Riesz { alpha } => riesz_constant(*alpha, dim)?,
            SpatialKernel::ProductFractional { alphas } => {
                if alphas.len() != dim {
                    return domain(format!(
                        "product kernel needs {dim} exponents, got {}",
                        alphas.len()
                    ));
                }
                let mut c = 1.0;
                for &a in alphas {
                    if !(a > 0.0 && a < 1.0) {
                        return domain(format!("product exponent {a} outside (0, 1)"));
                    }
                    c *= riesz_constant(a, 1)?;
                }
                c
            }
            SpatialKernel::WhiteSpace => {
                if dim != 1 {
                    return domain("white-in-space noise requires d = 1");
                }
                1.0
            }
        };
        Ok(Self {
            hurst,
            kernel,
            dim,
            amplitude,
            spectral_constant,
        })
    }

    /// Riesz(a) kernel in d = 1 with μ_a(dξ) = (2π)^{-1} |ξ|^{a-1} dξ.
    pub fn riesz_family(hurst: f64, a: f64) -> Result<Self> {
        let c = riesz_constant(a, 1)?;
        Self::with_amplitude(
            hurst,
            SpatialKernel::Riesz { alpha: a },
            1,
            1.0 / (2.0 * PI * c),
        )
    }

    /// White noise with μ = (2π)^{-1} dξ, i.e. f = δ₀ under f = 𝔉μ;
    /// the limit of [`NoiseSpec::riesz_family`] as a → 1.
    pub fn white_delta(hurst: f64) -> Result<Self> {
        Self::with_amplitude(hurst, SpatialKernel::WhiteSpace, 1, 1.0 / (2.0 * PI))
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
    pub fn kernel(&self) -> &SpatialKernel {
        &self.kernel
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn spectral_constant(&self) -> f64 {
        self.spectral_constant
    }
    pub fn alpha_h(&self) -> f64 {
        self.hurst * (2.0 * self.hurst - 1.0)
    }
    pub fn temporal(&self) -> TemporalKernel {
        TemporalKernel {
            hurst: self.hurst,
            alpha_h: self.alpha_h(),
        }
    }

    /// f(x), or None for the white case.
    pub fn covariance(&self, x: &[f64]) -> Option<f64> {
        let a = self.amplitude;
        match &self.kernel {
            SpatialKernel::Gaussian { length_scale } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Some(a * (-r2 / (2.0 * length_scale * length_scale)).exp())
            }
            SpatialKernel::Riesz { alpha } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Some(a * r2.powf(-alpha / 2.0))
            }
            SpatialKernel::ProductFractional { alphas } => Some(
                a * x
                    .iter()
                    .zip(alphas)
                    .map(|(v, al)| v.abs().powf(-al))
                    .product::<f64>(),
            ),
            SpatialKernel::WhiteSpace => None,
        }
    }

    pub fn has_pointwise_covariance(&self) -> bool {
        !matches!(self.kernel, SpatialKernel::WhiteSpace)
    }

    /// Density of μ with respect to Lebesgue measure.
    pub fn spectral_density(&self, xi: &[f64]) -> f64 {
        let a = self.amplitude * self.spectral_constant;
        let d = self.dim as f64;
        match &self.kernel {
            SpatialKernel::Gaussian { length_scale } => {
                let l2 = length_scale * length_scale;
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                a * (l2 / (2.0 * PI)).powf(d / 2.0) * (-l2 * r2 / 2.0).exp()
            }
            SpatialKernel::Riesz { alpha } => {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                a * r2.powf((alpha - d) / 2.0)
            }
            SpatialKernel::ProductFractional { alphas } => {
                a * xi
                    .iter()
                    .zip(alphas)
                    .map(|(v, al)| v.abs().powf(al - 1.0))
                    .product::<f64>()
            }
            SpatialKernel::WhiteSpace => a,
        }
    }

    /// μ(ℝ^d) when finite.
    pub fn total_mass(&self) -> Option<f64> {
        match self.kernel {
            SpatialKernel::Gaussian { .. } => Some(self.amplitude),
            _ => None,
        }
    }

    /// Scaling exponent a of the spectral measure.
    pub fn exponent_a(&self) -> f64 {
        match &self.kernel {
            SpatialKernel::Gaussian { .. } => 0.0,
            SpatialKernel::Riesz { alpha } => *alpha,
            SpatialKernel::ProductFractional { alphas } => alphas.iter().sum(),
            SpatialKernel::WhiteSpace => 1.0,
        }
    }

    pub fn dalang_holds(&self) -> bool {
        self.exponent_a() < 2.0
    }

    pub fn require_dalang(&self) -> Result<()> {
        if self.dalang_holds() {
            Ok(())
        } else {
            Err(Error::Dalang(dalang_message(self.exponent_a())))
        }
    }

    /// ∫ μ(dξ) / (1 + |ξ-η|²).
    pub fn resolvent(&self, eta: &[f64], s: &QuadSettings) -> Result<f64> {
        self.require_dalang()?;
        if eta.len() != self.dim {
            return domain(format!("η has dimension {}, expected {}", eta.len(), self.dim));
        }
        let amp = self.amplitude * self.spectral_constant;
        let rho = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.kernel {
            SpatialKernel::WhiteSpace => {
                let e = eta[0];
                Ok(amp * quad::integrate_line(|x| 1.0 / (1.0 + (x - e) * (x - e)), &[e], s)?.value)
            }
            SpatialKernel::Gaussian { length_scale } => {
                let l2 = length_scale * length_scale;
                let d = self.dim as f64;
                let norm = amp * (l2 / (2.0 * PI)).powf(d / 2.0);
                if self.dim == 1 {
                    let e = eta[0];
                    let f = |x: f64| norm * (-l2 * x * x / 2.0).exp() / (1.0 + (x - e) * (x - e));
                    Ok(quad::integrate_line(f, &[0.0, e], s)?.value)
                } else {
                    let dim = self.dim;
                    let f = |r: f64| {
                        norm * (-l2 * r * r / 2.0).exp() * r.powi(dim as i32 - 1) * shell_average(dim, r, rho)
                    };
                    let mut br = vec![0.0, rho.max(1e-3)];
                    br.push(rho + 1.0 + 10.0 / length_scale);
                    br.dedup();
                    let head = quad::integrate_breaks(f, &br, s)?;
                    let tail = quad::integrate_to_inf(f, *br.last().unwrap(), s)?;
                    Ok(head.value + tail.value)
                }
            }
            SpatialKernel::Riesz { alpha } => {
                let dim = self.dim;
                if dim == 1 {
                    let e = rho;
                    let g = |r: f64| amp * (1.0 / (1.0 + (r - e) * (r - e)) + 1.0 / (1.0 + (r + e) * (r + e)));
                    Ok(radial_power_integral(g, alpha - 1.0, e, s)?)
                } else {
                    let g = |r: f64| amp * shell_average(dim, r, rho);
                    Ok(radial_power_integral(g, alpha - 1.0, rho, s)?)
                }
            }
            SpatialKernel::ProductFractional { alphas } => {
                if self.dim == 1 {
                    let e = rho;
                    let g = |r: f64| amp * (1.0 / (1.0 + (r - e) * (r - e)) + 1.0 / (1.0 + (r + e) * (r + e)));
                    return radial_power_integral(g, alphas[0] - 1.0, e, s);
                }
                product_resolvent(alphas, eta, s).map(|v| amp * v)
            }
        }
    }
}

// ∫_0^∞ g(r) r^β dr with a peak of g near `peak`.
fn radial_power_integral<F: Fn(f64) -> f64>(g: F, beta: f64, peak: f64, s: &QuadSettings) -> Result<f64> {
    let split = if peak > 0.0 { peak } else { 1.0 };
    let head = quad::integrate_power_left(&g, 0.0, split, beta, s)?;
    let mid = quad::integrate(|r| g(r) * r.powf(beta), split, split + 2.0, s)?;
    let tail = quad::integrate_to_inf(|r| g(r) * r.powf(beta), split + 2.0, s)?;
    Ok(head.value + mid.value + tail.value)
}

// ∫_{S^{d-1}} dσ(ω) / (1 + |rω - η|²) with |η| = ρ.
fn shell_average(d: usize, r: f64, rho: f64) -> f64 {
    let a = 1.0 + r * r + rho * rho;
    let b = 2.0 * r * rho;
    let amb = 1.0 + (r - rho) * (r - rho);
    match d {
        1 => 1.0 / (1.0 + (r - rho).powi(2)) + 1.0 / (1.0 + (r + rho).powi(2)),
        2 => 2.0 * PI / (amb * (a + b)).sqrt(),
        3 => {
            if b < 1e-12 * a {
                4.0 * PI / a
            } else {
                2.0 * PI / b * (2.0 * b / amb).ln_1p()
            }
        }
        _ => {
            let area = sphere_area(d - 1);
            let s = QuadSettings::with_abs_tol(1e-12);
            let v = quad::integrate(
                |th: f64| th.sin().powi(d as i32 - 2) / (a - b * th.cos()),
                0.0,
                PI,
                &s,
            )
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
            area * v
        }
    }
}

// ∫ ∏|ξ_j|^{α_j-1} / (1+|ξ-η|²) dξ via 1/(1+x) = ∫_0^∞ e^{-s(1+x)} ds.
fn product_resolvent(alphas: &[f64], eta: &[f64], s: &QuadSettings) -> Result<f64> {
    let a: f64 = alphas.iter().sum();
    let inner = QuadSettings::with_abs_tol(s.abs_tol * 1e-2).with_rel_tol(1e-10);
    let axis = |sv: f64, al: f64, e: f64| -> f64 {
        let e = e.abs();
        let g = |r: f64| (-sv * (r - e) * (r - e)).exp() + (-sv * (r + e) * (r + e)).exp();
        let width = 8.0 / sv.sqrt();
        let split = e + width;
        let head = quad::integrate_power_left(g, 0.0, split, al - 1.0, &inner);
        let tail = quad::integrate_to_inf(|r| g(r) * r.powf(al - 1.0), split, &inner);
        match (head, tail) {
            (Ok(h), Ok(t)) => h.value + t.value,
            _ => f64::NAN,
        }
    };
    // s^{a/2} ∏ J_j(s) is bounded near s = 0
    let outer = |sv: f64| -> f64 {
        if sv <= 0.0 {
            return 0.0;
        }
        let mut p = (-sv).exp() * sv.powf(a / 2.0);
        for (al, e) in alphas.iter().zip(eta) {
            p *= axis(sv, *al, *e);
        }
        p
    };
    let r = quad::integrate_power_origin_to_inf(outer, -a / 2.0, 1.0, s)?;
    if !r.value.is_finite() {
        return Err(Error::Quadrature {
            value: r.value,
            abs_err: r.abs_err,
            intervals: r.intervals,
        });
    }
    Ok(r.value)
}

/// Search grid for the supremum defining K(μ): η ∈ [-R, R]^d with
/// `points_per_axis` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaGrid {
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl Default for EtaGrid {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            points_per_axis: 41,
        }
    }
}

impl EtaGrid {
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            points_per_axis: 2 * self.points_per_axis - 1,
        }
    }

    fn axis(&self) -> Vec<f64> {
        let p = self.points_per_axis.max(1);
        if p == 1 {
            return vec![0.0];
        }
        (0..p)
            .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (p - 1) as f64)
            .collect()
    }
}

/// Result of the K(μ) search. `value` is a lower bound on the true supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct KMu {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub at_origin: f64,
    pub min_over_grid: f64,
    pub distinct_evaluations: usize,
}

pub fn k_mu(spec: &NoiseSpec, grid: &EtaGrid, s: &QuadSettings) -> Result<KMu> {
    spec.require_dalang()?;
    let d = spec.dim;
    let axis = grid.axis();
    // evaluations keyed by the symmetry class of η
    let radial = !matches!(spec.kernel, SpatialKernel::ProductFractional { .. }) || d == 1;
    let mut cache: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let at_origin = spec.resolvent(&vec![0.0; d], s)?;
    let mut best = (at_origin, vec![0.0; d]);
    let mut worst = at_origin;
    let mut idx = vec![0usize; d];
    loop {
        let eta: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        let key: Vec<u64> = if radial {
            vec![eta.iter().map(|v| v * v).sum::<f64>().to_bits()]
        } else {
            eta.iter().map(|v| v.abs().to_bits()).collect()
        };
        let v = match cache.get(&key) {
            Some(v) => *v,
            None => {
                let v = spec.resolvent(&eta, s)?;
                cache.insert(key, v);
                v
            }
        };
        if v > best.0 {
            best = (v, eta.clone());
        }
        worst = worst.min(v);
        // odometer increment
        let mut k = 0;
        loop {
            if k == d {
                return Ok(KMu {
                    value: best.0,
                    argmax: best.1,
                    at_origin,
                    min_over_grid: worst,
                    distinct_evaluations: cache.len() + 1,
                });
            }
            idx[k] += 1;
            if idx[k] < axis.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// K(μ) on the default grid and on its refinement.
pub fn k_mu_refinement(spec: &NoiseSpec, grid: &EtaGrid, s: &QuadSettings) -> Result<(KMu, KMu)> {
    Ok((k_mu(spec, grid, s)?, k_mu(spec, &grid.refined(), s)?))
}

/// The constant K_w (wave) or K_h (heat) entering the diagonal ψ bounds.
pub fn k_constant(kind: EquationKind, spec: &NoiseSpec) -> Result<f64> {
    spec.require_dalang()?;
    let amp = spec.amplitude;
    match (&spec.kernel, kind) {
        (SpatialKernel::Gaussian { .. }, _) => Ok(amp),
        (SpatialKernel::WhiteSpace, EquationKind::Wave) => Ok(PI * amp),
        (SpatialKernel::WhiteSpace, EquationKind::Heat) => Ok(PI.sqrt() * amp),
        (_, EquationKind::Wave) => {
            Ok(4.0 * k_mu(spec, &EtaGrid::default(), &QuadSettings::default())?.value)
        }
        (_, EquationKind::Heat) => Ok(k_mu(spec, &EtaGrid::default(), &QuadSettings::default())?.value),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DalangVerdict {
    pub holds: bool,
    pub a: f64,
    /// ∫ μ(dξ)/(1+|ξ|²) when finite.
    pub integral: Option<f64>,
    pub message: String,
}

pub fn dalang_check(spec: &NoiseSpec) -> DalangVerdict {
    let a = spec.exponent_a();
    if !spec.dalang_holds() {
        return DalangVerdict {
            holds: false,
            a,
            integral: None,
            message: format!("Dalang's condition fails: {}", dalang_message(a)),
        };
    }
    let integral = spec
        .resolvent(&vec![0.0; spec.dim], &QuadSettings::default())
        .ok();
    DalangVerdict {
        holds: true,
        a,
        integral,
        message: format!("Dalang's condition holds (a = {a} < 2)"),
    }
}
