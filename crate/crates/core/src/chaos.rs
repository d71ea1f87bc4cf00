//! Wiener-chaos evaluation of the second moment.
//!
//! E|u(t,x)|² = w(t)² + Σ_{n≥1} α_n(t)/n!, with
//! α_n(t) = α_H^n ∫_{[0,t]^{2n}} ∏|t_j - s_j|^{2H-2} ψ_n(t, s) dt ds.
//!
//! ψ_n is evaluated on the Fourier side, where the n-fold chain of
//! fundamental solutions telescopes into a product over partial sums of the
//! frequencies, or in physical space by path sampling.

use crate::equation::{EquationKind, InitialData};
use crate::error::{domain, Error, Result};
use crate::estimate::{Method, MomentEstimate};
use crate::fkmc::{PairedTimes, PathBuffers};
use crate::green::{gh_fourier_radial, gw_fourier_radial, ThetaLaw};
use crate::noise::{self, NoiseSpec, SpatialKernel};
use crate::quad::{self, QuadSettings};
use crate::rng::{self, McRng};
use crate::special::{factorial, sphere_area};
use crate::stats::SampleSummary;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChaosMethod {
    FourierMc,
    SpatialMc,
    ClosedForm,
    Quadrature,
}

impl ChaosMethod {
    pub fn name(self) -> &'static str {
        match self {
            ChaosMethod::FourierMc => "fourier-mc",
            ChaosMethod::SpatialMc => "spatial-mc",
            ChaosMethod::ClosedForm => "closed-form",
            ChaosMethod::Quadrature => "quadrature",
        }
    }
}

impl fmt::Display for ChaosMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosTerm {
    pub n: usize,
    pub alpha_n: f64,
    pub stderr: f64,
    pub method: ChaosMethod,
    pub samples: u64,
}

impl ChaosTerm {
    pub const CSV_HEADER: &'static str = "n,alpha_n,stderr,method,samples";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{},{}",
            self.n, self.alpha_n, self.stderr, self.method, self.samples
        )
    }

    /// α_n/n!
    pub fn contribution(&self) -> f64 {
        self.alpha_n / factorial(self.n as u64)
    }
}

/// Diagonal ψ_n for white noise, wave equation, d = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiDiag {
    /// (u0 + t_{ρ(1)} v0)² (πc)^n ∏u_j with t_{ρ(1)} = t - Σu_j
    pub exact: f64,
    /// (u0 + t v0)² (πc)^n ∏u_j
    pub bound: f64,
}

/// `gaps` are u_j = t_{ρ(j+1)} - t_{ρ(j)} (with t_{ρ(n+1)} = t).
pub fn psi_diag_closed(spec: &NoiseSpec, kind: EquationKind, gaps: &[f64], t: f64, init: &InitialData) -> Result<PsiDiag> {
    if kind != EquationKind::Wave || !matches!(spec.kernel(), SpatialKernel::WhiteSpace) {
        return Err(Error::Unsupported(
            "closed-form ψ_n is available for white noise and the wave equation only; use psi_fourier_mc".into(),
        ));
    }
    if gaps.iter().any(|&u| !(u >= 0.0)) {
        return domain("gaps must be nonnegative");
    }
    let total: f64 = gaps.iter().sum();
    if total > t * (1.0 + 1e-12) {
        return domain(format!("gaps sum to {total} > t = {t}"));
    }
    let first = (t - total).max(0.0);
    let core = (PI * spec.amplitude()).powi(gaps.len() as i32) * gaps.iter().product::<f64>();
    Ok(PsiDiag {
        exact: init.w(kind, first).powi(2) * core,
        bound: init.w(kind, t).powi(2) * core,
    })
}

/// Ordered times t_vec → (ρ, gaps u_1..u_n, t_{ρ(1)}).
fn chain(times: &[f64], t: f64) -> (Vec<usize>, Vec<f64>, f64) {
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    let gaps = (0..n)
        .map(|j| {
            let next = if j + 1 < n { times[order[j + 1]] } else { t };
            next - times[order[j]]
        })
        .collect();
    let first = if n > 0 { times[order[0]] } else { t };
    (order, gaps, first)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    /// Draws discarded because f was singular (spatial route only).
    pub resampled: u64,
}

#[derive(Debug, Clone, Copy)]
enum Proposal {
    Gaussian { inv_len: f64, amp: f64 },
    Radial { alpha: f64, r0: f64, nu: f64 },
    Product { r0: f64 },
    // η_j = ξ_ρ(1) + … + ξ_ρ(j) drawn per gap
    WhiteChain { amp: f64 },
}

const P_HEAD: f64 = 0.5;

fn tail_index(alpha: f64) -> f64 {
    (2.0 - alpha).min(1.0).max(0.05)
}

// radial power law on [0, r0] mixed with a Pareto tail
fn draw_radius<R: Rng + ?Sized>(alpha: f64, r0: f64, nu: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    if rng.random::<f64>() < P_HEAD {
        r0 * u.powf(1.0 / alpha)
    } else {
        r0 * u.powf(-1.0 / nu)
    }
}

fn radius_density(alpha: f64, r0: f64, nu: f64, r: f64) -> f64 {
    if r < r0 {
        P_HEAD * alpha * r.powf(alpha - 1.0) / r0.powf(alpha)
    } else {
        (1.0 - P_HEAD) * nu * r0.powf(nu) * r.powf(-nu - 1.0)
    }
}

struct FourierPsi<'a> {
    spec: &'a NoiseSpec,
    kind: EquationKind,
    n: usize,
    d: usize,
    order_t: Vec<usize>,
    gaps_t: Vec<f64>,
    order_s: Vec<usize>,
    gaps_s: Vec<f64>,
    w: f64,
    proposal: Proposal,
}

impl<'a> FourierPsi<'a> {
    fn new(spec: &'a NoiseSpec, kind: EquationKind, tv: &[f64], sv: &[f64], t: f64, init: &InitialData) -> Result<Self> {
        let (order_t, gaps_t, ft) = chain(tv, t);
        let (order_s, gaps_s, fs) = chain(sv, t);
        let n = tv.len();
        let r0 = ((n as f64 + 1.0) / t).clamp(1e-3, 1e3);
        let proposal = match spec.kernel() {
            SpatialKernel::Gaussian { length_scale } => Proposal::Gaussian {
                inv_len: 1.0 / length_scale,
                amp: spec.amplitude(),
            },
            SpatialKernel::Riesz { alpha } => Proposal::Radial {
                alpha: *alpha,
                r0,
                nu: tail_index(*alpha),
            },
            SpatialKernel::ProductFractional { .. } => Proposal::Product { r0 },
            SpatialKernel::WhiteSpace => Proposal::WhiteChain {
                amp: spec.amplitude() * spec.spectral_constant(),
            },
        };
        Ok(Self {
            spec,
            kind,
            n,
            d: spec.dim(),
            order_t,
            gaps_t,
            order_s,
            gaps_s,
            w: init.w(kind, ft) * init.w(kind, fs),
            proposal,
        })
    }

    fn factor(&self, u: f64, r: f64) -> f64 {
        match self.kind {
            EquationKind::Wave => gw_fourier_radial(u, r),
            EquationKind::Heat => gh_fourier_radial(u, r),
        }
    }

    // ∏_j F(u_j, |P_j|) along the given order
    fn side(&self, xi: &[f64], order: &[usize], gaps: &[f64], partial: &mut [f64]) -> f64 {
        partial.iter_mut().for_each(|v| *v = 0.0);
        let d = self.d;
        let mut prod = 1.0;
        for (j, &i) in order.iter().enumerate() {
            for c in 0..d {
                partial[c] += xi[i * d + c];
            }
            let r = partial.iter().map(|v| v * v).sum::<f64>().sqrt();
            prod *= self.factor(gaps[j], r);
        }
        prod
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, xi: &mut Vec<f64>, partial: &mut Vec<f64>) -> f64 {
        let (n, d) = (self.n, self.d);
        xi.resize(n * d, 0.0);
        partial.resize(d, 0.0);
        if self.w == 0.0 {
            return 0.0;
        }
        let weight = match self.proposal {
            Proposal::Gaussian { inv_len, amp } => {
                for v in xi.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = z * inv_len;
                }
                amp.powi(n as i32)
            }
            Proposal::Radial { alpha, r0, nu } => {
                let s = sphere_area(d);
                let mut wgt = 1.0;
                for i in 0..n {
                    let r = draw_radius(alpha, r0, nu, rng);
                    let dir = &mut xi[i * d..(i + 1) * d];
                    random_direction(rng, dir);
                    dir.iter_mut().for_each(|v| *v *= r);
                    let q = radius_density(alpha, r0, nu, r) / (s * r.powi(d as i32 - 1));
                    wgt *= self.spec.spectral_density(dir) / q;
                }
                wgt
            }
            Proposal::Product { r0 } => {
                let alphas = match self.spec.kernel() {
                    SpatialKernel::ProductFractional { alphas } => alphas,
                    _ => unreachable!(),
                };
                let mut wgt = 1.0;
                for i in 0..n {
                    let mut q = 1.0;
                    for c in 0..d {
                        let al = alphas[c];
                        let nu = tail_index(al);
                        let r = draw_radius(al, r0, nu, rng);
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        xi[i * d + c] = sign * r;
                        q *= radius_density(al, r0, nu, r) / 2.0;
                    }
                    wgt *= self.spec.spectral_density(&xi[i * d..(i + 1) * d]) / q;
                }
                wgt
            }
            Proposal::WhiteChain { amp } => {
                let mut wgt = 1.0;
                let mut prev = 0.0;
                for j in 0..n {
                    let u = self.gaps_t[j];
                    let (eta, q) = match self.kind {
                        EquationKind::Wave => {
                            if u == 0.0 {
                                return 0.0;
                            }
                            let sc = 1.0 / u;
                            let c: f64 = (PI * (rng.random::<f64>() - 0.5)).tan();
                            let eta = sc * c;
                            (eta, 1.0 / (PI * sc * (1.0 + c * c)))
                        }
                        EquationKind::Heat => {
                            let sd = 1.0 / u.max(1e-300).sqrt();
                            let z: f64 = StandardNormal.sample(rng);
                            (sd * z, (-z * z / 2.0).exp() / (sd * (2.0 * PI).sqrt()))
                        }
                    };
                    xi[self.order_t[j]] = eta - prev;
                    prev = eta;
                    wgt *= amp / q;
                }
                wgt
            }
        };
        let a = self.side(xi, &self.order_t, &self.gaps_t, partial);
        let b = self.side(xi, &self.order_s, &self.gaps_s, partial);
        self.w * weight * (a * b)
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = z;
            n2 += z * z;
        }
        if n2 > 1e-300 {
            let n = n2.sqrt();
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

fn check_times(spec: &NoiseSpec, tv: &[f64], sv: &[f64], t: f64) -> Result<()> {
    spec.require_dalang()?;
    if tv.len() != sv.len() || tv.is_empty() {
        return domain("time vectors must be nonempty and of equal length");
    }
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time {t} must be finite and nonnegative"));
    }
    if tv.iter().chain(sv).any(|&v| !(v >= 0.0 && v <= t)) {
        return domain(format!("times must lie in [0, {t}]"));
    }
    Ok(())
}

fn summarize(values: &[f64], resampled: u64) -> PsiEstimate {
    let s = SampleSummary::from_slice(values);
    PsiEstimate {
        value: s.mean,
        stderr: s.stderr,
        samples: values.len() as u64,
        resampled,
    }
}

/// Monte-Carlo estimate of ψ_n(t_vec, s_vec) from its spectral integral.
#[allow(clippy::too_many_arguments)]
pub fn psi_fourier_mc(
    spec: &NoiseSpec,
    kind: EquationKind,
    t_vec: &[f64],
    s_vec: &[f64],
    t: f64,
    init: &InitialData,
    n_samples: usize,
    seed: u64,
) -> Result<PsiEstimate> {
    check_times(spec, t_vec, s_vec, t)?;
    let ev = FourierPsi::new(spec, kind, t_vec, s_vec, t, init)?;
    let mut r = rng::substream(seed, &[rng::domain::PSI, 0]);
    let (mut xi, mut partial) = (Vec::new(), Vec::new());
    let values: Vec<f64> = (0..n_samples).map(|_| ev.sample(&mut r, &mut xi, &mut partial)).collect();
    Ok(summarize(&values, 0))
}

/// Monte-Carlo estimate of ψ_n(t_vec, s_vec) by sampling the two
/// backward paths and averaging base·∏f(X¹ - X²).
#[allow(clippy::too_many_arguments)]
pub fn psi_spatial_mc(
    spec: &NoiseSpec,
    kind: EquationKind,
    t_vec: &[f64],
    s_vec: &[f64],
    t: f64,
    init: &InitialData,
    n_samples: usize,
    seed: u64,
) -> Result<PsiEstimate> {
    check_times(spec, t_vec, s_vec, t)?;
    if !spec.has_pointwise_covariance() {
        return Err(Error::Unsupported(
            "white-in-space noise has no pointwise covariance; use psi_fourier_mc".into(),
        ));
    }
    let law = ThetaLaw::for_equation(kind, spec.dim())?;
    let a: Vec<f64> = t_vec.iter().map(|v| t - v).collect();
    let b: Vec<f64> = s_vec.iter().map(|v| t - v).collect();
    let pt = PairedTimes::new(kind, init, t, &a, &b);
    let x = vec![0.0; spec.dim()];
    let mut r = rng::substream(seed, &[rng::domain::PSI, 1]);
    let mut buf = PathBuffers::default();
    let mut resampled = 0;
    let values: Vec<f64> = (0..n_samples)
        .map(|_| {
            let (v, s) = pt.sample(spec, law, &x, &mut r, &mut buf);
            resampled += s;
            v
        })
        .collect();
    if resampled > 0 {
        log::warn!("{resampled} path draws hit the covariance singularity and were resampled");
    }
    Ok(summarize(&values, resampled))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosBudget {
    /// Outer samples of the time pairs.
    pub outer_samples: usize,
    /// Inner ψ samples per outer sample.
    pub inner_samples: usize,
    /// Use deterministic quadrature for α_1 when available (d = 1).
    pub quadrature_first_term: bool,
}

impl Default for ChaosBudget {
    fn default() -> Self {
        Self {
            outer_samples: 20_000,
            inner_samples: 64,
            quadrature_first_term: true,
        }
    }
}

const MAX_ORDER: usize = 40;

fn check_budget(n: usize, b: &ChaosBudget) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::Budget(format!(
            "chaos order {n} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    let need = 8 * n.max(1);
    if b.outer_samples < need || b.inner_samples == 0 {
        return Err(Error::Budget(format!(
            "order {n} needs at least {need} outer samples and 1 inner sample; use outer_samples >= {need}"
        )));
    }
    Ok(())
}

/// α_n(t) by nested Monte Carlo: time pairs from the density ∝ |t-s|^{2H-2}
/// (normaliser t^{2H}/α_H per pair), ψ_n averaged over `inner_samples`.
#[allow(clippy::too_many_arguments)]
pub fn alpha_n_mc(
    spec: &NoiseSpec,
    kind: EquationKind,
    n: usize,
    t: f64,
    init: &InitialData,
    budget: &ChaosBudget,
    route: ChaosMethod,
    seed: u64,
) -> Result<ChaosTerm> {
    if n == 0 {
        return domain("α_n is defined for n ≥ 1; the n = 0 term is w(t)²");
    }
    spec.require_dalang()?;
    check_budget(n, budget)?;
    if t == 0.0 {
        return Ok(ChaosTerm {
            n,
            alpha_n: 0.0,
            stderr: 0.0,
            method: route,
            samples: 0,
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time {t} must be finite and nonnegative"));
    }
    let law = match route {
        ChaosMethod::FourierMc => None,
        ChaosMethod::SpatialMc => {
            if !spec.has_pointwise_covariance() {
                return Err(Error::Unsupported("spatial route needs a pointwise covariance".into()));
            }
            Some(ThetaLaw::for_equation(kind, spec.dim())?)
        }
        other => return Err(Error::Unsupported(format!("{other} is not a Monte-Carlo route"))),
    };
    let temporal = spec.temporal();
    let scale = t.powf(2.0 * spec.hurst() * n as f64);
    let m = budget.inner_samples;
    let x = vec![0.0; spec.dim()];
    let outer: Vec<f64> = (0..budget.outer_samples)
        .into_par_iter()
        .map_init(
            || (PathBuffers::default(), Vec::new(), Vec::new()),
            |(buf, xi, partial), i| -> Result<f64> {
                let mut r: McRng = rng::substream(seed, &[rng::domain::CHAOS_OUTER, n as u64, i as u64]);
                let pairs: Vec<(f64, f64)> = (0..n).map(|_| temporal.sample_pair(t, &mut r)).collect();
                let tv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let sv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let mut acc = 0.0;
                match law {
                    None => {
                        let ev = FourierPsi::new(spec, kind, &tv, &sv, t, init)?;
                        for _ in 0..m {
                            acc += ev.sample(&mut r, xi, partial);
                        }
                    }
                    Some(law) => {
                        let a: Vec<f64> = tv.iter().map(|v| t - v).collect();
                        let b: Vec<f64> = sv.iter().map(|v| t - v).collect();
                        let pt = PairedTimes::new(kind, init, t, &a, &b);
                        for _ in 0..m {
                            acc += pt.sample(spec, law, &x, &mut r, buf).0;
                        }
                    }
                }
                Ok(scale * acc / m as f64)
            },
        )
        .collect::<Result<Vec<f64>>>()?;
    let s = SampleSummary::from_slice(&outer);
    if !s.mean.is_finite() {
        return Err(Error::Internal(format!("non-finite α_{n} estimate")));
    }
    Ok(ChaosTerm {
        n,
        alpha_n: s.mean,
        stderr: s.stderr,
        method: route,
        samples: (budget.outer_samples * m) as u64,
    })
}

/// α_n(t) by the Fourier route.
pub fn alpha_n(
    spec: &NoiseSpec,
    kind: EquationKind,
    n: usize,
    t: f64,
    init: &InitialData,
    budget: &ChaosBudget,
    seed: u64,
) -> Result<ChaosTerm> {
    alpha_n_mc(spec, kind, n, t, init, budget, ChaosMethod::FourierMc, seed)
}

/// ψ_1(t1, s1) in d = 1 by quadrature in physical space.
///
/// Wave: G(u,·) = ½1_{[-u,u]}, so ψ_1 = w(t1)w(s1)·¼∫(1_U * 1_V)(z) f(z) dz.
/// Heat: ψ_1 = u0² E f(Z), Z ~ N(0, U+V). White noise uses f = 2πc·δ₀.
pub fn psi_1_quadrature(
    spec: &NoiseSpec,
    kind: EquationKind,
    t1: f64,
    s1: f64,
    t: f64,
    init: &InitialData,
    qs: &QuadSettings,
) -> Result<f64> {
    if spec.dim() != 1 {
        return Err(Error::Unsupported("ψ_1 quadrature is implemented for d = 1".into()));
    }
    check_times(spec, &[t1], &[s1], t)?;
    let (u, v) = (t - t1, t - s1);
    let ww = init.w(kind, t1) * init.w(kind, s1);
    if ww == 0.0 {
        return Ok(0.0);
    }
    let beta = match spec.kernel() {
        SpatialKernel::Gaussian { .. } => 0.0,
        SpatialKernel::Riesz { alpha } => -alpha,
        SpatialKernel::ProductFractional { alphas } => -alphas[0],
        SpatialKernel::WhiteSpace => {
            let c = spec.amplitude() * spec.spectral_constant();
            return Ok(match kind {
                EquationKind::Wave => ww * PI * c * u.min(v),
                EquationKind::Heat => ww * c * (2.0 * PI / (u + v)).sqrt(),
            });
        }
    };
    // f(z) = g(z) z^beta on z > 0; g is kept free of the singular factor
    let amp = spec.amplitude();
    let g = |z: f64| if beta == 0.0 { spec.covariance(&[z]).unwrap() } else { amp };
    match kind {
        EquationKind::Wave => {
            if u == 0.0 || v == 0.0 {
                return Ok(0.0);
            }
            let total = u + v;
            let dd = (u - v).abs();
            let m = u.min(v);
            let overlap = move |z: f64| if z <= dd { 2.0 * m } else { total - z };
            let split = dd.max(total * 1e-3).min(total);
            let head = quad::integrate_power_left(|z| overlap(z) * g(z), 0.0, split, beta, qs)?;
            let tail = quad::integrate(|z| overlap(z) * g(z) * z.powf(beta), split, total, qs)?;
            // ¼ · 2∫_0^∞ by symmetry of the overlap and f
            Ok(ww * 0.5 * (head.value + tail.value))
        }
        EquationKind::Heat => {
            let var = u + v;
            if var == 0.0 {
                return Err(Error::Domain("ψ_1 diverges when both times equal t".into()));
            }
            let dens = |z: f64| (-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            let r = quad::integrate_power_origin_to_inf(|z| g(z) * dens(z), beta, var.sqrt(), qs)?;
            Ok(ww * 2.0 * r.value)
        }
    }
}

/// α_1(t) in d = 1 by nested deterministic quadrature:
/// α_1 = 2α_H ∫_0^t dV ∫_0^{t-V} δ^{2H-2} ψ_1(t-V-δ, t-V) dδ.
pub fn alpha_1_quadrature(spec: &NoiseSpec, kind: EquationKind, t: f64, init: &InitialData) -> Result<ChaosTerm> {
    spec.require_dalang()?;
    if spec.dim() != 1 {
        return Err(Error::Unsupported("α_1 quadrature is implemented for d = 1".into()));
    }
    let done = |v: f64, e: u64| ChaosTerm {
        n: 1,
        alpha_n: v,
        stderr: 0.0,
        method: ChaosMethod::Quadrature,
        samples: e,
    };
    if t == 0.0 {
        return Ok(done(0.0, 0));
    }
    let h = spec.hurst();
    let beta = 2.0 * h - 2.0;
    let inner_qs = QuadSettings::with_abs_tol(1e-11).with_rel_tol(1e-9);
    let mid_qs = QuadSettings::with_abs_tol(1e-10).with_rel_tol(1e-8);
    let outer_qs = QuadSettings::with_abs_tol(1e-9).with_rel_tol(1e-7);
    let evals = std::cell::Cell::new(0u64);
    let err = std::cell::RefCell::new(None);
    let inner = |vv: f64| -> f64 {
        let r = quad::integrate_power_left(
            |dl| {
                let uu = (vv + dl).min(t);
                match psi_1_quadrature(spec, kind, t - uu, t - vv, t, init, &inner_qs) {
                    Ok(p) => p,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            t - vv,
            beta,
            &mid_qs,
        );
        match r {
            Ok(r) => {
                evals.set(evals.get() + r.evaluations as u64);
                r.value
            }
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    // the heat white kernel has an integrable (U+V)^{-1/2} corner at V = 0
    let outer = match (kind, spec.kernel()) {
        (EquationKind::Heat, _) => quad::integrate_power_left(|v| inner(v) * v.powf(0.5), 0.0, t, -0.5, &outer_qs)?,
        _ => quad::integrate(inner, 0.0, t, &outer_qs)?,
    };
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(done(2.0 * spec.alpha_h() * outer.value, evals.get()))
}

/// α_{n,a}(t) for the wave equation in d = 1 with μ_a = (2π)^{-1}|ξ|^{a-1}dξ.
/// n = 1 is computed by quadrature, higher orders by the Fourier route.
#[allow(clippy::too_many_arguments)]
pub fn alpha_n_riesz_family(
    hurst: f64,
    a: f64,
    n: usize,
    t: f64,
    init: &InitialData,
    budget: &ChaosBudget,
    seed: u64,
) -> Result<ChaosTerm> {
    if !(a > 0.5 && a < 1.0) {
        return domain(format!("a = {a} must lie in (1/2, 1)"));
    }
    let spec = NoiseSpec::riesz_family(hurst, a)?;
    if n == 1 && budget.quadrature_first_term {
        alpha_1_quadrature(&spec, EquationKind::Wave, t, init)
    } else {
        alpha_n(&spec, EquationKind::Wave, n, t, init, budget, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosMoment {
    pub estimate: MomentEstimate,
    pub w_squared: f64,
    pub terms: Vec<ChaosTerm>,
    /// (α_N/N!)/total
    pub last_term_ratio: f64,
    /// Last two terms each below 0.1% of the total.
    pub converged: bool,
    pub warnings: Vec<String>,
}

const CONVERGENCE_FRACTION: f64 = 1e-3;

/// w(t)² + Σ_{n=1}^{N} α̂_n/n!.
pub fn second_moment_chaos(
    spec: &NoiseSpec,
    kind: EquationKind,
    t: f64,
    init: &InitialData,
    n_trunc: usize,
    budget: &ChaosBudget,
    seed: u64,
) -> Result<ChaosMoment> {
    if n_trunc == 0 {
        return domain("truncation order must be at least 1");
    }
    spec.require_dalang()?;
    check_budget(n_trunc, budget)?;
    let w2 = init.w(kind, t).powi(2);
    let mut terms = Vec::with_capacity(n_trunc);
    for n in 1..=n_trunc {
        let quad_ok = n == 1 && budget.quadrature_first_term && spec.dim() == 1;
        let term = if quad_ok {
            alpha_1_quadrature(spec, kind, t, init)?
        } else {
            alpha_n(spec, kind, n, t, init, budget, seed)?
        };
        terms.push(term);
    }
    let contributions: Vec<f64> = terms.iter().map(|c| c.contribution()).collect();
    let value = w2 + crate::stats::neumaier_sum(contributions.iter().copied());
    let var: f64 = terms
        .iter()
        .map(|c| (c.stderr / factorial(c.n as u64)).powi(2))
        .sum();
    let last = *contributions.last().unwrap();
    let last_term_ratio = if value > 0.0 { last / value } else { 0.0 };
    let converged = n_trunc >= 2
        && contributions[n_trunc - 2..]
            .iter()
            .all(|&c| c < CONVERGENCE_FRACTION * value);
    let mut warnings = Vec::new();
    if n_trunc >= 2 && last >= contributions[n_trunc - 2] && last > 0.0 {
        warnings.push(format!(
            "chaos terms are not decreasing at the tail (α_{n_trunc}/{n_trunc}! = {last:e}); truncation unreliable"
        ));
    }
    if !converged {
        warnings.push(format!(
            "series not converged: last terms exceed {CONVERGENCE_FRACTION:e} of the total (ratio {last_term_ratio:e})"
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let samples = terms.iter().map(|c| c.samples).sum();
    Ok(ChaosMoment {
        estimate: MomentEstimate {
            value,
            stderr: var.sqrt(),
            method: Method::Chaos,
            seed,
            samples,
            strata: Vec::new(),
        },
        w_squared: w2,
        terms,
        last_term_ratio,
        converged,
        warnings,
    })
}

/// The diagonal bound with K computed once, for repeated evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagBound {
    pub kind: EquationKind,
    pub k: f64,
    pub a: f64,
    pub init: InitialData,
}

impl DiagBound {
    pub fn new(spec: &NoiseSpec, kind: EquationKind, init: &InitialData) -> Result<Self> {
        Ok(Self {
            kind,
            k: noise::k_constant(kind, spec)?,
            a: spec.exponent_a(),
            init: *init,
        })
    }

    /// (u0+tv0)² K_w^n ∏u_j^{2-a} (wave) or u0² K_h^n ∏u_j^{-a/2} (heat).
    pub fn eval(&self, gaps: &[f64], t: f64) -> f64 {
        let n = gaps.len() as i32;
        let a = self.a;
        match self.kind {
            EquationKind::Wave => {
                self.init.w(self.kind, t).powi(2) * self.k.powi(n) * gaps.iter().map(|u| u.powf(2.0 - a)).product::<f64>()
            }
            EquationKind::Heat => {
                self.init.u0.powi(2) * self.k.powi(n) * gaps.iter().map(|u| u.powf(-a / 2.0)).product::<f64>()
            }
        }
    }
}

pub fn psi_diag_bound(spec: &NoiseSpec, kind: EquationKind, gaps: &[f64], t: f64, init: &InitialData) -> Result<f64> {
    Ok(DiagBound::new(spec, kind, init)?.eval(gaps, t))
}

/// Times t_{ρ(1)} < … < t_{ρ(n)} realising the given gaps (last gap ends at t).
pub fn times_from_gaps(gaps: &[f64], t: f64) -> Vec<f64> {
    let total: f64 = gaps.iter().sum();
    let mut cur = t - total;
    gaps.iter()
        .map(|g| {
            let v = cur;
            cur += g;
            v
        })
        .collect()
}
