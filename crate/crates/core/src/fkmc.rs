//! Feynman–Kac estimator of E|u(t,x)|² over planar Poisson configurations.
//!
//! Points (T_i, S_i) live in [0,t]². Sorting the T's gives the jump times of
//! the path X¹, sorting the S's those of X². The estimator is stratified by
//! the number of points k:
//!
//! E|u|² = w(t)² + Σ_{k≥1} t^{2k}/k! · E_unif[ weight of a k-point configuration ].
//!
//! The stratified form is algebraically the Poisson representation with the
//! e^{t²} prefactor cancelled against the Poisson probabilities.

use crate::equation::{EquationKind, InitialData};
use crate::error::{domain, Error, Result};
use crate::estimate::{Method, MomentEstimate, Stratum};
use crate::green::ThetaLaw;
use crate::noise::{self, NoiseSpec};
use crate::rng::{self, McRng};
use crate::special::{ln_factorial, ln_gamma};
use crate::stats::SampleSummary;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

/// Points of a planar Poisson configuration restricted to [0,t]².
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    pub horizon: f64,
    pub points: Vec<(f64, f64)>,
    /// Degenerate draws (ties, points on the diagonal) that were resampled.
    pub rejections: u64,
}

impl PointConfiguration {
    pub fn new(horizon: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        if !(horizon > 0.0) {
            return domain(format!("horizon {horizon} must be positive"));
        }
        for &(a, b) in &points {
            if !(a > 0.0 && a < horizon && b > 0.0 && b < horizon) {
                return domain(format!("point ({a}, {b}) outside (0, {horizon})²"));
            }
        }
        if is_degenerate(&points) {
            return domain("configuration has tied coordinates or a point on the diagonal");
        }
        Ok(Self {
            horizon,
            points,
            rejections: 0,
        })
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }
}

fn is_degenerate(points: &[(f64, f64)]) -> bool {
    if points.iter().any(|&(a, b)| a == b) {
        return true;
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut ss: Vec<f64> = points.iter().map(|p| p.1).collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    ss.sort_by(|a, b| a.total_cmp(b));
    ts.windows(2).any(|w| w[0] == w[1]) || ss.windows(2).any(|w| w[0] == w[1])
}

fn open_uniform<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    loop {
        let v = t * rng.random::<f64>();
        if v > 0.0 {
            return v;
        }
    }
}

/// k points i.i.d. uniform on [0,t]², conditioned away from degenerate events.
pub fn sample_uniform_configuration<R: Rng + ?Sized>(t: f64, k: usize, rng: &mut R) -> PointConfiguration {
    let mut rejections = 0;
    loop {
        let points: Vec<(f64, f64)> = (0..k)
            .map(|_| (open_uniform(t, rng), open_uniform(t, rng)))
            .collect();
        if !is_degenerate(&points) {
            if rejections > 0 {
                log::warn!("resampled {rejections} degenerate configuration(s) at k = {k}");
            }
            return PointConfiguration {
                horizon: t,
                points,
                rejections,
            };
        }
        rejections += 1;
    }
}

/// A Poisson(t²) number of uniform points on [0,t]².
pub fn sample_configuration<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<PointConfiguration> {
    if !(t > 0.0) {
        return domain(format!("horizon {t} must be positive"));
    }
    let k = Poisson::new(t * t)
        .map_err(|e| Error::Domain(format!("Poisson rate: {e}")))?
        .sample(rng) as usize;
    Ok(sample_uniform_configuration(t, k, rng))
}

/// Sorted jump times of the two paths and the permutations back to points.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedGaps {
    pub horizon: f64,
    /// 0 = τ₀ < τ₁ < … < τ_k < τ_{k+1} = t
    pub tau: Vec<f64>,
    pub tau_prime: Vec<f64>,
    /// perm_t[j] = index of the point whose T is the (j+1)-th smallest.
    pub perm_t: Vec<usize>,
    pub perm_s: Vec<usize>,
}

impl OrderedGaps {
    pub fn k(&self) -> usize {
        self.perm_t.len()
    }

    /// τ_j - τ_{j-1}, j = 1..=k+1.
    pub fn gaps_t(&self) -> Vec<f64> {
        self.tau.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn gaps_s(&self) -> Vec<f64> {
        self.tau_prime.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Position (1..=k) of point i in the sorted T order.
    pub fn rank_t(&self) -> Vec<usize> {
        inverse_rank(&self.perm_t)
    }

    pub fn rank_s(&self) -> Vec<usize> {
        inverse_rank(&self.perm_s)
    }
}

fn inverse_rank(perm: &[usize]) -> Vec<usize> {
    let mut r = vec![0; perm.len()];
    for (j, &i) in perm.iter().enumerate() {
        r[i] = j + 1;
    }
    r
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

pub fn order_gaps(config: &PointConfiguration) -> Result<OrderedGaps> {
    let t = config.horizon;
    let ts: Vec<f64> = config.points.iter().map(|p| p.0).collect();
    let ss: Vec<f64> = config.points.iter().map(|p| p.1).collect();
    let perm_t = argsort(&ts);
    let perm_s = argsort(&ss);
    let mut tau = vec![0.0];
    tau.extend(perm_t.iter().map(|&i| ts[i]));
    tau.push(t);
    let mut tau_prime = vec![0.0];
    tau_prime.extend(perm_s.iter().map(|&i| ss[i]));
    tau_prime.push(t);
    for w in tau.windows(2).chain(tau_prime.windows(2)) {
        if !(w[1] > w[0]) {
            return Err(Error::Internal(format!(
                "non-positive gap [{}, {}] in a validated configuration",
                w[0], w[1]
            )));
        }
    }
    Ok(OrderedGaps {
        horizon: t,
        tau,
        tau_prime,
        perm_t,
        perm_s,
    })
}

/// A piecewise path: X_{τ_j} = X_{τ_{j-1}} + δ(τ_j - τ_{j-1}) Θ_j with
/// δ(u) = u (wave) or √u (heat), started at x.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    kind: EquationKind,
    dim: usize,
    knots: Vec<f64>,
    positions: Vec<f64>,
    theta: Vec<f64>,
}

fn step_scale(kind: EquationKind, gap: f64) -> f64 {
    match kind {
        EquationKind::Wave => gap,
        EquationKind::Heat => gap.sqrt(),
    }
}

impl Path {
    /// `knots` = (τ₀, …, τ_m); `theta` holds at least m draws of dimension
    /// `x.len()`, one per gap.
    pub fn new(kind: EquationKind, knots: &[f64], theta: &[f64], x: &[f64]) -> Result<Self> {
        let d = x.len();
        if d == 0 || knots.is_empty() {
            return domain("path needs a start point and at least one knot");
        }
        let m = knots.len() - 1;
        if theta.len() < m * d || theta.len() % d != 0 {
            return domain(format!("need {m} displacement draws of dimension {d}"));
        }
        let mut positions = Vec::with_capacity((m + 1) * d);
        positions.extend_from_slice(x);
        for j in 1..=m {
            let gap = knots[j] - knots[j - 1];
            if gap < 0.0 {
                return domain("knots must be nondecreasing");
            }
            let sc = step_scale(kind, gap);
            for c in 0..d {
                let prev = positions[(j - 1) * d + c];
                positions.push(prev + sc * theta[(j - 1) * d + c]);
            }
        }
        Ok(Self {
            kind,
            dim: d,
            knots: knots.to_vec(),
            positions,
            theta: theta.to_vec(),
        })
    }

    pub fn at_knot(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }

    /// Position at an arbitrary time, interpolating inside the containing gap.
    pub fn position(&self, s: f64) -> Result<Vec<f64>> {
        let first = self.knots[0];
        let draws = self.theta.len() / self.dim;
        let last_covered = if draws >= self.knots.len() {
            f64::INFINITY
        } else {
            *self.knots.last().unwrap()
        };
        if !(s >= first && s <= last_covered) {
            return domain(format!("query time {s} outside the path's range"));
        }
        // last knot τ_i ≤ s
        let i = match self.knots.iter().rposition(|&k| k <= s) {
            Some(i) => i,
            None => 0,
        };
        if i == self.knots.len() - 1 && s == self.knots[i] {
            return Ok(self.at_knot(i).to_vec());
        }
        if i >= draws {
            return domain(format!("no displacement draw covers time {s}"));
        }
        let sc = step_scale(self.kind, s - self.knots[i]);
        Ok((0..self.dim)
            .map(|c| self.positions[i * self.dim + c] + sc * self.theta[i * self.dim + c])
            .collect())
    }
}

/// Both paths plus their positions read at each point's own coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub x1: Path,
    pub x2: Path,
    /// X¹ at T_i, indexed by point.
    pub x1_at_points: Vec<Vec<f64>>,
    /// X² at S_i, indexed by point.
    pub x2_at_points: Vec<Vec<f64>>,
}

/// theta1 / theta2 hold k (or k+1) draws each; the (k+1)-th draw is only
/// needed to query positions beyond the last jump.
pub fn build_paths(
    gaps: &OrderedGaps,
    kind: EquationKind,
    theta1: &[f64],
    theta2: &[f64],
    x: &[f64],
) -> Result<Paths> {
    let k = gaps.k();
    let d = x.len();
    let extended = theta1.len() >= (k + 1) * d && theta2.len() >= (k + 1) * d;
    let knots1 = if extended { &gaps.tau[..] } else { &gaps.tau[..=k] };
    let knots2 = if extended {
        &gaps.tau_prime[..]
    } else {
        &gaps.tau_prime[..=k]
    };
    let x1 = Path::new(kind, knots1, theta1, x)?;
    let x2 = Path::new(kind, knots2, theta2, x)?;
    let rt = gaps.rank_t();
    let rs = gaps.rank_s();
    let x1_at_points = (0..k).map(|i| x1.at_knot(rt[i]).to_vec()).collect();
    let x2_at_points = (0..k).map(|i| x2.at_knot(rs[i]).to_vec()).collect();
    Ok(Paths {
        x1,
        x2,
        x1_at_points,
        x2_at_points,
    })
}

/// Cone with vertex y, axis along x - y and half-angle π/4.
pub fn cone_contains(x: &[f64], y: &[f64], z: &[f64]) -> Result<bool> {
    if x.len() != y.len() || x.len() != z.len() {
        return domain("cone arguments must share a dimension");
    }
    let mut axis2 = 0.0;
    let mut w2 = 0.0;
    let mut dot = 0.0;
    for i in 0..x.len() {
        let a = x[i] - y[i];
        let w = z[i] - y[i];
        axis2 += a * a;
        w2 += w * w;
        dot += a * w;
    }
    if axis2 == 0.0 {
        return domain("cone axis is degenerate (x = y)");
    }
    // angle ≤ π/4  ⇔  dot ≥ 0 and dot² ≥ cos²(π/4)|a|²|w|²
    Ok(dot >= 0.0 && 2.0 * dot * dot >= axis2 * w2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    /// (vertex, estimate, stderr) for each tested vertex.
    pub per_vertex: Vec<(Vec<f64>, f64, f64)>,
}

impl GammaEstimate {
    /// Largest pairwise z-score between vertices.
    pub fn max_vertex_z(&self) -> f64 {
        let mut z: f64 = 0.0;
        for a in &self.per_vertex {
            for b in &self.per_vertex {
                let s = (a.2 * a.2 + b.2 * b.2).sqrt();
                if s > 0.0 {
                    z = z.max((a.1 - b.1).abs() / s);
                }
            }
        }
        z
    }
}

pub fn default_gamma_vertices(d: usize) -> Vec<Vec<f64>> {
    let mut a = vec![0.0; d];
    a[0] = 1.0;
    let mut b = vec![0.0; d];
    b[d - 1] = -2.0;
    let c: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 0.3 } else { -0.7 }).collect();
    vec![a, b, c]
}

/// γ = P(y + Θ₀ ∈ C(0, y)) for the wave displacement law, estimated at
/// each vertex with `samples_per_vertex` draws and pooled.
pub fn gamma_cone(d: usize, samples_per_vertex: usize, seed: u64, vertices: &[Vec<f64>]) -> Result<GammaEstimate> {
    let law = ThetaLaw::for_equation(EquationKind::Wave, d)?;
    if vertices.is_empty() || samples_per_vertex < 2 {
        return domain("need at least one vertex and two samples");
    }
    let origin = vec![0.0; d];
    let mut per_vertex = Vec::new();
    let mut pooled = Vec::with_capacity(vertices.len() * samples_per_vertex);
    for (vi, y) in vertices.iter().enumerate() {
        if y.len() != d || y.iter().all(|v| *v == 0.0) {
            return domain("gamma vertices must be nonzero points of dimension d");
        }
        const CHUNK: usize = 4096;
        let n_chunks = samples_per_vertex.div_ceil(CHUNK);
        let hits: Vec<f64> = (0..n_chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut r = rng::substream(seed, &[rng::domain::GAMMA, d as u64, vi as u64, c as u64]);
                let n = CHUNK.min(samples_per_vertex - c * CHUNK);
                let mut th = vec![0.0; d];
                let mut z = vec![0.0; d];
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    law.draw(&mut r, &mut th);
                    for i in 0..d {
                        z[i] = y[i] + th[i];
                    }
                    let inside = cone_contains(&origin, y, &z).unwrap_or(false);
                    out.push(if inside { 1.0 } else { 0.0 });
                }
                out
            })
            .collect();
        let s = SampleSummary::from_slice(&hits);
        per_vertex.push((y.clone(), s.mean, s.stderr));
        pooled.extend(hits);
    }
    let s = SampleSummary::from_slice(&pooled);
    Ok(GammaEstimate {
        value: s.mean,
        stderr: s.stderr,
        samples: pooled.len(),
        per_vertex,
    })
}

/// Exact γ for the wave displacement law in d ≤ 3.
pub fn gamma_exact(d: usize) -> Option<f64> {
    match d {
        1 => Some(0.5),
        2 => Some(0.25),
        3 => Some((1.0 - std::f64::consts::FRAC_1_SQRT_2) / 2.0),
        _ => None,
    }
}

/// Time-ordered bookkeeping for one pair of time vectors (a_i on the X¹
/// side, b_i on the X² side, both measured from the start of the paths).
#[derive(Debug, Clone)]
pub(crate) struct PairedTimes {
    k: usize,
    scale_a: Vec<f64>,
    scale_b: Vec<f64>,
    rank_a: Vec<usize>,
    rank_b: Vec<usize>,
    /// w·w·∏gaps (wave) or u0² (heat)
    base: f64,
}

impl PairedTimes {
    pub(crate) fn new(kind: EquationKind, init: &InitialData, t: f64, a: &[f64], b: &[f64]) -> Self {
        let k = a.len();
        let pa = argsort(a);
        let pb = argsort(b);
        let mut scale_a = Vec::with_capacity(k);
        let mut scale_b = Vec::with_capacity(k);
        let mut prod = 1.0;
        let mut prev = 0.0;
        for &i in &pa {
            let g = a[i] - prev;
            prev = a[i];
            scale_a.push(step_scale(kind, g));
            prod *= g;
        }
        let last_a = prev;
        prev = 0.0;
        for &i in &pb {
            let g = b[i] - prev;
            prev = b[i];
            scale_b.push(step_scale(kind, g));
            prod *= g;
        }
        let last_b = prev;
        let base = match kind {
            EquationKind::Wave => init.w(kind, t - last_a) * init.w(kind, t - last_b) * prod,
            EquationKind::Heat => init.u0 * init.u0,
        };
        let mut rank_a = vec![0; k];
        for (j, &i) in pa.iter().enumerate() {
            rank_a[i] = j;
        }
        let mut rank_b = vec![0; k];
        for (j, &i) in pb.iter().enumerate() {
            rank_b[i] = j;
        }
        Self {
            k,
            scale_a,
            scale_b,
            rank_a,
            rank_b,
            base,
        }
    }

    /// One Θ-sample of base·∏ f(X¹_{a_i} - X²_{b_i}). Returns the value and
    /// the number of draws discarded because f was singular.
    pub(crate) fn sample<R: Rng + ?Sized>(
        &self,
        spec: &NoiseSpec,
        law: ThetaLaw,
        x: &[f64],
        rng: &mut R,
        buf: &mut PathBuffers,
    ) -> (f64, u64) {
        if self.base == 0.0 {
            return (0.0, 0);
        }
        let d = x.len();
        let k = self.k;
        buf.resize(k, d);
        let mut resampled = 0;
        loop {
            for (pos, scale) in [(&mut buf.p1, &self.scale_a), (&mut buf.p2, &self.scale_b)] {
                for j in 0..k {
                    law.draw(rng, &mut buf.theta);
                    for c in 0..d {
                        let prev = if j == 0 { x[c] } else { pos[(j - 1) * d + c] };
                        pos[j * d + c] = prev + scale[j] * buf.theta[c];
                    }
                }
            }
            let mut prod = self.base;
            let mut singular = false;
            for i in 0..k {
                let ia = self.rank_a[i] * d;
                let ib = self.rank_b[i] * d;
                for c in 0..d {
                    buf.diff[c] = buf.p1[ia + c] - buf.p2[ib + c];
                }
                let f = spec.covariance(&buf.diff).unwrap_or(f64::NAN);
                if !f.is_finite() {
                    singular = true;
                    break;
                }
                prod *= f;
            }
            if !singular {
                return (prod, resampled);
            }
            resampled += 1;
            if resampled > 1000 {
                log::error!("f singular on 1000 consecutive draws; returning 0");
                return (0.0, resampled);
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct PathBuffers {
    p1: Vec<f64>,
    p2: Vec<f64>,
    theta: Vec<f64>,
    diff: Vec<f64>,
}

impl PathBuffers {
    fn resize(&mut self, k: usize, d: usize) {
        self.p1.resize(k * d, 0.0);
        self.p2.resize(k * d, 0.0);
        self.theta.resize(d, 0.0);
        self.diff.resize(d, 0.0);
    }
}

fn check_pointwise(spec: &NoiseSpec) -> Result<()> {
    if !spec.has_pointwise_covariance() {
        return Err(Error::Unsupported(
            "white-in-space noise has no pointwise covariance; use fk_estimate_white_limit".into(),
        ));
    }
    spec.require_dalang()
}

/// One Θ-sample of the configuration weight. `theta1`, `theta2` hold k
/// draws each (dimension d, flattened), consumed in sorted-time order.
#[allow(clippy::too_many_arguments)]
pub fn fk_weight(
    config: &PointConfiguration,
    gaps: &OrderedGaps,
    spec: &NoiseSpec,
    kind: EquationKind,
    init: &InitialData,
    x: &[f64],
    theta1: &[f64],
    theta2: &[f64],
) -> Result<f64> {
    let t = config.horizon;
    let k = config.count();
    if k == 0 {
        let w = init.w(kind, t);
        return Ok(w * w);
    }
    check_pointwise(spec)?;
    if x.len() != spec.dim() {
        return domain("x has the wrong dimension");
    }
    let paths = build_paths(gaps, kind, theta1, theta2, x)?;
    let temporal = spec.temporal();
    let mut w = match kind {
        EquationKind::Wave => {
            let g1: f64 = gaps.gaps_t()[..k].iter().product();
            let g2: f64 = gaps.gaps_s()[..k].iter().product();
            init.w(kind, t - gaps.tau[k]) * init.w(kind, t - gaps.tau_prime[k]) * g1 * g2
        }
        EquationKind::Heat => init.u0 * init.u0,
    };
    for (i, &(ti, si)) in config.points.iter().enumerate() {
        let diff: Vec<f64> = paths.x1_at_points[i]
            .iter()
            .zip(&paths.x2_at_points[i])
            .map(|(a, b)| a - b)
            .collect();
        w *= spec.covariance(&diff).unwrap() * temporal.eval(ti, si);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeProposal {
    /// Configurations uniform on ([0,t]²)^k, weighted by α_H^k ∏|T-S|^{2H-2}.
    /// Heavy-tailed when combined with a singular f.
    Uniform,
    /// Each point drawn from the density ∝ |T-S|^{2H-2}; the default.
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSettings {
    /// None: smallest k with t^{2k}/k! < 1e-10, extended until the tail
    /// bound is below `tail_tolerance`.
    pub k_max: Option<usize>,
    pub configs_per_stratum: usize,
    pub theta_per_config: usize,
    pub tail_tolerance: f64,
    pub time_proposal: TimeProposal,
}

impl Default for FkSettings {
    fn default() -> Self {
        Self {
            k_max: None,
            configs_per_stratum: 20_000,
            theta_per_config: 16,
            tail_tolerance: 1e-6,
            time_proposal: TimeProposal::Singular,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkEstimate {
    pub estimate: MomentEstimate,
    pub k_max: usize,
    /// Bound on the neglected strata k > k_max.
    pub tail_bound: f64,
    /// false when the bound relies on the heuristic heat-gap moment.
    pub tail_bound_rigorous: bool,
    pub singular_resamples: u64,
    pub tie_rejections: u64,
}

fn ln_stratum_weight(t: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        2.0 * k as f64 * t.ln() - ln_factorial(k as u64)
    }
}

/// Bound on the stratum-k contribution t^{2k}/k!·E_unif[weight].
///
/// Wave: ψ_k(t,s) ≤ (u0+tv0)² K_w^k (t/k)^{(2-a)k} by Cauchy–Schwarz and the
/// diagonal bound, and E_unif[α_H^k ∏|T-S|^{2H-2}] = t^{(2H-2)k}.
/// Heat: u0² K_h^k times the Dirichlet moment of ∏u_j^{-a/2} (heuristic:
/// ignores the correlation between gaps and the temporal weight).
fn ln_stratum_bound(kind: EquationKind, k: usize, t: f64, h: f64, a: f64, big_k: f64, init: &InitialData) -> f64 {
    let kf = k as f64;
    let lw = ln_stratum_weight(t, k);
    let temporal = (2.0 * h - 2.0) * kf * t.ln();
    match kind {
        EquationKind::Wave => {
            let w = init.w(kind, t);
            lw + 2.0 * w.ln() + kf * big_k.ln() + (2.0 - a) * kf * (t / kf).ln() + temporal
        }
        EquationKind::Heat => {
            let beta = -a / 2.0;
            // E ∏_{j≤k} u_j^β for (u_1..u_{k+1}) = t·Dirichlet(1,…,1)
            let dir = kf * beta * t.ln() + ln_factorial(k as u64) + kf * ln_gamma(1.0 + beta)
                - ln_gamma(kf + 1.0 + kf * beta);
            lw + 2.0 * init.u0.ln() + kf * big_k.ln() + dir + temporal
        }
    }
}

fn tail_bound(kind: EquationKind, k_max: usize, t: f64, h: f64, a: f64, big_k: f64, init: &InitialData) -> f64 {
    let mut s = 0.0;
    for k in k_max + 1..k_max + 400 {
        let term = ln_stratum_bound(kind, k, t, h, a, big_k, init).exp();
        s += term;
        if term < 1e-300 || (k > k_max + 10 && term < 1e-16 * s) {
            break;
        }
    }
    s
}

pub fn default_k_max(t: f64) -> usize {
    (1..200)
        .find(|&k| ln_stratum_weight(t, k) < (1e-10f64).ln())
        .unwrap_or(200)
}

/// Stratified Feynman–Kac estimate of E|u(t,x)|².
pub fn fk_estimate(
    spec: &NoiseSpec,
    kind: EquationKind,
    t: f64,
    x: &[f64],
    init: &InitialData,
    settings: &FkSettings,
    seed: u64,
) -> Result<FkEstimate> {
    check_pointwise(spec)?;
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time {t} must be finite and nonnegative"));
    }
    if x.len() != spec.dim() {
        return domain(format!("x has dimension {}, expected {}", x.len(), spec.dim()));
    }
    let law = ThetaLaw::for_equation(kind, spec.dim())?;
    let method = match kind {
        EquationKind::Wave => Method::FkWave,
        EquationKind::Heat => Method::FkHeat,
    };
    let w0 = init.w(kind, t);
    let zero = Stratum {
        k: 0,
        poisson_weight: 1.0,
        mean: w0 * w0,
        stderr: 0.0,
        n_configs: 0,
        n_theta: 0,
    };
    if t == 0.0 {
        return Ok(FkEstimate {
            estimate: MomentEstimate::from_strata(method, seed, vec![zero]),
            k_max: 0,
            tail_bound: 0.0,
            tail_bound_rigorous: true,
            singular_resamples: 0,
            tie_rejections: 0,
        });
    }
    if settings.configs_per_stratum < 2 || settings.theta_per_config < 1 {
        return Err(Error::Budget(
            "need at least 2 configurations per stratum and 1 Θ draw per configuration".into(),
        ));
    }
    let h = spec.hurst();
    let a = spec.exponent_a();
    let big_k = noise::k_constant(kind, spec)?;
    let rigorous = kind == EquationKind::Wave;
    let k_max = match settings.k_max {
        Some(k) => {
            let tb = tail_bound(kind, k, t, h, a, big_k, init);
            if tb > settings.tail_tolerance {
                let suggested = (k..400)
                    .find(|&kk| tail_bound(kind, kk, t, h, a, big_k, init) <= settings.tail_tolerance)
                    .unwrap_or(400);
                return Err(Error::Budget(format!(
                    "k_max = {k} leaves a tail bound {tb:e} above tolerance {:e}; use k_max >= {suggested}",
                    settings.tail_tolerance
                )));
            }
            k
        }
        None => {
            let mut k = default_k_max(t);
            while k < 400 && tail_bound(kind, k, t, h, a, big_k, init) > settings.tail_tolerance {
                k += 1;
            }
            k
        }
    };
    let tb = tail_bound(kind, k_max, t, h, a, big_k, init);
    let temporal = spec.temporal();
    let m = settings.theta_per_config;
    let mut strata = vec![zero];
    let mut singular_total = 0;
    let mut ties_total = 0;
    for k in 1..=k_max {
        let per_config: Vec<(f64, u64, u64)> = (0..settings.configs_per_stratum)
            .into_par_iter()
            .map_init(PathBuffers::default, |buf, i| {
                let mut r = rng::substream(seed, &[rng::domain::FK_CONFIG, k as u64, i as u64]);
                let (points, ties, time_factor) = draw_points(settings.time_proposal, &temporal, t, k, &mut r);
                let a_times: Vec<f64> = points.iter().map(|p| p.0).collect();
                let b_times: Vec<f64> = points.iter().map(|p| p.1).collect();
                let pt = PairedTimes::new(kind, init, t, &a_times, &b_times);
                let mut acc = 0.0;
                let mut sing = 0;
                for _ in 0..m {
                    let (v, s) = pt.sample(spec, law, x, &mut r, buf);
                    acc += v;
                    sing += s;
                }
                (time_factor * acc / m as f64, sing, ties)
            })
            .collect();
        let values: Vec<f64> = per_config.iter().map(|v| v.0).collect();
        singular_total += per_config.iter().map(|v| v.1).sum::<u64>();
        ties_total += per_config.iter().map(|v| v.2).sum::<u64>();
        let s = SampleSummary::from_slice(&values);
        strata.push(Stratum {
            k,
            poisson_weight: ln_stratum_weight(t, k).exp(),
            mean: s.mean,
            stderr: s.stderr,
            n_configs: settings.configs_per_stratum,
            n_theta: m,
        });
    }
    if singular_total > 0 {
        log::warn!("{singular_total} Θ draws hit the covariance singularity and were resampled");
    }
    if ties_total > 0 {
        log::warn!("{ties_total} degenerate configurations were resampled");
    }
    Ok(FkEstimate {
        estimate: MomentEstimate::from_strata(method, seed, strata),
        k_max,
        tail_bound: tb,
        tail_bound_rigorous: rigorous,
        singular_resamples: singular_total,
        tie_rejections: ties_total,
    })
}

// Points for one configuration plus the factor converting the proposal to
// E_unif[α_H^k ∏|T-S|^{2H-2} · ...].
fn draw_points(
    proposal: TimeProposal,
    temporal: &noise::TemporalKernel,
    t: f64,
    k: usize,
    r: &mut McRng,
) -> (Vec<(f64, f64)>, u64, f64) {
    match proposal {
        TimeProposal::Uniform => {
            let c = sample_uniform_configuration(t, k, r);
            let f: f64 = c.points.iter().map(|&(a, b)| temporal.eval(a, b)).product();
            (c.points, c.rejections, f)
        }
        TimeProposal::Singular => {
            let mut ties = 0;
            loop {
                let pts: Vec<(f64, f64)> = (0..k).map(|_| temporal.sample_pair(t, r)).collect();
                if !is_degenerate(&pts) && pts.iter().all(|p| p.0 > 0.0 && p.1 > 0.0) {
                    // α_H·(t^{2H}/α_H)/t² per point
                    let f = t.powf((2.0 * temporal.hurst - 2.0) * k as f64);
                    return (pts, ties, f);
                }
                ties += 1;
            }
        }
    }
}

/// Brute-force check of the stratified identity: realise the Poisson
/// configuration on [0,t]² and sum Θ-averaged weights over all point subsets
/// of size ≤ n_max (Mecke's formula gives expectation Σ_{k≤n_max} t^{2k}/k!·E_unif).
pub fn fk_raw_low_order(
    spec: &NoiseSpec,
    kind: EquationKind,
    t: f64,
    init: &InitialData,
    n_max: usize,
    realisations: usize,
    theta_per_subset: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check_pointwise(spec)?;
    if !(1..=2).contains(&n_max) {
        return domain("raw check supports subset sizes 1 and 2");
    }
    let law = ThetaLaw::for_equation(kind, spec.dim())?;
    let temporal = spec.temporal();
    let x = vec![0.0; spec.dim()];
    let w0 = init.w(kind, t);
    let values: Vec<f64> = (0..realisations)
        .into_par_iter()
        .map_init(PathBuffers::default, |buf, i| {
            let mut r = rng::substream(seed, &[rng::domain::FK_CONFIG, u64::MAX, i as u64]);
            let c = sample_configuration(t, &mut r).expect("t > 0 checked by caller");
            let mut subsets: Vec<Vec<usize>> = (0..c.count()).map(|i| vec![i]).collect();
            if n_max == 2 {
                for i in 0..c.count() {
                    for j in i + 1..c.count() {
                        subsets.push(vec![i, j]);
                    }
                }
            }
            let mut total = w0 * w0;
            for sub in subsets {
                let a: Vec<f64> = sub.iter().map(|&i| c.points[i].0).collect();
                let b: Vec<f64> = sub.iter().map(|&i| c.points[i].1).collect();
                let tf: f64 = sub.iter().map(|&i| temporal.eval(c.points[i].0, c.points[i].1)).product();
                let pt = PairedTimes::new(kind, init, t, &a, &b);
                let mut acc = 0.0;
                for _ in 0..theta_per_subset {
                    acc += pt.sample(spec, law, &x, &mut r, buf).0;
                }
                total += tf * acc / theta_per_subset as f64;
            }
            total
        })
        .collect();
    let s = SampleSummary::from_slice(&values);
    let method = match kind {
        EquationKind::Wave => Method::FkWave,
        EquationKind::Heat => Method::FkHeat,
    };
    Ok(MomentEstimate {
        value: s.mean,
        stderr: s.stderr,
        method,
        seed,
        samples: realisations as u64,
        strata: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteLimitReport {
    pub estimates: Vec<(f64, FkEstimate)>,
    /// |E(a_{i+1}) - E(a_i)| with its combined standard error.
    pub successive_differences: Vec<(f64, f64)>,
    /// true when the differences decrease along the sequence.
    pub shrinking: bool,
}

/// fk_estimate for the Riesz(a) family μ_a = (2π)^{-1}|ξ|^{a-1}dξ, d = 1,
/// along an increasing sequence a → 1. Every a uses the same seed.
#[allow(clippy::too_many_arguments)]
pub fn fk_estimate_white_limit(
    kind: EquationKind,
    hurst: f64,
    t: f64,
    x: &[f64],
    init: &InitialData,
    a_sequence: &[f64],
    settings: &FkSettings,
    seed: u64,
) -> Result<WhiteLimitReport> {
    if a_sequence.is_empty() {
        return domain("empty a sequence");
    }
    if a_sequence.iter().any(|&a| !(a > 0.5 && a < 1.0)) {
        return domain("a values must lie in (1/2, 1)");
    }
    if a_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return domain("a sequence must be strictly increasing");
    }
    let mut estimates = Vec::new();
    for &a in a_sequence {
        let spec = NoiseSpec::riesz_family(hurst, a)?;
        estimates.push((a, fk_estimate(&spec, kind, t, x, init, settings, seed)?));
    }
    let successive_differences: Vec<(f64, f64)> = estimates
        .windows(2)
        .map(|w| {
            let (e1, e2) = (&w[0].1.estimate, &w[1].1.estimate);
            (
                (e2.value - e1.value).abs(),
                (e1.stderr.powi(2) + e2.stderr.powi(2)).sqrt(),
            )
        })
        .collect();
    let shrinking = successive_differences.windows(2).all(|w| w[1].0 <= w[0].0);
    Ok(WhiteLimitReport {
        estimates,
        successive_differences,
        shrinking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::SpatialKernel;
    use crate::rng::substream;
    use crate::special::ks_test;
    use proptest::prelude::*;

    fn gauss(d: usize) -> NoiseSpec {
        NoiseSpec::new(0.75, SpatialKernel::Gaussian { length_scale: 1.0 }, d).unwrap()
    }

    #[test]
    fn poisson_count_mean() {
        let mut r = substream(11, &[1]);
        let n = 100_000;
        let t: f64 = 1.5;
        let mean = (0..n)
            .map(|_| sample_configuration(t, &mut r).unwrap().count() as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.25).abs() < 3.0 * (2.25f64 / n as f64).sqrt());
    }

    #[test]
    fn empty_fraction_small_t() {
        let mut r = substream(12, &[1]);
        let n = 100_000;
        let empty = (0..n)
            .filter(|_| sample_configuration(0.1, &mut r).unwrap().count() == 0)
            .count() as f64
            / n as f64;
        let p = (-0.01f64).exp();
        assert!((empty - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn conditional_uniformity() {
        let mut r = substream(13, &[1]);
        let t = 1.5;
        let mut pooled = Vec::new();
        for _ in 0..2000 {
            let c = sample_uniform_configuration(t, 3, &mut r);
            for (a, b) in c.points {
                pooled.push(a);
                pooled.push(b);
            }
        }
        let ks = ks_test(&pooled, |x| (x / t).clamp(0.0, 1.0));
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn order_gaps_example() {
        let c = PointConfiguration::new(1.0, vec![(0.3, 0.8), (0.7, 0.2)]).unwrap();
        let g = order_gaps(&c).unwrap();
        assert_eq!(g.tau, vec![0.0, 0.3, 0.7, 1.0]);
        assert_eq!(g.tau_prime, vec![0.0, 0.2, 0.8, 1.0]);
        assert_eq!(g.perm_t, vec![0, 1]);
        assert_eq!(g.perm_s, vec![1, 0]);
        let c0 = PointConfiguration::new(1.0, vec![]).unwrap();
        let g0 = order_gaps(&c0).unwrap();
        assert_eq!(g0.gaps_t(), vec![1.0]);
        assert_eq!(g0.gaps_s(), vec![1.0]);
    }

    #[test]
    fn configuration_guards() {
        assert!(PointConfiguration::new(1.0, vec![(0.3, 0.3)]).is_err());
        assert!(PointConfiguration::new(1.0, vec![(0.3, 0.1), (0.3, 0.2)]).is_err());
        assert!(PointConfiguration::new(1.0, vec![(1.3, 0.1)]).is_err());
    }

    #[test]
    fn path_examples() {
        let c = PointConfiguration::new(1.0, vec![(0.5, 0.25)]).unwrap();
        let g = order_gaps(&c).unwrap();
        let p = build_paths(&g, EquationKind::Wave, &[0.8], &[-0.4], &[0.0]).unwrap();
        assert_eq!(p.x1_at_points[0], vec![0.5 * 0.8]);
        let c = PointConfiguration::new(1.0, vec![(0.25, 0.5)]).unwrap();
        let g = order_gaps(&c).unwrap();
        let p = build_paths(&g, EquationKind::Heat, &[1.3], &[0.2], &[0.0]).unwrap();
        assert_eq!(p.x1_at_points[0], vec![0.5 * 1.3]);
    }

    #[test]
    fn path_continuity_and_interpolation() {
        let knots = [0.0, 0.2, 0.5, 1.0];
        let theta = [0.3, -0.9, 0.4];
        let p = Path::new(EquationKind::Wave, &knots, &theta, &[1.0]).unwrap();
        for j in 1..knots.len() {
            // position at τ_j computed from gap j-1 equals the stored knot
            let from_prev = p.at_knot(j - 1)[0] + (knots[j] - knots[j - 1]) * theta[j - 1];
            assert_eq!(from_prev, p.at_knot(j)[0]);
        }
        let mid = p.position(0.35).unwrap();
        assert!((mid[0] - (p.at_knot(1)[0] + 0.15 * -0.9)).abs() < 1e-15);
        assert!(p.position(1.5).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(cone_contains(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.5]).unwrap());
        assert!(!cone_contains(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]).unwrap());
        assert!(cone_contains(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap());
        assert!(cone_contains(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gamma_values() {
        for d in 1..=3 {
            let g = gamma_cone(d, 100_000, 5, &default_gamma_vertices(d)).unwrap();
            let exact = gamma_exact(d).unwrap();
            assert!((g.value - exact).abs() < 3.0 * g.stderr + 1e-12, "d={d} {g:?}");
            assert!(g.max_vertex_z() < 4.0);
        }
    }

    #[test]
    fn k0_weights() {
        let spec = gauss(1);
        let c = PointConfiguration::new(1.0, vec![]).unwrap();
        let g = order_gaps(&c).unwrap();
        let init = InitialData::new(1.0, 2.0).unwrap();
        assert_eq!(fk_weight(&c, &g, &spec, EquationKind::Wave, &init, &[0.0], &[], &[]).unwrap(), 9.0);
        let init = InitialData::new(2.0, 0.0).unwrap();
        assert_eq!(fk_weight(&c, &g, &spec, EquationKind::Heat, &init, &[0.0], &[], &[]).unwrap(), 4.0);
    }

    #[test]
    fn fk_weight_matches_paired_sampler() {
        // the public single-draw weight and the hot-loop sampler agree given the same draws
        let spec = gauss(2);
        let init = InitialData::new(1.0, 0.5).unwrap();
        let c = PointConfiguration::new(1.0, vec![(0.3, 0.8), (0.7, 0.2), (0.5, 0.6)]).unwrap();
        let g = order_gaps(&c).unwrap();
        let law = ThetaLaw::WaveD2;
        let mut r = substream(3, &[9]);
        let mut th1 = vec![0.0; 6];
        let mut th2 = vec![0.0; 6];
        for j in 0..3 {
            law.draw(&mut r, &mut th1[2 * j..2 * j + 2]);
        }
        for j in 0..3 {
            law.draw(&mut r, &mut th2[2 * j..2 * j + 2]);
        }
        let w = fk_weight(&c, &g, &spec, EquationKind::Wave, &init, &[0.0, 0.0], &th1, &th2).unwrap();
        let a: Vec<f64> = c.points.iter().map(|p| p.0).collect();
        let b: Vec<f64> = c.points.iter().map(|p| p.1).collect();
        let pt = PairedTimes::new(EquationKind::Wave, &init, 1.0, &a, &b);
        let mut buf = PathBuffers::default();
        let (v, _) = pt.sample(&spec, law, &[0.0, 0.0], &mut substream(3, &[9]), &mut buf);
        let tf: f64 = c.points.iter().map(|&(a, b)| spec.temporal().eval(a, b)).product();
        assert!((w - v * tf).abs() < 1e-14 * w.abs().max(1e-300), "{w} {}", v * tf);
    }

    #[test]
    fn white_noise_rejected() {
        let w = NoiseSpec::new(0.75, SpatialKernel::WhiteSpace, 1).unwrap();
        let init = InitialData::new(1.0, 0.0).unwrap();
        let r = fk_estimate(&w, EquationKind::Wave, 0.5, &[0.0], &init, &FkSettings::default(), 1);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn small_t_collapses() {
        let spec = gauss(1);
        let init = InitialData::new(1.0, 0.0).unwrap();
        let s = FkSettings {
            configs_per_stratum: 2000,
            theta_per_config: 4,
            ..FkSettings::default()
        };
        let e = fk_estimate(&spec, EquationKind::Wave, 1e-3, &[0.0], &init, &s, 1).unwrap();
        assert!((e.estimate.value - 1.0).abs() < 1e-9);
        let e0 = fk_estimate(&spec, EquationKind::Wave, 0.0, &[0.0], &init, &s, 1).unwrap();
        assert_eq!(e0.estimate.value, 1.0);
        assert_eq!(e0.estimate.stderr, 0.0);
    }

    #[test]
    fn user_k_max_too_small() {
        let spec = gauss(1);
        let init = InitialData::new(1.0, 0.0).unwrap();
        let s = FkSettings {
            k_max: Some(1),
            ..FkSettings::default()
        };
        let r = fk_estimate(&spec, EquationKind::Wave, 1.0, &[0.0], &init, &s, 1);
        match r {
            Err(Error::Budget(m)) => assert!(m.contains("use k_max >=")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stratified_matches_raw_low_order() {
        let spec = gauss(1);
        let init = InitialData::new(1.0, 0.0).unwrap();
        let t = 0.8;
        let s = FkSettings {
            k_max: Some(2),
            configs_per_stratum: 40_000,
            theta_per_config: 8,
            tail_tolerance: f64::INFINITY,
            ..FkSettings::default()
        };
        let strat = fk_estimate(&spec, EquationKind::Wave, t, &[0.0], &init, &s, 3).unwrap();
        let raw = fk_raw_low_order(&spec, EquationKind::Wave, t, &init, 2, 100_000, 8, 4).unwrap();
        let z = strat.estimate.z_score(&raw);
        assert!(z < 3.5, "strat {:?} raw {:?}", strat.estimate.value, raw);
    }

    #[test]
    fn proposals_agree() {
        let spec = NoiseSpec::new(0.7, SpatialKernel::Riesz { alpha: 0.5 }, 1).unwrap();
        let init = InitialData::new(1.0, 0.0).unwrap();
        let base = FkSettings {
            configs_per_stratum: 20_000,
            theta_per_config: 8,
            ..FkSettings::default()
        };
        let u = fk_estimate(&spec, EquationKind::Heat, 0.5, &[0.0], &init, &base, 8).unwrap();
        let s = FkSettings {
            time_proposal: TimeProposal::Uniform,
            ..base
        };
        let v = fk_estimate(&spec, EquationKind::Heat, 0.5, &[0.0], &init, &s, 9).unwrap();
        assert!(u.estimate.z_score(&v.estimate) < 3.5, "{:?} {:?}", u.estimate.value, v.estimate.value);
    }

    #[test]
    fn x_invariance() {
        let spec = gauss(2);
        let init = InitialData::new(1.0, 0.3).unwrap();
        let s = FkSettings {
            configs_per_stratum: 5000,
            theta_per_config: 4,
            ..FkSettings::default()
        };
        let a = fk_estimate(&spec, EquationKind::Wave, 0.6, &[0.0, 0.0], &init, &s, 21).unwrap();
        let b = fk_estimate(&spec, EquationKind::Wave, 0.6, &[3.0, -1.5], &init, &s, 22).unwrap();
        assert!(a.estimate.z_score(&b.estimate) < 3.5);
    }

    #[test]
    fn thread_count_independent() {
        let spec = gauss(1);
        let init = InitialData::new(1.0, 0.0).unwrap();
        let s = FkSettings {
            configs_per_stratum: 3000,
            theta_per_config: 4,
            ..FkSettings::default()
        };
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| fk_estimate(&spec, EquationKind::Wave, 0.7, &[0.0], &init, &s, 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn white_limit_single_element_is_fk_estimate() {
        let init = InitialData::new(1.0, 0.0).unwrap();
        let s = FkSettings {
            configs_per_stratum: 2000,
            theta_per_config: 2,
            ..FkSettings::default()
        };
        let rep = fk_estimate_white_limit(EquationKind::Wave, 0.75, 0.5, &[0.0], &init, &[0.8], &s, 5).unwrap();
        let spec = NoiseSpec::riesz_family(0.75, 0.8).unwrap();
        let direct = fk_estimate(&spec, EquationKind::Wave, 0.5, &[0.0], &init, &s, 5).unwrap();
        assert_eq!(rep.estimates[0].1, direct);
        assert!(rep.successive_differences.is_empty());
        assert!(fk_estimate_white_limit(EquationKind::Wave, 0.75, 0.5, &[0.0], &init, &[0.9, 0.8], &s, 5).is_err());
    }

    fn small_int() -> impl Strategy<Value = f64> {
        (-1000i32..1000).prop_map(|v| v as f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn gaps_sum_to_t(pts in proptest::collection::vec((0.001f64..0.999, 0.001f64..0.999), 0..8)) {
            let c = match PointConfiguration::new(1.0, pts) { Ok(c) => c, Err(_) => return Ok(()) };
            let g = order_gaps(&c).unwrap();
            let st: f64 = g.gaps_t().iter().sum();
            let ss: f64 = g.gaps_s().iter().sum();
            prop_assert!((st - 1.0).abs() < 1e-15 && (ss - 1.0).abs() < 1e-15);
            prop_assert!(g.gaps_t().iter().all(|&v| v > 0.0));
            // permutation round trip
            for (j, &i) in g.perm_t.iter().enumerate() {
                prop_assert_eq!(g.tau[j + 1], c.points[i].0);
            }
            for (j, &i) in g.perm_s.iter().enumerate() {
                prop_assert_eq!(g.tau_prime[j + 1], c.points[i].1);
            }
        }

        // integer coordinates keep every operation below exact in f64
        #[test]
        fn cone_shift_invariance(x in proptest::collection::vec(small_int(), 3),
                                 y in proptest::collection::vec(small_int(), 3),
                                 z in proptest::collection::vec(small_int(), 3),
                                 w in proptest::collection::vec(small_int(), 3)) {
            prop_assume!(x != y);
            let sh = |v: &Vec<f64>| -> Vec<f64> { v.iter().zip(&w).map(|(a, b)| a + b).collect() };
            prop_assert_eq!(cone_contains(&x, &y, &z).unwrap(), cone_contains(&sh(&x), &sh(&y), &sh(&z)).unwrap());
        }

        #[test]
        fn cone_scaling(x in proptest::collection::vec(small_int(), 2),
                        y in proptest::collection::vec(small_int(), 2),
                        z in proptest::collection::vec(small_int(), 2),
                        r in 1i32..100) {
            prop_assume!(x != y);
            let p1: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
            let p2: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + r as f64 * b).collect();
            prop_assert_eq!(cone_contains(&x, &y, &p1).unwrap(), cone_contains(&x, &y, &p2).unwrap());
        }

        #[test]
        fn cone_distance_property(x in proptest::collection::vec(small_int(), 3),
                                  y in proptest::collection::vec(small_int(), 3),
                                  z in proptest::collection::vec(small_int(), 3),
                                  delta in 1i32..3000) {
            prop_assume!(x != y);
            let d2 = |a: &Vec<f64>, b: &Vec<f64>| -> f64 { a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum() };
            let dl = (delta as f64).powi(2);
            if d2(&z, &y) < dl && d2(&y, &x) < dl && cone_contains(&x, &y, &z).unwrap() {
                prop_assert!(d2(&z, &x) < dl);
            }
        }
    }
}
