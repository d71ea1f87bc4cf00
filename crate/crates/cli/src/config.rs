//! Flat `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Every key may
//! appear at most once; unknown keys are errors. Lists are comma separated.

use spde_moments::fkmc::TimeProposal;
use spde_moments::{EquationKind, InitialData, NoiseSpec, SpatialKernel};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line, or 0 for whole-file problems.
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.key) {
            (0, Some(k)) => write!(f, "config field `{k}`: {}", self.message),
            (0, None) => write!(f, "config: {}", self.message),
            (l, Some(k)) => write!(f, "config line {l}: field `{k}`: {}", self.message),
            (l, None) => write!(f, "config line {l}: {}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}

pub(crate) fn err_at(line: usize, key: Option<&str>, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        key: key.map(str::to_string),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Chaos,
    Fk,
    Both,
}

impl MethodChoice {
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::Chaos => "chaos",
            MethodChoice::Fk => "fk",
            MethodChoice::Both => "both",
        }
    }

    pub fn runs_chaos(self) -> bool {
        matches!(self, MethodChoice::Chaos | MethodChoice::Both)
    }

    pub fn runs_fk(self) -> bool {
        matches!(self, MethodChoice::Fk | MethodChoice::Both)
    }
}

impl FromStr for MethodChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chaos" => Ok(MethodChoice::Chaos),
            "fk" => Ok(MethodChoice::Fk),
            "both" => Ok(MethodChoice::Both),
            _ => Err(format!("unknown method `{s}` (expected chaos, fk or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Times {
    Single(f64),
    Grid(Vec<f64>),
}

impl Times {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Times::Single(t) => vec![*t],
            Times::Grid(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub equation: EquationKind,
    pub hurst: f64,
    pub kernel: SpatialKernel,
    pub dim: usize,
    pub amplitude: Option<f64>,
    pub u0: f64,
    pub v0: f64,
    pub times: Times,
    pub method: MethodChoice,
    pub n_trunc: usize,
    pub k_max: Option<usize>,
    pub samples: Option<usize>,
    pub theta_samples: Option<usize>,
    pub time_proposal: TimeProposal,
    pub tail_tolerance: f64,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub a_grid: Vec<f64>,
    pub gamma_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            equation: EquationKind::Wave,
            hurst: 0.75,
            kernel: SpatialKernel::Gaussian { length_scale: 1.0 },
            dim: 1,
            amplitude: None,
            u0: 1.0,
            v0: 0.0,
            times: Times::Single(0.5),
            method: MethodChoice::Both,
            n_trunc: 4,
            k_max: None,
            samples: None,
            theta_samples: None,
            time_proposal: TimeProposal::Singular,
            tail_tolerance: 1e-6,
            seed: None,
            output_dir: None,
            a_grid: vec![0.8, 0.9, 0.95, 0.99],
            gamma_samples: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "equation",
    "hurst",
    "kernel",
    "dim",
    "length_scale",
    "alpha",
    "alphas",
    "amplitude",
    "u0",
    "v0",
    "t",
    "t_grid",
    "method",
    "n_trunc",
    "k_max",
    "samples",
    "theta_samples",
    "time_proposal",
    "tail_tolerance",
    "seed",
    "out",
    "a_grid",
    "gamma_samples",
];

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ParseError> {
    let x: f64 = v
        .parse()
        .map_err(|_| err_at(line, Some(key), format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(err_at(line, Some(key), "must be finite"));
    }
    Ok(x)
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, ParseError> {
    let items: Vec<&str> = v.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(err_at(line, Some(key), "empty list entry"));
    }
    items.iter().map(|s| parse_f64(line, key, s)).collect()
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, ParseError> {
    v.parse()
        .map_err(|_| err_at(line, Some(key), format!("`{v}` is not a nonnegative integer")))
}

fn parse_proposal(s: &str) -> Result<TimeProposal, String> {
    match s {
        "singular" => Ok(TimeProposal::Singular),
        "uniform" => Ok(TimeProposal::Uniform),
        _ => Err(format!("unknown time_proposal `{s}` (expected singular or uniform)")),
    }
}

fn proposal_name(p: TimeProposal) -> &'static str {
    match p {
        TimeProposal::Singular => "singular",
        TimeProposal::Uniform => "uniform",
    }
}

/// Key/value pairs in file order with their line numbers.
pub fn tokenize(text: &str) -> Result<Vec<(usize, String, String)>, ParseError> {
    tokenize_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
}

pub fn tokenize_lines<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<(usize, String, String)>, ParseError> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (line, raw) in lines {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return Err(err_at(line, None, format!("expected `key = value`, found `{s}`")));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(err_at(line, None, "missing key"));
        }
        if v.is_empty() {
            return Err(err_at(line, Some(k), "missing value"));
        }
        if let Some((prev, _, _)) = out.iter().find(|(_, pk, _)| pk == k) {
            return Err(err_at(line, Some(k), format!("duplicate key (first set on line {prev})")));
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Self::from_pairs(&tokenize(text)?)
    }

    /// Build from (line, key, value) triples; later calls to `apply` can
    /// override individual keys.
    pub fn from_pairs(pairs: &[(usize, String, String)]) -> Result<Self, ParseError> {
        let mut c = ExperimentConfig::default();
        let mut kernel_name: Option<(usize, String)> = None;
        let mut length_scale: Option<(usize, f64)> = None;
        let mut alpha: Option<(usize, f64)> = None;
        let mut alphas: Option<(usize, Vec<f64>)> = None;
        let mut t_single: Option<(usize, f64)> = None;
        let mut t_grid: Option<(usize, Vec<f64>)> = None;
        for (line, k, v) in pairs {
            let (line, k, v) = (*line, k.as_str(), v.as_str());
            match k {
                "equation" => c.equation = v.parse().map_err(|e: String| err_at(line, Some(k), e))?,
                "hurst" => c.hurst = parse_f64(line, k, v)?,
                "kernel" => kernel_name = Some((line, v.to_string())),
                "dim" => c.dim = parse_usize(line, k, v)?,
                "length_scale" => length_scale = Some((line, parse_f64(line, k, v)?)),
                "alpha" => alpha = Some((line, parse_f64(line, k, v)?)),
                "alphas" => alphas = Some((line, parse_list(line, k, v)?)),
                "amplitude" => c.amplitude = Some(parse_f64(line, k, v)?),
                "u0" => c.u0 = parse_f64(line, k, v)?,
                "v0" => c.v0 = parse_f64(line, k, v)?,
                "t" => t_single = Some((line, parse_f64(line, k, v)?)),
                "t_grid" => t_grid = Some((line, parse_list(line, k, v)?)),
                "method" => c.method = v.parse().map_err(|e: String| err_at(line, Some(k), e))?,
                "n_trunc" => c.n_trunc = parse_usize(line, k, v)?,
                "k_max" => {
                    c.k_max = if v == "auto" {
                        None
                    } else {
                        Some(parse_usize(line, k, v)?)
                    }
                }
                "samples" => c.samples = Some(parse_usize(line, k, v)?),
                "theta_samples" => c.theta_samples = Some(parse_usize(line, k, v)?),
                "time_proposal" => c.time_proposal = parse_proposal(v).map_err(|e| err_at(line, Some(k), e))?,
                "tail_tolerance" => c.tail_tolerance = parse_f64(line, k, v)?,
                "seed" => {
                    c.seed = Some(
                        v.parse()
                            .map_err(|_| err_at(line, Some(k), format!("`{v}` is not an unsigned 64-bit integer")))?,
                    )
                }
                "out" => c.output_dir = Some(PathBuf::from(v)),
                "a_grid" => c.a_grid = parse_list(line, k, v)?,
                "gamma_samples" => c.gamma_samples = parse_usize(line, k, v)?,
                _ => {
                    return Err(err_at(line, Some(k), format!("unknown key (known keys: {})", KEYS.join(", "))));
                }
            }
        }
        let kname = kernel_name.clone().map(|(_, n)| n).unwrap_or_else(|| "gaussian".into());
        let kline = kernel_name.as_ref().map(|(l, _)| *l).unwrap_or(0);
        let stray = |name: &str, at: Option<usize>| -> Result<(), ParseError> {
            match at {
                Some(l) => Err(err_at(l, Some(name), format!("not used by kernel `{kname}`"))),
                None => Ok(()),
            }
        };
        c.kernel = match kname.as_str() {
            "gaussian" => {
                stray("alpha", alpha.as_ref().map(|a| a.0))?;
                stray("alphas", alphas.as_ref().map(|a| a.0))?;
                SpatialKernel::Gaussian {
                    length_scale: length_scale.map(|l| l.1).unwrap_or(1.0),
                }
            }
            "riesz" => {
                stray("length_scale", length_scale.as_ref().map(|a| a.0))?;
                stray("alphas", alphas.as_ref().map(|a| a.0))?;
                SpatialKernel::Riesz {
                    alpha: alpha.ok_or_else(|| err_at(kline, Some("alpha"), "required for kernel = riesz"))?.1,
                }
            }
            "product" => {
                stray("length_scale", length_scale.as_ref().map(|a| a.0))?;
                stray("alpha", alpha.as_ref().map(|a| a.0))?;
                SpatialKernel::ProductFractional {
                    alphas: alphas.ok_or_else(|| err_at(kline, Some("alphas"), "required for kernel = product"))?.1,
                }
            }
            "white" => {
                stray("length_scale", length_scale.as_ref().map(|a| a.0))?;
                stray("alpha", alpha.as_ref().map(|a| a.0))?;
                stray("alphas", alphas.as_ref().map(|a| a.0))?;
                SpatialKernel::WhiteSpace
            }
            other => {
                return Err(err_at(
                    kline,
                    Some("kernel"),
                    format!("unknown kernel `{other}` (expected gaussian, riesz, product or white)"),
                ))
            }
        };
        c.times = match (t_single, t_grid) {
            (Some((l, _)), Some(_)) => return Err(err_at(l, Some("t"), "set either t or t_grid, not both")),
            (Some((l, t)), None) => {
                if t < 0.0 {
                    return Err(err_at(l, Some("t"), "must be nonnegative"));
                }
                Times::Single(t)
            }
            (None, Some((l, g))) => {
                if g.iter().any(|&t| t <= 0.0) {
                    return Err(err_at(l, Some("t_grid"), "all grid times must be positive"));
                }
                if g.len() < 2 {
                    return Err(err_at(l, Some("t_grid"), "a grid needs at least 2 times"));
                }
                Times::Grid(g)
            }
            (None, None) => Times::Single(0.5),
        };
        c.validate(pairs)?;
        Ok(c)
    }

    fn validate(&self, pairs: &[(usize, String, String)]) -> Result<(), ParseError> {
        let line_of = |k: &str| pairs.iter().find(|p| p.1 == k).map(|p| p.0).unwrap_or(0);
        self.noise_spec()
            .map_err(|e| err_at(line_of("hurst").max(line_of("kernel")), None, e.to_string()))?;
        InitialData::new(self.u0, self.v0).map_err(|e| err_at(line_of("u0").max(line_of("v0")), None, e.to_string()))?;
        if self.n_trunc == 0 {
            return Err(err_at(line_of("n_trunc"), Some("n_trunc"), "must be at least 1"));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(err_at(line_of("tail_tolerance"), Some("tail_tolerance"), "must be positive"));
        }
        if matches!(self.samples, Some(0..=1)) {
            return Err(err_at(line_of("samples"), Some("samples"), "must be at least 2"));
        }
        if self.theta_samples == Some(0) {
            return Err(err_at(line_of("theta_samples"), Some("theta_samples"), "must be at least 1"));
        }
        if let Some(a) = self.amplitude {
            if !(a > 0.0) {
                return Err(err_at(line_of("amplitude"), Some("amplitude"), "must be positive"));
            }
        }
        if self.a_grid.iter().any(|&a| !(a > 0.5 && a < 1.0)) {
            return Err(err_at(line_of("a_grid"), Some("a_grid"), "entries must lie in (1/2, 1)"));
        }
        if self.a_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err_at(line_of("a_grid"), Some("a_grid"), "must be strictly increasing"));
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> spde_moments::Result<NoiseSpec> {
        match self.amplitude {
            Some(a) => NoiseSpec::with_amplitude(self.hurst, self.kernel.clone(), self.dim, a),
            None => NoiseSpec::new(self.hurst, self.kernel.clone(), self.dim),
        }
    }

    pub fn init(&self) -> InitialData {
        InitialData {
            u0: self.u0,
            v0: self.v0,
        }
    }

    /// Seed, or a parse error naming the missing field.
    pub fn require_seed(&self) -> Result<u64, ParseError> {
        self.seed
            .ok_or_else(|| err_at(0, Some("seed"), "a seed is required for Monte-Carlo runs (set `seed = N` or pass --seed)"))
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        kv("equation", self.equation.name().to_string());
        kv("hurst", format!("{:?}", self.hurst));
        match &self.kernel {
            SpatialKernel::Gaussian { length_scale } => {
                kv("kernel", "gaussian".into());
                kv("length_scale", format!("{length_scale:?}"));
            }
            SpatialKernel::Riesz { alpha } => {
                kv("kernel", "riesz".into());
                kv("alpha", format!("{alpha:?}"));
            }
            SpatialKernel::ProductFractional { alphas } => {
                kv("kernel", "product".into());
                kv("alphas", list(alphas));
            }
            SpatialKernel::WhiteSpace => kv("kernel", "white".into()),
        }
        kv("dim", self.dim.to_string());
        if let Some(a) = self.amplitude {
            kv("amplitude", format!("{a:?}"));
        }
        kv("u0", format!("{:?}", self.u0));
        kv("v0", format!("{:?}", self.v0));
        match &self.times {
            Times::Single(t) => kv("t", format!("{t:?}")),
            Times::Grid(g) => kv("t_grid", list(g)),
        }
        kv("method", self.method.name().into());
        kv("n_trunc", self.n_trunc.to_string());
        kv("k_max", self.k_max.map(|k| k.to_string()).unwrap_or_else(|| "auto".into()));
        if let Some(n) = self.samples {
            kv("samples", n.to_string());
        }
        if let Some(n) = self.theta_samples {
            kv("theta_samples", n.to_string());
        }
        kv("time_proposal", proposal_name(self.time_proposal).into());
        kv("tail_tolerance", format!("{:?}", self.tail_tolerance));
        if let Some(seed) = self.seed {
            kv("seed", seed.to_string());
        }
        if let Some(o) = &self.output_dir {
            kv("out", o.display().to_string());
        }
        kv("a_grid", list(&self.a_grid));
        kv("gamma_samples", self.gamma_samples.to_string());
        s
    }
}
