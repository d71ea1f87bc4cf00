use crate::config::{ExperimentConfig, Times};
use crate::error::{CliError, CliResult};
use crate::manifest::{EstimateRow, RunManifest, ESTIMATE_HEADER};
use crate::svg;
use spde_moments::bounds::{growth_fit, lower_bound_constants, GROWTH_LABEL};
use spde_moments::chaos::{second_moment_chaos, ChaosBudget, ChaosTerm};
use spde_moments::estimate::Stratum;
use spde_moments::fkmc::{self, FkSettings};
use spde_moments::noise::{self, dalang_check, k_constant, k_mu, DalangVerdict, EtaGrid};
use spde_moments::quad::QuadSettings;
use spde_moments::{EquationKind, NoiseSpec, SpatialKernel};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const STRATA_HEADER: &str = "t,k,poisson_weight,stratum_mean,stratum_stderr,n_configs,n_theta";
pub const CHAOS_TERMS_HEADER: &str = "t,n,alpha_n,stderr,method,samples";
pub const SCAN_HEADER: &str = "t,method,value,stderr,samples";

pub fn chaos_budget(cfg: &ExperimentConfig) -> ChaosBudget {
    let d = ChaosBudget::default();
    ChaosBudget {
        outer_samples: cfg.samples.unwrap_or(d.outer_samples),
        inner_samples: cfg.theta_samples.unwrap_or(d.inner_samples),
        quadrature_first_term: true,
    }
}

pub fn fk_settings(cfg: &ExperimentConfig) -> FkSettings {
    let d = FkSettings::default();
    FkSettings {
        k_max: cfg.k_max,
        configs_per_stratum: cfg.samples.unwrap_or(d.configs_per_stratum),
        theta_per_config: cfg.theta_samples.unwrap_or(d.theta_per_config),
        tail_tolerance: cfg.tail_tolerance,
        time_proposal: cfg.time_proposal,
    }
}

/// Everything one estimate/scan run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Computation {
    pub rows: Vec<EstimateRow>,
    pub strata: Vec<(f64, Stratum)>,
    pub chaos_terms: Vec<(f64, ChaosTerm)>,
    pub timings: Vec<(String, f64)>,
    pub constants: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

fn derived_constants(cfg: &ExperimentConfig, spec: &NoiseSpec) -> CliResult<Vec<(String, f64)>> {
    let a = spec.exponent_a();
    Ok(vec![
        ("alpha_H".into(), spec.alpha_h()),
        ("a".into(), a),
        ("rho".into(), noise::rho(cfg.equation, spec.hurst(), a)?),
        ("K".into(), k_constant(cfg.equation, spec)?),
    ])
}

/// Runs the configured estimators at every time of `times`.
pub fn compute(cfg: &ExperimentConfig, times: &[f64]) -> CliResult<Computation> {
    let seed = cfg.require_seed()?;
    let spec = cfg.noise_spec()?;
    spec.require_dalang()?;
    let init = cfg.init();
    let kind = cfg.equation;
    let t0 = Instant::now();
    let constants = derived_constants(cfg, &spec)?;
    let mut out = Computation {
        rows: Vec::new(),
        strata: Vec::new(),
        chaos_terms: Vec::new(),
        timings: vec![("constants".into(), t0.elapsed().as_secs_f64())],
        constants,
        warnings: Vec::new(),
    };
    let x = vec![0.0; spec.dim()];
    for &t in times {
        if cfg.method.runs_chaos() {
            let clock = Instant::now();
            let m = second_moment_chaos(&spec, kind, t, &init, cfg.n_trunc, &chaos_budget(cfg), seed)?;
            out.timings.push((format!("chaos_t{t:?}"), clock.elapsed().as_secs_f64()));
            out.rows.push(EstimateRow {
                method: m.estimate.method.name().into(),
                t,
                value: m.estimate.value,
                stderr: m.estimate.stderr,
                samples: m.estimate.samples,
            });
            out.warnings.extend(m.warnings.iter().map(|w| format!("t = {t}: {w}")));
            out.chaos_terms.extend(m.terms.into_iter().map(|c| (t, c)));
        }
        if cfg.method.runs_fk() {
            let clock = Instant::now();
            let f = fkmc::fk_estimate(&spec, kind, t, &x, &init, &fk_settings(cfg), seed)?;
            out.timings.push((format!("fk_t{t:?}"), clock.elapsed().as_secs_f64()));
            out.rows.push(EstimateRow {
                method: f.estimate.method.name().into(),
                t,
                value: f.estimate.value,
                stderr: f.estimate.stderr,
                samples: f.estimate.samples,
            });
            if f.tail_bound > 0.0 {
                out.constants.push((format!("fk_tail_bound_t{t:?}"), f.tail_bound));
            }
            if !f.tail_bound_rigorous {
                out.warnings
                    .push(format!("t = {t}: the FK tail bound {:e} is heuristic for the heat equation", f.tail_bound));
            }
            out.strata.extend(f.estimate.strata.into_iter().map(|s| (t, s)));
        }
    }
    Ok(out)
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("spde-out"))
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> CliResult<()> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_common(dir: &Path, comp: &Computation) -> CliResult<()> {
    write_csv(
        &dir.join("strata.csv"),
        STRATA_HEADER,
        comp.strata.iter().map(|(t, s)| format!("{t:?},{}", s.csv_row())),
    )?;
    write_csv(
        &dir.join("chaos_terms.csv"),
        CHAOS_TERMS_HEADER,
        comp.chaos_terms.iter().map(|(t, c)| format!("{t:?},{}", c.csv_row())),
    )
}

fn manifest(cfg: &ExperimentConfig, command: &str, threads: usize, comp: &Computation) -> RunManifest {
    RunManifest {
        tool_version: VERSION.into(),
        command: command.into(),
        threads,
        config: cfg.clone(),
        constants: comp.constants.clone(),
        timings: comp.timings.clone(),
        estimates: comp.rows.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub dir: PathBuf,
    pub computation: Computation,
    pub manifest: RunManifest,
}

/// Writes estimate.csv, strata.csv, chaos_terms.csv and manifest.txt.
pub fn cmd_estimate(cfg: &ExperimentConfig, threads: usize) -> CliResult<EstimateOutcome> {
    let comp = compute(cfg, &cfg.times.values())?;
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_csv(&dir.join("estimate.csv"), ESTIMATE_HEADER, comp.rows.iter().map(EstimateRow::csv_row))?;
    write_common(&dir, &comp)?;
    let m = manifest(cfg, "estimate", threads, &comp);
    fs::write(dir.join("manifest.txt"), m.to_text())?;
    Ok(EstimateOutcome {
        dir,
        computation: comp,
        manifest: m,
    })
}

#[derive(Debug, Clone)]
pub struct ScanFit {
    pub method: String,
    pub rho: f64,
    pub residual: f64,
    pub used: usize,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub dir: PathBuf,
    pub computation: Computation,
    pub fits: Vec<ScanFit>,
    pub reference_rho: f64,
}

/// Per-t estimates over `t_grid`, a growth fit per method, scan.csv and
/// plot.svg.
pub fn cmd_scan(cfg: &ExperimentConfig, threads: usize) -> CliResult<ScanOutcome> {
    let Times::Grid(grid) = &cfg.times else {
        return Err(CliError::Usage("scan needs `t_grid` with at least 2 times".into()));
    };
    let mut comp = compute(cfg, grid)?;
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir)?;
    let u0_sq = cfg.u0 * cfg.u0;
    let mut methods: Vec<String> = comp.rows.iter().map(|r| r.method.clone()).collect();
    methods.dedup();
    methods.sort();
    methods.dedup();
    let mut fits = Vec::new();
    for m in &methods {
        let pts: Vec<(f64, f64)> = comp.rows.iter().filter(|r| &r.method == m).map(|r| (r.t, r.value)).collect();
        match growth_fit(&pts, u0_sq) {
            Ok(f) => fits.push(ScanFit {
                method: m.clone(),
                rho: f.rho,
                residual: f.residual,
                used: f.used,
            }),
            Err(e) => {
                let w = format!("{m}: growth fit unavailable: {e}");
                log::warn!("{w}");
                comp.warnings.push(w);
                fits.push(ScanFit {
                    method: m.clone(),
                    rho: f64::NAN,
                    residual: f64::NAN,
                    used: 0,
                });
            }
        }
    }
    let mut rows: Vec<String> = comp.rows.iter().map(|r| format!("{:?},{},{:?},{:?},{}", r.t, r.method, r.value, r.stderr, r.samples)).collect();
    // fit rows: value = fitted exponent, stderr = rms residual, samples = points used
    rows.extend(fits.iter().map(|f| format!("fit,{},{:?},{:?},{}", f.method, f.rho, f.residual, f.used)));
    write_csv(&dir.join("scan.csv"), SCAN_HEADER, rows)?;
    write_common(&dir, &comp)?;

    let spec = cfg.noise_spec()?;
    let reference_rho = noise::rho(cfg.equation, spec.hurst(), spec.exponent_a())?;
    let series: Vec<svg::Series> = methods
        .iter()
        .map(|m| svg::Series {
            label: m.clone(),
            points: comp.rows.iter().filter(|r| &r.method == m).map(|r| (r.t, r.value, r.stderr)).collect(),
        })
        .collect();
    // reference ln u0² + c·t^ρ through the last point of the first series
    let reference: Vec<(f64, f64)> = comp
        .rows
        .iter()
        .filter(|r| r.value > u0_sq && u0_sq > 0.0)
        .last()
        .map(|last| {
            let c = (last.value / u0_sq).ln() / last.t.powf(reference_rho);
            let (lo, hi) = (grid[0], *grid.last().unwrap());
            (0..=40)
                .map(|i| {
                    let t = lo + (hi - lo) * i as f64 / 40.0;
                    (t, u0_sq.ln() + c * t.powf(reference_rho))
                })
                .collect()
        })
        .unwrap_or_default();
    let label = format!("t^{reference_rho:.4} reference");
    let title = format!("{} equation, {} noise ({GROWTH_LABEL})", cfg.equation, spec.kernel().name());
    let plot = svg::log_plot(
        &title,
        &series,
        if reference.is_empty() { None } else { Some((&label, &reference)) },
    );
    fs::write(dir.join("plot.svg"), plot)?;
    comp.constants.push(("reference_rho".into(), reference_rho));
    let m = manifest(cfg, "scan", threads, &comp);
    fs::write(dir.join("manifest.txt"), m.to_text())?;
    Ok(ScanOutcome {
        dir,
        computation: comp,
        fits,
        reference_rho,
    })
}

#[derive(Debug, Clone)]
pub struct ConstantsReport {
    pub rows: Vec<(String, String)>,
    pub dalang: DalangVerdict,
}

impl ConstantsReport {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.rows.iter().find(|r| r.0 == name).map(|r| r.1.as_str())
    }

    pub fn to_table(&self) -> String {
        let w = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        self.rows.iter().map(|(k, v)| format!("{k:<w$} = {v}\n")).collect()
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// The table of derived constants. Requires a seed only when γ is estimated
/// by Monte Carlo (`gamma_samples > 0`).
pub fn cmd_constants(cfg: &ExperimentConfig) -> CliResult<ConstantsReport> {
    let spec = cfg.noise_spec()?;
    let h = spec.hurst();
    let a = spec.exponent_a();
    let dalang = dalang_check(&spec);
    let mut rows: Vec<(String, String)> = vec![
        ("equation".into(), cfg.equation.name().into()),
        ("kernel".into(), spec.kernel().name().into()),
        ("dim".into(), spec.dim().to_string()),
        ("H".into(), num(h)),
        ("alpha_H".into(), num(spec.alpha_h())),
        ("a".into(), num(a)),
    ];
    if !dalang.holds {
        rows.push(("dalang".into(), dalang.message.clone()));
        return Ok(ConstantsReport { rows, dalang });
    }
    rows.push(("rho_w".into(), num(noise::rho(EquationKind::Wave, h, a)?)));
    rows.push(("rho_h".into(), num(noise::rho(EquationKind::Heat, h, a)?)));
    rows.push(("K_w".into(), num(k_constant(EquationKind::Wave, &spec)?)));
    rows.push(("K_h".into(), num(k_constant(EquationKind::Heat, &spec)?)));
    let kmu = match spec.kernel() {
        SpatialKernel::Riesz { .. } | SpatialKernel::ProductFractional { .. } => {
            num(k_mu(&spec, &EtaGrid::default(), &QuadSettings::default())?.value)
        }
        SpatialKernel::Gaussian { .. } => "n/a (bounded kernel, K = total mass)".into(),
        SpatialKernel::WhiteSpace => "n/a (closed form)".into(),
    };
    rows.push(("K(mu)".into(), kmu));
    let gamma = if cfg.gamma_samples > 0 {
        let seed = cfg.require_seed()?;
        let g = fkmc::gamma_cone(spec.dim(), cfg.gamma_samples, seed, &fkmc::default_gamma_vertices(spec.dim()))?;
        rows.push(("gamma".into(), format!("{} ± {}", g.value, g.stderr)));
        Some((g.value, format!("mc-{}-per-vertex", cfg.gamma_samples)))
    } else if let Some(g) = fkmc::gamma_exact(spec.dim()) {
        rows.push(("gamma".into(), format!("{g} (exact)")));
        Some((g, "exact-solid-angle".to_string()))
    } else {
        rows.push(("gamma".into(), "n/a (set gamma_samples for d > 3)".into()));
        None
    };
    if let Some((g, proc_)) = gamma {
        for kind in [EquationKind::Wave, EquationKind::Heat] {
            let lb = lower_bound_constants(&spec, kind, g, &proc_)?;
            let sfx = if kind == EquationKind::Wave { "w" } else { "h" };
            if kind == EquationKind::Wave {
                rows.push(("c_H".into(), num(lb.c_h)));
                rows.push(("c_H*".into(), num(lb.c_h_star)));
                if let Some(a0) = lb.alpha0 {
                    rows.push(("alpha0".into(), num(a0)));
                }
            }
            rows.push((format!("c2_{sfx}"), num(lb.c2)));
            rows.push((format!("t2_{sfx}"), num(lb.t2)));
        }
    }
    if let Some(i) = dalang.integral {
        rows.push(("dalang_integral".into(), num(i)));
    }
    rows.push(("dalang".into(), dalang.message.clone()));
    Ok(ConstantsReport { rows, dalang })
}

pub fn cmd_gamma(cfg: &ExperimentConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let d = cfg.dim;
    let n = if cfg.gamma_samples > 0 { cfg.gamma_samples } else { 100_000 };
    let g = fkmc::gamma_cone(d, n, seed, &fkmc::default_gamma_vertices(d))?;
    let mut s = format!("gamma = {} ± {} ({} samples, d = {d})\n", g.value, g.stderr, g.samples);
    for (v, m, se) in &g.per_vertex {
        s += &format!("  vertex {v:?}: {m} ± {se}\n");
    }
    s += &format!("max vertex z = {:.3}\n", g.max_vertex_z());
    match fkmc::gamma_exact(d) {
        Some(e) => s += &format!("exact = {e} (z = {:.3})\n", (g.value - e).abs() / g.stderr.max(f64::MIN_POSITIVE)),
        None => s += "exact = n/a\n",
    }
    Ok(s)
}

pub const WHITE_LIMIT_HEADER: &str = "a,value,stderr,samples,diff_prev,diff_stderr";

#[derive(Debug, Clone)]
pub struct WhiteLimitOutcome {
    pub report: fkmc::WhiteLimitReport,
    /// Chaos value of the white-in-space limit, with its stderr.
    pub white: (f64, f64),
    pub text: String,
}

/// FK along the Riesz family a → 1 in d = 1 against the chaos value for
/// spatial white noise. Writes white_limit.csv.
pub fn cmd_white_limit(cfg: &ExperimentConfig) -> CliResult<WhiteLimitOutcome> {
    let seed = cfg.require_seed()?;
    let Times::Single(t) = cfg.times else {
        return Err(CliError::Usage("white-limit needs a single `t`".into()));
    };
    if t <= 0.0 {
        return Err(CliError::Usage("white-limit needs t > 0".into()));
    }
    let init = cfg.init();
    let report = fkmc::fk_estimate_white_limit(cfg.equation, cfg.hurst, t, &[0.0], &init, &cfg.a_grid, &fk_settings(cfg), seed)?;
    let white_spec = NoiseSpec::white_delta(cfg.hurst)?;
    let w = second_moment_chaos(&white_spec, cfg.equation, t, &init, cfg.n_trunc, &chaos_budget(cfg), seed)?;
    let mut rows = Vec::new();
    let mut text = String::new();
    for (i, (a, e)) in report.estimates.iter().enumerate() {
        let (d, ds) = if i == 0 {
            (f64::NAN, f64::NAN)
        } else {
            report.successive_differences[i - 1]
        };
        rows.push(format!("{a:?},{:?},{:?},{},{d:?},{ds:?}", e.estimate.value, e.estimate.stderr, e.estimate.samples));
        text += &format!("a = {a}: {} ± {}\n", e.estimate.value, e.estimate.stderr);
    }
    rows.push(format!("white,{:?},{:?},{},NaN,NaN", w.estimate.value, w.estimate.stderr, w.estimate.samples));
    text += &format!("white (chaos, N = {}): {} ± {}\n", cfg.n_trunc, w.estimate.value, w.estimate.stderr);
    text += &format!("successive differences shrinking: {}\n", report.shrinking);
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_csv(&dir.join("white_limit.csv"), WHITE_LIMIT_HEADER, rows)?;
    Ok(WhiteLimitOutcome {
        report,
        white: (w.estimate.value, w.estimate.stderr),
        text,
    })
}
