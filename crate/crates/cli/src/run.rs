use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fracsys::linalg::CMatrix;
use fracsys::solver::rational::reduce_rational;
use fracsys::solver::triangular::detect_triangle;
use fracsys::solver::{
    solve, DerivativeKind, ForcingFn, Method, MultiOrder, SolveOptions, SystemSpec, TimeGrid, Trajectory,
};

use crate::config::{self, ConfigError, MethodChoice, Mode, RunConfig};

/// Largest common denominator for which `auto` still picks the rational path.
pub const AUTO_RATIONAL_MAX_P: u64 = 64;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Validation(String),
    #[error("solver error: {0}")]
    Solver(#[from] fracsys::Error),
    #[error("{0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::Validation(_) => 1,
            RunError::Solver(_) | RunError::Io(_) => 2,
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, RunError> {
    let src = fs::read_to_string(path).map_err(|e| RunError::Validation(format!("{}: {e}", path.display())))?;
    config::parse(&src).map_err(|source| RunError::Config {
        path: path.display().to_string(),
        source,
    })
}

pub fn build_spec(cfg: &RunConfig) -> Result<SystemSpec, RunError> {
    let m = cfg.dim();
    let matrix = CMatrix::from_fn(m, m, |i, j| cfg.matrix[i][j]);
    let kind = match cfg.mode {
        Mode::Caputo => DerivativeKind::Caputo,
        Mode::Rl => DerivativeKind::RiemannLiouville,
    };
    let spec = match cfg.exact_orders() {
        Some(r) => SystemSpec::rational(r, matrix, cfg.initial.clone(), kind),
        None => {
            let orders = MultiOrder::new(cfg.orders.iter().map(|o| o.value()).collect())
                .map_err(|e| RunError::Validation(e.to_string()))?;
            SystemSpec::new(orders, matrix, cfg.initial.clone(), kind)
        }
    }
    .map_err(|e| RunError::Validation(e.to_string()))?;
    match &cfg.forcing {
        None => Ok(spec),
        Some(fs) => {
            let hs: Vec<ForcingFn> = fs
                .iter()
                .map(|f| {
                    let e = f.expr.clone();
                    Arc::new(move |t| e.eval(t)) as ForcingFn
                })
                .collect();
            spec.with_forcing(hs).map_err(|e| RunError::Validation(e.to_string()))
        }
    }
}

/// `auto`: triangular, then commensurate, then rational with a small common
/// denominator, else the series (which falls back to Talbot per time).
pub fn choose_method(cfg: &RunConfig, spec: &SystemSpec) -> Method {
    match cfg.solve.method {
        MethodChoice::Fixed(m) => m,
        MethodChoice::Auto => {
            if spec.dim() > 1 && detect_triangle(&spec.matrix).is_some() {
                Method::Triangular
            } else if spec.orders.is_commensurate() {
                Method::Commensurate
            } else if cfg
                .exact_orders()
                .and_then(|r| reduce_rational(&r).ok())
                .is_some_and(|red| red.p <= AUTO_RATIONAL_MAX_P)
            {
                Method::Rational
            } else {
                Method::Series
            }
        }
    }
}

pub fn options(cfg: &RunConfig) -> SolveOptions {
    let mut o = SolveOptions::default();
    let s = &cfg.solve;
    o.truncation = s.truncation;
    if let Some(k) = s.max_truncation {
        o.max_truncation = k;
    }
    if let Some(x) = s.series_tol {
        o.series_tol = x;
    }
    if let Some(x) = s.fallback_tol {
        o.fallback_tol = x;
    }
    if let Some(r) = s.refine {
        o.refine = r;
    }
    o
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `t,re(u1),im(u1),…` and 17 significant digits.
pub fn csv(traj: &Trajectory) -> String {
    let m = traj.dim();
    let mut out = String::from("t");
    for j in 1..=m {
        write!(out, ",re(u{j}),im(u{j})").unwrap();
    }
    out.push('\n');
    for (t, u) in traj.times.iter().zip(&traj.states) {
        out.push_str(&num(*t));
        for z in u {
            out.push(',');
            out.push_str(&num(z.re));
            out.push(',');
            out.push_str(&num(z.im));
        }
        out.push('\n');
    }
    out
}

pub struct Outcome {
    pub method: Method,
    pub trajectory: PathBuf,
    pub report: PathBuf,
}

fn report_header(cfg: &RunConfig, spec: &SystemSpec, method: Method) -> String {
    let mut r = String::new();
    writeln!(r, "method: {method}").unwrap();
    if cfg.solve.method == MethodChoice::Auto {
        writeln!(r, "method choice: auto").unwrap();
    }
    writeln!(r, "mode: {}", if cfg.mode == Mode::Caputo { "caputo" } else { "rl" }).unwrap();
    writeln!(r, "dimension: {}", spec.dim()).unwrap();
    let orders: Vec<String> = cfg
        .orders
        .iter()
        .map(|o| match o {
            config::Order::Exact(q) => q.to_string(),
            config::Order::Decimal(x) => x.to_string(),
        })
        .collect();
    writeln!(r, "orders: {}", orders.join(", ")).unwrap();
    if let Some(red) = cfg.exact_orders().and_then(|q| reduce_rational(&q).ok()) {
        writeln!(r, "common denominator: {}", red.p).unwrap();
        writeln!(r, "augmented size: {}", red.total).unwrap();
    }
    writeln!(r, "t_max: {}", cfg.solve.t_max).unwrap();
    writeln!(r, "steps: {}", cfg.solve.steps).unwrap();
    r
}

/// Solves the configured system, writes the trajectory CSV and the report
/// into `out_dir`, and with `verify` compares against Talbot and Adams.
pub fn execute(cfg: &RunConfig, out_dir: &Path, verify: bool) -> Result<Outcome, RunError> {
    let spec = build_spec(cfg)?;
    let grid = TimeGrid::uniform(cfg.solve.t_max, cfg.solve.steps).map_err(|e| RunError::Validation(e.to_string()))?;
    let opts = options(cfg);
    let method = choose_method(cfg, &spec);
    let mut report = report_header(cfg, &spec, method);

    let traj = match solve(&spec, &grid, method, &opts) {
        Ok(t) => t,
        Err(e) if method == Method::Series && cfg.solve.method == MethodChoice::Auto => {
            writeln!(report, "note: series failed ({e}); used Talbot inversion").unwrap();
            solve(&spec, &grid, Method::Talbot, &opts)?
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(k) = traj.truncation {
        writeln!(report, "truncation: {k}").unwrap();
    }
    writeln!(report, "error estimate: {:e}", traj.error_estimate).unwrap();
    for n in &traj.notes {
        writeln!(report, "note: {n}").unwrap();
    }

    if verify {
        let mut runs = vec![(method, Ok(traj.clone()))];
        for other in [Method::Talbot, Method::Adams] {
            if other == method {
                continue;
            }
            let res = if other == Method::Adams && spec.kind == DerivativeKind::RiemannLiouville {
                Err("not available in RL mode".to_string())
            } else {
                solve(&spec, &grid, other, &opts).map_err(|e| e.to_string())
            };
            runs.push((other, res));
        }
        writeln!(report, "verification (max componentwise deviation):").unwrap();
        for (i, (ma, ra)) in runs.iter().enumerate() {
            for (mb, rb) in &runs[i + 1..] {
                let line = match (ra, rb) {
                    (Ok(a), Ok(b)) => match a.max_deviation(b) {
                        Ok(d) => format!("{d:e}"),
                        Err(e) => format!("n/a ({e})"),
                    },
                    (Err(e), _) | (_, Err(e)) => format!("n/a ({e})"),
                };
                writeln!(report, "  {ma} vs {mb}: {line}").unwrap();
            }
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| RunError::Io(format!("{}: {e}", out_dir.display())))?;
    let tpath = out_dir.join(&cfg.output.trajectory);
    let rpath = out_dir.join(&cfg.output.report);
    fs::write(&tpath, csv(&traj)).map_err(|e| RunError::Io(format!("{}: {e}", tpath.display())))?;
    fs::write(&rpath, report).map_err(|e| RunError::Io(format!("{}: {e}", rpath.display())))?;
    Ok(Outcome {
        method,
        trajectory: tpath,
        report: rpath,
    })
}
