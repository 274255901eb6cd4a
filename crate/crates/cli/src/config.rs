//! Run configuration: a TOML file with `system`, `solve` and `output` tables.
//!
//! ```toml
//! mode = "caputo"                  # or "rl"
//!
//! [system]
//! orders = ["9/10", "4/5"]         # "q/p" and integers are exact; decimals are not
//! matrix = [[-1, 0], [1, [-1, 0]]] # entries: numbers or [re, im] pairs
//! initial = [1, 0]
//! forcing = ["0", "exp(-t)"]       # optional, one expression per component
//!
//! [solve]
//! method = "auto"
//! t_max = 5.0
//! steps = 500
//!
//! [output]
//! trajectory = "trajectory.csv"
//! ```

use std::fmt;

use fracsys::solver::{Method, Ratio};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::expr::Expr;

/// Validation failure, anchored to a line of the config file when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Caputo,
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Exact(Ratio),
    Decimal(f64),
}

impl Order {
    pub fn value(self) -> f64 {
        match self {
            Order::Exact(r) => r.value(),
            Order::Decimal(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Fixed(Method),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub source: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub method: MethodChoice,
    pub t_max: f64,
    pub steps: usize,
    pub truncation: Option<usize>,
    pub max_truncation: Option<usize>,
    pub series_tol: Option<f64>,
    pub fallback_tol: Option<f64>,
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub trajectory: String,
    pub report: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub orders: Vec<Order>,
    pub matrix: Vec<Vec<Complex64>>,
    pub initial: Vec<Complex64>,
    pub forcing: Option<Vec<Forcing>>,
    pub solve: SolveConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    /// All orders as exact fractions, if they were given that way.
    pub fn exact_orders(&self) -> Option<Vec<Ratio>> {
        self.orders
            .iter()
            .map(|o| match o {
                Order::Exact(r) => Some(*r),
                Order::Decimal(_) => None,
            })
            .collect()
    }
}

// ------------------------------------------------------------------ file format

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn value(&self) -> f64 {
        match *self {
            Num::Int(i) => i as f64,
            Num::Float(x) => x,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum Entry {
    Real(Num),
    Pair([Num; 2]),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum RawOrder {
    Text(String),
    Int(i64),
    Float(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Spanned<String>>,
    system: Spanned<RawSystem>,
    solve: Spanned<RawSolve>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    orders: Spanned<Vec<Spanned<RawOrder>>>,
    matrix: Spanned<Vec<Spanned<Vec<Entry>>>>,
    initial: Spanned<Vec<Entry>>,
    forcing: Option<Spanned<Vec<Spanned<String>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolve {
    #[serde(default)]
    method: Option<Spanned<String>>,
    t_max: Spanned<Num>,
    steps: Spanned<i64>,
    truncation: Option<Spanned<i64>>,
    max_truncation: Option<Spanned<i64>>,
    series_tol: Option<Spanned<Num>>,
    fallback_tol: Option<Spanned<Num>>,
    refine: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    trajectory: Option<String>,
    report: Option<String>,
    format: Option<Spanned<String>>,
}

/// Line number (1-based) of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(line_of(self.src, span.start)),
            message: message.into(),
        })
    }

    fn positive_count(&self, v: &Spanned<i64>, name: &str, min: i64) -> Result<usize, ConfigError> {
        if *v.get_ref() < min {
            return self.err(v.span(), format!("{name} must be at least {min}"));
        }
        Ok(*v.get_ref() as usize)
    }

    fn positive(&self, v: &Spanned<Num>, name: &str) -> Result<f64, ConfigError> {
        let x = v.get_ref().value();
        if !(x > 0.0 && x.is_finite()) {
            return self.err(v.span(), format!("{name} must be positive and finite"));
        }
        Ok(x)
    }

    fn entry(&self, e: &Entry, span: std::ops::Range<usize>) -> Result<Complex64, ConfigError> {
        let z = match e {
            Entry::Real(x) => Complex64::new(x.value(), 0.0),
            Entry::Pair([re, im]) => Complex64::new(re.value(), im.value()),
        };
        if !(z.re.is_finite() && z.im.is_finite()) {
            return self.err(span, "entries must be finite");
        }
        Ok(z)
    }
}

fn parse_order(text: &str) -> Option<Order> {
    let s = text.trim();
    if s.contains('/') || s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse::<Ratio>().ok().map(Order::Exact)
    } else {
        s.parse::<f64>().ok().map(Order::Decimal)
    }
}

fn parse_method(s: &str) -> Option<MethodChoice> {
    if s == "auto" {
        Some(MethodChoice::Auto)
    } else {
        s.parse::<Method>().ok().map(MethodChoice::Fixed)
    }
}

/// Parses and validates a configuration.
pub fn parse(src: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of(src, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let cx = Ctx { src };

    let mode = match &raw.mode {
        None => Mode::Caputo,
        Some(m) => match m.get_ref().as_str() {
            "caputo" => Mode::Caputo,
            "rl" => Mode::Rl,
            other => return cx.err(m.span(), format!("mode must be 'caputo' or 'rl', not '{other}'")),
        },
    };

    let sys = raw.system.get_ref();
    let mut orders = Vec::new();
    for o in sys.orders.get_ref() {
        let parsed = match o.get_ref() {
            RawOrder::Text(s) => parse_order(s),
            RawOrder::Int(i) if *i >= 0 => Some(Order::Exact(Ratio::new(*i as u64, 1).expect("nonzero denominator"))),
            RawOrder::Int(_) => None,
            RawOrder::Float(x) => Some(Order::Decimal(*x)),
        };
        let Some(order) = parsed else {
            return cx.err(o.span(), "orders must be fractions like \"1/3\" or decimals");
        };
        let v = order.value();
        if !(v > 0.0 && v <= 1.0) {
            return cx.err(o.span(), format!("order {v} is outside (0, 1]"));
        }
        orders.push(order);
    }
    let m = orders.len();
    if m == 0 {
        return cx.err(sys.orders.span(), "at least one order is required");
    }

    let rows = sys.matrix.get_ref();
    if rows.len() != m {
        return cx.err(
            sys.matrix.span(),
            format!("matrix has {} rows, expected {m}", rows.len()),
        );
    }
    let mut matrix = Vec::with_capacity(m);
    for row in rows {
        if row.get_ref().len() != m {
            return cx.err(
                row.span(),
                format!("matrix row has {} entries, expected {m}", row.get_ref().len()),
            );
        }
        matrix.push(
            row.get_ref()
                .iter()
                .map(|e| cx.entry(e, row.span()))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }

    let init = sys.initial.get_ref();
    if init.len() != m {
        return cx.err(
            sys.initial.span(),
            format!("initial vector has {} entries, expected {m}", init.len()),
        );
    }
    let initial = init
        .iter()
        .map(|e| cx.entry(e, sys.initial.span()))
        .collect::<Result<Vec<_>, _>>()?;

    let forcing = match &sys.forcing {
        None => None,
        Some(list) => {
            if list.get_ref().len() != m {
                return cx.err(
                    list.span(),
                    format!("forcing has {} expressions, expected {m}", list.get_ref().len()),
                );
            }
            let mut out = Vec::with_capacity(m);
            for (j, s) in list.get_ref().iter().enumerate() {
                let expr = match Expr::parse(s.get_ref()) {
                    Ok(e) => e,
                    Err(e) => return cx.err(s.span(), format!("forcing component {}: {e}", j + 1)),
                };
                out.push(Forcing {
                    source: s.get_ref().clone(),
                    expr,
                });
            }
            Some(out)
        }
    };

    let sv = raw.solve.get_ref();
    let method = match &sv.method {
        None => MethodChoice::Auto,
        Some(s) => match parse_method(s.get_ref()) {
            Some(mc) => mc,
            None => {
                return cx.err(
                    s.span(),
                    format!(
                        "unknown method '{}' (auto, series, commensurate, rational, triangular, talbot, adams)",
                        s.get_ref()
                    ),
                )
            }
        },
    };
    let opt_count = |v: &Option<Spanned<i64>>, name: &str, min: i64| {
        v.as_ref().map(|x| cx.positive_count(x, name, min)).transpose()
    };
    let opt_pos = |v: &Option<Spanned<Num>>, name: &str| v.as_ref().map(|x| cx.positive(x, name)).transpose();
    let solve = SolveConfig {
        method,
        t_max: cx.positive(&sv.t_max, "t_max")?,
        steps: cx.positive_count(&sv.steps, "steps", 2)?,
        truncation: opt_count(&sv.truncation, "truncation", 1)?,
        max_truncation: opt_count(&sv.max_truncation, "max_truncation", 1)?,
        series_tol: opt_pos(&sv.series_tol, "series_tol")?,
        fallback_tol: opt_pos(&sv.fallback_tol, "fallback_tol")?,
        refine: opt_count(&sv.refine, "refine", 1)?,
    };

    let ms = sv.method.as_ref().map_or(raw.solve.span(), |s| s.span());
    let exact = orders.iter().all(|o| matches!(o, Order::Exact(_)));
    match method {
        MethodChoice::Fixed(Method::Commensurate) if orders.iter().any(|o| o.value() != orders[0].value()) => {
            return cx.err(ms, "method 'commensurate' needs equal orders");
        }
        MethodChoice::Fixed(Method::Rational) if !exact => {
            return cx.err(
                ms,
                "method 'rational' needs every order written as a fraction such as \"1/3\"",
            );
        }
        MethodChoice::Fixed(Method::Adams) if mode == Mode::Rl => {
            return cx.err(ms, "method 'adams' handles Caputo systems only");
        }
        _ => {}
    }

    if let Some(f) = &raw.output.format {
        if f.get_ref() != "csv" {
            return cx.err(
                f.span(),
                format!("unsupported output format '{}' (only csv)", f.get_ref()),
            );
        }
    }
    let output = OutputConfig {
        dir: raw.output.dir.clone(),
        trajectory: raw.output.trajectory.clone().unwrap_or_else(|| "trajectory.csv".into()),
        report: raw.output.report.clone().unwrap_or_else(|| "report.txt".into()),
    };

    Ok(RunConfig {
        mode,
        orders,
        matrix,
        initial,
        forcing,
        solve,
        output,
    })
}

// ------------------------------------------------------------------ echo

#[derive(Serialize)]
struct DumpConfig {
    mode: &'static str,
    system: DumpSystem,
    solve: DumpSolve,
    output: DumpOutput,
}

#[derive(Serialize)]
struct DumpSystem {
    orders: Vec<RawOrder>,
    matrix: Vec<Vec<Entry>>,
    initial: Vec<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    forcing: Option<Vec<String>>,
}

#[derive(Serialize)]
struct DumpSolve {
    method: String,
    t_max: f64,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    series_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fallback_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine: Option<usize>,
}

#[derive(Serialize)]
struct DumpOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<String>,
    trajectory: String,
    report: String,
    format: &'static str,
}

fn dump_entry(z: Complex64) -> Entry {
    Entry::Pair([Num::Float(z.re), Num::Float(z.im)])
}

/// Normalised TOML echo of `cfg`; parsing it yields an equal configuration.
pub fn dump(cfg: &RunConfig) -> String {
    let d = DumpConfig {
        mode: match cfg.mode {
            Mode::Caputo => "caputo",
            Mode::Rl => "rl",
        },
        system: DumpSystem {
            orders: cfg
                .orders
                .iter()
                .map(|o| match o {
                    Order::Exact(r) => RawOrder::Text(r.to_string()),
                    Order::Decimal(x) => RawOrder::Float(*x),
                })
                .collect(),
            matrix: cfg
                .matrix
                .iter()
                .map(|r| r.iter().map(|&z| dump_entry(z)).collect())
                .collect(),
            initial: cfg.initial.iter().map(|&z| dump_entry(z)).collect(),
            forcing: cfg
                .forcing
                .as_ref()
                .map(|f| f.iter().map(|x| x.source.clone()).collect()),
        },
        solve: DumpSolve {
            method: match cfg.solve.method {
                MethodChoice::Auto => "auto".into(),
                MethodChoice::Fixed(m) => m.name().into(),
            },
            t_max: cfg.solve.t_max,
            steps: cfg.solve.steps,
            truncation: cfg.solve.truncation,
            max_truncation: cfg.solve.max_truncation,
            series_tol: cfg.solve.series_tol,
            fallback_tol: cfg.solve.fallback_tol,
            refine: cfg.solve.refine,
        },
        output: DumpOutput {
            dir: cfg.output.dir.clone(),
            trajectory: cfg.output.trajectory.clone(),
            report: cfg.output.report.clone(),
            format: "csv",
        },
    };
    toml::to_string(&d).expect("configuration serialises")
}
