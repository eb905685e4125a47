//! Parameter sweeps and the figure presets.

use clap::ValueEnum;
use nodeiso_core::{ChannelParams, DiversityScheme};
use rayon::prelude::*;

use crate::args::{Channel, Method, SchemeKind, SimArgs};
use crate::commands::{er2_analytic, er2_quadrature, lambda_for, simulate_point};
use crate::error::CliError;
use crate::report::{Cell, Table};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variable {
    Lambda,
    Sigma,
    Alpha,
    /// Nakagami m.
    #[value(name = "m")]
    FadingM,
    /// Diversity order.
    #[value(name = "M")]
    Branches,
}

impl Variable {
    pub fn column(self) -> &'static str {
        match self {
            Variable::Lambda => "lambda",
            Variable::Sigma => "sigma",
            Variable::Alpha => "alpha",
            Variable::FadingM => "m",
            Variable::Branches => "M",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `a,b,c`, `start:stop:n` (linear) or `start:stop:n:log`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad grid value '{t}': {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let log = match parts.len() {
            3 => false,
            4 if parts[3] == "log" => true,
            _ => return Err(format!("range grid must be start:stop:n or start:stop:n:log, got '{s}'")),
        };
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|e| format!("bad grid count '{}': {e}", parts[2]))?;
        if n < 2 {
            return Err("range grid needs at least 2 points".into());
        }
        if log && !(a > 0.0 && b > 0.0) {
            return Err("log grid endpoints must be > 0".into());
        }
        let at = |i: usize| {
            let t = i as f64 / (n - 1) as f64;
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else if log {
                (a.ln() + t * (b.ln() - a.ln())).exp()
            } else {
                a + t * (b - a)
            }
        };
        Ok(Grid((0..n).map(at).collect()))
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>().map(Grid)
    }
}

#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub channel: Channel,
    pub kind: SchemeKind,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: Variable,
    pub grid: Vec<f64>,
    pub curves: Vec<Curve>,
    pub outputs: Vec<Method>,
    pub target_pi: Option<f64>,
    pub sim: SimArgs,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Usage("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Usage("sweep grid must be strictly increasing".into()));
        }
        if matches!(self.variable, Variable::FadingM | Variable::Branches) {
            let real_m = self.variable == Variable::FadingM && self.curves.iter().all(|c| c.channel.m_real.is_some());
            if !real_m && self.grid.iter().any(|v| !(*v >= 1.0) || v.fract() != 0.0 || *v > u32::MAX as f64) {
                return Err(CliError::Usage(format!(
                    "{} grid values must be positive integers",
                    self.variable.column()
                )));
            }
        }
        if self.variable == Variable::Branches && self.curves.iter().any(|c| c.kind == SchemeKind::None) {
            return Err(CliError::Usage("sweeping M needs --scheme mrc or --scheme sc".into()));
        }
        if let Some(t) = self.target_pi {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Usage(format!("--target-pi must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }
}

fn at_point(curve: &Curve, variable: Variable, value: f64) -> Result<(Channel, f64), CliError> {
    let mut ch = curve.channel;
    let mut lambda = curve.lambda;
    match variable {
        Variable::Lambda => lambda = value,
        Variable::Sigma => ch.params.sigma = value,
        Variable::Alpha => ch.params.alpha = value,
        Variable::FadingM => match ch.m_real {
            Some(_) => ch.m_real = Some(value),
            None => ch.params.m = value as u32,
        },
        Variable::Branches => {
            let b = value as u32;
            ch.scheme = match curve.kind {
                SchemeKind::Mrc => DiversityScheme::Mrc(b),
                SchemeKind::Sc => DiversityScheme::Sc(b),
                SchemeKind::None => DiversityScheme::None,
            }
            .normalized();
        }
    }
    ch.params.validate()?;
    Ok((ch, lambda))
}

pub const COLUMNS: [&str; 8] = [
    "p_i_analytic",
    "er2_analytic",
    "p_i_quadrature",
    "p_i_sim",
    "sim_stderr",
    "sim_ci_low",
    "sim_ci_high",
    "lambda_for_target",
];

fn row(spec: &SweepSpec, curve: &Curve, value: f64) -> Result<(Vec<Cell>, Vec<String>), CliError> {
    let (ch, lambda) = at_point(curve, spec.variable, value)?;
    let mut warnings = Vec::new();
    let wants = |m: Method| spec.outputs.contains(&m);
    let mut cells = vec![Cell::Empty; COLUMNS.len()];
    let analytic = if wants(Method::Analytic) { er2_analytic(&ch)? } else { None };
    if let Some(er2) = analytic {
        cells[0] = Cell::Num(nodeiso_core::analytic::isolation_from_r2(lambda, er2));
        cells[1] = Cell::Num(er2);
    }
    let quad = if wants(Method::Quadrature) || (analytic.is_none() && spec.target_pi.is_some()) {
        Some(er2_quadrature(&ch)?)
    } else {
        None
    };
    if wants(Method::Quadrature) {
        cells[2] = Cell::opt(quad.map(|e| nodeiso_core::analytic::isolation_from_r2(lambda, e)));
    }
    if wants(Method::Simulation) {
        let est = simulate_point(&ch, lambda, &spec.sim, false)?;
        if est.is_degenerate() {
            warnings.push(format!("only {} nodes sampled; estimate is unreliable", est.total_nodes));
        }
        cells[3] = Cell::Num(est.p_isolated);
        cells[4] = Cell::Num(est.std_error);
        cells[5] = Cell::Num(est.ci95.0);
        cells[6] = Cell::Num(est.ci95.1);
    }
    if let Some(target) = spec.target_pi {
        let er2 = analytic.or(quad).expect("an E[R²] is available when a target is set");
        cells[7] = Cell::Num(lambda_for(target, er2));
    }
    Ok((cells, warnings))
}

/// Evaluates every curve at every grid point; rows come out in curve-then-grid order.
pub fn run(spec: &SweepSpec) -> Result<Table, CliError> {
    spec.validate()?;
    let mut columns = vec!["curve".to_string(), spec.variable.column().to_string()];
    columns.extend(COLUMNS.iter().map(|c| c.to_string()));
    let mut table = Table::new(columns);
    let points: Vec<(&Curve, f64)> = spec.curves.iter().flat_map(|c| spec.grid.iter().map(move |v| (c, *v))).collect();
    let results: Vec<_> = points.par_iter().map(|(c, v)| row(spec, c, *v)).collect();
    let mut failures = 0;
    for ((curve, value), result) in points.iter().zip(results) {
        let head = vec![Cell::Text(curve.label.clone()), Cell::Num(*value)];
        let cells = match result {
            Ok((cells, warnings)) => {
                for w in warnings {
                    eprintln!("warning: {} {}={value}: {w}", curve.label, spec.variable.column());
                }
                cells
            }
            Err(e) => {
                failures += 1;
                eprintln!("warning: {} {}={value}: {e}", curve.label, spec.variable.column());
                vec![Cell::Empty; COLUMNS.len()]
            }
        };
        table.push(head.into_iter().chain(cells).collect());
    }
    if failures == points.len() {
        return Err(CliError::Numeric("every sweep point failed".into()));
    }
    Ok(table)
}

fn curve(label: String, params: ChannelParams, kind: SchemeKind, branches: u32, lambda: f64) -> Curve {
    let scheme = match kind {
        SchemeKind::None => DiversityScheme::None,
        SchemeKind::Mrc => DiversityScheme::Mrc(branches),
        SchemeKind::Sc => DiversityScheme::Sc(branches),
    }
    .normalized();
    Curve { label, channel: Channel { params, scheme, m_real: None }, kind, lambda }
}

fn steps(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// Parameter sets behind figures 2–7. σ is in natural-log units and the
/// λ axis of figures 2 and 3 spans 1e-5..1e-3 nodes/m².
pub fn figure(n: u8, sim: SimArgs) -> Result<SweepSpec, CliError> {
    let base = ChannelParams::default();
    let lambda_axis = parse_grid("1e-5:1e-3:25:log").expect("valid preset grid").0;
    let sigma_axis = steps(0.0, 4.0, 17);
    let sparse = 1e-5;
    let (variable, grid, curves, target_pi) = match n {
        2 => {
            let curves = [0.0, 2.0, 4.0]
                .iter()
                .map(|&s| curve(format!("sigma={s}"), base.with_m(2).with_sigma(s), SchemeKind::None, 1, sparse))
                .collect();
            (Variable::Lambda, lambda_axis, curves, None)
        }
        3 => {
            let curves = [1, 2, 4]
                .iter()
                .map(|&m| curve(format!("m={m}"), base.with_m(m).with_sigma(2.0), SchemeKind::None, 1, sparse))
                .collect();
            (Variable::Lambda, lambda_axis, curves, None)
        }
        4 => {
            let curves = vec![curve("m=4".into(), base.with_m(4), SchemeKind::None, 1, sparse)];
            (Variable::Sigma, sigma_axis, curves, Some(0.01))
        }
        5 => {
            let curves = [0.0, 2.0, 4.0]
                .iter()
                .map(|&s| curve(format!("sigma={s}"), base.with_m(4).with_sigma(s), SchemeKind::None, 1, sparse))
                .collect();
            (Variable::Alpha, steps(2.0, 6.0, 17), curves, None)
        }
        6 | 7 => {
            let (kind, name) = if n == 6 { (SchemeKind::Mrc, "mrc") } else { (SchemeKind::Sc, "sc") };
            let curves = (1..=4).map(|b| curve(format!("{name} M={b}"), base.with_m(2), kind, b, sparse)).collect();
            (Variable::Sigma, sigma_axis, curves, None)
        }
        _ => return Err(CliError::Usage(format!("no preset for figure {n} (choose 2..7)"))),
    };
    Ok(SweepSpec { variable, grid, curves, outputs: vec![Method::Analytic], target_pi, sim })
}
