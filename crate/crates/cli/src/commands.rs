use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;

use nodeiso_core::analytic::{self, isolation_from_r2};
use nodeiso_core::quadrature::{expected_r2_quadrature, expected_r2_quadrature_real_m, QuadratureSpec};
use nodeiso_core::simulator::{run_monte_carlo_with, sample_topology, Execution};
use nodeiso_core::{MonteCarloEstimate, SimConfig};

use crate::args::{Channel, EvalArgs, InvertArgs, Method, SimArgs, SimulateArgs, SweepArgs};
use crate::error::CliError;
use crate::report::{Cell, Table};
use crate::sweep::{self, Curve, SweepSpec};

/// Closed-form E[R²]; `None` on the real-m path.
pub fn er2_analytic(ch: &Channel) -> Result<Option<f64>, CliError> {
    if ch.m_real.is_some() {
        return Ok(None);
    }
    Ok(Some(analytic::expected_r2(&ch.params, ch.scheme)?))
}

pub fn er2_quadrature(ch: &Channel) -> Result<f64, CliError> {
    let spec = QuadratureSpec::default();
    Ok(match ch.m_real {
        Some(m) => expected_r2_quadrature_real_m(&ch.params, m, ch.scheme, &spec)?,
        None => expected_r2_quadrature(&ch.params, ch.scheme, &spec)?,
    })
}

pub fn lambda_for(target: f64, er2: f64) -> f64 {
    -target.ln() / (PI * er2)
}

fn check_lambda(lambda: f64) -> Result<(), CliError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CliError::Usage(format!("--lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

fn sim_config(ch: &Channel, lambda: f64, sim: &SimArgs) -> Result<SimConfig, CliError> {
    if ch.m_real.is_some() {
        return Err(CliError::Usage("simulation needs an integer --m".into()));
    }
    let config = SimConfig {
        params: ch.params,
        scheme: ch.scheme,
        node_density: lambda,
        area_side: sim.area,
        boundary: sim.boundary.into(),
        runs: sim.runs,
        master_seed: sim.seed,
    };
    config.validate()?;
    Ok(config)
}

pub fn simulate_point(ch: &Channel, lambda: f64, sim: &SimArgs, serial: bool) -> Result<MonteCarloEstimate, CliError> {
    let config = sim_config(ch, lambda, sim)?;
    let execution = if serial { Execution::Serial } else { Execution::Parallel };
    Ok(run_monte_carlo_with(&config, execution)?)
}

fn channel_fields(ch: &Channel) -> Vec<(&'static str, Cell)> {
    let p = &ch.params;
    vec![
        ("ptx", Cell::Num(p.ptx)),
        ("w", Cell::Num(p.w)),
        ("k", Cell::Num(p.k)),
        ("psi", Cell::Num(p.psi)),
        ("alpha", Cell::Num(p.alpha)),
        ("sigma", Cell::Num(p.sigma)),
        ("m", Cell::Num(ch.m_value())),
        ("scheme", ch.scheme.name().into()),
        ("M", Cell::Int(u64::from(ch.scheme.branches()))),
    ]
}

pub fn eval(args: &EvalArgs) -> Result<Table, CliError> {
    let ch = args.channel.resolve()?;
    check_lambda(args.lambda)?;
    if args.outputs.contains(&Method::Simulation) {
        return Err(CliError::Usage(
            "eval computes analytic and quadrature values; use simulate for Monte Carlo".into(),
        ));
    }
    if ch.m_real.is_some() && args.outputs == [Method::Analytic] {
        return Err(CliError::Usage("closed forms need an integer --m; --m-real is quadrature only".into()));
    }
    let analytic = if args.outputs.contains(&Method::Analytic) { er2_analytic(&ch)? } else { None };
    let quad = if args.outputs.contains(&Method::Quadrature) { Some(er2_quadrature(&ch)?) } else { None };
    let p_i = |e: Option<f64>| Cell::opt(e.map(|e| isolation_from_r2(args.lambda, e)));
    let mut fields = channel_fields(&ch);
    fields.extend([
        ("lambda", Cell::Num(args.lambda)),
        ("er2_analytic", Cell::opt(analytic)),
        ("p_i_analytic", p_i(analytic)),
        ("er2_quadrature", Cell::opt(quad)),
        ("p_i_quadrature", p_i(quad)),
    ]);
    Ok(Table::record(fields))
}

pub fn invert(args: &InvertArgs) -> Result<Table, CliError> {
    let ch = args.channel.resolve()?;
    let t = args.target_pi;
    if !(t > 0.0 && t < 1.0) {
        return Err(CliError::Usage(format!("--target-pi must lie in (0, 1), got {t}")));
    }
    let (lambda, er2) = match ch.m_real {
        None => (
            analytic::min_density_for_isolation(&ch.params, ch.scheme, t)?,
            analytic::expected_r2(&ch.params, ch.scheme)?,
        ),
        Some(_) => {
            let er2 = er2_quadrature(&ch)?;
            (lambda_for(t, er2), er2)
        }
    };
    let mut fields = channel_fields(&ch);
    fields.extend([
        ("target_pi", Cell::Num(t)),
        ("lambda", Cell::Num(lambda)),
        ("er2", Cell::Num(er2)),
        ("p_i_roundtrip", Cell::Num(isolation_from_r2(lambda, er2))),
    ]);
    Ok(Table::record(fields))
}

/// Report plus whether the estimate is degenerate.
pub fn simulate(args: &SimulateArgs) -> Result<(Table, bool), CliError> {
    let ch = args.channel.resolve()?;
    check_lambda(args.lambda)?;
    let config = sim_config(&ch, args.lambda, &args.sim)?;
    if let Some(path) = &args.topology {
        if args.topology_run >= config.runs {
            return Err(CliError::Usage(format!("--topology-run must be below --runs ({})", config.runs)));
        }
        let topo = sample_topology(&config, args.topology_run)?;
        topo.write_export(BufWriter::new(File::create(path)?), config.master_seed, args.topology_run)?;
    }
    let est = simulate_point(&ch, args.lambda, &args.sim, args.serial)?;
    let reference = match analytic::expected_r2(&ch.params, ch.scheme) {
        Ok(e) => e,
        Err(_) => er2_quadrature(&ch)?,
    };
    let p_ref = isolation_from_r2(args.lambda, reference);
    let mut fields = channel_fields(&ch);
    fields.extend([
        ("lambda", Cell::Num(args.lambda)),
        ("area", Cell::Num(config.area_side)),
        ("boundary", config.boundary.to_string().into()),
        ("runs", Cell::Int(u64::from(config.runs))),
        ("seed", Cell::Int(config.master_seed)),
        ("p_isolated", Cell::Num(est.p_isolated)),
        ("std_error", Cell::Num(est.std_error)),
        ("ci_low", Cell::Num(est.ci95.0)),
        ("ci_high", Cell::Num(est.ci95.1)),
        ("total_nodes", Cell::Int(est.total_nodes)),
        ("total_isolated", Cell::Int(est.total_isolated)),
        ("runs_executed", Cell::Int(u64::from(est.runs_executed))),
        ("runs_empty", Cell::Int(u64::from(est.runs_empty))),
        ("runs_with_isolated", Cell::Int(u64::from(est.runs_with_isolated))),
        ("p_any_isolated", Cell::Num(est.p_any_isolated())),
        ("p_i_analytic", Cell::Num(p_ref)),
        ("z_score", Cell::Num(est.z_score(p_ref))),
    ]);
    Ok((Table::record(fields), est.is_degenerate()))
}

pub fn sweep(args: &SweepArgs) -> Result<Table, CliError> {
    let mut spec = match (args.figure, args.vary, &args.grid) {
        (Some(n), _, _) => {
            if args.channel.any_set() || args.lambda.is_some() {
                return Err(CliError::Usage("--figure presets fix the channel parameters and λ".into()));
            }
            sweep::figure(n, args.sim.clone())?
        }
        (None, Some(variable), Some(grid)) => {
            if variable == sweep::Variable::Lambda && args.lambda.is_some() {
                return Err(CliError::Usage("--lambda cannot be fixed while sweeping lambda".into()));
            }
            let ch = args.channel.resolve_for_sweep(variable)?;
            let lambda = args.lambda.unwrap_or(1e-5);
            check_lambda(lambda)?;
            let kind = args.channel.scheme.unwrap_or(crate::args::SchemeKind::None);
            let label = match (variable, kind) {
                (sweep::Variable::Branches, crate::args::SchemeKind::Mrc) => "mrc".to_string(),
                (sweep::Variable::Branches, crate::args::SchemeKind::Sc) => "sc".to_string(),
                _ => ch.scheme.to_string(),
            };
            let curve = Curve { label, channel: ch, kind, lambda };
            SweepSpec {
                variable,
                grid: grid.0.clone(),
                curves: vec![curve],
                outputs: vec![Method::Analytic],
                target_pi: None,
                sim: args.sim.clone(),
            }
        }
        _ => return Err(CliError::Usage("sweep needs --figure N, or --vary with --grid".into())),
    };
    if let Some(outputs) = &args.outputs {
        spec.outputs = outputs.clone();
    }
    if args.target_pi.is_some() {
        spec.target_pi = args.target_pi;
    }
    if spec.curves.iter().any(|c| c.channel.m_real.is_some()) {
        spec.outputs.retain(|m| *m != Method::Analytic);
        if !spec.outputs.contains(&Method::Quadrature) {
            spec.outputs.insert(0, Method::Quadrature);
        }
    }
    sweep::run(&spec)
}
