//! Monte Carlo estimation of the node isolation probability.
//!
//! Each replication draws a Poisson number of nodes uniformly over a square,
//! realizes one reciprocal channel per unordered node pair, and counts nodes
//! with no link. Randomness is keyed, never shared: replication `r` owns a
//! ChaCha key derived from `(master_seed, r)`; stream 0 of that key places
//! the nodes and stream `1 + pair_index(i, j)` decides the link between
//! nodes `i < j`. Results are therefore identical under any scheduling.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::channel::{ChannelParams, DiversityScheme, LinkModel};
use crate::error::{domain, Result};
use crate::quadrature::{shadow_averaged_success, QuadratureSpec};

/// Estimates built from fewer nodes than this are flagged as degenerate.
pub const MIN_RELIABLE_NODES: u64 = 100;

/// Links whose shadow-averaged success probability is below this are never drawn.
const CUTOFF_PROBABILITY: f64 = 1e-12;
const CUTOFF_SAFETY: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Bounded,
    /// Distances wrap around the square.
    #[default]
    Toroidal,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Bounded => "bounded",
            Boundary::Toroidal => "toroidal",
        })
    }
}

impl FromStr for Boundary {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounded" => Ok(Boundary::Bounded),
            "toroidal" => Ok(Boundary::Toroidal),
            other => domain(format!("unknown boundary mode '{other}' (expected bounded or toroidal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ChannelParams,
    pub scheme: DiversityScheme,
    /// Nodes per square meter.
    pub node_density: f64,
    /// Side of the square region, meters.
    pub area_side: f64,
    pub boundary: Boundary,
    pub runs: u32,
    pub master_seed: u64,
}

impl SimConfig {
    /// 100 m × 100 m torus, 1000 replications.
    pub fn new(params: ChannelParams, scheme: DiversityScheme, node_density: f64) -> Self {
        Self {
            params,
            scheme,
            node_density,
            area_side: 100.0,
            boundary: Boundary::Toroidal,
            runs: 1000,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scheme.validate()?;
        if !(self.node_density >= 0.0) || !self.node_density.is_finite() {
            return domain(format!("node density must be finite and >= 0, got {}", self.node_density));
        }
        if !(self.area_side > 0.0) || !self.area_side.is_finite() {
            return domain(format!("area side must be finite and > 0, got {}", self.area_side));
        }
        if self.runs == 0 {
            return domain("runs must be >= 1");
        }
        Ok(())
    }
}

/// Node positions in `[0, area_side)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<(f64, f64)>,
    pub area_side: f64,
    pub boundary: Boundary,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Writes the `x,y` export preceded by its `# area_side=… boundary=… seed=… run=…` header.
    pub fn write_export<W: Write>(&self, mut out: W, seed: u64, run: u32) -> io::Result<()> {
        writeln!(out, "# area_side={} boundary={} seed={seed} run={run}", self.area_side, self.boundary)?;
        for (x, y) in &self.positions {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }

    /// Parses a topology export, returning the topology with its seed and run index.
    pub fn read_export<R: BufRead>(input: R) -> Result<(Topology, u64, u32)> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(Ok(h)) => h,
            _ => return domain("topology export is empty"),
        };
        let Some(fields) = header.strip_prefix("# ") else {
            return domain("topology export must start with a '# ' header line");
        };
        let (mut side, mut boundary, mut seed, mut run) = (None, None, None, None);
        for field in fields.split_whitespace() {
            let Some((key, value)) = field.split_once('=') else {
                return domain(format!("malformed header field '{field}'"));
            };
            let bad = |_| crate::Error::Domain(format!("bad value in header field '{field}'"));
            match key {
                "area_side" => side = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "boundary" => boundary = Some(value.parse::<Boundary>()?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                "run" => run = Some(value.parse::<u32>().map_err(|e| bad(e.to_string()))?),
                _ => return domain(format!("unknown header field '{key}'")),
            }
        }
        let (Some(area_side), Some(boundary), Some(seed), Some(run)) = (side, boundary, seed, run) else {
            return domain("header must carry area_side, boundary, seed and run");
        };
        let mut positions = Vec::new();
        for line in lines {
            let line = line.map_err(|e| crate::Error::Domain(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line.split_once(',').and_then(|(x, y)| Some((x.trim().parse().ok()?, y.trim().parse().ok()?)));
            match parsed {
                Some(p) => positions.push(p),
                None => return domain(format!("malformed position line '{line}'")),
            }
        }
        Ok((Topology { positions, area_side, boundary }, seed, run))
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed random streams belonging to one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStreams {
    key: [u8; 32],
}

impl RunStreams {
    pub fn new(master_seed: u64, run_index: u32) -> Self {
        let mut state = master_seed ^ (u64::from(run_index)).wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { key }
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }

    /// Stream used to place nodes.
    pub fn topology(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    /// Stream deciding the link between nodes `i` and `j` (order-insensitive).
    pub fn pair(&self, i: usize, j: usize) -> ChaCha8Rng {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let index = (hi as u64) * (hi as u64 - 1) / 2 + lo as u64;
        self.stream(1 + index)
    }
}

/// Draws the topology of replication `run_index`.
pub fn sample_topology(config: &SimConfig, run_index: u32) -> Result<Topology> {
    config.validate()?;
    let mut rng = RunStreams::new(config.master_seed, run_index).topology();
    let mean = config.node_density * config.area_side * config.area_side;
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).map_err(|e| crate::Error::Domain(e.to_string()))?;
        poisson.sample(&mut rng) as usize
    } else {
        0
    };
    let side = config.area_side;
    let positions = (0..count)
        .map(|_| {
            let x: f64 = rng.random::<f64>() * side;
            let y: f64 = rng.random::<f64>() * side;
            (x, y)
        })
        .collect();
    Ok(Topology { positions, area_side: side, boundary: config.boundary })
}

/// Euclidean distance, with per-axis wraparound on a torus.
pub fn pair_distance(p1: (f64, f64), p2: (f64, f64), area_side: f64, boundary: Boundary) -> f64 {
    let mut dx = (p1.0 - p2.0).abs();
    let mut dy = (p1.1 - p2.1).abs();
    if boundary == Boundary::Toroidal {
        dx = dx.min(area_side - dx);
        dy = dy.min(area_side - dy);
    }
    dx.hypot(dy)
}

/// Per-link channel sampler for one (params, scheme) pair.
#[derive(Debug, Clone)]
pub struct LinkSampler {
    params: ChannelParams,
    scheme: DiversityScheme,
    /// Unit-mean branch SNR (shape m) or MRC output (shape mM, scale 1/m).
    fading: Gamma<f64>,
    cutoff: f64,
}

impl LinkSampler {
    /// Sampler whose cutoff distance is where the shadow-averaged success
    /// probability falls below 1e-12.
    pub fn new(params: ChannelParams, scheme: DiversityScheme) -> Result<Self> {
        let mut sampler = Self::without_cutoff(params, scheme)?;
        sampler.cutoff = cutoff_distance(&params, sampler.scheme)?;
        Ok(sampler)
    }

    /// Sampler that draws every link regardless of distance.
    pub fn without_cutoff(params: ChannelParams, scheme: DiversityScheme) -> Result<Self> {
        params.validate()?;
        scheme.validate()?;
        let scheme = scheme.normalized();
        let m = params.m as f64;
        let shape = match scheme {
            DiversityScheme::Mrc(b) => m * b as f64,
            _ => m,
        };
        let fading = Gamma::new(shape, 1.0 / m).map_err(|e| crate::Error::Domain(e.to_string()))?;
        Ok(Self { params, scheme, fading, cutoff: f64::INFINITY })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// One channel realization at distance `rho`; true if the combined SNR reaches ψ.
    pub fn trial<R: Rng + ?Sized>(&self, rho: f64, rng: &mut R) -> bool {
        let p = &self.params;
        let shadow = if p.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            (p.sigma * z).exp()
        } else {
            1.0
        };
        let y = shadow * p.mean_snr(rho);
        // compare unit-mean fading against ψ/y
        let needed = p.psi / y;
        match self.scheme {
            DiversityScheme::None | DiversityScheme::Mrc(_) => self.fading.sample(rng) >= needed,
            DiversityScheme::Sc(b) => (0..b).any(|_| self.fading.sample(rng) >= needed),
        }
    }
}

fn cutoff_distance(params: &ChannelParams, scheme: DiversityScheme) -> Result<f64> {
    let link = LinkModel::new(*params, scheme)?;
    let spec = QuadratureSpec::default();
    let avg = |rho: f64| shadow_averaged_success(&link, params.mean_snr(rho), &spec);
    let mut lo = params.disk_radius();
    let mut hi = 2.0 * lo;
    let mut guard = 0;
    while avg(hi)? >= CUTOFF_PROBABILITY {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Ok(f64::INFINITY);
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if avg(mid)? >= CUTOFF_PROBABILITY {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi * CUTOFF_SAFETY)
}

/// One link realization at distance `rho` under the given channel.
pub fn link_trial<R: Rng + ?Sized>(
    rho: f64,
    params: &ChannelParams,
    scheme: DiversityScheme,
    rng: &mut R,
) -> Result<bool> {
    if !(rho > 0.0) {
        return domain(format!("link distance must be > 0, got {rho}"));
    }
    Ok(LinkSampler::without_cutoff(*params, scheme)?.trial(rho, rng))
}

/// Isolated-node count of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IsolationCount {
    pub isolated: u32,
    pub total: u32,
}

/// Counts degree-zero nodes. One channel draw decides each unordered pair;
/// pairs whose endpoints are both already linked are not drawn, since their
/// outcome cannot change any degree-zero flag.
pub fn isolation_count(topology: &Topology, sampler: &LinkSampler, streams: &RunStreams) -> IsolationCount {
    let n = topology.len();
    let mut linked = vec![false; n];
    for j in 1..n {
        for i in 0..j {
            if linked[i] && linked[j] {
                continue;
            }
            let d = pair_distance(topology.positions[i], topology.positions[j], topology.area_side, topology.boundary);
            if d > sampler.cutoff {
                continue;
            }
            // coincident points are always connected
            let up = d <= 0.0 || sampler.trial(d, &mut streams.pair(i, j));
            if up {
                linked[i] = true;
                linked[j] = true;
            }
        }
    }
    IsolationCount { isolated: linked.iter().filter(|l| !**l).count() as u32, total: n as u32 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    /// Isolated nodes over all nodes, pooled across replications.
    pub p_isolated: f64,
    /// Between-replication standard error of the pooled ratio.
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub total_nodes: u64,
    pub total_isolated: u64,
    pub runs_executed: u32,
    pub runs_empty: u32,
    /// Non-empty replications containing at least one isolated node.
    pub runs_with_isolated: u32,
}

impl MonteCarloEstimate {
    /// Fraction of non-empty replications with at least one isolated node.
    pub fn p_any_isolated(&self) -> f64 {
        let nonempty = self.runs_executed - self.runs_empty;
        if nonempty == 0 {
            f64::NAN
        } else {
            self.runs_with_isolated as f64 / nonempty as f64
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.total_nodes < MIN_RELIABLE_NODES
    }

    /// (estimate - reference) / std_error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.p_isolated - reference) / self.std_error
    }

    fn from_counts(counts: &[IsolationCount]) -> Self {
        let total_nodes: u64 = counts.iter().map(|c| u64::from(c.total)).sum();
        let total_isolated: u64 = counts.iter().map(|c| u64::from(c.isolated)).sum();
        let runs_executed = counts.len() as u32;
        let runs_empty = counts.iter().filter(|c| c.total == 0).count() as u32;
        let runs_with_isolated = counts.iter().filter(|c| c.isolated > 0).count() as u32;
        if total_nodes == 0 {
            return Self {
                p_isolated: f64::NAN,
                std_error: f64::NAN,
                ci95: (0.0, 1.0),
                total_nodes,
                total_isolated,
                runs_executed,
                runs_empty,
                runs_with_isolated,
            };
        }
        let p = total_isolated as f64 / total_nodes as f64;
        let r = counts.len() as f64;
        let std_error = if counts.len() > 1 {
            // linearized ratio-estimator variance over replications
            let ss: f64 = counts
                .iter()
                .map(|c| {
                    let resid = c.isolated as f64 - p * c.total as f64;
                    resid * resid
                })
                .sum();
            (r / (r - 1.0) * ss).sqrt() / total_nodes as f64
        } else {
            (p * (1.0 - p) / total_nodes as f64).sqrt()
        };
        let half = 1.96 * std_error;
        Self {
            p_isolated: p,
            std_error,
            ci95: ((p - half).max(0.0), (p + half).min(1.0)),
            total_nodes,
            total_isolated,
            runs_executed,
            runs_empty,
            runs_with_isolated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Replications spread over the current rayon pool.
    #[default]
    Parallel,
}

fn run_replication(config: &SimConfig, sampler: &LinkSampler, run: u32) -> Result<IsolationCount> {
    let topology = sample_topology(config, run)?;
    Ok(isolation_count(&topology, sampler, &RunStreams::new(config.master_seed, run)))
}

/// Runs `config.runs` replications and pools them.
pub fn run_monte_carlo(config: &SimConfig) -> Result<MonteCarloEstimate> {
    run_monte_carlo_with(config, Execution::Parallel)
}

pub fn run_monte_carlo_with(config: &SimConfig, execution: Execution) -> Result<MonteCarloEstimate> {
    config.validate()?;
    let sampler = LinkSampler::new(config.params, config.scheme)?;
    let counts: Vec<IsolationCount> = match execution {
        Execution::Serial => (0..config.runs).map(|r| run_replication(config, &sampler, r)).collect::<Result<_>>()?,
        Execution::Parallel => {
            (0..config.runs).into_par_iter().map(|r| run_replication(config, &sampler, r)).collect::<Result<_>>()?
        }
    };
    Ok(MonteCarloEstimate::from_counts(&counts))
}

/// Analytic isolation probability for the same channel and density.
pub fn analytic_reference(config: &SimConfig) -> Result<f64> {
    analytic::isolation_probability(&analytic::IsolationQuery::new(config.params, config.scheme, config.node_density))
}
