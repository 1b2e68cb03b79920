//! Benchmark harness: solve every instance with every method and emit one
//! CSV row per pair.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use wdplab_core::exact::{branch_and_bound, brute_force, BnbConfig, ExactResult};
use wdplab_core::gnn::GnnModel;
use wdplab_core::heuristics::{casanova, greedy_density, rlp, ss, CasanovaParams};
use wdplab_core::instgen::SynthConfig;
use wdplab_core::model::{evaluate_allocation, metrics};
use wdplab_core::postprocess::{basic_solve, traversal_solve};
use wdplab_core::{seeded_rng, Allocation, AuctionInstance};

use crate::clock::WallClock;
use crate::io::{json_files, load_model, read_instance};
use crate::pipeline::generate_instances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Exact,
    Brute,
    GnnBasic,
    GnnTraversal,
    Rlp,
    Ss,
    Casanova,
    Greedy,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Exact,
        Method::Brute,
        Method::GnnBasic,
        Method::GnnTraversal,
        Method::Rlp,
        Method::Ss,
        Method::Casanova,
        Method::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Brute => "brute",
            Method::GnnBasic => "gnn-basic",
            Method::GnnTraversal => "gnn-traversal",
            Method::Rlp => "rlp",
            Method::Ss => "ss",
            Method::Casanova => "casanova",
            Method::Greedy => "greedy",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Method::GnnBasic | Method::GnnTraversal)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| anyhow!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferencePolicy {
    /// Branch-and-bound revenue when proven optimal, otherwise the best
    /// revenue seen in the run.
    Exact,
    /// Best revenue among the benchmarked methods.
    BestKnown,
}

#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// Every `*.json` instance file of a directory.
    Dir(PathBuf),
    Synthetic { generator: SynthConfig, count: usize },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub source: InstanceSource,
    pub methods: Vec<Method>,
    pub model: Option<PathBuf>,
    pub reference: ReferencePolicy,
    pub seed: u64,
    /// Time limit of every branch-and-bound call.
    pub time_limit: Duration,
    /// Writes 0 in the time column so repeated runs compare byte for byte.
    pub omit_timing: bool,
    pub casanova: CasanovaParams,
}

impl BenchConfig {
    pub fn new(source: InstanceSource, methods: Vec<Method>, seed: u64) -> Self {
        BenchConfig {
            source,
            methods,
            model: None,
            reference: ReferencePolicy::Exact,
            seed,
            time_limit: Duration::from_secs(60),
            omit_timing: false,
            casanova: CasanovaParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub u_max: u32,
    pub method: String,
    pub revenue: f64,
    pub reference: f64,
    pub gap: f64,
    pub time_ms: f64,
    pub utilization: f64,
    pub satisfaction: f64,
    pub iterations: u64,
    /// Whether the reference revenue is a proven optimum.
    pub proven_optimal: bool,
}

pub const CSV_HEADER: &str =
    "instance,M,N,u_max,method,revenue,reference,gap,time_ms,utilization,satisfaction,iterations,proven_optimal";

struct Solved {
    allocation: Allocation,
    iterations: u64,
    elapsed: Duration,
    proven: bool,
}

fn load_instances(source: &InstanceSource, seed: u64) -> Result<Vec<AuctionInstance>> {
    match source {
        InstanceSource::Dir(dir) => json_files(dir)?.iter().map(|p| read_instance(p)).collect(),
        InstanceSource::Synthetic { generator, count } => generate_instances(generator, *count, seed),
    }
}

/// Seed of the random stream used by one (instance, method) cell.
fn cell_seed(seed: u64, instance: usize, method: Method) -> u64 {
    let mut z = seed ^ ((instance as u64) << 8 | method as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 31)
}

fn exact_solved(res: ExactResult, elapsed: Duration) -> Solved {
    Solved { allocation: res.allocation, iterations: res.nodes_explored, elapsed, proven: res.proven_optimal }
}

fn solve(cfg: &BenchConfig, inst: &AuctionInstance, method: Method, model: Option<&GnnModel>, seed: u64) -> Result<Solved> {
    let start = Instant::now();
    let heuristic = |allocation: Allocation| Solved { allocation, iterations: 0, elapsed: start.elapsed(), proven: false };
    Ok(match method {
        Method::Exact => {
            let res = branch_and_bound(inst, &BnbConfig::with_time_limit(cfg.time_limit), &WallClock::start());
            exact_solved(res, start.elapsed())
        }
        Method::Brute => {
            let res = brute_force(inst)?;
            exact_solved(res, start.elapsed())
        }
        Method::GnnBasic | Method::GnnTraversal => {
            let model = model.context("gnn methods need a model")?;
            let trace = if method == Method::GnnBasic { basic_solve(model, inst)? } else { traversal_solve(model, inst)? };
            Solved { allocation: trace.allocation, iterations: trace.gnn_calls as u64, elapsed: start.elapsed(), proven: false }
        }
        Method::Rlp => heuristic(rlp(inst, &mut seeded_rng(seed))?),
        Method::Ss => heuristic(ss(inst)?),
        Method::Casanova => heuristic(casanova(inst, &cfg.casanova, &mut seeded_rng(seed))),
        Method::Greedy => heuristic(greedy_density(inst)),
    })
}

/// Solves every (instance, method) pair. Rows are sorted by instance name,
/// then method name. Any infeasible allocation aborts the run.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<ReportRow>> {
    ensure!(!cfg.methods.is_empty(), "no methods selected");
    if cfg.methods.iter().any(|m| m.needs_model()) {
        ensure!(cfg.model.is_some(), "gnn methods need a model path");
    }
    let model = cfg.model.as_deref().map(load_model).transpose()?;
    let instances = load_instances(&cfg.source, cfg.seed)?;
    let mut methods = cfg.methods.clone();
    methods.sort_by_key(|m| m.name());
    methods.dedup();

    let mut rows = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let mut solved = Vec::with_capacity(methods.len());
        for &method in &methods {
            let s = solve(cfg, inst, method, model.as_ref(), cell_seed(cfg.seed, i, method))?;
            let eval = evaluate_allocation(inst, &s.allocation)?;
            if !eval.feasible {
                bail!("method {method} returned an infeasible allocation on {}", inst.name);
            }
            solved.push((method, s, eval.revenue));
        }
        let best = solved.iter().map(|(_, _, r)| *r).fold(0.0, f64::max);
        let (reference, proven) = match cfg.reference {
            ReferencePolicy::Exact => {
                let exact = match solved.iter().find(|(m, ..)| *m == Method::Exact) {
                    Some((_, s, r)) => (*r, s.proven),
                    None => {
                        let res = branch_and_bound(inst, &BnbConfig::with_time_limit(cfg.time_limit), &WallClock::start());
                        (res.revenue, res.proven_optimal)
                    }
                };
                if exact.1 {
                    exact
                } else {
                    (exact.0.max(best), false)
                }
            }
            ReferencePolicy::BestKnown => {
                let proven = solved.iter().any(|(m, s, _)| matches!(m, Method::Exact | Method::Brute) && s.proven);
                (best, proven)
            }
        };
        for (method, s, _) in solved {
            let met = metrics(inst, &s.allocation, reference).with_context(|| format!("metrics of {method} on {}", inst.name))?;
            rows.push(ReportRow {
                instance: inst.name.clone(),
                m: inst.num_bids(),
                n: inst.num_items(),
                u_max: inst.max_units(),
                method: method.name().to_owned(),
                revenue: met.revenue,
                reference,
                gap: met.gap,
                time_ms: if cfg.omit_timing { 0.0 } else { s.elapsed.as_secs_f64() * 1e3 },
                utilization: met.utilization,
                satisfaction: met.satisfaction,
                iterations: s.iterations,
                proven_optimal: proven,
            });
        }
    }
    rows.sort_by(|a, b| (&a.instance, &a.method).cmp(&(&b.instance, &b.method)));
    Ok(rows)
}

pub fn write_report<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report<R: std::io::Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    ensure!(header.join(",") == CSV_HEADER, "unexpected report header {:?}", header.join(","));
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Mean metrics of one (M, method) group.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub m: usize,
    pub method: String,
    pub instances: usize,
    pub gap: f64,
    pub time_ms: f64,
    pub utilization: f64,
    pub satisfaction: f64,
    pub iterations: f64,
}

pub fn summarize(rows: &[ReportRow]) -> Vec<Summary> {
    let mut keys: Vec<(usize, &str)> = rows.iter().map(|r| (r.m, r.method.as_str())).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(m, method)| {
            let group: Vec<&ReportRow> = rows.iter().filter(|r| r.m == m && r.method == method).collect();
            let k = group.len() as f64;
            let mean = |f: fn(&ReportRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / k;
            Summary {
                m,
                method: method.to_owned(),
                instances: group.len(),
                gap: mean(|r| r.gap),
                time_ms: mean(|r| r.time_ms),
                utilization: mean(|r| r.utilization),
                satisfaction: mean(|r| r.satisfaction),
                iterations: mean(|r| r.iterations as f64),
            }
        })
        .collect()
}
