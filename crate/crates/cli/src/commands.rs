use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use obroute::eval::demand::{demands, random_permutation, DemandKind, DemandMatrix};
use obroute::eval::opt::{opt_or_lower_bound, OptConfig, OptResult};
use obroute::eval::report::CongestionReport;
use obroute::generators::{generate, GraphKind};
use obroute::packet::{route_permutation, PermutationDemand, SimulationConfig};
use obroute::splittable::{congestion, route_splittable, PolicyOptions};
use obroute::unsplittable::{build_policy, ratio_audit, unsplittable_congestion};
use obroute::{lazify_if_needed, Graph, SeedTree};

use crate::args::{Command, DemandArgs, Format, GraphArgs, OutputArgs};
use crate::output::{csv_num, emit, json_text};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] obroute::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    File(PathBuf),
    Generator(String),
}

/// Everything that determines a report. Embedded in every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub graph: Option<GraphSource>,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, Value>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentConfig {
    fn new(
        command: &str,
        graph: Option<&GraphArgs>,
        seed: Option<u64>,
        output: &OutputArgs,
    ) -> Self {
        let graph = graph.map(|g| match (&g.graph, &g.generate) {
            (Some(path), _) => GraphSource::File(path.clone()),
            (None, spec) => GraphSource::Generator(spec.clone().unwrap_or_default()),
        });
        Self {
            command: command.into(),
            graph,
            seed,
            params: BTreeMap::new(),
            out: output.out.clone(),
            format: output.format,
        }
    }

    fn param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.into(), value);
        self
    }
}

/// Runs one command. `Ok(false)` means a verification check failed.
pub fn run(command: Command) -> Result<bool> {
    match command {
        Command::Spectra { graph, output } => spectra(&graph, &output),
        Command::RouteSplit {
            graph,
            demands,
            seed,
            include_policy,
            output,
        } => route_split(&graph, &demands, seed, include_policy, &output),
        Command::RouteUnsplit {
            graph,
            demands,
            seed,
            constant,
            include_paths,
            output,
        } => route_unsplit(&graph, &demands, seed, constant, include_paths, &output),
        Command::Valiant {
            graph,
            permutation,
            random,
            runs,
            seed,
            per_direction,
            trace,
            output,
        } => valiant(
            &graph,
            permutation.as_deref(),
            random,
            runs,
            seed,
            SimulationConfig {
                per_direction,
                record_trace: trace,
            },
            &output,
        ),
        Command::Verify {
            suite,
            seed,
            trials,
            output,
        } => verify(&suite, seed, trials, &output),
    }
}

fn unreadable(path: &Path, e: obroute::Error) -> CliError {
    match e {
        obroute::Error::Io(io) => CliError::Usage(format!("{}: {io}", path.display())),
        other => CliError::Core(other),
    }
}

fn load_graph(args: &GraphArgs, seed: Option<u64>) -> Result<Graph> {
    let g = match (&args.graph, &args.generate) {
        (Some(path), _) => Graph::load(path).map_err(|e| unreadable(path, e))?,
        (None, Some(spec)) => {
            let kind = GraphKind::parse(spec, seed.unwrap_or(0))?;
            if seed.is_none() && kind != GraphKind::parse(spec, 1)? {
                return Err(CliError::Usage(format!(
                    "`{spec}` is randomized: give its seed in the spec or pass --seed"
                )));
            }
            generate(kind)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --graph or --generate is required".into(),
            ))
        }
    };
    g.require_connected()?;
    Ok(g)
}

fn load_demands(g: &Graph, args: &DemandArgs, seed: Option<u64>) -> Result<DemandMatrix> {
    let n = g.n();
    let d = match (&args.demands, &args.demand_kind) {
        (Some(path), _) => DemandMatrix::load(path).map_err(|e| unreadable(path, e))?,
        (None, Some(spec)) => {
            let (name, arg) = spec
                .split_once(':')
                .map_or((spec.as_str(), None), |(a, b)| (a, Some(b)));
            let need_seed = || {
                seed.ok_or_else(|| CliError::Usage(format!("demand kind `{name}` needs --seed")))
            };
            let number = |what: &str| -> Result<f64> {
                arg.ok_or_else(|| CliError::Usage(format!("demand kind `{name}` needs :{what}")))?
                    .parse()
                    .map_err(|e| CliError::Usage(format!("demand kind `{spec}`: {e}")))
            };
            let kind = match name {
                "zero" => return Ok(DemandMatrix::zeros(n)),
                "adjacency" => DemandKind::Adjacency,
                "uniform" => DemandKind::UniformAllPairs(number("VOLUME")?),
                "random" => DemandKind::Random {
                    seed: need_seed()?,
                    density: number("DENSITY")?,
                },
                "permutation" => {
                    DemandKind::Permutation(random_permutation(n, &SeedTree::new(need_seed()?), 0))
                }
                "canonical" => {
                    DemandKind::Canonical(random_permutation(n, &SeedTree::new(need_seed()?), 0))
                }
                other => return Err(CliError::Usage(format!("unknown demand kind `{other}`"))),
            };
            demands(g, &kind)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --demands or --demand-kind is required".into(),
            ))
        }
    };
    d.require_size(n)?;
    Ok(d)
}

fn with_config(report: Value, config: &ExperimentConfig) -> Value {
    let mut report = report;
    if let Value::Object(map) = &mut report {
        map.insert(
            "config".into(),
            serde_json::to_value(config).expect("config serializes"),
        );
    }
    report
}

fn congestion_csv(report: &CongestionReport) -> String {
    let mut s = String::from("u,v,capacity,load,congestion\n");
    for l in &report.links {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            l.u,
            l.v,
            csv_num(l.capacity),
            csv_num(l.load),
            csv_num(l.congestion)
        );
    }
    s
}

fn opt_json(opt: &OptResult) -> Value {
    json!({"value": opt.value, "method": opt.method})
}

fn spectra(args: &GraphArgs, output: &OutputArgs) -> Result<bool> {
    let g = load_graph(args, None)?;
    let (_, profile) = lazify_if_needed(&g)?;
    let report = profile.report();
    let text = match output.format {
        Format::Json => {
            let config = ExperimentConfig::new("spectra", Some(args), None, output);
            json_text(with_config(
                serde_json::to_value(&report).expect("report serializes"),
                &config,
            ))
        }
        Format::Csv => format!(
            "lambda2,lambdaN,lambda,lambda_bar,lazified,pi_min,pi_max,k\n{},{},{},{},{},{},{},{}\n",
            csv_num(report.lambda2),
            csv_num(report.lambda_n),
            csv_num(report.lambda),
            csv_num(report.lambda_bar),
            report.lazified,
            csv_num(report.pi_min),
            csv_num(report.pi_max),
            report.k
        ),
    };
    emit(output.out.as_deref(), &text)?;
    Ok(true)
}

fn demand_param(args: &DemandArgs) -> Value {
    match (&args.demands, &args.demand_kind) {
        (Some(path), _) => json!({"file": path}),
        (None, kind) => json!({"kind": kind}),
    }
}

fn route_split(
    args: &GraphArgs,
    dargs: &DemandArgs,
    seed: Option<u64>,
    include_policy: bool,
    output: &OutputArgs,
) -> Result<bool> {
    let g = load_graph(args, seed)?;
    let d = load_demands(&g, dargs, seed)?;
    let routing = route_splittable(&g, PolicyOptions::default())?;
    let opt = opt_or_lower_bound(&g, &d, &OptConfig::default())?;
    let report = congestion(&routing.walk_graph, &d, &routing.policy)?.with_opt(opt.value)?;
    let k = routing.profile.k;
    let bound = 12.0 * k as f64;
    let text = match output.format {
        Format::Csv => congestion_csv(&report),
        Format::Json => {
            let config = ExperimentConfig::new("route-split", Some(args), seed, output)
                .param("demands", demand_param(dargs))
                .param("include_policy", json!(include_policy));
            let mut value = json!({
                "k": k,
                "lazified": routing.profile.lazified,
                "lambda_bar": routing.profile.lambda_bar,
                "opt": opt_json(&opt),
                "congestion": report,
                "ratio_bound": bound,
                "within_bound": report.ratio.unwrap_or(0.0) <= bound,
                "diagnostics": routing.policy.diagnostics,
            });
            if include_policy {
                value["policy"] = routing.policy.to_json(&routing.walk_graph);
            }
            json_text(with_config(value, &config))
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(true)
}

fn route_unsplit(
    args: &GraphArgs,
    dargs: &DemandArgs,
    seed: u64,
    constant: f64,
    include_paths: bool,
    output: &OutputArgs,
) -> Result<bool> {
    if !(constant > 0.0) {
        return Err(CliError::Usage("--constant must be positive".into()));
    }
    let g = load_graph(args, Some(seed))?;
    let d = load_demands(&g, dargs, Some(seed))?;
    let policy = build_policy(&g, seed)?;
    let opt = opt_or_lower_bound(&g, &d, &OptConfig::default())?;
    let report = unsplittable_congestion(&g, &d, &policy)?.with_opt(opt.value)?;
    let audit = ratio_audit(&g, &d, &policy, opt.value, constant)?;
    let text = match output.format {
        Format::Csv => congestion_csv(&report),
        Format::Json => {
            let config = ExperimentConfig::new("route-unsplit", Some(args), Some(seed), output)
                .param("demands", demand_param(dargs))
                .param("constant", json!(constant))
                .param("include_paths", json!(include_paths));
            let mut value = json!({
                "k": policy.k(),
                "lazified": policy.profile.lazified,
                "opt": opt_json(&opt),
                "congestion": report,
                "audit": audit,
                "redraws": policy.redraws(),
                "resampled": policy.resampled(),
            });
            if include_paths {
                value["paths"] = policy.to_json();
            }
            json_text(with_config(value, &config))
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(true)
}

fn read_permutation(path: &Path, n: usize) -> Result<PermutationDemand> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let sigma = PermutationDemand::parse(&text)?;
    if sigma.n() != n {
        return Err(CliError::Usage(format!(
            "permutation has {} entries, graph has {n} vertices",
            sigma.n()
        )));
    }
    Ok(sigma)
}

fn arrivals_csv(sigma: &PermutationDemand, arrivals: &[Option<usize>]) -> String {
    let mut s = String::from("packet,target,arrival\n");
    for (x, a) in arrivals.iter().enumerate() {
        let _ = writeln!(s, "{x},{},{}", sigma.target(x), a.unwrap_or(0));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn valiant(
    args: &GraphArgs,
    permutation: Option<&Path>,
    random: bool,
    runs: usize,
    seed: u64,
    sim: SimulationConfig,
    output: &OutputArgs,
) -> Result<bool> {
    let g = load_graph(args, Some(seed))?;
    let n = g.n();
    let config = ExperimentConfig::new("valiant", Some(args), Some(seed), output)
        .param("permutation", json!(permutation))
        .param("random", json!(random))
        .param("runs", json!(runs))
        .param("per_direction", json!(sim.per_direction))
        .param("trace", json!(sim.record_trace));
    if runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    let seeds = SeedTree::new(seed);
    let sigmas: Vec<PermutationDemand> = match permutation {
        Some(path) => vec![read_permutation(path, n)?],
        None => (0..runs as u64)
            .map(|i| PermutationDemand::random(n, &seeds, i))
            .collect(),
    };
    let mut routed = Vec::with_capacity(sigmas.len());
    for sigma in &sigmas {
        routed.push(route_permutation(&g, sigma, seed, sim)?);
    }
    let text = match output.format {
        Format::Csv => {
            let first = &routed[0];
            match first.result.trace_csv() {
                Some(trace) if sigmas.len() == 1 => trace,
                _ if sigmas.len() == 1 => arrivals_csv(&sigmas[0], &first.result.arrivals),
                _ => {
                    let mut s = String::from("run,delay,bound,max_coincidence\n");
                    for (i, r) in routed.iter().enumerate() {
                        let _ = writeln!(
                            s,
                            "{i},{},{},{}",
                            r.result.delay, r.bound, r.max_coincidence
                        );
                    }
                    s
                }
            }
        }
        Format::Json if routed.len() == 1 => {
            let mut value = serde_json::to_value(&routed[0]).expect("report serializes");
            value["permutation"] = json!(sigmas[0].as_slice());
            json_text(with_config(value, &config))
        }
        Format::Json => {
            let summaries: Vec<Value> = routed
                .iter()
                .zip(&sigmas)
                .map(|(r, s)| {
                    json!({
                        "permutation": s.as_slice(),
                        "delay": r.result.delay,
                        "bound": r.bound,
                        "max_coincidence": r.max_coincidence,
                    })
                })
                .collect();
            let max_delay = routed.iter().map(|r| r.result.delay).max().unwrap_or(0);
            let violations = routed.iter().filter(|r| r.result.delay > r.bound).count();
            json_text(with_config(
                json!({
                    "k": routed[0].k,
                    "lazified": routed[0].lazified,
                    "runs": summaries,
                    "max_delay": max_delay,
                    "bound_violations": violations,
                }),
                &config,
            ))
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(true)
}

fn verify(suite: &str, seed: u64, trials: usize, output: &OutputArgs) -> Result<bool> {
    let report = obroute::verify::run_suite(suite, seed, trials).map_err(|e| match e {
        obroute::Error::InvalidParameter(msg) => CliError::Usage(msg),
        other => CliError::Core(other),
    })?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut lines = String::new();
    for c in &report.checks {
        let _ = writeln!(
            lines,
            "{} {:<14} measured {:.6e} limit {:.6e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.limit,
            c.detail
        );
    }
    print!("{lines}");
    if let Some(out) = &output.out {
        let text = match output.format {
            Format::Json => {
                let config = ExperimentConfig::new("verify", None, Some(seed), output)
                    .param("suite", json!(suite))
                    .param("trials", json!(trials));
                json_text(with_config(
                    serde_json::to_value(&report).expect("report serializes"),
                    &config,
                ))
            }
            Format::Csv => {
                let mut s = String::from("check,passed,measured,limit\n");
                for c in &report.checks {
                    let _ = writeln!(
                        s,
                        "{},{},{},{}",
                        c.name,
                        c.passed,
                        csv_num(c.measured),
                        csv_num(c.limit)
                    );
                }
                s
            }
        };
        emit(Some(out), &text)?;
    }
    Ok(report.passed())
}
