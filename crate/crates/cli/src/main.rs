//! Command-line driver for the orchestration pipeline.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use idago_core::analysis;
use idago_core::formulation::{self, FormulationOptions};
use idago_core::graph::AugmentedGraph;
use idago_core::lpfile;
use idago_core::rounding::{self, Selection};
use idago_core::scenarios::{self, builtin::builtin, ScenarioModel};
use idago_core::service::ServiceGraph;
use idago_core::solver::{self, SolveStatus};
use idago_core::transform;
use idago_core::fmt_sig;

/// End-to-end orchestration of information-aware DAG services: placement,
/// routing, and resource allocation over a cloud-augmented network.
#[derive(Parser)]
#[command(name = "idago", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario config: a JSON file path or `builtin:<name>`
    /// (scenario1_a, scenario1_b, scenario2).
    #[arg(long)]
    config: String,
    /// Seed for all randomized steps.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rate scaling factor applied to the scaled commodities.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Wall-clock budget per solve in seconds (disables byte-determinism).
    #[arg(long)]
    budget_seconds: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Milp,
    Lp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    UnawareDag,
    AwareDag,
    AwareForest,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SelectPolicy {
    First,
    Best,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the network and service of a scenario config.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the DAG-to-Forest transformation of the scenario's service.
    Transform {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve one formulation variant exactly or as an LP relaxation.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "milp")]
        method: SolveMethod,
        #[arg(long, value_enum, default_value = "aware-forest")]
        variant: Variant,
    },
    /// Decompose the forest LP flow into per-tree embeddings.
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the full rounding pipeline and print the candidate table.
    Round {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tries: Option<u64>,
        #[arg(long)]
        accept_crf: Option<f64>,
        #[arg(long, value_enum)]
        select: Option<SelectPolicy>,
    },
    /// Run the four-method baseline comparison over the sweep scales.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Emit per-link and per-commodity tail bounds and approximation factors.
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Per-try failure probability of the repeated-rounding guarantee.
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Relaxation factor grid as start:end:step.
        #[arg(long, default_value = "1.0:2.0:0.1")]
        delta_grid: String,
    },
    /// Export one formulation variant in the textual LP format.
    ExportLp {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "aware-forest")]
        variant: Variant,
        #[arg(long, value_enum, default_value = "milp")]
        method: SolveMethod,
    },
}

#[derive(Debug)]
struct CliError(String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError(message)) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn load_model(common: &CommonArgs) -> Result<ScenarioModel, CliError> {
    let text = match common.config.strip_prefix("builtin:") {
        Some(name) => scenarios::save(&builtin(name).map_err(|e| CliError(e.to_string()))?),
        None => std::fs::read_to_string(&common.config)
            .map_err(|e| CliError(format!("config {}: {e}", common.config)))?,
    };
    let mut model = scenarios::load(&text).map_err(|e| CliError(e.to_string()))?;
    if let Some(seed) = common.seed {
        model.config.rounding.seed = seed;
    }
    if common.budget_seconds.is_some() {
        model.config.solver.budget_seconds = common.budget_seconds;
    }
    Ok(model)
}

fn emit(common: &CommonArgs, content: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError(format!("writing {}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(content.as_bytes()).map_err(|e| CliError(e.to_string()))
        }
    }
}

fn build_variant(
    g: &AugmentedGraph,
    service: &ServiceGraph,
    variant: Variant,
    mut opts: FormulationOptions,
    relaxed: bool,
) -> Result<formulation::LpProblem, CliError> {
    opts.relaxed = relaxed;
    opts.info_aware = variant != Variant::UnawareDag;
    let service_for_build = match variant {
        Variant::AwareForest => transform::dag_to_forest(service)?.graph,
        _ => service.clone(),
    };
    Ok(formulation::build(g, &service_for_build, opts)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { common } => {
            let model = load_model(&common)?;
            let mut violations = idago_core::graph::validate(&model.graph);
            violations.extend(idago_core::service::validate_dag(&model.service));
            if violations.is_empty() {
                emit(&common, "ok\n")?;
                Ok(())
            } else {
                emit(&common, &(violations.join("\n") + "\n"))?;
                Err(CliError(format!("{} violations", violations.len())))
            }
        }
        Command::Transform { common } => {
            let model = load_model(&common)?;
            let service = model.scaled_service(common.scale);
            let forest = transform::dag_to_forest(&service)?;
            let mut out = String::new();
            out.push_str(&format!(
                "components: {}\ncommodities: {}\nobjects: {}\n",
                forest.component_count(),
                forest.graph.commodities().len(),
                forest.graph.object_count(),
            ));
            out.push_str(&scenarios::save_service(&model.graph, &forest.graph));
            emit(&common, &out)
        }
        Command::Solve { common, method, variant } => {
            let model = load_model(&common)?;
            let service = model.scaled_service(common.scale);
            let relaxed = method == SolveMethod::Lp;
            let p =
                build_variant(&model.graph, &service, variant, model.formulation_options(), relaxed)?;
            let budget = model.solve_budget();
            let sol = if relaxed {
                solver::solve_lp(&p, &budget)
            } else {
                solver::solve_milp(&p, &budget)
            };
            let mut out = format!(
                "status {}\nobjective {}\niterations {}\nnodes {}\n",
                status_name(sol.status),
                fmt_sig(sol.objective),
                sol.stats.iterations,
                sol.stats.nodes,
            );
            if let Some(gap) = sol.gap {
                out.push_str(&format!("gap {}\n", fmt_sig(gap)));
            }
            if !sol.values.is_empty() {
                out.push_str("solution:\n");
                out.push_str(&lpfile::write_solution(&p, &sol.values));
            }
            emit(&common, &out)
        }
        Command::Decompose { common } => {
            let model = load_model(&common)?;
            let service = model.scaled_service(common.scale);
            let opts = model.formulation_options();
            let params = model.rounding_params();
            let budget = model.solve_budget();
            let result = rounding::idago(&model.graph, &service, &params, &opts, &budget)?;
            let mut out = String::new();
            for dec in &result.decompositions {
                out.push_str(&format!("tree {} ({} embeddings)\n", dec.tree, dec.len()));
                for (n, (e, prob)) in dec.entries.iter().enumerate() {
                    out.push_str(&format!("  embedding {n} p={}\n", fmt_sig(*prob)));
                    for (f, node) in &e.function_map {
                        let name = &result.forest.graph.function(*f).name;
                        let label = &model.graph.node(*node).label;
                        out.push_str(&format!("    place {name} -> {label}\n"));
                    }
                    for (k, path) in &e.commodity_map {
                        let name = &result.forest.graph.commodity(*k).name;
                        let hops: Vec<String> = path.iter().map(|l| l.to_string()).collect();
                        out.push_str(&format!("    route {name} -> [{}]\n", hops.join(",")));
                    }
                }
            }
            emit(&common, &out)
        }
        Command::Round { common, tries, accept_crf, select } => {
            let model = load_model(&common)?;
            let service = model.scaled_service(common.scale);
            let opts = model.formulation_options();
            let mut params = model.rounding_params();
            if let Some(t) = tries {
                params.max_tries = t;
            }
            if let Some(a) = accept_crf {
                params.accept_crf = a;
            }
            if let Some(s) = select {
                params.selection = match s {
                    SelectPolicy::First => Selection::FirstAccepted,
                    SelectPolicy::Best => Selection::BestCostAmongTries,
                };
            }
            let budget = model.solve_budget();
            let result = rounding::idago(&model.graph, &service, &params, &opts, &budget)?;

            // exact reference for the cost ratio column
            let p_forest = build_variant(
                &model.graph,
                &service,
                Variant::AwareForest,
                model.formulation_options(),
                false,
            )?;
            let milp = solver::solve_milp(&p_forest, &budget);
            let mut out = String::from("try,choices,cost,car,crf,max_latency_relax,accepted\n");
            for c in &result.candidates {
                let car = if milp.objective > 0.0 && !milp.values.is_empty() {
                    fmt_sig(c.cost / milp.objective)
                } else {
                    String::new()
                };
                let choices: Vec<String> = c.choices.iter().map(|i| i.to_string()).collect();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.try_index,
                    choices.join("|"),
                    fmt_sig(c.cost),
                    car,
                    fmt_sig(c.crf),
                    fmt_sig(c.latency_relax),
                    c.accepted,
                ));
            }
            out.push_str(&format!(
                "best try {} cost {} crf {} accepted {} enumerated {}\n",
                result.best_try,
                fmt_sig(result.best.cost),
                fmt_sig(result.best.crf),
                result.accepted,
                result.enumerated,
            ));
            emit(&common, &out)
        }
        Command::Sweep { common, format } => {
            let model = load_model(&common)?;
            let report = scenarios::run_baselines(&model, &scenarios::ALL_METHODS);
            let timings = std::env::var("IDAGO_TIMINGS").map(|v| v == "1").unwrap_or(false);
            let content = match format {
                OutputFormat::Csv => report.to_csv(timings),
                OutputFormat::Text => {
                    let mut s = String::new();
                    for r in &report.rows {
                        s.push_str(&format!(
                            "{:<24} scale {:>6} cost {:>14} car {:>12} crf {:>10} status {}\n",
                            r.method.to_string(),
                            fmt_sig(r.scale),
                            r.cost.map(fmt_sig).unwrap_or_default(),
                            r.car.map(fmt_sig).unwrap_or_default(),
                            r.crf.map(fmt_sig).unwrap_or_default(),
                            r.status,
                        ));
                    }
                    s
                }
            };
            emit(&common, &content)
        }
        Command::Bounds { common, theta, delta_grid } => {
            let model = load_model(&common)?;
            let service = model.scaled_service(common.scale);
            let opts = model.formulation_options();
            let params = model.rounding_params();
            let budget = model.solve_budget();
            let grid = parse_grid(&delta_grid)?;
            let result = rounding::idago(&model.graph, &service, &params, &opts, &budget)?;
            let flows = formulation::flow_table(
                &result.problem,
                &model.graph,
                &result.forest.graph,
                &result.lp.values,
            );
            let exps = analysis::expectations(
                &model.graph,
                &result.forest,
                &flows,
                &result.decompositions,
                10_000,
                params.seed,
                opts.burstiness_enabled,
                opts.resource_blocks,
            );
            let inputs = analysis::bound_inputs(
                &model.graph,
                &result.forest,
                &flows,
                &result.decompositions,
                result.lp.objective,
                &exps,
                opts.burstiness_enabled,
                opts.resource_blocks,
            )?;

            let mut out = String::from("kind,id,xi,condition_f,base");
            for d in &grid {
                out.push_str(&format!(",bound@{}", fmt_sig(*d)));
            }
            out.push('\n');
            for link in model.graph.capacitated_links() {
                out.push_str(&format!(
                    "link,{},{},{},{}",
                    model.graph.node(link.tail).label.clone() + ">"
                        + &model.graph.node(link.head).label,
                    fmt_sig(inputs.xi[link.id.index()]),
                    analysis::condition_f(&inputs, &model.graph, link.id, 1.0),
                    fmt_sig(inputs.delta_beta1[link.id.index()]),
                ));
                for &d in &grid {
                    let b = analysis::capacity_bound(&inputs, &model.graph, link.id, d)
                        .map(fmt_sig)
                        .unwrap_or_default();
                    out.push_str(&format!(",{b}"));
                }
                out.push('\n');
            }
            for k in result.forest.graph.destination_commodities() {
                if k.latency_bound.is_none() {
                    continue;
                }
                out.push_str(&format!(
                    "latency,{},{},,{}",
                    k.name,
                    fmt_sig(inputs.lambda_max[k.id.index()] - inputs.lambda_min[k.id.index()]),
                    fmt_sig(
                        inputs
                            .delta_beta2
                            .iter()
                            .find(|(kk, _)| *kk == k.id)
                            .map(|(_, d)| *d)
                            .unwrap_or(0.0)
                    ),
                ));
                for &d in &grid {
                    let b = analysis::latency_bound_prob(&inputs, &result.forest, k.id, d)
                        .map(fmt_sig)
                        .unwrap_or_default();
                    out.push_str(&format!(",{b}"));
                }
                out.push('\n');
            }
            let dest_count = result.forest.graph.destination_commodities().count();
            let factors = analysis::theorem2_factors(
                &inputs,
                theta,
                inputs.failing_links.len(),
                dest_count,
            )?;
            out.push_str(&format!(
                "factor,delta_alpha,{},{},\nfactor,delta_beta1,{},{},\nfactor,delta_beta2,{},{},\nfactor,success_prob_t10,{},,\n",
                fmt_sig(factors.delta_alpha.as_printed),
                fmt_sig(factors.delta_alpha.sign_corrected),
                fmt_sig(factors.delta_beta1.as_printed),
                fmt_sig(factors.delta_beta1.sign_corrected),
                fmt_sig(factors.delta_beta2.as_printed),
                fmt_sig(factors.delta_beta2.sign_corrected),
                fmt_sig(analysis::success_probability(theta, 10)),
            ));
            emit(&common, &out)
        }
        Command::ExportLp { common, variant, method } => {
            let model = load_model(&common)?;
            let service = model.scaled_service(common.scale);
            let relaxed = method == SolveMethod::Lp;
            let p =
                build_variant(&model.graph, &service, variant, model.formulation_options(), relaxed)?;
            emit(&common, &lpfile::export_lp_file(&p))
        }
    }
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::BudgetExceeded => "budget-exceeded",
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError(format!("delta grid {spec:?} must be start:end:step")));
    }
    let start: f64 = parts[0].parse().map_err(|_| CliError("bad grid start".into()))?;
    let end: f64 = parts[1].parse().map_err(|_| CliError("bad grid end".into()))?;
    let step: f64 = parts[2].parse().map_err(|_| CliError("bad grid step".into()))?;
    if step <= 0.0 || end < start {
        return Err(CliError("grid step must be positive and end >= start".into()));
    }
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let v = start + step * i as f64;
        if v > end + 1e-9 {
            break;
        }
        out.push((v * 1e9).round() / 1e9);
        i += 1;
    }
    Ok(out)
}
