use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ecoplan::harness::{
    build_population, compute_feasible_sets, emit_csv, emit_plot, load_scenario,
    read_feasible_sets, read_sweep_csv, run_budget_sweep_with, sweep_budgets, write_feasible_sets,
    BudgetSweep, ClassFeasibility, HarnessError, ScenarioConfig, SweepRow,
};
use ecoplan::microsim::{simulate_trip, trip_outcome};
use ecoplan::netgraph::Network;
use ecoplan::prefs::estimate_theta;

#[derive(Parser)]
#[command(
    name = "ecoplan",
    version,
    about = "Budgeted eco-driving incentives on simulated routes"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory; defaults to the scenario's `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides every seed in the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Feasible-set cache: read if present, written otherwise.
    #[arg(long, global = true)]
    feasible_sets: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trip and write its trajectory.
    Simulate {
        /// Population class (1-based) giving origin, destination and vehicle.
        #[arg(long, default_value_t = 1)]
        class: usize,
        /// Route rank among the k shortest (1-based).
        #[arg(long, default_value_t = 1)]
        route: usize,
        /// Driving style index (1-based).
        #[arg(long, default_value_t = 1)]
        style: usize,
        /// Traffic condition index (1-based); 1 is free flow.
        #[arg(long, default_value_t = 1)]
        condition: usize,
    },
    /// Sample outcome clouds and write hulls and Pareto fronts.
    FeasibleSet,
    /// Estimate the trade-off behind a preferred travel time.
    EstimateTheta {
        /// Preferred travel time [s].
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 1)]
        class: usize,
    },
    /// Run both mechanisms at one budget.
    Mechanism {
        #[arg(long, allow_negative_numbers = true)]
        budget: f64,
    },
    /// Run the budget sweep; `--budget` restricts it to one budget.
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        budget: Option<f64>,
    },
    /// Plot a sweep table as SVG.
    Plot {
        /// Sweep table; defaults to `sweep.csv` in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

struct Context {
    cli: Cli,
    config: Option<ScenarioConfig>,
}

impl Context {
    fn config(&self) -> Result<&ScenarioConfig, Failure> {
        self.config
            .as_ref()
            .ok_or_else(|| Failure::Usage("--scenario is required for this command".into()))
    }

    fn out_dir(&self) -> Result<PathBuf, Failure> {
        let dir = match (&self.cli.out, &self.config) {
            (Some(dir), _) => dir.clone(),
            (None, Some(c)) => c.output_dir.clone(),
            (None, None) => PathBuf::from("."),
        };
        std::fs::create_dir_all(&dir).map_err(|e| runtime(&dir, e))?;
        Ok(dir)
    }

    fn feasible_sets(&self) -> Result<Vec<ClassFeasibility>, Failure> {
        let config = self.config()?;
        match &self.cli.feasible_sets {
            Some(path) if path.exists() => Ok(read_feasible_sets(path, config)?),
            Some(path) => {
                let classes = compute_feasible_sets(config)?;
                write_feasible_sets(path, &config.name, &classes)?;
                Ok(classes)
            }
            None => Ok(compute_feasible_sets(config)?),
        }
    }
}

fn pick<'a, T>(items: &'a [T], index: usize, what: &str) -> Result<&'a T, Failure> {
    index
        .checked_sub(1)
        .and_then(|i| items.get(i))
        .ok_or_else(|| {
            Failure::Usage(format!(
                "--{what} {index} is out of range 1..={}",
                items.len()
            ))
        })
}

fn check_budget(budget: f64) -> Result<(), Failure> {
    if budget.is_finite() && budget >= 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "--budget must be a finite non-negative number, got {budget}"
        )))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(path, e))
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| runtime(path, e))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| runtime(path, e))
}

fn simulate(
    ctx: &Context,
    class: usize,
    route: usize,
    style: usize,
    condition: usize,
) -> Result<(), Failure> {
    let config = ctx.config()?;
    let spec = pick(&config.population.classes, class, "class")?;
    let net =
        Network::build(&config.network).map_err(|e| Failure::Usage(format!("network: {e}")))?;
    let routes = net
        .k_shortest_routes(&spec.origin, &spec.destination, config.routes)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let route = pick(&routes, route, "route")?;
    let style = pick(&config.styles, style, "style")?;
    let conditions = config.traffic_conditions();
    let condition = pick(&conditions, condition, "condition")?;
    let vehicle = config
        .vehicle(&spec.vehicle)
        .expect("validated vehicle reference");
    let traj = simulate_trip(&net, route, vehicle, *style, condition, &config.sim)
        .map_err(|e| Failure::Runtime(e.to_string()))?;

    let dir = ctx.out_dir()?;
    let path = match ctx.cli.format {
        Format::Csv => {
            let path = dir.join("trajectory.csv");
            let mut w = create(&path)?;
            traj.write_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| runtime(&path, e))?;
            path
        }
        Format::Json => {
            let path = dir.join("trajectory.json");
            write_json(&path, &traj)?;
            path
        }
    };
    let x = trip_outcome(&traj);
    println!(
        "route {}: travel_time_s={} emissions_g={}",
        route.link_ids(&net).join(","),
        x.travel_time,
        x.emissions
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn write_points(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = (Option<usize>, f64, f64)>,
) -> Result<(), Failure> {
    let mut w = create(path)?;
    let body = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for (route, t, e) in rows {
            match route {
                Some(r) => writeln!(w, "{r},{t},{e}")?,
                None => writeln!(w, "{t},{e}")?,
            }
        }
        w.flush()
    };
    body().map_err(|e| runtime(path, e))
}

fn feasible_set(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config()?;
    let classes = ctx.feasible_sets()?;
    let dir = ctx.out_dir()?;
    let cache = dir.join("feasible_sets.json");
    write_feasible_sets(&cache, &config.name, &classes)?;
    println!("wrote {}", cache.display());
    for (i, class) in classes.iter().enumerate() {
        let f = &class.feasible;
        println!(
            "class {} {}: {} hull vertices, {} Pareto points, eco route {}",
            i + 1,
            class.key,
            f.vertices.len(),
            f.pareto.len(),
            class.eco_route + 1
        );
        if ctx.cli.format == Format::Json {
            continue;
        }
        let stem = format!("class{}", i + 1);
        let cloud = class.routes.iter().enumerate().flat_map(|(r, s)| {
            s.points
                .iter()
                .map(move |p| (Some(r + 1), p.travel_time, p.emissions))
        });
        write_points(
            &dir.join(format!("{stem}_cloud.csv")),
            "route,travel_time_s,emissions_g",
            cloud,
        )?;
        let hull = f
            .vertices
            .iter()
            .map(|p| (None, p.travel_time, p.emissions));
        write_points(
            &dir.join(format!("{stem}_hull.csv")),
            "travel_time_s,emissions_g",
            hull,
        )?;
        let front = f.pareto.iter().map(|p| (None, p.travel_time, p.emissions));
        write_points(
            &dir.join(format!("{stem}_pareto.csv")),
            "travel_time_s,emissions_g",
            front,
        )?;
    }
    Ok(())
}

fn theta(ctx: &Context, time: f64, class: usize) -> Result<(), Failure> {
    let config = ctx.config()?;
    let classes = ctx.feasible_sets()?;
    let spec = pick(&config.population.classes, class, "class")?;
    let fs = classes
        .iter()
        .find(|c| {
            c.key.origin == spec.origin
                && c.key.destination == spec.destination
                && c.key.vehicle == spec.vehicle
        })
        .expect("every configured class has a feasible set");
    let est = estimate_theta(
        &fs.feasible,
        time,
        config.population.grid,
        config.population.refinements,
    )
    .map_err(|e| Failure::Usage(e.to_string()))?;
    match ctx.cli.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&est).map_err(|e| Failure::Runtime(e.to_string()))?
        ),
        Format::Csv => {
            println!("tradeoff,target_t,target_e,matched_t,matched_e,residual,cell");
            println!(
                "{},{},{},{},{},{},{}",
                est.tradeoff,
                est.target.travel_time,
                est.target.emissions,
                est.matched.travel_time,
                est.matched.emissions,
                est.residual,
                est.cell
            );
        }
    }
    Ok(())
}

fn print_rows(rows: &[SweepRow]) {
    for r in rows {
        println!(
            "budget {:.2} {}: compliance {:.3}, emissions {:.1} g, mean travel time {:.1} s, spend {:.2}",
            r.budget, r.mechanism, r.compliance_ratio, r.total_emissions_g, r.mean_travel_time_s, r.realized_spend
        );
    }
}

fn mechanism(ctx: &Context, budget: f64) -> Result<(), Failure> {
    check_budget(budget)?;
    let config = ctx.config()?;
    let classes = ctx.feasible_sets()?;
    let population = build_population(config, &classes)?;
    let report = sweep_budgets(population, &[budget], config.epsilon_fraction, config.noise)?;
    let dir = ctx.out_dir()?;
    match ctx.cli.format {
        Format::Json => {
            let path = dir.join("mechanism.json");
            let results: Vec<_> = report.points.iter().map(|p| &p.result).collect();
            write_json(&path, &results)?;
            println!("wrote {}", path.display());
        }
        Format::Csv => {
            for p in &report.points {
                let path = dir.join(format!("offers_{}.csv", p.result.mechanism));
                let mut w = create(&path)?;
                p.result
                    .write_csv(&report.population.participants, &mut w)
                    .map_err(|e| runtime(&path, e))?;
                w.flush().map_err(|e| runtime(&path, e))?;
                println!("wrote {}", path.display());
            }
        }
    }
    print_rows(&report.rows());
    Ok(())
}

fn sweep(ctx: &Context, budget: Option<f64>) -> Result<(), Failure> {
    let mut config = ctx.config()?.clone();
    if let Some(b) = budget {
        check_budget(b)?;
        config.budget = BudgetSweep {
            min: b,
            max: Some(b),
            steps: 1,
        };
    }
    let classes = ctx.feasible_sets()?;
    let report = run_budget_sweep_with(&config, &classes)?;
    let rows = report.rows();
    let dir = ctx.out_dir()?;
    let path = match ctx.cli.format {
        Format::Csv => {
            let path = dir.join("sweep.csv");
            emit_csv(&rows, &path)?;
            path
        }
        Format::Json => {
            let path = dir.join("sweep.json");
            write_json(&path, &rows)?;
            path
        }
    };
    eprintln!(
        "{} users, {} budgets up to {:.2}; sum of compliance thresholds {:.2}",
        report.population.len(),
        report.budgets.len(),
        report.budgets.last().copied().unwrap_or(0.0),
        report.thresholds.iter().sum::<f64>()
    );
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn plot(ctx: &Context, input: Option<PathBuf>) -> Result<(), Failure> {
    let dir = ctx.out_dir()?;
    let input = input.unwrap_or_else(|| dir.join("sweep.csv"));
    let text = std::fs::read(&input).map_err(|e| runtime(&input, e))?;
    let rows: Vec<SweepRow> = if input.extension().is_some_and(|e| e == "json") {
        serde_json::from_slice(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?
    } else {
        read_sweep_csv(text.as_slice())
            .map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?
    };
    let path = dir.join("sweep.svg");
    emit_plot(&rows, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.scenario {
        Some(path) => {
            let (mut config, notes) = load_scenario(path).map_err(|e| match e {
                HarnessError::Io { .. } => Failure::Usage(e.to_string()),
                e => e.into(),
            })?;
            for note in notes {
                eprintln!("note: {note}");
            }
            if let Some(seed) = cli.seed {
                config.reseed(seed);
            }
            Some(config)
        }
        None => None,
    };
    let ctx = Context { cli, config };
    match &ctx.cli.command {
        &Command::Simulate {
            class,
            route,
            style,
            condition,
        } => simulate(&ctx, class, route, style, condition),
        Command::FeasibleSet => feasible_set(&ctx),
        &Command::EstimateTheta { time, class } => theta(&ctx, time, class),
        &Command::Mechanism { budget } => mechanism(&ctx, budget),
        &Command::Sweep { budget } => sweep(&ctx, budget),
        Command::Plot { input } => plot(&ctx, input.clone()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
