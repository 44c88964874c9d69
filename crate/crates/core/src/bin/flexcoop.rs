use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use flexcoop::allocation::{allocations_csv, Allocation, Mechanism};
use flexcoop::game::{GameError, GameOptions};
use flexcoop::lp::{write_lp_format, LpError};
use flexcoop::market::{
    build_coalition_market, check_outcome, clear, outcome_csv, settle, MarketError, MarketOptions, Players,
    PricingScheme,
};
use flexcoop::scenario::{
    generate_scenario, load_scenario, parse_scenario, validate, GeneratorConfig, GeneratorKind, Scenario, ScenarioError,
};
use flexcoop::study::{
    run_allocate, run_game, run_placement, run_sweep_coalitions, write_output, Study, StudyConfig, StudyError,
};

#[derive(Parser)]
#[command(name = "flexcoop", version, about = "Cooperative TSO-DSO flexibility markets")]
struct Cli {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for fixture generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Price (€/MWh) of elastic slack on every nodal balance.
    #[arg(long, global = true)]
    slack_penalty: Option<f64>,
    /// Also write each cleared LP in CPLEX LP format.
    #[arg(long, global = true)]
    dump_lp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and list every violation.
    Validate,
    /// Clear one coalition market.
    Clear {
        /// Comma separated members, e.g. `TSO,dso2`.
        #[arg(long)]
        coalition: String,
        #[arg(long, default_value = "payasbid")]
        pricing: PricingScheme,
    },
    /// Build the cost game over all coalitions.
    Game {
        #[arg(long, default_value = "payasbid")]
        pricing: PricingScheme,
    },
    /// Compute and audit allocation mechanisms.
    Allocate {
        #[arg(long, value_delimiter = ',', default_value = "sv,bsharp,cga,l,epm,pca")]
        mechanisms: Vec<Mechanism>,
        #[arg(long, default_value = "payasbid")]
        pricing: PricingScheme,
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        factors: Vec<f64>,
    },
    /// Total cost of the nested coalition structures per interface factor.
    SweepCoalitions {
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.5,0.2")]
        factors: Vec<f64>,
        #[arg(long, default_value = "payasbid")]
        pricing: PricingScheme,
    },
    /// Clone one DSO at several transmission nodes and compare.
    Placement {
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<String>,
        /// DSO to clone; defaults to the first one.
        #[arg(long)]
        template: Option<String>,
        #[arg(long, default_value = "payasbid")]
        pricing: PricingScheme,
    },
    /// Write a seeded scenario: the synthetic family, or a template with
    /// redrawn bid prices.
    Generate {
        #[arg(long, conflicts_with = "template")]
        small: bool,
        #[arg(long)]
        template: Option<PathBuf>,
    },
}

fn read_scenario(path: Option<&Path>) -> anyhow::Result<Scenario> {
    let path = path.context("--scenario is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(load_scenario(&text)?)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let p = write_output(dir, name, contents)?;
    info!("wrote {}", p.display());
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn factor_tag(f: f64) -> String {
    flexcoop::report::fmt_num(f)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let market = MarketOptions { slack_penalty: cli.slack_penalty };
    let opts = GameOptions { market: market.clone() };
    let out = cli.out.as_path();
    match cli.command {
        Command::Validate => {
            let path = cli.scenario.as_deref().context("--scenario is required")?;
            let s = parse_scenario(&std::fs::read_to_string(path)?)?;
            let r = validate(&s);
            print!("{r}");
            if !r.is_valid() {
                return Err(ScenarioError::Invalid(r).into());
            }
            println!("scenario {} is valid", path.display());
        }
        Command::Clear { coalition, pricing } => {
            let s = read_scenario(cli.scenario.as_deref())?;
            let c = Players::from_scenario(&s).parse(&coalition)?;
            let m = build_coalition_market(&s, c, &market)?;
            if cli.dump_lp {
                write(out, "market.lp", &write_lp_format(&m.lp))?;
            }
            let o = clear(&m)?;
            for w in check_outcome(&s, &m, &o, 1e-7) {
                log::warn!("{w}");
            }
            write(out, "clear.csv", &outcome_csv(&o))?;
            write(out, "clear.json", &json(&o))?;
            for (who, cost) in settle(&m, &o, pricing)? {
                println!("{who}\t{cost:.4}");
            }
            println!("objective\t{:.4}", o.objective);
        }
        Command::Game { pricing } => {
            let s = read_scenario(cli.scenario.as_deref())?;
            if cli.dump_lp {
                let m = build_coalition_market(&s, Players::from_scenario(&s).grand(), &market)?;
                write(out, "grand.lp", &write_lp_format(&m.lp))?;
            }
            let r = run_game(&s, pricing, &opts)?;
            write(out, "game.csv", &r.game.to_csv())?;
            write(out, "game.json", &json(&r))?;
            println!(
                "{} coalitions, submodular: {}, concave: {}, core non-empty: {}",
                r.game.values.len() - 1,
                r.submodularity.holds(),
                r.concavity.holds(),
                r.core.nonempty
            );
        }
        Command::Allocate { mechanisms, pricing, factors } => {
            let s = read_scenario(cli.scenario.as_deref())?;
            let cfg = StudyConfig {
                scenario: cli.scenario.clone(),
                study: Study::Allocate,
                scheme: pricing,
                mechanisms,
                factors,
                out_dir: out.to_path_buf(),
                seed: cli.seed,
                game: opts,
            };
            cfg.validate()?;
            let r = run_allocate(&s, &cfg.factors, cfg.scheme, &cfg.mechanisms, &cfg.game)?;
            write(out, "allocation.csv", &r.to_csv())?;
            write(out, "audit.csv", &r.audit_csv())?;
            write(out, "allocation.json", &json(&r))?;
            for fa in &r.factors {
                let allocs: Vec<Allocation> = fa.results.iter().filter_map(|m| m.allocation.clone()).collect();
                write(out, &format!("mechanisms_{}.csv", factor_tag(fa.factor)), &allocations_csv(&allocs))?;
                for m in fa.results.iter().filter(|m| m.allocation.is_none()) {
                    println!("factor {}: {} {}", fa.factor, m.mechanism, m.note.as_deref().unwrap_or(""));
                }
            }
        }
        Command::SweepCoalitions { factors, pricing } => {
            let s = read_scenario(cli.scenario.as_deref())?;
            let r = run_sweep_coalitions(&s, &factors, pricing, &opts)?;
            write(out, "sweep.csv", &r.to_csv())?;
            write(out, "sweep.json", &json(&r))?;
            for f in factors {
                if let Some(x) = r.savings(f) {
                    println!("factor {f}: grand coalition saves {:.2}%", 100.0 * x);
                }
            }
        }
        Command::Placement { nodes, template, pricing } => {
            let s = read_scenario(cli.scenario.as_deref())?;
            let t = match template {
                Some(t) => t,
                None => match s.sorted_dsos().first() {
                    Some(d) => d.id.clone(),
                    None => bail!("scenario has no DSO to clone"),
                },
            };
            let r = run_placement(&s, &t, &nodes, pricing, &opts)?;
            write(out, "placement.csv", &r.to_csv())?;
            write(out, "placement.json", &json(&r))?;
        }
        Command::Generate { small, template } => {
            let seed = cli.seed.context("generate requires --seed")?;
            let kind = match template {
                Some(p) => GeneratorKind::Reprice(Box::new(read_scenario(Some(&p))?)),
                None if small => GeneratorKind::Small,
                None => bail!("generate needs --small or --template"),
            };
            let s = generate_scenario(&GeneratorConfig { kind, seed });
            let r = validate(&s);
            if !r.is_valid() {
                return Err(ScenarioError::Invalid(r).into());
            }
            write(out, "scenario.json", &s.to_json())?;
        }
    }
    Ok(())
}

fn market_code(e: &MarketError) -> u8 {
    match e {
        MarketError::Scenario(_) => 2,
        MarketError::Infeasible { .. } | MarketError::Unbounded { .. } => 3,
        MarketError::Numerical { .. } | MarketError::NotOptimal => 4,
        MarketError::UnknownMember(_) | MarketError::EmptyCoalition => 1,
    }
}

fn game_code(e: &GameError) -> u8 {
    match e {
        GameError::Market(m) => market_code(m),
        GameError::Lp(_) => 4,
        _ => 1,
    }
}

/// 2 validation, 3 infeasible market, 4 numerical failure, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ScenarioError>().is_some() {
        return 2;
    }
    if let Some(e) = err.downcast_ref::<MarketError>() {
        return market_code(e);
    }
    if let Some(e) = err.downcast_ref::<GameError>() {
        return game_code(e);
    }
    if err.downcast_ref::<LpError>().is_some() {
        return 4;
    }
    match err.downcast_ref::<StudyError>() {
        Some(StudyError::Scenario(_)) => 2,
        Some(StudyError::Market(m)) => market_code(m),
        Some(StudyError::Game(g)) => game_code(g),
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own usage exit code (2) is reserved for invalid scenarios
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
