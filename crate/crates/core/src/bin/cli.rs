//! Batch front door: construct oracles, run recovery experiments and
//! isomorphism builds from config files, emit JSON/DOT artifacts.
//!
//! Every subcommand is a pure function of (config, seed): re-running
//! reproduces byte-identical outputs. Exit codes: 0 success, 2 budget
//! exhaustion, 3 invariant violation, 1 other errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use circle_rgg::error::CircleError;
use circle_rgg::exact::{parse_quad, parse_rational, rat, QuadScalar, Rational};
use circle_rgg::geometry::{Arc, Circle};
use circle_rgg::iso::{
    certificate, non_iso_evidence, run_back_and_forth, verify_certificate, IsoCertificate,
};
use circle_rgg::oracle::GraphOracle;
use circle_rgg::recovery::{Budgets, Recovery};

#[derive(Parser)]
#[command(
    name = "circle-rgg",
    about = "Random geometric graphs on a circle: sampling, structure recovery, isomorphism"
)]
struct Cli {
    /// JSON config file; flags override individual fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Oracle seed override
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: current directory)
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Witness budget multiplier
    #[arg(long, global = true)]
    budget_scale: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Snapshot a finite induced subgraph (JSON + DOT)
    Sample {
        /// Number of equally spaced vertices
        #[arg(long)]
        n: Option<u64>,
    },
    /// Estimate alpha and recover the circumference L
    RecoverL {
        /// Spread-set size (estimate error bound is 3/n)
        #[arg(long)]
        n: Option<u64>,
    },
    /// Build a partial isomorphism between two seeded oracles
    Isomorphism {
        /// Back-and-forth rounds
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Re-verify a certificate produced by `isomorphism`
    Verify {
        /// Certificate file (default: <out>/cert.json)
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Disagreement evidence against candidate isometries (irrational L)
    NonIso {
        #[arg(long)]
        candidates: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// All knobs in one JSON file; unset fields take the defaults below.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
struct ExperimentConfig {
    /// Circumference, e.g. "7/2" or "2+1*sqrt2"
    l: Option<String>,
    /// Edge probability, e.g. "1/2"
    p: Option<String>,
    /// Second oracle's edge probability (isomorphism / non-iso)
    p2: Option<String>,
    seed: Option<u64>,
    seed2: Option<u64>,
    /// Vertices per pool seeded before an isomorphism run
    pool: Option<usize>,
    n: Option<u64>,
    rounds: Option<usize>,
    candidates: Option<usize>,
    trials: Option<usize>,
    budget_scale: Option<f64>,
    /// Densification gap for recover-l, e.g. "1/8"
    gap: Option<String>,
}

impl ExperimentConfig {
    fn load(path: Option<&Path>) -> Result<Self, CircleError> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
            None => Ok(ExperimentConfig::default()),
        }
    }

    fn circle(&self) -> Result<Circle, CircleError> {
        let l = parse_quad(self.l.as_deref().unwrap_or("7/2"))?;
        Circle::new(l)
    }

    fn p(&self) -> Result<Rational, CircleError> {
        parse_rational(self.p.as_deref().unwrap_or("1/2"))
    }

    fn p2(&self) -> Result<Rational, CircleError> {
        match &self.p2 {
            Some(s) => parse_rational(s),
            None => self.p(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CircleError> {
    let mut config = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(scale) = cli.budget_scale {
        config.budget_scale = Some(scale);
    }
    fs::create_dir_all(&cli.out)?;
    let budgets = Budgets {
        scale: config.budget_scale.unwrap_or(1.0),
        ..Budgets::default()
    };

    match &cli.command {
        Command::Sample { n } => cmd_sample(cli, &config, n.or(config.n).unwrap_or(32)),
        Command::RecoverL { n } => {
            cmd_recover_l(cli, &config, budgets, n.or(config.n).unwrap_or(64))
        }
        Command::Isomorphism { rounds } => {
            let rounds = rounds.or(config.rounds).unwrap_or(100);
            cmd_isomorphism(cli, &config, budgets, rounds)
        }
        Command::Verify { cert } => {
            let path = cert.clone().unwrap_or_else(|| cli.out.join("cert.json"));
            cmd_verify(cli, &path)
        }
        Command::NonIso { candidates, trials } => {
            let candidates = candidates.or(config.candidates).unwrap_or(20);
            let trials = trials.or(config.trials).unwrap_or(50);
            cmd_non_iso(cli, &config, candidates, trials)
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CircleError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Fig.-1-style snapshot: n equally spaced vertices, edges at distance < 1.
fn cmd_sample(cli: &Cli, config: &ExperimentConfig, n: u64) -> Result<(), CircleError> {
    let circle = config.circle()?;
    let seed = config.seed.unwrap_or(1);
    let mut o = GraphOracle::new(circle.clone(), config.p()?, seed)?;
    let l = circle.circumference().clone();
    for i in 0..n {
        o.insert(l.mul_rat(&rat(i as i64, n as i64)))?;
    }
    let snap = o.snapshot(None)?;
    write_json(&cli.out.join("report.json"), &snap.to_json())?;
    fs::write(cli.out.join("graph.dot"), snap.to_dot())?;
    println!(
        "sample: {} vertices, {} edges -> report.json, graph.dot",
        snap.len(),
        snap.edges().len()
    );
    Ok(())
}

fn cmd_recover_l(
    cli: &Cli,
    config: &ExperimentConfig,
    budgets: Budgets,
    n: u64,
) -> Result<(), CircleError> {
    let circle = config.circle()?;
    let seed = config.seed.unwrap_or(1);
    let mut o = GraphOracle::new(circle.clone(), config.p()?, seed)?;
    o.insert(QuadScalar::zero())?;
    if let Some(gap) = &config.gap {
        let gap = parse_quad(gap)?;
        o.densify(&gap, 0)?;
    }
    let mut rec = Recovery::new(&mut o, budgets);
    let alpha = rec.estimate_alpha(n)?;
    let (estimate, bound) = rec.recover_l(n)?;
    let report = serde_json::json!({
        "L": circle.circumference().encode(),
        "n": n,
        "alpha_hat": alpha.to_string(),
        "l_estimate": estimate.to_string(),
        "error_bound": bound.to_string(),
    });
    write_json(&cli.out.join("report.json"), &report)?;
    println!(
        "recover-l: alpha_hat = {alpha}, L estimate = {estimate} (± {bound}) -> report.json"
    );
    Ok(())
}

/// Seed an idf pool: the origin plus `extra` sampled vertices.
fn seeded_idf_oracle(
    circle: &Circle,
    p: Rational,
    seed: u64,
    extra: usize,
) -> Result<GraphOracle, CircleError> {
    let mut o = GraphOracle::new(circle.clone(), p, seed)?.with_idf()?;
    o.insert(QuadScalar::zero())?;
    let almost_full = circle
        .circumference()
        .mul_rat(&rat((1 << 20) - 1, 1 << 20));
    let arc = Arc::new(circle, QuadScalar::zero(), almost_full, false, false)?;
    for i in 0..extra {
        o.sample_vertex_in_arc(&arc, i as u64)?;
    }
    Ok(o)
}

fn cmd_isomorphism(
    cli: &Cli,
    config: &ExperimentConfig,
    budgets: Budgets,
    rounds: usize,
) -> Result<(), CircleError> {
    let circle = config.circle()?;
    let pool = config.pool.unwrap_or(5);
    let seed_g = config.seed.unwrap_or(1);
    let seed_h = config.seed2.unwrap_or(seed_g.wrapping_add(1));
    let mut g = seeded_idf_oracle(&circle, config.p()?, seed_g, pool)?;
    let mut h = seeded_idf_oracle(&circle, config.p2()?, seed_h, pool)?;
    let iso = run_back_and_forth(&mut g, &mut h, rounds, budgets)?;
    let cert = certificate(&g, &h, &iso)?;
    let cert_value = serde_json::to_value(&cert)?;
    write_json(&cli.out.join("cert.json"), &cert_value)?;
    let report = serde_json::json!({
        "L": circle.circumference().encode(),
        "rounds": rounds,
        "pairs": iso.len(),
        "pool_g": g.len(),
        "pool_h": h.len(),
        "certificate": "cert.json",
    });
    write_json(&cli.out.join("report.json"), &report)?;
    println!(
        "isomorphism: {} pairs over {} rounds -> report.json, cert.json",
        iso.len(),
        rounds
    );
    Ok(())
}

fn cmd_verify(_cli: &Cli, path: &Path) -> Result<(), CircleError> {
    let text = fs::read_to_string(path)?;
    let cert: IsoCertificate = serde_json::from_str(&text)?;
    verify_certificate(&cert)?;
    println!("verify: {} pairs pass", cert.pairs.len());
    Ok(())
}

fn cmd_non_iso(
    cli: &Cli,
    config: &ExperimentConfig,
    candidates: usize,
    trials: usize,
) -> Result<(), CircleError> {
    let circle = config.circle()?;
    let seed_g = config.seed.unwrap_or(1);
    let seed_h = config.seed2.unwrap_or(seed_g.wrapping_add(1));
    let g = GraphOracle::new(circle.clone(), config.p()?, seed_g)?;
    let h = GraphOracle::new(circle, config.p2()?, seed_h)?;
    let report = non_iso_evidence(&g, &h, candidates, trials)?;
    write_json(&cli.out.join("report.json"), &serde_json::to_value(&report)?)?;
    println!(
        "non-iso: {}/{} candidates disagree -> report.json",
        report
            .candidates
            .iter()
            .filter(|c| c.first_disagreement.is_some())
            .count(),
        candidates
    );
    Ok(())
}
