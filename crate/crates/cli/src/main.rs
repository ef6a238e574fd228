//! `treewalk` command line: reads a TOML config and writes JSON and CSV
//! reports into an output directory.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when the
//! support of the measure is fully exceptional.

mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use treewalk::boundary::{hitting_histogram, stationarity_gap, triviality_check};
use treewalk::scale::{
    classify_factor, classify_subgroup, is_uniscalar, is_unimodular_on_words, modular_consistent, scale_element,
    scale_oracle, ScaleContext, SubgroupSpec,
};
use treewalk::tdlc::{build_coset_tree, tidy_subgroups, AlphaModel};
use treewalk::walk::rate_of_escape;
use treewalk::{Error, Measure, WalkParams};

use crate::config::RunConfig;

const OUT_ENV: &str = "TREEWALK_OUT";

#[derive(Parser, Debug)]
#[command(name = "treewalk", version, about = "Random walks on products of trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; defaults to $TREEWALK_OUT, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for trial-parallel runs.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Rate of escape, drift and convergence verdicts.
    Walk,
    /// Empirical hitting measure on cylinders and its stationarity gap.
    Hitting,
    /// Exceptional / uniscalar classification of a generated subgroup.
    Classify,
    /// Scale and modular function of single elements.
    Scale,
    /// Coset tree window with degree and tidiness reports.
    CosetTree,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(io::Error),
    Csv(csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Hypothesis(_)) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Csv(e) => write!(f, "csv error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("treewalk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Parse("--config is required".into()))?;
    let config = RunConfig::load(path)?;
    if cli.threads == 0 {
        return Err(Error::InvalidParameter("--threads must be at least 1".into()).into());
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Walk => cmd_walk(&config, &out),
        Command::Hitting => cmd_hitting(&config, &out),
        Command::Classify => cmd_classify(&config, &out),
        Command::Scale => cmd_scale(&config, &out),
        Command::CosetTree => cmd_coset_tree(&config, &out),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn gated_measure(config: &RunConfig) -> CliResult<Measure> {
    let measure = config.measure()?;
    if !treewalk::scale::transience_hypothesis(&measure) {
        return Err(Error::Hypothesis("fully exceptional support".into()).into());
    }
    Ok(measure)
}

fn binomial_stderr(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn cmd_walk(config: &RunConfig, out: &Path) -> CliResult<()> {
    let section = RunConfig::require(&config.walk, "walk")?;
    let measure = gated_measure(config)?;
    let params = WalkParams { n: section.n, trials: section.trials, depth: section.depth, master_seed: config.master_seed };
    let report = rate_of_escape(&measure, &params)?;
    let triviality = triviality_check(&measure)?;
    write_json(&out.join("walk.json"), &json!({ "report": report, "triviality": triviality, "exact": ["drift_exact", "triviality"] }))?;
    let mut w = csv::Writer::from_path(out.join("walk.csv"))?;
    w.write_record([
        "factor",
        "drift_exact",
        "rate_mean",
        "rate_stderr",
        "h_drift_mean",
        "h_drift_stderr",
        "min_h_mean",
        "min_h_stderr",
        "random_end",
        "omega",
        "undecided",
    ])?;
    for f in &report.factors {
        w.write_record([
            f.factor.to_string(),
            f.drift_exact.clone(),
            f.rate_mean.to_string(),
            f.rate_stderr.to_string(),
            f.h_drift_mean.to_string(),
            f.h_drift_stderr.to_string(),
            f.min_h_mean.to_string(),
            f.min_h_stderr.to_string(),
            f.verdict_counts.random_end.to_string(),
            f.verdict_counts.omega.to_string(),
            f.verdict_counts.undecided.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_hitting(config: &RunConfig, out: &Path) -> CliResult<()> {
    let section = RunConfig::require(&config.hitting, "hitting")?;
    let walk = config.walk.as_ref();
    let n = section.n.or(walk.map(|w| w.n)).ok_or_else(|| Error::Parse("[hitting] needs n (or a [walk] section)".into()))?;
    let trials = section
        .trials
        .or(walk.map(|w| w.trials))
        .ok_or_else(|| Error::Parse("[hitting] needs trials (or a [walk] section)".into()))?;
    let measure = gated_measure(config)?;
    let params = WalkParams { n, trials, depth: section.depth, master_seed: config.master_seed };
    let hists = hitting_histogram(&measure, &params)?;
    let mut factors = Vec::new();
    for h in &hists {
        let mut w = csv::Writer::from_path(out.join(format!("hitting_factor{}.csv", h.factor)))?;
        w.write_record(["depth", "word", "count"])?;
        for (depth, word, count) in h.rows() {
            w.write_record([depth.to_string(), word, count.to_string()])?;
        }
        w.flush()?;
        let gap = stationarity_gap(&measure, h)?;
        let max_mass = h.max_cylinder_mass();
        let omega = h.omega_mass();
        factors.push(json!({
            "factor": h.factor,
            "depth": h.depth,
            "total": h.total,
            "omega": h.omega,
            "undecided": h.undecided,
            "max_cylinder_mass": max_mass,
            "max_cylinder_mass_stderr": binomial_stderr(max_mass, h.total),
            "omega_mass": omega,
            "omega_mass_stderr": binomial_stderr(omega, h.total),
            "stationarity": gap,
        }));
    }
    write_json(&out.join("hitting.json"), &json!({ "trials": trials, "horizon": n, "master_seed": config.master_seed, "factors": factors }))?;
    Ok(())
}

fn subgroup_spec(config: &RunConfig) -> CliResult<SubgroupSpec> {
    let gens = config.classify.as_ref().and_then(|c| c.generators.clone());
    Ok(match gens {
        Some(texts) => {
            let gens = texts.iter().map(|t| config.element(t)).collect::<treewalk::Result<Vec<_>>>()?;
            SubgroupSpec::new(config.alphabets()?, gens)?
        }
        None => SubgroupSpec::from_measure(&config.measure()?),
    })
}

fn cmd_classify(config: &RunConfig, out: &Path) -> CliResult<()> {
    let section = config.classify.clone().unwrap_or_default();
    let bound = section.word_bound.unwrap_or(4);
    let search_len = section.closure_search.unwrap_or(6);
    let spec = subgroup_spec(config)?;
    let mut factor_verdicts = Vec::new();
    for j in 0..spec.num_factors() {
        let v = classify_factor(&spec, j)?;
        factor_verdicts.push(json!({
            "factor": j,
            "class": v.class,
            "fixed_end": v.fixed_end.map(|e| e.to_string()),
        }));
    }
    let closure = ScaleContext::Closure { search_len };
    let report = json!({
        "exact": true,
        "generators": spec.generators().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "word_bound": bound,
        "factor_verdicts": factor_verdicts,
        "subgroup": classify_subgroup(&spec)?,
        "uniscalar": is_uniscalar(&spec, bound, ScaleContext::Ambient)?,
        "unimodular_sampled": is_unimodular_on_words(&spec, bound, ScaleContext::Ambient)?,
        "closure": {
            "search_len": search_len,
            "uniscalar": is_uniscalar(&spec, bound, closure)?,
            "unimodular_sampled": is_unimodular_on_words(&spec, bound, closure)?,
        },
    });
    write_json(&out.join("classify.json"), &report)
}

fn cmd_scale(config: &RunConfig, out: &Path) -> CliResult<()> {
    let section = RunConfig::require(&config.scale, "scale")?;
    let mut elements: Vec<Value> = Vec::new();
    for text in &section.elements {
        let g = config.element(text)?;
        let depth = g.factors().iter().map(|f| f.shift().unsigned_abs() as u32 + 2).max().unwrap_or(2);
        let oracle = match scale_oracle(&g, depth) {
            Ok(v) => Some(v),
            Err(Error::Overflow(_)) => None,
            Err(e) => return Err(e.into()),
        };
        elements.push(json!({
            "exact": true,
            "scale": scale_element(&g),
            "oracle_depth": depth,
            "oracle": oracle,
            "modular_consistent": modular_consistent(&g),
        }));
    }
    write_json(&out.join("scale.json"), &json!({ "elements": elements }))
}

fn cmd_coset_tree(config: &RunConfig, out: &Path) -> CliResult<()> {
    let section = RunConfig::require(&config.coset_tree, "coset_tree")?;
    let model = AlphaModel::new(section.q, section.m, section.depth)?;
    let tree = build_coset_tree(&model, section.j_min, section.j_max)?;
    let mut w = csv::Writer::from_path(out.join("coset_tree.csv"))?;
    w.write_record(["level", "rep", "parent_level", "parent_rep"])?;
    for (level, rep, parent_level, parent_rep) in tree.edge_rows() {
        w.write_record([level.to_string(), rep, parent_level.to_string(), parent_rep])?;
    }
    w.flush()?;
    let tidy = match tidy_subgroups(&model) {
        Ok(r) => Some(r),
        Err(Error::Overflow(_)) => None,
        Err(e) => return Err(e.into()),
    };
    write_json(&out.join("coset_tree.json"), &json!({ "exact": true, "degrees": tree.degree_report(), "tidy": tidy }))
}
