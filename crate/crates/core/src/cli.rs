//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compile::{compile_kb, CompileConfig};
use crate::data::{emit_results, load_kinship, load_promoters, results_to_string, KinshipData, ResultRow};
use crate::error::{Error, Result};
use crate::experiment::{dna_rules_text, parse_mode, run_dna, run_kinship, summarize, ExperimentConfig};
use crate::ground::GroundAtom;
use crate::logic::{eliminate_intermediates, parse_rules, Assignment, KnowledgeBase};
use crate::rbm::{read_model, write_model, CdConfig, Clamp, Rbm};
use crate::relpipe::RelationalModel;
use crate::verify::{check_equivalence, fuzz, minimize_counterexample, Satisfiability};

#[derive(Debug, Parser)]
#[command(name = "rulerbm", version, about = "Compile weighted if-then rules into RBMs and reason with them")]
pub struct Cli {
    /// Worker threads for parallel folds and repeats (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a rule file into a model file.
    Compile(CompileArgs),
    /// Check that a model's rank energy tracks the rules' satisfiability.
    Verify(VerifyArgs),
    /// Conditional marginals or Gibbs frequencies under a clamp.
    Infer(InferArgs),
    /// Contrastive-divergence training on 0/1 vectors.
    Train(TrainArgs),
    /// Promoter prediction with and without the domain theory.
    ExperimentDna(DnaArgs),
    /// Relation and entity queries on kinship triples.
    ExperimentKinship(KinshipArgs),
    /// Equivalence checks on random knowledge bases.
    Fuzz(FuzzArgs),
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Randomly initialised units appended after the rule units.
    #[arg(long, default_value_t = 0)]
    pub free_hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated symbols to eliminate by chaining before compiling.
    #[arg(long, value_delimiter = ',')]
    pub eliminate: Vec<String>,
    /// Output model path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub rules: PathBuf,
    /// Model to check; compiled from the rules when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `name=0|1` pairs, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub clamp: Vec<String>,
    /// Visibles to report; every free visible when absent.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<String>,
    #[arg(long, default_value = "conditional")]
    pub mode: String,
    #[arg(long, default_value_t = 1000)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One 0/1 string per line, one character per visible.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub cd_steps: Option<usize>,
    /// Let CD update the compiled rule units as well.
    #[arg(long)]
    pub unfreeze: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DnaArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Restrict to one inference mode.
    #[arg(long)]
    pub mode: Option<String>,
    /// Skip the leave-one-out run.
    #[arg(long)]
    pub no_loo: bool,
    /// Skip the learning curve.
    #[arg(long)]
    pub no_curve: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KinshipArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Entity-query test sizes.
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
    /// `rel(a,b)?`, `?(a,b)` or `rel(a,?)`; answers one query instead of the protocol.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub no_loo: bool,
    #[arg(long)]
    pub no_entity: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub cases: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Errors are reported on `err`.
pub fn run<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, out)),
            Err(e) => Err(Error::InvalidConfig(e.to_string())),
        },
        None => dispatch(&cli.command, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: &Command, out: &mut (dyn Write + Send)) -> Result<i32> {
    match cmd {
        Command::Compile(a) => cmd_compile(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Infer(a) => cmd_infer(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::ExperimentDna(a) => cmd_dna(a, out),
        Command::ExperimentKinship(a) => cmd_kinship(a, out),
        Command::Fuzz(a) => cmd_fuzz(a, out),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    parse_rules(&read(path)?)
}

fn cmd_compile(a: &CompileArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let mut kb = load_kb(&a.rules)?;
    if !a.eliminate.is_empty() {
        let hidden: Vec<&str> = a.eliminate.iter().map(String::as_str).collect();
        kb = eliminate_intermediates(&kb, &hidden)?;
    }
    let cfg = CompileConfig {
        epsilon: a.epsilon,
        n_free_hidden: a.free_hidden,
        seed: a.seed,
    };
    let text = write_model(&compile_kb(&kb, &cfg)?)?;
    match &a.out {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let kb = load_kb(&a.rules)?;
    let model = match &a.model {
        Some(path) => read_model(&read(path)?)?,
        None => compile_kb(&kb, &CompileConfig::with_epsilon(a.epsilon))?,
    };
    let weighted = check_equivalence(&kb, &model, a.epsilon, Satisfiability::Weighted, a.tol)?;
    write!(out, "{}", weighted.render())?;
    let unweighted = check_equivalence(&kb, &model, a.epsilon, Satisfiability::Unweighted, a.tol)?;
    writeln!(out, "{}", unweighted.summary())?;
    if weighted.passed {
        return Ok(0);
    }
    let failing = weighted
        .rows
        .iter()
        .find(|r| r.residual > a.tol)
        .map(|r| Assignment::new(r.assignment.clone()));
    if let Some(failing) = failing {
        if let Ok(report) = minimize_counterexample(&kb, &model, a.epsilon, &failing, a.tol) {
            write!(out, "{}", report.render(&kb.symbols))?;
        }
    }
    Ok(1)
}

fn parse_clamp(model: &Rbm, pairs: &[String]) -> Result<Clamp> {
    let mut values = Vec::with_capacity(pairs.len());
    for p in pairs.iter().filter(|p| !p.trim().is_empty()) {
        let (name, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Query(format!("clamp `{p}` is not `name=0|1`")))?;
        let idx = model
            .visible_index(name.trim())
            .ok_or_else(|| Error::UnknownSymbol(name.trim().to_string()))?;
        let v = match v.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::Query(format!("clamp value `{other}` is not 0 or 1"))),
        };
        values.push((idx, v));
    }
    Clamp::from_pairs(model.n_visible(), &values)
}

fn cmd_infer(a: &InferArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let model = read_model(&read(&a.model)?)?;
    let clamp = parse_clamp(&model, &a.clamp)?;
    let targets: Vec<usize> = if a.target.is_empty() {
        clamp.free().collect()
    } else {
        a.target
            .iter()
            .map(|t| model.visible_index(t.trim()).ok_or_else(|| Error::UnknownSymbol(t.clone())))
            .collect::<Result<_>>()?
    };
    if let Some(&t) = targets.iter().find(|&&t| clamp.mask[t]) {
        return Err(Error::TargetClamped(t));
    }
    let probs: Vec<f64> = match a.mode.as_str() {
        "conditional" => {
            if a.target.is_empty() {
                let m = model.conditional_marginals(&clamp)?;
                targets.iter().map(|&t| m[t]).collect()
            } else {
                let joint = model.conditional_label(&clamp, &targets)?;
                (0..targets.len())
                    .map(|bit| {
                        joint
                            .iter()
                            .enumerate()
                            .filter(|(c, _)| (c >> bit) & 1 == 1)
                            .map(|(_, p)| p)
                            .sum()
                    })
                    .collect()
            }
        }
        "gibbs" => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let f = model.gibbs_infer(&clamp, a.steps, a.chains, &mut rng)?;
            targets.iter().map(|&t| f[t]).collect()
        }
        other => return Err(Error::InvalidConfig(format!("unknown inference mode `{other}`"))),
    };
    for (&t, p) in targets.iter().zip(probs) {
        writeln!(out, "P({}=1) = {p:.6}", model.visible_names[t])?;
    }
    Ok(0)
}

fn parse_bit_rows(text: &str, n: usize, path: &Path) -> Result<Vec<Vec<bool>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line: String = line.chars().filter(|c| !c.is_whitespace()).collect();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if line.len() != n {
            return Err(err(format!("expected {n} bits, got {}", line.len())));
        }
        rows.push(
            line.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(err(format!("invalid bit `{other}`"))),
                })
                .collect::<Result<_>>()?,
        );
    }
    Ok(rows)
}

fn cmd_train(a: &TrainArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let model = read_model(&read(&a.model)?)?;
    let data = parse_bit_rows(&read(&a.data)?, model.n_visible(), &a.data)?;
    let d = CdConfig::default();
    let cfg = CdConfig {
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        cd_steps: a.cd_steps.unwrap_or(d.cd_steps),
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        freeze_rule_units: !a.unfreeze,
        seed: a.seed,
    };
    let before = model.reconstruction_cross_entropy(&data)?;
    let trained = model.train_cd(&data, &cfg)?;
    let after = trained.reconstruction_cross_entropy(&data)?;
    fs::write(&a.out, write_model(&trained)?)?;
    writeln!(out, "reconstruction cross-entropy: {before:.6} -> {after:.6}")?;
    Ok(0)
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::parse(&read(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn print_summary(rows: &[ResultRow], out: &mut (dyn Write + Send)) -> Result<()> {
    writeln!(out, "{:<16} {:>10} {:<12} {:>9} {:>5}", "experiment", "train_size", "mode", "accuracy", "runs")?;
    for (exp, size, mode, acc, n) in summarize(rows) {
        writeln!(out, "{exp:<16} {size:>10} {mode:<12} {acc:>9.4} {n:>5}")?;
    }
    Ok(())
}

fn finish(rows: &[ResultRow], path: &Option<PathBuf>, out: &mut (dyn Write + Send)) -> Result<i32> {
    print_summary(rows, out)?;
    if let Some(p) = path {
        emit_results(rows, p)?;
    }
    Ok(0)
}

fn cmd_dna(a: &DnaArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let mut cfg = load_config(&a.config)?.dna;
    if let Some(p) = &a.data {
        cfg.data = Some(p.clone());
    }
    if let Some(p) = &a.rules {
        cfg.rules = Some(p.clone());
    }
    if let Some(e) = a.epsilon {
        cfg.epsilon = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = &a.train_sizes {
        cfg.train_sizes = s.clone();
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(m) = &a.mode {
        parse_mode(m)?;
        cfg.modes = vec![m.clone()];
    }
    cfg.leave_one_out &= !a.no_loo;
    cfg.learning_curve &= !a.no_curve;
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no promoter data file given (--data)".into()))?;
    let records = load_promoters(&data)?;
    writeln!(out, "loaded {} promoter records", records.len())?;
    let rows = run_dna(&records, &dna_rules_text(&cfg)?, &cfg)?;
    finish(&rows, &a.out, out)
}

fn parse_query(q: &str) -> Result<(Option<String>, String, Option<String>)> {
    let q = q.trim();
    let (body, trailing) = match q.strip_suffix('?') {
        Some(b) if b.ends_with(')') => (b, true),
        _ => (q, false),
    };
    let open = body.find('(').ok_or_else(|| Error::Query(format!("bad query `{q}`")))?;
    let inner = body[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::Query(format!("bad query `{q}`")))?;
    let rel = body[..open].trim();
    let (a, b) = inner
        .split_once(',')
        .ok_or_else(|| Error::Query(format!("query `{q}` needs two arguments")))?;
    let (a, b) = (a.trim(), b.trim());
    let rel = (rel != "?").then(|| rel.to_string());
    let b = (b != "?").then(|| b.to_string());
    if a.is_empty() || a == "?" || (rel.is_none() && b.is_none()) || (b.is_none() && trailing) {
        return Err(Error::Query(format!("unsupported query `{q}`")));
    }
    if b.is_some() && rel.is_some() && !trailing {
        return Err(Error::Query(format!(
            "query `{q}` has no unknown; use `rel(a,b)?` or `rel(a,?)`"
        )));
    }
    Ok((rel, a.to_string(), b))
}

fn answer_query(
    data: &KinshipData,
    q: &str,
    cfg: &crate::relpipe::RelConfig,
    path: &Option<PathBuf>,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let (rel, a, b) = parse_query(q)?;
    let e = &data.examples;
    let s = &e.scheme;
    let ai = s.entity(&a)?;
    let rel_id = rel.as_deref().map(|r| s.predicate(r)).transpose()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "rank", "candidate", "score"])?;
    let answer = match b {
        Some(b) => {
            let bi = s.entity(&b)?;
            let held: Vec<GroundAtom> = e
                .atoms
                .iter()
                .filter(|t| t.args == [ai, bi] && rel_id.is_none_or(|r| t.predicate == r))
                .cloned()
                .collect();
            RelationalModel::fit(&e.without(&held), cfg)?.answer_relation(ai, bi)?
        }
        None => {
            let r = rel_id.expect("entity queries name a relation");
            let held: Vec<GroundAtom> = e
                .atoms
                .iter()
                .filter(|t| t.predicate == r && t.args[0] == ai)
                .cloned()
                .collect();
            RelationalModel::fit(&e.without(&held), cfg)?.answer_entity(r, ai)?
        }
    };
    for (rank, (_, name, score)) in answer.ranked.iter().enumerate() {
        w.write_record([q, &(rank + 1).to_string(), name, &score.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    match path {
        Some(p) => std::fs::write(p, &bytes)?,
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

fn cmd_kinship(a: &KinshipArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let mut cfg = load_config(&a.config)?.kinship;
    if let Some(p) = &a.data {
        cfg.data = Some(p.clone());
    }
    if let Some(e) = a.epsilon {
        cfg.model.epsilon = e;
    }
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
        cfg.model.seed = s;
    }
    if let Some(s) = &a.train_sizes {
        cfg.test_sizes = s.clone();
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(m) = &a.mode {
        cfg.model.mode = parse_mode(m)?;
    }
    cfg.leave_one_out &= !a.no_loo;
    cfg.entity_queries &= !a.no_entity;
    cfg.validate()?;
    let path = cfg
        .data
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no kinship data file given (--data)".into()))?;
    let data = load_kinship(&path)?;
    if let Some(q) = &a.query {
        answer_query(&data, q, &cfg.model, &a.out, out)?;
        return Ok(0);
    }
    writeln!(
        out,
        "loaded {} triples, {} people, {} relations",
        data.examples.len(),
        data.people.len(),
        data.relations.len()
    )?;
    let rows = run_kinship(&data, &cfg)?;
    finish(&rows, &a.out, out)
}

fn cmd_fuzz(a: &FuzzArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let cases = fuzz(a.seed, a.cases, a.tol)?;
    let mut failed = 0;
    for c in &cases {
        writeln!(out, "{}", c.line())?;
        failed += !c.passed as usize;
    }
    writeln!(out, "{} of {} cases passed", cases.len() - failed, cases.len())?;
    Ok(if failed == 0 { 0 } else { 1 })
}

/// CSV text of `rows`, for callers that want the bytes without a file.
pub fn rows_csv(rows: &[ResultRow]) -> Result<String> {
    results_to_string(rows)
}
