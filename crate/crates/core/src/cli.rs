//! Command dispatch for the `agq` binary.
//!
//! Every flag can also come from a JSON file passed with `--config`; flags
//! given on the command line win. Exit status is 0 on success, 1 when a
//! command fails and 2 on usage errors.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::ceirt::{calibrate_item_bank, OptimizerConfig};
use crate::corpus::{generate_dataset, load_item_bank, ItemBank, Stage};
use crate::eval::{
    default_study_bank, export_knowledge_report, run_ablation, run_policy_comparison,
    text_similarity, write_ablation_csv, write_policy_csv, AblationConfig, KnowledgeTrace, Policy,
    PolicyConfig, SimulatedLearner,
};
use crate::gateway::{LiveGateway, LlmGateway, MockGateway, MockScript};
use crate::session::{
    create_session, persist_session, restore_session, run_turn, serve_api, AppState, Session,
    SessionConfig, SystemClock, TurnContext, TurnOutcome,
};

#[derive(Debug, Parser)]
#[command(name = "agq", version, about = "Adaptive guiding-question engine")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub bank: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub gateway: Option<GatewayKind>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub bind: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Mock reply script (JSON list of entries).
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayKind {
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Concepts,
    Sentences,
    QaPairs,
    Filter,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Concepts => Stage::Concepts,
            StageArg::Sentences => Stage::Sentences,
            StageArg::QaPairs => Stage::QaPairs,
            StageArg::Filter => Stage::Filter,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an item bank from raw documents with the LLM pipeline.
    Ingest {
        #[arg(long = "doc", required = true)]
        docs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "filter")]
        until: StageArg,
    },
    /// Fit item parameters to the bank's logged responses and write them back.
    Calibrate,
    /// Compare study-item policies on a simulated learner.
    Simulate {
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Sweep the difficulty gap on a simulated learner.
    Ablate {
        /// `start:stop:step`
        #[arg(long)]
        gaps: Option<String>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Text similarity of candidate questions, and knowledge reports of saved sessions.
    Evaluate {
        /// JSON list of `{"candidate": .., "references": [..]}`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Session files to turn into knowledge reports.
        #[arg(long = "session")]
        sessions: Vec<PathBuf>,
    },
    /// Serve the session HTTP API.
    Serve,
    /// Interactive tutoring loop on stdin/stdout.
    Chat {
        /// Resume this session file instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
}

/// File form of the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub bank: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub gateway: Option<GatewayKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub bind: Option<String>,
    pub out: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub rounds: Option<usize>,
    pub seeds: Option<usize>,
    pub gaps: Option<String>,
    pub session: Option<SessionConfig>,
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub bank: Option<PathBuf>,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub gateway: GatewayKind,
    pub bind: String,
    pub out: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub rounds: Option<usize>,
    pub seeds: Option<usize>,
    pub gaps: Option<String>,
    pub session: SessionConfig,
}

impl Settings {
    pub fn resolve(flags: &CommonFlags) -> Result<Self> {
        let file: FileConfig = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de).map_err(|e| {
                    anyhow::anyhow!("{}: at `{}`: {}", path.display(), e.path(), e.inner())
                })?
            }
            None => FileConfig::default(),
        };
        let mut session = file.session.unwrap_or_default();
        let seed = flags.seed.or(file.seed).unwrap_or(session.seed);
        session.seed = seed;
        if let Some(endpoint) = flags.endpoint.clone().or(file.endpoint) {
            session.gateway.endpoint_url = endpoint;
        }
        if let Some(model) = flags.model.clone().or(file.model) {
            session.gateway.model_name = model;
        }
        Ok(Self {
            bank: flags.bank.clone().or(file.bank),
            seed,
            epochs: flags.epochs.or(file.epochs),
            gateway: flags.gateway.or(file.gateway).unwrap_or(GatewayKind::Mock),
            bind: flags
                .bind
                .clone()
                .or(file.bind)
                .unwrap_or_else(|| "127.0.0.1:8080".into()),
            out: flags.out.clone().or(file.out),
            script: flags.script.clone().or(file.script),
            rounds: file.rounds,
            seeds: file.seeds,
            gaps: file.gaps,
            session,
        })
    }

    fn require_bank(&self) -> Result<ItemBank> {
        let path = self.bank.as_ref().context("--bank is required")?;
        Ok(load_item_bank(path)?)
    }

    fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }

    fn gateway(&self) -> Result<Arc<dyn LlmGateway>> {
        match self.gateway {
            GatewayKind::Mock => {
                let path = self
                    .script
                    .as_ref()
                    .context("--gateway mock needs --script <file>")?;
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let script: MockScript = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                Ok(Arc::new(MockGateway::new(script)))
            }
            GatewayKind::Live => Ok(Arc::new(LiveGateway::new(self.session.gateway.clone())?)),
        }
    }
}

/// `start:stop:step`.
pub fn parse_gaps(spec: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        bail!("--gaps expects start:stop:step, got `{spec}`");
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number `{s}` in --gaps"))
    };
    Ok((num(a)?, num(b)?, num(c)?))
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    match dispatch(cli, &mut stdin.lock(), &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            1
        }
    }
}

/// The error and its causes, skipping causes already quoted by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

/// Runs one parsed invocation. `input`/`output` back the chat loop.
pub fn dispatch(cli: Cli, input: &mut dyn BufRead, output: &mut dyn Write) -> Result<()> {
    let s = Settings::resolve(&cli.common)?;
    match cli.command {
        Command::Ingest { docs, until } => ingest(&s, &docs, until.into(), output),
        Command::Calibrate => calibrate(&s, output),
        Command::Simulate { rounds, seeds } => {
            simulate(&s, rounds.or(s.rounds), seeds.or(s.seeds), output)
        }
        Command::Ablate {
            gaps,
            rounds,
            seeds,
        } => ablate(
            &s,
            gaps.or(s.gaps.clone()).as_deref(),
            rounds.or(s.rounds),
            seeds.or(s.seeds),
            output,
        ),
        Command::Evaluate {
            input: pairs,
            sessions,
        } => evaluate(&s, pairs.as_deref(), &sessions, output),
        Command::Serve => serve(&s),
        Command::Chat { resume } => chat(&s, resume.as_deref(), input, output),
    }
}

fn ingest(s: &Settings, docs: &[PathBuf], until: Stage, output: &mut dyn Write) -> Result<()> {
    let out = s.require_out()?;
    let texts = docs
        .iter()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let gw = s.gateway()?;
    let artifacts = generate_dataset(&texts, gw.as_ref(), until)?;
    let stages: Vec<String> = artifacts
        .completed
        .iter()
        .map(|st| st.to_string())
        .collect();
    if until >= Stage::QaPairs {
        let n = artifacts.items.len();
        artifacts.into_bank()?.save(out)?;
        writeln!(
            output,
            "wrote {n} items to {} (stages: {})",
            out.display(),
            stages.join(", ")
        )?;
    } else {
        let text =
            serde_json::to_string_pretty(&serde_json::json!({ "concepts": artifacts.concepts }))?;
        std::fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
        writeln!(
            output,
            "wrote {} concepts to {}",
            artifacts.concepts.len(),
            out.display()
        )?;
    }
    Ok(())
}

fn calibrate(s: &Settings, output: &mut dyn Write) -> Result<()> {
    let path = s.bank.as_ref().context("--bank is required")?;
    let mut bank = load_item_bank(path)?;
    let mut cfg = OptimizerConfig::calibration().with_seed(s.seed);
    if let Some(e) = s.epochs {
        cfg = cfg.with_epochs(e);
    }
    let fit = calibrate_item_bank(&bank.response_matrix()?, &cfg)?;
    bank.set_params(fit.params)?;
    let target = s.out.as_deref().unwrap_or(path);
    bank.save(target)?;
    writeln!(
        output,
        "calibrated {} items over {} epochs: loss {:.6} -> {:.6}; wrote {}",
        bank.len(),
        cfg.epochs,
        fit.report.initial_loss,
        fit.report.final_loss,
        target.display()
    )?;
    for id in &fit.report.degenerate_items {
        writeln!(
            output,
            "warning: item {id} has only one outcome in the data"
        )?;
    }
    for id in &fit.report.flat_items {
        writeln!(output, "warning: item {id} ended with zero discrimination")?;
    }
    Ok(())
}

fn simulate(
    s: &Settings,
    rounds: Option<usize>,
    seeds: Option<usize>,
    output: &mut dyn Write,
) -> Result<()> {
    let out = s.require_out()?;
    let bank = match &s.bank {
        Some(p) => load_item_bank(p)?,
        None => default_study_bank(s.seed)?,
    };
    let defaults = PolicyConfig::default();
    let cfg = PolicyConfig {
        rounds: rounds.unwrap_or(defaults.rounds),
        seeds: match seeds {
            Some(n) => (s.seed..s.seed + n as u64).collect(),
            None => defaults.seeds.iter().map(|x| x + s.seed).collect(),
        },
        ..defaults
    };
    let cmp = run_policy_comparison(&bank, &Policy::ALL, &cfg)?;
    write_policy_csv(&cmp, out)?;
    let (w, n) = cmp.wins(Policy::Suitability, Policy::UniformRandom);
    writeln!(
        output,
        "suitability beat uniform_random on {w}/{n} seeds; wrote {}",
        out.display()
    )?;
    Ok(())
}

fn ablate(
    s: &Settings,
    gaps: Option<&str>,
    rounds: Option<usize>,
    seeds: Option<usize>,
    output: &mut dyn Write,
) -> Result<()> {
    let out = s.require_out()?;
    let (a, b, step) = parse_gaps(gaps.unwrap_or("0:3:0.25"))?;
    let mut cfg = AblationConfig::grid(a, b, step, rounds.unwrap_or(20), seeds.unwrap_or(20))?;
    cfg.seeds.iter_mut().for_each(|x| *x += s.seed);
    let learner = SimulatedLearner::new(vec![0.0; 5], 1.0)?;
    let result = run_ablation(&learner, &cfg)?;
    write_ablation_csv(&result, out)?;
    writeln!(
        output,
        "peak gap {} over {} grid points; wrote {}",
        result.peak_gap,
        result.points.len(),
        out.display()
    )?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Pair {
    candidate: String,
    references: Vec<String>,
}

fn evaluate(
    s: &Settings,
    pairs: Option<&Path>,
    sessions: &[PathBuf],
    output: &mut dyn Write,
) -> Result<()> {
    if pairs.is_none() && sessions.is_empty() {
        bail!("evaluate needs --input and/or --session");
    }
    let out = s.require_out()?;
    if let Some(path) = pairs {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let pairs: Vec<Pair> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut csv = String::from("index,bleu4,rouge1_f,rouge2_f,rougeL_f\n");
        for (i, p) in pairs.iter().enumerate() {
            let sc = text_similarity(&p.candidate, &p.references)?;
            csv.push_str(&format!(
                "{i},{},{},{},{}\n",
                sc.bleu4, sc.rouge1_f, sc.rouge2_f, sc.rouge_l_f
            ));
        }
        let csv_path = if sessions.is_empty() {
            out.to_path_buf()
        } else {
            out.join("similarity.csv")
        };
        if !sessions.is_empty() {
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        }
        std::fs::write(&csv_path, csv)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        writeln!(
            output,
            "scored {} pairs; wrote {}",
            pairs.len(),
            csv_path.display()
        )?;
    }
    if !sessions.is_empty() {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let traces = sessions
            .iter()
            .map(|p| Ok(KnowledgeTrace::from_session(&restore_session(p)?)))
            .collect::<Result<Vec<_>>>()?;
        for f in export_knowledge_report(&traces, out)? {
            writeln!(
                output,
                "report {}: {} and {}",
                f.trace_id,
                f.csv.display(),
                f.radar.display()
            )?;
        }
    }
    Ok(())
}

fn serve(s: &Settings) -> Result<()> {
    let bank = s.require_bank()?;
    let mut state = AppState::new(bank, s.session.clone(), s.gateway()?, Arc::new(SystemClock));
    if let Some(dir) = &s.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        state = state.with_persist_dir(dir.clone());
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve_api(state, &s.bind))
}

fn chat(
    s: &Settings,
    resume: Option<&Path>,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let bank = s.require_bank()?;
    let gw = s.gateway()?;
    let clock = SystemClock;
    let mut session: Session = match resume {
        Some(p) => restore_session(p)?,
        None => create_session(&bank, None, s.session.clone(), &clock)?,
    };
    let save_to = s.out.clone().or_else(|| resume.map(Path::to_path_buf));
    let ctx = TurnContext {
        bank: &bank,
        gateway: gw.as_ref(),
        clock: &clock,
    };
    writeln!(
        output,
        "session {} (type `exit` to quit)",
        session.session_id
    )?;
    let mut line = String::new();
    loop {
        write!(output, "> ")?;
        output.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let query = line.trim();
        if query.is_empty() {
            continue;
        }
        match run_turn(&mut session, ctx, query) {
            Ok(TurnOutcome::Terminated) => break,
            Ok(TurnOutcome::Turn(t)) => {
                writeln!(output, "{}", t.response)?;
                let branch = match t.branch {
                    crate::session::Branch::Low => "foundational",
                    crate::session::Branch::High => "application",
                };
                writeln!(output, "guiding questions ({branch}):")?;
                for (i, q) in t.guiding_questions.iter().enumerate() {
                    writeln!(output, "{}. {} [{:.2}]", i + 1, q.text, q.quality)?;
                }
                for w in &t.warnings {
                    writeln!(output, "warning: {w}")?;
                }
            }
            Err(e) => writeln!(output, "turn failed: {e}")?,
        }
        if let Some(p) = &save_to {
            persist_session(&session, p)?;
        }
    }
    if let Some(p) = &save_to {
        persist_session(&session, p)?;
        writeln!(output, "saved {}", p.display())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_parse() {
        assert_eq!(parse_gaps("0:3:0.25").unwrap(), (0.0, 3.0, 0.25));
        assert!(parse_gaps("0:3").is_err());
        assert!(parse_gaps("a:b:c").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["agq", "calibrate", "--frobnicate"]), 2);
        assert_eq!(run(["agq"]), 2);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(
            &cfg,
            r#"{"seed": 5, "bind": "0.0.0.0:1", "session": {"guidance": {"epsilon_low": 0.5}}}"#,
        )
        .unwrap();
        let flags = CommonFlags {
            config: Some(cfg.clone()),
            seed: Some(9),
            ..CommonFlags::default()
        };
        let s = Settings::resolve(&flags).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.session.seed, 9);
        assert_eq!(s.bind, "0.0.0.0:1");
        assert_eq!(s.session.guidance.epsilon_low, 0.5);

        std::fs::write(&cfg, r#"{"sed": 5}"#).unwrap();
        let flags = CommonFlags {
            config: Some(cfg),
            ..CommonFlags::default()
        };
        assert!(Settings::resolve(&flags).is_err());
    }
}
