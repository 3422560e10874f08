use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use assertforge_core::pipeline::{
    build_backend, load_templates, run_all, run_stage1, BackendKind, CheckerKind, RunRequest, Stage1Inputs,
};
use assertforge_core::rag::{build_from_dir, ChunkParams, HashedBowEmbedder};
use assertforge_core::RunConfig;

mod inspect;

#[derive(Parser)]
#[command(name = "assertforge", version, about = "Generate SystemVerilog assertions from a design specification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Information bank commands.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// Reference index commands.
    Rag {
        #[command(subcommand)]
        command: RagCommand,
    },
    /// Run the full pipeline (the bank is built first unless it exists).
    Run(RunArgs),
    /// Lint assertions with the built-in checker.
    Check {
        file: PathBuf,
        /// Print nothing for clean files.
        #[arg(long)]
        quiet: bool,
    },
    /// Tree artifact commands.
    Tree {
        #[command(subcommand)]
        command: TreeCommand,
    },
}

#[derive(Subcommand)]
enum BankCommand {
    /// Build the information bank from the inputs.
    Build(StageArgs),
}

#[derive(Subcommand)]
enum RagCommand {
    /// Index every .txt/.md file in a directory.
    Build {
        dir: PathBuf,
        #[arg(long, default_value = "rag_index.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 1200)]
        size: usize,
        #[arg(long, default_value_t = 200)]
        overlap: usize,
        #[arg(long, default_value_t = 512)]
        dimension: usize,
    },
}

#[derive(Subcommand)]
enum TreeCommand {
    /// Print a saved tree.
    Show {
        artifact: PathBuf,
        /// Include each node's assertions.
        #[arg(long)]
        assertions: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckerArg {
    Builtin,
    External,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Specification text (plain text or Markdown).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Verilog file with the signal declarations.
    #[arg(long)]
    decls: Option<PathBuf>,
    /// Waveform description; repeatable.
    #[arg(long = "waveform")]
    waveforms: Vec<PathBuf>,
    #[arg(long)]
    design_summary: Option<PathBuf>,
    #[arg(long, default_value = "design")]
    design_name: String,
    /// Bank file to write or reuse.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Replay responses from this script instead of calling a service.
    #[arg(long)]
    backend_script: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Only this signal.
    #[arg(long)]
    signal: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rollouts: Option<u32>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    score_cap: Option<f64>,
    #[arg(long, value_enum)]
    checker: Option<CheckerArg>,
    /// External checker command with a {file} placeholder.
    #[arg(long)]
    checker_command: Option<String>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    no_early_stop: bool,
    #[arg(long)]
    rag_index: Option<PathBuf>,
    /// Rebuild the bank even if the file exists.
    #[arg(long)]
    rebuild_bank: bool,
}

fn base_config(args: &StageArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.bank {
        cfg.paths.bank = p.clone();
    }
    if let Some(p) = &args.backend_script {
        cfg.backend.kind = BackendKind::Scripted;
        cfg.backend.script = Some(p.clone());
    }
    if let Some(p) = &args.templates {
        cfg.paths.templates = Some(p.clone());
    }
    Ok(cfg)
}

fn stage1_inputs(args: &StageArgs) -> Stage1Inputs {
    Stage1Inputs {
        design_name: args.design_name.clone(),
        spec: args.spec.clone(),
        verilog_decls: args.decls.clone(),
        waveforms: args.waveforms.clone(),
        design_summary: args.design_summary.clone(),
    }
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.stage)?;
    if let Some(v) = args.rollouts {
        cfg.search.n_rollouts = v;
    }
    if let Some(v) = args.c {
        cfg.search.c = v;
    }
    if let Some(v) = args.epsilon {
        cfg.search.epsilon = v;
    }
    if let Some(v) = args.score_cap {
        cfg.search.score_cap = v;
    }
    match args.checker {
        Some(CheckerArg::Builtin) => cfg.checker.kind = CheckerKind::Builtin,
        Some(CheckerArg::External) => cfg.checker.kind = CheckerKind::External,
        None => {}
    }
    if let Some(cmd) = &args.checker_command {
        cfg.checker.external.command = cmd.clone();
    }
    if let Some(v) = args.parallel {
        cfg.parallel = v;
    }
    if args.no_early_stop {
        cfg.early_stop = false;
    }
    if let Some(p) = &args.rag_index {
        cfg.rag.index = Some(p.clone());
    }
    if let Some(p) = &args.out {
        cfg.paths.out = p.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bank_build(args: &StageArgs) -> Result<ExitCode> {
    let cfg = base_config(args)?;
    let backend = build_backend(&cfg)?;
    let templates = load_templates(&cfg)?;
    let s1 = run_stage1(&cfg, backend.as_ref(), &templates, &stage1_inputs(args))?;
    for w in &s1.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "bank: {} signal(s), {} waveform(s), {} call(s) -> {}",
        s1.bank.signals.len(),
        s1.bank.waveforms.len(),
        s1.ledger.total_calls,
        cfg.paths.bank.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn rag_build(dir: &Path, out: &Path, size: usize, overlap: usize, dimension: usize) -> Result<ExitCode> {
    if dimension == 0 {
        bail!("dimension must be positive");
    }
    let index = build_from_dir::<f64>(dir, ChunkParams { size, overlap }, &HashedBowEmbedder { dimension })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    index.save(out)?;
    println!("index: {} chunk(s) -> {}", index.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let cfg = run_config(args)?;
    let backend = build_backend(&cfg)?;
    let request = RunRequest {
        stage1: stage1_inputs(&args.stage),
        only_signal: args.signal.clone(),
        rebuild_bank: args.rebuild_bank,
    };
    let run = run_all(&cfg, &request, backend.as_ref())?;
    for r in &run.results {
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.signal);
        }
    }
    print!("{}", inspect::report_table(&run.report));
    if run.report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Bank { command: BankCommand::Build(args) } => bank_build(&args),
        Command::Rag { command: RagCommand::Build { dir, out, size, overlap, dimension } } => {
            rag_build(&dir, &out, size, overlap, dimension)
        }
        Command::Run(args) => run(&args),
        Command::Check { file, quiet } => {
            let text = std::fs::read_to_string(&file).with_context(|| file.display().to_string())?;
            let (report, errors) = inspect::check_text(&file.display().to_string(), &text);
            if !(quiet && errors == 0) {
                print!("{report}");
            }
            Ok(if errors > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Tree { command: TreeCommand::Show { artifact, assertions } } => {
            print!("{}", inspect::show_tree(&artifact, assertions)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
