use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voiceforge::adapters::AdapterRegistry;
use voiceforge::config::{load_config, Methodology};
use voiceforge::pipeline::{Pipeline, RunOptions, RunSummary};
use voiceforge::quality::QualityReport;
use voiceforge::{Error, Result};

/// Build voice-cloned speech corpora in Common Voice or LJ layout.
#[derive(Parser)]
#[command(name = "voiceforge", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, short, global = true, default_value = "voiceforge.toml")]
    config: PathBuf,
    /// Continue from the synthesis journal instead of starting over.
    #[arg(long, global = true)]
    resume: bool,
    /// Worker threads; overrides `run.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Check configuration and adapters, print the plan, do nothing else.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch the source into the cache and report its duration.
    Acquire,
    /// Decode, clean and segment (or transcribe and slice) the source.
    Prep,
    /// Build the speaker prompt from the source.
    Prompt,
    /// Synthesize the sentence list with the speaker prompt.
    Synth,
    /// Write the voice-conversion trainer config into the output root.
    TrainConfig,
    /// Convert the input corpus with a trained voice model and package it.
    Convert,
    /// Package the dataset, reusing finished synthesis.
    Package,
    /// Re-validate a packaged dataset.
    Validate {
        /// Dataset root; defaults to `output.root`.
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Run every stage.
    Run,
}

fn print_report(report: &QualityReport) {
    for (k, v) in &report.metrics {
        println!("  {k}: {v}");
    }
    for (id, issues) in &report.per_clip {
        for i in issues {
            println!("  {id}: {:?} {}: {}", i.severity, i.code, i.message);
        }
    }
    for n in &report.notes {
        println!("  note: {n}");
    }
}

fn print_summary(s: &RunSummary) {
    println!(
        "wrote {} entries to {} ({} generated, {} resumed)",
        s.entries_written,
        s.output_root.display(),
        s.sentences_generated,
        s.sentences_resumed
    );
    print_report(&s.quality);
    for w in &s.warnings {
        println!("warning: {w}");
    }
    for f in &s.failures {
        eprintln!("failed: {f}");
    }
    if let Some(n) = &s.next_step {
        println!("next: {n}");
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli.config)?;
    let reg = AdapterRegistry::with_mocks();
    let mut opts = RunOptions {
        resume: cli.resume,
        workers: cli.workers,
        dry_run: cli.dry_run,
    };
    if matches!(cli.command, Command::Package) {
        opts.resume = true;
    }
    let p = Pipeline::new(&cfg, &reg, opts)?;
    if cli.dry_run {
        println!("configuration ok; plan:");
        for (k, step) in p.plan().iter().enumerate() {
            println!("  {}. {step}", k + 1);
        }
        return Ok(0);
    }
    match cli.command {
        Command::Acquire => {
            let h = p.acquire()?;
            println!("{}\t{}\t{:.3} s", h.path.display(), h.container_format, h.duration_s);
            Ok(0)
        }
        Command::Prep => {
            println!("{}", p.prep()?.display());
            Ok(0)
        }
        Command::Prompt => {
            require(&cfg.methodology, Methodology::BarkPrompt, "prompt")?;
            let prompt = p.build_prompt(&p.segments()?)?;
            println!("{}\t{}", prompt.id(), p.prompt_path().display());
            Ok(0)
        }
        Command::Synth => {
            require(&cfg.methodology, Methodology::BarkPrompt, "synth")?;
            let (prompt, _) = p.prompt()?;
            let outcome = p.synthesize(&prompt, &cfg.sentences()?)?;
            println!(
                "{} done ({} resumed), {} failed",
                outcome.records().count(),
                outcome.resumed,
                outcome.failures().count()
            );
            for (k, s, c) in outcome.failures() {
                eprintln!("failed: #{k} {s:?}: {c}");
            }
            Ok(if outcome.is_partial() { 3 } else { 0 })
        }
        Command::TrainConfig => {
            println!("{}", p.emit_training_config()?.display());
            Ok(0)
        }
        Command::Convert => {
            require(&cfg.methodology, Methodology::RvcConvert, "convert")?;
            let s = p.convert_and_package()?;
            print_summary(&s);
            Ok(s.exit_code())
        }
        Command::Package | Command::Run => {
            let s = p.run()?;
            print_summary(&s);
            Ok(s.exit_code())
        }
        Command::Validate { root } => {
            let (corpus, report) = p.validate_output(root.as_deref())?;
            println!("{} entries", corpus.len());
            print_report(&report);
            let bad = !report.failing_clips().is_empty() || !corpus.warnings.is_empty();
            Ok(if bad { 2 } else { 0 })
        }
    }
}

fn require(actual: &Methodology, wanted: Methodology, cmd: &str) -> Result<()> {
    if *actual == wanted {
        Ok(())
    } else {
        Err(Error::Config(format!("`{cmd}` needs methodology = {wanted:?}, config has {actual:?}")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
