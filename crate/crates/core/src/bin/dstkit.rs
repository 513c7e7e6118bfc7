use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dstkit::experiments::{
    evaluate, predict, repair_predictions, rerun, run_regime, run_suite, CorpusSet, Predictions, Regime, Role,
    RunConfig, RunInputs, RunManifest, SuiteConfig,
};
use dstkit::fuzzy::MatchConfig;
use dstkit::ingest::{load_corpus, load_ontology, standard_corpora, SynthConfig};
use dstkit::linearize::{linearize_context, linearize_state};
use dstkit::metrics::EvalReport;
use dstkit::model::Checkpoint;
use dstkit::types::Split;
use dstkit::{Error, Result};

/// Generative dialogue state tracking experiments.
#[derive(Parser)]
#[command(name = "dstkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the four synthetic corpora (A-src, A-tgt, B-src, B-tgt).
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "corpora")]
        out: PathBuf,
        #[arg(long, default_value = "zz")]
        twin_language: String,
    },
    /// Train one regime on a directory of role corpora and evaluate it.
    Train {
        #[arg(long)]
        regime: Regime,
        #[arg(long)]
        corpora: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run configuration (model, train, pretrain, matching).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Decode a corpus split with a checkpoint; writes unrepaired predictions.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Snap predicted values to the closest ontology values.
    Repair {
        #[arg(long)]
        preds: PathBuf,
        /// Ontology file, or a corpus file whose ontology is used.
        #[arg(long)]
        ontology: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.6)]
        cutoff: f64,
    },
    /// Score predictions against a gold corpus.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all regimes and write results.csv and per_domain.csv.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a run from its manifest and compare against the stored report.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print linearized source and target sequences, one turn per line.
    Linearize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "train")]
        split: Split,
        #[arg(long)]
        dialogue: Option<String>,
    },
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(text.trim_start_matches('\u{feff}'))?)
}

fn print_report(report: &EvalReport) {
    println!("jga\t{:.6}", report.joint_goal_accuracy);
    println!("sf1\t{:.6}", report.slot_f1);
    for (d, f) in &report.per_domain_f1 {
        println!("sf1[{d}]\t{f:.6}");
    }
    println!("turns\t{}", report.n_turns);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            out,
            twin_language,
        } => {
            let cfg: SynthConfig = match config {
                Some(p) => load_json(&p)?,
                None => SynthConfig::default(),
            };
            let std = standard_corpora(&cfg, &twin_language)?;
            let mut set = CorpusSet::new();
            set.insert(Role::ASrc, std.a_src);
            set.insert(Role::ATgt, std.a_tgt);
            set.insert(Role::BSrc, std.b_src);
            set.insert(Role::BTgt, std.b_tgt);
            for (role, path) in set.save_dir(&out)? {
                println!("{role}\t{}", path.display());
            }
            let lex = out.join("lexicon.json");
            std::fs::write(&lex, serde_json::to_string_pretty(&std.lexicon)? + "\n").map_err(|e| Error::io(&lex, e))?;
        }
        Command::Train {
            regime,
            corpora,
            out,
            config,
        } => {
            let cfg: RunConfig = match config {
                Some(p) => load_json(&p)?,
                None => RunConfig::default(),
            };
            let (set, paths) = CorpusSet::load_dir(&corpora)?;
            let inputs = RunInputs::new(set, paths);
            let outcome = run_regime(regime, &inputs, &cfg, Some(&out))?;
            eprintln!(
                "{regime}: best epoch {} in {:.1}s",
                outcome.summary.best_epoch, outcome.summary.wall_seconds
            );
            print_report(&outcome.report);
        }
        Command::Predict {
            checkpoint,
            corpus,
            out,
            split,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let corpus = load_corpus(&corpus)?;
            let preds = predict(&ck, &corpus, split, Default::default())?;
            preds.save(&out)?;
            eprintln!("{} turns decoded", preds.turns.len());
        }
        Command::Repair {
            preds,
            ontology,
            out,
            cutoff,
        } => {
            let preds = Predictions::load(&preds)?;
            let onto = load_ontology(&ontology)?;
            let cfg = MatchConfig {
                cutoff,
                ..MatchConfig::default()
            };
            let repaired = repair_predictions(&preds, &onto, &cfg)?;
            match out {
                Some(p) => repaired.save(&p)?,
                None => println!("{}", serde_json::to_string_pretty(&repaired)?),
            }
        }
        Command::Eval { preds, gold, out } => {
            let preds = Predictions::load(&preds)?;
            let gold = load_corpus(&gold)?;
            let report = evaluate(&preds, &gold, Default::default())?;
            if let Some(p) = out {
                std::fs::write(&p, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&p, e))?;
            }
            print_report(&report);
        }
        Command::Suite { config, out } => {
            let cfg = match config {
                Some(p) => SuiteConfig::load(&p)?,
                None => SuiteConfig::default(),
            };
            let outcome = run_suite(&cfg, &out, |regime, r| {
                eprintln!("{regime}\tjga {:.4}\tsf1 {:.4}", r.joint_goal_accuracy, r.slot_f1);
            })?;
            println!("{}", outcome.results_csv.display());
            println!("{}", outcome.per_domain_csv.display());
        }
        Command::Rerun { manifest, out } => {
            let m = RunManifest::load(&manifest)?;
            let outcome = rerun(&m, out.as_deref())?;
            print_report(&outcome.report);
            if let Some(report_path) = m.outputs.as_ref().map(|o| o.report.clone()).filter(|p| p.exists()) {
                let stored: EvalReport = load_json(&report_path)?;
                if stored != outcome.report {
                    return Err(Error::invalid(
                        "rerun",
                        format!("report differs from {}", report_path.display()),
                    ));
                }
                eprintln!("matches {}", report_path.display());
            }
        }
        Command::Linearize {
            corpus,
            split,
            dialogue,
        } => {
            let corpus = load_corpus(&corpus)?;
            for d in corpus.split(split) {
                if dialogue.as_ref().is_some_and(|id| *id != d.id) {
                    continue;
                }
                for t in 0..d.turns.len() {
                    let src = linearize_context(&d.turns[..=t])?;
                    let tgt = linearize_state(&d.turns[t].state, corpus.ontology())?;
                    println!("{}#{t}\t{src}\t{tgt}", d.id);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
