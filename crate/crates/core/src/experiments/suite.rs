use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::CorpusSet;
use super::regime::{Regime, Role};
use super::run::{run_regime, write_json, RunConfig, RunInputs};
use crate::error::{Error, Result};
use crate::ingest::{read_utf8, standard_corpora, write_file, SynthConfig};
use crate::metrics::{csv_field, fmt_fraction, EvalReport};

/// Corpus generation plus run configuration for all regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub synth: SynthConfig,
    pub twin_language: String,
    pub run: RunConfig,
    pub regimes: Vec<Regime>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            synth: SynthConfig::default(),
            twin_language: "zz".into(),
            run: RunConfig::default(),
            regimes: Regime::ALL.to_vec(),
        }
    }
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(&read_utf8(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.run.validate()?;
        if self.regimes.is_empty() {
            return Err(Error::invalid("suite config", "no regimes selected"));
        }
        let mut seen = self.regimes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.regimes.len() {
            return Err(Error::invalid("suite config", "a regime is listed twice"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub rows: Vec<(Regime, EvalReport)>,
    pub domains: Vec<String>,
    pub results_csv: PathBuf,
    pub per_domain_csv: PathBuf,
}

/// Marker present while a suite is running or after it failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// `regime,jga,sf1,<domain...>`, one row per regime.
pub fn results_csv(rows: &[(Regime, EvalReport)], domains: &[String]) -> String {
    let mut out = EvalReport::csv_header("regime", domains);
    out.push('\n');
    for (regime, report) in rows {
        out.push_str(&report.csv_row(regime.name(), domains));
        out.push('\n');
    }
    out
}

/// Long-format plot data for a grouped bar chart: one row per (regime, domain).
pub fn per_domain_csv(rows: &[(Regime, EvalReport)], domains: &[String]) -> String {
    let mut out = String::from("regime,domain,slot_f1\n");
    for (regime, report) in rows {
        for d in domains {
            let v = report.per_domain_f1.get(d).map(|v| fmt_fraction(*v)).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", csv_field(regime.name()), csv_field(d), v));
        }
    }
    out
}

/// Generates the four corpora, runs every configured regime in order and
/// writes `results.csv` and `per_domain.csv` under `out`.
pub fn run_suite(config: &SuiteConfig, out: &Path, mut progress: impl FnMut(Regime, &EvalReport)) -> Result<SuiteOutcome> {
    config.validate()?;
    let marker = out.join(INCOMPLETE_MARKER);
    write_file(&marker, "suite started\n")?;
    write_json(&out.join("suite.json"), config)?;

    let result = (|| {
        let std = standard_corpora(&config.synth, &config.twin_language)?;
        let mut corpora = CorpusSet::new();
        corpora.insert(Role::ASrc, std.a_src);
        corpora.insert(Role::ATgt, std.a_tgt);
        corpora.insert(Role::BSrc, std.b_src);
        corpora.insert(Role::BTgt, std.b_tgt);
        let paths = corpora.save_dir(&out.join("corpora"))?;
        write_json(&out.join("corpora").join("lexicon.json"), &std.lexicon)?;
        let inputs = RunInputs::new(corpora, paths);
        let domains: Vec<String> = inputs
            .corpora
            .get(Role::BTgt)?
            .ontology()
            .domain_names()
            .map(str::to_string)
            .collect();

        let mut rows = Vec::new();
        for &regime in &config.regimes {
            let dir = out.join(regime.slug());
            let outcome = run_regime(regime, &inputs, &config.run, Some(&dir)).map_err(|e| Error::Regime {
                regime: regime.name().to_string(),
                source: Box::new(e),
            })?;
            progress(regime, &outcome.report);
            rows.push((regime, outcome.report));
            write_file(&marker, format!("completed: {}\n", names(&rows)))?;
        }
        Ok((rows, domains))
    })();

    let (rows, domains) = match result {
        Ok(v) => v,
        Err(e) => {
            let prior = read_utf8(&marker).unwrap_or_default();
            write_file(&marker, format!("{prior}failed: {e}\n"))?;
            return Err(e);
        }
    };
    let results = out.join("results.csv");
    let per_domain = out.join("per_domain.csv");
    write_file(&results, results_csv(&rows, &domains))?;
    write_file(&per_domain, per_domain_csv(&rows, &domains))?;
    std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(SuiteOutcome {
        rows,
        domains,
        results_csv: results,
        per_domain_csv: per_domain,
    })
}

fn names(rows: &[(Regime, EvalReport)]) -> String {
    rows.iter().map(|(r, _)| r.name()).collect::<Vec<_>>().join(", ")
}
