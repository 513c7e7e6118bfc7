//! Joint goal accuracy and slot F1.
//!
//! Slot F1 is computed per turn over the triplet sets, `2TP / (2TP + FP + FN)`,
//! and averaged over turns. A turn where both prediction and gold are empty
//! scores 1.0.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::types::DialogueState;

fn check_lengths(pred: &[DialogueState], gold: &[DialogueState]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("metrics input", "at least one turn is required"));
    }
    Ok(())
}

/// Fraction of turns whose predicted state equals the gold state exactly.
pub fn joint_goal_accuracy(pred: &[DialogueState], gold: &[DialogueState]) -> Result<f64> {
    check_lengths(pred, gold)?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `(tp, fp, fn)` for one turn.
pub fn turn_counts(pred: &DialogueState, gold: &DialogueState) -> (usize, usize, usize) {
    let tp = pred.iter().filter(|t| gold.contains(t)).count();
    (tp, pred.len() - tp, gold.len() - tp)
}

pub fn turn_f1(pred: &DialogueState, gold: &DialogueState) -> f64 {
    let (tp, fp, fn_) = turn_counts(pred, gold);
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Mean per-turn F1.
pub fn slot_f1(pred: &[DialogueState], gold: &[DialogueState]) -> Result<f64> {
    check_lengths(pred, gold)?;
    let total: f64 = pred.iter().zip(gold).map(|(p, g)| turn_f1(p, g)).sum();
    Ok(total / pred.len() as f64)
}

/// Slot F1 restricted to each domain. Turns where the domain is absent from
/// both prediction and gold do not count towards that domain; domains with no
/// contributing turn are omitted.
pub fn per_domain_slot_f1(pred: &[DialogueState], gold: &[DialogueState]) -> Result<BTreeMap<String, f64>> {
    check_lengths(pred, gold)?;
    let domains: BTreeSet<&str> = pred.iter().chain(gold).flat_map(|s| s.iter().map(|t| t.domain())).collect();
    let mut out = BTreeMap::new();
    for domain in domains {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (p, g) in pred.iter().zip(gold) {
            let p = p.restrict_to_domain(domain);
            let g = g.restrict_to_domain(domain);
            if p.is_empty() && g.is_empty() {
                continue;
            }
            sum += turn_f1(&p, &g);
            n += 1;
        }
        if n > 0 {
            out.insert(domain.to_string(), sum / n as f64);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub joint_goal_accuracy: f64,
    pub slot_f1: f64,
    pub per_domain_f1: BTreeMap<String, f64>,
    pub n_turns: usize,
    pub parse_drop_count: usize,
}

impl EvalReport {
    pub fn compute(pred: &[DialogueState], gold: &[DialogueState], parse_drop_count: usize) -> Result<Self> {
        Self::compute_with(pred, gold, parse_drop_count, Parallelism::default())
    }

    /// Per-turn work is spread over workers; reductions run in turn order so
    /// the result does not depend on the schedule.
    pub fn compute_with(
        pred: &[DialogueState],
        gold: &[DialogueState],
        parse_drop_count: usize,
        par: Parallelism,
    ) -> Result<Self> {
        check_lengths(pred, gold)?;
        let pairs: Vec<(&DialogueState, &DialogueState)> = pred.iter().zip(gold).collect();
        let per_turn = exec::map(par, &pairs, |(p, g)| (p == g, turn_f1(p, g)));
        let n = pairs.len() as f64;
        let jga = per_turn.iter().filter(|(hit, _)| *hit).count() as f64 / n;
        let sf1 = per_turn.iter().map(|(_, f)| f).sum::<f64>() / n;
        Ok(EvalReport {
            joint_goal_accuracy: jga,
            slot_f1: sf1,
            per_domain_f1: per_domain_slot_f1(pred, gold)?,
            n_turns: pred.len(),
            parse_drop_count,
        })
    }

    /// `key,jga,sf1,<domains...>`.
    pub fn csv_header(key: &str, domains: &[String]) -> String {
        let mut cols = vec![csv_field(key), "jga".into(), "sf1".into()];
        cols.extend(domains.iter().map(|d| csv_field(d)));
        cols.join(",")
    }

    /// One CSV row. Domains missing from the report leave an empty cell.
    pub fn csv_row(&self, run_id: &str, domains: &[String]) -> String {
        let mut cols = vec![csv_field(run_id), fmt_fraction(self.joint_goal_accuracy), fmt_fraction(self.slot_f1)];
        for d in domains {
            cols.push(self.per_domain_f1.get(d).map(|v| fmt_fraction(*v)).unwrap_or_default());
        }
        cols.join(",")
    }
}

pub(crate) fn fmt_fraction(v: f64) -> String {
    format!("{v:.6}")
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
