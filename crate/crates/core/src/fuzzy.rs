//! Gestalt (Ratcliff/Obershelp) string similarity and closest-match repair
//! of predicted slot values against the ontology.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DialogueState, Ontology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Minimum similarity for a candidate to count as a match.
    pub cutoff: f64,
    pub max_candidates: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            cutoff: 0.6,
            max_candidates: 3,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cutoff) {
            return Err(Error::invalid("match config", format!("cutoff {} not in [0, 1]", self.cutoff)));
        }
        if self.max_candidates == 0 {
            return Err(Error::invalid("match config", "max_candidates must be at least 1"));
        }
        Ok(())
    }
}

/// Longest common block of `a[alo..ahi]` and `b[blo..bhi]` as `(i, j, len)`.
/// Among blocks of maximal length the one starting earliest in `a`, then in
/// `b`, wins.
fn longest_match(a: &[char], b: &[char], alo: usize, ahi: usize, blo: usize, bhi: usize, run: &mut Vec<usize>) -> (usize, usize, usize) {
    let width = bhi - blo;
    run.clear();
    run.resize(width + 1, 0);
    let (mut best_i, mut best_j, mut best) = (alo, blo, 0);
    for i in alo..ahi {
        // run[j + 1] holds the length of the common run ending at (i - 1, j);
        // iterate j downwards so it can be updated in place.
        for jj in (0..width).rev() {
            if a[i] == b[blo + jj] {
                let k = run[jj] + 1;
                run[jj + 1] = k;
                if k > best || (k == best && i + 1 - k == best_i && blo + jj + 1 - k < best_j) {
                    best = k;
                    best_i = i + 1 - k;
                    best_j = blo + jj + 1 - k;
                }
            } else {
                run[jj + 1] = 0;
            }
        }
    }
    (best_i, best_j, best)
}

/// Total size of the matching blocks found by recursive longest-match splitting.
pub fn matched_chars(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut run = Vec::new();
    let mut total = 0;
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, k) = longest_match(&a, &b, alo, ahi, blo, bhi, &mut run);
        if k == 0 {
            continue;
        }
        total += k;
        stack.push((alo, i, blo, j));
        stack.push((i + k, ahi, j + k, bhi));
    }
    total
}

/// `2M / (|a| + |b|)` over characters, with `similarity("", "") == 1`.
pub fn similarity(a: &str, b: &str) -> f64 {
    let len = a.chars().count() + b.chars().count();
    if len == 0 {
        return 1.0;
    }
    2.0 * matched_chars(a, b) as f64 / len as f64
}

/// Upper bound on [`similarity`] from the multiset intersection of characters.
fn quick_ratio(a: &str, b: &str) -> f64 {
    let len = a.chars().count() + b.chars().count();
    if len == 0 {
        return 1.0;
    }
    let mut avail = std::collections::HashMap::<char, isize>::new();
    for c in b.chars() {
        *avail.entry(c).or_default() += 1;
    }
    let mut common = 0usize;
    for c in a.chars() {
        let n = avail.entry(c).or_default();
        if *n > 0 {
            common += 1;
        }
        *n -= 1;
    }
    2.0 * common as f64 / len as f64
}

/// Candidates scoring at least `cutoff`, best first, ties in candidate order,
/// at most `max_candidates` of them.
pub fn get_close_matches<'a, S: AsRef<str>>(query: &str, candidates: &'a [S], config: &MatchConfig) -> Vec<&'a str> {
    ranked_matches(query, candidates, config)
        .into_iter()
        .map(|(c, _)| c)
        .collect()
}

/// Like [`get_close_matches`], with scores.
pub fn ranked_matches<'a, S: AsRef<str>>(query: &str, candidates: &'a [S], config: &MatchConfig) -> Vec<(&'a str, f64)> {
    let mut scored: Vec<(&str, f64)> = candidates
        .iter()
        .map(AsRef::as_ref)
        .filter(|c| quick_ratio(query, c) >= config.cutoff)
        .map(|c| (c, similarity(query, c)))
        .filter(|(_, s)| *s >= config.cutoff)
        .collect();
    // Stable sort keeps candidate order among equal scores.
    scored.sort_by(|x, y| y.1.total_cmp(&x.1));
    scored.truncate(config.max_candidates);
    scored
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairCounts {
    /// Value already in the ontology.
    pub kept: usize,
    /// Value replaced by its closest ontology value.
    pub replaced: usize,
    /// Triplet removed because its (domain, slot) is not in the ontology.
    pub dropped: usize,
    /// No candidate reached the cutoff; raw value kept.
    pub unmatched: usize,
}

impl std::ops::AddAssign for RepairCounts {
    fn add_assign(&mut self, o: Self) {
        self.kept += o.kept;
        self.replaced += o.replaced;
        self.dropped += o.dropped;
        self.unmatched += o.unmatched;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repaired {
    pub state: DialogueState,
    pub counts: RepairCounts,
}

/// Snaps out-of-ontology values to their closest known value. Keys are never
/// changed; unknown keys are dropped.
pub fn repair_state(state: &DialogueState, ontology: &Ontology, config: &MatchConfig) -> Repaired {
    let mut out = DialogueState::new();
    let mut counts = RepairCounts::default();
    for t in state.iter() {
        let Some(values) = ontology.values(t.domain(), t.slot()) else {
            counts.dropped += 1;
            continue;
        };
        if ontology.is_known_value(t.domain(), t.slot(), t.value()) {
            counts.kept += 1;
            out.insert(t.clone());
            continue;
        }
        match get_close_matches(t.value(), values, config).first() {
            Some(best) => {
                counts.replaced += 1;
                // Ontology values are already normalized, so this cannot fail.
                out.insert(t.with_value(best).expect("ontology value is a valid value"));
            }
            None => {
                counts.unmatched += 1;
                out.insert(t.clone());
            }
        }
    }
    Repaired { state: out, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DomainSchema, SlotSchema};

    fn hotel_ontology() -> Ontology {
        Ontology::new(vec![DomainSchema {
            name: "Hotel".into(),
            slots: vec![
                SlotSchema {
                    name: "type".into(),
                    values: vec!["luxury".into(), "economy".into()],
                },
                SlotSchema {
                    name: "name".into(),
                    values: vec![],
                },
            ],
        }])
        .unwrap()
    }

    #[test]
    fn identical_and_disjoint() {
        assert_eq!(similarity("luxury", "luxury"), 1.0);
        assert_eq!(similarity("abc", "xyz"), 0.0);
        assert_eq!(similarity("", ""), 1.0);
        assert_eq!(similarity("", "abc"), 0.0);
    }

    #[test]
    fn reference_fixtures() {
        assert_eq!(matched_chars("luxry", "luxury"), 5);
        assert_eq!(similarity("luxry", "luxury"), 10.0 / 11.0);
        assert_eq!(matched_chars("20 yuan", "20 yuan or less"), 7);
        assert_eq!(similarity("20 yuan", "20 yuan or less"), 14.0 / 22.0);
    }

    #[test]
    fn longest_match_prefers_earliest_block() {
        // "ab" occurs twice in b; the first occurrence is taken, leaving "c"
        // unmatched on the right flank.
        let a: Vec<char> = "abc".chars().collect();
        let b: Vec<char> = "xabyabc".chars().collect();
        let mut run = Vec::new();
        assert_eq!(longest_match(&a, &b, 0, 3, 0, 7, &mut run), (0, 4, 3));
        let a: Vec<char> = "ab".chars().collect();
        assert_eq!(longest_match(&a, &b, 0, 2, 0, 7, &mut run), (0, 1, 2));
    }

    #[test]
    fn counts_characters_not_bytes() {
        assert_eq!(similarity("北京", "北京"), 1.0);
        assert_eq!(similarity("北京饭店", "北京"), 2.0 * 2.0 / 6.0);
    }

    #[test]
    fn exact_hit_ranks_first() {
        let cands = ["economy", "luxury", "luxurious"];
        let got = ranked_matches("luxury", &cands, &MatchConfig::default());
        assert_eq!(got[0], ("luxury", 1.0));
    }

    #[test]
    fn nothing_above_cutoff() {
        let cands = ["luxury", "economy"];
        assert!(get_close_matches("zzz", &cands, &MatchConfig::default()).is_empty());
    }

    #[test]
    fn ties_keep_candidate_order_and_truncate() {
        let cands = ["abx", "aby", "abz", "abw"];
        let cfg = MatchConfig {
            cutoff: 0.5,
            max_candidates: 3,
        };
        assert_eq!(get_close_matches("ab", &cands, &cfg), ["abx", "aby", "abz"]);
    }

    #[test]
    fn config_validation() {
        assert!(MatchConfig { cutoff: 1.5, max_candidates: 3 }.validate().is_err());
        assert!(MatchConfig { cutoff: 0.5, max_candidates: 0 }.validate().is_err());
        assert!(MatchConfig::default().validate().is_ok());
    }

    #[test]
    fn repair_known_values_is_identity() {
        let state = DialogueState::from_triples(&[["Hotel", "type", "luxury"]]).unwrap();
        let r = repair_state(&state, &hotel_ontology(), &MatchConfig::default());
        assert_eq!(r.state, state);
        assert_eq!(r.counts.kept, 1);
    }

    #[test]
    fn repair_snaps_typo() {
        let state = DialogueState::from_triples(&[["Hotel", "type", "luxry"]]).unwrap();
        let r = repair_state(&state, &hotel_ontology(), &MatchConfig::default());
        assert_eq!(r.state.get("Hotel", "type"), Some("luxury"));
        assert_eq!(r.counts.replaced, 1);
    }

    #[test]
    fn repair_keeps_unmatched_raw_value() {
        let state = DialogueState::from_triples(&[["Hotel", "type", "zzz"], ["Hotel", "name", "grand"]]).unwrap();
        let r = repair_state(&state, &hotel_ontology(), &MatchConfig::default());
        assert_eq!(r.state, state);
        assert_eq!(r.counts.unmatched, 2);
    }

    #[test]
    fn repair_drops_unknown_keys() {
        let state = DialogueState::from_triples(&[["Taxi", "to", "airport"], ["Hotel", "type", "luxury"]]).unwrap();
        let r = repair_state(&state, &hotel_ontology(), &MatchConfig::default());
        assert_eq!(r.state.len(), 1);
        assert_eq!(r.counts.dropped, 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn similarity_bounds_and_reflexivity(a in "[a-d ]{0,20}", b in "[a-d ]{0,20}") {
                let s = similarity(&a, &b);
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert_eq!(similarity(&a, &a), 1.0);
                prop_assert!(s <= quick_ratio(&a, &b));
            }

            #[test]
            fn repair_never_adds_keys(vals in proptest::collection::vec("[a-z]{1,8}", 1..3)) {
                let mut state = DialogueState::new();
                for (i, v) in vals.iter().enumerate() {
                    let slot = if i == 0 { "type" } else { "name" };
                    state.insert(crate::types::StateTriplet::new("Hotel", slot, v).unwrap());
                }
                let r = repair_state(&state, &hotel_ontology(), &MatchConfig::default());
                prop_assert!(r.state.keys().all(|k| state.get_key(k).is_some()));
            }
        }
    }
}
