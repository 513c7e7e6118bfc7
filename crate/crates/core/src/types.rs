//! Dialogue data model: triplets, states, turns, dialogues, ontologies and corpora.
//!
//! All text that enters these types is normalized once, at construction:
//! identifiers (domain and slot names) are NFC-normalized with whitespace
//! collapsed and keep their case; values and utterances are additionally
//! lowercased. Every later comparison is an exact string comparison.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::linearize::is_marker_spelling;

/// NFC, whitespace collapsed to single spaces, case preserved.
pub fn normalize_ident(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// NFC, lowercased, whitespace collapsed to single spaces.
pub fn normalize_text(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn check_field(what: &'static str, text: &str) -> Result<()> {
    if text.is_empty() {
        return Err(Error::invalid(what, "must be non-empty"));
    }
    if let Some(tok) = text.split(' ').find(|t| is_marker_spelling(t)) {
        return Err(Error::invalid(
            what,
            format!("{text:?} contains the reserved marker {tok:?}"),
        ));
    }
    Ok(())
}

/// One tracked constraint: `(domain, slot, value)`. A slot with no value is
/// not represented at all.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateTriplet {
    domain: String,
    slot: String,
    value: String,
}

impl StateTriplet {
    pub fn new(domain: &str, slot: &str, value: &str) -> Result<Self> {
        let domain = normalize_ident(domain);
        let slot = normalize_ident(slot);
        let value = normalize_text(value);
        check_field("domain", &domain)?;
        check_field("slot", &slot)?;
        check_field("value", &value)?;
        Ok(StateTriplet {
            domain,
            slot,
            value,
        })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn slot(&self) -> &str {
        &self.slot
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn key(&self) -> SlotKey {
        SlotKey {
            domain: self.domain.clone(),
            slot: self.slot.clone(),
        }
    }

    pub fn with_value(&self, value: &str) -> Result<Self> {
        StateTriplet::new(&self.domain, &self.slot, value)
    }
}

impl fmt::Display for StateTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.domain, self.slot, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotKey {
    pub domain: String,
    pub slot: String,
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.domain, self.slot)
    }
}

/// The set of triplets tracked at one turn, at most one value per
/// `(domain, slot)`. Iteration is in key order, independent of insertion
/// order; use [`canonical_order`] for the ontology-defined order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialogueState {
    triplets: BTreeMap<SlotKey, StateTriplet>,
}

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triplet, returning the value it replaced.
    pub fn insert(&mut self, triplet: StateTriplet) -> Option<StateTriplet> {
        self.triplets.insert(triplet.key(), triplet)
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.triplets
            .get(&SlotKey {
                domain: domain.to_string(),
                slot: slot.to_string(),
            })
            .map(|t| t.value())
    }

    pub fn get_key(&self, key: &SlotKey) -> Option<&StateTriplet> {
        self.triplets.get(key)
    }

    pub fn remove(&mut self, key: &SlotKey) -> Option<StateTriplet> {
        self.triplets.remove(key)
    }

    pub fn contains(&self, triplet: &StateTriplet) -> bool {
        self.triplets.get(&triplet.key()) == Some(triplet)
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateTriplet> {
        self.triplets.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &SlotKey> {
        self.triplets.keys()
    }

    /// Only the triplets of one domain.
    pub fn restrict_to_domain(&self, domain: &str) -> DialogueState {
        self.iter().filter(|t| t.domain() == domain).cloned().collect()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        let mut seen = Vec::<&str>::new();
        for t in self.triplets.values() {
            if !seen.contains(&t.domain()) {
                seen.push(t.domain());
            }
        }
        seen.into_iter()
    }

    pub fn from_triples<S: AsRef<str>>(items: &[[S; 3]]) -> Result<Self> {
        let mut state = DialogueState::new();
        for [d, s, v] in items {
            state.insert(StateTriplet::new(d.as_ref(), s.as_ref(), v.as_ref())?);
        }
        Ok(state)
    }

    pub fn to_triples(&self) -> Vec<[String; 3]> {
        self.iter()
            .map(|t| [t.domain.clone(), t.slot.clone(), t.value.clone()])
            .collect()
    }
}

impl FromIterator<StateTriplet> for DialogueState {
    fn from_iter<I: IntoIterator<Item = StateTriplet>>(iter: I) -> Self {
        let mut state = DialogueState::new();
        for t in iter {
            state.insert(t);
        }
        state
    }
}

impl Serialize for DialogueState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_triples().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DialogueState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<[String; 3]>::deserialize(deserializer)?;
        DialogueState::from_triples(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub user: String,
    /// `None` on a turn whose system response is not part of the data.
    pub system: Option<String>,
    pub state: DialogueState,
}

impl Turn {
    pub fn new(user: &str, system: Option<&str>, state: DialogueState) -> Result<Self> {
        let user = normalize_text(user);
        if user.is_empty() {
            return Err(Error::invalid("turn", "user utterance is empty"));
        }
        let system = system.map(normalize_text).filter(|s| !s.is_empty());
        Ok(Turn {
            user,
            system,
            state,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSchema {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    pub slots: Vec<SlotSchema>,
}

/// Domains, slots and known values. Declaration order of domains and of
/// slots within a domain is the canonical triplet order.
#[derive(Debug, Clone)]
pub struct Ontology {
    domains: Vec<DomainSchema>,
    index: HashMap<SlotKey, (usize, usize)>,
    value_sets: HashMap<SlotKey, HashSet<String>>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.domains == other.domains
    }
}

impl Eq for Ontology {}

impl Ontology {
    pub fn new(domains: Vec<DomainSchema>) -> Result<Self> {
        let mut normalized = Vec::with_capacity(domains.len());
        let mut index = HashMap::new();
        let mut value_sets = HashMap::new();
        let mut domain_names = HashSet::new();
        for (di, domain) in domains.into_iter().enumerate() {
            let dname = normalize_ident(&domain.name);
            check_field("domain", &dname)?;
            if !domain_names.insert(dname.clone()) {
                return Err(Error::invalid("ontology", format!("duplicate domain {dname:?}")));
            }
            let mut slots = Vec::with_capacity(domain.slots.len());
            for (si, slot) in domain.slots.into_iter().enumerate() {
                let sname = normalize_ident(&slot.name);
                check_field("slot", &sname)?;
                let key = SlotKey {
                    domain: dname.clone(),
                    slot: sname.clone(),
                };
                if index.insert(key.clone(), (di, si)).is_some() {
                    return Err(Error::invalid("ontology", format!("duplicate slot {key}")));
                }
                let mut set = HashSet::new();
                let mut values = Vec::new();
                for v in slot.values {
                    let v = normalize_text(&v);
                    check_field("value", &v)?;
                    if set.insert(v.clone()) {
                        values.push(v);
                    }
                }
                value_sets.insert(key, set);
                slots.push(SlotSchema {
                    name: sname,
                    values,
                });
            }
            normalized.push(DomainSchema {
                name: dname,
                slots,
            });
        }
        Ok(Ontology {
            domains: normalized,
            index,
            value_sets,
        })
    }

    pub fn domains(&self) -> &[DomainSchema] {
        &self.domains
    }

    pub fn domain_names(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(|d| d.name.as_str())
    }

    /// `(domain index, slot index)` of a key, if the key exists.
    pub fn position(&self, domain: &str, slot: &str) -> Option<(usize, usize)> {
        self.index
            .get(&SlotKey {
                domain: domain.to_string(),
                slot: slot.to_string(),
            })
            .copied()
    }

    pub fn contains_slot(&self, domain: &str, slot: &str) -> bool {
        self.position(domain, slot).is_some()
    }

    /// Known values of a slot in declaration order.
    pub fn values(&self, domain: &str, slot: &str) -> Option<&[String]> {
        self.position(domain, slot)
            .map(|(di, si)| self.domains[di].slots[si].values.as_slice())
    }

    pub fn is_known_value(&self, domain: &str, slot: &str, value: &str) -> bool {
        self.value_sets
            .get(&SlotKey {
                domain: domain.to_string(),
                slot: slot.to_string(),
            })
            .is_some_and(|set| set.contains(value))
    }

    pub fn slot_keys(&self) -> impl Iterator<Item = SlotKey> + '_ {
        self.domains.iter().flat_map(|d| {
            d.slots.iter().map(move |s| SlotKey {
                domain: d.name.clone(),
                slot: s.name.clone(),
            })
        })
    }

    pub fn n_slots(&self) -> usize {
        self.index.len()
    }
}

/// JSON object whose key order is significant.
struct OrderedMap<V>(Vec<(String, V)>);

impl<V: Serialize> Serialize for OrderedMap<V> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for OrderedMap<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct OrderedVisitor<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for OrderedVisitor<V> {
            type Value = OrderedMap<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, V>()? {
                    entries.push((k, v));
                }
                Ok(OrderedMap(entries))
            }
        }

        deserializer.deserialize_map(OrderedVisitor(std::marker::PhantomData))
    }
}

impl Serialize for Ontology {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map = OrderedMap(
            self.domains
                .iter()
                .map(|d| {
                    let slots = OrderedMap(
                        d.slots
                            .iter()
                            .map(|s| (s.name.clone(), s.values.clone()))
                            .collect(),
                    );
                    (d.name.clone(), slots)
                })
                .collect(),
        );
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ontology {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = OrderedMap::<OrderedMap<Vec<String>>>::deserialize(deserializer)?;
        let domains = raw
            .0
            .into_iter()
            .map(|(name, slots)| DomainSchema {
                name,
                slots: slots
                    .0
                    .into_iter()
                    .map(|(name, values)| SlotSchema { name, values })
                    .collect(),
            })
            .collect();
        Ontology::new(domains).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid("split", format!("unknown split {other:?}"))),
        }
    }
}

/// A named, single-language corpus with its ontology and three disjoint splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    language: String,
    ontology: Ontology,
    train: Vec<Dialogue>,
    validation: Vec<Dialogue>,
    test: Vec<Dialogue>,
}

impl Corpus {
    pub fn new(
        name: &str,
        language: &str,
        ontology: Ontology,
        train: Vec<Dialogue>,
        validation: Vec<Dialogue>,
        test: Vec<Dialogue>,
    ) -> Result<Self> {
        let corpus = Corpus {
            name: name.to_string(),
            language: language.to_string(),
            ontology,
            train,
            validation,
            test,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for split in Split::ALL {
            for dialogue in self.split(split) {
                if !ids.insert(dialogue.id.as_str()) {
                    return Err(Error::invalid(
                        "corpus",
                        format!("dialogue id {:?} appears more than once", dialogue.id),
                    ));
                }
                if dialogue.turns.is_empty() {
                    return Err(Error::invalid(
                        "corpus",
                        format!("dialogue {:?} has no turns", dialogue.id),
                    ));
                }
                for (ti, turn) in dialogue.turns.iter().enumerate() {
                    if turn.user.is_empty() {
                        return Err(Error::invalid(
                            "corpus",
                            format!("dialogue {:?} turn {ti}: empty user utterance", dialogue.id),
                        ));
                    }
                    for t in turn.state.iter() {
                        if !self.ontology.contains_slot(t.domain(), t.slot()) {
                            return Err(Error::UnknownSlotInCorpus {
                                dialogue: dialogue.id.clone(),
                                turn: ti,
                                domain: t.domain().to_string(),
                                slot: t.slot().to_string(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn split(&self, split: Split) -> &[Dialogue] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn dialogues(&self) -> impl Iterator<Item = &Dialogue> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    pub fn n_turns(&self, split: Split) -> usize {
        self.split(split).iter().map(|d| d.turns.len()).sum()
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Orders a state's triplets by the ontology's domain, then slot, declaration order.
pub fn canonical_order(state: &DialogueState, ontology: &Ontology) -> Result<Vec<StateTriplet>> {
    let mut keyed = Vec::with_capacity(state.len());
    for t in state.iter() {
        let pos = ontology
            .position(t.domain(), t.slot())
            .ok_or_else(|| Error::UnknownSlot {
                domain: t.domain().to_string(),
                slot: t.slot().to_string(),
            })?;
        keyed.push((pos, t.clone()));
    }
    keyed.sort_by_key(|(pos, _)| *pos);
    Ok(keyed.into_iter().map(|(_, t)| t).collect())
}

/// Difference between two states, keyed by `(domain, slot)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateDiff {
    /// Keys only in `b`.
    pub added: Vec<StateTriplet>,
    /// Keys only in `a`, with their old values.
    pub removed: Vec<StateTriplet>,
    /// Keys in both with different values, carrying the new value.
    pub changed: Vec<StateTriplet>,
}

impl StateDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }

    pub fn apply(&self, state: &DialogueState) -> DialogueState {
        let mut out = state.clone();
        for t in &self.removed {
            out.remove(&t.key());
        }
        for t in self.added.iter().chain(&self.changed) {
            out.insert(t.clone());
        }
        out
    }
}

pub fn state_diff(a: &DialogueState, b: &DialogueState) -> StateDiff {
    let mut diff = StateDiff::default();
    for t in b.iter() {
        match a.get_key(&t.key()) {
            None => diff.added.push(t.clone()),
            Some(old) if old.value() != t.value() => diff.changed.push(t.clone()),
            Some(_) => {}
        }
    }
    for t in a.iter() {
        if b.get_key(&t.key()).is_none() {
            diff.removed.push(t.clone());
        }
    }
    diff
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(d: &str, s: &str, v: &str) -> StateTriplet {
        StateTriplet::new(d, s, v).unwrap()
    }

    fn ontology() -> Ontology {
        Ontology::new(vec![
            DomainSchema {
                name: "Attraction".into(),
                slots: vec![
                    SlotSchema {
                        name: "fee".into(),
                        values: vec!["20 yuan or less".into(), "free".into()],
                    },
                    SlotSchema {
                        name: "name".into(),
                        values: vec![],
                    },
                ],
            },
            DomainSchema {
                name: "Hotel".into(),
                slots: vec![
                    SlotSchema {
                        name: "type".into(),
                        values: vec!["luxury".into(), "economy".into()],
                    },
                    SlotSchema {
                        name: "area".into(),
                        values: vec![],
                    },
                    SlotSchema {
                        name: "stars".into(),
                        values: vec![],
                    },
                ],
            },
        ])
        .unwrap()
    }

    #[test]
    fn empty_value_is_rejected() {
        assert!(StateTriplet::new("Hotel", "type", "").is_err());
        assert!(StateTriplet::new("Hotel", "type", "   ").is_err());
        assert!(StateTriplet::new("", "type", "x").is_err());
    }

    #[test]
    fn marker_spellings_are_rejected_in_identifiers() {
        assert!(StateTriplet::new("Hotel <dom>", "type", "x").is_err());
        assert!(StateTriplet::new("Hotel", "⟨val⟩", "x").is_err());
    }

    #[test]
    fn identifiers_keep_case_values_are_lowercased() {
        let trip = t("Hotel", " price  range", "Luxury  Suite");
        assert_eq!(trip.domain(), "Hotel");
        assert_eq!(trip.slot(), "price range");
        assert_eq!(trip.value(), "luxury suite");
    }

    #[test]
    fn nfc_normalization_unifies_composed_forms() {
        let composed = t("Caf\u{e9}", "x", "y");
        let decomposed = t("Cafe\u{301}", "x", "y");
        assert_eq!(composed, decomposed);
    }

    #[test]
    fn insert_replaces_and_lookup_returns_latest() {
        let mut state = DialogueState::new();
        assert!(state.insert(t("Hotel", "type", "luxury")).is_none());
        assert_eq!(state.get("Hotel", "type"), Some("luxury"));
        let old = state.insert(t("Hotel", "type", "economy")).unwrap();
        assert_eq!(old.value(), "luxury");
        assert_eq!(state.get("Hotel", "type"), Some("economy"));
        assert_eq!(state.len(), 1);
    }

    #[test]
    fn canonical_order_of_empty_state() {
        assert!(canonical_order(&DialogueState::new(), &ontology()).unwrap().is_empty());
    }

    #[test]
    fn canonical_order_follows_ontology_not_insertion() {
        let state: DialogueState = [t("Hotel", "type", "luxury"), t("Attraction", "fee", "20 yuan or less")]
            .into_iter()
            .collect();
        let ordered = canonical_order(&state, &ontology()).unwrap();
        assert_eq!(ordered[0].domain(), "Attraction");
        assert_eq!(ordered[1].domain(), "Hotel");
    }

    #[test]
    fn canonical_order_is_ontology_order_not_lexicographic() {
        // "stars" < "type" lexicographically but "type" is declared first.
        let state: DialogueState = [t("Hotel", "stars", "4"), t("Hotel", "type", "luxury")]
            .into_iter()
            .collect();
        let ordered = canonical_order(&state, &ontology()).unwrap();
        assert_eq!(ordered[0].slot(), "type");
        assert_eq!(ordered[1].slot(), "stars");
    }

    #[test]
    fn canonical_order_rejects_unknown_key() {
        let state: DialogueState = [t("Taxi", "to", "airport")].into_iter().collect();
        let err = canonical_order(&state, &ontology()).unwrap_err();
        assert!(err.to_string().contains("unknown slot (Taxi, to)"), "{err}");
    }

    #[test]
    fn diff_of_equal_states_is_empty() {
        let a: DialogueState = [t("Hotel", "type", "luxury")].into_iter().collect();
        assert!(state_diff(&a, &a.clone()).is_empty());
    }

    #[test]
    fn diff_addition_from_empty() {
        let b: DialogueState = [t("Hotel", "type", "luxury")].into_iter().collect();
        let diff = state_diff(&DialogueState::new(), &b);
        assert_eq!(diff.added, vec![t("Hotel", "type", "luxury")]);
        assert!(diff.removed.is_empty() && diff.changed.is_empty());
    }

    #[test]
    fn diff_changed_value() {
        let a: DialogueState = [t("Hotel", "type", "luxury")].into_iter().collect();
        let b: DialogueState = [t("Hotel", "type", "economy")].into_iter().collect();
        let diff = state_diff(&a, &b);
        assert_eq!(diff.changed, vec![t("Hotel", "type", "economy")]);
        assert!(diff.added.is_empty() && diff.removed.is_empty());
        assert_eq!(diff.apply(&a), b);
    }

    #[test]
    fn ontology_rejects_duplicate_slots() {
        let dup = Ontology::new(vec![DomainSchema {
            name: "Hotel".into(),
            slots: vec![
                SlotSchema {
                    name: "type".into(),
                    values: vec![],
                },
                SlotSchema {
                    name: "type".into(),
                    values: vec![],
                },
            ],
        }]);
        assert!(dup.is_err());
    }

    #[test]
    fn ontology_json_preserves_declaration_order() {
        let json = r#"{"Zeta":{"b":["x"],"a":[]},"Alpha":{"q":["y","z"]}}"#;
        let onto: Ontology = serde_json::from_str(json).unwrap();
        let names: Vec<_> = onto.domain_names().collect();
        assert_eq!(names, ["Zeta", "Alpha"]);
        assert_eq!(serde_json::to_string(&onto).unwrap(), json);
    }
}
