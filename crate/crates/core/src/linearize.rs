//! Dialogue context and dialogue state to flat token sequences, and the
//! tolerant inverse parse applied to model output.
//!
//! Context: `USR u1 SYS r1 USR u2 ... SYS r(t-1) USR ut`.
//! State:   `DOM d SLOT s VAL v` per non-empty triplet, in ontology order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{canonical_order, normalize_text, DialogueState, Ontology, SlotKey, StateTriplet, Turn};

/// Reserved symbols. The discriminant is the fixed vocabulary id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Pad = 0,
    Bos = 1,
    Eos = 2,
    Unk = 3,
    Usr = 4,
    Sys = 5,
    Dom = 6,
    Slot = 7,
    Val = 8,
    Mask = 9,
}

impl Marker {
    pub const ALL: [Marker; 10] = [
        Marker::Pad,
        Marker::Bos,
        Marker::Eos,
        Marker::Unk,
        Marker::Usr,
        Marker::Sys,
        Marker::Dom,
        Marker::Slot,
        Marker::Val,
        Marker::Mask,
    ];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Option<Marker> {
        Marker::ALL.get(id as usize).copied()
    }

    /// ASCII spelling used in vocabulary files.
    pub fn spelling(self) -> &'static str {
        match self {
            Marker::Pad => "<pad>",
            Marker::Bos => "<s>",
            Marker::Eos => "</s>",
            Marker::Unk => "<unk>",
            Marker::Usr => "<usr>",
            Marker::Sys => "<sys>",
            Marker::Dom => "<dom>",
            Marker::Slot => "<slot>",
            Marker::Val => "<val>",
            Marker::Mask => "<mask>",
        }
    }

    /// Spelling used by the debug renderer.
    pub fn display(self) -> &'static str {
        match self {
            Marker::Pad => "⟨pad⟩",
            Marker::Bos => "⟨s⟩",
            Marker::Eos => "⟨/s⟩",
            Marker::Unk => "⟨unk⟩",
            Marker::Usr => "⟨usr⟩",
            Marker::Sys => "⟨sys⟩",
            Marker::Dom => "⟨dom⟩",
            Marker::Slot => "⟨slot⟩",
            Marker::Val => "⟨val⟩",
            Marker::Mask => "⟨mask⟩",
        }
    }
}

pub fn is_marker_spelling(token: &str) -> bool {
    Marker::ALL
        .iter()
        .any(|m| m.spelling() == token || m.display() == token)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Marker(Marker),
    Word(String),
}

impl Token {
    pub fn word(w: &str) -> Token {
        Token::Word(w.to_string())
    }

    pub fn as_marker(&self) -> Option<Marker> {
        match self {
            Token::Marker(m) => Some(*m),
            Token::Word(_) => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Marker(m) => f.write_str(m.display()),
            Token::Word(w) => f.write_str(w),
        }
    }
}

/// Whitespace tokenization of normalized (NFC, lowercased) text.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize_text(text)
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn words(field: &str) -> impl Iterator<Item = Token> + '_ {
    field.split_whitespace().map(Token::word)
}

/// Model input for one turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSequence {
    tokens: Vec<Token>,
}

impl SourceSequence {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Model output for one turn. Sequences produced by [`linearize_state`]
/// are always well formed; decoded sequences need not be.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetSequence {
    pub tokens: Vec<Token>,
}

impl TargetSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Matches `(DOM w+ SLOT w+ VAL w+)*`.
    pub fn is_well_formed(&self) -> bool {
        let expected = [Marker::Dom, Marker::Slot, Marker::Val];
        let mut phase = 0usize;
        let mut field_len = 0usize;
        let mut started = false;
        for tok in &self.tokens {
            match tok {
                Token::Word(_) if started => field_len += 1,
                Token::Word(_) => return false,
                Token::Marker(m) => {
                    let want = if started { expected[(phase + 1) % 3] } else { Marker::Dom };
                    if *m != want || (started && field_len == 0) {
                        return false;
                    }
                    phase = if started { (phase + 1) % 3 } else { 0 };
                    started = true;
                    field_len = 0;
                }
            }
        }
        !started || (phase == 2 && field_len > 0)
    }
}

impl fmt::Display for TargetSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(&self.tokens, f)
    }
}

impl fmt::Display for SourceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(&self.tokens, f)
    }
}

fn render(tokens: &[Token], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{tok}")?;
    }
    Ok(())
}

/// Inverse of the debug rendering: splits on whitespace and maps marker
/// spellings (either form) back to markers.
pub fn parse_rendered(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(|w| {
            Marker::ALL
                .iter()
                .find(|m| m.display() == w || m.spelling() == w)
                .map(|m| Token::Marker(*m))
                .unwrap_or_else(|| Token::word(w))
        })
        .collect()
}

/// Flattens the dialogue prefix up to and including the current user
/// utterance. The last turn's system response is never included.
pub fn linearize_context(prefix: &[Turn]) -> Result<SourceSequence> {
    let Some((last, history)) = prefix.split_last() else {
        return Err(Error::invalid("dialogue prefix", "must contain at least one turn"));
    };
    let mut tokens = Vec::new();
    for turn in history {
        tokens.push(Token::Marker(Marker::Usr));
        tokens.extend(tokenize(&turn.user).into_iter().map(Token::Word));
        tokens.push(Token::Marker(Marker::Sys));
        if let Some(sys) = &turn.system {
            tokens.extend(tokenize(sys).into_iter().map(Token::Word));
        }
    }
    tokens.push(Token::Marker(Marker::Usr));
    tokens.extend(tokenize(&last.user).into_iter().map(Token::Word));
    Ok(SourceSequence { tokens })
}

pub fn linearize_state(state: &DialogueState, ontology: &Ontology) -> Result<TargetSequence> {
    let mut tokens = Vec::new();
    for t in canonical_order(state, ontology)? {
        tokens.push(Token::Marker(Marker::Dom));
        tokens.extend(words(t.domain()));
        tokens.push(Token::Marker(Marker::Slot));
        tokens.extend(words(t.slot()));
        tokens.push(Token::Marker(Marker::Val));
        tokens.extend(words(t.value()));
    }
    Ok(TargetSequence { tokens })
}

/// What [`parse_state`] had to discard or flag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    /// Malformed fragments, including stray words before the first `DOM`.
    pub dropped: usize,
    /// Well-formed fragments whose key was already taken by an earlier one.
    pub duplicates: usize,
    /// Keys that were kept but are not in the ontology.
    pub unknown: Vec<SlotKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedState {
    pub state: DialogueState,
    pub report: ParseReport,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Outside,
    Domain,
    Slot,
    Value,
}

#[derive(Default)]
struct Fragment {
    domain: Vec<String>,
    slot: Vec<String>,
    value: Vec<String>,
    malformed: bool,
}

/// Recovers a state from arbitrary tokens. Never fails: a fragment is kept
/// only when its domain, slot and value are all non-empty and it contains
/// no stray markers; the first occurrence of a key wins.
pub fn parse_state(tokens: &[Token], ontology: &Ontology) -> ParsedState {
    let mut out = ParsedState::default();
    let mut phase = Phase::Outside;
    let mut frag = Fragment::default();
    let mut stray = false;

    let finish = |phase: Phase, frag: &mut Fragment, stray: &mut bool, out: &mut ParsedState| {
        let frag = std::mem::take(frag);
        if phase == Phase::Outside {
            if std::mem::take(stray) {
                out.report.dropped += 1;
            }
            return;
        }
        if frag.malformed
            || phase != Phase::Value
            || frag.domain.is_empty()
            || frag.slot.is_empty()
            || frag.value.is_empty()
        {
            out.report.dropped += 1;
            return;
        }
        let triplet = match StateTriplet::new(
            &frag.domain.join(" "),
            &frag.slot.join(" "),
            &frag.value.join(" "),
        ) {
            Ok(t) => t,
            Err(_) => {
                out.report.dropped += 1;
                return;
            }
        };
        if out.state.get_key(&triplet.key()).is_some() {
            out.report.duplicates += 1;
            return;
        }
        if !ontology.contains_slot(triplet.domain(), triplet.slot()) {
            out.report.unknown.push(triplet.key());
        }
        out.state.insert(triplet);
    };

    for tok in tokens {
        match tok {
            Token::Marker(Marker::Dom) => {
                finish(phase, &mut frag, &mut stray, &mut out);
                phase = Phase::Domain;
            }
            Token::Marker(Marker::Slot) => match phase {
                Phase::Domain => phase = Phase::Slot,
                Phase::Outside => stray = true,
                _ => frag.malformed = true,
            },
            Token::Marker(Marker::Val) => match phase {
                Phase::Slot => phase = Phase::Value,
                Phase::Outside => stray = true,
                _ => frag.malformed = true,
            },
            Token::Marker(_) => match phase {
                Phase::Outside => stray = true,
                _ => frag.malformed = true,
            },
            Token::Word(w) => match phase {
                Phase::Outside => stray = true,
                Phase::Domain => frag.domain.push(w.clone()),
                Phase::Slot => frag.slot.push(w.clone()),
                Phase::Value => frag.value.push(w.clone()),
            },
        }
    }
    finish(phase, &mut frag, &mut stray, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DomainSchema, SlotSchema};

    fn ontology() -> Ontology {
        let slot = |n: &str| SlotSchema {
            name: n.into(),
            values: vec![],
        };
        Ontology::new(vec![
            DomainSchema {
                name: "Attraction".into(),
                slots: vec![slot("fee"), slot("name")],
            },
            DomainSchema {
                name: "Hotel".into(),
                slots: vec![slot("type"), slot("price range")],
            },
        ])
        .unwrap()
    }

    fn w(s: &str) -> Token {
        Token::word(s)
    }

    const DOM: Token = Token::Marker(Marker::Dom);
    const SLOT: Token = Token::Marker(Marker::Slot);
    const VAL: Token = Token::Marker(Marker::Val);
    const USR: Token = Token::Marker(Marker::Usr);
    const SYS: Token = Token::Marker(Marker::Sys);

    fn turn(user: &str, system: Option<&str>) -> Turn {
        Turn::new(user, system, DialogueState::new()).unwrap()
    }

    #[test]
    fn single_turn_context() {
        let seq = linearize_context(&[turn("hi", Some("hello"))]).unwrap();
        assert_eq!(seq.tokens(), &[USR, w("hi")]);
    }

    #[test]
    fn two_turn_context_has_two_usr_one_sys() {
        let seq = linearize_context(&[turn("I want a hotel", Some("which area")), turn("north", None)]).unwrap();
        let usr = seq.tokens().iter().filter(|t| **t == USR).count();
        let sys = seq.tokens().iter().filter(|t| **t == SYS).count();
        assert_eq!((usr, sys), (2, 1));
        assert_eq!(seq.tokens()[0], USR);
        assert_eq!(seq.tokens()[1], w("i"));
        assert_eq!(seq.tokens().last(), Some(&w("north")));
    }

    #[test]
    fn context_token_count() {
        let turns = [
            turn("a b c", Some("d e")),
            turn("f", Some("g h i j")),
            turn("k l", Some("ignored response")),
        ];
        let seq = linearize_context(&turns).unwrap();
        // 3 + 2 + 1 + 4 + 2 utterance tokens, 2t-1 = 5 markers.
        assert_eq!(seq.len(), 12 + 5);
    }

    #[test]
    fn empty_prefix_is_an_error() {
        assert!(linearize_context(&[]).is_err());
    }

    #[test]
    fn empty_state_linearizes_to_nothing() {
        let seq = linearize_state(&DialogueState::new(), &ontology()).unwrap();
        assert!(seq.is_empty());
        assert!(seq.is_well_formed());
    }

    #[test]
    fn hotel_type_luxury() {
        let state = DialogueState::from_triples(&[["Hotel", "type", "luxury"]]).unwrap();
        let seq = linearize_state(&state, &ontology()).unwrap();
        assert_eq!(seq.tokens, vec![DOM, w("Hotel"), SLOT, w("type"), VAL, w("luxury")]);
        assert!(seq.is_well_formed());
    }

    #[test]
    fn multi_word_fields_round_trip() {
        let state = DialogueState::from_triples(&[
            ["Hotel", "price range", "cheap"],
            ["Attraction", "fee", "20 yuan or less"],
        ])
        .unwrap();
        let seq = linearize_state(&state, &ontology()).unwrap();
        assert_eq!(seq.tokens[0], DOM);
        assert_eq!(seq.tokens[1], w("Attraction"));
        assert_eq!(parse_state(&seq.tokens, &ontology()).state, state);
    }

    #[test]
    fn parse_empty() {
        let parsed = parse_state(&[], &ontology());
        assert!(parsed.state.is_empty());
        assert_eq!(parsed.report, ParseReport::default());
    }

    #[test]
    fn parse_drops_fragment_with_empty_slot() {
        let tokens = [
            DOM,
            w("Hotel"),
            SLOT,
            VAL,
            w("luxury"),
            DOM,
            w("Attraction"),
            SLOT,
            w("fee"),
            VAL,
            w("20"),
            w("yuan"),
        ];
        let parsed = parse_state(&tokens, &ontology());
        let expected = DialogueState::from_triples(&[["Attraction", "fee", "20 yuan"]]).unwrap();
        assert_eq!(parsed.state, expected);
        assert_eq!(parsed.report.dropped, 1);
    }

    #[test]
    fn parse_keeps_first_duplicate() {
        let tokens = [
            DOM,
            w("Hotel"),
            SLOT,
            w("type"),
            VAL,
            w("luxury"),
            DOM,
            w("Hotel"),
            SLOT,
            w("type"),
            VAL,
            w("economy"),
        ];
        let parsed = parse_state(&tokens, &ontology());
        assert_eq!(parsed.state.get("Hotel", "type"), Some("luxury"));
        assert_eq!(parsed.report.duplicates, 1);
    }

    #[test]
    fn parse_flags_unknown_keys_but_keeps_them() {
        let tokens = [DOM, w("Taxi"), SLOT, w("to"), VAL, w("airport")];
        let parsed = parse_state(&tokens, &ontology());
        assert_eq!(parsed.state.get("Taxi", "to"), Some("airport"));
        assert_eq!(parsed.report.unknown.len(), 1);
    }

    #[test]
    fn parse_drops_out_of_order_and_stray_markers() {
        let tokens = [
            w("garbage"),
            DOM,
            w("Hotel"),
            VAL,
            w("x"),
            SLOT,
            w("type"),
            DOM,
            w("Hotel"),
            SLOT,
            w("type"),
            Token::Marker(Marker::Usr),
            VAL,
            w("y"),
            DOM,
            w("Hotel"),
            SLOT,
            w("type"),
        ];
        let parsed = parse_state(&tokens, &ontology());
        assert!(parsed.state.is_empty());
        assert_eq!(parsed.report.dropped, 4);
    }

    #[test]
    fn well_formedness() {
        let bad = TargetSequence {
            tokens: vec![DOM, w("Hotel"), SLOT, VAL, w("x")],
        };
        assert!(!bad.is_well_formed());
        let bad = TargetSequence {
            tokens: vec![w("x"), DOM, w("Hotel"), SLOT, w("type"), VAL, w("x")],
        };
        assert!(!bad.is_well_formed());
        let truncated = TargetSequence {
            tokens: vec![DOM, w("Hotel"), SLOT, w("type")],
        };
        assert!(!truncated.is_well_formed());
    }

    #[test]
    fn rendering_uses_angle_bracket_markers_and_parses_back() {
        let state = DialogueState::from_triples(&[["Hotel", "type", "luxury"]]).unwrap();
        let seq = linearize_state(&state, &ontology()).unwrap();
        let text = seq.to_string();
        assert_eq!(text, "⟨dom⟩ Hotel ⟨slot⟩ type ⟨val⟩ luxury");
        assert_eq!(parse_rendered(&text), seq.tokens);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parse_is_total_and_bounded(raw in proptest::collection::vec(0u8..8, 0..60)) {
                let tokens: Vec<Token> = raw
                    .iter()
                    .map(|b| match b {
                        0 => DOM,
                        1 => SLOT,
                        2 => VAL,
                        3 => Token::Marker(Marker::Eos),
                        4 => w("Hotel"),
                        5 => w("type"),
                        6 => w("<dom>"),
                        _ => w("luxury"),
                    })
                    .collect();
                let parsed = parse_state(&tokens, &ontology());
                let doms = tokens.iter().filter(|t| **t == DOM).count();
                prop_assert!(parsed.state.len() <= doms);
            }
        }
    }
}
