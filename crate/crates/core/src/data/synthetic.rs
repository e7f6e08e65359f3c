//! Synthetic language families with known ancestors.
//!
//! Proto words come from a seeded phoneme bigram process; each daughter
//! applies an ordered cascade of [`SoundRule`]s.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CognateDataset, DataError, RawSet};

const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ə"];
const MIN_LEN: usize = 2;
const MAX_LEN: usize = 8;

/// Environment on one side of the rule target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Context {
    Any,
    /// The target is at the word edge on this side.
    Boundary,
    /// The adjacent segment belongs to the class.
    Class(Vec<String>),
    /// Some segment of the class occurs within `distance` positions.
    Within { distance: usize, class: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Substitute(String),
    Delete,
    InsertBefore(String),
    InsertAfter(String),
}

/// `target → action / left _ right`, applied at each matching site with
/// probability `probability`. Matching reads the input of the rule, so all
/// sites of one rule apply simultaneously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundRule {
    pub target: Vec<String>,
    pub left: Context,
    pub right: Context,
    pub action: Action,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub name: String,
    pub rules: Vec<SoundRule>,
}

impl Context {
    fn symbols(&self) -> &[String] {
        match self {
            Context::Any | Context::Boundary => &[],
            Context::Class(c) | Context::Within { class: c, .. } => c,
        }
    }

    /// `side` lists the segments on this side, nearest first.
    fn matches<'a>(&self, mut side: impl Iterator<Item = &'a String>) -> bool {
        match self {
            Context::Any => true,
            Context::Boundary => side.next().is_none(),
            Context::Class(c) => side.next().is_some_and(|s| c.contains(s)),
            Context::Within { distance, class } => side.take(*distance).any(|s| class.contains(s)),
        }
    }
}

impl SoundRule {
    fn action_symbol(&self) -> Option<&String> {
        match &self.action {
            Action::Substitute(s) | Action::InsertBefore(s) | Action::InsertAfter(s) => Some(s),
            Action::Delete => None,
        }
    }

    fn matches_at(&self, word: &[String], p: usize) -> bool {
        self.target.contains(&word[p])
            && self.left.matches(word[..p].iter().rev())
            && self.right.matches(word[p + 1..].iter())
    }

    pub fn apply<R: Rng + ?Sized>(&self, word: &[String], rng: &mut R) -> Vec<String> {
        let mut out = Vec::with_capacity(word.len() + 1);
        for (p, seg) in word.iter().enumerate() {
            let fire = self.matches_at(word, p) && (self.probability >= 1.0 || rng.gen::<f64>() < self.probability);
            if !fire {
                out.push(seg.clone());
                continue;
            }
            match &self.action {
                Action::Substitute(s) => out.push(s.clone()),
                Action::Delete => {}
                Action::InsertBefore(s) => {
                    out.push(s.clone());
                    out.push(seg.clone());
                }
                Action::InsertAfter(s) => {
                    out.push(seg.clone());
                    out.push(s.clone());
                }
            }
        }
        out
    }
}

fn validate(alphabet: &[String], branches: &[BranchSpec]) -> Result<(), DataError> {
    for branch in branches {
        let mut known: BTreeSet<&String> = alphabet.iter().collect();
        for (k, rule) in branch.rules.iter().enumerate() {
            if !(0.0..=1.0).contains(&rule.probability) {
                return Err(DataError::Config(format!(
                    "branch `{}` rule {}: probability {} outside [0, 1]",
                    branch.name,
                    k + 1,
                    rule.probability
                )));
            }
            let referenced = rule
                .target
                .iter()
                .chain(rule.left.symbols())
                .chain(rule.right.symbols());
            for s in referenced {
                if !known.contains(s) {
                    return Err(DataError::Config(format!(
                        "branch `{}` rule {} references unknown symbol `{s}`",
                        branch.name,
                        k + 1
                    )));
                }
            }
            if let Some(s) = rule.action_symbol() {
                if s.is_empty() || s.chars().any(char::is_whitespace) {
                    return Err(DataError::Config(format!("branch `{}` rule {}: bad output symbol", branch.name, k + 1)));
                }
                known.insert(s);
            }
        }
    }
    Ok(())
}

/// Seeded bigram weights favouring CV syllables.
fn bigram_weights(alphabet: &[String], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = alphabet.len();
    let is_vowel: Vec<bool> = alphabet.iter().map(|s| VOWELS.contains(&s.as_str())).collect();
    let nv = is_vowel.iter().filter(|&&v| v).count().max(1) as f64;
    let nc = is_vowel.iter().filter(|&&v| !v).count().max(1) as f64;
    // rows: symbols then <bos>; columns: symbols then <eos>
    (0..=n)
        .map(|prev| {
            let (to_v, to_c, to_eos) = match prev {
                p if p == n => (0.25, 0.75, 0.0),
                p if is_vowel[p] => (0.05, 0.70, 0.25),
                _ => (0.75, 0.10, 0.15),
            };
            let mut row: Vec<f64> = is_vowel
                .iter()
                .map(|&v| {
                    let base = if v { to_v / nv } else { to_c / nc };
                    base * rng.gen_range(0.5..1.5)
                })
                .collect();
            row.push(to_eos);
            row
        })
        .collect()
}

fn sample_lexicon(alphabet: &[String], size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<String>>, DataError> {
    let weights = bigram_weights(alphabet, rng);
    let dists: Vec<WeightedIndex<f64>> = weights
        .iter()
        .map(|row| WeightedIndex::new(row).map_err(|e| DataError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let n = alphabet.len();
    let mut seen = BTreeSet::new();
    let mut lexicon = Vec::with_capacity(size);
    let max_attempts = 1000 * size + 10_000;
    for _ in 0..max_attempts {
        if lexicon.len() == size {
            break;
        }
        let mut word = Vec::new();
        let mut prev = n;
        loop {
            let next = dists[prev].sample(rng);
            if next == n || word.len() > MAX_LEN {
                break;
            }
            word.push(next);
            prev = next;
        }
        if (MIN_LEN..=MAX_LEN).contains(&word.len()) && seen.insert(word.clone()) {
            lexicon.push(word.iter().map(|&s| alphabet[s].clone()).collect());
        }
    }
    if lexicon.len() < size {
        return Err(DataError::Config(format!(
            "could not sample {size} distinct proto words over {} symbols",
            alphabet.len()
        )));
    }
    Ok(lexicon)
}

/// Samples `size` distinct proto words and derives one cognate per branch.
/// The gold column is named `proto`.
pub fn generate_family(
    size: usize,
    alphabet: &[String],
    branches: &[BranchSpec],
    seed: u64,
) -> Result<CognateDataset, DataError> {
    if size == 0 {
        return Err(DataError::Config("lexicon size must be at least 1".into()));
    }
    if branches.is_empty() {
        return Err(DataError::Config("at least one branch is required".into()));
    }
    let distinct: BTreeSet<&String> = alphabet.iter().collect();
    if alphabet.is_empty() || distinct.len() != alphabet.len() {
        return Err(DataError::Config("proto alphabet must be non-empty and duplicate-free".into()));
    }
    validate(alphabet, branches)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lexicon = sample_lexicon(alphabet, size, &mut rng)?;
    let width = size.to_string().len();
    let rows: Vec<RawSet> = lexicon
        .into_iter()
        .enumerate()
        .map(|(k, proto)| {
            let forms = branches
                .iter()
                .map(|b| {
                    b.rules
                        .iter()
                        .fold(proto.clone(), |w, rule| rule.apply(&w, &mut rng))
                })
                .collect();
            (format!("w{:0width$}", k + 1), forms, Some(proto))
        })
        .collect();
    let names: Vec<String> = branches.iter().map(|b| b.name.clone()).collect();
    let unique: BTreeSet<&String> = names.iter().collect();
    if unique.len() != names.len() || names.iter().any(|n| n.is_empty() || n == "id" || n.ends_with('*')) {
        return Err(DataError::Config("branch names must be distinct, non-empty column names".into()));
    }
    CognateDataset::from_raw(names, Some("proto".into()), rows)
}

/// The benchmark proto inventory: five vowels and five consonants.
pub fn proto_alphabet() -> Vec<String> {
    ["a", "e", "i", "o", "u", "p", "t", "k", "s", "n"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn set(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn rule(target: &[&str], left: Context, right: Context, action: Action, probability: f64) -> SoundRule {
    SoundRule {
        target: set(target),
        left,
        right,
        action,
        probability,
    }
}

fn sub(s: &str) -> Action {
    Action::Substitute(s.to_string())
}

/// Four daughters with 5 to 8 rules each: lenitions, mergers, a shared
/// innovation (intervocalic `p` voicing in `west` and `south`) and
/// long-distance vowel harmony in `north`, `east` and `south`.
pub fn default_benchmark() -> Vec<BranchSpec> {
    use Context::{Any, Boundary, Class, Within};
    let v = || Class(set(&["a", "e", "i", "o", "u"]));
    vec![
        BranchSpec {
            name: "west".into(),
            rules: vec![
                rule(&["p"], v(), v(), sub("b"), 1.0),
                rule(&["t"], v(), v(), sub("d"), 1.0),
                rule(&["k"], v(), v(), sub("g"), 1.0),
                rule(&["s"], Boundary, Any, sub("h"), 1.0),
                rule(&["u"], Any, Boundary, sub("o"), 1.0),
            ],
        },
        BranchSpec {
            name: "north".into(),
            rules: vec![
                rule(&["a"], Any, Within { distance: 3, class: set(&["i"]) }, sub("e"), 1.0),
                rule(&["k"], Any, Class(set(&["i", "e"])), sub("c"), 1.0),
                rule(&["o"], Any, Any, sub("u"), 1.0),
                rule(&["s"], v(), v(), sub("z"), 1.0),
                rule(&["n"], Any, Boundary, Action::Delete, 1.0),
                rule(&["i"], Any, Class(set(&["a", "e", "u"])), sub("j"), 0.8),
            ],
        },
        BranchSpec {
            name: "east".into(),
            rules: vec![
                rule(&["t"], Any, Class(set(&["i"])), sub("s"), 1.0),
                rule(&["s"], Boundary, Any, Action::InsertBefore("e".into()), 1.0),
                rule(&["p"], Boundary, Any, sub("f"), 1.0),
                rule(&["a"], Any, Boundary, sub("ə"), 1.0),
                rule(&["k"], v(), v(), sub("x"), 1.0),
                rule(&["u"], Any, Class(set(&["n"])), sub("o"), 1.0),
                rule(&["e"], Within { distance: 3, class: set(&["i"]) }, Any, sub("i"), 1.0),
            ],
        },
        BranchSpec {
            name: "south".into(),
            rules: vec![
                rule(&["p"], v(), v(), sub("b"), 1.0),
                rule(&["e"], Any, Boundary, sub("i"), 1.0),
                rule(&["o"], Within { distance: 3, class: set(&["u"]) }, Any, sub("u"), 1.0),
                rule(&["n"], Any, Class(set(&["p"])), sub("m"), 1.0),
                rule(&["s"], Any, Boundary, Action::Delete, 1.0),
                rule(&["p", "t", "k", "n"], Any, Boundary, Action::InsertAfter("e".into()), 1.0),
                rule(&["a"], Any, Class(set(&["u"])), sub("o"), 1.0),
                rule(&["k"], Any, Class(set(&["i", "e"])), sub("ts"), 0.7),
            ],
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    #[test]
    fn rule_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = rule(&["p"], Context::Class(set(&["a"])), Context::Class(set(&["a"])), sub("b"), 1.0);
        assert_eq!(r.apply(&word("papa"), &mut rng), word("paba"));
        let h = rule(&["a"], Context::Any, Context::Within { distance: 3, class: set(&["i"]) }, sub("e"), 1.0);
        assert_eq!(h.apply(&word("katpi"), &mut rng), word("ketpi"));
        assert_eq!(h.apply(&word("kattpi"), &mut rng), word("kattpi"));
        let ins = rule(&["s"], Context::Boundary, Context::Any, Action::InsertBefore("e".into()), 1.0);
        assert_eq!(ins.apply(&word("sasa"), &mut rng), word("esasa"));
        let del = rule(&["n"], Context::Any, Context::Boundary, Action::Delete, 1.0);
        assert_eq!(del.apply(&word("nan"), &mut rng), word("na"));
    }

    #[test]
    fn unknown_symbol_rejected() {
        let bad = BranchSpec {
            name: "x".into(),
            rules: vec![rule(&["z"], Context::Any, Context::Any, Action::Delete, 1.0)],
        };
        assert!(matches!(
            generate_family(5, &proto_alphabet(), &[bad], 0),
            Err(DataError::Config(_))
        ));
    }

    #[test]
    fn default_benchmark_shape() {
        let b = default_benchmark();
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|br| (5..=8).contains(&br.rules.len())));
        let ds = generate_family(50, &proto_alphabet(), &b, 3).unwrap();
        assert_eq!(ds.sets.len(), 50);
        ds.validate().unwrap();
    }
}
