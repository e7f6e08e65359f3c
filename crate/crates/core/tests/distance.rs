use std::collections::BTreeSet;

use proptest::prelude::*;
use protoform::alphabet::{PhonemeAlphabet, SymbolId};
use protoform::distance::{levenshtein, min_edit_path_strings};
use protoform::edit::{replay, Edit, EditSequence, Outcome};

/// Plain recursion over the three edit choices, no tabulation.
fn brute_distance(a: &[SymbolId], b: &[SymbolId]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((ca, ra)), Some((cb, rb))) => {
            let sub = brute_distance(ra, rb) + usize::from(ca != cb);
            sub.min(brute_distance(ra, b) + 1).min(brute_distance(a, rb) + 1)
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Keep(SymbolId),
    Sub(SymbolId, SymbolId),
    Del(SymbolId),
    Ins(SymbolId),
}

/// Every alignment of `a` to `b` whose cost equals `budget`.
fn alignments(a: &[SymbolId], b: &[SymbolId], budget: usize, acc: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
    if brute_distance(a, b) > budget {
        return;
    }
    if a.is_empty() && b.is_empty() {
        out.push(acc.clone());
        return;
    }
    if let (Some((&ca, ra)), Some((&cb, rb))) = (a.split_first(), b.split_first()) {
        let (step, cost) = if ca == cb { (Step::Keep(ca), 0) } else { (Step::Sub(ca, cb), 1) };
        if cost <= budget {
            acc.push(step);
            alignments(ra, rb, budget - cost, acc, out);
            acc.pop();
        }
    }
    if budget > 0 {
        if let Some((&ca, ra)) = a.split_first() {
            acc.push(Step::Del(ca));
            alignments(ra, b, budget - 1, acc, out);
            acc.pop();
        }
        if let Some((&cb, rb)) = b.split_first() {
            acc.push(Step::Ins(cb));
            alignments(a, rb, budget - 1, acc, out);
            acc.pop();
        }
    }
}

/// Strings reached by applying any subset of the edits of any optimal alignment.
fn brute_path_strings(src: &[SymbolId], dst: &[SymbolId]) -> BTreeSet<Vec<SymbolId>> {
    let mut all = Vec::new();
    alignments(src, dst, brute_distance(src, dst), &mut Vec::new(), &mut all);
    let mut out = BTreeSet::new();
    for steps in all {
        let edits: Vec<usize> = (0..steps.len()).filter(|&k| !matches!(steps[k], Step::Keep(_))).collect();
        for mask in 0u32..(1 << edits.len()) {
            let mut w = Vec::new();
            for (k, step) in steps.iter().enumerate() {
                let applied = edits.iter().position(|&e| e == k).is_some_and(|bit| mask & (1 << bit) != 0);
                match (*step, applied) {
                    (Step::Keep(c), _) | (Step::Sub(c, _), false) | (Step::Del(c), false) => w.push(c),
                    (Step::Sub(_, c), true) | (Step::Ins(c), true) => w.push(c),
                    (Step::Del(_), true) | (Step::Ins(_), false) => {}
                }
            }
            out.insert(w);
        }
    }
    out
}

fn word() -> impl Strategy<Value = Vec<SymbolId>> {
    prop::collection::vec(0u32..3, 0..=4)
}

fn alphabet() -> PhonemeAlphabet {
    PhonemeAlphabet::new("abcetnsEIOpr".chars().map(String::from)).unwrap()
}

#[test]
fn figure_distance() {
    let a = alphabet();
    let x = a.parse_compact("absEns").unwrap();
    let y = a.parse_compact("assEnte").unwrap();
    assert_eq!(levenshtein(&x, &y), 3);
    assert_eq!(brute_distance(&x, &y), 3);
}

#[test]
fn figure_nodes_are_on_paths() {
    let a = alphabet();
    let x = a.parse_compact("absEns").unwrap();
    let y = a.parse_compact("assEnte").unwrap();
    let set: BTreeSet<String> = min_edit_path_strings(&x, &y).iter().map(|w| a.render_compact(w)).collect();
    for node in [
        "absEns", "absEnt", "assEns", "absEne", "absEnse", "assEnt", "assEne", "absEnte", "assEnse", "assEnte",
    ] {
        assert!(set.contains(node), "missing {node}");
    }
}

#[test]
fn one_symbol_to_two() {
    let a = alphabet();
    let got: Vec<String> = min_edit_path_strings(&a.parse_compact("a").unwrap(), &a.parse_compact("bc").unwrap())
        .iter()
        .map(|w| a.render_compact(w))
        .collect();
    let oracle: Vec<String> = brute_path_strings(&a.parse_compact("a").unwrap(), &a.parse_compact("bc").unwrap())
        .iter()
        .map(|w| a.render_compact(w))
        .collect();
    assert_eq!(got, oracle);
    assert_eq!(got, vec!["a", "ac", "b", "ba", "bc", "c"]);
}

#[test]
fn replay_with_insertion_and_deletion() {
    // a = 0, b = 1, x = 2
    let seq = EditSequence {
        edits: vec![
            Edit::sub(0, 0, Outcome::Emit(0)),
            Edit::ins(0, 1, Outcome::Emit(2)),
            Edit::ins(0, 2, Outcome::Stop),
            Edit::sub(1, 2, Outcome::Stop),
        ],
        truncated: false,
    };
    assert_eq!(replay(&[0, 1], &seq).unwrap().0, vec![0, 2]);
}

#[test]
fn exhaustive_small_path_sets() {
    let words: Vec<Vec<SymbolId>> = {
        let mut all = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..3 {
            let mut next = Vec::new();
            for w in &frontier {
                for s in 0..3u32 {
                    let mut v: Vec<SymbolId> = w.clone();
                    v.push(s);
                    next.push(v);
                }
            }
            all.extend(next.iter().cloned());
            frontier = next;
        }
        all
    };
    for src in &words {
        for dst in &words {
            let got: BTreeSet<Vec<SymbolId>> = min_edit_path_strings(src, dst).into_iter().map(|w| w.0).collect();
            assert_eq!(got, brute_path_strings(src, dst), "{src:?} -> {dst:?}");
        }
    }
}

proptest! {
    #[test]
    fn distance_matches_recursion(a in word(), b in word()) {
        prop_assert_eq!(levenshtein(&a, &b), brute_distance(&a, &b));
    }

    #[test]
    fn distance_is_a_metric(a in word(), b in word(), c in word()) {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
    }

    #[test]
    fn path_strings_match_brute_force(src in word(), dst in word()) {
        let got = min_edit_path_strings(&src, &dst);
        let d = levenshtein(&src, &dst);
        for w in &got {
            prop_assert_eq!(levenshtein(&src, w) + levenshtein(w, &dst), d);
        }
        prop_assert!(got.windows(2).all(|p| p[0] < p[1]));
        let got: BTreeSet<Vec<SymbolId>> = got.into_iter().map(|w| w.0).collect();
        prop_assert_eq!(got, brute_path_strings(&src, &dst));
    }
}
