//! Uniform-cost edit distance and the strings lying on minimum edit paths.

use std::collections::BTreeSet;

use crate::alphabet::{SymbolId, WordForm};

/// Upper bound on the size of [`min_edit_path_strings`]; larger sets keep
/// their lexicographically smallest members.
pub const MAX_PATH_STRINGS: usize = 10_000;

// Per-cell prefix sets are trimmed past this size so pathological pairs stay bounded.
const MAX_CELL_PREFIXES: usize = 4 * MAX_PATH_STRINGS;

/// Levenshtein distance with unit substitution, insertion and deletion costs.
pub fn levenshtein(a: &[SymbolId], b: &[SymbolId]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn prefix_table(a: &[SymbolId], b: &[SymbolId]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// Every string that appears on at least one minimum-cost edit path from
/// `src` to `dst`, both endpoints included, in lexicographic order.
///
/// A string is on a path when it results from applying any subset of the
/// edits of an optimal alignment. All optimal alignments are enumerated by
/// walking the DP lattice along edges that keep the total cost minimal.
pub fn min_edit_path_strings(src: &[SymbolId], dst: &[SymbolId]) -> Vec<WordForm> {
    let (n, m) = (src.len(), dst.len());
    let fwd = prefix_table(src, dst);
    let rev_src: Vec<SymbolId> = src.iter().rev().copied().collect();
    let rev_dst: Vec<SymbolId> = dst.iter().rev().copied().collect();
    let bwd_rev = prefix_table(&rev_src, &rev_dst);
    // distance from (i, j) to the end
    let bwd = |i: usize, j: usize| bwd_rev[n - i][m - j];
    let total = fwd[n][m];

    let on_path = |i: usize, j: usize| fwd[i][j] + bwd(i, j) == total;

    // prefixes[i][j]: partially edited prefixes for optimal paths reaching (i, j)
    let mut prefixes: Vec<Vec<BTreeSet<Vec<SymbolId>>>> =
        vec![vec![BTreeSet::new(); m + 1]; n + 1];
    prefixes[0][0].insert(Vec::new());

    for i in 0..=n {
        for j in 0..=m {
            if prefixes[i][j].is_empty() || !on_path(i, j) {
                continue;
            }
            let here = std::mem::take(&mut prefixes[i][j]);
            let base = fwd[i][j];
            let mut extend = |ti: usize, tj: usize, cost: usize, kept: &[SymbolId], edited: &[SymbolId]| {
                if base + cost + bwd(ti, tj) != total {
                    return;
                }
                let target = &mut prefixes[ti][tj];
                for p in &here {
                    let mut keep = p.clone();
                    keep.extend_from_slice(kept);
                    if cost > 0 {
                        let mut ed = p.clone();
                        ed.extend_from_slice(edited);
                        target.insert(ed);
                    }
                    target.insert(keep);
                }
                while target.len() > MAX_CELL_PREFIXES {
                    target.pop_last();
                }
            };
            if i < n && j < m {
                let cost = usize::from(src[i] != dst[j]);
                extend(i + 1, j + 1, cost, &src[i..i + 1], &dst[j..j + 1]);
            }
            if i < n {
                extend(i + 1, j, 1, &src[i..i + 1], &[]);
            }
            if j < m {
                extend(i, j + 1, 1, &[], &dst[j..j + 1]);
            }
            prefixes[i][j] = here;
        }
    }

    prefixes[n][m]
        .iter()
        .take(MAX_PATH_STRINGS)
        .map(|w| WordForm(w.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::PhonemeAlphabet;

    fn alpha() -> PhonemeAlphabet {
        PhonemeAlphabet::from_tokens("abceEnstIOpr".chars().map(String::from)).unwrap()
    }

    /// Plain exponential recursion, independent of the DP table.
    fn brute_distance(a: &[SymbolId], b: &[SymbolId]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = brute_distance(ra, rb) + usize::from(x != y);
                let del = brute_distance(ra, b) + 1;
                let ins = brute_distance(a, rb) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    #[test]
    fn trivial_distances() {
        let a = alpha();
        assert_eq!(levenshtein(&[], &[]), 0);
        let x = a.parse_compact("absEns").unwrap();
        let y = a.parse_compact("assEnte").unwrap();
        assert_eq!(levenshtein(&x, &y), 3);
        let p = a.parse_compact("prEssIO").unwrap();
        let q = a.parse_compact("prEssO").unwrap();
        // one deletion of `I`
        assert_eq!(levenshtein(&p, &q), 1);
        assert_eq!(brute_distance(&p, &q), 1);
    }

    #[test]
    fn zero_length_path() {
        let a = alpha();
        let w = a.parse_compact("abc").unwrap();
        assert_eq!(min_edit_path_strings(&w, &w), vec![w.clone()]);
    }

    #[test]
    fn figure_nodes_are_present() {
        let a = alpha();
        let src = a.parse_compact("absEns").unwrap();
        let dst = a.parse_compact("assEnte").unwrap();
        let set = min_edit_path_strings(&src, &dst);
        for node in [
            "absEns", "absEnt", "assEns", "absEne", "absEnse", "assEnt", "assEne", "absEnte",
            "assEnse", "assEnte",
        ] {
            let w = a.parse_compact(node).unwrap();
            assert!(set.contains(&w), "missing {node}");
        }
    }

    #[test]
    fn single_symbol_to_pair() {
        let a = alpha();
        let src = a.parse_compact("a").unwrap();
        let dst = a.parse_compact("bc").unwrap();
        let got: Vec<String> = min_edit_path_strings(&src, &dst)
            .iter()
            .map(|w| a.render_compact(w))
            .collect();
        // two optimal alignments: (a→b, +c) visits a, b, ac, bc and
        // (+b, a→c) visits a, ba, c, bc
        assert_eq!(got, vec!["a", "ac", "b", "ba", "bc", "c"]);
    }
}
