//! Tab-separated dataset format.
//!
//! ```text
//! id	la*	fr	it
//! 17	p r E s s I O	p K E s j O	p e s s i o n e
//! ```
//!
//! One cognate set per row, segments space-separated within a cell. A
//! trailing `*` in the header marks the gold-ancestor column. A cell holding
//! only [`EMPTY_WORD`] is the empty word.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::alphabet::{PhonemeAlphabet, WordForm};

use super::{CognateDataset, DataError, RawSet};

pub const EMPTY_WORD: &str = "∅";

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), DataError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn segments(cell: &str) -> Option<Vec<String>> {
    let cell = cell.trim();
    if cell == EMPTY_WORD {
        return Some(Vec::new());
    }
    let segs: Vec<String> = cell.split_whitespace().map(str::to_string).collect();
    (!segs.is_empty()).then_some(segs)
}

fn cell(alphabet: &PhonemeAlphabet, w: &WordForm) -> String {
    if w.is_empty() {
        EMPTY_WORD.to_string()
    } else {
        alphabet.render(w)
    }
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_dataset(text: &str) -> Result<CognateDataset, DataError> {
    let mut rows = lines(text);
    let (_, header) = rows.next().ok_or(DataError::Empty)?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    if columns.len() < 2 {
        return Err(DataError::Header("expected `id` followed by at least one language".into()));
    }
    let mut languages = Vec::new();
    let mut gold_column = None;
    for (k, name) in columns.iter().enumerate().skip(1) {
        if let Some(stripped) = name.strip_suffix('*') {
            if gold_column.is_some() {
                return Err(DataError::Header("more than one gold column".into()));
            }
            gold_column = Some((k, stripped.to_string()));
        } else if name.is_empty() {
            return Err(DataError::Header(format!("column {} has no name", k + 1)));
        } else {
            languages.push(name.to_string());
        }
    }
    if languages.is_empty() {
        return Err(DataError::Header("no language columns besides the gold column".into()));
    }
    let mut ids = BTreeSet::new();
    let mut raw: Vec<RawSet> = Vec::new();
    for (row, line) in rows {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(DataError::Ragged {
                row,
                expected: columns.len(),
                found: cells.len(),
            });
        }
        let id = cells[0].trim().to_string();
        if id.is_empty() {
            return Err(DataError::MissingForm {
                row,
                column: "id".into(),
            });
        }
        if !ids.insert(id.clone()) {
            return Err(DataError::DuplicateId { row, id });
        }
        let mut forms = Vec::with_capacity(languages.len());
        let mut gold = None;
        for (k, c) in cells.iter().enumerate().skip(1) {
            let segs = segments(c).ok_or_else(|| DataError::MissingForm {
                row,
                column: columns[k].to_string(),
            })?;
            if segs.len() > 1 && segs.iter().any(|s| s == EMPTY_WORD) {
                return Err(DataError::Header(format!(
                    "row {row}: `{EMPTY_WORD}` must stand alone in a cell"
                )));
            }
            if gold_column.as_ref().is_some_and(|(g, _)| *g == k) {
                gold = Some(segs);
            } else {
                forms.push(segs);
            }
        }
        raw.push((id, forms, gold));
    }
    if raw.is_empty() {
        return Err(DataError::Empty);
    }
    CognateDataset::from_raw(languages, gold_column.map(|(_, name)| name), raw)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<CognateDataset, DataError> {
    parse_dataset(&read(path.as_ref())?)
}

/// Renders `ds` in the TSV format; the gold column (if any) comes first.
pub fn write_dataset(ds: &CognateDataset) -> String {
    let gold = ds.gold_language.as_ref().filter(|_| ds.has_gold());
    let mut out = String::from("id");
    if let Some(g) = gold {
        out.push_str(&format!("\t{g}*"));
    }
    for lang in &ds.languages {
        out.push('\t');
        out.push_str(lang);
    }
    out.push('\n');
    for set in &ds.sets {
        out.push_str(&set.id);
        if gold.is_some() {
            out.push('\t');
            out.push_str(&cell(&ds.alphabet, set.gold.as_ref().expect("has_gold checked")));
        }
        for w in &set.forms {
            out.push('\t');
            out.push_str(&cell(&ds.alphabet, w));
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &CognateDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write(path.as_ref(), &write_dataset(ds))
}

/// Proto-corpus text: one space-tokenized word per line.
pub fn parse_corpus(text: &str) -> Vec<Vec<String>> {
    lines(text).filter_map(|(_, l)| segments(l)).collect()
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>, DataError> {
    let words = parse_corpus(&read(path.as_ref())?);
    if words.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(words)
}

/// Two-column `id<TAB>reconstruction` table.
pub fn write_reconstructions(alphabet: &PhonemeAlphabet, recon: &[(String, WordForm)]) -> String {
    let mut out = String::from("id\treconstruction\n");
    for (id, w) in recon {
        out.push_str(&format!("{id}\t{}\n", cell(alphabet, w)));
    }
    out
}

pub fn save_reconstructions(
    alphabet: &PhonemeAlphabet,
    recon: &[(String, WordForm)],
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    write(path.as_ref(), &write_reconstructions(alphabet, recon))
}

pub fn parse_reconstructions(alphabet: &PhonemeAlphabet, text: &str) -> Result<Vec<(String, WordForm)>, DataError> {
    let mut rows = lines(text);
    let (_, header) = rows.next().ok_or(DataError::Empty)?;
    if header.split('\t').count() != 2 {
        return Err(DataError::Header("expected `id<TAB>reconstruction`".into()));
    }
    let mut ids = BTreeSet::new();
    let mut out = Vec::new();
    for (row, line) in rows {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 2 {
            return Err(DataError::Ragged {
                row,
                expected: 2,
                found: cells.len(),
            });
        }
        let id = cells[0].trim().to_string();
        if !ids.insert(id.clone()) {
            return Err(DataError::DuplicateId { row, id });
        }
        let segs = segments(cells[1]).ok_or_else(|| DataError::MissingForm {
            row,
            column: "reconstruction".into(),
        })?;
        let word = segs
            .iter()
            .map(|s| {
                alphabet.id(s).ok_or_else(|| DataError::Symbol {
                    row,
                    source: crate::alphabet::AlphabetError::Unknown(s.clone()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push((id, WordForm(word)));
    }
    Ok(out)
}

pub fn load_reconstructions(
    alphabet: &PhonemeAlphabet,
    path: impl AsRef<Path>,
) -> Result<Vec<(String, WordForm)>, DataError> {
    parse_reconstructions(alphabet, &read(path.as_ref())?)
}
