use crate::alphabet::SymbolId;

use super::ContextRadius;

/// The conditioning context `(x, i, y′)` of one edit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EditContext<'a> {
    pub x: &'a [SymbolId],
    pub i: usize,
    pub prefix: &'a [SymbolId],
}

impl<'a> EditContext<'a> {
    pub fn new(x: &'a [SymbolId], i: usize, prefix: &'a [SymbolId]) -> Self {
        assert!(i < x.len(), "input index {i} out of range for a word of length {}", x.len());
        EditContext { x, i, prefix }
    }

    /// Input symbols visible under `radius`. A finite radius yields exactly
    /// `2k + 1` tokens centred on `i`, with `boundary` past the word edges;
    /// an unbounded radius yields the whole word.
    pub fn input_window(&self, radius: ContextRadius, boundary: SymbolId) -> Vec<SymbolId> {
        match radius {
            ContextRadius::Unbounded => self.x.to_vec(),
            ContextRadius::Finite(k) => {
                let centre = self.i as isize;
                (centre - k as isize..=centre + k as isize)
                    .map(|p| {
                        if p < 0 || p as usize >= self.x.len() {
                            boundary
                        } else {
                            self.x[p as usize]
                        }
                    })
                    .collect()
            }
        }
    }

    /// Output history visible under `radius`: the last `k + 1` tokens of
    /// `<bos> + y′` (all of them when unbounded).
    pub fn prefix_window(&self, radius: ContextRadius, bos: SymbolId) -> Vec<SymbolId> {
        prefix_tokens(self.prefix, radius, bos)
    }
}

pub(crate) fn prefix_tokens(prefix: &[SymbolId], radius: ContextRadius, bos: SymbolId) -> Vec<SymbolId> {
    let mut tokens = Vec::with_capacity(prefix.len() + 1);
    tokens.push(bos);
    tokens.extend_from_slice(prefix);
    match radius {
        ContextRadius::Unbounded => tokens,
        ContextRadius::Finite(k) => {
            let keep = (k + 1).min(tokens.len());
            tokens.split_off(tokens.len() - keep)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_masks_outside() {
        let x = [1, 2, 3, 4, 5];
        let ctx = EditContext::new(&x, 1, &[7, 8, 9]);
        assert_eq!(ctx.input_window(ContextRadius::Finite(0), 99), vec![2]);
        assert_eq!(ctx.input_window(ContextRadius::Finite(2), 99), vec![99, 1, 2, 3, 4]);
        assert_eq!(ctx.input_window(ContextRadius::Unbounded, 99), x.to_vec());
        assert_eq!(ctx.prefix_window(ContextRadius::Finite(0), 50), vec![9]);
        assert_eq!(ctx.prefix_window(ContextRadius::Finite(1), 50), vec![8, 9]);
        assert_eq!(ctx.prefix_window(ContextRadius::Finite(5), 50), vec![50, 7, 8, 9]);
        let empty = EditContext::new(&x, 0, &[]);
        assert_eq!(empty.prefix_window(ContextRadius::Finite(0), 50), vec![50]);
    }

    #[test]
    #[should_panic]
    fn index_out_of_range() {
        EditContext::new(&[1, 2], 2, &[]);
    }
}
