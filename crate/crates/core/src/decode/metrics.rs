use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

/// Alignment error counts of one hypothesis against one reference (or a pool).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / ref_len`.
    pub fn rate(&self) -> Result<f64> {
        if self.ref_len == 0 {
            return Err(Error::InvalidArgument("error rate undefined for an empty reference".into()));
        }
        Ok(self.errors() as f64 / self.ref_len as f64)
    }

    /// The rate as a percentage.
    pub fn percent(&self) -> Result<f64> {
        Ok(100.0 * self.rate()?)
    }
}

impl Add for ErrorCounts {
    type Output = ErrorCounts;
    fn add(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            ref_len: self.ref_len + o.ref_len,
        }
    }
}

impl AddAssign for ErrorCounts {
    fn add_assign(&mut self, o: ErrorCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ErrorCounts {
    fn sum<I: Iterator<Item = ErrorCounts>>(iter: I) -> Self {
        iter.fold(ErrorCounts::default(), |a, b| a + b)
    }
}

/// Unit-cost Levenshtein alignment. When several alignments are optimal the
/// backtrace prefers a substitution, then an insertion, then a deletion.
pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> ErrorCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, cell) in d.iter_mut().take(w).enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let ins = d[i * w + j - 1] + 1;
            let del = d[(i - 1) * w + j] + 1;
            d[i * w + j] = sub.min(ins).min(del);
        }
    }
    let mut counts = ErrorCounts { ref_len: n, ..Default::default() };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let differs = reference[i - 1] != hyp[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(differs) == here {
                counts.substitutions += usize::from(differs);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i * w + j - 1] + 1 == here {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

/// Pooled `100 · Σ(S+D+I) / Σ ref_len` over `(hypothesis, reference)` pairs.
pub fn corpus_error_rate<T: PartialEq, S: AsRef<[T]>>(pairs: &[(S, S)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no utterances to score".into()));
    }
    let total: ErrorCounts = pairs.iter().map(|(h, r)| edit_distance(h.as_ref(), r.as_ref())).sum();
    if total.ref_len == 0 {
        return Err(Error::InvalidArgument("total reference length is zero".into()));
    }
    total.percent()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let c = edit_distance(&[1, 2, 3], &[1, 2, 3]);
        assert_eq!(c.errors(), 0);
        assert_eq!(c.ref_len, 3);
    }

    #[test]
    fn single_substitution() {
        let c = edit_distance(&["b", "a", "t"], &["k", "a", "t"]);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 0, 0));
        assert!((c.rate().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_deletions() {
        let c = edit_distance(&['a', 'c'], &['a', 'b', 'c', 'd']);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 2, 0));
    }

    #[test]
    fn tie_prefers_substitution() {
        // ref [a], hyp [b]: one substitution, or an insertion plus a deletion
        let c = edit_distance(&['b'], &['a']);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 0, 0));
        // ref [a, b], hyp [b, c]: two substitutions and del+ins both cost 2
        let c = edit_distance(&['b', 'c'], &['a', 'b']);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (2, 0, 0));
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let c = edit_distance::<u8>(&[], &[1, 2, 3]);
        assert_eq!((c.deletions, c.errors()), (3, 3));
        assert!(edit_distance::<u8>(&[], &[]).rate().is_err());
    }

    #[test]
    fn pooled_rates() {
        assert_eq!(corpus_error_rate(&[(vec![1, 2], vec![1, 2])]).unwrap(), 0.0);
        let one = corpus_error_rate(&[(vec![9, 2, 3], vec![1, 2, 3])]).unwrap();
        assert!((one - 100.0 / 3.0).abs() < 1e-12);
        let pairs = vec![(vec![1, 2, 3, 9], vec![1, 2, 3, 4]), (vec![1, 2, 3], vec![1, 2, 3, 4, 5, 6])];
        assert!((corpus_error_rate(&pairs).unwrap() - 40.0).abs() < 1e-12);
        assert!(corpus_error_rate::<u8, Vec<u8>>(&[]).is_err());
    }
}
