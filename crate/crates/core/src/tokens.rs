//! Token ids, target sequences and the symbol vocabulary.
//!
//! Ids 0, 1 and 2 are reserved for the CTC blank, start-of-sequence and
//! end-of-sequence markers; text symbols start at [`FIRST_SYMBOL`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const BLANK: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const FIRST_SYMBOL: usize = 3;

/// Target label sequence; never contains the blank id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TokenSequence(Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if ids.contains(&BLANK) {
            return Err(Error::InvalidArgument("target sequence contains the blank id".into()));
        }
        Ok(TokenSequence(ids))
    }

    pub fn empty() -> Self {
        TokenSequence(Vec::new())
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_ids(self) -> Vec<usize> {
        self.0
    }

    /// `[sos, y₁, …, y_U]`, the decoder input.
    pub fn with_sos(&self) -> Vec<usize> {
        std::iter::once(SOS).chain(self.0.iter().copied()).collect()
    }

    /// `[y₁, …, y_U, eos]`, the decoder target.
    pub fn with_eos(&self) -> Vec<usize> {
        self.0.iter().copied().chain(std::iter::once(EOS)).collect()
    }
}

impl TryFrom<Vec<usize>> for TokenSequence {
    type Error = Error;
    fn try_from(ids: Vec<usize>) -> Result<Self> {
        TokenSequence::new(ids)
    }
}

/// How transcripts are split into symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// One symbol per non-whitespace character.
    Char,
    /// Whitespace-separated symbols, scored as phone error rate.
    Phone,
    /// Whitespace-separated symbols, scored as word error rate.
    Word,
}

impl Unit {
    pub fn split(self, text: &str) -> Vec<&str> {
        match self {
            Unit::Char => text
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
            Unit::Phone | Unit::Word => text.split_whitespace().collect(),
        }
    }

    pub fn join(self, symbols: &[&str]) -> String {
        match self {
            Unit::Char => symbols.concat(),
            Unit::Phone | Unit::Word => symbols.join(" "),
        }
    }

    /// Label of the pooled error rate for this unit.
    pub fn metric_name(self) -> &'static str {
        match self {
            Unit::Word => "WER",
            Unit::Char | Unit::Phone => "PER",
        }
    }
}

impl FromStr for Unit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(Unit::Char),
            "phone" => Ok(Unit::Phone),
            "word" => Ok(Unit::Word),
            other => Err(Error::Config(format!("unknown unit `{other}` (char|phone|word)"))),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Char => "char",
            Unit::Phone => "phone",
            Unit::Word => "word",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
    unit: Unit,
}

impl Vocab {
    pub fn new(symbols: Vec<String>, unit: Unit) -> Result<Self> {
        let mut sorted = symbols.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != symbols.len() {
            return Err(Error::InvalidArgument("vocabulary has duplicate symbols".into()));
        }
        if symbols.iter().any(|s| s.is_empty() || s.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidArgument("vocabulary symbols must be non-empty and whitespace-free".into()));
        }
        Ok(Vocab { symbols, unit })
    }

    /// Sorted symbol inventory of a transcript collection.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, unit: Unit) -> Result<Self> {
        let mut symbols: Vec<String> = texts.into_iter().flat_map(|t| unit.split(t)).map(str::to_owned).collect();
        symbols.sort();
        symbols.dedup();
        Vocab::new(symbols, unit)
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Output dimension: symbols plus the three reserved ids.
    pub fn size(&self) -> usize {
        self.symbols.len() + FIRST_SYMBOL
    }

    pub fn encode(&self, text: &str) -> Result<TokenSequence> {
        let ids = self
            .unit
            .split(text)
            .into_iter()
            .map(|s| {
                self.symbols
                    .iter()
                    .position(|x| x == s)
                    .map(|p| p + FIRST_SYMBOL)
                    .ok_or_else(|| Error::VocabMismatch(format!("symbol `{s}` not in vocabulary")))
            })
            .collect::<Result<Vec<_>>>()?;
        TokenSequence::new(ids)
    }

    pub fn symbol(&self, id: usize) -> &str {
        match id {
            BLANK => "<blank>",
            SOS => "<sos>",
            EOS => "<eos>",
            _ => self.symbols.get(id - FIRST_SYMBOL).map_or("<unk>", String::as_str),
        }
    }

    pub fn decode(&self, tokens: &TokenSequence) -> String {
        let syms: Vec<&str> = tokens.ids().iter().map(|&i| self.symbol(i)).collect();
        self.unit.join(&syms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_is_rejected() {
        assert!(TokenSequence::new(vec![3, 0]).is_err());
        assert_eq!(TokenSequence::new(vec![3, 4]).unwrap().with_sos(), vec![SOS, 3, 4]);
        assert_eq!(TokenSequence::new(vec![3, 4]).unwrap().with_eos(), vec![3, 4, EOS]);
    }

    #[test]
    fn char_and_phone_vocabularies() {
        let v = Vocab::from_texts(["cab", "bad"], Unit::Char).unwrap();
        assert_eq!(v.symbols(), ["a", "b", "c", "d"]);
        assert_eq!(v.size(), 7);
        let t = v.encode("dab").unwrap();
        assert_eq!(t.ids(), [6, 3, 4]);
        assert_eq!(v.decode(&t), "dab");
        assert!(matches!(v.encode("x"), Err(Error::VocabMismatch(_))));

        let p = Vocab::from_texts(["sil aa k", "k iy"], Unit::Phone).unwrap();
        assert_eq!(p.symbols(), ["aa", "iy", "k", "sil"]);
        assert_eq!(p.decode(&p.encode("k aa").unwrap()), "k aa");
    }
}
