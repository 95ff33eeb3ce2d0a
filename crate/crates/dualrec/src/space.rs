//! Enumerable sentence spaces.
//!
//! A [`SentenceSpace`] is the finite set of all non-empty symbol sequences of
//! length at most `max_len` over an ordered alphabet, enumerated length-major
//! and then lexicographically by symbol index. Every distribution, model, and
//! objective in this crate is defined over one or two of these spaces, so the
//! enumeration order is the canonical index used everywhere: tie-breaking in
//! decoders, rows of conditional tables, and corpus serialization all refer to
//! it.
//!
//! Spaces are immutable after construction and shared behind `Arc`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default bound on how many sentences [`SentenceSpace::enumerate`] will
/// materialize before refusing.
pub const DEFAULT_SPACE_CAP: usize = 100_000;

/// Index into a space's alphabet.
pub type SymbolId = u16;

/// A non-empty sequence of alphabet indices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence(Vec<SymbolId>);

impl Sentence {
    pub fn new(symbols: Vec<SymbolId>) -> Self {
        Sentence(symbols)
    }

    pub fn symbols(&self) -> &[SymbolId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sentence({:?})", self.0)
    }
}

/// All sentences of length `1..=max_len` over an alphabet, in a fixed order.
pub struct SentenceSpace {
    alphabet: Vec<String>,
    max_len: usize,
    sentences: Vec<Sentence>,
    index: HashMap<Sentence, usize>,
}

impl SentenceSpace {
    /// Enumerates the space with the default size cap.
    pub fn enumerate(alphabet: &[String], max_len: usize) -> Result<Arc<Self>> {
        Self::enumerate_with_cap(alphabet, max_len, DEFAULT_SPACE_CAP)
    }

    /// Enumerates the space, refusing if it would hold more than `cap`
    /// sentences. The error names the offending count so callers can see how
    /// far over budget the request was.
    pub fn enumerate_with_cap(alphabet: &[String], max_len: usize, cap: usize) -> Result<Arc<Self>> {
        if alphabet.is_empty() {
            return Err(Error::InvalidConfig("alphabet is empty".into()));
        }
        if max_len == 0 {
            return Err(Error::InvalidConfig("max_len must be at least 1".into()));
        }
        if alphabet.len() > SymbolId::MAX as usize {
            return Err(Error::AlphabetTooLarge {
                found: alphabet.len(),
                max: SymbolId::MAX as usize,
            });
        }
        for (i, sym) in alphabet.iter().enumerate() {
            if sym.is_empty() || sym.chars().any(char::is_whitespace) {
                return Err(Error::InvalidConfig(format!(
                    "symbol {i} ({sym:?}) is empty or contains whitespace"
                )));
            }
        }
        {
            let mut seen = alphabet.to_vec();
            seen.sort();
            seen.dedup();
            if seen.len() != alphabet.len() {
                return Err(Error::InvalidConfig("alphabet contains duplicate symbols".into()));
            }
        }

        let count = space_size(alphabet.len(), max_len);
        match count {
            Some(c) if c <= cap as u128 => {}
            Some(c) => return Err(Error::SpaceTooLarge { count: c, cap }),
            None => return Err(Error::SpaceTooLarge { count: u128::MAX, cap }),
        }

        let n = alphabet.len() as SymbolId;
        let mut sentences = Vec::with_capacity(count.unwrap() as usize);
        for len in 1..=max_len {
            // Odometer over symbol indices, least-significant position last,
            // which yields lexicographic order within each length.
            let mut digits = vec![0 as SymbolId; len];
            loop {
                sentences.push(Sentence(digits.clone()));
                let mut pos = len;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < n {
                        break;
                    }
                    digits[pos] = 0;
                }
                if digits.iter().all(|&d| d == 0) {
                    break;
                }
            }
        }

        let index = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        Ok(Arc::new(SentenceSpace {
            alphabet: alphabet.to_vec(),
            max_len,
            sentences,
            index,
        }))
    }

    pub fn size(&self) -> usize {
        self.sentences.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, idx: usize) -> &Sentence {
        &self.sentences[idx]
    }

    pub fn index_of(&self, sentence: &Sentence) -> Option<usize> {
        self.index.get(sentence).copied()
    }

    pub fn require_index(&self, sentence: &Sentence) -> Result<usize> {
        self.index_of(sentence)
            .ok_or_else(|| Error::NotInSpace(self.render_lossy(sentence)))
    }

    /// Two spaces are interchangeable when they were enumerated from the same
    /// alphabet and length bound; enumeration is deterministic, so comparing
    /// the inputs suffices.
    pub fn same_as(&self, other: &SentenceSpace) -> bool {
        std::ptr::eq(self, other) || (self.max_len == other.max_len && self.alphabet == other.alphabet)
    }

    /// Space-separated symbol text, the on-disk corpus format.
    pub fn render(&self, sentence: &Sentence) -> String {
        sentence
            .symbols()
            .iter()
            .map(|&s| self.alphabet[s as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn render_lossy(&self, sentence: &Sentence) -> String {
        sentence
            .symbols()
            .iter()
            .map(|&s| {
                self.alphabet
                    .get(s as usize)
                    .map(String::as_str)
                    .unwrap_or("<bad>")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse(&self, text: &str) -> Result<Sentence> {
        let mut symbols = Vec::new();
        for tok in text.split_whitespace() {
            let id = self
                .alphabet
                .iter()
                .position(|s| s == tok)
                .ok_or_else(|| Error::NotInSpace(format!("unknown symbol {tok:?} in {text:?}")))?;
            symbols.push(id as SymbolId);
        }
        let sentence = Sentence(symbols);
        if self.index_of(&sentence).is_none() {
            return Err(Error::NotInSpace(text.to_string()));
        }
        Ok(sentence)
    }
}

impl fmt::Debug for SentenceSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SentenceSpace")
            .field("alphabet", &self.alphabet)
            .field("max_len", &self.max_len)
            .field("size", &self.sentences.len())
            .finish()
    }
}

/// Σ_{L=1..max_len} |alphabet|^L, or None on overflow.
fn space_size(alphabet: usize, max_len: usize) -> Option<u128> {
    let a = alphabet as u128;
    let mut total: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..max_len {
        pow = pow.checked_mul(a)?;
        total = total.checked_add(pow)?;
    }
    Some(total)
}

/// Convenience for tests and examples: single-character symbols "a", "b", ...
pub fn letters(n: usize) -> Vec<String> {
    assert!(n <= 26, "letters() supports at most 26 symbols");
    (0..n)
        .map(|i| char::from(b'a' + i as u8).to_string())
        .collect()
}
