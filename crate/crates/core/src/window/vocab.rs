//! Greedy longest-match subword vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::WindowError;

pub const DEFAULT_UNK: &str = "[UNK]";
const UNK_DIRECTIVE: &str = "#unk=";

/// Subword pieces. Continuation pieces carry a `##` prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    entries: HashSet<String>,
    unk: String,
    max_piece_chars: usize,
}

impl SubwordVocab {
    /// Builds a vocabulary; `unk` is added to the entries if missing.
    pub fn new<I, S>(entries: I, unk: impl Into<String>) -> Result<Self, WindowError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let unk = unk.into();
        if unk.is_empty() {
            return Err(WindowError::MalformedVocab("empty unk symbol".into()));
        }
        let mut entries: HashSet<String> = entries.into_iter().map(Into::into).filter(|e| !e.is_empty()).collect();
        entries.insert(unk.clone());
        let max_piece_chars = entries
            .iter()
            .map(|e| e.strip_prefix("##").unwrap_or(e).chars().count())
            .max()
            .unwrap_or(1);
        Ok(Self {
            entries,
            unk,
            max_piece_chars,
        })
    }

    /// Reads the vocabulary file format: one piece per line, with an optional
    /// first line `#unk=<symbol>` (default `[UNK]`).
    pub fn parse(text: &str) -> Result<Self, WindowError> {
        let mut lines = text.lines().map(str::trim_end).peekable();
        let mut unk = DEFAULT_UNK.to_string();
        if let Some(first) = lines.peek() {
            if let Some(sym) = first.strip_prefix(UNK_DIRECTIVE) {
                unk = sym.to_string();
                lines.next();
            }
        }
        let entries: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
        if entries.is_empty() {
            return Err(WindowError::MalformedVocab("no entries".into()));
        }
        Self::new(entries, unk)
    }

    /// Serialises in the format read by [`SubwordVocab::parse`], sorted.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("{UNK_DIRECTIVE}{}\n", self.unk);
        for e in self.entries.iter().collect::<BTreeSet<_>>() {
            out.push_str(e);
            out.push('\n');
        }
        out
    }

    /// Frequency-cutoff vocabulary for a word list: every word seen at least
    /// `min_count` times is a whole piece; every word also contributes its
    /// prefixes and `##` suffixes of up to four characters, so any word made of
    /// seen characters decomposes without falling back to `unk`.
    pub fn from_words<'a, I>(words: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for w in words {
            *counts.entry(w).or_default() += 1;
        }
        let mut entries: BTreeSet<String> = BTreeSet::new();
        for (&w, &c) in &counts {
            if c >= min_count.max(1) {
                entries.insert(w.to_string());
            }
            let chars: Vec<char> = w.chars().collect();
            for k in 1..=chars.len().min(4) {
                entries.insert(chars[..k].iter().collect());
                let suffix: String = chars[chars.len() - k..].iter().collect();
                entries.insert(format!("##{suffix}"));
            }
            for &ch in &chars {
                entries.insert(format!("##{ch}"));
            }
        }
        Self::new(entries, DEFAULT_UNK).expect("default unk is non-empty")
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.entries.contains(piece)
    }

    pub fn unk(&self) -> &str {
        &self.unk
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted entries.
    pub fn entries(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Splits one word by greedy longest match. Falls back to a single `unk`
    /// piece when the word has no decomposition.
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let longest = (start + 1..=chars.len().min(start + self.max_piece_chars))
                .rev()
                .find_map(|end| {
                    let body: String = chars[start..end].iter().collect();
                    let piece = if start == 0 { body } else { format!("##{body}") };
                    self.contains(&piece).then_some((end, piece))
                });
            match longest {
                Some((end, piece)) => {
                    pieces.push(piece);
                    start = end;
                }
                None => return vec![self.unk.clone()],
            }
        }
        if pieces.is_empty() {
            pieces.push(self.unk.clone());
        }
        pieces
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_format_round_trip() {
        let v = SubwordVocab::parse("#unk=<?>\npolice\n##ed\nprotest\n\n").unwrap();
        assert_eq!(v.unk(), "<?>");
        assert!(v.contains("<?>") && v.contains("##ed"));
        assert_eq!(SubwordVocab::parse(&v.to_file_string()).unwrap(), v);
        let d = SubwordVocab::parse("a\nb\n").unwrap();
        assert_eq!(d.unk(), DEFAULT_UNK);
        assert!(SubwordVocab::parse("").is_err());
        assert!(SubwordVocab::parse("#unk=x\n").is_err());
    }

    #[test]
    fn frequency_vocab_decomposes_seen_words() {
        let words = ["protested", "protested", "marched", "Bogotá"];
        let v = SubwordVocab::from_words(words.iter().copied(), 2);
        assert_eq!(v.tokenize_word("protested"), vec!["protested"]);
        let pieces = v.tokenize_word("marched");
        assert!(pieces.len() > 1 && !pieces.contains(&DEFAULT_UNK.to_string()));
        assert_eq!(pieces.concat().replace("##", ""), "marched");
        assert_ne!(v.tokenize_word("Bogotá"), vec![DEFAULT_UNK.to_string()]);
        assert_eq!(v.tokenize_word("xyz"), vec![DEFAULT_UNK.to_string()]);
    }
}
