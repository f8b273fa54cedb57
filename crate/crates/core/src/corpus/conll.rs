//! Snippet files.
//!
//! ```text
//! # id = <id>
//! token<TAB>tag
//! token<TAB>tag
//!
//! token<TAB>tag
//!
//!
//! # id = <next id>
//! ```
//!
//! One blank line ends a sentence, two separate snippets. A token line without
//! a tag column carries no gold tag.

use std::ops::Range;

use super::{repair_bio, validate_bio, CorpusError, Tag, TagSet, Violation};

const HEADER: &str = "# id = ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub gold: Option<Tag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

/// An ordered group of sentences about one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Snippet {
    /// Number of words across all sentences.
    pub fn len(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens().map(|t| t.text.as_str()).collect()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// Word ranges of each sentence within the flattened snippet.
    pub fn sentence_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.sentences
            .iter()
            .map(|s| {
                let r = start..start + s.tokens.len();
                start = r.end;
                r
            })
            .collect()
    }

    /// Flattened gold tags, `None` where a token has no gold tag.
    pub fn gold(&self) -> Vec<Option<Tag>> {
        self.tokens().map(|t| t.gold.clone()).collect()
    }

    /// Gold tags per sentence. Missing gold reads as `O`.
    pub fn gold_sequences(&self) -> Vec<Vec<Tag>> {
        self.sentences
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .map(|t| t.gold.clone().unwrap_or(Tag::Outside))
                    .collect()
            })
            .collect()
    }

    /// BIO violations per sentence, as `(sentence index, violation)`.
    pub fn bio_violations(&self) -> Vec<(usize, Violation)> {
        self.gold_sequences()
            .iter()
            .enumerate()
            .flat_map(|(s, tags)| validate_bio(tags).into_iter().map(move |v| (s, v)))
            .collect()
    }

    /// Copy with every sentence's gold sequence repaired.
    pub fn repaired(&self) -> Snippet {
        let mut out = self.clone();
        for sentence in &mut out.sentences {
            let tags: Vec<Tag> = sentence
                .tokens
                .iter()
                .map(|t| t.gold.clone().unwrap_or(Tag::Outside))
                .collect();
            for (tok, fixed) in sentence.tokens.iter_mut().zip(repair_bio(&tags)) {
                if tok.gold.is_some() {
                    tok.gold = Some(fixed);
                }
            }
        }
        out
    }

    /// Copy with the flattened word tags replaced by `tags`.
    ///
    /// # Panics
    /// If `tags.len() != self.len()`.
    pub fn with_tags(&self, tags: &[Tag]) -> Snippet {
        assert_eq!(tags.len(), self.len(), "tag count must match word count");
        let mut out = self.clone();
        let mut it = tags.iter();
        for sentence in &mut out.sentences {
            for tok in &mut sentence.tokens {
                tok.gold = it.next().cloned();
            }
        }
        out
    }
}

/// Parses snippet files. Tags must belong to `tagset`; BIO validity is not
/// enforced here (see [`Snippet::bio_violations`]).
pub fn parse_conll(text: &str, tagset: &TagSet) -> Result<Vec<Snippet>, CorpusError> {
    let mut snippets: Vec<Snippet> = Vec::new();
    let mut header_line = 0;
    let mut current: Option<Snippet> = None;
    let mut sentence = Sentence::default();

    fn close(
        current: &mut Option<Snippet>,
        sentence: &mut Sentence,
        snippets: &mut Vec<Snippet>,
        header_line: usize,
    ) -> Result<(), CorpusError> {
        if !sentence.tokens.is_empty() {
            if let Some(s) = current.as_mut() {
                s.sentences.push(std::mem::take(sentence));
            }
        }
        if let Some(s) = current.take() {
            if s.is_empty() {
                return Err(CorpusError::MalformedLine {
                    line: header_line,
                    reason: format!("snippet `{}` has no tokens", s.id),
                });
            }
            snippets.push(s);
        }
        Ok(())
    }

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if let Some(id) = line.strip_prefix(HEADER) {
            close(&mut current, &mut sentence, &mut snippets, header_line)?;
            current = Some(Snippet {
                id: id.to_string(),
                sentences: Vec::new(),
            });
            header_line = line_no;
            continue;
        }
        if line.is_empty() {
            if !sentence.tokens.is_empty() {
                if let Some(s) = current.as_mut() {
                    s.sentences.push(std::mem::take(&mut sentence));
                }
            }
            continue;
        }
        if current.is_none() {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: format!("token before the first `{}` header", HEADER.trim_end()),
            });
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (text, gold) = match cols.as_slice() {
            [t] => (*t, None),
            [t, tag] => (*t, Some(tagset.parse_tag(tag, line_no)?)),
            _ => {
                return Err(CorpusError::MalformedLine {
                    line: line_no,
                    reason: format!("expected 1 or 2 tab-separated columns, found {}", cols.len()),
                })
            }
        };
        if text.is_empty() {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: "empty token".into(),
            });
        }
        sentence.tokens.push(Token {
            text: text.to_string(),
            gold,
        });
    }
    close(&mut current, &mut sentence, &mut snippets, header_line)?;
    Ok(snippets)
}

/// A BIO violation located in a snippet file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileViolation {
    /// 1-based line of the offending token.
    pub line: usize,
    pub snippet_id: String,
    pub violation: Violation,
}

/// Parses `text` and reports every BIO violation with its line number.
/// `Violation::index` stays relative to the token's sentence.
pub fn validate_conll(text: &str, tagset: &TagSet) -> Result<Vec<FileViolation>, CorpusError> {
    let snippets = parse_conll(text, tagset)?;
    // Token lines appear in the same order as the parsed tokens.
    let token_lines: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.trim_end();
            !l.is_empty() && !l.starts_with(HEADER)
        })
        .map(|(i, _)| i + 1)
        .collect();
    let mut out = Vec::new();
    let mut offset = 0;
    for snippet in &snippets {
        let ranges = snippet.sentence_ranges();
        for (s, v) in snippet.bio_violations() {
            out.push(FileViolation {
                line: token_lines[offset + ranges[s].start + v.index],
                snippet_id: snippet.id.clone(),
                violation: v,
            });
        }
        offset += snippet.len();
    }
    Ok(out)
}

/// Writes snippets in the layout read by [`parse_conll`].
pub fn write_conll(snippets: &[Snippet]) -> String {
    let mut out = String::new();
    for (i, snippet) in snippets.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(HEADER);
        out.push_str(&snippet.id);
        out.push('\n');
        for sentence in &snippet.sentences {
            for tok in &sentence.tokens {
                out.push_str(&tok.text);
                if let Some(tag) = &tok.gold {
                    out.push('\t');
                    out.push_str(&tag.to_string());
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input_has_no_snippets() {
        assert!(parse_conll("", &TagSet::event()).unwrap().is_empty());
    }

    #[test]
    fn reads_the_declared_layout() {
        let text = "# id = s1\nPolice\tB-participant\nprotested\tB-trigger\n\n";
        let snippets = parse_conll(text, &TagSet::event()).unwrap();
        assert_eq!(snippets.len(), 1);
        assert_eq!(snippets[0].id, "s1");
        assert_eq!(snippets[0].sentences.len(), 1);
        assert_eq!(
            snippets[0].gold(),
            vec![Some(Tag::begin("participant")), Some(Tag::begin("trigger"))]
        );
        assert_eq!(write_conll(&snippets), text);
    }

    #[test]
    fn unknown_tag_reports_its_line() {
        let text = "# id = a\nok\tO\nx\tB-banana\n";
        let err = parse_conll(text, &TagSet::event()).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownTag { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn wrong_column_count_is_malformed() {
        let err = parse_conll("# id = a\nx\tO\textra\n", &TagSet::event()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 2, .. }));
        let err = parse_conll("x\tO\n", &TagSet::event()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 1, .. }));
        let err = parse_conll("# id = a\n\n# id = b\nx\tO\n", &TagSet::event()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn sentences_and_snippets_are_separated_by_blank_lines() {
        let text = "# id = a\nx\tO\n\ny\tB-time\nz\tI-time\n\n\n# id = b\nw\n\n";
        let snippets = parse_conll(text, &TagSet::event()).unwrap();
        assert_eq!(snippets.len(), 2);
        assert_eq!(snippets[0].sentences.len(), 2);
        assert_eq!(snippets[0].sentence_ranges(), vec![0..1, 1..3]);
        assert_eq!(snippets[1].gold(), vec![None]);
        assert_eq!(write_conll(&snippets), text);
    }

    #[test]
    fn crlf_and_trailing_spaces_are_tolerated() {
        let text = "# id = a\r\nx\tO  \r\n\r\n";
        let snippets = parse_conll(text, &TagSet::event()).unwrap();
        assert_eq!(write_conll(&snippets), "# id = a\nx\tO\n\n");
    }

    #[test]
    fn violations_carry_line_numbers() {
        let text = "# id = a\nx\tO\n\ny\tO\nz\tI-trigger\n\n\n# id = b\nw\tI-time\n";
        let found = validate_conll(text, &TagSet::event()).unwrap();
        let lines: Vec<(usize, &str, usize)> = found
            .iter()
            .map(|f| (f.line, f.snippet_id.as_str(), f.violation.index))
            .collect();
        assert_eq!(lines, vec![(5, "a", 1), (9, "b", 0)]);
    }

    #[test]
    fn repaired_fixes_each_sentence_independently() {
        let text = "# id = a\nx\tB-time\n\ny\tI-time\n\n";
        let s = &parse_conll(text, &TagSet::event()).unwrap()[0];
        assert_eq!(s.bio_violations().len(), 1);
        let r = s.repaired();
        assert!(r.bio_violations().is_empty());
        assert_eq!(r.gold()[1], Some(Tag::begin("time")));
    }

    fn snippet_strategy() -> impl Strategy<Value = Snippet> {
        let ts = TagSet::event();
        let token = ("[a-zA-Z#0-9.,]{1,8}", prop::option::of(0..ts.len())).prop_map(move |(text, tag)| Token {
            text,
            gold: tag.map(|i| ts.tag_at(i)),
        });
        let sentence = prop::collection::vec(token, 1..6).prop_map(|tokens| Sentence { tokens });
        ("[a-z0-9-]{1,6}", prop::collection::vec(sentence, 1..4)).prop_map(|(id, sentences)| Snippet { id, sentences })
    }

    proptest! {
        #[test]
        fn writer_output_round_trips(snippets in prop::collection::vec(snippet_strategy(), 0..5)) {
            let text = write_conll(&snippets);
            let parsed = parse_conll(&text, &TagSet::event()).unwrap();
            prop_assert_eq!(&parsed, &snippets);
            prop_assert_eq!(write_conll(&parsed), text);
        }
    }
}
