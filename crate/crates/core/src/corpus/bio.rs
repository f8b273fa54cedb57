use std::fmt;

use super::Tag;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationReason {
    /// `I-<c>` at the start of a sequence or after `O`.
    InsideWithoutBegin,
    /// `I-<c>` after a tag of a different class.
    ClassMismatch { previous: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            ViolationReason::InsideWithoutBegin => {
                write!(f, "token {}: I- tag not preceded by B- or I-", self.index)
            }
            ViolationReason::ClassMismatch { previous } => write!(
                f,
                "token {}: I- tag continues an entity of class `{previous}`",
                self.index
            ),
        }
    }
}

/// Checks IOB2 well-formedness: every `I-<c>` must follow `B-<c>` or `I-<c>`.
pub fn validate_bio(tags: &[Tag]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut previous: Option<&str> = None;
    for (index, tag) in tags.iter().enumerate() {
        if let Tag::Inside(c) = tag {
            match previous {
                None => out.push(Violation {
                    index,
                    reason: ViolationReason::InsideWithoutBegin,
                }),
                Some(p) if p != c => out.push(Violation {
                    index,
                    reason: ViolationReason::ClassMismatch {
                        previous: p.to_string(),
                    },
                }),
                Some(_) => {}
            }
        }
        previous = tag.class();
    }
    out
}

/// Turns every violating `I-<c>` into `B-<c>`. Valid input is returned as is.
pub fn repair_bio(tags: &[Tag]) -> Vec<Tag> {
    let mut out: Vec<Tag> = Vec::with_capacity(tags.len());
    for tag in tags {
        let fixed = match tag {
            Tag::Inside(c) => {
                let continues = out.last().and_then(Tag::class) == Some(c.as_str());
                if continues {
                    tag.clone()
                } else {
                    Tag::Begin(c.clone())
                }
            }
            _ => tag.clone(),
        };
        out.push(fixed);
    }
    out
}
