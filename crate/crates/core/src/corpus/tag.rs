use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagKind {
    Outside,
    Begin,
    Inside,
}

/// A BIO tag. Serialises as `O`, `B-<class>` or `I-<class>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn begin(class: impl Into<String>) -> Self {
        Tag::Begin(class.into())
    }

    pub fn inside(class: impl Into<String>) -> Self {
        Tag::Inside(class.into())
    }

    pub fn kind(&self) -> TagKind {
        match self {
            Tag::Outside => TagKind::Outside,
            Tag::Begin(_) => TagKind::Begin,
            Tag::Inside(_) => TagKind::Inside,
        }
    }

    pub fn class(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(c) | Tag::Inside(c) => Some(c),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(c) => write!(f, "B-{c}"),
            Tag::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

/// Syntactic parse only; membership in a tag set is checked by
/// [`TagSet::parse_tag`].
impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        match s.split_once('-') {
            Some(("B", c)) if !c.is_empty() => Ok(Tag::Begin(c.to_string())),
            Some(("I", c)) if !c.is_empty() => Ok(Tag::Inside(c.to_string())),
            _ => Err(format!("`{s}` is not O, B-<class> or I-<class>")),
        }
    }
}

/// A closed set of entity classes and the `2k + 1` BIO tags built from them.
///
/// Tag indices: `O` is 0, `B-<classes[k]>` is `1 + 2k`, `I-<classes[k]>` is
/// `2 + 2k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    name: String,
    classes: Vec<String>,
}

/// The seven event information classes.
pub const EVENT_CLASSES: [&str; 7] = [
    "time",
    "fname",
    "organizer",
    "participant",
    "place",
    "target",
    "trigger",
];

/// Classes kept for the auxiliary NER task.
pub const NER_CLASSES: [&str; 3] = ["person", "organization", "location"];

impl TagSet {
    pub fn new(name: impl Into<String>, classes: Vec<String>) -> Result<Self, CorpusError> {
        let name = name.into();
        if classes.is_empty() {
            return Err(CorpusError::InvalidTagSet(format!("`{name}` has no classes")));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.is_empty() || c.contains(char::is_whitespace) {
                return Err(CorpusError::InvalidTagSet(format!("bad class name `{c}`")));
            }
            if classes[..i].contains(c) {
                return Err(CorpusError::InvalidTagSet(format!("duplicate class `{c}`")));
            }
        }
        Ok(Self { name, classes })
    }

    /// The shared-task tag set (15 tags).
    pub fn event() -> Self {
        Self {
            name: "event".into(),
            classes: EVENT_CLASSES.iter().map(|c| c.to_string()).collect(),
        }
    }

    /// The auxiliary NER tag set used for behavioural pretraining (7 tags).
    pub fn ner() -> Self {
        Self {
            name: "ner".into(),
            classes: NER_CLASSES.iter().map(|c| c.to_string()).collect(),
        }
    }

    /// Looks up one of the built-in tag sets.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "event" => Some(Self::event()),
            "ner" => Some(Self::ner()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Number of tags, `2k + 1`.
    pub fn len(&self) -> usize {
        2 * self.classes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn index_of(&self, tag: &Tag) -> Option<usize> {
        match tag {
            Tag::Outside => Some(0),
            Tag::Begin(c) => self.class_index(c).map(|k| 1 + 2 * k),
            Tag::Inside(c) => self.class_index(c).map(|k| 2 + 2 * k),
        }
    }

    /// Tag for an index in `0..len()`.
    ///
    /// # Panics
    /// If `index >= self.len()`.
    pub fn tag_at(&self, index: usize) -> Tag {
        assert!(index < self.len(), "tag index {index} out of range");
        if index == 0 {
            Tag::Outside
        } else {
            let class = self.classes[(index - 1) / 2].clone();
            if index % 2 == 1 {
                Tag::Begin(class)
            } else {
                Tag::Inside(class)
            }
        }
    }

    pub fn tags(&self) -> impl Iterator<Item = Tag> + '_ {
        (0..self.len()).map(|i| self.tag_at(i))
    }

    pub fn contains(&self, tag: &Tag) -> bool {
        self.index_of(tag).is_some()
    }

    /// Parses a serialised tag and checks that it belongs to this set.
    pub fn parse_tag(&self, s: &str, line: usize) -> Result<Tag, CorpusError> {
        let unknown = || CorpusError::UnknownTag {
            line,
            tag: s.to_string(),
            tagset: self.name.clone(),
        };
        let tag: Tag = s.parse().map_err(|_| unknown())?;
        if self.contains(&tag) {
            Ok(tag)
        } else {
            Err(unknown())
        }
    }
}
