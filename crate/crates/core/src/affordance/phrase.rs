//! Query grammar:
//!
//! ```text
//! [find] the <category> [<relation> the <category>]
//! [find] [the] empty space <relation> the <category>
//! ```
//!
//! Matching is case-insensitive and whitespace-insensitive.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::relations::{compute_relations, image_relation, Relation, RelationConfig};
use super::{AffordanceError, AnnotatedFrame, BBox};

/// Surface forms per relation, canonical form first.
const OBJECT_FORMS: [(Relation, &[&str]); 6] = [
    (Relation::Left, &["to the left of", "on the left side of", "on the left of", "left of"]),
    (Relation::Right, &["to the right of", "on the right side of", "on the right of", "right of"]),
    (Relation::Up, &["above", "on top of", "over"]),
    (Relation::Down, &["below", "under", "beneath"]),
    (Relation::Front, &["in front of", "front of"]),
    (Relation::Back, &["behind", "in back of", "back of"]),
];

fn spatial_form(r: Relation) -> &'static str {
    match r {
        Relation::Left => "on the left side of",
        Relation::Right => "on the right side of",
        other => canonical_form(other),
    }
}

fn canonical_form(r: Relation) -> &'static str {
    OBJECT_FORMS.iter().find(|(rel, _)| *rel == r).map(|(_, forms)| forms[0]).expect("every relation has forms")
}

static RELATION_ALTERNATION: LazyLock<String> = LazyLock::new(|| {
    let mut forms: Vec<&str> = OBJECT_FORMS.iter().flat_map(|(_, f)| f.iter().copied()).collect();
    // longest first so "to the left of" wins over "left of"
    forms.sort_by_key(|f| std::cmp::Reverse(f.len()));
    forms.iter().map(|f| regex::escape(f)).collect::<Vec<_>>().join("|")
});

static OBJECT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^the (.+?) ({}) the (.+)$", *RELATION_ALTERNATION)).expect("valid regex")
});

static SPACE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^(?:the )?empty space ({}) the (.+)$", *RELATION_ALTERNATION)).expect("valid regex")
});

fn relation_of(form: &str) -> Relation {
    OBJECT_FORMS
        .iter()
        .find(|(_, forms)| forms.contains(&form))
        .map(|(r, _)| *r)
        .expect("form comes from the alternation")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedPhrase {
    Object { head: String, relation: Option<(Relation, String)> },
    Space { relation: Relation, reference: String },
}

/// What a phrase resolves to inside a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Instance(u64),
    FreeRegion(usize),
}

pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn object_query(category: &str, relation: Relation, reference: &str) -> String {
    format!("the {} {} the {}", normalize(category), canonical_form(relation), normalize(reference))
}

pub fn spatial_query(relation: Relation, reference: &str) -> String {
    format!("empty space {} the {}", spatial_form(relation), normalize(reference))
}

pub fn parse_phrase(text: &str) -> Result<ParsedPhrase, AffordanceError> {
    let mut s = normalize(text);
    if let Some(rest) = s.strip_prefix("find ") {
        s = rest.to_string();
    }
    let s = s.trim_end_matches(['.', '?', '!']).trim().to_string();
    if let Some(c) = SPACE_RE.captures(&s) {
        return Ok(ParsedPhrase::Space { relation: relation_of(&c[1]), reference: c[2].to_string() });
    }
    if let Some(c) = OBJECT_RE.captures(&s) {
        return Ok(ParsedPhrase::Object {
            head: c[1].to_string(),
            relation: Some((relation_of(&c[2]), c[3].to_string())),
        });
    }
    match s.strip_prefix("the ") {
        Some(head) if !head.is_empty() && !head.starts_with("empty space") => {
            Ok(ParsedPhrase::Object { head: head.to_string(), relation: None })
        }
        _ => Err(AffordanceError::Grammar(text.to_string())),
    }
}

fn unique<T: Copy + Ord>(phrase: &str, candidates: BTreeSet<T>) -> Result<T, AffordanceError> {
    match candidates.len() {
        0 => Err(AffordanceError::NoMatch(phrase.to_string())),
        1 => Ok(*candidates.iter().next().expect("one candidate")),
        count => Err(AffordanceError::Ambiguous { phrase: phrase.to_string(), count }),
    }
}

/// Resolves a query to the single instance or free region it denotes.
pub fn resolve_phrase(frame: &AnnotatedFrame, phrase: &str, cfg: &RelationConfig) -> Result<Target, AffordanceError> {
    let category_of = |id: u64| frame.instance(id).map(|i| normalize(&i.category));
    match parse_phrase(phrase)? {
        ParsedPhrase::Object { head, relation: None } => {
            let ids = frame.instances.iter().filter(|i| normalize(&i.category) == head).map(|i| i.id).collect();
            unique(phrase, ids).map(Target::Instance)
        }
        ParsedPhrase::Object { head, relation: Some((rel, reference)) } => {
            let ids = compute_relations(frame, cfg)
                .into_iter()
                .filter(|r| {
                    r.relation == rel
                        && category_of(r.subject).as_deref() == Some(head.as_str())
                        && category_of(r.reference).as_deref() == Some(reference.as_str())
                })
                .map(|r| r.subject)
                .collect();
            unique(phrase, ids).map(Target::Instance)
        }
        ParsedPhrase::Space { relation, reference } => {
            let refs: Vec<&BBox> = frame
                .instances
                .iter()
                .filter(|i| normalize(&i.category) == reference)
                .map(|i| &i.bbox)
                .collect();
            let regions = frame
                .free_regions
                .iter()
                .enumerate()
                .filter(|(_, poly)| {
                    let fb = BBox::of_points(poly);
                    refs.iter().any(|b| image_relation(&fb, b, cfg) == Some(relation))
                })
                .map(|(k, _)| k)
                .collect();
            unique(phrase, regions).map(Target::FreeRegion)
        }
    }
}
