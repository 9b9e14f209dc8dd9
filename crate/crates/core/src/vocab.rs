//! Token and template vocabularies, built from the training split only.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::equation::EquationTemplate;
use crate::text::AbstractedProblem;

pub const UNK_TOKEN: &str = "<unk>";

/// Input-token vocabulary with an UNK bucket at id 0. Tokens below the
/// frequency threshold are dropped; ids follow first-occurrence order.
#[derive(Debug, Clone)]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenVocab {
    pub fn build<'a>(sequences: impl Iterator<Item = &'a [String]>, min_freq: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut order: Vec<&str> = Vec::new();
        for seq in sequences {
            for token in seq {
                let entry = counts.entry(token.as_str()).or_insert(0);
                if *entry == 0 {
                    order.push(token);
                }
                *entry += 1;
            }
        }
        let mut tokens = vec![UNK_TOKEN.to_string()];
        tokens.extend(
            order.into_iter().filter(|t| counts[t] >= min_freq).map(str::to_string),
        );
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        assert_eq!(tokens.first().map(String::as_str), Some(UNK_TOKEN), "vocab must start with UNK");
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn hash(&self) -> String {
        hash_lines(&self.tokens)
    }
}

/// The closed set of template classes: ordered canonical strings plus their
/// parsed forms for instantiation.
#[derive(Debug, Clone)]
pub struct TemplateVocab {
    classes: Vec<String>,
    templates: Vec<EquationTemplate>,
    index: HashMap<String, usize>,
}

impl TemplateVocab {
    /// Classes in first-occurrence order over the training split.
    pub fn build(train: &[AbstractedProblem]) -> Option<Self> {
        let mut classes: Vec<String> = Vec::new();
        let mut index = HashMap::new();
        let mut templates = Vec::new();
        for problem in train {
            let Some(template) = problem.template.as_ref() else { continue };
            let canonical = template.canonical().to_string();
            if !index.contains_key(&canonical) {
                index.insert(canonical.clone(), classes.len());
                classes.push(canonical);
                templates.push(template.clone());
            }
        }
        if classes.is_empty() {
            return None;
        }
        Some(Self { classes, templates, index })
    }

    pub fn from_classes(classes: Vec<String>) -> Result<Self, crate::equation::TemplateError> {
        let templates: Result<Vec<_>, _> =
            classes.iter().map(|c| EquationTemplate::parse(c)).collect();
        let index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self { classes, templates: templates?, index })
    }

    pub fn class_of(&self, canonical: &str) -> Option<usize> {
        self.index.get(canonical).copied()
    }

    pub fn template(&self, class: usize) -> &EquationTemplate {
        &self.templates[class]
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn hash(&self) -> String {
        hash_lines(&self.classes)
    }
}

pub fn hash_lines(lines: &[String]) -> String {
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex_prefix(&hasher.finalize())
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex_prefix(&Sha256::digest(bytes))
}

fn hex_prefix(digest: &[u8]) -> String {
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(data: &[&[&str]]) -> Vec<Vec<String>> {
        data.iter().map(|s| s.iter().map(|t| t.to_string()).collect()).collect()
    }

    #[test]
    fn unk_threshold_drops_singletons() {
        let sequences = seqs(&[&["a", "b", "a"], &["b", "c"]]);
        let vocab = TokenVocab::build(sequences.iter().map(Vec::as_slice), 2);
        assert_eq!(vocab.tokens(), &["<unk>", "a", "b"]);
        assert_eq!(vocab.id("c"), 0);
        assert_eq!(vocab.id("a"), 1);
    }

    #[test]
    fn ids_follow_first_occurrence() {
        let sequences = seqs(&[&["z", "y", "z"], &["y", "x", "x"]]);
        let vocab = TokenVocab::build(sequences.iter().map(Vec::as_slice), 1);
        assert_eq!(vocab.tokens(), &["<unk>", "z", "y", "x"]);
    }

    #[test]
    fn vocab_hash_is_order_sensitive() {
        let a = TokenVocab::from_tokens(vec!["<unk>".into(), "a".into(), "b".into()]);
        let b = TokenVocab::from_tokens(vec!["<unk>".into(), "b".into(), "a".into()]);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn template_vocab_round_trips_through_classes() {
        let vocab =
            TemplateVocab::from_classes(vec!["A + B = x".into(), "A - B = x".into()]).unwrap();
        assert_eq!(vocab.class_of("A - B = x"), Some(1));
        assert_eq!(vocab.template(0).canonical(), "A + B = x");
        assert_eq!(vocab.class_of("A * B = x"), None);
    }
}
