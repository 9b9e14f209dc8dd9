//! Nearest-neighbor solving: copy the template of the most similar training
//! problem under Jaccard or cosine similarity.

mod embedding;

pub use embedding::{
    average_embedding, cosine_similarity, DimensionMismatch, EmbeddingError, EmbeddingTable,
};

use std::collections::BTreeSet;

use crate::equation::{EquationTemplate, SlotId};
use crate::eval::{evaluate_template, SolveOutcome};
use crate::rational::{rat, Rational};
use crate::text::AbstractedProblem;
use num_traits::Zero;

/// Slot tokens are replaced by a single placeholder before comparison: slot
/// letters encode how many numbers a problem has, not what it says.
pub const NUMBER_PLACEHOLDER: &str = "<num>";

pub fn comparison_tokens(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            if SlotId::parse(t).is_some() {
                NUMBER_PLACEHOLDER.to_string()
            } else {
                t.clone()
            }
        })
        .collect()
}

/// Training problems paired with their gold templates, with cached per-item
/// token sets. Immutable after construction; queries are read-only.
#[derive(Debug, Clone)]
pub struct Corpus {
    items: Vec<(AbstractedProblem, EquationTemplate)>,
    token_sets: Vec<BTreeSet<String>>,
}

impl Corpus {
    pub fn new(items: Vec<(AbstractedProblem, EquationTemplate)>) -> Self {
        let token_sets = items
            .iter()
            .map(|(p, _)| comparison_tokens(&p.tokens).into_iter().collect())
            .collect();
        Self { items, token_sets }
    }

    /// Keep the problems that carry a gold template.
    pub fn from_problems(problems: &[AbstractedProblem]) -> Self {
        Self::new(
            problems
                .iter()
                .filter_map(|p| p.template.clone().map(|t| (p.clone(), t)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(AbstractedProblem, EquationTemplate)] {
        &self.items
    }

    pub fn token_sets(&self) -> &[BTreeSet<String>] {
        &self.token_sets
    }
}

/// `|S ∩ T| / |S ∪ T|` as an exact rational; 1 when both sets are empty,
/// 0 when exactly one is.
pub fn jaccard_similarity(s: &BTreeSet<String>, t: &BTreeSet<String>) -> Rational {
    if s.is_empty() && t.is_empty() {
        return rat(1);
    }
    let intersection = s.intersection(t).count() as i64;
    let union = s.union(t).count() as i64;
    if union == 0 {
        rat(0)
    } else {
        Rational::new(intersection.into(), union.into())
    }
}

pub enum RetrievalMetric<'a> {
    Jaccard,
    Cosine(&'a EmbeddingTable),
}

/// Index of the most similar training item, ties broken by lowest index.
/// Returns `None` only for an empty corpus.
pub fn nearest_index(
    test: &AbstractedProblem,
    corpus: &Corpus,
    metric: &RetrievalMetric<'_>,
) -> Option<usize> {
    if corpus.is_empty() {
        return None;
    }
    match metric {
        RetrievalMetric::Jaccard => {
            let test_set: BTreeSet<String> =
                comparison_tokens(&test.tokens).into_iter().collect();
            let mut best = 0usize;
            let mut best_sim = Rational::zero() - rat(1);
            for (i, set) in corpus.token_sets().iter().enumerate() {
                let sim = jaccard_similarity(&test_set, set);
                if sim > best_sim {
                    best_sim = sim;
                    best = i;
                }
            }
            Some(best)
        }
        RetrievalMetric::Cosine(table) => {
            let test_vec = average_embedding(&comparison_tokens(&test.tokens), table);
            let mut best = 0usize;
            let mut best_sim = f64::NEG_INFINITY;
            for (i, (p, _)) in corpus.items().iter().enumerate() {
                let item_vec = average_embedding(&comparison_tokens(&p.tokens), table);
                let sim = cosine_similarity(&test_vec, &item_vec)
                    .expect("table vectors share one dimension");
                if sim > best_sim {
                    best_sim = sim;
                    best = i;
                }
            }
            Some(best)
        }
    }
}

/// Copy the nearest neighbor's template, fill it with the test problem's
/// numbers, and solve. Templates needing unavailable slots become wrong
/// outcomes; nothing here is an error.
pub fn retrieve_and_solve(
    test: &AbstractedProblem,
    corpus: &Corpus,
    metric: &RetrievalMetric<'_>,
) -> SolveOutcome {
    match nearest_index(test, corpus, metric) {
        Some(i) => evaluate_template(test, &corpus.items()[i].1),
        None => SolveOutcome::failed(&test.id, None, crate::eval::FailureReason::UnknownSlot),
    }
}

#[cfg(test)]
mod tests;
