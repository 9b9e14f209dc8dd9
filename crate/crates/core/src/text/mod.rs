//! Problem-text pipeline: tokenization, number detection, significant-number
//! identification, and abstraction into slot-marked problems.

mod numbers;
mod sni;
pub mod tagger;
mod tokenize;

pub use numbers::{detect_numbers, token_value};
pub use sni::sni_rules;
pub use tokenize::{tokenize_text, tokenize_with_spans, SpannedToken};

use std::collections::BTreeMap;

use crate::equation::{
    abstract_equations, parse_equation_set, EquationTemplate, ParseError, SlotAssignment, SlotId,
    TemplateError,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("empty problem text")]
    EmptyText,
    #[error("not enough labeled mentions to train a tagger: {found} < {required}")]
    InsufficientLabels { found: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbstractError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("gold equations do not parse: {0}")]
    Equation(#[from] ParseError),
    #[error(transparent)]
    Template(TemplateError),
    #[error("equation constants {0:?} match no mention and full alignment is required")]
    Unalignable(Vec<String>),
}

impl From<TemplateError> for AbstractError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::Parse(p) => AbstractError::Equation(p),
            other => AbstractError::Template(other),
        }
    }
}

/// One dataset record before abstraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProblem {
    pub id: String,
    pub text: String,
    pub gold_equations: String,
    pub gold_answers: Vec<Rational>,
}

/// A detected number in the problem text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberMention {
    pub surface: String,
    pub value: Rational,
    /// Char-offset span into the original text.
    pub char_span: (usize, usize),
    /// Index into the token list.
    pub token_index: usize,
    /// Assigned once significance is known; equal values share the earliest slot.
    pub slot: Option<SlotId>,
    pub significant: bool,
}

/// The problem with significant mentions replaced by slot tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractedProblem {
    pub id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<NumberMention>,
    /// Gold template; present for dataset problems, absent for ad-hoc input.
    pub template: Option<EquationTemplate>,
    pub gold_answers: Vec<Rational>,
}

impl AbstractedProblem {
    /// Slot bindings in slot order, collected from significant mentions.
    pub fn slot_values(&self) -> BTreeMap<SlotId, Rational> {
        self.mentions
            .iter()
            .filter_map(|m| m.slot.map(|s| (s, m.value.clone())))
            .collect()
    }

    pub fn gold_canonical(&self) -> Option<&str> {
        self.template.as_ref().map(|t| t.canonical())
    }
}

/// Which SNI backend assigns significance flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SniMode {
    #[default]
    Rules,
    /// All mentions significant; used when a tagger or the rules would
    /// be wrong for a synthetic corpus.
    All,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub sni: SniMode,
    /// Reject problems whose equation constants cannot all be aligned to
    /// mentions. Default: retain unmatched constants as literals.
    pub require_full_alignment: bool,
}

/// Assign slots A, B, C... to significant mentions in span order; mentions
/// with equal values share the earliest slot.
pub fn assign_slots(mentions: &mut [NumberMention]) -> SlotAssignment {
    let mut assignment = SlotAssignment::new();
    let mut next = 0u32;
    for mention in mentions.iter_mut() {
        if !mention.significant {
            mention.slot = None;
            continue;
        }
        let slot = match assignment.lookup(&mention.value) {
            Some(existing) => existing,
            None => {
                let slot = SlotId(next);
                next += 1;
                assignment.push(mention.value.clone(), slot);
                slot
            }
        };
        mention.slot = Some(slot);
    }
    assignment
}

/// Run the full pipeline on one problem: tokenize, detect numbers, flag
/// significance, assign slots, abstract the gold equations, and substitute
/// slot tokens into the text.
pub fn abstract_problem(
    raw: &RawProblem,
    config: &PipelineConfig,
) -> Result<AbstractedProblem, AbstractError> {
    abstract_problem_with(raw, config, None)
}

/// Pipeline variant that flags significance with a trained tagger, when one
/// is supplied, instead of the configured rule backend.
pub fn abstract_problem_with(
    raw: &RawProblem,
    config: &PipelineConfig,
    sni_tagger: Option<&tagger::SniTagger>,
) -> Result<AbstractedProblem, AbstractError> {
    let spanned = tokenize_with_spans(&raw.text)?;
    let mut tokens: Vec<String> = spanned.iter().map(|t| t.text.clone()).collect();
    let mut mentions = detect_numbers(&spanned);
    match (sni_tagger, config.sni) {
        (Some(tagger), _) => tagger.apply(&mut mentions, &tokens),
        (None, SniMode::Rules) => sni_rules(&mut mentions, &tokens),
        (None, SniMode::All) => mentions.iter_mut().for_each(|m| m.significant = true),
    }
    let assignment = assign_slots(&mut mentions);

    let ast = parse_equation_set(&raw.gold_equations)?;
    let template = abstract_equations(&ast, &assignment)?;
    if config.require_full_alignment {
        let retained: Vec<String> = template
            .equations()
            .iter()
            .flat_map(|eq| {
                let set = crate::equation::EquationSet { equations: vec![eq.clone()] };
                set.literal_values()
            })
            .map(|v| crate::rational::to_f64(&v).to_string())
            .collect();
        if !retained.is_empty() {
            return Err(AbstractError::Unalignable(retained));
        }
    }

    for mention in &mentions {
        if let Some(slot) = mention.slot {
            tokens[mention.token_index] = slot.to_string();
        }
    }

    Ok(AbstractedProblem {
        id: raw.id.clone(),
        tokens,
        mentions,
        template: Some(template),
        gold_answers: raw.gold_answers.clone(),
    })
}
