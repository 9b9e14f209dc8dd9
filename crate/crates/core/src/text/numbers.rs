//! Number-mention detection over tokenized text.

use num_traits::Zero;

use crate::rational::{parse_decimal, rat, Rational};

use super::tokenize::SpannedToken;
use super::NumberMention;

fn decimal(s: &str) -> Option<Rational> {
    parse_decimal(s)
}

/// The value of a single token, if it is a recognized number pattern:
/// integer, decimal, fraction `a/b`, percent `n%`, money `$n`, or an
/// ordinal-suffixed integer (`2nd`; detected so SNI can exclude it).
pub fn token_value(token: &str) -> Option<Rational> {
    if let Some(body) = token.strip_prefix('$') {
        return decimal(body);
    }
    if let Some(body) = token.strip_suffix('%') {
        return Some(decimal(body)? / rat(100));
    }
    if let Some((num, den)) = token.split_once('/') {
        let n = decimal(num)?;
        let d = decimal(den)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    if let Some(v) = decimal(token) {
        return Some(v);
    }
    ordinal_value(token)
}

/// `"2nd"` -> 2. Only the st/nd/rd/th suffixes count.
pub fn ordinal_value(token: &str) -> Option<Rational> {
    let digits: String = token.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let suffix = &token[digits.len()..];
    if matches!(suffix, "st" | "nd" | "rd" | "th") {
        decimal(&digits)
    } else {
        None
    }
}

/// Scan tokens for number mentions, in span order. Slot and significance
/// are left unset; SNI assigns them.
pub fn detect_numbers(tokens: &[SpannedToken]) -> Vec<NumberMention> {
    tokens
        .iter()
        .enumerate()
        .filter_map(|(index, tok)| {
            token_value(&tok.text).map(|value| NumberMention {
                surface: tok.text.clone(),
                value,
                char_span: (tok.start, tok.end),
                token_index: index,
                slot: None,
                significant: false,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::tokenize::tokenize_with_spans;
    use super::*;
    use crate::rational::ratio;

    fn values(text: &str) -> Vec<Rational> {
        detect_numbers(&tokenize_with_spans(text).unwrap())
            .into_iter()
            .map(|m| m.value)
            .collect()
    }

    #[test]
    fn finds_values_in_order() {
        let text = "Aliyah had some candy to give to her 3 children. She first took 2 pieces \
                    for herself and then evenly divided the rest among her children. Each child \
                    received 5 pieces. With how many pieces did she start?";
        assert_eq!(values(text), vec![rat(3), rat(2), rat(5)]);
    }

    #[test]
    fn normalizes_fractions_and_percents() {
        assert_eq!(values("3/4 of it"), vec![ratio(3, 4)]);
        assert_eq!(values("5% off"), vec![ratio(1, 20)]);
        assert_eq!(values("$20 total"), vec![rat(20)]);
        assert_eq!(values("1.5 hours"), vec![ratio(3, 2)]);
    }

    #[test]
    fn ordinals_are_detected_words_are_not() {
        assert_eq!(values("the 2nd day"), vec![rat(2)]);
        assert!(values("first of them").is_empty());
        assert!(values("no numbers here").is_empty());
    }

    #[test]
    fn zero_denominator_is_not_a_mention() {
        assert!(values("3/0 nonsense").is_empty());
    }

    #[test]
    fn spans_are_ordered_and_disjoint() {
        let toks = tokenize_with_spans("buy 2 for $3 and 4/5 more").unwrap();
        let mentions = detect_numbers(&toks);
        for pair in mentions.windows(2) {
            assert!(pair[0].char_span.1 <= pair[1].char_span.0);
        }
    }
}
