//! Significant number identification.
//!
//! Two interchangeable backends decide which number mentions participate in
//! the equation: deterministic rules (the default) and a learned recurrent
//! tagger trained on alignment-derived labels.

use super::numbers::ordinal_value;
use super::NumberMention;

/// Rule-based SNI: every mention is significant unless an exclusion pattern
/// fires. Exclusions:
///
/// - ordinal surfaces (`2nd`, `3rd`, ...)
/// - clock patterns (a digit token adjacent to `:` next to another digit)
/// - times of day (followed by `am` / `pm` / `o'clock`)
/// - date-like runs (mention adjacent to a `/` token)
/// - the standalone `1` in partitive phrases (`1 of them`)
pub fn sni_rules(mentions: &mut [NumberMention], tokens: &[String]) {
    for mention in mentions.iter_mut() {
        mention.significant = !is_excluded(mention, tokens);
    }
}

fn is_excluded(mention: &NumberMention, tokens: &[String]) -> bool {
    if ordinal_value(&mention.surface).is_some() {
        return true;
    }
    let i = mention.token_index;
    let tok = |j: usize| tokens.get(j).map(String::as_str);
    let is_numeric = |j: usize| {
        tokens.get(j).map(|t| t.chars().next().is_some_and(|c| c.is_ascii_digit())).unwrap_or(false)
    };
    // Clock: "3 : 30" on either side.
    if tok(i + 1) == Some(":") && is_numeric(i + 2) {
        return true;
    }
    if i >= 2 && tok(i - 1) == Some(":") && is_numeric(i - 2) {
        return true;
    }
    // Time of day: "7 pm", "7 o ' clock".
    if matches!(tok(i + 1), Some("am") | Some("pm")) {
        return true;
    }
    if tok(i + 1) == Some("o") && tok(i + 2) == Some("'") && tok(i + 3) == Some("clock") {
        return true;
    }
    // Date-like: "10 / 5 / 2016" leaves "/" tokens adjacent.
    if tok(i + 1) == Some("/") || (i >= 1 && tok(i - 1) == Some("/")) {
        return true;
    }
    // Partitive standalone one: "1 of them".
    if mention.surface == "1" && tok(i + 1) == Some("of") {
        return true;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::super::numbers::detect_numbers;
    use super::super::tokenize::tokenize_with_spans;
    use super::*;

    fn flags(text: &str) -> Vec<(String, bool)> {
        let toks = tokenize_with_spans(text).unwrap();
        let mut mentions = detect_numbers(&toks);
        let token_texts: Vec<String> = toks.iter().map(|t| t.text.clone()).collect();
        sni_rules(&mut mentions, &token_texts);
        mentions.into_iter().map(|m| (m.surface, m.significant)).collect()
    }

    #[test]
    fn plain_mentions_are_significant() {
        let text = "her 3 children took 2 pieces and received 5 pieces";
        assert!(flags(text).iter().all(|(_, s)| *s));
    }

    #[test]
    fn ordinals_are_excluded() {
        assert_eq!(flags("on the 2nd day she ate 4"), vec![("2nd".into(), false), ("4".into(), true)]);
    }

    #[test]
    fn clock_and_meridiem_are_excluded() {
        assert_eq!(
            flags("at 3:30 she ran 6 miles"),
            vec![("3".into(), false), ("30".into(), false), ("6".into(), true)]
        );
        assert_eq!(flags("by 7 pm she read 12 pages"), vec![("7".into(), false), ("12".into(), true)]);
    }

    #[test]
    fn partitive_one_is_excluded() {
        assert_eq!(flags("gave 1 of them 5"), vec![("1".into(), false), ("5".into(), true)]);
    }

    #[test]
    fn empty_mention_list_is_fine() {
        assert!(flags("nothing numeric here").is_empty());
    }
}
