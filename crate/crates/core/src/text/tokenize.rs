//! Deterministic problem-text tokenization.
//!
//! English-style text splits on whitespace and punctuation (punctuation kept
//! as tokens) and is ASCII-lowercased. Number-like spans are kept whole:
//! integers, decimals, fractions (`3/4`), percents (`5%`), money (`$20`) and
//! digit+letter runs (`2nd`). Text without word separators (CJK) splits per
//! character with contiguous digit runs kept whole.

use super::TextError;

/// A token with its char-offset span into the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_cjk(c: char) -> bool {
    matches!(u32::from(c),
        0x2E80..=0x2EFF   // CJK radicals
        | 0x3040..=0x30FF // hiragana, katakana
        | 0x3400..=0x4DBF // CJK extension A
        | 0x4E00..=0x9FFF // CJK unified ideographs
        | 0xAC00..=0xD7AF // hangul syllables
        | 0xF900..=0xFAFF // CJK compatibility ideographs
        | 0xFF01..=0xFF60 // fullwidth forms (punctuation)
    )
}

/// Consume a number starting at `i`: digits, optional `.digits`, optional
/// `/digits[.digits]`, optional `%`. Returns the exclusive end index.
fn scan_number(chars: &[char], i: usize) -> usize {
    let mut j = i;
    let digits = |j: &mut usize| {
        while *j < chars.len() && chars[*j].is_ascii_digit() {
            *j += 1;
        }
    };
    digits(&mut j);
    if j < chars.len() && chars[j] == '.' && j + 1 < chars.len() && chars[j + 1].is_ascii_digit() {
        j += 1;
        digits(&mut j);
    }
    if j < chars.len() && chars[j] == '/' && j + 1 < chars.len() && chars[j + 1].is_ascii_digit() {
        j += 1;
        digits(&mut j);
        if j < chars.len() && chars[j] == '.' && j + 1 < chars.len() && chars[j + 1].is_ascii_digit()
        {
            j += 1;
            digits(&mut j);
        }
    }
    if j < chars.len() && chars[j] == '%' {
        j += 1;
    }
    j
}

pub fn tokenize_with_spans(text: &str) -> Result<Vec<SpannedToken>, TextError> {
    if text.trim().is_empty() {
        return Err(TextError::EmptyText);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut push = |start: usize, end: usize| {
        let text: String = chars[start..end].iter().map(|c| c.to_ascii_lowercase()).collect();
        tokens.push(SpannedToken { text, start, end });
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '$' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit() {
            let end = scan_number(&chars, i + 1);
            push(i, end);
            i = end;
        } else if c.is_ascii_digit() {
            let mut end = scan_number(&chars, i);
            // Merge a letter suffix ("2nd", "5km") into the same token.
            if chars[end - 1] != '%' {
                while end < chars.len() && chars[end].is_ascii_alphabetic() {
                    end += 1;
                }
            }
            push(i, end);
            i = end;
        } else if c.is_ascii_alphabetic() {
            let mut end = i + 1;
            while end < chars.len() && chars[end].is_ascii_alphanumeric() {
                end += 1;
            }
            push(i, end);
            i = end;
        } else if is_cjk(c) {
            push(i, i + 1);
            i += 1;
        } else if c.is_alphabetic() {
            // Non-ASCII alphabetic (accented Latin etc.): word run.
            let mut end = i + 1;
            while end < chars.len() && chars[end].is_alphabetic() && !is_cjk(chars[end]) {
                end += 1;
            }
            push(i, end);
            i = end;
        } else {
            // Punctuation is kept as a single-char token.
            push(i, i + 1);
            i += 1;
        }
    }
    Ok(tokens)
}

pub fn tokenize_text(text: &str) -> Result<Vec<String>, TextError> {
    Ok(tokenize_with_spans(text)?.into_iter().map(|t| t.text).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_english_text() {
        assert_eq!(
            tokenize_text("She first took 2 pieces").unwrap(),
            vec!["she", "first", "took", "2", "pieces"]
        );
    }

    #[test]
    fn empty_text_is_an_error() {
        assert_eq!(tokenize_text(""), Err(TextError::EmptyText));
        assert_eq!(tokenize_text("   "), Err(TextError::EmptyText));
    }

    #[test]
    fn fractions_stay_whole() {
        assert_eq!(tokenize_text("3/4 of a gallon").unwrap(), vec!["3/4", "of", "a", "gallon"]);
    }

    #[test]
    fn punctuation_becomes_tokens() {
        assert_eq!(
            tokenize_text("How many, in all?").unwrap(),
            vec!["how", "many", ",", "in", "all", "?"]
        );
    }

    #[test]
    fn money_percent_and_ordinals_stay_whole() {
        assert_eq!(
            tokenize_text("$20 on the 2nd day: 5% off").unwrap(),
            vec!["$20", "on", "the", "2nd", "day", ":", "5%", "off"]
        );
    }

    #[test]
    fn cjk_splits_per_character_keeping_digit_runs() {
        assert_eq!(tokenize_text("她有23个苹果").unwrap(), vec!["她", "有", "23", "个", "苹", "果"]);
        assert_eq!(tokenize_text("剩3.5千克").unwrap(), vec!["剩", "3.5", "千", "克"]);
    }

    #[test]
    fn spans_point_into_the_source() {
        let toks = tokenize_with_spans("took 2 pieces").unwrap();
        assert_eq!(toks[1].text, "2");
        assert_eq!((toks[1].start, toks[1].end), (5, 6));
    }

    #[test]
    fn determinism() {
        let text = "Aliyah had some candy to give to her 3 children.";
        assert_eq!(tokenize_text(text).unwrap(), tokenize_text(text).unwrap());
    }
}
