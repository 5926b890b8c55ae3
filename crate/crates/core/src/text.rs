//! Word tokenization shared by alias normalization, mention detection and the
//! lexical scorer.

/// A lower-cased word with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits `s` into alphanumeric runs. A `.` between two digits stays inside
/// the word so that `257.0` is one token.
pub fn words(s: &str) -> Vec<Word> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i;
        while j < chars.len() {
            let c = chars[j].1;
            if c.is_alphanumeric() {
                j += 1;
            } else if c == '.'
                && j > i
                && chars[j - 1].1.is_ascii_digit()
                && chars.get(j + 1).is_some_and(|(_, n)| n.is_ascii_digit())
            {
                j += 1;
            } else {
                break;
            }
        }
        let end = chars.get(j).map(|(b, _)| *b).unwrap_or(s.len());
        out.push(Word { text: s[start..end].to_lowercase(), start, end });
        i = j;
    }
    out
}

/// Case-folded, whitespace-normalized form used as the alias key.
pub fn normalize(s: &str) -> String {
    words(s).into_iter().map(|w| w.text).collect::<Vec<_>>().join(" ")
}

/// Splits a schema name, entity label or logical form into lower-cased words;
/// `.` and `_` act as separators.
pub fn name_words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_decimals_together() {
        let ws = words("a pressure of less than 257.0, and lox?");
        let texts: Vec<_> = ws.iter().map(|w| w.text.as_str()).collect();
        assert_eq!(texts, ["a", "pressure", "of", "less", "than", "257.0", "and", "lox"]);
        assert_eq!(&"a pressure of less than 257.0, and lox?"[ws[5].start..ws[5].end], "257.0");
    }

    #[test]
    fn trailing_period_is_not_a_decimal() {
        let texts: Vec<_> = words("unit 3.").into_iter().map(|w| w.text).collect();
        assert_eq!(texts, ["unit", "3"]);
    }

    #[test]
    fn normalization_folds_case_and_spacing() {
        assert_eq!(normalize("  New   York "), "new york");
        assert_eq!(name_words("measurement_unit.measurement_system"), ["measurement", "unit", "measurement", "system"]);
    }
}
