//! Rule-based sentence splitter.
//!
//! A boundary is a run of `.`, `!` or `?` (plus any closing quotes or
//! brackets) followed by whitespace and an uppercase letter, optionally
//! behind opening quotes or brackets. A period is not
//! a boundary when the word it ends is a known abbreviation or a single
//! letter (an initial).

/// Lowercased abbreviations, without their trailing period.
pub const ABBREVIATIONS: &[&str] = &[
    "approx", "apr", "aug", "ave", "capt", "cf", "co", "col", "corp", "dec", "dept", "dr", "e.g",
    "est", "feb", "fig", "figs", "gen", "gov", "i.e", "inc", "jan", "jr", "jul", "jun", "lt",
    "ltd", "mar", "mr", "mrs", "ms", "mt", "no", "nov", "oct", "pp", "prof", "rep", "rev", "sen",
    "sep", "sept", "sgt", "sr", "st", "u.k", "u.n", "u.s", "vol", "vs",
];

const TERMINALS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 7] = ['"', '\'', ')', ']', '”', '’', '»'];
const OPENERS: [char; 7] = ['"', '\'', '(', '[', '“', '‘', '«'];

pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !TERMINALS.contains(&c) {
            i += 1;
            continue;
        }
        let terminal_at = i;
        let mut j = i + 1;
        while j < chars.len() && (TERMINALS.contains(&chars[j].1) || CLOSERS.contains(&chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let mut u = k;
        while u < chars.len() && OPENERS.contains(&chars[u].1) {
            u += 1;
        }
        let boundary = k > j
            && u < chars.len()
            && chars[u].1.is_uppercase()
            && !(c == '.' && ends_with_abbreviation(&text[start..chars[terminal_at].0]));
        if boundary {
            push_trimmed(&mut sentences, &text[start..end]);
            start = chars[k].0;
            i = k;
        } else {
            i = j;
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// `before` is the text up to (not including) the period.
fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(['(', '[', '"', '\'', '“', '‘']);
    if word.is_empty() {
        return false;
    }
    let mut letters = word.chars();
    if let (Some(first), None) = (letters.next(), letters.next()) {
        if first.is_alphabetic() {
            return true;
        }
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sentences() {
        assert_eq!(split_sentences("It rains. It pours."), vec!["It rains.", "It pours."]);
    }

    #[test]
    fn abbreviation_guard() {
        // "dr" is in the table, so the period after "Dr" is not a boundary.
        assert!(ABBREVIATIONS.contains(&"dr"));
        assert_eq!(split_sentences("Dr. Smith spoke."), vec!["Dr. Smith spoke."]);
        assert_eq!(
            split_sentences("The U.S. Congress met. Then it left."),
            vec!["The U.S. Congress met.", "Then it left."]
        );
        assert_eq!(split_sentences("J. Smith wrote it."), vec!["J. Smith wrote it."]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n ").is_empty());
    }

    #[test]
    fn other_terminals_and_closers() {
        assert_eq!(
            split_sentences("Is it warm? Yes! \"Very.\" Then rain."),
            vec!["Is it warm?", "Yes!", "\"Very.\"", "Then rain."]
        );
    }

    #[test]
    fn lowercase_continuation_is_not_a_boundary() {
        assert_eq!(split_sentences("Temperatures rose 1.5 deg. in total."), vec![
            "Temperatures rose 1.5 deg. in total."
        ]);
    }

    #[test]
    fn text_without_terminal_is_one_sentence() {
        assert_eq!(split_sentences("  no period here  "), vec!["no period here"]);
    }
}
