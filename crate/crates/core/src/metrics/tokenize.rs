use serde::{Deserialize, Serialize};

/// Characters split off into their own tokens unless wedged between two digits.
const SPLIT_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '(', ')', '"'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// Whitespace normalization, punctuation splitting, then split on spaces.
    #[default]
    Default,
    /// Every non-whitespace character is a token. Intended for Chinese and Japanese.
    Char,
}

impl Tokenizer {
    pub fn signature(self) -> &'static str {
        match self {
            Tokenizer::Default => "tok:default-v1",
            Tokenizer::Char => "tok:char-v1",
        }
    }
}

pub fn tokenize(text: &str, tokenizer: Tokenizer, lowercase: bool) -> Vec<String> {
    let text = if lowercase { text.to_lowercase() } else { text.to_string() };
    match tokenizer {
        Tokenizer::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        Tokenizer::Default => {
            let chars: Vec<char> = text
                .split(char::is_whitespace)
                .filter(|w| !w.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
                .chars()
                .collect();
            let mut spaced = String::with_capacity(chars.len() + 8);
            for (i, &c) in chars.iter().enumerate() {
                let between_digits = i > 0
                    && chars[i - 1].is_ascii_digit()
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                if SPLIT_PUNCTUATION.contains(&c) && !between_digits {
                    spaced.push(' ');
                    spaced.push(c);
                    spaced.push(' ');
                } else {
                    spaced.push(c);
                }
            }
            spaced.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s, Tokenizer::Default, false)
    }

    #[test]
    fn whitespace_is_normalized() {
        assert_eq!(toks("  a\t\u{00a0}b\n\u{3000}c "), vec!["a", "b", "c"]);
        assert!(toks(" \t\n").is_empty());
    }

    #[test]
    fn punctuation_is_split() {
        assert_eq!(toks("Hello, world!"), vec!["Hello", ",", "world", "!"]);
        assert_eq!(toks("(\"quoted\")"), vec!["(", "\"", "quoted", "\"", ")"]);
        assert_eq!(toks("end.Start"), vec!["end", ".", "Start"]);
    }

    #[test]
    fn numbers_keep_their_separators() {
        assert_eq!(toks("pi is 3.14, or 1,000."), vec!["pi", "is", "3.14", ",", "or", "1,000", "."]);
        assert_eq!(toks("at 10:30"), vec!["at", "10:30"]);
        assert_eq!(toks("3."), vec!["3", "."]);
    }

    #[test]
    fn other_characters_stay_attached() {
        assert_eq!(toks("don't re-use"), vec!["don't", "re-use"]);
    }

    #[test]
    fn char_mode_and_lowercase() {
        assert_eq!(tokenize("日本 語", Tokenizer::Char, false), vec!["日", "本", "語"]);
        assert_eq!(tokenize("The Cat", Tokenizer::Default, true), vec!["the", "cat"]);
    }
}
