//! Writing-system classification for characters and whitespace tokens.
//!
//! The corpora mix Roman-script text with native Kannada, Tamil and Malayalam
//! script; the transliterator needs to know which tokens are which.

use crate::corpus::Language;

/// Script class of a character or token. Classification is total: every
/// Unicode scalar value receives exactly one tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScriptTag {
    Latin,
    Kannada,
    Tamil,
    Malayalam,
    Digit,
    Punct,
    Other,
}

impl ScriptTag {
    pub fn name(self) -> &'static str {
        match self {
            ScriptTag::Latin => "latin",
            ScriptTag::Kannada => "kannada",
            ScriptTag::Tamil => "tamil",
            ScriptTag::Malayalam => "malayalam",
            ScriptTag::Digit => "digit",
            ScriptTag::Punct => "punct",
            ScriptTag::Other => "other",
        }
    }

    /// True for the four letter-bearing script classes.
    pub fn is_letter(self) -> bool {
        matches!(
            self,
            ScriptTag::Latin | ScriptTag::Kannada | ScriptTag::Tamil | ScriptTag::Malayalam
        )
    }

    /// The tag native text of `language` carries.
    pub fn for_language(language: Language) -> ScriptTag {
        match language {
            Language::Kannada => ScriptTag::Kannada,
            Language::Tamil => ScriptTag::Tamil,
            Language::Malayalam => ScriptTag::Malayalam,
        }
    }
}

impl std::fmt::Display for ScriptTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Unicode block for the native script of `language`, as an inclusive range.
pub fn script_block(language: Language) -> (u32, u32) {
    match language {
        Language::Kannada => (0x0C80, 0x0CFF),
        Language::Tamil => (0x0B80, 0x0BFF),
        Language::Malayalam => (0x0D00, 0x0D7F),
    }
}

/// Classifies a single character.
pub fn classify_char(c: char) -> ScriptTag {
    let cp = c as u32;
    if c.is_ascii_alphabetic() {
        ScriptTag::Latin
    } else if (0x0C80..=0x0CFF).contains(&cp) {
        ScriptTag::Kannada
    } else if (0x0B80..=0x0BFF).contains(&cp) {
        ScriptTag::Tamil
    } else if (0x0D00..=0x0D7F).contains(&cp) {
        ScriptTag::Malayalam
    } else if c.is_numeric() {
        ScriptTag::Digit
    } else if c.is_ascii_punctuation() {
        ScriptTag::Punct
    } else {
        ScriptTag::Other
    }
}

/// A whitespace-delimited token with its script tag and byte range in the
/// source text. Ranges are non-overlapping and ordered, so the source can be
/// reconstructed from the tokens plus the inter-token separators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub text: String,
    pub tag: ScriptTag,
    pub start: usize,
    pub end: usize,
}

/// Splits `text` on whitespace and tags each token by the majority script of
/// its letters. Letter ties resolve to the first-seen script in the token.
/// Tokens without letters are tagged Digit, Punct or Other by content.
pub fn tag_tokens(text: &str) -> Vec<TaggedToken> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        // skip whitespace
        let rest = &text[i..];
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_whitespace() => {
                i += c.len_utf8();
                continue;
            }
            None => break,
            _ => {}
        }
        // consume token
        let start = i;
        let mut end = text.len();
        for (off, c) in text[start..].char_indices() {
            if c.is_whitespace() {
                end = start + off;
                break;
            }
        }
        let tok = &text[start..end];
        tokens.push(TaggedToken {
            text: tok.to_string(),
            tag: tag_single_token(tok),
            start,
            end,
        });
        i = end;
    }
    tokens
}

fn tag_single_token(token: &str) -> ScriptTag {
    let mut letter_counts: Vec<(ScriptTag, usize)> = Vec::new();
    let mut digits = 0usize;
    let mut puncts = 0usize;
    for c in token.chars() {
        let tag = classify_char(c);
        if tag.is_letter() {
            match letter_counts.iter_mut().find(|(t, _)| *t == tag) {
                Some((_, n)) => *n += 1,
                None => letter_counts.push((tag, 1)),
            }
        } else if tag == ScriptTag::Digit {
            digits += 1;
        } else if tag == ScriptTag::Punct {
            puncts += 1;
        }
    }
    if !letter_counts.is_empty() {
        // majority script; ties go to the first-seen script, which the
        // insertion order of letter_counts preserves.
        let mut best = letter_counts[0];
        for &(tag, n) in &letter_counts[1..] {
            if n > best.1 {
                best = (tag, n);
            }
        }
        best.0
    } else if digits > 0 && digits >= puncts {
        ScriptTag::Digit
    } else if puncts > 0 {
        ScriptTag::Punct
    } else {
        ScriptTag::Other
    }
}

/// Majority script tag over letter-bearing tokens. Empty or letter-free text
/// yields Other; any tie between scripts resolves to Latin, the dominant
/// script of these corpora.
pub fn dominant_script(text: &str) -> ScriptTag {
    let mut counts: Vec<(ScriptTag, usize)> = Vec::new();
    for token in tag_tokens(text) {
        if token.tag.is_letter() {
            match counts.iter_mut().find(|(t, _)| *t == token.tag) {
                Some((_, n)) => *n += 1,
                None => counts.push((token.tag, 1)),
            }
        }
    }
    if counts.is_empty() {
        return ScriptTag::Other;
    }
    let max = counts.iter().map(|&(_, n)| n).max().unwrap();
    let leaders: Vec<ScriptTag> = counts
        .iter()
        .filter(|&&(_, n)| n == max)
        .map(|&(t, _)| t)
        .collect();
    if leaders.len() == 1 {
        leaders[0]
    } else {
        ScriptTag::Latin
    }
}
