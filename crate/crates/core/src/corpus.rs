//! Corpus ingestion, label normalization, preprocessing and the four dataset
//! variants (TRA / TRAI / TRAA / MERGED).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five sentiment classes. Declaration order is the fixed tie-break
/// order used by classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    MixedFeelings,
    UnknownState,
    NotLanguage,
}

pub const LABELS: [Label; 5] = [
    Label::Positive,
    Label::Negative,
    Label::MixedFeelings,
    Label::UnknownState,
    Label::NotLanguage,
];

impl Label {
    /// Canonical spelling, matching the raw dataset conventions.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "Positive",
            Label::Negative => "Negative",
            Label::MixedFeelings => "Mixed_feelings",
            Label::UnknownState => "unknown_state",
            Label::NotLanguage => "not-language",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Parses a raw label string. Matching is case-insensitive and any
    /// label starting with "not-" maps to NotLanguage.
    pub fn parse(raw: &str) -> Option<Label> {
        let lower = raw.trim().to_ascii_lowercase();
        match lower.as_str() {
            "positive" => Some(Label::Positive),
            "negative" => Some(Label::Negative),
            "mixed_feelings" => Some(Label::MixedFeelings),
            "unknown_state" => Some(Label::UnknownState),
            _ if lower.starts_with("not-") => Some(Label::NotLanguage),
            _ => None,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Kannada,
    Tamil,
    Malayalam,
}

pub const LANGUAGES: [Language; 3] = [Language::Kannada, Language::Tamil, Language::Malayalam];

impl Language {
    pub fn name(self) -> &'static str {
        match self {
            Language::Kannada => "kannada",
            Language::Tamil => "tamil",
            Language::Malayalam => "malayalam",
        }
    }

    pub fn parse(s: &str) -> Option<Language> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kannada" | "kn" => Some(Language::Kannada),
            "tamil" | "ta" => Some(Language::Tamil),
            "malayalam" | "ml" => Some(Language::Malayalam),
            _ => None,
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Some(Split::Train),
            "dev" | "development" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Where a sample's text came from: the raw dataset, the transliteration
/// stage, or the translation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Transliterated,
    Translated,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Transliterated => "transliterated",
            Provenance::Translated => "translated",
        }
    }

    pub fn parse(s: &str) -> Option<Provenance> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Some(Provenance::Original),
            "transliterated" => Some(Provenance::Transliterated),
            "translated" => Some(Provenance::Translated),
            _ => None,
        }
    }
}

/// One annotated comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: u32,
    pub text: String,
    pub label: Label,
    pub language: Language,
    pub provenance: Provenance,
}

/// An ordered collection of samples sharing a language and split. Order is
/// ingestion order and is never shuffled at this layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    pub language: Language,
    pub split: Split,
}

impl Corpus {
    pub fn new(language: Language, split: Split) -> Self {
        Corpus {
            samples: Vec::new(),
            language,
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The four training-set variants built from the base corpus and its
/// augmented counterparts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VariantId {
    Tra,
    Trai,
    Traa,
    Merged,
}

pub const VARIANTS: [VariantId; 4] = [
    VariantId::Tra,
    VariantId::Trai,
    VariantId::Traa,
    VariantId::Merged,
];

impl VariantId {
    pub fn name(self) -> &'static str {
        match self {
            VariantId::Tra => "TRA",
            VariantId::Trai => "TRAI",
            VariantId::Traa => "TRAA",
            VariantId::Merged => "MERGED",
        }
    }

    pub fn parse(s: &str) -> Option<VariantId> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tra" => Some(VariantId::Tra),
            "trai" => Some(VariantId::Trai),
            "traa" => Some(VariantId::Traa),
            "merged" => Some(VariantId::Merged),
            _ => None,
        }
    }
}

impl std::fmt::Display for VariantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class sample counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub total: usize,
    pub per_class: BTreeMap<Label, usize>,
}

impl CorpusStats {
    pub fn count(&self, label: Label) -> usize {
        self.per_class.get(&label).copied().unwrap_or(0)
    }

    /// Fraction of the corpus carrying `label`; 0 for an empty corpus.
    pub fn share(&self, label: Label) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(label) as f64 / self.total as f64
        }
    }
}

/// Loads a corpus from TSV: `text<TAB>label[<TAB>provenance]`, UTF-8, one
/// record per line. `skip_header` drops the first line.
pub fn load_tsv<R: BufRead>(
    reader: R,
    language: Language,
    split: Split,
    skip_header: bool,
) -> Result<Corpus> {
    let mut corpus = Corpus::new(language, split);
    let mut id = 0u32;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        if skip_header && idx == 0 {
            continue;
        }
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected `text<TAB>label`, found no tab".into(),
            });
        }
        if fields.len() > 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "expected 2 or 3 tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let text = fields[0].trim();
        if text.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty text field".into(),
            });
        }
        let label = Label::parse(fields[1]).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("unknown label `{}`", fields[1].trim()),
        })?;
        let provenance = match fields.get(2) {
            Some(raw) => Provenance::parse(raw).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unknown provenance `{}`", raw.trim()),
            })?,
            None => Provenance::Original,
        };
        corpus.samples.push(Sample {
            id,
            text: text.to_string(),
            label,
            language,
            provenance,
        });
        id += 1;
    }
    Ok(corpus)
}

/// Writes a corpus back out as TSV. With `with_provenance` a third column
/// records each sample's provenance.
pub fn write_tsv<W: Write>(corpus: &Corpus, mut writer: W, with_provenance: bool) -> Result<()> {
    for sample in &corpus.samples {
        if with_provenance {
            writeln!(
                writer,
                "{}\t{}\t{}",
                sample.text,
                sample.label,
                sample.provenance.name()
            )?;
        } else {
            writeln!(writer, "{}\t{}", sample.text, sample.label)?;
        }
    }
    Ok(())
}

// Tokens stripped from the end of a comment: bare language names and their
// "not-" forms, matched case-insensitively.
fn is_language_tag_token(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    let base = lower.strip_prefix("not-").unwrap_or(&lower);
    matches!(base, "kannada" | "tamil" | "malayalam")
}

fn strip_bracketed_spans(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut closer: Option<char> = None;
    let mut opener = ' ';
    let mut depth = 0usize;
    for c in text.chars() {
        match closer {
            Some(close) => {
                if c == opener {
                    depth += 1;
                } else if c == close {
                    depth -= 1;
                    if depth == 0 {
                        closer = None;
                    }
                }
            }
            None => match c {
                '[' => {
                    opener = '[';
                    closer = Some(']');
                    depth = 1;
                }
                '(' => {
                    opener = '(';
                    closer = Some(')');
                    depth = 1;
                }
                _ => out.push(c),
            },
        }
    }
    out
}

fn preprocess_text(text: &str) -> String {
    let stripped = strip_bracketed_spans(text);
    let mut tokens: Vec<&str> = stripped.split_whitespace().collect();
    while let Some(last) = tokens.last() {
        if is_language_tag_token(last) {
            tokens.pop();
        } else {
            break;
        }
    }
    tokens.join(" ")
}

/// Applies the preprocessing used before transliteration: drops NotLanguage
/// samples, strips bracketed spans and trailing language-tag tokens, and
/// re-normalizes whitespace. Samples whose text becomes empty are dropped.
/// The input corpus is left untouched; the operation is idempotent.
pub fn preprocess_for_translit(corpus: &Corpus) -> Corpus {
    let mut out = Corpus::new(corpus.language, corpus.split);
    for sample in &corpus.samples {
        if sample.label == Label::NotLanguage {
            continue;
        }
        let text = preprocess_text(&sample.text);
        if text.is_empty() {
            continue;
        }
        out.samples.push(Sample {
            id: sample.id,
            text,
            label: sample.label,
            language: sample.language,
            provenance: sample.provenance,
        });
    }
    out
}

/// Concatenates the base corpus with its augmented counterparts according to
/// `variant`. The parts a variant actually uses must carry the matching
/// provenance and language; samples are renumbered with fresh ids.
pub fn build_variant(
    variant: VariantId,
    base: &Corpus,
    transliterated: &Corpus,
    translated: &Corpus,
) -> Result<Corpus> {
    let check = |part: &Corpus, want: Provenance, name: &str| -> Result<()> {
        if part.language != base.language {
            return Err(Error::contract(format!(
                "{name} corpus language {} does not match base language {}",
                part.language, base.language
            )));
        }
        if let Some(s) = part.samples.iter().find(|s| s.provenance != want) {
            return Err(Error::contract(format!(
                "{name} corpus sample {} has provenance {}, expected {}",
                s.id,
                s.provenance.name(),
                want.name()
            )));
        }
        Ok(())
    };

    let mut parts: Vec<&Corpus> = vec![base];
    match variant {
        VariantId::Tra => {}
        VariantId::Trai => {
            check(transliterated, Provenance::Transliterated, "transliterated")?;
            parts.push(transliterated);
        }
        VariantId::Traa => {
            check(translated, Provenance::Translated, "translated")?;
            parts.push(translated);
        }
        VariantId::Merged => {
            check(transliterated, Provenance::Transliterated, "transliterated")?;
            check(translated, Provenance::Translated, "translated")?;
            parts.push(transliterated);
            parts.push(translated);
        }
    }

    let mut out = Corpus::new(base.language, base.split);
    let mut id = 0u32;
    for part in parts {
        for sample in &part.samples {
            out.samples.push(Sample {
                id,
                ..sample.clone()
            });
            id += 1;
        }
    }
    Ok(out)
}

/// Exact per-class counts; they always sum to the total.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_class = BTreeMap::new();
    for label in LABELS {
        per_class.insert(label, 0usize);
    }
    for sample in &corpus.samples {
        *per_class.get_mut(&sample.label).unwrap() += 1;
    }
    CorpusStats {
        total: corpus.len(),
        per_class,
    }
}
