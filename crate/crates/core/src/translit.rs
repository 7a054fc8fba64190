//! Roman-to-native-script transliteration: an ordered grapheme rule table
//! drives a maximal-munch transducer, ambiguous rules branch into top-k
//! candidates, and a character n-gram language model reranks them.

pub mod lm;

use std::collections::HashMap;

use crate::corpus::{Corpus, Language, Provenance, Sample};
use crate::error::{Error, Result};
use crate::script::{script_block, tag_tokens, ScriptTag};

pub use lm::CharLm;

/// Default decode parameters.
pub const DEFAULT_K: usize = 4;
pub const DEFAULT_BEAM: usize = 16;
pub const DEFAULT_LM_ORDER: usize = 3;
pub const DEFAULT_LM_ALPHA: f64 = 0.1;

const KANNADA_RULES: &str = include_str!("../data/rules/kannada.tsv");
const TAMIL_RULES: &str = include_str!("../data/rules/tamil.tsv");
const MALAYALAM_RULES: &str = include_str!("../data/rules/malayalam.tsv");

/// Source text of the built-in rule table for `language`.
pub fn default_rules_text(language: Language) -> &'static str {
    match language {
        Language::Kannada => KANNADA_RULES,
        Language::Tamil => TAMIL_RULES,
        Language::Malayalam => MALAYALAM_RULES,
    }
}

/// One grapheme mapping. Entries sharing a roman string are alternatives;
/// the optional group id names the ambiguity they belong to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub roman: String,
    pub native: String,
    pub group: Option<String>,
}

/// An ordered grapheme mapping table for one language. Entry order is
/// significant: the first entry for a roman grapheme is its deterministic
/// reading, later entries are candidate alternatives.
#[derive(Debug, Clone)]
pub struct RuleTable {
    language: Language,
    entries: Vec<Rule>,
    // lowercase roman -> entry indices in table order
    lookup: HashMap<String, Vec<usize>>,
    max_grapheme_len: usize,
}

impl RuleTable {
    pub fn parse(language: Language, text: &str) -> Result<RuleTable> {
        let (lo, hi) = script_block(language);
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `roman<TAB>native[<TAB>group]`".into(),
                });
            }
            let roman = fields[0].trim().to_ascii_lowercase();
            if roman.is_empty() || !roman.is_ascii() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("roman grapheme `{}` must be non-empty ASCII", fields[0]),
                });
            }
            let native = fields[1].trim().to_string();
            if let Some(bad) = native.chars().find(|&c| {
                let cp = c as u32;
                cp < lo || cp > hi
            }) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "native grapheme char U+{:04X} outside the {} block",
                        bad as u32, language
                    ),
                });
            }
            let group = fields
                .get(2)
                .map(|g| g.trim().to_string())
                .filter(|g| !g.is_empty());
            entries.push(Rule {
                roman,
                native,
                group,
            });
        }
        Ok(RuleTable::from_entries(language, entries))
    }

    fn from_entries(language: Language, entries: Vec<Rule>) -> RuleTable {
        let mut lookup: HashMap<String, Vec<usize>> = HashMap::new();
        let mut max_grapheme_len = 0;
        for (i, rule) in entries.iter().enumerate() {
            max_grapheme_len = max_grapheme_len.max(rule.roman.len());
            lookup.entry(rule.roman.clone()).or_default().push(i);
        }
        RuleTable {
            language,
            entries,
            lookup,
            max_grapheme_len,
        }
    }

    pub fn load(language: Language, path: &std::path::Path) -> Result<RuleTable> {
        let text = std::fs::read_to_string(path)?;
        RuleTable::parse(language, &text)
    }

    /// The built-in table shipped for `language`.
    pub fn default_for(language: Language) -> RuleTable {
        RuleTable::parse(language, default_rules_text(language))
            .expect("built-in rule table is valid")
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn entries(&self) -> &[Rule] {
        &self.entries
    }

    pub fn max_grapheme_len(&self) -> usize {
        self.max_grapheme_len
    }

    /// Longest match at byte position `pos` of the lowercased word, with the
    /// first-listed entry winning among same-length alternatives.
    fn longest_match(&self, word: &str, pos: usize) -> Option<(usize, &str)> {
        let remaining = word.len() - pos;
        for len in (1..=self.max_grapheme_len.min(remaining)).rev() {
            if !word.is_char_boundary(pos + len) {
                continue;
            }
            if let Some(indices) = self.lookup.get(&word[pos..pos + len]) {
                return Some((len, &self.entries[indices[0]].native));
            }
        }
        None
    }

    /// All rules applicable at `pos`, ordered longest grapheme first and by
    /// table order within a length. The first element is the deterministic
    /// maximal-munch choice.
    fn matches_at(&self, word: &str, pos: usize) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let remaining = word.len() - pos;
        for len in (1..=self.max_grapheme_len.min(remaining)).rev() {
            if !word.is_char_boundary(pos + len) {
                continue;
            }
            if let Some(indices) = self.lookup.get(&word[pos..pos + len]) {
                for &i in indices {
                    out.push((len, self.entries[i].native.as_str()));
                }
            }
        }
        out
    }
}

/// A scored transliteration hypothesis. Scores are natural-log
/// probabilities; fresh candidates carry 0 until reranked.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

/// Deterministic left-to-right maximal-munch transduction. At each position
/// the longest matching roman grapheme is consumed and its first-listed
/// native grapheme emitted; characters matching no rule pass through.
pub fn apply_rules(word: &str, table: &RuleTable) -> String {
    let lower = word.to_ascii_lowercase();
    let mut out = String::with_capacity(word.len() * 3);
    let mut pos = 0;
    while pos < lower.len() {
        match table.longest_match(&lower, pos) {
            Some((len, native)) => {
                out.push_str(native);
                pos += len;
            }
            None => {
                let c = word[pos..].chars().next().unwrap();
                out.push(c);
                pos += c.len_utf8();
            }
        }
    }
    out
}

/// Expands every rule choice at every position into distinct complete
/// candidates, keeping at most `beam` partial hypotheses and returning at
/// most `k` candidates. The maximal-munch output is always the first
/// candidate; scores are 0 pending reranking.
pub fn generate_candidates(
    word: &str,
    table: &RuleTable,
    beam: usize,
    k: usize,
) -> Result<Vec<Candidate>> {
    if k < 1 || beam < k {
        return Err(Error::contract(format!(
            "generate_candidates requires beam >= k >= 1, got beam={beam}, k={k}"
        )));
    }
    let lower = word.to_ascii_lowercase();

    let mut frontier = vec![Hyp {
        pos: 0,
        text: String::new(),
    }];
    while frontier.iter().any(|h| h.pos < lower.len()) {
        let mut next: Vec<Hyp> = Vec::with_capacity(frontier.len() * 2);
        for hyp in &frontier {
            if hyp.pos >= lower.len() {
                push_unique(&mut next, hyp.clone());
                continue;
            }
            let choices = table.matches_at(&lower, hyp.pos);
            if choices.is_empty() {
                let c = word[hyp.pos..].chars().next().unwrap();
                let mut text = hyp.text.clone();
                text.push(c);
                push_unique(
                    &mut next,
                    Hyp {
                        pos: hyp.pos + c.len_utf8(),
                        text,
                    },
                );
            } else {
                for (len, native) in choices {
                    let mut text = hyp.text.clone();
                    text.push_str(native);
                    push_unique(
                        &mut next,
                        Hyp {
                            pos: hyp.pos + len,
                            text,
                        },
                    );
                }
            }
        }
        next.truncate(beam);
        frontier = next;
    }

    let mut seen = Vec::new();
    let mut out = Vec::new();
    for hyp in frontier {
        if !seen.contains(&hyp.text) {
            seen.push(hyp.text.clone());
            out.push(Candidate {
                text: hyp.text,
                score: 0.0,
            });
            if out.len() == k {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Clone)]
struct Hyp {
    pos: usize,
    text: String,
}

// Distinct rule choices can converge on the same partial output; keeping one
// copy preserves beam capacity for genuinely different hypotheses.
fn push_unique(hyps: &mut Vec<Hyp>, hyp: Hyp) {
    if !hyps.iter().any(|h| h.pos == hyp.pos && h.text == hyp.text) {
        hyps.push(hyp);
    }
}

/// Scores each candidate by mean per-character log-probability under the
/// language model, sorts descending (stable, so equal scores keep their
/// original order) and truncates to `k`.
pub fn rerank(mut candidates: Vec<Candidate>, lm: &CharLm, k: usize) -> Vec<Candidate> {
    for cand in &mut candidates {
        cand.score = lm.mean_log_prob(&cand.text);
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    candidates.truncate(k);
    candidates
}

/// Replaces every Latin-tagged token with its top reranked transliteration
/// candidate; all other tokens and all separators are preserved byte for
/// byte. Applying the function to its own output is the identity.
pub fn transliterate_text(text: &str, table: &RuleTable, lm: &CharLm, k: usize) -> String {
    let k = k.max(1);
    let beam = DEFAULT_BEAM.max(k);
    let mut out = String::with_capacity(text.len() * 2);
    let mut cursor = 0;
    for token in tag_tokens(text) {
        out.push_str(&text[cursor..token.start]);
        if token.tag == ScriptTag::Latin {
            let candidates = generate_candidates(&token.text, table, beam, k)
                .expect("beam >= k >= 1 by construction");
            let ranked = rerank(candidates, lm, k);
            out.push_str(&ranked[0].text);
        } else {
            out.push_str(&token.text);
        }
        cursor = token.end;
    }
    out.push_str(&text[cursor..]);
    out
}

/// Transliterates every sample of a corpus, preserving labels and ids and
/// marking the output provenance as Transliterated.
pub fn transliterate_corpus(corpus: &Corpus, table: &RuleTable, lm: &CharLm, k: usize) -> Corpus {
    let mut out = Corpus::new(corpus.language, corpus.split);
    for sample in &corpus.samples {
        out.samples.push(Sample {
            id: sample.id,
            text: transliterate_text(&sample.text, table, lm, k),
            label: sample.label,
            language: sample.language,
            provenance: Provenance::Transliterated,
        });
    }
    out
}

/// Training lines for a bootstrap language model: the deterministic
/// transliteration of each corpus sample. Used when no curated native-script
/// corpus is available.
pub fn bootstrap_lm_lines(corpus: &Corpus, table: &RuleTable) -> Vec<String> {
    corpus
        .samples
        .iter()
        .map(|s| {
            tag_tokens(&s.text)
                .into_iter()
                .map(|t| {
                    if t.tag == ScriptTag::Latin {
                        apply_rules(&t.text, table)
                    } else {
                        t.text
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
