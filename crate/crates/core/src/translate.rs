//! The translation stage as a pluggable process boundary: an external
//! line-protocol command, a deterministic dictionary translator for tests,
//! or the identity, all behind a persistent cache.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use sha2::{Digest, Sha256};

use crate::corpus::{Provenance, Sample};
use crate::error::{Error, Result};
use crate::script::tag_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslatorKind {
    ExternalCommand,
    Dictionary,
    Identity,
}

/// Configuration of a translator. The id is a stable hash of the
/// configuration (command line, or dictionary contents) so cached output is
/// never served across different tools.
#[derive(Debug, Clone)]
pub struct TranslatorSpec {
    pub kind: TranslatorKind,
    pub command: Option<Vec<String>>,
    pub dictionary_path: Option<PathBuf>,
    dictionary: Option<HashMap<String, String>>,
    id: String,
}

impl TranslatorSpec {
    pub fn identity() -> TranslatorSpec {
        TranslatorSpec {
            kind: TranslatorKind::Identity,
            command: None,
            dictionary_path: None,
            dictionary: None,
            id: "identity".to_string(),
        }
    }

    pub fn external(argv: Vec<String>) -> Result<TranslatorSpec> {
        if argv.is_empty() {
            return Err(Error::config(
                "external translator requires a non-empty argv",
            ));
        }
        let id = short_hash(&format!("cmd\u{0}{}", argv.join("\u{0}")));
        Ok(TranslatorSpec {
            kind: TranslatorKind::ExternalCommand,
            command: Some(argv),
            dictionary_path: None,
            dictionary: None,
            id,
        })
    }

    /// Reads and validates the dictionary file up front; the id hashes the
    /// file contents, not the path.
    pub fn dictionary(path: &Path) -> Result<TranslatorSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read dictionary {}: {e}", path.display()))
        })?;
        let dict = parse_dictionary(&text)?;
        let id = short_hash(&format!("dict\u{0}{text}"));
        Ok(TranslatorSpec {
            kind: TranslatorKind::Dictionary,
            command: None,
            dictionary_path: Some(path.to_path_buf()),
            dictionary: Some(dict),
            id,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

fn parse_dictionary(text: &str) -> Result<HashMap<String, String>> {
    let mut dict = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (source, target) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: idx + 1,
            msg: "expected `source<TAB>target`".into(),
        })?;
        dict.insert(source.to_string(), target.to_string());
    }
    Ok(dict)
}

fn short_hash(input: &str) -> String {
    let digest = Sha256::digest(input.as_bytes());
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn text_hash(text: &str) -> String {
    short_hash(&format!("src\u{0}{text}"))
}

/// Append-only persistent cache mapping (translator id, source hash) to the
/// translated text. Hits are byte-identical to the original output.
#[derive(Debug)]
pub struct TranslationCache {
    path: PathBuf,
    entries: HashMap<(String, String), String>,
}

impl TranslationCache {
    /// Opens (or creates) the cache file and loads existing entries.
    pub fn open(path: &Path) -> Result<TranslationCache> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = std::fs::File::open(path)?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let mut fields = line.splitn(3, '\t');
                match (fields.next(), fields.next(), fields.next()) {
                    (Some(id), Some(hash), Some(translation)) => {
                        entries.insert((id.to_string(), hash.to_string()), translation.to_string());
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: "cache line needs 3 tab-separated fields".into(),
                        })
                    }
                }
            }
        }
        Ok(TranslationCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, translator_id: &str, source_hash: &str) -> Option<&String> {
        self.entries
            .get(&(translator_id.to_string(), source_hash.to_string()))
    }

    fn insert(&mut self, translator_id: &str, source_hash: &str, translation: &str) -> Result<()> {
        let key = (translator_id.to_string(), source_hash.to_string());
        if self.entries.contains_key(&key) {
            return Ok(());
        }
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        writeln!(file, "{translator_id}\t{source_hash}\t{translation}")?;
        self.entries.insert(key, translation.to_string());
        Ok(())
    }
}

// The line protocol cannot carry newlines or tabs inside a sentence.
fn normalize_line(text: &str) -> String {
    text.replace(['\n', '\r', '\t'], " ")
}

/// Translates a batch of samples, preserving order and labels and marking
/// outputs as Translated. The cache is consulted before the translator is
/// invoked and updated afterwards; a warm cache means the external command
/// is never spawned.
pub fn translate_batch(
    samples: &[Sample],
    spec: &TranslatorSpec,
    cache: &mut TranslationCache,
) -> Result<Vec<Sample>> {
    if let Some(bad) = samples
        .iter()
        .find(|s| s.provenance == Provenance::Translated)
    {
        return Err(Error::contract(format!(
            "sample {} already has provenance translated",
            bad.id
        )));
    }

    let lines: Vec<String> = samples.iter().map(|s| normalize_line(&s.text)).collect();
    let hashes: Vec<String> = lines.iter().map(|l| text_hash(l)).collect();

    // distinct uncached sentences, in first-seen order
    let mut pending: Vec<(String, String)> = Vec::new();
    for (line, hash) in lines.iter().zip(&hashes) {
        if cache.get(spec.id(), hash).is_none() && !pending.iter().any(|(h, _)| h == hash) {
            pending.push((hash.clone(), line.clone()));
        }
    }

    if !pending.is_empty() {
        let sources: Vec<&str> = pending.iter().map(|(_, l)| l.as_str()).collect();
        let outputs = match spec.kind {
            TranslatorKind::Identity => sources.iter().map(|s| s.to_string()).collect(),
            TranslatorKind::Dictionary => {
                let dict = spec
                    .dictionary
                    .as_ref()
                    .ok_or_else(|| Error::config("dictionary translator has no dictionary"))?;
                sources
                    .iter()
                    .map(|s| dictionary_translate(s, dict))
                    .collect::<Vec<_>>()
            }
            TranslatorKind::ExternalCommand => {
                let argv = spec
                    .command
                    .as_ref()
                    .ok_or_else(|| Error::config("external translator has no command"))?;
                run_line_protocol(argv, &sources)?
            }
        };
        debug_assert_eq!(outputs.len(), sources.len());
        for ((hash, _), translation) in pending.iter().zip(&outputs) {
            cache.insert(spec.id(), hash, translation)?;
        }
    }

    let mut out = Vec::with_capacity(samples.len());
    for (sample, hash) in samples.iter().zip(&hashes) {
        let translation = cache.get(spec.id(), hash).ok_or_else(|| {
            Error::contract(format!("cache miss after fill for sample {}", sample.id))
        })?;
        out.push(Sample {
            id: sample.id,
            text: translation.clone(),
            label: sample.label,
            language: sample.language,
            provenance: Provenance::Translated,
        });
    }
    Ok(out)
}

/// Runs the external command once: one sentence per line on its stdin, one
/// translation per line expected on its stdout. A non-zero exit aborts the
/// batch; a line-count mismatch is a protocol error.
fn run_line_protocol(argv: &[String], sources: &[&str]) -> Result<Vec<String>> {
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::config(format!("cannot spawn translator {}: {e}", argv[0])))?;

    let mut stdin = child.stdin.take().expect("stdin piped");
    let mut stdout = child.stdout.take().expect("stdout piped");
    let mut stderr = child.stderr.take().expect("stderr piped");

    let input: String = sources.iter().map(|s| format!("{s}\n")).collect();
    let (raw_output, raw_stderr) = std::thread::scope(|scope| {
        // Writing and reading concurrently avoids a deadlock when the batch
        // exceeds the pipe buffer. The child may close its stdin early
        // (e.g. `head`); that surfaces as a count mismatch below.
        scope.spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
        let err_reader = scope.spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });
        let mut buf = String::new();
        let read = stdout.read_to_string(&mut buf);
        (read.map(|_| buf), err_reader.join().unwrap_or_default())
    });

    let status = child.wait()?;
    if !status.success() {
        return Err(Error::TranslatorFailed {
            status: status.to_string(),
            stderr: raw_stderr.trim_end().to_string(),
        });
    }
    let output = raw_output?;
    let received: Vec<String> = output.lines().map(|l| l.to_string()).collect();
    if received.len() != sources.len() {
        return Err(Error::TranslatorProtocol {
            sent: sources.len(),
            received: received.len(),
        });
    }
    Ok(received)
}

/// Word-by-word dictionary lookup: whitespace tokens are looked up
/// case-sensitively, out-of-vocabulary tokens pass through, separators are
/// preserved.
pub fn dictionary_translate(text: &str, dictionary: &HashMap<String, String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for token in tag_tokens(text) {
        out.push_str(&text[cursor..token.start]);
        match dictionary.get(&token.text) {
            Some(target) => out.push_str(target),
            None => out.push_str(&token.text),
        }
        cursor = token.end;
    }
    out.push_str(&text[cursor..]);
    out
}
