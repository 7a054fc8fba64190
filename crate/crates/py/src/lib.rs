//! Python bindings exposing the pipeline's main types and operations.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use codemix::corpus::{self, corpus_stats, CorpusStats, Label, Language, Split, VariantId};
use codemix::error::Error;
use codemix::eval::{per_class_metrics, weighted_average, ConfusionMatrix};
use codemix::learn::{
    self, FeatureSpace, Model, ModelFile, StlrParams, TrainConfig, UnfreezeSchedule,
};
use codemix::runner::{self, ExperimentConfig};
use codemix::script;
use codemix::translate::{self, TranslationCache, TranslatorSpec};
use codemix::translit;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Parse { .. } | Error::Contract(_) | Error::Config(_) => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_language(name: &str) -> PyResult<Language> {
    Language::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown language `{name}`")))
}

fn parse_label(name: &str) -> PyResult<Label> {
    Label::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown label `{name}`")))
}

#[pyclass(name = "Corpus")]
struct PyCorpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Load a `text<TAB>label[<TAB>provenance]` TSV file.
    #[staticmethod]
    #[pyo3(signature = (path, lang, split="train", header=false))]
    fn load(path: PathBuf, lang: &str, split: &str, header: bool) -> PyResult<PyCorpus> {
        let language = parse_language(lang)?;
        let split = Split::parse(split)
            .ok_or_else(|| PyValueError::new_err(format!("unknown split `{split}`")))?;
        let file = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let inner = corpus::load_tsv(std::io::BufReader::new(file), language, split, header)
            .map_err(to_py)?;
        Ok(PyCorpus { inner })
    }

    #[pyo3(signature = (path, provenance=true))]
    fn save(&self, path: PathBuf, provenance: bool) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        corpus::write_tsv(&self.inner, file, provenance).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn language(&self) -> String {
        self.inner.language.name().to_string()
    }

    fn texts(&self) -> Vec<String> {
        self.inner.samples.iter().map(|s| s.text.clone()).collect()
    }

    fn labels(&self) -> Vec<String> {
        self.inner
            .samples
            .iter()
            .map(|s| s.label.to_string())
            .collect()
    }

    /// Per-class counts as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let stats: CorpusStats = corpus_stats(&self.inner);
        let dict = PyDict::new(py);
        dict.set_item("total", stats.total)?;
        for (label, count) in &stats.per_class {
            dict.set_item(label.to_string(), count)?;
        }
        Ok(dict)
    }

    /// Drop NotLanguage rows, strip bracketed spans and trailing language
    /// tags, re-normalize whitespace.
    fn preprocess(&self) -> PyCorpus {
        PyCorpus {
            inner: corpus::preprocess_for_translit(&self.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(language={}, split={}, samples={})",
            self.inner.language.name(),
            self.inner.split.name(),
            self.inner.len()
        )
    }
}

#[pyfunction]
fn build_variant(
    variant: &str,
    base: &PyCorpus,
    transliterated: &PyCorpus,
    translated: &PyCorpus,
) -> PyResult<PyCorpus> {
    let id = VariantId::parse(variant)
        .ok_or_else(|| PyValueError::new_err(format!("unknown variant `{variant}`")))?;
    corpus::build_variant(id, &base.inner, &transliterated.inner, &translated.inner)
        .map(|inner| PyCorpus { inner })
        .map_err(to_py)
}

#[pyclass(name = "RuleTable")]
struct PyRuleTable {
    inner: translit::RuleTable,
}

#[pymethods]
impl PyRuleTable {
    /// The built-in table for a language.
    #[staticmethod]
    fn default(lang: &str) -> PyResult<PyRuleTable> {
        Ok(PyRuleTable {
            inner: translit::RuleTable::default_for(parse_language(lang)?),
        })
    }

    #[staticmethod]
    fn load(lang: &str, path: PathBuf) -> PyResult<PyRuleTable> {
        translit::RuleTable::load(parse_language(lang)?, &path)
            .map(|inner| PyRuleTable { inner })
            .map_err(to_py)
    }

    /// Deterministic maximal-munch transliteration of one word.
    fn apply(&self, word: &str) -> String {
        translit::apply_rules(word, &self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.entries().len()
    }
}

#[pyclass(name = "CharLm")]
struct PyCharLm {
    inner: translit::CharLm,
}

#[pymethods]
impl PyCharLm {
    #[staticmethod]
    #[pyo3(signature = (lines, order=3, alpha=0.1))]
    fn train(lines: Vec<String>, order: usize, alpha: f64) -> PyResult<PyCharLm> {
        translit::CharLm::train(&lines, order, alpha)
            .map(|inner| PyCharLm { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyCharLm> {
        translit::CharLm::load(&path)
            .map(|inner| PyCharLm { inner })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Mean per-character log-probability of a string.
    fn score(&self, text: &str) -> f64 {
        self.inner.mean_log_prob(text)
    }
}

/// Top-k transliteration candidates for one word, reranked by the LM.
#[pyfunction]
#[pyo3(signature = (word, table, lm, beam=16, k=4))]
fn candidates(
    word: &str,
    table: &PyRuleTable,
    lm: &PyCharLm,
    beam: usize,
    k: usize,
) -> PyResult<Vec<(String, f64)>> {
    let raw = translit::generate_candidates(word, &table.inner, beam, k).map_err(to_py)?;
    Ok(translit::rerank(raw, &lm.inner, k)
        .into_iter()
        .map(|c| (c.text, c.score))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (text, table, lm, k=4))]
fn transliterate(text: &str, table: &PyRuleTable, lm: &PyCharLm, k: usize) -> String {
    translit::transliterate_text(text, &table.inner, &lm.inner, k)
}

#[pyfunction]
#[pyo3(signature = (corpus, table, lm, k=4))]
fn transliterate_corpus(
    corpus: &PyCorpus,
    table: &PyRuleTable,
    lm: &PyCharLm,
    k: usize,
) -> PyCorpus {
    PyCorpus {
        inner: translit::transliterate_corpus(&corpus.inner, &table.inner, &lm.inner, k),
    }
}

#[pyfunction]
fn dictionary_translate(text: &str, dictionary: HashMap<String, String>) -> String {
    translate::dictionary_translate(text, &dictionary)
}

/// Translate a corpus through the identity, dictionary or external-command
/// translator, with the persistent cache at `cache_path`.
#[pyfunction]
#[pyo3(signature = (corpus, cache_path, kind="identity", dictionary=None, command=None))]
fn translate_corpus(
    corpus: &PyCorpus,
    cache_path: PathBuf,
    kind: &str,
    dictionary: Option<PathBuf>,
    command: Option<Vec<String>>,
) -> PyResult<PyCorpus> {
    let spec = match kind {
        "identity" => TranslatorSpec::identity(),
        "dictionary" => {
            let path = dictionary
                .ok_or_else(|| PyValueError::new_err("dictionary kind needs `dictionary=`"))?;
            TranslatorSpec::dictionary(&path).map_err(to_py)?
        }
        "command" => {
            let argv =
                command.ok_or_else(|| PyValueError::new_err("command kind needs `command=`"))?;
            TranslatorSpec::external(argv).map_err(to_py)?
        }
        other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
    };
    let mut cache = TranslationCache::open(&cache_path).map_err(to_py)?;
    let samples =
        translate::translate_batch(&corpus.inner.samples, &spec, &mut cache).map_err(to_py)?;
    let mut inner = corpus::Corpus::new(corpus.inner.language, corpus.inner.split);
    inner.samples = samples;
    Ok(PyCorpus { inner })
}

#[pyclass(name = "FeatureSpace")]
struct PyFeatureSpace {
    inner: FeatureSpace,
}

#[pymethods]
impl PyFeatureSpace {
    #[new]
    #[pyo3(signature = (ngram_lo=1, ngram_hi=3, word_unigrams=true, dim_log2=15))]
    fn new(ngram_lo: usize, ngram_hi: usize, word_unigrams: bool, dim_log2: u32) -> PyResult<Self> {
        FeatureSpace::new(ngram_lo, ngram_hi, word_unigrams, 1usize << dim_log2)
            .map(|inner| PyFeatureSpace { inner })
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }
}

#[pyclass(name = "Model")]
struct PyModel {
    inner: ModelFile,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyModel> {
        learn::load_model(&path)
            .map(|inner| PyModel { inner })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        learn::save_model(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.model {
            Model::Nb(_) => "nb",
            Model::Mlp(_) => "mlp",
        }
    }

    /// Predicted label and the 5 class scores in fixed label order.
    fn predict(&self, text: &str) -> PyResult<(String, Vec<f64>)> {
        let (label, scores) =
            learn::predict(&self.inner.model, text, &self.inner.space).map_err(to_py)?;
        Ok((label.to_string(), scores.to_vec()))
    }
}

#[pyfunction]
#[pyo3(signature = (corpus, space, alpha=1.0))]
fn train_nb(corpus: &PyCorpus, space: &PyFeatureSpace, alpha: f64) -> PyResult<PyModel> {
    let model = learn::train_nb(&corpus.inner, &space.inner, alpha).map_err(to_py)?;
    Ok(PyModel {
        inner: ModelFile {
            space: space.inner,
            model: Model::Nb(model),
            language: Some(corpus.inner.language),
            variant: None,
        },
    })
}

#[pyfunction]
#[pyo3(signature = (
    corpus, space, epochs=5, batch_size=32, lr_max=0.05, ratio=32.0, cut_frac=0.1,
    decay=2.6, dropout=0.4, seed=0, hidden0=64, hidden1=32, max_len=128
))]
#[allow(clippy::too_many_arguments)]
fn train_mlp(
    corpus: &PyCorpus,
    space: &PyFeatureSpace,
    epochs: usize,
    batch_size: usize,
    lr_max: f64,
    ratio: f64,
    cut_frac: f64,
    decay: f64,
    dropout: f64,
    seed: u64,
    hidden0: usize,
    hidden1: usize,
    max_len: usize,
) -> PyResult<PyModel> {
    let config = TrainConfig {
        batch_size,
        epochs,
        base_lr: lr_max,
        max_len,
        seed,
        decay,
        dropout,
        weight_decay: 0.0,
        hidden0,
        hidden1,
    };
    let stlr = StlrParams::for_run(
        lr_max,
        ratio,
        cut_frac,
        corpus.inner.len(),
        batch_size,
        epochs,
    )
    .map_err(to_py)?;
    let unfreeze = UnfreezeSchedule::gradual(learn::mlp::GROUPS, epochs);
    let model =
        learn::train_mlp(&corpus.inner, &space.inner, &config, &stlr, &unfreeze).map_err(to_py)?;
    Ok(PyModel {
        inner: ModelFile {
            space: space.inner,
            model: Model::Mlp(model),
            language: Some(corpus.inner.language),
            variant: None,
        },
    })
}

/// Slanted triangular learning rate at step `t`.
#[pyfunction]
fn stlr_lr(t: usize, lr_max: f64, ratio: f64, cut_frac: f64, total_steps: usize) -> PyResult<f64> {
    let params = StlrParams::new(lr_max, ratio, cut_frac, total_steps).map_err(to_py)?;
    learn::stlr_lr(t, &params).map_err(to_py)
}

#[pyfunction]
fn discriminative_lrs(base_lr: f64, groups: usize, decay: f64) -> Vec<f64> {
    learn::discriminative_lrs(base_lr, groups, decay)
}

/// Weighted and per-class precision/recall/F1 over label-name pairs.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    gold: Vec<String>,
    pred: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let gold: Vec<Label> = gold
        .iter()
        .map(|s| parse_label(s))
        .collect::<PyResult<_>>()?;
    let pred: Vec<Label> = pred
        .iter()
        .map(|s| parse_label(s))
        .collect::<PyResult<_>>()?;
    let matrix = ConfusionMatrix::from_pairs(&gold, &pred).map_err(to_py)?;
    let per_class = per_class_metrics(&matrix);
    let (p, r, f1) = weighted_average(&per_class).map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item("precision", p)?;
    dict.set_item("recall", r)?;
    dict.set_item("f1", f1)?;
    dict.set_item("accuracy", matrix.accuracy())?;
    let classes = PyDict::new(py);
    for m in per_class {
        let row = PyDict::new(py);
        row.set_item("precision", m.precision)?;
        row.set_item("recall", m.recall)?;
        row.set_item("f1", m.f1)?;
        row.set_item("support", m.support)?;
        classes.set_item(m.label.to_string(), row)?;
    }
    dict.set_item("per_class", classes)?;
    Ok(dict)
}

#[pyfunction]
fn script_tag(text: &str) -> Vec<(String, String)> {
    script::tag_tokens(text)
        .into_iter()
        .map(|t| (t.text, t.tag.name().to_string()))
        .collect()
}

#[pyfunction]
fn dominant_script(text: &str) -> String {
    script::dominant_script(text).name().to_string()
}

/// Run the full experiment grid from a TOML config; returns the rendered
/// report text. Artifacts land in the config's output directory.
#[pyfunction]
fn run_grid(config_path: PathBuf) -> PyResult<String> {
    let config = ExperimentConfig::from_toml_file(&config_path).map_err(to_py)?;
    let (report, _) = runner::run_grid(&config).map_err(to_py)?;
    report.render_text().map_err(to_py)
}

#[pymodule]
fn codemix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyRuleTable>()?;
    m.add_class::<PyCharLm>()?;
    m.add_class::<PyFeatureSpace>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(build_variant, m)?)?;
    m.add_function(wrap_pyfunction!(candidates, m)?)?;
    m.add_function(wrap_pyfunction!(transliterate, m)?)?;
    m.add_function(wrap_pyfunction!(transliterate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(dictionary_translate, m)?)?;
    m.add_function(wrap_pyfunction!(translate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(train_nb, m)?)?;
    m.add_function(wrap_pyfunction!(train_mlp, m)?)?;
    m.add_function(wrap_pyfunction!(stlr_lr, m)?)?;
    m.add_function(wrap_pyfunction!(discriminative_lrs, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(script_tag, m)?)?;
    m.add_function(wrap_pyfunction!(dominant_script, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    Ok(())
}
