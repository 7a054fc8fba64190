//! Experiment-grid orchestration: preprocess, transliterate, translate,
//! build the four variants, train both classifiers on each, evaluate on the
//! held-out splits and emit the report — reproducibly from one config file.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    build_variant, corpus_stats, load_tsv, preprocess_for_translit, write_tsv, Corpus, Label,
    Language, Split, VariantId, VARIANTS,
};
use crate::error::{Error, Result};
use crate::eval::{CellMetrics, Report};
use crate::learn::{
    predict, train_nb, FeatureSpace, Model, ModelFile, ModelKind, StlrParams, TrainConfig,
    UnfreezeSchedule,
};
use crate::translate::{translate_batch, TranslationCache, TranslatorSpec};
use crate::translit::{
    bootstrap_lm_lines, transliterate_corpus, CharLm, RuleTable, DEFAULT_BEAM, DEFAULT_K,
    DEFAULT_LM_ALPHA, DEFAULT_LM_ORDER,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LanguageData {
    pub name: Language,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub header: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslitSettings {
    pub k: usize,
    pub beam: usize,
    pub lm_order: usize,
    pub lm_alpha: f64,
    pub lm: Option<PathBuf>,
}

impl Default for TranslitSettings {
    fn default() -> Self {
        TranslitSettings {
            k: DEFAULT_K,
            beam: DEFAULT_BEAM,
            lm_order: DEFAULT_LM_ORDER,
            lm_alpha: DEFAULT_LM_ALPHA,
            lm: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorSettings {
    /// "identity", "dictionary" or "command"
    pub kind: String,
    pub dictionary: Option<PathBuf>,
    pub command: Vec<String>,
}

impl Default for TranslatorSettings {
    fn default() -> Self {
        TranslatorSettings {
            kind: "identity".to_string(),
            dictionary: None,
            command: Vec::new(),
        }
    }
}

impl TranslatorSettings {
    pub fn to_spec(&self) -> Result<TranslatorSpec> {
        match self.kind.as_str() {
            "identity" => Ok(TranslatorSpec::identity()),
            "dictionary" => {
                let path = self.dictionary.as_ref().ok_or_else(|| {
                    Error::config("translator kind `dictionary` needs a dictionary path")
                })?;
                TranslatorSpec::dictionary(path)
            }
            "command" => TranslatorSpec::external(self.command.clone()),
            other => Err(Error::config(format!("unknown translator kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSettings {
    pub ngram_lo: usize,
    pub ngram_hi: usize,
    pub word_unigrams: bool,
    pub dim_log2: u32,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            ngram_lo: 1,
            ngram_hi: 3,
            word_unigrams: true,
            dim_log2: 15,
        }
    }
}

impl FeatureSettings {
    pub fn to_space(&self) -> Result<FeatureSpace> {
        FeatureSpace::new(
            self.ngram_lo,
            self.ngram_hi,
            self.word_unigrams,
            1usize << self.dim_log2,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NbSettings {
    pub alpha: f64,
}

impl Default for NbSettings {
    fn default() -> Self {
        NbSettings { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSettings {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_max: f64,
    pub ratio: f64,
    pub cut_frac: f64,
    pub decay: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub hidden0: usize,
    pub hidden1: usize,
    pub max_len: usize,
}

impl Default for MlpSettings {
    fn default() -> Self {
        let config = TrainConfig::default();
        MlpSettings {
            batch_size: config.batch_size,
            epochs: config.epochs,
            lr_max: 0.05,
            ratio: StlrParams::DEFAULT_RATIO,
            cut_frac: StlrParams::DEFAULT_CUT_FRAC,
            decay: config.decay,
            dropout: config.dropout,
            weight_decay: config.weight_decay,
            hidden0: config.hidden0,
            hidden1: config.hidden1,
            max_len: config.max_len,
        }
    }
}

impl MlpSettings {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            base_lr: self.lr_max,
            max_len: self.max_len,
            seed,
            decay: self.decay,
            dropout: self.dropout,
            weight_decay: self.weight_decay,
            hidden0: self.hidden0,
            hidden1: self.hidden1,
        }
    }
}

/// Everything a grid run needs, loadable from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(rename = "language")]
    pub languages: Vec<LanguageData>,
    #[serde(default)]
    pub translit: TranslitSettings,
    #[serde(default)]
    pub translator: TranslatorSettings,
    #[serde(default)]
    pub features: FeatureSettings,
    #[serde(default)]
    pub nb: NbSettings,
    #[serde(default)]
    pub mlp: MlpSettings,
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::config("config lists no languages"));
        }
        for lang in &self.languages {
            for (what, path) in [
                ("train", &lang.train),
                ("dev", &lang.dev),
                ("test", &lang.test),
            ] {
                if !path.exists() {
                    return Err(Error::config(format!(
                        "{} {} split {} does not exist",
                        lang.name,
                        what,
                        path.display()
                    )));
                }
            }
            if let Some(rules) = &lang.rules {
                if !rules.exists() {
                    return Err(Error::config(format!(
                        "rules file {} does not exist",
                        rules.display()
                    )));
                }
            }
        }
        if let Some(lm) = &self.translit.lm {
            if !lm.exists() {
                return Err(Error::config(format!(
                    "char LM file {} does not exist",
                    lm.display()
                )));
            }
        }
        self.features.to_space()?;
        self.translator.to_spec()?;
        if self.translit.k < 1 || self.translit.beam < self.translit.k {
            return Err(Error::config("translit needs beam >= k >= 1"));
        }
        Ok(())
    }

    /// Stable hash of the full configuration.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        short_hash(&canonical)
    }
}

fn short_hash(input: &str) -> String {
    let digest = Sha256::digest(input.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub language: Option<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub cached: bool,
}

/// Ledger of what a run produced: one record per stage, every artifact
/// listed. Rerunning with an unchanged config reuses the translit and
/// translation artifacts it finds.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub created_unix: u64,
    pub version: String,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    fn new(config_hash: String) -> RunManifest {
        RunManifest {
            config_hash,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages: Vec::new(),
        }
    }

    fn record(
        &mut self,
        stage: &str,
        language: Option<Language>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        cached: bool,
    ) {
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            language: language.map(|l| l.name().to_string()),
            inputs,
            outputs,
            cached,
        });
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::config(format!("manifest encode: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn stage(&self, name: &str, language: Language) -> Option<&StageRecord> {
        self.stages
            .iter()
            .find(|s| s.stage == name && s.language.as_deref() == Some(language.name()))
    }
}

fn load_split(lang: &LanguageData, split: Split) -> Result<Corpus> {
    let path = match split {
        Split::Train => &lang.train,
        Split::Dev => &lang.dev,
        Split::Test => &lang.test,
    };
    let file = std::fs::File::open(path)?;
    load_tsv(BufReader::new(file), lang.name, split, lang.header)
}

fn stage<T>(name: &str, language: Language, result: Result<T>) -> Result<T> {
    result.map_err(|e| e.in_stage(format!("{name}[{}]", language.name())))
}

/// Evaluates a trained model against a held-out corpus.
pub fn evaluate_model(model: &Model, space: &FeatureSpace, corpus: &Corpus) -> Result<CellMetrics> {
    let gold: Vec<Label> = corpus.samples.iter().map(|s| s.label).collect();
    let mut pred = Vec::with_capacity(corpus.len());
    for sample in &corpus.samples {
        pred.push(predict(model, &sample.text, space)?.0);
    }
    CellMetrics::from_pairs(&gold, &pred)
}

// Deterministic per-cell seed so grid cells decorrelate while the whole run
// stays reproducible from the config seed.
fn cell_seed(base: u64, language: Language, variant: VariantId) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in format!("{}:{}", language.name(), variant.name()).bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ base
}

/// Runs the full grid. Test and dev splits are never transliterated,
/// translated or trained on; augmentation applies to the training split
/// only. Returns the test-split report; the dev report and all artifacts
/// land in the output directory.
pub fn run_grid(config: &ExperimentConfig) -> Result<(Report, RunManifest)> {
    config.validate().map_err(|e| e.in_stage("validate"))?;
    let out = &config.out_dir;
    std::fs::create_dir_all(out.join("models"))?;
    std::fs::create_dir_all(out.join("variants"))?;

    let mut manifest = RunManifest::new(config.config_hash());
    let cache_path = out.join("translations.cache.tsv");
    let mut cache = TranslationCache::open(&cache_path)?;
    manifest.record(
        "setup",
        None,
        vec![format!("config:{}", config.config_hash())],
        vec![cache_path.display().to_string()],
        false,
    );
    let translator = config.translator.to_spec()?;
    let space = config.features.to_space()?;
    let languages: Vec<Language> = config.languages.iter().map(|l| l.name).collect();
    let mut report = Report::new(languages.clone());
    let mut dev_report = Report::new(languages);

    for lang_cfg in &config.languages {
        let language = lang_cfg.name;

        let train = stage("ingest-train", language, load_split(lang_cfg, Split::Train))?;
        let dev = stage("ingest-dev", language, load_split(lang_cfg, Split::Dev))?;
        let test = stage("ingest-test", language, load_split(lang_cfg, Split::Test))?;
        manifest.record(
            "ingest",
            Some(language),
            vec![
                lang_cfg.train.display().to_string(),
                lang_cfg.dev.display().to_string(),
                lang_cfg.test.display().to_string(),
            ],
            Vec::new(),
            false,
        );

        let preprocessed = preprocess_for_translit(&train);
        manifest.record(
            "preprocess",
            Some(language),
            vec![format!("train:{}", train.len())],
            vec![format!("kept:{}", preprocessed.len())],
            false,
        );

        let rules_text = match &lang_cfg.rules {
            Some(path) => std::fs::read_to_string(path)?,
            None => crate::translit::default_rules_text(language).to_string(),
        };
        let table = stage("rules", language, RuleTable::parse(language, &rules_text))?;

        // transliteration stage, cached by content hash
        let mut pre_tsv = Vec::new();
        write_tsv(&preprocessed, &mut pre_tsv, true)?;
        let translit_hash = short_hash(&format!(
            "{}\u{0}{}\u{0}{}\u{0}{}\u{0}{}",
            rules_text,
            config.translit.k,
            config.translit.lm_order,
            config.translit.lm_alpha,
            String::from_utf8_lossy(&pre_tsv),
        ));
        let translit_path = out.join(format!(
            "translit_{}_{}.tsv",
            language.name(),
            translit_hash
        ));
        let (transliterated, translit_cached) = if translit_path.exists() {
            let file = std::fs::File::open(&translit_path)?;
            (
                stage(
                    "translit-load",
                    language,
                    load_tsv(BufReader::new(file), language, Split::Train, false),
                )?,
                true,
            )
        } else {
            let lm = match &config.translit.lm {
                Some(path) => stage("translit-lm", language, CharLm::load(path))?,
                None => {
                    let lines = bootstrap_lm_lines(&preprocessed, &table);
                    stage(
                        "translit-lm",
                        language,
                        if lines.is_empty() {
                            // nothing to transliterate; a single boundary-only
                            // line keeps the model well-formed
                            CharLm::train(&[""], config.translit.lm_order, config.translit.lm_alpha)
                        } else {
                            CharLm::train(
                                &lines,
                                config.translit.lm_order,
                                config.translit.lm_alpha,
                            )
                        },
                    )?
                }
            };
            let result = transliterate_corpus(&preprocessed, &table, &lm, config.translit.k);
            let file = std::fs::File::create(&translit_path)?;
            write_tsv(&result, file, true)?;
            (result, false)
        };
        manifest.record(
            "translit",
            Some(language),
            vec![format!("hash:{translit_hash}")],
            vec![translit_path.display().to_string()],
            translit_cached,
        );

        // translation stage over the transliterated text, cached likewise
        let mut translit_tsv = Vec::new();
        write_tsv(&transliterated, &mut translit_tsv, true)?;
        let translated_hash = short_hash(&format!(
            "{}\u{0}{}",
            translator.id(),
            String::from_utf8_lossy(&translit_tsv)
        ));
        let translated_path = out.join(format!(
            "translated_{}_{}.tsv",
            language.name(),
            translated_hash
        ));
        let (translated, translated_cached) = if translated_path.exists() {
            let file = std::fs::File::open(&translated_path)?;
            (
                stage(
                    "translate-load",
                    language,
                    load_tsv(BufReader::new(file), language, Split::Train, false),
                )?,
                true,
            )
        } else {
            let samples = stage(
                "translate",
                language,
                translate_batch(&transliterated.samples, &translator, &mut cache),
            )?;
            let mut corpus = Corpus::new(language, Split::Train);
            corpus.samples = samples;
            let file = std::fs::File::create(&translated_path)?;
            write_tsv(&corpus, file, true)?;
            (corpus, false)
        };
        manifest.record(
            "translate",
            Some(language),
            vec![
                format!("translator:{}", translator.id()),
                format!("hash:{translated_hash}"),
            ],
            vec![translated_path.display().to_string()],
            translated_cached,
        );

        for variant in VARIANTS {
            let corpus = stage(
                "build-variant",
                language,
                build_variant(variant, &train, &transliterated, &translated),
            )?;
            let variant_path =
                out.join("variants")
                    .join(format!("{}_{}.tsv", language.name(), variant.name()));
            let file = std::fs::File::create(&variant_path)?;
            write_tsv(&corpus, file, true)?;
            let stats = corpus_stats(&corpus);
            manifest.record(
                "build-variant",
                Some(language),
                vec![format!("variant:{}", variant.name())],
                vec![
                    variant_path.display().to_string(),
                    format!("rows:{}", stats.total),
                ],
                false,
            );

            for model_kind in crate::learn::MODEL_KINDS {
                let seed = cell_seed(config.seed, language, variant);
                let model = match model_kind {
                    ModelKind::Nb => Model::Nb(stage(
                        "train-nb",
                        language,
                        train_nb(&corpus, &space, config.nb.alpha),
                    )?),
                    ModelKind::Mlp => {
                        let train_config = config.mlp.to_train_config(seed);
                        let stlr = stage(
                            "train-mlp",
                            language,
                            StlrParams::for_run(
                                config.mlp.lr_max,
                                config.mlp.ratio,
                                config.mlp.cut_frac,
                                corpus.len(),
                                train_config.batch_size,
                                train_config.epochs,
                            ),
                        )?;
                        let unfreeze = UnfreezeSchedule::gradual(
                            crate::learn::mlp::GROUPS,
                            train_config.epochs,
                        );
                        Model::Mlp(stage(
                            "train-mlp",
                            language,
                            crate::learn::train_mlp(
                                &corpus,
                                &space,
                                &train_config,
                                &stlr,
                                &unfreeze,
                            ),
                        )?)
                    }
                };
                let model_path = out.join("models").join(format!(
                    "{}_{}_{}.bin",
                    language.name(),
                    variant.name(),
                    model_kind.name()
                ));
                crate::learn::save_model(
                    &ModelFile {
                        space,
                        model: model.clone(),
                        language: Some(language),
                        variant: Some(variant),
                    },
                    &model_path,
                )?;

                let test_metrics = stage(
                    "evaluate-test",
                    language,
                    evaluate_model(&model, &space, &test),
                )?;
                let dev_metrics = stage(
                    "evaluate-dev",
                    language,
                    evaluate_model(&model, &space, &dev),
                )?;
                report.insert(language, model_kind, variant, test_metrics);
                dev_report.insert(language, model_kind, variant, dev_metrics);
                manifest.record(
                    "train-evaluate",
                    Some(language),
                    vec![
                        format!("variant:{}", variant.name()),
                        format!("model:{}", model_kind.name()),
                        format!("seed:{seed}"),
                    ],
                    vec![model_path.display().to_string()],
                    false,
                );
            }
        }
    }

    let report_txt = report.render_text().map_err(|e| e.in_stage("report"))?;
    let report_csv = report.to_csv().map_err(|e| e.in_stage("report"))?;
    let dev_csv = dev_report.to_csv().map_err(|e| e.in_stage("report"))?;
    std::fs::write(out.join("report.txt"), &report_txt)?;
    std::fs::write(out.join("report.csv"), &report_csv)?;
    std::fs::write(out.join("report_dev.csv"), &dev_csv)?;
    manifest.record(
        "report",
        None,
        Vec::new(),
        vec![
            out.join("report.txt").display().to_string(),
            out.join("report.csv").display().to_string(),
            out.join("report_dev.csv").display().to_string(),
        ],
        false,
    );
    manifest.save(&out.join("manifest.json"))?;
    Ok((report, manifest))
}
