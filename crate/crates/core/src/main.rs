use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use codemix::corpus::{
    build_variant, corpus_stats, load_tsv, preprocess_for_translit, write_tsv, Corpus, Language,
    Split, VariantId, LABELS, VARIANTS,
};
use codemix::error::{Error, Result};
use codemix::eval::{per_class_metrics, weighted_average, ConfusionMatrix, Report};
use codemix::learn::{
    self, load_model, predict, save_model, FeatureSpace, Model, ModelFile, ModelKind, StlrParams,
    TrainConfig, UnfreezeSchedule,
};
use codemix::runner::{run_grid, ExperimentConfig};
use codemix::script::tag_tokens;
use codemix::translate::{translate_batch, TranslationCache, TranslatorSpec};
use codemix::translit::{
    bootstrap_lm_lines, transliterate_corpus, CharLm, RuleTable, DEFAULT_BEAM, DEFAULT_K,
    DEFAULT_LM_ALPHA, DEFAULT_LM_ORDER,
};

#[derive(Parser)]
#[command(
    name = "codemix",
    version,
    about = "Code-mixed Dravidian sentiment pipeline: transliterate, translate, train, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus TSV and print per-class counts
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value = "train")]
        split: String,
        /// skip the first line of the file
        #[arg(long)]
        header: bool,
        /// write the normalized corpus here
        #[arg(long)]
        out: Option<PathBuf>,
        /// include the provenance column when writing
        #[arg(long)]
        provenance: bool,
    },
    /// Read lines on stdin, emit one `token<TAB>tag` pair per token
    ScriptTag,
    /// Transliterate the Latin-script tokens of a corpus
    Translit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        /// rule table file (defaults to the built-in table)
        #[arg(long)]
        rules: Option<PathBuf>,
        /// pre-trained character LM (defaults to a bootstrap model)
        #[arg(long)]
        lm: Option<PathBuf>,
        /// save the character LM used for reranking
        #[arg(long)]
        save_lm: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        /// skip NotLanguage filtering and bracket/tag stripping
        #[arg(long)]
        no_preprocess: bool,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate a corpus through a pluggable translator
    Translate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        /// identity | dictionary | command
        #[arg(long, default_value = "identity")]
        kind: String,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long, default_value = "translations.cache.tsv")]
        cache: PathBuf,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        out: PathBuf,
        /// external translator argv, after `--`
        #[arg(last = true)]
        command: Vec<String>,
    },
    /// Concatenate base/transliterated/translated corpora into variants
    BuildVariants {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        translit: PathBuf,
        #[arg(long)]
        translated: PathBuf,
        #[arg(long)]
        lang: String,
        /// build just one variant (default: all four)
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        header: bool,
    },
    /// Train a classifier on a training TSV
    Train {
        /// nb | mlp
        #[arg(long)]
        model: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        /// variant tag recorded in the model file
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        /// peak learning rate for the MLP schedule
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = StlrParams::DEFAULT_RATIO)]
        stlr_ratio: f64,
        #[arg(long, default_value_t = StlrParams::DEFAULT_CUT_FRAC)]
        cut_frac: f64,
        #[arg(long, default_value_t = TrainConfig::DEFAULT_DECAY)]
        decay: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0.4)]
        dropout: f64,
        /// naive Bayes smoothing
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        ngram_lo: usize,
        #[arg(long, default_value_t = 3)]
        ngram_hi: usize,
        #[arg(long, default_value_t = 15)]
        dim_log2: u32,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on a labeled TSV
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long)]
        header: bool,
        /// write per-class metrics as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment grid from a config file
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a saved grid CSV as the results table
    Report {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(1);
    }
}

fn parse_language(s: &str) -> Result<Language> {
    Language::parse(s).ok_or_else(|| Error::config(format!("unknown language `{s}`")))
}

fn parse_split(s: &str) -> Result<Split> {
    Split::parse(s).ok_or_else(|| Error::config(format!("unknown split `{s}`")))
}

fn load_corpus(path: &PathBuf, language: Language, split: Split, header: bool) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    load_tsv(BufReader::new(file), language, split, header)
}

fn write_corpus(corpus: &Corpus, path: &PathBuf, provenance: bool) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_tsv(corpus, file, provenance)
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest {
            input,
            lang,
            split,
            header,
            out,
            provenance,
        } => {
            let language = parse_language(&lang)?;
            let corpus = load_corpus(&input, language, parse_split(&split)?, header)?;
            let stats = corpus_stats(&corpus);
            println!("language: {language}");
            println!("samples:  {}", stats.total);
            for label in LABELS {
                println!("  {:<16} {}", label.to_string(), stats.count(label));
            }
            if let Some(out) = out {
                write_corpus(&corpus, &out, provenance)?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::ScriptTag => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in stdin.lock().lines() {
                for token in tag_tokens(&line?) {
                    writeln!(out, "{}\t{}", token.text, token.tag)?;
                }
            }
            Ok(())
        }
        Command::Translit {
            input,
            lang,
            rules,
            lm,
            save_lm,
            k,
            beam,
            no_preprocess,
            header,
            out,
        } => {
            if k < 1 || beam < k {
                return Err(Error::config("translit needs beam >= k >= 1"));
            }
            let language = parse_language(&lang)?;
            let corpus = load_corpus(&input, language, Split::Train, header)?;
            let corpus = if no_preprocess {
                corpus
            } else {
                preprocess_for_translit(&corpus)
            };
            let table = match rules {
                Some(path) => RuleTable::load(language, &path)?,
                None => RuleTable::default_for(language),
            };
            let lm = match lm {
                Some(path) => CharLm::load(&path)?,
                None => {
                    let lines = bootstrap_lm_lines(&corpus, &table);
                    if lines.is_empty() {
                        CharLm::train(&[""], DEFAULT_LM_ORDER, DEFAULT_LM_ALPHA)?
                    } else {
                        CharLm::train(&lines, DEFAULT_LM_ORDER, DEFAULT_LM_ALPHA)?
                    }
                }
            };
            if let Some(path) = save_lm {
                lm.save(&path)?;
            }
            let result = transliterate_corpus(&corpus, &table, &lm, k);
            write_corpus(&result, &out, true)?;
            println!(
                "transliterated {} samples -> {}",
                result.len(),
                out.display()
            );
            Ok(())
        }
        Command::Translate {
            input,
            lang,
            kind,
            dict,
            cache,
            header,
            out,
            command,
        } => {
            let language = parse_language(&lang)?;
            let corpus = load_corpus(&input, language, Split::Train, header)?;
            let spec = match kind.as_str() {
                "identity" => TranslatorSpec::identity(),
                "dictionary" => {
                    let dict = dict.ok_or_else(|| {
                        Error::config("translator kind `dictionary` needs --dict")
                    })?;
                    TranslatorSpec::dictionary(&dict)?
                }
                "command" => TranslatorSpec::external(command)?,
                other => return Err(Error::config(format!("unknown translator kind `{other}`"))),
            };
            let mut cache = TranslationCache::open(&cache)?;
            let samples = translate_batch(&corpus.samples, &spec, &mut cache)?;
            let mut translated = Corpus::new(language, corpus.split);
            translated.samples = samples;
            write_corpus(&translated, &out, true)?;
            println!(
                "translated {} samples -> {}",
                translated.len(),
                out.display()
            );
            Ok(())
        }
        Command::BuildVariants {
            base,
            translit,
            translated,
            lang,
            variant,
            out_dir,
            header,
        } => {
            let language = parse_language(&lang)?;
            let base = load_corpus(&base, language, Split::Train, header)?;
            let translit = load_corpus(&translit, language, Split::Train, false)?;
            let translated = load_corpus(&translated, language, Split::Train, false)?;
            let wanted: Vec<VariantId> = match variant {
                Some(name) => vec![VariantId::parse(&name)
                    .ok_or_else(|| Error::config(format!("unknown variant `{name}`")))?],
                None => VARIANTS.to_vec(),
            };
            std::fs::create_dir_all(&out_dir)?;
            for variant in wanted {
                let corpus = build_variant(variant, &base, &translit, &translated)?;
                let path = out_dir.join(format!("{}_{}.tsv", language.name(), variant.name()));
                write_corpus(&corpus, &path, true)?;
                println!(
                    "{}: {} samples -> {}",
                    variant.name(),
                    corpus.len(),
                    path.display()
                );
            }
            Ok(())
        }
        Command::Train {
            model,
            input,
            lang,
            variant,
            seed,
            epochs,
            lr,
            stlr_ratio,
            cut_frac,
            decay,
            batch,
            dropout,
            alpha,
            ngram_lo,
            ngram_hi,
            dim_log2,
            header,
            out,
        } => {
            let language = parse_language(&lang)?;
            let kind = ModelKind::parse(&model)
                .ok_or_else(|| Error::config(format!("unknown model kind `{model}`")))?;
            let variant = match variant {
                Some(name) => Some(
                    VariantId::parse(&name)
                        .ok_or_else(|| Error::config(format!("unknown variant `{name}`")))?,
                ),
                None => None,
            };
            let corpus = load_corpus(&input, language, Split::Train, header)?;
            let space = FeatureSpace::new(ngram_lo, ngram_hi, true, 1usize << dim_log2)?;
            let trained = match kind {
                ModelKind::Nb => Model::Nb(learn::train_nb(&corpus, &space, alpha)?),
                ModelKind::Mlp => {
                    let config = TrainConfig {
                        batch_size: batch,
                        epochs,
                        base_lr: lr,
                        seed,
                        decay,
                        dropout,
                        ..TrainConfig::default()
                    };
                    let stlr = StlrParams::for_run(
                        lr,
                        stlr_ratio,
                        cut_frac,
                        corpus.len(),
                        config.batch_size,
                        config.epochs,
                    )?;
                    let unfreeze = UnfreezeSchedule::gradual(learn::mlp::GROUPS, config.epochs);
                    Model::Mlp(learn::train_mlp(
                        &corpus, &space, &config, &stlr, &unfreeze,
                    )?)
                }
            };
            let train_acc = learn::mlp::accuracy(&trained, &corpus, &space)?;
            save_model(
                &ModelFile {
                    space,
                    model: trained,
                    language: Some(language),
                    variant,
                },
                &out,
            )?;
            println!(
                "trained {kind} on {} samples (train accuracy {train_acc:.4}) -> {}",
                corpus.len(),
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            model,
            input,
            lang,
            header,
            out,
        } => {
            let language = parse_language(&lang)?;
            let file = load_model(&model)?;
            let corpus = load_corpus(&input, language, Split::Test, header)?;
            let gold: Vec<_> = corpus.samples.iter().map(|s| s.label).collect();
            let mut pred = Vec::with_capacity(corpus.len());
            for sample in &corpus.samples {
                pred.push(predict(&file.model, &sample.text, &file.space)?.0);
            }
            let matrix = ConfusionMatrix::from_pairs(&gold, &pred)?;
            let per_class = per_class_metrics(&matrix);
            let (p, r, f1) = weighted_average(&per_class)?;
            println!(
                "{:<16} {:>9} {:>9} {:>9} {:>9}",
                "class", "P", "R", "F1", "support"
            );
            for m in &per_class {
                println!(
                    "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                    m.label.to_string(),
                    m.precision,
                    m.recall,
                    m.f1,
                    m.support
                );
            }
            println!(
                "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                "weighted",
                p,
                r,
                f1,
                matrix.total()
            );
            if let Some(out) = out {
                let mut csv = String::from("label,precision,recall,f1,support\n");
                for m in &per_class {
                    csv.push_str(&format!(
                        "{},{:.4},{:.4},{:.4},{}\n",
                        m.label, m.precision, m.recall, m.f1, m.support
                    ));
                }
                csv.push_str(&format!(
                    "weighted,{p:.4},{r:.4},{f1:.4},{}\n",
                    matrix.total()
                ));
                std::fs::write(&out, csv)?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Grid { config, seed, out } => {
            let mut config = ExperimentConfig::from_toml_file(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(out) = out {
                config.out_dir = out;
            }
            let (report, manifest) = run_grid(&config)?;
            print!("{}", report.render_text()?);
            println!(
                "grid complete: {} cells, {} stages, artifacts in {}",
                report.cells.len(),
                manifest.stages.len(),
                config.out_dir.display()
            );
            Ok(())
        }
        Command::Report { csv } => {
            let text = std::fs::read_to_string(&csv)?;
            let report = Report::from_csv(&text)?;
            print!("{}", report.render_text()?);
            Ok(())
        }
    }
}
