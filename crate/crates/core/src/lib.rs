//! Code-mixed Dravidian sentiment pipeline: corpus ingestion and the four
//! training variants, Roman-to-native transliteration with top-k reranked
//! decoding, a pluggable translation boundary, desk-scale classifiers with
//! fine-tuning schedules, and a weighted-F1 experiment grid.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod learn;
pub mod runner;
pub mod script;
pub mod translate;
pub mod translit;

pub use corpus::{Corpus, Label, Language, Provenance, Sample, Split, VariantId};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, Report};
pub use learn::{FeatureSpace, ModelKind};
pub use script::ScriptTag;
pub use translit::{CharLm, RuleTable};
