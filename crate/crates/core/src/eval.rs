//! Per-class and support-weighted precision/recall/F1, and the results grid
//! rendered one section per language with TRA/TRAI/TRAA/MERGED rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::{Label, Language, VariantId, LABELS, VARIANTS};
use crate::error::{Error, Result};
use crate::learn::{ModelKind, MODEL_KINDS};

/// 5x5 counts; rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[usize; 5]; 5],
}

impl ConfusionMatrix {
    pub fn from_pairs(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix> {
        if gold.len() != pred.len() {
            return Err(Error::contract(format!(
                "gold has {} labels, predictions {}",
                gold.len(),
                pred.len()
            )));
        }
        if gold.is_empty() {
            return Err(Error::contract(
                "cannot build a confusion matrix from no pairs",
            ));
        }
        let mut counts = [[0usize; 5]; 5];
        for (g, p) in gold.iter().zip(pred) {
            counts[g.index()][p.index()] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn get(&self, gold: Label, pred: Label) -> usize {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, gold: Label) -> usize {
        self.counts[gold.index()].iter().sum()
    }

    pub fn col_sum(&self, pred: Label) -> usize {
        self.counts.iter().map(|row| row[pred.index()]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..5).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total() as f64
    }
}

/// Precision, recall, F1 and support for one class. Zero denominators give
/// zero metrics rather than being excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

pub fn per_class_metrics(matrix: &ConfusionMatrix) -> Vec<ClassMetrics> {
    LABELS
        .iter()
        .map(|&label| {
            let tp = matrix.get(label, label) as f64;
            let predicted = matrix.col_sum(label) as f64;
            let support = matrix.row_sum(label);
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let recall = if support > 0 {
                tp / support as f64
            } else {
                0.0
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

/// Support-weighted average of per-class metrics. Classes with zero support
/// contribute weight zero; a zero total support is a contract error.
pub fn weighted_average(metrics: &[ClassMetrics]) -> Result<(f64, f64, f64)> {
    let total: usize = metrics.iter().map(|m| m.support).sum();
    if total == 0 {
        return Err(Error::contract(
            "weighted average needs non-zero total support",
        ));
    }
    let mut p = 0.0;
    let mut r = 0.0;
    let mut f1 = 0.0;
    for m in metrics {
        let weight = m.support as f64 / total as f64;
        p += weight * m.precision;
        r += weight * m.recall;
        f1 += weight * m.f1;
    }
    Ok((p, r, f1))
}

/// One cell of the results grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl CellMetrics {
    pub fn from_pairs(gold: &[Label], pred: &[Label]) -> Result<CellMetrics> {
        let matrix = ConfusionMatrix::from_pairs(gold, pred)?;
        let per_class = per_class_metrics(&matrix);
        let (precision, recall, f1) = weighted_average(&per_class)?;
        Ok(CellMetrics {
            precision,
            recall,
            f1,
            support: matrix.total(),
        })
    }
}

/// The full experiment grid: weighted P/R/F1 for every
/// (language, model, variant) combination.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub languages: Vec<Language>,
    pub cells: BTreeMap<(Language, ModelKind, VariantId), CellMetrics>,
}

impl Report {
    pub fn new(languages: Vec<Language>) -> Report {
        Report {
            languages,
            cells: BTreeMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        language: Language,
        model: ModelKind,
        variant: VariantId,
        metrics: CellMetrics,
    ) {
        self.cells.insert((language, model, variant), metrics);
    }

    pub fn get(
        &self,
        language: Language,
        model: ModelKind,
        variant: VariantId,
    ) -> Option<&CellMetrics> {
        self.cells.get(&(language, model, variant))
    }

    fn missing_cells(&self) -> Vec<(Language, ModelKind, VariantId)> {
        let mut missing = Vec::new();
        for &language in &self.languages {
            for model in MODEL_KINDS {
                for variant in VARIANTS {
                    if !self.cells.contains_key(&(language, model, variant)) {
                        missing.push((language, model, variant));
                    }
                }
            }
        }
        missing
    }

    fn check_complete(&self) -> Result<()> {
        let missing = self.missing_cells();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteReport(missing))
        }
    }

    /// Human-readable table: one section per language, one row per variant,
    /// P/R/F1 columns per model, 4-decimal values.
    pub fn render_text(&self) -> Result<String> {
        self.check_complete()?;
        let mut out = String::new();
        for &language in &self.languages {
            writeln!(out, "== {language} ==").unwrap();
            write!(out, "{:<28}", "Variant").unwrap();
            for model in MODEL_KINDS {
                for col in ["P", "R", "F1"] {
                    let header = format!("{} {}", model.name(), col);
                    write!(out, "{header:>9}").unwrap();
                }
            }
            out.push('\n');
            for variant in VARIANTS {
                write!(out, "{:<28}", variant.name()).unwrap();
                for model in MODEL_KINDS {
                    let cell = self.cells[&(language, model, variant)];
                    write!(
                        out,
                        "{:>9.4}{:>9.4}{:>9.4}",
                        cell.precision, cell.recall, cell.f1
                    )
                    .unwrap();
                }
                out.push('\n');
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Machine-readable form:
    /// `language,model,variant,precision,recall,f1,support`.
    pub fn to_csv(&self) -> Result<String> {
        self.check_complete()?;
        let mut out = String::from("language,model,variant,precision,recall,f1,support\n");
        for &language in &self.languages {
            for model in MODEL_KINDS {
                for variant in VARIANTS {
                    let cell = self.cells[&(language, model, variant)];
                    writeln!(
                        out,
                        "{},{},{},{:.4},{:.4},{:.4},{}",
                        language,
                        model.name(),
                        variant.name(),
                        cell.precision,
                        cell.recall,
                        cell.f1,
                        cell.support
                    )
                    .unwrap();
                }
            }
        }
        Ok(out)
    }

    /// Parses the CSV form back into a report (used by the `report`
    /// subcommand to re-render saved grids).
    pub fn from_csv(text: &str) -> Result<Report> {
        let mut report = Report::new(Vec::new());
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected 7 comma-separated fields, found {}", fields.len()),
                });
            }
            let parse_err = |what: &str| Error::Parse {
                line: idx + 1,
                msg: format!("bad {what} field"),
            };
            let language = Language::parse(fields[0]).ok_or_else(|| parse_err("language"))?;
            let model = ModelKind::parse(fields[1]).ok_or_else(|| parse_err("model"))?;
            let variant = VariantId::parse(fields[2]).ok_or_else(|| parse_err("variant"))?;
            let precision: f64 = fields[3].parse().map_err(|_| parse_err("precision"))?;
            let recall: f64 = fields[4].parse().map_err(|_| parse_err("recall"))?;
            let f1: f64 = fields[5].parse().map_err(|_| parse_err("f1"))?;
            let support: usize = fields[6].parse().map_err(|_| parse_err("support"))?;
            if !report.languages.contains(&language) {
                report.languages.push(language);
            }
            report.insert(
                language,
                model,
                variant,
                CellMetrics {
                    precision,
                    recall,
                    f1,
                    support,
                },
            );
        }
        Ok(report)
    }
}
