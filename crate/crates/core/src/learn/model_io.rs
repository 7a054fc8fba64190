//! Versioned binary model files. Binary keeps every f64 bit-exact
//! (including the -inf log-priors of classes absent from training), so a
//! round-trip reproduces identical predictions.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::{Language, VariantId, LANGUAGES, VARIANTS};
use crate::error::{Error, Result};
use crate::learn::mlp::{LayerGroup, MlpModel};
use crate::learn::nb::NbModel;
use crate::learn::{FeatureSpace, TextClassifier};

const MAGIC: &[u8; 4] = b"CMXM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Nb(NbModel),
    Mlp(MlpModel),
}

impl TextClassifier for Model {
    fn class_scores(&self, text: &str, space: &FeatureSpace) -> Result<[f64; 5]> {
        match self {
            Model::Nb(m) => m.class_scores(text, space),
            Model::Mlp(m) => m.class_scores(text, space),
        }
    }
}

/// A trained model bundled with the feature space it was trained against
/// and optional grid metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub space: FeatureSpace,
    pub model: Model,
    pub language: Option<Language>,
    pub variant: Option<VariantId>,
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let kind: u8 = match file.model {
        Model::Nb(_) => 0,
        Model::Mlp(_) => 1,
    };
    w.write_all(&[kind])?;
    w.write_all(&[file
        .language
        .map(|l| LANGUAGES.iter().position(|&x| x == l).unwrap() as u8)
        .unwrap_or(0xff)])?;
    w.write_all(&[file
        .variant
        .map(|v| VARIANTS.iter().position(|&x| x == v).unwrap() as u8)
        .unwrap_or(0xff)])?;

    write_u64(&mut w, file.space.ngram_lo as u64)?;
    write_u64(&mut w, file.space.ngram_hi as u64)?;
    w.write_all(&[u8::from(file.space.word_unigrams)])?;
    write_u64(&mut w, file.space.dim as u64)?;

    match &file.model {
        Model::Nb(nb) => {
            write_f64(&mut w, nb.alpha)?;
            write_u64(&mut w, nb.dim as u64)?;
            for &lp in &nb.log_priors {
                write_f64(&mut w, lp)?;
            }
            for class in &nb.feature_log_likelihood {
                for &v in class {
                    write_f64(&mut w, v)?;
                }
            }
        }
        Model::Mlp(mlp) => {
            write_f64(&mut w, mlp.dropout)?;
            write_u64(&mut w, mlp.max_len as u64)?;
            write_u64(&mut w, mlp.dim as u64)?;
            write_u64(&mut w, mlp.groups.len() as u64)?;
            for group in &mlp.groups {
                write_u64(&mut w, group.in_dim as u64)?;
                write_u64(&mut w, group.out_dim as u64)?;
                for &v in &group.w {
                    write_f64(&mut w, v)?;
                }
                for &v in &group.b {
                    write_f64(&mut w, v)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("bad magic, not a model file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model version {version}"
        )));
    }
    let kind = read_u8(&mut r)?;
    let language = match read_u8(&mut r)? {
        0xff => None,
        i if (i as usize) < LANGUAGES.len() => Some(LANGUAGES[i as usize]),
        i => return Err(Error::ModelFormat(format!("bad language index {i}"))),
    };
    let variant = match read_u8(&mut r)? {
        0xff => None,
        i if (i as usize) < VARIANTS.len() => Some(VARIANTS[i as usize]),
        i => return Err(Error::ModelFormat(format!("bad variant index {i}"))),
    };

    let ngram_lo = read_u64(&mut r)? as usize;
    let ngram_hi = read_u64(&mut r)? as usize;
    let word_unigrams = read_u8(&mut r)? != 0;
    let dim = read_u64(&mut r)? as usize;
    let space = FeatureSpace::new(ngram_lo, ngram_hi, word_unigrams, dim)
        .map_err(|e| Error::ModelFormat(format!("bad feature space: {e}")))?;

    let model = match kind {
        0 => {
            let alpha = read_f64(&mut r)?;
            let dim = read_u64(&mut r)? as usize;
            if dim != space.dim {
                return Err(Error::ModelFormat(format!(
                    "model dimension {dim} does not match its feature space {}",
                    space.dim
                )));
            }
            let mut log_priors = [0.0f64; 5];
            for lp in &mut log_priors {
                *lp = read_f64(&mut r)?;
            }
            let mut feature_log_likelihood = Vec::with_capacity(5);
            for _ in 0..5 {
                let mut class = vec![0.0f64; dim];
                for v in &mut class {
                    *v = read_f64(&mut r)?;
                }
                feature_log_likelihood.push(class);
            }
            Model::Nb(NbModel {
                alpha,
                dim,
                log_priors,
                feature_log_likelihood,
            })
        }
        1 => {
            let dropout = read_f64(&mut r)?;
            let max_len = read_u64(&mut r)? as usize;
            let dim = read_u64(&mut r)? as usize;
            let n_groups = read_u64(&mut r)? as usize;
            if n_groups != 3 {
                return Err(Error::ModelFormat(format!(
                    "expected 3 layer groups, found {n_groups}"
                )));
            }
            let mut groups = Vec::with_capacity(n_groups);
            for _ in 0..n_groups {
                let in_dim = read_u64(&mut r)? as usize;
                let out_dim = read_u64(&mut r)? as usize;
                if in_dim == 0 || out_dim == 0 || in_dim.saturating_mul(out_dim) > (1 << 28) {
                    return Err(Error::ModelFormat(format!(
                        "implausible layer shape {in_dim}x{out_dim}"
                    )));
                }
                let mut w = vec![0.0f64; in_dim * out_dim];
                for v in &mut w {
                    *v = read_f64(&mut r)?;
                }
                let mut b = vec![0.0f64; out_dim];
                for v in &mut b {
                    *v = read_f64(&mut r)?;
                }
                groups.push(LayerGroup {
                    in_dim,
                    out_dim,
                    w,
                    b,
                });
            }
            if groups[0].in_dim != dim
                || groups[0].out_dim != groups[1].in_dim
                || groups[1].out_dim != groups[2].in_dim
                || groups[2].out_dim != 5
            {
                return Err(Error::ModelFormat("layer shapes do not chain".into()));
            }
            Model::Mlp(MlpModel {
                groups,
                dim,
                dropout,
                max_len,
            })
        }
        other => return Err(Error::ModelFormat(format!("unknown model kind {other}"))),
    };

    Ok(ModelFile {
        space,
        model,
        language,
        variant,
    })
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
