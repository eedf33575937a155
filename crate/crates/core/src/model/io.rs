//! Versioned binary model container: magic "MRDT", config, both
//! vocabularies, then each free storage as (name, rows, cols, row-major
//! little-endian f64). Tying aliases are rebuilt from the recorded scheme,
//! and a round trip is bitwise exact.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::params::storage_names;
use super::{MemN2NParams, ModelConfig, ModelError, Tying};
use crate::corpus::Vocabulary;
use crate::matrix::Matrix;
use crate::taskgen::AnswerVocabulary;

const MAGIC: &[u8; 4] = b"MRDT";
const VERSION: u32 = 1;

/// Everything needed to run the model again: parameters, configuration and
/// both vocabularies.
#[derive(Debug, Clone)]
pub struct ModelContainer {
    pub params: MemN2NParams,
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub answers: AnswerVocabulary,
}

pub fn save_params(
    params: &MemN2NParams,
    config: &ModelConfig,
    vocab: &Vocabulary,
    answers: &AnswerVocabulary,
    path: &Path,
) -> Result<(), ModelError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_container(params, config, vocab, answers, &mut file)
}

pub fn load_params(path: &Path) -> Result<ModelContainer, ModelError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_container(&mut file)
}

pub fn write_container<W: Write>(
    params: &MemN2NParams,
    config: &ModelConfig,
    vocab: &Vocabulary,
    answers: &AnswerVocabulary,
    out: &mut W,
) -> Result<(), ModelError> {
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(VERSION)?;
    out.write_u64::<LittleEndian>(config.d as u64)?;
    out.write_u64::<LittleEndian>(config.hops as u64)?;
    out.write_u8(match config.tying {
        Tying::Adjacent => 0,
        Tying::Layerwise => 1,
    })?;
    out.write_u64::<LittleEndian>(config.memory_capacity as u64)?;
    out.write_u64::<LittleEndian>(config.answer_size as u64)?;
    out.write_u64::<LittleEndian>(config.vocab_size as u64)?;
    out.write_u8(config.linear_attention as u8)?;

    write_string_list(out, vocab.tokens())?;
    write_string_list(out, answers.labels())?;

    let storages = params.storages();
    out.write_u64::<LittleEndian>(storages.len() as u64)?;
    for (name, matrix) in storages {
        write_string(out, &name)?;
        out.write_u64::<LittleEndian>(matrix.rows() as u64)?;
        out.write_u64::<LittleEndian>(matrix.cols() as u64)?;
        for v in matrix.as_slice() {
            out.write_f64::<LittleEndian>(*v)?;
        }
    }
    Ok(())
}

pub fn read_container<R: Read>(input: &mut R) -> Result<ModelContainer, ModelError> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| ModelError::Truncated { what: "magic".into() })?;
    if &magic != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = read_ctx(input.read_u32::<LittleEndian>(), "version")?;
    if version != VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let d = read_ctx(input.read_u64::<LittleEndian>(), "embedding size")? as usize;
    let hops = read_ctx(input.read_u64::<LittleEndian>(), "hop count")? as usize;
    let tying = match read_ctx(input.read_u8(), "tying scheme")? {
        0 => Tying::Adjacent,
        1 => Tying::Layerwise,
        other => {
            return Err(ModelError::Corrupt {
                what: "tying scheme".into(),
                message: format!("unknown code {other}"),
            })
        }
    };
    let memory_capacity = read_ctx(input.read_u64::<LittleEndian>(), "memory capacity")? as usize;
    let answer_size = read_ctx(input.read_u64::<LittleEndian>(), "answer size")? as usize;
    let vocab_size = read_ctx(input.read_u64::<LittleEndian>(), "vocab size")? as usize;
    let linear_attention = read_ctx(input.read_u8(), "linear flag")? != 0;

    let tokens = read_string_list(input, "vocabulary")?;
    let labels = read_string_list(input, "answer vocabulary")?;
    if tokens.len() != vocab_size {
        return Err(ModelError::Corrupt {
            what: "vocabulary".into(),
            message: format!("{} tokens listed, config says {vocab_size}", tokens.len()),
        });
    }
    if labels.len() != answer_size {
        return Err(ModelError::Corrupt {
            what: "answer vocabulary".into(),
            message: format!("{} labels listed, config says {answer_size}", labels.len()),
        });
    }
    // Reserved entries are part of the stored list.
    let vocab = Vocabulary::from_tokens(tokens.iter().skip(2));
    if vocab.len() != vocab_size {
        return Err(ModelError::Corrupt {
            what: "vocabulary".into(),
            message: "duplicate or misplaced reserved tokens".into(),
        });
    }
    let answers = AnswerVocabulary::from_labels(&labels);
    if answers.len() != answer_size {
        return Err(ModelError::Corrupt {
            what: "answer vocabulary".into(),
            message: "duplicate labels".into(),
        });
    }

    let config = ModelConfig {
        d,
        hops,
        tying,
        memory_capacity,
        answer_size,
        vocab_size,
        linear_attention,
    };

    let n_matrices = read_ctx(input.read_u64::<LittleEndian>(), "matrix count")? as usize;
    let expected = storage_names(tying, hops);
    if n_matrices != expected.len() {
        return Err(ModelError::Corrupt {
            what: "matrix count".into(),
            message: format!("{n_matrices} stored, tying scheme needs {}", expected.len()),
        });
    }
    let mut matrices: HashMap<String, Matrix> = HashMap::new();
    for _ in 0..n_matrices {
        let name = read_string(input, "matrix name")?;
        let rows = read_ctx(input.read_u64::<LittleEndian>(), &format!("matrix {name}"))? as usize;
        let cols = read_ctx(input.read_u64::<LittleEndian>(), &format!("matrix {name}"))? as usize;
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = read_ctx(input.read_f64::<LittleEndian>(), &format!("matrix {name}"))?;
        }
        matrices.insert(name, m);
    }

    let params = MemN2NParams::from_storages(tying, hops, answer_size, |name| {
        matrices.remove(name).ok_or_else(|| ModelError::Corrupt {
            what: format!("matrix {name}"),
            message: "missing from container".into(),
        })
    })?;
    Ok(ModelContainer {
        params,
        config,
        vocab,
        answers,
    })
}

fn read_ctx<T>(r: Result<T, std::io::Error>, what: &str) -> Result<T, ModelError> {
    r.map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => ModelError::Truncated { what: what.to_string() },
        _ => ModelError::Io(e),
    })
}

fn write_string<W: Write>(out: &mut W, s: &str) -> Result<(), ModelError> {
    out.write_u32::<LittleEndian>(s.len() as u32)?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string<R: Read>(input: &mut R, what: &str) -> Result<String, ModelError> {
    let len = read_ctx(input.read_u32::<LittleEndian>(), what)? as usize;
    let mut buf = vec![0u8; len];
    input
        .read_exact(&mut buf)
        .map_err(|_| ModelError::Truncated { what: what.to_string() })?;
    String::from_utf8(buf).map_err(|_| ModelError::Corrupt {
        what: what.to_string(),
        message: "not valid utf-8".into(),
    })
}

fn write_string_list<W: Write>(out: &mut W, items: &[String]) -> Result<(), ModelError> {
    out.write_u64::<LittleEndian>(items.len() as u64)?;
    for s in items {
        write_string(out, s)?;
    }
    Ok(())
}

fn read_string_list<R: Read>(input: &mut R, what: &str) -> Result<Vec<String>, ModelError> {
    let n = read_ctx(input.read_u64::<LittleEndian>(), what)? as usize;
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        items.push(read_string(input, what)?);
    }
    Ok(items)
}
