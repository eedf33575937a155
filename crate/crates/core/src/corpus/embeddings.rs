//! Loading pretrained word vectors into an embedding matrix.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{CorpusError, Vocabulary, NULL_INDEX};
use crate::matrix::Matrix;

/// Build a d x |V| embedding matrix from a word-vector text file
/// ("token v_1 ... v_d" per line). Columns for tokens missing from the file
/// are drawn from Gaussian(0, 0.1) in vocabulary-index order, so a fixed rng
/// always yields the same matrix. The NULL column ends up all zeros.
pub fn load_pretrained_embeddings<R: Rng>(
    text: &str,
    vocab: &Vocabulary,
    d: usize,
    rng: &mut R,
) -> Result<Matrix, CorpusError> {
    let mut file_vectors: std::collections::HashMap<&str, Vec<f64>> =
        std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap();
        let values: Result<Vec<f64>, _> = parts.map(str::parse).collect();
        let values = values.map_err(|_| CorpusError::Malformed {
            line: i + 1,
            message: format!("non-numeric vector component for token \"{token}\""),
        })?;
        if values.len() != d {
            return Err(CorpusError::DimensionMismatch {
                file_dim: values.len(),
                requested: d,
            });
        }
        file_vectors.insert(token, values);
    }

    let normal = Normal::new(0.0, 0.1).unwrap();
    let mut matrix = Matrix::zeros(d, vocab.len());
    for v in 0..vocab.len() {
        match file_vectors.get(vocab.token(v)) {
            Some(col) => matrix.set_column(v, col),
            None => {
                let col: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
                matrix.set_column(v, &col);
            }
        }
    }
    matrix.zero_column(NULL_INDEX);
    Ok(matrix)
}
