use ndarray::Array2;

use super::EmbeddingTable;
use crate::error::{domain_err, Result};

/// Lowercase, split on anything that is not alphanumeric, drop empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Embed `tokens` into an `n × D` matrix: the first `n` tokens are looked up
/// (unknown tokens become zero rows), the remainder is zero padding.
///
/// Returns the matrix and the valid length `min(len, n)`; an empty token
/// list yields an all-padding matrix with valid length 0.
pub fn encode<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable, n: usize) -> Result<(Array2<f64>, usize)> {
    if n == 0 {
        return Err(domain_err("sequence length must be at least 1"));
    }
    let valid = tokens.len().min(n);
    let mut out = Array2::zeros((n, table.dim()));
    for (mut row, token) in out.rows_mut().into_iter().zip(tokens.iter().take(valid)) {
        row.assign(&table.vector(token.as_ref()));
    }
    Ok((out, valid))
}
