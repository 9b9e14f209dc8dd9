//! Pretrained embedding tables: file loading, average pooling, cosine.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("cannot read embedding file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: token has no vector components")]
    EmptyVector { line: usize },
    #[error("line {line}: bad float '{text}'")]
    BadFloat { line: usize, text: String },
    #[error("line {line}: dimension {found} does not match {expected}")]
    InconsistentDimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite component")]
    NonFinite { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("vector dimensions differ: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Token -> dense vector map with a single declared dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, vectors: HashMap::new() }
    }

    /// Load the text format: one token per line, token followed by
    /// space-separated decimal floats. The first line fixes the dimension;
    /// the first inconsistent line aborts with its (1-based) line number.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, EmbeddingError> {
        let mut table: Option<EmbeddingTable> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line has a first field");
            let mut vector = Vec::new();
            for part in parts {
                let v: f64 = part
                    .parse()
                    .map_err(|_| EmbeddingError::BadFloat { line: lineno, text: part.into() })?;
                if !v.is_finite() {
                    return Err(EmbeddingError::NonFinite { line: lineno });
                }
                vector.push(v);
            }
            if vector.is_empty() {
                return Err(EmbeddingError::EmptyVector { line: lineno });
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            if vector.len() != table.dimension {
                return Err(EmbeddingError::InconsistentDimension {
                    line: lineno,
                    expected: table.dimension,
                    found: vector.len(),
                });
            }
            table.vectors.insert(token.to_string(), vector);
        }
        Ok(table.unwrap_or_else(|| EmbeddingTable::new(0)))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dimension);
        self.vectors.insert(token.to_string(), vector);
    }
}

/// Arithmetic mean of the vectors of in-vocabulary tokens, duplicates counted
/// per occurrence. All-out-of-vocabulary input yields the zero vector.
pub fn average_embedding(tokens: &[String], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dimension()];
    let mut count = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            count += 1;
        }
    }
    if count > 0 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    sum
}

/// `u . v / (|u| |v|)`, defined as 0 when either norm is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, DimensionMismatch> {
    if u.len() != v.len() {
        return Err(DimensionMismatch { left: u.len(), right: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![2.0, 0.0]);
        t.insert("b", vec![-1.0, 3.0]);
        t.insert("c", vec![1.0, 1.0]);
        t
    }

    #[test]
    fn singleton_mean_is_the_vector() {
        let avg = average_embedding(&["a".into()], &table());
        assert_eq!(avg, vec![2.0, 0.0]);
    }

    #[test]
    fn opposite_vectors_cancel() {
        let mut t = EmbeddingTable::new(2);
        t.insert("p", vec![1.0, -2.0]);
        t.insert("q", vec![-1.0, 2.0]);
        assert_eq!(average_embedding(&["p".into(), "q".into()], &t), vec![0.0, 0.0]);
    }

    #[test]
    fn duplicates_count_per_occurrence() {
        let avg = average_embedding(&["a".into(), "a".into(), "b".into()], &table());
        assert_eq!(avg, vec![1.0, 1.0]);
    }

    #[test]
    fn oov_tokens_are_skipped_and_all_oov_is_zero() {
        let avg = average_embedding(&["zz".into(), "a".into()], &table());
        assert_eq!(avg, vec![2.0, 0.0]);
        assert_eq!(average_embedding(&["zz".into()], &table()), vec![0.0, 0.0]);
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap().abs() < 1e-12);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn zero_norm_is_zero_similarity() {
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert_eq!(
            cosine_similarity(&[1.0], &[1.0, 2.0]).unwrap_err(),
            DimensionMismatch { left: 1, right: 2 }
        );
    }

    #[test]
    fn cosine_scale_invariance() {
        let u = [0.3, -1.2, 0.7];
        let v = [1.0, 0.4, -0.2];
        let base = cosine_similarity(&u, &v).unwrap();
        for alpha in [0.001, 0.5, 3.0, 1e6] {
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            assert!((cosine_similarity(&scaled, &v).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn loader_reads_tokens_and_rejects_inconsistency() {
        let good = "hello 0.1 0.2 0.3\nworld -1 2.5 0\n";
        let t = EmbeddingTable::read(good.as_bytes()).unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.get("world").unwrap(), &[-1.0, 2.5, 0.0]);

        let bad = "hello 0.1 0.2 0.3\nworld 1 2\n";
        match EmbeddingTable::read(bad.as_bytes()) {
            Err(EmbeddingError::InconsistentDimension { line, expected, found }) => {
                assert_eq!((line, expected, found), (2, 3, 2));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }

        let nan = "hello NaN 2\n";
        assert!(matches!(
            EmbeddingTable::read(nan.as_bytes()),
            Err(EmbeddingError::NonFinite { line: 1 })
        ));
    }
}
