use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_text_hash: String,
}

impl EmbeddingVector {
    /// Scales `values` to unit Euclidean norm; an all-zero vector stays zero.
    pub fn normalised(values: Vec<f64>, source_text: &str) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm > 0.0 { values.into_iter().map(|v| v / norm).collect() } else { values };
        Self { values, source_text_hash: crate::sha256_hex(source_text) }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "but", "by", "can",
    "do", "for", "from", "had", "has", "have", "he", "her", "his", "i", "if", "in", "into", "is", "it", "its",
    "just", "me", "more", "most", "my", "no", "not", "now", "of", "on", "or", "our", "out", "she", "so", "some",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "up", "us", "was",
    "we", "were", "what", "when", "which", "while", "who", "will", "with", "would", "you", "your",
];

/// Lower-cased alphanumeric tokens with stopwords removed and a plural "s" stripped.
pub fn content_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .map(|t| {
            if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") {
                t[..t.len() - 1].to_string()
            } else {
                t
            }
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of content tokens into `dim` buckets.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in content_tokens(text) {
        let h = fnv1a(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        let e = EmbeddingVector::normalised(vec![3.0, 4.0], "x");
        assert!((e.dot(&e) - 1.0).abs() < 1e-12);
        let z = EmbeddingVector::normalised(vec![0.0, 0.0], "");
        assert_eq!(z.values, vec![0.0, 0.0]);
    }

    #[test]
    fn tokens_drop_stopwords_and_plurals() {
        assert_eq!(content_tokens("The friends, and my Family!"), vec!["friend", "family"]);
        assert_eq!(content_tokens("glass"), vec!["glass"]);
    }
}
