//! Cosine geometry, agglomerative clustering of theme codes and
//! consolidation of clusters into named risk factors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThematicError {
    #[error("vector {index} is all zeros; cosine similarity is undefined")]
    ZeroVector { index: usize },
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("nothing to cluster")]
    Empty,
    #[error("configuration: {0}")]
    Config(String),
    #[error("override names cluster {0}, which does not exist")]
    DanglingOverride(usize),
    #[error("overrides file line {line}: {message}")]
    Overrides { line: usize, message: String },
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, ThematicError> {
    if a.len() != b.len() {
        return Err(ThematicError::DimensionMismatch { index: 1, expected: a.len(), found: b.len() });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 {
        return Err(ThematicError::ZeroVector { index: 0 });
    }
    if nb == 0.0 {
        return Err(ThematicError::ZeroVector { index: 1 });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub linkage: Linkage,
    /// Merging stops once the smallest cosine distance exceeds this.
    pub merge_threshold: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { linkage: Linkage::Average, merge_threshold: 0.4 }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), ThematicError> {
        if self.merge_threshold > 0.0 && self.merge_threshold < 2.0 {
            Ok(())
        } else {
            Err(ThematicError::Config(format!("merge_threshold must lie in (0, 2), got {}", self.merge_threshold)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeCluster {
    /// Ascending input indices.
    pub member_indices: Vec<usize>,
    pub representative_index: usize,
    /// Mean pairwise cosine similarity; 1 for singletons.
    pub cohesion: f64,
}

/// Pairwise cosine-distance matrix, validating dimensions and non-zero norms.
pub fn cosine_distances<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<Vec<f64>>, ThematicError> {
    let first = vectors.first().ok_or(ThematicError::Empty)?;
    let dim = first.as_ref().len();
    let mut unit = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(ThematicError::DimensionMismatch { index, expected: dim, found: v.len() });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ThematicError::ZeroVector { index });
        }
        unit.push(v.iter().map(|x| x / norm).collect::<Vec<f64>>());
    }
    let n = unit.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let sim: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
            let dist = 1.0 - sim.clamp(-1.0, 1.0);
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    Ok(d)
}

/// Linkage distance between two member sets over a point-distance matrix.
pub fn linkage_distance(d: &[Vec<f64>], a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| d[i][j]));
    match linkage {
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Complete => pairs.fold(f64::NEG_INFINITY, f64::max),
        Linkage::Average => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
    }
}

/// Bottom-up clustering. At each step the closest pair of clusters merges;
/// exact ties go to the pair with the smallest (lower min-member, higher
/// min-member). Stops when the closest pair is farther than the threshold.
/// Clusters are returned ordered by their smallest member.
pub fn agglomerative_cluster<V: AsRef<[f64]>>(
    vectors: &[V],
    config: &ClusteringConfig,
) -> Result<Vec<CodeCluster>, ThematicError> {
    config.validate()?;
    let d = cosine_distances(vectors)?;
    let n = d.len();
    // Active clusters keyed by slot; `link` holds cluster-to-cluster distances
    // (sums of point distances for average linkage).
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut link = d.clone();

    loop {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..n {
            let Some(ma) = &members[a] else { continue };
            for b in a + 1..n {
                let Some(mb) = &members[b] else { continue };
                let dist = match config.linkage {
                    Linkage::Average => link[a][b] / (ma.len() * mb.len()) as f64,
                    _ => link[a][b],
                };
                // slots are min members, so (a, b) is already the tie-break key
                let better = match best {
                    None => true,
                    Some((bd, key, _, _)) => dist < bd || (dist == bd && (a, b) < key),
                };
                if better {
                    best = Some((dist, (a, b), a, b));
                }
            }
        }
        let Some((dist, _, a, b)) = best else { break };
        if dist > config.merge_threshold {
            break;
        }
        let mb = members[b].take().unwrap();
        for c in 0..n {
            if c == a || c == b || members[c].is_none() {
                continue;
            }
            let merged = match config.linkage {
                Linkage::Single => link[a][c].min(link[b][c]),
                Linkage::Complete => link[a][c].max(link[b][c]),
                Linkage::Average => link[a][c] + link[b][c],
            };
            link[a][c] = merged;
            link[c][a] = merged;
        }
        let ma = members[a].as_mut().unwrap();
        ma.extend(mb);
        ma.sort_unstable();
    }

    let clusters = members
        .into_iter()
        .flatten()
        .map(|m| {
            let representative_index = medoid(&d, &m);
            let cohesion = cohesion(&d, &m);
            CodeCluster { member_indices: m, representative_index, cohesion }
        })
        .collect();
    Ok(clusters)
}

fn medoid(d: &[Vec<f64>], members: &[usize]) -> usize {
    if members.len() == 1 {
        return members[0];
    }
    let mut best = (members[0], f64::NEG_INFINITY);
    for &i in members {
        let mean = members.iter().filter(|&&j| j != i).map(|&j| 1.0 - d[i][j]).sum::<f64>()
            / (members.len() - 1) as f64;
        if mean > best.1 {
            best = (i, mean);
        }
    }
    best.0
}

fn cohesion(d: &[Vec<f64>], members: &[usize]) -> f64 {
    if members.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            sum += 1.0 - d[i][j];
            count += 1;
        }
    }
    sum / count as f64
}

/// Member maximising mean cosine similarity to the other members; ties go
/// to the smallest index.
pub fn representative_code<V: AsRef<[f64]>>(members: &[usize], vectors: &[V]) -> Result<usize, ThematicError> {
    if members.is_empty() {
        return Err(ThematicError::Empty);
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let d = cosine_distances(vectors)?;
    Ok(medoid(&d, &sorted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFactor {
    pub name: String,
    pub cluster_id: usize,
    pub size: usize,
    pub member_codes: Vec<String>,
}

/// One factor per cluster, named by override or by the representative code,
/// ordered by descending size then name.
pub fn consolidate(
    clusters: &[CodeCluster],
    codes: &[String],
    overrides: &BTreeMap<usize, String>,
) -> Result<Vec<RiskFactor>, ThematicError> {
    if let Some(&id) = overrides.keys().find(|&&id| id >= clusters.len()) {
        return Err(ThematicError::DanglingOverride(id));
    }
    let code = |i: usize| codes.get(i).cloned().unwrap_or_default();
    let mut factors: Vec<RiskFactor> = clusters
        .iter()
        .enumerate()
        .map(|(id, c)| RiskFactor {
            name: overrides.get(&id).cloned().unwrap_or_else(|| code(c.representative_index)),
            cluster_id: id,
            size: c.member_indices.len(),
            member_codes: c.member_indices.iter().map(|&i| code(i)).collect(),
        })
        .collect();
    factors.sort_by(|a, b| b.size.cmp(&a.size).then_with(|| a.name.cmp(&b.name)).then(a.cluster_id.cmp(&b.cluster_id)));
    Ok(factors)
}

/// Parses `cluster_id,factor_name` rows (header required).
pub fn parse_overrides_csv(bytes: &[u8]) -> Result<BTreeMap<usize, String>, ThematicError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers().map_err(|e| ThematicError::Overrides { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != ["cluster_id", "factor_name"] {
        return Err(ThematicError::Overrides { line: 1, message: "expected header cluster_id,factor_name".into() });
    }
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| ThematicError::Overrides { line, message: e.to_string() })?;
        let (Some(id), Some(name)) = (row.get(0), row.get(1)) else {
            return Err(ThematicError::Overrides { line, message: "expected two fields".into() });
        };
        let id: usize = id.parse().map_err(|_| ThematicError::Overrides { line, message: format!("bad id {id:?}") })?;
        if name.is_empty() {
            return Err(ThematicError::Overrides { line, message: "empty factor name".into() });
        }
        if out.insert(id, name.to_string()).is_some() {
            return Err(ThematicError::Overrides { line, message: format!("cluster {id} listed twice") });
        }
    }
    Ok(out)
}

/// `cluster_id,size,representative_code,member_codes` with `;`-joined members.
pub fn cluster_report_csv(clusters: &[CodeCluster], codes: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["cluster_id", "size", "representative_code", "member_codes"]);
    let code = |i: usize| codes.get(i).map(String::as_str).unwrap_or("");
    for (id, c) in clusters.iter().enumerate() {
        let members = c.member_indices.iter().map(|&i| code(i)).collect::<Vec<_>>().join(";");
        let _ = w.write_record([id.to_string(), c.member_indices.len().to_string(), code(c.representative_index).into(), members]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
