//! Binding styled assets to catalog entries by text similarity, with a
//! seeded uniform pick among the top-k matches.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::generator::{fnv1a, THEMES};
use crate::scene::{slug, AssetSpec};

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("catalog entry `{id}` is invalid: {reason}")]
    InvalidEntry { id: String, reason: String },
    #[error("duplicate catalog entry id `{0}`")]
    DuplicateId(String),
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed catalog JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub tags: Vec<String>,
    /// Width, depth, height.
    pub dims_cm: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

/// Which catalog entry an asset is displayed with, and the per-axis scale
/// that maps the entry's dims onto the asset's bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub entry_id: String,
    pub scale: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
    /// Precomputed embeddings of known query strings.
    #[serde(default)]
    pub query_embeddings: BTreeMap<String, Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_ascii_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_ascii_lowercase).collect()
}

/// |Q ∩ E| / sqrt(|Q|·|E|) over lower-cased alphanumeric tokens.
pub fn token_overlap(query: &str, text: &str) -> f64 {
    let (q, e) = (tokens(query), tokens(text));
    if q.is_empty() || e.is_empty() {
        return 0.0;
    }
    q.intersection(&e).count() as f64 / ((q.len() * e.len()) as f64).sqrt()
}

impl Catalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, RetrievalError> {
        let c = Self { entries, query_embeddings: BTreeMap::new() };
        c.validate()?;
        Ok(c)
    }

    pub fn with_query_embeddings(mut self, q: BTreeMap<String, Vec<f64>>) -> Result<Self, RetrievalError> {
        self.query_embeddings = q;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let mut seen = BTreeSet::new();
        let mut dim = None;
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(RetrievalError::DuplicateId(e.id.clone()));
            }
            if e.dims_cm.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(RetrievalError::InvalidEntry { id: e.id.clone(), reason: "dims must be positive".into() });
            }
            if let Some(v) = &e.embedding {
                if (norm(v) - 1.0).abs() > 1e-6 {
                    return Err(RetrievalError::InvalidEntry { id: e.id.clone(), reason: "embedding is not unit-norm".into() });
                }
                if *dim.get_or_insert(v.len()) != v.len() {
                    return Err(RetrievalError::InvalidEntry { id: e.id.clone(), reason: "embedding dimension differs".into() });
                }
            }
        }
        Ok(())
    }

    /// Reads a JSON array of entries, plus an optional sidecar mapping query
    /// strings to embeddings.
    pub fn load(path: &Path, sidecar: Option<&Path>) -> Result<Self, RetrievalError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| RetrievalError::Io { path: p.display().to_string(), source })
        };
        let entries: Vec<CatalogEntry> = serde_json::from_str(&read(path)?)?;
        let mut c = Self::new(entries)?;
        if let Some(s) = sidecar {
            c = c.with_query_embeddings(serde_json::from_str(&read(s)?)?)?;
        }
        Ok(c)
    }

    pub fn get(&self, id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cosine similarity when both sides have embeddings, token overlap
    /// against name and tags otherwise.
    pub fn score(&self, query: &str, entry: &CatalogEntry) -> f64 {
        if let (Some(q), Some(e)) = (self.query_embeddings.get(query), &entry.embedding) {
            if q.len() == e.len() {
                let qn = norm(q);
                if qn > 0.0 {
                    return q.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / qn;
                }
            }
        }
        let text = format!("{} {}", entry.name, entry.tags.join(" "));
        token_overlap(query, &text)
    }

    /// The `k` best entries, by descending score then ascending id.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(f64, &CatalogEntry)> {
        let mut scored: Vec<(f64, &CatalogEntry)> = self.entries.iter().map(|e| (self.score(query, e), e)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        scored.truncate(k.max(1));
        scored
    }

    /// Uniform seeded pick among the top `k` entries for `query`.
    pub fn retrieve(&self, query: &str, k: usize, seed: u64) -> Result<&CatalogEntry, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyCatalog);
        }
        let top = self.top_k(query, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(top[rng.random_range(0..top.len())].1)
    }
}

/// "{style} {material} {name}" with empty parts dropped.
pub fn query_for(asset: &AssetSpec) -> String {
    [asset.style.as_str(), asset.material.as_str(), asset.name.as_str()]
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

fn asset_seed(seed: u64, id: &str) -> u64 {
    fnv1a(id.as_bytes()) ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Binds one asset. The entry's mesh is only scaled to the asset's box;
/// the asset's dims are never changed.
pub fn bind(asset: &AssetSpec, catalog: &Catalog, k: usize, seed: u64) -> Result<Binding, RetrievalError> {
    let e = catalog.retrieve(&query_for(asset), k, asset_seed(seed, &asset.id))?;
    Ok(Binding {
        entry_id: e.id.clone(),
        scale: [asset.width_cm / e.dims_cm[0], asset.depth_cm / e.dims_cm[1], asset.height_cm / e.dims_cm[2]],
    })
}

pub fn bind_all<'a>(
    assets: impl IntoIterator<Item = &'a AssetSpec>,
    catalog: &Catalog,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<String, Binding>, RetrievalError> {
    assets.into_iter().map(|a| Ok((a.id.clone(), bind(a, catalog, k, seed)?))).collect()
}

/// Catalog generated from the generator's item tables: three finishes per
/// item and theme.
pub fn builtin_catalog() -> Catalog {
    const FINISHES: [(&str, &str, f64); 3] = [("modern", "metal", 1.0), ("rustic", "wood", 1.1), ("minimalist", "ceramic", 0.9)];
    let mut entries = Vec::new();
    for (theme, items) in THEMES {
        for it in items {
            for (style, material, s) in FINISHES {
                entries.push(CatalogEntry {
                    id: format!("{theme}-{}-{style}", slug(it.name)),
                    name: format!("{style} {}", it.name),
                    tags: vec![theme.to_string(), material.to_string(), style.to_string()],
                    dims_cm: [it.w * s, it.d * s, it.h * s],
                    embedding: None,
                    mesh: None,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    entries.dedup_by(|a, b| a.id == b.id);
    Catalog::new(entries).expect("builtin catalog is valid")
}
