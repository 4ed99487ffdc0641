//! Deterministic stand-in for a text encoder: random unit vectors with
//! controllable hierarchy (child concepts lean towards their parent) and
//! synonyms (small perturbations of a base concept).

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embeddings::table::{normalize, EmbeddingTable};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Weight of the parent direction in a child vector (before normalization).
pub const CHILD_PARENT_WEIGHT: f64 = 0.6;
/// Weight of the child's own random direction.
pub const CHILD_OWN_WEIGHT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    Root,
    ChildOf(String),
    SynonymOf(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub name: String,
    pub relation: Relation,
}

impl Concept {
    pub fn root(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            relation: Relation::Root,
        }
    }

    pub fn child(name: impl Into<String>, parent: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            relation: Relation::ChildOf(parent.into()),
        }
    }

    pub fn synonym(name: impl Into<String>, base: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            relation: Relation::SynonymOf(base.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVocabulary {
    /// Parents and synonym bases must precede the concepts referring to them.
    pub concepts: Vec<Concept>,
    pub seed: u64,
    pub dimension: usize,
    /// Scale of the perturbation added to a synonym's base vector; the
    /// perturbation has expected norm close to `synonym_noise`.
    pub synonym_noise: f64,
}

impl SyntheticVocabulary {
    pub fn roots<S: Into<String>>(names: impl IntoIterator<Item = S>, dimension: usize, seed: u64) -> Self {
        Self {
            concepts: names.into_iter().map(Concept::root).collect(),
            seed,
            dimension,
            synonym_noise: 0.0,
        }
    }
}

/// Upper bound on the angle (radians) between a synonym and its base for a
/// perturbation of norm at most `2 * sigma`.
pub fn synonym_angle_bound(sigma: f64) -> f64 {
    (2.0 * sigma).min(1.0).asin()
}

fn gaussian(seed: u64, name: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, name));
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn synth_vocab(spec: &SyntheticVocabulary) -> Result<EmbeddingTable> {
    if spec.dimension < 8 {
        return Err(Error::Config(format!(
            "synthetic vocabulary needs dimension >= 8, got {}",
            spec.dimension
        )));
    }
    if !(spec.synonym_noise >= 0.0) {
        return Err(Error::Config("synonym noise must be non-negative".into()));
    }
    let dim = spec.dimension;
    let mut table = EmbeddingTable::new(dim)?;
    let mut exact: HashMap<&str, Vec<f64>> = HashMap::new();
    for concept in &spec.concepts {
        if exact.contains_key(concept.name.as_str()) {
            return Err(Error::Config(format!("duplicate concept `{}`", concept.name)));
        }
        let lookup = |name: &str| {
            exact.get(name).cloned().ok_or_else(|| {
                Error::Config(format!(
                    "`{}` refers to `{name}`, which is not defined before it",
                    concept.name
                ))
            })
        };
        let own = || gaussian(spec.seed, &concept.name, dim);
        let v = match &concept.relation {
            Relation::Root => unit(own()),
            Relation::ChildOf(parent) => {
                let p = lookup(parent)?;
                let o = unit(own());
                unit(p.iter().zip(&o).map(|(a, b)| CHILD_PARENT_WEIGHT * a + CHILD_OWN_WEIGHT * b).collect())
            }
            Relation::SynonymOf(base) => {
                let b = lookup(base)?;
                if spec.synonym_noise == 0.0 {
                    b
                } else {
                    let scale = spec.synonym_noise / (dim as f64).sqrt();
                    unit(b.iter().zip(own()).map(|(x, g)| x + scale * g).collect())
                }
            }
        };
        let stored: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        // Bases are stored as f32; synonyms at zero noise copy those bits.
        let stored = match &concept.relation {
            Relation::SynonymOf(base) if spec.synonym_noise == 0.0 => {
                table.get(base).expect("base inserted earlier").to_vec()
            }
            _ => normalize(&stored),
        };
        table.insert(concept.name.clone(), stored)?;
        exact.insert(&concept.name, v);
    }
    Ok(table)
}

/// Unit vectors `normalize(B z)` for every name, with `B` a random
/// `dimension x rank` basis shared by all names and `z` drawn per name.
/// The vocabulary spans only a `rank`-dimensional subspace, so a handful of
/// concepts already cover every direction the others use.
pub fn low_rank_vocab<S: AsRef<str>>(
    names: impl IntoIterator<Item = S>,
    dimension: usize,
    rank: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    if rank == 0 || rank > dimension {
        return Err(Error::Config(format!("rank must be in 1..={dimension}, got {rank}")));
    }
    let basis: Vec<Vec<f64>> = (0..rank).map(|r| gaussian(seed, &format!("basis{r}"), dimension)).collect();
    let mut table = EmbeddingTable::new(dimension)?;
    for name in names {
        let name = name.as_ref();
        if table.contains(name) {
            return Err(Error::Config(format!("duplicate concept `{name}`")));
        }
        let z = gaussian(seed, name, rank);
        let v: Vec<f64> = (0..dimension)
            .map(|d| basis.iter().zip(&z).map(|(b, zr)| b[d] * zr).sum())
            .collect();
        let stored: Vec<f32> = unit(v).into_iter().map(|x| x as f32).collect();
        table.insert(name, normalize(&stored))?;
    }
    Ok(table)
}
