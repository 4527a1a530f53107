//! Vision-language point features: cosine scoring against text queries,
//! background masking, category voting, PCA compression and unprojection
//! of per-pixel camera features onto LiDAR points.

mod pca;
mod unproject;
pub mod vocab;

use crate::error::{Error, Result};
use crate::geometry::{Box7, Point3};

pub use pca::{pca_fit, PcaAccumulator, PcaModel};
pub use unproject::{unproject_pixel_features, CameraView, FeatureMap, PinholeCalibration};

/// Per-point features, row-major `N × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingSet {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dim must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite embedding value in row {}",
                i / dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Rows selected by `mask`.
    pub fn select(&self, mask: &[bool]) -> Self {
        let mut data = Vec::new();
        for (row, &keep) in self.rows().zip(mask) {
            if keep {
                data.extend_from_slice(row);
            }
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}

/// A named category with one embedding per prompt string.
#[derive(Debug, Clone, PartialEq)]
pub struct TextQuery {
    pub category: String,
    pub prompts: Vec<String>,
    embeddings: Vec<Vec<f32>>,
}

impl TextQuery {
    pub fn new(
        category: impl Into<String>,
        prompts: Vec<String>,
        embeddings: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if embeddings.is_empty() || prompts.len() != embeddings.len() {
            return Err(Error::InvalidParameter(format!(
                "query needs one embedding per prompt ({} prompts, {} embeddings)",
                prompts.len(),
                embeddings.len()
            )));
        }
        let dim = embeddings[0].len();
        for e in &embeddings {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
            if e.iter().any(|v| !v.is_finite()) || norm(e) == 0.0 {
                return Err(Error::InvalidParameter(
                    "prompt embeddings must be finite and non-zero".into(),
                ));
            }
        }
        Ok(Self {
            category: category.into(),
            prompts,
            embeddings,
        })
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn embeddings(&self) -> &[Vec<f32>] {
        &self.embeddings
    }

    /// Best similarity over prompts.
    fn best_similarity(&self, v: &[f32], v_norm: f64) -> f64 {
        self.embeddings
            .iter()
            .map(|e| dot(v, e) / (v_norm * norm(e)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(a, b)| *a as f64 * *b as f64).sum()
}

fn norm(u: &[f32]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

fn check_dims(emb: &EmbeddingSet, queries: &[TextQuery]) -> Result<()> {
    for q in queries {
        if q.dim() != emb.dim() {
            return Err(Error::DimensionMismatch {
                expected: emb.dim(),
                got: q.dim(),
            });
        }
    }
    Ok(())
}

/// Per-point background flags (`true` = background).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundMask(pub Vec<bool>);

impl BackgroundMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// A point is background when its best similarity over every prompt of
/// every background query is at least `eps_bg`. Zero-norm rows carry no
/// evidence and are never background.
pub fn background_mask(
    emb: &EmbeddingSet,
    bg_queries: &[TextQuery],
    eps_bg: f64,
) -> Result<BackgroundMask> {
    if bg_queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    if !eps_bg.is_finite() {
        return Err(Error::InvalidParameter("eps_bg must be finite".into()));
    }
    check_dims(emb, bg_queries)?;
    Ok(BackgroundMask(
        emb.rows()
            .map(|row| {
                let n = norm(row);
                n > 0.0
                    && bg_queries
                        .iter()
                        .any(|q| q.best_similarity(row, n) >= eps_bg)
            })
            .collect(),
    ))
}

/// Category vote of one point. `category` is `None` for zero-norm rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCategory {
    pub category: Option<usize>,
    pub score: f64,
}

/// Arg-max category per point; equal scores go to the lower index.
pub fn assign_point_categories(
    emb: &EmbeddingSet,
    queries: &[TextQuery],
) -> Result<Vec<PointCategory>> {
    if queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    check_dims(emb, queries)?;
    Ok(emb
        .rows()
        .map(|row| {
            let n = norm(row);
            if n == 0.0 {
                return PointCategory {
                    category: None,
                    score: 0.0,
                };
            }
            let mut best = (0, f64::NEG_INFINITY);
            for (ci, q) in queries.iter().enumerate() {
                let s = q.best_similarity(row, n);
                if s > best.1 {
                    best = (ci, s);
                }
            }
            PointCategory {
                category: Some(best.0),
                score: best.1,
            }
        })
        .collect())
}

/// Majority vote over the enclosed points. Ties go to the higher mean
/// similarity, then the lower category index. `None` when no enclosed point
/// has a category.
pub fn assign_box_category(
    b: &Box7,
    points: &[Point3],
    categories: &[PointCategory],
) -> Option<usize> {
    let mut tally: Vec<(usize, f64)> = Vec::new();
    for (p, pc) in points.iter().zip(categories) {
        let Some(c) = pc.category else { continue };
        if !b.contains(p) {
            continue;
        }
        if tally.len() <= c {
            tally.resize(c + 1, (0, 0.0));
        }
        tally[c].0 += 1;
        tally[c].1 += pc.score;
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (c, &(count, sum)) in tally.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mean = sum / count as f64;
        let better = match best {
            None => true,
            Some((_, bc, bm)) => count > bc || (count == bc && mean > bm),
        };
        if better {
            best = Some((c, count, mean));
        }
    }
    best.map(|(c, _, _)| c)
}
