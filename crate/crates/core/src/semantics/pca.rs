use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{EmbeddingSet, TextQuery};
use crate::error::{Error, Result};

/// Streaming first/second moment accumulator.
///
/// Memory is `O(D²)` regardless of how many vectors are folded in, and two
/// accumulators over disjoint batches merge exactly (Chan et al. pairwise
/// update), so workers can fit shards independently.
#[derive(Debug, Clone)]
pub struct PcaAccumulator {
    count: u64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl PcaAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let x = DVector::from_iterator(v.len(), v.iter().map(|&a| a as f64));
        self.count += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.scatter.ger(1.0, &delta, &delta2, 1.0);
        Ok(())
    }

    pub fn push_batch<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f32]>) -> Result<()> {
        let mut batch = PcaAccumulator::new(self.dim());
        for r in rows {
            batch.push(r)?;
        }
        self.merge(&batch)
    }

    pub fn merge(&mut self, other: &PcaAccumulator) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        self.scatter += &other.scatter;
        self.scatter.ger(na * nb / n, &delta, &delta, 1.0);
        self.mean += delta * (nb / n);
        self.count += other.count;
        Ok(())
    }

    /// Population covariance (divides by N).
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.count == 0 {
            return DMatrix::zeros(self.dim(), self.dim());
        }
        &self.scatter / self.count as f64
    }

    pub fn finalize(&self, k: usize) -> Result<PcaModel> {
        let d = self.dim();
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!(
                "PCA needs 1 <= K <= D (K = {k}, D = {d})"
            )));
        }
        if (self.count as usize) < k {
            return Err(Error::InvalidParameter(format!(
                "PCA needs at least K = {k} samples, got {}",
                self.count
            )));
        }
        let cov = self.covariance();
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = DMatrix::zeros(k, d);
        let mut variances = Vec::with_capacity(k);
        for (row, &j) in order.iter().take(k).enumerate() {
            let mut v = eig.eigenvectors.column(j).clone_owned();
            // Sign convention: largest-magnitude entry positive.
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v = -v;
            }
            components.set_row(row, &v.transpose());
            variances.push(eig.eigenvalues[j].max(0.0));
        }
        Ok(PcaModel {
            mean: self.mean.clone(),
            components,
            explained_variances: variances,
        })
    }
}

/// Fits a `k`-component PCA in one pass over `rows`.
pub fn pca_fit<'a>(rows: impl IntoIterator<Item = &'a [f32]>, dim: usize, k: usize) -> Result<PcaModel> {
    let mut acc = PcaAccumulator::new(dim);
    for r in rows {
        acc.push(r)?;
    }
    acc.finalize(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `K × D`, orthonormal rows.
    pub components: DMatrix<f64>,
    pub explained_variances: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, v: &[f32]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        let x = DVector::from_iterator(v.len(), v.iter().map(|&a| a as f64)) - &self.mean;
        Ok((&self.components * x).iter().copied().collect())
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: z.len(),
            });
        }
        let z = DVector::from_column_slice(z);
        Ok((self.components.transpose() * z + &self.mean).iter().copied().collect())
    }

    /// Compresses every row. All-zero rows (points without camera evidence)
    /// stay all-zero so they keep carrying no semantic signal.
    pub fn transform_embeddings(&self, emb: &EmbeddingSet) -> Result<EmbeddingSet> {
        let k = self.output_dim();
        let mut data = Vec::with_capacity(emb.len() * k);
        for row in emb.rows() {
            if row.iter().all(|&v| v == 0.0) {
                data.extend(std::iter::repeat_n(0.0f32, k));
            } else {
                data.extend(self.transform(row)?.into_iter().map(|v| v as f32));
            }
        }
        EmbeddingSet::new(k, data)
    }

    pub fn transform_query(&self, q: &TextQuery) -> Result<TextQuery> {
        let embeddings = q
            .embeddings()
            .iter()
            .map(|e| Ok(self.transform(e)?.into_iter().map(|v| v as f32).collect()))
            .collect::<Result<Vec<Vec<f32>>>>()?;
        TextQuery::new(q.category.clone(), q.prompts.clone(), embeddings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|j| rng.random_range(-1.0f32..1.0) * (1.0 + j as f32)).collect())
            .collect()
    }

    #[test]
    fn full_rank_round_trip() {
        let rows = random_rows(100, 6, 1);
        let model = pca_fit(rows.iter().map(|r| r.as_slice()), 6, 6).unwrap();
        for r in &rows {
            let back = model.inverse(&model.transform(r).unwrap()).unwrap();
            for (a, b) in r.iter().zip(back) {
                assert!((*a as f64 - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rank_one_line() {
        let dir = [1.0f32, 2.0, -2.0];
        let rows: Vec<Vec<f32>> = (0..50)
            .map(|i| {
                let t = i as f32 * 0.1 - 2.0;
                vec![5.0 + t * dir[0], -1.0 + t * dir[1], 3.0 + t * dir[2]]
            })
            .collect();
        let acc = {
            let mut a = PcaAccumulator::new(3);
            for r in &rows {
                a.push(r).unwrap();
            }
            a
        };
        let total = acc.covariance().trace();
        let model = acc.finalize(3).unwrap();
        assert!((model.explained_variances[0] - total).abs() < 1e-6 * total);
        assert!(model.explained_variances[1] < 1e-6);
        assert!(model.explained_variances[2] < 1e-6);
    }

    #[test]
    fn merge_equals_single_pass() {
        let rows = random_rows(300, 8, 2);
        let mut whole = PcaAccumulator::new(8);
        for r in &rows {
            whole.push(r).unwrap();
        }
        let mut merged = PcaAccumulator::new(8);
        for chunk in rows.chunks(37) {
            merged.push_batch(chunk.iter().map(|r| r.as_slice())).unwrap();
        }
        assert_eq!(whole.count(), merged.count());
        assert!((whole.covariance() - merged.covariance()).amax() < 1e-9);
    }

    #[test]
    fn k_larger_than_d_errors() {
        let rows = random_rows(10, 3, 3);
        assert!(pca_fit(rows.iter().map(|r| r.as_slice()), 3, 4).is_err());
    }

    #[test]
    fn zero_rows_stay_zero() {
        let rows = random_rows(40, 4, 4);
        let model = pca_fit(rows.iter().map(|r| r.as_slice()), 4, 2).unwrap();
        let emb = EmbeddingSet::from_rows(4, &[vec![0.0; 4], rows[0].clone()]).unwrap();
        let out = model.transform_embeddings(&emb).unwrap();
        assert_eq!(out.dim(), 2);
        assert_eq!(out.row(0), &[0.0, 0.0]);
        assert!(out.row(1).iter().any(|&v| v != 0.0));
    }
}
