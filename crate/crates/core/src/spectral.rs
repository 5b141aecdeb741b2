//! Cached spectral decompositions `X_J^T X_J = U^T diag(d) U` of per-group
//! Gram matrices, optionally restricted to a column subset of the group.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::GroupedProblem;

/// Which Gram matrix a spectrum belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpectrumKey {
    Full(usize),
    /// Group index and a sorted, strict subset of its local column indices.
    Subset(usize, Vec<usize>),
}

impl SpectrumKey {
    pub fn group(&self) -> usize {
        match self {
            SpectrumKey::Full(k) | SpectrumKey::Subset(k, _) => *k,
        }
    }
}

/// Eigen-pairs of a symmetric PSD Gram matrix. Rows of `u` are eigenvectors,
/// so the Gram matrix equals `u^T diag(d) u`.
#[derive(Debug, Clone)]
pub struct GroupSpectrum {
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    pub source: SpectrumKey,
}

impl GroupSpectrum {
    pub fn from_gram(gram: DMatrix<f64>, source: SpectrumKey) -> Self {
        let eig = SymmetricEigen::new(gram);
        let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let d = eig.eigenvalues.map(|v| {
            if v < -1e-8 * max {
                log::warn!(
                    "Gram eigenvalue {v:e} below round-off level for {source:?}; clamped to 0"
                );
            }
            v.max(0.0)
        });
        Self {
            u: eig.eigenvectors.transpose(),
            d,
            source,
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// `u^T diag(d) u`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.u.transpose() * DMatrix::from_diagonal(&self.d) * &self.u
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub entries: usize,
    pub hits: usize,
    pub misses: usize,
}

/// Per-solve cache of group spectra. Not synchronized: a solve owns its cache.
#[derive(Debug, Default)]
pub struct SpectralCache {
    map: HashMap<SpectrumKey, Arc<GroupSpectrum>>,
    hits: usize,
    misses: usize,
}

impl SpectralCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            entries: self.map.len(),
            hits: self.hits,
            misses: self.misses,
        }
    }

    /// Number of cached entries belonging to group `k`.
    pub fn entries_for_group(&self, k: usize) -> usize {
        self.map.keys().filter(|key| key.group() == k).count()
    }

    /// Spectrum of `X_k^T X_k`, or of `(X_k)_J^T (X_k)_J` when `subset` is given.
    pub fn gram_spectrum(
        &mut self,
        problem: &GroupedProblem,
        k: usize,
        subset: Option<&[usize]>,
    ) -> Result<Arc<GroupSpectrum>> {
        problem.check_group(k)?;
        let key = make_key(problem, k, subset)?;
        if let Some(s) = self.map.get(&key) {
            self.hits += 1;
            return Ok(Arc::clone(s));
        }
        self.misses += 1;
        let xk = problem.group_design(k);
        let gram = match &key {
            SpectrumKey::Full(_) => xk.tr_mul(&xk),
            SpectrumKey::Subset(_, cols) => {
                let sub = xk.select_columns(cols.iter());
                sub.tr_mul(&sub)
            }
        };
        let spectrum = Arc::new(GroupSpectrum::from_gram(gram, key.clone()));
        self.map.insert(key, Arc::clone(&spectrum));
        Ok(spectrum)
    }
}

fn make_key(problem: &GroupedProblem, k: usize, subset: Option<&[usize]>) -> Result<SpectrumKey> {
    let Some(cols) = subset else {
        return Ok(SpectrumKey::Full(k));
    };
    let size = problem.group_size(k);
    if cols.is_empty() {
        return Err(Error::InvalidInput("column subset must be nonempty".into()));
    }
    let mut sorted = cols.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cols.len() {
        return Err(Error::InvalidInput(
            "column subset has repeated indices".into(),
        ));
    }
    if let Some(&bad) = sorted.iter().find(|&&j| j >= size) {
        return Err(Error::InvalidInput(format!(
            "column {bad} outside group {k} of size {size}"
        )));
    }
    if sorted.len() == size {
        Ok(SpectrumKey::Full(k))
    } else {
        Ok(SpectrumKey::Subset(k, sorted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(x: DMatrix<f64>, groups: Vec<usize>) -> GroupedProblem {
        let n = x.nrows();
        GroupedProblem::new(x, DVector::from_element(n, 1.0), groups).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    fn check_invariants(s: &GroupSpectrum, gram: &DMatrix<f64>) {
        let q = s.dim();
        let orth = s.u.transpose() * &s.u - DMatrix::identity(q, q);
        assert!(max_abs(&orth) <= 1e-10);
        let err = (s.reconstruct() - gram).norm();
        assert!(err <= 1e-8 * gram.norm().max(1e-300) || err < 1e-14);
        assert!(s.d.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn identity_gram() {
        let p = problem(DMatrix::identity(2, 2), vec![2]);
        let mut cache = SpectralCache::new();
        let s = cache.gram_spectrum(&p, 0, None).unwrap();
        check_invariants(&s, &DMatrix::identity(2, 2));
        let mut d: Vec<f64> = s.d.iter().cloned().collect();
        d.sort_by(f64::total_cmp);
        assert_relative_eq!(d[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(d[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_one_gram() {
        // columns (1,0) and (1,0): Gram [[1,1],[1,1]] with eigenvalues 2 and 0
        let p = problem(dmatrix![1.0, 1.0; 0.0, 0.0], vec![2]);
        let mut cache = SpectralCache::new();
        let s = cache.gram_spectrum(&p, 0, None).unwrap();
        let mut d: Vec<f64> = s.d.iter().cloned().collect();
        d.sort_by(|a, b| b.total_cmp(a));
        assert_relative_eq!(d[0], 2.0, epsilon = 1e-14);
        assert!(d[1].abs() < 1e-14);
        check_invariants(&s, &dmatrix![1.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn cache_counts_hits_and_misses() {
        let p = problem(DMatrix::identity(3, 3), vec![2, 1]);
        let mut cache = SpectralCache::new();
        assert_eq!(cache.stats(), CacheStats::default());
        let a = cache.gram_spectrum(&p, 0, None).unwrap();
        let b = cache.gram_spectrum(&p, 0, None).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(
            cache.stats(),
            CacheStats {
                entries: 1,
                hits: 1,
                misses: 1
            }
        );
    }

    #[test]
    fn subset_key_normalization() {
        let p = problem(DMatrix::identity(3, 3), vec![3]);
        let mut cache = SpectralCache::new();
        let a = cache.gram_spectrum(&p, 0, Some(&[2, 0])).unwrap();
        let b = cache.gram_spectrum(&p, 0, Some(&[0, 2])).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let full = cache.gram_spectrum(&p, 0, None).unwrap();
        let all = cache.gram_spectrum(&p, 0, Some(&[1, 2, 0])).unwrap();
        assert!(Arc::ptr_eq(&full, &all));
        assert_eq!(cache.stats().entries, 2);
    }

    #[test]
    fn bad_subsets_rejected() {
        let p = problem(DMatrix::identity(3, 3), vec![3]);
        let mut cache = SpectralCache::new();
        assert!(matches!(
            cache.gram_spectrum(&p, 0, Some(&[])),
            Err(Error::InvalidInput(_))
        ));
        assert!(cache.gram_spectrum(&p, 0, Some(&[3])).is_err());
        assert!(cache.gram_spectrum(&p, 0, Some(&[1, 1])).is_err());
        assert!(matches!(
            cache.gram_spectrum(&p, 1, None),
            Err(Error::GroupOutOfRange { .. })
        ));
    }

    #[test]
    fn random_groups_satisfy_invariants_and_subset_cross_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..8);
            let q = rng.random_range(1..6);
            let x = DMatrix::from_fn(n, q + 1, |_, _| rng.random_range(-2.0..2.0));
            let p = problem(x.clone(), vec![q, 1]);
            let mut cache = SpectralCache::new();
            let s = cache.gram_spectrum(&p, 0, None).unwrap();
            let xk = x.columns(0, q);
            let gram = xk.tr_mul(&xk);
            check_invariants(&s, &gram);
            let fro2 = xk.norm_squared();
            assert!(s.d.iter().all(|&d| d <= fro2 * (1.0 + 1e-12)));

            let subset: Vec<usize> = (0..q).filter(|_| rng.random_bool(0.5)).collect();
            if subset.is_empty() || subset.len() == q {
                continue;
            }
            let ss = cache.gram_spectrum(&p, 0, Some(&subset)).unwrap();
            let sliced = xk.select_columns(subset.iter());
            let direct = GroupSpectrum::from_gram(sliced.tr_mul(&sliced), SpectrumKey::Full(0));
            let mut a: Vec<f64> = ss.d.iter().cloned().collect();
            let mut b: Vec<f64> = direct.d.iter().cloned().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
            check_invariants(&ss, &sliced.tr_mul(&sliced));
        }
    }
}
