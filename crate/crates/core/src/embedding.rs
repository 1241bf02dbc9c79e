//! Speaker embedding value type and the handful of vector operations the
//! rest of the crate is built on.
//!
//! All arithmetic is carried out in `f64`, regardless of the precision the
//! vectors were stored with on disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output dimension of the speaker encoder the defaults are tuned for.
pub const DEFAULT_DIM: usize = 192;

/// A fixed-dimension, finite, real-valued speaker embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig(
                "embedding dimension must be at least 1".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("component {i} is {}", values[i])));
        }
        Ok(Embedding { values })
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    /// Zero vector of the given dimension (`dim` must be positive).
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be at least 1");
        Embedding {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }

    fn check_dim(&self, other: &Embedding) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::dims(self.dim(), other.dim()));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Cosine similarity, clamped to `[-1, 1]`.
    pub fn cosine_similarity(&self, other: &Embedding) -> Result<f64> {
        cosine_similarity(self, other)
    }

    pub fn add(&self, other: &Embedding) -> Result<Embedding> {
        self.check_dim(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Embedding::new(values)
    }

    pub fn sub(&self, other: &Embedding) -> Result<Embedding> {
        self.check_dim(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Embedding::new(values)
    }

    pub fn scale(&self, c: f64) -> Result<Embedding> {
        if !c.is_finite() {
            return Err(Error::NonFinite(format!("scale factor {c}")));
        }
        Embedding::new(self.values.iter().map(|v| v * c).collect())
    }

    pub fn l2_normalize(&self) -> Result<Embedding> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Embedding::new(self.values.iter().map(|v| v / n).collect())
    }

    /// `[self; other]`, dimension `self.dim() + other.dim()`.
    pub fn concat(&self, other: &Embedding) -> Embedding {
        let mut values = Vec::with_capacity(self.dim() + other.dim());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&other.values);
        Embedding { values }
    }

    /// Splits an even-dimension vector into its two halves.
    pub fn halves(&self) -> Option<(Embedding, Embedding)> {
        if !self.dim().is_multiple_of(2) {
            return None;
        }
        let (a, b) = self.values.split_at(self.dim() / 2);
        Some((
            Embedding { values: a.to_vec() },
            Embedding { values: b.to_vec() },
        ))
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &Embedding) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    a.check_dim(b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(&a.values, &b.values) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let v = e(&[0.3, -1.2, 4.0]);
        assert_abs_diff_eq!(cosine_similarity(&v, &v).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(
            cosine_similarity(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap(),
            0.0
        );
        // dot 8, norms 3 and 3
        assert_abs_diff_eq!(
            cosine_similarity(&e(&[1.0, 2.0, 2.0]), &e(&[2.0, 1.0, 2.0])).unwrap(),
            8.0 / 9.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&e(&[1.0, 0.0]), &e(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        assert!(matches!(
            cosine_similarity(&e(&[0.0, 0.0]), &e(&[1.0, 0.0])),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn add_and_scale_examples() {
        assert_eq!(e(&[1.0, 0.0]).add(&e(&[0.0, 1.0])).unwrap(), e(&[1.0, 1.0]));
        let v = e(&[0.7, -2.0]);
        assert_eq!(v.add(&Embedding::zeros(2)).unwrap(), v);
        assert_eq!(
            e(&[0.5, -0.5]).add(&e(&[0.25, 0.75])).unwrap(),
            e(&[0.75, 0.25])
        );
        assert_eq!(v.scale(1.0).unwrap(), v);
        assert!(v.scale(0.0).unwrap().is_zero());
        assert_eq!(e(&[2.0, 4.0]).scale(0.5).unwrap(), e(&[1.0, 2.0]));
        assert!(v.scale(f64::NAN).is_err());
        assert!(v.scale(f64::INFINITY).is_err());
    }

    #[test]
    fn normalize_examples() {
        let n = e(&[3.0, 4.0]).l2_normalize().unwrap();
        assert_abs_diff_eq!(n.as_slice()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(n.as_slice()[1], 0.8, epsilon = 1e-15);
        let u = e(&[0.0, 1.0, 0.0]);
        assert_eq!(u.l2_normalize().unwrap(), u);
        assert!(matches!(
            e(&[0.0, 0.0]).l2_normalize(),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn construction_rejects_bad_values() {
        assert!(Embedding::new(vec![]).is_err());
        assert!(Embedding::new(vec![1.0, f64::NAN]).is_err());
        assert!(Embedding::new(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let v = e(&[1.0, -0.5]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[1.0,-0.5]");
        assert_eq!(serde_json::from_str::<Embedding>(&s).unwrap(), v);
        assert!(serde_json::from_str::<Embedding>("[]").is_err());
    }

    fn vec_pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0f64..10.0, dim),
            prop::collection::vec(-10.0f64..10.0, dim),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn cosine_symmetric_and_bounded((a, b) in (1usize..24).prop_flat_map(vec_pair)) {
            let (a, b) = (Embedding::new(a).unwrap(), Embedding::new(b).unwrap());
            prop_assume!(a.norm() > 0.0 && b.norm() > 0.0);
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn cosine_positive_scale_invariant(
            (a, b) in (1usize..24).prop_flat_map(vec_pair),
            c in 1e-3f64..1e3,
        ) {
            let (a, b) = (Embedding::new(a).unwrap(), Embedding::new(b).unwrap());
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let base = cosine_similarity(&a, &b).unwrap();
            let scaled = cosine_similarity(&a.scale(c).unwrap(), &b).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-9);
        }

        #[test]
        fn add_commutative_associative(
            (a, b, c) in (1usize..24).prop_flat_map(|d| (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            ))
        ) {
            let (a, b, c) = (
                Embedding::new(a).unwrap(),
                Embedding::new(b).unwrap(),
                Embedding::new(c).unwrap(),
            );
            let ab = a.add(&b).unwrap();
            let ba = b.add(&a).unwrap();
            prop_assert!(ab.distance(&ba).unwrap() <= 1e-12);
            let l = ab.add(&c).unwrap();
            let r = a.add(&b.add(&c).unwrap()).unwrap();
            for (x, y) in l.as_slice().iter().zip(r.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalized_has_unit_norm(a in prop::collection::vec(-1e3f64..1e3, 1..64)) {
            let a = Embedding::new(a).unwrap();
            prop_assume!(a.norm() > 1e-9);
            prop_assert!((a.l2_normalize().unwrap().norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn cauchy_schwarz_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let d = rng.random_range(1..=64);
            let scale = 10f64.powi(rng.random_range(-3..=3));
            let mut draw =
                || -> Vec<f64> { (0..d).map(|_| rng.random_range(-scale..scale)).collect() };
            let (a, b) = (e(&draw()), e(&draw()));
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let c = cosine_similarity(&a, &b).unwrap();
            assert!((-1.0..=1.0).contains(&c));
            assert!(a.dot(&b).unwrap().abs() <= a.norm() * b.norm() * (1.0 + 1e-12));
        }
    }
}
