use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PROB_TOL;

fn check_simplex(p: &[f64], what: &'static str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| v < -PROB_TOL) || (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Unnormalized { what, sum });
    }
    Ok(())
}

pub(crate) fn uniform(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

/// Independent mixed strategies of the non-ego agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductStrategy {
    pub per_agent: Vec<Vec<f64>>,
}

impl ProductStrategy {
    pub fn new(per_agent: Vec<Vec<f64>>) -> Self {
        ProductStrategy { per_agent }
    }

    pub fn uniform(counts: &[usize]) -> Self {
        ProductStrategy::new(counts.iter().map(|&m| uniform(m)).collect())
    }

    /// Point mass on `actions`.
    pub fn pure(actions: &[usize], counts: &[usize]) -> Self {
        ProductStrategy::new(
            actions
                .iter()
                .zip(counts)
                .map(|(&a, &m)| {
                    let mut v = vec![0.0; m];
                    v[a] = 1.0;
                    v
                })
                .collect(),
        )
    }

    /// Strategy of the `k`-th non-ego agent (0-based, i.e. agent `k + 1`).
    #[inline]
    pub fn agent(&self, k: usize) -> &[f64] {
        &self.per_agent[k]
    }

    pub fn validate(&self, counts: &[usize]) -> Result<()> {
        if self.per_agent.len() != counts.len() {
            return Err(Error::shape("product strategy has the wrong number of agents"));
        }
        for (p, &m) in self.per_agent.iter().zip(counts) {
            if p.len() != m {
                return Err(Error::shape("product strategy vector has the wrong length"));
            }
            check_simplex(p, "product strategy")?;
        }
        Ok(())
    }
}

/// Finitely supported mixture of product strategies; the representation of
/// correlated joint play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayMixture {
    pub components: Vec<(f64, ProductStrategy)>,
}

impl PlayMixture {
    pub fn new(components: Vec<(f64, ProductStrategy)>) -> Self {
        PlayMixture { components }
    }

    pub fn single(strategy: ProductStrategy) -> Self {
        PlayMixture::new(vec![(1.0, strategy)])
    }

    /// Equal-weight mixture.
    pub fn uniform_over(strategies: Vec<ProductStrategy>) -> Self {
        let w = 1.0 / strategies.len() as f64;
        PlayMixture::new(strategies.into_iter().map(|s| (w, s)).collect())
    }

    /// Weighted combination of mixtures, flattening components.
    pub fn combine(parts: &[(f64, &PlayMixture)]) -> Self {
        let mut components = Vec::new();
        for (w, m) in parts {
            for (cw, s) in &m.components {
                components.push((w * cw, s.clone()));
            }
        }
        PlayMixture::new(components)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self, counts: &[usize]) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::shape("mixture has no components"));
        }
        let weights: Vec<f64> = self.components.iter().map(|(w, _)| *w).collect();
        check_simplex(&weights, "mixture weights")?;
        for (_, s) in &self.components {
            s.validate(counts)?;
        }
        Ok(())
    }

    /// Keeps every `factor`-th component (re-weighted uniformly over the
    /// kept ones) so that at most `max_components` remain. Returns the
    /// thinning factor used.
    pub fn thin(&mut self, max_components: usize) -> usize {
        let len = self.components.len();
        if len <= max_components || max_components == 0 {
            return 1;
        }
        let factor = len.div_ceil(max_components);
        let kept: Vec<_> = self
            .components
            .drain(..)
            .enumerate()
            .filter(|(i, _)| i % factor == factor - 1)
            .map(|(_, c)| c)
            .collect();
        let total: f64 = kept.iter().map(|(w, _)| w).sum();
        self.components = kept.into_iter().map(|(w, s)| (w / total, s)).collect();
        factor
    }

    /// Marginal distribution of non-ego agent `k` (0-based).
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let m = self.components[0].1.agent(k).len();
        let mut out = vec![0.0; m];
        for (w, s) in &self.components {
            for (o, p) in out.iter_mut().zip(s.agent(k)) {
                *o += w * p;
            }
        }
        out
    }
}

/// Mixed strategy of the ego agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoStrategy {
    pub dist: Vec<f64>,
}

impl EgoStrategy {
    pub fn new(dist: Vec<f64>) -> Self {
        EgoStrategy { dist }
    }

    pub fn uniform(m0: usize) -> Self {
        EgoStrategy::new(uniform(m0))
    }

    pub fn pure(action: usize, m0: usize) -> Self {
        let mut dist = vec![0.0; m0];
        dist[action] = 1.0;
        EgoStrategy::new(dist)
    }

    pub fn validate(&self, m0: usize) -> Result<()> {
        if self.dist.len() != m0 {
            return Err(Error::shape("ego strategy has the wrong length"));
        }
        check_simplex(&self.dist, "ego strategy")
    }

    /// Index of the most likely action (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.dist.iter().enumerate() {
            if p > self.dist[best] {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized() {
        let s = ProductStrategy::new(vec![vec![0.5, 0.6]]);
        assert!(matches!(s.validate(&[2]), Err(Error::Unnormalized { .. })));
        assert!(EgoStrategy::new(vec![1.0, 1e-10]).validate(2).is_ok());
        assert!(EgoStrategy::new(vec![-0.1, 1.1]).validate(2).is_err());
    }

    #[test]
    fn thinning_keeps_weights_normalized() {
        let comps: Vec<_> = (0..10).map(|_| ProductStrategy::uniform(&[2])).collect();
        let mut m = PlayMixture::uniform_over(comps);
        let f = m.thin(4);
        assert_eq!(f, 3);
        assert_eq!(m.len(), 3);
        m.validate(&[2]).unwrap();
    }

    #[test]
    fn marginal_of_mixture() {
        let m = PlayMixture::new(vec![
            (0.5, ProductStrategy::pure(&[0, 1], &[2, 2])),
            (0.5, ProductStrategy::pure(&[1, 1], &[2, 2])),
        ]);
        assert_eq!(m.marginal(0), vec![0.5, 0.5]);
        assert_eq!(m.marginal(1), vec![0.0, 1.0]);
    }
}
