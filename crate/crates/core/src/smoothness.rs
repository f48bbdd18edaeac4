//! (λ, μ)-smoothness certificates for cost-minimization games.
//!
//! The inequality `Σ_i c_i(a*_i, a_{-i}) ≤ λ Σ_i c_i(a*) + μ Σ_i c_i(a)` is
//! checked on every pair of pure profiles. Both sides are multilinear in
//! independent mixed strategies `x*`, `x`, so the pure check implies the
//! mixed one.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::CostGame;
use crate::error::{Error, Result};
use crate::game::StageGame;

/// Default cap on `(∏ m_i)²` pair evaluations.
pub const DEFAULT_PAIR_CAP: usize = 4_000_000;

const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatedPair {
    pub target: Vec<usize>,
    pub profile: Vec<usize>,
    /// `lhs − rhs` at this pair; positive means violated.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub lambda: f64,
    pub mu: f64,
    /// `λ / (1 − μ)`; infinite when no feasible pair was found.
    pub rpoa: f64,
    pub valid: bool,
    pub violated_profile_pair: Option<ViolatedPair>,
}

/// Cost view of a utility game: `c_i := −u_i` for agents `1..=n`.
pub fn cost_view(stage: &StageGame) -> Result<CostGame> {
    let costs = (1..=stage.num_agents())
        .map(|i| stage.table(i).iter().map(|u| -u).collect())
        .collect();
    CostGame::new(stage.space().clone(), costs)
}

/// Precomputed `(Σ c_i(a*_i, a_{-i}), C(a*), C(a))` for every pure pair.
struct PairSums {
    size: usize,
    lhs: Vec<f64>,
    total: Vec<f64>,
}

impl PairSums {
    fn new(game: &CostGame, cap: usize) -> Result<Self> {
        let space = game.space();
        let size = space.size();
        let pairs = size.saturating_mul(size);
        if pairs > cap {
            return Err(Error::CapExceeded { size: pairs, cap });
        }
        let n = space.num_agents();
        let total: Vec<f64> = (0..size).map(|p| (0..n).map(|k| game.cost_table(k)[p]).sum()).collect();
        let mut lhs = Vec::with_capacity(pairs);
        for target in 0..size {
            for profile in 0..size {
                let mut s = 0.0;
                for k in 0..n {
                    let dev = space.with_action(profile, k, space.action_of(target, k));
                    s += game.cost_table(k)[dev];
                }
                lhs.push(s);
            }
        }
        Ok(PairSums { size, lhs, total })
    }

    /// Largest violation and its pair at `(λ, μ)`.
    fn worst(&self, lambda: f64, mu: f64) -> (f64, usize, usize) {
        let mut worst = (f64::NEG_INFINITY, 0, 0);
        for t in 0..self.size {
            for p in 0..self.size {
                let excess = self.lhs[t * self.size + p] - lambda * self.total[t] - mu * self.total[p];
                if excess > worst.0 {
                    worst = (excess, t, p);
                }
            }
        }
        worst
    }

    /// Smallest λ making the inequality hold at this μ, if any.
    fn min_lambda(&self, mu: f64) -> Option<f64> {
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for t in 0..self.size {
            let ct = self.total[t];
            for p in 0..self.size {
                let rest = self.lhs[t * self.size + p] - mu * self.total[p];
                if ct > 0.0 {
                    lo = lo.max(rest / ct);
                } else if ct < 0.0 {
                    hi = hi.min(rest / ct);
                } else if rest > VIOLATION_TOL {
                    return None;
                }
            }
        }
        if lo <= hi + VIOLATION_TOL {
            Some(lo)
        } else {
            None
        }
    }
}

fn certificate(sums: &PairSums, game: &CostGame, lambda: f64, mu: f64) -> SmoothnessCertificate {
    let (excess, t, p) = sums.worst(lambda, mu);
    let valid = excess <= VIOLATION_TOL;
    SmoothnessCertificate {
        lambda,
        mu,
        rpoa: if valid { lambda / (1.0 - mu) } else { f64::INFINITY },
        valid,
        violated_profile_pair: (!valid).then(|| ViolatedPair {
            target: game.space().decode_vec(t),
            profile: game.space().decode_vec(p),
            excess,
        }),
    }
}

/// Checks `(λ, μ)`-smoothness at `(λ, μ)` over all pure profile pairs.
pub fn check_smoothness(game: &CostGame, lambda: f64, mu: f64) -> Result<SmoothnessCertificate> {
    if !(lambda > 0.0 && lambda.is_finite()) || mu.is_nan() || mu >= 1.0 || !mu.is_finite() {
        return Err(Error::param("smoothness needs λ > 0 and μ < 1"));
    }
    let sums = PairSums::new(game, DEFAULT_PAIR_CAP)?;
    Ok(certificate(&sums, game, lambda, mu))
}

/// Upper-bounds the robust price of anarchy by searching `μ ∈ [0, 1)`
/// (grid then golden-section refinement), taking the least feasible λ for
/// each μ exactly, with `λ ≤ lambda_max`.
pub fn estimate_rpoa(game: &CostGame, lambda_max: f64) -> Result<SmoothnessCertificate> {
    let sums = PairSums::new(game, DEFAULT_PAIR_CAP)?;
    let ratio = |mu: f64| -> f64 {
        match sums.min_lambda(mu) {
            Some(l) if l <= lambda_max => l.max(1e-12) / (1.0 - mu),
            _ => f64::INFINITY,
        }
    };
    let grid = 200;
    let mut best_mu = None;
    let mut best = f64::INFINITY;
    for g in 0..grid {
        let mu = g as f64 / grid as f64;
        let r = ratio(mu);
        if r < best {
            best = r;
            best_mu = Some(mu);
        }
    }
    let Some(mu0) = best_mu else {
        // report the violation at the most permissive corner of the box
        return Ok(certificate(&sums, game, lambda_max, 1.0 - 1.0 / grid as f64));
    };
    // golden-section on the bracketing cell
    let (mut a, mut b) = ((mu0 - 1.0 / grid as f64).max(0.0), (mu0 + 1.0 / grid as f64).min(1.0 - 1e-9));
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    for _ in 0..60 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if ratio(c) <= ratio(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mut mu = 0.5 * (a + b);
    if ratio(mu) > best {
        mu = mu0;
    }
    let lambda = sums.min_lambda(mu).expect("feasible by construction").max(1e-12);
    Ok(certificate(&sums, game, lambda, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ActionSpace;

    fn constant(c: f64) -> CostGame {
        let s = ActionSpace::new(&[2, 2]).unwrap();
        CostGame::new(s, alloc::vec![alloc::vec![c; 4]; 2]).unwrap()
    }

    #[test]
    fn constant_costs_need_lambda_plus_mu_one() {
        let g = constant(2.0);
        assert!(check_smoothness(&g, 0.6, 0.4).unwrap().valid);
        assert!(check_smoothness(&g, 0.7, 0.5).unwrap().valid);
        let bad = check_smoothness(&g, 0.5, 0.4).unwrap();
        assert!(!bad.valid);
        assert!(bad.violated_profile_pair.unwrap().excess > 0.0);
    }

    #[test]
    fn constant_costs_rpoa_is_one() {
        let cert = estimate_rpoa(&constant(1.5), 10.0).unwrap();
        assert!(cert.valid);
        assert!((cert.rpoa - 1.0).abs() < 1e-6, "{}", cert.rpoa);
    }

    #[test]
    fn invalid_parameters() {
        assert!(check_smoothness(&constant(1.0), 0.0, 0.5).is_err());
        assert!(check_smoothness(&constant(1.0), 1.0, 1.0).is_err());
    }
}
