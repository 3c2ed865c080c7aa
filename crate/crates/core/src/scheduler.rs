//! Coordinate selection rules and Jacobi virtual updates.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg;
use crate::problem::Problem;
use crate::rng::{self, SeededRng};
use crate::scalar::Scalar;
use crate::surrogate::{surrogate_argmin, Surrogate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    /// All blocks, in the order `0..K`.
    GaussSeidel,
    /// Iteration `r` updates `period_map[r mod T]` (blocks visited in increasing order).
    EssentiallyCyclic { period_map: Vec<Vec<usize>> },
    /// A single block whose virtual step is within factor `q` of the largest.
    GaussSouthwell { q: f64 },
    /// The single block whose virtual update decreases `f` the most.
    MaxBlockImprovement,
    /// All blocks, in a fresh uniformly random order each sweep.
    RandomPermutation { seed: u64 },
    /// All blocks, in the given fixed order.
    FixedOrder { order: Vec<usize> },
}

impl Rule {
    pub fn label(&self) -> String {
        match self {
            Rule::GaussSeidel => "gs".into(),
            Rule::EssentiallyCyclic { period_map } => format!("ec(T={})", period_map.len()),
            Rule::GaussSouthwell { q } => format!("gso(q={q})"),
            Rule::MaxBlockImprovement => "mbi".into(),
            Rule::RandomPermutation { .. } => "random-permutation".into(),
            Rule::FixedOrder { order } => {
                let o: Vec<String> = order.iter().map(|k| k.to_string()).collect();
                format!("fixed({})", o.join(";"))
            }
        }
    }

    /// `T` for essentially cyclic rules, 1 otherwise.
    pub fn period(&self) -> usize {
        match self {
            Rule::EssentiallyCyclic { period_map } => period_map.len(),
            _ => 1,
        }
    }

    pub fn needs_virtual_update(&self) -> bool {
        matches!(self, Rule::GaussSouthwell { .. } | Rule::MaxBlockImprovement)
    }

    /// Selection constant `q` (1 for MBI), `None` for full-sweep rules.
    pub fn selection_q(&self) -> Option<f64> {
        match self {
            Rule::GaussSouthwell { q } => Some(*q),
            Rule::MaxBlockImprovement => Some(1.0),
            _ => None,
        }
    }

    pub fn validate(&self, blocks: usize) -> Result<()> {
        match self {
            Rule::GaussSouthwell { q } => {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(BsumError::Schedule("q must lie in (0,1]".into()));
                }
            }
            Rule::EssentiallyCyclic { period_map } => {
                if period_map.is_empty() {
                    return Err(BsumError::Schedule("period map must contain at least one slot".into()));
                }
                let mut seen = vec![false; blocks];
                for (t, slot) in period_map.iter().enumerate() {
                    for &k in slot {
                        if k >= blocks {
                            return Err(BsumError::Schedule(format!("slot {t} names block {k} but there are {blocks} blocks")));
                        }
                        seen[k] = true;
                    }
                }
                let missing: Vec<String> = seen.iter().enumerate().filter(|(_, &s)| !s).map(|(k, _)| k.to_string()).collect();
                if !missing.is_empty() {
                    return Err(BsumError::Schedule(format!(
                        "period map of length {} does not cover block(s) {}",
                        period_map.len(),
                        missing.join(", ")
                    )));
                }
            }
            Rule::FixedOrder { order } => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..blocks).collect::<Vec<_>>() {
                    return Err(BsumError::Schedule("fixed order must be a permutation of all blocks".into()));
                }
            }
            Rule::GaussSeidel | Rule::MaxBlockImprovement | Rule::RandomPermutation { .. } => {}
        }
        Ok(())
    }
}

/// A rule with its run-local state.
#[derive(Clone, Debug)]
pub struct Schedule {
    rule: Rule,
    blocks: usize,
    rng: Option<SeededRng>,
}

impl Schedule {
    pub fn new(rule: Rule, blocks: usize) -> Result<Self> {
        rule.validate(blocks)?;
        let rng = match &rule {
            Rule::RandomPermutation { seed } => Some(rng::seeded(rng::derive_seed(*seed, "random-permutation"))),
            _ => None,
        };
        Ok(Self { rule, blocks, rng })
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// `C^{r+1}` for iteration `r` (0-based), in processing order.
    pub fn select_blocks<F: Scalar>(&mut self, r: usize, vu: Option<&VirtualUpdate<F>>) -> Result<Vec<usize>> {
        match &self.rule {
            Rule::GaussSeidel => Ok((0..self.blocks).collect()),
            Rule::EssentiallyCyclic { period_map } => {
                let mut slot = period_map[r % period_map.len()].clone();
                slot.sort_unstable();
                slot.dedup();
                Ok(slot)
            }
            Rule::GaussSouthwell { q } => {
                let vu = vu.ok_or_else(|| BsumError::MissingInput("Gauss-Southwell selection needs virtual updates".into()))?;
                Ok(vec![gauss_southwell_pick(&vu.step_norms, F::of(*q))])
            }
            Rule::MaxBlockImprovement => {
                let vu = vu.ok_or_else(|| BsumError::MissingInput("MBI selection needs virtual updates".into()))?;
                Ok(vec![mbi_pick(&vu.objective_values)])
            }
            Rule::RandomPermutation { .. } => {
                let mut order: Vec<usize> = (0..self.blocks).collect();
                order.shuffle(self.rng.as_mut().expect("permutation rule owns an rng"));
                Ok(order)
            }
            Rule::FixedOrder { order } => Ok(order.clone()),
        }
    }
}

/// Smallest index `k` with `norms[k] >= q * max_j norms[j]`.
pub fn gauss_southwell_pick<F: Scalar>(norms: &[F], q: F) -> usize {
    let max = norms.iter().copied().fold(F::zero(), F::max);
    let threshold = q * max;
    norms.iter().position(|&n| n >= threshold).unwrap_or(0)
}

/// Smallest index minimizing `f(x_hat_k, x_{-k})`.
pub fn mbi_pick<F: Scalar>(values: &[F]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    best
}

/// Jacobi candidates `x_hat_k`, all anchored at the same point.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualUpdate<F> {
    /// `x_hat`, with block `k` holding the candidate for block `k`.
    pub candidate: Vec<F>,
    /// `||x_hat_k - x_k||`.
    pub step_norms: Vec<F>,
    /// `f(x_hat_k, x_{-k})`.
    pub objective_values: Vec<F>,
    /// `f(x)`.
    pub current_objective: F,
}

impl<F: Scalar> VirtualUpdate<F> {
    /// `||x_hat - x||^2`.
    pub fn step_sq(&self) -> F {
        self.step_norms.iter().map(|&n| n * n).sum()
    }
}

pub fn virtual_updates<F: Scalar>(p: &Problem<F>, s: &Surrogate<F>, x: &[F]) -> Result<VirtualUpdate<F>> {
    let part = p.partition();
    part.check_len(x.len())?;
    let mut candidate = x.to_vec();
    let mut step_norms = Vec::with_capacity(p.num_blocks());
    let mut objective_values = Vec::with_capacity(p.num_blocks());
    for k in 0..p.num_blocks() {
        let xk = surrogate_argmin(s, p, k, x)?;
        step_norms.push(linalg::dist(&xk, part.block(x, k)));
        objective_values.push(p.objective(&part.with_block(x, k, &xk)));
        part.block_mut(&mut candidate, k).copy_from_slice(&xk);
    }
    Ok(VirtualUpdate { candidate, step_norms, objective_values, current_objective: p.objective(x) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vu(norms: Vec<f64>, values: Vec<f64>) -> VirtualUpdate<f64> {
        VirtualUpdate { candidate: vec![], step_norms: norms, objective_values: values, current_objective: 10.0 }
    }

    #[test]
    fn gauss_seidel_order() {
        let mut s = Schedule::new(Rule::GaussSeidel, 3).unwrap();
        assert_eq!(s.select_blocks::<f64>(7, None).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn southwell_and_mbi() {
        let mut s = Schedule::new(Rule::GaussSouthwell { q: 1.0 }, 3).unwrap();
        let v = vu(vec![0.5, 1.0, 0.3], vec![0.0; 3]);
        assert_eq!(s.select_blocks(0, Some(&v)).unwrap(), vec![1]);
        assert!(matches!(s.select_blocks::<f64>(0, None), Err(BsumError::MissingInput(_))));

        let mut m = Schedule::new(Rule::MaxBlockImprovement, 3).unwrap();
        let v = vu(vec![0.0; 3], vec![8.0, 7.0, 9.0]);
        assert_eq!(m.select_blocks(0, Some(&v)).unwrap(), vec![1]);
    }

    #[test]
    fn ties_pick_smallest_index() {
        assert_eq!(gauss_southwell_pick(&[1.0, 1.0, 0.2], 1.0), 0);
        assert_eq!(gauss_southwell_pick(&[0.1, 0.95, 1.0], 0.9), 1);
        assert_eq!(mbi_pick(&[3.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn essentially_cyclic() {
        let mut one = Schedule::new(Rule::EssentiallyCyclic { period_map: vec![vec![0, 1, 2]] }, 3).unwrap();
        let mut gs = Schedule::new(Rule::GaussSeidel, 3).unwrap();
        for r in 0..5 {
            assert_eq!(one.select_blocks::<f64>(r, None).unwrap(), gs.select_blocks::<f64>(r, None).unwrap());
        }
        let mut two = Schedule::new(Rule::EssentiallyCyclic { period_map: vec![vec![2, 0], vec![1]] }, 3).unwrap();
        assert_eq!(two.select_blocks::<f64>(0, None).unwrap(), vec![0, 2]);
        assert_eq!(two.select_blocks::<f64>(3, None).unwrap(), vec![1]);
        let err = Schedule::new(Rule::EssentiallyCyclic { period_map: vec![vec![0], vec![2]] }, 3).unwrap_err();
        assert!(err.to_string().contains("does not cover block(s) 1"));
    }

    #[test]
    fn q_range() {
        for q in [0.0, 1.5, -0.1] {
            let err = Schedule::new(Rule::GaussSouthwell { q }, 2).unwrap_err();
            assert!(err.to_string().contains("q must lie in (0,1]"));
        }
    }

    #[test]
    fn permutations_are_seeded() {
        let mut a = Schedule::new(Rule::RandomPermutation { seed: 5 }, 6).unwrap();
        let mut b = Schedule::new(Rule::RandomPermutation { seed: 5 }, 6).unwrap();
        for r in 0..10 {
            let pa = a.select_blocks::<f64>(r, None).unwrap();
            assert_eq!(pa, b.select_blocks::<f64>(r, None).unwrap());
            let mut sorted = pa.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        }
    }
}
