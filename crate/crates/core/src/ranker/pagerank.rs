use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LinkGraph;

#[derive(Debug, Clone, PartialEq)]
pub enum PageRankError<N: Ord> {
    InvalidParams(String),
    EmptyGraph,
    /// The iteration cap was hit; the last iterate is still returned.
    NoConvergence(PageRankScores<N>),
}

impl<N: Ord> fmt::Display for PageRankError<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidParams(msg) => write!(f, "invalid pagerank parameters: {msg}"),
            Self::EmptyGraph => f.write_str("pagerank of an empty graph"),
            Self::NoConvergence(partial) => write!(
                f,
                "pagerank did not converge after {} iterations (residual {:e})",
                partial.iterations, partial.residual
            ),
        }
    }
}

impl<N: Ord + fmt::Debug> std::error::Error for PageRankError<N> {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageRankParams {
    pub damping: f64,
    /// Convergence threshold on the largest per-node change between iterations.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            epsilon: 1e-8,
            max_iters: 100,
        }
    }
}

impl PageRankParams {
    pub fn validate<N: Ord>(&self) -> Result<(), PageRankError<N>> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(PageRankError::InvalidParams(format!("damping {} not in (0, 1)", self.damping)));
        }
        if !(self.epsilon > 0.0) {
            return Err(PageRankError::InvalidParams(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankScores<N: Ord> {
    pub scores: BTreeMap<N, f64>,
    pub iterations: usize,
    /// Largest per-node change in the final iteration.
    pub residual: f64,
}

/// Non-normalized PageRank, `PR(A) = (1 - d) + d * Σ PR(T) / C(T)` over the
/// pages T linking to A.
///
/// Jacobi iteration from PR = 1 for every node: each sweep reads only the
/// previous sweep's values. Dangling nodes pass no mass on, and the result
/// is not rescaled, so scores need not sum to 1 (or to N).
pub fn pagerank<N: Ord + Clone>(g: &LinkGraph<N>, params: &PageRankParams) -> Result<PageRankScores<N>, PageRankError<N>> {
    params.validate()?;
    if g.is_empty() {
        return Err(PageRankError::EmptyGraph);
    }
    let n = g.len();
    let d = params.damping;
    let mut current = vec![1.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < params.max_iters {
        iterations += 1;
        residual = 0.0;
        for (a, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = g
                .in_neighbours(a)
                .iter()
                .map(|&t| current[t] / g.out_degree_at(t) as f64)
                .sum();
            *slot = (1.0 - d) + d * inflow;
            residual = residual.max((*slot - current[a]).abs());
        }
        std::mem::swap(&mut current, &mut next);
        if residual < params.epsilon {
            break;
        }
    }

    let scores = g.nodes().iter().cloned().zip(current).collect();
    let result = PageRankScores {
        scores,
        iterations,
        residual,
    };
    if residual < params.epsilon {
        Ok(result)
    } else {
        Err(PageRankError::NoConvergence(result))
    }
}

impl<N: Ord> PageRankScores<N> {
    /// Scores whether or not the iteration converged.
    pub fn from_result(result: Result<Self, PageRankError<N>>) -> Option<Self> {
        match result {
            Ok(s) | Err(PageRankError::NoConvergence(s)) => Some(s),
            Err(_) => None,
        }
    }

    pub fn get(&self, node: &N) -> Option<f64> {
        self.scores.get(node).copied()
    }
}
