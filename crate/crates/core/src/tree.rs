//! Node table for the non-recombining tree of history prefixes.
//!
//! Level `n` holds one node per prefix `(w_1, ..., w_n)`; nodes are numbered
//! in lexicographic (mixed-radix) order, so the child of node `h` through atom
//! `j` at step `n + 1` is `h * m_{n+1} + j`.

use crate::error::{Error, Result};
use crate::model::{shock_return, EvolutionModel};

#[derive(Debug, Clone)]
pub struct ScenarioTree {
    radix: Vec<usize>,
    price: Vec<Vec<f64>>,
    /// `sigma_{n+1}` at every level-`n` node, empty at the last level.
    sigma_next: Vec<Vec<f64>>,
}

impl ScenarioTree {
    /// Build the full tree; total node count is bounded by `cap`.
    pub fn build(model: &EvolutionModel, cap: u64) -> Result<Self> {
        model.require_atoms()?;
        let radix = model.radix();
        let mut total: u128 = 0;
        let mut width: u128 = 1;
        for &m in &radix {
            width = width.saturating_mul(m as u128);
            total = total.saturating_add(width);
        }
        if total > cap as u128 {
            return Err(Error::CapExceeded { what: "tree node", count: total, cap });
        }

        let n_steps = model.horizon();
        let mut price = Vec::with_capacity(n_steps + 1);
        let mut sigma_next = Vec::with_capacity(n_steps + 1);
        price.push(vec![model.s0]);
        sigma_next.push(vec![model.steps[0].vol.next_sigma(None)]);
        for n in 1..=n_steps {
            let step = &model.steps[n - 1];
            let parents = &price[n - 1];
            let parent_sigma = &sigma_next[n - 1];
            let m = step.shocks.len();
            let mut level_price = Vec::with_capacity(parents.len() * m);
            let mut level_eps = Vec::with_capacity(parents.len() * m);
            for (h, &s) in parents.iter().enumerate() {
                let sigma = parent_sigma[h];
                for atom in &step.shocks {
                    level_price.push(s * step.growth(sigma, atom.eps));
                    level_eps.push(atom.eps);
                }
            }
            let level_sigma = if n < n_steps {
                let next_vol = &model.steps[n].vol;
                (0..level_price.len())
                    .map(|c| next_vol.next_sigma(Some((parent_sigma[c / m], level_eps[c]))))
                    .collect()
            } else {
                Vec::new()
            };
            price.push(level_price);
            sigma_next.push(level_sigma);
        }
        Ok(Self { radix, price, sigma_next })
    }

    pub fn horizon(&self) -> usize {
        self.radix.len()
    }

    /// Atom count of step `n` (1-based).
    pub fn atoms_at(&self, n: usize) -> usize {
        self.radix[n - 1]
    }

    pub fn level_len(&self, n: usize) -> usize {
        self.price[n].len()
    }

    pub fn price(&self, n: usize, node: usize) -> f64 {
        self.price[n][node]
    }

    pub fn prices(&self, n: usize) -> &[f64] {
        &self.price[n]
    }

    /// `sigma_{n+1}` at a level-`n` node.
    pub fn sigma_next(&self, n: usize, node: usize) -> f64 {
        self.sigma_next[n][node]
    }

    pub fn child(&self, n: usize, node: usize, atom: usize) -> usize {
        node * self.radix[n] + atom
    }

    /// Atom indices of a level-`n` node.
    pub fn history(&self, n: usize, mut node: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for i in (0..n).rev() {
            out[i] = node % self.radix[i];
            node /= self.radix[i];
        }
        out
    }

    /// Node index of a prefix, validated against the radix.
    pub fn node_index(&self, history: &[usize]) -> Result<usize> {
        if history.len() > self.horizon() {
            return Err(Error::InvalidArgument(format!("history of length {} exceeds horizon", history.len())));
        }
        let mut node = 0usize;
        for (i, &j) in history.iter().enumerate() {
            if j >= self.radix[i] {
                return Err(Error::InvalidArgument(format!("atom {j} does not exist at step {}", i + 1)));
            }
            node = node * self.radix[i] + j;
        }
        Ok(node)
    }

    /// Prices `S_0..S_n` along the prefix ending at a level-`n` node.
    pub fn price_prefix(&self, n: usize, node: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(n + 1, 0.0);
        let mut idx = node;
        for level in (0..=n).rev() {
            out[level] = self.price[level][idx];
            if level > 0 {
                idx /= self.radix[level - 1];
            }
        }
    }

    /// Relative moves `exp(sigma_n eps) - 1` for each atom of step `n` at a
    /// level-`(n-1)` node.
    pub fn moves(&self, model: &EvolutionModel, n: usize, node: usize) -> Vec<f64> {
        let sigma = self.sigma_next[n - 1][node];
        model.steps[n - 1].shocks.iter().map(|a| shock_return(sigma, a.eps)).collect()
    }
}
