// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Non-recombining tree discretizing the common-noise filtration.
//!
//! Every step, each common mode moves by `+sqrt(dt)` or `-sqrt(dt)` with
//! probability one half, so a node at depth `k` has `2^m` children and
//! probability `2^{-k m}`. Nodes at depth `k` are numbered `0..2^{k m}`; the
//! child of node `i` along branch `c` is `i * 2^m + c`, and bit `j` of `c` set
//! means mode `j` moved down.

use nalgebra::DVector;

use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::scalar::Real;

pub const DEFAULT_NODE_CAP: usize = 1 << 20;

#[derive(Debug, Clone)]
pub struct NoiseTree<T: Real> {
    pub grid: TimeGrid<T>,
    pub m_common: usize,
    branching: usize,
    sqrt_dt: T,
}

impl<T: Real> NoiseTree<T> {
    pub fn depth(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn nodes_at(&self, level: usize) -> usize {
        self.branching.pow(level as u32)
    }

    pub fn total_nodes(&self) -> usize {
        (0..=self.depth()).map(|k| self.nodes_at(k)).sum()
    }

    /// Offset of depth `level` in a flat, level-ordered node numbering.
    pub fn level_offset(&self, level: usize) -> usize {
        (0..level).map(|k| self.nodes_at(k)).sum()
    }

    pub fn probability(&self, level: usize) -> T {
        T::one() / T::usize(self.nodes_at(level))
    }

    pub fn parent(&self, index: usize) -> usize {
        index / self.branching
    }

    pub fn child(&self, index: usize, branch: usize) -> usize {
        index * self.branching + branch
    }

    pub fn children(&self, index: usize) -> std::ops::Range<usize> {
        let first = index * self.branching;
        first..first + self.branching
    }

    /// Branch taken to reach `index` from its parent.
    pub fn branch_of(&self, index: usize) -> usize {
        index % self.branching
    }

    /// `dbeta_j` along `branch`.
    pub fn increment(&self, branch: usize, mode: usize) -> T {
        if branch >> mode & 1 == 1 {
            -self.sqrt_dt
        } else {
            self.sqrt_dt
        }
    }

    pub fn increments(&self, branch: usize) -> DVector<T> {
        DVector::from_iterator(self.m_common, (0..self.m_common).map(|j| self.increment(branch, j)))
    }

    /// Branch whose increments have the same signs as `increments`.
    pub fn branch_from_signs(&self, increments: &[T]) -> usize {
        increments
            .iter()
            .enumerate()
            .filter(|(_, x)| **x < T::zero())
            .fold(0, |c, (j, _)| c | 1 << j)
    }

    /// Sum of the common increments from the root down to `index` at depth `level`.
    pub fn cumulative_increment(&self, level: usize, index: usize) -> DVector<T> {
        let mut acc = DVector::zeros(self.m_common);
        let mut idx = index;
        for _ in 0..level {
            acc += self.increments(self.branch_of(idx));
            idx = self.parent(idx);
        }
        acc
    }

    /// Ancestor of `index` (at depth `level`) at depth `ancestor_level`.
    pub fn ancestor(&self, level: usize, index: usize, ancestor_level: usize) -> usize {
        assert!(ancestor_level <= level);
        index / self.branching.pow((level - ancestor_level) as u32)
    }

    /// Probability-weighted child average of a per-node function at depth `level + 1`.
    pub fn conditional_mean<V, F>(&self, index: usize, mut f: F) -> V
    where
        V: std::ops::Add<Output = V> + std::ops::Mul<T, Output = V>,
        F: FnMut(usize, usize) -> V,
    {
        let w = T::one() / T::usize(self.branching);
        let mut children = self.children(index).enumerate();
        let (b0, c0) = children.next().unwrap();
        let mut acc = f(b0, c0) * w;
        for (b, c) in children {
            acc = acc + f(b, c) * w;
        }
        acc
    }

    /// Backward induction of child averages from leaf values to the root.
    pub fn backward_expectation(&self, leaf_values: &[T]) -> T {
        assert_eq!(leaf_values.len(), self.nodes_at(self.depth()));
        let mut level = leaf_values.to_vec();
        for k in (0..self.depth()).rev() {
            level = (0..self.nodes_at(k))
                .map(|i| self.conditional_mean(i, |_, c| level[c]))
                .collect();
        }
        level[0]
    }
}

pub fn build_noise_tree<T: Real>(spec: &ModelSpec<T>, grid: &TimeGrid<T>) -> Result<NoiseTree<T>> {
    build_noise_tree_with_cap(spec, grid, DEFAULT_NODE_CAP)
}

pub fn build_noise_tree_with_cap<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    node_cap: usize,
) -> Result<NoiseTree<T>> {
    let m = spec.m_common;
    let exponent = (m as u128) * (grid.n_steps() as u128);
    let required = if exponent >= 127 { u128::MAX } else { 1u128 << exponent };
    if m >= usize::BITS as usize || required > node_cap as u128 {
        return Err(MfgError::TreeTooLarge {
            required,
            cap: node_cap,
        });
    }
    Ok(NoiseTree {
        grid: *grid,
        m_common: m,
        branching: 1 << m,
        sqrt_dt: grid.dt().sqrt(),
    })
}
