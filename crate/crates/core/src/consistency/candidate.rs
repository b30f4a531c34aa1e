// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Common-noise adapted processes on the tree or along sampled paths.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::grid::TimeGrid;
use crate::noise::{self, standard_normal};
use crate::scalar::Real;
use crate::tree::NoiseTree;

/// Per-level node values: `levels[k][i]` is the value at node `i` of depth `k`.
pub type TreeValues<V> = Vec<Vec<V>>;

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateValues<T: Real> {
    TreeIndexed(TreeValues<DVector<T>>),
    /// `paths[p][k]`, one value per sampled common path and knot.
    PathIndexed(Vec<Vec<DVector<T>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldCandidate<T: Real> {
    pub grid: TimeGrid<T>,
    pub values: CandidateValues<T>,
}

impl<T: Real> MeanFieldCandidate<T> {
    pub fn tree(grid: TimeGrid<T>, levels: TreeValues<DVector<T>>) -> Self {
        Self {
            grid,
            values: CandidateValues::TreeIndexed(levels),
        }
    }

    /// The same vector at every node.
    pub fn constant(tree: &NoiseTree<T>, value: &DVector<T>) -> Self {
        let levels = (0..=tree.depth())
            .map(|k| vec![value.clone(); tree.nodes_at(k)])
            .collect();
        Self::tree(tree.grid, levels)
    }

    pub fn zeros(tree: &NoiseTree<T>, dim: usize) -> Self {
        Self::constant(tree, &DVector::zeros(dim))
    }

    /// Independent Gaussian entries at every node, scaled by `scale`.
    pub fn random(tree: &NoiseTree<T>, dim: usize, scale: T, seed: u64) -> Self {
        let mut rng = noise::substream(seed, &[0x9a11]);
        let levels = (0..=tree.depth())
            .map(|k| {
                (0..tree.nodes_at(k))
                    .map(|_| DVector::from_fn(dim, |_, _| standard_normal::<T, _>(&mut rng) * scale))
                    .collect()
            })
            .collect();
        Self::tree(tree.grid, levels)
    }

    pub fn tree_levels(&self) -> Option<&TreeValues<DVector<T>>> {
        match &self.values {
            CandidateValues::TreeIndexed(l) => Some(l),
            CandidateValues::PathIndexed(_) => None,
        }
    }

    /// Per-knot second moments `E|g(t_k)|^2`: exact tree sums, or path averages.
    pub fn second_moments(&self, tree: &NoiseTree<T>) -> Vec<T> {
        match &self.values {
            CandidateValues::TreeIndexed(levels) => levels
                .iter()
                .enumerate()
                .map(|(k, nodes)| {
                    nodes.iter().fold(T::zero(), |a, v| a + v.norm_squared()) * tree.probability(k)
                })
                .collect(),
            CandidateValues::PathIndexed(paths) => {
                let n = T::usize(paths.len());
                (0..self.grid.n_knots())
                    .map(|k| paths.iter().fold(T::zero(), |a, p| a + p[k].norm_squared()) / n)
                    .collect()
            }
        }
    }

    /// `max_k E|g(t_k)|^2`.
    pub fn sup_second_moment(&self, tree: &NoiseTree<T>) -> T {
        self.second_moments(tree)
            .into_iter()
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Tree-indexed difference `self - other`; both must be tree-indexed.
    pub fn difference(&self, other: &Self) -> Self {
        let (a, b) = (
            self.tree_levels().expect("tree-indexed"),
            other.tree_levels().expect("tree-indexed"),
        );
        Self::tree(self.grid, tree_zip(a, b, |x, y| x - y))
    }

    /// `sup_k E|self - other|^2` on the tree.
    pub fn distance_sq(&self, other: &Self, tree: &NoiseTree<T>) -> T {
        self.difference(other).sup_second_moment(tree)
    }

    /// Tree-indexed values read off along a branch sequence (one branch per step).
    pub fn along_branches(&self, tree: &NoiseTree<T>, branches: &[usize]) -> Vec<DVector<T>> {
        let levels = self.tree_levels().expect("tree-indexed");
        let mut idx = 0;
        let mut out = vec![levels[0][0].clone()];
        for (k, &b) in branches.iter().enumerate() {
            idx = tree.child(idx, b);
            out.push(levels[k + 1][idx].clone());
        }
        out
    }

    /// Node table: `node_id,parent_id,depth,v_0,...`; the root's parent is `-1`.
    pub fn to_csv(&self, tree: &NoiseTree<T>) -> String {
        tree_to_csv(tree, self.tree_levels().expect("tree-indexed"))
    }
}

pub(crate) fn tree_zip<V, F>(a: &TreeValues<V>, b: &TreeValues<V>, f: F) -> TreeValues<V>
where
    F: Fn(&V, &V) -> V,
{
    a.iter()
        .zip(b)
        .map(|(la, lb)| la.iter().zip(lb).map(|(x, y)| f(x, y)).collect())
        .collect()
}

pub fn tree_to_csv<T: Real>(tree: &NoiseTree<T>, levels: &TreeValues<DVector<T>>) -> String {
    let dim = levels.first().and_then(|l| l.first()).map_or(0, |v| v.len());
    let mut out = String::from("node_id,parent_id,depth");
    for j in 0..dim {
        write!(out, ",v_{j}").unwrap();
    }
    out.push('\n');
    for (k, nodes) in levels.iter().enumerate() {
        let offset = tree.level_offset(k);
        let parent_offset = if k > 0 { tree.level_offset(k - 1) } else { 0 };
        for (i, v) in nodes.iter().enumerate() {
            let parent: i64 = if k == 0 {
                -1
            } else {
                (parent_offset + tree.parent(i)) as i64
            };
            write!(out, "{},{},{}", offset + i, parent, k).unwrap();
            for x in v.iter() {
                write!(out, ",{}", x.to_f64_lossy()).unwrap();
            }
            out.push('\n');
        }
    }
    out
}
