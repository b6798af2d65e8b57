//! Drainage trees: a compact rooted-tree type and two samplers.
//!
//! Node `0` is the root and every node's parent has a smaller index, so a
//! reverse index sweep visits children before parents.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{BinaryParams, RngStream};

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    parent: u32,
    children: [u32; 2],
    n_children: u8,
    generation: u32,
}

/// A rooted tree in which every node has at most two children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// The tree with only a root.
    pub fn single() -> Self {
        Tree {
            nodes: vec![Node {
                parent: NO_NODE,
                children: [NO_NODE; 2],
                n_children: 0,
                generation: 0,
            }],
        }
    }

    /// Build from a parent array: `parents[0]` must be `None` and every other
    /// entry must point to a smaller index.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self> {
        if parents.first() != Some(&None) {
            return Err(Error::invalid("parents", "node 0 must be the root"));
        }
        let mut tree = Tree::single();
        tree.nodes.reserve(parents.len() - 1);
        for (i, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < i => {
                    if tree.nodes[*p].n_children == 2 {
                        return Err(Error::invalid(
                            "parents",
                            format!("node {p} would have more than two children"),
                        ));
                    }
                    tree.push_child(*p);
                }
                _ => {
                    return Err(Error::invalid(
                        "parents",
                        format!("node {i} needs a parent with a smaller index"),
                    ))
                }
            }
        }
        Ok(tree)
    }

    fn push_child(&mut self, parent: usize) -> usize {
        let idx = self.nodes.len();
        let gen = self.nodes[parent].generation + 1;
        let p = &mut self.nodes[parent];
        p.children[p.n_children as usize] = idx as u32;
        p.n_children += 1;
        self.nodes.push(Node {
            parent: parent as u32,
            children: [NO_NODE; 2],
            n_children: 0,
            generation: gen,
        });
        idx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        let p = self.nodes[i].parent;
        (p != NO_NODE).then_some(p as usize)
    }

    pub fn children(&self, i: usize) -> &[u32] {
        let n = &self.nodes[i];
        &n.children[..n.n_children as usize]
    }

    pub fn generation(&self, i: usize) -> u32 {
        self.nodes[i].generation
    }

    pub fn height(&self) -> u32 {
        self.nodes.iter().map(|n| n.generation).max().unwrap_or(0)
    }

    /// Check the structural invariants: one root, parents before children,
    /// consistent child links and generations.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Inconsistent(msg));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        if self.nodes[0].parent != NO_NODE || self.nodes[0].generation != 0 {
            return bad("node 0 is not a root at generation 0".into());
        }
        let mut child_refs = vec![0u8; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.n_children > 2 {
                return bad(format!("node {i} has {} children", n.n_children));
            }
            for &c in &n.children[..n.n_children as usize] {
                let c = c as usize;
                if c >= self.nodes.len() || self.nodes[c].parent as usize != i {
                    return bad(format!("child link {i} -> {c} is not mirrored"));
                }
                child_refs[c] += 1;
            }
            if i > 0 {
                let p = n.parent as usize;
                if p >= i {
                    return bad(format!("node {i} has parent {p}"));
                }
                if n.generation != self.nodes[p].generation + 1 {
                    return bad(format!("node {i} has the wrong generation"));
                }
            }
        }
        if child_refs.iter().skip(1).any(|&c| c != 1) || child_refs[0] != 0 {
            return bad("some node is not referenced exactly once".into());
        }
        Ok(())
    }
}

/// A sampled object, flagged when a cap cut the sample short.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampled<T> {
    Complete(T),
    Truncated(T),
}

impl<T> Sampled<T> {
    pub fn is_truncated(&self) -> bool {
        matches!(self, Sampled::Truncated(_))
    }

    pub fn get(&self) -> &T {
        match self {
            Sampled::Complete(t) | Sampled::Truncated(t) => t,
        }
    }

    pub fn into_inner(self) -> T {
        match self {
            Sampled::Complete(t) | Sampled::Truncated(t) => t,
        }
    }
}

/// Size limits for tree samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCaps {
    pub max_nodes: u64,
    pub max_height: u64,
}

impl Default for SampleCaps {
    fn default() -> Self {
        SampleCaps {
            max_nodes: 10_000_000,
            max_height: 1_000_000,
        }
    }
}

impl SampleCaps {
    pub fn new(max_nodes: u64, max_height: u64) -> Result<Self> {
        let caps = SampleCaps {
            max_nodes,
            max_height,
        };
        caps.validate()?;
        Ok(caps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 {
            return Err(Error::invalid("max-nodes", "must be at least 1"));
        }
        if self.max_height == 0 {
            return Err(Error::invalid("max-height", "must be at least 1"));
        }
        if self.max_nodes > u32::MAX as u64 - 1 {
            return Err(Error::invalid("max-nodes", "must fit a 32-bit index"));
        }
        Ok(())
    }
}

/// Offspring law of the drainage tree: `[P(0), P(1), P(2)]`.
pub fn offspring_pmf(beta: f64) -> [f64; 3] {
    let bb = beta * (1.0 - beta);
    [bb, beta * beta + (1.0 - beta) * (1.0 - beta), bb]
}

#[inline]
pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Critical Galton-Watson tree with the drainage offspring law.
///
/// Nodes are generated breadth first. Each node draws a left inflow
/// indicator (probability `1 - beta`) and then a right one (probability
/// `beta`); the children are created in that order.
pub fn sample_bgw(p: &BinaryParams, stream: RngStream, caps: SampleCaps) -> Result<Sampled<Tree>> {
    caps.validate()?;
    let mut rng = stream.rng();
    let (beta, beta_bar) = (p.beta(), p.beta_bar());
    let mut tree = Tree::single();
    let mut i = 0;
    while i < tree.len() {
        let left = bernoulli(&mut rng, beta_bar);
        let right = bernoulli(&mut rng, beta);
        let k = left as u64 + right as u64;
        if k > 0 {
            let next_gen = tree.generation(i) as u64 + 1;
            if next_gen > caps.max_height || tree.len() as u64 + k > caps.max_nodes {
                return Ok(Sampled::Truncated(tree));
            }
            for _ in 0..k {
                tree.push_child(i);
            }
        }
        i += 1;
    }
    Ok(Sampled::Complete(tree))
}

/// The exact drainage tree of the diamond lattice.
///
/// Row `k` of the tree occupies an interval `[lo, hi]` of cells. Cell `j` of
/// row `k + 1` drains to cell `j - 1` (left, probability `beta`) or cell `j`
/// (right, probability `1 - beta`) of row `k`. Only rows that are complete
/// are kept when a cap fires.
pub fn sample_diamond_tree(beta: f64, stream: RngStream, caps: SampleCaps) -> Result<Sampled<Tree>> {
    caps.validate()?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "the diamond tree needs 0 < beta < 1"));
    }
    let mut rng = stream.rng();
    let mut tree = Tree::single();
    let (mut lo, mut hi) = (0i64, 0i64);
    let mut row_start = 0usize;
    let mut row = 0u64;
    let mut parents: Vec<usize> = Vec::new();
    loop {
        parents.clear();
        let mut new_lo = None;
        let mut new_hi = lo;
        for j in lo..=hi + 1 {
            let goes_left = bernoulli(&mut rng, beta);
            let target = if goes_left { j - 1 } else { j };
            if (lo..=hi).contains(&target) {
                new_lo.get_or_insert(j);
                new_hi = j;
                parents.push(row_start + (target - lo) as usize);
            }
        }
        let Some(new_lo) = new_lo else {
            return Ok(Sampled::Complete(tree));
        };
        if row + 1 > caps.max_height || (tree.len() + parents.len()) as u64 > caps.max_nodes {
            return Ok(Sampled::Truncated(tree));
        }
        row_start = tree.len();
        for &p in &parents {
            tree.push_child(p);
        }
        lo = new_lo;
        hi = new_hi;
        row += 1;
    }
}

/// Size, height and generation sizes of a tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub n_nodes: u64,
    pub height: u32,
    pub width_profile: Vec<u64>,
}

pub fn tree_stats(t: &Tree) -> TreeStats {
    let height = t.height();
    let mut width_profile = vec![0u64; height as usize + 1];
    for i in 0..t.len() {
        width_profile[t.generation(i) as usize] += 1;
    }
    TreeStats {
        n_nodes: t.len() as u64,
        height,
        width_profile,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square_gof, mean_stderr};
    use proptest::prelude::*;

    #[test]
    fn stats_of_small_trees() {
        let s = tree_stats(&Tree::single());
        assert_eq!((s.n_nodes, s.height, s.width_profile), (1, 0, vec![1]));
        let t = Tree::from_parents(&[None, Some(0), Some(0)]).unwrap();
        let s = tree_stats(&t);
        assert_eq!((s.n_nodes, s.height, s.width_profile), (3, 1, vec![1, 2]));
    }

    #[test]
    fn from_parents_rejects_bad_input() {
        assert!(Tree::from_parents(&[Some(0)]).is_err());
        assert!(Tree::from_parents(&[None, Some(1)]).is_err());
        assert!(Tree::from_parents(&[None, Some(0), Some(0), Some(0)]).is_err());
        assert!(Tree::from_parents(&[None, None]).is_err());
    }

    #[test]
    fn offspring_law_values() {
        assert_eq!(offspring_pmf(0.5), [0.25, 0.5, 0.25]);
        for beta in [0.1, 0.3, 0.5, 0.8] {
            let p = offspring_pmf(beta);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!((p[1] + 2.0 * p[2] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_beta_gives_truncated_path() {
        let p = BinaryParams::new(0.3, 0.0).unwrap();
        let caps = SampleCaps::new(1000, 50).unwrap();
        let s = sample_bgw(&p, RngStream::new(1, 0), caps).unwrap();
        assert!(s.is_truncated());
        let t = s.get();
        assert_eq!(t.len(), 51);
        assert_eq!(t.height(), 50);
        t.check_invariants().unwrap();
    }

    #[test]
    fn caps_must_be_positive() {
        let p = BinaryParams::new(0.3, 0.5).unwrap();
        let caps = SampleCaps {
            max_nodes: 0,
            max_height: 10,
        };
        assert!(sample_bgw(&p, RngStream::new(1, 0), caps).is_err());
        assert!(SampleCaps::new(10, 0).is_err());
    }

    #[test]
    fn node_cap_truncates() {
        let p = BinaryParams::new(0.3, 0.5).unwrap();
        let caps = SampleCaps::new(20, 1_000_000).unwrap();
        let mut truncated = 0;
        for i in 0..500 {
            let s = sample_bgw(&p, RngStream::new(2, i), caps).unwrap();
            assert!(s.get().len() <= 20);
            s.get().check_invariants().unwrap();
            if s.is_truncated() {
                truncated += 1;
            } else {
                assert!(s.get().len() <= 20);
            }
        }
        assert!(truncated > 0);
    }

    #[test]
    fn bgw_mean_offspring_is_one() {
        let caps = SampleCaps::new(100, 1).unwrap();
        for beta in [0.1, 0.3, 0.5] {
            let p = BinaryParams::new(0.0, beta).unwrap();
            let counts: Vec<f64> = (0..1_000_000)
                .map(|i| {
                    let t = sample_bgw(&p, RngStream::new(3, i), caps).unwrap().into_inner();
                    t.children(0).len() as f64
                })
                .collect();
            let (m, se) = mean_stderr(&counts);
            assert!((m - 1.0).abs() < 3.0 * se, "beta {beta}: {m} +- {se}");
        }
    }

    #[test]
    fn diamond_width_increments_follow_offspring_law() {
        let beta = 0.3;
        let caps = SampleCaps::new(1_000_000, 100_000).unwrap();
        let mut counts = [0u64; 3];
        let mut total = 0u64;
        let mut i = 0;
        while total < 100_000 {
            let s = sample_diamond_tree(beta, RngStream::new(4, i), caps).unwrap();
            i += 1;
            let Sampled::Complete(t) = s else { continue };
            let w = tree_stats(&t).width_profile;
            for k in 0..w.len() {
                let next = w.get(k + 1).copied().unwrap_or(0) as i64;
                let d = next - w[k] as i64 + 1;
                counts[d as usize] += 1;
                total += 1;
            }
        }
        let (_, _, pval) = chi_square_gof(&counts, &offspring_pmf(beta));
        assert!(pval > 0.001, "counts {counts:?}, p = {pval}");
    }

    #[test]
    fn diamond_trees_terminate() {
        let caps = SampleCaps::new(10_000_000, 1_000_000).unwrap();
        let mut truncated = 0;
        for i in 0..500 {
            let s = sample_diamond_tree(0.5, RngStream::new(5, i), caps).unwrap();
            s.get().check_invariants().unwrap();
            truncated += s.is_truncated() as u32;
        }
        // P(more than 1e7 nodes) is about 0.004
        assert!(truncated <= 10, "{truncated}");
    }

    #[test]
    fn diamond_small_beta_is_path_like() {
        let caps = SampleCaps::new(1_000_000, 1_000).unwrap();
        let t = sample_diamond_tree(1e-4, RngStream::new(6, 0), caps).unwrap().into_inner();
        let w = tree_stats(&t).width_profile;
        assert!(w.iter().filter(|&&x| x == 1).count() as f64 > 0.9 * w.len() as f64);
    }

    proptest! {
        #[test]
        fn sampled_trees_are_well_formed(seed in 0u64..1000, beta in 0.05f64..0.95) {
            let p = BinaryParams::new(0.5, beta).unwrap();
            let caps = SampleCaps::new(5000, 200).unwrap();
            let t = sample_bgw(&p, RngStream::new(seed, 0), caps).unwrap().into_inner();
            prop_assert!(t.check_invariants().is_ok());
            prop_assert!(t.height() <= 200);
            let d = sample_diamond_tree(beta, RngStream::new(seed, 1), caps).unwrap().into_inner();
            prop_assert!(d.check_invariants().is_ok());
            let s = tree_stats(&d);
            prop_assert_eq!(s.width_profile.iter().sum::<u64>(), s.n_nodes);
        }
    }
}
