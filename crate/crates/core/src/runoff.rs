//! Runoff on a fixed tree.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::XLaw;
use crate::tree::Tree;

/// Largest tree [`maxsum_oracle`] will enumerate.
pub const ORACLE_MAX_NODES: usize = 20;

/// A tree with point contributions `x` and the runoff `w` they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTree {
    pub tree: Tree,
    pub x: Vec<i64>,
    pub w: Vec<i64>,
}

impl LabeledTree {
    pub fn root_runoff(&self) -> i64 {
        self.w[0]
    }

    /// Inflow into `node`: the sum of its children's runoff.
    pub fn inflow(&self, node: usize) -> i64 {
        self.tree.children(node).iter().map(|&c| self.w[c as usize]).sum()
    }
}

/// Draw one point contribution per node.
pub fn label_from_law<R: Rng + ?Sized>(tree: &Tree, law: &XLaw, rng: &mut R) -> Vec<i64> {
    (0..tree.len()).map(|_| law.sample(rng)).collect()
}

fn check_labels(tree: &Tree, x: &[i64]) -> Result<()> {
    if x.len() != tree.len() {
        return Err(Error::invalid(
            "x",
            format!("{} labels for {} nodes", x.len(), tree.len()),
        ));
    }
    if let Some(v) = x.iter().find(|&&v| v < -1) {
        return Err(Error::invalid("x", format!("label {v} is below -1")));
    }
    Ok(())
}

/// `W_i = (X_i + sum of children's W) v 0` at every node, children first.
pub fn compute_runoff(tree: Tree, x: Vec<i64>) -> Result<LabeledTree> {
    check_labels(&tree, &x)?;
    let w = sweep(&tree, &x, |_| true)?;
    Ok(LabeledTree { tree, x, w })
}

fn sweep<F: Fn(usize) -> bool>(tree: &Tree, x: &[i64], keep: F) -> Result<Vec<i64>> {
    let mut acc = x.to_vec();
    let mut w = vec![0i64; tree.len()];
    for i in (0..tree.len()).rev() {
        if !keep(i) {
            continue;
        }
        w[i] = acc[i].max(0);
        if let Some(p) = tree.parent(i) {
            acc[p] = acc[p].checked_add(w[i]).ok_or(Error::Overflow)?;
        }
    }
    Ok(w)
}

/// Largest sum of `x` over a connected subtree containing the root, or `0`
/// for the empty subtree. Exhaustive; refuses trees over
/// [`ORACLE_MAX_NODES`] nodes.
pub fn maxsum_oracle(tree: &Tree, x: &[i64]) -> Result<i64> {
    check_labels(tree, x)?;
    let n = tree.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::Resource(format!(
            "max-sum enumeration over {n} nodes exceeds {ORACLE_MAX_NODES}"
        )));
    }
    let parents: Vec<usize> = (1..n).map(|i| tree.parent(i).unwrap_or(0)).collect();
    let mut best = 0i64;
    // subsets containing the root have bit 0 set
    'subsets: for mask in (1u32..(1u32 << n)).step_by(2) {
        let mut sum = x[0];
        for i in 1..n {
            if mask & (1 << i) != 0 {
                if mask & (1 << parents[i - 1]) == 0 {
                    continue 'subsets;
                }
                sum += x[i];
            }
        }
        best = best.max(sum);
    }
    Ok(best)
}

/// Root runoff of the tree cut off below generation `n`.
pub fn truncated_runoff(tree: &Tree, x: &[i64], n: u32) -> Result<i64> {
    check_labels(tree, x)?;
    Ok(sweep(tree, x, |i| tree.generation(i) <= n)?[0])
}

/// Nodes joined to the root by a path of positive runoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub flags: Vec<bool>,
    pub contributing_height: u32,
    pub height_fraction: f64,
}

pub fn contributing_set(lt: &LabeledTree) -> Contribution {
    let n = lt.tree.len();
    let mut flags = vec![false; n];
    let mut contributing_height = 0;
    for i in 0..n {
        let path_ok = match lt.tree.parent(i) {
            None => true,
            Some(p) => flags[p],
        };
        flags[i] = path_ok && lt.w[i] > 0;
        if flags[i] {
            contributing_height = contributing_height.max(lt.tree.generation(i));
        }
    }
    let height = lt.tree.height().max(1);
    Contribution {
        flags,
        contributing_height,
        height_fraction: contributing_height as f64 / height as f64,
    }
}

/// `Y = W - (inflow)` at `node`: the node's net effect on the runoff.
pub fn net_contribution_y(lt: &LabeledTree, node: usize) -> i64 {
    lt.w[node] - lt.inflow(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{BinaryParams, RngStream};
    use crate::tree::{sample_bgw, SampleCaps};
    use proptest::prelude::*;

    fn path3() -> Tree {
        // root 0 <- 1 <- 2 (leaf)
        Tree::from_parents(&[None, Some(0), Some(1)]).unwrap()
    }

    #[test]
    fn small_cases() {
        let lt = compute_runoff(Tree::single(), vec![-1]).unwrap();
        assert_eq!(lt.root_runoff(), 0);

        // leaf, middle, root = 1, 1, -1
        let lt = compute_runoff(path3(), vec![-1, 1, 1]).unwrap();
        assert_eq!(lt.w, vec![1, 2, 1]);
        assert_eq!(maxsum_oracle(&lt.tree, &lt.x).unwrap(), 1);

        let t = Tree::from_parents(&[None, Some(0), Some(0), Some(1), Some(2)]).unwrap();
        let lt = compute_runoff(t, vec![1; 5]).unwrap();
        assert_eq!(lt.root_runoff(), 5);
    }

    #[test]
    fn oracle_floor_and_limits() {
        assert_eq!(maxsum_oracle(&path3(), &[-1, -1, -1]).unwrap(), 0);
        assert_eq!(maxsum_oracle(&Tree::single(), &[1]).unwrap(), 1);
        let parents: Vec<Option<usize>> =
            std::iter::once(None).chain((1..21).map(|i| Some(i - 1))).collect();
        let big = Tree::from_parents(&parents).unwrap();
        assert!(matches!(maxsum_oracle(&big, &[0; 21]), Err(Error::Resource(_))));
    }

    #[test]
    fn labels_are_checked() {
        assert!(compute_runoff(path3(), vec![0, 0]).is_err());
        assert!(compute_runoff(path3(), vec![0, -2, 0]).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let t = Tree::from_parents(&[None, Some(0), Some(0)]).unwrap();
        assert_eq!(compute_runoff(t, vec![0, i64::MAX, 1]), Err(Error::Overflow));
    }

    #[test]
    fn truncation_edges() {
        let x = vec![-1, 1, 1];
        assert_eq!(truncated_runoff(&path3(), &x, 0).unwrap(), 0);
        assert_eq!(truncated_runoff(&path3(), &[2, 1, 1], 0).unwrap(), 2);
        assert_eq!(truncated_runoff(&path3(), &x, 2).unwrap(), 1);
        assert_eq!(truncated_runoff(&path3(), &x, 9).unwrap(), 1);
    }

    #[test]
    fn contribution_cases() {
        let lt = compute_runoff(path3(), vec![-1, -1, -1]).unwrap();
        let c = contributing_set(&lt);
        assert_eq!(c.contributing_height, 0);
        assert_eq!(c.height_fraction, 0.0);
        assert!(c.flags.iter().all(|&f| !f));

        let lt = compute_runoff(path3(), vec![1, 1, 1]).unwrap();
        let c = contributing_set(&lt);
        assert!(c.flags.iter().all(|&f| f));
        assert_eq!(c.height_fraction, 1.0);

        // the middle node absorbs the leaf's runoff, so only the root counts
        let lt = compute_runoff(path3(), vec![1, -1, 1]).unwrap();
        let c = contributing_set(&lt);
        assert_eq!(c.flags, vec![true, false, false]);
        assert_eq!(c.contributing_height, 0);
    }

    #[test]
    fn y_cases() {
        let lt = compute_runoff(Tree::single(), vec![1]).unwrap();
        assert_eq!(net_contribution_y(&lt, 0), 1);
        let lt = compute_runoff(Tree::single(), vec![-1]).unwrap();
        assert_eq!(net_contribution_y(&lt, 0), 0);
        // inflow 3 into a node with x = -1
        let t = Tree::from_parents(&[None, Some(0), Some(1), Some(2)]).unwrap();
        let lt = compute_runoff(t, vec![-1, 1, 1, 1]).unwrap();
        assert_eq!(lt.inflow(0), 3);
        assert_eq!(net_contribution_y(&lt, 0), -1);
        assert_eq!(lt.root_runoff(), lt.inflow(0) + net_contribution_y(&lt, 0));
    }

    fn labeled_tree(seed: u64, alpha: f64, max_nodes: u64) -> (Tree, Vec<i64>) {
        let p = BinaryParams::new(alpha, 0.5).unwrap();
        let caps = SampleCaps::new(max_nodes, 1_000).unwrap();
        let t = sample_bgw(&p, RngStream::new(seed, 0), caps).unwrap().into_inner();
        let mut rng = RngStream::new(seed, 1).rng();
        let x = label_from_law(&t, &p.to_xlaw(), &mut rng);
        (t, x)
    }

    proptest! {
        #[test]
        fn recursion_matches_maxsum(seed in any::<u64>(), ai in 0usize..3) {
            let alpha = [0.2, 0.25, 0.4][ai];
            let (t, x) = labeled_tree(seed, alpha, 12);
            let oracle = maxsum_oracle(&t, &x).unwrap();
            let lt = compute_runoff(t, x).unwrap();
            prop_assert_eq!(lt.root_runoff(), oracle);
        }

        #[test]
        fn truncation_is_monotone(seed in any::<u64>(), alpha in 0.0f64..1.0) {
            let (t, x) = labeled_tree(seed, alpha, 2000);
            let h = t.height();
            let mut prev = i64::MIN;
            for n in 0..=h + 1 {
                let v = truncated_runoff(&t, &x, n).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
            prop_assert_eq!(prev, compute_runoff(t, x).unwrap().root_runoff());
        }

        #[test]
        fn runoff_identity_and_y(seed in any::<u64>(), alpha in 0.0f64..1.0) {
            let (t, x) = labeled_tree(seed, alpha, 2000);
            let lt = compute_runoff(t, x).unwrap();
            for i in 0..lt.tree.len() {
                prop_assert!(lt.w[i] >= 0);
                prop_assert_eq!(lt.w[i], (lt.x[i] + lt.inflow(i)).max(0));
                let y = net_contribution_y(&lt, i);
                let expected = if lt.x[i] == 1 { 1 } else if lt.inflow(i) == 0 { 0 } else { -1 };
                prop_assert_eq!(y, expected);
            }
        }
    }
}
