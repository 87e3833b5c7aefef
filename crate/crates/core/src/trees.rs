//! Binary collaboration trees: enumeration of unlabeled rooted shapes and
//! conversion into reaction networks.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;

use crate::crn::{Composition, Crn, QuerySpec, StateId};
use crate::error::{Error, Result};
use crate::parser::ModelFile;

pub const MAX_LEAVES: usize = 20;

/// Unlabeled rooted binary tree in canonical form: children of every node
/// are ordered by (leaf count, canonical string).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TreeShape {
    Leaf,
    Node(Box<TreeShape>, Box<TreeShape>),
}

impl TreeShape {
    /// Joins two subtrees, ordering them canonically.
    pub fn join(a: TreeShape, b: TreeShape) -> TreeShape {
        let key = |t: &TreeShape| (t.leaves(), t.to_string());
        if key(&a) <= key(&b) {
            TreeShape::Node(Box::new(a), Box::new(b))
        } else {
            TreeShape::Node(Box::new(b), Box::new(a))
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeShape::Leaf => 1,
            TreeShape::Node(a, b) => a.leaves() + b.leaves(),
        }
    }

    pub fn internal_nodes(&self) -> usize {
        self.leaves() - 1
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        match self {
            TreeShape::Leaf => 0,
            TreeShape::Node(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Perfectly balanced tree with `2^levels` leaves.
    pub fn complete(levels: u32) -> TreeShape {
        if levels == 0 {
            TreeShape::Leaf
        } else {
            let sub = TreeShape::complete(levels - 1);
            TreeShape::join(sub.clone(), sub)
        }
    }

    /// Left-deep tree in which every internal node has a leaf child.
    pub fn caterpillar(leaves: usize) -> TreeShape {
        let mut t = TreeShape::Leaf;
        for _ in 1..leaves {
            t = TreeShape::join(TreeShape::Leaf, t);
        }
        t
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeShape::Leaf => write!(f, "x"),
            TreeShape::Node(a, b) => write!(f, "({a},{b})"),
        }
    }
}

/// All unlabeled rooted binary trees with `n_leaves` leaves, in canonical
/// order (by size of the smaller root subtree, then by subtree order).
pub fn enumerate_binary_trees(n_leaves: usize) -> Result<Vec<TreeShape>> {
    if !(1..=MAX_LEAVES).contains(&n_leaves) {
        return Err(Error::Range(format!(
            "number of leaves must be in 1..={MAX_LEAVES}, got {n_leaves}"
        )));
    }
    let mut by_size: Vec<Vec<TreeShape>> = vec![Vec::new(), vec![TreeShape::Leaf]];
    for n in 2..=n_leaves {
        let mut out = Vec::new();
        for a in 1..=n / 2 {
            let b = n - a;
            for (i, left) in by_size[a].iter().enumerate() {
                let start = if a == b { i } else { 0 };
                for right in &by_size[b][start..] {
                    out.push(TreeShape::join(left.clone(), right.clone()));
                }
            }
        }
        by_size.push(out);
    }
    Ok(by_size.swap_remove(n_leaves))
}

/// A tree shape with forward (composition) and backward (decomposition) rate
/// constants for every internal node, listed in post-order.
#[derive(Debug, Clone, PartialEq)]
pub struct CollabTree {
    pub shape: TreeShape,
    pub rates: Vec<(f64, f64)>,
}

impl CollabTree {
    pub fn with_unit_rates(shape: TreeShape) -> Self {
        let rates = vec![(1.0, 1.0); shape.internal_nodes()];
        CollabTree { shape, rates }
    }

    pub fn depth(&self) -> usize {
        self.shape.depth()
    }
}

/// Builds the network whose collaboration-DAG is the tree. Leaves become
/// types `1..=n` (left to right) with elementary states `{i}`; each internal
/// node contributes `child₁ + child₂ ⇌ parent`.
pub fn tree_to_crn(tree: &CollabTree) -> Result<Crn> {
    if tree.rates.len() != tree.shape.internal_nodes() {
        return Err(Error::DimensionMismatch {
            expected: tree.shape.internal_nodes(),
            found: tree.rates.len(),
        });
    }
    let n = tree.shape.leaves();
    let mut b = Crn::builder();
    for i in 1..=n {
        b.add_state(format!("{{{i}}}"))?;
        b.add_type(i.to_string(), None);
    }
    let mut next_leaf = 1;
    let mut next_rate = 0;
    build_node(&tree.shape, tree, &mut b, &mut next_leaf, &mut next_rate)?;
    b.build()
}

fn build_node(
    node: &TreeShape,
    tree: &CollabTree,
    b: &mut crate::crn::CrnBuilder,
    next_leaf: &mut usize,
    next_rate: &mut usize,
) -> Result<(StateId, Vec<usize>)> {
    match node {
        TreeShape::Leaf => {
            let i = *next_leaf;
            *next_leaf += 1;
            Ok((i - 1, vec![i]))
        }
        TreeShape::Node(l, r) => {
            let (ls, mut types) = build_node(l, tree, b, next_leaf, next_rate)?;
            let (rs, rtypes) = build_node(r, tree, b, next_leaf, next_rate)?;
            types.extend(rtypes);
            types.sort_unstable();
            let label = format!(
                "{{{}}}",
                types.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            );
            let parent = b.add_state(label)?;
            let (kf, kb) = tree.rates[*next_rate];
            *next_rate += 1;
            b.add_reversible(&[(ls, 1), (rs, 1)], &[(parent, 1)], kf, kb)?;
            Ok((parent, types))
        }
    }
}

/// Complete model for a tree: `per_type` agents of every type and the
/// group-size query `y_i = Σ_{|I| = i} x^I`, `i = 1..=n`.
pub fn tree_model(tree: &CollabTree, per_type: u64) -> Result<ModelFile> {
    let crn = tree_to_crn(tree)?;
    let type_counts: IndexMap<String, u64> = crn.types().iter().map(|t| (t.name.clone(), per_type)).collect();
    let query = QuerySpec::group_size_counts(&crn, tree.shape.leaves());
    Ok(ModelFile {
        crn,
        composition: Composition::new(type_counts, IndexMap::new()),
        query,
        params: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        let counts: Vec<usize> = (1..=6).map(|n| enumerate_binary_trees(n).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 1, 1, 2, 3, 6]);
        assert!(enumerate_binary_trees(0).is_err());
        assert!(enumerate_binary_trees(21).is_err());
    }

    #[test]
    fn shapes_are_distinct_and_canonical() {
        let trees = enumerate_binary_trees(9).unwrap();
        let mut names: Vec<String> = trees.iter().map(|t| t.to_string()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), trees.len());
        assert!(trees.iter().all(|t| t.leaves() == 9));
    }

    #[test]
    fn depth_of_extremes() {
        assert_eq!(TreeShape::complete(3).depth(), 3);
        assert_eq!(TreeShape::caterpillar(8).depth(), 7);
    }

    #[test]
    fn two_leaf_network() {
        let crn = tree_to_crn(&CollabTree::with_unit_rates(TreeShape::complete(1))).unwrap();
        assert_eq!(crn.n_states(), 3);
        assert_eq!(crn.n_reactions(), 2);
        assert_eq!(crn.states()[2].label(), "{1,2}");
    }

    #[test]
    fn rate_count_must_match() {
        let tree = CollabTree {
            shape: TreeShape::complete(2),
            rates: vec![(1.0, 1.0)],
        };
        assert!(matches!(tree_to_crn(&tree), Err(Error::DimensionMismatch { .. })));
    }
}
