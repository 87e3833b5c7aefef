//! Structural classification: linkage classes, weak reversibility,
//! deficiency, collaboration-DAG recognition and conservation laws.

use petgraph::algo::{kosaraju_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::crn::Crn;
use crate::linalg::{integer_null_space, integer_rank, transpose};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub n_states: usize,
    pub n_complexes: usize,
    pub n_reactions: usize,
    pub linkage_classes: Vec<Vec<usize>>,
    pub weakly_reversible: bool,
    pub rank_gamma: usize,
    pub deficiency: usize,
    pub complex_balanced_certified: bool,
    pub collaboration_dag: bool,
    pub conservation_basis: Vec<Vec<i64>>,
}

impl StructureReport {
    pub fn n_linkage_classes(&self) -> usize {
        self.linkage_classes.len()
    }
}

pub fn analyze(crn: &Crn) -> StructureReport {
    let linkage_classes = linkage_classes(crn);
    let weakly_reversible = is_weakly_reversible(crn);
    let (deficiency, rank_gamma) = deficiency(crn);
    StructureReport {
        n_states: crn.n_states(),
        n_complexes: crn.n_complexes(),
        n_reactions: crn.n_reactions(),
        linkage_classes,
        weakly_reversible,
        rank_gamma,
        deficiency,
        complex_balanced_certified: weakly_reversible && deficiency == 0,
        collaboration_dag: is_collaboration_dag(crn),
        conservation_basis: conservation_laws(crn),
    }
}

/// Connected components of the undirected complex graph, each sorted, ordered
/// by their smallest complex index.
pub fn linkage_classes(crn: &Crn) -> Vec<Vec<usize>> {
    let n = crn.n_complexes();
    let mut uf = UnionFind::<usize>::new(n);
    for r in crn.reactions() {
        uf.union(r.source, r.target);
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for c in 0..n {
        let root = uf.find(c);
        if slot[root] == usize::MAX {
            slot[root] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[root]].push(c);
    }
    classes
}

fn complex_graph(crn: &Crn) -> DiGraph<(), ()> {
    let mut g = DiGraph::with_capacity(crn.n_complexes(), crn.n_reactions());
    for _ in 0..crn.n_complexes() {
        g.add_node(());
    }
    for r in crn.reactions() {
        g.add_edge(NodeIndex::new(r.source), NodeIndex::new(r.target), ());
    }
    g
}

/// True iff every reaction lies inside a strongly connected component of the
/// complex digraph (equivalently, every linkage class is strongly connected).
pub fn is_weakly_reversible(crn: &Crn) -> bool {
    let g = complex_graph(crn);
    let mut component = vec![0usize; crn.n_complexes()];
    for (k, scc) in kosaraju_scc(&g).into_iter().enumerate() {
        for node in scc {
            component[node.index()] = k;
        }
    }
    crn.reactions()
        .iter()
        .all(|r| component[r.source] == component[r.target])
}

/// Returns `(δ, rank Γ)` with `δ = N_C − L − rank Γ`.
pub fn deficiency(crn: &Crn) -> (usize, usize) {
    let rank = integer_rank(&crn.stoichiometry_matrix());
    let l = linkage_classes(crn).len();
    (crn.n_complexes() - l - rank, rank)
}

/// Recognizes collaboration mechanisms: reactions pair up as forward/backward
/// reactions between a multi-unit complex and a single compound state, and the
/// graph `reactant state → reaction node → compound state` is acyclic.
pub fn is_collaboration_dag(crn: &Crn) -> bool {
    let reactions = crn.reactions();
    if reactions.is_empty() {
        return false;
    }
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let state_nodes: Vec<NodeIndex> = (0..crn.n_states()).map(|_| g.add_node(())).collect();
    let mut paired = vec![false; reactions.len()];
    for l in 0..reactions.len() {
        if paired[l] {
            continue;
        }
        let Some(rev) = (l + 1..reactions.len()).find(|&m| {
            !paired[m] && reactions[m].source == reactions[l].target && reactions[m].target == reactions[l].source
        }) else {
            return false;
        };
        paired[l] = true;
        paired[rev] = true;
        let a = &crn.complexes()[reactions[l].source];
        let b = &crn.complexes()[reactions[l].target];
        let (parts, compound) = match (a.as_single_state(), b.as_single_state()) {
            (None, Some(c)) if a.molecularity() >= 2 => (a, c),
            (Some(c), None) if b.molecularity() >= 2 => (b, c),
            _ => return false,
        };
        let node = g.add_node(());
        for (s, _) in parts.support() {
            if s == compound {
                return false;
            }
            g.add_edge(state_nodes[s], node, ());
        }
        g.add_edge(node, state_nodes[compound], ());
    }
    toposort(&g, None).is_ok()
}

/// Integer basis of `{c : cᵀΓ = 0}`.
pub fn conservation_laws(crn: &Crn) -> Vec<Vec<i64>> {
    let gamma = crn.stoichiometry_matrix();
    let gamma_t = transpose(&gamma, crn.n_reactions());
    integer_null_space(&gamma_t, crn.n_states())
}
