use crnpriv::linalg::integer_rank;
use crnpriv::structure::*;
use crnpriv::trees::{enumerate_binary_trees, tree_to_crn, CollabTree, TreeShape};
use crnpriv::{models, parse_spec, Crn};

fn crn(text: &str) -> Crn {
    parse_spec(text).unwrap().crn
}

#[test]
fn dag_network_goldens() {
    let r = analyze(&crn(models::DAG));
    assert_eq!(r.n_complexes, 8);
    assert_eq!(r.n_linkage_classes(), 4);
    assert_eq!(r.rank_gamma, 4);
    assert_eq!(r.deficiency, 0);
    assert!(r.weakly_reversible && r.complex_balanced_certified && r.collaboration_dag);
}

#[test]
fn pairing_network() {
    let c = crn(models::PAIRING);
    let r = analyze(&c);
    assert_eq!(
        (r.n_complexes, r.n_linkage_classes(), r.rank_gamma, r.deficiency),
        (4, 2, 2, 0)
    );
    assert!(r.weakly_reversible && r.collaboration_dag);
    let basis = conservation_laws(&c);
    assert_eq!(basis.len(), 3);
    let basis_rank = integer_rank(&basis);
    for law in [[1, 0, 0, 1, 1], [0, 1, 0, 1, 1], [0, 0, 1, 0, 1]] {
        let mut extended = basis.clone();
        extended.push(law.to_vec());
        assert_eq!(integer_rank(&extended), basis_rank, "{law:?} outside the span");
    }
}

#[test]
fn task_network_is_not_weakly_reversible() {
    let r = analyze(&crn(models::TASKS));
    assert!(!r.weakly_reversible);
    assert!(!r.complex_balanced_certified);
    assert!(!r.collaboration_dag);
}

#[test]
fn resource_is_conserved_in_motivational_model() {
    let c = crn(models::MOTIVATIONAL);
    let basis = conservation_laws(&c);
    let gamma = c.stoichiometry_matrix();
    let resource = [0i64, 0, 1, 1, 1];
    let mut extended = basis.clone();
    extended.push(resource.to_vec());
    assert_eq!(integer_rank(&extended), integer_rank(&basis));
    for law in &basis {
        for l in 0..c.n_reactions() {
            let s: i64 = (0..c.n_states()).map(|i| law[i] * gamma[i][l]).sum();
            assert_eq!(s, 0);
        }
    }
}

#[test]
fn networks_without_reactions() {
    let mut b = Crn::builder();
    b.add_state("a").unwrap();
    b.add_state("b").unwrap();
    let c = b.build().unwrap();
    assert_eq!(deficiency(&c), (0, 0));
    assert!(!is_collaboration_dag(&c));
}

#[test]
fn irreversible_step_breaks_weak_reversibility() {
    let mut b = Crn::builder();
    let a = b.add_state("a").unwrap();
    let c = b.add_state("b").unwrap();
    b.add_reaction(&[(a, 1)], &[(c, 1)], 1.0).unwrap();
    assert!(!is_weakly_reversible(&b.build().unwrap()));
}

#[test]
fn tree_networks_are_deficiency_zero_dags() {
    for n in 2..=7 {
        for shape in enumerate_binary_trees(n).unwrap() {
            let c = tree_to_crn(&CollabTree::with_unit_rates(shape.clone())).unwrap();
            let r = analyze(&c);
            assert!(r.collaboration_dag, "{shape}");
            assert!(r.weakly_reversible, "{shape}");
            assert_eq!(r.deficiency, 0, "{shape}");
            assert_eq!(r.conservation_basis.len(), n, "{shape}");
        }
    }
    let c = tree_to_crn(&CollabTree::with_unit_rates(TreeShape::complete(3))).unwrap();
    assert_eq!((c.n_states(), c.n_reactions()), (15, 14));
}
