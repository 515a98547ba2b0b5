//! Property tests over randomly generated distributions and graphs.

use std::collections::BTreeSet;

use proptest::prelude::*;

use mediation_kit::distribution::{Assignment, DiscreteJointDistribution};
use mediation_kit::effects::{nde, nie, propensity_reduce, te, EffectQuery};
use mediation_kit::equivalence::dichotomous_identity_check;
use mediation_kit::graph::{DirectedGraph, SeparationQuery};

fn dist(names: &[&str], mut cells: Vec<f64>) -> DiscreteJointDistribution {
    let vars: Vec<(String, Vec<String>)> =
        names.iter().map(|n| (n.to_string(), vec!["l0".into(), "l1".into()])).collect();
    let total: f64 = cells.iter().sum();
    cells.iter_mut().for_each(|p| *p /= total);
    DiscreteJointDistribution::new(vars, cells).unwrap()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn cells(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1e-3..1.0f64, n)
}

proptest! {
    // the total effect splits exactly into its direct and indirect parts,
    // whichever way the middle variables are assigned to the query
    #[test]
    fn decomposition(table in cells(16), as_mediator in any::<[bool; 2]>()) {
        let d = dist(&["X", "M", "C", "Y"], table);
        let mut mediators = BTreeSet::new();
        let mut covariates = BTreeSet::new();
        for (name, m) in ["M", "C"].iter().zip(as_mediator) {
            if m { &mut mediators } else { &mut covariates }.insert(name.to_string());
        }
        let q = EffectQuery::new("X", "Y", "l0", "l1", "l1", mediators, covariates).unwrap();
        let total = te(&d, "X", "l0", "l1", "Y", "l1").unwrap().value;
        let parts = nde(&d, &q).unwrap().value + nie(&d, &q).unwrap().value;
        prop_assert!((total - parts).abs() <= 1e-12);
    }

    // swapping the treated and baseline levels flips every effect's sign
    #[test]
    fn level_swap_antisymmetry(table in cells(8)) {
        let d = dist(&["X", "M", "Y"], table);
        let q = EffectQuery::new("X", "Y", "l0", "l1", "l1", set(&["M"]), set(&[])).unwrap();
        let mut swapped = q.clone();
        (swapped.x, swapped.x_prime) = (q.x_prime.clone(), q.x.clone());
        let fwd = te(&d, "X", "l0", "l1", "Y", "l1").unwrap().value;
        let bwd = te(&d, "X", "l1", "l0", "Y", "l1").unwrap().value;
        prop_assert!((fwd + bwd).abs() <= 1e-12);
        prop_assert!((nde(&d, &q).unwrap().value + nie(&d, &swapped).unwrap().value
            + nie(&d, &q).unwrap().value + nde(&d, &swapped).unwrap().value).abs() <= 1e-12);
    }

    // chain rule: pr(target, given) = pr(target | given) pr(given)
    #[test]
    fn conditional_chain_rule(table in cells(8)) {
        let d = dist(&["A", "B", "C"], table);
        let target = Assignment::from([("A".to_string(), "l1".to_string())]);
        let given = Assignment::from([
            ("B".to_string(), "l0".to_string()),
            ("C".to_string(), "l1".to_string()),
        ]);
        let mut joint = given.clone();
        joint.extend(target.clone());
        let lhs = d.prob(&joint).unwrap();
        let rhs = d.conditional_prob(&target, &given).unwrap() * d.prob(&given).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    // for a binary treatment the standardized sum equals its closed form in
    // unconditional quantities
    #[test]
    fn binary_standardization_identity(table in cells(8)) {
        let d = dist(&["X", "T", "Y"], table);
        prop_assert!(dichotomous_identity_check(
            &d, &set(&["T"]), "X", "Y", "l1", "l0", "l1", 1e-12
        ).unwrap());
    }

    // collapsing the conditioning set to its propensity score moves neither
    // natural effect
    #[test]
    fn propensity_reduction_invariance(table in cells(16)) {
        let d = dist(&["X", "V1", "V2", "Y"], table);
        let reduced = propensity_reduce(&d, "X", &set(&["V1", "V2"])).unwrap();
        let q = EffectQuery::new("X", "Y", "l0", "l1", "l1", set(&["V1", "V2"]), set(&[])).unwrap();
        let qp = EffectQuery::new("X", "Y", "l0", "l1", "l1", set(&["PS"]), set(&[])).unwrap();
        prop_assert!((nde(&d, &q).unwrap().value - nde(&reduced, &qp).unwrap().value).abs() <= 1e-12);
        prop_assert!((nie(&d, &q).unwrap().value - nie(&reduced, &qp).unwrap().value).abs() <= 1e-12);
    }

    // refining a ratio of counts over a partition never lowers it
    #[test]
    fn split_count_inequality(pairs in proptest::collection::vec((1u64..500, 1u64..500), 2..6)) {
        let fine: f64 = pairs.iter().map(|&(a, b)| (b * b) as f64 / a as f64).sum();
        let (sa, sb): (u64, u64) = pairs.iter().fold((0, 0), |(x, y), &(a, b)| (x + a, y + b));
        prop_assert!(fine >= (sb * sb) as f64 / sa as f64 - 1e-9);
    }

    // d-separation is symmetric in its first two arguments
    #[test]
    fn d_separation_symmetry(mask in any::<[bool; 10]>(), a in 0usize..5, b in 0usize..5, cmask in any::<[bool; 5]>()) {
        prop_assume!(a != b);
        let names: Vec<String> = (0..5).map(|i| format!("V{i}")).collect();
        let mut edges = Vec::new();
        let mut k = 0;
        for i in 0..5 {
            for j in (i + 1)..5 {
                if mask[k] {
                    edges.push((names[i].clone(), names[j].clone()));
                }
                k += 1;
            }
        }
        let g = DirectedGraph::new(&names, &edges).unwrap();
        let c: BTreeSet<String> = (0..5)
            .filter(|&i| cmask[i] && i != a && i != b)
            .map(|i| names[i].clone())
            .collect();
        let q = SeparationQuery {
            set_a: BTreeSet::from([names[a].clone()]),
            set_b: BTreeSet::from([names[b].clone()]),
            set_c: c.clone(),
        };
        let r = SeparationQuery { set_a: q.set_b.clone(), set_b: q.set_a.clone(), set_c: c };
        prop_assert_eq!(g.d_separated(&q).unwrap(), g.d_separated(&r).unwrap());
    }
}
