//! Weak-equivalence decisions between candidate conditioning sets: the
//! direct standardized-sum comparison, three sufficient conditions built on
//! conditional independence, Markov boundary search, and the dichotomous
//! treatment identity.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::distribution::{Assignment, DiscreteJointDistribution};
use crate::error::{MediationError, Result};
use crate::graph::{DirectedGraph, SeparationQuery};

const BOUNDARY_SEARCH_CAP: usize = 12;

/// Independence backend for the sufficient-condition checks: exact
/// measurement on a distribution, or d-separation on a DAG.
#[derive(Clone, Copy)]
pub enum IndependenceOracle<'a> {
    Distribution(&'a DiscreteJointDistribution, f64),
    Graph(&'a DirectedGraph),
}

impl IndependenceOracle<'_> {
    fn independent(
        &self,
        a: &BTreeSet<String>,
        b: &BTreeSet<String>,
        c: &BTreeSet<String>,
    ) -> Result<bool> {
        if a.is_empty() || b.is_empty() {
            return Ok(true);
        }
        match self {
            IndependenceOracle::Distribution(d, tol) => d.conditionally_independent(a, b, c, *tol),
            IndependenceOracle::Graph(g) => g.d_separated(&SeparationQuery {
                set_a: a.clone(),
                set_b: b.clone(),
                set_c: c.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceQuery {
    pub treatment: String,
    pub outcome: String,
    pub x: String,
    pub x_prime: String,
    pub t1: BTreeSet<String>,
    pub t2: BTreeSet<String>,
}

impl EquivalenceQuery {
    fn validate(&self) -> Result<()> {
        for t in [&self.t1, &self.t2] {
            if t.contains(&self.treatment) || t.contains(&self.outcome) {
                return Err(MediationError::OverlappingSets);
            }
        }
        Ok(())
    }
}

/// Σ_t pr(y|x,t)·pr(t|x′) per outcome level; the empty set degenerates to
/// pr(y|x).
fn standardized_sums(
    d: &DiscreteJointDistribution,
    q: &EquivalenceQuery,
    t: &BTreeSet<String>,
) -> Result<Vec<f64>> {
    let arm_prime = Assignment::from([(q.treatment.clone(), q.x_prime.clone())]);
    if d.prob(&arm_prime)? <= 0.0 {
        return Err(MediationError::PositivityViolation(format!(
            "pr({}={}) = 0",
            q.treatment, q.x_prime
        )));
    }
    let y_levels = d.levels(&q.outcome)?.to_vec();
    let mut sums = vec![0.0; y_levels.len()];
    for cfg in d.configurations(t)? {
        let w = d.conditional_prob(&cfg, &arm_prime)?;
        if w <= 0.0 {
            continue;
        }
        let mut given = cfg.clone();
        given.insert(q.treatment.clone(), q.x.clone());
        if d.prob(&given)? <= 0.0 {
            return Err(MediationError::PositivityViolation(format!(
                "pr({}={}, {cfg:?}) = 0 with pr(t|x') > 0",
                q.treatment, q.x
            )));
        }
        for (i, y) in y_levels.iter().enumerate() {
            let target = Assignment::from([(q.outcome.clone(), y.clone())]);
            sums[i] += d.conditional_prob(&target, &given)? * w;
        }
    }
    Ok(sums)
}

/// Direct comparison of the two standardized sums over every outcome level.
/// Returns the verdict and the worst per-level discrepancy.
pub fn weakly_equivalent_direct(
    d: &DiscreteJointDistribution,
    q: &EquivalenceQuery,
    tol: f64,
) -> Result<(bool, f64)> {
    q.validate()?;
    let s1 = standardized_sums(d, q, &q.t1)?;
    let s2 = standardized_sums(d, q, &q.t2)?;
    let max = s1.iter().zip(&s2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((max <= tol, max))
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Outcome {
    /// X ⫫ (T2\T1) | T1 and Y ⫫ (T1\T2) | {X}∪T2
    pub branch_i: bool,
    /// mirror image with the roles of T1 and T2 swapped
    pub branch_ii: bool,
}

impl Theorem1Outcome {
    pub fn passes(&self) -> bool {
        self.branch_i || self.branch_ii
    }
}

pub fn check_theorem1(
    oracle: IndependenceOracle,
    treatment: &str,
    outcome: &str,
    t1: &BTreeSet<String>,
    t2: &BTreeSet<String>,
) -> Result<Theorem1Outcome> {
    let x_set = BTreeSet::from([treatment.to_string()]);
    let y_set = BTreeSet::from([outcome.to_string()]);
    let branch = |ta: &BTreeSet<String>, tb: &BTreeSet<String>| -> Result<bool> {
        let gained: BTreeSet<String> = tb.difference(ta).cloned().collect();
        let lost: BTreeSet<String> = ta.difference(tb).cloned().collect();
        let x_cond = oracle.independent(&x_set, &gained, ta)?;
        let y_given: BTreeSet<String> = x_set.union(tb).cloned().collect();
        Ok(x_cond && oracle.independent(&y_set, &lost, &y_given)?)
    };
    Ok(Theorem1Outcome { branch_i: branch(t1, t2)?, branch_ii: branch(t2, t1)? })
}

/// Minimal subset m of `relative` with target ⫫ (relative \ m) | m, searched
/// exhaustively by subset size and then lexicographically by variable order.
/// The boolean reports whether other minimum-size blankets exist.
fn minimal_blanket(
    oracle: IndependenceOracle,
    target: &str,
    relative: &BTreeSet<String>,
) -> Result<(BTreeSet<String>, bool)> {
    if relative.contains(target) {
        return Err(MediationError::OverlappingSets);
    }
    let vars: Vec<&String> = relative.iter().collect();
    let n = vars.len();
    if n > BOUNDARY_SEARCH_CAP {
        return Err(MediationError::BoundarySearchTooLarge { max: BOUNDARY_SEARCH_CAP, got: n });
    }
    let target_set = BTreeSet::from([target.to_string()]);
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut found: Option<(BTreeSet<String>, u32)> = None;
    let mut multiple = false;
    for &mask in &masks {
        if let Some((_, sz)) = &found {
            if mask.count_ones() > *sz {
                break;
            }
        }
        let m: BTreeSet<String> = vars
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, v)| (*v).clone())
            .collect();
        let rest: BTreeSet<String> = relative.difference(&m).cloned().collect();
        if oracle.independent(&target_set, &rest, &m)? {
            if found.is_some() {
                multiple = true;
            } else {
                found = Some((m, mask.count_ones()));
            }
        }
    }
    let (boundary, _) = found.expect("the full set is always a blanket");
    Ok((boundary, multiple))
}

/// Minimal Markov blanket of `target` within `relative`, measured on the
/// distribution at tolerance `tol`.
pub fn markov_boundary_distributional(
    d: &DiscreteJointDistribution,
    target: &str,
    relative: &BTreeSet<String>,
    tol: f64,
) -> Result<BTreeSet<String>> {
    Ok(minimal_blanket(IndependenceOracle::Distribution(d, tol), target, relative)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Outcome {
    pub passes: bool,
    /// Markov boundary of the treatment within T1
    pub boundary1: BTreeSet<String>,
    /// Markov boundary of the treatment within T2
    pub boundary2: BTreeSet<String>,
    /// a minimum-size boundary was not unique in at least one set
    pub multiple_minimal: bool,
}

pub fn check_theorem2(
    oracle: IndependenceOracle,
    treatment: &str,
    t1: &BTreeSet<String>,
    t2: &BTreeSet<String>,
) -> Result<Theorem2Outcome> {
    let (b1, m1) = minimal_blanket(oracle, treatment, t1)?;
    let (b2, m2) = minimal_blanket(oracle, treatment, t2)?;
    Ok(Theorem2Outcome {
        passes: b1 == b2,
        boundary1: b1,
        boundary2: b2,
        multiple_minimal: m1 || m2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Outcome {
    pub passes: bool,
    /// Markov boundary of the outcome within T1 ∪ T2 ∪ {X}
    pub outcome_boundary: BTreeSet<String>,
    pub multiple_minimal: bool,
}

pub fn check_theorem3(
    oracle: IndependenceOracle,
    treatment: &str,
    outcome: &str,
    t1: &BTreeSet<String>,
    t2: &BTreeSet<String>,
) -> Result<Theorem3Outcome> {
    let mut relative: BTreeSet<String> = t1.union(t2).cloned().collect();
    relative.insert(treatment.to_string());
    let (u, multiple) = minimal_blanket(oracle, outcome, &relative)?;
    let x_set = BTreeSet::from([treatment.to_string()]);
    let mut passes = true;
    for (ti, tj) in [(t1, t2), (t2, t1)] {
        let probe: BTreeSet<String> = u
            .iter()
            .filter(|v| *v != treatment && tj.contains(*v) && !ti.contains(*v))
            .cloned()
            .collect();
        passes &= oracle.independent(&x_set, &probe, ti)?;
    }
    Ok(Theorem3Outcome { passes, outcome_boundary: u, multiple_minimal: multiple })
}

/// For a binary treatment, Σ_t pr(y|x,t)pr(t|x′) equals
/// [Σ_t pr(y|x,t)pr(t) − pr(x,y)] / pr(x′); checks the identity numerically.
pub fn dichotomous_identity_check(
    d: &DiscreteJointDistribution,
    t: &BTreeSet<String>,
    treatment: &str,
    outcome: &str,
    y: &str,
    x: &str,
    x_prime: &str,
    tol: f64,
) -> Result<bool> {
    if d.levels(treatment)?.len() != 2 {
        return Err(MediationError::NonBinaryTreatment(treatment.to_string()));
    }
    if t.is_empty() {
        return Err(MediationError::EmptyQuerySet);
    }
    let q = EquivalenceQuery {
        treatment: treatment.to_string(),
        outcome: outcome.to_string(),
        x: x.to_string(),
        x_prime: x_prime.to_string(),
        t1: t.clone(),
        t2: t.clone(),
    };
    let y_idx = d
        .levels(outcome)?
        .iter()
        .position(|l| l == y)
        .ok_or_else(|| MediationError::UnknownLevel {
            variable: outcome.to_string(),
            level: y.to_string(),
        })?;
    let lhs = standardized_sums(d, &q, t)?[y_idx];
    let arm = Assignment::from([(treatment.to_string(), x.to_string())]);
    let p_x_prime = d.prob(&Assignment::from([(treatment.to_string(), x_prime.to_string())]))?;
    if p_x_prime <= 0.0 {
        return Err(MediationError::PositivityViolation(format!(
            "pr({treatment}={x_prime}) = 0"
        )));
    }
    let mut unconditional = 0.0;
    for cfg in d.configurations(t)? {
        let pt = d.prob(&cfg)?;
        if pt <= 0.0 {
            continue;
        }
        let mut given = cfg;
        given.extend(arm.clone());
        let target = Assignment::from([(outcome.to_string(), y.to_string())]);
        unconditional += d.conditional_prob(&target, &given)? * pt;
    }
    let mut xy = arm;
    xy.insert(outcome.to_string(), y.to_string());
    let rhs = (unconditional - d.prob(&xy)?) / p_x_prime;
    Ok((lhs - rhs).abs() <= tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceVerdict {
    pub direct_equal: bool,
    pub max_discrepancy: f64,
    pub theorem1: Theorem1Outcome,
    pub theorem2: Theorem2Outcome,
    pub theorem3: Theorem3Outcome,
    pub notes: Vec<String>,
}

/// Runs the direct check and all three sufficient conditions on the same
/// distribution.
pub fn decide(
    d: &DiscreteJointDistribution,
    q: &EquivalenceQuery,
    tol_direct: f64,
    tol_independence: f64,
) -> Result<EquivalenceVerdict> {
    q.validate()?;
    let (direct_equal, max_discrepancy) = weakly_equivalent_direct(d, q, tol_direct)?;
    let oracle = IndependenceOracle::Distribution(d, tol_independence);
    let theorem1 = check_theorem1(oracle, &q.treatment, &q.outcome, &q.t1, &q.t2)?;
    let theorem2 = check_theorem2(oracle, &q.treatment, &q.t1, &q.t2)?;
    let theorem3 = check_theorem3(oracle, &q.treatment, &q.outcome, &q.t1, &q.t2)?;
    let mut notes = Vec::new();
    if q.t1 == q.t2 {
        notes.push("the two sets are identical; equivalence is trivial".to_string());
    }
    if q.x == q.x_prime {
        notes.push("treated and baseline levels coincide; both sums reduce to pr(y|x)".to_string());
    }
    if theorem2.multiple_minimal || theorem3.multiple_minimal {
        notes.push(
            "multiple minimum-size Markov blankets exist; the lexicographically first was used"
                .to_string(),
        );
    }
    if direct_equal && !(theorem1.passes() || theorem2.passes || theorem3.passes) {
        notes.push(
            "the sets are weakly equivalent although none of the sufficient conditions hold"
                .to_string(),
        );
    }
    Ok(EquivalenceVerdict { direct_equal, max_discrepancy, theorem1, theorem2, theorem3, notes })
}
