//! Identification-formula evaluators for controlled and natural direct and
//! indirect effects, the total effect, and the propensity-score reduction of
//! a conditioning set.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::distribution::{Assignment, DiscreteJointDistribution};
use crate::error::{MediationError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EffectKind {
    Cde,
    Nde,
    Nie,
    Te,
}

/// How the natural-effect sums weight the mediator/covariate strata:
/// `ArmConditional` weights by pr(s,z|x'), `CovariateWeighted` by
/// pr(s|x',z)·pr(z). They coincide under a randomized treatment;
/// `ArmConditional` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Weighting {
    #[default]
    ArmConditional,
    CovariateWeighted,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectQuery {
    pub treatment: String,
    pub outcome: String,
    /// treated level
    pub x: String,
    /// baseline level
    pub x_prime: String,
    /// outcome level whose probability is contrasted
    pub y: String,
    pub mediators: BTreeSet<String>,
    pub covariates: BTreeSet<String>,
}

impl EffectQuery {
    pub fn new(
        treatment: impl Into<String>,
        outcome: impl Into<String>,
        x: impl Into<String>,
        x_prime: impl Into<String>,
        y: impl Into<String>,
        mediators: BTreeSet<String>,
        covariates: BTreeSet<String>,
    ) -> Result<Self> {
        let q = EffectQuery {
            treatment: treatment.into(),
            outcome: outcome.into(),
            x: x.into(),
            x_prime: x_prime.into(),
            y: y.into(),
            mediators,
            covariates,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x == self.x_prime {
            return Err(MediationError::Parse {
                line: None,
                msg: "treated and baseline levels must differ".to_string(),
            });
        }
        if !self.mediators.is_disjoint(&self.covariates)
            || [&self.mediators, &self.covariates]
                .iter()
                .any(|s| s.contains(&self.treatment) || s.contains(&self.outcome))
        {
            return Err(MediationError::OverlappingSets);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub value: f64,
    pub variance: Option<f64>,
    pub query: EffectQuery,
}

fn with(a: &Assignment, extra: &[(&str, &str)]) -> Assignment {
    let mut out = a.clone();
    for &(k, v) in extra {
        out.insert(k.to_string(), v.to_string());
    }
    out
}

/// pr(outcome=y | treatment=level, stratum); `None` when the conditioning
/// event has zero mass.
fn outcome_prob(
    d: &DiscreteJointDistribution,
    q: &EffectQuery,
    level: &str,
    stratum: &Assignment,
) -> Result<Option<f64>> {
    let given = with(stratum, &[(&q.treatment, level)]);
    let denom = d.prob(&given)?;
    if denom <= 0.0 {
        return Ok(None);
    }
    let num = d.prob(&with(&given, &[(&q.outcome, &q.y)]))?;
    Ok(Some(num / denom))
}

/// Σ over covariate strata of {pr(y|x,s,z) − pr(y|x′,s,z)} pr(z), with the
/// mediators pinned at `s`.
pub fn cde(d: &DiscreteJointDistribution, q: &EffectQuery, s: &Assignment) -> Result<EffectEstimate> {
    let med_vars: BTreeSet<String> = s.keys().cloned().collect();
    if med_vars != q.mediators {
        return Err(MediationError::Parse {
            line: None,
            msg: "mediator assignment must cover exactly the query's mediator set".to_string(),
        });
    }
    let mut value = 0.0;
    for z in d.configurations(&q.covariates)? {
        let pz = d.prob(&z)?;
        if pz <= 0.0 {
            continue;
        }
        let mut stratum = z.clone();
        stratum.extend(s.clone());
        let p_x = outcome_prob(d, q, &q.x, &stratum)?;
        let p_xp = outcome_prob(d, q, &q.x_prime, &stratum)?;
        match (p_x, p_xp) {
            (Some(a), Some(b)) => value += (a - b) * pz,
            _ => {
                return Err(MediationError::PositivityViolation(format!(
                    "pr(x, s, z) = 0 in stratum {stratum:?} with pr(z) > 0"
                )))
            }
        }
    }
    Ok(EffectEstimate { kind: EffectKind::Cde, value, variance: None, query: q.clone() })
}

/// Stratum weights for the natural-effect sums at a given treatment level.
fn stratum_weight(
    d: &DiscreteJointDistribution,
    q: &EffectQuery,
    weighting: Weighting,
    stratum: &Assignment,
    level: &str,
) -> Result<f64> {
    match weighting {
        // pr(s,z | level)
        Weighting::ArmConditional => {
            d.conditional_prob(stratum, &Assignment::from([(q.treatment.clone(), level.to_string())]))
        }
        // pr(s | level, z) · pr(z)
        Weighting::CovariateWeighted => {
            let (s, z): (Assignment, Assignment) =
                stratum.iter().map(|(k, v)| (k.clone(), v.clone())).partition(|(k, _)| q.mediators.contains(k));
            let pz = d.prob(&z)?;
            if pz <= 0.0 {
                return Ok(0.0);
            }
            let given = with(&z, &[(&q.treatment, level)]);
            if d.prob(&given)? <= 0.0 {
                return Err(MediationError::PositivityViolation(format!(
                    "pr(x, z) = 0 in covariate stratum {z:?} with pr(z) > 0"
                )));
            }
            Ok(d.conditional_prob(&s, &given)? * pz)
        }
    }
}

pub fn nde_with(
    d: &DiscreteJointDistribution,
    q: &EffectQuery,
    weighting: Weighting,
) -> Result<EffectEstimate> {
    q.validate()?;
    let strata: BTreeSet<String> = q.mediators.union(&q.covariates).cloned().collect();
    let mut value = 0.0;
    for stratum in d.configurations(&strata)? {
        let w = stratum_weight(d, q, weighting, &stratum, &q.x_prime)?;
        if w <= 0.0 {
            continue;
        }
        let p_x = outcome_prob(d, q, &q.x, &stratum)?;
        let p_xp = outcome_prob(d, q, &q.x_prime, &stratum)?;
        match (p_x, p_xp) {
            (Some(a), Some(b)) => value += (a - b) * w,
            _ => {
                return Err(MediationError::PositivityViolation(format!(
                    "outcome probability undefined in stratum {stratum:?} with positive weight"
                )))
            }
        }
    }
    Ok(EffectEstimate { kind: EffectKind::Nde, value, variance: None, query: q.clone() })
}

pub fn nde(d: &DiscreteJointDistribution, q: &EffectQuery) -> Result<EffectEstimate> {
    nde_with(d, q, Weighting::ArmConditional)
}

pub fn nie_with(
    d: &DiscreteJointDistribution,
    q: &EffectQuery,
    weighting: Weighting,
) -> Result<EffectEstimate> {
    q.validate()?;
    let strata: BTreeSet<String> = q.mediators.union(&q.covariates).cloned().collect();
    let mut value = 0.0;
    for stratum in d.configurations(&strata)? {
        let w_x = stratum_weight(d, q, weighting, &stratum, &q.x)?;
        let w_xp = stratum_weight(d, q, weighting, &stratum, &q.x_prime)?;
        if w_x <= 0.0 && w_xp <= 0.0 {
            continue;
        }
        match outcome_prob(d, q, &q.x, &stratum)? {
            Some(p) => value += p * (w_x - w_xp),
            None => {
                return Err(MediationError::PositivityViolation(format!(
                    "pr(y|x, s, z) undefined in stratum {stratum:?} with positive weight"
                )))
            }
        }
    }
    Ok(EffectEstimate { kind: EffectKind::Nie, value, variance: None, query: q.clone() })
}

pub fn nie(d: &DiscreteJointDistribution, q: &EffectQuery) -> Result<EffectEstimate> {
    nie_with(d, q, Weighting::ArmConditional)
}

/// pr(y|x) − pr(y|x′).
pub fn te(
    d: &DiscreteJointDistribution,
    treatment: &str,
    x: &str,
    x_prime: &str,
    outcome: &str,
    y: &str,
) -> Result<EffectEstimate> {
    let q = EffectQuery {
        treatment: treatment.to_string(),
        outcome: outcome.to_string(),
        x: x.to_string(),
        x_prime: x_prime.to_string(),
        y: y.to_string(),
        mediators: BTreeSet::new(),
        covariates: BTreeSet::new(),
    };
    let empty = Assignment::new();
    let p_x = outcome_prob(d, &q, x, &empty)?;
    let p_xp = outcome_prob(d, &q, x_prime, &empty)?;
    match (p_x, p_xp) {
        (Some(a), Some(b)) => {
            Ok(EffectEstimate { kind: EffectKind::Te, value: a - b, variance: None, query: q })
        }
        _ => Err(MediationError::PositivityViolation(
            "both treatment arms need positive probability".to_string(),
        )),
    }
}

/// Collapses a conditioning set V to its propensity score: a new variable
/// whose levels are the distinct values of pr(x₁|v), grouped after rounding
/// to 12 decimals. The output distribution ranges over the treatment, every
/// variable outside {X}∪V, and the score variable `PS`.
pub fn propensity_reduce(
    d: &DiscreteJointDistribution,
    treatment: &str,
    v: &BTreeSet<String>,
) -> Result<DiscreteJointDistribution> {
    let levels = d.levels(treatment)?.to_vec();
    if levels.len() != 2 {
        return Err(MediationError::NonBinaryTreatment(treatment.to_string()));
    }
    if v.contains(treatment) {
        return Err(MediationError::OverlappingSets);
    }
    let x1 = levels[0].clone();

    // score per V configuration, on positive-mass strata
    let mut scored: Vec<(Assignment, Option<f64>)> = Vec::new();
    for cfg in d.configurations(v)? {
        let pv = d.prob(&cfg)?;
        if pv <= 0.0 {
            scored.push((cfg, None));
            continue;
        }
        let s = d.conditional_prob(
            &Assignment::from([(treatment.to_string(), x1.clone())]),
            &cfg,
        )?;
        if s <= 0.0 || s >= 1.0 {
            return Err(MediationError::DegeneratePropensity);
        }
        scored.push((cfg, Some((s * 1e12).round() / 1e12)));
    }
    let mut ps_levels: Vec<f64> = scored.iter().filter_map(|(_, s)| *s).collect();
    ps_levels.sort_by(|a, b| a.total_cmp(b));
    ps_levels.dedup();
    let ps_names: Vec<String> = ps_levels.iter().map(|s| format!("{s:.12}")).collect();

    // keep the original variable order so configurations() and the dense
    // table layout below agree
    let rest_ordered: Vec<String> = d
        .var_names()
        .iter()
        .filter(|n| **n != treatment && !v.contains(**n))
        .map(|n| n.to_string())
        .collect();
    let rest: BTreeSet<String> = rest_ordered.iter().cloned().collect();
    let mut vars: Vec<(String, Vec<String>)> = Vec::new();
    vars.push((treatment.to_string(), levels.clone()));
    for r in &rest_ordered {
        vars.push((r.clone(), d.levels(r)?.to_vec()));
    }
    vars.push(("PS".to_string(), ps_names.clone()));

    let rest_cfgs = d.configurations(&rest)?;
    let mut table = Vec::with_capacity(levels.len() * rest_cfgs.len() * ps_levels.len());
    // row-major over (X, rest..., PS) matching `vars`
    for xl in &levels {
        for rc in &rest_cfgs {
            let mut per_ps = vec![0.0; ps_levels.len()];
            for (cfg, score) in &scored {
                let Some(s) = score else { continue };
                let k = ps_levels.iter().position(|p| p == s).unwrap();
                let mut full = with(cfg, &[(treatment, xl)]);
                full.extend(rc.clone());
                per_ps[k] += d.prob(&full)?;
            }
            table.extend(per_ps);
        }
    }
    DiscreteJointDistribution::new(vars, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::assignment;
    use crate::io::parse_distribution_csv;

    fn table2() -> DiscreteJointDistribution {
        parse_distribution_csv(include_str!("../../../fixtures/table2.csv")).unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn query(mediators: &[&str], covariates: &[&str]) -> EffectQuery {
        EffectQuery::new("X", "Y", "x1", "x0", "y1", set(mediators), set(covariates)).unwrap()
    }

    #[test]
    fn cde_on_table2() {
        let d = table2();
        let q = query(&["S"], &["Z"]);
        let e = cde(&d, &q, &assignment(&[("S", "s1")])).unwrap();
        // (0.038/0.042 - 0.024/0.025)·0.299 + (0.073/0.146 - 0.021/0.039)·0.701
        assert!((e.value - (-0.043477728937728905)).abs() < 1e-12, "{}", e.value);
    }

    #[test]
    fn cde_reduces_to_arm_difference_without_covariates() {
        let d = table2();
        let q = query(&["S"], &[]);
        let e = cde(&d, &q, &assignment(&[("S", "s0")])).unwrap();
        let p1 = d
            .conditional_prob(&assignment(&[("Y", "y1")]), &assignment(&[("X", "x1"), ("S", "s0")]))
            .unwrap();
        let p0 = d
            .conditional_prob(&assignment(&[("Y", "y1")]), &assignment(&[("X", "x0"), ("S", "s0")]))
            .unwrap();
        assert!((e.value - (p1 - p0)).abs() < 1e-15);
    }

    #[test]
    fn identical_arms_give_zero() {
        let d = table2();
        let mut q = query(&["S"], &["Z"]);
        q.x_prime = "x1".to_string(); // bypasses the constructor invariant on purpose
        let e = cde(&d, &q, &assignment(&[("S", "s1")])).unwrap();
        assert_eq!(e.value, 0.0);
        let e = nie_with(&d, &q, Weighting::ArmConditional);
        assert!(e.is_err()); // nie validates and rejects x = x′
    }

    fn chain_without_direct_edge() -> DiscreteJointDistribution {
        // X -> S -> Y with pr(y|x,s) = pr(y|s)
        let (px1, ps1x1, ps1x0, py1s1, py1s0) = (0.4, 0.8, 0.3, 0.9, 0.25);
        let mut table = Vec::new();
        for (px, ps1) in [(px1, ps1x1), (1.0 - px1, ps1x0)] {
            for (ps, py1) in [(ps1, py1s1), (1.0 - ps1, py1s0)] {
                table.push(px * ps * py1);
                table.push(px * ps * (1.0 - py1));
            }
        }
        DiscreteJointDistribution::new(
            vec![
                ("X".into(), vec!["x1".into(), "x0".into()]),
                ("S".into(), vec!["s1".into(), "s0".into()]),
                ("Y".into(), vec!["y1".into(), "y0".into()]),
            ],
            table,
        )
        .unwrap()
    }

    #[test]
    fn nde_vanishes_without_direct_edge() {
        let d = chain_without_direct_edge();
        let q = query(&["S"], &[]);
        assert!(nde(&d, &q).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn nie_vanishes_when_mediator_ignores_treatment() {
        // product pr(x)·pr(s)·pr(y|x,s)
        let (px1, ps1) = (0.35, 0.6);
        let py = [[0.9, 0.2], [0.5, 0.4]]; // [x][s]
        let mut table = Vec::new();
        for (xi, px) in [(0, px1), (1, 1.0 - px1)] {
            for (si, ps) in [(0, ps1), (1, 1.0 - ps1)] {
                table.push(px * ps * py[xi][si]);
                table.push(px * ps * (1.0 - py[xi][si]));
            }
        }
        let d = DiscreteJointDistribution::new(
            vec![
                ("X".into(), vec!["x1".into(), "x0".into()]),
                ("S".into(), vec!["s1".into(), "s0".into()]),
                ("Y".into(), vec!["y1".into(), "y0".into()]),
            ],
            table,
        )
        .unwrap();
        let q = query(&["S"], &[]);
        assert!(nie(&d, &q).unwrap().value.abs() < 1e-15);
        // and TE still decomposes
        let t = te(&d, "X", "x1", "x0", "Y", "y1").unwrap();
        let sum = nde(&d, &q).unwrap().value + nie(&d, &q).unwrap().value;
        assert!((t.value - sum).abs() < 1e-12);
    }

    #[test]
    fn te_on_table2_and_antisymmetry() {
        let d = table2();
        let t = te(&d, "X", "x1", "x0", "Y", "y1").unwrap();
        let want = 0.412 / 0.703 - 0.184 / 0.297;
        assert!((t.value - want).abs() < 1e-12);
        let back = te(&d, "X", "x0", "x1", "Y", "y1").unwrap();
        assert!((t.value + back.value).abs() < 1e-15);
    }

    #[test]
    fn decomposition_on_table2() {
        let d = table2();
        for q in [query(&["S"], &["Z"]), query(&["S", "Z"], &[]), query(&["Z"], &["S"])] {
            let sum = nde(&d, &q).unwrap().value + nie(&d, &q).unwrap().value;
            let t = te(&d, "X", "x1", "x0", "Y", "y1").unwrap().value;
            assert!((sum - t).abs() < 1e-12, "query {q:?}");
        }
    }

    #[test]
    fn nde_near_zero_when_outcome_nearly_ignores_treatment() {
        // Table 2 satisfies Y ⫫ X | {S,Z} only up to printed rounding
        let d = table2();
        let e = nde(&d, &query(&["S", "Z"], &[])).unwrap();
        assert!(e.value.abs() < 0.02, "{}", e.value);
    }

    #[test]
    fn two_mediator_chain_values() {
        // X -> W -> S -> Y plus X -> Y, fixed CPTs; mediators {S,W}
        let d = crate::simulation::tests_support::scenario_a1_b2();
        let q = EffectQuery::new("X", "Y", "x1", "x2", "y1", set(&["S", "W"]), set(&[])).unwrap();
        assert!((nde(&d, &q).unwrap().value - 0.03).abs() < 1e-12);
        assert!((nie(&d, &q).unwrap().value - 0.15).abs() < 1e-12);
        assert!((te(&d, "X", "x1", "x2", "Y", "y1").unwrap().value - 0.18).abs() < 1e-12);
    }

    #[test]
    fn weightings_agree_under_randomization() {
        let d = crate::simulation::tests_support::scenario_a1_b2();
        let q = EffectQuery::new("X", "Y", "x1", "x2", "y1", set(&["S", "W"]), set(&[])).unwrap();
        let a = nde_with(&d, &q, Weighting::ArmConditional).unwrap().value;
        let b = nde_with(&d, &q, Weighting::CovariateWeighted).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn propensity_reduction_on_table2() {
        let d = table2();
        let reduced = propensity_reduce(&d, "X", &set(&["S", "Z"])).unwrap();
        assert_eq!(reduced.levels("PS").unwrap().len(), 4);
        let q = query(&["S", "Z"], &[]);
        let mut qp = q.clone();
        qp.mediators = set(&["PS"]);
        for xp in ["x1", "x0"] {
            let mut q1 = q.clone();
            let mut q2 = qp.clone();
            if xp == "x1" {
                (q1.x, q1.x_prime) = ("x0".into(), "x1".into());
                (q2.x, q2.x_prime) = ("x0".into(), "x1".into());
            }
            assert!((nde(&d, &q1).unwrap().value - nde(&reduced, &q2).unwrap().value).abs() < 1e-12);
            assert!((nie(&d, &q1).unwrap().value - nie(&reduced, &q2).unwrap().value).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_score_collapses_to_one_level() {
        // X independent of V gives a constant score
        let (px1, pv1) = (0.3, 0.45);
        let table = vec![px1 * pv1, px1 * (1.0 - pv1), (1.0 - px1) * pv1, (1.0 - px1) * (1.0 - pv1)];
        let ind = DiscreteJointDistribution::new(
            vec![
                ("X".into(), vec!["x1".into(), "x0".into()]),
                ("V".into(), vec!["v1".into(), "v0".into()]),
            ],
            table,
        )
        .unwrap();
        let reduced = propensity_reduce(&ind, "X", &set(&["V"])).unwrap();
        assert_eq!(reduced.levels("PS").unwrap().len(), 1);
    }

    #[test]
    fn estimates_stay_in_range() {
        let d = table2();
        for q in [query(&["S"], &["Z"]), query(&["Z"], &[]), query(&["S", "Z"], &[])] {
            for v in [nde(&d, &q).unwrap().value, nie(&d, &q).unwrap().value] {
                assert!(v.abs() <= 1.0);
            }
        }
    }
}
