//! Asymptotic variances of the plug-in direct/indirect effect estimators
//! under two-arm multinomial sampling, and the variable-selection condition
//! checks that predict variance orderings between conditioning sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::distribution::{Assignment, DiscreteJointDistribution};
use crate::error::{MediationError, Result};

/// Population structure plus arm sizes for the variance formulas. The
/// outcome level is conventionally the "success" level y1.
#[derive(Debug, Clone)]
pub struct VarianceInput<'a> {
    pub d: &'a DiscreteJointDistribution,
    pub treatment: String,
    pub x1: String,
    pub x2: String,
    pub outcome: String,
    pub y: String,
    /// conditioning set U; must be non-empty
    pub u: BTreeSet<String>,
    pub n_x1: u64,
    pub n_x2: u64,
}

/// Delta-method approximation of E(n²_{x2,u} / n_{x1,u}) when the arm counts
/// in stratum u are binomial with success probabilities pr(u|x1), pr(u|x2).
pub fn delta_expectation_ratio(n_x1: u64, n_x2: u64, p_u_x1: f64, p_u_x2: f64) -> Result<f64> {
    if p_u_x1 <= 0.0 {
        return Err(MediationError::ZeroSupportStratum(format!(
            "pr(u|x1) = {p_u_x1}"
        )));
    }
    let (n1, n2) = (n_x1 as f64, n_x2 as f64);
    Ok(n2 * n2 / (n1 * p_u_x1) * (p_u_x2 * (1.0 - p_u_x2) / n2 + p_u_x2 * p_u_x2))
}

/// Per-stratum population quantities feeding the variance formulas.
struct Strata {
    p_u_x1: Vec<f64>,
    p_u_x2: Vec<f64>,
    p_y_x1u: Vec<f64>,
    p_y_x2u: Vec<f64>,
}

fn strata(v: &VarianceInput) -> Result<Strata> {
    if v.u.is_empty() {
        return Err(MediationError::EmptyQuerySet);
    }
    if v.n_x1 == 0 || v.n_x2 == 0 {
        return Err(MediationError::EmptyTreatmentArm(if v.n_x1 == 0 {
            v.x1.clone()
        } else {
            v.x2.clone()
        }));
    }
    let arm1 = Assignment::from([(v.treatment.clone(), v.x1.clone())]);
    let arm2 = Assignment::from([(v.treatment.clone(), v.x2.clone())]);
    let y = Assignment::from([(v.outcome.clone(), v.y.clone())]);
    let mut out = Strata { p_u_x1: vec![], p_u_x2: vec![], p_y_x1u: vec![], p_y_x2u: vec![] };
    for cfg in v.d.configurations(&v.u)? {
        let p1 = v.d.conditional_prob(&cfg, &arm1)?;
        let p2 = v.d.conditional_prob(&cfg, &arm2)?;
        if p2 <= 0.0 && p1 <= 0.0 {
            continue;
        }
        if p1 <= 0.0 {
            return Err(MediationError::ZeroSupportStratum(format!("{cfg:?}")));
        }
        let mut g1 = cfg.clone();
        g1.extend(arm1.clone());
        let mut g2 = cfg.clone();
        g2.extend(arm2.clone());
        out.p_u_x1.push(p1);
        out.p_u_x2.push(p2);
        out.p_y_x1u.push(v.d.conditional_prob(&y, &g1)?);
        out.p_y_x2u.push(if p2 > 0.0 { v.d.conditional_prob(&y, &g2)? } else { 0.0 });
    }
    Ok(out)
}

/// Asymptotic variance of the plug-in direct-effect estimator: a sampling
/// term in the baseline arm, a resampling term through the delta-method
/// expectation, and the binomial noise of both outcome estimates.
pub fn var_nde(v: &VarianceInput) -> Result<f64> {
    let s = strata(v)?;
    let n2 = v.n_x2 as f64;
    let nde: f64 = s
        .p_u_x2
        .iter()
        .zip(s.p_y_x1u.iter().zip(&s.p_y_x2u))
        .map(|(&w, (&a, &b))| (a - b) * w)
        .sum();
    let mut total = -nde * nde / n2;
    for i in 0..s.p_u_x2.len() {
        let (p1, p2) = (s.p_u_x1[i], s.p_u_x2[i]);
        let (a, b) = (s.p_y_x1u[i], s.p_y_x2u[i]);
        total += (a - b) * (a - b) * p2 / n2;
        total += a * (1.0 - a) / (n2 * n2) * delta_expectation_ratio(v.n_x1, v.n_x2, p1, p2)?;
        total += b * (1.0 - b) * p2 / n2;
    }
    Ok(total.max(0.0))
}

/// Asymptotic variance of the plug-in indirect-effect estimator.
pub fn var_nie(v: &VarianceInput) -> Result<f64> {
    let s = strata(v)?;
    let (n1, n2) = (v.n_x1 as f64, v.n_x2 as f64);
    let p_y_x1: f64 = s.p_y_x1u.iter().zip(&s.p_u_x1).map(|(&a, &p)| a * p).sum();
    let mean_w: f64 = s.p_y_x1u.iter().zip(&s.p_u_x2).map(|(&a, &p)| a * p).sum();
    let mut total = p_y_x1 * (1.0 - p_y_x1) / n1;
    let mut second_moment = 0.0;
    for i in 0..s.p_u_x2.len() {
        let (p1, p2) = (s.p_u_x1[i], s.p_u_x2[i]);
        let a = s.p_y_x1u[i];
        total += a * (1.0 - a) / (n2 * n2) * delta_expectation_ratio(v.n_x1, v.n_x2, p1, p2)?;
        total += -2.0 * a * (1.0 - a) * p2 / n1;
        second_moment += a * a * p2;
    }
    total += (second_moment - mean_w * mean_w) / n2;
    Ok(total.max(0.0))
}

/// Within-stratum covariance of the two arms' outcome probabilities:
/// Σ_u pr(y|x1,t,u)·pr(y|x2,t,u)·pr(u|t) − pr(y|x1,t)·pr(y|x2,t).
pub fn cov_t(
    d: &DiscreteJointDistribution,
    treatment: &str,
    x1: &str,
    x2: &str,
    outcome: &str,
    y: &str,
    t: &Assignment,
    u: &BTreeSet<String>,
) -> Result<f64> {
    if d.prob(t)? <= 0.0 {
        return Err(MediationError::ZeroProbabilityCondition);
    }
    let yv = Assignment::from([(outcome.to_string(), y.to_string())]);
    let mut g1 = t.clone();
    g1.insert(treatment.to_string(), x1.to_string());
    let mut g2 = t.clone();
    g2.insert(treatment.to_string(), x2.to_string());
    let mut cross = 0.0;
    for cfg in d.configurations(u)? {
        let mut tu = t.clone();
        tu.extend(cfg.clone());
        let p_u_t = d.conditional_prob(&cfg, t)?;
        if p_u_t <= 0.0 {
            continue;
        }
        let mut g1u = g1.clone();
        g1u.extend(cfg.clone());
        let mut g2u = g2.clone();
        g2u.extend(cfg);
        cross += d.conditional_prob(&yv, &g1u)? * d.conditional_prob(&yv, &g2u)? * p_u_t;
    }
    Ok(cross - d.conditional_prob(&yv, &g1)? * d.conditional_prob(&yv, &g2)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem4Report {
    /// Y ⫫ T | {X} ∪ U: expanding U by T cannot lower the asymptotic variance
    pub part_i_applicable: bool,
    /// X ⫫ U | T
    pub part_ii_independence: bool,
    /// per T-configuration: 1 + n_{x2}·pr(t|x2) ≤ n_{x1}·pr(t|x1)
    pub size_condition: BTreeMap<String, bool>,
    /// per T-configuration covariance between the arms' outcome rates
    pub cov: BTreeMap<String, f64>,
    pub part_ii_nde_applicable: bool,
    pub part_ii_nie_applicable: bool,
    pub predictions: Vec<String>,
}

fn key(a: &Assignment) -> String {
    a.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Evaluates which branch of the variance-ordering result applies to the
/// pair of conditioning sets U and T, and spells out the predicted
/// orderings. The weak-equivalence premises are the caller's to verify (see
/// the equivalence module).
#[allow(clippy::too_many_arguments)]
pub fn theorem4_advise(
    d: &DiscreteJointDistribution,
    treatment: &str,
    x1: &str,
    x2: &str,
    outcome: &str,
    y: &str,
    u: &BTreeSet<String>,
    t: &BTreeSet<String>,
    n_x1: u64,
    n_x2: u64,
    tol: f64,
) -> Result<Theorem4Report> {
    let x_set = BTreeSet::from([treatment.to_string()]);
    let y_set = BTreeSet::from([outcome.to_string()]);
    let xu: BTreeSet<String> = x_set.union(u).cloned().collect();
    let part_i = d.conditionally_independent(&y_set, t, &xu, tol)?;
    let part_ii_indep = d.conditionally_independent(&x_set, u, t, tol)?;

    let arm1 = Assignment::from([(treatment.to_string(), x1.to_string())]);
    let arm2 = Assignment::from([(treatment.to_string(), x2.to_string())]);
    let mut size_condition = BTreeMap::new();
    let mut cov = BTreeMap::new();
    for cfg in d.configurations(t)? {
        if d.prob(&cfg)? <= 0.0 {
            continue;
        }
        let p_t_x1 = d.conditional_prob(&cfg, &arm1)?;
        let p_t_x2 = d.conditional_prob(&cfg, &arm2)?;
        let ok = 1.0 + n_x2 as f64 * p_t_x2 <= n_x1 as f64 * p_t_x1;
        size_condition.insert(key(&cfg), ok);
        cov.insert(key(&cfg), cov_t(d, treatment, x1, x2, outcome, y, &cfg, u)?);
    }
    let size_ok = !size_condition.is_empty() && size_condition.values().all(|&b| b);
    let cov_nonpos = cov.values().all(|&c| c <= tol);
    let part_ii_nde = part_ii_indep && size_ok && cov_nonpos;
    let part_ii_nie = part_ii_indep && size_ok;

    let mut predictions = Vec::new();
    if part_i {
        predictions.push(
            "a.var(U) <= a.var(U union T) for both the direct and indirect effect".to_string(),
        );
    }
    if part_ii_nde {
        predictions.push("a.var(T) <= a.var(U union T) for the direct effect".to_string());
    }
    if part_ii_nie {
        predictions.push("a.var(T) <= a.var(U union T) for the indirect effect".to_string());
    }
    Ok(Theorem4Report {
        part_i_applicable: part_i,
        part_ii_independence: part_ii_indep,
        size_condition,
        cov,
        part_ii_nde_applicable: part_ii_nde,
        part_ii_nie_applicable: part_ii_nie,
        predictions,
    })
}
