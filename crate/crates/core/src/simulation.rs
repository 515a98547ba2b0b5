//! Generative model and Monte Carlo harness for the six two-mediator
//! benchmark scenarios: X -> W -> S -> Y with a direct X -> Y dependence,
//! all variables dichotomous.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::Serialize;

use crate::distribution::{multinomial, DiscreteJointDistribution};
use crate::effects::EffectKind;
use crate::error::{MediationError, Result};
use crate::variance::{var_nde, var_nie, VarianceInput};

const P_S1_W: [f64; 2] = [0.7, 0.2]; // pr(s1|w1), pr(s1|w2)
const P_W1_X: [f64; 2] = [0.8, 0.2]; // pr(w1|x1), pr(w1|x2)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeSetting {
    A1,
    A2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreatmentSetting {
    B1,
    B2,
    B3,
}

impl OutcomeSetting {
    /// pr(y1 | x, s) indexed [x][s] with x1/s1 first
    fn outcome_cpt(self) -> [[f64; 2]; 2] {
        match self {
            OutcomeSetting::A1 => [[0.7, 0.2], [0.6, 0.2]],
            OutcomeSetting::A2 => [[0.7, 0.2], [0.2, 0.6]],
        }
    }
}

impl TreatmentSetting {
    pub fn treated_fraction(self) -> f64 {
        match self {
            TreatmentSetting::B1 => 0.1,
            TreatmentSetting::B2 => 0.5,
            TreatmentSetting::B3 => 0.9,
        }
    }
}

impl fmt::Display for OutcomeSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeSetting::A1 => "A1",
            OutcomeSetting::A2 => "A2",
        })
    }
}

impl fmt::Display for TreatmentSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreatmentSetting::B1 => "B1",
            TreatmentSetting::B2 => "B2",
            TreatmentSetting::B3 => "B3",
        })
    }
}

/// Deterministic split of a total sample into treated/control arm sizes.
pub fn arm_split(total_n: u64, treated_fraction: f64) -> (u64, u64) {
    let n1 = (total_n as f64 * treated_fraction).round() as u64;
    (n1, total_n - n1)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub outcome_setting: OutcomeSetting,
    pub treatment_setting: TreatmentSetting,
    pub total_n: u64,
    pub replications: u64,
    pub seed: u64,
    /// fix the arm sizes at the deterministic split instead of drawing
    /// per-subject treatment assignments
    pub deterministic_arms: bool,
}

impl ScenarioConfig {
    pub fn new(
        outcome_setting: OutcomeSetting,
        treatment_setting: TreatmentSetting,
        total_n: u64,
        replications: u64,
        seed: u64,
    ) -> Self {
        ScenarioConfig {
            outcome_setting,
            treatment_setting,
            total_n,
            replications,
            seed,
            deterministic_arms: false,
        }
    }

    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            kv.get(k).ok_or_else(|| MediationError::Parse {
                line: None,
                msg: format!("missing key `{k}`"),
            })
        };
        let outcome = match get("outcome_setting")?.as_str() {
            "A1" => OutcomeSetting::A1,
            "A2" => OutcomeSetting::A2,
            other => {
                return Err(MediationError::Parse {
                    line: None,
                    msg: format!("outcome_setting must be A1 or A2, got `{other}`"),
                })
            }
        };
        let treatment = match get("treatment_setting")?.as_str() {
            "B1" => TreatmentSetting::B1,
            "B2" => TreatmentSetting::B2,
            "B3" => TreatmentSetting::B3,
            other => {
                return Err(MediationError::Parse {
                    line: None,
                    msg: format!("treatment_setting must be B1, B2 or B3, got `{other}`"),
                })
            }
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| MediationError::Parse {
                line: None,
                msg: format!("key `{k}` must be a nonnegative integer"),
            })
        };
        let mut cfg = ScenarioConfig::new(outcome, treatment, num("total_n")?, num("replications")?, num("seed")?);
        if let Some(v) = kv.get("deterministic_arms") {
            cfg.deterministic_arms = v == "true" || v == "1";
        }
        Ok(cfg)
    }

    /// Exact joint over (X, W, S, Y) under the scenario's factorization
    /// pr(x)·pr(w|x)·pr(s|w)·pr(y|x,s).
    pub fn population(&self) -> DiscreteJointDistribution {
        let px1 = self.treatment_setting.treated_fraction();
        let py = self.outcome_setting.outcome_cpt();
        let mut table = Vec::with_capacity(16);
        for (xi, px) in [(0usize, px1), (1, 1.0 - px1)] {
            for wi in 0..2 {
                let pw = if wi == 0 { P_W1_X[xi] } else { 1.0 - P_W1_X[xi] };
                for si in 0..2 {
                    let ps = if si == 0 { P_S1_W[wi] } else { 1.0 - P_S1_W[wi] };
                    let py1 = py[xi][si];
                    table.push(px * pw * ps * py1);
                    table.push(px * pw * ps * (1.0 - py1));
                }
            }
        }
        DiscreteJointDistribution::new(
            vec![
                ("X".into(), vec!["x1".into(), "x2".into()]),
                ("W".into(), vec!["w1".into(), "w2".into()]),
                ("S".into(), vec!["s1".into(), "s2".into()]),
                ("Y".into(), vec!["y1".into(), "y2".into()]),
            ],
            table,
        )
        .expect("scenario CPTs are a valid distribution")
    }
}

/// Which variables a plug-in estimator conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditioningSet {
    S,
    W,
    SW,
}

impl ConditioningSet {
    pub const ALL: [ConditioningSet; 3] = [ConditioningSet::S, ConditioningSet::W, ConditioningSet::SW];

    pub fn variables(self) -> Vec<&'static str> {
        match self {
            ConditioningSet::S => vec!["S"],
            ConditioningSet::W => vec!["W"],
            ConditioningSet::SW => vec!["S", "W"],
        }
    }

    fn stratum_count(self) -> usize {
        match self {
            ConditioningSet::S | ConditioningSet::W => 2,
            ConditioningSet::SW => 4,
        }
    }

    fn stratum_of(self, w: usize, s: usize) -> usize {
        match self {
            ConditioningSet::S => s,
            ConditioningSet::W => w,
            ConditioningSet::SW => w * 2 + s,
        }
    }
}

impl fmt::Display for ConditioningSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditioningSet::S => "S",
            ConditioningSet::W => "W",
            ConditioningSet::SW => "S,W",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub conditioning: ConditioningSet,
    pub effect: EffectKind,
    pub sqrt_avar: f64,
    pub sqrt_var: f64,
    /// empirical over analytic standard deviation
    pub ratio: f64,
    /// strata skipped across all replications because the treated arm had no
    /// observations there while the control arm did
    pub skipped_strata: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub config: ScenarioConfig,
    pub cells: Vec<CellSummary>,
    /// replications discarded because one arm drew zero subjects
    pub empty_arm_replications: u64,
    /// worst |NDE + NIE − TE| over replications whose strata were all populated
    pub max_decomposition_residual: f64,
    pub insufficient_replications: bool,
}

/// Per-arm cell probabilities over (w, s, y), 8 cells, row-major w, s, y.
fn arm_cell_probs(cfg: &ScenarioConfig) -> [[f64; 8]; 2] {
    let py = cfg.outcome_setting.outcome_cpt();
    let mut out = [[0.0; 8]; 2];
    for xi in 0..2 {
        for wi in 0..2 {
            let pw = if wi == 0 { P_W1_X[xi] } else { 1.0 - P_W1_X[xi] };
            for si in 0..2 {
                let ps = if si == 0 { P_S1_W[wi] } else { 1.0 - P_S1_W[wi] };
                out[xi][wi * 4 + si * 2] = pw * ps * py[xi][si];
                out[xi][wi * 4 + si * 2 + 1] = pw * ps * (1.0 - py[xi][si]);
            }
        }
    }
    out
}

/// Plug-in NDE/NIE/TE from one replication's counts (two arms of 8 cells).
/// Strata where the treated arm is empty but the control arm is not
/// contribute zero and are counted.
fn plug_in(counts: &[[u64; 8]; 2], set: ConditioningSet) -> (f64, f64, f64, u64) {
    let k = set.stratum_count();
    let mut n = [[0u64; 4]; 2];
    let mut ny = [[0u64; 4]; 2];
    for xi in 0..2 {
        for wi in 0..2 {
            for si in 0..2 {
                let u = set.stratum_of(wi, si);
                let c1 = counts[xi][wi * 4 + si * 2];
                let c2 = counts[xi][wi * 4 + si * 2 + 1];
                n[xi][u] += c1 + c2;
                ny[xi][u] += c1;
            }
        }
    }
    let n1: u64 = n[0][..k].iter().sum();
    let n2: u64 = n[1][..k].iter().sum();
    let (mut nde, mut nie, mut skipped) = (0.0, 0.0, 0u64);
    for u in 0..k {
        if n[0][u] == 0 {
            if n[1][u] > 0 {
                skipped += 1;
            }
            continue;
        }
        let py1 = ny[0][u] as f64 / n[0][u] as f64;
        let w1 = n[0][u] as f64 / n1 as f64;
        let w2 = n[1][u] as f64 / n2 as f64;
        nie += py1 * (w1 - w2);
        if n[1][u] > 0 {
            let py2 = ny[1][u] as f64 / n[1][u] as f64;
            nde += (py1 - py2) * w2;
        }
    }
    let te = ny[0][..k].iter().sum::<u64>() as f64 / n1 as f64
        - ny[1][..k].iter().sum::<u64>() as f64 / n2 as f64;
    (nde, nie, te, skipped)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationResult> {
    if cfg.replications == 0 {
        return Err(MediationError::InsufficientReplications(0));
    }
    let population = cfg.population();
    let px1 = cfg.treatment_setting.treated_fraction();
    let (a_n1, a_n2) = arm_split(cfg.total_n, px1);
    let probs = arm_cell_probs(cfg);

    // 3 conditioning sets × {NDE, NIE}
    let mut sums = [[0.0f64; 2]; 3];
    let mut sumsqs = [[0.0f64; 2]; 3];
    let mut skipped = [0u64; 3];
    let mut used = 0u64;
    let mut empty_arm = 0u64;
    let mut max_residual = 0.0f64;

    for rep in 0..cfg.replications {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep));
        let (n1, n2) = if cfg.deterministic_arms {
            (a_n1, a_n2)
        } else {
            let n1 = Binomial::new(cfg.total_n, px1)
                .expect("valid arm probability")
                .sample(&mut rng);
            (n1, cfg.total_n - n1)
        };
        if n1 == 0 || n2 == 0 {
            empty_arm += 1;
            continue;
        }
        let counts = [
            {
                let v = multinomial(&mut rng, n1, &probs[0]);
                let mut a = [0u64; 8];
                a.copy_from_slice(&v);
                a
            },
            {
                let v = multinomial(&mut rng, n2, &probs[1]);
                let mut a = [0u64; 8];
                a.copy_from_slice(&v);
                a
            },
        ];
        used += 1;
        for (i, set) in ConditioningSet::ALL.iter().enumerate() {
            let (nde, nie, te, sk) = plug_in(&counts, *set);
            sums[i][0] += nde;
            sumsqs[i][0] += nde * nde;
            sums[i][1] += nie;
            sumsqs[i][1] += nie * nie;
            skipped[i] += sk;
            if sk == 0 {
                max_residual = max_residual.max((nde + nie - te).abs());
            }
        }
    }

    let insufficient = used < 2;
    let mut cells = Vec::new();
    for (i, set) in ConditioningSet::ALL.iter().enumerate() {
        let u = set.variables().iter().map(|s| s.to_string()).collect();
        let input = VarianceInput {
            d: &population,
            treatment: "X".into(),
            x1: "x1".into(),
            x2: "x2".into(),
            outcome: "Y".into(),
            y: "y1".into(),
            u,
            n_x1: a_n1,
            n_x2: a_n2,
        };
        for (j, (effect, avar)) in [
            (EffectKind::Nde, var_nde(&input)?),
            (EffectKind::Nie, var_nie(&input)?),
        ]
        .into_iter()
        .enumerate()
        {
            let sqrt_avar = avar.sqrt();
            let sqrt_var = if insufficient {
                f64::NAN
            } else {
                let m = used as f64;
                ((sumsqs[i][j] - sums[i][j] * sums[i][j] / m) / (m - 1.0)).max(0.0).sqrt()
            };
            cells.push(CellSummary {
                conditioning: *set,
                effect,
                sqrt_avar,
                sqrt_var,
                ratio: sqrt_var / sqrt_avar,
                skipped_strata: skipped[i],
            });
        }
    }
    Ok(SimulationResult {
        config: cfg.clone(),
        cells,
        empty_arm_replications: empty_arm,
        max_decomposition_residual: max_residual,
        insufficient_replications: insufficient,
    })
}

/// All six scenarios at both benchmark sample sizes.
pub fn reproduce_table4(seed: u64, replications: u64) -> Result<Vec<SimulationResult>> {
    let mut out = Vec::new();
    for outcome in [OutcomeSetting::A1, OutcomeSetting::A2] {
        for treatment in [TreatmentSetting::B1, TreatmentSetting::B2, TreatmentSetting::B3] {
            for total_n in [1000u64, 2000] {
                let cfg = ScenarioConfig::new(outcome, treatment, total_n, replications, seed);
                out.push(run_scenario(&cfg)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub(crate) fn scenario_a1_b2() -> DiscreteJointDistribution {
        ScenarioConfig::new(OutcomeSetting::A1, TreatmentSetting::B2, 1000, 1, 0).population()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::assignment;
    use std::collections::BTreeSet;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn population_marginals() {
        let d = tests_support::scenario_a1_b2();
        // pr(s1|x1) = 0.8·0.7 + 0.2·0.2 = 0.6, pr(y1|x1) = 0.7·0.6 + 0.2·0.4
        let ps1 = d
            .conditional_prob(&assignment(&[("S", "s1")]), &assignment(&[("X", "x1")]))
            .unwrap();
        assert!((ps1 - 0.6).abs() < 1e-12);
        let py1 = d
            .conditional_prob(&assignment(&[("Y", "y1")]), &assignment(&[("X", "x1")]))
            .unwrap();
        assert!((py1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn population_independence_structure() {
        let d = tests_support::scenario_a1_b2();
        assert!(d.conditionally_independent(&set(&["X"]), &set(&["S"]), &set(&["W"]), 1e-12).unwrap());
        assert!(d
            .conditionally_independent(&set(&["Y"]), &set(&["W"]), &set(&["X", "S"]), 1e-12)
            .unwrap());
    }

    #[test]
    fn config_parses_from_key_values() {
        let kv = crate::io::parse_key_values(include_str!("../../../fixtures/scenario_a1b2.cfg")).unwrap();
        let cfg = ScenarioConfig::from_key_values(&kv).unwrap();
        assert_eq!(cfg.outcome_setting, OutcomeSetting::A1);
        assert_eq!(cfg.treatment_setting, TreatmentSetting::B2);
        assert_eq!((cfg.total_n, cfg.replications, cfg.seed), (1000, 10000, 20140731));
    }

    #[test]
    fn same_seed_reproduces_results() {
        let cfg = ScenarioConfig::new(OutcomeSetting::A1, TreatmentSetting::B2, 500, 50, 9);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!(x.sqrt_var.to_bits(), y.sqrt_var.to_bits());
        }
    }

    #[test]
    fn single_replication_flags_insufficient() {
        let cfg = ScenarioConfig::new(OutcomeSetting::A1, TreatmentSetting::B2, 500, 1, 9);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.insufficient_replications);
        assert!(r.cells[0].sqrt_var.is_nan());
        assert!(matches!(
            run_scenario(&ScenarioConfig::new(OutcomeSetting::A1, TreatmentSetting::B2, 500, 0, 9))
                .unwrap_err(),
            MediationError::InsufficientReplications(0)
        ));
    }

    #[test]
    fn decomposition_holds_per_replication() {
        let cfg = ScenarioConfig::new(OutcomeSetting::A2, TreatmentSetting::B1, 1000, 300, 4);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.max_decomposition_residual < 1e-12);
    }

    #[test]
    fn empirical_tracks_analytic_at_modest_replications() {
        let cfg = ScenarioConfig::new(OutcomeSetting::A1, TreatmentSetting::B2, 1000, 2000, 1);
        let r = run_scenario(&cfg).unwrap();
        for c in &r.cells {
            assert!(
                c.ratio > 0.9 && c.ratio < 1.1,
                "{} {:?}: ratio {}",
                c.conditioning,
                c.effect,
                c.ratio
            );
        }
    }
}
