//! Exact discrete joint distributions: marginalization, conditioning,
//! conditional-independence measurement, contingency counts, and seeded
//! multinomial sampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_distr::{Binomial, Distribution as _};

use crate::error::{MediationError, Result};
use crate::graph::DirectedGraph;

/// Variable-name to level-name map for a (possibly partial) configuration.
pub type Assignment = BTreeMap<String, String>;

pub fn assignment(pairs: &[(&str, &str)]) -> Assignment {
    pairs
        .iter()
        .map(|&(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Mixed-radix shape shared by probability and count tables. The last
/// variable varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Shape {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl Shape {
    fn new(dims: Vec<usize>) -> Self {
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Shape { dims, strides }
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn decode(&self, idx: usize, out: &mut [usize]) {
        for (v, slot) in out.iter_mut().enumerate() {
            *slot = (idx / self.strides[v]) % self.dims[v];
        }
    }

    fn level_at(&self, idx: usize, var: usize) -> usize {
        (idx / self.strides[var]) % self.dims[var]
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteJointDistribution {
    vars: Vec<(String, Vec<String>)>,
    shape: Shape,
    table: Vec<f64>,
}

impl DiscreteJointDistribution {
    /// Builds a distribution from a dense table in row-major order over the
    /// given variables (last variable fastest). The table must be nonnegative
    /// with total mass 1; it is renormalized to kill float residue.
    pub fn new(vars: Vec<(String, Vec<String>)>, table: Vec<f64>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, levels) in &vars {
            if !seen.insert(name.clone()) {
                return Err(MediationError::Parse {
                    line: None,
                    msg: format!("duplicate variable `{name}`"),
                });
            }
            if levels.is_empty() {
                return Err(MediationError::Parse {
                    line: None,
                    msg: format!("variable `{name}` has no levels"),
                });
            }
            let mut lv = BTreeSet::new();
            for l in levels {
                if !lv.insert(l) {
                    return Err(MediationError::Parse {
                        line: None,
                        msg: format!("variable `{name}` has duplicate level `{l}`"),
                    });
                }
            }
        }
        let shape = Shape::new(vars.iter().map(|(_, l)| l.len()).collect());
        if table.len() != shape.len() {
            return Err(MediationError::Parse {
                line: None,
                msg: format!("table has {} cells, schema needs {}", table.len(), shape.len()),
            });
        }
        if table.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(MediationError::Parse {
                line: None,
                msg: "probabilities must be finite and nonnegative".to_string(),
            });
        }
        let mass: f64 = table.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(MediationError::Parse {
                line: None,
                msg: format!("total mass {mass} is not 1"),
            });
        }
        let table = table.into_iter().map(|p| p / mass).collect();
        Ok(DiscreteJointDistribution { vars, shape, table })
    }

    pub fn variables(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.vars.iter().map(|(n, l)| (n.as_str(), l.as_slice()))
    }

    pub fn var_names(&self) -> Vec<&str> {
        self.vars.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn levels(&self, var: &str) -> Result<&[String]> {
        Ok(&self.vars[self.var_index(var)?].1)
    }

    pub fn cell_count(&self) -> usize {
        self.table.len()
    }

    fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| MediationError::UnknownVariable(name.to_string()))
    }

    fn level_index(&self, var: usize, level: &str) -> Result<usize> {
        self.vars[var]
            .1
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| MediationError::UnknownLevel {
                variable: self.vars[var].0.clone(),
                level: level.to_string(),
            })
    }

    fn resolve(&self, a: &Assignment) -> Result<Vec<(usize, usize)>> {
        a.iter()
            .map(|(n, l)| {
                let v = self.var_index(n)?;
                Ok((v, self.level_index(v, l)?))
            })
            .collect()
    }

    /// Probability of a (possibly partial) configuration.
    pub fn prob(&self, a: &Assignment) -> Result<f64> {
        let fixed = self.resolve(a)?;
        let mut total = 0.0;
        for (idx, &p) in self.table.iter().enumerate() {
            if fixed.iter().all(|&(v, l)| self.shape.level_at(idx, v) == l) {
                total += p;
            }
        }
        Ok(total)
    }

    /// pr(target | given); errors when the conditioning event has zero mass.
    pub fn conditional_prob(&self, target: &Assignment, given: &Assignment) -> Result<f64> {
        let denom = self.prob(given)?;
        if denom <= 0.0 {
            return Err(MediationError::ZeroProbabilityCondition);
        }
        let mut both = given.clone();
        for (k, v) in target {
            if both.insert(k.clone(), v.clone()).is_some() {
                return Err(MediationError::OverlappingSets);
            }
        }
        Ok(self.prob(&both)? / denom)
    }

    /// Sums out every variable not in `keep`, preserving the original
    /// variable order. `keep = ∅` yields the scalar distribution.
    pub fn marginal(&self, keep: &BTreeSet<String>) -> Result<Self> {
        let keep_idx: Vec<usize> = {
            for k in keep {
                self.var_index(k)?;
            }
            (0..self.vars.len())
                .filter(|&v| keep.contains(&self.vars[v].0))
                .collect()
        };
        let vars: Vec<_> = keep_idx.iter().map(|&v| self.vars[v].clone()).collect();
        let shape = Shape::new(vars.iter().map(|(_, l)| l.len()).collect());
        let mut table = vec![0.0; shape.len()];
        for (idx, &p) in self.table.iter().enumerate() {
            let mut out = 0;
            for (pos, &v) in keep_idx.iter().enumerate() {
                out += self.shape.level_at(idx, v) * shape.strides[pos];
            }
            table[out] += p;
        }
        Ok(DiscreteJointDistribution { vars, shape, table })
    }

    /// Renormalized slice pr(target-variables | given).
    pub fn conditional(&self, target: &BTreeSet<String>, given: &Assignment) -> Result<Self> {
        for t in target {
            if given.contains_key(t) {
                return Err(MediationError::OverlappingSets);
            }
        }
        let fixed = self.resolve(given)?;
        let keep_idx: Vec<usize> = (0..self.vars.len())
            .filter(|&v| target.contains(&self.vars[v].0))
            .collect();
        for t in target {
            self.var_index(t)?;
        }
        let vars: Vec<_> = keep_idx.iter().map(|&v| self.vars[v].clone()).collect();
        let shape = Shape::new(vars.iter().map(|(_, l)| l.len()).collect());
        let mut table = vec![0.0; shape.len()];
        let mut mass = 0.0;
        for (idx, &p) in self.table.iter().enumerate() {
            if !fixed.iter().all(|&(v, l)| self.shape.level_at(idx, v) == l) {
                continue;
            }
            mass += p;
            let mut out = 0;
            for (pos, &v) in keep_idx.iter().enumerate() {
                out += self.shape.level_at(idx, v) * shape.strides[pos];
            }
            table[out] += p;
        }
        if mass <= 0.0 {
            return Err(MediationError::ZeroProbabilityCondition);
        }
        for p in &mut table {
            *p /= mass;
        }
        Ok(DiscreteJointDistribution { vars, shape, table })
    }

    /// Index of each of `sub`'s variables within `self`.
    fn projector(&self, sub: &Self) -> Vec<usize> {
        sub.vars
            .iter()
            .map(|(n, _)| self.var_index(n).expect("sub-distribution variable"))
            .collect()
    }

    fn project_index(&self, idx: usize, sub: &Self, proj: &[usize]) -> usize {
        proj.iter()
            .enumerate()
            .map(|(pos, &v)| self.shape.level_at(idx, v) * sub.shape.strides[pos])
            .sum()
    }

    /// max over configurations of |pr(a,b|c) − pr(a|c)·pr(b|c)|, skipping
    /// zero-mass c strata. Empty A or B yields 0.
    pub fn ci_max_deviation(
        &self,
        a: &BTreeSet<String>,
        b: &BTreeSet<String>,
        c: &BTreeSet<String>,
    ) -> Result<f64> {
        if !(a.is_disjoint(b) && a.is_disjoint(c) && b.is_disjoint(c)) {
            return Err(MediationError::OverlappingSets);
        }
        if a.is_empty() || b.is_empty() {
            for v in a.iter().chain(b).chain(c) {
                self.var_index(v)?;
            }
            return Ok(0.0);
        }
        let all: BTreeSet<String> = a.union(b).cloned().chain(c.iter().cloned()).collect();
        let m = self.marginal(&all)?;
        let ac: BTreeSet<String> = a.union(c).cloned().collect();
        let bc: BTreeSet<String> = b.union(c).cloned().collect();
        let mac = m.marginal(&ac)?;
        let mbc = m.marginal(&bc)?;
        let mc = m.marginal(c)?;
        let pac = m.projector(&mac);
        let pbc = m.projector(&mbc);
        let pc = m.projector(&mc);
        let mut worst: f64 = 0.0;
        for idx in 0..m.table.len() {
            let p_c = mc.table[m.project_index(idx, &mc, &pc)];
            if p_c <= 0.0 {
                continue;
            }
            let p_abc = m.table[idx] / p_c;
            let p_ac = mac.table[m.project_index(idx, &mac, &pac)] / p_c;
            let p_bc = mbc.table[m.project_index(idx, &mbc, &pbc)] / p_c;
            worst = worst.max((p_abc - p_ac * p_bc).abs());
        }
        Ok(worst)
    }

    pub fn conditionally_independent(
        &self,
        a: &BTreeSet<String>,
        b: &BTreeSet<String>,
        c: &BTreeSet<String>,
        tol: f64,
    ) -> Result<bool> {
        Ok(self.ci_max_deviation(a, b, c)? <= tol)
    }

    /// Every full configuration of `vars`, in mixed-radix order (last
    /// variable fastest, original variable order).
    pub fn configurations(&self, vars: &BTreeSet<String>) -> Result<Vec<Assignment>> {
        let idx: Vec<usize> = {
            for v in vars {
                self.var_index(v)?;
            }
            (0..self.vars.len()).filter(|&v| vars.contains(&self.vars[v].0)).collect()
        };
        let dims: Vec<usize> = idx.iter().map(|&v| self.vars[v].1.len()).collect();
        let total: usize = dims.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut cfg = vec![0usize; idx.len()];
        for _ in 0..total {
            out.push(
                idx.iter()
                    .zip(&cfg)
                    .map(|(&v, &l)| (self.vars[v].0.clone(), self.vars[v].1[l].clone()))
                    .collect(),
            );
            for pos in (0..cfg.len()).rev() {
                cfg[pos] += 1;
                if cfg[pos] < dims[pos] {
                    break;
                }
                cfg[pos] = 0;
            }
        }
        Ok(out)
    }

    /// Plug-in estimate from a contingency table: cell counts over the grand
    /// total, requiring every treatment arm to be populated.
    pub fn from_counts(t: &ContingencyTable) -> Result<Self> {
        let totals = t.arm_totals();
        let levels = t
            .vars
            .iter()
            .find(|(n, _)| *n == t.treatment)
            .map(|(_, l)| l.clone())
            .expect("validated at construction");
        if let Some(i) = totals.iter().position(|&n| n == 0) {
            return Err(MediationError::EmptyTreatmentArm(levels[i].clone()));
        }
        let grand: u64 = totals.iter().sum();
        let table = t.counts.iter().map(|&n| n as f64 / grand as f64).collect();
        DiscreteJointDistribution::new(t.vars.clone(), table)
    }

    /// Per-arm multinomial draw over the non-treatment cells; reproducible
    /// under `seed`. Every treatment level needs an arm size ≥ 1.
    pub fn sample_counts(
        &self,
        treatment: &str,
        arm_sizes: &BTreeMap<String, u64>,
        seed: u64,
    ) -> Result<ContingencyTable> {
        let x = self.var_index(treatment)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; self.table.len()];
        for (lvl, level_name) in self.vars[x].1.iter().enumerate() {
            let &n = arm_sizes.get(level_name).ok_or_else(|| MediationError::UnknownLevel {
                variable: treatment.to_string(),
                level: format!("{level_name} (missing arm size)"),
            })?;
            let cells: Vec<usize> = (0..self.table.len())
                .filter(|&i| self.shape.level_at(i, x) == lvl)
                .collect();
            let mass: f64 = cells.iter().map(|&i| self.table[i]).sum();
            if mass <= 0.0 {
                return Err(MediationError::ZeroProbabilityCondition);
            }
            let probs: Vec<f64> = cells.iter().map(|&i| self.table[i] / mass).collect();
            let draw = multinomial(&mut rng, n, &probs);
            for (&i, d) in cells.iter().zip(draw) {
                counts[i] = d;
            }
        }
        ContingencyTable::new(self.vars.clone(), treatment.to_string(), counts)
    }
}

/// Sequential conditional-binomial multinomial draw; exact for any cell order.
pub(crate) fn multinomial<R: Rng>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut rest: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || rest <= p {
            out[i] = remaining;
            break;
        }
        let q = (p / rest).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = draw;
        remaining -= draw;
        rest -= p;
    }
    out
}

/// Integer counts over the same schema as a distribution, with a designated
/// treatment variable whose per-level totals are the arm sizes.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    vars: Vec<(String, Vec<String>)>,
    treatment: String,
    shape: Shape,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(
        vars: Vec<(String, Vec<String>)>,
        treatment: String,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let shape = Shape::new(vars.iter().map(|(_, l)| l.len()).collect());
        if counts.len() != shape.len() {
            return Err(MediationError::Parse {
                line: None,
                msg: format!("count table has {} cells, schema needs {}", counts.len(), shape.len()),
            });
        }
        if !vars.iter().any(|(n, _)| *n == treatment) {
            return Err(MediationError::UnknownVariable(treatment));
        }
        Ok(ContingencyTable { vars, treatment, shape, counts })
    }

    pub fn treatment(&self) -> &str {
        &self.treatment
    }

    pub fn variables(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.vars.iter().map(|(n, l)| (n.as_str(), l.as_slice()))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count of a (possibly partial) configuration.
    pub fn count(&self, a: &Assignment) -> Result<u64> {
        let fixed: Vec<(usize, usize)> = a
            .iter()
            .map(|(n, l)| {
                let v = self
                    .vars
                    .iter()
                    .position(|(vn, _)| vn == n)
                    .ok_or_else(|| MediationError::UnknownVariable(n.clone()))?;
                let li = self.vars[v]
                    .1
                    .iter()
                    .position(|vl| vl == l)
                    .ok_or_else(|| MediationError::UnknownLevel {
                        variable: n.clone(),
                        level: l.clone(),
                    })?;
                Ok((v, li))
            })
            .collect::<Result<_>>()?;
        let mut total = 0;
        for (idx, &n) in self.counts.iter().enumerate() {
            if fixed.iter().all(|&(v, l)| self.shape.level_at(idx, v) == l) {
                total += n;
            }
        }
        Ok(total)
    }

    /// Arm totals n_x, in treatment level order.
    pub fn arm_totals(&self) -> Vec<u64> {
        let x = self
            .vars
            .iter()
            .position(|(n, _)| *n == self.treatment)
            .expect("validated at construction");
        let mut totals = vec![0u64; self.vars[x].1.len()];
        for (idx, &n) in self.counts.iter().enumerate() {
            totals[self.shape.level_at(idx, x)] += n;
        }
        totals
    }
}

/// Random distribution Markov to `g`: each node gets `levels` categories and
/// per-parent-configuration CPT rows drawn uniformly from the simplex.
pub fn sample_markov_to<R: Rng>(
    g: &DirectedGraph,
    levels: usize,
    rng: &mut R,
) -> Result<DiscreteJointDistribution> {
    let names = g.node_names().to_vec();
    let level_names: Vec<String> = (0..levels).map(|i| format!("l{i}")).collect();
    let vars: Vec<(String, Vec<String>)> =
        names.iter().map(|n| (n.clone(), level_names.clone())).collect();
    let shape = Shape::new(vec![levels; names.len()]);
    // CPT per node: parent-config index -> simplex row
    let parent_idx: Vec<Vec<usize>> = names
        .iter()
        .map(|n| {
            g.parents_of(n)
                .expect("node exists")
                .iter()
                .map(|p| names.iter().position(|m| m == p).unwrap())
                .collect()
        })
        .collect();
    let cpts: Vec<Vec<Vec<f64>>> = parent_idx
        .iter()
        .map(|ps| {
            let rows = levels.pow(ps.len() as u32);
            (0..rows).map(|_| simplex_row(rng, levels)).collect()
        })
        .collect();
    let mut table = vec![0.0; shape.len()];
    let mut cfg = vec![0usize; names.len()];
    for (idx, cell) in table.iter_mut().enumerate() {
        shape.decode(idx, &mut cfg);
        let mut p = 1.0;
        for v in 0..names.len() {
            let row = parent_idx[v].iter().fold(0, |acc, &pv| acc * levels + cfg[pv]);
            p *= cpts[v][row][cfg[v]];
        }
        *cell = p;
    }
    DiscreteJointDistribution::new(vars, table)
}

fn simplex_row<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
    let s: f64 = row.iter().sum();
    for x in &mut row {
        *x /= s;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_distribution_csv;
    use rand::SeedableRng;

    fn table2() -> DiscreteJointDistribution {
        parse_distribution_csv(include_str!("../../../fixtures/table2.csv")).unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn table2_treatment_marginal() {
        let d = table2();
        let m = d.marginal(&set(&["X"])).unwrap();
        assert!((m.prob(&assignment(&[("X", "x1")])).unwrap() - 0.703).abs() < 1e-12);
        assert!((m.prob(&assignment(&[("X", "x0")])).unwrap() - 0.297).abs() < 1e-12);
    }

    #[test]
    fn marginal_identity_and_scalar() {
        let d = table2();
        let all: BTreeSet<String> = d.var_names().iter().map(|s| s.to_string()).collect();
        let same = d.marginal(&all).unwrap();
        assert!((same.prob(&Assignment::new()).unwrap() - 1.0).abs() < 1e-12);
        let scalar = d.marginal(&BTreeSet::new()).unwrap();
        assert_eq!(scalar.cell_count(), 1);
        assert!((scalar.prob(&Assignment::new()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table2_conditional_slice() {
        let d = table2();
        let p = d
            .conditional_prob(
                &assignment(&[("Y", "y1")]),
                &assignment(&[("X", "x1"), ("S", "s0")]),
            )
            .unwrap();
        // (0.067 + 0.234) / (0.067 + 0.234 + 0.100 + 0.114)
        assert!((p - 0.301 / 0.515).abs() < 1e-12);
    }

    #[test]
    fn conditional_on_full_assignment_is_point_mass() {
        let d = table2();
        let c = d
            .conditional(
                &set(&["Y"]),
                &assignment(&[("X", "x1"), ("S", "s1"), ("Z", "z1"), ("Y", "y1")]),
            )
            .unwrap_err();
        // Y appears in both target and given
        assert!(matches!(c, MediationError::OverlappingSets));
        let c = d
            .conditional(&set(&["Y"]), &assignment(&[("X", "x1"), ("S", "s1"), ("Z", "z1")]))
            .unwrap();
        let p1 = c.prob(&assignment(&[("Y", "y1")])).unwrap();
        assert!((p1 - 0.038 / 0.042).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_condition_errors() {
        let d = DiscreteJointDistribution::new(
            vec![("A".into(), vec!["a0".into(), "a1".into()]), ("B".into(), vec!["b0".into(), "b1".into()])],
            vec![0.5, 0.0, 0.5, 0.0],
        )
        .unwrap();
        let err = d.conditional(&set(&["A"]), &assignment(&[("B", "b1")])).unwrap_err();
        assert!(matches!(err, MediationError::ZeroProbabilityCondition));
    }

    #[test]
    fn table2_independence_pattern() {
        let d = table2();
        // printed three-decimal rounding leaves small residue on X vs Z
        assert!(d.conditionally_independent(&set(&["X"]), &set(&["Z"]), &set(&[]), 5e-3).unwrap());
        assert!(!d.conditionally_independent(&set(&["X"]), &set(&["S"]), &set(&[]), 5e-3).unwrap());
        assert!(d
            .conditionally_independent(&set(&["Y"]), &set(&["X"]), &set(&["S", "Z"]), 0.02)
            .unwrap());
    }

    #[test]
    fn product_distribution_is_independent() {
        let d = DiscreteJointDistribution::new(
            vec![("A".into(), vec!["a0".into(), "a1".into()]), ("B".into(), vec!["b0".into(), "b1".into()])],
            vec![0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4],
        )
        .unwrap();
        assert!(d.conditionally_independent(&set(&["A"]), &set(&["B"]), &set(&[]), 1e-12).unwrap());
    }

    #[test]
    fn ci_matches_factorization_oracle() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let nv = rng.random_range(3..=5usize);
            let names: Vec<String> = (0..nv).map(|i| format!("V{i}")).collect();
            // construct pr(c) pr(a|c) pr(b|c): A=V0, B=V1, C = rest
            let ncfg = 1usize << (nv - 2);
            let mut table = vec![0.0; 1 << nv];
            let pc = simplex_row(&mut rng, ncfg);
            for (ci, &pcv) in pc.iter().enumerate() {
                let pa = simplex_row(&mut rng, 2);
                let pb = simplex_row(&mut rng, 2);
                for a in 0..2 {
                    for b in 0..2 {
                        let idx = (a << (nv - 1)) | (b << (nv - 2)) | ci;
                        table[idx] = pcv * pa[a] * pb[b];
                    }
                }
            }
            let vars: Vec<(String, Vec<String>)> = names
                .iter()
                .map(|n| (n.clone(), vec!["l0".to_string(), "l1".to_string()]))
                .collect();
            let d = DiscreteJointDistribution::new(vars, table).unwrap();
            let c: BTreeSet<String> = names[2..].iter().cloned().collect();
            assert!(d
                .conditionally_independent(&set(&["V0"]), &set(&["V1"]), &c, 1e-9)
                .unwrap());
        }
    }

    #[test]
    fn conditional_recombines_with_marginal() {
        let d = table2();
        let given = set(&["X", "Z"]);
        let m = d.marginal(&given).unwrap();
        for x in ["x1", "x0"] {
            for z in ["z1", "z0"] {
                let g = assignment(&[("X", x), ("Z", z)]);
                let c = d.conditional(&set(&["Y", "S"]), &g).unwrap();
                for y in ["y1", "y0"] {
                    for s in ["s1", "s0"] {
                        let full = assignment(&[("X", x), ("Z", z), ("Y", y), ("S", s)]);
                        let lhs = d.prob(&full).unwrap();
                        let rhs = c.prob(&assignment(&[("Y", y), ("S", s)])).unwrap()
                            * m.prob(&g).unwrap();
                        assert!((lhs - rhs).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn marginal_is_idempotent() {
        let d = table2();
        let keep = set(&["X", "S"]);
        let once = d.marginal(&keep).unwrap();
        let twice = once.marginal(&keep).unwrap();
        for x in ["x1", "x0"] {
            for s in ["s1", "s0"] {
                let a = assignment(&[("X", x), ("S", s)]);
                assert!((once.prob(&a).unwrap() - twice.prob(&a).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn from_counts_uniform() {
        let t = ContingencyTable::new(
            vec![("X".into(), vec!["x0".into(), "x1".into()]), ("Y".into(), vec!["y0".into(), "y1".into()])],
            "X".into(),
            vec![10, 10, 10, 10],
        )
        .unwrap();
        let d = DiscreteJointDistribution::from_counts(&t).unwrap();
        for x in ["x0", "x1"] {
            for y in ["y0", "y1"] {
                assert!((d.prob(&assignment(&[("X", x), ("Y", y)])).unwrap() - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn from_counts_empty_arm_errors() {
        let t = ContingencyTable::new(
            vec![("X".into(), vec!["x0".into(), "x1".into()]), ("Y".into(), vec!["y0".into(), "y1".into()])],
            "X".into(),
            vec![0, 0, 5, 7],
        )
        .unwrap();
        assert!(matches!(
            DiscreteJointDistribution::from_counts(&t).unwrap_err(),
            MediationError::EmptyTreatmentArm(_)
        ));
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let d = table2();
        let sizes = BTreeMap::from([("x1".to_string(), 500u64), ("x0".to_string(), 300u64)]);
        let t1 = d.sample_counts("X", &sizes, 42).unwrap();
        let t2 = d.sample_counts("X", &sizes, 42).unwrap();
        assert_eq!(crate::io::format_counts_csv(&t1), crate::io::format_counts_csv(&t2));
        assert_eq!(t1.arm_totals(), vec![500, 300]); // level order x1, x0 from fixture
    }

    #[test]
    fn point_mass_sampling_fills_one_cell() {
        let d = DiscreteJointDistribution::new(
            vec![("X".into(), vec!["x0".into()]), ("Y".into(), vec!["y0".into(), "y1".into()])],
            vec![0.0, 1.0],
        )
        .unwrap();
        let sizes = BTreeMap::from([("x0".to_string(), 99u64)]);
        let t = d.sample_counts("X", &sizes, 1).unwrap();
        assert_eq!(t.count(&assignment(&[("Y", "y1")])).unwrap(), 99);
    }

    #[test]
    fn large_sample_matches_population() {
        let d = table2();
        let n = 1_000_000u64;
        let sizes = BTreeMap::from([("x1".to_string(), n), ("x0".to_string(), n)]);
        let t = d.sample_counts("X", &sizes, 7).unwrap();
        let arms = [("x1", 0.703), ("x0", 0.297)];
        for (x, px) in arms {
            for y in ["y1", "y0"] {
                for s in ["s1", "s0"] {
                    for z in ["z1", "z0"] {
                        let cell = assignment(&[("X", x), ("Y", y), ("S", s), ("Z", z)]);
                        let p = d.prob(&cell).unwrap() / px;
                        let c = t.count(&cell).unwrap() as f64;
                        let sd = (n as f64 * p * (1.0 - p)).sqrt();
                        assert!(
                            (c - n as f64 * p).abs() <= 4.0 * sd.max(1.0),
                            "cell {cell:?}: {c} vs {}",
                            n as f64 * p
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn markov_sampled_distribution_obeys_graph() {
        let g = DirectedGraph::new(
            &["X", "S", "Y", "Z"],
            &[("X", "S"), ("X", "Y"), ("S", "Y"), ("Z", "S"), ("Z", "Y")],
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = sample_markov_to(&g, 2, &mut rng).unwrap();
        // empty set d-separates X from Z
        assert!(d.conditionally_independent(&set(&["X"]), &set(&["Z"]), &set(&[]), 1e-9).unwrap());
        // conditioning on the collider S breaks it
        assert!(!d.conditionally_independent(&set(&["X"]), &set(&["Z"]), &set(&["S"]), 1e-6).unwrap());
    }
}
