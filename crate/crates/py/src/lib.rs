//! Python bindings: joint distributions, DAGs, effect estimation,
//! conditioning-set equivalence, estimator variances, and the built-in
//! simulation scenarios.

use std::collections::{BTreeMap, BTreeSet};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mediation_kit::distribution::{Assignment, DiscreteJointDistribution};
use mediation_kit::effects::{self, EffectQuery};
use mediation_kit::equivalence::{self, EquivalenceQuery};
use mediation_kit::graph::{parse_graph, DirectedGraph, SeparationQuery};
use mediation_kit::io::{parse_correlation_csv, parse_counts_csv, parse_distribution_csv};
use mediation_kit::simulation::{run_scenario, OutcomeSetting, ScenarioConfig, TreatmentSetting};
use mediation_kit::variance::{var_nde, var_nie, VarianceInput};
use mediation_kit::MediationError;

fn err(e: MediationError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Distribution")]
struct PyDistribution {
    inner: DiscreteJointDistribution,
}

#[pymethods]
impl PyDistribution {
    /// Parse a CSV with one column per variable plus a `prob` column.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PyDistribution { inner: parse_distribution_csv(text).map_err(err)? })
    }

    /// Parse a counts CSV (first column = treatment, last column = `count`)
    /// and normalize per treatment arm.
    #[staticmethod]
    fn from_counts_csv(text: &str) -> PyResult<Self> {
        let table = parse_counts_csv(text).map_err(err)?;
        Ok(PyDistribution { inner: DiscreteJointDistribution::from_counts(&table).map_err(err)? })
    }

    fn variables(&self) -> BTreeMap<String, Vec<String>> {
        self.inner.variables().map(|(n, l)| (n.to_string(), l.to_vec())).collect()
    }

    fn prob(&self, assignment: Assignment) -> PyResult<f64> {
        self.inner.prob(&assignment).map_err(err)
    }

    fn conditional_prob(&self, target: Assignment, given: Assignment) -> PyResult<f64> {
        self.inner.conditional_prob(&target, &given).map_err(err)
    }

    #[pyo3(signature = (a, b, c, tol = 1e-9))]
    fn conditionally_independent(
        &self,
        a: BTreeSet<String>,
        b: BTreeSet<String>,
        c: BTreeSet<String>,
        tol: f64,
    ) -> PyResult<bool> {
        self.inner.conditionally_independent(&a, &b, &c, tol).map_err(err)
    }

    /// Minimal subset of `relative` that shields `target` from the rest.
    #[pyo3(signature = (target, relative, tol = 1e-9))]
    fn markov_boundary(
        &self,
        target: &str,
        relative: BTreeSet<String>,
        tol: f64,
    ) -> PyResult<Vec<String>> {
        equivalence::markov_boundary_distributional(&self.inner, target, &relative, tol)
            .map(|b| b.into_iter().collect())
            .map_err(err)
    }

    /// Natural direct/indirect and total effect of `x` versus `xprime` on
    /// pr(outcome = y), standardized over the given mediators and covariates.
    #[pyo3(signature = (treatment, outcome, x, xprime, y, mediators, covariates = BTreeSet::new()))]
    #[allow(clippy::too_many_arguments)]
    fn estimate(
        &self,
        treatment: &str,
        outcome: &str,
        x: &str,
        xprime: &str,
        y: &str,
        mediators: BTreeSet<String>,
        covariates: BTreeSet<String>,
    ) -> PyResult<BTreeMap<String, f64>> {
        let q = EffectQuery::new(treatment, outcome, x, xprime, y, mediators, covariates)
            .map_err(err)?;
        let nde = effects::nde(&self.inner, &q).map_err(err)?.value;
        let nie = effects::nie(&self.inner, &q).map_err(err)?.value;
        let te = effects::te(&self.inner, treatment, x, xprime, outcome, y).map_err(err)?.value;
        Ok(BTreeMap::from([
            ("nde".to_string(), nde),
            ("nie".to_string(), nie),
            ("te".to_string(), te),
            ("decomposition_residual".to_string(), (nde + nie - te).abs()),
        ]))
    }

    /// Decide whether conditioning on t1 and on t2 yields the same
    /// standardized outcome distribution, with the three sufficient
    /// conditions reported alongside the direct comparison.
    #[pyo3(signature = (treatment, outcome, x, xprime, t1, t2, tol = 1e-3, ci_tol = 5e-3))]
    #[allow(clippy::too_many_arguments)]
    fn weakly_equivalent<'py>(
        &self,
        py: Python<'py>,
        treatment: &str,
        outcome: &str,
        x: &str,
        xprime: &str,
        t1: BTreeSet<String>,
        t2: BTreeSet<String>,
        tol: f64,
        ci_tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let q = EquivalenceQuery {
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
            x: x.to_string(),
            x_prime: xprime.to_string(),
            t1,
            t2,
        };
        let v = equivalence::decide(&self.inner, &q, tol, ci_tol).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("direct_equal", v.direct_equal)?;
        d.set_item("max_discrepancy", v.max_discrepancy)?;
        d.set_item("theorem1", v.theorem1.passes())?;
        d.set_item("theorem2", v.theorem2.passes)?;
        d.set_item("theorem3", v.theorem3.passes)?;
        d.set_item(
            "treatment_boundaries",
            (
                v.theorem2.boundary1.into_iter().collect::<Vec<_>>(),
                v.theorem2.boundary2.into_iter().collect::<Vec<_>>(),
            ),
        )?;
        d.set_item(
            "outcome_boundary",
            v.theorem3.outcome_boundary.into_iter().collect::<Vec<_>>(),
        )?;
        d.set_item("notes", v.notes)?;
        Ok(d)
    }

    /// Collapse the conditioning set to its propensity score variable `PS`.
    fn propensity_reduce(&self, treatment: &str, v: BTreeSet<String>) -> PyResult<Self> {
        Ok(PyDistribution {
            inner: effects::propensity_reduce(&self.inner, treatment, &v).map_err(err)?,
        })
    }
}

#[pyclass(name = "Graph")]
struct PyGraph {
    inner: DirectedGraph,
}

#[pymethods]
impl PyGraph {
    /// Parse a DAG file: a `nodes ...` header then `edge FROM TO` lines.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyGraph { inner: parse_graph(text).map_err(err)? })
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.node_names().to_vec()
    }

    fn d_separated(
        &self,
        a: BTreeSet<String>,
        b: BTreeSet<String>,
        c: BTreeSet<String>,
    ) -> PyResult<bool> {
        self.inner
            .d_separated(&SeparationQuery { set_a: a, set_b: b, set_c: c })
            .map_err(err)
    }

    fn markov_boundary(&self, target: &str) -> PyResult<Vec<String>> {
        self.inner
            .graphical_markov_boundary(target)
            .map(|b| b.into_iter().collect())
            .map_err(err)
    }
}

fn variance_input<'a>(
    d: &'a PyDistribution,
    treatment: &str,
    x1: &str,
    x2: &str,
    outcome: &str,
    y: &str,
    u: BTreeSet<String>,
    n_x1: u64,
    n_x2: u64,
) -> VarianceInput<'a> {
    VarianceInput {
        d: &d.inner,
        treatment: treatment.to_string(),
        x1: x1.to_string(),
        x2: x2.to_string(),
        outcome: outcome.to_string(),
        y: y.to_string(),
        u,
        n_x1,
        n_x2,
    }
}

/// Asymptotic variance of the plug-in natural direct effect estimator.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn variance_nde(
    d: &PyDistribution,
    treatment: &str,
    x1: &str,
    x2: &str,
    outcome: &str,
    y: &str,
    u: BTreeSet<String>,
    n_x1: u64,
    n_x2: u64,
) -> PyResult<f64> {
    var_nde(&variance_input(d, treatment, x1, x2, outcome, y, u, n_x1, n_x2)).map_err(err)
}

/// Asymptotic variance of the plug-in natural indirect effect estimator.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn variance_nie(
    d: &PyDistribution,
    treatment: &str,
    x1: &str,
    x2: &str,
    outcome: &str,
    y: &str,
    u: BTreeSet<String>,
    n_x1: u64,
    n_x2: u64,
) -> PyResult<f64> {
    var_nie(&variance_input(d, treatment, x1, x2, outcome, y, u, n_x1, n_x2)).map_err(err)
}

/// Monte Carlo study of one built-in scenario; returns one dict per
/// (conditioning set, effect) cell.
#[pyfunction]
#[pyo3(signature = (outcome_setting, treatment_setting, n = 1000, reps = 10_000, seed = 0))]
fn simulate<'py>(
    py: Python<'py>,
    outcome_setting: &str,
    treatment_setting: &str,
    n: u64,
    reps: u64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let outcome = match outcome_setting {
        "A1" => OutcomeSetting::A1,
        "A2" => OutcomeSetting::A2,
        other => return Err(PyValueError::new_err(format!("unknown outcome setting `{other}`"))),
    };
    let treatment = match treatment_setting {
        "B1" => TreatmentSetting::B1,
        "B2" => TreatmentSetting::B2,
        "B3" => TreatmentSetting::B3,
        other => {
            return Err(PyValueError::new_err(format!("unknown treatment setting `{other}`")))
        }
    };
    let result =
        run_scenario(&ScenarioConfig::new(outcome, treatment, n, reps, seed)).map_err(err)?;
    let mut rows = Vec::new();
    for c in &result.cells {
        let row = PyDict::new(py);
        row.set_item("conditioning", c.conditioning.to_string())?;
        row.set_item("effect", format!("{:?}", c.effect))?;
        row.set_item("sqrt_avar", c.sqrt_avar)?;
        row.set_item("sqrt_var", c.sqrt_var)?;
        row.set_item("ratio", c.ratio)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Standardized regression coefficient of `treatment` and its asymptotic sd,
/// from a correlation-matrix CSV and the sample size behind it.
#[pyfunction]
fn gaussian_regression(
    corr_csv: &str,
    n: usize,
    response: &str,
    treatment: &str,
    controls: BTreeSet<String>,
) -> PyResult<(f64, f64)> {
    let m = parse_correlation_csv(corr_csv, n).map_err(err)?;
    Ok((
        m.regression_coefficient(response, treatment, &controls).map_err(err)?,
        m.asymptotic_sd(response, treatment, &controls).map_err(err)?,
    ))
}

#[pymodule]
fn mediation_kit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(variance_nde, m)?)?;
    m.add_function(wrap_pyfunction!(variance_nie, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_regression, m)?)?;
    Ok(())
}
