//! DAG representation, d-separation queries, graphical Markov boundaries,
//! and a best-effort graphical audit of the identification assumptions.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{MediationError, Result};

/// Immutable directed acyclic graph over named variables.
#[derive(Debug, Clone)]
pub struct DirectedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

/// A (setA, setB, setC) d-separation query; `set_c` may be empty.
#[derive(Debug, Clone, Default)]
pub struct SeparationQuery {
    pub set_a: BTreeSet<String>,
    pub set_b: BTreeSet<String>,
    pub set_c: BTreeSet<String>,
}

impl SeparationQuery {
    pub fn new<S: Into<String>>(
        a: impl IntoIterator<Item = S>,
        b: impl IntoIterator<Item = S>,
        c: impl IntoIterator<Item = S>,
    ) -> Self {
        SeparationQuery {
            set_a: a.into_iter().map(Into::into).collect(),
            set_b: b.into_iter().map(Into::into).collect(),
            set_c: c.into_iter().map(Into::into).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.set_a.is_empty() || self.set_b.is_empty() {
            return Err(MediationError::EmptyQuerySet);
        }
        let disjoint = self.set_a.is_disjoint(&self.set_b)
            && self.set_a.is_disjoint(&self.set_c)
            && self.set_b.is_disjoint(&self.set_c);
        if !disjoint {
            return Err(MediationError::OverlappingSets);
        }
        Ok(())
    }
}

impl DirectedGraph {
    /// Builds a validated DAG. Node names are case-sensitive tokens without whitespace.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let names: Vec<String> = nodes.iter().map(|n| n.as_ref().to_string()).collect();
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(MediationError::Parse {
                    line: None,
                    msg: format!("duplicate node `{n}`"),
                });
            }
        }
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut edge_list = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let &ia = index
                .get(a)
                .ok_or_else(|| MediationError::UnknownEndpoint(a.to_string()))?;
            let &ib = index
                .get(b)
                .ok_or_else(|| MediationError::UnknownEndpoint(b.to_string()))?;
            if ia == ib {
                return Err(MediationError::SelfLoop(a.to_string()));
            }
            if edge_list.contains(&(ia, ib)) {
                return Err(MediationError::DuplicateEdge(a.to_string(), b.to_string()));
            }
            parents[ib].push(ia);
            children[ia].push(ib);
            edge_list.push((ia, ib));
        }
        let g = DirectedGraph { names, index, parents, children, edges: edge_list };
        g.topological_order().ok_or(MediationError::CycleDetected)?;
        Ok(g)
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.names[a].as_str(), self.names[b].as_str()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| MediationError::UnknownNode(name.to_string()))
    }

    fn ids(&self, set: &BTreeSet<String>) -> Result<Vec<usize>> {
        set.iter().map(|s| self.id(s)).collect()
    }

    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>> {
        Ok(self.parents[self.id(name)?]
            .iter()
            .map(|&p| self.names[p].as_str())
            .collect())
    }

    /// Kahn's algorithm; `None` when a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.names.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents[i].len()).collect();
        let mut queue: VecDeque<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    fn ancestors_mask(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.names.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        for &s in seeds {
            mask[s] = true;
        }
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !mask[p] {
                    mask[p] = true;
                    stack.push(p);
                }
            }
        }
        mask
    }

    /// Standard d-separation via reachability (Bayes-ball style), O(|V|+|E|) per query.
    pub fn d_separated(&self, query: &SeparationQuery) -> Result<bool> {
        query.validate()?;
        let a = self.ids(&query.set_a)?;
        let b = self.ids(&query.set_b)?;
        let c = self.ids(&query.set_c)?;
        let n = self.names.len();
        let mut in_c = vec![false; n];
        for &v in &c {
            in_c[v] = true;
        }
        // A collider is open when it or a descendant is conditioned on,
        // i.e. when the collider is an ancestor of C.
        let anc_c = self.ancestors_mask(&c);
        let mut in_b = vec![false; n];
        for &v in &b {
            in_b[v] = true;
        }

        // State: (node, direction of arrival). false = arrived via an edge
        // pointing into the node (downstream), true = via an edge out of it.
        let mut visited = vec![[false; 2]; n];
        let mut stack: Vec<(usize, bool)> = a.iter().map(|&v| (v, true)).collect();
        while let Some((v, from_child)) = stack.pop() {
            let dir = usize::from(from_child);
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if in_b[v] {
                return Ok(false);
            }
            if from_child {
                // Arrived against an arrow (or started here): if not conditioned on,
                // continue to parents and children.
                if !in_c[v] {
                    for &p in &self.parents[v] {
                        stack.push((p, true));
                    }
                    for &ch in &self.children[v] {
                        stack.push((ch, false));
                    }
                }
            } else {
                // Arrived along an arrow: pass through to children unless blocked,
                // bounce back to parents when the collider is open.
                if !in_c[v] {
                    for &ch in &self.children[v] {
                        stack.push((ch, false));
                    }
                }
                if anc_c[v] {
                    for &p in &self.parents[v] {
                        stack.push((p, true));
                    }
                }
            }
        }
        Ok(true)
    }

    /// Parents, children, and co-parents of `target` (the DAG Markov boundary).
    pub fn graphical_markov_boundary(&self, target: &str) -> Result<BTreeSet<String>> {
        let t = self.id(target)?;
        let mut out = BTreeSet::new();
        for &p in &self.parents[t] {
            out.insert(self.names[p].clone());
        }
        for &c in &self.children[t] {
            out.insert(self.names[c].clone());
            for &cp in &self.parents[c] {
                if cp != t {
                    out.insert(self.names[cp].clone());
                }
            }
        }
        Ok(out)
    }

    /// Copy of the graph with all edges out of `sources` removed.
    fn without_outgoing(&self, sources: &[usize]) -> DirectedGraph {
        let mut g = self.clone();
        let drop: Vec<bool> = {
            let mut m = vec![false; g.names.len()];
            for &s in sources {
                m[s] = true;
            }
            m
        };
        g.edges.retain(|&(a, _)| !drop[a]);
        for (i, ch) in g.children.iter_mut().enumerate() {
            if drop[i] {
                ch.clear();
            }
        }
        for pa in g.parents.iter_mut() {
            pa.retain(|&p| !drop[p]);
        }
        g
    }
}

/// Per-condition outcome of the graphical identification audit.
///
/// Conditions (a) and (b) are counterfactual independencies; this audit is a
/// graphical surrogate (back-door blocking for (a), parentlessness of the
/// treatment for (b)), which matches how the motivating graphs satisfy them
/// by construction but is not an exact translation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditReport {
    pub randomized_treatment: bool,
    pub covariates_sufficient: bool,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.randomized_treatment && self.covariates_sufficient
    }
}

/// Graphical audit of the identification assumptions for NDE/NIE estimation.
///
/// (b) requires the treatment to have no parents (randomization surrogate);
/// (a) requires `covariates ∪ {treatment}` to d-separate the mediators from
/// the outcome once edges out of the treatment and mediators are removed.
pub fn audit_identification_assumptions(
    g: &DirectedGraph,
    treatment: &str,
    outcome: &str,
    mediators: &BTreeSet<String>,
    covariates: &BTreeSet<String>,
) -> Result<AuditReport> {
    let x = g.id(treatment)?;
    g.id(outcome)?;
    let med_ids = g.ids(mediators)?;
    g.ids(covariates)?;
    for s in mediators {
        if covariates.contains(s) || s == treatment || s == outcome {
            return Err(MediationError::OverlappingSets);
        }
    }
    if covariates.contains(treatment) || covariates.contains(outcome) {
        return Err(MediationError::OverlappingSets);
    }

    let mut notes = Vec::new();
    let randomized = g.parents[x].is_empty();
    if !randomized {
        notes.push(format!(
            "treatment `{treatment}` has parents; the randomization condition (b) is not graphically supported"
        ));
    }

    let covariates_sufficient = if mediators.is_empty() {
        true
    } else {
        let mut sources = med_ids.clone();
        sources.push(x);
        let mutilated = g.without_outgoing(&sources);
        let mut given = covariates.clone();
        given.insert(treatment.to_string());
        let q = SeparationQuery {
            set_a: mediators.clone(),
            set_b: BTreeSet::from([outcome.to_string()]),
            set_c: given,
        };
        mutilated.d_separated(&q)?
    };
    if !covariates_sufficient {
        notes.push(
            "covariates do not block all back-door paths between the mediators and the outcome"
                .to_string(),
        );
    }
    notes.push(
        "graphical surrogate check; the counterfactual conditions themselves are not testable from the graph alone"
            .to_string(),
    );
    Ok(AuditReport { randomized_treatment: randomized, covariates_sufficient, notes })
}

/// Plain-text graph format: a `nodes ...` header line followed by one
/// `edge A B` line per edge; `#` starts a comment. Round-trips bit-exactly.
pub fn parse_graph(text: &str) -> Result<DirectedGraph> {
    let mut nodes: Option<Vec<String>> = None;
    let mut edges: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("nodes") => {
                if nodes.is_some() {
                    return Err(MediationError::parse(lineno + 1, "duplicate `nodes` header"));
                }
                nodes = Some(parts.map(str::to_string).collect());
            }
            Some("edge") => {
                let a = parts
                    .next()
                    .ok_or_else(|| MediationError::parse(lineno + 1, "edge needs two endpoints"))?;
                let b = parts
                    .next()
                    .ok_or_else(|| MediationError::parse(lineno + 1, "edge needs two endpoints"))?;
                if parts.next().is_some() {
                    return Err(MediationError::parse(lineno + 1, "trailing tokens after edge"));
                }
                edges.push((a.to_string(), b.to_string()));
            }
            Some(other) => {
                return Err(MediationError::parse(lineno + 1, format!("unknown directive `{other}`")));
            }
            None => unreachable!(),
        }
    }
    let nodes = nodes.ok_or_else(|| MediationError::Parse {
        line: None,
        msg: "missing `nodes` header line".to_string(),
    })?;
    DirectedGraph::new(&nodes, &edges)
}

pub fn format_graph(g: &DirectedGraph) -> String {
    let mut out = String::from("nodes");
    for n in g.node_names() {
        write!(out, " {n}").unwrap();
    }
    out.push('\n');
    for (a, b) in g.edges() {
        writeln!(out, "edge {a} {b}").unwrap();
    }
    out
}
