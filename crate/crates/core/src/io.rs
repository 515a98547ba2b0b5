//! File formats: distribution and count CSVs, correlation-matrix CSV, and
//! flat key=value configuration files.

use std::collections::BTreeMap;

use crate::distribution::{ContingencyTable, DiscreteJointDistribution};
use crate::error::{MediationError, Result};
use crate::gaussian::CorrelationMatrix;

/// Variable columns followed by one value column; levels take the order of
/// first appearance, missing configurations count as zero.
fn parse_table(text: &str, value_col: &str) -> Result<(Vec<(String, Vec<String>)>, Vec<(Vec<String>, String)>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| MediationError::parse(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let Some((last, var_cols)) = headers.split_last() else {
        return Err(MediationError::parse(1, "empty header"));
    };
    if last != value_col || var_cols.is_empty() {
        return Err(MediationError::parse(
            1,
            format!("expected one or more variable columns followed by `{value_col}`"),
        ));
    }
    let mut vars: Vec<(String, Vec<String>)> =
        var_cols.iter().map(|n| (n.clone(), Vec::new())).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| MediationError::Parse { line: None, msg: e.to_string() })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(MediationError::Parse {
                line,
                msg: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let levels: Vec<String> = record.iter().take(var_cols.len()).map(str::to_string).collect();
        for (v, l) in vars.iter_mut().zip(&levels) {
            if !v.1.contains(l) {
                v.1.push(l.clone());
            }
        }
        rows.push((levels, record[var_cols.len()].to_string()));
    }
    Ok((vars, rows))
}

fn dense_indices<'a>(
    vars: &[(String, Vec<String>)],
    rows: &'a [(Vec<String>, String)],
) -> Result<Vec<(usize, &'a str)>> {
    let mut strides = vec![1usize; vars.len()];
    for i in (0..vars.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * vars[i + 1].1.len();
    }
    let mut seen = vec![false; strides[0] * vars[0].1.len()];
    let mut out = Vec::with_capacity(rows.len());
    for (levels, value) in rows {
        let mut idx = 0;
        for ((v, l), stride) in vars.iter().zip(levels).zip(&strides) {
            idx += v.1.iter().position(|x| x == l).expect("level recorded") * stride;
        }
        if seen[idx] {
            return Err(MediationError::Parse {
                line: None,
                msg: format!("duplicate configuration {levels:?}"),
            });
        }
        seen[idx] = true;
        out.push((idx, value.as_str()));
    }
    Ok(out)
}

pub fn parse_distribution_csv(text: &str) -> Result<DiscreteJointDistribution> {
    let (vars, rows) = parse_table(text, "prob")?;
    let size: usize = vars.iter().map(|(_, l)| l.len()).product();
    let mut table = vec![0.0; size];
    for (idx, value) in dense_indices(&vars, &rows)? {
        table[idx] = value.parse::<f64>().map_err(|_| MediationError::Parse {
            line: None,
            msg: format!("bad probability `{value}`"),
        })?;
    }
    DiscreteJointDistribution::new(vars, table)
}

/// First variable column is taken as the treatment.
pub fn parse_counts_csv(text: &str) -> Result<ContingencyTable> {
    let (vars, rows) = parse_table(text, "count")?;
    let size: usize = vars.iter().map(|(_, l)| l.len()).product();
    let mut counts = vec![0u64; size];
    for (idx, value) in dense_indices(&vars, &rows)? {
        counts[idx] = value.parse::<u64>().map_err(|_| MediationError::Parse {
            line: None,
            msg: format!("bad count `{value}`"),
        })?;
    }
    let treatment = vars[0].0.clone();
    ContingencyTable::new(vars, treatment, counts)
}

/// Square matrix with a leading name column mirroring the header names.
pub fn parse_correlation_csv(text: &str, n: usize) -> Result<CorrelationMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| MediationError::parse(1, e.to_string()))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(MediationError::parse(1, "expected name column plus variable columns"));
    }
    let mut matrix = Vec::new();
    let mut row_names = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| MediationError::Parse { line: None, msg: e.to_string() })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != headers.len() + 1 {
            return Err(MediationError::Parse { line, msg: "ragged correlation row".to_string() });
        }
        row_names.push(record[0].to_string());
        let row: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|_| MediationError::Parse {
                    line,
                    msg: format!("bad correlation `{v}`"),
                })
            })
            .collect::<Result<_>>()?;
        matrix.push(row);
    }
    if row_names != headers {
        return Err(MediationError::Parse {
            line: None,
            msg: "row names do not match header names".to_string(),
        });
    }
    CorrelationMatrix::new(headers, matrix, n)
}

/// Flat `key=value` lines; `#` comments and blank lines allowed.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(MediationError::parse(lineno + 1, "expected key=value"));
        };
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(MediationError::parse(lineno + 1, format!("duplicate key `{}`", k.trim())));
        }
    }
    Ok(out)
}

pub fn format_counts_csv(t: &ContingencyTable) -> String {
    let mut out = String::new();
    let vars: Vec<&str> = t.variables().map(|(n, _)| n).collect();
    out.push_str(&vars.join(","));
    out.push_str(",count\n");
    let domains: Vec<Vec<String>> = t.variables().map(|(_, l)| l.to_vec()).collect();
    let mut cfg = vec![0usize; vars.len()];
    loop {
        let a: crate::distribution::Assignment = vars
            .iter()
            .zip(&cfg)
            .map(|(&v, &l)| (v.to_string(), domains[vars.iter().position(|x| *x == v).unwrap()][l].clone()))
            .collect();
        let count = t.count(&a).expect("full configuration");
        let levels: Vec<&str> =
            cfg.iter().enumerate().map(|(v, &l)| domains[v][l].as_str()).collect();
        out.push_str(&levels.join(","));
        out.push_str(&format!(",{count}\n"));
        // mixed-radix increment, last variable fastest
        let mut v = vars.len();
        loop {
            if v == 0 {
                return out;
            }
            v -= 1;
            cfg[v] += 1;
            if cfg[v] < domains[v].len() {
                break;
            }
            cfg[v] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_round_trip_values() {
        let d = parse_distribution_csv(include_str!("../../../fixtures/table2.csv")).unwrap();
        assert_eq!(d.var_names(), ["X", "Y", "S", "Z"]);
        assert_eq!(d.levels("X").unwrap(), ["x1", "x0"]);
    }

    #[test]
    fn counts_round_trip() {
        let text = "X,Y,count\nx0,y0,3\nx0,y1,4\nx1,y0,5\nx1,y1,6\n";
        let t = parse_counts_csv(text).unwrap();
        assert_eq!(t.treatment(), "X");
        assert_eq!(t.total(), 18);
        assert_eq!(format_counts_csv(&t), text);
    }

    #[test]
    fn duplicate_row_rejected() {
        let text = "X,count\nx0,3\nx0,4\n";
        assert!(parse_counts_csv(text).is_err());
    }

    #[test]
    fn key_values_parse() {
        let kv = parse_key_values("# c\na=1\nb = two\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two");
        assert!(parse_key_values("nope").is_err());
    }
}
