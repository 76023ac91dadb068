//! Citation-network ingest (`<id> <f1> … <fd> <label>` node lines and
//! `<id> <id>` edge lines, as in the Cora/Citeseer/PubMed releases).

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graphstore::Graph;
use crate::numkit::Matrix;

pub fn load_citation_graph(node_file: &Path, edge_file: &Path) -> Result<Graph> {
    let nodes = BufReader::new(File::open(node_file)?);
    let edges = BufReader::new(File::open(edge_file)?);
    parse_citation_graph(
        nodes,
        edges,
        &node_file.display().to_string(),
        &edge_file.display().to_string(),
    )
}

/// Parses node and edge streams. `node_name`/`edge_name` label errors.
pub fn parse_citation_graph(
    nodes: impl BufRead,
    edges: impl BufRead,
    node_name: &str,
    edge_name: &str,
) -> Result<Graph> {
    let ingest = |file: &str, line: usize, msg: String| Error::Ingest {
        file: file.to_string(),
        line,
        msg,
    };

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut dim: Option<usize> = None;

    for (k, line) in nodes.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 2 {
            return Err(ingest(node_name, lineno, "expected `id features… label`".into()));
        }
        let d = toks.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(ingest(node_name, lineno, format!("{d} features, expected {prev}")));
            }
            _ => {}
        }
        let feats = toks[1..toks.len() - 1]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ingest(node_name, lineno, format!("bad feature value `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if ids.insert(toks[0].to_string(), rows.len()).is_some() {
            return Err(ingest(node_name, lineno, format!("duplicate node id `{}`", toks[0])));
        }
        rows.push(feats);
        label_names.push(toks[toks.len() - 1].to_string());
    }

    let classes: Vec<&String> = label_names.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let class_of: HashMap<&String, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let labels: Vec<usize> = label_names.iter().map(|l| class_of[l]).collect();

    let mut edge_list = Vec::new();
    for (k, line) in edges.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 2 {
            return Err(ingest(edge_name, lineno, "expected `id id`".into()));
        }
        let lookup = |t: &str| {
            ids.get(t)
                .copied()
                .ok_or_else(|| ingest(edge_name, lineno, format!("unknown node id `{t}`")))
        };
        edge_list.push((lookup(toks[0])?, lookup(toks[1])?));
    }

    let n = rows.len();
    let d = dim.unwrap_or(0);
    let mut features = Matrix::from_vec(n, d, rows.into_iter().flatten().collect())?;
    l1_normalize_rows(&mut features);
    Graph::from_edges(n, &edge_list, features, labels, classes.len())
}

/// Scales each row to unit L1 norm; all-zero rows stay zero.
pub fn l1_normalize_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(nodes: &str, edges: &str) -> Result<Graph> {
        parse_citation_graph(nodes.as_bytes(), edges.as_bytes(), "nodes", "edges")
    }

    const NODES: &str = "a 1 0 1 x\nb 0 0 0 y\nc 2 2 0 x\n";

    #[test]
    fn three_node_fixture() {
        let g = parse(NODES, "a b\nb c\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_directed_entries(), 4);
        assert!(g.is_symmetric());
        assert_eq!(g.num_classes, 2);
        assert_eq!(g.labels, vec![0, 1, 0]);
        assert_eq!(g.features.row(0), &[0.5, 0.0, 0.5]);
        assert_eq!(g.features.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(g.features.row(2), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn duplicate_edges_stored_once() {
        let g = parse(NODES, "a b\nb a\na b\n").unwrap();
        assert_eq!(g.num_directed_entries(), 2);
    }

    #[test]
    fn unknown_id_reports_line() {
        match parse(NODES, "a b\nb zz\n") {
            Err(Error::Ingest { file, line, msg }) => {
                assert_eq!(file, "edges");
                assert_eq!(line, 2);
                assert!(msg.contains("zz"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("a 1 x\nb 1 2 y\n", ""), Err(Error::Ingest { line: 2, .. })));
        assert!(matches!(parse("a 1 q x\n", ""), Err(Error::Ingest { line: 1, .. })));
        assert!(matches!(parse(NODES, "a b c\n"), Err(Error::Ingest { line: 1, .. })));
    }
}
