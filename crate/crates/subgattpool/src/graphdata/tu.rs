//! Reader and writer for the TU Dortmund graph collection layout: a
//! directory `NAME/` holding `NAME_A.txt`, `NAME_graph_indicator.txt`,
//! `NAME_graph_labels.txt` and optional `NAME_node_labels.txt` /
//! `NAME_node_attributes.txt`, all 1-based.

use super::{degree_features, node_label_features, remap_labels, Graph, GraphDataset};
use crate::error::{EngineError, Result};
use crate::numcore::DenseMatrix;
use std::fs;
use std::path::Path;

/// A graph before label remapping and feature synthesis, as written to disk.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub adjacency: DenseMatrix,
    pub raw_label: i64,
}

/// Non-empty trimmed lines with their original 1-based line numbers, so
/// parse errors point at the actual file location.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| EngineError::Ingestion {
        detail: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_err(path: &Path, line: usize, detail: impl Into<String>) -> EngineError {
    EngineError::Parse {
        file: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

fn parse_ints(path: &Path) -> Result<Vec<i64>> {
    read_lines(path)?
        .iter()
        .map(|(lno, l)| {
            l.parse::<i64>()
                .map_err(|_| parse_err(path, *lno, format!("expected an integer, got {l:?}")))
        })
        .collect()
}

/// Load a dataset from `dir`; the directory's basename is the dataset name.
/// Node features prefer continuous attributes, then node-label one-hots,
/// then degree one-hots capped at `degree_cap` buckets.
pub fn load_tu_dataset(dir: &Path, degree_cap: usize) -> Result<GraphDataset> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| EngineError::Ingestion {
            detail: format!("cannot derive a dataset name from {}", dir.display()),
        })?
        .to_string();
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let indicator = parse_ints(&indicator_path)?;
    let num_nodes = indicator.len();
    let num_graphs = indicator.iter().max().copied().unwrap_or(0);
    if num_graphs <= 0 {
        return Err(EngineError::Ingestion {
            detail: format!("{}: no graphs", indicator_path.display()),
        });
    }
    let num_graphs = num_graphs as usize;
    for (i, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > num_graphs {
            return Err(parse_err(
                &indicator_path,
                i + 1,
                format!("graph id {g} out of range 1..={num_graphs}"),
            ));
        }
    }

    // Global node id (0-based) -> (graph, local index by order of appearance).
    let mut graph_of = vec![0usize; num_nodes];
    let mut local_of = vec![0usize; num_nodes];
    let mut sizes = vec![0usize; num_graphs];
    for (node, &g) in indicator.iter().enumerate() {
        let g = g as usize - 1;
        graph_of[node] = g;
        local_of[node] = sizes[g];
        sizes[g] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(EngineError::Ingestion {
            detail: format!("graph {} has no nodes", empty + 1),
        });
    }

    let mut adjacencies: Vec<DenseMatrix> =
        sizes.iter().map(|&s| DenseMatrix::zeros(s, s)).collect();
    let edges_path = file("A");
    for (lno, line) in read_lines(&edges_path)? {
        let mut parts = line.split(',').map(str::trim);
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(parse_err(
                    &edges_path,
                    lno,
                    format!("expected \"i, j\", got {line:?}"),
                ))
            }
        };
        let parse_node = |s: &str| -> Result<usize> {
            let v = s
                .parse::<i64>()
                .map_err(|_| parse_err(&edges_path, lno, format!("bad node id {s:?}")))?;
            if v < 1 || v as usize > num_nodes {
                return Err(parse_err(
                    &edges_path,
                    lno,
                    format!("node id {v} out of range 1..={num_nodes}"),
                ));
            }
            Ok(v as usize - 1)
        };
        let (u, v) = (parse_node(a)?, parse_node(b)?);
        if graph_of[u] != graph_of[v] {
            return Err(parse_err(
                &edges_path,
                lno + 1,
                format!(
                    "edge joins graph {} and graph {}",
                    graph_of[u] + 1,
                    graph_of[v] + 1
                ),
            ));
        }
        let adj = &mut adjacencies[graph_of[u]];
        adj.set(local_of[u], local_of[v], 1.0);
        adj.set(local_of[v], local_of[u], 1.0);
    }

    let labels_path = file("graph_labels");
    let raw_labels = parse_ints(&labels_path)?;
    if raw_labels.len() != num_graphs {
        return Err(EngineError::Ingestion {
            detail: format!(
                "{}: {} labels for {num_graphs} graphs",
                labels_path.display(),
                raw_labels.len()
            ),
        });
    }
    let (labels, num_classes) = remap_labels(&raw_labels);

    let attrs_path = file("node_attributes");
    let node_labels_path = file("node_labels");
    let (features, feature_dim) = if attrs_path.is_file() {
        let lines = read_lines(&attrs_path)?;
        if lines.len() != num_nodes {
            return Err(EngineError::Ingestion {
                detail: format!(
                    "{}: {} attribute rows for {num_nodes} nodes",
                    attrs_path.display(),
                    lines.len()
                ),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(num_nodes);
        let mut dim = None;
        for (lno, line) in &lines {
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(&attrs_path, *lno, format!("bad attribute {t:?}")))
                })
                .collect::<Result<_>>()?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(parse_err(
                        &attrs_path,
                        *lno,
                        format!("expected {d} attributes, got {}", row.len()),
                    ))
                }
                _ => {}
            }
            rows.push(row);
        }
        let dim = dim.unwrap_or(0).max(1);
        let mut feats: Vec<DenseMatrix> =
            sizes.iter().map(|&s| DenseMatrix::zeros(s, dim)).collect();
        for (node, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                feats[graph_of[node]].set(local_of[node], j, v);
            }
        }
        (feats, dim)
    } else if node_labels_path.is_file() {
        let raw = parse_ints(&node_labels_path)?;
        if raw.len() != num_nodes {
            return Err(EngineError::Ingestion {
                detail: format!(
                    "{}: {} node labels for {num_nodes} nodes",
                    node_labels_path.display(),
                    raw.len()
                ),
            });
        }
        let mut per_graph: Vec<Vec<i64>> = sizes.iter().map(|&s| vec![0; s]).collect();
        for (node, &l) in raw.iter().enumerate() {
            per_graph[graph_of[node]][local_of[node]] = l;
        }
        node_label_features(&per_graph)
    } else {
        degree_features(&adjacencies, degree_cap)
    };

    let graphs = adjacencies
        .into_iter()
        .zip(features)
        .zip(labels)
        .map(|((adjacency, features), label)| Graph {
            adjacency,
            features,
            label,
        })
        .collect();
    let dataset = GraphDataset {
        name,
        graphs,
        num_classes,
        feature_dim,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Write graphs to `dir` in the same layout `load_tu_dataset` reads. Only
/// the required three files are produced; features are left to the loader.
pub fn write_tu_dataset(dir: &Path, name: &str, graphs: &[RawGraph]) -> Result<()> {
    if graphs.is_empty() {
        return Err(EngineError::contract("write_tu", "no graphs to write"));
    }
    fs::create_dir_all(dir)?;
    let mut edges = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut offset = 0usize;
    for (gi, g) in graphs.iter().enumerate() {
        let n = g.adjacency.rows();
        for i in 0..n {
            indicator.push_str(&format!("{}\n", gi + 1));
            for j in 0..n {
                if g.adjacency.get(i, j) != 0.0 && i != j {
                    edges.push_str(&format!("{}, {}\n", offset + i + 1, offset + j + 1));
                }
            }
        }
        labels.push_str(&format!("{}\n", g.raw_label));
        offset += n;
    }
    fs::write(dir.join(format!("{name}_A.txt")), edges)?;
    fs::write(dir.join(format!("{name}_graph_indicator.txt")), indicator)?;
    fs::write(dir.join(format!("{name}_graph_labels.txt")), labels)?;
    Ok(())
}
