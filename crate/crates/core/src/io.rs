//! Dataset ingestion: the TU benchmark collection layout and a line-oriented
//! JSON interchange format. Both are described in `docs/formats.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Edge, Graph, GraphLabel, Split, Task};

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    edges: Vec<Vec<usize>>,
    colors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<GraphLabel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    task: Task,
    #[serde(default)]
    splits: Vec<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    meta: Header,
}

fn record_to_graph(rec: GraphRecord, file: &str, line: usize) -> Result<Graph> {
    let mut edges = Vec::with_capacity(rec.edges.len());
    for e in &rec.edges {
        let edge = match e.as_slice() {
            [u, v] => Edge::new(*u, *v),
            [u, v, r] => Edge::typed(*u, *v, *r),
            _ => {
                return Err(Error::format(
                    file,
                    line,
                    format!("edge must have 2 or 3 entries, got {}", e.len()),
                ))
            }
        };
        if edge.u >= rec.n || edge.v >= rec.n {
            return Err(Error::format(
                file,
                line,
                format!("edge [{}, {}] out of range for n={}", edge.u, edge.v, rec.n),
            ));
        }
        edges.push(edge);
    }
    let graph = Graph {
        node_count: rec.n,
        edges,
        colors: rec.colors,
        features: rec.features,
        label: rec.label,
    };
    let violations = graph.validate();
    if !violations.is_empty() {
        return Err(Error::format(file, line, violations.join("; ")));
    }
    Ok(graph)
}

fn graph_to_record(g: &Graph) -> GraphRecord {
    GraphRecord {
        n: g.node_count,
        edges: g
            .edges
            .iter()
            .map(|e| match e.relation {
                Some(r) => vec![e.u, e.v, r],
                None => vec![e.u, e.v],
            })
            .collect(),
        colors: g.colors.clone(),
        features: g.features.clone(),
        label: g.label.clone(),
    }
}

/// Reads a JSONL dataset. An optional first line `{"meta": {...}}` carries
/// the task, splits and provenance; without it the task is inferred.
pub fn parse_jsonl<R: BufRead>(reader: R, name: &str) -> Result<Dataset> {
    let mut graphs = Vec::new();
    let mut header: Option<Header> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::format(name, lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if graphs.is_empty() && header.is_none() && trimmed.starts_with("{\"meta\"") {
            let h: HeaderLine = serde_json::from_str(trimmed)
                .map_err(|e| Error::format(name, lineno, e.to_string()))?;
            header = Some(h.meta);
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(trimmed)
            .map_err(|e| Error::format(name, lineno, e.to_string()))?;
        graphs.push(record_to_graph(rec, name, lineno)?);
    }
    let dataset = match header {
        Some(h) => Dataset {
            task: h.task,
            splits: h.splits,
            provenance: h.provenance,
            graphs,
        },
        None => {
            let task = Dataset::infer_task(&graphs);
            Dataset::new(graphs, task)
        }
    };
    for split in &dataset.splits {
        split.check(dataset.graphs.len())?;
    }
    Ok(dataset)
}

pub fn emit_jsonl<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let header = HeaderLine {
        meta: Header {
            task: dataset.task,
            splits: dataset.splits.clone(),
            provenance: dataset.provenance.clone(),
        },
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for g in &dataset.graphs {
        serde_json::to_writer(&mut out, &graph_to_record(g))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn write_jsonl_file(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    emit_jsonl(dataset, std::io::BufWriter::new(file)).map_err(io_err)
}

fn tu_prefix(dir: &Path) -> Result<String> {
    if let Some(name) = dir.file_name().and_then(|n| n.to_str()) {
        if dir.join(format!("{name}_A.txt")).exists() {
            return Ok(name.to_string());
        }
    }
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries.flatten() {
        if let Some(fname) = entry.file_name().to_str() {
            if let Some(prefix) = fname.strip_suffix("_A.txt") {
                return Ok(prefix.to_string());
            }
        }
    }
    Err(Error::MissingFile(dir.join("DS_A.txt")))
}

/// Reads a whole TU file as trimmed non-empty `(line number, text)` rows.
fn read_rows(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let t = line.trim();
        if !t.is_empty() {
            rows.push((idx + 1, t.to_string()));
        }
    }
    Ok(rows)
}

fn parse_int(path: &Path, line: usize, text: &str) -> Result<i64> {
    text.trim().parse::<i64>().map_err(|_| {
        Error::format(
            path.display().to_string(),
            line,
            format!("expected integer, got {text:?}"),
        )
    })
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.exists().then_some(path)
}

/// Reads a TU-format directory (`DS_A.txt`, `DS_graph_indicator.txt`,
/// `DS_graph_labels.txt`, optional `DS_node_labels.txt` and
/// `DS_edge_labels.txt`).
///
/// Node ids are remapped to contiguous 0-based ids per graph, both
/// directions of an edge collapse to one undirected edge, and node / edge
/// labels are remapped to dense ids in sorted order of the raw values.
pub fn parse_tu_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let ds = tu_prefix(dir)?;
    let file = |suffix: &str| dir.join(format!("{ds}_{suffix}.txt"));
    let a_path = file("A");
    let ind_path = file("graph_indicator");
    let lab_path = file("graph_labels");
    for p in [&a_path, &ind_path, &lab_path] {
        if !p.exists() {
            return Err(Error::MissingFile(p.clone()));
        }
    }

    let indicator_rows = read_rows(&ind_path)?;
    let mut node_graph = Vec::with_capacity(indicator_rows.len());
    for (line, text) in &indicator_rows {
        let gid = parse_int(&ind_path, *line, text)?;
        if gid < 1 {
            return Err(Error::format(
                ind_path.display().to_string(),
                *line,
                "graph ids are 1-indexed",
            ));
        }
        node_graph.push(gid as usize - 1);
    }
    let label_rows = read_rows(&lab_path)?;
    let graph_count = label_rows.len();
    if let Some(&max) = node_graph.iter().max() {
        if max >= graph_count {
            return Err(Error::format(
                ind_path.display().to_string(),
                node_graph.iter().position(|&g| g == max).unwrap_or(0) + 1,
                format!("graph id {} has no label", max + 1),
            ));
        }
    }

    // Per-graph local ids, in order of appearance.
    let mut sizes = vec![0usize; graph_count];
    let mut local = Vec::with_capacity(node_graph.len());
    for &g in &node_graph {
        local.push(sizes[g]);
        sizes[g] += 1;
    }

    let node_labels = match optional(file("node_labels")) {
        Some(p) => {
            let rows = read_rows(&p)?;
            if rows.len() != node_graph.len() {
                return Err(Error::format(
                    p.display().to_string(),
                    rows.last().map_or(0, |r| r.0),
                    format!("{} node labels for {} nodes", rows.len(), node_graph.len()),
                ));
            }
            let raw = rows
                .iter()
                .map(|(l, t)| parse_int(&p, *l, t.split(',').next().unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            Some(densify(&raw))
        }
        None => None,
    };

    let a_rows = read_rows(&a_path)?;
    let edge_labels = match optional(file("edge_labels")) {
        Some(p) => {
            let rows = read_rows(&p)?;
            if rows.len() != a_rows.len() {
                return Err(Error::format(
                    p.display().to_string(),
                    rows.last().map_or(0, |r| r.0),
                    format!("{} edge labels for {} edges", rows.len(), a_rows.len()),
                ));
            }
            let raw = rows
                .iter()
                .map(|(l, t)| parse_int(&p, *l, t.split(',').next().unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            Some(densify(&raw))
        }
        None => None,
    };

    let mut edge_sets: Vec<BTreeMap<(usize, usize), Option<usize>>> =
        vec![BTreeMap::new(); graph_count];
    let a_name = a_path.display().to_string();
    for (row, (line, text)) in a_rows.iter().enumerate() {
        let mut parts = text.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(&a_name, *line, format!("expected `u, v`, got {text:?}")));
        };
        let a = parse_int(&a_path, *line, a)?;
        let b = parse_int(&a_path, *line, b)?;
        let lookup = |id: i64| -> Result<usize> {
            if id < 1 || id as usize > node_graph.len() {
                Err(Error::format(&a_name, *line, format!("unknown node {id}")))
            } else {
                Ok(id as usize - 1)
            }
        };
        let (a, b) = (lookup(a)?, lookup(b)?);
        if node_graph[a] != node_graph[b] {
            return Err(Error::format(
                &a_name,
                *line,
                format!("edge joins nodes of graphs {} and {}", node_graph[a] + 1, node_graph[b] + 1),
            ));
        }
        if a == b {
            continue;
        }
        let (la, lb) = (local[a], local[b]);
        let key = (la.min(lb), la.max(lb));
        let rel = edge_labels.as_ref().map(|l| l[row]);
        edge_sets[node_graph[a]].entry(key).or_insert(rel);
    }

    let mut graphs = Vec::with_capacity(graph_count);
    let mut colors: Vec<Vec<usize>> = sizes.iter().map(|&s| vec![0; s]).collect();
    if let Some(labels) = &node_labels {
        for (i, &g) in node_graph.iter().enumerate() {
            colors[g][local[i]] = labels[i];
        }
    }
    let lab_name = lab_path.display().to_string();
    for (g, (line, text)) in label_rows.iter().enumerate() {
        let label = text
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::format(&lab_name, *line, format!("expected integer label, got {text:?}")))?;
        let edges = edge_sets[g]
            .iter()
            .map(|(&(u, v), &rel)| Edge { u, v, relation: rel })
            .collect();
        graphs.push(Graph {
            node_count: sizes[g],
            edges,
            colors: std::mem::take(&mut colors[g]),
            features: None,
            label: Some(GraphLabel::Class(label)),
        });
    }

    // Remap class labels to 0..c, keeping their sorted order.
    let distinct: BTreeSet<i64> = graphs.iter().filter_map(|g| g.label.as_ref()?.class()).collect();
    let index: BTreeMap<i64, i64> = distinct
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as i64))
        .collect();
    let needs_remap = distinct.iter().enumerate().any(|(i, &c)| c != i as i64);
    if needs_remap {
        for g in &mut graphs {
            if let Some(GraphLabel::Class(c)) = &mut g.label {
                *c = index[c];
            }
        }
    }
    let task = if distinct.len() <= 2 {
        Task::BinaryClass
    } else {
        Task::MultiClass {
            classes: distinct.len(),
        }
    };
    let mut dataset = Dataset::new(graphs, task);
    dataset.provenance = Some(serde_json::json!({ "tu_name": ds, "raw_classes": distinct }));
    Ok(dataset)
}

fn densify(raw: &[i64]) -> Vec<usize> {
    let distinct: BTreeSet<i64> = raw.iter().copied().collect();
    let index: BTreeMap<i64, usize> = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    raw.iter().map(|v| index[v]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tu(dir: &Path, name: &str, files: &[(&str, &str)]) -> PathBuf {
        let root = dir.join(name);
        std::fs::create_dir_all(&root).unwrap();
        for (suffix, body) in files {
            std::fs::write(root.join(format!("{name}_{suffix}.txt")), body).unwrap();
        }
        root
    }

    #[test]
    fn symmetric_pair_collapses() {
        let tmp = tempfile::tempdir().unwrap();
        let root = write_tu(
            tmp.path(),
            "DS",
            &[
                ("A", "1, 2\n2, 1\n"),
                ("graph_indicator", "1\n1\n"),
                ("graph_labels", "1\n"),
            ],
        );
        let ds = parse_tu_dataset(&root).unwrap();
        assert_eq!(ds.graphs.len(), 1);
        assert_eq!(ds.graphs[0].node_count, 2);
        assert_eq!(ds.graphs[0].edge_count(), 1);
    }

    #[test]
    fn indicator_splits_graphs() {
        let tmp = tempfile::tempdir().unwrap();
        let root = write_tu(
            tmp.path(),
            "DS",
            &[
                ("A", "1, 2\n2, 1\n"),
                ("graph_indicator", "1\n1\n2\n"),
                ("graph_labels", "1\n-1\n"),
                ("node_labels", "3\n7\n3\n"),
            ],
        );
        let ds = parse_tu_dataset(&root).unwrap();
        let sizes: Vec<_> = ds.graphs.iter().map(|g| g.node_count).collect();
        assert_eq!(sizes, vec![2, 1]);
        assert_eq!(ds.graphs[0].colors, vec![0, 1]);
        assert_eq!(ds.graphs[1].colors, vec![0]);
        // -1 < 1 so the second graph takes class 0
        assert_eq!(ds.graphs[1].label, Some(GraphLabel::Class(0)));
        assert_eq!(ds.task, Task::BinaryClass);
    }

    #[test]
    fn missing_file_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        let root = write_tu(tmp.path(), "DS", &[("A", "1, 2\n"), ("graph_indicator", "1\n1\n")]);
        let err = parse_tu_dataset(&root).unwrap_err();
        assert!(err.to_string().contains("DS_graph_labels.txt"), "{err}");
    }

    #[test]
    fn unknown_node_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        let root = write_tu(
            tmp.path(),
            "DS",
            &[
                ("A", "1, 2\n2, 9\n"),
                ("graph_indicator", "1\n1\n"),
                ("graph_labels", "0\n"),
            ],
        );
        match parse_tu_dataset(&root).unwrap_err() {
            Error::Format { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("unknown node 9"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn jsonl_single_edge() {
        let text = "{\"n\":2,\"edges\":[[0,1]],\"colors\":[0,0],\"label\":1}\n";
        let ds = parse_jsonl(text.as_bytes(), "mem").unwrap();
        assert_eq!(ds.graphs.len(), 1);
        assert_eq!(ds.graphs[0].node_count, 2);
        assert_eq!(ds.graphs[0].edges, vec![Edge::new(0, 1)]);
        assert_eq!(ds.graphs[0].label, Some(GraphLabel::Class(1)));
    }

    #[test]
    fn jsonl_out_of_range_edge() {
        let text = "{\"n\":2,\"edges\":[[0,1]],\"colors\":[0,0]}\n{\"n\":3,\"edges\":[[0,5]],\"colors\":[0,0,0]}\n";
        match parse_jsonl(text.as_bytes(), "mem").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn jsonl_malformed_line() {
        let text = "{\"n\":2,\"edges\":[[0,1]],\"colors\":[0,0]}\n{not json\n";
        match parse_jsonl(text.as_bytes(), "mem").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn jsonl_typed_edges_and_targets() {
        let text = "{\"n\":3,\"edges\":[[0,1,2],[1,2,0]],\"colors\":[1,0,1],\"features\":[[0.5],[1.0],[-2.25]],\"label\":[0.1,3.0]}\n";
        let ds = parse_jsonl(text.as_bytes(), "mem").unwrap();
        assert_eq!(ds.task, Task::Regression { targets: 2 });
        assert_eq!(ds.graphs[0].edges[0], Edge::typed(0, 1, 2));
        assert_eq!(ds.relation_count(), 3);
    }
}
