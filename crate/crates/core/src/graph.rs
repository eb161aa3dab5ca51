//! Temporal graphs stored as chronologically ordered interaction sequences.
//!
//! Repeated interactions between the same pair are kept as distinct events.
//! Direction is preserved in storage, but neighborhoods and degrees treat
//! every interaction as undirected.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("empty input: no interactions")]
    EmptyInput,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: negative time {time}")]
    NegativeTime { line: usize, time: f64 },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: u64 },
    #[error("interaction {index}: node {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange {
        index: usize,
        node: usize,
        num_nodes: usize,
    },
    #[error("interaction {index}: invalid time {time}")]
    InvalidTime { index: usize, time: f64 },
    #[error("interaction {index}: self-loop on node {node}")]
    SelfLoopAt { index: usize, node: usize },
    #[error("node {0} has no label")]
    MissingLabel(u64),
    #[error("label count {labels} does not match node count {nodes}")]
    LabelCount { labels: usize, nodes: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub source: usize,
    pub target: usize,
    pub time: f64,
}

impl Interaction {
    pub fn new(source: usize, target: usize, time: f64) -> Self {
        Self {
            source,
            target,
            time,
        }
    }
}

/// One entry of a historical neighbor sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub time: f64,
}

/// The `l` most recent neighbors of a node strictly before a query time,
/// oldest first. Borrowed from the graph's adjacency index.
pub type NeighborView<'a> = &'a [Neighbor];

/// Ground-truth cluster labels compacted to `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub assignment: Vec<usize>,
    /// Original label string for each compact label id.
    pub names: Vec<String>,
}

impl Labels {
    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn from_assignment(assignment: Vec<usize>) -> Self {
        let k = assignment.iter().map(|&c| c + 1).max().unwrap_or(0);
        Self {
            assignment,
            names: (0..k).map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemporalGraph {
    interactions: Vec<Interaction>,
    num_nodes: usize,
    degrees: Vec<usize>,
    /// External id of each dense node index.
    ids: Vec<u64>,
    labels: Option<Labels>,
    /// Per-node interaction history in sequence order (both directions).
    history: Vec<Vec<Neighbor>>,
}

impl TemporalGraph {
    /// Builds a graph over dense node ids `0..num_nodes`, stably sorting the
    /// interactions by time. External ids default to the dense ids.
    pub fn new(num_nodes: usize, mut interactions: Vec<Interaction>) -> Result<Self, GraphError> {
        for (index, it) in interactions.iter().enumerate() {
            for node in [it.source, it.target] {
                if node >= num_nodes {
                    return Err(GraphError::NodeOutOfRange {
                        index,
                        node,
                        num_nodes,
                    });
                }
            }
            if !it.time.is_finite() || it.time < 0.0 {
                return Err(GraphError::InvalidTime {
                    index,
                    time: it.time,
                });
            }
            if it.source == it.target {
                return Err(GraphError::SelfLoopAt {
                    index,
                    node: it.source,
                });
            }
        }
        interactions.sort_by(|a, b| a.time.total_cmp(&b.time));

        let mut degrees = vec![0usize; num_nodes];
        let mut history = vec![Vec::new(); num_nodes];
        for it in &interactions {
            degrees[it.source] += 1;
            degrees[it.target] += 1;
            history[it.source].push(Neighbor {
                node: it.target,
                time: it.time,
            });
            history[it.target].push(Neighbor {
                node: it.source,
                time: it.time,
            });
        }
        Ok(Self {
            interactions,
            num_nodes,
            degrees,
            ids: (0..num_nodes as u64).collect(),
            labels: None,
            history,
        })
    }

    fn with_ids(mut self, ids: Vec<u64>) -> Self {
        debug_assert_eq!(ids.len(), self.num_nodes);
        self.ids = ids;
        self
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self, GraphError> {
        if labels.assignment.len() != self.num_nodes {
            return Err(GraphError::LabelCount {
                labels: labels.assignment.len(),
                nodes: self.num_nodes,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// `(min, max)` timestamp, or `None` for an empty graph.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.interactions.first()?.time, self.interactions.last()?.time))
    }

    /// Dense index of an external node id.
    pub fn index_of(&self) -> HashMap<u64, usize> {
        self.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    /// The at most `l` most recent neighbors of `x` with interaction time
    /// strictly before `t`. Ties in time are ordered by sequence position.
    pub fn neighbor_view(&self, x: usize, t: f64, l: usize) -> NeighborView<'_> {
        let hist = &self.history[x];
        let end = hist.partition_point(|n| n.time < t);
        &hist[end.saturating_sub(l)..end]
    }

    /// Undirected, deduplicated node pairs with at least one interaction.
    pub fn static_projection(&self) -> EdgeSet {
        let pairs: BTreeSet<(usize, usize)> = self
            .interactions
            .iter()
            .map(|it| (it.source.min(it.target), it.source.max(it.target)))
            .collect();
        EdgeSet {
            num_nodes: self.num_nodes,
            pairs: pairs.into_iter().collect(),
        }
    }

    /// Contiguous chronological slices of at most `batch_size` interactions.
    pub fn chronological_batches(&self, batch_size: usize) -> std::slice::Chunks<'_, Interaction> {
        assert!(batch_size >= 1, "batch_size must be positive");
        self.interactions.chunks(batch_size)
    }

    /// Writes the interaction file format using external ids.
    pub fn write_interactions<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for it in &self.interactions {
            writeln!(w, "{} {} {}", self.ids[it.source], self.ids[it.target], it.time)?;
        }
        Ok(())
    }

    /// Writes `node label` lines; no-op when the graph is unlabeled.
    pub fn write_labels<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if let Some(labels) = &self.labels {
            for (i, &c) in labels.assignment.iter().enumerate() {
                writeln!(w, "{} {}", self.ids[i], labels.names[c])?;
            }
        }
        Ok(())
    }
}

/// Undirected static projection of a temporal graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    num_nodes: usize,
    /// Sorted `(min, max)` pairs.
    pairs: Vec<(usize, usize)>,
}

impl EdgeSet {
    pub fn from_pairs(num_nodes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let set: BTreeSet<(usize, usize)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        Self {
            num_nodes,
            pairs: set.into_iter().collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Sorted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.pairs {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(a, b) in &self.pairs {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Ok(l) => {
            let trimmed = l.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, trimmed.to_string())))
            }
        }
        Err(e) => Some(Err(e)),
    })
}

/// Parses `source target time` lines. External ids are compacted to a dense
/// range in ascending id order; the map is retained on the graph.
pub fn parse_interactions<R: BufRead>(reader: R) -> Result<TemporalGraph, GraphError> {
    let mut raw = Vec::new();
    for line in data_lines(reader) {
        let (line, text) = line?;
        let mut tok = text.split_whitespace();
        let (Some(s), Some(d), Some(t), None) = (tok.next(), tok.next(), tok.next(), tok.next()) else {
            return Err(GraphError::Malformed {
                line,
                msg: "expected `source target time`".into(),
            });
        };
        let parse_id = |s: &str| {
            s.parse::<u64>().map_err(|_| GraphError::Malformed {
                line,
                msg: format!("invalid node id `{s}`"),
            })
        };
        let source = parse_id(s)?;
        let target = parse_id(d)?;
        let time: f64 = t.parse().map_err(|_| GraphError::Malformed {
            line,
            msg: format!("invalid time `{t}`"),
        })?;
        if !time.is_finite() {
            return Err(GraphError::Malformed {
                line,
                msg: format!("non-finite time `{t}`"),
            });
        }
        if time < 0.0 {
            return Err(GraphError::NegativeTime { line, time });
        }
        if source == target {
            return Err(GraphError::SelfLoop { line, node: source });
        }
        raw.push((source, target, time));
    }
    if raw.is_empty() {
        return Err(GraphError::EmptyInput);
    }

    let ids: Vec<u64> = raw
        .iter()
        .flat_map(|&(s, d, _)| [s, d])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let interactions = raw
        .into_iter()
        .map(|(s, d, t)| Interaction::new(index[&s], index[&d], t))
        .collect();
    Ok(TemporalGraph::new(ids.len(), interactions)?.with_ids(ids))
}

pub fn parse_interactions_str(text: &str) -> Result<TemporalGraph, GraphError> {
    parse_interactions(text.as_bytes())
}

/// Parses `node label` lines against a graph's external ids. Label strings
/// are compacted in order of first appearance. Lines for nodes absent from
/// the graph are ignored; every graph node must be labeled.
pub fn parse_labels<R: BufRead>(reader: R, ids: &[u64]) -> Result<Labels, GraphError> {
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut assignment: Vec<Option<usize>> = vec![None; ids.len()];
    let mut names: Vec<String> = Vec::new();
    let mut name_index: HashMap<String, usize> = HashMap::new();
    for line in data_lines(reader) {
        let (line, text) = line?;
        let mut tok = text.split_whitespace();
        let (Some(node), Some(label), None) = (tok.next(), tok.next(), tok.next()) else {
            return Err(GraphError::Malformed {
                line,
                msg: "expected `node label`".into(),
            });
        };
        let node: u64 = node.parse().map_err(|_| GraphError::Malformed {
            line,
            msg: format!("invalid node id `{node}`"),
        })?;
        let Some(&i) = index.get(&node) else { continue };
        let next = names.len();
        let c = *name_index.entry(label.to_string()).or_insert_with(|| {
            names.push(label.to_string());
            next
        });
        assignment[i] = Some(c);
    }
    let assignment = assignment
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or(GraphError::MissingLabel(ids[i])))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Labels { assignment, names })
}
