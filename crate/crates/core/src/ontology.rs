//! Taxonomy graph over label ids and the hop-distance relevance used for
//! ranking evaluation.
//!
//! The file format mirrors the public AudioSet ontology: a JSON array of
//! objects with `id`, `name` and `child_ids` (other keys are ignored). The
//! child pointers are treated as undirected edges.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names of the generic top labels dropped from relevance by default.
pub const DEFAULT_EXCLUDED_NAMES: [&str; 4] = ["Music", "Musical instrument", "Tools", "Singing"];

/// Largest hop distance that still earns relevance.
pub const DEFAULT_MAX_DISTANCE: u32 = 21;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyNode {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub child_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Ontology {
    nodes: Vec<OntologyNode>,
    by_id: HashMap<String, usize>,
    by_name: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
}

impl Ontology {
    pub fn from_nodes(nodes: Vec<OntologyNode>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if by_id.insert(node.id.clone(), i).is_some() {
                return Err(Error::Duplicate(node.id.clone()));
            }
        }
        let mut by_name = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            by_name.entry(node.name.clone()).or_insert(i);
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            for child in &node.child_ids {
                let &j = by_id.get(child).ok_or_else(|| {
                    Error::Reference(format!("node `{}` lists unknown child `{child}`", node.id))
                })?;
                if i == j {
                    return Err(Error::Reference(format!("node `{}` lists itself as a child", node.id)));
                }
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        for edges in &mut adjacency {
            edges.sort_unstable();
            edges.dedup();
        }

        Ok(Self {
            nodes,
            by_id,
            by_name,
            adjacency,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let nodes: Vec<OntologyNode> = serde_json::from_str(&text)?;
        Self::from_nodes(nodes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.nodes)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn nodes(&self) -> &[OntologyNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn node(&self, id: &str) -> Option<&OntologyNode> {
        self.by_id.get(id).map(|&i| &self.nodes[i])
    }

    /// First node carrying exactly this display name.
    pub fn node_by_name(&self, name: &str) -> Option<&OntologyNode> {
        self.by_name.get(name).map(|&i| &self.nodes[i])
    }

    /// Number of distinct undirected neighbours.
    pub fn degree(&self, id: &str) -> Result<usize> {
        Ok(self.adjacency[self.index(id)?].len())
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::Lookup(id.to_string()))
    }

    fn excluded_mask(&self, excluded: &BTreeSet<String>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.nodes.len()];
        for id in excluded {
            mask[self.index(id)?] = true;
        }
        Ok(mask)
    }

    /// Hop counts from `source` to every node, never entering a masked node.
    fn bfs(&self, source: usize, blocked: &[bool]) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.nodes.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let next = dist[u].unwrap() + 1;
            for &v in &self.adjacency[u] {
                if dist[v].is_none() && !blocked[v] {
                    dist[v] = Some(next);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Shortest undirected path length avoiding `excluded` nodes; `None` when
    /// no such path exists.
    pub fn graph_distance(&self, a: &str, b: &str, excluded: &BTreeSet<String>) -> Result<Option<u32>> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let mask = self.excluded_mask(excluded)?;
        for (id, i) in [(a, ia), (b, ib)] {
            if mask[i] {
                return Err(Error::Domain(format!("label `{id}` is excluded")));
            }
        }
        Ok(self.bfs(ia, &mask)[ib])
    }
}

/// Parameters of the relevance `r = C - d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceConfig {
    /// `C`: distances at or beyond it earn zero relevance.
    pub max_distance: u32,
    pub excluded_labels: BTreeSet<String>,
}

impl RelevanceConfig {
    pub fn new(max_distance: u32, excluded_labels: BTreeSet<String>) -> Self {
        Self {
            max_distance,
            excluded_labels,
        }
    }

    /// `C = 21` and whichever of the generic top labels exist in `ontology`.
    pub fn for_ontology(ontology: &Ontology) -> Self {
        let excluded_labels = DEFAULT_EXCLUDED_NAMES
            .iter()
            .filter_map(|name| ontology.node_by_name(name))
            .map(|n| n.id.clone())
            .collect();
        Self::new(DEFAULT_MAX_DISTANCE, excluded_labels)
    }

    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        if self.max_distance == 0 {
            return Err(Error::Config("max distance C must be at least 1".into()));
        }
        for id in &self.excluded_labels {
            if !ontology.contains(id) {
                return Err(Error::Lookup(id.clone()));
            }
        }
        Ok(())
    }
}

/// Label-set relevance with per-source BFS results memoized.
///
/// Safe to share across threads; the cache is internally synchronized.
#[derive(Debug)]
pub struct RelevanceScorer<'a> {
    ontology: &'a Ontology,
    max_distance: u32,
    excluded: Vec<bool>,
    cache: Mutex<HashMap<usize, Arc<Vec<Option<u32>>>>>,
}

impl<'a> RelevanceScorer<'a> {
    pub fn new(ontology: &'a Ontology, cfg: &RelevanceConfig) -> Result<Self> {
        cfg.validate(ontology)?;
        Ok(Self {
            ontology,
            max_distance: cfg.max_distance,
            excluded: ontology.excluded_mask(&cfg.excluded_labels)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn max_distance(&self) -> u32 {
        self.max_distance
    }

    fn distances_from(&self, source: usize) -> Arc<Vec<Option<u32>>> {
        if let Some(hit) = self.cache.lock().unwrap().get(&source) {
            return Arc::clone(hit);
        }
        let dist = Arc::new(self.ontology.bfs(source, &self.excluded));
        self.cache
            .lock()
            .unwrap()
            .entry(source)
            .or_insert(dist)
            .clone()
    }

    fn kept(&self, labels: &[String]) -> Result<Vec<usize>> {
        let mut kept = Vec::with_capacity(labels.len());
        for label in labels {
            let i = self.ontology.index(label)?;
            if !self.excluded[i] {
                kept.push(i);
            }
        }
        Ok(kept)
    }

    /// Minimum non-excluded label-pair distance `d*`, folded into
    /// `max(0, C - min(d*, C))`. Empty sets after exclusion score zero.
    pub fn score(&self, labels_q: &[String], labels_c: &[String]) -> Result<u32> {
        let q = self.kept(labels_q)?;
        let c = self.kept(labels_c)?;
        let mut best: Option<u32> = None;
        for &a in &q {
            let dist = self.distances_from(a);
            for &b in &c {
                if let Some(d) = dist[b] {
                    best = Some(best.map_or(d, |cur| cur.min(d)));
                }
            }
        }
        Ok(best.map_or(0, |d| self.max_distance - d.min(self.max_distance)))
    }
}

/// One-shot relevance between two label sets.
pub fn relevance(ontology: &Ontology, labels_q: &[String], labels_c: &[String], cfg: &RelevanceConfig) -> Result<u32> {
    RelevanceScorer::new(ontology, cfg)?.score(labels_q, labels_c)
}
