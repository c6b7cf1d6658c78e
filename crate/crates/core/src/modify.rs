//! Elementary hypergraph modifications, their application, the induced
//! edge correspondence, and seeded random generators.
//!
//! Six classes cover the elementary changes to a CSP's constraint scopes:
//! adding or removing a variable (`AddVar`/`DelVar`), adding or removing a
//! constraint (`AddConstr`/`DelConstr`), and introducing or dissolving an
//! equality between variables (`AddEq`/`DelEq`). Applying a modification
//! also yields a correspondence from old edge names to their rewritten
//! successors, with deleted edges mapped to nothing.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{Ghd, GhdNode};
use crate::hypergraph::{EdgeSet, Hypergraph, VertexSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelEqPart {
    pub new_vertex: String,
    pub edges: EdgeSet,
}

/// A single elementary modification. The JSON form is tagged by `class`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum Modification {
    /// Introduce `new_vertex` into every edge of `edges`.
    AddVar { new_vertex: String, edges: EdgeSet },
    /// Remove `vertex` from every edge; edges that become empty vanish.
    DelVar { vertex: String },
    /// Add a new edge. Its vertex set must differ from every existing edge.
    AddConstr { name: String, vertices: VertexSet },
    /// Remove the named edge.
    DelConstr { name: String },
    /// Merge the vertices of `merged` into the single vertex `into`, which
    /// is either a member of `merged` or fresh.
    AddEq { merged: VertexSet, into: String },
    /// Split `vertex` into fresh vertices, one per part; the parts
    /// partition the edges incident on `vertex`.
    DelEq { vertex: String, parts: Vec<DelEqPart> },
}

impl Modification {
    pub fn class(&self) -> ModClass {
        match self {
            Modification::AddVar { .. } => ModClass::AddVar,
            Modification::DelVar { .. } => ModClass::DelVar,
            Modification::AddConstr { .. } => ModClass::AddConstr,
            Modification::DelConstr { .. } => ModClass::DelConstr,
            Modification::AddEq { .. } => ModClass::AddEq,
            Modification::DelEq { .. } => ModClass::DelEq,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("modification serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModClass {
    AddVar,
    DelVar,
    AddConstr,
    DelConstr,
    AddEq,
    DelEq,
}

impl ModClass {
    pub const ALL: [ModClass; 6] = [
        ModClass::AddVar,
        ModClass::DelVar,
        ModClass::AddConstr,
        ModClass::DelConstr,
        ModClass::AddEq,
        ModClass::DelEq,
    ];
}

impl std::fmt::Display for ModClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModClass::AddVar => "AddVar",
            ModClass::DelVar => "DelVar",
            ModClass::AddConstr => "AddConstr",
            ModClass::DelConstr => "DelConstr",
            ModClass::AddEq => "AddEq",
            ModClass::DelEq => "DelEq",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "addvar" => Ok(ModClass::AddVar),
            "delvar" => Ok(ModClass::DelVar),
            "addconstr" => Ok(ModClass::AddConstr),
            "delconstr" => Ok(ModClass::DelConstr),
            "addeq" => Ok(ModClass::AddEq),
            "deleq" => Ok(ModClass::DelEq),
            other => Err(format!(
                "unknown modification class `{other}` (expected one of AddVar, DelVar, AddConstr, DelConstr, AddEq, DelEq)"
            )),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModifyError {
    #[error("AddVar: vertex `{0}` already exists")]
    VertexExists(String),
    #[error("{class}: unknown vertex `{vertex}`")]
    UnknownVertex { class: ModClass, vertex: String },
    #[error("{class}: unknown edge `{edge}`")]
    UnknownEdge { class: ModClass, edge: String },
    #[error("AddVar: the target edge set must be non-empty")]
    EmptyTargetEdges,
    #[error("AddConstr: edge name `{0}` already exists")]
    EdgeNameExists(String),
    #[error("AddConstr: an edge with the same vertex set already exists (`{0}`)")]
    EdgeSetExists(String),
    #[error("AddConstr: the new edge must be non-empty")]
    EmptyNewEdge,
    #[error("AddEq: need at least two vertices to merge")]
    MergeTooSmall,
    #[error("AddEq: merge target `{0}` is neither a merged vertex nor fresh")]
    InvalidMergeTarget(String),
    #[error("DelEq: part vertex `{0}` is not fresh")]
    PartNotFresh(String),
    #[error("DelEq: part vertices must be pairwise distinct")]
    DuplicatePartName,
    #[error("DelEq: parts do not partition the edges incident on `{vertex}`")]
    NotAPartition { vertex: String },
    #[error("DelEq: parts must be non-empty")]
    EmptyPart,
    #[error("{0}: the modification would empty the hypergraph")]
    EmptyResult(ModClass),
    #[error("{class} is inadmissible for this hypergraph: {reason}")]
    Inadmissible { class: ModClass, reason: String },
    #[error("generated name `{0}` collides with an existing name")]
    FreshNameCollision(String),
}

/// Correspondence from old edge names to their successors under a
/// modification. Total on the old edge set; deleted edges map to `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeCorrespondence {
    map: BTreeMap<String, Option<String>>,
}

impl EdgeCorrespondence {
    /// The identity correspondence on the edges of `h`.
    pub fn identity(h: &Hypergraph) -> Self {
        EdgeCorrespondence {
            map: h
                .edge_names()
                .map(|e| (e.to_string(), Some(e.to_string())))
                .collect(),
        }
    }

    /// Successor of an old edge: `Some(None)` means deleted, outer `None`
    /// means the name was not an edge of the original hypergraph.
    pub fn get(&self, old: &str) -> Option<Option<&str>> {
        self.map.get(old).map(|v| v.as_deref())
    }

    pub fn image(&self, old: &str) -> Option<&str> {
        self.map.get(old).and_then(|v| v.as_deref())
    }

    /// Translates an edge set, dropping deleted edges.
    pub fn translate(&self, edges: &EdgeSet) -> EdgeSet {
        edges.iter().filter_map(|e| self.image(e)).map(String::from).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<&str>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_deref()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Applies a modification, producing the new hypergraph and the edge
/// correspondence. Preconditions of the class are checked and violations
/// reported as named errors.
pub fn apply(
    modification: &Modification,
    h: &Hypergraph,
) -> Result<(Hypergraph, EdgeCorrespondence), ModifyError> {
    let class = modification.class();
    let mut out: Vec<(String, VertexSet)> = Vec::new();
    let mut corr: BTreeMap<String, Option<String>> = BTreeMap::new();

    match modification {
        Modification::AddVar { new_vertex, edges } => {
            if edges.is_empty() {
                return Err(ModifyError::EmptyTargetEdges);
            }
            if h.has_vertex(new_vertex) {
                return Err(ModifyError::VertexExists(new_vertex.clone()));
            }
            for e in edges {
                if !h.has_edge(e) {
                    return Err(ModifyError::UnknownEdge {
                        class,
                        edge: e.clone(),
                    });
                }
            }
            for (name, mut verts) in h.edges() {
                if edges.contains(name) {
                    verts.insert(new_vertex.clone());
                }
                corr.insert(name.to_string(), Some(name.to_string()));
                out.push((name.to_string(), verts));
            }
        }
        Modification::DelVar { vertex } => {
            if !h.has_vertex(vertex) {
                return Err(ModifyError::UnknownVertex {
                    class,
                    vertex: vertex.clone(),
                });
            }
            for (name, mut verts) in h.edges() {
                verts.remove(vertex);
                if verts.is_empty() {
                    corr.insert(name.to_string(), None);
                } else {
                    corr.insert(name.to_string(), Some(name.to_string()));
                    out.push((name.to_string(), verts));
                }
            }
        }
        Modification::AddConstr { name, vertices } => {
            if vertices.is_empty() {
                return Err(ModifyError::EmptyNewEdge);
            }
            if h.has_edge(name) {
                return Err(ModifyError::EdgeNameExists(name.clone()));
            }
            for (existing, verts) in h.edges() {
                if &verts == vertices {
                    return Err(ModifyError::EdgeSetExists(existing.to_string()));
                }
                corr.insert(existing.to_string(), Some(existing.to_string()));
                out.push((existing.to_string(), verts));
            }
            out.push((name.clone(), vertices.clone()));
        }
        Modification::DelConstr { name } => {
            if !h.has_edge(name) {
                return Err(ModifyError::UnknownEdge {
                    class,
                    edge: name.clone(),
                });
            }
            for (existing, verts) in h.edges() {
                if existing == name {
                    corr.insert(existing.to_string(), None);
                } else {
                    corr.insert(existing.to_string(), Some(existing.to_string()));
                    out.push((existing.to_string(), verts));
                }
            }
        }
        Modification::AddEq { merged, into } => {
            if merged.len() < 2 {
                return Err(ModifyError::MergeTooSmall);
            }
            for v in merged {
                if !h.has_vertex(v) {
                    return Err(ModifyError::UnknownVertex {
                        class,
                        vertex: v.clone(),
                    });
                }
            }
            if !merged.contains(into) && h.has_vertex(into) {
                return Err(ModifyError::InvalidMergeTarget(into.clone()));
            }
            for (name, verts) in h.edges() {
                let mut rewritten: VertexSet = VertexSet::new();
                let mut touched = false;
                for v in verts {
                    if merged.contains(&v) {
                        touched = true;
                    } else {
                        rewritten.insert(v);
                    }
                }
                if touched {
                    rewritten.insert(into.clone());
                }
                corr.insert(name.to_string(), Some(name.to_string()));
                out.push((name.to_string(), rewritten));
            }
        }
        Modification::DelEq { vertex, parts } => {
            if !h.has_vertex(vertex) {
                return Err(ModifyError::UnknownVertex {
                    class,
                    vertex: vertex.clone(),
                });
            }
            let incident: EdgeSet = h
                .incident_edges(vertex)
                .expect("vertex checked above")
                .into_iter()
                .collect();
            let mut assignment: BTreeMap<String, String> = BTreeMap::new();
            let mut part_names: VertexSet = VertexSet::new();
            for part in parts {
                if part.edges.is_empty() {
                    return Err(ModifyError::EmptyPart);
                }
                if h.has_vertex(&part.new_vertex) {
                    return Err(ModifyError::PartNotFresh(part.new_vertex.clone()));
                }
                if !part_names.insert(part.new_vertex.clone()) {
                    return Err(ModifyError::DuplicatePartName);
                }
                for e in &part.edges {
                    if !incident.contains(e) {
                        return Err(ModifyError::NotAPartition {
                            vertex: vertex.clone(),
                        });
                    }
                    if assignment.insert(e.clone(), part.new_vertex.clone()).is_some() {
                        return Err(ModifyError::NotAPartition {
                            vertex: vertex.clone(),
                        });
                    }
                }
            }
            if assignment.len() != incident.len() {
                return Err(ModifyError::NotAPartition {
                    vertex: vertex.clone(),
                });
            }
            for (name, mut verts) in h.edges() {
                if let Some(part_vertex) = assignment.get(name) {
                    verts.remove(vertex);
                    verts.insert(part_vertex.clone());
                }
                corr.insert(name.to_string(), Some(name.to_string()));
                out.push((name.to_string(), verts));
            }
        }
    }

    if out.is_empty() {
        return Err(ModifyError::EmptyResult(class));
    }
    let new_h = Hypergraph::from_named_edges(out).expect("rewrites preserve invariants");
    Ok((new_h, EdgeCorrespondence { map: corr }))
}

/// Generates a random modification of the given class, reproducing the
/// synthetic protocol: AddVar targets ceil-average-degree many edges,
/// AddConstr builds a ceil-average-rank edge over existing vertices, AddEq
/// merges two random vertices, DelEq splits a vertex's incident edges into
/// two halves, DelVar and DelConstr pick uniformly. Pure in
/// `(class, h, seed)`.
pub fn generate(class: ModClass, h: &Hypergraph, seed: u64) -> Result<Modification, ModifyError> {
    if h.is_empty() {
        return Err(ModifyError::Inadmissible {
            class,
            reason: "empty hypergraph".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<String> = h.vertex_names().map(String::from).collect();
    let edges: Vec<String> = h.edge_names().map(String::from).collect();

    match class {
        ModClass::AddVar => {
            let (avg_degree, _) = h.degree_and_rank_stats().expect("non-empty");
            let count = (avg_degree as usize).min(edges.len()).max(1);
            let targets = sample_distinct(&mut rng, &edges, count);
            let new_vertex = fresh_name(h, &format!("_v{seed}"))?;
            Ok(Modification::AddVar {
                new_vertex,
                edges: targets.into_iter().collect(),
            })
        }
        ModClass::DelVar => {
            let admissible: Vec<&String> = vertices
                .iter()
                .filter(|v| {
                    h.edges()
                        .any(|(_, verts)| !(verts.len() == 1 && verts.contains(*v)))
                })
                .collect();
            if admissible.is_empty() {
                return Err(ModifyError::Inadmissible {
                    class,
                    reason: "removing any vertex would empty the hypergraph".into(),
                });
            }
            let vertex = admissible[rng.random_range(0..admissible.len())].clone();
            Ok(Modification::DelVar { vertex })
        }
        ModClass::AddConstr => {
            let (_, avg_rank) = h.degree_and_rank_stats().expect("non-empty");
            let rank = (avg_rank as usize).min(vertices.len()).max(1);
            let existing: std::collections::BTreeSet<VertexSet> =
                h.edges().map(|(_, verts)| verts).collect();
            for _ in 0..64 {
                let picked: VertexSet = sample_distinct(&mut rng, &vertices, rank).into_iter().collect();
                if !existing.contains(&picked) {
                    let name = fresh_name(h, &format!("_e{seed}"))?;
                    return Ok(Modification::AddConstr {
                        name,
                        vertices: picked,
                    });
                }
            }
            Err(ModifyError::Inadmissible {
                class,
                reason: format!("no fresh edge of rank {rank} over existing vertices found"),
            })
        }
        ModClass::DelConstr => {
            if edges.len() < 2 {
                return Err(ModifyError::Inadmissible {
                    class,
                    reason: "removing the only edge would empty the hypergraph".into(),
                });
            }
            let name = edges[rng.random_range(0..edges.len())].clone();
            Ok(Modification::DelConstr { name })
        }
        ModClass::AddEq => {
            if vertices.len() < 2 {
                return Err(ModifyError::Inadmissible {
                    class,
                    reason: "need at least two vertices".into(),
                });
            }
            let picked = sample_distinct(&mut rng, &vertices, 2);
            let into = picked[1].clone();
            Ok(Modification::AddEq {
                merged: picked.into_iter().collect(),
                into,
            })
        }
        ModClass::DelEq => {
            let splittable: Vec<&String> = vertices
                .iter()
                .filter(|v| h.degree(v).unwrap_or(0) >= 2)
                .collect();
            if splittable.is_empty() {
                return Err(ModifyError::Inadmissible {
                    class,
                    reason: "no vertex has degree at least 2".into(),
                });
            }
            let vertex = splittable[rng.random_range(0..splittable.len())].clone();
            let mut incident = h.incident_edges(&vertex).expect("vertex exists");
            shuffle(&mut rng, &mut incident);
            let half = incident.len().div_ceil(2);
            let first: EdgeSet = incident[..half].iter().cloned().collect();
            let second: EdgeSet = incident[half..].iter().cloned().collect();
            let y1 = fresh_name(h, &format!("_v{seed}p1"))?;
            let y2 = fresh_name(h, &format!("_v{seed}p2"))?;
            Ok(Modification::DelEq {
                vertex,
                parts: vec![
                    DelEqPart {
                        new_vertex: y1,
                        edges: first,
                    },
                    DelEqPart {
                        new_vertex: y2,
                        edges: second,
                    },
                ],
            })
        }
    }
}

fn fresh_name(h: &Hypergraph, candidate: &str) -> Result<String, ModifyError> {
    if h.has_vertex(candidate) || h.has_edge(candidate) {
        return Err(ModifyError::FreshNameCollision(candidate.to_string()));
    }
    Ok(candidate.to_string())
}

fn sample_distinct<R: Rng>(rng: &mut R, pool: &[String], count: usize) -> Vec<String> {
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let mut out = Vec::with_capacity(count);
    for i in 0..count.min(pool.len()) {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
        out.push(pool[indices[i]].clone());
    }
    out
}

fn shuffle<R: Rng>(rng: &mut R, items: &mut [String]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Rewrites a decomposition of `h` into one of `DelVar(vertex)(h)` without
/// search: the vertex is dropped from every bag and cover edges are
/// replaced by their surviving successors. Nodes whose bag and cover both
/// vanish are spliced out. Width never increases.
pub fn delvar_fast_path(ghd: &Ghd, vertex: &str, corr: &EdgeCorrespondence) -> Ghd {
    fn rewrite(node: &GhdNode, vertex: &str, corr: &EdgeCorrespondence) -> Vec<GhdNode> {
        let mut bag = node.bag.clone();
        bag.remove(vertex);
        let cover = corr.translate(&node.cover);
        let mut children = Vec::new();
        for c in &node.children {
            children.extend(rewrite(c, vertex, corr));
        }
        if bag.is_empty() && cover.is_empty() {
            // Nothing left at this node; hoist the children.
            return children;
        }
        vec![GhdNode {
            id: node.id.clone(),
            bag,
            cover,
            children,
        }]
    }

    let mut roots = rewrite(&ghd.root, vertex, corr);
    let root = if roots.len() == 1 {
        roots.pop().unwrap()
    } else {
        // The old root dissolved; the remaining subtrees share no vertices,
        // so chaining them under the first preserves connectedness.
        let mut first = roots.remove(0);
        first.children.extend(roots);
        first
    };
    let mut out = Ghd { width: 0, root };
    out.renumber();
    out
}
