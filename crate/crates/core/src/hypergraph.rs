//! Immutable hypergraph model: parsing, induced subhypergraphs, cover
//! unions and component computation.
//!
//! A hypergraph is a set of named vertices plus an ordered collection of
//! named, non-empty edges (vertex sets). There are no isolated vertices:
//! the vertex set is always exactly the union of the edges. Values are
//! immutable after construction and can be shared freely across threads;
//! every operation here is a pure function.
//!
//! The text format is HyperBench-compatible: `name(v1,v2,...)`, edges
//! separated by commas and/or newlines, `%` starts a comment line and an
//! optional trailing `.` terminates the input.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::bits::Bits;

/// Sorted set of vertex identifiers.
pub type VertexSet = BTreeSet<String>;
/// Sorted set of edge names.
pub type EdgeSet = BTreeSet<String>;

const IDENT_CHARS: &str = "letters, digits, or one of `_:.-`";

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '.' | '-')
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: duplicate edge name `{name}`")]
    DuplicateEdge { line: usize, name: String },
    #[error("line {line}: duplicate vertex `{vertex}` in edge `{edge}`")]
    DuplicateVertex {
        line: usize,
        edge: String,
        vertex: String,
    },
    #[error("line {line}: edge `{name}` is empty")]
    EmptyEdge { line: usize, name: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HypergraphError {
    #[error("unknown edge name `{0}`")]
    UnknownEdge(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("duplicate edge name `{0}`")]
    DuplicateEdgeName(String),
    #[error("edge `{0}` is empty")]
    EmptyEdge(String),
    #[error("operation requires a non-empty hypergraph")]
    Empty,
}

/// Immutable hypergraph with interned vertex and edge names.
///
/// Edge order is construction (file) order; vertex order is first
/// occurrence. Both orders are observable through the canonical serializer
/// and are part of the deterministic behaviour of the library.
#[derive(Clone, Debug)]
pub struct Hypergraph {
    vertex_names: Vec<String>,
    vertex_ids: HashMap<String, u32>,
    edge_names: Vec<String>,
    edge_ids: HashMap<String, u32>,
    edge_verts: Vec<Bits>,
}

impl PartialEq for Hypergraph {
    /// Structural equality: same named edges with the same vertex sets.
    fn eq(&self, other: &Self) -> bool {
        self.edge_names.len() == other.edge_names.len()
            && self.edges().all(|(name, vs)| {
                other.edge_vertices(name).map(|ovs| ovs == vs).unwrap_or(false)
            })
    }
}

impl Hypergraph {
    /// Builds a hypergraph from `(name, vertices)` pairs. Edge order is the
    /// iteration order, vertex order is first occurrence.
    pub fn from_named_edges<I, S>(edges: I) -> Result<Self, HypergraphError>
    where
        I: IntoIterator<Item = (S, VertexSet)>,
        S: Into<String>,
    {
        Self::from_ordered_edges(
            edges
                .into_iter()
                .map(|(name, verts)| (name.into(), verts.into_iter().collect())),
        )
    }

    /// As [`from_named_edges`] but with explicit per-edge vertex order, so
    /// that vertex interning follows first textual occurrence.
    ///
    /// [`from_named_edges`]: Hypergraph::from_named_edges
    fn from_ordered_edges<I>(edges: I) -> Result<Self, HypergraphError>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut h = Hypergraph {
            vertex_names: Vec::new(),
            vertex_ids: HashMap::new(),
            edge_names: Vec::new(),
            edge_ids: HashMap::new(),
            edge_verts: Vec::new(),
        };
        let mut raw: Vec<Vec<String>> = Vec::new();
        for (name, verts) in edges {
            if verts.is_empty() {
                return Err(HypergraphError::EmptyEdge(name));
            }
            if h.edge_ids.contains_key(&name) {
                return Err(HypergraphError::DuplicateEdgeName(name));
            }
            h.edge_ids.insert(name.clone(), h.edge_names.len() as u32);
            h.edge_names.push(name);
            for v in &verts {
                if !h.vertex_ids.contains_key(v) {
                    h.vertex_ids.insert(v.clone(), h.vertex_names.len() as u32);
                    h.vertex_names.push(v.clone());
                }
            }
            raw.push(verts);
        }
        let n = h.vertex_names.len();
        for verts in &raw {
            let mut bits = Bits::new(n);
            for v in verts {
                bits.set(h.vertex_ids[v]);
            }
            h.edge_verts.push(bits);
        }
        Ok(h)
    }

    /// Parses the HyperBench-compatible text format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut edges: Vec<(String, Vec<String>, usize)> = Vec::new();
        let mut chars = text.chars().peekable();
        let mut line = 1usize;
        let mut col = 1usize;
        let mut at_line_start = true;
        let mut terminated = false;

        macro_rules! bump {
            () => {{
                let c = chars.next();
                if let Some(c) = c {
                    if c == '\n' {
                        line += 1;
                        col = 1;
                        at_line_start = true;
                    } else {
                        col += 1;
                        if !c.is_whitespace() {
                            at_line_start = false;
                        }
                    }
                }
                c
            }};
        }

        loop {
            // Skip whitespace and comment lines.
            loop {
                match chars.peek() {
                    Some(c) if c.is_whitespace() => {
                        bump!();
                    }
                    Some('%') if at_line_start => {
                        while let Some(c) = bump!() {
                            if c == '\n' {
                                break;
                            }
                        }
                    }
                    _ => break,
                }
            }
            let Some(&c) = chars.peek() else { break };
            if terminated {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    expected: "end of input after `.`",
                    found: c.to_string(),
                });
            }
            if c == ',' {
                // Separator between edges; tolerated anywhere an edge may start.
                bump!();
                continue;
            }
            if c == '.' {
                bump!();
                terminated = true;
                continue;
            }
            if !is_ident_char(c) {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    expected: "edge name",
                    found: c.to_string(),
                });
            }

            let edge_line = line;
            let mut name = String::new();
            while let Some(&c) = chars.peek() {
                if is_ident_char(c) {
                    name.push(c);
                    bump!();
                } else {
                    break;
                }
            }
            while matches!(chars.peek(), Some(c) if *c == ' ' || *c == '\t') {
                bump!();
            }
            match chars.peek() {
                Some('(') => {
                    bump!();
                }
                other => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        expected: "`(` after edge name",
                        found: other.map(|c| c.to_string()).unwrap_or_else(|| "end of input".into()),
                    })
                }
            }

            let mut verts: Vec<String> = Vec::new();
            loop {
                while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
                    bump!();
                }
                match chars.peek() {
                    Some(')') => {
                        bump!();
                        break;
                    }
                    Some(&c) if is_ident_char(c) => {
                        let mut v = String::new();
                        while let Some(&c) = chars.peek() {
                            if is_ident_char(c) {
                                v.push(c);
                                bump!();
                            } else {
                                break;
                            }
                        }
                        verts.push(v);
                        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
                            bump!();
                        }
                        match chars.peek() {
                            Some(',') => {
                                bump!();
                            }
                            Some(')') => {}
                            other => {
                                return Err(ParseError::Syntax {
                                    line,
                                    col,
                                    expected: "`,` or `)` in vertex list",
                                    found: other
                                        .map(|c| c.to_string())
                                        .unwrap_or_else(|| "end of input".into()),
                                })
                            }
                        }
                    }
                    other => {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            expected: IDENT_CHARS,
                            found: other
                                .map(|c| c.to_string())
                                .unwrap_or_else(|| "end of input".into()),
                        })
                    }
                }
            }
            if verts.is_empty() {
                return Err(ParseError::EmptyEdge {
                    line: edge_line,
                    name,
                });
            }
            edges.push((name, verts, edge_line));
        }

        let mut seen_edges: HashMap<String, ()> = HashMap::new();
        let mut ordered: Vec<(String, Vec<String>)> = Vec::new();
        for (name, verts, edge_line) in edges {
            if seen_edges.insert(name.clone(), ()).is_some() {
                return Err(ParseError::DuplicateEdge {
                    line: edge_line,
                    name,
                });
            }
            let mut seen = BTreeSet::new();
            for v in &verts {
                if !seen.insert(v.clone()) {
                    return Err(ParseError::DuplicateVertex {
                        line: edge_line,
                        edge: name,
                        vertex: v.clone(),
                    });
                }
            }
            ordered.push((name, verts));
        }
        Ok(Hypergraph::from_ordered_edges(ordered).expect("parser enforces invariants"))
    }

    /// Canonical text form: one edge per line, separated by commas, final
    /// line terminated with `.`. Parsing this text reproduces the value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let last = self.edge_names.len().saturating_sub(1);
        for (i, name) in self.edge_names.iter().enumerate() {
            out.push_str(name);
            out.push('(');
            let mut first = true;
            for v in self.edge_verts[i].iter() {
                if !first {
                    out.push(',');
                }
                out.push_str(&self.vertex_names[v as usize]);
                first = false;
            }
            out.push(')');
            out.push(if i == last { '.' } else { ',' });
            out.push('\n');
        }
        out
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_names.is_empty()
    }

    pub fn vertex_names(&self) -> impl Iterator<Item = &str> {
        self.vertex_names.iter().map(|s| s.as_str())
    }

    pub fn edge_names(&self) -> impl Iterator<Item = &str> {
        self.edge_names.iter().map(|s| s.as_str())
    }

    pub fn has_vertex(&self, name: &str) -> bool {
        self.vertex_ids.contains_key(name)
    }

    pub fn has_edge(&self, name: &str) -> bool {
        self.edge_ids.contains_key(name)
    }

    /// All vertices as a sorted name set.
    pub fn vertex_set(&self) -> VertexSet {
        self.vertex_names.iter().cloned().collect()
    }

    /// All edges as a sorted name set.
    pub fn edge_set(&self) -> EdgeSet {
        self.edge_names.iter().cloned().collect()
    }

    /// Iterates edges in construction order with their vertex sets.
    pub fn edges(&self) -> impl Iterator<Item = (&str, VertexSet)> + '_ {
        self.edge_names
            .iter()
            .enumerate()
            .map(|(i, name)| (name.as_str(), self.verts_to_names(&self.edge_verts[i])))
    }

    pub fn edge_vertices(&self, name: &str) -> Option<VertexSet> {
        self.edge_ids
            .get(name)
            .map(|&id| self.verts_to_names(&self.edge_verts[id as usize]))
    }

    /// Number of edges incident on `vertex`.
    pub fn degree(&self, vertex: &str) -> Option<usize> {
        let id = *self.vertex_ids.get(vertex)?;
        Some(self.edge_verts.iter().filter(|e| e.get(id)).count())
    }

    /// Edges incident on `vertex`, in construction order.
    pub fn incident_edges(&self, vertex: &str) -> Option<Vec<String>> {
        let id = *self.vertex_ids.get(vertex)?;
        Some(
            self.edge_names
                .iter()
                .zip(&self.edge_verts)
                .filter(|(_, e)| e.get(id))
                .map(|(n, _)| n.clone())
                .collect(),
        )
    }

    /// Union of the vertex sets of the named edges (B(E)).
    pub fn cover_union(&self, edges: &EdgeSet) -> Result<VertexSet, HypergraphError> {
        let mut bits = Bits::new(self.vertex_names.len());
        for name in edges {
            let id = self
                .edge_ids
                .get(name)
                .ok_or_else(|| HypergraphError::UnknownEdge(name.clone()))?;
            bits.union_with(&self.edge_verts[*id as usize]);
        }
        Ok(self.verts_to_names(&bits))
    }

    /// Induced subhypergraph over `u`: each edge is trimmed to its
    /// intersection with `u`, empty intersections are dropped and edges that
    /// become identical vertex sets are coalesced under the
    /// lexicographically smallest source name. The full set of source names
    /// per kept edge is returned as provenance.
    pub fn induced(&self, u: &VertexSet) -> InducedSubhypergraph {
        let ubits = self.verts_from_names(u);
        let mut trimmed: BTreeMap<Vec<u32>, BTreeSet<String>> = BTreeMap::new();
        for (i, verts) in self.edge_verts.iter().enumerate() {
            let mut t = verts.clone();
            t.intersect_with(&ubits);
            if t.is_empty() {
                continue;
            }
            trimmed
                .entry(t.to_vec())
                .or_default()
                .insert(self.edge_names[i].clone());
        }
        let mut groups: Vec<(String, VertexSet, BTreeSet<String>)> = trimmed
            .into_iter()
            .map(|(verts, sources)| {
                let name = sources.iter().next().expect("non-empty group").clone();
                let vs = verts
                    .iter()
                    .map(|v| self.vertex_names[*v as usize].clone())
                    .collect();
                (name, vs, sources)
            })
            .collect();
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        let provenance: BTreeMap<String, BTreeSet<String>> = groups
            .iter()
            .map(|(name, _, sources)| (name.clone(), sources.clone()))
            .collect();
        let hypergraph = Hypergraph::from_named_edges(
            groups.into_iter().map(|(name, vs, _)| (name, vs)),
        )
        .expect("trimmed edges are non-empty and uniquely named");
        InducedSubhypergraph {
            hypergraph,
            provenance,
        }
    }

    /// The set of trimmed edge shapes over `u`: `{ e ∩ u }` minus the empty
    /// set, as plain vertex-name sets. Two hypergraphs agree on a region
    /// exactly when these shape sets are equal, regardless of edge names.
    pub fn trimmed_shapes(&self, u: &VertexSet) -> BTreeSet<Vec<String>> {
        let ubits = self.verts_from_names(u);
        let mut shapes = BTreeSet::new();
        for verts in &self.edge_verts {
            let mut t = verts.clone();
            t.intersect_with(&ubits);
            if !t.is_empty() {
                // Sorted by name so shapes compare across hypergraphs with
                // different interning orders.
                let mut shape: Vec<String> = t
                    .iter()
                    .map(|v| self.vertex_names[v as usize].clone())
                    .collect();
                shape.sort();
                shapes.insert(shape);
            }
        }
        shapes
    }

    /// The `[u]`-components of the whole hypergraph. See [`components_of`].
    ///
    /// [`components_of`]: Hypergraph::components_of
    pub fn components(&self, u: &VertexSet) -> Vec<EdgeSet> {
        self.components_of(&self.edge_set(), u)
    }

    /// Partitions `{ e ∈ edges | e \ u ≠ ∅ }` into maximal classes of the
    /// transitive closure of the adjacency `(e1 ∩ e2) \ u ≠ ∅`. Edges fully
    /// absorbed by `u` belong to no component. Components are ordered by
    /// their lexicographically smallest member edge name.
    ///
    /// Unknown names in `edges` or `u` are ignored; this keeps the operation
    /// total when callers hold sets from a related hypergraph.
    pub fn components_of(&self, edges: &EdgeSet, u: &VertexSet) -> Vec<EdgeSet> {
        let mask: Bits = edges
            .iter()
            .filter_map(|e| self.edge_ids.get(e).copied())
            .collect::<Vec<u32>>()
            .into_iter()
            .fold(Bits::new(self.edge_names.len()), |mut b, i| {
                b.set(i);
                b
            });
        let ubits = self.verts_from_names(u);
        self.components_ids(&mask, &ubits)
            .into_iter()
            .map(|c| c.iter().map(|e| self.edge_names[e as usize].clone()).collect())
            .collect()
    }

    /// Component computation on interned ids; the engine-facing variant.
    pub(crate) fn components_ids(&self, edges: &Bits, u: &Bits) -> Vec<Bits> {
        let n_edges = self.edge_names.len();
        // Residual vertex sets e \ u; absorbed edges drop out.
        let mut residual: Vec<Option<Bits>> = vec![None; n_edges];
        for e in edges.iter() {
            let mut r = self.edge_verts[e as usize].clone();
            r.remove_all(u);
            if !r.is_empty() {
                residual[e as usize] = Some(r);
            }
        }
        let mut assigned = Bits::new(n_edges);
        let mut comps: Vec<Bits> = Vec::new();
        for start in edges.iter() {
            if assigned.get(start) || residual[start as usize].is_none() {
                continue;
            }
            let mut comp = Bits::new(n_edges);
            let mut frontier_verts = residual[start as usize].clone().unwrap();
            comp.set(start);
            assigned.set(start);
            loop {
                let mut grew = false;
                for e in edges.iter() {
                    if assigned.get(e) {
                        continue;
                    }
                    if let Some(r) = &residual[e as usize] {
                        if r.intersects(&frontier_verts) {
                            comp.set(e);
                            assigned.set(e);
                            frontier_verts.union_with(r);
                            grew = true;
                        }
                    }
                }
                if !grew {
                    break;
                }
            }
            comps.push(comp);
        }
        comps.sort_by(|a, b| {
            let na = &self.edge_names[a.first().unwrap() as usize];
            let nb = &self.edge_names[b.first().unwrap() as usize];
            na.cmp(nb)
        });
        comps
    }

    /// Ceil of average vertex degree and ceil of average edge rank.
    pub fn degree_and_rank_stats(&self) -> Result<(u64, u64), HypergraphError> {
        if self.is_empty() {
            return Err(HypergraphError::Empty);
        }
        // Sum of degrees equals sum of ranks; both count incidences.
        let incidences: u64 = self.edge_verts.iter().map(|e| e.count() as u64).sum();
        let avg_degree = incidences.div_ceil(self.vertex_names.len() as u64);
        let avg_rank = incidences.div_ceil(self.edge_names.len() as u64);
        Ok((avg_degree, avg_rank))
    }

    pub(crate) fn verts_to_names(&self, bits: &Bits) -> VertexSet {
        bits.iter()
            .map(|v| self.vertex_names[v as usize].clone())
            .collect()
    }

    /// Name set to vertex bits; names unknown to this hypergraph are ignored.
    pub(crate) fn verts_from_names(&self, names: &VertexSet) -> Bits {
        let mut bits = Bits::new(self.vertex_names.len());
        for n in names {
            if let Some(&id) = self.vertex_ids.get(n) {
                bits.set(id);
            }
        }
        bits
    }

    pub(crate) fn edge_bits(&self, id: u32) -> &Bits {
        &self.edge_verts[id as usize]
    }

    pub(crate) fn edge_name(&self, id: u32) -> &str {
        &self.edge_names[id as usize]
    }

    pub(crate) fn edge_id(&self, name: &str) -> Option<u32> {
        self.edge_ids.get(name).copied()
    }

    pub(crate) fn all_edges_bits(&self) -> Bits {
        let mut b = Bits::new(self.edge_names.len());
        for i in 0..self.edge_names.len() {
            b.set(i as u32);
        }
        b
    }

    /// Union of the vertex bits of the edges in `mask`.
    pub(crate) fn vertices_of_edges(&self, mask: &Bits) -> Bits {
        let mut b = Bits::new(self.vertex_names.len());
        for e in mask.iter() {
            b.union_with(&self.edge_verts[e as usize]);
        }
        b
    }
}

/// Result of [`Hypergraph::induced`]: the trimmed hypergraph plus, for each
/// kept edge name, the set of source edges that trim to it.
#[derive(Clone, Debug)]
pub struct InducedSubhypergraph {
    pub hypergraph: Hypergraph,
    pub provenance: BTreeMap<String, BTreeSet<String>>,
}
