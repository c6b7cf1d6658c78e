//! Width-bounded top-down search for generalized hypertree decompositions,
//! plus validation, normal-form checking and a slow exhaustive oracle.
//!
//! The search enumerates edge covers of size at most `k` directly
//! (det-k-decomp style): a candidate cover fixes the bag as the covered
//! vertices restricted to the current component plus its connector, the
//! remaining edges split into components, and each component is solved
//! recursively. Rejected (component, connector) pairs are memoized. The
//! search is complete over normal-form decompositions, which decide width.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::hypergraph::{EdgeSet, Hypergraph, VertexSet};
use crate::update::SceneMap;

/// One node of a decomposition: a bag of vertices and the edge cover whose
/// union contains the bag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhdNode {
    pub id: String,
    pub bag: VertexSet,
    pub cover: EdgeSet,
    #[serde(default)]
    pub children: Vec<GhdNode>,
}

/// A rooted generalized hypertree decomposition. `width` is the maximum
/// cover size over all nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ghd {
    pub width: usize,
    pub root: GhdNode,
}

impl Ghd {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("decomposition serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }

    /// Nodes in preorder.
    pub fn nodes(&self) -> Vec<&GhdNode> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in n.children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes().len()
    }

    pub fn max_cover_size(&self) -> usize {
        self.nodes().iter().map(|n| n.cover.len()).max().unwrap_or(0)
    }

    /// Renumbers node ids as `n1, n2, ...` in preorder and refreshes the
    /// stored width.
    pub fn renumber(&mut self) {
        fn walk(node: &mut GhdNode, next: &mut usize) {
            node.id = format!("n{next}");
            *next += 1;
            for c in &mut node.children {
                walk(c, next);
            }
        }
        let mut next = 1;
        walk(&mut self.root, &mut next);
        self.width = self.max_cover_size();
    }
}

/// Flat indexed view of a decomposition tree; shared by the validator, the
/// normal-form check and the update machinery.
pub(crate) struct FlatGhd<'g> {
    pub nodes: Vec<&'g GhdNode>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub index_of: HashMap<&'g str, usize>,
    /// Node indices in postorder (children before parents).
    pub postorder: Vec<usize>,
}

impl<'g> FlatGhd<'g> {
    pub fn new(ghd: &'g Ghd) -> Self {
        let mut flat = FlatGhd {
            nodes: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            index_of: HashMap::new(),
            postorder: Vec::new(),
        };
        fn walk<'g>(node: &'g GhdNode, parent: Option<usize>, flat: &mut FlatGhd<'g>) -> usize {
            let idx = flat.nodes.len();
            flat.nodes.push(node);
            flat.parent.push(parent);
            flat.children.push(Vec::new());
            flat.index_of.insert(node.id.as_str(), idx);
            for c in &node.children {
                let ci = walk(c, Some(idx), flat);
                flat.children[idx].push(ci);
            }
            flat.postorder.push(idx);
            idx
        }
        walk(&ghd.root, None, &mut flat);
        flat
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Undirected tree neighbors of node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent[i].into_iter().chain(self.children[i].iter().copied())
    }
}

/// A violated decomposition property, with its witness.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateNodeId { id: String },
    UnknownVertex { node: String, vertex: String },
    UnknownEdge { node: String, edge: String },
    /// Condition (1): some hypergraph edge fits in no bag.
    EdgeNotCovered { edge: String },
    /// Condition (2): the nodes containing a vertex are not connected.
    VertexDisconnected { vertex: String },
    /// Condition (3): a bag is not contained in the union of its cover.
    BagNotCovered { node: String, missing: Vec<String> },
    WidthExceeded { node: String, size: usize, bound: usize },
    WidthFieldMismatch { stored: usize, actual: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DuplicateNodeId { id } => write!(f, "duplicate node id `{id}`"),
            Violation::UnknownVertex { node, vertex } => {
                write!(f, "node `{node}` mentions unknown vertex `{vertex}`")
            }
            Violation::UnknownEdge { node, edge } => {
                write!(f, "node `{node}` mentions unknown edge `{edge}`")
            }
            Violation::EdgeNotCovered { edge } => {
                write!(f, "condition (1) violated: edge `{edge}` is contained in no bag")
            }
            Violation::VertexDisconnected { vertex } => write!(
                f,
                "condition (2) violated: nodes containing vertex `{vertex}` do not form a connected subtree"
            ),
            Violation::BagNotCovered { node, missing } => write!(
                f,
                "condition (3) violated: bag of node `{node}` has vertices outside its cover union: {missing:?}"
            ),
            Violation::WidthExceeded { node, size, bound } => {
                write!(f, "width violation: node `{node}` has cover size {size}, bound is {bound}")
            }
            Violation::WidthFieldMismatch { stored, actual } => {
                write!(f, "stored width {stored} does not match actual width {actual}")
            }
        }
    }
}

/// Checks the three decomposition conditions plus the width bound.
/// An empty result means the decomposition is valid for `h` at width `k`.
pub fn validate(h: &Hypergraph, ghd: &Ghd, k: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let flat = FlatGhd::new(ghd);

    let mut seen_ids: HashSet<&str> = HashSet::new();
    for n in &flat.nodes {
        if !seen_ids.insert(n.id.as_str()) {
            out.push(Violation::DuplicateNodeId { id: n.id.clone() });
        }
    }

    let mut structural = false;
    for n in &flat.nodes {
        for v in &n.bag {
            if !h.has_vertex(v) {
                out.push(Violation::UnknownVertex {
                    node: n.id.clone(),
                    vertex: v.clone(),
                });
                structural = true;
            }
        }
        for e in &n.cover {
            if !h.has_edge(e) {
                out.push(Violation::UnknownEdge {
                    node: n.id.clone(),
                    edge: e.clone(),
                });
                structural = true;
            }
        }
    }
    if structural {
        return out;
    }

    let bag_bits: Vec<Bits> = flat.nodes.iter().map(|n| h.verts_from_names(&n.bag)).collect();

    // Condition (1): every edge inside some bag.
    for (name, _) in h.edges() {
        let e = h.edge_bits(h.edge_id(name).expect("known edge"));
        if !bag_bits.iter().any(|b| e.is_subset_of(b)) {
            out.push(Violation::EdgeNotCovered { edge: name.to_string() });
        }
    }

    // Condition (2): per-vertex connected subtree.
    for vertex in h.vertex_names() {
        let holders: Vec<usize> = flat
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.bag.contains(vertex))
            .map(|(i, _)| i)
            .collect();
        if holders.len() <= 1 {
            continue;
        }
        let holder_set: HashSet<usize> = holders.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut stack = vec![holders[0]];
        seen.insert(holders[0]);
        while let Some(i) = stack.pop() {
            for nb in flat.neighbors(i) {
                if holder_set.contains(&nb) && seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        if seen.len() != holders.len() {
            out.push(Violation::VertexDisconnected {
                vertex: vertex.to_string(),
            });
        }
    }

    // Condition (3) and the width bound.
    for (i, n) in flat.nodes.iter().enumerate() {
        let cover_names: EdgeSet = n.cover.clone();
        let covered = h.cover_union(&cover_names).expect("names checked above");
        let covered_bits = h.verts_from_names(&covered);
        if !bag_bits[i].is_subset_of(&covered_bits) {
            let missing: Vec<String> = n.bag.iter().filter(|v| !covered.contains(*v)).cloned().collect();
            out.push(Violation::BagNotCovered {
                node: n.id.clone(),
                missing,
            });
        }
        if n.cover.len() > k {
            out.push(Violation::WidthExceeded {
                node: n.id.clone(),
                size: n.cover.len(),
                bound: k,
            });
        }
    }

    let actual = ghd.max_cover_size();
    if ghd.width != actual {
        out.push(Violation::WidthFieldMismatch {
            stored: ghd.width,
            actual,
        });
    }

    out
}

/// True when, at every node, the components of the edges covered in its
/// subtree (split by the node's bag) correspond one-to-one with the node's
/// children, each covered in a separate child subtree.
///
/// The input is expected to be a valid decomposition of `h`.
pub fn is_normal_form(h: &Hypergraph, ghd: &Ghd) -> bool {
    let flat = FlatGhd::new(ghd);
    let n = flat.len();
    let bag_bits: Vec<Bits> = flat.nodes.iter().map(|nd| h.verts_from_names(&nd.bag)).collect();

    // covered[i]: edges contained in some bag of the subtree rooted at i.
    let mut covered: Vec<Bits> = vec![Bits::new(h.n_edges()); n];
    for &i in &flat.postorder {
        let mut cov = Bits::new(h.n_edges());
        for e in 0..h.n_edges() as u32 {
            if h.edge_bits(e).is_subset_of(&bag_bits[i]) {
                cov.set(e);
            }
        }
        for &c in &flat.children[i] {
            let child_cov = covered[c].clone();
            cov.union_with(&child_cov);
        }
        covered[i] = cov;
    }

    for i in 0..n {
        let comps = h.components_ids(&covered[i], &bag_bits[i]);
        if comps.len() != flat.children[i].len() {
            return false;
        }
        // Perfect matching: each component fully covered in a distinct child.
        let kids = &flat.children[i];
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        for comp in &comps {
            let fits: Vec<usize> = (0..kids.len())
                .filter(|&j| comp.is_subset_of(&covered[kids[j]]))
                .collect();
            if fits.is_empty() {
                return false;
            }
            candidates.push(fits);
        }
        if !has_perfect_matching(&candidates, kids.len()) {
            return false;
        }
    }
    true
}

fn has_perfect_matching(candidates: &[Vec<usize>], n_slots: usize) -> bool {
    fn assign(candidates: &[Vec<usize>], i: usize, used: &mut Vec<bool>) -> bool {
        if i == candidates.len() {
            return true;
        }
        for &slot in &candidates[i] {
            if !used[slot] {
                used[slot] = true;
                if assign(candidates, i + 1, used) {
                    return true;
                }
                used[slot] = false;
            }
        }
        false
    }
    let mut used = vec![false; n_slots];
    assign(candidates, 0, &mut used)
}

#[derive(Debug, Error, PartialEq)]
pub enum DecomposeError {
    #[error("width bound must be at least 1")]
    InvalidWidth,
    #[error("cannot decompose an empty hypergraph")]
    EmptyHypergraph,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle limited to {limit} edges, instance has {edges}")]
    TooLarge { edges: usize, limit: usize },
    #[error("cannot decompose an empty hypergraph")]
    Empty,
}

/// Outcome of a width-bounded construction attempt.
#[derive(Clone, Debug)]
pub enum DecomposeOutcome {
    Found(Ghd),
    Reject,
    TimedOut,
}

impl DecomposeOutcome {
    pub fn found(&self) -> Option<&Ghd> {
        match self {
            DecomposeOutcome::Found(g) => Some(g),
            _ => None,
        }
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, DecomposeOutcome::Reject)
    }

    pub fn is_timeout(&self) -> bool {
        matches!(self, DecomposeOutcome::TimedOut)
    }
}

/// Search effort counters, also used to compare engines in the benchmark
/// harness.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SearchStats {
    /// Cover candidates examined.
    pub separators_tried: u64,
    /// Component computations performed by the search.
    pub components_computed: u64,
    /// Entries into the enumerative search (as opposed to scene reuse).
    pub search_calls: u64,
    /// Subproblems solved by reusing a mapped scene.
    pub scene_hits: u64,
}

#[derive(Debug)]
pub struct Decomposition {
    pub outcome: DecomposeOutcome,
    pub stats: SearchStats,
}

/// Computes a width-`k` decomposition of `h`, or rejects when none exists.
pub fn decompose(h: &Hypergraph, k: usize) -> Result<Decomposition, DecomposeError> {
    decompose_with_deadline(h, k, None)
}

/// As [`decompose`], stopping with [`DecomposeOutcome::TimedOut`] once
/// `deadline` passes. The deadline is checked cooperatively per candidate.
pub fn decompose_with_deadline(
    h: &Hypergraph,
    k: usize,
    deadline: Option<Instant>,
) -> Result<Decomposition, DecomposeError> {
    if k == 0 {
        return Err(DecomposeError::InvalidWidth);
    }
    if h.is_empty() {
        return Err(DecomposeError::EmptyHypergraph);
    }
    let mut engine = Engine::new(h, k, deadline);
    let outcome = engine.run();
    Ok(Decomposition {
        outcome,
        stats: engine.stats,
    })
}

pub(crate) struct TimedOut;

/// The recursive construction engine. One engine instance serves a single
/// top-level call; memoized rejections are scoped to it.
pub(crate) struct Engine<'h> {
    h: &'h Hypergraph,
    k: usize,
    deadline: Option<Instant>,
    memo: HashSet<(Bits, Bits)>,
    pub scenes: Option<SceneMap>,
    pub stats: SearchStats,
}

pub(crate) struct RawNode {
    bag: Bits,
    cover: Vec<u32>,
    children: Vec<RawNode>,
}

impl<'h> Engine<'h> {
    pub fn new(h: &'h Hypergraph, k: usize, deadline: Option<Instant>) -> Self {
        Engine {
            h,
            k,
            deadline,
            memo: HashSet::new(),
            scenes: None,
            stats: SearchStats::default(),
        }
    }

    pub fn with_scenes(mut self, scenes: SceneMap) -> Self {
        self.scenes = Some(scenes);
        self
    }

    pub fn run(&mut self) -> DecomposeOutcome {
        let all = self.h.all_edges_bits();
        let conn = Bits::new(self.h.n_vertices());
        match self.find(&all, &conn) {
            Err(TimedOut) => DecomposeOutcome::TimedOut,
            Ok(None) => DecomposeOutcome::Reject,
            Ok(Some(raw)) => {
                let mut ghd = self.finish(raw);
                ghd.renumber();
                DecomposeOutcome::Found(ghd)
            }
        }
    }

    fn finish(&self, raw: RawNode) -> Ghd {
        fn build(h: &Hypergraph, raw: RawNode) -> GhdNode {
            GhdNode {
                id: String::new(),
                bag: h.verts_to_names(&raw.bag),
                cover: raw
                    .cover
                    .iter()
                    .map(|e| h.edge_name(*e).to_string())
                    .collect(),
                children: raw.children.into_iter().map(|c| build(h, c)).collect(),
            }
        }
        let root = build(self.h, raw);
        Ghd { width: 0, root }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Solves one subproblem: the edges of `comp` must be covered in the
    /// returned subtree and the root bag must contain `conn`, the vertices
    /// shared with the parent bag.
    pub(crate) fn find(&mut self, comp: &Bits, conn: &Bits) -> Result<Option<RawNode>, TimedOut> {
        if self.memo.contains(&(comp.clone(), conn.clone())) {
            return Ok(None);
        }
        if let Some(node) = self.try_scene(comp, conn)? {
            return Ok(Some(node));
        }
        self.search(comp, conn)
    }

    /// Reuses a mapped scene for this exact subproblem when one is
    /// available. Failure is not final: the caller falls back to the
    /// enumerative search.
    fn try_scene(&mut self, comp: &Bits, conn: &Bits) -> Result<Option<RawNode>, TimedOut> {
        if self.scenes.is_none() {
            return Ok(None);
        }
        if self.expired() {
            return Err(TimedOut);
        }
        let mut key: Vec<String> = comp.iter().map(|e| self.h.edge_name(e).to_string()).collect();
        key.sort();
        let Some(entry) = self.scenes.as_mut().unwrap().lookup(&key) else {
            return Ok(None);
        };

        let cover_ids: Vec<u32> = entry
            .cover
            .iter()
            .filter_map(|e| self.h.edge_id(e))
            .collect();
        if cover_ids.is_empty() || cover_ids.len() > self.k {
            self.scenes.as_mut().unwrap().kill(&key);
            return Ok(None);
        }
        // The recorded bag drives the component split so that sub-keys line
        // up with the scene mapping; the emitted bag is shrunk to what the
        // surviving cover can still span.
        let replay_bag = self.h.verts_from_names(&entry.bag);
        let mut covered = Bits::new(self.h.n_vertices());
        for &e in &cover_ids {
            covered.union_with(self.h.edge_bits(e));
        }
        let mut out_bag = replay_bag.clone();
        out_bag.intersect_with(&covered);
        if out_bag.is_empty() || !conn.is_subset_of(&out_bag) {
            self.scenes.as_mut().unwrap().kill(&key);
            return Ok(None);
        }
        let comps = self.h.components_ids(comp, &replay_bag);
        self.stats.components_computed += 1;
        if comps.iter().any(|c| c == comp) {
            self.scenes.as_mut().unwrap().kill(&key);
            return Ok(None);
        }
        let mut children = Vec::with_capacity(comps.len());
        for c in &comps {
            let mut child_conn = out_bag.clone();
            child_conn.intersect_with(&self.h.vertices_of_edges(c));
            match self.find(c, &child_conn)? {
                Some(node) => children.push(node),
                None => {
                    self.scenes.as_mut().unwrap().kill(&key);
                    return Ok(None);
                }
            }
        }
        self.stats.scene_hits += 1;
        Ok(Some(RawNode {
            bag: out_bag,
            cover: cover_ids,
            children,
        }))
    }

    fn search(&mut self, comp: &Bits, conn: &Bits) -> Result<Option<RawNode>, TimedOut> {
        if self.memo.contains(&(comp.clone(), conn.clone())) {
            return Ok(None);
        }
        self.stats.search_calls += 1;
        let comp_verts = self.h.vertices_of_edges(comp);
        let mut scope = comp_verts;
        scope.union_with(conn);

        let m = self.h.n_edges() as u32;
        'candidates: for cover in separator_candidates(m, self.k) {
            if self.expired() {
                return Err(TimedOut);
            }
            self.stats.separators_tried += 1;
            let mut covered = Bits::new(self.h.n_vertices());
            for &e in &cover {
                covered.union_with(self.h.edge_bits(e));
            }
            if !conn.is_subset_of(&covered) {
                continue;
            }
            let mut bag = covered;
            bag.intersect_with(&scope);
            let comps = self.h.components_ids(comp, &bag);
            self.stats.components_computed += 1;
            // Termination: every component must shrink strictly.
            if comps.iter().any(|c| c == comp) {
                continue;
            }
            let mut children = Vec::with_capacity(comps.len());
            for c in &comps {
                let mut child_conn = bag.clone();
                child_conn.intersect_with(&self.h.vertices_of_edges(c));
                match self.find(c, &child_conn)? {
                    Some(node) => children.push(node),
                    None => continue 'candidates,
                }
            }
            return Ok(Some(RawNode {
                bag,
                cover,
                children,
            }));
        }
        self.memo.insert((comp.clone(), conn.clone()));
        Ok(None)
    }
}

/// Cover candidates over edge indices `0..m`: size-ascending, and in
/// lexicographic index order within each size.
fn separator_candidates(m: u32, k: usize) -> impl Iterator<Item = Vec<u32>> {
    (1..=k).flat_map(move |size| (0..m).combinations(size))
}

/// All admissible (cover, bag) candidates for a subproblem, in the order
/// the search tries them: every cover of size 1..=k whose union contains
/// `connector`, paired with the bag it induces on the component.
pub fn enumerate_separators<'h>(
    h: &'h Hypergraph,
    component: &EdgeSet,
    connector: &VertexSet,
    k: usize,
) -> impl Iterator<Item = (EdgeSet, VertexSet)> + 'h {
    let comp_bits: Bits = component
        .iter()
        .filter_map(|e| h.edge_id(e))
        .fold(Bits::new(h.n_edges()), |mut b, i| {
            b.set(i);
            b
        });
    let conn_bits = h.verts_from_names(connector);
    let mut scope = h.vertices_of_edges(&comp_bits);
    scope.union_with(&conn_bits);
    separator_candidates(h.n_edges() as u32, k).filter_map(move |cover| {
        let mut covered = Bits::new(h.n_vertices());
        for &e in &cover {
            covered.union_with(h.edge_bits(e));
        }
        if !conn_bits.is_subset_of(&covered) {
            return None;
        }
        let mut bag = covered;
        bag.intersect_with(&scope);
        let cover_names: EdgeSet = cover.iter().map(|e| h.edge_name(*e).to_string()).collect();
        Some((cover_names, h.verts_to_names(&bag)))
    })
}

const ORACLE_EDGE_LIMIT: usize = 10;

/// Exact generalized hypertree width by iterative deepening over an
/// exhaustive recursive component-splitting enumeration, without
/// memoization or candidate ordering. Deliberately independent of the
/// engine above; guarded to small instances.
pub fn ghw_oracle(h: &Hypergraph) -> Result<usize, OracleError> {
    if h.is_empty() {
        return Err(OracleError::Empty);
    }
    if h.n_edges() > ORACLE_EDGE_LIMIT {
        return Err(OracleError::TooLarge {
            edges: h.n_edges(),
            limit: ORACLE_EDGE_LIMIT,
        });
    }
    let all = h.all_edges_bits();
    let conn = Bits::new(h.n_vertices());
    for k in 1..=h.n_edges() {
        if oracle_feasible(h, &all, &conn, k) {
            return Ok(k);
        }
    }
    unreachable!("a single node covering all edges always succeeds at k = |E|")
}

fn oracle_feasible(h: &Hypergraph, comp: &Bits, conn: &Bits, k: usize) -> bool {
    let m = h.n_edges();
    let mut scope = h.vertices_of_edges(comp);
    scope.union_with(conn);
    'masks: for mask in 1u32..(1u32 << m) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let mut covered = Bits::new(h.n_vertices());
        for e in 0..m as u32 {
            if mask & (1 << e) != 0 {
                covered.union_with(h.edge_bits(e));
            }
        }
        if !conn.is_subset_of(&covered) {
            continue;
        }
        let mut bag = covered;
        bag.intersect_with(&scope);
        let comps = h.components_ids(comp, &bag);
        if comps.iter().any(|c| c == comp) {
            continue;
        }
        for c in &comps {
            let mut child_conn = bag.clone();
            child_conn.intersect_with(&h.vertices_of_edges(c));
            if !oracle_feasible(h, c, &child_conn, k) {
                continue 'masks;
            }
        }
        return true;
    }
    false
}
