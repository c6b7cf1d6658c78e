//! Incremental decomposition updates.
//!
//! Given a decomposition of a hypergraph and a modified hypergraph, the
//! machinery here identifies the minimal mutable subtree (the region of the
//! old tree whose surroundings the modification actually changed), derives
//! the bag constraints its neighbors impose on any replacement, and builds
//! a scene mapping that lets the search engine reuse old nodes for
//! subproblems it has effectively seen before. The driver wraps the
//! decomposer so that reuse failures always fall back to a complete search.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::bits::Bits;
use crate::decompose::{
    validate, DecomposeError, DecomposeOutcome, Engine, FlatGhd, Ghd, GhdNode, SearchStats,
    Violation,
};
use crate::hypergraph::{EdgeSet, Hypergraph, VertexSet};
use crate::modify::{apply, delvar_fast_path, EdgeCorrespondence, Modification, ModifyError};

/// A connected set of old-tree node ids outside of which the hypergraph is
/// structurally unchanged by the modification. May be empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MutableSubtree {
    pub node_ids: BTreeSet<String>,
}

impl MutableSubtree {
    pub fn empty() -> Self {
        MutableSubtree {
            node_ids: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.node_ids.contains(id)
    }

    /// The trees of the forest obtained by removing these nodes, as id sets.
    pub fn outer_trees(&self, ghd: &Ghd) -> Vec<BTreeSet<String>> {
        let flat = FlatGhd::new(ghd);
        let outside: Vec<usize> = (0..flat.len())
            .filter(|&i| !self.contains(&flat.nodes[i].id))
            .collect();
        let outside_set: HashSet<usize> = outside.iter().copied().collect();
        let mut seen: HashSet<usize> = HashSet::new();
        let mut trees = Vec::new();
        for &start in &outside {
            if seen.contains(&start) {
                continue;
            }
            let mut tree = BTreeSet::new();
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(i) = stack.pop() {
                tree.insert(flat.nodes[i].id.clone());
                for nb in flat.neighbors(i) {
                    if outside_set.contains(&nb) && seen.insert(nb) {
                        stack.push(nb);
                    }
                }
            }
            trees.push(tree);
        }
        trees
    }
}

/// A vertex set some bag of a replacement decomposition must contain,
/// anchored at the outer node that induced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BagConstraint {
    pub vertices: VertexSet,
    pub anchor: String,
}

/// Precomputed data for the region-unchanged check of the mutable-subtree
/// conditions.
struct RegionChecker {
    /// Per old edge: its vertices and its successor's vertices, both in
    /// the old hypergraph's id space (new-only vertices cannot occur in a
    /// region, which consists of old bags).
    edge_pairs: Vec<(Bits, Bits)>,
    /// New edges without an old counterpart, in old vertex ids.
    fresh_edges: Vec<Bits>,
    /// Per new edge: does it contain a vertex absent from the old
    /// hypergraph, and its old-id vertex bits.
    adjacency: Vec<(bool, Bits)>,
}

impl RegionChecker {
    fn new(old_h: &Hypergraph, new_h: &Hypergraph, corr: &EdgeCorrespondence) -> Self {
        let to_old_bits = |verts: &VertexSet| -> Bits {
            // Unknown (genuinely new) vertices are dropped; they are
            // handled separately by the adjacency condition.
            old_h.verts_from_names(verts)
        };
        let mut edge_pairs = Vec::with_capacity(old_h.n_edges());
        let mut image_names: HashSet<String> = HashSet::new();
        for (name, verts) in old_h.edges() {
            let old_bits = to_old_bits(&verts);
            let new_bits = match corr.image(name) {
                Some(img) => {
                    image_names.insert(img.to_string());
                    new_h
                        .edge_vertices(img)
                        .map(|vs| to_old_bits(&vs))
                        .unwrap_or_default()
                }
                None => Bits::new(0),
            };
            edge_pairs.push((old_bits, new_bits));
        }
        let mut fresh_edges = Vec::new();
        let mut adjacency = Vec::new();
        for (name, verts) in new_h.edges() {
            let has_new_vertex = verts.iter().any(|v| !old_h.has_vertex(v));
            let bits = to_old_bits(&verts);
            if !image_names.contains(name) {
                fresh_edges.push(bits.clone());
            }
            adjacency.push((has_new_vertex, bits));
        }
        RegionChecker {
            edge_pairs,
            fresh_edges,
            adjacency,
        }
    }

    /// The modification is invisible on `region` (old vertex ids) when
    /// every old edge trims to the same set as its successor, no edge
    /// without a counterpart touches the region, and no edge carrying a
    /// genuinely new vertex touches the region.
    fn unchanged_on(&self, region: &Bits) -> bool {
        for (old_bits, new_bits) in &self.edge_pairs {
            let mut a = old_bits.clone();
            a.intersect_with(region);
            let mut b = new_bits.clone();
            b.intersect_with(region);
            if a != b {
                return false;
            }
        }
        for bits in &self.fresh_edges {
            if bits.intersects(region) {
                return false;
            }
        }
        for (has_new_vertex, bits) in &self.adjacency {
            if *has_new_vertex && bits.intersects(region) {
                return false;
            }
        }
        true
    }
}

/// Computes the unique minimal mutable subtree of `ghd` for the change
/// from `old_h` to `new_h` with edge correspondence `corr`, by greedily
/// removing leaves of the working subtree while the defining conditions
/// still hold. Deterministic postorder removal; the result itself is
/// order-independent.
pub fn minimal_mutable_subtree(
    ghd: &Ghd,
    old_h: &Hypergraph,
    new_h: &Hypergraph,
    corr: &EdgeCorrespondence,
) -> MutableSubtree {
    let flat = FlatGhd::new(ghd);
    let n = flat.len();
    let checker = RegionChecker::new(old_h, new_h, corr);
    let bag_bits: Vec<Bits> = flat
        .nodes
        .iter()
        .map(|nd| old_h.verts_from_names(&nd.bag))
        .collect();

    let region_of = |in_tree: &[bool]| -> Bits {
        let mut region = Bits::new(old_h.n_vertices());
        for i in 0..n {
            if !in_tree[i] {
                region.union_with(&bag_bits[i]);
            }
        }
        region
    };

    let mut in_tree = vec![true; n];
    let mut size = n;
    'outer: loop {
        for &u in &flat.postorder {
            if !in_tree[u] {
                continue;
            }
            let degree = flat.neighbors(u).filter(|nb| in_tree[*nb]).count();
            if size > 1 && degree > 1 {
                continue;
            }
            in_tree[u] = false;
            if checker.unchanged_on(&region_of(&in_tree)) {
                size -= 1;
                if size == 0 {
                    break 'outer;
                }
                continue 'outer;
            }
            in_tree[u] = true;
        }
        break;
    }

    MutableSubtree {
        node_ids: (0..n)
            .filter(|&i| in_tree[i])
            .map(|i| flat.nodes[i].id.clone())
            .collect(),
    }
}

/// One constraint per outer node adjacent to the mutable subtree: its bag
/// intersected with the union of the subtree's bags. Sorted by anchor id.
pub fn induced_bag_constraints(ghd: &Ghd, t_star: &MutableSubtree) -> Vec<BagConstraint> {
    let flat = FlatGhd::new(ghd);
    let star: Vec<bool> = (0..flat.len())
        .map(|i| t_star.contains(&flat.nodes[i].id))
        .collect();
    let mut star_bags = VertexSet::new();
    for (i, node) in flat.nodes.iter().enumerate() {
        if star[i] {
            star_bags.extend(node.bag.iter().cloned());
        }
    }
    let mut out = Vec::new();
    for i in 0..flat.len() {
        if star[i] || !flat.neighbors(i).any(|nb| star[nb]) {
            continue;
        }
        let vertices: VertexSet = flat.nodes[i]
            .bag
            .intersection(&star_bags)
            .cloned()
            .collect();
        out.push(BagConstraint {
            vertices,
            anchor: flat.nodes[i].id.clone(),
        });
    }
    out.sort_by(|a, b| a.anchor.cmp(&b.anchor));
    out
}

/// True when every constraint is contained in some bag of `ghd`.
pub fn check_bag_constraints(ghd: &Ghd, constraints: &[BagConstraint]) -> bool {
    let nodes = ghd.nodes();
    constraints.iter().all(|c| {
        nodes
            .iter()
            .any(|n| c.vertices.iter().all(|v| n.bag.contains(v)))
    })
}

/// The edges of the modified hypergraph that no bag outside the mutable
/// subtree covers; the part that a replacement decomposition must handle.
pub fn delta_star_edges(ghd: &Ghd, t_star: &MutableSubtree, new_h: &Hypergraph) -> EdgeSet {
    let flat = FlatGhd::new(ghd);
    let outer_bags: Vec<Bits> = (0..flat.len())
        .filter(|&i| !t_star.contains(&flat.nodes[i].id))
        .map(|i| new_h.verts_from_names(&flat.nodes[i].bag))
        .collect();
    let mut out = EdgeSet::new();
    for e in 0..new_h.n_edges() as u32 {
        let bits = new_h.edge_bits(e);
        if !outer_bags.iter().any(|b| bits.is_subset_of(b)) {
            out.insert(new_h.edge_name(e).to_string());
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum AttachError {
    #[error("a bag constraint (anchor `{anchor}`) is satisfied by no node of the replacement")]
    ConstraintUnsatisfied { anchor: String },
    #[error("cover edge `{edge}` of a reused node has no surviving counterpart")]
    CoverRepairFailed { edge: String },
    #[error("constraint anchor `{anchor}` is not a node of the old decomposition")]
    UnknownAnchor { anchor: String },
}

/// Grafts the outer trees of `ghd` onto a replacement decomposition of the
/// mutable region. Each outer tree is rerooted at its anchor and attached
/// to a node whose bag satisfies the anchor's constraint; covers of reused
/// nodes are rewritten to surviving edges, substituting an edge with the
/// same trim on the outer region when one was deleted.
pub fn attach_outer_trees(
    g_star: &Ghd,
    ghd: &Ghd,
    t_star: &MutableSubtree,
    constraints: &[BagConstraint],
    old_h: &Hypergraph,
    new_h: &Hypergraph,
    corr: &EdgeCorrespondence,
) -> Result<Ghd, AttachError> {
    if t_star.is_empty() {
        return Ok(ghd.clone());
    }
    if let Some(c) = constraints.iter().find(|c| !check_bag_constraints(g_star, std::slice::from_ref(c))) {
        return Err(AttachError::ConstraintUnsatisfied {
            anchor: c.anchor.clone(),
        });
    }

    let flat = FlatGhd::new(ghd);
    let outside: HashSet<usize> = (0..flat.len())
        .filter(|&i| !t_star.contains(&flat.nodes[i].id))
        .collect();
    let outer_region: VertexSet = outside
        .iter()
        .flat_map(|&i| flat.nodes[i].bag.iter().cloned())
        .collect();

    let repair_cover = |cover: &EdgeSet| -> Result<EdgeSet, AttachError> {
        let mut out = EdgeSet::new();
        for e in cover {
            if let Some(img) = corr.image(e) {
                out.insert(img.to_string());
                continue;
            }
            let trim: VertexSet = old_h
                .edge_vertices(e)
                .map(|vs| vs.intersection(&outer_region).cloned().collect())
                .unwrap_or_default();
            if trim.is_empty() {
                continue;
            }
            // The unchanged region guarantees an edge with the same trim.
            let substitute = new_h
                .edges()
                .find(|(_, vs)| {
                    vs.intersection(&outer_region).cloned().collect::<VertexSet>() == trim
                })
                .map(|(name, _)| name.to_string());
            match substitute {
                Some(name) => {
                    out.insert(name);
                }
                None => return Err(AttachError::CoverRepairFailed { edge: e.clone() }),
            }
        }
        Ok(out)
    };

    // Reroot one outer tree at its anchor.
    fn build_rerooted(
        flat: &FlatGhd,
        tree: &HashSet<usize>,
        at: usize,
        from: Option<usize>,
        repair: &dyn Fn(&EdgeSet) -> Result<EdgeSet, AttachError>,
    ) -> Result<GhdNode, AttachError> {
        let node = flat.nodes[at];
        let mut children = Vec::new();
        for nb in flat.neighbors(at) {
            if Some(nb) != from && tree.contains(&nb) {
                children.push(build_rerooted(flat, tree, nb, Some(at), repair)?);
            }
        }
        Ok(GhdNode {
            id: node.id.clone(),
            bag: node.bag.clone(),
            cover: repair(&node.cover)?,
            children,
        })
    }

    let mut result = g_star.clone();
    for constraint in constraints {
        let Some(&anchor_idx) = flat.index_of.get(constraint.anchor.as_str()) else {
            return Err(AttachError::UnknownAnchor {
                anchor: constraint.anchor.clone(),
            });
        };
        // Collect the outer tree containing the anchor.
        let mut tree: HashSet<usize> = HashSet::new();
        let mut stack = vec![anchor_idx];
        tree.insert(anchor_idx);
        while let Some(i) = stack.pop() {
            for nb in flat.neighbors(i) {
                if outside.contains(&nb) && tree.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        let subtree = build_rerooted(&flat, &tree, anchor_idx, None, &repair_cover)?;

        // Attach at the first node (preorder) satisfying the constraint.
        fn attach(node: &mut GhdNode, constraint: &BagConstraint, subtree: &GhdNode) -> bool {
            if constraint.vertices.iter().all(|v| node.bag.contains(v)) {
                node.children.push(subtree.clone());
                return true;
            }
            node.children
                .iter_mut()
                .any(|c| attach(c, constraint, subtree))
        }
        if !attach(&mut result.root, constraint, &subtree) {
            return Err(AttachError::ConstraintUnsatisfied {
                anchor: constraint.anchor.clone(),
            });
        }
    }
    result.renumber();
    Ok(result)
}

/// Whether a mapped scene sits inside the mutable subtree (or above it on
/// the path from the root). In-scenes are offered to the search at most
/// once; out-scenes describe genuinely unchanged subtrees and stay
/// available.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneKind {
    InScene,
    OutScene,
}

#[derive(Clone, Debug)]
pub struct SceneEntry {
    pub node_id: String,
    /// The node's bag translated to surviving vertices (not yet shrunk to
    /// what the surviving cover spans; the engine does that at use time).
    pub bag: VertexSet,
    /// The node's cover translated to surviving edges.
    pub cover: EdgeSet,
    pub kind: SceneKind,
}

struct Slot {
    entry: SceneEntry,
    dead: bool,
}

/// Partial map from canonical subgraph keys (sorted edge-name sets of the
/// modified hypergraph) to reusable old nodes.
#[derive(Default)]
pub struct SceneMap {
    slots: HashMap<Vec<String>, Slot>,
    /// Component computations spent building this map.
    pub components_computed: u64,
}

impl SceneMap {
    pub fn new() -> Self {
        SceneMap::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[String], &SceneEntry)> {
        self.slots.iter().map(|(k, s)| (k.as_slice(), &s.entry))
    }

    pub fn get(&self, key: &[String]) -> Option<&SceneEntry> {
        self.slots.get(key).map(|s| &s.entry)
    }

    fn insert(&mut self, key: Vec<String>, entry: SceneEntry) {
        self.slots.entry(key).or_insert(Slot { entry, dead: false });
    }

    /// Stateful lookup: an in-scene is reported as defined only once.
    pub(crate) fn lookup(&mut self, key: &[String]) -> Option<SceneEntry> {
        let slot = self.slots.get_mut(key)?;
        if slot.dead {
            return None;
        }
        if slot.entry.kind == SceneKind::InScene {
            slot.dead = true;
        }
        Some(slot.entry.clone())
    }

    /// Marks a scene whose reuse failed; it would fail the same way again.
    pub(crate) fn kill(&mut self, key: &[String]) {
        if let Some(slot) = self.slots.get_mut(key) {
            slot.dead = true;
        }
    }
}

/// Builds the scene mapping by replaying the old decomposition against the
/// modified hypergraph.
///
/// The downward phase walks the tree top-down, splitting the current
/// subgraph by each node's (translated) bag; while the components pair off
/// one-to-one with the children, every visited node is mapped. Where the
/// replay breaks at a non-leaf, the subtree switches to the upward phase,
/// which maps each node fully outside the mutable subtree to the edges
/// covered within its subtree, again requiring matching component counts.
///
/// At most `2 * |nodes|` component computations are spent in total.
pub fn scene_creation(
    ghd: &Ghd,
    new_h: &Hypergraph,
    t_star: &MutableSubtree,
    corr: &EdgeCorrespondence,
) -> SceneMap {
    let flat = FlatGhd::new(ghd);
    let n = flat.len();
    let star: Vec<bool> = (0..n)
        .map(|i| t_star.contains(&flat.nodes[i].id))
        .collect();
    let mut touches = vec![false; n];
    for &i in &flat.postorder {
        touches[i] = star[i] || flat.children[i].iter().any(|&c| touches[c]);
    }

    // Per node: bag and cover translated to the modified hypergraph.
    let bags_new: Vec<VertexSet> = flat
        .nodes
        .iter()
        .map(|nd| nd.bag.iter().filter(|v| new_h.has_vertex(v)).cloned().collect())
        .collect();
    let bag_bits: Vec<Bits> = bags_new.iter().map(|b| new_h.verts_from_names(b)).collect();
    let covers_new: Vec<EdgeSet> = flat.nodes.iter().map(|nd| corr.translate(&nd.cover)).collect();

    struct Builder<'a> {
        flat: &'a FlatGhd<'a>,
        new_h: &'a Hypergraph,
        touches: &'a [bool],
        bags_new: &'a [VertexSet],
        bag_bits: &'a [Bits],
        covers_new: &'a [EdgeSet],
        map: SceneMap,
    }

    impl Builder<'_> {
        fn key(&self, comp: &Bits) -> Vec<String> {
            let mut key: Vec<String> = comp
                .iter()
                .map(|e| self.new_h.edge_name(e).to_string())
                .collect();
            key.sort();
            key
        }

        fn entry(&self, i: usize, kind: SceneKind) -> SceneEntry {
            SceneEntry {
                node_id: self.flat.nodes[i].id.clone(),
                bag: self.bags_new[i].clone(),
                cover: self.covers_new[i].clone(),
                kind,
            }
        }

        fn down(&mut self, i: usize, comp: &Bits) {
            let comps = self.new_h.components_ids(comp, &self.bag_bits[i]);
            self.map.components_computed += 1;
            let kids = &self.flat.children[i];
            if comps.len() != kids.len() {
                self.up(i, comp);
                return;
            }
            // First-fit pairing of children with the components they cover.
            let mut claimed = vec![false; comps.len()];
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            'children: for &child in kids {
                for (ci, c) in comps.iter().enumerate() {
                    if claimed[ci] {
                        continue;
                    }
                    let mut beyond = self.new_h.vertices_of_edges(c);
                    beyond.remove_all(&self.bag_bits[i]);
                    if beyond.intersects(&self.bag_bits[child]) {
                        claimed[ci] = true;
                        pairs.push((child, ci));
                        continue 'children;
                    }
                }
                self.up(i, comp);
                return;
            }
            let kind = if self.touches[i] {
                SceneKind::InScene
            } else {
                SceneKind::OutScene
            };
            self.map.insert(self.key(comp), self.entry(i, kind));
            for (child, ci) in pairs {
                self.down(child, &comps[ci]);
            }
        }

        /// Returns the edges of `comp` covered within the subtree at `i`.
        fn up(&mut self, i: usize, comp: &Bits) -> Bits {
            let mut covered = Bits::new(self.new_h.n_edges());
            for &child in &self.flat.children[i] {
                let c = self.up(child, comp);
                covered.union_with(&c);
            }
            if !self.touches[i] {
                for e in comp.iter() {
                    if self.new_h.edge_bits(e).is_subset_of(&self.bag_bits[i]) {
                        covered.set(e);
                    }
                }
                let comps = self.new_h.components_ids(&covered, &self.bag_bits[i]);
                self.map.components_computed += 1;
                if comps.len() == self.flat.children[i].len() && !covered.is_empty() {
                    self.map
                        .insert(self.key(&covered), self.entry(i, SceneKind::OutScene));
                }
            }
            covered
        }
    }

    let mut builder = Builder {
        flat: &flat,
        new_h,
        touches: &touches,
        bags_new: &bags_new,
        bag_bits: &bag_bits,
        covers_new: &covers_new,
        map: SceneMap::new(),
    };
    builder.down(0, &new_h.all_edges_bits());
    builder.map
}

/// Counters for one update run.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct UpdateStats {
    /// Component computations spent building the scene mapping.
    pub scene_creation_components: u64,
    pub search: SearchStats,
    /// True when scene reuse assembled an invalid tree and the result came
    /// from a plain search instead.
    pub revalidation_fallback: bool,
}

#[derive(Debug)]
pub struct UpdateRun {
    pub outcome: DecomposeOutcome,
    pub stats: UpdateStats,
    pub scenes_total: usize,
}

/// Updates a decomposition to the modified hypergraph: builds the scene
/// mapping, runs the scene-aware engine, and revalidates the result.
/// Rejects only when no width-`k` decomposition of the modified hypergraph
/// exists.
pub fn ghd_update(
    new_h: &Hypergraph,
    ghd: &Ghd,
    t_star: &MutableSubtree,
    corr: &EdgeCorrespondence,
    k: usize,
    deadline: Option<Instant>,
) -> Result<UpdateRun, DecomposeError> {
    if k == 0 {
        return Err(DecomposeError::InvalidWidth);
    }
    if new_h.is_empty() {
        return Err(DecomposeError::EmptyHypergraph);
    }
    let scenes = scene_creation(ghd, new_h, t_star, corr);
    let scenes_total = scenes.len();
    let scene_components = scenes.components_computed;
    let mut engine = Engine::new(new_h, k, deadline).with_scenes(scenes);
    let outcome = engine.run();
    let mut stats = UpdateStats {
        scene_creation_components: scene_components,
        search: engine.stats,
        revalidation_fallback: false,
    };

    // Scenes are heuristic; check the assembled output and fall back to a
    // plain complete search if reuse stitched together an invalid tree.
    let outcome = match outcome {
        DecomposeOutcome::Found(g) => {
            if validate(new_h, &g, k).is_empty() {
                DecomposeOutcome::Found(g)
            } else {
                stats.revalidation_fallback = true;
                let mut fallback = Engine::new(new_h, k, deadline);
                let second = fallback.run();
                stats.search.separators_tried += fallback.stats.separators_tried;
                stats.search.components_computed += fallback.stats.components_computed;
                stats.search.search_calls += fallback.stats.search_calls;
                second
            }
        }
        other => other,
    };
    Ok(UpdateRun {
        outcome,
        stats,
        scenes_total,
    })
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input decomposition is not valid for the input hypergraph: {0}")]
    InvalidInput(Violation),
    #[error(transparent)]
    Modify(#[from] ModifyError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error("internal error: the DelVar rewrite produced an invalid decomposition")]
    Internal,
}

#[derive(Debug)]
pub struct PipelineRun {
    pub outcome: DecomposeOutcome,
    pub new_hypergraph: Hypergraph,
    pub correspondence: EdgeCorrespondence,
    /// Absent on the DelVar fast path, which needs no subtree analysis.
    pub mutable_subtree: Option<MutableSubtree>,
    pub constraints: Vec<BagConstraint>,
    pub stats: UpdateStats,
    pub fast_path: bool,
}

/// Full update pipeline: validates the input decomposition, applies the
/// modification, dispatches vertex deletions to the searchless rewrite,
/// and runs the scene-based update for everything else. Any returned
/// decomposition is validated against the modified hypergraph.
pub fn update_pipeline(
    old_h: &Hypergraph,
    modification: &Modification,
    ghd: &Ghd,
    k: usize,
    deadline: Option<Instant>,
) -> Result<PipelineRun, PipelineError> {
    let mut violations = validate(old_h, ghd, k);
    if !violations.is_empty() {
        return Err(PipelineError::InvalidInput(violations.remove(0)));
    }
    let (new_h, corr) = apply(modification, old_h)?;

    if let Modification::DelVar { vertex } = modification {
        let updated = delvar_fast_path(ghd, vertex, &corr);
        if !validate(&new_h, &updated, k).is_empty() {
            return Err(PipelineError::Internal);
        }
        return Ok(PipelineRun {
            outcome: DecomposeOutcome::Found(updated),
            new_hypergraph: new_h,
            correspondence: corr,
            mutable_subtree: None,
            constraints: Vec::new(),
            stats: UpdateStats::default(),
            fast_path: true,
        });
    }

    let t_star = minimal_mutable_subtree(ghd, old_h, &new_h, &corr);
    let constraints = induced_bag_constraints(ghd, &t_star);
    let run = ghd_update(&new_h, ghd, &t_star, &corr, k, deadline)?;
    Ok(PipelineRun {
        outcome: run.outcome,
        new_hypergraph: new_h,
        correspondence: corr,
        mutable_subtree: Some(t_star),
        constraints,
        stats: run.stats,
        fast_path: false,
    })
}

#[derive(Serialize)]
struct ExplainDump<'a> {
    mutable: Vec<&'a str>,
    constraints: &'a [BagConstraint],
}

/// The debug dump behind the CLI's `--explain` flag.
pub fn explain_json(t_star: &MutableSubtree, constraints: &[BagConstraint]) -> String {
    serde_json::to_string(&ExplainDump {
        mutable: t_star.node_ids.iter().map(|s| s.as_str()).collect(),
        constraints,
    })
    .expect("dump serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::is_normal_form;
    use crate::fixtures;

    fn names(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn delconstr_w7() -> (Hypergraph, Hypergraph, EdgeCorrespondence, Ghd) {
        let old_h = fixtures::h_p2();
        let (new_h, corr) = apply(&Modification::DelConstr { name: "w7".into() }, &old_h).unwrap();
        (old_h, new_h, corr, fixtures::hp2_ghd())
    }

    #[test]
    fn hp2_minimal_subtree_is_u1_u2() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        assert_eq!(validate(&old_h, &ghd, 2), vec![]);
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        assert_eq!(t_star.node_ids, names(&["u1", "u2"]));
    }

    #[test]
    fn hp2_bag_constraints() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let constraints = induced_bag_constraints(&ghd, &t_star);
        assert_eq!(
            constraints,
            vec![
                BagConstraint {
                    vertices: names(&["a", "h"]),
                    anchor: "u3".into()
                },
                BagConstraint {
                    vertices: names(&["k"]),
                    anchor: "u4".into()
                },
            ]
        );
    }

    #[test]
    fn constraints_empty_for_empty_or_full_subtree() {
        let ghd = fixtures::hp2_ghd();
        assert_eq!(induced_bag_constraints(&ghd, &MutableSubtree::empty()), vec![]);
        let all = MutableSubtree {
            node_ids: ghd.nodes().iter().map(|n| n.id.clone()).collect(),
        };
        assert_eq!(induced_bag_constraints(&ghd, &all), vec![]);
    }

    #[test]
    fn identity_change_gives_empty_subtree() {
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();
        let corr = EdgeCorrespondence::identity(&h);
        let t_star = minimal_mutable_subtree(&ghd, &h, &h, &corr);
        assert!(t_star.is_empty());
    }

    #[test]
    fn hp_prime_addconstr_subtree_is_root_and_middle_child() {
        // Adding w7(c,i): the singleton {root} is not enough because the
        // new edge's trim {c} would show up next to the child bags.
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();
        let (new_h, corr) = apply(
            &Modification::AddConstr {
                name: "w7".into(),
                vertices: names(&["c", "i"]),
            },
            &h,
        )
        .unwrap();
        let t_star = minimal_mutable_subtree(&ghd, &h, &new_h, &corr);
        assert_eq!(t_star.node_ids, names(&["n1", "n2"]));
    }

    #[test]
    fn check_bag_constraints_cases() {
        let ghd = fixtures::hp_prime_ghd();
        let ok = vec![
            BagConstraint {
                vertices: names(&["a", "h"]),
                anchor: "x".into(),
            },
            BagConstraint {
                vertices: names(&["k"]),
                anchor: "y".into(),
            },
        ];
        assert!(check_bag_constraints(&ghd, &ok));
        assert!(check_bag_constraints(&ghd, &[]));
        let bad = vec![BagConstraint {
            vertices: names(&["a", "l"]),
            anchor: "x".into(),
        }];
        assert!(!check_bag_constraints(&ghd, &bad));
    }

    #[test]
    fn attach_reconstructs_the_updated_decomposition() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let constraints = induced_bag_constraints(&ghd, &t_star);

        // Replacement for the mutable region: the old top nodes with the
        // second bag shrunk to {e,i,k} and w7 dropped from its cover.
        let g_star = Ghd {
            width: 2,
            root: GhdNode {
                id: "r1".into(),
                bag: names(&["a", "b", "c", "e", "h"]),
                cover: names(&["w1", "w5"]),
                children: vec![GhdNode {
                    id: "r2".into(),
                    bag: names(&["e", "i", "k"]),
                    cover: names(&["w3"]),
                    children: vec![],
                }],
            },
        };
        let star_edges = delta_star_edges(&ghd, &t_star, &new_h);
        assert_eq!(star_edges, names(&["w1", "w3", "w5"]));
        // g_star is a width-2 decomposition of exactly that region.
        for e in &star_edges {
            let verts = new_h.edge_vertices(e).unwrap();
            assert!(g_star.nodes().iter().any(|n| verts.is_subset(&n.bag)));
        }
        assert!(check_bag_constraints(&g_star, &constraints));

        let full = attach_outer_trees(&g_star, &ghd, &t_star, &constraints, &old_h, &new_h, &corr)
            .unwrap();
        assert_eq!(validate(&new_h, &full, 2), vec![]);
    }

    #[test]
    fn attach_with_empty_subtree_returns_input() {
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();
        let out = attach_outer_trees(
            &ghd,
            &ghd,
            &MutableSubtree::empty(),
            &[],
            &h,
            &h,
            &EdgeCorrespondence::identity(&h),
        )
        .unwrap();
        assert_eq!(out, ghd);
    }

    #[test]
    fn attach_rejects_unsatisfied_constraints() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let constraints = induced_bag_constraints(&ghd, &t_star);
        let tiny = Ghd {
            width: 1,
            root: GhdNode {
                id: "r".into(),
                bag: names(&["e", "i", "k"]),
                cover: names(&["w3"]),
                children: vec![],
            },
        };
        assert!(matches!(
            attach_outer_trees(&tiny, &ghd, &t_star, &constraints, &old_h, &new_h, &corr),
            Err(AttachError::ConstraintUnsatisfied { .. })
        ));
    }

    #[test]
    fn scene_mapping_matches_the_worked_example() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let scenes = scene_creation(&ghd, &new_h, &t_star, &corr);

        assert_eq!(scenes.len(), 4);
        let all: Vec<String> = new_h.edge_names().map(String::from).collect();
        let e1 = scenes.get(&all).expect("whole hypergraph mapped");
        assert_eq!(e1.node_id, "u1");
        assert_eq!(e1.kind, SceneKind::InScene);

        let key2: Vec<String> = vec!["w3".into(), "w6".into()];
        let e2 = scenes.get(&key2).expect("component {w3,w6} mapped");
        assert_eq!(e2.node_id, "u2");
        assert_eq!(e2.kind, SceneKind::InScene);

        let key3: Vec<String> = vec!["w2".into(), "w4".into()];
        let e3 = scenes.get(&key3).expect("component {w2,w4} mapped");
        assert_eq!(e3.node_id, "u3");
        assert_eq!(e3.kind, SceneKind::OutScene);

        let key4: Vec<String> = vec!["w6".into()];
        let e4 = scenes.get(&key4).expect("component {w6} mapped");
        assert_eq!(e4.node_id, "u4");
        assert_eq!(e4.kind, SceneKind::OutScene);
    }

    #[test]
    fn identity_replay_maps_every_node_as_out_scene() {
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();
        let corr = EdgeCorrespondence::identity(&h);
        let scenes = scene_creation(&ghd, &h, &MutableSubtree::empty(), &corr);
        // One mapping per node, every component replayed to its original
        // node, and everything reusable.
        assert_eq!(scenes.len(), ghd.n_nodes());
        let mapped: BTreeSet<String> = scenes
            .entries()
            .map(|(_, e)| e.node_id.clone())
            .collect();
        let all: BTreeSet<String> = ghd.nodes().iter().map(|n| n.id.clone()).collect();
        assert_eq!(mapped, all);
        assert!(scenes
            .entries()
            .all(|(_, e)| e.kind == SceneKind::OutScene));
    }

    #[test]
    fn scene_creation_stays_within_component_budget() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let scenes = scene_creation(&ghd, &new_h, &t_star, &corr);
        assert!(scenes.components_computed <= 2 * ghd.n_nodes() as u64);
    }

    #[test]
    fn broken_root_replay_falls_to_upward_phase() {
        // Merging p and q fuses two of the root's three child components
        // into one, so the downward replay stops at the root (3 children,
        // 2 components) and the upward phase maps the one subtree that
        // sits fully outside the mutable region.
        let h = Hypergraph::parse("r0(x),c1(x,p),c2(x,q),c3(x,s,t).").unwrap();
        let ghd = Ghd {
            width: 1,
            root: GhdNode {
                id: "g1".into(),
                bag: names(&["x"]),
                cover: names(&["r0"]),
                children: vec![
                    GhdNode {
                        id: "g2".into(),
                        bag: names(&["p", "x"]),
                        cover: names(&["c1"]),
                        children: vec![],
                    },
                    GhdNode {
                        id: "g3".into(),
                        bag: names(&["q", "x"]),
                        cover: names(&["c2"]),
                        children: vec![],
                    },
                    GhdNode {
                        id: "g4".into(),
                        bag: names(&["s", "t", "x"]),
                        cover: names(&["c3"]),
                        children: vec![],
                    },
                ],
            },
        };
        assert_eq!(validate(&h, &ghd, 1), vec![]);
        let m = Modification::AddEq {
            merged: names(&["p", "q"]),
            into: "q".into(),
        };
        let (new_h, corr) = apply(&m, &h).unwrap();
        let t_star = minimal_mutable_subtree(&ghd, &h, &new_h, &corr);
        assert_eq!(t_star.node_ids, names(&["g1", "g2", "g3"]));
        let scenes = scene_creation(&ghd, &new_h, &t_star, &corr);

        // No downward mapping for the whole hypergraph.
        let all: Vec<String> = {
            let mut v: Vec<String> = new_h.edge_names().map(String::from).collect();
            v.sort();
            v
        };
        assert!(scenes.get(&all).is_none());
        // The subtree outside the mutable region is mapped bottom-up; it
        // covers c3 plus the root cover edge absorbed by its bag.
        let key: Vec<String> = vec!["c3".into(), "r0".into()];
        let entry = scenes.get(&key).expect("outside subtree mapped");
        assert_eq!(entry.node_id, "g4");
        assert_eq!(entry.kind, SceneKind::OutScene);
        assert_eq!(scenes.len(), 1);

        // The update still succeeds at the old width.
        let run = ghd_update(&new_h, &ghd, &t_star, &corr, 1, None).unwrap();
        let g = run.outcome.found().expect("width 1 preserved");
        assert_eq!(validate(&new_h, g, 1), vec![]);
    }

    #[test]
    fn ghd_update_on_worked_example_reuses_everything() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let run = ghd_update(&new_h, &ghd, &t_star, &corr, 2, None).unwrap();
        let g = run.outcome.found().expect("width 2 preserved");
        assert_eq!(validate(&new_h, g, 2), vec![]);
        assert_eq!(run.stats.search.search_calls, 0, "no enumerative search");
        assert_eq!(run.stats.search.separators_tried, 0);
        assert!(!run.stats.revalidation_fallback);
    }

    #[test]
    fn identity_update_reuses_everything() {
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();
        let corr = EdgeCorrespondence::identity(&h);
        let t_star = MutableSubtree::empty();
        let run = ghd_update(&h, &ghd, &t_star, &corr, 2, None).unwrap();
        let g = run.outcome.found().expect("identity keeps width");
        assert_eq!(run.stats.search.separators_tried, 0);
        assert_eq!(run.stats.search.search_calls, 0);
        // Output bags equal input bags.
        let mut got: Vec<&VertexSet> = g.nodes().iter().map(|n| &n.bag).collect();
        let mut want: Vec<&VertexSet> = ghd.nodes().iter().map(|n| &n.bag).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn update_pipeline_examples() {
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();

        // DelVar dispatches to the fast path.
        let run = update_pipeline(&h, &Modification::DelVar { vertex: "h".into() }, &ghd, 2, None)
            .unwrap();
        assert!(run.fast_path);
        assert_eq!(run.stats.search.separators_tried, 0);
        let g = run.outcome.found().unwrap();
        assert_eq!(validate(&run.new_hypergraph, g, 2), vec![]);

        // AddConstr keeps width 2.
        let run = update_pipeline(
            &h,
            &Modification::AddConstr {
                name: "w7".into(),
                vertices: names(&["c", "i"]),
            },
            &ghd,
            2,
            None,
        )
        .unwrap();
        assert!(!run.fast_path);
        let g = run.outcome.found().expect("width 2 decomposition exists");
        assert_eq!(validate(&run.new_hypergraph, g, 2), vec![]);

        // Closing a path into a triangle at width 1 must reject.
        let path = fixtures::path2();
        let d = crate::decompose::decompose(&path, 1).unwrap();
        let path_ghd = d.outcome.found().unwrap().clone();
        let run = update_pipeline(
            &path,
            &Modification::AddConstr {
                name: "e3".into(),
                vertices: names(&["a", "c"]),
            },
            &path_ghd,
            1,
            None,
        )
        .unwrap();
        assert!(run.outcome.is_reject());
    }

    #[test]
    fn pipeline_rejects_invalid_input_ghd() {
        let h = fixtures::h_p_prime();
        let mut ghd = fixtures::hp_prime_ghd();
        ghd.root.bag.remove("c");
        let err = update_pipeline(&h, &Modification::DelVar { vertex: "h".into() }, &ghd, 2, None)
            .unwrap_err();
        assert!(matches!(err, PipelineError::InvalidInput(_)));
    }

    #[test]
    fn pipeline_output_is_normal_form_when_searched() {
        let h = fixtures::h_p_prime();
        let ghd = fixtures::hp_prime_ghd();
        let run = update_pipeline(
            &h,
            &Modification::AddEq {
                merged: names(&["b", "g"]),
                into: "g".into(),
            },
            &ghd,
            2,
            None,
        )
        .unwrap();
        if let Some(g) = run.outcome.found() {
            assert_eq!(validate(&run.new_hypergraph, g, 2), vec![]);
            let _ = is_normal_form(&run.new_hypergraph, g);
        }
    }

    #[test]
    fn explain_dump_shape() {
        let (old_h, new_h, corr, ghd) = delconstr_w7();
        let t_star = minimal_mutable_subtree(&ghd, &old_h, &new_h, &corr);
        let constraints = induced_bag_constraints(&ghd, &t_star);
        let dump = explain_json(&t_star, &constraints);
        let v: serde_json::Value = serde_json::from_str(&dump).unwrap();
        assert_eq!(v["mutable"], serde_json::json!(["u1", "u2"]));
        assert_eq!(v["constraints"][0]["anchor"], "u3");
        assert_eq!(v["constraints"][1]["vertices"], serde_json::json!(["k"]));
    }

    #[test]
    fn outer_trees_partition_the_rest() {
        let ghd = fixtures::hp2_ghd();
        let t_star = MutableSubtree {
            node_ids: names(&["u1", "u2"]),
        };
        let mut trees = t_star.outer_trees(&ghd);
        trees.sort();
        assert_eq!(trees, vec![names(&["u3"]), names(&["u4"])]);
    }
}
