//! The mapping from a well-labeled tree to a rooted quadrangulation, built
//! on a half-edge (rotation system) representation.
//!
//! Construction, on the clockwise contour of the tree:
//!
//! 1. a vertex `v_0` with label 0 is joined to every corner with label 1;
//! 2. every other corner `i` gets the successor `s(i)`, the next corner in
//!    contour order whose label is `l(i) - 1`;
//! 3. a chord `(i, s(i))` is drawn for every corner whose successor is not
//!    already reachable along the boundary edge to the next corner;
//! 4. edges with equal labels at both ends are deleted.
//!
//! The result is a quadrangulation whose graph distances from `v_0` equal
//! the tree labels. For truncated infinite trees the contour splits into a
//! positive (right of the spine, ascending) and a negative (left side,
//! descending) ray, the successor order runs positives first and negatives
//! after, and only corners with label at most `r_complete + 2` take part;
//! the sub-map on labels up to `r_complete` is exact and faces beyond it
//! are reported as provisional.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::assembler::AssembledUit;
use crate::tree::{Label, LabeledTree};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("the tree must be well-labeled (root label 1), got root {0}")]
    NotWellLabeled(Label),
    #[error("no successor with label {target} after corner {corner} (truncation too aggressive)")]
    MissingSuccessor { corner: usize, target: Label },
    #[error("rotation system inconsistent: {0}")]
    Inconsistent(String),
    #[error("map import: {0}")]
    Parse(String),
}

// ---------------------------------------------------------------------------
// corners
// ---------------------------------------------------------------------------

/// One corner of the tree contour.
#[derive(Debug, Clone, Copy)]
pub struct Corner {
    pub vertex: usize,
    pub label: Label,
    /// signed contour index: positives ascend the right side clockwise,
    /// negatives descend the left side (infinite mode); in finite mode all
    /// indices are positive, 1-based, with 0 reserved for `v_0`.
    pub index: i64,
    /// the tree half-edge end this corner follows in the clockwise rotation
    /// of its vertex; `None` only for the single corner of an isolated root
    after: Option<TreeEnd>,
}

/// Tree half-edge ends: `Down(v)` points from v to its parent, `Up(v)`
/// from the parent to v.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TreeEnd {
    Down(usize),
    Up(usize),
}

/// Clockwise contour of a tree, with the truncation cut when present.
#[derive(Debug)]
pub struct CornerSequence {
    pub corners: Vec<Corner>,
    /// position where the negative side starts (infinite mode)
    pub cut: Option<usize>,
}

impl CornerSequence {
    pub fn count_with_label(&self, l: Label) -> usize {
        self.corners.iter().filter(|c| c.label == l).count()
    }
}

/// Contour corners of a finite tree, in clockwise order starting at the root
/// corner.
pub fn contour_corners(tree: &LabeledTree) -> CornerSequence {
    walk_contour(tree, None)
}

/// Contour of a truncated infinite tree: the walk ascends the right side of
/// the spine (positive indices), skips the stub standing in for the infinite
/// continuation, and descends the left side (negative indices).
pub fn contour_corners_truncated(assembled: &AssembledUit) -> CornerSequence {
    walk_contour(&assembled.tree, Some(assembled.stub))
}

fn walk_contour(tree: &LabeledTree, stub: Option<usize>) -> CornerSequence {
    let mut corners: Vec<Corner> = Vec::new();
    let mut cut: Option<usize> = None;
    let root = tree.root();
    let root_children = tree.children(root);
    // the root corner between its last and first child, visited at the start
    corners.push(Corner {
        vertex: root,
        label: tree.label(root),
        index: 0,
        after: root_children.last().map(|&c| TreeEnd::Up(c)),
    });
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
        if *idx < tree.children(v).len() {
            let c = tree.children(v)[*idx];
            *idx += 1;
            if Some(c) == stub {
                cut = Some(corners.len());
                corners.push(Corner {
                    vertex: v,
                    label: tree.label(v),
                    index: 0,
                    after: Some(TreeEnd::Up(c)),
                });
                continue;
            }
            stack.push((c, 0));
            corners.push(Corner {
                vertex: c,
                label: tree.label(c),
                index: 0,
                after: Some(TreeEnd::Down(c)),
            });
        } else {
            stack.pop();
            match stack.last() {
                None => break,
                Some(&(p, pidx)) => {
                    // the corner after this child, unless it closes the root
                    if !(p == root && pidx == tree.children(root).len()) {
                        corners.push(Corner {
                            vertex: p,
                            label: tree.label(p),
                            index: 0,
                            after: Some(TreeEnd::Up(v)),
                        });
                    }
                }
            }
        }
    }
    // assign signed indices
    let n = corners.len();
    for (p, c) in corners.iter_mut().enumerate() {
        c.index = match cut {
            Some(cutpos) if p >= cutpos => p as i64 - n as i64,
            _ => p as i64 + 1,
        };
    }
    CornerSequence { corners, cut }
}

// ---------------------------------------------------------------------------
// planar maps
// ---------------------------------------------------------------------------

/// Rooted planar map as a rotation system. `next` is the clockwise-next
/// half-edge around the origin vertex; faces lie to the right of half-edges
/// and are the orbits of `h -> next(twin(h))`.
#[derive(Debug, Clone)]
pub struct PlanarMap {
    twin: Vec<u32>,
    next: Vec<u32>,
    origin: Vec<u32>,
    labels: Vec<Label>,
    pub root: u32,
    pub v0: u32,
}

impl PlanarMap {
    pub fn half_edge_count(&self) -> usize {
        self.twin.len()
    }

    pub fn edge_count(&self) -> usize {
        self.twin.len() / 2
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn twin(&self, h: u32) -> u32 {
        self.twin[h as usize]
    }

    pub fn next(&self, h: u32) -> u32 {
        self.next[h as usize]
    }

    pub fn origin(&self, h: u32) -> u32 {
        self.origin[h as usize]
    }

    pub fn label_of(&self, v: u32) -> Label {
        self.labels[v as usize]
    }

    pub fn face_next(&self, h: u32) -> u32 {
        self.next[self.twin[h as usize] as usize]
    }

    /// Faces as orbits of the face permutation.
    pub fn faces(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.twin.len()];
        let mut out = Vec::new();
        for start in 0..self.twin.len() as u32 {
            if seen[start as usize] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut h = start;
            while !seen[h as usize] {
                seen[h as usize] = true;
                orbit.push(h);
                h = self.face_next(h);
            }
            out.push(orbit);
        }
        out
    }

    /// Twin is a fixed-point-free involution, next is a permutation, and
    /// twins never share an origin with themselves.
    pub fn check_consistency(&self) -> Result<(), MapError> {
        let n = self.twin.len();
        if self.next.len() != n || self.origin.len() != n {
            return Err(MapError::Inconsistent("array lengths differ".into()));
        }
        let mut next_seen = vec![false; n];
        for h in 0..n {
            let t = self.twin[h] as usize;
            if t >= n || t == h || self.twin[t] != h as u32 {
                return Err(MapError::Inconsistent(format!("twin broken at {h}")));
            }
            let nx = self.next[h] as usize;
            if nx >= n || next_seen[nx] {
                return Err(MapError::Inconsistent(format!("next not a permutation at {h}")));
            }
            next_seen[nx] = true;
            if self.origin[nx] != self.origin[h] {
                return Err(MapError::Inconsistent(format!("next leaves vertex at {h}")));
            }
        }
        if n > 0 {
            let root = self.root as usize;
            if root >= n || self.origin[root] != self.v0 {
                return Err(MapError::Inconsistent("root half-edge must leave v0".into()));
            }
        }
        Ok(())
    }

    /// Euler count `V - E + F`; 2 for any map of the sphere.
    pub fn euler(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.faces().len() as i64
    }

    /// Graph distances from `from` along edges; unreachable is None.
    pub fn bfs_distances(&self, from: u32) -> Vec<Option<u32>> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); self.vertex_count()];
        for h in 0..self.twin.len() {
            adj[self.origin[h] as usize].push(self.origin[self.twin[h] as usize]);
        }
        let mut dist = vec![None; self.vertex_count()];
        let mut queue = std::collections::VecDeque::new();
        dist[from as usize] = Some(0);
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize].unwrap();
            for &u in &adj[v as usize] {
                if dist[u as usize].is_none() {
                    dist[u as usize] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Canonical encoding of the rooted labeled map: half-edges numbered by
    /// first visit from the root, each contributing (next, twin, label).
    /// Two rooted maps are isomorphic exactly when encodings agree.
    pub fn canonical_encoding(&self) -> Vec<(u32, u32, Label)> {
        let n = self.twin.len();
        let mut id = vec![u32::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut assign = |h: u32, id: &mut Vec<u32>, order: &mut Vec<u32>| {
            if id[h as usize] == u32::MAX {
                id[h as usize] = order.len() as u32;
                order.push(h);
            }
        };
        assign(self.root, &mut id, &mut order);
        let mut i = 0;
        while i < order.len() {
            let h = order[i];
            assign(self.next[h as usize], &mut id, &mut order);
            assign(self.twin[h as usize], &mut id, &mut order);
            i += 1;
        }
        order
            .iter()
            .map(|&h| {
                (
                    id[self.next[h as usize] as usize],
                    id[self.twin[h as usize] as usize],
                    self.labels[self.origin[h as usize] as usize],
                )
            })
            .collect()
    }

    /// Text export: `root <id>` header, then one line per half-edge,
    /// `id twin next origin label`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "root {}", self.root);
        for h in 0..self.twin.len() {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                h,
                self.twin[h],
                self.next[h],
                self.origin[h],
                self.labels[self.origin[h] as usize]
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MapError::Parse("empty input".into()))?;
        let root: u32 = header
            .strip_prefix("root ")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| MapError::Parse("missing root header".into()))?;
        let mut rows: Vec<(u32, u32, u32, Label)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(MapError::Parse(format!("line {}: expected 5 fields", i + 2)));
            }
            let id: usize = f[0].parse().map_err(|_| MapError::Parse(format!("bad id {}", f[0])))?;
            if id != i {
                return Err(MapError::Parse(format!("non-contiguous id {id}")));
            }
            let parse =
                |s: &str| -> Result<u32, MapError> { s.parse().map_err(|_| MapError::Parse(format!("bad field {s}"))) };
            rows.push((parse(f[1])?, parse(f[2])?, parse(f[3])?, parse(f[4])?));
        }
        let n_vertices = rows.iter().map(|r| r.2 as usize + 1).max().unwrap_or(0);
        let mut labels = vec![0 as Label; n_vertices];
        for r in &rows {
            labels[r.2 as usize] = r.3;
        }
        let map = PlanarMap {
            twin: rows.iter().map(|r| r.0).collect(),
            next: rows.iter().map(|r| r.1).collect(),
            origin: rows.iter().map(|r| r.2).collect(),
            labels,
            root,
            v0: rows
                .get(root as usize)
                .map(|r| r.2)
                .ok_or_else(|| MapError::Parse("root id out of range".into()))?,
        };
        map.check_consistency()?;
        Ok(map)
    }
}

/// A planar map all of whose faces have degree 4, with graph distances from
/// the distinguished vertex.
#[derive(Debug, Clone)]
pub struct Quadrangulation {
    pub map: PlanarMap,
    /// distance from v_0 per vertex; None beyond the truncation frontier
    pub distances: Vec<Option<u32>>,
}

/// Everything the construction produces: the pre-deletion map, the final
/// quadrangulation, and the number of deleted (equal-label) edges.
#[derive(Debug)]
pub struct BuildOutput {
    pub m_prime: PlanarMap,
    pub quad: Quadrangulation,
    pub deleted_edges: usize,
}

// ---------------------------------------------------------------------------
// the construction
// ---------------------------------------------------------------------------

struct BuildPlan<'a> {
    tree: &'a LabeledTree,
    corners: CornerSequence,
    /// construction applies to corners with label <= this
    keep: Label,
}

/// Builds the quadrangulation of a finite well-labeled tree.
pub fn build_q(tree: &LabeledTree) -> Result<BuildOutput, MapError> {
    if tree.root_label() != 1 {
        return Err(MapError::NotWellLabeled(tree.root_label()));
    }
    let corners = contour_corners(tree);
    construct(BuildPlan { tree, corners, keep: Label::MAX })
}

/// Builds the quadrangulation of a truncated infinite tree on all corners
/// with label `<= r_complete + 2`; the sub-map on labels `<= r_complete` is
/// exact.
pub fn build_q_truncated(
    assembled: &AssembledUit,
    r_complete: Label,
) -> Result<BuildOutput, MapError> {
    if assembled.tree.root_label() != 1 {
        return Err(MapError::NotWellLabeled(assembled.tree.root_label()));
    }
    let corners = contour_corners_truncated(assembled);
    construct(BuildPlan { tree: &assembled.tree, corners, keep: r_complete + 2 })
}

fn construct(plan: BuildPlan) -> Result<BuildOutput, MapError> {
    let tree = plan.tree;
    let seq = &plan.corners.corners;
    let c = seq.len();
    let cut = plan.corners.cut;
    let cyclic = cut.is_none();

    // successor of each constructed corner: v_0 for label 1, otherwise the
    // next corner in contour order with label one less
    let mut positions_by_label: HashMap<Label, Vec<usize>> = HashMap::new();
    for (p, corner) in seq.iter().enumerate() {
        positions_by_label.entry(corner.label).or_default().push(p);
    }
    let find_after = |target: Label, p: usize| -> Option<usize> {
        let list = positions_by_label.get(&target)?;
        match list.binary_search(&(p + 1)) {
            Ok(i) => Some(list[i]),
            Err(i) if i < list.len() => Some(list[i]),
            Err(_) => {
                if cyclic {
                    Some(list[0])
                } else if target == seq[0].label {
                    // the wrap lands on the root corner and nowhere further
                    Some(0)
                } else {
                    None
                }
            }
        }
    };

    #[derive(Clone, Copy)]
    enum Successor {
        ToV0,
        Chord(usize),
        Boundary, // realized by the tree edge to the contour-next corner
    }
    let mut succ: Vec<Option<Successor>> = vec![None; c];
    for (p, corner) in seq.iter().enumerate() {
        if corner.label > plan.keep {
            continue;
        }
        if corner.label == 1 {
            succ[p] = Some(Successor::ToV0);
            continue;
        }
        let target = corner.label - 1;
        let q = find_after(target, p)
            .ok_or(MapError::MissingSuccessor { corner: p, target })?;
        // consecutive corners joined by a boundary edge already realize the
        // successor; across the truncation cut they are not adjacent
        let adjacent = if cyclic {
            q == (p + 1) % c
        } else {
            q == p + 1 && Some(q) != cut
        };
        succ[p] = Some(if adjacent { Successor::Boundary } else { Successor::Chord(q) });
    }

    // new ends per corner, to be sorted within each slot
    struct NewEnd {
        corner: usize,
        /// cyclic position of the far endpoint; None is the v_0 end, which
        /// always sits last (the label-1 star bounds its face forward)
        far_pos: Option<usize>,
        half_edge: u32,
    }
    let l = c + 1; // cyclic length including v_0
    let pos_of = |corner: usize| corner + 1;

    // allocate half-edges: tree edges first (2 per non-root vertex)
    let n_tree_he = 2 * tree.edge_count();
    let he_down = |v: usize| (2 * (v - 1)) as u32;
    let he_up = |v: usize| (2 * (v - 1) + 1) as u32;
    let mut twin: Vec<u32> = (0..n_tree_he as u32).map(|h| h ^ 1).collect();
    let v0_vertex = tree.vertex_count() as u32;
    let mut origin: Vec<u32> = Vec::with_capacity(n_tree_he);
    for v in 1..tree.vertex_count() {
        origin.push(v as u32); // Down(v)
        origin.push(tree.parent(v).unwrap() as u32); // Up(v)
    }

    let mut ends_at_corner: Vec<Vec<NewEnd>> = (0..c).map(|_| Vec::new()).collect();
    let mut v0_ends: Vec<(usize, u32)> = Vec::new(); // (corner position, half-edge)
    let mut alloc_pair = |twin: &mut Vec<u32>| -> (u32, u32) {
        let a = twin.len() as u32;
        twin.push(a + 1);
        twin.push(a);
        (a, a + 1)
    };
    for (p, s) in succ.iter().enumerate() {
        match s {
            Some(Successor::ToV0) => {
                let (at_corner, at_v0) = alloc_pair(&mut twin);
                origin.push(seq[p].vertex as u32);
                origin.push(v0_vertex);
                ends_at_corner[p].push(NewEnd { corner: p, far_pos: None, half_edge: at_corner });
                v0_ends.push((p, at_v0));
            }
            Some(Successor::Chord(q)) => {
                let (at_p, at_q) = alloc_pair(&mut twin);
                origin.push(seq[p].vertex as u32);
                origin.push(seq[*q].vertex as u32);
                ends_at_corner[p]
                    .push(NewEnd { corner: p, far_pos: Some(pos_of(*q)), half_edge: at_p });
                ends_at_corner[*q]
                    .push(NewEnd { corner: *q, far_pos: Some(pos_of(p)), half_edge: at_q });
            }
            _ => {}
        }
    }

    // clockwise rotation at every tree vertex: each tree end is followed by
    // the new ends of the corner(s) keyed to it, sorted by descending cyclic
    // forward distance of the far endpoint (nested arcs leave outermost
    // first); a slot shared by a positive and a negative corner entry lists
    // the later (negative) entry first
    let mut corners_after: HashMap<Option<TreeEnd>, Vec<usize>> = HashMap::new();
    for (p, corner) in seq.iter().enumerate() {
        corners_after.entry(corner.after).or_default().push(p);
    }
    for list in corners_after.values_mut() {
        list.sort_by(|a, b| b.cmp(a));
    }

    let mut rotation: Vec<Vec<u32>> = vec![Vec::new(); tree.vertex_count() + 1];
    let mut emit_slot = |rot: &mut Vec<u32>,
                         key: Option<TreeEnd>,
                         corners_after: &HashMap<Option<TreeEnd>, Vec<usize>>,
                         ends_at_corner: &mut [Vec<NewEnd>]| {
        if let Some(list) = corners_after.get(&key) {
            for &p in list {
                let slot = &mut ends_at_corner[p];
                slot.sort_by_key(|e| {
                    let d = (l + e.far_pos - pos_of(e.corner)) % l;
                    std::cmp::Reverse(d)
                });
                for end in slot.iter() {
                    rot.push(end.half_edge);
                }
            }
        }
    };

    for v in 0..tree.vertex_count() {
        let mut rot: Vec<u32> = Vec::new();
        if v != tree.root() {
            rot.push(he_down(v));
            emit_slot(&mut rot, Some(TreeEnd::Down(v)), &corners_after, &mut ends_at_corner);
        } else if tree.children(v).is_empty() {
            // isolated root: single corner, no tree ends
            emit_slot(&mut rot, None, &corners_after, &mut ends_at_corner);
        }
        for &child in tree.children(v) {
            rot.push(he_up(child));
            emit_slot(&mut rot, Some(TreeEnd::Up(child)), &corners_after, &mut ends_at_corner);
        }
        rotation[v] = rot;
    }
    // v_0: ends toward label-1 corners in contour order
    v0_ends.sort_by_key(|(p, _)| *p);
    rotation[v0_vertex as usize] = v0_ends.iter().map(|&(_, h)| h).collect();

    let mut next = vec![0u32; twin.len()];
    for rot in &rotation {
        for (i, &h) in rot.iter().enumerate() {
            next[h as usize] = rot[(i + 1) % rot.len()];
        }
    }

    // the root edge: the v_0 end at the corner immediately preceding the
    // tree's root corner in contour order, oriented away from v_0
    let root_he = v0_ends
        .iter()
        .rev()
        .max_by_key(|(p, _)| *p)
        .map(|&(_, h)| h)
        .ok_or(MapError::MissingSuccessor { corner: 0, target: 1 })?;
    let root_he = {
        // prefer the last label-1 corner strictly after the root corner,
        // falling back to the root corner's own edge
        v0_ends.iter().filter(|(p, _)| *p > 0).map(|&(_, h)| h).last().unwrap_or(root_he)
    };

    let mut labels = tree_labels(tree);
    labels.push(0); // v_0
    let m_prime = PlanarMap { twin, next, origin, labels, root: root_he, v0: v0_vertex };
    m_prime.check_consistency()?;

    // step 4: drop equal-label edges (only tree edges can qualify)
    let keep_he: Vec<bool> = (0..m_prime.twin.len() as u32)
        .map(|h| {
            let a = m_prime.labels[m_prime.origin(h) as usize];
            let b = m_prime.labels[m_prime.origin(m_prime.twin(h)) as usize];
            a != b
        })
        .collect();
    let deleted_edges = keep_he.iter().filter(|k| !**k).count() / 2;
    let map = restrict(&m_prime, &keep_he, m_prime.root);
    let distances = map.bfs_distances(map.v0);
    Ok(BuildOutput { m_prime, quad: Quadrangulation { map, distances }, deleted_edges })
}

fn tree_labels(tree: &LabeledTree) -> Vec<Label> {
    (0..tree.vertex_count()).map(|v| tree.label(v)).collect()
}

/// Sub-map on a half-edge mask: rotations skip dropped ends, vertices are
/// kept (possibly isolated ones dropped), ids are compacted.
fn restrict(map: &PlanarMap, keep_he: &[bool], root: u32) -> PlanarMap {
    let n = map.half_edge_count();
    let mut new_id = vec![u32::MAX; n];
    let mut kept: Vec<u32> = Vec::new();
    for h in 0..n as u32 {
        if keep_he[h as usize] {
            new_id[h as usize] = kept.len() as u32;
            kept.push(h);
        }
    }
    let mut vertex_id = vec![u32::MAX; map.vertex_count()];
    let mut labels = Vec::new();
    let mut origin = Vec::with_capacity(kept.len());
    for &h in &kept {
        let v = map.origin(h) as usize;
        if vertex_id[v] == u32::MAX {
            vertex_id[v] = labels.len() as u32;
            labels.push(map.labels[v]);
        }
        origin.push(vertex_id[v]);
    }
    let twin: Vec<u32> = kept.iter().map(|&h| new_id[map.twin(h) as usize]).collect();
    let next: Vec<u32> = kept
        .iter()
        .map(|&h| {
            let mut nx = map.next(h);
            while !keep_he[nx as usize] {
                nx = map.next(nx);
            }
            new_id[nx as usize]
        })
        .collect();
    debug_assert!(keep_he[root as usize], "root must survive the restriction");
    let root = new_id[root as usize];
    let v0 = origin[root as usize];
    PlanarMap { twin, next, origin, labels, root, v0 }
}

// ---------------------------------------------------------------------------
// verification and balls
// ---------------------------------------------------------------------------

/// Face classification of the pre-deletion map.
#[derive(Debug, Default)]
pub struct FaceReport {
    /// (e, e+1, e+1) triangles
    pub triangles: usize,
    /// (e, e+1, e+2, e+1) quadrangles
    pub quads: usize,
    /// faces touching the truncation frontier, not classified
    pub provisional: usize,
    pub violations: Vec<String>,
}

impl FaceReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Classifies every face of the pre-deletion map as one of the two legal
/// shapes. Faces touching labels above `frontier` (truncated mode) are
/// counted as provisional instead.
pub fn verify_faces(m_prime: &PlanarMap, frontier: Option<Label>) -> FaceReport {
    let mut report = FaceReport::default();
    for face in m_prime.faces() {
        let labels: Vec<Label> =
            face.iter().map(|&h| m_prime.labels[m_prime.origin(h) as usize]).collect();
        if let Some(f) = frontier {
            if labels.iter().any(|&l| l > f) {
                report.provisional += 1;
                continue;
            }
        }
        let e = *labels.iter().min().unwrap();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        let shape_ok = match labels.len() {
            3 => sorted == vec![e, e + 1, e + 1],
            4 => sorted == vec![e, e + 1, e + 1, e + 2],
            _ => false,
        };
        let steps_ok = (0..labels.len())
            .all(|i| labels[i].abs_diff(labels[(i + 1) % labels.len()]) <= 1);
        if shape_ok && steps_ok {
            if labels.len() == 3 {
                report.triangles += 1;
            } else {
                report.quads += 1;
            }
        } else {
            report.violations.push(format!("face with labels {labels:?}"));
        }
    }
    report
}

/// Graph distances of a quadrangulation from its distinguished vertex.
pub fn bfs_distances(q: &Quadrangulation) -> &[Option<u32>] {
    &q.distances
}

/// The sub-map of vertices within distance `r` of `v_0` plus the edges among
/// them, and its volume (vertex count).
pub fn ball_of_quad(q: &Quadrangulation, r: u32) -> (PlanarMap, usize) {
    let keep_vertex: Vec<bool> =
        q.distances.iter().map(|d| matches!(d, Some(x) if *x <= r)).collect();
    let keep_he: Vec<bool> = (0..q.map.half_edge_count() as u32)
        .map(|h| {
            keep_vertex[q.map.origin(h) as usize]
                && keep_vertex[q.map.origin(q.map.twin(h)) as usize]
        })
        .collect();
    let volume = keep_vertex.iter().filter(|k| **k).count();
    // the root v_0 edge has endpoint labels 0 and 1; it survives any r >= 1,
    // and at r = 0 the ball is the single vertex v_0
    if r == 0 || !keep_he[q.map.root as usize] {
        let map = PlanarMap {
            twin: vec![],
            next: vec![],
            origin: vec![],
            labels: vec![0],
            root: 0,
            v0: 0,
        };
        return (map, volume);
    }
    (restrict(&q.map, &keep_he, q.map.root), volume)
}
