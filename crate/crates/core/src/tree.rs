//! Arena representation of rooted ordered labeled trees.
//!
//! A labeled tree carries a positive integer label on every vertex and the
//! labels of adjacent vertices differ by at most one. Child order is
//! significant: these are plane trees, and every traversal in the crate
//! respects the stored left-to-right order.

use std::fmt::Write as _;

use thiserror::Error;

/// Vertex labels are positive integers; 0 is reserved for the distinguished
/// map vertex added by the quadrangulation construction.
pub type Label = u32;

#[derive(Debug, Error)]
pub enum TreeParseError {
    #[error("line {0}: expected `depth label`")]
    BadLine(usize),
    #[error("line {0}: depth {1} has no open ancestor")]
    OrphanDepth(usize, usize),
    #[error("unbalanced parentheses in nested form")]
    Unbalanced,
    #[error("empty input")]
    Empty,
    #[error("labels violate tree constraints: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Vertex {
    label: Label,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Rooted ordered labeled tree in an indexed arena. The root is vertex 0.
///
/// Equality is structural (same shape, labels and child order), independent
/// of how the arena happens to be numbered.
#[derive(Debug, Clone)]
pub struct LabeledTree {
    vertices: Vec<Vertex>,
}

impl PartialEq for LabeledTree {
    fn eq(&self, other: &Self) -> bool {
        if self.vertices.len() != other.vertices.len() {
            return false;
        }
        self.encoding() == other.encoding()
    }
}

impl Eq for LabeledTree {}

impl LabeledTree {
    /// Single-vertex tree carrying `root_label`.
    pub fn new(root_label: Label) -> Self {
        LabeledTree {
            vertices: vec![Vertex {
                label: root_label,
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn root_label(&self) -> Label {
        self.vertices[0].label
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn label(&self, v: usize) -> Label {
        self.vertices[v].label
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.vertices[v].parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.vertices[v].children
    }

    /// Appends a child to `parent` (rightmost position) and returns its index.
    pub fn add_child(&mut self, parent: usize, label: Label) -> usize {
        let idx = self.vertices.len();
        self.vertices.push(Vertex {
            label,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.vertices[parent].children.push(idx);
        idx
    }

    /// Removes the most recently added vertex. It must be a leaf and the
    /// rightmost child of its parent; used by backtracking enumerators.
    pub fn pop_last(&mut self) {
        let v = self.vertices.pop().expect("pop on empty arena");
        assert!(v.children.is_empty(), "pop_last on a non-leaf");
        if let Some(p) = v.parent {
            let c = self.vertices[p].children.pop();
            debug_assert_eq!(c, Some(self.vertices.len()));
        }
    }

    /// Depth (distance from the root) of every vertex.
    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.vertices.len()];
        // Parents precede children in the arena for every construction path
        // in this crate, so a single forward pass suffices.
        for v in 1..self.vertices.len() {
            let p = self.vertices[v].parent.expect("non-root without parent");
            debug_assert!(p < v);
            d[v] = d[p] + 1;
        }
        d
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Checks the k-labeled-tree constraints: all labels >= 1 and adjacent
    /// labels differing by at most 1.
    pub fn validate(&self) -> Result<(), TreeParseError> {
        for (i, v) in self.vertices.iter().enumerate() {
            if v.label < 1 {
                return Err(TreeParseError::Invalid(format!("vertex {i} has label 0")));
            }
            if let Some(p) = v.parent {
                let pl = self.vertices[p].label;
                if v.label.abs_diff(pl) > 1 {
                    return Err(TreeParseError::Invalid(format!(
                        "edge ({p},{i}) joins labels {pl} and {}",
                        v.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical (depth, label) preorder encoding; two trees are the same
    /// plane labeled tree exactly when their encodings agree.
    pub fn encoding(&self) -> Vec<(u32, Label)> {
        self.preorder()
            .into_iter()
            .map(|(v, d)| (d as u32, self.vertices[v].label))
            .collect()
    }

    /// Preorder traversal (vertex, depth), children in planar order.
    pub fn preorder(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.vertices.len());
        let mut stack = vec![(0usize, 0usize)];
        while let Some((v, d)) = stack.pop() {
            out.push((v, d));
            for &c in self.vertices[v].children.iter().rev() {
                stack.push((c, d + 1));
            }
        }
        out
    }

    /// The labeled subtree of vertices within distance `r` of the root,
    /// child order preserved. Returns the whole tree when `r >= height`.
    pub fn ball(&self, r: usize) -> LabeledTree {
        let mut out = LabeledTree::new(self.root_label());
        let mut map = vec![usize::MAX; self.vertices.len()];
        map[0] = 0;
        for (v, d) in self.preorder() {
            if v == 0 || d > r {
                continue;
            }
            let p = self.vertices[v].parent.unwrap();
            let np = map[p];
            debug_assert_ne!(np, usize::MAX);
            map[v] = out.add_child(np, self.vertices[v].label);
        }
        out
    }

    /// Number of vertices carrying each label, indexed `hist[j]` for
    /// labels `j <= j_max` (index 0 unused).
    pub fn label_counts(&self, j_max: Label) -> Vec<u64> {
        let mut hist = vec![0u64; j_max as usize + 1];
        for v in &self.vertices {
            if v.label <= j_max {
                hist[v.label as usize] += 1;
            }
        }
        hist
    }

    /// Serializes as one vertex per line, `depth label`, children immediately
    /// following their parent in planar order.
    pub fn to_indented(&self) -> String {
        let mut s = String::new();
        for (v, d) in self.preorder() {
            let _ = writeln!(s, "{} {}", d, self.vertices[v].label);
        }
        s
    }

    pub fn from_indented(text: &str) -> Result<Self, TreeParseError> {
        let mut tree: Option<LabeledTree> = None;
        // stack[d] = arena index of the most recent vertex at depth d
        let mut stack: Vec<usize> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let depth: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(TreeParseError::BadLine(ln + 1))?;
            let label: Label = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(TreeParseError::BadLine(ln + 1))?;
            if it.next().is_some() {
                return Err(TreeParseError::BadLine(ln + 1));
            }
            match &mut tree {
                None => {
                    if depth != 0 {
                        return Err(TreeParseError::OrphanDepth(ln + 1, depth));
                    }
                    tree = Some(LabeledTree::new(label));
                    stack.push(0);
                }
                Some(t) => {
                    if depth == 0 || depth > stack.len() {
                        return Err(TreeParseError::OrphanDepth(ln + 1, depth));
                    }
                    stack.truncate(depth);
                    let idx = t.add_child(stack[depth - 1], label);
                    stack.push(idx);
                }
            }
        }
        tree.ok_or(TreeParseError::Empty)
    }

    /// Compact nested form for small trees: `label(child,child,...)`,
    /// parentheses omitted for leaves.
    pub fn to_nested(&self) -> String {
        fn rec(t: &LabeledTree, v: usize, s: &mut String) {
            let _ = write!(s, "{}", t.vertices[v].label);
            if !t.vertices[v].children.is_empty() {
                s.push('(');
                for (i, &c) in t.vertices[v].children.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    rec(t, c, s);
                }
                s.push(')');
            }
        }
        let mut s = String::new();
        rec(self, 0, &mut s);
        s
    }

    pub fn from_nested(text: &str) -> Result<Self, TreeParseError> {
        let bytes = text.trim().as_bytes();
        if bytes.is_empty() {
            return Err(TreeParseError::Empty);
        }
        let mut pos = 0usize;
        let read_label = |p: &mut usize| -> Result<Label, TreeParseError> {
            let start = *p;
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
            if start == *p {
                return Err(TreeParseError::Unbalanced);
            }
            text[start..*p].parse().map_err(|_| TreeParseError::Unbalanced)
        };
        let root_label = read_label(&mut pos)?;
        let mut tree = LabeledTree::new(root_label);
        let mut stack = vec![0usize];
        while pos < bytes.len() {
            match bytes[pos] {
                b'(' => {
                    pos += 1;
                    let l = read_label(&mut pos)?;
                    let parent = *stack.last().ok_or(TreeParseError::Unbalanced)?;
                    let idx = tree.add_child(parent, l);
                    stack.push(idx);
                }
                b',' => {
                    pos += 1;
                    stack.pop().ok_or(TreeParseError::Unbalanced)?;
                    let l = read_label(&mut pos)?;
                    let parent = *stack.last().ok_or(TreeParseError::Unbalanced)?;
                    let idx = tree.add_child(parent, l);
                    stack.push(idx);
                }
                b')' => {
                    pos += 1;
                    stack.pop().ok_or(TreeParseError::Unbalanced)?;
                    if stack.is_empty() {
                        return Err(TreeParseError::Unbalanced);
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => return Err(TreeParseError::Unbalanced),
            }
        }
        if stack.len() != 1 {
            return Err(TreeParseError::Unbalanced);
        }
        Ok(tree)
    }
}
