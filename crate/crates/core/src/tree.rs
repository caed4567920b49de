//! Rooted directed trees over dense node labels `0..=d` with root `0`.
//!
//! Edges point from parent to child. Besides the usual navigation queries the
//! module provides undirected paths, separation tests and the level-order
//! traversal used when a Markov tree law is built (or sampled) root first.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{parse_err, Error, Result};

/// A rooted arborescence. Node `0` is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeJson", into = "TreeJson")]
pub struct DirectedTree {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    depth: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeJson {
    nodes: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<TreeJson> for DirectedTree {
    type Error = Error;

    fn try_from(value: TreeJson) -> Result<Self> {
        let edges: Vec<_> = value.edges.iter().map(|e| (e[0], e[1])).collect();
        DirectedTree::new(value.nodes, &edges)
    }
}

impl From<DirectedTree> for TreeJson {
    fn from(t: DirectedTree) -> Self {
        TreeJson {
            nodes: t.node_count(),
            edges: t.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl DirectedTree {
    /// Builds a tree from `(parent, child)` pairs.
    ///
    /// Every node other than `0` needs exactly one parent and must be
    /// reachable from `0`.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidTree("a tree needs at least one node".into()));
        }
        let mut parents = vec![None; node_count];
        let mut children = vec![Vec::new(); node_count];
        for &(i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidTree(format!("edge ({i},{j}) references a node >= {node_count}")));
            }
            if i == j {
                return Err(Error::InvalidTree(format!("self-loop at node {i}")));
            }
            if j == 0 {
                return Err(Error::InvalidTree(format!("edge ({i},0) points into the root")));
            }
            if let Some(p) = parents[j] {
                let what = if p == i { "duplicate edge" } else { "second parent for node" };
                return Err(Error::InvalidTree(format!("{what} ({i},{j})")));
            }
            parents[j] = Some(i);
            children[i].push(j);
        }
        for c in &mut children {
            c.sort_unstable();
        }
        // Breadth-first from the root doubles as the connectivity/acyclicity check.
        let mut depth = vec![usize::MAX; node_count];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut seen = 1;
        while let Some(i) = queue.pop_front() {
            for &c in &children[i] {
                depth[c] = depth[i] + 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != node_count {
            return Err(Error::InvalidTree("not every node is reachable from the root".into()));
        }
        let mut edges = edges.to_vec();
        edges.sort_unstable();
        Ok(Self { parents, children, edges, depth })
    }

    /// Chain `0 -> 1 -> ... -> d`.
    pub fn chain(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("chain needs d >= 1".into()));
        }
        let edges: Vec<_> = (0..d).map(|i| (i, i + 1)).collect();
        Self::new(d + 1, &edges)
    }

    /// Star with center `0` and leaves `1..=d`.
    pub fn star(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("star needs d >= 1".into()));
        }
        let edges: Vec<_> = (1..=d).map(|i| (0, i)).collect();
        Self::new(d + 1, &edges)
    }

    /// Hidden Markov tree on `2n + 2` nodes: even nodes carry the hidden chain,
    /// node `2k + 1` is the observation attached to hidden node `2k`.
    pub fn hmm(n: usize) -> Result<Self> {
        let mut edges = Vec::with_capacity(2 * n + 1);
        for k in 0..=n {
            edges.push((2 * k, 2 * k + 1));
            if k < n {
                edges.push((2 * k, 2 * k + 2));
            }
        }
        Self::new(2 * n + 2, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    /// Edges sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.parents.get(j).copied().flatten() == Some(i)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.node_count() {
            Ok(())
        } else {
            Err(Error::UnknownNode(i))
        }
    }

    pub fn parent(&self, i: usize) -> Result<Option<usize>> {
        self.check(i)?;
        Ok(self.parents[i])
    }

    pub fn children(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.children[i])
    }

    /// All nodes strictly below `i`, ascending.
    pub fn descendants(&self, i: usize) -> Result<Vec<usize>> {
        self.check(i)?;
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.children[i].clone();
        while let Some(k) = stack.pop() {
            out.push(k);
            stack.extend_from_slice(&self.children[k]);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// All nodes strictly above `i`, ascending.
    pub fn ancestors(&self, i: usize) -> Result<Vec<usize>> {
        self.check(i)?;
        let mut out = Vec::new();
        let mut cur = self.parents[i];
        while let Some(p) = cur {
            out.push(p);
            cur = self.parents[p];
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check(i)?;
        Ok(self.children[i].len() + usize::from(self.parents[i].is_some()))
    }

    /// Non-root nodes of degree one.
    pub fn leaves(&self) -> Vec<usize> {
        (1..self.node_count()).filter(|&i| self.children[i].is_empty()).collect()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        i != 0 && i < self.node_count() && self.children[i].is_empty()
    }

    /// Number of edges between the root and `i`.
    pub fn depth(&self, i: usize) -> Result<usize> {
        self.check(i)?;
        Ok(self.depth[i])
    }

    /// Interior of the unique undirected path between `i` and `j` (endpoints excluded),
    /// ordered from `i` towards `j`.
    pub fn path_between(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        let mut full = self.path_inclusive(i, j)?;
        full.pop();
        full.remove(0);
        Ok(full)
    }

    /// The path from `i` to `j` including both endpoints.
    pub fn path_inclusive(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Err(Error::InvalidArgument(format!("path endpoints coincide ({i})")));
        }
        let (mut a, mut b) = (i, j);
        let mut up_a = vec![a];
        let mut up_b = vec![b];
        while self.depth[a] > self.depth[b] {
            a = self.parents[a].expect("non-root has a parent");
            up_a.push(a);
        }
        while self.depth[b] > self.depth[a] {
            b = self.parents[b].expect("non-root has a parent");
            up_b.push(b);
        }
        while a != b {
            a = self.parents[a].expect("non-root has a parent");
            b = self.parents[b].expect("non-root has a parent");
            up_a.push(a);
            up_b.push(b);
        }
        // Both walks end at the meeting node; keep it once.
        up_b.pop();
        up_a.extend(up_b.into_iter().rev());
        Ok(up_a)
    }

    /// Path from `i` to `j` with only the starting point included.
    pub fn path_from(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        let mut p = self.path_inclusive(i, j)?;
        p.pop();
        Ok(p)
    }

    /// Path from `i` to `j` with only the end point included.
    pub fn path_to(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        let mut p = self.path_inclusive(i, j)?;
        p.remove(0);
        Ok(p)
    }

    /// Whether `i` lies on every path between a member of `a` and a member of `b`.
    pub fn separates(&self, i: usize, a: &[usize], b: &[usize]) -> Result<bool> {
        self.check(i)?;
        for &x in a.iter().chain(b) {
            self.check(x)?;
        }
        if a.iter().any(|x| b.contains(x)) {
            return Err(Error::InvalidArgument("separated sets overlap".into()));
        }
        if a.contains(&i) || b.contains(&i) {
            return Err(Error::InvalidArgument(format!("separator {i} belongs to one of the sets")));
        }
        for &x in a {
            for &y in b {
                if !self.path_inclusive(x, y)?.contains(&i) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Level-order traversal; ties within a level are broken by ascending label.
    pub fn level_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.node_count()).collect();
        order.sort_by_key(|&i| (self.depth[i], i));
        order
    }

    /// Checks that `perm` is a permutation with nondecreasing root distance.
    pub fn is_level_order(&self, perm: &[usize]) -> bool {
        if perm.len() != self.node_count() {
            return false;
        }
        let mut seen = vec![false; self.node_count()];
        for &i in perm {
            if i >= seen.len() || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        perm.windows(2).all(|w| self.depth[w[0]] <= self.depth[w[1]])
    }
}

/// The node sequence `P` and the distinguished root child `k*` of the
/// supermodular comparison theorem for trees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremQuery {
    pub path: Vec<usize>,
    pub k_star: usize,
}

impl TheoremQuery {
    pub fn new(path: Vec<usize>, k_star: usize) -> Self {
        Self { path, k_star }
    }

    /// Default query: follow the smallest child from the root down to a leaf;
    /// `k*` is the smallest root child off that path (or the path head when the
    /// root has a single child).
    pub fn default_for(tree: &DirectedTree) -> Result<Self> {
        let first = *tree
            .children(0)?
            .first()
            .ok_or_else(|| Error::InvalidArgument("tree has no edges".into()))?;
        let mut path = vec![first];
        let mut cur = first;
        while let Some(&c) = tree.children(cur)?.first() {
            path.push(c);
            cur = c;
        }
        let k_star = tree.children(0)?.iter().copied().find(|c| !path.contains(c)).unwrap_or(first);
        Ok(Self { path, k_star })
    }

    /// Chain specialization: `P` is the whole chain, `k* = 1`.
    pub fn for_chain(tree: &DirectedTree) -> Result<Self> {
        let path: Vec<usize> = tree.level_order().into_iter().skip(1).collect();
        let q = Self { path, k_star: 1 };
        q.validate(tree)?;
        Ok(q)
    }

    /// Star specialization: `P = {leaf}`.
    pub fn for_star(leaf: usize, k_star: usize) -> Self {
        Self { path: vec![leaf], k_star }
    }

    pub fn validate(&self, tree: &DirectedTree) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("invalid theorem query: {m}")));
        let Some(&head) = self.path.first() else {
            return bad("empty path".into());
        };
        if tree.parent(head)? != Some(0) {
            return bad(format!("path must start at a child of the root, got {head}"));
        }
        for w in self.path.windows(2) {
            if !tree.has_edge(w[0], w[1]) {
                return bad(format!("({},{}) is not an edge", w[0], w[1]));
            }
        }
        if tree.parent(self.k_star)? != Some(0) {
            return bad(format!("k* = {} is not a child of the root", self.k_star));
        }
        if tree.degree(0)? >= 2 && self.path.contains(&self.k_star) {
            return bad(format!("k* = {} lies on the path although the root has several children", self.k_star));
        }
        Ok(())
    }
}

/// A tree read from a file together with the external node labels.
///
/// The root keeps id `0`; the remaining labels are ordered numerically when all
/// of them are integers and lexicographically otherwise.
#[derive(Debug, Clone)]
pub struct LabeledTree {
    pub tree: DirectedTree,
    pub labels: Vec<String>,
}

impl LabeledTree {
    pub fn from_labeled_edges(edges: &[(String, String)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidTree("no edges".into()));
        }
        let mut has_parent: BTreeMap<&str, bool> = BTreeMap::new();
        for (a, b) in edges {
            has_parent.entry(a).or_insert(false);
            *has_parent.entry(b).or_insert(true) = true;
        }
        let roots: Vec<&str> = has_parent.iter().filter(|(_, &p)| !p).map(|(&l, _)| l).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidTree(format!("expected exactly one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut rest: Vec<&str> = has_parent.keys().copied().filter(|&l| l != root).collect();
        let numeric: Option<Vec<i64>> = rest.iter().map(|l| l.parse().ok()).collect();
        if let Some(nums) = numeric {
            let mut paired: Vec<_> = nums.into_iter().zip(rest).collect();
            paired.sort();
            rest = paired.into_iter().map(|(_, l)| l).collect();
        }
        let mut labels = vec![root.to_string()];
        labels.extend(rest.iter().map(|s| s.to_string()));
        let id: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mapped: Vec<_> = edges.iter().map(|(a, b)| (id[a.as_str()], id[b.as_str()])).collect();
        let tree = DirectedTree::new(labels.len(), &mapped)?;
        Ok(Self { tree, labels })
    }

    pub fn id(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown node label {label:?}")))
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    /// Parses either the edge-list text format (`i j` per line, `#` comments)
    /// or the JSON form `{"nodes": n, "edges": [[i, j], ...]}`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let raw: TreeJson = serde_json::from_str(text)?;
            let edges: Vec<_> = raw.edges.iter().map(|e| (e[0].to_string(), e[1].to_string())).collect();
            let lt = Self::from_labeled_edges(&edges)?;
            if lt.tree.node_count() != raw.nodes {
                return Err(Error::InvalidTree(format!(
                    "declared {} nodes but edges mention {}",
                    raw.nodes,
                    lt.tree.node_count()
                )));
            }
            return Ok(lt);
        }
        let mut edges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(n + 1, format!("expected `parent child`, got {body:?}")));
            }
            edges.push((toks[0].to_string(), toks[1].to_string()));
        }
        Self::from_labeled_edges(&edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for &(i, j) in self.tree.edges() {
            s.push_str(&format!("{} {}\n", self.labels[i], self.labels[j]));
        }
        s
    }
}

/// A tree written inline in a spec file, or a path to a tree file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeRef {
    Inline(DirectedTree),
    Path(String),
}

impl TreeRef {
    /// Relative paths are resolved against `base_dir`.
    pub fn resolve(self, base_dir: Option<&Path>) -> Result<DirectedTree> {
        match self {
            TreeRef::Inline(t) => Ok(t),
            TreeRef::Path(p) => {
                let p = Path::new(&p);
                let full = match base_dir {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                load_dense_tree(&full)
            }
        }
    }
}

/// Reads a tree file whose labels are already `0..d` with root `0`.
pub fn load_dense_tree(path: &Path) -> Result<DirectedTree> {
    let text = std::fs::read_to_string(path)?;
    let lt = LabeledTree::parse(&text)?;
    let dense = (0..lt.tree.node_count()).all(|k| lt.label(k) == k.to_string());
    if !dense {
        return Err(Error::InvalidTree(format!(
            "{}: nodes referenced from a spec must be labeled 0..d with root 0",
            path.display()
        )));
    }
    Ok(lt.tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_TREE: &str = "# root 1\n1 6\n1 3\n6 5\n6 7\n3 2\n3 4\n3 8\n";

    fn fig() -> LabeledTree {
        LabeledTree::parse(FIG_TREE).unwrap()
    }

    fn ids(lt: &LabeledTree, labels: &[&str]) -> Vec<usize> {
        labels.iter().map(|l| lt.id(l).unwrap()).collect()
    }

    fn labels(lt: &LabeledTree, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| lt.label(i).to_string()).collect()
    }

    #[test]
    fn parent_queries() {
        let lt = fig();
        let p = lt.tree.parent(lt.id("5").unwrap()).unwrap().unwrap();
        assert_eq!(lt.label(p), "6");
        assert_eq!(lt.tree.parent(0).unwrap(), None);
        let c = DirectedTree::chain(2).unwrap();
        assert_eq!(c.parent(2).unwrap(), Some(1));
        assert!(matches!(c.parent(7), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn children_and_leaves() {
        let lt = fig();
        let c = lt.tree.children(lt.id("3").unwrap()).unwrap();
        let mut got = labels(&lt, c);
        got.sort();
        assert_eq!(got, ["2", "4", "8"]);
        let mut leaves = labels(&lt, &lt.tree.leaves());
        leaves.sort();
        assert_eq!(leaves, ["2", "4", "5", "7", "8"]);
        let s = DirectedTree::star(4).unwrap();
        assert_eq!(s.descendants(0).unwrap(), vec![1, 2, 3, 4]);
        assert!(s.ancestors(0).unwrap().is_empty());
        assert_eq!(s.degree(0).unwrap(), 4);
    }

    #[test]
    fn paths() {
        let lt = fig();
        let p = lt.tree.path_between(lt.id("5").unwrap(), lt.id("2").unwrap()).unwrap();
        assert_eq!(labels(&lt, &p), ["6", "1", "3"]);
        let c = DirectedTree::chain(3).unwrap();
        assert_eq!(c.path_between(0, 3).unwrap(), vec![1, 2]);
        assert!(c.path_between(1, 2).unwrap().is_empty());
        assert_eq!(c.path_inclusive(3, 1).unwrap(), vec![3, 2, 1]);
        assert_eq!(c.path_from(0, 2).unwrap(), vec![0, 1]);
        assert_eq!(c.path_to(0, 2).unwrap(), vec![1, 2]);
        assert!(c.path_between(2, 2).is_err());
    }

    #[test]
    fn separation() {
        let c = DirectedTree::chain(2).unwrap();
        assert!(c.separates(1, &[0], &[2]).unwrap());
        let s = DirectedTree::star(3).unwrap();
        assert!(s.separates(0, &[1], &[2, 3]).unwrap());
        let lt = fig();
        let [six, one, three] = ids(&lt, &["6", "1", "3"])[..] else { unreachable!() };
        assert!(!lt.tree.separates(six, &[one], &[three]).unwrap());
        assert!(c.separates(1, &[0], &[0]).is_err());
        assert!(c.separates(1, &[1], &[2]).is_err());
    }

    #[test]
    fn level_orders() {
        let lt = fig();
        let ord = lt.tree.level_order();
        assert_eq!(labels(&lt, &ord), ["1", "3", "6", "2", "4", "5", "7", "8"]);
        assert!(lt.tree.is_level_order(&ord));
        let listed = ids(&lt, &["1", "6", "3", "5", "7", "2", "4", "8"]);
        assert!(lt.tree.is_level_order(&listed));
        let bad = ids(&lt, &["1", "5", "6", "3", "7", "2", "4", "8"]);
        assert!(!lt.tree.is_level_order(&bad));
        assert_eq!(DirectedTree::chain(4).unwrap().level_order(), vec![0, 1, 2, 3, 4]);
        assert_eq!(DirectedTree::star(3).unwrap().level_order(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn builders() {
        assert_eq!(DirectedTree::hmm(1).unwrap().edges(), &[(0, 1), (0, 2), (2, 3)]);
        assert_eq!(DirectedTree::chain(2).unwrap().edges(), &[(0, 1), (1, 2)]);
        assert_eq!(DirectedTree::star(3).unwrap().edges(), &[(0, 1), (0, 2), (0, 3)]);
        assert!(DirectedTree::chain(0).is_err());
        assert!(DirectedTree::star(0).is_err());
        assert_eq!(DirectedTree::hmm(0).unwrap().edges(), &[(0, 1)]);
    }

    #[test]
    fn invalid_trees() {
        assert!(DirectedTree::new(3, &[(0, 1), (2, 1)]).is_err());
        assert!(DirectedTree::new(3, &[(0, 1), (0, 1)]).is_err());
        assert!(DirectedTree::new(3, &[(0, 1)]).is_err());
        assert!(DirectedTree::new(2, &[(1, 1)]).is_err());
        assert!(DirectedTree::new(3, &[(1, 2), (2, 1)]).is_err());
        assert!(DirectedTree::new(2, &[(1, 0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = DirectedTree::hmm(2).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"nodes":6,"edges":[[0,1],[0,2],[2,3],[2,4],[4,5]]}"#);
        let back: DirectedTree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let lt = LabeledTree::parse(&s).unwrap();
        assert_eq!(lt.tree, t);
    }

    #[test]
    fn text_parse_errors_carry_line() {
        match LabeledTree::parse("0 1\n1 2 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn theorem_queries() {
        let c = DirectedTree::chain(2).unwrap();
        let q = TheoremQuery::for_chain(&c).unwrap();
        assert_eq!(q, TheoremQuery::new(vec![1, 2], 1));
        let s = DirectedTree::star(3).unwrap();
        assert!(TheoremQuery::for_star(1, 1).validate(&s).is_err());
        assert!(TheoremQuery::for_star(1, 2).validate(&s).is_ok());
        let d = TheoremQuery::default_for(&s).unwrap();
        assert_eq!(d, TheoremQuery::new(vec![1], 2));
        assert!(TheoremQuery::new(vec![2], 1).validate(&c).is_err());
    }
}
