//! Fill-reducing orderings expressed as assembly trees.

use std::collections::VecDeque;

use super::SparseMatrix;

/// How unknowns are grouped into fronts.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Ordering {
    /// Nested dissection on the symmetrized graph, using level-structure
    /// separators.
    #[default]
    NestedDissection,
    /// Geometric nested dissection for unknowns laid out on a rectangular
    /// grid with at most nearest-neighbour (9-point) coupling, plus an
    /// optional set of unknowns eliminated last.
    Grid(GridLayout),
    /// A single dense front.
    Dense,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// Unknown indices (`r * cols + c`) placed in the root front.
    pub deferred: Vec<usize>,
}

pub(crate) const LEAF_SIZE: usize = 64;

/// Preorder list of tree nodes; children refer to earlier parents.
struct RawTree {
    vars: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

impl RawTree {
    fn new() -> Self {
        Self {
            vars: Vec::new(),
            parent: Vec::new(),
        }
    }

    fn add(&mut self, vars: Vec<usize>, parent: Option<usize>) -> usize {
        self.vars.push(vars);
        self.parent.push(parent);
        self.vars.len() - 1
    }
}

/// Assembly tree in postorder with the symbolic structure of each front.
#[derive(Clone, Debug)]
pub(crate) struct AssemblyTree {
    pub vars: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Off-front indices every front couples to, sorted.
    pub structure: Vec<Vec<usize>>,
    /// Postorder index of the owning front, per unknown.
    pub owner: Vec<usize>,
    /// Lowest postorder index in each subtree.
    pub first: Vec<usize>,
}

pub(crate) fn symmetric_adjacency(a: &SparseMatrix) -> (Vec<usize>, Vec<u32>) {
    let n = a.dim();
    let (rp, ci, _) = a.raw();
    let mut deg = vec![0usize; n + 1];
    for i in 0..n {
        for &c in &ci[rp[i]..rp[i + 1]] {
            let j = c as usize;
            if j != i {
                deg[i + 1] += 1;
                deg[j + 1] += 1;
            }
        }
    }
    for i in 0..n {
        deg[i + 1] += deg[i];
    }
    let mut fill = deg.clone();
    let mut adj = vec![0u32; deg[n]];
    for i in 0..n {
        for &c in &ci[rp[i]..rp[i + 1]] {
            let j = c as usize;
            if j != i {
                adj[fill[i]] = j as u32;
                fill[i] += 1;
                adj[fill[j]] = i as u32;
                fill[j] += 1;
            }
        }
    }
    let mut ptr = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(adj.len());
    ptr.push(0);
    for i in 0..n {
        let seg = &mut adj[deg[i]..deg[i + 1]];
        seg.sort_unstable();
        let mut last = u32::MAX;
        for &j in seg.iter() {
            if j != last {
                out.push(j);
                last = j;
            }
        }
        ptr.push(out.len());
    }
    (ptr, out)
}

fn grid_tree(layout: &GridLayout, n: usize) -> Option<RawTree> {
    if layout.rows * layout.cols != n || layout.deferred.iter().any(|&v| v >= n) {
        return None;
    }
    let mut deferred = vec![false; n];
    for &v in &layout.deferred {
        deferred[v] = true;
    }
    let mut tree = RawTree::new();
    let root = if layout.deferred.is_empty() {
        None
    } else {
        let mut d = layout.deferred.clone();
        d.sort_unstable();
        d.dedup();
        Some(tree.add(d, None))
    };
    let cols = layout.cols;
    let cells = |r0: usize, r1: usize, c0: usize, c1: usize| -> Vec<usize> {
        let mut v = Vec::new();
        for r in r0..r1 {
            for c in c0..c1 {
                let k = r * cols + c;
                if !deferred[k] {
                    v.push(k);
                }
            }
        }
        v
    };
    // (r0, r1, c0, c1, parent)
    let mut stack = vec![(0, layout.rows, 0, layout.cols, root)];
    while let Some((r0, r1, c0, c1, parent)) = stack.pop() {
        let (h, w) = (r1 - r0, c1 - c0);
        if h == 0 || w == 0 {
            continue;
        }
        if h * w <= LEAF_SIZE || (h < 3 && w < 3) {
            let v = cells(r0, r1, c0, c1);
            if !v.is_empty() {
                tree.add(v, parent);
            }
            continue;
        }
        if w >= h {
            let m = c0 + w / 2;
            let id = tree.add(cells(r0, r1, m, m + 1), parent);
            stack.push((r0, r1, c0, m, Some(id)));
            stack.push((r0, r1, m + 1, c1, Some(id)));
        } else {
            let m = r0 + h / 2;
            let id = tree.add(cells(m, m + 1, c0, c1), parent);
            stack.push((r0, m, c0, c1, Some(id)));
            stack.push((m + 1, r1, c0, c1, Some(id)));
        }
    }
    Some(tree)
}

/// Level-structure nested dissection.
fn graph_tree(ptr: &[usize], adj: &[u32], n: usize) -> RawTree {
    let mut tree = RawTree::new();
    // membership stamp: in_set[v] == tag means v is in the current subset
    let mut in_set = vec![usize::MAX; n];
    let mut level = vec![usize::MAX; n];
    let mut tag = 0usize;
    let mut stack: Vec<(Vec<usize>, Option<usize>)> = vec![((0..n).collect(), None)];
    let mut queue = VecDeque::new();

    let bfs = |start: usize,
               tag: usize,
               in_set: &[usize],
               level: &mut [usize],
               queue: &mut VecDeque<usize>,
               order: &mut Vec<usize>| {
        order.clear();
        level[start] = 0;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &w in &adj[ptr[u]..ptr[u + 1]] {
                let w = w as usize;
                if in_set[w] == tag && level[w] == usize::MAX {
                    level[w] = level[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    };

    let mut order = Vec::new();
    while let Some((subset, parent)) = stack.pop() {
        tag += 1;
        for &v in &subset {
            in_set[v] = tag;
            level[v] = usize::MAX;
        }
        // split into connected components
        let mut components = Vec::new();
        for &v in &subset {
            if level[v] == usize::MAX {
                bfs(v, tag, &in_set, &mut level, &mut queue, &mut order);
                components.push(order.clone());
            }
        }
        for comp in components {
            if comp.len() <= LEAF_SIZE {
                tree.add(comp, parent);
                continue;
            }
            tag += 1;
            for &v in &comp {
                in_set[v] = tag;
            }
            // pseudo-peripheral start
            let mut start = comp[0];
            let mut depth = 0;
            for _ in 0..4 {
                for &v in &comp {
                    level[v] = usize::MAX;
                }
                bfs(start, tag, &in_set, &mut level, &mut queue, &mut order);
                let far = *order.last().unwrap();
                let d = level[far];
                if d <= depth && depth > 0 {
                    break;
                }
                depth = d;
                start = far;
            }
            for &v in &comp {
                level[v] = usize::MAX;
            }
            bfs(start, tag, &in_set, &mut level, &mut queue, &mut order);
            let h = level[*order.last().unwrap()];
            if h < 2 {
                tree.add(comp, parent);
                continue;
            }
            let mut counts = vec![0usize; h + 1];
            for &v in &comp {
                counts[level[v]] += 1;
            }
            let mut m = 1;
            let mut acc = counts[0];
            while m < h - 1 && acc + counts[m] < comp.len() / 2 {
                acc += counts[m];
                m += 1;
            }
            // only level-m vertices touching level m+1 are needed to separate
            let mut sep = Vec::new();
            let mut rest = Vec::new();
            for &v in &comp {
                let lv = level[v];
                let is_sep = lv == m
                    && adj[ptr[v]..ptr[v + 1]]
                        .iter()
                        .any(|&w| in_set[w as usize] == tag && level[w as usize] == m + 1);
                if is_sep {
                    sep.push(v);
                } else {
                    rest.push(v);
                }
            }
            sep.sort_unstable();
            let id = tree.add(sep, parent);
            stack.push((rest, Some(id)));
        }
    }
    tree
}

fn dense_tree(n: usize) -> RawTree {
    let mut t = RawTree::new();
    if n > 0 {
        t.add((0..n).collect(), None);
    }
    t
}

impl AssemblyTree {
    /// Builds the tree for `ordering`, falling back to graph nested dissection
    /// when a grid layout does not match the sparsity pattern.
    pub fn build(a: &SparseMatrix, ordering: &Ordering) -> Self {
        let n = a.dim();
        let (ptr, adj) = symmetric_adjacency(a);
        let raw = match ordering {
            Ordering::Dense => dense_tree(n),
            Ordering::NestedDissection => graph_tree(&ptr, &adj, n),
            Ordering::Grid(layout) => match grid_tree(layout, n) {
                Some(t) => t,
                None => {
                    log::warn!("grid layout does not match a {n}-unknown system; using graph ordering");
                    graph_tree(&ptr, &adj, n)
                }
            },
        };
        match Self::from_raw(raw, &ptr, &adj, n) {
            Some(t) => t,
            None => {
                log::warn!("grid separators do not split the sparsity graph; using graph ordering");
                Self::from_raw(graph_tree(&ptr, &adj, n), &ptr, &adj, n)
                    .expect("graph nested dissection always yields a valid tree")
            }
        }
    }

    fn from_raw(raw: RawTree, ptr: &[usize], adj: &[u32], n: usize) -> Option<Self> {
        let m = raw.vars.len();
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut roots = Vec::new();
        for (i, p) in raw.parent.iter().enumerate() {
            match p {
                Some(p) => kids[*p].push(i),
                None => roots.push(i),
            }
        }
        // iterative postorder
        let mut post = Vec::with_capacity(m);
        let mut st: Vec<(usize, usize)> = roots.iter().rev().map(|&r| (r, 0)).collect();
        while let Some((v, k)) = st.pop() {
            if k < kids[v].len() {
                st.push((v, k + 1));
                st.push((kids[v][k], 0));
            } else {
                post.push(v);
            }
        }
        let mut new_id = vec![0usize; m];
        for (pi, &v) in post.iter().enumerate() {
            new_id[v] = pi;
        }
        let mut vars: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut raw_vars = raw.vars;
        for old in 0..m {
            let id = new_id[old];
            vars[id] = std::mem::take(&mut raw_vars[old]);
            children[id] = kids[old].iter().map(|&c| new_id[c]).collect();
        }
        let mut owner = vec![usize::MAX; n];
        for (t, vs) in vars.iter().enumerate() {
            for &v in vs {
                if owner[v] != usize::MAX {
                    return None;
                }
                owner[v] = t;
            }
        }
        if owner.contains(&usize::MAX) {
            return None;
        }
        let mut first = vec![0usize; m];
        for t in 0..m {
            first[t] = children[t].iter().map(|&c| first[c]).min().unwrap_or(t);
        }

        let mut structure: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut mark = vec![usize::MAX; n];
        for t in 0..m {
            let mut s = Vec::new();
            for &v in &vars[t] {
                mark[v] = t;
            }
            let mut visit = |x: usize, s: &mut Vec<usize>| {
                if mark[x] != t {
                    mark[x] = t;
                    s.push(x);
                }
            };
            for &v in &vars[t] {
                for &w in &adj[ptr[v]..ptr[v + 1]] {
                    visit(w as usize, &mut s);
                }
            }
            for &c in &children[t] {
                for &x in &structure[c] {
                    visit(x, &mut s);
                }
            }
            // drop already-eliminated descendants; everything else must
            // belong to an ancestor of t
            let mut valid = true;
            s.retain(|&x| {
                let o = owner[x];
                if o >= first[t] && o < t {
                    return false;
                }
                valid &= o > t && first[o] <= first[t];
                true
            });
            if !valid {
                return None;
            }
            s.sort_unstable();
            structure[t] = s;
        }
        Some(Self {
            vars,
            children,
            structure,
            owner,
            first,
        })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }
}
