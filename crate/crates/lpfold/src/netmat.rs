//! Incremental recognition of network and transposed network matrices, plus
//! a brute-force total unimodularity check.
//!
//! Recognition works in two steps. The support pattern is realized as a set
//! of paths in a tree by a bounded backtracking search that inserts tree
//! edges one at a time. Signs are then fixed by Camion's theorem: the signed
//! matrix is a network matrix iff it equals the tree's own path matrix up to
//! negating rows and columns.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use log::warn;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{Rational, SparseMatrix};

/// Upper bound on search nodes per realization attempt. Attempts that run
/// out are rejected, which keeps recognition sound.
const SEARCH_BUDGET: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetmatError {
    #[error("entry {value} in row {row} is not in {{-1, 0, 1}}")]
    NonTernary { row: usize, value: String },
    #[error("row {row} out of range (matrix has {nrows} rows)")]
    RowOutOfRange { row: usize, nrows: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NetworkMode {
    Network,
    TransposedNetwork,
}

pub type TernaryColumn = Vec<(usize, i8)>;

/// Directed tree with one edge per matrix row and one arc per column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub arcs: Vec<(usize, usize)>,
}

impl Realization {
    /// Path matrix of the arcs with respect to the tree, column by column.
    pub fn entries(&self) -> Vec<TernaryColumn> {
        let tree = RootedTree::new(self.nodes, &self.edges);
        self.arcs.iter().map(|&(s, t)| tree.path(s, t)).collect()
    }
}

struct RootedTree {
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl RootedTree {
    fn new(nodes: usize, edges: &[(usize, usize)]) -> RootedTree {
        let mut adj = vec![Vec::new(); nodes];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        let mut parent = vec![None; nodes];
        let mut depth = vec![0; nodes];
        let mut seen = vec![false; nodes];
        for root in 0..nodes {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![root];
            while let Some(x) = stack.pop() {
                for &(y, e) in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        parent[y] = Some((x, e));
                        depth[y] = depth[x] + 1;
                        stack.push(y);
                    }
                }
            }
        }
        RootedTree { parent, depth, edges: edges.to_vec() }
    }

    /// Signed edge list of the tree path from `s` to `t`.
    fn path(&self, s: usize, t: usize) -> TernaryColumn {
        let (mut a, mut b) = (s, t);
        let mut from_s = Vec::new();
        let mut from_t = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                let (p, e) = self.parent[a].expect("nodes share a tree");
                from_s.push((e, self.edges[e] == (a, p)));
                a = p;
            } else {
                let (p, e) = self.parent[b].expect("nodes share a tree");
                from_t.push((e, self.edges[e] == (p, b)));
                b = p;
            }
        }
        let mut col: TernaryColumn = from_s
            .into_iter()
            .chain(from_t)
            .map(|(e, forward)| (e, if forward { 1 } else { -1 }))
            .collect();
        col.sort_unstable();
        col
    }
}

#[derive(Clone, Debug)]
enum Attempt {
    Realized(Realization),
    NotNetwork,
    Inconclusive,
}

/// State certifying that the columns added so far form a matrix of the
/// declared class.
#[derive(Clone, Debug)]
pub struct NetworkState {
    mode: NetworkMode,
    nrows: usize,
    columns: Vec<TernaryColumn>,
    realization: Option<Realization>,
}

impl NetworkState {
    pub fn new(mode: NetworkMode, nrows: usize) -> NetworkState {
        NetworkState { mode, nrows, columns: Vec::new(), realization: None }
    }

    pub fn mode(&self) -> NetworkMode {
        self.mode
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[TernaryColumn] {
        &self.columns
    }

    pub fn certified_matrix(&self) -> SparseMatrix {
        let entries = self
            .columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |&(i, v)| (i, j, Rational::from_integer(BigInt::from(v)))));
        SparseMatrix::from_triplets(self.nrows, self.columns.len(), entries).expect("certified columns are valid")
    }

    /// Re-derives the certified matrix from the realization.
    pub fn realization_matches(&self) -> bool {
        match (&self.realization, self.mode) {
            (None, _) => self.columns.is_empty(),
            (Some(r), NetworkMode::Network) => r.entries() == self.columns,
            (Some(r), NetworkMode::TransposedNetwork) => r.entries() == transpose(self.nrows, &self.columns).1,
        }
    }

    pub fn realization(&self) -> Option<&Realization> {
        self.realization.as_ref()
    }

    /// Tries to extend the certified matrix by one column. On rejection the
    /// state is left unchanged.
    pub fn augment(&mut self, column: &[(usize, i64)]) -> Result<bool, NetmatError> {
        let mut col: TernaryColumn = Vec::with_capacity(column.len());
        for &(row, value) in column {
            if row >= self.nrows {
                return Err(NetmatError::RowOutOfRange { row, nrows: self.nrows });
            }
            match value {
                0 => {}
                1 | -1 => col.push((row, value as i8)),
                _ => return Err(NetmatError::NonTernary { row, value: value.to_string() }),
            }
        }
        col.sort_unstable();
        if col.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(NetmatError::NonTernary { row: col[0].0, value: "repeated".into() });
        }
        Ok(self.augment_checked(col))
    }

    /// Same as [`NetworkState::augment`] for exact rational entries.
    pub fn augment_rational(&mut self, column: &[(usize, Rational)]) -> Result<bool, NetmatError> {
        let ints = ternary_column(column)?;
        self.augment(&ints)
    }

    fn augment_checked(&mut self, col: TernaryColumn) -> bool {
        if self.mode == NetworkMode::Network {
            if let Some(r) = &mut self.realization {
                if let Some(arc) = path_arc(r, &col) {
                    r.arcs.push(arc);
                    self.columns.push(col);
                    return true;
                }
            }
        }
        let mut cols = self.columns.clone();
        cols.push(col);
        let attempt = match self.mode {
            NetworkMode::Network => realize(self.nrows, &cols),
            NetworkMode::TransposedNetwork => {
                let (n, rows) = transpose(self.nrows, &cols);
                realize(n, &rows)
            }
        };
        match attempt {
            Attempt::Realized(r) => {
                self.realization = Some(r);
                self.columns = cols;
                true
            }
            Attempt::NotNetwork => false,
            Attempt::Inconclusive => {
                warn!(
                    "network recognition gave up after {SEARCH_BUDGET} search nodes on a {}x{} matrix; rejecting",
                    self.nrows,
                    cols.len()
                );
                false
            }
        }
    }
}

pub fn augment_network(state: &mut NetworkState, column: &[(usize, i64)]) -> Result<bool, NetmatError> {
    state.augment(column)
}

pub fn ternary_column(column: &[(usize, Rational)]) -> Result<Vec<(usize, i64)>, NetmatError> {
    column
        .iter()
        .map(|(row, v)| {
            if v.is_zero() {
                Ok((*row, 0))
            } else if v.abs().is_one() {
                Ok((*row, if v.is_negative() { -1 } else { 1 }))
            } else {
                Err(NetmatError::NonTernary { row: *row, value: v.to_string() })
            }
        })
        .collect()
}

fn transpose(nrows: usize, cols: &[TernaryColumn]) -> (usize, Vec<TernaryColumn>) {
    let mut rows = vec![Vec::new(); nrows];
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            rows[i].push((j, v));
        }
    }
    (cols.len(), rows)
}

/// Arc realizing `col` in the existing tree, if its support is a directed path.
fn path_arc(r: &Realization, col: &TernaryColumn) -> Option<(usize, usize)> {
    if col.is_empty() {
        return Some((0, 0));
    }
    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &(e, _)) in col.iter().enumerate() {
        let (a, b) = r.edges[e];
        incident.entry(a).or_default().push(k);
        incident.entry(b).or_default().push(k);
    }
    if incident.values().any(|v| v.len() > 2) {
        return None;
    }
    let ends: Vec<usize> = incident.iter().filter(|(_, v)| v.len() == 1).map(|(n, _)| *n).sorted().collect();
    if ends.len() != 2 {
        return None;
    }
    let start = ends[0];
    let mut node = start;
    let mut used = vec![false; col.len()];
    let mut agree = None;
    for _ in 0..col.len() {
        let k = *incident[&node].iter().find(|&&k| !used[k])?;
        used[k] = true;
        let (e, sign) = col[k];
        let (a, b) = r.edges[e];
        let forward = a == node;
        let ok = forward == (sign > 0);
        if *agree.get_or_insert(ok) != ok {
            return None;
        }
        node = if forward { b } else { a };
    }
    if node != ends[1] {
        return None;
    }
    Some(if agree == Some(true) { (start, node) } else { (node, start) })
}

/// Parity union-find: tracks whether two items must take equal or opposite values.
struct ParityDsu {
    parent: Vec<usize>,
    parity: Vec<bool>,
}

impl ParityDsu {
    fn new(n: usize) -> ParityDsu {
        ParityDsu { parent: (0..n).collect(), parity: vec![false; n] }
    }

    fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (root, par) = self.find(p);
        self.parent[x] = root;
        self.parity[x] ^= par;
        (root, self.parity[x])
    }

    /// Records `value(a) xor value(b) == odd`; false on contradiction.
    fn relate(&mut self, a: usize, b: usize, odd: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return (pa ^ pb) == odd;
        }
        self.parent[ra] = rb;
        self.parity[ra] = pa ^ pb ^ odd;
        true
    }
}

fn realize(nrows: usize, cols: &[TernaryColumn]) -> Attempt {
    let supports: Vec<Vec<usize>> = cols.iter().map(|c| c.iter().map(|&(i, _)| i).collect()).collect();
    let edges = match unsigned_tree(nrows, &supports) {
        Ok(Some(edges)) => edges,
        Ok(None) => return Attempt::NotNetwork,
        Err(BudgetExceeded) => return Attempt::Inconclusive,
    };
    let nodes = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1);
    let mut base = Realization { nodes, edges, arcs: Vec::with_capacity(cols.len()) };
    for support in &supports {
        base.arcs.push(support_endpoints(&base.edges, support));
    }
    let reference = base.entries();

    // Row variables 0..nrows, column variables after them.
    let mut dsu = ParityDsu::new(nrows + cols.len());
    for (j, (col, refcol)) in cols.iter().zip(&reference).enumerate() {
        for (&(i, v), &(i2, w)) in col.iter().zip(refcol) {
            debug_assert_eq!(i, i2);
            if !dsu.relate(i, nrows + j, v != w) {
                return Attempt::NotNetwork;
            }
        }
    }
    for i in 0..nrows {
        if dsu.find(i).1 {
            let (a, b) = base.edges[i];
            base.edges[i] = (b, a);
        }
    }
    for j in 0..cols.len() {
        if dsu.find(nrows + j).1 {
            let (s, t) = base.arcs[j];
            base.arcs[j] = (t, s);
        }
    }
    debug_assert_eq!(base.entries(), cols);
    Attempt::Realized(base)
}

/// Ends of the path formed by `support` in the tree.
fn support_endpoints(edges: &[(usize, usize)], support: &[usize]) -> (usize, usize) {
    if support.is_empty() {
        return (0, 0);
    }
    let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
    for &e in support {
        *degree.entry(edges[e].0).or_default() += 1;
        *degree.entry(edges[e].1).or_default() += 1;
    }
    let ends: Vec<usize> = degree.into_iter().filter(|&(_, d)| d == 1).map(|(n, _)| n).collect();
    (ends[0], ends[1])
}

#[derive(Debug)]
struct BudgetExceeded;

/// Finds a tree on `nrows` edges in which every support is a path.
fn unsigned_tree(nrows: usize, supports: &[Vec<usize>]) -> Result<Option<Vec<(usize, usize)>>, BudgetExceeded> {
    let distinct: BTreeSet<Vec<usize>> = supports.iter().filter(|s| s.len() >= 2).cloned().collect();
    let constraints: Vec<Vec<usize>> = distinct.into_iter().collect();
    let mut cols_of_row: Vec<Vec<usize>> = vec![Vec::new(); nrows];
    for (j, s) in constraints.iter().enumerate() {
        for &i in s {
            cols_of_row[i].push(j);
        }
    }

    // Rows with identical column sets form series classes.
    let mut classes: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    let mut pendant = Vec::new();
    for (i, cs) in cols_of_row.iter().enumerate() {
        if cs.is_empty() {
            pendant.push(i);
        } else {
            classes.entry(cs.as_slice()).or_default().push(i);
        }
    }
    let mut representative = vec![usize::MAX; nrows];
    let mut series: Vec<Vec<usize>> = Vec::new();
    for members in classes.values() {
        for &i in members {
            representative[i] = members[0];
        }
        series.push(members.clone());
    }
    let reduced: Vec<Vec<usize>> = constraints
        .iter()
        .map(|s| s.iter().map(|&i| representative[i]).sorted().dedup().collect::<Vec<_>>())
        .filter(|s| s.len() >= 2)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // Connected components over representatives.
    let reps: Vec<usize> = series.iter().map(|m| m[0]).collect();
    let mut dsu = ParityDsu::new(nrows);
    for s in &reduced {
        for w in s.windows(2) {
            dsu.relate(w[0], w[1], false);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &r in &reps {
        let root = dsu.find(r).0;
        components.entry(root).or_default().push(r);
    }
    let mut col_component: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for s in reduced {
        let root = dsu.find(s[0]).0;
        col_component.entry(root).or_default().push(s);
    }

    let mut edges = vec![(usize::MAX, usize::MAX); nrows];
    let mut next_node = 1;
    let mut budget = SEARCH_BUDGET;
    for (root, rows) in components {
        let cols = col_component.remove(&root).unwrap_or_default();
        let Some(local) = component_tree(&rows, &cols, &mut budget)? else {
            return Ok(None);
        };
        // Local node 0 is glued to global node 0.
        let mut map: HashMap<usize, usize> = HashMap::new();
        map.insert(0, 0);
        for (&row, &(a, b)) in rows.iter().zip(&local) {
            let mut g = |x: usize| {
                *map.entry(x).or_insert_with(|| {
                    next_node += 1;
                    next_node - 1
                })
            };
            let ga = g(a);
            let gb = g(b);
            edges[row] = (ga, gb);
        }
    }
    // Subdivide series classes along their representative edge.
    for members in &series {
        let (a, b) = edges[members[0]];
        let mut prev = a;
        for (k, &i) in members.iter().enumerate() {
            let next = if k + 1 == members.len() {
                b
            } else {
                next_node += 1;
                next_node - 1
            };
            edges[i] = (prev, next);
            prev = next;
        }
    }
    for i in pendant {
        edges[i] = (0, next_node);
        next_node += 1;
    }
    Ok(Some(edges))
}

struct ComponentSearch<'a> {
    cols: &'a [Vec<usize>],
    cols_of: Vec<Vec<usize>>,
    order: Vec<usize>,
    budget: &'a mut usize,
}

#[derive(Clone)]
struct Partial {
    ends: Vec<Option<(usize, usize)>>,
    adj: Vec<Vec<(usize, usize)>>,
}

/// Realizes one connected component; rows are given by global id and the
/// result lists local edge ends in the same order.
fn component_tree(rows: &[usize], cols: &[Vec<usize>], budget: &mut usize) -> Result<Option<Vec<(usize, usize)>>, BudgetExceeded> {
    let local: HashMap<usize, usize> = rows.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let cols: Vec<Vec<usize>> = cols.iter().map(|s| s.iter().map(|r| local[r]).collect()).collect();
    let n = rows.len();
    let mut cols_of = vec![Vec::new(); n];
    for (j, s) in cols.iter().enumerate() {
        for &r in s {
            cols_of[r].push(j);
        }
    }
    // Greedy order: next row shares the most columns with rows already placed.
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut touched_cols = vec![0usize; cols.len()];
    for _ in 0..n {
        let next = (0..n)
            .filter(|&r| !placed[r])
            .max_by_key(|&r| {
                let shared = cols_of[r].iter().filter(|&&j| touched_cols[j] > 0).count();
                (shared, cols_of[r].len(), std::cmp::Reverse(r))
            })
            .expect("rows remain");
        placed[next] = true;
        for &j in &cols_of[next] {
            touched_cols[j] += 1;
        }
        order.push(next);
    }
    let mut search = ComponentSearch { cols: &cols, cols_of, order, budget };
    let start = Partial { ends: vec![None; n], adj: vec![Vec::new()] };
    Ok(search.extend(start, 0)?.map(|p| p.ends.into_iter().map(|e| e.expect("all rows placed")).collect()))
}

impl ComponentSearch<'_> {
    fn extend(&mut self, state: Partial, depth: usize) -> Result<Option<Partial>, BudgetExceeded> {
        if depth == self.order.len() {
            return Ok(Some(state));
        }
        if *self.budget == 0 {
            return Err(BudgetExceeded);
        }
        *self.budget -= 1;
        let r = self.order[depth];
        if depth == 0 {
            let mut next = state;
            next.adj.push(Vec::new());
            next.ends[r] = Some((0, 1));
            next.adj[0].push((1, r));
            next.adj[1].push((0, r));
            return self.extend(next, 1);
        }
        let placed_of = |j: usize| self.cols[j].iter().filter(|&&e| state.ends[e].is_some()).count();
        let anchor = self.cols_of[r]
            .iter()
            .copied()
            .filter(|&j| placed_of(j) > 0)
            .min_by_key(|&j| placed_of(j));
        let candidates: Vec<usize> = match anchor {
            Some(j) => self.cols[j]
                .iter()
                .filter_map(|&e| state.ends[e])
                .flat_map(|(a, b)| [a, b])
                .sorted()
                .dedup()
                .collect(),
            None => (0..state.adj.len()).collect(),
        };
        let r_cols: BTreeSet<usize> = self.cols_of[r].iter().copied().collect();
        for x in candidates {
            let at_x = &state.adj[x];
            let mut edges_by_col: HashMap<usize, Vec<usize>> = HashMap::new();
            for (k, &(_, e)) in at_x.iter().enumerate() {
                for &j in &self.cols_of[e] {
                    edges_by_col.entry(j).or_default().push(k);
                }
            }
            let ok = r_cols.iter().all(|&j| placed_of(j) == 0 || edges_by_col.contains_key(&j));
            if !ok {
                continue;
            }
            let mut dsu = ParityDsu::new(at_x.len());
            let mut consistent = true;
            for (j, ks) in edges_by_col.iter().sorted_by_key(|(j, _)| **j) {
                if ks.len() == 2 && !dsu.relate(ks[0], ks[1], r_cols.contains(j)) {
                    consistent = false;
                    break;
                }
            }
            if !consistent {
                continue;
            }
            let roots: Vec<usize> = (0..at_x.len()).map(|k| dsu.find(k).0).sorted().dedup().collect();
            let free = roots.len().saturating_sub(1);
            if free >= usize::BITS as usize - 1 {
                return Err(BudgetExceeded);
            }
            for mask in 0u64..(1u64 << free) {
                if *self.budget == 0 {
                    return Err(BudgetExceeded);
                }
                *self.budget -= 1;
                let side_of_root = |root: usize| -> bool {
                    match roots.iter().position(|&q| q == root) {
                        Some(0) | None => false,
                        Some(p) => mask >> (p - 1) & 1 == 1,
                    }
                };
                let mut next = state.clone();
                let y = next.adj.len();
                next.adj.push(Vec::new());
                let moving: Vec<(usize, usize)> = (0..at_x.len())
                    .filter(|&k| {
                        let (root, par) = dsu.find(k);
                        side_of_root(root) ^ par
                    })
                    .map(|k| at_x[k])
                    .collect();
                for (nbr, e) in moving {
                    next.adj[x].retain(|&(_, f)| f != e);
                    next.adj[y].push((nbr, e));
                    for slot in next.adj[nbr].iter_mut() {
                        if slot.1 == e {
                            slot.0 = y;
                        }
                    }
                    let (a, b) = next.ends[e].expect("placed");
                    next.ends[e] = Some(if a == x { (y, b) } else { (a, y) });
                }
                next.ends[r] = Some((x, y));
                next.adj[x].push((y, r));
                next.adj[y].push((x, r));
                if let Some(done) = self.extend(next, depth + 1)? {
                    return Ok(Some(done));
                }
            }
        }
        Ok(None)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TuVerdict {
    pub is_tu: bool,
    /// Rows, columns and determinant of a square submatrix with |det| >= 2
    /// or a non-integral determinant.
    pub witness: Option<(Vec<usize>, Vec<usize>, Rational)>,
}

/// Checks every square submatrix up to `max_order`, smallest first.
pub fn tu_bruteforce(matrix: &SparseMatrix, max_order: usize) -> TuVerdict {
    let dense = matrix.to_dense();
    let integral: Option<Vec<Vec<i128>>> = dense
        .iter()
        .map(|row| row.iter().map(|v| if v.is_integer() { v.to_integer().to_i128() } else { None }).collect())
        .collect();
    let max_order = max_order.min(matrix.nrows()).min(matrix.ncols());
    for k in 1..=max_order {
        for rows in (0..matrix.nrows()).combinations(k) {
            for cols in (0..matrix.ncols()).combinations(k) {
                let det = match &integral {
                    Some(m) => match bareiss(m, &rows, &cols) {
                        Some(d) => Rational::from_integer(BigInt::from(d)),
                        None => rational_det(&dense, &rows, &cols),
                    },
                    None => rational_det(&dense, &rows, &cols),
                };
                let ok = det.is_zero() || det.abs().is_one();
                if !ok {
                    return TuVerdict { is_tu: false, witness: Some((rows, cols, det)) };
                }
            }
        }
    }
    TuVerdict { is_tu: true, witness: None }
}

/// Fraction-free determinant; `None` on overflow.
fn bareiss(m: &[Vec<i128>], rows: &[usize], cols: &[usize]) -> Option<i128> {
    let k = rows.len();
    let mut a: Vec<Vec<i128>> = rows.iter().map(|&r| cols.iter().map(|&c| m[r][c]).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for i in 0..k {
        if a[i][i] == 0 {
            let swap = (i + 1..k).find(|&r| a[r][i] != 0);
            match swap {
                Some(r) => {
                    a.swap(i, r);
                    sign = -sign;
                }
                None => return Some(0),
            }
        }
        for r in i + 1..k {
            for c in i + 1..k {
                let v = a[r][c].checked_mul(a[i][i])?.checked_sub(a[r][i].checked_mul(a[i][c])?)?;
                a[r][c] = v / prev;
            }
            a[r][i] = 0;
        }
        prev = a[i][i];
    }
    Some(sign * a[k - 1][k - 1])
}

pub fn rational_det(dense: &[Vec<Rational>], rows: &[usize], cols: &[usize]) -> Rational {
    let k = rows.len();
    let mut a: Vec<Vec<Rational>> = rows.iter().map(|&r| cols.iter().map(|&c| dense[r][c].clone()).collect()).collect();
    let mut det = Rational::one();
    for i in 0..k {
        let Some(p) = (i..k).find(|&r| !a[r][i].is_zero()) else {
            return Rational::zero();
        };
        if p != i {
            a.swap(i, p);
            det = -det;
        }
        det *= &a[i][i];
        for r in i + 1..k {
            if a[r][i].is_zero() {
                continue;
            }
            let f = &a[r][i] / &a[i][i];
            for c in i..k {
                let t = &f * &a[i][c];
                a[r][c] -= t;
            }
        }
    }
    det
}
