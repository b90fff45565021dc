//! Coarsest equitable partitions, with and without reflections.
//!
//! Both engines share one worklist refinement. In reflection mode each part
//! stands for a pair of parts of the split reformulation (unipolar) or for a
//! block that contains both copies of its elements (bipolar); the signs
//! record which copy of an element lies in the representative half.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{BiPartition, Bound, ModelError, Part, Problem, Rational, RowSense, Sign};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("column {col}: offset leaves no split reformulation (needs lower - delta <= 0 <= upper - delta)")]
    SplitUndefined { col: usize },
    #[error("column {col} has lower bound above upper bound")]
    InfeasibleBounds { col: usize },
    #[error("initial partition labels cover {found} {what}, expected {expected}")]
    InitialMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Labels that the refinement must respect: two elements may only share a
/// part when they carry the same label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitialPartitionSpec {
    pub row_classes: Vec<usize>,
    pub col_classes: Vec<usize>,
    /// Columns that must never become bipolar.
    pub force_unipolar: Vec<bool>,
}

impl InitialPartitionSpec {
    pub fn trivial(problem: &Problem) -> InitialPartitionSpec {
        InitialPartitionSpec {
            row_classes: vec![0; problem.nrows()],
            col_classes: vec![0; problem.ncols()],
            force_unipolar: vec![false; problem.ncols()],
        }
    }

    fn check(&self, problem: &Problem) -> Result<(), RefineError> {
        let pairs = [
            ("rows", problem.nrows(), self.row_classes.len()),
            ("columns", problem.ncols(), self.col_classes.len()),
            ("columns", problem.ncols(), self.force_unipolar.len()),
        ];
        for (what, expected, found) in pairs {
            if expected != found {
                return Err(RefineError::InitialMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Rows,
    Cols,
}

/// One side of the partition under refinement.
struct SideState {
    part_of: Vec<usize>,
    pos: Vec<usize>,
    parts: Vec<Vec<usize>>,
    bipolar: Vec<bool>,
    queued: Vec<bool>,
    sign: Vec<i8>,
}

impl SideState {
    fn from_keys<K: Ord + Clone>(keys: &[(K, bool)], signs: Vec<i8>) -> SideState {
        let mut ids: BTreeMap<&K, usize> = BTreeMap::new();
        let mut s = SideState {
            part_of: vec![0; keys.len()],
            pos: vec![0; keys.len()],
            parts: Vec::new(),
            bipolar: Vec::new(),
            queued: Vec::new(),
            sign: signs,
        };
        for (e, (k, bip)) in keys.iter().enumerate() {
            let id = *ids.entry(k).or_insert_with(|| {
                s.parts.push(Vec::new());
                s.bipolar.push(*bip);
                s.queued.push(false);
                s.parts.len() - 1
            });
            s.part_of[e] = id;
            s.pos[e] = s.parts[id].len();
            s.parts[id].push(e);
        }
        s
    }

    fn move_to(&mut self, e: usize, to: usize) {
        let from = self.part_of[e];
        let i = self.pos[e];
        self.parts[from].swap_remove(i);
        if let Some(&moved) = self.parts[from].get(i) {
            self.pos[moved] = i;
        }
        self.part_of[e] = to;
        self.pos[e] = self.parts[to].len();
        self.parts[to].push(e);
    }

    fn new_part(&mut self, bipolar: bool) -> usize {
        self.parts.push(Vec::new());
        self.bipolar.push(bipolar);
        self.queued.push(false);
        self.parts.len() - 1
    }

    fn into_parts(self) -> (Vec<Part>, Vec<Option<Sign>>) {
        let parts = self
            .parts
            .into_iter()
            .zip(self.bipolar)
            .filter(|(m, _)| !m.is_empty())
            .map(|(members, bip)| if bip { Part::bipolar(members) } else { Part::unipolar(members) })
            .collect();
        let signs = self
            .sign
            .into_iter()
            .map(|s| match s {
                1 => Some(Sign::Plus),
                -1 => Some(Sign::Minus),
                _ => None,
            })
            .collect();
        (parts, signs)
    }
}

struct Engine<'a> {
    problem: &'a Problem,
    rows: SideState,
    cols: SideState,
    queue: VecDeque<(Axis, usize)>,
    sums: Vec<Rational>,
    touched: Vec<usize>,
    seen: Vec<bool>,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a Problem, rows: SideState, cols: SideState) -> Engine<'a> {
        let n = problem.nrows().max(problem.ncols());
        let mut e = Engine {
            problem,
            rows,
            cols,
            queue: VecDeque::new(),
            sums: vec![Rational::zero(); n],
            touched: Vec::new(),
            seen: vec![false; n],
        };
        for (axis, side) in [(Axis::Rows, &mut e.rows), (Axis::Cols, &mut e.cols)] {
            for id in 0..side.parts.len() {
                if !side.bipolar[id] {
                    side.queued[id] = true;
                    e.queue.push_back((axis, id));
                }
            }
        }
        e
    }

    fn run(&mut self) {
        while let Some((axis, id)) = self.queue.pop_front() {
            let side = match axis {
                Axis::Rows => &mut self.rows,
                Axis::Cols => &mut self.cols,
            };
            side.queued[id] = false;
            if side.bipolar[id] || side.parts[id].is_empty() {
                continue;
            }
            self.split_by(axis, id);
        }
    }

    fn split_by(&mut self, axis: Axis, id: usize) {
        let (source, target_axis) = match axis {
            Axis::Rows => (&self.rows, Axis::Cols),
            Axis::Cols => (&self.cols, Axis::Rows),
        };
        for &e in &source.parts[id] {
            let s = source.sign[e];
            let line = match axis {
                Axis::Rows => self.problem.matrix.row(e),
                Axis::Cols => self.problem.matrix.col(e),
            };
            for (t, a) in line {
                if !self.seen[*t] {
                    self.seen[*t] = true;
                    self.touched.push(*t);
                }
                if s < 0 {
                    self.sums[*t] -= a;
                } else {
                    self.sums[*t] += a;
                }
            }
        }
        let touched = std::mem::take(&mut self.touched);
        let target = match target_axis {
            Axis::Rows => &mut self.rows,
            Axis::Cols => &mut self.cols,
        };
        let mut by_part: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for &t in &touched {
            let p = target.part_of[t];
            let k = *slot.entry(p).or_insert_with(|| {
                by_part.push((p, Vec::new()));
                by_part.len() - 1
            });
            by_part[k].1.push(t);
        }
        for (p, elems) in by_part {
            let fresh = split_part(target, p, &elems, &self.sums);
            for q in fresh {
                self.queue.push_back((target_axis, q));
            }
        }
        for t in touched {
            self.sums[t] = Rational::zero();
            self.seen[t] = false;
        }
    }
}

/// Splits part `p` of `side` by the signed sums of the touched elements and
/// returns the parts that must be (re)queued.
fn split_part(side: &mut SideState, p: usize, touched: &[usize], sums: &[Rational]) -> Vec<usize> {
    let bipolar = side.bipolar[p];
    let total = side.parts[p].len();
    let mut groups: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
    let mut zero_count = total;
    for &e in touched {
        let key = if bipolar {
            sums[e].abs()
        } else if side.sign[e] < 0 {
            -&sums[e]
        } else {
            sums[e].clone()
        };
        if key.is_zero() {
            continue;
        }
        zero_count -= 1;
        groups.entry(key).or_default().push(e);
    }
    if groups.is_empty() {
        return Vec::new();
    }
    if bipolar {
        let mut fresh = Vec::new();
        let mut groups = groups.into_values();
        if zero_count == 0 && groups.len() == 1 {
            // Whole part has equal nonzero |sum|: it turns unipolar in place.
            side.bipolar[p] = false;
            for e in side.parts[p].clone() {
                side.sign[e] = if sums[e].is_negative() { -1 } else { 1 };
            }
            side.queued[p] = true;
            return vec![p];
        }
        if zero_count == 0 {
            let first = groups.next().expect("nonempty");
            side.bipolar[p] = false;
            let keep: std::collections::HashSet<usize> = first.iter().copied().collect();
            for e in side.parts[p].clone() {
                if keep.contains(&e) {
                    side.sign[e] = if sums[e].is_negative() { -1 } else { 1 };
                }
            }
            side.queued[p] = true;
            fresh.push(p);
        }
        for group in groups {
            let q = side.new_part(false);
            for e in group {
                side.sign[e] = if sums[e].is_negative() { -1 } else { 1 };
                side.move_to(e, q);
            }
            side.queued[q] = true;
            fresh.push(q);
        }
        return fresh;
    }

    if zero_count == 0 && groups.len() == 1 {
        return Vec::new();
    }
    let was_queued = side.queued[p];
    let mut fragments = vec![p];
    let mut groups = groups.into_values();
    if zero_count == 0 {
        // The first group stays behind in `p`; everything else moves out.
        groups.next();
    }
    for group in groups {
        let q = side.new_part(false);
        for e in group {
            side.move_to(e, q);
        }
        fragments.push(q);
    }
    let largest = if was_queued {
        None
    } else {
        fragments.iter().copied().enumerate().max_by_key(|&(i, f)| (side.parts[f].len(), std::cmp::Reverse(i))).map(|(_, f)| f)
    };
    let mut fresh = Vec::new();
    for f in fragments {
        if Some(f) == largest || side.queued[f] {
            continue;
        }
        side.queued[f] = true;
        fresh.push(f);
    }
    fresh
}

fn finish(rows: SideState, cols: SideState) -> BiPartition {
    let (row_parts, row_sign) = rows.into_parts();
    let (col_parts, col_sign) = cols.into_parts();
    BiPartition { row_parts, col_parts, row_sign, col_sign }.canonical_order()
}

fn sense_code(s: RowSense) -> u8 {
    match s {
        RowSense::Eq => 0,
        RowSense::Le => 1,
        RowSense::Ge => 2,
    }
}

/// Coarsest equitable partition refining the labels, with all signs `+`.
pub fn refine_plain(problem: &Problem, init: &InitialPartitionSpec) -> Result<BiPartition, RefineError> {
    init.check(problem)?;
    let row_keys: Vec<_> = (0..problem.nrows())
        .map(|v| ((init.row_classes[v], sense_code(problem.row_sense[v]), problem.rhs[v].clone()), false))
        .collect();
    let col_keys: Vec<_> = (0..problem.ncols())
        .map(|w| {
            let key = (
                init.col_classes[w],
                problem.objective[w].clone(),
                problem.lower[w].clone(),
                problem.upper[w].clone(),
            );
            (key, false)
        })
        .collect();
    let rows = SideState::from_keys(&row_keys, vec![1; problem.nrows()]);
    let cols = SideState::from_keys(&col_keys, vec![1; problem.ncols()]);
    let mut engine = Engine::new(problem, rows, cols);
    engine.run();
    Ok(finish(engine.rows, engine.cols))
}

type ColumnKey = (usize, bool, Rational, Bound, Bound);

/// Coarsest symmetric, bound-respecting equitable partition of the split
/// reformulation of the problem translated by `delta`, folded back onto the
/// original rows and columns.
pub fn refine_reflection(
    problem: &Problem,
    init: &InitialPartitionSpec,
    delta: &[Rational],
) -> Result<BiPartition, RefineError> {
    problem.require_equality_form()?;
    init.check(problem)?;
    if delta.len() != problem.ncols() {
        return Err(ModelError::DimensionMismatch {
            what: "offset vector",
            expected: problem.ncols(),
            found: delta.len(),
        }
        .into());
    }
    let zero = Rational::zero();
    let mut col_keys: Vec<(ColumnKey, bool)> = Vec::with_capacity(problem.ncols());
    let mut col_sign = Vec::with_capacity(problem.ncols());
    for w in 0..problem.ncols() {
        let lo = problem.lower[w].shifted(&delta[w]);
        let hi = problem.upper[w].shifted(&delta[w]);
        if !lo.le_value(&zero) || !hi.ge_value(&zero) {
            return Err(RefineError::SplitUndefined { col: w });
        }
        let c = &problem.objective[w];
        let plus = (c.clone(), lo.clone(), hi.clone());
        let minus = (-c, hi.negated(), lo.negated());
        let label = init.col_classes[w];
        if plus == minus && !init.force_unipolar[w] {
            col_keys.push(((label, true, plus.0, plus.1, plus.2), true));
            col_sign.push(0);
        } else if plus <= minus {
            col_keys.push(((label, false, plus.0, plus.1, plus.2), false));
            col_sign.push(1);
        } else {
            col_keys.push(((label, false, minus.0, minus.1, minus.2), false));
            col_sign.push(-1);
        }
    }
    let shifted = problem.matrix.mul_vec(delta);
    let mut row_keys = Vec::with_capacity(problem.nrows());
    let mut row_sign = Vec::with_capacity(problem.nrows());
    for v in 0..problem.nrows() {
        let r = &problem.rhs[v] - &shifted[v];
        let label = init.row_classes[v];
        if r.is_zero() {
            row_keys.push(((label, true, r), true));
            row_sign.push(0);
        } else {
            row_sign.push(if r.is_negative() { -1 } else { 1 });
            row_keys.push(((label, false, r.abs()), false));
        }
    }
    let rows = SideState::from_keys(&row_keys, row_sign);
    let cols = SideState::from_keys(&col_keys, col_sign);
    let mut engine = Engine::new(problem, rows, cols);
    engine.run();
    Ok(canonicalize_signs(finish(engine.rows, engine.cols)))
}

fn canonicalize_side(parts: &[Part], signs: &mut [Option<Sign>]) {
    for part in parts.iter().filter(|p| p.is_unipolar()) {
        let plus = part.members.iter().filter(|&&e| signs[e] == Some(Sign::Plus)).count();
        let minus = part.len() - plus;
        let smallest = *part.members.iter().min().expect("parts are nonempty");
        let flip = minus > plus || (minus == plus && signs[smallest] == Some(Sign::Minus));
        if flip {
            for &e in &part.members {
                signs[e] = signs[e].map(Sign::flip);
            }
        }
    }
}

/// Flips each unipolar part so that at least half of its elements carry `+`,
/// breaking ties towards `+` on the smallest element.
pub fn canonicalize_signs(mut part: BiPartition) -> BiPartition {
    canonicalize_side(&part.row_parts, &mut part.row_sign);
    canonicalize_side(&part.col_parts, &mut part.col_sign);
    part
}

/// Centers every finite box, snaps half-open domains to their finite bound
/// and leaves free columns at zero.
pub fn compute_delta_center(problem: &Problem) -> Result<Vec<Rational>, RefineError> {
    problem
        .lower
        .iter()
        .zip(&problem.upper)
        .enumerate()
        .map(|(col, (lo, hi))| {
            if lo > hi {
                return Err(RefineError::InfeasibleBounds { col });
            }
            Ok(match (lo, hi) {
                (Bound::Finite(l), Bound::Finite(u)) => (l + u) / Rational::from_integer(2.into()),
                (Bound::Finite(l), _) => l.clone(),
                (_, Bound::Finite(u)) => u.clone(),
                _ => Rational::zero(),
            })
        })
        .collect()
}

/// Moves unipolar columns onto a bound and then shifts whole parts so that
/// their most common signed offset becomes zero.
pub fn sparsify_delta(part: &BiPartition, delta_center: &[Rational], problem: &Problem) -> Vec<Rational> {
    let mut delta = delta_center.to_vec();
    for p in part.unipolar_col_parts() {
        let snapped: Vec<Rational> = p
            .members
            .iter()
            .map(|&w| match (part.col_lambda(w), &problem.lower[w], &problem.upper[w]) {
                (Sign::Plus, Bound::Finite(l), _) => l.clone(),
                (Sign::Minus, _, Bound::Finite(u)) => u.clone(),
                _ => delta_center[w].clone(),
            })
            .collect();
        let mut counts: Vec<(Rational, usize)> = Vec::new();
        for (&w, d) in p.members.iter().zip(&snapped) {
            let v = part.col_lambda(w).apply(d);
            match counts.iter_mut().find(|(x, _)| *x == v) {
                Some(entry) => entry.1 += 1,
                None => counts.push((v, 1)),
            }
        }
        let best = counts.iter().map(|(_, n)| *n).max().unwrap_or(0);
        let common = counts.into_iter().find(|(_, n)| *n == best).map(|(v, _)| v).unwrap_or_else(Rational::zero);
        let shifted: Vec<Rational> = p
            .members
            .iter()
            .zip(&snapped)
            .map(|(&w, d)| d - part.col_lambda(w).apply(&common))
            .collect();
        let in_bounds = p
            .members
            .iter()
            .zip(&shifted)
            .all(|(&w, d)| problem.lower[w].le_value(d) && problem.upper[w].ge_value(d));
        let chosen = if in_bounds { shifted } else { snapped };
        for (&w, d) in p.members.iter().zip(chosen) {
            delta[w] = d;
        }
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, reduce_matrices, SparseMatrix};
    use proptest::prelude::*;

    fn eq_problem(rows: &[Vec<i64>], b: &[i64], lo: Vec<Bound>, hi: Vec<Bound>, c: &[i64]) -> Problem {
        Problem::new(
            SparseMatrix::from_dense(rows),
            b.iter().map(|&v| rat(v)).collect(),
            lo,
            hi,
            c.iter().map(|&v| rat(v)).collect(),
        )
        .unwrap()
    }

    fn slack_example() -> Problem {
        let mut hi = vec![Bound::from_int(2); 3];
        hi.extend([Bound::PosInf, Bound::PosInf, Bound::PosInf]);
        eq_problem(
            &[vec![2, 1, 1, 1, 0, 0], vec![-1, -2, -1, 0, 1, 0], vec![-1, 1, 0, 0, 0, 1]],
            &[5, -3, 1],
            vec![Bound::from_int(0); 6],
            hi,
            &[1, -1, 0, 0, 0, 0],
        )
    }

    fn members(parts: &[Part]) -> Vec<Vec<usize>> {
        parts.iter().map(|p| p.members.clone()).collect()
    }

    #[test]
    fn plain_all_ones_collapses() {
        let p = eq_problem(&vec![vec![1; 3]; 3], &[1; 3], vec![Bound::from_int(0); 3], vec![Bound::from_int(1); 3], &[1; 3]);
        let part = refine_plain(&p, &InitialPartitionSpec::trivial(&p)).unwrap();
        assert_eq!(members(&part.row_parts), vec![vec![0, 1, 2]]);
        assert_eq!(members(&part.col_parts), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn plain_diagonal_is_discrete() {
        let p = eq_problem(&[vec![1, 0], vec![0, 2]], &[1, 1], vec![Bound::from_int(0); 2], vec![Bound::from_int(1); 2], &[1, 1]);
        let part = refine_plain(&p, &InitialPartitionSpec::trivial(&p)).unwrap();
        assert_eq!(part.row_parts.len(), 2);
        assert_eq!(part.col_parts.len(), 2);
    }

    #[test]
    fn plain_slack_example_keeps_x_columns_apart() {
        let p = slack_example();
        let part = refine_plain(&p, &InitialPartitionSpec::trivial(&p)).unwrap();
        let idx = part.col_part_index();
        assert!(idx[0] != idx[1] && idx[1] != idx[2] && idx[0] != idx[2]);
    }

    #[test]
    fn reflection_slack_example() {
        let p = slack_example();
        let delta = compute_delta_center(&p).unwrap();
        assert_eq!(delta, vec![rat(1), rat(1), rat(1), rat(0), rat(0), rat(0)]);
        let part = refine_reflection(&p, &InitialPartitionSpec::trivial(&p), &delta).unwrap();
        assert_eq!(members(&part.row_parts), vec![vec![0, 1], vec![2]]);
        assert_eq!(members(&part.col_parts), vec![vec![0, 1], vec![2], vec![3, 4], vec![5]]);
        assert!(!part.col_parts[1].is_unipolar());
        assert_eq!(part.col_sign[0], Some(Sign::Plus));
        assert_eq!(part.col_sign[1], Some(Sign::Minus));
        let reduced = reduce_matrices(&p, &part, &delta).unwrap();
        assert_eq!((reduced.nrows(), reduced.ncols()), (2, 3));
    }

    #[test]
    fn fully_bipolar_problem() {
        let p = eq_problem(
            &[vec![1, 2], vec![3, -1]],
            &[0, 0],
            vec![Bound::from_int(-1), Bound::from_int(-4)],
            vec![Bound::from_int(1), Bound::from_int(4)],
            &[0, 0],
        );
        let part = refine_reflection(&p, &InitialPartitionSpec::trivial(&p), &[rat(0), rat(0)]).unwrap();
        assert!(part.row_parts.iter().all(|p| !p.is_unipolar()));
        assert!(part.col_parts.iter().all(|p| !p.is_unipolar()));
        assert_eq!(part.row_parts.len(), 1);
        assert_eq!(part.col_parts.len(), 2);
    }

    #[test]
    fn bipolar_converts_when_touched() {
        // x + y = 0 with bipolar domains but a unipolar column z in the row.
        let p = eq_problem(
            &[vec![1, 1, 1]],
            &[0],
            vec![Bound::from_int(-1), Bound::from_int(-1), Bound::from_int(0)],
            vec![Bound::from_int(1), Bound::from_int(1), Bound::from_int(3)],
            &[0, 0, 1],
        );
        let part = refine_reflection(&p, &InitialPartitionSpec::trivial(&p), &[rat(0), rat(0), rat(0)]).unwrap();
        assert!(part.row_parts[0].is_unipolar());
        assert!(part.col_parts.iter().all(|q| q.is_unipolar()));
    }

    #[test]
    fn canonicalize_examples() {
        let mk = |signs: Vec<Sign>| BiPartition {
            row_parts: vec![],
            col_parts: vec![Part::unipolar((0..signs.len()).collect())],
            row_sign: vec![],
            col_sign: signs.into_iter().map(Some).collect(),
        };
        let out = canonicalize_signs(mk(vec![Sign::Minus, Sign::Minus, Sign::Plus]));
        assert_eq!(out.col_sign, vec![Some(Sign::Plus), Some(Sign::Plus), Some(Sign::Minus)]);
        let out = canonicalize_signs(mk(vec![Sign::Plus, Sign::Minus]));
        assert_eq!(out.col_sign, vec![Some(Sign::Plus), Some(Sign::Minus)]);
        let out = canonicalize_signs(mk(vec![Sign::Minus, Sign::Plus]));
        assert_eq!(out.col_sign, vec![Some(Sign::Plus), Some(Sign::Minus)]);
    }

    #[test]
    fn delta_center_cases() {
        let p = eq_problem(
            &[vec![1, 1, 1, 1]],
            &[0],
            vec![Bound::from_int(0), Bound::NegInf, Bound::from_int(3), Bound::NegInf],
            vec![Bound::from_int(2), Bound::PosInf, Bound::PosInf, Bound::from_int(-1)],
            &[0; 4],
        );
        assert_eq!(compute_delta_center(&p).unwrap(), vec![rat(1), rat(0), rat(3), rat(-1)]);
        let mut bad = p.clone();
        bad.lower[0] = Bound::from_int(5);
        assert_eq!(compute_delta_center(&bad), Err(RefineError::InfeasibleBounds { col: 0 }));
    }

    #[test]
    fn sparsify_examples() {
        let p = eq_problem(&[vec![1, 1]], &[2], vec![Bound::from_int(0); 2], vec![Bound::from_int(2); 2], &[1, 1]);
        let single = BiPartition {
            row_parts: vec![Part::unipolar(vec![0])],
            col_parts: vec![Part::unipolar(vec![0, 1])],
            row_sign: vec![Some(Sign::Plus)],
            col_sign: vec![Some(Sign::Plus); 2],
        };
        assert_eq!(sparsify_delta(&single, &[rat(1), rat(1)], &p), vec![rat(0), rat(0)]);
        let mut flipped = single.clone();
        flipped.col_sign[1] = Some(Sign::Minus);
        assert_eq!(sparsify_delta(&flipped, &[rat(1), rat(1)], &p), vec![rat(0), rat(2)]);
    }

    // Expands the reflection partition to the explicit split reformulation and
    // checks equitability there.
    fn split_equitable(p: &Problem, part: &BiPartition, delta: &[Rational]) -> bool {
        let m = p.nrows();
        let n = p.ncols();
        let a = p.matrix.to_dense();
        // Split rows: (v, s) with s = +1 for v+, -1 for v-. Entry of (v,s),(w,t) is s*t*A.
        let colour_row = |v: usize, s: i8| -> (usize, i8) {
            let k = part.row_part_index()[v];
            match part.row_sign[v] {
                Some(g) => (k, if (g == Sign::Plus) == (s > 0) { 1 } else { -1 }),
                None => (k, 0),
            }
        };
        let colour_col = |w: usize, t: i8| -> (usize, i8) {
            let k = part.col_part_index()[w];
            match part.col_sign[w] {
                Some(l) => (k, if (l == Sign::Plus) == (t > 0) { 1 } else { -1 }),
                None => (k, 0),
            }
        };
        let rows: Vec<(usize, i8)> = (0..m).flat_map(|v| [(v, 1), (v, -1)]).collect();
        let cols: Vec<(usize, i8)> = (0..n).flat_map(|w| [(w, 1), (w, -1)]).collect();
        let entry = |(v, s): (usize, i8), (w, t): (usize, i8)| -> Rational {
            if s * t > 0 {
                a[v][w].clone()
            } else {
                -a[v][w].clone()
            }
        };
        let shifted = p.matrix.mul_vec(delta);
        // Row blocks: sums over each column class must match within a row class.
        let mut row_sums: BTreeMap<(usize, i8), BTreeMap<(usize, i8), Rational>> = BTreeMap::new();
        for &r in &rows {
            let mut sums: BTreeMap<(usize, i8), Rational> = BTreeMap::new();
            for &c in &cols {
                *sums.entry(colour_col(c.0, c.1)).or_insert_with(Rational::zero) += entry(r, c);
            }
            let b = if r.1 > 0 { &p.rhs[r.0] - &shifted[r.0] } else { &shifted[r.0] - &p.rhs[r.0] };
            sums.insert((usize::MAX, 0), b);
            let key = colour_row(r.0, r.1);
            match row_sums.get(&key) {
                Some(prev) if *prev != sums => return false,
                Some(_) => {}
                None => {
                    row_sums.insert(key, sums);
                }
            }
        }
        let mut col_sums: BTreeMap<(usize, i8), BTreeMap<(usize, i8), Rational>> = BTreeMap::new();
        for &c in &cols {
            let mut sums: BTreeMap<(usize, i8), Rational> = BTreeMap::new();
            for &r in &rows {
                *sums.entry(colour_row(r.0, r.1)).or_insert_with(Rational::zero) += entry(r, c);
            }
            let key = colour_col(c.0, c.1);
            match col_sums.get(&key) {
                Some(prev) if *prev != sums => return false,
                Some(_) => {}
                None => {
                    col_sums.insert(key, sums);
                }
            }
        }
        true
    }

    fn random_problem(seed_rows: &[Vec<i8>], bounds: &[(i8, i8)], c: &[i8], b: &[i8]) -> Problem {
        let rows: Vec<Vec<i64>> = seed_rows.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect();
        eq_problem(
            &rows,
            &b.iter().map(|&v| v as i64).collect::<Vec<_>>(),
            bounds.iter().map(|&(l, _)| Bound::from_int(l as i64)).collect(),
            bounds.iter().map(|&(l, w)| Bound::from_int(l as i64 + w as i64)).collect(),
            &c.iter().map(|&v| v as i64).collect::<Vec<_>>(),
        )
    }

    fn problem_strategy() -> impl Strategy<Value = Problem> {
        (2usize..6, 2usize..6).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(-1i8..=1, n), m),
                proptest::collection::vec((-2i8..=0, 0i8..=2), n),
                proptest::collection::vec(-1i8..=1, n),
                proptest::collection::vec(-1i8..=1, m),
            )
                .prop_map(|(a, bd, c, b)| random_problem(&a, &bd, &c, &b))
        })
    }

    fn plain_equitable(p: &Problem, part: &BiPartition) -> bool {
        let a = p.matrix.to_dense();
        for rp in &part.row_parts {
            for cp in &part.col_parts {
                let rs: Vec<Rational> = rp.members.iter().map(|&v| cp.members.iter().map(|&w| a[v][w].clone()).sum()).collect();
                let cs: Vec<Rational> = cp.members.iter().map(|&w| rp.members.iter().map(|&v| a[v][w].clone()).sum()).collect();
                if rs.windows(2).any(|x| x[0] != x[1]) || cs.windows(2).any(|x| x[0] != x[1]) {
                    return false;
                }
            }
        }
        true
    }

    proptest! {
        #[test]
        fn plain_output_is_equitable(p in problem_strategy()) {
            let part = refine_plain(&p, &InitialPartitionSpec::trivial(&p)).unwrap();
            prop_assert!(plain_equitable(&p, &part));
            part.validate(p.nrows(), p.ncols()).unwrap();
        }

        #[test]
        fn reflection_output_is_split_equitable(p in problem_strategy()) {
            let delta = compute_delta_center(&p).unwrap();
            let part = refine_reflection(&p, &InitialPartitionSpec::trivial(&p), &delta).unwrap();
            part.validate(p.nrows(), p.ncols()).unwrap();
            prop_assert!(split_equitable(&p, &part, &delta));
        }

        #[test]
        fn sparsified_delta_keeps_structure(p in problem_strategy()) {
            let init = InitialPartitionSpec::trivial(&p);
            let delta = compute_delta_center(&p).unwrap();
            let part = refine_reflection(&p, &init, &delta).unwrap();
            let sparse = sparsify_delta(&part, &delta, &p);
            let again = refine_reflection(&p, &init, &sparse).unwrap();
            prop_assert!(part.same_structure(&again));
            for (w, d) in sparse.iter().enumerate() {
                if part.col_sign[w].is_some() {
                    prop_assert!(d.is_integer());
                }
            }
        }

        #[test]
        fn permutation_case_matches_plain(
            a in proptest::collection::vec(proptest::collection::vec(-1i8..=1, 5), 4),
            b in proptest::collection::vec(1i64..=2, 4),
            c in proptest::collection::vec(1i64..=2, 5),
        ) {
            // Positive rhs and costs on nonnegative columns leave no room for
            // reflections, so both engines must agree.
            let rows: Vec<Vec<i64>> = a.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect();
            let p = eq_problem(&rows, &b, vec![Bound::from_int(0); 5], vec![Bound::PosInf; 5], &c);
            let init = InitialPartitionSpec::trivial(&p);
            let plain = refine_plain(&p, &init).unwrap();
            let refl = refine_reflection(&p, &init, &compute_delta_center(&p).unwrap()).unwrap();
            prop_assert_eq!(members(&plain.row_parts), members(&refl.row_parts));
            prop_assert_eq!(members(&plain.col_parts), members(&refl.col_parts));
            prop_assert!(refl.col_sign.iter().chain(&refl.row_sign).all(|s| *s == Some(Sign::Plus)));
        }
    }
}
