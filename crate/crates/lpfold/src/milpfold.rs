//! Folding of mixed-integer programs certified by affine totally unimodular
//! decompositions, and recovery of integral solutions from fiber LPs.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::lpexact::{LpOutcome, LpSolver};
use crate::model::{
    ceil, floor, is_integral, BiPartition, Bound, ModelError, Problem, Rational, ReflectionReduction, RowSense, Sign,
    SparseMatrix,
};
use crate::netmat::{ternary_column, NetworkMode, NetworkState};
use crate::refine::{canonicalize_signs, compute_delta_center, refine_reflection, sparsify_delta, InitialPartitionSpec, RefineError};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error("integer column {col} has no integral value within its bounds")]
    EmptyIntegerDomain { col: usize },
    #[error("reduced value of integer column {col} is not integral")]
    FractionalReducedValue { col: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Copy of `column` with every entry of absolute value one removed.
pub fn nonternary_mask(column: &[(usize, Rational)]) -> Vec<(usize, Rational)> {
    column.iter().filter(|(_, v)| !v.abs().is_one_value()).cloned().collect()
}

trait OneValue {
    fn is_one_value(&self) -> bool;
}

impl OneValue for Rational {
    fn is_one_value(&self) -> bool {
        self.is_integer() && self.numer() == &BigInt::from(1)
    }
}

/// Rows with a fractional right-hand side or a fractional entry.
pub fn fractional_rows(problem: &Problem) -> BTreeSet<usize> {
    (0..problem.nrows())
        .filter(|&v| !is_integral(&problem.rhs[v]) || problem.matrix.row(v).iter().any(|(_, a)| !is_integral(a)))
        .collect()
}

/// Tightens integer columns to integral bounds.
pub fn round_integer_bounds(problem: &Problem) -> Result<Problem, MilpError> {
    let mut p = problem.clone();
    for w in 0..p.ncols() {
        if !p.integral[w] {
            continue;
        }
        if let Bound::Finite(l) = &p.lower[w] {
            p.lower[w] = Bound::Finite(Rational::from_integer(ceil(l)));
        }
        if let Bound::Finite(u) = &p.upper[w] {
            p.upper[w] = Bound::Finite(Rational::from_integer(floor(u)));
        }
        if p.lower[w] > p.upper[w] {
            return Err(MilpError::EmptyIntegerDomain { col: w });
        }
    }
    Ok(p)
}

/// Signed canonical form of a sparse vector: the first nonzero is positive.
fn up_to_sign(v: Vec<(usize, Rational)>) -> Vec<(usize, Rational)> {
    match v.first() {
        Some((_, a)) if a.is_negative() => v.into_iter().map(|(i, a)| (i, -a)).collect(),
        _ => v,
    }
}

fn grouping_key(problem: &Problem, w: usize, fractional: &BTreeSet<usize>) -> Vec<(usize, Rational)> {
    let col = problem.matrix.col(w);
    let mut key: Vec<(usize, Rational)> = col.iter().filter(|(v, _)| fractional.contains(v)).cloned().collect();
    let rest: Vec<(usize, Rational)> = col.iter().filter(|(v, _)| !fractional.contains(v)).cloned().collect();
    key.extend(nonternary_mask(&rest));
    up_to_sign(key)
}

/// Column labels for the first refinement: integer columns are grouped by
/// their fractional rows and masked integral rows up to a common sign.
pub fn milp_initial_partition(problem: &Problem) -> InitialPartitionSpec {
    let fractional = fractional_rows(problem);
    initial_partition_with(problem, &fractional)
}

fn initial_partition_with(problem: &Problem, fractional: &BTreeSet<usize>) -> InitialPartitionSpec {
    let mut labels: BTreeMap<Option<Vec<(usize, Rational)>>, usize> = BTreeMap::new();
    let mut col_classes = Vec::with_capacity(problem.ncols());
    for w in 0..problem.ncols() {
        let key = problem.integral[w].then(|| grouping_key(problem, w, fractional));
        let next = labels.len();
        col_classes.push(*labels.entry(key).or_insert(next));
    }
    InitialPartitionSpec {
        row_classes: vec![0; problem.nrows()],
        col_classes,
        force_unipolar: vec![false; problem.ncols()],
    }
}

/// One coarse part accepted into the affine TU decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerPart {
    pub members: Vec<usize>,
    pub lambda: Vec<Sign>,
    /// Rows cancelled by the part's aggregate, with their multipliers.
    pub cancellation: Vec<(usize, Rational)>,
    /// Whether the aggregate row joined the certified matrix; only such parts
    /// yield linking equalities in the fiber.
    pub linked: bool,
}

impl LedgerPart {
    /// Residual columns `A[:, w] - u * lambda_w` for the members.
    pub fn residual(&self, problem: &Problem) -> Vec<Vec<(usize, Rational)>> {
        let cancelled: BTreeSet<usize> = self.cancellation.iter().map(|(v, _)| *v).collect();
        self.members
            .iter()
            .map(|&w| problem.matrix.col(w).iter().filter(|(v, _)| !cancelled.contains(v)).cloned().collect())
            .collect()
    }
}

/// Record of the affine TU decomposition found during detection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtuLedger {
    pub parts: Vec<LedgerPart>,
    /// Continuous column components certified as (transposed) network.
    pub certified_components: Vec<Vec<usize>>,
    pub fractional_rows: Vec<usize>,
}

impl AtuLedger {
    pub fn linked_parts(&self) -> impl Iterator<Item = &LedgerPart> {
        self.parts.iter().filter(|p| p.linked)
    }

    /// Integer columns covered by an accepted part.
    pub fn covered(&self) -> BTreeSet<usize> {
        self.parts.iter().flat_map(|p| p.members.iter().copied()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct MilpDetection {
    /// The problem the reduction refers to (integer bounds rounded).
    pub problem: Problem,
    pub first_partition: BiPartition,
    pub ledger: AtuLedger,
    pub reduction: ReflectionReduction,
    pub delta_center: Vec<Rational>,
    /// Initial labels of the last refinement pass.
    pub final_spec: InitialPartitionSpec,
}

impl MilpDetection {
    pub fn partition(&self) -> &BiPartition {
        &self.reduction.partition
    }
}

struct Stage4<'a> {
    problem: &'a Problem,
    fractional: &'a BTreeSet<usize>,
    state: NetworkState,
    in_matrix: BTreeSet<usize>,
}

impl Stage4<'_> {
    fn try_columns(&mut self, cols: &[Vec<(usize, Rational)>]) -> bool {
        let saved = self.state.clone();
        for col in cols {
            let ok = match ternary_column(col) {
                Ok(t) => self.state.augment(&t).unwrap_or(false),
                Err(_) => false,
            };
            if !ok {
                self.state = saved;
                return false;
            }
        }
        true
    }

    /// Tries to certify one integer part; returns the ledger entry on success.
    fn certify_part(&mut self, members: &[usize], lambda: &[Sign], t_row: usize) -> Option<LedgerPart> {
        let matrix = &self.problem.matrix;
        let rows: BTreeSet<usize> = members.iter().flat_map(|&w| matrix.col(w).iter().map(|(v, _)| *v)).collect();
        let mut literal: Vec<(usize, Rational)> = Vec::new();
        for &v in &rows {
            let scaled: Vec<Rational> = members.iter().zip(lambda).map(|(&w, s)| s.apply(&matrix.get(v, w))).collect();
            if !scaled[0].is_zero() && scaled.iter().all(|a| *a == scaled[0]) {
                literal.push((v, scaled[0].clone()));
            }
        }
        let cancel_set: BTreeSet<usize> = literal.iter().map(|(v, _)| *v).collect();
        let residual_touches_fractional = rows.iter().any(|v| self.fractional.contains(v) && !cancel_set.contains(v));
        if residual_touches_fractional {
            debug!("part {members:?}: fractional rows not cancelled");
            return None;
        }
        let needed = literal.iter().any(|(v, a)| !a.abs().is_one_value() || self.fractional.contains(v));
        if !needed {
            let plain: Vec<Vec<(usize, Rational)>> = members.iter().map(|&w| matrix.col(w).to_vec()).collect();
            if self.try_columns(&plain) {
                return Some(LedgerPart {
                    members: members.to_vec(),
                    lambda: lambda.to_vec(),
                    cancellation: Vec::new(),
                    linked: false,
                });
            }
            if literal.is_empty() {
                return None;
            }
        }
        let linked = !literal.is_empty();
        let cols: Vec<Vec<(usize, Rational)>> = members
            .iter()
            .zip(lambda)
            .map(|(&w, s)| {
                let mut col: Vec<(usize, Rational)> =
                    matrix.col(w).iter().filter(|(v, _)| !cancel_set.contains(v)).cloned().collect();
                if linked {
                    col.push((t_row, s.apply(&Rational::from_integer(1.into()))));
                }
                col
            })
            .collect();
        self.try_columns(&cols).then(|| LedgerPart {
            members: members.to_vec(),
            lambda: lambda.to_vec(),
            cancellation: literal,
            linked,
        })
    }
}

/// Continuous-column connected components, each as (columns, rows).
fn continuous_components(problem: &Problem) -> Vec<(Vec<usize>, BTreeSet<usize>)> {
    let n = problem.ncols();
    let mut seen = vec![false; n];
    let mut row_seen = vec![false; problem.nrows()];
    let mut out = Vec::new();
    for start in 0..n {
        if problem.integral[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut cols = vec![start];
        let mut rows = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(w) = stack.pop() {
            for (v, _) in problem.matrix.col(w) {
                if row_seen[*v] {
                    continue;
                }
                row_seen[*v] = true;
                rows.insert(*v);
                for (w2, _) in problem.matrix.row(*v) {
                    if !problem.integral[*w2] && !seen[*w2] {
                        seen[*w2] = true;
                        cols.push(*w2);
                        stack.push(*w2);
                    }
                }
            }
        }
        cols.sort_unstable();
        out.push((cols, rows));
    }
    out
}

/// Runs detection on an equality-form problem.
pub fn detect_milp_reduction(problem: &Problem, mode: NetworkMode) -> Result<MilpDetection, MilpError> {
    problem.require_equality_form()?;
    let problem = round_integer_bounds(problem)?;
    let n = problem.ncols();
    let mut fractional = fractional_rows(&problem);

    // Stage 1: certify continuous components or absorb them into the fractional rows.
    let mut stage = Stage4 {
        problem: &problem,
        fractional: &BTreeSet::new(),
        state: NetworkState::new(mode, problem.nrows() + n),
        in_matrix: BTreeSet::new(),
    };
    let mut certified = Vec::new();
    for (cols, rows) in continuous_components(&problem) {
        if rows.iter().any(|v| fractional.contains(v)) {
            fractional.extend(rows);
            continue;
        }
        let columns: Vec<Vec<(usize, Rational)>> = cols.iter().map(|&w| problem.matrix.col(w).to_vec()).collect();
        if stage.try_columns(&columns) {
            stage.in_matrix.extend(cols.iter().copied());
            certified.push(cols);
        } else {
            fractional.extend(rows);
        }
    }
    let fractional_final = fractional.clone();
    stage.fractional = &fractional_final;

    // Stage 2: initial labels; integer columns that would turn bipolar become singletons.
    let delta_center = compute_delta_center(&problem)?;
    let mut init = initial_partition_with(&problem, &fractional_final);
    let mut next_label = init.col_classes.iter().max().map_or(0, |m| m + 1);
    for w in 0..n {
        if problem.integral[w] && would_be_bipolar(&problem, w, &delta_center[w]) {
            init.force_unipolar[w] = true;
            init.col_classes[w] = next_label;
            next_label += 1;
        }
    }

    // Stage 3.
    let first = refine_reflection(&problem, &init, &delta_center)?;

    // Stage 4.
    let mut individual: BTreeSet<usize> = BTreeSet::new();
    for part in first.col_parts.iter().filter(|p| !p.is_unipolar()) {
        for &w in &part.members {
            if stage.in_matrix.contains(&w) {
                continue;
            }
            if stage.try_columns(&[problem.matrix.col(w).to_vec()]) {
                stage.in_matrix.insert(w);
            } else {
                individual.insert(w);
            }
        }
    }
    let mut candidates: Vec<&crate::model::Part> = first
        .col_parts
        .iter()
        .filter(|p| p.is_unipolar() && p.len() >= 2 && p.members.iter().all(|&w| problem.integral[w]))
        .collect();
    candidates.sort_by_key(|p| std::cmp::Reverse(p.len()));
    let mut accepted: Vec<LedgerPart> = Vec::new();
    for (k, part) in candidates.iter().enumerate() {
        let lambda: Vec<Sign> = part.members.iter().map(|&w| first.col_lambda(w)).collect();
        match stage.certify_part(&part.members, &lambda, problem.nrows() + k) {
            Some(entry) => accepted.push(entry),
            None => individual.extend(part.members.iter().copied()),
        }
    }

    // Stage 5: refine again from the individualized partition until the
    // accepted parts keep consistent signs.
    let col_index = first.col_part_index();
    let row_index = first.row_part_index();
    let (final_partition, final_spec) = loop {
        let mut spec = init.clone();
        spec.row_classes = row_index.clone();
        spec.col_classes = col_index.clone();
        let mut label = first.col_parts.len();
        for &w in &individual {
            spec.col_classes[w] = label;
            spec.force_unipolar[w] = true;
            label += 1;
        }
        let second = refine_reflection(&problem, &spec, &delta_center)?;
        let broken: Vec<usize> = accepted
            .iter()
            .enumerate()
            .filter(|(_, part)| !signs_consistent(part, &second))
            .map(|(i, _)| i)
            .collect();
        if broken.is_empty() {
            break (second, spec);
        }
        for i in broken.into_iter().rev() {
            let part = accepted.remove(i);
            individual.extend(part.members);
        }
    };
    let final_partition = canonicalize_signs(final_partition);
    let delta = sparsify_delta(&final_partition, &delta_center, &problem);
    let reduction = ReflectionReduction::new(&problem, final_partition, delta)?;
    let ledger = AtuLedger {
        parts: accepted,
        certified_components: certified,
        fractional_rows: fractional_final.iter().copied().collect(),
    };
    Ok(MilpDetection { problem, first_partition: first, ledger, reduction, delta_center, final_spec })
}

fn would_be_bipolar(problem: &Problem, w: usize, delta: &Rational) -> bool {
    let lo = problem.lower[w].shifted(delta);
    let hi = problem.upper[w].shifted(delta);
    problem.objective[w].is_zero() && lo == hi.negated()
}

/// Every refined fragment of the part must carry the coarse signs up to one flip.
fn signs_consistent(part: &LedgerPart, refined: &BiPartition) -> bool {
    let index = refined.col_part_index();
    let mut relation: BTreeMap<usize, Option<Sign>> = BTreeMap::new();
    for (&w, &coarse) in part.members.iter().zip(&part.lambda) {
        let Some(fine) = refined.col_sign[w] else { return false };
        let rel = coarse.times(fine);
        match relation.entry(index[w]) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(Some(rel));
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                if *e.get() != Some(rel) {
                    return false;
                }
            }
        }
    }
    true
}

/// Fiber polyhedron: the detection problem plus linking equalities and fixings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberSpec {
    pub base: Problem,
    pub links: Vec<(Vec<(usize, Sign)>, Rational)>,
    pub fixed: Vec<(usize, Rational)>,
}

impl FiberSpec {
    pub fn to_problem(&self) -> Problem {
        let mut p = self.base.clone();
        let m = p.nrows();
        let mut entries: Vec<(usize, usize, Rational)> = p.matrix.triplets().map(|(r, c, v)| (r, c, v.clone())).collect();
        for (k, (terms, rhs)) in self.links.iter().enumerate() {
            for (w, s) in terms {
                entries.push((m + k, *w, s.apply(&Rational::from_integer(1.into()))));
            }
            p.rhs.push(rhs.clone());
            p.row_sense.push(RowSense::Eq);
            p.row_names.push(format!("link{}", k + 1));
        }
        p.matrix = SparseMatrix::from_triplets(m + self.links.len(), p.ncols(), entries).expect("fiber rows are valid");
        for (w, v) in &self.fixed {
            p.lower[*w] = Bound::Finite(v.clone());
            p.upper[*w] = Bound::Finite(v.clone());
        }
        p
    }

    pub fn free_integer_columns(&self) -> usize {
        let fixed: BTreeSet<usize> = self.fixed.iter().map(|(w, _)| *w).collect();
        (0..self.base.ncols()).filter(|w| self.base.integral[*w] && !fixed.contains(w)).count()
    }
}

/// Builds the fiber of the reduced point `y`: coarse linking rows for linked
/// ledger parts, and fixings for integer columns outside every ledger part.
pub fn build_fiber(detection: &MilpDetection, y: &[Rational]) -> Result<FiberSpec, MilpError> {
    let reduced = &detection.reduction.reduced;
    for (k, v) in y.iter().enumerate() {
        if reduced.integral.get(k).copied().unwrap_or(false) && !is_integral(v) {
            return Err(MilpError::FractionalReducedValue { col: k });
        }
    }
    let lifted = detection.reduction.lift(y)?;
    fiber_from_lift(&detection.problem, &detection.ledger, &lifted)
}

/// Fiber through a lifted point, usable without the detection run.
pub fn fiber_from_lift(problem: &Problem, ledger: &AtuLedger, lifted: &[Rational]) -> Result<FiberSpec, MilpError> {
    let mut links = Vec::new();
    for part in ledger.linked_parts() {
        let d: Rational = part.members.iter().zip(&part.lambda).map(|(&w, s)| s.apply(&lifted[w])).sum();
        if !is_integral(&d) {
            return Err(MilpError::Invariant(format!("linking value {d} of part {:?} is fractional", part.members)));
        }
        links.push((part.members.iter().copied().zip(part.lambda.iter().copied()).collect(), d));
    }
    let covered = ledger.covered();
    let mut fixed = Vec::new();
    for w in 0..problem.ncols() {
        if problem.integral[w] && !covered.contains(&w) {
            if !is_integral(&lifted[w]) {
                return Err(MilpError::Invariant(format!("lifted value of integer column {w} is fractional")));
            }
            fixed.push((w, lifted[w].clone()));
        }
    }
    Ok(FiberSpec { base: problem.clone(), links, fixed })
}

/// Optimal fiber vertex; it must be integral and no worse than `warm`.
pub fn recover_integral(fiber: &FiberSpec, warm: &[Rational]) -> Result<Vec<Rational>, MilpError> {
    let lp = fiber.to_problem();
    let outcome = LpSolver::new(&lp).solve(&lp.objective, &lp.objective_offset);
    let x = match outcome {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => return Err(MilpError::Invariant(format!("empty fiber: {fiber:?}"))),
        LpOutcome::Unbounded => return Err(MilpError::Invariant("fiber LP is unbounded".into())),
    };
    if let Some(w) = (0..x.len()).find(|&w| fiber.base.integral[w] && !is_integral(&x[w])) {
        return Err(MilpError::Invariant(format!("fiber vertex is fractional in column {w}: {}", x[w])));
    }
    if fiber.base.objective_value(&x) > fiber.base.objective_value(warm) {
        return Err(MilpError::Invariant("recovered point is worse than the lifted point".into()));
    }
    Ok(x)
}
