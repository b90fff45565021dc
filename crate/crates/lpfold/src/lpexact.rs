//! Exact rational primal simplex (two phases, bounded variables, Bland's rule).
//!
//! Meant for verification and small recovery LPs, not for speed.

use log::warn;
use num_traits::{One, Signed, Zero};

use crate::milpfold::FiberSpec;
use crate::model::{Bound, Problem, Rational, RowSense};

const SIZE_GUARDRAIL: usize = 500;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, objective: Rational },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn objective(&self) -> Option<&Rational> {
        match self {
            LpOutcome::Optimal { objective, .. } => Some(objective),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
enum ColumnMap {
    Shift { var: usize, by: Rational },
    Mirror { var: usize, from: Rational },
    Split { pos: usize, neg: usize },
}

/// A simplex tableau kept feasible between solves so several objectives can
/// be optimized over the same polyhedron.
#[derive(Clone, Debug)]
pub struct LpSolver {
    maps: Vec<ColumnMap>,
    tableau: Vec<Vec<Rational>>,
    beta: Vec<Rational>,
    basis: Vec<usize>,
    upper: Vec<Option<Rational>>,
    at_upper: Vec<bool>,
    active: Vec<bool>,
    feasible: bool,
}

enum Step {
    Optimal,
    Unbounded,
}

impl LpSolver {
    /// Builds the tableau and runs phase one.
    pub fn new(problem: &Problem) -> LpSolver {
        if problem.ncols() > SIZE_GUARDRAIL {
            warn!(
                "exact simplex on {} columns exceeds the desk-scale guardrail of {SIZE_GUARDRAIL}",
                problem.ncols()
            );
        }
        let m = problem.nrows();
        let mut maps = Vec::with_capacity(problem.ncols());
        let mut upper: Vec<Option<Rational>> = Vec::new();
        let mut bounds_ok = true;
        for (lo, hi) in problem.lower.iter().zip(&problem.upper) {
            let var = upper.len();
            match (lo, hi) {
                (Bound::Finite(l), hi) => {
                    let width = hi.finite().map(|u| u - l);
                    if width.as_ref().is_some_and(|w| w.is_negative()) {
                        bounds_ok = false;
                    }
                    upper.push(width);
                    maps.push(ColumnMap::Shift { var, by: l.clone() });
                }
                (Bound::NegInf, Bound::Finite(u)) => {
                    upper.push(None);
                    maps.push(ColumnMap::Mirror { var, from: u.clone() });
                }
                _ => {
                    upper.push(None);
                    upper.push(None);
                    maps.push(ColumnMap::Split { pos: var, neg: var + 1 });
                }
            }
        }

        // Dense rows over structural internal variables.
        let nstruct = upper.len();
        let mut rows: Vec<Vec<Rational>> = vec![vec![Rational::zero(); nstruct]; m];
        let mut rhs = problem.rhs.clone();
        for (r, c, v) in problem.matrix.triplets() {
            match &maps[c] {
                ColumnMap::Shift { var, by } => {
                    rows[r][*var] += v;
                    rhs[r] -= v * by;
                }
                ColumnMap::Mirror { var, from } => {
                    rows[r][*var] -= v;
                    rhs[r] -= v * from;
                }
                ColumnMap::Split { pos, neg } => {
                    rows[r][*pos] += v;
                    rows[r][*neg] -= v;
                }
            }
        }

        // Slack columns, then sign-normalize rows so rhs >= 0.
        let mut slack_of_row = vec![None; m];
        let mut slack_coef = vec![Rational::zero(); m];
        for r in 0..m {
            let coef = match problem.row_sense[r] {
                RowSense::Eq => continue,
                RowSense::Le => Rational::one(),
                RowSense::Ge => -Rational::one(),
            };
            slack_of_row[r] = Some(upper.len());
            slack_coef[r] = coef;
            upper.push(None);
        }
        let nreal = upper.len();
        let mut basis = vec![usize::MAX; m];
        let mut nart = 0;
        let mut negate = vec![false; m];
        for r in 0..m {
            negate[r] = rhs[r].is_negative();
            let c = if negate[r] { -&slack_coef[r] } else { slack_coef[r].clone() };
            if slack_of_row[r].is_none() || !c.is_positive() {
                nart += 1;
            }
        }
        let ncols = nreal + nart;
        let mut tableau = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        let mut next_art = nreal;
        for r in 0..m {
            let mut row = std::mem::take(&mut rows[r]);
            row.resize(ncols, Rational::zero());
            if let Some(s) = slack_of_row[r] {
                row[s] = slack_coef[r].clone();
            }
            let mut b = rhs[r].clone();
            if negate[r] {
                row.iter_mut().for_each(|v| *v = -&*v);
                b = -b;
            }
            match slack_of_row[r] {
                Some(s) if row[s].is_positive() => basis[r] = s,
                _ => {
                    row[next_art] = Rational::one();
                    basis[r] = next_art;
                    next_art += 1;
                }
            }
            tableau.push(row);
            beta.push(b);
        }
        upper.resize(ncols, None);
        let mut solver = LpSolver {
            maps,
            tableau,
            beta,
            basis,
            at_upper: vec![false; ncols],
            upper,
            active: vec![true; ncols],
            feasible: bounds_ok,
        };
        if !bounds_ok {
            return solver;
        }

        if nart > 0 {
            let mut cost = vec![Rational::zero(); ncols];
            cost[nreal..].iter_mut().for_each(|c| *c = Rational::one());
            let _ = solver.optimize(&cost);
            let infeasibility: Rational = solver
                .basis
                .iter()
                .zip(&solver.beta)
                .filter(|(b, _)| **b >= nreal)
                .map(|(_, v)| v.clone())
                .sum();
            if !infeasibility.is_zero() {
                solver.feasible = false;
                return solver;
            }
            solver.drive_out_artificials(nreal);
            for a in nreal..ncols {
                solver.active[a] = false;
            }
        }
        solver
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    fn value(&self, var: usize) -> Rational {
        if let Some(row) = self.basis.iter().position(|&b| b == var) {
            return self.beta[row].clone();
        }
        if self.at_upper[var] {
            self.upper[var].clone().expect("at upper implies finite upper")
        } else {
            Rational::zero()
        }
    }

    fn drive_out_artificials(&mut self, nreal: usize) {
        let mut r = 0;
        while r < self.basis.len() {
            if self.basis[r] < nreal {
                r += 1;
                continue;
            }
            let is_basic = self.basis_flags();
            let entering = (0..nreal).find(|&j| !is_basic[j] && !self.tableau[r][j].is_zero());
            match entering {
                Some(j) => {
                    // The artificial sits at zero; j keeps its current value.
                    self.beta[r] = self.value(j);
                    self.at_upper[j] = false;
                    self.pivot(r, j, None);
                    r += 1;
                }
                None => {
                    self.tableau.remove(r);
                    self.beta.remove(r);
                    self.basis.remove(r);
                }
            }
        }
    }

    fn basis_flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.upper.len()];
        for &b in &self.basis {
            f[b] = true;
        }
        f
    }

    fn pivot(&mut self, row: usize, col: usize, reduced: Option<&mut Vec<Rational>>) {
        let p = self.tableau[row][col].clone();
        if !p.is_one() {
            for v in self.tableau[row].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
        }
        let support: Vec<usize> = (0..self.tableau[row].len()).filter(|&j| !self.tableau[row][j].is_zero()).collect();
        let pivot_row = std::mem::take(&mut self.tableau[row]);
        for (k, other) in self.tableau.iter_mut().enumerate() {
            if k == row || other[col].is_zero() {
                continue;
            }
            let f = other[col].clone();
            for &j in &support {
                other[j] -= &f * &pivot_row[j];
            }
        }
        if let Some(d) = reduced {
            if !d[col].is_zero() {
                let f = d[col].clone();
                for &j in &support {
                    d[j] -= &f * &pivot_row[j];
                }
            }
        }
        self.tableau[row] = pivot_row;
        self.basis[row] = col;
    }

    fn optimize(&mut self, cost: &[Rational]) -> Step {
        let n = self.upper.len();
        let mut d = cost.to_vec();
        for (row, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            for j in 0..n {
                if !self.tableau[row][j].is_zero() {
                    d[j] -= &cost[b] * &self.tableau[row][j];
                }
            }
        }
        loop {
            let is_basic = self.basis_flags();
            let entering = (0..n).find(|&j| {
                self.active[j]
                    && !is_basic[j]
                    && ((!self.at_upper[j] && d[j].is_negative()) || (self.at_upper[j] && d[j].is_positive()))
            });
            let Some(j) = entering else { return Step::Optimal };
            let increasing = !self.at_upper[j];

            // Basic variables move at rate -dir * T_ij per unit step.
            let mut best: Option<(Rational, Option<usize>)> = self.upper[j].clone().map(|u| (u, None));
            for (i, row) in self.tableau.iter().enumerate() {
                let t = &row[j];
                if t.is_zero() {
                    continue;
                }
                let rate = if increasing { -t } else { t.clone() };
                let b = self.basis[i];
                let limit = if rate.is_negative() {
                    Some(&self.beta[i] / -&rate)
                } else {
                    self.upper[b].as_ref().map(|u| (u - &self.beta[i]) / &rate)
                };
                let Some(limit) = limit else { continue };
                let better = match &best {
                    None => true,
                    Some((cur, cur_row)) => {
                        limit < *cur
                            || (limit == *cur
                                && match cur_row {
                                    None => false,
                                    Some(r) => b < self.basis[*r],
                                })
                    }
                };
                if better {
                    best = Some((limit, Some(i)));
                }
            }
            let Some((theta, leave)) = best else { return Step::Unbounded };
            for (i, row) in self.tableau.iter().enumerate() {
                let t = &row[j];
                if !t.is_zero() {
                    let delta = t * &theta;
                    if increasing {
                        self.beta[i] -= delta;
                    } else {
                        self.beta[i] += delta;
                    }
                }
            }
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some(i) => {
                    let b = self.basis[i];
                    self.at_upper[b] = !self.beta[i].is_zero();
                    let entering_value = if increasing {
                        theta
                    } else {
                        self.upper[j].clone().expect("decreasing implies finite upper") - &theta
                    };
                    self.at_upper[j] = false;
                    self.beta[i] = entering_value;
                    self.pivot(i, j, Some(&mut d));
                }
            }
        }
    }

    fn internal_cost(&self, objective: &[Rational]) -> Vec<Rational> {
        let mut cost = vec![Rational::zero(); self.upper.len()];
        for (c, map) in objective.iter().zip(&self.maps) {
            match map {
                ColumnMap::Shift { var, .. } => cost[*var] += c,
                ColumnMap::Mirror { var, .. } => cost[*var] -= c,
                ColumnMap::Split { pos, neg } => {
                    cost[*pos] += c;
                    cost[*neg] -= c;
                }
            }
        }
        cost
    }

    /// The current basic point in original coordinates.
    pub fn current_point(&self) -> Vec<Rational> {
        self.maps
            .iter()
            .map(|map| match map {
                ColumnMap::Shift { var, by } => self.value(*var) + by,
                ColumnMap::Mirror { var, from } => from - self.value(*var),
                ColumnMap::Split { pos, neg } => self.value(*pos) - self.value(*neg),
            })
            .collect()
    }

    /// Minimizes `objective . x + offset` from the current basis.
    pub fn solve(&mut self, objective: &[Rational], offset: &Rational) -> LpOutcome {
        if !self.feasible {
            return LpOutcome::Infeasible;
        }
        let cost = self.internal_cost(objective);
        match self.optimize(&cost) {
            Step::Unbounded => LpOutcome::Unbounded,
            Step::Optimal => {
                let x = self.current_point();
                let value: Rational = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                LpOutcome::Optimal { objective: value + offset, x }
            }
        }
    }

    /// A feasible basic point reached while minimizing `objective`, also
    /// when the objective is unbounded below.
    pub fn vertex_for(&mut self, objective: &[Rational]) -> Option<Vec<Rational>> {
        if !self.feasible {
            return None;
        }
        let cost = self.internal_cost(objective);
        let _ = self.optimize(&cost);
        Some(self.current_point())
    }
}

pub fn solve_lp(problem: &Problem) -> LpOutcome {
    LpSolver::new(problem).solve(&problem.objective, &problem.objective_offset)
}

/// Optimal basic solution of `objective` over the fiber polyhedron.
pub fn optimal_vertex_on_fiber(fiber: &FiberSpec, objective: &[Rational]) -> LpOutcome {
    let lp = fiber.to_problem();
    LpSolver::new(&lp).solve(objective, &Rational::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_integral, rat, ratio, SparseMatrix};
    use proptest::prelude::*;

    fn lp(rows: &[Vec<i64>], senses: &[RowSense], rhs: &[i64], lo: &[Bound], hi: &[Bound], c: &[i64]) -> Problem {
        let mut p = Problem::new(
            SparseMatrix::from_dense(rows),
            rhs.iter().map(|&v| rat(v)).collect(),
            lo.to_vec(),
            hi.to_vec(),
            c.iter().map(|&v| rat(v)).collect(),
        )
        .unwrap();
        p.row_sense = senses.to_vec();
        p
    }

    #[test]
    fn slack_example_original_and_reduced() {
        let fin = |v| Bound::from_int(v);
        let orig = lp(
            &[vec![2, 1, 1, 1, 0, 0], vec![-1, -2, -1, 0, 1, 0], vec![-1, 1, 0, 0, 0, 1]],
            &[RowSense::Eq; 3],
            &[5, -3, 1],
            &vec![fin(0); 6],
            &[fin(2), fin(2), fin(2), Bound::PosInf, Bound::PosInf, Bound::PosInf],
            &[1, -1, 0, 0, 0, 0],
        );
        assert_eq!(solve_lp(&orig).objective(), Some(&rat(-1)));
        let red = lp(
            &[vec![1, 1, 0], vec![-1, 0, 1]],
            &[RowSense::Eq; 2],
            &[2, 1],
            &[fin(-2), fin(0), fin(0)],
            &[fin(2), Bound::PosInf, Bound::PosInf],
            &[1, 0, 0],
        );
        let out = solve_lp(&red);
        assert_eq!(out.objective(), Some(&rat(-1)));
        red.check_feasible(out.point().unwrap(), false).unwrap();
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[vec![1], vec![1]], &[RowSense::Ge, RowSense::Le], &[1, 0], &[Bound::NegInf], &[Bound::PosInf], &[0]);
        assert_eq!(solve_lp(&p), LpOutcome::Infeasible);
        let p = lp(&[vec![1, -1]], &[RowSense::Eq], &[0], &vec![Bound::NegInf; 2], &vec![Bound::PosInf; 2], &[1, 1]);
        assert_eq!(solve_lp(&p), LpOutcome::Unbounded);
    }

    #[test]
    fn mirrored_and_fractional() {
        // max x + y s.t. 2x + 3y <= 7, x <= 2, y <= 3/2 (upper-only bounds)
        let mut p = lp(&[vec![2, 3]], &[RowSense::Le], &[7], &vec![Bound::NegInf; 2], &[Bound::from_int(2), Bound::Finite(ratio(3, 2))], &[-1, -1]);
        p.lower = vec![Bound::from_int(0), Bound::from_int(0)];
        let out = solve_lp(&p);
        assert_eq!(out.objective(), Some(&rat(-3)));
        p.lower = vec![Bound::NegInf, Bound::from_int(0)];
        let out = solve_lp(&p);
        p.check_feasible(out.point().unwrap(), false).unwrap();
        assert_eq!(out.objective(), Some(&rat(-3)));
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let p = lp(
            &[vec![1, 1], vec![2, 2]],
            &[RowSense::Eq; 2],
            &[1, 2],
            &vec![Bound::from_int(0); 2],
            &vec![Bound::PosInf; 2],
            &[1, 2],
        );
        let out = solve_lp(&p);
        assert_eq!(out.objective(), Some(&rat(1)));
    }

    #[test]
    fn fully_fixed_fiber_returns_its_point() {
        let base = lp(&[vec![1, 1], vec![1, -1]], &[RowSense::Le, RowSense::Ge], &[3, -1], &vec![Bound::from_int(0); 2], &vec![Bound::from_int(2); 2], &[1, 1]);
        let fiber = FiberSpec { base, links: Vec::new(), fixed: vec![(0, rat(1)), (1, rat(2))] };
        let out = optimal_vertex_on_fiber(&fiber, &[rat(-1), rat(5)]);
        assert_eq!(out.point(), Some(&[rat(1), rat(2)][..]));
    }

    fn brute_force_box(p: &Problem, max: i64) -> Option<Rational> {
        // Enumerates vertices of tiny problems by checking all integer grid
        // points; only correct when optima are integral, which holds for the
        // unimodular instances generated below.
        let n = p.ncols();
        let mut best: Option<Rational> = None;
        let mut x = vec![0i64; n];
        loop {
            let xr: Vec<Rational> = x.iter().map(|&v| rat(v)).collect();
            if p.check_feasible(&xr, false).is_ok() {
                let v = p.objective_value(&xr);
                if best.as_ref().map_or(true, |b| v < *b) {
                    best = Some(v);
                }
            }
            let mut k = 0;
            while k < n {
                x[k] += 1;
                if x[k] <= max {
                    break;
                }
                x[k] = 0;
                k += 1;
            }
            if k == n {
                return best;
            }
        }
    }

    proptest! {
        #[test]
        fn matches_grid_search_on_interval_systems(
            lens in proptest::collection::vec((0usize..3, 1usize..3), 1..4),
            rhs in proptest::collection::vec(0i64..4, 4),
            c in proptest::collection::vec(-3i64..4, 3),
        ) {
            // Consecutive-ones rows are totally unimodular, so LP optima are integral.
            let rows: Vec<Vec<i64>> = lens
                .iter()
                .map(|&(s, l)| (0..3).map(|j| i64::from(j >= s && j < s + l)).collect())
                .collect();
            let m = rows.len();
            let p = lp(&rows, &vec![RowSense::Le; m], &rhs[..m], &vec![Bound::from_int(0); 3], &vec![Bound::from_int(3); 3], &c);
            let out = solve_lp(&p);
            let grid = brute_force_box(&p, 3);
            prop_assert_eq!(out.objective().cloned(), grid);
            if let Some(x) = out.point() {
                prop_assert!(p.check_feasible(x, false).is_ok());
            }
        }

        #[test]
        fn incidence_fibers_have_integral_vertices(
            arcs in proptest::collection::vec((0usize..4, 1usize..4, 0i64..3, 1i64..3), 1..6),
            c in proptest::collection::vec(-3i64..4, 6),
        ) {
            // Node-arc incidence rows, all kept, so one row is always redundant.
            let n = arcs.len();
            let mut rows = vec![vec![0i64; n]; 4];
            let mut rhs = vec![0i64; 4];
            let mut upper = Vec::new();
            for (j, &(tail, step, flow, cap)) in arcs.iter().enumerate() {
                let head = (tail + step) % 4;
                let flow = flow.min(cap);
                rows[tail][j] = 1;
                rows[head][j] = -1;
                rhs[tail] += flow;
                rhs[head] -= flow;
                upper.push(Bound::from_int(cap));
            }
            let p = lp(&rows, &[RowSense::Eq; 4], &rhs, &vec![Bound::from_int(0); n], &upper, &c[..n]);
            let out = solve_lp(&p);
            prop_assert_eq!(out.objective().cloned(), brute_force_box(&p, 2));
            let x = out.point().expect("the planted flow is feasible");
            prop_assert!(x.iter().all(is_integral));
            prop_assert!(p.check_feasible(x, true).is_ok());
        }

        #[test]
        fn warm_restarts_agree_with_fresh_solves(
            c1 in proptest::collection::vec(-3i64..4, 3),
            c2 in proptest::collection::vec(-3i64..4, 3),
        ) {
            let p = lp(
                &[vec![1, 2, 1], vec![3, 1, -1]],
                &[RowSense::Le, RowSense::Ge],
                &[6, -2],
                &[Bound::from_int(-1), Bound::from_int(0), Bound::NegInf],
                &[Bound::from_int(4), Bound::PosInf, Bound::from_int(2)],
                &[0, 0, 0],
            );
            let mut solver = LpSolver::new(&p);
            for c in [&c1, &c2] {
                let obj: Vec<Rational> = c.iter().map(|&v| rat(v)).collect();
                let warm = solver.solve(&obj, &Rational::zero());
                let mut q = p.clone();
                q.objective = obj;
                let cold = solve_lp(&q);
                prop_assert_eq!(warm.objective().cloned(), cold.objective().cloned());
            }
        }
    }
}
