//! Independent oracles used by the integration tests.

#![allow(dead_code)]

use lpfold::model::{Bound, Problem, Rational, RowSense};
use num_traits::{Signed, Zero};

/// Solves `m x = rhs` for square or tall `m`; `None` unless the solution is unique.
fn unique_solution(m: &[Vec<Rational>], rhs: &[Rational], ncols: usize) -> Option<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = m.iter().zip(rhs).map(|(row, b)| {
        let mut r = row.clone();
        r.push(b.clone());
        r
    }).collect();
    let rows = a.len();
    let mut pivot_row = 0;
    for col in 0..ncols {
        let p = (pivot_row..rows).find(|&r| !a[r][col].is_zero())?;
        a.swap(pivot_row, p);
        let inv = a[pivot_row][col].clone();
        for v in a[pivot_row].iter_mut() {
            *v = &*v / &inv;
        }
        for r in 0..rows {
            if r != pivot_row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..=ncols {
                    let delta = &f * &a[pivot_row][c];
                    a[r][c] = &a[r][c] - delta;
                }
            }
        }
        pivot_row += 1;
    }
    if a[pivot_row..].iter().any(|row| !row[ncols].is_zero()) {
        return None;
    }
    Some((0..ncols).map(|c| a[c][ncols].clone()).collect())
}

/// Minimum objective (with offset) over all vertices of an equality-form
/// problem with a pointed, bounded feasible region; `None` if infeasible.
pub fn vertex_minimum(p: &Problem) -> Option<Rational> {
    assert!(p.row_sense.iter().all(|s| *s == RowSense::Eq), "vertex oracle expects equality rows");
    let n = p.ncols();
    assert!(n <= 12, "vertex oracle is exponential");
    let dense = p.matrix.to_dense();
    let mut best: Option<Rational> = None;
    let mut status = vec![0u8; n];
    loop {
        // 0 = basic, 1 = at lower, 2 = at upper
        let valid = (0..n).all(|w| match status[w] {
            1 => p.lower[w].is_finite(),
            2 => p.upper[w].is_finite() && p.upper[w] != p.lower[w],
            _ => true,
        });
        if valid {
            let mut x = vec![Rational::zero(); n];
            for w in 0..n {
                match status[w] {
                    1 => x[w] = p.lower[w].finite().unwrap().clone(),
                    2 => x[w] = p.upper[w].finite().unwrap().clone(),
                    _ => {}
                }
            }
            let free: Vec<usize> = (0..n).filter(|&w| status[w] == 0).collect();
            let rhs: Vec<Rational> = (0..p.nrows())
                .map(|r| &p.rhs[r] - (0..n).filter(|w| status[*w] != 0).map(|w| &dense[r][w] * &x[w]).sum::<Rational>())
                .collect();
            let sub: Vec<Vec<Rational>> = dense.iter().map(|row| free.iter().map(|&w| row[w].clone()).collect()).collect();
            if let Some(sol) = unique_solution(&sub, &rhs, free.len()) {
                for (k, &w) in free.iter().enumerate() {
                    x[w] = sol[k].clone();
                }
                if (0..n).all(|w| p.lower[w].le_value(&x[w]) && p.upper[w].ge_value(&x[w])) {
                    let value = p.objective_value(&x);
                    if best.as_ref().is_none_or(|b| value < *b) {
                        best = Some(value);
                    }
                }
            }
        }
        let mut k = 0;
        while k < n && status[k] == 2 {
            status[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
        status[k] += 1;
    }
    best
}

fn finite_int(b: &Bound, cap: i64, low: bool) -> i64 {
    match b {
        Bound::Finite(v) => {
            let v = if low { v.ceil() } else { v.floor() };
            v.to_integer().try_into().expect("small bound")
        }
        _ if low => -cap,
        _ => cap,
    }
}

/// Exhaustive branch and bound over an all-integer problem; infinite bounds
/// are replaced by `±cap`. Returns the optimum with offset and a minimizer.
pub fn brute_force_milp(p: &Problem, cap: i64) -> Option<(Rational, Vec<Rational>)> {
    assert!(p.integral.iter().all(|&b| b), "brute force expects integer columns only");
    let n = p.ncols();
    let m = p.nrows();
    let lo: Vec<i64> = p.lower.iter().map(|b| finite_int(b, cap, true)).collect();
    let hi: Vec<i64> = p.upper.iter().map(|b| finite_int(b, cap, false)).collect();
    let coef: Vec<Vec<(usize, Rational)>> = (0..n).map(|w| p.matrix.col(w).to_vec()).collect();
    // suffix activity ranges per row
    let mut min_rest = vec![vec![Rational::zero(); m]; n + 1];
    let mut max_rest = vec![vec![Rational::zero(); m]; n + 1];
    let mut obj_rest = vec![Rational::zero(); n + 1];
    for w in (0..n).rev() {
        min_rest[w] = min_rest[w + 1].clone();
        max_rest[w] = max_rest[w + 1].clone();
        for (r, a) in &coef[w] {
            let (x, y) = (a * Rational::from_integer(lo[w].into()), a * Rational::from_integer(hi[w].into()));
            let (small, large) = if x <= y { (x, y) } else { (y, x) };
            min_rest[w][*r] += small;
            max_rest[w][*r] += large;
        }
        let c = &p.objective[w];
        let best = if c.is_negative() { c * Rational::from_integer(hi[w].into()) } else { c * Rational::from_integer(lo[w].into()) };
        obj_rest[w] = &obj_rest[w + 1] + best;
    }
    struct Search<'a> {
        p: &'a Problem,
        lo: &'a [i64],
        hi: &'a [i64],
        coef: &'a [Vec<(usize, Rational)>],
        min_rest: &'a [Vec<Rational>],
        max_rest: &'a [Vec<Rational>],
        obj_rest: &'a [Rational],
        act: Vec<Rational>,
        x: Vec<Rational>,
        best: Option<(Rational, Vec<Rational>)>,
    }
    impl Search<'_> {
        fn feasible_rest(&self, w: usize) -> bool {
            (0..self.p.nrows()).all(|r| {
                let low = &self.act[r] + &self.min_rest[w][r];
                let high = &self.act[r] + &self.max_rest[w][r];
                match self.p.row_sense[r] {
                    RowSense::Le => low <= self.p.rhs[r],
                    RowSense::Ge => high >= self.p.rhs[r],
                    RowSense::Eq => low <= self.p.rhs[r] && high >= self.p.rhs[r],
                }
            })
        }

        fn go(&mut self, w: usize, obj: Rational) {
            if !self.feasible_rest(w) {
                return;
            }
            if let Some((b, _)) = &self.best {
                if &obj + &self.obj_rest[w] >= *b {
                    return;
                }
            }
            if w == self.x.len() {
                self.best = Some((obj, self.x.clone()));
                return;
            }
            for v in self.lo[w]..=self.hi[w] {
                let val = Rational::from_integer(v.into());
                for (r, a) in &self.coef[w] {
                    self.act[*r] += a * &val;
                }
                self.x[w] = val.clone();
                let next = &obj + &self.p.objective[w] * &val;
                self.go(w + 1, next);
                for (r, a) in &self.coef[w] {
                    self.act[*r] -= a * &val;
                }
            }
        }
    }
    let mut s = Search {
        p,
        lo: &lo,
        hi: &hi,
        coef: &coef,
        min_rest: &min_rest,
        max_rest: &max_rest,
        obj_rest: &obj_rest,
        act: vec![Rational::zero(); m],
        x: vec![Rational::zero(); n],
        best: None,
    };
    s.go(0, p.objective_offset.clone());
    s.best
}

fn det_i128(mut a: Vec<Vec<i128>>) -> i128 {
    // fraction-free elimination
    let n = a.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&r| a[r][k] != 0) else { return 0 };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Whether every square submatrix has determinant in {-1, 0, 1}.
pub fn totally_unimodular(dense: &[Vec<i64>]) -> bool {
    let m = dense.len();
    let n = dense.first().map_or(0, Vec::len);
    let subsets = |k: usize, size: usize| -> Vec<Vec<usize>> {
        (0u32..1 << size).filter(|s| s.count_ones() as usize == k).map(|s| (0..size).filter(|i| s >> i & 1 == 1).collect()).collect()
    };
    for k in 1..=m.min(n) {
        for rows in subsets(k, m) {
            for cols in subsets(k, n) {
                let sub: Vec<Vec<i128>> = rows.iter().map(|&r| cols.iter().map(|&c| dense[r][c] as i128).collect()).collect();
                if det_i128(sub).abs() > 1 {
                    return false;
                }
            }
        }
    }
    true
}
