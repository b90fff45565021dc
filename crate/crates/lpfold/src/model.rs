//! Problem representation, exact arithmetic helpers, signed partitions and
//! the aggregation maps between an LP and its folded counterpart.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number; always normalized with a positive denominator.
pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn is_integral(r: &Rational) -> bool {
    r.denom().is_one()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("duplicate matrix entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("offset for column {col} lies outside its bounds")]
    DeltaOutOfBounds { col: usize },
    #[error("column {col} has lower bound above upper bound")]
    InfeasibleBounds { col: usize },
    #[error("column {col} has an illegal infinite bound")]
    IllegalInfinity { col: usize },
    #[error("row {row} is not an equality")]
    NotEqualityForm { row: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// A bound value in the extended reals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl Bound {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn from_int(n: i64) -> Bound {
        Bound::Finite(rat(n))
    }

    pub fn negated(&self) -> Bound {
        match self {
            Bound::NegInf => Bound::PosInf,
            Bound::PosInf => Bound::NegInf,
            Bound::Finite(v) => Bound::Finite(-v),
        }
    }

    pub fn shifted(&self, by: &Rational) -> Bound {
        match self {
            Bound::Finite(v) => Bound::Finite(v - by),
            other => other.clone(),
        }
    }

    /// Sum of bounds of one kind; mixing opposite infinities is a logic error.
    pub fn sum<'a, I: IntoIterator<Item = &'a Bound>>(items: I) -> Bound {
        let mut acc = Rational::zero();
        let mut inf: Option<Bound> = None;
        for b in items {
            match b {
                Bound::Finite(v) => acc += v,
                other => {
                    debug_assert!(inf.as_ref().is_none_or(|i| i == other));
                    inf = Some(other.clone());
                }
            }
        }
        inf.unwrap_or(Bound::Finite(acc))
    }

    pub fn le_value(&self, v: &Rational) -> bool {
        match self {
            Bound::NegInf => true,
            Bound::PosInf => false,
            Bound::Finite(b) => b <= v,
        }
    }

    pub fn ge_value(&self, v: &Rational) -> bool {
        match self {
            Bound::NegInf => false,
            Bound::PosInf => true,
            Bound::Finite(b) => b >= v,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => write!(f, "-inf"),
            Bound::PosInf => write!(f, "+inf"),
            Bound::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// Sparse matrix kept in both row-major and column-major form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, Rational)>>,
    cols: Vec<Vec<(usize, Rational)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> SparseMatrix {
        SparseMatrix {
            nrows,
            ncols,
            rows: vec![Vec::new(); nrows],
            cols: vec![Vec::new(); ncols],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Zeros are dropped and
    /// repeated coordinates are rejected.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, entries: I) -> Result<SparseMatrix, ModelError>
    where
        I: IntoIterator<Item = (usize, usize, Rational)>,
    {
        let mut m = SparseMatrix::zeros(nrows, ncols);
        let mut seen = BTreeSet::new();
        for (r, c, v) in entries {
            if r >= nrows {
                return Err(ModelError::IndexOutOfRange { what: "row", index: r, size: nrows });
            }
            if c >= ncols {
                return Err(ModelError::IndexOutOfRange { what: "column", index: c, size: ncols });
            }
            if !seen.insert((r, c)) {
                return Err(ModelError::DuplicateEntry { row: r, col: c });
            }
            if !v.is_zero() {
                m.rows[r].push((c, v.clone()));
                m.cols[c].push((r, v));
            }
        }
        for row in &mut m.rows {
            row.sort_by_key(|e| e.0);
        }
        for col in &mut m.cols {
            col.sort_by_key(|e| e.0);
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<i64>]) -> SparseMatrix {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, rat(v))));
        SparseMatrix::from_triplets(nrows, ncols, entries).expect("dense input is well formed")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[(usize, Rational)] {
        &self.rows[r]
    }

    pub fn col(&self, c: usize) -> &[(usize, Rational)] {
        &self.cols[c]
    }

    pub fn get(&self, r: usize, c: usize) -> Rational {
        self.rows[r]
            .binary_search_by_key(&c, |e| e.0)
            .map(|i| self.rows[r][i].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, &Rational)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |(c, v)| (r, *c, v)))
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Vec<Rational> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(c, v)| v * &x[*c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<Rational>> {
        let mut d = vec![vec![Rational::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v.clone();
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowSense {
    Eq,
    Le,
    Ge,
}

/// A (mixed-integer) linear program `min c'x + offset` over rows with senses
/// and column bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub matrix: SparseMatrix,
    pub rhs: Vec<Rational>,
    pub row_sense: Vec<RowSense>,
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
    pub objective: Vec<Rational>,
    pub integral: Vec<bool>,
    pub objective_offset: Rational,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
}

/// Why a point fails to be feasible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Dimension { expected: usize, found: usize },
    Bound { col: usize },
    Row { row: usize },
    Integrality { col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { expected, found } => {
                write!(f, "point has {found} coordinates, expected {expected}")
            }
            Violation::Bound { col } => write!(f, "column {col} violates its bounds"),
            Violation::Row { row } => write!(f, "row {row} is violated"),
            Violation::Integrality { col } => write!(f, "column {col} is not integral"),
        }
    }
}

impl Problem {
    /// Equality-constrained problem with default names.
    pub fn new(
        matrix: SparseMatrix,
        rhs: Vec<Rational>,
        lower: Vec<Bound>,
        upper: Vec<Bound>,
        objective: Vec<Rational>,
    ) -> Result<Problem, ModelError> {
        let (m, n) = (matrix.nrows(), matrix.ncols());
        let p = Problem {
            name: "problem".into(),
            matrix,
            rhs,
            row_sense: vec![RowSense::Eq; m],
            lower,
            upper,
            objective,
            integral: vec![false; n],
            objective_offset: Rational::zero(),
            row_names: (0..m).map(|i| format!("r{}", i + 1)).collect(),
            col_names: (0..n).map(|j| format!("x{}", j + 1)).collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (m, n) = (self.nrows(), self.ncols());
        let checks: [(&'static str, usize, usize); 7] = [
            ("rhs", m, self.rhs.len()),
            ("row senses", m, self.row_sense.len()),
            ("row names", m, self.row_names.len()),
            ("lower bounds", n, self.lower.len()),
            ("upper bounds", n, self.upper.len()),
            ("objective", n, self.objective.len()),
            ("column names", n, self.col_names.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(ModelError::DimensionMismatch { what, expected, found });
            }
        }
        if self.integral.len() != n {
            return Err(ModelError::DimensionMismatch {
                what: "integrality marks",
                expected: n,
                found: self.integral.len(),
            });
        }
        for col in 0..n {
            if self.lower[col] == Bound::PosInf || self.upper[col] == Bound::NegInf {
                return Err(ModelError::IllegalInfinity { col });
            }
            if self.lower[col] > self.upper[col] {
                return Err(ModelError::InfeasibleBounds { col });
            }
        }
        Ok(())
    }

    pub fn is_equality_form(&self) -> bool {
        self.row_sense.iter().all(|s| *s == RowSense::Eq)
    }

    pub fn require_equality_form(&self) -> Result<(), ModelError> {
        match self.row_sense.iter().position(|s| *s != RowSense::Eq) {
            Some(row) => Err(ModelError::NotEqualityForm { row }),
            None => Ok(()),
        }
    }

    pub fn has_integers(&self) -> bool {
        self.integral.iter().any(|&b| b)
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        let dot: Rational = self.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        dot + &self.objective_offset
    }

    /// Checks bounds and rows exactly; integrality only when `integers` is set.
    pub fn check_feasible(&self, x: &[Rational], integers: bool) -> Result<(), Violation> {
        if x.len() != self.ncols() {
            return Err(Violation::Dimension { expected: self.ncols(), found: x.len() });
        }
        for (col, v) in x.iter().enumerate() {
            if !self.lower[col].le_value(v) || !self.upper[col].ge_value(v) {
                return Err(Violation::Bound { col });
            }
            if integers && self.integral[col] && !is_integral(v) {
                return Err(Violation::Integrality { col });
            }
        }
        for (row, act) in self.matrix.mul_vec(x).iter().enumerate() {
            let ok = match self.row_sense[row] {
                RowSense::Eq => *act == self.rhs[row],
                RowSense::Le => *act <= self.rhs[row],
                RowSense::Ge => *act >= self.rhs[row],
            };
            if !ok {
                return Err(Violation::Row { row });
            }
        }
        Ok(())
    }

    /// Converts inequalities to equalities with one slack column per
    /// inequality row; GE rows are negated first so every slack lives in
    /// `[0, inf)`. Structural columns keep their positions.
    pub fn to_equality_form(&self) -> StandardForm {
        let (m, n) = (self.nrows(), self.ncols());
        let mut names: BTreeSet<String> = self.col_names.iter().cloned().collect();
        let mut entries: Vec<(usize, usize, Rational)> = Vec::with_capacity(self.matrix.nnz() + m);
        let mut rhs = self.rhs.clone();
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        let mut objective = self.objective.clone();
        let mut integral = self.integral.clone();
        let mut col_names = self.col_names.clone();
        let mut slack_of_row = vec![None; m];
        for (r, c, v) in self.matrix.triplets() {
            let v = if self.row_sense[r] == RowSense::Ge { -v } else { v.clone() };
            entries.push((r, c, v));
        }
        let mut next = n;
        for row in 0..m {
            if self.row_sense[row] == RowSense::Eq {
                continue;
            }
            if self.row_sense[row] == RowSense::Ge {
                rhs[row] = -&rhs[row];
            }
            entries.push((row, next, Rational::one()));
            lower.push(Bound::Finite(Rational::zero()));
            upper.push(Bound::PosInf);
            objective.push(Rational::zero());
            integral.push(false);
            let mut name = format!("{}_slack", self.row_names[row]);
            while names.contains(&name) {
                name.push('_');
            }
            names.insert(name.clone());
            col_names.push(name);
            slack_of_row[row] = Some(next);
            next += 1;
        }
        let matrix = SparseMatrix::from_triplets(m, next, entries).expect("indices are in range");
        let problem = Problem {
            name: self.name.clone(),
            matrix,
            rhs,
            row_sense: vec![RowSense::Eq; m],
            lower,
            upper,
            objective,
            integral,
            objective_offset: self.objective_offset.clone(),
            row_names: self.row_names.clone(),
            col_names,
        };
        StandardForm { problem, structural: n, slack_of_row }
    }
}

/// Equality form of a problem together with the slack bookkeeping.
#[derive(Clone, Debug)]
pub struct StandardForm {
    pub problem: Problem,
    pub structural: usize,
    pub slack_of_row: Vec<Option<usize>>,
}

impl StandardForm {
    pub fn is_slack(&self, col: usize) -> bool {
        col >= self.structural
    }

    /// Extends a structural point with the slack values it implies.
    pub fn complete_point(&self, original: &Problem, x: &[Rational]) -> Vec<Rational> {
        let mut full = x.to_vec();
        full.resize(self.problem.ncols(), Rational::zero());
        let act = original.matrix.mul_vec(x);
        for (row, slack) in self.slack_of_row.iter().enumerate() {
            if let Some(s) = slack {
                full[*s] = match original.row_sense[row] {
                    RowSense::Le => &original.rhs[row] - &act[row],
                    RowSense::Ge => &act[row] - &original.rhs[row],
                    RowSense::Eq => unreachable!("equality rows carry no slack"),
                };
            }
        }
        full
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(r: &Rational) -> Sign {
        if r.is_negative() {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn apply(self, r: &Rational) -> Rational {
        match self {
            Sign::Plus => r.clone(),
            Sign::Minus => -r,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Unipolar,
    Bipolar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Part {
    pub members: Vec<usize>,
    pub polarity: Polarity,
}

impl Part {
    pub fn unipolar(members: Vec<usize>) -> Part {
        Part { members, polarity: Polarity::Unipolar }
    }

    pub fn bipolar(members: Vec<usize>) -> Part {
        Part { members, polarity: Polarity::Bipolar }
    }

    pub fn is_unipolar(&self) -> bool {
        self.polarity == Polarity::Unipolar
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Row and column partitions with per-element signs on unipolar parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiPartition {
    pub row_parts: Vec<Part>,
    pub col_parts: Vec<Part>,
    pub row_sign: Vec<Option<Sign>>,
    pub col_sign: Vec<Option<Sign>>,
}

impl BiPartition {
    /// Every row and column in its own unipolar part with sign `+`.
    pub fn discrete(nrows: usize, ncols: usize) -> BiPartition {
        BiPartition {
            row_parts: (0..nrows).map(|i| Part::unipolar(vec![i])).collect(),
            col_parts: (0..ncols).map(|j| Part::unipolar(vec![j])).collect(),
            row_sign: vec![Some(Sign::Plus); nrows],
            col_sign: vec![Some(Sign::Plus); ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_sign.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_sign.len()
    }

    pub fn validate(&self, nrows: usize, ncols: usize) -> Result<(), ModelError> {
        check_side("row", &self.row_parts, &self.row_sign, nrows)?;
        check_side("column", &self.col_parts, &self.col_sign, ncols)
    }

    /// Sorts members and orders parts by their smallest element.
    pub fn canonical_order(mut self) -> BiPartition {
        for part in self.row_parts.iter_mut().chain(self.col_parts.iter_mut()) {
            part.members.sort_unstable();
        }
        self.row_parts.sort_by_key(|p| p.members[0]);
        self.col_parts.sort_by_key(|p| p.members[0]);
        self
    }

    pub fn row_part_index(&self) -> Vec<usize> {
        part_index(&self.row_parts, self.nrows())
    }

    pub fn col_part_index(&self) -> Vec<usize> {
        part_index(&self.col_parts, self.ncols())
    }

    pub fn unipolar_row_parts(&self) -> impl Iterator<Item = &Part> {
        self.row_parts.iter().filter(|p| p.is_unipolar())
    }

    pub fn unipolar_col_parts(&self) -> impl Iterator<Item = &Part> {
        self.col_parts.iter().filter(|p| p.is_unipolar())
    }

    pub fn col_lambda(&self, col: usize) -> Sign {
        self.col_sign[col].unwrap_or(Sign::Plus)
    }

    pub fn row_gamma(&self, row: usize) -> Sign {
        self.row_sign[row].unwrap_or(Sign::Plus)
    }

    /// Same parts, polarities and signs up to flipping whole parts.
    pub fn same_structure(&self, other: &BiPartition) -> bool {
        fn side(a: &[Part], sa: &[Option<Sign>], b: &[Part], sb: &[Option<Sign>]) -> bool {
            a.len() == b.len()
                && a.iter().zip(b).all(|(p, q)| {
                    if p.members != q.members || p.polarity != q.polarity {
                        return false;
                    }
                    if !p.is_unipolar() {
                        return true;
                    }
                    let rel = sa[p.members[0]].zip(sb[q.members[0]]).map(|(x, y)| x.times(y));
                    p.members
                        .iter()
                        .all(|&e| sa[e].zip(sb[e]).map(|(x, y)| x.times(y)) == rel)
                })
        }
        side(&self.row_parts, &self.row_sign, &other.row_parts, &other.row_sign)
            && side(&self.col_parts, &self.col_sign, &other.col_parts, &other.col_sign)
    }
}

fn part_index(parts: &[Part], n: usize) -> Vec<usize> {
    let mut idx = vec![usize::MAX; n];
    for (k, p) in parts.iter().enumerate() {
        for &e in &p.members {
            idx[e] = k;
        }
    }
    idx
}

fn check_side(what: &str, parts: &[Part], signs: &[Option<Sign>], n: usize) -> Result<(), ModelError> {
    if signs.len() != n {
        return Err(ModelError::InvalidPartition(format!(
            "{what} signs cover {} elements, expected {n}",
            signs.len()
        )));
    }
    let mut seen = vec![false; n];
    for part in parts {
        if part.is_empty() {
            return Err(ModelError::InvalidPartition(format!("empty {what} part")));
        }
        for &e in &part.members {
            if e >= n || seen[e] {
                return Err(ModelError::InvalidPartition(format!("{what} {e} repeated or out of range")));
            }
            seen[e] = true;
            if signs[e].is_some() != part.is_unipolar() {
                return Err(ModelError::InvalidPartition(format!(
                    "{what} {e} has a sign inconsistent with its polarity"
                )));
            }
        }
    }
    if let Some(e) = seen.iter().position(|s| !s) {
        return Err(ModelError::InvalidPartition(format!("{what} {e} not covered")));
    }
    Ok(())
}

/// Signed sum `sum_{v in part} gamma_v * A[v, col]`.
pub fn apply_row_partition_sum(
    part: &[usize],
    col: usize,
    matrix: &SparseMatrix,
    signs: Option<&[Sign]>,
) -> Result<Rational, ModelError> {
    if col >= matrix.ncols() {
        return Err(ModelError::IndexOutOfRange { what: "column", index: col, size: matrix.ncols() });
    }
    let mut total = Rational::zero();
    for (k, &row) in part.iter().enumerate() {
        if row >= matrix.nrows() {
            return Err(ModelError::IndexOutOfRange { what: "row", index: row, size: matrix.nrows() });
        }
        let v = matrix.get(row, col);
        total += match signs {
            Some(s) => s[k].apply(&v),
            None => v,
        };
    }
    Ok(total)
}

fn lambda_bounds(lo: &Bound, hi: &Bound, delta: &Rational, sign: Sign) -> (Bound, Bound) {
    match sign {
        Sign::Plus => (lo.shifted(delta), hi.shifted(delta)),
        Sign::Minus => (hi.shifted(delta).negated(), lo.shifted(delta).negated()),
    }
}

fn check_delta(problem: &Problem, delta: &[Rational]) -> Result<(), ModelError> {
    if delta.len() != problem.ncols() {
        return Err(ModelError::DimensionMismatch {
            what: "offset vector",
            expected: problem.ncols(),
            found: delta.len(),
        });
    }
    for (col, d) in delta.iter().enumerate() {
        if !problem.lower[col].le_value(d) || !problem.upper[col].ge_value(d) {
            return Err(ModelError::DeltaOutOfBounds { col });
        }
    }
    Ok(())
}

fn aggregate_name(names: &[String], members: &[usize], taken: &mut BTreeSet<String>) -> String {
    let mut name = if members.len() == 1 {
        names[members[0]].clone()
    } else {
        format!("{}_x{}", names[members[0]], members.len())
    };
    while !taken.insert(name.clone()) {
        name.push('_');
    }
    name
}

/// Folds an equality-form problem along a signed partition and offset.
/// Reduced rows and columns follow the order of the unipolar parts.
pub fn reduce_matrices(problem: &Problem, part: &BiPartition, delta: &[Rational]) -> Result<Problem, ModelError> {
    problem.require_equality_form()?;
    part.validate(problem.nrows(), problem.ncols())?;
    check_delta(problem, delta)?;

    let shifted_rhs: Vec<Rational> = problem
        .matrix
        .mul_vec(delta)
        .into_iter()
        .zip(&problem.rhs)
        .map(|(ad, b)| b - ad)
        .collect();
    let col_index = part.col_part_index();
    let mut reduced_col_of_part = vec![usize::MAX; part.col_parts.len()];
    let mut ncols = 0;
    for (k, p) in part.col_parts.iter().enumerate() {
        if p.is_unipolar() {
            reduced_col_of_part[k] = ncols;
            ncols += 1;
        }
    }

    let mut entries: std::collections::BTreeMap<(usize, usize), Rational> = Default::default();
    let mut rhs = Vec::new();
    let mut row_names = Vec::new();
    let mut taken_rows = BTreeSet::new();
    for p in part.unipolar_row_parts() {
        let r = rhs.len();
        let mut b = Rational::zero();
        for &v in &p.members {
            let gamma = part.row_gamma(v);
            b += gamma.apply(&shifted_rhs[v]);
            for (w, a) in problem.matrix.row(v) {
                let k = col_index[*w];
                if !part.col_parts[k].is_unipolar() {
                    continue;
                }
                let term = gamma.times(part.col_lambda(*w)).apply(a);
                *entries.entry((r, reduced_col_of_part[k])).or_insert_with(Rational::zero) += term;
            }
        }
        rhs.push(b);
        row_names.push(aggregate_name(&problem.row_names, &p.members, &mut taken_rows));
    }

    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut objective = Vec::new();
    let mut integral = Vec::new();
    let mut col_names = Vec::new();
    let mut sizes = Vec::new();
    let mut taken_cols = BTreeSet::new();
    for p in part.unipolar_col_parts() {
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        let mut c = Rational::zero();
        for &w in &p.members {
            let sign = part.col_lambda(w);
            let (l, u) = lambda_bounds(&problem.lower[w], &problem.upper[w], &delta[w], sign);
            lo.push(l);
            hi.push(u);
            c += sign.apply(&problem.objective[w]);
        }
        let size = Rational::from_integer(BigInt::from(p.len()));
        lower.push(Bound::sum(&lo));
        upper.push(Bound::sum(&hi));
        objective.push(c / &size);
        integral.push(p.members.iter().all(|&w| problem.integral[w]));
        col_names.push(aggregate_name(&problem.col_names, &p.members, &mut taken_cols));
        sizes.push(size);
    }
    let matrix = SparseMatrix::from_triplets(
        rhs.len(),
        ncols,
        entries.into_iter().map(|((r, c), v)| {
            let v = v / &sizes[c];
            (r, c, v)
        }),
    )?;
    let shift: Rational = problem.objective.iter().zip(delta).map(|(c, d)| c * d).sum();
    let reduced = Problem {
        name: format!("{}_folded", problem.name),
        matrix,
        row_sense: vec![RowSense::Eq; rhs.len()],
        rhs,
        lower,
        upper,
        objective,
        integral,
        objective_offset: &problem.objective_offset + shift,
        row_names,
        col_names,
    };
    reduced.validate()?;
    Ok(reduced)
}

/// Maps a reduced point back: `x_w = lambda_w * y_Q / |Q| + delta_w`, and
/// `x_w = delta_w` on bipolar columns.
pub fn lift_solution(y: &[Rational], part: &BiPartition, delta: &[Rational]) -> Result<Vec<Rational>, ModelError> {
    let nparts = part.unipolar_col_parts().count();
    if y.len() != nparts {
        return Err(ModelError::DimensionMismatch { what: "reduced point", expected: nparts, found: y.len() });
    }
    if delta.len() != part.ncols() {
        return Err(ModelError::DimensionMismatch {
            what: "offset vector",
            expected: part.ncols(),
            found: delta.len(),
        });
    }
    let mut x = delta.to_vec();
    for (p, yq) in part.unipolar_col_parts().zip(y) {
        let share = yq / Rational::from_integer(BigInt::from(p.len()));
        for &w in &p.members {
            x[w] += part.col_lambda(w).apply(&share);
        }
    }
    Ok(x)
}

/// Maps an original point to the reduced space: `y_Q = sum lambda_w (x_w - delta_w)`.
pub fn project_solution(x: &[Rational], part: &BiPartition, delta: &[Rational]) -> Result<Vec<Rational>, ModelError> {
    if x.len() != part.ncols() {
        return Err(ModelError::DimensionMismatch { what: "original point", expected: part.ncols(), found: x.len() });
    }
    if delta.len() != part.ncols() {
        return Err(ModelError::DimensionMismatch {
            what: "offset vector",
            expected: part.ncols(),
            found: delta.len(),
        });
    }
    Ok(part
        .unipolar_col_parts()
        .map(|p| p.members.iter().map(|&w| part.col_lambda(w).apply(&(&x[w] - &delta[w]))).sum())
        .collect())
}

/// A signed partition, an offset and the folded problem they induce.
#[derive(Clone, Debug)]
pub struct ReflectionReduction {
    pub partition: BiPartition,
    pub delta: Vec<Rational>,
    pub reduced: Problem,
}

impl ReflectionReduction {
    pub fn new(problem: &Problem, partition: BiPartition, delta: Vec<Rational>) -> Result<Self, ModelError> {
        let reduced = reduce_matrices(problem, &partition, &delta)?;
        Ok(ReflectionReduction { partition, delta, reduced })
    }

    pub fn lift(&self, y: &[Rational]) -> Result<Vec<Rational>, ModelError> {
        lift_solution(y, &self.partition, &self.delta)
    }

    pub fn project(&self, x: &[Rational]) -> Result<Vec<Rational>, ModelError> {
        project_solution(x, &self.partition, &self.delta)
    }

    /// The constant `c'delta` added to the reduced objective.
    pub fn offset(&self, problem: &Problem) -> Rational {
        &self.reduced.objective_offset - &problem.objective_offset
    }

    /// Unipolar column parts in reduced-column order.
    pub fn reduced_parts(&self) -> Vec<&Part> {
        self.partition.unipolar_col_parts().collect()
    }
}

/// A reduced column removed by turning its only row back into an inequality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElidedColumn {
    pub column: usize,
    pub row: usize,
    pub coefficient: Rational,
    pub rhs: Rational,
}

/// Converts rows whose only slack-like column is a one-sided, cost-free
/// column appearing nowhere else into inequalities and drops that column.
/// `slack_only[k]` says whether reduced column `k` may be removed.
pub fn fold_slack_columns(reduced: &Problem, slack_only: &[bool]) -> (Problem, Vec<ElidedColumn>) {
    let mut elided = Vec::new();
    let mut row_sense = reduced.row_sense.clone();
    let mut rhs = reduced.rhs.clone();
    let mut drop = vec![false; reduced.ncols()];
    for row in 0..reduced.nrows() {
        if reduced.row_sense[row] != RowSense::Eq {
            continue;
        }
        let candidate = reduced.matrix.row(row).iter().find(|(c, _)| {
            slack_only[*c]
                && !drop[*c]
                && !reduced.integral[*c]
                && reduced.objective[*c].is_zero()
                && reduced.matrix.col(*c).len() == 1
                && (reduced.lower[*c].is_finite() != reduced.upper[*c].is_finite())
        });
        let Some((col, coef)) = candidate else { continue };
        let (bound, at_lower) = match (&reduced.lower[*col], &reduced.upper[*col]) {
            (Bound::Finite(l), _) => (l.clone(), true),
            (_, Bound::Finite(u)) => (u.clone(), false),
            _ => unreachable!("exactly one finite bound"),
        };
        // a.y + k s = b with s >= L gives k > 0: a.y <= b - kL.
        let le = coef.is_positive() == at_lower;
        row_sense[row] = if le { RowSense::Le } else { RowSense::Ge };
        rhs[row] = &reduced.rhs[row] - coef * &bound;
        drop[*col] = true;
        elided.push(ElidedColumn { column: *col, row, coefficient: coef.clone(), rhs: reduced.rhs[row].clone() });
    }
    let keep: Vec<usize> = (0..reduced.ncols()).filter(|c| !drop[*c]).collect();
    let mut new_index = vec![usize::MAX; reduced.ncols()];
    for (i, &c) in keep.iter().enumerate() {
        new_index[c] = i;
    }
    let entries = reduced
        .matrix
        .triplets()
        .filter(|(_, c, _)| !drop[*c])
        .map(|(r, c, v)| (r, new_index[c], v.clone()));
    let matrix = SparseMatrix::from_triplets(reduced.nrows(), keep.len(), entries).expect("subset of a valid matrix");
    let pick = |v: &Vec<Bound>| keep.iter().map(|&c| v[c].clone()).collect::<Vec<_>>();
    let out = Problem {
        name: reduced.name.clone(),
        matrix,
        rhs,
        row_sense,
        lower: pick(&reduced.lower),
        upper: pick(&reduced.upper),
        objective: keep.iter().map(|&c| reduced.objective[c].clone()).collect(),
        integral: keep.iter().map(|&c| reduced.integral[c]).collect(),
        objective_offset: reduced.objective_offset.clone(),
        row_names: reduced.row_names.clone(),
        col_names: keep.iter().map(|&c| reduced.col_names[c].clone()).collect(),
    };
    (out, elided)
}

/// Rebuilds a full reduced point from the values of the surviving columns.
pub fn unfold_slack_columns(
    reduced: &Problem,
    elided: &[ElidedColumn],
    kept_values: &[Rational],
) -> Vec<Rational> {
    let dropped: BTreeSet<usize> = elided.iter().map(|e| e.column).collect();
    let mut full = vec![Rational::zero(); reduced.ncols()];
    let mut it = kept_values.iter();
    for (c, slot) in full.iter_mut().enumerate() {
        if !dropped.contains(&c) {
            *slot = it.next().cloned().unwrap_or_else(Rational::zero);
        }
    }
    for e in elided {
        let act: Rational = reduced
            .matrix
            .row(e.row)
            .iter()
            .filter(|(c, _)| *c != e.column)
            .map(|(c, v)| v * &full[*c])
            .sum();
        full[e.column] = (&e.rhs - act) / &e.coefficient;
    }
    full
}

pub fn floor(r: &Rational) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn ceil(r: &Rational) -> BigInt {
    -(-r.numer()).div_floor(r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn slack_example_problem() -> Problem {
        let a = SparseMatrix::from_dense(&[
            vec![2, 1, 1, 1, 0, 0],
            vec![-1, -2, -1, 0, 1, 0],
            vec![-1, 1, 0, 0, 0, 1],
        ]);
        let lower = vec![Bound::from_int(0); 6];
        let mut upper = vec![Bound::from_int(2); 3];
        upper.extend(vec![Bound::PosInf; 3]);
        Problem::new(a, vec![rat(5), rat(-3), rat(1)], lower, upper, vec![rat(1), rat(-1), rat(0), rat(0), rat(0), rat(0)])
            .unwrap()
    }

    fn slack_example_partition() -> BiPartition {
        BiPartition {
            row_parts: vec![Part::unipolar(vec![0, 1]), Part::unipolar(vec![2])],
            col_parts: vec![
                Part::unipolar(vec![0, 1]),
                Part::bipolar(vec![2]),
                Part::unipolar(vec![3, 4]),
                Part::unipolar(vec![5]),
            ],
            row_sign: vec![Some(Sign::Plus); 3],
            col_sign: vec![Some(Sign::Plus), Some(Sign::Minus), None, Some(Sign::Plus), Some(Sign::Plus), Some(Sign::Plus)],
        }
    }

    fn delta3() -> Vec<Rational> {
        vec![rat(1), rat(1), rat(1), rat(0), rat(0), rat(0)]
    }

    #[test]
    fn row_partition_sums() {
        let a = SparseMatrix::from_dense(&[vec![1], vec![1]]);
        assert_eq!(apply_row_partition_sum(&[0, 1], 0, &a, None).unwrap(), rat(2));
        assert_eq!(apply_row_partition_sum(&[0, 1], 0, &a, Some(&[Sign::Plus, Sign::Minus])).unwrap(), rat(0));
        let p = slack_example_problem();
        assert_eq!(apply_row_partition_sum(&[0, 1], 2, &p.matrix, None).unwrap(), rat(0));
        assert!(apply_row_partition_sum(&[0, 5], 0, &a, None).is_err());
        assert!(apply_row_partition_sum(&[0], 3, &a, None).is_err());
    }

    #[test]
    fn identity_partition_reproduces_problem() {
        let p = slack_example_problem();
        let part = BiPartition::discrete(3, 6);
        let r = reduce_matrices(&p, &part, &vec![rat(0); 6]).unwrap();
        assert_eq!(r.matrix, p.matrix);
        assert_eq!(r.rhs, p.rhs);
        assert_eq!(r.lower, p.lower);
        assert_eq!(r.upper, p.upper);
        assert_eq!(r.objective, p.objective);
        assert_eq!(r.col_names, p.col_names);
    }

    #[test]
    fn slack_example_reduction_matches_worked_example() {
        let p = slack_example_problem();
        let r = reduce_matrices(&p, &slack_example_partition(), &delta3()).unwrap();
        assert_eq!(r.nrows(), 2);
        assert_eq!(r.ncols(), 3);
        assert_eq!(r.matrix.to_dense(), vec![vec![rat(1), rat(1), rat(0)], vec![rat(-1), rat(0), rat(1)]]);
        assert_eq!(r.rhs, vec![rat(2), rat(1)]);
        assert_eq!(r.lower[0], Bound::from_int(-2));
        assert_eq!(r.upper[0], Bound::from_int(2));
        assert_eq!(r.lower[1], Bound::from_int(0));
        assert_eq!(r.upper[1], Bound::PosInf);
        assert_eq!(r.objective, vec![rat(1), rat(0), rat(0)]);
        assert_eq!(r.objective_offset, rat(0));
    }

    #[test]
    fn slack_example_lift_and_project() {
        let p = slack_example_problem();
        let part = slack_example_partition();
        let x = lift_solution(&[rat(-1), rat(3), rat(0)], &part, &delta3()).unwrap();
        assert_eq!(x, vec![ratio(1, 2), ratio(3, 2), rat(1), ratio(3, 2), ratio(3, 2), rat(0)]);
        p.check_feasible(&x, false).unwrap();
        assert_eq!(p.objective_value(&x), rat(-1));

        let opt = vec![rat(0), rat(1), rat(1), rat(3), rat(0), rat(0)];
        p.check_feasible(&opt, false).unwrap();
        let y = project_solution(&opt, &part, &delta3()).unwrap();
        assert_eq!(y, vec![rat(-1), rat(3), rat(0)]);
        let r = reduce_matrices(&p, &part, &delta3()).unwrap();
        r.check_feasible(&y, false).unwrap();
        assert_eq!(r.objective_value(&y), p.objective_value(&opt));

        let back = project_solution(&lift_solution(&y, &part, &delta3()).unwrap(), &part, &delta3()).unwrap();
        assert_eq!(back, y);
        assert_eq!(project_solution(&delta3(), &part, &delta3()).unwrap(), vec![rat(0); 3]);
    }

    #[test]
    fn lift_of_zero_is_zero() {
        let part = slack_example_partition();
        assert_eq!(lift_solution(&vec![rat(0); 3], &part, &vec![rat(0); 6]).unwrap(), vec![rat(0); 6]);
        assert!(lift_solution(&vec![rat(0); 2], &part, &vec![rat(0); 6]).is_err());
        assert!(project_solution(&vec![rat(0); 5], &part, &vec![rat(0); 6]).is_err());
    }

    #[test]
    fn reduction_rejects_bad_inputs() {
        let p = slack_example_problem();
        let part = slack_example_partition();
        let mut d = delta3();
        d[0] = rat(3);
        assert_eq!(reduce_matrices(&p, &part, &d), Err(ModelError::DeltaOutOfBounds { col: 0 }));
        assert!(matches!(
            reduce_matrices(&p, &BiPartition::discrete(3, 5), &delta3()),
            Err(ModelError::InvalidPartition(_))
        ));
    }

    #[test]
    fn standard_form_adds_slacks() {
        let a = SparseMatrix::from_dense(&[vec![1, 1], vec![1, -1]]);
        let mut p = Problem::new(a, vec![rat(4), rat(1)], vec![Bound::from_int(0); 2], vec![Bound::PosInf; 2], vec![rat(1), rat(1)])
            .unwrap();
        p.row_sense = vec![RowSense::Le, RowSense::Ge];
        let sf = p.to_equality_form();
        assert_eq!(sf.problem.ncols(), 4);
        assert_eq!(sf.problem.rhs, vec![rat(4), rat(-1)]);
        assert_eq!(sf.problem.matrix.get(1, 0), rat(-1));
        let x = vec![rat(1), rat(0)];
        p.check_feasible(&x, false).unwrap();
        let full = sf.complete_point(&p, &x);
        assert_eq!(full, vec![rat(1), rat(0), rat(3), rat(0)]);
        sf.problem.check_feasible(&full, false).unwrap();
    }

    #[test]
    fn slack_folding_round_trip() {
        let p = slack_example_problem();
        let r = reduce_matrices(&p, &slack_example_partition(), &delta3()).unwrap();
        let (readable, elided) = fold_slack_columns(&r, &[false, true, true]);
        assert_eq!(readable.ncols(), 1);
        assert_eq!(readable.row_sense, vec![RowSense::Le, RowSense::Le]);
        assert_eq!(readable.rhs, vec![rat(2), rat(1)]);
        let full = unfold_slack_columns(&r, &elided, &[rat(-1)]);
        assert_eq!(full, vec![rat(-1), rat(3), rat(0)]);
        r.check_feasible(&full, false).unwrap();
    }

    #[test]
    fn same_structure_ignores_part_flips() {
        let a = slack_example_partition();
        let mut b = a.clone();
        b.col_sign[0] = Some(Sign::Minus);
        b.col_sign[1] = Some(Sign::Plus);
        assert!(a.same_structure(&b));
        b.col_sign[1] = Some(Sign::Minus);
        assert!(!a.same_structure(&b));
    }
}
