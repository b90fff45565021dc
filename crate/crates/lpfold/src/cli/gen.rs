//! Seeded instance generators with planted symmetries.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{rat, Bound, Problem, Rational, RowSense, SparseMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid item specification {0:?}")]
    ItemSpec(String),
    #[error("invalid generator parameters: {0}")]
    Parameters(String),
}

/// A planted class of columns; `true` marks a member entered negated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlantedClass {
    pub members: Vec<(usize, bool)>,
}

impl PlantedClass {
    pub fn has_flip(&self) -> bool {
        self.members.iter().any(|(_, flipped)| *flipped)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub problem: Problem,
    pub col_classes: Vec<PlantedClass>,
    pub row_classes: Vec<PlantedClass>,
}

impl Generated {
    pub fn has_flip(&self) -> bool {
        self.col_classes.iter().chain(&self.row_classes).any(PlantedClass::has_flip)
    }

    /// Sidecar ground-truth text: one planted class per line.
    pub fn truth_string(&self) -> String {
        let mut out = String::new();
        let line = |kind: &str, class: &PlantedClass, names: &[String], out: &mut String| {
            let members: Vec<String> = class
                .members
                .iter()
                .map(|(i, flipped)| format!("{}{}", if *flipped { "-" } else { "" }, names[*i]))
                .collect();
            writeln!(out, "{kind} {}", members.join(" ")).unwrap();
        };
        for class in &self.col_classes {
            line("col", class, &self.problem.col_names, &mut out);
        }
        for class in &self.row_classes {
            line("row", class, &self.problem.row_names, &mut out);
        }
        out
    }
}

fn problem_from_parts(
    name: &str,
    rows: Vec<Vec<(usize, Rational)>>,
    ncols: usize,
    rhs: Vec<Rational>,
    row_sense: Vec<RowSense>,
    lower: Vec<Bound>,
    upper: Vec<Bound>,
    objective: Vec<Rational>,
) -> Problem {
    let entries = rows.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |(c, v)| (r, *c, v.clone())));
    let matrix = SparseMatrix::from_triplets(rows.len(), ncols, entries).expect("generator indices are in range");
    let mut p = Problem::new(matrix, rhs, lower, upper, objective).expect("generator dimensions agree");
    p.name = name.to_string();
    p.row_sense = row_sense;
    p
}

/// The small reflection example: three equality rows over six columns.
pub fn reflection_example() -> Generated {
    let rows = [vec![2, 1, 1, 1, 0, 0], vec![-1, -2, -1, 0, 1, 0], vec![-1, 1, 0, 0, 0, 1]];
    let lower = vec![Bound::from_int(0); 6];
    let mut upper = vec![Bound::from_int(2); 3];
    upper.extend([Bound::PosInf, Bound::PosInf, Bound::PosInf]);
    let mut p = Problem::new(
        SparseMatrix::from_dense(&rows),
        vec![rat(5), rat(-3), rat(1)],
        lower,
        upper,
        [1, -1, 0, 0, 0, 0].iter().map(|&c| rat(c)).collect(),
    )
    .expect("example is well formed");
    p.name = "reflection_example".into();
    p.col_names = ["x1", "x2", "x3", "s1", "s2", "s3"].iter().map(|s| s.to_string()).collect();
    Generated {
        problem: p,
        col_classes: vec![
            PlantedClass { members: vec![(0, false), (1, true)] },
            PlantedClass { members: vec![(3, false), (4, false)] },
        ],
        row_classes: vec![PlantedClass { members: vec![(0, false), (1, false)] }],
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemClass {
    pub count: usize,
    pub weight: i64,
    pub cost: i64,
}

/// Parses `2x(a=2,c=3);1x(a=1,c=1)`.
pub fn parse_items(spec: &str) -> Result<Vec<ItemClass>, GenError> {
    let bad = || GenError::ItemSpec(spec.to_string());
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (count, rest) = part.trim().split_once('x').ok_or_else(bad)?;
            let inner = rest.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
            let (mut weight, mut cost) = (None, None);
            for kv in inner.split(',') {
                let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                let v: i64 = v.trim().parse().map_err(|_| bad())?;
                match k.trim() {
                    "a" => weight = Some(v),
                    "c" => cost = Some(v),
                    _ => return Err(bad()),
                }
            }
            Ok(ItemClass {
                count: count.trim().parse().map_err(|_| bad())?,
                weight: weight.ok_or_else(bad)?,
                cost: cost.ok_or_else(bad)?,
            })
        })
        .collect()
}

/// Generalized assignment: maximize profit (as a minimization) with one
/// capacity row per knapsack and one at-most-once row per item.
pub fn gap(capacities: &[i64], items: &[ItemClass]) -> Generated {
    let k = capacities.len();
    let weights: Vec<&ItemClass> = items.iter().flat_map(|c| std::iter::repeat_n(c, c.count)).collect();
    let n_items = weights.len();
    let col = |i: usize, j: usize| i * n_items + j;
    let mut rows = Vec::new();
    let mut row_names = Vec::new();
    for (i, _) in capacities.iter().enumerate() {
        rows.push((0..n_items).map(|j| (col(i, j), rat(weights[j].weight))).collect());
        row_names.push(format!("cap{}", i + 1));
    }
    for j in 0..n_items {
        rows.push((0..k).map(|i| (col(i, j), rat(1))).collect());
        row_names.push(format!("item{}", j + 1));
    }
    let ncols = k * n_items;
    let mut rhs: Vec<Rational> = capacities.iter().map(|&c| rat(c)).collect();
    rhs.extend(std::iter::repeat_n(rat(1), n_items));
    let objective = (0..ncols).map(|c| rat(-weights[c % n_items].cost)).collect();
    let mut p = problem_from_parts(
        "gap",
        rows,
        ncols,
        rhs,
        vec![RowSense::Le; k + n_items],
        vec![Bound::from_int(0); ncols],
        vec![Bound::from_int(1); ncols],
        objective,
    );
    p.integral = vec![true; ncols];
    p.row_names = row_names;
    p.col_names = (0..ncols).map(|c| format!("x{}_{}", c / n_items + 1, c % n_items + 1)).collect();
    let mut col_classes = Vec::new();
    let mut row_classes = Vec::new();
    let mut start = 0;
    for class in items {
        if class.count > 1 {
            for i in 0..k {
                col_classes.push(PlantedClass { members: (start..start + class.count).map(|j| (col(i, j), false)).collect() });
            }
            row_classes.push(PlantedClass { members: (start..start + class.count).map(|j| (k + j, false)).collect() });
        }
        start += class.count;
    }
    Generated { problem: p, col_classes, row_classes }
}

/// Random GAP instance with distinct capacities and distinct item classes.
pub fn random_gap(rng: &mut impl Rng, max_knapsacks: usize, max_items: usize) -> Generated {
    let k = rng.gen_range(1..=max_knapsacks);
    let mut caps: Vec<i64> = (2..=(3 * max_items as i64)).collect();
    caps.shuffle(rng);
    caps.truncate(k);
    let total = rng.gen_range(2..=max_items);
    let mut items: Vec<ItemClass> = Vec::new();
    let mut left = total;
    while left > 0 {
        // the first class always carries a duplicate
        let min = if items.is_empty() { 2 } else { 1 };
        let count = rng.gen_range(min..=left.min(3).max(min));
        let (weight, cost) = loop {
            let pair = (rng.gen_range(1..=3), rng.gen_range(1..=5));
            if !items.iter().any(|c| (c.weight, c.cost) == pair) {
                break pair;
            }
        };
        items.push(ItemClass { count, weight, cost });
        left -= count;
    }
    gap(&caps, &items)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomShape {
    pub rows: usize,
    pub cols: usize,
    /// Column copies appended to the base columns.
    pub dups: usize,
    /// How many of the copies enter negated and shifted.
    pub flips: usize,
    /// Nonzeros per base column; zero means dense.
    pub per_col: usize,
    pub row_dups: usize,
}

impl RandomShape {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.cols <= self.dups {
            return Err(GenError::Parameters(format!("--cols {} must exceed --dups {}", self.cols, self.dups)));
        }
        if self.flips > self.dups {
            return Err(GenError::Parameters("more flips than duplicates".into()));
        }
        if self.rows == 0 || self.rows <= self.row_dups {
            return Err(GenError::Parameters("need at least one base row".into()));
        }
        Ok(())
    }
}

/// Random feasible instance whose last columns copy earlier ones; flipped
/// copies enter as `d - x` and duplicated equality rows may be negated.
pub fn planted_random(rng: &mut impl Rng, shape: RandomShape, name: &str) -> Result<Generated, GenError> {
    shape.validate()?;
    let base_cols = shape.cols - shape.dups;
    let base_rows = shape.rows - shape.row_dups;
    let mut columns: Vec<Vec<(usize, Rational)>> = Vec::with_capacity(shape.cols);
    let mut lower = Vec::with_capacity(shape.cols);
    let mut upper = Vec::with_capacity(shape.cols);
    let mut cost = Vec::with_capacity(shape.cols);
    let mut point: Vec<i64> = Vec::with_capacity(shape.cols);
    for _ in 0..base_cols {
        let mut col = Vec::new();
        if shape.per_col == 0 {
            for r in 0..base_rows {
                let v = rng.gen_range(-3i64..=3);
                if v != 0 {
                    col.push((r, rat(v)));
                }
            }
        } else {
            let mut rows: Vec<usize> = rand::seq::index::sample(rng, base_rows, shape.per_col.min(base_rows)).into_vec();
            rows.sort_unstable();
            for r in rows {
                let v = *[-2i64, -1, 1, 1, 2, 3].choose(rng).unwrap();
                col.push((r, rat(v)));
            }
        }
        let lo = rng.gen_range(-2i64..=1);
        let width = rng.gen_range(1i64..=4);
        let c = rng.gen_range(-4i64..=4);
        let (l, u) = match rng.gen_range(0..6) {
            0 if c >= 0 => (Bound::from_int(lo), Bound::PosInf),
            1 if c <= 0 => (Bound::NegInf, Bound::from_int(lo + width)),
            _ => (Bound::from_int(lo), Bound::from_int(lo + width)),
        };
        point.push(rng.gen_range(lo..=lo + width));
        columns.push(col);
        lower.push(l);
        upper.push(u);
        cost.push(rat(c));
    }
    let mut originals: Vec<usize> = (0..base_cols).collect();
    originals.shuffle(rng);
    let mut col_classes: Vec<PlantedClass> = Vec::new();
    for k in 0..shape.dups {
        let src = originals[k % base_cols];
        let flipped = k < shape.flips;
        let copy = columns.len();
        if flipped {
            let d = rng.gen_range(-2i64..=2);
            columns.push(columns[src].iter().map(|(r, v)| (*r, -v)).collect());
            lower.push(upper[src].negated().shifted(&rat(-d)));
            upper.push(lower[src].negated().shifted(&rat(-d)));
            cost.push(-&cost[src]);
            point.push(d - point[src]);
        } else {
            columns.push(columns[src].clone());
            lower.push(lower[src].clone());
            upper.push(upper[src].clone());
            cost.push(cost[src].clone());
            point.push(point[src]);
        }
        match col_classes.iter_mut().find(|c| c.members[0].0 == src) {
            Some(class) => class.members.push((copy, flipped)),
            None => col_classes.push(PlantedClass { members: vec![(src, false), (copy, flipped)] }),
        }
    }
    let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); base_rows];
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col {
            rows[*r].push((c, v.clone()));
        }
    }
    let x: Vec<Rational> = point.iter().map(|&v| rat(v)).collect();
    let mut rhs = Vec::with_capacity(shape.rows);
    let mut sense = Vec::with_capacity(shape.rows);
    for row in &rows {
        let act: Rational = row.iter().map(|(c, v)| v * &x[*c]).sum();
        match rng.gen_range(0..3) {
            0 => {
                rhs.push(act);
                sense.push(RowSense::Eq);
            }
            1 => {
                rhs.push(act + rat(rng.gen_range(0..=2)));
                sense.push(RowSense::Le);
            }
            _ => {
                rhs.push(act - rat(rng.gen_range(0..=2)));
                sense.push(RowSense::Ge);
            }
        }
    }
    let mut row_classes = Vec::new();
    for _ in 0..shape.row_dups {
        let src = rng.gen_range(0..base_rows);
        let negate = sense[src] == RowSense::Eq && rng.gen_bool(0.5);
        let row: Vec<(usize, Rational)> =
            rows[src].iter().map(|(c, v)| (*c, if negate { -v } else { v.clone() })).collect();
        rows.push(row);
        rhs.push(if negate { -&rhs[src] } else { rhs[src].clone() });
        sense.push(sense[src]);
        let copy = rows.len() - 1;
        match row_classes.iter_mut().find(|c: &&mut PlantedClass| c.members[0].0 == src) {
            Some(class) => class.members.push((copy, negate)),
            None => row_classes.push(PlantedClass { members: vec![(src, false), (copy, negate)] }),
        }
    }
    let problem = problem_from_parts(name, rows, shape.cols, rhs, sense, lower, upper, cost);
    Ok(Generated { problem, col_classes, row_classes })
}

pub fn dup_random(seed: u64, shape: RandomShape) -> Result<Generated, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    planted_random(&mut rng, RandomShape { flips: 0, ..shape }, "dup_random")
}

pub fn reflect_random(seed: u64, shape: RandomShape) -> Result<Generated, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    planted_random(&mut rng, shape, "reflect_random")
}

pub fn gap_random(seed: u64, max_knapsacks: usize, max_items: usize) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_gap(&mut rng, max_knapsacks, max_items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(rows: usize, cols: usize, dups: usize, flips: usize) -> RandomShape {
        RandomShape { rows, cols, dups, flips, per_col: 0, row_dups: 0 }
    }

    #[test]
    fn item_specs() {
        let items = parse_items("2x(a=2,c=3);1x(a=1,c=1)").unwrap();
        assert_eq!(items, vec![ItemClass { count: 2, weight: 2, cost: 3 }, ItemClass { count: 1, weight: 1, cost: 1 }]);
        assert!(parse_items("2(a=2)").is_err());
        assert!(parse_items("2x(a=2,q=1)").is_err());
    }

    #[test]
    fn gap_structure() {
        let g = gap(&[3, 2], &parse_items("2x(a=2,c=3);1x(a=1,c=1)").unwrap());
        let p = &g.problem;
        assert_eq!((p.nrows(), p.ncols()), (5, 6));
        assert!(p.integral.iter().all(|&b| b));
        assert_eq!(p.matrix.row(0).len(), 3);
        assert_eq!(p.objective[0], rat(-3));
        assert_eq!(g.col_classes.len(), 2);
        assert_eq!(g.col_classes[1].members, vec![(3, false), (4, false)]);
        assert_eq!(g.truth_string(), "col x1_1 x1_2\ncol x2_1 x2_2\nrow item1 item2\n");
    }

    #[test]
    fn planted_points_are_feasible() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = planted_random(&mut rng, RandomShape { row_dups: 2, ..shape(8, 12, 4, 2) }, "t").unwrap();
            assert_eq!(g.problem.ncols(), 12);
            assert_eq!(g.problem.nrows(), 8);
            g.problem.validate().unwrap();
            assert!(g.has_flip());
        }
    }

    #[test]
    fn flipped_copies_negate_columns() {
        let g = reflect_random(3, shape(5, 6, 2, 2)).unwrap();
        for class in &g.col_classes {
            let (src, _) = class.members[0];
            for &(copy, flipped) in &class.members[1..] {
                assert!(flipped);
                let a: Vec<_> = g.problem.matrix.col(src).iter().map(|(r, v)| (*r, -v)).collect();
                assert_eq!(g.problem.matrix.col(copy), &a[..]);
                assert_eq!(g.problem.objective[copy], -&g.problem.objective[src]);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(dup_random(7, shape(6, 20, 5, 0)).unwrap(), dup_random(7, shape(6, 20, 5, 0)).unwrap());
        assert_eq!(gap_random(4, 3, 6), gap_random(4, 3, 6));
        assert!(dup_random(1, shape(3, 3, 3, 0)).is_err());
    }

    #[test]
    fn random_gap_respects_limits() {
        for seed in 0..50 {
            let g = gap_random(seed, 3, 6);
            let knapsacks = g.problem.row_names.iter().filter(|n| n.starts_with("cap")).count();
            let items = g.problem.nrows() - knapsacks;
            assert!((1..=3).contains(&knapsacks));
            assert!((2..=6).contains(&items));
            assert_eq!(g.problem.ncols(), knapsacks * items);
            assert_eq!(g.col_classes.len() % knapsacks, 0);
            assert!(!g.col_classes.is_empty());
        }
    }
}
