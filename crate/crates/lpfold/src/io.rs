//! MPS instances, solution files and postsolve archives.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Pow, Signed, Zero};
use thiserror::Error;

use crate::milpfold::{AtuLedger, LedgerPart};
use crate::model::{lift_solution, BiPartition, Bound, ModelError, Part, Problem, Rational, RowSense, Sign, SparseMatrix};
use crate::netmat::NetworkMode;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown column name {0:?} in solution")]
    UnknownName(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Parses `-12`, `3.25`, `1e-3`, `2.5E+4` or `7/3` exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        return (!d.is_zero()).then(|| Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(all * Pow::pow(&ten, scale as u32))
    } else {
        Rational::new(all, Pow::pow(&ten, (-scale) as u32))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Exact decimal form when the denominator divides a power of ten.
pub fn exact_decimal(r: &Rational) -> Option<String> {
    let mut d = r.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0u32, 0u32);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    let places = twos.max(fives);
    if places == 0 {
        return Some(r.numer().to_string());
    }
    let scaled = r.numer().abs() * Pow::pow(&BigInt::from(10), places) / r.denom();
    let digits = format!("{:0>width$}", scaled.to_string(), width = places as usize + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places as usize);
    let sign = if r.is_negative() { "-" } else { "" };
    Some(format!("{sign}{int_part}.{frac_part}"))
}

/// Exact decimal, otherwise `p/q`.
pub fn format_exact(r: &Rational) -> String {
    exact_decimal(r).unwrap_or_else(|| format!("{}/{}", r.numer(), r.denom()))
}

/// Exact decimal, otherwise 17 significant digits in scientific notation.
pub fn format_mps_number(r: &Rational) -> String {
    if let Some(s) = exact_decimal(r) {
        return s;
    }
    let ten = BigInt::from(10);
    let n = r.numer().abs();
    let d = r.denom().clone();
    // exponent e with 10^e <= |r| < 10^(e+1)
    let mut e: i64 = n.to_string().len() as i64 - d.to_string().len() as i64;
    let power = |k: i64| -> Rational {
        if k >= 0 {
            Rational::from_integer(Pow::pow(&ten, k as u64))
        } else {
            Rational::new(BigInt::one(), Pow::pow(&ten, (-k) as u64))
        }
    };
    let abs = r.abs();
    while abs < power(e) {
        e -= 1;
    }
    while abs >= power(e + 1) {
        e += 1;
    }
    let scaled = &abs / power(e - 16);
    let mut digits = scaled.round().to_integer();
    if digits >= Pow::pow(&ten, 17u32) {
        digits /= &ten;
        e += 1;
    }
    let s = digits.to_string();
    let sign = if r.is_negative() { "-" } else { "" };
    let frac = s[1..].trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{}e{e}", &s[..1])
    } else {
        format!("{sign}{}.{frac}e{e}", &s[..1])
    }
}

/// Bound magnitudes at or beyond `1e30` mean infinity.
fn bound_value(v: Rational) -> Bound {
    let big = Rational::from_integer(Pow::pow(&BigInt::from(10), 30u32));
    if v >= big {
        Bound::PosInf
    } else if v <= -big {
        Bound::NegInf
    } else {
        Bound::Finite(v)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

#[derive(Default)]
struct MpsBuilder {
    name: String,
    objective_row: Option<String>,
    maximize: bool,
    row_index: HashMap<String, usize>,
    row_names: Vec<String>,
    row_sense: Vec<RowSense>,
    col_index: HashMap<String, usize>,
    col_names: Vec<String>,
    integral: Vec<bool>,
    objective: Vec<Rational>,
    entries: Vec<(usize, usize, Rational)>,
    seen: BTreeSet<(usize, usize)>,
    objective_seen: BTreeSet<usize>,
    rhs: Vec<Rational>,
    ranges: Vec<Option<Rational>>,
    lower: Vec<Option<Bound>>,
    upper: Vec<Option<Bound>>,
    offset: Rational,
}

impl MpsBuilder {
    fn column(&mut self, name: &str, integer: bool) -> usize {
        if let Some(&c) = self.col_index.get(name) {
            return c;
        }
        let c = self.col_names.len();
        self.col_index.insert(name.to_string(), c);
        self.col_names.push(name.to_string());
        self.integral.push(integer);
        self.objective.push(Rational::zero());
        self.lower.push(None);
        self.upper.push(None);
        c
    }

    fn entry(&mut self, line: usize, col: usize, row: &str, value: Rational) -> Result<(), IoError> {
        if Some(row) == self.objective_row.as_deref() {
            if !self.objective_seen.insert(col) {
                return Err(parse_err(line, format!("duplicate objective entry for column {}", self.col_names[col])));
            }
            self.objective[col] = value;
            return Ok(());
        }
        let Some(&r) = self.row_index.get(row) else {
            return Err(parse_err(line, format!("unknown row {row:?}")));
        };
        if !self.seen.insert((r, col)) {
            return Err(parse_err(line, format!("duplicate entry for row {row} column {}", self.col_names[col])));
        }
        if !value.is_zero() {
            self.entries.push((r, col, value));
        }
        Ok(())
    }

    fn row(&self, line: usize, name: &str) -> Result<Option<usize>, IoError> {
        if Some(name) == self.objective_row.as_deref() {
            return Ok(None);
        }
        self.row_index.get(name).copied().map(Some).ok_or_else(|| parse_err(line, format!("unknown row {name:?}")))
    }

    fn finish(self) -> Result<Problem, IoError> {
        let m = self.row_names.len();
        let n = self.col_names.len();
        let mut row_sense = self.row_sense;
        let mut rhs = self.rhs;
        let mut row_names = self.row_names;
        let mut entries = self.entries;
        for r in 0..m {
            let Some(range) = &self.ranges[r] else { continue };
            let width = range.abs();
            let (low, high) = match row_sense[r] {
                RowSense::Le => (&rhs[r] - &width, rhs[r].clone()),
                RowSense::Ge => (rhs[r].clone(), &rhs[r] + &width),
                RowSense::Eq if range.is_negative() => (&rhs[r] + range, rhs[r].clone()),
                RowSense::Eq => (rhs[r].clone(), &rhs[r] + range),
            };
            let extra = row_names.len();
            let mut name = format!("{}_range", row_names[r]);
            while row_names.contains(&name) {
                name.push('_');
            }
            row_names.push(name);
            let copies: Vec<(usize, usize, Rational)> =
                entries.iter().filter(|(row, _, _)| *row == r).map(|(_, c, v)| (extra, *c, v.clone())).collect();
            entries.extend(copies);
            row_sense[r] = RowSense::Ge;
            rhs[r] = low;
            row_sense.push(RowSense::Le);
            rhs.push(high);
        }
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for c in 0..n {
            lower.push(self.lower[c].clone().unwrap_or(Bound::Finite(Rational::zero())));
            upper.push(self.upper[c].clone().unwrap_or(Bound::PosInf));
        }
        let matrix = SparseMatrix::from_triplets(row_names.len(), n, entries)?;
        let (objective, offset) = if self.maximize {
            (self.objective.into_iter().map(|c| -c).collect(), -self.offset)
        } else {
            (self.objective, self.offset)
        };
        let problem = Problem {
            name: self.name,
            matrix,
            rhs,
            row_sense,
            lower,
            upper,
            objective,
            integral: self.integral,
            objective_offset: offset,
            row_names,
            col_names: self.col_names,
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn number(line: usize, s: &str) -> Result<Rational, IoError> {
    parse_rational(s).ok_or_else(|| parse_err(line, format!("invalid number {s:?}")))
}

/// Parses free-format MPS text.
pub fn parse_mps(text: &str) -> Result<Problem, IoError> {
    let mut b = MpsBuilder::default();
    let mut section = Section::Name;
    let mut integer_block = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with([' ', '\t']) {
            section = match tokens[0] {
                "NAME" => {
                    b.name = tokens.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(sense) = tokens.get(1) {
                        b.maximize = sense.starts_with("MAX");
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(parse_err(line, format!("unknown section {other:?}"))),
            };
            continue;
        }
        match section {
            Section::Name | Section::End => return Err(parse_err(line, "data outside of a section")),
            Section::ObjSense => match tokens[0] {
                "MAX" | "MAXIMIZE" => b.maximize = true,
                "MIN" | "MINIMIZE" => b.maximize = false,
                other => return Err(parse_err(line, format!("unknown objective sense {other:?}"))),
            },
            Section::Rows => {
                let [kind, name] = tokens[..] else { return Err(parse_err(line, "expected row type and name")) };
                let sense = match kind {
                    "N" => {
                        if b.objective_row.is_none() {
                            b.objective_row = Some(name.to_string());
                        } else {
                            return Err(parse_err(line, "more than one objective row"));
                        }
                        continue;
                    }
                    "E" => RowSense::Eq,
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    other => return Err(parse_err(line, format!("unknown row type {other:?}"))),
                };
                if b.row_index.contains_key(name) || b.objective_row.as_deref() == Some(name) {
                    return Err(parse_err(line, format!("duplicate row {name:?}")));
                }
                b.row_index.insert(name.to_string(), b.row_names.len());
                b.row_names.push(name.to_string());
                b.row_sense.push(sense);
                b.rhs.push(Rational::zero());
                b.ranges.push(None);
            }
            Section::Columns => {
                if tokens.get(1) == Some(&"'MARKER'") {
                    match tokens.get(2) {
                        Some(&"'INTORG'") => integer_block = true,
                        Some(&"'INTEND'") => integer_block = false,
                        _ => return Err(parse_err(line, "unknown marker")),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(parse_err(line, "expected column, row, value pairs"));
                }
                let col = b.column(tokens[0], integer_block);
                for pair in tokens[1..].chunks(2) {
                    let value = number(line, pair[1])?;
                    b.entry(line, col, pair[0], value)?;
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                if pairs.is_empty() {
                    return Err(parse_err(line, "expected row, value pairs"));
                }
                for pair in pairs.chunks(2) {
                    let value = number(line, pair[1])?;
                    match (section, b.row(line, pair[0])?) {
                        (Section::Rhs, Some(r)) => b.rhs[r] = value,
                        (Section::Rhs, None) => b.offset = -value,
                        (_, Some(r)) => b.ranges[r] = Some(value),
                        (_, None) => return Err(parse_err(line, "range on the objective row")),
                    }
                }
            }
            Section::Bounds => parse_bound(&mut b, line, &tokens)?,
        }
    }
    if section != Section::End {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }
    b.finish()
}

fn parse_bound(b: &mut MpsBuilder, line: usize, tokens: &[&str]) -> Result<(), IoError> {
    let kind = tokens[0];
    let valued = matches!(kind, "LO" | "UP" | "FX" | "LI" | "UI");
    let (col_name, value) = match kind {
        _ if valued => {
            if tokens.len() < 3 {
                return Err(parse_err(line, "bound needs a column and a value"));
            }
            (tokens[tokens.len() - 2], Some(number(line, tokens[tokens.len() - 1])?))
        }
        "FR" | "MI" | "PL" => (tokens[tokens.len() - 1], None),
        "BV" => {
            let last = tokens[tokens.len() - 1];
            if b.col_index.contains_key(last) {
                (last, None)
            } else {
                (tokens[tokens.len() - 2], None)
            }
        }
        other => return Err(parse_err(line, format!("unknown bound type {other:?}"))),
    };
    let &col = b.col_index.get(col_name).ok_or_else(|| parse_err(line, format!("unknown column {col_name:?}")))?;
    match kind {
        "LO" => b.lower[col] = Some(bound_value(value.unwrap())),
        "UP" => b.upper[col] = Some(bound_value(value.unwrap())),
        "FX" => {
            let v = value.unwrap();
            b.lower[col] = Some(Bound::Finite(v.clone()));
            b.upper[col] = Some(Bound::Finite(v));
        }
        "LI" => {
            b.integral[col] = true;
            b.lower[col] = Some(bound_value(value.unwrap()));
        }
        "UI" => {
            b.integral[col] = true;
            b.upper[col] = Some(bound_value(value.unwrap()));
        }
        "FR" => {
            b.lower[col] = Some(Bound::NegInf);
            b.upper[col] = Some(Bound::PosInf);
        }
        "MI" => b.lower[col] = Some(Bound::NegInf),
        "PL" => b.upper[col] = Some(Bound::PosInf),
        "BV" => {
            b.integral[col] = true;
            b.lower[col] = Some(Bound::Finite(Rational::zero()));
            b.upper[col] = Some(Bound::Finite(Rational::one()));
        }
        _ => unreachable!("bound type checked above"),
    }
    Ok(())
}

pub fn read_mps(path: &Path) -> Result<Problem, IoError> {
    parse_mps(&read_text(path)?)
}

fn unique_name(base: &str, taken: &[String]) -> String {
    let mut name = base.to_string();
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

/// Renders a problem as free-format MPS; output is deterministic.
pub fn mps_string(problem: &Problem) -> String {
    let mut out = String::new();
    let objective_row = unique_name("obj", &problem.row_names);
    writeln!(out, "NAME {}", if problem.name.is_empty() { "lpfold" } else { &problem.name }).unwrap();
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N {objective_row}").unwrap();
    for (name, sense) in problem.row_names.iter().zip(&problem.row_sense) {
        let kind = match sense {
            RowSense::Eq => 'E',
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
        };
        writeln!(out, " {kind} {name}").unwrap();
    }
    writeln!(out, "COLUMNS").unwrap();
    let mut in_block = false;
    let mut markers = 0;
    for c in 0..problem.ncols() {
        if problem.integral[c] != in_block {
            markers += 1;
            let tag = if problem.integral[c] { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    M{markers} 'MARKER' {tag}").unwrap();
            in_block = problem.integral[c];
        }
        let name = &problem.col_names[c];
        let col = problem.matrix.col(c);
        if !problem.objective[c].is_zero() || col.is_empty() {
            writeln!(out, "    {name} {objective_row} {}", format_mps_number(&problem.objective[c])).unwrap();
        }
        for (r, v) in col {
            writeln!(out, "    {name} {} {}", problem.row_names[*r], format_mps_number(v)).unwrap();
        }
    }
    if in_block {
        writeln!(out, "    M{} 'MARKER' 'INTEND'", markers + 1).unwrap();
    }
    writeln!(out, "RHS").unwrap();
    if !problem.objective_offset.is_zero() {
        writeln!(out, "    RHS {objective_row} {}", format_mps_number(&-&problem.objective_offset)).unwrap();
    }
    for (name, v) in problem.row_names.iter().zip(&problem.rhs) {
        if !v.is_zero() {
            writeln!(out, "    RHS {name} {}", format_mps_number(v)).unwrap();
        }
    }
    writeln!(out, "BOUNDS").unwrap();
    for c in 0..problem.ncols() {
        let name = &problem.col_names[c];
        match (&problem.lower[c], &problem.upper[c]) {
            (Bound::Finite(l), Bound::Finite(u)) if l == u => {
                writeln!(out, " FX BND {name} {}", format_mps_number(l)).unwrap();
                continue;
            }
            (Bound::NegInf, Bound::PosInf) => {
                writeln!(out, " FR BND {name}").unwrap();
                continue;
            }
            _ => {}
        }
        match &problem.lower[c] {
            Bound::NegInf => writeln!(out, " MI BND {name}").unwrap(),
            Bound::Finite(l) if !l.is_zero() => writeln!(out, " LO BND {name} {}", format_mps_number(l)).unwrap(),
            Bound::PosInf => writeln!(out, " LO BND {name} 1e30").unwrap(),
            Bound::Finite(_) => {}
        }
        match &problem.upper[c] {
            Bound::Finite(u) => writeln!(out, " UP BND {name} {}", format_mps_number(u)).unwrap(),
            Bound::NegInf => writeln!(out, " UP BND {name} -1e30").unwrap(),
            Bound::PosInf => {}
        }
    }
    writeln!(out, "ENDATA").unwrap();
    out
}

pub fn write_mps(problem: &Problem, path: &Path) -> Result<(), IoError> {
    write_text(path, &mps_string(problem))
}

/// `<name> <value>` lines with exact values.
pub fn solution_string(names: &[String], values: &[Rational]) -> String {
    let mut out = String::new();
    for (name, v) in names.iter().zip(values) {
        writeln!(out, "{name} {}", format_exact(v)).unwrap();
    }
    out
}

pub fn write_solution(path: &Path, names: &[String], values: &[Rational]) -> Result<(), IoError> {
    write_text(path, &solution_string(names, values))
}

pub fn parse_solution(text: &str) -> Result<Vec<(String, Rational)>, IoError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let [name, value] = trimmed.split_whitespace().collect::<Vec<_>>()[..] else {
            return Err(parse_err(idx + 1, "expected `<name> <value>`"));
        };
        out.push((name.to_string(), number(idx + 1, value)?));
    }
    Ok(out)
}

pub fn read_solution(path: &Path) -> Result<Vec<(String, Rational)>, IoError> {
    parse_solution(&read_text(path)?)
}

/// Orders named values by `names`; absent names are zero.
pub fn solution_vector(pairs: &[(String, Rational)], names: &[String]) -> Result<Vec<Rational>, IoError> {
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut out = vec![Rational::zero(); names.len()];
    for (name, v) in pairs {
        let &i = index.get(name.as_str()).ok_or_else(|| IoError::UnknownName(name.clone()))?;
        out[i] = v.clone();
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionMode {
    Lp,
    LpReflect,
    Milp,
}

impl ReductionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReductionMode::Lp => "lp",
            ReductionMode::LpReflect => "lp-reflect",
            ReductionMode::Milp => "milp",
        }
    }

    fn parse(s: &str) -> Option<ReductionMode> {
        match s {
            "lp" => Some(ReductionMode::Lp),
            "lp-reflect" => Some(ReductionMode::LpReflect),
            "milp" => Some(ReductionMode::Milp),
            _ => None,
        }
    }
}

/// A surviving reduced column that was dropped as a slack; its value is
/// `(rhs - sum coef * kept) / coefficient`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlackRecovery {
    pub column: usize,
    pub coefficient: Rational,
    pub rhs: Rational,
    pub terms: Vec<(usize, Rational)>,
}

/// Everything needed to map a reduced solution back to the original space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostsolveArchive {
    pub mode: ReductionMode,
    pub network: Option<NetworkMode>,
    /// Columns of the original instance; later columns are slacks.
    pub structural: usize,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub reduced_names: Vec<String>,
    pub partition: BiPartition,
    pub delta: Vec<Rational>,
    pub offset: Rational,
    pub slacks: Vec<SlackRecovery>,
    pub ledger: AtuLedger,
}

pub const ARCHIVE_VERSION: u32 = 1;

impl PostsolveArchive {
    /// Reduced point with dropped slack columns restored.
    pub fn full_reduced(&self, kept: &[Rational]) -> Result<Vec<Rational>, IoError> {
        if kept.len() != self.reduced_names.len() {
            return Err(ModelError::DimensionMismatch {
                what: "reduced solution",
                expected: self.reduced_names.len(),
                found: kept.len(),
            }
            .into());
        }
        let total = kept.len() + self.slacks.len();
        let dropped: BTreeSet<usize> = self.slacks.iter().map(|s| s.column).collect();
        let mut full = Vec::with_capacity(total);
        let mut it = kept.iter();
        for c in 0..total {
            full.push(if dropped.contains(&c) { Rational::zero() } else { it.next().cloned().unwrap_or_default() });
        }
        for s in &self.slacks {
            let act: Rational = s.terms.iter().map(|(k, a)| a * &kept[*k]).sum();
            full[s.column] = (&s.rhs - act) / &s.coefficient;
        }
        Ok(full)
    }

    /// Lifts kept reduced values to the equality-form original space.
    pub fn lift(&self, kept: &[Rational]) -> Result<Vec<Rational>, IoError> {
        let full = self.full_reduced(kept)?;
        Ok(lift_solution(&full, &self.partition, &self.delta)?)
    }
}

fn sign_char(s: Option<Sign>) -> char {
    s.map_or('0', Sign::as_char)
}

fn parse_sign(c: char) -> Option<Option<Sign>> {
    match c {
        '+' => Some(Some(Sign::Plus)),
        '-' => Some(Some(Sign::Minus)),
        '0' => Some(None),
        _ => None,
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn archive_string(a: &PostsolveArchive) -> String {
    let mut out = String::new();
    writeln!(out, "lpfold-archive {ARCHIVE_VERSION}").unwrap();
    writeln!(out, "[META]").unwrap();
    writeln!(out, "mode {}", a.mode.as_str()).unwrap();
    let network = match a.network {
        None => "none",
        Some(NetworkMode::Network) => "rows",
        Some(NetworkMode::TransposedNetwork) => "cols",
    };
    writeln!(out, "network {network}").unwrap();
    writeln!(out, "structural {}", a.structural).unwrap();
    writeln!(out, "[NAMES]").unwrap();
    for name in &a.row_names {
        writeln!(out, "row {name}").unwrap();
    }
    for name in &a.col_names {
        writeln!(out, "col {name}").unwrap();
    }
    for name in &a.reduced_names {
        writeln!(out, "reduced {name}").unwrap();
    }
    writeln!(out, "[PARTS]").unwrap();
    for (side, parts) in [("row", &a.partition.row_parts), ("col", &a.partition.col_parts)] {
        for p in parts {
            let tag = if p.is_unipolar() { 'u' } else { 'b' };
            writeln!(out, "{side} {tag} {}", join(&p.members)).unwrap();
        }
    }
    writeln!(out, "[SIGNS]").unwrap();
    writeln!(out, "row {}", a.partition.row_sign.iter().map(|s| sign_char(*s)).collect::<String>()).unwrap();
    writeln!(out, "col {}", a.partition.col_sign.iter().map(|s| sign_char(*s)).collect::<String>()).unwrap();
    writeln!(out, "[DELTA]").unwrap();
    for (c, d) in a.delta.iter().enumerate().filter(|(_, d)| !d.is_zero()) {
        writeln!(out, "{c} {}", format_exact(d)).unwrap();
    }
    writeln!(out, "[OFFSET]").unwrap();
    writeln!(out, "{}", format_exact(&a.offset)).unwrap();
    writeln!(out, "[SLACKS]").unwrap();
    for s in &a.slacks {
        let terms = join(s.terms.iter().map(|(k, v)| format!("{k}:{}", format_exact(v))));
        writeln!(out, "{} {} {} {terms}", s.column, format_exact(&s.coefficient), format_exact(&s.rhs)).unwrap();
    }
    writeln!(out, "[LEDGER]").unwrap();
    writeln!(out, "fractional {}", join(&a.ledger.fractional_rows)).unwrap();
    for comp in &a.ledger.certified_components {
        writeln!(out, "component {}", join(comp)).unwrap();
    }
    for p in &a.ledger.parts {
        let signs: String = p.lambda.iter().map(|s| s.as_char()).collect();
        let cancel = join(p.cancellation.iter().map(|(v, u)| format!("{v}:{}", format_exact(u))));
        let kind = if p.linked { "linked" } else { "free" };
        writeln!(out, "part {kind} {signs} {} | {cancel}", join(&p.members)).unwrap();
    }
    writeln!(out, "[END]").unwrap();
    out.lines().map(|l| format!("{}\n", l.trim_end())).collect()
}

pub fn write_archive(archive: &PostsolveArchive, path: &Path) -> Result<(), IoError> {
    write_text(path, &archive_string(archive))
}

fn indices(line: usize, tokens: &[&str]) -> Result<Vec<usize>, IoError> {
    tokens.iter().map(|t| t.parse().map_err(|_| parse_err(line, format!("invalid index {t:?}")))).collect()
}

fn indexed_value(line: usize, token: &str) -> Result<(usize, Rational), IoError> {
    let (k, v) = token.split_once(':').ok_or_else(|| parse_err(line, format!("expected index:value, got {token:?}")))?;
    let k = k.parse().map_err(|_| parse_err(line, format!("invalid index {k:?}")))?;
    Ok((k, number(line, v)?))
}

fn parse_signs(line: usize, s: &str) -> Result<Vec<Option<Sign>>, IoError> {
    s.chars().map(|c| parse_sign(c).ok_or_else(|| parse_err(line, format!("invalid sign {c:?}")))).collect()
}

pub fn parse_archive(text: &str) -> Result<PostsolveArchive, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    match lines.next() {
        Some((_, header)) if header == format!("lpfold-archive {ARCHIVE_VERSION}") => {}
        Some((line, header)) => return Err(parse_err(line, format!("unsupported archive header {header:?}"))),
        None => return Err(parse_err(1, "empty archive")),
    }
    let mut section = String::new();
    let mut mode = None;
    let mut network = None;
    let mut structural = None;
    let (mut row_names, mut col_names, mut reduced_names) = (Vec::new(), Vec::new(), Vec::new());
    let (mut row_parts, mut col_parts) = (Vec::new(), Vec::new());
    let (mut row_sign, mut col_sign) = (Vec::new(), Vec::new());
    let mut delta_entries = Vec::new();
    let mut offset = None;
    let mut slacks = Vec::new();
    let mut ledger = AtuLedger::default();
    let mut finished = false;
    for (line, text) in lines.by_ref() {
        if text.is_empty() {
            continue;
        }
        if text.starts_with('[') {
            section = text.to_string();
            if section == "[END]" {
                finished = true;
                break;
            }
            continue;
        }
        let (head, rest) = text.split_once(' ').unwrap_or((text, ""));
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        match section.as_str() {
            "[META]" => match head {
                "mode" => mode = Some(ReductionMode::parse(rest).ok_or_else(|| parse_err(line, "unknown mode"))?),
                "network" => {
                    network = Some(match rest {
                        "none" => None,
                        "rows" => Some(NetworkMode::Network),
                        "cols" => Some(NetworkMode::TransposedNetwork),
                        _ => return Err(parse_err(line, "unknown network mode")),
                    })
                }
                "structural" => structural = Some(rest.parse().map_err(|_| parse_err(line, "invalid count"))?),
                _ => return Err(parse_err(line, format!("unknown key {head:?}"))),
            },
            "[NAMES]" => match head {
                "row" => row_names.push(rest.to_string()),
                "col" => col_names.push(rest.to_string()),
                "reduced" => reduced_names.push(rest.to_string()),
                _ => return Err(parse_err(line, format!("unknown name kind {head:?}"))),
            },
            "[PARTS]" => {
                let (Some(&tag), members) = (tokens.first(), &tokens[1.min(tokens.len())..]) else {
                    return Err(parse_err(line, "expected polarity and members"));
                };
                let members = indices(line, members)?;
                let part = match tag {
                    "u" => Part::unipolar(members),
                    "b" => Part::bipolar(members),
                    _ => return Err(parse_err(line, format!("unknown polarity {tag:?}"))),
                };
                match head {
                    "row" => row_parts.push(part),
                    "col" => col_parts.push(part),
                    _ => return Err(parse_err(line, format!("unknown side {head:?}"))),
                }
            }
            "[SIGNS]" => match head {
                "row" => row_sign = parse_signs(line, rest)?,
                "col" => col_sign = parse_signs(line, rest)?,
                _ => return Err(parse_err(line, format!("unknown side {head:?}"))),
            },
            "[DELTA]" => {
                let c: usize = head.parse().map_err(|_| parse_err(line, "invalid column index"))?;
                delta_entries.push((c, number(line, rest)?));
            }
            "[OFFSET]" => offset = Some(number(line, text)?),
            "[SLACKS]" => {
                let column = head.parse().map_err(|_| parse_err(line, "invalid column index"))?;
                if tokens.len() < 2 {
                    return Err(parse_err(line, "expected coefficient and rhs"));
                }
                slacks.push(SlackRecovery {
                    column,
                    coefficient: number(line, tokens[0])?,
                    rhs: number(line, tokens[1])?,
                    terms: tokens[2..].iter().map(|t| indexed_value(line, t)).collect::<Result<_, _>>()?,
                });
            }
            "[LEDGER]" => match head {
                "fractional" => ledger.fractional_rows = indices(line, &tokens)?,
                "component" => ledger.certified_components.push(indices(line, &tokens)?),
                "part" => {
                    let (left, cancel) = rest.split_once('|').ok_or_else(|| parse_err(line, "missing `|`"))?;
                    let left: Vec<&str> = left.split_whitespace().collect();
                    if left.len() < 2 {
                        return Err(parse_err(line, "expected kind and signs"));
                    }
                    let linked = match left[0] {
                        "linked" => true,
                        "free" => false,
                        other => return Err(parse_err(line, format!("unknown part kind {other:?}"))),
                    };
                    let lambda = parse_signs(line, left[1])?
                        .into_iter()
                        .map(|s| s.ok_or_else(|| parse_err(line, "ledger signs must be + or -")))
                        .collect::<Result<Vec<_>, _>>()?;
                    let members = indices(line, &left[2..])?;
                    if members.len() != lambda.len() {
                        return Err(parse_err(line, "sign count differs from member count"));
                    }
                    let cancellation =
                        cancel.split_whitespace().map(|t| indexed_value(line, t)).collect::<Result<_, _>>()?;
                    ledger.parts.push(LedgerPart { members, lambda, cancellation, linked });
                }
                _ => return Err(parse_err(line, format!("unknown ledger entry {head:?}"))),
            },
            _ => return Err(parse_err(line, format!("data outside of a section: {text:?}"))),
        }
    }
    if !finished {
        return Err(parse_err(text.lines().count(), "missing [END]"));
    }
    let missing = |what: &str| parse_err(0, format!("archive lacks {what}"));
    let ncols = col_names.len();
    let mut delta = vec![Rational::zero(); ncols];
    for (c, v) in delta_entries {
        *delta.get_mut(c).ok_or_else(|| parse_err(0, format!("delta index {c} out of range")))? = v;
    }
    let partition = BiPartition { row_parts, col_parts, row_sign, col_sign };
    partition.validate(row_names.len(), ncols)?;
    Ok(PostsolveArchive {
        mode: mode.ok_or_else(|| missing("a mode"))?,
        network: network.ok_or_else(|| missing("a network mode"))?,
        structural: structural.ok_or_else(|| missing("a structural column count"))?,
        row_names,
        col_names,
        reduced_names,
        partition,
        delta,
        offset: offset.ok_or_else(|| missing("an offset"))?,
        slacks,
        ledger,
    })
}

pub fn read_archive(path: &Path) -> Result<PostsolveArchive, IoError> {
    parse_archive(&read_text(path)?)
}

/// Problem summary used in reports: rows, columns, nonzeros.
pub fn dimensions(problem: &Problem) -> (usize, usize, usize) {
    (problem.nrows(), problem.ncols(), problem.matrix.nnz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, ratio};
    use proptest::prelude::*;

    const SLACK_EXAMPLE_MPS: &str = "\
NAME slack_example
ROWS
 N obj
 L c1
 L c2
 L c3
COLUMNS
    x1 obj 1 c1 2
    x1 c2 -1 c3 -1
    x2 obj -1 c1 1
    x2 c2 -2 c3 1
    x3 c1 1 c2 -1
RHS
    RHS c1 5 c2 -3
    RHS c3 1
BOUNDS
 UP BND x1 2
 UP BND x2 2
 UP BND x3 2
ENDATA
";

    #[test]
    fn numbers() {
        assert_eq!(parse_rational("3.25"), Some(ratio(13, 4)));
        assert_eq!(parse_rational("-1e-2"), Some(ratio(-1, 100)));
        assert_eq!(parse_rational("2.5E+1"), Some(rat(25)));
        assert_eq!(parse_rational("7/3"), Some(ratio(7, 3)));
        assert_eq!(parse_rational(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_rational("x"), None);
        assert_eq!(format_exact(&ratio(-13, 4)), "-3.25");
        assert_eq!(format_exact(&ratio(1, 3)), "1/3");
        assert_eq!(format_exact(&ratio(-1, 80)), "-0.0125");
        assert_eq!(format_mps_number(&ratio(1, 3)), "3.3333333333333333e-1");
        assert_eq!(format_mps_number(&ratio(-2, 3)), "-6.6666666666666667e-1");
        assert_eq!(format_mps_number(&ratio(1000, 7)), "1.4285714285714286e2");
    }

    #[test]
    fn minimal_instance() {
        let p = parse_mps("NAME t\nROWS\n N z\n E r\nCOLUMNS\n    x z 1 r 1\nRHS\n    RHS r 1\nENDATA\n").unwrap();
        assert_eq!((p.nrows(), p.ncols()), (1, 1));
        assert_eq!(p.rhs, vec![rat(1)]);
        assert_eq!(p.lower, vec![Bound::from_int(0)]);
    }

    #[test]
    fn slack_example_as_mps() {
        let p = parse_mps(SLACK_EXAMPLE_MPS).unwrap();
        let dense: Vec<Vec<Rational>> = [[2, 1, 1], [-1, -2, -1], [-1, 1, 0]]
            .iter()
            .map(|r| r.iter().map(|&v| rat(v)).collect())
            .collect();
        assert_eq!(p.matrix.to_dense(), dense);
        assert_eq!(p.row_sense, vec![RowSense::Le; 3]);
        assert_eq!(p.rhs, vec![rat(5), rat(-3), rat(1)]);
        assert_eq!(p.objective, vec![rat(1), rat(-1), rat(0)]);
        assert_eq!(p.upper, vec![Bound::from_int(2); 3]);
        assert_eq!(p.lower, vec![Bound::from_int(0); 3]);
        let again = parse_mps(&mps_string(&p)).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn markers_bounds_and_ranges() {
        let text = "\
NAME m
OBJSENSE
    MAX
ROWS
 N obj
 E e
 G g
COLUMNS
    MARKER 'MARKER' 'INTORG'
    a obj 1 e 1
    b e 1 g 2
    MARKER 'MARKER' 'INTEND'
    c g 1
RHS
    RHS obj 5 e 3
    RHS g 1
RANGES
    RNG e -2 g 4
BOUNDS
 BV BND a
 FR BND c
 LI BND b -1
ENDATA
";
        let p = parse_mps(text).unwrap();
        assert_eq!(p.integral, vec![true, true, false]);
        assert_eq!(p.objective[0], rat(-1));
        assert_eq!(p.objective_offset, rat(5));
        assert_eq!(p.upper[0], Bound::from_int(1));
        assert_eq!(p.lower[1], Bound::from_int(-1));
        assert_eq!(p.lower[2], Bound::NegInf);
        assert_eq!(p.nrows(), 4);
        assert_eq!(p.row_sense, vec![RowSense::Ge, RowSense::Ge, RowSense::Le, RowSense::Le]);
        assert_eq!(p.rhs, vec![rat(1), rat(1), rat(3), rat(5)]);
        assert_eq!(parse_mps(&mps_string(&p)).unwrap(), p);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_mps("NAME t\nROWS\n N z\nFOO\nENDATA\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 4, .. }), "{err}");
        let err = parse_mps("NAME t\nROWS\n N z\n E r\nCOLUMNS\n    x r 1\n    x r 2\nENDATA\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 7, .. }), "{err}");
        let err = parse_mps("NAME t\nROWS\n E r\nCOLUMNS\n    x r 1\nBOUNDS\n XX BND x 1\nENDATA\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 7, .. }), "{err}");
    }

    #[test]
    fn solutions_round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let values = vec![ratio(1, 3), rat(-2)];
        let text = solution_string(&names, &values);
        assert_eq!(text, "a 1/3\nb -2\n");
        let pairs = parse_solution(&text).unwrap();
        assert_eq!(solution_vector(&pairs, &names).unwrap(), values);
        assert!(solution_vector(&[("c".into(), rat(1))], &names).is_err());
    }

    #[test]
    fn files_report_paths() {
        let err = read_mps(Path::new("/nonexistent/x.mps")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.mps"));
    }

    proptest! {
        #[test]
        fn rationals_round_trip(n in -10_000i64..10_000, d in 1i64..500) {
            let r = ratio(n, d);
            prop_assert_eq!(parse_rational(&format_exact(&r)), Some(r));
        }

        #[test]
        fn mps_round_trip(
            dense in proptest::collection::vec(proptest::collection::vec(-3i64..4, 4), 1..5),
            senses in proptest::collection::vec(0u8..3, 5),
            ints in proptest::collection::vec(any::<bool>(), 4),
            scale in 1i64..5,
        ) {
            let m = dense.len();
            let matrix = SparseMatrix::from_dense(&dense);
            let rhs = (0..m).map(|i| ratio(i as i64 * 3 - 2, 1 << scale)).collect();
            let mut p = Problem::new(
                matrix,
                rhs,
                vec![Bound::from_int(-1), Bound::NegInf, Bound::from_int(0), Bound::from_int(2)],
                vec![Bound::from_int(3), Bound::PosInf, Bound::PosInf, Bound::from_int(2)],
                vec![rat(1), ratio(-1, 2), rat(0), rat(7)],
            ).unwrap();
            p.row_sense = senses[..m].iter().map(|s| [RowSense::Eq, RowSense::Le, RowSense::Ge][*s as usize]).collect();
            p.integral = ints;
            p.objective_offset = ratio(3, 8);
            prop_assert_eq!(parse_mps(&mps_string(&p)).unwrap(), p);
        }
    }
}
