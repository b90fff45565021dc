use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::gen::{self, GenError, Generated, RandomShape};
use crate::io::{
    self, format_exact, IoError, PostsolveArchive, ReductionMode, SlackRecovery,
};
use crate::lpexact::{LpOutcome, LpSolver};
use crate::milpfold::{detect_milp_reduction, fiber_from_lift, recover_integral, round_integer_bounds, AtuLedger, MilpError};
use crate::model::{
    fold_slack_columns, is_integral, project_solution, BiPartition, ModelError, Problem, Rational, ReflectionReduction,
    StandardForm,
};
use crate::netmat::NetworkMode;
use crate::refine::{compute_delta_center, refine_plain, refine_reflection, InitialPartitionSpec, RefineError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("archive does not match the instance: {0}")]
    ArchiveMismatch(String),
    #[error("reduced solution is infeasible: {0}")]
    InfeasibleInput(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl From<MilpError> for CliError {
    fn from(e: MilpError) -> Self {
        match e {
            MilpError::Model(m) => CliError::Model(m),
            MilpError::Refine(r) => CliError::Refine(r),
            MilpError::FractionalReducedValue { .. } => CliError::InfeasibleInput(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(IoError::Parse { .. }) => 2,
            CliError::Verification(_) => 3,
            CliError::Invariant(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReduceOptions {
    pub mode: ReductionMode,
    pub network: NetworkMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReduceStats {
    pub original: (usize, usize, usize),
    pub reduced: (usize, usize, usize),
    pub detection: Duration,
}

impl ReduceStats {
    pub fn summary_line(&self, mode: ReductionMode) -> String {
        let pct = |a: usize, b: usize| if a == 0 { 0.0 } else { 100.0 * (a - b.min(a)) as f64 / a as f64 };
        format!(
            "mode={} rows={} cols={} nnz={} reduced_rows={} reduced_cols={} reduced_nnz={} col_reduction_pct={:.1} detect_ms={:.3}",
            mode.as_str(),
            self.original.0,
            self.original.1,
            self.original.2,
            self.reduced.0,
            self.reduced.1,
            self.reduced.2,
            pct(self.original.1, self.reduced.1),
            self.detection.as_secs_f64() * 1e3,
        )
    }
}

#[derive(Clone, Debug)]
pub struct ReduceOutput {
    pub standard: StandardForm,
    pub reduction: ReflectionReduction,
    /// Reduced problem after dropping aggregated slack columns.
    pub reduced: Problem,
    pub archive: PostsolveArchive,
    pub stats: ReduceStats,
}

/// Reduces an instance in memory.
pub fn reduce_problem(problem: &Problem, opts: ReduceOptions) -> Result<ReduceOutput, CliError> {
    problem.validate()?;
    let standard = problem.to_equality_form();
    let eq = &standard.problem;
    let start = Instant::now();
    let (reduction, ledger) = match opts.mode {
        ReductionMode::Lp => {
            let partition = refine_plain(eq, &InitialPartitionSpec::trivial(eq))?;
            (ReflectionReduction::new(eq, partition, compute_delta_center(eq)?)?, AtuLedger::default())
        }
        ReductionMode::LpReflect => {
            let delta = compute_delta_center(eq)?;
            let partition = refine_reflection(eq, &InitialPartitionSpec::trivial(eq), &delta)?;
            (ReflectionReduction::new(eq, partition, delta)?, AtuLedger::default())
        }
        ReductionMode::Milp => {
            let detection = detect_milp_reduction(eq, opts.network)?;
            (detection.reduction, detection.ledger)
        }
    };
    let detection = start.elapsed();
    let slack_only: Vec<bool> =
        reduction.reduced_parts().iter().map(|p| p.members.iter().all(|&w| standard.is_slack(w))).collect();
    let (reduced, elided) = fold_slack_columns(&reduction.reduced, &slack_only);
    let dropped: std::collections::BTreeSet<usize> = elided.iter().map(|e| e.column).collect();
    let kept_index: Vec<Option<usize>> = {
        let mut next = 0;
        (0..reduction.reduced.ncols())
            .map(|c| {
                (!dropped.contains(&c)).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let slacks = elided
        .iter()
        .map(|e| SlackRecovery {
            column: e.column,
            coefficient: e.coefficient.clone(),
            rhs: e.rhs.clone(),
            terms: reduction
                .reduced
                .matrix
                .row(e.row)
                .iter()
                .filter(|(c, _)| *c != e.column)
                .map(|(c, v)| (kept_index[*c].expect("only the elided column leaves its row"), v.clone()))
                .collect(),
        })
        .collect();
    let archive = PostsolveArchive {
        mode: opts.mode,
        network: (opts.mode == ReductionMode::Milp).then_some(opts.network),
        structural: standard.structural,
        row_names: eq.row_names.clone(),
        col_names: eq.col_names.clone(),
        reduced_names: reduced.col_names.clone(),
        partition: reduction.partition.clone(),
        delta: reduction.delta.clone(),
        offset: reduction.offset(eq),
        slacks,
        ledger,
    };
    let stats = ReduceStats { original: io::dimensions(problem), reduced: io::dimensions(&reduced), detection };
    Ok(ReduceOutput { standard, reduction, reduced, archive, stats })
}

pub fn cmd_reduce(input: &Path, opts: ReduceOptions, out: &Path, map: &Path) -> Result<ReduceStats, CliError> {
    let problem = io::read_mps(input)?;
    let output = reduce_problem(&problem, opts)?;
    io::write_mps(&output.reduced, out)?;
    io::write_archive(&output.archive, map)?;
    let s = &output.stats;
    println!("original: {} rows, {} columns, {} nonzeros", s.original.0, s.original.1, s.original.2);
    println!("reduced:  {} rows, {} columns, {} nonzeros", s.reduced.0, s.reduced.1, s.reduced.2);
    println!("detection time: {:.3} ms", s.detection.as_secs_f64() * 1e3);
    println!("{}", s.summary_line(opts.mode));
    Ok(output.stats)
}

fn check_archive(standard: &StandardForm, archive: &PostsolveArchive) -> Result<(), CliError> {
    let eq = &standard.problem;
    if archive.col_names != eq.col_names || archive.row_names != eq.row_names || archive.structural != standard.structural {
        return Err(CliError::ArchiveMismatch("row or column names differ".into()));
    }
    Ok(())
}

/// Maps kept reduced values to an original solution, verified exactly.
pub fn postsolve(original: &Problem, archive: &PostsolveArchive, kept: &[Rational]) -> Result<Vec<Rational>, CliError> {
    let standard = original.to_equality_form();
    check_archive(&standard, archive)?;
    let eq = &standard.problem;
    let lifted = archive.lift(kept)?;
    let x = match archive.mode {
        ReductionMode::Lp | ReductionMode::LpReflect => lifted,
        ReductionMode::Milp => {
            let full = archive.full_reduced(kept)?;
            let parts: Vec<_> = archive.partition.unipolar_col_parts().collect();
            for (k, part) in parts.iter().enumerate() {
                if part.members.iter().all(|&w| eq.integral[w]) && !is_integral(&full[k]) {
                    return Err(CliError::InfeasibleInput(format!("reduced integer column {k} has value {}", full[k])));
                }
            }
            let rounded = round_integer_bounds(eq)?;
            if let Err(v) = rounded.check_feasible(&lifted, false) {
                return Err(CliError::InfeasibleInput(format!("lifted point violates {v:?}")));
            }
            let fiber = fiber_from_lift(&rounded, &archive.ledger, &lifted)?;
            recover_integral(&fiber, &lifted)?
        }
    };
    let integers = archive.mode == ReductionMode::Milp;
    if let Err(v) = eq.check_feasible(&x, integers) {
        let dump: Vec<String> = eq.col_names.iter().zip(&x).map(|(n, v)| format!("{n}={}", format_exact(v))).collect();
        return Err(CliError::Invariant(format!("postsolved point violates {v:?}; point: {}", dump.join(" "))));
    }
    Ok(x[..standard.structural].to_vec())
}

pub fn cmd_postsolve(solution: &Path, archive: &Path, original: &Path, out: &Path) -> Result<(), CliError> {
    let archive = io::read_archive(archive)?;
    let problem = io::read_mps(original)?;
    let pairs = io::read_solution(solution)?;
    let kept = io::solution_vector(&pairs, &archive.reduced_names)?;
    let x = postsolve(&problem, &archive, &kept)?;
    io::write_solution(out, &problem.col_names, &x)?;
    println!("objective {}", format_exact(&problem.objective_value(&x)));
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_objective(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| Rational::from_integer(rng.gen_range(-5i64..=5).into())).collect()
}

fn outcome_value(o: &LpOutcome) -> String {
    match o {
        LpOutcome::Optimal { objective, .. } => format_exact(objective),
        LpOutcome::Infeasible => "infeasible".into(),
        LpOutcome::Unbounded => "unbounded".into(),
    }
}

/// Samples vertices on both sides, maps them across and compares.
pub fn verify(
    original: &Problem,
    reduced: &Problem,
    archive: &PostsolveArchive,
    samples: usize,
    seed: u64,
) -> Result<VerifyReport, CliError> {
    let standard = original.to_equality_form();
    check_archive(&standard, archive)?;
    if reduced.col_names != archive.reduced_names {
        return Err(CliError::ArchiveMismatch("reduced column names differ".into()));
    }
    let eq = &standard.problem;
    let mut report = VerifyReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut original_lp = LpSolver::new(eq);
    let mut reduced_lp = LpSolver::new(reduced);
    let a = original_lp.solve(&eq.objective, &eq.objective_offset);
    let b = reduced_lp.solve(&reduced.objective, &reduced.objective_offset);
    report.checked += 1;
    if outcome_value(&a) != outcome_value(&b) {
        report.failures.push(format!("optimal values differ: original {} reduced {}", outcome_value(&a), outcome_value(&b)));
    }
    if !original_lp.is_feasible() || !reduced_lp.is_feasible() {
        return Ok(report);
    }

    let dropped: std::collections::BTreeSet<usize> = archive.slacks.iter().map(|s| s.column).collect();
    for k in 0..samples {
        // reduced to original
        let objective = random_objective(&mut rng, reduced.ncols());
        let y = reduced_lp.vertex_for(&objective).expect("feasibility checked above");
        report.checked += 1;
        match archive.lift(&y) {
            Err(e) => report.failures.push(format!("sample {k}: lifting failed: {e}")),
            Ok(x) => {
                if let Err(v) = eq.check_feasible(&x, false) {
                    report.failures.push(format!("sample {k}: lifted point violates {v:?}"));
                } else if eq.objective_value(&x) != reduced.objective_value(&y) {
                    report.failures.push(format!(
                        "sample {k}: lifted objective {} differs from reduced objective {}",
                        format_exact(&eq.objective_value(&x)),
                        format_exact(&reduced.objective_value(&y))
                    ));
                } else {
                    let back = project_solution(&x, &archive.partition, &archive.delta)?;
                    let kept: Vec<Rational> =
                        back.into_iter().enumerate().filter(|(c, _)| !dropped.contains(c)).map(|(_, v)| v).collect();
                    if kept != y {
                        report.failures.push(format!("sample {k}: projection of the lift differs from the reduced point"));
                    }
                }
            }
        }

        // original to reduced
        let objective = random_objective(&mut rng, eq.ncols());
        let x = original_lp.vertex_for(&objective).expect("feasibility checked above");
        report.checked += 1;
        let full = project_solution(&x, &archive.partition, &archive.delta)?;
        let y: Vec<Rational> = full.into_iter().enumerate().filter(|(c, _)| !dropped.contains(c)).map(|(_, v)| v).collect();
        if let Err(v) = reduced.check_feasible(&y, false) {
            report.failures.push(format!("sample {k}: projected point violates {v:?}"));
        } else if eq.objective_value(&x) != reduced.objective_value(&y) {
            report.failures.push(format!(
                "sample {k}: projected objective {} differs from original objective {}",
                format_exact(&reduced.objective_value(&y)),
                format_exact(&eq.objective_value(&x))
            ));
        }
    }
    Ok(report)
}

pub fn cmd_verify(original: &Path, reduced: &Path, archive: &Path, samples: usize, seed: u64) -> Result<VerifyReport, CliError> {
    let report = verify(&io::read_mps(original)?, &io::read_mps(reduced)?, &io::read_archive(archive)?, samples, seed)?;
    for f in &report.failures {
        println!("FAIL {f}");
    }
    println!("checked={} failures={}", report.checked, report.failures.len());
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::Verification(format!("{} of {} checks failed", report.failures.len(), report.checked)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenKind {
    Gap { knapsacks: Option<usize>, caps: Option<Vec<i64>>, items: Option<String> },
    ReflectionExample,
    DupRandom(RandomShape),
    ReflectRandom(RandomShape),
}

pub fn generate(kind: &GenKind, seed: u64) -> Result<Generated, CliError> {
    Ok(match kind {
        GenKind::ReflectionExample => gen::reflection_example(),
        GenKind::DupRandom(shape) => gen::dup_random(seed, *shape)?,
        GenKind::ReflectRandom(shape) => gen::reflect_random(seed, *shape)?,
        GenKind::Gap { knapsacks, caps, items } => match (caps, items) {
            (Some(caps), Some(items)) => {
                if knapsacks.is_some_and(|k| k != caps.len()) {
                    return Err(GenError::Parameters("--knapsacks disagrees with --cap".into()).into());
                }
                gen::gap(caps, &gen::parse_items(items)?)
            }
            (None, None) => gen::gap_random(seed, knapsacks.unwrap_or(3), 6),
            _ => return Err(GenError::Parameters("--cap and --items go together".into()).into()),
        },
    })
}

/// Sidecar path for the planted ground truth.
pub fn truth_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth");
    PathBuf::from(s)
}

pub fn cmd_gen(kind: &GenKind, seed: u64, out: &Path) -> Result<Generated, CliError> {
    let generated = generate(kind, seed)?;
    io::write_mps(&generated.problem, out)?;
    let truth = truth_path(out);
    std::fs::write(&truth, generated.truth_string()).map_err(|source| IoError::Io { path: truth.clone(), source })?;
    info!("wrote {} and {}", out.display(), truth.display());
    Ok(generated)
}

pub fn cmd_stats(input: &Path) -> Result<(), CliError> {
    let p = io::read_mps(input)?;
    let (m, n, nnz) = io::dimensions(&p);
    let ints = p.integral.iter().filter(|&&b| b).count();
    println!("{}: {m} rows, {n} columns ({ints} integer), {nnz} nonzeros", p.name);
    println!("rows={m} cols={n} integer_cols={ints} nnz={nnz}");
    Ok(())
}

/// Checks that a partition groups every planted class.
pub fn covers_planted(partition: &BiPartition, classes: &[gen::PlantedClass]) -> bool {
    let index = partition.col_part_index();
    classes.iter().all(|c| c.members.iter().all(|(w, _)| index[*w] == index[c.members[0].0]))
}
