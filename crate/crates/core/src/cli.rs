//! Command-line driver. One verb per invocation; every artifact lands in
//! the output directory and `report.txt` collects the text blocks under
//! `== SECTION <name> ==` sentinels.
//!
//! Exit codes: 0 success, 2 configuration, 3 audit failure, 4 solver
//! non-convergence, 5 I/O. On failure the first line on stderr is
//! `parakkt-error code=<n> class=<class>: <reason>`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::field_io::{fmt17, read_field, write_field};
use crate::grid::Grid;
use crate::kkt::{
    active_threshold, constraint_field, kkt_residuals_with, recover_multiplier_division,
    recover_multiplier_max, KktPoint, ResidualReport,
};
use crate::optimizer::{solve_ocp, OptimizerOptions, SolveStatus};
use crate::oracle::{compare_multipliers, discretize_to_nlp, solve_nlp_active_set};
use crate::problem::{
    builtin_problem, read_problem, validate_hypotheses, HypothesisReport, ProblemSpec,
};
use crate::regularity::multiplier_continuity_report;
use crate::soc::{
    legendre_min, quadratic_form, quadratic_growth_probe_with, sample_critical_direction_with,
};
use crate::solvers::{ParabolicSolver, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Names of the exported KKT fields, in file order.
pub const FIELD_NAMES: [&str; 4] = ["y", "u", "phi", "e"];

#[derive(Parser, Debug)]
#[command(
    name = "parakkt",
    version,
    about = "KKT solver and audits for semilinear parabolic control problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Subcommand, Debug)]
pub enum Verb {
    /// Audit the structural hypotheses of a problem.
    Validate(Common),
    /// Compute a KKT point and write its fields, residuals and trace.
    Solve(Common),
    /// Recompute the residuals of fields written by `solve`.
    CheckKkt(Common),
    /// Legendre minimum, second-order form samples and growth probe.
    Soc(SocArgs),
    /// Hölder fits of the KKT fields.
    Holder(HolderArgs),
    /// Compare multipliers with the dense finite-dimensional oracle.
    OracleCompare(Common),
    /// Write KKT fields plus the constraint and recovered multipliers.
    ExportFields(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Catalog name or path to a problem file.
    #[arg(short, long, default_value = "tracking_box_1d")]
    pub problem: String,
    /// Spatial nodes per axis including the boundary; repeat for 2-d.
    #[arg(long)]
    pub nodes: Vec<usize>,
    /// Time levels including t = 0.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long, default_value = "parakkt-out")]
    pub out: PathBuf,
    /// Directory with y/u/phi/e field files to use instead of solving.
    #[arg(long)]
    pub fields: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SocArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub radius: f64,
}

#[derive(Args, Debug, Clone)]
pub struct HolderArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 20_000)]
    pub pairs: usize,
}

/// Failure with its exit class.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub reason: String,
}

impl Failure {
    fn new(code: i32, reason: impl Into<String>) -> Failure {
        Failure {
            code,
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> &'static str {
        match self.code {
            EXIT_CONFIG => "config",
            EXIT_AUDIT => "audit",
            EXIT_SOLVER => "solver",
            EXIT_IO => "io",
            _ => "internal",
        }
    }

    /// The single-line reason printed first on failure.
    pub fn line(&self) -> String {
        let reason = self.reason.replace(['\n', '\r'], " ");
        format!(
            "parakkt-error code={} class={}: {}",
            self.code,
            self.class(),
            reason
        )
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::ProblemFile(_)
        | Error::UnknownProblem { .. }
        | Error::InvalidArgument(_)
        | Error::Assembly { .. }
        | Error::DimensionMismatch(_)
        | Error::SizeGuard { .. } => EXIT_CONFIG,
        Error::NonFiniteMap { .. } | Error::Hypothesis(_) | Error::DirectionRejected(_) => {
            EXIT_AUDIT
        }
        Error::NewtonDivergence { .. }
        | Error::NonFiniteState { .. }
        | Error::SingularStep { .. }
        | Error::NoRoot { .. }
        | Error::PointwiseFailure { .. }
        | Error::Nlp(_) => EXIT_SOLVER,
        Error::Io { .. } | Error::MalformedField(_) | Error::NonFiniteEntry { .. } => EXIT_IO,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::new(exit_code(&e), e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// Accumulates `report.txt`.
#[derive(Default)]
struct Report {
    text: String,
}

impl Report {
    fn section(&mut self, name: &str, body: &str) {
        let _ = writeln!(self.text, "== SECTION {name} ==");
        self.text.push_str(body);
        if !body.ends_with('\n') {
            self.text.push('\n');
        }
    }
}

/// Extracts the body of one section from a report.
pub fn report_section<'a>(report: &'a str, name: &str) -> Option<&'a str> {
    let head = format!("== SECTION {name} ==\n");
    let start = report.find(&head)? + head.len();
    let rest = &report[start..];
    let end = rest.find("== SECTION ").unwrap_or(rest.len());
    Some(&rest[..end])
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_problem(src: &str) -> Result<ProblemSpec> {
    let path = Path::new(src);
    if path.exists() {
        read_problem(path)
    } else if src.contains('/') || src.contains('.') {
        Err(Error::io(
            path,
            std::io::Error::from(std::io::ErrorKind::NotFound),
        ))
    } else {
        builtin_problem(src)
    }
}

struct Ctx {
    spec: ProblemSpec,
    common: Common,
    report: Report,
}

impl Ctx {
    fn new(common: &Common) -> Run<Ctx> {
        let spec = load_problem(&common.problem)?;
        if !(common.tol > 0.0) {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!("tolerance must be positive, got {}", common.tol),
            ));
        }
        fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
        Ok(Ctx {
            spec,
            common: common.clone(),
            report: Report::default(),
        })
    }

    fn grid(&self, default_nodes: usize, default_levels: usize) -> Run<Arc<Grid>> {
        let nodes = if self.common.nodes.is_empty() {
            vec![default_nodes; self.spec.dim]
        } else if self.common.nodes.len() == 1 {
            vec![self.common.nodes[0]; self.spec.dim]
        } else {
            self.common.nodes.clone()
        };
        let levels = self.common.levels.unwrap_or(default_levels);
        if nodes.iter().any(|&n| n < 3) || levels < 2 {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!("grid needs >= 3 nodes per axis and >= 2 levels, got {nodes:?} x {levels}"),
            ));
        }
        Ok(Grid::for_problem(&self.spec, &nodes, levels)?)
    }

    fn audit(&mut self) -> Run<HypothesisReport> {
        let rep = validate_hypotheses(&self.spec, &self.spec.sample_box, 4096, self.common.seed)?;
        self.report.section("HYPOTHESES", &rep.to_kv());
        Ok(rep)
    }

    fn require_audit(&mut self) -> Run<()> {
        let rep = self.audit()?;
        if rep.all_pass() {
            Ok(())
        } else {
            self.finish()?;
            Err(Failure::new(
                EXIT_AUDIT,
                format!(
                    "hypothesis audit failed: h1={} h2={} h4={} h4_prime={}",
                    rep.h1, rep.h2, rep.h4, rep.h4_prime
                ),
            ))
        }
    }

    fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            max_outer: self.common.max_outer,
            tol_kkt: self.common.tol,
            ..OptimizerOptions::default()
        }
    }

    /// Either reads the fields from `--fields` or solves for them.
    fn point(&mut self) -> Run<KktPoint> {
        if let Some(dir) = self.common.fields.clone() {
            return self.read_point(&dir);
        }
        let grid = self.grid(33, 65)?;
        let sol = solve_ocp(&self.spec, &grid, &self.optimizer_options())?;
        if sol.trace.status != SolveStatus::Converged {
            return Err(Failure::new(
                EXIT_SOLVER,
                format!(
                    "optimizer stopped with status {:?} after {} iterations",
                    sol.trace.status,
                    sol.trace.rows.len()
                ),
            ));
        }
        Ok(sol.point)
    }

    fn read_point(&self, dir: &Path) -> Run<KktPoint> {
        let mut fields = Vec::with_capacity(4);
        for name in FIELD_NAMES {
            fields.push(read_field(&dir.join(format!("{name}.field")))?);
        }
        let grid = fields[0].grid().clone();
        let expect = Grid::for_problem(&self.spec, grid.space.nodes(), grid.levels())?;
        if expect.space.extents() != grid.space.extents()
            || expect.time.horizon() != grid.time.horizon()
        {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!(
                    "fields in {} do not match the problem domain",
                    dir.display()
                ),
            ));
        }
        let e = fields.pop().unwrap();
        let phi = fields.pop().unwrap();
        let u = fields.pop().unwrap();
        let y = fields.pop().unwrap();
        let objective = crate::kkt::objective(&self.spec, &y, &u);
        let point = KktPoint {
            y,
            u,
            phi,
            e,
            objective,
        };
        point.check_aligned()?;
        Ok(point)
    }

    fn write_fields(&self, point: &KktPoint) -> Run<()> {
        for (name, f) in FIELD_NAMES
            .iter()
            .zip([&point.y, &point.u, &point.phi, &point.e])
        {
            write_field(&self.out(&format!("{name}.field")), f)?;
        }
        Ok(())
    }

    fn residuals(&self, point: &KktPoint) -> Run<ResidualReport> {
        let solver = ParabolicSolver::new(&self.spec, point.y.grid(), SolverOptions::default())?;
        Ok(kkt_residuals_with(&solver, point)?)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.common.out.join(name)
    }

    fn finish(&self) -> Run<()> {
        write_text(&self.out("report.txt"), &self.report.text)?;
        Ok(())
    }
}

fn validate(common: &Common) -> Run<String> {
    let mut ctx = Ctx::new(common)?;
    let rep = ctx.audit()?;
    ctx.finish()?;
    if !rep.all_pass() {
        return Err(Failure::new(
            EXIT_AUDIT,
            format!(
                "hypothesis audit failed: h1={} h2={} h4={} h4_prime={}",
                rep.h1, rep.h2, rep.h4, rep.h4_prime
            ),
        ));
    }
    Ok(format!("validate problem={} all_pass=true", ctx.spec.name))
}

fn solve(common: &Common) -> Run<String> {
    let mut ctx = Ctx::new(common)?;
    ctx.require_audit()?;
    let grid = ctx.grid(33, 65)?;
    let sol = solve_ocp(&ctx.spec, &grid, &ctx.optimizer_options())?;
    ctx.write_fields(&sol.point)?;
    write_text(&ctx.out("trace.csv"), &sol.trace.to_csv())?;
    let res = ctx.residuals(&sol.point)?;
    ctx.report.section("RESIDUALS", &res.to_kv());
    let eps = active_threshold(&sol.point.e);
    let active = sol.point.e.as_slice().iter().filter(|&&v| v > eps).count();
    let mut s = String::new();
    let _ = writeln!(s, "status = {:?}", sol.trace.status);
    let _ = writeln!(s, "iterations = {}", sol.trace.rows.len());
    let _ = writeln!(s, "objective = {}", fmt17(sol.point.objective));
    let _ = writeln!(s, "active_nodes = {active}");
    ctx.report.section("SOLVE", &s);
    ctx.finish()?;
    if sol.trace.status != SolveStatus::Converged {
        return Err(Failure::new(
            EXIT_SOLVER,
            format!(
                "optimizer stopped with status {:?}, kkt_max {:e}",
                sol.trace.status,
                res.kkt_max()
            ),
        ));
    }
    Ok(format!(
        "solve status=Converged iterations={} kkt_max={:e}",
        sol.trace.rows.len(),
        res.kkt_max()
    ))
}

fn check_kkt(common: &Common) -> Run<String> {
    let mut ctx = Ctx::new(common)?;
    let dir = common
        .fields
        .clone()
        .ok_or_else(|| Failure::new(EXIT_CONFIG, "check-kkt needs --fields <dir>"))?;
    let point = ctx.read_point(&dir)?;
    let res = ctx.residuals(&point)?;
    ctx.report.section("RESIDUALS", &res.to_kv());
    ctx.finish()?;
    Ok(format!("check-kkt kkt_max={:e}", res.kkt_max()))
}

fn soc(args: &SocArgs) -> Run<String> {
    let mut ctx = Ctx::new(&args.common)?;
    ctx.require_audit()?;
    let point = ctx.point()?;
    let seed = ctx.common.seed;
    let lm = legendre_min(&ctx.spec, &point)?;
    let mut s = String::new();
    let _ = writeln!(s, "legendre_min = {}", fmt17(lm.value));
    let _ = writeln!(s, "legendre_min_level = {}", lm.level);
    let _ = writeln!(s, "legendre_min_x1 = {}", fmt17(lm.x[0]));
    let _ = writeln!(s, "legendre_min_t = {}", fmt17(lm.t));

    let solver = ParabolicSolver::new(&ctx.spec, point.y.grid(), SolverOptions::default())?;
    let mut csv = String::from("sample,Q,c1_value,c1_satisfied,c2_residual,c3_violation\n");
    let mut q_min = f64::INFINITY;
    let mut rejected = 0;
    for i in 0..args.directions {
        match sample_critical_direction_with(&solver, &point, seed.wrapping_add(i as u64)) {
            Ok(dir) => {
                let q = quadratic_form(&ctx.spec, &point, &dir)?;
                q_min = q_min.min(q);
                let _ = writeln!(
                    csv,
                    "{i},{},{},{},{},{}",
                    fmt17(q),
                    fmt17(dir.c1_value),
                    dir.c1_satisfied,
                    fmt17(dir.c2_residual),
                    fmt17(dir.c3_violation)
                );
            }
            Err(Error::DirectionRejected(_)) => rejected += 1,
            Err(e) => return Err(e.into()),
        }
    }
    write_text(&ctx.out("soc_directions.csv"), &csv)?;
    let _ = writeln!(s, "directions_rejected = {rejected}");
    let _ = writeln!(s, "quadratic_form_min = {}", fmt17(q_min));

    let probe = quadratic_growth_probe_with(&solver, &point, args.trials, args.radius, seed)?;
    write_text(&ctx.out("growth.csv"), &probe.to_csv())?;
    let _ = writeln!(s, "kappa_hat = {}", fmt17(probe.kappa_hat));
    let _ = writeln!(s, "growth_dropped = {}", probe.dropped);
    ctx.report.section("SOC", &s);
    ctx.finish()?;
    Ok(format!(
        "soc legendre_min={:e} kappa_hat={:e}",
        lm.value, probe.kappa_hat
    ))
}

fn holder(args: &HolderArgs) -> Run<String> {
    let mut ctx = Ctx::new(&args.common)?;
    ctx.require_audit()?;
    let point = ctx.point()?;
    let rep = multiplier_continuity_report(&ctx.spec, &point, args.pairs, ctx.common.seed)?;
    for (name, fit) in &rep.fits {
        write_text(&ctx.out(&format!("holder_{name}.csv")), &fit.bins_csv())?;
    }
    ctx.report.section("HOLDER", &rep.to_kv());
    ctx.finish()?;
    let e_alpha = rep
        .fits
        .iter()
        .find(|(n, _)| *n == "e")
        .map_or(f64::NAN, |(_, f)| f.alpha_hat);
    Ok(format!("holder e.alpha_hat={e_alpha:.4}"))
}

fn oracle_compare(common: &Common) -> Run<String> {
    let mut ctx = Ctx::new(common)?;
    ctx.require_audit()?;
    let grid = ctx.grid(5, 5)?;
    let inst = discretize_to_nlp(&ctx.spec, &grid)?;
    let nlp = solve_nlp_active_set(&inst, &vec![0.0; inst.n_vars()])?;
    let sol = solve_ocp(&ctx.spec, &grid, &ctx.optimizer_options())?;
    if sol.trace.status != SolveStatus::Converged {
        return Err(Failure::new(
            EXIT_SOLVER,
            format!("optimizer stopped with status {:?}", sol.trace.status),
        ));
    }
    let d = compare_multipliers(&inst, &nlp, &sol.point, true)?;
    let mut s = d.to_kv();
    let _ = writeln!(s, "oracle_iterations = {}", nlp.iterations);
    let _ = writeln!(s, "oracle_stationarity = {}", fmt17(nlp.stationarity));
    let _ = writeln!(s, "oracle_objective = {}", fmt17(inst.objective(&nlp.z)));
    let _ = writeln!(s, "pde_objective = {}", fmt17(sol.point.objective));
    ctx.report.section("ORACLE", &s);
    ctx.finish()?;
    let worst = d.e_linf.max(d.phi_linf);
    if !(worst <= 1e-6) {
        return Err(Failure::new(
            EXIT_AUDIT,
            format!("multiplier discrepancy {worst:e} exceeds 1e-6"),
        ));
    }
    Ok(format!(
        "oracle-compare e_linf={:e} phi_linf={:e}",
        d.e_linf, d.phi_linf
    ))
}

fn export_fields(common: &Common) -> Run<String> {
    let mut ctx = Ctx::new(common)?;
    ctx.require_audit()?;
    let point = ctx.point()?;
    ctx.write_fields(&point)?;
    let g = constraint_field(&ctx.spec, &point.y, &point.u)?;
    let e_div = recover_multiplier_division(&ctx.spec, &point.y, &point.u, &point.phi)?;
    let e_max = recover_multiplier_max(&ctx.spec, &point.y, &point.phi)?;
    write_field(&ctx.out("g.field"), &g)?;
    write_field(&ctx.out("e_division.field"), &e_div)?;
    write_field(&ctx.out("e_max.field"), &e_max)?;
    let mut s = String::new();
    let _ = writeln!(s, "recovery_gap = {}", fmt17(e_div.max_abs_diff(&e_max)));
    let _ = writeln!(s, "files = y u phi e g e_division e_max");
    ctx.report.section("EXPORT", &s);
    ctx.finish()?;
    Ok(format!("export-fields out={}", ctx.common.out.display()))
}

fn dispatch(cli: &Cli) -> Run<String> {
    match &cli.verb {
        Verb::Validate(c) => validate(c),
        Verb::Solve(c) => solve(c),
        Verb::CheckKkt(c) => check_kkt(c),
        Verb::Soc(a) => soc(a),
        Verb::Holder(a) => holder(a),
        Verb::OracleCompare(c) => oracle_compare(c),
        Verb::ExportFields(c) => export_fields(c),
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                Failure::new(EXIT_CONFIG, first.trim_start_matches("error: ")).line()
            );
            eprint!("{e}");
            return EXIT_CONFIG;
        }
    };
    match dispatch(&cli) {
        Ok(line) => {
            println!("{line}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("{}", f.line());
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_classes() {
        assert_eq!(exit_code(&Error::ProblemFile("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Hypothesis("x".into())), EXIT_AUDIT);
        assert_eq!(exit_code(&Error::Nlp("x".into())), EXIT_SOLVER);
        assert_eq!(exit_code(&Error::MalformedField("x".into())), EXIT_IO);
    }

    #[test]
    fn failure_line_is_single_line() {
        let f = Failure::new(EXIT_IO, "a\nb");
        assert_eq!(f.line(), "parakkt-error code=5 class=io: a b");
    }

    #[test]
    fn sections() {
        let r = "== SECTION A ==\nx = 1\n== SECTION B ==\ny = 2\n";
        assert_eq!(report_section(r, "A"), Some("x = 1\n"));
        assert_eq!(report_section(r, "B"), Some("y = 2\n"));
        assert_eq!(report_section(r, "C"), None);
    }
}
