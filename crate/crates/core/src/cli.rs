//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Config, TaskSpec};
use crate::constraints::ObstacleSpec;
use crate::de_optimizer::{history_csv, with_workers};
use crate::error::{Error, Result};
use crate::fitness::level_of_value;
use crate::motion_library::{build_library, save_trajectory, validate_trajectory, Library, Query};
use crate::planner::{plan_task, PlanResult};
use crate::rollout_controller::rollout;
use crate::srb_model::MotionType;
use crate::trajectory::Trajectory;

/// Exit code of a run that completed but did not succeed.
pub const EXIT_UNSUCCESSFUL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "quadjump", version, about = "Plan quadruped jumps and manage a pre-motion library")]
pub struct Cli {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the planner and library seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize one task and write its trajectory and convergence history.
    Plan(PlanArgs),
    /// Plan sampled tasks and store the feasible ones as a library.
    BuildLibrary(BuildArgs),
    /// Pick the library entry closest to a target.
    Select(SelectArgs),
    /// Re-check stored trajectories and roll them out under joint control.
    Validate(ValidateArgs),
    /// Write best-fitness histories for several tasks.
    ExportConvergence(ExportArgs),
}

#[derive(Debug, Args, Clone)]
pub struct TaskArgs {
    /// Task file; the flags below are ignored when given.
    #[arg(long)]
    pub task: Option<PathBuf>,
    #[arg(long, default_value = "front")]
    pub motion: MotionType,
    /// In-plane displacement, m.
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub dx: f64,
    /// Height change, m.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub dz: f64,
    /// Final angle, rad.
    #[arg(long, allow_hyphen_values = true)]
    pub angle: Option<f64>,
    /// Window as `crossing,ground_top,aerial_bottom,margin`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
}

impl TaskArgs {
    pub fn spec(&self) -> Result<TaskSpec> {
        if let Some(path) = &self.task {
            return TaskSpec::load(path);
        }
        let mut spec = TaskSpec::new(self.motion, [self.dx, self.dz]);
        spec.target_angle = self.angle;
        spec.obstacle = self.window.as_deref().map(window).transpose()?;
        spec.to_task()?;
        Ok(spec)
    }
}

fn window(w: &[f64]) -> Result<ObstacleSpec> {
    let [c, g, a, m] = w else {
        return Err(Error::InvalidInput("--window needs four values".into()));
    };
    let spec = ObstacleSpec::window(*c, *g, *a, *m);
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long, default_value = "plan_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, default_value = "library")]
    pub out: PathBuf,
    /// Overrides the number of sampled tasks.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, default_value = "library")]
    pub library: PathBuf,
    /// World displacement `x,y,z`, m.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub position: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rotation: f64,
    #[arg(long)]
    pub motion: Option<MotionType>,
    /// Obstacle as `crossing,ground_top,aerial_bottom,margin`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Library directory; every entry is checked unless `--file` names one.
    #[arg(long, conflicts_with = "trajectory")]
    pub library: Option<PathBuf>,
    #[arg(long, requires = "library")]
    pub file: Option<String>,
    /// A single trajectory file.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Directory for per-trajectory rollout CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Task files; defaults to a front jump, a left jump and a yaw spin.
    #[arg(long = "task")]
    pub tasks: Vec<PathBuf>,
    #[arg(long, default_value = "convergence")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct PlanSummary {
    motion: MotionType,
    feasible: bool,
    worst_level: Option<usize>,
    energy_j: f64,
    phase_times: [f64; 3],
    generations: usize,
    first_feasible_generation: Option<usize>,
    best_fitness: f64,
    design: [f64; 12],
}

impl PlanSummary {
    fn new(task: &TaskSpec, r: &PlanResult) -> Self {
        Self {
            motion: task.motion,
            feasible: r.feasible(),
            worst_level: r.fitness.worst_level,
            energy_j: r.fitness.energy_joules,
            phase_times: [r.design.t1, r.design.t2, r.design.t3],
            generations: r.de.generations,
            first_feasible_generation: r.first_feasible_generation(),
            best_fitness: r.de.best_fitness,
            design: r.design.to_array(),
        }
    }
}

/// Loads the configuration and applies the global overrides.
pub fn effective_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.planner.seed = seed;
        cfg.library.seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::storage(path, e))
}

fn io(e: std::io::Error) -> Error {
    Error::storage("<stdout>", e)
}

/// Runs one invocation, writing human-readable output to `out`. Returns
/// the process exit code.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<i32> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        write!(out, "{}", cfg.to_toml_string()).map_err(io)?;
        return Ok(0);
    }
    let Some(command) = &cli.command else {
        return Err(Error::Config("no subcommand given (try --help)".into()));
    };
    let jobs = cli.jobs;
    match command {
        Command::Plan(args) => with_workers(jobs, || plan(&cfg, args, cli.quiet, out))?,
        Command::BuildLibrary(args) => with_workers(jobs, || build(&cfg, args, out))?,
        Command::Select(args) => select(&cfg, args, out),
        Command::Validate(args) => validate(&cfg, args, out),
        Command::ExportConvergence(args) => with_workers(jobs, || export(&cfg, args, out))?,
    }
}

fn milestones(r: &PlanResult) -> Vec<(usize, Option<usize>)> {
    let mut rows: Vec<(usize, Option<usize>)> = Vec::new();
    for (g, &v) in r.de.history.iter().enumerate() {
        let level = level_of_value(v, r.beta);
        if rows.last().is_none_or(|&(_, l)| l != level) || g % 100 == 0 {
            rows.push((g, level));
        }
    }
    rows
}

fn level_name(level: Option<usize>) -> String {
    level.map_or_else(|| "none".to_string(), |l| format!("L{l}"))
}

fn plan(cfg: &Config, args: &PlanArgs, quiet: bool, out: &mut (dyn Write + Send)) -> Result<i32> {
    let spec = args.task.spec()?;
    let task = spec.to_task()?;
    let r = plan_task(&task, &cfg.robot, &cfg.planner)?;
    if !quiet {
        for (g, level) in milestones(&r) {
            writeln!(out, "generation {g:>4}  worst level {}", level_name(level)).map_err(io)?;
        }
    }
    create_dir(&args.out)?;
    write_file(&args.out.join("convergence.csv"), &history_csv(&r.de.history))?;
    let summary = PlanSummary::new(&spec, &r);
    write_file(&args.out.join("summary.yaml"), &serde_yaml::to_string(&summary)?)?;
    write_file(&args.out.join("task.toml"), &spec.to_toml_string())?;
    writeln!(
        out,
        "phase times {:.4} {:.4} {:.4} s",
        r.design.t1, r.design.t2, r.design.t3
    )
    .map_err(io)?;
    match (&r.trajectory, r.feasible()) {
        (Some(traj), true) => {
            save_trajectory(traj, &args.out.join("trajectory.bin"))?;
            writeln!(out, "feasible, energy {:.4} J", traj.energy).map_err(io)?;
            Ok(0)
        }
        _ => {
            writeln!(out, "infeasible, worst level {}", level_name(r.fitness.worst_level)).map_err(io)?;
            Ok(EXIT_UNSUCCESSFUL)
        }
    }
}

fn build(cfg: &Config, args: &BuildArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let mut sampler = cfg.library.clone();
    if let Some(n) = args.count {
        sampler.count = n;
    }
    let outcome = build_library(&sampler, &cfg.planner, &cfg.robot, &args.out)?;
    writeln!(
        out,
        "{} of {} tasks stored in {}",
        outcome.index.entries.len(),
        sampler.count,
        args.out.display()
    )
    .map_err(io)?;
    for rej in &outcome.rejects {
        writeln!(
            out,
            "rejected task {} ({}): worst level {}",
            rej.task_index,
            rej.task.motion,
            level_name(rej.worst_level)
        )
        .map_err(io)?;
    }
    Ok(if outcome.index.entries.is_empty() && sampler.count > 0 { EXIT_UNSUCCESSFUL } else { 0 })
}

fn select(cfg: &Config, args: &SelectArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let position: [f64; 3] = args
        .position
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidInput("--position needs three values x,y,z".into()))?;
    let mut query = Query::new(position, args.rotation);
    query.motion = args.motion;
    query.obstacle = args.window.as_deref().map(window).transpose()?;
    query.validate()?;
    let mut lib = Library::open(&args.library)?;
    lib.rotation_weight = cfg.select.rotation_weight;
    let start = Instant::now();
    let (entry, traj) = match lib.select(&query) {
        Ok(hit) => hit,
        Err(Error::NoMatch) => {
            writeln!(out, "no entry matches").map_err(io)?;
            return Ok(EXIT_UNSUCCESSFUL);
        }
        Err(e) => return Err(e),
    };
    let elapsed = start.elapsed();
    let [x, y, z] = entry.target_pos;
    writeln!(
        out,
        "{} {} target ({x:.4}, {y:.4}, {z:.4}) rotation {:.4} energy {:.4} J, {} samples, loaded in {:.3} ms",
        entry.file,
        entry.motion,
        entry.target_rot,
        entry.energy_j,
        traj.samples.len(),
        elapsed.as_secs_f64() * 1e3
    )
    .map_err(io)?;
    Ok(0)
}

fn validate(cfg: &Config, args: &ValidateArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let mut items: Vec<(String, Trajectory)> = Vec::new();
    if let Some(path) = &args.trajectory {
        let name = path.file_stem().map_or("trajectory".into(), |s| s.to_string_lossy().into_owned());
        items.push((name, crate::motion_library::load_trajectory(path)?));
    } else if let Some(dir) = &args.library {
        let lib = Library::open(dir)?;
        for entry in &lib.index.entries {
            if args.file.as_ref().is_none_or(|f| *f == entry.file) {
                let name = entry.file.trim_end_matches(".bin").to_string();
                items.push((name, lib.load(entry)?));
            }
        }
        if items.is_empty() {
            return Err(Error::InvalidInput("no matching library entry".into()));
        }
    } else {
        return Err(Error::InvalidInput("give --library or --trajectory".into()));
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
    }
    let mut ok = true;
    for (name, traj) in &items {
        let constraints = validate_trajectory(traj, &cfg.robot);
        let report = rollout(traj, &cfg.rollout, &cfg.robot)?;
        if let Some(dir) = &args.out {
            write_file(&dir.join(format!("{name}_rollout.csv")), &report.csv())?;
        }
        let passed = constraints.is_ok() && report.success;
        ok &= passed;
        writeln!(
            out,
            "{name}: constraints {}, rollout {}, max com error {:.4} m, apex {:.4} m (plan {:.4} m), max torque {:.2} N*m{}",
            match &constraints {
                Ok(_) => "satisfied".to_string(),
                Err(e) => e.to_string(),
            },
            if report.success { "success" } else { "failure" },
            report.max_com_error(),
            report.apex_height,
            report.planned_apex,
            report.max_tau_cmd,
            report.failure.as_ref().map_or(String::new(), |f| format!(" ({f})"))
        )
        .map_err(io)?;
    }
    Ok(if ok { 0 } else { EXIT_UNSUCCESSFUL })
}

/// Tasks exported when none are given.
pub fn default_export_tasks() -> Vec<TaskSpec> {
    let mut spin = TaskSpec::new(MotionType::YawSpin, [0.0, 0.0]);
    spin.target_angle = Some(0.5);
    vec![
        TaskSpec::new(MotionType::Front, [0.3, 0.0]),
        TaskSpec::new(MotionType::Left, [0.2, 0.0]),
        spin,
    ]
}

fn export(cfg: &Config, args: &ExportArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let specs = if args.tasks.is_empty() {
        default_export_tasks()
    } else {
        args.tasks.iter().map(|p| TaskSpec::load(p)).collect::<Result<_>>()?
    };
    create_dir(&args.out)?;
    for (i, spec) in specs.iter().enumerate() {
        let r = plan_task(&spec.to_task()?, &cfg.robot, &cfg.planner)?;
        let path = args.out.join(format!("{i:02}_{}.csv", spec.motion));
        write_file(&path, &history_csv(&r.de.history))?;
        writeln!(
            out,
            "{}: {} generations, best {:e}, first feasible {}",
            path.display(),
            r.de.generations,
            r.de.best_fitness,
            r.first_feasible_generation().map_or("never".into(), |g| g.to_string())
        )
        .map_err(io)?;
    }
    Ok(0)
}

/// Parses the process arguments, runs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout();
    match run(&cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("quadjump").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn print_config_emits_defaults() {
        let mut buf = Vec::new();
        assert_eq!(run(&parse(&["--print-config"]), &mut buf).unwrap(), 0);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), Config::default());
    }

    #[test]
    fn seed_overrides_both_seeds() {
        let cfg = effective_config(&parse(&["--seed", "9", "--print-config"])).unwrap();
        assert_eq!(cfg.planner.seed, 9);
        assert_eq!(cfg.library.seed, 9);
    }

    #[test]
    fn task_flags() {
        let cli = parse(&["plan", "--motion", "rear", "--dx", "-0.2", "--window", "-0.1,0.05,0.35,0.02"]);
        let Some(Command::Plan(args)) = cli.command else { panic!() };
        let spec = args.task.spec().unwrap();
        assert_eq!(spec.motion, MotionType::Rear);
        assert_eq!(spec.displacement, [-0.2, 0.0]);
        assert_eq!(spec.obstacle.unwrap().crossing_coord, -0.1);
    }

    #[test]
    fn missing_subcommand_and_files_are_errors() {
        assert!(run(&parse(&[]), &mut Vec::new()).is_err());
        assert!(run(&parse(&["--config", "/nonexistent/q.toml", "--print-config"]), &mut Vec::new()).is_err());
        let cli = parse(&["select", "--library", "/nonexistent", "--position", "0.3,0,0"]);
        assert!(run(&cli, &mut Vec::new()).is_err());
    }

    #[test]
    fn milestone_levels() {
        assert_eq!(level_name(None), "none");
        assert_eq!(level_name(Some(3)), "L3");
    }
}
