use clap::{Parser, Subcommand};
use shelfstow::admm::{self, SolveStatus};
use shelfstow::formulation::layout::VariableLayout;
use shelfstow::formulation::{generate_instance, Instance, Solution};
use shelfstow::harness::bench::{self, BenchConfig, Method};
use shelfstow::harness::config::Config;
use shelfstow::harness::render::render_svg;
use shelfstow::harness::sim::{simulate_insertion, trace_csv, Plan};
use shelfstow::harness::verify::verify;
use shelfstow::harness::oracle;
use shelfstow::mpcc;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shelfstow", about = "2-D item stowing planner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        seed: u64,
        /// Total item count (stored items plus the one to insert).
        #[arg(long = "n-items")]
        n_items: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve an instance.
    Solve {
        #[arg(long, value_parser = ["admm", "mpcc", "oracle"])]
        method: String,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the ADMM residual history as CSV.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Verify a solution independently of the solver.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the benchmark matrix.
    Bench {
        /// Comma-separated subset of admm,mpcc,oracle.
        #[arg(long, default_value = "admm,mpcc")]
        methods: String,
        /// Comma-separated total item counts.
        #[arg(long = "n-items", default_value = "4,6,8")]
        n_items: String,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Zero out time columns so reruns are byte-identical.
        #[arg(long)]
        zero_timing: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render an instance (and optionally a solution) as SVG.
    Render {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate an admittance-controlled insertion plan.
    Sim {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    BadInput(String),
    SolverFailure(String),
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::default()),
        Some(p) => Config::load(p).map_err(|e| CliError::BadInput(e.to_string())),
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

fn write(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

fn load_instance(path: &PathBuf) -> Result<Instance, CliError> {
    Instance::from_json(&read(path)?).map_err(|e| CliError::BadInput(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            seed,
            n_items,
            out,
            config,
        } => {
            if n_items == 0 {
                return Err(CliError::BadInput("--n-items must be at least 1".into()));
            }
            let cfg = load_config(&config)?;
            let inst = generate_instance(seed, n_items - 1, &cfg.gen_params())
                .map_err(|e| CliError::BadInput(e.to_string()))?;
            write(&out, &inst.to_json())
        }
        Command::Solve {
            method,
            instance,
            out,
            config,
            residuals,
        } => {
            let cfg = load_config(&config)?;
            let inst = load_instance(&instance)?;
            let params = cfg.phys_params(&inst);
            let layout = VariableLayout::new(inst.n_items());
            let (status, y, objective) = match method.as_str() {
                "admm" => {
                    let rep = admm::solve_instance(&inst, params, &cfg.admm_config())
                        .map_err(|e| CliError::BadInput(e.to_string()))?;
                    if let Some(path) = &residuals {
                        let mut csv =
                            String::from("iteration,residual,f_obj,mip_time,nlp_time\n");
                        for (k, s) in rep.iter_stats.iter().enumerate() {
                            writeln!(
                                csv,
                                "{},{:.9},{:.9},{:.6},{:.6}",
                                k + 1,
                                s.residual,
                                s.f_obj,
                                s.mip_time_s,
                                s.nlp_time_s
                            )
                            .unwrap();
                        }
                        write(path, &csv)?;
                    }
                    (rep.status, rep.y, rep.objective)
                }
                "mpcc" => {
                    let rep = mpcc::solve_instance(&inst, params, &cfg.mpcc_config())
                        .map_err(|e| CliError::BadInput(e.to_string()))?;
                    (rep.status, rep.y, rep.objective)
                }
                "oracle" => {
                    let rep = oracle::solve_instance(&inst, params, &cfg.oracle_config())
                        .map_err(|e| CliError::BadInput(e.to_string()))?;
                    (rep.status, rep.y, rep.objective)
                }
                other => return Err(CliError::BadInput(format!("unknown method {other}"))),
            };
            let solution =
                Solution::from_vector(&inst.id, status.as_str(), objective, &layout, &y);
            match &out {
                Some(path) => write(path, &solution.to_json())?,
                None => println!("{}", solution.to_json()),
            }
            if status == SolveStatus::Success {
                Ok(())
            } else {
                Err(CliError::SolverFailure(format!(
                    "solver finished with status {}",
                    status.as_str()
                )))
            }
        }
        Command::Verify {
            instance,
            solution,
            config,
        } => {
            let cfg = load_config(&config)?;
            let inst = load_instance(&instance)?;
            let sol =
                Solution::from_json(&read(&solution)?).map_err(|e| CliError::BadInput(e.to_string()))?;
            if sol.poses.len() != inst.n_items() {
                return Err(CliError::BadInput(format!(
                    "solution has {} poses, instance has {} items",
                    sol.poses.len(),
                    inst.n_items()
                )));
            }
            let report = verify(&inst, &sol.all_poses(), &cfg.phys_params(&inst));
            println!(
                "overlap_ok={} containment_ok={} rotation_ok={} equilibrium_ok={} overall={}",
                report.overlap_ok,
                report.containment_ok,
                report.rotation_ok,
                report.equilibrium_ok,
                report.overall()
            );
            for msg in &report.messages {
                eprintln!("{msg}");
            }
            if report.overall() {
                Ok(())
            } else {
                Err(CliError::SolverFailure("verification failed".into()))
            }
        }
        Command::Bench {
            methods,
            n_items,
            count,
            seed,
            out_dir,
            workers,
            zero_timing,
            config,
        } => {
            let cfg_file = load_config(&config)?;
            let methods: Vec<Method> = methods
                .split(',')
                .map(|s| {
                    Method::parse(s.trim())
                        .ok_or_else(|| CliError::BadInput(format!("unknown method {s}")))
                })
                .collect::<Result<_, _>>()?;
            let n_items: Vec<usize> = n_items
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&n| n >= 1)
                        .ok_or_else(|| CliError::BadInput(format!("bad item count {s}")))
                })
                .collect::<Result<_, _>>()?;
            if count == 0 {
                return Err(CliError::BadInput("--count must be at least 1".into()));
            }
            let bench_cfg = BenchConfig {
                methods,
                n_items,
                count: cfg_file.bench_count.unwrap_or(count),
                seed,
                workers: cfg_file.bench_workers.unwrap_or(workers),
                zero_timing: cfg_file.bench_zero_timing.unwrap_or(zero_timing),
                gen: cfg_file.gen_params(),
                admm: cfg_file.admm_config(),
                mpcc: cfg_file.mpcc_config(),
                oracle: cfg_file.oracle_config(),
            };
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::BadInput(format!("{}: {e}", out_dir.display())))?;
            let (summary, detail) = bench::run_benchmark(&bench_cfg);
            let summary_csv = bench::summary_csv(&summary);
            write(&out_dir.join("summary.csv"), &summary_csv)?;
            write(&out_dir.join("detail.csv"), &bench::detail_csv(&detail))?;
            print!("{summary_csv}");
            Ok(())
        }
        Command::Render {
            instance,
            solution,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let poses = match &solution {
                Some(path) => {
                    let sol = Solution::from_json(&read(path)?)
                        .map_err(|e| CliError::BadInput(e.to_string()))?;
                    if sol.poses.len() != inst.n_items() {
                        return Err(CliError::BadInput(
                            "solution pose count does not match instance".into(),
                        ));
                    }
                    Some(sol.all_poses())
                }
                None => None,
            };
            write(&out, &render_svg(&inst, poses.as_deref()))
        }
        Command::Sim { plan, out, config } => {
            let cfg = load_config(&config)?;
            let plan =
                Plan::from_json(&read(&plan)?).map_err(|e| CliError::BadInput(e.to_string()))?;
            let result = simulate_insertion(&plan, &cfg.sim_config());
            write(&out, &trace_csv(&result))?;
            if result.aborted {
                Err(CliError::SolverFailure("simulation diverged".into()))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::SolverFailure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::BadInput(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
