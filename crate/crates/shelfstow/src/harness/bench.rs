//! Table-style benchmark: shared seeded instances per method, success =
//! solver-reported success AND independent verification, CSV output.

use crate::admm::{self, AdmmConfig, SolveStatus};
use crate::formulation::{generate_instance, GenParams, Instance, PhysParams};
use crate::harness::oracle::{self, OracleConfig};
use crate::harness::verify::verify;
use crate::mpcc::{self, MpccConfig};
use std::fmt::Write as _;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Admm,
    Mpcc,
    Oracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Admm => "admm",
            Method::Mpcc => "mpcc",
            Method::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "admm" => Some(Method::Admm),
            "mpcc" => Some(Method::Mpcc),
            "oracle" => Some(Method::Oracle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    /// Total item counts (after insertion).
    pub n_items: Vec<usize>,
    /// Instances per (method, n_items) cell.
    pub count: usize,
    pub seed: u64,
    pub workers: usize,
    /// Report 0.0 in every time column; lets reruns be byte-identical.
    pub zero_timing: bool,
    pub gen: GenParams,
    pub admm: AdmmConfig,
    pub mpcc: MpccConfig,
    pub oracle: OracleConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: vec![Method::Admm, Method::Mpcc],
            n_items: vec![4, 6, 8],
            count: 50,
            seed: 1,
            workers: 1,
            zero_timing: false,
            gen: GenParams::default(),
            admm: AdmmConfig::default(),
            mpcc: MpccConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub method: Method,
    pub n_items: usize,
    pub success_rate: f64,
    pub avg_time_s: f64,
    pub max_time_s: f64,
    /// Over successes only.
    pub avg_objective: f64,
    /// Over successes only.
    pub avg_iters: f64,
}

#[derive(Debug, Clone)]
pub struct DetailRow {
    pub instance_id: String,
    pub method: Method,
    pub status: String,
    pub success: bool,
    pub time_s: f64,
    pub objective: f64,
    pub iters: usize,
    pub residual: f64,
}

/// Instance seed for cell `(n_items, index)` under a base seed: shared by
/// every method so all methods see the identical instance set.
pub fn instance_seed(base: u64, n_items: usize, index: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add((n_items as u64) << 32)
        .wrapping_add(index as u64)
}

fn run_one(method: Method, instance: &Instance, cfg: &BenchConfig) -> DetailRow {
    let params = PhysParams::for_instance(instance);
    let (status, y, objective, iters, time_s, residual) = match method {
        Method::Admm => match admm::solve_instance(instance, params, &cfg.admm) {
            Ok(rep) => (
                rep.status,
                rep.y,
                rep.objective,
                rep.iterations,
                rep.wall_time_s,
                rep.residuals.last().copied().unwrap_or(f64::NAN),
            ),
            Err(_) => (SolveStatus::SubsolverFailure, vec![], f64::NAN, 0, 0.0, f64::NAN),
        },
        Method::Mpcc => match mpcc::solve_instance(instance, params, &cfg.mpcc) {
            Ok(rep) => (
                rep.status,
                rep.y,
                rep.objective,
                rep.iterations,
                rep.wall_time_s,
                rep.max_violation,
            ),
            Err(_) => (SolveStatus::SubsolverFailure, vec![], f64::NAN, 0, 0.0, f64::NAN),
        },
        Method::Oracle => match oracle::solve_instance(instance, params, &cfg.oracle) {
            Ok(rep) => (
                rep.status,
                rep.y,
                rep.objective,
                rep.assignments,
                rep.wall_time_s,
                rep.max_violation,
            ),
            Err(_) => (SolveStatus::SubsolverFailure, vec![], f64::NAN, 0, 0.0, f64::NAN),
        },
    };

    // A solver-reported success that fails independent verification is
    // recorded as a failure.
    let (status_str, success) = if status == SolveStatus::Success {
        let layout = crate::formulation::layout::VariableLayout::new(instance.n_items());
        let poses: Vec<_> = (0..instance.n_items())
            .map(|i| layout.get_pose(&y, i))
            .collect();
        if verify(instance, &poses, &params).overall() {
            ("success".to_string(), true)
        } else {
            ("verifier_reject".to_string(), false)
        }
    } else {
        (status.as_str().to_string(), false)
    };

    DetailRow {
        instance_id: instance.id.clone(),
        method,
        status: status_str,
        success,
        time_s: if cfg.zero_timing { 0.0 } else { time_s },
        objective,
        iters,
        residual,
    }
}

pub fn run_benchmark(cfg: &BenchConfig) -> (Vec<BenchmarkRow>, Vec<DetailRow>) {
    // Enumerate all (method, n_items, index) cells up front so results can
    // be assembled in a deterministic order regardless of worker count.
    let mut jobs = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.n_items {
            for idx in 0..cfg.count {
                jobs.push((method, n, idx));
            }
        }
    }

    let results: Vec<DetailRow> = if cfg.workers <= 1 {
        jobs.iter()
            .map(|&(m, n, idx)| {
                let inst =
                    generate_instance(instance_seed(cfg.seed, n, idx), n - 1, &cfg.gen)
                        .expect("instance generation");
                run_one(m, &inst, cfg)
            })
            .collect()
    } else {
        let slots: Mutex<Vec<Option<DetailRow>>> = Mutex::new(vec![None; jobs.len()]);
        let next = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..cfg.workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if k >= jobs.len() {
                        break;
                    }
                    let (m, n, idx) = jobs[k];
                    let inst =
                        generate_instance(instance_seed(cfg.seed, n, idx), n - 1, &cfg.gen)
                            .expect("instance generation");
                    let row = run_one(m, &inst, cfg);
                    slots.lock().unwrap()[k] = Some(row);
                });
            }
        });
        slots.into_inner().unwrap().into_iter().flatten().collect()
    };

    let mut summary = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.n_items {
            let cell: Vec<&DetailRow> = results
                .iter()
                .filter(|r| r.method == method && r.instance_id.ends_with(&format!("-n{}", n - 1)))
                .collect();
            if cell.is_empty() {
                continue;
            }
            let total = cell.len() as f64;
            let succ: Vec<&&DetailRow> = cell.iter().filter(|r| r.success).collect();
            let n_succ = succ.len() as f64;
            summary.push(BenchmarkRow {
                method,
                n_items: n,
                success_rate: n_succ / total,
                avg_time_s: cell.iter().map(|r| r.time_s).sum::<f64>() / total,
                max_time_s: cell.iter().map(|r| r.time_s).fold(0.0, f64::max),
                avg_objective: if succ.is_empty() {
                    f64::NAN
                } else {
                    succ.iter().map(|r| r.objective).sum::<f64>() / n_succ
                },
                avg_iters: if succ.is_empty() {
                    f64::NAN
                } else {
                    succ.iter().map(|r| r.iters as f64).sum::<f64>() / n_succ
                },
            });
        }
    }
    (summary, results)
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

pub fn summary_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("method,n_items,success_rate,avg_time_s,max_time_s,avg_objective,avg_iters\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.n_items,
            fmt(r.success_rate),
            fmt(r.avg_time_s),
            fmt(r.max_time_s),
            fmt(r.avg_objective),
            fmt(r.avg_iters)
        )
        .unwrap();
    }
    out
}

pub fn detail_csv(rows: &[DetailRow]) -> String {
    let mut out = String::from("instance_id,method,status,time_s,objective,iters,residual\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.instance_id,
            r.method.as_str(),
            r.status,
            fmt(r.time_s),
            fmt(r.objective),
            r.iters,
            fmt(r.residual)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_shared_between_methods_and_distinct_between_cells() {
        assert_eq!(instance_seed(7, 4, 3), instance_seed(7, 4, 3));
        assert_ne!(instance_seed(7, 4, 3), instance_seed(7, 4, 4));
        assert_ne!(instance_seed(7, 4, 3), instance_seed(7, 6, 3));
        assert_ne!(instance_seed(7, 4, 3), instance_seed(8, 4, 3));
    }

    #[test]
    fn csv_headers_match_schema() {
        assert!(summary_csv(&[]).starts_with(
            "method,n_items,success_rate,avg_time_s,max_time_s,avg_objective,avg_iters"
        ));
        assert!(detail_csv(&[])
            .starts_with("instance_id,method,status,time_s,objective,iters,residual"));
    }

    #[test]
    fn tiny_benchmark_is_deterministic_with_zero_timing() {
        let cfg = BenchConfig {
            methods: vec![Method::Admm],
            n_items: vec![2],
            count: 1,
            seed: 5,
            zero_timing: true,
            ..BenchConfig::default()
        };
        let (s1, d1) = run_benchmark(&cfg);
        let (s2, d2) = run_benchmark(&cfg);
        assert_eq!(summary_csv(&s1), summary_csv(&s2));
        assert_eq!(detail_csv(&d1), detail_csv(&d2));
    }
}
