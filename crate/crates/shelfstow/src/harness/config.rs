//! Flat key-value configuration file (TOML). Every key is optional and
//! overrides the corresponding built-in default; unknown keys are rejected.

use crate::admm::AdmmConfig;
use crate::formulation::{GenParams, Instance, PhysParams};
use crate::harness::oracle::OracleConfig;
use crate::harness::sim::SimConfig;
use crate::mip::MipConfig;
use crate::mpcc::MpccConfig;
use crate::nlp::NlpConfig;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    // Generator.
    pub shelf_width: Option<f64>,
    pub shelf_height: Option<f64>,
    pub item_width_min: Option<f64>,
    pub item_width_max: Option<f64>,
    pub item_height_min: Option<f64>,
    pub item_height_max: Option<f64>,
    pub min_gap: Option<f64>,
    pub slack_min: Option<f64>,
    pub slack_max: Option<f64>,

    // Physical / formulation parameters.
    pub delta_frac: Option<f64>,
    pub clearance: Option<f64>,
    pub mu: Option<f64>,
    pub density: Option<f64>,
    pub gravity: Option<f64>,
    pub big_m_force_frac: Option<f64>,
    pub big_m_sine: Option<f64>,
    pub w_x: Option<f64>,
    pub w_theta: Option<f64>,

    // ADMM.
    pub admm_gamma: Option<f64>,
    pub admm_g_cont: Option<f64>,
    pub admm_g_bin: Option<f64>,
    pub admm_delta: Option<f64>,
    pub admm_max_iters: Option<usize>,

    // MIP / QP.
    pub mip_gap: Option<f64>,
    pub mip_node_cap: Option<usize>,
    pub qp_eps_abs: Option<f64>,
    pub qp_eps_rel: Option<f64>,
    pub qp_max_iter: Option<usize>,

    // NLP.
    pub nlp_feas_tol: Option<f64>,
    pub nlp_opt_tol: Option<f64>,
    pub nlp_max_outer: Option<usize>,
    pub nlp_max_inner: Option<usize>,
    pub nlp_penalty_init: Option<f64>,
    pub nlp_penalty_growth: Option<f64>,

    // MPCC.
    pub mpcc_eps_start: Option<f64>,
    pub mpcc_eps_end: Option<f64>,
    pub mpcc_eps_factor: Option<f64>,
    pub mpcc_bin_tol: Option<f64>,

    // Oracle.
    pub oracle_max_binaries: Option<usize>,

    // Benchmark.
    pub bench_count: Option<usize>,
    pub bench_workers: Option<usize>,
    pub bench_zero_timing: Option<bool>,

    // Simulator.
    pub sim_m_d: Option<f64>,
    pub sim_d_d: Option<f64>,
    pub sim_k_d: Option<f64>,
    pub sim_k_f: Option<f64>,
    pub sim_dt: Option<f64>,
    pub sim_env_stiffness: Option<f64>,
}

fn set<T: Copy>(target: &mut T, source: Option<T>) {
    if let Some(v) = source {
        *target = v;
    }
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Config, ConfigError> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn gen_params(&self) -> GenParams {
        let mut g = GenParams::default();
        if self.shelf_width.is_some() {
            g.shelf_width = self.shelf_width;
        }
        set(&mut g.shelf_height, self.shelf_height);
        set(&mut g.width_range.0, self.item_width_min);
        set(&mut g.width_range.1, self.item_width_max);
        set(&mut g.height_range.0, self.item_height_min);
        set(&mut g.height_range.1, self.item_height_max);
        set(&mut g.min_gap, self.min_gap);
        set(&mut g.slack_range.0, self.slack_min);
        set(&mut g.slack_range.1, self.slack_max);
        g
    }

    pub fn phys_params(&self, instance: &Instance) -> PhysParams {
        let mut p = PhysParams::for_instance(instance);
        if let Some(frac) = self.delta_frac {
            let min_w = instance
                .all_items()
                .map(|it| it.width)
                .fold(f64::INFINITY, f64::min);
            p.delta = frac * min_w;
            p.ground_band = p.clearance + 0.5 * p.delta;
        }
        set(&mut p.clearance, self.clearance);
        set(&mut p.mu, self.mu);
        set(&mut p.density, self.density);
        set(&mut p.gravity, self.gravity);
        if let Some(frac) = self.big_m_force_frac {
            let total: f64 = instance.all_items().map(|it| p.density * it.area() * p.gravity).sum();
            p.big_m_force = frac * total;
        }
        set(&mut p.big_m_sine, self.big_m_sine);
        set(&mut p.w_x, self.w_x);
        set(&mut p.w_theta, self.w_theta);
        p
    }

    fn qp_into(&self, qp: &mut crate::convex_qp::QpConfig) {
        set(&mut qp.eps_abs, self.qp_eps_abs);
        set(&mut qp.eps_rel, self.qp_eps_rel);
        set(&mut qp.max_iter, self.qp_max_iter);
    }

    pub fn mip_config(&self) -> MipConfig {
        let mut m = MipConfig::default();
        set(&mut m.gap, self.mip_gap);
        set(&mut m.node_cap, self.mip_node_cap);
        self.qp_into(&mut m.qp);
        m
    }

    pub fn nlp_config(&self) -> NlpConfig {
        let mut n = NlpConfig::default();
        set(&mut n.feas_tol, self.nlp_feas_tol);
        set(&mut n.opt_tol, self.nlp_opt_tol);
        set(&mut n.max_outer, self.nlp_max_outer);
        set(&mut n.max_inner, self.nlp_max_inner);
        set(&mut n.penalty_init, self.nlp_penalty_init);
        set(&mut n.penalty_growth, self.nlp_penalty_growth);
        n
    }

    pub fn admm_config(&self) -> AdmmConfig {
        let mut a = AdmmConfig {
            mip: self.mip_config(),
            nlp: self.nlp_config(),
            ..AdmmConfig::default()
        };
        set(&mut a.gamma, self.admm_gamma);
        set(&mut a.g_cont, self.admm_g_cont);
        set(&mut a.g_bin, self.admm_g_bin);
        if self.admm_delta.is_some() {
            a.delta = self.admm_delta;
        }
        set(&mut a.max_iters, self.admm_max_iters);
        a
    }

    pub fn mpcc_config(&self) -> MpccConfig {
        let mut m = MpccConfig {
            nlp: self.nlp_config(),
            ..MpccConfig::default()
        };
        set(&mut m.eps_start, self.mpcc_eps_start);
        set(&mut m.eps_end, self.mpcc_eps_end);
        set(&mut m.eps_factor, self.mpcc_eps_factor);
        set(&mut m.bin_tol, self.mpcc_bin_tol);
        m
    }

    pub fn oracle_config(&self) -> OracleConfig {
        let mut o = OracleConfig {
            nlp: self.nlp_config(),
            ..OracleConfig::default()
        };
        set(&mut o.max_binaries, self.oracle_max_binaries);
        o
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut s = SimConfig::default();
        if let Some(v) = self.sim_m_d {
            s.m_d = [v, v];
        }
        if let Some(v) = self.sim_d_d {
            s.d_d = [v, v];
        }
        if let Some(v) = self.sim_k_d {
            s.k_d = [v, v];
        }
        if let Some(v) = self.sim_k_f {
            s.k_f = [v, v];
        }
        set(&mut s.dt, self.sim_dt);
        set(&mut s.env_stiffness, self.sim_env_stiffness);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_yields_defaults() {
        let c: Config = toml::from_str("").unwrap();
        assert_eq!(c.admm_config().gamma, 1.1);
        assert_eq!(c.mip_config().gap, 1e-4);
        assert_eq!(c.gen_params().shelf_height, 0.32);
    }

    #[test]
    fn keys_override_defaults() {
        let c: Config = toml::from_str("admm_gamma = 1.5\nmu = 0.7\nbench_count = 3\n").unwrap();
        assert_eq!(c.admm_config().gamma, 1.5);
        assert!(c.bench_count == Some(3));
        let inst = crate::formulation::generate_instance(
            1,
            1,
            &crate::formulation::GenParams::default(),
        )
        .unwrap();
        assert_eq!(c.phys_params(&inst).mu, 0.7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("not_a_key = 1\n").is_err());
    }
}
