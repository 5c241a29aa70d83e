//! Admittance-control insertion simulator: a planar point mass tracking
//! phase waypoints under `ẍ = M_d⁻¹(−D_d ẋ − K_d (x − x₀) + K_f (f_meas −
//! F_ref))`, semi-implicit Euler at 100 Hz, with a linear-spring neighbor
//! supplying the measured contact force.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    /// Desired (rendered) mass, damping, stiffness — diagonal, per axis.
    pub m_d: [f64; 2],
    pub d_d: [f64; 2],
    pub k_d: [f64; 2],
    /// Force sensitivity.
    pub k_f: [f64; 2],
    pub dt: f64,
    /// Stiffness of the simulated neighbor contact.
    pub env_stiffness: f64,
    /// The neighbor acts as a one-sided spring on x beyond this coordinate.
    pub neighbor_x: f64,
    /// Divergence bound: abort when |x| or |y| exceeds it.
    pub extent: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            m_d: [2.0, 2.0],
            d_d: [40.0, 40.0],
            k_d: [200.0, 200.0],
            k_f: [1.0, 1.0],
            dt: 0.01,
            env_stiffness: 2000.0,
            neighbor_x: 0.4,
            extent: 10.0,
        }
    }
}

/// One phase of the insertion plan: a reference position, a reference
/// force, and how long to hold them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Phase {
    pub name: PhaseName,
    pub x_ref: [f64; 2],
    pub f_ref: [f64; 2],
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    Approach,
    Push,
    ForcePush,
    Insert,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plan {
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub start: [f64; 2],
}

impl Plan {
    /// The paper's phase sequence toward a gap at `gap_x`: approach above,
    /// push against the neighbor, lean on it with a force reference, then
    /// drop into the slot.
    pub fn standard(gap_x: f64, neighbor_x: f64, shelf_h: f64) -> Plan {
        Plan {
            start: [gap_x, shelf_h * 1.2],
            phases: vec![
                Phase {
                    name: PhaseName::Approach,
                    x_ref: [gap_x, shelf_h * 0.9],
                    f_ref: [0.0, 0.0],
                    duration: 1.5,
                },
                Phase {
                    name: PhaseName::Push,
                    x_ref: [neighbor_x, shelf_h * 0.9],
                    f_ref: [0.0, 0.0],
                    duration: 1.5,
                },
                Phase {
                    name: PhaseName::ForcePush,
                    x_ref: [neighbor_x, shelf_h * 0.9],
                    f_ref: [-5.0, 0.0],
                    duration: 2.0,
                },
                Phase {
                    name: PhaseName::Insert,
                    x_ref: [gap_x, shelf_h * 0.4],
                    f_ref: [0.0, 0.0],
                    duration: 2.0,
                },
            ],
        }
    }

    pub fn from_json(s: &str) -> Result<Plan, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimStep {
    pub t: f64,
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub f_meas: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub steps: Vec<SimStep>,
    pub aborted: bool,
}

/// Contact force from the one-sided neighbor spring (acts along −x once
/// the mass crosses `neighbor_x`).
pub fn contact_force(x: [f64; 2], cfg: &SimConfig) -> [f64; 2] {
    if x[0] > cfg.neighbor_x {
        [-cfg.env_stiffness * (x[0] - cfg.neighbor_x), 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// One semi-implicit Euler step of the admittance law.
pub fn step(
    x: &mut [f64; 2],
    v: &mut [f64; 2],
    x_ref: [f64; 2],
    f_ref: [f64; 2],
    f_meas: [f64; 2],
    cfg: &SimConfig,
) {
    for a in 0..2 {
        let acc = (-cfg.d_d[a] * v[a] - cfg.k_d[a] * (x[a] - x_ref[a])
            + cfg.k_f[a] * (f_meas[a] - f_ref[a]))
            / cfg.m_d[a];
        v[a] += cfg.dt * acc;
        x[a] += cfg.dt * v[a];
    }
}

pub fn simulate_insertion(plan: &Plan, cfg: &SimConfig) -> SimResult {
    let mut x = plan.start;
    let mut v = [0.0, 0.0];
    let mut t = 0.0;
    let mut steps = Vec::new();
    let mut aborted = false;

    'outer: for phase in &plan.phases {
        let n_steps = (phase.duration / cfg.dt).round() as usize;
        for _ in 0..n_steps {
            let f_meas = contact_force(x, cfg);
            steps.push(SimStep { t, x, v, f_meas });
            step(&mut x, &mut v, phase.x_ref, phase.f_ref, f_meas, cfg);
            t += cfg.dt;
            if x[0].abs() > cfg.extent || x[1].abs() > cfg.extent {
                aborted = true;
                break 'outer;
            }
        }
    }
    let f_meas = contact_force(x, cfg);
    steps.push(SimStep { t, x, v, f_meas });
    SimResult { steps, aborted }
}

pub fn trace_csv(result: &SimResult) -> String {
    let mut out = String::from("t,x,y,vx,vy,fx,fy\n");
    for s in &result.steps {
        writeln!(
            out,
            "{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.t, s.x[0], s.x[1], s.v[0], s.v[1], s.f_meas[0], s.f_meas[1]
        )
        .unwrap();
    }
    out
}

/// Steady-state x-contact force during a force-push phase, solved by hand
/// from `K_d (x − x₀) = K_f (f_meas − F_ref)` with `f_meas = −k_e (x −
/// x_w)`.
pub fn force_push_steady_state(x_ref: f64, f_ref: f64, cfg: &SimConfig) -> f64 {
    let (kd, kf, ke, xw) = (cfg.k_d[0], cfg.k_f[0], cfg.env_stiffness, cfg.neighbor_x);
    let x_ss = (kd * x_ref + kf * (ke * xw - f_ref)) / (kd + kf * ke);
    -ke * (x_ss - xw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_law_equilibrium_is_exact() {
        let cfg = SimConfig::default();
        let x_ref = [0.2, 0.2];
        let mut x = x_ref;
        let mut v = [0.0, 0.0];
        for _ in 0..10_000 {
            // f_meas ≡ F_ref = 0, x = x₀, ẋ = 0.
            step(&mut x, &mut v, x_ref, [0.0, 0.0], [0.0, 0.0], &cfg);
        }
        assert_eq!(x, x_ref);
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn free_response_lyapunov_nonincreasing() {
        let cfg = SimConfig::default();
        let x_ref = [0.0, 0.0];
        let mut x = [0.1, -0.05];
        let mut v = [0.0, 0.0];
        let energy = |x: &[f64; 2], v: &[f64; 2]| -> f64 {
            (0..2)
                .map(|a| {
                    0.5 * cfg.m_d[a] * v[a] * v[a]
                        + 0.5 * cfg.k_d[a] * (x[a] - x_ref[a]) * (x[a] - x_ref[a])
                })
                .sum()
        };
        let mut prev = energy(&x, &v);
        for _ in 0..2_000 {
            step(&mut x, &mut v, x_ref, [0.0, 0.0], [0.0, 0.0], &cfg);
            let e = energy(&x, &v);
            assert!(e <= prev + 1e-12, "energy rose {prev} -> {e}");
            prev = e;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn force_push_reaches_hand_derived_steady_state() {
        let cfg = SimConfig::default();
        let x_ref = cfg.neighbor_x; // push reference at the contact surface
        let f_ref = -5.0;
        let expected = force_push_steady_state(x_ref, f_ref, &cfg);
        let mut x = [cfg.neighbor_x - 0.01, 0.0];
        let mut v = [0.0, 0.0];
        for _ in 0..5_000 {
            let f = contact_force(x, &cfg);
            step(&mut x, &mut v, [x_ref, 0.0], [f_ref, 0.0], f, &cfg);
        }
        let f_final = contact_force(x, &cfg)[0];
        let rel = (f_final - expected).abs() / expected.abs();
        assert!(rel < 0.05, "f = {f_final}, expected {expected}");
    }

    #[test]
    fn standard_plan_runs_without_divergence() {
        let cfg = SimConfig::default();
        let plan = Plan::standard(0.35, cfg.neighbor_x, 0.32);
        let result = simulate_insertion(&plan, &cfg);
        assert!(!result.aborted);
        let csv = trace_csv(&result);
        assert!(csv.starts_with("t,x,y,vx,vy,fx,fy\n"));
        assert!(csv.lines().count() > 500);
    }

    #[test]
    fn runaway_reference_triggers_abort() {
        let mut cfg = SimConfig::default();
        cfg.extent = 0.5;
        let plan = Plan {
            start: [0.0, 0.0],
            phases: vec![Phase {
                name: PhaseName::Approach,
                x_ref: [50.0, 0.0],
                f_ref: [0.0, 0.0],
                duration: 30.0,
            }],
        };
        let result = simulate_insertion(&plan, &cfg);
        assert!(result.aborted);
    }
}
