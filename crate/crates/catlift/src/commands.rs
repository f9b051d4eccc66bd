//! The subcommands. Each maps a scenario to one [`Table`] and never
//! touches the file system.

use std::f64::consts::SQRT_2;

use anyhow::{Context, Result};
use catlift_core::decoherence::{self, DephasingRate};
use catlift_core::gie::{self, GravCouplings};
use catlift_core::interferometer::{self as ifm, LengthUnit, TrapSetup};
use catlift_core::phase_space::{cat_wigner, PhaseVector};
use catlift_core::robustness::{self, HumptyRun, SwitchingErrorModel};
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::output::{Cell, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Table,
    Trajectory,
    Wigner,
    Force,
    Gie,
    Robustness,
}

pub fn run(cmd: Command, cfg: &ScenarioConfig) -> Result<Table> {
    match cmd {
        Command::Table => table(cfg),
        Command::Trajectory => trajectory(cfg),
        Command::Wigner => wigner(cfg),
        Command::Force => force(cfg),
        Command::Gie => gie_sweep(cfg),
        Command::Robustness => robustness_sweep(cfg),
    }
}

/// `n` evenly spaced points from `r[0]` to `r[1]`.
pub fn linspace(r: [f64; 2], n: usize) -> Vec<f64> {
    let step = (r[1] - r[0]) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { r[1] } else { r[0] + i as f64 * step }).collect()
}

/// The same trap with δx restated in ground-state spreads, the unit the
/// SI bounds are written in.
pub fn in_x0_units(trap: &TrapSetup) -> TrapSetup {
    let delta_x = match trap.unit {
        LengthUnit::GroundStateSpread => trap.delta_x,
        LengthUnit::PhaseSpace => SQRT_2 * trap.delta_x,
    };
    TrapSetup { delta_x, unit: LengthUnit::GroundStateSpread, ..*trap }
}

/// T_o^G and λ^PT there for set-up `i`.
pub fn gie_optimum(cfg: &ScenarioConfig, i: usize) -> Result<(f64, f64)> {
    let c = cfg.couplings(i)?;
    let dx = cfg.trap(i)?.branch_offset();
    let r = cfg.run.optimum_range;
    gie::maximize_on_grid((r[0], r[1]), cfg.run.per_pi, |t| Ok(-gie::gie_lambda(&c, dx, t)?))
        .map(|(t, v)| (t, -v))
        .with_context(|| format!("GIE optimum of {}", cfg.setup_name(i)))
}

/// The configured t_−, or the GIE optimum when none is set.
fn protocol_t_minus(cfg: &ScenarioConfig, i: usize) -> Result<f64> {
    match cfg.protocol.t_minus {
        Some(t) => Ok(t),
        None => Ok(gie_optimum(cfg, i)?.0),
    }
}

fn setups(cfg: &ScenarioConfig) -> std::ops::Range<usize> {
    0..cfg.setups.len()
}

/// Collects per-set-up row blocks in set-up order.
fn gather(cfg: &ScenarioConfig, columns: &[&str], f: impl Fn(usize) -> Result<Vec<Vec<Cell>>> + Sync + Send) -> Result<Table> {
    let blocks: Vec<Vec<Vec<Cell>>> = setups(cfg).into_par_iter().map(f).collect::<Result<_>>()?;
    let mut t = Table::new(columns.iter().copied());
    blocks.into_iter().flatten().for_each(|r| t.push(r));
    Ok(t)
}

pub const TABLE_COLUMNS: &[&str] = &[
    "setup",
    "mass_kg",
    "omega_rad_s",
    "delta_x_x0",
    "radius_m",
    "x0_m",
    "initial_superposition_m",
    "g_g",
    "f_g",
    "t_o_g",
    "t_o_g_s",
    "lambda_pt_at_t_o",
    "t_tot",
    "t_tot_s",
    "experiment_frequency_hz",
    "max_superposition_x0",
    "max_superposition_m",
    "decoherence_rate_bound_hz",
    "pressure_bound_pa",
    "pressure_bound_consistent_pa",
    "sigma_f_bound_n",
    "delta_t_bound",
    "delta_t_bound_s",
    "sigma_eps_bound",
    "sigma_eps_bound_s",
];

/// Every derived row of the comparison table, one output row per set-up.
pub fn table(cfg: &ScenarioConfig) -> Result<Table> {
    gather(cfg, TABLE_COLUMNS, |i| {
        let trap = in_x0_units(&cfg.trap(i)?);
        let c = cfg.couplings(i)?;
        let noise = cfg.noise_model(i)?;
        let gas = noise.gas.expect("noise_model always sets a gas");
        let (t_o, lambda) = gie_optimum(cfg, i)?;
        let w = trap.omega;
        let t_tot = ifm::total_protocol_time(t_o);
        let t_tot_s = t_tot / w;
        let dt = robustness::sudden_bound(trap.delta_x, t_o, w)?;
        let jitter = robustness::sigma_eps_bound(trap.delta_x, t_o, w)?;
        let row: Vec<Cell> = vec![
            cfg.setup_name(i).into(),
            trap.mass.into(),
            w.into(),
            trap.delta_x.into(),
            gas.radius.into(),
            trap.x0().into(),
            trap.initial_superposition_si().into(),
            c.g.into(),
            c.f.into(),
            t_o.into(),
            (t_o / w).into(),
            lambda.into(),
            t_tot.into(),
            t_tot_s.into(),
            (1.0 / t_tot_s).into(),
            ifm::max_superposition(trap.delta_x, t_o).into(),
            ifm::max_superposition_si(&trap, t_o).into(),
            (1.0 / t_tot_s).into(),
            decoherence::pressure_bound(&trap, &gas, t_tot)?.into(),
            decoherence::pressure_bound_consistent(&gas, t_tot_s)?.into(),
            decoherence::quasi_static_bound(&trap, t_o).into(),
            (dt * w).into(),
            dt.into(),
            jitter.relative.into(),
            jitter.seconds.into(),
        ];
        Ok(vec![row])
    })
}

pub const TRAJECTORY_COLUMNS: &[&str] = &[
    "setup",
    "t_minus",
    "t",
    "t_s",
    "x_plus",
    "p_plus",
    "x_minus",
    "p_minus",
    "x_plus_m",
    "x_minus_m",
    "sigma_xx",
    "sigma_xp",
    "sigma_pp",
];

/// Branch moments through the expansion protocol, from the created cat to
/// recombination.
pub fn trajectory(cfg: &ScenarioConfig) -> Result<Table> {
    gather(cfg, TRAJECTORY_COLUMNS, |i| {
        let trap = cfg.trap(i)?;
        let t_minus = protocol_t_minus(cfg, i)?;
        let cat = ifm::create_cat(&trap, cfg.protocol.t0)?;
        let times = linspace([0.0, ifm::t_final(t_minus)], cfg.run.t_points);
        let unit = SQRT_2 * trap.x0();
        let snaps = ifm::protocol_trajectory(&cat, t_minus, &times)?;
        Ok(snaps
            .into_iter()
            .map(|(t, s)| {
                let [a, b] = &s.branches;
                let sig = a.sigma.matrix();
                vec![
                    cfg.setup_name(i).into(),
                    t_minus.into(),
                    t.into(),
                    (t / trap.omega).into(),
                    a.r[0].into(),
                    a.r[1].into(),
                    b.r[0].into(),
                    b.r[1].into(),
                    (a.r[0] * unit).into(),
                    (b.r[0] * unit).into(),
                    sig[(0, 0)].into(),
                    sig[(0, 1)].into(),
                    sig[(1, 1)].into(),
                ]
            })
            .collect())
    })
}

pub const WIGNER_COLUMNS: &[&str] = &["setup", "t_minus", "t", "x", "p", "w"];

/// Equal-weight branch mixture of Wigner functions on a grid, at each
/// requested protocol time.
pub fn wigner(cfg: &ScenarioConfig) -> Result<Table> {
    let w = &cfg.run.wigner;
    gather(cfg, WIGNER_COLUMNS, |i| {
        let trap = cfg.trap(i)?;
        let t_minus = protocol_t_minus(cfg, i)?;
        let cat = ifm::create_cat(&trap, cfg.protocol.t0)?;
        let snaps = ifm::protocol_trajectory(&cat, t_minus, &w.times)?;
        let xs = linspace(w.x, w.points);
        let ps = linspace(w.p, w.points);
        let mut rows = Vec::with_capacity(snaps.len() * xs.len() * ps.len());
        for (t, s) in &snaps {
            let [a, b] = &s.branches;
            for &x in &xs {
                let values: Vec<f64> = ps
                    .par_iter()
                    .map(|&p| cat_wigner([(&a.r, &a.sigma), (&b.r, &b.sigma)], &PhaseVector::xp(x, p)))
                    .collect::<Result<_, _>>()?;
                for (&p, v) in ps.iter().zip(values) {
                    rows.push(vec![cfg.setup_name(i).into(), t_minus.into(), (*t).into(), x.into(), p.into(), v.into()]);
                }
            }
        }
        Ok(rows)
    })
}

pub const FORCE_COLUMNS: &[&str] = &["setup", "force_n", "g", "t_minus", "t_minus_s", "phi_f", "t_o_f", "t_o_f_s"];

/// Force phase over the t_− sweep, with the late-time optimum T_o^f.
pub fn force(cfg: &ScenarioConfig) -> Result<Table> {
    let f = cfg.protocol.force;
    gather(cfg, FORCE_COLUMNS, |i| {
        let trap = in_x0_units(&cfg.trap(i)?);
        let t_o = ifm::optimal_time_force(f, &trap)
            .with_context(|| format!("protocol.force = {f} N gives no optimum for {}", cfg.setup_name(i)))?;
        let g = trap.force_coupling(f);
        Ok(linspace(cfg.run.t_range, cfg.run.t_points)
            .into_iter()
            .map(|t| {
                vec![
                    cfg.setup_name(i).into(),
                    f.into(),
                    g.into(),
                    t.into(),
                    (t / trap.omega).into(),
                    ifm::force_phase(f, &trap, t).into(),
                    t_o.into(),
                    (t_o / trap.omega).into(),
                ]
            })
            .collect())
    })
}

const PAULI: [char; 4] = ['i', 'x', 'y', 'z'];

/// Column names of the `gie` table.
pub fn gie_columns() -> Vec<String> {
    let mut c: Vec<String> = ["setup", "gamma_q_over_omega", "t_minus", "t_minus_s", "lambda_pt", "witness_expectation"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for a in PAULI {
        for b in PAULI {
            c.push(format!("w_{a}{b}"));
        }
    }
    c
}

/// Dephasing ratios Γ_q/ω of the sweep for set-up `i`.
fn gamma_ratios(cfg: &ScenarioConfig, i: usize) -> Vec<f64> {
    let mut r = cfg.run.gamma_q_ratios.clone();
    let own = cfg.noise.gamma_q / cfg.setups[i].omega;
    if own > 0.0 && !r.contains(&own) {
        r.push(own);
    }
    r
}

/// λ^PT and the Pauli coefficients of the optimal witness over the t_−
/// sweep, once per dephasing ratio.
pub fn gie_sweep(cfg: &ScenarioConfig) -> Result<Table> {
    let columns = gie_columns();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rate: DephasingRate = cfg.noise.dephasing.into();
    gather(cfg, &cols, |i| {
        let c: GravCouplings = cfg.couplings(i)?;
        let trap = cfg.trap(i)?;
        let dx = trap.branch_offset();
        let ts = linspace(cfg.run.t_range, cfg.run.t_points);
        let mut rows = Vec::new();
        for ratio in gamma_ratios(cfg, i) {
            let block: Vec<Vec<Cell>> = ts
                .par_iter()
                .map(|&t| -> Result<Vec<Cell>> {
                    let r = decoherence::gie_evaluate_dephased(&c, dx, t, ratio, rate)?;
                    let mut row: Vec<Cell> = vec![
                        cfg.setup_name(i).into(),
                        ratio.into(),
                        t.into(),
                        (t / trap.omega).into(),
                        r.lambda_pt.into(),
                        gie::witness_expectation(&r.witness, &r.rho).into(),
                    ];
                    let p = gie::pauli_decomposition(&r.witness);
                    row.extend(p.iter().flatten().map(|&v| Cell::from(v)));
                    Ok(row)
                })
                .collect::<Result<_>>()?;
            rows.extend(block);
        }
        Ok(rows)
    })
}

pub const ROBUSTNESS_COLUMNS: &[&str] = &[
    "setup",
    "t_minus",
    "sigma_eps",
    "sigma_eps_s",
    "bound_multiple",
    "visibility_second_order",
    "visibility_printed",
    "visibility_leading",
    "visibility_mc",
    "mc_std_error",
    "mc_samples",
    "sigma_eps_bound",
    "sigma_eps_bound_s",
    "delta_t_bound_s",
];

/// Seed of robustness row `row`, spread so neighbouring rows share nothing.
pub fn row_seed(seed: u64, row: u64) -> u64 {
    seed ^ row.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Humpty-Dumpty visibility curves and the operational-precision bounds.
pub fn robustness_sweep(cfg: &ScenarioConfig) -> Result<Table> {
    let run = &cfg.run;
    let ts = linspace(run.t_range, run.t_points);
    gather(cfg, ROBUSTNESS_COLUMNS, |i| {
        let trap = cfg.trap(i)?;
        let x0 = in_x0_units(&trap);
        let w = trap.omega;
        let mut cells = Vec::new();
        for &t in &ts {
            let bound = robustness::sigma_eps_bound(x0.delta_x, t, w)?;
            let sigmas: Vec<(f64, f64)> = match cfg.noise.sigma_eps {
                Some(s) => vec![(s, s / bound.relative)],
                None => run.bound_multiples.iter().map(|&k| (k * bound.relative, k)).collect(),
            };
            for (s, k) in sigmas {
                cells.push((t, s, k, bound));
            }
        }
        let first_row = (i * cells.len()) as u64;
        cells
            .par_iter()
            .enumerate()
            .map(|(n, &(t, s, k, bound))| -> Result<Vec<Cell>> {
                let a = robustness::humpty_visibility_analytic(trap.delta_x, trap.unit, t, s)?;
                let errors = SwitchingErrorModel::new(s, row_seed(run.seed, first_row + n as u64))?;
                let mc = HumptyRun::new(trap.delta_x, trap.unit, t, errors)?.estimate(run.samples)?;
                Ok(vec![
                    cfg.setup_name(i).into(),
                    t.into(),
                    s.into(),
                    (s / w).into(),
                    k.into(),
                    a.second_order.into(),
                    a.printed.into(),
                    a.leading.into(),
                    mc.visibility.into(),
                    mc.std_error.into(),
                    (mc.samples as f64).into(),
                    bound.relative.into(),
                    bound.seconds.into(),
                    robustness::sudden_bound(x0.delta_x, t, w)?.into(),
                ])
            })
            .collect()
    })
}
