//! The data-producing subcommands. Each returns a [`Table`] so the output
//! can be inspected in tests before it is written.

use rayon::prelude::*;

use cdsense::bounds::{
    bound_reports, classical_benchmark, classical_ratio_variable, optimal_ratio_classical, optimal_ratio_uql,
    ratio_from_x, uql_optimal, uql_ratio_variable, var_tmsv_direct,
};
use cdsense::estimation::saturation_report;
use cdsense::photon::{
    coherent_cutoff, coherent_pnrd, cr_bound_gamma, fock_pnrd, tmsv_cutoff, tmsv_direct_pnrd, DEFAULT_TAIL_TOL,
};
use cdsense::{Error, PhotonBudget, ProbeSpec, Scenario, RNG_ALGORITHM};

use crate::args::{BoundsArgs, ProbeKind, RatioArgs, RatioMode, ScenarioArgs, SimulateArgs, SweepArgs};
use crate::config::Config;
use crate::csv::{fmt_g, Table};
use crate::error::{CliError, CliResult};

pub const DEFAULT_T_L: f64 = 0.5;
pub const DEFAULT_T_R: f64 = 0.45;
pub const DEFAULT_ETA: f64 = 0.8;
pub const DEFAULT_N_TOT: f64 = 2.0;

pub const NORMALIZED_DIFFERENCE: &str = "nd_a_b = (A - B) / B with B the reference bound";

/// Scenario and budget after applying flags, config and defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub scenario: Scenario,
    pub n_tot: f64,
}

pub fn resolve_scenario(flags: &ScenarioArgs, cfg: &Config) -> CliResult<Resolved> {
    let eta = cfg.resolve(flags.eta, "eta", DEFAULT_ETA)?;
    let t_l = cfg.resolve(flags.tl, "tl", DEFAULT_T_L)?;
    let t_r = cfg.resolve(flags.tr, "tr", DEFAULT_T_R)?;
    let eta_l = cfg.resolve(flags.eta_l, "eta_l", eta)?;
    let eta_r = cfg.resolve(flags.eta_r, "eta_r", eta)?;
    let n_tot = cfg.resolve(flags.n_tot, "n_tot", DEFAULT_N_TOT)?;
    if !n_tot.is_finite() || n_tot <= 0.0 {
        return Err(Error::InvalidParameter(format!("n_tot must be positive, got {n_tot}")).into());
    }
    Ok(Resolved {
        scenario: Scenario::new(t_l, t_r, eta_l, eta_r)?,
        n_tot,
    })
}

fn load_config(path: Option<&std::path::Path>) -> CliResult<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn check_ratio(ratio: Option<f64>) -> CliResult<()> {
    match ratio {
        Some(r) if !(0.0..=1.0).contains(&r) => {
            Err(Error::InvalidParameter(format!("ratio must lie in [0, 1], got {r}")).into())
        }
        _ => Ok(()),
    }
}

fn header(table: &mut Table, command: &str, r: &Resolved) {
    table.comment(format!("cdsense {} {command}", env!("CARGO_PKG_VERSION")));
    let s = &r.scenario;
    let mut fields = vec![("eta_l", s.eta_l()), ("eta_r", s.eta_r()), ("n_tot", r.n_tot)];
    // a sweep overrides both transmittances
    if command != "sweep" {
        fields.splice(0..0, [("tl", s.t_l()), ("tr", s.t_r())]);
    }
    for (k, v) in fields {
        table.comment(format!("{k} = {}", fmt_g(v)));
    }
}

fn opt_g(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_else(|| "optimal".into())
}

/// `a / b` with `0/0 = inf/inf = 1`.
pub fn ratio_of(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else if b == 0.0 {
        f64::INFINITY
    } else if b.is_infinite() {
        0.0
    } else {
        a / b
    }
}

/// `(a - b) / b`, zero when the two coincide (including both infinite).
pub fn normalized_difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else if b.is_infinite() {
        -1.0
    } else {
        (a - b) / b
    }
}

pub fn bounds(args: &BoundsArgs) -> CliResult<Table> {
    let cfg = load_config(args.common.config.as_deref())?;
    let r = resolve_scenario(&args.scenario, &cfg)?;
    let ratio = cfg.resolve_opt(args.ratio, "ratio")?;
    check_ratio(ratio)?;
    let reports = bound_reports(&r.scenario, r.n_tot, ratio)?;

    let mut t = Table::new(&["bound", "var_gamma", "h_ll", "h_lr", "h_rr", "optimal_ratio", "enhancement"]);
    header(&mut t, "bounds", &r);
    t.comment(format!("ratio = {}", opt_g(ratio)));
    t.comment("var_gamma: per-shot variance bound on T_L - T_R");
    t.comment("enhancement = var_gamma(CB) / var_gamma; optimal_ratio nan for the evenly split twin beam");
    let var_cb = reports[0].var_gamma;
    for rep in &reports {
        t.push(vec![
            rep.label.as_str().into(),
            rep.var_gamma.into(),
            rep.qfim.ll().into(),
            rep.qfim.lr().into(),
            rep.qfim.rr().into(),
            rep.optimal_ratio.unwrap_or(f64::NAN).into(),
            ratio_of(var_cb, rep.var_gamma).into(),
        ]);
    }
    Ok(t)
}

pub fn ratio(args: &RatioArgs) -> CliResult<Table> {
    let cfg = load_config(args.common.config.as_deref())?;
    let r = resolve_scenario(&args.scenario, &cfg)?;
    let mode = cfg.resolve(args.mode, "mode", RatioMode::Classical)?;
    let lo = cfg.resolve(args.log10_x_min, "log10_x_min", -3.0)?;
    let hi = cfg.resolve(args.log10_x_max, "log10_x_max", 3.0)?;
    let points = cfg.resolve(args.grid, "grid", 61)?;
    if points < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(CliError::Usage(format!(
            "need log10_x_min < log10_x_max and at least 2 points, got [{lo}, {hi}] with {points}"
        )));
    }
    let (x, r_opt, x_def) = match mode {
        RatioMode::Classical => (
            classical_ratio_variable(&r.scenario),
            optimal_ratio_classical(&r.scenario),
            "x = eta_l tr / (eta_r tl)",
        ),
        RatioMode::Uql => (
            uql_ratio_variable(&r.scenario),
            optimal_ratio_uql(&r.scenario),
            "x = eta_l tr (1 - eta_r tr) / (eta_r tl (1 - eta_l tl))",
        ),
    };

    let mut t = Table::new(&["log10_x", "r_opt"]);
    header(&mut t, "ratio", &r);
    t.comment(format!("mode = {}", mode.as_str()));
    t.comment(x_def);
    t.comment("r_opt = 1 / (1 + sqrt(x)); ratio axis log10");
    t.comment(format!("scenario x = {}, r_opt = {}", fmt_g(x), fmt_g(r_opt)));
    for i in 0..points {
        let l = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        t.push(vec![l.into(), ratio_from_x(10f64.powf(l)).into()]);
    }
    Ok(t)
}

/// Which counting distribution fills the CR column of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrProbe {
    Coherent { ratio: Option<f64>, n_tot: f64 },
    Fock { n_l: usize, n_r: usize },
    Tmsv { n: f64 },
}

fn fock_budget(n_tot: f64, ratio: f64) -> CliResult<(usize, usize)> {
    let n_l = ratio * n_tot;
    let n_r = n_tot - n_l;
    for v in [n_l, n_r] {
        if (v - v.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "Fock probe needs integer photon numbers, got ({n_l}, {n_r})"
            ))
            .into());
        }
    }
    Ok((n_l.round() as usize, n_r.round() as usize))
}

/// Photon-counting CR bound on `Var(Γ₋)`.
///
/// At `T_j = 0` the counting FIM diverges and the truncated outcome table
/// cannot carry it, so the cell is reported as `inf`.
pub fn cr_bound_at(s: &Scenario, probe: CrProbe, cutoff: Option<usize>, tail_tol: f64) -> CliResult<f64> {
    if s.t_l() == 0.0 || s.t_r() == 0.0 {
        return Ok(f64::INFINITY);
    }
    let d = match probe {
        CrProbe::Coherent { ratio, n_tot } => {
            let b = PhotonBudget::from_ratio(n_tot, ratio.unwrap_or_else(|| optimal_ratio_classical(s)))?;
            coherent_pnrd(s, &b, cutoff.unwrap_or_else(|| coherent_cutoff(s, &b, tail_tol)))
        }
        CrProbe::Fock { n_l, n_r } => fock_pnrd(s, n_l, n_r),
        CrProbe::Tmsv { n } => tmsv_direct_pnrd(s, n, cutoff.unwrap_or_else(|| tmsv_cutoff(n, tail_tol)), tail_tol)?,
    };
    match cr_bound_gamma(&d) {
        Ok(v) => Ok(v),
        Err(Error::Unestimable) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

/// One grid cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub t_l: f64,
    pub t_r: f64,
    pub cb: f64,
    pub uql: f64,
    pub var_tmsv: f64,
    pub cr_pnrd: f64,
}

impl SweepCell {
    pub fn compute(s: &Scenario, n_tot: f64, probe: CrProbe, cutoff: Option<usize>, tail_tol: f64) -> CliResult<Self> {
        Ok(SweepCell {
            t_l: s.t_l(),
            t_r: s.t_r(),
            cb: classical_benchmark(s, n_tot),
            uql: uql_optimal(s, n_tot),
            var_tmsv: var_tmsv_direct(s, 0.5 * n_tot).unwrap_or(f64::INFINITY),
            cr_pnrd: cr_bound_at(s, probe, cutoff, tail_tol)?,
        })
    }
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "t_l",
    "t_r",
    "cb",
    "uql",
    "var_tmsv",
    "cr_pnrd",
    "enh_cb_over_uql",
    "enh_cb_over_tmsv",
    "nd_tmsv_uql",
    "nd_cr_tmsv",
    "nd_cr_uql",
];

pub fn sweep(args: &SweepArgs) -> CliResult<Table> {
    let cfg = load_config(args.common.config.as_deref())?;
    let r = resolve_scenario(&args.scenario, &cfg)?;
    let kind = cfg.resolve(args.probe, "probe", ProbeKind::Tmsv)?;
    let ratio = cfg.resolve_opt(args.ratio, "ratio")?;
    check_ratio(ratio)?;
    let points = cfg.resolve(args.grid, "grid", 21)?;
    let lo = cfg.resolve(args.grid_min, "grid_min", 0.0)?;
    let hi = cfg.resolve(args.grid_max, "grid_max", 1.0)?;
    let cutoff = cfg.resolve_opt(args.cutoff, "cutoff")?;
    let tail_tol = cfg.resolve(args.tail_tol, "tail_tol", DEFAULT_TAIL_TOL)?;
    if points < 2 {
        return Err(CliError::Usage(format!("grid needs at least 2 points, got {points}")));
    }
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(CliError::Usage(format!("grid bounds must satisfy 0 <= min < max <= 1, got [{lo}, {hi}]")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(CliError::Usage(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
    }
    let probe = match kind {
        ProbeKind::Coherent => CrProbe::Coherent { ratio, n_tot: r.n_tot },
        ProbeKind::Fock => {
            let (n_l, n_r) = fock_budget(r.n_tot, ratio.unwrap_or(0.5))?;
            CrProbe::Fock { n_l, n_r }
        }
        ProbeKind::Tmsv => CrProbe::Tmsv { n: 0.5 * r.n_tot },
    };

    let axis: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let s0 = r.scenario;
    let cells: Vec<SweepCell> = (0..points * points)
        .into_par_iter()
        .map(|idx| {
            let s = s0.with_t(axis[idx / points], axis[idx % points])?;
            SweepCell::compute(&s, r.n_tot, probe, cutoff, tail_tol)
        })
        .collect::<CliResult<_>>()?;

    let mut t = Table::new(&SWEEP_COLUMNS);
    header(&mut t, "sweep", &r);
    t.comment(format!(
        "grid = {points} points per axis on [{}, {}], rows ordered t_l major",
        fmt_g(lo),
        fmt_g(hi)
    ));
    t.comment(format!("probe = {}, ratio = {}", kind.as_str(), opt_g(ratio)));
    t.comment(format!(
        "cutoff = {}, tail_tol = {}",
        cutoff.map(|c| c.to_string()).unwrap_or_else(|| "auto".into()),
        fmt_g(tail_tol)
    ));
    t.comment("cb, uql: optimal split of n_tot; var_tmsv: twin beam with n_tot/2 per mode");
    t.comment("cr_pnrd: photon-counting Cramer-Rao bound of the probe, inf where t_l or t_r is 0");
    t.comment("enh_a_over_b = A / B");
    t.comment(NORMALIZED_DIFFERENCE);
    for c in &cells {
        t.push(vec![
            c.t_l.into(),
            c.t_r.into(),
            c.cb.into(),
            c.uql.into(),
            c.var_tmsv.into(),
            c.cr_pnrd.into(),
            ratio_of(c.cb, c.uql).into(),
            ratio_of(c.cb, c.var_tmsv).into(),
            normalized_difference(c.var_tmsv, c.uql).into(),
            normalized_difference(c.cr_pnrd, c.var_tmsv).into(),
            normalized_difference(c.cr_pnrd, c.uql).into(),
        ]);
    }
    Ok(t)
}

/// Simulation output: the per-seed table and a human-readable summary.
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub table: Table,
    pub summary: Vec<String>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<SimulateOutput> {
    let cfg = load_config(args.common.config.as_deref())?;
    let r = resolve_scenario(&args.scenario, &cfg)?;
    let kind = cfg.resolve(args.probe, "probe", ProbeKind::Fock)?;
    let ratio = cfg.resolve(args.ratio, "ratio", 0.5)?;
    check_ratio(Some(ratio))?;
    let nu = cfg.resolve(args.nu, "nu", 10_000)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let count = cfg.resolve(args.seeds, "seeds", 200)?;
    let grid = cfg.resolve(args.grid, "grid", 8)?;
    let probe = match kind {
        ProbeKind::Coherent => ProbeSpec::Coherent(PhotonBudget::from_ratio(r.n_tot, ratio)?),
        ProbeKind::Fock => {
            let (n_l, n_r) = fock_budget(r.n_tot, ratio)?;
            ProbeSpec::Fock { n_l, n_r }
        }
        ProbeKind::Tmsv => ProbeSpec::Tmsv { n: 0.5 * r.n_tot, grid },
    };
    let end = seed
        .checked_add(count as u64)
        .ok_or_else(|| CliError::Usage("seed range overflows u64".into()))?;
    let seeds: Vec<u64> = (seed..end).collect();
    let rep = saturation_report(&probe, &r.scenario, nu, &seeds)?;

    let mut t = Table::new(&["seed", "t_l_hat", "t_r_hat", "gamma_hat"]);
    header(&mut t, "simulate", &r);
    t.comment(format!("probe = {}, ratio = {}", kind.as_str(), fmt_g(ratio)));
    if kind == ProbeKind::Tmsv {
        t.comment(format!("mle start grid = {grid}"));
    }
    t.comment(format!("nu = {nu}, seed = {seed}, seeds = {count}"));
    t.comment(format!("rng = {RNG_ALGORITHM}"));
    let summary = vec![
        format!("gamma_true = {}", fmt_g(rep.gamma_true)),
        format!("gamma_hat_mean = {}", fmt_g(rep.gamma_hat_mean)),
        format!("bias = {}", fmt_g(rep.bias)),
        format!("gamma_hat_var = {}", fmt_g(rep.gamma_hat_var)),
        format!("cr_bound_per_nu = {}", fmt_g(rep.cr_bound_per_nu)),
        format!("ratio = {}", fmt_g(rep.ratio)),
        format!("ratio_std_error = {}", fmt_g(rep.ratio_std_error)),
    ];
    for line in &summary {
        t.comment(line.clone());
    }
    for e in &rep.estimates {
        t.push(vec![e.seed.into(), e.t_l.into(), e.t_r.into(), e.gamma.into()]);
    }
    Ok(SimulateOutput { table: t, summary })
}
