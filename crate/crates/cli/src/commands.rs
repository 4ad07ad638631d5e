//! The four subcommands. Each returns `Ok` or a `CliError` carrying its
//! exit code; files go to `Globals::out`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use esdelay::bounds::{self, rho_bars, BoundsError};
use esdelay::dither::{averaging_sums, DitherConfig};
use esdelay::estimator::{run_observed, EsRunConfig, RunStatus};
use esdelay::feasibility::{
    max_epsilon_simulation, max_epsilon_theorem, table_reproduce, FeasibilityReport, Method, ReproduceOptions, SearchConfig, SearchError,
    SimTemplate, TableRow, TABLE_DELAYS,
};
use esdelay::{BoundInputs, QuadraticMap, Variant};
use nalgebra::DMatrix;

use crate::config::RunSpec;
use crate::output::{self, CsvSink, PlotSampler, Series, Tee};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed_override: Option<u64>,
    pub plot: bool,
    pub quiet: bool,
    /// Shorter horizons and no `D_M = 50` simulation rows.
    pub fast: bool,
}

impl Globals {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn spec(&self) -> Result<RunSpec, CliError> {
        let path = self.config.as_ref().ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
        RunSpec::load(path)
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Table1,
    Table2,
    Fig2,
    Fig3,
    Identities,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn search_err(e: SearchError) -> CliError {
    match e {
        SearchError::Config(m) => CliError::Config(format!("search: {m}")),
        other => runtime(other),
    }
}

fn bounds_err(e: BoundsError) -> CliError {
    match e {
        BoundsError::ChainUndefined { .. } => CliError::BoundUndefined(e.to_string()),
        other => CliError::Config(format!("bounds: {other}")),
    }
}

/// Stream one run to `csv` (and optionally sample it for a plot). The CSV
/// is flushed before any runtime error is reported.
fn stream_run(cfg: &EsRunConfig, csv: &Path, plot: Option<&mut PlotSampler>) -> Result<(usize, RunStatus), CliError> {
    let file = BufWriter::new(File::create(csv)?);
    let mut sink = CsvSink::new(file, cfg.map.dim(), cfg.decimation)?;
    let mut rows = 0usize;
    let mut count = |s: &esdelay::estimator::StepView<'_>| {
        if s.j % cfg.decimation == 0 {
            rows += 1;
        }
    };
    let result = match plot {
        Some(p) => {
            let mut inner = Tee(&mut sink, p);
            run_observed(cfg, &mut Tee(&mut inner, &mut count))
        }
        None => run_observed(cfg, &mut Tee(&mut sink, &mut count)),
    };
    sink.finish()?;
    let status = result.map_err(runtime)?;
    Ok((rows, status))
}

fn status_check(status: RunStatus, csv: &Path) -> Result<(), CliError> {
    match status {
        RunStatus::Completed => Ok(()),
        RunStatus::PrecisionFloor { step } => {
            Err(CliError::Runtime(format!("dither gain reached the precision floor at step {step}; partial output in {}", csv.display())))
        }
        RunStatus::Diverged { step } => Err(CliError::Runtime(format!("estimate diverged at step {step}; partial output in {}", csv.display()))),
    }
}

pub fn simulate(g: &Globals) -> Result<(), CliError> {
    let spec = g.spec()?;
    let cfg = spec.run_config(g.seed_override)?;
    let csv = g.out_file("trajectory.csv")?;
    let mut sampler = g.plot.then(|| PlotSampler::new(cfg.horizon, 4000));
    let (rows, status) = stream_run(&cfg, &csv, sampler.as_mut())?;
    if let Some(s) = sampler {
        let title = format!("{} ES, D_M = {}, eps = {:e}", cfg.params.variant, cfg.delay.d_max(), cfg.dither.epsilon());
        let svg = output::svg_log_plot(&[Series { label: title.clone(), points: s.points }], &title, "j", "|theta_hat(j) - theta*|");
        fs::write(g.out_file("plot.svg")?, svg)?;
    }
    g.say(format!("wrote {} ({rows} rows, status {status:?})", csv.display()));
    status_check(status, &csv)
}

fn dependency(name: &str, unbiased: bool) -> &'static str {
    match (name, unbiased) {
        ("rho_bar_3", _) => "n, D_M, k, H_M, a, epsilon*",
        ("rho_bar_1" | "rho_bar_2" | "rho_bar_4", _) => "n, D_M, k, H_M, a",
        ("sigma_y", _) => "sigma, alpha0, |a|, H_M",
        ("sigma_eta", _) => "sigma_y, delta_Q, omega_h",
        ("delta", true) => "sigma_y, sigma_eta",
        ("delta", false) => "sigma_y",
        ("delta_out", _) => "delta",
        ("delta_g", true) => "rho_bar, sigma_eta",
        ("delta_g", false) => "rho_bar",
        ("delta_y", _) => "rho_bar, delta, delta_out, delta_g",
        _ => "",
    }
}

pub fn bounds(g: &Globals) -> Result<(), CliError> {
    let spec = g.spec()?;
    let inputs = spec.bound_inputs(None)?;
    inputs.validate().map_err(bounds_err)?;
    let rho = rho_bars(&inputs).map_err(bounds_err)?;
    let chain = bounds::chain(&inputs).map_err(bounds_err)?;
    let verdict = bounds::feasible(&inputs, Default::default());

    let mut text = format!(
        "{} ES, D_M = {} ({:?}), epsilon* = {:e}, sigma = {}\n",
        inputs.variant, inputs.d_max, inputs.regime, inputs.epsilon_star, inputs.sigma
    );
    text.push_str(&format!("rho_bar = [{:.6e}, {:.6e}, {:.6e}, {:.6e}]\n", rho[0], rho[1], rho[2], rho[3]));
    let mut csv = String::from("key,value\n");
    for (k, v) in [("variant", inputs.variant.to_string()), ("d_max", inputs.d_max.to_string()), ("epsilon_star", format!("{:.16e}", inputs.epsilon_star)), ("sigma", format!("{:.16e}", inputs.sigma))] {
        csv.push_str(&format!("{k},{v}\n"));
    }
    for (i, (name, value)) in chain.entries().into_iter().enumerate() {
        text.push_str(&format!("{:>2}. {:<10} = {:<24.16e} <- {}\n", i + 1, name, value, dependency(name, chain.sigma_eta.is_some())));
        csv.push_str(&format!("{name},{value:.16e}\n"));
    }
    text.push_str(&format!("feasible: {}\n", verdict.feasible));
    for m in &verdict.margins {
        text.push_str(&format!("  {:<14} margin {:>14.6e} {}\n", m.name, m.margin, if m.satisfied { "ok" } else { "violated" }));
        csv.push_str(&format!("margin_{},{:.16e}\n", m.name, m.margin));
    }
    csv.push_str(&format!("feasible,{}\n", verdict.feasible));
    if let Some(r) = &verdict.reason {
        text.push_str(&format!("reason: {r}\n"));
    }
    fs::write(g.out_file("bounds.csv")?, csv)?;
    g.say(text.trim_end());
    Ok(())
}

fn seeded(mut search: SearchConfig, g: &Globals) -> SearchConfig {
    if let Some(s) = g.seed_override {
        search.sim_seeds = vec![s];
    }
    search
}

fn describe(r: &FeasibilityReport) -> String {
    let mut s = format!(
        "{} D_M = {}: epsilon* = {:.4e}, decay rate {:.15}, method {}",
        r.variant,
        r.d_max,
        r.epsilon_star,
        r.decay_rate,
        r.method.name()
    );
    if r.method == Method::Theorem {
        s.push_str(&format!(", sigma = {:.4}", r.sigma));
        if !r.maximality.certified {
            s.push_str(" (maximality not certified)");
        }
    }
    if let Some(n) = &r.note {
        s.push_str(&format!(" [{n}]"));
    }
    s
}

pub fn search(g: &Globals, method: Method, variant: Variant) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    if g.config.is_some() {
        let spec = g.spec()?;
        let search = seeded(spec.search_config(variant), g);
        let inputs = spec.bound_inputs(Some(variant))?;
        let report = match method {
            Method::Theorem => max_epsilon_theorem(&inputs, &search),
            Method::Simulation => {
                let mut run = spec.run_config(g.seed_override)?;
                run.params.variant = variant;
                run.decimation = 1;
                max_epsilon_simulation(&SimTemplate { run, bounds: inputs }, &search)
            }
        };
        match report {
            Ok(r) => {
                g.say(describe(&r));
                rows.push(TableRow::from(&r));
            }
            Err(e @ SearchError::Config(_)) => return Err(search_err(e)),
            Err(e) => failures.push(format!("D_M = {}: {e}", spec.delay.d_max)),
        }
    } else {
        let search = seeded(SearchConfig::defaults(1.0, variant), g);
        for d in TABLE_DELAYS {
            if method == Method::Simulation && g.fast && d == 50 {
                continue;
            }
            let report = match method {
                Method::Theorem => max_epsilon_theorem(&BoundInputs::example_3d(variant, d, 1e-8, 1.5), &search),
                Method::Simulation => max_epsilon_simulation(&SimTemplate::example_3d(variant, d, search.sim_horizon), &search),
            };
            match report {
                Ok(r) => {
                    g.say(describe(&r));
                    rows.push(TableRow::from(&r));
                }
                Err(e @ SearchError::Config(_)) => return Err(search_err(e)),
                Err(e) => failures.push(format!("D_M = {d}: {e}")),
            }
        }
    }
    fs::write(g.out_file("search.csv")?, output::table_csv(&rows))?;
    finish_rows(failures)
}

fn finish_rows(failures: Vec<String>) -> Result<(), CliError> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failures.join("; ")))
    }
}

/// Largest residuals of the three window identities at one `(n, D_M, ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCase {
    pub n: usize,
    pub d_max: usize,
    pub epsilon: f64,
    pub period: u64,
    pub residuals: [f64; 3],
}

/// `⟨M⟩ = 0`, `⟨M Sᵀ⟩ = I` and `⟨M Sᵀ H S⟩ = 0` over one period, checked
/// at several window starts.
pub fn identities() -> Vec<IdentityCase> {
    let cases = [(1usize, 0usize, 0.3), (3, 0, 1e-2), (3, 5, 1e-4), (2, 3, 4e-4)];
    cases
        .iter()
        .map(|&(n, d, eps)| {
            let amps: Vec<f64> = (0..n).map(|i| 0.1 + 0.05 * i as f64).collect();
            let cfg = DitherConfig::new(amps, eps, d).expect("valid identity case");
            let h = if n == 3 { QuadraticMap::example_3d().hessian().clone() } else { spd(n) };
            let mut res = [0.0f64; 3];
            for t in [0, 1, 17, cfg.period() + 3] {
                let (m, ms, msh) = averaging_sums(&cfg, &h, t);
                let id = DMatrix::<f64>::identity(n, n);
                res[0] = res[0].max(m.amax());
                res[1] = res[1].max((ms - id).amax());
                res[2] = res[2].max(msh.amax());
            }
            IdentityCase { n, d_max: d, epsilon: eps, period: cfg.period(), residuals: res }
        })
        .collect()
}

fn spd(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 10.0 + 5.0 * i as f64 } else { 1.5 })
}

const IDENTITY_TOL: f64 = 1e-9;

fn figure(g: &Globals, name: &str, variant: Variant, runs: [(usize, f64); 2]) -> Result<(), CliError> {
    let horizon = if g.fast { 500_000 } else { 2_000_000 };
    let mut series = Vec::new();
    let mut problems = Vec::new();
    for (d, eps) in runs {
        let spec = RunSpec::example_3d(variant, d, eps, horizon);
        let mut cfg = spec.run_config(g.seed_override)?;
        cfg.decimation = (horizon / 2000).max(1);
        let csv = g.out_file(&format!("{name}_d{d}.csv"))?;
        let mut sampler = PlotSampler::new(horizon, 2000);
        let (_, status) = stream_run(&cfg, &csv, Some(&mut sampler))?;
        if let Err(e) = status_check(status, &csv) {
            problems.push(e.to_string());
        }
        let last = sampler.points.last().map(|p| p.1).unwrap_or(f64::NAN);
        g.say(format!("{name}: D_M = {d}, eps = {eps:e}: final error {last:.3e} -> {}", csv.display()));
        series.push(Series { label: format!("D_M = {d}, eps* = {eps:.1e}"), points: sampler.points });
    }
    let title = format!("{variant} ES: |theta_hat(j) - theta*|");
    fs::write(g.out_file(&format!("{name}.svg"))?, output::svg_log_plot(&series, &title, "j", "|theta_hat(j) - theta*|"))?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(problems.join("; ")))
    }
}

pub fn reproduce(g: &Globals, target: Target) -> Result<(), CliError> {
    match target {
        Target::Table1 | Target::Table2 => {
            let (variant, name) = if target == Target::Table1 { (Variant::Unbiased, "table1") } else { (Variant::Classical, "table2") };
            let search = match &g.config {
                Some(_) => g.spec()?.search_config(variant),
                None => SearchConfig::defaults(1.0, variant),
            };
            let search = seeded(search, g);
            search.validate().map_err(search_err)?;
            let opts = ReproduceOptions { theorem: true, simulation: true, fast: g.fast };
            let (rows, failures) = table_reproduce(variant, &search, opts);
            fs::write(g.out_file(&format!("{name}.csv"))?, output::table_csv(&rows))?;
            g.say(output::table_text(&rows).trim_end());
            g.say(format!(
                "simulation rows: pass when every seed in {:?} meets the {:?} criterion within {} steps",
                search.sim_seeds, search.sim_criterion.mode, search.sim_horizon
            ));
            finish_rows(failures.into_iter().map(|(d, m, e)| format!("{} row D_M = {d}: {e}", m.name())).collect())
        }
        Target::Fig2 => figure(g, "fig2", Variant::Unbiased, [(0, 0.7e-3), (5, 0.3e-4)]),
        Target::Fig3 => figure(g, "fig3", Variant::Classical, [(0, 0.2e-2), (5, 0.2e-3)]),
        Target::Identities => {
            let cases = identities();
            let mut csv = String::from("n,D_M,epsilon,period,mean_m,mean_ms_minus_i,mean_msh\n");
            let mut worst = 0.0f64;
            for c in &cases {
                csv.push_str(&format!(
                    "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e}\n",
                    c.n, c.d_max, c.epsilon, c.period, c.residuals[0], c.residuals[1], c.residuals[2]
                ));
                g.say(format!(
                    "n = {}, D_M = {}, eps = {:e}, T = {}: residuals {:.3e} {:.3e} {:.3e}",
                    c.n, c.d_max, c.epsilon, c.period, c.residuals[0], c.residuals[1], c.residuals[2]
                ));
                worst = c.residuals.iter().fold(worst, |a, b| a.max(*b));
            }
            fs::write(g.out_file("identities.csv")?, csv)?;
            if worst <= IDENTITY_TOL {
                Ok(())
            } else {
                Err(CliError::Runtime(format!("largest window residual {worst:e} exceeds {IDENTITY_TOL:e}")))
            }
        }
    }
}
