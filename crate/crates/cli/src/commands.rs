//! One function per subcommand; each builds a [`Table`] and emits it.

use bdt_core::inversion::{maturity_steps, CSV_HEADER};
use bdt_core::{
    build_implied_curves, fitted_series, price_zcb, price_zcb_const, simulate_path,
    solve_up_down, PricingPolicy, ThetaRate,
};

use crate::args::{
    parse_grid, CalibrateArgs, EstimateArgs, FitArgs, Format, ImplyArgs, OutputArgs, PriceArgs,
    SimulateArgs,
};
use crate::error::{CliError, Context};
use crate::inputs::{baseline, calibration, guard_output, load_curve, load_series, moments_of};
use crate::output::{write_text, Cell, Table};

/// Maturities used by `imply` when no `--grid` is given: 2, 3, 4, 6 and 9
/// months, then every year out to 30.
pub const DEFAULT_GRID: &str = "2/12,3/12,4/12,6/12,9/12,1:30:1";

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_SIM_STEPS: usize = 252;

pub fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    guard_output(args.output.out.as_deref(), &[args.series.input.as_deref()])?;
    let delta = args.series.delta()?;
    let loaded = load_series(&args.series)?;
    let m = moments_of(&loaded, delta)?;
    let mut table = Table::new(vec![
        "mean_per_step",
        "std_per_step",
        "p_up",
        "n_obs",
        "delta",
        "mu_annualized",
        "sigma_annualized",
        "skipped_rows",
        "price_field",
    ]);
    table.push(vec![
        m.mean_per_step.into(),
        m.std_per_step.into(),
        m.p_up.into(),
        m.n_obs.into(),
        m.delta.into(),
        m.mu().into(),
        m.sigma().into(),
        loaded.parsed.skipped.into(),
        loaded.price_field.map(|f| f.as_str()).into(),
    ]);
    table.emit(&args.output)
}

pub fn calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    guard_output(args.output.out.as_deref(), &[args.series.input.as_deref()])?;
    let (cal, _) = calibration(&args.series, &args.lattice)?;
    let m = cal.rate_moments;
    let factors = m.as_ref().map(solve_up_down).transpose().context("calibration")?;
    let mut table = Table::new(vec![
        "r0",
        "c1",
        "c2",
        "delta",
        "mean_per_step",
        "std_per_step",
        "p_up",
        "n_obs",
        "u",
        "d",
    ]);
    table.push(vec![
        cal.r0.into(),
        cal.c1.into(),
        cal.c2.into(),
        cal.delta.into(),
        m.map(|m| m.mean_per_step).into(),
        m.map(|m| m.std_per_step).into(),
        m.map(|m| m.p_up).into(),
        m.map(|m| m.n_obs).into(),
        factors.map(|f| f.u).into(),
        factors.map(|f| f.d).into(),
    ]);
    table.emit(&args.output)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    guard_output(args.output.out.as_deref(), &[args.series.input.as_deref()])?;
    let (cal, loaded) = calibration(&args.series, &args.lattice)?;
    let loaded = loaded.ok_or_else(|| CliError::config("fit needs --input (rate history)"))?;
    let points = fitted_series(&cal, &loaded.parsed.series).context("fit")?;
    let mut table = Table::new(vec!["date", "market", "model"]);
    for p in points {
        table.push(vec![p.date.to_string().into(), p.market.into(), p.model.into()]);
    }
    table.emit(&args.output)?;
    if let Some(script) = &args.plot_script {
        write_text(script, &fit_plot_script(&args.output)?)?;
    }
    Ok(())
}

pub fn price(args: &PriceArgs) -> Result<(), CliError> {
    guard_output(
        args.output.out.as_deref(),
        &[args.series.input.as_deref(), args.equity.equity_input.as_deref()],
    )?;
    let delta = args.series.delta()?;
    let steps = match (args.steps, args.maturity) {
        (Some(n), _) => n,
        (None, Some(t)) if t.is_finite() && t > 0.0 => maturity_steps(t, delta),
        (None, Some(t)) => return Err(CliError::config(format!("--maturity must be positive, got {t}"))),
        (None, None) => return Err(CliError::config("price needs --steps or --maturity")),
    };
    let (cal, _) = calibration(&args.series, &args.lattice)?;
    let lattice = cal.lattice(steps.max(1)).context("lattice")?;

    let (price, clamped, mode) = match args.ptilde {
        Some(q) => (
            price_zcb_const(&lattice, q, steps).context("price")?,
            0,
            "constant",
        ),
        None => {
            let base = baseline(&args.equity, &args.series)?;
            let policy = PricingPolicy::new(
                args.policy.ptilde_policy.map(Into::into).unwrap_or_default(),
                args.policy.theta_rate.unwrap_or_default(),
            )
            .context("pricing policy")?;
            let out = price_zcb(&lattice, &base.params, steps, &policy).context("price")?;
            (out.price, out.clamped_nodes, "equity")
        }
    };
    let mut table = Table::new(vec![
        "n_steps",
        "maturity_years",
        "price",
        "ptilde_mode",
        "clamped_nodes",
    ]);
    table.push(vec![
        steps.into(),
        (steps as f64 * delta).into(),
        price.into(),
        mode.into(),
        clamped.into(),
    ]);
    table.emit(&args.output)
}

pub fn imply(args: &ImplyArgs) -> Result<(), CliError> {
    guard_output(
        args.output.out.as_deref(),
        &[
            args.series.input.as_deref(),
            args.equity.equity_input.as_deref(),
            args.yield_curve.as_deref(),
        ],
    )?;
    let curve_path = args
        .yield_curve
        .as_ref()
        .ok_or_else(|| CliError::config("imply needs --yield-curve"))?;
    let grid = parse_grid(args.grid.as_deref().unwrap_or(DEFAULT_GRID)).map_err(CliError::config)?;
    let tol = args.tol.unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::config(format!("--tol must be positive, got {tol}")));
    }
    let (cal, _) = calibration(&args.series, &args.lattice)?;
    let rate = match args.theta_rate {
        None => cal.r0,
        Some(ThetaRate::Fixed(r)) => r,
        Some(ThetaRate::Node) => {
            return Err(CliError::config(
                "imply needs a single theta rate; use --theta-rate fixed:<rate>",
            ))
        }
    };
    let curve = load_curve(curve_path, &args.series, args.curve_date)?;
    let base = baseline(&args.equity, &args.series)?;
    if let Some(field) = base.price_field {
        eprintln!("equity baseline from {} column", field.as_str());
    }

    let points = build_implied_curves(&curve, &cal, &base.params, rate, &grid, tol).context("imply")?;
    let mut table = Table::new(CSV_HEADER.to_vec());
    for p in &points {
        let flags = p
            .diagnostics
            .flags
            .iter()
            .map(|f| f.as_str())
            .collect::<Vec<_>>()
            .join(";");
        table.push(vec![
            p.maturity.into(),
            p.n_steps.into(),
            p.market_price.into(),
            p.ptilde.into(),
            p.implied_mu.into(),
            p.implied_sigma.into(),
            p.implied_p.into(),
            p.diagnostics.residual.into(),
            Cell::Text(flags),
        ]);
    }
    table.emit(&args.output)?;
    if let Some(script) = &args.plot_script {
        write_text(script, &imply_plot_script(&args.output)?)?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    guard_output(args.output.out.as_deref(), &[args.series.input.as_deref()])?;
    let (cal, _) = calibration(&args.series, &args.lattice)?;
    let p_up = match (args.p_up, cal.rate_moments) {
        (Some(p), _) => p,
        (None, Some(m)) => m.p_up,
        (None, None) => return Err(CliError::config("simulate needs --p-up with --c1/--c2")),
    };
    let steps = args.steps.unwrap_or(DEFAULT_SIM_STEPS);
    let path = simulate_path(&cal, steps, p_up, args.seed.unwrap_or(0)).context("simulate")?;
    let mut table = Table::new(vec!["step", "market", "model"]);
    for (n, r) in path.into_iter().enumerate() {
        table.push(vec![n.into(), Cell::Empty, r.into()]);
    }
    table.emit(&args.output)
}

fn csv_target(output: &OutputArgs) -> Result<String, CliError> {
    match (&output.out, output.format()) {
        (Some(path), Format::Csv) => Ok(path.display().to_string()),
        _ => Err(CliError::config("--plot-script needs --out with --format csv")),
    }
}

fn fit_plot_script(output: &OutputArgs) -> Result<String, CliError> {
    let data = csv_target(output)?;
    Ok(format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv({data:?}, parse_dates=["date"])
fig, ax = plt.subplots(figsize=(9, 4.5))
ax.plot(df["date"], df["market"], label="market")
ax.plot(df["date"], df["model"], label="model")
ax.set_xlabel("date")
ax.set_ylabel("short rate")
ax.legend()
fig.tight_layout()
fig.savefig({png:?}, dpi=150)
"#,
        png = format!("{data}.png"),
    ))
}

fn imply_plot_script(output: &OutputArgs) -> Result<String, CliError> {
    let data = csv_target(output)?;
    Ok(format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv({data:?})
fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, column, label in zip(axes, ["implied_mu", "implied_sigma", "implied_p"], ["mu", "sigma", "p"]):
    ax.plot(df["maturity_years"], df[column], marker=".")
    ax.set_xlabel("maturity (years)")
    ax.set_title("implied " + label)
fig.tight_layout()
fig.savefig({png:?}, dpi=150)
"#,
        png = format!("{data}.png"),
    ))
}
