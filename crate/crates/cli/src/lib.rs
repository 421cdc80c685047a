//! Command-line front end for spreadlab.
//!
//! Exit codes: 0 success, 2 hypothesis or verdict failure, 1 operational error.

pub mod out;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spreadlab::config::parse_config_with;
use spreadlab::determinacy::{self, DeterminacyError, DeterminacyOptions, Hl};
use spreadlab::evolve::{CellField, Species};
use spreadlab::fronts::{self, FrontError, LEVEL_HIGH, LEVEL_LOW};
use spreadlab::habitat::{Coef, HabitatError};
use spreadlab::lab::{Lab, LabError};
use spreadlab::par;
use spreadlab::spectral::{self, SpectralError};
use spreadlab::speeds::{self, SpeedError, SpeedResult};

use out::{csv_kv, csv_table, kv, text_kv, OutDir};
use svg::{Plot, Series};

pub const OUT_ENV: &str = "SPREADLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "spreadlab", version, about = "Spreading speeds and linear determinacy for nonlocal competition in periodic habitats")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Habitat configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created atomically.
    #[arg(long, global = true, value_name = "DIR", env = OUT_ENV, default_value = "spreadlab-out")]
    pub out: PathBuf,
    /// Spreading direction, +1 or -1.
    #[arg(long, global = true, default_value = "+1", allow_hyphen_values = true, value_parser = parse_xi)]
    pub xi: i8,
    /// Config override `section.key=value`; repeatable.
    #[arg(long = "override", global = true, value_name = "K=V")]
    pub overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Replace an existing output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Only write files; print nothing on success.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hypothesis checks: (HB0), (HB1), (HB2) and the coefficient-only forms.
    Check,
    /// Periodic attractors u* and v*.
    Steady,
    /// Principal spectrum point of a growth field at one decay rate.
    Lambda(LambdaArgs),
    /// Linear spreading speed from the spectrum points.
    Speed(SpeedArgs),
    /// Front simulation, level tracks and the empirical speed interval.
    Front(FrontArgs),
    /// Full linear-determinacy report.
    Determinacy(DeterminacyArgs),
    /// Speeds (and optionally verdicts) over a parameter list.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GrowthField {
    A1,
    A2,
    /// a1 - c1 v*
    Invasion,
    /// a2 - b2 u*
    Resident,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, value_enum, default_value = "a1")]
    pub field: GrowthField,
}

#[derive(Debug, Args)]
pub struct SpeedArgs {
    /// Single-species speed of species 1 or 2 instead of the linearized system.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub species: Option<u8>,
    /// Also compute the super-solution constant C0.
    #[arg(long)]
    pub c0: bool,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    /// Run length in periods (default: run.periods).
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub c0: bool,
}

#[derive(Debug, Args)]
pub struct DeterminacyArgs {
    /// Skip the front simulation.
    #[arg(long)]
    pub no_front: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// A `[params]` name, or a full `section.key` override path.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub values: Vec<String>,
    /// Also assemble a determinacy verdict per value (without fronts).
    #[arg(long)]
    pub verdict: bool,
}

fn parse_xi(s: &str) -> Result<i8, String> {
    match s.trim() {
        "+1" | "1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(format!("xi must be +1 or -1, got `{other}`")),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let jobs = cli.jobs;
    match par::with_jobs(jobs, || execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_hypothesis_failure(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn habitat_hyp(e: &HabitatError) -> bool {
    matches!(e, HabitatError::HypothesisHB0Violated { .. })
}

fn spectral_hyp(e: &SpectralError) -> bool {
    match e {
        SpectralError::HB1Violated { .. } | SpectralError::ExtinctionDetected { .. } => true,
        SpectralError::Habitat(h) => habitat_hyp(h),
        _ => false,
    }
}

fn speed_hyp(e: &SpeedError) -> bool {
    match e {
        SpeedError::NonPositiveGrowth { .. } => true,
        SpeedError::Spectral(s) => spectral_hyp(s),
        _ => false,
    }
}

fn front_hyp(e: &FrontError) -> bool {
    match e {
        FrontError::FrontHitBoundary { .. } | FrontError::PoorFit { .. } | FrontError::LevelNotBracketed { .. } => true,
        FrontError::Spectral(s) => spectral_hyp(s),
        _ => false,
    }
}

/// Whether an error is a failed hypothesis or diagnostic rather than an
/// operational fault.
pub fn is_hypothesis_failure(e: &anyhow::Error) -> bool {
    if let Some(h) = e.downcast_ref::<HabitatError>() {
        return habitat_hyp(h);
    }
    if let Some(LabError::Habitat(h)) = e.downcast_ref::<LabError>() {
        return habitat_hyp(h);
    }
    if let Some(s) = e.downcast_ref::<SpectralError>() {
        return spectral_hyp(s);
    }
    if let Some(s) = e.downcast_ref::<SpeedError>() {
        return speed_hyp(s);
    }
    if let Some(f) = e.downcast_ref::<FrontError>() {
        return front_hyp(f);
    }
    if let Some(d) = e.downcast_ref::<DeterminacyError>() {
        return match d {
            DeterminacyError::Lemma41Fails { .. } => true,
            DeterminacyError::Spectral(s) => spectral_hyp(s),
            DeterminacyError::Speed(s) => speed_hyp(s),
            DeterminacyError::Habitat(h) => habitat_hyp(h),
            DeterminacyError::Evolve(_) => false,
        };
    }
    false
}

fn load(cli: &Cli, extra: &[String]) -> Result<Lab> {
    let path = cli.config.as_deref().context("--config PATH is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut ovs = cli.overrides.clone();
    ovs.extend_from_slice(extra);
    let cfg = parse_config_with(&text, &ovs)?;
    Ok(Lab::new(cfg)?)
}

fn finish(cli: &Cli, out: OutDir, text: &str, code: u8) -> Result<u8> {
    let dir = out.commit()?;
    if !cli.quiet {
        print!("{text}");
        println!("wrote {}", dir.display());
    }
    Ok(code)
}

pub fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Check => cmd_check(cli),
        Command::Steady => cmd_steady(cli),
        Command::Lambda(a) => cmd_lambda(cli, a),
        Command::Speed(a) => cmd_speed(cli, a),
        Command::Front(a) => cmd_front(cli, a),
        Command::Determinacy(a) => cmd_determinacy(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
    }
}

fn cmd_check(cli: &Cli) -> Result<u8> {
    let lab = load(cli, &[])?;
    let out = OutDir::create(&cli.out, cli.force)?;
    let mut e = vec![kv("hb0", true)];
    let hb = spectral::check_hb1_hb2(&lab)?;
    e.push(kv("hb1", hb.hb1));
    e.push(kv("lambda_a1", hb.lambda_a1));
    e.push(kv("lambda_a2", hb.lambda_a2));
    let primed = lab
        .habitat
        .check_primed_hypotheses(&lab.bounds, lab.grid.check_nt, lab.grid.check_nx)?;
    let mut pass = hb.hb1;
    if hb.hb1 {
        let orbits = lab.orbits()?;
        let stab = determinacy::sampled_global_stability(&lab, orbits, determinacy::STABILITY_PERIODS)?;
        let hb2 = hb.invasion_positive && (hb.resident_negative || primed.hb2_prime.pass) && stab.pass;
        pass &= hb2;
        e.push(kv("lambda_invasion", hb.lambda_invasion.unwrap_or(f64::NAN)));
        e.push(kv("lambda_resident", hb.lambda_resident.unwrap_or(f64::NAN)));
        e.push(kv("hb2.invasion_positive", hb.invasion_positive));
        e.push(kv("hb2.resident_negative", hb.resident_negative));
        e.push(kv("hb2.stability_sampled_not_proven", stab.pass));
        e.push(kv("hb2", hb2));
        for (name, which) in [("hl0", Hl::Zero), ("hl1", Hl::One), ("hl2", Hl::Two)] {
            let c = determinacy::check_hl(&lab, orbits, which);
            e.push(kv(name, c.pass));
            e.push(kv(&format!("{name}.slack"), c.slack));
        }
    } else {
        e.push(kv("hb2", "skipped: (HB1) fails"));
    }
    e.push(kv("hb2_prime", primed.hb2_prime.pass));
    for (name, c) in [
        ("hl0_prime", primed.hl0_prime),
        ("hl1_prime", primed.hl1_prime),
        ("hl2_prime", primed.hl2_prime),
    ] {
        e.push(kv(name, c.pass));
        e.push(kv(&format!("{name}.slack"), c.slack));
    }
    e.push(kv("pass", pass));
    out.write("check.csv", &csv_kv("check", &e)?)?;
    let text = text_kv("hypothesis check", &e);
    out.write("check.txt", &text)?;
    finish(cli, out, &text, if pass { 0 } else { 2 })
}

fn cmd_steady(cli: &Cli) -> Result<u8> {
    let lab = load(cli, &[])?;
    let out = OutDir::create(&cli.out, cli.force)?;
    let o = lab.orbits()?;
    let time = lab.evolve_time;
    let mut rows = Vec::new();
    for n in 0..time.nt {
        for j in 0..lab.cell.nx {
            rows.push(vec![
                time.t(n).to_string(),
                lab.cell.x(j).to_string(),
                o.ustar.at(n, j).to_string(),
                o.vstar.at(n, j).to_string(),
            ]);
        }
    }
    out.write("steady.csv", &csv_table("steady", &["t", "x", "u_star", "v_star"], rows)?)?;
    let profile = |orb: &spreadlab::evolve::PeriodicOrbit, n: usize| -> Vec<(f64, f64)> {
        (0..lab.cell.nx).map(|j| (lab.cell.x(j), orb.at(n, j))).collect()
    };
    let half = time.nt / 2;
    let plot = Plot {
        title: "periodic attractors".into(),
        x_label: "x".into(),
        y_label: "density".into(),
        series: vec![
            Series::solid("u*(0, x)", profile(&o.ustar, 0)),
            Series::dashed("u*(T/2, x)", profile(&o.ustar, half)),
            Series::solid("v*(0, x)", profile(&o.vstar, 0)),
            Series::dashed("v*(T/2, x)", profile(&o.vstar, half)),
        ],
    };
    out.write("steady.svg", &plot.render())?;
    let e = vec![
        kv("u_star.min", o.ustar.min()),
        kv("u_star.max", o.ustar.max()),
        kv("u_star.drift", o.ustar.drift),
        kv("v_star.min", o.vstar.min()),
        kv("v_star.max", o.vstar.max()),
        kv("v_star.drift", o.vstar.drift),
        kv("nt", time.nt),
        kv("nx", lab.cell.nx),
    ];
    out.write("steady_summary.csv", &csv_kv("steady_summary", &e)?)?;
    let text = text_kv("periodic attractors", &e);
    out.write("steady.txt", &text)?;
    finish(cli, out, &text, 0)
}

fn cmd_lambda(cli: &Cli, a: &LambdaArgs) -> Result<u8> {
    let lab = load(cli, &[])?;
    let out = OutDir::create(&cli.out, cli.force)?;
    let result = match a.field {
        GrowthField::A1 | GrowthField::A2 => {
            let c = if a.field == GrowthField::A1 { Coef::A1 } else { Coef::A2 };
            let f = lab.coef_field(c);
            spectral::principal_spectrum_point(&lab.growth_problem(&f), cli.xi, a.mu, &lab.spectral)?
        }
        GrowthField::Invasion | GrowthField::Resident => {
            let o = lab.orbits()?;
            let f: Box<dyn CellField + '_> = if a.field == GrowthField::Invasion {
                Box::new(lab.invasion_field(o))
            } else {
                Box::new(lab.resident_field(o))
            };
            spectral::principal_spectrum_point(&lab.growth_problem(f.as_ref()), cli.xi, a.mu, &lab.spectral)?
        }
    };
    let field = a.field.to_possible_value().expect("named").get_name().to_string();
    let e = vec![
        kv("field", field),
        kv("xi", cli.xi),
        kv("mu", a.mu),
        kv("lambda", result.lambda),
        kv("iterations", result.iterations),
        kv("residual", result.residual),
    ];
    out.write("lambda.csv", &csv_kv("lambda", &e)?)?;
    let rows = result
        .eigenfunction
        .iter()
        .enumerate()
        .map(|(j, v)| vec![lab.cell.x(j).to_string(), v.to_string()]);
    out.write("eigenfunction.csv", &csv_table("eigenfunction", &["x", "phi"], rows)?)?;
    let text = text_kv("principal spectrum point", &e);
    out.write("lambda.txt", &text)?;
    finish(cli, out, &text, 0)
}

fn speed_entries(sp: &SpeedResult) -> Vec<(String, String)> {
    vec![
        kv("xi", sp.xi),
        kv("c_star", sp.c_star),
        kv("mu_star", sp.mu_star),
        kv("lambda_star", sp.lambda_star),
        kv("bracket_lo", sp.bracket.0),
        kv("bracket_hi", sp.bracket.1),
        kv("samples", sp.samples.len()),
    ]
}

fn cmd_speed(cli: &Cli, a: &SpeedArgs) -> Result<u8> {
    let lab = load(cli, &[])?;
    let out = OutDir::create(&cli.out, cli.force)?;
    let sp = match a.species {
        Some(1) => speeds::single_species_speed(&lab, cli.xi, Species::One)?,
        Some(_) => speeds::single_species_speed(&lab, cli.xi, Species::Two)?,
        None => speeds::linear_speed(&lab, cli.xi)?,
    };
    let rows = sp
        .samples
        .iter()
        .map(|s| vec![s.mu.to_string(), s.lambda.to_string(), s.ratio.to_string()]);
    out.write("speed.csv", &csv_table("speed_samples", &["mu", "lambda", "ratio"], rows)?)?;
    let mut e = speed_entries(&sp);
    e.insert(
        0,
        kv(
            "target",
            match a.species {
                Some(k) => format!("species {k}"),
                None => "a1 - c1 v*".into(),
            },
        ),
    );
    if a.c0 {
        let c0 = speeds::supersolution_c0(&lab, cli.xi, 1e-6)?;
        e.push(kv("c0", c0.c0));
        e.push(kv("c0.residual", c0.residual));
    }
    out.write("speed_summary.csv", &csv_kv("speed_summary", &e)?)?;
    let finite: Vec<(f64, f64)> = sp
        .samples
        .iter()
        .filter(|s| s.ratio.is_finite())
        .map(|s| (s.mu.log2(), s.ratio))
        .collect();
    let lo = finite.first().map_or(0.0, |p| p.0);
    let hi = finite.last().map_or(1.0, |p| p.0);
    let cap = 3.0 * sp.c_star.abs().max(1e-3);
    let plot = Plot {
        title: "lambda(mu)/mu".into(),
        x_label: "log2 mu".into(),
        y_label: "lambda / mu".into(),
        series: vec![
            Series::solid("samples", finite.into_iter().filter(|p| p.1 <= cap).collect()),
            Series::dashed(format!("c* = {:.5}", sp.c_star), vec![(lo, sp.c_star), (hi, sp.c_star)]),
        ],
    };
    out.write("speed.svg", &plot.render())?;
    let text = text_kv("spreading speed", &e);
    out.write("speed.txt", &text)?;
    if !cli.quiet {
        println!(
            "c* = {} at mu* = {}, lambda(mu*) = {}",
            sp.c_star, sp.mu_star, sp.lambda_star
        );
    }
    finish(cli, out, &text, 0)
}

fn cmd_front(cli: &Cli, a: &FrontArgs) -> Result<u8> {
    let mut lab = load(cli, &[])?;
    if let Some(p) = a.periods {
        if p == 0 {
            bail!("--periods must be positive");
        }
        lab.run.periods = p;
    }
    let xi = cli.xi;
    let out = OutDir::create(&cli.out, cli.force)?;
    let sp = speeds::linear_speed(&lab, xi)?;
    let o = lab.orbits()?;
    let run = fronts::run_configured_front(&lab, o, xi, sp.c_star)?;
    let g = &run.grid;
    let cells = g.cell_indices();
    let stride = lab.run.csv_x_stride.max(1);
    let mut rows = Vec::new();
    for (t, st) in run.times.iter().zip(&run.states) {
        for i in (0..g.n).step_by(stride) {
            let vs = o.vstar.interpolate(*t, cells[i]);
            rows.push(vec![
                t.to_string(),
                g.s(i as isize).to_string(),
                st.u[i].to_string(),
                st.v[i].to_string(),
                (vs - st.v[i]).to_string(),
            ]);
        }
    }
    out.write(
        "trajectory.csv",
        &csv_table("trajectory", &["t", "x", "u", "v_transformed", "v_original"], rows)?,
    )?;
    let tracks = fronts::level_tracks(&run, o, &[LEVEL_HIGH, LEVEL_LOW])?;
    let rows = (0..run.times.len()).map(|k| {
        vec![
            run.times[k].to_string(),
            tracks[0].positions[k].to_string(),
            tracks[1].positions[k].to_string(),
        ]
    });
    out.write("levels.csv", &csv_table("levels", &["t", "x_0.99", "x_0.01"], rows)?)?;

    let t_end = run.t_end();
    let line = |slope: f64, icpt: f64| vec![(0.5 * t_end, icpt + slope * 0.5 * t_end), (t_end, icpt + slope * t_end)];
    let pos = |k: usize| run.times.iter().copied().zip(tracks[k].positions.iter().copied()).collect();
    let low = &tracks[1];
    let plot = Plot {
        title: "front position".into(),
        x_label: "t".into(),
        y_label: "x".into(),
        series: vec![
            Series::solid("level 0.99", pos(0)),
            Series::solid("level 0.01", pos(1)),
            Series::dashed(format!("fit 0.99: {:.4}", tracks[0].slope), line(tracks[0].slope, tracks[0].intercept)),
            Series::dashed(format!("fit 0.01: {:.4}", low.slope), line(low.slope, low.intercept)),
            Series::dashed(
                format!("reference c = {:.4}", sp.c_star),
                vec![(0.0, low.intercept), (t_end, low.intercept + sp.c_star * t_end)],
            ),
        ],
    };
    out.write("front.svg", &plot.render())?;

    let mut e = vec![
        kv("xi", xi),
        kv("periods", lab.run.periods),
        kv("t_end", t_end),
        kv("c_bar_inf", sp.c_star),
        kv("mu_star", sp.mu_star),
        kv("family", "empirical over tested family"),
        kv("max_clamp", run.max_clamp),
        kv(
            "behind_gap",
            fronts::behind_front_gap(&run, o, -0.25 * lab.run.half_length, 0.75 * t_end),
        ),
    ];
    let code = match fronts::estimate_interval(&run, o) {
        Ok(est) => {
            e.push(kv("c_low_hat", est.c_low_hat));
            e.push(kv("c_low_r2", est.high_level.r2));
            e.push(kv("c_high_hat", est.c_high_hat));
            e.push(kv("c_high_r2", est.low_level.r2));
            e.push(kv("ordered", est.ordered));
            0
        }
        Err(err) => {
            e.push(kv("estimate.error", &err));
            if front_hyp(&err) {
                2
            } else {
                1
            }
        }
    };
    if a.c0 {
        match speeds::supersolution_c0(&lab, xi, 1e-6) {
            Ok(c) => e.push(kv("c0", c.c0)),
            Err(err) => e.push(kv("c0.error", err)),
        }
    }
    out.write("front_summary.csv", &csv_kv("front_summary", &e)?)?;
    let text = text_kv("front run", &e);
    out.write("front.txt", &text)?;
    finish(cli, out, &text, code)
}

fn cmd_determinacy(cli: &Cli, a: &DeterminacyArgs) -> Result<u8> {
    let lab = load(cli, &[])?;
    let out = OutDir::create(&cli.out, cli.force)?;
    let opts = DeterminacyOptions {
        run_front: !a.no_front,
        ..DeterminacyOptions::default()
    };
    let rep = determinacy::determinacy_verdict(&lab, cli.xi, opts)?;
    let e = rep.entries();
    out.write("determinacy.csv", &csv_kv("determinacy", &e)?)?;
    let text = text_kv("linear determinacy", &e);
    out.write("determinacy.txt", &text)?;
    finish(cli, out, &text, if rep.verdict.is_determinate() { 0 } else { 2 })
}

struct SweepRow {
    value: f64,
    raw: String,
    cells: Vec<String>,
    failure: Option<bool>,
}

fn sweep_one(cli: &Cli, key: &str, raw: &str, verdict: bool) -> Result<Vec<String>> {
    let lab = load(cli, &[format!("{key}={raw}")])?;
    let sp = speeds::linear_speed(&lab, cli.xi)?;
    let mut cells = vec![sp.c_star.to_string(), sp.mu_star.to_string(), sp.lambda_star.to_string()];
    if verdict {
        let opts = DeterminacyOptions {
            run_front: false,
            ..DeterminacyOptions::default()
        };
        let rep = determinacy::determinacy_verdict(&lab, cli.xi, opts)?;
        cells.push(rep.verdict.label().to_string());
    }
    Ok(cells)
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<u8> {
    if a.values.is_empty() {
        bail!("--values needs at least one value");
    }
    let key = if a.param.contains('.') {
        a.param.clone()
    } else {
        format!("params.{}", a.param)
    };
    let mut parsed = Vec::new();
    for v in &a.values {
        let x: f64 = v.trim().parse().with_context(|| format!("sweep value `{v}` is not a number"))?;
        parsed.push((x, v.trim().to_string()));
    }
    let out = OutDir::create(&cli.out, cli.force)?;
    let width = if a.verdict { 4 } else { 3 };
    let mut rows: Vec<SweepRow> = par::map_collect(&parsed, |(x, raw)| match sweep_one(cli, &key, raw, a.verdict) {
        Ok(cells) => SweepRow {
            value: *x,
            raw: raw.clone(),
            cells,
            failure: None,
        },
        Err(e) => SweepRow {
            value: *x,
            raw: raw.clone(),
            cells: vec![String::new(); width],
            failure: Some(is_hypothesis_failure(&e)),
        }
        .with_error(format!("{e:#}")),
    });
    rows.sort_by(|p, q| p.value.total_cmp(&q.value).then_with(|| p.raw.cmp(&q.raw)));
    let mut header = vec![a.param.as_str(), "status", "c_bar_inf", "mu_star", "lambda_star"];
    if a.verdict {
        header.push("verdict");
    }
    header.push("error");
    let code = if rows.iter().any(|r| r.failure == Some(false)) {
        1
    } else if rows.iter().any(|r| r.failure.is_some()) {
        2
    } else {
        0
    };
    let mut text = format!("sweep over {key}\n");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let status = if r.failure.is_some() { "error" } else { "ok" };
            let mut row = vec![r.raw.clone(), status.to_string()];
            row.extend(r.cells.iter().cloned());
            if r.failure.is_none() {
                row.push(String::new());
            }
            text.push_str(&row.join("  "));
            text.push('\n');
            row
        })
        .collect();
    out.write("sweep.csv", &csv_table("sweep", &header, table)?)?;
    out.write("sweep.txt", &text)?;
    finish(cli, out, &text, code)
}

impl SweepRow {
    fn with_error(mut self, msg: String) -> Self {
        self.cells.push(msg);
        self
    }
}
