use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use qsl_core::dynamics::sx_series;
use qsl_core::geometry::{delta_curves, DeltaCurves, PathSource, QslReport};
use qsl_core::ingest::{
    fit_exp_cos, fit_relaxivity, fit_xi_model, load_series, smooth, write_series, ExpCosGuess, FitResult, LmConfig,
    RelaxivityFit, SeriesFormat, XiGuess,
};
use qsl_core::markovianity::{classify, coherence_series, DEFAULT_REVIVAL_THRESHOLD};
use qsl_core::presets;
use qsl_core::state::PHYSICALITY_TOL;
use qsl_core::trotter::{trotter_simulate, STEP_WARN};
use qsl_core::{Error, RelaxationParams, Result, TimeSeries};

use crate::config::RunConfig;
use crate::{AnalyzeArgs, FitArgs, FitModel, ModelArgs, SweepArgs};

fn merge_model_args(mut cfg: RunConfig, a: &ModelArgs) -> Result<RunConfig> {
    if let Some(name) = &a.preset {
        cfg.params = presets::lookup(name)?.params();
    }
    let p = &mut cfg.params;
    p.t1h = a.t1h.unwrap_or(p.t1h);
    p.t2c = a.t2c.unwrap_or(p.t2c);
    p.j = a.j.unwrap_or(p.j);
    cfg.initial_state.x0 = a.x0.unwrap_or(cfg.initial_state.x0);
    cfg.initial_state.z0 = a.z0.unwrap_or(cfg.initial_state.z0);
    cfg.grid.t_max = a.t_max.unwrap_or(cfg.grid.t_max);
    cfg.grid.n_points = a.points.unwrap_or(cfg.grid.n_points);
    cfg.quadrature.rel_tol = a.rel_tol.unwrap_or(cfg.quadrature.rel_tol);
    cfg.quadrature.abs_tol = a.abs_tol.unwrap_or(cfg.quadrature.abs_tol);
    if a.out.is_some() {
        cfg.output_dir = a.out.clone();
    }
    Ok(cfg)
}

fn apply_model_args(cfg: RunConfig, a: &ModelArgs) -> Result<RunConfig> {
    let cfg = merge_model_args(cfg, a)?;
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn simulate(base: RunConfig, args: &ModelArgs) -> Result<()> {
    let cfg = apply_model_args(base, args)?;
    let out = prepare_out(&cfg.resolve_output_dir())?;
    let b0 = cfg.initial_state()?;
    let times = cfg.times();
    let sx = sx_series(times.clone(), &b0, &cfg.params)?.with_label("sx");

    // fine trotter grid that lands on every output point
    let intervals = times.len() - 1;
    let per_interval = ((cfg.params.j * cfg.grid.t_max / (0.2 * STEP_WARN)) / intervals as f64)
        .ceil()
        .max(1.0) as usize;
    let trotter = trotter_simulate(cfg.grid.t_max, intervals * per_interval, &b0, &cfg.params)?;
    let sampled = trotter.sx.values().iter().step_by(per_interval).copied().collect();
    let sx_trotter = TimeSeries::new(times, sampled, "sx_trotter")?;

    let coherence = coherence_series(&sx)?;
    write_series(out.join("sx.csv"), &sx)?;
    write_series(out.join("sx_trotter.csv"), &sx_trotter)?;
    write_series(out.join("coherence.csv"), &coherence)?;

    let max_dev = sx
        .values()
        .iter()
        .zip(sx_trotter.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "simulated {} points to t = {} s; max |trotter - closed form| = {max_dev:.3e}; wrote {}",
        sx.len(),
        cfg.grid.t_max,
        out.display()
    );
    Ok(())
}

fn write_analysis(out: &Path, curves: &DeltaCurves, report: &QslReport) -> Result<()> {
    write_series(out.join("delta_qfi.csv"), &curves.delta_series(qsl_core::geometry::MetricKind::Qfi)?)?;
    write_series(out.join("delta_wy.csv"), &curves.delta_series(qsl_core::geometry::MetricKind::Wy)?)?;
    write_series(out.join("delta_diff.csv"), &curves.difference_series()?)?;
    write_json(&out.join("report.json"), report)
}

fn check_physical_series(series: &TimeSeries, z0: f64) -> Result<()> {
    if let Some((t, x)) = series.iter().find(|(_, x)| x * x + z0 * z0 > 1.0 + PHYSICALITY_TOL) {
        return Err(Error::Data(format!(
            "sample at t = {t} (x = {x}) with z0 = {z0} lies outside the Bloch ball"
        )));
    }
    Ok(())
}

pub fn analyze(base: RunConfig, args: &AnalyzeArgs) -> Result<()> {
    let mut cfg = merge_model_args(base, &args.model)?;
    let input = match &args.input {
        Some(path) => {
            let raw = load_series(path, SeriesFormat::from_path(path))?;
            if args.model.x0.is_some() {
                log::warn!("--x0 ignored: the initial x comes from the input series");
            }
            check_physical_series(&raw, cfg.initial_state.z0)?;
            cfg.initial_state.x0 = raw.values()[0];
            Some(raw)
        }
        None => None,
    };
    cfg.smoothing.window = args.smooth_window.unwrap_or(cfg.smoothing.window);
    cfg.smoothing.degree = args.smooth_degree.unwrap_or(cfg.smoothing.degree);
    cfg.crossover_noise_floor = args.noise_floor.unwrap_or(cfg.crossover_noise_floor);
    cfg.validate()?;
    let quad = cfg.quad();
    let out = prepare_out(&cfg.resolve_output_dir())?;

    let (curves, verdict) = match input {
        None => {
            let b0 = cfg.initial_state()?;
            let times = cfg.times();
            let curves = delta_curves(&PathSource::model(cfg.params, b0), &times, &quad)?;
            let sx = sx_series(times, &b0, &cfg.params)?;
            (curves, classify(&sx, args.revival_threshold))
        }
        Some(raw) => {
            let series = if args.no_smooth {
                raw
            } else {
                smooth(&raw, cfg.smoothing.window, cfg.smoothing.degree)?
            };
            let z0 = cfg.initial_state.z0;
            check_physical_series(&series, z0)?;
            let curves = delta_curves(&PathSource::data(&series, z0), series.times(), &quad)?;
            (curves, classify(&series, args.revival_threshold))
        }
    };
    let verdict = match verdict {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("markovianity verdict unavailable: {e}");
            None
        }
    };
    let report = QslReport::from_curves(&curves, cfg.crossover_noise_floor, verdict)?;
    report.validate(10.0 * cfg.quadrature.rel_tol)?;
    write_analysis(&out, &curves, &report)?;
    println!(
        "delta_QFI = {}, delta_WY = {} at tau = {} s; {} crossovers; wrote {}",
        fmt_opt(report.qfi.delta),
        fmt_opt(report.wy.delta),
        report.tau,
        report.crossover_times.len(),
        out.display()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.6}"))
}

pub fn fit(base: RunConfig, args: &FitArgs) -> Result<()> {
    let series = load_series(&args.input, SeriesFormat::from_path(&args.input))?;
    let out_dir = args
        .out
        .clone()
        .or(base.output_dir.clone())
        .unwrap_or_else(|| base.resolve_output_dir());
    let out = prepare_out(&out_dir)?;
    let first = series.values().first().copied().unwrap_or(1.0);
    let mut lm = LmConfig::default();
    if let Some(n) = args.max_iterations {
        lm.max_iterations = n;
    }
    let result = match args.model {
        FitModel::Expcos => {
            let auto = ExpCosGuess::from_series(&series)?;
            let guess = ExpCosGuess {
                m0: args.amplitude.unwrap_or(auto.m0),
                t2c: args.t2c.unwrap_or(auto.t2c),
                omega: args.omega.unwrap_or(auto.omega),
            };
            fit_exp_cos(&series, &guess, &lm)
        }
        FitModel::Xi => {
            let j = args.fix_j.or(args.j).unwrap_or(base.params.j);
            let params = RelaxationParams::new(
                args.t1h.unwrap_or(base.params.t1h),
                args.t2c.unwrap_or(base.params.t2c),
                j,
            )
            .map_err(|e| Error::Parameter(format!("initial guess: {e}")))?;
            let guess = XiGuess {
                amplitude: args.amplitude.unwrap_or(first),
                params,
                fix_j: args.fix_j.is_some(),
                omega_off: args.omega_off,
            };
            fit_xi_model(&series, &guess, &lm)
        }
    };
    let emit = |fit: &FitResult| -> Result<()> {
        write_json(&out.join("fit.json"), fit)?;
        let text = serde_json::to_string_pretty(fit).map_err(|e| Error::Data(e.to_string()))?;
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "{text}")?;
        Ok(())
    };
    match result {
        Ok(fit) => emit(&fit),
        Err(Error::FitNotConverged { iterations, best }) => {
            emit(&best)?;
            Err(Error::FitNotConverged { iterations, best })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    preset: String,
    concentration_mm: f64,
    t1h_s: f64,
    t2c_s: f64,
    j_hz: f64,
    status: &'static str,
    verdict: Option<&'static str>,
    delta_qfi: Option<f64>,
    delta_wy: Option<f64>,
    n_crossovers: Option<usize>,
    last_crossover_s: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RelaxivityOutput {
    concentrations_mm: Vec<f64>,
    rates_per_s: Vec<f64>,
    fit: RelaxivityFit,
}

fn sweep_one(cfg: &RunConfig, preset: &presets::Preset) -> Result<QslReport> {
    let b0 = cfg.initial_state()?;
    let p = preset.params();
    let times = cfg.times();
    let curves = delta_curves(&PathSource::model(p, b0), &times, &cfg.quad())?;
    let verdict = classify(&sx_series(times, &b0, &p)?, DEFAULT_REVIVAL_THRESHOLD)?;
    let report = QslReport::from_curves(&curves, cfg.crossover_noise_floor, Some(verdict))?;
    report.validate(10.0 * cfg.quadrature.rel_tol)?;
    Ok(report)
}

pub fn sweep(base: RunConfig, args: &SweepArgs) -> Result<()> {
    let mut cfg = base;
    cfg.grid.t_max = args.t_max.unwrap_or(cfg.grid.t_max);
    cfg.grid.n_points = args.points.unwrap_or(cfg.grid.n_points);
    cfg.crossover_noise_floor = args.noise_floor.unwrap_or(cfg.crossover_noise_floor);
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    cfg.validate()?;

    let mut selected = Vec::new();
    let mut seen = HashSet::new();
    for name in args.presets.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let preset = presets::lookup(name)?;
        if !seen.insert(preset.name) {
            return Err(Error::Parameter(format!("preset '{}' listed more than once", preset.name)));
        }
        selected.push(preset);
    }
    if selected.is_empty() {
        return Err(Error::Parameter("no presets given".into()));
    }
    selected.sort_by(|a, b| a.concentration_mm.total_cmp(&b.concentration_mm).then(a.name.cmp(b.name)));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Parameter("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<QslReport>> = pool.install(|| selected.par_iter().map(|p| sweep_one(&cfg, p)).collect());

    let out = prepare_out(&cfg.resolve_output_dir())?;
    let rows: Vec<SweepRow> = selected
        .iter()
        .zip(results)
        .map(|(p, r)| {
            let mut row = SweepRow {
                preset: p.name.to_string(),
                concentration_mm: p.concentration_mm,
                t1h_s: p.t1h,
                t2c_s: p.t2c,
                j_hz: p.j,
                status: "ok",
                verdict: None,
                delta_qfi: None,
                delta_wy: None,
                n_crossovers: None,
                last_crossover_s: None,
                error: None,
            };
            match r {
                Ok(report) => {
                    row.verdict = report.markovianity.as_ref().map(|v| {
                        if v.is_non_markovian {
                            "nonMarkovian"
                        } else {
                            "Markovian"
                        }
                    });
                    row.delta_qfi = report.qfi.delta;
                    row.delta_wy = report.wy.delta;
                    row.n_crossovers = Some(report.crossover_times.len());
                    row.last_crossover_s = report.crossover_times.last().copied();
                }
                Err(e) => {
                    log::warn!("preset {} failed: {e}", p.name);
                    row.status = "failed";
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();

    write_summary_csv(&out.join("summary.csv"), &rows)?;
    write_json(&out.join("summary.json"), &rows)?;

    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let concentrations: Vec<f64> = ok.iter().map(|r| r.concentration_mm).collect();
    let rates: Vec<f64> = ok.iter().map(|r| 1.0 / r.t1h_s).collect();
    match fit_relaxivity(&concentrations, &rates) {
        Ok(fit) => write_json(
            &out.join("relaxivity.json"),
            &RelaxivityOutput {
                concentrations_mm: concentrations,
                rates_per_s: rates,
                fit,
            },
        )?,
        Err(e) => log::info!("no relaxivity fit: {e}"),
    }

    let mut stdout = std::io::stdout().lock();
    for r in &rows {
        writeln!(
            stdout,
            "{:<12} {:>6} mM  {:<7} {}",
            r.preset,
            r.concentration_mm,
            r.status,
            r.verdict.unwrap_or("-")
        )?;
    }
    Ok(())
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

fn write_summary_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text = String::from(
        "preset,concentration_mm,t1h_s,t2c_s,j_hz,status,verdict,delta_qfi,delta_wy,n_crossovers,last_crossover_s,error\n",
    );
    for r in rows {
        let error = r.error.as_deref().unwrap_or("").replace('"', "'");
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},\"{}\"\n",
            r.preset,
            r.concentration_mm,
            r.t1h_s,
            r.t2c_s,
            r.j_hz,
            r.status,
            r.verdict.unwrap_or(""),
            opt(&r.delta_qfi),
            opt(&r.delta_wy),
            opt(&r.n_crossovers),
            opt(&r.last_crossover_s),
            error
        ));
    }
    fs::write(path, text)?;
    Ok(())
}
