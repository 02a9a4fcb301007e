use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use frap_core::config::RunConfig;
use frap_core::frap::{
    frap_fit, frap_simulate, posterior_predictive_panel, predict_trend, scale_statistics_panel,
};
use frap_core::hier::{dic, hier_fit};
use frap_core::hurst::{fit_hurst_dfa, fit_hurst_rs, HurstFit, ScaleGrid};
use frap_core::io::{
    load_panel, load_samples, save_json, save_panel, save_samples, write_membership, write_panel,
    write_scale_table, RunManifest,
};
use frap_core::longmem::simulate_fgn;
use frap_core::mcmc::ess;
use frap_core::mmpp::{mmpp_fit as fit_mmpp, mmpp_simulate, MmppFit};
use frap_core::rng::seeded;
use frap_core::{BinaryPanel, HurstCoeff, MmppParams, TimeGrid};
use serde_json::json;

use crate::{
    CheckArgs, Common, DiagArgs, FitArgs, FitHierArgs, HurstArgs, MmppFitArgs, ModelKind, PredictArgs,
    SimulateArgs,
};

fn output_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.io.output.as_ref().map(PathBuf::from))
}

fn input_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.io.input.as_ref().map(PathBuf::from))
        .ok_or_else(|| anyhow!("no input: pass --input or set io.input"))
}

fn required_output(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    output_path(flag, cfg).ok_or_else(|| anyhow!("no output: pass --output or set io.output"))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn manifest_for(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the manifest next to `output`, or to `--manifest`. Runs that print to
/// stdout only get one when `--manifest` is given.
fn finish(
    command: &str,
    cfg: &RunConfig,
    common: &Common,
    outputs: &[&Path],
    results: serde_json::Value,
) -> Result<()> {
    let path = match (&common.manifest, outputs.first()) {
        (Some(p), _) => p.clone(),
        (None, Some(o)) => manifest_for(o),
        (None, None) => return Ok(()),
    };
    let mut m = RunManifest::new(command, cfg.mcmc.seed, cfg)?;
    m.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    m.results = results;
    m.save(&path)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn read_panel_file(path: &Path, cfg: &RunConfig) -> Result<BinaryPanel> {
    load_panel(path, Some(cfg.model.delta)).with_context(|| format!("loading panel {}", path.display()))
}

pub fn simulate(a: &SimulateArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let out = required_output(&a.output, cfg)?;
    let mut rng = seeded(cfg.mcmc.seed);
    let h = HurstCoeff::new(a.hurst)?;
    let results = match a.model {
        ModelKind::Frap => {
            let grid = TimeGrid::new(0.0, cfg.model.delta, a.n)?;
            let f = a.trend.on_grid(&grid);
            let panel = frap_simulate(&grid, &f, h, a.tau, a.replicates, &mut rng)?;
            save_panel(&out, &panel)?;
            json!({"model": "frap", "trend": a.trend, "H": a.hurst, "tau": a.tau,
                   "rows": panel.replicates(), "cols": panel.intervals(),
                   "event_rate": panel.event_rate()})
        }
        ModelKind::Mmpp => {
            let p = MmppParams::two_state(a.mmpp[0], a.mmpp[1], a.mmpp[2], a.mmpp[3])?;
            let rows = (0..a.replicates)
                .map(|_| mmpp_simulate(&p, a.n, cfg.model.delta, &mut rng))
                .collect::<frap_core::Result<Vec<_>>>()?;
            write_panel(File::create(&out)?, &rows)?;
            json!({"model": "mmpp", "params": p, "rows": rows.len(), "cols": a.n})
        }
        ModelKind::Fgn => {
            let x = simulate_fgn(a.n, h, cfg.mcmc.seed)?;
            let mut w = sink(Some(&out))?;
            for v in x.iter() {
                writeln!(w, "{v}")?;
            }
            w.flush()?;
            json!({"model": "fgn", "H": a.hurst, "len": a.n})
        }
    };
    finish("simulate", cfg, common, &[&out], results)
}

pub fn fit(a: &FitArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let panel = read_panel_file(&input_path(&a.input, cfg)?, cfg)?;
    let out = required_output(&a.output, cfg)?;
    let mut rng = seeded(cfg.mcmc.seed);
    let s = frap_fit(
        &panel,
        &cfg.frap_priors(),
        &cfg.gp_hyper(),
        &cfg.mcmc_config(),
        &mut rng,
    )?;
    save_samples(&out, &s)?;
    let (lo, hi) = s.hurst_interval(0.95);
    let results = json!({
        "draws": s.len(),
        "mean_hurst": s.mean_hurst(),
        "hurst_interval_95": [lo, hi],
        "diagnostics": s.diagnostics,
    });
    finish("fit", cfg, common, &[&out], results)
}

pub fn fit_hier(a: &FitHierArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let panels = a
        .input
        .iter()
        .map(|p| read_panel_file(p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let k = a.classes.unwrap_or(cfg.model.classes);
    std::fs::create_dir_all(&a.out_dir)?;
    let mut rng = seeded(cfg.mcmc.seed);
    let s = hier_fit(
        &panels,
        k,
        &cfg.hier_priors(),
        &cfg.gp_hyper(),
        &cfg.mcmc_config(),
        &mut rng,
    )?;
    let report = dic(&s, &panels, &cfg.dic_options())?;

    let samples = a.out_dir.join("samples.json");
    let dic_path = a.out_dir.join("dic.json");
    let omega = a.out_dir.join("membership.csv");
    save_json(&samples, &s)?;
    save_json(&dic_path, &report)?;
    write_membership(File::create(&omega)?, &s.mean_omega())?;

    let (lo, hi) = s.hurst_interval(0.95);
    let results = json!({
        "classes": k,
        "species": s.species,
        "draws": s.len(),
        "mean_hurst": s.mean_hurst(),
        "hurst_interval_95": [lo, hi],
        "dic": report,
        "beta_acceptance": s.beta_acceptance,
        "eta_acceptance": s.eta_acceptance,
    });
    let manifest = common
        .manifest
        .clone()
        .unwrap_or_else(|| a.out_dir.join("manifest.json"));
    let common = Common {
        manifest: Some(manifest),
        ..common.clone()
    };
    finish("fit-hier", cfg, &common, &[&samples, &dic_path, &omega], results)
}

fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>()
                .with_context(|| format!("value {} is not a number: {t:?}", i + 1))
        })
        .collect()
}

pub fn hurst(a: &HurstArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let x = read_series(&a.input)?;
    let grid = match &a.scales {
        Some(s) => ScaleGrid::new(s.clone(), x.len())?,
        None => ScaleGrid::default_for(x.len())?,
    };
    let rs = fit_hurst_rs(&x, &grid)?;
    let dfa = fit_hurst_dfa(&x, &grid, a.degree)?;
    let out = output_path(&a.output, cfg);
    let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
    w.write_record(["method", "scale", "statistic", "slope", "intercept"])?;
    let mut emit = |name: &str, f: &HurstFit| -> Result<()> {
        for (s, v) in f.scales.iter().zip(&f.statistics) {
            w.write_record([
                name,
                &s.to_string(),
                &v.to_string(),
                &f.slope.to_string(),
                &f.intercept.to_string(),
            ])?;
        }
        Ok(())
    };
    emit("rs", &rs)?;
    emit("dfa", &dfa)?;
    w.flush()?;
    drop(w);
    let outputs: Vec<&Path> = out.as_deref().into_iter().collect();
    let results = json!({"len": x.len(), "rs_hurst": rs.slope, "dfa_hurst": dfa.slope, "degree": a.degree});
    finish("hurst", cfg, common, &outputs, results)
}

pub fn mmpp_fit(a: &MmppFitArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let panel = read_panel_file(&input_path(&a.input, cfg)?, cfg)?;
    let out = required_output(&a.output, cfg)?;
    let k = a.states.unwrap_or(cfg.model.mmpp_states);
    let fit = fit_mmpp(&panel, k, &cfg.mmpp_options())?;
    save_json(&out, &fit)?;
    let results = json!({"states": k, "loglik": fit.loglik, "converged": fit.converged});
    finish("mmpp-fit", cfg, common, &[&out], results)
}

pub fn predict(a: &PredictArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let s = load_samples(&a.samples).with_context(|| format!("loading samples {}", a.samples.display()))?;
    let grid = s.grid;
    let points = a.points.clone().unwrap_or_else(|| {
        (0..=2 * grid.n)
            .map(|i| grid.t0 + 0.5 * i as f64 * grid.delta)
            .collect()
    });
    let mut rng = seeded(cfg.mcmc.seed);
    let pred = predict_trend(&s, &grid.points(), &points, &mut rng)?;
    let mean = pred.mean();
    let (lo, hi) = pred.bands(a.level);
    let out = output_path(&a.output, cfg);
    let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
    w.write_record(["t", "mean", "lower", "upper"])?;
    for i in 0..points.len() {
        w.write_record([points[i], mean[i], lo[i], hi[i]].map(|v| v.to_string()))?;
    }
    w.flush()?;
    drop(w);
    let outputs: Vec<&Path> = out.as_deref().into_iter().collect();
    finish(
        "predict",
        cfg,
        common,
        &outputs,
        json!({"points": points.len(), "level": a.level}),
    )
}

pub fn check(a: &CheckArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let s = load_samples(&a.samples).with_context(|| format!("loading samples {}", a.samples.display()))?;
    let mut rng = seeded(cfg.mcmc.seed);
    let mut rows = Vec::new();
    if let Some(p) = a
        .input
        .clone()
        .or_else(|| cfg.io.input.as_ref().map(PathBuf::from))
    {
        let panel = read_panel_file(&p, cfg)?;
        if panel.intervals() != s.intervals() {
            bail!(
                "panel has {} intervals, samples {}",
                panel.intervals(),
                s.intervals()
            );
        }
        for st in scale_statistics_panel(panel.rows(), &a.scales)? {
            rows.push(("data".to_string(), st));
        }
    }
    let pred = posterior_predictive_panel(&s, &mut rng)?;
    for st in scale_statistics_panel(&pred, &a.scales)? {
        rows.push(("frap".to_string(), st));
    }
    if let Some(p) = &a.mmpp {
        let fit: MmppFit =
            serde_json::from_reader(File::open(p).with_context(|| format!("opening {}", p.display()))?)?;
        let sim = (0..pred.len())
            .map(|_| mmpp_simulate(&fit.params, s.intervals(), s.grid.delta, &mut rng))
            .collect::<frap_core::Result<Vec<_>>>()?;
        for st in scale_statistics_panel(&sim, &a.scales)? {
            rows.push(("mmpp".to_string(), st));
        }
    }
    let out = output_path(&a.output, cfg);
    write_scale_table(sink(out.as_deref())?, &rows)?;
    let outputs: Vec<&Path> = out.as_deref().into_iter().collect();
    finish(
        "check",
        cfg,
        common,
        &outputs,
        json!({"scales": a.scales, "predictive_rows": pred.len()}),
    )
}

pub fn diag(a: &DiagArgs, cfg: &RunConfig, common: &Common) -> Result<()> {
    let s = load_samples(&a.samples).with_context(|| format!("loading samples {}", a.samples.display()))?;
    let lag = cfg.mcmc.ess_max_lag;
    let ess_h = ess(&s.hurst, lag)?;
    let ess_tau = ess(&s.tau, lag)?;
    // Acceptance rates live in the fit manifest, not the samples CSV.
    let fit_manifest = manifest_for(&a.samples);
    let acceptance = RunManifest::load(&fit_manifest)
        .ok()
        .and_then(|m| m.results.get("diagnostics").cloned());
    let report = json!({
        "draws": s.len(),
        "max_lag": lag,
        "ess_hurst": ess_h,
        "ess_tau": ess_tau,
        "diagnostics": acceptance,
    });
    let out = output_path(&a.output, cfg);
    let mut w = sink(out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    drop(w);
    let outputs: Vec<&Path> = out.as_deref().into_iter().collect();
    finish("diag", cfg, common, &outputs, report)
}
