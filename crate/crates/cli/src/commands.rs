//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use nheavy::estimation::{fit_one_step, fit_two_step, FitConfig, FitMethod, FitResult, TwoStepInit};
use nheavy::evaluation::{
    rmse_harness, rolling_backtest, write_rmse_csv, BacktestConfig, BacktestReport, ForecastModel, NheavyCoefficients,
    Protocol, RmseDesign,
};
use nheavy::model::{
    check_stationarity, fmt_f64, simulate_nheavy_with, InnovationSpec, NheavyParams, PanelSeries, DEFAULT_BURN_IN,
};
use nheavy::network::{
    density, normalize, read_edge_csv, write_edge_csv, AdjacencyMatrix, NetworkKind, NormalizedNetwork,
};
use nheavy::realized::{
    add_noise_with, build_panel, simulate_diffusion_with, simulate_pipeline_with, write_intraday_csv, DiffusionSpec,
    PipelineSpec, RmEstimator,
};
use nheavy::rng::{purpose, replication_rng};

use crate::{manifest, ConvergenceError, UsageError};

const SEED_ENV: &str = "NHEAVY_SEED";

/// `println!` that returns write errors instead of panicking, so a closed
/// pipe ends the command quietly.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

// ---------------------------------------------------------------------------
// shared helpers

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read config {}: {e}", path.display())),
    };
    serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
}

/// Flag, then config, then `NHEAVY_SEED`, then zero.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")).into()),
        Err(_) => Ok(0),
    }
}

fn open_in(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes to `path`, or to stdout when it is absent.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush().with_context(|| format!("writing {}", p.display()))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_panel(path: &Path) -> Result<PanelSeries> {
    Ok(PanelSeries::read_csv(open_in(path)?, &path.display().to_string())?)
}

fn read_network(path: &Path, n: usize) -> Result<NormalizedNetwork> {
    let a = read_edge_csv(open_in(path)?, Some(n), &path.display().to_string())?;
    Ok(normalize(&a))
}

/// Manifest goes to `explicit`, else next to `primary`; nothing is written
/// when the primary output is stdout and no path was given.
fn emit_manifest<C: Serialize>(
    explicit: Option<&Path>,
    primary: Option<&Path>,
    command: &str,
    config: &C,
    seeds: Value,
    outputs: &[&Path],
) -> Result<()> {
    let target = match (explicit, primary) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => manifest::sidecar_path(p),
        (None, None) => return Ok(()),
    };
    manifest::write(&target, command, config, seeds, outputs)
}

fn parse_enum<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.replace('-', "_")))
        .map_err(|_| UsageError(format!("unknown {what} `{s}`")).into())
}

// ---------------------------------------------------------------------------
// gen-network

#[derive(Debug, Args)]
pub struct GenNetworkArgs {
    /// Generator: dyad, powerlaw or sbm.
    #[arg(long)]
    kind: String,
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Power-law exponent.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Number of blocks.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed (falls back to NHEAVY_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Edge-list CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn gen_network(a: &GenNetworkArgs) -> Result<()> {
    let kind = match a.kind.as_str() {
        "dyad" => NetworkKind::Dyad,
        "powerlaw" => NetworkKind::Powerlaw { alpha: a.alpha },
        "sbm" => NetworkKind::Sbm { k: a.k },
        other => return usage(format!("unknown generator `{other}` (expected dyad, powerlaw or sbm)")),
    };
    let seed = resolve_seed(a.seed, None)?;
    let analytic = kind.expected_density(a.n)?;
    let adj = kind.generate(a.n, seed)?;
    let empirical = density(&adj)?;
    with_output(a.out.as_deref(), |w| Ok(write_edge_csv(&adj, w)?))?;
    let report =
        format!("nd_analytic={} nd_empirical={} edges={}", fmt_f64(analytic), fmt_f64(empirical), adj.edge_count());
    // Keep stdout clean for the CSV when it goes there.
    if a.out.is_some() {
        say!("{report}");
    } else {
        eprintln!("{report}");
    }
    let config = json!({ "kind": kind, "n": a.n, "seed": seed });
    let outs: Vec<&Path> = a.out.iter().map(PathBuf::as_path).collect();
    emit_manifest(a.manifest.as_deref(), a.out.as_deref(), "gen-network", &config, json!({ "seed": seed }), &outs)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
enum NetworkSource {
    /// Edge-list CSV with `n` nodes.
    File {
        path: PathBuf,
        n: usize,
    },
    Generate {
        model: NetworkKind,
        n: usize,
    },
}

impl NetworkSource {
    fn n(&self) -> usize {
        match self {
            NetworkSource::File { n, .. } | NetworkSource::Generate { n, .. } => *n,
        }
    }

    fn load(&self, seed: u64) -> Result<AdjacencyMatrix> {
        match self {
            NetworkSource::File { path, n } => {
                Ok(read_edge_csv(open_in(path)?, Some(*n), &path.display().to_string())?)
            }
            NetworkSource::Generate { model, n } => {
                Ok(model.generate_with(*n, &mut replication_rng(seed, 0, purpose::NETWORK))?)
            }
        }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_m_ticks() -> usize {
    390
}

fn default_kappa() -> f64 {
    0.5
}

fn default_noise_sd() -> f64 {
    0.001
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SimDgp {
    /// Daily multiplicative-error model.
    Direct {
        #[serde(default)]
        innovations: InnovationSpec,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
    /// Intraday diffusion driven by the model, with noise and a realized
    /// measure estimator.
    Pipeline(PipelineSpec),
    /// Constant-volatility diffusion; `tau` drawn from U(0, 1] when omitted.
    Diffusion {
        #[serde(default)]
        tau: Option<Vec<f64>>,
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
        #[serde(default = "default_m_ticks")]
        m_ticks: usize,
        #[serde(default)]
        estimator: RmEstimator,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimOutputs {
    panel: Option<PathBuf>,
    latent: Option<PathBuf>,
    intraday: Option<PathBuf>,
    network: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default)]
    params: Option<NheavyParams>,
    t_len: usize,
    #[serde(default)]
    network: Option<NetworkSource>,
    dgp: SimDgp,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    outputs: SimOutputs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of days.
    #[arg(long)]
    t_len: Option<usize>,
    /// Overrides the configured panel output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg: SimulateConfig = load_config(&a.config)?;
    let seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.seed = Some(seed);
    if let Some(t) = a.t_len {
        cfg.t_len = t;
    }
    if let Some(o) = &a.out {
        cfg.outputs.panel = Some(o.clone());
    }
    let panel_out = cfg.outputs.panel.clone();

    let mut written: Vec<PathBuf> = Vec::new();
    let seeds;
    let dgp = cfg.dgp.clone();
    let panel = match &dgp {
        SimDgp::Diffusion { tau, kappa, noise_sd, m_ticks, estimator } => {
            if cfg.outputs.latent.is_some() {
                return usage("the diffusion generator has no latent states to write");
            }
            let spec = match tau {
                Some(t) => DiffusionSpec { tau: t.clone(), kappa: *kappa, noise_sd: *noise_sd },
                None => {
                    let n = match &cfg.network {
                        Some(src) => src.n(),
                        None => return usage("diffusion needs `tau` or a `network` giving the number of assets"),
                    };
                    let mut rng = replication_rng(seed, 0, purpose::SCALES);
                    DiffusionSpec { kappa: *kappa, noise_sd: *noise_sd, ..DiffusionSpec::draw(n, &mut rng) }
                }
            };
            let clean = simulate_diffusion_with(
                &spec,
                cfg.t_len,
                *m_ticks,
                None,
                &mut replication_rng(seed, 0, purpose::DIFFUSION),
            )?;
            let noisy = add_noise_with(&clean, spec.noise_sd, &mut replication_rng(seed, 0, purpose::NOISE))?;
            if let Some(p) = &cfg.outputs.intraday {
                let mut w = create(p)?;
                write_intraday_csv(&noisy, &mut w)?;
                w.flush()?;
                written.push(p.clone());
            }
            seeds = json!({ "seed": seed, "scales_stream": purpose::SCALES, "diffusion_stream": purpose::DIFFUSION, "noise_stream": purpose::NOISE });
            cfg.dgp = SimDgp::Diffusion {
                tau: Some(spec.tau.clone()),
                kappa: *kappa,
                noise_sd: *noise_sd,
                m_ticks: *m_ticks,
                estimator: *estimator,
            };
            build_panel(&noisy, *estimator)?
        }
        dgp => {
            let Some(params) = cfg.params else {
                return usage("`params` is required for the direct and pipeline generators");
            };
            let Some(src) = &cfg.network else {
                return usage("`network` is required for the direct and pipeline generators");
            };
            if cfg.outputs.intraday.is_some() {
                return usage("intraday output is only available for the diffusion generator");
            }
            let adj = src.load(seed)?;
            if let Some(p) = &cfg.outputs.network {
                let mut w = create(p)?;
                write_edge_csv(&adj, &mut w)?;
                w.flush()?;
                written.push(p.clone());
            }
            let w = normalize(&adj);
            check_params(&params, &w)?;
            let (panel, latent) = match dgp {
                SimDgp::Direct { innovations, burn_in } => {
                    let mut rng = replication_rng(seed, 0, purpose::INNOVATIONS);
                    let s = simulate_nheavy_with(&params, &w, cfg.t_len, innovations, *burn_in, &mut rng)?;
                    (s.panel, s.latent)
                }
                SimDgp::Pipeline(spec) => {
                    let mut rng = replication_rng(seed, 0, purpose::DIFFUSION);
                    let s = simulate_pipeline_with(&params, &w, cfg.t_len, spec, &mut rng)?;
                    (s.panel, s.latent)
                }
                SimDgp::Diffusion { .. } => unreachable!(),
            };
            if let Some(p) = &cfg.outputs.latent {
                let mut f = create(p)?;
                latent.write_csv(&mut f)?;
                f.flush()?;
                written.push(p.clone());
            }
            let stream = if matches!(dgp, SimDgp::Direct { .. }) { purpose::INNOVATIONS } else { purpose::DIFFUSION };
            seeds = json!({ "seed": seed, "network_stream": purpose::NETWORK, "simulation_stream": stream, "theta0": params });
            panel
        }
    };
    with_output(panel_out.as_deref(), |w| Ok(panel.write_csv(w)?))?;
    if let Some(p) = &panel_out {
        written.insert(0, p.clone());
    }
    let outs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    emit_manifest(a.manifest.as_deref(), panel_out.as_deref(), "simulate", &cfg, seeds, &outs)
}

/// Parameter validation with the spectral radius of the implied dynamics in
/// the message.
fn check_params(params: &NheavyParams, w: &NormalizedNetwork) -> Result<()> {
    let report = check_stationarity(params, w);
    match params.validate() {
        Ok(()) if report.stationary => Ok(()),
        Ok(()) => {
            Err(nheavy::Error::NonStationary { spectral_radius: report.spectral_radius, bound: report.bound }.into())
        }
        Err(nheavy::Error::InvalidInput(e)) => Err(nheavy::Error::InvalidInput(format!(
            "{e}; spectral radius of the dynamics {}, Gershgorin bound {}",
            fmt_f64(report.spectral_radius),
            fmt_f64(report.bound)
        ))
        .into()),
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EstimateConfig {
    method: Option<FitMethod>,
    fit: FitConfig,
    init_one_step: Option<NheavyParams>,
    init_two_step: Option<TwoStepInit>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Panel CSV `day,asset,r2,rm`.
    #[arg(long)]
    panel: PathBuf,
    /// Edge-list CSV `src,dst`.
    #[arg(long)]
    network: PathBuf,
    /// one-step or two-step (default one-step).
    #[arg(long)]
    method: Option<String>,
    /// JSON configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fit JSON output.
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn estimate(a: &EstimateArgs, strict: bool) -> Result<()> {
    let mut cfg: EstimateConfig = match &a.config {
        Some(p) => load_config(p)?,
        None => EstimateConfig::default(),
    };
    if let Some(m) = &a.method {
        cfg.method = Some(parse_enum("method", m)?);
    }
    let method = *cfg.method.get_or_insert(FitMethod::OneStep);
    let panel = read_panel(&a.panel)?;
    let w = read_network(&a.network, panel.n())?;
    let fit = match method {
        FitMethod::OneStep => fit_one_step(&panel, &w, cfg.init_one_step.as_ref(), &cfg.fit)?,
        FitMethod::TwoStep => fit_two_step(&panel, &w, cfg.init_two_step.as_ref(), &cfg.fit)?,
    };
    write_json(&a.out, &fit)?;
    print_fit(&fit)?;
    emit_manifest(a.manifest.as_deref(), Some(&a.out), "estimate", &cfg, json!(null), &[a.out.as_path()])?;
    if strict && !fit.converged {
        return Err(ConvergenceError("estimation did not converge".into()).into());
    }
    Ok(())
}

fn print_fit(fit: &FitResult) -> Result<()> {
    say!("method: {}", if fit.method == FitMethod::OneStep { "one-step" } else { "two-step" });
    say!("{:<10} {:>14} {:>14} {:>10}", "parameter", "estimate", "std_error", "t");
    for ((name, est), se) in fit.param_names.iter().zip(fit.estimates()).zip(&fit.std_errors) {
        say!("{name:<10} {est:>14.6e} {se:>14.6e} {:>10.3}", est / se);
    }
    say!("standard errors: {}", fit.se_label);
    say!("qll: returns {:.6e}, rm {:.6e}", fit.qll.returns.value, fit.qll.rm.value);
    say!("kappa2: r {:.4}, rm {:.4}, cross {:.4}", fit.kappa2.r, fit.kappa2.rm, fit.kappa2.cross);
    say!("converged: {}", fit.converged);
    for w in &fit.warnings {
        say!("warning: {w}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// forecast

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Fit JSON written by `estimate`.
    #[arg(long)]
    fit: PathBuf,
    /// Edge-list CSV `src,dst`.
    #[arg(long)]
    network: PathBuf,
    /// Panel CSV; the last day's states are obtained by filtering it.
    #[arg(long, conflicts_with = "state")]
    panel: Option<PathBuf>,
    /// Last-day state CSV `asset,h,mu,rm`.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Largest horizon S.
    #[arg(long)]
    horizon: usize,
    /// Forecast CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Last observed day: `(h_T, μ_T, RM_T)`.
struct LastState {
    h: Vec<f64>,
    mu: Vec<f64>,
    rm: Vec<f64>,
}

fn read_state(path: &Path) -> Result<LastState> {
    let name = path.display().to_string();
    let perr = |line: u64, msg: String| nheavy::Error::Parse { path: name.clone(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open_in(path)?);
    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["asset", "h", "mu", "rm"] {
        return Err(perr(1, "expected header `asset,h,mu,rm`".into()).into());
    }
    let mut rows: Vec<Option<(f64, f64, f64)>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let i: usize = rec[0].parse().map_err(|_| perr(line, format!("bad asset index `{}`", &rec[0])))?;
        let num = |k: usize| -> Result<f64, nheavy::Error> {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(line, format!("bad number `{}`", &rec[k])))
        };
        let v = (num(1)?, num(2)?, num(3)?);
        if rows.len() <= i {
            rows.resize(i + 1, None);
        }
        if rows[i].replace(v).is_some() {
            return Err(perr(line, format!("duplicate asset {i}")).into());
        }
    }
    if rows.is_empty() {
        return Err(nheavy::Error::InvalidInput(format!("{name}: state file has no rows")).into());
    }
    let mut st = LastState { h: vec![], mu: vec![], rm: vec![] };
    for (i, r) in rows.into_iter().enumerate() {
        let (h, mu, rm) =
            r.ok_or_else(|| nheavy::Error::InvalidInput(format!("{name}: missing state for asset {i}")))?;
        st.h.push(h);
        st.mu.push(mu);
        st.rm.push(rm);
    }
    Ok(st)
}

pub fn forecast(a: &ForecastArgs) -> Result<()> {
    let fit: FitResult = serde_json::from_reader(open_in(&a.fit)?)
        .map_err(|e| nheavy::Error::Data(format!("{}: {e}", a.fit.display())))?;
    if a.horizon == 0 {
        return usage("--horizon must be at least 1");
    }
    let (state, w, coef) = match (&a.panel, &a.state) {
        (Some(p), None) => {
            let panel = read_panel(p)?;
            let n = panel.n();
            let w = read_network(&a.network, n)?;
            let coef = NheavyCoefficients::from_fit(&fit, n);
            let lat = coef.filter(&w, &panel, fit.init_rule)?;
            let last = panel.t_len() - 1;
            let st = LastState {
                h: lat.h.row(last).to_vec(),
                mu: lat.mu.row(last).to_vec(),
                rm: panel.rm.row(last).to_vec(),
            };
            (st, w, coef)
        }
        (None, Some(s)) => {
            let st = read_state(s)?;
            let n = st.h.len();
            (st, read_network(&a.network, n)?, NheavyCoefficients::from_fit(&fit, n))
        }
        _ => {
            return Err(
                nheavy::Error::InvalidInput("forecast needs --panel or --state for the last-day state".into()).into()
            )
        }
    };
    if coef.n() != state.h.len() {
        return Err(
            nheavy::Error::InvalidInput(format!("fit has {} assets, state has {}", coef.n(), state.h.len())).into()
        );
    }
    let fc = coef.forecasts(&w, &state.rm, &state.h, &state.mu, a.horizon)?;
    if fc.first().is_some_and(|f| !f.stationary) {
        eprintln!("warning: fitted dynamics are not stationary; forecasts do not converge");
    }
    with_output(a.out.as_deref(), |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["s", "asset", "h_forecast", "mu_forecast"])?;
        for (k, f) in fc.iter().enumerate() {
            for i in 0..f.h.len() {
                wr.write_record([(k + 1).to_string(), i.to_string(), fmt_f64(f.h[i]), fmt_f64(f.mu[i])])?;
            }
        }
        wr.flush()?;
        Ok(())
    })?;
    let config = json!({
        "fit": a.fit, "network": a.network, "panel": a.panel, "state": a.state, "horizon": a.horizon,
    });
    let outs: Vec<&Path> = a.out.iter().map(PathBuf::as_path).collect();
    emit_manifest(a.manifest.as_deref(), a.out.as_deref(), "forecast", &config, json!(null), &outs)
}

// ---------------------------------------------------------------------------
// backtest

fn default_models() -> Vec<ForecastModel> {
    vec![ForecastModel::NheavyOneStep, ForecastModel::NgarchOneStep]
}

fn default_horizon() -> usize {
    1
}

fn default_protocol() -> Protocol {
    Protocol::Rolling
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BacktestFileConfig {
    #[serde(default = "default_models")]
    models: Vec<ForecastModel>,
    #[serde(default)]
    window: Option<usize>,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default = "default_protocol")]
    protocol: Protocol,
    #[serde(default)]
    backtest: BacktestConfig,
}

impl Default for BacktestFileConfig {
    fn default() -> Self {
        Self {
            models: default_models(),
            window: None,
            horizon: default_horizon(),
            protocol: default_protocol(),
            backtest: BacktestConfig::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Panel CSV `day,asset,r2,rm`.
    #[arg(long)]
    panel: PathBuf,
    /// Edge-list CSV `src,dst`.
    #[arg(long)]
    network: PathBuf,
    /// Model to evaluate; repeat for several. One of nheavy-one-step,
    /// nheavy-two-step, ngarch-one-step, ngarch-two-step, perfect-foresight.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Estimation window length in days.
    #[arg(long)]
    window: Option<usize>,
    /// Forecast horizon s.
    #[arg(long)]
    horizon: Option<usize>,
    /// rolling or fixed.
    #[arg(long)]
    protocol: Option<String>,
    /// JSON configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Summary CSV, one row per model.
    #[arg(long)]
    out: PathBuf,
    /// Full reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Per-origin QLIKE CSV `model,origin,target_day,qlike`.
    #[arg(long)]
    per_origin: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn backtest(a: &BacktestArgs, strict: bool) -> Result<()> {
    let mut cfg: BacktestFileConfig = match &a.config {
        Some(p) => load_config(p)?,
        None => BacktestFileConfig::default(),
    };
    if !a.models.is_empty() {
        cfg.models = a.models.iter().map(|m| parse_enum("model", m)).collect::<Result<_>>()?;
    }
    if let Some(v) = a.window {
        cfg.window = Some(v);
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(p) = &a.protocol {
        cfg.protocol = parse_enum("protocol", p)?;
    }
    let Some(window) = cfg.window else {
        return usage("the estimation window must be given by --window or the config");
    };
    let panel = read_panel(&a.panel)?;
    let w = read_network(&a.network, panel.n())?;
    let reports = cfg
        .models
        .iter()
        .map(|m| rolling_backtest(&panel, &w, *m, window, cfg.horizon, cfg.protocol, &cfg.backtest))
        .collect::<nheavy::Result<Vec<BacktestReport>>>()?;

    let mut wr = csv::Writer::from_writer(create(&a.out)?);
    wr.write_record([
        "model",
        "protocol",
        "horizon",
        "window_len",
        "origins",
        "mean_qlike",
        "floor_hits",
        "fit_failures",
        "nonconverged",
    ])?;
    for r in &reports {
        wr.write_record([
            r.model.name().to_string(),
            if r.protocol == Protocol::Rolling { "rolling" } else { "fixed" }.to_string(),
            r.horizon.to_string(),
            r.window_len.to_string(),
            r.origins.to_string(),
            fmt_f64(r.mean),
            r.floor_hits.to_string(),
            r.fit_failures.to_string(),
            r.nonconverged.to_string(),
        ])?;
    }
    wr.flush()?;
    let mut outs = vec![a.out.as_path()];
    if let Some(p) = &a.per_origin {
        let mut wr = csv::Writer::from_writer(create(p)?);
        wr.write_record(["model", "origin", "target_day", "qlike"])?;
        for r in &reports {
            for (o, q) in r.per_origin.iter().enumerate() {
                let target = o + r.window_len - 1 + r.horizon;
                wr.write_record([r.model.name().to_string(), o.to_string(), target.to_string(), fmt_f64(*q)])?;
            }
        }
        wr.flush()?;
        outs.push(p);
    }
    if let Some(p) = &a.json {
        write_json(p, &reports)?;
        outs.push(p);
    }
    for r in &reports {
        say!("{:<18} mean QLIKE {:.6e} over {} origins", r.model.name(), r.mean, r.origins);
    }
    emit_manifest(a.manifest.as_deref(), Some(&a.out), "backtest", &cfg, json!(null), &outs)?;
    let nonconverged: usize = reports.iter().map(|r| r.nonconverged + r.fit_failures).sum();
    if strict && nonconverged > 0 {
        bail!(ConvergenceError(format!("{nonconverged} refits did not converge")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rmse-table

#[derive(Debug, Args)]
pub struct RmseTableArgs {
    /// Design JSON.
    #[arg(long)]
    config: PathBuf,
    /// Seed (falls back to NHEAVY_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Summary CSV, one row per parameter.
    #[arg(long)]
    out: PathBuf,
    /// Full table with every replication as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn rmse_table(a: &RmseTableArgs, strict: bool) -> Result<()> {
    let mut design: RmseDesign = load_config(&a.config)?;
    if let Some(q) = a.reps {
        design.q_reps = q;
    }
    let seed = resolve_seed(a.seed, None)?;
    let table = rmse_harness(&design, seed)?;
    let mut f = create(&a.out)?;
    write_rmse_csv(&table, &mut f)?;
    f.flush()?;
    let mut outs = vec![a.out.as_path()];
    if let Some(p) = &a.json {
        write_json(p, &table)?;
        outs.push(p);
    }
    say!(
        "{} replications used, {} fit errors, {} not converged; ND mean {:.4} (analytic {:.4})",
        table.q_used,
        table.failures,
        table.nonconverged,
        table.nd_mean,
        table.nd_analytic
    );
    for p in &table.parameters {
        say!("{:<10} theta0 {:>12.6e} mean {:>12.6e} rmse {:>12.6e}", p.name, p.theta0, p.mean, p.rmse);
    }
    emit_manifest(a.manifest.as_deref(), Some(&a.out), "rmse-table", &design, json!({ "seed": seed }), &outs)?;
    if strict && table.nonconverged + table.failures > 0 {
        bail!(ConvergenceError(format!("{} replications did not converge", table.nonconverged + table.failures)));
    }
    Ok(())
}
