//! Subcommands of the `lhv` binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kaon_core::decay::{contamination_histogram, max_window_end, misid_budget, TaggingWindow};
use kaon_core::lhv::{construct_evading_lhv, hardy_constraint_check};
use kaon_core::montecarlo::{falsification_verdict, EventSampler, Source};
use kaon_core::pair::{build_phi_strangeness_basis, entropy_surface};
use kaon_core::qm::{
    ch_margin, measured_probabilities, qm_probability_set, threshold_ch, threshold_falsification,
};
use kaon_core::{ComplexAmplitude, DetectionModel, PhysicalConstants};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config;
use crate::events;
use crate::output::{emit, fmt_num, json_to_kv, to_json, Format, RunManifest, Table};

/// Misidentification rates quoted for the (10, 21) τ_S window, used by
/// `thresholds` when neither a window nor explicit rates are given.
pub const REFERENCE_M_S: f64 = 7.3e-4;
pub const REFERENCE_M_L: f64 = 5.7e-5;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "lhv",
    version,
    about = "Entangled neutral kaons: entropy, Hardy/CH tests and local hidden-variable models"
)]
pub struct Cli {
    /// Constants file (TOML); defaults to the shipped PDG values.
    #[arg(long, global = true)]
    pub constants: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    #[serde(skip)]
    pub format: Format,
    /// Output file; the run manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Print the constants with provenance.
    Constants,
    /// Entropy of the reduced state over a grid of complex R.
    EntropySurface(SurfaceArgs),
    /// K_L → ππ over K_S → ππ decays per time bin.
    Fig2(Fig2Args),
    /// Misidentification budget of a tagging window.
    Budget(BudgetArgs),
    /// Efficiency thresholds for falsification and for the CH-like test.
    Thresholds(RateArgs),
    /// Joint probabilities, the CH-like margin and thresholds.
    Probabilities(ProbabilityArgs),
    /// Generate events from quantum mechanics or the evading LHV model.
    Simulate(SimulateArgs),
    /// Verdict from an event file.
    Verdict(VerdictArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SurfaceArgs {
    /// Re R range `min:max`.
    #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
    pub re_range: String,
    /// Im R range `min:max`.
    #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
    pub im_range: String,
    /// Points per axis.
    #[arg(long, default_value_t = kaon_core::pair::DEFAULT_SURFACE_GRID)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct Fig2Args {
    /// `start:end:width` in τ_S.
    #[arg(long, default_value = "18:23:1")]
    pub bins: String,
}

#[derive(Debug, Args, Serialize)]
pub struct BudgetArgs {
    /// Tagging window `t0:t1` in τ_S.
    #[arg(long, default_value = "10:21")]
    pub window: String,
    /// Contamination cap for the latest window end.
    #[arg(long, default_value_t = 0.5)]
    pub cap: f64,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct RateArgs {
    /// Tagging window `t0:t1`; m_S and m_L are computed from it unless given.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub m_s: Option<f64>,
    #[arg(long)]
    pub m_l: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbabilityArgs {
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Defaults to `--eta`.
    #[arg(long)]
    pub eta_prime: Option<f64>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub r_re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub r_im: f64,
    #[command(flatten)]
    pub rates: RateArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Qm,
    Evading,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SourceKind::Qm)]
    pub source: SourceKind,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub eta_prime: Option<f64>,
    /// Number of events; accepts `1e6`.
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    pub events: u64,
    /// Worker threads; the output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the event stream here.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
    #[command(flatten)]
    pub rates: RateArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VerdictArgs {
    /// Event file written by `simulate --events-out`.
    pub events_file: PathBuf,
    #[command(flatten)]
    pub rates: RateArgs,
}

pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a count: `{s}`"))?;
    if !(x >= 0.0) || x.fract() != 0.0 || x > 9.0e15 {
        return Err(format!("not a non-negative integer: `{s}`"));
    }
    Ok(x as u64)
}

fn parse_fields<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != N {
        bail!("{what} `{s}`: expected {N} colon-separated numbers");
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .trim()
            .parse()
            .with_context(|| format!("{what} `{s}`: bad number `{p}`"))?;
    }
    Ok(out)
}

pub fn parse_window(s: &str) -> Result<TaggingWindow> {
    let [t0, t1] = parse_fields::<2>(s, "window")?;
    Ok(TaggingWindow::new(t0, t1)?)
}

/// Window plus m_S, m_L: explicit flags win, then the window's budget.
/// `fallback` supplies rates when neither is given.
fn resolve_rates(
    r: &RateArgs,
    c: &PhysicalConstants,
    fallback: Option<(f64, f64)>,
) -> Result<(TaggingWindow, f64, f64, &'static str)> {
    let window = match &r.window {
        Some(w) => parse_window(w)?,
        None => TaggingWindow::standard(),
    };
    let budget = misid_budget(&window, c);
    let (mut m_s, mut m_l, mut origin) = (budget.m_s, budget.m_l, "window");
    if r.window.is_none() {
        if let Some((s, l)) = fallback {
            (m_s, m_l, origin) = (s, l, "reference");
        }
    }
    if let Some(s) = r.m_s {
        m_s = s;
        origin = "flags";
    }
    if let Some(l) = r.m_l {
        m_l = l;
        origin = "flags";
    }
    Ok((window, m_s, m_l, origin))
}

fn params(cli: &Cli) -> Map<String, Value> {
    match serde_json::to_value(cli) {
        Ok(Value::Object(mut m)) => {
            m.insert(
                "format".into(),
                json!(format!("{:?}", cli.format).to_lowercase()),
            );
            m
        }
        _ => Map::new(),
    }
}

fn render(v: Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&v).expect("json") + "\n",
        Format::Csv => json_to_kv(&v).to_csv(),
    }
}

fn render_table(t: &Table, json_rows: Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&json_rows).expect("json") + "\n",
        Format::Csv => t.to_csv(),
    }
}

fn workers_default() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Runs one invocation, writing its output and manifest.
pub fn run(cli: Cli) -> Result<()> {
    let c = config::load(cli.constants.as_deref())?;
    let fingerprint = config::fingerprint(&c);
    let f = cli.format;
    let mut seed = None;
    let (name, body) = match &cli.command {
        Command::Constants => ("constants", cmd_constants(&c, &fingerprint, f)),
        Command::EntropySurface(a) => ("entropy-surface", cmd_entropy_surface(a, f)?),
        Command::Fig2(a) => ("fig2", cmd_fig2(a, &c, f)?),
        Command::Budget(a) => ("budget", cmd_budget(a, &c, f)?),
        Command::Thresholds(a) => ("thresholds", cmd_thresholds(a, &c, f)?),
        Command::Probabilities(a) => ("probabilities", cmd_probabilities(a, &c, f)?),
        Command::Simulate(a) => {
            let s = cli.seed.unwrap_or(0);
            seed = Some(s);
            ("simulate", cmd_simulate(a, &c, s, f)?)
        }
        Command::Verdict(a) => ("verdict", cmd_verdict(a, &c, f)?),
    };
    let manifest = RunManifest::new(name, params(&cli), fingerprint, seed);
    emit(&body, cli.out.as_deref(), &manifest)?;
    Ok(())
}

pub fn cmd_constants(c: &PhysicalConstants, fingerprint: &str, f: Format) -> String {
    match f {
        Format::Json => {
            let mut v = to_json(c);
            v["fingerprint"] = json!(fingerprint);
            render(v, f)
        }
        Format::Csv => {
            let prov = |k: &str| c.provenance.get(k).cloned().unwrap_or_default();
            let mut t = Table::new(&["key", "value", "unit", "provenance"]);
            let mut row =
                |k: &str, v: String, u: &str, p: String| t.push(vec![k.into(), v, u.into(), p]);
            if let Some(s) = c.tau_s_seconds {
                row("tau_s", fmt_num(s), "s", prov("tau_s"));
                row("tau_l", fmt_num(c.tau_l * s), "s", prov("tau_l"));
                row("delta_m", fmt_num(c.delta_m / s), "hbar/s", prov("delta_m"));
            }
            row("tau_l", fmt_num(c.tau_l), "tau_s", prov("tau_l"));
            row("delta_m", fmt_num(c.delta_m), "hbar/tau_s", prov("delta_m"));
            row("gamma_l", fmt_num(c.gamma_l), "1/tau_s", String::new());
            row(
                "ks_kl_overlap",
                fmt_num(c.ks_kl_overlap),
                "",
                prov("ks_kl_overlap"),
            );
            row(
                "branching_tolerance",
                fmt_num(c.branching_tolerance),
                "",
                String::new(),
            );
            row(
                "two_pion_channels",
                c.two_pion_channels.join(" "),
                "",
                prov("two_pion_channels"),
            );
            for ch in &c.branching_table {
                row(
                    &format!("branching.{}.{}", ch.parent, ch.id),
                    fmt_num(ch.ratio),
                    ch.tag_class.as_str(),
                    prov("branching_table"),
                );
            }
            row("fingerprint", fingerprint.into(), "sha256", String::new());
            t.to_csv()
        }
    }
}

pub fn cmd_entropy_surface(a: &SurfaceArgs, f: Format) -> Result<String> {
    let [re0, re1] = parse_fields::<2>(&a.re_range, "re-range")?;
    let [im0, im1] = parse_fields::<2>(&a.im_range, "im-range")?;
    let pts = entropy_surface((re0, re1), (im0, im1), a.grid)?;
    let mut t = Table::new(&["re_r", "im_r", "entropy"]);
    for p in &pts {
        t.push(vec![fmt_num(p.re_r), fmt_num(p.im_r), fmt_num(p.entropy)]);
    }
    Ok(render_table(&t, to_json(&pts), f))
}

pub fn cmd_fig2(a: &Fig2Args, c: &PhysicalConstants, f: Format) -> Result<String> {
    let [start, end, width] = parse_fields::<3>(&a.bins, "bins")?;
    let bins = contamination_histogram(start, end, width, c)?;
    let mut t = Table::new(&["bin_start", "bin_end", "ratio"]);
    for b in &bins {
        t.push(vec![
            fmt_num(b.bin_start),
            fmt_num(b.bin_end),
            fmt_num(b.ratio),
        ]);
    }
    Ok(render_table(&t, to_json(&bins), f))
}

pub fn cmd_budget(a: &BudgetArgs, c: &PhysicalConstants, f: Format) -> Result<String> {
    let w = parse_window(&a.window)?;
    let b = misid_budget(&w, c);
    let end = max_window_end(a.cap, c)?;
    let v = json!({
        "window": [w.t0(), w.t1()],
        "budget": to_json(&b),
        "contamination_cap": a.cap,
        "max_window_end": to_json(&end),
    });
    Ok(render(crate::output::round_json(v), f))
}

/// `√(12 m_S)`, with the degenerate `m_S = 0` mapped to 0.
fn falsification_or_zero(m_s: f64) -> Result<f64> {
    if m_s == 0.0 {
        Ok(0.0)
    } else {
        Ok(threshold_falsification(m_s)?)
    }
}

pub fn cmd_thresholds(a: &RateArgs, c: &PhysicalConstants, f: Format) -> Result<String> {
    let (w, m_s, m_l, origin) = resolve_rates(a, c, Some((REFERENCE_M_S, REFERENCE_M_L)))?;
    let v = json!({
        "m_s": m_s,
        "m_l": m_l,
        "rates_from": origin,
        "window": [w.t0(), w.t1()],
        "threshold_falsification": falsification_or_zero(m_s)?,
        "threshold_ch": threshold_ch(m_s, m_l)?,
        "threshold_ch_m_l_only": threshold_ch(0.0, m_l)?,
    });
    Ok(render(crate::output::round_json(v), f))
}

pub fn cmd_probabilities(a: &ProbabilityArgs, c: &PhysicalConstants, f: Format) -> Result<String> {
    let (w, m_s, m_l, origin) = resolve_rates(&a.rates, c, None)?;
    let eta_prime = a.eta_prime.unwrap_or(a.eta);
    let d = DetectionModel::new(a.eta, eta_prime, m_s, m_l, w)?;
    let r = ComplexAmplitude::new(a.r_re, a.r_im);
    let ideal = qm_probability_set(r, &d)?;
    let measured = measured_probabilities(&d);
    let v = json!({
        "inputs": {
            "eta": a.eta,
            "eta_prime": eta_prime,
            "r": [a.r_re, a.r_im],
            "m_s": m_s,
            "m_l": m_l,
            "rates_from": origin,
            "window": [w.t0(), w.t1()],
        },
        "qm": to_json(&ideal),
        "measured": to_json(&measured),
        "ch_margin": ch_margin(&measured),
        "threshold_falsification": falsification_or_zero(m_s)?,
        "threshold_ch": threshold_ch(m_s, m_l)?,
    });
    Ok(render(crate::output::round_json(v), f))
}

pub fn cmd_simulate(
    a: &SimulateArgs,
    c: &PhysicalConstants,
    seed: u64,
    f: Format,
) -> Result<String> {
    let (w, m_s, m_l, _) = resolve_rates(&a.rates, c, None)?;
    let d = DetectionModel::new(a.eta, a.eta_prime.unwrap_or(a.eta), m_s, m_l, w)?;
    let mut extra = Map::new();
    let source = match a.source {
        SourceKind::Qm => Source::Qm(build_phi_strangeness_basis(ComplexAmplitude::new(
            -1.0, 0.0,
        ))?),
        SourceKind::Evading => {
            let e = construct_evading_lhv(&d, c)?;
            extra.insert("hardy".into(), to_json(&hardy_constraint_check(&e, &d)));
            Source::Lhv(e)
        }
    };
    let sampler = EventSampler::new(source, d, c)?;
    let workers = a.workers.unwrap_or_else(workers_default);
    let tally = match &a.events_out {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = BufWriter::new(file);
            events::simulate(
                &sampler,
                a.events,
                seed,
                workers,
                Some(&mut w as &mut dyn Write),
            )?
        }
        None => events::simulate(&sampler, a.events, seed, workers, None)?,
    };
    let report = falsification_verdict(&tally, &d, Some(seed));
    let mut v = to_json(&report);
    v["source"] = json!(a.source);
    for (k, x) in extra {
        v[k] = x;
    }
    Ok(render(v, f))
}

pub fn cmd_verdict(a: &VerdictArgs, c: &PhysicalConstants, f: Format) -> Result<String> {
    let (w, m_s, m_l, _) = resolve_rates(&a.rates, c, None)?;
    let d = DetectionModel::new(1.0, 1.0, m_s, m_l, w)?;
    let file = File::open(&a.events_file)
        .with_context(|| format!("cannot open {}", a.events_file.display()))?;
    let tally = events::tally_reader(BufReader::new(file))?;
    let report = falsification_verdict(&tally, &d, None);
    let mut v = to_json(&report);
    // not observable from a file
    if let Some(t) = v.get_mut("tally").and_then(Value::as_object_mut) {
        t.remove("true_ks_ks_in_window");
    }
    Ok(render(v, f))
}
