use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use peelsort::dog_filter::design_kernel;
use peelsort::evaluator::{score_result, Summary};
use peelsort::pipeline;
use peelsort::probe_io::{read_results, write_results};
use peelsort::stitcher::{best_shift, shift_grid};
use peelsort::synthgen::{self, Drift, GroundTruth, SynthSpec};
use peelsort::{Config, ProbeGeometry, Recording};

/// Spike sorter for dense multi-electrode probes with drift-aware segmentation.
#[derive(Parser)]
#[command(name = "peelsort", version)]
struct Cli {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for filtering, detection and per-segment sorting.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write spikes.csv and units.json.
    Sort {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        params: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print segment boundaries as `segment,start,end` rows.
    Segment {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        params: Overrides,
    },
    /// Sort one slice `[start, end)` of the recording.
    SortSegment {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        params: Overrides,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        end: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stitch slice results into one result.
    Merge {
        /// Result directories, in any order.
        #[arg(required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        probe: PathBuf,
        #[command(flatten)]
        params: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report which units of one result correspond to units of another.
    Map {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        #[command(flatten)]
        params: Overrides,
    },
    /// Write a synthetic recording, its probe and its ground truth.
    Generate {
        #[arg(long, default_value_t = 10)]
        neurons: usize,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        /// Noise standard deviation in ADC units.
        #[arg(long, default_value_t = 10.0)]
        noise: f64,
        /// none | linear:<um_per_min> | jump:<um>@<s> | gp[:<peak_to_peak_um>]
        #[arg(long, default_value = "none")]
        drift: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        channels: usize,
        #[arg(long, default_value_t = 20_000.0)]
        sample_rate: f64,
        /// Smallest trough amplitude, as a multiple of the raw noise MAD.
        #[arg(long, default_value_t = 8.0)]
        amp_min: f64,
        /// Largest trough amplitude, as a multiple of the raw noise MAD.
        #[arg(long, default_value_t = 15.0)]
        amp_max: f64,
        #[arg(long, default_value_t = 1.0)]
        rate_min: f64,
        #[arg(long, default_value_t = 50.0)]
        rate_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a result against ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        tol_ms: Option<f64>,
    },
    /// Describe a recording and the detector settings it would get.
    Info {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        params: Overrides,
    },
}

#[derive(Args)]
struct Input {
    /// Little-endian int16 frame-interleaved signal.
    #[arg(long = "in")]
    signal: PathBuf,
    #[arg(long)]
    probe: PathBuf,
    #[arg(long)]
    sample_rate: f64,
}

impl Input {
    fn load(&self) -> anyhow::Result<Recording> {
        Ok(Recording::load(&self.signal, &self.probe, self.sample_rate)?)
    }
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    l_min_seconds: Option<f64>,
    #[arg(long)]
    d_max_um: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    band_low_hz: Option<f64>,
    #[arg(long)]
    band_high_hz: Option<f64>,
    #[arg(long)]
    invert_polarity: bool,
}

impl Overrides {
    fn apply(&self, mut c: Config) -> Config {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(kappa, lambda, n_min, l_min_seconds, d_max_um, mu, band_low_hz, band_high_hz);
        c.invert_polarity |= self.invert_polarity;
        c
    }
}

/// An error caused by the invocation rather than the data.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn config(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Config> {
    let base = match path {
        Some(p) => Config::load(p).map_err(|e| Usage(e.to_string()))?,
        None => Config::default(),
    };
    let cfg = overrides.apply(base);
    cfg.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Sort { input, params, out } => {
            let cfg = config(cfg_path, &params)?;
            let rec = input.load()?;
            let output = pipeline::sort(&rec, &cfg)?;
            write_results(&output.result, &out)?;
            println!(
                "{} units, {} segments -> {}",
                output.result.units.len(),
                output.result.segments.len(),
                out.display()
            );
        }
        Command::Segment { input, params } => {
            let cfg = config(cfg_path, &params)?;
            let rec = input.load()?;
            let prepared = pipeline::prepare(&rec, &cfg)?;
            let plan = pipeline::segment(&prepared, &cfg);
            println!("segment,start,end");
            for (i, r) in plan.segments(rec.n_samples()).iter().enumerate() {
                println!("{i},{},{}", r.start, r.end);
            }
        }
        Command::SortSegment {
            input,
            params,
            start,
            end,
            out,
        } => {
            let cfg = config(cfg_path, &params)?;
            if start >= end {
                bail!(Usage(format!("--start {start} must be below --end {end}")));
            }
            let rec = input.load()?;
            let result = pipeline::sort_slice(&rec, start..end, &cfg)?;
            write_results(&result, &out)?;
            println!("{} units in {start}..{end} -> {}", result.units.len(), out.display());
        }
        Command::Merge {
            results,
            probe,
            params,
            out,
        } => {
            let cfg = config(cfg_path, &params)?;
            let geometry = ProbeGeometry::load(&probe)?;
            let parts = results
                .iter()
                .map(|d| read_results(d).with_context(|| format!("reading {}", d.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let merged = pipeline::merge(&parts, &geometry, &cfg)?;
            write_results(&merged, &out)?;
            println!(
                "{} units, {} segments -> {}",
                merged.units.len(),
                merged.segments.len(),
                out.display()
            );
        }
        Command::Map { a, b, probe, params } => {
            let cfg = config(cfg_path, &params)?;
            let geometry = ProbeGeometry::load(&probe)?;
            let (ra, rb) = (read_results(&a)?, read_results(&b)?);
            let amps = |r: &peelsort::SortResult| -> Vec<Vec<f64>> {
                r.units
                    .iter()
                    .map(|u| u.amplitude.iter().map(|&v| f64::from(v)).collect())
                    .collect()
            };
            let (va, vb) = (amps(&ra), amps(&rb));
            if va.is_empty() || vb.is_empty() {
                println!("shift_um,0\na_unit,b_unit,distance,accepted");
                return Ok(());
            }
            let m = best_shift(&va, &vb, &geometry, &shift_grid(cfg.d_max_um));
            println!("shift_um,{}", m.delta);
            println!("a_unit,b_unit,distance,accepted");
            for (&(i, j), d) in m.pairs.iter().zip(&m.distances) {
                let na = norm(&m.shifted_earlier[i]);
                let nb = norm(&m.shifted_later[j]);
                let accepted = *d <= cfg.mu * na.max(nb);
                println!("{},{},{d:.4},{accepted}", ra.units[i].id, rb.units[j].id);
            }
        }
        Command::Generate {
            neurons,
            seconds,
            noise,
            drift,
            seed,
            channels,
            sample_rate,
            amp_min,
            amp_max,
            rate_min,
            rate_max,
            out,
        } => {
            let drift: Drift = drift.parse().map_err(|e: peelsort::Error| Usage(e.to_string()))?;
            if channels == 0 || !(amp_min > 0.0 && amp_min <= amp_max) {
                bail!(Usage("need at least one channel and 0 < amp-min <= amp-max".into()));
            }
            let sigma_for_scale = if noise > 0.0 { noise } else { 1.0 };
            let mut spec = SynthSpec::new(neurons, seconds, seed);
            spec.sample_rate = sample_rate;
            spec.geometry = ProbeGeometry::two_column(channels, 15.0, 32.0);
            spec.noise_sigma = noise;
            spec.amplitude_range = (
                synthgen::amplitude_for_mad_multiple(amp_min, sigma_for_scale),
                synthgen::amplitude_for_mad_multiple(amp_max, sigma_for_scale),
            );
            spec.rate_range_hz = (rate_min, rate_max);
            spec.drift = drift;
            let (rec, truth) = synthgen::generate(&spec)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            rec.write_raw(out.join("recording.raw"))?;
            rec.geometry().save(out.join("probe.probe"))?;
            truth.save(out.join("truth.json"))?;
            println!(
                "{} neurons, {} samples x {} channels -> {}",
                truth.neurons.len(),
                rec.n_samples(),
                rec.n_channels(),
                out.display()
            );
        }
        Command::Eval {
            results,
            truth,
            tol_ms,
        } => {
            let cfg = config(cfg_path, &Overrides::default())?;
            let tol_ms = tol_ms.unwrap_or(cfg.tol_ms);
            if !(tol_ms > 0.0) {
                bail!(Usage("--tol-ms must be positive".into()));
            }
            let result = read_results(&results)?;
            let truth = GroundTruth::load(&truth)?;
            let scores = score_result(&result, &truth, tol_ms);
            println!("unit,neuron,n_detected,n_truth,matched,fp,fn,score,class");
            for s in &scores {
                let neuron = s.neuron.map_or(String::from("-"), |n| n.to_string());
                println!(
                    "{},{neuron},{},{},{},{:.4},{:.4},{:.4},{}",
                    s.unit, s.n_detected, s.n_truth, s.matched, s.fp, s.fn_rate, s.score, s.classification
                );
            }
            let sum = Summary::of(&scores);
            println!("identified,{}", sum.identified);
            println!("unclassified,{}", sum.unclassified);
            println!("spurious,{}", sum.spurious);
        }
        Command::Info { input, params } => {
            let cfg = config(cfg_path, &params)?;
            let rec = input.load()?;
            let kernel = design_kernel(cfg.band_low_hz, cfg.band_high_hz, rec.sample_rate())?;
            println!("channels,{}", rec.n_channels());
            println!("samples,{}", rec.n_samples());
            println!("duration_s,{}", rec.duration_s());
            println!("box_widths,{},{}", kernel.w_high_cut, kernel.w_low_cut);
            let prepared = pipeline::prepare(&rec, &cfg)?;
            println!("channel,x_um,y_um,threshold");
            for (ch, th) in rec.geometry().channels().iter().zip(&prepared.thresholds) {
                println!("{},{},{},{}", ch.id, ch.x, ch.y, th.value);
            }
        }
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
