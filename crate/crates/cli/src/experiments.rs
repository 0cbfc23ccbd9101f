// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use centralspin::analysis::{
    cluster_signal, decay_time, exact_fidelity, fidelity_assisted_series, fidelity_echo_series,
    sensitivity_min_field, CurvePoint, DecayMetrics,
};
use centralspin::model::{sample_geometry, MAX_EXACT_DARK};
use centralspin::protocol::{builtin_schedule, pairwise_sum, response_slope, Ensemble};
use centralspin::seeds::{trial_rng, trial_seed};
use centralspin::{FieldWaveform, ProtocolSpec, Schedule, SpinSystem};
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, WaveformKind};
use crate::invariants::run_suite;
use crate::manifest::{checksum, RunManifest, TrialSeeds};
use crate::RunError;

const STREAM_GEOMETRY: u64 = 1;
const STREAM_ENSEMBLE: u64 = 2;
const MANIFEST: &str = "run.manifest";

/// One schedule to run, labelled for the CSV.
#[derive(Clone, Debug)]
pub struct SequenceRun {
    pub label: String,
    /// WAHUHA cycles per echo interval; 0 for schedules without them.
    pub n_c: usize,
    pub schedule: Schedule,
}

/// `assisted` and `echo` expand into their WAHUHA-decoupled variants for
/// each configured cycle count; `none` is free induction with no pulses at
/// all, repeated per cycle count so every curve has a partner. Anything
/// ending in `.seq` is read relative to `base`; everything else is a builtin
/// name.
pub fn resolve_sequences(cfg: &ExperimentConfig, base: &Path) -> Result<Vec<SequenceRun>, RunError> {
    let mut runs = Vec::new();
    for entry in &cfg.sequences {
        let family = match entry.as_str() {
            "assisted" => Some(("assisted_echo", Some("assisted_wahuha"))),
            "echo" => Some(("spin_echo", Some("echo_wahuha"))),
            "none" => Some(("fid", None)),
            _ => None,
        };
        if let Some((plain, wahuha)) = family {
            if cfg.n_c.is_empty() {
                runs.push(SequenceRun { label: entry.clone(), n_c: 0, schedule: builtin_schedule(plain)? });
            }
            for &n in &cfg.n_c {
                let name = wahuha.map_or_else(|| plain.to_string(), |w| format!("{w}({n})"));
                runs.push(SequenceRun { label: entry.clone(), n_c: n, schedule: builtin_schedule(&name)? });
            }
        } else if entry.ends_with(".seq") {
            let path = base.join(entry);
            let text = fs::read_to_string(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            let schedule = centralspin::seqlang::parse(&text).map_err(|source| RunError::Schedule { path, source })?;
            let label = Path::new(entry).file_stem().map_or(entry.clone(), |s| s.to_string_lossy().into_owned());
            runs.push(SequenceRun { label, n_c: 0, schedule });
        } else {
            let schedule = builtin_schedule(entry).map_err(|e| ConfigError {
                line: None,
                path: "schedule.sequences".into(),
                message: e.to_string(),
            })?;
            runs.push(SequenceRun { label: entry.clone(), n_c: 0, schedule });
        }
    }
    Ok(runs)
}

#[derive(Clone, Debug)]
pub struct DecayCurve {
    pub label: String,
    pub n_c: usize,
    pub trials: usize,
    /// Trial-averaged curve with standard errors across trials, and its
    /// first `1/e` crossing.
    pub metrics: DecayMetrics,
}

/// Rendered outputs of one experiment, before anything touches disk.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub seeds: Vec<TrialSeeds>,
    pub notes: Vec<String>,
    pub curves: Vec<DecayCurve>,
    pub suite_failed: bool,
}

fn trial_seeds(cfg: &ExperimentConfig) -> Vec<TrialSeeds> {
    (0..cfg.trials)
        .map(|k| TrialSeeds {
            trial: k,
            geometry: trial_seed(cfg.seed, STREAM_GEOMETRY, k as u64),
            ensemble: trial_seed(cfg.seed, STREAM_ENSEMBLE, k as u64),
        })
        .collect()
}

fn ensemble(cfg: &ExperimentConfig, seeds: &TrialSeeds) -> Ensemble {
    match cfg.samples {
        Some(trials) => Ensemble::Sampled { trials, seed: seeds.ensemble },
        None => Ensemble::Exact,
    }
}

fn waveform(cfg: &ExperimentConfig) -> FieldWaveform {
    match cfg.waveform {
        WaveformKind::Dc => FieldWaveform::dc(0.0),
        WaveformKind::EchoSquare => FieldWaveform::echo_square(0.0),
    }
}

fn trial_system(cfg: &ExperimentConfig, trial: usize) -> Result<SpinSystem, RunError> {
    let side = cfg.side();
    let mut rng = trial_rng(cfg.seed, STREAM_GEOMETRY, trial as u64);
    let geometry = sample_geometry(cfg.n_dark, side, cfg.exclusion * side, &mut rng)?;
    let system = SpinSystem::from_geometry(&geometry, cfg.xi, cfg.kappa_s, cfg.polarization)?;
    Ok(if cfg.bath { system } else { system.without_bath() })
}

fn single_tau(cfg: &ExperimentConfig) -> Result<f64, ConfigError> {
    match cfg.tau.values().as_slice() {
        [t] if cfg.total_time < *t => Err(ConfigError {
            line: None,
            path: "sensitivity.total_time".into(),
            message: format!("must be at least the sequence duration {t}"),
        }),
        [t] => Ok(*t),
        _ => Err(ConfigError {
            line: None,
            path: "tau".into(),
            message: format!("`{}` uses a single duration", cfg.experiment.as_str()),
        }),
    }
}

fn require_exact_cap(cfg: &ExperimentConfig, n: usize) -> Result<(), ConfigError> {
    if cfg.samples.is_none() && n > MAX_EXACT_DARK {
        return Err(ConfigError {
            line: None,
            path: "ensemble.samples".into(),
            message: format!("exact enumeration is limited to {MAX_EXACT_DARK} dark spins; set a sample count"),
        });
    }
    Ok(())
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e9).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

/// Runs the experiment on the calling thread's rayon pool and renders its
/// outputs. Schedule files are resolved relative to `base`.
pub fn compute(cfg: &ExperimentConfig, base: &Path) -> Result<Outputs, RunError> {
    let seeds = trial_seeds(cfg);
    let mut out = Outputs { files: vec![], seeds: seeds.clone(), notes: vec![], curves: vec![], suite_failed: false };
    match cfg.experiment {
        ExperimentKind::Decay => {
            require_exact_cap(cfg, cfg.n_dark)?;
            let runs = resolve_sequences(cfg, base)?;
            let times = cfg.tau.values();
            let systems = (0..cfg.trials).map(|k| trial_system(cfg, k)).collect::<Result<Vec<_>, _>>()?;
            let tasks: Vec<(usize, usize)> =
                (0..cfg.trials).flat_map(|k| (0..runs.len()).map(move |r| (k, r))).collect();
            let metrics = tasks
                .par_iter()
                .map(|&(k, r)| cluster_signal(&systems[k], &runs[r].schedule, &times, &ensemble(cfg, &seeds[k])))
                .collect::<Result<Vec<_>, _>>()?;
            let mut curves_csv = String::from("experiment,sequence,n_c,trial_count,t,signal_mean,signal_stderr\n");
            let mut times_csv = String::from("sequence,n_c,trial_count,t_1e\n");
            for (r, run) in runs.iter().enumerate() {
                let curve: Vec<CurvePoint> = times
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| {
                        let values: Vec<f64> = (0..cfg.trials).map(|k| metrics[k * runs.len() + r].curve[i].mean).collect();
                        let (mean, stderr) = mean_and_stderr(&values);
                        CurvePoint { t, mean, stderr }
                    })
                    .collect();
                let m = decay_time(curve)?;
                for p in &m.curve {
                    writeln!(curves_csv, "decay,{},{},{},{},{},{}", run.label, run.n_c, cfg.trials, num(p.t), num(p.mean), num(p.stderr)).unwrap();
                }
                let t = m.t_1e.map_or_else(|| "censored".to_string(), num);
                writeln!(times_csv, "{},{},{},{}", run.label, run.n_c, cfg.trials, t).unwrap();
                out.curves.push(DecayCurve { label: run.label.clone(), n_c: run.n_c, trials: cfg.trials, metrics: m });
            }
            out.files.push(("curves.csv".into(), curves_csv));
            out.files.push(("decay_times.csv".into(), times_csv));
            out.notes.push(
                "decay times are first 1/e crossings of the trial-averaged curves and stand in for the T2 times".into(),
            );
            out.notes.push("curves use the pair cluster expansion with per-configuration factors".into());
        }
        ExperimentKind::SweepN => {
            let tau = single_tau(cfg)?;
            let angle = cfg.gate_angle_deg.to_radians();
            let rows = (cfg.n_dark.max(1)..=cfg.n_max)
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&n| -> Result<(usize, f64, f64), RunError> {
                    require_exact_cap(cfg, n)?;
                    let system = SpinSystem::new(vec![0.0; n], cfg.xi, cfg.kappa_s, cfg.polarization)?;
                    let spec = ProtocolSpec::ideal_circuit(vec![angle; n], tau, waveform(cfg))?;
                    let ens = ensemble(cfg, &seeds[0]);
                    let slope = response_slope(&system, &spec, &ens, false)?;
                    Ok((n, slope, sensitivity_min_field(slope, cfg.total_time, tau)?))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut csv = String::from("n,slope,delta_b_min\n");
            for (n, slope, db) in rows {
                writeln!(csv, "{n},{},{}", num(slope), num(db)).unwrap();
            }
            out.files.push(("sweep.csv".into(), csv));
        }
        ExperimentKind::Slope => {
            require_exact_cap(cfg, cfg.n_dark)?;
            let tau = single_tau(cfg)?;
            let runs = resolve_sequences(cfg, base)?;
            let systems = (0..cfg.trials).map(|k| trial_system(cfg, k)).collect::<Result<Vec<_>, _>>()?;
            let tasks: Vec<(usize, usize)> =
                (0..cfg.trials).flat_map(|k| (0..runs.len()).map(move |r| (k, r))).collect();
            let slopes = tasks
                .par_iter()
                .map(|&(k, r)| -> Result<f64, RunError> {
                    let spec = ProtocolSpec::scheduled(runs[r].schedule.clone(), tau, waveform(cfg))?;
                    Ok(response_slope(&systems[k], &spec, &ensemble(cfg, &seeds[k]), cfg.bath)?)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut csv = String::from("sequence,n_c,trial_count,slope_mean,slope_stderr,delta_b_min\n");
            for (r, run) in runs.iter().enumerate() {
                let values: Vec<f64> = (0..cfg.trials).map(|k| slopes[k * runs.len() + r]).collect();
                let (mean, stderr) = mean_and_stderr(&values);
                let db = match sensitivity_min_field(mean, cfg.total_time, tau) {
                    Ok(d) => num(d),
                    Err(centralspin::Error::ZeroSlope) => "inf".to_string(),
                    Err(e) => return Err(e.into()),
                };
                writeln!(csv, "{},{},{},{},{},{db}", run.label, run.n_c, cfg.trials, num(mean), num(stderr)).unwrap();
            }
            out.files.push(("slopes.csv".into(), csv));
        }
        ExperimentKind::FidelityCheck => {
            require_exact_cap(cfg, cfg.n_dark)?;
            let echo = builtin_schedule("spin_echo")?;
            let assisted = builtin_schedule("assisted_echo")?;
            let times = cfg.tau.values();
            let systems = (0..cfg.trials).map(|k| trial_system(cfg, k)).collect::<Result<Vec<_>, _>>()?;
            let tasks: Vec<(usize, f64)> = (0..cfg.trials).flat_map(|k| times.iter().map(move |&t| (k, t))).collect();
            let rows = tasks
                .par_iter()
                .map(|&(k, t)| -> Result<[f64; 4], RunError> {
                    let s = &systems[k];
                    Ok([
                        exact_fidelity(s, &echo, t)?,
                        fidelity_echo_series(s, t),
                        exact_fidelity(s, &assisted, t)?,
                        fidelity_assisted_series(s, t),
                    ])
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut csv = String::from(
                "trial,t,echo_exact,echo_series,echo_residual,assisted_exact,assisted_series,assisted_residual\n",
            );
            for (&(k, t), [ee, es, ae, as_]) in tasks.iter().zip(&rows) {
                let cells = [t, *ee, *es, (ee - es).abs(), *ae, *as_, (ae - as_).abs()].map(num);
                writeln!(csv, "{k},{}", cells.join(",")).unwrap();
            }
            out.files.push(("fidelity.csv".into(), csv));
        }
        ExperimentKind::Validate => {
            let checks = run_suite(cfg.seed);
            let mut csv = String::from("property,passed,detail\n");
            for c in &checks {
                writeln!(csv, "{},{},{}", c.name, c.passed, c.detail.replace(',', ";")).unwrap();
            }
            out.suite_failed = checks.iter().any(|c| !c.passed);
            out.files.push(("validate.csv".into(), csv));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker count; `None` uses rayon's default.
    pub threads: Option<usize>,
    pub force: bool,
    /// Directory that relative schedule paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub outputs: Outputs,
    pub manifest_path: PathBuf,
    pub checksums: Vec<(String, String)>,
}

fn planned_files(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Decay => &["curves.csv", "decay_times.csv"],
        ExperimentKind::SweepN => &["sweep.csv"],
        ExperimentKind::Slope => &["slopes.csv"],
        ExperimentKind::FidelityCheck => &["fidelity.csv"],
        ExperimentKind::Validate => &["validate.csv"],
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Runs `cfg` and writes its CSV files plus `run.manifest` into the output
/// directory, refusing to replace existing files unless forced.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let names = planned_files(cfg.experiment).iter().chain(std::iter::once(&MANIFEST));
    if !opts.force {
        if let Some(existing) = names.map(|n| opts.out_dir.join(n)).find(|p| p.exists()) {
            return Err(RunError::Collision(existing));
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = opts.threads {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let started = Instant::now();
    let outputs = pool.install(|| compute(cfg, &opts.base_dir))?;
    let duration_s = started.elapsed().as_secs_f64();

    fs::create_dir_all(&opts.out_dir).map_err(io(&opts.out_dir))?;
    let mut checksums = Vec::new();
    for (name, contents) in &outputs.files {
        let path = opts.out_dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        checksums.push((name.clone(), checksum(contents.as_bytes())));
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        threads: pool.current_num_threads(),
        seeds: outputs.seeds.clone(),
        duration_s,
        outputs: checksums.clone(),
        notes: outputs.notes.clone(),
    };
    let manifest_path = opts.out_dir.join(MANIFEST);
    fs::write(&manifest_path, manifest.to_text()).map_err(io(&manifest_path))?;
    Ok(RunOutcome { outputs, manifest_path, checksums })
}
