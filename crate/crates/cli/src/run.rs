//! Subcommand resolution, path validation and handlers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use unmixx_core::bandsplit::BandScheme;
use unmixx_core::gradcheck::{run_grad_checks, GradCheckConfig};
use unmixx_core::losses::{optimize_masks_demo, two_sine_mixture, DemoConfig, DemoStep, DEMO_AMPLITUDE, DEMO_FREQS, DEMO_SAMPLE_RATE, DEMO_SECONDS};
use unmixx_core::metrics::{evaluate, swap_sim_table, EvalItem, ItemMetrics, SegmentConfig};
use unmixx_core::mim::{estimate_f0, generate_mixtures, harmonic_overlap_score, load_corpus, Annotation, F0Config, HarmonicConfig, MimConfig, MixPair};
use unmixx_core::selftest::run_selftest;
use unmixx_core::separator::{apply_masks, ideal_ratio_masks, Separator, SeparatorConfig, SeparatorWeights};
use unmixx_core::stft::resample;
use unmixx_core::synth::same_singer_pair;
use unmixx_core::weights::WeightBlob;
use unmixx_core::{AudioClip, WavFormat};

use crate::args::{Cli, Command, DemoArgs, EvalArgs, GradCheckArgs, MixArgs, ScoreArgs, SelftestArgs, SeparateArgs, SwapSimArgs};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Selftest seed when `--seed` is absent; the suite is a fixed regression run.
const SELFTEST_SEED: u64 = 7;
/// Sample rate of synthetic swap-simulation references.
const SYNTH_RATE: u32 = 24_000;

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Settings {
    Mix {
        count: usize,
        mim: MimConfig,
    },
    Score {
        harmonic: HarmonicConfig,
        f0: F0Config,
    },
    Separate {
        separator: SeparatorConfig,
        band_scheme: Option<PathBuf>,
        oracle: bool,
    },
    Eval {
        segments: SegmentConfig,
    },
    SwapSim {
        segments: SegmentConfig,
        ratios: Vec<f64>,
        synthetic_seconds: Option<f64>,
    },
    GradCheck {
        gradcheck: GradCheckConfig,
    },
    Demo {
        demo: DemoConfig,
        freqs: (f64, f64),
        amplitude: f64,
        seconds: f64,
        sample_rate: u32,
    },
    Selftest {},
}

/// Effective configuration of one invocation.
#[derive(Debug, Serialize)]
struct RunConfig {
    subcommand: &'static str,
    seed: Option<u64>,
    threads: usize,
    inputs: BTreeMap<&'static str, PathBuf>,
    outputs: BTreeMap<&'static str, PathBuf>,
    settings: Settings,
}

fn load_settings<T: for<'de> Deserialize<'de> + Default>(file: Option<&Path>) -> Result<T> {
    match file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Invalid(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("config {}: {e}", p.display())))
        }
        None => Ok(T::default()),
    }
}

fn require_seed(seed: Option<u64>, cmd: &str) -> Result<u64> {
    seed.ok_or_else(|| CliError::Usage(format!("{cmd} is stochastic: --seed is required")))
}

impl RunConfig {
    fn resolve(cmd: &Command, seed: Option<u64>, threads: usize, file: Option<&Path>) -> Result<Self> {
        let mut inputs = BTreeMap::new();
        let mut outputs = BTreeMap::new();
        let settings = match cmd {
            Command::Mix(a) => {
                let mut mim: MimConfig = load_settings(file)?;
                if let Some(v) = a.length_s {
                    mim.length_s = v;
                }
                if let Some(v) = a.batch {
                    mim.batch = v;
                }
                if let Some(v) = a.pool {
                    mim.pool = v;
                }
                if let Some(v) = a.keep {
                    mim.keep = v;
                }
                if let Some(v) = a.tempo_tolerance {
                    mim.tempo_tolerance = v;
                }
                inputs.insert("corpus", a.corpus.clone());
                inputs.insert("annotations", a.annotations.clone());
                outputs.insert("out", a.out.clone());
                Settings::Mix { count: a.count, mim }
            }
            Command::ScoreHarmonic(a) => {
                inputs.insert("a", a.a.clone());
                inputs.insert("b", a.b.clone());
                Settings::Score {
                    harmonic: load_settings(file)?,
                    f0: F0Config::default(),
                }
            }
            Command::Separate(a) => {
                let mut separator: SeparatorConfig = load_settings(file)?;
                if let Some(s) = seed {
                    separator.seed = s;
                }
                inputs.insert("in", a.input.clone());
                if let Some(w) = &a.weights {
                    inputs.insert("weights", w.clone());
                }
                if let Some(b) = &a.bands {
                    inputs.insert("bands", b.clone());
                }
                if let Some(gt) = &a.ideal {
                    inputs.insert("ideal_gt1", gt[0].clone());
                    inputs.insert("ideal_gt2", gt[1].clone());
                }
                outputs.insert("out1", a.out1.clone());
                outputs.insert("out2", a.out2.clone());
                Settings::Separate {
                    separator,
                    band_scheme: a.bands.clone(),
                    oracle: a.ideal.is_some(),
                }
            }
            Command::Eval(a) => {
                let mut segments: SegmentConfig = load_settings(file)?;
                if let Some(v) = a.seg_s {
                    segments.seg_s = v;
                }
                inputs.insert("manifest", a.manifest.clone());
                outputs.insert("out", a.out.clone());
                if a.csv {
                    outputs.insert("csv", a.out.with_extension("csv"));
                }
                Settings::Eval { segments }
            }
            Command::SwapSim(a) => {
                let mut segments: SegmentConfig = load_settings(file)?;
                if let Some(v) = a.seg_s {
                    segments.seg_s = v;
                }
                if let (Some(g1), Some(g2)) = (&a.gt1, &a.gt2) {
                    inputs.insert("gt1", g1.clone());
                    inputs.insert("gt2", g2.clone());
                }
                outputs.insert("out", a.out.clone());
                Settings::SwapSim {
                    segments,
                    ratios: a.ratios.clone(),
                    synthetic_seconds: a.synthetic,
                }
            }
            Command::GradCheck(a) => {
                let mut gradcheck: GradCheckConfig = load_settings(file)?;
                if let Some(s) = seed {
                    gradcheck.seed = s;
                }
                if let Some(v) = a.trials {
                    gradcheck.trials = v;
                }
                if let Some(v) = a.h {
                    gradcheck.h = v;
                }
                if let Some(v) = a.tol {
                    gradcheck.tol = v;
                }
                if let Some(o) = &a.out {
                    outputs.insert("out", o.clone());
                }
                Settings::GradCheck { gradcheck }
            }
            Command::DemoPenalty(a) => {
                let mut demo: DemoConfig = load_settings(file)?;
                if let Some(v) = a.lambda_penalty {
                    demo.objective.weights.lambda_penalty = v;
                }
                if let Some(v) = a.lambda_mag {
                    demo.objective.weights.lambda_mag = v;
                }
                if let Some(v) = a.lr {
                    demo.lr = v;
                }
                if let Some(v) = a.steps {
                    demo.steps = v;
                }
                if let Some(v) = a.penalty_from_step {
                    demo.penalty_from_step = v;
                }
                outputs.insert("out", a.out.clone());
                Settings::Demo {
                    demo,
                    freqs: (a.freq_a.unwrap_or(DEMO_FREQS.0), a.freq_b.unwrap_or(DEMO_FREQS.1)),
                    amplitude: a.amplitude.unwrap_or(DEMO_AMPLITUDE),
                    seconds: DEMO_SECONDS,
                    sample_rate: DEMO_SAMPLE_RATE,
                }
            }
            Command::Selftest(a) => {
                if file.is_some() {
                    return Err(CliError::Usage("selftest takes no settings file".into()));
                }
                if let Some(o) = &a.out {
                    outputs.insert("out", o.clone());
                }
                Settings::Selftest {}
            }
        };
        let seed = match cmd {
            Command::Mix(_) | Command::SwapSim(_) | Command::GradCheck(_) => Some(require_seed(seed, cmd.name())?),
            Command::Separate(a) if a.weights.is_none() && a.ideal.is_none() => Some(require_seed(seed, cmd.name())?),
            Command::Selftest(_) => Some(seed.unwrap_or(SELFTEST_SEED)),
            _ => seed,
        };
        Ok(Self {
            subcommand: cmd.name(),
            seed,
            threads,
            inputs,
            outputs,
            settings,
        })
    }

    /// Inputs must exist; outputs need an existing parent directory.
    fn validate_paths(&self) -> Result<()> {
        for (name, p) in &self.inputs {
            if !p.exists() {
                return Err(CliError::Invalid(format!("--{name}: {} does not exist", p.display())));
            }
        }
        for (name, p) in &self.outputs {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(CliError::Invalid(format!(
                    "--{name}: directory {} does not exist",
                    parent.display()
                )));
            }
            if self.inputs.values().any(|i| i == p) {
                return Err(CliError::Invalid(format!("--{name}: {} is also an input", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct VersionInfo {
    name: &'static str,
    version: &'static str,
    defaults: Defaults,
}

#[derive(Serialize)]
struct Defaults {
    separator: SeparatorConfig,
    mim: MimConfig,
    segments: SegmentConfig,
    gradcheck: GradCheckConfig,
    demo: DemoConfig,
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.version {
        let info = VersionInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            defaults: Defaults {
                separator: SeparatorConfig::default(),
                mim: MimConfig::default(),
                segments: SegmentConfig::default(),
                gradcheck: GradCheckConfig::default(),
                demo: DemoConfig::default(),
            },
        };
        println!("{}", serde_json::to_string_pretty(&info)?);
        return Ok(());
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Usage("no subcommand given; see `unmixx --help`".into()))?;
    let dump = cli.config.iter().any(|c| c == "dump");
    let files: Vec<&String> = cli.config.iter().filter(|c| *c != "dump").collect();
    if files.len() > 1 {
        return Err(CliError::Usage("at most one --config settings file".into()));
    }
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
            n
        }
        None => rayon::current_num_threads(),
    };
    let rc = RunConfig::resolve(&command, cli.seed, threads, files.first().map(|f| Path::new(f.as_str())))?;
    if dump {
        println!("{}", serde_json::to_string_pretty(&rc)?);
        return Ok(());
    }
    rc.validate_paths()?;
    log::info!("{} (seed {:?}, {} threads)", rc.subcommand, rc.seed, rc.threads);
    match (&command, &rc.settings) {
        (Command::Mix(a), Settings::Mix { count, mim }) => mix(a, *count, mim, rc.seed.expect("required")),
        (Command::ScoreHarmonic(a), Settings::Score { harmonic, f0 }) => score_harmonic(a, harmonic, f0),
        (Command::Separate(a), Settings::Separate { separator, .. }) => separate(a, separator.clone()),
        (Command::Eval(a), Settings::Eval { segments }) => eval(a, segments),
        (Command::SwapSim(a), Settings::SwapSim { segments, .. }) => swap_sim(a, segments, rc.seed.expect("required")),
        (Command::GradCheck(a), Settings::GradCheck { gradcheck }) => grad_check(a, gradcheck),
        (Command::DemoPenalty(a), Settings::Demo { demo, freqs, amplitude, seconds, sample_rate }) => {
            demo_penalty(a, demo, *freqs, *amplitude, *seconds, *sample_rate)
        }
        (Command::Selftest(a), Settings::Selftest {}) => selftest(a, rc.seed.expect("defaulted")),
        _ => unreachable!("settings resolved from the same command"),
    }
}

#[derive(Serialize)]
struct MixManifest<'a> {
    seed: u64,
    config: &'a MimConfig,
    items: Vec<MixManifestItem>,
}

#[derive(Serialize)]
struct MixManifestItem {
    index: usize,
    mix: String,
    gt1: String,
    gt2: String,
    #[serde(flatten)]
    pair: MixPair,
}

fn mix(a: &MixArgs, count: usize, mim: &MimConfig, seed: u64) -> Result<()> {
    if count == 0 {
        return Err(CliError::Invalid("--count must be positive".into()));
    }
    let mut songs = load_corpus(&a.corpus, &a.annotations, &mim.f0)?;
    log::info!("loaded {} songs", songs.len());
    let mined = generate_mixtures(&mut songs, count, mim, seed)?;
    fs::create_dir_all(&a.out)?;
    let mut items = Vec::with_capacity(mined.len());
    for (i, m) in mined.into_iter().enumerate() {
        let names = [format!("mix_{i:04}.wav"), format!("gt1_{i:04}.wav"), format!("gt2_{i:04}.wav")];
        for (name, clip) in names.iter().zip([&m.mixture.mix, &m.mixture.gt1, &m.mixture.gt2]) {
            clip.write_wav(a.out.join(name), WavFormat::Float32)?;
        }
        let [mix, gt1, gt2] = names;
        items.push(MixManifestItem {
            index: i,
            mix,
            gt1,
            gt2,
            pair: m.pair,
        });
    }
    let manifest = MixManifest {
        seed,
        config: mim,
        items,
    };
    fs::write(a.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {count} mixtures to {}", a.out.display());
    Ok(())
}

fn load_f0(path: &Path, cfg: &F0Config) -> Result<Vec<f64>> {
    let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        return Ok(estimate_f0(&AudioClip::read_wav(path)?, cfg)?.values);
    }
    let ann = Annotation::load(path)?;
    ann.f0.map(|t| t.values).ok_or_else(|| {
        CliError::Invalid(format!("{}: annotation has no f0 track; pass the song's WAV instead", path.display()))
    })
}

fn score_harmonic(a: &ScoreArgs, harmonic: &HarmonicConfig, f0: &F0Config) -> Result<()> {
    let (fa, fb) = (load_f0(&a.a, f0)?, load_f0(&a.b, f0)?);
    println!("{}", harmonic_overlap_score(&fa, &fb, harmonic)?);
    Ok(())
}

fn separate(a: &SeparateArgs, mut cfg: SeparatorConfig) -> Result<()> {
    let mix = AudioClip::read_wav(&a.input)?;
    if let Some(path) = &a.bands {
        cfg.bands = Some(BandScheme::from_json(&fs::read_to_string(path)?)?);
    }
    cfg.validate()?;
    let [s1, s2] = if let Some(gt) = &a.ideal {
        let (g1, g2) = (AudioClip::read_wav(&gt[0])?, AudioClip::read_wav(&gt[1])?);
        if g1.len() != mix.len() || g1.sample_rate() != mix.sample_rate() {
            return Err(CliError::Invalid("--ideal references must match the mixture length and rate".into()));
        }
        let masks = ideal_ratio_masks(&g1, &g2, &cfg.stft)?;
        apply_masks(&mix, &masks, &cfg.stft)?
    } else {
        let separator = match &a.weights {
            Some(path) => {
                let weights = SeparatorWeights::from_blob(&cfg, &WeightBlob::load(path)?)?;
                Separator::new(cfg.clone(), weights)?
            }
            None => Separator::seeded(cfg.clone())?,
        };
        if mix.sample_rate() == cfg.sample_rate {
            separator.separate(&mix)?
        } else {
            log::warn!("resampling {} Hz input to {} Hz for separation", mix.sample_rate(), cfg.sample_rate);
            let [e1, e2] = separator.separate(&resample(&mix, cfg.sample_rate)?)?;
            [
                resample(&e1, mix.sample_rate())?.fit_to_len(mix.len()),
                resample(&e2, mix.sample_rate())?.fit_to_len(mix.len()),
            ]
        }
    };
    s1.write_wav(&a.out1, WavFormat::Float32)?;
    s2.write_wav(&a.out2, WavFormat::Float32)?;
    Ok(())
}

#[derive(Deserialize)]
struct ManifestEntry {
    id: String,
    mix: PathBuf,
    est: [PathBuf; 2],
    gt: [PathBuf; 2],
    #[serde(default)]
    same_singer: bool,
}

fn eval(a: &EvalArgs, segments: &SegmentConfig) -> Result<()> {
    let entries: Vec<ManifestEntry> = serde_json::from_str(&fs::read_to_string(&a.manifest)?)
        .map_err(|e| CliError::Invalid(format!("manifest {}: {e}", a.manifest.display())))?;
    if entries.is_empty() {
        return Err(CliError::Invalid("empty manifest".into()));
    }
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let read = |p: &Path| AudioClip::read_wav(base.join(p));
    let items = entries
        .iter()
        .map(|e| {
            Ok(EvalItem {
                id: e.id.clone(),
                mix: read(&e.mix)?,
                est: [read(&e.est[0])?, read(&e.est[1])?],
                gt: [read(&e.gt[0])?, read(&e.gt[1])?],
                same_singer: e.same_singer,
            })
        })
        .collect::<std::result::Result<Vec<_>, unmixx_core::Error>>()?;
    let report = evaluate(&items, segments)?;
    fs::write(&a.out, serde_json::to_string_pretty(&report)?)?;
    if a.csv {
        fs::write(a.out.with_extension("csv"), items_csv(&report.items))?;
    }
    println!("{}", serde_json::to_string_pretty(&report.aggregates)?);
    Ok(())
}

fn items_csv(items: &[ItemMetrics]) -> String {
    let mut s = String::from("id,same_singer,sdr_i,si_sdr_i,ssnr,pssnr,hssnr_contribution\n");
    for m in items {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.id, m.same_singer, m.sdr_i, m.si_sdr_i, m.ssnr, m.pssnr, m.hssnr_contribution
        );
    }
    s
}

fn swap_sim(a: &SwapSimArgs, segments: &SegmentConfig, seed: u64) -> Result<()> {
    let [g1, g2] = match (&a.gt1, &a.gt2, a.synthetic) {
        (Some(p1), Some(p2), _) => [AudioClip::read_wav(p1)?, AudioClip::read_wav(p2)?],
        (_, _, Some(secs)) => same_singer_pair(seed, secs, SYNTH_RATE)?,
        _ => return Err(CliError::Usage("give --gt1 and --gt2, or --synthetic".into())),
    };
    let rows = swap_sim_table(&g1, &g2, &a.ratios, segments, seed)?;
    let mut csv = String::from("ratio,sdri,si_sdri,ssnr,pssnr\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.ratio, r.sdri, r.si_sdri, r.ssnr, r.pssnr);
        println!(
            "ratio {:>5.2}  SDRi {:>8.3}  SI-SDRi {:>8.3}  SSNR {:>8.3}  PSSNR {:>8.3}",
            r.ratio, r.sdri, r.si_sdri, r.ssnr, r.pssnr
        );
    }
    fs::write(&a.out, csv)?;
    Ok(())
}

fn grad_check(a: &GradCheckArgs, cfg: &GradCheckConfig) -> Result<()> {
    let reports = run_grad_checks(cfg)?;
    for r in &reports {
        println!(
            "{:<11} {}  max rel error {:.3e} over {} coords ({} floored at {:.1e})",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.max_rel_error,
            r.coords,
            r.floored,
            r.resolution
        );
    }
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    println!("worst relative error: {worst:.3e}");
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&reports)?)?;
    }
    match reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect::<Vec<_>>() {
        failed if failed.is_empty() => Ok(()),
        failed => Err(CliError::CheckFailed(format!(
            "gradient check failed for {} (tolerance {:e})",
            failed.join(", "),
            cfg.tol
        ))),
    }
}

fn demo_penalty(a: &DemoArgs, cfg: &DemoConfig, freqs: (f64, f64), amplitude: f64, seconds: f64, sr: u32) -> Result<()> {
    let [mix, s1, s2] = two_sine_mixture(freqs, amplitude, seconds, sr)?;
    let steps = optimize_masks_demo(&mix, &s1, &s2, cfg)?;
    let mut csv = format!("{}\n", DemoStep::CSV_HEADER);
    for s in &steps {
        csv.push_str(&s.csv_row());
        csv.push('\n');
    }
    fs::write(&a.out, csv)?;
    let last = steps.last().expect("steps + 1 rows");
    println!(
        "final step {}: loss {:.6}, snr_term {:.6}, masked_energy {:.6e}, ssnr {:.3} dB",
        last.step, last.loss, last.snr_term, last.masked_energy, last.ssnr_db
    );
    Ok(())
}

fn selftest(a: &SelftestArgs, seed: u64) -> Result<()> {
    let results = run_selftest(seed);
    for r in &results {
        println!("{:<30} {:<4}  {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
    }
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&results)?)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} of {} selftest checks failed", results.len())));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
