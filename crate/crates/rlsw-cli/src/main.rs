//! Command-line interface for RLSW spectral and coherence estimation.

use clap::{Args, Parser, Subcommand};
use rlsw::coherence::{CoherenceNormalization, CoherencePipelineConfig, PipelineOrder};
use rlsw::evaluate::{CoherenceScenario, EstimatorKind, Scenario};
use rlsw::io::{IngestConfig, Orientation};
use rlsw::simulate::{BuiltinCoherence, BuiltinSpectrum};
use rlsw::spectral::SmoothingConfig;
use rlsw::wavelet::{AutocorrelationSet, FamilyId, WaveletFamily};
use rlsw::{build_discrete_wavelets, inner_product_matrix};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rlsw",
    version,
    about = "Replicate locally stationary wavelet spectral estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// RNG seed for anything stochastic; echoed into sidecars.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Wavelet family: haar, daub-ep, daub-la.
    #[arg(long)]
    family: Option<String>,
    /// Vanishing moments (1 for haar, 2..=10 for the Daubechies families).
    #[arg(long)]
    vanishing_moments: Option<usize>,
    /// Replicate half-window M; defaults to the (2M+1) = 0.15 R rule.
    #[arg(long = "M", short = 'M')]
    m: Option<usize>,
    /// Time half-window M_T (0 disables time smoothing).
    #[arg(long = "MT")]
    m_t: Option<usize>,
    /// Correction truncation fraction in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Coherence pipeline order: correct-then-smooth | smooth-then-correct.
    #[arg(long, default_value = "correct-then-smooth")]
    order: String,
    /// Truncate negative corrected spectra at zero.
    #[arg(long, default_value_t = false)]
    truncate_negative: bool,
}

#[derive(Args, Clone)]
struct IngestArgs {
    /// Input ensemble CSV.
    #[arg(long)]
    input: PathBuf,
    /// First line is a header.
    #[arg(long, default_value_t = false)]
    has_header: bool,
    /// Input orientation: rows | columns (replicates as).
    #[arg(long, default_value = "rows")]
    orientation: String,
    /// Standardize each replicate to mean 0, variance 1.
    #[arg(long, default_value_t = false)]
    standardize: bool,
    /// Mirror-pad replicates to the next power of two.
    #[arg(long, default_value_t = false)]
    mirror: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble from a built-in spectrum and coherence design.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Spectrum: sim_main | sim1 | sim2 | white_noise.
        #[arg(long, default_value = "sim1")]
        spec: String,
        /// Variance parameter for white_noise.
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Coherence: none | constant07 | block_9971_50.
        #[arg(long, default_value = "none")]
        coherence: String,
        #[arg(long = "R", short = 'R')]
        r: usize,
        #[arg(long = "T", short = 'T')]
        t: usize,
        /// Output ensemble CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the replicate spectrum from an ensemble CSV.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ingest: IngestArgs,
        /// Output long-format CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON export path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Use the baseline estimator (time smoothing, replicate average).
        #[arg(long, default_value_t = false)]
        lsw: bool,
    },
    /// Estimate replicate-coherence slices or pair series.
    Coherence {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ingest: IngestArgs,
        /// Scale (1 = finest).
        #[arg(long)]
        level: usize,
        /// Reference replicate for a slice.
        #[arg(long)]
        reference: usize,
        /// Optional second replicate: export one pair series instead.
        #[arg(long)]
        pair: Option<usize>,
        /// Clamp coherence values into [-1, 1].
        #[arg(long, default_value_t = false)]
        clamp: bool,
        /// Ratio normalization: corrected | periodogram-level.
        #[arg(long, default_value = "corrected")]
        normalization: String,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON export path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte-Carlo MSE/bias benchmark for a built-in scenario.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Scenario: sim_main | sim1 | sim2 | coh_constant07 | coh_block.
        #[arg(long)]
        scenario: String,
        #[arg(long = "R", short = 'R')]
        r: usize,
        #[arg(long = "T", short = 'T')]
        t: usize,
        /// Number of Monte-Carlo runs.
        #[arg(long = "N", short = 'N', default_value_t = 100)]
        n: usize,
        /// Estimators to score (comma-separated: lsw,rlsw1,rlsw2).
        #[arg(long, default_value = "lsw,rlsw1,rlsw2")]
        estimators: String,
        /// Coherence-scenario ratio normalization: corrected |
        /// periodogram-level (the latter matches the benchmark references).
        #[arg(long, default_value = "periodogram-level")]
        normalization: String,
        /// Output table CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON table export path (spectral scenarios).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Dump autocorrelation wavelets and the inner-product matrix.
    BasisDump {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of scales to build.
        #[arg(long, default_value_t = 10)]
        scales: usize,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_family(common: &CommonArgs, default: (&str, usize)) -> Result<WaveletFamily, rlsw::Error> {
    let name = common.family.as_deref().unwrap_or(default.0);
    let id = match name {
        "haar" => FamilyId::Haar,
        "daub-ep" | "daubechies-extremal-phase" => FamilyId::DaubechiesExtremalPhase,
        "daub-la" | "daubechies-least-asymmetric" => FamilyId::DaubechiesLeastAsymmetric,
        other => {
            return Err(rlsw::Error::Config(format!(
                "unknown family `{other}` (expected haar, daub-ep or daub-la)"
            )))
        }
    };
    let vm = common
        .vanishing_moments
        .unwrap_or(if id == FamilyId::Haar { 1 } else { default.1 });
    WaveletFamily::new(id, vm)
}

fn input_digest(path: &Path) -> Result<String, rlsw::Error> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

#[allow(clippy::too_many_arguments)]
fn write_sidecar(
    out: &Path,
    command: &str,
    common: &CommonArgs,
    family: &WaveletFamily,
    j_scales: usize,
    m: Option<usize>,
    m_t: Option<usize>,
    digest: Option<String>,
    extra: &[(&str, serde_json::Value)],
) -> Result<(), rlsw::Error> {
    let mut doc = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": common.seed,
        "family": family.family_id().name(),
        "vanishing_moments": family.vanishing_moments(),
        "J": j_scales,
        "alpha": common.alpha,
        "M": m,
        "MT": m_t,
        "order": common.order,
        "truncate_negative": common.truncate_negative,
        "input_digest": digest,
    });
    for (key, value) in extra {
        doc[*key] = value.clone();
    }
    let path = sidecar_path(out);
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| rlsw::Error::Input(format!("sidecar encode failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn load_input(ingest: &IngestArgs) -> Result<rlsw::transform::ReplicateEnsemble, rlsw::Error> {
    let cfg = IngestConfig {
        path: ingest.input.clone(),
        has_header: ingest.has_header,
        orientation: Orientation::parse(&ingest.orientation)?,
        standardize: ingest.standardize,
        mirror: ingest.mirror,
    };
    rlsw::io::load_ensemble_csv(&cfg)
}

fn run(cli: Cli) -> Result<(), rlsw::Error> {
    match cli.command {
        Command::Simulate {
            common,
            spec,
            sigma2,
            coherence,
            r,
            t,
            out,
        } => {
            let family = parse_family(&common, ("daub-la", 6))?;
            let spectrum = BuiltinSpectrum::parse(&spec, sigma2)?;
            let coh_name = BuiltinCoherence::parse(&coherence)?;
            let spec_grid = rlsw::simulate::builtin_spectrum(spectrum, t, r)?;
            let coh = rlsw::simulate::builtin_coherence(coh_name, r, t)?;
            let j_syn = spec_grid.scale_count();
            let basis = build_discrete_wavelets(family.clone(), j_syn)?;
            let ens = rlsw::simulate::simulate_ensemble(&spec_grid, &coh, &basis, common.seed)?;
            rlsw::io::write_ensemble_csv(&ens, &out)?;
            write_sidecar(
                &out,
                "simulate",
                &common,
                &family,
                j_syn,
                None,
                None,
                None,
                &[
                    ("spectrum", serde_json::json!(spectrum.label())),
                    ("coherence", serde_json::json!(coh_name.label())),
                    ("R", serde_json::json!(r)),
                    ("T", serde_json::json!(t)),
                ],
            )?;
            Ok(())
        }
        Command::Estimate {
            common,
            ingest,
            out,
            json,
            lsw,
        } => {
            let family = parse_family(&common, ("daub-la", 6))?;
            let ens = load_input(&ingest)?;
            let m = common
                .m
                .unwrap_or_else(|| SmoothingConfig::default_replicate_half_window(ens.replicate_count()));
            let m_t = common.m_t.unwrap_or(0);
            let config = SmoothingConfig {
                replicate_half_window: m,
                time_half_window: m_t,
                alpha: common.alpha,
                truncate_negative: common.truncate_negative,
            };
            let j_est = config.scale_count(ens.series_len());
            let basis = build_discrete_wavelets(family.clone(), j_est)?;
            let est = if lsw {
                rlsw::spectral::estimate_lsw(&ens, &basis, &config)?
            } else {
                rlsw::spectral::estimate_rews(&ens, &basis, &config)?
            };
            rlsw::io::write_spectral_estimate_csv(&est, &out)?;
            if let Some(json_path) = json {
                rlsw::io::write_spectral_estimate_json(&est, &json_path)?;
            }
            write_sidecar(
                &out,
                "estimate",
                &common,
                &family,
                j_est,
                Some(m),
                Some(m_t),
                Some(input_digest(&ingest.input)?),
                &[],
            )?;
            Ok(())
        }
        Command::Coherence {
            common,
            ingest,
            level,
            reference,
            pair,
            clamp,
            normalization,
            out,
            json,
        } => {
            let family = parse_family(&common, ("daub-la", 6))?;
            let ens = load_input(&ingest)?;
            let m = common
                .m
                .unwrap_or_else(|| SmoothingConfig::default_replicate_half_window(ens.replicate_count()));
            let order = PipelineOrder::parse(&common.order)?;
            let normalization = CoherenceNormalization::parse(&normalization)?;
            let corrected = normalization == CoherenceNormalization::Corrected;
            let cfg = CoherencePipelineConfig {
                replicate_half_window: m,
                time_half_window: common.m_t.unwrap_or(0),
                order,
                truncate_negative: corrected
                    && (common.truncate_negative || order == PipelineOrder::CorrectThenSmooth),
                clamp_to_unit: clamp || (corrected && order == PipelineOrder::CorrectThenSmooth),
                floor_epsilon_rel: 1e-12,
                alpha: common.alpha,
                normalization,
            };
            let j_est = cfg.scale_count(ens.series_len());
            let basis = build_discrete_wavelets(family.clone(), j_est)?;
            if let Some(r_prime) = pair {
                let series = rlsw::coherence::coherence_pair_series(
                    &ens, &basis, level, reference, r_prime, &cfg,
                )?;
                let mut text = String::from("time_index,value\n");
                for (k, v) in series.iter().enumerate() {
                    if v.is_nan() {
                        text.push_str(&format!("{k},NA\n"));
                    } else {
                        text.push_str(&format!("{k},{}\n", rlsw::io::format_f64(*v)));
                    }
                }
                std::fs::write(&out, text)?;
            } else {
                let slice = rlsw::coherence::estimate_coherence_slice(
                    &ens, &basis, level, reference, &cfg,
                )?;
                rlsw::io::write_coherence_slice_csv(&slice, &out)?;
                if let Some(json_path) = &json {
                    rlsw::io::write_coherence_slice_json(&slice, &cfg, json_path)?;
                }
            }
            write_sidecar(
                &out,
                "coherence",
                &common,
                &family,
                j_est,
                Some(m),
                Some(cfg.time_half_window),
                Some(input_digest(&ingest.input)?),
                &[("normalization", serde_json::json!(cfg.normalization.label()))],
            )?;
            Ok(())
        }
        Command::Benchmark {
            common,
            scenario,
            r,
            t,
            n,
            estimators,
            normalization,
            out,
            json,
        } => {
            let (spectrum, coherence, default_family): (BuiltinSpectrum, BuiltinCoherence, (&str, usize)) =
                match scenario.as_str() {
                    "sim_main" => (BuiltinSpectrum::SimMain, BuiltinCoherence::None, ("daub-la", 6)),
                    "sim1" => (BuiltinSpectrum::Sim1, BuiltinCoherence::None, ("daub-la", 10)),
                    "sim2" => (BuiltinSpectrum::Sim2, BuiltinCoherence::None, ("daub-la", 10)),
                    "coh_constant07" => (
                        BuiltinSpectrum::Sim1,
                        BuiltinCoherence::Constant07,
                        ("daub-la", 10),
                    ),
                    "coh_block" => (
                        BuiltinSpectrum::Sim1,
                        BuiltinCoherence::Block997150,
                        ("daub-la", 10),
                    ),
                    other => {
                        return Err(rlsw::Error::Config(format!("unknown scenario `{other}`")))
                    }
                };
            let family = parse_family(&common, default_family)?;
            let m = common
                .m
                .unwrap_or_else(|| SmoothingConfig::default_replicate_half_window(r));
            let coherence_scenario = matches!(
                coherence,
                BuiltinCoherence::Constant07 | BuiltinCoherence::Block997150
            );
            if coherence_scenario {
                let order = PipelineOrder::parse(&common.order)?;
                let normalization = CoherenceNormalization::parse(&normalization)?;
                let corrected = normalization == CoherenceNormalization::Corrected;
                let pipeline = CoherencePipelineConfig {
                    replicate_half_window: m,
                    time_half_window: common.m_t.unwrap_or(0),
                    order,
                    truncate_negative: corrected,
                    clamp_to_unit: corrected,
                    floor_epsilon_rel: 1e-12,
                    alpha: common.alpha,
                    normalization,
                };
                let sc = CoherenceScenario {
                    spectrum,
                    coherence,
                    family: family.clone(),
                    r_count: r,
                    t_len: t,
                    pipeline,
                };
                let report = rlsw::evaluate::coherence_mse_bias_mc(&sc, n, common.seed)?;
                rlsw::io::write_coherence_table_csv(&[report], &out)?;
            } else {
                let ests = estimators
                    .split(',')
                    .map(EstimatorKind::parse)
                    .collect::<Result<Vec<_>, _>>()?;
                let sc = Scenario {
                    spectrum,
                    coherence,
                    family: family.clone(),
                    r_count: r,
                    t_len: t,
                    m_values: vec![m],
                    estimators: ests,
                    time_half_window: common.m_t,
                };
                let rows = rlsw::evaluate::benchmark_table(&sc, n, common.seed)?;
                rlsw::io::write_mse_table_csv(&rows, &out)?;
                if let Some(json_path) = &json {
                    rlsw::io::write_mse_table_json(&rows, json_path)?;
                }
            }
            let j_est = t.trailing_zeros() as usize;
            write_sidecar(
                &out,
                "benchmark",
                &common,
                &family,
                j_est,
                Some(m),
                common.m_t,
                None,
                &[
                    ("scenario", serde_json::json!(scenario)),
                    ("N", serde_json::json!(n)),
                    ("R", serde_json::json!(r)),
                    ("T", serde_json::json!(t)),
                ],
            )?;
            Ok(())
        }
        Command::BasisDump {
            common,
            scales,
            out_dir,
        } => {
            let family = parse_family(&common, ("daub-la", 6))?;
            std::fs::create_dir_all(&out_dir)?;
            let basis = build_discrete_wavelets(family.clone(), scales)?;
            let acs = AutocorrelationSet::build(&basis)?;
            let ipm = inner_product_matrix(&basis)?;
            rlsw::io::write_autocorrelation_csv(&acs, &out_dir.join("autocorrelation.csv"))?;
            rlsw::io::write_inner_product_csv(&ipm, &out_dir.join("inner_product.csv"))?;
            write_sidecar(
                &out_dir.join("basis"),
                "basis-dump",
                &common,
                &family,
                scales,
                None,
                None,
                None,
                &[],
            )?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
