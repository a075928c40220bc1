//! Command line entry points for the viewpoint-conditioned generation
//! pipeline: dataset generation, generator/regressor training, single-image
//! generation, and viewpoint-accuracy evaluation.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use vantage::dataset::{generate_dataset, DatasetConfig, LoadedDataset, SplitKind};
use vantage::eval::{
    evaluate, write_eval_outputs, GroundTruthOracle, PoseOracle, RegressorOracle, TestSpec,
};
use vantage::generator::{
    generate_from_caption, load_generator, loss_curve_csv, save_generator, train_generator,
    GeneratorConfig, TrainConfig,
};
use vantage::geometry::encoding::ViewpointEncoder;
use vantage::geometry::CameraPose;
use vantage::regressor::{
    build_regressor_dataset, load_regressor, save_regressor, train_regressor, RegressorConfig,
    RegressorTrainConfig,
};

#[derive(Parser)]
#[command(name = "vantage", version, about = "Viewpoint-token conditioned image generation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dataset operations.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
    /// Model training.
    Train {
        #[command(subcommand)]
        cmd: TrainCmd,
    },
    /// Generate one image from a caption and a camera pose.
    Generate(GenerateArgs),
    /// Viewpoint-accuracy evaluation.
    Eval(EvalArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate the two-part dataset from a JSON config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TrainCmd {
    /// Train the conditional generator jointly with the viewpoint MLP.
    Generator {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the evaluation regressor.
    Regressor {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    caption: String,
    /// Azimuth in degrees.
    #[arg(long)]
    az: f64,
    /// Elevation in degrees.
    #[arg(long)]
    el: f64,
    /// Radius in object diameters.
    #[arg(long)]
    r: f64,
    /// Pitch in degrees (positive tilts the camera down).
    #[arg(long, default_value_t = 0.0)]
    pitch: f64,
    /// Yaw in degrees (positive tilts the camera left).
    #[arg(long, default_value_t = 0.0)]
    yaw: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Generator checkpoint.
    #[arg(long)]
    gen: PathBuf,
    /// Regressor checkpoint path, or `stub:gt` / `stub:gt+10az` style test
    /// stubs that echo the requested pose (optionally azimuth-shifted).
    #[arg(long)]
    reg: String,
    /// Test spec JSON.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training dataset root; enables seed/kind disjointness checks.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Deserialize)]
struct GeneratorTrainFile {
    encoder: ViewpointEncoder,
    generator: GeneratorConfig,
    train: TrainConfig,
}

#[derive(Deserialize)]
struct RegressorTrainFile {
    model: RegressorConfig,
    train: RegressorTrainConfig,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_stub_oracle(s: &str, radius_range: (f64, f64)) -> Result<Option<Box<dyn PoseOracle>>> {
    if s == "stub:gt" {
        return Ok(Some(Box::new(GroundTruthOracle {
            radius_range,
            azimuth_offset_deg: 0.0,
        })));
    }
    if let Some(rest) = s.strip_prefix("stub:gt") {
        if let Some(offset) = rest.strip_suffix("az") {
            let deg: f64 = offset
                .parse()
                .with_context(|| format!("bad stub azimuth offset {offset:?}"))?;
            return Ok(Some(Box::new(GroundTruthOracle {
                radius_range,
                azimuth_offset_deg: deg,
            })));
        }
        bail!("unrecognized stub oracle {s:?}; use stub:gt or stub:gt<deg>az");
    }
    Ok(None)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Dataset { cmd } => match cmd {
            DatasetCmd::Gen { config, out } => {
                let cfg: DatasetConfig = read_json(&config)?;
                let manifest = generate_dataset(&cfg, &out)?;
                println!(
                    "dataset written to {}: {} rendered + {} augmented samples",
                    out.display(),
                    manifest.rendered.count,
                    manifest.augmented.count
                );
            }
        },
        Cmd::Train { cmd } => match cmd {
            TrainCmd::Generator { config, data, out } => {
                let file: GeneratorTrainFile = read_json(&config)?;
                let dataset = LoadedDataset::load(&data)?;
                let diag = out.with_extension("diverged.ckpt");
                let (mut generator, curve) = train_generator::<f32>(
                    file.generator,
                    file.encoder,
                    &file.train,
                    &dataset,
                    Some(&diag),
                )?;
                save_generator(&out, &mut generator)?;
                let curve_path = out.with_extension("loss.csv");
                std::fs::write(&curve_path, loss_curve_csv(&curve))?;
                let last = curve.last().map(|p| p.loss).unwrap_or(f64::NAN);
                println!(
                    "generator saved to {} ({} params); final loss {last:.5}; curve at {}",
                    out.display(),
                    generator.param_count(),
                    curve_path.display()
                );
            }
            TrainCmd::Regressor { config, data, out } => {
                let file: RegressorTrainFile = read_json(&config)?;
                let dataset = LoadedDataset::load(&data)?;
                let radius_range = dataset.radius_range();
                let rendered = build_regressor_dataset::<f32>(
                    &dataset,
                    &[SplitKind::Rendered],
                    "rendered",
                    [true; 6],
                )?;
                let augmented = build_regressor_dataset::<f32>(
                    &dataset,
                    &[SplitKind::Augmented],
                    "augmented",
                    [true; 6],
                )?;
                let (mut model, report, _losses) = train_regressor(
                    file.model,
                    &file.train,
                    &[rendered, augmented],
                    radius_range,
                )?;
                save_regressor(&out, &mut model, radius_range)?;
                let report_path = out.with_extension("validation.csv");
                std::fs::write(&report_path, report.to_csv())?;
                println!("regressor saved to {}", out.display());
                print!("{}", report.to_csv());
            }
        },
        Cmd::Generate(args) => {
            let generator = load_generator::<f32>(&args.ckpt)?;
            let pose = CameraPose::new(
                args.az.to_radians(),
                args.el.to_radians(),
                args.r,
                args.pitch.to_radians(),
                args.yaw.to_radians(),
            )?;
            let image = generate_from_caption(&generator, &args.caption, &pose, args.seed)?;
            image.save_png(&args.out)?;
            println!("image written to {}", args.out.display());
        }
        Cmd::Eval(args) => {
            let generator = load_generator::<f32>(&args.gen)?;
            let spec = TestSpec::load(&args.spec)?;
            let manifest_data = match &args.data {
                Some(dir) => Some(LoadedDataset::load(dir)?),
                None => None,
            };
            let oracle: Box<dyn PoseOracle> =
                match parse_stub_oracle(&args.reg, generator.radius_range)? {
                    Some(stub) => stub,
                    None => {
                        let (model, _rr) = load_regressor::<f32>(Path::new(&args.reg))?;
                        Box::new(RegressorOracle { model })
                    }
                };
            let output = evaluate(
                &generator,
                oracle.as_ref(),
                &spec,
                manifest_data.as_ref().map(|d| &d.manifest),
            )?;
            write_eval_outputs(&args.out, &output)?;
            println!(
                "evaluated {} records ({} excluded); azimuth mean {:.2} deg, median {:.2} deg",
                output.records.len(),
                output.metrics.excluded,
                output.metrics.azimuth_deg.mean,
                output.metrics.azimuth_deg.median
            );
            println!("tables written to {}", args.out.display());
        }
    }
    Ok(())
}
