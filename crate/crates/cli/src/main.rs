use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use lgtrack::io::{read_detections, read_ground_truth, read_tracks, write_tracks, LabeledBox, RunConfig};
use lgtrack::sim::{ablate, evaluate, simulate, standard_variants, ScenarioSpec, DEFAULT_IOU_THRESHOLD};
use lgtrack::run_sequence;

mod render;

#[derive(Parser)]
#[command(name = "lgtrack", version, about = "Confidence-guided multi-object tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one or more detection files.
    Track {
        /// Detection CSVs; a sibling `.emb` sidecar is picked up automatically.
        #[arg(long = "in", num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Result file, or a directory when several inputs are given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Config overrides, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Generate a synthetic scene: dets.csv, dets.emb and gt.csv.
    Simulate {
        #[arg(long, default_value = "easy", conflicts_with = "scenario")]
        preset: String,
        /// TOML scenario file.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Overrides the preset or file seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a result file against ground truth.
    Evaluate {
        #[arg(long)]
        res: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
    },
    /// Run the toggle grid over seeded scenes and print a table.
    Ablate {
        #[arg(long, default_value = "hard")]
        preset: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw result boxes and ids into PNG frames.
    Render {
        #[arg(long)]
        res: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Directory of `{frame:06}.png|jpg` backgrounds.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long, default_value_t = 1280)]
        width: u32,
        #[arg(long, default_value_t = 720)]
        height: u32,
    },
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn track(inputs: Vec<PathBuf>, out: Option<PathBuf>, config: Option<PathBuf>, overrides: &[String]) -> Result<()> {
    let cfg = load_config(config.as_deref(), overrides)?;
    let inputs = if inputs.is_empty() {
        cfg.input.clone().into_iter().collect()
    } else {
        inputs
    };
    let out = out.or_else(|| cfg.output.clone());
    let (Some(out), false) = (out, inputs.is_empty()) else {
        bail!("need at least one input (--in) and an output (--out)");
    };

    let jobs: Vec<(PathBuf, PathBuf)> = if inputs.len() == 1 {
        vec![(inputs[0].clone(), out)]
    } else {
        std::fs::create_dir_all(&out)?;
        let mut seen = std::collections::BTreeSet::new();
        inputs
            .iter()
            .map(|p| {
                let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                if !seen.insert(stem.clone()) {
                    bail!("two inputs share the name {stem:?}");
                }
                Ok((p.clone(), out.join(format!("{stem}.txt"))))
            })
            .collect::<Result<_>>()?
    };

    jobs.par_iter().try_for_each(|(input, output)| -> Result<()> {
        let stream = read_detections(input).with_context(|| format!("reading {}", input.display()))?;
        let rows = run_sequence(&stream, &cfg.tracker)?;
        write_tracks(&rows, output).with_context(|| format!("writing {}", output.display()))?;
        log::info!("{} -> {} ({} rows)", input.display(), output.display(), rows.len());
        Ok(())
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track {
            inputs,
            out,
            config,
            overrides,
        } => track(inputs, out, config, &overrides),
        Command::Simulate {
            preset,
            scenario,
            seed,
            out_dir,
        } => {
            let spec = match scenario {
                Some(p) => {
                    let mut spec = ScenarioSpec::from_toml(&std::fs::read_to_string(&p)?)
                        .with_context(|| format!("loading {}", p.display()))?;
                    if let Some(s) = seed {
                        spec.seed = s;
                    }
                    spec
                }
                None => ScenarioSpec::preset(&preset, seed.unwrap_or(0))?,
            };
            simulate(&spec)?.write(&out_dir)?;
            Ok(())
        }
        Command::Evaluate { res, gt, iou } => {
            let rows: Vec<LabeledBox> = read_tracks(&res)?.iter().map(LabeledBox::from).collect();
            let gt = read_ground_truth(&gt)?;
            let r = evaluate(&rows, &gt, iou)?;
            println!("MOTA\t{:.3}", r.mota);
            println!("IDF1\t{:.3}", r.idf1);
            println!("IDSW\t{}", r.idsw);
            println!("FP\t{}", r.fp);
            println!("FN\t{}", r.fn_);
            println!("GT\t{}", r.gt_count);
            Ok(())
        }
        Command::Ablate {
            preset,
            seeds,
            first_seed,
            out,
        } => {
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let scenes = (first_seed..first_seed + seeds)
                .map(|s| ScenarioSpec::preset(&preset, s))
                .collect::<lgtrack::Result<Vec<_>>>()?;
            let table = ablate(&scenes, &standard_variants())?;
            let tsv = table.to_tsv();
            print!("{tsv}");
            if let Some(p) = out {
                std::fs::write(&p, &tsv)?;
            }
            Ok(())
        }
        Command::Render {
            res,
            out_dir,
            frames,
            width,
            height,
        } => {
            let rows = read_tracks(&res)?;
            let written = render::render(&rows, &out_dir, frames.as_deref(), width, height)?;
            log::info!("wrote {} frames", written.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
