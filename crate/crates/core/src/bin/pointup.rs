//! `pointup`: train, apply and compare point-cloud upsampling units.
//!
//! Exit codes: 0 success, 1 property failure, 2 usage/config error,
//! 3 numerical failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pointup::checks::{run_expand_suite, run_gradient_suite, run_knn_suite};
use pointup::io::config::{train_config_from_kv, train_config_to_kv, CompareConfig, DataConfig, KvConfig};
use pointup::io::report::{comparison_csv, loss_csv, metrics_csv};
use pointup::io::{load_checkpoint, read_off, read_xyz, save_checkpoint, write_xyz};
use pointup::metrics::MetricReport;
use pointup::pipeline::{compare_units, train};
use pointup::{Error, Result};

#[derive(Parser)]
#[command(name = "pointup", version, about = "Point-cloud upsampling with pluggable feature-expansion units")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on synthetic shapes; writes model.puxp and loss.csv.
    Train(TrainArgs),
    /// Upsample an XYZ point cloud with a trained model.
    Upsample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chamfer, Hausdorff and (with a mesh) point-to-face distances.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Also write the CSV report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate a matrix of configurations from a key=value file.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic vs finite-difference gradients of every operation and unit.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run a single named case.
        #[arg(long)]
        case: Option<String>,
    },
    /// Accelerated vs brute-force KNN, plus the index-expansion laws.
    Knncheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        clouds: usize,
        #[arg(long, default_value_t = 100)]
        graphs: usize,
        /// Run a single KNN case.
        #[arg(long)]
        case: Option<usize>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    unit: String,
    #[arg(long, default_value = "edgeconv_stack")]
    backbone: String,
    #[arg(long, default_value_t = 4)]
    ratio: usize,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Feature width shared by backbone and unit.
    #[arg(long, default_value_t = 32)]
    width: usize,
    /// Backbone layers.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value = "expand")]
    index_mode: String,
    /// `default` picks the unit's own regression stage.
    #[arg(long, default_value = "default")]
    regression: String,
    /// Affine layers inside each EdgeConv.
    #[arg(long, default_value_t = 1)]
    edge_depth: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Input points per training sample.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Comma-separated synthetic shapes.
    #[arg(long, default_value = "sphere,torus,cylinder,box_surface")]
    shapes: String,
    #[arg(long, default_value_t = 1)]
    per_shape: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

fn print_resolved(command: &str, kv: &KvConfig) {
    println!("# resolved config");
    println!("command={command}");
    print!("{}", kv.to_text());
    println!("# end config");
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode> {
    let mut kv = KvConfig::new();
    kv.set("unit.kind", &a.unit);
    kv.set("backbone.kind", &a.backbone);
    kv.set("backbone.width", a.width);
    kv.set("backbone.depth", a.depth);
    kv.set("unit.ratio", a.ratio);
    kv.set("unit.k", a.k);
    kv.set("unit.index_mode", &a.index_mode);
    if a.regression != "default" {
        kv.set("unit.regression", &a.regression);
    }
    kv.set("unit.edge_depth", a.edge_depth);
    kv.set("train.steps", a.steps);
    kv.set("train.seed", a.seed);
    kv.set("train.lr", a.lr);
    kv.set("train.batch", a.batch);
    kv.set("data.shapes", &a.shapes);
    kv.set("data.n", a.n);
    kv.set("data.train_per_shape", a.per_shape);
    kv.set("data.seed", a.data_seed);
    let cfg = train_config_from_kv(&kv)?;
    let data = DataConfig::from_kv(&kv)?;

    let mut resolved = KvConfig::new();
    train_config_to_kv(&cfg, &mut resolved);
    data.to_kv(&mut resolved);
    resolved.set("out", a.out.display());
    print_resolved("train", &resolved);

    let (train_set, _) = data.build(cfg.model.unit.ratio)?;
    let outcome = train(&cfg, &train_set)?;
    fs::create_dir_all(&a.out)?;
    save_checkpoint(a.out.join("model.puxp"), &outcome.model)?;
    fs::write(a.out.join("loss.csv"), loss_csv(&outcome.losses))?;
    if let (Some(first), Some(last)) = (outcome.losses.first(), outcome.losses.last()) {
        println!("loss: {first:.6e} -> {last:.6e} over {} steps", outcome.losses.len());
    }
    println!("wrote {}", a.out.join("model.puxp").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_upsample(model: PathBuf, input: PathBuf, out: PathBuf) -> Result<ExitCode> {
    let m = load_checkpoint(&model)?;
    let mut kv = KvConfig::new();
    pointup::io::config::model_spec_to_kv(m.spec(), &mut kv);
    kv.set("model", model.display());
    kv.set("input", input.display());
    kv.set("out", out.display());
    print_resolved("upsample", &kv);
    let cloud = read_xyz(&input)?;
    let dense = m.upsample(&cloud)?;
    write_xyz(&out, &dense)?;
    println!("{} -> {} points", cloud.len(), dense.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(pred: PathBuf, gt: PathBuf, mesh: Option<PathBuf>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut kv = KvConfig::new();
    kv.set("pred", pred.display());
    kv.set("gt", gt.display());
    kv.set("mesh", mesh.as_ref().map(|m| m.display().to_string()).unwrap_or_else(|| "none".into()));
    kv.set("out", out.as_ref().map(|m| m.display().to_string()).unwrap_or_else(|| "stdout".into()));
    print_resolved("eval", &kv);
    let p = read_xyz(&pred)?;
    let g = read_xyz(&gt)?;
    let mesh = match mesh {
        Some(path) => {
            let (m, dropped) = read_off(path)?;
            if dropped > 0 {
                eprintln!("warning: dropped {dropped} zero-area faces");
            }
            Some(m)
        }
        None => None,
    };
    let label = pred.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let row = MetricReport::compute(label, &p, &g, mesh.as_ref())?;
    match row.p2f {
        Some(p2f) => println!("CD {:.6e}  HD {:.6e}  P2F {:.6e}", row.cd, row.hd, p2f),
        None => println!("CD {:.6e}  HD {:.6e}", row.cd, row.hd),
    }
    let csv = metrics_csv(&[row]);
    match out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(config: PathBuf, out: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = CompareConfig::from_kv(&KvConfig::read(&config)?)?;
    print_resolved("compare", &cfg.to_kv());
    let configs = cfg.configs()?;
    let (train_set, test_set) = cfg.data.build(cfg.base.model.unit.ratio)?;
    let rows = compare_units(&configs, &cfg.seeds, &train_set, &test_set)?;
    let csv = comparison_csv(&rows);
    match out {
        Some(path) => {
            fs::write(&path, &csv)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn suite_exit(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Upsample { model, input, out } => cmd_upsample(model, input, out),
        Command::Eval { pred, gt, mesh, out } => cmd_eval(pred, gt, mesh, out),
        Command::Compare { config, out } => cmd_compare(config, out),
        Command::Gradcheck { seed, case } => {
            let mut kv = KvConfig::new();
            kv.set("seed", seed);
            kv.set("case", case.as_deref().unwrap_or("all"));
            kv.set("step", pointup::checks::GRAD_STEP);
            kv.set("tolerance", pointup::checks::GRAD_TOL);
            print_resolved("gradcheck", &kv);
            let report = run_gradient_suite(seed, case.as_deref())?;
            print!("{report}");
            Ok(suite_exit(report.passed()))
        }
        Command::Knncheck { seed, clouds, graphs, case } => {
            let mut kv = KvConfig::new();
            kv.set("seed", seed);
            kv.set("clouds", clouds);
            kv.set("graphs", graphs);
            kv.set("case", case.map_or("all".to_string(), |c| c.to_string()));
            print_resolved("knncheck", &kv);
            let knn = run_knn_suite(seed, clouds, case)?;
            print!("{knn}");
            let mut ok = knn.passed();
            if case.is_none() {
                let exp = run_expand_suite(seed, graphs);
                print!("{exp}");
                ok &= exp.passed();
            }
            Ok(suite_exit(ok))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code: Error = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}
