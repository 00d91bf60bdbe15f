use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use extremal::data::{self, DataStats, Dataset};
use extremal::extremal::{multi_start, ExtremalResult};
use extremal::losses::ConstraintFile;
use extremal::nnet::{default_architecture, init_network, load_model, save_model, Network};
use extremal::optim::{self, TrainReport};
use extremal::reproduce;
use serde_json::json;

use crate::manifest::{
    output_path, report_path, write_report, write_text, ReproduceSettings, RunManifest,
};
use crate::svg::{self, Chart};
use crate::{
    warn, CliError, Common, ExtremizeArgs, GenerateArgs, PlotArgs, ReproduceArgs, TrainArgs,
};

fn loaded(config: Option<&PathBuf>) -> Result<RunManifest, CliError> {
    config.map_or_else(|| Ok(RunManifest::default()), |p| RunManifest::load(p))
}

fn required(flag: Option<PathBuf>, loaded: &RunManifest, key: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| loaded.inputs.get(key).cloned())
        .ok_or_else(|| CliError::Usage(format!("--{key} is required")))
}

fn read_data(path: &Path) -> Result<(Dataset, DataStats), CliError> {
    let data = data::read_csv(path)?;
    let stats = data::stats(&data)?;
    Ok((data, stats))
}

impl Common {
    fn out(&self, loaded: &RunManifest, key: &str, name: &str) -> PathBuf {
        output_path(self.out.as_ref(), loaded.outputs.get(key), name)
    }
}

pub fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let file = loaded(args.common.config.as_ref())?;
    let mut gen = file.generation.clone().unwrap_or_default();
    if let Some(seed) = args.common.seed {
        gen.seed = seed;
    }
    if let Some(n) = args.n {
        gen.n = n as usize;
    }
    if let Some(noise) = args.noise_std {
        gen.noise_std = noise;
    }
    let out = args.common.out(&file, "data", "data.csv");
    let dataset = data::generate(&gen)?;
    crate::manifest::ensure_parent(&out)?;
    data::write_csv(&dataset, &out)?;
    let stats = data::stats(&dataset)?;

    let report = report_path(&out);
    let mut manifest = RunManifest::for_command("generate");
    manifest.generation = Some(gen);
    manifest.outputs.insert("data".into(), out.clone());
    manifest.outputs.insert("report".into(), report.clone());
    write_report(&report, &manifest, json!({ "stats": stats }))?;
    println!("wrote {} samples to {}", dataset.len(), out.display());
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let file = loaded(args.common.config.as_ref())?;
    let data_path = required(args.data, &file, "data")?;
    let mut cfg = file.training.clone().unwrap_or_default();
    let mut init_seed = file.init_seed.unwrap_or(cfg.seed);
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
        init_seed = seed;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.validation_fraction {
        cfg.validation_fraction = v;
    }
    if args.patience.is_some() {
        cfg.patience = args.patience;
    }
    let arch = args
        .arch
        .or(file.architecture.clone())
        .unwrap_or_else(default_architecture);
    let out = args.common.out(&file, "model", "model.json");

    let (dataset, stats) = read_data(&data_path)?;
    if cfg.epochs == 0 {
        warn("--epochs 0: the model is written unchanged from its initialization");
    }
    let net = init_network::<f64>(&arch, dataset.dim(), init_seed)?;
    let (net, report) = optim::train(net, &dataset, &cfg)?;
    crate::manifest::ensure_parent(&out)?;
    save_model(&net, &out)?;

    let report_file = report_path(&out);
    let mut manifest = RunManifest::for_command("train");
    manifest.architecture = Some(arch);
    manifest.init_seed = Some(init_seed);
    manifest.training = Some(cfg);
    manifest.inputs.insert("data".into(), data_path);
    manifest.outputs.insert("model".into(), out.clone());
    manifest
        .outputs
        .insert("report".into(), report_file.clone());
    write_report(
        &report_file,
        &manifest,
        json!({ "train": report, "stats": stats, "parameter_checksum": format!("{:016x}", net.checksum()) }),
    )?;
    println!(
        "trained {} epochs on {} samples, validation MSE {:.6}; wrote {}",
        report.epochs_run,
        report.train_size,
        report.validation_mse,
        out.display()
    );
    Ok(())
}

fn write_trajectory(path: &Path, result: &ExtremalResult<f64>) -> Result<(), CliError> {
    let points = result.trajectory.as_deref().unwrap_or(&[]);
    let dim = result.x_hat.len();
    let mut text = String::from("iter");
    for i in 0..dim {
        let _ = write!(text, ",x{i}");
    }
    text.push_str(",y,loss\n");
    for p in points {
        let _ = write!(text, "{}", p.iter);
        for v in &p.x {
            let _ = write!(text, ",{v:?}");
        }
        let _ = writeln!(text, ",{:?},{:?}", p.y, p.loss);
    }
    write_text(path, &text)
}

pub fn extremize(args: ExtremizeArgs) -> Result<(), CliError> {
    let file = loaded(args.common.config.as_ref())?;
    let model_path = required(args.model, &file, "model")?;
    let data_path = args.data.or_else(|| file.inputs.get("data").cloned());
    let constraints = match &args.constraints {
        Some(p) => ConstraintFile::load(p)?,
        None => file
            .constraints
            .clone()
            .unwrap_or_else(ConstraintFile::toy_default),
    };
    let mut cfg = file.extremal.clone().unwrap_or_default();
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    if let Some(v) = args.restarts {
        cfg.restarts = v as usize;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = args.grad_tol {
        cfg.grad_tol = v;
    }
    let trajectory = args
        .trajectory
        .or_else(|| file.outputs.get("trajectory").cloned());
    cfg.record_trajectory = trajectory.is_some();
    let init = file.init.clone().unwrap_or_default();
    let out = args.common.out(&file, "report", "extremal_report.json");

    let net: Network<f64> = load_model(&model_path)?;
    let net = optim::freeze(net);
    let data = data_path.as_deref().map(read_data).transpose()?;
    let stats = data.as_ref().map(|(_, s)| s);
    let loss = constraints.build(net.input_dim(), stats)?;
    let before = net.checksum();
    let mut result = multi_start(&net, &loss, &cfg, &init, data.as_ref().map(|(d, _)| d))?;
    debug_assert_eq!(before, net.checksum());

    if let Some(path) = &trajectory {
        write_trajectory(path, &result)?;
    }
    result.trajectory = None;

    let mut manifest = RunManifest::for_command("extremize");
    manifest.constraints = Some(constraints.resolved(stats)?);
    manifest.extremal = Some(cfg);
    manifest.init = Some(init);
    manifest.inputs.insert("model".into(), model_path);
    if let Some(p) = data_path {
        manifest.inputs.insert("data".into(), p);
    }
    manifest.outputs.insert("report".into(), out.clone());
    if let Some(p) = trajectory {
        manifest.outputs.insert("trajectory".into(), p);
    }
    write_report(&out, &manifest, json!({ "result": result }))?;
    println!(
        "x_hat {:?}  y_hat {:.6}  loss {:.6}  ({} iterations, restart {}, {})",
        result.x_hat,
        result.y_hat,
        result.final_loss,
        result.iterations,
        result.best_restart,
        if result.converged {
            "converged"
        } else {
            "iteration limit"
        }
    );
    Ok(())
}

pub fn reproduce(args: ReproduceArgs) -> Result<(), CliError> {
    let file = loaded(args.common.config.as_ref())?;
    let recorded = file.reproduce.clone();
    let seeds: Vec<u64> = match (args.common.seed, args.seeds, &recorded) {
        (None, None, Some(r)) => r.seeds.clone(),
        (base, count, _) => {
            let base = base.unwrap_or(0);
            (0..count.unwrap_or(5)).map(|k| base + k).collect()
        }
    };
    let quick = args.quick || recorded.is_some_and(|r| r.quick);
    let out = args.common.out(&file, "table", "reproduce.csv");

    let rep = reproduce::reproduce(&seeds, quick)?;
    print!("{}", reproduce::format_table(&rep.rows));
    crate::manifest::ensure_parent(&out)?;
    reproduce::write_table_csv(&rep.rows, &out)?;

    let report = report_path(&out);
    let mut manifest = RunManifest::for_command("reproduce");
    manifest.reproduce = Some(ReproduceSettings {
        seeds: seeds.clone(),
        quick,
    });
    manifest.outputs.insert("table".into(), out.clone());
    manifest.outputs.insert("report".into(), report.clone());
    write_report(
        &report,
        &manifest,
        json!({ "outcomes": rep.outcomes, "rows": rep.rows }),
    )?;

    let failed = rep.rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} of {} rows outside their bands",
            rep.rows.len()
        )));
    }
    println!(
        "all {} rows within their bands; wrote {}",
        rep.rows.len(),
        out.display()
    );
    Ok(())
}

const SLICE_POINTS: usize = 101;

fn model_slice(
    net: &Network<f64>,
    stats: &DataStats,
    data: &Dataset,
    dim: usize,
) -> Result<Vec<(f64, f64)>, CliError> {
    let column = data.inputs().iter().map(|x| x[dim]);
    let lo = column.clone().fold(f64::INFINITY, f64::min);
    let hi = column.fold(f64::NEG_INFINITY, f64::max);
    let mut x = stats.mu.clone();
    (0..SLICE_POINTS)
        .map(|k| {
            x[dim] = lo + (hi - lo) * k as f64 / (SLICE_POINTS - 1) as f64;
            Ok((x[dim], net.forward(&x)?))
        })
        .collect()
}

fn train_history(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| extremal::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| extremal::Error::Parse {
            field: String::new(),
            message: e.to_string(),
        })?;
    let train = doc.get("train").cloned().unwrap_or(serde_json::Value::Null);
    let report: TrainReport =
        serde_json::from_value(train).map_err(|e| extremal::Error::Parse {
            field: "train".into(),
            message: e.to_string(),
        })?;
    Ok(report.loss_history)
}

pub fn plot(args: PlotArgs) -> Result<(), CliError> {
    let file = loaded(args.config.as_ref())?;
    let data_path = required(args.data, &file, "data")?;
    let model_path = args.model.or_else(|| file.inputs.get("model").cloned());
    let out_dir = args
        .out_dir
        .unwrap_or_else(|| output_path(None, file.outputs.get("plots"), "plots"));

    let (dataset, stats) = read_data(&data_path)?;
    let net = match &model_path {
        Some(p) if p.exists() => Some(load_model::<f64>(p)?),
        Some(p) => {
            warn(&format!(
                "model {} not found; drawing data only",
                p.display()
            ));
            None
        }
        None => {
            warn("no --model given; drawing data only");
            None
        }
    };
    if let Some(net) = &net {
        if net.input_dim() != dataset.dim() {
            return Err(extremal::Error::Shape {
                expected: dataset.dim(),
                got: net.input_dim(),
            }
            .into());
        }
    }

    let mut written = Vec::new();
    let caption = "line: model with the other inputs fixed at their data mean";
    for i in 0..dataset.dim() {
        let points: Vec<(f64, f64)> = dataset
            .inputs()
            .iter()
            .zip(dataset.outputs())
            .map(|(x, &y)| (x[i], y))
            .collect();
        let slice = net
            .as_ref()
            .map(|n| model_slice(n, &stats, &dataset, i))
            .transpose()?;
        let (title, x_label) = (format!("y against x{i}"), format!("x{i}"));
        let chart = Chart {
            title: &title,
            x_label: &x_label,
            y_label: "y",
            caption: slice.is_some().then_some(caption),
        };
        let path = out_dir.join(format!("feature_x{i}.svg"));
        write_text(&path, &svg::scatter(&chart, &points, slice.as_deref()))?;
        written.push(path);
    }

    let history_path = args.train_report.or_else(|| {
        model_path
            .as_deref()
            .map(report_path)
            .filter(|p| p.exists())
    });
    match history_path {
        Some(p) => {
            let history = train_history(&p)?;
            let line: Vec<(f64, f64)> = history
                .iter()
                .enumerate()
                .map(|(k, &l)| ((k + 1) as f64, l.log10()))
                .collect();
            let chart = Chart {
                title: "training loss",
                x_label: "epoch",
                y_label: "log10 mean training loss",
                caption: None,
            };
            let path = out_dir.join("loss_curve.svg");
            write_text(&path, &svg::line(&chart, &line))?;
            written.push(path);
        }
        None => warn("no training report found; skipping the loss curve"),
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
