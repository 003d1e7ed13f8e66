use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mmaflc::batch::run_batch;
use mmaflc::identifier::{
    loss_history_csv, parse_weights, train_offline, write_weights, Identifier, NeuralNet,
    TrainingSet,
};
use mmaflc::plant::PlantModel;
use mmaflc::simkit::{run_episode, ControllerKind, EpisodeResult, Metrics, TrajectoryLog};
use serde::Serialize;

use crate::config::{ExperimentConfig, MetricsFormat};
use crate::error::CliError;

pub struct TrainSummary {
    pub weights: PathBuf,
    pub loss: PathBuf,
    pub final_loss: f64,
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainSummary, CliError> {
    let id = &cfg.identifier;
    let plant = PlantModel::new(cfg.plant.basis.clone(), &cfg.plant.theta, id.friction_coeff)
        .map_err(CliError::core)?;
    let set = TrainingSet::from_plant_grid(&plant, id.x1_range, id.x2_range, id.grid_points, id.alpha)
        .map_err(CliError::core)?;
    let init = NeuralNet::random_scaled(id.hidden, id.seed, id.init_scale);
    let training = train_offline(&init, &set, id.epochs).map_err(CliError::core)?;
    create_dir(out)?;
    let weights = out.join("weights.txt");
    let loss = out.join("loss.csv");
    write_file(&weights, &write_weights(&training.net))?;
    write_file(&loss, &loss_history_csv(&training.history))?;
    Ok(TrainSummary {
        weights,
        loss,
        final_loss: training.final_loss(),
    })
}

/// Loads the trained network when any of `kinds` needs one.
pub fn identifier_for(
    cfg: &ExperimentConfig,
    out: &Path,
    kinds: &[ControllerKind],
) -> Result<Option<Identifier>, CliError> {
    if !kinds.iter().any(ControllerKind::needs_identifier) {
        return Ok(None);
    }
    let path = cfg.weights_path(out);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::MissingWeights(path))
        }
        Err(source) => return Err(CliError::Read { path, source }),
    };
    let net = parse_weights(&text).map_err(|source| CliError::Artifact {
        path: path.clone(),
        source,
    })?;
    Ok(Some(Identifier::new(net, cfg.controller.law.identifier_mode)))
}

pub fn run(cfg: &ExperimentConfig, out: &Path, kind: ControllerKind) -> Result<EpisodeResult, CliError> {
    let ident = identifier_for(cfg, out, &[kind])?;
    let result = run_episode(&cfg.sim_config(kind), ident.as_ref()).map_err(CliError::core)?;
    write_episode(out, &result, &cfg.output.metrics)?;
    Ok(result)
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    kind: &'a str,
    metrics: &'a Metrics,
}

/// Trajectory logs per channel plus the metrics files.
pub fn write_episode(dir: &Path, result: &EpisodeResult, formats: &[MetricsFormat]) -> Result<(), CliError> {
    create_dir(dir)?;
    for (name, log) in mmaflc::simkit::episode::CHANNELS.iter().zip(&result.logs) {
        write_file(&dir.join(format!("{name}.csv")), &log.to_csv())?;
    }
    for format in formats {
        match format {
            MetricsFormat::KeyValue => {
                let text = format!("kind={}\n{}", result.kind, result.metrics.to_key_values());
                write_file(&dir.join("metrics.txt"), &text)?;
            }
            MetricsFormat::Json => {
                let record = MetricsRecord {
                    kind: result.kind.as_str(),
                    metrics: &result.metrics,
                };
                let mut text = serde_json::to_string_pretty(&record).expect("metrics serialize");
                text.push('\n');
                write_file(&dir.join("metrics.json"), &text)?;
            }
        }
    }
    Ok(())
}

pub fn compare(cfg: &ExperimentConfig, out: &Path, kinds: &[ControllerKind]) -> Result<String, CliError> {
    if kinds.len() < 2 {
        return Err(CliError::Usage(format!(
            "compare needs at least two kinds, got {}",
            kinds.len()
        )));
    }
    let ident = identifier_for(cfg, out, kinds)?;
    let configs: Vec<_> = kinds.iter().map(|&k| cfg.sim_config(k)).collect();
    for (c, k) in configs.iter().zip(kinds) {
        c.validate().map_err(|e| CliError::in_context(e, k.as_str()))?;
    }
    let results = run_batch(&configs, ident.as_ref())
        .into_iter()
        .zip(kinds)
        .map(|(r, k)| r.map_err(|e| CliError::in_context(e, k.as_str())))
        .collect::<Result<Vec<_>, _>>()?;

    let dirs = episode_dirs(kinds);
    for (r, d) in results.iter().zip(&dirs) {
        write_episode(&out.join(d), r, &cfg.output.metrics)?;
    }
    let ranking = rank(&results);
    let table = metrics_table(&results, &ranking);
    write_file(&out.join("compare.csv"), &table)?;
    Ok(table)
}

/// Completed runs first, then by settling time, then by ISE.
pub fn rank(results: &[EpisodeResult]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (&results[a].metrics, &results[b].metrics);
        mb.completed
            .cmp(&ma.completed)
            .then(ma.settling_time.total_cmp(&mb.settling_time))
            .then(ma.ise.total_cmp(&mb.ise))
    });
    order
}

pub const TABLE_HEADER: &str =
    "rank,kind,completed,settling_time,ise,overshoot,position_error,heading_error,final_pose_error";

fn metrics_table(results: &[EpisodeResult], ranking: &[usize]) -> String {
    let mut s = format!("{TABLE_HEADER}\n");
    for (pos, &i) in ranking.iter().enumerate() {
        let m = &results[i].metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            pos + 1,
            results[i].kind,
            m.completed,
            m.settling_time,
            m.ise,
            m.overshoot,
            m.position_error,
            m.heading_error,
            m.final_pose_error
        );
    }
    s
}

/// One directory per listed kind; repeats get a numeric suffix.
fn episode_dirs(kinds: &[ControllerKind]) -> Vec<String> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let seen = kinds[..i].iter().filter(|&&p| p == *k).count();
            if seen == 0 {
                k.as_str().to_string()
            } else {
                format!("{}-{}", k.as_str(), seen + 1)
            }
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "param,value,kind,completed,settled,settling_time,overshoot,ise,position_error,heading_error,final_pose_error";

pub fn sweep(
    cfg: &ExperimentConfig,
    out: &Path,
    param: &str,
    values: &[f64],
    kinds: &[ControllerKind],
) -> Result<String, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let mut configs = Vec::with_capacity(values.len() * kinds.len());
    let mut rows = Vec::with_capacity(configs.capacity());
    for &v in values {
        let mut c = cfg.clone();
        c.set(param, v)?;
        c.validate()
            .map_err(|e| CliError::Usage(format!("{param}={v}: {e}")))?;
        for &k in kinds {
            configs.push(c.sim_config(k));
            rows.push((v, k));
        }
    }
    let ident = identifier_for(cfg, out, kinds)?;
    let results = run_batch(&configs, ident.as_ref());
    let mut csv = format!("{SWEEP_HEADER}\n");
    for ((v, k), r) in rows.iter().zip(results) {
        let r = r.map_err(|e| CliError::in_context(e, format!("{param}={v}, kind {k}")))?;
        let m = &r.metrics;
        let _ = writeln!(
            csv,
            "{param},{v},{k},{},{},{},{},{},{},{},{}",
            m.completed,
            m.settled,
            m.settling_time,
            m.overshoot,
            m.ise,
            m.position_error,
            m.heading_error,
            m.final_pose_error
        );
    }
    create_dir(out)?;
    write_file(&out.join("sweep.csv"), &csv)?;
    Ok(csv)
}

pub struct PlotFiles {
    pub path: PathBuf,
    pub error: PathBuf,
    pub points: usize,
}

pub fn plotdata(log_path: &Path, out: &Path) -> Result<PlotFiles, CliError> {
    let text = std::fs::read_to_string(log_path).map_err(|source| CliError::Read {
        path: log_path.to_path_buf(),
        source,
    })?;
    let log = TrajectoryLog::parse_csv(&text).map_err(|source| CliError::Artifact {
        path: log_path.to_path_buf(),
        source,
    })?;
    let (path_csv, error_csv) = mmaflc::simkit::log::plot_series(&log);
    let stem = log_path
        .file_stem()
        .map_or_else(|| "log".into(), |s| s.to_string_lossy().into_owned());
    create_dir(out)?;
    let files = PlotFiles {
        path: out.join(format!("{stem}_path.csv")),
        error: out.join(format!("{stem}_error.csv")),
        points: log.len(),
    };
    write_file(&files.path, &path_csv)?;
    write_file(&files.error, &error_csv)?;
    Ok(files)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}
