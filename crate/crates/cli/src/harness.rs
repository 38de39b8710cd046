use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use h2mor::baselines::{irka, quadvf, tfirka, BaselineRecord, IrkaConfig, QuadVfConfig};
use h2mor::ph2::{run, Ph2Config, RunRecord};
use h2mor::systems::{h2_error, QuadratureOptions, RationalRom, TransferFunctionModel};
use h2mor::Complex64;

use crate::config::{Algorithm, ExperimentConfig, InitialPoints};
use crate::model::load_model;
use crate::rom_io::RomFile;
use crate::{write_atomic, CliError};

pub const SUMMARY_HEADER: &str = "algorithm,r,fom_evals,rel_h2_error,converged,wall_time_s";
pub const HISTORY_HEADER: &str = "iteration,fom_evals,projected_residual,step,rel_h2_error";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub r: usize,
    /// Model counter after the run (each run starts from a fresh counter).
    pub fom_evals: usize,
    /// `None` when the error cannot be measured or the run failed.
    pub rel_h2_error: Option<f64>,
    pub converged: bool,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub fom_evals: usize,
    pub projected_residual: Option<f64>,
    pub step: Option<f64>,
    pub rel_h2_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: ResultRow,
    pub history: Vec<HistoryRow>,
    pub rom: Option<RationalRom>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub runs: Vec<RunOutcome>,
}

impl Report {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.runs.iter().map(|r| &r.row)
    }

    pub fn all_failed(&self) -> bool {
        self.runs.iter().all(|r| r.rom.is_none())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header.split(',')).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn summary_csv(rows: &[&ResultRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        SUMMARY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.algorithm.name().to_string(),
                r.r.to_string(),
                r.fom_evals.to_string(),
                opt(r.rel_h2_error),
                r.converged.to_string(),
                format!("{:.6}", r.wall_time_s),
            ]
        }),
    )
}

pub fn history_csv(rows: &[HistoryRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        HISTORY_HEADER,
        rows.iter().map(|h| {
            vec![
                h.iteration.to_string(),
                h.fom_evals.to_string(),
                opt(h.projected_residual),
                opt(h.step),
                opt(h.rel_h2_error),
            ]
        }),
    )
}

fn ph2_history(rec: &RunRecord) -> Vec<HistoryRow> {
    rec.iterations
        .iter()
        .enumerate()
        .map(|(k, it)| HistoryRow {
            iteration: k,
            fom_evals: it.fom_evals,
            projected_residual: Some(it.projected_residual),
            step: it.step,
            rel_h2_error: it.h2_error.map(|e| e.relative),
        })
        .collect()
}

fn baseline_history(rec: &BaselineRecord) -> Vec<HistoryRow> {
    rec.iterations
        .iter()
        .enumerate()
        .map(|(k, it)| HistoryRow {
            iteration: k,
            fom_evals: it.fom_evals,
            projected_residual: None,
            step: it.step,
            rel_h2_error: it.h2_error.map(|e| e.relative),
        })
        .collect()
}

fn points(p: &Option<InitialPoints>, r: usize) -> Option<Vec<Complex64>> {
    p.as_ref()
        .and_then(|p| p.for_degree(r))
        .map(|v| v.into_iter().map(Into::into).collect())
}

fn initial_points(cfg: &ExperimentConfig, r: usize) -> Option<Vec<Complex64>> {
    points(&cfg.params.initial_points, r)
}

fn shifts(
    cfg: &ExperimentConfig,
    model: &TransferFunctionModel,
    r: usize,
) -> Result<Vec<Complex64>, h2mor::Error> {
    points(&cfg.params.initial_shifts, r)
        .or_else(|| initial_points(cfg, r))
        .or_else(|| model.default_shifts(r))
        .ok_or_else(|| {
            h2mor::Error::InvalidArgument(
                "initial_points are required for models without a realization".into(),
            )
        })
}

/// Runs one algorithm at one degree on `model`, whose counter starts at zero.
fn run_algorithm(
    cfg: &ExperimentConfig,
    model: &TransferFunctionModel,
    algo: Algorithm,
    r: usize,
) -> Result<(RationalRom, bool, Vec<HistoryRow>), h2mor::Error> {
    let p = &cfg.params;
    let quad = QuadratureOptions {
        points: cfg.h2_error_quad_points,
        scale: 10.0,
    };
    let track = p.track_error.then_some(quad);
    match algo {
        Algorithm::Ph2 => {
            let mut c = Ph2Config::new(r, initial_points(cfg, r).unwrap_or_default());
            c.tol_term = p.tol_term;
            c.max_outer_iters = p.max_iters;
            c.track_error = track;
            if let Some(a) = p.angle_tol {
                c.angle_tol = a;
            }
            if let Some(k) = p.kernel_tol {
                c.kernel_tol = k;
            }
            let (rom, rec) = run(model, &c)?;
            Ok((rom, rec.status.converged(), ph2_history(&rec)))
        }
        Algorithm::Irka | Algorithm::Tfirka => {
            let mut c = IrkaConfig::new(r, shifts(cfg, model, r)?);
            c.tol_term = p.tol_term;
            c.max_iters = p.max_iters;
            c.track_error = track;
            let (rom, rec) = if algo == Algorithm::Irka {
                irka(model, &c)?
            } else {
                tfirka(model, &c)?
            };
            Ok((rom, rec.converged, baseline_history(&rec)))
        }
        Algorithm::Quadvf => {
            let mut c = QuadVfConfig::new(r, p.quad_nodes);
            c.scale_l = p.scale_l;
            let (rom, rec) = quadvf(model, &c)?;
            Ok((rom, rec.converged, baseline_history(&rec)))
        }
    }
}

pub fn run_one(
    cfg: &ExperimentConfig,
    model: &TransferFunctionModel,
    algo: Algorithm,
    r: usize,
) -> RunOutcome {
    let model = model.fork();
    let start = Instant::now();
    let result = run_algorithm(cfg, &model, algo, r);
    let wall_time_s = start.elapsed().as_secs_f64();
    let fom_evals = model.fom_evals();
    let quad = QuadratureOptions {
        points: cfg.h2_error_quad_points,
        scale: 10.0,
    };
    match result {
        Ok((rom, converged, history)) => {
            let rel = h2_error(&model, &rom, quad).ok().map(|e| e.relative);
            RunOutcome {
                row: ResultRow {
                    algorithm: algo,
                    r,
                    fom_evals,
                    rel_h2_error: rel,
                    converged,
                    wall_time_s,
                    error: None,
                },
                history,
                rom: Some(rom),
            }
        }
        Err(e) => RunOutcome {
            row: ResultRow {
                algorithm: algo,
                r,
                fom_evals,
                rel_h2_error: None,
                converged: false,
                wall_time_s,
                error: Some(e.to_string()),
            },
            history: Vec::new(),
            rom: None,
        },
    }
}

fn file_stem(algo: Algorithm, r: usize) -> String {
    format!("{}_r{r}", algo.name())
}

fn write_run(cfg: &ExperimentConfig, out: &RunOutcome) -> Result<(), CliError> {
    let dir = cfg.output_path();
    let stem = file_stem(out.row.algorithm, out.row.r);
    write_atomic(
        &dir.join(format!("history_{stem}.csv")),
        &history_csv(&out.history)?,
    )?;
    if let Some(rom) = &out.rom {
        RomFile::from(rom).save(&dir.join(format!("rom_{stem}.json")))?;
    }
    Ok(())
}

/// Runs every `(algorithm, r)` pair, in parallel when several threads are
/// available, and writes `summary.csv` plus per-run history and ROM files.
/// Rows follow the configured algorithm order, then `rom_dims` order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let model = load_model(cfg)?;
    let dir = cfg.output_path();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let jobs: Vec<(Algorithm, usize)> = cfg
        .algorithm
        .to_vec()
        .into_iter()
        .flat_map(|a| cfg.rom_dims.iter().map(move |&r| (a, r)))
        .collect();
    let threads = cfg
        .threads
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .min(jobs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutcome, CliError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(algo, r)) = jobs.get(k) else { break };
                let out = run_one(cfg, &model, algo, r);
                let written = write_run(cfg, &out).map(|_| out);
                results.lock().expect("results lock")[k] = Some(written);
            });
        }
    });
    let runs = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>, _>>()?;
    let report = Report { runs };
    let rows: Vec<&ResultRow> = report.rows().collect();
    write_atomic(&dir.join("summary.csv"), &summary_csv(&rows)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_header_and_formatting() {
        let row = ResultRow {
            algorithm: Algorithm::Tfirka,
            r: 4,
            fom_evals: 16,
            rel_h2_error: None,
            converged: false,
            wall_time_s: 0.25,
            error: None,
        };
        let text = String::from_utf8(summary_csv(&[&row]).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SUMMARY_HEADER));
        assert_eq!(lines.next(), Some("tfirka,4,16,,false,0.250000"));
    }

    #[test]
    fn history_leaves_missing_values_empty() {
        let h = [HistoryRow {
            iteration: 0,
            fom_evals: 8,
            projected_residual: Some(0.5),
            step: None,
            rel_h2_error: None,
        }];
        let text = String::from_utf8(history_csv(&h).unwrap()).unwrap();
        assert_eq!(text, format!("{HISTORY_HEADER}\n0,8,0.5,,\n"));
    }
}
