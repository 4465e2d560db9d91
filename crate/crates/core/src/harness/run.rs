use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    add_awgn, circular_convolve, generate_dd_channel, sample_scenario, NoiseConfig,
};
use crate::error::{Error, Result};
use crate::estimator::{extract_paths, reconstruct_channel, Estimator};
use crate::grid::{vec, DdGrid, DdMatrix, PathParams};
use crate::metrics::{
    associate_and_score_gated, joint_grid_oracle, nmse_linear, ratio_to_db, ser, TrialScore,
};
use crate::transceiver::{
    effective_matrix_from_channel, lmmse_detect, make_data_frame, make_pilot_frame,
    recover_effective_channel, Constellation,
};

use super::config::{ExperimentConfig, Mode};

const STREAM_SCENARIO: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_DATA: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one random stream of one trial. Depends only on its inputs, so
/// results do not depend on how trials are scheduled across threads.
pub fn derive_seed(master: u64, stream: u64, trial: u64, point: u64) -> u64 {
    [stream, trial, point]
        .iter()
        .fold(splitmix64(master), |acc, &v| {
            splitmix64(acc ^ splitmix64(v))
        })
}

/// Everything one trial measured.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialOutcome {
    pub score: TrialScore,
    pub nmse_linear: Option<f64>,
    /// SER with the true effective channel (`ser` mode).
    pub ser_perfect_csi: Option<f64>,
    /// Separable and joint searches agree within one step (`oracle-check`).
    pub oracle_agrees: Option<bool>,
    pub num_estimates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub sweep_db: f64,
    pub trial: usize,
    pub outcome: std::result::Result<TrialOutcome, String>,
}

/// Aggregated statistics of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_db: f64,
    /// Named columns in output order.
    pub columns: Vec<(String, f64)>,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
    /// Ordered by sweep point, then trial.
    pub trials: Vec<TrialRecord>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    grid: DdGrid,
    estimator: Estimator,
    pilot: DdMatrix,
}

/// Run on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_threads(cfg, None)
}

/// Run on a dedicated pool of `threads` workers (`None` uses the global pool).
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid = cfg.estimation_grid()?;
    let ctx = Context {
        cfg,
        grid,
        estimator: Estimator::new(&grid, cfg.search)?.with_ipi_elimination(cfg.ipi_elimination),
        pilot: make_pilot_frame(&cfg.pilot, &grid)?,
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.sweep_db.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let work = || -> Vec<TrialRecord> {
        jobs.par_iter()
            .map(|&(point, trial)| {
                let outcome = run_trial(&ctx, point, trial).map_err(|e| {
                    log::warn!("trial {trial} at {} dB failed: {e}", cfg.sweep_db[point]);
                    e.to_string()
                });
                TrialRecord {
                    point,
                    sweep_db: cfg.sweep_db[point],
                    trial,
                    outcome,
                }
            })
            .collect()
    };
    let trials = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let rows = (0..cfg.sweep_db.len())
        .map(|p| {
            summarize(
                cfg,
                cfg.sweep_db[p],
                &trials[p * cfg.trials..(p + 1) * cfg.trials],
            )
        })
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        rows,
        trials,
    })
}

fn rng_for(ctx: &Context, stream: u64, trial: usize, point: usize) -> ChaCha8Rng {
    let master = ctx.cfg.seed ^ splitmix64(ctx.cfg.scenario.seed);
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, trial as u64, point as u64))
}

fn run_trial(ctx: &Context, point: usize, trial: usize) -> Result<TrialOutcome> {
    let db = ctx.cfg.sweep_db[point];
    // the scenario stream ignores the sweep point: every point sees the same channels
    let mut scen_rng = rng_for(ctx, STREAM_SCENARIO, trial, 0);
    let mut noise_rng = rng_for(ctx, STREAM_NOISE, trial, point);
    match ctx.cfg.mode {
        Mode::Nmse | Mode::ParamMse => {
            let paths = sample_scenario(&ctx.cfg.scenario, &ctx.grid, &mut scen_rng)?;
            let noise = pilot_noise(db, ctx.cfg.pilot.e_p)?;
            estimation_trial(ctx, &paths, noise.as_ref(), &mut noise_rng)
        }
        Mode::OracleCheck => {
            let path = random_single_path(&ctx.grid, &mut scen_rng);
            let noise = pilot_noise(db, ctx.cfg.pilot.e_p)?;
            oracle_trial(ctx, &path, noise.as_ref(), &mut noise_rng)
        }
        Mode::Ser => {
            let paths = sample_scenario(&ctx.cfg.scenario, &ctx.grid, &mut scen_rng)?;
            let mut data_rng = rng_for(ctx, STREAM_DATA, trial, point);
            ser_trial(ctx, &paths, db, &mut noise_rng, &mut data_rng)
        }
    }
}

/// An estimate can sit at most `half_width` from its integer tap, which is
/// itself within half a cell of the path that produced it.
fn association_gate(ctx: &Context) -> f64 {
    ctx.cfg.search.half_width + 0.5
}

/// Noise at `psnr_db`; an infinite PSNR means a noiseless link.
fn pilot_noise(psnr_db: f64, e_p: f64) -> Result<Option<NoiseConfig>> {
    if psnr_db == f64::INFINITY {
        Ok(None)
    } else {
        NoiseConfig::from_psnr_db(psnr_db, e_p).map(Some)
    }
}

fn receive_pilot(
    ctx: &Context,
    h: &DdMatrix,
    noise: Option<&NoiseConfig>,
    rng: &mut ChaCha8Rng,
) -> Result<DdMatrix> {
    let mut y = circular_convolve(h, &ctx.pilot)?;
    if let Some(noise) = noise {
        y = add_awgn(&y, noise, rng);
    }
    Ok(recover_effective_channel(&y, &ctx.cfg.pilot))
}

fn estimation_trial(
    ctx: &Context,
    paths: &[PathParams],
    noise: Option<&NoiseConfig>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let h = generate_dd_channel(paths, &ctx.grid);
    let h_hat = receive_pilot(ctx, &h, noise, rng)?;
    let est = ctx.estimator.estimate_sequential(&h_hat)?;
    let nmse = nmse_linear(&reconstruct_channel(&est, &ctx.grid), &h)?;
    let mut score = associate_and_score_gated(paths, &est, &ctx.grid, association_gate(ctx));
    score.nmse_db = Some(ratio_to_db(nmse));
    Ok(TrialOutcome {
        score,
        nmse_linear: Some(nmse),
        num_estimates: est.len(),
        ..Default::default()
    })
}

/// Unit-modulus path with an interior integer tap and fractional offsets in
/// `[-0.5, 0.5)` on both axes.
fn random_single_path(grid: &DdGrid, rng: &mut ChaCha8Rng) -> PathParams {
    let half_n = (grid.n() / 2) as i64;
    let l = rng.random_range(1..grid.m() - 1) as f64 + rng.random_range(-0.5..0.5);
    let k = rng.random_range(-(half_n - 1)..half_n) as f64 + rng.random_range(-0.5..0.5);
    PathParams::new(
        l,
        k,
        Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()),
    )
}

fn oracle_trial(
    ctx: &Context,
    path: &PathParams,
    noise: Option<&NoiseConfig>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let h = generate_dd_channel(std::slice::from_ref(path), &ctx.grid);
    let h_hat = receive_pilot(ctx, &h, noise, rng)?;
    let tap = extract_paths(&h_hat, 1)?[0];
    let (l_sep, k_sep) = ctx.estimator.templates().estimate(&h_hat, &tap)?;
    let (l_joint, k_joint) = joint_grid_oracle(&h_hat, &tap, &ctx.cfg.search)?;
    let tol = ctx.cfg.search.step + 1e-9;
    Ok(TrialOutcome {
        oracle_agrees: Some((l_sep - l_joint).abs() <= tol && (k_sep - k_joint).abs() <= tol),
        num_estimates: 1,
        ..Default::default()
    })
}

fn ser_trial(
    ctx: &Context,
    paths: &[PathParams],
    snr_db: f64,
    noise_rng: &mut ChaCha8Rng,
    data_rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let noise = NoiseConfig::from_sigma2(sigma2)?;
    let h = generate_dd_channel(paths, &ctx.grid);
    let h_hat = receive_pilot(ctx, &h, Some(&noise), noise_rng)?;
    let est = ctx.estimator.estimate_sequential(&h_hat)?;
    let h_est = reconstruct_channel(&est, &ctx.grid);

    let constellation = Constellation::from_order(ctx.cfg.ser.order)?;
    let (frame, _) = make_data_frame(ctx.cfg.ser.order, data_rng, &ctx.grid)?;
    let y = add_awgn(&circular_convolve(&h, &frame.symbols)?, &noise, noise_rng);
    let y_vec = vec(&y);
    let sent: Vec<usize> = vec(&frame.symbols)
        .iter()
        .map(|&z| constellation.slice(z))
        .collect();

    let det_est = lmmse_detect(
        &y_vec,
        &effective_matrix_from_channel(&h_est)?,
        sigma2,
        constellation,
    )?;
    let det_true = lmmse_detect(
        &y_vec,
        &effective_matrix_from_channel(&h)?,
        sigma2,
        constellation,
    )?;
    let mut score = associate_and_score_gated(paths, &est, &ctx.grid, association_gate(ctx));
    score.ser = Some(ser(&det_est, &sent)?);
    Ok(TrialOutcome {
        score,
        ser_perfect_csi: Some(ser(&det_true, &sent)?),
        num_estimates: est.len(),
        ..Default::default()
    })
}

/// Sample mean and standard error of the mean (`NaN` when undefined).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn push_stat(columns: &mut Vec<(String, f64)>, name: &str, values: &[f64]) {
    let (mean, se) = mean_stderr(values);
    columns.push((format!("{name}_mean"), mean));
    columns.push((format!("{name}_stderr"), se));
}

fn summarize(cfg: &ExperimentConfig, sweep_db: f64, records: &[TrialRecord]) -> SummaryRow {
    let ok: Vec<&TrialOutcome> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let collect = |f: &dyn Fn(&TrialOutcome) -> Option<f64>| -> Vec<f64> {
        ok.iter().filter_map(|o| f(o)).collect()
    };
    let mut columns = Vec::new();
    match cfg.mode {
        Mode::Nmse => {
            // averaged in the linear domain; the error bar is mapped by the
            // first-order (delta-method) slope of 10 log10
            let (mean, se) = mean_stderr(&collect(&|o| o.nmse_linear));
            columns.push(("metric_mean".into(), ratio_to_db(mean)));
            columns.push((
                "metric_stderr".into(),
                10.0 / std::f64::consts::LN_10 * se / mean,
            ));
        }
        Mode::ParamMse => {
            push_stat(
                &mut columns,
                "delay_mse_s2",
                &collect(&|o| o.score.mse_delay_s2),
            );
            push_stat(
                &mut columns,
                "doppler_mse_hz2",
                &collect(&|o| o.score.mse_doppler_hz2),
            );
            push_stat(
                &mut columns,
                "delay_mse_grid2",
                &collect(&|o| o.score.mse_delay_grid2),
            );
            push_stat(
                &mut columns,
                "doppler_mse_grid2",
                &collect(&|o| o.score.mse_doppler_grid2),
            );
            push_stat(&mut columns, "gain_mse", &collect(&|o| o.score.mse_gain));
            push_stat(
                &mut columns,
                "misses",
                &collect(&|o| Some(o.score.misses as f64)),
            );
        }
        Mode::Ser => {
            let (mean, se) = mean_stderr(&collect(&|o| o.score.ser));
            columns.push(("metric_mean".into(), mean));
            columns.push(("metric_stderr".into(), se));
            push_stat(
                &mut columns,
                "perfect_csi_ser",
                &collect(&|o| o.ser_perfect_csi),
            );
        }
        Mode::OracleCheck => {
            let agree = collect(&|o| o.oracle_agrees.map(|a| if a { 1.0 } else { 0.0 }));
            let (mean, se) = mean_stderr(&agree);
            columns.push(("metric_mean".into(), mean));
            columns.push(("metric_stderr".into(), se));
            columns.push(("agreements".into(), agree.iter().sum()));
        }
    }
    SummaryRow {
        sweep_db,
        columns,
        trials_ok: ok.len(),
        trials_failed: records.len() - ok.len(),
    }
}
