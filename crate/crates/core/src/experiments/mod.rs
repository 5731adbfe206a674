//! Seeded Monte Carlo harness: configuration, method registry, runner and
//! output files.

mod config;
mod methods;
mod output;
mod preset;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{ExperimentConfig, Scenario, Sweep, SweepPoint, SweepVar};
pub use methods::{
    Analog, Conventional, FixedCenter, Hybrid, Massive, MethodOutcome, MethodRegistry, MulticastMethod,
    PassMulti, PassSingle, PassSinglePa, TrialContext,
};
pub use output::{
    csv_string, emit_csv, emit_summary, format_sig, parse_csv, round_sig, summarize, summary_table, CsvSink,
    ResultRecord, SummaryRow, CSV_HEADER, RATE_DIGITS,
};
pub use preset::{analytic_preset, fig3_rows, fig3_table, Fig3Row, FIG3_DX, PRESETS};

use crate::elementwise::GridSpec;
use crate::error::{Error, Result};
use crate::model::{sample_users_with, SystemParams, UserSet};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// The `index`-th output of a SplitMix64 stream started at `base`.
pub fn splitmix64(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial. The same trial index draws the same users at every
/// sweep value whose geometry matches.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    splitmix64(base, trial as u64)
}

/// Users of one trial, drawn with ChaCha8 seeded by `seed`.
///
/// The linear scenario puts every user at the common offset `linear_y`
/// (default `Dy/2`) with x uniform on [0, Dx]; the others sample the full
/// service region.
pub fn draw_users(scenario: Scenario, params: &SystemParams, linear_y: Option<f64>, seed: u64) -> UserSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match scenario {
        Scenario::SinglePaLinear => {
            let y = linear_y.unwrap_or(params.dy / 2.0);
            let positions = (0..params.users).map(|_| [rng.gen_range(0.0..=params.dx), y]).collect();
            UserSet::new(positions).expect("users is at least one")
        }
        _ => sample_users_with(params, &mut rng),
    }
}

/// Records and per-cell statistics of a finished run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }
}

/// Runs the experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &MethodRegistry, threads: Option<usize>) -> Result<ExperimentOutput> {
    run_experiment_with(cfg, registry, threads, |_| Ok(()))
}

/// Runs the experiment, writing `results.csv` and `summary.txt` into `dir`.
/// The CSV is flushed after every sweep value.
pub fn run_experiment_to_dir(
    cfg: &ExperimentConfig,
    registry: &MethodRegistry,
    threads: Option<usize>,
    dir: &Path,
) -> Result<ExperimentOutput> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut sink = CsvSink::create(&dir.join("results.csv"))?;
    let out = run_experiment_with(cfg, registry, threads, |batch| sink.write(batch))?;
    emit_summary(cfg.sweep.variable.as_str(), &out.summary, &dir.join("summary.txt"))?;
    Ok(out)
}

/// Runs the experiment and hands each sweep value's records to `on_batch`
/// in output order. Method failures become NaN records; configuration and
/// sink errors abort.
pub fn run_experiment_with<F>(
    cfg: &ExperimentConfig,
    registry: &MethodRegistry,
    threads: Option<usize>,
    mut on_batch: F,
) -> Result<ExperimentOutput>
where
    F: FnMut(&[ResultRecord]) -> Result<()>,
{
    cfg.validate(registry)?;
    let names = cfg.method_names();
    let methods: Vec<&dyn MulticastMethod> = names.iter().map(|n| registry.get(n)).collect::<Result<_>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut records = Vec::with_capacity(cfg.sweep.values.len() * cfg.trials * methods.len());
    for &value in &cfg.sweep.values {
        let point = cfg.point(value)?;
        let grid = GridSpec::new(point.grid_points, point.params.dx)?;
        // one row per trial, one entry per method
        let by_trial: Vec<Vec<ResultRecord>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| run_trial(cfg, &point, &grid, &methods, trial_seed(cfg.seed, trial)))
                .collect()
        });
        let batch: Vec<ResultRecord> = (0..methods.len())
            .flat_map(|m| by_trial.iter().map(move |row| row[m].clone()))
            .collect();
        on_batch(&batch)?;
        records.extend(batch);
    }
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

fn run_trial(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    grid: &GridSpec,
    methods: &[&dyn MulticastMethod],
    seed: u64,
) -> Vec<ResultRecord> {
    let users = draw_users(cfg.scenario, &point.params, cfg.linear_y, seed);
    let ctx = TrialContext {
        params: &point.params,
        users: &users,
        grid,
        seed,
        max_iters: point.max_iters,
    };
    methods
        .iter()
        .map(|method| {
            let start = Instant::now();
            let outcome = method.run(&ctx);
            let wall = start.elapsed().as_secs_f64();
            let (rate, iters) = match outcome {
                Ok(o) if o.rate.is_finite() && o.rate >= 0.0 => (round_sig(o.rate, RATE_DIGITS), o.iters),
                _ => (f64::NAN, 0),
            };
            ResultRecord {
                scenario: cfg.scenario.as_str().to_string(),
                sweep_var: cfg.sweep.variable.as_str().to_string(),
                sweep_value: point.value,
                method: method.name().to_string(),
                seed,
                rate_bps_hz: rate,
                wall_s: if cfg.timing { (wall * 1e6).round() / 1e6 } else { 0.0 },
                iters,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"scenario": "single-waveguide", "sweep": {{"variable": "dx", "values": [10, 20]}},
                "trials": 3, "seed": 11, "grid_points": 101,
                "system": {{"pas_per_waveguide": 2, "users": 2}}{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference SplitMix64 generator seeded with 0
        assert_eq!(splitmix64(0, 0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(0, 1), 0x6e78_9e6a_a1b9_65f4);
        assert_ne!(trial_seed(1, 0), trial_seed(0, 0));
    }

    #[test]
    fn two_methods_one_point_gives_two_records() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scenario": "single-waveguide", "sweep": {"variable": "dx", "values": [10]}, "trials": 1,
                "grid_points": 101, "methods": ["pass-single", "conventional"], "system": {"users": 2, "pas_per_waveguide": 2}}"#,
        )
        .unwrap();
        let out = run_experiment(&cfg, &MethodRegistry::with_defaults(), Some(1)).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.summary.len(), 2);
    }

    #[test]
    fn ordering_and_pairing() {
        let cfg = small("");
        let out = run_experiment(&cfg, &MethodRegistry::with_defaults(), Some(2)).unwrap();
        assert_eq!(out.records.len(), 2 * 3 * 3);
        assert_eq!(out.failures(), 0);
        let methods = cfg.method_names();
        for (i, r) in out.records.iter().enumerate() {
            let (v, rest) = (i / 9, i % 9);
            assert_eq!(r.sweep_value, [10.0, 20.0][v]);
            assert_eq!(r.method, methods[rest / 3]);
            assert_eq!(r.seed, trial_seed(11, rest % 3));
            assert_eq!(r.wall_s, 0.0);
        }
        assert_eq!(out.summary.len(), 2 * 3);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = small("");
        let reg = MethodRegistry::with_defaults();
        let a = csv_string(&run_experiment(&cfg, &reg, Some(1)).unwrap().records).unwrap();
        let b = csv_string(&run_experiment(&cfg, &reg, Some(4)).unwrap().records).unwrap();
        assert_eq!(a, b);
    }

    struct Broken;

    impl MulticastMethod for Broken {
        fn name(&self) -> &'static str {
            "broken"
        }
        fn supports(&self, _: Scenario) -> bool {
            true
        }
        fn run(&self, _: &TrialContext<'_>) -> Result<MethodOutcome> {
            Err(Error::Solver("always fails".into()))
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut reg = MethodRegistry::with_defaults();
        reg.register(Box::new(Broken));
        let cfg = small(r#", "methods": ["broken", "pass-single"]"#);
        let out = run_experiment(&cfg, &reg, Some(1)).unwrap();
        assert_eq!(out.failures(), 6);
        assert!(out.records.iter().filter(|r| r.method == "pass-single").all(|r| !r.failed()));
        let broken = out.summary.iter().find(|s| s.method == "broken").unwrap();
        assert_eq!((broken.n, broken.failures), (0, 3));
    }

    #[test]
    fn linear_users_share_one_offset() {
        let p = SystemParams::derive(&crate::model::SystemConfig { pas_per_waveguide: 1, users: 5, ..Default::default() })
            .unwrap();
        let users = draw_users(Scenario::SinglePaLinear, &p, None, 3);
        assert!(users.iter().all(|u| u[1] == p.dy / 2.0 && (0.0..=p.dx).contains(&u[0])));
        let again = draw_users(Scenario::SinglePaLinear, &p, Some(1.0), 3);
        assert!(again.iter().zip(users.iter()).all(|(a, b)| a[0] == b[0] && a[1] == 1.0));
    }

    #[test]
    fn directory_output_matches_memory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("");
        let out = run_experiment_to_dir(&cfg, &MethodRegistry::with_defaults(), Some(2), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text, csv_string(&out.records).unwrap());
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert_eq!(summary.lines().count(), 1 + out.summary.len());
    }
}
