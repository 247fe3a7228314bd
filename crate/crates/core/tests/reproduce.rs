//! Every pinned reproduction, shrunk to a few epochs and short chains, runs
//! end to end and writes its report and tables.

use varp::optimizer::ConstantSource;
use varp::posterior_mh::MhConfig;
use varp::runner::{pinned_config, reproduce_config, ExperimentConfig, RunOptions, EXPERIMENTS};

fn shrink(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.network.latent_dim = 3;
    cfg.optimizer.epochs = 4;
    cfg.optimizer.monitor_every = 2;
    cfg.optimizer.lagrangian.period = 2;
    cfg.optimizer.lagrangian.update_samples = 500;
    cfg.optimizer.lagrangian.gap_samples = 100;
    cfg.estimator.t = 5;
    cfg.estimator.u = 5;
    cfg.estimator.n_outer = 5;
    if let Some(c) = cfg.constraint.as_mut() {
        c.epochs = Some(4);
        c.pipeline = c.pipeline.map(|p| match p {
            ConstantSource::FittedPrior { .. } => ConstantSource::FittedPrior { samples: 2000 },
            ConstantSource::LogUniformJeffreys { .. } => ConstantSource::LogUniformJeffreys { samples: 20_000 },
        });
    }
    let short = MhConfig {
        total_iters: 800,
        keep_last: 400,
        ..Default::default()
    };
    if let Some(p) = cfg.posterior.as_mut() {
        p.mh = MhConfig {
            covariance: p.mh.covariance.clone(),
            ..short.clone()
        };
        if p.reference_mh.is_some() {
            p.reference_mh = Some(short.clone());
        }
    }
    let ev = &mut cfg.evaluation;
    ev.prior_samples = 400;
    ev.posterior_samples = 400;
    ev.null_permutations = 4;
    ev.null_rows = 100;
    ev.jeffreys_grid.n_theta1 = 10;
    ev.jeffreys_grid.n_theta2 = 10;
    if let Some(s) = cfg.sweep.as_mut() {
        s.alphas.truncate(2);
        s.latent_dims = vec![2, 3];
        s.hidden_dim = 3;
        s.seeds = 2;
        s.n_values.truncate(2);
        s.datasets_per_n = 2;
    }
    cfg
}

#[test]
fn shrunken_reproductions_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    for id in EXPERIMENTS {
        let cfg = shrink(pinned_config(id).unwrap());
        let opts = RunOptions {
            out: Some(tmp.path().join(id)),
            ..Default::default()
        };
        let (dir, report) = reproduce_config(id, cfg, &opts).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert_eq!(report.experiment, id);
        assert!(!report.checks.is_empty(), "{id}: empty report");
        for f in ["report.json", "report.txt", "manifest.json"] {
            assert!(dir.join(f).is_file(), "{id}: missing {f}");
        }
        for t in &report.tables {
            assert!(dir.join(t).is_file(), "{id}: missing table {t}");
        }
    }
}

#[test]
fn sweep_tables_have_one_row_per_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |id: &str| {
        let opts = RunOptions {
            out: Some(tmp.path().join(id)),
            ..Default::default()
        };
        reproduce_config(id, shrink(pinned_config(id).unwrap()), &opts).unwrap().0
    };
    let rows = |p: std::path::PathBuf| csv::Reader::from_path(p).unwrap().records().count();
    assert_eq!(rows(run("alpha_sweep").join("alpha_sweep.csv")), 2);
    // Two latent dimensions times two architectures.
    assert_eq!(rows(run("latent_dim_sweep").join("latent_dim_sweep.csv")), 4);
    let curve = run("mean_norm_curve").join("mean_norm_curve.csv");
    assert!(rows(curve) >= 2);
}

#[test]
fn unknown_reproduction_id_is_rejected() {
    let cfg = pinned_config("gaussvar").unwrap();
    let err = reproduce_config("gauss", cfg, &RunOptions::default()).unwrap_err();
    assert_eq!(varp::runner::exit_code(&err), 1);
}
