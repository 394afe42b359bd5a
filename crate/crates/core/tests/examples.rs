// Runs the examples' library entry points with short schedules.

#[allow(dead_code)]
mod robust_gaussian_fit {
    include!("../examples/robust_gaussian_fit.rs");
}
#[allow(dead_code)]
mod beta_elbo_gradients {
    include!("../examples/beta_elbo_gradients.rs");
}
#[allow(dead_code)]
mod train_rvae_synthetic {
    include!("../examples/train_rvae_synthetic.rs");
}
#[allow(dead_code)]
mod outlier_detection_roc {
    include!("../examples/outlier_detection_roc.rs");
}
#[allow(dead_code)]
mod beta_sweep {
    include!("../examples/beta_sweep.rs");
}
#[allow(dead_code)]
mod select_beta_probe {
    include!("../examples/select_beta_probe.rs");
}
#[allow(dead_code)]
mod latent_export {
    include!("../examples/latent_export.rs");
}
#[allow(dead_code)]
mod idx_manifest_roundtrip {
    include!("../examples/idx_manifest_roundtrip.rs");
}

use rvae::robustfit::FitMethod;

#[test]
fn robust_fit_ignores_the_far_component() {
    let dir = tempfile::tempdir().unwrap();
    let fits = robust_gaussian_fit::run(dir.path()).unwrap();
    assert_eq!(fits[0].method, FitMethod::Mle);
    assert!(fits[2].mu.abs() < 0.3 && fits[0].mu > 0.5);
    assert!(dir.path().join("fit_density.csv").exists());
}

#[test]
fn gradients_agree_with_finite_differences() {
    assert!(beta_elbo_gradients::run(0.05).unwrap() < 1e-5);
}

#[test]
fn training_writes_checkpoints_and_lowers_the_loss() {
    let dir = tempfile::tempdir().unwrap();
    let logs = train_rvae_synthetic::run(dir.path(), 5).unwrap();
    for (name, log) in &logs {
        assert!(log.epochs.last().unwrap().total < log.epochs[0].total, "{name}");
        let ckpt = rvae::vaemodel::read_checkpoint(dir.path().join(format!("{name}.ckpt"))).unwrap();
        assert_eq!(ckpt.params.arch.input_dim, 64);
    }
}

#[test]
fn detection_reports_are_complete() {
    let dir = tempfile::tempdir().unwrap();
    let reports = outlier_detection_roc::run(dir.path(), 5).unwrap();
    for (beta, r) in &reports {
        assert!(r.auc > 0.5 && r.ratio_metric > 1.0, "beta {beta}: {} {}", r.auc, r.ratio_metric);
        let pgm = std::fs::read(dir.path().join(format!("outliers_beta{beta}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5"));
    }
}

#[test]
fn sweep_fills_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let grid = beta_sweep::run(dir.path(), 2, 2).unwrap();
    assert_eq!(grid.cells.len(), 8);
    assert!(grid.cells.iter().all(|c| c.error.is_none() && c.auc.is_finite()));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn probe_writes_one_grid_per_beta() {
    let dir = tempfile::tempdir().unwrap();
    let results = select_beta_probe::run(dir.path(), 2).unwrap();
    assert_eq!(results.len(), 3);
    for r in &results {
        assert!(dir.path().join(format!("probe_beta_{}.pgm", r.beta)).exists());
    }
}

#[test]
fn latent_csv_has_a_row_per_record() {
    let csv = latent_export::run(2).unwrap();
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn manifest_round_trip_keeps_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, back) = idx_manifest_roundtrip::run(dir.path()).unwrap();
    assert_eq!(ds.is_outlier, back.is_outlier);
    assert_eq!(ds.labels, back.labels);
    assert_eq!(back.outlier_count(), 20);
}
