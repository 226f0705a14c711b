//! Manifest-to-artifact pipeline: determinism, schema round trips and the
//! built-in validation suite.

use efriction_core::error::CoreError;
use efriction_core::manifest::parse_manifest;
use efriction_core::run::{run, validate_suite, RunOptions};
use efriction_core::series::SeriesFile;

const KERNEL_MANIFEST: &str = r#"
schema_version = 1
command = "kernels"

[model]
kind = "independent_band"
n_band = 64
w = 8.0
eps_d = { form = "linear", intercept = 0.0, slopes = [1.0] }
coupling = { form = "constant", value = 0.2 }

[broadening]
kind = "lorentzian"
eta = 0.4
omega = 0.4
epsilon = 0.4

[kernels]
points = [[-0.2], [0.0], [0.2]]
tau_max = 20.0
tau_steps = 50
eta_halvings = 2
"#;

#[test]
fn identical_manifests_produce_byte_identical_series() {
    let manifest = parse_manifest(KERNEL_MANIFEST).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let report = run(
            &manifest,
            KERNEL_MANIFEST.as_bytes(),
            &RunOptions {
                out_dir: dir.path().to_path_buf(),
            },
        )
        .unwrap();
        assert!(report.all_passed(), "{}", report.render());
    }
    for name in ["kernels.txt", "kernel_convergence.txt", "run_report.txt"] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn geometry_field_map_has_the_contracted_columns() {
    let text = r#"
schema_version = 1
command = "geometry"

[model]
kind = "spin_monopole"
b0 = 1.0

[grid]
axes = [
    { start = 0.2, step = 0.1, n = 3 },
    { start = -0.4, step = 0.1, n = 3 },
    { start = 0.5, step = 0.1, n = 3 },
]
level = 0
mass = 2000.0
"#;
    let manifest = parse_manifest(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run(
        &manifest,
        text.as_bytes(),
        &RunOptions {
            out_dir: dir.path().to_path_buf(),
        },
    )
    .unwrap();
    assert!(report.all_passed(), "{}", report.render());
    let series = SeriesFile::read(&dir.path().join("geometry_field.txt")).unwrap();
    for col in [
        "x0", "x1", "x2", "energy", "a0", "a1", "a2", "re_q00", "re_q12", "im_q01", "phi",
    ] {
        assert!(series.column_index(col).is_some(), "missing column {col}");
    }
    assert_eq!(series.rows.len(), 27);
    // every column carries a unit tag
    assert!(series.columns.iter().all(|c| !c.unit.is_empty()));
    // manifest hash ties the artifact to its configuration
    assert_eq!(series.manifest_hash.len(), 64);
}

#[test]
fn kernel_sweep_artifacts_are_re_readable_and_consistent() {
    let manifest = parse_manifest(KERNEL_MANIFEST).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run(
        &manifest,
        KERNEL_MANIFEST.as_bytes(),
        &RunOptions {
            out_dir: dir.path().to_path_buf(),
        },
    )
    .unwrap();
    let kernels = SeriesFile::read(&dir.path().join("kernels.txt")).unwrap();
    assert_eq!(kernels.rows.len(), 3);
    // DMS column equals Re γ̄ column (the identity is visible in the export)
    let dms = kernels.column_values("dms00").unwrap();
    let re_bare = kernels.column_values("re_bare00").unwrap();
    for (a, b) in dms.iter().zip(&re_bare) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
    }
    let conv = SeriesFile::read(&dir.path().join("kernel_convergence.txt")).unwrap();
    assert_eq!(conv.rows.len(), 3 * 3); // three points × (1 + 2 halvings)
    let drift = conv.column_values("drift_vs_previous").unwrap();
    assert!(drift.iter().all(|d| d.is_finite()));
}

#[test]
fn manifest_validation_reports_all_errors_with_suggestions() {
    let text = r#"
schema_version = 1
command = "kernels"

[model]
kind = "independent_band"
n_band = 64
w = 8.0
eps_d = { form = "linear", intercept = 0.0, slopes = [1.0] }
coupling = { form = "constant", value = 0.2 }

[broadening]
kind = "gaussian"
eta = -0.1
omega = 0.0
epsilon = 0.0
epsilom = 0.0
"#;
    let err = parse_manifest(text).unwrap_err();
    let CoreError::ManifestInvalid(errors) = err else {
        panic!("expected a validation error list");
    };
    let joined = errors.join("\n");
    assert!(joined.contains("epsilom"), "{joined}");
    assert!(joined.contains("did you mean `epsilon`?"), "{joined}");
    assert!(joined.contains("[kernels] is required"), "{joined}");
    assert!(
        errors.len() >= 3,
        "expected the full error list, got {joined}"
    );
}

#[test]
fn validate_suite_is_green() {
    let report = validate_suite(1);
    assert!(report.all_passed(), "{}", report.render());
    assert_eq!(report.checks.len(), 10);
}
