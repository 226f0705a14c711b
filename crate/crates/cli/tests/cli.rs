//! End-to-end binary tests: exit codes, determinism and plot emission.

use std::path::Path;
use std::process::Command;

fn efriction() -> Command {
    Command::new(env!("CARGO_BIN_EXE_efriction"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const GEOMETRY_OK: &str = r#"
schema_version = 1
command = "geometry"

[model]
kind = "conical"
a = 1.0
c = 1.0

[grid]
axes = [
    { start = 0.5, step = 0.05, n = 9 },
    { start = -0.2, step = 0.05, n = 9 },
]
level = 0
mass = 2000.0

[loop]
center = [0.0, 0.0]
radius = 1.0
points = 128
plane = [0, 1]
"#;

#[test]
fn geometry_run_succeeds_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("geo.toml");
    write(&manifest, GEOMETRY_OK);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = efriction()
            .args(["geometry", "--manifest"])
            .arg(&manifest)
            .arg("--out")
            .arg(out)
            .env("EFRICTION_THREADS", "2")
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for name in ["geometry_field.txt", "berry_loop.txt"] {
        assert_eq!(
            std::fs::read(out_a.join(name)).unwrap(),
            std::fs::read(out_b.join(name)).unwrap(),
            "{name} not deterministic"
        );
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.toml");
    write(
        &manifest,
        r#"
schema_version = 1
command = "geometry"

[model]
kind = "conical"
a = 1.0
c = 1.0

[grid]
axez = [{ start = 0.5, step = 0.05, n = 9 }]
"#,
    );
    let output = efriction()
        .args(["geometry", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("axez"), "{stderr}");
    assert!(stderr.contains("did you mean `axes`?"), "{stderr}");

    // CLI subcommand must match the manifest command
    let good = dir.path().join("good.toml");
    write(&good, GEOMETRY_OK);
    let status = efriction()
        .args(["kernels", "--manifest"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("out2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn failed_invariant_exits_1() {
    // a coarse-dt exact run violates the 1e−8 energy-conservation check
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("coarse.toml");
    write(
        &manifest,
        r#"
schema_version = 1
command = "propagate-exact"

[model]
kind = "avoided_crossing"
k_f = 0.02
x0 = 1.0
delta = 0.0
c = 0.005

[propagation]
start = -8.0
step = 0.03131115459882583
n = 512
mass = 2000.0
dt = 4.0
n_steps = 100
snapshot_stride = 25
initial = { adiabatic = { center = -2.0, width = 0.45, momentum = 6.0, level = 0 } }
"#,
    );
    let out = dir.path().join("out");
    let status = efriction()
        .args(["propagate-exact", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let report = std::fs::read_to_string(out.join("run_report.txt")).unwrap();
    assert!(report.contains("[FAIL] energy-conserved"), "{report}");
}

#[test]
fn runtime_error_exits_3_and_writes_diagnostics() {
    // packet aimed at the grid edge: edge-leak abort
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("leak.toml");
    write(
        &manifest,
        r#"
schema_version = 1
command = "propagate-exact"

[model]
kind = "avoided_crossing"
k_f = 0.02
x0 = 1.0
delta = 0.0
c = 0.005

[propagation]
start = -5.0
step = 0.0392156862745098
n = 256
mass = 200.0
dt = 1.0
n_steps = 2000
snapshot_stride = 500
initial = { component = { center = 3.0, width = 0.5, momentum = 12.0, component = 0 } }
"#,
    );
    let out = dir.path().join("out");
    let output = efriction()
        .args(["propagate-exact", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let report = std::fs::read_to_string(out.join("run_report.txt")).unwrap();
    assert!(report.contains("edge-leak"), "{report}");
}

#[test]
fn plots_are_emitted_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("fric.toml");
    write(
        &manifest,
        r#"
schema_version = 1
command = "propagate-friction"

[model]
kind = "avoided_crossing"
k_f = 0.02
x0 = 1.0
delta = 0.0
c = 0.005

[propagation]
start = -6.0
step = 0.0234375
n = 512
mass = 2000.0
dt = 0.5
n_steps = 400
snapshot_stride = 100
initial = { adiabatic = { center = -1.5, width = 0.4, momentum = 0.0, level = 0 } }

[friction]
mode = "kostin"
gamma = { constant = { gamma = 1.0 } }
"#,
    );
    let out = dir.path().join("out");
    let status = efriction()
        .args(["propagate-friction", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&out)
        .arg("--plot")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["plot_energy.svg", "plot_x.svg", "plot_density.svg"] {
        let path = out.join(name);
        assert!(path.exists(), "missing {name}");
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.contains("<svg"), "{name} is not an SVG");
    }
}

#[test]
fn validate_command_reports_all_checks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("validate.toml");
    write(
        &manifest,
        "schema_version = 1\ncommand = \"validate\"\nseed = 1\n",
    );
    let output = efriction()
        .args(["validate", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 10, "{stdout}");
}
