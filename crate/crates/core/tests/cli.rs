use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use pgsim_core::cli::{provenance_header, resolve, run, Command, RunConfig};
use pgsim_core::device::DeviceSpec;
use pgsim_core::effective::{ac_shift_coefficient, Gate};
use pgsim_core::Error;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn parse(text: &str) -> RunConfig {
    RunConfig::from_toml_str(text).unwrap()
}

/// Small, fast circuit for command plumbing tests.
const SMALL: &str = r#"
[hilbert]
levels_q1 = 2
levels_q2 = 2
levels_c = 2
"#;

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn empty_config_is_reference_device() {
    let c = parse("");
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.device, DeviceSpec::reference());
    assert_eq!(c.seed, 0);
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    for (text, path) in [
        ("bogus = 1", "bogus"),
        ("[fidelity]\nmc_sample = 3", "fidelity"),
        ("[device.q1]\nfrequency = 4.4\nanharmonicity = -0.3\nt3 = 1.0", "device.q1"),
        ("[scan.propagation]\nsteps = 3", "scan.propagation"),
    ] {
        let e = RunConfig::from_toml_str(text).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        assert!(e.is_validation());
        let msg = e.to_string();
        assert!(msg.contains(path) || msg.contains("unknown field"), "{text}: {msg}");
    }
    let e = RunConfig::from_toml_str("[fidelity]\ndeltas = [0.1, \"x\"]").unwrap_err();
    assert!(e.to_string().contains("fidelity.deltas"), "{e}");
}

#[test]
fn shipped_configs_validate() {
    for name in ["reference.toml", "bswap.toml"] {
        let c = RunConfig::from_file(&configs_dir().join(name)).unwrap();
        for cmd in [Command::Chevron, Command::Strengths, Command::Leakage, Command::Fidelity] {
            c.validate(cmd).unwrap_or_else(|e| panic!("{name} {}: {e}", cmd.name()));
        }
        // No measured pairs are shipped.
        assert!(c.validate(Command::Calibrate).unwrap_err().is_validation());
    }
}

#[test]
fn recorded_header_reproduces_the_resolved_config() {
    let c = RunConfig::from_file(&configs_dir().join("reference.toml")).unwrap();
    for cmd in [Command::Chevron, Command::Leakage, Command::Fidelity] {
        let resolved = resolve(&c, cmd).unwrap();
        let header = provenance_header(cmd, &resolved);
        let body: String = header
            .lines()
            .skip_while(|l| !l.starts_with("# resolved config"))
            .skip(1)
            .map(|l| format!("{}\n", l.trim_start_matches('#').strip_prefix(' ').unwrap_or("")))
            .collect();
        assert_eq!(parse(&body), resolved, "{}", cmd.name());
        assert!(header.starts_with("# pgsim-core "));
    }
}

#[test]
fn validation_happens_before_computation() {
    let bad = [
        ("[fidelity]\ndeltas = []", Command::Fidelity),
        ("[fidelity]\ndeltas = [0.0]", Command::Fidelity),
        ("[pulse]\ntheta = -0.108\ndelta = 0.45", Command::Chevron),
        ("[chevron]\nomega_points = 0", Command::Chevron),
        ("[leakage]\nthreshold = 0.0", Command::Leakage),
        ("[leakage]\ninitial = \"300\"", Command::Leakage),
        ("[leakage]\nomega_min = 0.6\nomega_max = 0.5", Command::Leakage),
        ("[strengths]\ndeltas = [-0.01]", Command::Strengths),
        ("[calibrate]\npairs = [[0.1, 0.001], [0.2, 0.004]]", Command::Calibrate),
        ("[hilbert]\nlevels_q1 = 9\nlevels_q2 = 9\nlevels_c = 9", Command::Chevron),
    ];
    let out = tempfile::tempdir().unwrap();
    for (text, cmd) in bad {
        let e = run(cmd, &parse(text), out.path()).unwrap_err();
        assert!(e.is_validation(), "{text}: {e}");
    }
    let mut c = RunConfig::default();
    c.device.q1.t2 = Some(2.5 * c.device.q1.t1.unwrap());
    let e = run(Command::Fidelity, &c, out.path()).unwrap_err();
    assert!(e.is_validation() && e.to_string().contains("q1"), "{e}");
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn calibrate_recovers_exact_scale() {
    let d = DeviceSpec::reference();
    let kappa = ac_shift_coefficient(&d, -0.108, Gate::Bswap).unwrap();
    let (scale, offset) = (0.37, 2e-4);
    let pairs: Vec<String> = [0.1, 0.2, 0.3, 0.4]
        .iter()
        .map(|a: &f64| format!("[{a}, {}]", kappa * (scale * a).powi(2) + offset))
        .collect();
    let text = format!("[calibrate]\ngate = \"bswap\"\npairs = [{}]", pairs.join(", "));
    let out = tempfile::tempdir().unwrap();
    let files = run(Command::Calibrate, &parse(&text), out.path()).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    let cal = &doc["result"]["calibration"];
    assert!((cal["scale"].as_f64().unwrap() - scale).abs() < 1e-9, "{cal}");
    assert!((cal["offset"].as_f64().unwrap() - offset).abs() < 1e-12);
    assert_eq!(doc["command"], "calibrate");
}

#[test]
fn strengths_zero_row_and_monotone_columns() {
    let text = format!("{SMALL}\n[strengths]\ndeltas = [0.0]\nnumeric = true\n");
    let out = tempfile::tempdir().unwrap();
    let files = run(Command::Strengths, &parse(&text), out.path()).unwrap();
    let rows = csv_rows(&files[0]);
    assert_eq!(rows.len(), 1);
    for cell in &rows[0][1..8] {
        assert_eq!(cell.parse::<f64>().unwrap(), 0.0, "{:?}", rows[0]);
    }
    let text = "[strengths]\ndeltas = [0.01, 0.04, 0.08, 0.12]\nnumeric = false\n";
    let files = run(Command::Strengths, &parse(text), out.path()).unwrap();
    let rows = csv_rows(&files[0]);
    for col in 1..4 {
        let v: Vec<f64> = rows.iter().map(|r| r[col].parse::<f64>().unwrap().abs()).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "column {col}: {v:?}");
    }
    for col in 4..6 {
        let v: Vec<f64> = rows.iter().filter_map(|r| r[col].parse::<f64>().ok()).map(f64::abs).collect();
        assert!(v.len() >= 3, "column {col}");
        assert!(v.windows(2).all(|w| w[1] > w[0]), "column {col}: {v:?}");
    }
    assert!(rows.iter().all(|r| r[6].is_empty() && r[7].is_empty()));
}

#[test]
fn unmodulated_chevron_is_flat() {
    let text = format!("{SMALL}\n[pulse]\ndelta = 0.0\n[chevron]\nomega_points = 5\nt_max = 500.0\nt_points = 26\n");
    let out = tempfile::tempdir().unwrap();
    let files = run(Command::Chevron, &parse(&text), out.path()).unwrap();
    for row in csv_rows(&files[0]) {
        for p in &row[2..] {
            assert!((p.parse::<f64>().unwrap() - 1.0).abs() < 1e-6, "{row:?}");
        }
    }
    let profile = std::fs::read_to_string(&files[1]).unwrap();
    assert!(profile.contains("# no resonance"));
}

#[test]
fn leakage_threshold_and_detuned_band() {
    let base = format!("{SMALL}\n[leakage]\nomega_points = 9\nt_max = 1000.0\nt_points = 201\n");
    let out = tempfile::tempdir().unwrap();
    let huge = parse(&format!("{base}threshold = 2.0\n"));
    let files = run(Command::Leakage, &huge, out.path()).unwrap();
    assert!(csv_rows(&files[0]).is_empty());
    // Far from any sideband only the off-resonant coupler admixture (~1e-4) remains.
    let detuned = parse(&format!("{base}threshold = 1e-3\nomega_min = 2.5\nomega_max = 2.6\n"));
    let files = run(Command::Leakage, &detuned, out.path()).unwrap();
    assert!(csv_rows(&files[0]).is_empty());
}

#[test]
fn closed_system_fidelity_floor_is_the_coherent_error() {
    let text = format!("{SMALL}\n[fidelity]\ndeltas = [0.09]\ndissipation = false\nmc_samples = 2000\n");
    let out = tempfile::tempdir().unwrap();
    let files = run(Command::Fidelity, &parse(&text), out.path()).unwrap();
    let rows = csv_rows(&files[0]);
    assert_eq!(rows.len(), 1);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
    let p = &doc["result"][0];
    let eps = rows[0][3].parse::<f64>().unwrap();
    let closed = p["calibration"]["closed_error"].as_f64().unwrap();
    assert!((eps - closed).abs() < 1e-6 * closed.max(1e-6), "{eps} vs {closed}");
    let mc = &p["haar_mc"];
    let f = p["report"]["fidelity"].as_f64().unwrap();
    assert!((mc["mean"].as_f64().unwrap() - f).abs() < 4.0 * mc["stderr"].as_f64().unwrap());
}

fn pgsim(args: &[&str]) -> (i32, String, String) {
    let out = Proc::new(env!("CARGO_BIN_EXE_pgsim")).args(args).env_remove("PGSIM_THREADS").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_exit_codes_and_reproducible_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("{SMALL}\n[chevron]\nomega_points = 7\nt_max = 800.0\nt_points = 81\n")).unwrap();
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (code, stdout, _) = pgsim(&["chevron", "--config", cfg, "--out", a.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("chevron_iswap.csv"));
    let (code, _, _) = pgsim(&["chevron", "--config", cfg, "--out", b.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code, 0);
    for f in ["chevron_iswap.csv", "resonance_profile_iswap.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let (code, _, stderr) = pgsim(&["chevron"]);
    assert_eq!(code, 1, "{stderr}");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[chevron]\nomega_pts = 3\n").unwrap();
    let (code, _, stderr) = pgsim(&["chevron", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("omega_pts"), "{stderr}");
    // Pairs whose curvature contradicts the model fail numerically, not as bad input.
    let wrong = dir.path().join("wrong.toml");
    let kappa = ac_shift_coefficient(&DeviceSpec::reference(), -0.108, Gate::Bswap).unwrap();
    let pairs: Vec<String> = [0.1, 0.2, 0.3].iter().map(|a: &f64| format!("[{a}, {}]", -kappa * a * a)).collect();
    std::fs::write(&wrong, format!("[calibrate]\ngate = \"bswap\"\npairs = [{}]\n", pairs.join(", "))).unwrap();
    let (code, _, stderr) =
        pgsim(&["calibrate", "--config", wrong.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
}
