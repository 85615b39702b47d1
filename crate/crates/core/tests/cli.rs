use degen_lab::cli::main_with_args;
use serde_json::Value;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["degen-lab"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn manifest(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest written");
    serde_json::from_str(&text).expect("manifest is JSON")
}

#[test]
fn malformed_window_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&["observability-fit", "--omega", "0.5,oops", "--out", out]),
        2
    );
    assert_eq!(run(&["impulse", "--omega", "0.6,0.3", "--out", out]), 2);
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    assert_eq!(run(&["transmogrify"]), 2);
    assert_eq!(run(&["eigen", "--no-such-flag"]), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "alpha = 0.5\nwindow_size = 3\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "eigen",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );
}

#[test]
fn weakly_degenerate_hardy_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&[
            "verify",
            "--alpha",
            "0.5",
            "--out",
            dir.path().to_str().unwrap()
        ]),
        1
    );
}

#[test]
fn verify_at_alpha_one_passes_and_lists_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&[
            "verify",
            "--alpha",
            "1",
            "--out",
            dir.path().to_str().unwrap()
        ]),
        0
    );
    let m = manifest(dir.path());
    let files = m["files"].as_array().expect("files list");
    assert!(!files.is_empty());
    for entry in files {
        let name = entry["name"].as_str().unwrap();
        let hash = entry["sha256"].as_str().unwrap();
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        assert_eq!(degen_lab::io::sha256_hex(&bytes), hash, "hash of {name}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eigen.toml");
    std::fs::write(&cfg, "alpha = 0.5\nmodes = 6\nmesh = 2048\n").unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "eigen",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(code == 0 || code == 1, "eigen ran, exit {code}");
    let m = manifest(&out);
    let resolved = &m["resolved"];
    assert_eq!(resolved["alpha"].as_f64(), Some(1.5));
    assert_eq!(resolved["modes"].as_u64(), Some(6));
}
