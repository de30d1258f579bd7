use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_torus-nf"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("TORUS_NF_THREADS", t),
        None => cmd.env_remove("TORUS_NF_THREADS"),
    };
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn hypothesis_violation_exits_one() {
    let cfg = configs().join("bad_positivity.toml");
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["reduce", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("H2"));
}

#[test]
fn config_errors_carry_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.toml");
    fs::write(&cfg, "[grid]\nn = 64\n\n[operator]\nm = 2.0\nv = \"1 + cos(\"\n\n[reduction]\nk = 1\n").unwrap();
    let o = run(&["reduce", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.starts_with(&format!("{}:6:", cfg.display())), "{err}");
}

#[test]
fn missing_config_is_an_io_error() {
    let o = run(&["propagate", "--config", "/nonexistent/run.toml"], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = configs().join("general_time.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(&a, None), (&b, Some("3"))] {
        let o = run(
            &[
                "reduce",
                "--config",
                cfg.to_str().unwrap(),
                "--grid",
                "64",
                "--out",
                dir.path().to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<String> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"w_k_2.csv".to_string()));
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn verify_calculus_passes_on_a_small_grid() {
    let cfg = configs().join("calculus.toml");
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "verify-calculus",
            "--config",
            cfg.to_str().unwrap(),
            "--grid",
            "32",
            "--seed",
            "11",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("verify_calculus.txt")).unwrap();
    assert!(text.starts_with("grid_size = 32\nseed = 11\n"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);
}
