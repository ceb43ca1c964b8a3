use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn genqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genqr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Writes a toy config whose data paths point into the source tree and
/// whose outputs land under `root`.
fn write_config(root: &Path) -> PathBuf {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let text = format!(
        r#"method = "genqrensemble"
output = "out/default"
depth = 100
cache = "cache"

[data]
corpus = "{toy}/corpus.jsonl"
topics = "{toy}/topics.tsv"
qrels = "{toy}/qrels.txt"
index = "index"

[reformulation]
feedback = "pseudo"
seed = 7

[backend]
kind = "stub"
thesaurus = "{toy}/thesaurus.json"
terms_per_call = 3
seed = 7

[sweep]
param = "beta"
values = [0.0, 1.0]
"#,
        toy = toy.display()
    );
    let path = root.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let cfg = cfg.to_str().unwrap();

    assert!(ok(&genqr(&["index", "-c", cfg])).starts_with("built"));
    assert!(ok(&genqr(&["index", "-c", cfg])).starts_with("up to date"));

    let raw_dir = tmp.path().join("out/raw");
    let ens_dir = tmp.path().join("out/ens");
    ok(&genqr(&[
        "run",
        "-c",
        cfg,
        "--method",
        "raw",
        "-o",
        raw_dir.to_str().unwrap(),
    ]));
    let line = ok(&genqr(&[
        "run",
        "-c",
        cfg,
        "--tag",
        "ens",
        "-o",
        ens_dir.to_str().unwrap(),
    ]));
    assert!(
        line.contains("10 queries, 0 failed, 100 backend calls"),
        "{line}"
    );
    let again = ok(&genqr(&[
        "run",
        "-c",
        cfg,
        "--tag",
        "ens",
        "-o",
        ens_dir.to_str().unwrap(),
    ]));
    assert!(again.contains("0 backend calls, 100 cache hits"), "{again}");

    let qrels = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/qrels.txt");
    let raw_run = raw_dir.join("run.trec");
    let ens_run = ens_dir.join("run.trec");
    let table = ok(&genqr(&[
        "eval",
        "-q",
        qrels.to_str().unwrap(),
        "-m",
        "ndcg@10",
        raw_run.to_str().unwrap(),
        ens_run.to_str().unwrap(),
    ]));
    assert!(table.contains("raw") && table.contains("ens"), "{table}");

    let csv = ok(&genqr(&[
        "querywise",
        "-q",
        qrels.to_str().unwrap(),
        raw_run.to_str().unwrap(),
        ens_run.to_str().unwrap(),
    ]));
    assert!(csv.starts_with("qid,value_a,value_b,delta\n"));

    let sweep = ok(&genqr(&["sweep", "-c", cfg]));
    assert!(sweep.contains("8 rows"), "{sweep}");
    let csv = std::fs::read_to_string(tmp.path().join("out/default/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);

    let instructions = tmp.path().join("instructions.txt");
    ok(&genqr(&[
        "paraphrase",
        "-c",
        cfg,
        "-n",
        "3",
        "-o",
        instructions.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read_to_string(instructions)
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let out = genqr(&["run", "-c", "/nonexistent/experiment.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let out = genqr(&["eval", "-q", "x", "-m", "ndcg@zero", "run.trec"]);
    assert!(!out.status.success());
}
