//! End-to-end runs of the `verstring` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use verstring::version::EXAMPLE_TREE_TEXT;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verstring"))
        .args(args)
        .env_remove("VERSTRING_SEED")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("verstring-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn build_and_query_example() {
    let dir = scratch("example");
    let tree = dir.join("tree.txt");
    let idx = dir.join("tree.idx");
    let queries = dir.join("q.txt");
    std::fs::write(&tree, EXAMPLE_TREE_TEXT).unwrap();
    let built = bin(&["build", tree.to_str().unwrap(), "-o", idx.to_str().unwrap(), "--delta", "2"]);
    assert!(built.status.success(), "{built:?}");
    assert!(stdout(&built).contains("segments 7"));

    std::fs::write(&queries, "access 6 2\nlen 0\nsubstr 6 1 3\nlen 4\naccess 1 2\n").unwrap();
    let q = bin(&["query", idx.to_str().unwrap(), queries.to_str().unwrap()]);
    assert_eq!(stdout(&q), "b\n0\nabb\n2\nERR OUT_OF_BOUNDS\n");
    assert_eq!(q.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn generated_tree_round_trip() {
    let dir = scratch("gen");
    let gen = bin(&["gen", "--nodes", "300", "--seed", "5"]);
    assert!(gen.status.success());
    let tree = dir.join("t.txt");
    std::fs::write(&tree, &gen.stdout).unwrap();
    let a = dir.join("a.idx");
    let b = dir.join("b.idx");
    for out in [&a, &b] {
        let o = bin(&["build", tree.to_str().unwrap(), "-o", out.to_str().unwrap(), "--backend", "memoized"]);
        assert!(o.status.success(), "{o:?}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let again = bin(&["gen", "--nodes", "300", "--seed", "5"]);
    assert_eq!(again.stdout, gen.stdout);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn prefix_array_index() {
    let dir = scratch("prefix");
    let arr = dir.join("a.txt");
    let idx = dir.join("a.idx");
    std::fs::write(&arr, "3 1 2 5 6 4\n").unwrap();
    let o = bin(&["build", arr.to_str().unwrap(), "-o", idx.to_str().unwrap(), "--prefix-array"]);
    assert!(o.status.success(), "{o:?}");
    let queries = dir.join("q.txt");
    std::fs::write(&queries, "prefsel 3 1\nprefsel 6 6\nprefsel 6 4\nprefsel 2 3\n").unwrap();
    let q = bin(&["query", idx.to_str().unwrap(), queries.to_str().unwrap()]);
    assert_eq!(stdout(&q), "2\n5\n6\nERR RANK_OUT_OF_RANGE\n");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn selftest_passes_and_detects_fault() {
    let ok = bin(&["selftest", "--max-n", "60", "--seeds", "3"]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    let bad = bin(&["selftest", "--max-n", "60", "--seeds", "3", "--inject-fault"]);
    assert!(!bad.status.success());
    assert!(stdout(&bad).contains("adjacent-column-step"), "{}", stdout(&bad));
    let none = bin(&["selftest", "--seeds", "0"]);
    assert!(none.status.success());
}

#[test]
fn bench_table_shape() {
    let o = bin(&["bench", "--sizes", "64,256", "--queries-per-size", "200", "--baseline"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("nodes"));
    assert!(lines[1].starts_with("64 "));
    assert_eq!(lines[2].split_whitespace().count(), 8);
}

#[test]
fn bad_input_reports_error() {
    let dir = scratch("bad");
    let tree = dir.join("bad.txt");
    std::fs::write(&tree, "2\n1 0 delete 1\n").unwrap();
    let o = bin(&["build", tree.to_str().unwrap(), "-o", dir.join("x.idx").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error ["));
    let _ = std::fs::remove_dir_all(&dir);
}
