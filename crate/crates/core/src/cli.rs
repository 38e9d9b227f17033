//! Command-line front end. `main` only parses arguments and calls [`run`].

use std::fmt::Write as _;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::euler::reduce;
use crate::persistent::{PersistentStringIndex, PrefixSelectIndex};
use crate::segment::{SegmentIndexConfig, SizeBreakdown};
use crate::serialize::StoredIndex;
use crate::slab::{verify_grid_properties, Backend, RankSpaceSegments, SlabIndex};
use crate::testkit::{
    baseline_persistent_bst, gen_version_tree, inject_double_update, materialize_all,
    naive_crossing_labels, random_rank_space, seed_from_env, GeneratorConfig,
};
use crate::version::{parse_version_tree, Symbol, VersionId};

#[derive(Debug, Parser)]
#[command(name = "verstring", version, about = "Random access into versioned strings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a version-tree file (or an array with --prefix-array).
    Build(BuildArgs),
    /// Answer a batch of queries, one answer per line.
    Query(QueryArgs),
    /// Run the invariant suites on generated instances.
    Selftest(SelftestArgs),
    /// Time builds and queries against a persistent-tree baseline.
    Bench(BenchArgs),
    /// Print a random version tree in the text format.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct IndexOptions {
    /// Tree degree and slab count; 0 picks a default from the input size.
    #[arg(long, default_value_t = 0)]
    pub delta: u32,
    /// Rank directory sampling rate.
    #[arg(long, default_value_t = crate::rank_select::DEFAULT_SAMPLE_RATE)]
    pub sample_rate: usize,
    /// Cell evaluation backend.
    #[arg(long, default_value = "direct", value_parser = parse_backend)]
    pub backend: Backend,
    /// Largest subtree, in segments, answered by scanning instead of an
    /// internal node.
    #[arg(long, default_value_t = crate::segment::DEFAULT_BUCKET)]
    pub bucket: u32,
}

impl IndexOptions {
    pub fn config(&self) -> SegmentIndexConfig {
        SegmentIndexConfig {
            delta: self.delta,
            sample_rate: self.sample_rate,
            backend: self.backend,
            bucket: self.bucket,
        }
    }
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Version-tree text file, or whitespace-separated distinct integers
    /// with --prefix-array.
    pub input: PathBuf,
    /// Output index file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Read the input as an array and build a prefix-selection index.
    #[arg(long)]
    pub prefix_array: bool,
    /// Also write the segment dump (`x1 x2 y codepoint` lines) here.
    #[arg(long)]
    pub dump_segments: Option<PathBuf>,
    #[command(flatten)]
    pub index: IndexOptions,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub index: PathBuf,
    /// Query file; `-` reads standard input.
    pub queries: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Largest generated tree size.
    #[arg(long, default_value_t = 400)]
    pub max_n: usize,
    /// Number of seeds per suite.
    #[arg(long, default_value_t = 8)]
    pub seeds: u64,
    /// First seed; VERSTRING_SEED overrides it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Corrupt one slab instance on purpose; the run must then fail.
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Node counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize << 12, 1 << 14, 1 << 16])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub queries_per_size: usize,
    /// Also time the path-copying persistent tree.
    #[arg(long)]
    pub baseline: bool,
    /// Query threads sharing one index.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub index: IndexOptions,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 100)]
    pub nodes: usize,
    /// VERSTRING_SEED overrides it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability that a node hangs below the previous one.
    #[arg(long, default_value_t = 0.5)]
    pub path_bias: f64,
    /// Insert, delete and replace weights.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = vec![6u32, 3, 1])]
    pub weights: Vec<u32>,
    #[arg(long, default_value_t = 4)]
    pub alphabet: u32,
}

/// Runs a command, writing its normal output to `out`. Returns the process
/// exit code.
pub fn run(cli: Cli, out: &mut String) -> Result<i32> {
    match cli.command {
        Command::Build(a) => cmd_build(&a, out).map(|_| 0),
        Command::Query(a) => {
            let idx = StoredIndex::read_file(&a.index)?;
            let text = read_input(&a.queries)?;
            let errors = run_queries(&idx, &text, out);
            Ok(i32::from(errors > 0))
        }
        Command::Selftest(a) => {
            let ok = run_selftest(a.max_n, a.seeds, seed_from_env(a.seed), a.inject_fault, out);
            Ok(i32::from(!ok))
        }
        Command::Bench(a) => {
            let rows = run_bench(&a.sizes, a.queries_per_size, a.baseline, a.threads, seed_from_env(a.seed), a.index.config())?;
            out.push_str(&format_bench(&rows));
            Ok(0)
        }
        Command::Gen(a) => {
            let weights = [a.weights[0], a.weights[1], a.weights[2]];
            let tree = gen_version_tree(&GeneratorConfig {
                seed: seed_from_env(a.seed),
                nodes: a.nodes,
                op_weights: weights,
                path_bias: a.path_bias,
                alphabet: a.alphabet,
            });
            out.push_str(&tree.to_text());
            Ok(0)
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

/// Parses whitespace-separated integers.
pub fn parse_array(text: &str) -> Result<Vec<i64>> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, t)| {
            t.parse().map_err(|_| Error::Syntax {
                line: text[..text.find(t).unwrap_or(0)].lines().count().max(1),
                message: format!("entry {} is not an integer: {t:?}", i + 1),
            })
        })
        .collect()
}

pub fn cmd_build(a: &BuildArgs, out: &mut String) -> Result<StoredIndex> {
    let text = read_input(&a.input)?;
    let cfg = a.index.config();
    let t0 = Instant::now();
    let (idx, tree) = if a.prefix_array {
        let arr = parse_array(&text)?;
        let tree = crate::persistent::prefix_select_tree(&arr)?;
        (StoredIndex::Prefix(PrefixSelectIndex::build(&arr, cfg)?), tree)
    } else {
        let tree = parse_version_tree(&text)?;
        (StoredIndex::Strings(PersistentStringIndex::build(&tree, cfg)?), tree)
    };
    let elapsed = t0.elapsed();
    if let Some(path) = &a.dump_segments {
        let segs = reduce(&tree.normalize_replaces().0)?.segments;
        std::fs::write(path, segs.dump())?;
    }
    idx.write_file(&a.output)?;
    let s = idx.strings();
    let _ = writeln!(
        out,
        "nodes {}  segments {}  delta {}  backend {:?}  build {:.1} ms",
        s.node_count(),
        s.segment_index().len(),
        s.segment_index().delta(),
        s.segment_index().backend(),
        elapsed.as_secs_f64() * 1e3
    );
    out.push_str(&format_sizes(&s.size_breakdown(), s.table_bits(), s.segment_index().len()));
    Ok(idx)
}

/// One line per part: bits and bits per segment.
pub fn format_sizes(b: &SizeBreakdown, table_bits: u64, segments: usize) -> String {
    let per = |bits: u64| bits as f64 / segments.max(1) as f64;
    let mut out = String::new();
    for (name, bits) in [
        ("endpoints", b.endpoints),
        ("e-strings", b.e_strings),
        ("slab-indexes", b.slab_indexes),
        ("leaves", b.leaves),
        ("labels", b.labels),
        ("node-tables", table_bits),
    ] {
        let _ = writeln!(out, "  {name:<13} {bits:>12} bits  {:>8.1} bits/segment", per(bits));
    }
    let total = b.payload() + table_bits;
    let _ = writeln!(out, "  {:<13} {total:>12} bits  {:>8.1} bits/segment", "total", per(total));
    if b.memo > 0 {
        let _ = writeln!(out, "  {:<13} {:>12} bits  (not serialized)", "memo-cache", b.memo);
    }
    out
}

/// Renders a symbol: printable characters as themselves, anything else as
/// `\u{hex}`.
pub fn render_symbol(c: Symbol, out: &mut String) {
    match char::from_u32(c) {
        Some(ch) if !ch.is_control() && ch != '\\' => out.push(ch),
        Some('\\') => out.push_str("\\\\"),
        _ => {
            let _ = write!(out, "\\u{{{c:x}}}");
        }
    }
}

/// Answers every query line of `text` into `out`; returns the number of
/// `ERR` lines written.
pub fn run_queries(idx: &StoredIndex, text: &str, out: &mut String) -> usize {
    let mut errors = 0;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let start = out.len();
        if let Err(e) = answer(idx, line, no + 1, out) {
            out.truncate(start);
            let _ = writeln!(out, "ERR {}", e.code());
            errors += 1;
        }
    }
    errors
}

fn answer(idx: &StoredIndex, line: &str, no: usize, out: &mut String) -> Result<()> {
    let mut parts = line.split_whitespace();
    let cmd = parts.next().unwrap_or_default();
    let args: Vec<u64> = parts
        .map(|t| t.parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Syntax {
            line: no,
            message: "arguments must be non-negative integers".into(),
        })?;
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Syntax {
                line: no,
                message: format!("{cmd} takes {n} arguments"),
            })
        }
    };
    let strings = idx.strings();
    let version = |v: u64| VersionId(u32::try_from(v).unwrap_or(u32::MAX));
    let numeric = matches!(idx, StoredIndex::Prefix(_));
    let emit = |c: Symbol, out: &mut String| {
        if numeric {
            let _ = write!(out, "{c}");
        } else {
            render_symbol(c, out);
        }
    };
    match cmd {
        "access" => {
            arity(2)?;
            let c = strings.access(version(args[0]), args[1])?;
            emit(c, out);
        }
        "substr" => {
            arity(3)?;
            let s = strings.substring(version(args[0]), args[1], args[2])?;
            for (k, &c) in s.iter().enumerate() {
                if numeric && k > 0 {
                    out.push(' ');
                }
                emit(c, out);
            }
        }
        "len" => {
            arity(1)?;
            let _ = write!(out, "{}", strings.length(version(args[0]))?);
        }
        "segsel" => {
            arity(2)?;
            let s = strings.segment_index().segment_select(args[0].min(i64::MAX as u64) as i64, args[1])?;
            let _ = write!(out, "{} {} {} {}", s.x1, s.x2, s.y, s.label);
        }
        "prefsel" => {
            arity(2)?;
            let StoredIndex::Prefix(p) = idx else {
                return Err(Error::Unsupported("prefsel needs a prefix-selection index".into()));
            };
            let _ = write!(out, "{}", p.prefix_select(args[0], args[1])?);
        }
        other => {
            return Err(Error::Syntax {
                line: no,
                message: format!("unknown query {other:?}"),
            })
        }
    }
    out.push('\n');
    Ok(())
}

/// Outcome of one selftest suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every suite for `seeds` consecutive seeds starting at `first_seed`;
/// writes one line per suite and returns whether all passed.
pub fn run_selftest(max_n: usize, seeds: u64, first_seed: u64, inject_fault: bool, out: &mut String) -> bool {
    let results = selftest_suites(max_n, seeds, first_seed, inject_fault);
    for r in &results {
        let _ = writeln!(out, "{} {}{}", if r.passed { "PASS" } else { "FAIL" }, r.name, if r.detail.is_empty() { String::new() } else { format!(": {}", r.detail) });
    }
    let ok = results.iter().all(|r| r.passed);
    let _ = writeln!(out, "{}", if ok { "selftest passed" } else { "selftest FAILED" });
    ok
}

pub fn selftest_suites(max_n: usize, seeds: u64, first_seed: u64, inject_fault: bool) -> Vec<SuiteResult> {
    let mut access = Ok(());
    let mut crossing = Ok(());
    let mut slab = Ok(());
    let mut prefix = Ok(());
    let mut serial = Ok(());
    let max_n = max_n.max(2);
    for seed in first_seed..first_seed + seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=max_n);
        let tree = gen_version_tree(&GeneratorConfig {
            seed,
            nodes: n,
            path_bias: [0.0, 0.5, 0.95][(seed % 3) as usize],
            ..GeneratorConfig::default()
        });
        let all = materialize_all(&tree);
        let backend = if seed % 2 == 0 { Backend::Direct } else { Backend::Memoized };
        let cfg = SegmentIndexConfig { backend, ..SegmentIndexConfig::default() };
        let fail = |what: String| Err(format!("seed {seed}: {what}"));

        if access.is_ok() {
            access = match PersistentStringIndex::build(&tree, cfg) {
                Err(e) => fail(format!("build failed: {e}")),
                Ok(idx) => (|| {
                    idx.check_consistency().map_err(|e| format!("seed {seed}: {e}"))?;
                    for (v, s) in all.iter().enumerate() {
                        let v = VersionId(v as u32);
                        for (j, &c) in s.iter().enumerate() {
                            if idx.access(v, j as u64 + 1).ok() != Some(c) {
                                return fail(format!("access({}, {}) mismatch", v.0, j + 1));
                            }
                        }
                        if idx.substring(v, 1, s.len() as u64).ok().as_deref() != Some(&s[..]) {
                            return fail(format!("substring of node {} mismatch", v.0));
                        }
                    }
                    let bytes = StoredIndex::Strings(idx.clone()).to_bytes();
                    if serial.is_ok() {
                        serial = match StoredIndex::from_bytes(&bytes) {
                            Ok(back) if back.to_bytes() == bytes && *back.strings() == idx => Ok(()),
                            Ok(_) => fail("round trip changed the index".into()),
                            Err(e) => fail(format!("decode failed: {e}")),
                        };
                    }
                    Ok(())
                })(),
            };
        }

        if crossing.is_ok() {
            let (normal, _) = tree.normalize_replaces();
            crossing = match reduce(&normal) {
                Err(e) => fail(e.to_string()),
                Ok(red) => (0..tree.node_count())
                    .find(|&v| naive_crossing_labels(&red.segments, 2 * red.start.start(VersionId(v as u32)) as i64) != all[v])
                    .map_or(Ok(()), |v| fail(format!("labels crossing start of node {v} differ from its string"))),
            };
        }

        if slab.is_ok() {
            let m = rng.random_range(if inject_fault { 2 } else { 1 }..=max_n);
            let segs = random_rank_space(&mut rng, m);
            let segs = if inject_fault && m >= 2 { inject_double_update(&segs) } else { segs };
            let delta = [2, 4, 8, 16][(seed % 4) as usize];
            slab = check_slab_instance(&segs, delta).map_err(|e| format!("seed {seed}, m = {m}, delta = {delta}: {e}"));
        }

        if prefix.is_ok() {
            let len = rng.random_range(1..=max_n);
            let mut a: Vec<i64> = (0..len as i64).map(|x| x * 3 - 7).collect();
            use rand::seq::SliceRandom;
            a.shuffle(&mut rng);
            prefix = match PrefixSelectIndex::build(&a, cfg) {
                Err(e) => fail(e.to_string()),
                Ok(p) => (|| {
                    for _ in 0..200 {
                        let i = rng.random_range(1..=len);
                        let j = rng.random_range(1..=i);
                        let mut idx: Vec<usize> = (1..=i).collect();
                        idx.sort_by_key(|&k| a[k - 1]);
                        if p.prefix_select(i as u64, j as u64).ok() != Some(idx[j - 1] as u64) {
                            return fail(format!("prefix_select({i}, {j}) mismatch"));
                        }
                    }
                    Ok(())
                })(),
            };
        }
    }
    [
        ("random-access", access),
        ("crossing-labels", crossing),
        ("slab-grid", slab),
        ("prefix-select", prefix),
        ("serialization", serial),
    ]
    .into_iter()
    .map(|(name, r)| SuiteResult {
        name,
        passed: r.is_ok(),
        detail: r.err().unwrap_or_default(),
    })
    .collect()
}

/// Grid properties plus full brute-force agreement for one instance; the
/// index is built from the same segments, so a corrupt instance is caught
/// by the grid re-sweep.
fn check_slab_instance(segs: &RankSpaceSegments, delta: u32) -> std::result::Result<(), String> {
    let valid = RankSpaceSegments::new(segs.segments().to_vec()).is_ok();
    let idx = if valid {
        SlabIndex::build(segs, delta, Backend::Direct).map_err(|e| e.to_string())?
    } else {
        // Build over the nearest valid instance so the re-sweep has an index
        // to compare against.
        let mut fixed = segs.segments().to_vec();
        fixed.sort_by_key(|s| s.y);
        for (k, s) in fixed.iter_mut().enumerate() {
            s.x1 = 4 * k as u32 + 1;
            s.x2 = 4 * k as u32 + 3;
        }
        SlabIndex::build(&RankSpaceSegments::new(fixed).unwrap(), delta, Backend::Direct).map_err(|e| e.to_string())?
    };
    let report = verify_grid_properties(&idx, segs);
    if let Some(f) = report.first_failure() {
        return Err(format!("{} violated: {}", f.name, f.counterexample.clone().unwrap_or_default()));
    }
    let memo = SlabIndex::build(segs, delta, Backend::Memoized).map_err(|e| e.to_string())?;
    let layout = idx.layout();
    for col in 0..=idx.columns() {
        let counts = crate::testkit::naive_slab_counts(segs, layout, col);
        let mut acc = 0;
        for slab in 1..=layout.rows {
            acc += counts[slab as usize - 1];
            let got = idx.slab_sum_unchecked(col, slab);
            if got != acc || memo.slab_sum_unchecked(col, slab) != acc {
                return Err(format!("slab_sum({col}, {slab}) = {got}, expected {acc}"));
            }
        }
        let mut acc = 0;
        let mut k = 1;
        for t in 1..=counts.iter().sum::<u64>() {
            while acc + counts[k - 1] < t {
                acc += counts[k - 1];
                k += 1;
            }
            let got = idx.slab_select(col, t).map_err(|e| e.to_string())?;
            if got != k as u32 || memo.slab_select(col, t).ok() != Some(got) {
                return Err(format!("slab_select({col}, {t}) = {got}, expected {k}"));
            }
        }
    }
    Ok(())
}

/// One line of benchmark output.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub nodes: usize,
    pub segments: usize,
    pub build_ms: f64,
    pub query_ns: f64,
    pub bits_per_segment: f64,
    pub words_per_node: f64,
    pub baseline_build_ms: Option<f64>,
    pub baseline_query_ns: Option<f64>,
}

/// Trees for benchmarking: mostly long edit chains with occasional
/// branching, so strings grow with the tree.
pub fn bench_tree(nodes: usize, seed: u64) -> crate::version::VersionTree {
    gen_version_tree(&GeneratorConfig {
        seed,
        nodes,
        op_weights: [6, 3, 1],
        path_bias: 0.9,
        alphabet: 26,
    })
}

pub fn run_bench(
    sizes: &[usize],
    queries: usize,
    baseline: bool,
    threads: usize,
    seed: u64,
    cfg: SegmentIndexConfig,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let tree = bench_tree(n, seed);
        let t0 = Instant::now();
        let idx = PersistentStringIndex::build(&tree, cfg)?;
        let build_ms = t0.elapsed().as_secs_f64() * 1e3;

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let nonempty: Vec<u32> = (0..tree.node_count() as u32)
            .filter(|&v| idx.length(VersionId(v)).unwrap() > 0)
            .collect();
        let batch: Vec<(VersionId, u64)> = if nonempty.is_empty() {
            Vec::new()
        } else {
            (0..queries)
                .map(|_| {
                    let v = VersionId(nonempty[rng.random_range(0..nonempty.len())]);
                    (v, rng.random_range(1..=idx.length(v).unwrap()))
                })
                .collect()
        };

        let query_ns = time_queries(&batch, threads.max(1), |v, j| idx.access(v, j).unwrap());
        let sizes = idx.size_breakdown();
        let segments = idx.segment_index().len();
        let total_bits = sizes.payload() + idx.table_bits();

        let (baseline_build_ms, baseline_query_ns) = if baseline {
            let t0 = Instant::now();
            let b = baseline_persistent_bst(&tree);
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            let ns = time_serial(&batch, |v, j| b.access(v, j).unwrap());
            (Some(ms), Some(ns))
        } else {
            (None, None)
        };
        rows.push(BenchRow {
            nodes: n,
            segments,
            build_ms,
            query_ns,
            bits_per_segment: total_bits as f64 / segments.max(1) as f64,
            words_per_node: total_bits as f64 / 64.0 / n as f64,
            baseline_build_ms,
            baseline_query_ns,
        });
    }
    Ok(rows)
}

/// Mean wall-clock nanoseconds per query over one warm-up and one timed
/// pass.
fn time_serial<F: Fn(VersionId, u64) -> Symbol>(batch: &[(VersionId, u64)], f: F) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let mut ns = 0.0;
    for _ in 0..2 {
        let mut sink = 0u64;
        let t0 = Instant::now();
        for &(v, j) in batch {
            sink = sink.wrapping_add(f(v, j) as u64);
        }
        ns = t0.elapsed().as_nanos() as f64 / batch.len() as f64;
        std::hint::black_box(sink);
    }
    ns
}

/// Runs the batch on `threads` threads at once and reports the mean of the
/// per-thread latencies.
fn time_queries<F>(batch: &[(VersionId, u64)], threads: usize, f: F) -> f64
where
    F: Fn(VersionId, u64) -> Symbol + Sync,
{
    if threads <= 1 {
        return time_serial(batch, f);
    }
    let total: f64 = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads).map(|_| s.spawn(|| time_serial(batch, &f))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    });
    total / threads as f64
}

pub fn format_bench(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "nodes      segments   build_ms   query_ns   bits/seg  words/node  base_build_ms  base_query_ns\n",
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:<10.1} {:<10.1} {:<9.1} {:<11.2} {:<14} {}",
            r.nodes,
            r.segments,
            r.build_ms,
            r.query_ns,
            r.bits_per_segment,
            r.words_per_node,
            opt(r.baseline_build_ms),
            opt(r.baseline_query_ns)
        );
    }
    out
}
