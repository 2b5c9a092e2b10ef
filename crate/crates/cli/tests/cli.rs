use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use semspace_cli::{run, subcommand_names, DISPATCH, EXIT_CORRUPT, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use tempfile::TempDir;

const CLIQUES: &str = "\
maison;demeure;habitation;logis
maison;foyer;domicile
maison;entreprise;firme;société
firme;société;compagnie
demeure;résidence;logis
foyer;âtre;cheminée
train;locomotive;wagon
";

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("semspace").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

struct Fixture {
    dir: TempDir,
    store: PathBuf,
    cliques: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let cliques = dir.path().join("cliques.txt");
        std::fs::write(&cliques, CLIQUES).unwrap();
        let store = dir.path().join("space.rvss");
        let r = cli(&[
            "build", "--cliques", s(&cliques), "--dim", "500", "--m", "5", "--seed", "7",
            "--out", s(&store),
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.err);
        Fixture { dir, store, cliques }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_has_a_working_invocation() {
    let f = Fixture::new();
    let store = s(&f.store);
    let copy = f.path("copy.rvss");
    let csv = f.path("noise.csv");
    let table: &[(&str, Vec<&str>)] = &[
        ("build", vec!["build", "--cliques", s(&f.cliques), "--dim", "100", "--m", "2", "--out", s(&copy)]),
        ("rebuild", vec!["rebuild", "--space", store, "--out", s(&copy)]),
        ("add-clique", vec!["add-clique", "--space", store, "--terms", "maison;bâtisse", "--out", s(&copy)]),
        ("neighbors", vec!["neighbors", "--space", store, "--term", "maison", "--k", "5"]),
        ("clusters", vec!["clusters", "--space", store, "--term", "maison"]),
        ("similarity", vec!["similarity", "--space", store, "--a", "maison", "--b", "foyer"]),
        ("separation", vec!["separation", "--space", store, "--a", "logis", "--b", "compagnie"]),
        ("noise", vec!["noise", "--dim", "250", "--m", "4", "--samples", "20000", "--out", s(&csv)]),
        ("lexicon-stats", vec!["lexicon-stats", "--cliques", s(&f.cliques)]),
    ];
    let mut covered: BTreeSet<String> = table.iter().map(|(n, _)| n.to_string()).collect();
    // serve blocks, so it is exercised by its own test below.
    covered.insert("serve".into());
    let known: BTreeSet<String> = subcommand_names().into_iter().filter(|n| n != "help").collect();
    assert_eq!(covered, known);
    for (name, args) in table {
        let r = cli(args);
        assert_eq!(r.code, EXIT_OK, "{name}: {}", r.err);
        assert!(!r.out.is_empty(), "{name}");
    }
}

const LIBRARY_OPERATIONS: &[&str] = &[
    "parse_cliques", "neighborhood", "overlap_similarity", "degree_of_separation",
    "make_seed", "n_seed", "p_overlap", "p_scalar", "seed_dot",
    "weight", "build_clique_vector", "build_term_vector", "build_space", "add_clique", "save", "load",
    "similarity", "distance", "orthogonalize", "neighbors", "clusters",
    "theoretical_pmf", "sample_seed_noise", "tail_noise", "compare",
];

#[test]
fn dispatch_table_reaches_every_library_operation() {
    let reached: BTreeSet<&str> = DISPATCH.iter().flat_map(|(_, ops)| ops.iter().copied()).collect();
    let all: BTreeSet<&str> = LIBRARY_OPERATIONS.iter().copied().collect();
    assert_eq!(reached, all);
    let top: BTreeSet<String> = DISPATCH
        .iter()
        .map(|(cmd, _)| cmd.split(' ').next().unwrap().to_string())
        .collect();
    let known: BTreeSet<String> = subcommand_names().into_iter().filter(|n| n != "help").collect();
    assert_eq!(top, known);
}

#[test]
fn operation_outputs_are_visible() {
    let f = Fixture::new();
    let r = cli(&["similarity", "--space", s(&f.store), "--a", "maison", "--b", "foyer"]);
    let lines: Vec<&str> = r.out.lines().collect();
    assert!(lines[0].starts_with("similarity 0."), "{}", r.out);
    // D(maison) and D(foyer) share maison, foyer and domicile.
    assert_eq!(lines[2], "overlap 3");
    let r = cli(&["lexicon-stats", "--cliques", s(&f.cliques), "--term", "foyer"]);
    assert!(r.out.ends_with("\nneighborhood foyer 5: maison;foyer;domicile;âtre;cheminée\n"), "{}", r.out);
    let r = cli(&["noise", "--dim", "250", "--m", "4", "--samples", "1000"]);
    assert!(r.out.starts_with("distinct seeds 2.366e16\n"), "{}", r.out);
    let r = cli(&["noise", "--dim", "2500", "--m", "50", "--samples", "1000"]);
    assert!(r.out.starts_with("distinct seeds 9.043e209\n"), "{}", r.out);
}

#[test]
fn stdout_is_reproducible() {
    let f = Fixture::new();
    for args in [
        vec!["neighbors", "--space", s(&f.store), "--term", "maison", "--k", "10", "--minus", "entreprise,foyer", "--format", "json"],
        vec!["clusters", "--space", s(&f.store), "--term", "maison", "--format", "csv"],
        vec!["noise", "--dim", "250", "--m", "4", "--samples", "50000", "--rng-seed", "9"],
    ] {
        assert_eq!(cli(&args).out, cli(&args).out);
    }
    let a = f.path("a.rvss");
    let b = f.path("b.rvss");
    for out in [&a, &b] {
        cli(&["build", "--cliques", s(&f.cliques), "--dim", "300", "--m", "3", "--seed", "5", "--out", s(out)]);
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn neighbor_table_uses_three_decimals() {
    let f = Fixture::new();
    let r = cli(&["neighbors", "--space", s(&f.store), "--term", "maison", "--k", "4"]);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "1.000 maison");
    for line in &lines {
        let (num, term) = line.split_once(' ').unwrap();
        assert_eq!(num.split_once('.').unwrap().1.len(), 3, "{line}");
        assert!(!term.is_empty());
    }
}

#[test]
fn neighbor_formats_agree() {
    let f = Fixture::new();
    let base = ["neighbors", "--space", s(&f.store), "--term", "maison", "--k", "6", "--minus", "entreprise"];
    let json = cli(&[&base[..], &["--format", "json"]].concat());
    let v: serde_json::Value = serde_json::from_str(&json.out).unwrap();
    assert_eq!(v["subtracted_terms"], serde_json::json!(["entreprise"]));
    let csv = cli(&[&base[..], &["--format", "csv"]].concat());
    let rows: Vec<&str> = csv.out.lines().collect();
    assert_eq!(rows[0], "rank,term,similarity");
    for (i, row) in rows[1..].iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[1], v["entries"][i]["term"].as_str().unwrap());
        let sim: f64 = cols[2].parse().unwrap();
        assert!((sim - v["entries"][i]["similarity"].as_f64().unwrap()).abs() < 1e-15);
    }
}

#[test]
fn unknown_term_is_a_data_error() {
    let f = Fixture::new();
    let r = cli(&["neighbors", "--space", s(&f.store), "--term", "chateau"]);
    assert_eq!(r.code, EXIT_DATA);
    assert_eq!(r.err, "term not found: chateau\n");
    assert!(r.out.is_empty());
}

#[test]
fn dependent_subtraction_is_a_data_error() {
    let f = Fixture::new();
    let r = cli(&["neighbors", "--space", s(&f.store), "--term", "maison", "--minus", "foyer, foyer"]);
    assert_eq!(r.code, EXIT_DATA, "{}", r.err);
}

#[test]
fn corrupt_store_exits_3() {
    let f = Fixture::new();
    let mut bytes = std::fs::read(&f.store).unwrap();
    bytes[0] = b'X';
    let bad = f.path("bad.rvss");
    std::fs::write(&bad, &bytes).unwrap();
    let r = cli(&["similarity", "--space", s(&bad), "--a", "maison", "--b", "foyer"]);
    assert_eq!(r.code, EXIT_CORRUPT, "{}", r.err);

    let bytes = std::fs::read(&f.store).unwrap();
    std::fs::write(&bad, &bytes[..bytes.len() - 3]).unwrap();
    let r = cli(&["similarity", "--space", s(&bad), "--a", "maison", "--b", "foyer"]);
    assert_eq!(r.code, EXIT_CORRUPT, "{}", r.err);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(cli(&[]).code, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(cli(&["neighbors", "--term", "x"]).code, EXIT_USAGE);
    assert_eq!(cli(&["noise", "--mode", "gaussian"]).code, EXIT_USAGE);
    assert_eq!(cli(&["build", "--cliques", "a", "--out", "b", "--weighting", "bm25"]).code, EXIT_USAGE);
    assert_eq!(cli(&["--help"]).code, EXIT_OK);
}

#[test]
fn missing_input_file_is_a_data_error() {
    let r = cli(&["lexicon-stats", "--cliques", "/nonexistent/cliques.txt"]);
    assert_eq!(r.code, EXIT_DATA);
}

#[test]
fn add_clique_updates_the_store_in_place() {
    let f = Fixture::new();
    let before = std::fs::read(&f.store).unwrap();
    let r = cli(&["add-clique", "--space", s(&f.store), "--terms", "train; rame ;tram"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("new terms 2"), "{}", r.out);
    assert_ne!(std::fs::read(&f.store).unwrap(), before);
    let n = cli(&["neighbors", "--space", s(&f.store), "--term", "rame", "--k", "3"]);
    assert_eq!(n.code, EXIT_OK);
    assert!(n.out.contains("train") && n.out.contains("tram"), "{}", n.out);
}

#[test]
fn rebuild_reproduces_a_fresh_build() {
    let f = Fixture::new();
    let out = f.path("rebuilt.rvss");
    assert_eq!(cli(&["rebuild", "--space", s(&f.store), "--out", s(&out)]).code, EXIT_OK);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&f.store).unwrap());
}

#[test]
fn separation_and_stats() {
    let f = Fixture::new();
    let hops = |a: &str, b: &str| cli(&["separation", "--space", s(&f.store), "--a", a, "--b", b]).out;
    assert_eq!(hops("maison", "foyer"), "1\n");
    assert_eq!(hops("logis", "compagnie"), "3\n");
    assert_eq!(hops("maison", "wagon"), "unreachable\n");
    let st = cli(&["lexicon-stats", "--cliques", s(&f.cliques)]);
    assert!(st.out.starts_with("terms 16\ncliques 7\n"), "{}", st.out);
}

#[test]
fn noise_writes_csv_report() {
    let f = Fixture::new();
    let csv = f.path("report.csv");
    let r = cli(&[
        "noise", "--dim", "250", "--m", "4", "--samples", "200000", "--rng-seed", "3", "--out", s(&csv),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("band PASS"), "{}", r.out);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_center,theoretical_p,empirical_p"));
    let (th, emp) = lines.fold((0.0, 0.0), |(a, b), l| {
        let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        (a + c[1], b + c[2])
    });
    assert!((th - 1.0).abs() < 1e-6 && (emp - 1.0).abs() < 1e-6);

    let binomial = cli(&["noise", "--dim", "250", "--m", "4", "--samples", "1000000", "--law", "binomial"]);
    assert!(binomial.out.contains("band FAIL"), "{}", binomial.out);
}

#[test]
fn noise_tail_reports_moments() {
    let f = Fixture::new();
    let r = cli(&["noise", "tail", "--space", s(&f.store), "--term", "train", "--start", "5", "--count", "10"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.starts_with("ranks 5..15\n"), "{}", r.out);
    let r = cli(&["noise", "tail", "--space", s(&f.store), "--term", "train", "--start", "5", "--count", "100"]);
    assert_eq!(r.code, EXIT_DATA);
}

#[test]
fn binary_exit_codes_and_serve() {
    let f = Fixture::new();
    let bin = env!("CARGO_BIN_EXE_semspace");
    let out = Command::new(bin)
        .args(["similarity", "--space", s(&f.store), "--a", "maison", "--b", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert_eq!(String::from_utf8_lossy(&out.stderr), "term not found: nope\n");

    let mut child = Command::new(bin)
        .args(["serve", "--space", s(&f.store), "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on http://").unwrap().to_string();

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /similarity?a=maison&b=foyer HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let checksum = semspace::SemanticSpace::load_from_path(&f.store).unwrap().checksum();
    assert!(resp.contains(&format!("x-store-checksum: {checksum}")), "{resp}");
}
