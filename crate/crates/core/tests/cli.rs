use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::{Command, Output};

use code_od::experiments::{fixture, FIXTURE_NAMES};
use code_od::network::io::{network_to_json, parse_network, parse_path_table, paths_to_json};
use code_od::network::{
    build_dynamic_system, build_static_incidence, Link, LinkId, Network, Path, PathTable,
};
use serde_json::Value;
use tempfile::TempDir;

const SIX_LINKS: [&str; 6] = ["l1_2", "l1_3", "l2_1", "l3_2", "l3_4", "l4_3"];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_code-od"));
    c.env_remove("CODE_SEED");
    c
}

fn run(dir: &FsPath, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_counts(dir: &FsPath, name: &str, links: &[&str], y: &[f64]) -> PathBuf {
    let mut s = String::from("link_id,count\n");
    for (l, v) in links.iter().zip(y) {
        s.push_str(&format!("{l},{v}\n"));
    }
    let p = dir.join(name);
    fs::write(&p, s).unwrap();
    p
}

/// Four-path truth on the fig2 path table and its counts on the six measured links.
fn six_link_case(dir: &FsPath) -> (PathBuf, PathBuf) {
    let f = fixture("fig2").unwrap();
    let mut truth = vec![0.0; 14];
    truth[1] = 10.0;
    truth[7] = 20.0;
    truth[10] = 10.0;
    truth[13] = 30.0;
    let links: Vec<LinkId> = SIX_LINKS.iter().map(|s| LinkId::new(*s)).collect();
    let ms = build_static_incidence(&f.network, &f.paths, &links).unwrap();
    let counts = write_counts(dir, "six_links.csv", &SIX_LINKS, &ms.apply(&truth));
    let t = dir.join("truth.json");
    fs::write(&t, serde_json::to_string(&truth).unwrap()).unwrap();
    (counts, t)
}

#[test]
fn shipped_fixture_files_match_builtins() {
    let dir = FsPath::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in FIXTURE_NAMES {
        let f = fixture(name).unwrap();
        let net =
            parse_network(&fs::read_to_string(dir.join(format!("{name}.network.json"))).unwrap())
                .unwrap();
        assert_eq!(network_to_json(&net), network_to_json(&f.network), "{name}");
        let paths = parse_path_table(
            &net,
            &fs::read_to_string(dir.join(format!("{name}.paths.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(paths.paths(), f.paths.paths(), "{name}");
        assert_eq!(paths.od_pairs(), f.paths.od_pairs(), "{name}");
    }
}

#[test]
fn six_link_case_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let (counts, truth) = six_link_case(tmp.path());
    let out = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "fig2",
            "--measurements",
            counts.to_str().unwrap(),
            "--truth",
            "truth.json",
            "-o",
            "l1.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(tmp.path().join("l1.json"));
    assert_eq!(r["recovery"]["path"], true);
    assert_eq!(r["status"], "optimal");
    assert_eq!(r["sparsity"], 4);
    assert_eq!(r["allocation"][13]["label"], "4->2:[l4_3,l3_2]");
    assert!(String::from_utf8_lossy(&out.stdout).contains("recovered=true"));

    let out = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "fig2",
            "--paths",
            "fig2",
            "--measurements",
            "six_links.csv",
            "--method",
            "l2",
            "--truth",
            truth.to_str().unwrap(),
            "-o",
            "l2.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let r = json(tmp.path().join("l2.json"));
    assert_eq!(r["recovery"]["path"], false);
    assert!(r["recovery"]["relative_error"].as_f64().unwrap() > 0.1);
}

#[test]
fn estimate_from_shipped_files_matches_fixture_names() {
    let tmp = TempDir::new().unwrap();
    six_link_case(tmp.path());
    let dir = FsPath::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let net = dir.join("fig2.network.json");
    let paths = dir.join("fig2.paths.json");
    let a = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "fig2",
            "--measurements",
            "six_links.csv",
            "-o",
            "a.json",
        ],
    );
    let b = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            net.to_str().unwrap(),
            "--paths",
            paths.to_str().unwrap(),
            "--measurements",
            "six_links.csv",
            "-o",
            "b.json",
        ],
    );
    assert_eq!((code(&a), code(&b)), (0, 0));
    assert_eq!(
        fs::read(tmp.path().join("a.json")).unwrap(),
        fs::read(tmp.path().join("b.json")).unwrap()
    );
}

#[test]
fn every_method_runs() {
    let tmp = TempDir::new().unwrap();
    six_link_case(tmp.path());
    let mut w = vec![1.0; 14];
    for i in [1, 7, 10, 13] {
        w[i] = 0.1;
    }
    fs::write(
        tmp.path().join("w.json"),
        serde_json::to_string(&w).unwrap(),
    )
    .unwrap();
    let cases: [&[&str]; 6] = [
        &["--method", "l1"],
        &["--method", "l2"],
        &["--method", "l1-noisy", "--delta", "0.5"],
        &["--method", "l2-noisy", "--delta", "0.5"],
        &["--method", "weighted", "--weights", "w.json"],
        &["--method", "reweighted", "--iters", "3"],
    ];
    for extra in cases {
        let mut args = vec![
            "estimate",
            "--network",
            "fig2",
            "--measurements",
            "six_links.csv",
            "-o",
            "r.json",
        ];
        args.extend_from_slice(extra);
        let out = run(tmp.path(), &args);
        assert_eq!(
            code(&out),
            0,
            "{extra:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let r = json(tmp.path().join("r.json"));
        assert_eq!(r["x"].as_array().unwrap().len(), 14);
    }
}

#[test]
fn zero_counts_give_zero_allocation() {
    let tmp = TempDir::new().unwrap();
    write_counts(tmp.path(), "zero.csv", &SIX_LINKS, &[0.0; 6]);
    let out = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "fig2",
            "--measurements",
            "zero.csv",
            "-o",
            "z.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let r = json(tmp.path().join("z.json"));
    assert!(r["x"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    six_link_case(tmp.path());
    let base = [
        "estimate",
        "--network",
        "fig2",
        "--measurements",
        "six_links.csv",
        "-o",
        "r.json",
    ];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        code(&run(tmp.path(), &v))
    };
    // usage
    assert_eq!(with(&["--method", "l1-noisy"]), 2);
    assert_eq!(with(&["--method", "l1-noisy", "--delta=-1"]), 2);
    assert_eq!(with(&["--method", "weighted"]), 2);
    assert_eq!(with(&["--method", "simplex"]), 2);
    assert_eq!(
        code(&run(tmp.path(), &["estimate", "--network", "fig2"])),
        2
    );
    // parse / validation
    fs::write(tmp.path().join("bad.csv"), "link,value\nl1_2,3\n").unwrap();
    assert_eq!(
        code(&run(
            tmp.path(),
            &[
                "estimate",
                "--network",
                "fig2",
                "--measurements",
                "bad.csv",
                "-o",
                "r.json"
            ]
        )),
        3
    );
    write_counts(tmp.path(), "unknown.csv", &["l9_9"], &[1.0]);
    assert_eq!(
        code(&run(
            tmp.path(),
            &[
                "estimate",
                "--network",
                "fig2",
                "--measurements",
                "unknown.csv",
                "-o",
                "r.json"
            ]
        )),
        3
    );
    write_counts(tmp.path(), "neg.csv", &["l1_2"], &[-1.0]);
    assert_eq!(
        code(&run(
            tmp.path(),
            &[
                "estimate",
                "--network",
                "fig2",
                "--measurements",
                "neg.csv",
                "-o",
                "r.json"
            ]
        )),
        3
    );
    assert_eq!(
        code(&run(
            tmp.path(),
            &[
                "estimate",
                "--network",
                "missing.json",
                "--paths",
                "x",
                "--measurements",
                "six_links.csv",
                "-o",
                "r.json"
            ]
        )),
        3
    );
    // every path through l1_2 also uses l3_1 or l4_1, both counted zero
    write_counts(
        tmp.path(),
        "inf.csv",
        &["l1_2", "l3_1", "l4_1"],
        &[10.0, 0.0, 0.0],
    );
    assert_eq!(
        code(&run(
            tmp.path(),
            &[
                "estimate",
                "--network",
                "fig2",
                "--measurements",
                "inf.csv",
                "-o",
                "r.json"
            ]
        )),
        4
    );
}

#[test]
fn vmt_bounds_and_unbounded_paths() {
    let tmp = TempDir::new().unwrap();
    // Four single-link paths on the fig1 network: fully measured, the system is the identity.
    let f = fixture("fig1").unwrap();
    let paths = vec![
        Path::new(1, 2, &["l1_2"]),
        Path::new(1, 3, &["l1_3"]),
        Path::new(2, 3, &["l2_3"]),
        Path::new(3, 1, &["l3_1"]),
    ];
    fs::write(tmp.path().join("net.json"), network_to_json(&f.network)).unwrap();
    fs::write(tmp.path().join("paths.json"), paths_to_json(&paths)).unwrap();
    write_counts(
        tmp.path(),
        "all.csv",
        &["l1_2", "l1_3", "l2_3", "l3_1"],
        &[4.0, 5.0, 6.0, 7.0],
    );
    let out = run(
        tmp.path(),
        &[
            "vmt",
            "--network",
            "net.json",
            "--paths",
            "paths.json",
            "--measurements",
            "all.csv",
            "--unit",
            "-o",
            "v.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(tmp.path().join("v.json"));
    assert_eq!(r["vmt_lower"].as_f64(), Some(22.0));
    assert_eq!(r["vmt_upper"].as_f64(), Some(22.0));

    // Fig1 proper, fully measured: the truth lies in [lower, upper].
    let truth = [1.0, 2.0, 3.0, 0.0, 5.0, 1.0, 2.0];
    let ms = build_static_incidence(&f.network, &f.paths, &f.network.link_ids()).unwrap();
    let ids: Vec<String> = f.network.link_ids().iter().map(|l| l.0.clone()).collect();
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    write_counts(tmp.path(), "fig1.csv", &ids, &ms.apply(&truth));
    let out = run(
        tmp.path(),
        &[
            "vmt",
            "--network",
            "fig1",
            "--measurements",
            "fig1.csv",
            "--unit",
            "-o",
            "v1.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let r = json(tmp.path().join("v1.json"));
    let total: f64 = truth.iter().sum();
    assert!(
        r["vmt_lower"].as_f64().unwrap() <= total + 1e-9
            && total <= r["vmt_upper"].as_f64().unwrap() + 1e-9
    );

    // Only l1_3 measured: every other path is invisible, so the maximum is unbounded.
    write_counts(tmp.path(), "one.csv", &["l1_3"], &[5.0]);
    let out = run(
        tmp.path(),
        &[
            "vmt",
            "--network",
            "fig1",
            "--measurements",
            "one.csv",
            "--unit",
            "-o",
            "v2.json",
        ],
    );
    assert_eq!(code(&out), 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1->2:[l1_2]"), "{err}");
    let r = json(tmp.path().join("v2.json"));
    assert_eq!(r["status"], "unbounded");
    assert!(r["vmt_upper"].is_null());
}

#[test]
fn enumerate_paths_from_fixture_and_file() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        &["enumerate", "--network", "fig1", "-o", "p.json"],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("K=6 N=7"));
    let f = fixture("fig1").unwrap();
    let table = parse_path_table(
        &f.network,
        &fs::read_to_string(tmp.path().join("p.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(table.len(), 7);

    // A node with no outgoing links cannot reach anything.
    let net = Network::new(
        [1, 2, 3],
        vec![Link::new("a", 1, 2, 1.0, 1), Link::new("b", 3, 2, 1.0, 1)],
    )
    .unwrap();
    fs::write(tmp.path().join("n.json"), network_to_json(&net)).unwrap();
    let out = run(
        tmp.path(),
        &[
            "enumerate",
            "--network",
            "n.json",
            "--od",
            "1-3",
            "-o",
            "q.json",
        ],
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no path"));

    let out = run(
        tmp.path(),
        &[
            "enumerate",
            "--network",
            "fig1",
            "--od",
            "1-3",
            "--max-links",
            "0",
            "-o",
            "e.json",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read_to_string(tmp.path().join("e.json"))
            .unwrap()
            .trim(),
        "[]"
    );
}

fn replay_matches(dir: &FsPath, args: &[&str], output: &str) {
    let first = run(dir, args);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let manifest = format!("{output}.manifest.json");
    let again = run(dir, &["replay", &manifest, "-o", "replayed.out"]);
    assert_eq!(
        code(&again),
        0,
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    assert_eq!(
        fs::read(dir.join(output)).unwrap(),
        fs::read(dir.join("replayed.out")).unwrap(),
        "{args:?}"
    );
}

#[test]
fn manifests_replay_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    replay_matches(
        d,
        &[
            "sweep",
            "--support",
            "5,9,13",
            "--m",
            "4..10",
            "--trials",
            "40",
            "--seed",
            "7",
            "-o",
            "s.csv",
        ],
        "s.csv",
    );
    replay_matches(
        d,
        &[
            "sweep",
            "--sparsity",
            "3,4",
            "--m",
            "6,8",
            "--trials",
            "30",
            "-o",
            "r.csv",
        ],
        "r.csv",
    );
    replay_matches(
        d,
        &[
            "noisy-cdf",
            "--support",
            "2,8,11,14",
            "--nu",
            "0.02",
            "--trials",
            "40",
            "-o",
            "c.csv",
        ],
        "c.csv",
    );
    replay_matches(
        d,
        &[
            "vmt-sweep",
            "--m",
            "22,38",
            "--trials",
            "20",
            "--criterion",
            "value",
            "-o",
            "v.csv",
        ],
        "v.csv",
    );
    replay_matches(d, &["grid", "--n", "10,50", "-o", "g.csv"], "g.csv");
    six_link_case(d);
    replay_matches(
        d,
        &[
            "estimate",
            "--network",
            "fig2",
            "--measurements",
            "six_links.csv",
            "-o",
            "e.json",
        ],
        "e.json",
    );

    let m = json(d.join("s.csv.manifest.json"));
    assert_eq!(m["command"], "sweep");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["support"], serde_json::json!([5, 9, 13]));
}

#[test]
fn seed_comes_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .current_dir(tmp.path())
        .env("CODE_SEED", "99")
        .args([
            "sweep",
            "--support",
            "5,9,13",
            "--m",
            "10",
            "--trials",
            "5",
            "-o",
            "s.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(json(tmp.path().join("s.csv.manifest.json"))["seed"], 99);
    let csv = fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",5,99"), "{csv}");
}

#[test]
fn sweep_csv_schema_and_grid_values() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        &[
            "sweep",
            "--support",
            "2,8,11,14",
            "--m",
            "10",
            "--trials",
            "20",
            "-o",
            "s.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "S,M,criterion,rate,stderr,trials,seed");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("4,10,path,"));

    let out = run(tmp.path(), &["grid", "--n", "50", "--alpha", "0.1"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("50,0.1,5,126410606437752,"), "{stdout}");
    assert_eq!(code(&run(tmp.path(), &["grid", "--n", "7"])), 3);
    assert_eq!(
        code(&run(
            tmp.path(),
            &["sweep", "--support", "0", "--m", "5", "-o", "x.csv"]
        )),
        2
    );
    assert_eq!(
        code(&run(tmp.path(), &["sweep", "--m", "5", "-o", "x.csv"])),
        2
    );
}

/// Synthetic system with 10 measured links and 33 paths, ingested from files.
#[test]
fn synthetic_ten_by_thirty_three() {
    let tmp = TempDir::new().unwrap();
    // Layers: source 1, {2,3,4}, {5,6,7}, {8,9,10}, sink 11, fully connected between layers.
    let layers: [&[u32]; 5] = [&[1], &[2, 3, 4], &[5, 6, 7], &[8, 9, 10], &[11]];
    let mut links = Vec::new();
    for w in layers.windows(2) {
        for &t in w[0] {
            for &h in w[1] {
                links.push(Link::new(format!("e{t}_{h}"), t, h, 1.0, 1));
            }
        }
    }
    let net = Network::new(1..=11, links).unwrap();
    let mut paths = Vec::new();
    for a in 2..=4u32 {
        for b in 5..=7u32 {
            for c in 8..=10u32 {
                let ids = [
                    format!("e1_{a}"),
                    format!("e{a}_{b}"),
                    format!("e{b}_{c}"),
                    format!("e{c}_11"),
                ];
                let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
                paths.push(Path::new(1, 11, &ids));
            }
        }
    }
    for b in 5..=7u32 {
        for c in 8..=10u32 {
            let ids = [format!("e2_{b}"), format!("e{b}_{c}"), format!("e{c}_11")];
            let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
            paths.push(Path::new(2, 11, &ids));
        }
    }
    paths.truncate(33);
    let table = PathTable::new(&net, paths.clone()).unwrap();

    let measured = [
        "e1_2", "e1_3", "e2_5", "e3_6", "e4_7", "e5_8", "e6_9", "e7_10", "e8_11", "e9_11",
    ];
    let ids: Vec<LinkId> = measured.iter().map(|s| LinkId::new(*s)).collect();
    let ms = build_static_incidence(&net, &table, &ids).unwrap();
    assert_eq!((ms.nrows(), ms.ncols()), (10, 33));

    let mut truth = vec![0.0; 33];
    truth[0] = 12.0;
    truth[30] = 7.0;
    fs::write(tmp.path().join("net.json"), network_to_json(&net)).unwrap();
    fs::write(tmp.path().join("paths.json"), paths_to_json(&paths)).unwrap();
    write_counts(tmp.path(), "counts.csv", &measured, &ms.apply(&truth));
    let out = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "net.json",
            "--paths",
            "paths.json",
            "--measurements",
            "counts.csv",
            "-o",
            "r.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(tmp.path().join("r.json"));
    assert_eq!(r["x"].as_array().unwrap().len(), 33);
    assert_eq!(r["od_flows"].as_array().unwrap().len(), 2);
    assert!(r["residual_inf"].as_f64().unwrap() < 1e-6);
}

#[test]
fn dynamic_estimate_from_timed_counts() {
    let tmp = TempDir::new().unwrap();
    let f = fixture("fig1").unwrap();
    let links = f.network.link_ids();
    let ms = build_dynamic_system(&f.paths, &f.network, &links, &[2, 3]).unwrap();
    // one departure on the first column
    let mut x = vec![0.0; ms.ncols()];
    x[0] = 4.0;
    let y = ms.apply(&x);
    let mut csv = String::from("link_id,time,count\n");
    for (row, v) in ms.rows.iter().zip(&y) {
        csv.push_str(&format!("{},{},{v}\n", row.link, row.time.unwrap()));
    }
    fs::write(tmp.path().join("timed.csv"), csv).unwrap();
    let out = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "fig1",
            "--measurements",
            "timed.csv",
            "--dynamic",
            "-o",
            "d.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(tmp.path().join("d.json"));
    assert_eq!(r["x"].as_array().unwrap().len(), ms.ncols());
    assert!(r["allocation"][0]["departure"].is_i64());
    assert!(r["residual_inf"].as_f64().unwrap() < 1e-6);

    // static counts with --dynamic is a validation error
    write_counts(tmp.path(), "s.csv", &["l1_2"], &[1.0]);
    let out = run(
        tmp.path(),
        &[
            "estimate",
            "--network",
            "fig1",
            "--measurements",
            "s.csv",
            "--dynamic",
            "-o",
            "d.json",
        ],
    );
    assert_eq!(code(&out), 3);
}
