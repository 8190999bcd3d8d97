use std::fs;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use chipkb_core::analytics::introduction_report;
use chipkb_core::kb::KnowledgeBase;
use chipkb_core::machine::to_machine;
use chipkb_core::picker::{pick_devices, PickRequest};
use chipkb_testkit::{toyset, toyset_dir};

const RETRIEVED: &str = "2024-04-30";

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden_dir() -> PathBuf {
    repo().join("data/toyset-expected")
}

fn chipkb(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chipkb"))
        .env_clear()
        .env("CHIPKB_STORE", store)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn built_store() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("kb.sqlite");
    let toy = toyset_dir();
    ok(&chipkb(
        &store,
        &["ingest", "--retrieved-at", RETRIEVED, toy.to_str().unwrap()],
    ));
    ok(&chipkb(&store, &["augment"]));
    ok(&chipkb(&store, &["link"]));
    (dir, store)
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("CHIPKB_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} differs from the stored golden file"
    );
}

#[test]
fn end_to_end_reproduces_the_golden_report() {
    let start = Instant::now();
    let (_dir, store) = built_store();
    let machine = ok(&chipkb(&store, &["report", "all", "--format", "machine"]));
    let text = ok(&chipkb(&store, &["report", "all"]));
    assert!(start.elapsed() < Duration::from_secs(10));
    check_golden("report-all.json", &machine);
    check_golden("report-all.txt", &text);
    assert_eq!(
        ok(&chipkb(&store, &["report", "all", "--format", "machine"])),
        machine
    );
}

#[test]
fn per_source_ingest_matches_corpus_ingest() {
    let (_dir, corpus_store) = built_store();
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("kb.sqlite");
    let toy = toyset_dir();
    // Reverse order, one source at a time.
    for (source, sub) in [
        ("wikipedia-chipsets", "wikipedia-chipsets"),
        ("samsung-updates", "samsung-updates/changelog.html"),
        ("qualcomm-bulletin", "qualcomm-bulletin"),
        ("nvd", "nvd"),
        ("gsmarena", "gsmarena/catalog.html"),
        ("aosp-bulletin", "aosp-bulletin"),
    ] {
        let path = toy.join(sub);
        ok(&chipkb(
            &store,
            &[
                "ingest",
                "--retrieved-at",
                RETRIEVED,
                "--source",
                source,
                path.to_str().unwrap(),
            ],
        ));
    }
    ok(&chipkb(&store, &["link"]));
    assert_eq!(
        KnowledgeBase::load(&store).unwrap().export_tables(),
        KnowledgeBase::load(&corpus_store).unwrap().export_tables()
    );
}

#[test]
fn rq1_machine_output_equals_the_introduction_report() {
    let (_dir, store) = built_store();
    let out = ok(&chipkb(&store, &["report", "rq1", "--format", "machine"]));
    assert_eq!(out, to_machine(&introduction_report(&toyset())).unwrap());
}

#[test]
fn pick_and_impact() {
    let (_dir, store) = built_store();
    let out = ok(&chipkb(
        &store,
        &[
            "pick",
            "--k",
            "2",
            "--lock",
            "samsung-galaxy-t1",
            "--format",
            "machine",
        ],
    ));
    let req = PickRequest {
        k: 2,
        filters: Default::default(),
        locked: vec![chipkb_core::domain::DeviceId::from_slug(
            "samsung-galaxy-t1",
        )],
    };
    assert_eq!(
        out,
        to_machine(&pick_devices(&toyset(), &req).unwrap()).unwrap()
    );

    let out = ok(&chipkb(&store, &["impact", "CVE-2021-1901"]));
    assert!(out.contains("smartphones: 3"), "{out}");
    let out = chipkb(&store, &["impact", "CVE-2020-0001"]);
    assert_eq!(out.status.code(), Some(1));
    let out = chipkb(&store, &["pick", "--k", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn export_import_round_trip() {
    let (dir, store) = built_store();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&chipkb(&store, &["export", a.to_str().unwrap()]));
    let other = dir.path().join("other.sqlite");
    ok(&chipkb(&other, &["import", a.to_str().unwrap()]));
    ok(&chipkb(&other, &["export", b.to_str().unwrap()]));
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn validate_reports_issues_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("unused.sqlite");
    let bad = dir.path().join("bad_bulletin.html");
    fs::write(
        &bad,
        "<p>Published Date: 2024-03-04</p>\
         <table><tr><td>CVE ID</td><td>CVE-20XX-1</td></tr>\
         <tr><td>Description</td><td>x</td></tr><tr><td>Technology Area</td><td>Audio</td></tr>\
         <tr><td>Source</td><td>Internal</td></tr><tr><td>Affected Chipsets</td><td>SM8450</td></tr></table>",
    )
    .unwrap();
    let out = chipkb(
        &store,
        &[
            "validate",
            "--retrieved-at",
            RETRIEVED,
            "--source",
            "qualcomm-bulletin",
            bad.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("reject entry 0: cve fails cve-pattern"),
        "{stdout}"
    );

    let out = chipkb(
        &store,
        &[
            "validate",
            "--source",
            "qualcomm-bulletin",
            "--format",
            "machine",
            bad.to_str().unwrap(),
        ],
    );
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("{\"issue\":"));

    let good = toyset_dir().join("qualcomm-bulletin/2021-06.html");
    let out = ok(&chipkb(
        &store,
        &[
            "validate",
            "--retrieved-at",
            RETRIEVED,
            good.to_str().unwrap(),
        ],
    ));
    assert!(out.contains("2 records"));

    let out = chipkb(&store, &["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "source cannot be inferred");
    assert!(!store.exists(), "validate never writes the store");
}

#[test]
fn ingest_with_rejects_keeps_accepted_entries_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("kb.sqlite");
    let qualcomm = dir.path().join("qualcomm-bulletin");
    fs::create_dir(&qualcomm).unwrap();
    let good = fs::read_to_string(toyset_dir().join("qualcomm-bulletin/2021-06.html")).unwrap();
    fs::write(
        qualcomm.join("a.html"),
        good.replace("CVE-2021-1903", "CVE-21-1903"),
    )
    .unwrap();
    let out = chipkb(
        &store,
        &[
            "ingest",
            "--retrieved-at",
            RETRIEVED,
            qualcomm.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        KnowledgeBase::load(&store)
            .unwrap()
            .vulnerabilities()
            .count(),
        1
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("missing.sqlite");
    for args in [
        vec!["frobnicate"],
        vec!["report", "rq9"],
        vec!["report", "all", "--format", "yaml"],
        vec!["pick"],
        vec!["report", "all"],
        vec!["ingest", "/definitely/not/here"],
        vec!["--config", "/definitely/not/here.toml", "report", "all"],
    ] {
        let out = chipkb(&store, &args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(chipkb(&store, &["--help"]).status.code(), Some(0));
}

#[test]
fn configuration_precedence() {
    let (dir, store) = built_store();
    let cutoff_of = |out: &Output| -> String {
        let v: serde_json::Value = serde_json::from_str(&ok(out)).unwrap();
        v["config"]["cutoff"].as_str().unwrap().to_string()
    };
    let config = dir.path().join("chipkb.toml");
    fs::write(&config, "cutoff_date = 2021-03-01\nthreshold_days = 30\n").unwrap();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_chipkb"));
        cmd.env_clear()
            .env("CHIPKB_STORE", &store)
            .env("CHIPKB_CONFIG", &config);
        if let Some(e) = env {
            cmd.env("CHIPKB_CUTOFF", e);
        }
        cmd.args(["report", "all", "--format", "machine"]);
        if let Some(f) = flag {
            cmd.args(["--cutoff", f]);
        }
        cmd.output().unwrap()
    };
    assert_eq!(cutoff_of(&run(None, None)), "2021-03-01");
    assert_eq!(cutoff_of(&run(Some("2021-04-01"), None)), "2021-04-01");
    assert_eq!(
        cutoff_of(&run(Some("2021-04-01"), Some("2021-05-01"))),
        "2021-05-01"
    );
    let v: serde_json::Value = serde_json::from_str(&ok(&run(None, None))).unwrap();
    assert_eq!(v["config"]["threshold_days"], 30);
    assert_eq!(v["rq4"]["unmitigated"]["eligible"], 0);
}

fn http_get(addr: &str, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(addr).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(
        stream,
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .ok()?;
    let mut response = String::new();
    stream.read_to_string(&mut response).ok()?;
    Some(response)
}

fn wait_for(addr: &str, path: &str, needle: &str) -> bool {
    let deadline = Instant::now() + Duration::from_secs(20);
    while Instant::now() < deadline {
        if http_get(addr, path).is_some_and(|r| r.contains(needle)) {
            return true;
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    false
}

#[cfg(unix)]
#[test]
fn serve_answers_and_reloads_on_sighup() {
    let (_dir, store) = built_store();
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_chipkb"))
        .env_clear()
        .env("CHIPKB_STORE", &store)
        .args(["serve", "--bind", &addr])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let up = wait_for(&addr, "/health", "\"vulnerabilities\": 3");
    let metrics = http_get(&addr, "/metrics/introduction").unwrap_or_default();
    KnowledgeBase::new().save(&store).unwrap();
    let hup = Command::new("kill")
        .args(["-HUP", &child.id().to_string()])
        .status()
        .unwrap();
    let reloaded = wait_for(&addr, "/health", "\"vulnerabilities\": 0");
    let _ = child.kill();
    let _ = child.wait();
    assert!(up, "server did not come up");
    assert!(metrics.ends_with(&to_machine(&introduction_report(&toyset())).unwrap()));
    assert!(hup.success());
    assert!(reloaded, "SIGHUP did not reload the store");
}
