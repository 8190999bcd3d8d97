//! Acceptance gate. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion outside `KNOWN_UNATTAINABLE` fails.
//!
//! Run with `cargo test -p chipkb --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use chrono::NaiveDate;
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use tower::ServiceExt;

use chipkb_api::{router, AppState, Snapshot};
use chipkb_core::analytics::{self, AnalyticsConfig, DEFAULT_CUTOFF};
use chipkb_core::augment::{augment, classify_component, AugmentError, KeyTermTable};
use chipkb_core::domain::{
    AospBulletin, ChipsetManufacturer, Component, ComponentKeyTerm, CveId, DeviceId, DeviceUpdate,
    Location, VantagePoint,
};
use chipkb_core::ingest::{
    parse_document, read_corpus, read_document, render_golden, Ingested, ParseError,
};
use chipkb_core::kb::KnowledgeBase;
use chipkb_core::machine::to_machine;
use chipkb_core::picker::{greedy_cover, pick_devices, PickRequest};
use chipkb_core::stats::{chi_square_upper_tail, kruskal_wallis, quantile, SampleGroup};
use chipkb_testkit::{
    check_introduction, check_updates, exhaustive_max_coverage, random_sets, toyset, toyset_dir,
    toyset_retrieved_at, World, WorldParams,
};

/// Criteria that cannot hold as stated. They still run and print their
/// outcome, but do not fail the gate.
const KNOWN_UNATTAINABLE: &[&str] = &["picker"];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn cve(s: &str) -> CveId {
    s.parse().unwrap()
}

fn rq1_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xA001);
    for i in 0..100 {
        let world = World::random(&mut rng, WorldParams::default());
        check_introduction(&world).map_err(|e| format!("instance {i}: {e}"))?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("100 instances in {:?}", start.elapsed()))
}

fn rq4_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xA001);
    for i in 0..100 {
        let world = World::random(&mut rng, WorldParams::default());
        check_updates(&world, DEFAULT_CUTOFF).map_err(|e| format!("instance {i}: {e}"))?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("100 instances in {:?}", start.elapsed()))
}

fn statistics() -> Outcome {
    let start = Instant::now();
    let groups = |a: &[f64], b: &[f64]| {
        vec![
            SampleGroup::new("a", a.to_vec()),
            SampleGroup::new("b", b.to_vec()),
        ]
    };
    let kw =
        kruskal_wallis(&groups(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0])).map_err(|e| e.to_string())?;
    ensure((kw.h - 3.857).abs() <= 1e-3, || format!("H = {}", kw.h))?;
    ensure((kw.p - 0.0495).abs() <= 1e-3, || format!("p = {}", kw.p))?;
    let sym = kruskal_wallis(&groups(&[1.0, 4.0], &[2.0, 3.0])).map_err(|e| e.to_string())?;
    ensure(sym.h == 0.0, || format!("symmetric H = {}", sym.h))?;
    let tail = chi_square_upper_tail(3.841, 1);
    ensure((tail - 0.05).abs() <= 5e-4, || {
        format!("chi-square tail = {tail}")
    })?;
    let q = quantile(&[10.0, 20.0, 30.0, 40.0], 0.25).map_err(|e| e.to_string())?;
    ensure(q == 17.5, || format!("quantile = {q}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "H = {:.4}, p = {:.4}, tail = {tail:.4}",
        kw.h, kw.p
    ))
}

fn fixtures() -> PathBuf {
    repo().join("crates/core/tests/fixtures")
}

fn fixture(dir: &str, file: &str) -> Result<Ingested, ParseError> {
    let vp: VantagePoint = dir.parse().unwrap();
    let doc = read_document(vp, &fixtures().join(dir).join(file), d(2024, 4, 30)).unwrap();
    parse_document(&doc)
}

fn rules(parsed: &Ingested) -> Vec<(String, bool)> {
    parsed
        .issues()
        .iter()
        .map(|i| (i.rule.clone(), i.is_reject()))
        .collect()
}

fn parsers() -> Outcome {
    let start = Instant::now();
    let docs = read_corpus(&fixtures(), d(2024, 4, 30)).map_err(|e| e.to_string())?;
    for (path, doc) in &docs {
        let stem = path.file_stem().unwrap().to_str().unwrap();
        let golden = path.with_file_name(format!("{stem}.golden.jsonl"));
        let expected =
            fs::read_to_string(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
        ensure(render_golden(&parse_document(doc)) == expected, || {
            format!("{} differs", path.display())
        })?;
    }
    let bad_cve =
        fixture("qualcomm-bulletin", "march-2024-bad-cve.html").map_err(|e| e.to_string())?;
    ensure(
        rules(&bad_cve) == [("cve-pattern".to_string(), true)],
        || format!("bad CVE: {:?}", rules(&bad_cve)),
    )?;
    for (dir, file) in [
        ("qualcomm-bulletin", "score-out-of-range.html"),
        ("nvd", "score-out-of-range.json"),
    ] {
        let parsed = fixture(dir, file).map_err(|e| e.to_string())?;
        let hit = rules(&parsed).contains(&("severity-range".to_string(), true));
        ensure(hit && parsed.item_count() == 0, || {
            format!("{dir}/{file}: {:?}", rules(&parsed))
        })?;
    }
    let no_cpe = fixture("nvd", "no-cpe.json").map_err(|e| e.to_string())?;
    ensure(
        rules(&no_cpe) == [("missing-cpe".to_string(), false)],
        || format!("no CPE: {:?}", rules(&no_cpe)),
    )?;
    ensure(
        fixture("aosp-bulletin", "missing-spl.html") == Err(ParseError::MissingSpl),
        || "missing SPL accepted".into(),
    )?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{} golden fixtures, 5 malformations", docs.len()))
}

fn key_term(
    cm: ChipsetManufacturer,
    term: &str,
    c: Option<Component>,
    l: Option<Location>,
) -> ComponentKeyTerm {
    ComponentKeyTerm {
        manufacturer: cm,
        term: term.into(),
        component: c,
        location: l,
    }
}

fn augmentation() -> Outcome {
    use ChipsetManufacturer::{Mediatek, Qualcomm};
    let t = KeyTermTable::builtin();
    for (raw, cm, want) in [
        ("Kinibi", Mediatek, Component::Trust),
        ("QSEE", Qualcomm, Component::Trust),
        ("Adreno", Qualcomm, Component::Gpu),
    ] {
        let got = classify_component(raw, cm, t);
        ensure(got == Ok(Some(want)), || format!("{raw}: {got:?}"))?;
    }
    let table = KeyTermTable::new(
        vec![
            key_term(Qualcomm, "WLAN", Some(Component::WiFi), None),
            key_term(Qualcomm, "WLAN IPC", Some(Component::Ipc), None),
            key_term(Qualcomm, "Audio", Some(Component::Audio), None),
            key_term(Qualcomm, "Video", Some(Component::Vision), None),
        ],
        None,
    )
    .map_err(|e| e.to_string())?;
    let longest = classify_component("wlan ipc router", Qualcomm, &table);
    ensure(longest == Ok(Some(Component::Ipc)), || {
        format!("longest match: {longest:?}")
    })?;
    let tie = classify_component("Audio/Video", Qualcomm, &table);
    ensure(matches!(tie, Err(AugmentError::Ambiguous { .. })), || {
        format!("tie: {tie:?}")
    })?;

    let mut kb = toyset();
    let before = kb.export_tables();
    let errors = kb.augment_all(t);
    ensure(errors.is_empty(), || format!("re-run errors: {errors:?}"))?;
    ensure(kb.export_tables() == before, || {
        "re-running augmentation changed the knowledge base".into()
    })?;
    for v in kb.vulnerabilities() {
        let mut again = v.clone();
        augment(&mut again, t);
        ensure(&again == v, || format!("{} changed on re-run", v.cve))?;
    }
    Ok("builtin classes, longest match, ambiguity, idempotence".into())
}

fn ingest_in_order(
    docs: &[(PathBuf, chipkb_core::ingest::SourceDocument)],
) -> BTreeMap<String, String> {
    let mut kb = KnowledgeBase::new();
    for (_, doc) in docs {
        kb.ingest(parse_document(doc).unwrap(), KeyTermTable::builtin());
    }
    kb.link_all();
    kb.export_tables()
}

fn spl_oracle() -> Result<(), String> {
    let mut kb = KnowledgeBase::new();
    let (a, b, c) = (
        cve("CVE-2021-0001"),
        cve("CVE-2021-0002"),
        cve("CVE-2021-0003"),
    );
    kb.upsert_bulletin(AospBulletin::new(d(2021, 1, 1), [a.clone()].into()).unwrap());
    kb.upsert_bulletin(AospBulletin::new(d(2021, 2, 1), [b.clone()].into()).unwrap());
    kb.upsert_bulletin(AospBulletin::new(d(2021, 3, 1), [b.clone(), c.clone()].into()).unwrap());
    let phone = DeviceId::new("Acme", "S1");
    let update = |spl: Option<NaiveDate>, explicit: &[&CveId]| {
        DeviceUpdate::new(
            phone.clone(),
            d(2021, 4, 1),
            spl,
            explicit.iter().map(|c| (*c).clone()).collect(),
        )
        .unwrap()
    };
    // (update, mitigates a, b, c), enumerated by hand.
    let table = [
        (update(Some(d(2020, 12, 1)), &[]), [false, false, false]),
        (update(Some(d(2021, 1, 1)), &[]), [true, false, false]),
        (update(Some(d(2021, 1, 31)), &[]), [true, false, false]),
        (update(Some(d(2021, 2, 1)), &[]), [true, true, false]),
        (update(Some(d(2021, 2, 5)), &[&c]), [true, true, true]),
        (update(Some(d(2021, 3, 1)), &[]), [true, true, true]),
        (update(None, &[&b]), [false, true, false]),
    ];
    for (u, want) in &table {
        let got = [&a, &b, &c].map(|v| kb.update_mitigates(u, v));
        ensure(&got == want, || {
            format!(
                "update {:?}/{:?}: {got:?}, expected {want:?}",
                u.spl_date, u.explicit_cves
            )
        })?;
    }
    Ok(())
}

fn knowledge_base() -> Outcome {
    let docs = read_corpus(&toyset_dir(), toyset_retrieved_at()).map_err(|e| e.to_string())?;
    let reference = ingest_in_order(&docs);
    let mut rng = StdRng::seed_from_u64(0xA006);
    for i in 0..10 {
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut rng);
        ensure(ingest_in_order(&shuffled) == reference, || {
            format!("shuffle {i} changed the export")
        })?;
    }
    let world = World::random(&mut rng, WorldParams::default());
    let reference = world.knowledge_base().export_tables();
    for i in 0..10 {
        let kb = world.knowledge_base_shuffled(&mut rng);
        ensure(kb.export_tables() == reference, || {
            format!("world shuffle {i} changed the export")
        })?;
    }
    spl_oracle()?;
    Ok("10 shuffles of the toyset and of a random world; 3-bulletin SPL table".into())
}

fn covered(sets: &[BTreeSet<u32>], steps: &[chipkb_core::picker::Step]) -> usize {
    steps
        .iter()
        .flat_map(|s| sets[s.index].iter())
        .collect::<BTreeSet<_>>()
        .len()
}

fn picker() -> Outcome {
    let start = Instant::now();
    let bound = 1.0 - (-1f64).exp();
    let mut rng = StdRng::seed_from_u64(0xA007);
    let mut below_optimum = 0;
    for i in 0..100 {
        let n = 1 + i % 15;
        let k = 1 + i % 5;
        let sets = random_sets(&mut rng, n, 40);
        let greedy = covered(&sets, &greedy_cover(&sets, &[], k));
        let optimum = exhaustive_max_coverage(&sets, k);
        ensure(greedy as f64 >= bound * optimum as f64, || {
            format!("instance {i}: greedy {greedy} below bound of optimum {optimum}")
        })?;
        if n <= 10 && greedy < optimum {
            below_optimum += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    let sets: Vec<BTreeSet<u32>> = vec![[1, 2, 3, 4].into(), [1, 2, 5].into(), [3, 4, 6].into()];
    let greedy = covered(&sets, &greedy_cover(&sets, &[], 2));
    let optimum = exhaustive_max_coverage(&sets, 2);
    if greedy < optimum || below_optimum > 0 {
        return Err(format!(
            "(1-1/e) bound holds on 100/100; greedy below the exhaustive optimum on {below_optimum} random \
             instances with <= 10 candidates and on {{1234}},{{125}},{{346}} with k = 2 ({greedy} vs {optimum})"
        ));
    }
    Ok("bound and exhaustive equality hold".into())
}

fn api() -> Outcome {
    let kb = toyset();
    let cfg = AnalyticsConfig::default();
    let state = AppState::new(Snapshot {
        kb: toyset(),
        config: cfg,
    });
    let mut cases: Vec<(Request<Body>, String)> = [
        (
            "/metrics/introduction",
            to_machine(&analytics::introduction_report(&kb)),
        ),
        (
            "/metrics/discovery",
            to_machine(&analytics::discovery_report(&kb, cfg.attribution_mode)),
        ),
        (
            "/metrics/severity",
            to_machine(&analytics::severity_by_location(&kb)),
        ),
        (
            "/metrics/patch-latency",
            to_machine(&analytics::patch_latency_report(&kb, cfg.threshold_days)),
        ),
        (
            "/metrics/availability",
            to_machine(&analytics::availability_matrix(&kb, &cfg)),
        ),
        (
            "/metrics/consistency",
            to_machine(&analytics::severity_consistency(&kb)),
        ),
        (
            "/metrics/unmitigated",
            to_machine(&analytics::unmitigated_vulnerabilities(&kb, cfg.cutoff)),
        ),
        (
            "/metrics/update-timeline",
            to_machine(&analytics::update_timeline_report(&kb)),
        ),
        (
            "/metrics/affected-distribution",
            to_machine(&analytics::affected_count_distribution(&kb)),
        ),
    ]
    .into_iter()
    .map(|(uri, body)| {
        (
            Request::get(uri).body(Body::empty()).unwrap(),
            body.unwrap(),
        )
    })
    .collect();
    for body in [r#"{"k":2}"#, r#"{"k":2,"locked":["samsung-galaxy-t3"]}"#] {
        let req: PickRequest = serde_json::from_str(body).unwrap();
        let expected = to_machine(&pick_devices(&kb, &req).map_err(|e| e.to_string())?).unwrap();
        let http = Request::post("/pick")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body))
            .unwrap();
        cases.push((http, expected));
    }
    let count = cases.len();
    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .unwrap();
    runtime.block_on(async {
        for (req, expected) in cases {
            let uri = req.uri().to_string();
            let resp = router(state.clone()).oneshot(req).await.unwrap();
            ensure(resp.status() == StatusCode::OK, || {
                format!("{uri}: {}", resp.status())
            })?;
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            ensure(bytes == expected.as_bytes(), || {
                format!("{uri} differs from the direct serialization")
            })?;
        }
        Ok(format!("{count} requests byte-equal"))
    })
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = dir.path().join("kb.sqlite");
    let run = |args: &[&str]| -> Result<String, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_chipkb"))
            .env_clear()
            .env("CHIPKB_STORE", &store)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!(
                "`{}` exited {:?}: {}",
                args.join(" "),
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
        String::from_utf8(out.stdout).map_err(|e| e.to_string())
    };
    let toy = toyset_dir();
    run(&[
        "ingest",
        "--retrieved-at",
        "2024-04-30",
        toy.to_str().unwrap(),
    ])?;
    run(&["augment"])?;
    run(&["link"])?;
    let machine = run(&["report", "all", "--format", "machine"])?;
    let text = run(&["report", "all"])?;
    within(start.elapsed(), Duration::from_secs(10))?;
    let expected = repo().join("data/toyset-expected");
    for (name, actual) in [("report-all.json", &machine), ("report-all.txt", &text)] {
        let golden = fs::read_to_string(expected.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(&golden == actual, || {
            format!("{name} differs from the golden report")
        })?;
    }
    Ok(format!(
        "exit 0 in {:?}, golden report reproduced",
        start.elapsed()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("rq1-oracle", rq1_oracle),
        ("rq4-oracle", rq4_oracle),
        ("statistics", statistics),
        ("parsers", parsers),
        ("augmentation", augmentation),
        ("knowledge-base", knowledge_base),
        ("picker", picker),
        ("api", api),
        ("end-to-end", end_to_end),
    ];
    let mut out = std::io::stdout().lock();
    let mut blocking = Vec::new();
    for (name, run) in criteria {
        let line = match run() {
            Ok(detail) => format!("PASS {name}: {detail}"),
            Err(why) => {
                let known = KNOWN_UNATTAINABLE.contains(&name);
                if !known {
                    blocking.push(name);
                }
                let note = if known { " (known unattainable)" } else { "" };
                format!("FAIL {name}{note}: {why}")
            }
        };
        writeln!(out, "{line}").unwrap();
    }
    drop(out);
    assert!(blocking.is_empty(), "failing criteria: {blocking:?}");
}
