//! One line per acceptance criterion. Runs without the test harness so
//! the lines show up in plain `cargo test` output.

#[path = "../../core/tests/support/mod.rs"]
mod support;

mod common;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::Instant;

use common::Client;
use futures::StreamExt;
use serde_json::json;
use tokio_tungstenite::tungstenite::Message;
use twin::service::protocol::StreamMessage;
use twin::service::TickMode;
use twin_core::geometry::{
    compute_measurements, convert, margin_dataset, train_forest, ConvertParams, ForestParams,
    Forests, RandomForest, TriMesh,
};
use twin_core::runtime::{replay, InteractionEvent, LogRecord, ResultsSummary, SessionState};
use twin_core::{load, save, validate};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn case_study() -> Check {
    let s = support::fixture();
    let names: Vec<&str> = s.classes.iter().map(|c| c.display_name.as_str()).collect();
    for want in [
        "DC power supply",
        "DC motor",
        "ammeter",
        "speedometer",
        "cable",
    ] {
        ensure(
            names
                .iter()
                .any(|n| n.to_lowercase().contains(&want.to_lowercase())),
            format!("no `{want}` class in {names:?}"),
        )?;
    }
    let mut texts = Vec::new();
    let mut waits = 0;
    for p in &s.processes {
        for step in p.steps() {
            if let twin_core::process::StepRef::Instruction(i) = step {
                texts.push(i.text.clone());
                if i.condition == (twin_core::process::Condition::Wait { seconds: 10.0 }) {
                    waits += 1;
                }
            }
        }
    }
    for want in [
        "position speedometer",
        "use a cable to connect DC motor to ammeter",
    ] {
        ensure(
            texts.iter().any(|t| t == want),
            format!("no `{want}` instruction"),
        )?;
    }
    ensure(waits == 1, format!("{waits} wait(10) steps"))?;

    let records = common::golden_records();
    let start = Instant::now();
    let st = replay(SessionState::load(s).map_err(|e| e.to_string())?, &records)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(st.is_complete(), "root procedure not complete")?;
    let hash = st.snapshot_hash().to_string();
    ensure(
        hash == common::golden_hash(),
        format!("hash {hash} differs from the frozen one"),
    )?;
    ensure(elapsed < 1.0, format!("replay took {elapsed:.3} s"))?;
    Ok(format!(
        "complete at tick {}, hash {}.., replay {:.1} ms",
        st.tick_index(),
        &hash[..12],
        elapsed * 1e3
    ))
}

fn serialization() -> Check {
    let mut failures = Vec::new();
    for seed in 0..100 {
        let s = support::scenarios::random_scenario(seed);
        let ok = !validate(&s).has_errors()
            && match (save(&s), save(&s)) {
                (Ok(a), Ok(b)) => a == b && load(&a).is_ok_and(|back| back == s),
                _ => false,
            };
        if !ok {
            failures.push(seed);
        }
    }
    ensure(failures.is_empty(), format!("failing seeds {failures:?}"))?;
    // bytes written by an earlier run
    let frozen = common::fixture_bytes();
    let again = save(&load(&frozen).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(again == frozen, "fixture does not re-save byte-identically")?;
    Ok("100/100 round trips byte-stable; fixture re-saves identically".into())
}

fn expression_oracle() -> Check {
    let (ok, div_zero, failures) = support::oracle::compare(10_000, 0x5eed, 1e-12);
    if let Some(f) = failures.first() {
        return Err(format!(
            "{} disagreements, first `{}`: oracle {:?}, library {:?}",
            failures.len(),
            f.text,
            f.oracle,
            f.lib
        ));
    }
    ensure(div_zero > 0, "no division-by-zero cases generated")?;
    Ok(format!(
        "{ok}/10000 agree within 1e-12; {div_zero} division-by-zero cases error on both"
    ))
}

fn process_semantics() -> Check {
    let interleaving = support::sessions::interleaving_violations(1000);
    let permutations = support::sessions::permutation_violations(5);
    ensure(
        interleaving + permutations == 0,
        format!("{interleaving} gate/monotonicity and {permutations} commutativity violations"),
    )?;
    Ok("0 violations over 1000 interleavings and all permutations of 1..=5 steps".into())
}

fn determinism() -> Check {
    let bad = support::sessions::replay_mismatches(50);
    ensure(bad.is_empty(), format!("mismatching seeds {bad:?}"))?;
    Ok(format!(
        "50/50 replays reproduce the hash on {}-{}",
        std::env::consts::OS,
        std::env::consts::ARCH
    ))
}

fn fixture_forests() -> Result<Forests, String> {
    let read = |name: &str| -> Result<RandomForest, String> {
        let path = support::fixtures_dir().join(format!("forests/{name}.forest.json"));
        let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| e.to_string())
    };
    Ok(Forests {
        accept: read("accept")?,
        plan: read("plan")?,
        quality: read("quality")?,
    })
}

fn geometry() -> Check {
    let sphere = TriMesh::icosphere(1.0, 5);
    let diag = sphere.bbox_diagonal();
    let (out, report) = convert(&sphere, &fixture_forests()?, &ConvertParams::new(2000))
        .map_err(|e| e.to_string())?;
    let iters = report.iterations.len();
    let qe = report
        .iterations
        .last()
        .map_or(f64::NAN, |i| i.quality_error);
    ensure(
        report.is_accepted(),
        format!("conversion {:?}", report.outcome),
    )?;
    ensure(
        out.triangle_count() <= 2000,
        format!("{} triangles", out.triangle_count()),
    )?;
    ensure(iters <= 8, format!("{iters} iterations"))?;
    ensure(
        qe <= 0.02 * diag,
        format!("quality error {qe} > 2% of {diag}"),
    )?;

    let cube = compute_measurements(&TriMesh::unit_cube()).map_err(|e| e.to_string())?;
    ensure(
        cube.triangle_count == 12 && (cube.surface_area - 6.0).abs() <= 1e-9,
        format!(
            "cube {} tris, area {}",
            cube.triangle_count, cube.surface_area
        ),
    )?;

    let train = margin_dataset(500, 1.0, 0.1, 42);
    let test = margin_dataset(200, 1.0, 0.1, 4242);
    let params = ForestParams::default();
    let f = train_forest(&train, &params, 1).map_err(|e| e.to_string())?;
    let holdout = f.accuracy(&test).map_err(|e| e.to_string())?;
    ensure(holdout >= 0.90, format!("holdout accuracy {holdout}"))?;
    let g = train_forest(&train, &params, 1).map_err(|e| e.to_string())?;
    ensure(f == g, "training is not deterministic")?;

    Ok(format!(
        "20480 -> {} tris in {iters} iterations, error {:.2}% of diagonal; cube exact; holdout {holdout:.3}",
        out.triangle_count(),
        100.0 * qe / diag
    ))
}

fn spawn_server(data: &Path) -> (Child, SocketAddr) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_twin"))
        .args([
            "serve",
            "--data",
            data.to_str().unwrap(),
            "--port",
            "0",
            "--manual-ticks",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("server binary runs");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .trim_start_matches("listening on ")
        .parse()
        .expect("listen banner");
    (child, addr)
}

async fn ack_order(data: &Path) -> Result<(), String> {
    let client = Client::new(common::start(data, TickMode::Manual, None).await);
    let mut ids = Vec::new();
    for _ in 0..10 {
        ids.push(client.fixture_session().await);
    }
    let mut tasks = Vec::new();
    for (k, id) in ids.iter().enumerate() {
        for i in 0..100 {
            let http = client.http.clone();
            let url = format!("{}/sessions/{id}/events", client.base);
            let event = InteractionEvent::Place {
                instance: "speedo1".into(),
                position: [-0.4 + i as f64 * 0.005, 0.9, 0.1],
            };
            tasks.push(tokio::spawn(async move {
                let r = http
                    .post(url)
                    .json(&json!({ "event": event }))
                    .send()
                    .await
                    .unwrap();
                let ack: serde_json::Value = r.json().await.unwrap();
                (k, ack["ordinal"].as_u64(), event)
            }));
        }
    }
    let mut acked: BTreeMap<usize, Vec<(u64, InteractionEvent)>> = BTreeMap::new();
    for t in tasks {
        let (k, ordinal, event) = t.await.map_err(|e| e.to_string())?;
        let ordinal = ordinal.ok_or("event was not acknowledged")?;
        acked.entry(k).or_default().push((ordinal, event));
    }
    for (k, id) in ids.iter().enumerate() {
        let mut mine = acked.remove(&k).unwrap_or_default();
        mine.sort_by_key(|(o, _)| *o);
        let logged: Vec<(u64, InteractionEvent)> =
            twin::log::read_log(&data.join("sessions").join(id).join("log.jsonl"))
                .map_err(|e| e.to_string())?
                .into_iter()
                .filter_map(|r| match r {
                    LogRecord::Event { ordinal, event, .. } => Some((ordinal, event)),
                    LogRecord::Tick { .. } => None,
                })
                .collect();
        ensure(
            mine.len() == 100,
            format!("session {k}: {} acks", mine.len()),
        )?;
        ensure(
            logged == mine,
            format!("session {k}: log order differs from ack order"),
        )?;
    }
    Ok(())
}

async fn crash_recovery(data: &Path) -> Result<usize, String> {
    let (mut child, addr) = spawn_server(data);
    let mut client = Client::new(addr);
    let id = client.fixture_session().await;
    let mut mirror = SessionState::load(support::fixture()).map_err(|e| e.to_string())?;
    let mut tick = 0;
    let mut kills = 0;
    let mut result = Ok(());
    for r in common::golden_records() {
        let LogRecord::Event {
            tick: at, event, ..
        } = r
        else {
            continue;
        };
        if at > tick {
            client
                .post(
                    &format!("/sessions/{id}/ticks"),
                    json!({ "count": at - tick }),
                )
                .await;
            for _ in tick..at {
                mirror.tick().map_err(|e| e.to_string())?;
            }
            tick = at;
        }
        let (status, _) = client
            .post(&format!("/sessions/{id}/events"), json!({ "event": event }))
            .await;
        if status != 200 {
            result = Err(format!("event refused with {status}"));
            break;
        }
        mirror.apply_event(event).map_err(|e| e.to_string())?;
        let _ = child.kill();
        let _ = child.wait();
        kills += 1;
        let (c, a) = spawn_server(data);
        child = c;
        client = Client::new(a);
        let (_, mut got) = client.get(&format!("/sessions/{id}/results")).await;
        if let Some(o) = got.as_object_mut() {
            o.remove("session_id");
            o.remove("status");
        }
        let want = serde_json::to_value(ResultsSummary::of(&mirror)).unwrap();
        if got != want {
            result = Err(format!("results differ after kill {kills}"));
            break;
        }
    }
    let _ = child.kill();
    let _ = child.wait();
    result.map(|()| kills)
}

async fn observer_frames(data: &Path) -> Result<usize, String> {
    let client = Client::new(common::start(data, TickMode::Turbo, Some(1500)).await);
    let id = client.fixture_session().await;
    let url = format!(
        "{}/sessions/{id}/stream?role=observer",
        client.base.replace("http", "ws")
    );
    let mut streams = Vec::new();
    for _ in 0..3 {
        streams.push(
            tokio_tungstenite::connect_async(url.as_str())
                .await
                .map_err(|e| e.to_string())?
                .0,
        );
    }
    let mut counts = Vec::new();
    for ws in &mut streams {
        let mut start = None;
        let mut ticks = Vec::new();
        while let Some(Ok(msg)) = ws.next().await {
            let Message::Text(t) = msg else { continue };
            match serde_json::from_str::<StreamMessage>(t.as_str()).map_err(|e| e.to_string())? {
                StreamMessage::Snapshot { snapshot, .. } => start = Some(snapshot.tick_index),
                StreamMessage::Frame { frame } => ticks.push(frame.tick_index),
                StreamMessage::Status { .. } => break,
                _ => {}
            }
        }
        let start = start.ok_or("no snapshot")?;
        let want: Vec<u64> = (start + 1..=1500).collect();
        ensure(
            ticks == want,
            format!(
                "observer saw {} frames, expected {}",
                ticks.len(),
                want.len()
            ),
        )?;
        counts.push(ticks.len());
    }
    Ok(counts.into_iter().min().unwrap_or(0))
}

fn service() -> Check {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let c = tempfile::tempdir().map_err(|e| e.to_string())?;
        ack_order(a.path()).await?;
        let kills = crash_recovery(b.path()).await?;
        let frames = observer_frames(c.path()).await?;
        Ok(format!(
            "10x100 events logged in ack order; {kills} SIGKILL restarts with identical results; \
             3 observers got every frame in order (>= {frames} each)"
        ))
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("end-to-end case study", case_study),
        ("serialization round trip", serialization),
        ("expression oracle", expression_oracle),
        ("process semantics", process_semantics),
        ("determinism and replay", determinism),
        ("geometry pipeline", geometry),
        ("session service", service),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.2} s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({secs:.2} s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
