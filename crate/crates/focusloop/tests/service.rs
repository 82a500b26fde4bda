mod common;

use std::sync::{mpsc, Arc};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use focusloop::bench::benchmark_latency;
use focusloop::ingestion::queue::BoundedQueue;
use focusloop::ingestion::{Paced, VecSource};
use focusloop::service::{
    router, run_live, run_source, to_json_line, AppState, RatingStore, RunningService, ServeOptions, OUTBOX_CAPACITY,
};
use focusloop::workflow::{train_svm_workflow, SvmWorkflowConfig};
use focusloop_core::fnn::{FeedforwardNet, FnnHyper};
use focusloop_core::tick::{plane_update, PlaneState, StateMessage, TickEngine, TrainedModel};
use focusloop_core::{ChannelSet, StateLabel, WindowBuffer, WINDOW_LEN};
use futures_util::StreamExt;
use tokio::sync::broadcast;
use tower::ServiceExt;

fn svm_engine() -> TickEngine {
    let (_, trials) = common::protocol_session(3.0, 7);
    let cfg = SvmWorkflowConfig {
        seed: 7,
        ..SvmWorkflowConfig::default()
    };
    let model = TrainedModel::Svm(train_svm_workflow(&trials, &cfg).unwrap().model);
    TickEngine::new(model, WindowBuffer::new(2, WINDOW_LEN), PlaneState::default()).unwrap()
}

fn fnn_engine() -> TickEngine {
    let model = TrainedModel::Fnn(FeedforwardNet::init(10, FnnHyper::default()));
    TickEngine::new(model, WindowBuffer::new(2, WINDOW_LEN), PlaneState::default()).unwrap()
}

fn offline(samples: &[focusloop::ingestion::LabeledSample]) -> Vec<StateMessage> {
    let mut engine = svm_engine();
    let mut src = Paced::new(VecSource::new(ChannelSet::gamma_pair(), samples.to_vec()), 0.0).unwrap();
    let mut out = Vec::new();
    run_source(&mut engine, &mut src, |m| {
        out.push(m.clone());
        Ok(())
    })
    .unwrap();
    out
}

#[test]
fn plane_altitude_is_a_fold_of_labels() {
    let rec = common::free_session(3.0, 12, 30.0);
    let msgs = offline(&rec.labeled_samples());
    assert_eq!(msgs.len(), rec.len() - WINDOW_LEN + 1);
    let mut p = PlaneState::default();
    for m in &msgs {
        p = plane_update(p, m.label);
        assert_eq!(m.plane_y, p.y);
        assert!((0.0..=1.0).contains(&m.plane_y));
    }
    let line = to_json_line(&msgs[0]);
    // wire order
    let mut at = 0;
    for k in ["t_ms", "label", "score", "plane_y", "mode", "drop_count"] {
        at += line[at..].find(&format!("\"{}\"", k)).expect(k);
    }
    assert!(line.contains("\"mode\":\"svm\""));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_receives_every_frame_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let queue = BoundedQueue::new(64);
    let opts = ServeOptions {
        bind: ([127, 0, 0, 1], 0).into(),
        ratings_path: dir.path().join("ratings.csv"),
        dev_mode: false,
        stdout: false,
    };
    let svc = RunningService::start(opts, svm_engine(), queue.clone()).await.unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", svc.addr)).await.unwrap();

    let rec = common::free_session(3.0, 13, 2.0);
    assert_eq!(rec.len(), 20);
    for ls in rec.labeled_samples() {
        queue.push(ls);
    }
    let expected: Vec<String> = offline(&rec.labeled_samples()).iter().map(to_json_line).collect();
    assert!(expected.len() <= OUTBOX_CAPACITY);
    let mut got = Vec::new();
    while got.len() < expected.len() {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap();
        if let tokio_tungstenite::tungstenite::Message::Text(t) = msg {
            got.push(t.to_string());
        }
    }
    assert_eq!(got, expected);

    // stopping with the client still connected must not hang
    let n = tokio::time::timeout(Duration::from_secs(5), svc.stop()).await.unwrap().unwrap();
    assert_eq!(n, expected.len());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stalled_consumer_does_not_block_the_loop() {
    let dir = tempfile::tempdir().unwrap();
    let queue = BoundedQueue::new(4096);
    let opts = ServeOptions {
        bind: ([127, 0, 0, 1], 0).into(),
        ratings_path: dir.path().join("ratings.csv"),
        dev_mode: false,
        stdout: false,
    };
    let svc = RunningService::start(opts, fnn_engine(), queue.clone()).await.unwrap();
    // connected but never reads
    let (_ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", svc.addr)).await.unwrap();
    let rec = common::free_session(3.0, 14, 100.0);
    for ls in rec.labeled_samples() {
        queue.push(ls);
    }
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    while !queue.is_empty() && std::time::Instant::now() < deadline {
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let n = tokio::time::timeout(Duration::from_secs(5), svc.stop()).await.unwrap().unwrap();
    assert_eq!(n, rec.len() - WINDOW_LEN + 1);
}

fn state(dir: &tempfile::TempDir, manual: Option<mpsc::Sender<StateLabel>>) -> AppState {
    let (frames, _) = broadcast::channel(OUTBOX_CAPACITY);
    AppState {
        frames,
        ratings: Arc::new(RatingStore::new(dir.path().join("ratings.csv"))),
        manual,
    }
}

fn post(uri: &str, body: &str) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn ratings_are_stored_and_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir, None);
    let app = router(st.clone());
    let r = app
        .clone()
        .oneshot(post("/rating", r#"{"session_id":"s1","model":"svm","points":9}"#))
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let r = app
        .clone()
        .oneshot(post("/rating", r#"{"session_id":"s1","model":"fnn","points":6}"#))
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let r = app
        .clone()
        .oneshot(post("/rating", r#"{"session_id":"s1","model":"svm","points":8}"#))
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    for bad in [
        r#"{"session_id":"s1","model":"svm","points":11}"#,
        r#"{"session_id":"s1","model":"svm","points":0}"#,
        r#"{"session_id":"","model":"svm","points":5}"#,
    ] {
        let r = app.clone().oneshot(post("/rating", bad)).await.unwrap();
        assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY, "{}", bad);
    }

    let rows = st.ratings.rows().unwrap();
    assert_eq!(rows.len(), 2);
    let svm = rows.iter().find(|r| r.model == focusloop_core::tick::Mode::Svm).unwrap();
    assert_eq!((svm.session_id.as_str(), svm.points), ("s1", 8));
    let text = std::fs::read_to_string(dir.path().join("ratings.csv")).unwrap();
    assert!(text.starts_with("session_id,model,points,utc\n"), "{}", text);
}

#[tokio::test]
async fn manual_endpoint_needs_dev_mode() {
    let dir = tempfile::tempdir().unwrap();
    let r = router(state(&dir, None)).oneshot(post("/manual", r#"{"label":1}"#)).await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn manual_labels_drive_the_plane() {
    let dir = tempfile::tempdir().unwrap();
    let (tx, rx) = mpsc::channel();
    let app = router(state(&dir, Some(tx)));
    let queue = BoundedQueue::new(8);
    let (out_tx, out_rx) = mpsc::channel();
    let loop_queue = queue.clone();
    let handle = std::thread::spawn(move || {
        run_live(fnn_engine(), loop_queue, rx, |m| {
            out_tx.send(m.clone()).unwrap();
            Ok(())
        })
    });
    for _ in 0..10 {
        let r = app.clone().oneshot(post("/manual", r#"{"label":1}"#)).await.unwrap();
        assert_eq!(r.status(), StatusCode::ACCEPTED);
    }
    let bad = app.clone().oneshot(post("/manual", r#"{"label":0}"#)).await.unwrap();
    assert!(bad.status().is_client_error());

    let msgs: Vec<StateMessage> = (0..10).map(|_| out_rx.recv_timeout(Duration::from_secs(5)).unwrap()).collect();
    queue.close();
    assert_eq!(handle.join().unwrap().unwrap(), 10);
    assert!(msgs.iter().all(|m| m.label == StateLabel::Concentration));
    assert!((msgs[9].plane_y - 0.70).abs() < 1e-12, "{}", msgs[9].plane_y);
}

#[test]
fn benchmark_counts_every_tick_for_both_modes() {
    let samples = common::free_session(3.0, 15, 30.0).samples;
    let svm = svm_engine().model().clone();
    let fnn = fnn_engine().model().clone();
    let a = benchmark_latency(&svm, &samples, WINDOW_LEN, 250).unwrap();
    let b = benchmark_latency(&fnn, &samples, WINDOW_LEN, 250).unwrap();
    assert_eq!((a.ticks, b.ticks), (250, 250));
    for s in [a, b] {
        assert!(s.p50_ms <= s.p99_ms && s.p99_ms <= s.max_ms);
        assert!(s.mean_ms > 0.0);
    }
    assert!(benchmark_latency(&svm, &samples[..100], WINDOW_LEN, 97).is_err());
    assert_eq!(benchmark_latency(&svm, &samples[..100], WINDOW_LEN, 96).unwrap().ticks, 96);
}
