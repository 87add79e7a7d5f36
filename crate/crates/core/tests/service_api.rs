//! api-v1 over HTTP, session persistence and per-case serialization.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use eafd::eval::MetricsReport;
use eafd::fixtures::{d2_precedents, d2_query, d2_record, d2_stages};
use eafd::graph::{from_canonical_text, CaseId, Verdict};
use eafd::ingest::{CaseRecord, EvidenceItem};
use eafd::kb::{KnowledgeBase, DEFAULT_DIMENSION};
use eafd::reasoner::Trace;
use eafd::service::{api, Service, ServiceError, SessionState};

fn service() -> Service {
    let svc = Service::in_memory(Arc::new(KnowledgeBase::in_memory(DEFAULT_DIMENSION)));
    for r in d2_precedents() {
        svc.pipeline.ingest(&r).unwrap();
    }
    svc
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn evidence_body(items: &[EvidenceItem]) -> String {
    json!({ "evidence_items": items }).to_string()
}

fn rec_keys(v: &Value) -> Vec<String> {
    let mut keys: Vec<String> =
        v["recommendations"].as_array().unwrap().iter().map(|r| r["canonical_key"].as_str().unwrap().to_string()).collect();
    keys.sort();
    keys
}

#[tokio::test]
async fn rmi_loop_over_http() {
    let app = api::router(Arc::new(service()));
    let (status, v) = call(&app, Method::POST, "/cases", Some(d2_query().to_json())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["format"], "api-v1");
    assert_eq!(v["state"], "awaiting_info");
    assert_eq!(v["verdict"], "rmi");
    assert_eq!(rec_keys(&v), ["contact_supplier", "review_inventory_records"]);
    assert_eq!(v["outcome_history"].as_array().unwrap().len(), 1);
    let graph = from_canonical_text(v["graph"].as_str().unwrap()).unwrap();
    assert_eq!(graph.evidence().count(), 2);
    let trace: Trace = serde_json::from_value(v["trace"].clone()).unwrap();
    assert_eq!(trace.format, "trace-v1");

    let (status, v) = call(&app, Method::GET, "/cases/appeal-d2/recommendations", None).await;
    assert_eq!(status, StatusCode::OK);
    let texts: Vec<&str> = v["recommendations"].as_array().unwrap().iter().map(|r| r["request_text"].as_str().unwrap()).collect();
    assert!(texts.iter().any(|t| t.contains("Harvest Lane Foods")), "{texts:?}");

    // Irrelevant evidence changes nothing.
    let noise = vec![EvidenceItem {
        id: "n1".into(),
        source_type: eafd::graph::SourceType::SellerStatement,
        content: "Seller thanks the reviewer".into(),
        source_ref: "appeal-d2/n1".into(),
    }];
    let (status, v) = call(&app, Method::POST, "/cases/appeal-d2/evidence", Some(evidence_body(&noise))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["verdict"], "rmi");
    assert_eq!(rec_keys(&v), ["contact_supplier", "review_inventory_records"]);

    let mut verdicts = Vec::new();
    for stage in &d2_stages()[1..] {
        let (status, v) = call(&app, Method::POST, "/cases/appeal-d2/evidence", Some(evidence_body(stage))).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        verdicts.push(v["verdict"].as_str().unwrap().to_string());
    }
    assert_eq!(verdicts, ["rmi", "rmi", "approve"]);

    let (status, v) = call(&app, Method::GET, "/cases/appeal-d2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["state"], "adjudicated");
    let history: Vec<&str> = v["outcome_history"].as_array().unwrap().iter().map(|h| h["verdict"].as_str().unwrap()).collect();
    assert_eq!(history, ["rmi", "rmi", "rmi", "rmi", "approve"]);

    // No further evidence once adjudicated.
    let (status, v) = call(&app, Method::POST, "/cases/appeal-d2/evidence", Some(evidence_body(&noise))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "wrong_state");

    let (status, v) = call(&app, Method::GET, "/cases", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["sessions"][0]["case_id"], "appeal-d2");
    assert_eq!(v["sessions"][0]["outcomes"], 5);
}

#[tokio::test]
async fn error_statuses() {
    let app = api::router(Arc::new(service()));
    let (status, v) = call(&app, Method::POST, "/cases", Some("{not json".into())).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("malformed")));

    let (status, _) = call(&app, Method::POST, "/cases", Some(d2_record().to_json())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "historical records are not queries");

    let (status, v) = call(&app, Method::GET, "/cases/nope", None).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_case")));
    let (status, _) = call(&app, Method::POST, "/cases/nope/evidence", Some(evidence_body(&[]))).await;
    assert!(status == StatusCode::NOT_FOUND || status == StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, Method::POST, "/cases", Some(d2_query().to_json())).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, v) = call(&app, Method::POST, "/cases", Some(d2_query().to_json())).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::CONFLICT, Some("duplicate_case")));

    // e1 is already part of the case file.
    let dup = vec![d2_stages()[0][0].clone()];
    let (status, v) = call(&app, Method::POST, "/cases/appeal-d2/evidence", Some(evidence_body(&dup))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::CONFLICT, Some("duplicate_evidence_id")));

    let (status, _) = call(&app, Method::POST, "/cases/appeal-d2/evidence", Some("{}".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pipeline_failures_name_their_stage() {
    // An empty knowledge base cannot supply precedents; it is reported as
    // rmi with no applicable precedent, not as a failure.
    let svc = Service::in_memory(Arc::new(KnowledgeBase::in_memory(DEFAULT_DIMENSION)));
    let app = api::router(Arc::new(svc));
    let (status, v) = call(&app, Method::POST, "/cases", Some(d2_query().to_json())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["verdict"], "rmi");
    assert_eq!(v["outcome_history"][0]["no_applicable_precedent"], true);

    // A Maker record whose annotations do not parse fails at graph building.
    let mut bad = d2_query();
    bad.case_id = CaseId::new("broken").unwrap();
    bad.maker_record.analysis = "ACTION[ => FACTOR[".into();
    let (status, v) = call(&app, Method::POST, "/cases", Some(bad.to_json())).await;
    assert!(status == StatusCode::BAD_REQUEST || status == StatusCode::INTERNAL_SERVER_ERROR, "{status} {v}");
    if status == StatusCode::INTERNAL_SERVER_ERROR {
        assert!(v["stage"].is_string());
    }
}

#[test]
fn pipeline_error_maps_to_500_with_stage() {
    use eafd::reasoner::{PipelineCause, PipelineError, ReasonError, Stage};
    let e = ServiceError::Pipeline(PipelineError {
        stage: Stage::Deduce,
        cause: PipelineCause::Reason(ReasonError::EmptyCheckerLane(CaseId::new("x").unwrap())),
    });
    assert_eq!(e.status(), 500);
    assert_eq!(e.stage(), Some(Stage::Deduce));
    assert!(e.to_string().contains("deduce"), "{e}");
}

#[tokio::test]
async fn knowledge_base_and_metrics_endpoints() {
    let app = api::router(Arc::new(service()));
    let (status, v) = call(&app, Method::GET, "/kb/stats", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["count"], 9);

    let (status, v) = call(&app, Method::POST, "/kb/cases", Some(d2_record().to_json())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["count"], 10);
    let (status, v) = call(&app, Method::POST, "/kb/cases", Some(d2_record().to_json())).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::CONFLICT, Some("duplicate_case")));
    let (status, _) = call(&app, Method::POST, "/kb/cases", Some(d2_query().to_json())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // A resolvable query: the full case file.
    let mut full = d2_record().to_query();
    full.case_id = CaseId::new("full-file").unwrap();
    let (status, v) = call(&app, Method::POST, "/cases", Some(full.to_json())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!((v["state"].as_str(), v["verdict"].as_str()), (Some("adjudicated"), Some("approve")));

    let (status, v) = call(&app, Method::POST, "/cases/full-file/close", Some(json!({"final_verdict": "approve"}).to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["state"], "closed");
    let (status, _) = call(&app, Method::POST, "/cases/full-file/close", None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, v) = call(&app, Method::GET, "/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    let report: MetricsReport = serde_json::from_value(v).unwrap();
    assert_eq!((report.total, report.accuracy), (1, 1.0));
    assert_eq!(report.cumulative_alignment, [1.0]);
}

#[tokio::test]
async fn console_static_files() {
    let app = api::router(Arc::new(service()));
    let (status, v) = call(&app, Method::GET, "/console/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v.as_str().unwrap().contains("reviewer console"));

    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("dist");
    std::fs::create_dir_all(assets.join("js")).unwrap();
    std::fs::write(assets.join("index.html"), "<html>built console</html>").unwrap();
    std::fs::write(assets.join("js/app.js"), "console.log(1)").unwrap();
    std::fs::write(dir.path().join("secret.txt"), "secret").unwrap();
    let app = api::router(Arc::new(service().with_console_dir(Some(assets))));
    let (status, v) = call(&app, Method::GET, "/console/", None).await;
    assert_eq!((status, v.as_str()), (StatusCode::OK, Some("<html>built console</html>")));
    let (status, _) = call(&app, Method::GET, "/console/js/app.js", None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, Method::GET, "/console/..%2Fsecret.txt", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/console/missing.js", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

fn open(dir: &std::path::Path) -> Service {
    let svc = Service::open(dir, Some(DEFAULT_DIMENSION)).unwrap();
    if svc.pipeline.kb.is_empty() {
        for r in d2_precedents() {
            svc.pipeline.ingest(&r).unwrap();
        }
    }
    svc
}

fn history(svc: &Service, id: &str) -> Vec<(Verdict, Vec<String>)> {
    svc.get_session(id)
        .unwrap()
        .outcome_history
        .iter()
        .map(|h| (h.verdict, h.recommendations.iter().map(|r| r.action.to_string()).collect()))
        .collect()
}

#[test]
fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let before = {
        let svc = open(dir.path());
        svc.submit_case(d2_query().to_json().as_bytes()).unwrap();
        svc.respond_rmi("appeal-d2", d2_stages()[1].clone()).unwrap();
        let mut other: CaseRecord = d2_query();
        other.case_id = CaseId::new("second case/with slash").unwrap();
        svc.submit_case(other.to_json().as_bytes()).unwrap();
        svc.close("second case/with slash", Some(Verdict::Reject)).unwrap();
        (svc.get_session("appeal-d2").unwrap(), history(&svc, "appeal-d2"))
    };
    let svc = open(dir.path());
    assert_eq!(svc.pipeline.kb.len(), 9);
    let after = svc.get_session("appeal-d2").unwrap();
    assert_eq!(history(&svc, "appeal-d2"), before.1);
    assert_eq!(after, before.0);
    assert_eq!(svc.get_session("second case/with slash").unwrap().state, SessionState::Closed);

    // The reloaded session keeps going.
    let view = svc.respond_rmi("appeal-d2", d2_stages()[2].clone()).unwrap();
    assert_eq!(view.outcome_history.len(), 3);
}

#[test]
fn torn_and_unmatched_tail_is_dropped() {
    use std::io::Write;
    let dir = tempfile::tempdir().unwrap();
    {
        let svc = open(dir.path());
        svc.submit_case(d2_query().to_json().as_bytes()).unwrap();
    }
    let log = dir.path().join("sessions/appeal-d2.jsonl");
    let committed = std::fs::read(&log).unwrap();
    // An evidence event whose re-adjudication never landed, then a torn line.
    let mut f = std::fs::OpenOptions::new().append(true).open(&log).unwrap();
    let items = serde_json::to_string(&d2_stages()[1]).unwrap();
    writeln!(f, "{{\"at\":1,\"event\":\"evidence\",\"items\":{items}}}").unwrap();
    write!(f, "{{\"at\":2,\"event\":\"adjud").unwrap();
    drop(f);

    let svc = open(dir.path());
    let s = svc.get_session("appeal-d2").unwrap();
    assert_eq!((s.state, s.outcome_history.len()), (SessionState::AwaitingInfo, 1));
    assert_eq!(std::fs::read(&log).unwrap(), committed);
    // The same evidence can be supplied again.
    assert_eq!(svc.respond_rmi("appeal-d2", d2_stages()[1].clone()).unwrap().outcome_history.len(), 2);
}

#[test]
fn corrupt_log_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("sessions")).unwrap();
    std::fs::write(dir.path().join("sessions/x.jsonl"), "{\"event\":\"closed\",\"at\":1}\n").unwrap();
    assert!(Service::open(dir.path(), Some(DEFAULT_DIMENSION)).is_err());
}

#[test]
fn concurrent_responses_are_serialized() {
    let svc = Arc::new(service());
    svc.submit_case(d2_query().to_json().as_bytes()).unwrap();
    let stages = d2_stages();
    let batches: Vec<Vec<EvidenceItem>> = stages[1..].to_vec();
    let results: Vec<Result<usize, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = batches
            .iter()
            .map(|b| {
                let svc = svc.clone();
                s.spawn(move || svc.respond_rmi("appeal-d2", b.clone()).map(|v| v.outcome_history.len()).map_err(|e| e.to_string()))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let ok: Vec<usize> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    // Every accepted response appended exactly one outcome, in some order.
    let mut lens = ok.clone();
    lens.sort();
    assert_eq!(lens, (2..2 + ok.len()).collect::<Vec<_>>());
    for r in results.iter().filter_map(|r| r.as_ref().err()) {
        assert!(r.contains("is adjudicated"), "{r}");
    }
    let s = svc.get_session("appeal-d2").unwrap();
    assert_eq!(s.outcome_history.len(), 1 + ok.len());
    let graph = from_canonical_text(&s.graph).unwrap();
    let expected = 2 + batches.iter().zip(&results).filter(|(_, r)| r.is_ok()).map(|(b, _)| b.len()).sum::<usize>();
    assert_eq!(graph.evidence().count(), expected);
}
