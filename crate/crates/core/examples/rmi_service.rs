//! Serve the api-v1 interface over HTTP with the bundled precedents loaded.
//!
//! Usage: `cargo run --example rmi_service [listen-addr] [state-dir]`.
//! Then, for example:
//!
//! ```text
//! curl -X POST localhost:8080/cases --data-binary @query.json
//! curl -X POST localhost:8080/cases/appeal-d2/evidence -d '{"evidence_items":[...]}'
//! curl localhost:8080/cases/appeal-d2
//! ```
//!
//! With `--demo` the example drives one session in-process and exits.

use std::sync::Arc;

use eafd::fixtures::{d2_precedents, d2_query, d2_stages};
use eafd::graph::Verdict;
use eafd::kb::{KnowledgeBase, DEFAULT_DIMENSION};
use eafd::service::{api, Service};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let demo = args.iter().any(|a| a == "--demo");
    let positional: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    let service = match positional.get(1) {
        Some(dir) => Service::open(std::path::Path::new(dir), Some(DEFAULT_DIMENSION))?,
        None => Service::in_memory(Arc::new(KnowledgeBase::in_memory(DEFAULT_DIMENSION))),
    };
    if service.pipeline.kb.is_empty() {
        for r in d2_precedents() {
            service.pipeline.ingest(&r)?;
        }
    }

    if demo {
        let view = service.submit_case(d2_query().to_json().as_bytes())?;
        println!("submitted: {} {:?}", view.state.as_str(), view.verdict);
        for stage in d2_stages().into_iter().skip(1) {
            let view = service.respond_rmi("appeal-d2", stage)?;
            let asks: Vec<&str> = view.recommendations.iter().map(|r| r.request_text.as_str()).collect();
            println!("responded: {} {:?} {asks:?}", view.state.as_str(), view.verdict);
        }
        service.close("appeal-d2", Some(Verdict::Approve))?;
        print!("{}", service.metrics().to_text());
        return Ok(());
    }

    let listen = positional.first().map_or("127.0.0.1:8080", |s| s.as_str());
    println!("listening on http://{listen}/ (console at /console/)");
    tokio::runtime::Runtime::new()?.block_on(api::serve(Arc::new(service), listen))?;
    Ok(())
}
