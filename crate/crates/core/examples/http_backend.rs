//! Talk to a JSON completion endpoint. A tiny in-process server stands in
//! for the real model so the example is self-contained; point
//! `HttpConfig::new` at a real endpoint to use a hosted model.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use genqr::llm::{HttpBackend, HttpConfig};
use genqr::{
    genqr_ensemble, Analyzer, Generator, InstructionSet, ReformulationConfig, ResponseCache, Topic,
};
use serde_json::{json, Value};

/// Serves `n` requests, answering each with keywords derived from the prompt.
/// The first request fails with 503 to show the retry path.
fn serve(listener: TcpListener, n: usize) {
    for i in 0..n {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line.trim().is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let request: Value = serde_json::from_slice(&body).unwrap();
        let prompt = request["prompt"].as_str().unwrap_or_default();
        let (status, reply) = if i == 0 {
            (503, json!({"error": "warming up"}))
        } else {
            let words = prompt.split_whitespace().count();
            (
                200,
                json!({"choices": [{"text": format!("koi carp pond{}", " aquarium".repeat(words % 3))}]}),
            )
        };
        let reply = reply.to_string();
        let mut stream = reader.into_inner();
        write!(
            stream,
            "HTTP/1.1 {status} OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = format!("http://{}/v1/completions", listener.local_addr()?);
    let server = thread::spawn(move || serve(listener, 4));

    let mut http = HttpConfig::new(endpoint, "flan-t5-xxl");
    http.backoff_ms = 10;
    let cache_dir = tempfile::tempdir()?;
    let generator = Generator::new(Arc::new(HttpBackend::new(http)))
        .with_cache(ResponseCache::open(cache_dir.path())?)
        .with_max_in_flight(1);

    let topic = Topic::new("1", "goldfish grow");
    let config = ReformulationConfig {
        n: Some(3),
        ..Default::default()
    };
    let instructions = InstructionSet::bundled();
    let r = genqr_ensemble(
        &generator,
        &instructions,
        &topic,
        &config,
        &Analyzer::default(),
    )?;
    println!("keywords: {:?}", r.keywords);
    println!("fused:    {:?}", r.fused.terms);
    server.join().unwrap();

    // The server is gone; the same request is answered from the cache.
    let again = genqr_ensemble(
        &generator,
        &instructions,
        &topic,
        &config,
        &Analyzer::default(),
    )?;
    assert_eq!(again.fused, r.fused);
    println!(
        "backend calls: {}, cache hits: {}",
        generator.backend_calls(),
        generator.cache().unwrap().hits()
    );
    Ok(())
}
