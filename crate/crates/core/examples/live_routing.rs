//! Route requests to an OpenAI-compatible chat endpoint. Without an argument
//! a tiny local echo server stands in for the real thing.
//!
//!     cargo run --example live_routing
//!     cargo run --example live_routing -- http://localhost:8000/v1

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

use mess_plus::harness::{run_policy_with, Policy, RunSpec};
use mess_plus::metrics::{render_report, Scorer};
use mess_plus::zoo::{
    EndpointConfig, LiveBackend, LiveConfig, LiveModel, ModelProfile, TraceRecord,
};
use mess_plus::{ControllerConfig, PredictorSettings};

/// Echoes the prompt back; the "large" model gets it right, the small one
/// drops the last word.
fn spawn_echo_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let mut reader = BufReader::new(&stream);
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; len];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
            let prompt = req["messages"][0]["content"]
                .as_str()
                .unwrap_or("")
                .to_string();
            let reply = if req["model"] == "small" {
                prompt
                    .rsplit_once(' ')
                    .map(|p| p.0.to_string())
                    .unwrap_or_default()
            } else {
                prompt
            };
            let out = serde_json::json!({"choices": [{"message": {"content": reply}}]}).to_string();
            let _ = write!(
                &stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{out}",
                out.len()
            );
        }
    });
    url
}

fn model(rank: usize, name: &str, base: f64, per_token: f64) -> LiveModel {
    LiveModel {
        profile: ModelProfile {
            name: name.into(),
            size_rank: rank,
            energy_base: base,
            energy_per_input_token: per_token,
            energy_per_output_token: per_token,
        },
        remote_name: None,
        expected_output_tokens: 8,
        endpoint: None,
    }
}

fn main() -> mess_plus::Result<()> {
    let url = std::env::args().nth(1).unwrap_or_else(spawn_echo_server);
    let backend = LiveBackend::new(LiveConfig {
        endpoint: EndpointConfig {
            base_url: url,
            ..Default::default()
        },
        models: vec![model(0, "small", 2.0, 0.5), model(1, "large", 20.0, 5.0)],
        scorer: Scorer::Bleu1,
        concurrent: true,
    })?;
    let trace: Vec<TraceRecord> = (0..60)
        .map(|i| {
            let s = format!("request {i} asks for a short faithful echo of words");
            TraceRecord::request(format!("req-{i}"), s.clone(), Some(s))
        })
        .collect();
    let spec = RunSpec {
        policy: Policy::MessPlus,
        controller: ControllerConfig {
            alpha: 0.9,
            v: 0.01,
            ..Default::default()
        },
        predictor: PredictorSettings {
            dim: 1 << 12,
            ..Default::default()
        },
        sla_alpha: 0.9,
    };
    let out = run_policy_with(&spec, &trace, &backend, None)?;
    println!("{}", render_report(&out.report));
    Ok(())
}
