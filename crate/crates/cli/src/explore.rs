//! Local HTTP server behind the interactive explorer.
//!
//! `POST /run` takes a JSON object of settings layered over the startup
//! configuration and answers with the same report `detect` writes.
//! `GET /plotdata/<series>` serves CSV plot data from the latest run;
//! `curve` is the sorted k-NN distance curve used to pick the DBSCAN radius.
//! Requests are handled one at a time, in arrival order.

use panel_outliers::pipeline::{curve_csv, load_ratios};
use panel_outliers::report::{plot_series, to_json};
use panel_outliers::{run_curve, run_detect, Report};
use tiny_http::{Header, Method, Request, Response, Server};

use crate::settings::Settings;
use crate::Failure;

const INDEX: &str = "<!doctype html>
<title>panel-outliers</title>
<h1>panel-outliers</h1>
<p>POST /run with a JSON object of settings (for example {\"C\": 5, \"method\": \"hb\"}).</p>
<p>GET /plotdata/&lt;series&gt; for CSV plot data of the latest run; GET /plotdata/curve for the sorted k-NN distances.</p>
";

struct State {
    base: Settings,
    last: Option<(Settings, Report)>,
}

type Reply = (u16, &'static str, Vec<u8>);

fn error_reply(f: Failure) -> Reply {
    let status = if f.code == 2 { 400 } else { 422 };
    (status, "application/json", to_json(&serde_json::json!({ "error": f.message })))
}

impl State {
    fn run(&mut self, body: &str) -> Result<Reply, Failure> {
        let mut s = self.base.clone();
        if !body.trim().is_empty() {
            let fragment: serde_json::Value = serde_json::from_str(body)
                .map_err(|e| Failure::config(format!("request body is not JSON: {e}")))?;
            s.apply_json(&fragment)?;
        }
        s.run.validate()?;
        let ratios = load_ratios(&s.run)?;
        let report = run_detect(&s.run, &ratios)?;
        let bytes = to_json(&report);
        self.last = Some((s, report));
        Ok((200, "application/json", bytes))
    }

    fn plotdata(&mut self, series: &str) -> Result<Reply, Failure> {
        if self.last.is_none() {
            self.run("")?;
        }
        let (s, report) = self.last.as_ref().expect("a run just completed");
        if series == "curve" {
            let ratios = load_ratios(&s.run)?;
            let (k, points) = run_curve(&s.run, &ratios)?;
            return Ok((200, "text/csv", curve_csv(k, &points).into_bytes()));
        }
        match plot_series(report).into_iter().find(|p| p.name == series) {
            Some(p) => Ok((200, "text/csv", p.csv.into_bytes())),
            None => Ok((404, "text/plain", format!("no plot series `{series}`\n").into_bytes())),
        }
    }

    fn handle(&mut self, request: &mut Request) -> Reply {
        let url = request.url().split('?').next().unwrap_or("").to_string();
        let outcome = match (request.method(), url.as_str()) {
            (Method::Get, "/") => Ok((200, "text/html; charset=utf-8", INDEX.as_bytes().to_vec())),
            (Method::Post, "/run") => {
                let mut body = String::new();
                match request.as_reader().read_to_string(&mut body) {
                    Ok(_) => self.run(&body),
                    Err(e) => Err(Failure::config(format!("cannot read request body: {e}"))),
                }
            }
            (Method::Get, path) if path.starts_with("/plotdata/") => {
                self.plotdata(&path["/plotdata/".len()..])
            }
            _ => Ok((404, "text/plain", b"not found\n".to_vec())),
        };
        outcome.unwrap_or_else(error_reply)
    }
}

pub fn serve(base: Settings, addr: &str) -> Result<(), Failure> {
    let server = Server::http(addr).map_err(|e| Failure::config(format!("cannot listen on {addr}: {e}")))?;
    match server.server_addr().to_ip() {
        Some(bound) => eprintln!("listening on http://{bound}"),
        None => eprintln!("listening on {addr}"),
    }
    let mut state = State { base, last: None };
    for mut request in server.incoming_requests() {
        let (status, content_type, body) = state.handle(&mut request);
        let header = Header::from_bytes("Content-Type", content_type).expect("static header is valid");
        let response = Response::from_data(body).with_status_code(status).with_header(header);
        if let Err(e) = request.respond(response) {
            eprintln!("warning: failed to send response: {e}");
        }
    }
    Ok(())
}
