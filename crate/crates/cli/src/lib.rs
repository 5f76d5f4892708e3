//! Session host: option parsing, the control loop, the REPL and the
//! HTTP/WebSocket API.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Parser;
use serde::Deserialize;
use tokio::sync::broadcast;
use tower_http::services::ServeDir;

use instructa::command::{execute, Response};
use instructa::{KnowledgeGraph, Scene, Session, StreamMessage};

#[derive(Debug, Clone, Parser)]
#[command(name = "instructa", version, about = "Program a simulated manipulator with textual commands")]
pub struct Options {
    /// Scene file (TOML). Defaults to the built-in two-row layout.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Serve the HTTP/WebSocket API on this port.
    #[arg(long)]
    pub port: Option<u16>,
    /// Do not serve the browser console.
    #[arg(long)]
    pub headless: bool,
    /// Write the knowledge graph here on exit.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Start from a saved knowledge graph.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Run the controller as fast as possible. The REPL then waits for each
    /// command's tasks to finish before reading the next line.
    #[arg(long)]
    pub no_pacing: bool,
    /// Directory holding the built console.
    #[arg(long, default_value = "console/dist")]
    pub console_dir: PathBuf,
}

pub fn load_session(opts: &Options) -> anyhow::Result<Session> {
    let scene = match &opts.scene {
        Some(path) => Scene::from_path(path).with_context(|| format!("scene {}", path.display()))?,
        None => Scene::default(),
    };
    let kg = match &opts.load {
        Some(path) => Some(KnowledgeGraph::restore(path).with_context(|| format!("graph {}", path.display()))?),
        None => None,
    };
    let epoch = chrono::Utc::now().timestamp_millis();
    Ok(Session::new(scene, kg, epoch)?)
}

pub fn write_snapshot(session: &Session, path: &Path) -> anyhow::Result<()> {
    session
        .kg()
        .snapshot(path)
        .with_context(|| format!("snapshot {}", path.display()))
}

/// Session shared by the control loop, the REPL and request handlers.
#[derive(Clone)]
pub struct AppState {
    session: Arc<Mutex<Session>>,
    stream: broadcast::Sender<String>,
}

impl AppState {
    pub fn new(mut session: Session) -> Self {
        session.enable_stream();
        let (stream, _) = broadcast::channel(1024);
        Self {
            session: Arc::new(Mutex::new(session)),
            stream,
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<String> {
        self.stream.subscribe()
    }

    fn publish(&self, messages: Vec<StreamMessage>) {
        for msg in messages {
            if let Ok(text) = serde_json::to_string(&msg) {
                // no subscribers is fine
                let _ = self.stream.send(text);
            }
        }
    }

    /// Runs one command and forwards whatever it streamed.
    pub fn command(&self, text: &str) -> Response {
        let (response, messages) = {
            let mut s = self.lock();
            let r = Response::from(execute(text, &mut s));
            (r, s.take_stream())
        };
        self.publish(messages);
        response
    }

    /// One control period.
    pub fn cycle(&self) -> anyhow::Result<()> {
        let messages = {
            let mut s = self.lock();
            s.run_cycle()?;
            s.take_stream()
        };
        self.publish(messages);
        Ok(())
    }

    /// Cycles until nothing is queued, bounded by `max_cycles`.
    pub fn settle(&self, max_cycles: usize) -> anyhow::Result<bool> {
        for _ in 0..max_cycles {
            if self.lock().is_idle() {
                return Ok(true);
            }
            self.cycle()?;
        }
        Ok(self.lock().is_idle())
    }

    pub fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(self.lock().executor().period())
    }
}

/// One cycle per `period` of wall time; pass the tick period for real time.
pub async fn control_loop(state: AppState, period: Duration) -> anyhow::Result<()> {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        interval.tick().await;
        state.cycle()?;
    }
}

const SETTLE_CYCLES: usize = 1_000_000;

/// Line-oriented command loop: results to `out`, errors to `err`. Without
/// pacing each command's tasks run to completion before the next line.
pub fn repl(state: &AppState, input: impl BufRead, mut out: impl Write, mut err: impl Write, paced: bool) -> anyhow::Result<()> {
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let reported = state.lock().outcomes().len();
        match state.command(text) {
            Response::EventId(id) => writeln!(out, "queued event {id}")?,
            Response::Result(v) => writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?,
            Response::Error(e) => {
                writeln!(err, "error: {}", e.message)?;
                if let Some(offset) = e.offset {
                    writeln!(err, "  {text}\n  {}^", " ".repeat(offset))?;
                }
                if !e.expected.is_empty() {
                    writeln!(err, "  expected one of: {}", e.expected.join(" "))?;
                }
                if !e.suggestions.is_empty() {
                    writeln!(err, "  did you mean: {}", e.suggestions.join(", "))?;
                }
            }
        }
        if !paced {
            state.settle(SETTLE_CYCLES)?;
            let s = state.lock();
            for o in &s.outcomes()[reported.min(s.outcomes().len())..] {
                match o.detail.as_str() {
                    "" => writeln!(out, "event {} {}", o.task_id, o.status.name())?,
                    d => writeln!(out, "event {} {}: {d}", o.task_id, o.status.name())?,
                }
            }
        }
        out.flush()?;
    }
    if !paced {
        state.settle(SETTLE_CYCLES)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct CommandBody {
    text: String,
}

#[derive(Deserialize)]
struct TasksQuery {
    n: Option<usize>,
}

fn respond(r: Response) -> HttpResponse {
    let status = match &r {
        Response::Error(e) if e.kind == "internal" => StatusCode::INTERNAL_SERVER_ERROR,
        Response::Error(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::OK,
    };
    (status, Json(r)).into_response()
}

async fn post_command(State(state): State<AppState>, Json(body): Json<CommandBody>) -> HttpResponse {
    respond(state.command(&body.text))
}

async fn get_tasks(State(state): State<AppState>, Query(q): Query<TasksQuery>) -> HttpResponse {
    respond(state.command(&format!("show_last_n_tasks({})", q.n.unwrap_or(10))))
}

async fn get_skills(State(state): State<AppState>) -> HttpResponse {
    respond(state.command("list_skills()"))
}

async fn get_world(State(state): State<AppState>) -> HttpResponse {
    let frame = state.lock().world().frame();
    Json(frame).into_response()
}

async fn get_graph(State(state): State<AppState>) -> HttpResponse {
    let doc = state.lock().kg().to_document();
    ([(header::CONTENT_TYPE, "application/json")], doc).into_response()
}

async fn stream(State(state): State<AppState>, ws: WebSocketUpgrade) -> HttpResponse {
    ws.on_upgrade(move |socket| forward(state, socket))
}

async fn forward(state: AppState, mut socket: WebSocket) {
    let mut rx = state.subscribe();
    let hello = serde_json::to_string(&StreamMessage::World(state.lock().world().frame()));
    if let Ok(text) = hello {
        if socket.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// API routes, plus the console's static files when a directory is given.
pub fn router(state: AppState, console: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/command", post(post_command))
        .route("/api/tasks", get(get_tasks))
        .route("/api/skills", get(get_skills))
        .route("/api/world", get(get_world))
        .route("/api/graph", get(get_graph))
        .route("/api/stream", get(stream))
        .with_state(state);
    match console {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: AppState, addr: SocketAddr, console: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("bind {addr}"))?;
    serve_on(listener, state, console).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState, console: Option<PathBuf>) -> anyhow::Result<()> {
    axum::serve(listener, router(state, console.as_deref())).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> AppState {
        AppState::new(Session::new(Scene::default(), None, 0).unwrap())
    }

    fn run(state: &AppState, script: &str) -> (String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        repl(state, script.as_bytes(), &mut out, &mut err, false).unwrap();
        (String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unpaced_repl_reports_each_outcome() {
        let s = state();
        let (out, err) = run(&s, "move_hand(translation=[0,0,5])\n\n# comment\nlocate('purple')\n");
        assert!(err.is_empty(), "{err}");
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines.len(), 4, "{out}");
        assert!(lines[1].ends_with("Succeeded"));
        assert!(lines[3].contains("Failed"));
        assert!(s.lock().is_idle());
    }

    #[test]
    fn errors_go_to_stderr_with_caret() {
        let (out, err) = run(&state(), "move_hand(translation=[0,0,5]\n");
        assert!(out.is_empty());
        assert!(err.contains("error:"));
        assert!(err.lines().any(|l| l.trim_end().ends_with('^')), "{err}");
    }

    #[test]
    fn paced_repl_only_queues() {
        let s = state();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        repl(&s, "move_hand(translation=[0,0,5])\n".as_bytes(), &mut out, &mut err, true).unwrap();
        assert_eq!(s.lock().pending().len(), 1);
    }
}
