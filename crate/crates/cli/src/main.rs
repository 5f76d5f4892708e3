use std::io;
use std::net::SocketAddr;

use clap::Parser;

use instructa_cli::{control_loop, load_session, repl, serve, write_snapshot, AppState, Options};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let opts = Options::parse();
    let state = AppState::new(load_session(&opts)?);
    let paced = !opts.no_pacing;

    if let Some(port) = opts.port {
        let console = (!opts.headless && opts.console_dir.is_dir()).then(|| opts.console_dir.clone());
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        eprintln!("listening on http://{addr}");
        let repl_state = state.clone();
        // stdin stays open as a second command source; EOF does not stop the server
        tokio::task::spawn_blocking(move || repl(&repl_state, io::stdin().lock(), io::stdout(), io::stderr(), true));
        tokio::select! {
            r = control_loop(state.clone(), state.tick_period()) => r?,
            r = serve(state.clone(), addr, console) => r?,
            _ = tokio::signal::ctrl_c() => {}
        }
    } else if paced {
        let repl_state = state.clone();
        let input = tokio::task::spawn_blocking(move || repl(&repl_state, io::stdin().lock(), io::stdout(), io::stderr(), true));
        tokio::select! {
            r = control_loop(state.clone(), state.tick_period()) => r?,
            r = input => r??,
            _ = tokio::signal::ctrl_c() => {}
        }
        // input closed: let queued tasks finish in real time
        let period = state.tick_period();
        while !state.lock().is_idle() {
            state.cycle()?;
            tokio::time::sleep(period).await;
        }
    } else {
        repl(&state, io::stdin().lock(), io::stdout(), io::stderr(), false)?;
    }

    if let Some(path) = &opts.snapshot {
        write_snapshot(&state.lock(), path)?;
    }
    Ok(())
}
