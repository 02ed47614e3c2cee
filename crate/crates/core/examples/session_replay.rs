//! Records a session as a JSON-lines event log, including rejected events,
//! and rebuilds an identical session from the log.
//!
//! ```text
//! cargo run --example session_replay -- [log.jsonl]
//! ```

use std::path::Path;
use std::sync::Arc;

use ventronav::io::LoadedScenario;
use ventronav::registration::ScaleMode;
use ventronav::session::{walkthrough_script, Session, SessionEvent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/phantom");
    let scenario = LoadedScenario::load(&dir.join("scenario.json"))?;
    let ctx = Arc::new(scenario.session_context(ScaleMode::bounded()));

    let mut script = vec![SessionEvent::Confirm, SessionEvent::Register];
    script.extend(walkthrough_script(&ctx, scenario.scene.true_world_landmarks(), 20.0));
    let mut live = Session::new(ctx.clone());
    for e in &script {
        if let Err(rej) = live.apply(e.clone()) {
            println!("rejected {}: {}", rej.event, rej.reason);
        }
    }
    let log = live.log_jsonl();
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, &log)?;
        println!("wrote {path}");
    }

    let parsed = Session::parse_log_jsonl(&log)?;
    let replayed = Session::replay(ctx, parsed.iter().map(|l| &l.event));
    println!("{} events logged, final phase {:?}", parsed.len(), replayed.state().phase);
    println!("replayed state identical: {}", replayed.state() == live.state());
    Ok(())
}
