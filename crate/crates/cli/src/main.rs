mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::Args;

/// Machine-readable form of a failure: the core error variant when there is one.
fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let core = err.chain().find_map(|e| e.downcast_ref::<cyclide_core::Error>());
    let mut v = match core.map(serde_json::to_value) {
        Some(Ok(v)) => v,
        _ => json!({ "error": "Config" }),
    };
    v["message"] = json!(format!("{err:#}"));
    v["version"] = json!(commands::VERSION);
    v
}

fn write_out(path: Option<&std::path::Path>, body: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, body),
        None => std::io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = args.resolve().and_then(|cfg| {
        let out = commands::run(&cfg)?;
        write_out(cfg.out.as_deref(), &out.body)?;
        Ok(out.notes)
    });
    match result {
        Ok(notes) => {
            for n in notes {
                eprintln!("{n}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            if args.error_json {
                println!("{}", error_json(&err));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::FAILURE
        }
    }
}
