//! Stderr logging filtered by `PERSIC_LOG`, plus a timestamped `run.log`
//! in the output directory that always records info and above.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use log::{Level, LevelFilter, Log, Metadata, Record};

pub const RUN_LOG_FILE: &str = "run.log";

static SIDECAR: Mutex<Option<File>> = Mutex::new(None);

struct RunLogger {
    stderr: env_logger::Logger,
}

impl Log for RunLogger {
    fn enabled(&self, meta: &Metadata) -> bool {
        meta.level() <= Level::Info || self.stderr.enabled(meta)
    }

    fn log(&self, record: &Record) {
        if self.stderr.matches(record) {
            self.stderr.log(record);
        }
        if record.level() <= Level::Info {
            write_line(&format!(
                "{:<5} {}: {}",
                record.level(),
                record.target(),
                record.args()
            ));
        }
    }

    fn flush(&self) {
        self.stderr.flush();
        if let Some(f) = SIDECAR.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            let _ = f.flush();
        }
    }
}

pub fn init() {
    let stderr =
        env_logger::Builder::from_env(env_logger::Env::new().filter_or("PERSIC_LOG", "warn"))
            .build();
    let max = stderr.filter().max(LevelFilter::Info);
    if log::set_boxed_logger(Box::new(RunLogger { stderr })).is_ok() {
        log::set_max_level(max);
    }
}

/// Starts appending to `<dir>/run.log`.
pub fn attach(dir: &Path) -> std::io::Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(RUN_LOG_FILE))?;
    *SIDECAR.lock().unwrap_or_else(|e| e.into_inner()) = Some(file);
    Ok(())
}

/// Appends a timestamped line to the sidecar log, if one is attached.
pub fn write_line(text: &str) {
    let mut guard = SIDECAR.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(f) = guard.as_mut() {
        let ts = chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ");
        for line in text.lines() {
            let _ = writeln!(f, "{ts} {line}");
        }
    }
}
