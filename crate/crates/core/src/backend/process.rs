//! Local subprocess execution with output capture, timeout and
//! process-group termination.

use std::fs::{File, OpenOptions};
use std::io;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{CancelToken, CANCELLED_EXIT_CODE, TIMEOUT_EXIT_CODE};

/// Time between SIGTERM and SIGKILL when a run must be stopped.
pub const DEFAULT_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessOutcome {
    pub exit_code: i32,
    pub wall_time: Duration,
    pub timed_out: bool,
    pub cancelled: bool,
}

pub fn open_sink(path: &Path, append: bool) -> io::Result<File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut opts = OpenOptions::new();
    opts.create(true);
    if append {
        opts.append(true);
    } else {
        opts.write(true).truncate(true);
    }
    opts.open(path)
}

/// Runs `cmd` with stdout and stderr both written to `sink`.
///
/// The child gets its own process group so that a timeout or cancellation
/// stops everything it spawned: SIGTERM to the group, then SIGKILL once
/// `grace` has passed.
pub fn run_captured(
    mut cmd: Command,
    sink: &Path,
    append: bool,
    timeout: Duration,
    grace: Duration,
    cancel: Option<&CancelToken>,
) -> io::Result<ProcessOutcome> {
    let out = open_sink(sink, append)?;
    let err = out.try_clone()?;
    cmd.stdin(Stdio::null())
        .stdout(Stdio::from(out))
        .stderr(Stdio::from(err))
        .process_group(0);

    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let mut poll = Duration::from_millis(1);
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(ProcessOutcome {
                exit_code: exit_code(status),
                wall_time: start.elapsed(),
                timed_out: false,
                cancelled: false,
            });
        }
        let timed_out = start.elapsed() >= timeout;
        let cancelled = cancel.is_some_and(CancelToken::is_cancelled);
        if timed_out || cancelled {
            stop_group(&mut child, grace)?;
            return Ok(ProcessOutcome {
                exit_code: if timed_out {
                    TIMEOUT_EXIT_CODE
                } else {
                    CANCELLED_EXIT_CODE
                },
                wall_time: start.elapsed(),
                timed_out,
                cancelled: !timed_out,
            });
        }
        let left = timeout.saturating_sub(start.elapsed());
        thread::sleep(poll.min(left).max(Duration::from_micros(100)));
        poll = (poll * 2).min(Duration::from_millis(20));
    }
}

/// Result of a short control command with captured pipes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

/// Runs `cmd` feeding `input` on stdin and capturing stdout and stderr.
/// Meant for short control commands; the process group is killed after
/// `timeout`.
pub fn run_with_input(
    mut cmd: Command,
    input: &[u8],
    timeout: Duration,
) -> io::Result<CommandOutput> {
    use std::io::{Read, Write};

    cmd.stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let mut child = cmd.spawn()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let input = input.to_vec();
    let writer = thread::spawn(move || {
        // the child may exit without reading; a broken pipe is fine
        let _ = stdin.write_all(&input);
    });
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let start = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            stop_group(&mut child, Duration::from_millis(200))?;
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let _ = writer.join();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    Ok(CommandOutput {
        exit_code: match status {
            Some(s) => exit_code(s),
            None => TIMEOUT_EXIT_CODE,
        },
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
        timed_out,
    })
}

fn exit_code(status: ExitStatus) -> i32 {
    status
        .code()
        .or_else(|| status.signal().map(|s| 128 + s))
        .unwrap_or(-1)
}

fn signal_group(child: &Child, sig: libc::c_int) {
    let pgid = child.id() as libc::pid_t;
    // SAFETY: kill(2) with a negative pid targets the process group created
    // for this child; it has no memory-safety preconditions.
    unsafe {
        libc::kill(-pgid, sig);
    }
}

fn stop_group(child: &mut Child, grace: Duration) -> io::Result<()> {
    signal_group(child, libc::SIGTERM);
    let deadline = Instant::now() + grace;
    while Instant::now() < deadline {
        if child.try_wait()?.is_some() {
            // leader is gone; make sure stragglers in the group are too
            signal_group(child, libc::SIGKILL);
            return Ok(());
        }
        thread::sleep(Duration::from_millis(10));
    }
    signal_group(child, libc::SIGKILL);
    child.wait()?;
    Ok(())
}
