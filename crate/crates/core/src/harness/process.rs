use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::{BuildReport, HarnessError, TestReport, Toolchain};

/// Overrides the forge executable (default: `forge` from `PATH`).
pub const FORGE_BIN_ENV: &str = "REX_FORGE_BIN";
/// At most this many trailing bytes of a log are read back for parsing.
pub const OUTPUT_CAP_BYTES: u64 = 16 * 1024 * 1024;

const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessOutput {
    pub exit_code: Option<i32>,
    /// Tail of the combined stdout/stderr, lossily decoded.
    pub output: String,
    pub duration_s: f64,
}

/// Runs the `forge` CLI as a subprocess.
#[derive(Debug, Clone)]
pub struct ForgeToolchain {
    bin: PathBuf,
}

impl Default for ForgeToolchain {
    fn default() -> Self {
        Self::from_env()
    }
}

impl ForgeToolchain {
    pub fn new(bin: impl Into<PathBuf>) -> Self {
        Self { bin: bin.into() }
    }

    /// Uses `$REX_FORGE_BIN` if set, else `forge`.
    pub fn from_env() -> Self {
        let bin = std::env::var_os(FORGE_BIN_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("forge"));
        Self { bin }
    }

    pub fn bin(&self) -> &Path {
        &self.bin
    }

    /// Runs `forge --version`; returns its first output line.
    pub fn check_installed(&self) -> Result<String, HarnessError> {
        let out = Command::new(&self.bin)
            .arg("--version")
            .stdin(Stdio::null())
            .output()
            .map_err(|e| self.spawn_error(e))?;
        if !out.status.success() {
            return Err(HarnessError::ForgeNotInstalled(self.bin.clone()));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        Ok(text.lines().next().unwrap_or_default().trim().to_string())
    }

    fn spawn_error(&self, e: io::Error) -> HarnessError {
        match e.kind() {
            io::ErrorKind::NotFound => HarnessError::ForgeNotInstalled(self.bin.clone()),
            _ => HarnessError::SpawnFailure {
                program: self.bin.clone(),
                source: e,
            },
        }
    }

    /// Runs `forge <args>` in `project`, writing stdout and stderr to `log`.
    ///
    /// The child gets its own process group so a timeout kills everything it
    /// started.
    pub fn run(
        &self,
        args: &[&str],
        project: &Path,
        log: &Path,
        timeout: Duration,
    ) -> Result<ProcessOutput, HarnessError> {
        let log_file = File::create(log).map_err(|e| HarnessError::io(log, e))?;
        let stderr = log_file.try_clone().map_err(|e| HarnessError::io(log, e))?;
        debug!("{} {} in {}", self.bin.display(), args.join(" "), project.display());

        let started = Instant::now();
        let mut child = Command::new(&self.bin)
            .args(args)
            .current_dir(project)
            .env("NO_COLOR", "1")
            .stdin(Stdio::null())
            .stdout(log_file)
            .stderr(stderr)
            .process_group(0)
            .spawn()
            .map_err(|e| self.spawn_error(e))?;

        let status: Option<ExitStatus> = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if started.elapsed() >= timeout => break None,
                Ok(None) => std::thread::sleep(POLL),
                Err(e) => return Err(HarnessError::io(log, e)),
            }
        };
        let duration_s = started.elapsed().as_secs_f64();

        let Some(status) = status else {
            kill_group(child.id());
            let _ = child.kill();
            let _ = child.wait();
            warn!("{} {} timed out after {duration_s:.1}s", self.bin.display(), args.join(" "));
            return Err(HarnessError::Timeout {
                after_s: duration_s,
                partial_output: read_tail(log)?,
            });
        };
        // Grandchildren left behind by a finished forge are not ours to keep.
        kill_group(child.id());
        Ok(ProcessOutput {
            exit_code: status.code(),
            output: read_tail(log)?,
            duration_s,
        })
    }
}

fn kill_group(pid: u32) {
    if let Ok(pid) = i32::try_from(pid) {
        // SAFETY: kill(2) has no memory-safety preconditions.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
}

fn read_tail(path: &Path) -> Result<String, HarnessError> {
    let mut f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let len = f.metadata().map_err(|e| HarnessError::io(path, e))?.len();
    if len > OUTPUT_CAP_BYTES {
        f.seek(SeekFrom::Start(len - OUTPUT_CAP_BYTES))
            .map_err(|e| HarnessError::io(path, e))?;
    }
    let mut buf = Vec::with_capacity(len.min(OUTPUT_CAP_BYTES) as usize);
    f.read_to_end(&mut buf).map_err(|e| HarnessError::io(path, e))?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

impl Toolchain for ForgeToolchain {
    fn build(&self, project: &Path, log: &Path, timeout: Duration) -> Result<BuildReport, HarnessError> {
        let out = self.run(&["build"], project, log, timeout)?;
        Ok(BuildReport::from_output(out.output, out.exit_code, out.duration_s))
    }

    fn test(&self, project: &Path, log: &Path, timeout: Duration) -> Result<TestReport, HarnessError> {
        let out = self.run(&["test", "-vvvv"], project, log, timeout)?;
        Ok(TestReport::from_output(out.output, out.duration_s))
    }
}
