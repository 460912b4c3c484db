use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::cpu::MilliCpu;
use crate::error::{Error, Result};

/// Name of the limit file inside a container directory.
pub const LIMIT_FILE: &str = "cpu.max";

/// Where container CPU limits live. The watcher and plan runner only talk to
/// this trait, so a real control-group backend can replace the file fake.
pub trait LimitBackend: Send + Sync + 'static {
    /// Creates the container with `initial` as its limit and returns the path
    /// (or other locator) of its limit.
    fn create(&self, id: &str, initial: MilliCpu) -> Result<PathBuf>;
    fn write_limit(&self, id: &str, value: MilliCpu) -> Result<()>;
    fn read_limit(&self, id: &str) -> Result<MilliCpu>;
    fn remove(&self, id: &str) -> Result<()>;
}

/// Keeps each container's limit in `<workdir>/<id>/cpu.max` as one line of
/// decimal milliCPU. Writes go through a temporary file and a rename so a
/// reader sees either the old or the new value.
#[derive(Debug)]
pub struct FileBackend {
    workdir: PathBuf,
    tmp_counter: AtomicU64,
}

impl FileBackend {
    pub fn new(workdir: impl Into<PathBuf>) -> Result<Self> {
        let workdir = workdir.into();
        fs::create_dir_all(&workdir).map_err(|e| Error::io(&workdir, e))?;
        Ok(FileBackend {
            workdir,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    fn dir(&self, id: &str) -> Result<PathBuf> {
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            return Err(Error::invalid(format!("bad container id `{id}`")));
        }
        Ok(self.workdir.join(id))
    }

    pub fn limit_path(&self, id: &str) -> Result<PathBuf> {
        Ok(self.dir(id)?.join(LIMIT_FILE))
    }

    fn existing_limit_path(&self, id: &str) -> Result<PathBuf> {
        let path = self.limit_path(id)?;
        if !path.exists() {
            return Err(Error::NotFound(format!("container `{id}`")));
        }
        Ok(path)
    }

    fn atomic_write(&self, path: &Path, value: MilliCpu) -> Result<()> {
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_file_name(format!(".{LIMIT_FILE}.tmp{n}"));
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        writeln!(f, "{}", value.get()).map_err(|e| Error::io(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

impl LimitBackend for FileBackend {
    fn create(&self, id: &str, initial: MilliCpu) -> Result<PathBuf> {
        let dir = self.dir(id)?;
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::AlreadyExists(format!("container `{id}`")))
            }
            Err(e) => return Err(Error::io(&dir, e)),
        }
        let path = dir.join(LIMIT_FILE);
        self.atomic_write(&path, initial)?;
        Ok(path)
    }

    fn write_limit(&self, id: &str, value: MilliCpu) -> Result<()> {
        let path = self.existing_limit_path(id)?;
        self.atomic_write(&path, value)
    }

    fn read_limit(&self, id: &str) -> Result<MilliCpu> {
        let path = self.existing_limit_path(id)?;
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        parse_limit(&text)
    }

    fn remove(&self, id: &str) -> Result<()> {
        let dir = self.dir(id)?;
        fs::remove_dir_all(&dir).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("container `{id}`")),
            _ => Error::io(&dir, e),
        })
    }
}

/// Parses limit file contents: a single newline-terminated decimal.
pub fn parse_limit(text: &str) -> Result<MilliCpu> {
    let body = text.strip_suffix('\n').ok_or_else(|| Error::Format {
        line: 1,
        message: format!("limit `{text}` is not newline-terminated"),
    })?;
    let v: u32 = body.parse().map_err(|_| Error::Format {
        line: 1,
        message: format!("limit `{body}` is not a decimal milliCPU value"),
    })?;
    MilliCpu::new(v)
}
