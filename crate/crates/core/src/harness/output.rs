use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{write_steps_csv, RunReport, StepRecord};

/// Creates `<base>/<label>-<UTC timestamp>`, adding a numeric suffix rather
/// than reusing a directory that already exists.
pub fn unique_run_dir(base: &Path, label: &str) -> Result<PathBuf> {
    fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for n in 0u32.. {
        let name = if n == 0 {
            format!("{label}-{stamp}")
        } else {
            format!("{label}-{stamp}-{n}")
        };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(dir, e)),
        }
    }
    unreachable!()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Opens `path` for buffered writing, creating parent directories.
pub fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes `steps.csv` and `report.json` into `dir`.
pub fn write_run(dir: &Path, report: &RunReport, steps: &[StepRecord]) -> Result<()> {
    let csv_path = dir.join("steps.csv");
    let mut w = create_file(&csv_path)?;
    write_steps_csv(&mut w, steps)?;
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    write_file(&dir.join("report.json"), &report.to_json()?)
}

/// All `report.json` files under `path` (or `path` itself), sorted.
pub fn collect_reports(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut found = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let p = entry.map_err(|e| Error::io(&dir, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "report.json") {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_never_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let a = unique_run_dir(tmp.path(), "run").unwrap();
        let b = unique_run_dir(tmp.path(), "run").unwrap();
        assert_ne!(a, b);
        assert!(a.is_dir() && b.is_dir());
    }

    #[test]
    fn collects_nested_reports() {
        let tmp = tempfile::tempdir().unwrap();
        let r = RunReport::new("x", 2, 0.5, 0.0);
        write_run(&tmp.path().join("a/seed-0"), &r, &[]).unwrap();
        write_run(&tmp.path().join("b"), &r, &[]).unwrap();
        let found = collect_reports(tmp.path()).unwrap();
        assert_eq!(found.len(), 2);
        assert_eq!(collect_reports(&found[0]).unwrap(), vec![found[0].clone()]);
        let csv = fs::read_to_string(tmp.path().join("b/steps.csv")).unwrap();
        assert_eq!(csv.trim(), crate::metrics::STEP_CSV_HEADER);
    }
}
