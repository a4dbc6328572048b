//! Output files that disappear again if the command fails.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliResult;

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// A cell in a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(usize),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(v) => v.clone(),
        }
    }
}

/// Files written under one output directory. Unless [`OutputSet::commit`]
/// is called, dropping the set removes everything it created.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path) -> CliResult<Self> {
        let mut set = Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            dirs: Vec::new(),
            committed: false,
        };
        set.ensure_dir(dir)?;
        Ok(set)
    }

    fn ensure_dir(&mut self, dir: &Path) -> CliResult<()> {
        if !dir.exists() {
            if let Some(parent) = dir.parent() {
                if !parent.as_os_str().is_empty() {
                    self.ensure_dir(parent)?;
                }
            }
            fs::create_dir(dir)?;
            self.dirs.push(dir.to_path_buf());
        }
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn subdir(&mut self, name: &str) -> CliResult<PathBuf> {
        let p = self.dir.join(name);
        self.ensure_dir(&p)?;
        Ok(p)
    }

    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    pub fn write_text(&mut self, name: &str, body: &str) -> CliResult<PathBuf> {
        let p = self.track(self.dir.join(name));
        fs::write(&p, body)?;
        Ok(p)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> CliResult<PathBuf> {
        let p = self.track(self.dir.join(name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(p)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn uncommitted_files_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a/b");
        {
            let mut s = OutputSet::new(&dir).unwrap();
            s.write_text("x.txt", "hi").unwrap();
            s.subdir("tables").unwrap();
            assert!(dir.join("x.txt").exists());
        }
        assert!(!tmp.path().join("a").exists());
        let mut s = OutputSet::new(&dir).unwrap();
        s.write_csv("t.csv", &["a", "b"], &[vec![Cell::F(1.5), Cell::U(2)]]).unwrap();
        s.commit();
        let body = fs::read_to_string(dir.join("t.csv")).unwrap();
        assert_eq!(body, "a,b\n1.5000000000000000e0,2\n");
    }
}
