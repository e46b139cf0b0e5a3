//! Result files. Every artifact opens with a header naming the master seed
//! and the configuration hash: a `#` line for tables, a leading JSON object
//! for record streams.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Extensions this crate writes; `--force` only ever removes these.
const OWNED_EXTENSIONS: [&str; 3] = ["csv", "tsv", "jsonl"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub artifact: String,
    pub seed: u64,
    pub config_hash: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn owned_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(dir)(e)),
    };
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(dir))?.path();
        let ours = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| OWNED_EXTENSIONS.contains(&e));
        if ours && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Refuses to touch a directory holding earlier results unless `force`
/// is set, in which case those result files are removed first. The
/// directory itself is only created on the first write.
pub fn claim_dir(dir: &Path, force: bool) -> Result<(), HarnessError> {
    let existing = owned_files(dir)?;
    if !existing.is_empty() {
        if !force {
            return Err(HarnessError::WouldOverwrite(dir.to_path_buf()));
        }
        for f in existing {
            fs::remove_file(&f).map_err(io_err(&f))?;
        }
    }
    Ok(())
}

/// Output directory of one pipeline stage.
#[derive(Debug)]
pub struct Stage {
    dir: PathBuf,
    name: String,
    seed: u64,
    config_hash: String,
    written: Vec<PathBuf>,
}

impl Stage {
    pub fn open(dir: PathBuf, name: &str, seed: u64, config_hash: &str, force: bool) -> Result<Self, HarnessError> {
        claim_dir(&dir, force)?;
        Ok(Self {
            dir,
            name: name.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }

    fn header(&self, file: &str) -> Header {
        Header {
            artifact: format!("{}/{}", self.name, file),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        }
    }

    /// Writes `body` verbatim, for files with a format of their own.
    pub fn raw(&mut self, file: &str, body: &str) -> Result<(), HarnessError> {
        self.commit(file, body.as_bytes())
    }

    fn commit(&mut self, file: &str, body: &[u8]) -> Result<(), HarnessError> {
        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;
        let path = self.dir.join(file);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(body).map_err(io_err(&path))?;
        self.written.push(path);
        Ok(())
    }

    /// One JSON value per line after the header line.
    pub fn jsonl<T: Serialize>(&mut self, file: &str, items: &[T]) -> Result<(), HarnessError> {
        let mut body = serde_json::to_string(&self.header(file))?;
        body.push('\n');
        for item in items {
            body.push_str(&serde_json::to_string(item)?);
            body.push('\n');
        }
        self.commit(file, body.as_bytes())
    }

    /// Tab-separated table; `meta` lines are added to the header as `# key=value`.
    pub fn table(
        &mut self,
        file: &str,
        meta: &[(&str, String)],
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), HarnessError> {
        let h = self.header(file);
        let mut body = format!(
            "# clusterbench {}; seed={}; config={}\n",
            h.artifact, h.seed, h.config_hash
        );
        for (k, v) in meta {
            body.push_str(&format!("# {k}={v}\n"));
        }
        body.push_str(&columns.join("\t"));
        body.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            body.push_str(&row.join("\t"));
            body.push('\n');
        }
        self.commit(file, body.as_bytes())
    }
}

/// Reads a record stream written by [`Stage::jsonl`].
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Header, Vec<T>), HarnessError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(f).lines();
    let first = lines
        .next()
        .ok_or_else(|| HarnessError::Config(format!("{} is empty", path.display())))?
        .map_err(io_err(path))?;
    let header: Header = serde_json::from_str(&first)?;
    let mut items = Vec::new();
    for line in lines {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            items.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, items))
}

pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_to_overwrite_without_force() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut s = Stage::open(dir.clone(), "run", 5, "abc", false).unwrap();
        s.jsonl("summary.jsonl", &[1, 2, 3]).unwrap();
        fs::write(dir.join("keep.md"), "mine").unwrap();
        assert!(matches!(
            Stage::open(dir.clone(), "run", 5, "abc", false),
            Err(HarnessError::WouldOverwrite(_))
        ));
        Stage::open(dir.clone(), "run", 5, "abc", true).unwrap();
        assert!(!dir.join("summary.jsonl").exists());
        assert!(dir.join("keep.md").exists());
    }

    #[test]
    fn records_round_trip_with_header() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = Stage::open(tmp.path().to_path_buf(), "x", 9, "h", false).unwrap();
        s.jsonl("a.jsonl", &["p".to_string(), "q".to_string()]).unwrap();
        s.table("t.tsv", &[("draws", "3".into())], &["a", "b"], &[vec!["1".into(), "2".into()]])
            .unwrap();
        let (h, items): (Header, Vec<String>) = read_jsonl(&tmp.path().join("a.jsonl")).unwrap();
        assert_eq!((h.seed, h.config_hash.as_str(), h.artifact.as_str()), (9, "h", "x/a.jsonl"));
        assert_eq!(items, ["p", "q"]);
        let t = fs::read_to_string(tmp.path().join("t.tsv")).unwrap();
        assert_eq!(t, "# clusterbench x/t.tsv; seed=9; config=h\n# draws=3\na\tb\n1\t2\n");
        assert_eq!(s.written().len(), 2);
    }
}
