//! Dataset lookup and loading.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::Result;
use flate2::read::GzDecoder;
use fmd_core::{build_comm_graph, halve_graph, parse_temporal_edges, CommGraph, RawEventLog};

/// Marks failures caused by missing or malformed input data (exit code 2).
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn data_error(msg: impl Into<String>) -> anyhow::Error {
    DataError(msg.into()).into()
}

/// The two public datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnownDataset {
    Message,
    Mail,
}

impl KnownDataset {
    pub const ALL: [KnownDataset; 2] = [KnownDataset::Message, KnownDataset::Mail];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "message" => Some(KnownDataset::Message),
            "mail" => Some(KnownDataset::Mail),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KnownDataset::Message => "message",
            KnownDataset::Mail => "mail",
        }
    }

    /// Uncompressed file name; the cache may hold it with a `.gz` suffix.
    pub fn file_name(self) -> &'static str {
        match self {
            KnownDataset::Message => "CollegeMsg.txt",
            KnownDataset::Mail => "email-Eu-core-temporal.txt",
        }
    }

    pub fn url(self) -> String {
        format!("https://snap.stanford.edu/data/{}.gz", self.file_name())
    }

    /// Distinct node labels and events after parsing the full file.
    pub fn expected_counts(self) -> (usize, usize) {
        match self {
            KnownDataset::Message => (1_899, 59_835),
            KnownDataset::Mail => (986, 332_334),
        }
    }
}

/// `$FMD_DATA_DIR`, else `$XDG_CACHE_HOME/fmd`, else `~/.cache/fmd`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("FMD_DATA_DIR") {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("fmd");
    }
    let home = std::env::var_os("HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    home.join(".cache").join("fmd")
}

/// Cached copy of a known dataset, plain or gzipped.
pub fn cached_path(ds: KnownDataset, cache_dir: &Path) -> Option<PathBuf> {
    let plain = cache_dir.join(ds.file_name());
    let gz = cache_dir.join(format!("{}.gz", ds.file_name()));
    [plain, gz].into_iter().find(|p| p.is_file())
}

/// Resolves a dataset reference to a file: a known name goes through the cache.
pub fn resolve_dataset(dataset: &str, cache_dir: &Path) -> Result<PathBuf> {
    if let Some(ds) = KnownDataset::from_name(dataset) {
        return cached_path(ds, cache_dir).ok_or_else(|| {
            data_error(format!(
                "dataset {dataset:?} not found in {}; run `fmd fetch {dataset}` or set FMD_DATA_DIR",
                cache_dir.display()
            ))
        });
    }
    let path = PathBuf::from(dataset);
    if !path.is_file() {
        return Err(data_error(format!(
            "dataset file {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| data_error(format!("opening {}: {e}", path.display())))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

pub fn read_events(path: &Path) -> Result<RawEventLog> {
    parse_temporal_edges(open(path)?).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

/// Parses, builds and optionally halves.
pub fn load_graph(path: &Path, halve: bool) -> Result<CommGraph> {
    let g = build_comm_graph(&read_events(path)?);
    Ok(if halve { halve_graph(&g) } else { g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_plain_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let text = "1 2 10\n2 3 11\n3 1 12\n1 1 13\n";
        let plain = dir.path().join("a.txt");
        std::fs::write(&plain, text).unwrap();
        let gz = dir.path().join("a.txt.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&gz).unwrap(), flate2::Compression::fast());
        enc.write_all(text.as_bytes()).unwrap();
        enc.finish().unwrap();
        let a = read_events(&plain).unwrap();
        let b = read_events(&gz).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(load_graph(&plain, false).unwrap().node_count(), 3);
        assert_eq!(load_graph(&plain, true).unwrap().node_count(), 2);
    }

    #[test]
    fn missing_data_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = resolve_dataset("mail", dir.path()).unwrap_err();
        assert!(err.downcast_ref::<DataError>().is_some());
        let err = resolve_dataset("/no/such/file", dir.path()).unwrap_err();
        assert!(err.downcast_ref::<DataError>().is_some());
        std::fs::write(dir.path().join("email-Eu-core-temporal.txt.gz"), b"").unwrap();
        assert!(resolve_dataset("mail", dir.path())
            .unwrap()
            .ends_with("email-Eu-core-temporal.txt.gz"));
    }

    #[test]
    fn malformed_lines_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        std::fs::write(&p, "1 2\n").unwrap();
        assert!(read_events(&p).unwrap_err().downcast_ref::<DataError>().is_some());
    }
}
