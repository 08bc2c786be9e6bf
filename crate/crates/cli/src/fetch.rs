//! Download and cache the public datasets.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::data::{cached_path, read_events, DataError, KnownDataset};

/// Where a fetched dataset came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FetchOutcome {
    CacheHit(PathBuf),
    Downloaded(PathBuf),
}

impl FetchOutcome {
    pub fn path(&self) -> &Path {
        match self {
            FetchOutcome::CacheHit(p) | FetchOutcome::Downloaded(p) => p,
        }
    }
}

/// Checks a file against the known node and event counts. The upstream
/// files are not versioned with checksums, so parsed counts stand in for one.
pub fn verify_counts(ds: KnownDataset, path: &Path) -> Result<()> {
    let log = read_events(path)?;
    let got = (log.distinct_labels(), log.len());
    let expected = ds.expected_counts();
    if got != expected {
        return Err(DataError(format!(
            "{}: {} nodes / {} events, expected {} / {}",
            path.display(),
            got.0,
            got.1,
            expected.0,
            expected.1
        ))
        .into());
    }
    Ok(())
}

/// Returns the cached file if present, else downloads it (unless `offline`),
/// verifies it and moves it into the cache.
pub fn fetch_dataset(ds: KnownDataset, cache_dir: &Path, offline: bool) -> Result<FetchOutcome> {
    if let Some(path) = cached_path(ds, cache_dir) {
        return Ok(FetchOutcome::CacheHit(path));
    }
    if offline {
        return Err(DataError(format!(
            "{} is not cached in {} (offline)",
            ds.name(),
            cache_dir.display()
        ))
        .into());
    }
    std::fs::create_dir_all(cache_dir).with_context(|| format!("creating {}", cache_dir.display()))?;
    let target = cache_dir.join(format!("{}.gz", ds.file_name()));
    let partial = cache_dir.join(format!("{}.gz.partial", ds.file_name()));
    download(&ds.url(), &partial)?;
    if let Err(e) = verify_counts(ds, &partial) {
        let _ = std::fs::remove_file(&partial);
        return Err(e);
    }
    std::fs::rename(&partial, &target)?;
    Ok(FetchOutcome::Downloaded(target))
}

fn download(url: &str, dest: &Path) -> Result<()> {
    let resp = ureq::get(url)
        .call()
        .map_err(|e| DataError(format!("downloading {url}: {e}")))?;
    let mut body = resp.into_body().into_reader();
    let mut file = File::create(dest).with_context(|| format!("creating {}", dest.display()))?;
    io::copy(&mut body, &mut file).map_err(|e| DataError(format!("downloading {url}: {e}")))?;
    file.flush()?;
    Ok(())
}
