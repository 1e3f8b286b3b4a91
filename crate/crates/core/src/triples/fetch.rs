//! Cached dataset retrieval with SHA-256 integrity checks.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::KgError;

fn sha256_file(path: &Path) -> Result<String, KgError> {
    let mut f = fs::File::open(path).map_err(|e| KgError::Io { path: path.to_path_buf(), source: e })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| KgError::Io { path: path.to_path_buf(), source: e })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn cache_name(url: &str) -> String {
    let base = url
        .rsplit('/')
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or("dataset")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect::<String>();
    let mut h = Sha256::new();
    h.update(url.as_bytes());
    format!("{}-{}", &hex::encode(h.finalize())[..12], base)
}

fn verify_or_quarantine(path: &Path, expected: &str) -> Result<(), KgError> {
    let actual = sha256_file(path)?;
    if actual.eq_ignore_ascii_case(expected) {
        return Ok(());
    }
    let quarantined = path.with_extension("quarantined");
    let _ = fs::rename(path, &quarantined);
    log::warn!("quarantined corrupt cache entry at {}", quarantined.display());
    Err(KgError::DigestMismatch {
        name: path.display().to_string(),
        expected: expected.to_string(),
        actual,
    })
}

fn download(url: &str, dest: &Path) -> Result<(), KgError> {
    let tmp = dest.with_extension("partial");
    if let Some(local) = url.strip_prefix("file://") {
        fs::copy(local, &tmp).map_err(|e| KgError::Io { path: PathBuf::from(local), source: e })?;
    } else if url.starts_with("http://") || url.starts_with("https://") {
        let mut resp = ureq::get(url)
            .call()
            .map_err(|e| KgError::Fetch { url: url.to_string(), message: e.to_string() })?;
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| KgError::Fetch { url: url.to_string(), message: e.to_string() })?;
        fs::write(&tmp, bytes).map_err(|e| KgError::Io { path: tmp.clone(), source: e })?;
    } else {
        // bare path: treat as a local file
        fs::copy(url, &tmp).map_err(|e| KgError::Io { path: PathBuf::from(url), source: e })?;
    }
    fs::rename(&tmp, dest).map_err(|e| KgError::Io { path: dest.to_path_buf(), source: e })?;
    Ok(())
}

/// Fetch `url` into `cache_dir` and return the local path. Repeat calls hit
/// the cache without network traffic. When `expected_digest` is given the
/// file content is verified (hex SHA-256) and corrupt entries are renamed to
/// `*.quarantined` before the call errors; without a digest a warning is
/// logged.
pub fn fetch_dataset(url: &str, cache_dir: &Path, expected_digest: Option<&str>) -> Result<PathBuf, KgError> {
    fs::create_dir_all(cache_dir).map_err(|e| KgError::Io { path: cache_dir.to_path_buf(), source: e })?;
    let dest = cache_dir.join(cache_name(url));

    if dest.exists() {
        match expected_digest {
            Some(d) => verify_or_quarantine(&dest, d)?,
            None => log::debug!("cache hit without digest check: {}", dest.display()),
        }
        return Ok(dest);
    }

    download(url, &dest)?;
    match expected_digest {
        Some(d) => verify_or_quarantine(&dest, d)?,
        None => log::warn!("fetched {url} without an integrity digest"),
    }
    Ok(dest)
}
