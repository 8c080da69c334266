//! Content-addressed artifact store and append-only metrics log on the
//! local filesystem.
//!
//! Layout under the root directory:
//!
//! ```text
//! artifacts/<first two hex digits>/<sha256 hex>
//! metrics/<run_id>.jsonl
//! ```

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const URI_SCHEME: &str = "artifact://";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("malformed artifact URI {0:?}")]
    MalformedUri(String),
    #[error("unknown artifact {0}")]
    UnknownArtifact(ArtifactUri),
    #[error("artifact {0} failed digest verification")]
    Corrupt(ArtifactUri),
    #[error("invalid run id {0:?}")]
    InvalidRunId(String),
    #[error("metrics log line {line}: {reason}")]
    MalformedMetrics { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `artifact://` followed by the lowercase hex SHA-256 of the content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArtifactUri {
    digest: [u8; 32],
}

impl ArtifactUri {
    pub fn for_bytes(bytes: &[u8]) -> Self {
        ArtifactUri { digest: Sha256::digest(bytes).into() }
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let malformed = || StoreError::MalformedUri(text.to_string());
        let hex_part = text.strip_prefix(URI_SCHEME).ok_or_else(malformed)?;
        if hex_part.len() != 64 || !hex_part.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(malformed());
        }
        let mut digest = [0u8; 32];
        hex::decode_to_slice(hex_part, &mut digest).map_err(|_| malformed())?;
        Ok(ArtifactUri { digest })
    }
}

impl fmt::Display for ArtifactUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{URI_SCHEME}{}", self.digest_hex())
    }
}

impl FromStr for ArtifactUri {
    type Err = StoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactUri::parse(s)
    }
}

impl Serialize for ArtifactUri {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArtifactUri {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        ArtifactUri::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Milliseconds since the Unix epoch, or a logical tick.
    pub ts: u64,
    pub run_id: String,
    pub key: String,
    pub value: f64,
}

/// Run ids become file names, so they are limited to `[A-Za-z0-9._-]`
/// and may not start with a dot.
pub fn validate_run_id(run_id: &str) -> Result<(), StoreError> {
    let ok = !run_id.is_empty()
        && run_id.len() <= 128
        && !run_id.starts_with('.')
        && run_id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidRunId(run_id.to_string()))
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
pub struct ArtifactStore {
    root: PathBuf,
    metrics_lock: Mutex<()>,
}

impl ArtifactStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("artifacts"))?;
        fs::create_dir_all(root.join("metrics"))?;
        Ok(ArtifactStore { root, metrics_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn artifact_path(&self, uri: &ArtifactUri) -> PathBuf {
        let hex = uri.digest_hex();
        self.root.join("artifacts").join(&hex[..2]).join(hex)
    }

    fn metrics_path(&self, run_id: &str) -> PathBuf {
        self.root.join("metrics").join(format!("{run_id}.jsonl"))
    }

    /// Stores `bytes` and returns their URI. Storing the same bytes again
    /// is a no-op returning the same URI.
    pub fn put(&self, bytes: &[u8]) -> Result<ArtifactUri, StoreError> {
        let uri = ArtifactUri::for_bytes(bytes);
        let path = self.artifact_path(&uri);
        if path.exists() {
            return Ok(uri);
        }
        let dir = path.parent().expect("artifact path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        // Another writer may have landed the same content first; the bytes are
        // identical either way.
        fs::rename(&tmp, &path)?;
        Ok(uri)
    }

    /// Reads an artifact back, checking its digest.
    pub fn get(&self, uri: &ArtifactUri) -> Result<Vec<u8>, StoreError> {
        let bytes = match fs::read(self.artifact_path(uri)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::UnknownArtifact(*uri)),
            Err(e) => return Err(e.into()),
        };
        if ArtifactUri::for_bytes(&bytes) != *uri {
            return Err(StoreError::Corrupt(*uri));
        }
        Ok(bytes)
    }

    pub fn get_str(&self, uri: &str) -> Result<Vec<u8>, StoreError> {
        self.get(&ArtifactUri::parse(uri)?)
    }

    pub fn contains(&self, uri: &ArtifactUri) -> bool {
        self.artifact_path(uri).is_file()
    }

    /// Appends one record to its run's log.
    pub fn log_metric(&self, record: &MetricsRecord) -> Result<(), StoreError> {
        validate_run_id(&record.run_id)?;
        let mut line = serde_json::to_string(record).expect("plain record serializes");
        line.push('\n');
        let _guard = self.metrics_lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(self.metrics_path(&record.run_id))?;
        f.write_all(line.as_bytes())?;
        Ok(())
    }

    /// Every record of `run_id` in insertion order; an unknown run has none.
    pub fn query_metrics(&self, run_id: &str) -> Result<Vec<MetricsRecord>, StoreError> {
        validate_run_id(run_id)?;
        let f = match File::open(self.metrics_path(run_id)) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| StoreError::MalformedMetrics { line: i + 1, reason: e.to_string() })?;
            out.push(rec);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, ArtifactStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = ArtifactStore::open(dir.path()).unwrap();
        (dir, s)
    }

    #[test]
    fn round_trip_and_idempotent_put() {
        let (_d, s) = store();
        let bytes: Vec<u8> = (0..=255u8).cycle().take(10_000).collect();
        let a = s.put(&bytes).unwrap();
        let b = s.put(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.get(&a).unwrap(), bytes);
        assert_eq!(s.put(b"").unwrap().digest_hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn layout_uses_two_char_fanout() {
        let (d, s) = store();
        let uri = s.put(b"abc").unwrap();
        let hex = uri.digest_hex();
        assert_eq!(hex, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert!(d.path().join("artifacts").join("ba").join(&hex).is_file());
    }

    #[test]
    fn unknown_and_malformed_uris() {
        let (_d, s) = store();
        let missing = ArtifactUri::for_bytes(b"never stored");
        assert!(matches!(s.get(&missing), Err(StoreError::UnknownArtifact(_))));
        for bad in ["", "artifact://", "artifact://xyz", "s3://aa", &format!("artifact://{}", "A".repeat(64))] {
            assert!(matches!(ArtifactUri::parse(bad), Err(StoreError::MalformedUri(_))), "{bad}");
        }
        let uri = missing.to_string();
        assert_eq!(ArtifactUri::parse(&uri).unwrap(), missing);
    }

    #[test]
    fn tampering_is_detected() {
        let (d, s) = store();
        let uri = s.put(b"original").unwrap();
        let hex = uri.digest_hex();
        fs::write(d.path().join("artifacts").join(&hex[..2]).join(&hex), b"tampered").unwrap();
        assert!(matches!(s.get(&uri), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn metrics_preserve_insertion_order_per_run() {
        let (_d, s) = store();
        for i in 0..5u64 {
            s.log_metric(&MetricsRecord { ts: 10 - i, run_id: "r1".into(), key: "loss".into(), value: i as f64 }).unwrap();
            s.log_metric(&MetricsRecord { ts: i, run_id: "r2".into(), key: "acc".into(), value: 0.5 }).unwrap();
        }
        let r1 = s.query_metrics("r1").unwrap();
        assert_eq!(r1.iter().map(|r| r.value).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.query_metrics("r2").unwrap().len(), 5);
        assert!(s.query_metrics("nobody").unwrap().is_empty());
        assert!(matches!(s.query_metrics("../etc"), Err(StoreError::InvalidRunId(_))));
    }

    #[test]
    fn concurrent_puts_agree() {
        let (_d, s) = store();
        let uris: Vec<ArtifactUri> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..8).map(|_| scope.spawn(|| s.put(b"shared payload").unwrap())).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(uris.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(s.get(&uris[0]).unwrap(), b"shared payload");
    }
}
