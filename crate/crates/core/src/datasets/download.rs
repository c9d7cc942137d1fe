use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One file to fetch, with mirror URLs tried in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteFile {
    pub file_name: String,
    pub urls: Vec<String>,
    /// Pinned hex SHA-256. When absent, the digest seen on first download is
    /// recorded in the manifest and enforced from then on.
    pub sha256: Option<String>,
    /// Unpack as a gzipped tarball into the destination after verification.
    #[serde(default)]
    pub extract: bool,
}

impl RemoteFile {
    fn mirrors(file_name: &str, bases: &[&str]) -> Self {
        Self {
            file_name: file_name.to_owned(),
            urls: bases.iter().map(|b| format!("{b}{file_name}")).collect(),
            sha256: None,
            extract: false,
        }
    }
}

/// Registry of downloadable datasets by id.
pub fn known_sources(name: &str) -> Option<Vec<RemoteFile>> {
    match name {
        "fashion-mnist" => {
            let bases = [
                "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
                "https://raw.githubusercontent.com/zalandoresearch/fashion-mnist/master/data/fashion/",
            ];
            Some(
                ["train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz", "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"]
                    .iter()
                    .map(|f| RemoteFile::mirrors(f, &bases))
                    .collect(),
            )
        }
        "cifar-10" | "cifar10" => Some(vec![RemoteFile {
            extract: true,
            ..RemoteFile::mirrors("cifar-10-binary.tar.gz", &["https://www.cs.toronto.edu/~kriz/"])
        }]),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub url: String,
    pub sha256: String,
    pub bytes: u64,
    /// Seconds since the Unix epoch at download time.
    pub timestamp: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DownloadManifest {
    pub dataset: String,
    pub files: Vec<ManifestEntry>,
}

impl DownloadManifest {
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(Error::io(format!("reading {}", path.display())))?;
        serde_json::from_str(&text).map(Some).map_err(|e| Error::format(&path, e.to_string()))
    }

    fn entry(&self, file: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.file == file)
    }

    fn upsert(&mut self, entry: ManifestEntry) {
        match self.files.iter_mut().find(|e| e.file == entry.file) {
            Some(slot) => *slot = entry,
            None => self.files.push(entry),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DownloadOutcome {
    pub manifest_path: PathBuf,
    pub manifest: DownloadManifest,
    pub downloaded: Vec<String>,
    pub cached: Vec<String>,
}

impl DownloadOutcome {
    pub fn fully_cached(&self) -> bool {
        self.downloaded.is_empty()
    }
}

fn quarantine(path: &Path, expected: &str, actual: String) -> Error {
    let mut q = path.as_os_str().to_owned();
    q.push(".quarantine");
    let q = PathBuf::from(q);
    let quarantined = std::fs::rename(path, &q).ok().map(|_| q);
    Error::Integrity { path: path.to_path_buf(), expected: expected.to_owned(), actual, quarantined }
}

fn fetch(agent: &ureq::Agent, url: &str, dest: &Path) -> std::result::Result<(String, u64), String> {
    let response = agent.get(url).call().map_err(|e| e.to_string())?;
    let mut reader = response.into_body().into_reader();
    let mut part = dest.as_os_str().to_owned();
    part.push(".part");
    let part = PathBuf::from(part);
    let result = (|| -> std::io::Result<(String, u64)> {
        let mut out = BufWriter::new(File::create(&part)?);
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut total = 0u64;
        loop {
            let n = reader.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            out.write_all(&buf[..n])?;
            total += n as u64;
        }
        out.flush()?;
        Ok((hex::encode(hasher.finalize()), total))
    })();
    match result {
        Ok(r) => {
            std::fs::rename(&part, dest).map_err(|e| e.to_string())?;
            Ok(r)
        }
        Err(e) => {
            let _ = std::fs::remove_file(&part);
            Err(e.to_string())
        }
    }
}

fn extract_tar_gz(archive: &Path, dest: &Path) -> Result<()> {
    let f = File::open(archive).map_err(Error::io(format!("opening {}", archive.display())))?;
    tar::Archive::new(flate2::read::GzDecoder::new(f)).unpack(dest).map_err(|e| Error::format(archive, format!("extraction failed: {e}")))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Makes `files` present and verified in `dest`, writing `manifest.json`.
///
/// A file already on disk whose digest matches the pinned or previously
/// recorded value is not fetched again; when nothing is fetched the manifest
/// is left untouched. A digest mismatch moves the file aside with a
/// `.quarantine` suffix and fails with [`Error::Integrity`].
pub fn download_dataset(name: &str, files: &[RemoteFile], dest: &Path) -> Result<DownloadOutcome> {
    std::fs::create_dir_all(dest).map_err(Error::io(format!("creating {}", dest.display())))?;
    let previous = DownloadManifest::load(dest)?;
    let mut manifest = previous.clone().unwrap_or_else(|| DownloadManifest { dataset: name.to_owned(), files: vec![] });
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_connect(Some(Duration::from_secs(20)))
        .timeout_recv_body(Some(Duration::from_secs(600)))
        .build()
        .into();

    let mut downloaded = Vec::new();
    let mut cached = Vec::new();
    for rf in files {
        let path = dest.join(&rf.file_name);
        let recorded = manifest.entry(&rf.file_name).map(|e| e.sha256.clone());
        let expected = rf.sha256.clone().or(recorded);

        if path.is_file() {
            let actual = crate::sha256_file(&path)?;
            match &expected {
                Some(want) if !want.eq_ignore_ascii_case(&actual) => return Err(quarantine(&path, want, actual)),
                Some(_) => {
                    cached.push(rf.file_name.clone());
                    continue;
                }
                None => {
                    // A file placed by hand: adopt it and record its digest.
                    let bytes = std::fs::metadata(&path).map_err(Error::io("stat"))?.len();
                    manifest.upsert(ManifestEntry {
                        file: rf.file_name.clone(),
                        url: String::new(),
                        sha256: actual,
                        bytes,
                        timestamp: now(),
                    });
                    downloaded.push(rf.file_name.clone());
                    continue;
                }
            }
        }

        let mut reasons = Vec::new();
        let mut got = None;
        for url in &rf.urls {
            log::info!("fetching {url}");
            match fetch(&agent, url, &path) {
                Ok((digest, bytes)) => {
                    got = Some((url.clone(), digest, bytes));
                    break;
                }
                Err(reason) => reasons.push(format!("{url}: {reason}")),
            }
        }
        let Some((url, digest, bytes)) = got else {
            return Err(Error::Network { file: rf.file_name.clone(), reasons });
        };
        if let Some(want) = &expected {
            if !want.eq_ignore_ascii_case(&digest) {
                return Err(quarantine(&path, want, digest));
            }
        }
        manifest.upsert(ManifestEntry { file: rf.file_name.clone(), url, sha256: digest, bytes, timestamp: now() });
        downloaded.push(rf.file_name.clone());
        if rf.extract {
            extract_tar_gz(&path, dest)?;
        }
    }

    let manifest_path = dest.join(MANIFEST_FILE);
    if previous.as_ref() != Some(&manifest) {
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&manifest_path, text).map_err(Error::io(format!("writing {}", manifest_path.display())))?;
    }
    Ok(DownloadOutcome { manifest_path, manifest, downloaded, cached })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufRead;
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves `body` for `/good`, 404 for anything else; counts requests.
    fn serve(body: &'static [u8]) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = std::io::BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                }
                let reply = if request_line.starts_with("GET /good ") {
                    let mut r = format!("HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len()).into_bytes();
                    r.extend_from_slice(body);
                    r
                } else {
                    b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_vec()
                };
                let _ = stream.write_all(&reply);
            }
        });
        (base, hits)
    }

    fn remote(base: &str, paths: &[&str], sha: Option<String>) -> RemoteFile {
        RemoteFile { file_name: "data.bin".into(), urls: paths.iter().map(|p| format!("{base}{p}")).collect(), sha256: sha, extract: false }
    }

    #[test]
    fn downloads_then_serves_from_cache() {
        let (base, hits) = serve(b"payload bytes");
        let d = tempfile::tempdir().unwrap();
        let files = [remote(&base, &["/missing", "/good"], None)];
        let first = download_dataset("toy", &files, d.path()).unwrap();
        assert_eq!(first.downloaded, vec!["data.bin"]);
        assert_eq!(first.manifest.files[0].sha256, crate::sha256_hex(b"payload bytes"));
        assert_eq!(first.manifest.files[0].bytes, 13);
        assert!(first.manifest.files[0].url.ends_with("/good"));
        let manifest_before = std::fs::read(&first.manifest_path).unwrap();
        let requests = hits.load(Ordering::SeqCst);
        assert_eq!(requests, 2);

        let second = download_dataset("toy", &files, d.path()).unwrap();
        assert!(second.fully_cached());
        assert_eq!(hits.load(Ordering::SeqCst), requests);
        assert_eq!(std::fs::read(&second.manifest_path).unwrap(), manifest_before);
    }

    #[test]
    fn corrupted_cache_is_quarantined() {
        let (base, _) = serve(b"original");
        let d = tempfile::tempdir().unwrap();
        let files = [remote(&base, &["/good"], None)];
        download_dataset("toy", &files, d.path()).unwrap();
        std::fs::write(d.path().join("data.bin"), b"tampered").unwrap();
        let err = download_dataset("toy", &files, d.path()).unwrap_err();
        assert!(matches!(err, Error::Integrity { quarantined: Some(_), .. }), "{err:?}");
        assert!(d.path().join("data.bin.quarantine").is_file());
        assert!(!d.path().join("data.bin").exists());
    }

    #[test]
    fn pinned_digest_mismatch_after_download() {
        let (base, _) = serve(b"original");
        let d = tempfile::tempdir().unwrap();
        let files = [remote(&base, &["/good"], Some(crate::sha256_hex(b"something else")))];
        assert!(matches!(download_dataset("toy", &files, d.path()), Err(Error::Integrity { .. })));
    }

    #[test]
    fn all_mirrors_failing_is_network_error() {
        let (base, _) = serve(b"x");
        let d = tempfile::tempdir().unwrap();
        let files = [remote(&base, &["/a", "/b"], None)];
        match download_dataset("toy", &files, d.path()) {
            Err(Error::Network { reasons, .. }) => assert_eq!(reasons.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn registry_has_both_datasets() {
        assert_eq!(known_sources("fashion-mnist").unwrap().len(), 4);
        assert!(known_sources("cifar-10").unwrap()[0].extract);
        assert!(known_sources("imagenet").is_none());
    }
}
