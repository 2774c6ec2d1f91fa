//! Append-only per-client report logs.
//!
//! Each client has its own JSON-lines file and its own lock, so clients
//! never wait on each other. Readers copy a client's log under its lock and
//! work on the copy.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::report::{GroundReport, RawReport};
use crate::MappingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub stored: bool,
    /// Largest `n` such that seqs `1..=n` are all stored.
    pub high_seq: u64,
}

#[derive(Debug, Default)]
struct ClientLog {
    /// Append order.
    reports: Vec<GroundReport>,
    seen: std::collections::BTreeSet<u64>,
    high_seq: u64,
    file: Option<File>,
}

impl ClientLog {
    fn accept(&mut self, r: GroundReport) -> bool {
        if !self.seen.insert(r.seq) {
            return false;
        }
        self.reports.push(r);
        while self.seen.contains(&(self.high_seq + 1)) {
            self.high_seq += 1;
        }
        true
    }
}

#[derive(Debug, Default)]
pub struct ReportStore {
    dir: Option<PathBuf>,
    durable: bool,
    clients: RwLock<BTreeMap<String, Arc<Mutex<ClientLog>>>>,
}

impl ReportStore {
    /// Store without persistence.
    pub fn in_memory() -> Self {
        ReportStore::default()
    }

    /// Opens (or creates) a store directory and replays existing logs.
    /// With `durable`, every append is followed by an fsync.
    pub fn open(dir: &Path, durable: bool) -> Result<Self, MappingError> {
        std::fs::create_dir_all(dir)?;
        let mut clients = BTreeMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let mut log = ClientLog::default();
            for (n, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match RawReport::parse(line.as_bytes()).and_then(RawReport::validate) {
                    Ok(r) => {
                        log.accept(r);
                    }
                    // a torn final line from a crash is dropped
                    Err(e) => log::warn!("{}:{}: {e}", path.display(), n + 1),
                }
            }
            let id = path.file_stem().unwrap().to_string_lossy().to_string();
            log.file = Some(OpenOptions::new().append(true).open(&path)?);
            clients.insert(id, Arc::new(Mutex::new(log)));
        }
        Ok(ReportStore { dir: Some(dir.to_path_buf()), durable, clients: RwLock::new(clients) })
    }

    fn client(&self, id: &str) -> Result<Arc<Mutex<ClientLog>>, MappingError> {
        if let Some(c) = self.clients.read().unwrap().get(id) {
            return Ok(c.clone());
        }
        let mut w = self.clients.write().unwrap();
        if let Some(c) = w.get(id) {
            return Ok(c.clone());
        }
        let mut log = ClientLog::default();
        if let Some(dir) = &self.dir {
            log.file = Some(OpenOptions::new().create(true).append(true).open(dir.join(format!("{id}.jsonl")))?);
        }
        let c = Arc::new(Mutex::new(log));
        w.insert(id.to_string(), c.clone());
        Ok(c)
    }

    /// Appends a validated report; a repeated `(client_id, seq)` is ignored.
    pub fn submit(&self, r: GroundReport) -> Result<Ack, MappingError> {
        let client = self.client(&r.client_id)?;
        let mut log = client.lock().unwrap();
        if log.seen.contains(&r.seq) {
            return Ok(Ack { stored: false, high_seq: log.high_seq });
        }
        if let Some(f) = log.file.as_mut() {
            let mut line = serde_json::to_vec(&RawReport::from(&r))?;
            line.push(b'\n');
            f.write_all(&line)?;
            if self.durable {
                f.sync_data()?;
            }
        }
        log.accept(r);
        Ok(Ack { stored: true, high_seq: log.high_seq })
    }

    pub fn submit_raw(&self, body: &[u8]) -> Result<Ack, MappingError> {
        self.submit(RawReport::parse(body)?.validate()?)
    }

    pub fn client_ids(&self) -> Vec<String> {
        self.clients.read().unwrap().keys().cloned().collect()
    }

    /// Each client's reports ordered by seq.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<GroundReport>> {
        let clients: Vec<(String, Arc<Mutex<ClientLog>>)> =
            self.clients.read().unwrap().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        clients
            .into_iter()
            .map(|(id, c)| {
                let mut v = c.lock().unwrap().reports.clone();
                v.sort_by_key(|r| r.seq);
                (id, v)
            })
            .collect()
    }

    /// Reports in the order they were appended.
    pub fn append_order(&self, client: &str) -> Vec<GroundReport> {
        self.clients.read().unwrap().get(client).map(|c| c.lock().unwrap().reports.clone()).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vibwalk_core::Material;

    fn rep(client: &str, seq: u64) -> GroundReport {
        GroundReport {
            client_id: client.into(),
            seq,
            timestamp_ms: seq as i64 * 1000,
            lat: 39.0,
            lon: 116.0,
            label: Material::Grass,
            confidence: 1.0,
        }
    }

    #[test]
    fn ack_sequence() {
        let s = ReportStore::in_memory();
        assert_eq!(s.submit(rep("a", 1)).unwrap(), Ack { stored: true, high_seq: 1 });
        assert_eq!(s.submit(rep("a", 1)).unwrap(), Ack { stored: false, high_seq: 1 });
        assert_eq!(s.submit(rep("a", 3)).unwrap(), Ack { stored: true, high_seq: 1 });
        assert_eq!(s.submit(rep("a", 2)).unwrap(), Ack { stored: true, high_seq: 3 });
        assert_eq!(s.snapshot()["a"].len(), 3);
    }

    #[test]
    fn reopen_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = ReportStore::open(dir.path(), true).unwrap();
            for i in 1..=5 {
                s.submit(rep("c-1", i)).unwrap();
            }
            s.submit(rep("c-1", 2)).unwrap();
        }
        let text = std::fs::read_to_string(dir.path().join("c-1.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 5);
        let s = ReportStore::open(dir.path(), true).unwrap();
        assert_eq!(s.submit(rep("c-1", 5)).unwrap(), Ack { stored: false, high_seq: 5 });
        assert_eq!(s.submit(rep("c-1", 6)).unwrap(), Ack { stored: true, high_seq: 6 });
    }
}
