//! Forensic evidence for write commands and its append-only store.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::crypto::{verify_signature, PublicKey};
use crate::error::LedgerError;
use crate::wire::{decode_exact, encode_fields, parse_u64};

/// `⟨ID_D, ID_S, ID_I, K_d, C2, CMD, TS6, Sig⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceRecord {
    pub id_d: Vec<u8>,
    pub id_s: Vec<u8>,
    pub id_i: Vec<u8>,
    pub k_d: Vec<u8>,
    pub c2: Vec<u8>,
    pub cmd: Vec<u8>,
    pub ts6: u64,
    pub sig: Vec<u8>,
}

/// The string the doctor signs: `ID_D ‖ ID_S ‖ ID_I ‖ C2 ‖ K_d ‖ CMD ‖ TS6`.
pub fn signed_bytes(
    id_d: &[u8],
    id_s: &[u8],
    id_i: &[u8],
    c2: &[u8],
    k_d: &[u8],
    cmd: &[u8],
    ts6: u64,
) -> Vec<u8> {
    encode_fields(&[id_d, id_s, id_i, c2, k_d, cmd, &ts6.to_be_bytes()])
}

impl EvidenceRecord {
    pub fn signed_bytes(&self) -> Vec<u8> {
        signed_bytes(&self.id_d, &self.id_s, &self.id_i, &self.c2, &self.k_d, &self.cmd, self.ts6)
    }

    /// Stored order follows the tuple: IDs, K_d, C2, CMD, TS6, Sig.
    pub fn to_bytes(&self) -> Vec<u8> {
        encode_fields(&[
            &self.id_d,
            &self.id_s,
            &self.id_i,
            &self.k_d,
            &self.c2,
            &self.cmd,
            &self.ts6.to_be_bytes(),
            &self.sig,
        ])
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let f = decode_exact(bytes, 8).ok()?;
        Some(Self {
            id_d: f[0].to_vec(),
            id_s: f[1].to_vec(),
            id_i: f[2].to_vec(),
            k_d: f[3].to_vec(),
            c2: f[4].to_vec(),
            cmd: f[5].to_vec(),
            ts6: parse_u64(f[6], 6).ok()?,
            sig: f[7].to_vec(),
        })
    }
}

pub fn evidence_verify(record: &EvidenceRecord, pk: &PublicKey) -> bool {
    verify_signature(pk, &record.signed_bytes(), &record.sig)
}

/// Records kept in memory and, optionally, mirrored to a file of
/// `u32`-length-prefixed records that is only ever appended to.
#[derive(Debug, Clone, Default)]
pub struct EvidenceLedger {
    records: Vec<EvidenceRecord>,
    path: Option<PathBuf>,
}

impl EvidenceLedger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a ledger file and loads the records already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        let records = if path.exists() { Self::load(&path)? } else { Vec::new() };
        OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { records, path: Some(path) })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vec<EvidenceRecord>, LedgerError> {
        let mut buf = Vec::new();
        File::open(path)?.read_to_end(&mut buf)?;
        let mut out = Vec::new();
        let mut pos = 0usize;
        while pos < buf.len() {
            let corrupt = || LedgerError::Corrupt(pos as u64);
            let len_bytes: [u8; 4] = buf.get(pos..pos + 4).ok_or_else(corrupt)?.try_into().expect("4 bytes");
            let len = u32::from_be_bytes(len_bytes) as usize;
            let body = buf.get(pos + 4..pos + 4 + len).ok_or_else(corrupt)?;
            out.push(EvidenceRecord::from_bytes(body).ok_or_else(corrupt)?);
            pos += 4 + len;
        }
        Ok(out)
    }

    pub fn append(&mut self, record: EvidenceRecord) -> Result<(), LedgerError> {
        if let Some(path) = &self.path {
            let body = record.to_bytes();
            let mut framed = (body.len() as u32).to_be_bytes().to_vec();
            framed.extend(body);
            let mut f = OpenOptions::new().append(true).open(path)?;
            f.write_all(&framed)?;
            f.sync_data()?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EvidenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }
}
