//! CSV reports with a `# key=value` metadata block in front.
//!
//! The metadata holds everything needed to rerun the command, so a report
//! can regenerate itself byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub metadata: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Fixed-precision float formatting so reruns print identical bytes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{v}")
    }
}

impl Report {
    pub fn new(header: &[&str]) -> Self {
        Self { metadata: BTreeMap::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell `name` of every row.
    pub fn values(&self, name: &str) -> Result<Vec<&str>, CliError> {
        let i = self.column(name).ok_or_else(|| CliError::Report(format!("no column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(CliError::Report(format!("metadata entry {k:?} cannot be written")));
            }
            out.extend_from_slice(format!("# {k}={v}\n").as_bytes());
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header).map_err(|e| CliError::Report(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Report(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Report(e.to_string()))
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let text = std::str::from_utf8(bytes).map_err(|e| CliError::Report(e.to_string()))?;
        let mut metadata = BTreeMap::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(entry) = line.strip_prefix("# ") else { break };
            let (k, v) = entry
                .trim_end_matches('\n')
                .split_once('=')
                .ok_or_else(|| CliError::Report(format!("bad metadata line {line:?}")))?;
            metadata.insert(k.to_owned(), v.to_owned());
            body_start += line.len();
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(&bytes[body_start..]);
        let header = r.headers().map_err(|e| CliError::Report(e.to_string()))?.iter().map(str::to_owned).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()).map_err(|e| CliError::Report(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Self { metadata, header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Report {
        let mut r = Report::new(&["record", "cr", "prd"]);
        r.meta("command", "sweep").meta("seeds", "1,2,3");
        r.push(vec!["a".into(), "50".into(), fmt_f64(1.25)]);
        r.push(vec!["b, quoted".into(), "60".into(), fmt_f64(f64::INFINITY)]);
        r
    }

    #[test]
    fn layout_is_stable() {
        let text = String::from_utf8(sample().to_bytes().unwrap()).unwrap();
        assert_eq!(text, "# command=sweep\n# seeds=1,2,3\nrecord,cr,prd\na,50,1.250000\n\"b, quoted\",60,inf\n");
    }

    #[test]
    fn parse_restores_everything() {
        let r = sample();
        let bytes = r.to_bytes().unwrap();
        let back = Report::parse(&bytes).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.values("cr").unwrap(), vec!["50", "60"]);
    }

    proptest! {
        #[test]
        fn round_trip(cells in proptest::collection::vec(("[a-z ,\"]{0,8}", -1e6f64..1e6), 0..20),
                      meta in proptest::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,12}", 0..5)) {
            let mut r = Report::new(&["name", "value"]);
            for (k, v) in &meta { r.meta(k, v); }
            for (s, v) in &cells { r.push(vec![s.clone(), fmt_f64(*v)]); }
            let bytes = r.to_bytes().unwrap();
            prop_assert_eq!(Report::parse(&bytes).unwrap(), r);
        }
    }
}
