//! Persistence: monitor CSV, binary field snapshots and `key = value` summaries.
//!
//! Snapshot layout (little-endian): `"KRFL"`, version `u32`, then `m, n, N_b,
//! N_f` as `u32`, `t` as `f64`, then `N_b²·N_f²` values of `φ` in base-major
//! order.  Writers append a trailer with the step counter, the eigen-range and
//! the cached `φ̇`; readers that stop after `φ` see a complete snapshot.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::analysis::MonitorRecord;
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::oracle::OracleReport;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"KRFL";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Seventeen significant digits: enough for an exact `f64` round trip.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn monitors_header() -> String {
    MonitorRecord::COLUMNS.join(",")
}

pub fn write_monitors(mut w: impl Write, records: &[MonitorRecord]) -> Result<()> {
    writeln!(w, "{}", monitors_header())?;
    for r in records {
        let row: Vec<String> = r.to_row().iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn monitors_to_string(records: &[MonitorRecord]) -> String {
    let mut buf = Vec::new();
    write_monitors(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_monitors(text: &str) -> Result<Vec<MonitorRecord>> {
    let bad = |message: String| Error::Format { what: "monitor CSV", message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if header.trim() != monitors_header() {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != MonitorRecord::COLUMNS.len() {
            return Err(bad(format!("row {} has {} fields", n + 2, cells.len())));
        }
        let mut row = [0.0; 17];
        for (slot, c) in row.iter_mut().zip(&cells) {
            *slot = c.trim().parse().map_err(|_| bad(format!("row {}: cannot parse `{c}`", n + 2)))?;
        }
        out.push(MonitorRecord::from_row(&row));
    }
    Ok(out)
}

pub fn write_oracle_reports(mut w: impl Write, reports: &[OracleReport]) -> Result<()> {
    writeln!(w, "oracle,deviation,tolerance,pass")?;
    for r in reports {
        writeln!(w, "{},{},{},{}", r.name, format_f64(r.deviation), format_f64(r.tolerance), r.pass)?;
    }
    Ok(())
}

/// Dimensions carried in a snapshot header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapshotHeader {
    pub m: u32,
    pub n: u32,
    pub nb: u32,
    pub nf: u32,
}

impl SnapshotHeader {
    pub fn value_count(&self) -> usize {
        (self.nb as usize).pow(2) * (self.nf as usize).pow(2)
    }
}

pub fn write_snapshot(mut w: impl Write, header: SnapshotHeader, state: &FlowState) -> Result<()> {
    if state.phi.len() != header.value_count() {
        return Err(Error::Format {
            what: "snapshot",
            message: format!("{} values do not fit a {}²×{}² grid", state.phi.len(), header.nb, header.nf),
        });
    }
    let mut buf = Vec::with_capacity(40 + 8 * (2 * state.phi.len() + 4));
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    for v in [SNAPSHOT_VERSION, header.m, header.n, header.nb, header.nf] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&state.t.to_le_bytes());
    for v in &state.phi {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&state.steps.to_le_bytes());
    buf.extend_from_slice(&state.eig_range.0.to_le_bytes());
    buf.extend_from_slice(&state.eig_range.1.to_le_bytes());
    buf.extend_from_slice(&(state.phidot.len() as u64).to_le_bytes());
    for v in &state.phidot {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format { what: "snapshot", message: format!("truncated at byte {}", self.pos) })?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn read_snapshot(mut r: impl Read) -> Result<(SnapshotHeader, FlowState)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if &c.take::<4>()? != SNAPSHOT_MAGIC {
        return Err(Error::Format { what: "snapshot", message: "bad magic".into() });
    }
    let version = c.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format { what: "snapshot", message: format!("unsupported version {version}") });
    }
    let header = SnapshotHeader { m: c.u32()?, n: c.u32()?, nb: c.u32()?, nf: c.u32()? };
    let t = c.f64()?;
    let phi = (0..header.value_count()).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let mut state = FlowState { t, phi, phidot: Vec::new(), eig_range: (f64::NAN, f64::NAN), steps: 0 };
    if !c.done() {
        state.steps = c.u64()?;
        state.eig_range = (c.f64()?, c.f64()?);
        let count = c.u64()? as usize;
        state.phidot = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        if !c.done() {
            return Err(Error::Format { what: "snapshot", message: "trailing bytes".into() });
        }
    }
    Ok((header, state))
}

/// Ordered `key = value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl std::fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, format_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Summary::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Format { what: "summary", message: format!("line {}: expected `key = value`", n + 1) })?;
            out.push(k.trim(), v.trim());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, f64::MIN_POSITIVE, 6.02e23, -2.5e-300, 0.0] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn snapshot_without_trailer_reads() {
        let s = FlowState { t: 0.5, phi: vec![1.0, 2.0, 3.0, 4.0], phidot: vec![], eig_range: (1.0, 1.0), steps: 3 };
        let h = SnapshotHeader { m: 1, n: 1, nb: 2, nf: 1 };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, h, &s).unwrap();
        let prefix = 4 + 5 * 4 + 8 + 4 * 8;
        let (h2, s2) = read_snapshot(&buf[..prefix]).unwrap();
        assert_eq!(h2, h);
        assert_eq!((s2.t, s2.phi.clone(), s2.steps), (0.5, s.phi.clone(), 0));
        assert!(read_snapshot(&buf[..prefix - 1]).is_err());
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::default();
        s.push("decay.pass", true);
        s.push_f64("decay.constant", 0.1);
        let back = Summary::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get("decay.pass"), Some("true"));
    }
}
