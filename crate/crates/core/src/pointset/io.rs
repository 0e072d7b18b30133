//! Point file formats.
//!
//! * CSV: one point per row, decimal coordinates, optional header row.
//! * KDB1 binary cache: magic `KDB1`, little-endian `u64` N, `u32` d, then
//!   `N·d` little-endian `f64` coordinates in point-major order.

use std::io::{Read, Write};

use super::sites::{BoundingBox, DataSiteSet};
use crate::error::{Error, Result};

pub const KDB1_MAGIC: &[u8; 4] = b"KDB1";

/// Raw coordinates read from a point file, before site validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        if self.dim == 0 { 0 } else { self.coords.len() / self.dim }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Validates into a site set; the domain defaults to the bounding box.
    pub fn into_sites(self, domain: Option<BoundingBox>) -> Result<DataSiteSet> {
        match domain {
            Some(d) => DataSiteSet::new(self.dim, self.coords, d),
            None => DataSiteSet::with_bounding_domain(self.dim, self.coords),
        }
    }
}

pub fn parse_points_csv<R: Read>(input: R, has_header: bool) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut dim = 0usize;
    let mut coords = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 1 + usize::from(has_header);
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if k == 0 {
            dim = rec.len();
            if dim == 0 {
                return Err(Error::Parse { line, message: "empty row".into() });
            }
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: "non-finite coordinate".into() });
            }
            coords.push(v);
        }
    }
    if coords.is_empty() {
        return Err(Error::Parse { line: 0, message: "no points".into() });
    }
    Ok(PointCloud { dim, coords })
}

pub fn write_points_csv<W: Write>(sites: &DataSiteSet, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for p in sites.points() {
        w.write_record(p.iter().map(|v| format!("{v:?}")))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn encode_kdb1(sites: &DataSiteSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * sites.coords().len());
    out.extend_from_slice(KDB1_MAGIC);
    out.extend_from_slice(&(sites.len() as u64).to_le_bytes());
    out.extend_from_slice(&(sites.dim() as u32).to_le_bytes());
    for v in sites.coords() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_kdb1(bytes: &[u8]) -> Result<PointCloud> {
    let err = |message: &str| Error::Parse { line: 0, message: message.to_string() };
    if bytes.len() < 16 || &bytes[..4] != KDB1_MAGIC {
        return Err(err("missing KDB1 header"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let dim = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if dim == 0 || n == 0 {
        return Err(err("empty point set"));
    }
    let count = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(dim))
        .ok_or_else(|| err("point count overflows"))?;
    let payload = &bytes[16..];
    if count.checked_mul(8) != Some(payload.len()) {
        return Err(err("payload length does not match header"));
    }
    let coords: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(err("non-finite coordinate"));
    }
    Ok(PointCloud { dim, coords })
}
