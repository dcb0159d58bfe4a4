//! Field files: the binary `CSRF1` format, legacy VTK structured points,
//! and JSON documents.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CosseratField, GridDomain, NodeClass, Shape};
use crate::so3::Vec3;

pub const MAGIC: &[u8; 5] = b"CSRF1";

fn mask_byte(class: NodeClass, dirichlet: bool) -> u8 {
    class as u8 | if dirichlet { 4 } else { 0 }
}

fn parse_mask(b: u8) -> Result<(NodeClass, bool)> {
    let class = match b & 3 {
        0 => NodeClass::Outside,
        1 => NodeClass::Interior,
        2 => NodeClass::Boundary,
        _ => return Err(Error::Format(format!("bad mask byte {b}"))),
    };
    if b & !7 != 0 {
        return Err(Error::Format(format!("bad mask byte {b}")));
    }
    Ok((class, b & 4 != 0))
}

/// Serializes a field as `CSRF1`: magic, shape tag (u8), bounding box
/// (6 × f64), h (f64), node dims (3 × u32), then φ and n as N × 3 f64 and
/// the mask as N bytes (low two bits node class, bit 2 Dirichlet flag).
/// Little-endian, nodes in index order with x fastest.
pub fn write_field<W: Write>(f: &CosseratField, mut w: W) -> Result<()> {
    let d = &f.domain;
    let (min, max) = d.shape.bounding_box();
    let mut buf = Vec::with_capacity(64 + d.node_count() * 49);
    buf.extend_from_slice(MAGIC);
    buf.push(d.shape.tag());
    for v in min.iter().chain(max.iter()).chain(std::iter::once(&d.h)) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for n in d.dims {
        let n = u32::try_from(n).map_err(|_| Error::InvalidInput("grid too large for CSRF1".into()))?;
        buf.extend_from_slice(&n.to_le_bytes());
    }
    for arr in [&f.phi, &f.n] {
        for v in arr.iter() {
            for c in v.iter() {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    buf.extend((0..d.node_count()).map(|i| mask_byte(d.mask[i], f.dirichlet[i])));
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| Error::Format("file is truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Format("non-finite value".into()))
        }
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

pub fn read_field<R: Read>(mut r: R) -> Result<CosseratField> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(5)? != MAGIC {
        return Err(Error::Format("missing CSRF1 magic".into()));
    }
    let tag = c.take(1)?[0];
    let min = c.vec3()?;
    let max = c.vec3()?;
    let h = c.f64()?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(c.take(4)?.try_into().unwrap()) as usize;
    }
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| Error::Format("node count overflows".into()))?;
    if count.checked_mul(49).is_none_or(|b| b != data.len() - c.pos) {
        return Err(Error::Format(format!("payload of {} bytes does not match {count} nodes", data.len() - c.pos)));
    }
    let shape = Shape::from_tag(tag, min, max).map_err(|e| Error::Format(e.to_string()))?;
    let phi = (0..count).map(|_| c.vec3()).collect::<Result<Vec<_>>>()?;
    let n = (0..count).map(|_| c.vec3()).collect::<Result<Vec<_>>>()?;
    if let Some(bad) = n.iter().find(|v| (v.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::Format(format!("axis of norm {} is not a unit vector", bad.norm())));
    }
    let (mask, dirichlet): (Vec<NodeClass>, Vec<bool>) = c.take(count)?.iter().map(|&b| parse_mask(b)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let domain = GridDomain::from_parts(shape, h, dims, mask).map_err(|e| Error::Format(e.to_string()))?;
    let f = CosseratField { domain, phi, n, dirichlet };
    f.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(f)
}

pub fn save_field(f: &CosseratField, path: &Path) -> Result<()> {
    write_field(f, std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn load_field(path: &Path) -> Result<CosseratField> {
    read_field(BufReader::new(fs::File::open(path)?))
}

/// Legacy VTK ASCII structured points with `phi`, `n` and `mask` point data.
/// The title line carries the domain shape as JSON so the file reads back.
pub fn write_vtk<W: Write>(f: &CosseratField, w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let d = &f.domain;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "cosserat {}", serde_json::to_string(&d.shape)?)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", d.dims[0], d.dims[1], d.dims[2])?;
    writeln!(w, "ORIGIN {} {} {}", d.origin.x, d.origin.y, d.origin.z)?;
    writeln!(w, "SPACING {} {} {}", d.h, d.h, d.h)?;
    writeln!(w, "POINT_DATA {}", d.node_count())?;
    for (name, arr) in [("phi", &f.phi), ("n", &f.n)] {
        writeln!(w, "VECTORS {name} double")?;
        for v in arr.iter() {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
    }
    writeln!(w, "SCALARS mask int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for i in 0..d.node_count() {
        writeln!(w, "{}", mask_byte(d.mask[i], f.dirichlet[i]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vtk<R: Read>(r: R) -> Result<CosseratField> {
    let bad = |m: &str| Error::Format(format!("VTK: {m}"));
    let mut lines = BufReader::new(r).lines();
    let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("unexpected end of file"))?.map_err(Error::from) };
    if !next()?.starts_with("# vtk DataFile") {
        return Err(bad("missing header"));
    }
    let title = next()?;
    let shape: Shape = serde_json::from_str(title.strip_prefix("cosserat ").ok_or_else(|| bad("title does not describe a field"))?)
        .map_err(|e| bad(&e.to_string()))?;
    if next()?.trim() != "ASCII" || next()?.trim() != "DATASET STRUCTURED_POINTS" {
        return Err(bad("expected ASCII structured points"));
    }
    let nums = |line: String, key: &str| -> Result<Vec<f64>> {
        let rest = line.strip_prefix(key).ok_or_else(|| bad(&format!("expected {key}")))?;
        rest.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number {t}")))).collect()
    };
    let dims_f = nums(next()?, "DIMENSIONS")?;
    let _origin = nums(next()?, "ORIGIN")?;
    let spacing = nums(next()?, "SPACING")?;
    let count_f = nums(next()?, "POINT_DATA")?;
    if dims_f.len() != 3 || spacing.len() != 3 || count_f.len() != 1 {
        return Err(bad("malformed header"));
    }
    let dims = [dims_f[0] as usize, dims_f[1] as usize, dims_f[2] as usize];
    let count = count_f[0] as usize;
    if count != dims[0] * dims[1] * dims[2] {
        return Err(bad("POINT_DATA does not match DIMENSIONS"));
    }
    let mut read_vectors = |name: &str| -> Result<Vec<Vec3>> {
        if next()?.trim() != format!("VECTORS {name} double") {
            return Err(bad(&format!("expected vectors {name}")));
        }
        (0..count)
            .map(|_| {
                let v = nums(format!(" {}", next()?), "")?;
                if v.len() != 3 {
                    return Err(bad("vector needs three components"));
                }
                Ok(Vec3::new(v[0], v[1], v[2]))
            })
            .collect()
    };
    let phi = read_vectors("phi")?;
    let n = read_vectors("n")?;
    if next()?.trim() != "SCALARS mask int 1" || next()?.trim() != "LOOKUP_TABLE default" {
        return Err(bad("expected mask scalars"));
    }
    let mut mask = Vec::with_capacity(count);
    let mut dirichlet = Vec::with_capacity(count);
    for _ in 0..count {
        let b: u8 = next()?.trim().parse().map_err(|_| bad("bad mask value"))?;
        let (c, dr) = parse_mask(b)?;
        mask.push(c);
        dirichlet.push(dr);
    }
    let domain = GridDomain::from_parts(shape, spacing[0], dims, mask)?;
    let f = CosseratField { domain, phi, n, dirichlet };
    f.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(f)
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(value, std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(fs::File::open(path)?))?)
}
