//! `.tfs` snapshots: a `key=value` text header terminated by a blank line,
//! followed by the raw little-endian `f64` components in node-major order
//! (all components of node 0, then node 1, ...).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::field::{Rank, TensorField};
use super::grid::{Grid, MAX_DIM};
use crate::error::{LabError, Result};

const MAGIC: &str = "tfs=1";

pub fn write_to(field: &TensorField, mut w: impl Write) -> Result<()> {
    let grid = field.grid();
    let o = grid.origin_coord();
    let origin: Vec<String> = o[..grid.dim()].iter().map(|v| v.to_string()).collect();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "dim={}", grid.dim())?;
    writeln!(w, "n_ax={}", grid.n_ax())?;
    writeln!(w, "dx={:e}", grid.dx())?;
    writeln!(w, "origin={}", origin.join(","))?;
    writeln!(w, "rank={}", field.rank().name())?;
    writeln!(w, "components={}", field.n_components())?;
    writeln!(w, "byte_order=little")?;
    writeln!(w, "element=f64")?;
    writeln!(w, "layout=node_major")?;
    writeln!(w)?;
    let nc = field.n_components();
    let mut buf = Vec::with_capacity(8 * nc * grid.len());
    for node in 0..grid.len() {
        for c in 0..nc {
            buf.extend_from_slice(&field.get(node, c).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_from(r: impl Read) -> Result<TensorField> {
    let mut r = BufReader::new(r);
    let mut header = std::collections::HashMap::new();
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(LabError::Format("header not terminated".into()));
        }
        let l = line.trim_end();
        if first {
            if l != MAGIC {
                return Err(LabError::Format(format!("bad magic line {l:?}")));
            }
            first = false;
            continue;
        }
        if l.is_empty() {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| LabError::Format(format!("bad header line {l:?}")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let get =
        |k: &str| header.get(k).map(String::as_str).ok_or_else(|| LabError::Format(format!("missing header key {k}")));
    let parse_usize =
        |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| LabError::Format(format!("bad value for {k}"))) };
    if get("byte_order")? != "little" || get("element")? != "f64" || get("layout")? != "node_major" {
        return Err(LabError::Format("unsupported encoding".into()));
    }
    let dim = parse_usize("dim")?;
    let n_ax = parse_usize("n_ax")?;
    let dx: f64 = get("dx")?.parse().map_err(|_| LabError::Format("bad dx".into()))?;
    let mut origin = [0; MAX_DIM];
    let parts: Vec<&str> = get("origin")?.split(',').collect();
    if parts.len() != dim {
        return Err(LabError::Format("origin arity does not match dim".into()));
    }
    for (o, p) in origin.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| LabError::Format("bad origin".into()))?;
    }
    let grid = Grid::with_origin(dim, n_ax, dx, origin).map_err(|e| LabError::Format(e.to_string()))?;
    let rank = Rank::from_name(get("rank")?).ok_or_else(|| LabError::Format("unknown rank".into()))?;
    let nc = parse_usize("components")?;
    if nc != rank.components(dim) {
        return Err(LabError::Format("component count does not match rank".into()));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * nc * grid.len() {
        return Err(LabError::Format(format!("expected {} data bytes, found {}", 8 * nc * grid.len(), bytes.len())));
    }
    let mut field = TensorField::zeros(grid, rank);
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        field.set(k / nc, k % nc, v);
    }
    Ok(field)
}

pub fn write_snapshot(field: &TensorField, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_to(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<TensorField> {
    read_from(std::fs::File::open(path)?)
}
