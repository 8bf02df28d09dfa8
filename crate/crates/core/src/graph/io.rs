//! Edge-list files.
//!
//! Binary layout, little-endian: magic `GHSF`, `u64` vertex count, `u64` edge
//! count, then per edge `u32 u`, `u32 v`, `f64 w`.
//!
//! The text layout has one `u v w` edge per line. Blank lines and lines
//! starting with `#` are skipped, except a `# vertices N` line which sets the
//! vertex count (otherwise it is one past the largest id seen).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Edge, EdgeList};
use crate::Error;

const MAGIC: &[u8; 4] = b"GHSF";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeFormat {
    #[default]
    Binary,
    Text,
}

impl FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "binary" | "bin" => Ok(EdgeFormat::Binary),
            "text" | "txt" => Ok(EdgeFormat::Text),
            other => Err(Error::param(format!("unknown edge-list format {other:?}"))),
        }
    }
}

impl EdgeFormat {
    /// Binary if the file starts with the magic, text otherwise.
    pub fn detect(path: &Path) -> Result<EdgeFormat, Error> {
        let mut head = [0u8; 4];
        let mut f = File::open(path).map_err(io_err(path))?;
        let n = f.read(&mut head).map_err(io_err(path))?;
        Ok(if n == 4 && &head == MAGIC { EdgeFormat::Binary } else { EdgeFormat::Text })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn write_edge_list(path: &Path, g: &EdgeList, format: EdgeFormat) -> Result<(), Error> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_edge_list_to(&mut out, g, format).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn read_edge_list(path: &Path, format: EdgeFormat) -> Result<EdgeList, Error> {
    let file = File::open(path).map_err(io_err(path))?;
    read_edge_list_from(BufReader::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io { path: path.to_path_buf(), source },
        other => other,
    })
}

pub fn write_edge_list_to<W: Write>(out: &mut W, g: &EdgeList, format: EdgeFormat) -> std::io::Result<()> {
    match format {
        EdgeFormat::Binary => {
            out.write_all(MAGIC)?;
            out.write_all(&(g.num_vertices as u64).to_le_bytes())?;
            out.write_all(&(g.edges.len() as u64).to_le_bytes())?;
            for e in &g.edges {
                out.write_all(&e.u.to_le_bytes())?;
                out.write_all(&e.v.to_le_bytes())?;
                out.write_all(&e.w.to_le_bytes())?;
            }
        }
        EdgeFormat::Text => {
            writeln!(out, "# vertices {}", g.num_vertices)?;
            for e in &g.edges {
                // `{:?}` prints the shortest string that parses back to the same f64.
                writeln!(out, "{} {} {:?}", e.u, e.v, e.w)?;
            }
        }
    }
    Ok(())
}

pub fn read_edge_list_from<R: BufRead>(input: R, format: EdgeFormat) -> Result<EdgeList, Error> {
    match format {
        EdgeFormat::Binary => read_binary(input),
        EdgeFormat::Text => read_text(input),
    }
}

fn read_binary<R: Read>(mut input: R) -> Result<EdgeList, Error> {
    let wrap = |source| Error::Io { path: Default::default(), source };
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(wrap)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word).map_err(wrap)?;
    let n = u64::from_le_bytes(word);
    input.read_exact(&mut word).map_err(wrap)?;
    let m = u64::from_le_bytes(word);
    let n = usize::try_from(n).map_err(|_| Error::Format(format!("vertex count {n} too large")))?;

    let mut edges = Vec::with_capacity(m.min(1 << 24) as usize);
    let mut rec = [0u8; 16];
    for i in 0..m {
        input
            .read_exact(&mut rec)
            .map_err(|e| Error::Format(format!("truncated at edge {i} of {m}: {e}")))?;
        let u = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let v = u32::from_le_bytes(rec[4..8].try_into().unwrap());
        let w = f64::from_le_bytes(rec[8..16].try_into().unwrap());
        if u as usize >= n || v as usize >= n {
            return Err(Error::Format(format!("edge {i} ({u}, {v}) out of range for {n} vertices")));
        }
        edges.push(Edge::new(u, v, w));
    }
    Ok(EdgeList::new(n, edges))
}

fn read_text<R: BufRead>(input: R) -> Result<EdgeList, Error> {
    let mut declared = None;
    let mut edges = Vec::new();
    let mut max_id = None::<u32>;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|source| Error::Io { path: Default::default(), source })?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("vertices") {
                let n = it.next().and_then(|s| s.parse::<usize>().ok());
                declared = Some(n.ok_or_else(|| Error::Format(format!("line {}: bad vertex count", lineno + 1)))?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("line {}: expected `u v w`, got {line:?}", lineno + 1));
        let mut it = line.split_whitespace();
        let u: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let v: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let w: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        max_id = max_id.max(Some(u.max(v)));
        edges.push(Edge::new(u, v, w));
    }
    let needed = max_id.map_or(0, |m| m as usize + 1);
    let n = match declared {
        Some(n) if n < needed => {
            return Err(Error::Format(format!("declared {n} vertices but found id {}", needed - 1)))
        }
        Some(n) => n,
        None => needed,
    };
    Ok(EdgeList::new(n, edges))
}
