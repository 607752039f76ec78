//! Text loaders and the canonical binary graph format.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic       8 bytes  "UGEGRAPH"
//! version     u32      1
//! n           u64      node count
//! k           u32      attribute count
//! k times:    name (str), sensitive (u8), value count (u32), values (str)*
//! n times:    original node id (str)
//! offsets     (n + 1) x u64
//! neighbors   offsets[n] x u32
//! codes       n * k x u32, row-major by node
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AttributeSchema, AttributedGraph, CanonStats};
use crate::error::{Result, UgeError};

pub const BINARY_MAGIC: &[u8; 8] = b"UGEGRAPH";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub self_loops: usize,
    pub duplicates: usize,
    pub comment_lines: usize,
}

impl LoadStats {
    pub fn warnings(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: AttributedGraph,
    pub stats: LoadStats,
}

pub fn load_graph(edge_path: impl AsRef<Path>, attr_path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let edge_path = edge_path.as_ref();
    let attr_path = attr_path.as_ref();
    let edges = File::open(edge_path).map_err(|e| UgeError::io(edge_path, e))?;
    let attrs = File::open(attr_path).map_err(|e| UgeError::io(attr_path, e))?;
    read_graph(
        BufReader::new(edges),
        &edge_path.display().to_string(),
        attrs,
        &attr_path.display().to_string(),
    )
}

/// Parses an edge list and an attribute table into a canonical graph.
///
/// Node indices follow the row order of the attribute table.
pub fn read_graph<E: BufRead, A: Read>(
    edges: E,
    edge_name: &str,
    attrs: A,
    attr_name: &str,
) -> Result<LoadedGraph> {
    let (ids, schema, codes) = read_attributes(attrs, attr_name)?;
    let lookup: HashMap<&str, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();

    let mut comment_lines = 0;
    let mut raw = Vec::new();
    for (lineno, line) in edges.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            comment_lines += 1;
            continue;
        }
        let fields: Vec<&str> = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(UgeError::Parse {
                file: edge_name.to_string(),
                line: lineno + 1,
                message: format!("expected two node ids, found {}", fields.len()),
            });
        }
        let u = *lookup
            .get(fields[0])
            .ok_or_else(|| UgeError::UnknownNode(fields[0].to_string()))?;
        let v = *lookup
            .get(fields[1])
            .ok_or_else(|| UgeError::UnknownNode(fields[1].to_string()))?;
        raw.push((u, v));
    }

    let (
        graph,
        CanonStats {
            self_loops,
            duplicates,
        },
    ) = AttributedGraph::from_edges(ids, schema, codes, raw)?;
    if graph.num_edges() == 0 {
        return Err(UgeError::EmptyEdgeSet);
    }
    if self_loops > 0 {
        log::warn!("{edge_name}: dropped {self_loops} self-loop(s)");
    }
    if duplicates > 0 {
        log::warn!("{edge_name}: dropped {duplicates} duplicate edge(s)");
    }
    Ok(LoadedGraph {
        graph,
        stats: LoadStats {
            self_loops,
            duplicates,
            comment_lines,
        },
    })
}

fn read_attributes<A: Read>(
    attrs: A,
    attr_name: &str,
) -> Result<(Vec<String>, AttributeSchema, Vec<u32>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(attrs);
    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        UgeError::Parse {
            file: attr_name.to_string(),
            line,
            message: e.to_string(),
        }
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(UgeError::Parse {
            file: attr_name.to_string(),
            line: 1,
            message: "missing header row".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let k = names.len();
    let mut schema = AttributeSchema::new(names, vec![Vec::new(); k])?;
    let mut ids = Vec::new();
    let mut codes = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != k + 1 {
            return Err(UgeError::RaggedRow {
                line,
                found: rec.len(),
                expected: k + 1,
            });
        }
        let id = rec[0].to_string();
        if seen.insert(id.clone(), line).is_some() {
            return Err(UgeError::Parse {
                file: attr_name.to_string(),
                line,
                message: format!("duplicate node id `{id}`"),
            });
        }
        for attr in 0..k {
            codes.push(schema.intern(attr, &rec[attr + 1]));
        }
        ids.push(id);
    }
    Ok((ids, schema, codes))
}

pub fn write_edge_file<W: Write>(g: &AttributedGraph, header: &[String], mut w: W) -> Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for (u, v) in g.edges() {
        writeln!(
            w,
            "{} {}",
            g.original_id(u as usize),
            g.original_id(v as usize)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_attribute_file<W: Write>(
    g: &AttributedGraph,
    header: &[String],
    mut w: W,
) -> Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    let schema = g.schema();
    let mut cols = vec!["id".to_string()];
    cols.extend(schema.names().iter().cloned());
    writeln!(w, "{}", cols.join(","))?;
    for u in 0..g.num_nodes() {
        let mut row = vec![g.original_id(u).to_string()];
        for (attr, &c) in g.attributes(u).iter().enumerate() {
            row.push(schema.values(attr)[c as usize].clone());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn put_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn save_graph_binary<W: Write>(g: &AttributedGraph, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    let schema = g.schema();
    w.write_all(BINARY_MAGIC)?;
    put_u32(&mut w, BINARY_VERSION)?;
    put_u64(&mut w, g.num_nodes() as u64)?;
    put_u32(&mut w, schema.num_attributes() as u32)?;
    for attr in 0..schema.num_attributes() {
        put_str(&mut w, schema.name(attr))?;
        w.write_all(&[schema.is_sensitive(attr) as u8])?;
        put_u32(&mut w, schema.values(attr).len() as u32)?;
        for v in schema.values(attr) {
            put_str(&mut w, v)?;
        }
    }
    for id in g.original_ids() {
        put_str(&mut w, id)?;
    }
    for &o in g.offsets() {
        put_u64(&mut w, o as u64)?;
    }
    for &v in g.neighbor_array() {
        put_u32(&mut w, v)?;
    }
    for &c in g.attribute_codes() {
        put_u32(&mut w, c)?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| UgeError::Format("unexpected end of data".into()))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| UgeError::Format("unexpected end of data".into()))?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| UgeError::Format("unexpected end of data".into()))?;
        Ok(u64::from_le_bytes(b))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.bytes(len)?).map_err(|_| UgeError::Format("invalid utf-8".into()))
    }
}

pub fn read_graph_binary<R: Read>(r: R) -> Result<AttributedGraph> {
    let mut c = Cursor {
        inner: BufReader::new(r),
    };
    if c.bytes(8)? != BINARY_MAGIC {
        return Err(UgeError::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != BINARY_VERSION {
        return Err(UgeError::Format(format!("unsupported version {version}")));
    }
    let n = c.u64()? as usize;
    let k = c.u32()? as usize;
    let mut names = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut mask = Vec::with_capacity(k);
    for _ in 0..k {
        names.push(c.string()?);
        mask.push(c.u8()? != 0);
        let nv = c.u32()? as usize;
        let mut dict = Vec::with_capacity(nv);
        for _ in 0..nv {
            dict.push(c.string()?);
        }
        values.push(dict);
    }
    let mut schema = AttributeSchema::new(names, values)?;
    schema.set_sensitive_mask(&mask)?;
    let ids = (0..n).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
    let offsets = (0..=n)
        .map(|_| c.u64().map(|x| x as usize))
        .collect::<Result<Vec<_>>>()?;
    let m = *offsets.last().unwrap_or(&0);
    let neighbors = (0..m).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let codes = (0..n * k).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    AttributedGraph::from_csr(ids, schema, codes, offsets, neighbors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(edges: &str, attrs: &str) -> Result<LoadedGraph> {
        read_graph(edges.as_bytes(), "edges", attrs.as_bytes(), "attrs")
    }

    #[test]
    fn three_node_file() {
        let lg = load("1 2\n1,3\n", "id,gender\n1,F\n2,F\n3,M\n").unwrap();
        let g = lg.graph;
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_directed_edges(), 4);
        assert_eq!(g.schema().num_attributes(), 1);
        assert_eq!(g.schema().values(0), &["F".to_string(), "M".to_string()]);
    }

    #[test]
    fn self_loop_dropped_with_warning_count() {
        let lg = load("# comment\n1 2\n2 2\n", "id,g\n1,F\n2,M\n").unwrap();
        assert_eq!(lg.stats.self_loops, 1);
        assert_eq!(lg.stats.warnings(), 1);
        assert_eq!(lg.stats.comment_lines, 1);
        assert_eq!(lg.graph.num_edges(), 1);
    }

    #[test]
    fn ids_densified_in_attribute_order() {
        let lg = load("a c\n", "id,g\nc,x\nb,y\na,x\n").unwrap();
        let g = lg.graph;
        assert_eq!(g.original_ids(), &["c", "b", "a"]);
        assert!(g.has_edge(0, 2));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            load("1 9\n", "id,g\n1,F\n2,M\n"),
            Err(UgeError::UnknownNode(id)) if id == "9"
        ));
        assert!(matches!(
            load("1 1\n", "id,g\n1,F\n"),
            Err(UgeError::EmptyEdgeSet)
        ));
        assert!(matches!(
            load("1 2\n", "id,g\n1,F\n2\n"),
            Err(UgeError::RaggedRow {
                found: 1,
                expected: 2,
                ..
            })
        ));
        assert!(matches!(
            load("1 2 3\n", "id,g\n1,F\n2,M\n3,F\n"),
            Err(UgeError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(read_graph_binary(&b"NOTAGRAPH...."[..]).is_err());
        let lg = load("1 2\n", "id,g\n1,F\n2,M\n").unwrap();
        let mut buf = Vec::new();
        save_graph_binary(&lg.graph, &mut buf).unwrap();
        assert_eq!(&buf[..8], BINARY_MAGIC);
        buf.truncate(buf.len() - 2);
        assert!(read_graph_binary(&buf[..]).is_err());
    }
}
