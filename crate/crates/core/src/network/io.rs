use std::io::{Read, Write};

use super::AdjacencyMatrix;
use crate::error::{Error, Result};

/// Write the edge list as CSV with header `src,dst` (0-based indices).
pub fn write_edge_csv<W: Write>(a: &AdjacencyMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst"]).map_err(csv_err)?;
    for (i, j) in a.edges() {
        w.write_record([i.to_string(), j.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read an edge-list CSV. When `n` is `None` the node count is one more than
/// the largest index seen. `path` is only used in error messages.
pub fn read_edge_csv<R: Read>(input: R, n: Option<usize>, path: &str) -> Result<AdjacencyMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: format!("expected header `src,dst`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<usize> {
            rec[k].parse::<usize>().map_err(|e| parse_err(path, line, format!("`{}`: {e}", &rec[k])))
        };
        let (i, j) = (field(0)?, field(1)?);
        if i == j {
            return Err(parse_err(path, line, format!("self-loop at node {i}")));
        }
        if let Some(n) = n {
            if i >= n || j >= n {
                return Err(parse_err(path, line, format!("edge ({i},{j}) out of bounds for n={n}")));
            }
        }
        edges.push((i, j));
    }
    let n = n.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
    AdjacencyMatrix::from_edges(n, edges)
}

fn csv_err(e: csv::Error) -> Error {
    Error::from(e)
}

fn parse_err(path: &str, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.into(), line, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_validation() {
        let a = AdjacencyMatrix::from_edges(5, [(0, 1), (4, 2), (2, 0)]).unwrap();
        let mut buf = Vec::new();
        write_edge_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("src,dst\n0,1\n"));
        assert_eq!(read_edge_csv(&buf[..], Some(5), "x").unwrap(), a);

        let err = read_edge_csv("src,dst\n0,1\n2,2\n".as_bytes(), None, "net.csv").unwrap_err();
        assert!(err.to_string().starts_with("net.csv:3:"), "{err}");
        assert!(read_edge_csv("src,dst\n0,7\n".as_bytes(), Some(3), "x").is_err());
        assert!(read_edge_csv("a,b\n0,1\n".as_bytes(), None, "x").is_err());
    }
}
