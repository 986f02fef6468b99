//! Dense matrix files.
//!
//! Two encodings share one reader:
//! - binary: magic `TAGMAT01`, u64 rows, u64 cols, rows*cols f64, little-endian;
//! - CSV: first line `rows,cols`, then one comma-separated row per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"TAGMAT01";

pub fn read_matrix(path: &Path) -> Result<Tensor> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 8];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    drop(file);
    if n == 8 && &magic == MATRIX_MAGIC {
        read_binary(path)
    } else {
        read_csv(path)
    }
}

fn read_binary(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    let rows = r
        .read_u64::<LittleEndian>()
        .map_err(|e| Error::io(path, e))? as usize;
    let cols = r
        .read_u64::<LittleEndian>()
        .map_err(|e| Error::io(path, e))? as usize;
    let mut data = vec![0.0; rows * cols];
    r.read_f64_into::<LittleEndian>(&mut data)
        .map_err(|e| Error::io(path, e))?;
    if r.read(&mut [0u8; 1]).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::parse(path, 1, "trailing bytes after matrix payload"));
    }
    Tensor::matrix(rows, cols, data)
}

fn read_csv(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing `rows,cols` header"))?
        .map_err(|e| Error::io(path, e))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(path, 1, format!("bad header {header:?}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::parse(path, 1, "header must be `rows,cols`"));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let before = data.len();
        for field in line.split(',') {
            data.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("invalid number {field:?}")))?,
            );
        }
        if data.len() - before != cols {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {cols} columns, found {}", data.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(
            path,
            seen + 1,
            format!("header says {rows} rows, found {seen}"),
        ));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::parse(
            path,
            pos / cols.max(1) + 2,
            "non-finite value",
        ));
    }
    Tensor::matrix(rows, cols, data)
}

pub fn write_matrix_binary(path: &Path, m: &Tensor) -> Result<()> {
    let (rows, cols) = m.dims2("write_matrix")?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MATRIX_MAGIC).map_err(io)?;
    w.write_u64::<LittleEndian>(rows as u64).map_err(io)?;
    w.write_u64::<LittleEndian>(cols as u64).map_err(io)?;
    for &v in m.data() {
        w.write_f64::<LittleEndian>(v).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_matrix_csv(path: &Path, m: &Tensor) -> Result<()> {
    let (rows, cols) = m.dims2("write_matrix")?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{rows},{cols}").map_err(io)?;
    for r in 0..rows {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
