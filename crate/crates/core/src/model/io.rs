//! Problem files.
//!
//! The binary container starts with the magic `OCPQ1` followed by the
//! dimensions `N, n_x, n_u, n_y, n_yN` as little-endian `u64`. Then come the
//! matrix families as little-endian `f64`, each stage-contiguous and
//! column-major, in the order `Q S R q r A B c C D bl bu`, then the terminal
//! `Q_N q_N C_N bl_N bu_N`, then `x_init`. Infinite bounds are stored as IEEE
//! infinities.
//!
//! The JSON variant uses the same field names. Every family is a list with one
//! flat column-major array per stage; terminal fields are single arrays.
//! Bounds may be numbers, `"inf"`/`"-inf"`, or `null` (unbounded).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{OcpData, StageData, TerminalData};

pub const MAGIC: &[u8; 5] = b"OCPQ1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed problem file: {0}")]
    Format(String),
    #[error("malformed JSON problem: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: usize) -> std::io::Result<()> {
        self.inner.write_all(&(v as u64).to_le_bytes())
    }

    fn values<'a>(&mut self, vals: impl IntoIterator<Item = &'a f64>) -> std::io::Result<()> {
        for v in vals {
            self.inner.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Writes `data` in the binary container format.
pub fn write_problem_binary(data: &OcpData, out: impl Write) -> Result<(), IoError> {
    let mut w = Writer { inner: out };
    w.inner.write_all(MAGIC)?;
    for v in [data.horizon(), data.nx(), data.nu(), data.ny(), data.ny_terminal()] {
        w.u64(v)?;
    }
    let st = &data.stages;
    for s in st {
        w.values(s.q.iter())?;
    }
    for s in st {
        w.values(s.s.iter())?;
    }
    for s in st {
        w.values(s.r.iter())?;
    }
    for s in st {
        w.values(s.q_lin.iter())?;
    }
    for s in st {
        w.values(s.r_lin.iter())?;
    }
    for s in st {
        w.values(s.a.iter())?;
    }
    for s in st {
        w.values(s.b.iter())?;
    }
    for s in st {
        w.values(s.offset.iter())?;
    }
    for s in st {
        w.values(s.c.iter())?;
    }
    for s in st {
        w.values(s.d.iter())?;
    }
    for s in st {
        w.values(s.lower.iter())?;
    }
    for s in st {
        w.values(s.upper.iter())?;
    }
    let t = &data.terminal;
    w.values(t.q.iter())?;
    w.values(t.q_lin.iter())?;
    w.values(t.c.iter())?;
    w.values(t.lower.iter())?;
    w.values(t.upper.iter())?;
    w.values(data.x_init.iter())?;
    w.inner.flush()?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], IoError> {
        if self.pos + n > self.buf.len() {
            return Err(fmt_err(format!("unexpected end of file at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize, IoError> {
        let b: [u8; 8] = self.take(8)?.try_into().unwrap();
        usize::try_from(u64::from_le_bytes(b)).map_err(|_| fmt_err("dimension overflows usize"))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        let b: [u8; 8] = self.take(8)?.try_into().unwrap();
        Ok(f64::from_le_bytes(b))
    }

    fn matrices(&mut self, count: usize, rows: usize, cols: usize) -> Result<Vec<DMatrix<f64>>, IoError> {
        (0..count).map(|_| self.matrix(rows, cols)).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>, IoError> {
        let vals = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok(DMatrix::from_vec(rows, cols, vals))
    }

    fn vectors(&mut self, count: usize, len: usize) -> Result<Vec<DVector<f64>>, IoError> {
        (0..count).map(|_| self.vector(len)).collect()
    }

    fn vector(&mut self, len: usize) -> Result<DVector<f64>, IoError> {
        let vals = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok(DVector::from_vec(vals))
    }
}

/// Parses the binary container format.
pub fn read_problem_binary(bytes: &[u8]) -> Result<OcpData, IoError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(fmt_err("missing OCPQ1 magic"));
    }
    let (n, nx, nu, ny, nyt) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let expected = 8 * (n * (nx * nx + nu * nx + nu * nu + nx + nu + nx * nx + nx * nu + nx + ny * nx + ny * nu + 2 * ny)
        + nx * nx
        + nx
        + nyt * nx
        + 2 * nyt
        + nx);
    if bytes.len() != MAGIC.len() + 40 + expected {
        return Err(fmt_err(format!(
            "payload is {} bytes, dimensions imply {expected}",
            bytes.len().saturating_sub(MAGIC.len() + 40)
        )));
    }
    let q = r.matrices(n, nx, nx)?;
    let s = r.matrices(n, nu, nx)?;
    let rr = r.matrices(n, nu, nu)?;
    let ql = r.vectors(n, nx)?;
    let rl = r.vectors(n, nu)?;
    let a = r.matrices(n, nx, nx)?;
    let b = r.matrices(n, nx, nu)?;
    let c = r.vectors(n, nx)?;
    let cm = r.matrices(n, ny, nx)?;
    let dm = r.matrices(n, ny, nu)?;
    let bl = r.vectors(n, ny)?;
    let bu = r.vectors(n, ny)?;
    let terminal = TerminalData {
        q: r.matrix(nx, nx)?,
        q_lin: r.vector(nx)?,
        c: r.matrix(nyt, nx)?,
        lower: r.vector(nyt)?,
        upper: r.vector(nyt)?,
    };
    let x_init = r.vector(nx)?;
    let stages = (0..n)
        .map(|j| StageData {
            q: q[j].clone(),
            s: s[j].clone(),
            r: rr[j].clone(),
            q_lin: ql[j].clone(),
            r_lin: rl[j].clone(),
            a: a[j].clone(),
            b: b[j].clone(),
            offset: c[j].clone(),
            c: cm[j].clone(),
            d: dm[j].clone(),
            lower: bl[j].clone(),
            upper: bu[j].clone(),
        })
        .collect();
    Ok(OcpData { stages, terminal, x_init })
}

/// A bound value in JSON: a number, `"inf"`/`"-inf"`, or `null`.
#[derive(Clone, Copy, Debug)]
struct Bound(Option<f64>);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) if v == f64::INFINITY => s.serialize_str("inf"),
            Some(v) if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            Some(v) => s.serialize_f64(v),
            None => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
            Null(()),
        }
        match Option::<Raw>::deserialize(d)? {
            None | Some(Raw::Null(())) => Ok(Bound(None)),
            Some(Raw::Num(v)) => Ok(Bound(Some(v))),
            Some(Raw::Text(t)) => match t.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(Bound(Some(f64::INFINITY))),
                "-inf" | "-Infinity" => Ok(Bound(Some(f64::NEG_INFINITY))),
                other => Err(serde::de::Error::custom(format!("invalid bound {other:?}"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonProblem {
    #[serde(rename = "N")]
    horizon: usize,
    n_x: usize,
    n_u: usize,
    n_y: usize,
    #[serde(rename = "n_yN")]
    n_y_terminal: usize,
    #[serde(rename = "Q")]
    q_mat: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    s_mat: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r_mat: Vec<Vec<f64>>,
    #[serde(rename = "q")]
    q_vec: Vec<Vec<f64>>,
    #[serde(rename = "r")]
    r_vec: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a_mat: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b_mat: Vec<Vec<f64>>,
    #[serde(rename = "c")]
    c_vec: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c_mat: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d_mat: Vec<Vec<f64>>,
    bl: Vec<Vec<Bound>>,
    bu: Vec<Vec<Bound>>,
    #[serde(rename = "Q_N")]
    q_terminal: Vec<f64>,
    #[serde(rename = "q_N")]
    q_lin_terminal: Vec<f64>,
    #[serde(rename = "C_N")]
    c_terminal: Vec<f64>,
    #[serde(rename = "bl_N")]
    bl_terminal: Vec<Bound>,
    #[serde(rename = "bu_N")]
    bu_terminal: Vec<Bound>,
    x_init: Vec<f64>,
}

fn per_stage(ms: impl Iterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
    ms.collect()
}

fn bounds(v: &DVector<f64>) -> Vec<Bound> {
    v.iter().map(|&x| Bound(Some(x))).collect()
}

/// Writes `data` as JSON. Infinite bounds become `"inf"`/`"-inf"`.
pub fn write_problem_json(data: &OcpData, out: impl Write) -> Result<(), IoError> {
    let st = &data.stages;
    let flat = |m: &DMatrix<f64>| m.as_slice().to_vec();
    let jp = JsonProblem {
        horizon: data.horizon(),
        n_x: data.nx(),
        n_u: data.nu(),
        n_y: data.ny(),
        n_y_terminal: data.ny_terminal(),
        q_mat: per_stage(st.iter().map(|s| flat(&s.q))),
        s_mat: per_stage(st.iter().map(|s| flat(&s.s))),
        r_mat: per_stage(st.iter().map(|s| flat(&s.r))),
        q_vec: per_stage(st.iter().map(|s| s.q_lin.as_slice().to_vec())),
        r_vec: per_stage(st.iter().map(|s| s.r_lin.as_slice().to_vec())),
        a_mat: per_stage(st.iter().map(|s| flat(&s.a))),
        b_mat: per_stage(st.iter().map(|s| flat(&s.b))),
        c_vec: per_stage(st.iter().map(|s| s.offset.as_slice().to_vec())),
        c_mat: per_stage(st.iter().map(|s| flat(&s.c))),
        d_mat: per_stage(st.iter().map(|s| flat(&s.d))),
        bl: st.iter().map(|s| bounds(&s.lower)).collect(),
        bu: st.iter().map(|s| bounds(&s.upper)).collect(),
        q_terminal: flat(&data.terminal.q),
        q_lin_terminal: data.terminal.q_lin.as_slice().to_vec(),
        c_terminal: flat(&data.terminal.c),
        bl_terminal: bounds(&data.terminal.lower),
        bu_terminal: bounds(&data.terminal.upper),
        x_init: data.x_init.as_slice().to_vec(),
    };
    serde_json::to_writer_pretty(out, &jp)?;
    Ok(())
}

fn mat(name: &str, j: usize, v: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>, IoError> {
    if v.len() != rows * cols {
        return Err(fmt_err(format!("{name}[{j}] has {} entries, expected {}", v.len(), rows * cols)));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v))
}

fn vec_of(name: &str, j: usize, v: &[f64], len: usize) -> Result<DVector<f64>, IoError> {
    if v.len() != len {
        return Err(fmt_err(format!("{name}[{j}] has {} entries, expected {len}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn bound_vec(name: &str, j: usize, v: &[Bound], len: usize, missing: f64) -> Result<DVector<f64>, IoError> {
    if v.len() != len {
        return Err(fmt_err(format!("{name}[{j}] has {} entries, expected {len}", v.len())));
    }
    Ok(DVector::from_iterator(len, v.iter().map(|b| b.0.unwrap_or(missing))))
}

/// Parses the JSON variant.
pub fn read_problem_json(text: &str) -> Result<OcpData, IoError> {
    let jp: JsonProblem = serde_json::from_str(text)?;
    let (n, nx, nu, ny, nyt) = (jp.horizon, jp.n_x, jp.n_u, jp.n_y, jp.n_y_terminal);
    let families = [
        ("Q", jp.q_mat.len()),
        ("S", jp.s_mat.len()),
        ("R", jp.r_mat.len()),
        ("q", jp.q_vec.len()),
        ("r", jp.r_vec.len()),
        ("A", jp.a_mat.len()),
        ("B", jp.b_mat.len()),
        ("c", jp.c_vec.len()),
        ("C", jp.c_mat.len()),
        ("D", jp.d_mat.len()),
        ("bl", jp.bl.len()),
        ("bu", jp.bu.len()),
    ];
    for (name, len) in families {
        if len != n {
            return Err(fmt_err(format!("{name} lists {len} stages, N = {n}")));
        }
    }
    let mut stages = Vec::with_capacity(n);
    for j in 0..n {
        stages.push(StageData {
            q: mat("Q", j, &jp.q_mat[j], nx, nx)?,
            s: mat("S", j, &jp.s_mat[j], nu, nx)?,
            r: mat("R", j, &jp.r_mat[j], nu, nu)?,
            q_lin: vec_of("q", j, &jp.q_vec[j], nx)?,
            r_lin: vec_of("r", j, &jp.r_vec[j], nu)?,
            a: mat("A", j, &jp.a_mat[j], nx, nx)?,
            b: mat("B", j, &jp.b_mat[j], nx, nu)?,
            offset: vec_of("c", j, &jp.c_vec[j], nx)?,
            c: mat("C", j, &jp.c_mat[j], ny, nx)?,
            d: mat("D", j, &jp.d_mat[j], ny, nu)?,
            lower: bound_vec("bl", j, &jp.bl[j], ny, f64::NEG_INFINITY)?,
            upper: bound_vec("bu", j, &jp.bu[j], ny, f64::INFINITY)?,
        });
    }
    let terminal = TerminalData {
        q: mat("Q_N", 0, &jp.q_terminal, nx, nx)?,
        q_lin: vec_of("q_N", 0, &jp.q_lin_terminal, nx)?,
        c: mat("C_N", 0, &jp.c_terminal, nyt, nx)?,
        lower: bound_vec("bl_N", 0, &jp.bl_terminal, nyt, f64::NEG_INFINITY)?,
        upper: bound_vec("bu_N", 0, &jp.bu_terminal, nyt, f64::INFINITY)?,
    };
    let x_init = vec_of("x_init", 0, &jp.x_init, nx)?;
    Ok(OcpData { stages, terminal, x_init })
}

/// Reads a problem file, choosing the format from its first bytes.
pub fn read_problem(path: impl AsRef<Path>) -> Result<OcpData, IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        read_problem_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| fmt_err("neither OCPQ1 binary nor UTF-8 JSON"))?;
        read_problem_json(&text)
    }
}
