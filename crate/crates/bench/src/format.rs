//! Plain-text instance files.
//!
//! ```text
//! quadsub-instance v1
//! n 3
//! d 2
//! bound 1
//! lambda 0.125
//! base identity          | base diag b1 .. bd | base dense, then d rows
//! u_11 u_12
//! ...
//! ```
//! Floats use the shortest representation that round-trips.

use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use quadsub::{DiversityFamily, GroundVectors, Instance, Matrix};

pub const MAGIC: &str = "quadsub-instance v1";

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub vectors: GroundVectors,
    pub family: DiversityFamily,
}

impl InstanceFile {
    pub fn instance(&self) -> Result<Instance> {
        Ok(Instance::new(self.vectors.clone(), Arc::new(self.family.clone()))?)
    }
}

fn push_row(out: &mut String, row: &[f64]) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

fn is_diagonal(m: &Matrix) -> bool {
    (0..m.rows()).all(|i| (0..m.cols()).all(|j| i == j || m[(i, j)] == 0.0))
}

pub fn write(file: &InstanceFile) -> String {
    let gv = &file.vectors;
    let base = file.family.base();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "n {}", gv.n());
    let _ = writeln!(out, "d {}", gv.d());
    let _ = writeln!(out, "bound {:?}", gv.norm_bound());
    let _ = writeln!(out, "lambda {:?}", file.family.lambda());
    if *base == Matrix::identity(gv.d()) {
        out.push_str("base identity\n");
    } else if is_diagonal(base) {
        out.push_str("base diag ");
        let diag: Vec<f64> = (0..gv.d()).map(|i| base[(i, i)]).collect();
        push_row(&mut out, &diag);
    } else {
        out.push_str("base dense\n");
        for i in 0..gv.d() {
            push_row(&mut out, base.row(i));
        }
    }
    for i in 0..gv.n() {
        push_row(&mut out, gv.row(i));
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((no, l)) => return Ok((no + 1, l.trim())),
                None => bail!("unexpected end of file"),
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (no, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((no, v.trim())),
            _ => bail!("line {no}: expected `{key} <value>`"),
        }
    }
}

fn floats(no: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().with_context(|| format!("line {no}: bad number `{t}`")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(vals.len() == expected, "line {no}: expected {expected} values, found {}", vals.len());
    Ok(vals)
}

pub fn parse(text: &str) -> Result<InstanceFile> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.next()?;
    ensure!(magic == MAGIC, "not a v1 instance file (header `{magic}`)");
    let (no, n) = lines.field("n")?;
    let n: usize = n.parse().with_context(|| format!("line {no}: bad n"))?;
    let (no, d) = lines.field("d")?;
    let d: usize = d.parse().with_context(|| format!("line {no}: bad d"))?;
    ensure!(n > 0 && d > 0, "n and d must be positive");
    let (no, bound) = lines.field("bound")?;
    let bound = floats(no, bound, 1)?[0];
    let (no, lambda) = lines.field("lambda")?;
    let lambda = floats(no, lambda, 1)?[0];
    let (no, base) = lines.field("base")?;
    let base = match base.split_once(' ').map_or((base, ""), |(k, v)| (k, v)) {
        ("identity", "") => Matrix::identity(d),
        ("diag", rest) => Matrix::diagonal(&floats(no, rest, d)?),
        ("dense", "") => {
            let mut rows = Vec::with_capacity(d);
            for _ in 0..d {
                let (no, l) = lines.next()?;
                rows.push(floats(no, l, d)?);
            }
            Matrix::from_rows(&rows)?
        }
        _ => bail!("line {no}: base must be identity, diag or dense"),
    };
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, l) = lines.next()?;
        rows.push(floats(no, l, d)?);
    }
    if let Ok((no, _)) = lines.next() {
        bail!("line {no}: trailing data after {n} vectors");
    }
    Ok(InstanceFile {
        vectors: GroundVectors::from_rows(&rows, Some(bound))?,
        family: DiversityFamily::new(base, lambda)?,
    })
}
