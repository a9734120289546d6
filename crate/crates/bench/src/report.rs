use std::io::Write;

use anyhow::Result;

/// Bumped whenever a column is added, removed or changes meaning.
pub const SCHEMA: &str = "quadsub-bench/1";

pub const HEADER: [&str; 18] = [
    "schema", "row", "seed", "algo", "n", "d", "k", "eps", "delta", "f", "opt", "ratio", "step_ms", "total_ms",
    "chain_len", "fallbacks", "deletes", "queries",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub seed: u64,
    pub algo: &'static str,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    pub f: f64,
    pub opt: Option<f64>,
    pub step_ms: f64,
    pub total_ms: f64,
    pub chain_len: usize,
    pub fallbacks: usize,
    pub deletes: usize,
    pub queries: usize,
}

impl Row {
    fn ratio(&self) -> Option<f64> {
        self.opt.map(|o| if o > 0.0 { self.f / o } else { 1.0 })
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub struct Report<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> Report<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        Ok(Self { out })
    }

    fn record(&mut self, label: &str, seed: String, r: &Row, counts: [String; 4]) -> Result<()> {
        let opt = r.opt.map(|v| v.to_string()).unwrap_or_default();
        let ratio = r.ratio().map(|v| v.to_string()).unwrap_or_default();
        let [chain_len, fallbacks, deletes, queries] = counts;
        self.out.write_record([
            SCHEMA.to_string(),
            label.to_string(),
            seed,
            r.algo.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.k.to_string(),
            r.eps.to_string(),
            r.delta.to_string(),
            r.f.to_string(),
            opt,
            ratio,
            format!("{:.6}", r.step_ms),
            format!("{:.6}", r.total_ms),
            chain_len,
            fallbacks,
            deletes,
            queries,
        ])?;
        Ok(())
    }

    /// One line per repeat followed by a `median` line.
    pub fn group(&mut self, rows: &[Row]) -> Result<()> {
        for (i, r) in rows.iter().enumerate() {
            let counts = [r.chain_len, r.fallbacks, r.deletes, r.queries].map(|c| c.to_string());
            self.record(&i.to_string(), r.seed.to_string(), r, counts)?;
        }
        let Some(first) = rows.first() else {
            return Ok(());
        };
        let med = |f: fn(&Row) -> f64| median(rows.iter().map(f).collect());
        let summary = Row {
            f: med(|r| r.f),
            step_ms: med(|r| r.step_ms),
            total_ms: med(|r| r.total_ms),
            ..first.clone()
        };
        let counts = [
            med(|r| r.chain_len as f64),
            med(|r| r.fallbacks as f64),
            med(|r| r.deletes as f64),
            med(|r| r.queries as f64),
        ]
        .map(|c| c.to_string());
        self.record("median", String::new(), &summary, counts)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
