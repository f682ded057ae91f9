//! Seeded generators for the three benchmark families and a returns-CSV reader.
//!
//! Randomness comes from ChaCha8 streams. Each named field draws from its own stream,
//! seeded by hashing `(seed, name)` (FNV-1a over the name, folded with the seed through
//! splitmix64), so adding a field never shifts the values of existing ones and every
//! instance is a pure function of `(seed, shape)`.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CsvIssue, Error, Result};
use crate::problem::Instance;
use crate::scalar::Scalar;

/// Redraws of `a` allowed before [`gen_example1`] gives up on finding a feasible instance.
const MAX_REDRAWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    /// Independent stream for the field `name`.
    pub fn stream(self, name: &str) -> ChaCha8Rng {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in name.bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(splitmix64(self.0 ^ splitmix64(h)))
    }

    /// Seed for the `k`-th derived instance (benchmark repetitions, check trials).
    pub fn derive(self, k: u64) -> Seed {
        Seed(splitmix64(
            self.0.wrapping_add(splitmix64(k.wrapping_add(1))),
        ))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

fn cast<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

/// `y ~ U[-3, 0)^n`, `a ~ U[0, 20)^n`, `b = 0.45 max(a)`; `a` is redrawn while
/// `min(a) > b`, which for `n = 1` is always the case.
pub fn gen_example1<T: Scalar>(n: usize, seed: Seed) -> Result<Instance<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let y = uniform_vec(&mut seed.stream("y"), n, -3.0, 0.0);
    let mut a_rng = seed.stream("a");
    for _ in 0..MAX_REDRAWS {
        let a = uniform_vec(&mut a_rng, n, 0.0, 20.0);
        let max_a = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
        let b = 0.45 * max_a;
        if min_a <= b {
            return Instance::new(cast(y), cast(a), T::lit(b));
        }
    }
    Err(Error::InvalidParameter(format!(
        "no feasible draw of a in {MAX_REDRAWS} attempts for n = {n}"
    )))
}

/// `y ~ U[-3, 0)^n`, `a = (51, 50, ..., 50)`, `b = 50`.
pub fn gen_example2<T: Scalar>(n: usize, seed: Seed) -> Result<Instance<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let y = uniform_vec(&mut seed.stream("y"), n, -3.0, 0.0);
    let mut a = vec![50.0; n];
    a[0] = 51.0;
    Instance::new(cast(y), cast(a), T::lit(50.0))
}

/// Observed asset returns, one observation per row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnsTable {
    returns: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl ReturnsTable {
    pub fn new(returns: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = returns.first().map_or(0, Vec::len);
        if returns.is_empty() || n == 0 {
            return Err(Error::Empty("returns"));
        }
        if let Some(row) = returns.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "returns row",
                expected: n,
                found: row.len(),
            });
        }
        if returns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("returns"));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "labels",
                    expected: n,
                    found: l.len(),
                });
            }
        }
        Ok(Self { returns, labels })
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.returns.len()
    }

    /// Number of assets.
    pub fn n(&self) -> usize {
        self.returns[0].len()
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Mean return per asset and the deviation rows `mean - xi_i`.
    pub fn mean_and_deviations(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.m() as f64;
        let mean: Vec<f64> = (0..self.n())
            .map(|j| self.returns.iter().map(|r| r[j]).sum::<f64>() / m)
            .collect();
        let dev = self
            .returns
            .iter()
            .map(|r| mean.iter().zip(r).map(|(mu, v)| mu - v).collect())
            .collect();
        (mean, dev)
    }

    /// Parses CSV text. A first row with any non-numeric cell is taken as asset labels.
    pub fn from_reader<R: Read>(rdr: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(rdr);
        let mut labels = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        let mut last_line = 0;
        for record in reader.records() {
            let record = record.map_err(|e| Error::Csv {
                line: e.position().map_or(0, |p| p.line()),
                kind: CsvIssue::Reader(e.to_string()),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            last_line = line;
            if let Some(w) = width {
                if record.len() != w {
                    return Err(Error::Csv {
                        line,
                        kind: CsvIssue::Ragged {
                            expected: w,
                            found: record.len(),
                        },
                    });
                }
            } else {
                width = Some(record.len());
                if record.iter().any(|c| c.parse::<f64>().is_err()) {
                    labels = Some(record.iter().map(str::to_string).collect());
                    continue;
                }
            }
            let row = record
                .iter()
                .map(|cell| match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(CsvIssue::NotFinite(cell.to_string())),
                    Err(_) => Err(CsvIssue::NotNumeric(cell.to_string())),
                })
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|kind| Error::Csv { line, kind })?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Csv {
                line: last_line + 1,
                kind: CsvIssue::EmptyFile,
            });
        }
        Self::new(rows, labels)
    }
}

pub fn read_returns_csv(path: &Path) -> Result<ReturnsTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ReturnsTable::from_reader(std::io::BufReader::new(file))
}

/// Portfolio projection instance: with `mu` the mean returns and `A` the deviation rows,
/// `y = u + A'v` for `u ~ U[0,1)^n`, `v ~ U[0,1)^m`, and the constraint `mu'x >= rho`
/// with `rho = min(mu) r`, `r ~ U[0,1)`, written as `(-mu)'x <= -rho`.
pub fn gen_example3<T: Scalar>(tbl: &ReturnsTable, seed: Seed) -> Result<Instance<T>> {
    let (mean, dev) = tbl.mean_and_deviations();
    let u = uniform_vec(&mut seed.stream("u"), tbl.n(), 0.0, 1.0);
    let v = uniform_vec(&mut seed.stream("v"), tbl.m(), 0.0, 1.0);
    let r: f64 = seed.stream("rho").random();
    let rho = mean.iter().copied().fold(f64::INFINITY, f64::min) * r;
    let y: Vec<f64> = (0..tbl.n())
        .map(|j| u[j] + dev.iter().zip(&v).map(|(row, vi)| row[j] * vi).sum::<f64>())
        .collect();
    let a: Vec<f64> = mean.iter().map(|m| -m).collect();
    Instance::new(cast(y), cast(a), T::lit(-rho))
}
