//! Plain-text signature tables: SCMA codebooks and PDMA pattern columns.
//!
//! Both formats are line based. `#` starts a comment, blank lines are
//! ignored. Codebook files open with `users U`, `resources M` and
//! `codewords J` header lines followed by `U*J` codeword lines of `M`
//! whitespace-separated `re,im` entries. Pattern files hold one column per
//! line as `M` whitespace-separated 0/1 entries.

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::GROUP_SIZE;

const SCMA_DEFAULT: &str = include_str!("../../data/scma_6x4.txt");
const PDMA_150: &str = include_str!("../../data/pdma_150.txt");
const PDMA_300: &str = include_str!("../../data/pdma_300.txt");

fn parse_err(source_name: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

/// Per-user sparse codebooks over one 4-resource group.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmaCodebook {
    codewords: usize,
    users: Vec<Vec<[Complex64; GROUP_SIZE]>>,
}

impl ScmaCodebook {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let mut header = |key: &str| -> Result<usize> {
            let (no, l) = lines
                .next()
                .ok_or_else(|| parse_err(source_name, 0, format!("missing '{key}' header")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(parse_err(source_name, no, format!("expected '{key} <n>'")));
            }
            it.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(source_name, no, format!("bad value for '{key}'")))
        };
        let num_users = header("users")?;
        let resources = header("resources")?;
        let codewords = header("codewords")?;
        if resources != GROUP_SIZE {
            return Err(parse_err(
                source_name,
                0,
                format!("only {GROUP_SIZE} resources supported"),
            ));
        }
        if !codewords.is_power_of_two() || codewords < 2 {
            return Err(parse_err(
                source_name,
                0,
                "codeword count must be a power of two",
            ));
        }
        let mut users = Vec::with_capacity(num_users);
        for _ in 0..num_users {
            let mut book = Vec::with_capacity(codewords);
            for _ in 0..codewords {
                let (no, l) = lines
                    .next()
                    .ok_or_else(|| parse_err(source_name, 0, "too few codeword lines"))?;
                let mut cw = [Complex64::new(0.0, 0.0); GROUP_SIZE];
                let entries: Vec<&str> = l.split_whitespace().collect();
                if entries.len() != GROUP_SIZE {
                    return Err(parse_err(
                        source_name,
                        no,
                        format!("expected {GROUP_SIZE} entries"),
                    ));
                }
                for (slot, e) in cw.iter_mut().zip(entries) {
                    *slot = parse_complex(e)
                        .ok_or_else(|| parse_err(source_name, no, format!("bad entry '{e}'")))?;
                }
                book.push(cw);
            }
            users.push(book);
        }
        if let Some((no, _)) = lines.next() {
            return Err(parse_err(
                source_name,
                no,
                "trailing data after last codeword",
            ));
        }
        let out = Self { codewords, users };
        out.validate(source_name)?;
        Ok(out)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn validate(&self, source_name: &str) -> Result<()> {
        for (u, book) in self.users.iter().enumerate() {
            let support = Self::support_of(book);
            if support.is_empty() {
                return Err(parse_err(
                    source_name,
                    0,
                    format!("user {u} has an empty codebook"),
                ));
            }
            for i in 0..book.len() {
                for j in i + 1..book.len() {
                    let d: f64 = book[i]
                        .iter()
                        .zip(&book[j])
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum();
                    if d < 1e-12 {
                        return Err(parse_err(
                            source_name,
                            0,
                            format!("user {u}: codewords {i} and {j} coincide"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn support_of(book: &[[Complex64; GROUP_SIZE]]) -> Vec<usize> {
        (0..GROUP_SIZE)
            .filter(|&r| book.iter().any(|cw| cw[r].norm_sqr() > 0.0))
            .collect()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn codewords(&self) -> usize {
        self.codewords
    }

    pub fn bits_per_codeword(&self) -> usize {
        self.codewords.trailing_zeros() as usize
    }

    pub fn user(&self, u: usize) -> &[[Complex64; GROUP_SIZE]] {
        &self.users[u]
    }

    /// Resources on which user `u` is ever nonzero.
    pub fn support(&self, u: usize) -> Vec<usize> {
        Self::support_of(&self.users[u])
    }
}

impl Default for ScmaCodebook {
    fn default() -> Self {
        Self::parse(SCMA_DEFAULT, "scma_6x4.txt").expect("bundled codebook parses")
    }
}

fn parse_complex(s: &str) -> Option<Complex64> {
    let (re, im) = s.split_once(',')?;
    Some(Complex64::new(
        re.trim().parse().ok()?,
        im.trim().parse().ok()?,
    ))
}

/// Ordered list of PDMA occupancy columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdmaTable {
    pub columns: Vec<[u8; GROUP_SIZE]>,
}

impl PdmaTable {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (no, l) in content_lines(text) {
            let vals: Vec<&str> = l.split_whitespace().collect();
            if vals.len() != GROUP_SIZE {
                return Err(parse_err(
                    source_name,
                    no,
                    format!("expected {GROUP_SIZE} entries"),
                ));
            }
            let mut col = [0u8; GROUP_SIZE];
            for (c, v) in col.iter_mut().zip(vals) {
                *c = match v {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(parse_err(
                            source_name,
                            no,
                            format!("pattern entry must be 0 or 1, got '{v}'"),
                        ))
                    }
                };
            }
            if col.iter().all(|&c| c == 0) {
                return Err(parse_err(source_name, no, "zero pattern column"));
            }
            if columns.contains(&col) {
                return Err(parse_err(source_name, no, "duplicate pattern column"));
            }
            columns.push(col);
        }
        if columns.is_empty() {
            return Err(parse_err(source_name, 0, "no pattern columns"));
        }
        Ok(Self { columns })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn default_150() -> Self {
        Self::parse(PDMA_150, "pdma_150.txt").expect("bundled table parses")
    }

    pub fn default_300() -> Self {
        Self::parse(PDMA_300, "pdma_300.txt").expect("bundled table parses")
    }

    /// Number of users sharing each resource.
    pub fn row_sums(&self) -> [usize; GROUP_SIZE] {
        let mut s = [0; GROUP_SIZE];
        for c in &self.columns {
            for (r, &v) in c.iter().enumerate() {
                s[r] += v as usize;
            }
        }
        s
    }
}
