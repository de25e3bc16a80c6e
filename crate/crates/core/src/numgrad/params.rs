//! Named parameter tensors and their checkpoint file.
//!
//! Checkpoint layout (all text lines end with `\n`):
//!
//! ```text
//! numgrad-params 1
//! count <k>
//! <name> <rank> <extent>...      (k lines, in iteration order)
//! end
//! <payload: every tensor's values, row-major, little-endian f64>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::tape::{Tape, Var};
use super::tensor::Tensor;

const MAGIC: &str = "numgrad-params";
const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet {
    params: IndexMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        ParameterSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::contract(format!("invalid parameter name {name:?}")));
        }
        if self.params.contains_key(&name) {
            return Err(Error::contract(format!("duplicate parameter {name}")));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.params.values_mut()
    }

    pub fn element_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Records every parameter on `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .values()
            .map(|t| tape.parameter(t.clone()))
            .collect()
    }

    /// Records every parameter as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .values()
            .map(|t| tape.constant(t.clone()))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "{MAGIC} {VERSION}").unwrap();
        writeln!(out, "count {}", self.params.len()).unwrap();
        for (name, t) in &self.params {
            write!(out, "{} {}", name, t.rank()).unwrap();
            for e in t.shape() {
                write!(out, " {e}").unwrap();
            }
            out.push(b'\n');
        }
        out.extend_from_slice(b"end\n");
        for t in self.params.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[cursor..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::format("truncated parameter header"))?;
            cursor += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| Error::format("header is not UTF-8"))
        };
        let magic = next_line()?;
        if magic != format!("{MAGIC} {VERSION}") {
            return Err(Error::format(format!("unexpected header {magic:?}")));
        }
        let count: usize = next_line()?
            .strip_prefix("count ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("bad count line"))?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let line = next_line()?;
            let mut parts = line.split(' ');
            let name = parts
                .next()
                .ok_or_else(|| Error::format("missing parameter name"))?
                .to_string();
            let rank: usize = parse_field(parts.next())?;
            let shape = (0..rank)
                .map(|_| parse_field(parts.next()))
                .collect::<Result<Vec<usize>>>()?;
            if parts.next().is_some() {
                return Err(Error::format(format!("trailing fields for {name}")));
            }
            entries.push((name, shape));
        }
        if next_line()? != "end" {
            return Err(Error::format("missing end marker"));
        }
        let payload = &bytes[cursor..];
        let total: usize = entries
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum();
        if payload.len() != total * 8 {
            return Err(Error::format(format!(
                "payload holds {} bytes, header describes {}",
                payload.len(),
                total * 8
            )));
        }
        let mut set = ParameterSet::new();
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for (name, shape) in entries {
            let n = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            set.insert(name, Tensor::new(shape, data)?)
                .map_err(|e| Error::format(e.to_string()))?;
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ParameterSet::from_bytes(&fs::read(path)?)
    }
}

fn parse_field(field: Option<&str>) -> Result<usize> {
    field
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("bad shape field"))
}
