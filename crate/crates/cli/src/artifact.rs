//! Text artifacts: a kind line, a one-line JSON header, body lines, and a
//! SHA-256 line over everything before it.
//!
//! ```text
//! #detsft schedule
//! #{"buckets":8,"d":600,...}
//! 0 13 0 5
//! ...
//! #sha256 3f1a...
//! ```

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

const MAGIC: &str = "#detsft ";
const CHECKSUM: &str = "#sha256 ";

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub kind: String,
    /// Keys come out sorted, so rendering is byte-stable.
    pub header: Map<String, Value>,
    pub body: Vec<String>,
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifact {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            header: Map::new(),
            body: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.header.insert(key.to_string(), value.into());
        self
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{MAGIC}{}\n#{}\n",
            self.kind,
            Value::Object(self.header.clone())
        );
        for line in &self.body {
            out.push_str(line);
            out.push('\n');
        }
        let sum = checksum(out.as_bytes());
        out.push_str(CHECKSUM);
        out.push_str(&sum);
        out.push('\n');
        out
    }

    /// Parses and checks the checksum.
    pub fn parse(text: &str) -> Result<Self> {
        let cut = text
            .rfind(CHECKSUM)
            .ok_or_else(|| anyhow!("missing checksum line"))?;
        let (content, tail) = text.split_at(cut);
        let stated = tail[CHECKSUM.len()..].trim();
        let actual = checksum(content.as_bytes());
        if stated != actual {
            bail!("checksum mismatch: file says {stated}, content hashes to {actual}");
        }
        let mut lines = content.lines();
        let kind = lines
            .next()
            .and_then(|l| l.strip_prefix(MAGIC))
            .ok_or_else(|| anyhow!("not a detsft artifact"))?
            .to_string();
        let header_line = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| anyhow!("missing header line"))?;
        let header = match serde_json::from_str(header_line).context("bad header")? {
            Value::Object(m) => m,
            _ => bail!("header is not an object"),
        };
        Ok(Self {
            kind,
            header,
            body: lines.map(str::to_string).collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn expect_kind(self, kind: &str) -> Result<Self> {
        if self.kind != kind {
            bail!("expected a {kind} artifact, found {}", self.kind);
        }
        Ok(self)
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.header
            .get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| anyhow!("header field {key} missing or not an integer"))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.header
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| anyhow!("header field {key} missing or not a number"))
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.header
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| anyhow!("header field {key} missing or not a string"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper() {
        let mut a = Artifact::new("samples");
        a.set("n", 16).set("pipeline", "linear");
        a.body = vec!["1".into(), "5".into()];
        let text = a.render();
        assert_eq!(Artifact::parse(&text).unwrap(), a);
        assert_eq!(text, a.render());
        let bad = text.replace("\n5\n", "\n6\n");
        assert!(Artifact::parse(&bad).is_err());
    }
}
