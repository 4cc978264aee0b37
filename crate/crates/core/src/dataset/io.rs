//! Text dataset files.
//!
//! ```text
//! BNLDS v1 n=<n> task=<task> size=<k> seed=<s> split=<tag>
//! <hex truth table>\t<target> <target> ...
//! ```
//!
//! Functions of fewer than two variables are written as bit strings since
//! they do not fill a hex digit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Dataset, Example, SplitTag, Task};
use crate::boolfn::TruthTable;
use crate::error::{Error, Result};

const MAGIC: &str = "BNLDS";
const VERSION: &str = "v1";

/// How many stored targets are recomputed on load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verify {
    None,
    /// Every hundredth record.
    Sample,
    Full,
}

fn table_field(t: &TruthTable) -> String {
    t.to_hex().unwrap_or_else(|| t.to_bit_string())
}

pub fn to_writer<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{MAGIC} {VERSION} n={} task={} size={} seed={} split={}",
        d.n,
        d.task,
        d.len(),
        d.seed,
        d.split
    )?;
    let mut line = String::new();
    for e in &d.examples {
        line.clear();
        line.push_str(&table_field(&e.table));
        line.push('\t');
        for (i, t) in e.target.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&t.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    to_writer(d, BufWriter::new(file))
}

pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
    load_with(path, Verify::Sample)
}

struct Header {
    n: u32,
    task: Task,
    size: usize,
    seed: u64,
    split: SplitTag,
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(format!("expected {MAGIC} header"));
    }
    if parts.next() != Some(VERSION) {
        return Err(format!("unsupported version, expected {VERSION}"));
    }
    let mut field = |key: &str| -> std::result::Result<String, String> {
        let part = parts.next().ok_or_else(|| format!("missing {key}="))?;
        part.strip_prefix(key)
            .and_then(|p| p.strip_prefix('='))
            .map(str::to_owned)
            .ok_or_else(|| format!("expected {key}=, found {part:?}"))
    };
    let n = field("n")?.parse().map_err(|_| "bad n".to_string())?;
    let task = field("task")?.parse().map_err(|e: Error| e.to_string())?;
    let size = field("size")?.parse().map_err(|_| "bad size".to_string())?;
    let seed = field("seed")?.parse().map_err(|_| "bad seed".to_string())?;
    let split = field("split")?.parse().map_err(|e: Error| e.to_string())?;
    if parts.next().is_some() {
        return Err("trailing header fields".into());
    }
    Ok(Header {
        n,
        task,
        size,
        seed,
        split,
    })
}

pub fn load_with(path: impl AsRef<Path>, verify: Verify) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| err(1, "empty file".into()))??;
    let header = parse_header(&first).map_err(|m| err(1, m))?;
    crate::boolfn::check_arity(header.n).map_err(|e| err(1, e.to_string()))?;
    let width = header.task.target_width(header.n);

    let mut examples = Vec::with_capacity(header.size);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let (table, targets) = line
            .split_once('\t')
            .ok_or_else(|| err(lineno, "expected <table>TAB<targets>".into()))?;
        let table = if header.n < 2 {
            TruthTable::from_bit_str(table)
        } else {
            TruthTable::from_hex_str(table)
        }
        .map_err(|e| err(lineno, e.to_string()))?;
        if table.num_vars() != header.n {
            return Err(err(
                lineno,
                format!(
                    "record has {} variables, header says n={}",
                    table.num_vars(),
                    header.n
                ),
            ));
        }
        let target = targets
            .split(' ')
            .map(|t| t.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(lineno, format!("bad target: {e}")))?;
        if target.len() != width {
            return Err(err(
                lineno,
                format!("expected {width} targets, found {}", target.len()),
            ));
        }
        examples.push(Example { table, target });
    }
    if examples.len() != header.size {
        return Err(err(
            examples.len() + 1,
            format!(
                "header says size={}, found {} records",
                header.size,
                examples.len()
            ),
        ));
    }

    let d = Dataset {
        n: header.n,
        task: header.task,
        seed: header.seed,
        split: header.split,
        examples,
    };
    match verify {
        Verify::None => {}
        Verify::Sample => d.verify_targets(100)?,
        Verify::Full => d.verify_targets(1)?,
    }
    Ok(d)
}
