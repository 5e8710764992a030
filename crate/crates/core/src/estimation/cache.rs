//! Binary table cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GFSTEPTB"
//! version  u32      1
//! variant  u8       0 = single-slot, 1 = whole-cycle
//! w, t, k  u32 ×3   t = k = 0 for single-slot tables
//! n_max    u32
//! then for N = 0..=n_max:
//!   count  u32
//!   count × (a u32, b u32, p f64)   sorted by (a, b)
//! ```
//!
//! A file whose header disagrees with the requested parameters is rebuilt.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::markov::{MarkovModel, ModelVariant, StepProbTable, DEFAULT_STATE_BOUND};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GFSTEPTB";
pub const VERSION: u32 = 1;

fn header_fields(v: ModelVariant) -> (u8, u32, u32, u32) {
    match v {
        ModelVariant::SingleSlot { w } => (0, w, 0, 0),
        ModelVariant::WholeCycle { w, t, k } => (1, w, t, k),
    }
}

pub fn write_table(table: &StepProbTable, out: &mut impl Write) -> std::io::Result<()> {
    let (tag, w, t, k) = header_fields(table.variant);
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(VERSION)?;
    out.write_u8(tag)?;
    for x in [w, t, k, table.n_max] {
        out.write_u32::<LittleEndian>(x)?;
    }
    for row in &table.steps {
        out.write_u32::<LittleEndian>(row.len() as u32)?;
        for &(key, p) in row {
            out.write_u32::<LittleEndian>((key >> 32) as u32)?;
            out.write_u32::<LittleEndian>(key as u32)?;
            out.write_f64::<LittleEndian>(p)?;
        }
    }
    Ok(())
}

/// Reads a table, failing with a reason string on malformed input.
pub fn read_table(input: &mut impl Read) -> std::result::Result<StepProbTable, String> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|e| e.to_string())?;
    if &magic != MAGIC {
        return Err("bad magic".into());
    }
    let rd = |input: &mut dyn Read| input.read_u32::<LittleEndian>().map_err(|e| e.to_string());
    let version = rd(input)?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let tag = input.read_u8().map_err(|e| e.to_string())?;
    let (w, t, k, n_max) = (rd(input)?, rd(input)?, rd(input)?, rd(input)?);
    let variant = match tag {
        0 => ModelVariant::SingleSlot { w },
        1 => ModelVariant::WholeCycle { w, t, k },
        other => return Err(format!("unknown variant tag {other}")),
    };
    let pool = variant.pool();
    let mut steps = Vec::with_capacity(n_max as usize + 1);
    for _ in 0..=n_max {
        let count = rd(input)?;
        let mut row = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let (a, b) = (rd(input)?, rd(input)?);
            let p = input.read_f64::<LittleEndian>().map_err(|e| e.to_string())?;
            if a.checked_add(b).is_none_or(|s| s > pool) {
                return Err(format!("state ({a}, {b}) exceeds pool {pool}"));
            }
            row.push(((u64::from(a) << 32) | u64::from(b), p));
        }
        if row.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err("row not sorted".into());
        }
        steps.push(row);
    }
    Ok(StepProbTable { variant, n_max, steps })
}

pub fn save_table(table: &StepProbTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_table(table, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_table(path: &Path) -> Result<StepProbTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(&mut BufReader::new(file)).map_err(|reason| Error::Cache {
        path: path.to_path_buf(),
        reason,
    })
}

/// File name used for a table in a cache directory.
pub fn cache_file_name(variant: ModelVariant, n_max: u32) -> String {
    match variant {
        ModelVariant::SingleSlot { w } => format!("single_w{w}_n{n_max}.gfst"),
        ModelVariant::WholeCycle { w, t, k } => format!("whole_w{w}_t{t}_k{k}_n{n_max}.gfst"),
    }
}

/// Loads a cached table, or builds and stores it when the file is missing,
/// unreadable or describes different parameters.
pub fn load_or_build(dir: &Path, variant: ModelVariant, n_max: u32) -> Result<StepProbTable> {
    let path = dir.join(cache_file_name(variant, n_max));
    if let Ok(table) = load_table(&path) {
        if table.variant == variant && table.n_max == n_max {
            return Ok(table);
        }
    }
    let table = MarkovModel::new(variant)?.step_table(n_max, DEFAULT_STATE_BOUND)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_table(&table, &path)?;
    Ok(table)
}

/// `(variant tag, w, t, k, n_max)`.
type TableKey = (u8, u32, u32, u32, u32);

/// Shared, lazily built tables keyed by `(variant, n_max)`, optionally
/// backed by a cache directory.
#[derive(Debug, Default)]
pub struct TableStore {
    dir: Option<PathBuf>,
    tables: Mutex<BTreeMap<TableKey, Arc<StepProbTable>>>,
}

impl TableStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            tables: Mutex::default(),
        }
    }

    pub fn get(&self, variant: ModelVariant, n_max: u32) -> Result<Arc<StepProbTable>> {
        let (tag, w, t, k) = header_fields(variant);
        let key = (tag, w, t, k, n_max);
        if let Some(t) = self.tables.lock().expect("table store poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = match &self.dir {
            Some(dir) => load_or_build(dir, variant, n_max)?,
            None => MarkovModel::new(variant)?.step_table(n_max, DEFAULT_STATE_BOUND)?,
        };
        let table = Arc::new(table);
        self.tables
            .lock()
            .expect("table store poisoned")
            .insert(key, Arc::clone(&table));
        Ok(table)
    }

    pub fn single_slot(&self, w: u32, n_max: u32) -> Result<Arc<StepProbTable>> {
        self.get(ModelVariant::SingleSlot { w }, n_max)
    }

    pub fn whole_cycle(&self, w: u32, t: u32, k: u32, n_max: u32) -> Result<Arc<StepProbTable>> {
        self.get(ModelVariant::WholeCycle { w, t, k }, n_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_in_memory() {
        let table = MarkovModel::whole_cycle(2, 3, 2).unwrap().step_table(6, 1 << 20).unwrap();
        let mut buf = Vec::new();
        write_table(&table, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(read_table(&mut buf.as_slice()).unwrap(), table);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_table(&mut &b"NOTATABLE..."[..]).is_err());
        let table = MarkovModel::single_slot(3).unwrap().step_table(3, 1 << 20).unwrap();
        let mut buf = Vec::new();
        write_table(&table, &mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_table(&mut buf.as_slice()).is_err());
    }
}
