//! Binary and CSV ensemble files.
//!
//! Binary layout, little-endian throughout: the magic `NLBCPL01`, a `u64`
//! length followed by the config echo (TOML, UTF-8, including `x0`/`y0`),
//! then `u64` path count and `u64` recorded-time count, then per path
//! `id: u64`, `seed: u64`, `coalescence: f64` and the `(t, X, Y)` triples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CoupledEnsemble, CoupledPath, PathEnsemble, SimConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NLBCPL01";

fn header(ens: &CoupledEnsemble) -> String {
    format!("x0 = {:?}\ny0 = {:?}\n{}", ens.x0, ens.y0, ens.config.to_toml())
}

pub fn write_ensemble_binary(path: &Path, ens: &CoupledEnsemble) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let head = header(ens);
    w.write_all(&(head.len() as u64).to_le_bytes())?;
    w.write_all(head.as_bytes())?;
    w.write_all(&(ens.paths.len() as u64).to_le_bytes())?;
    w.write_all(&(ens.times.len() as u64).to_le_bytes())?;
    for p in &ens.paths {
        w.write_all(&p.id.to_le_bytes())?;
        w.write_all(&p.seed.to_le_bytes())?;
        w.write_all(&p.coalescence.to_le_bytes())?;
        for (k, &t) in ens.times.iter().enumerate() {
            w.write_all(&t.to_le_bytes())?;
            w.write_all(&p.x[k].to_le_bytes())?;
            w.write_all(&p.y[k].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Reads a file written by [`write_ensemble_binary`]. Order bookkeeping is
/// not stored, so violation and repair counts come back as zero.
pub fn read_ensemble_binary(path: &Path) -> Result<CoupledEnsemble> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!("{}: not an ensemble file", path.display())));
    }
    let len = read_u64(&mut r)? as usize;
    let mut head = vec![0u8; len];
    r.read_exact(&mut head)?;
    let head = String::from_utf8(head).map_err(|e| Error::Config(e.to_string()))?;
    let bad = |e: String| Error::Config(format!("ensemble header: {e}"));
    let mut table: toml::Table = toml::from_str(&head).map_err(|e| bad(e.to_string()))?;
    let mut start = |k: &str| table.remove(k).and_then(|v| v.as_float()).ok_or_else(|| bad(format!("missing {k}")));
    let (x0, y0) = (start("x0")?, start("y0")?);
    let config: SimConfig = table.try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
    let n = read_u64(&mut r)? as usize;
    let m = read_u64(&mut r)? as usize;
    let mut times = vec![0.0; m];
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let id = read_u64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let coalescence = read_f64(&mut r)?;
        let (mut x, mut y) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for t in times.iter_mut() {
            let s = read_f64(&mut r)?;
            if i == 0 {
                *t = s;
            }
            x.push(read_f64(&mut r)?);
            y.push(read_f64(&mut r)?);
        }
        paths.push(CoupledPath { id, seed, coalescence, violations: 0, repairs: 0, jumps: 0, x, y });
    }
    Ok(CoupledEnsemble { config, x0, y0, times, paths, failed: Vec::new() })
}

fn comment_block(w: &mut impl Write, head: &str) -> Result<()> {
    for line in head.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Long-format CSV `path,t,x,y` preceded by the config echo as `#` comments.
pub fn write_ensemble_csv(path: &Path, ens: &CoupledEnsemble) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    comment_block(&mut w, &header(ens))?;
    writeln!(w, "path,t,x,y,coalescence")?;
    for p in &ens.paths {
        for (k, &t) in ens.times.iter().enumerate() {
            writeln!(w, "{},{t},{},{},{}", p.id, p.x[k], p.y[k], p.coalescence)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_single_csv(path: &Path, ens: &PathEnsemble) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    comment_block(&mut w, &format!("x0 = {:?}\n{}", ens.x0, ens.config.to_toml()))?;
    writeln!(w, "path,t,x")?;
    for p in &ens.paths {
        for (k, &t) in ens.times.iter().enumerate() {
            writeln!(w, "{},{t},{}", p.id, p.x[k])?;
        }
    }
    w.flush()?;
    Ok(())
}
