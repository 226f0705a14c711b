//! Binary trajectory store: one file per run, fixed little-endian layout.
//!
//! Layout: magic `EFTRAJ01`, then u64 {dim_el, n_grid, n_snapshots,
//! label_len}, f64 {mass, x0, dx, dt}, the UTF-8 label, and per snapshot a
//! f64 time followed by dim_el × n_grid (re, im) f64 pairs, component-major.

use super::propagate::Trajectory;
use super::FullWavefunction;
use crate::error::CoreError;
use crate::grid::NuclearGrid;
use crate::C64;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"EFTRAJ01";

#[derive(Debug, Clone)]
pub struct TrajectoryMeta {
    pub label: String,
    pub mass: f64,
    pub dt: f64,
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, label: &str) -> Result<(), CoreError> {
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| CoreError::Series("empty trajectory".into()))?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u64::<LittleEndian>(first.dim_el() as u64)?;
    w.write_u64::<LittleEndian>(first.grid.len() as u64)?;
    w.write_u64::<LittleEndian>(traj.snapshots.len() as u64)?;
    w.write_u64::<LittleEndian>(label.len() as u64)?;
    w.write_f64::<LittleEndian>(first.mass)?;
    w.write_f64::<LittleEndian>(first.grid.axis(0).start)?;
    w.write_f64::<LittleEndian>(first.grid.axis(0).step)?;
    w.write_f64::<LittleEndian>(traj.dt)?;
    w.write_all(label.as_bytes())?;
    for snap in &traj.snapshots {
        w.write_f64::<LittleEndian>(snap.time)?;
        for c in &snap.components {
            for z in c {
                w.write_f64::<LittleEndian>(z.re)?;
                w.write_f64::<LittleEndian>(z.im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<(Vec<FullWavefunction>, TrajectoryMeta), CoreError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Series("bad trajectory magic".into()));
    }
    let dim_el = r.read_u64::<LittleEndian>()? as usize;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let n_snap = r.read_u64::<LittleEndian>()? as usize;
    let label_len = r.read_u64::<LittleEndian>()? as usize;
    let mass = r.read_f64::<LittleEndian>()?;
    let x0 = r.read_f64::<LittleEndian>()?;
    let dx = r.read_f64::<LittleEndian>()?;
    let dt = r.read_f64::<LittleEndian>()?;
    let mut label_bytes = vec![0u8; label_len];
    r.read_exact(&mut label_bytes)?;
    let label =
        String::from_utf8(label_bytes).map_err(|e| CoreError::Series(format!("bad label: {e}")))?;

    let grid = NuclearGrid::line(x0, dx, n)?;
    let mut snapshots = Vec::with_capacity(n_snap);
    for _ in 0..n_snap {
        let time = r.read_f64::<LittleEndian>()?;
        let mut components = Vec::with_capacity(dim_el);
        for _ in 0..dim_el {
            let mut c = Vec::with_capacity(n);
            for _ in 0..n {
                let re = r.read_f64::<LittleEndian>()?;
                let im = r.read_f64::<LittleEndian>()?;
                c.push(C64::new(re, im));
            }
            components.push(c);
        }
        let mut psi = FullWavefunction::new(grid.clone(), mass, components)?;
        psi.time = time;
        snapshots.push(psi);
    }
    Ok((snapshots, TrajectoryMeta { label, mass, dt }))
}
