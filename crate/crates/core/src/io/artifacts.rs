//! Offline artifacts and training snapshots on disk.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::config::StudyConfig;
use super::container::{decode, encode, section_name, write_atomic, Reader, Tag, Writer};
use crate::basis::{Provenance, ReducedBasis};
use crate::error::{NirbError, Result};
use crate::integrators::{FieldTrajectory, TimeGrid};
use crate::linalg::DenseMat;
use crate::mesh::{Rect, TriMesh};
use crate::pipeline::{ComponentModel, OfflineArtifacts, Snapshots};
use crate::rectification::RectificationTensor;

pub const ARTIFACT_FILE: &str = "artifacts.nirb";
pub const SNAPSHOT_FILE: &str = "snapshots.nirb";

pub fn artifacts_path(dir: &Path) -> PathBuf {
    dir.join(ARTIFACT_FILE)
}

pub fn snapshots_path(dir: &Path) -> PathBuf {
    dir.join(SNAPSHOT_FILE)
}

pub fn encode_mesh(mesh: &TriMesh) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(mesh.n_nodes() as u64);
    for p in mesh.nodes() {
        w.f64s(p);
    }
    w.u64(mesh.n_triangles() as u64);
    for t in mesh.triangles() {
        for &v in t {
            w.u64(v as u64);
        }
    }
    for &b in mesh.boundary_mask() {
        w.u8(b as u8);
    }
    match mesh.grid() {
        Some((nx, ny)) => {
            w.u8(1);
            w.u64(nx as u64);
            w.u64(ny as u64);
        }
        None => w.u8(0),
    }
    let d = mesh.domain();
    w.f64s(&[d.x0, d.x1, d.y0, d.y1]);
    w.buf
}

pub fn decode_mesh(bytes: &[u8]) -> Result<TriMesh> {
    let mut r = Reader::new(bytes, "mesh");
    let nn = r.len(16)?;
    let coords = r.f64s(2 * nn)?;
    let nodes: Vec<[f64; 2]> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let nt = r.len(24)?;
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        tris.push([r.u64()? as usize, r.u64()? as usize, r.u64()? as usize]);
    }
    let mut mask = Vec::with_capacity(nn);
    for _ in 0..nn {
        mask.push(r.u8()? != 0);
    }
    let grid = match r.u8()? {
        0 => None,
        _ => Some((r.u64()? as usize, r.u64()? as usize)),
    };
    let d = r.f64s(4)?;
    r.finish()?;
    let domain = Rect::new(d[0], d[1], d[2], d[3]);
    let mesh = match grid {
        Some((nx, ny)) => TriMesh::structured(nx, ny, domain)?,
        None => TriMesh::from_parts(nodes.clone(), tris.clone(), domain)?,
    };
    if mesh.nodes() != nodes.as_slice() || mesh.triangles() != tris.as_slice() || mesh.boundary_mask() != mask.as_slice() {
        return Err(NirbError::Corrupt("mesh section does not describe a consistent mesh".into()));
    }
    Ok(mesh)
}

fn encode_grids(grids: &[TimeGrid]) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(grids.len() as u64);
    for g in grids {
        w.f64(g.t0);
        w.f64(g.t_end);
        w.u64(g.steps as u64);
    }
    w.buf
}

fn read_grid(r: &mut Reader<'_>) -> Result<TimeGrid> {
    let (t0, t_end, steps) = (r.f64()?, r.f64()?, r.u64()? as usize);
    TimeGrid::new(t0, t_end, steps).map_err(|e| NirbError::Corrupt(format!("time grid: {e}")))
}

fn decode_grids(bytes: &[u8]) -> Result<Vec<TimeGrid>> {
    let mut r = Reader::new(bytes, "time grid");
    let n = r.len(24)?;
    let grids = (0..n).map(|_| read_grid(&mut r)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(grids)
}

/// `N`, node count, modes row-major, eigenvalue count and eigenvalues.
pub fn encode_basis(b: &ReducedBasis) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(b.len() as u64);
    w.u64(b.n_nodes() as u64);
    for m in b.modes() {
        w.f64s(m);
    }
    let ev = b.eigenvalues().unwrap_or(&[]);
    w.u64(ev.len() as u64);
    w.f64s(ev);
    w.buf
}

fn decode_basis(bytes: &[u8], prov: Provenance) -> Result<ReducedBasis> {
    let mut r = Reader::new(bytes, "basis");
    let n = r.u64()? as usize;
    let nodes = r.u64()? as usize;
    let total = n.checked_mul(nodes).ok_or_else(|| NirbError::Corrupt("basis size overflow".into()))?;
    let flat = r.f64s(total)?;
    let modes = if nodes == 0 {
        vec![Vec::new(); n]
    } else {
        flat.chunks_exact(nodes).map(<[f64]>::to_vec).collect()
    };
    let ne = r.len(8)?;
    let ev = r.f64s(ne)?;
    r.finish()?;
    let eig = if ne == 0 && n > 0 { None } else { Some(ev) };
    ReducedBasis::new(modes, eig, prov).map_err(|e| NirbError::Corrupt(format!("basis: {e}")))
}

fn encode_provenance(p: &Provenance) -> Vec<u8> {
    let mut w = Writer::default();
    w.str(&p.algorithm);
    w.u64(p.selected.len() as u64);
    for (&(k, t), &e) in p.selected.iter().zip(&p.selected_errors) {
        w.u64(k as u64);
        match t {
            Some(t) => {
                w.u8(1);
                w.u64(t as u64);
            }
            None => {
                w.u8(0);
                w.u64(0);
            }
        }
        w.f64(e);
    }
    w.buf
}

fn decode_provenance(bytes: &[u8]) -> Result<Provenance> {
    let mut r = Reader::new(bytes, "provenance");
    let algorithm = r.str()?;
    let n = r.len(25)?;
    let mut p = Provenance {
        algorithm,
        ..Default::default()
    };
    for _ in 0..n {
        let k = r.u64()? as usize;
        let has = r.u8()? != 0;
        let t = r.u64()? as usize;
        p.selected.push((k, has.then_some(t)));
        p.selected_errors.push(r.f64()?);
    }
    r.finish()?;
    Ok(p)
}

fn encode_params(w: &mut Writer, params: &[Vec<f64>]) {
    w.u64(params.len() as u64);
    w.u64(params.first().map_or(0, Vec::len) as u64);
    for p in params {
        w.f64s(p);
    }
}

fn decode_params(r: &mut Reader<'_>) -> Result<Vec<Vec<f64>>> {
    let n = r.u64()? as usize;
    let dim = r.u64()? as usize;
    (0..n).map(|_| r.f64s(dim)).collect()
}

/// Step count, `N`, matrices row-major, deltas, training parameters.
pub fn encode_rectification(t: &RectificationTensor) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(t.steps() as u64);
    w.u64(t.n() as u64);
    for m in &t.matrices {
        w.f64s(m.data());
    }
    w.f64s(&t.deltas);
    encode_params(&mut w, &t.train_params);
    w.buf
}

fn decode_rectification(bytes: &[u8]) -> Result<RectificationTensor> {
    let mut r = Reader::new(bytes, "rectification");
    let steps = r.len(8)?;
    let n = r.u64()? as usize;
    let nn = n.checked_mul(n).ok_or_else(|| NirbError::Corrupt("rectification size overflow".into()))?;
    let matrices = (0..steps)
        .map(|_| DenseMat::from_vec(n, n, r.f64s(nn)?))
        .collect::<Result<Vec<_>>>()?;
    let deltas = r.f64s(steps)?;
    let train_params = decode_params(&mut r)?;
    r.finish()?;
    Ok(RectificationTensor {
        matrices,
        deltas,
        train_params,
    })
}

pub fn artifacts_to_bytes(a: &OfflineArtifacts) -> Vec<u8> {
    let mut blocks: Vec<(Tag, Vec<u8>)> = vec![
        (*b"CONF", a.config.to_text().into_bytes()),
        (*b"MESH", encode_mesh(&a.fine_mesh)),
        (*b"MESH", encode_mesh(&a.coarse_mesh)),
        (*b"GRID", encode_grids(&[a.fine_grid, a.coarse_grid])),
    ];
    for c in &a.components {
        blocks.push((*b"BASI", encode_basis(&c.basis)));
        blocks.push((*b"PROV", encode_provenance(&c.basis.provenance)));
        blocks.push((*b"RECT", encode_rectification(&c.rectification)));
    }
    encode(&blocks)
}

fn expect<'a>(blocks: &'a [(Tag, Vec<u8>)], i: usize, tag: &Tag) -> Result<&'a [u8]> {
    match blocks.get(i) {
        Some((t, p)) if t == tag => Ok(p),
        Some((t, _)) => Err(NirbError::Corrupt(format!(
            "block {i} is a {} section, expected {}",
            section_name(t),
            section_name(tag)
        ))),
        None => Err(NirbError::Corrupt(format!("missing {} section", section_name(tag)))),
    }
}

pub fn artifacts_from_bytes(bytes: &[u8]) -> Result<OfflineArtifacts> {
    let blocks = decode(bytes)?;
    let text = std::str::from_utf8(expect(&blocks, 0, b"CONF")?)
        .map_err(|_| NirbError::Corrupt("config section holds invalid text".into()))?;
    let config = StudyConfig::parse(text).map_err(|e| NirbError::Corrupt(format!("config section: {e}")))?;
    let fine_mesh = Arc::new(decode_mesh(expect(&blocks, 1, b"MESH")?)?);
    let coarse_mesh = Arc::new(decode_mesh(expect(&blocks, 2, b"MESH")?)?);
    let grids = decode_grids(expect(&blocks, 3, b"GRID")?)?;
    let [fine_grid, coarse_grid] = grids[..] else {
        return Err(NirbError::Corrupt("time grid section must hold 2 grids".into()));
    };
    let mut components = Vec::new();
    let mut i = 4;
    while i < blocks.len() {
        let prov = decode_provenance(expect(&blocks, i + 1, b"PROV")?)?;
        let basis = decode_basis(expect(&blocks, i, b"BASI")?, prov)?;
        let rectification = decode_rectification(expect(&blocks, i + 2, b"RECT")?)?;
        components.push(ComponentModel { basis, rectification });
        i += 3;
    }
    let art = OfflineArtifacts {
        config,
        fine_mesh,
        coarse_mesh,
        fine_grid,
        coarse_grid,
        components,
    };
    art.check_consistency()?;
    Ok(art)
}

pub fn save_artifacts(dir: &Path, a: &OfflineArtifacts) -> Result<PathBuf> {
    let path = artifacts_path(dir);
    write_atomic(&path, &artifacts_to_bytes(a))?;
    Ok(path)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(NirbError::MissingArtifacts(path.display().to_string())),
        Err(e) => Err(e.into()),
    }
}

pub fn load_artifacts(dir: &Path) -> Result<OfflineArtifacts> {
    artifacts_from_bytes(&read_file(&artifacts_path(dir))?)
}

fn encode_trajectory(level: u8, k: usize, c: usize, t: &FieldTrajectory) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(level);
    w.u64(k as u64);
    w.u64(c as u64);
    w.f64(t.grid().t0);
    w.f64(t.grid().t_end);
    w.u64(t.grid().steps as u64);
    w.u64(t.param().len() as u64);
    w.f64s(t.param());
    w.u64(t.n_nodes() as u64);
    for r in t.rows() {
        w.f64s(r);
    }
    w.buf
}

pub fn snapshots_to_bytes(s: &Snapshots) -> Vec<u8> {
    let mut blocks = Vec::new();
    for (k, (f, c)) in s.fine.iter().zip(&s.coarse).enumerate() {
        for (ci, t) in f.iter().enumerate() {
            blocks.push((*b"TRAJ", encode_trajectory(0, k, ci, t)));
        }
        for (ci, t) in c.iter().enumerate() {
            blocks.push((*b"TRAJ", encode_trajectory(1, k, ci, t)));
        }
    }
    encode(&blocks)
}

pub fn snapshots_from_bytes(bytes: &[u8]) -> Result<Snapshots> {
    let mut s = Snapshots {
        params: Vec::new(),
        fine: Vec::new(),
        coarse: Vec::new(),
    };
    for (i, (tag, payload)) in decode(bytes)?.iter().enumerate() {
        if tag != b"TRAJ" {
            return Err(NirbError::Corrupt(format!("block {i} is not a trajectory section")));
        }
        let mut r = Reader::new(payload, "trajectory");
        let level = r.u8()?;
        let k = r.u64()? as usize;
        let c = r.u64()? as usize;
        let grid = read_grid(&mut r)?;
        let np = r.len(8)?;
        let param = r.f64s(np)?;
        let nn = r.u64()? as usize;
        let rows = (0..grid.len()).map(|_| r.f64s(nn)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let traj = FieldTrajectory::new(grid, rows, param.clone()).map_err(|e| NirbError::Corrupt(format!("trajectory: {e}")))?;
        if k == s.params.len() {
            s.params.push(param);
            s.fine.push(Vec::new());
            s.coarse.push(Vec::new());
        }
        let slot = match (level, s.fine.get_mut(k), s.coarse.get_mut(k)) {
            (0, Some(f), _) if f.len() == c => f,
            (1, _, Some(cs)) if cs.len() == c => cs,
            _ => return Err(NirbError::Corrupt(format!("trajectory block {i} is out of order"))),
        };
        slot.push(traj);
    }
    Ok(s)
}

pub fn save_snapshots(dir: &Path, s: &Snapshots) -> Result<PathBuf> {
    let path = snapshots_path(dir);
    write_atomic(&path, &snapshots_to_bytes(s))?;
    Ok(path)
}

pub fn load_snapshots(dir: &Path) -> Result<Snapshots> {
    snapshots_from_bytes(&read_file(&snapshots_path(dir))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::container::{BLOCK_OVERHEAD, HEADER_BYTES};

    #[test]
    fn basis_block_size_arithmetic() {
        let modes = vec![vec![0.5; 9]; 3];
        let b = ReducedBasis::new(modes, None, Provenance::default()).unwrap();
        let payload = encode_basis(&b);
        assert_eq!(payload.len(), 8 + 8 + 3 * 9 * 8 + 8);
        let file = encode(&[(*b"BASI", payload)]);
        assert_eq!(file.len(), HEADER_BYTES + BLOCK_OVERHEAD + 16 + 3 * 9 * 8 + 8);
    }

    #[test]
    fn mesh_roundtrip() {
        let m = TriMesh::structured(3, 2, Rect::unit_square()).unwrap();
        let back = decode_mesh(&encode_mesh(&m)).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.grid(), Some((3, 2)));
        assert!(decode_mesh(&encode_mesh(&m)[..20]).is_err());
    }
}
