//! Binary partition cache.
//!
//! Little-endian throughout. Layout:
//!
//! ```text
//! magic      b"FGPART\0\0"         8 bytes
//! version    u32                   (= 1)
//! n_global   u64
//! n_retained u64, retained u64[n_retained]
//! n_clients  u32
//! per client:
//!   id u32, n u64, feature_dim u64, num_classes u64
//!   global_ids  u64[n]
//!   degree_tilde u64[n]
//!   labels u64[n], split u8[n]
//!   features f64[n * feature_dim]            (row-major)
//!   internal: nnz u64, row_ptr u64[n+1], col u64[nnz], val f64[nnz]
//!   boundary: m u64, ptr u64[n+1],
//!             m × { local u64, remote_client u32, remote_global u64, q f64 }
//!   remote_degree: r u64, r × { global u64, d̃ u64 }   (ascending global)
//! ```
//!
//! Reals are stored as raw IEEE-754 bits, so a write/read cycle is
//! bit-exact.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::graphstore::{BoundaryEdge, ClientGraph, CsrMatrix, Partition, Split};
use crate::numkit::Matrix;

pub const PARTITION_MAGIC: &[u8; 8] = b"FGPART\0\0";
pub const PARTITION_VERSION: u32 = 1;

pub fn write_partition(p: &Partition, w: &mut impl Write) -> Result<()> {
    w.write_all(PARTITION_MAGIC)?;
    w.write_u32::<LE>(PARTITION_VERSION)?;
    w.write_u64::<LE>(p.num_global_nodes as u64)?;
    write_usizes(w, &p.retained, true)?;
    w.write_u32::<LE>(p.clients.len() as u32)?;
    for c in &p.clients {
        let n = c.num_nodes();
        w.write_u32::<LE>(c.id as u32)?;
        w.write_u64::<LE>(n as u64)?;
        w.write_u64::<LE>(c.feature_dim() as u64)?;
        w.write_u64::<LE>(c.num_classes as u64)?;
        write_usizes(w, &c.global_ids, false)?;
        write_usizes(w, &c.degree_tilde, false)?;
        write_usizes(w, &c.labels, false)?;
        for s in &c.split {
            w.write_u8(*s as u8)?;
        }
        write_f64s(w, c.features.data())?;
        w.write_u64::<LE>(c.internal.nnz() as u64)?;
        write_usizes(w, c.internal.row_ptr(), false)?;
        write_usizes(w, c.internal.col_idx(), false)?;
        write_f64s(w, c.internal.vals())?;
        w.write_u64::<LE>(c.boundary_edges().len() as u64)?;
        write_usizes(w, c.boundary_ptr(), false)?;
        for e in c.boundary_edges() {
            w.write_u64::<LE>(e.local as u64)?;
            w.write_u32::<LE>(e.remote_client as u32)?;
            w.write_u64::<LE>(e.remote_global as u64)?;
            w.write_u64::<LE>(e.q.to_bits())?;
        }
        w.write_u64::<LE>(c.remote_degree.len() as u64)?;
        for (&u, &d) in &c.remote_degree {
            w.write_u64::<LE>(u as u64)?;
            w.write_u64::<LE>(d as u64)?;
        }
    }
    Ok(())
}

pub fn read_partition(r: &mut impl Read) -> Result<Partition> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PARTITION_MAGIC {
        return Err(Error::Format("not a partition cache (bad magic)".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != PARTITION_VERSION {
        return Err(Error::Format(format!("unsupported partition cache version {version}")));
    }
    let num_global_nodes = read_len(r)?;
    let n_ret = read_len(r)?;
    let retained = read_usizes(r, n_ret)?;
    let n_clients = r.read_u32::<LE>()? as usize;
    let mut clients = Vec::with_capacity(n_clients);
    for _ in 0..n_clients {
        let id = r.read_u32::<LE>()? as usize;
        let n = read_len(r)?;
        let dim = read_len(r)?;
        let num_classes = read_len(r)?;
        let global_ids = read_usizes(r, n)?;
        let degree_tilde = read_usizes(r, n)?;
        let labels = read_usizes(r, n)?;
        let mut split = Vec::with_capacity(n);
        for _ in 0..n {
            let b = r.read_u8()?;
            split.push(Split::from_u8(b).ok_or_else(|| Error::Format(format!("bad split tag {b}")))?);
        }
        let features = Matrix::from_vec(n, dim, read_f64s(r, n * dim)?)?;
        let nnz = read_len(r)?;
        let row_ptr = read_usizes(r, n + 1)?;
        let col_idx = read_usizes(r, nnz)?;
        let vals = read_f64s(r, nnz)?;
        let internal = CsrMatrix::new(n, n, row_ptr, col_idx, vals)?;
        let m = read_len(r)?;
        let boundary_ptr = read_usizes(r, n + 1)?;
        let mut boundary = Vec::with_capacity(m);
        for _ in 0..m {
            boundary.push(BoundaryEdge {
                local: read_len(r)?,
                remote_client: r.read_u32::<LE>()? as usize,
                remote_global: read_len(r)?,
                q: f64::from_bits(r.read_u64::<LE>()?),
            });
        }
        let nr = read_len(r)?;
        let mut remote_degree = BTreeMap::new();
        for _ in 0..nr {
            let u = read_len(r)?;
            remote_degree.insert(u, read_len(r)?);
        }
        clients.push(ClientGraph::from_parts(
            id,
            global_ids,
            internal,
            boundary_ptr,
            boundary,
            remote_degree,
            degree_tilde,
            features,
            labels,
            split,
            num_classes,
        )?);
    }
    Ok(Partition {
        num_global_nodes,
        retained,
        clients,
    })
}

fn write_usizes(w: &mut impl Write, xs: &[usize], with_len: bool) -> Result<()> {
    if with_len {
        w.write_u64::<LE>(xs.len() as u64)?;
    }
    for &x in xs {
        w.write_u64::<LE>(x as u64)?;
    }
    Ok(())
}

fn write_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    for &x in xs {
        w.write_u64::<LE>(x.to_bits())?;
    }
    Ok(())
}

const MAX_LEN: u64 = 1 << 40;

fn read_len(r: &mut impl Read) -> Result<usize> {
    let v = r.read_u64::<LE>()?;
    if v > MAX_LEN {
        return Err(Error::Format(format!("implausible length {v}")));
    }
    Ok(v as usize)
}

fn read_usizes(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    (0..n).map(|_| read_len(r)).collect()
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| Ok(f64::from_bits(r.read_u64::<LE>()?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{partition, synth_sbm, PartitionSpec, SbmSpec, SplitRatios};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut g = synth_sbm(&SbmSpec::new(3, 15, 0.3, 0.05, 5, 2)).unwrap();
        g.assign_splits(SplitRatios::default(), 2);
        let p = partition(&g, &PartitionSpec { num_clients: 3, seed: 5, ..Default::default() }).unwrap();
        let mut bytes = Vec::new();
        write_partition(&p, &mut bytes).unwrap();
        let back = read_partition(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, p);
        let mut again = Vec::new();
        write_partition(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        assert!(matches!(read_partition(&mut &b"NOTACACHE...."[..]), Err(Error::Format(_))));
        let mut bytes = PARTITION_MAGIC.to_vec();
        bytes.extend_from_slice(&99u32.to_le_bytes());
        assert!(matches!(read_partition(&mut bytes.as_slice()), Err(Error::Format(_))));
    }
}
