//! Binary index file.
//!
//! Layout: magic `VIGT`, format version, build seed, diameter, counts, then
//! the network, the G-Tree, per-node inverted files and edge postings, and
//! finally a SHA-256 of everything before it. Integers and floats are
//! little-endian and fixed-width; arrays carry a `u64` length prefix.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gtree::{GTree, GTreeConfig, Mbr, NodeParts};
use crate::road_graph::{Edge, EdgePosition, GeoVisualObject, Node, RoadNetwork};
use crate::vig_index::{finish, EdgePostings, VigTree};
use crate::visual::{InvertedFile, VisualDescriptor};

pub const MAGIC: &[u8; 4] = b"VIGT";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32s(&mut self, v: &[u32]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u32(x));
    }
    fn u64s(&mut self, v: &[u64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corrupt("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, width: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(width).is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(Error::Corrupt("array length exceeds data".into()));
        }
        Ok(n)
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
}

fn write_network(w: &mut Writer, net: &RoadNetwork) {
    let nodes = net.nodes();
    w.f64s(&nodes.iter().map(|n| n.x).collect::<Vec<_>>());
    w.f64s(&nodes.iter().map(|n| n.y).collect::<Vec<_>>());
    let edges = net.edges();
    w.u32s(&edges.iter().map(|e| e.u).collect::<Vec<_>>());
    w.u32s(&edges.iter().map(|e| e.v).collect::<Vec<_>>());
    w.f64s(&edges.iter().map(|e| e.weight).collect::<Vec<_>>());
}

/// Hex SHA-256 of the network's nodes and edges; workloads record it so a
/// benchmark can refuse to run against a different network.
pub fn network_hash(net: &RoadNetwork) -> String {
    let mut w = Writer::default();
    write_network(&mut w, net);
    Sha256::digest(&w.0).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn serialize(index: &VigTree) -> Vec<u8> {
    let net = index.network();
    let tree = index.gtree();
    let config = tree.config();
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u64(config.seed);
    w.f64(index.diameter());
    w.u64(net.num_nodes() as u64);
    w.u64(net.num_edges() as u64);
    w.u64(net.objects().len() as u64);
    w.u64(tree.nodes().len() as u64);
    w.f64(index.mu_default());
    w.u32(config.fanout as u32);
    w.u32(config.leaf_capacity as u32);

    write_network(&mut w, net);
    let objects = net.objects();
    w.u64s(&objects.iter().map(|o| o.id).collect::<Vec<_>>());
    w.u32s(&objects.iter().map(|o| o.position.edge).collect::<Vec<_>>());
    w.f64s(&objects.iter().map(|o| o.position.offset).collect::<Vec<_>>());
    for o in objects {
        w.u32s(o.words.words());
    }

    for p in tree.to_parts() {
        w.u32(p.parent.unwrap_or(u32::MAX));
        w.u32s(&p.children);
        w.u32s(&p.vertices);
        w.u32s(&p.borders);
        w.f64s(&[p.mbr.min_x, p.mbr.min_y, p.mbr.max_x, p.mbr.max_y]);
        w.u32s(&p.edge_ids);
        w.f64s(&p.matrix);
    }

    for node in tree.nodes() {
        let (words, offsets, targets) = index.node_file(node.id).raw_parts();
        w.u32s(words);
        w.u32s(offsets);
        w.u32s(targets);
    }

    for part in index.postings().raw_parts() {
        w.u32s(part);
    }

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn deserialize(bytes: &[u8]) -> Result<VigTree> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Version("not an index file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Version(format!("format version {version}, expected {VERSION}")));
    }
    if bytes.len() < 8 + CHECKSUM_LEN {
        return Err(Error::Checksum);
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body)[..] != *stored {
        return Err(Error::Checksum);
    }

    let mut r = Reader { buf: body, pos: 8 };
    let seed = r.u64()?;
    let diameter = r.f64()?;
    let n_nodes = r.u64()? as usize;
    let n_edges = r.u64()? as usize;
    let n_objects = r.u64()? as usize;
    let n_tree = r.u64()? as usize;
    let mu_default = r.f64()?;
    let fanout = r.u32()? as usize;
    let leaf_capacity = r.u32()? as usize;
    let count_mismatch = || Error::Corrupt("section length disagrees with header counts".into());

    let (xs, ys) = (r.f64s()?, r.f64s()?);
    let (us, vs, ws) = (r.u32s()?, r.u32s()?, r.f64s()?);
    if xs.len() != n_nodes || ys.len() != n_nodes || us.len() != n_edges || vs.len() != n_edges || ws.len() != n_edges {
        return Err(count_mismatch());
    }
    let nodes = (0..n_nodes)
        .map(|i| Node {
            id: i as u32,
            x: xs[i],
            y: ys[i],
        })
        .collect();
    let edges = (0..n_edges)
        .map(|i| Edge {
            id: i as u32,
            u: us[i],
            v: vs[i],
            weight: ws[i],
        })
        .collect();
    let mut net = RoadNetwork::new(nodes, edges)?;
    net.set_diameter(diameter)?;

    let (ids, oedges, offsets) = (r.u64s()?, r.u32s()?, r.f64s()?);
    if ids.len() != n_objects || oedges.len() != n_objects || offsets.len() != n_objects {
        return Err(count_mismatch());
    }
    let mut objects = Vec::with_capacity(n_objects);
    for i in 0..n_objects {
        let words = r.u32s()?;
        if !words.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::Corrupt(format!("object {} words unsorted", ids[i])));
        }
        objects.push(GeoVisualObject {
            id: ids[i],
            position: EdgePosition::new(oedges[i], offsets[i]),
            words: VisualDescriptor::from_sorted(words),
        });
    }
    let net = net.attach_objects(objects)?;

    let mut parts = Vec::with_capacity(n_tree.min(body.len()));
    for _ in 0..n_tree {
        let parent = r.u32()?;
        let children = r.u32s()?;
        let vertices = r.u32s()?;
        let borders = r.u32s()?;
        let mbr = r.f64s()?;
        if mbr.len() != 4 {
            return Err(Error::Corrupt("node rectangle".into()));
        }
        parts.push(NodeParts {
            parent: (parent != u32::MAX).then_some(parent),
            children,
            vertices,
            borders,
            mbr: Mbr {
                min_x: mbr[0],
                min_y: mbr[1],
                max_x: mbr[2],
                max_y: mbr[3],
            },
            edge_ids: r.u32s()?,
            matrix: r.f64s()?,
        });
    }
    let config = GTreeConfig {
        fanout,
        leaf_capacity,
        seed,
    };
    let tree = GTree::from_parts(&net, config, parts)?;

    let mut files = Vec::with_capacity(n_tree);
    for _ in 0..n_tree {
        let (words, offsets, targets) = (r.u32s()?, r.u32s()?, r.u32s()?);
        files.push(InvertedFile::from_raw(words, offsets, targets)?);
    }
    let postings = EdgePostings::from_raw(&net, [r.u32s()?, r.u32s()?, r.u32s()?, r.u32s()?])?;
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes".into()));
    }
    Ok(finish(net, tree, files, postings, mu_default))
}

pub fn write_index(index: &VigTree, path: &Path) -> Result<()> {
    std::fs::write(path, serialize(index))?;
    Ok(())
}

pub fn read_index(path: &Path) -> Result<VigTree> {
    deserialize(&std::fs::read(path)?)
}
