//! File formats: binary masks and volumes, terminal/tree/trace/centerline
//! CSVs, legacy polydata export and ASCII PGM images.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! text artifact parses back bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::centerline::CenterlineGraph;
use crate::error::{Error, Result};
use crate::gco::TraceRecord;
use crate::linalg::Vec3;
use crate::raster::{Image2d, ScalarVolume};
use crate::sampling::TerminalSet;
use crate::tree::{HemoConfig, VesselTree};
use crate::voxel::VoxelMask;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::file(path, e))?))
}

// ---------------------------------------------------------------------------
// Mask and volume files: text header (dims / spacing / origin / blank line)
// followed by the raw payload, x fastest.
// ---------------------------------------------------------------------------

fn write_grid_header<W: Write>(
    w: &mut W,
    dims: [usize; 3],
    spacing: f64,
    origin: Vec3,
) -> std::io::Result<()> {
    writeln!(w, "dims {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "spacing {spacing}")?;
    writeln!(w, "origin {} {} {}", origin.x, origin.y, origin.z)?;
    writeln!(w)
}

struct GridHeader {
    dims: [usize; 3],
    spacing: f64,
    origin: Vec3,
}

fn read_grid_header<R: BufRead>(r: &mut R, path: &Path) -> Result<GridHeader> {
    let mut lines = Vec::new();
    for i in 0..4 {
        let mut line = String::new();
        let n = r.read_line(&mut line).map_err(|e| Error::file(path, e))?;
        if n == 0 {
            return Err(Error::format(path, i + 1, "truncated header"));
        }
        lines.push(line.trim_end_matches(['\n', '\r']).to_string());
    }
    if !lines[3].is_empty() {
        return Err(Error::format(path, 4, "expected blank line after header"));
    }
    let dims_parts: Vec<&str> = lines[0].split_whitespace().collect();
    if dims_parts.len() != 4 || dims_parts[0] != "dims" {
        return Err(Error::format(path, 1, "expected `dims X Y Z`"));
    }
    let mut dims = [0usize; 3];
    for (i, p) in dims_parts[1..].iter().enumerate() {
        dims[i] = p
            .parse()
            .map_err(|_| Error::format(path, 1, format!("bad dimension `{p}`")))?;
    }
    let spacing_parts: Vec<&str> = lines[1].split_whitespace().collect();
    if spacing_parts.len() != 2 || spacing_parts[0] != "spacing" {
        return Err(Error::format(path, 2, "expected `spacing S`"));
    }
    let spacing: f64 = spacing_parts[1]
        .parse()
        .map_err(|_| Error::format(path, 2, format!("bad spacing `{}`", spacing_parts[1])))?;
    let origin_parts: Vec<&str> = lines[2].split_whitespace().collect();
    if origin_parts.len() != 4 || origin_parts[0] != "origin" {
        return Err(Error::format(path, 3, "expected `origin OX OY OZ`"));
    }
    let mut o = [0.0f64; 3];
    for (i, p) in origin_parts[1..].iter().enumerate() {
        o[i] = p
            .parse()
            .map_err(|_| Error::format(path, 3, format!("bad origin component `{p}`")))?;
    }
    Ok(GridHeader { dims, spacing, origin: Vec3::new(o[0], o[1], o[2]) })
}

pub fn write_mask(path: impl AsRef<Path>, mask: &VoxelMask) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_grid_header(&mut w, mask.dims(), mask.spacing(), mask.origin())
        .map_err(|e| Error::file(path, e))?;
    w.write_all(mask.data()).map_err(|e| Error::file(path, e))?;
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<VoxelMask> {
    let path = path.as_ref();
    let mut r = open(path)?;
    let h = read_grid_header(&mut r, path)?;
    let mut data = Vec::new();
    r.read_to_end(&mut data).map_err(|e| Error::file(path, e))?;
    VoxelMask::from_raw(h.dims, h.spacing, h.origin, data)
        .map_err(|e| Error::format(path, 5, e.to_string()))
}

/// Same header as masks, payload of little-endian f32.
pub fn write_volume(path: impl AsRef<Path>, vol: &ScalarVolume) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_grid_header(&mut w, vol.dims, vol.spacing, vol.origin).map_err(|e| Error::file(path, e))?;
    for v in &vol.data {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::file(path, e))?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let path = path.as_ref();
    let mut r = open(path)?;
    let h = read_grid_header(&mut r, path)?;
    let n = h.dims[0] * h.dims[1] * h.dims[2];
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::file(path, e))?;
    if bytes.len() != n * 4 {
        return Err(Error::format(
            path,
            5,
            format!("payload has {} bytes, dims require {}", bytes.len(), n * 4),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(ScalarVolume { dims: h.dims, spacing: h.spacing, origin: h.origin, data })
}

// ---------------------------------------------------------------------------
// Terminal CSV: header `x,y,z,radius`, μm units.
// ---------------------------------------------------------------------------

pub fn write_terminals(path: impl AsRef<Path>, terminals: &TerminalSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "x,y,z,radius").map_err(|e| Error::file(path, e))?;
    for (p, r) in terminals.positions.iter().zip(&terminals.radii) {
        writeln!(w, "{},{},{},{}", p.x, p.y, p.z, r).map_err(|e| Error::file(path, e))?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn read_terminals(path: impl AsRef<Path>) -> Result<TerminalSet> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(Error::Csv)?;
    let mut positions = Vec::new();
    let mut radii = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 4 {
            return Err(Error::format(path, line, format!("expected 4 columns, got {}", record.len())));
        }
        let field = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, line, format!("bad float `{}`", &record[j])))
        };
        positions.push(Vec3::new(field(0)?, field(1)?, field(2)?));
        radii.push(field(3)?);
    }
    Ok(TerminalSet { positions, radii })
}

// ---------------------------------------------------------------------------
// Tree CSV pair: `<prefix>_nodes.csv` (id,x,y,z,is_terminal) and
// `<prefix>_edges.csv` (id,parent_node,child_node,radius,flow,strahler).
// ---------------------------------------------------------------------------

pub fn tree_paths(prefix: impl AsRef<Path>) -> (std::path::PathBuf, std::path::PathBuf) {
    let prefix = prefix.as_ref();
    let stem = prefix.to_string_lossy();
    (format!("{stem}_nodes.csv").into(), format!("{stem}_edges.csv").into())
}

pub fn write_tree(prefix: impl AsRef<Path>, tree: &VesselTree) -> Result<()> {
    let (nodes_path, edges_path) = tree_paths(&prefix);
    let orders = tree.strahler_orders();

    let mut w = create(&nodes_path)?;
    writeln!(w, "id,x,y,z,is_terminal").map_err(|e| Error::file(&nodes_path, e))?;
    for n in tree.node_ids() {
        let node = tree.node(n);
        writeln!(w, "{},{},{},{},{}", n, node.pos.x, node.pos.y, node.pos.z, node.is_terminal as u8)
            .map_err(|e| Error::file(&nodes_path, e))?;
    }
    w.flush().map_err(|e| Error::file(&nodes_path, e))?;

    let mut w = create(&edges_path)?;
    writeln!(w, "id,parent_node,child_node,radius,flow,strahler")
        .map_err(|e| Error::file(&edges_path, e))?;
    for e in tree.edge_ids() {
        let edge = tree.edge(e);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e,
            edge.parent,
            edge.child,
            edge.radius,
            edge.flow,
            orders[e].unwrap_or(0)
        )
        .map_err(|e| Error::file(&edges_path, e))?;
    }
    w.flush().map_err(|e| Error::file(&edges_path, e))?;
    Ok(())
}

pub fn read_tree(prefix: impl AsRef<Path>) -> Result<VesselTree> {
    let (nodes_path, edges_path) = tree_paths(&prefix);

    struct RawNode {
        id: usize,
        pos: Vec3,
        is_terminal: bool,
    }
    let mut raw_nodes = Vec::new();
    let mut rdr = csv::Reader::from_path(&nodes_path).map_err(Error::Csv)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 5 {
            return Err(Error::format(&nodes_path, line, "expected 5 columns"));
        }
        let id: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(&nodes_path, line, format!("bad id `{}`", &record[0])))?;
        let f = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(&nodes_path, line, format!("bad float `{}`", &record[j])))
        };
        let is_terminal = match record[4].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::format(&nodes_path, line, format!("bad is_terminal `{other}`"))),
        };
        raw_nodes.push(RawNode { id, pos: Vec3::new(f(1)?, f(2)?, f(3)?), is_terminal });
    }
    if raw_nodes.is_empty() {
        return Err(Error::format(&nodes_path, 1, "tree has no nodes"));
    }

    struct RawEdge {
        id: usize,
        parent: usize,
        child: usize,
        radius: f64,
        flow: f64,
    }
    let mut raw_edges = Vec::new();
    let mut rdr = csv::Reader::from_path(&edges_path).map_err(Error::Csv)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 6 {
            return Err(Error::format(&edges_path, line, "expected 6 columns"));
        }
        let u = |j: usize| -> Result<usize> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(&edges_path, line, format!("bad integer `{}`", &record[j])))
        };
        let f = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(&edges_path, line, format!("bad float `{}`", &record[j])))
        };
        raw_edges.push(RawEdge { id: u(0)?, parent: u(1)?, child: u(2)?, radius: f(3)?, flow: f(4)? });
    }

    // The root is the unique node that never appears as an edge child.
    let mut has_parent = std::collections::BTreeSet::new();
    for e in &raw_edges {
        if !has_parent.insert(e.child) {
            return Err(Error::format(&edges_path, 1, format!("node {} has two parents", e.child)));
        }
    }
    let roots: Vec<usize> =
        raw_nodes.iter().filter(|n| !has_parent.contains(&n.id)).map(|n| n.id).collect();
    if roots.len() != 1 {
        return Err(Error::format(&nodes_path, 1, format!("expected exactly 1 root, found {}", roots.len())));
    }

    // Rebuild with the original ids preserved (dense storage with holes).
    let root_id = roots[0];
    let root_node = raw_nodes.iter().find(|n| n.id == root_id).unwrap();
    let mut tree = VesselTree::with_root_id(root_id, root_node.pos);
    for n in &raw_nodes {
        if n.id != root_id {
            tree.insert_node_at(n.id, n.pos, n.is_terminal)
                .map_err(|e| Error::format(&nodes_path, 1, e.to_string()))?;
        }
    }
    for e in &raw_edges {
        tree.insert_edge_at(e.id, e.parent, e.child, e.radius, e.flow)
            .map_err(|err| Error::format(&edges_path, 1, err.to_string()))?;
    }
    Ok(tree)
}

// ---------------------------------------------------------------------------
// Trace CSV: iteration,phase,cost,nodes,edges.
// ---------------------------------------------------------------------------

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "iteration,phase,cost,nodes,edges").map_err(|e| Error::file(path, e))?;
    for r in trace {
        writeln!(w, "{},{},{},{},{}", r.iteration, r.phase.as_str(), r.cost, r.nodes, r.edges)
            .map_err(|e| Error::file(path, e))?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Centerline ingestion: nodes.csv (id,x,y,z[,radius]), edges.csv
// (id_a,id_b[,radius]).
// ---------------------------------------------------------------------------

pub fn read_centerline(
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
) -> Result<CenterlineGraph> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let mut graph = CenterlineGraph::new();

    let mut rdr = csv::Reader::from_path(nodes_path).map_err(Error::Csv)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 4 && record.len() != 5 {
            return Err(Error::format(nodes_path, line, "expected 4 or 5 columns"));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(nodes_path, line, format!("bad id `{}`", &record[0])))?;
        let f = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(nodes_path, line, format!("bad float `{}`", &record[j])))
        };
        let radius = if record.len() == 5 { Some(f(4)?) } else { None };
        graph
            .add_node(id, Vec3::new(f(1)?, f(2)?, f(3)?), radius)
            .map_err(|e| Error::format(nodes_path, line, e.to_string()))?;
    }

    let mut rdr = csv::Reader::from_path(edges_path).map_err(Error::Csv)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 2 && record.len() != 3 {
            return Err(Error::format(edges_path, line, "expected 2 or 3 columns"));
        }
        let u = |j: usize| -> Result<u64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(edges_path, line, format!("bad id `{}`", &record[j])))
        };
        let radius = if record.len() == 3 {
            Some(record[2].trim().parse::<f64>().map_err(|_| {
                Error::format(edges_path, line, format!("bad radius `{}`", &record[2]))
            })?)
        } else {
            None
        };
        graph
            .add_edge(u(0)?, u(1)?, radius)
            .map_err(|e| Error::format(edges_path, line, e.to_string()))?;
    }
    Ok(graph)
}

// ---------------------------------------------------------------------------
// Legacy polydata export: one polyline per vessel segment with radius, flow
// and outlet pressure as cell scalars. Readable by common scientific viewers.
// ---------------------------------------------------------------------------

pub fn write_vtk_polydata(
    path: impl AsRef<Path>,
    tree: &VesselTree,
    hemo: Option<&HemoConfig>,
) -> Result<()> {
    let path = path.as_ref();
    let pressures = match hemo {
        Some(cfg) => Some(tree.compute_pressures(cfg)?),
        None => None,
    };
    let mut w = create(path)?;
    let werr = |e| Error::file(path, e);

    // Point table: compact node ids.
    let node_ids: Vec<usize> = tree.node_ids().collect();
    let mut point_index = std::collections::BTreeMap::new();
    for (i, &n) in node_ids.iter().enumerate() {
        point_index.insert(n, i);
    }

    writeln!(w, "# vtk DataFile Version 3.0").map_err(werr)?;
    writeln!(w, "vessel tree").map_err(werr)?;
    writeln!(w, "ASCII").map_err(werr)?;
    writeln!(w, "DATASET POLYDATA").map_err(werr)?;
    writeln!(w, "POINTS {} double", node_ids.len()).map_err(werr)?;
    for &n in &node_ids {
        let p = tree.node(n).pos;
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(werr)?;
    }
    let edge_ids: Vec<usize> = tree.edge_ids().collect();
    writeln!(w, "LINES {} {}", edge_ids.len(), edge_ids.len() * 3).map_err(werr)?;
    for &e in &edge_ids {
        let edge = tree.edge(e);
        writeln!(w, "2 {} {}", point_index[&edge.parent], point_index[&edge.child]).map_err(werr)?;
    }
    writeln!(w, "CELL_DATA {}", edge_ids.len()).map_err(werr)?;
    writeln!(w, "SCALARS radius double 1").map_err(werr)?;
    writeln!(w, "LOOKUP_TABLE default").map_err(werr)?;
    for &e in &edge_ids {
        writeln!(w, "{}", tree.edge(e).radius).map_err(werr)?;
    }
    writeln!(w, "SCALARS flow double 1").map_err(werr)?;
    writeln!(w, "LOOKUP_TABLE default").map_err(werr)?;
    for &e in &edge_ids {
        writeln!(w, "{}", tree.edge(e).flow).map_err(werr)?;
    }
    if let Some(p) = pressures {
        writeln!(w, "SCALARS pressure_mmhg double 1").map_err(werr)?;
        writeln!(w, "LOOKUP_TABLE default").map_err(werr)?;
        for &e in &edge_ids {
            let child = tree.edge(e).child;
            writeln!(w, "{}", crate::units::internal_to_mmhg(p[&child])).map_err(werr)?;
        }
    }
    w.flush().map_err(werr)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// ASCII PGM (P2) for projection images; [0,1] mapped to [0,255].
// ---------------------------------------------------------------------------

pub fn write_pgm(path: impl AsRef<Path>, image: &Image2d) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let werr = |e| Error::file(path, e);
    writeln!(w, "P2").map_err(werr)?;
    writeln!(w, "{} {}", image.width, image.height).map_err(werr)?;
    writeln!(w, "255").map_err(werr)?;
    for row in 0..image.height {
        let line: Vec<String> = (0..image.width)
            .map(|col| {
                let v = image.data[col + row * image.width].clamp(0.0, 1.0);
                format!("{}", (v * 255.0).round() as u8)
            })
            .collect();
        writeln!(w, "{}", line.join(" ")).map_err(werr)?;
    }
    w.flush().map_err(werr)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn mask_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.mask");
        let mut mask = VoxelMask::new([4, 3, 2], 22.6, Vec3::new(1.5, -2.0, 0.25)).unwrap();
        mask.set([0, 0, 0], true);
        mask.set([3, 2, 1], true);
        write_mask(&path, &mask).unwrap();
        let back = read_mask(&path).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn mask_rejects_bad_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.mask");
        std::fs::write(&path, b"dims 2 2 2\nspacing 1\norigin 0 0 0\n\n\x00\x01\x02").unwrap();
        assert!(read_mask(&path).is_err());
    }

    #[test]
    fn volume_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("v.vol");
        let vol = ScalarVolume {
            dims: [2, 2, 2],
            spacing: 1.0,
            origin: Vec3::ZERO,
            data: vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.1, 0.9, 0.33],
        };
        write_volume(&path, &vol).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back.data, vol.data);
    }

    #[test]
    fn terminals_round_trip_preserves_floats() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = TerminalSet {
            positions: vec![Vec3::new(0.1 + 0.2, 1.0 / 3.0, 1e-17), Vec3::new(5.5, -2.25, 3.0)],
            radii: vec![10.08, std::f64::consts::PI],
        };
        write_terminals(&path, &t).unwrap();
        let back = read_terminals(&path).unwrap();
        assert_eq!(back.positions, t.positions);
        assert_eq!(back.radii, t.radii);
    }

    #[test]
    fn tree_round_trip() {
        let dir = tempdir().unwrap();
        let prefix = dir.path().join("tree");
        let mut t = VesselTree::new(Vec3::new(0.5, 0.25, -1.0));
        let a = t.add_node(Vec3::new(100.0, 0.0, 0.0), false);
        let b = t.add_node(Vec3::new(200.0, 50.0, 0.0), true);
        let c = t.add_node(Vec3::new(200.0, -50.0, 0.0), true);
        t.add_edge(t.root(), a, 12.6, 200.0).unwrap();
        t.add_edge(a, b, 10.0, 100.0).unwrap();
        t.add_edge(a, c, 10.0, 100.0).unwrap();
        write_tree(&prefix, &t).unwrap();
        let back = read_tree(&prefix).unwrap();
        assert_eq!(back.num_nodes(), 4);
        assert_eq!(back.num_edges(), 3);
        assert_eq!(back.root(), t.root());
        for e in t.edge_ids() {
            assert_eq!(back.edge(e).radius, t.edge(e).radius);
            assert_eq!(back.edge(e).flow, t.edge(e).flow);
        }
        assert!(back.node(b).is_terminal);
        assert!(back.validate().is_empty());
    }

    #[test]
    fn centerline_round_trip() {
        let dir = tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let edges = dir.path().join("edges.csv");
        std::fs::write(&nodes, "id,x,y,z,radius\n0,0,0,0,20\n1,100,0,0,15\n2,200,0,0,\n").unwrap();
        std::fs::write(&edges, "id_a,id_b,radius\n0,1,18\n1,2,\n").unwrap();
        // Empty radius column parses as an error; write explicit files instead.
        let r = read_centerline(&nodes, &edges);
        assert!(r.is_err());

        std::fs::write(&nodes, "id,x,y,z,radius\n0,0,0,0,20\n1,100,0,0,15\n").unwrap();
        std::fs::write(&edges, "id_a,id_b,radius\n0,1,18\n").unwrap();
        let g = read_centerline(&nodes, &edges).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges()[0].radius, Some(18.0));

        std::fs::write(&nodes, "id,x,y,z\n0,0,0,0\n1,100,0,0\n").unwrap();
        std::fs::write(&edges, "id_a,id_b\n0,1\n").unwrap();
        let g = read_centerline(&nodes, &edges).unwrap();
        assert_eq!(g.edges()[0].radius, None);
    }

    #[test]
    fn vtk_export_smoke() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("tree.vtk");
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(100.0, 0.0, 0.0), true);
        t.add_edge(t.root(), a, 10.0, 1e6).unwrap();
        write_vtk_polydata(&path, &t, Some(&HemoConfig::default())).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("DATASET POLYDATA"));
        assert!(text.contains("POINTS 2 double"));
        assert!(text.contains("LINES 1 3"));
        assert!(text.contains("SCALARS pressure_mmhg double 1"));
    }

    #[test]
    fn pgm_layout() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = Image2d { width: 2, height: 2, data: vec![0.0, 1.0, 0.5, 2.0] };
        write_pgm(&path, &img).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "P2");
        assert_eq!(lines[1], "2 2");
        assert_eq!(lines[2], "255");
        assert_eq!(lines[3], "0 255");
        assert_eq!(lines[4], "128 255");
    }
}
