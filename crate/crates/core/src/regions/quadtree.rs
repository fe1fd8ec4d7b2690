use std::io::{BufRead, Write};

use crate::ingest::CityBounds;

use super::RegionError;

pub type RegionId = u32;

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.01;
pub const DEFAULT_MAX_DEPTH: u32 = 16;

/// Child slots, in region-id assignment order.
pub const NW: usize = 0;
pub const NE: usize = 1;
pub const SW: usize = 2;
pub const SE: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadNode {
    pub bounds: CityBounds,
    pub visit_count: u64,
    pub depth: u32,
    pub children: Option<Box<[QuadNode; 4]>>,
    /// Set on leaves only.
    pub region_id: Option<RegionId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub region_id: RegionId,
    pub bounds: CityBounds,
    pub visit_count: u64,
    pub depth: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadTreeParams {
    pub threshold_fraction: f64,
    pub max_depth: u32,
}

impl Default for QuadTreeParams {
    fn default() -> Self {
        QuadTreeParams {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Quadrant index under the tie rule: a point on a split line goes north / east.
#[inline]
fn quadrant(lat: f64, lon: f64, lat_mid: f64, lon_mid: f64) -> usize {
    match (lat >= lat_mid, lon >= lon_mid) {
        (true, false) => NW,
        (true, true) => NE,
        (false, false) => SW,
        (false, true) => SE,
    }
}

fn child_bounds(b: &CityBounds) -> [CityBounds; 4] {
    let (lat_mid, lon_mid) = (b.lat_mid(), b.lon_mid());
    [
        CityBounds { lat_min: lat_mid, lat_max: b.lat_max, lon_min: b.lon_min, lon_max: lon_mid },
        CityBounds { lat_min: lat_mid, lat_max: b.lat_max, lon_min: lon_mid, lon_max: b.lon_max },
        CityBounds { lat_min: b.lat_min, lat_max: lat_mid, lon_min: b.lon_min, lon_max: lon_mid },
        CityBounds { lat_min: b.lat_min, lat_max: lat_mid, lon_min: lon_mid, lon_max: b.lon_max },
    ]
}

impl QuadNode {
    fn leaf(bounds: CityBounds, depth: u32, visit_count: u64) -> Self {
        QuadNode {
            bounds,
            visit_count,
            depth,
            children: None,
            region_id: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// Leaves in region-id order (depth-first NW, NE, SW, SE).
    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Leaf>) {
        match &self.children {
            Some(children) => children.iter().for_each(|c| c.collect_leaves(out)),
            None => out.push(Leaf {
                region_id: self.region_id.expect("leaf without region id"),
                bounds: self.bounds,
                visit_count: self.visit_count,
                depth: self.depth,
            }),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match &self.children {
            Some(children) => children.iter().map(QuadNode::leaf_count).sum(),
            None => 1,
        }
    }

    /// Region id of the leaf containing the point. The root box is closed on every
    /// edge; inside it, split lines belong to the north / east cell.
    pub fn locate(&self, lat: f64, lon: f64) -> Result<RegionId, RegionError> {
        if !self.bounds.contains(lat, lon) {
            return Err(RegionError::OutOfBounds { lat, lon });
        }
        let mut node = self;
        while let Some(children) = &node.children {
            node = &children[quadrant(lat, lon, node.bounds.lat_mid(), node.bounds.lon_mid())];
        }
        Ok(node.region_id.expect("leaf without region id"))
    }

    fn assign_ids(&mut self, next: &mut RegionId) {
        match &mut self.children {
            Some(children) => children.iter_mut().for_each(|c| c.assign_ids(next)),
            None => {
                self.region_id = Some(*next);
                *next += 1;
            }
        }
    }
}

/// Visit-density quad-tree: any node holding more than `threshold_fraction` of all
/// events is split into four equal quadrants, down to `max_depth`.
///
/// Events outside `bounds` are an error.
pub fn build_quadtree(events: &[(f64, f64)], bounds: &CityBounds, params: &QuadTreeParams) -> Result<QuadNode, RegionError> {
    bounds.validate().map_err(|_| RegionError::InvalidBounds(*bounds))?;
    let f = params.threshold_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(RegionError::InvalidThreshold(f));
    }
    if let Some(&(lat, lon)) = events.iter().find(|(lat, lon)| !bounds.contains(*lat, *lon)) {
        return Err(RegionError::OutOfBounds { lat, lon });
    }
    let threshold = f * events.len() as f64;
    let mut pts = events.to_vec();
    let mut root = split(&mut pts, *bounds, 0, threshold, params.max_depth);
    let mut next = 0;
    root.assign_ids(&mut next);
    Ok(root)
}

fn split(pts: &mut [(f64, f64)], bounds: CityBounds, depth: u32, threshold: f64, max_depth: u32) -> QuadNode {
    let count = pts.len() as u64;
    if (count as f64) <= threshold || depth >= max_depth {
        return QuadNode::leaf(bounds, depth, count);
    }
    let (lat_mid, lon_mid) = (bounds.lat_mid(), bounds.lon_mid());
    // in-place 4-way partition: bucket order NW, NE, SW, SE
    pts.sort_unstable_by_key(|&(lat, lon)| quadrant(lat, lon, lat_mid, lon_mid));
    let mut sizes = [0usize; 4];
    for &(lat, lon) in pts.iter() {
        sizes[quadrant(lat, lon, lat_mid, lon_mid)] += 1;
    }
    let cb = child_bounds(&bounds);
    let (nw, rest) = pts.split_at_mut(sizes[NW]);
    let (ne, rest) = rest.split_at_mut(sizes[NE]);
    let (sw, se) = rest.split_at_mut(sizes[SW]);
    let children = [
        split(nw, cb[NW], depth + 1, threshold, max_depth),
        split(ne, cb[NE], depth + 1, threshold, max_depth),
        split(sw, cb[SW], depth + 1, threshold, max_depth),
        split(se, cb[SE], depth + 1, threshold, max_depth),
    ];
    QuadNode {
        bounds,
        visit_count: count,
        depth,
        children: Some(Box::new(children)),
        region_id: None,
    }
}

pub fn format_leaf(l: &Leaf) -> String {
    let b = &l.bounds;
    format!("{};{};{};{};{};{}", l.region_id, b.lat_min, b.lat_max, b.lon_min, b.lon_max, l.visit_count)
}

/// Writes one `region_id;lat_min;lat_max;lon_min;lon_max;visit_count` line per leaf.
pub fn write_leaves<W: Write>(tree: &QuadNode, mut out: W) -> std::io::Result<()> {
    for leaf in tree.leaves() {
        writeln!(out, "{}", format_leaf(&leaf))?;
    }
    Ok(())
}

pub fn parse_leaf(line: &str) -> Result<Leaf, String> {
    let f: Vec<&str> = line.trim().split(';').collect();
    if f.len() != 6 {
        return Err(format!("expected 6 fields, got {}", f.len()));
    }
    let num = |i: usize| f[i].parse::<f64>().map_err(|_| format!("bad number '{}'", f[i]));
    Ok(Leaf {
        region_id: f[0].parse().map_err(|_| format!("bad region id '{}'", f[0]))?,
        bounds: CityBounds {
            lat_min: num(1)?,
            lat_max: num(2)?,
            lon_min: num(3)?,
            lon_max: num(4)?,
        },
        visit_count: f[5].parse().map_err(|_| format!("bad count '{}'", f[5]))?,
        depth: 0,
    })
}

/// Rebuilds a tree from its serialized leaves. Leaf bounds must come from a quad-tree
/// (exact midpoint splits); coordinates written by [`write_leaves`] round-trip exactly.
pub fn read_leaves<R: BufRead>(source: R) -> Result<QuadNode, RegionError> {
    let mut leaves = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        leaves.push(parse_leaf(&line).map_err(|e| RegionError::Parse { line: i + 1, reason: e })?);
    }
    tree_from_leaves(leaves)
}

pub fn tree_from_leaves(leaves: Vec<Leaf>) -> Result<QuadNode, RegionError> {
    if leaves.is_empty() {
        return Err(RegionError::Malformed("no leaves".into()));
    }
    let root = CityBounds {
        lat_min: leaves.iter().map(|l| l.bounds.lat_min).fold(f64::INFINITY, f64::min),
        lat_max: leaves.iter().map(|l| l.bounds.lat_max).fold(f64::NEG_INFINITY, f64::max),
        lon_min: leaves.iter().map(|l| l.bounds.lon_min).fold(f64::INFINITY, f64::min),
        lon_max: leaves.iter().map(|l| l.bounds.lon_max).fold(f64::NEG_INFINITY, f64::max),
    };
    let tree = rebuild(&leaves, root, 0)?;
    let rebuilt = tree.leaves();
    if rebuilt.len() != leaves.len()
        || rebuilt.iter().zip(&leaves).any(|(a, b)| a.region_id != b.region_id)
    {
        return Err(RegionError::Malformed("leaf ids are not in depth-first order".into()));
    }
    Ok(tree)
}

fn rebuild(leaves: &[Leaf], bounds: CityBounds, depth: u32) -> Result<QuadNode, RegionError> {
    if depth > 64 {
        return Err(RegionError::Malformed("leaves do not form a quad-tree".into()));
    }
    if let [only] = leaves {
        if only.bounds == bounds {
            return Ok(QuadNode {
                bounds,
                visit_count: only.visit_count,
                depth,
                children: None,
                region_id: Some(only.region_id),
            });
        }
    }
    let cb = child_bounds(&bounds);
    let mut parts: [Vec<Leaf>; 4] = Default::default();
    for leaf in leaves {
        let b = &leaf.bounds;
        let slot = cb
            .iter()
            .position(|c| b.lat_min >= c.lat_min && b.lat_max <= c.lat_max && b.lon_min >= c.lon_min && b.lon_max <= c.lon_max)
            .ok_or_else(|| RegionError::Malformed(format!("leaf {} straddles a split line", leaf.region_id)))?;
        parts[slot].push(leaf.clone());
    }
    if parts.iter().any(Vec::is_empty) {
        return Err(RegionError::Malformed("leaves do not tile their parent".into()));
    }
    let children = [
        rebuild(&parts[NW], cb[NW], depth + 1)?,
        rebuild(&parts[NE], cb[NE], depth + 1)?,
        rebuild(&parts[SW], cb[SW], depth + 1)?,
        rebuild(&parts[SE], cb[SE], depth + 1)?,
    ];
    Ok(QuadNode {
        bounds,
        visit_count: children.iter().map(|c| c.visit_count).sum(),
        depth,
        children: Some(Box::new(children)),
        region_id: None,
    })
}
