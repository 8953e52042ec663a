//! Tree-margin region: the predicate "is this sample inside the figure to be
//! coloured". Regions are input artifacts, either a binary raster (PBM) or a
//! set of polygon rings, in their own pixel space; device coordinates are
//! scaled proportionally when the canvas size differs.
//!
//! Points on a polygon outline count as inside. Interior points follow the
//! even-odd rule over all rings, so a ring nested in another is a hole.

use std::path::Path;

use crate::error::{Error, Result};

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Row-major, `true` = inside.
    Raster(Vec<bool>),
    Polygons(Vec<Vec<Point>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub width: u32,
    pub height: u32,
    pub shape: Shape,
    /// Device-to-mask scale factors.
    scale: (f64, f64),
}

const BOUNDARY_EPS: f64 = 1e-9;

impl RegionMask {
    pub fn raster(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Region(format!(
                "raster has {} cells, expected {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            shape: Shape::Raster(bits),
            scale: (1.0, 1.0),
        })
    }

    /// Builds a polygon region. Rings are closed implicitly; a repeated
    /// closing vertex is dropped. Rings must have three or more vertices and
    /// must not self-intersect.
    pub fn polygons(width: u32, height: u32, rings: Vec<Vec<Point>>) -> Result<Self> {
        let mut closed = Vec::with_capacity(rings.len());
        for (k, mut ring) in rings.into_iter().enumerate() {
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            if ring.len() < 3 {
                return Err(Error::Region(format!("ring {} has fewer than 3 vertices", k + 1)));
            }
            if ring.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::Region(format!("ring {} has a non-finite vertex", k + 1)));
            }
            if let Some((a, b)) = self_intersection(&ring) {
                return Err(Error::Region(format!(
                    "ring {} self-intersects (edges {a} and {b})",
                    k + 1
                )));
            }
            closed.push(ring);
        }
        if closed.is_empty() {
            return Err(Error::Region("no rings".into()));
        }
        Ok(Self {
            width,
            height,
            shape: Shape::Polygons(closed),
            scale: (1.0, 1.0),
        })
    }

    /// Region for a device canvas of `width x height` pixels. Returns a
    /// warning when the sizes differ and scaling is applied.
    pub fn for_canvas(mut self, width: u32, height: u32) -> (Self, Option<String>) {
        if width == 0 || height == 0 {
            return (self, None);
        }
        self.scale = (
            f64::from(self.width) / f64::from(width),
            f64::from(self.height) / f64::from(height),
        );
        let warning = (width != self.width || height != self.height).then(|| {
            format!(
                "region is {}x{} but the device canvas is {width}x{height}; scaling proportionally",
                self.width, self.height
            )
        });
        (self, warning)
    }

    pub fn scale(&self) -> (f64, f64) {
        self.scale
    }

    /// Whether device point `(x, y)` lies inside the region. Points off the
    /// canvas are outside.
    pub fn point_inside(&self, x: f64, y: f64) -> bool {
        if !x.is_finite() || !y.is_finite() {
            return false;
        }
        let (mx, my) = (x * self.scale.0, y * self.scale.1);
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        match &self.shape {
            Shape::Raster(bits) => {
                if mx < 0.0 || my < 0.0 || mx >= w || my >= h {
                    return false;
                }
                let (col, row) = (mx.floor() as usize, my.floor() as usize);
                bits[row * self.width as usize + col]
            }
            Shape::Polygons(rings) => {
                if mx < 0.0 || my < 0.0 || mx > w || my > h {
                    return false;
                }
                if rings.iter().any(|r| on_boundary(r, (mx, my))) {
                    return true;
                }
                rings.iter().filter(|r| crosses_odd(r, (mx, my))).count() % 2 == 1
            }
        }
    }

    pub fn inside_count(&self) -> Option<usize> {
        match &self.shape {
            Shape::Raster(bits) => Some(bits.iter().filter(|&&b| b).count()),
            Shape::Polygons(_) => None,
        }
    }

    /// A point well inside the region (area centroid of the largest ring, or
    /// the mean of inside pixels), in device coordinates.
    pub fn anchor(&self) -> Point {
        let (cx, cy) = match &self.shape {
            Shape::Raster(bits) => {
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
                for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
                    sx += (i % self.width as usize) as f64 + 0.5;
                    sy += (i / self.width as usize) as f64 + 0.5;
                    n += 1.0;
                }
                if n == 0.0 {
                    (f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
                } else {
                    (sx / n, sy / n)
                }
            }
            Shape::Polygons(rings) => {
                let ring = rings
                    .iter()
                    .max_by(|a, b| signed_area(a).abs().total_cmp(&signed_area(b).abs()))
                    .expect("validated non-empty");
                area_centroid(ring)
            }
        };
        (cx / self.scale.0, cy / self.scale.1)
    }

    /// Device-space bounding box of the inside set: `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (lo_x, lo_y, hi_x, hi_y) = match &self.shape {
            Shape::Raster(bits) => {
                let w = self.width as usize;
                let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
                for (i, _) in bits.iter().enumerate().filter(|(_, v)| **v) {
                    let (c, r) = ((i % w) as f64, (i / w) as f64);
                    b = (b.0.min(c), b.1.min(r), b.2.max(c + 1.0), b.3.max(r + 1.0));
                }
                if b.0.is_infinite() {
                    (0.0, 0.0, f64::from(self.width), f64::from(self.height))
                } else {
                    b
                }
            }
            Shape::Polygons(rings) => rings.iter().flatten().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |b, &(x, y)| (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y)),
            ),
        };
        (
            lo_x / self.scale.0,
            lo_y / self.scale.1,
            hi_x / self.scale.0,
            hi_y / self.scale.1,
        )
    }

    /// Rasterizes a polygon region at pixel centers with a scanline fill.
    pub fn rasterize(&self) -> Result<RegionMask> {
        let Shape::Polygons(rings) = &self.shape else {
            return Ok(RegionMask {
                scale: (1.0, 1.0),
                ..self.clone()
            });
        };
        let (w, h) = (self.width as usize, self.height as usize);
        let mut bits = vec![false; w * h];
        for (row, line) in bits.chunks_mut(w).enumerate() {
            let yc = row as f64 + 0.5;
            let mut xs: Vec<f64> = Vec::new();
            for ring in rings {
                for (i, &(x1, y1)) in ring.iter().enumerate() {
                    let (x2, y2) = ring[(i + 1) % ring.len()];
                    if (y1 <= yc) != (y2 <= yc) {
                        xs.push(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let first = (pair[0] - 0.5).ceil().max(0.0) as usize;
                let last = (pair[1] - 0.5).floor();
                if last < 0.0 {
                    continue;
                }
                for cell in line.iter_mut().take((last as usize + 1).min(w)).skip(first) {
                    *cell = true;
                }
            }
            // Centers lying exactly on a non-horizontal edge count as inside.
            for (col, cell) in line.iter_mut().enumerate() {
                if !*cell && rings.iter().any(|r| on_boundary(r, (col as f64 + 0.5, yc))) {
                    *cell = true;
                }
            }
        }
        RegionMask::raster(self.width, self.height, bits)
    }
}

fn crosses_odd(ring: &[Point], (px, py): Point) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn on_boundary(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    (0..n).any(|i| point_on_segment(p, ring[i], ring[(i + 1) % n]))
}

fn point_on_segment((px, py): Point, (ax, ay): Point, (bx, by): Point) -> bool {
    let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    if cross.abs() > BOUNDARY_EPS * len.max(1.0) {
        return false;
    }
    px >= ax.min(bx) - BOUNDARY_EPS
        && px <= ax.max(bx) + BOUNDARY_EPS
        && py >= ay.min(by) - BOUNDARY_EPS
        && py <= ay.max(by) + BOUNDARY_EPS
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && point_on_segment(p1, q1, q2))
        || (d2 == 0.0 && point_on_segment(p2, q1, q2))
        || (d3 == 0.0 && point_on_segment(q1, p1, p2))
        || (d4 == 0.0 && point_on_segment(q2, p1, p2))
}

/// First pair of non-adjacent edges that touch, 1-based.
fn self_intersection(ring: &[Point]) -> Option<(usize, usize)> {
    let n = ring.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return Some((i + 1, j + 1));
            }
        }
    }
    None
}

fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

fn area_centroid(ring: &[Point]) -> Point {
    let a = signed_area(ring);
    let n = ring.len();
    if a.abs() < 1e-12 {
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1));
        return (sx / n as f64, sy / n as f64);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (ring[i], ring[(i + 1) % n]);
        let c = p.0 * q.1 - q.0 * p.1;
        cx += (p.0 + q.0) * c;
        cy += (p.1 + q.1) * c;
    }
    (cx / (6.0 * a), cy / (6.0 * a))
}

/// Parses the polygon text format: optional `canvas W H` line, then one ring
/// per line as `x0 y0 x1 y1 ...`. `#` starts a comment line.
pub fn parse_polygon_text(text: &str) -> Result<RegionMask> {
    let mut canvas = None;
    let mut rings = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| Error::Region(format!("line {}: {m}", lineno + 1));
        if let Some(rest) = line.strip_prefix("canvas") {
            let dims: Vec<u32> = rest
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad("bad canvas size")))
                .collect::<Result<_>>()?;
            if dims.len() != 2 {
                return Err(bad("canvas needs width and height"));
            }
            canvas = Some((dims[0], dims[1]));
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad coordinate")))
            .collect::<Result<_>>()?;
        if nums.len() % 2 != 0 {
            return Err(bad("odd number of coordinates"));
        }
        rings.push(nums.chunks_exact(2).map(|c| (c[0], c[1])).collect::<Vec<_>>());
    }
    let (w, h) = canvas.unwrap_or_else(|| {
        let (mx, my) = rings
            .iter()
            .flatten()
            .fold((0.0f64, 0.0f64), |m, p| (m.0.max(p.0), m.1.max(p.1)));
        (mx.ceil() as u32, my.ceil() as u32)
    });
    RegionMask::polygons(w, h, rings)
}

/// Parses a PBM image, binary (`P4`) or plain (`P1`). Black (1) pixels are
/// inside.
pub fn parse_pbm(bytes: &[u8]) -> Result<RegionMask> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(3);
    while tokens.len() < 3 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Region("truncated PBM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let magic = tokens[0].as_str();
    let dim = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| Error::Region(format!("bad PBM dimension `{s}`")))
    };
    let (w, h) = (dim(&tokens[1])?, dim(&tokens[2])?);
    let n = w as usize * h as usize;
    let bits = match magic {
        "P4" => {
            pos += 1; // single whitespace before the raster
            let row_bytes = (w as usize).div_ceil(8);
            let data = bytes
                .get(pos..pos + row_bytes * h as usize)
                .ok_or_else(|| Error::Region("truncated P4 raster".into()))?;
            let mut bits = Vec::with_capacity(n);
            for row in data.chunks_exact(row_bytes) {
                for col in 0..w as usize {
                    bits.push(row[col / 8] & (0x80 >> (col % 8)) != 0);
                }
            }
            bits
        }
        "P1" => {
            let bits: Vec<bool> = bytes[pos..]
                .iter()
                .filter(|b| **b == b'0' || **b == b'1')
                .map(|b| *b == b'1')
                .collect();
            if bits.len() < n {
                return Err(Error::Region("truncated P1 raster".into()));
            }
            bits[..n].to_vec()
        }
        other => return Err(Error::Region(format!("unsupported PBM magic `{other}`"))),
    };
    RegionMask::raster(w, h, bits)
}

pub fn write_pbm(mask: &RegionMask) -> Result<Vec<u8>> {
    let Shape::Raster(bits) = &mask.shape else {
        return Err(Error::Region("only raster regions can be written as PBM".into()));
    };
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let w = mask.width as usize;
    for row in bits.chunks(w) {
        let mut bytes = vec![0u8; w.div_ceil(8)];
        for (col, _) in row.iter().enumerate().filter(|(_, b)| **b) {
            bytes[col / 8] |= 0x80 >> (col % 8);
        }
        out.extend_from_slice(&bytes);
    }
    Ok(out)
}

/// Loads a region file (PBM by magic number, polygon text otherwise) and
/// fits it to the device canvas when one is given.
pub fn load_region(path: &Path, canvas: Option<(u32, u32)>) -> Result<(RegionMask, Vec<String>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mask = if bytes.starts_with(b"P4") || bytes.starts_with(b"P1") {
        parse_pbm(&bytes)?
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Region(format!("{}: not a PBM or polygon file", path.display())))?;
        parse_polygon_text(text)?
    };
    let mut warnings = Vec::new();
    let mask = match canvas {
        Some((w, h)) => {
            let (m, warn) = mask.for_canvas(w, h);
            warnings.extend(warn);
            m
        }
        None => mask,
    };
    Ok((mask, warnings))
}

/// The tree outline shipped with the crate (canvas 1920x1200).
pub const TREE_POLYGON: &str = include_str!("../fixtures/tree.poly");

pub fn default_tree() -> RegionMask {
    parse_polygon_text(TREE_POLYGON).expect("bundled tree outline is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> RegionMask {
        RegionMask::polygons(4, 4, vec![vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]]).unwrap()
    }

    #[test]
    fn all_ones_raster() {
        let m = RegionMask::raster(4, 4, vec![true; 16]).unwrap();
        for &(x, y) in &[(0.0, 0.0), (3.99, 3.99), (2.5, 1.0)] {
            assert!(m.point_inside(x, y));
        }
        assert!(!m.point_inside(4.0, 1.0));
        assert!(!m.point_inside(-0.1, 1.0));
    }

    #[test]
    fn unit_square_polygon() {
        let m = unit_square();
        assert!(m.point_inside(0.5, 0.5));
        assert!(!m.point_inside(2.0, 2.0));
    }

    #[test]
    fn boundary_and_vertices_are_inside() {
        let m = unit_square();
        for &(x, y) in &[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.5, 0.0), (1.0, 0.25)] {
            assert!(m.point_inside(x, y), "({x},{y})");
            assert_eq!(m.point_inside(x, y), m.point_inside(x, y));
        }
        assert!(!m.point_inside(1.0 + 1e-6, 0.5));
    }

    #[test]
    fn self_intersecting_ring_is_rejected() {
        let bow = vec![(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)];
        assert!(RegionMask::polygons(4, 4, vec![bow]).is_err());
        assert!(RegionMask::polygons(4, 4, vec![vec![(0.0, 0.0), (1.0, 1.0)]]).is_err());
    }

    #[test]
    fn hole_via_even_odd() {
        let outer = vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)];
        let inner = vec![(3.0, 3.0), (7.0, 3.0), (7.0, 7.0), (3.0, 7.0)];
        let m = RegionMask::polygons(10, 10, vec![outer, inner]).unwrap();
        assert!(m.point_inside(1.0, 1.0));
        assert!(!m.point_inside(5.0, 5.0));
        assert!(m.point_inside(3.0, 5.0));
    }

    #[test]
    fn canvas_scaling() {
        let m = RegionMask::raster(2, 2, vec![true, false, false, false]).unwrap();
        let (m, warn) = m.for_canvas(200, 200);
        assert!(warn.is_some());
        assert!(m.point_inside(99.0, 99.0));
        assert!(!m.point_inside(101.0, 99.0));
        let (_, none) = RegionMask::raster(2, 2, vec![true; 4]).unwrap().for_canvas(2, 2);
        assert!(none.is_none());
    }

    #[test]
    fn pbm_round_trip() {
        let bits: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let m = RegionMask::raster(10, 3, bits).unwrap();
        let bytes = write_pbm(&m).unwrap();
        assert_eq!(parse_pbm(&bytes).unwrap(), m);
        let plain = b"P1\n# tiny\n3 2\n1 0 1\n0 1 0\n";
        let p = parse_pbm(plain).unwrap();
        assert_eq!(p.inside_count(), Some(3));
    }

    #[test]
    fn bundled_tree_parses() {
        let t = default_tree();
        assert_eq!((t.width, t.height), (1920, 1200));
        let (ax, ay) = t.anchor();
        assert!(t.point_inside(ax, ay));
    }
}
