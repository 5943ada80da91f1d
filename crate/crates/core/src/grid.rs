//! Structured-grid scalar fields.
//!
//! Cells are indexed row-major: cell `(i, j)` with `i` along x and `j` along y
//! lives at `j * nx + i`, and its center sits at `((i + 0.5) hx, (j + 0.5) hy)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Default additive floor used when turning densities into probabilities.
pub const DEFAULT_FLOOR: f64 = 1e-12;

const MAGIC: &[u8; 5] = b"DFLD1";
const HEADER_LEN: usize = 5 + 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid extents must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Unit-spaced grid: `hx = hy = 1`.
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, nx as f64, ny as f64)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn centers(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .map(|e| {
                let (i, j) = self.cell(e);
                self.center(i, j)
            })
            .collect()
    }

    /// Same grid refined by an integer factor along both axes.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("refine factor must be >= 1".into()));
        }
        Self::new(self.nx * factor, self.ny * factor, self.lx, self.ly)
    }

    pub fn same_extent(&self, other: &GridSpec) -> bool {
        let tol = 1e-12 * self.lx.max(self.ly);
        (self.lx - other.lx).abs() <= tol && (self.ly - other.ly).abs() <= tol
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self} vs {other}")))
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{} on {}x{}", self.nx, self.ny, self.lx, self.ly)
    }
}

/// Material density in `[0, 1]` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for grid {grid}",
                values.len()
            )));
        }
        if let Some((e, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "density {v} at cell {e} is outside [0, 1]"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field and clamps every value into `[0, 1]`; NaN maps to 0.
    pub fn clamped(grid: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        for v in values.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(grid, values)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    /// Evaluates `f` at every cell center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid.centers().into_iter().map(|(x, y)| f(x, y)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Volume fraction `sum(gamma) / n` (cells have equal area).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Density-weighted centroid, or `None` for an all-void field.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        weighted_centroid(&self.grid, &self.values)
    }
}

/// Nonnegative masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    grid: GridSpec,
    masses: Vec<f64>,
}

impl ProbabilityField {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(grid: GridSpec, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} masses for grid {grid}",
                masses.len()
            )));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidArgument(
                "probability masses must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probability masses sum to {sum}"
            )));
        }
        Ok(Self { grid, masses })
    }

    /// Divides nonnegative weights by their sum.
    pub fn normalized(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::AllZeroField);
        }
        let masses = weights.into_iter().map(|w| w / sum).collect();
        Self::new(grid, masses)
    }

    /// Unit mass on a single cell.
    pub fn dirac(grid: GridSpec, index: usize) -> Result<Self> {
        if index >= grid.len() {
            return Err(Error::InvalidArgument(format!(
                "cell {index} outside grid {grid}"
            )));
        }
        let mut masses = vec![0.0; grid.len()];
        masses[index] = 1.0;
        Self::new(grid, masses)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn centroid(&self) -> (f64, f64) {
        weighted_centroid(&self.grid, &self.masses).unwrap_or((f64::NAN, f64::NAN))
    }
}

fn weighted_centroid(grid: &GridSpec, w: &[f64]) -> Option<(f64, f64)> {
    let mut total = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for (e, &m) in w.iter().enumerate() {
        let (i, j) = grid.cell(e);
        let (x, y) = grid.center(i, j);
        total += m;
        cx += m * x;
        cy += m * y;
    }
    (total > 0.0).then(|| (cx / total, cy / total))
}

/// `p_e = (gamma_e + floor) / sum(gamma + floor)`.
pub fn to_probability(field: &DensityField, floor: f64) -> Result<ProbabilityField> {
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "floor must be >= 0, got {floor}"
        )));
    }
    let sum: f64 = field.values.iter().map(|g| g + floor).sum();
    if sum <= 0.0 {
        return Err(Error::AllZeroField);
    }
    let masses = field.values.iter().map(|g| (g + floor) / sum).collect();
    Ok(ProbabilityField {
        grid: field.grid,
        masses,
    })
}

/// Min-max rescaling of a probability vector back into a density in `[0, 1]`.
pub fn from_probability_minmax(prob: &ProbabilityField) -> Result<DensityField> {
    let (lo, hi) = prob
        .masses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ConstantField);
    }
    let values = prob
        .masses
        .iter()
        .map(|p| ((p - lo) / range).clamp(0.0, 1.0))
        .collect();
    Ok(DensityField {
        grid: prob.grid,
        values,
    })
}

/// Bilinear interpolation of cell-centered values at the target cell centers.
///
/// Target points outside the hull of source centers use the nearest edge value.
pub fn resample(field: &DensityField, target: &GridSpec) -> Result<DensityField> {
    let src = field.grid();
    if !src.same_extent(target) {
        return Err(Error::ExtentMismatch(format!("{src} vs {target}")));
    }
    if src == target {
        return Ok(field.clone());
    }
    let xs: Vec<(usize, usize, f64)> = (0..target.nx())
        .map(|i| axis_weights((i as f64 + 0.5) * target.hx(), src.hx(), src.nx()))
        .collect();
    let ys: Vec<(usize, usize, f64)> = (0..target.ny())
        .map(|j| axis_weights((j as f64 + 0.5) * target.hy(), src.hy(), src.ny()))
        .collect();
    let v = field.values();
    let mut out = Vec::with_capacity(target.len());
    for &(j0, j1, ty) in &ys {
        for &(i0, i1, tx) in &xs {
            let a = v[src.index(i0, j0)] * (1.0 - tx) + v[src.index(i1, j0)] * tx;
            let b = v[src.index(i0, j1)] * (1.0 - tx) + v[src.index(i1, j1)] * tx;
            out.push(a * (1.0 - ty) + b * ty);
        }
    }
    DensityField::clamped(*target, out)
}

fn axis_weights(coord: f64, h: f64, n: usize) -> (usize, usize, f64) {
    let s = (coord / h - 0.5).clamp(0.0, (n - 1) as f64);
    let i0 = (s.floor() as usize).min(n - 2);
    (i0, i0 + 1, s - i0 as f64)
}

/// Serializes a field in the `DFLD1` layout.
pub fn encode_field(field: &DensityField) -> Vec<u8> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * field.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    buf.extend_from_slice(&g.lx().to_le_bytes());
    buf.extend_from_slice(&g.ly().to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_field(bytes: &[u8], path: &Path) -> Result<DensityField> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(Error::format(path, "missing DFLD1 magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (nx, ny) = (u32_at(5), u32_at(9));
    let (lx, ly) = (f64_at(13), f64_at(21));
    let grid = GridSpec::new(nx, ny, lx, ly)
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * grid.len() {
        return Err(Error::format(
            path,
            format!(
                "header says {nx}x{ny} = {} values, payload holds {} bytes",
                grid.len(),
                payload.len()
            ),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some((e, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::format(
            path,
            format!("value {v} at cell {e} outside [0, 1]"),
        ));
    }
    Ok(DensityField { grid, values })
}

pub fn write_field(field: &DensityField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes, path)
}

/// Writes one row per `j` (ny rows of nx comma-separated values), `j = 0` first.
pub fn write_grid_csv(grid: &GridSpec, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for grid {grid}",
            values.len()
        )));
    }
    let mut out = String::with_capacity(values.len() * 12);
    for row in values.chunks(grid.nx()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
