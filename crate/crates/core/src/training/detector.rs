use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{D2nnError, Result};
use crate::optics::GridSpec;

/// Axis-aligned rectangle on the output plane, in meters from the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorRegion {
    pub class: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl DetectorRegion {
    pub fn square(class: usize, cx: f64, cy: f64, side: f64) -> Self {
        let h = side / 2.0;
        DetectorRegion {
            class,
            x_min: cx - h,
            x_max: cx + h,
            y_min: cy - h,
            y_max: cy + h,
        }
    }

    /// Pixel-center membership with half-open bounds, so abutting regions never share a pixel.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    fn overlaps(&self, other: &DetectorRegion) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }
}

/// One detector region per class; class `c` is read from the region tagged `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorLayout {
    pub regions: Vec<DetectorRegion>,
}

impl DetectorLayout {
    pub fn new(regions: Vec<DetectorRegion>) -> Result<Self> {
        let layout = DetectorLayout { regions };
        layout.validate_shape()?;
        Ok(layout)
    }

    /// Ten squares with side 10% of the plane, in rows of 3, 4 and 3 around the center.
    pub fn default_ten(grid: &GridSpec) -> Self {
        let s = grid.extent_x().min(grid.extent_y());
        let side = 0.1 * s;
        let rows: [(f64, &[f64]); 3] = [
            (-0.25 * s, &[-0.2, 0.0, 0.2]),
            (0.0, &[-0.3, -0.1, 0.1, 0.3]),
            (0.25 * s, &[-0.2, 0.0, 0.2]),
        ];
        let mut regions = Vec::with_capacity(10);
        for (cy, xs) in rows {
            for &fx in xs {
                regions.push(DetectorRegion::square(regions.len(), fx * s, cy, side));
            }
        }
        DetectorLayout { regions }
    }

    pub fn num_classes(&self) -> usize {
        self.regions.len()
    }

    fn validate_shape(&self) -> Result<()> {
        let k = self.regions.len();
        if k < 2 {
            return Err(D2nnError::InvalidLayout("need at least two regions".into()));
        }
        let mut seen = vec![false; k];
        for r in &self.regions {
            if r.class >= k || seen[r.class] {
                return Err(D2nnError::InvalidLayout(format!(
                    "classes must be 0..{k} with exactly one region each (class {})",
                    r.class
                )));
            }
            seen[r.class] = true;
            if !(r.x_max > r.x_min && r.y_max > r.y_min) {
                return Err(D2nnError::InvalidLayout(format!(
                    "region for class {} has non-positive size",
                    r.class
                )));
            }
        }
        for (i, a) in self.regions.iter().enumerate() {
            for b in &self.regions[i + 1..] {
                if a.overlaps(b) {
                    return Err(D2nnError::InvalidLayout(format!(
                        "regions {} and {} overlap",
                        a.class, b.class
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks disjointness and containment in the plane of `grid`.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        self.validate_shape()?;
        let hx = grid.extent_x() / 2.0;
        let hy = grid.extent_y() / 2.0;
        let eps = 1e-12 * grid.extent_x().max(grid.extent_y());
        for r in &self.regions {
            if r.x_min < -hx - eps || r.x_max > hx + eps || r.y_min < -hy - eps || r.y_max > hy + eps
            {
                return Err(D2nnError::RegionOutsidePlane(r.class));
            }
        }
        Ok(())
    }

    /// Resolves regions to pixel index lists on `grid`.
    pub fn masks(&self, grid: &GridSpec) -> Result<DetectorMasks> {
        self.validate(grid)?;
        let mut pixels = vec![Vec::new(); self.regions.len()];
        let mut owner = Array2::from_elem(grid.shape(), None);
        for iy in 0..grid.ny {
            let y = grid.y_of(iy);
            for ix in 0..grid.nx {
                let x = grid.x_of(ix);
                if let Some(r) = self.regions.iter().find(|r| r.contains(x, y)) {
                    pixels[r.class].push(iy * grid.nx + ix);
                    owner[[iy, ix]] = Some(r.class);
                }
            }
        }
        for (class, p) in pixels.iter().enumerate() {
            if p.is_empty() {
                return Err(D2nnError::InvalidLayout(format!(
                    "region for class {class} covers no pixel centers"
                )));
            }
        }
        Ok(DetectorMasks {
            grid: *grid,
            pixels,
            owner,
        })
    }
}

/// Detector regions resolved to pixels of a particular grid.
#[derive(Debug, Clone)]
pub struct DetectorMasks {
    grid: GridSpec,
    pixels: Vec<Vec<usize>>,
    owner: Array2<Option<usize>>,
}

impl DetectorMasks {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_classes(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixel_count(&self, class: usize) -> usize {
        self.pixels[class].len()
    }

    /// Class whose region contains pixel `[iy, ix]`, if any.
    pub fn owner(&self) -> &Array2<Option<usize>> {
        &self.owner
    }

    /// Integrated intensity · pitch² per region.
    pub fn signals(&self, intensity: &Array2<f64>) -> Result<Vec<f64>> {
        if intensity.dim() != self.grid.shape() {
            return Err(D2nnError::ShapeMismatch {
                expected: self.grid.shape(),
                actual: intensity.dim(),
            });
        }
        let flat = intensity
            .as_slice()
            .map(std::borrow::Cow::Borrowed)
            .unwrap_or_else(|| std::borrow::Cow::Owned(intensity.iter().copied().collect()));
        let area = self.grid.pixel_area();
        Ok(self
            .pixels
            .iter()
            .map(|p| p.iter().map(|&i| flat[i]).sum::<f64>() * area)
            .collect())
    }
}

/// Energy collected by each detector region.
pub fn detector_signals(
    intensity: &Array2<f64>,
    layout: &DetectorLayout,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    layout.masks(grid)?.signals(intensity)
}

/// Index of the strongest signal; ties resolve to the lowest class.
pub fn argmax(signals: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in signals.iter().enumerate() {
        if s > signals[best] {
            best = i;
        }
    }
    best
}
