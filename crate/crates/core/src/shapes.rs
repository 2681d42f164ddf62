//! Voxelized reference shapes and the by-name shape registry.
//!
//! A reference shape is a boolean mask over a regular grid together with the
//! cell centers it keeps. Built-in recipes ("ball", "cube") are registered by
//! name; arbitrary shapes load from a voxel-mask file.

use nalgebra::Vector3;
use once_cell::sync::Lazy;
use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

/// A voxelized open set containing the origin.
#[derive(Debug, Clone)]
pub struct ReferenceShape {
    pub name: String,
    /// Grid resolution per axis of the bounding box.
    pub resolution: [usize; 3],
    /// Edge length of one cubic cell.
    pub cell_size: f64,
    /// Inclusion mask, row-major with x slowest and z fastest.
    pub mask: Vec<bool>,
    /// Centers of the masked cells, in mask order.
    pub centers: Vec<Vector3<f64>>,
    /// Total volume `centers.len() * cell_size^3`.
    pub volume: f64,
}

impl ReferenceShape {
    /// Builds a shape from a bounding box centered at the origin and a
    /// predicate on cell centers.
    pub fn from_predicate<F>(
        name: &str,
        resolution: [usize; 3],
        cell_size: f64,
        keep: F,
    ) -> Result<Self>
    where
        F: Fn(&Vector3<f64>) -> bool,
    {
        if cell_size <= 0.0 {
            return Err(Error::InvalidShape(format!("cell size {cell_size} must be positive")));
        }
        let [nx, ny, nz] = resolution;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidShape("zero resolution".into()));
        }
        let half = Vector3::new(
            0.5 * cell_size * nx as f64,
            0.5 * cell_size * ny as f64,
            0.5 * cell_size * nz as f64,
        );
        let mut mask = Vec::with_capacity(nx * ny * nz);
        let mut centers = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let c = Vector3::new(
                        (i as f64 + 0.5) * cell_size,
                        (j as f64 + 0.5) * cell_size,
                        (k as f64 + 0.5) * cell_size,
                    ) - half;
                    let inside = keep(&c);
                    mask.push(inside);
                    if inside {
                        centers.push(c);
                    }
                }
            }
        }
        Self::from_parts(name, resolution, cell_size, mask, centers)
    }

    fn from_parts(
        name: &str,
        resolution: [usize; 3],
        cell_size: f64,
        mask: Vec<bool>,
        centers: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidShape(format!("shape '{name}' has zero volume")));
        }
        // the shape must contain the origin: some masked cell touches it
        let half_diag = 0.5 * cell_size * 3f64.sqrt();
        let nearest = centers.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
        if nearest > half_diag + 1e-12 {
            return Err(Error::InvalidShape(format!(
                "shape '{name}' does not contain the origin (nearest cell center at {nearest:.3})"
            )));
        }
        let volume = centers.len() as f64 * cell_size.powi(3);
        Ok(Self { name: name.to_string(), resolution, cell_size, mask, centers, volume })
    }

    pub fn ncells(&self) -> usize {
        self.centers.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_size.powi(3)
    }

    /// Radius of the circumscribed ball around the masked cells.
    pub fn circumradius(&self) -> f64 {
        let half_diag = 0.5 * self.cell_size * 3f64.sqrt();
        self.centers.iter().map(|c| c.norm()).fold(0.0, f64::max) + half_diag
    }

    /// Diameter of the shape, `2 * circumradius`.
    pub fn diameter(&self) -> f64 {
        2.0 * self.circumradius()
    }

    /// Geometrically similar shape shrunk or stretched by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        Self {
            name: format!("{}*{}", self.name, factor),
            resolution: self.resolution,
            cell_size: self.cell_size * factor,
            mask: self.mask.clone(),
            centers: self.centers.iter().map(|c| c * factor).collect(),
            volume: self.volume * factor.powi(3),
        }
    }

    /// Loads a shape from a voxel-mask file: a header line `nx ny nz cell`
    /// followed by `nx*ny*nz` 0/1 tokens in row-major order (x slowest).
    pub fn from_mask_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_mask_text(&text, &path.display().to_string())
    }

    pub fn from_mask_text(text: &str, name: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut dim = [0usize; 3];
        for d in &mut dim {
            *d = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidShape("mask header needs nx ny nz cell".into()))?;
        }
        let cell: f64 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidShape("mask header needs nx ny nz cell".into()))?;
        let n = dim[0] * dim[1] * dim[2];
        let mut flags = Vec::with_capacity(n);
        for t in tokens {
            match t {
                "0" => flags.push(false),
                "1" => flags.push(true),
                other => {
                    return Err(Error::InvalidShape(format!("mask entry '{other}' is not 0/1")))
                }
            }
        }
        if flags.len() != n {
            return Err(Error::InvalidShape(format!(
                "mask has {} entries, expected {}",
                flags.len(),
                n
            )));
        }
        let half = Vector3::new(
            0.5 * cell * dim[0] as f64,
            0.5 * cell * dim[1] as f64,
            0.5 * cell * dim[2] as f64,
        );
        let mut centers = Vec::new();
        let mut idx = 0;
        for i in 0..dim[0] {
            for j in 0..dim[1] {
                for k in 0..dim[2] {
                    if flags[idx] {
                        centers.push(
                            Vector3::new(
                                (i as f64 + 0.5) * cell,
                                (j as f64 + 0.5) * cell,
                                (k as f64 + 0.5) * cell,
                            ) - half,
                        );
                    }
                    idx += 1;
                }
            }
        }
        Self::from_parts(name, dim, cell, flags, centers)
    }
}

/// A shape recipe constructs a [`ReferenceShape`] at a given resolution.
pub trait ShapeRecipe: Sync + Send {
    fn name(&self) -> &'static str;
    fn build(&self, resolution: usize) -> Result<ReferenceShape>;
}

/// Unit ball (radius 1) voxelized on a `resolution^3` bounding grid.
pub struct BallRecipe;

impl ShapeRecipe for BallRecipe {
    fn name(&self) -> &'static str {
        "ball"
    }

    fn build(&self, resolution: usize) -> Result<ReferenceShape> {
        let cell = 2.0 / resolution as f64;
        ReferenceShape::from_predicate("ball", [resolution; 3], cell, |c| c.norm() <= 1.0)
    }
}

/// Unit-volume cube voxelized on a `resolution^3` grid.
pub struct CubeRecipe;

impl ShapeRecipe for CubeRecipe {
    fn name(&self) -> &'static str {
        "cube"
    }

    fn build(&self, resolution: usize) -> Result<ReferenceShape> {
        let cell = 1.0 / resolution as f64;
        ReferenceShape::from_predicate("cube", [resolution; 3], cell, |_| true)
    }
}

static SHAPE_REGISTRY: Lazy<BTreeMap<&'static str, Box<dyn ShapeRecipe>>> = Lazy::new(|| {
    let mut map: BTreeMap<&'static str, Box<dyn ShapeRecipe>> = BTreeMap::new();
    for recipe in [
        Box::new(BallRecipe) as Box<dyn ShapeRecipe>,
        Box::new(CubeRecipe) as Box<dyn ShapeRecipe>,
    ] {
        map.insert(recipe.name(), recipe);
    }
    map
});

/// Registered shape names, sorted.
pub fn shape_names() -> Vec<&'static str> {
    SHAPE_REGISTRY.keys().copied().collect()
}

/// Builds a registered shape by name.
pub fn build_shape(name: &str, resolution: usize) -> Result<ReferenceShape> {
    SHAPE_REGISTRY
        .get(name)
        .ok_or_else(|| Error::UnknownShape(name.to_string()))?
        .build(resolution)
}
