use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{evaluate, NetworkSpec, Params};
use crate::tensor::Tensor;

/// Uniform square probe grid `[-half_width, half_width]²`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub divisions: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            divisions: 300,
            half_width: 100.0,
        }
    }
}

impl GridSpec {
    pub fn coordinate(&self, i: usize) -> f64 {
        if self.divisions == 1 {
            return 0.0;
        }
        -self.half_width + 2.0 * self.half_width * i as f64 / (self.divisions - 1) as f64
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.divisions).map(|i| self.coordinate(i)).collect()
    }
}

/// Row-major square image of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub size: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size || size == 0 {
            return Err(Error::DimMismatch {
                what: "image data",
                expected: size * size,
                got: data.len(),
            });
        }
        Ok(Image { size, data })
    }

    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                data.push(f(i, j));
            }
        }
        Image { size, data }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn transpose(&self) -> Image {
        Image::from_fn(self.size, |i, j| self.at(j, i))
    }
}

const CHUNK_ROWS: usize = 10;

/// `image[i][j] = f(x_i, y_j)` for a two-input, scalar-output network.
/// Observation normalisation is not applied.
pub fn evaluate_on_grid(spec: &NetworkSpec, params: &Params, grid: &GridSpec) -> Result<Image> {
    if spec.input_dim != 2 {
        return Err(Error::DimMismatch {
            what: "grid network input",
            expected: 2,
            got: spec.input_dim,
        });
    }
    if spec.head_width() != 1 {
        return Err(Error::DimMismatch {
            what: "grid network output",
            expected: 1,
            got: spec.head_width(),
        });
    }
    let n = grid.divisions;
    let coords = grid.coordinates();
    let mut data = Vec::with_capacity(n * n);
    for start in (0..n).step_by(CHUNK_ROWS) {
        let end = (start + CHUNK_ROWS).min(n);
        let mut batch = Vec::with_capacity((end - start) * n * 2);
        for x in &coords[start..end] {
            for y in &coords {
                batch.push(*x);
                batch.push(*y);
            }
        }
        let input = Tensor::new(alloc::vec![(end - start) * n, 2], batch)?;
        let out = evaluate(spec, params, &input)?;
        data.extend_from_slice(out.data());
    }
    Image::new(n, data)
}
