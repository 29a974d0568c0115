//! Dense label grids and the 2D slices scribbles are generated on.
//!
//! Voxels are stored with the first axis varying fastest, which is the
//! on-disk NIfTI order: `index = x + nx * (y + ny * z)`.

use std::collections::BTreeSet;

use crate::{Error, Result};

/// Orientation and unit fields carried verbatim between reader and writer.
///
/// Scribbles must overlay their source volume voxel-for-voxel, so these are
/// never reinterpreted or normalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialHeader {
    pub pixdim: [f32; 3],
    /// `pixdim[0]` on disk; -1 flips the qform z axis.
    pub qfac: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub xyzt_units: u8,
}

impl Default for SpatialHeader {
    fn default() -> Self {
        Self {
            pixdim: [1.0; 3],
            qfac: 1.0,
            qform_code: 0,
            sform_code: 0,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            // NIFTI_UNITS_MM
            xyzt_units: 2,
        }
    }
}

impl SpatialHeader {
    /// Voxel-to-world transform, preferring sform, then qform, then plain
    /// voxel scaling (the three NIfTI-1 methods).
    pub fn affine(&self) -> [[f64; 4]; 4] {
        let mut a = [[0.0; 4]; 4];
        a[3][3] = 1.0;
        if self.sform_code > 0 {
            for (row, srow) in a.iter_mut().zip(&self.srow) {
                for (dst, &src) in row.iter_mut().zip(srow) {
                    *dst = f64::from(src);
                }
            }
        } else if self.qform_code > 0 {
            let [b, c, d] = self.quatern.map(f64::from);
            let a0 = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
            let r = [
                [
                    a0 * a0 + b * b - c * c - d * d,
                    2.0 * (b * c - a0 * d),
                    2.0 * (b * d + a0 * c),
                ],
                [
                    2.0 * (b * c + a0 * d),
                    a0 * a0 + c * c - b * b - d * d,
                    2.0 * (c * d - a0 * b),
                ],
                [
                    2.0 * (b * d - a0 * c),
                    2.0 * (c * d + a0 * b),
                    a0 * a0 + d * d - c * c - b * b,
                ],
            ];
            let qfac = if self.qfac < 0.0 { -1.0 } else { 1.0 };
            let scale = [
                f64::from(self.pixdim[0]),
                f64::from(self.pixdim[1]),
                f64::from(self.pixdim[2]) * qfac,
            ];
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] = r[i][j] * scale[j];
                }
                a[i][3] = f64::from(self.qoffset[i]);
            }
        } else {
            for i in 0..3 {
                a[i][i] = f64::from(self.pixdim[i]);
            }
        }
        a
    }

    /// Installs `affine` as an aligned-anatomical sform.
    pub fn set_affine(&mut self, affine: &[[f64; 4]; 4]) {
        for (srow, row) in self.srow.iter_mut().zip(affine) {
            for (dst, &src) in srow.iter_mut().zip(row) {
                *dst = src as f32;
            }
        }
        self.sform_code = 2;
    }
}

/// Ignore value used when none is given: 255 while every class fits below it,
/// 65535 beyond that, and `u32::MAX` for very large label sets.
pub fn default_ignore_label(max_class_label: u32) -> u32 {
    if max_class_label < 255 {
        255
    } else if max_class_label < 65535 {
        65535
    } else {
        u32::MAX
    }
}

/// A dense 3D grid of integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: [usize; 3],
    data: Vec<u32>,
    header: SpatialHeader,
    ignore_label: u32,
}

impl LabelVolume {
    /// Builds a volume with unit spacing and an identity affine. The ignore
    /// label defaults from the largest stored label.
    pub fn new(dims: [usize; 3], data: Vec<u32>) -> Result<Self> {
        if dims.contains(&0) || data.len() != dims.iter().product::<usize>() {
            return Err(Error::DataLength {
                dims,
                found: data.len(),
            });
        }
        let max = data.iter().copied().max().unwrap_or(0);
        Ok(Self {
            dims,
            data,
            header: SpatialHeader::default(),
            ignore_label: default_ignore_label(max),
        })
    }

    /// A volume of the same grid filled with `label`.
    pub fn filled_like(other: &LabelVolume, label: u32) -> Self {
        Self {
            dims: other.dims,
            data: vec![label; other.data.len()],
            header: other.header,
            ignore_label: other.ignore_label,
        }
    }

    pub fn with_header(mut self, header: SpatialHeader) -> Self {
        self.header = header;
        self
    }

    pub fn with_spacing(mut self, spacing: [f32; 3]) -> Self {
        self.header.pixdim = spacing;
        self
    }

    pub fn with_affine(mut self, affine: &[[f64; 4]; 4]) -> Self {
        self.header.set_affine(affine);
        self
    }

    pub fn with_ignore_label(mut self, ignore_label: u32) -> Self {
        self.ignore_label = ignore_label;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn header(&self) -> &SpatialHeader {
        &self.header
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.header.pixdim
    }

    pub fn affine(&self) -> [[f64; 4]; 4] {
        self.header.affine()
    }

    pub fn ignore_label(&self) -> u32 {
        self.ignore_label
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.data[self.index(x, y, z)]
    }

    /// Largest stored value, including the ignore label if present.
    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Sorted distinct labels, ignore excluded.
    pub fn class_labels(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self
            .data
            .iter()
            .copied()
            .filter(|&l| l != self.ignore_label)
            .collect();
        set.into_iter().collect()
    }

    /// Same dims, spacing and orientation.
    pub fn same_grid(&self, other: &LabelVolume) -> bool {
        self.dims == other.dims && self.header == other.header
    }

    pub fn check_same_grid(&self, other: &LabelVolume) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        if self.header != other.header {
            return Err(Error::ShapeMismatch(
                "spacing or orientation differ".to_string(),
            ));
        }
        Ok(())
    }

    /// Copies the plane `index` along `axis`.
    pub fn slice(&self, axis: usize, index: usize) -> Result<LabelSlice> {
        let (a0, a1) = in_plane_axes(axis)?;
        if index >= self.dims[axis] {
            return Err(Error::IndexOutOfRange {
                axis,
                index,
                extent: self.dims[axis],
            });
        }
        let extents = [self.dims[a0], self.dims[a1]];
        let mut data = Vec::with_capacity(extents[0] * extents[1]);
        let mut coord = [0usize; 3];
        coord[axis] = index;
        for j in 0..extents[1] {
            coord[a1] = j;
            for i in 0..extents[0] {
                coord[a0] = i;
                data.push(self.get(coord[0], coord[1], coord[2]));
            }
        }
        Ok(LabelSlice {
            extents,
            data,
            axis,
            index,
        })
    }

    /// Writes `slice` back into the plane it was taken from.
    pub fn insert_slice(&mut self, slice: &LabelSlice) -> Result<()> {
        let (a0, a1) = in_plane_axes(slice.axis)?;
        if slice.index >= self.dims[slice.axis] {
            return Err(Error::IndexOutOfRange {
                axis: slice.axis,
                index: slice.index,
                extent: self.dims[slice.axis],
            });
        }
        if slice.extents != [self.dims[a0], self.dims[a1]] {
            return Err(Error::ShapeMismatch(format!(
                "slice extents {:?} do not fit dims {:?} along axis {}",
                slice.extents, self.dims, slice.axis
            )));
        }
        let mut coord = [0usize; 3];
        coord[slice.axis] = slice.index;
        for j in 0..slice.extents[1] {
            coord[a1] = j;
            for i in 0..slice.extents[0] {
                coord[a0] = i;
                let dst = self.index(coord[0], coord[1], coord[2]);
                self.data[dst] = slice.get(i, j);
            }
        }
        Ok(())
    }
}

/// The two axes spanning a slice taken along `axis`, in increasing order.
pub fn in_plane_axes(axis: usize) -> Result<(usize, usize)> {
    match axis {
        0 => Ok((1, 2)),
        1 => Ok((0, 2)),
        2 => Ok((0, 1)),
        _ => Err(Error::InvalidAxis(axis)),
    }
}

/// One plane of a [`LabelVolume`]. Pixel `(i, j)` is stored at
/// `i + extents[0] * j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSlice {
    pub extents: [usize; 2],
    pub data: Vec<u32>,
    pub axis: usize,
    pub index: usize,
}

impl LabelSlice {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i + self.extents[0] * j]
    }

    /// A slice with the same placement and every pixel set to `label`.
    pub fn filled_like(&self, label: u32) -> Self {
        Self {
            extents: self.extents,
            data: vec![label; self.data.len()],
            axis: self.axis,
            index: self.index,
        }
    }
}
