//! Uniform-linear-array geometry, steering vectors and beampatterns.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{DfrcError, Result};

/// Uniform linear array: element count and spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(DfrcError::domain("array needs at least 2 elements"));
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(DfrcError::domain("element spacing must be positive"));
        }
        Ok(Self {
            num_elements,
            spacing_wavelengths,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }

    /// Null-to-null mainlobe half width of the uniform array factor in
    /// sine space: the first null sits at sin(theta) = 1/M per side, so a
    /// "beamwidth" is 2/M.
    pub fn beamwidth_sine(&self) -> f64 {
        2.0 / self.num_elements as f64
    }
}

/// Strictly increasing, nonempty list of angles in radians, each within
/// [-pi/2, pi/2].
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    angles: Vec<f64>,
}

impl AngleGrid {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(DfrcError::domain("angle grid must be nonempty"));
        }
        for pair in angles.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(DfrcError::domain("angle grid must be strictly increasing"));
            }
        }
        for &a in &angles {
            if !(-FRAC_PI_2..=FRAC_PI_2).contains(&a) {
                return Err(DfrcError::domain(format!(
                    "angle {a} rad outside [-pi/2, pi/2]"
                )));
            }
        }
        Ok(Self { angles })
    }

    /// Sector of `width_beamwidths` beamwidths centered at `center` (rad),
    /// sampled every `step_beamwidths` beamwidths in sine space, endpoints
    /// inclusive.
    pub fn sector(
        geometry: &ArrayGeometry,
        center: f64,
        width_beamwidths: f64,
        step_beamwidths: f64,
    ) -> Result<Self> {
        if !(width_beamwidths >= 0.0) || !(step_beamwidths > 0.0) {
            return Err(DfrcError::domain("sector width/step must be positive"));
        }
        let bw = geometry.beamwidth_sine();
        let center_sin = center.sin();
        let n_steps = (width_beamwidths / step_beamwidths).round() as usize;
        let lo = center_sin - 0.5 * width_beamwidths * bw;
        let angles = (0..=n_steps)
            .map(|i| {
                let s = lo + i as f64 * step_beamwidths * bw;
                s.clamp(-1.0, 1.0).asin()
            })
            .collect();
        Self::new(angles)
    }

    /// Uniform grid of `points` angles in sine space over [-1, 1].
    pub fn uniform_sine(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(DfrcError::domain("grid needs at least 2 points"));
        }
        let angles = (0..points)
            .map(|i| (-1.0 + 2.0 * i as f64 / (points - 1) as f64).asin())
            .collect();
        Self::new(angles)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn min_sine(&self) -> f64 {
        self.angles[0].sin()
    }

    pub fn max_sine(&self) -> f64 {
        self.angles[self.angles.len() - 1].sin()
    }
}

/// Complex M x (K_c + K_r) precoder split into communication and radar
/// blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub comm: DMatrix<Complex64>,
    pub radar: DMatrix<Complex64>,
}

impl Precoder {
    pub fn new(comm: DMatrix<Complex64>, radar: DMatrix<Complex64>) -> Result<Self> {
        if comm.nrows() != radar.nrows() {
            return Err(DfrcError::domain("precoder blocks must share row count"));
        }
        Ok(Self { comm, radar })
    }

    pub fn num_antennas(&self) -> usize {
        self.comm.nrows()
    }

    /// Full M x (K_c + K_r) matrix [W_c, W_r].
    pub fn full(&self) -> DMatrix<Complex64> {
        let m = self.num_antennas();
        let kc = self.comm.ncols();
        let kr = self.radar.ncols();
        let mut w = DMatrix::zeros(m, kc + kr);
        w.view_mut((0, 0), (m, kc)).copy_from(&self.comm);
        w.view_mut((0, kc), (m, kr)).copy_from(&self.radar);
        w
    }

    /// tr(W_c W_c^H) / tr(W W^H).
    pub fn comm_power_fraction(&self) -> f64 {
        let pc = self.comm.norm_squared();
        let pr = self.radar.norm_squared();
        if pc + pr == 0.0 {
            0.0
        } else {
            pc / (pc + pr)
        }
    }

    pub fn radar_power_fraction(&self) -> f64 {
        1.0 - self.comm_power_fraction()
    }

    /// Diagonal of W W^H (per-antenna transmit power).
    pub fn antenna_powers(&self) -> Vec<f64> {
        (0..self.num_antennas())
            .map(|i| self.comm.row(i).norm_squared() + self.radar.row(i).norm_squared())
            .collect()
    }
}

/// Transmit steering vector a(theta) for a uniform linear array: element m
/// is exp(j 2 pi (d/lambda) m sin(theta)).
pub fn steering(geometry: &ArrayGeometry, angle: f64) -> Result<DVector<Complex64>> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&angle) {
        return Err(DfrcError::domain(format!(
            "steering angle {angle} rad outside [-pi/2, pi/2]"
        )));
    }
    let phase_step = 2.0 * PI * geometry.spacing_wavelengths() * angle.sin();
    Ok(DVector::from_iterator(
        geometry.num_elements(),
        (0..geometry.num_elements()).map(|m| Complex64::from_polar(1.0, phase_step * m as f64)),
    ))
}

/// Beampattern of a single precoder column: |a^H(theta) w|^2 / ||w||^2.
pub fn column_beampattern(
    geometry: &ArrayGeometry,
    w: &DVector<Complex64>,
    angle: f64,
) -> Result<f64> {
    let denom = w.norm_squared();
    if denom == 0.0 {
        return Err(DfrcError::domain("zero column has no beampattern"));
    }
    let a = steering(geometry, angle)?;
    Ok(a.dotc(w).norm_sqr() / denom)
}

/// Beampattern of a precoder block: ||a^H(theta) W||^2 / tr(W W^H).
pub fn block_beampattern(
    geometry: &ArrayGeometry,
    block: &DMatrix<Complex64>,
    angle: f64,
) -> Result<f64> {
    let denom = block.norm_squared();
    if denom == 0.0 {
        return Err(DfrcError::domain("zero block has no beampattern"));
    }
    let a = steering(geometry, angle)?;
    let row = a.adjoint() * block;
    Ok(row.norm_squared() / denom)
}

/// One row of a beampattern sweep, all values in linear gain.
#[derive(Debug, Clone)]
pub struct BeampatternRow {
    pub angle: f64,
    pub comm: Option<f64>,
    pub radar: Option<f64>,
    pub total: f64,
    pub per_column: Vec<f64>,
}

/// Evaluate B_c, B_r, B and per-column beampatterns of `precoder` at every
/// grid angle. Zero blocks yield `None` for their pattern; zero columns
/// yield 0 per-column gain.
pub fn beampattern_sweep(
    geometry: &ArrayGeometry,
    precoder: &Precoder,
    grid: &AngleGrid,
) -> Result<Vec<BeampatternRow>> {
    let full = precoder.full();
    if full.norm_squared() == 0.0 {
        return Err(DfrcError::domain("all-zero precoder has no beampattern"));
    }
    let comm_live = precoder.comm.norm_squared() > 0.0;
    let radar_live = precoder.radar.norm_squared() > 0.0;
    grid.angles()
        .iter()
        .map(|&angle| {
            let comm = if comm_live {
                Some(block_beampattern(geometry, &precoder.comm, angle)?)
            } else {
                None
            };
            let radar = if radar_live {
                Some(block_beampattern(geometry, &precoder.radar, angle)?)
            } else {
                None
            };
            let total = block_beampattern(geometry, &full, angle)?;
            let a = steering(geometry, angle)?;
            let per_column = full
                .column_iter()
                .map(|c| {
                    let n = c.norm_squared();
                    if n == 0.0 {
                        0.0
                    } else {
                        a.dotc(&c.clone_owned()).norm_sqr() / n
                    }
                })
                .collect();
            Ok(BeampatternRow {
                angle,
                comm,
                radar,
                total,
                per_column,
            })
        })
        .collect()
}
