use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::model::{Point, ScreenPoint, ScreenSpec};

const MIN_DET: f64 = 1e-12;
const MIN_W: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quad {
    Camera,
    Screen,
}

impl std::fmt::Display for Quad {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Quad::Camera => "camera",
            Quad::Screen => "screen",
        })
    }
}

/// Camera-to-screen projective map, normalized so `m[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    /// Builds from row-major entries, normalizing by the bottom-right element.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, SourceError> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    fn from_matrix(m: Matrix3<f64>) -> Result<Self, SourceError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SourceError::NonFinite);
        }
        let corner = m[(2, 2)];
        if corner.abs() < MIN_W {
            return Err(SourceError::SingularHomography);
        }
        let h = Self { m: m / corner };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(SourceError::NonFinite);
        }
        if self.m.determinant().abs() <= MIN_DET {
            return Err(SourceError::SingularHomography);
        }
        Ok(())
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Result<Self, SourceError> {
        let inv = self
            .m
            .try_inverse()
            .ok_or(SourceError::SingularHomography)?;
        Self::from_matrix(inv)
    }

    /// Applies the map with perspective division and no clamping.
    pub fn apply(&self, pt: Point) -> Result<Point, SourceError> {
        let v = self.m * Vector3::new(pt.x, pt.y, 1.0);
        if v.z.abs() < MIN_W {
            return Err(SourceError::ProjectionAtInfinity);
        }
        Ok(Point::new(v.x / v.z, v.y / v.z))
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = SourceError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Self::from_rows(rows)
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.rows()
    }
}

fn has_collinear_triple(quad: &[Point; 4]) -> bool {
    let extent = quad
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0_f64, f64::max);
    let tol = 1e-9 * extent * extent;
    (0..4).any(|skip| {
        let tri: Vec<Point> = (0..4).filter(|&i| i != skip).map(|i| quad[i]).collect();
        let cross = (tri[1].x - tri[0].x) * (tri[2].y - tri[0].y)
            - (tri[1].y - tri[0].y) * (tri[2].x - tri[0].x);
        cross.abs() <= tol
    })
}

/// Solves the exact four-point homography taking `camera[i]` to `screen[i]`.
pub fn calibrate_homography(camera: &[Point; 4], screen: &[Point; 4]) -> Result<Homography, SourceError> {
    if camera.iter().chain(screen).any(|p| !p.is_finite()) {
        return Err(SourceError::NonFinite);
    }
    if has_collinear_triple(camera) {
        return Err(SourceError::DegenerateQuad(Quad::Camera));
    }
    if has_collinear_triple(screen) {
        return Err(SourceError::DegenerateQuad(Quad::Screen));
    }

    // Unknowns h11..h32 with h33 = 1; two rows per correspondence.
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for (i, (c, s)) in camera.iter().zip(screen).enumerate() {
        let r = 2 * i;
        a.set_row(
            r,
            &nalgebra::RowSVector::<f64, 8>::from_row_slice(&[
                c.x, c.y, 1.0, 0.0, 0.0, 0.0, -c.x * s.x, -c.y * s.x,
            ]),
        );
        a.set_row(
            r + 1,
            &nalgebra::RowSVector::<f64, 8>::from_row_slice(&[
                0.0, 0.0, 0.0, c.x, c.y, 1.0, -c.x * s.y, -c.y * s.y,
            ]),
        );
        b[r] = s.x;
        b[r + 1] = s.y;
    }
    let h = a.lu().solve(&b).ok_or(SourceError::SingularHomography)?;
    Homography::from_rows([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
}

/// Projects a camera point onto the screen, clamping into
/// `[0, width] × [0, height]` and flagging clamped results.
pub fn project_to_screen(h: &Homography, pt: Point, screen: &ScreenSpec) -> Result<ScreenPoint, SourceError> {
    let raw = h.apply(pt)?;
    Ok(ScreenPoint::clamped(raw, screen.width(), screen.height()))
}
