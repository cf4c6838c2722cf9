use std::io::Cursor;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::SourceError;
use crate::model::Point;

/// Fraction of the brightest peak at which a second region makes the
/// detection ambiguous.
const AMBIGUITY_RATIO: f64 = 0.8;

/// Row-major 8-bit grayscale camera frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, SourceError> {
        let expected = width * height;
        if pixels.len() != expected {
            return Err(SourceError::FrameSize {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Decodes a binary (P5) or ASCII (P2) graymap.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, SourceError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
            .map_err(|e| SourceError::Pgm(e.to_string()))?
            .into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    /// Encodes as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(
                &self.pixels,
                self.width as u32,
                self.height as u32,
                ExtendedColorType::L8,
            )
            .expect("in-memory pgm encode");
        out.into_inner()
    }
}

struct Region {
    peak: u8,
    weight: f64,
    sum_x: f64,
    sum_y: f64,
}

/// Finds the laser spot as the intensity-weighted centroid of the brightest
/// 8-connected region of pixels at or above `min_intensity`.
///
/// Coordinates are in camera pixels with pixel `(i, j)` centred on `(i, j)`.
/// Returns `Ok(None)` when no pixel reaches the threshold.
pub fn detect_laser_spot(frame: &Frame, min_intensity: u8) -> Result<Option<Point>, SourceError> {
    let (w, h) = (frame.width, frame.height);
    let mut seen = vec![false; w * h];
    let mut regions: Vec<Region> = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if seen[start] || frame.pixels[start] < min_intensity {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut region = Region {
            peak: 0,
            weight: 0.0,
            sum_x: 0.0,
            sum_y: 0.0,
        };
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            let v = frame.pixels[idx];
            region.peak = region.peak.max(v);
            let wv = f64::from(v);
            region.weight += wv;
            region.sum_x += wv * x as f64;
            region.sum_y += wv * y as f64;

            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if !seen[n] && frame.pixels[n] >= min_intensity {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        regions.push(region);
    }

    let Some(best) = regions
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.peak.cmp(&b.peak).then(a.weight.total_cmp(&b.weight)))
        .map(|(i, _)| i)
    else {
        return Ok(None);
    };
    let brightest = regions[best].peak;
    if let Some(second) = regions
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, r)| r.peak)
        .max()
    {
        if f64::from(second) >= AMBIGUITY_RATIO * f64::from(brightest) {
            return Err(SourceError::AmbiguousSpot { brightest, second });
        }
    }
    let r = &regions[best];
    Ok(Some(Point::new(r.sum_x / r.weight, r.sum_y / r.weight)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Renders an isotropic Gaussian over a flat background, sampled at pixel
    /// centres.
    pub(crate) fn gaussian_frame(
        w: usize,
        h: usize,
        spots: &[(f64, f64, f64, f64)],
        background: f64,
    ) -> Frame {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut v = background;
                for &(cx, cy, sigma, peak) in spots {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    v += (peak - background) * (-d2 / (2.0 * sigma * sigma)).exp();
                }
                px.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        Frame::new(w, h, px).unwrap()
    }

    #[test]
    fn centred_gaussian() {
        let f = gaussian_frame(64, 48, &[(20.0, 10.0, 1.5, 255.0)], 10.0);
        let p = detect_laser_spot(&f, 128).unwrap().unwrap();
        assert!(p.distance(Point::new(20.0, 10.0)) < 0.5, "{p:?}");
    }

    #[test]
    fn uniform_frame_has_no_spot() {
        let f = Frame::filled(64, 48, 10);
        assert_eq!(detect_laser_spot(&f, 128).unwrap(), None);
    }

    #[test]
    fn twin_spots_are_ambiguous() {
        let f = gaussian_frame(64, 48, &[(10.0, 10.0, 1.5, 255.0), (50.0, 30.0, 1.5, 255.0)], 10.0);
        assert!(matches!(
            detect_laser_spot(&f, 128),
            Err(SourceError::AmbiguousSpot { .. })
        ));
    }

    #[test]
    fn faint_reflection_is_tolerated() {
        // 150 < 0.8 * 255
        let f = gaussian_frame(64, 48, &[(10.0, 10.0, 1.5, 255.0), (50.0, 30.0, 1.5, 150.0)], 10.0);
        let p = detect_laser_spot(&f, 128).unwrap().unwrap();
        assert!(p.distance(Point::new(10.0, 10.0)) < 0.5);
    }

    #[test]
    fn single_hot_pixel_on_border() {
        let mut f = Frame::filled(8, 8, 0);
        f.set(7, 7, 200);
        assert_eq!(detect_laser_spot(&f, 100).unwrap(), Some(Point::new(7.0, 7.0)));
    }

    #[test]
    fn frame_size_checked() {
        assert!(matches!(
            Frame::new(4, 4, vec![0; 15]),
            Err(SourceError::FrameSize { expected: 16, got: 15 })
        ));
    }

    #[test]
    fn pgm_round_trip() {
        let f = gaussian_frame(17, 9, &[(8.0, 4.0, 2.0, 240.0)], 3.0);
        let bytes = f.to_pgm();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(Frame::from_pgm(&bytes).unwrap(), f);
    }

    #[test]
    fn ascii_pgm_decodes() {
        let f = Frame::from_pgm(b"P2\n3 2\n255\n0 1 2\n3 4 255\n").unwrap();
        assert_eq!(f.pixels(), &[0, 1, 2, 3, 4, 255]);
    }
}
