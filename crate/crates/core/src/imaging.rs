//! Grayscale rasters, binary masks, binary PGM (P5) I/O and the linear
//! filtering primitive shared by recognition and texture PAD.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrisImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl IrisImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
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

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Pixel lookup with nearest-pixel replication outside the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[cy * self.width + cx]
    }

    /// Bilinear sample at subpixel position, replicating the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(xi, yi) as f64;
        let p10 = self.get_clamped(xi + 1, yi) as f64;
        let p01 = self.get_clamped(xi, yi + 1) as f64;
        let p11 = self.get_clamped(xi + 1, yi + 1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    /// Mirror about the vertical axis.
    pub fn flip_horizontal(&self) -> IrisImage {
        let mut out = self.clone();
        for y in 0..self.height {
            let row = &mut out.pixels[y * self.width..(y + 1) * self.width];
            row.reverse();
        }
        out
    }
}

/// Row-major {0,1} validity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask of {} bits does not fit {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Binarize a grayscale raster: bit is set iff value >= `threshold`.
    pub fn from_image(img: &IrisImage, threshold: u8) -> Self {
        Self {
            width: img.width,
            height: img.height,
            bits: img.pixels.iter().map(|&p| p >= threshold).collect(),
        }
    }

    /// 0 = excluded, 255 = valid.
    pub fn to_image(&self) -> IrisImage {
        IrisImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of set bits over the whole raster.
    pub fn coverage(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..self.height {
            out.bits[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }
}

/// Real-valued raster, the output of linear filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RealImage {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Square correlation kernel with odd side, row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    side: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(side: usize, weights: Vec<f64>) -> Result<Self> {
        if side % 2 == 0 {
            return Err(Error::EvenKernel(side));
        }
        if weights.len() != side * side {
            return Err(Error::InvalidImage(format!(
                "kernel of side {side} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        Ok(Self { side, weights })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn radius(&self) -> usize {
        self.side / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.weights[v * self.side + u]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

const PGM_MAGIC: &[u8; 2] = b"P5";

/// Parse a binary PGM from memory. Header comments (`#` to end of line)
/// and arbitrary whitespace between tokens are accepted.
pub fn decode_pgm(bytes: &[u8]) -> Result<IrisImage> {
    if bytes.len() < 2 || &bytes[..2] != PGM_MAGIC {
        let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::MalformedHeader(format!("magic {shown:?} is not \"P5\"")));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
        // Whitespace and comments before each token.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader(format!("{name} is not numeric")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("{name} {text} out of range")))?;
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("missing separator after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedHeader(format!(
            "maxval {maxval} outside 1..=255"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    IrisImage::new(width, height, payload[..expected].to_vec())
}

/// Canonical P5 encoding: `P5\n<w> <h>\n255\n` followed by the raster.
pub fn encode_pgm(img: &IrisImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<IrisImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(img: &IrisImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    Ok(BinaryMask::from_image(&read_pgm(path)?, 128))
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(&mask.to_image(), path)
}

/// The `w`x`h` window centered on the image. When the margin is odd the
/// extra pixel is left on the right/bottom side.
pub fn center_crop(img: &IrisImage, w: usize, h: usize) -> Result<IrisImage> {
    if w > img.width || h > img.height || w == 0 || h == 0 {
        return Err(Error::CropTooLarge {
            w,
            h,
            width: img.width,
            height: img.height,
        });
    }
    let x0 = (img.width - w) / 2;
    let y0 = (img.height - h) / 2;
    let mut pixels = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        pixels.extend_from_slice(&img.pixels[y * img.width + x0..y * img.width + x0 + w]);
    }
    IrisImage::new(w, h, pixels)
}

/// Correlation of `kernel` with `img`, anchored at the kernel center, with
/// nearest-pixel replication at the border. The kernel is not flipped.
///
/// The sum is accumulated over differences to the center pixel plus
/// `sum(kernel) * center`. For kernels whose weights sum to zero within
/// rounding the second term is dropped, so constant neighborhoods give an
/// exact 0 and adding a constant to the image leaves every response
/// bit-identical.
pub fn convolve_zero_mean(img: &IrisImage, kernel: &Kernel) -> Result<RealImage> {
    if kernel.side % 2 == 0 {
        return Err(Error::EvenKernel(kernel.side));
    }
    let r = kernel.radius();
    let (w, h) = (img.width, img.height);
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut padded = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = py as isize - r as isize;
        for px in 0..pw {
            let sx = px as isize - r as isize;
            padded.push(img.get_clamped(sx, sy) as f64);
        }
    }
    let s = kernel.side;
    let abs_sum: f64 = kernel.weights.iter().map(|k| k.abs()).sum();
    let dc = kernel.sum();
    let dc = if dc.abs() <= 1e-9 * abs_sum { 0.0 } else { dc };
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        let out_row = &mut data[y * w..(y + 1) * w];
        let center = &padded[(y + r) * pw + r..(y + r) * pw + r + w];
        for v in 0..s {
            let src_row = &padded[(y + v) * pw..(y + v) * pw + pw];
            let krow = &kernel.weights[v * s..(v + 1) * s];
            for (u, &k) in krow.iter().enumerate() {
                if k == 0.0 {
                    continue;
                }
                let src = &src_row[u..u + w];
                for ((o, &p), &c) in out_row.iter_mut().zip(src).zip(center) {
                    *o += k * (p - c);
                }
            }
        }
        if dc != 0.0 {
            for (o, &c) in out_row.iter_mut().zip(center) {
                *o += dc * c;
            }
        }
    }
    Ok(RealImage {
        width: w,
        height: h,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_correlation(img: &IrisImage, k: &Kernel) -> Vec<f64> {
        let r = k.radius() as isize;
        let mut out = Vec::new();
        for y in 0..img.height() as isize {
            for x in 0..img.width() as isize {
                let mut acc = 0.0;
                for dv in -r..=r {
                    for du in -r..=r {
                        let sx = (x + du).clamp(0, img.width() as isize - 1);
                        let sy = (y + dv).clamp(0, img.height() as isize - 1);
                        let p = img.get(sx as usize, sy as usize) as f64;
                        acc += k.at((du + r) as usize, (dv + r) as usize) * p;
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn decodes_tiny_p5() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 7]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img, IrisImage::new(2, 2, vec![0, 255, 128, 7]).unwrap());
    }

    #[test]
    fn header_comments_and_whitespace() {
        let mut bytes = b"P5 # made by hand\n  2\t# w\n 1 \n# max\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 8]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[9, 8]);
    }

    #[test]
    fn rejects_ascii_pgm_and_bad_headers() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_pgm(b"P5\nx 1\n255\n0"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_pgm(b"P5\n1 1\n65535\n00"), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\x01\x02"),
            Err(Error::TruncatedPayload { expected: 4, found: 2 })
        ));
    }

    #[test]
    fn canonical_header_is_thirteen_bytes() {
        let img = IrisImage::new(1, 1, vec![0]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(bytes, b"P5\n1 1\n255\n\x00");
        assert_eq!(bytes.len(), 12);
    }

    #[test]
    fn write_to_unwritable_path_fails() {
        let img = IrisImage::new(1, 1, vec![0]).unwrap();
        let err = write_pgm(&img, "/nonexistent-dir/deeper/out.pgm").unwrap_err();
        assert_eq!(err.name(), "IoFailure");
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = IrisImage::from_fn(5, 3, |x, y| (x * 40 + y) as u8).unwrap();
        write_pgm(&img, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    #[test]
    fn crop_rules() {
        let img = IrisImage::from_fn(4, 4, |x, y| (y * 4 + x) as u8).unwrap();
        assert_eq!(center_crop(&img, 4, 4).unwrap(), img);
        let c = center_crop(&img, 2, 2).unwrap();
        assert_eq!(c.pixels(), &[5, 6, 9, 10]);
        assert!(matches!(center_crop(&img, 6, 6), Err(Error::CropTooLarge { .. })));
        // odd margin: extra column stays on the right
        let c = center_crop(&img, 3, 4).unwrap();
        assert_eq!(c.get(0, 0), 0);
    }

    #[test]
    fn convolution_basics() {
        let flat = IrisImage::filled(7, 5, 93).unwrap();
        let k = Kernel::new(3, vec![1.0, -2.0, 1.0, 0.5, 0.0, -0.5, -1.0, 2.0, -1.0]).unwrap();
        let resp = convolve_zero_mean(&flat, &k).unwrap();
        assert!(resp.data.iter().all(|&v| v == 0.0));

        let img = IrisImage::from_fn(4, 3, |x, y| (x * 17 + y * 5) as u8).unwrap();
        let twice = convolve_zero_mean(&img, &Kernel::new(1, vec![2.0]).unwrap()).unwrap();
        for (o, &p) in twice.data.iter().zip(img.pixels()) {
            assert_eq!(*o, 2.0 * p as f64);
        }
        assert!(matches!(Kernel::new(2, vec![0.0; 4]), Err(Error::EvenKernel(2))));
    }

    #[test]
    fn convolution_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = IrisImage::from_fn(8, 8, |_, _| rng.random()).unwrap();
        let k = Kernel::new(3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let fast = convolve_zero_mean(&img, &k).unwrap();
        for (a, b) in fast.data.iter().zip(brute_correlation(&img, &k)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn pgm_roundtrip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = IrisImage::from_fn(w, h, |_, _| rng.random()).unwrap();
            prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        }

        #[test]
        fn convolution_is_linear_in_the_interior(seed in any::<u64>(), a in 0u32..3, b in 0u32..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let i1 = IrisImage::from_fn(12, 10, |_, _| rng.random_range(0..64)).unwrap();
            let i2 = IrisImage::from_fn(12, 10, |_, _| rng.random_range(0..64)).unwrap();
            let k = Kernel::new(5, (0..25).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let mix = IrisImage::from_fn(12, 10, |x, y| {
                (a * i1.get(x, y) as u32 + b * i2.get(x, y) as u32) as u8
            }).unwrap();
            let c1 = convolve_zero_mean(&i1, &k).unwrap();
            let c2 = convolve_zero_mean(&i2, &k).unwrap();
            let cm = convolve_zero_mean(&mix, &k).unwrap();
            for y in 2..8 {
                for x in 2..10 {
                    let rhs = a as f64 * c1.get(x, y) + b as f64 * c2.get(x, y);
                    prop_assert!((cm.get(x, y) - rhs).abs() < 1e-9);
                }
            }
        }
    }
}
