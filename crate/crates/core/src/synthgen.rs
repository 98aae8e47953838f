//! Seeded synthetic eyes: identity textures in rubber-sheet coordinates,
//! contact-lens overprints and Lambertian two-light renderings.
//!
//! The iris texture is a sum of cosines in `(t, theta)`, where `t` and
//! `theta` are exactly the coordinates normalization samples. Pupil dilation
//! and center offsets therefore leave the normalized texture unchanged, and
//! eye rotation becomes a column shift.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{write_mask, write_pgm, BinaryMask, IrisImage};
use crate::pad3d::{IlluminationGeometry, Vec3};
use crate::segmentation::{annulus_mask, validate_circles, write_circles, Circle, SegmentationResult};

pub const DEFAULT_WIDTH: usize = 640;
pub const DEFAULT_HEIGHT: usize = 480;
pub const PUPIL_INTENSITY: u8 = 10;
pub const SCLERA_INTENSITY: u8 = 230;
pub const GLINT_INTENSITY: u8 = 255;
/// Fraction of the iris annulus a textured lens covers (outer ring).
pub const LENS_COVERAGE: f64 = 0.70;
pub const DEFAULT_LENS_SEED: u64 = 0x1E45;

const TEXTURE_TERMS: usize = 96;
const TEXTURE_MEAN: f64 = 110.0;
const TEXTURE_STD: f64 = 35.0;
const TEXTURE_RANGE: (f64, f64) = (30.0, 200.0);
const LENS_OPACITY: f64 = 0.75;
const LENS_DOT: f64 = 220.0;
const LENS_GROUND: f64 = 30.0;
const LENS_PERIOD: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lens {
    None,
    Textured,
    Opaque,
}

impl Lens {
    pub fn as_str(self) -> &'static str {
        match self {
            Lens::None => "none",
            Lens::Textured => "textured",
            Lens::Opaque => "opaque",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Lens::None),
            "textured" => Some(Lens::Textured),
            "opaque" => Some(Lens::Opaque),
            _ => None,
        }
    }
}

/// Height field of the presented eye, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Plane,
    /// `h = depth * r_iris * (1 - rho^2)` inside the iris.
    FlatDome { depth: f64 },
    /// Dome plus `amplitude * sin(2 pi x / period) * sin(2 pi y / period)`.
    Bumpy { depth: f64, amplitude: f64, period: f64 },
}

impl Surface {
    pub const FLAT_DOME: Surface = Surface::FlatDome { depth: 0.1 };
    pub const BUMPY: Surface = Surface::Bumpy {
        depth: 0.1,
        amplitude: 1.0,
        period: 12.0,
    };

    pub fn as_str(self) -> &'static str {
        match self {
            Surface::Plane => "plane",
            Surface::FlatDome { .. } => "flat-dome",
            Surface::Bumpy { .. } => "bumpy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plane" => Some(Surface::Plane),
            "flat-dome" => Some(Surface::FLAT_DOME),
            "bumpy" => Some(Surface::BUMPY),
            _ => None,
        }
    }

    /// Default surface for a lens: textured lenses sit as an irregular
    /// shell, everything else is a smooth dome.
    pub fn for_lens(lens: Lens) -> Self {
        match lens {
            Lens::Textured => Surface::BUMPY,
            Lens::None | Lens::Opaque => Surface::FLAT_DOME,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    /// Capture seed: noise and bump phases.
    pub seed: u64,
    pub identity: u64,
    pub pupil: Circle,
    pub iris: Circle,
    /// Angular frequency band of the identity texture, cycles per revolution.
    pub band: (f64, f64),
    pub noise_sigma: f64,
    pub rotation_deg: f64,
    pub glints: bool,
    pub lens: Lens,
    pub lens_seed: u64,
    pub surface: Surface,
    pub geometry: IlluminationGeometry,
}

impl SynthSpec {
    /// Centered eye, no noise, no rotation, no lens.
    pub fn base(identity: u64) -> Self {
        let (cx, cy) = (DEFAULT_WIDTH as f64 / 2.0, DEFAULT_HEIGHT as f64 / 2.0);
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            seed: 0,
            identity,
            pupil: Circle::new(cx, cy, 45.0),
            iris: Circle::new(cx, cy, 115.0),
            band: (16.0, 64.0),
            noise_sigma: 0.0,
            rotation_deg: 0.0,
            glints: false,
            lens: Lens::None,
            lens_seed: DEFAULT_LENS_SEED,
            surface: Surface::FLAT_DOME,
            geometry: IlluminationGeometry::default(),
        }
    }

    /// A jittered capture: position, pupil dilation, rotation, noise and
    /// glints all vary with `(identity, capture)`.
    pub fn capture(identity: u64, capture: u64, lens: Lens) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(identity ^ 0x5EED_CA97_0000_0000);
        rng.set_stream(capture + 1);
        let mut s = Self::base(identity);
        let icx = s.iris.cx + rng.random_range(-6.0..=6.0);
        let icy = s.iris.cy + rng.random_range(-6.0..=6.0);
        s.iris = Circle::new(icx, icy, 115.0 + rng.random_range(-3.0..=3.0));
        s.pupil = Circle::new(
            icx + rng.random_range(-2.0..=2.0),
            icy + rng.random_range(-2.0..=2.0),
            45.0 + rng.random_range(-5.0..=5.0),
        );
        s.rotation_deg = rng.random_range(-4.0..=4.0);
        s.noise_sigma = 3.0;
        s.glints = true;
        s.seed = rng.random();
        s.lens = lens;
        s.surface = Surface::for_lens(lens);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("image {}x{} too small", self.width, self.height));
        }
        validate_circles(&self.pupil, &self.iris, self.width, self.height).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        if !(self.band.0 > 0.0 && self.band.0 <= self.band.1 && self.band.1.is_finite()) {
            return bad(format!("texture band {:?}", self.band));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {}", self.noise_sigma));
        }
        if !self.rotation_deg.is_finite() {
            return bad("rotation not finite".into());
        }
        match self.surface {
            Surface::Plane => {}
            Surface::FlatDome { depth } if depth >= 0.0 && depth.is_finite() => {}
            Surface::Bumpy {
                depth,
                amplitude,
                period,
            } if depth >= 0.0 && amplitude >= 0.0 && period > 0.0 && (depth + amplitude + period).is_finite() => {}
            s => return bad(format!("surface {s:?}")),
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<SegmentationResult> {
        let annulus = annulus_mask(self.width, self.height, &self.pupil, &self.iris);
        SegmentationResult::new(self.pupil, self.iris, &annulus)
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    amp: f64,
    angular: f64,
    radial: f64,
    phase: f64,
}

/// Band-limited random field over `(t, theta)`, fixed by the identity.
#[derive(Debug, Clone)]
pub struct IdentityTexture {
    waves: Vec<Wave>,
    scale: f64,
}

impl IdentityTexture {
    pub fn new(identity: u64, band: (f64, f64)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(identity);
        let (lo, hi) = (band.0.round().max(1.0) as i64, band.1.round().max(1.0) as i64);
        let waves: Vec<Wave> = (0..TEXTURE_TERMS)
            .map(|_| Wave {
                amp: rng.random_range(0.3..1.0),
                angular: rng.random_range(lo..=hi.max(lo)) as f64,
                radial: rng.random_range(0.5..3.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        let power: f64 = waves.iter().map(|w| w.amp * w.amp / 2.0).sum();
        Self {
            waves,
            scale: TEXTURE_STD / power.sqrt(),
        }
    }

    pub fn value(&self, t: f64, theta: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|w| w.amp * (w.angular * theta + 2.0 * PI * w.radial * t + w.phase).cos())
            .sum();
        (TEXTURE_MEAN + self.scale * s).clamp(TEXTURE_RANGE.0, TEXTURE_RANGE.1)
    }
}

/// Inverse of the rubber-sheet map: the `(t, theta)` whose sample point is
/// `(x, y)`, with `t` in `[0, 1]` across the annulus and `theta` in
/// `[0, 2 pi)`.
pub fn rubber_sheet_coords(pupil: &Circle, iris: &Circle, x: f64, y: f64) -> (f64, f64) {
    // |D - tE| = r_p + t dr, a quadratic in t with negative leading term
    let (dx, dy) = (x - pupil.cx, y - pupil.cy);
    let (ex, ey) = (iris.cx - pupil.cx, iris.cy - pupil.cy);
    let dr = iris.r - pupil.r;
    let a = ex * ex + ey * ey - dr * dr;
    let b = dx * ex + dy * ey + pupil.r * dr;
    let c = dx * dx + dy * dy - pupil.r * pupil.r;
    let t = (b - (b * b - a * c).max(0.0).sqrt()) / a;
    let (cx, cy) = (pupil.cx + t * ex, pupil.cy + t * ey);
    let theta = (y - cy).atan2(x - cx).rem_euclid(2.0 * PI);
    (t, theta)
}

fn capture_rng(spec: &SynthSpec) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.identity.wrapping_add(1));
    rng
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Noise-free, lens-free eye as real values.
fn render_clean(spec: &SynthSpec) -> Vec<f64> {
    let tex = IdentityTexture::new(spec.identity, spec.band);
    let rot = spec.rotation_deg.to_radians();
    let (p, i) = (spec.pupil, spec.iris);
    let mut out: Vec<f64> = (0..spec.width * spec.height)
        .into_par_iter()
        .map(|k| {
            let (x, y) = ((k % spec.width) as f64, (k / spec.width) as f64);
            if !i.contains(x, y) {
                SCLERA_INTENSITY as f64
            } else if p.contains(x, y) {
                PUPIL_INTENSITY as f64
            } else {
                let (t, theta) = rubber_sheet_coords(&p, &i, x, y);
                tex.value(t, theta - rot)
            }
        })
        .collect();
    if spec.glints {
        for (ox, oy) in [(-0.35, -0.35), (0.3, -0.4)] {
            let g = Circle::new(p.cx + ox * p.r, p.cy + oy * p.r, 3.0);
            for y in (g.cy - 4.0).floor() as usize..=(g.cy + 4.0).ceil() as usize {
                for x in (g.cx - 4.0).floor() as usize..=(g.cx + 4.0).ceil() as usize {
                    if x < spec.width && y < spec.height && g.contains(x as f64, y as f64) {
                        out[y * spec.width + x] = GLINT_INTENSITY as f64;
                    }
                }
            }
        }
    }
    out
}

/// Inner radius of the textured-lens ring so that the ring covers
/// `LENS_COVERAGE` of the annulus area.
pub fn lens_inner_radius(spec: &SynthSpec) -> f64 {
    let (ri, rp) = (spec.iris.r, spec.pupil.r);
    (ri * ri - LENS_COVERAGE * (ri * ri - rp * rp)).sqrt()
}

/// Pixels a lens overprints.
pub fn lens_region(spec: &SynthSpec) -> BinaryMask {
    let annulus = annulus_mask(spec.width, spec.height, &spec.pupil, &spec.iris);
    match spec.lens {
        Lens::None => BinaryMask::empty(spec.width, spec.height),
        Lens::Opaque => annulus,
        Lens::Textured => {
            let r_in = lens_inner_radius(spec);
            let inner = Circle::new(spec.iris.cx, spec.iris.cy, r_in);
            BinaryMask::from_fn(spec.width, spec.height, |x, y| {
                annulus.get(x, y) && !inner.contains(x as f64, y as f64)
            })
        }
    }
}

struct LensPattern {
    /// Unit wave vectors and phases.
    waves: Vec<(f64, f64, f64)>,
    low: Vec<(f64, f64, f64, f64)>,
}

impl LensPattern {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..6)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..PI);
                (a.cos(), a.sin(), rng.random_range(0.0..2.0 * PI))
            })
            .collect();
        let low = (0..4)
            .map(|_| {
                (
                    rng.random_range(0.4..1.0),
                    rng.random_range(2..=6) as f64,
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Self { waves, low }
    }

    /// Binary dots from thresholded high-frequency waves, in lens coordinates.
    fn dots(&self, u: f64, v: f64) -> f64 {
        let k = 2.0 * PI / LENS_PERIOD;
        let s: f64 = self.waves.iter().map(|(a, b, ph)| (k * (a * u + b * v) + ph).cos()).sum();
        if s > 0.0 {
            LENS_DOT
        } else {
            LENS_GROUND
        }
    }

    /// Smooth print over the whole iris, polar around the lens center.
    fn smooth(&self, rho: f64, phi: f64) -> f64 {
        let s: f64 = self.low.iter().map(|(a, m, f, ph)| a * (m * phi + 2.0 * PI * f * rho + ph).cos()).sum();
        (120.0 + 30.0 * s).clamp(20.0, 235.0)
    }
}

/// Overprints the lens described by `spec` onto `img`. The lens turns with
/// the eye, so its pattern is rotated by `spec.rotation_deg`.
pub fn apply_lens(img: &IrisImage, spec: &SynthSpec) -> Result<IrisImage> {
    if img.width() != spec.width || img.height() != spec.height {
        return Err(Error::InvalidSpec(format!(
            "image {}x{} does not match spec {}x{}",
            img.width(),
            img.height(),
            spec.width,
            spec.height
        )));
    }
    let mut values: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
    overprint(&mut values, spec);
    IrisImage::new(spec.width, spec.height, values.into_iter().map(quantize).collect())
}

fn overprint(values: &mut [f64], spec: &SynthSpec) {
    if spec.lens == Lens::None {
        return;
    }
    let region = lens_region(spec);
    let pattern = LensPattern::new(spec.lens_seed);
    let rot = spec.rotation_deg.to_radians();
    let (c, s) = (rot.cos(), rot.sin());
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !region.get(x, y) {
                continue;
            }
            let (dx, dy) = (x as f64 - spec.iris.cx, y as f64 - spec.iris.cy);
            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
            let v_out = &mut values[y * spec.width + x];
            *v_out = match spec.lens {
                Lens::Textured => (1.0 - LENS_OPACITY) * *v_out + LENS_OPACITY * pattern.dots(u, v),
                Lens::Opaque => pattern.smooth(u.hypot(v) / spec.iris.r, v.atan2(u)),
                Lens::None => unreachable!(),
            };
        }
    }
}

/// Eye image and ground truth. The lens is applied before capture noise.
pub fn render_eye(spec: &SynthSpec) -> Result<(IrisImage, SegmentationResult)> {
    spec.validate()?;
    let mut values: Vec<f64> = render_clean(spec).into_iter().map(f64::round).collect();
    overprint(&mut values, spec);
    if spec.noise_sigma > 0.0 {
        let mut rng = capture_rng(spec);
        let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        values.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    let img = IrisImage::new(spec.width, spec.height, values.into_iter().map(quantize).collect())?;
    Ok((img, spec.truth()?))
}

/// Bump phases for a capture.
fn bump_phases(spec: &SynthSpec) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xB0B5);
    (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI))
}

/// Unit surface normal `(-h_x, -h_y, 1) / |.|` at pixel `(x, y)`.
pub fn surface_normal(spec: &SynthSpec, x: f64, y: f64) -> Vec3 {
    let (dx, dy) = (x - spec.iris.cx, y - spec.iris.cy);
    let inside = spec.iris.contains(x, y);
    let (mut hx, mut hy) = (0.0, 0.0);
    if inside {
        let dome = |depth: f64| (-2.0 * depth * dx / spec.iris.r, -2.0 * depth * dy / spec.iris.r);
        match spec.surface {
            Surface::Plane => {}
            Surface::FlatDome { depth } => (hx, hy) = dome(depth),
            Surface::Bumpy {
                depth,
                amplitude,
                period,
            } => {
                (hx, hy) = dome(depth);
                let (px, py) = bump_phases(spec);
                let k = 2.0 * PI / period;
                let (sx, cx) = (k * dx + px).sin_cos();
                let (sy, cy) = (k * dy + py).sin_cos();
                hx += amplitude * k * cx * sy;
                hy += amplitude * k * sx * cy;
            }
        }
    }
    let n = (hx * hx + hy * hy + 1.0).sqrt();
    [-hx / n, -hy / n, 1.0 / n]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPair {
    pub left: IrisImage,
    pub right: IrisImage,
    /// The eye under uniform light, used as albedo.
    pub albedo: IrisImage,
    pub truth: SegmentationResult,
}

impl RenderedPair {
    pub fn mask(&self) -> &BinaryMask {
        &self.truth.mask
    }
}

/// Lambertian intensity `albedo * max(0, n . l)`, quantized.
pub fn shade(albedo: u8, n: &Vec3, l: &Vec3) -> u8 {
    let d = n[0] * l[0] + n[1] * l[1] + n[2] * l[2];
    quantize(albedo as f64 * d.max(0.0))
}

pub fn render_pair(spec: &SynthSpec) -> Result<RenderedPair> {
    let (albedo, truth) = render_eye(spec)?;
    let g = spec.geometry;
    let w = spec.width;
    let normals: Vec<Vec3> = (0..w * spec.height)
        .into_par_iter()
        .map(|k| surface_normal(spec, (k % w) as f64, (k / w) as f64))
        .collect();
    let render = |l: &Vec3| {
        let px = albedo.pixels().iter().zip(&normals).map(|(&a, n)| shade(a, n, l)).collect();
        IrisImage::new(w, spec.height, px)
    };
    Ok(RenderedPair {
        left: render(&g.left)?,
        right: render(&g.right)?,
        albedo,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Eye image path, relative to the manifest directory.
    pub path: String,
    pub identity: u64,
    pub lens: Lens,
    pub surface: Surface,
}

impl ManifestEntry {
    /// File stem without the `.pgm` extension.
    pub fn stem(&self) -> &str {
        self.path.strip_suffix(".pgm").unwrap_or(&self.path)
    }
}

pub const MANIFEST_HEADER: &str = "path,identity,lens,surface";

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for e in entries {
        writeln!(out, "{},{},{},{}", e.path, e.identity, e.lens.as_str(), e.surface.as_str()).unwrap();
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (no == 0 && line == MANIFEST_HEADER) {
            continue;
        }
        let bad = |m: &str| Error::MalformedManifest(format!("line {}: {m}", no + 1));
        let fields: Vec<&str> = line.split(',').collect();
        let [path, identity, lens, surface] = fields.as_slice() else {
            return Err(bad("expected 4 fields"));
        };
        out.push(ManifestEntry {
            path: path.to_string(),
            identity: identity.parse().map_err(|_| bad("identity is not an integer"))?,
            lens: Lens::parse(lens).ok_or_else(|| bad("unknown lens"))?,
            surface: Surface::parse(surface).ok_or_else(|| bad("unknown surface"))?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

/// Options for [`generate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub identities: u64,
    pub captures: u64,
    /// When set, every capture is emitted twice: bare and wearing this lens.
    pub lens: Option<Lens>,
    pub pairs: bool,
}

/// Writes `<stem>.pgm`, `<stem>.circ` and `<stem>_mask.pgm` per capture,
/// plus `<stem>_L.pgm` / `<stem>_R.pgm` when `pairs` is set, and
/// `manifest.csv` listing every eye image.
pub fn generate_dataset(dir: impl AsRef<Path>, opts: &DatasetOptions) -> Result<Vec<ManifestEntry>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lenses = vec![Lens::None];
    if let Some(l) = opts.lens.filter(|l| *l != Lens::None) {
        lenses.push(l);
    }
    let jobs: Vec<(u64, u64, Lens)> = (0..opts.identities)
        .flat_map(|id| (0..opts.captures).flat_map(move |c| [(id, c)]))
        .flat_map(|(id, c)| lenses.iter().map(move |&l| (id, c, l)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(id, c, lens)| {
            let spec = SynthSpec::capture(id, c, lens);
            let mut stem = format!("id{id:04}_c{c:02}");
            if lens != Lens::None {
                stem.push('_');
                stem.push_str(lens.as_str());
            }
            let base = dir.join(&stem);
            let with = |suffix: &str| base.with_file_name(format!("{stem}{suffix}"));
            if opts.pairs {
                let pair = render_pair(&spec)?;
                write_pgm(&pair.albedo, with(".pgm"))?;
                write_pgm(&pair.left, with("_L.pgm"))?;
                write_pgm(&pair.right, with("_R.pgm"))?;
                write_mask(pair.mask(), with("_mask.pgm"))?;
            } else {
                let (img, truth) = render_eye(&spec)?;
                write_pgm(&img, with(".pgm"))?;
                write_mask(&truth.mask, with("_mask.pgm"))?;
            }
            write_circles(&spec.pupil, &spec.iris, with(".circ"))?;
            Ok(ManifestEntry {
                path: format!("{stem}.pgm"),
                identity: id,
                lens,
                surface: spec.surface,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = dir.join("manifest.csv");
    fs::write(&manifest, format_manifest(&entries)).map_err(|e| Error::io(&manifest, e))?;
    Ok(entries)
}
