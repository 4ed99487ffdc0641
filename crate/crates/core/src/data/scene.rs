use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embeddings::{EmbeddingTable, LabelSet, OTHER_LABEL};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Target value for unlabelled pixels.
pub const IGNORE_INDEX: u8 = 255;

/// One training image with its dense target and the label set the target
/// indexes into.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub image: RgbImage,
    /// Row-major label index per pixel, or [`IGNORE_INDEX`].
    pub target: Vec<u8>,
    pub label_set: LabelSet,
}

impl TrainSample {
    pub fn new(image: RgbImage, target: Vec<u8>, label_set: LabelSet) -> Result<Self> {
        let s = Self {
            image,
            target,
            label_set,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn height(&self) -> usize {
        self.image.height() as usize
    }

    pub fn width(&self) -> usize {
        self.image.width() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.len() != self.height() * self.width() {
            return Err(Error::shape(format!(
                "target has {} entries for a {}x{} image",
                self.target.len(),
                self.height(),
                self.width()
            )));
        }
        let n = self.label_set.len();
        if let Some(&bad) = self.target.iter().find(|&&y| y != IGNORE_INDEX && y as usize >= n) {
            return Err(Error::LabelSet(format!("target index {bad} out of range for {n} labels")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Axis-aligned rectangle with sides drawn from the range.
    Rect { min_side: usize, max_side: usize },
    Disk { min_radius: usize, max_radius: usize },
    /// Upright isosceles triangle inscribed in a square of the given side.
    Triangle { min_side: usize, max_side: usize },
}

impl Geometry {
    /// Largest bounding-box side the shape can take.
    fn max_extent(&self) -> usize {
        match *self {
            Geometry::Rect { max_side, .. } | Geometry::Triangle { max_side, .. } => max_side,
            Geometry::Disk { max_radius, .. } => 2 * max_radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = match *self {
            Geometry::Rect { min_side, max_side } | Geometry::Triangle { min_side, max_side } => (min_side, max_side),
            Geometry::Disk { min_radius, max_radius } => (min_radius, max_radius),
        };
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid size range {lo}..={hi} in {self:?}")));
        }
        Ok(())
    }
}

/// How the pixels of a region are coloured. Patterns are evaluated at
/// absolute image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Appearance {
    Flat([u8; 3]),
    Checker { a: [u8; 3], b: [u8; 3], period: usize },
    /// Vertical stripes.
    Stripes { a: [u8; 3], b: [u8; 3], period: usize },
    /// `size x size` pattern repeated over the image.
    Tile { size: usize, pixels: Vec<[u8; 3]> },
}

impl Appearance {
    pub fn color_at(&self, y: usize, x: usize) -> [u8; 3] {
        match self {
            Appearance::Flat(c) => *c,
            Appearance::Checker { a, b, period } => {
                if (y / period + x / period) % 2 == 0 { *a } else { *b }
            }
            Appearance::Stripes { a, b, period } => {
                if (x / period) % 2 == 0 { *a } else { *b }
            }
            Appearance::Tile { size, pixels } => pixels[(y % size) * size + x % size],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Appearance::Checker { period: 0, .. } | Appearance::Stripes { period: 0, .. } => {
                Err(Error::Config("pattern period must be positive".into()))
            }
            Appearance::Tile { size, pixels } if *size == 0 || pixels.len() != size * size => {
                Err(Error::Config(format!("tile of size {size} needs {} pixels", size * size)))
            }
            _ => Ok(()),
        }
    }

    /// Texture tile that is a fixed linear function of an embedding vector:
    /// `0.5 + 0.15 * P v`, clamped and quantized, with `P` a Gaussian matrix
    /// drawn from `projection_seed`. Classes whose embeddings are close look
    /// alike; the map is shared by every class so appearance can be inverted
    /// back to embedding space.
    pub fn from_embedding(vector: &[f32], size: usize, projection_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(projection_seed, "appearance-projection"));
        let rows = size * size * 3;
        let projection: Vec<f64> = (0..rows * vector.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut values = projection.chunks(vector.len()).map(|row| {
            let z: f64 = row.iter().zip(vector).map(|(p, &v)| p * v as f64).sum();
            ((0.5 + 0.15 * z).clamp(0.0, 1.0) * 255.0).round() as u8
        });
        let pixels = (0..size * size)
            .map(|_| {
                let mut px = [0u8; 3];
                px.iter_mut().for_each(|c| *c = values.next().expect("3 values per pixel"));
                px
            })
            .collect();
        Appearance::Tile { size, pixels }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeClass {
    pub concept: String,
    pub geometry: Geometry,
    pub appearance: Appearance,
}

/// Recipe for a synthetic segmentation dataset. Shapes are painted back to
/// front over the background, so the last shape covering a pixel owns it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub classes: Vec<ShapeClass>,
    pub background: Appearance,
    /// Inclusive range of shapes per image.
    pub shapes_per_image: (usize, usize),
    /// Standard deviation (in [0, 1] intensity units) of a per-instance
    /// offset added to the appearance: every shape, and each image's
    /// background, draws its own 4x4x3 offset pattern, repeated with period
    /// 4 in absolute coordinates. Zero renders class appearances verbatim.
    pub jitter: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// `"other"` followed by the class concepts, in order.
    pub fn label_set(&self) -> Result<LabelSet> {
        let mut labels = vec![OTHER_LABEL.to_string()];
        labels.extend(self.classes.iter().map(|c| c.concept.clone()));
        LabelSet::new(labels, Some(0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("canvas must be non-empty".into()));
        }
        let (lo, hi) = self.shapes_per_image;
        if lo > hi {
            return Err(Error::Config(format!("shapes per image range {lo}..={hi} is empty")));
        }
        if hi > 0 && self.classes.is_empty() {
            return Err(Error::Config("shapes requested but no classes given".into()));
        }
        if self.classes.len() + 1 > IGNORE_INDEX as usize {
            return Err(Error::Config("too many classes for 8-bit targets".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Config(format!("jitter must be finite and >= 0, got {}", self.jitter)));
        }
        self.background.validate()?;
        for c in &self.classes {
            c.geometry.validate()?;
            c.appearance.validate()?;
            let extent = c.geometry.max_extent();
            if extent > self.height || extent > self.width {
                return Err(Error::Config(format!(
                    "shape of `{}` (extent {extent}) does not fit a {}x{} canvas",
                    c.concept, self.height, self.width
                )));
            }
        }
        self.label_set().map(|_| ())
    }

    /// Checks every concept (and "other") resolves in `table`.
    pub fn check_vocabulary(&self, table: &EmbeddingTable) -> Result<()> {
        table.resolve(&self.label_set()?)
    }
}

/// Classes whose textures are derived from their embeddings (see
/// [`Appearance::from_embedding`]), with geometries cycling through
/// rectangle, disk and triangle and sized relative to a `canvas`-pixel side.
/// Also returns the matching background for [`OTHER_LABEL`].
pub fn embedding_classes(
    names: &[String],
    table: &EmbeddingTable,
    canvas: usize,
    tile: usize,
    projection_seed: u64,
) -> Result<(Vec<ShapeClass>, Appearance)> {
    let lookup = |n: &str| table.get(n).ok_or_else(|| Error::UnknownLabel(n.to_string()));
    let s = canvas;
    let geometries = [
        Geometry::Rect { min_side: (3 * s / 16).max(1), max_side: (7 * s / 16).max(1) },
        Geometry::Disk { min_radius: (3 * s / 32).max(1), max_radius: (7 * s / 32).max(1) },
        Geometry::Triangle { min_side: (7 * s / 32).max(1), max_side: (15 * s / 32).max(1) },
    ];
    let classes = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            Ok(ShapeClass {
                concept: n.clone(),
                geometry: geometries[i % geometries.len()].clone(),
                appearance: Appearance::from_embedding(lookup(n)?, tile, projection_seed),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let background = Appearance::from_embedding(lookup(OTHER_LABEL)?, tile, projection_seed);
    Ok((classes, background))
}

struct Placed {
    class: usize,
    top: f64,
    left: f64,
    size: f64,
    geometry: Geometry,
}

impl Placed {
    fn contains(&self, y: usize, x: usize) -> bool {
        let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
        match self.geometry {
            Geometry::Rect { .. } => {
                py >= self.top && py < self.top + self.size && px >= self.left && px < self.left + self.size
            }
            Geometry::Disk { .. } => {
                let r = self.size / 2.0;
                let (cy, cx) = (self.top + r, self.left + r);
                (py - cy).powi(2) + (px - cx).powi(2) <= r * r
            }
            Geometry::Triangle { .. } => {
                // Apex at the top centre, base along the bottom edge.
                let s = self.size;
                let (ty, tx) = (py - self.top, px - self.left);
                ty >= 0.0 && ty <= s && (tx - s / 2.0).abs() <= ty / 2.0
            }
        }
    }
}

fn sample_shape(rng: &mut ChaCha8Rng, class: usize, c: &ShapeClass, h: usize, w: usize) -> Placed {
    let size = match c.geometry {
        Geometry::Rect { min_side, max_side } | Geometry::Triangle { min_side, max_side } => {
            rng.random_range(min_side..=max_side) as f64
        }
        Geometry::Disk { min_radius, max_radius } => 2.0 * rng.random_range(min_radius..=max_radius) as f64,
    };
    let top = rng.random_range(0.0..=(h as f64 - size));
    let left = rng.random_range(0.0..=(w as f64 - size));
    Placed {
        class,
        top,
        left,
        size,
        geometry: c.geometry.clone(),
    }
}

/// Renders `count` samples. Image `i` uses its own random stream derived
/// from `(seed, i)`. When `count` is at least the number of classes and
/// every image has at least one shape, image `i`'s top-most shape belongs
/// to class `i mod K`, so every class appears somewhere.
pub fn generate(spec: &SceneSpec, count: usize) -> Result<Vec<TrainSample>> {
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    spec.validate()?;
    let labels = spec.label_set()?;
    (0..count).map(|i| render(spec, &labels, i)).collect()
}

/// Renders sample `index` alone; `generate(spec, n)[i] == render_one(spec, i)`.
pub fn render_one(spec: &SceneSpec, index: usize) -> Result<TrainSample> {
    spec.validate()?;
    render(spec, &spec.label_set()?, index)
}

const JITTER_PERIOD: usize = 4;

fn jitter_pattern(rng: &mut ChaCha8Rng, std: f64) -> Vec<f64> {
    (0..JITTER_PERIOD * JITTER_PERIOD * 3)
        .map(|_| { let z: f64 = StandardNormal.sample(rng); std * z })
        .collect()
}

fn render(spec: &SceneSpec, labels: &LabelSet, index: usize) -> Result<TrainSample> {
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("image{index}")));
    let (lo, hi) = spec.shapes_per_image;
    let n = rng.random_range(lo..=hi);
    let k = spec.classes.len();
    let shapes: Vec<Placed> = (0..n)
        .map(|s| {
            let class = if s + 1 == n { index % k } else { rng.random_range(0..k) };
            sample_shape(&mut rng, class, &spec.classes[class], h, w)
        })
        .collect();

    // Drawn after the shapes so a zero jitter leaves the shape stream as is.
    let offsets: Vec<Vec<f64>> = if spec.jitter > 0.0 {
        (0..=shapes.len()).map(|_| jitter_pattern(&mut rng, spec.jitter)).collect()
    } else {
        Vec::new()
    };
    let mut image = RgbImage::new(w as u32, h as u32);
    let mut target = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            let owner = shapes.iter().rposition(|s| s.contains(y, x));
            let mut color = match owner {
                Some(i) => {
                    let c = shapes[i].class;
                    target[y * w + x] = (c + 1) as u8;
                    spec.classes[c].appearance.color_at(y, x)
                }
                None => spec.background.color_at(y, x),
            };
            if let Some(offset) = offsets.get(owner.map_or(shapes.len(), |i| i)) {
                let base = ((y % JITTER_PERIOD) * JITTER_PERIOD + x % JITTER_PERIOD) * 3;
                for (c, v) in color.iter_mut().enumerate() {
                    *v = (*v as f64 + 255.0 * offset[base + c]).round().clamp(0.0, 255.0) as u8;
                }
            }
            image.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }
    TrainSample::new(image, target, labels.clone())
}
