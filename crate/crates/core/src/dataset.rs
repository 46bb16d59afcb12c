//! Two-class image ingestion, augmentation and synthetic data.
//!
//! Images are converted to gray levels in [0, 1], area-averaged down to
//! 31x31 and padded with one zero row (bottom) and one zero column (right)
//! to the 32x32 network input.
//!
//! On-disk layout read by [`load_directory`]:
//!
//! ```text
//! root/train/positive/*.png|*.pgm
//! root/train/negative/...
//! root/test/positive/...
//! root/test/negative/...
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, RngStream};
use crate::{Error, Result};

/// Side of the resized image content.
pub const CONTENT_SIZE: usize = 31;
/// Side after zero padding.
pub const PADDED_SIZE: usize = 32;
/// Augmentation factor turning 84 positives into 420.
pub const DEFAULT_AUGMENT_FACTOR: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_decision(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// Class index used by the network heads: negative 0, positive 1.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            _ => Err(Error::Domain(format!("class index {i} is not binary"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "negative" | "0" => Ok(Label::Negative),
            "positive" | "1" => Ok(Label::Positive),
            _ => Err(Error::Parse(format!("unknown label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Raw,
    Augmented { source: String },
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    /// 32x32, values in [0, 1], last row and column zero.
    pub pixels: Matrix,
    pub label: Label,
    pub origin: Origin,
}

impl AsRef<Matrix> for ImageRecord {
    fn as_ref(&self) -> &Matrix {
        &self.pixels
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn of(records: &[ImageRecord]) -> Self {
        let positive = records.iter().filter(|r| r.label.is_positive()).count();
        Self {
            positive,
            negative: records.len() - positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
}

impl DatasetSplit {
    /// Checks that ids are unique across both splits and that no augmented
    /// record sits in the test split.
    pub fn new(train: Vec<ImageRecord>, test: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in train.iter().chain(&test) {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Domain(format!("record id {:?} appears twice", r.id)));
            }
        }
        if let Some(r) = test.iter().find(|r| matches!(r.origin, Origin::Augmented { .. })) {
            return Err(Error::Domain(format!("augmented record {:?} in the test split", r.id)));
        }
        Ok(Self { train, test })
    }

    pub fn train_counts(&self) -> ClassCounts {
        ClassCounts::of(&self.train)
    }

    pub fn test_counts(&self) -> ClassCounts {
        ClassCounts::of(&self.test)
    }
}

/// Labels as class indices.
pub fn class_indices(records: &[ImageRecord]) -> Vec<usize> {
    records.iter().map(|r| r.label.index()).collect()
}

pub fn labels(records: &[ImageRecord]) -> Vec<Label> {
    records.iter().map(|r| r.label).collect()
}

/// Box-filter resize of a `width x height` gray image to `size x size`.
pub fn area_resize(src: &[f64], width: usize, height: usize, size: usize) -> Matrix {
    let wx = overlap_weights(width, size);
    let wy = overlap_weights(height, size);
    // horizontal pass: height x size
    let mut tmp = vec![0.0; height * size];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for (ox, weights) in wx.iter().enumerate() {
            tmp[y * size + ox] = weights.iter().map(|&(j, w)| w * row[j]).sum();
        }
    }
    Matrix::from_fn(size, size, |oy, ox| wy[oy].iter().map(|&(j, w)| w * tmp[j * size + ox]).sum())
}

/// For each output cell, the source cells it overlaps and normalized weights.
fn overlap_weights(src_len: usize, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let (a, b) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut w: Vec<(usize, f64)> = (a.floor() as usize..(b.ceil() as usize).min(src_len))
                .filter_map(|j| {
                    let overlap = b.min(j as f64 + 1.0) - a.max(j as f64);
                    (overlap > 0.0).then_some((j, overlap))
                })
                .collect();
            let total: f64 = w.iter().map(|p| p.1).sum();
            w.iter_mut().for_each(|p| p.1 /= total);
            w
        })
        .collect()
}

/// Pads 31x31 content to 32x32 with a zero bottom row and right column.
pub fn pad_to_input(content: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(PADDED_SIZE, PADDED_SIZE);
    for y in 0..content.rows().min(PADDED_SIZE) {
        for x in 0..content.cols().min(PADDED_SIZE) {
            out[(y, x)] = content[(y, x)];
        }
    }
    out
}

fn content_of(padded: &Matrix) -> Matrix {
    Matrix::from_fn(CONTENT_SIZE, CONTENT_SIZE, |y, x| padded[(y, x)])
}

/// Decodes one PNG / PGM file into a padded 32x32 record matrix.
pub fn load_image(path: &Path) -> Result<Matrix> {
    let img = image::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let gray = img.to_luma32f();
    let (w, h) = gray.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Shape(format!("{}: empty image", path.display())));
    }
    let src: Vec<f64> = gray.as_raw().iter().map(|&v| (v as f64).clamp(0.0, 1.0)).collect();
    Ok(pad_to_input(&area_resize(&src, w as usize, h as usize, CONTENT_SIZE)))
}

/// Result of reading a dataset directory.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub split: DatasetSplit,
    /// Files that could not be decoded and were skipped.
    pub warnings: Vec<String>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
}

fn load_class_dir(root: &Path, split: &str, label: Label, warnings: &mut Vec<String>) -> Result<Vec<ImageRecord>> {
    let dir = root.join(split).join(label.as_str());
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    let mut records = Vec::with_capacity(files.len());
    for path in files {
        match load_image(&path) {
            Ok(pixels) => {
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                records.push(ImageRecord {
                    id: format!("{split}/{}/{name}", label.as_str()),
                    pixels,
                    label,
                    origin: Origin::Raw,
                });
            }
            Err(e) => warnings.push(format!("skipped {}: {e}", path.display())),
        }
    }
    if records.is_empty() {
        return Err(Error::Domain(format!("{} holds no readable images", dir.display())));
    }
    Ok(records)
}

/// Reads `train/{positive,negative}` and `test/{positive,negative}`.
pub fn load_directory(root: &Path) -> Result<LoadedDataset> {
    let mut warnings = Vec::new();
    let mut split_records = |split: &str| -> Result<Vec<ImageRecord>> {
        let mut recs = load_class_dir(root, split, Label::Positive, &mut warnings)?;
        recs.extend(load_class_dir(root, split, Label::Negative, &mut warnings)?);
        Ok(recs)
    };
    let train = split_records("train")?;
    let test = split_records("test")?;
    Ok(LoadedDataset {
        split: DatasetSplit::new(train, test)?,
        warnings,
    })
}

/// Writes a split in the [`load_directory`] layout as 8-bit gray PNGs of
/// the 31x31 content.
pub fn write_directory(split: &DatasetSplit, root: &Path) -> Result<()> {
    for (name, records) in [("train", &split.train), ("test", &split.test)] {
        for label in [Label::Positive, Label::Negative] {
            let dir = root.join(name).join(label.as_str());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        for r in records.iter() {
            let file_name = format!("{}.png", r.id.replace(['/', '\\', '#'], "_"));
            let path = root.join(name).join(r.label.as_str()).join(file_name);
            let content = content_of(&r.pixels);
            let bytes: Vec<u8> = content
                .as_slice()
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect();
            let img = image::GrayImage::from_raw(CONTENT_SIZE as u32, CONTENT_SIZE as u32, bytes)
                .expect("buffer matches dimensions");
            img.save(&path)
                .map_err(|e| Error::io(&path, std::io::Error::other(e.to_string())))?;
        }
    }
    Ok(())
}

fn bilinear(img: &Matrix, y: f64, x: f64) -> f64 {
    let (h, w) = (img.rows() as isize, img.cols() as isize);
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let at = |yy: isize, xx: isize| {
        if yy < 0 || xx < 0 || yy >= h || xx >= w {
            0.0
        } else {
            img[(yy as usize, xx as usize)]
        }
    };
    let (yi, xi) = (y0 as isize, x0 as isize);
    (1.0 - fy) * ((1.0 - fx) * at(yi, xi) + fx * at(yi, xi + 1))
        + fy * ((1.0 - fx) * at(yi + 1, xi) + fx * at(yi + 1, xi + 1))
}

/// Rotates by `angle` radians, scales by `scale` and shifts by `(dy, dx)`
/// around the content center, resampling bilinearly.
fn transform(content: &Matrix, angle: f64, scale: f64, dy: f64, dx: f64) -> Matrix {
    let c = (CONTENT_SIZE as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    Matrix::from_fn(CONTENT_SIZE, CONTENT_SIZE, |y, x| {
        let (py, px) = ((y as f64 - c - dy) / scale, (x as f64 - c - dx) / scale);
        let sy = cos * py + sin * px + c;
        let sx = -sin * py + cos * px + c;
        bilinear(content, sy, sx).clamp(0.0, 1.0)
    })
}

/// Creates `factor − 1` jittered copies of every source record: rotation in
/// ±10°, translation up to ±2 px, scale in [0.95, 1.05].
pub fn augment(sources: &[ImageRecord], factor: usize, stream: &mut RngStream) -> Vec<ImageRecord> {
    let mut out = Vec::with_capacity(sources.len() * factor.saturating_sub(1));
    for src in sources {
        let content = content_of(&src.pixels);
        for k in 1..factor {
            let angle = stream.uniform_in(-10.0, 10.0).to_radians();
            let dy = stream.uniform_in(-2.0, 2.0);
            let dx = stream.uniform_in(-2.0, 2.0);
            let scale = stream.uniform_in(0.95, 1.05);
            out.push(ImageRecord {
                id: format!("{}#aug{k}", src.id),
                pixels: pad_to_input(&transform(&content, angle, scale, dy, dx)),
                label: src.label,
                origin: Origin::Augmented { source: src.id.clone() },
            });
        }
    }
    out
}

fn synthetic_image(label: Label, stream: &mut RngStream) -> Matrix {
    let (cy, cx) = match label {
        Label::Negative => (15.0 + stream.uniform_in(-2.0, 2.0), 15.0 + stream.uniform_in(-2.0, 2.0)),
        Label::Positive => {
            let corners = [(6.0, 6.0), (6.0, 24.0), (24.0, 6.0), (24.0, 24.0)];
            let (y, x) = corners[stream.below(4) as usize];
            (y + stream.uniform_in(-1.5, 1.5), x + stream.uniform_in(-1.5, 1.5))
        }
    };
    let sigma = stream.uniform_in(2.5, 3.5);
    let amplitude = stream.uniform_in(0.6, 0.9);
    let content = Matrix::from_fn(CONTENT_SIZE, CONTENT_SIZE, |y, x| {
        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
        let blob = amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
        (0.1 + blob + 0.05 * stream.standard_normal()).clamp(0.0, 1.0)
    });
    pad_to_input(&content)
}

/// Balanced synthetic set: negatives carry a centered blob, positives a
/// corner blob, both on a noisy background.
pub fn synthesize_split(train_per_class: usize, test_per_class: usize, stream: &mut RngStream) -> Result<DatasetSplit> {
    let mut make = |split: &str, count: usize| -> Vec<ImageRecord> {
        let mut v = Vec::with_capacity(2 * count);
        for label in [Label::Positive, Label::Negative] {
            for i in 0..count {
                v.push(ImageRecord {
                    id: format!("{split}-{}-{i:05}", label.as_str()),
                    pixels: synthetic_image(label, stream),
                    label,
                    origin: Origin::Synthetic,
                });
            }
        }
        v
    };
    let train = make("train", train_per_class);
    let test = make("test", test_per_class);
    DatasetSplit::new(train, test)
}

/// `count_per_class` images per class, split 70/30 into train/test.
pub fn synthesize(count_per_class: usize, stream: &mut RngStream) -> Result<DatasetSplit> {
    if count_per_class < 10 {
        return Err(Error::Domain("synthesize needs at least 10 images per class".into()));
    }
    let train = (count_per_class * 7).div_ceil(10);
    synthesize_split(train, count_per_class - train, stream)
}

/// Features CSV: header `id,label,f1,…,fn`, one row per record.
pub fn features_csv(records: &[ImageRecord], features: &Matrix) -> Result<String> {
    if records.len() != features.rows() {
        return Err(Error::Dimension(format!(
            "{} records vs {} feature rows",
            records.len(),
            features.rows()
        )));
    }
    let mut out = String::from("id,label");
    for j in 1..=features.cols() {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (r, row) in records.iter().zip(features.row_iter()) {
        out.push_str(&r.id.replace(',', "_"));
        out.push(',');
        out.push_str(r.label.as_str());
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parsed features CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub features: Matrix,
}

pub fn parse_features_csv(text: &str) -> Result<FeatureTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty features file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "label" {
        return Err(Error::Parse("features header must be id,label,f1,...".into()));
    }
    let dim = cols.len() - 2;
    let (mut ids, mut labels, mut data) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse(format!("row {}: expected {} fields", n + 1, dim + 2)));
        }
        ids.push(fields[0].to_string());
        labels.push(Label::parse(fields[1])?);
        for f in &fields[2..] {
            data.push(
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad number {f:?}", n + 1)))?,
            );
        }
    }
    let rows = ids.len();
    Ok(FeatureTable {
        ids,
        labels,
        features: Matrix::from_vec(rows, dim, data)?,
    })
}
