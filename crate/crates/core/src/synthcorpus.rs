//! Synthetic hopper frames with a known fill level.
//!
//! A frame is a flat wall of luminance `wall_value`. Material rises from the
//! bottom edge; below the pile surface every pixel gets uniform noise of
//! peak-to-peak `texture_amplitude`, above it the wall gets the much smaller
//! `wall_noise`. The surface height at column `x` (with `t = x / (width-1)`) is
//!
//! ```text
//! fill * height * (1 + skew * (1 - 2t) + HEAP_RELIEF * (0.5 - 2|t - 0.5|))
//! ```
//!
//! clamped to the frame. Both correction terms average to zero over the
//! width, so `fill` is the mean surface height. Positive skew piles material
//! to the left; the heap term raises the center, where material is fed in.
//! With the default lines, a 75% pile touches the middle of L1 and a pile of
//! 80% or more covers all of it.
//!
//! # Random streams
//!
//! Noise comes from ChaCha8 (`rand_chacha`), seeded through
//! `ChaCha8Rng::seed_from_u64`. Each pixel, in row-major order, consumes one
//! `next_u64()`; its top 53 bits give a uniform `u` in `[0, 1)` and the pixel is
//! `round(wall_value + (u - 0.5) * amplitude)` clamped to `0..=255`. The
//! per-file seed of corpus entry `i` is the first `next_u64()` of stream `i`
//! of the generator seeded with the corpus seed. ChaCha output is fixed by
//! its specification, so corpora are byte-identical across platforms.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::FullnessClass;
use crate::imaging::GrayImage;
use crate::manifest::{write_manifest, ManifestEntry, MANIFEST_FILE};

/// Relative height of the central heap, as a fraction of the fill height.
pub const HEAP_RELIEF: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("InvalidParams: {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("IoFailure: {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SynthError {
    SynthError::InvalidParams {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub width: u32,
    pub height: u32,
    /// Mean pile height as a fraction of the frame height.
    pub fill: f64,
    /// Peak-to-peak luminance of the material texture.
    pub texture_amplitude: f64,
    pub wall_value: f64,
    /// Peak-to-peak luminance of the empty wall (rust, stains).
    pub wall_noise: f64,
    /// Lateral bias of the pile in `[-1, 1]`.
    pub skew: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            fill: 0.5,
            texture_amplitude: 120.0,
            wall_value: 110.0,
            wall_noise: 6.0,
            skew: 0.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width < 16 {
            return Err(invalid("width", format!("{} < 16", self.width)));
        }
        if self.height < 16 {
            return Err(invalid("height", format!("{} < 16", self.height)));
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(invalid("fill", format!("{} not in [0, 1]", self.fill)));
        }
        if !(-1.0..=1.0).contains(&self.skew) {
            return Err(invalid("skew", format!("{} not in [-1, 1]", self.skew)));
        }
        if !(0.0..=255.0).contains(&self.wall_value) {
            return Err(invalid("wall_value", format!("{} not in [0, 255]", self.wall_value)));
        }
        if !(self.wall_noise >= 0.0 && self.wall_noise.is_finite()) {
            return Err(invalid("wall_noise", format!("{} < 0", self.wall_noise)));
        }
        if !(self.texture_amplitude > self.wall_noise && self.texture_amplitude.is_finite()) {
            return Err(invalid(
                "texture_amplitude",
                format!(
                    "{} must exceed wall_noise {}",
                    self.texture_amplitude, self.wall_noise
                ),
            ));
        }
        Ok(())
    }

    /// Pile surface height in pixels at column `x`.
    pub fn surface_height(&self, x: u32) -> f64 {
        let t = x as f64 / (self.width - 1) as f64;
        let profile = 1.0 + self.skew * (1.0 - 2.0 * t) + HEAP_RELIEF * (0.5 - 2.0 * (t - 0.5).abs());
        (self.fill * self.height as f64 * profile).clamp(0.0, self.height as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub image: GrayImage,
    pub truth: FullnessClass,
    pub fill: f64,
}

/// Nearest nominal class; exact midpoints go to the fuller class.
pub fn label_of(fill: f64) -> FullnessClass {
    if fill >= 0.875 {
        FullnessClass::P100
    } else if fill >= 0.625 {
        FullnessClass::P75
    } else if fill >= 0.375 {
        FullnessClass::P50
    } else if fill >= 0.175 {
        FullnessClass::P25
    } else {
        FullnessClass::P10
    }
}

pub fn generate(params: &SynthParams) -> Result<SynthFrame, SynthError> {
    params.validate()?;
    let (w, h) = (params.width as usize, params.height as usize);
    // first material row per column
    let material_from: Vec<f64> = (0..params.width)
        .map(|x| h as f64 - params.surface_height(x))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for &boundary in &material_from {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let amplitude = if y as f64 >= boundary {
                params.texture_amplitude
            } else {
                params.wall_noise
            };
            let v = params.wall_value + (u - 0.5) * amplitude;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    let image = GrayImage::new(params.width, params.height, data).expect("dimensions validated");
    Ok(SynthFrame {
        image,
        truth: label_of(params.fill),
        fill: params.fill,
    })
}

/// Seed of corpus entry `index`.
pub fn entry_seed(corpus_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(corpus_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// What to generate. Entry `i` uses `fills[i % fills.len()]` and
/// `skews[(i / fills.len()) % skews.len()]`, so classes are interleaved and
/// every fill meets every skew.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub count: usize,
    pub fills: Vec<f64>,
    pub skews: Vec<f64>,
    pub seed: u64,
    /// Size, texture and wall parameters shared by all frames.
    pub template: SynthParams,
}

impl CorpusSpec {
    pub fn params_for(&self, index: usize) -> SynthParams {
        let skews: &[f64] = if self.skews.is_empty() { &[0.0] } else { &self.skews };
        SynthParams {
            fill: self.fills[index % self.fills.len()],
            skew: skews[(index / self.fills.len()) % skews.len()],
            seed: entry_seed(self.seed, index as u64),
            ..self.template
        }
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.pgm")
}

/// Write `count` PGM frames plus `manifest.jsonl` into `out_dir`.
pub fn generate_corpus(out_dir: &Path, spec: &CorpusSpec) -> Result<Vec<ManifestEntry>, SynthError> {
    if spec.count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    if spec.fills.is_empty() {
        return Err(invalid("fills", "must not be empty"));
    }
    for i in 0..spec.count.min(spec.fills.len() * spec.skews.len().max(1)) {
        spec.params_for(i).validate()?;
    }
    fs::create_dir_all(out_dir).map_err(|source| SynthError::IoFailure {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let entries = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let params = spec.params_for(i);
            let frame = generate(&params)?;
            let file = frame_file_name(i);
            let path = out_dir.join(&file);
            fs::write(&path, frame.image.to_pgm())
                .map_err(|source| SynthError::IoFailure { path, source })?;
            Ok(ManifestEntry {
                file,
                truth: frame.truth,
                fill: Some(params.fill),
                skew: Some(params.skew),
                seed: Some(params.seed),
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let manifest_path = out_dir.join(MANIFEST_FILE);
    let write = || -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(&manifest_path)?);
        write_manifest(&mut f, &entries)?;
        f.flush()
    };
    write().map_err(|source| SynthError::IoFailure {
        path: manifest_path.clone(),
        source,
    })?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LinePair;
    use crate::imaging::sample_line;
    use crate::linestats::line_stats;

    fn params(fill: f64, skew: f64, seed: u64) -> SynthParams {
        SynthParams {
            fill,
            skew,
            seed,
            ..SynthParams::default()
        }
    }

    fn sigmas(p: &SynthParams) -> (f64, f64) {
        let img = generate(p).unwrap().image;
        let lines = LinePair::default_for(p.width, p.height);
        let s1 = line_stats(&sample_line(&img, &lines.l1).unwrap()).unwrap();
        let s2 = line_stats(&sample_line(&img, &lines.l2).unwrap()).unwrap();
        (s1.sigma, s2.sigma)
    }

    #[test]
    fn label_of_nominals_and_midpoints() {
        assert_eq!(label_of(0.10), FullnessClass::P10);
        assert_eq!(label_of(0.0), FullnessClass::P10);
        assert_eq!(label_of(0.175), FullnessClass::P25);
        assert_eq!(label_of(0.174), FullnessClass::P10);
        assert_eq!(label_of(0.375), FullnessClass::P50);
        assert_eq!(label_of(0.625), FullnessClass::P75);
        assert_eq!(label_of(0.875), FullnessClass::P100);
        assert_eq!(label_of(0.9), FullnessClass::P100);
        for c in FullnessClass::ALL {
            assert_eq!(label_of(c.nominal()), c);
        }
    }

    #[test]
    fn empty_hopper_is_wall_noise_only() {
        let p = params(0.0, 0.0, 7);
        let img = generate(&p).unwrap().image;
        let half = p.wall_noise / 2.0;
        assert!(img
            .as_raw()
            .iter()
            .all(|&v| (v as f64 - p.wall_value).abs() <= half + 0.5));
        let (s1, s2) = sigmas(&p);
        // uniform noise: sigma = amplitude / sqrt(12), plus rounding
        let bound = (p.wall_noise * p.wall_noise / 12.0 + 1.0 / 12.0).sqrt() * 1.2;
        assert!(s1 <= bound && s2 <= bound, "{s1} {s2} > {bound}");
    }

    #[test]
    fn full_hopper_textures_all_of_l2() {
        let p = params(1.0, 0.0, 3);
        let lines = LinePair::default_for(p.width, p.height);
        for (x, y) in lines.l2.rasterize() {
            assert!(y as f64 >= p.height as f64 - p.surface_height(x as u32));
        }
        // and at any skew in [-0.5, 0.5]
        for skew in [-0.5, 0.5] {
            let p = params(1.0, skew, 3);
            for (x, y) in lines.l2.rasterize() {
                assert!(y as f64 >= p.height as f64 - p.surface_height(x as u32));
            }
        }
    }

    #[test]
    fn surface_geometry_against_l1() {
        let lines = LinePair::default_for(640, 480);
        let covered = |fill: f64, skew: f64| {
            let p = params(fill, skew, 0);
            lines
                .l1
                .rasterize()
                .into_iter()
                .filter(|&(x, y)| y as f64 >= 480.0 - p.surface_height(x as u32))
                .count() as f64
                / lines.l1.pixel_count() as f64
        };
        assert_eq!(covered(0.7, 0.0), 0.0);
        let c75 = covered(0.75, 0.0);
        assert!(c75 > 0.3 && c75 < 0.6, "{c75}");
        // the end columns sit a hair below t = 0.25
        assert!(covered(0.8, 0.0) > 0.99);
        assert_eq!(covered(1.0, 0.0), 1.0);
        assert_eq!(covered(0.5, 0.5), 0.0);
    }

    #[test]
    fn half_full_beats_ten_percent_on_l2() {
        for seed in [0, 1, 42] {
            let (_, s50) = sigmas(&params(0.5, 0.0, seed));
            let (_, s10) = sigmas(&params(0.1, 0.0, seed));
            assert!(s50 > s10, "seed {seed}: {s50} <= {s10}");
        }
    }

    #[test]
    fn l1_activates_above_seventy_five() {
        for seed in 0..10 {
            let low = [0.5, 0.7].map(|f| sigmas(&params(f, 0.0, seed)).0);
            let high = [0.8, 0.9, 1.0].map(|f| sigmas(&params(f, 0.0, seed)).0);
            let max_low = low.iter().cloned().fold(f64::MIN, f64::max);
            assert!(high.iter().all(|&h| h > max_low), "seed {seed}: {low:?} vs {high:?}");
        }
    }

    #[test]
    fn skew_barely_moves_center_line_when_full() {
        for seed in 0..5 {
            let (_, base) = sigmas(&params(1.0, 0.0, seed));
            for skew in [-0.5, 0.5] {
                let (_, s) = sigmas(&params(1.0, skew, seed));
                assert!((s - base).abs() / base < 0.10);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&params(0.6, 0.3, 99)).unwrap();
        let b = generate(&params(0.6, 0.3, 99)).unwrap();
        assert_eq!(a, b);
        let c = generate(&params(0.6, 0.3, 100)).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn rejects_bad_params() {
        let cases = [
            (SynthParams { fill: 1.5, ..Default::default() }, "fill"),
            (SynthParams { skew: -1.1, ..Default::default() }, "skew"),
            (SynthParams { width: 8, ..Default::default() }, "width"),
            (SynthParams { height: 15, ..Default::default() }, "height"),
            (SynthParams { wall_noise: -1.0, ..Default::default() }, "wall_noise"),
            (
                SynthParams { texture_amplitude: 5.0, wall_noise: 5.0, ..Default::default() },
                "texture_amplitude",
            ),
            (SynthParams { fill: f64::NAN, ..Default::default() }, "fill"),
        ];
        for (p, field) in cases {
            match generate(&p) {
                Err(SynthError::InvalidParams { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected InvalidParams({field}), got {other:?}"),
            }
        }
    }

    #[test]
    fn entry_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..50).map(|i| entry_seed(5, i)).collect();
        let mut dedup = seeds.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), seeds.len());
        assert_eq!(entry_seed(5, 3), seeds[3]);
    }

    #[test]
    fn corpus_bookkeeping() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            count: 5,
            fills: vec![0.5],
            skews: vec![],
            seed: 11,
            template: SynthParams { width: 32, height: 24, ..Default::default() },
        };
        let entries = generate_corpus(dir.path(), &spec).unwrap();
        assert_eq!(entries.len(), 5);
        assert!(entries.iter().all(|e| e.truth == FullnessClass::P50));
        let mut seeds: Vec<u64> = entries.iter().map(|e| e.seed.unwrap()).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 5);
        for e in &entries {
            assert!(dir.path().join(&e.file).is_file());
        }
        let read = crate::manifest::read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(read, entries);
    }

    #[test]
    fn corpus_class_balance() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            count: 100,
            fills: vec![0.1, 0.25, 0.5, 0.75, 1.0],
            skews: vec![-0.5, 0.0, 0.5],
            seed: 1,
            template: SynthParams { width: 16, height: 16, ..Default::default() },
        };
        let entries = generate_corpus(dir.path(), &spec).unwrap();
        let mut counts = [0usize; 5];
        for e in &entries {
            counts[e.truth.index()] += 1;
        }
        assert_eq!(counts, [20; 5]);
    }

    #[test]
    fn corpus_rejects_empty_requests() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = CorpusSpec {
            count: 0,
            fills: vec![0.5],
            skews: vec![],
            seed: 0,
            template: SynthParams::default(),
        };
        assert!(matches!(
            generate_corpus(dir.path(), &spec),
            Err(SynthError::InvalidParams { field: "count", .. })
        ));
        spec.count = 1;
        spec.fills.clear();
        assert!(generate_corpus(dir.path(), &spec).is_err());
    }

    #[test]
    fn corpus_reports_unwritable_target() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let spec = CorpusSpec {
            count: 1,
            fills: vec![0.5],
            skews: vec![],
            seed: 0,
            template: SynthParams { width: 16, height: 16, ..Default::default() },
        };
        assert!(matches!(
            generate_corpus(&blocker.join("sub"), &spec),
            Err(SynthError::IoFailure { .. })
        ));
    }
}
