use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::config::VitConfig;
use crate::error::{Error, Result};

/// Interleaved (row, column, channel) pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width * channels {
            return Err(Error::contract(format!(
                "{} pixels for a {height}x{width}x{channels} image",
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            pixels: vec![value; height * width * channels],
        }
    }

    /// Channel mean per pixel.
    pub fn grayscale(&self) -> Vec<f64> {
        self.pixels
            .chunks_exact(self.channels)
            .map(|p| p.iter().sum::<f64>() / self.channels as f64)
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            class_names: self.class_names.clone(),
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

pub const SYNTHETIC_CLASSES: [&str; 3] = ["benign", "adenocarcinoma", "squamous"];

/// Stain-like base colour and nucleus count per class.
const CLASS_STYLE: [([f64; 3], usize); 3] = [
    ([0.92, 0.66, 0.80], 3),
    ([0.72, 0.50, 0.78], 9),
    ([0.82, 0.56, 0.62], 16),
];
const NUCLEUS: [f64; 3] = [0.32, 0.20, 0.50];

/// Histology-like synthetic images: class `i % 3` for sample `i`. Classes differ in
/// background stain colour and in the density of dark elliptical nuclei.
pub fn synthetic_dataset(count: usize, height: usize, width: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).expect("positive stddev");
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % CLASS_STYLE.len();
        let (base, nuclei) = CLASS_STYLE[label];
        let tint: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-0.03..0.03)).collect();
        let mut px = vec![0.0; height * width * 3];
        for p in px.chunks_exact_mut(3) {
            p.copy_from_slice(&tint);
        }
        let scale = (height.min(width) as f64 / 32.0).max(0.25);
        let count = nuclei + rng.gen_range(0..3);
        for _ in 0..count {
            let cy = rng.gen_range(0.0..height as f64);
            let cx = rng.gen_range(0.0..width as f64);
            let ry = rng.gen_range(1.2..2.8) * scale;
            let rx = rng.gen_range(1.2..2.8) * scale;
            let y0 = (cy - ry).floor().max(0.0) as usize;
            let y1 = ((cy + ry).ceil() as usize).min(height);
            let x0 = (cx - rx).floor().max(0.0) as usize;
            let x1 = ((cx + rx).ceil() as usize).min(width);
            for y in y0..y1 {
                for x in x0..x1 {
                    let dy = (y as f64 + 0.5 - cy) / ry;
                    let dx = (x as f64 + 0.5 - cx) / rx;
                    if dy * dy + dx * dx <= 1.0 {
                        let p = &mut px[(y * width + x) * 3..(y * width + x) * 3 + 3];
                        for (c, n) in p.iter_mut().zip(NUCLEUS) {
                            *c = 0.25 * *c + 0.75 * n;
                        }
                    }
                }
            }
        }
        for v in px.iter_mut() {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
        images.push(Image {
            height,
            width,
            channels: 3,
            pixels: px,
        });
        labels.push(label);
    }
    Dataset {
        class_names: SYNTHETIC_CLASSES.iter().map(|s| s.to_string()).collect(),
        images,
        labels,
    }
}

pub fn synthetic_for(cfg: &VitConfig, count: usize, seed: u64) -> Dataset {
    synthetic_dataset(count, cfg.image_h, cfg.image_w, seed)
}

/// Loads `root/<class>/<image>` files. Classes are the sorted subdirectory names,
/// so every client that sees the same directories gets the same label order.
pub fn load_image_dir(root: &Path, height: usize, width: usize) -> Result<Dataset> {
    let mut classes: Vec<String> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(Error::config(format!(
            "no class subdirectories under {}",
            root.display()
        )));
    }
    let mut ds = Dataset {
        class_names: classes.clone(),
        ..Default::default()
    };
    for (label, class) in classes.iter().enumerate() {
        let mut files: Vec<_> = std::fs::read_dir(root.join(class))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension()
                        .and_then(|s| s.to_str())
                        .map(|s| s.to_ascii_lowercase())
                        .as_deref(),
                    Some("png" | "jpg" | "jpeg")
                )
            })
            .collect();
        files.sort();
        for f in files {
            let img = image::open(&f)
                .map_err(|e| Error::config(format!("cannot decode {}: {e}", f.display())))?
                .resize_exact(width as u32, height as u32, image::imageops::FilterType::Triangle)
                .to_rgb8();
            let pixels = img.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
            ds.images.push(Image {
                height,
                width,
                channels: 3,
                pixels,
            });
            ds.labels.push(label);
        }
    }
    Ok(ds)
}
