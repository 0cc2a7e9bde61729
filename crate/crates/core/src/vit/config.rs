use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VitConfig {
    pub image_h: usize,
    pub image_w: usize,
    pub channels: usize,
    pub patch_size: usize,
    pub hidden_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_dim: usize,
    pub classes: usize,
}

impl VitConfig {
    /// CI-scale default.
    pub fn desk() -> Self {
        Self {
            image_h: 32,
            image_w: 32,
            channels: 3,
            patch_size: 8,
            hidden_dim: 64,
            depth: 4,
            heads: 4,
            mlp_dim: 128,
            classes: 3,
        }
    }

    /// ViT-Base on 200x200 inputs with 25-pixel patches.
    pub fn paper() -> Self {
        Self {
            image_h: 200,
            image_w: 200,
            channels: 3,
            patch_size: 25,
            hidden_dim: 768,
            depth: 12,
            heads: 12,
            mlp_dim: 3072,
            classes: 3,
        }
    }

    /// Smallest useful configuration, for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            image_h: 4,
            image_w: 4,
            channels: 3,
            patch_size: 2,
            hidden_dim: 8,
            depth: 1,
            heads: 2,
            mlp_dim: 16,
            classes: 3,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::config(format!(
                "unknown ViT profile `{other}` (expected desk|paper|tiny)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonzero = [
            self.image_h,
            self.image_w,
            self.channels,
            self.patch_size,
            self.hidden_dim,
            self.depth,
            self.heads,
            self.mlp_dim,
        ];
        if nonzero.contains(&0) {
            return Err(Error::config("ViT dimensions must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::config("at least two classes are required"));
        }
        if !self.image_h.is_multiple_of(self.patch_size) || !self.image_w.is_multiple_of(self.patch_size) {
            return Err(Error::config(format!(
                "image {}x{} is not divisible by patch size {}",
                self.image_h, self.image_w, self.patch_size
            )));
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "hidden dim {} is not divisible by {} heads",
                self.hidden_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn patch_count(&self) -> usize {
        (self.image_h / self.patch_size) * (self.image_w / self.patch_size)
    }

    /// Patches plus the CLS token.
    pub fn token_count(&self) -> usize {
        self.patch_count() + 1
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    pub fn pixel_count(&self) -> usize {
        self.image_h * self.image_w * self.channels
    }
}
