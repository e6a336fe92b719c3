//! Background suppression and radial foveated rendering.
//!
//! A view is rendered from a blur pyramid whose levels are the base image
//! blurred at evenly spaced sigmas `sigma_max * l / (L - 1)`. Each output
//! pixel linearly blends the two levels that bracket the sigma prescribed by
//! its distance from the fixation center.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{GrayMap, Image, PixelPoint};
use crate::sas::FixationSet;

#[derive(Debug, Clone, PartialEq)]
pub struct FoveationConfig {
    /// Blur applied to the background before compositing.
    pub bg_sigma: f64,
    /// Blur reached in the far periphery.
    pub sigma_max: f64,
    /// Radius at which `sigma_max` is reached; `None` means half the image diagonal.
    pub r_max: Option<f64>,
    pub pyramid_levels: usize,
}

impl Default for FoveationConfig {
    fn default() -> Self {
        Self {
            bg_sigma: 12.0,
            sigma_max: 8.0,
            r_max: None,
            pyramid_levels: 6,
        }
    }
}

impl FoveationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bg_sigma >= 0.0) || !(self.sigma_max >= 0.0) {
            return Err(Error::Config("foveation sigmas must be >= 0".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0) {
                return Err(Error::Config(format!("foveation.r_max must be > 0, got {r}")));
            }
        }
        if self.pyramid_levels < 2 {
            return Err(Error::Config("foveation.pyramid_levels must be >= 2".into()));
        }
        Ok(())
    }

    /// `r_max` resolved against an image size.
    pub fn resolved_r_max(&self, width: usize, height: usize) -> f64 {
        self.r_max
            .unwrap_or_else(|| (width as f64).hypot(height as f64) / 2.0)
            .max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoveatedView {
    pub image: Image,
    pub center: PixelPoint,
}

/// `I_orig * M_fg + Blur(I_orig) * (1 - M_fg)`, per channel with a soft matte.
pub fn suppress_background(i_orig: &Image, m_fg: &GrayMap, bg_sigma: f64) -> Result<Image> {
    if i_orig.height() != m_fg.height() || i_orig.width() != m_fg.width() {
        return Err(Error::dims(
            format!("{}x{}", i_orig.width(), i_orig.height()),
            format!("{}x{}", m_fg.width(), m_fg.height()),
        ));
    }
    let blurred = i_orig.gaussian_blur(bg_sigma)?;
    let c = i_orig.channels();
    let data = i_orig
        .data()
        .iter()
        .zip(blurred.data())
        .enumerate()
        .map(|(i, (&sharp, &soft))| {
            let alpha = m_fg.data()[i / c];
            sharp * alpha + soft * (1.0 - alpha)
        })
        .collect();
    Ok(Image::from_clamped(i_orig.height(), i_orig.width(), c, data))
}

/// Clamped linear blur schedule `sigma_max * min(1, r / r_max)`.
pub fn radial_sigma(r: f64, sigma_max: f64, r_max: f64) -> f64 {
    sigma_max * (r / r_max).min(1.0)
}

/// Blur pyramid built from one base image, shared by all views of it.
#[derive(Debug, Clone)]
pub struct BlurPyramid {
    levels: Vec<Image>,
    sigma_max: f64,
}

impl BlurPyramid {
    pub fn build(base: &Image, sigma_max: f64, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Argument("a blur pyramid needs at least two levels".into()));
        }
        let levels = (0..levels)
            .into_par_iter()
            .map(|l| base.gaussian_blur(sigma_max * l as f64 / (levels - 1) as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, sigma_max })
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level_sigma(&self, l: usize) -> f64 {
        self.sigma_max * l as f64 / (self.levels.len() - 1) as f64
    }

    /// Lower bracketing level and the weights on it and the level above.
    pub fn blend_weights(&self, sigma: f64) -> (usize, f64, f64) {
        if self.sigma_max <= 0.0 || sigma <= 0.0 {
            return (0, 1.0, 0.0);
        }
        let top = self.levels.len() - 1;
        let pos = (sigma / self.sigma_max).min(1.0) * top as f64;
        let lower = (pos.floor() as usize).min(top - 1);
        let frac = pos - lower as f64;
        (lower, 1.0 - frac, frac)
    }

    /// Renders the view fixated at `center`.
    pub fn render(&self, center: PixelPoint, config: &FoveationConfig) -> Result<FoveatedView> {
        let base = &self.levels[0];
        let (w, h, c) = (base.width(), base.height(), base.channels());
        if !(center.x >= 0.0 && center.x < w as f64 && center.y >= 0.0 && center.y < h as f64) {
            return Err(Error::Argument(format!(
                "fixation ({}, {}) outside a {w}x{h} image",
                center.x, center.y
            )));
        }
        let r_max = config.resolved_r_max(w, h);
        let mut data = Vec::with_capacity(w * h * c);
        for y in 0..h {
            for x in 0..w {
                let r = PixelPoint::new(x as f64, y as f64).distance(&center);
                let sigma = radial_sigma(r, self.sigma_max, r_max);
                let (l, w_lo, w_hi) = self.blend_weights(sigma);
                let lo = &self.levels[l];
                let hi = &self.levels[(l + 1).min(self.levels.len() - 1)];
                for ch in 0..c {
                    data.push(w_lo * lo.get(x, y, ch) + w_hi * hi.get(x, y, ch));
                }
            }
        }
        Ok(FoveatedView {
            image: Image::from_clamped(h, w, c, data),
            center,
        })
    }
}

/// Radially foveated rendering of `i_base` around `center`.
pub fn foveate(i_base: &Image, center: PixelPoint, config: &FoveationConfig) -> Result<FoveatedView> {
    config.validate()?;
    let pyramid = BlurPyramid::build(i_base, config.sigma_max, config.pyramid_levels)?;
    pyramid.render(center, config)
}

/// One background-suppression pass, then one foveated view per fixation.
pub fn generate_views(
    i_orig: &Image,
    m_fg: &GrayMap,
    fixations: &FixationSet,
    config: &FoveationConfig,
) -> Result<Vec<FoveatedView>> {
    config.validate()?;
    if fixations.is_empty() {
        return Err(Error::Argument("no fixation centers to render".into()));
    }
    let base = suppress_background(i_orig, m_fg, config.bg_sigma)?;
    let pyramid = BlurPyramid::build(&base, config.sigma_max, config.pyramid_levels)?;
    fixations
        .centers
        .par_iter()
        .map(|c| pyramid.render(c.to_point(), config))
        .collect()
}

/// Mean squared 5-point Laplacian over a square window of the channel mean.
pub fn laplacian_energy(img: &Image, cx: usize, cy: usize, half: usize) -> f64 {
    let g = img.to_gray();
    let mut acc = 0.0;
    let mut n = 0usize;
    for y in cy - half..=cy + half {
        for x in cx - half..=cx + half {
            let lap = g.get(x - 1, y) + g.get(x + 1, y) + g.get(x, y - 1) + g.get(x, y + 1)
                - 4.0 * g.get(x, y);
            acc += lap * lap;
            n += 1;
        }
    }
    acc / n as f64
}
