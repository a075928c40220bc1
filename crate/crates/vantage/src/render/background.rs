//! Procedural backgrounds for the appearance-augmented split. Each named
//! background pairs a caption phrase with a deterministic painter.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundStyle {
    Flat([u8; 3]),
    HStripes([u8; 3], [u8; 3], usize),
    Checker([u8; 3], [u8; 3], usize),
    VGradient([u8; 3], [u8; 3]),
    Radial([u8; 3], [u8; 3]),
}

#[derive(Debug, Clone, Copy)]
pub struct NamedBackground {
    pub name: &'static str,
    pub phrase: &'static [&'static str],
    pub style: BackgroundStyle,
}

pub const NAMED_BACKGROUNDS: [NamedBackground; 8] = [
    NamedBackground {
        name: "flatgray",
        phrase: &["on", "a", "flat", "gray", "background"],
        style: BackgroundStyle::Flat([120, 120, 120]),
    },
    NamedBackground {
        name: "flatnavy",
        phrase: &["on", "a", "flat", "navy", "background"],
        style: BackgroundStyle::Flat([28, 34, 84]),
    },
    NamedBackground {
        name: "warmstripes",
        phrase: &["on", "warm", "stripes"],
        style: BackgroundStyle::HStripes([214, 106, 50], [240, 196, 120], 6),
    },
    NamedBackground {
        name: "coolstripes",
        phrase: &["on", "cool", "stripes"],
        style: BackgroundStyle::HStripes([60, 120, 190], [150, 200, 230], 6),
    },
    NamedBackground {
        name: "greenchecker",
        phrase: &["on", "a", "green", "checker", "field"],
        style: BackgroundStyle::Checker([40, 140, 60], [180, 220, 150], 5),
    },
    NamedBackground {
        name: "sunsetgradient",
        phrase: &["under", "a", "sunset", "gradient"],
        style: BackgroundStyle::VGradient([250, 180, 90], [90, 40, 110]),
    },
    NamedBackground {
        name: "darkglow",
        phrase: &["in", "a", "dark", "radial", "glow"],
        style: BackgroundStyle::Radial([90, 90, 110], [15, 15, 25]),
    },
    NamedBackground {
        name: "lightglow",
        phrase: &["in", "a", "light", "radial", "glow"],
        style: BackgroundStyle::Radial([245, 245, 230], [160, 160, 170]),
    },
];

pub fn background_by_name(name: &str) -> Result<&'static NamedBackground> {
    NAMED_BACKGROUNDS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::config(format!("unknown background {name:?}")))
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (a[c] as f64 + (b[c] as f64 - a[c] as f64) * t)
            .round()
            .clamp(0.0, 255.0) as u8;
    }
    out
}

pub fn paint(style: &BackgroundStyle, x: usize, y: usize, w: usize, h: usize) -> [u8; 3] {
    match style {
        BackgroundStyle::Flat(c) => *c,
        BackgroundStyle::HStripes(a, b, period) => {
            if (y / period) % 2 == 0 {
                *a
            } else {
                *b
            }
        }
        BackgroundStyle::Checker(a, b, cell) => {
            if (x / cell + y / cell) % 2 == 0 {
                *a
            } else {
                *b
            }
        }
        BackgroundStyle::VGradient(top, bottom) => {
            let t = y as f64 / (h.saturating_sub(1).max(1)) as f64;
            lerp(*top, *bottom, t)
        }
        BackgroundStyle::Radial(center, edge) => {
            let cx = (w as f64 - 1.0) / 2.0;
            let cy = (h as f64 - 1.0) / 2.0;
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let r = (dx * dx + dy * dy).sqrt() / (cx.max(cy)).max(1.0);
            lerp(*center, *edge, r.min(1.0))
        }
    }
}
