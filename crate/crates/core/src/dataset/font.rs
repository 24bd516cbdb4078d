use serde::{Deserialize, Serialize};

use super::glyphs::{rasterize, skeleton, Point, GLYPH_HEIGHT, GLYPH_WIDTH};
use super::{round_half_away, DatasetError, Result, WordImage, INK, PAPER};

/// Columns between adjacent glyphs.
pub const GAP: usize = 2;
/// Background border on every side of a word.
pub const MARGIN: usize = 4;
pub const MAX_DILATION: u8 = 2;
pub const MAX_SHEAR: f64 = 0.4;

const JITTER: f64 = 0.75;
const SERIF_HALF: f64 = 2.0;

/// Style transforms applied to the base skeleton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FontStyle {
    /// Disk dilation radius in pixels, `0..=2`.
    pub dilation: u8,
    /// Horizontal slant in columns per row, `|shear| <= 0.4`.
    pub shear: f64,
    pub outline: bool,
    pub serif: bool,
    /// Zero keeps the skeleton exact; anything else perturbs its vertices.
    pub seed: u64,
}

impl FontStyle {
    pub const PLAIN: FontStyle = FontStyle {
        dilation: 0,
        shear: 0.0,
        outline: false,
        serif: false,
        seed: 0,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FontSpec {
    pub id: usize,
    pub name: String,
    #[serde(flatten)]
    pub style: FontStyle,
}

/// Validate a style and bind it to a font id.
pub fn make_procedural_font(id: usize, name: impl Into<String>, style: FontStyle) -> Result<FontSpec> {
    if style.dilation > MAX_DILATION {
        return Err(DatasetError::StyleOutOfRange {
            field: "dilation",
            value: style.dilation.to_string(),
        });
    }
    if !style.shear.is_finite() || style.shear.abs() > MAX_SHEAR {
        return Err(DatasetError::StyleOutOfRange {
            field: "shear",
            value: style.shear.to_string(),
        });
    }
    Ok(FontSpec {
        id,
        name: name.into(),
        style,
    })
}

/// Ten fonts named after a familiar roster. Font 0 is the plain source face.
pub fn default_catalog() -> Vec<FontSpec> {
    let style = |dilation, shear, outline, serif, seed| FontStyle {
        dilation,
        shear,
        outline,
        serif,
        seed,
    };
    [
        ("Arial", style(0, 0.0, false, false, 0)),
        ("Algerian", style(0, 0.0, true, true, 0)),
        ("Arial Black", style(2, 0.0, false, false, 0)),
        ("Bauhaus", style(1, 0.0, false, false, 31)),
        ("Bookman", style(1, 0.0, false, true, 0)),
        ("Forte", style(1, 0.3, false, false, 57)),
        ("Magneto", style(2, 0.4, false, false, 83)),
        ("Ravie", style(1, 0.0, true, false, 97)),
        ("Times New Roman", style(0, 0.0, false, true, 0)),
        ("Times Black", style(2, 0.0, false, true, 0)),
    ]
    .into_iter()
    .enumerate()
    .map(|(id, (name, style))| make_procedural_font(id, name, style).expect("catalog styles are in range"))
    .collect()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Offset in `[-JITTER, JITTER]` keyed on the vertex position, so vertices
/// shared between strokes move together.
fn jitter(seed: u64, letter: char, p: Point, axis: u64) -> f64 {
    let key = splitmix(seed ^ splitmix(letter as u64 ^ splitmix(p.0.to_bits() ^ splitmix(p.1.to_bits() ^ axis))));
    let unit = (key >> 11) as f64 / (1u64 << 53) as f64;
    (2.0 * unit - 1.0) * JITTER
}

fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return mask.to_vec();
    }
    let r = r as isize;
    let mut out = vec![false; mask.len()];
    for y in 0..h as isize {
        for x in 0..w as isize {
            'search: for dy in -r..=r {
                for dx in -r..=r {
                    if dx * dx + dy * dy > r * r {
                        continue;
                    }
                    let (sx, sy) = (x + dx, y + dy);
                    if sx >= 0
                        && sy >= 0
                        && (sx as usize) < w
                        && (sy as usize) < h
                        && mask[sy as usize * w + sx as usize]
                    {
                        out[y as usize * w + x as usize] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

/// A styled glyph bitmap.
#[derive(Clone, Debug, PartialEq)]
pub struct Glyph {
    pub width: usize,
    pub height: usize,
    pub ink: Vec<bool>,
}

impl FontSpec {
    fn pads(&self) -> (usize, usize) {
        let pad = self.style.dilation as usize + usize::from(self.style.outline);
        let serif = if self.style.serif { SERIF_HALF as usize } else { 0 };
        (pad + serif, pad)
    }

    fn shear_extra(&self) -> usize {
        round_half_away(self.style.shear.abs() * (self.glyph_height() - 1) as f64) as usize
    }

    pub fn glyph_height(&self) -> usize {
        GLYPH_HEIGHT + 2 * self.pads().1
    }

    /// Height of every rendered word before resizing.
    pub fn line_height(&self) -> usize {
        self.glyph_height() + 2 * MARGIN
    }

    pub fn glyph(&self, letter: char) -> Option<Glyph> {
        let mut strokes = skeleton(letter)?;
        let s = &self.style;
        if s.seed != 0 {
            for p in strokes.iter_mut().flatten() {
                *p = (p.0 + jitter(s.seed, letter, *p, 0), p.1 + jitter(s.seed, letter, *p, 1));
            }
        }
        if s.serif {
            let mut bars = Vec::new();
            for line in &strokes {
                for end in [line[0], line[line.len() - 1]] {
                    if end.1 <= 2.5 || end.1 >= GLYPH_HEIGHT as f64 - 2.5 {
                        bars.push(vec![(end.0 - SERIF_HALF, end.1), (end.0 + SERIF_HALF, end.1)]);
                    }
                }
            }
            strokes.extend(bars);
        }
        let (pad_x, pad_y) = self.pads();
        for p in strokes.iter_mut().flatten() {
            *p = (p.0 + pad_x as f64, p.1 + pad_y as f64);
        }
        let (w, h) = (GLYPH_WIDTH + 2 * pad_x, GLYPH_HEIGHT + 2 * pad_y);
        let mut ink = rasterize(&strokes, w, h);
        ink = dilate(&ink, w, h, s.dilation as usize);
        if s.outline {
            let grown = dilate(&ink, w, h, 1);
            ink = grown.iter().zip(&ink).map(|(&g, &b)| g && !b).collect();
        }
        let extra = self.shear_extra();
        if extra == 0 {
            return Some(Glyph {
                width: w,
                height: h,
                ink,
            });
        }
        let sw = w + extra;
        let mut sheared = vec![false; sw * h];
        for y in 0..h {
            let shift = round_half_away(s.shear * (h - 1 - y) as f64) as isize;
            let base = if s.shear < 0.0 { extra as isize } else { 0 };
            for x in 0..w {
                if ink[y * w + x] {
                    sheared[y * sw + (x as isize + shift + base) as usize] = true;
                }
            }
        }
        Some(Glyph {
            width: sw,
            height: h,
            ink: sheared,
        })
    }

    /// Composite a word left to right with [`GAP`] columns between glyphs and
    /// a [`MARGIN`] on every side.
    pub fn render_word(&self, word: &str) -> Result<WordImage> {
        if word.is_empty() {
            return Err(DatasetError::EmptyWord);
        }
        let mut glyphs = Vec::with_capacity(word.len());
        for ch in word.chars() {
            match self.glyph(ch) {
                Some(g) => glyphs.push(g),
                None => {
                    return Err(DatasetError::UnsupportedCharacter {
                        word: word.to_string(),
                        ch,
                    })
                }
            }
        }
        let width = glyphs.iter().map(|g| g.width).sum::<usize>() + GAP * (glyphs.len() - 1) + 2 * MARGIN;
        let height = self.line_height();
        let mut img = WordImage::filled(height, width, PAPER);
        let mut x0 = MARGIN;
        for g in &glyphs {
            for y in 0..g.height {
                for x in 0..g.width {
                    if g.ink[y * g.width + x] {
                        img.set(MARGIN + y, x0 + x, INK);
                    }
                }
            }
            x0 += g.width + GAP;
        }
        Ok(img)
    }
}
