//! Box and id overlays on blank or supplied frames.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use image::{Rgb, RgbImage};
use lgtrack::TrackRow;

/// 3x5 digit glyphs, one row per entry, high bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

const SCALE: i64 = 2;
const THICKNESS: i64 = 2;

pub fn id_color(id: u64) -> Rgb<u8> {
    // golden-ratio hue walk, fixed saturation and value
    let hue = (id as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let c = |v: f64| (55.0 + 200.0 * v) as u8;
    Rgb([c(r), c(g), c(b)])
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn fill(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    for y in y0..y1 {
        for x in x0..x1 {
            put(img, x, y, color);
        }
    }
}

pub fn draw_box(img: &mut RgbImage, row: &TrackRow, color: Rgb<u8>) {
    let b = row.bbox;
    let (x0, y0) = (b.x.round() as i64, b.y.round() as i64);
    let (x1, y1) = (b.right().round() as i64, b.bottom().round() as i64);
    fill(img, x0, y0, x1, y0 + THICKNESS, color);
    fill(img, x0, y1 - THICKNESS, x1, y1, color);
    fill(img, x0, y0, x0 + THICKNESS, y1, color);
    fill(img, x1 - THICKNESS, y0, x1, y1, color);
}

pub fn draw_number(img: &mut RgbImage, x: i64, y: i64, n: u64, color: Rgb<u8>) {
    let text = n.to_string();
    let advance = 4 * SCALE;
    // backing plate
    fill(img, x, y, x + advance * text.len() as i64 + SCALE, y + 6 * SCALE + SCALE, Rgb([0, 0, 0]));
    for (k, ch) in text.bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        let gx = x + SCALE + advance * k as i64;
        for (r, bits) in glyph.iter().enumerate() {
            for c in 0..3 {
                if bits & (0b100 >> c) != 0 {
                    let px = gx + c * SCALE;
                    let py = y + SCALE + r as i64 * SCALE;
                    fill(img, px, py, px + SCALE, py + SCALE, color);
                }
            }
        }
    }
}

fn background(frames: Option<&Path>, frame: u32, width: u32, height: u32) -> Result<RgbImage> {
    if let Some(dir) = frames {
        for ext in ["png", "jpg", "jpeg"] {
            let p = dir.join(format!("{frame:06}.{ext}"));
            if p.exists() {
                let img = image::open(&p).with_context(|| format!("reading {}", p.display()))?;
                return Ok(img.to_rgb8());
            }
        }
    }
    Ok(RgbImage::from_pixel(width, height, Rgb([24, 24, 24])))
}

/// Writes one `{frame:06}.png` per frame from 1 to the last result frame.
/// Frames missing from `frames` fall back to a blank canvas.
pub fn render(rows: &[TrackRow], out_dir: &Path, frames: Option<&Path>, width: u32, height: u32) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut by_frame: BTreeMap<u32, Vec<&TrackRow>> = BTreeMap::new();
    for r in rows {
        by_frame.entry(r.frame).or_default().push(r);
    }
    let last = by_frame.keys().next_back().copied().unwrap_or(0);
    let mut written = Vec::new();
    for frame in 1..=last {
        let mut img = background(frames, frame, width, height)?;
        let mut tracks = by_frame.remove(&frame).unwrap_or_default();
        tracks.sort_by_key(|r| r.id);
        for r in tracks {
            let color = id_color(r.id);
            draw_box(&mut img, r, color);
            draw_number(&mut img, r.bbox.x.round() as i64, r.bbox.y.round() as i64 - 7 * SCALE, r.id, color);
        }
        let path = out_dir.join(format!("{frame:06}.png"));
        img.save(&path).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
