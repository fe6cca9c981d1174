//! Minimal dependency-free scatter plots rendered straight into PNG pixels:
//! PSNR on the horizontal axis, FID on the vertical axis, one marker style
//! per curve, with a tiny built-in 5x7 bitmap font for labels.

use std::path::Path;

use crate::error::Result;
use crate::metrics::TradeoffRow;

const W: usize = 640;
const H: usize = 480;
const MARGIN: usize = 60;

struct Canvas {
    px: Vec<[u8; 3]>,
}

impl Canvas {
    fn new() -> Self {
        Self {
            px: vec![[255, 255, 255]; W * H],
        }
    }

    fn set(&mut self, x: isize, y: isize, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < W && (y as usize) < H {
            self.px[y as usize * W + x as usize] = c;
        }
    }

    fn hline(&mut self, y: isize, x0: isize, x1: isize, c: [u8; 3]) {
        for x in x0.min(x1)..=x0.max(x1) {
            self.set(x, y, c);
        }
    }

    fn vline(&mut self, x: isize, y0: isize, y1: isize, c: [u8; 3]) {
        for y in y0.min(y1)..=y0.max(y1) {
            self.set(x, y, c);
        }
    }

    /// Filled square marker.
    fn square(&mut self, x: isize, y: isize, r: isize, c: [u8; 3]) {
        for dy in -r..=r {
            for dx in -r..=r {
                self.set(x + dx, y + dy, c);
            }
        }
    }

    /// Plus marker.
    fn plus(&mut self, x: isize, y: isize, r: isize, c: [u8; 3]) {
        for d in -r..=r {
            self.set(x + d, y, c);
            self.set(x, y + d, c);
        }
    }

    fn text(&mut self, x: isize, y: isize, s: &str, c: [u8; 3]) {
        let mut cx = x;
        for ch in s.chars() {
            draw_glyph(self, cx, y, ch, c);
            cx += 6;
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut buf = image::RgbImage::new(W as u32, H as u32);
        for (i, p) in self.px.iter().enumerate() {
            buf.put_pixel((i % W) as u32, (i / W) as u32, image::Rgb(*p));
        }
        buf.save(path)
            .map_err(|e| crate::error::Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }
}

/// 5x7 glyphs, one u64 bitmask per character, row-major from the top.
fn glyph_rows(ch: char) -> [u8; 7] {
    match ch.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        _ => [0; 7],
    }
}

fn draw_glyph(canvas: &mut Canvas, x: isize, y: isize, ch: char, c: [u8; 3]) {
    let rows = glyph_rows(ch);
    for (r, bits) in rows.iter().enumerate() {
        for col in 0..5 {
            if bits & (0x10 >> col) != 0 {
                canvas.set(x + col as isize, y + r as isize, c);
            }
        }
    }
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi - lo).is_finite() || hi <= lo {
        return (lo - 0.5, lo + 0.5);
    }
    let pad = 0.08 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Render both tradeoff curves (sigma_z as squares, N as plus markers) to a
/// PNG: PSNR horizontal, FID vertical.
pub fn tradeoff_scatter(rows: &[TradeoffRow], path: &Path) -> Result<()> {
    let finite: Vec<&TradeoffRow> = rows.iter().filter(|r| r.psnr.is_finite()).collect();
    let (mut px0, mut px1) = (f64::MAX, f64::MIN);
    let (mut py0, mut py1) = (f64::MAX, f64::MIN);
    for r in &finite {
        px0 = px0.min(r.psnr);
        px1 = px1.max(r.psnr);
        py0 = py0.min(r.fid_mean);
        py1 = py1.max(r.fid_mean);
    }
    let (px0, px1) = nice_range(px0, px1);
    let (py0, py1) = nice_range(py0, py1);
    let to_x = |v: f64| (MARGIN as f64 + (v - px0) / (px1 - px0) * (W - 2 * MARGIN) as f64) as isize;
    let to_y = |v: f64| ((H - MARGIN) as f64 - (v - py0) / (py1 - py0) * (H - 2 * MARGIN) as f64) as isize;

    let mut canvas = Canvas::new();
    let black = [0, 0, 0];
    let blue = [30, 60, 200];
    let red = [200, 40, 40];
    // Axes.
    canvas.hline((H - MARGIN) as isize, MARGIN as isize, (W - MARGIN) as isize, black);
    canvas.vline(MARGIN as isize, MARGIN as isize, (H - MARGIN) as isize, black);
    // Ticks with numeric labels.
    for i in 0..=4 {
        let vx = px0 + (px1 - px0) * i as f64 / 4.0;
        let x = to_x(vx);
        canvas.vline(x, (H - MARGIN) as isize, (H - MARGIN + 4) as isize, black);
        canvas.text(x - 12, (H - MARGIN + 8) as isize, &format!("{vx:.1}"), black);
        let vy = py0 + (py1 - py0) * i as f64 / 4.0;
        let y = to_y(vy);
        canvas.hline(y, (MARGIN - 4) as isize, MARGIN as isize, black);
        canvas.text(8, y - 3, &format!("{vy:.1}"), black);
    }
    canvas.text((W / 2 - 12) as isize, (H - 20) as isize, "PSNR", black);
    canvas.text(8, 20, "FID", black);
    // Legend.
    canvas.square((W - MARGIN - 120) as isize, 24, 3, blue);
    canvas.text((W - MARGIN - 110) as isize, 20, "SIGMA_Z", black);
    canvas.plus((W - MARGIN - 120) as isize, 40, 3, red);
    canvas.text((W - MARGIN - 110) as isize, 36, "N", black);
    // Points.
    for r in &finite {
        let (x, y) = (to_x(r.psnr), to_y(r.fid_mean));
        if r.mode == "sigma_z" {
            canvas.square(x, y, 3, blue);
        } else {
            canvas.plus(x, y, 3, red);
        }
    }
    canvas.save(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<TradeoffRow> {
        let mut out = Vec::new();
        for (i, &k) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            out.push(TradeoffRow {
                mode: "sigma_z".into(),
                knob: k,
                psnr: 30.0 - i as f64,
                fid_mean: 5.0 - i as f64 * 0.8,
                fid_std: 0.1,
            });
        }
        for (i, &n) in [1usize, 2, 4, 8, 16, 32, 64].iter().enumerate() {
            out.push(TradeoffRow {
                mode: "n".into(),
                knob: n as f64,
                psnr: 26.0 + i as f64 * 0.5,
                fid_mean: 1.0 + i as f64 * 0.6,
                fid_std: 0.1,
            });
        }
        out
    }

    #[test]
    fn scatter_writes_decodable_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tradeoff.png");
        tradeoff_scatter(&rows(), &p).unwrap();
        let img = image::open(&p).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (640, 480));
        // Something non-white was drawn.
        assert!(img.pixels().any(|p| p.0 != [255, 255, 255]));
    }

    #[test]
    fn scatter_handles_infinite_psnr() {
        let mut r = rows();
        r[0].psnr = f64::INFINITY;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("inf.png");
        tradeoff_scatter(&r, &p).unwrap();
        assert!(p.exists());
    }
}
