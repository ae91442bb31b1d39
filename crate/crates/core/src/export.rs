//! File artifacts: provenance headers and the PGM belief render.

use std::fmt::Write as _;

use crate::config::SimConfig;
use crate::stigmergy::StigmergyEntry;

/// Prefixes `body` with the commented config header.
pub fn with_header(config: &SimConfig, body: &str) -> String {
    let mut out = config.to_header();
    out.push_str(body);
    out
}

/// Grey level of an unvisited cell.
pub const UNVISITED: u8 = 255;

/// Grey level for a stored radiation value: 0 is black, 1 and above the
/// brightest visited shade (254).
pub fn shade(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 254.0).round() as u8
}

/// Plain (P2) PGM with one pixel per cell, north up. Comment lines from
/// `header` are placed right after the magic number.
pub fn render_pgm(
    entries: &[StigmergyEntry],
    width: u32,
    height: u32,
    header: Option<&str>,
) -> String {
    let (w, h) = (width as usize, height as usize);
    let mut pixels = vec![UNVISITED; w * h];
    for e in entries {
        let (x, y) = (e.key.x, e.key.y);
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            pixels[y as usize * w + x as usize] = shade(e.value);
        }
    }
    let mut out = String::from("P2\n");
    if let Some(header) = header {
        for line in header.lines() {
            let _ = writeln!(out, "#{}", line.trim_start_matches('#'));
        }
    }
    let _ = writeln!(out, "{w} {h}\n255");
    for row in (0..h).rev() {
        let line: Vec<String> = pixels[row * w..(row + 1) * w]
            .iter()
            .map(u8::to_string)
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a plain PGM back into `(width, height, pixels)` with row 0 at the top.
pub fn parse_pgm(text: &str) -> Option<(usize, usize, Vec<u8>)> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(str::split_whitespace);
    if tokens.next()? != "P2" {
        return None;
    }
    let w: usize = tokens.next()?.parse().ok()?;
    let h: usize = tokens.next()?.parse().ok()?;
    let _max: u32 = tokens.next()?.parse().ok()?;
    let px: Vec<u8> = tokens.map(|t| t.parse().ok()).collect::<Option<_>>()?;
    (px.len() == w * h).then_some((w, h, px))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::CellCoord;

    #[test]
    fn empty_map_is_white() {
        let (w, h, px) = parse_pgm(&render_pgm(&[], 4, 3, None)).unwrap();
        assert_eq!((w, h), (4, 3));
        assert!(px.iter().all(|p| *p == UNVISITED));
    }

    #[test]
    fn zero_value_is_one_black_pixel() {
        let e = StigmergyEntry {
            key: CellCoord::new(1, 0),
            value: 0.0,
            lamport: 1,
            writer_id: 0,
        };
        let (_, _, px) = parse_pgm(&render_pgm(&[e], 3, 2, Some("# a=1\n"))).unwrap();
        // y=0 is the bottom row
        assert_eq!(px, vec![255, 255, 255, 255, 0, 255]);
    }

    #[test]
    fn shading_is_monotone_and_capped() {
        assert_eq!(shade(0.0), 0);
        assert_eq!(shade(1.0), 254);
        assert_eq!(shade(3.0), 254);
        assert!(shade(0.2) < shade(0.4));
    }
}
