//! Map file formats.
//!
//! Text: line 1 is `width height resolution origin_x origin_z`, followed by
//! `height` rows of `width` characters (`.` navigable, `#` blocked), row 0 at
//! minimum z. Blank lines and `;` comment lines after the header are skipped.
//!
//! PGM: binary P5 image; a sidecar `<file>.meta` holds one line
//! `resolution origin_x origin_z`. Pixels ≥ 128 are navigable and image row 0
//! is the minimum-z row, matching the text format.

use std::fmt::Write as _;
use std::path::Path;

use super::{MapError, OccupancyGrid};

fn parse_err(line: usize, message: impl Into<String>) -> MapError {
    MapError::Parse {
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> MapError {
    MapError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Loads a text map, or a P5 PGM with its `.meta` sidecar.
pub fn load_grid(path: &Path) -> Result<OccupancyGrid, MapError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(b"P5") {
        let mut meta = path.as_os_str().to_owned();
        meta.push(".meta");
        let meta = std::path::PathBuf::from(meta);
        let meta_text = std::fs::read_to_string(&meta).map_err(|e| io_err(&meta, e))?;
        return parse_pgm(&bytes, &meta_text);
    }
    let text = String::from_utf8(bytes).map_err(|_| parse_err(1, "map file is not UTF-8"))?;
    parse_grid_text(&text)
}

pub fn parse_grid_text(text: &str) -> Result<OccupancyGrid, MapError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty map file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(parse_err(
            1,
            format!("header needs `width height resolution origin_x origin_z`, got {} fields", fields.len()),
        ));
    }
    let width: usize = fields[0].parse().map_err(|_| parse_err(1, "bad width"))?;
    let height: usize = fields[1].parse().map_err(|_| parse_err(1, "bad height"))?;
    let nums: Vec<f64> = fields[2..]
        .iter()
        .map(|f| f.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(1, "bad resolution/origin"))?;

    let mut cells = Vec::with_capacity(width * height);
    let mut rows = 0usize;
    let mut last_line = 1;
    for (i, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        last_line = i + 1;
        if rows == height {
            return Err(parse_err(i + 1, format!("more than {height} rows")));
        }
        let mut n = 0usize;
        for ch in line.chars() {
            cells.push(match ch {
                '.' => true,
                '#' => false,
                other => return Err(parse_err(i + 1, format!("unknown cell token {other:?}"))),
            });
            n += 1;
        }
        if n != width {
            return Err(parse_err(i + 1, format!("row has {n} cells, expected {width}")));
        }
        rows += 1;
    }
    if rows != height {
        return Err(parse_err(last_line, format!("expected {height} rows, found {rows}")));
    }
    OccupancyGrid::new(width, height, nums[0], (nums[1], nums[2]), cells).map_err(|e| match e {
        MapError::InvalidGrid(m) => parse_err(1, m),
        other => other,
    })
}

pub fn write_grid_text(grid: &OccupancyGrid) -> String {
    let (ox, oz) = grid.origin();
    let mut out = format!(
        "{} {} {} {} {}\n",
        grid.width(),
        grid.height(),
        grid.resolution(),
        ox,
        oz
    );
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            out.push(if grid.is_cell_navigable(c, r) { '.' } else { '#' });
        }
        out.push('\n');
    }
    out
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn pgm_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn parse_pgm(bytes: &[u8], meta: &str) -> Result<OccupancyGrid, MapError> {
    let mut pos = 0;
    let magic = pgm_token(bytes, &mut pos);
    if magic.as_deref() != Some("P5") {
        return Err(parse_err(1, "not a binary PGM (P5)"));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        *slot = pgm_token(bytes, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(1, format!("bad PGM {name}")))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(1, format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < width * height {
        return Err(parse_err(
            1,
            format!("PGM raster has {} bytes, expected {}", raster.len(), width * height),
        ));
    }
    let cells = raster[..width * height].iter().map(|&p| p >= 128).collect();

    let meta_line = meta
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| parse_err(1, "empty PGM metadata"))?;
    let m: Vec<f64> = meta_line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(1, "bad PGM metadata number"))?;
    if m.len() != 3 {
        return Err(parse_err(1, "PGM metadata needs `resolution origin_x origin_z`"));
    }
    OccupancyGrid::new(width, height, m[0], (m[1], m[2]), cells)
}

/// Encodes a grid as P5 bytes plus its metadata line.
pub fn write_pgm(grid: &OccupancyGrid) -> (Vec<u8>, String) {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            out.push(if grid.is_cell_navigable(c, r) { 255 } else { 0 });
        }
    }
    let (ox, oz) = grid.origin();
    let mut meta = String::new();
    let _ = writeln!(meta, "{} {} {}", grid.resolution(), ox, oz);
    (out, meta)
}
