//! Prediction-map rendering: one pixel per grid cell, binary PPM (P6)
//! output for bit-exact reproducibility.

use std::io::Write;

use crate::CliError;

/// Fixed class palette (RGB). The first three follow the usual land-cover
/// convention of blue / light blue / green.
pub const PALETTE: [(u8, u8, u8); 8] = [
    (0, 0, 255),     // 0 blue
    (120, 180, 255), // 1 light blue
    (0, 150, 0),     // 2 green
    (200, 0, 0),     // 3 red
    (255, 140, 0),   // 4 orange
    (250, 220, 40),  // 5 yellow
    (190, 0, 190),   // 6 magenta
    (128, 128, 128), // 7 gray
];

/// Writes a label grid as a P6 image, palette-mapped. Rows must be
/// rectangular and labels must fit the palette.
pub fn render_prediction_map<W: Write>(grid: &[Vec<usize>], out: &mut W) -> Result<(), CliError> {
    if grid.is_empty() || grid[0].is_empty() {
        return Err(CliError::Data("prediction grid is empty".into()));
    }
    let width = grid[0].len();
    for (r, row) in grid.iter().enumerate() {
        if row.len() != width {
            return Err(CliError::Data(format!(
                "grid row {r} has {} cells, expected {width}",
                row.len()
            )));
        }
        if let Some(&bad) = row.iter().find(|&&l| l >= PALETTE.len()) {
            return Err(CliError::Data(format!(
                "label {bad} outside the {}-color palette",
                PALETTE.len()
            )));
        }
    }
    let mut bytes = Vec::with_capacity(grid.len() * width * 3);
    for row in grid {
        for &label in row {
            let (r, g, b) = PALETTE[label];
            bytes.extend_from_slice(&[r, g, b]);
        }
    }
    write!(out, "P6\n{} {}\n255\n", width, grid.len())
        .and_then(|()| out.write_all(&bytes))
        .map_err(|e| CliError::Data(format!("image write failed: {e}")))
}

/// Parses a label grid from CSV text: one row per line, comma-separated
/// non-negative integers.
pub fn parse_label_grid(text: &str) -> Result<Vec<Vec<usize>>, CliError> {
    let mut grid = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<usize>, _> = line.split(',').map(|f| f.trim().parse()).collect();
        grid.push(row.map_err(|e| CliError::Data(format!("grid line {}: {e}", i + 1)))?);
    }
    if grid.is_empty() {
        return Err(CliError::Data("prediction grid is empty".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel() {
        let mut out = Vec::new();
        render_prediction_map(&[vec![0]], &mut out).unwrap();
        assert_eq!(&out, b"P6\n1 1\n255\n\x00\x00\xff");
    }

    #[test]
    fn checkerboard_pattern() {
        let mut out = Vec::new();
        render_prediction_map(&[vec![0, 1], vec![1, 0]], &mut out).unwrap();
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&out[..header.len()], header);
        let px = &out[header.len()..];
        assert_eq!(&px[0..3], &[0, 0, 255]);
        assert_eq!(&px[3..6], &[120, 180, 255]);
        assert_eq!(&px[6..9], &[120, 180, 255]);
        assert_eq!(&px[9..12], &[0, 0, 255]);
    }

    #[test]
    fn deterministic_bytes() {
        let grid = vec![vec![2, 3, 4], vec![5, 6, 7]];
        let mut a = Vec::new();
        let mut b = Vec::new();
        render_prediction_map(&grid, &mut a).unwrap();
        render_prediction_map(&grid, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_outside_palette_is_error() {
        let mut out = Vec::new();
        assert!(render_prediction_map(&[vec![8]], &mut out).is_err());
    }

    #[test]
    fn ragged_grid_is_error() {
        let mut out = Vec::new();
        assert!(render_prediction_map(&[vec![0, 1], vec![0]], &mut out).is_err());
    }

    #[test]
    fn grid_parsing() {
        let grid = parse_label_grid("0,1,2\n3,4,5\n").unwrap();
        assert_eq!(grid, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert!(parse_label_grid("0,x\n").is_err());
        assert!(parse_label_grid("").is_err());
    }
}
