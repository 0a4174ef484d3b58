//! Text and PPM renderings of planar configurations.

use std::io::Write;

use super::{CellState, Configuration};
use crate::error::{Error, Result};
use crate::lattice::Site;

pub const RED_RGB: [u8; 3] = [220, 40, 40];
pub const BLUE_RGB: [u8; 3] = [40, 40, 220];
pub const EMPTY_RGB: [u8; 3] = [255, 255, 255];

fn planar_window(c: &Configuration, half: i64) -> Result<()> {
    if c.topology().dim() != 2 {
        return Err(Error::domain("snapshots need a planar configuration"));
    }
    if half < 0 {
        return Err(Error::domain("negative window"));
    }
    Ok(())
}

/// Rows from `y = half` down to `-half`, one char per site: `.`, `R`, `B`.
/// Sites outside the graph are drawn empty.
pub fn text_grid(c: &Configuration, half: i64) -> Result<String> {
    planar_window(c, half)?;
    let mut out = String::new();
    for y in (-half..=half).rev() {
        for x in -half..=half {
            out.push(match c.state_at(&Site::from([x, y])) {
                Some(CellState::Red) => 'R',
                Some(CellState::Blue) => 'B',
                _ => '.',
            });
        }
        out.push('\n');
    }
    Ok(out)
}

/// Binary PPM (P6) of the window `[-half, half]^2`, origin at the centre.
pub fn write_ppm<W: Write>(c: &Configuration, half: i64, mut w: W) -> Result<()> {
    planar_window(c, half)?;
    let side = 2 * half + 1;
    write!(w, "P6\n{side} {side}\n255\n")?;
    let mut row = Vec::with_capacity(3 * side as usize);
    for y in (-half..=half).rev() {
        row.clear();
        for x in -half..=half {
            row.extend_from_slice(match c.state_at(&Site::from([x, y])) {
                Some(CellState::Red) => &RED_RGB,
                Some(CellState::Blue) => &BLUE_RGB,
                _ => &EMPTY_RGB,
            });
        }
        w.write_all(&row)?;
    }
    Ok(())
}
