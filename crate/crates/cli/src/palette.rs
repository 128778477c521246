//! Fixed colours for label PNGs, indexed by class id.

/// RGB per class id 0..=10; every vocabulary indexes the same table.
pub const CLASS_COLORS: [[u8; 3]; 11] = [
    [0, 0, 0],
    [204, 153, 102],
    [102, 51, 0],
    [0, 128, 0],
    [128, 128, 0],
    [0, 0, 255],
    [0, 255, 255],
    [255, 255, 0],
    [255, 0, 0],
    [128, 0, 128],
    [255, 0, 255],
];

/// Colour of the ignore id (255).
pub const IGNORE_COLOR: [u8; 3] = [255, 255, 255];

/// Full 256-entry PLTE payload.
pub fn palette_bytes() -> Vec<u8> {
    let mut out = vec![0u8; 256 * 3];
    for (i, c) in CLASS_COLORS.iter().enumerate() {
        out[i * 3..i * 3 + 3].copy_from_slice(c);
    }
    out[255 * 3..].copy_from_slice(&IGNORE_COLOR);
    out
}
