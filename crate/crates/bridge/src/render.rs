//! Deterministic stand-in screenshots for the fixture driver.

use breakscan_common::sha256_hex;

pub const VIEWPORT: (u32, u32) = (64, 48);
pub const REGION: (u32, u32) = (32, 24);

/// Renders an RGB PNG whose 8x8 blocks are colored from the SHA-256 of
/// `content`, so equal content yields byte-identical images.
pub fn render_png(content: &str, (width, height): (u32, u32)) -> Vec<u8> {
    let digest = sha256_hex(content.as_bytes());
    let bytes: Vec<u8> = (0..digest.len() / 2)
        .map(|i| u8::from_str_radix(&digest[2 * i..2 * i + 2], 16).unwrap_or(0))
        .collect();
    let mut pixels = Vec::with_capacity((width * height * 3) as usize);
    for y in 0..height {
        for x in 0..width {
            let block = ((y / 8) * (width / 8) + x / 8) as usize;
            let b = bytes[block % bytes.len()];
            pixels.extend_from_slice(&[b, b.rotate_left(3), 255 - b]);
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("png header");
        w.write_image_data(&pixels).expect("png data");
    }
    out
}
