use fmst_core::features::Frame;
use fmst_core::Rect;

/// Draws a 2 px outline of `rect`, clipped to the frame.
pub fn draw_rect(frame: &mut Frame, rect: &Rect, color: [u8; 3]) {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let x0 = rect.left().round() as i64;
    let x1 = rect.right().round() as i64 - 1;
    let y0 = rect.top().round() as i64;
    let y1 = rect.bottom().round() as i64 - 1;
    let px = frame.pixels_mut();
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            let i = ((y * w + x) * 3) as usize;
            px[i..i + 3].copy_from_slice(&color);
        }
    };
    for t in 0..2 {
        for x in x0..=x1 {
            put(x, y0 + t);
            put(x, y1 - t);
        }
        for y in y0..=y1 {
            put(x0 + t, y);
            put(x1 - t, y);
        }
    }
}
