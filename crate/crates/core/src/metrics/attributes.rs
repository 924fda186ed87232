//! Analytic factor read-out for toy-style images, used to score samples
//! and factor swaps without a learned classifier.

use crate::data::{
    background_color, object_center, object_color, object_mask, Factors, Shape, CARDINALITIES,
    IMAGE_SIZE, NUM_FACTORS, PIXELS,
};

use super::MetricsError;

#[derive(Clone, Debug)]
struct Template {
    shape: usize,
    scale: usize,
    count: f64,
    fill: f64,
    /// Mask centroid minus nominal object centre.
    offset: (f64, f64),
}

fn mask_stats(mask: &[bool]) -> Option<(f64, f64, (f64, f64))> {
    let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for py in 0..IMAGE_SIZE {
        for px in 0..IMAGE_SIZE {
            if mask[py * IMAGE_SIZE + px] {
                n += 1;
                x0 = x0.min(px);
                x1 = x1.max(px);
                y0 = y0.min(py);
                y1 = y1.max(py);
                sx += px as f64 + 0.5;
                sy += py as f64 + 0.5;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let area = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
    Some((n as f64, n as f64 / area, (sx / n as f64, sy / n as f64)))
}

fn templates() -> &'static [Template] {
    static CELL: std::sync::OnceLock<Vec<Template>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        for (shape, kind) in Shape::ALL.iter().enumerate() {
            for scale in 0..CARDINALITIES[1] {
                let mask = object_mask(*kind, scale, 3, 3);
                let (count, fill, (mx, my)) = mask_stats(&mask).expect("non-empty template");
                let (cx, cy) = object_center(3, 3);
                out.push(Template {
                    shape,
                    scale,
                    count,
                    fill,
                    offset: (mx - cx, my - cy),
                });
            }
        }
        out
    })
}

fn dist2(a: &[f64], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(color: &[f64], palette: &[[f64; 3]]) -> (usize, f64) {
    palette
        .iter()
        .enumerate()
        .map(|(i, c)| (i, dist2(color, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Reads all six factors off an image.
///
/// A pixel belongs to the object when its colour is closer to some object
/// colour than to every background colour. Hue and background are the
/// palette entries nearest to the mean object and background colours.
/// Shape and scale come from the nearest rendered template in (pixel count,
/// bounding-box fill ratio); position is the template-corrected mask
/// centroid snapped to the 8×8 grid.
pub fn extract_attributes(image: &[f64]) -> Result<Factors, MetricsError> {
    if image.len() != PIXELS {
        return Err(MetricsError::ImageSize(image.len()));
    }
    let objects: Vec<[f64; 3]> = (0..CARDINALITIES[4]).map(object_color).collect();
    let backgrounds: Vec<[f64; 3]> = (0..CARDINALITIES[5]).map(background_color).collect();

    let mut mask = vec![false; IMAGE_SIZE * IMAGE_SIZE];
    let (mut fg_sum, mut bg_sum) = ([0.0; 3], [0.0; 3]);
    let (mut fg_n, mut bg_n) = (0usize, 0usize);
    for (p, px) in image.chunks_exact(3).enumerate() {
        let inside = nearest(px, &objects).1 < nearest(px, &backgrounds).1;
        mask[p] = inside;
        let (sum, n) = if inside {
            (&mut fg_sum, &mut fg_n)
        } else {
            (&mut bg_sum, &mut bg_n)
        };
        sum.iter_mut().zip(px).for_each(|(s, v)| *s += v);
        *n += 1;
    }
    let (count, fill, (mx, my)) = mask_stats(&mask).ok_or(MetricsError::NoObject)?;

    let hue = nearest(&fg_sum.map(|s| s / fg_n as f64), &objects).0;
    let bg = if bg_n == 0 {
        0
    } else {
        nearest(&bg_sum.map(|s| s / bg_n as f64), &backgrounds).0
    };

    let template = templates()
        .iter()
        .min_by(|a, b| {
            let score = |t: &Template| {
                let dc = (count - t.count) / t.count;
                let df = (fill - t.fill) / 0.1;
                dc * dc + df * df
            };
            score(a).partial_cmp(&score(b)).expect("finite score")
        })
        .expect("templates exist");

    let (x0, y0) = object_center(0, 0);
    let snap = |c: f64, off: f64, origin: f64, card: usize| -> usize {
        ((c - off - origin) / 3.0).round().clamp(0.0, (card - 1) as f64) as usize
    };
    let x = snap(mx, template.offset.0, x0, CARDINALITIES[2]);
    let y = snap(my, template.offset.1, y0, CARDINALITIES[3]);

    let factors: [usize; NUM_FACTORS] = [template.shape, template.scale, x, y, hue, bg];
    Ok(Factors(factors))
}
