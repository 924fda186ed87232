//! Procedural toy scenes: one flat-coloured object on a flat background.

use super::DataError;

pub const IMAGE_SIZE: usize = 32;
pub const CHANNELS: usize = 3;
pub const PIXELS: usize = IMAGE_SIZE * IMAGE_SIZE * CHANNELS;

/// Number of values each generative factor takes, in factor order
/// (shape, scale, x, y, object hue, background hue).
pub const CARDINALITIES: [usize; 6] = [3, 4, 8, 8, 6, 4];
pub const NUM_FACTORS: usize = CARDINALITIES.len();
pub const FACTOR_NAMES: [&str; NUM_FACTORS] = ["shape", "scale", "x", "y", "hue", "bg"];
pub const NUM_SCENES: usize = 3 * 4 * 8 * 8 * 6 * 4;

pub const SHAPE: usize = 0;
pub const SCALE: usize = 1;
pub const POS_X: usize = 2;
pub const POS_Y: usize = 3;
pub const HUE: usize = 4;
pub const BACKGROUND: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Square,
    Disc,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Disc, Shape::Triangle];

    pub fn from_index(i: usize) -> Option<Shape> {
        Self::ALL.get(i).copied()
    }
}

/// Ground-truth factor indices of one scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Factors(pub [usize; NUM_FACTORS]);

impl Factors {
    pub fn new(indices: [usize; NUM_FACTORS]) -> Result<Self, DataError> {
        for (k, (&v, &card)) in indices.iter().zip(&CARDINALITIES).enumerate() {
            if v >= card {
                return Err(DataError::FactorOutOfRange {
                    factor: FACTOR_NAMES[k],
                    value: v,
                    cardinality: card,
                });
            }
        }
        Ok(Self(indices))
    }

    /// Position in lexicographic factor order.
    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .zip(&CARDINALITIES)
            .fold(0, |acc, (&v, &card)| acc * card + v)
    }

    pub fn from_index(mut index: usize) -> Result<Self, DataError> {
        if index >= NUM_SCENES {
            return Err(DataError::SceneOutOfRange(index));
        }
        let mut out = [0; NUM_FACTORS];
        for k in (0..NUM_FACTORS).rev() {
            out[k] = index % CARDINALITIES[k];
            index /= CARDINALITIES[k];
        }
        Ok(Self(out))
    }

    pub fn shape(&self) -> Shape {
        Shape::ALL[self.0[SHAPE]]
    }

    pub fn get(&self, k: usize) -> usize {
        self.0[k]
    }
}

/// A scene's factors plus its rendered image.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyScene {
    pub factors: Factors,
    /// `IMAGE_SIZE × IMAGE_SIZE × CHANNELS`, row-major, values in `[0, 1]`.
    pub image: Vec<f64>,
}

impl ToyScene {
    pub fn render(factors: Factors) -> Self {
        Self {
            factors,
            image: render(&factors),
        }
    }

    pub fn from_index(index: usize) -> Result<Self, DataError> {
        Ok(Self::render(Factors::from_index(index)?))
    }
}

/// HSV (hue in degrees) to RGB.
pub fn hsv_to_rgb(hue_deg: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let h = (hue_deg.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

pub fn object_color(hue_idx: usize) -> [f64; 3] {
    hsv_to_rgb(60.0 * hue_idx as f64, 0.9, 0.9)
}

pub fn background_color(bg_idx: usize) -> [f64; 3] {
    hsv_to_rgb(30.0 + 90.0 * bg_idx as f64, 0.3, 0.6)
}

/// Object centre in pixel coordinates (pixel `i` spans `[i, i + 1)`).
pub fn object_center(x_idx: usize, y_idx: usize) -> (f64, f64) {
    (4.0 + 3.0 * x_idx as f64 + 1.5, 4.0 + 3.0 * y_idx as f64 + 1.5)
}

pub fn half_extent(scale_idx: usize) -> f64 {
    3.0 + 0.75 * scale_idx as f64
}

/// Whether the pixel centre `(px, py)` lies inside the shape.
pub fn covers(shape: Shape, cx: f64, cy: f64, e: f64, px: f64, py: f64) -> bool {
    let in_box = px >= cx - e && px < cx + e && py >= cy - e && py < cy + e;
    match shape {
        Shape::Square => in_box,
        Shape::Disc => {
            let (dx, dy) = (px - cx, py - cy);
            dx * dx + dy * dy <= e * e
        }
        // Apex at the top centre, base along the bottom edge of the box.
        Shape::Triangle => in_box && (px - cx).abs() <= (py - (cy - e)) / 2.0,
    }
}

/// Object mask for a shape at a given scale and position, row-major 32×32.
pub fn object_mask(shape: Shape, scale_idx: usize, x_idx: usize, y_idx: usize) -> Vec<bool> {
    let (cx, cy) = object_center(x_idx, y_idx);
    let e = half_extent(scale_idx);
    let mut mask = vec![false; IMAGE_SIZE * IMAGE_SIZE];
    for py in 0..IMAGE_SIZE {
        for px in 0..IMAGE_SIZE {
            mask[py * IMAGE_SIZE + px] =
                covers(shape, cx, cy, e, px as f64 + 0.5, py as f64 + 0.5);
        }
    }
    mask
}

pub fn render(f: &Factors) -> Vec<f64> {
    let mask = object_mask(f.shape(), f.0[SCALE], f.0[POS_X], f.0[POS_Y]);
    let fg = object_color(f.0[HUE]);
    let bg = background_color(f.0[BACKGROUND]);
    let mut image = Vec::with_capacity(PIXELS);
    for &inside in &mask {
        image.extend_from_slice(if inside { &fg } else { &bg });
    }
    image
}

/// All scenes in lexicographic factor order, rendered on demand.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyDataset;

impl ToyDataset {
    pub fn len(&self) -> usize {
        NUM_SCENES
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn factors(&self, index: usize) -> Factors {
        Factors::from_index(index).expect("scene index in range")
    }

    pub fn image(&self, index: usize) -> Vec<f64> {
        render(&self.factors(index))
    }

    /// Row-major `count × PIXELS` block of images `start..start + count`.
    pub fn image_block(&self, start: usize, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count * PIXELS);
        for i in start..start + count {
            out.extend(self.image(i));
        }
        out
    }

    /// Indices of scenes whose factor `k` equals `value`.
    pub fn matching(&self, k: usize, value: usize) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_SCENES).filter(move |&i| self.factors(i).0[k] == value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip_is_lexicographic() {
        assert_eq!(Factors::from_index(0).unwrap().0, [0; 6]);
        assert_eq!(Factors::from_index(1).unwrap().0, [0, 0, 0, 0, 0, 1]);
        assert_eq!(Factors::from_index(4).unwrap().0, [0, 0, 0, 0, 1, 0]);
        for i in (0..NUM_SCENES).step_by(97) {
            assert_eq!(Factors::from_index(i).unwrap().to_index(), i);
        }
        assert_eq!(NUM_SCENES, 18432);
    }

    #[test]
    fn out_of_range_factor_rejected() {
        assert!(matches!(
            Factors::new([3, 0, 0, 0, 0, 0]),
            Err(DataError::FactorOutOfRange { factor: "shape", .. })
        ));
        assert!(Factors::new([2, 3, 7, 7, 5, 3]).is_ok());
        assert!(Factors::from_index(NUM_SCENES).is_err());
    }

    #[test]
    fn smallest_square_has_36_pixels() {
        // Oracle: pixel centres i + 0.5 in the half-open box [c - 3, c + 3)
        // with c = 5.5 are i = 2..=7, six per axis.
        let count = object_mask(Shape::Square, 0, 0, 0).iter().filter(|m| **m).count();
        assert_eq!(count, 36);
        for x in 0..8 {
            let c = object_mask(Shape::Square, 0, x, 5).iter().filter(|m| **m).count();
            assert_eq!(c, 36);
        }
    }

    #[test]
    fn largest_objects_never_clip() {
        let e = half_extent(3);
        let (lo, _) = object_center(0, 0);
        let (hi, _) = object_center(7, 7);
        assert!(lo - e >= 0.0 && hi + e <= IMAGE_SIZE as f64);
        for shape in Shape::ALL {
            let reference = object_mask(shape, 3, 3, 3).iter().filter(|m| **m).count();
            for x in 0..8 {
                for y in 0..8 {
                    let area = object_mask(shape, 3, x, y).iter().filter(|m| **m).count();
                    assert_eq!(area, reference, "{shape:?} at ({x}, {y})");
                }
            }
        }
    }

    #[test]
    fn background_change_only_touches_background_pixels() {
        let a = render(&Factors([1, 2, 3, 4, 5, 0]));
        let b = render(&Factors([1, 2, 3, 4, 5, 2]));
        let mask = object_mask(Shape::Disc, 2, 3, 4);
        for (p, &inside) in mask.iter().enumerate() {
            let same = (0..3).all(|c| a[p * 3 + c] == b[p * 3 + c]);
            assert_eq!(same, inside, "pixel {p}");
        }
    }

    #[test]
    fn palette_colors_are_distinct() {
        let mut colors: Vec<[f64; 3]> = (0..6).map(object_color).collect();
        colors.extend((0..4).map(background_color));
        for i in 0..colors.len() {
            for j in 0..i {
                assert_ne!(colors[i], colors[j]);
            }
        }
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        assert_eq!(hsv_to_rgb(120.0, 1.0, 1.0), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn masks_distinguish_every_shape_scale_pair() {
        let mut masks = Vec::new();
        for shape in Shape::ALL {
            for s in 0..4 {
                masks.push(object_mask(shape, s, 0, 0));
            }
        }
        for i in 0..masks.len() {
            for j in 0..i {
                assert_ne!(masks[i], masks[j]);
            }
        }
    }

    #[test]
    fn render_is_pure() {
        let f = Factors([2, 1, 6, 0, 3, 1]);
        let a = render(&f);
        let b = render(&f);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.len(), PIXELS);
    }
}
