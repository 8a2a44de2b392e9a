//! Conversion between RGB and the mean-intensity hue/saturation model.
//!
//! `V = (R+G+B)/3`, `S = 1 - 3 min(R,G,B)/(R+G+B)` and `H` from the arccos
//! hue angle. Black pixels map to `(0, 0, 0)`; achromatic pixels get `H = 0`.

use super::{Hsv, HsvImage, Rgb, RgbImage};

/// Denominator of the hue angle below which a pixel counts as achromatic.
const ACHROMATIC_EPS: f64 = 1e-12;

pub fn rgb_to_hsv_pixel(p: Rgb) -> Hsv {
    let Rgb { r, g, b } = p;
    let sum = r + g + b;
    if sum <= 0.0 {
        return Hsv::new(0.0, 0.0, 0.0);
    }
    let v = sum / 3.0;
    let s = (1.0 - 3.0 * r.min(g).min(b) / sum).clamp(0.0, 1.0);

    let num = 0.5 * ((r - g) + (r - b));
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    let h = if den < ACHROMATIC_EPS {
        0.0
    } else {
        let theta = (num / den).clamp(-1.0, 1.0).acos().to_degrees();
        let h = if b <= g { theta } else { 360.0 - theta };
        if h >= 360.0 {
            0.0
        } else {
            h
        }
    };
    Hsv::new(h, s, v.clamp(0.0, 1.0))
}

/// Sector-wise inverse of [`rgb_to_hsv_pixel`]. Output is clamped to `[0, 1]`.
pub fn hsv_to_rgb_pixel(p: Hsv) -> Rgb {
    let Hsv { h, s, v: i } = p;
    if s <= 0.0 {
        return Rgb::gray(i).clamp01();
    }
    let h = h.rem_euclid(360.0);
    // Within each 120 degree sector one channel is I(1-S), one follows the
    // cosine ratio and the third closes the sum 3I.
    let lifted = |hs: f64| {
        let hr = hs.to_radians();
        i * (1.0 + s * hr.cos() / (60f64.to_radians() - hr).cos())
    };
    let low = i * (1.0 - s);
    let rgb = if h < 120.0 {
        let r = lifted(h);
        let b = low;
        Rgb::new(r, 3.0 * i - (r + b), b)
    } else if h < 240.0 {
        let g = lifted(h - 120.0);
        let r = low;
        Rgb::new(r, g, 3.0 * i - (r + g))
    } else {
        let b = lifted(h - 240.0);
        let g = low;
        Rgb::new(3.0 * i - (g + b), g, b)
    };
    rgb.clamp01()
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    img.map(|&p| rgb_to_hsv_pixel(p))
}

pub fn hsv_to_rgb(img: &HsvImage) -> RgbImage {
    img.map(|&p| hsv_to_rgb_pixel(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn close(a: Hsv, h: f64, s: f64, v: f64) {
        assert_abs_diff_eq!(a.h, h, epsilon = 1e-9);
        assert_abs_diff_eq!(a.s, s, epsilon = 1e-12);
        assert_abs_diff_eq!(a.v, v, epsilon = 1e-12);
    }

    #[test]
    fn white_is_achromatic() {
        close(rgb_to_hsv_pixel(Rgb::new(1.0, 1.0, 1.0)), 0.0, 0.0, 1.0);
    }

    #[test]
    fn black_uses_zero_convention() {
        close(rgb_to_hsv_pixel(Rgb::new(0.0, 0.0, 0.0)), 0.0, 0.0, 0.0);
    }

    #[test]
    fn pure_red_and_blue() {
        close(
            rgb_to_hsv_pixel(Rgb::new(1.0, 0.0, 0.0)),
            0.0,
            1.0,
            1.0 / 3.0,
        );
        close(
            rgb_to_hsv_pixel(Rgb::new(0.0, 0.0, 1.0)),
            240.0,
            1.0,
            1.0 / 3.0,
        );
        close(
            rgb_to_hsv_pixel(Rgb::new(0.0, 1.0, 0.0)),
            120.0,
            1.0,
            1.0 / 3.0,
        );
    }

    #[test]
    fn inverse_examples() {
        let gray = hsv_to_rgb_pixel(Hsv::new(0.0, 0.0, 0.5));
        assert_eq!(gray, Rgb::gray(0.5));
        let blue = hsv_to_rgb_pixel(Hsv::new(240.0, 1.0, 1.0 / 3.0));
        assert_abs_diff_eq!(blue.r, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(blue.g, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(blue.b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_example() {
        let p = Rgb::new(0.2, 0.5, 0.7);
        let q = hsv_to_rgb_pixel(rgb_to_hsv_pixel(p));
        assert!((p.r - q.r).abs() <= 1e-9);
        assert!((p.g - q.g).abs() <= 1e-9);
        assert!((p.b - q.b).abs() <= 1e-9);
    }

    fn channel() -> impl Strategy<Value = f64> {
        0.0..=1.0f64
    }

    proptest! {
        #[test]
        fn ranges_hold(r in channel(), g in channel(), b in channel()) {
            let hsv = rgb_to_hsv_pixel(Rgb::new(r, g, b));
            prop_assert!((0.0..360.0).contains(&hsv.h));
            prop_assert!((0.0..=1.0).contains(&hsv.s));
            prop_assert!((0.0..=1.0).contains(&hsv.v));
        }

        #[test]
        fn continuous_round_trip(r in channel(), g in channel(), b in channel()) {
            let p = Rgb::new(r, g, b);
            prop_assume!(r + g + b > 1e-6);
            let q = hsv_to_rgb_pixel(rgb_to_hsv_pixel(p));
            prop_assert!((p.r - q.r).abs() <= 1e-9, "{:?} -> {:?}", p, q);
            prop_assert!((p.g - q.g).abs() <= 1e-9, "{:?} -> {:?}", p, q);
            prop_assert!((p.b - q.b).abs() <= 1e-9, "{:?} -> {:?}", p, q);
        }

        #[test]
        fn quantized_round_trip(c in any::<[u8; 3]>()) {
            let p = Rgb::from_u8(c);
            let q = hsv_to_rgb_pixel(rgb_to_hsv_pixel(p)).to_u8();
            for k in 0..3 {
                prop_assert!((i16::from(c[k]) - i16::from(q[k])).abs() <= 1);
            }
        }

        #[test]
        fn hue_is_scale_invariant(r in channel(), g in channel(), b in channel(), k in 0.05..1.0f64) {
            prop_assume!(r.max(g).max(b) - r.min(g).min(b) > 1e-3);
            let h1 = rgb_to_hsv_pixel(Rgb::new(r, g, b)).h;
            let h2 = rgb_to_hsv_pixel(Rgb::new(r * k, g * k, b * k)).h;
            let d = (h1 - h2).abs();
            prop_assert!(d.min(360.0 - d) < 1e-7, "{} vs {}", h1, h2);
        }
    }
}
