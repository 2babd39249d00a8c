//! Frame-wise keypoint normalization.
//!
//! The customized scheme scales body points by the distance between the
//! frame's center point and a per-part reference point, and min-max scales
//! each hand into [-0.5, 0.5]. The remaining schemes are the comparison
//! normalizers used in the evaluation matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keypoint::{KeypointFrame, Point2, LEFT_HAND_SLOTS, NUM_KEYPOINTS, RIGHT_HAND_SLOTS};

/// Guard for degenerate denominators, in input units.
pub const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyPart {
    Face,
    UpperBody,
    LeftArm,
    RightArm,
}

/// A body part with its reference slot and member slots (canonical indices).
#[derive(Debug, Clone)]
pub struct PartReference {
    pub part: BodyPart,
    pub reference_slot: usize,
    pub member_slots: &'static [usize],
}

/// The four body parts: face referenced by the nose, upper body by the
/// neck, each arm by its elbow. Members partition slots 0..=12.
pub fn body_parts() -> [PartReference; 4] {
    [
        PartReference {
            part: BodyPart::Face,
            reference_slot: 0, // nose
            member_slots: &[0, 1, 2, 3, 4, 11],
        },
        PartReference {
            part: BodyPart::UpperBody,
            reference_slot: 12, // neck
            member_slots: &[5, 6, 12],
        },
        PartReference {
            part: BodyPart::LeftArm,
            reference_slot: 7, // left elbow
            member_slots: &[7, 9],
        },
        PartReference {
            part: BodyPart::RightArm,
            reference_slot: 8, // right elbow
            member_slots: &[8, 10],
        },
    ]
}

/// Canonical slot of the right shoulder, the sole reference of the
/// fixed-right-shoulder baseline.
pub const RIGHT_SHOULDER_SLOT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScheme {
    Customized,
    Standard,
    Robust,
    MinMax,
    FixedRightShoulder,
    AllReference,
    CenterReference,
}

impl NormScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "customized" => Ok(Self::Customized),
            "standard" => Ok(Self::Standard),
            "robust" => Ok(Self::Robust),
            "minmax" => Ok(Self::MinMax),
            "fixed_right_shoulder" => Ok(Self::FixedRightShoulder),
            "all_reference" => Ok(Self::AllReference),
            "center_reference" => Ok(Self::CenterReference),
            other => Err(Error::UnknownScheme(other.into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Customized => "customized",
            Self::Standard => "standard",
            Self::Robust => "robust",
            Self::MinMax => "minmax",
            Self::FixedRightShoulder => "fixed_right_shoulder",
            Self::AllReference => "all_reference",
            Self::CenterReference => "center_reference",
        }
    }
}

/// Whether the two hands share one min-max box or scale independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandScaling {
    PerHand,
    Joint,
}

/// A frame in normalized (dimensionless) coordinates.
pub type NormalizedFrame = KeypointFrame;

/// Mean of all 55 keypoints.
pub fn center_point(frame: &KeypointFrame) -> Point2 {
    let mut cx = 0.0;
    let mut cy = 0.0;
    for p in &frame.points {
        cx += p.x;
        cy += p.y;
    }
    Point2::new(cx / NUM_KEYPOINTS as f64, cy / NUM_KEYPOINTS as f64)
}

/// Euclidean distance between the frame center and a part's reference point.
pub fn part_distance(frame: &KeypointFrame, part: &PartReference) -> f64 {
    let c = center_point(frame);
    let r = frame.points[part.reference_slot];
    ((c.x - r.x).powi(2) + (c.y - r.y).powi(2)).sqrt()
}

/// Normalize the 13 body slots: (v - c) / d_part, zeros when the part's
/// reference distance degenerates.
pub fn normalize_body_customized(
    frame: &KeypointFrame,
    parts: &[PartReference],
    eps: f64,
    out: &mut NormalizedFrame,
) {
    let c = center_point(frame);
    for part in parts {
        let d = part_distance(frame, part);
        for &slot in part.member_slots {
            let v = frame.points[slot];
            out.points[slot] = if d < eps {
                Point2::new(0.0, 0.0)
            } else {
                Point2::new((v.x - c.x) / d, (v.y - c.y) / d)
            };
        }
    }
}

fn minmax_axis(values: &[f64], eps: f64) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span < eps {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|&v| (v - lo) / span - 0.5).collect()
    }
}

/// Min-max scale the hand slots into [-0.5, 0.5], per axis.
pub fn normalize_hands_minmax(
    frame: &KeypointFrame,
    scaling: HandScaling,
    eps: f64,
    out: &mut NormalizedFrame,
) {
    let ranges: &[std::ops::Range<usize>] = match scaling {
        HandScaling::PerHand => &[LEFT_HAND_SLOTS, RIGHT_HAND_SLOTS],
        HandScaling::Joint => &[LEFT_HAND_SLOTS.start..RIGHT_HAND_SLOTS.end],
    };
    for range in ranges {
        let xs: Vec<f64> = frame.points[range.clone()].iter().map(|p| p.x).collect();
        let ys: Vec<f64> = frame.points[range.clone()].iter().map(|p| p.y).collect();
        let nx = minmax_axis(&xs, eps);
        let ny = minmax_axis(&ys, eps);
        for (k, slot) in range.clone().enumerate() {
            out.points[slot] = Point2::new(nx[k], ny[k]);
        }
    }
}

/// The customized scheme: part-referenced body scaling plus per-hand
/// min-max scaling.
pub fn normalize_customized(frame: &KeypointFrame, scaling: HandScaling) -> NormalizedFrame {
    let mut out = KeypointFrame::constant(0.0, 0.0);
    normalize_body_customized(frame, &body_parts(), EPS, &mut out);
    normalize_hands_minmax(frame, scaling, EPS, &mut out);
    out
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between order statistics
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

fn per_axis<F>(frame: &KeypointFrame, f: F) -> NormalizedFrame
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let xs: Vec<f64> = frame.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = frame.points.iter().map(|p| p.y).collect();
    let nx = f(&xs);
    let ny = f(&ys);
    let mut out = KeypointFrame::constant(0.0, 0.0);
    for i in 0..NUM_KEYPOINTS {
        out.points[i] = Point2::new(nx[i], ny[i]);
    }
    out
}

/// Apply one of the comparison normalizers (or delegate to customized).
pub fn normalize_baseline(frame: &KeypointFrame, scheme: NormScheme) -> NormalizedFrame {
    match scheme {
        NormScheme::Customized => normalize_customized(frame, HandScaling::PerHand),
        NormScheme::Standard => per_axis(frame, |vals| {
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let sigma = var.sqrt();
            if sigma < EPS {
                vec![0.0; vals.len()]
            } else {
                vals.iter().map(|v| (v - mu) / sigma).collect()
            }
        }),
        NormScheme::Robust => per_axis(frame, |vals| {
            let mut sorted = vals.to_vec();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let median = quantile(&sorted, 0.5);
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            if iqr < EPS {
                vec![0.0; vals.len()]
            } else {
                vals.iter().map(|v| (v - median) / iqr).collect()
            }
        }),
        NormScheme::MinMax => per_axis(frame, |vals| minmax_axis(vals, EPS)),
        NormScheme::FixedRightShoulder => {
            let c = center_point(frame);
            let r = frame.points[RIGHT_SHOULDER_SLOT];
            let d = ((c.x - r.x).powi(2) + (c.y - r.y).powi(2)).sqrt();
            let mut out = KeypointFrame::constant(0.0, 0.0);
            if d >= EPS {
                for i in 0..NUM_KEYPOINTS {
                    let v = frame.points[i];
                    out.points[i] = Point2::new((v.x - c.x) / d, (v.y - c.y) / d);
                }
            }
            out
        }
        NormScheme::AllReference => {
            let mut out = KeypointFrame::constant(0.0, 0.0);
            let parts = body_parts();
            normalize_body_customized(frame, &parts, EPS, &mut out);
            let c = center_point(frame);
            // hands reuse their arm's reference distance
            let left_d = part_distance(frame, &parts[2]);
            let right_d = part_distance(frame, &parts[3]);
            for (range, d) in [(LEFT_HAND_SLOTS, left_d), (RIGHT_HAND_SLOTS, right_d)] {
                for slot in range {
                    let v = frame.points[slot];
                    out.points[slot] = if d < EPS {
                        Point2::new(0.0, 0.0)
                    } else {
                        Point2::new((v.x - c.x) / d, (v.y - c.y) / d)
                    };
                }
            }
            out
        }
        NormScheme::CenterReference => {
            let c = center_point(frame);
            let mut out = KeypointFrame::constant(0.0, 0.0);
            for i in 0..NUM_KEYPOINTS {
                let v = frame.points[i];
                let d = ((v.x - c.x).powi(2) + (v.y - c.y).powi(2)).sqrt();
                out.points[i] = if d < EPS {
                    Point2::new(0.0, 0.0)
                } else {
                    Point2::new((v.x - c.x) / d, (v.y - c.y) / d)
                };
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_from(coords: &[(f64, f64)]) -> KeypointFrame {
        assert_eq!(coords.len(), 55);
        let mut points = [Point2::new(0.0, 0.0); 55];
        for (i, &(x, y)) in coords.iter().enumerate() {
            points[i] = Point2::new(x, y);
        }
        KeypointFrame { points }
    }

    fn arb_frame() -> impl Strategy<Value = KeypointFrame> {
        proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 55)
            .prop_map(|v| frame_from(&v))
    }

    #[test]
    fn center_of_constant_frame() {
        let c = center_point(&KeypointFrame::constant(3.0, 4.0));
        assert_eq!((c.x, c.y), (3.0, 4.0));
    }

    #[test]
    fn center_is_arithmetic_mean() {
        let mut coords = vec![(0.0, 0.0); 55];
        coords[7] = (55.0, 110.0);
        let c = center_point(&frame_from(&coords));
        assert!((c.x - 1.0).abs() < 1e-12);
        assert!((c.y - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn center_matches_compensated_sum(frame in arb_frame()) {
            // Kahan summation oracle
            let (mut sx, mut cx) = (0.0f64, 0.0f64);
            let (mut sy, mut cy) = (0.0f64, 0.0f64);
            for p in &frame.points {
                let tx = p.x - cx;
                let t = sx + tx;
                cx = (t - sx) - tx;
                sx = t;
                let ty = p.y - cy;
                let t = sy + ty;
                cy = (t - sy) - ty;
                sy = t;
            }
            let c = center_point(&frame);
            prop_assert!((c.x - sx / 55.0).abs() < 1e-9);
            prop_assert!((c.y - sy / 55.0).abs() < 1e-9);
        }
    }

    #[test]
    fn part_distance_three_four_five() {
        // all mass at the origin except the nose at (3,4) would shift the
        // center; instead build a frame whose center is exactly (0,0).
        let mut coords = vec![(0.0, 0.0); 55];
        coords[0] = (3.0, 4.0);
        coords[1] = (-3.0, -4.0);
        let frame = frame_from(&coords);
        let parts = body_parts();
        assert!((part_distance(&frame, &parts[0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn part_distance_zero_when_reference_at_center() {
        let frame = KeypointFrame::constant(2.0, 2.0);
        for part in &body_parts() {
            assert_eq!(part_distance(&frame, part), 0.0);
        }
    }

    #[test]
    fn degenerate_frame_normalizes_to_zeros() {
        let out = normalize_customized(&KeypointFrame::constant(7.0, -7.0), HandScaling::PerHand);
        for p in &out.points {
            assert_eq!((p.x, p.y), (0.0, 0.0));
        }
    }

    #[test]
    fn body_normalization_hand_computed_example() {
        // Frame whose coordinate sums are zero, so c = (0,0). Nose at (0,2)
        // gives d_face = 2; face slot 1 at (1,1) must map to (0.5, 0.5).
        let mut coords = vec![(0.0, 0.0); 55];
        coords[0] = (0.0, 2.0);
        coords[1] = (1.0, 1.0);
        coords[2] = (-1.0, -3.0);
        let frame = frame_from(&coords);
        let c = center_point(&frame);
        assert_eq!((c.x, c.y), (0.0, 0.0));
        let mut out = KeypointFrame::constant(0.0, 0.0);
        normalize_body_customized(&frame, &body_parts(), EPS, &mut out);
        assert!((out.points[1].x - 0.5).abs() < 1e-12);
        assert!((out.points[1].y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hand_minmax_endpoints_and_midpoint() {
        let mut coords = vec![(0.0, 0.0); 55];
        // left hand x spanning [2,4]
        for (k, slot) in (13..34).enumerate() {
            coords[slot] = (2.0 + (k % 3) as f64, k as f64);
        }
        let frame = frame_from(&coords);
        let mut out = KeypointFrame::constant(0.0, 0.0);
        normalize_hands_minmax(&frame, HandScaling::PerHand, EPS, &mut out);
        for (k, slot) in (13..34).enumerate() {
            let expected = match k % 3 {
                0 => -0.5,
                1 => 0.0,
                _ => 0.5,
            };
            assert!((out.points[slot].x - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_minmax_affine_invariant() {
        let mut coords: Vec<(f64, f64)> = (0..55).map(|i| (i as f64, (i * i % 17) as f64)).collect();
        let base = frame_from(&coords);
        for slot in 13..34 {
            coords[slot] = (coords[slot].0 * 3.0 + 11.0, coords[slot].1 * 3.0 - 4.0);
        }
        let scaled = frame_from(&coords);
        let mut a = KeypointFrame::constant(0.0, 0.0);
        let mut b = KeypointFrame::constant(0.0, 0.0);
        normalize_hands_minmax(&base, HandScaling::PerHand, EPS, &mut a);
        normalize_hands_minmax(&scaled, HandScaling::PerHand, EPS, &mut b);
        for slot in 13..34 {
            assert!((a.points[slot].x - b.points[slot].x).abs() < 1e-9);
            assert!((a.points[slot].y - b.points[slot].y).abs() < 1e-9);
        }
    }

    #[test]
    fn center_reference_unit_vector() {
        let mut coords = vec![(0.0, 0.0); 55];
        coords[20] = (3.0, 4.0);
        coords[21] = (-3.0, -4.0);
        let frame = frame_from(&coords);
        let out = normalize_baseline(&frame, NormScheme::CenterReference);
        assert!((out.points[20].x - 0.6).abs() < 1e-12);
        assert!((out.points[20].y - 0.8).abs() < 1e-12);
    }

    #[test]
    fn standard_identity_on_standardized_axis() {
        // coordinates already at mean 0, population std 1 on each axis
        let mut coords = vec![(0.0, 0.0); 55];
        for (i, c) in coords.iter_mut().enumerate() {
            let v = if i < 27 { 1.0 } else { -1.0 };
            *c = (v, -v);
        }
        // 27 ones and 28 minus-ones: adjust one entry so mean is exactly 0
        coords[54] = (27.0 - 26.0, -(27.0 - 26.0)); // keep +-1 pattern: 27 of each sign plus one zero
        let mut xs: Vec<f64> = coords.iter().map(|c| c.0).collect();
        let mu = xs.iter().sum::<f64>() / 55.0;
        let var = xs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 55.0;
        // rescale to population std exactly 1
        let s = var.sqrt();
        for c in coords.iter_mut() {
            c.0 = (c.0 - mu) / s;
            c.1 = (c.1 + mu) / s;
        }
        xs = coords.iter().map(|c| c.0).collect();
        let mu2 = xs.iter().sum::<f64>() / 55.0;
        assert!(mu2.abs() < 1e-12);
        let frame = frame_from(&coords);
        let out = normalize_baseline(&frame, NormScheme::Standard);
        for (i, p) in out.points.iter().enumerate() {
            assert!((p.x - coords[i].0).abs() < 1e-9);
            assert!((p.y - coords[i].1).abs() < 1e-9);
        }
    }

    #[test]
    fn robust_constant_frame_is_zero() {
        let out = normalize_baseline(&KeypointFrame::constant(5.0, 5.0), NormScheme::Robust);
        assert!(out.points.iter().all(|p| p.x == 0.0 && p.y == 0.0));
    }

    #[test]
    fn unknown_scheme_rejected() {
        assert!(matches!(
            NormScheme::parse("zscore"),
            Err(Error::UnknownScheme(_))
        ));
    }

    const ALL_SCHEMES: [NormScheme; 7] = [
        NormScheme::Customized,
        NormScheme::Standard,
        NormScheme::Robust,
        NormScheme::MinMax,
        NormScheme::FixedRightShoulder,
        NormScheme::AllReference,
        NormScheme::CenterReference,
    ];

    proptest! {
        #[test]
        fn translation_invariance(frame in arb_frame(), dx in -1e3f64..1e3, dy in -1e3f64..1e3) {
            let mut shifted = frame.clone();
            for p in shifted.points.iter_mut() {
                p.x += dx;
                p.y += dy;
            }
            for scheme in ALL_SCHEMES {
                let a = normalize_baseline(&frame, scheme);
                let b = normalize_baseline(&shifted, scheme);
                for i in 0..55 {
                    prop_assert!((a.points[i].x - b.points[i].x).abs() < 1e-9, "{:?} slot {}", scheme, i);
                    prop_assert!((a.points[i].y - b.points[i].y).abs() < 1e-9, "{:?} slot {}", scheme, i);
                }
            }
        }

        #[test]
        fn positive_scale_invariance(frame in arb_frame(), lambda in 0.1f64..100.0) {
            let mut scaled = frame.clone();
            for p in scaled.points.iter_mut() {
                p.x *= lambda;
                p.y *= lambda;
            }
            for scheme in ALL_SCHEMES {
                let a = normalize_baseline(&frame, scheme);
                let b = normalize_baseline(&scaled, scheme);
                for i in 0..55 {
                    let tol = 1e-9 * (1.0 + a.points[i].x.abs().max(a.points[i].y.abs()));
                    prop_assert!((a.points[i].x - b.points[i].x).abs() < tol, "{:?} slot {}", scheme, i);
                    prop_assert!((a.points[i].y - b.points[i].y).abs() < tol, "{:?} slot {}", scheme, i);
                }
            }
        }

        #[test]
        fn customized_hands_in_range_and_attain_bounds(frame in arb_frame()) {
            let out = normalize_customized(&frame, HandScaling::PerHand);
            for range in [13..34usize, 34..55] {
                let xs: Vec<f64> = out.points[range.clone()].iter().map(|p| p.x).collect();
                let ys: Vec<f64> = out.points[range].iter().map(|p| p.y).collect();
                for axis in [xs, ys] {
                    for &v in &axis {
                        prop_assert!((-0.5..=0.5).contains(&v));
                    }
                    let lo = axis.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = axis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    // non-degenerate axes attain both endpoints
                    if hi - lo > 1e-9 {
                        prop_assert!((lo + 0.5).abs() < 1e-9);
                        prop_assert!((hi - 0.5).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn all_outputs_finite(frame in arb_frame()) {
            for scheme in ALL_SCHEMES {
                let out = normalize_baseline(&frame, scheme);
                prop_assert!(out.points.iter().all(|p| p.is_finite()));
            }
        }
    }
}
