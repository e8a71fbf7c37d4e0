//! Mirror extension of extrema past the window ends.
//!
//! The symmetry axis at each end is either the outermost extremum or the end
//! sample itself, whichever keeps the reflected extrema alternating with the
//! interior ones. When the end sample is the axis and lies outside the range
//! of the first extremum, it joins the reflected set as an extremum of the
//! opposite kind. Two extrema of each kind are reflected.

use crate::scalar::Scalar;

const REFLECTED: usize = 2;

/// Reflected knots for one side: `(position, source index)`, ascending.
#[derive(Debug, Default, PartialEq)]
pub(super) struct Side {
    pub max: Vec<(i64, usize)>,
    pub min: Vec<(i64, usize)>,
}

/// Knots reflected past sample 0. `maxima` and `minima` are ascending and
/// both non-empty.
pub(super) fn left<T: Scalar>(h: &[T], maxima: &[usize], minima: &[usize]) -> Side {
    left_by(|i| h[i], maxima, minima)
}

/// Knots reflected past the last sample, found by reflecting the problem,
/// solving it on the left and mapping back.
pub(super) fn right<T: Scalar>(h: &[T], maxima: &[usize], minima: &[usize]) -> Side {
    let last = h.len() - 1;
    let flip = |xs: &[usize]| xs.iter().rev().map(|&i| last - i).collect::<Vec<_>>();
    let side = left_by(|i| h[last - i], &flip(maxima), &flip(minima));
    let back = |xs: Vec<(i64, usize)>| {
        xs.into_iter().rev().map(|(p, i)| (last as i64 - p, last - i)).collect::<Vec<_>>()
    };
    Side { max: back(side.max), min: back(side.min) }
}

fn left_by<T: Scalar>(v: impl Fn(usize) -> T, maxima: &[usize], minima: &[usize]) -> Side {
    let take = |xs: &[usize], skip: usize, count: usize| xs.iter().skip(skip).take(count).copied().collect::<Vec<_>>();
    let with_end = |mut xs: Vec<usize>| {
        xs.insert(0, 0);
        xs
    };
    let (mut lmax, mut lmin, mut axis);
    if maxima[0] < minima[0] {
        if v(0) > v(minima[0]) {
            (lmax, lmin, axis) = (take(maxima, 1, REFLECTED), take(minima, 0, REFLECTED), maxima[0]);
        } else {
            (lmax, lmin, axis) = (take(maxima, 0, REFLECTED), with_end(take(minima, 0, REFLECTED - 1)), 0);
        }
    } else if v(0) < v(maxima[0]) {
        (lmax, lmin, axis) = (take(maxima, 0, REFLECTED), take(minima, 1, REFLECTED), minima[0]);
    } else {
        (lmax, lmin, axis) = (with_end(take(maxima, 0, REFLECTED - 1)), take(minima, 0, REFLECTED), 0);
    }

    // Reflection about an extremum that does not reach past sample 0 falls
    // back to reflecting about sample 0.
    let reaches = |xs: &[usize], axis: usize| xs.last().is_some_and(|&j| 2 * axis as i64 - j as i64 <= 0);
    if axis != 0 && !(reaches(&lmax, axis) && reaches(&lmin, axis)) {
        if axis == maxima[0] {
            lmax = take(maxima, 0, REFLECTED);
        } else {
            lmin = take(minima, 0, REFLECTED);
        }
        axis = 0;
    }

    let mirror = |xs: Vec<usize>| xs.into_iter().rev().map(|j| (2 * axis as i64 - j as i64, j)).collect::<Vec<_>>();
    Side { max: mirror(lmax), min: mirror(lmin) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emd::find_extrema;

    fn extrema(h: &[f64]) -> (Vec<usize>, Vec<usize>) {
        let (mut mx, mut mn) = (Vec::new(), Vec::new());
        find_extrema(h, &mut mx, &mut mn);
        (mx, mn)
    }

    #[test]
    fn reflects_about_first_extremum_when_end_is_inside() {
        // Starts between the first maximum (index 2) and the first minimum.
        let h = [0.0, 0.5, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let (mx, mn) = extrema(&h);
        assert_eq!((mx.clone(), mn.clone()), (vec![2, 6], vec![4, 8]));
        let s = left(&h, &mx, &mn);
        assert_eq!(s.max, vec![(-2, 6)]);
        assert_eq!(s.min, vec![(-4, 8), (0, 4)]);
    }

    #[test]
    fn end_sample_joins_when_outside_first_extremum() {
        // Starts below the first minimum that follows the first maximum.
        let h = [-2.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let (mx, mn) = extrema(&h);
        assert_eq!((mx.clone(), mn.clone()), (vec![1, 5], vec![3, 7]));
        let s = left(&h, &mx, &mn);
        assert_eq!(s.max, vec![(-5, 5), (-1, 1)]);
        assert_eq!(s.min, vec![(-3, 3), (0, 0)]);
    }

    #[test]
    fn right_side_is_the_mirror_image() {
        let h = [0.0, 0.5, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let rev: Vec<f64> = h.iter().rev().copied().collect();
        let (mx, mn) = extrema(&h);
        let (rmx, rmn) = extrema(&rev);
        let r = right(&rev, &rmx, &rmn);
        let l = left(&h, &mx, &mn);
        let last = h.len() as i64 - 1;
        let flip = |xs: &[(i64, usize)]| xs.iter().rev().map(|&(p, i)| (last - p, h.len() - 1 - i)).collect::<Vec<_>>();
        assert_eq!(r.max, flip(&l.max));
        assert_eq!(r.min, flip(&l.min));
    }

    #[test]
    fn knots_lie_outside_the_interior_extrema() {
        let h: Vec<f64> = (0..200).map(|k| (k as f64 * 0.37).sin() + 0.3 * (k as f64 * 0.05).cos()).collect();
        let (mx, mn) = extrema(&h);
        let l = left(&h, &mx, &mn);
        let r = right(&h, &mx, &mn);
        assert!(l.max.iter().all(|&(p, _)| p < mx[0] as i64));
        assert!(l.min.iter().all(|&(p, _)| p < mn[0] as i64));
        assert!(r.max.iter().all(|&(p, _)| p > *mx.last().unwrap() as i64));
        assert!(r.min.iter().all(|&(p, _)| p > *mn.last().unwrap() as i64));
        assert!(l.max.iter().chain(&l.min).any(|&(p, _)| p <= 0));
        assert!(r.max.iter().chain(&r.min).any(|&(p, _)| p >= 199));
    }
}
