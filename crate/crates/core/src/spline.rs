//! Tensor-product Catmull-Rom interpolation over a regular 2-D grid.
//!
//! Boundary cells use linearly extrapolated ghost nodes, so the interpolant
//! reproduces every knot exactly and degrades to linear interpolation on
//! two-node axes.

/// Values on a regular `rows x cols` grid with uniform spacing per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpline {
    x0: f64,
    dx: f64,
    y0: f64,
    dy: f64,
    rows: usize,
    cols: usize,
    /// Row-major, `rows * cols`.
    values: Vec<f64>,
}

impl GridSpline {
    /// `xs` index rows, `ys` index columns; both must be uniformly spaced.
    pub fn new(xs: &[f64], ys: &[f64], values: Vec<f64>) -> Self {
        assert!(!xs.is_empty() && !ys.is_empty());
        assert_eq!(values.len(), xs.len() * ys.len());
        let step = |v: &[f64]| {
            if v.len() > 1 {
                (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
            } else {
                1.0
            }
        };
        Self {
            x0: xs[0],
            dx: step(xs),
            y0: ys[0],
            dy: step(ys),
            rows: xs.len(),
            cols: ys.len(),
            values,
        }
    }

    fn node(&self, i: isize, j: isize) -> f64 {
        // ghost nodes by linear extrapolation along each axis
        let (ri, rj) = (self.rows as isize, self.cols as isize);
        if i < 0 {
            return if ri > 1 {
                2.0 * self.node(0, j) - self.node(1, j)
            } else {
                self.node(0, j)
            };
        }
        if i >= ri {
            return if ri > 1 {
                2.0 * self.node(ri - 1, j) - self.node(ri - 2, j)
            } else {
                self.node(ri - 1, j)
            };
        }
        if j < 0 {
            return if rj > 1 {
                2.0 * self.node(i, 0) - self.node(i, 1)
            } else {
                self.node(i, 0)
            };
        }
        if j >= rj {
            return if rj > 1 {
                2.0 * self.node(i, rj - 1) - self.node(i, rj - 2)
            } else {
                self.node(i, rj - 1)
            };
        }
        self.values[i as usize * self.cols + j as usize]
    }

    /// Cell index and local coordinate; snaps to knots within `1e-9`.
    fn locate(pos: f64, n: usize) -> (isize, f64) {
        if n == 1 {
            return (0, 0.0);
        }
        let rounded = pos.round();
        let pos = if (pos - rounded).abs() < 1e-9 { rounded } else { pos };
        let cell = (pos.floor() as isize).clamp(0, n as isize - 2);
        (cell, pos - cell as f64)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (i, u) = Self::locate((x - self.x0) / self.dx, self.rows);
        let (j, v) = Self::locate((y - self.y0) / self.dy, self.cols);
        let mut along_rows = [0.0; 4];
        for (k, slot) in along_rows.iter_mut().enumerate() {
            let row = i - 1 + k as isize;
            *slot = catmull_rom(
                [
                    self.node(row, j - 1),
                    self.node(row, j),
                    self.node(row, j + 1),
                    self.node(row, j + 2),
                ],
                v,
            );
        }
        catmull_rom(along_rows, u)
    }
}

/// Uniform Catmull-Rom segment between `p[1]` (t = 0) and `p[2]` (t = 1).
pub fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    if t == 0.0 {
        return p[1];
    }
    if t == 1.0 {
        return p[2];
    }
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p[1]
        + (p[2] - p[0]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t2
        + (3.0 * p[1] - p[0] - 3.0 * p[2] + p[3]) * t3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(f: impl Fn(f64, f64) -> f64) -> (Vec<f64>, Vec<f64>, GridSpline) {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let mut v = Vec::new();
        for &x in &xs {
            for &y in &ys {
                v.push(f(x, y));
            }
        }
        let s = GridSpline::new(&xs, &ys, v);
        (xs, ys, s)
    }

    #[test]
    fn reproduces_knots_exactly() {
        let f = |x: f64, y: f64| (3.0 * x).sin() + y * y * x;
        let (xs, ys, s) = grid(f);
        for &x in &xs {
            for &y in &ys {
                assert_eq!(s.eval(x, y), f(x, y));
            }
        }
    }

    #[test]
    fn exact_for_bilinear_and_quadratic_interior() {
        let (_, _, s) = grid(|x, y| 2.0 + 3.0 * x - y + 0.5 * x * y);
        for (x, y) in [(0.13, 0.77), (0.55, 0.12), (0.31, 0.95)] {
            assert!((s.eval(x, y) - (2.0 + 3.0 * x - y + 0.5 * x * y)).abs() < 1e-12);
        }
        let (_, _, q) = grid(|x, _| x * x);
        // interior cells reproduce quadratics
        assert!((q.eval(0.35, 0.5) - 0.35 * 0.35).abs() < 1e-12);
    }

    #[test]
    fn two_node_axes_are_linear() {
        let s = GridSpline::new(&[0.1, 0.2], &[0.1, 0.2], vec![1.0, 2.0, 3.0, 4.0]);
        assert!((s.eval(0.15, 0.15) - 2.5).abs() < 1e-12);
        assert!((s.eval(0.1, 0.175) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn single_node_is_constant() {
        let s = GridSpline::new(&[0.3], &[0.4], vec![7.0]);
        assert_eq!(s.eval(0.3, 0.4), 7.0);
    }
}
