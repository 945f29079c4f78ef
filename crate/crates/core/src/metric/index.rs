//! Sorted-projection range index.
//!
//! Points are sorted by the coordinate with the largest weighted spread.
//! Since `w_k^{1/p} |a_k - b_k| <= ‖a - b‖_p`, a range query only has to scan
//! the window of that coordinate around the query.

use super::space::Space;

pub struct SweepIndex<'a> {
    coords: &'a [f64],
    dim: usize,
    space: &'a Space,
    axis: usize,
    scale: f64,
    keys: Vec<f64>,
    ids: Vec<usize>,
}

impl<'a> SweepIndex<'a> {
    /// Indexes the rows `ids` of the row-major buffer `coords`.
    pub fn new(coords: &'a [f64], dim: usize, space: &'a Space, ids: &[usize]) -> Self {
        let mut axis = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in ids {
                let v = coords[i * dim + k];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let spread = (hi - lo) * space.coord_scale(k);
            if spread > best {
                best = spread;
                axis = k;
            }
        }
        let scale = space.coord_scale(axis);
        let mut order: Vec<(f64, usize)> =
            ids.iter().map(|&i| (coords[i * dim + axis] * scale, i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let keys = order.iter().map(|o| o.0).collect();
        let ids = order.iter().map(|o| o.1).collect();
        Self { coords, dim, space, axis, scale, keys, ids }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Calls `visit(id, distance)` for every indexed row within closed distance `r` of `x`.
    pub fn for_each_within(&self, x: &[f64], r: f64, mut visit: impl FnMut(usize, f64)) {
        let key = x[self.axis] * self.scale;
        // Widen the window slightly so rounding in the keys never drops a point.
        let slack = r * (1.0 + 1e-12) + 1e-300;
        let start = self.keys.partition_point(|k| *k < key - slack);
        for pos in start..self.keys.len() {
            if self.keys[pos] > key + slack {
                break;
            }
            let id = self.ids[pos];
            let d = self.space.dist(x, self.row(id));
            if d <= r {
                visit(id, d);
            }
        }
    }

    pub fn within(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(x, r, |i, _| out.push(i));
        out
    }

    /// Nearest indexed row to `x`, ties to the lowest id.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        if self.ids.is_empty() {
            return None;
        }
        let key = x[self.axis] * self.scale;
        let start = self.keys.partition_point(|k| *k < key);
        let mut best: Option<(usize, f64)> = None;
        let better = |cand: (usize, f64), best: &Option<(usize, f64)>| match best {
            None => true,
            Some(b) => cand.1 < b.1 || (cand.1 == b.1 && cand.0 < b.0),
        };
        let mut up = start;
        let mut down = start;
        loop {
            let bound = best.map(|b| b.1 * (1.0 + 1e-12) + 1e-300).unwrap_or(f64::INFINITY);
            let up_ok = up < self.keys.len() && self.keys[up] - key <= bound;
            let down_ok = down > 0 && key - self.keys[down - 1] <= bound;
            if !up_ok && !down_ok {
                break;
            }
            if up_ok {
                let id = self.ids[up];
                let c = (id, self.space.dist(x, self.row(id)));
                if better(c, &best) {
                    best = Some(c);
                }
                up += 1;
            }
            if down_ok {
                down -= 1;
                let id = self.ids[down];
                let c = (id, self.space.dist(x, self.row(id)));
                if better(c, &best) {
                    best = Some(c);
                }
            }
        }
        best
    }
}
