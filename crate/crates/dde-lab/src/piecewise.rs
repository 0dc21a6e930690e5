//! Dense-output trajectory storage and the shared method-of-steps RK4 core.
//!
//! Delay equations with a single lag `h` are integrated one delay interval
//! at a time: on `[k h, (k+1) h]` the delayed argument `t - h` falls in the
//! previous, already-computed interval, so the equation is an ODE there.
//! Each interval is integrated with classical RK4 on a uniform grid; the
//! delayed term is read from the previous interval's dense output. Node
//! values and node derivatives define a C^1 piecewise cubic Hermite
//! interpolant whose interpolation error (O(dt^4)) matches the RK4 order.

/// One delay interval of dense output: uniform nodes, values, derivatives.
#[derive(Clone, Debug)]
pub struct Block {
    pub t0: f64,
    pub dt: f64,
    /// Node values `x(t0 + i dt)`, length `n + 1`.
    pub x: Vec<f64>,
    /// Node derivatives `x'(t0 + i dt)`, length `n + 1`. At interior block
    /// boundaries the stored derivative is the left-sided one, which is the
    /// correct datum for the Hermite cubic on this block.
    pub dx: Vec<f64>,
}

impl Block {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.x.len() - 1) as f64
    }

    /// Cubic Hermite evaluation at `t`, which must lie in `[t0, t_end]`
    /// up to roundoff (clamped).
    pub fn eval(&self, t: f64) -> f64 {
        let (i, theta) = self.locate(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (d0, d1) = (self.dx[i] * self.dt, self.dx[i + 1] * self.dt);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * x0 + h10 * d0 + h01 * x1 + h11 * d1
    }

    /// Derivative of the Hermite interpolant at `t`.
    pub fn deriv(&self, t: f64) -> f64 {
        let (i, theta) = self.locate(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (d0, d1) = (self.dx[i], self.dx[i + 1]);
        let t2 = theta * theta;
        let g00 = (6.0 * t2 - 6.0 * theta) / self.dt;
        let g10 = 3.0 * t2 - 4.0 * theta + 1.0;
        let g01 = (-6.0 * t2 + 6.0 * theta) / self.dt;
        let g11 = 3.0 * t2 - 2.0 * theta;
        g00 * x0 + g10 * d0 + g01 * x1 + g11 * d1
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.x.len() - 1;
        let raw = (t - self.t0) / self.dt;
        let mut i = raw.floor() as isize;
        if i < 0 {
            i = 0;
        }
        if i as usize >= n {
            i = n as isize - 1;
        }
        let i = i as usize;
        let theta = ((t - self.t0) / self.dt - i as f64).clamp(0.0, 1.0);
        (i, theta)
    }
}

/// A trajectory on `[t_begin, t_end]` stored as consecutive equal-length
/// blocks (one per delay interval), each with its own uniform node grid.
#[derive(Clone, Debug)]
pub struct PiecewiseCubic {
    pub t_begin: f64,
    /// Length of every block (the delay `h`; a positive dummy for ODE runs).
    pub block_len: f64,
    pub blocks: Vec<Block>,
    /// Last time covered by actual integration (may be interior to the
    /// final block's nominal span only by roundoff; blocks are full).
    pub t_end: f64,
}

impl PiecewiseCubic {
    pub fn value(&self, t: f64) -> f64 {
        self.block_at(t).eval(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.block_at(t).deriv(t)
    }

    fn block_at(&self, t: f64) -> &Block {
        debug_assert!(
            t >= self.t_begin - 1e-9 && t <= self.t_end + 1e-9,
            "dense-output query at t = {t} outside [{}, {}]",
            self.t_begin,
            self.t_end
        );
        let mut k = ((t - self.t_begin) / self.block_len).floor() as isize;
        if k < 0 {
            k = 0;
        }
        if k as usize >= self.blocks.len() {
            k = self.blocks.len() as isize - 1;
        }
        &self.blocks[k as usize]
    }

    /// Supremum of `|x|` over `[lo, hi]`, estimated from `per_node`
    /// Hermite samples per node interval (plus the nodes themselves).
    pub fn sup_abs(&self, lo: f64, hi: f64, per_node: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for b in &self.blocks {
            if b.t_end() < lo || b.t0 > hi {
                continue;
            }
            let n = b.x.len() - 1;
            for i in 0..=n {
                let t = b.t0 + b.dt * i as f64;
                if t >= lo && t <= hi {
                    sup = sup.max(b.x[i].abs());
                }
                if i < n {
                    for j in 1..per_node {
                        let ts = t + b.dt * j as f64 / per_node as f64;
                        if ts >= lo && ts <= hi {
                            sup = sup.max(b.eval(ts).abs());
                        }
                    }
                }
            }
        }
        sup
    }
}

/// Number of RK4 steps per delay interval for a target local accuracy.
///
/// RK4's global error scales like `dt^4`; `dt = tol^(1/4) / 2` keeps the
/// per-unit-time error near `tol` with a comfortable constant, floored at
/// 16 steps per interval so short delays still resolve the kink structure.
pub fn steps_per_interval(h: f64, tol: f64) -> usize {
    let dt = 0.5 * tol.powf(0.25);
    let n = (h / dt).ceil() as usize;
    n.clamp(16, 4_000_000)
}

/// Integrate one delay interval `[t0, t0 + len]` with RK4.
///
/// `delayed(t)` must return the delayed state `x(t - h)` for any `t` in the
/// interval; at the right endpoint it should return the left-sided limit so
/// the stored end derivative matches the Hermite data of *this* block.
/// `rhs(t, x, xd)` evaluates `x'`.
pub fn integrate_interval(
    t0: f64,
    len: f64,
    n: usize,
    x0: f64,
    delayed: &dyn Fn(f64) -> f64,
    rhs: &dyn Fn(f64, f64, f64) -> f64,
) -> Block {
    let dt = len / n as f64;
    let mut x = Vec::with_capacity(n + 1);
    let mut dx = Vec::with_capacity(n + 1);
    let mut xi = x0;
    x.push(xi);
    dx.push(rhs(t0, xi, delayed(t0)));
    for i in 0..n {
        let t = t0 + dt * i as f64;
        let d_begin = delayed(t);
        let d_mid = delayed(t + 0.5 * dt);
        let d_end = delayed(t + dt);
        let k1 = rhs(t, xi, d_begin);
        let k2 = rhs(t + 0.5 * dt, xi + 0.5 * dt * k1, d_mid);
        let k3 = rhs(t + 0.5 * dt, xi + 0.5 * dt * k2, d_mid);
        let k4 = rhs(t + dt, xi + dt * k3, d_end);
        xi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        x.push(xi);
        dx.push(rhs(t + dt, xi, d_end));
    }
    Block { t0, dt, x, dx }
}
