use super::RadialGrid;

/// Stencil order for [`radial_operator_fd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    fn half_width(self) -> usize {
        match self {
            FdOrder::Second => 1,
            FdOrder::Fourth => 2,
        }
    }
}

/// `-u'' - (N-1)/r u' + u` by centered differences in `t = ln r`, where the
/// operator reads `-e^{-2t}(u_tt + (N-2) u_t) + u`. Returns the first
/// node index covered and the values on interior nodes.
pub fn radial_operator_fd(n: u32, grid: &RadialGrid, u: &[f64], order: FdOrder) -> (usize, Vec<f64>) {
    let h = grid.log_step();
    let w = order.half_width();
    let m = u.len().min(grid.len());
    if m < 2 * w + 1 {
        return (w, Vec::new());
    }
    let out = (w..m - w)
        .map(|j| {
            let (d1, d2) = match order {
                FdOrder::Second => (
                    (u[j + 1] - u[j - 1]) / (2.0 * h),
                    (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (h * h),
                ),
                FdOrder::Fourth => (
                    (u[j - 2] - 8.0 * u[j - 1] + 8.0 * u[j + 1] - u[j + 2]) / (12.0 * h),
                    (-u[j - 2] + 16.0 * u[j - 1] - 30.0 * u[j] + 16.0 * u[j + 1] - u[j + 2]) / (12.0 * h * h),
                ),
            };
            let r = grid.nodes()[j];
            -(d2 + (n as f64 - 2.0) * d1) / (r * r) + u[j]
        })
        .collect();
    (w, out)
}
