//! Circular convolution operator `A` and its adjoint.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Kernels with both sides at most this large are applied in the spatial
/// domain; larger ones go through the FFT.
pub const SPATIAL_MAX_SIDE: usize = 31;

/// Tolerance on the kernel sum accepted by [`ConvolutionOperator::new`].
pub const KERNEL_SUM_TOL: f64 = 1e-12;

/// A dense 2-D blur kernel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("kernel sides must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "kernel {height}x{width} needs {} entries, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn identity() -> Self {
        Self { height: 1, width: 1, data: vec![1.0] }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    /// Rescales the entries to sum to one.
    pub fn normalized(mut self) -> Result<Self> {
        if let Some(v) = self.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::format(format!("kernel entry {v} is negative or not finite")));
        }
        let s = self.sum();
        if s <= 0.0 {
            return Err(Error::format("kernel sums to zero"));
        }
        self.data.iter_mut().for_each(|v| *v /= s);
        Ok(self)
    }

    /// Parses the plain-text kernel format: a first line `H W` followed by
    /// `H` rows of `W` whitespace-separated decimals. The kernel is
    /// re-normalized, with a warning when its sum was off by more than 1e-6.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::format("empty kernel file"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(format!("bad kernel header {header:?}: {e}")))?;
        let [height, width] = dims[..] else {
            return Err(Error::format(format!("kernel header must be \"H W\", got {header:?}")));
        };
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(format!("kernel file ends before row {r}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(format!("kernel row {r}: {e}")))?;
            if row.len() != width {
                return Err(Error::format(format!(
                    "kernel row {r} has {} entries, expected {width}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if lines.next().is_some() {
            return Err(Error::format("trailing data after kernel rows"));
        }
        let kernel = Kernel::new(height, width, data).map_err(|e| Error::format(e.to_string()))?;
        let s = kernel.sum();
        if (s - 1.0).abs() > 1e-6 {
            log::warn!("kernel sums to {s}; normalizing to 1");
        }
        kernel.normalized()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.height, self.width);
        for r in 0..self.height {
            let row: Vec<String> = (0..self.width).map(|c| format!("{:e}", self.get(r, c))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

struct FftPlan {
    spectrum: Vec<Complex64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

/// Circular convolution with a nonnegative kernel summing to one, on images
/// of a fixed shape. Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct ConvolutionOperator {
    kernel: Arc<Kernel>,
    height: usize,
    width: usize,
    fft: Option<Arc<FftPlan>>,
}

impl fmt::Debug for ConvolutionOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvolutionOperator")
            .field("kernel", &format_args!("{}x{}", self.kernel.height, self.kernel.width))
            .field("height", &self.height)
            .field("width", &self.width)
            .field("fft", &self.fft.is_some())
            .finish()
    }
}

impl ConvolutionOperator {
    pub fn new(kernel: Kernel, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("image sides must be positive"));
        }
        if let Some(v) = kernel.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::parameter(format!("kernel entry {v} is negative or not finite")));
        }
        let s = kernel.sum();
        if (s - 1.0).abs() > KERNEL_SUM_TOL {
            return Err(Error::parameter(format!("kernel sums to {s}, expected 1")));
        }
        let mut op = Self { kernel: Arc::new(kernel), height, width, fft: None };
        if op.kernel.height > SPATIAL_MAX_SIDE || op.kernel.width > SPATIAL_MAX_SIDE {
            op.fft = Some(Arc::new(op.plan_fft()));
        }
        Ok(op)
    }

    pub fn identity(height: usize, width: usize) -> Self {
        Self::new(Kernel::identity(), height, width).expect("identity kernel is valid")
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::shape(format!(
                "image has {} pixels, operator expects {}x{}",
                x.len(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    /// `A x`: `(Ax)[i,j] = Σ k[a,b] x[i-a+ca, j-b+cb]` with circular indices
    /// and the kernel centered at `(ca, cb) = (kh/2, kw/2)`.
    pub fn apply_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match &self.fft {
            Some(plan) => self.fft_apply(plan, x, false),
            None => self.spatial_apply(x, false),
        })
    }

    /// `Aᵀ v`, i.e. circular correlation with the kernel.
    pub fn apply_adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(match &self.fft {
            Some(plan) => self.fft_apply(plan, v, true),
            None => self.spatial_apply(v, true),
        })
    }

    /// Forces the spatial-domain path regardless of kernel size.
    pub fn apply_spatial(&self, x: &[f64], adjoint: bool) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.spatial_apply(x, adjoint))
    }

    /// Forces the FFT path regardless of kernel size.
    pub fn apply_fft(&self, x: &[f64], adjoint: bool) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match &self.fft {
            Some(plan) => self.fft_apply(plan, x, adjoint),
            None => self.fft_apply(&self.plan_fft(), x, adjoint),
        })
    }

    fn spatial_apply(&self, x: &[f64], adjoint: bool) -> Vec<f64> {
        let (h, w) = (self.height as isize, self.width as isize);
        let k = &self.kernel;
        let (ca, cb) = ((k.height / 2) as isize, (k.width / 2) as isize);
        let mut out = vec![0.0; x.len()];
        for a in 0..k.height {
            for b in 0..k.width {
                let kv = k.get(a, b);
                if kv == 0.0 {
                    continue;
                }
                // forward reads x at (i - (a - ca), j - (b - cb)); adjoint at (i + .., j + ..)
                let (mut di, mut dj) = (a as isize - ca, b as isize - cb);
                if !adjoint {
                    di = -di;
                    dj = -dj;
                }
                for i in 0..h {
                    let src_row = (i + di).rem_euclid(h) as usize * self.width;
                    let dst = &mut out[i as usize * self.width..(i as usize + 1) * self.width];
                    let src = &x[src_row..src_row + self.width];
                    let shift = dj.rem_euclid(w) as usize;
                    // dst[j] += kv * src[(j + shift) mod w]
                    let (tail, head) = src.split_at(shift);
                    let split = self.width - shift;
                    for (d, s) in dst[..split].iter_mut().zip(head) {
                        *d += kv * s;
                    }
                    for (d, s) in dst[split..].iter_mut().zip(tail) {
                        *d += kv * s;
                    }
                }
            }
        }
        out
    }

    fn plan_fft(&self) -> FftPlan {
        let mut planner = FftPlanner::<f64>::new();
        let row_fwd = planner.plan_fft_forward(self.width);
        let row_inv = planner.plan_fft_inverse(self.width);
        let col_fwd = planner.plan_fft_forward(self.height);
        let col_inv = planner.plan_fft_inverse(self.height);
        let k = &self.kernel;
        let (ca, cb) = (k.height / 2, k.width / 2);
        // point-spread function wrapped so that its center sits at the origin
        let mut psf = vec![Complex64::new(0.0, 0.0); self.len()];
        for a in 0..k.height {
            for b in 0..k.width {
                let i = (a as isize - ca as isize).rem_euclid(self.height as isize) as usize;
                let j = (b as isize - cb as isize).rem_euclid(self.width as isize) as usize;
                psf[i * self.width + j].re += k.get(a, b);
            }
        }
        let mut plan = FftPlan { spectrum: Vec::new(), row_fwd, row_inv, col_fwd, col_inv };
        fft2(&plan, &mut psf, self.height, self.width, false);
        plan.spectrum = psf;
        plan
    }

    fn fft_apply(&self, plan: &FftPlan, x: &[f64], adjoint: bool) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(plan, &mut buf, self.height, self.width, false);
        for (b, k) in buf.iter_mut().zip(&plan.spectrum) {
            *b *= if adjoint { k.conj() } else { *k };
        }
        fft2(plan, &mut buf, self.height, self.width, true);
        let scale = 1.0 / self.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

fn fft2(plan: &FftPlan, buf: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let (row, col) = if inverse {
        (&plan.row_inv, &plan.col_inv)
    } else {
        (&plan.row_fwd, &plan.col_fwd)
    };
    for r in buf.chunks_exact_mut(w) {
        row.process(r);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = buf[r * w + c];
        }
        col.process(&mut column);
        for r in 0..h {
            buf[r * w + c] = column[r];
        }
    }
}
