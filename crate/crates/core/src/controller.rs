//! A common simulatable form for every output-feedback controller in the
//! crate, plus a small helper for assembling block-linear maps.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::feedforward::AnticausalFeedforward;
use crate::linalg::{self, zeros};
use crate::lti::{Plant, StateSpace};
use crate::signal::Spectrum;

/// Linear controller with inputs `[y; r; φ]` and outputs `[u; u_c; u_q; f]`.
///
/// `φ` is a known feedforward signal (width `m2`) computed from the
/// reference by `feedforward`; it is zero when `feedforward` is `None`.
/// `u_c` and `u_q` split `u` into the nominal and compensating parts and `f`
/// is the output-estimation residual used by the compensator (empty for
/// controllers without one).
#[derive(Debug, Clone, PartialEq)]
pub struct LoopController {
    pub name: String,
    sys: StateSpace,
    p2: usize,
    m2: usize,
    nf: usize,
    pub feedforward: Option<AnticausalFeedforward>,
}

impl LoopController {
    pub fn new(name: impl Into<String>, sys: StateSpace, p2: usize, m2: usize, feedforward: Option<AnticausalFeedforward>) -> Result<Self> {
        if sys.ninputs() != 2 * p2 + m2 {
            return Err(Error::Dimension(format!("controller takes {} inputs, expected [y; r; φ] = {}", sys.ninputs(), 2 * p2 + m2)));
        }
        if sys.noutputs() < 3 * m2 {
            return Err(Error::Dimension("controller must output [u; u_c; u_q; f]".into()));
        }
        if let Some(ff) = &feedforward {
            if ff.noutputs() != m2 || ff.ninputs() != p2 {
                return Err(Error::Dimension("feedforward must map r (p2) to φ (m2)".into()));
            }
        }
        let nf = sys.noutputs() - 3 * m2;
        Ok(Self { name: name.into(), sys, p2, m2, nf, feedforward })
    }

    /// Observer-based state feedback `u = F x̂ + φ`, `x̂' = A x̂ + B2 u + L(C2 x̂ - y)`.
    pub fn observer_feedback(
        name: impl Into<String>,
        plant: &Plant,
        f: &DMatrix<f64>,
        l: &DMatrix<f64>,
        feedforward: Option<AnticausalFeedforward>,
    ) -> Result<Self> {
        let (n, m2, p2) = (plant.n(), plant.m2(), plant.p2());
        let lay = Layout::new(&[n, p2, p2, m2]);
        let fres = plant.c2() * lay.sel(0) - lay.sel(1);
        let u = f * lay.sel(0) + lay.sel(3);
        let xdot = plant.a() * lay.sel(0) + plant.b2() * &u + l * &fres;
        let uq = DMatrix::zeros(m2, lay.total());
        let out = linalg::vstack(&[&u, &u, &uq, &fres]);
        let sys = lay.state_space(&xdot, &out, 1)?;
        Self::new(name, sys, p2, m2, feedforward)
    }

    /// `u = G y` with `u_c = u`, `u_q = 0` and no residual. With
    /// `error_driven` the controller acts on `y - r` instead.
    pub fn output_feedback(name: impl Into<String>, g: &StateSpace, error_driven: bool) -> Result<Self> {
        let (p2, m2, n) = (g.ninputs(), g.noutputs(), g.nstates());
        let lay = Layout::new(&[n, p2, p2, m2]);
        let e = if error_driven { lay.sel(1) - lay.sel(2) } else { lay.sel(1) };
        let u = g.c() * lay.sel(0) + g.d() * &e + lay.sel(3);
        let xdot = g.a() * lay.sel(0) + g.b() * &e;
        let uq = DMatrix::zeros(m2, lay.total());
        let sys = lay.state_space(&xdot, &linalg::vstack(&[&u, &u, &uq]), 1)?;
        Self::new(name, sys, p2, m2, None)
    }

    pub fn system(&self) -> &StateSpace {
        &self.sys
    }

    pub fn nstates(&self) -> usize {
        self.sys.nstates()
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn u_rows(&self) -> Range<usize> {
        0..self.m2
    }

    pub fn uc_rows(&self) -> Range<usize> {
        self.m2..2 * self.m2
    }

    pub fn uq_rows(&self) -> Range<usize> {
        2 * self.m2..3 * self.m2
    }

    pub fn f_rows(&self) -> Range<usize> {
        3 * self.m2..3 * self.m2 + self.nf
    }

    /// Transfer from `y` to `u` with `r` and `φ` held at zero.
    pub fn y_to_u(&self) -> StateSpace {
        let cols: Vec<usize> = (0..self.p2).collect();
        let rows: Vec<usize> = self.u_rows().collect();
        self.sys.select_inputs(&cols).select_outputs(&rows)
    }

    /// Spectrum of `φ` for a reference spectrum.
    pub fn feedforward_spectrum(&self, r: &Spectrum) -> Result<Spectrum> {
        match &self.feedforward {
            Some(ff) => ff.output_spectrum(r),
            None => Ok(Spectrum::zero(self.m2)),
        }
    }
}

/// Column layout for block-linear expressions. An expression is a matrix
/// whose columns follow the blocks of the layout.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        Self { sizes: sizes.to_vec(), offsets, total: acc }
    }

    pub(crate) fn total(&self) -> usize {
        self.total
    }

    /// The expression equal to block `i`.
    pub(crate) fn sel(&self, i: usize) -> DMatrix<f64> {
        let mut m = zeros(self.sizes[i], self.total);
        for k in 0..self.sizes[i] {
            m[(k, self.offsets[i] + k)] = 1.0;
        }
        m
    }

    /// Split columns into the first `nblocks` blocks and the rest.
    pub(crate) fn split(&self, e: &DMatrix<f64>, nblocks: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let at = if nblocks < self.sizes.len() { self.offsets[nblocks] } else { self.total };
        (e.columns(0, at).into_owned(), e.columns(at, self.total - at).into_owned())
    }

    /// State space from derivative and output expressions; the first
    /// `nstate_blocks` blocks are states, the rest inputs.
    pub(crate) fn state_space(&self, xdot: &DMatrix<f64>, out: &DMatrix<f64>, nstate_blocks: usize) -> Result<StateSpace> {
        let (a, b) = self.split(xdot, nstate_blocks);
        let (c, d) = self.split(out, nstate_blocks);
        StateSpace::new(a, b, c, d)
    }
}
