//! The concave test function `ψ(r) = c₁r + ∫₀^r e^{-c₂g(s)} ds` on
//! `[0, 2l₀]` and its extensions beyond `2l₀`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::{Phi1, Phi2};
use crate::quadrature::gk15;

use super::sigma::GFunction;

/// Which certificate a test function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    W1,
    /// `a·1_{(0,∞)} + ψ`.
    Tv,
    /// `a·1_{(0,∞)} + ψ` with a bounded tail driven by `Φ₂`.
    StrongErgodic,
}

impl TestKind {
    pub fn tag(&self) -> &'static str {
        match self {
            TestKind::W1 => "w1",
            TestKind::Tv => "tv",
            TestKind::StrongErgodic => "strong_ergodic",
        }
    }
}

#[derive(Debug, Clone)]
enum Tail {
    Linear,
    /// `ψ(2l₀) + ψ'(2l₀)Φ₂(2l₀) ∫_{2l₀}^r ds/Φ₂(s)`.
    Phi2 {
        phi2: Phi2,
        base: f64,
    },
}

/// `ψ` together with the data needed to evaluate it and its derivatives.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub kind: TestKind,
    pub c1: f64,
    pub c2: f64,
    pub l0: f64,
    pub a: f64,
    /// `Φ₁` used in the inner regime of condition C.
    pub phi1: Phi1,
    g: Option<GFunction>,
    /// `∫₀^{node_k} e^{-c₂g}`.
    e_nodes: Arc<Vec<f64>>,
    tail: Tail,
    psi_2l0: f64,
    dpsi_2l0: f64,
}

impl TestFunction {
    /// Build `ψ` from `g`; `g = None` is the `l₀ = 0` case, where `ψ(r) = 2c₁r`.
    pub fn new(kind: TestKind, c1: f64, c2: f64, l0: f64, phi1: Phi1, g: Option<GFunction>) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::Contract(format!("c1 = {c1}, c2 = {c2} must be positive")));
        }
        let mut tf = TestFunction {
            kind,
            c1,
            c2,
            l0,
            a: 0.0,
            phi1,
            g,
            e_nodes: Arc::new(Vec::new()),
            tail: Tail::Linear,
            psi_2l0: 0.0,
            dpsi_2l0: 2.0 * c1,
        };
        if let Some(g) = &tf.g {
            let nodes = g.nodes();
            let r0 = g.r0();
            let mut acc = gk15(|s| (-c2 * g.eval(s)).exp(), 0.0, r0).value;
            let mut e = Vec::with_capacity(nodes.len());
            e.push(acc);
            for (k, w) in nodes.windows(2).enumerate() {
                let gk = g.node_values()[k];
                acc += gk15(|s| (-c2 * (gk + gk15(|u| g.derivative(u), w[0], s).value)).exp(), w[0], w[1]).value;
                e.push(acc);
            }
            tf.e_nodes = Arc::new(e);
            let top = 2.0 * l0;
            tf.psi_2l0 = c1 * top + tf.e_nodes.last().copied().unwrap_or(0.0);
            tf.dpsi_2l0 = c1 + (-c2 * g.total()).exp();
        }
        Ok(tf)
    }

    /// Replace the linear extension beyond `2l₀` with the bounded `Φ₂` tail.
    pub fn with_phi2_tail(mut self, phi2: Phi2) -> Result<Self> {
        let base = phi2.tail_integral(2.0 * self.l0)?;
        self.tail = Tail::Phi2 { phi2, base };
        Ok(self)
    }

    pub fn with_jump(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    /// `∫₀^r e^{-c₂g}` for `r ≤ 2l₀`.
    fn e_integral(&self, g: &GFunction, r: f64) -> f64 {
        let c2 = self.c2;
        if r < g.r0() {
            return gk15(|s| (-c2 * g.eval(s)).exp(), 0.0, r).value;
        }
        let k = g.locate(r);
        let lo = g.nodes()[k];
        if r == lo {
            return self.e_nodes[k];
        }
        let gk = g.node_values()[k];
        self.e_nodes[k] + gk15(|s| (-c2 * (gk + gk15(|u| g.derivative(u), lo, s).value)).exp(), lo, r).value
    }

    /// `ψ(r)`.
    pub fn psi(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let top = 2.0 * self.l0;
        match &self.g {
            Some(g) if r <= top => self.c1 * r + self.e_integral(g, r),
            _ => match &self.tail {
                Tail::Linear => self.psi_2l0 + self.dpsi_2l0 * (r - top),
                Tail::Phi2 { phi2, base } => {
                    let rest = phi2.tail_integral(r).unwrap_or(0.0);
                    self.psi_2l0 + self.dpsi_2l0 * phi2.eval(top) * (base - rest)
                }
            },
        }
    }

    /// `ψ'(r)`.
    pub fn dpsi(&self, r: f64) -> f64 {
        let top = 2.0 * self.l0;
        match &self.g {
            Some(g) if r <= top => self.c1 + (-self.c2 * g.eval(r)).exp(),
            _ => match &self.tail {
                Tail::Linear => self.dpsi_2l0,
                Tail::Phi2 { phi2, .. } => self.dpsi_2l0 * phi2.eval(top) / phi2.eval(r),
            },
        }
    }

    /// `ψ''(r)`.
    pub fn d2psi(&self, r: f64) -> f64 {
        let top = 2.0 * self.l0;
        match &self.g {
            Some(g) if r <= top => -self.c2 * g.derivative(r) * (-self.c2 * g.eval(r)).exp(),
            _ => match &self.tail {
                Tail::Linear => 0.0,
                Tail::Phi2 { phi2, .. } => {
                    let p = phi2.eval(r);
                    let dp = match *phi2 {
                        Phi2::Linear { k2 } => k2,
                        Phi2::Power { k2, theta } => k2 * (1.0 + theta) * r.powf(theta),
                        Phi2::Absent => 0.0,
                    };
                    -self.dpsi_2l0 * phi2.eval(top) * dp / (p * p)
                }
            },
        }
    }

    /// The function entering condition C: `ψ` for w1, `a·1_{r>0} + ψ` otherwise.
    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            TestKind::W1 => self.psi(r),
            _ if r > 0.0 => self.a + self.psi(r),
            _ => 0.0,
        }
    }

    /// `sup ψ`: finite only with the `Φ₂` tail.
    pub fn sup(&self) -> f64 {
        match &self.tail {
            Tail::Linear => f64::INFINITY,
            Tail::Phi2 { phi2, base } => self.psi_2l0 + self.dpsi_2l0 * phi2.eval(2.0 * self.l0) * base,
        }
    }

    /// `g(2l₀)` (zero when `l₀ = 0`).
    pub fn g_total(&self) -> f64 {
        self.g.as_ref().map_or(0.0, GFunction::total)
    }

    pub fn psi_2l0(&self) -> f64 {
        self.psi_2l0
    }

    pub fn dpsi_2l0(&self) -> f64 {
        self.dpsi_2l0
    }
}
