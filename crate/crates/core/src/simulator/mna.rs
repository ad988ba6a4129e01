//! Fixed-step transient engine: modified nodal analysis with trapezoidal
//! companion models and two-state resistive diodes.
//!
//! The system matrix depends only on the diode states (and on whether the
//! step uses the backward-Euler start-up companions), so LU factors are cached
//! per state pattern and each step costs one forward/back substitution per
//! switch iteration.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::error::{Error, Result};

/// Node handle; `GROUND` is the reference node.
pub(crate) type Node = usize;
pub(crate) const GROUND: Node = 0;

/// Bucket a dissipative element is accounted under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loss {
    Load,
    Filter,
}

#[derive(Debug, Clone)]
struct Resistor {
    a: Node,
    b: Node,
    g: f64,
    loss: Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Storage {
    Inductor,
    Capacitor,
}

#[derive(Debug, Clone)]
struct Reactive {
    a: Node,
    b: Node,
    value: f64,
    kind: Storage,
    /// Branch voltage and current at the last accepted step.
    v: f64,
    i: f64,
}

#[derive(Debug, Clone)]
struct Diode {
    anode: Node,
    cathode: Node,
    on: bool,
}

#[derive(Debug, Clone)]
struct Source {
    p: Node,
    n: Node,
    amplitude: f64,
    omega: f64,
    phase: f64,
}

/// Linear network plus diodes, before time discretisation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Circuit {
    n_nodes: usize,
    resistors: Vec<Resistor>,
    reactives: Vec<Reactive>,
    diodes: Vec<Diode>,
    sources: Vec<Source>,
}

/// Index of an inductor or capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ReactiveId(usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ResistorId(usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DiodeId(usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SourceId(usize);

impl Circuit {
    pub(crate) fn new() -> Self {
        Circuit::default()
    }

    pub(crate) fn node(&mut self) -> Node {
        self.n_nodes += 1;
        self.n_nodes
    }

    pub(crate) fn resistor(&mut self, a: Node, b: Node, ohms: f64, loss: Loss) -> ResistorId {
        self.resistors.push(Resistor { a, b, g: 1.0 / ohms, loss });
        ResistorId(self.resistors.len() - 1)
    }

    pub(crate) fn inductor(&mut self, a: Node, b: Node, henries: f64) -> ReactiveId {
        self.reactive(a, b, henries, Storage::Inductor)
    }

    pub(crate) fn capacitor(&mut self, a: Node, b: Node, farads: f64) -> ReactiveId {
        self.reactive(a, b, farads, Storage::Capacitor)
    }

    fn reactive(&mut self, a: Node, b: Node, value: f64, kind: Storage) -> ReactiveId {
        self.reactives.push(Reactive {
            a,
            b,
            value,
            kind,
            v: 0.0,
            i: 0.0,
        });
        ReactiveId(self.reactives.len() - 1)
    }

    pub(crate) fn diode(&mut self, anode: Node, cathode: Node) -> DiodeId {
        self.diodes.push(Diode {
            anode,
            cathode,
            on: false,
        });
        DiodeId(self.diodes.len() - 1)
    }

    /// Sinusoidal source `amplitude · sin(ωt + phase)` from `n` to `p`.
    pub(crate) fn sine_source(
        &mut self,
        p: Node,
        n: Node,
        amplitude: f64,
        omega: f64,
        phase: f64,
    ) -> SourceId {
        self.sources.push(Source {
            p,
            n,
            amplitude,
            omega,
            phase,
        });
        SourceId(self.sources.len() - 1)
    }
}

/// Result of advancing one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct StepOutcome {
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Transient {
    c: Circuit,
    dt: f64,
    ron: f64,
    roff: f64,
    step: usize,
    x: DVector<f64>,
    factors: HashMap<u64, LU<f64, Dyn, Dyn>>,
    rhs: DVector<f64>,
}

impl Transient {
    pub(crate) fn new(circuit: Circuit, dt: f64, ron: f64, roff: f64) -> Result<Self> {
        if circuit.diodes.len() > 62 {
            return Err(Error::Config("at most 62 diodes are supported".into()));
        }
        let dim = circuit.n_nodes + circuit.sources.len();
        Ok(Transient {
            c: circuit,
            dt,
            ron,
            roff,
            step: 0,
            x: DVector::zeros(dim),
            factors: HashMap::new(),
            rhs: DVector::zeros(dim),
        })
    }

    pub(crate) fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    fn dim(&self) -> usize {
        self.c.n_nodes + self.c.sources.len()
    }

    /// Backward Euler on the first step (no consistent initial branch
    /// voltages are available), trapezoidal afterwards.
    fn startup(&self) -> bool {
        self.step == 0
    }

    fn companion_g(&self, r: &Reactive, startup: bool) -> f64 {
        match (r.kind, startup) {
            (Storage::Inductor, false) => self.dt / (2.0 * r.value),
            (Storage::Inductor, true) => self.dt / r.value,
            (Storage::Capacitor, false) => 2.0 * r.value / self.dt,
            (Storage::Capacitor, true) => r.value / self.dt,
        }
    }

    /// History current source of a companion: `i_{n+1} = g·v_{n+1} + i_eq`.
    fn companion_ieq(&self, r: &Reactive, g: f64, startup: bool) -> f64 {
        match (r.kind, startup) {
            (Storage::Inductor, false) => r.i + g * r.v,
            (Storage::Inductor, true) => r.i,
            (Storage::Capacitor, false) => -(g * r.v + r.i),
            (Storage::Capacitor, true) => -g * r.v,
        }
    }

    fn state_key(&self, startup: bool) -> u64 {
        let mut key = u64::from(startup) << 63;
        for (k, d) in self.c.diodes.iter().enumerate() {
            if d.on {
                key |= 1 << k;
            }
        }
        key
    }

    fn assemble(&self, startup: bool) -> DMatrix<f64> {
        let dim = self.dim();
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut stamp_g = |p: Node, q: Node, g: f64| {
            if p != GROUND {
                a[(p - 1, p - 1)] += g;
            }
            if q != GROUND {
                a[(q - 1, q - 1)] += g;
            }
            if p != GROUND && q != GROUND {
                a[(p - 1, q - 1)] -= g;
                a[(q - 1, p - 1)] -= g;
            }
        };
        for r in &self.c.resistors {
            stamp_g(r.a, r.b, r.g);
        }
        for r in &self.c.reactives {
            stamp_g(r.a, r.b, self.companion_g(r, startup));
        }
        for d in &self.c.diodes {
            let g = if d.on { 1.0 / self.ron } else { 1.0 / self.roff };
            stamp_g(d.anode, d.cathode, g);
        }
        for (k, s) in self.c.sources.iter().enumerate() {
            let row = self.c.n_nodes + k;
            if s.p != GROUND {
                a[(s.p - 1, row)] += 1.0;
                a[(row, s.p - 1)] += 1.0;
            }
            if s.n != GROUND {
                a[(s.n - 1, row)] -= 1.0;
                a[(row, s.n - 1)] -= 1.0;
            }
        }
        a
    }

    fn build_rhs(&mut self, t: f64, startup: bool) {
        self.rhs.fill(0.0);
        for k in 0..self.c.reactives.len() {
            let r = &self.c.reactives[k];
            let g = self.companion_g(r, startup);
            let ieq = self.companion_ieq(r, g, startup);
            if r.a != GROUND {
                self.rhs[r.a - 1] -= ieq;
            }
            if r.b != GROUND {
                self.rhs[r.b - 1] += ieq;
            }
        }
        for (k, s) in self.c.sources.iter().enumerate() {
            self.rhs[self.c.n_nodes + k] = s.amplitude * (s.omega * t + s.phase).sin();
        }
    }

    fn solve(&mut self, startup: bool, step_index: usize) -> Result<DVector<f64>> {
        let key = self.state_key(startup);
        if !self.factors.contains_key(&key) {
            let lu = self.assemble(startup).lu();
            if !lu.is_invertible() {
                return Err(Error::Solver {
                    step: step_index,
                    reason: "singular system matrix".into(),
                });
            }
            self.factors.insert(key, lu);
        }
        let lu = &self.factors[&key];
        let x = lu.solve(&self.rhs).ok_or_else(|| Error::Solver {
            step: step_index,
            reason: "singular system matrix".into(),
        })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                step: step_index,
                reason: "non-finite solution".into(),
            });
        }
        Ok(x)
    }

    fn volt(x: &DVector<f64>, n: Node) -> f64 {
        if n == GROUND {
            0.0
        } else {
            x[n - 1]
        }
    }

    /// Advances one step of `dt`, iterating on diode states until they are
    /// self-consistent or `max_iterations` solves have been spent.
    pub(crate) fn advance(&mut self, max_iterations: usize) -> Result<StepOutcome> {
        let startup = self.startup();
        let step_index = self.step + 1;
        let t = (self.step + 1) as f64 * self.dt;
        self.build_rhs(t, startup);
        let mut iterations = 0;
        let mut converged = false;
        let mut x;
        loop {
            x = self.solve(startup, step_index)?;
            iterations += 1;
            let mut changed = false;
            let mut next = Vec::with_capacity(self.c.diodes.len());
            for d in &self.c.diodes {
                let v = Self::volt(&x, d.anode) - Self::volt(&x, d.cathode);
                let on = if d.on { v / self.ron >= 0.0 } else { v > 0.0 };
                changed |= on != d.on;
                next.push(on);
            }
            if !changed {
                converged = true;
                break;
            }
            if iterations >= max_iterations {
                break;
            }
            for (d, on) in self.c.diodes.iter_mut().zip(next) {
                d.on = on;
            }
        }
        // commit companion states
        for k in 0..self.c.reactives.len() {
            let r = &self.c.reactives[k];
            let g = self.companion_g(r, startup);
            let ieq = self.companion_ieq(r, g, startup);
            let v = Self::volt(&x, r.a) - Self::volt(&x, r.b);
            let i = g * v + ieq;
            let r = &mut self.c.reactives[k];
            r.v = v;
            r.i = i;
        }
        self.x = x;
        self.step += 1;
        Ok(StepOutcome {
            iterations,
            converged,
        })
    }

    // ---- probes (valid for the last accepted step) ----

    pub(crate) fn node_voltage(&self, n: Node) -> f64 {
        Self::volt(&self.x, n)
    }

    pub(crate) fn reactive_current(&self, id: ReactiveId) -> f64 {
        self.c.reactives[id.0].i
    }

    #[cfg(test)]
    pub(crate) fn reactive_voltage(&self, id: ReactiveId) -> f64 {
        self.c.reactives[id.0].v
    }

    pub(crate) fn resistor_current(&self, id: ResistorId) -> f64 {
        let r = &self.c.resistors[id.0];
        (self.node_voltage(r.a) - self.node_voltage(r.b)) * r.g
    }

    fn diode_conductance(&self, d: &Diode) -> f64 {
        if d.on {
            1.0 / self.ron
        } else {
            1.0 / self.roff
        }
    }

    pub(crate) fn diode_current(&self, id: DiodeId) -> f64 {
        let d = &self.c.diodes[id.0];
        (self.node_voltage(d.anode) - self.node_voltage(d.cathode)) * self.diode_conductance(d)
    }

    pub(crate) fn source_voltage(&self, id: SourceId) -> f64 {
        let s = &self.c.sources[id.0];
        s.amplitude * (s.omega * self.time() + s.phase).sin()
    }

    /// Current delivered out of the source's positive terminal.
    pub(crate) fn source_current(&self, id: SourceId) -> f64 {
        -self.x[self.c.n_nodes + id.0]
    }

    /// Instantaneous power balance terms at the last accepted step.
    pub(crate) fn power_sample(&self) -> PowerSample {
        let mut s = PowerSample::default();
        for k in 0..self.c.sources.len() {
            let id = SourceId(k);
            s.source_w += self.source_voltage(id) * self.source_current(id);
        }
        for r in &self.c.resistors {
            let v = self.node_voltage(r.a) - self.node_voltage(r.b);
            let p = v * v * r.g;
            match r.loss {
                Loss::Load => s.load_w += p,
                Loss::Filter => s.filter_w += p,
            }
        }
        for d in &self.c.diodes {
            let v = self.node_voltage(d.anode) - self.node_voltage(d.cathode);
            s.diode_w += v * v * self.diode_conductance(d);
        }
        for r in &self.c.reactives {
            s.stored_j += match r.kind {
                Storage::Inductor => 0.5 * r.value * r.i * r.i,
                Storage::Capacitor => 0.5 * r.value * r.v * r.v,
            };
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PowerSample {
    pub source_w: f64,
    pub load_w: f64,
    pub filter_w: f64,
    pub diode_w: f64,
    pub stored_j: f64,
}
