//! Element-level nodal analysis, independent of the reduced residual
//! equations: netlists of conductances, independent sources and ideal
//! op-amps, solved by modified nodal analysis.

mod circuits;

pub use circuits::{
    egv_netlist, inv_netlist, mvm_netlist, oracle_egv, oracle_inv, oracle_mvm, CircuitNetlist, SENSE_FEEDBACK,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sparse::{compress, Ordering, SparseLu, TripletBuffer};

/// Node 0 is ground.
pub const GROUND: usize = 0;

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Conductance {
        a: usize,
        b: usize,
        g: f64,
    },
    /// Current injected into `node` from ground.
    CurrentSource {
        node: usize,
        amps: f64,
    },
    /// Ideal source holding `node` at `volts` with respect to ground.
    VoltageSource {
        node: usize,
        volts: f64,
    },
    /// Ideal op-amp: no input current, `V(inp) = V(inn)`, output current free.
    OpAmp {
        inp: usize,
        inn: usize,
        out: usize,
    },
}

#[derive(Clone, Debug, Default)]
pub struct Netlist {
    names: Vec<String>,
    elements: Vec<Element>,
}

#[derive(Clone, Debug)]
pub struct NodalSolution {
    /// Indexed by node id; entry 0 (ground) is zero.
    pub voltages: Vec<f64>,
    /// Current delivered into the circuit by each voltage source, in order.
    pub source_currents: Vec<f64>,
    /// Largest Kirchhoff-current imbalance over the nodes, recomputed from
    /// element currents.
    pub kcl_residual: f64,
    /// Largest violation of an op-amp or voltage-source constraint.
    pub constraint_residual: f64,
}

impl Netlist {
    pub fn new() -> Self {
        Self {
            names: vec!["gnd".to_string()],
            elements: Vec::new(),
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    /// Number of nodes excluding ground.
    pub fn node_count(&self) -> usize {
        self.names.len() - 1
    }

    pub fn node_name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    fn check(&self, node: usize) {
        assert!(node < self.names.len(), "node {node} does not exist");
    }

    pub fn conductance(&mut self, a: usize, b: usize, g: f64) {
        self.check(a);
        self.check(b);
        self.elements.push(Element::Conductance { a, b, g });
    }

    pub fn current_source(&mut self, node: usize, amps: f64) {
        self.check(node);
        self.elements.push(Element::CurrentSource { node, amps });
    }

    pub fn voltage_source(&mut self, node: usize, volts: f64) {
        self.check(node);
        self.elements.push(Element::VoltageSource { node, volts });
    }

    pub fn op_amp(&mut self, inp: usize, inn: usize, out: usize) {
        self.check(inp);
        self.check(inn);
        self.check(out);
        self.elements.push(Element::OpAmp { inp, inn, out });
    }

    /// Human-readable listing, one element per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let name = |k: usize| self.names[k].as_str();
        let _ = writeln!(s, "* {} nodes, {} elements", self.node_count(), self.elements.len());
        for (k, e) in self.elements.iter().enumerate() {
            let _ = match *e {
                Element::Conductance { a, b, g } => writeln!(s, "G{k} {} {} {:.9e}", name(a), name(b), g),
                Element::CurrentSource { node, amps } => writeln!(s, "I{k} gnd {} {:.9e}", name(node), amps),
                Element::VoltageSource { node, volts } => writeln!(s, "V{k} {} gnd {:.9e}", name(node), volts),
                Element::OpAmp { inp, inn, out } => writeln!(s, "E{k} {} {} {}", name(inp), name(inn), name(out)),
            };
        }
        s
    }

    pub fn solve(&self) -> Result<NodalSolution> {
        let nn = self.node_count();
        let mut driven = vec![None::<usize>; nn + 1];
        let mut vsrc = Vec::new();
        for (k, e) in self.elements.iter().enumerate() {
            match *e {
                Element::OpAmp { out, .. } | Element::VoltageSource { node: out, .. } => {
                    if out == GROUND || driven[out].is_some() {
                        return Err(Error::Invalid(format!("node {} is driven twice", self.names[out])));
                    }
                    driven[out] = Some(k);
                    if let Element::VoltageSource { .. } = e {
                        vsrc.push(k);
                    }
                }
                _ => {}
            }
        }
        let dim = nn + vsrc.len();
        let var = |node: usize| node - 1;
        let mut buf = TripletBuffer::new(dim);
        let mut rhs = vec![0.0; dim];
        // KCL rows for every node not driven by an op-amp output
        let kcl_row = |node: usize| -> Option<usize> {
            if node == GROUND {
                return None;
            }
            match driven[node].map(|k| &self.elements[k]) {
                Some(Element::OpAmp { .. }) => None,
                _ => Some(var(node)),
            }
        };
        for e in &self.elements {
            match *e {
                Element::Conductance { a, b, g } => {
                    for (p, q) in [(a, b), (b, a)] {
                        if let Some(r) = kcl_row(p) {
                            buf.push(r, var(p), g);
                            if q != GROUND {
                                buf.push(r, var(q), -g);
                            }
                        }
                    }
                }
                Element::CurrentSource { node, amps } => {
                    if let Some(r) = kcl_row(node) {
                        rhs[r] += amps;
                    }
                }
                _ => {}
            }
        }
        for (s, &k) in vsrc.iter().enumerate() {
            if let Element::VoltageSource { node, .. } = self.elements[k] {
                // source current enters the node: appears with a minus sign
                // in that node's "current leaving" balance
                buf.push(var(node), nn + s, -1.0);
            }
        }
        // constraint rows: voltage sources in their own rows, op-amps in
        // their output node's row
        for (s, &k) in vsrc.iter().enumerate() {
            if let Element::VoltageSource { node, volts } = self.elements[k] {
                buf.push(nn + s, var(node), 1.0);
                rhs[nn + s] = volts;
            }
        }
        for e in &self.elements {
            if let Element::OpAmp { inp, inn, out } = *e {
                let r = var(out);
                if inn != GROUND {
                    buf.push(r, var(inn), 1.0);
                }
                if inp != GROUND {
                    buf.push(r, var(inp), -1.0);
                }
            }
        }
        let a = compress(buf)?;
        let lu = SparseLu::factorize_ordered(&a, &Ordering::NestedDissection)?;
        let x = lu.solve(&rhs)?;
        let mut voltages = vec![0.0; nn + 1];
        voltages[1..].copy_from_slice(&x[..nn]);
        let source_currents = x[nn..].to_vec();
        let (kcl_residual, constraint_residual) = self.check_solution(&voltages, &source_currents, &vsrc);
        Ok(NodalSolution {
            voltages,
            source_currents,
            kcl_residual,
            constraint_residual,
        })
    }

    fn check_solution(&self, v: &[f64], isrc: &[f64], vsrc: &[usize]) -> (f64, f64) {
        let nn = self.node_count();
        let mut net = vec![0.0f64; nn + 1];
        let mut opamp_out = vec![false; nn + 1];
        let mut cons = 0.0f64;
        for e in &self.elements {
            match *e {
                Element::Conductance { a, b, g } => {
                    let i = g * (v[a] - v[b]);
                    net[a] -= i;
                    net[b] += i;
                }
                Element::CurrentSource { node, amps } => net[node] += amps,
                Element::OpAmp { inp, inn, out } => {
                    opamp_out[out] = true;
                    cons = cons.max((v[inp] - v[inn]).abs());
                }
                Element::VoltageSource { node, volts } => cons = cons.max((v[node] - volts).abs()),
            }
        }
        for (s, &k) in vsrc.iter().enumerate() {
            if let Element::VoltageSource { node, .. } = self.elements[k] {
                net[node] += isrc[s];
            }
        }
        let kcl = (1..=nn)
            .filter(|&k| !opamp_out[k])
            .fold(0.0f64, |m, k| m.max(net[k].abs()));
        (kcl, cons)
    }
}
