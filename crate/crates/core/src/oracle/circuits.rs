//! Physical netlists of the three crossbar circuits.
//!
//! Cell `(i, j)` joins row-wire node `R{i}_{j}` to column-wire node
//! `C{i}_{j}`; row segments have conductance `g1`, column segments `g2`.

use super::{Netlist, GROUND};
use crate::error::{check_dim, Error, Result};
use crate::model::CrossbarModel;

/// Feedback conductance of the sense amplifiers in the MVM netlist.
pub const SENSE_FEEDBACK: f64 = 1e-3;
/// Conductance of both resistors of the unity-gain inverters.
const INVERTER_G: f64 = 1e-4;

/// A netlist together with the nodes that carry the circuit outputs.
#[derive(Clone, Debug)]
pub struct CircuitNetlist {
    pub netlist: Netlist,
    pub outputs: Vec<usize>,
}

struct Array {
    row: Vec<Vec<usize>>,
    col: Vec<Vec<usize>>,
}

fn crossbar(net: &mut Netlist, model: &CrossbarModel) -> Array {
    let n = model.n();
    let mut row = vec![vec![0; n]; n];
    let mut col = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            row[i][j] = net.add_node(format!("R{i}_{j}"));
        }
    }
    for i in 0..n {
        for j in 0..n {
            col[i][j] = net.add_node(format!("C{i}_{j}"));
        }
    }
    for i in 0..n {
        for j in 0..n {
            net.conductance(row[i][j], col[i][j], model.g()[(i, j)]);
            if j + 1 < n {
                net.conductance(row[i][j], row[i][j + 1], model.g1());
            }
            if i + 1 < n {
                net.conductance(col[i][j], col[i + 1][j], model.g2());
            }
        }
    }
    Array { row, col }
}

/// Currents `i_in` enter the left row ends; op-amp `i` holds the right end
/// of row `i` at ground potential and drives the bottom of column `i`.
pub fn inv_netlist(model: &CrossbarModel, i_in: &[f64]) -> Result<CircuitNetlist> {
    let n = model.n();
    check_dim("input current length", n, i_in.len())?;
    let mut net = Netlist::new();
    let x = crossbar(&mut net, model);
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n {
        net.current_source(x.row[i][0], i_in[i]);
        let o = net.add_node(format!("O{i}"));
        net.op_amp(GROUND, x.row[i][n - 1], o);
        net.conductance(o, x.col[n - 1][i], model.g2());
        outputs.push(o);
    }
    Ok(CircuitNetlist { netlist: net, outputs })
}

/// Row ends feed transimpedance amplifiers (feedback `g_lambda`) followed by
/// unity inverters; inverter `i >= 1` drives the bottom of column `i`, and
/// column 0 is driven by the source `v0`.
pub fn egv_netlist(model: &CrossbarModel, g_lambda: f64, v0: f64) -> Result<CircuitNetlist> {
    let n = model.n();
    let mut net = Netlist::new();
    let x = crossbar(&mut net, model);
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n {
        let t = net.add_node(format!("T{i}"));
        let o = net.add_node(format!("O{i}"));
        let m = net.add_node(format!("X{i}"));
        let q = net.add_node(format!("Q{i}"));
        net.conductance(x.row[i][n - 1], t, model.g1());
        net.op_amp(GROUND, t, o);
        net.conductance(t, o, g_lambda);
        net.conductance(o, m, INVERTER_G);
        net.conductance(m, q, INVERTER_G);
        net.op_amp(GROUND, m, q);
        if i > 0 {
            net.conductance(q, x.col[n - 1][i], model.g2());
        }
        outputs.push(q);
    }
    let s = net.add_node("S0");
    net.voltage_source(s, v0);
    net.conductance(s, x.col[n - 1][0], model.g2());
    Ok(CircuitNetlist { netlist: net, outputs })
}

/// Voltages `v_in` drive the left row ends through one row segment; column
/// bottoms feed virtual-ground sense amplifiers through one column segment.
/// Outputs are the sense-amplifier voltages; the sensed current of column
/// `j` is `-SENSE_FEEDBACK * V(out_j)`.
pub fn mvm_netlist(model: &CrossbarModel, v_in: &[f64]) -> Result<CircuitNetlist> {
    let n = model.n();
    check_dim("input voltage length", n, v_in.len())?;
    let mut net = Netlist::new();
    let x = crossbar(&mut net, model);
    for i in 0..n {
        let s = net.add_node(format!("S{i}"));
        net.voltage_source(s, v_in[i]);
        net.conductance(s, x.row[i][0], model.g1());
    }
    let mut outputs = Vec::with_capacity(n);
    for j in 0..n {
        let t = net.add_node(format!("T{j}"));
        let o = net.add_node(format!("O{j}"));
        net.conductance(x.col[n - 1][j], t, model.g2());
        net.op_amp(GROUND, t, o);
        net.conductance(t, o, SENSE_FEEDBACK);
        outputs.push(o);
    }
    Ok(CircuitNetlist { netlist: net, outputs })
}

fn solve_outputs(c: &CircuitNetlist) -> Result<Vec<f64>> {
    let sol = c.netlist.solve()?;
    let scale = sol.voltages.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sol.constraint_residual > 1e-9 * scale.max(1.0) {
        return Err(Error::Degenerate(format!(
            "nodal solution violates constraints by {:e}",
            sol.constraint_residual
        )));
    }
    Ok(c.outputs.iter().map(|&k| sol.voltages[k]).collect())
}

/// Op-amp output voltages of the INV netlist.
pub fn oracle_inv(model: &CrossbarModel, i_in: &[f64]) -> Result<Vec<f64>> {
    solve_outputs(&inv_netlist(model, i_in)?)
}

/// Inverter output voltages of the EGV netlist.
pub fn oracle_egv(model: &CrossbarModel, g_lambda: f64, v0: f64) -> Result<Vec<f64>> {
    solve_outputs(&egv_netlist(model, g_lambda, v0)?)
}

/// Sensed column currents of the MVM netlist.
pub fn oracle_mvm(model: &CrossbarModel, v_in: &[f64]) -> Result<Vec<f64>> {
    Ok(solve_outputs(&mvm_netlist(model, v_in)?)?
        .into_iter()
        .map(|v| -SENSE_FEEDBACK * v)
        .collect())
}
