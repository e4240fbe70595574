//! Switched linear state-space model of the converter.
//!
//! # Topology
//!
//! Two boost legs share the source: `v_in -- L1 -- a -- S1 -- gnd` and
//! `v_in -- L2 -- b -- S2 -- gnd`. The switch nodes drive a four-stage
//! diode-capacitor multiplier ladder:
//!
//! ```text
//!   a --D1--> n1   C1: n1 -> b
//!   n1 --D2--> n2  C2: n2 -> a
//!   n2 --D3--> n3  C3: n3 -> b
//!   n3 --D4--> o   C4: o  -> gnd   (load R and optional c_out also at o)
//! ```
//!
//! With 180-degree interleaved gates each off-going switch node is clamped to
//! `v_in/(1-D)` by the ladder, the capacitors settle one clamp level apart,
//! and the output capacitor carries `4*v_in/(1-D)`. Every diode blocks twice
//! the switch stress at its worst point.
//!
//! # Modes
//!
//! * Mode I (S1, S2 on): both legs charge from the source, every diode
//!   blocks, C4 alone feeds the load.
//! * Mode II (S2 on): leg-1 current splits at `a` into D1 (charging C1) and
//!   the C2 -> D3 -> C3 chain (discharging C2, charging C3).
//! * Mode III (S1 on): leg-2 current splits at `b` into the C1 -> D2 -> C2
//!   chain (discharging C1, charging C2) and the C3 -> D4 chain feeding the
//!   output (discharging C3, charging C4).
//!
//! # Ideal-capacitor loops
//!
//! With zero ESR the conducting branches of Modes II and III close
//! zero-resistance capacitor loops, so the mode dynamics live on a linear
//! constraint manifold (Mode II: `v3 = v1 + v2`; Mode III:
//! `v2 - v1 = v4 - v3`). Crossing into such a mode from an inconsistent
//! state redistributes charge instantaneously; the model carries that
//! redistribution as a charge-conserving linear projection applied on mode
//! entry, and reports the charge it moves through each conducting diode so
//! device averages stay exact. Any nonzero ESR (Mode III: ESR or switch
//! resistance) breaks the loop and the same equations become ordinary stiff
//! dynamics with no projection.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ConverterParams;
use crate::schedule::Mode;

/// State vector layout.
pub const STATE_IL1: usize = 0;
pub const STATE_IL2: usize = 1;
pub const STATE_VC1: usize = 2;
pub const STATE_VC2: usize = 3;
pub const STATE_VC3: usize = 4;
pub const STATE_VC4: usize = 5;
pub const STATE_VCOUT: usize = 6;

/// Observer names every mode must provide (the waveform CSV contract minus
/// the raw state columns).
pub const REQUIRED_OBSERVERS: [&str; 12] = [
    "vout", "iin", "vsw1", "vsw2", "vd1", "vd2", "vd3", "vd4", "id1", "id2", "id3", "id4",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SwitchId {
    S1,
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiodeId {
    D1,
    D2,
    D3,
    D4,
}

impl DiodeId {
    pub const ALL: [DiodeId; 4] = [DiodeId::D1, DiodeId::D2, DiodeId::D3, DiodeId::D4];

    pub fn index(self) -> usize {
        match self {
            DiodeId::D1 => 0,
            DiodeId::D2 => 1,
            DiodeId::D3 => 2,
            DiodeId::D4 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiodeId::D1 => "D1",
            DiodeId::D2 => "D2",
            DiodeId::D3 => "D3",
            DiodeId::D4 => "D4",
        }
    }
}

/// Affine form `w . x + k` over the state vector. Mode observers and the
/// per-mode branch-current solutions are all of this shape.
#[derive(Debug, Clone)]
pub struct LinForm {
    pub w: DVector<f64>,
    pub k: f64,
}

impl LinForm {
    pub fn zero(n: usize) -> Self {
        Self {
            w: DVector::zeros(n),
            k: 0.0,
        }
    }

    pub fn state(n: usize, index: usize) -> Self {
        let mut w = DVector::zeros(n);
        w[index] = 1.0;
        Self { w, k: 0.0 }
    }

    pub fn constant(n: usize, k: f64) -> Self {
        Self {
            w: DVector::zeros(n),
            k,
        }
    }

    pub fn times(&self, s: f64) -> Self {
        Self {
            w: &self.w * s,
            k: self.k * s,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.w.dot(x) + self.k
    }

    /// Rewrites the form to act on the pre-map state: `self(P x)`.
    fn compose(&self, p: &DMatrix<f64>) -> Self {
        Self {
            w: p.transpose() * &self.w,
            k: self.k,
        }
    }
}

impl std::ops::Add for LinForm {
    type Output = LinForm;
    fn add(self, rhs: LinForm) -> LinForm {
        LinForm {
            w: self.w + rhs.w,
            k: self.k + rhs.k,
        }
    }
}

impl std::ops::Sub for LinForm {
    type Output = LinForm;
    fn sub(self, rhs: LinForm) -> LinForm {
        LinForm {
            w: self.w - rhs.w,
            k: self.k - rhs.k,
        }
    }
}

/// Linear dynamics and observation maps of one conduction configuration:
/// `dx/dt = a x + b_vin * v_in + b_const`.
#[derive(Debug, Clone)]
pub struct ModeDynamics {
    pub mode: Mode,
    pub a: DMatrix<f64>,
    pub b_vin: DVector<f64>,
    pub b_const: DVector<f64>,
    /// Charge-conserving state map applied when the schedule enters this
    /// mode (identity unless an ideal capacitor loop needs resolving).
    pub entry_projection: DMatrix<f64>,
    /// Charge moved through each conducting diode by the entry projection,
    /// as a form over the pre-projection state (coulombs).
    pub entry_transfer: Vec<(DiodeId, LinForm)>,
    /// Named signal maps (device voltages/currents, output voltage, ...).
    pub observers: Vec<(String, LinForm)>,
    pub switches_on: Vec<SwitchId>,
    pub diodes_on: Vec<DiodeId>,
}

impl ModeDynamics {
    pub fn observer(&self, name: &str) -> Option<&LinForm> {
        self.observers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
    }
}

/// The full per-mode switched model over state
/// `[i_L1, i_L2, v_C1, v_C2, v_C3, v_C4 (, v_Cout)]`.
#[derive(Debug, Clone)]
pub struct SwitchedModel {
    pub state_dim: usize,
    pub state_names: Vec<String>,
    /// Indexed by [`Mode::index`].
    pub modes: Vec<ModeDynamics>,
    pub params: ConverterParams,
}

impl SwitchedModel {
    pub fn mode(&self, mode: Mode) -> &ModeDynamics {
        &self.modes[mode.index()]
    }

    /// Analytic estimate of the periodic steady state, used as a warm start:
    /// ladder capacitors one clamp level apart, inductors at their average.
    pub fn preload_state(&self) -> DVector<f64> {
        let p = &self.params;
        let u = p.v_in / (1.0 - p.duty);
        let v_out = 4.0 * u;
        let i_out = if p.r_load.is_finite() {
            v_out / p.r_load
        } else {
            0.0
        };
        let i_l = 2.0 * i_out / (1.0 - p.duty);
        let mut x = DVector::zeros(self.state_dim);
        x[STATE_IL1] = i_l;
        x[STATE_IL2] = i_l;
        x[STATE_VC1] = u;
        x[STATE_VC2] = 2.0 * u;
        x[STATE_VC3] = 3.0 * u;
        x[STATE_VC4] = v_out;
        if self.state_dim > STATE_VCOUT {
            x[STATE_VCOUT] = v_out;
        }
        x
    }
}

/// Expected conduction sets per mode.
fn expected_sets(mode: Mode) -> (Vec<SwitchId>, Vec<DiodeId>) {
    match mode {
        Mode::I => (vec![SwitchId::S1, SwitchId::S2], vec![]),
        Mode::II => (vec![SwitchId::S2], vec![DiodeId::D1, DiodeId::D3]),
        Mode::III => (vec![SwitchId::S1], vec![DiodeId::D2, DiodeId::D4]),
    }
}

struct Ctx {
    n: usize,
    p: ConverterParams,
    /// Load conductance; zero models the no-load limit.
    g: f64,
}

impl Ctx {
    fn lf(&self) -> impl Fn(usize) -> LinForm + '_ {
        let n = self.n;
        move |i| LinForm::state(n, i)
    }

    /// Effective output-node capacitance (C4 plus any parallel c_out).
    fn c44(&self) -> f64 {
        self.p.c4 + self.p.c_out
    }
}

/// Output-node solve: given the injected ladder current `j` (zero outside
/// Mode III), returns `(v_o, i_c4, i_cout)` as forms over the state.
fn output_node(ctx: &Ctx, j: &LinForm) -> (LinForm, LinForm, Option<LinForm>) {
    let eps = ctx.p.parasitics.esr;
    let g = ctx.g;
    let v4 = LinForm::state(ctx.n, STATE_VC4);
    if ctx.p.c_out == 0.0 {
        // v_o = (v4 + eps j) / (1 + eps g); i_c4 = j - g v_o
        let v_o = (v4 + j.times(eps)).times(1.0 / (1.0 + eps * g));
        let i_c4 = j.clone() - v_o.times(g);
        (v_o, i_c4, None)
    } else if eps > 0.0 {
        let v5 = LinForm::state(ctx.n, STATE_VCOUT);
        // i_c4 (2 + g eps) = j - g v4 - (v4 - v5)/eps
        let diff = (v4.clone() - v5).times(1.0 / eps);
        let i_c4 = (j.clone() - v4.times(g) - diff.clone()).times(1.0 / (2.0 + g * eps));
        let i_c5 = i_c4.clone() + diff;
        let v_o = v4 + i_c4.times(eps);
        (v_o, i_c4, Some(i_c5))
    } else {
        // Zero ESR keeps the pair at a common voltage; currents split by
        // capacitance (the entry projection equalizes any mismatch).
        let total = j.clone() - v4.times(g);
        let c44 = ctx.c44();
        let i_c4 = total.times(ctx.p.c4 / c44);
        let i_c5 = total.times(ctx.p.c_out / c44);
        (v4, i_c4, Some(i_c5))
    }
}

/// Equalization of the zero-ESR parallel output pair, folded into every
/// mode's entry projection when c_out is present.
fn output_pair_projection(ctx: &Ctx) -> DMatrix<f64> {
    let mut p = DMatrix::identity(ctx.n, ctx.n);
    if ctx.p.c_out > 0.0 && ctx.p.parasitics.esr == 0.0 {
        let c44 = ctx.c44();
        for row in [STATE_VC4, STATE_VCOUT] {
            p[(row, row)] = 0.0;
            p[(row, STATE_VC4)] = ctx.p.c4 / c44;
            p[(row, STATE_VCOUT)] = ctx.p.c_out / c44;
        }
    }
    p
}

struct ModeParts {
    derivs: Vec<LinForm>,
    b_vin: DVector<f64>,
    observers: Vec<(String, LinForm)>,
    entry_projection: DMatrix<f64>,
    entry_transfer: Vec<(DiodeId, LinForm)>,
}

fn assemble(ctx: &Ctx, mode: Mode, parts: ModeParts) -> ModeDynamics {
    let n = ctx.n;
    let mut a = DMatrix::zeros(n, n);
    let mut b_const = DVector::zeros(n);
    for (row, d) in parts.derivs.iter().enumerate() {
        for col in 0..n {
            a[(row, col)] = d.w[col];
        }
        b_const[row] = d.k;
    }
    let (switches_on, diodes_on) = expected_sets(mode);
    ModeDynamics {
        mode,
        a,
        b_vin: parts.b_vin,
        b_const,
        entry_projection: parts.entry_projection,
        entry_transfer: parts.entry_transfer,
        observers: parts.observers,
        switches_on,
        diodes_on,
    }
}

/// Shared observer bookkeeping: node potentials and diode voltages are
/// definitional (`v(n1) = v_b + v_C1 + esr*i_C1`, ...), so the same
/// construction serves every mode once the branch currents are known.
#[allow(clippy::too_many_arguments)]
fn common_observers(
    ctx: &Ctx,
    v_a: &LinForm,
    v_b: &LinForm,
    v_o: &LinForm,
    ic: [&LinForm; 3],
    ic4: &LinForm,
    ic5: Option<&LinForm>,
    id: [&LinForm; 4],
    is: [&LinForm; 2],
) -> Vec<(String, LinForm)> {
    let s = ctx.lf();
    let eps = ctx.p.parasitics.esr;
    let n1 = v_b.clone() + s(STATE_VC1) + ic[0].times(eps);
    let n2 = v_a.clone() + s(STATE_VC2) + ic[1].times(eps);
    let n3 = v_b.clone() + s(STATE_VC3) + ic[2].times(eps);
    let mut obs = vec![
        ("vout".to_string(), v_o.clone()),
        ("iin".to_string(), s(STATE_IL1) + s(STATE_IL2)),
        ("vsw1".to_string(), v_a.clone()),
        ("vsw2".to_string(), v_b.clone()),
        ("vd1".to_string(), v_a.clone() - n1.clone()),
        ("vd2".to_string(), n1 - n2.clone()),
        ("vd3".to_string(), n2 - n3.clone()),
        ("vd4".to_string(), n3 - v_o.clone()),
        ("id1".to_string(), id[0].clone()),
        ("id2".to_string(), id[1].clone()),
        ("id3".to_string(), id[2].clone()),
        ("id4".to_string(), id[3].clone()),
        ("is1".to_string(), is[0].clone()),
        ("is2".to_string(), is[1].clone()),
        ("ic1".to_string(), ic[0].clone()),
        ("ic2".to_string(), ic[1].clone()),
        ("ic3".to_string(), ic[2].clone()),
        ("ic4".to_string(), ic4.clone()),
    ];
    if let Some(i5) = ic5 {
        obs.push(("icout".to_string(), i5.clone()));
    }
    obs
}

fn build_mode_i(ctx: &Ctx) -> ModeDynamics {
    let s = ctx.lf();
    let n = ctx.n;
    let pr = &ctx.p.parasitics;
    let zero = LinForm::zero(n);

    let v_a = s(STATE_IL1).times(pr.r_ds_on);
    let v_b = s(STATE_IL2).times(pr.r_ds_on);
    let (v_o, i_c4, i_c5) = output_node(ctx, &zero);

    let mut derivs = vec![LinForm::zero(n); n];
    derivs[STATE_IL1] = (s(STATE_IL1).times(-(pr.dcr)) - v_a.clone()).times(1.0 / ctx.p.l1);
    derivs[STATE_IL2] = (s(STATE_IL2).times(-(pr.dcr)) - v_b.clone()).times(1.0 / ctx.p.l2);
    derivs[STATE_VC4] = i_c4.times(1.0 / ctx.p.c4);
    if let Some(i5) = &i_c5 {
        derivs[STATE_VCOUT] = i5.times(1.0 / ctx.p.c_out);
    }
    let mut b_vin = DVector::zeros(n);
    b_vin[STATE_IL1] = 1.0 / ctx.p.l1;
    b_vin[STATE_IL2] = 1.0 / ctx.p.l2;

    let is1 = s(STATE_IL1);
    let is2 = s(STATE_IL2);
    let observers = common_observers(
        ctx,
        &v_a,
        &v_b,
        &v_o,
        [&zero, &zero, &zero],
        &i_c4,
        i_c5.as_ref(),
        [&zero, &zero, &zero, &zero],
        [&is1, &is2],
    );

    assemble(
        ctx,
        Mode::I,
        ModeParts {
            derivs,
            b_vin,
            observers,
            entry_projection: output_pair_projection(ctx),
            entry_transfer: vec![],
        },
    )
}

fn build_mode_ii(ctx: &Ctx) -> ModeDynamics {
    let s = ctx.lf();
    let n = ctx.n;
    let p = &ctx.p;
    let pr = &p.parasitics;
    let eps = pr.esr;
    let zero = LinForm::zero(n);

    // Transfer current through the C2 -> D3 -> C3 chain. Zero ESR closes the
    // C1/C2/C3 loop; the split then follows from preserving v3 = v1 + v2.
    let jt = if eps > 0.0 {
        (s(STATE_VC1) + s(STATE_VC2) - s(STATE_VC3) + s(STATE_IL1).times(eps))
            .times(1.0 / (3.0 * eps))
    } else {
        let s3 = 1.0 / p.c1 + 1.0 / p.c2 + 1.0 / p.c3;
        s(STATE_IL1).times((1.0 / p.c1) / s3)
    };
    let j1 = s(STATE_IL1) - jt.clone();

    let v_b = (s(STATE_IL1) + s(STATE_IL2)).times(pr.r_ds_on);
    let v_a = LinForm::constant(n, pr.v_f) + s(STATE_VC1) + j1.times(eps) + v_b.clone();
    let (v_o, i_c4, i_c5) = output_node(ctx, &zero);

    let mut derivs = vec![LinForm::zero(n); n];
    derivs[STATE_IL1] = (s(STATE_IL1).times(-(pr.dcr)) - v_a.clone()).times(1.0 / p.l1);
    derivs[STATE_IL2] = ((s(STATE_IL2).times(-(pr.dcr))) - v_b.clone()).times(1.0 / p.l2);
    derivs[STATE_VC1] = j1.times(1.0 / p.c1);
    derivs[STATE_VC2] = jt.times(-1.0 / p.c2);
    derivs[STATE_VC3] = jt.times(1.0 / p.c3);
    derivs[STATE_VC4] = i_c4.times(1.0 / p.c4);
    if let Some(i5) = &i_c5 {
        derivs[STATE_VCOUT] = i5.times(1.0 / p.c_out);
    }
    let mut b_vin = DVector::zeros(n);
    b_vin[STATE_IL1] = 1.0 / p.l1;
    b_vin[STATE_IL2] = 1.0 / p.l2;

    let ic1 = j1.clone();
    let ic2 = jt.times(-1.0);
    let ic3 = jt.clone();
    let is2 = s(STATE_IL1) + s(STATE_IL2);
    let observers = common_observers(
        ctx,
        &v_a,
        &v_b,
        &v_o,
        [&ic1, &ic2, &ic3],
        &i_c4,
        i_c5.as_ref(),
        [&j1, &zero, &jt, &zero],
        [&zero, &is2],
    );

    // Entry projection for the zero-ESR capacitor loop: closes the residual
    // r = v3 - v2 - v1 by circulating the loop charge G r.
    let p_eq = output_pair_projection(ctx);
    let mut entry_projection = p_eq.clone();
    let mut entry_transfer = vec![];
    if eps == 0.0 {
        let g_loop = 1.0 / (1.0 / p.c1 + 1.0 / p.c2 + 1.0 / p.c3);
        let mut proj = DMatrix::identity(n, n);
        let mut rvec = DVector::zeros(n);
        rvec[STATE_VC1] = -1.0;
        rvec[STATE_VC2] = -1.0;
        rvec[STATE_VC3] = 1.0;
        for (row, gain) in [
            (STATE_VC1, g_loop / p.c1),
            (STATE_VC2, g_loop / p.c2),
            (STATE_VC3, -g_loop / p.c3),
        ] {
            for col in 0..n {
                proj[(row, col)] += gain * rvec[col];
            }
        }
        entry_projection = proj * &p_eq;
        let r_form = LinForm { w: rvec, k: 0.0 }.compose(&p_eq);
        entry_transfer.push((DiodeId::D1, r_form.times(g_loop)));
        entry_transfer.push((DiodeId::D3, r_form.times(-g_loop)));
    }

    assemble(
        ctx,
        Mode::II,
        ModeParts {
            derivs,
            b_vin,
            observers,
            entry_projection,
            entry_transfer,
        },
    )
}

fn build_mode_iii(ctx: &Ctx) -> ModeDynamics {
    let s = ctx.lf();
    let n = ctx.n;
    let p = &ctx.p;
    let pr = &p.parasitics;
    let eps = pr.esr;
    let rho = pr.r_ds_on;
    let g = ctx.g;
    let zero = LinForm::zero(n);

    // Output-node response to the D4 injection: v_o = alpha * jq + beta(x).
    let v4 = s(STATE_VC4);
    let (alpha, beta) = if p.c_out == 0.0 {
        (eps / (1.0 + eps * g), v4.times(1.0 / (1.0 + eps * g)))
    } else if eps > 0.0 {
        let den = 2.0 + g * eps;
        let diff = s(STATE_VC4) - s(STATE_VCOUT);
        (
            eps / den,
            v4.clone() + (v4.times(-g * eps) - diff).times(1.0 / den),
        )
    } else {
        (0.0, v4.clone())
    };

    // Branch solve: jp discharges C1 into C2 through D2, jq discharges C3
    // into the output through D4, jp + jq = i_L2. The loop through S1 and
    // the output node is resistive whenever ESR or switch resistance is
    // nonzero; otherwise the split preserves v2 - v1 = v4 - v3.
    let den3 = rho + 3.0 * eps + alpha;
    let jq = if den3 > 0.0 {
        ((s(STATE_IL1) + s(STATE_IL2)).times(rho) + s(STATE_IL2).times(2.0 * eps) + s(STATE_VC2)
            - s(STATE_VC1)
            + s(STATE_VC3)
            - beta)
            .times(1.0 / den3)
    } else {
        let c44 = ctx.c44();
        let s4 = 1.0 / p.c1 + 1.0 / p.c2 + 1.0 / p.c3 + 1.0 / c44;
        (s(STATE_IL2).times(1.0 / p.c1 + 1.0 / p.c2) + s(STATE_VC4).times(g / c44)).times(1.0 / s4)
    };
    let jp = s(STATE_IL2) - jq.clone();

    let v_a = (s(STATE_IL1) + jp.clone()).times(rho);
    let v_b = v_a.clone() + s(STATE_VC2) - s(STATE_VC1)
        + jp.times(2.0 * eps)
        + LinForm::constant(n, pr.v_f);
    let (v_o, i_c4, i_c5) = output_node(ctx, &jq);

    let mut derivs = vec![LinForm::zero(n); n];
    derivs[STATE_IL1] = (s(STATE_IL1).times(-(pr.dcr)) - v_a.clone()).times(1.0 / p.l1);
    derivs[STATE_IL2] = (s(STATE_IL2).times(-(pr.dcr)) - v_b.clone()).times(1.0 / p.l2);
    derivs[STATE_VC1] = jp.times(-1.0 / p.c1);
    derivs[STATE_VC2] = jp.times(1.0 / p.c2);
    derivs[STATE_VC3] = jq.times(-1.0 / p.c3);
    derivs[STATE_VC4] = i_c4.times(1.0 / p.c4);
    if let Some(i5) = &i_c5 {
        derivs[STATE_VCOUT] = i5.times(1.0 / p.c_out);
    }
    let mut b_vin = DVector::zeros(n);
    b_vin[STATE_IL1] = 1.0 / p.l1;
    b_vin[STATE_IL2] = 1.0 / p.l2;

    let ic1 = jp.times(-1.0);
    let ic2 = jp.clone();
    let ic3 = jq.times(-1.0);
    let is1 = s(STATE_IL1) + jp.clone();
    let observers = common_observers(
        ctx,
        &v_a,
        &v_b,
        &v_o,
        [&ic1, &ic2, &ic3],
        &i_c4,
        i_c5.as_ref(),
        [&zero, &jp, &zero, &jq],
        [&is1, &zero],
    );

    // Entry projection when both the ESR and the switch-resistance paths
    // vanish: closes r = (v2 - v1) - (v4 - v3) around the four-capacitor
    // loop through S1 and the output node.
    let p_eq = output_pair_projection(ctx);
    let mut entry_projection = p_eq.clone();
    let mut entry_transfer = vec![];
    if den3 == 0.0 {
        let c44 = ctx.c44();
        let h = 1.0 / (1.0 / p.c1 + 1.0 / p.c2 + 1.0 / p.c3 + 1.0 / c44);
        let mut rvec = DVector::zeros(n);
        rvec[STATE_VC1] = -1.0;
        rvec[STATE_VC2] = 1.0;
        rvec[STATE_VC3] = 1.0;
        rvec[STATE_VC4] = -1.0;
        let mut proj = DMatrix::identity(n, n);
        let mut targets = vec![
            (STATE_VC1, h / p.c1),
            (STATE_VC2, -h / p.c2),
            (STATE_VC3, -h / p.c3),
            (STATE_VC4, h / c44),
        ];
        if p.c_out > 0.0 {
            targets.push((STATE_VCOUT, h / c44));
        }
        for (row, gain) in targets {
            for col in 0..n {
                proj[(row, col)] += gain * rvec[col];
            }
        }
        entry_projection = proj * &p_eq;
        let r_form = LinForm { w: rvec, k: 0.0 }.compose(&p_eq);
        entry_transfer.push((DiodeId::D2, r_form.times(-h)));
        entry_transfer.push((DiodeId::D4, r_form.times(h)));
    }

    assemble(
        ctx,
        Mode::III,
        ModeParts {
            derivs,
            b_vin,
            observers,
            entry_projection,
            entry_transfer,
        },
    )
}

/// Builds the default converter model: two interleaved boost legs feeding
/// the four-stage diode-capacitor multiplier ladder.
pub fn build_interleaved_vmc_converter(params: &ConverterParams) -> Result<SwitchedModel> {
    params.validate()?;
    let n = if params.c_out > 0.0 { 7 } else { 6 };
    let g = if params.r_load.is_finite() {
        1.0 / params.r_load
    } else {
        0.0
    };
    let ctx = Ctx { n, p: *params, g };
    let modes = vec![
        build_mode_i(&ctx),
        build_mode_ii(&ctx),
        build_mode_iii(&ctx),
    ];
    let mut state_names: Vec<String> = ["iL1", "iL2", "vC1", "vC2", "vC3", "vC4"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if n == 7 {
        state_names.push("vCout".to_string());
    }
    let model = SwitchedModel {
        state_dim: n,
        state_names,
        modes,
        params: *params,
    };
    for check in validate_model(&model).checks {
        if !check.passed {
            return Err(Error::InvalidConfig {
                field: "model",
                message: format!("{}: {}", check.name, check.detail),
            });
        }
    }
    Ok(model)
}

/// One structural check of [`validate_model`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail listing of the model's structural invariants.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Structural validation: mode set, conduction tables, observer coverage,
/// and finiteness of every dynamics matrix.
pub fn validate_model(model: &SwitchedModel) -> ValidationReport {
    let mut checks = vec![];

    let mode_set_ok = model.modes.len() == 3
        && model
            .modes
            .iter()
            .zip(Mode::ALL)
            .all(|(dyn_, want)| dyn_.mode == want);
    checks.push(ValidationCheck {
        name: "three-modes-present".into(),
        passed: mode_set_ok,
        detail: if mode_set_ok {
            "modes I, II, III present in order".into()
        } else {
            format!(
                "expected modes [I, II, III], got {:?}",
                model.modes.iter().map(|m| m.mode).collect::<Vec<_>>()
            )
        },
    });

    for dyn_ in &model.modes {
        let (want_s, want_d) = expected_sets(dyn_.mode);
        let ok = dyn_.switches_on == want_s && dyn_.diodes_on == want_d;
        checks.push(ValidationCheck {
            name: format!("conduction-set-mode-{}", dyn_.mode),
            passed: ok,
            detail: if ok {
                format!("switches {:?}, diodes {:?}", dyn_.switches_on, dyn_.diodes_on)
            } else {
                format!(
                    "mode {} conduction mismatch: expected switches {:?} diodes {:?}, got switches {:?} diodes {:?}",
                    dyn_.mode, want_s, want_d, dyn_.switches_on, dyn_.diodes_on
                )
            },
        });
    }

    for dyn_ in &model.modes {
        let missing: Vec<&str> = REQUIRED_OBSERVERS
            .iter()
            .copied()
            .filter(|name| dyn_.observer(name).is_none())
            .collect();
        checks.push(ValidationCheck {
            name: format!("observers-mode-{}", dyn_.mode),
            passed: missing.is_empty(),
            detail: if missing.is_empty() {
                "all required observers present".into()
            } else {
                format!(
                    "mode {} missing observers: {}",
                    dyn_.mode,
                    missing.join(", ")
                )
            },
        });
    }

    for dyn_ in &model.modes {
        let finite = dyn_.a.iter().all(|v| v.is_finite())
            && dyn_.b_vin.iter().all(|v| v.is_finite())
            && dyn_.b_const.iter().all(|v| v.is_finite())
            && dyn_.entry_projection.iter().all(|v| v.is_finite());
        checks.push(ValidationCheck {
            name: format!("finite-dynamics-mode-{}", dyn_.mode),
            passed: finite,
            detail: if finite {
                "all matrix entries finite".into()
            } else {
                format!("mode {} has non-finite entries", dyn_.mode)
            },
        });
    }

    ValidationReport { checks }
}
