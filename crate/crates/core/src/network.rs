//! Bulk-synchronous message-passing execution of the per-subsystem ADMM:
//! every subsystem is a node that only sees its own layout, its inbox and
//! the state measurements it received. Every message is audited against
//! the locality radius.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::admm::{
    audit_iterates, convergence_check, penalty_update, AdmmError, AdmmLayout, AdmmParams, ConvergenceStatus, IterationRecord,
    LocalResiduals, SubsystemAdmmState, SubsystemLayout, TargetSource,
};
use crate::constraints::RobustProblem;
use crate::sls::{InterconnectionGraph, RowKind};
use crate::Real;

/// What a message carries, which also fixes how far it may travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    /// state measurements, up to `d + 1` hops
    Measurement,
    /// fragments of state rows of `Phi~` or `Psi`, up to `d` hops
    StateRow,
    /// fragments of input rows, up to `d + 1` hops
    InputRow,
    /// partial sums and broadcasts along the reduction tree, one hop
    Reduction,
}

impl MessageKind {
    pub fn allowed_hops(self, radius: usize) -> usize {
        match self {
            Self::Measurement | Self::InputRow => radius + 1,
            Self::StateRow => radius,
            Self::Reduction => 1,
        }
    }

    fn of_row(kind: RowKind) -> Self {
        match kind {
            RowKind::State => Self::StateRow,
            RowKind::Input => Self::InputRow,
        }
    }
}

/// Phase of an iteration a message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Round {
    Measure,
    ShareRows,
    ShareColumns,
    Reduce,
}

/// `(slot, index, value)` triples addressed in the receiver's own layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Message<T: Real> {
    pub sender: usize,
    pub receiver: usize,
    pub round: Round,
    pub kind: MessageKind,
    pub payload: Vec<(usize, usize, T)>,
}

/// One subsystem: its own layout, iterates, inbox and what it knows of `x0`.
#[derive(Debug, Clone)]
pub struct SubsystemNode<T: Real> {
    pub id: usize,
    pub layout: SubsystemLayout<T>,
    pub state: SubsystemAdmmState<T>,
    /// measured states; every other entry is NaN
    pub x0: DVector<T>,
    pub inbox: Vec<Message<T>>,
    pub compute_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CommunicationStats {
    pub iterations: usize,
    pub messages: usize,
    /// entries transported, times the scalar size
    pub bytes: usize,
    pub max_hops: usize,
    /// messages sent by each node per iteration, measurements excluded
    pub sent_per_iteration: Vec<f64>,
    pub messages_by_kind: BTreeMap<String, usize>,
    /// messages whose hop count exceeded the allowance of their kind
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct DistributedOutcome<T: Real> {
    pub converged: bool,
    pub iterations: usize,
    pub status: ConvergenceStatus,
    pub trace: Vec<IterationRecord>,
    pub u0: DVector<T>,
    pub states: Vec<SubsystemAdmmState<T>>,
    pub comm: CommunicationStats,
    /// compute time of each node summed over iterations
    pub node_seconds: Vec<f64>,
    /// sum over iterations of the slowest node's compute time
    pub critical_path_seconds: f64,
}

/// Static part of the simulation: layouts, graph and who measures what.
#[derive(Debug, Clone)]
pub struct Network<T: Real> {
    layout: AdmmLayout<T>,
    problem: RobustProblem<T>,
    graph: InterconnectionGraph,
    radius: usize,
    state_owner: Vec<usize>,
    /// per node: state coordinates it reads
    needs: Vec<Vec<usize>>,
    /// per node, per owned column, per source: row kind of the source
    source_kinds: Vec<Vec<Vec<MessageKind>>>,
    /// per node, per owned row: kind
    row_kinds: Vec<Vec<MessageKind>>,
}

/// Payloads keyed by sender, receiver and kind.
type Batches<T> = BTreeMap<(usize, usize, MessageKind), Vec<(usize, usize, T)>>;

struct Postbox {
    graph: InterconnectionGraph,
    radius: usize,
    stats: CommunicationStats,
    sent: Vec<usize>,
}

impl Postbox {
    fn deliver<T: Real>(&mut self, nodes: &mut [SubsystemNode<T>], msg: Message<T>) -> Result<(), AdmmError> {
        if msg.sender == msg.receiver {
            nodes[msg.receiver].inbox.push(msg);
            return Ok(());
        }
        let hops = self.graph.hop_distance(msg.sender, msg.receiver).unwrap_or(usize::MAX);
        let allowed = msg.kind.allowed_hops(self.radius);
        self.stats.messages += 1;
        self.stats.bytes += msg.payload.len().max(1) * std::mem::size_of::<T>();
        self.stats.max_hops = self.stats.max_hops.max(hops);
        *self.stats.messages_by_kind.entry(format!("{:?}", msg.kind)).or_default() += 1;
        if msg.kind != MessageKind::Measurement {
            self.sent[msg.sender] += 1;
        }
        if hops > allowed {
            self.stats.violations += 1;
            return Err(AdmmError::LocalityViolation { sender: msg.sender, receiver: msg.receiver, hops, allowed });
        }
        nodes[msg.receiver].inbox.push(msg);
        Ok(())
    }

    /// Groups `(sender, receiver, kind) -> entries` into one message each.
    fn send_all<T: Real>(
        &mut self,
        nodes: &mut [SubsystemNode<T>],
        round: Round,
        batches: Batches<T>,
    ) -> Result<(), AdmmError> {
        for ((sender, receiver, kind), payload) in batches {
            self.deliver(nodes, Message { sender, receiver, round, kind, payload })?;
        }
        Ok(())
    }
}

impl<T: Real> Network<T> {
    pub fn new(problem: &RobustProblem<T>) -> Result<Self, AdmmError> {
        let layout = AdmmLayout::new(problem)?;
        let model = &problem.model;
        let state_owner: Vec<usize> = (0..model.n_states()).map(|s| model.state_owner(s)).collect();
        let response = layout.response;
        let mut needs = Vec::new();
        let mut source_kinds = Vec::new();
        let mut row_kinds = Vec::new();
        for sub in &layout.subsystems {
            let mut coords: Vec<usize> = sub
                .rows
                .iter()
                .flat_map(|r| r.cols[..r.n_first].iter().copied())
                .chain(sub.h_rows.iter().flat_map(|h| h.first_cols.iter().copied()))
                .collect();
            coords.sort_unstable();
            coords.dedup();
            needs.push(coords);
            row_kinds.push(sub.rows.iter().map(|r| MessageKind::of_row(response.row_info(r.row).kind)).collect());
            source_kinds.push(
                sub.cols
                    .iter()
                    .map(|c| {
                        c.sources
                            .iter()
                            .map(|s| match *s {
                                TargetSource::Phi { owner, row, .. } => {
                                    MessageKind::of_row(response.row_info(layout.subsystems[owner].rows[row].row).kind)
                                }
                                TargetSource::Omega { owner, hrow, .. } | TargetSource::XiG { owner, hrow, .. } => {
                                    MessageKind::of_row(layout.subsystems[owner].h_rows[hrow].kind)
                                }
                            })
                            .collect()
                    })
                    .collect(),
            );
        }
        Ok(Self {
            graph: model.graph().clone(),
            radius: problem.mask.radius(),
            state_owner,
            needs,
            source_kinds,
            row_kinds,
            layout,
            problem: problem.clone(),
        })
    }

    pub fn layout(&self) -> &AdmmLayout<T> {
        &self.layout
    }

    /// Largest hop distance between a node and any subsystem whose data its
    /// layout refers to (row owners feeding its columns, column owners
    /// feeding its rows, measured states).
    pub fn footprint_hops(&self) -> usize {
        let mut worst = 0;
        for (i, sub) in self.layout.subsystems.iter().enumerate() {
            let mut others: Vec<usize> = sub.cols.iter().flat_map(|c| c.sources.iter().map(|s| s.owner())).collect();
            others.extend(sub.rows.iter().flat_map(|r| r.col_refs.iter().map(|&(o, _, _)| o)));
            others.extend(self.needs[i].iter().map(|&s| self.state_owner[s]));
            for o in others {
                worst = worst.max(self.graph.hop_distance(i, o).unwrap_or(usize::MAX));
            }
        }
        worst
    }

    pub fn nodes(&self, rho0: T) -> Vec<SubsystemNode<T>> {
        let n = self.layout.response.n;
        self.layout
            .subsystems
            .iter()
            .map(|sub| SubsystemNode {
                id: sub.id,
                layout: sub.clone(),
                state: SubsystemAdmmState::zeros(sub, rho0),
                x0: DVector::from_element(n, T::lit(f64::NAN)),
                inbox: Vec::new(),
                compute_seconds: 0.0,
            })
            .collect()
    }

    /// Runs the iteration at the plant state `x`; node `i` only measures its
    /// own coordinates of `x`.
    pub fn run(
        &self,
        x: &DVector<T>,
        params: &AdmmParams,
        initial: Option<Vec<SubsystemAdmmState<T>>>,
    ) -> Result<DistributedOutcome<T>, AdmmError> {
        params.validate()?;
        let n = self.layout.response.n;
        if x.len() != n {
            return Err(AdmmError::Dimension(format!("x has {} entries, expected {n}", x.len())));
        }
        let count = self.layout.n_subsystems();
        let mut nodes = self.nodes(T::lit(params.rho0));
        if let Some(states) = initial {
            if states.len() != count || !states.iter().zip(&nodes).all(|(s, node)| s.matches(&node.layout)) {
                return Err(AdmmError::Dimension("initial iterates do not match the layout".into()));
            }
            for (node, s) in nodes.iter_mut().zip(states) {
                node.state = s;
            }
        }
        let mut post = Postbox {
            graph: self.graph.clone(),
            radius: self.radius,
            stats: CommunicationStats::default(),
            sent: vec![0; count],
        };

        // steps 1-2: measure and share
        let mut batches = BTreeMap::new();
        for (j, coords) in self.needs.iter().enumerate() {
            for &s in coords {
                let owner = self.state_owner[s];
                batches.entry((owner, j, MessageKind::Measurement)).or_insert_with(Vec::new).push((s, 0, x[s]));
            }
        }
        post.send_all(&mut nodes, Round::Measure, batches)?;
        for node in &mut nodes {
            for msg in node.inbox.drain(..) {
                for &(s, _, v) in &msg.payload {
                    node.x0[s] = v;
                }
            }
        }

        let mut rho = nodes.first().map_or(T::lit(params.rho0), |nd| nd.state.rho);
        let mut trace = Vec::new();
        let mut status = ConvergenceStatus { converged: false, primal_residual: f64::INFINITY, dual_residual: f64::INFINITY };
        let mut iterations = 0;
        let mut critical = 0.0;
        for k in 0..params.max_iters {
            let mut spent = vec![0.0; count];
            // step 3
            for (i, node) in nodes.iter_mut().enumerate() {
                let t = Instant::now();
                let res = node.state.row_update(&node.layout, &node.x0);
                spent[i] += t.elapsed().as_secs_f64();
                res?;
            }
            // step 4: row owners ship Phi~ + Lambda to column owners
            let mut batches = BTreeMap::new();
            for (j, sub) in self.layout.subsystems.iter().enumerate() {
                for (kc, col) in sub.cols.iter().enumerate() {
                    for (ks, s) in col.sources.iter().enumerate() {
                        let o = s.owner();
                        let v = nodes[o].state.target(*s);
                        batches
                            .entry((o, j, self.source_kinds[j][kc][ks]))
                            .or_insert_with(Vec::new)
                            .push((kc, ks, v));
                    }
                }
            }
            post.send_all(&mut nodes, Round::ShareRows, batches)?;
            // step 5
            for (i, node) in nodes.iter_mut().enumerate() {
                let mut targets: Vec<DVector<T>> =
                    node.layout.cols.iter().map(|c| DVector::zeros(c.sources.len())).collect();
                for msg in node.inbox.drain(..) {
                    for &(kc, ks, v) in &msg.payload {
                        targets[kc][ks] = v;
                    }
                }
                let t = Instant::now();
                node.state.psi_col =
                    node.layout.cols.iter().zip(&targets).map(|(c, v)| crate::admm::column_update(c, v)).collect();
                spent[i] += t.elapsed().as_secs_f64();
            }
            // step 6: column owners ship Psi back to row owners
            let mut batches = BTreeMap::new();
            for (i, sub) in self.layout.subsystems.iter().enumerate() {
                for (kr, row) in sub.rows.iter().enumerate() {
                    for (kk, &(o, l, p)) in row.col_refs.iter().enumerate() {
                        batches
                            .entry((o, i, self.row_kinds[i][kr]))
                            .or_insert_with(Vec::new)
                            .push((kr, kk, nodes[o].state.psi_col[l][p]));
                    }
                }
            }
            post.send_all(&mut nodes, Round::ShareColumns, batches)?;
            // step 7
            let mut locals: Vec<LocalResiduals<T>> = Vec::with_capacity(count);
            for (i, node) in nodes.iter_mut().enumerate() {
                let mut views: Vec<DVector<T>> = node.layout.rows.iter().map(|r| DVector::zeros(r.cols.len())).collect();
                for msg in node.inbox.drain(..) {
                    for &(kr, kk, v) in &msg.payload {
                        views[kr][kk] = v;
                    }
                }
                let t = Instant::now();
                locals.push(node.state.finish(&node.layout, views));
                spent[i] += t.elapsed().as_secs_f64();
            }
            // step 8: tree reduction up and broadcast down
            for (child, parent) in self.layout.tree.edges() {
                let up = Message { sender: child, receiver: parent, round: Round::Reduce, kind: MessageKind::Reduction, payload: vec![(0, 0, T::zero()); 4] };
                post.deliver(&mut nodes, up)?;
                let down = Message { sender: parent, receiver: child, round: Round::Reduce, kind: MessageKind::Reduction, payload: vec![(0, 0, T::zero()); 2] };
                post.deliver(&mut nodes, down)?;
            }
            for node in &mut nodes {
                node.inbox.clear();
            }
            if params.audit_mask {
                let states: Vec<_> = nodes.iter().map(|nd| nd.state.clone()).collect();
                audit_iterates(&self.layout, &self.problem, &states)
                    .map_err(|what| AdmmError::MaskViolation { iteration: k, what })?;
            }
            iterations = k + 1;
            status = convergence_check(&self.layout, &locals, rho, params);
            trace.push(IterationRecord {
                iteration: k,
                rho: rho.as_f64(),
                primal_residual: status.primal_residual,
                dual_residual: status.dual_residual,
            });
            critical += spent.iter().copied().fold(0.0, f64::max);
            for (node, s) in nodes.iter_mut().zip(&spent) {
                node.compute_seconds += s;
            }
            if status.converged {
                break;
            }
            let next = penalty_update(rho, T::lit(status.primal_residual), T::lit(status.dual_residual), params, k);
            for node in &mut nodes {
                node.state.set_rho(next);
            }
            rho = next;
        }

        let response = self.layout.response;
        let mut u0 = DVector::zeros(response.p);
        for (q, u) in u0.iter_mut().enumerate() {
            if let Some((o, l)) = self.layout.row_loc[response.input_row(0, q)] {
                *u = nodes[o].state.first_input(&nodes[o].layout, l, &nodes[o].x0);
            }
        }
        post.stats.iterations = iterations;
        post.stats.sent_per_iteration = post.sent.iter().map(|&m| m as f64 / iterations.max(1) as f64).collect();
        Ok(DistributedOutcome {
            converged: status.converged,
            iterations,
            status,
            trace,
            u0,
            node_seconds: nodes.iter().map(|nd| nd.compute_seconds).collect(),
            states: nodes.into_iter().map(|nd| nd.state).collect(),
            comm: post.stats,
            critical_path_seconds: critical,
        })
    }
}

/// Aggregate statistics of a finished run.
pub fn communication_stats<T: Real>(run: &DistributedOutcome<T>) -> &CommunicationStats {
    &run.comm
}
