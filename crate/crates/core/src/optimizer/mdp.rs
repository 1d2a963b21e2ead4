//! Finite-horizon deterministic MDPs over a discrete state set, solved by
//! backward induction.

use crate::par::{self, Execution};

use super::OptimizerError;

/// Outcome of taking an action in a state at some slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: usize,
    /// Stage cost; `f64::INFINITY` marks an infeasible action.
    pub cost: f64,
}

/// A deterministic finite-horizon MDP. Action 0 is the preferred action
/// when costs tie, then 1, and so on.
pub trait DiscreteMdp: Sync {
    fn horizon(&self) -> usize;
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn evaluate(&self, slot: usize, state: usize, action: usize) -> Result<Step, OptimizerError>;
}

/// Cost-to-go `V[k][s]` for `k` in `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    states: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.values.len() / self.states - 1
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        &self.values[k * self.states..(k + 1) * self.states]
    }

    pub fn get(&self, k: usize, s: usize) -> f64 {
        self.values[k * self.states + s]
    }
}

/// Optimal action index `π[k][s]` for `k` in `0..horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    states: usize,
    actions: Vec<u8>,
}

impl Policy {
    pub fn empty(states: usize) -> Self {
        Self { states, actions: Vec::new() }
    }

    pub fn horizon(&self) -> usize {
        if self.states == 0 {
            0
        } else {
            self.actions.len() / self.states
        }
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn get(&self, k: usize, s: usize) -> usize {
        self.actions[k * self.states + s] as usize
    }

    pub fn layer(&self, k: usize) -> &[u8] {
        &self.actions[k * self.states..(k + 1) * self.states]
    }

    /// Appends the slots of `other` after the slots of `self`.
    pub fn extend(&mut self, other: &Policy) {
        assert_eq!(self.states, other.states, "policy state counts differ");
        self.actions.extend_from_slice(&other.actions);
    }
}

/// Relative tolerance under which two action values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Backward induction from `terminal` (the values of layer `horizon`).
pub fn value_iteration<M: DiscreteMdp>(
    mdp: &M,
    terminal: &[f64],
    exec: Execution,
) -> Result<(ValueTable, Policy), OptimizerError> {
    let n = mdp.num_states();
    let horizon = mdp.horizon();
    if terminal.len() != n {
        return Err(OptimizerError::Config(format!(
            "terminal values have {} entries for {n} states",
            terminal.len()
        )));
    }
    if mdp.num_actions() == 0 || mdp.num_actions() > u8::MAX as usize {
        return Err(OptimizerError::Config("action count must be in 1..=255".into()));
    }
    let mut values = vec![0.0; (horizon + 1) * n];
    values[horizon * n..].copy_from_slice(terminal);
    let mut actions = vec![0u8; horizon * n];

    for k in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * n);
        let next = &tail[..n];
        let layer = par::try_map_indices(exec, n, |s| best_action(mdp, k, s, next))?;
        for (s, (v, a)) in layer.into_iter().enumerate() {
            head[k * n + s] = v;
            actions[k * n + s] = a;
        }
    }
    Ok((ValueTable { states: n, values }, Policy { states: n, actions }))
}

fn best_action<M: DiscreteMdp>(
    mdp: &M,
    k: usize,
    s: usize,
    next: &[f64],
) -> Result<(f64, u8), OptimizerError> {
    let mut best = f64::INFINITY;
    let mut best_a = 0u8;
    for a in 0..mdp.num_actions() {
        let step = mdp.evaluate(k, s, a)?;
        if step.next >= next.len() {
            return Err(OptimizerError::Config(format!(
                "transition from state {s} at slot {k} leads to unknown state {}",
                step.next
            )));
        }
        let q = step.cost + next[step.next];
        let improves = if best.is_finite() {
            q < best - TIE_TOLERANCE * best.abs().max(1.0)
        } else {
            q < best
        };
        if improves {
            best = q;
            best_a = a as u8;
        }
    }
    if !best.is_finite() {
        return Err(OptimizerError::Infeasible { slot: k, state: s });
    }
    Ok((best, best_a))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// MDP given by explicit next-state and cost tables.
    pub(crate) struct TableMdp {
        pub horizon: usize,
        pub states: usize,
        pub actions: usize,
        /// [k][s][a] -> (next, cost)
        pub table: Vec<Vec<Vec<(usize, f64)>>>,
    }

    impl TableMdp {
        pub fn random(rng: &mut ChaCha8Rng, horizon: usize, states: usize, actions: usize) -> Self {
            let table = (0..horizon)
                .map(|_| {
                    (0..states)
                        .map(|_| {
                            (0..actions)
                                .map(|_| (rng.random_range(0..states), rng.random_range(-1.0..3.0)))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            Self { horizon, states, actions, table }
        }

        /// Cost of following `actions` from `s0`, plus terminal value.
        pub fn sequence_cost(&self, s0: usize, actions: &[usize], terminal: &[f64]) -> f64 {
            let mut s = s0;
            let mut total = 0.0;
            for (k, &a) in actions.iter().enumerate() {
                let (n, c) = self.table[k][s][a];
                total += c;
                s = n;
            }
            total + terminal[s]
        }

        /// Minimum over every action sequence, by enumeration.
        pub fn brute_force(&self, s0: usize, terminal: &[f64]) -> f64 {
            let count = self.actions.pow(self.horizon as u32);
            let mut best = f64::INFINITY;
            let mut seq = vec![0; self.horizon];
            for code in 0..count {
                let mut c = code;
                for slot in seq.iter_mut() {
                    *slot = c % self.actions;
                    c /= self.actions;
                }
                best = best.min(self.sequence_cost(s0, &seq, terminal));
            }
            best
        }
    }

    impl DiscreteMdp for TableMdp {
        fn horizon(&self) -> usize {
            self.horizon
        }
        fn num_states(&self) -> usize {
            self.states
        }
        fn num_actions(&self) -> usize {
            self.actions
        }
        fn evaluate(&self, k: usize, s: usize, a: usize) -> Result<Step, OptimizerError> {
            let (next, cost) = self.table[k][s][a];
            Ok(Step { next, cost })
        }
    }

    pub(crate) fn follow_policy(m: &TableMdp, p: &Policy, s0: usize) -> Vec<usize> {
        let mut s = s0;
        (0..m.horizon)
            .map(|k| {
                let a = p.get(k, s);
                s = m.table[k][s][a].0;
                a
            })
            .collect()
    }

    #[test]
    fn zero_horizon_returns_terminal() {
        let m = TableMdp { horizon: 0, states: 3, actions: 3, table: vec![] };
        let (v, p) = value_iteration(&m, &[1.0, 2.0, 3.0], Execution::Sequential).unwrap();
        assert_eq!(v.layer(0), &[1.0, 2.0, 3.0]);
        assert_eq!(p.horizon(), 0);
    }

    #[test]
    fn two_slot_three_state_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = TableMdp::random(&mut rng, 2, 3, 3);
        let terminal = [0.5, 0.0, 2.0];
        let (v, p) = value_iteration(&m, &terminal, Execution::Sequential).unwrap();
        for s0 in 0..3 {
            let brute = m.brute_force(s0, &terminal);
            assert!((v.get(0, s0) - brute).abs() < 1e-12);
            let seq = follow_policy(&m, &p, s0);
            assert!((m.sequence_cost(s0, &seq, &terminal) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_prefer_first_action() {
        let table = vec![vec![vec![(0, 1.0), (0, 1.0), (0, 1.0)]]];
        let m = TableMdp { horizon: 1, states: 1, actions: 3, table };
        let (_, p) = value_iteration(&m, &[0.0], Execution::Sequential).unwrap();
        assert_eq!(p.get(0, 0), 0);
        let table = vec![vec![vec![(0, 2.0), (0, 1.0), (0, 1.0)]]];
        let m = TableMdp { horizon: 1, states: 1, actions: 3, table };
        let (_, p) = value_iteration(&m, &[0.0], Execution::Sequential).unwrap();
        assert_eq!(p.get(0, 0), 1);
    }

    #[test]
    fn all_infeasible_is_an_error() {
        let table = vec![vec![vec![(0, f64::INFINITY)]]];
        let m = TableMdp { horizon: 1, states: 1, actions: 1, table };
        assert!(matches!(
            value_iteration(&m, &[0.0], Execution::Sequential),
            Err(OptimizerError::Infeasible { .. })
        ));
    }

    #[test]
    fn terminal_length_checked() {
        let m = TableMdp { horizon: 0, states: 3, actions: 1, table: vec![] };
        assert!(value_iteration(&m, &[0.0], Execution::Sequential).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = TableMdp::random(&mut rng, 20, 40, 3);
        let t = vec![0.0; 40];
        let a = value_iteration(&m, &t, Execution::Sequential).unwrap();
        let b = value_iteration(&m, &t, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    mod props {
        use super::{value_iteration, ChaCha8Rng, Execution, SeedableRng, TableMdp};
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn bellman_consistency(seed in 0u64..10_000, horizon in 1usize..8, states in 1usize..6) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = TableMdp::random(&mut rng, horizon, states, 3);
                let terminal: Vec<f64> = (0..states).map(|_| rng.random_range(0.0..1.0)).collect();
                let (v, p) = value_iteration(&m, &terminal, Execution::Sequential).unwrap();
                for k in 0..horizon {
                    for s in 0..states {
                        for a in 0..3 {
                            let (n, c) = m.table[k][s][a];
                            prop_assert!(v.get(k, s) <= c + v.get(k + 1, n) + 1e-9);
                        }
                        let a = p.get(k, s);
                        let (n, c) = m.table[k][s][a];
                        prop_assert!((v.get(k, s) - (c + v.get(k + 1, n))).abs() <= 1e-9);
                    }
                }
            }
        }
    }
}
