use std::collections::BTreeMap;

use super::guard::{ClockId, Guard};
use super::label::{admissible_labels, LabelFormula, PropSet};
use super::TrmError;

/// Index of a machine state. Non-terminal and terminal states share one
/// index space.
pub type StateId = usize;

/// Reward rate accrued while the machine sits in a state.
#[derive(Clone, Debug, PartialEq)]
pub enum StateReward {
    Constant(f64),
    /// Rate keyed on the name of the environment state in which time
    /// elapses; unlisted environment states use `default`.
    PerEnvState {
        values: BTreeMap<String, f64>,
        default: f64,
    },
}

impl StateReward {
    pub fn rate(&self, env_state: Option<&str>) -> f64 {
        match self {
            StateReward::Constant(r) => *r,
            StateReward::PerEnvState { values, default } => env_state
                .and_then(|s| values.get(s))
                .copied()
                .unwrap_or(*default),
        }
    }

    /// Every rate this reward can produce.
    pub fn rates(&self) -> Vec<f64> {
        match self {
            StateReward::Constant(r) => vec![*r],
            StateReward::PerEnvState { values, default } => {
                let mut v: Vec<f64> = values.values().copied().collect();
                v.push(*default);
                v
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub name: String,
    pub source: StateId,
    pub label: LabelFormula,
    pub guard: Guard,
    pub resets: Vec<ClockId>,
    pub target: StateId,
    pub reward: f64,
}

/// Per-clock maximum constants and the largest useful delay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaxConstants {
    pub per_clock: Vec<u32>,
    pub delay: u32,
}

/// Two transitions from the same state that can fire on the same input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub state: StateId,
    pub first: usize,
    pub second: usize,
    /// A label set satisfying both label formulas.
    pub witness: PropSet,
}

/// A timed reward machine.
#[derive(Clone, Debug)]
pub struct Trm {
    pub name: String,
    pub description: String,
    states: Vec<String>,
    terminal: Vec<bool>,
    initial: StateId,
    clocks: Vec<String>,
    props: Vec<String>,
    exclusive: Vec<PropSet>,
    state_rewards: Vec<StateReward>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<usize>>,
}

impl Trm {
    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, u: StateId) -> &str {
        &self.states[u]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn is_terminal(&self, u: StateId) -> bool {
        self.terminal[u]
    }

    pub fn terminals(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).filter(|u| self.terminal[*u])
    }

    pub fn clocks(&self) -> &[String] {
        &self.clocks
    }

    pub fn num_clocks(&self) -> usize {
        self.clocks.len()
    }

    pub fn clock_id(&self, name: &str) -> Option<ClockId> {
        self.clocks.iter().position(|c| c == name)
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn prop_id(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p == name)
    }

    /// Groups of propositions of which at most one holds at a time.
    pub fn exclusive_groups(&self) -> &[PropSet] {
        &self.exclusive
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, index: usize) -> &Transition {
        &self.transitions[index]
    }

    pub fn outgoing(&self, u: StateId) -> &[usize] {
        &self.outgoing[u]
    }

    pub fn state_reward(&self, u: StateId) -> &StateReward {
        &self.state_rewards[u]
    }

    /// Reward rate of state `u` while the environment is in `env_state`.
    pub fn state_rate(&self, u: StateId, env_state: Option<&str>) -> f64 {
        self.state_rewards[u].rate(env_state)
    }

    /// The first transition out of `u` whose label formula accepts `label`
    /// and whose guard passes `guard_ok`. In a deterministic machine at most
    /// one transition can pass.
    pub fn fire(&self, u: StateId, label: PropSet, mut guard_ok: impl FnMut(&Guard) -> bool) -> Option<usize> {
        self.outgoing[u]
            .iter()
            .copied()
            .find(|t| self.transitions[*t].label.eval(label) && guard_ok(&self.transitions[*t].guard))
    }

    /// Every pair of transitions out of one state that some admissible label
    /// and some valuation both enable.
    pub fn check_deterministic(&self) -> Vec<Violation> {
        let labels: Vec<PropSet> = admissible_labels(self.props.len(), &self.exclusive).collect();
        let mut out = Vec::new();
        for (u, outs) in self.outgoing.iter().enumerate() {
            for (i, &t1) in outs.iter().enumerate() {
                for &t2 in &outs[i + 1..] {
                    let (a, b) = (&self.transitions[t1], &self.transitions[t2]);
                    if !a.guard.intersects(&b.guard) {
                        continue;
                    }
                    if let Some(&witness) = labels.iter().find(|l| a.label.eval(**l) && b.label.eval(**l)) {
                        out.push(Violation {
                            state: u,
                            first: t1,
                            second: t2,
                            witness,
                        });
                    }
                }
            }
        }
        out
    }

    /// Per-clock maximum constants `M_x` and delay bound `M_d`.
    pub fn max_constants(&self) -> MaxConstants {
        let mut per_clock = vec![0u32; self.clocks.len()];
        let mut delay = 0u32;
        for t in &self.transitions {
            for a in t.guard.atoms() {
                per_clock[a.clock] = per_clock[a.clock].max(a.constant);
                if a.op.is_lower_bound() {
                    delay = delay.max(a.constant);
                }
            }
        }
        MaxConstants { per_clock, delay }
    }

    /// Terminal states with no incoming transition from a state reachable
    /// from the initial state.
    pub fn unreachable_terminals(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(u) = stack.pop() {
            for &t in &self.outgoing[u] {
                let v = self.transitions[t].target;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        self.terminals().filter(|u| !seen[*u]).collect()
    }
}

/// Incremental constructor used by the parser and by tests.
#[derive(Clone, Debug, Default)]
pub struct TrmBuilder {
    name: String,
    description: String,
    states: Vec<String>,
    terminal: Vec<bool>,
    initial: Option<String>,
    clocks: Vec<String>,
    props: Vec<String>,
    exclusive: Vec<PropSet>,
    state_rewards: BTreeMap<String, StateReward>,
    transitions: Vec<Transition>,
}

impl TrmBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        TrmBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    pub fn state(mut self, name: impl Into<String>) -> Self {
        self.add_state(name.into(), false);
        self
    }

    pub fn terminal(mut self, name: impl Into<String>) -> Self {
        self.add_state(name.into(), true);
        self
    }

    pub(crate) fn add_state(&mut self, name: String, terminal: bool) -> bool {
        if self.states.contains(&name) {
            return false;
        }
        self.states.push(name);
        self.terminal.push(terminal);
        true
    }

    pub fn initial(mut self, name: impl Into<String>) -> Self {
        self.initial = Some(name.into());
        self
    }

    pub(crate) fn set_initial(&mut self, name: String) {
        self.initial = Some(name);
    }

    pub(crate) fn set_name(&mut self, name: String) {
        self.name = name;
    }

    pub(crate) fn set_description(&mut self, d: String) {
        self.description = d;
    }

    pub fn clock(mut self, name: impl Into<String>) -> Self {
        self.clocks.push(name.into());
        self
    }

    pub(crate) fn add_clock(&mut self, name: String) -> bool {
        if self.clocks.contains(&name) {
            return false;
        }
        self.clocks.push(name);
        true
    }

    pub fn prop(mut self, name: impl Into<String>) -> Self {
        self.props.push(name.into());
        self
    }

    pub(crate) fn add_prop(&mut self, name: String) -> bool {
        if self.props.contains(&name) {
            return false;
        }
        self.props.push(name);
        true
    }

    pub fn exclusive(mut self, group: PropSet) -> Self {
        self.exclusive.push(group);
        self
    }

    pub(crate) fn add_exclusive(&mut self, group: PropSet) {
        self.exclusive.push(group);
    }

    pub fn state_reward(mut self, state: impl Into<String>, reward: StateReward) -> Self {
        self.state_rewards.insert(state.into(), reward);
        self
    }

    pub(crate) fn set_state_reward(&mut self, state: String, reward: StateReward) {
        self.state_rewards.insert(state, reward);
    }

    pub fn clock_names(&self) -> &[String] {
        &self.clocks
    }

    pub fn prop_names(&self) -> &[String] {
        &self.props
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn has_state(&self, name: &str) -> bool {
        self.states.iter().any(|s| s == name)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn transition(
        mut self,
        source: &str,
        label: LabelFormula,
        guard: Guard,
        resets: Vec<ClockId>,
        target: &str,
        reward: f64,
    ) -> Self {
        let name = format!("t{}", self.transitions.len());
        self.push_transition(name, source, label, guard, resets, target, reward);
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push_transition(
        &mut self,
        name: String,
        source: &str,
        label: LabelFormula,
        guard: Guard,
        resets: Vec<ClockId>,
        target: &str,
        reward: f64,
    ) {
        let source = self.state_index(source).unwrap_or(usize::MAX);
        let target = self.state_index(target).unwrap_or(usize::MAX);
        self.transitions.push(Transition {
            name,
            source,
            label,
            guard,
            resets,
            target,
            reward,
        });
    }

    /// Validates structure. Determinism is not checked here; see
    /// [`Trm::check_deterministic`].
    pub fn build(self) -> Result<Trm, TrmError> {
        if self.states.is_empty() {
            return Err(TrmError::Invalid("machine has no states".into()));
        }
        if self.props.len() > 64 {
            return Err(TrmError::Invalid("at most 64 propositions are supported".into()));
        }
        let initial_name = self
            .initial
            .clone()
            .ok_or_else(|| TrmError::Invalid("no initial state declared".into()))?;
        let initial = self
            .state_index(&initial_name)
            .ok_or_else(|| TrmError::Invalid(format!("initial state `{initial_name}` is not declared")))?;
        if self.terminal[initial] {
            return Err(TrmError::Invalid("initial state must not be terminal".into()));
        }
        let n = self.states.len();
        let mut outgoing = vec![Vec::new(); n];
        for (i, t) in self.transitions.iter().enumerate() {
            if t.source >= n || t.target >= n {
                return Err(TrmError::Invalid(format!("transition {} references an undeclared state", t.name)));
            }
            if self.terminal[t.source] {
                return Err(TrmError::Invalid(format!(
                    "transition {} leaves terminal state {}",
                    t.name, self.states[t.source]
                )));
            }
            if t.resets.iter().any(|c| *c >= self.clocks.len()) {
                return Err(TrmError::Invalid(format!("transition {} resets an undeclared clock", t.name)));
            }
            if t.guard.bounds().len() != self.clocks.len() {
                return Err(TrmError::Invalid(format!("transition {} has a guard over the wrong clocks", t.name)));
            }
            if t.label.max_prop().is_some_and(|p| p >= self.props.len()) {
                return Err(TrmError::Invalid(format!("transition {} uses an undeclared proposition", t.name)));
            }
            outgoing[t.source].push(i);
        }
        let mut state_rewards = vec![StateReward::Constant(0.0); n];
        for (name, r) in self.state_rewards {
            let u = self
                .states
                .iter()
                .position(|s| *s == name)
                .ok_or_else(|| TrmError::Invalid(format!("state reward for undeclared state `{name}`")))?;
            state_rewards[u] = r;
        }
        Ok(Trm {
            name: self.name,
            description: self.description,
            states: self.states,
            terminal: self.terminal,
            initial,
            clocks: self.clocks,
            props: self.props,
            exclusive: self.exclusive,
            state_rewards,
            transitions: self.transitions,
            outgoing,
        })
    }
}
