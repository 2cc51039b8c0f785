use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use rustc_hash::FxHashMap;

use super::{top_k_by_reward, CfConfig, Core, Experience, Interpretation, Outcome, Product, ProductConfig};
use crate::env::{Environment, MissingProposition, SimRng};
use crate::trm::{accrual_factor, ClockValuation, PropSet, Semantics, StateId, Trm};

/// Clock count supported by the compact product states.
pub const MAX_CLOCKS: usize = 4;

/// Tick value of a saturated clock.
pub const SAT_TICKS: u32 = u32::MAX;

/// `(s, u, v)` with clock values counted in `1/κ` ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DigitalState {
    pub s: u32,
    pub u: u32,
    pub v: [u32; MAX_CLOCKS],
}

#[derive(Clone, Copy, Debug)]
struct CfTemplate {
    u: u32,
    v: [u32; MAX_CLOCKS],
    d: u32,
    reward: f64,
    next_u: u32,
    next_v: [u32; MAX_CLOCKS],
    terminal: bool,
}

type CfKey = (u32, u32, [u32; MAX_CLOCKS], PropSet, CfConfig);

/// Digital-clock, uniformly discretized, and reward-machine products.
pub struct DigitalProduct {
    core: Core,
    interp: Interpretation,
    kappa: u32,
    num_delays: u32,
    /// `κ·M_x` per clock.
    bounds: Vec<u32>,
    n_env_actions: u32,
    accrual: Vec<f64>,
    semantics: Semantics,
    legal: Rc<[u32]>,
    cf_cache: RefCell<FxHashMap<CfKey, Rc<Vec<CfTemplate>>>>,
}

impl DigitalProduct {
    /// # Panics
    ///
    /// Panics on the corner interpretation, on `κ = 0`, or when the machine
    /// has more than [`MAX_CLOCKS`] clocks.
    pub fn new(
        env: Arc<dyn Environment>,
        trm: Arc<Trm>,
        interp: Interpretation,
        config: ProductConfig,
    ) -> Result<DigitalProduct, MissingProposition> {
        assert!(trm.num_clocks() <= MAX_CLOCKS, "at most {MAX_CLOCKS} clocks are supported");
        let consts = trm.max_constants();
        let (kappa, max_delay_ticks, semantics) = match interp {
            Interpretation::Digital => (1, consts.delay, Semantics::Digital),
            Interpretation::Discretized { kappa } => {
                assert!(kappa >= 1, "kappa must be positive");
                (kappa, consts.delay * kappa, Semantics::RealTime)
            }
            Interpretation::RewardMachine => (1, 0, Semantics::Digital),
            Interpretation::Corner => panic!("use CornerProduct for the corner interpretation"),
        };
        let core = Core::new(env, trm, config)?;
        let num_delays = max_delay_ticks + 1;
        let n_env_actions = core.env.num_actions() as u32;
        let accrual = (0..num_delays)
            .map(|d| accrual_factor(d as f64 / kappa as f64, config.gamma, semantics))
            .collect();
        let legal: Rc<[u32]> = (0..num_delays * n_env_actions).collect();
        Ok(DigitalProduct {
            bounds: consts.per_clock.iter().map(|m| m * kappa).collect(),
            core,
            interp,
            kappa,
            num_delays,
            n_env_actions,
            accrual,
            semantics,
            legal,
            cf_cache: RefCell::new(FxHashMap::default()),
        })
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interp
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Semantics used for state-reward accrual.
    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn num_delays(&self) -> u32 {
        self.num_delays
    }

    pub fn encode(&self, delay_ticks: u32, env_action: usize) -> u32 {
        delay_ticks * self.n_env_actions + env_action as u32
    }

    /// Clock values of a state, with `∞` for saturated clocks.
    pub fn valuation(&self, x: &DigitalState) -> ClockValuation {
        ClockValuation(
            (0..self.bounds.len())
                .map(|c| self.tick_value(x.v[c]))
                .collect(),
        )
    }

    fn tick_value(&self, t: u32) -> f64 {
        if t == SAT_TICKS {
            f64::INFINITY
        } else {
            t as f64 / self.kappa as f64
        }
    }

    fn elapse(&self, v: &[u32; MAX_CLOCKS], ticks: u32) -> [u32; MAX_CLOCKS] {
        let mut out = *v;
        for (c, b) in self.bounds.iter().enumerate() {
            if out[c] != SAT_TICKS {
                let n = out[c] + ticks;
                out[c] = if n > *b { SAT_TICKS } else { n };
            }
        }
        out
    }

    /// Fires the machine from `(u, v)` after `d` delay ticks plus the unit
    /// action time. Returns the transition, the next state and valuation.
    fn fire(&self, u: StateId, v: &[u32; MAX_CLOCKS], d: u32, labels: PropSet) -> Option<(usize, u32, [u32; MAX_CLOCKS])> {
        let adv = self.elapse(v, d + self.kappa);
        let n = self.bounds.len();
        let mut vals = [0.0; MAX_CLOCKS];
        for c in 0..n {
            vals[c] = self.tick_value(adv[c]);
        }
        let trm = &self.core.trm;
        let t = trm.fire(u, labels, |g| g.satisfied_by(&vals[..n]))?;
        let tr = trm.transition(t);
        let mut next = adv;
        for c in &tr.resets {
            next[*c] = 0;
        }
        Some((t, tr.target as u32, next))
    }

    fn templates(&self, x: &DigitalState, labels: PropSet, cf: &CfConfig) -> Rc<Vec<CfTemplate>> {
        let key = (self.core.rate_class[x.s as usize], x.u, x.v, labels, *cf);
        if let Some(t) = self.cf_cache.borrow().get(&key) {
            return t.clone();
        }
        let trm = &self.core.trm;
        let s = x.s as usize;
        let n = self.bounds.len();
        let states: Vec<u32> = if cf.vary_states {
            (0..trm.num_states()).filter(|u| !trm.is_terminal(*u)).map(|u| u as u32).collect()
        } else {
            vec![x.u]
        };
        // per-clock candidate tick values within the radius
        let axes: Vec<Vec<u32>> = (0..n)
            .map(|c| {
                let b = self.bounds[c];
                let center = if x.v[c] == SAT_TICKS { b + 1 } else { x.v[c] };
                let lo = center.saturating_sub(cf.radius);
                let hi = center + cf.radius;
                let mut vals: Vec<u32> = (lo..=hi.min(b)).collect();
                if hi > b {
                    vals.push(SAT_TICKS);
                }
                vals
            })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let mut v = [0u32; MAX_CLOCKS];
            for c in 0..n {
                v[c] = axes[c][idx[c]];
            }
            for &u in &states {
                for d in 0..self.num_delays {
                    if let Some((t, next_u, next_v)) = self.fire(u as usize, &v, d, labels) {
                        let reward = self.accrual[d as usize] * self.core.rates[u as usize][s] + trm.transition(t).reward;
                        out.push(CfTemplate {
                            u,
                            v,
                            d,
                            reward,
                            next_u,
                            next_v,
                            terminal: trm.is_terminal(next_u as usize),
                        });
                    }
                }
            }
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        // one spare slot in case the realized experience is among the best
        let kept = Rc::new(top_k_by_reward(out, cf.top_k + 1, |t| t.reward, |t| (t.u, t.v, t.d)));
        self.cf_cache.borrow_mut().insert(key, kept.clone());
        kept
    }
}

impl Product for DigitalProduct {
    fn reference_semantics(&self) -> Option<Semantics> {
        Some(self.semantics())
    }

    type State = DigitalState;

    fn env(&self) -> &dyn Environment {
        self.core.env.as_ref()
    }

    fn trm(&self) -> &Trm {
        &self.core.trm
    }

    fn config(&self) -> &ProductConfig {
        &self.core.config
    }

    fn num_actions(&self) -> usize {
        self.legal.len()
    }

    fn initial_state(&self, rng: &mut SimRng) -> DigitalState {
        DigitalState {
            s: self.core.env.reset(rng) as u32,
            u: self.core.trm.initial() as u32,
            v: [0; MAX_CLOCKS],
        }
    }

    fn legal_actions(&self, _x: &DigitalState) -> Rc<[u32]> {
        self.legal.clone()
    }

    fn delay(&self, action: u32) -> f64 {
        (action / self.n_env_actions) as f64 / self.kappa as f64
    }

    fn env_action(&self, action: u32) -> usize {
        (action % self.n_env_actions) as usize
    }

    fn env_state(&self, x: &DigitalState) -> usize {
        x.s as usize
    }

    fn trm_state(&self, x: &DigitalState) -> StateId {
        x.u as usize
    }

    fn describe_action(&self, action: u32) -> String {
        format!(
            "wait {} then {}",
            self.delay(action),
            self.core.env.action_name(self.env_action(action))
        )
    }

    fn successor(&self, x: &DigitalState, action: u32, env_next: usize, env_labels: PropSet) -> Outcome<DigitalState> {
        let d = action / self.n_env_actions;
        let labels = self.core.labels.translate(env_labels);
        let accrued = self.accrual[d as usize] * self.core.rates[x.u as usize][x.s as usize];
        match self.fire(x.u as usize, &x.v, d, labels) {
            Some((t, u, v)) => Outcome {
                next: DigitalState { s: env_next as u32, u, v },
                reward: accrued + self.core.trm.transition(t).reward,
                terminal: self.core.trm.is_terminal(u as usize),
                no_match: false,
                transition: Some(t),
                labels,
            },
            None => Outcome {
                next: DigitalState {
                    s: env_next as u32,
                    u: x.u,
                    v: self.elapse(&x.v, d + self.kappa),
                },
                reward: accrued + self.core.config.no_match_penalty,
                terminal: true,
                no_match: true,
                transition: None,
                labels,
            },
        }
    }

    fn counterfactuals(
        &self,
        x: &DigitalState,
        action: u32,
        env_next: usize,
        labels: PropSet,
        cf: &CfConfig,
    ) -> Vec<Experience<DigitalState>> {
        if cf.top_k == 0 {
            return Vec::new();
        }
        let d_real = action / self.n_env_actions;
        let a = action % self.n_env_actions;
        let labels = self.core.labels.translate(labels);
        self.templates(x, labels, cf)
            .iter()
            .filter(|t| !(t.u == x.u && t.v == x.v && t.d == d_real))
            .take(cf.top_k)
            .map(|t| Experience {
                from: DigitalState { s: x.s, u: t.u, v: t.v },
                action: t.d * self.n_env_actions + a,
                reward: t.reward,
                to: DigitalState {
                    s: env_next as u32,
                    u: t.next_u,
                    v: t.next_v,
                },
                delay: t.d as f64 / self.kappa as f64,
                terminal: t.terminal,
                counterfactual: true,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::env::{rng_from_seed, Grid2x2, Line3};

    fn fig3(gamma: f64) -> DigitalProduct {
        DigitalProduct::new(
            Arc::new(Grid2x2),
            Arc::new(bundled::load("fig3")),
            Interpretation::Digital,
            ProductConfig {
                gamma,
                no_match_penalty: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn fig3_first_step() {
        let p = fig3(0.9);
        let mut rng = rng_from_seed(0);
        let x = p.initial_state(&mut rng);
        let up = p.env().action_index("up").unwrap();
        let out = p.step(&x, p.encode(2, up), &mut rng);
        assert_eq!((out.next.s, out.next.u, out.next.v[0]), (1, 1, 3));
        assert!((out.reward - 1.2).abs() < 1e-12);
        assert!(!out.terminal);
    }

    #[test]
    fn action_count() {
        let p = fig3(0.9);
        // M_d = 5 and four moves
        assert_eq!(p.num_actions(), 24);
        let taxi = DigitalProduct::new(
            Arc::new(crate::env::Taxi::new()),
            Arc::new(bundled::load("trm1")),
            Interpretation::Digital,
            ProductConfig::default(),
        )
        .unwrap();
        assert_eq!(taxi.num_actions(), 11 * 6);
    }

    #[test]
    fn no_match_terminates_with_penalty() {
        let p = DigitalProduct::new(
            Arc::new(Grid2x2),
            Arc::new(bundled::load("fig3")),
            Interpretation::Digital,
            ProductConfig {
                gamma: 0.9,
                no_match_penalty: -3.0,
            },
        )
        .unwrap();
        let mut rng = rng_from_seed(0);
        let x = p.initial_state(&mut rng);
        // moving up immediately: p with x = 1, guard x > 2 fails
        let out = p.step(&x, p.encode(0, 0), &mut rng);
        assert!(out.no_match && out.terminal);
        assert_eq!(out.reward, -3.0);
    }

    #[test]
    fn discretized_fig6_return() {
        let p = DigitalProduct::new(
            Arc::new(Line3),
            Arc::new(bundled::load("fig6")),
            Interpretation::Discretized { kappa: 10 },
            ProductConfig {
                gamma: 0.9,
                no_match_penalty: 0.0,
            },
        )
        .unwrap();
        let mut rng = rng_from_seed(0);
        let x = p.initial_state(&mut rng);
        let a = p.step(&x, p.encode(1, 0), &mut rng);
        let b = p.step(&a.next, p.encode(0, 0), &mut rng);
        assert!(b.terminal);
        let g = a.reward + 0.9f64.powf(1.1) * b.reward;
        assert!((g - 11.13).abs() < 0.05, "{g}");
        // x stays on the tick grid, y is past its bound of 10 ticks
        assert_eq!(a.next.v[..2], [11, SAT_TICKS]);
    }

    #[test]
    fn counterfactual_proposes_enabling_delay() {
        let p = fig3(0.9);
        let x = DigitalState { s: 0, u: 0, v: [3, 0, 0, 0] };
        let up = p.env().action_index("up").unwrap() as u32;
        let cfs = p.counterfactuals(&x, up, 1, PropSet::singleton(0), &CfConfig { radius: 3, top_k: 100, vary_states: false });
        // from v = 1 a delay of 1 or more fires theta1 (1 + d + 1 > 2)
        assert!(cfs.iter().any(|e| e.from.v[0] == 1 && e.delay == 1.0 && e.to.u == 1));
        assert!(cfs.iter().any(|e| e.from.v[0] == 1 && e.delay == 2.0 && e.to.u == 1));
        assert!(!cfs.iter().any(|e| e.from.v[0] == 1 && e.delay == 0.0));
        assert!(cfs.iter().all(|e| e.counterfactual));
        let none = p.counterfactuals(&x, up, 1, PropSet::singleton(0), &CfConfig { radius: 0, top_k: 0, vary_states: false });
        assert!(none.is_empty());
    }
}
