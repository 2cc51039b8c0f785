use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use rustc_hash::FxHashMap;

use super::{top_k_by_reward, CfConfig, Core, Experience, Outcome, Product, ProductConfig};
use crate::env::{Environment, MissingProposition, SimRng};
use crate::regions::{CornerConfig, Region, RegionSpace};
use crate::trm::{accrual_factor, PropSet, Semantics, StateId, Trm};

/// `(s, u, (R, α))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CornerState {
    pub s: u32,
    pub u: u32,
    pub config: CornerConfig,
}

/// A valid delay-successor pair from some configuration and where it leads
/// (before the machine fires).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CornerMove {
    pub delay: u32,
    pub sigma: i32,
    pub result: CornerConfig,
}

#[derive(Clone, Debug)]
struct CfTemplate {
    u: u32,
    config: CornerConfig,
    delay: u32,
    sigma: i32,
    reward: f64,
    next_u: u32,
    next_config: CornerConfig,
    terminal: bool,
}

type CfKey = (u32, u32, CornerConfig, PropSet, CfConfig);

/// Corner-point abstraction product. Actions are `(d, σ, a)`; the machine
/// state advances with `(R, α) ⊕ (d + 1, σ)` and guards are checked on the
/// resulting region.
pub struct CornerProduct {
    core: Core,
    space: RegionSpace,
    max_delay: u32,
    n_sigma: u32,
    n_env_actions: u32,
    accrual: Vec<f64>,
    moves: RefCell<FxHashMap<CornerConfig, Rc<Vec<CornerMove>>>>,
    legal: RefCell<FxHashMap<CornerConfig, Rc<[u32]>>>,
    cf_cache: RefCell<FxHashMap<CfKey, Rc<Vec<CfTemplate>>>>,
}

impl CornerProduct {
    pub fn new(env: Arc<dyn Environment>, trm: Arc<Trm>, config: ProductConfig) -> Result<CornerProduct, MissingProposition> {
        let consts = trm.max_constants();
        let n = trm.num_clocks() as u32;
        let core = Core::new(env, trm, config)?;
        let accrual = (0..=consts.delay)
            .map(|d| accrual_factor(d as f64, config.gamma, Semantics::RealTime))
            .collect();
        Ok(CornerProduct {
            n_env_actions: core.env.num_actions() as u32,
            core,
            space: RegionSpace::new(consts.per_clock),
            max_delay: consts.delay,
            n_sigma: 4 * n + 1,
            accrual,
            moves: RefCell::new(FxHashMap::default()),
            legal: RefCell::new(FxHashMap::default()),
            cf_cache: RefCell::new(FxHashMap::default()),
        })
    }

    pub fn space(&self) -> &RegionSpace {
        &self.space
    }

    pub fn max_delay(&self) -> u32 {
        self.max_delay
    }

    fn sigma_bound(&self) -> i32 {
        (self.n_sigma as i32 - 1) / 2
    }

    pub fn encode(&self, delay: u32, sigma: i32, env_action: usize) -> u32 {
        let si = (sigma + self.sigma_bound()) as u32;
        (delay * self.n_sigma + si) * self.n_env_actions + env_action as u32
    }

    /// `(d, σ, a)` of an action.
    pub fn decode(&self, action: u32) -> (u32, i32, usize) {
        let a = action % self.n_env_actions;
        let rest = action / self.n_env_actions;
        let si = rest % self.n_sigma;
        let d = rest / self.n_sigma;
        (d, si as i32 - self.sigma_bound(), a as usize)
    }

    /// Valid `(d, σ)` pairs from a configuration. Among pairs with the same
    /// delay that reach the same configuration only the smallest `σ` is
    /// kept.
    pub fn moves(&self, c: &CornerConfig) -> Rc<Vec<CornerMove>> {
        if let Some(m) = self.moves.borrow().get(c) {
            return m.clone();
        }
        let b = self.sigma_bound();
        let mut out: Vec<CornerMove> = Vec::new();
        for delay in 0..=self.max_delay {
            let first = out.len();
            for sigma in -b..=b {
                if let Some(result) = self.space.advance(c, delay + 1, sigma) {
                    if !out[first..].iter().any(|m| m.result == result) {
                        out.push(CornerMove { delay, sigma, result });
                    }
                }
            }
        }
        let out = Rc::new(out);
        self.moves.borrow_mut().insert(c.clone(), out.clone());
        out
    }

    fn fire(&self, u: StateId, r: &CornerConfig, labels: PropSet) -> Option<(usize, u32, CornerConfig)> {
        let trm = &self.core.trm;
        let t = trm.fire(u, labels, |g| self.space.satisfies(&r.region, g))?;
        let tr = trm.transition(t);
        let next = if tr.resets.is_empty() {
            r.clone()
        } else {
            let mut corner = r.corner.clone();
            for c in &tr.resets {
                corner[*c] = 0;
            }
            CornerConfig {
                region: self.space.reset(&r.region, &tr.resets),
                corner,
            }
        };
        Some((t, tr.target as u32, next))
    }

    /// Configurations whose corner lies within `radius` of `c.corner`,
    /// obtained by shifting integral parts of non-saturated clocks.
    fn nearby(&self, c: &CornerConfig, radius: u32) -> Vec<CornerConfig> {
        let n = self.space.num_clocks();
        let r = radius as i64;
        let mut out = Vec::new();
        let mut delta = vec![-r; n];
        for (x, d) in delta.iter_mut().enumerate() {
            if c.region.is_saturated(x) {
                *d = 0;
            }
        }
        loop {
            let mut h = c.region.h().to_vec();
            let mut corner = c.corner.clone();
            let mut ok = true;
            for x in 0..n {
                if c.region.is_saturated(x) {
                    continue;
                }
                let nh = h[x] as i64 + delta[x];
                let na = corner[x] as i64 + delta[x];
                if nh < 0 || na < 0 {
                    ok = false;
                    break;
                }
                h[x] = nh as u32;
                corner[x] = na as u32;
            }
            if ok {
                let region = Region::from_parts(h, c.region.rank().to_vec());
                if self.space.is_valid(&region) && self.space.is_corner(&region, &corner) {
                    out.push(CornerConfig { region, corner });
                }
            }
            let mut k = 0;
            while k < n {
                if !c.region.is_saturated(k) && delta[k] < r {
                    delta[k] += 1;
                    break;
                }
                delta[k] = if c.region.is_saturated(k) { 0 } else { -r };
                k += 1;
            }
            if k == n {
                break;
            }
        }
        out
    }

    fn templates(&self, x: &CornerState, labels: PropSet, cf: &CfConfig) -> Rc<Vec<CfTemplate>> {
        let key = (self.core.rate_class[x.s as usize], x.u, x.config.clone(), labels, *cf);
        if let Some(t) = self.cf_cache.borrow().get(&key) {
            return t.clone();
        }
        let trm = &self.core.trm;
        let s = x.s as usize;
        let states: Vec<u32> = if cf.vary_states {
            (0..trm.num_states()).filter(|u| !trm.is_terminal(*u)).map(|u| u as u32).collect()
        } else {
            vec![x.u]
        };
        let mut out = Vec::new();
        for config in self.nearby(&x.config, cf.radius) {
            let moves = self.moves(&config);
            for &u in &states {
                for m in moves.iter() {
                    if let Some((t, next_u, next_config)) = self.fire(u as usize, &m.result, labels) {
                        let reward = self.accrual[m.delay as usize] * self.core.rates[u as usize][s] + trm.transition(t).reward;
                        out.push(CfTemplate {
                            u,
                            config: config.clone(),
                            delay: m.delay,
                            sigma: m.sigma,
                            reward,
                            next_u,
                            next_config,
                            terminal: trm.is_terminal(next_u as usize),
                        });
                    }
                }
            }
        }
        let kept = Rc::new(top_k_by_reward(out, cf.top_k + 1, |t| t.reward, |t| {
            (t.u, t.config.clone(), t.delay, t.sigma)
        }));
        self.cf_cache.borrow_mut().insert(key, kept.clone());
        kept
    }
}

impl Product for CornerProduct {
    type State = CornerState;

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
        ((self.max_delay + 1) * self.n_sigma * self.n_env_actions) as usize
    }

    fn initial_state(&self, rng: &mut SimRng) -> CornerState {
        CornerState {
            s: self.core.env.reset(rng) as u32,
            u: self.core.trm.initial() as u32,
            config: CornerConfig::zero(self.space.num_clocks()),
        }
    }

    fn legal_actions(&self, x: &CornerState) -> Rc<[u32]> {
        if let Some(l) = self.legal.borrow().get(&x.config) {
            return l.clone();
        }
        let mut acts: Vec<u32> = Vec::new();
        for m in self.moves(&x.config).iter() {
            for a in 0..self.n_env_actions as usize {
                acts.push(self.encode(m.delay, m.sigma, a));
            }
        }
        acts.sort_unstable();
        let acts: Rc<[u32]> = acts.into();
        self.legal.borrow_mut().insert(x.config.clone(), acts.clone());
        acts
    }

    fn delay(&self, action: u32) -> f64 {
        self.decode(action).0 as f64
    }

    fn env_action(&self, action: u32) -> usize {
        self.decode(action).2
    }

    fn env_state(&self, x: &CornerState) -> usize {
        x.s as usize
    }

    fn trm_state(&self, x: &CornerState) -> StateId {
        x.u as usize
    }

    fn describe_action(&self, action: u32) -> String {
        let (d, sigma, a) = self.decode(action);
        format!("wait {d} (successor {sigma:+}) then {}", self.core.env.action_name(a))
    }

    /// # Panics
    ///
    /// Panics if `action` is not legal in `x`.
    fn successor(&self, x: &CornerState, action: u32, env_next: usize, env_labels: PropSet) -> Outcome<CornerState> {
        let (d, sigma, _) = self.decode(action);
        let moved = self
            .space
            .advance(&x.config, d + 1, sigma)
            .expect("corner action must be legal");
        let labels = self.core.labels.translate(env_labels);
        let accrued = self.accrual[d as usize] * self.core.rates[x.u as usize][x.s as usize];
        match self.fire(x.u as usize, &moved, labels) {
            Some((t, u, config)) => Outcome {
                next: CornerState {
                    s: env_next as u32,
                    u,
                    config,
                },
                reward: accrued + self.core.trm.transition(t).reward,
                terminal: self.core.trm.is_terminal(u as usize),
                no_match: false,
                transition: Some(t),
                labels,
            },
            None => Outcome {
                next: CornerState {
                    s: env_next as u32,
                    u: x.u,
                    config: moved,
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
        x: &CornerState,
        action: u32,
        env_next: usize,
        labels: PropSet,
        cf: &CfConfig,
    ) -> Vec<Experience<CornerState>> {
        if cf.top_k == 0 {
            return Vec::new();
        }
        let (d_real, sigma_real, a) = self.decode(action);
        let labels = self.core.labels.translate(labels);
        self.templates(x, labels, cf)
            .iter()
            .filter(|t| !(t.u == x.u && t.config == x.config && t.delay == d_real && t.sigma == sigma_real))
            .take(cf.top_k)
            .map(|t| Experience {
                from: CornerState {
                    s: x.s,
                    u: t.u,
                    config: t.config.clone(),
                },
                action: self.encode(t.delay, t.sigma, a),
                reward: t.reward,
                to: CornerState {
                    s: env_next as u32,
                    u: t.next_u,
                    config: t.next_config.clone(),
                },
                delay: t.delay as f64,
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
    use crate::env::{rng_from_seed, Line3};
    use crate::regions::SATURATED;

    fn fig6() -> CornerProduct {
        CornerProduct::new(
            Arc::new(Line3),
            Arc::new(bundled::load("fig6")),
            ProductConfig {
                gamma: 0.9,
                no_match_penalty: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn encoding_round_trips() {
        let p = fig6();
        for d in 0..=3 {
            for s in -4..=4 {
                assert_eq!(p.decode(p.encode(d, s, 0)), (d, s, 0));
            }
        }
        assert_eq!(p.num_actions(), 4 * 9);
    }

    #[test]
    fn fig6_corner_reaches_supremum() {
        let p = fig6();
        let mut rng = rng_from_seed(0);
        let x = p.initial_state(&mut rng);
        let legal = p.legal_actions(&x);
        let first = p.encode(0, 1, 0);
        assert!(legal.contains(&first));
        let a = p.step(&x, first, &mut rng);
        // y is saturated just after one time unit: the +5 loop fires
        assert!((a.reward - 5.0).abs() < 1e-12);
        let b = p.step(&a.next, p.encode(0, 0, 0), &mut rng);
        assert!(b.terminal);
        assert!((b.reward - 7.0).abs() < 1e-12);
        assert!((a.reward + 0.9 * b.reward - 11.3).abs() < 1e-12);
    }

    #[test]
    fn zero_delay_no_successor_is_always_legal() {
        let p = fig6();
        let mut rng = rng_from_seed(0);
        let mut x = p.initial_state(&mut rng);
        loop {
            assert!(p.legal_actions(&x).contains(&p.encode(0, 0, 0)));
            let out = p.step(&x, p.encode(1, 0, 0), &mut rng);
            if out.terminal {
                break;
            }
            x = out.next;
        }
    }

    #[test]
    fn saturated_configuration_only_keeps_sigma_zero() {
        let p = fig6();
        let sat = CornerConfig {
            region: Region::from_parts(vec![SATURATED, SATURATED], vec![0, 0]),
            corner: vec![3, 1],
        };
        assert!(sat.region.h().iter().all(|h| *h == SATURATED));
        for m in p.moves(&sat).iter() {
            assert_eq!(m.sigma, 0);
        }
    }
}
