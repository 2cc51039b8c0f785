//! Region abstraction of clock space, corner points, and the corner
//! configuration advance operator.
//!
//! A region stores, per clock, its integral part `h` and the rank of its
//! fractional class: rank 0 is the class of integral clocks `X_0`, ranks
//! `1..=p` order the non-integral classes by increasing fractional part.
//! A clock beyond its maximum constant is saturated: `h == SATURATED`,
//! rank 0.

use std::fmt;

use crate::trm::{ClockValuation, Guard};

/// Integral-part marker of a saturated clock.
pub const SATURATED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    h: Vec<u32>,
    rank: Vec<u8>,
}

impl Region {
    /// The region of the all-zero valuation.
    pub fn zero(n: usize) -> Region {
        Region {
            h: vec![0; n],
            rank: vec![0; n],
        }
    }

    /// Builds a region from raw parts without validation; see
    /// [`RegionSpace::is_valid`].
    pub fn from_parts(h: Vec<u32>, rank: Vec<u8>) -> Region {
        assert_eq!(h.len(), rank.len());
        Region { h, rank }
    }

    pub fn num_clocks(&self) -> usize {
        self.h.len()
    }

    /// Integral parts; saturated clocks report [`SATURATED`].
    pub fn h(&self) -> &[u32] {
        &self.h
    }

    pub fn rank(&self) -> &[u8] {
        &self.rank
    }

    pub fn is_saturated(&self, x: usize) -> bool {
        self.h[x] == SATURATED
    }

    /// Number of non-integral classes `p`.
    pub fn num_classes(&self) -> usize {
        self.rank.iter().copied().max().unwrap_or(0) as usize
    }

    /// The ordered partition `[X_0, X_1, ..., X_p]`. Saturated clocks sit
    /// in `X_0`.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes() + 1];
        for (x, r) in self.rank.iter().enumerate() {
            out[*r as usize].push(x);
        }
        out
    }

    /// Renders as `h={x:1,y:0}; frac=[{} < {x} < {y}]`.
    pub fn render(&self, clocks: &[String]) -> String {
        let name = |x: usize| clocks.get(x).cloned().unwrap_or_else(|| format!("c{x}"));
        let hs: Vec<String> = self
            .h
            .iter()
            .enumerate()
            .map(|(x, h)| {
                if *h == SATURATED {
                    format!("{}:∞", name(x))
                } else {
                    format!("{}:{}", name(x), h)
                }
            })
            .collect();
        let classes: Vec<String> = self
            .partition()
            .iter()
            .map(|c| format!("{{{}}}", c.iter().map(|x| name(*x)).collect::<Vec<_>>().join(",")))
            .collect();
        format!("h={{{}}}; frac=[{}]", hs.join(","), classes.join(" < "))
    }

    fn renumber(&mut self) {
        let mut used: Vec<u8> = self.rank.iter().copied().filter(|r| *r > 0).collect();
        used.sort_unstable();
        used.dedup();
        for r in self.rank.iter_mut() {
            if *r > 0 {
                *r = used.binary_search(r).unwrap() as u8 + 1;
            }
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&[]))
    }
}

/// A region paired with one of its corner points.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CornerConfig {
    pub region: Region,
    pub corner: Vec<u32>,
}

impl CornerConfig {
    pub fn zero(n: usize) -> CornerConfig {
        CornerConfig {
            region: Region::zero(n),
            corner: vec![0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("guard constant {constant} on clock {clock} exceeds its maximum constant {max}")]
    ConstantTooLarge { clock: usize, constant: u32, max: u32 },
    #[error("epsilon {0} is outside (0, 1/(2(|X|+1)))")]
    Epsilon(f64),
    #[error("corner is not a corner of the region")]
    NotACorner,
}

/// Regions over a fixed clock set with per-clock maximum constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionSpace {
    max: Vec<u32>,
}

impl RegionSpace {
    pub fn new(max: Vec<u32>) -> RegionSpace {
        RegionSpace { max }
    }

    pub fn max_constants(&self) -> &[u32] {
        &self.max
    }

    pub fn num_clocks(&self) -> usize {
        self.max.len()
    }

    /// The unique region containing `v`. Values above `M_x` (including `∞`)
    /// are saturated.
    pub fn region_of(&self, v: &ClockValuation) -> Region {
        let n = self.max.len();
        let mut h = vec![0u32; n];
        let mut fracs: Vec<(f64, usize)> = Vec::new();
        for (x, &val) in v.values().iter().enumerate() {
            if val > self.max[x] as f64 {
                h[x] = SATURATED;
                continue;
            }
            let fl = val.floor();
            h[x] = fl as u32;
            let f = val - fl;
            if f > 0.0 {
                fracs.push((f, x));
            }
        }
        fracs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rank = vec![0u8; n];
        let mut r = 0u8;
        let mut last = f64::NAN;
        for (f, x) in fracs {
            if f != last {
                r += 1;
                last = f;
            }
            rank[x] = r;
        }
        Region { h, rank }
    }

    /// True iff every valuation of `r` satisfies `g`.
    pub fn try_satisfies(&self, r: &Region, g: &Guard) -> Result<bool, RegionError> {
        for a in g.atoms() {
            if a.constant > self.max[a.clock] {
                return Err(RegionError::ConstantTooLarge {
                    clock: a.clock,
                    constant: a.constant,
                    max: self.max[a.clock],
                });
            }
        }
        Ok(self.satisfies(r, g))
    }

    /// Region-level guard check; assumes guard constants do not exceed the
    /// maximum constants.
    pub fn satisfies(&self, r: &Region, g: &Guard) -> bool {
        g.bounds().iter().enumerate().all(|(x, iv)| {
            if iv.is_full() {
                return true;
            }
            let h = r.h[x];
            if h == SATURATED {
                iv.hi.is_none() && iv.lo <= self.max[x]
            } else if r.rank[x] == 0 {
                iv.contains(h as f64)
            } else {
                iv.lo <= h && iv.hi.is_none_or(|(hi, _)| hi > h)
            }
        })
    }

    /// The region reached immediately when time elapses from `r`. The fully
    /// saturated region is its own successor.
    pub fn time_successor(&self, r: &Region) -> Region {
        let mut out = r.clone();
        let integral: Vec<usize> = (0..r.h.len()).filter(|x| r.rank[*x] == 0 && r.h[*x] != SATURATED).collect();
        if !integral.is_empty() {
            let mut moved = false;
            for &x in &integral {
                if r.h[x] >= self.max[x] {
                    out.h[x] = SATURATED;
                } else {
                    moved = true;
                }
            }
            if moved {
                for rk in out.rank.iter_mut() {
                    if *rk > 0 {
                        *rk += 1;
                    }
                }
                for &x in &integral {
                    if out.h[x] != SATURATED {
                        out.rank[x] = 1;
                    }
                }
            }
            return out;
        }
        let p = r.num_classes() as u8;
        if p == 0 {
            return out;
        }
        for x in 0..r.h.len() {
            if r.rank[x] == p {
                out.h[x] += 1;
                out.rank[x] = 0;
            }
        }
        out
    }

    /// The region immediately before `r` in time, if it exists. Saturated
    /// clocks stay saturated.
    pub fn time_predecessor(&self, r: &Region) -> Option<Region> {
        let mut out = r.clone();
        let integral: Vec<usize> = (0..r.h.len()).filter(|x| r.rank[*x] == 0 && r.h[*x] != SATURATED).collect();
        if !integral.is_empty() {
            if integral.iter().any(|x| r.h[*x] == 0) {
                return None;
            }
            let p = r.num_classes() as u8;
            for &x in &integral {
                out.h[x] -= 1;
                out.rank[x] = p + 1;
            }
            return Some(out);
        }
        if r.num_classes() == 0 {
            return None;
        }
        for rk in out.rank.iter_mut() {
            if *rk > 0 {
                *rk -= 1;
            }
        }
        Some(out)
    }

    /// Resets the listed clocks to zero.
    pub fn reset(&self, r: &Region, clocks: &[usize]) -> Region {
        if clocks.is_empty() {
            return r.clone();
        }
        let mut out = r.clone();
        for &x in clocks {
            out.h[x] = 0;
            out.rank[x] = 0;
        }
        out.renumber();
        out
    }

    /// The `p + 1` corner points of `r`, from all classes rounded down to
    /// all rounded up. Saturated clocks sit at their maximum constant.
    pub fn corners(&self, r: &Region) -> Vec<Vec<u32>> {
        let p = r.num_classes();
        (0..=p).map(|k| self.corner(r, k)).collect()
    }

    /// The corner with the `k` highest fractional classes rounded up.
    pub fn corner(&self, r: &Region, k: usize) -> Vec<u32> {
        let p = r.num_classes();
        (0..r.h.len())
            .map(|x| {
                if r.h[x] == SATURATED {
                    self.max[x]
                } else if r.rank[x] as usize > p - k {
                    r.h[x] + 1
                } else {
                    r.h[x]
                }
            })
            .collect()
    }

    /// Index `k` such that `corner == self.corner(r, k)`.
    pub fn corner_index(&self, r: &Region, corner: &[u32]) -> Option<usize> {
        (0..=r.num_classes()).find(|k| self.corner(r, *k) == corner)
    }

    pub fn is_corner(&self, r: &Region, corner: &[u32]) -> bool {
        self.corner_index(r, corner).is_some()
    }

    /// Shifts every integral part by `d`, saturating clocks that pass their
    /// maximum constant.
    pub fn shift(&self, r: &Region, d: u32) -> Region {
        let mut out = r.clone();
        let mut changed = false;
        for x in 0..r.h.len() {
            let h = r.h[x];
            if h == SATURATED {
                continue;
            }
            let nh = h + d;
            let sat = if r.rank[x] == 0 { nh > self.max[x] } else { nh >= self.max[x] };
            if sat {
                out.h[x] = SATURATED;
                changed |= out.rank[x] != 0;
                out.rank[x] = 0;
            } else {
                out.h[x] = nh;
            }
        }
        if changed {
            out.renumber();
        }
        out
    }

    /// `(R, α) ⊕ (d, σ)`: shift by `d`, then take `σ` time successors
    /// (predecessors when negative). Rejected when a predecessor is
    /// undefined, when stepping back could un-saturate a clock, or when the
    /// shifted corner is not a corner of the result.
    pub fn advance(&self, c: &CornerConfig, d: u32, sigma: i32) -> Option<CornerConfig> {
        let mut region = self.shift(&c.region, d);
        let corner: Vec<u32> = c
            .corner
            .iter()
            .zip(&self.max)
            .map(|(a, m)| (a + d).min(*m))
            .collect();
        if sigma > 0 {
            for _ in 0..sigma {
                region = self.time_successor(&region);
            }
        } else if sigma < 0 {
            let unsafe_sat = (0..self.max.len())
                .any(|x| region.h[x] == SATURATED && c.region.h[x] != SATURATED && c.corner[x] + d <= self.max[x]);
            if unsafe_sat {
                return None;
            }
            for _ in 0..(-sigma) {
                region = self.time_predecessor(&region)?;
            }
        }
        if !self.is_corner(&region, &corner) {
            return None;
        }
        Some(CornerConfig { region, corner })
    }

    /// A valuation inside `c.region` within `epsilon` of `c.corner`. Class
    /// offsets are powers of two so that the result is exact in binary
    /// floating point.
    pub fn concretize(&self, c: &CornerConfig, epsilon: f64) -> Result<ClockValuation, RegionError> {
        let n = self.max.len();
        if !(epsilon > 0.0 && epsilon < 1.0 / (2.0 * (n as f64 + 1.0))) {
            return Err(RegionError::Epsilon(epsilon));
        }
        let r = &c.region;
        let p = r.num_classes();
        let k = self.corner_index(r, &c.corner).ok_or(RegionError::NotACorner)?;
        let limit = epsilon / (p as f64 + 1.0);
        let mut off = 1.0;
        while off > limit {
            off /= 2.0;
        }
        let values = (0..n)
            .map(|x| {
                let h = r.h[x];
                let rank = r.rank[x] as usize;
                if h == SATURATED {
                    self.max[x] as f64 + off
                } else if rank == 0 {
                    h as f64
                } else if rank > p - k {
                    h as f64 + 1.0 - (p + 1 - rank) as f64 * off
                } else {
                    h as f64 + rank as f64 * off
                }
            })
            .collect();
        Ok(ClockValuation(values))
    }

    /// Every region over this clock set, each exactly once.
    pub fn enumerate(&self) -> Vec<Region> {
        let n = self.max.len();
        // per clock: (h, fractional?) choices
        let choices: Vec<Vec<(u32, bool)>> = self
            .max
            .iter()
            .map(|&m| {
                let mut c: Vec<(u32, bool)> = (0..=m).map(|h| (h, false)).collect();
                c.extend((0..m).map(|h| (h, true)));
                c.push((SATURATED, false));
                c
            })
            .collect();
        let mut out = Vec::new();
        let mut pick = vec![0usize; n];
        loop {
            let h: Vec<u32> = (0..n).map(|x| choices[x][pick[x]].0).collect();
            let frac: Vec<usize> = (0..n).filter(|x| choices[*x][pick[*x]].1).collect();
            for ranks in ordered_partitions(frac.len()) {
                let mut rank = vec![0u8; n];
                for (i, x) in frac.iter().enumerate() {
                    rank[*x] = ranks[i];
                }
                out.push(Region { h: h.clone(), rank });
            }
            let mut k = 0;
            while k < n {
                pick[k] += 1;
                if pick[k] < choices[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        out
    }

    /// Structural validity of a region for this space.
    pub fn is_valid(&self, r: &Region) -> bool {
        if r.h.len() != self.max.len() || r.rank.len() != self.max.len() {
            return false;
        }
        let p = r.num_classes();
        let contiguous = (1..=p).all(|k| r.rank.contains(&(k as u8)));
        contiguous
            && (0..self.max.len()).all(|x| {
                let h = r.h[x];
                if h == SATURATED {
                    r.rank[x] == 0
                } else if r.rank[x] == 0 {
                    h <= self.max[x]
                } else {
                    h < self.max[x]
                }
            })
    }
}

/// All surjective rank assignments `{0..n} -> {1..=k}` over every `k`.
fn ordered_partitions(n: usize) -> Vec<Vec<u8>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let total = n.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let ranks: Vec<u8> = (0..n)
            .map(|_| {
                let r = (c % n) as u8 + 1;
                c /= n;
                r
            })
            .collect();
        let k = *ranks.iter().max().unwrap();
        if (1..=k).all(|j| ranks.contains(&j)) {
            out.push(ranks);
        }
    }
    out
}
