//! Subshifts of finite type: admissible words, eventually periodic points,
//! the shift map, periodic-orbit enumeration and the closing construction.
//!
//! Points are bi-infinite sequences stored as `left_period^∞ · center ·
//! right_period^∞` together with the index of coordinate 0 inside `center`.
//! The metric is `d(x, y) = e^{-s}` with `s = min{|i| : x_i != y_i}`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = u8;

const MODULE: &str = "sft_base";
const SYMBOL_CHARS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Default cap on the period accepted by [`SftSystem::enumerate_periodic`].
pub const DEFAULT_N_MAX: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosingConstants {
    pub c: f64,
    pub theta: f64,
}

impl Default for ClosingConstants {
    /// Frozen by [`SftSystem::calibrate_closing_constant`] over the stress
    /// suite: the shortest-connector construction never needs `c > 1`.
    fn default() -> Self {
        ClosingConstants { c: 1.0, theta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftSystem {
    alphabet_size: usize,
    transitions: Vec<Vec<bool>>,
    connection_bound: usize,
    closing: ClosingConstants,
    n_max: usize,
    /// connectors[a][b]: shortest word w with a·w·b admissible.
    connectors: Vec<Vec<Vec<Symbol>>>,
}

impl SftSystem {
    /// Build a system from 0/1 transition rows. Rejects reducible graphs.
    pub fn new(transitions: Vec<Vec<u8>>) -> Result<Self> {
        let n = transitions.len();
        if n == 0 || n > SYMBOL_CHARS.len() {
            return Err(Error::domain(
                MODULE,
                format!("alphabet size must be in 1..={}", SYMBOL_CHARS.len()),
            ));
        }
        let mut t = vec![vec![false; n]; n];
        for (a, row) in transitions.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(MODULE, format!("transition row {a} has length {}", row.len())));
            }
            for (b, &v) in row.iter().enumerate() {
                t[a][b] = match v {
                    0 => false,
                    1 => true,
                    _ => return Err(Error::domain(MODULE, format!("transition entry ({a},{b}) is not 0/1"))),
                };
            }
        }
        let connectors = shortest_connectors(&t)?;
        let connection_bound = connectors
            .iter()
            .flat_map(|row| row.iter().map(Vec::len))
            .max()
            .unwrap_or(0);
        Ok(SftSystem {
            alphabet_size: n,
            transitions: t,
            connection_bound,
            closing: ClosingConstants::default(),
            n_max: DEFAULT_N_MAX,
            connectors,
        })
    }

    pub fn full_shift(k: usize) -> Self {
        Self::new(vec![vec![1; k]; k]).expect("full shift is irreducible")
    }

    /// Transitions `[[1,1],[1,0]]`: the symbol 1 never follows itself.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean shift is irreducible")
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_closing_constants(mut self, closing: ClosingConstants) -> Self {
        self.closing = closing;
        self
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn transition_rows(&self) -> Vec<Vec<u8>> {
        self.transitions
            .iter()
            .map(|r| r.iter().map(|&b| b as u8).collect())
            .collect()
    }

    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.transitions[a as usize][b as usize]
    }

    pub fn connection_bound(&self) -> usize {
        self.connection_bound
    }

    pub fn closing_constants(&self) -> ClosingConstants {
        self.closing
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Shortest word `w` such that `a · w · b` is admissible.
    pub fn connector(&self, a: Symbol, b: Symbol) -> &[Symbol] {
        &self.connectors[a as usize][b as usize]
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        word.iter().all(|&s| (s as usize) < self.alphabet_size)
            && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    pub fn is_cyclically_admissible(&self, word: &[Symbol]) -> bool {
        !word.is_empty()
            && self.is_admissible(word)
            && self.allowed(word[word.len() - 1], word[0])
    }

    /// trace(Mⁿ), the number of points fixed by σⁿ.
    pub fn trace_power(&self, n: usize) -> u128 {
        let k = self.alphabet_size;
        let m: Vec<Vec<u128>> = self
            .transitions
            .iter()
            .map(|r| r.iter().map(|&b| b as u128).collect())
            .collect();
        let mut p: Vec<Vec<u128>> = (0..k)
            .map(|i| (0..k).map(|j| (i == j) as u128).collect())
            .collect();
        for _ in 0..n {
            let mut next = vec![vec![0u128; k]; k];
            for i in 0..k {
                for l in 0..k {
                    if p[i][l] == 0 {
                        continue;
                    }
                    for j in 0..k {
                        next[i][j] += p[i][l] * m[l][j];
                    }
                }
            }
            p = next;
        }
        (0..k).map(|i| p[i][i]).sum()
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::domain(MODULE, "period must be positive"));
        }
        if n > self.n_max {
            return Err(Error::ResourceLimit {
                module: MODULE,
                message: format!("period {n} exceeds configured cutoff {}", self.n_max),
            });
        }
        Ok(())
    }

    /// Every cyclically admissible word of length `n` (all of Fix(σⁿ)), in
    /// lexicographic order.
    pub fn enumerate_periodic(&self, n: usize) -> Result<Vec<PeriodicOrbit>> {
        self.check_n(n)?;
        let mut out = Vec::new();
        let mut word = Vec::with_capacity(n);
        self.extend_words(n, &mut word, &mut out);
        Ok(out)
    }

    fn extend_words(&self, n: usize, word: &mut Vec<Symbol>, out: &mut Vec<PeriodicOrbit>) {
        if word.len() == n {
            if self.allowed(word[n - 1], word[0]) {
                out.push(PeriodicOrbit {
                    word: word.clone(),
                    period: n,
                });
            }
            return;
        }
        for s in 0..self.alphabet_size as Symbol {
            if word.last().is_none_or(|&p| self.allowed(p, s)) {
                word.push(s);
                self.extend_words(n, word, out);
                word.pop();
            }
        }
    }

    /// One representative (lexicographically least rotation) per cyclic
    /// class of length-`n` words. Non-primitive words are kept.
    pub fn enumerate_orbits(&self, n: usize) -> Result<Vec<PeriodicOrbit>> {
        Ok(self
            .enumerate_periodic(n)?
            .into_iter()
            .filter(|o| o.is_least_rotation())
            .collect())
    }

    /// Orbits of prime period `n`, one representative each.
    pub fn enumerate_prime_orbits(&self, n: usize) -> Result<Vec<PeriodicOrbit>> {
        Ok(self
            .enumerate_orbits(n)?
            .into_iter()
            .filter(|o| primitive_root_len(&o.word) == n)
            .collect())
    }

    /// Prime orbits of every period `1..=max_period`, by period then word.
    pub fn prime_orbits_up_to(&self, max_period: usize) -> Result<Vec<PeriodicOrbit>> {
        let mut all = Vec::new();
        for n in 1..=max_period {
            all.extend(self.enumerate_prime_orbits(n)?);
        }
        Ok(all)
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        let ok = self.is_cyclically_admissible(&x.left_period)
            && self.is_cyclically_admissible(&x.right_period)
            && self.is_admissible(&x.center)
            && match (x.center.first(), x.center.last()) {
                (Some(&f), Some(&l)) => {
                    self.allowed(*x.left_period.last().unwrap(), f) && self.allowed(l, x.right_period[0])
                }
                _ => self.allowed(*x.left_period.last().unwrap(), x.right_period[0]),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(MODULE, format!("point {x} is not admissible in this system")))
        }
    }

    /// Shift metric between two points of this system.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(point_distance(x, y))
    }

    /// Closing construction: periodize `x_0 … x_{n-1}` followed by the
    /// shortest connector back to `x_0`, then check the shadowing bound
    /// `d(fⁱx, fⁱp) <= c e^{-θ min(i, n-i)} d(fⁿx, x)` for `i = 0..=n`.
    pub fn close_orbit(&self, x: &Point, n: usize) -> Result<(PeriodicOrbit, usize, ClosingReport)> {
        if n == 0 {
            return Err(Error::domain(MODULE, "closing length must be positive"));
        }
        self.check_point(x)?;
        let mut word: Vec<Symbol> = (0..n as i64).map(|i| x.coord(i)).collect();
        let conn = self.connector(word[n - 1], word[0]).to_vec();
        if !self.is_admissible(&[&[word[n - 1]][..], &conn, &[word[0]]].concat()) {
            return Err(Error::Invariant(format!(
                "no admissible connector from {} to {}",
                word[n - 1], word[0]
            )));
        }
        let j = conn.len();
        word.extend(conn);
        let orbit = PeriodicOrbit {
            period: word.len(),
            word,
        };
        let p = orbit.point();
        let ret = point_distance(&x.shift(n as i64), x);
        let ClosingConstants { c, theta } = self.closing;
        let mut entries = Vec::with_capacity(n + 1);
        let mut verified = true;
        for i in 0..=n {
            let dist = point_distance(&x.shift(i as i64), &p.shift(i as i64));
            let m = i.min(n - i) as f64;
            let bound = c * (-theta * m).exp() * ret;
            // ulp-level slack: both sides are exponentials of integers
            let ok = dist <= bound * (1.0 + 1e-12);
            verified &= ok;
            entries.push(ClosingEntry {
                i,
                distance: dist,
                bound,
            });
        }
        Ok((
            orbit,
            j,
            ClosingReport {
                n,
                connector_len: j,
                return_distance: ret,
                entries,
                verified,
            },
        ))
    }

    /// Smallest `c` making every `(x, n)` case verify with exponent `theta`.
    pub fn calibrate_closing_constant<'a>(
        &self,
        theta: f64,
        cases: impl IntoIterator<Item = (&'a Point, usize)>,
    ) -> Result<f64> {
        let probe = self.clone().with_closing_constants(ClosingConstants { c: 1.0, theta });
        let mut c: f64 = 0.0;
        for (x, n) in cases {
            let (_, _, report) = probe.close_orbit(x, n)?;
            for e in &report.entries {
                if e.distance > 0.0 {
                    c = c.max(e.distance / e.bound);
                }
            }
        }
        Ok(c)
    }

    fn random_walk<R: Rng + ?Sized>(&self, start: Symbol, len: usize, forward: bool, rng: &mut R) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(len);
        let mut cur = start;
        for _ in 0..len {
            let choices: Vec<Symbol> = (0..self.alphabet_size as Symbol)
                .filter(|&s| if forward { self.allowed(cur, s) } else { self.allowed(s, cur) })
                .collect();
            cur = choices[rng.random_range(0..choices.len())];
            out.push(cur);
        }
        out
    }

    /// Random eventually periodic point: a random admissible center of length
    /// in `center_len` with random periodic tails of base length in `tail_len`.
    pub fn random_point<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        center_len: std::ops::RangeInclusive<usize>,
        tail_len: std::ops::RangeInclusive<usize>,
    ) -> Point {
        let len = rng.random_range(center_len).max(1);
        let first = rng.random_range(0..self.alphabet_size) as Symbol;
        let mut center = vec![first];
        center.extend(self.random_walk(first, len - 1, true, rng));
        let offset = rng.random_range(0..len) as i64;
        self.attach_tails(center, offset, tail_len, rng)
    }

    /// Random point agreeing with `x` on coordinates `|i| < s`.
    pub fn random_point_near<R: Rng + ?Sized>(
        &self,
        x: &Point,
        s: usize,
        rng: &mut R,
        tail_len: std::ops::RangeInclusive<usize>,
    ) -> Point {
        let s = s.max(1) as i64;
        let center: Vec<Symbol> = (-(s - 1)..s).map(|i| x.coord(i)).collect();
        let extra_right = rng.random_range(0..4);
        let extra_left = rng.random_range(0..4);
        let mut c = self.random_walk(center[0], extra_left, false, rng);
        c.reverse();
        let lead = c.len() as i64;
        c.extend_from_slice(&center);
        let last = *c.last().unwrap();
        c.extend(self.random_walk(last, extra_right, true, rng));
        self.attach_tails(c, lead + s - 1, tail_len, rng)
    }

    fn attach_tails<R: Rng + ?Sized>(
        &self,
        center: Vec<Symbol>,
        offset: i64,
        tail_len: std::ops::RangeInclusive<usize>,
        rng: &mut R,
    ) -> Point {
        let m = rng.random_range(tail_len.clone()).max(1);
        let mut right = self.random_walk(*center.last().unwrap(), m, true, rng);
        let conn = self.connector(*right.last().unwrap(), right[0]).to_vec();
        right.extend(conn);

        let m = rng.random_range(tail_len).max(1);
        let mut back = self.random_walk(center[0], m, false, rng);
        back.reverse(); // back = l_{-m} .. l_{-1}
        let mut left = self.connector(*back.last().unwrap(), back[0]).to_vec();
        left.extend(back);
        Point::new(left, center, right, offset).expect("tails are nonempty")
    }
}

fn shortest_connectors(t: &[Vec<bool>]) -> Result<Vec<Vec<Vec<Symbol>>>> {
    let n = t.len();
    let mut out = vec![vec![Vec::new(); n]; n];
    for a in 0..n {
        // BFS over successors of a; parent links rebuild the path.
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for b in 0..n {
            if t[a][b] {
                seen[b] = true;
                queue.push_back(b);
            }
        }
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if t[u][v] && !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        for b in 0..n {
            if !seen[b] {
                return Err(Error::domain(
                    MODULE,
                    format!("transition graph is not irreducible: {b} unreachable from {a}"),
                ));
            }
            let mut path = Vec::new();
            let mut cur = parent[b];
            while let Some(u) = cur {
                path.push(u as Symbol);
                cur = parent[u];
            }
            path.reverse();
            out[a][b] = path;
        }
    }
    Ok(out)
}

fn primitive_root_len(w: &[Symbol]) -> usize {
    let n = w.len();
    (1..=n)
        .find(|&p| n % p == 0 && (p..n).all(|i| w[i] == w[i - p]))
        .unwrap_or(n)
}

fn rotate_left(w: &mut [Symbol], k: usize) {
    if !w.is_empty() {
        let k = k % w.len();
        w.rotate_left(k);
    }
}

/// An eventually periodic bi-infinite sequence in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    left_period: Vec<Symbol>,
    center: Vec<Symbol>,
    right_period: Vec<Symbol>,
    origin_offset: i64,
}

impl Point {
    pub fn new(left_period: Vec<Symbol>, center: Vec<Symbol>, right_period: Vec<Symbol>, origin_offset: i64) -> Result<Self> {
        if left_period.is_empty() || right_period.is_empty() {
            return Err(Error::domain(MODULE, "periodic tails must be nonempty"));
        }
        let mut p = Point {
            left_period,
            center,
            right_period,
            origin_offset,
        };
        p.canonicalize();
        Ok(p)
    }

    /// The purely periodic point `word^∞` with coordinate 0 at `word[0]`.
    pub fn periodic(word: &[Symbol]) -> Result<Self> {
        Self::new(word.to_vec(), Vec::new(), word.to_vec(), 0)
    }

    pub fn left_period(&self) -> &[Symbol] {
        &self.left_period
    }

    pub fn center(&self) -> &[Symbol] {
        &self.center
    }

    pub fn right_period(&self) -> &[Symbol] {
        &self.right_period
    }

    pub fn origin_offset(&self) -> i64 {
        self.origin_offset
    }

    /// True for purely periodic sequences.
    pub fn is_periodic(&self) -> bool {
        self.center.is_empty() && self.left_period == self.right_period
    }

    /// Least period of a purely periodic point.
    pub fn period(&self) -> Option<usize> {
        self.is_periodic().then(|| self.right_period.len())
    }

    pub fn coord(&self, i: i64) -> Symbol {
        let idx = i + self.origin_offset;
        let len = self.center.len() as i64;
        if idx < 0 {
            self.left_period[idx.rem_euclid(self.left_period.len() as i64) as usize]
        } else if idx < len {
            self.center[idx as usize]
        } else {
            self.right_period[(idx - len).rem_euclid(self.right_period.len() as i64) as usize]
        }
    }

    /// Coordinates `lo..=hi`.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<Symbol> {
        (lo..=hi).map(|i| self.coord(i)).collect()
    }

    /// σᵐ: coordinate `i` of the result is coordinate `i + m` of `self`.
    pub fn shift(&self, m: i64) -> Point {
        let mut p = self.clone();
        p.origin_offset += m;
        p.canonicalize();
        p
    }

    fn canonicalize(&mut self) {
        let l = primitive_root_len(&self.left_period);
        self.left_period.truncate(l);
        let r = primitive_root_len(&self.right_period);
        self.right_period.truncate(r);

        // Right tail absorbs as much as possible, borrowing from the left tail
        // once the center is exhausted.
        loop {
            if self.center.is_empty() && self.left_period == self.right_period {
                break;
            }
            let rl = *self.right_period.last().unwrap();
            if let Some(&c) = self.center.last() {
                if c != rl {
                    break;
                }
                self.center.pop();
                self.right_period.rotate_right(1);
            } else {
                if *self.left_period.last().unwrap() != rl {
                    break;
                }
                self.left_period.rotate_right(1);
                self.right_period.rotate_right(1);
                self.origin_offset += 1;
            }
        }
        while let Some(&c) = self.center.first() {
            if c != self.left_period[0] {
                break;
            }
            self.center.remove(0);
            self.left_period.rotate_left(1);
            self.origin_offset -= 1;
        }
        if self.center.is_empty() && self.left_period == self.right_period {
            let m = self.right_period.len() as i64;
            let k = self.origin_offset.rem_euclid(m) as usize;
            rotate_left(&mut self.right_period, k);
            self.left_period = self.right_period.clone();
            self.origin_offset = 0;
        }
    }

    /// Coordinates beyond which both tails are purely periodic, as (lo, hi).
    fn core_range(&self) -> (i64, i64) {
        (-self.origin_offset, self.center.len() as i64 - self.origin_offset)
    }
}

/// `e^{-s}` where `s` is the least `|i|` with `x_i != y_i`; 0 if equal.
pub fn point_distance(x: &Point, y: &Point) -> f64 {
    if x == y {
        return 0.0;
    }
    let (xl, xh) = x.core_range();
    let (yl, yh) = y.core_range();
    let lo = xl.min(yl) - (x.left_period.len() * y.left_period.len()) as i64;
    let hi = xh.max(yh) + (x.right_period.len() * y.right_period.len()) as i64;
    let bound = lo.abs().max(hi.abs()) + 1;
    for s in 0..=bound {
        if x.coord(s) != y.coord(s) || x.coord(-s) != y.coord(-s) {
            return (-(s as f64)).exp();
        }
    }
    unreachable!("canonical points that differ must differ inside the scanned window")
}

fn fmt_word(w: &[Symbol]) -> String {
    w.iter().map(|&s| SYMBOL_CHARS[s as usize] as char).collect()
}

fn parse_word(s: &str) -> Result<Vec<Symbol>> {
    s.chars()
        .map(|c| {
            SYMBOL_CHARS
                .iter()
                .position(|&b| b as char == c)
                .map(|p| p as Symbol)
                .ok_or_else(|| Error::domain(MODULE, format!("invalid symbol {c:?}")))
        })
        .collect()
}

/// Text form `(L)C(R)@o`; the `@o` suffix is omitted when the offset is 0.
impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}){}({})",
            fmt_word(&self.left_period),
            fmt_word(&self.center),
            fmt_word(&self.right_period)
        )?;
        if self.origin_offset != 0 {
            write!(f, "@{}", self.origin_offset)?;
        }
        Ok(())
    }
}

impl FromStr for Point {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(MODULE, format!("cannot parse point {s:?}; expected (L)C(R)@o"));
        let (body, offset) = match s.split_once('@') {
            Some((b, o)) => (b, o.trim().parse::<i64>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let body = body.trim().strip_prefix('(').ok_or_else(bad)?;
        let (left, rest) = body.split_once(')').ok_or_else(bad)?;
        let (center, right) = rest.split_once('(').ok_or_else(bad)?;
        let right = right.strip_suffix(')').ok_or_else(bad)?;
        Point::new(parse_word(left)?, parse_word(center)?, parse_word(right)?, offset)
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A cyclic admissible word; its point is fixed by σ^period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodicOrbit {
    pub word: Vec<Symbol>,
    pub period: usize,
}

impl PeriodicOrbit {
    pub fn new(sys: &SftSystem, word: Vec<Symbol>) -> Result<Self> {
        if !sys.is_cyclically_admissible(&word) {
            return Err(Error::domain(
                MODULE,
                format!("word {} is not cyclically admissible", fmt_word(&word)),
            ));
        }
        Ok(PeriodicOrbit {
            period: word.len(),
            word,
        })
    }

    pub fn point(&self) -> Point {
        Point::periodic(&self.word).expect("orbit words are nonempty")
    }

    /// The `period` points `σʲ p`, `j = 0..period`.
    pub fn points(&self) -> Vec<Point> {
        let p = self.point();
        (0..self.period as i64).map(|j| p.shift(j)).collect()
    }

    pub fn label(&self) -> String {
        fmt_word(&self.word)
    }

    fn is_least_rotation(&self) -> bool {
        let n = self.word.len();
        (1..n).all(|k| {
            let mut r = self.word.clone();
            r.rotate_left(k);
            self.word <= r
        })
    }
}

/// Uniform measure on the points of a periodic orbit.
#[derive(Debug, Clone)]
pub struct PeriodicMeasure {
    pub orbit: PeriodicOrbit,
}

impl PeriodicMeasure {
    pub fn new(orbit: PeriodicOrbit) -> Self {
        PeriodicMeasure { orbit }
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![1.0 / self.orbit.period as f64; self.orbit.period]
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.orbit
            .points()
            .iter()
            .zip(self.weights())
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosingEntry {
    pub i: usize,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosingReport {
    pub n: usize,
    pub connector_len: usize,
    pub return_distance: f64,
    pub entries: Vec<ClosingEntry>,
    pub verified: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(s: &str) -> Point {
        s.parse().unwrap()
    }

    #[test]
    fn connection_bounds() {
        assert_eq!(SftSystem::full_shift(2).connection_bound(), 0);
        let g = SftSystem::golden_mean();
        assert_eq!(g.connection_bound(), 1);
        assert_eq!(g.connector(1, 1), &[0]);
    }

    #[test]
    fn reducible_graph_is_rejected() {
        assert!(SftSystem::new(vec![vec![1, 1], vec![0, 1]]).is_err());
        assert!(SftSystem::new(vec![vec![1, 2], vec![1, 1]]).is_err());
    }

    #[test]
    fn distance_examples() {
        let x = pt("(0)0110(1)");
        assert_eq!(point_distance(&x, &x), 0.0);
        let y = pt("(0)1(0)");
        let z = pt("(0)0(0)");
        assert_eq!(point_distance(&y, &z), 1.0);
        // agree on -2..=2, differ at ±3: built by a direct coordinate scan
        let a = pt("(0)0010100(0)@3");
        let b = pt("(0)1010101(0)@3");
        for i in -2..=2 {
            assert_eq!(a.coord(i), b.coord(i));
        }
        assert_ne!(a.coord(3), b.coord(3));
        assert_ne!(a.coord(-3), b.coord(-3));
        assert!((point_distance(&a, &b) - 0.049787068367863944).abs() < 1e-15);
    }

    #[test]
    fn canonical_forms_coincide() {
        // (01)^∞ written three ways
        let a = pt("(01)(01)");
        let b = pt("(0101)0101(01)@4");
        let c = pt("(10)1(01)@1");
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.is_periodic());
        // boundary borrowed from the left tail
        let d = pt("(0)(10)");
        let e = pt("(0)(01)@1");
        assert_eq!(d, e);
        for i in -10..10 {
            assert_eq!(d.coord(i), e.coord(i));
        }
    }

    #[test]
    fn shift_examples() {
        let x = pt("(01)0110(1)@2");
        assert_eq!(x.shift(0), x);
        assert_eq!(x.shift(3).shift(-3), x);
        for i in -8..8 {
            assert_eq!(x.shift(3).coord(i), x.coord(i + 3));
        }
        let orbit = PeriodicOrbit::new(&SftSystem::full_shift(2), vec![0, 1, 1]).unwrap();
        let p = orbit.point();
        assert_eq!(p.shift(3), p);
    }

    #[test]
    fn enumeration_counts() {
        let full = SftSystem::full_shift(2);
        assert_eq!(full.enumerate_periodic(3).unwrap().len(), 8);
        let g = SftSystem::golden_mean();
        let four = g.enumerate_periodic(4).unwrap();
        assert_eq!(four.len(), 7);
        assert_eq!(g.trace_power(4), 7);
        let no_loops = SftSystem::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(no_loops.enumerate_periodic(1).unwrap().is_empty());
        let words: Vec<_> = four.iter().map(|o| o.word.clone()).collect();
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(words, sorted);
        assert!(matches!(full.enumerate_periodic(19), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn orbit_views() {
        let full = SftSystem::full_shift(2);
        let reps = full.enumerate_orbits(4).unwrap();
        // necklaces of length 4 over 2 symbols
        assert_eq!(reps.len(), 6);
        assert_eq!(full.enumerate_prime_orbits(4).unwrap().len(), 3);
    }

    #[test]
    fn closing_periodic_point_is_exact() {
        let full = SftSystem::full_shift(2);
        let x = Point::periodic(&[0, 1, 1]).unwrap();
        let (p, j, rep) = full.close_orbit(&x, 3).unwrap();
        assert_eq!(j, 0);
        assert_eq!(p.point(), x);
        assert!(rep.entries.iter().all(|e| e.distance == 0.0));
        assert!(rep.verified);
    }

    #[test]
    fn closing_with_near_return() {
        let full = SftSystem::full_shift(2).with_closing_constants(ClosingConstants {
            c: std::f64::consts::E,
            theta: 1.0,
        });
        // 0110 repeated on coordinates -4..=7
        let x = pt("(0)011001100110(1)@4");
        assert!((point_distance(&x.shift(4), &x) - (-4f64).exp()).abs() < 1e-15);
        let (p, j, rep) = full.close_orbit(&x, 4).unwrap();
        assert_eq!(j, 0);
        assert_eq!(p.word, vec![0, 1, 1, 0]);
        assert!(rep.verified);
        for e in &rep.entries {
            let exact = std::f64::consts::E * (-(e.i.min(4 - e.i) as f64)).exp() * (-4f64).exp();
            assert!(e.distance <= exact * (1.0 + 1e-12));
        }
    }

    #[test]
    fn closing_needs_connector_on_golden_mean() {
        let g = SftSystem::golden_mean();
        let x = pt("(0)1001(0)");
        let (p, j, rep) = g.close_orbit(&x, 4).unwrap();
        assert_eq!(j, 1);
        assert_eq!(p.word, vec![1, 0, 0, 1, 0]);
        assert!(rep.verified);
    }

    #[test]
    fn random_points_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for sys in [SftSystem::full_shift(3), SftSystem::golden_mean()] {
            for _ in 0..200 {
                let x = sys.random_point(&mut rng, 1..=12, 1..=5);
                sys.check_point(&x).unwrap();
                let s = rng.random_range(1..8);
                let y = sys.random_point_near(&x, s, &mut rng, 1..=5);
                sys.check_point(&y).unwrap();
                assert!(point_distance(&x, &y) <= (-(s as f64)).exp() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn periodic_measure_weights() {
        let o = PeriodicOrbit::new(&SftSystem::full_shift(2), vec![0, 0, 1]).unwrap();
        let mu = PeriodicMeasure::new(o);
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let freq = mu.integrate(|p| p.coord(0) as f64);
        assert!((freq - 1.0 / 3.0).abs() < 1e-15);
        let shifted = mu.integrate(|p| p.coord(5) as f64);
        assert!((freq - shifted).abs() < 1e-15);
    }

    fn small_system() -> impl Strategy<Value = SftSystem> {
        prop_oneof![
            Just(SftSystem::full_shift(2)),
            Just(SftSystem::full_shift(3)),
            Just(SftSystem::golden_mean()),
        ]
    }

    fn points(sys: &SftSystem, seed: u64, count: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| sys.random_point(&mut rng, 1..=10, 1..=4)).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn metric_is_symmetric_ultrametric(sys in small_system(), seed in any::<u64>()) {
            let p = points(&sys, seed, 3);
            let (x, y, z) = (&p[0], &p[1], &p[2]);
            prop_assert_eq!(point_distance(x, y), point_distance(y, x));
            prop_assert_eq!(point_distance(x, x), 0.0);
            prop_assert!(point_distance(x, z) <= point_distance(x, y).max(point_distance(y, z)));
        }

        #[test]
        fn shift_is_e_lipschitz(sys in small_system(), seed in any::<u64>(), s in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = sys.random_point(&mut rng, 1..=10, 1..=4);
            let y = sys.random_point_near(&x, s, &mut rng, 1..=4);
            let d = point_distance(&x, &y);
            prop_assert!(point_distance(&x.shift(1), &y.shift(1)) <= std::f64::consts::E * d * (1.0 + 1e-12));
        }

        #[test]
        fn periodic_count_is_trace(sys in small_system(), n in 1usize..9) {
            prop_assert_eq!(sys.enumerate_periodic(n).unwrap().len() as u128, sys.trace_power(n));
        }

        #[test]
        fn canonical_form_is_idempotent(sys in small_system(), seed in any::<u64>(), m in -20i64..20) {
            for x in points(&sys, seed, 4) {
                let text = x.to_string();
                let back: Point = text.parse().unwrap();
                prop_assert_eq!(&back, &x);
                prop_assert_eq!(back.to_string(), text);
                let y = x.shift(m);
                prop_assert_eq!(y.shift(-m), x.clone());
                for i in -30..30 {
                    prop_assert_eq!(y.coord(i), x.coord(i + m));
                }
            }
        }
    }
}
