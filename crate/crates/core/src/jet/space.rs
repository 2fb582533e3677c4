use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest number of variables a space may carry.
pub const MAX_VARS: usize = 255;
/// Largest truncation order a space may carry.
pub const MAX_ORDER: usize = 8;
/// Upper bound on the number of multiplication-table entries.
const MAX_MUL_ENTRIES: usize = 40_000_000;

/// Monomial layout and precomputed tables for jets in `nvars` variables
/// truncated at total degree `order`.
///
/// Monomials are sorted multisets of variable indices in graded
/// lexicographic order, so the monomials of degree at most `k` form a
/// prefix of length `len(k)`.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    mono_vars: Vec<u16>,
    mono_start: Vec<u32>,
    degree: Vec<u8>,
    prefix_len: Vec<usize>,
    factorial: Vec<f64>,
    index: HashMap<u64, u32>,
    mul_start: Vec<u32>,
    mul_entries: Vec<(u32, u32)>,
    down: Vec<Vec<(u32, u32, f64)>>,
    parent: Vec<(u32, u16)>,
}

fn key_of(vars: &[u16]) -> u64 {
    vars.iter().fold(0u64, |k, &v| (k << 8) | (v as u64 + 1))
}

impl JetSpace {
    /// Returns the shared space for `(nvars, order)`, building it on first use.
    pub fn get(nvars: usize, order: usize) -> Result<Arc<JetSpace>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let nvars = if order == 0 { 0 } else { nvars };
        if nvars > MAX_VARS || order > MAX_ORDER {
            return Err(Error::CoordinateBudgetExceeded {
                requested: nvars,
                cap: MAX_VARS,
            });
        }
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().unwrap().get(&(nvars, order)) {
            return Ok(s.clone());
        }
        let space = Arc::new(JetSpace::build(nvars, order)?);
        let mut guard = cache.lock().unwrap();
        Ok(guard.entry((nvars, order)).or_insert(space).clone())
    }

    fn build(nvars: usize, order: usize) -> Result<JetSpace> {
        let mut monos: Vec<Vec<u16>> = vec![vec![]];
        let mut prefix_len = vec![1usize];
        let mut last_level: Vec<Vec<u16>> = vec![vec![]];
        for _ in 1..=order {
            let mut level = Vec::new();
            for m in &last_level {
                let lo = m.last().copied().unwrap_or(0);
                for v in lo..nvars as u16 {
                    let mut next = m.clone();
                    next.push(v);
                    level.push(next);
                }
            }
            monos.extend(level.iter().cloned());
            prefix_len.push(monos.len());
            last_level = level;
        }
        // lexicographic order within each degree follows from the recursion above
        let n = monos.len();
        let mut mono_vars = Vec::new();
        let mut mono_start = Vec::with_capacity(n + 1);
        let mut degree = Vec::with_capacity(n);
        let mut factorial = Vec::with_capacity(n);
        let mut index = HashMap::with_capacity(n);
        for (i, m) in monos.iter().enumerate() {
            mono_start.push(mono_vars.len() as u32);
            mono_vars.extend_from_slice(m);
            degree.push(m.len() as u8);
            let mut f = 1.0;
            let mut run = 0;
            for j in 0..m.len() {
                run = if j > 0 && m[j] == m[j - 1] { run + 1 } else { 1 };
                f *= run as f64;
            }
            factorial.push(f);
            index.insert(key_of(m), i as u32);
        }
        mono_start.push(mono_vars.len() as u32);

        let mut total = 0usize;
        for m in &monos {
            total += prefix_len[order - m.len()];
        }
        if total > MAX_MUL_ENTRIES {
            return Err(Error::CoordinateBudgetExceeded {
                requested: nvars,
                cap: nvars.saturating_sub(1),
            });
        }
        let mut mul_start = Vec::with_capacity(n + 1);
        let mut mul_entries = Vec::with_capacity(total);
        let mut buf = Vec::with_capacity(2 * order);
        for a in &monos {
            mul_start.push(mul_entries.len() as u32);
            for (bi, b) in monos[..prefix_len[order - a.len()]].iter().enumerate() {
                buf.clear();
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    if j == b.len() || (i < a.len() && a[i] <= b[j]) {
                        buf.push(a[i]);
                        i += 1;
                    } else {
                        buf.push(b[j]);
                        j += 1;
                    }
                }
                mul_entries.push((bi as u32, index[&key_of(&buf)]));
            }
        }
        mul_start.push(mul_entries.len() as u32);

        let mut down = vec![Vec::new(); nvars];
        let mut parent = vec![(0u32, 0u16); n];
        for (i, m) in monos.iter().enumerate().skip(1) {
            let (head, last) = m.split_at(m.len() - 1);
            parent[i] = (index[&key_of(head)], last[0]);
            let mut j = 0;
            while j < m.len() {
                let v = m[j];
                let mut e = 0;
                while j + e < m.len() && m[j + e] == v {
                    e += 1;
                }
                let mut reduced = m.clone();
                reduced.remove(j);
                down[v as usize].push((i as u32, index[&key_of(&reduced)], e as f64));
                j += e;
            }
        }

        Ok(JetSpace {
            nvars,
            order,
            mono_vars,
            mono_start,
            degree,
            prefix_len,
            factorial,
            index,
            mul_start,
            mul_entries,
            down,
            parent,
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of monomials of total degree at most `k`.
    pub fn len(&self, k: usize) -> usize {
        self.prefix_len[k.min(self.order)]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i] as usize
    }

    /// Variables of monomial `i` as a sorted multiset.
    pub fn monomial(&self, i: usize) -> &[u16] {
        &self.mono_vars[self.mono_start[i] as usize..self.mono_start[i + 1] as usize]
    }

    /// Product of the factorials of the exponents of monomial `i`.
    pub fn factorial(&self, i: usize) -> f64 {
        self.factorial[i]
    }

    /// Index of the monomial given by a multiset of variables (any order).
    pub fn index_of(&self, vars: &[usize]) -> Option<usize> {
        if vars.len() > self.order || vars.iter().any(|&v| v >= self.nvars) {
            return None;
        }
        let mut s: Vec<u16> = vars.iter().map(|&v| v as u16).collect();
        s.sort_unstable();
        self.index.get(&key_of(&s)).map(|&i| i as usize)
    }

    pub(crate) fn mul_row(&self, a: usize) -> &[(u32, u32)] {
        &self.mul_entries[self.mul_start[a] as usize..self.mul_start[a + 1] as usize]
    }

    /// `(source, target, exponent)` triples describing differentiation in `var`.
    pub(crate) fn down(&self, var: usize) -> &[(u32, u32, f64)] {
        &self.down[var]
    }

    /// Monomial `i` equals monomial `parent` times variable `last`.
    pub(crate) fn parent(&self, i: usize) -> (usize, usize) {
        let (p, v) = self.parent[i];
        (p as usize, v as usize)
    }
}

impl std::fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "JetSpace(nvars = {}, order = {})", self.nvars, self.order)
    }
}
