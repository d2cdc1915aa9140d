//! Walsh polynomials kept as a list of structured atoms, so that values and
//! partial sums can be evaluated without a global grid.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dyadic::{DyadicPoint, DyadicSet};
use crate::error::{Error, Result};
use crate::rat::{lcm_denominators, pow2, Rat};
use crate::walsh::{dirichlet, dirichlet_pow2, walsh, walsh_cell, GridVector, WalshIndex};

use super::StepFunction;

/// Largest indicator-set level for which a split spectral block is resolved
/// by a local transform.
pub const MAX_LOCAL_LEVEL: u64 = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    /// `coef · 1_set(x) · w_character(x)`
    Indicator {
        coef: Rat,
        set: DyadicSet,
        character: BigUint,
    },
    /// `coef · D_{2^order_log2}(x ⊕ shift)`
    Kernel {
        coef: Rat,
        order_log2: u64,
        shift: DyadicPoint,
    },
}

impl Atom {
    pub fn coef(&self) -> &Rat {
        match self {
            Atom::Indicator { coef, .. } | Atom::Kernel { coef, .. } => coef,
        }
    }

    fn scaled(&self, factor: &Rat) -> Atom {
        let mut a = self.clone();
        match &mut a {
            Atom::Indicator { coef, .. } | Atom::Kernel { coef, .. } => *coef *= factor,
        }
        a
    }

    pub fn eval(&self, x: &DyadicPoint) -> Rat {
        match self {
            Atom::Indicator { coef, set, character } => {
                if set.contains(x) {
                    coef * Rat::from_integer(walsh(character, x).into())
                } else {
                    Rat::zero()
                }
            }
            Atom::Kernel { coef, order_log2, shift } => {
                coef * Rat::from_integer(dirichlet_pow2(*order_log2, &x.xor_add(shift)))
            }
        }
    }

    /// Whether `x` lies in the closed-form support of this atom (the set, or
    /// `shift ⊕ [0, 2^-order)`).
    fn covers(&self, x: &DyadicPoint) -> bool {
        match self {
            Atom::Indicator { set, .. } => set.contains(x),
            Atom::Kernel { order_log2, shift, .. } => x.xor_add(shift).leading_zeros().is_none_or(|z| z >= *order_log2),
        }
    }
}

/// A half-open range `[start, end)` of Walsh indices together with the atoms
/// whose spectrum meets it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectralBlock {
    pub start: BigUint,
    pub end: BigUint,
    pub owners: Vec<usize>,
}

/// A finite sum of atoms with its spectral blocks.
#[derive(Clone, Debug)]
pub struct AtomSum {
    atoms: Vec<Atom>,
    blocks: Vec<SpectralBlock>,
    live: Vec<bool>,
    local: Vec<OnceLock<GridVector>>,
}

impl AtomSum {
    pub fn new(atoms: Vec<Atom>) -> Self {
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| !a.coef().is_zero()).collect();
        let blocks = compute_blocks(&atoms);
        let mut live = vec![false; atoms.len()];
        for b in &blocks {
            for &o in &b.owners {
                live[o] = true;
            }
        }
        let local = atoms.iter().map(|_| OnceLock::new()).collect();
        AtomSum {
            atoms,
            blocks,
            live,
            local,
        }
    }

    /// `Σ factor_i · part_i`.
    pub fn combine<'a>(parts: impl IntoIterator<Item = (Rat, &'a AtomSum)>) -> Self {
        let atoms = parts
            .into_iter()
            .flat_map(|(w, p)| p.atoms.iter().map(move |a| a.scaled(&w)).collect::<Vec<_>>())
            .collect();
        Self::new(atoms)
    }

    pub fn scaled(&self, factor: &Rat) -> Self {
        Self::combine([(factor.clone(), self)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Disjoint, sorted index ranges outside of which every coefficient
    /// vanishes.
    pub fn spectral_blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    /// `[lo, hi)` hull of the spectral blocks (`None` for the zero sum).
    pub fn spectral_hull(&self) -> Option<(BigUint, BigUint)> {
        Some((self.blocks.first()?.start.clone(), self.blocks.last()?.end.clone()))
    }

    pub fn eval(&self, x: &DyadicPoint) -> Rat {
        self.atoms.iter().map(|a| a.eval(x)).sum()
    }

    /// Whether `x` lies in the union of atom supports of all atoms that are
    /// not cancelled within their kernel group. Outside this set the sum
    /// vanishes.
    pub fn support_covers(&self, x: &DyadicPoint) -> bool {
        self.atoms
            .iter()
            .zip(&self.live)
            .any(|(a, alive)| *alive && a.covers(x))
    }

    /// Triangle-inequality bound on `‖·‖₁`: `|coef|·|set|` per indicator atom
    /// and `Σ|coef|` per kernel group that does not cancel identically.
    pub fn l1_certificate(&self) -> Rat {
        let live = &self.live;
        let mut groups: BTreeMap<&DyadicPoint, (bool, Rat)> = BTreeMap::new();
        let mut total = Rat::zero();
        for (i, a) in self.atoms.iter().enumerate() {
            match a {
                Atom::Indicator { coef, set, .. } => total += coef.abs() * set.measure(),
                Atom::Kernel { coef, shift, .. } => {
                    let g = groups.entry(shift).or_insert((false, Rat::zero()));
                    g.0 |= live[i];
                    g.1 += coef.abs();
                }
            }
        }
        total + groups.into_values().filter(|g| g.0).map(|g| g.1).sum::<Rat>()
    }

    /// Smallest grid resolution on which the sum is a step function.
    pub fn min_resolution(&self) -> u64 {
        self.atoms
            .iter()
            .map(|a| match a {
                Atom::Indicator { set, character, .. } => set.finest_level().max(character.bit_len()),
                Atom::Kernel { order_log2, .. } => *order_log2,
            })
            .max()
            .unwrap_or(0)
    }

    /// Samples the sum on the `2^-resolution` grid.
    pub fn render(&self, resolution: u32, cap: u32) -> Result<StepFunction> {
        if resolution > cap {
            return Err(Error::GridCap {
                requested: resolution as u64,
                cap,
            });
        }
        if (resolution as u64) < self.min_resolution() {
            return Err(Error::InvalidParams(format!(
                "resolution {resolution} is below the sum's own resolution {}",
                self.min_resolution()
            )));
        }
        let k = resolution as u64;
        let denom = lcm_denominators(self.atoms.iter().map(|a| a.coef()));
        let mut nums = vec![BigInt::zero(); 1usize << resolution];
        for a in &self.atoms {
            let scaled = (a.coef() * Rat::from_integer(denom.clone())).to_integer();
            match a {
                Atom::Indicator { set, character, .. } => {
                    let m = character.to_u64().expect("character below 2^resolution");
                    for c in set.cells(k) {
                        if walsh_cell(m, c, resolution) > 0 {
                            nums[c as usize] += &scaled;
                        } else {
                            nums[c as usize] -= &scaled;
                        }
                    }
                }
                Atom::Kernel { order_log2, shift, .. } => {
                    let height = &scaled << *order_log2 as usize;
                    let start = (shift.cell_index_u64(*order_log2) << (k - order_log2)) as usize;
                    for v in &mut nums[start..start + (1usize << (k - order_log2))] {
                        *v += &height;
                    }
                }
            }
        }
        Ok(StepFunction::new(GridVector::from_parts(resolution, nums, denom)?))
    }

    /// `S_l f(x)` atom by atom. A kernel atom contributes
    /// `coef · D_min(l, u)(x ⊕ θ)`; an indicator atom contributes 0 below its
    /// block, its value above it, and a locally transformed prefix inside.
    pub fn partial_sum(&self, l: &BigUint, x: &DyadicPoint) -> Result<Rat> {
        let mut total = Rat::zero();
        for (i, a) in self.atoms.iter().enumerate() {
            match a {
                Atom::Kernel { coef, order_log2, shift } => {
                    let y = x.xor_add(shift);
                    let d = if l.bit_len() > *order_log2 {
                        dirichlet_pow2(*order_log2, &y)
                    } else {
                        dirichlet(l, &y)
                    };
                    total += coef * Rat::from_integer(d);
                }
                Atom::Indicator { coef, set, character } => {
                    let level = set.finest_level();
                    let low_mask = pow2(level) - BigUint::one();
                    let base = character - (character & &low_mask);
                    let end = &base + pow2(level);
                    if *l >= end {
                        total += a.eval(x);
                    } else if *l > base {
                        if level > MAX_LOCAL_LEVEL {
                            return Err(Error::NeedsGrid { cut: l.to_string() });
                        }
                        let local = self.local_coefficients(i);
                        let cut = (l - &base).to_u64().unwrap();
                        let xi = x.cell_index_u64(level);
                        let acc: BigInt = local.numerators()[..cut as usize]
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| !c.is_zero())
                            .map(|(m, c)| c * walsh_cell(m as u64, xi, level as u32))
                            .sum();
                        let prefix = Rat::new(acc, local.denominator().clone());
                        total += coef * prefix * Rat::from_integer(walsh(&base, x).into());
                    }
                }
            }
        }
        Ok(total)
    }
}

impl AtomSum {
    /// Coefficients of `1_set · w_{character mod 2^L}` on the level-`L` grid
    /// of an indicator atom, computed once.
    fn local_coefficients(&self, i: usize) -> &GridVector {
        self.local[i].get_or_init(|| {
            let Atom::Indicator { set, character, .. } = &self.atoms[i] else {
                unreachable!("local transforms exist for indicator atoms only")
            };
            let level = set.finest_level();
            let low = (character % pow2(level)).to_u64().unwrap();
            let mut vals = vec![Rat::zero(); 1usize << level];
            for c in set.cells(level) {
                vals[c as usize] = Rat::from_integer(walsh_cell(low, c, level as u32).into());
            }
            GridVector::new(level as u32, vals).unwrap().fwht()
        })
    }

    /// Exact `[min, max]` of the union of the atoms' spectra, which contains
    /// the spectrum of the sum. Indicator atoms are transformed locally;
    /// kernel groups contribute their blocks, on which every coefficient is
    /// `±` a nonzero tail sum.
    pub fn spectrum_hull_exact(&self) -> Result<Option<(BigUint, BigUint)>> {
        let mut lo: Option<BigUint> = None;
        let mut hi: Option<BigUint> = None;
        let mut take = |a: BigUint, b: BigUint| {
            if lo.as_ref().is_none_or(|l| a < *l) {
                lo = Some(a);
            }
            if hi.as_ref().is_none_or(|h| b > *h) {
                hi = Some(b);
            }
        };
        for (i, atom) in self.atoms.iter().enumerate() {
            if let Atom::Indicator { set, character, .. } = atom {
                if set.is_empty() {
                    continue;
                }
                let level = set.finest_level();
                if level > MAX_LOCAL_LEVEL {
                    return Err(Error::NeedsGrid {
                        cut: format!("indicator at level {level}"),
                    });
                }
                let base = (character >> level as usize) << level as usize;
                let local = self.local_coefficients(i);
                let nz: Vec<usize> = (0..local.len()).filter(|&m| !local.numerators()[m].is_zero()).collect();
                if let (Some(a), Some(b)) = (nz.first(), nz.last()) {
                    take(&base + BigUint::from(*a), &base + BigUint::from(*b));
                }
            }
        }
        for b in &self.blocks {
            if b.owners.iter().any(|&o| matches!(self.atoms[o], Atom::Kernel { .. })) {
                take(b.start.clone(), &b.end - BigUint::one());
            }
        }
        Ok(lo.zip(hi))
    }
}

fn compute_blocks(atoms: &[Atom]) -> Vec<SpectralBlock> {
    let mut raw: Vec<(BigUint, BigUint, Vec<usize>)> = Vec::new();
    let mut groups: BTreeMap<&DyadicPoint, Vec<usize>> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        match a {
            Atom::Indicator { set, character, .. } => {
                if set.is_empty() {
                    continue;
                }
                let level = set.finest_level();
                let base = (character >> level as usize) << level as usize;
                let end = &base + pow2(level);
                raw.push((base, end, vec![i]));
            }
            Atom::Kernel { shift, .. } => groups.entry(shift).or_default().push(i),
        }
    }
    // D_u(· ⊕ θ) has coefficients w_m(θ) on [0, u); within one shift group the
    // coefficient on [u_{t-1}, u_t) is w_m(θ) times the sum of the
    // coefficients of the atoms of order >= u_t.
    for members in groups.into_values() {
        let mut by_order: BTreeMap<u64, Rat> = BTreeMap::new();
        for &i in &members {
            if let Atom::Kernel { coef, order_log2, .. } = &atoms[i] {
                *by_order.entry(*order_log2).or_insert_with(Rat::zero) += coef;
            }
        }
        let orders: Vec<(u64, Rat)> = by_order.into_iter().collect();
        let mut tail: Rat = orders.iter().map(|(_, c)| c.clone()).sum();
        let mut start = BigUint::zero();
        for (t, (order, coef)) in orders.iter().enumerate() {
            let end = pow2(*order);
            if !tail.is_zero() && start < end {
                let owners = members
                    .iter()
                    .copied()
                    .filter(|&i| matches!(&atoms[i], Atom::Kernel { order_log2, .. } if orders[t..].iter().any(|(o, _)| o == order_log2)))
                    .collect();
                raw.push((start.clone(), end.clone(), owners));
            }
            tail -= coef;
            start = end;
        }
    }
    disjoint_blocks(raw)
}

fn disjoint_blocks(raw: Vec<(BigUint, BigUint, Vec<usize>)>) -> Vec<SpectralBlock> {
    let mut cuts: Vec<BigUint> = raw
        .iter()
        .flat_map(|(s, e, _)| [s.clone(), e.clone()])
        .collect();
    cuts.sort();
    cuts.dedup();
    let mut out: Vec<SpectralBlock> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mut owners: Vec<usize> = raw
            .iter()
            .filter(|(s, e, _)| s <= a && b <= e)
            .flat_map(|(_, _, o)| o.iter().copied())
            .collect();
        if owners.is_empty() {
            continue;
        }
        owners.sort_unstable();
        owners.dedup();
        match out.last_mut() {
            Some(prev) if prev.end == *a && prev.owners == owners => prev.end = b.clone(),
            _ => out.push(SpectralBlock {
                start: a.clone(),
                end: b.clone(),
                owners,
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::PartialSums;
    use crate::rat::rat;

    fn point(s: &str) -> DyadicPoint {
        s.parse().unwrap()
    }

    fn sample() -> AtomSum {
        let set = DyadicSet::from_cells(4, [1, 2, 3, 7, 12]);
        AtomSum::new(vec![
            Atom::Indicator {
                coef: rat(3, 2),
                set: set.clone(),
                character: BigUint::from(5u32),
            },
            Atom::Indicator {
                coef: rat(-1, 3),
                set,
                character: BigUint::from(37u32),
            },
            Atom::Kernel {
                coef: rat(1, 4),
                order_log2: 6,
                shift: point("5/2^6"),
            },
            Atom::Kernel {
                coef: rat(-1, 4),
                order_log2: 3,
                shift: point("5/2^6"),
            },
            Atom::Kernel {
                coef: rat(2, 1),
                order_log2: 2,
                shift: point("3/2^4"),
            },
        ])
    }

    #[test]
    fn symbolic_matches_grid() {
        let f = sample();
        let k = 6u32;
        let grid = f.render(k, 26).unwrap();
        let ps = PartialSums::new(&grid);
        for i in 0..1u64 << k {
            let x = DyadicPoint::from_cell(i, k as u64);
            assert_eq!(f.eval(&x), grid.value_at(&x));
            for l in 0..=1u64 << k {
                assert_eq!(f.partial_sum(&BigUint::from(l), &x).unwrap(), ps.at(l, &x).unwrap());
            }
        }
    }

    #[test]
    fn blocks_cover_the_spectrum() {
        let f = sample();
        let blocks = f.spectral_blocks();
        for w in blocks.windows(2) {
            assert!(w[0].end <= w[1].start);
        }
        let coeffs = f.render(6, 26).unwrap().grid().fwht();
        for m in 0..64u64 {
            let inside = blocks
                .iter()
                .any(|b| b.start <= BigUint::from(m) && BigUint::from(m) < b.end);
            if !inside {
                assert!(coeffs.get(m as usize).is_zero(), "coefficient {m} outside blocks");
            }
        }
        // the shift group at 5/2^6 contributes exactly [8, 64)
        assert!(blocks.iter().any(|b| b.end == BigUint::from(64u32)));
    }

    #[test]
    fn kernel_prefix_is_smaller_kernel() {
        let theta = point("3/2^9");
        let f = AtomSum::new(vec![Atom::Kernel {
            coef: rat(1, 1),
            order_log2: 8,
            shift: theta.clone(),
        }]);
        for i in 0..64u64 {
            let x = DyadicPoint::from_cell(i * 5 + 1, 9);
            assert_eq!(
                f.partial_sum(&BigUint::from(32u32), &x).unwrap(),
                Rat::from_integer(dirichlet_pow2(5, &x.xor_add(&theta)))
            );
        }
    }

    #[test]
    fn cancelling_group_has_no_blocks() {
        let th = point("1/2^3");
        let f = AtomSum::new(vec![
            Atom::Kernel { coef: rat(1, 1), order_log2: 4, shift: th.clone() },
            Atom::Kernel { coef: rat(-1, 1), order_log2: 4, shift: th.clone() },
        ]);
        assert!(f.spectral_blocks().is_empty());
        assert_eq!(f.l1_certificate(), rat(0, 1));
        assert!(!f.support_covers(&th));
    }

    #[test]
    fn certificate_bounds_norm() {
        let f = sample();
        let grid = f.render(6, 26).unwrap();
        assert!(grid.l1_norm() <= f.l1_certificate());
        assert!(f.render(27, 26).is_err());
        assert!(f.render(5, 26).is_err());
    }

    #[test]
    fn combine_is_linear() {
        let f = sample();
        let g = f.scaled(&rat(-2, 1));
        let h = AtomSum::combine([(rat(1, 1), &f), (rat(1, 2), &g)]);
        let x = point("11/2^6");
        assert_eq!(h.eval(&x), rat(0, 1));
        assert_eq!(h.partial_sum(&BigUint::from(20u32), &x).unwrap(), rat(0, 1));
    }
}
