//! Grouping items into meta-goods before matching.
//!
//! Whenever a loop guard can fire for several agents, items or meta-goods,
//! the lowest index wins. Meta-goods are kept sorted by their smallest item so
//! that "lowest index" is independent of the order in which they were built.

use serde::{Deserialize, Serialize};

use crate::model::{bundle_value, Bundle, Instance, Ratio};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BundlingError {
    #[error("bundle {0:?} is not valued non-negatively by any agent")]
    NotMetaGood(Vec<usize>),
    #[error("refinement needs between 1 and {max} objective chores, got {chores}", max = .agents - 1)]
    ChoreCount { chores: usize, agents: usize },
}

/// Partition of the items into meta-goods, loose subjective goods and
/// objective chores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundlingState {
    pub meta_goods: Vec<Bundle>,
    pub loose_goods: Bundle,
    pub chores: Bundle,
}

impl BundlingState {
    /// Agents valuing meta-good `j` non-negatively.
    pub fn supporters(&self, inst: &Instance, j: usize) -> Vec<usize> {
        supporters(inst, &self.meta_goods[j])
    }

    pub fn supporter_sets_disjoint(&self, inst: &Instance) -> bool {
        (0..inst.n()).all(|i| {
            self.meta_goods
                .iter()
                .filter(|b| !bundle_value(inst, i, b).is_negative())
                .count()
                <= 1
        })
    }

    /// Whether the three parts are disjoint and cover items `0..m`.
    pub fn is_partition_of(&self, m: usize) -> bool {
        let mut seen = vec![false; m];
        let parts = self.meta_goods.iter().chain([&self.loose_goods, &self.chores]);
        for b in parts {
            for &t in b.items() {
                if t >= m || seen[t] {
                    return false;
                }
                seen[t] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Loose goods as singletons followed by the meta-goods.
    pub fn goods_pool(&self) -> Vec<Bundle> {
        self.loose_goods
            .iter()
            .map(Bundle::singleton)
            .chain(self.meta_goods.iter().cloned())
            .collect()
    }

    /// Greedy check that no agent can make any chore acceptable by adding
    /// loose goods and meta-goods. Exact under additive utilities.
    pub fn chores_unabsorbable(&self, inst: &Instance) -> bool {
        absorption(inst, &self.goods_pool(), &self.chores).is_none()
    }

    fn canonicalize(&mut self) {
        sort_meta_goods(&mut self.meta_goods);
    }
}

fn sort_meta_goods(metas: &mut Vec<Bundle>) {
    metas.retain(|b| !b.is_empty());
    metas.sort_by_key(|b| b.items()[0]);
}

fn supporters(inst: &Instance, b: &Bundle) -> Vec<usize> {
    (0..inst.n())
        .filter(|&i| !bundle_value(inst, i, b).is_negative())
        .collect()
}

pub fn is_meta_good(inst: &Instance, s: &Bundle) -> bool {
    !s.is_empty() && !supporters(inst, s).is_empty()
}

/// No chore outside `s` can be added without every agent valuing the result
/// negatively.
pub fn is_chore_maximal(inst: &Instance, s: &Bundle, chores: &Bundle) -> Result<bool, BundlingError> {
    if !is_meta_good(inst, s) {
        return Err(BundlingError::NotMetaGood(s.items().to_vec()));
    }
    let base: Vec<Ratio> = (0..inst.n()).map(|i| bundle_value(inst, i, s)).collect();
    Ok(chores
        .iter()
        .filter(|c| !s.contains(*c))
        .all(|c| (0..inst.n()).all(|i| (&base[i] + inst.utility(i, c)).is_negative())))
}

/// First agent that values some item of `s` non-negatively while still
/// valuing the rest of `s` positively, paired with the cheapest such item
/// (lowest index on ties).
fn good_minimality_violation(inst: &Instance, s: &Bundle) -> Option<(usize, usize)> {
    (0..inst.n()).find_map(|i| {
        let total = bundle_value(inst, i, s);
        s.iter()
            .filter(|&g| {
                let u = inst.utility(i, g);
                !u.is_negative() && (&total - u).is_positive()
            })
            .min_by(|&g, &h| inst.utility(i, g).cmp(inst.utility(i, h)))
            .map(|g| (i, g))
    })
}

pub fn is_good_minimal(inst: &Instance, s: &Bundle) -> Result<bool, BundlingError> {
    if !is_meta_good(inst, s) {
        return Err(BundlingError::NotMetaGood(s.items().to_vec()));
    }
    Ok(good_minimality_violation(inst, s).is_none())
}

/// Removes one good from the first meta-good that is not good-minimal and
/// returns it; the caller decides where it goes.
fn peel_once(inst: &Instance, metas: &mut [Bundle]) -> Option<usize> {
    for m in metas.iter_mut() {
        if let Some((_, g)) = good_minimality_violation(inst, m) {
            m.remove(g);
            return Some(g);
        }
    }
    None
}

/// Splits good-minimality violators until every meta-good is good-minimal;
/// each peeled good becomes its own singleton meta-good.
pub fn make_good_minimal(inst: &Instance, mut metas: Vec<Bundle>) -> Vec<Bundle> {
    while let Some(g) = peel_once(inst, &mut metas) {
        metas.push(Bundle::singleton(g));
    }
    sort_meta_goods(&mut metas);
    metas
}

/// First `(agent, chore, elements)` where the agent values the chore together
/// with all elements it values non-negatively at least zero.
fn absorption(inst: &Instance, elements: &[Bundle], chores: &Bundle) -> Option<(usize, usize, Vec<usize>)> {
    for i in 0..inst.n() {
        let values: Vec<Ratio> = elements.iter().map(|e| bundle_value(inst, i, e)).collect();
        let chosen: Vec<usize> = (0..elements.len()).filter(|&e| !values[e].is_negative()).collect();
        let gain: Ratio = chosen.iter().map(|&e| &values[e]).sum();
        if let Some(c) = chores.iter().find(|&c| !(&gain + inst.utility(i, c)).is_negative()) {
            return Some((i, c, chosen));
        }
    }
    None
}

/// Merges meta-goods until no agent values two of them non-negatively.
fn merge_shared_supporters(inst: &Instance, metas: &mut Vec<Bundle>) {
    'outer: loop {
        for i in 0..inst.n() {
            let liked: Vec<usize> = (0..metas.len())
                .filter(|&r| !bundle_value(inst, i, &metas[r]).is_negative())
                .take(2)
                .collect();
            if let [r, r2] = liked[..] {
                let absorbed = metas.remove(r2);
                metas[r].extend(&absorbed);
                sort_meta_goods(metas);
                continue 'outer;
            }
        }
        break;
    }
}

/// Merges each agent's non-negatively valued goods into one meta-good until
/// every agent values at most one meta-good non-negatively, then lets
/// meta-goods absorb objective chores while some agent still accepts them.
pub fn iterative_item_merge(inst: &Instance) -> BundlingState {
    let n = inst.n();
    let (goods, chores): (Vec<usize>, Vec<usize>) = (0..inst.m()).partition(|&t| inst.is_subjective_good(t));
    let mut nodes: Vec<Bundle> = goods.into_iter().map(Bundle::singleton).collect();
    loop {
        let pick = (0..n).find_map(|i| {
            let nbrs: Vec<usize> = (0..nodes.len())
                .filter(|&k| !bundle_value(inst, i, &nodes[k]).is_negative())
                .collect();
            (nbrs.len() >= 2).then_some(nbrs)
        });
        let Some(nbrs) = pick else { break };
        let mut merged = Bundle::new();
        for &k in &nbrs {
            merged.extend(&nodes[k]);
        }
        let mut k = 0;
        nodes.retain(|_| {
            k += 1;
            !nbrs.contains(&(k - 1))
        });
        nodes.push(merged);
    }
    sort_meta_goods(&mut nodes);

    let mut chores: Bundle = chores.into_iter().collect();
    loop {
        let hit = nodes.iter().enumerate().find_map(|(j, mj)| {
            let base: Vec<Ratio> = (0..n).map(|i| bundle_value(inst, i, mj)).collect();
            chores
                .iter()
                .find(|&c| (0..n).any(|i| !(&base[i] + inst.utility(i, c)).is_negative()))
                .map(|c| (j, c))
        });
        let Some((j, c)) = hit else { break };
        nodes[j].insert(c);
        chores.remove(c);
        sort_meta_goods(&mut nodes);
    }

    BundlingState {
        meta_goods: nodes,
        loose_goods: Bundle::new(),
        chores,
    }
}

/// Makes every meta-good good-minimal (peeled goods become loose) and lets
/// chores be absorbed whenever some agent would accept a chore together with
/// loose goods and meta-goods, re-merging meta-goods with a common supporter
/// after each step.
pub fn refine(inst: &Instance, state: BundlingState) -> Result<BundlingState, BundlingError> {
    let k = state.chores.len();
    if k == 0 || k >= inst.n() {
        return Err(BundlingError::ChoreCount {
            chores: k,
            agents: inst.n(),
        });
    }
    let mut st = state;
    st.canonicalize();
    loop {
        if let Some(g) = peel_once(inst, &mut st.meta_goods) {
            st.loose_goods.insert(g);
        } else if let Some((_, c, chosen)) = absorption(inst, &st.goods_pool(), &st.chores) {
            let loose = st.loose_goods.len();
            let mut fresh = Bundle::singleton(c);
            for &e in &chosen {
                if e < loose {
                    let g = st.loose_goods.items()[e];
                    fresh.insert(g);
                } else {
                    fresh.extend(&st.meta_goods[e - loose]);
                }
            }
            st.loose_goods = st.loose_goods.iter().filter(|g| !fresh.contains(*g)).collect();
            st.meta_goods.retain(|m| m.is_disjoint(&fresh));
            st.meta_goods.push(fresh);
            st.chores.remove(c);
        } else {
            break;
        }
        merge_shared_supporters(inst, &mut st.meta_goods);
        st.canonicalize();
    }
    Ok(st)
}
