//! Naive matcher used as an independent oracle for `match_all`.
//!
//! Written from the matching rules alone: its own word splitting, a stage table
//! instead of parsing, integer scores, and exhaustive pairwise ranking.

use onco_core::matching::PatientFacts;
use onco_core::registry::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V {
    Sat,
    Vio,
    Unk,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleCohort {
    pub name: String,
    /// 2 = likely, 1 = possible, 0 = none.
    pub tier: u8,
    /// Score as (numerator, denominator) in halves, unreduced.
    pub score: (u64, u64),
    pub verdicts: Vec<V>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub trial_id: String,
    pub tier: u8,
    pub score: (u64, u64),
    pub cohort: String,
    pub verdicts: Vec<V>,
    pub cohorts: Vec<OracleCohort>,
}

/// Lower-case words of letters and digits.
pub fn words(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn eq_words(a: &str, b: &str) -> bool {
    words(a) == words(b)
}

/// `needle`'s words occur contiguously in `hay`'s words.
fn contains_run(hay: &str, needle: &str) -> bool {
    let h = words(hay);
    let n = words(needle);
    if n.is_empty() || n.len() > h.len() {
        return false;
    }
    (0..=h.len() - n.len()).any(|i| h[i..i + n.len()] == n[..])
}

const STAGE_TABLE: [(&str, u32, u32); 15] = [
    ("0", 0, 0),
    ("I", 1, 0),
    ("IA", 1, 1),
    ("IB", 1, 2),
    ("II", 2, 0),
    ("IIA", 2, 1),
    ("IIB", 2, 2),
    ("IIC", 2, 3),
    ("III", 3, 0),
    ("IIIA", 3, 1),
    ("IIIB", 3, 2),
    ("IIIC", 3, 3),
    ("IV", 4, 0),
    ("IVA", 4, 1),
    ("IVB", 4, 2),
];

fn stage_of(s: &str) -> Option<(u32, u32)> {
    let key = s.trim().to_uppercase();
    STAGE_TABLE.iter().find(|(k, _, _)| *k == key).map(|(_, g, sub)| (*g, *sub))
}

fn unknown_text(s: &str) -> bool {
    s.is_empty() || s == "Not Documented"
}

fn terms(v: &CriterionValue) -> Vec<String> {
    match v {
        CriterionValue::Text(s) => vec![s.clone()],
        CriterionValue::Set(xs) => xs.clone(),
        CriterionValue::Number(_) => vec![],
    }
}

/// Truth of the criterion's predicate, or None when a fact it reads is unknown.
fn truth(c: &Criterion, f: &PatientFacts) -> Option<bool> {
    let ts = terms(&c.value);
    let any = |pred: &dyn Fn(&str) -> bool| ts.iter().any(|t| pred(t));
    let negate = c.op == Op::Lacks;
    let scalar = |v: &str| -> Option<bool> {
        if unknown_text(v) {
            return None;
        }
        if c.op == Op::AtLeastStage {
            let (wg, ws) = stage_of(ts.first()?)?;
            let (hg, hs) = stage_of(v)?;
            return Some(if ws == 0 { hg >= wg } else { (hg, hs) >= (wg, ws) });
        }
        Some(any(&|t| eq_words(t, v)))
    };
    match c.field {
        Field::Diagnosis => {
            if f.diagnoses.is_empty() {
                None
            } else {
                Some(any(&|t| f.diagnoses.iter().any(|d| words(d) == words(t))))
            }
        }
        Field::Biomarker => {
            let name = c.biomarker.as_ref()?.to_uppercase();
            let (_, status) = f.biomarkers.iter().find(|(k, _)| **k == name)?;
            let hit = any(&|t| eq_words(t, status.as_str()));
            Some(hit != negate)
        }
        Field::PriorTherapy => {
            let set = f.prior_therapies.as_ref()?;
            let hit = any(&|t| set.iter().any(|x| words(x) == words(t)));
            Some(hit != negate)
        }
        Field::MetastasisSite => {
            let set = f.metastasis_sites.as_ref()?;
            let hit = any(&|t| set.iter().any(|x| contains_run(x, t)));
            Some(hit != negate)
        }
        Field::Age => {
            let age = f.age?;
            match (&c.value, c.op) {
                (CriterionValue::Number(n), Op::Ge) => Some(age >= *n),
                (CriterionValue::Number(n), Op::Le) => Some(age <= *n),
                _ => None,
            }
        }
        Field::Gender => match f.gender.as_deref() {
            None | Some("unknown") => None,
            Some(g) => Some(any(&|t| eq_words(t, g))),
        },
        Field::Stage => scalar(&f.numerical_stage),
        Field::TnmT => scalar(&f.tnm_t),
        Field::TnmN => scalar(&f.tnm_n),
        Field::TnmM => scalar(&f.tnm_m),
        Field::HistologyGrade => scalar(&f.histology_grade),
        Field::Laterality => scalar(&f.laterality),
        Field::DiseaseStatus => scalar(&f.disease_status),
    }
}

pub fn verdict(c: &Criterion, f: &PatientFacts) -> V {
    let inclusion = c.kind == CriterionKind::Inclusion;
    match truth(c, f) {
        None => V::Unk,
        Some(t) if t == inclusion => V::Sat,
        Some(_) => V::Vio,
    }
}

pub fn tier(vs: &[V]) -> u8 {
    let vio = vs.iter().filter(|v| **v == V::Vio).count();
    let sat = vs.iter().filter(|v| **v == V::Sat).count();
    if vio > 0 {
        0
    } else if sat == vs.len() {
        2
    } else {
        1
    }
}

pub fn score(vs: &[V]) -> (u64, u64) {
    if vs.is_empty() {
        return (1, 1);
    }
    let halves: u64 = vs
        .iter()
        .map(|v| match v {
            V::Sat => 2,
            V::Unk => 1,
            V::Vio => 0,
        })
        .sum();
    (halves, 2 * vs.len() as u64)
}

fn filter_ok(filter: &TrialFilter, t: &TrialRecord) -> bool {
    if filter.recruitment.is_some() && filter.recruitment != Some(t.recruitment) {
        return false;
    }
    if filter.phase.is_some() && filter.phase != Some(t.phase) {
        return false;
    }
    if filter.study_type.is_some() && filter.study_type != Some(t.study_type) {
        return false;
    }
    match &filter.condition_term {
        None => true,
        Some(term) => t.conditions.iter().any(|c| contains_run(c, term)),
    }
}

pub fn match_one(t: &TrialRecord, f: &PatientFacts) -> OracleResult {
    let cohorts: Vec<OracleCohort> = t
        .cohorts
        .iter()
        .map(|c| {
            let verdicts: Vec<V> = c.criteria.iter().map(|k| verdict(k, f)).collect();
            OracleCohort {
                name: c.name.clone(),
                tier: tier(&verdicts),
                score: score(&verdicts),
                verdicts,
            }
        })
        .collect();
    let top = cohorts.iter().map(|c| c.tier).max().unwrap_or(0);
    let best = cohorts.iter().find(|c| c.tier == top).cloned().expect("trials have cohorts");
    OracleResult {
        trial_id: t.trial_id.clone(),
        tier: best.tier,
        score: best.score,
        cohort: best.name,
        verdicts: best.verdicts,
        cohorts,
    }
}

/// True when `a` must be listed before `b`.
fn before(a: &OracleResult, b: &OracleResult) -> bool {
    if a.tier != b.tier {
        return a.tier > b.tier;
    }
    let lhs = a.score.0 * b.score.1;
    let rhs = b.score.0 * a.score.1;
    if lhs != rhs {
        return lhs > rhs;
    }
    a.trial_id < b.trial_id
}

/// Each result's position is the number of results that precede it.
fn order(xs: Vec<OracleResult>) -> Vec<OracleResult> {
    let mut slots: Vec<Option<OracleResult>> = vec![None; xs.len()];
    for x in &xs {
        let pos = xs.iter().filter(|y| before(y, x)).count();
        assert!(slots[pos].is_none(), "ranking is not a total order");
        slots[pos] = Some(x.clone());
    }
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// (matched, ruled out), each in finder order.
pub fn match_everything(
    reg: &Registry,
    f: &PatientFacts,
    filter: &TrialFilter,
) -> (Vec<OracleResult>, Vec<OracleResult>) {
    let all: Vec<OracleResult> = reg
        .trials()
        .iter()
        .filter(|t| filter_ok(filter, t))
        .map(|t| match_one(t, f))
        .collect();
    let (kept, dropped): (Vec<_>, Vec<_>) = all.into_iter().partition(|r| r.tier > 0);
    (order(kept), order(dropped))
}
