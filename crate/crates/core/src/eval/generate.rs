//! Seeded synthetic corpus with controllable overturn ratio, action counts
//! and precedent linkage.
//!
//! Every category has a fixed topic: a Maker factor, the action the Maker
//! ran, one critical Checker action that overturns the rejection, up to five
//! supporting Checker actions, and three actions a Checker uses to confirm
//! the rejection. Action keys are distinct `verify_<noun>_<qualifier>` pairs
//! and each evidence item carries exactly the key tokens of the action it
//! grounds, so lexical grounding is unambiguous.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::eval::EvalError;
use crate::graph::{CaseId, SourceType, Verdict};
use crate::ingest::{CaseRecord, DecisionRecord, EvidenceItem};
use crate::reasoner::ENTITY_KINDS;
use crate::text::humanize_key;

const NOUNS: &[&str] = &[
    "invoice", "shipment", "batch", "label", "packaging", "manifest", "certificate", "license", "listing", "barcode",
    "storage", "inventory", "supplier", "serial",
];
const QUALIFIERS: &[&str] = &[
    "chain", "origin", "dates", "integrity", "history", "authenticity", "compliance", "records", "condition", "trace",
    "audit", "coverage",
];
const FILLERS: &[&str] = &["noted", "submitted", "on", "file", "page", "entry", "reference", "uploaded", "attached", "scan", "copy"];
const SUPPLIERS: &[&str] = &["Harvest Lane Foods", "Golden Acre Provisions", "Northwind Grocers", "Copper Kettle Foods", "Meadowbrook Farms", "Blue Ridge Pantry"];
const WAREHOUSES: &[&str] = &["PHX3", "SEA2", "DFW7", "ORD4", "LAX9", "ATL6"];

const MAKER_FACTORS: &[&str] = &[
    "expired_product_received", "counterfeit_item_reported", "damaged_goods_delivered", "recalled_item_sold",
    "misleading_claim_listed", "trademark_misuse_alleged",
];
const CHECKER_FACTORS: &[&str] = &[
    "isolated_incident", "authentic_supply_chain", "carrier_damage_attributed", "recall_not_applicable",
    "claim_substantiated", "licensed_use_confirmed",
];

/// Supporting Checker actions available per overturn topic.
pub const SUPPORTING_POOL: usize = 5;
/// Confirming Checker actions available per upheld topic.
pub const CONFIRM_POOL: usize = 3;

fn default_overturn_ratio() -> f64 {
    0.70
}
fn default_mean_overturn() -> f64 {
    4.89
}
fn default_mean_nonoverturn() -> f64 {
    2.00
}
fn default_linkage() -> f64 {
    0.95
}
fn default_rmi_ratio() -> f64 {
    0.15
}
fn default_categories() -> Vec<String> {
    [
        "PQ.EXPIRED_PRODUCTS",
        "IP.COUNTERFEIT",
        "PQ.DAMAGED_GOODS",
        "SAFETY.RECALLED_ITEM",
        "LISTING.MISLEADING_CLAIMS",
        "IP.TRADEMARK_MISUSE",
    ]
    .map(String::from)
    .to_vec()
}
fn default_start() -> u64 {
    1_700_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_cases: usize,
    pub seed: u64,
    #[serde(default = "default_overturn_ratio")]
    pub overturn_ratio: f64,
    /// Mean actions (Maker plus Checker) per overturned case.
    #[serde(default = "default_mean_overturn")]
    pub mean_actions_overturn: f64,
    /// Mean actions (Maker plus Checker) per upheld case.
    #[serde(default = "default_mean_nonoverturn")]
    pub mean_actions_nonoverturn: f64,
    #[serde(default = "default_categories")]
    pub category_pool: Vec<String>,
    /// Fraction of cases whose Maker factor recurs across the corpus.
    #[serde(default = "default_linkage")]
    pub precedent_linkage: f64,
    /// Fraction of overturned cases whose critical evidence was obtained
    /// outside the case file, labelled rmi.
    #[serde(default = "default_rmi_ratio")]
    pub rmi_ratio: f64,
    #[serde(default = "default_start")]
    pub start_timestamp: u64,
}

impl CorpusSpec {
    pub fn new(n_cases: usize, seed: u64) -> Self {
        CorpusSpec {
            n_cases,
            seed,
            overturn_ratio: default_overturn_ratio(),
            mean_actions_overturn: default_mean_overturn(),
            mean_actions_nonoverturn: default_mean_nonoverturn(),
            category_pool: default_categories(),
            precedent_linkage: default_linkage(),
            rmi_ratio: default_rmi_ratio(),
            start_timestamp: default_start(),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidSpec(m));
        if self.n_cases < 10 {
            return bad(format!("n_cases must be at least 10, got {}", self.n_cases));
        }
        for (name, v) in [
            ("overturn_ratio", self.overturn_ratio),
            ("precedent_linkage", self.precedent_linkage),
            ("rmi_ratio", self.rmi_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        let max_over = (3 + SUPPORTING_POOL - 1) as f64;
        if !(3.0..=max_over).contains(&self.mean_actions_overturn) {
            return bad(format!("mean_actions_overturn must lie in [3, {max_over}]"));
        }
        let max_non = (1 + CONFIRM_POOL) as f64;
        if !(1.0..=max_non).contains(&self.mean_actions_nonoverturn) {
            return bad(format!("mean_actions_nonoverturn must lie in [1, {max_non}]"));
        }
        let per_topic = 2 + SUPPORTING_POOL + CONFIRM_POOL;
        if self.category_pool.is_empty() || self.category_pool.len() * per_topic > NOUNS.len() * QUALIFIERS.len() {
            return bad(format!("category_pool must hold between 1 and {} categories", NOUNS.len() * QUALIFIERS.len() / per_topic));
        }
        Ok(())
    }
}

/// One category's reasoning vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub category: String,
    pub maker_factor: String,
    pub checker_factor: String,
    pub maker_action: String,
    pub core_action: String,
    pub supporting: Vec<String>,
    pub confirming: Vec<String>,
}

pub fn topics(spec: &CorpusSpec) -> Result<Vec<Topic>, EvalError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_70b1c5);
    let mut pairs: Vec<(&str, &str)> = NOUNS.iter().flat_map(|n| QUALIFIERS.iter().map(move |q| (*n, *q))).collect();
    pairs.shuffle(&mut rng);
    let mut pairs = pairs.into_iter();
    let mut next = |verb: &str| {
        let (n, q) = pairs.next().expect("pool size checked");
        format!("{verb}_{n}_{q}")
    };
    Ok(spec
        .category_pool
        .iter()
        .enumerate()
        .map(|(i, category)| {
            let suffix = |base: &[&str]| {
                let b = base[i % base.len()];
                if i < base.len() {
                    b.to_string()
                } else {
                    format!("{b}_{i}")
                }
            };
            Topic {
                category: category.clone(),
                maker_factor: suffix(MAKER_FACTORS),
                checker_factor: suffix(CHECKER_FACTORS),
                maker_action: next("validate"),
                core_action: next("verify"),
                supporting: (0..SUPPORTING_POOL).map(|_| next("verify")).collect(),
                confirming: (0..CONFIRM_POOL).map(|_| next("verify")).collect(),
            }
        })
        .collect())
}

struct CaseBuilder<'a> {
    rng: &'a mut ChaCha8Rng,
    entities: BTreeMap<String, String>,
    items: Vec<EvidenceItem>,
    case_id: String,
}

impl CaseBuilder<'_> {
    /// Add an evidence item grounding `action`; returns its id.
    fn evidence(&mut self, action: &str, source_type: SourceType) -> String {
        let id = format!("e{}", self.items.len() + 1);
        let mut words: Vec<String> = action.split('_').skip(1).map(String::from).collect();
        for w in action.split('_') {
            if ENTITY_KINDS.contains(&w) {
                if let Some(v) = self.entities.get(w) {
                    words.push(v.clone());
                }
            }
        }
        for _ in 0..2 {
            words.push(FILLERS[self.rng.random_range(0..FILLERS.len())].to_string());
        }
        let lead = match source_type {
            SourceType::SystemRecord => "Internal tool lookup",
            SourceType::ChatLog => "Chat transcript",
            SourceType::ImageExtract => "Image extract",
            SourceType::SellerStatement => "Seller statement",
            SourceType::Document => "Document",
        };
        self.items.push(EvidenceItem {
            id: id.clone(),
            source_type,
            content: format!("{lead}: {}", words.join(" ")),
            source_ref: format!("{}/{id}", self.case_id),
        });
        id
    }

    fn source_type(&mut self) -> SourceType {
        [SourceType::Document, SourceType::ChatLog, SourceType::ImageExtract][self.rng.random_range(0..3)]
    }
}

/// Seeded corpus; byte-identical for equal specs.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<CaseRecord>, EvalError> {
    let topics = topics(spec)?;
    let n = spec.n_cases;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n_over = (n as f64 * spec.overturn_ratio).round() as usize;
    let n_rmi = (n_over as f64 * spec.rmi_ratio).round() as usize;
    let n_unlinked = (n as f64 * (1.0 - spec.precedent_linkage)).round() as usize;
    let mut overturned: Vec<bool> = (0..n).map(|i| i < n_over).collect();
    overturned.shuffle(&mut rng);
    let mut rmi_slots: Vec<bool> = (0..n_over).map(|i| i < n_rmi).collect();
    rmi_slots.shuffle(&mut rng);
    let mut unlinked: Vec<bool> = (0..n).map(|i| i < n_unlinked).collect();
    unlinked.shuffle(&mut rng);

    let p_support = (spec.mean_actions_overturn - 3.0) / (SUPPORTING_POOL - 1) as f64;
    let p_confirm = (spec.mean_actions_nonoverturn - 1.0) / CONFIRM_POOL as f64;
    let support_draw = Binomial::new((SUPPORTING_POOL - 1) as u64, p_support).map_err(|e| EvalError::InvalidSpec(e.to_string()))?;
    let confirm_draw = Binomial::new(CONFIRM_POOL as u64, p_confirm).map_err(|e| EvalError::InvalidSpec(e.to_string()))?;

    let mut rmi_iter = rmi_slots.into_iter();
    let mut timestamp = spec.start_timestamp;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        timestamp += 600 + rng.random_range(0..3000u64);
        let topic = &topics[rng.random_range(0..topics.len())];
        let case_id = format!("case-{:04}", i + 1);
        let entities = BTreeMap::from([
            ("supplier".to_string(), SUPPLIERS[rng.random_range(0..SUPPLIERS.len())].to_string()),
            ("warehouse".to_string(), WAREHOUSES[rng.random_range(0..WAREHOUSES.len())].to_string()),
        ]);
        let (maker_factor, checker_factor) = if unlinked[i] {
            (format!("{}_variant_{}", topic.maker_factor, i + 1), format!("{}_variant_{}", topic.checker_factor, i + 1))
        } else {
            (topic.maker_factor.clone(), topic.checker_factor.clone())
        };
        let mut b = CaseBuilder { rng: &mut rng, entities: entities.clone(), items: Vec::new(), case_id: case_id.clone() };
        let maker_ev = b.evidence(&topic.maker_action, SourceType::ChatLog);
        let phrase = humanize_key(&topic.maker_factor).to_lowercase();
        let order = format!("order {:06} for listing sku{:05}", (i as u64 * 7919 + 104_729) % 1_000_000, (i * 31 + 17) % 100_000);

        let (verdict, maker_prose, checker_analysis) = if overturned[i] {
            let withheld = rmi_iter.next().unwrap_or(false);
            let core_type = if withheld { SourceType::SystemRecord } else { SourceType::Document };
            let core_ev = b.evidence(&topic.core_action, core_type);
            let mut analysis = format!(
                "Appeal records resolve the complaint. ACTION[{}|critical]{{{}{core_ev}}} => FACTOR[{checker_factor}|support] ~> CONFLICTS[{maker_factor}|extends]",
                topic.core_action,
                if withheld { "?" } else { "" },
            );
            let s = 1 + support_draw.sample(b.rng) as usize;
            let mut pool = topic.supporting.clone();
            pool.shuffle(b.rng);
            pool.truncate(s);
            pool.sort_by_key(|a| topic.supporting.iter().position(|x| x == a));
            for a in pool {
                let st = b.source_type();
                let e = b.evidence(&a, st);
                analysis.push_str(&format!(" ACTION[{a}|supporting]{{{e}}} => FACTOR[{checker_factor}|support]"));
            }
            (
                Verdict::Approve,
                format!("Customer complaint on {order}: {phrase}; the seller disputes it with new documentation."),
                analysis,
            )
        } else {
            let k = confirm_draw.sample(b.rng) as usize;
            let mut documented: Vec<String> = topic.confirming.clone();
            documented.shuffle(b.rng);
            documented.truncate(k);
            let mut analysis = String::from("The original rejection stands.");
            for a in &topic.confirming {
                let st = b.source_type();
                let e = b.evidence(a, st);
                if documented.contains(a) {
                    analysis.push_str(&format!(
                        " ACTION[{a}|supporting]{{{e}}} => FACTOR[{maker_factor}|contradict] ~> CONFLICTS[{maker_factor}|verifies]"
                    ));
                }
            }
            (
                Verdict::Reject,
                format!("Customer complaint on {order}: {phrase}; the seller offered no new documentation."),
                analysis,
            )
        };
        let seller = format!("e{}", b.items.len() + 1);
        b.items.push(EvidenceItem {
            id: seller.clone(),
            source_type: SourceType::SellerStatement,
            content: "Seller statement requesting reinstatement".into(),
            source_ref: format!("{case_id}/{seller}"),
        });
        let items = std::mem::take(&mut b.items);
        out.push(CaseRecord {
            case_id: CaseId::new(case_id).expect("non-empty"),
            violation_category: topic.category.clone(),
            evidence_items: items,
            maker_record: DecisionRecord {
                verdict: Verdict::Reject,
                analysis: format!(
                    "{maker_prose} ACTION[{}]{{{maker_ev}}} => FACTOR[{maker_factor}|contradict]",
                    topic.maker_action
                ),
            },
            checker_record: Some(DecisionRecord { verdict, analysis: checker_analysis }),
            timestamp,
            entities,
            extra: BTreeMap::new(),
        });
    }
    Ok(out)
}

/// Number of annotated actions (Maker plus Checker) in a record.
pub fn action_count(record: &CaseRecord) -> usize {
    let count = |text: &str| crate::ingest::parse_annotations(text).map(|s| s.len()).unwrap_or(0);
    count(&record.maker_record.analysis) + record.checker_record.as_ref().map(|c| count(&c.analysis)).unwrap_or(0)
}
