//! Hand-built cases used by the examples, the tests and the demo service.
//!
//! The centrepiece is a multi-stage expired-food appeal: a customer
//! complaint leads to a Maker rejection, and the appeal is later overturned
//! after inventory review, warehouse validation and direct supplier contact.
//! Its evidence arrives in four batches so the RMI loop can be replayed.

use std::collections::BTreeMap;

use crate::graph::{CaseGraph, CaseId, SourceType, Verdict};
use crate::ingest::{extract_graph, AnnotationExtractor, CaseRecord, DecisionRecord, EvidenceItem};

pub const D2_CATEGORY: &str = "PQ.EXPIRED_PRODUCTS";
pub const D2_SUPPLIER: &str = "Harvest Lane Foods";
pub const D2_WAREHOUSE: &str = "PHX3";

fn item(id: &str, source_type: SourceType, content: &str) -> EvidenceItem {
    EvidenceItem { id: id.into(), source_type, content: content.into(), source_ref: format!("appeal-d2/{id}") }
}

/// The thirteen atomic facts of the appeal, in arrival order.
pub fn d2_evidence() -> Vec<EvidenceItem> {
    use SourceType::*;
    vec![
        item("e1", ChatLog, "Customer complaint: food product received expired by three months"),
        item("e2", SystemRecord, "FBA warehouse PHX3 fulfillment"),
        item("e3", Document, "Purchase orders from supplier Harvest Lane Foods"),
        item("e4", Document, "Inventory records review: FIFO rotation applied to lot 4471"),
        item("e5", Document, "FIFO documentation for lot 4471"),
        item("e6", ImageExtract, "Warehouse inspection photos"),
        item("e7", Document, "Warehouse storage inspection report PHX3: temperature and rotation within policy"),
        item("e8", SystemRecord, "Trusted supplier status"),
        item("e9", SystemRecord, "High sales volume within ship date"),
        item("e10", SystemRecord, "1 defect out of 4,523 compliant transactions (0.022%)"),
        item("e11", ChatLog, "Direct contact with supplier Harvest Lane Foods confirmed the lot was within date at receipt"),
        item("e12", SystemRecord, "Prior appeal case verified supplier registration"),
        item("e13", SellerStatement, "Seller appeal statement requesting reinstatement"),
    ]
}

/// Evidence batches: the initial file, the first appeal, the second
/// appeal, and the final consolidated review.
pub fn d2_stages() -> Vec<Vec<EvidenceItem>> {
    let all = d2_evidence();
    vec![all[0..2].to_vec(), all[2..5].to_vec(), all[5..7].to_vec(), all[7..13].to_vec()]
}

pub const D2_MAKER_ANALYSIS: &str = "Customer reports a food product received expired by three months; \
    fulfillment was FBA. Zero-tolerance food safety policy applies. \
    ACTION[validate_customer_complaint]{e1,e2} => FACTOR[expired_product_received|contradict]";

pub const D2_CHECKER_ANALYSIS: &str = "Inventory records and FIFO documentation show proper rotation. \
    ACTION[review_inventory_records|critical]{e3,e4,e5,e9,e10} => FACTOR[isolated_incident|support] \
    ~> CONFLICTS[expired_product_received|extends] \
    Third-party inspection confirmed storage conditions. \
    ACTION[verify_warehouse_storage|supporting]{e6,e7} => FACTOR[storage_conditions_confirmed|support] \
    Direct supplier contact and a prior case confirm the supplier. \
    ACTION[contact_supplier|critical]{e8,e11,e12} => FACTOR[isolated_incident|support]";

fn d2_entities() -> BTreeMap<String, String> {
    BTreeMap::from([("supplier".into(), D2_SUPPLIER.into()), ("warehouse".into(), D2_WAREHOUSE.into())])
}

/// The fully documented, overturned appeal.
pub fn d2_record() -> CaseRecord {
    CaseRecord {
        case_id: CaseId::new("appeal-d2").expect("non-empty"),
        violation_category: D2_CATEGORY.into(),
        evidence_items: d2_evidence(),
        maker_record: DecisionRecord { verdict: Verdict::Reject, analysis: D2_MAKER_ANALYSIS.into() },
        checker_record: Some(DecisionRecord { verdict: Verdict::Approve, analysis: D2_CHECKER_ANALYSIS.into() }),
        timestamp: 1_736_000_000,
        entities: d2_entities(),
        extra: BTreeMap::new(),
    }
}

/// The appeal as first seen: Maker record and the first evidence batch.
pub fn d2_query() -> CaseRecord {
    let mut q = d2_record();
    q.checker_record = None;
    q.evidence_items = d2_stages().remove(0);
    q
}

/// Extracted graph of the documented appeal.
pub fn d2_graph() -> CaseGraph {
    extract_graph(&d2_record(), &AnnotationExtractor).expect("fixture extracts")
}

const PRECEDENT_PARTIES: [(&str, &str); 9] = [
    ("Golden Acre Provisions", "SEA2"),
    ("Blue Ridge Pantry", "DFW7"),
    ("Northwind Grocers", "ORD4"),
    ("Copper Kettle Foods", "LAX9"),
    ("Meadowbrook Farms", "ATL6"),
    ("Silver Birch Trading", "BOS3"),
    ("Riverbend Organics", "PHL5"),
    ("Sunfield Staples", "DEN2"),
    ("Oak Hollow Supply", "MCO1"),
];

/// Nine earlier expired-food appeals, all overturned through the same three
/// verification actions.
pub fn d2_precedents() -> Vec<CaseRecord> {
    use SourceType::*;
    PRECEDENT_PARTIES
        .iter()
        .enumerate()
        .map(|(i, (supplier, warehouse))| {
            let n = i + 1;
            let evidence = vec![
                item("p1", ChatLog, "Customer complaint: expired food product received"),
                item("p2", SystemRecord, &format!("FBA warehouse {warehouse} fulfillment")),
                item("p3", Document, &format!("Inventory records review for supplier {supplier} lots")),
                item("p4", Document, &format!("Warehouse storage audit {warehouse}")),
                item("p5", ChatLog, &format!("Contact with supplier {supplier} confirmed shipment dates")),
            ];
            let checker = "Seller records show proper rotation; an isolated incident. \
                ACTION[review_inventory_records|critical]{p3} => FACTOR[isolated_incident|support] \
                ~> CONFLICTS[expired_product_received|extends] \
                ACTION[contact_supplier|critical]{p5} => FACTOR[isolated_incident|support] \
                ACTION[verify_warehouse_storage|supporting]{p4} => FACTOR[isolated_incident|support]";
            CaseRecord {
                case_id: CaseId::new(format!("precedent-{n:02}")).expect("non-empty"),
                violation_category: D2_CATEGORY.into(),
                evidence_items: evidence,
                maker_record: DecisionRecord {
                    verdict: Verdict::Reject,
                    analysis: "Customer reports an expired food product received. \
                        ACTION[validate_customer_complaint]{p1,p2} => FACTOR[expired_product_received|contradict]"
                        .into(),
                },
                checker_record: Some(DecisionRecord { verdict: Verdict::Approve, analysis: checker.into() }),
                timestamp: 1_700_000_000 + n as u64 * 86_400,
                entities: BTreeMap::from([
                    ("supplier".into(), supplier.to_string()),
                    ("warehouse".into(), warehouse.to_string()),
                ]),
                extra: BTreeMap::new(),
            }
        })
        .collect()
}

/// An upheld case whose Checker directly re-verifies the Maker factor.
pub fn path_one_record() -> CaseRecord {
    use SourceType::*;
    CaseRecord {
        case_id: CaseId::new("upheld-1").expect("non-empty"),
        violation_category: "IP.COUNTERFEIT".into(),
        evidence_items: vec![
            item("e1", Document, "Rights owner test buy report"),
            item("e2", SystemRecord, "Brand registry mismatch on invoice"),
        ],
        maker_record: DecisionRecord {
            verdict: Verdict::Reject,
            analysis: "ACTION[verify_test_buy]{e1} => FACTOR[counterfeit_confirmed|contradict]".into(),
        },
        checker_record: Some(DecisionRecord {
            verdict: Verdict::Reject,
            analysis: "ACTION[check_brand_registry|critical]{e2} => FACTOR[counterfeit_confirmed|contradict] \
                ~> CONFLICTS[counterfeit_confirmed|verifies]"
                .into(),
        }),
        timestamp: 1_700_000_000,
        entities: BTreeMap::new(),
        extra: BTreeMap::new(),
    }
}
