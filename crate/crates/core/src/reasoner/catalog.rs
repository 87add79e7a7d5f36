//! Canonical action templates: entity slots and information-request text.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::text::{humanize_key, tokens};

/// Key tokens naming an entity whose value a case record can supply.
pub const ENTITY_KINDS: &[&str] = &["brand", "carrier", "manufacturer", "registry", "supplier", "warehouse"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTemplate {
    /// Request text with `{slot}` placeholders.
    pub request: String,
    #[serde(default)]
    pub slots: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCatalog {
    templates: BTreeMap<String, ActionTemplate>,
}

impl Default for ActionCatalog {
    fn default() -> Self {
        let mut c = ActionCatalog::empty();
        c.insert(
            "verify_supplier_legitimacy",
            "Please provide the supplier registration certificate for {supplier}",
            &["supplier"],
        );
        c.insert(
            "review_inventory_records",
            "Please provide inventory records and FIFO documentation for the affected lot",
            &[],
        );
        c.insert(
            "contact_supplier",
            "Please provide written confirmation from {supplier} about the affected lot",
            &["supplier"],
        );
        c.insert(
            "verify_warehouse_storage",
            "Please provide storage condition records from warehouse {warehouse}",
            &["warehouse"],
        );
        c
    }
}

impl ActionCatalog {
    pub fn empty() -> Self {
        ActionCatalog { templates: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: &str, request: &str, slots: &[&str]) {
        self.templates.insert(
            key.to_string(),
            ActionTemplate { request: request.to_string(), slots: slots.iter().map(|s| s.to_string()).collect() },
        );
    }

    pub fn get(&self, key: &str) -> Option<&ActionTemplate> {
        self.templates.get(key)
    }

    /// Slot names of an action: declared template slots plus key tokens that
    /// name an entity kind.
    pub fn slot_names(&self, key: &str) -> BTreeSet<String> {
        let mut names: BTreeSet<String> =
            tokens(key).into_iter().filter(|t| ENTITY_KINDS.contains(&t.as_str())).collect();
        if let Some(t) = self.templates.get(key) {
            names.extend(t.slots.iter().cloned());
        }
        names
    }

    /// Bind slots from case entities; unknown entities stay unbound.
    pub fn bind_slots(&self, key: &str, entities: &BTreeMap<String, String>) -> BTreeMap<String, String> {
        self.slot_names(key)
            .into_iter()
            .filter_map(|s| entities.get(&s).map(|v| (s, v.clone())))
            .collect()
    }

    /// Request text for an action with bound slots.
    pub fn request_text(&self, key: &str, slots: &BTreeMap<String, String>) -> String {
        match self.templates.get(key) {
            Some(t) => {
                let mut text = t.request.clone();
                for name in &t.slots {
                    let value = slots.get(name).cloned().unwrap_or_else(|| format!("the {name}"));
                    text = text.replace(&format!("{{{name}}}"), &value);
                }
                text
            }
            None => {
                let mut text = format!("Please provide evidence to {}", humanize_key(key).to_lowercase());
                if !slots.is_empty() {
                    let bound: Vec<String> = slots.iter().map(|(k, v)| format!("{k} {v}")).collect();
                    text.push_str(&format!(" ({})", bound.join(", ")));
                }
                text
            }
        }
    }
}
