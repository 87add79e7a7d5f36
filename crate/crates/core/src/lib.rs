//! Conflict-aware Evidence-Action-Factor-Decision (EAFD) graph reasoning for
//! two-tier Maker-Checker adjudication.
//!
//! Historical review records are extracted into validated dual-lane case
//! graphs ([`ingest`], [`validate`]), indexed into a retrievable knowledge
//! base ([`kb`]), and used to adjudicate new cases top-down from factors to
//! actions to evidence ([`reasoner`]). A case whose critical verification
//! actions cannot be grounded gets a Request-More-Information verdict with
//! the exact actions that are missing.

pub mod graph;
pub mod ingest;
pub mod json;
pub mod text;
pub mod validate;
pub mod kb;
pub mod reasoner;
pub mod fixtures;
pub mod eval;
pub mod service;
