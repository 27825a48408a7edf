//! The environment transition function: a `Session` owns the current
//! `SessionState` and applies actions to it.

use crate::domain::{
    is_purchase_tagged, Action, ContextVector, DomainMode, Item, SessionState, Validate,
};
use crate::env::recommend::{page_of, Recommender};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("session already terminated")]
    SessionClosed,
}

/// What a session reports back for the ledger.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Exposure { item_id: String },
    Rated { item_id: String, value: u8 },
    /// Rating ≥ 4, or a purchase in webshop mode.
    Liked { item_id: String },
    Clicked { item_id: String },
}

/// One live session: fixed ranking source, mutable page state.
pub struct Session<'a> {
    catalog: &'a BTreeMap<String, Item>,
    recommender: &'a Recommender,
    likes_snapshot: &'a BTreeMap<String, u64>,
    round: u32,
    user_id: String,
    exclusions: BTreeSet<String>,
    ranking: Vec<String>,
    state: SessionState,
    events: Vec<SessionEvent>,
    visited: BTreeSet<String>,
}

/// Rating at or above this counts as a like.
pub const LIKE_THRESHOLD: u8 = 4;

impl<'a> Session<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn start(
        catalog: &'a BTreeMap<String, Item>,
        recommender: &'a Recommender,
        likes_snapshot: &'a BTreeMap<String, u64>,
        round: u32,
        user_id: &str,
        mode: DomainMode,
        user_context: ContextVector,
        exclusions: BTreeSet<String>,
        own_ratings: BTreeMap<String, u8>,
    ) -> Self {
        let ranking =
            recommender.ranking(catalog, likes_snapshot, user_id, round, &exclusions);
        let items = page_of(&ranking, catalog, recommender.page_size, 1);
        let interactive_elements = match mode {
            DomainMode::Webshop => default_interactive_elements(),
            DomainMode::Recommendation => Vec::new(),
        };
        let page_context = match mode {
            DomainMode::Webshop => "page type: recommendations; cart: empty".to_string(),
            DomainMode::Recommendation => String::new(),
        };
        let state = SessionState {
            mode,
            page_number: 1,
            items,
            page_context,
            user_context,
            expanded_item: None,
            interactive_elements,
            terminated: false,
            own_ratings,
        };
        let mut session = Session {
            catalog,
            recommender,
            likes_snapshot,
            round,
            user_id: user_id.to_string(),
            exclusions,
            ranking,
            state,
            events: Vec::new(),
            visited: BTreeSet::new(),
        };
        session.record_exposures();
        session
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn visited(&self) -> &BTreeSet<String> {
        &self.visited
    }

    pub fn has_more_pages(&self) -> bool {
        (self.state.page_number as usize) * self.recommender.page_size < self.ranking.len()
    }

    fn record_exposures(&mut self) {
        let ids: Vec<String> = self.state.items.iter().map(|i| i.item_id.clone()).collect();
        for item_id in ids {
            self.events.push(SessionEvent::Exposure { item_id });
        }
    }

    fn load_page(&mut self, page_number: u32) {
        self.state.page_number = page_number;
        self.state.items =
            page_of(&self.ranking, self.catalog, self.recommender.page_size, page_number);
        self.state.expanded_item = None;
        self.record_exposures();
    }

    /// Apply one action; terminated is absorbing.
    pub fn step(&mut self, action: &Action) -> Result<&SessionState, EnvError> {
        if self.state.terminated {
            return Err(EnvError::SessionClosed);
        }
        if !action.is_valid() {
            return Err(EnvError::InvalidTransition(format!("invalid action: {action:?}")));
        }
        let web_only = matches!(
            action,
            Action::WebClick { .. } | Action::WebInput { .. } | Action::WebTerminate
        );
        if web_only && self.state.mode != DomainMode::Webshop {
            return Err(EnvError::InvalidTransition(
                "web action outside webshop mode".into(),
            ));
        }
        match action {
            Action::NextPage => {
                let next = self.state.page_number + 1;
                self.load_page(next);
            }
            Action::PrevPage => {
                if self.state.page_number <= 1 {
                    return Err(EnvError::InvalidTransition("PrevPage at page 1".into()));
                }
                let previous = self.state.page_number - 1;
                self.load_page(previous);
            }
            Action::ClickItem { item_id } => {
                if !self.state.items.iter().any(|i| &i.item_id == item_id) {
                    return Err(EnvError::InvalidTransition(format!(
                        "ClickItem on {item_id} absent from current page"
                    )));
                }
                self.state.expanded_item = Some(item_id.clone());
                self.visited.insert(item_id.clone());
                self.events.push(SessionEvent::Clicked { item_id: item_id.clone() });
            }
            Action::Search { query } => {
                let query_lower = query.to_lowercase();
                self.ranking = self
                    .recommender
                    .ranking(self.catalog, self.likes_snapshot, &self.user_id, self.round, &self.exclusions)
                    .into_iter()
                    .filter(|id| {
                        self.catalog
                            .get(id)
                            .map(|i| i.title.to_lowercase().contains(&query_lower))
                            .unwrap_or(false)
                    })
                    .collect();
                self.load_page(1);
            }
            Action::Rate { item_id, value } => {
                if !self.catalog.contains_key(item_id) {
                    return Err(EnvError::InvalidTransition(format!(
                        "Rate on unknown item {item_id}"
                    )));
                }
                self.state.own_ratings.insert(item_id.clone(), *value);
                self.events.push(SessionEvent::Rated { item_id: item_id.clone(), value: *value });
                if *value >= LIKE_THRESHOLD {
                    self.events.push(SessionEvent::Liked { item_id: item_id.clone() });
                }
            }
            Action::Exit | Action::WebTerminate => {
                self.state.terminated = true;
            }
            Action::WebClick { semantic_id } => {
                if !self.state.interactive_elements.iter().any(|e| e == semantic_id) {
                    return Err(EnvError::InvalidTransition(format!(
                        "WebClick on unknown element {semantic_id}"
                    )));
                }
                if is_purchase_tagged(semantic_id) {
                    self.state.terminated = true;
                    // A purchase counts as a like for the expanded (or first) item.
                    let target = self
                        .state
                        .expanded_item
                        .clone()
                        .or_else(|| self.state.items.first().map(|i| i.item_id.clone()));
                    if let Some(item_id) = target {
                        self.events.push(SessionEvent::Liked { item_id });
                    }
                }
            }
            Action::WebInput { semantic_id, .. } => {
                if !self.state.interactive_elements.iter().any(|e| e == semantic_id) {
                    return Err(EnvError::InvalidTransition(format!(
                        "WebInput on unknown element {semantic_id}"
                    )));
                }
            }
        }
        debug_assert!(self.state.validate().is_empty());
        Ok(&self.state)
    }
}

fn default_interactive_elements() -> Vec<String> {
    vec![
        "search_box".into(),
        "next_page_button".into(),
        "cart_icon".into(),
        "purchase_cart".into(),
        "buy_now".into(),
    ]
}
