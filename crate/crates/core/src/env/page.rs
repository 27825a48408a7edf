//! Byte-exact page rendering for the two domain modes.

use crate::domain::{context_text, DomainMode, FactorMask, SessionState};

fn rating_display(state: &SessionState, item_index: usize) -> String {
    let item = &state.items[item_index];
    if let Some(own) = state.own_ratings.get(&item.item_id) {
        return format!("{:.1}", *own as f64);
    }
    match item.stat_mean_rating {
        Some(mean) => format!("{mean:.1}"),
        None => "n/a".into(),
    }
}

fn price_display(price: Option<f64>) -> String {
    match price {
        Some(p) => format!("{p:.2}"),
        None => "n/a".into(),
    }
}

/// Render the state as the exact page text the agent observes.
pub fn render_page(state: &SessionState, mask: &FactorMask) -> String {
    let mut lines = Vec::new();
    lines.push(format!("PAGE {}", state.page_number));
    let user_context = context_text(&state.user_context, mask);
    match state.mode {
        DomainMode::Recommendation => {
            if !user_context.is_empty() {
                lines.push(format!("CONTEXT: {user_context}"));
            }
            for (index, item) in state.items.iter().enumerate() {
                lines.push(format!(
                    "<- {} -> <- History ratings: {} -> <- Summary: {} ->",
                    item.title,
                    rating_display(state, index),
                    item.description
                ));
            }
        }
        DomainMode::Webshop => {
            if !user_context.is_empty() {
                lines.push(format!("USER CONTEXT: {user_context}"));
            }
            lines.push(format!("CONTEXT: {}", state.page_context));
            lines.push("PRODUCTS:".into());
            for item in &state.items {
                lines.push(format!(
                    "<- {} -> <- Price: {} -> <- Details: {} ->",
                    item.title,
                    price_display(item.price),
                    item.description
                ));
            }
            lines.push("INTERACTIVE ELEMENTS (semantic IDs):".into());
            lines.push(state.interactive_elements.join(", "));
        }
    }
    if let Some(expanded_id) = &state.expanded_item {
        if let Some(item) = state.items.iter().find(|i| &i.item_id == expanded_id) {
            lines.push(format!("EXPANDED: <- {} -> <- Details: {} ->", item.title, item.description));
        }
    }
    lines.join("\n")
}

/// Short state summary recorded in trajectories and thought corpora.
pub fn state_digest(state: &SessionState) -> String {
    let ids: Vec<&str> = state.items.iter().map(|i| i.item_id.as_str()).collect();
    let expanded = state
        .expanded_item
        .as_deref()
        .map(|id| format!(" expanded={id}"))
        .unwrap_or_default();
    format!("page {} items [{}]{}", state.page_number, ids.join(","), expanded)
}
