//! The bracketed action grammar: rendering and first-match-wins parsing.
//!
//! Grammar constraints: item/semantic ids must not contain `]`, `:`, or
//! whitespace-only content; search queries must be non-empty and `]`-free;
//! web input text must be non-empty and `)`-free. `validate` on `Action`
//! plus these rules make render→parse a bijection.

use crate::domain::Action;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("no recognizable action in: {0:?}")]
pub struct MalformedAction(pub String);

/// Canonical text form of an action.
pub fn render_action(action: &Action) -> String {
    match action {
        Action::NextPage => "[NEXT_PAGE]".into(),
        Action::PrevPage => "[PREVIOUS_PAGE]".into(),
        Action::ClickItem { item_id } => format!("[CLICK_ITEM:{item_id}]"),
        Action::Search { query } => format!("[SEARCH:{query}]"),
        Action::Rate { item_id, value } => format!("[RATE:{item_id}:{value}]"),
        Action::Exit => "[EXIT]".into(),
        Action::WebClick { semantic_id } => format!("click({semantic_id})"),
        Action::WebInput { semantic_id, text } => format!("input({semantic_id}, {text})"),
        Action::WebTerminate => "terminate".into(),
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn parse_bracketed(inner: &str) -> Option<Action> {
    match inner {
        "NEXT_PAGE" => return Some(Action::NextPage),
        "PREVIOUS_PAGE" => return Some(Action::PrevPage),
        "EXIT" => return Some(Action::Exit),
        "PURCHASE CART" => {
            return Some(Action::WebClick { semantic_id: "purchase_cart".into() })
        }
        _ => {}
    }
    if let Some(id) = inner.strip_prefix("CLICK_ITEM:") {
        if valid_id(id) {
            return Some(Action::ClickItem { item_id: id.to_string() });
        }
    }
    if let Some(query) = inner.strip_prefix("SEARCH:") {
        if !query.is_empty() {
            return Some(Action::Search { query: query.to_string() });
        }
    }
    if let Some(rest) = inner.strip_prefix("RATE:") {
        if let Some((id, value_text)) = rest.rsplit_once(':') {
            if let Ok(value) = value_text.parse::<u8>() {
                if valid_id(id) && (1..=5).contains(&value) {
                    return Some(Action::Rate { item_id: id.to_string(), value });
                }
            }
        }
    }
    None
}

/// One candidate match in the scanned text.
fn match_at(text: &str, position: usize) -> Option<Action> {
    let rest = &text[position..];
    if rest.starts_with('[') {
        let end = rest.find(']')?;
        return parse_bracketed(&rest[1..end]);
    }
    if let Some(args) = rest.strip_prefix("click(") {
        let end = args.find(')')?;
        let id = &args[..end];
        if valid_id(id) {
            return Some(Action::WebClick { semantic_id: id.to_string() });
        }
        return None;
    }
    if let Some(args) = rest.strip_prefix("input(") {
        let end = args.find(')')?;
        let (id, input_text) = args[..end].split_once(',')?;
        let input_text = input_text.strip_prefix(' ').unwrap_or(input_text);
        if valid_id(id) && !input_text.is_empty() {
            return Some(Action::WebInput {
                semantic_id: id.to_string(),
                text: input_text.to_string(),
            });
        }
        return None;
    }
    if rest.starts_with("terminate") {
        // Standalone word only.
        let before_ok = position == 0
            || !text[..position].chars().next_back().map(char::is_alphanumeric).unwrap_or(false);
        let after_ok = rest["terminate".len()..]
            .chars()
            .next()
            .map(|c| !c.is_alphanumeric())
            .unwrap_or(true);
        if before_ok && after_ok {
            return Some(Action::WebTerminate);
        }
    }
    None
}

/// First recognizable action in the text wins; anything else is malformed.
pub fn parse_action(text: &str) -> Result<Action, MalformedAction> {
    for (position, _) in text.char_indices() {
        if let Some(action) = match_at(text, position) {
            return Ok(action);
        }
    }
    Err(MalformedAction(text.chars().take(120).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(parse_action("[CLICK_ITEM:42]").unwrap(), Action::ClickItem { item_id: "42".into() });
        assert_eq!(parse_action("[EXIT]").unwrap(), Action::Exit);
        assert_eq!(parse_action("[NEXT_PAGE]").unwrap(), Action::NextPage);
        assert_eq!(parse_action("[PREVIOUS_PAGE]").unwrap(), Action::PrevPage);
        assert_eq!(
            parse_action("[RATE:42:5]").unwrap(),
            Action::Rate { item_id: "42".into(), value: 5 }
        );
        assert_eq!(
            parse_action("[SEARCH:space movies]").unwrap(),
            Action::Search { query: "space movies".into() }
        );
        assert_eq!(
            parse_action("[PURCHASE CART]").unwrap(),
            Action::WebClick { semantic_id: "purchase_cart".into() }
        );
        assert_eq!(
            parse_action("click(buy_now)").unwrap(),
            Action::WebClick { semantic_id: "buy_now".into() }
        );
        assert_eq!(
            parse_action("input(search_box, red shoes)").unwrap(),
            Action::WebInput { semantic_id: "search_box".into(), text: "red shoes".into() }
        );
        assert_eq!(parse_action("terminate").unwrap(), Action::WebTerminate);
    }

    #[test]
    fn first_match_wins() {
        assert_eq!(parse_action("I think [EXIT] then [NEXT_PAGE]").unwrap(), Action::Exit);
        assert_eq!(
            parse_action("ACTION: [CLICK_ITEM:7]\nbecause...").unwrap(),
            Action::ClickItem { item_id: "7".into() }
        );
    }

    #[test]
    fn prose_is_malformed() {
        assert!(parse_action("I will click item 42").is_err());
        assert!(parse_action("").is_err());
        assert!(parse_action("[RATE:42:6]").is_err());
        assert!(parse_action("[exit]").is_err());
        assert!(parse_action("[SEARCH:]").is_err());
    }

    #[test]
    fn terminate_needs_word_boundary() {
        assert!(parse_action("exterminate everything").is_err());
        assert_eq!(parse_action("then terminate.").unwrap(), Action::WebTerminate);
    }

    fn arbitrary_action() -> impl Strategy<Value = Action> {
        let id = "[a-zA-Z0-9_.-]{1,12}";
        let query = "[a-zA-Z0-9 _.-]{1,20}";
        let text = "[a-zA-Z0-9 _.-]{1,20}";
        prop_oneof![
            Just(Action::NextPage),
            Just(Action::PrevPage),
            Just(Action::Exit),
            Just(Action::WebTerminate),
            id.prop_map(|item_id| Action::ClickItem { item_id }),
            query.prop_map(|q| Action::Search { query: q.trim().to_string() })
                .prop_filter("non-empty", |a| match a {
                    Action::Search { query } => !query.is_empty(),
                    _ => true,
                }),
            (id, 1u8..=5).prop_map(|(item_id, value)| Action::Rate { item_id, value }),
            id.prop_map(|semantic_id| Action::WebClick { semantic_id }),
            (id, text).prop_map(|(semantic_id, t)| Action::WebInput {
                semantic_id,
                text: t.trim().to_string(),
            })
            .prop_filter("non-empty", |a| match a {
                Action::WebInput { text, .. } => !text.is_empty(),
                _ => true,
            }),
        ]
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(action in arbitrary_action()) {
            let rendered = render_action(&action);
            prop_assert_eq!(parse_action(&rendered).unwrap(), action);
        }

        #[test]
        fn round_trip_survives_surrounding_prose(action in arbitrary_action(),
                                                 prefix in "[A-Za-z ,.]{0,30}") {
            // A leading prose fragment must not change the parse (no grammar
            // tokens can appear in the prefix alphabet except "terminate").
            prop_assume!(!prefix.to_lowercase().contains("terminate"));
            prop_assume!(!prefix.to_lowercase().contains("click"));
            prop_assume!(!prefix.to_lowercase().contains("input"));
            let rendered = format!("{prefix} {}", render_action(&action));
            prop_assert_eq!(parse_action(&rendered).unwrap(), action);
        }
    }
}
