//! Golden-file fixtures pinning the two page formats byte-for-byte.

use contextsim_core::domain::{
    ConstraintContext, ContextVector, DomainMode, FactorMask, Item, Mood, SessionState,
    SituationalContext, TemporalContext,
};
use contextsim_core::env::render_page;
use std::collections::BTreeMap;

pub fn fixture_context() -> ContextVector {
    ContextVector {
        temporal: TemporalContext { minute_of_day: 1140, day_of_week: 1 },
        location: "home".into(),
        situational: SituationalContext {
            latest_activity: "dinner at home".into(),
            mood: Mood::Relaxed,
            need_level: 0.4,
            energy_level: 0.7,
        },
        goal: "find something entertaining to watch".into(),
        constraint: ConstraintContext { budget: Some(25.0), time_available_minutes: 120 },
    }
}

fn item(id: &str, title: &str, description: &str, price: Option<f64>, mean: Option<f64>) -> Item {
    Item {
        item_id: id.into(),
        title: title.into(),
        description: description.into(),
        categories: vec!["Drama".into()],
        brand: None,
        price,
        stat_count: if mean.is_some() { 12 } else { 0 },
        stat_mean_rating: mean,
    }
}

#[test]
fn recommendation_page_matches_golden_fixture() {
    let state = SessionState {
        mode: DomainMode::Recommendation,
        page_number: 1,
        items: vec![
            item("1", "Toy Story", "Animated classic", None, Some(4.2)),
            item("6", "Heat", "Crime thriller in Los Angeles", None, Some(3.1)),
        ],
        page_context: String::new(),
        user_context: fixture_context(),
        expanded_item: None,
        interactive_elements: vec![],
        terminated: false,
        // The agent's own rating (4) wins over the dataset mean for "Heat".
        own_ratings: BTreeMap::from([("6".to_string(), 4u8)]),
    };
    let rendered = render_page(&state, &FactorMask::all());
    let golden = include_str!("golden/rec_page.txt");
    assert_eq!(rendered.as_bytes(), golden.as_bytes());
}

#[test]
fn webshop_page_matches_golden_fixture() {
    let state = SessionState {
        mode: DomainMode::Webshop,
        page_number: 2,
        items: vec![
            item("p1", "Cleansing Towelettes", "Gentle makeup remover wipes", Some(8.49), Some(4.4)),
            item("p2", "Travel Pillow", "Memory foam neck support", None, None),
        ],
        page_context: "page type: search; cart: empty".into(),
        user_context: fixture_context(),
        expanded_item: None,
        interactive_elements: vec![
            "search_box".into(),
            "product_link_1".into(),
            "product_link_2".into(),
            "add_to_cart".into(),
            "purchase_cart".into(),
        ],
        terminated: false,
        own_ratings: BTreeMap::new(),
    };
    let rendered = render_page(&state, &FactorMask::all());
    let golden = include_str!("golden/webshop_page.txt");
    assert_eq!(rendered.as_bytes(), golden.as_bytes());
}
