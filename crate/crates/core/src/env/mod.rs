//! The recommender environment: strategies and paging, byte-exact page
//! rendering, the action grammar, the transition function, and the shared
//! interaction ledger.

pub mod actions;
pub mod mf;
pub mod page;
pub mod recommend;
pub mod session;

pub use actions::{parse_action, render_action, MalformedAction};
pub use mf::{train_mf, train_triples, MfError, MfModel, MfParams};
pub use page::{render_page, state_digest};
pub use recommend::{page_of, InteractionLedger, RecommendError, Recommender, Strategy};
pub use session::{EnvError, Session, SessionEvent, LIKE_THRESHOLD};
