//! Response producers: the internal answer policies of a trained bundle and
//! an OpenAI-compatible chat client for external models.

mod external;
mod internal;

pub use external::{bitmap_png, eval_external, request_body, ExternalEndpoint, ExternalSummary};
pub use internal::{answer_all, answer_internal};
