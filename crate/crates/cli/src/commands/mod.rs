mod diagnose;
mod fit;
mod predict;
mod sections;
mod simulate;
mod waic;

pub use diagnose::diagnose;
pub use fit::fit;
pub use predict::predict;
pub use sections::{overlay_text, sections, OverlayRow};
pub use simulate::{simulate, DATA_FILE, RUN_FILE, TRUTH_FILE};
pub use waic::waic;
