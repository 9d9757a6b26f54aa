//! Journal corpus: entry schema, tag registry and the date/run directory
//! layout.

mod entry;
pub mod lint;
mod store;
mod tags;

pub use entry::{EntryStatus, JournalEntry, SCHEMA_VERSION};
pub use store::{
    day_dir_name, parse_day_dir_name, parse_run_dir_name, read_entry_file, run_dir_name,
    Allocation, DayListing, JournalStore, Persisted, RunDir, Scan, ENTRY_FILE,
};
pub use tags::{Tag, TagRegistry, TAGS_FILE};
