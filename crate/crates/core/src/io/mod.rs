//! Scenario files, CSV output and SVG rendering.

mod report;
mod scenario;
mod svg;
mod table;

pub use report::{acai_sweep_table, arcai_rows_table, arcai_table_csv, run_summary, set_label};
pub use scenario::{parse_scenario, parse_scenario_str, serialize_scenario, write_scenario};
pub use svg::{grid_svg, time_series_svg, write_svg, HeatGrid, Panel, TIME_SERIES_PANELS, UNCONTROLLABLE_MARK};
pub use table::{write_csv, CsvTable};
