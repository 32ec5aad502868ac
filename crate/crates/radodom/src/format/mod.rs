//! On-disk formats.

pub mod gyro;
pub mod kappa;
pub mod keyvalue;
pub mod report;
pub mod scan;
pub mod trajectory;
pub mod velocity;

pub use gyro::{load_gyro, save_gyro};
pub use kappa::{load_kappa, save_kappa};
pub use report::{format_report, report_csv_rows, REPORT_CSV_HEADER};
pub use scan::{load_scan, save_scan};
pub use trajectory::{format_trajectory, load_trajectory, save_trajectory};
pub use velocity::{load_velocities, save_velocities};
