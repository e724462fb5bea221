#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const LATTICE: [&str; 6] = ["--c1", "1.0236", "--c2", "1.0464", "--r0", "0.0377"];

pub fn bdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdt"))
        .args(args)
        .output()
        .expect("spawn bdt")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

pub fn curve_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/treasury_par_yield_2023-06-16.csv")
}

/// Business-day-like rate history with a deterministic wiggle.
pub fn write_rate_history(dir: &Path, n: usize) -> PathBuf {
    let mut text = String::from("DATE,DGS10\n");
    let start = chrono::NaiveDate::from_ymd_opt(2022, 1, 3).unwrap();
    let mut rate = 3.5f64;
    for i in 0..n {
        let date = start + chrono::Duration::days(i as i64);
        let step = ((i * 7919) % 13) as f64 - 6.0;
        rate *= 1.0 + step * 0.002;
        text.push_str(&format!("{date},{rate:.4}\n"));
        if i == 5 {
            text.push_str(&format!("{date},.\n"));
        }
    }
    let path = dir.join("rates.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// Vendor-style equity history with both Close and Adj Close columns.
pub fn write_equity_history(dir: &Path, n: usize) -> PathBuf {
    let mut text = String::from("Date,Open,High,Low,Close,Adj Close,Volume\n");
    let start = chrono::NaiveDate::from_ymd_opt(2022, 1, 3).unwrap();
    let mut price = 400.0f64;
    for i in 0..n {
        let date = start + chrono::Duration::days(i as i64);
        let step = ((i * 104729) % 11) as f64 - 4.8;
        price *= 1.0 + step * 0.003;
        text.push_str(&format!(
            "{date},{price:.2},{price:.2},{price:.2},{:.2},{price:.4},1000\n",
            price * 1.01
        ));
    }
    let path = dir.join("equity.csv");
    std::fs::write(&path, text).unwrap();
    path
}
