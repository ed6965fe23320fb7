use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Aggregate evaluation numbers in the line-oriented report format.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub specificity_avg_mm: f64,
    pub per_frame_mm: Vec<f64>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let per: Vec<String> = self.per_frame_mm.iter().map(|v| v.to_string()).collect();
        format!(
            "accuracy={}\nspecificity_avg_mm={}\nper_frame_mm={}\n",
            self.accuracy,
            self.specificity_avg_mm,
            per.join(",")
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut acc, mut avg, mut per) = (None, None, None);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("bad report line {line:?}")))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Data(format!("bad number {s:?}")));
            match k.trim() {
                "accuracy" => acc = Some(num(v)?),
                "specificity_avg_mm" => avg = Some(num(v)?),
                "per_frame_mm" => {
                    per = Some(if v.trim().is_empty() {
                        Vec::new()
                    } else {
                        v.split(',').map(num).collect::<Result<Vec<_>>>()?
                    })
                }
                other => return Err(Error::Data(format!("unknown report key {other:?}"))),
            }
        }
        match (acc, avg, per) {
            (Some(accuracy), Some(specificity_avg_mm), Some(per_frame_mm)) => Ok(Self {
                accuracy,
                specificity_avg_mm,
                per_frame_mm,
            }),
            _ => Err(Error::Data("report is missing a key".into())),
        }
    }

    /// `frame,specificity_mm` CSV with one row per frame.
    pub fn per_frame_csv(&self) -> String {
        let mut s = String::from("frame,specificity_mm\n");
        for (i, v) in self.per_frame_mm.iter().enumerate() {
            let _ = writeln!(s, "{i},{v}");
        }
        s
    }
}
