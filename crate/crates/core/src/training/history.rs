use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One row of training history. Epoch 0 is the untrained model and has no
/// training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mae: Option<f64>,
    pub val_mae: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    /// First epoch with the lowest validation MAE.
    pub fn best(&self) -> Option<EpochRecord> {
        self.records
            .iter()
            .copied()
            .fold(None, |best: Option<EpochRecord>, r| match best {
                Some(b) if b.val_mae <= r.val_mae => Some(b),
                _ => Some(r),
            })
    }

    /// `epoch,train_mae,val_mae`; values use shortest round-trip formatting.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_mae", "val_mae"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.train_mae.map(|v| v.to_string()).unwrap_or_default(),
                r.val_mae.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != ["epoch", "train_mae", "val_mae"] {
            return Err(Error::Data("unexpected history header".into()));
        }
        let mut records = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let bad = || Error::Data(format!("bad history row {:?}", rec.iter().collect::<Vec<_>>()));
            records.push(EpochRecord {
                epoch: rec[0].parse().map_err(|_| bad())?,
                train_mae: match &rec[1] {
                    "" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                },
                val_mae: rec[2].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { records })
    }

    /// Hex sha256 of the CSV form.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv(&mut buf).expect("writing to memory");
        hex(&Sha256::digest(&buf))
    }

    /// Line plot of train and validation MAE against epoch.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const PAD: f64 = 48.0;
        let max_epoch = self.records.iter().map(|r| r.epoch).max().unwrap_or(0).max(1) as f64;
        let max_y = self
            .records
            .iter()
            .flat_map(|r| [Some(r.val_mae), r.train_mae])
            .flatten()
            .fold(0.0_f64, f64::max)
            .max(1e-12);
        let x = |e: usize| PAD + (W - 2.0 * PAD) * e as f64 / max_epoch;
        let y = |v: f64| H - PAD - (H - 2.0 * PAD) * v / max_y;
        let line = |pts: Vec<(f64, f64)>, color: &str| {
            let p: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.1},{b:.1}")).collect();
            format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                p.join(" ")
            )
        };
        let train: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter_map(|r| r.train_mae.map(|v| (x(r.epoch), y(v))))
            .collect();
        let val: Vec<(f64, f64)> = self.records.iter().map(|r| (x(r.epoch), y(r.val_mae))).collect();
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        );
        svg += &format!(
            "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n",
            b = H - PAD,
            r = W - PAD
        );
        svg += &format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">epoch</text>\n<text x=\"8\" y=\"{PAD}\">{max_y:.4}</text>\n",
            W / 2.0,
            H - 12.0
        );
        svg += &line(train, "#1f77b4");
        svg += &line(val, "#d62728");
        svg += &format!(
            "<text x=\"{}\" y=\"20\" fill=\"#1f77b4\">train</text>\n<text x=\"{}\" y=\"20\" fill=\"#d62728\">validation</text>\n</svg>\n",
            W - 180.0,
            W - 120.0
        );
        svg
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
